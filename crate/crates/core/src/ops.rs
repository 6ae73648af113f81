//! Stencil operators, access-mode declarations, reductions, and fusion.
//!
//! A stencil operator is a computation over a tuple of per-grid accessors
//! (see [`Cells`]); it may return a value. It declares one access mode per
//! grid and, optionally, the maximum offsets its body uses per grid.
//! Operators with no declared access list default to `ReadWrite` on every
//! grid, which is always safe but disables skip optimizations.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::cells::Cells;
use crate::element::{Element, FloatElement, Ordered, Summable};
use crate::error::{GsclError, Result};
use crate::geom::HaloSpec;

/// How an operator touches one grid of its tuple. Declaring modes lets
/// backends skip uploads, downloads, and halo exchanges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessMode {
    ReadOnly,
    WriteOnly,
    ReadWrite,
}

impl AccessMode {
    pub fn readable(self) -> bool {
        self != AccessMode::WriteOnly
    }

    pub fn writable(self) -> bool {
        self != AccessMode::ReadOnly
    }

    /// Least mode permitting everything either side permits (used by fusion).
    pub fn join(self, other: Self) -> Self {
        if self == other {
            self
        } else {
            AccessMode::ReadWrite
        }
    }
}

/// A stencil operator: a body over a tuple of accessors, an access list,
/// and a declared halo footprint per grid.
///
/// Bodies must be deterministic given accessor contents and free of shared
/// mutable state: backends invoke them concurrently on disjoint core
/// elements.
#[derive(Debug, Clone)]
pub struct StencilOp<const D: usize, F> {
    modes: Vec<AccessMode>,
    footprints: Option<Vec<HaloSpec<D>>>,
    stateful: bool,
    body: F,
}

impl<const D: usize, F> StencilOp<D, F> {
    /// Operator with a declared access list and per-grid footprint.
    pub fn new(modes: &[AccessMode], footprints: &[HaloSpec<D>], body: F) -> Self {
        assert_eq!(
            modes.len(),
            footprints.len(),
            "one access mode and one footprint per grid"
        );
        Self {
            modes: modes.to_vec(),
            footprints: Some(footprints.to_vec()),
            stateful: false,
            body,
        }
    }

    /// Operator with no declared traits: `ReadWrite` on every grid, the
    /// footprint bounded only by each grid's halo.
    pub fn undeclared(arity: usize, body: F) -> Self {
        Self {
            modes: vec![AccessMode::ReadWrite; arity],
            footprints: None,
            stateful: false,
            body,
        }
    }

    /// Declare that the body queries element indices (a stateful shape).
    pub fn stateful(mut self) -> Self {
        self.stateful = true;
        self
    }

    pub fn arity(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[AccessMode] {
        &self.modes
    }

    pub fn is_stateful(&self) -> bool {
        self.stateful
    }

    /// Declared footprint for grid `g`, falling back to the grid's halo.
    pub fn footprint(&self, g: usize, grid_halo: HaloSpec<D>) -> HaloSpec<D> {
        match &self.footprints {
            Some(f) => f[g],
            None => grid_halo,
        }
    }

    pub(crate) fn body(&self) -> &F {
        &self.body
    }

    /// Same operator, with every application counted. Used by scan-count
    /// instrumentation.
    pub fn counted<T, R>(
        self,
        counter: Arc<AtomicU64>,
    ) -> StencilOp<D, impl Fn(&mut Cells<T, D>) -> R>
    where
        T: Element,
        F: Fn(&mut Cells<T, D>) -> R,
    {
        let inner = self.body;
        StencilOp {
            modes: self.modes,
            footprints: self.footprints,
            stateful: self.stateful,
            body: move |cells: &mut Cells<T, D>| {
                counter.fetch_add(1, Ordering::Relaxed);
                inner(cells)
            },
        }
    }
}

/// Fuse two operators over the same grid tuple into one that runs both
/// bodies per element in a single pass and returns the second body's value.
///
/// The second operator may read what the first writes at the zero offset
/// only; one-pass execution is not legal for lagged reads of fresh values.
pub fn fuse<T, const D: usize, F1, R1, F2, R2>(
    first: StencilOp<D, F1>,
    second: StencilOp<D, F2>,
) -> Result<StencilOp<D, impl Fn(&mut Cells<T, D>) -> R2>>
where
    T: Element,
    F1: Fn(&mut Cells<T, D>) -> R1,
    F2: Fn(&mut Cells<T, D>) -> R2,
{
    if first.arity() != second.arity() {
        return Err(GsclError::FusionArityMismatch {
            left: first.arity(),
            right: second.arity(),
        });
    }
    let modes: Vec<AccessMode> = first
        .modes
        .iter()
        .zip(&second.modes)
        .map(|(a, b)| a.join(*b))
        .collect();
    let footprints = match (&first.footprints, &second.footprints) {
        (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| x.max(y)).collect()),
        _ => None,
    };
    let (fa, fb) = (first.body, second.body);
    Ok(StencilOp {
        modes,
        footprints,
        stateful: first.stateful || second.stateful,
        body: move |cells: &mut Cells<T, D>| {
            fa(cells);
            fb(cells)
        },
    })
}

/// A commutative, associative reduction with an identity element.
/// Associativity beyond commutativity is required so backends can reduce
/// in parallel trees.
#[derive(Debug, Clone)]
pub struct Reduction<R, C> {
    pub(crate) identity: R,
    pub(crate) combine: C,
}

impl<R: Clone, C: Fn(R, R) -> R> Reduction<R, C> {
    pub fn new(identity: R, combine: C) -> Self {
        Self { identity, combine }
    }

    pub fn identity(&self) -> R {
        self.identity.clone()
    }

    pub fn combine(&self, a: R, b: R) -> R {
        (self.combine)(a, b)
    }
}

/// Logical and; identity `true`. Reducing a comparison operator with this
/// realizes an infinite-norm stop test.
pub fn reduction_and() -> Reduction<bool, impl Fn(bool, bool) -> bool> {
    Reduction::new(true, |a, b| a && b)
}

/// Sum; identity zero.
pub fn reduction_sum<T: Summable>() -> Reduction<T, impl Fn(T, T) -> T> {
    Reduction::new(T::ADD_IDENTITY, |a: T, b: T| a + b)
}

/// Maximum; identity is the least value of the element role.
pub fn reduction_max<T: Ordered>() -> Reduction<T, impl Fn(T, T) -> T> {
    Reduction::new(T::MIN_IDENTITY, |a: T, b: T| if b > a { b } else { a })
}

/// The averaging operator: writes grid 0 from grid 1's center and axis
/// neighbors,
/// `v() = 1/36 * (6*u() - u(+e_k) - u(-e_k) for every axis k)`.
/// In 3D this touches the six face neighbors; lower dimensions drop the
/// missing axis terms and keep the same coefficients.
pub fn op_diffusion<T: FloatElement, const D: usize>() -> StencilOp<D, impl Fn(&mut Cells<T, D>)>
{
    StencilOp::new(
        &[AccessMode::WriteOnly, AccessMode::ReadOnly],
        &[HaloSpec::none(), HaloSpec::uniform(1)],
        |cells: &mut Cells<T, D>| {
            let mut acc = T::from_f64(6.0) * cells.center(1);
            for k in 0..D {
                let mut off = [0i64; D];
                off[k] = 1;
                acc = acc - cells.read(1, off);
                off[k] = -1;
                acc = acc - cells.read(1, off);
            }
            cells.write(0, T::from_f64(1.0 / 36.0) * acc);
        },
    )
}

/// Per-element closeness test between two grids:
/// `|now() - before()| <= epsilon`. Reduced with logical and this is the
/// infinite-norm convergence check.
pub fn op_convergence<T: FloatElement, const D: usize>(
    epsilon: T,
) -> StencilOp<D, impl Fn(&mut Cells<T, D>) -> bool> {
    StencilOp::new(
        &[AccessMode::ReadOnly, AccessMode::ReadOnly],
        &[HaloSpec::none(), HaloSpec::none()],
        move |cells: &mut Cells<T, D>| (cells.center(0) - cells.center(1)).abs() <= epsilon,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn join_table() {
        use AccessMode::*;
        assert_eq!(ReadOnly.join(ReadOnly), ReadOnly);
        assert_eq!(ReadOnly.join(WriteOnly), ReadWrite);
        assert_eq!(WriteOnly.join(ReadOnly), ReadWrite);
        assert_eq!(ReadWrite.join(ReadOnly), ReadWrite);
        assert_eq!(WriteOnly.join(WriteOnly), WriteOnly);
    }

    #[test]
    fn fuse_checks_arity() {
        let a = StencilOp::<2, _>::undeclared(2, |c: &mut Cells<f64, 2>| {
            let _ = c.center(0);
        });
        let b = StencilOp::<2, _>::undeclared(1, |c: &mut Cells<f64, 2>| {
            let _ = c.center(0);
        });
        assert!(matches!(
            fuse(a, b),
            Err(GsclError::FusionArityMismatch { left: 2, right: 1 })
        ));
    }

    #[test]
    fn fused_modes_are_joined() {
        let a = op_diffusion::<f64, 2>();
        let b = op_convergence::<f64, 2>(1e-6);
        let f = fuse(a, b).unwrap();
        assert_eq!(f.modes(), &[AccessMode::ReadWrite, AccessMode::ReadOnly]);
        let foot = f.footprint(1, HaloSpec::uniform(3));
        assert_eq!(foot, HaloSpec::uniform(1));
    }

    #[test]
    fn and_reduction_over_mixed_values() {
        let r = reduction_and();
        assert!(!r.combine(r.combine(true, true), false));
        assert!(r.combine(r.identity(), true));
    }

    proptest! {
        #[test]
        fn and_laws(a: bool, b: bool, c: bool) {
            let r = reduction_and();
            prop_assert_eq!(r.combine(a, b), r.combine(b, a));
            prop_assert_eq!(r.combine(r.combine(a, b), c), r.combine(a, r.combine(b, c)));
            prop_assert_eq!(r.combine(r.identity(), a), a);
        }

        #[test]
        fn int_sum_laws(a: i64, b: i64, c: i64) {
            let (a, b, c) = (a >> 3, b >> 3, c >> 3); // keep sums in range
            let r = reduction_sum::<i64>();
            prop_assert_eq!(r.combine(a, b), r.combine(b, a));
            prop_assert_eq!(r.combine(r.combine(a, b), c), r.combine(a, r.combine(b, c)));
            prop_assert_eq!(r.combine(r.identity(), a), a);
        }

        #[test]
        fn float_sum_laws(a in -1e6f64..1e6, b in -1e6f64..1e6, c in -1e6f64..1e6) {
            let r = reduction_sum::<f64>();
            // commutativity and identity are exact for IEEE addition
            prop_assert_eq!(r.combine(a, b).to_bits(), r.combine(b, a).to_bits());
            prop_assert_eq!(r.combine(r.identity(), a), a);
            // associativity holds to roundoff
            let l = r.combine(r.combine(a, b), c);
            let rr = r.combine(a, r.combine(b, c));
            prop_assert!((l - rr).abs() <= 1e-9 * (1.0 + l.abs().max(rr.abs())));
        }

        #[test]
        fn max_laws(a: i64, b: i64, c: i64) {
            let r = reduction_max::<i64>();
            prop_assert_eq!(r.combine(a, b), r.combine(b, a));
            prop_assert_eq!(r.combine(r.combine(a, b), c), r.combine(a, r.combine(b, c)));
            prop_assert_eq!(r.combine(r.identity(), a), a);
        }

        #[test]
        fn max_matches_linear_scan(v in proptest::collection::vec(-1000i64..1000, 1..25)) {
            let r = reduction_max::<i64>();
            let got = v.iter().fold(r.identity(), |acc, &x| r.combine(acc, x));
            prop_assert_eq!(got, *v.iter().max().unwrap());
        }
    }
}
