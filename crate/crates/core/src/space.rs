//! Iteration spaces: the ordered/unordered application semantics.
//!
//! `do_all` and `do_reduce` guarantee no order. `do_diamond` (2D) processes
//! `(i-1,j)` and `(i,j-1)` before `(i,j)`. Sweeps order strictly along one
//! axis and leave the other axes unordered. This module holds the
//! sequential reference implementation every backend must match: row-major
//! ascending for all/reduce/diamond, axis-major for sweeps.

use crate::cells::{Cells, ViewSet};
use crate::element::Element;
use crate::error::Result;

/// The application order a stencil computation requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationSpaceKind {
    All,
    Reduce,
    Diamond,
    Sweep { axis: usize, direction: Direction },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// Local coordinates of flattened row `r` (all axes but the last).
#[inline]
pub(crate) fn row_start<const D: usize>(core: [usize; D], r: usize) -> [usize; D] {
    let mut local = [0usize; D];
    let mut rem = r;
    for k in (0..D - 1).rev() {
        local[k] = rem % core[k];
        rem /= core[k];
    }
    local
}

/// Fixed pairwise tree over `items` in their given order. All backends
/// reduce through this, so a configuration is bit-reproducible and float
/// results stay within roundoff of each other across worker counts.
pub(crate) fn tree_fold<R>(mut items: Vec<R>, combine: &impl Fn(R, R) -> R) -> Option<R> {
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(combine(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}

/// Apply `body` once per core element, row-major ascending.
pub(crate) fn seq_all<T, const D: usize, F, R>(
    vs: &ViewSet<T, D>,
    body: &F,
    stateful: bool,
) -> Result<()>
where
    T: Element,
    F: Fn(&mut Cells<T, D>) -> R,
{
    let core = vs.core();
    let rows: usize = core[..D - 1].iter().product();
    let row_len = core[D - 1];
    let mut cells = vs.cells(stateful);
    for r in 0..rows {
        cells.bind(row_start(core, r));
        for _ in 0..row_len {
            body(&mut cells);
            cells.advance();
        }
    }
    match cells.take_violation() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Apply `body` once per core element and reduce the returned values:
/// rows are folded left-to-right from the identity, row partials combine in
/// a pairwise tree.
pub(crate) fn seq_reduce<T, const D: usize, F, R, C>(
    vs: &ViewSet<T, D>,
    body: &F,
    stateful: bool,
    identity: &R,
    combine: &C,
) -> Result<R>
where
    T: Element,
    F: Fn(&mut Cells<T, D>) -> R,
    R: Clone,
    C: Fn(R, R) -> R,
{
    let core = vs.core();
    let rows: usize = core[..D - 1].iter().product();
    let row_len = core[D - 1];
    let mut cells = vs.cells(stateful);
    let mut partials = Vec::with_capacity(rows);
    for r in 0..rows {
        cells.bind(row_start(core, r));
        let mut acc = identity.clone();
        for _ in 0..row_len {
            acc = combine(acc, body(&mut cells));
            cells.advance();
        }
        partials.push(acc);
    }
    match cells.take_violation() {
        Some(e) => Err(e),
        None => Ok(tree_fold(partials, combine).unwrap_or_else(|| identity.clone())),
    }
}

/// Sequential reference for the diamond order: row-major ascending is a
/// linear extension of the (i-1,j),(i,j-1) partial order.
pub(crate) fn seq_diamond<T, const D: usize, F, R>(
    vs: &ViewSet<T, D>,
    body: &F,
    stateful: bool,
) -> Result<()>
where
    T: Element,
    F: Fn(&mut Cells<T, D>) -> R,
{
    seq_all(vs, body, stateful)
}

/// Sequential reference for sweeps: the swept axis is the outer loop, the
/// remaining axes iterate row-major inside each plane.
pub(crate) fn seq_sweep<T, const D: usize, F, R>(
    vs: &ViewSet<T, D>,
    body: &F,
    stateful: bool,
    axis: usize,
    direction: Direction,
) -> Result<()>
where
    T: Element,
    F: Fn(&mut Cells<T, D>) -> R,
{
    let core = vs.core();
    let orth: usize = (0..D).filter(|&k| k != axis).map(|k| core[k]).product();
    let mut cells = vs.cells(stateful);
    let steps = core[axis];
    for s in 0..steps {
        let t = match direction {
            Direction::Increasing => s,
            Direction::Decreasing => steps - 1 - s,
        };
        for o in 0..orth {
            let mut local = [0usize; D];
            let mut rem = o;
            for k in (0..D).rev() {
                if k == axis {
                    continue;
                }
                local[k] = rem % core[k];
                rem /= core[k];
            }
            local[axis] = t;
            cells.bind(local);
            body(&mut cells);
        }
    }
    match cells.take_violation() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[cfg(test)]
pub(crate) mod testkit {
    //! Bare view construction for engine unit tests: one monolithic tile
    //! over a plain buffer.

    use super::*;
    use crate::cells::GridView;
    use crate::geom::{strides, Domain, HaloSpec};
    use crate::ops::AccessMode;

    pub struct RawGrid<const D: usize> {
        pub buf: Vec<f64>,
        pub core: [usize; D],
        pub halo: HaloSpec<D>,
    }

    impl<const D: usize> RawGrid<D> {
        pub fn new(core: [usize; D], halo: HaloSpec<D>, fill: f64) -> Self {
            let cells = Domain { extents: core }.allocated_cells(&halo);
            Self {
                buf: vec![fill; cells],
                core,
                halo,
            }
        }

        pub fn at(&self, idx: [i64; D]) -> f64 {
            self.buf[self.lin(idx)]
        }

        pub fn set(&mut self, idx: [i64; D], v: f64) {
            let l = self.lin(idx);
            self.buf[l] = v;
        }

        fn lin(&self, idx: [i64; D]) -> usize {
            let alloc = Domain { extents: self.core }.allocated(&self.halo);
            crate::geom::linear(idx, &self.halo, strides(alloc))
        }

        pub fn view(&mut self, mode: AccessMode, foot: HaloSpec<D>) -> GridView<f64, D> {
            let alloc = Domain { extents: self.core }.allocated(&self.halo);
            let st = strides(alloc);
            let base = crate::geom::linear([0i64; D], &self.halo, st);
            GridView {
                ptr: self.buf.as_mut_ptr(),
                len: self.buf.len(),
                strides: st,
                base,
                core: self.core,
                origin: [0; D],
                mode,
                foot_minus: foot.minus,
                foot_plus: foot.plus,
            }
        }
    }

    pub fn viewset<const D: usize>(views: Vec<GridView<f64, D>>) -> ViewSet<f64, D> {
        ViewSet { views }
    }
}
