//! The per-element view operator bodies run against.
//!
//! Engines position a [`Cells`] on one core element and call the operator
//! body. The body reads grids at fixed offsets, writes grids at the zero
//! offset, and (for stateful operators) queries the element's global index.
//! In checked builds every access is validated against the operator's
//! declared footprint and access modes; violations are recorded and
//! surfaced by the engine as errors after the call.

use crate::element::Element;
use crate::error::GsclError;
use crate::geom::{Index, Offset};
use crate::ops::AccessMode;

/// Raw view of one tile of one grid: buffer pointer, geometry, and the
/// access rules the current operator declared for it.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GridView<T, const D: usize> {
    pub ptr: *mut T,
    pub len: usize,
    /// Strides of the allocated extents, row-major, last index fastest.
    pub strides: [usize; D],
    /// Linear position of local core element (0, .., 0).
    pub base: usize,
    /// Core extents of this tile.
    pub core: [usize; D],
    /// Global coordinate of local core element (0, .., 0).
    pub origin: [i64; D],
    pub mode: AccessMode,
    pub foot_minus: [usize; D],
    pub foot_plus: [usize; D],
}

/// The grid views an engine runs one (sub)domain against. Shared across
/// worker threads; engines guarantee that concurrent workers write disjoint
/// cells.
#[derive(Debug)]
pub(crate) struct ViewSet<T, const D: usize> {
    pub views: Vec<GridView<T, D>>,
}

// Views are raw pointers into buffers owned (mutably) by the executing
// call; workers only ever touch disjoint cells.
unsafe impl<T: Send, const D: usize> Send for ViewSet<T, D> {}
unsafe impl<T: Sync, const D: usize> Sync for ViewSet<T, D> {}

/// Hard cap on the number of grids one operator call can take. Cursors
/// live in a fixed inline array so the optimizer can keep them in
/// registers through the element loop.
pub const MAX_ARITY: usize = 8;

impl<T: Element, const D: usize> ViewSet<T, D> {
    pub fn core(&self) -> [usize; D] {
        self.views[0].core
    }

    pub fn cells(&self, stateful: bool) -> Cells<T, D> {
        assert!(self.views.len() <= MAX_ARITY);
        let mut cursors = [Cursor::<T, D>::DUMMY; MAX_ARITY];
        for (c, v) in cursors.iter_mut().zip(&self.views) {
            *c = Cursor {
                ptr: v.ptr,
                len: v.len,
                strides: v.strides,
                base: v.base,
                lin: v.base,
                mode: v.mode,
                foot_minus: v.foot_minus,
                foot_plus: v.foot_plus,
            };
        }
        Cells {
            cursors,
            arity: self.views.len(),
            origin: self.views[0].origin,
            local: [0; D],
            stateful,
            violation: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Cursor<T, const D: usize> {
    ptr: *mut T,
    len: usize,
    strides: [usize; D],
    base: usize,
    lin: usize,
    mode: AccessMode,
    foot_minus: [usize; D],
    foot_plus: [usize; D],
}

impl<T, const D: usize> Cursor<T, D> {
    /// Placeholder for unused slots; `len == 0` keeps any stray access on
    /// the checked-panic path.
    const DUMMY: Self = Self {
        ptr: std::ptr::null_mut(),
        len: 0,
        strides: [0; D],
        base: 0,
        lin: 0,
        mode: AccessMode::ReadWrite,
        foot_minus: [0; D],
        foot_plus: [0; D],
    };
}

/// A tuple of per-grid accessors bound to one core element.
///
/// Grids are addressed by their position in the call tuple. Reads are
/// bounded by the operator's declared footprint, writes land on the bound
/// element only, and `index` is available to stateful operators.
#[derive(Debug)]
pub struct Cells<T: Element, const D: usize> {
    cursors: [Cursor<T, D>; MAX_ARITY],
    arity: usize,
    origin: [i64; D],
    local: [usize; D],
    #[cfg_attr(not(debug_assertions), allow(dead_code))]
    stateful: bool,
    violation: Option<GsclError>,
}

impl<T: Element, const D: usize> Cells<T, D> {
    /// Rebind to the core element at tile-local coordinates `local`.
    #[inline]
    pub(crate) fn bind(&mut self, local: [usize; D]) {
        self.local = local;
        for c in &mut self.cursors[..self.arity] {
            let mut lin = c.base;
            for k in 0..D {
                lin += local[k] * c.strides[k];
            }
            c.lin = lin;
        }
    }

    /// Step to the next element along the last (fastest) axis.
    #[inline]
    pub(crate) fn advance(&mut self) {
        self.local[D - 1] += 1;
        for c in &mut self.cursors[..self.arity] {
            c.lin += 1;
        }
    }

    pub(crate) fn take_violation(&mut self) -> Option<GsclError> {
        self.violation.take()
    }

    #[cfg(debug_assertions)]
    #[cold]
    fn poison(&mut self, err: GsclError) {
        if self.violation.is_none() {
            self.violation = Some(err);
        }
    }

    /// Read grid `g` at `offset` from the bound element.
    #[inline]
    pub fn read(&mut self, g: usize, offset: Offset<D>) -> T {
        #[cfg(debug_assertions)]
        {
            let c = &self.cursors[g];
            if !c.mode.readable() {
                self.poison(GsclError::AccessModeViolation(format!(
                    "operator reads grid {g} declared WriteOnly"
                )));
                return T::FALLBACK;
            }
            let fits = (0..D).all(|k| {
                -(c.foot_minus[k] as i64) <= offset[k]
                    && offset[k] <= c.foot_plus[k] as i64
            });
            if !fits {
                self.poison(GsclError::HaloViolation {
                    offset: offset.to_vec(),
                });
                return T::FALLBACK;
            }
        }
        let c = &self.cursors[g];
        let mut idx = c.lin as isize;
        for k in 0..D {
            idx += offset[k] as isize * c.strides[k] as isize;
        }
        let idx = idx as usize;
        assert!(idx < c.len, "stencil access outside allocated buffer");
        unsafe { *c.ptr.add(idx) }
    }

    /// Value of the bound element of grid `g`.
    #[inline]
    pub fn center(&mut self, g: usize) -> T {
        self.read(g, [0; D])
    }

    /// Write the bound element of grid `g`.
    #[inline]
    pub fn write(&mut self, g: usize, value: T) {
        #[cfg(debug_assertions)]
        {
            if !self.cursors[g].mode.writable() {
                self.poison(GsclError::AccessModeViolation(format!(
                    "operator writes grid {g} declared ReadOnly"
                )));
                return;
            }
        }
        let c = &self.cursors[g];
        assert!(c.lin < c.len, "stencil access outside allocated buffer");
        unsafe { *c.ptr.add(c.lin) = value }
    }

    /// Global index of the bound element. Whole-problem coordinates even
    /// inside a tile worker. Stateful operators only.
    #[inline]
    pub fn index(&mut self) -> Index<D> {
        #[cfg(debug_assertions)]
        if !self.stateful {
            self.poison(GsclError::AccessModeViolation(
                "index query requires a stateful operator".into(),
            ));
        }
        let mut g = self.origin;
        for k in 0..D {
            g[k] += self.local[k] as i64;
        }
        g
    }
}
