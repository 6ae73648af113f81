//! Index tuples, offsets, halo specifications, and domains.
//!
//! Grid cells are addressed by a tuple of `D` signed integers. Core cells go
//! from `0` to `extent-1` per dimension; halo (ghost) cells extend the range
//! to `-minus .. extent-1+plus`. Buffers are row-major with the last index
//! fastest.

use crate::error::{GsclError, Result};

/// A core-element index or a shifted (halo-addressing) index.
pub type Index<const D: usize> = [i64; D];

/// A fixed offset from a core element, in grid-cell units.
pub type Offset<const D: usize> = [i64; D];

/// Per-dimension bounds on the offsets an operator may use: `minus[k]` cells
/// in the negative direction, `plus[k]` in the positive one. This is the
/// extent part of a stencil shape; it also sizes the ghost frame around the
/// core domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HaloSpec<const D: usize> {
    pub minus: [usize; D],
    pub plus: [usize; D],
}

impl<const D: usize> HaloSpec<D> {
    pub fn new(minus: [usize; D], plus: [usize; D]) -> Self {
        Self { minus, plus }
    }

    /// Symmetric halo of the same width in every direction.
    pub fn uniform(width: usize) -> Self {
        Self {
            minus: [width; D],
            plus: [width; D],
        }
    }

    pub fn none() -> Self {
        Self::uniform(0)
    }

    /// Whether `offset` stays within this halo.
    pub fn admits(&self, offset: Offset<D>) -> bool {
        (0..D).all(|k| -(self.minus[k] as i64) <= offset[k] && offset[k] <= self.plus[k] as i64)
    }

    /// Per-dimension maximum of two halos (the join used by operator fusion).
    pub fn max(&self, other: &Self) -> Self {
        let mut minus = [0; D];
        let mut plus = [0; D];
        for k in 0..D {
            minus[k] = self.minus[k].max(other.minus[k]);
            plus[k] = self.plus[k].max(other.plus[k]);
        }
        Self { minus, plus }
    }

    /// Whether this halo is at least as wide as `needed` everywhere.
    pub fn covers(&self, needed: &Self) -> bool {
        (0..D).all(|k| self.minus[k] >= needed.minus[k] && self.plus[k] >= needed.plus[k])
    }

    pub fn is_zero(&self) -> bool {
        (0..D).all(|k| self.minus[k] == 0 && self.plus[k] == 0)
    }
}

/// The core extents of a grid. The allocated extent adds the halo frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Domain<const D: usize> {
    pub extents: [usize; D],
}

impl<const D: usize> Domain<D> {
    pub fn new(extents: [usize; D]) -> Result<Self> {
        if D == 0 || D > 3 {
            return Err(GsclError::UnsupportedDimension(D));
        }
        if extents.iter().any(|&e| e == 0) {
            return Err(GsclError::InvalidDomain(format!(
                "core extents must be positive, got {extents:?}"
            )));
        }
        Ok(Self { extents })
    }

    pub fn cells(&self) -> usize {
        self.extents.iter().product()
    }

    /// Allocated extent per dimension under `halo`.
    pub fn allocated(&self, halo: &HaloSpec<D>) -> [usize; D] {
        let mut a = [0; D];
        for k in 0..D {
            a[k] = self.extents[k] + halo.minus[k] + halo.plus[k];
        }
        a
    }

    pub fn allocated_cells(&self, halo: &HaloSpec<D>) -> usize {
        self.allocated(halo).iter().product()
    }

    /// Whether `index` addresses a core cell.
    pub fn contains_core(&self, index: Index<D>) -> bool {
        (0..D).all(|k| 0 <= index[k] && (index[k] as usize) < self.extents[k])
    }

    /// Whether `index` (shifted addressing) stays within the allocated extent.
    pub fn contains_allocated(&self, index: Index<D>, halo: &HaloSpec<D>) -> bool {
        (0..D).all(|k| {
            -(halo.minus[k] as i64) <= index[k]
                && index[k] < (self.extents[k] + halo.plus[k]) as i64
        })
    }
}

/// Row-major strides (last index fastest) for the given extents.
pub fn strides<const D: usize>(extents: [usize; D]) -> [usize; D] {
    let mut s = [1usize; D];
    for k in (0..D.saturating_sub(1)).rev() {
        s[k] = s[k + 1] * extents[k + 1];
    }
    s
}

/// Linear buffer position of shifted index `index` under `halo`, assuming
/// the index is within the allocated extent.
pub fn linear<const D: usize>(index: Index<D>, halo: &HaloSpec<D>, strides: [usize; D]) -> usize {
    let mut lin = 0usize;
    for k in 0..D {
        lin += (index[k] + halo.minus[k] as i64) as usize * strides[k];
    }
    lin
}

pub fn add<const D: usize>(a: Index<D>, b: Offset<D>) -> Index<D> {
    let mut r = a;
    for k in 0..D {
        r[k] += b[k];
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_rejects_zero_extent() {
        assert!(matches!(
            Domain::new([0]),
            Err(GsclError::InvalidDomain(_))
        ));
        assert!(matches!(
            Domain::new([4, 0]),
            Err(GsclError::InvalidDomain(_))
        ));
    }

    #[test]
    fn allocated_adds_halo_frame() {
        let d = Domain::new([4, 4]).unwrap();
        let h = HaloSpec::new([1, 1], [1, 1]);
        assert_eq!(d.allocated(&h), [6, 6]);
        assert_eq!(d.allocated_cells(&h), 36);
    }

    #[test]
    fn strides_are_row_major_last_fastest() {
        assert_eq!(strides([2, 3, 4]), [12, 4, 1]);
        assert_eq!(strides([7]), [1]);
    }

    #[test]
    fn linear_matches_row_major_formula() {
        // Core (i,j) with halo (m0,p0)/(m1,p1) sits at
        // (i+m0)*(core_j+m1+p1) + (j+m1).
        let d = Domain::new([4, 5]).unwrap();
        let h = HaloSpec::new([2, 1], [1, 3]);
        let s = strides(d.allocated(&h));
        for i in 0..4i64 {
            for j in 0..5i64 {
                let expect = (i + 2) as usize * (5 + 1 + 3) + (j + 1) as usize;
                assert_eq!(linear([i, j], &h, s), expect);
            }
        }
    }

    #[test]
    fn halo_admits_its_box() {
        let h = HaloSpec::new([1, 0], [0, 2]);
        assert!(h.admits([0, 0]));
        assert!(h.admits([-1, 2]));
        assert!(!h.admits([1, 0]));
        assert!(!h.admits([0, 3]));
        assert!(!h.admits([-2, 0]));
    }
}
