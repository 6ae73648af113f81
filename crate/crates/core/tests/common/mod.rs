//! Helpers shared by the integration suites.
#![allow(dead_code)] // each test binary uses its own subset

use gscl::{ArchitectureSpec, Domain, Element, Grid, Gscl, HaloSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn runtime(workers: usize) -> Gscl {
    let mut g = Gscl::new();
    g.init().unwrap();
    g.set_workers(workers).unwrap();
    g
}

pub fn arch(s: &str) -> ArchitectureSpec {
    ArchitectureSpec::parse(s).unwrap()
}

/// Visit the core domain row-major.
pub fn for_core<const D: usize>(extents: [usize; D], mut f: impl FnMut([i64; D])) {
    let total: usize = extents.iter().product();
    for rank in 0..total {
        let mut idx = [0i64; D];
        let mut rem = rank;
        for k in (0..D).rev() {
            idx[k] = (rem % extents[k]) as i64;
            rem /= extents[k];
        }
        f(idx);
    }
}

/// Seeded uniform interior in [0,1); halo cells keep the fill value.
pub fn fill_seeded<const D: usize>(g: &Grid<f64, D>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for_core(g.domain().extents, |idx| {
        g.write(idx, rng.gen_range(0.0..1.0)).unwrap();
    });
}

/// Core contents as bit patterns, row-major.
pub fn core_bits<T: Element, const D: usize>(g: &Grid<T, D>) -> Vec<u64> {
    let mut out = Vec::with_capacity(g.domain().cells());
    for_core(g.domain().extents, |idx| {
        out.push(g.read(idx).unwrap().bits());
    });
    out
}

/// Build a grid for `storage` and copy another grid's core+halo into it.
pub fn grid_like<const D: usize>(
    sel: &gscl::StorageSelector,
    src: &Grid<f64, D>,
) -> Grid<f64, D> {
    let dst = Grid::<f64, D>::with_storage(sel, src.domain(), src.halo(), 0.0).unwrap();
    let (dom, halo) = (src.domain(), src.halo());
    let mut lo = [0i64; D];
    let mut ext = [0usize; D];
    for k in 0..D {
        lo[k] = -(halo.minus[k] as i64);
        ext[k] = dom.extents[k] + halo.minus[k] + halo.plus[k];
    }
    for_core(ext, |off| {
        let mut idx = [0i64; D];
        for k in 0..D {
            idx[k] = lo[k] + off[k];
        }
        dst.write(idx, src.read(idx).unwrap()).unwrap();
    });
    dst
}

pub fn new_grid<const D: usize>(
    sel: &gscl::StorageSelector,
    extents: [usize; D],
    halo_width: usize,
    fill: f64,
) -> Grid<f64, D> {
    Grid::<f64, D>::with_storage(
        sel,
        Domain::new(extents).unwrap(),
        HaloSpec::uniform(halo_width),
        fill,
    )
    .unwrap()
}
