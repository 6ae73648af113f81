//! Tile decomposition of a core domain over workers, and ghost-cell
//! exchange between neighbor tiles.
//!
//! The global core domain is split into a cartesian grid of tiles, one per
//! worker. Each tile owns a buffer with its own ghost frame; after an
//! exchange every interior ghost cell equals the core value of the owning
//! neighbor, while physical-boundary ghosts keep their user-set values.

use crate::element::Element;
use crate::error::{GsclError, Result};
use crate::geom::{Domain, HaloSpec};
use crate::grid::Grid;
use crate::ops::AccessMode;

/// Per-dimension worker counts; the product is the total worker count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkerGrid<const D: usize> {
    pub counts: [usize; D],
}

impl<const D: usize> WorkerGrid<D> {
    pub fn total(&self) -> usize {
        self.counts.iter().product()
    }
}

/// Among all `D`-tuples of positive integers with product `workers`, the one
/// minimizing `max_k / min_k`. Ties go to the lexicographically largest
/// tuple sorted descending, so the first axis gets the larger count.
pub fn factorize_workers<const D: usize>(workers: usize) -> Result<WorkerGrid<D>> {
    if workers < 1 {
        return Err(GsclError::InvalidWorkerCount(workers));
    }
    let mut best: Option<[usize; D]> = None;
    let mut consider = |tuple: [usize; D]| {
        let mut sorted = tuple;
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        if sorted != tuple {
            return; // canonical representative only: descending order
        }
        match &best {
            None => best = Some(tuple),
            Some(cur) => {
                let ratio = |t: &[usize; D]| {
                    let hi = *t.iter().max().unwrap() as f64;
                    let lo = *t.iter().min().unwrap() as f64;
                    hi / lo
                };
                let (rt, rc) = (ratio(&tuple), ratio(cur));
                if rt < rc || (rt == rc && tuple > *cur) {
                    best = Some(tuple);
                }
            }
        }
    };
    match D {
        1 => consider({
            let mut t = [0; D];
            t[0] = workers;
            t
        }),
        2 => {
            for a in 1..=workers {
                if workers % a == 0 {
                    let mut t = [0; D];
                    t[0] = a;
                    t[1] = workers / a;
                    consider(t);
                }
            }
        }
        3 => {
            for a in 1..=workers {
                if workers % a != 0 {
                    continue;
                }
                let rest = workers / a;
                for b in 1..=rest {
                    if rest % b == 0 {
                        let mut t = [0; D];
                        t[0] = a;
                        t[1] = b;
                        t[2] = rest / b;
                        consider(t);
                    }
                }
            }
        }
        _ => return Err(GsclError::UnsupportedDimension(D)),
    }
    Ok(WorkerGrid {
        counts: best.expect("workers >= 1 always factorizes"),
    })
}

/// One tile: core extents and global origin of its core block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileInfo<const D: usize> {
    pub origin: [usize; D],
    pub extent: [usize; D],
}

/// A balanced block decomposition of a core domain over a worker grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileDecomposition<const D: usize> {
    pub domain: Domain<D>,
    pub workers: WorkerGrid<D>,
    tiles: Vec<TileInfo<D>>,
}

/// Balanced split of `extent` into `parts`: the first `extent % parts`
/// pieces get one extra cell.
fn split_sizes(extent: usize, parts: usize) -> Vec<usize> {
    let q = extent / parts;
    let r = extent % parts;
    (0..parts).map(|i| if i < r { q + 1 } else { q }).collect()
}

/// Which piece of a balanced split owns core coordinate `x`.
fn split_owner(extent: usize, parts: usize, x: usize) -> usize {
    let q = extent / parts;
    let r = extent % parts;
    let big = r * (q + 1);
    if x < big {
        x / (q + 1)
    } else {
        r + (x - big) / q
    }
}

pub fn decompose<const D: usize>(
    domain: Domain<D>,
    workers: WorkerGrid<D>,
    halo: HaloSpec<D>,
) -> Result<TileDecomposition<D>> {
    for k in 0..D {
        if workers.counts[k] > domain.extents[k] {
            return Err(GsclError::OverDecomposed {
                extent: domain.extents[k],
                workers: workers.counts[k],
                axis: k,
            });
        }
        // Ghost strips are filled from the face neighbor only, so a tile
        // must be at least as deep as the halo it serves.
        let smallest = domain.extents[k] / workers.counts[k];
        if smallest < halo.minus[k].max(halo.plus[k]) {
            return Err(GsclError::OverDecomposed {
                extent: domain.extents[k],
                workers: workers.counts[k],
                axis: k,
            });
        }
    }
    let per_dim: Vec<Vec<usize>> = (0..D)
        .map(|k| split_sizes(domain.extents[k], workers.counts[k]))
        .collect();
    let mut tiles = Vec::with_capacity(workers.total());
    let mut coord = [0usize; D];
    loop {
        let mut origin = [0usize; D];
        let mut extent = [0usize; D];
        for k in 0..D {
            origin[k] = per_dim[k][..coord[k]].iter().sum();
            extent[k] = per_dim[k][coord[k]];
        }
        tiles.push(TileInfo { origin, extent });
        // row-major advance over worker-grid coordinates
        let mut k = D;
        loop {
            if k == 0 {
                return Ok(TileDecomposition {
                    domain,
                    workers,
                    tiles,
                });
            }
            k -= 1;
            coord[k] += 1;
            if coord[k] < workers.counts[k] {
                break;
            }
            coord[k] = 0;
        }
    }
}

impl<const D: usize> TileDecomposition<D> {
    pub fn tile_count(&self) -> usize {
        self.tiles.len()
    }

    pub fn tile(&self, id: usize) -> &TileInfo<D> {
        &self.tiles[id]
    }

    pub fn tiles(&self) -> &[TileInfo<D>] {
        &self.tiles
    }

    /// Worker-grid coordinates of tile `id` (row-major tile numbering).
    pub fn tile_coord(&self, id: usize) -> [usize; D] {
        let mut rem = id;
        let mut c = [0usize; D];
        for k in (0..D).rev() {
            c[k] = rem % self.workers.counts[k];
            rem /= self.workers.counts[k];
        }
        c
    }

    fn tile_id(&self, coord: [usize; D]) -> usize {
        let mut id = 0;
        for k in 0..D {
            id = id * self.workers.counts[k] + coord[k];
        }
        id
    }

    /// Face neighbor of tile `id` one step along `axis` (`dir` = -1 or +1),
    /// or `None` at the physical boundary.
    pub fn neighbor(&self, id: usize, axis: usize, dir: i64) -> Option<usize> {
        let mut c = self.tile_coord(id);
        let next = c[axis] as i64 + dir;
        if next < 0 || next >= self.workers.counts[axis] as i64 {
            return None;
        }
        c[axis] = next as usize;
        Some(self.tile_id(c))
    }

    /// Owning tile and tile-local coordinates for a global shifted index.
    /// Global halo coordinates map into the ghost frame of the boundary tile.
    pub fn locate(&self, index: [i64; D]) -> (usize, [i64; D]) {
        let mut coord = [0usize; D];
        for k in 0..D {
            let (n, p) = (self.domain.extents[k], self.workers.counts[k]);
            coord[k] = if index[k] < 0 {
                0
            } else if index[k] as usize >= n {
                p - 1
            } else {
                split_owner(n, p, index[k] as usize)
            };
        }
        let id = self.tile_id(coord);
        let tile = &self.tiles[id];
        let mut local = [0i64; D];
        for k in 0..D {
            local[k] = index[k] - tile.origin[k] as i64;
        }
        (id, local)
    }

    /// Number of interior faces (pairs of adjacent tiles).
    pub fn interior_faces(&self) -> usize {
        let mut faces = 0;
        for k in 0..D {
            let others: usize = (0..D)
                .filter(|&j| j != k)
                .map(|j| self.workers.counts[j])
                .product();
            faces += (self.workers.counts[k] - 1) * others;
        }
        faces
    }
}

/// Copy every interior ghost cell of a tiled grid from the core of the
/// owning neighbor tile, axis by axis so corner ghosts are forwarded across
/// two hops. Physical-boundary ghosts are untouched and grids declared
/// `WriteOnly` are skipped entirely. Returns the number of strip messages
/// a distributed exchange would send.
pub fn exchange_halos<T: Element, const D: usize>(
    grid: &Grid<T, D>,
    mode: AccessMode,
) -> Result<usize> {
    if mode == AccessMode::WriteOnly {
        return Ok(0);
    }
    grid.exchange_ghosts()
}

/// Stitch the tiles of a tiled grid back into a monolithic grid with the
/// same domain and halo. Core cells come from tile cores, the outer halo
/// ring from the physical-boundary ghosts.
pub fn gather<T: Element, const D: usize>(grid: &Grid<T, D>) -> Result<Grid<T, D>> {
    grid.gather()
}
