//! Tiled execution: isolated per-tile workers exchanging value-copy
//! messages, a desk-scale miniature of a message-passing cluster level.
//!
//! Every tile (buffer plus ghost frame) is owned by exactly one worker
//! thread for the duration of a call; the only cross-worker data flow is
//! strip messages over channels. Each call starts with a ghost exchange for
//! every grid readable at nonzero offsets (axis by axis, so corner ghosts
//! are forwarded across two hops), a barrier, then computation. Ordered
//! spaces additionally forward freshly computed boundary strips downstream,
//! which serializes tiles into the wavefront the order requires.

use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::Barrier;

use crate::cells::{Cells, GridView, ViewSet};
use crate::element::Element;
use crate::error::Result;
use crate::exec::threaded::par_run;
use crate::exec::Counters;
use crate::geom::HaloSpec;
use crate::grid::for_region;
use crate::space::{
    seq_all, seq_diamond, seq_reduce, seq_sweep, tree_fold, Direction, IterationSpaceKind,
};
use crate::tile::TileDecomposition;

/// Per-axis, per-side (0 = minus, 1 = plus) channel ends of one tile.
type Slots<X, const D: usize> = [[Option<X>; 2]; D];

#[inline]
fn lin_of<T, const D: usize>(v: &GridView<T, D>, c: [i64; D]) -> usize {
    let mut idx = v.base as isize;
    for k in 0..D {
        idx += c[k] as isize * v.strides[k] as isize;
    }
    idx as usize
}

fn copy_out<T: Element, const D: usize>(
    v: &GridView<T, D>,
    lo: [i64; D],
    hi: [i64; D],
) -> Vec<T> {
    let mut out = Vec::new();
    for_region(lo, hi, |c| {
        let idx = lin_of(v, c);
        assert!(idx < v.len);
        out.push(unsafe { *v.ptr.add(idx) });
    });
    out
}

fn copy_in<T: Element, const D: usize>(v: &GridView<T, D>, lo: [i64; D], hi: [i64; D], data: &[T]) {
    let mut i = 0;
    for_region(lo, hi, |c| {
        let idx = lin_of(v, c);
        assert!(idx < v.len);
        unsafe { *v.ptr.add(idx) = data[i] };
        i += 1;
    });
    debug_assert_eq!(i, data.len());
}

/// Lateral extent rule of a strip along `axis`.
#[derive(Clone, Copy, PartialEq)]
enum Lateral {
    /// Axes before `axis` span the full allocated range (ghosts included);
    /// later axes span the core. Used by the staged ghost exchange and the
    /// diamond forwarding, where earlier axes are already up to date.
    Staged,
    /// All other axes span the core only. Used by sweep forwarding.
    CoreOnly,
}

/// Region of the ghost slab on side `side` along `axis` (receiver view).
fn ghost_region<const D: usize>(
    ext: [usize; D],
    halo: &HaloSpec<D>,
    axis: usize,
    side: usize,
    lateral: Lateral,
) -> ([i64; D], [i64; D]) {
    let mut lo = [0i64; D];
    let mut hi = [0i64; D];
    for k in 0..D {
        if k < axis && lateral == Lateral::Staged {
            lo[k] = -(halo.minus[k] as i64);
            hi[k] = (ext[k] + halo.plus[k]) as i64;
        } else {
            lo[k] = 0;
            hi[k] = ext[k] as i64;
        }
    }
    if side == 0 {
        lo[axis] = -(halo.minus[axis] as i64);
        hi[axis] = 0;
    } else {
        lo[axis] = ext[axis] as i64;
        hi[axis] = (ext[axis] + halo.plus[axis]) as i64;
    }
    (lo, hi)
}

/// Region of the core strip a tile sends toward side `side` (sender view):
/// the cells that become the neighbor's ghost slab on the opposite side.
fn source_region<const D: usize>(
    ext: [usize; D],
    halo: &HaloSpec<D>,
    axis: usize,
    side: usize,
    lateral: Lateral,
) -> ([i64; D], [i64; D]) {
    let mut lo = [0i64; D];
    let mut hi = [0i64; D];
    for k in 0..D {
        if k < axis && lateral == Lateral::Staged {
            lo[k] = -(halo.minus[k] as i64);
            hi[k] = (ext[k] + halo.plus[k]) as i64;
        } else {
            lo[k] = 0;
            hi[k] = ext[k] as i64;
        }
    }
    if side == 0 {
        // toward the minus neighbor: its plus-side ghost
        lo[axis] = 0;
        hi[axis] = halo.plus[axis] as i64;
    } else {
        // toward the plus neighbor: its minus-side ghost
        lo[axis] = (ext[axis] - halo.minus[axis]) as i64;
        hi[axis] = ext[axis] as i64;
    }
    (lo, hi)
}

/// Forwarding strips for diamond use staged laterals (the axis-1 strip
/// carries the fresh axis-0 ghost row so corner dependencies cross two
/// hops); sweeps touch a single axis and need core laterals only.
fn forward_lateral(kind: IterationSpaceKind) -> Lateral {
    match kind {
        IterationSpaceKind::Diamond => Lateral::Staged,
        _ => Lateral::CoreOnly,
    }
}

/// Upstream side a forwarded strip arrives from, per ordered kind and axis.
/// `None` means the kind does not order that axis.
fn upstream_side(kind: IterationSpaceKind, axis: usize) -> Option<usize> {
    match kind {
        IterationSpaceKind::Diamond => Some(0),
        IterationSpaceKind::Sweep { axis: a, direction } if a == axis => match direction {
            Direction::Increasing => Some(0),
            Direction::Decreasing => Some(1),
        },
        _ => None,
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn run_tiled<T, const D: usize, F, R, C>(
    tiles: Vec<ViewSet<T, D>>,
    decomp: &TileDecomposition<D>,
    kind: IterationSpaceKind,
    body: &F,
    stateful: bool,
    identity: &R,
    combine: &C,
    halos: &[HaloSpec<D>],
    exchange: &[bool],
    forward: &[bool],
    inner_threads: usize,
    counters: &Counters,
) -> Result<R>
where
    T: Element,
    F: Fn(&mut Cells<T, D>) -> R + Sync,
    R: Clone + Send,
    C: Fn(R, R) -> R + Sync,
{
    let n = decomp.tile_count();
    debug_assert_eq!(tiles.len(), n);

    let mut sends: Vec<Slots<Sender<Vec<T>>, D>> =
        (0..n).map(|_| std::array::from_fn(|_| [None, None])).collect();
    let mut recvs: Vec<Slots<Receiver<Vec<T>>, D>> =
        (0..n).map(|_| std::array::from_fn(|_| [None, None])).collect();
    for t in 0..n {
        for axis in 0..D {
            for (side, dir) in [(0usize, -1i64), (1, 1)] {
                if let Some(nb) = decomp.neighbor(t, axis, dir) {
                    let (tx, rx) = channel();
                    sends[t][axis][side] = Some(tx);
                    recvs[nb][axis][1 - side] = Some(rx);
                }
            }
        }
    }

    let barrier = Barrier::new(n);
    let outcomes: Vec<Result<R>> = std::thread::scope(|s| {
        let barrier = &barrier;
        let handles: Vec<_> = tiles
            .into_iter()
            .zip(sends.into_iter().zip(recvs))
            .map(|(vs, (tx, rx))| {
                let ident = identity.clone();
                s.spawn(move || {
                    tile_worker(
                        vs,
                        tx,
                        rx,
                        kind,
                        body,
                        stateful,
                        ident,
                        combine,
                        halos,
                        exchange,
                        forward,
                        inner_threads,
                        counters,
                        barrier,
                    )
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    let mut partials = Vec::with_capacity(n);
    for o in outcomes {
        partials.push(o?);
    }
    if kind == IterationSpaceKind::Reduce {
        Ok(tree_fold(partials, combine).unwrap_or_else(|| identity.clone()))
    } else {
        Ok(identity.clone())
    }
}

#[allow(clippy::too_many_arguments)]
fn tile_worker<T, const D: usize, F, R, C>(
    vs: ViewSet<T, D>,
    tx: Slots<Sender<Vec<T>>, D>,
    rx: Slots<Receiver<Vec<T>>, D>,
    kind: IterationSpaceKind,
    body: &F,
    stateful: bool,
    identity: R,
    combine: &C,
    halos: &[HaloSpec<D>],
    exchange: &[bool],
    forward: &[bool],
    inner_threads: usize,
    counters: &Counters,
    barrier: &Barrier,
) -> Result<R>
where
    T: Element,
    F: Fn(&mut Cells<T, D>) -> R + Sync,
    R: Clone + Send,
    C: Fn(R, R) -> R + Sync,
{
    let ext = vs.core();

    // Ghost exchange, one axis at a time. Sends of a later axis carry the
    // ghosts received for earlier axes, which fills corner cells.
    for axis in 0..D {
        for (g, view) in vs.views.iter().enumerate() {
            if !exchange[g] {
                continue;
            }
            for side in [0usize, 1] {
                if let Some(ch) = &tx[axis][side] {
                    let depth = if side == 0 {
                        halos[g].plus[axis]
                    } else {
                        halos[g].minus[axis]
                    };
                    if depth == 0 {
                        continue;
                    }
                    let (lo, hi) = source_region(ext, &halos[g], axis, side, Lateral::Staged);
                    ch.send(copy_out(view, lo, hi)).expect("peer tile hung up");
                    counters.messages.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                }
            }
        }
        for (g, view) in vs.views.iter().enumerate() {
            if !exchange[g] {
                continue;
            }
            for side in [0usize, 1] {
                if let Some(ch) = &rx[axis][side] {
                    let depth = if side == 0 {
                        halos[g].minus[axis]
                    } else {
                        halos[g].plus[axis]
                    };
                    if depth == 0 {
                        continue;
                    }
                    let strip = ch.recv().expect("peer tile hung up");
                    let (lo, hi) = ghost_region(ext, &halos[g], axis, side, Lateral::Staged);
                    copy_in(view, lo, hi, &strip);
                }
            }
        }
    }
    barrier.wait();

    // Ordered spaces: block until upstream neighbors forward their freshly
    // computed boundary strips.
    let lateral = forward_lateral(kind);
    for axis in 0..D {
        let Some(side) = upstream_side(kind, axis) else {
            continue;
        };
        for (g, view) in vs.views.iter().enumerate() {
            if !forward[g] {
                continue;
            }
            let depth = if side == 0 {
                halos[g].minus[axis]
            } else {
                halos[g].plus[axis]
            };
            if depth == 0 {
                continue;
            }
            if let Some(ch) = &rx[axis][side] {
                let strip = ch.recv().expect("peer tile hung up");
                let (lo, hi) = ghost_region(ext, &halos[g], axis, side, lateral);
                copy_in(view, lo, hi, &strip);
            }
        }
    }

    let partial = if inner_threads > 1 {
        par_run(&vs, kind, body, stateful, &identity, combine, inner_threads)?
    } else {
        match kind {
            IterationSpaceKind::All => {
                seq_all(&vs, body, stateful)?;
                identity.clone()
            }
            IterationSpaceKind::Reduce => {
                seq_reduce(&vs, body, stateful, &identity, combine)?
            }
            IterationSpaceKind::Diamond => {
                seq_diamond(&vs, body, stateful)?;
                identity.clone()
            }
            IterationSpaceKind::Sweep { axis, direction } => {
                seq_sweep(&vs, body, stateful, axis, direction)?;
                identity.clone()
            }
        }
    };

    // Forward fresh boundary strips downstream.
    for axis in 0..D {
        let Some(up) = upstream_side(kind, axis) else {
            continue;
        };
        let down = 1 - up;
        for (g, view) in vs.views.iter().enumerate() {
            if !forward[g] {
                continue;
            }
            let depth = if up == 0 {
                halos[g].minus[axis]
            } else {
                halos[g].plus[axis]
            };
            if depth == 0 {
                continue;
            }
            if let Some(ch) = &tx[axis][down] {
                let (lo, hi) = source_region(ext, &halos[g], axis, down, lateral);
                ch.send(copy_out(view, lo, hi)).expect("peer tile hung up");
                counters.messages.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            }
        }
    }

    Ok(partial)
}
