//! Worker-parallel execution over one (sub)domain.
//!
//! `All`/`Reduce` split the flattened core across workers in balanced
//! contiguous chunks. `Diamond` runs an anti-diagonal wavefront with a
//! barrier per diagonal (the maximal schedule consistent with the order).
//! Sweeps partition the columns orthogonal to the swept axis; each column
//! is an independent dependency chain. Partitions are deterministic, so a
//! given worker count reproduces bitwise run to run; grid contents are
//! bit-identical to the sequential reference for any worker count.

use std::sync::Barrier;

use crate::cells::{Cells, ViewSet};
use crate::element::Element;
use crate::error::{GsclError, Result};
use crate::space::{tree_fold, Direction, IterationSpaceKind};

/// Balanced chunk boundaries: `parts + 1` cut points over `0..total`.
fn cuts(total: usize, parts: usize) -> Vec<usize> {
    let q = total / parts;
    let r = total % parts;
    let mut c = Vec::with_capacity(parts + 1);
    let mut at = 0;
    c.push(0);
    for i in 0..parts {
        at += if i < r { q + 1 } else { q };
        c.push(at);
    }
    c
}

#[inline]
fn decode<const D: usize>(core: [usize; D], mut rank: usize) -> [usize; D] {
    let mut local = [0usize; D];
    for k in (0..D).rev() {
        local[k] = rank % core[k];
        rank /= core[k];
    }
    local
}

/// Apply `body` over the flattened rank range `a..b`, row segment by row
/// segment.
fn apply_range<T, const D: usize, F, R>(
    vs: &ViewSet<T, D>,
    body: &F,
    stateful: bool,
    a: usize,
    b: usize,
) -> Option<GsclError>
where
    T: Element,
    F: Fn(&mut Cells<T, D>) -> R,
{
    let core = vs.core();
    let row_len = core[D - 1];
    let mut cells = vs.cells(stateful);
    let mut rank = a;
    while rank < b {
        let local = decode(core, rank);
        let seg = (row_len - local[D - 1]).min(b - rank);
        cells.bind(local);
        for _ in 0..seg {
            body(&mut cells);
            cells.advance();
        }
        rank += seg;
    }
    cells.take_violation()
}

/// Reduce over the rank range `a..b`: row segments fold linearly from the
/// identity, segment partials combine in a pairwise tree.
fn reduce_range<T, const D: usize, F, R, C>(
    vs: &ViewSet<T, D>,
    body: &F,
    stateful: bool,
    identity: &R,
    combine: &C,
    a: usize,
    b: usize,
) -> (R, Option<GsclError>)
where
    T: Element,
    F: Fn(&mut Cells<T, D>) -> R,
    R: Clone,
    C: Fn(R, R) -> R,
{
    let core = vs.core();
    let row_len = core[D - 1];
    let mut cells = vs.cells(stateful);
    let mut partials = Vec::new();
    let mut rank = a;
    while rank < b {
        let local = decode(core, rank);
        let seg = (row_len - local[D - 1]).min(b - rank);
        cells.bind(local);
        let mut acc = identity.clone();
        for _ in 0..seg {
            acc = combine(acc, body(&mut cells));
            cells.advance();
        }
        partials.push(acc);
        rank += seg;
    }
    let partial = tree_fold(partials, combine).unwrap_or_else(|| identity.clone());
    (partial, cells.take_violation())
}

pub(crate) fn par_run<T, const D: usize, F, R, C>(
    vs: &ViewSet<T, D>,
    kind: IterationSpaceKind,
    body: &F,
    stateful: bool,
    identity: &R,
    combine: &C,
    workers: usize,
) -> Result<R>
where
    T: Element,
    F: Fn(&mut Cells<T, D>) -> R + Sync,
    R: Clone + Send,
    C: Fn(R, R) -> R + Sync,
{
    let workers = workers.max(1);
    match kind {
        IterationSpaceKind::All => {
            par_apply_all(vs, body, stateful, workers)?;
            Ok(identity.clone())
        }
        IterationSpaceKind::Reduce => par_reduce(vs, body, stateful, identity, combine, workers),
        IterationSpaceKind::Diamond => {
            par_diamond(vs, body, stateful, workers)?;
            Ok(identity.clone())
        }
        IterationSpaceKind::Sweep { axis, direction } => {
            par_sweep(vs, body, stateful, axis, direction, workers)?;
            Ok(identity.clone())
        }
    }
}

fn first_error(results: Vec<Option<GsclError>>) -> Result<()> {
    for r in results {
        if let Some(e) = r {
            return Err(e);
        }
    }
    Ok(())
}

fn par_apply_all<T, const D: usize, F, R>(
    vs: &ViewSet<T, D>,
    body: &F,
    stateful: bool,
    workers: usize,
) -> Result<()>
where
    T: Element,
    F: Fn(&mut Cells<T, D>) -> R + Sync,
{
    let total: usize = vs.core().iter().product();
    let bounds = cuts(total, workers);
    let results = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let (a, b) = (bounds[w], bounds[w + 1]);
                s.spawn(move || apply_range(vs, body, stateful, a, b))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    first_error(results)
}

fn par_reduce<T, const D: usize, F, R, C>(
    vs: &ViewSet<T, D>,
    body: &F,
    stateful: bool,
    identity: &R,
    combine: &C,
    workers: usize,
) -> Result<R>
where
    T: Element,
    F: Fn(&mut Cells<T, D>) -> R + Sync,
    R: Clone + Send,
    C: Fn(R, R) -> R + Sync,
{
    let total: usize = vs.core().iter().product();
    let bounds = cuts(total, workers);
    let outcomes: Vec<(R, Option<GsclError>)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let (a, b) = (bounds[w], bounds[w + 1]);
                let ident = identity.clone();
                s.spawn(move || reduce_range(vs, body, stateful, &ident, combine, a, b))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut partials = Vec::with_capacity(outcomes.len());
    let mut violation = None;
    for (p, v) in outcomes {
        partials.push(p);
        if violation.is_none() {
            violation = v;
        }
    }
    match violation {
        Some(e) => Err(e),
        None => Ok(tree_fold(partials, combine).unwrap_or_else(|| identity.clone())),
    }
}

/// Anti-diagonal wavefront: every element of diagonal `t = i + j` becomes
/// runnable once diagonal `t - 1` completes.
fn par_diamond<T, const D: usize, F, R>(
    vs: &ViewSet<T, D>,
    body: &F,
    stateful: bool,
    workers: usize,
) -> Result<()>
where
    T: Element,
    F: Fn(&mut Cells<T, D>) -> R + Sync,
{
    assert_eq!(D, 2, "diamond order is 2D only");
    let core = vs.core();
    let (n0, n1) = (core[0], core[1]);
    let barrier = Barrier::new(workers);
    let results = std::thread::scope(|s| {
        let barrier = &barrier;
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                s.spawn(move || {
                    let mut cells = vs.cells(stateful);
                    for t in 0..(n0 + n1 - 1) {
                        let lo = t.saturating_sub(n1 - 1);
                        let hi = t.min(n0 - 1);
                        let len = hi - lo + 1;
                        let bounds = cuts(len, workers);
                        for idx in bounds[w]..bounds[w + 1] {
                            let i = lo + idx;
                            let j = t - i;
                            let mut local = [0usize; D];
                            local[0] = i;
                            local[1] = j;
                            cells.bind(local);
                            body(&mut cells);
                        }
                        barrier.wait();
                    }
                    cells.take_violation()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    first_error(results)
}

/// Columns along the swept axis are independent chains; workers own
/// disjoint column sets and scan them in axis order.
fn par_sweep<T, const D: usize, F, R>(
    vs: &ViewSet<T, D>,
    body: &F,
    stateful: bool,
    axis: usize,
    direction: Direction,
    workers: usize,
) -> Result<()>
where
    T: Element,
    F: Fn(&mut Cells<T, D>) -> R + Sync,
{
    let core = vs.core();
    let steps = core[axis];
    let orth: usize = (0..D).filter(|&k| k != axis).map(|k| core[k]).product();
    let bounds = cuts(orth, workers);
    let results = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let (a, b) = (bounds[w], bounds[w + 1]);
                s.spawn(move || {
                    let mut cells = vs.cells(stateful);
                    for o in a..b {
                        let mut local = [0usize; D];
                        let mut rem = o;
                        for k in (0..D).rev() {
                            if k == axis {
                                continue;
                            }
                            local[k] = rem % core[k];
                            rem /= core[k];
                        }
                        for s_i in 0..steps {
                            local[axis] = match direction {
                                Direction::Increasing => s_i,
                                Direction::Decreasing => steps - 1 - s_i,
                            };
                            cells.bind(local);
                            body(&mut cells);
                        }
                    }
                    cells.take_violation()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    first_error(results)
}
