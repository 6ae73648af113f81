//! Benchmark harness: fused vs two-pass vs hand-written Jacobi, per-element
//! timing, weak-scaling runs, CSV output, and correctness cross-checks.
//!
//! The measured application iteratively applies the averaging operator to a
//! grid pair and stops when no element moved more than epsilon (infinite
//! norm). The fused variant performs one `do_reduce` of the fused operator
//! per iteration; the two-pass variant runs `do_all` then `do_reduce`,
//! costing an extra scan of memory; the baseline is a plain nested-loop
//! implementation of the same algorithm outside the library, sequential
//! only. Identical seeds give bitwise-identical results across variants,
//! which is what `verify` checks.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use gscl::tile::factorize_workers;
use gscl::{
    fuse, op_convergence, op_diffusion, reduction_and, swap_grids, AccessMode, ArchitectureSpec,
    Domain, Element, Grid, GsclError, Gscl, HaloSpec, LevelTag,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("variant {variant} requires the sequential architecture, got {arch}")]
    UnsupportedVariantArch { variant: String, arch: String },

    #[error("invalid benchmark configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Gscl(#[from] GsclError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Fused,
    TwoPass,
    Baseline,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Fused => "fused",
            Variant::TwoPass => "two-pass",
            Variant::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub variant: Variant,
    pub extents: Vec<usize>,
    pub epsilon: f64,
    pub max_iters: u64,
    pub arch: ArchitectureSpec,
    pub workers: usize,
    pub reps: usize,
    pub seed: u64,
}

impl BenchmarkConfig {
    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn cells(&self) -> usize {
        self.extents.iter().product()
    }

    fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dim()) {
            return Err(BenchError::Config(format!(
                "dimension must be 2 or 3, got {}",
                self.dim()
            )));
        }
        if self.extents.iter().any(|&e| e == 0) {
            return Err(BenchError::Config("extents must be positive".into()));
        }
        if self.epsilon <= 0.0 {
            return Err(BenchError::Config("epsilon must be positive".into()));
        }
        if self.reps < 1 {
            return Err(BenchError::Config("repetitions must be >= 1".into()));
        }
        if self.variant == Variant::Baseline && self.arch.levels() != [LevelTag::Sequential] {
            return Err(BenchError::UnsupportedVariantArch {
                variant: self.variant.to_string(),
                arch: self.arch.to_string(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkRecord {
    pub config: BenchmarkConfig,
    pub iterations: u64,
    pub total_s: f64,
    /// total_s / (core cell count × iterations).
    pub per_element_s: f64,
    pub converged: bool,
    /// Order-independent bitwise digest of the final grid's core.
    pub checksum: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix_cell(rank: u64, bits: u64) -> u64 {
    splitmix64(splitmix64(rank) ^ bits)
}

/// Order-independent digest over (core rank, bit pattern) pairs, so tile
/// gathering order cannot affect it.
pub fn grid_checksum<T: Element, const D: usize>(g: &Grid<T, D>) -> u64 {
    let ext = g.domain().extents;
    let total: usize = ext.iter().product();
    let mut sum = 0u64;
    for rank in 0..total {
        let mut idx = [0i64; D];
        let mut rem = rank;
        for k in (0..D).rev() {
            idx[k] = (rem % ext[k]) as i64;
            rem /= ext[k];
        }
        let bits = g.read(idx).expect("core read").bits();
        sum = sum.wrapping_add(mix_cell(rank as u64, bits));
    }
    sum
}

/// The hand-written comparison field: a flat buffer with a one-cell ghost
/// ring, row-major, last index fastest.
struct RawField<const D: usize> {
    buf: Vec<f64>,
    ext: [usize; D],
    strides: [usize; D],
}

impl<const D: usize> RawField<D> {
    fn new(ext: [usize; D]) -> Self {
        let mut alloc = [0usize; D];
        for k in 0..D {
            alloc[k] = ext[k] + 2;
        }
        let mut strides = [1usize; D];
        for k in (0..D - 1).rev() {
            strides[k] = strides[k + 1] * alloc[k + 1];
        }
        Self {
            buf: vec![0.0; alloc.iter().product()],
            ext,
            strides,
        }
    }

    #[inline]
    fn at(&self, idx: [usize; D]) -> usize {
        let mut lin = 0;
        for k in 0..D {
            lin += (idx[k] + 1) * self.strides[k];
        }
        lin
    }

    fn checksum(&self) -> u64 {
        let total: usize = self.ext.iter().product();
        let mut sum = 0u64;
        for rank in 0..total {
            let mut idx = [0usize; D];
            let mut rem = rank;
            for k in (0..D).rev() {
                idx[k] = rem % self.ext[k];
                rem /= self.ext[k];
            }
            sum = sum.wrapping_add(mix_cell(rank as u64, self.buf[self.at(idx)].to_bits()));
        }
        sum
    }
}

/// Seeded uniform interior in [0,1), identical cell order for the library
/// grids and the raw baseline fields.
fn seeded_values(extents: &[usize], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..extents.iter().product::<usize>())
        .map(|_| rng.gen_range(0.0..1.0))
        .collect()
}

struct RunOutcome {
    iterations: u64,
    converged: bool,
    checksum: u64,
    seconds: f64,
}

fn run_library<const D: usize>(
    gscl: &mut Gscl,
    cfg: &BenchmarkConfig,
    ext: [usize; D],
    fixed_iterations: bool,
) -> Result<RunOutcome> {
    gscl.set_workers(cfg.workers)?;
    let sel = gscl.storage_for(&cfg.arch)?;
    let dom = Domain::new(ext)?;
    let halo = HaloSpec::uniform(1);
    let mut now = Grid::<f64, D>::with_storage(&sel, dom, halo, 0.0)?;
    let mut before = Grid::<f64, D>::with_storage(&sel, dom, halo, 0.0)?;

    let values = seeded_values(&ext, cfg.seed);
    let mut it = values.iter();
    for_core(ext, |idx| {
        now.write(idx, *it.next().unwrap()).unwrap();
    });

    let step = fuse(op_diffusion::<f64, D>(), op_convergence::<f64, D>(cfg.epsilon))
        .expect("matching arity");
    let diffusion = op_diffusion::<f64, D>();
    let convergence = op_convergence::<f64, D>(cfg.epsilon);
    let and = reduction_and();

    let mut ctx = gscl.begin(
        &cfg.arch,
        vec![
            now.register(AccessMode::ReadWrite),
            before.register(AccessMode::ReadWrite),
        ],
    )?;

    let mut iterations = 0u64;
    let mut converged = false;
    let start = Instant::now();
    while iterations < cfg.max_iters {
        swap_grids(&mut now, &mut before)?;
        let res = match cfg.variant {
            Variant::Fused => ctx.do_reduce(&[&now, &before], &step, &and)?,
            Variant::TwoPass => {
                ctx.do_all(&[&now, &before], &diffusion)?;
                ctx.do_reduce(&[&now, &before], &convergence, &and)?
            }
            Variant::Baseline => unreachable!("baseline runs outside the library"),
        };
        iterations += 1;
        converged = res;
        if res && !fixed_iterations {
            break;
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    ctx.end()?;

    Ok(RunOutcome {
        iterations,
        converged,
        checksum: grid_checksum(&now),
        seconds,
    })
}

/// One averaging+convergence step over raw fields, algorithmically
/// identical to the fused operator (same expression, same evaluation
/// order, so results are bit-identical).
fn baseline_step_2d(now: &mut RawField<2>, before: &RawField<2>, eps: f64) -> bool {
    let [n0, n1] = now.ext;
    let s0 = now.strides[0];
    let mut conv = true;
    for i in 0..n0 {
        let row = now.at([i, 0]);
        for j in 0..n1 {
            let idx = row + j;
            let c = before.buf[idx];
            let acc = 6.0 * c
                - before.buf[idx + s0]
                - before.buf[idx - s0]
                - before.buf[idx + 1]
                - before.buf[idx - 1];
            let x = (1.0 / 36.0) * acc;
            now.buf[idx] = x;
            conv = conv && (x - c).abs() <= eps;
        }
    }
    conv
}

fn baseline_step_3d(now: &mut RawField<3>, before: &RawField<3>, eps: f64) -> bool {
    let [n0, n1, n2] = now.ext;
    let (s0, s1) = (now.strides[0], now.strides[1]);
    let mut conv = true;
    for i in 0..n0 {
        for j in 0..n1 {
            let row = now.at([i, j, 0]);
            for k in 0..n2 {
                let idx = row + k;
                let c = before.buf[idx];
                let acc = 6.0 * c
                    - before.buf[idx + s0]
                    - before.buf[idx - s0]
                    - before.buf[idx + s1]
                    - before.buf[idx - s1]
                    - before.buf[idx + 1]
                    - before.buf[idx - 1];
                let x = (1.0 / 36.0) * acc;
                now.buf[idx] = x;
                conv = conv && (x - c).abs() <= eps;
            }
        }
    }
    conv
}

fn run_baseline<const D: usize>(
    cfg: &BenchmarkConfig,
    ext: [usize; D],
    fixed_iterations: bool,
    step: impl Fn(&mut RawField<D>, &RawField<D>, f64) -> bool,
) -> Result<RunOutcome> {
    let mut now = RawField::<D>::new(ext);
    let mut before = RawField::<D>::new(ext);
    let values = seeded_values(&ext, cfg.seed);
    let mut v = values.iter();
    let total: usize = ext.iter().product();
    for rank in 0..total {
        let mut idx = [0usize; D];
        let mut rem = rank;
        for k in (0..D).rev() {
            idx[k] = rem % ext[k];
            rem /= ext[k];
        }
        let lin = now.at(idx);
        now.buf[lin] = *v.next().unwrap();
    }

    let mut iterations = 0u64;
    let mut converged = false;
    let start = Instant::now();
    while iterations < cfg.max_iters {
        std::mem::swap(&mut now, &mut before);
        let res = step(&mut now, &before, cfg.epsilon);
        iterations += 1;
        converged = res;
        if res && !fixed_iterations {
            break;
        }
    }
    let seconds = start.elapsed().as_secs_f64();

    Ok(RunOutcome {
        iterations,
        converged,
        checksum: now.checksum(),
        seconds,
    })
}

fn for_core<const D: usize>(extents: [usize; D], mut f: impl FnMut([i64; D])) {
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

fn run_dispatch(
    gscl: &mut Gscl,
    cfg: &BenchmarkConfig,
    fixed_iterations: bool,
) -> Result<RunOutcome> {
    match (cfg.dim(), cfg.variant) {
        (2, Variant::Baseline) => run_baseline(
            cfg,
            [cfg.extents[0], cfg.extents[1]],
            fixed_iterations,
            baseline_step_2d,
        ),
        (3, Variant::Baseline) => run_baseline(
            cfg,
            [cfg.extents[0], cfg.extents[1], cfg.extents[2]],
            fixed_iterations,
            baseline_step_3d,
        ),
        (2, _) => run_library::<2>(gscl, cfg, [cfg.extents[0], cfg.extents[1]], fixed_iterations),
        (3, _) => run_library::<3>(
            gscl,
            cfg,
            [cfg.extents[0], cfg.extents[1], cfg.extents[2]],
            fixed_iterations,
        ),
        _ => unreachable!("validated dimension"),
    }
}

fn run_with_reps(
    gscl: &mut Gscl,
    cfg: &BenchmarkConfig,
    fixed_iterations: bool,
) -> Result<BenchmarkRecord> {
    cfg.validate()?;
    let mut times = Vec::with_capacity(cfg.reps);
    let mut first: Option<RunOutcome> = None;
    for _ in 0..cfg.reps {
        let out = run_dispatch(gscl, cfg, fixed_iterations)?;
        times.push(out.seconds);
        if let Some(f) = &first {
            if f.checksum != out.checksum || f.iterations != out.iterations {
                return Err(BenchError::Config(
                    "nondeterministic benchmark run: checksum varied across repetitions".into(),
                ));
            }
        } else {
            first = Some(out);
        }
    }
    let first = first.expect("reps >= 1");
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let total_s = times[times.len() / 2];
    let per_element_s = total_s / (cfg.cells() as f64 * first.iterations as f64);
    Ok(BenchmarkRecord {
        config: cfg.clone(),
        iterations: first.iterations,
        total_s,
        per_element_s,
        converged: first.converged,
        checksum: first.checksum,
    })
}

/// Run the Jacobi benchmark to convergence (or `max_iters`), timing the
/// iteration loop and reporting the median over repetitions.
pub fn run_jacobi(gscl: &mut Gscl, cfg: &BenchmarkConfig) -> Result<BenchmarkRecord> {
    run_with_reps(gscl, cfg, false)
}

/// Weak scaling: for each worker count the global domain is the tile
/// extent scaled by the worker-grid factorization, run for a fixed
/// iteration count (not to convergence) for comparability across sizes.
pub fn run_weak_scaling(
    gscl: &mut Gscl,
    tile: &[usize],
    workers_list: &[usize],
    base: &BenchmarkConfig,
) -> Result<Vec<BenchmarkRecord>> {
    if !base.arch.is_tiled() {
        return Err(BenchError::Config(format!(
            "weak scaling requires a tiled architecture, got {}",
            base.arch
        )));
    }
    let mut records = Vec::with_capacity(workers_list.len());
    for &w in workers_list {
        let mut cfg = base.clone();
        cfg.workers = w;
        cfg.variant = Variant::Fused;
        cfg.extents = match tile.len() {
            2 => {
                let wg = factorize_workers::<2>(w)?;
                vec![tile[0] * wg.counts[0], tile[1] * wg.counts[1]]
            }
            3 => {
                let wg = factorize_workers::<3>(w)?;
                vec![
                    tile[0] * wg.counts[0],
                    tile[1] * wg.counts[1],
                    tile[2] * wg.counts[2],
                ]
            }
            d => {
                return Err(BenchError::Config(format!(
                    "tile dimension {d} unsupported"
                )))
            }
        };
        records.push(run_with_reps(gscl, &cfg, true)?);
    }
    Ok(records)
}

/// `variant,dim,extents,arch,workers,iterations,total_s,per_element_s,converged,checksum`
/// with one row per record; floats carry nine significant digits. The
/// extents and architecture fields use `x` and `+` separators to stay
/// comma-free.
pub fn emit_csv(records: &[BenchmarkRecord], out: &mut dyn Write) -> Result<()> {
    writeln!(
        out,
        "variant,dim,extents,arch,workers,iterations,total_s,per_element_s,converged,checksum"
    )?;
    for r in records {
        let extents = r
            .config
            .extents
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join("x");
        let arch = r.config.arch.to_string().replace(',', "+");
        writeln!(
            out,
            "{},{},{},{},{},{},{:.8e},{:.8e},{},{:016x}",
            r.config.variant,
            r.config.dim(),
            extents,
            arch,
            r.config.workers,
            r.iterations,
            r.total_s,
            r.per_element_s,
            r.converged,
            r.checksum
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct PairCheck {
    pub left: String,
    pub right: String,
    pub iterations: (u64, u64),
    pub checksums: (u64, u64),
    pub pass: bool,
}

/// Compare two runs for identical iteration counts and checksums.
pub fn compare_records(
    left: &str,
    right: &str,
    a: &BenchmarkRecord,
    b: &BenchmarkRecord,
) -> PairCheck {
    PairCheck {
        left: left.to_string(),
        right: right.to_string(),
        iterations: (a.iterations, b.iterations),
        checksums: (a.checksum, b.checksum),
        pass: a.iterations == b.iterations && a.checksum == b.checksum,
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub pairs: Vec<PairCheck>,
    pub pass: bool,
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.pairs {
            writeln!(
                f,
                "{}: {} vs {}: iters {}/{} checksum {:016x}/{:016x}",
                if p.pass { "PASS" } else { "FAIL" },
                p.left,
                p.right,
                p.iterations.0,
                p.iterations.1,
                p.checksums.0,
                p.checksums.1
            )?;
        }
        writeln!(f, "verify: {}", if self.pass { "PASS" } else { "FAIL" })
    }
}

/// Run every variant and cross-check checksums and iteration counts. On a
/// non-sequential architecture the baseline (sequential by nature) is
/// checked against a sequential fused run, and that run against the
/// configured architecture.
pub fn verify(gscl: &mut Gscl, cfg: &BenchmarkConfig) -> Result<VerifyReport> {
    let seq = ArchitectureSpec::parse("sequential").expect("valid");
    let sequential_arch = cfg.arch.levels() == [LevelTag::Sequential];

    let fused = run_jacobi(
        gscl,
        &BenchmarkConfig {
            variant: Variant::Fused,
            ..cfg.clone()
        },
    )?;
    let two_pass = run_jacobi(
        gscl,
        &BenchmarkConfig {
            variant: Variant::TwoPass,
            ..cfg.clone()
        },
    )?;
    let baseline = run_jacobi(
        gscl,
        &BenchmarkConfig {
            variant: Variant::Baseline,
            arch: seq.clone(),
            workers: 1,
            ..cfg.clone()
        },
    )?;

    let mut pairs = vec![compare_records("fused", "two-pass", &fused, &two_pass)];
    if sequential_arch {
        pairs.push(compare_records("fused", "baseline", &fused, &baseline));
    } else {
        let fused_seq = run_jacobi(
            gscl,
            &BenchmarkConfig {
                variant: Variant::Fused,
                arch: seq,
                workers: 1,
                ..cfg.clone()
            },
        )?;
        pairs.push(compare_records(
            "fused",
            "fused-sequential",
            &fused,
            &fused_seq,
        ));
        pairs.push(compare_records(
            "fused-sequential",
            "baseline",
            &fused_seq,
            &baseline,
        ));
    }
    let pass = pairs.iter().all(|p| p.pass);
    Ok(VerifyReport { pairs, pass })
}
