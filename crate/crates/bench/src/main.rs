use std::fs::File;
use std::io::{self, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gscl::{ArchitectureSpec, Gscl};
use gscl_bench::{
    emit_csv, run_jacobi, run_weak_scaling, verify, BenchError, BenchmarkConfig, Variant,
};

#[derive(Parser)]
#[command(
    name = "bench",
    about = "Stencil-library benchmarks: Jacobi variants, weak scaling, and cross-checks"
)]
struct Cli {
    /// Print the resolved architecture hierarchy, one tag per line, and exit.
    #[arg(long, global = true)]
    print_arch: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Fused,
    #[value(name = "two-pass")]
    TwoPass,
    Baseline,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Fused => Variant::Fused,
            VariantArg::TwoPass => Variant::TwoPass,
            VariantArg::Baseline => Variant::Baseline,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Convergence tolerance (infinite norm).
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,

    /// Iteration cap (jacobi/verify) or fixed iteration count (weak).
    #[arg(long, default_value_t = 10_000)]
    max_iters: u64,

    /// Architecture tags, outermost first (default: GSCL_ARCH, the
    /// configuration file, or a machine probe).
    #[arg(long)]
    arch: Option<String>,

    /// Worker count for the threaded and tiled levels (default:
    /// GSCL_WORKERS or the hardware).
    #[arg(long)]
    workers: Option<usize>,

    /// Repetitions; the reported time is the median.
    #[arg(long, default_value_t = 1)]
    reps: usize,

    /// Seed for the initial grid contents.
    #[arg(long, default_value_t = 12345)]
    seed: u64,

    /// Write CSV here instead of standard output.
    #[arg(long)]
    csv: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Iterative averaging to convergence; one CSV row per run.
    Jacobi {
        #[arg(long, value_enum, default_value = "fused")]
        variant: VariantArg,

        /// Grid dimension.
        #[arg(long, default_value_t = 2)]
        dim: usize,

        /// Core extents, comma separated; one value is replicated per axis.
        #[arg(long, value_delimiter = ',', default_value = "256")]
        size: Vec<usize>,

        #[command(flatten)]
        common: CommonArgs,
    },
    /// Weak scaling: a fixed tile per worker, growing the global domain.
    Weak {
        /// Tile extents per worker, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "256,256")]
        tile: Vec<usize>,

        /// Worker counts to sweep.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        workers_list: Vec<usize>,

        /// Fixed iteration count per run.
        #[arg(long, default_value_t = 100)]
        iters: u64,

        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run all variants and cross-check checksums and iteration counts.
    Verify {
        #[arg(long, default_value_t = 2)]
        dim: usize,

        #[arg(long, value_delimiter = ',', default_value = "64")]
        size: Vec<usize>,

        #[command(flatten)]
        common: CommonArgs,
    },
}

fn resolve_arch(gscl: &Gscl, flag: &Option<String>) -> Result<ArchitectureSpec, BenchError> {
    match flag {
        Some(s) => Ok(ArchitectureSpec::parse(s)?),
        None => Ok(gscl.default_arch()?),
    }
}

fn resolve_extents(dim: usize, size: &[usize]) -> Result<Vec<usize>, BenchError> {
    if size.len() == 1 {
        return Ok(vec![size[0]; dim]);
    }
    if size.len() != dim {
        return Err(BenchError::Config(format!(
            "--size lists {} extents for --dim {dim}",
            size.len()
        )));
    }
    Ok(size.to_vec())
}

fn write_records(
    records: &[gscl_bench::BenchmarkRecord],
    csv: &Option<String>,
) -> Result<(), BenchError> {
    match csv {
        Some(path) => {
            let mut f = File::create(path)?;
            emit_csv(records, &mut f)?;
        }
        None => {
            let mut out = io::stdout().lock();
            emit_csv(records, &mut out)?;
        }
    }
    Ok(())
}

fn build_config(
    gscl: &Gscl,
    variant: Variant,
    extents: Vec<usize>,
    common: &CommonArgs,
) -> Result<BenchmarkConfig, BenchError> {
    Ok(BenchmarkConfig {
        variant,
        extents,
        epsilon: common.epsilon,
        max_iters: common.max_iters,
        arch: resolve_arch(gscl, &common.arch)?,
        workers: common.workers.unwrap_or_else(|| gscl.workers()),
        reps: common.reps,
        seed: common.seed,
    })
}

fn run(cli: Cli) -> Result<u8, BenchError> {
    let mut gscl = Gscl::new();
    gscl.init()?;

    if cli.print_arch {
        let arch = match &cli.command {
            Some(Command::Jacobi { common, .. })
            | Some(Command::Weak { common, .. })
            | Some(Command::Verify { common, .. }) => resolve_arch(&gscl, &common.arch)?,
            None => gscl.default_arch()?,
        };
        print!("{}", arch.report());
        return Ok(0);
    }

    let code = match cli.command {
        None => {
            eprintln!("no command given; try --help");
            1
        }
        Some(Command::Jacobi {
            variant,
            dim,
            size,
            common,
        }) => {
            let cfg = build_config(
                &gscl,
                variant.into(),
                resolve_extents(dim, &size)?,
                &common,
            )?;
            let record = run_jacobi(&mut gscl, &cfg)?;
            write_records(&[record], &common.csv)?;
            0
        }
        Some(Command::Weak {
            tile,
            workers_list,
            iters,
            common,
        }) => {
            let mut base = build_config(&gscl, Variant::Fused, tile.clone(), &common)?;
            base.max_iters = iters;
            let records = run_weak_scaling(&mut gscl, &tile, &workers_list, &base)?;
            write_records(&records, &common.csv)?;
            0
        }
        Some(Command::Verify { dim, size, common }) => {
            let cfg = build_config(
                &gscl,
                Variant::Fused,
                resolve_extents(dim, &size)?,
                &common,
            )?;
            let report = verify(&mut gscl, &cfg)?;
            print!("{report}");
            if report.pass {
                0
            } else {
                2
            }
        }
    };
    gscl.finalize()?;
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let _ = writeln!(io::stderr(), "error: {e}");
            ExitCode::from(1)
        }
    }
}
