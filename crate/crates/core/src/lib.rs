//! Generic stencil computations over regular grids.
//!
//! Application code states *apply this operator over these grids* through
//! iteration spaces (`do_all`, `do_reduce`, `do_diamond`, directional
//! sweeps); interchangeable execution backends supply the implementation:
//! a sequential reference loop, worker threads, tiled message passing with
//! halo exchange, and a simulated accelerator with staged buffers. Every
//! backend produces results bitwise equal to the sequential reference
//! (floating reductions agree to roundoff across worker counts).
//!
//! The execution hierarchy is chosen at run time from level tags
//! (`tiled,threaded,sequential`, ...), by the `GSCL_ARCH` environment
//! variable, a `gscl.toml` configuration file, or a machine probe. Grids
//! built through [`arch::default_storage`] pick the matching buffer layout,
//! so switching platforms changes one line of application code.
//!
//! ```
//! use gscl::{
//!     fuse, make_arch, op_convergence, op_diffusion, reduction_and, swap_grids, AccessMode,
//!     Domain, Grid, Gscl, HaloSpec, LevelTag,
//! };
//!
//! let mut gscl = Gscl::new();
//! gscl.init().unwrap();
//! let arch = make_arch(&[LevelTag::Sequential]).unwrap();
//!
//! let dom = Domain::new([16, 16]).unwrap();
//! let halo = HaloSpec::uniform(1);
//! let mut now = Grid::<f64, 2>::new(dom, halo, 0.0).unwrap();
//! let mut before = Grid::<f64, 2>::new(dom, halo, 0.0).unwrap();
//! now.write([8, 8], 1.0).unwrap();
//!
//! let step = fuse(op_diffusion(), op_convergence(1e-6)).unwrap();
//! let ctx = gscl
//!     .begin(&arch, vec![
//!         now.register(AccessMode::ReadWrite),
//!         before.register(AccessMode::ReadWrite),
//!     ])
//!     .unwrap();
//! let mut converged = false;
//! while !converged {
//!     swap_grids(&mut now, &mut before).unwrap();
//!     converged = ctx
//!         .do_reduce(&[&now, &before], &step, &reduction_and())
//!         .unwrap();
//! }
//! drop(ctx);
//! gscl.finalize().unwrap();
//! ```

mod arch;
mod cells;
mod element;
mod error;
mod exec;
mod geom;
mod grid;
mod ops;
mod space;
pub mod tile;

pub use arch::{default_storage, make_arch, ArchitectureSpec, LevelTag};
pub use cells::Cells;
pub use element::{Element, ElementRole, FloatElement, Ordered, Summable};
pub use error::{GsclError, Result};
pub use exec::{Context, ContextStats, GridReg, Gscl, LibraryPhase};
pub use geom::{Domain, HaloSpec, Index, Offset};
pub use grid::{swap_grids, Accessor, Grid, GridToken, ShapeFlavor, StorageSelector};
pub use ops::{
    fuse, op_convergence, op_diffusion, reduction_and, reduction_max, reduction_sum, AccessMode,
    Reduction, StencilOp,
};
pub use space::{Direction, IterationSpaceKind};
