//! The library lifecycle, execution contexts, and backend dispatch.
//!
//! A [`Gscl`] runtime moves through the phases Uninitialized → Ready →
//! (InContext ⇄ Ready) → Finalized. A [`Context`] is the active-execution
//! handle obtained from [`Gscl::begin`]: while it is active, the backend
//! owns the registered grids — direct element access raises
//! `ContextViolation`, and on device architectures the data lives in the
//! staging buffer until [`Context::end`] copies it back. Contexts are
//! single use; calls on an ended context fail rather than misbehave.

pub(crate) mod threaded;
pub(crate) mod tiled;

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use crate::arch::{
    default_storage, hardware_workers, read_config, resolve_default_arch, ArchitectureSpec,
};
use crate::cells::{Cells, GridView, ViewSet};
use crate::element::Element;
use crate::error::{GsclError, Result};
use crate::geom::{strides, Domain, HaloSpec};
use crate::grid::{BufferSet, Grid, GridToken, Residency, StorageSelector};
use crate::ops::{AccessMode, Reduction, StencilOp};
use crate::space::{
    seq_all, seq_diamond, seq_reduce, seq_sweep, Direction, IterationSpaceKind,
};

/// Process-lifecycle phase of a runtime instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LibraryPhase {
    Uninitialized,
    Ready,
    InContext,
    Finalized,
}

struct LibCore {
    phase: LibraryPhase,
    active: Option<u64>,
    next_ctx: u64,
    workers: usize,
}

/// Host↔device staging and message counters of one context.
#[derive(Debug, Default)]
pub(crate) struct Counters {
    pub uploads: AtomicU64,
    pub downloads: AtomicU64,
    pub messages: AtomicU64,
}

/// Snapshot of a context's transfer and message counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextStats {
    /// Host→device grid stagings (0 on device-free architectures).
    pub uploads: u64,
    /// Device→host grid stagings.
    pub downloads: u64,
    /// Halo-exchange and wavefront strip messages between tiles.
    pub messages: u64,
}

fn config_path() -> PathBuf {
    std::env::var_os("GSCL_CONFIG")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("gscl.toml"))
}

/// The library runtime: the phase machine plus worker configuration.
pub struct Gscl {
    core: Arc<Mutex<LibCore>>,
}

impl Default for Gscl {
    fn default() -> Self {
        Self::new()
    }
}

impl Gscl {
    /// A runtime in the Uninitialized phase. Nothing but [`Gscl::init`]
    /// works here.
    pub fn new() -> Self {
        Self {
            core: Arc::new(Mutex::new(LibCore {
                phase: LibraryPhase::Uninitialized,
                active: None,
                next_ctx: 1,
                workers: 1,
            })),
        }
    }

    /// Move to Ready. Worker count comes from `GSCL_WORKERS`, then the
    /// configuration file, then the hardware.
    pub fn init(&mut self) -> Result<()> {
        let mut core = self.core.lock().unwrap();
        if core.phase != LibraryPhase::Uninitialized {
            return Err(GsclError::PhaseViolation(format!(
                "init: phase is {:?}, must be Uninitialized",
                core.phase
            )));
        }
        let workers = match std::env::var("GSCL_WORKERS") {
            Ok(s) => {
                let w: usize = s.parse().map_err(|_| GsclError::InvalidWorkerCount(0))?;
                if w < 1 {
                    return Err(GsclError::InvalidWorkerCount(w));
                }
                w
            }
            Err(_) => match read_config(&config_path())?.workers {
                Some(w) if w >= 1 => w,
                Some(w) => return Err(GsclError::InvalidWorkerCount(w)),
                None => hardware_workers(),
            },
        };
        core.workers = workers;
        core.phase = LibraryPhase::Ready;
        Ok(())
    }

    /// Release backend resources and move to Finalized; terminal.
    pub fn finalize(&mut self) -> Result<()> {
        let mut core = self.core.lock().unwrap();
        match core.phase {
            LibraryPhase::Ready => {
                core.phase = LibraryPhase::Finalized;
                Ok(())
            }
            other => Err(GsclError::PhaseViolation(format!(
                "finalize: phase is {other:?}, must be Ready"
            ))),
        }
    }

    pub fn phase(&self) -> LibraryPhase {
        self.core.lock().unwrap().phase
    }

    pub fn workers(&self) -> usize {
        self.core.lock().unwrap().workers
    }

    pub fn set_workers(&mut self, workers: usize) -> Result<()> {
        if workers < 1 {
            return Err(GsclError::InvalidWorkerCount(workers));
        }
        self.core.lock().unwrap().workers = workers;
        Ok(())
    }

    /// The predefined hierarchy for this machine: `GSCL_ARCH` override,
    /// then the configuration file, then a hardware probe.
    pub fn default_arch(&self) -> Result<ArchitectureSpec> {
        let phase = self.phase();
        if !matches!(phase, LibraryPhase::Ready | LibraryPhase::InContext) {
            return Err(GsclError::PhaseViolation(format!(
                "default_arch: phase is {phase:?}, library not initialized"
            )));
        }
        let env = std::env::var("GSCL_ARCH").ok();
        let cfg = read_config(&config_path())?;
        resolve_default_arch(env.as_deref(), cfg.arch.as_deref(), hardware_workers())
    }

    /// Storage selector grids must be built with to run under `arch` with
    /// this runtime's worker count.
    pub fn storage_for(&self, arch: &ArchitectureSpec) -> Result<StorageSelector> {
        default_storage(arch, self.workers())
    }

    /// Open a context: registered grids enter backend residency (device
    /// architectures stage non-WriteOnly grids up) and become off limits to
    /// direct access until `end`.
    pub fn begin(&mut self, arch: &ArchitectureSpec, grids: Vec<GridReg>) -> Result<Context> {
        let mut core = self.core.lock().unwrap();
        if core.phase != LibraryPhase::Ready {
            return Err(GsclError::PhaseViolation(format!(
                "begin: phase is {:?}, must be Ready",
                core.phase
            )));
        }
        for (i, r) in grids.iter().enumerate() {
            let (tiled, device) = r.buf.storage_kind();
            if tiled != arch.is_tiled() || device != arch.has_device() {
                return Err(GsclError::StorageMismatch(format!(
                    "grid #{i} was not constructed via default_storage({arch})"
                )));
            }
            if grids[..i].iter().any(|p| p.token == r.token) {
                return Err(GsclError::ContextViolation(
                    "a grid may be registered only once per context".into(),
                ));
            }
        }
        let id = core.next_ctx;
        core.next_ctx += 1;
        let counters = Arc::new(Counters::default());
        for r in &grids {
            r.lock.store(id, Ordering::Release);
            r.buf.stage_in(r.mode, &counters);
        }
        core.phase = LibraryPhase::InContext;
        core.active = Some(id);
        Ok(Context {
            lib: Arc::clone(&self.core),
            id,
            arch: arch.clone(),
            regs: grids,
            counters,
            active: true,
        })
    }
}

/// One grid's registration for a context: its identity, the access mode the
/// caller declares for the whole context, and the staging hooks.
pub struct GridReg {
    token: GridToken,
    mode: AccessMode,
    lock: Arc<AtomicU64>,
    buf: Box<dyn ContextBuffer>,
}

trait ContextBuffer: Send {
    fn stage_in(&self, mode: AccessMode, counters: &Counters);
    fn stage_out(&self, mode: AccessMode, counters: &Counters);
    /// (tiled, device)
    fn storage_kind(&self) -> (bool, bool);
}

struct TypedReg<T: Element, const D: usize> {
    cell: Arc<Mutex<BufferSet<T, D>>>,
}

impl<T: Element, const D: usize> ContextBuffer for TypedReg<T, D> {
    fn stage_in(&self, mode: AccessMode, counters: &Counters) {
        let mut set = self.cell.lock().unwrap();
        if set.slots.first().is_none_or(|s| s.device.is_none()) {
            return;
        }
        if mode != AccessMode::WriteOnly {
            for slot in &mut set.slots {
                let host = &slot.host;
                slot.device.as_mut().unwrap().copy_from_slice(host);
            }
            counters.uploads.fetch_add(1, Ordering::Relaxed);
        }
        set.residency = Residency::Device;
    }

    fn stage_out(&self, mode: AccessMode, counters: &Counters) {
        let mut set = self.cell.lock().unwrap();
        if set.slots.first().is_none_or(|s| s.device.is_none()) {
            return;
        }
        if mode != AccessMode::ReadOnly {
            for slot in &mut set.slots {
                let dev = slot.device.as_ref().unwrap().clone();
                slot.host.copy_from_slice(&dev);
            }
            counters.downloads.fetch_add(1, Ordering::Relaxed);
        }
        set.residency = Residency::Host;
    }

    fn storage_kind(&self) -> (bool, bool) {
        let set = self.cell.lock().unwrap();
        (
            set.decomp.is_some(),
            set.slots.first().is_some_and(|s| s.device.is_some()),
        )
    }
}

impl<T: Element, const D: usize> Grid<T, D> {
    /// Registration entry for [`Gscl::begin`], declaring how this grid will
    /// be accessed within the whole context. `WriteOnly` skips the upload
    /// to a device, `ReadOnly` skips the download back.
    pub fn register(&self, mode: AccessMode) -> GridReg {
        GridReg {
            token: self.handle.token,
            mode,
            lock: Arc::clone(&self.handle.lock),
            buf: Box::new(TypedReg {
                cell: Arc::clone(&self.handle.cell),
            }),
        }
    }
}

/// The active-execution handle. Iteration spaces run through it; it becomes
/// invalid forever after [`Context::end`].
pub struct Context {
    lib: Arc<Mutex<LibCore>>,
    id: u64,
    arch: ArchitectureSpec,
    regs: Vec<GridReg>,
    counters: Arc<Counters>,
    active: bool,
}

impl Context {
    pub fn arch(&self) -> &ArchitectureSpec {
        &self.arch
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn stats(&self) -> ContextStats {
        ContextStats {
            uploads: self.counters.uploads.load(Ordering::Relaxed),
            downloads: self.counters.downloads.load(Ordering::Relaxed),
            messages: self.counters.messages.load(Ordering::Relaxed),
        }
    }

    /// Close the context: device-resident data returns to the host buffers
    /// (ReadOnly registrations skip the download), registered grids become
    /// directly accessible again, and the library returns to Ready.
    pub fn end(&mut self) -> Result<()> {
        if !self.active {
            return Err(GsclError::ContextViolation(
                "end: context is already invalid".into(),
            ));
        }
        let lib = Arc::clone(&self.lib);
        let mut core = lib.lock().unwrap();
        self.close(&mut core);
        Ok(())
    }

    fn close(&mut self, core: &mut LibCore) {
        for r in &self.regs {
            r.buf.stage_out(r.mode, &self.counters);
            r.lock.store(0, Ordering::Release);
        }
        core.phase = LibraryPhase::Ready;
        core.active = None;
        self.active = false;
    }

    /// Apply `op` once per core element with no ordering guarantee.
    pub fn do_all<T, const D: usize, F, R>(
        &self,
        grids: &[&Grid<T, D>],
        op: &StencilOp<D, F>,
    ) -> Result<()>
    where
        T: Element,
        F: Fn(&mut Cells<T, D>) -> R + Sync,
    {
        let body = op.body();
        let wrapped = move |c: &mut Cells<T, D>| {
            body(c);
        };
        self.run(IterationSpaceKind::All, grids, op, &wrapped, &(), &|_, _| ())
            .map(|_| ())
    }

    /// Apply `op` once per core element and reduce the returned values.
    pub fn do_reduce<T, const D: usize, F, R, C>(
        &self,
        grids: &[&Grid<T, D>],
        op: &StencilOp<D, F>,
        red: &Reduction<R, C>,
    ) -> Result<R>
    where
        T: Element,
        F: Fn(&mut Cells<T, D>) -> R + Sync,
        R: Clone + Send,
        C: Fn(R, R) -> R + Sync,
    {
        self.run(
            IterationSpaceKind::Reduce,
            grids,
            op,
            op.body(),
            &red.identity,
            &red.combine,
        )
    }

    /// Apply `op` so that `(i-1,j)` and `(i,j-1)` complete before `(i,j)`.
    /// 2D only; the operator may read the grid it writes at offsets
    /// `(-1,0)` and `(0,-1)`.
    pub fn do_diamond<T, const D: usize, F, R>(
        &self,
        grids: &[&Grid<T, D>],
        op: &StencilOp<D, F>,
    ) -> Result<()>
    where
        T: Element,
        F: Fn(&mut Cells<T, D>) -> R + Sync,
    {
        let body = op.body();
        let wrapped = move |c: &mut Cells<T, D>| {
            body(c);
        };
        self.run(
            IterationSpaceKind::Diamond,
            grids,
            op,
            &wrapped,
            &(),
            &|_, _| (),
        )
        .map(|_| ())
    }

    /// Apply `op` strictly ordered along `axis`, unordered across the other
    /// axes. The operator may read the grid it writes one step behind along
    /// the sweep.
    pub fn do_sweep<T, const D: usize, F, R>(
        &self,
        grids: &[&Grid<T, D>],
        op: &StencilOp<D, F>,
        axis: usize,
        direction: Direction,
    ) -> Result<()>
    where
        T: Element,
        F: Fn(&mut Cells<T, D>) -> R + Sync,
    {
        let body = op.body();
        let wrapped = move |c: &mut Cells<T, D>| {
            body(c);
        };
        self.run(
            IterationSpaceKind::Sweep { axis, direction },
            grids,
            op,
            &wrapped,
            &(),
            &|_, _| (),
        )
        .map(|_| ())
    }

    // The six named sweep entry points.

    pub fn do_i_inc<T, const D: usize, F, R>(
        &self,
        grids: &[&Grid<T, D>],
        op: &StencilOp<D, F>,
    ) -> Result<()>
    where
        T: Element,
        F: Fn(&mut Cells<T, D>) -> R + Sync,
    {
        self.do_sweep(grids, op, 0, Direction::Increasing)
    }

    pub fn do_i_dec<T, const D: usize, F, R>(
        &self,
        grids: &[&Grid<T, D>],
        op: &StencilOp<D, F>,
    ) -> Result<()>
    where
        T: Element,
        F: Fn(&mut Cells<T, D>) -> R + Sync,
    {
        self.do_sweep(grids, op, 0, Direction::Decreasing)
    }

    pub fn do_j_inc<T, const D: usize, F, R>(
        &self,
        grids: &[&Grid<T, D>],
        op: &StencilOp<D, F>,
    ) -> Result<()>
    where
        T: Element,
        F: Fn(&mut Cells<T, D>) -> R + Sync,
    {
        self.do_sweep(grids, op, 1, Direction::Increasing)
    }

    pub fn do_j_dec<T, const D: usize, F, R>(
        &self,
        grids: &[&Grid<T, D>],
        op: &StencilOp<D, F>,
    ) -> Result<()>
    where
        T: Element,
        F: Fn(&mut Cells<T, D>) -> R + Sync,
    {
        self.do_sweep(grids, op, 1, Direction::Decreasing)
    }

    pub fn do_k_inc<T, const D: usize, F, R>(
        &self,
        grids: &[&Grid<T, D>],
        op: &StencilOp<D, F>,
    ) -> Result<()>
    where
        T: Element,
        F: Fn(&mut Cells<T, D>) -> R + Sync,
    {
        self.do_sweep(grids, op, 2, Direction::Increasing)
    }

    pub fn do_k_dec<T, const D: usize, F, R>(
        &self,
        grids: &[&Grid<T, D>],
        op: &StencilOp<D, F>,
    ) -> Result<()>
    where
        T: Element,
        F: Fn(&mut Cells<T, D>) -> R + Sync,
    {
        self.do_sweep(grids, op, 2, Direction::Decreasing)
    }

    /// Validation plus dispatch on the architecture hierarchy, outermost
    /// level first. Results are identical to the sequential reference.
    fn run<T, const D: usize, FO, F, R, C>(
        &self,
        kind: IterationSpaceKind,
        grids: &[&Grid<T, D>],
        op: &StencilOp<D, FO>,
        body: &F,
        identity: &R,
        combine: &C,
    ) -> Result<R>
    where
        T: Element,
        F: Fn(&mut Cells<T, D>) -> R + Sync,
        R: Clone + Send,
        C: Fn(R, R) -> R + Sync,
    {
        if !self.active {
            return Err(GsclError::ContextViolation(
                "iteration space called on an invalid context".into(),
            ));
        }
        let workers = {
            let core = self.lib.lock().unwrap();
            if core.phase != LibraryPhase::InContext || core.active != Some(self.id) {
                return Err(GsclError::ContextViolation(
                    "context is no longer the active one".into(),
                ));
            }
            core.workers
        };
        if op.arity() != grids.len() {
            return Err(GsclError::ArityMismatch {
                expected: op.arity(),
                got: grids.len(),
            });
        }
        if grids.len() > crate::cells::MAX_ARITY {
            return Err(GsclError::UnsupportedArity {
                got: grids.len(),
                max: crate::cells::MAX_ARITY,
            });
        }
        for (i, g) in grids.iter().enumerate() {
            if grids[..i].iter().any(|p| p.token() == g.token()) {
                return Err(GsclError::AliasedGrids);
            }
        }
        let mut reg_modes = Vec::with_capacity(grids.len());
        for g in grids {
            match self.regs.iter().find(|r| r.token == g.token()) {
                Some(r) => reg_modes.push(r.mode),
                None => {
                    return Err(GsclError::ContextViolation(
                        "grid is not registered to this context".into(),
                    ))
                }
            }
        }
        let modes = op.modes();
        for (g, (&om, &rm)) in modes.iter().zip(&reg_modes).enumerate() {
            if (om.readable() && !rm.readable()) || (om.writable() && !rm.writable()) {
                return Err(GsclError::AccessModeViolation(format!(
                    "operator needs {om:?} on grid {g}, registered as {rm:?}"
                )));
            }
        }
        let domain = grids[0].domain();
        let mut halos = Vec::with_capacity(grids.len());
        let mut foots = Vec::with_capacity(grids.len());
        for (g, grid) in grids.iter().enumerate() {
            if grid.domain() != domain {
                return Err(GsclError::ShapeMismatch(
                    "all grids of a call must share one core domain".into(),
                ));
            }
            let halo = grid.halo();
            let foot = op.footprint(g, halo);
            if !halo.covers(&foot) {
                return Err(GsclError::HaloViolation {
                    offset: foot
                        .minus
                        .iter()
                        .map(|&m| -(m as i64))
                        .chain(foot.plus.iter().map(|&p| p as i64))
                        .collect(),
                });
            }
            halos.push(halo);
            foots.push(foot);
        }
        match kind {
            IterationSpaceKind::Diamond if D != 2 => {
                return Err(GsclError::UnsupportedDimension(D))
            }
            IterationSpaceKind::Sweep { axis, .. } if axis >= D => {
                return Err(GsclError::InvalidAxis { axis, dim: D })
            }
            _ => {}
        }

        let mut guards: Vec<MutexGuard<'_, BufferSet<T, D>>> = grids
            .iter()
            .map(|g| g.handle.cell.lock().unwrap())
            .collect();
        let device = self.arch.has_device();
        let tiled = self.arch.is_tiled();
        let decomp = guards[0].decomp.clone();
        for set in &guards {
            if set.decomp != decomp {
                return Err(GsclError::StorageMismatch(
                    "grids of a call must share one tile decomposition".into(),
                ));
            }
            if device {
                debug_assert_eq!(set.residency, Residency::Device);
            }
        }
        if tiled != decomp.is_some() {
            return Err(GsclError::StorageMismatch(
                "grid storage does not match the context architecture".into(),
            ));
        }

        let viewsets = build_views(&mut guards, &halos, modes, &foots, device);
        let threads = if self.arch.has_threaded() { workers } else { 1 };

        if let Some(decomp) = &decomp {
            let exchange: Vec<bool> = (0..grids.len())
                .map(|g| modes[g].readable() && !foots[g].is_zero())
                .collect();
            let forward: Vec<bool> = (0..grids.len())
                .map(|g| modes[g] == AccessMode::ReadWrite && !foots[g].is_zero())
                .collect();
            tiled::run_tiled(
                viewsets,
                decomp,
                kind,
                body,
                op.is_stateful(),
                identity,
                combine,
                &halos,
                &exchange,
                &forward,
                threads,
                &self.counters,
            )
        } else if threads > 1 {
            threaded::par_run(
                &viewsets[0],
                kind,
                body,
                op.is_stateful(),
                identity,
                combine,
                threads,
            )
        } else {
            let vs = &viewsets[0];
            let stateful = op.is_stateful();
            match kind {
                IterationSpaceKind::All => {
                    seq_all(vs, body, stateful)?;
                    Ok(identity.clone())
                }
                IterationSpaceKind::Reduce => seq_reduce(vs, body, stateful, identity, combine),
                IterationSpaceKind::Diamond => {
                    seq_diamond(vs, body, stateful)?;
                    Ok(identity.clone())
                }
                IterationSpaceKind::Sweep { axis, direction } => {
                    seq_sweep(vs, body, stateful, axis, direction)?;
                    Ok(identity.clone())
                }
            }
        }
    }
}

impl Drop for Context {
    /// Safety net: a context dropped while active behaves as if `end` was
    /// called, so grids do not stay locked on early-exit paths.
    fn drop(&mut self) {
        if self.active {
            let lib = Arc::clone(&self.lib);
            if let Ok(mut core) = lib.lock() {
                self.close(&mut core);
            };
        }
    }
}

fn build_views<T: Element, const D: usize>(
    guards: &mut [MutexGuard<'_, BufferSet<T, D>>],
    halos: &[HaloSpec<D>],
    modes: &[AccessMode],
    foots: &[HaloSpec<D>],
    device: bool,
) -> Vec<ViewSet<T, D>> {
    let tiles = guards[0].slots.len();
    (0..tiles)
        .map(|t| {
            let views = guards
                .iter_mut()
                .enumerate()
                .map(|(g, set)| {
                    let slot = &mut set.slots[t];
                    let ext = slot.info.extent;
                    let origin = slot.info.origin.map(|o| o as i64);
                    let buf: &mut Vec<T> = if device {
                        slot.device.as_mut().expect("device storage staged at begin")
                    } else {
                        &mut slot.host
                    };
                    let alloc = Domain { extents: ext }.allocated(&halos[g]);
                    let st = strides(alloc);
                    let base: usize = (0..D).map(|k| halos[g].minus[k] * st[k]).sum();
                    GridView {
                        ptr: buf.as_mut_ptr(),
                        len: buf.len(),
                        strides: st,
                        base,
                        core: ext,
                        origin,
                        mode: modes[g],
                        foot_minus: foots[g].minus,
                        foot_plus: foots[g].plus,
                    }
                })
                .collect();
            ViewSet { views }
        })
        .collect()
}
