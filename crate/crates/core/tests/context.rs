//! Context and phase legality: the annotated sample program, misuse
//! sequences, and device-staging transfer counts.

mod common;

use common::*;
use gscl::{
    op_diffusion, reduction_sum, AccessMode, Cells, Domain, Grid, GsclError, Gscl, HaloSpec,
    LibraryPhase, StencilOp,
};

/// The annotated sample program, line by line, on the staged-device
/// architecture: legal calls succeed, in-context direct access and calls on
/// an ended context fail with typed errors.
#[test]
fn sample_program_lines() {
    let mut gscl = Gscl::new();

    // "behavior here is undefined" before init: defined as PhaseViolation
    let dev = arch("device");
    assert!(matches!(
        gscl.begin(&dev, vec![]),
        Err(GsclError::PhaseViolation(_))
    ));

    gscl.init().unwrap();

    // here: init of storage and grids
    let sel = gscl.storage_for(&dev).unwrap();
    let v = new_grid(&sel, [16, 16], 1, 0.0);
    let u = new_grid(&sel, [16, 16], 1, 0.0);
    fill_seeded(&u, 3);
    let expected = {
        // sequential oracle on plain copies, out of any context
        let mut oracle_rt = runtime(1);
        let seq = arch("sequential");
        let plain = oracle_rt.storage_for(&seq).unwrap();
        let vv = grid_like(&plain, &v);
        let uu = grid_like(&plain, &u);
        let ctx = oracle_rt
            .begin(
                &seq,
                vec![
                    vv.register(AccessMode::WriteOnly),
                    uu.register(AccessMode::ReadOnly),
                ],
            )
            .unwrap();
        ctx.do_all(&[&vv, &uu], &op_diffusion()).unwrap();
        drop(ctx);
        core_bits(&vv)
    };

    let mut ctx = gscl
        .begin(
            &dev,
            vec![
                v.register(AccessMode::WriteOnly),
                u.register(AccessMode::ReadOnly),
            ],
        )
        .unwrap();

    // next statement is OK: context is active
    ctx.do_all(&[&v, &u], &op_diffusion()).unwrap();

    // next is wrong: direct access while the context holds the grid
    assert!(matches!(
        v.read([10, 10]),
        Err(GsclError::ContextViolation(_))
    ));
    assert!(matches!(
        u.write([10, 10], 1.0),
        Err(GsclError::ContextViolation(_))
    ));

    ctx.end().unwrap();

    // next is OK: value is printed (and equals the computed one)
    assert_eq!(core_bits(&v), expected);
    let _ = v.read([10, 10]).unwrap();

    // next is ERROR: context invalid
    assert!(matches!(
        ctx.do_all(&[&v, &u], &op_diffusion()),
        Err(GsclError::ContextViolation(_))
    ));

    gscl.finalize().unwrap();

    // "behavior here is undefined" after finalize: defined errors
    assert!(matches!(
        gscl.begin(&dev, vec![]),
        Err(GsclError::PhaseViolation(_))
    ));
    assert!(matches!(gscl.init(), Err(GsclError::PhaseViolation(_))));
}

#[test]
fn phase_misuse_is_typed() {
    let mut gscl = Gscl::new();
    assert!(matches!(gscl.finalize(), Err(GsclError::PhaseViolation(_))));
    gscl.init().unwrap();
    assert!(matches!(gscl.init(), Err(GsclError::PhaseViolation(_))));

    let seq = arch("sequential");
    let sel = gscl.storage_for(&seq).unwrap();
    let g = new_grid(&sel, [4, 4], 0, 0.0);

    let mut ctx = gscl
        .begin(&seq, vec![g.register(AccessMode::ReadWrite)])
        .unwrap();
    assert_eq!(gscl.phase(), LibraryPhase::InContext);

    // finalize while a context is active
    assert!(matches!(gscl.finalize(), Err(GsclError::PhaseViolation(_))));
    // second begin while one is active
    assert!(matches!(
        gscl.begin(&seq, vec![]),
        Err(GsclError::PhaseViolation(_))
    ));

    ctx.end().unwrap();
    assert_eq!(gscl.phase(), LibraryPhase::Ready);
    // end twice
    assert!(matches!(ctx.end(), Err(GsclError::ContextViolation(_))));

    // repeated Ready -> InContext cycles are allowed
    let mut ctx2 = gscl
        .begin(&seq, vec![g.register(AccessMode::ReadWrite)])
        .unwrap();
    ctx2.end().unwrap();

    gscl.finalize().unwrap();
    assert_eq!(gscl.phase(), LibraryPhase::Finalized);
}

#[test]
fn begin_rejects_storage_mismatch() {
    let mut gscl = runtime(2);
    let plain = new_grid(&gscl.storage_for(&arch("sequential")).unwrap(), [4, 4], 1, 0.0);
    assert!(matches!(
        gscl.begin(&arch("device"), vec![plain.register(AccessMode::ReadWrite)]),
        Err(GsclError::StorageMismatch(_))
    ));
    assert!(matches!(
        gscl.begin(
            &arch("tiled,sequential"),
            vec![plain.register(AccessMode::ReadWrite)]
        ),
        Err(GsclError::StorageMismatch(_))
    ));
    // registering the same grid twice in one begin
    assert!(matches!(
        gscl.begin(
            &arch("sequential"),
            vec![
                plain.register(AccessMode::ReadWrite),
                plain.register(AccessMode::ReadOnly)
            ]
        ),
        Err(GsclError::ContextViolation(_))
    ));
}

#[test]
fn unregistered_grids_stay_accessible_and_unusable() {
    let mut gscl = runtime(1);
    let seq = arch("sequential");
    let sel = gscl.storage_for(&seq).unwrap();
    let reg = new_grid(&sel, [4, 4], 1, 0.0);
    let other = new_grid(&sel, [4, 4], 1, 0.0);
    let ctx = gscl
        .begin(&seq, vec![reg.register(AccessMode::ReadWrite)])
        .unwrap();
    // direct access is forbidden only for registered grids
    other.write([0, 0], 5.0).unwrap();
    assert_eq!(other.read([0, 0]).unwrap(), 5.0);
    // but using an unregistered grid in an iteration space is an error
    let op = StencilOp::<2, _>::undeclared(1, |c: &mut Cells<f64, 2>| {
        let _ = c.center(0);
    });
    assert!(matches!(
        ctx.do_all(&[&other], &op),
        Err(GsclError::ContextViolation(_))
    ));
}

/// Transfers happen at begin/end only: one upload per non-WriteOnly grid,
/// one download per non-ReadOnly grid, nothing in between.
#[test]
fn device_staging_transfer_counts() {
    let mut gscl = runtime(1);
    let dev = arch("device");
    let sel = gscl.storage_for(&dev).unwrap();
    let v = new_grid(&sel, [12, 12], 1, 0.0);
    let u = new_grid(&sel, [12, 12], 1, 0.0);
    fill_seeded(&u, 9);

    let mut ctx = gscl
        .begin(
            &dev,
            vec![
                v.register(AccessMode::WriteOnly),
                u.register(AccessMode::ReadOnly),
            ],
        )
        .unwrap();
    // WriteOnly v skipped the upload; only u went up.
    assert_eq!(ctx.stats().uploads, 1);

    for _ in 0..8 {
        ctx.do_all(&[&v, &u], &op_diffusion()).unwrap();
        let _ = ctx
            .do_reduce(
                &[&u],
                &StencilOp::<2, _>::new(
                    &[AccessMode::ReadOnly],
                    &[HaloSpec::none()],
                    |c: &mut Cells<f64, 2>| c.center(0),
                ),
                &reduction_sum::<f64>(),
            )
            .unwrap();
    }
    // zero transfers between iteration-space calls inside one context
    assert_eq!(ctx.stats().uploads, 1);
    assert_eq!(ctx.stats().downloads, 0);

    ctx.end().unwrap();
    // ReadOnly u skipped the download; only v came back.
    assert_eq!(ctx.stats().downloads, 1);

    // the host now sees the computed values
    let plain = Grid::<f64, 2>::new(Domain::new([12, 12]).unwrap(), HaloSpec::uniform(1), 0.0)
        .unwrap();
    for_core([12usize, 12], |idx| {
        plain.write(idx, u.read(idx).unwrap()).unwrap();
    });
    let seq = arch("sequential");
    let psel = gscl.storage_for(&seq).unwrap();
    let vv = grid_like(&psel, &plain);
    let expect = {
        let ctx = gscl
            .begin(
                &seq,
                vec![
                    vv.register(AccessMode::WriteOnly),
                    plain.register(AccessMode::ReadOnly),
                ],
            )
            .unwrap();
        ctx.do_all(&[&vv, &plain], &op_diffusion()).unwrap();
        drop(ctx);
        core_bits(&vv)
    };
    assert_eq!(core_bits(&v), expect);
}

#[test]
fn default_arch_needs_ready_phase() {
    let gscl = Gscl::new();
    assert!(matches!(
        gscl.default_arch(),
        Err(GsclError::PhaseViolation(_))
    ));
    let mut gscl = Gscl::new();
    gscl.init().unwrap();
    // resolves to something valid whatever the environment says
    let a = gscl.default_arch().unwrap();
    assert!(!a.levels().is_empty());
}
