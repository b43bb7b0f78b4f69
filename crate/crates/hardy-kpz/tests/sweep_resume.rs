use hardy_kpz::sweep::{
    run_sweep, AxisScale, AxisSpec, CellStatus, GridConfig, SweepParam, SweepPlan,
};
use hardy_kpz::Error;

fn small_plan() -> SweepPlan {
    let mut plan = SweepPlan::desk_p_sweep().unwrap();
    plan.grid = GridConfig {
        m: 80,
        ..GridConfig::default()
    };
    plan
}

#[test]
fn desk_sweep_band_brackets_p_plus() {
    let map = run_sweep(&SweepPlan::desk_p_sweep().unwrap(), None, None).unwrap();
    let band = map.band.expect("transition band");
    assert!(band.contains_p_plus, "{band:?}");
    assert!(band.width <= 0.1, "{band:?}");
    let centre = map
        .cells
        .iter()
        .find(|c| c.status == CellStatus::Inconclusive)
        .unwrap();
    assert!((centre.p - band.p_plus).abs() < 1e-12);
    assert_eq!(map.pending, 0);
}

#[test]
fn sweep_is_deterministic_across_thread_counts() {
    let plan = small_plan();
    let a = run_sweep(&plan, None, None).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let b = pool.install(|| run_sweep(&plan, None, None)).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.config_hash, b.config_hash);
}

#[test]
fn checkpoint_resume_matches_single_run() {
    let plan = small_plan();
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("checkpoint.jsonl");
    let partial = run_sweep(&plan, Some(&ck), Some(3)).unwrap();
    assert_eq!(partial.pending, plan.cell_count() - 3);
    let resumed = run_sweep(&plan, Some(&ck), None).unwrap();
    assert_eq!(resumed.pending, 0);
    let fresh = run_sweep(&plan, None, None).unwrap();
    assert_eq!(resumed.to_csv(), fresh.to_csv());
    let again = run_sweep(&plan, Some(&ck), Some(0)).unwrap();
    assert_eq!(again.to_csv(), fresh.to_csv());
}

#[test]
fn checkpoint_from_other_plan_is_rejected() {
    let plan = small_plan();
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("checkpoint.jsonl");
    run_sweep(&plan, Some(&ck), Some(1)).unwrap();
    let mut other = plan.clone();
    other.problem.mu = 2e-3;
    assert!(matches!(
        run_sweep(&other, Some(&ck), None),
        Err(Error::Config(_))
    ));
}

#[test]
fn empty_axis_gives_empty_map() {
    let mut plan = small_plan();
    plan.axes[0].steps = 0;
    let map = run_sweep(&plan, None, None).unwrap();
    assert!(map.cells.is_empty());
}

#[test]
fn two_axis_sweep_over_lambda_and_p() {
    let mut plan = small_plan();
    plan.axes = vec![
        AxisSpec {
            param: SweepParam::Lambda,
            start: 0.3,
            stop: 0.7,
            steps: 2,
            scale: AxisScale::HardyConstant,
        },
        AxisSpec {
            param: SweepParam::P,
            start: 0.8,
            stop: 1.2,
            steps: 3,
            scale: AxisScale::PPlus,
        },
    ];
    let map = run_sweep(&plan, None, None).unwrap();
    assert_eq!(map.cells.len(), 6);
    assert_eq!(map.overlay.len(), 2);
    for cell in &map.cells {
        let expect_converged = cell.coords[1] < 1.0;
        let status = cell.status;
        if expect_converged {
            assert_eq!(status, CellStatus::Converged, "{cell:?}");
        } else if cell.coords[1] > 1.0 {
            assert_eq!(status, CellStatus::BlowUp, "{cell:?}");
        }
    }
}
