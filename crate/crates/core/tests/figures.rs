//! Worked figure examples, noiseless unless stated.

use std::f64::consts::PI;

use zeno_phase::atom::{self, DelayCase};
use zeno_phase::config::ExperimentConfig;
use zeno_phase::experiment::{self, Trajectory};
use zeno_phase::phase::phase_distance;

fn quiet() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.noise.enabled = false;
    cfg
}

fn dense() -> ExperimentConfig {
    let mut cfg = quiet();
    cfg.zeno.projections = Some(10_000);
    cfg
}

#[test]
fn figure2_dense_sweep_is_flat() {
    let mut cfg = dense();
    cfg.scan.delta_sweep_hz = (-3..=3).map(|k| k as f64 * 16e3).collect();
    let out = experiment::run_figure2(&cfg).unwrap();
    for row in &out.figure2 {
        assert!(row.diff_rad.abs() < 1e-3, "{row:?}");
        assert_eq!(row.theory_rad, 0.0);
    }
}

#[test]
fn figure2_resonant_point_vanishes() {
    // Real step overlaps at θ = π/2: the frozen amplitude carries no phase.
    let cfg = quiet();
    let setup = experiment::case_setup(&cfg, experiment::circle_window(0.0, cfg.drive.rabi_hz, 1).unwrap()).unwrap();
    let t = [setup.window_duration()];
    let frozen = &setup.with_case(DelayCase::DrivenZeno).delay_end_states(&t).unwrap()[0];
    let reference = &setup.delay_end_states(&t).unwrap()[0];
    let a4 = frozen.amplitude(atom::DOWN);
    let a1 = reference.amplitude(atom::DOWN);
    assert!((a4 * a1.conj()).arg().abs() < 1e-12);
    assert!(a4.norm() < 1.0);

    let mut cfg = dense();
    cfg.scan.delta_sweep_hz = vec![0.0];
    let row = experiment::run_figure2(&cfg).unwrap().figure2[0];
    assert!(row.diff_rad.abs() < 1e-6, "{row:?}");
}

#[test]
fn figure3_far_detuned_points_approach_the_poles() {
    let mut cfg = quiet();
    cfg.scan.delta_sweep_hz = vec![-2e6, 2e6];
    let out = experiment::run_figure3(&cfg).unwrap();
    assert!(phase_distance(out.figure3[0].diff_rad, 2.0 * PI) < 2e-3);
    assert!((out.figure3[0].diff_rad - 2.0 * PI).abs() < 2e-3);
    assert!(out.figure3[1].diff_rad.abs() < 2e-3);
}

#[test]
fn figure4_double_loop() {
    let row = experiment::run_figure4(&dense(), Trajectory::DoubleLoop)
        .unwrap()
        .figure4[0]
        .clone();
    assert!((row.diff34_rad + 2.3136).abs() < 1e-3, "{row:?}");
    assert!(row.diff41_rad.abs() < 1e-3);
}

#[test]
fn figure4_switched_loops_freeze() {
    for t in [Trajectory::CapsB, Trajectory::CapsC] {
        let row = experiment::run_figure4(&dense(), t).unwrap().figure4[0].clone();
        assert!(row.diff41_rad.abs() < 1e-3, "{row:?}");
        assert!(row.closure_residual.abs() < 1e-10);
        assert!(phase_distance(row.diff34_rad, row.beta_theory_rad + row.dyn_offset_rad) < 1e-3);
    }
}

#[test]
fn figure4_user_schedule() {
    let mut cfg = quiet();
    cfg.drive.delta_hz = 20e3;
    cfg.drive.rabi_hz = 35e3;
    cfg.drive.second_rabi_hz = Some(25e3);
    let plan = experiment::plan_loop(&cfg, Trajectory::CapsB).unwrap();
    assert_eq!(plan.window[0].drive.delta_hz, 20e3);
    assert!(plan.schedule.residual.abs() < 1e-10);
    assert!(phase_distance(plan.beta_theory, plan.beta_oracle) < 1e-3);
}

#[test]
fn appendix_population_and_leakage() {
    let out = experiment::run_appendix_checks(&quiet()).unwrap();
    let rows = &out.zeno_population;
    let peak_free = rows.iter().map(|r| r.p_up_free).fold(0.0, f64::max);
    assert!(peak_free > 0.999);
    assert!((rows.last().unwrap().p_down_free - 1.0).abs() < 1e-9);
    let summary = out.appendix.unwrap();
    assert!(summary.max_gap_leakage < 0.07, "{summary:?}");
    assert!(summary.survival_after_cycle > 0.9, "{summary:?}");
    assert!(rows.iter().all(|r| r.p_up_zeno < 0.07));
    assert!(phase_distance(summary.half_period_shift_rad, PI) < 1e-6);
}

#[test]
fn appendix_contrast_is_preserved_with_dense_pulses() {
    let summary = experiment::run_appendix_checks(&dense()).unwrap().appendix.unwrap();
    assert!((summary.contrast_ratio - 1.0).abs() < 1e-6, "{summary:?}");
}
