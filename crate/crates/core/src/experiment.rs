//! Case runs and figure reproductions.
//!
//! Every sweep point is an independent computation seeded from the master
//! seed, the point index and the case, so points can be evaluated in any
//! order and on any number of threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::atom::DelayCase;
use crate::bloch::{self, CapLoopSpec, LoopGeometry};
use crate::config::{ExperimentConfig, Figure};
use crate::error::{Error, Result};
use crate::fringe::{self, CaseSetup, FitResult, FringeDataset, PhaseModel, WindowSegment};
use crate::phase::{self, wrap_phase, DriveParams, PolarParams};
use crate::quantum::{self, StateVector};
use crate::zeno::{self, ClosedLoopSchedule, EvolutionSegment, MeasurementSchedule};

/// Steps per segment for the Bargmann cross-check of switched loops.
const ORACLE_STEPS: usize = 2_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub delta_hz: f64,
    pub rabi_hz: f64,
    pub case: u8,
    pub phi_rad: f64,
    pub phi_err_rad: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    pub delta_hz: f64,
    pub b_gauss: f64,
    pub b_err_gauss: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Figure2Row {
    pub delta_hz: f64,
    pub phi1_rad: f64,
    pub phi4_rad: f64,
    pub diff_rad: f64,
    pub diff_err_rad: f64,
    pub theory_rad: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Figure3Row {
    pub delta_hz: f64,
    pub phi3_rad: f64,
    pub phi4_rad: f64,
    pub diff_rad: f64,
    pub diff_err_rad: f64,
    pub beta_theory_rad: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Figure4Row {
    pub trajectory: String,
    pub phi1_rad: f64,
    pub phi3_rad: f64,
    pub phi4_rad: f64,
    pub diff41_rad: f64,
    pub diff41_err_rad: f64,
    pub diff34_rad: f64,
    pub diff34_err_rad: f64,
    /// `±Ω/2` from the enclosed solid angle, wrapped.
    pub beta_theory_rad: f64,
    /// Bargmann phase of the simulated two-level loop.
    pub beta_oracle_rad: f64,
    /// Dynamical phase along the actual loop minus that of the frozen state;
    /// zero for single circles.
    pub dyn_offset_rad: f64,
    pub closure_residual: f64,
    pub t1_s: f64,
    pub t2_s: f64,
    pub t3_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZenoPopulationRow {
    pub t_s: f64,
    pub p_down_free: f64,
    pub p_up_free: f64,
    pub p_down_zeno: f64,
    pub p_up_zeno: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppendixSummary {
    /// Largest population lost to `|↑⟩` during one measurement gap.
    pub max_gap_leakage: f64,
    pub survival_after_cycle: f64,
    pub visibility_case1: f64,
    pub visibility_case4: f64,
    pub contrast_ratio: f64,
    /// Fitted phase of the resonant full-loop fringes relative to the reference.
    pub half_period_shift_rad: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub name: String,
    pub config: ExperimentConfig,
    pub config_sha256: String,
    #[serde(skip)]
    pub fringes: Vec<(String, FringeDataset)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub field_fits: Vec<FieldRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phases: Vec<PhaseRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub figure2: Vec<Figure2Row>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub figure3: Vec<Figure3Row>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub figure4: Vec<Figure4Row>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub zeno_population: Vec<ZenoPopulationRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub appendix: Option<AppendixSummary>,
}

impl RunOutput {
    fn new(name: impl Into<String>, config: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            name: name.into(),
            config: config.clone(),
            config_sha256: config_hash(config)?,
            fringes: Vec::new(),
            field_fits: Vec::new(),
            phases: Vec::new(),
            figure2: Vec::new(),
            figure3: Vec::new(),
            figure4: Vec::new(),
            zeno_population: Vec::new(),
            appendix: None,
        })
    }
}

/// SHA-256 over a git-style blob header and the canonical JSON of the config.
pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let body = serde_json::to_string(config).map_err(|e| Error::Parse(e.to_string()))?;
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", body.len()).as_bytes());
    h.update(body.as_bytes());
    Ok(hex::encode(h.finalize()))
}

/// One drive configuration to be measured.
#[derive(Clone, Debug)]
struct Point {
    index: u64,
    delta_hz: f64,
    rabi_hz: f64,
    window: Vec<WindowSegment>,
}

struct Measured {
    field: FitResult,
    phases: Vec<(DelayCase, FitResult)>,
    fringes: Vec<FringeDataset>,
}

impl Measured {
    fn phase(&self, case: DelayCase) -> FitResult {
        self.phases
            .iter()
            .find(|(c, _)| *c == case)
            .map(|(_, f)| *f)
            .expect("case was measured")
    }
}

/// Window of `loops` full precessions at one drive setting.
pub fn circle_window(delta_hz: f64, rabi_hz: f64, loops: u32) -> Result<Vec<WindowSegment>> {
    let drive = DriveParams::new(delta_hz, rabi_hz)?;
    let omega = drive.generalized_rabi_hz();
    if !(omega > 0.0) {
        return Err(Error::config("drive", "δ and Ω_R cannot both vanish"));
    }
    Ok(vec![WindowSegment {
        drive,
        duration_s: loops as f64 / omega,
    }])
}

/// Reference-case setup for a drive window, with the Zeno schedule resolved
/// against the window length.
pub fn case_setup(cfg: &ExperimentConfig, window: Vec<WindowSegment>) -> Result<CaseSetup> {
    let window_s: f64 = window.iter().map(|w| w.duration_s).sum();
    let zeno: MeasurementSchedule = cfg.zeno.schedule(window_s.max(f64::MIN_POSITIVE))?;
    Ok(CaseSetup {
        case: DelayCase::Reference,
        env: cfg.environment.magnetic(),
        nu_rf_mhz: cfg.environment.nu_rf_mhz,
        rf: cfg.drive.rf_pulse.spec()?,
        window,
        epsilon_hz: cfg.drive.epsilon_hz,
        zeno,
        idle_pulses: cfg.zeno.idle_pulses,
        placement: cfg.drive.placement,
    })
}

/// Reference fringes fix the field; every requested case is then fitted
/// for its `|↓⟩` phase at that field.
fn measure(cfg: &ExperimentConfig, point: &Point, cases: &[DelayCase]) -> Result<Measured> {
    if cases.iter().any(|c| c.measured()) && !cfg.zeno.enabled {
        return Err(Error::config("zeno.enabled", "measured cases need Zeno pulses enabled"));
    }
    let setup = case_setup(cfg, point.window.clone())?;
    let noise = cfg.noise.model();
    let reps = cfg.noise.effective_repetitions();
    let grid = cfg.scan.t_grid();
    let reference = fringe::simulate_fringes(&setup, &grid, noise.as_ref(), reps, point.index)?;
    let field = fringe::fit_magnetic_field(&reference, &setup)?;
    let model = PhaseModel::from_setup(&setup.with_field(field.value))?;
    let mut phases = Vec::with_capacity(cases.len());
    let mut fringes = Vec::with_capacity(cases.len());
    for &case in cases {
        let ds = if case == DelayCase::Reference {
            reference.clone()
        } else {
            fringe::simulate_fringes(&setup.with_case(case), &grid, noise.as_ref(), reps, point.index)?
        };
        phases.push((case, fringe::fit_phase(&ds, &model)?));
        fringes.push(ds);
    }
    Ok(Measured { field, phases, fringes })
}

fn measure_all(cfg: &ExperimentConfig, points: &[Point], cases: &[DelayCase]) -> Result<Vec<Measured>> {
    points.par_iter().map(|p| measure(cfg, p, cases)).collect()
}

fn record(out: &mut RunOutput, point: &Point, m: &Measured) {
    out.field_fits.push(FieldRow {
        delta_hz: point.delta_hz,
        b_gauss: m.field.value,
        b_err_gauss: m.field.std_error,
    });
    for (case, fit) in &m.phases {
        out.phases.push(PhaseRow {
            delta_hz: point.delta_hz,
            rabi_hz: point.rabi_hz,
            case: case.number(),
            phi_rad: fit.value,
            phi_err_rad: fit.std_error,
        });
    }
}

fn sweep_points(cfg: &ExperimentConfig) -> Result<Vec<Point>> {
    if cfg.scan.delta_sweep_hz.is_empty() {
        return Err(Error::config("scan.delta_sweep_hz", "sweep list is empty"));
    }
    cfg.scan
        .delta_sweep_hz
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            Ok(Point {
                index: i as u64,
                delta_hz: d,
                rabi_hz: cfg.drive.rabi_hz,
                window: circle_window(d, cfg.drive.rabi_hz, cfg.drive.loops)?,
            })
        })
        .collect()
}

fn configured_window(cfg: &ExperimentConfig) -> Result<Vec<WindowSegment>> {
    if cfg.drive.segments.is_empty() {
        return circle_window(cfg.drive.delta_hz, cfg.drive.rabi_hz, cfg.drive.loops);
    }
    cfg.drive
        .segments
        .iter()
        .map(|s| {
            Ok(WindowSegment {
                drive: DriveParams::new(s.delta_hz, s.rabi_hz)?,
                duration_s: s.duration_s,
            })
        })
        .collect()
}

/// Reference fringes plus the selected case at the configured drive.
pub fn run_case(cfg: &ExperimentConfig, case: DelayCase) -> Result<RunOutput> {
    cfg.validate()?;
    let point = Point {
        index: 0,
        delta_hz: cfg.drive.delta_hz,
        rabi_hz: cfg.drive.rabi_hz,
        window: configured_window(cfg)?,
    };
    let cases: Vec<DelayCase> = if case == DelayCase::Reference {
        vec![case]
    } else {
        vec![DelayCase::Reference, case]
    };
    let m = measure(cfg, &point, &cases)?;
    let mut out = RunOutput::new(format!("case{}", case.number()), cfg)?;
    record(&mut out, &point, &m);
    for ds in m.fringes {
        out.fringes.push((format!("case{}", ds.case.number()), ds));
    }
    Ok(out)
}

/// Zeno-frozen phase against the reference phase across the detuning sweep.
pub fn run_figure2(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let points = sweep_points(cfg)?;
    let measured = measure_all(cfg, &points, &[DelayCase::Reference, DelayCase::DrivenZeno])?;
    let mut out = RunOutput::new("figure2", cfg)?;
    for (p, m) in points.iter().zip(&measured) {
        record(&mut out, p, m);
        let (phi1, phi4) = (m.phase(DelayCase::Reference), m.phase(DelayCase::DrivenZeno));
        let (diff, err) = fringe::phase_difference(&phi4, &phi1);
        out.figure2.push(Figure2Row {
            delta_hz: p.delta_hz,
            phi1_rad: phi1.value,
            phi4_rad: phi4.value,
            diff_rad: diff,
            diff_err_rad: err,
            theory_rad: 0.0,
        });
    }
    Ok(out)
}

/// Geometric phase `π(1 − cos θ)` of one circle.
pub fn circle_beta(delta_hz: f64, rabi_hz: f64, epsilon_hz: f64) -> Result<f64> {
    let p = phase::from_detuning(DriveParams::new(delta_hz, rabi_hz)?, epsilon_hz)?;
    Ok(phase::aa_phase(p.theta, 1)?.unwrapped)
}

/// Measurement-free phase against the Zeno-frozen phase across the sweep.
/// Differences are reported on the branch nearest the prediction.
pub fn run_figure3(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let points = sweep_points(cfg)?;
    let measured = measure_all(
        cfg,
        &points,
        &[DelayCase::Reference, DelayCase::Driven, DelayCase::DrivenZeno],
    )?;
    let mut out = RunOutput::new("figure3", cfg)?;
    for (p, m) in points.iter().zip(&measured) {
        record(&mut out, p, m);
        let (phi3, phi4) = (m.phase(DelayCase::Driven), m.phase(DelayCase::DrivenZeno));
        let (diff, err) = fringe::phase_difference(&phi3, &phi4);
        let beta = cfg.drive.loops as f64 * circle_beta(p.delta_hz, p.rabi_hz, cfg.drive.epsilon_hz)?;
        out.figure3.push(Figure3Row {
            delta_hz: p.delta_hz,
            phi3_rad: phi3.value,
            phi4_rad: phi4.value,
            diff_rad: beta + wrap_phase(diff - beta),
            diff_err_rad: err,
            beta_theory_rad: beta,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trajectory {
    /// The circle traced twice.
    DoubleLoop,
    /// Switched Rabi frequency at δ = 24 kHz, 36.7 → 26.4 kHz.
    CapsB,
    /// Switched Rabi frequency at δ = 16 kHz, 36.7 → 19.9 kHz.
    CapsC,
}

impl Trajectory {
    pub fn label(self) -> &'static str {
        match self {
            Trajectory::DoubleLoop => "a",
            Trajectory::CapsB => "b",
            Trajectory::CapsC => "c",
        }
    }

    fn preset(self) -> Option<(f64, f64, f64)> {
        match self {
            Trajectory::DoubleLoop => None,
            Trajectory::CapsB => Some((24e3, 36.7e3, 26.4e3)),
            Trajectory::CapsC => Some((16e3, 36.7e3, 19.9e3)),
        }
    }
}

/// Geometry of the window for one trajectory, with the theory columns.
pub struct LoopPlan {
    pub window: Vec<WindowSegment>,
    pub beta_theory: f64,
    pub beta_oracle: f64,
    pub dyn_offset: f64,
    pub schedule: ClosedLoopSchedule,
    pub delta_hz: f64,
    pub rabi_hz: f64,
}

fn polar(delta_hz: f64, rabi_hz: f64, epsilon_hz: f64) -> Result<PolarParams> {
    phase::from_detuning(DriveParams::new(delta_hz, rabi_hz)?, epsilon_hz)
}

/// `Σ tᵢ(⟨↓|Hᵢ|↓⟩ − ⟨ψᵢ|Hᵢ|ψᵢ⟩)` with `ψᵢ` the state entering segment `i`;
/// energy is conserved within each segment.
pub fn dynamical_offset(segments: &[EvolutionSegment]) -> Result<f64> {
    let down = StateVector::down();
    let mut psi = down.clone();
    let mut offset = 0.0;
    for seg in segments {
        let h = seg.generator.hamiltonian();
        offset += seg.duration * (h.expectation(&down)? - h.expectation(&psi)?);
        psi = quantum::apply(&seg.generator.propagator(seg.duration), &psi)?;
    }
    Ok(offset)
}

pub fn plan_loop(cfg: &ExperimentConfig, trajectory: Trajectory) -> Result<LoopPlan> {
    let eps = cfg.drive.epsilon_hz;
    match trajectory {
        Trajectory::DoubleLoop => {
            let p = polar(cfg.drive.delta_hz, cfg.drive.rabi_hz, eps)?;
            let window = circle_window(cfg.drive.delta_hz, cfg.drive.rabi_hz, 2)?;
            let seg = EvolutionSegment::polar(p, 2.0 * p.period())?;
            let run = zeno::free_run(&[seg], &StateVector::down())?;
            let one = bloch::bargmann_geometric_phase(&bloch::circle_states(&p, 10_000)?)?;
            Ok(LoopPlan {
                window,
                beta_theory: bloch::loop_phase_prediction(&LoopGeometry::Circle {
                    theta: p.theta,
                    loops: 2,
                })?,
                beta_oracle: wrap_phase(2.0 * one),
                dyn_offset: 0.0,
                schedule: ClosedLoopSchedule {
                    t1: 2.0 * p.period(),
                    t2: 0.0,
                    t3: 0.0,
                    residual: 1.0 - run.final_state.amplitude(quantum::DOWN).norm(),
                },
                delta_hz: cfg.drive.delta_hz,
                rabi_hz: cfg.drive.rabi_hz,
            })
        }
        Trajectory::CapsB | Trajectory::CapsC => {
            let (delta, r1, r2) = match cfg.drive.second_rabi_hz {
                Some(r2) => (cfg.drive.delta_hz, cfg.drive.rabi_hz, r2),
                None => trajectory.preset().expect("switched trajectories have presets"),
            };
            let h1 = polar(delta, r1, eps)?;
            let h2 = polar(delta, r2, eps)?;
            let schedule = match cfg.drive.switch_time_s {
                Some(t1) => zeno::find_closed_loop_schedule_with_switch(&h1, &h2, t1)?,
                None => zeno::find_closed_loop_schedule(&h1, &h2)?,
            };
            let (spec, orientation) = CapLoopSpec::from_schedule(&h1, &h2, &schedule)?;
            let d1 = DriveParams::new(delta, r1)?;
            let d2 = DriveParams::new(delta, r2)?;
            let window = vec![
                WindowSegment {
                    drive: d1,
                    duration_s: schedule.t1,
                },
                WindowSegment {
                    drive: d2,
                    duration_s: schedule.t2,
                },
                WindowSegment {
                    drive: d1,
                    duration_s: schedule.t3,
                },
            ];
            Ok(LoopPlan {
                window,
                beta_theory: bloch::loop_phase_prediction(&LoopGeometry::Cap { spec, orientation })?,
                beta_oracle: bloch::schedule_bargmann_phase(&h1, &h2, &schedule, ORACLE_STEPS)?,
                dyn_offset: dynamical_offset(&schedule.segments(&h1, &h2)?)?,
                schedule,
                delta_hz: delta,
                rabi_hz: r1,
            })
        }
    }
}

/// Cases 1, 3 and 4 on a double loop or a switched two-circle loop.
pub fn run_figure4(cfg: &ExperimentConfig, trajectory: Trajectory) -> Result<RunOutput> {
    cfg.validate()?;
    let plan = plan_loop(cfg, trajectory)?;
    let point = Point {
        index: 0,
        delta_hz: plan.delta_hz,
        rabi_hz: plan.rabi_hz,
        window: plan.window.clone(),
    };
    let m = measure(
        cfg,
        &point,
        &[DelayCase::Reference, DelayCase::Driven, DelayCase::DrivenZeno],
    )?;
    let mut out = RunOutput::new(format!("figure4{}", trajectory.label()), cfg)?;
    record(&mut out, &point, &m);
    let (phi1, phi3, phi4) = (
        m.phase(DelayCase::Reference),
        m.phase(DelayCase::Driven),
        m.phase(DelayCase::DrivenZeno),
    );
    let (d41, e41) = fringe::phase_difference(&phi4, &phi1);
    let (d34, e34) = fringe::phase_difference(&phi3, &phi4);
    out.figure4.push(Figure4Row {
        trajectory: trajectory.label().to_string(),
        phi1_rad: phi1.value,
        phi3_rad: phi3.value,
        phi4_rad: phi4.value,
        diff41_rad: d41,
        diff41_err_rad: e41,
        diff34_rad: d34,
        diff34_err_rad: e34,
        beta_theory_rad: plan.beta_theory,
        beta_oracle_rad: plan.beta_oracle,
        dyn_offset_rad: plan.dyn_offset,
        closure_residual: plan.schedule.residual,
        t1_s: plan.schedule.t1,
        t2_s: plan.schedule.t2,
        t3_s: plan.schedule.t3,
    });
    Ok(out)
}

/// Population under a resonant drive with and without measurement pulses
/// over one Rabi cycle, plus fringe exemplars for cases 1, 3 and 4 on the
/// resonant full loop.
pub fn run_appendix_checks(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let rabi = cfg.drive.rabi_hz;
    let p = polar(0.0, rabi, 0.0)?;
    let cycle = p.period();
    let schedule = cfg.zeno.schedule(cycle)?;
    let mut out = RunOutput::new("appendix", cfg)?;

    let samples = 200;
    let rows: Vec<ZenoPopulationRow> = (0..=samples)
        .into_par_iter()
        .map(|k| {
            let t = cycle * k as f64 / samples as f64;
            let seg = EvolutionSegment::polar(p, t)?;
            let free = zeno::free_run(std::slice::from_ref(&seg), &StateVector::down())?;
            let frozen = if t > 0.0 {
                zeno::zeno_freeze_run(&[seg], &schedule, &StateVector::down())?.final_state
            } else {
                StateVector::down()
            };
            Ok(ZenoPopulationRow {
                t_s: t,
                p_down_free: free.final_state.population(quantum::DOWN),
                p_up_free: free.final_state.population(quantum::UP),
                p_down_zeno: frozen.population(quantum::DOWN),
                p_up_zeno: frozen.population(quantum::UP),
            })
        })
        .collect::<Result<_>>()?;
    out.zeno_population = rows;

    // Survival at period boundaries; each drop is the leakage of one gap.
    // The drive is constant and the schedule periodic, so periods chain.
    let full_periods = (cycle / schedule.period).floor() as usize;
    let one_period = [EvolutionSegment::polar(p, schedule.period)?];
    let mut psi = StateVector::down();
    let mut survival = vec![1.0];
    for _ in 0..full_periods {
        psi = zeno::zeno_freeze_run(&one_period, &schedule, &psi)?.final_state;
        survival.push(psi.norm_sqr());
    }
    let max_gap_leakage = survival.windows(2).map(|w| 1.0 - w[1] / w[0]).fold(0.0, f64::max);
    let seg = EvolutionSegment::polar(p, cycle)?;
    let survival_after_cycle = zeno::zeno_freeze_run(&[seg], &schedule, &StateVector::down())?.survival;

    let point = Point {
        index: 0,
        delta_hz: 0.0,
        rabi_hz: rabi,
        window: circle_window(0.0, rabi, 1)?,
    };
    let cases = [DelayCase::Reference, DelayCase::Driven, DelayCase::DrivenZeno];
    let m = measure(cfg, &point, &cases)?;
    record(&mut out, &point, &m);
    let setup = case_setup(cfg, point.window.clone())?;
    let t = [setup.window_duration()];
    let vis = |case: DelayCase| -> Result<f64> { fringe::visibility(&setup.with_case(case).delay_end_states(&t)?[0]) };
    let (v1, v4) = (vis(DelayCase::Reference)?, vis(DelayCase::DrivenZeno)?);
    let shift = fringe::phase_difference(&m.phase(DelayCase::Driven), &m.phase(DelayCase::Reference)).0;
    out.appendix = Some(AppendixSummary {
        max_gap_leakage,
        survival_after_cycle,
        visibility_case1: v1,
        visibility_case4: v4,
        contrast_ratio: v4 / v1,
        half_period_shift_rad: shift,
    });
    for ds in m.fringes {
        out.fringes.push((format!("case{}", ds.case.number()), ds));
    }
    Ok(out)
}

/// Dispatch on `run.figure`, falling back to `run.case`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    match (cfg.run.figure, cfg.run.case) {
        (Some(Figure::Two), _) => run_figure2(cfg),
        (Some(Figure::Three), _) => run_figure3(cfg),
        (Some(Figure::FourA), _) => run_figure4(cfg, Trajectory::DoubleLoop),
        (Some(Figure::FourB), _) => run_figure4(cfg, Trajectory::CapsB),
        (Some(Figure::FourC), _) => run_figure4(cfg, Trajectory::CapsC),
        (Some(Figure::Appendix), _) => run_appendix_checks(cfg),
        (None, Some(c)) => run_case(cfg, DelayCase::from_number(c)?),
        (None, None) => Err(Error::config("run", "select a figure or a case")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::phase_distance;

    fn quiet() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.noise.enabled = false;
        cfg.zeno.projections = Some(10_000);
        cfg
    }

    #[test]
    fn case_one_recovers_field() {
        let out = run_case(&quiet(), DelayCase::Reference).unwrap();
        assert!((out.field_fits[0].b_gauss - 6.179).abs() < 1e-5);
        assert_eq!(out.fringes.len(), 1);
    }

    #[test]
    fn case_two_matches_case_one() {
        let cfg = quiet();
        let one = run_case(&cfg, DelayCase::Reference).unwrap();
        let two = run_case(&cfg, DelayCase::ReferenceZeno).unwrap();
        assert_eq!(one.fringes[0].1.populations, two.fringes[1].1.populations);
        assert_eq!(one.phases[0].phi_rad, two.phases[1].phi_rad);
    }

    #[test]
    fn realistic_schedule_freezes_within_noise() {
        let mut cfg = ExperimentConfig::default();
        cfg.noise.seed = Some(2024);
        let out = run_case(&cfg, DelayCase::DrivenZeno).unwrap();
        let (phi1, phi4) = (out.phases[0], out.phases[1]);
        let diff = wrap_phase(phi4.phi_rad - phi1.phi_rad);
        let err = phi1.phi_err_rad.hypot(phi4.phi_err_rad);
        assert!(diff.abs() < 3.0 * err + 0.2, "diff {diff} err {err}");
    }

    #[test]
    fn figure3_single_point() {
        let mut cfg = quiet();
        cfg.scan.delta_sweep_hz = vec![0.0, 16e3];
        let out = run_figure3(&cfg).unwrap();
        assert!(phase_distance(out.figure3[0].diff_rad, std::f64::consts::PI) < 1e-3);
        assert!((out.figure3[1].diff_rad - 1.9848).abs() < 1e-3);
        assert!((out.figure3[1].beta_theory_rad - 1.9848).abs() < 1e-4);
    }

    #[test]
    fn switched_loops_carry_a_dynamical_offset() {
        let cfg = quiet();
        let out = run_figure4(&cfg, Trajectory::CapsB).unwrap();
        let row = &out.figure4[0];
        assert!(row.closure_residual < 1e-10);
        assert!(phase_distance(row.beta_theory_rad, row.beta_oracle_rad) < 1e-3);
        assert!(row.diff41_rad.abs() < 1e-3);
        let expected = wrap_phase(row.beta_theory_rad + row.dyn_offset_rad);
        assert!(phase_distance(row.diff34_rad, expected) < 1e-3, "{row:?}");
    }

    #[test]
    fn config_hash_is_stable() {
        let cfg = ExperimentConfig::default();
        assert_eq!(config_hash(&cfg).unwrap(), config_hash(&cfg.clone()).unwrap());
        let mut other = cfg.clone();
        other.noise.seed = Some(2);
        assert_ne!(config_hash(&cfg).unwrap(), config_hash(&other).unwrap());
    }

    #[test]
    fn dispatch_needs_a_target() {
        let cfg = quiet();
        assert!(matches!(run(&cfg), Err(Error::Config { .. })));
    }

    #[test]
    fn measured_cases_need_pulses() {
        let mut cfg = quiet();
        cfg.zeno.enabled = false;
        assert!(run_case(&cfg, DelayCase::DrivenZeno).is_err());
        run_case(&cfg, DelayCase::Driven).unwrap();
    }
}
