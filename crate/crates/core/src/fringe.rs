//! Ramsey fringes: simulation of the four delay cases and least-squares
//! extraction of the magnetic field and of the `|↓⟩` phase.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::atom::{self, DelayCase, MagneticEnvironment, NoiseModel, RfPulseSpec, DOWN, M_MINUS, M_PLUS, UP};
use crate::error::{Error, Result};
use crate::optimize;
use crate::phase::{wrap_phase, DriveParams};
use crate::quantum::{self, StateVector, UnitaryOperator};
use crate::zeno::{self, EvolutionSegment, MeasurementSchedule};

pub const MIN_GRID_POINTS: usize = 8;
/// Fringes with less P₀ contrast than this are not fitted.
pub const MIN_CONTRAST: f64 = 0.05;
pub const PHASE_GRID_POINTS: usize = 721;
pub const DEFAULT_PHASE_PROBE: f64 = 0.01;
pub const FIELD_WINDOW_GAUSS: f64 = 5e-3;
pub const FIELD_GRID_POINTS: usize = 401;
pub const FIELD_PROBE_GAUSS: f64 = 1e-6;

const HZ_PER_MHZ: f64 = 1e6;

/// One constant-drive piece of the microwave window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSegment {
    pub drive: DriveParams,
    pub duration_s: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowPlacement {
    /// Drive first, idle for the rest of the delay.
    #[default]
    Start,
    /// Idle first, drive at the end of the delay.
    End,
}

/// Everything needed to turn a delay `T` into a pre-readout state.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseSetup {
    pub case: DelayCase,
    pub env: MagneticEnvironment,
    pub nu_rf_mhz: f64,
    pub rf: RfPulseSpec,
    pub window: Vec<WindowSegment>,
    pub epsilon_hz: f64,
    pub zeno: MeasurementSchedule,
    /// Keep pulsing during the idle part of the delay in measured cases.
    pub idle_pulses: bool,
    pub placement: WindowPlacement,
}

impl CaseSetup {
    pub fn window_duration(&self) -> f64 {
        self.window.iter().map(|s| s.duration_s).sum()
    }

    pub fn with_case(&self, case: DelayCase) -> Self {
        Self { case, ..self.clone() }
    }

    pub fn with_field(&self, b_gauss: f64) -> Self {
        let mut out = self.clone();
        out.env.b_gauss = b_gauss;
        out
    }

    fn schedule(&self) -> MeasurementSchedule {
        self.zeno.with_lossy_level(UP)
    }

    fn window_segments(&self) -> Result<Vec<EvolutionSegment>> {
        self.window
            .iter()
            .map(|w| {
                let h = atom::delay_hamiltonian(self.case, &w.drive, &self.env, self.nu_rf_mhz, self.epsilon_hz);
                EvolutionSegment::explicit(h, w.duration_s)
            })
            .collect()
    }

    fn evolve(&self, segments: &[EvolutionSegment], psi: &StateVector, measured: bool) -> Result<StateVector> {
        if segments.is_empty() {
            return Ok(psi.clone());
        }
        let run = if measured {
            zeno::zeno_freeze_run(segments, &self.schedule(), psi)?
        } else {
            zeno::free_run(segments, psi)?
        };
        Ok(run.final_state)
    }

    fn run_window(&self, psi: &StateVector) -> Result<StateVector> {
        self.evolve(&self.window_segments()?, psi, self.case.measured())
    }

    fn run_idle(&self, psi: &StateVector, duration: f64) -> Result<StateVector> {
        if duration <= 0.0 {
            return Ok(psi.clone());
        }
        let idle = atom::idle_hamiltonian(&self.env, self.nu_rf_mhz);
        let seg = EvolutionSegment::explicit(idle, duration)?;
        self.evolve(&[seg], psi, self.case.measured() && self.idle_pulses)
    }

    pub fn rf_pulse(&self) -> Result<UnitaryOperator> {
        atom::rf_pulse_unitary(&self.rf)
    }

    /// `|1,0⟩` after the first RF pulse.
    pub fn initial_state(&self) -> Result<StateVector> {
        quantum::apply(&self.rf_pulse()?, &atom::basis_state(DOWN)?)
    }

    /// States at the end of each delay, before the second RF pulse.
    pub fn delay_end_states(&self, t_grid: &[f64]) -> Result<Vec<StateVector>> {
        let tw = self.window_duration();
        if let Some(&t) = t_grid.iter().find(|&&t| t < tw * (1.0 - 1e-12)) {
            return Err(Error::domain(format!(
                "delay {t} s is shorter than the drive window {tw} s"
            )));
        }
        let start = self.initial_state()?;
        match self.placement {
            WindowPlacement::Start => {
                let after = self.run_window(&start)?;
                t_grid.iter().map(|&t| self.run_idle(&after, t - tw)).collect()
            }
            WindowPlacement::End => t_grid
                .iter()
                .map(|&t| self.run_window(&self.run_idle(&start, t - tw)?))
                .collect(),
        }
    }

    /// States at readout, after the second RF pulse.
    pub fn final_states(&self, t_grid: &[f64]) -> Result<Vec<StateVector>> {
        let r = self.rf_pulse()?;
        self.delay_end_states(t_grid)?
            .iter()
            .map(|psi| quantum::apply(&r, psi))
            .collect()
    }
}

/// Interference visibility between `|↓⟩` and the reference levels,
/// `2|a₀|‖a_r‖/(|a₀|² + ‖a_r‖²)`.
pub fn visibility(psi: &StateVector) -> Result<f64> {
    if psi.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: psi.dim(),
        });
    }
    let a0 = psi.population(DOWN);
    let ar = psi.population(M_MINUS) + psi.population(M_PLUS);
    if a0 + ar <= 0.0 {
        return Err(Error::domain("no F=1 population"));
    }
    Ok(2.0 * (a0 * ar).sqrt() / (a0 + ar))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FringeDataset {
    pub case: DelayCase,
    pub t_grid: Vec<f64>,
    pub repetitions: usize,
    /// `populations[t][rep] = (P₋₁, P₀, P₊₁)`.
    pub populations: Vec<Vec<[f64; 3]>>,
    pub noise: Option<NoiseModel>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FringeRow {
    case: u8,
    #[serde(rename = "T_s")]
    t_s: f64,
    rep: usize,
    p_m1: f64,
    p_0: f64,
    p_p1: f64,
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

impl FringeDataset {
    pub fn n_points(&self) -> usize {
        3 * self.t_grid.len() * self.repetitions
    }

    pub fn mean_populations(&self) -> Vec<[f64; 3]> {
        self.populations
            .iter()
            .map(|reps| {
                let mut m = [0.0; 3];
                for p in reps {
                    for k in 0..3 {
                        m[k] += p[k];
                    }
                }
                m.map(|v| v / reps.len() as f64)
            })
            .collect()
    }

    /// `(max − min)/(max + min)` of the repetition-averaged P₀.
    pub fn contrast(&self) -> f64 {
        let p0: Vec<f64> = self.mean_populations().iter().map(|p| p[1]).collect();
        let max = p0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = p0.iter().cloned().fold(f64::INFINITY, f64::min);
        if max + min > 0.0 {
            (max - min) / (max + min)
        } else {
            0.0
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (t, reps) in self.t_grid.iter().zip(&self.populations) {
            for (rep, p) in reps.iter().enumerate() {
                w.serialize(FringeRow {
                    case: self.case.number(),
                    t_s: *t,
                    rep,
                    p_m1: p[0],
                    p_0: p[1],
                    p_p1: p[2],
                })
                .map_err(csv_error)?;
            }
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let mut case = None;
        let mut t_grid: Vec<f64> = Vec::new();
        let mut populations: Vec<Vec<[f64; 3]>> = Vec::new();
        for row in reader.deserialize::<FringeRow>() {
            let row = row.map_err(csv_error)?;
            let c = DelayCase::from_number(row.case)?;
            if *case.get_or_insert(c) != c {
                return Err(Error::Parse("mixed cases in one fringe file".into()));
            }
            if t_grid.last() != Some(&row.t_s) {
                t_grid.push(row.t_s);
                populations.push(Vec::new());
            }
            let reps = populations.last_mut().expect("pushed above");
            if row.rep != reps.len() {
                return Err(Error::Parse(format!(
                    "repetition {} out of order at T = {}",
                    row.rep, row.t_s
                )));
            }
            reps.push([row.p_m1, row.p_0, row.p_p1]);
        }
        let case = case.ok_or_else(|| Error::Parse("empty fringe file".into()))?;
        let repetitions = populations[0].len();
        if populations.iter().any(|r| r.len() != repetitions) {
            return Err(Error::Parse("uneven repetition counts".into()));
        }
        Ok(Self {
            case,
            t_grid,
            repetitions,
            populations,
            noise: None,
        })
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.len() < MIN_GRID_POINTS {
        return Err(Error::domain(format!(
            "need at least {MIN_GRID_POINTS} delays, got {}",
            t_grid.len()
        )));
    }
    if t_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::domain("delay grid must be strictly ascending"));
    }
    Ok(())
}

/// Ramsey sequence for every delay, read out `repetitions` times each. The
/// noise draws for delay `i` come from the stream `(seed, stream·2²⁰ + i,
/// case)`, so results do not depend on evaluation order.
pub fn simulate_fringes(
    setup: &CaseSetup,
    t_grid: &[f64],
    noise: Option<&NoiseModel>,
    repetitions: usize,
    stream: u64,
) -> Result<FringeDataset> {
    check_grid(t_grid)?;
    if repetitions == 0 {
        return Err(Error::domain("need at least one repetition"));
    }
    let states = setup.final_states(t_grid)?;
    let case_id = setup.case.number() as u64;
    let populations = states
        .iter()
        .enumerate()
        .map(|(i, psi)| {
            let clean = atom::populations(psi)?;
            match noise {
                Some(n) if !n.is_silent() => {
                    let mut rng = atom::point_rng(n.seed, (stream << 20) | i as u64, case_id);
                    (0..repetitions)
                        .map(|_| atom::stern_gerlach_readout(psi, n, &mut rng).map(|r| r.f1()))
                        .collect()
                }
                _ => Ok(vec![clean.f1(); repetitions]),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FringeDataset {
        case: setup.case,
        t_grid: t_grid.to_vec(),
        repetitions,
        populations,
        noise: noise.copied(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitParameter {
    MagneticField,
    Phase,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameter: FitParameter,
    /// Gauss for the field, radians in `(−π, π]` for the phase.
    pub value: f64,
    pub std_error: f64,
    pub residual_rms: f64,
    pub n_points: usize,
}

/// Per-delay sums over repetitions, enough to evaluate the squared residual
/// of any model without revisiting individual shots.
struct DataSums {
    reps: f64,
    s1: Vec<[f64; 3]>,
    s2: Vec<[f64; 3]>,
}

impl DataSums {
    fn new(ds: &FringeDataset) -> Self {
        let mut s1 = Vec::with_capacity(ds.t_grid.len());
        let mut s2 = Vec::with_capacity(ds.t_grid.len());
        for reps in &ds.populations {
            let mut a = [0.0; 3];
            let mut b = [0.0; 3];
            for p in reps {
                for k in 0..3 {
                    a[k] += p[k];
                    b[k] += p[k] * p[k];
                }
            }
            s1.push(a);
            s2.push(b);
        }
        Self {
            reps: ds.repetitions as f64,
            s1,
            s2,
        }
    }

    fn ssr(&self, model: &[[f64; 3]]) -> f64 {
        let mut total = 0.0;
        for ((p, a), b) in model.iter().zip(&self.s1).zip(&self.s2) {
            for k in 0..3 {
                total += b[k] - 2.0 * p[k] * a[k] + self.reps * p[k] * p[k];
            }
        }
        total.max(0.0)
    }
}

/// Linearized error of a one-parameter fit:
/// `σ² = [SSR/(n−1)]·Δ²/Σ(P(x̂+Δ) − P(x̂))²`, with `n` the number of
/// independent population values.
fn propagated_error<F>(ds: &FringeDataset, predict: F, x_hat: f64, step: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<Vec<[f64; 3]>>,
{
    let sums = DataSums::new(ds);
    let at = predict(x_hat)?;
    let probe = predict(x_hat + step)?;
    let mut slope2 = 0.0;
    let mut biggest: f64 = 0.0;
    for (a, b) in at.iter().zip(&probe) {
        for k in 0..3 {
            let d = b[k] - a[k];
            biggest = biggest.max(d.abs());
            slope2 += ds.repetitions as f64 * d * d;
        }
    }
    if biggest < 1e-12 {
        return Err(Error::FlatModel { at: x_hat });
    }
    // Each readout triple is normalized, so it carries two degrees of freedom.
    let n = (2 * ds.t_grid.len() * ds.repetitions) as f64;
    let variance = sums.ssr(&at) / (n - 1.0);
    Ok((variance * step * step / slope2).sqrt())
}

/// Ramsey populations with a free `|↓⟩` phase: first RF pulse, `e^{iφ}` on
/// `|↓⟩`, the reference levels precessing at `η±` for the whole delay,
/// second RF pulse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseModel {
    rf: [[C64; 3]; 3],
    eta_plus_hz: f64,
    eta_minus_hz: f64,
}

impl PhaseModel {
    pub fn new(env: &MagneticEnvironment, nu_rf_mhz: f64, rf: &RfPulseSpec) -> Result<Self> {
        env.validate()?;
        let u = atom::rf_pulse_unitary(rf)?;
        let mut block = [[C64::new(0.0, 0.0); 3]; 3];
        for (i, row) in block.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = u.element(i, j);
            }
        }
        let (eta_plus, eta_minus) = atom::rotating_frame_detunings(env, nu_rf_mhz);
        Ok(Self {
            rf: block,
            eta_plus_hz: eta_plus * HZ_PER_MHZ,
            eta_minus_hz: eta_minus * HZ_PER_MHZ,
        })
    }

    pub fn from_setup(setup: &CaseSetup) -> Result<Self> {
        Self::new(&setup.env, setup.nu_rf_mhz, &setup.rf)
    }

    /// Split of each readout amplitude into the reference part `A(T)` and
    /// the `|↓⟩` part `B`, so that `P_k = |A_k + B_k e^{iφ}|²`.
    fn paths(&self, t: f64) -> ([C64; 3], [C64; 3]) {
        let a = [self.rf[0][1], self.rf[1][1], self.rf[2][1]];
        let ref_minus = a[0] * C64::from_polar(1.0, -2.0 * PI * self.eta_minus_hz * t);
        let ref_plus = a[2] * C64::from_polar(1.0, -2.0 * PI * self.eta_plus_hz * t);
        let mut refs = [C64::new(0.0, 0.0); 3];
        let mut down = [C64::new(0.0, 0.0); 3];
        for k in 0..3 {
            refs[k] = self.rf[k][0] * ref_minus + self.rf[k][2] * ref_plus;
            down[k] = self.rf[k][1] * a[1];
        }
        (refs, down)
    }

    pub fn populations(&self, t: f64, phi: f64) -> [f64; 3] {
        let (refs, down) = self.paths(t);
        let e = C64::from_polar(1.0, phi);
        [0, 1, 2].map(|k| (refs[k] + down[k] * e).norm_sqr())
    }

    pub fn predict(&self, t_grid: &[f64], phi: f64) -> Vec<[f64; 3]> {
        t_grid.iter().map(|&t| self.populations(t, phi)).collect()
    }
}

/// `e^{iφ}` rotates the `|↓⟩` path, so the residual is a trigonometric
/// polynomial in φ whose coefficients can be precomputed per delay.
struct PreparedPhase {
    paths: Vec<([C64; 3], [C64; 3])>,
}

impl PreparedPhase {
    fn new(model: &PhaseModel, t_grid: &[f64]) -> Self {
        Self {
            paths: t_grid.iter().map(|&t| model.paths(t)).collect(),
        }
    }

    fn predict(&self, phi: f64) -> Vec<[f64; 3]> {
        let e = C64::from_polar(1.0, phi);
        self.paths
            .iter()
            .map(|(r, d)| [0, 1, 2].map(|k| (r[k] + d[k] * e).norm_sqr()))
            .collect()
    }
}

pub fn fit_phase(ds: &FringeDataset, model: &PhaseModel) -> Result<FitResult> {
    let contrast = ds.contrast();
    if !(contrast >= MIN_CONTRAST) {
        return Err(Error::UnfittableContrast {
            contrast,
            threshold: MIN_CONTRAST,
        });
    }
    let sums = DataSums::new(ds);
    let prepared = PreparedPhase::new(model, &ds.t_grid);
    let objective = |phi: f64| sums.ssr(&prepared.predict(phi));
    let grid = optimize::grid_minimum(&objective, -PI, PI, PHASE_GRID_POINTS);
    let refined = optimize::brent(&objective, grid.x - grid.step, grid.x + grid.step, 1e-12, 200);
    let best = if refined.f <= grid.f { refined.x } else { grid.x };
    let value = wrap_phase(best);
    let std_error = fit_phase_error(ds, model, value)?;
    Ok(FitResult {
        parameter: FitParameter::Phase,
        value,
        std_error,
        residual_rms: (objective(value) / ds.n_points() as f64).sqrt(),
        n_points: ds.n_points(),
    })
}

pub fn fit_phase_error(ds: &FringeDataset, model: &PhaseModel, phi_hat: f64) -> Result<f64> {
    fit_phase_error_with_step(ds, model, phi_hat, DEFAULT_PHASE_PROBE)
}

pub fn fit_phase_error_with_step(ds: &FringeDataset, model: &PhaseModel, phi_hat: f64, step: f64) -> Result<f64> {
    let prepared = PreparedPhase::new(model, &ds.t_grid);
    propagated_error(ds, |phi| Ok(prepared.predict(phi)), phi_hat, step)
}

/// Reference-evolution populations at a trial field, from the full
/// undriven sequence.
pub struct FieldModel {
    setup: CaseSetup,
}

impl FieldModel {
    pub fn new(setup: &CaseSetup) -> Result<Self> {
        if setup.case.driven() {
            return Err(Error::domain("the field is fitted on undriven reference fringes"));
        }
        Ok(Self { setup: setup.clone() })
    }

    pub fn predict(&self, t_grid: &[f64], b_gauss: f64) -> Result<Vec<[f64; 3]>> {
        let setup = self.setup.with_field(b_gauss);
        setup.env.validate()?;
        let start = setup.initial_state()?;
        let after = setup.run_window(&start)?;
        // Undriven windows are diagonal, so the `|↓⟩` phase they imprint is
        // all that distinguishes them from idle evolution.
        let phi = (after.amplitude(DOWN) / start.amplitude(DOWN)).arg();
        let model = PhaseModel::from_setup(&setup)?;
        Ok(model.predict(t_grid, phi))
    }
}

pub fn fit_magnetic_field(ds: &FringeDataset, prior: &CaseSetup) -> Result<FitResult> {
    let model = FieldModel::new(prior)?;
    let sums = DataSums::new(ds);
    let objective = |b: f64| match model.predict(&ds.t_grid, b) {
        Ok(p) => sums.ssr(&p),
        Err(_) => f64::INFINITY,
    };
    let b0 = prior.env.b_gauss;
    let lo = (b0 - FIELD_WINDOW_GAUSS).max(0.0);
    let hi = b0 + FIELD_WINDOW_GAUSS;
    let grid = optimize::grid_minimum(&objective, lo, hi, FIELD_GRID_POINTS);
    if grid.on_edge() {
        return Err(Error::FitWindowExhausted { at: grid.x });
    }
    let refined = optimize::brent(&objective, grid.x - grid.step, grid.x + grid.step, 1e-13, 200);
    let value = if refined.f <= grid.f { refined.x } else { grid.x };
    let std_error = propagated_error(ds, |b| model.predict(&ds.t_grid, b), value, FIELD_PROBE_GAUSS)?;
    Ok(FitResult {
        parameter: FitParameter::MagneticField,
        value,
        std_error,
        residual_rms: (objective(value) / ds.n_points() as f64).sqrt(),
        n_points: ds.n_points(),
    })
}

/// `(a − b)` wrapped into `(−π, π]`, with errors added in quadrature.
pub fn phase_difference(a: &FitResult, b: &FitResult) -> (f64, f64) {
    (wrap_phase(a.value - b.value), a.std_error.hypot(b.std_error))
}
