//! Measurement-interrupted evolutions.
//!
//! Three kinds of run are provided: the moving-frame projective product
//! (projections onto the successive states of a free precession), the
//! fixed-state freeze (free evolution over short gaps, each followed by a
//! pulse that removes a lossy level), and plain unitary evolution. The
//! closed-loop search for two-Hamiltonian schedules lives here as well.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize;
use crate::phase::{self, PolarParams};
use crate::quantum::{
    self, HermitianOperator, LinearOperator, Projector, Propagator, StateVector, UnitaryOperator, DOWN, UP,
};

/// Surviving amplitudes below this are treated as extinguished.
pub const EXTINCTION_AMPLITUDE: f64 = 1e-300;

/// Required closure of a two-Hamiltonian loop: `|⟨Ψ₀|ψ_final⟩| > 1 − CLOSURE_TOL`.
pub const CLOSURE_TOL: f64 = 1e-10;

/// Experimental measurement timing: a pulse every 2 μs lasting 1.5 μs.
pub const DEFAULT_PERIOD_S: f64 = 2e-6;
pub const DEFAULT_PULSE_S: f64 = 1.5e-6;

/// Natural-linewidth scale loss rate for the dissipative pulse model.
pub const DEFAULT_DECAY_RATE: f64 = 2.0 * PI * 6e6;

#[derive(Clone, Debug, PartialEq)]
pub enum Generator {
    /// Two-level `H_n` in closed form.
    Polar(PolarParams),
    /// Any Hermitian generator (e.g. the four-level atom model).
    Explicit(HermitianOperator),
}

impl Generator {
    pub fn hamiltonian(&self) -> HermitianOperator {
        match self {
            Generator::Polar(p) => p.hamiltonian(),
            Generator::Explicit(h) => h.clone(),
        }
    }

    pub fn propagator(&self, t: f64) -> UnitaryOperator {
        match self {
            Generator::Polar(p) => p.propagator(t),
            Generator::Explicit(h) => quantum::expm_hermitian(h, t),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Generator::Polar(_) => 2,
            Generator::Explicit(h) => h.dim(),
        }
    }
}

/// One piece of a piecewise-constant drive.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionSegment {
    pub generator: Generator,
    pub duration: f64,
}

impl EvolutionSegment {
    pub fn new(generator: Generator, duration: f64) -> Result<Self> {
        if !(duration >= 0.0) || !duration.is_finite() {
            return Err(Error::domain(format!("segment duration must be ≥ 0, got {duration}")));
        }
        Ok(Self { generator, duration })
    }

    pub fn polar(p: PolarParams, duration: f64) -> Result<Self> {
        Self::new(Generator::Polar(p), duration)
    }

    pub fn explicit(h: HermitianOperator, duration: f64) -> Result<Self> {
        Self::new(Generator::Explicit(h), duration)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PulseModel {
    /// Instantaneous removal of the lossy level; for the rest of the pulse
    /// window the state evolves under the projected generator `PHP`.
    Ideal,
    /// Non-Hermitian term `−iΓ/2` on the lossy level for the pulse window.
    Decay { rate: f64 },
}

/// Timing of one measurement pulse and how it acts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZenoPulseSpec {
    pub duration: f64,
    pub model: PulseModel,
    pub lossy_level: usize,
}

impl ZenoPulseSpec {
    /// Linear map of one pulse while the drive `h` stays on.
    pub fn channel(&self, h: &HermitianOperator) -> Result<Propagator> {
        let dim = h.dim();
        if self.lossy_level >= dim {
            return Err(Error::domain(format!(
                "lossy level {} out of range for dimension {dim}",
                self.lossy_level
            )));
        }
        match self.model {
            PulseModel::Ideal => {
                let p = Projector::removing_level(dim, self.lossy_level)?;
                let projected = p.matrix() * h.matrix() * p.matrix();
                let inner = quantum::expm_hermitian(&HermitianOperator::new(projected)?, self.duration);
                Ok(Propagator::from(inner).then_after(&p))
            }
            PulseModel::Decay { rate } => {
                if !(rate >= 0.0) {
                    return Err(Error::domain(format!("decay rate must be ≥ 0, got {rate}")));
                }
                let mut generator = h.matrix().clone();
                generator[(self.lossy_level, self.lossy_level)] -= C64::new(0.0, rate / 2.0);
                quantum::expm_generator(&generator, self.duration)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementSchedule {
    pub period: f64,
    pub pulse_duration: f64,
    pub model: PulseModel,
    pub lossy_level: usize,
}

impl MeasurementSchedule {
    /// Pulses every `period` seconds, each `pulse_duration` long, removing
    /// `|↑⟩` of the two-level system.
    pub fn new(period: f64, pulse_duration: f64, model: PulseModel) -> Result<Self> {
        if !(pulse_duration > 0.0) || !(pulse_duration <= period) || !period.is_finite() {
            return Err(Error::domain(format!(
                "need 0 < pulse_duration ≤ period, got pulse {pulse_duration} period {period}"
            )));
        }
        Ok(Self {
            period,
            pulse_duration,
            model,
            lossy_level: UP,
        })
    }

    /// `n` pulses spread over `total` seconds, keeping `pulse_fraction` of
    /// each period for the pulse.
    pub fn dense(total: f64, n: u32, pulse_fraction: f64, model: PulseModel) -> Result<Self> {
        if n == 0 || !(total > 0.0) {
            return Err(Error::domain("dense schedule needs n ≥ 1 and a positive duration"));
        }
        let period = total / n as f64;
        Self::new(period, pulse_fraction * period, model)
    }

    pub fn experimental_default() -> Self {
        Self::new(DEFAULT_PERIOD_S, DEFAULT_PULSE_S, PulseModel::Ideal).expect("static schedule")
    }

    pub fn with_lossy_level(mut self, level: usize) -> Self {
        self.lossy_level = level;
        self
    }

    /// Free-evolution gap preceding each pulse.
    pub fn gap(&self) -> f64 {
        self.period - self.pulse_duration
    }

    pub fn pulse(&self, duration: f64) -> ZenoPulseSpec {
        ZenoPulseSpec {
            duration,
            model: self.model,
            lossy_level: self.lossy_level,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZenoRunResult {
    pub final_state: StateVector,
    /// `arg⟨Ψ₀|Ψ_f⟩`, wrapped into `(−π, π]`.
    pub accumulated_phase: f64,
    /// `‖Ψ_f‖²`.
    pub survival: f64,
    pub n_projections: usize,
}

impl ZenoRunResult {
    fn from_states(initial: &StateVector, final_state: StateVector, n_projections: usize) -> Result<Self> {
        let amp = quantum::overlap(initial, &final_state)?;
        Ok(Self {
            accumulated_phase: phase::wrap_phase(amp.arg()),
            survival: final_state.norm_sqr(),
            final_state,
            n_projections,
        })
    }
}

/// Projections onto the successive states `|Ψ_k⟩ = U(δt)ᵏ|↓⟩` of one full
/// precession, `δt = 2π/(Nω)`, applied literally one after another.
pub fn projective_product(p: &PolarParams, n: u32) -> Result<ZenoRunResult> {
    if n == 0 {
        return Err(Error::domain("at least one projection is required"));
    }
    let step = p.propagator(p.period() / n as f64);
    let initial = StateVector::down();
    let mut frame = initial.clone();
    let mut current = initial.clone();
    for _ in 0..n {
        frame = quantum::apply(&step, &frame)?;
        current = quantum::apply(&Projector::onto(&frame)?, &current)?;
        let amplitude = current.norm_sqr().sqrt();
        if amplitude < EXTINCTION_AMPLITUDE {
            return Err(Error::ExtinguishedTrajectory { amplitude });
        }
    }
    ZenoRunResult::from_states(&initial, current, n as usize)
}

/// Pure unitary evolution through all segments.
pub fn free_run(segments: &[EvolutionSegment], initial: &StateVector) -> Result<ZenoRunResult> {
    let mut psi = initial.clone();
    for seg in segments {
        check_dim(seg, initial)?;
        psi = quantum::apply(&seg.generator.propagator(seg.duration), &psi)?;
    }
    ZenoRunResult::from_states(initial, psi, 0)
}

fn check_dim(seg: &EvolutionSegment, psi: &StateVector) -> Result<()> {
    if seg.generator.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: psi.dim(),
            found: seg.generator.dim(),
        });
    }
    Ok(())
}

/// Relative slack when deciding whether a segment is a whole number of periods.
const PERIOD_SLACK: f64 = 1e-9;

fn pulse_count(duration: f64, period: f64) -> (usize, f64) {
    let ratio = duration / period;
    let mut n = (ratio + PERIOD_SLACK).floor().max(0.0) as usize;
    let mut rest = duration - n as f64 * period;
    if rest < 0.0 {
        rest = 0.0;
    }
    if rest <= PERIOD_SLACK * period {
        rest = 0.0;
    }
    if n as f64 * period > duration + PERIOD_SLACK * period {
        n -= 1;
        rest = duration - n as f64 * period;
    }
    (n, rest)
}

/// Drive interrupted by measurement pulses: in each period the state first
/// evolves freely over the gap, then the pulse acts. A trailing partial
/// period evolves freely over what is left of its gap and ends with a
/// (possibly shortened) pulse.
///
/// When no segment couples the lossy level to the rest and the initial state
/// has no amplitude there, every pulse acts as the identity and the run is
/// the free evolution, bit for bit.
pub fn zeno_freeze_run(
    segments: &[EvolutionSegment],
    schedule: &MeasurementSchedule,
    initial: &StateVector,
) -> Result<ZenoRunResult> {
    if segments.is_empty() {
        return Err(Error::domain("zeno run needs at least one segment"));
    }
    let lossy = schedule.lossy_level;
    if lossy >= initial.dim() {
        return Err(Error::domain(format!(
            "lossy level {lossy} out of range for dimension {}",
            initial.dim()
        )));
    }
    for seg in segments {
        check_dim(seg, initial)?;
    }

    let total_pulses: usize = segments
        .iter()
        .map(|s| {
            let (n, rest) = pulse_count(s.duration, schedule.period);
            n + usize::from(rest > 0.0)
        })
        .sum();

    let decoupled = segments.iter().all(|s| {
        let h = s.generator.hamiltonian();
        (0..h.dim()).all(|k| k == lossy || (h.element(k, lossy) == C64::new(0.0, 0.0)))
    });
    if decoupled && initial.amplitude(lossy) == C64::new(0.0, 0.0) {
        let mut run = free_run(segments, initial)?;
        run.n_projections = total_pulses;
        return Ok(run);
    }

    let gap = schedule.gap();
    let mut psi = initial.clone();
    for seg in segments {
        let h = seg.generator.hamiltonian();
        let (n_full, rest) = pulse_count(seg.duration, schedule.period);
        let gap_step = seg.generator.propagator(gap);
        let pulse = schedule.pulse(schedule.pulse_duration).channel(&h)?;
        let period_map = pulse.then_after(&gap_step);
        for _ in 0..n_full {
            psi = quantum::apply(&period_map, &psi)?;
        }
        if rest > 0.0 {
            let free = rest.min(gap);
            psi = quantum::apply(&seg.generator.propagator(free), &psi)?;
            let tail = schedule.pulse(rest - free).channel(&h)?;
            psi = quantum::apply(&tail, &psi)?;
        }
    }
    ZenoRunResult::from_states(initial, psi, total_pulses)
}

/// Undriven two-level run under `H = ε𝟙/2` for `t` seconds; the phase is
/// `−εt/2`. Projections onto `|↓⟩` act trivially here, so both flag values
/// give bit-identical results.
pub fn reference_run(epsilon_hz: f64, t: f64, with_projections: bool) -> Result<ZenoRunResult> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("duration must be ≥ 0, got {t}")));
    }
    let h = HermitianOperator::new(quantum::identity(2) * C64::from(PI * epsilon_hz))?;
    let seg = EvolutionSegment::explicit(h, t)?;
    let initial = StateVector::down();
    if with_projections && t > 0.0 {
        zeno_freeze_run(&[seg], &MeasurementSchedule::experimental_default(), &initial)
    } else {
        free_run(&[seg], &initial)
    }
}

/// Durations of an `h1 → h2 → h1` schedule that returns `|↓⟩` to itself.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopSchedule {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    /// `1 − |⟨Ψ₀|ψ(t1+t2+t3)⟩|`.
    pub residual: f64,
}

impl ClosedLoopSchedule {
    pub fn total(&self) -> f64 {
        self.t1 + self.t2 + self.t3
    }

    pub fn segments(&self, h1: &PolarParams, h2: &PolarParams) -> Result<Vec<EvolutionSegment>> {
        Ok(vec![
            EvolutionSegment::polar(*h1, self.t1)?,
            EvolutionSegment::polar(*h2, self.t2)?,
            EvolutionSegment::polar(*h1, self.t3)?,
        ])
    }
}

fn loop_map(h1: &PolarParams, h2: &PolarParams, t1: f64, t2: f64, t3: f64) -> UnitaryOperator {
    h1.propagator(t3)
        .then_after(&h2.propagator(t2))
        .then_after(&h1.propagator(t1))
}

fn closure_residual(h1: &PolarParams, h2: &PolarParams, t1: f64, t2: f64, t3: f64) -> f64 {
    let u = loop_map(h1, h2, t1, t2, t3);
    1.0 - u.element(DOWN, DOWN).norm()
}

fn same_hamiltonian(a: &PolarParams, b: &PolarParams) -> bool {
    (a.omega_hz - b.omega_hz).abs() <= 1e-12 * a.omega_hz.max(b.omega_hz) && (a.theta - b.theta).abs() <= 1e-12
}

/// Default switch point: a quarter of the `h1` period.
pub const DEFAULT_SWITCH_FRACTION: f64 = 0.25;

/// Closed `h1 → h2 → h1` loop switching away from `h1` after a quarter of
/// its period (see [`find_closed_loop_schedule_with_switch`]).
pub fn find_closed_loop_schedule(h1: &PolarParams, h2: &PolarParams) -> Result<ClosedLoopSchedule> {
    if same_hamiltonian(h1, h2) {
        let half = h1.period() / 2.0;
        return Ok(ClosedLoopSchedule {
            t1: half,
            t2: 0.0,
            t3: half,
            residual: closure_residual(h1, h2, half, 0.0, half),
        });
    }
    find_closed_loop_schedule_with_switch(h1, h2, DEFAULT_SWITCH_FRACTION * h1.period())
}

/// Closed loop with `t3 = t1` fixed to the given switch time: a coarse scan
/// of `t2` over one `h2` period, golden-section refinement of the best
/// bracket, and a damped least-squares polish of `(t2, t3)` if the
/// symmetric ansatz leaves a residual above [`CLOSURE_TOL`].
pub fn find_closed_loop_schedule_with_switch(
    h1: &PolarParams,
    h2: &PolarParams,
    t1: f64,
) -> Result<ClosedLoopSchedule> {
    if !(t1 > 0.0) || !t1.is_finite() {
        return Err(Error::domain(format!("switch time must be positive, got {t1}")));
    }
    if same_hamiltonian(h1, h2) {
        let t3 = h1.period() - (2.0 * t1) % h1.period();
        let t3 = if t3 >= h1.period() { 0.0 } else { t3 };
        return Ok(ClosedLoopSchedule {
            t1,
            t2: 0.0,
            t3,
            residual: closure_residual(h1, h2, t1, 0.0, t3),
        });
    }
    let t2_period = h2.period();
    let f = |t2: f64| closure_residual(h1, h2, t1, t2, t1);
    let scan = optimize::grid_minimum(&f, 0.0, t2_period, 4001);
    let lo = (scan.x - scan.step).max(0.0);
    let hi = (scan.x + scan.step).min(t2_period);
    let t2 = optimize::golden_section(&f, lo, hi, 1e-15 * t2_period, 200).x;
    let mut best = ClosedLoopSchedule {
        t1,
        t2,
        t3: t1,
        residual: f(t2),
    };
    if best.residual > CLOSURE_TOL {
        if let Some(polished) = polish_closure(h1, h2, &best) {
            if polished.residual < best.residual {
                best = polished;
            }
        }
    }
    if best.residual > CLOSURE_TOL {
        return Err(Error::NoClosure {
            residual: best.residual,
        });
    }
    Ok(best)
}

/// Levenberg–Marquardt on `(t2, t3)` minimizing the Bloch-vector distance to
/// the south pole.
fn polish_closure(h1: &PolarParams, h2: &PolarParams, start: &ClosedLoopSchedule) -> Option<ClosedLoopSchedule> {
    let t1 = start.t1;
    let scale = h1.period().max(h2.period());
    let residual_vec = |x: &[f64; 2]| -> [f64; 3] {
        let u = loop_map(h1, h2, t1, x[0] * scale, x[1] * scale);
        let psi = StateVector::two_level(u.element(DOWN, DOWN), u.element(UP, DOWN)).ok();
        match psi.and_then(|s| crate::bloch::bloch_vector(&s).ok()) {
            Some(r) => [r[0], r[1], r[2] + 1.0],
            None => [f64::NAN; 3],
        }
    };
    let mut x = [start.t2 / scale, start.t3 / scale];
    let mut lambda = 1e-3;
    let norm2 = |r: &[f64; 3]| r.iter().map(|v| v * v).sum::<f64>();
    let mut r = residual_vec(&x);
    for _ in 0..200 {
        let h = 1e-7;
        let mut jac = DMatrix::<f64>::zeros(3, 2);
        for j in 0..2 {
            let mut xp = x;
            xp[j] += h;
            let rp = residual_vec(&xp);
            for i in 0..3 {
                jac[(i, j)] = (rp[i] - r[i]) / h;
            }
        }
        let rv = nalgebra::DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * rv;
        let mut improved = false;
        for _ in 0..20 {
            let mut a = jtj.clone();
            for d in 0..2 {
                a[(d, d)] *= 1.0 + lambda;
                a[(d, d)] += 1e-30;
            }
            let Some(step) = a.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [x[0] + step[0], x[1] + step[1]];
            let rt = residual_vec(&trial);
            if norm2(&rt) < norm2(&r) {
                x = trial;
                r = rt;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved || norm2(&r) < 1e-30 {
            break;
        }
    }
    let (t2, t3) = (x[0] * scale, x[1] * scale);
    if t2 < 0.0 || t3 < 0.0 {
        return None;
    }
    Some(ClosedLoopSchedule {
        t1,
        t2,
        t3,
        residual: closure_residual(h1, h2, t1, t2, t3),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: u32,
    /// Phase from the projections alone, `φ − φ₀`, wrapped.
    pub phi_zeno: f64,
    pub survival: f64,
}

/// Projective products for each `N`, rows in input order.
pub fn convergence_scan(p: &PolarParams, ns: &[u32]) -> Result<Vec<ConvergenceRow>> {
    if ns.is_empty() {
        return Err(Error::domain("convergence scan needs at least one N"));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("convergence scan N list must be strictly ascending"));
    }
    let phi0 = phase::total_phase(p);
    ns.par_iter()
        .map(|&n| {
            let run = projective_product(p, n)?;
            Ok(ConvergenceRow {
                n,
                phi_zeno: phase::wrap_phase(run.accumulated_phase - phi0),
                survival: run.survival,
            })
        })
        .collect()
}
