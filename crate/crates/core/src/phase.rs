//! Closed-form phase bookkeeping for one circular precession of `|↓⟩` about
//! `n = (sinθ, 0, cosθ)` under `H = ω n·σ/2 + ε𝟙/2`: total, dynamical,
//! geometric (Aharonov–Anandan) and Zeno phases, and the mapping from the
//! experimental knobs (detuning, resonant Rabi frequency) to `(ω, θ)`.
//!
//! Frequencies in the public structs are in Hz; the `*_rad` accessors return
//! angular values in rad/s.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{self, HermitianOperator, StateVector, UnitaryOperator};

/// Wrap an angle into `(−π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Distance between two phases on the circle, in `[0, π]`.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}

/// Experimental drive knobs: microwave detuning `δ = ω₀ − ω_L` and resonant
/// Rabi frequency `Ω_R`, both in Hz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    pub delta_hz: f64,
    pub rabi_hz: f64,
}

impl DriveParams {
    pub fn new(delta_hz: f64, rabi_hz: f64) -> Result<Self> {
        let d = Self { delta_hz, rabi_hz };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta_hz.is_finite() || !self.rabi_hz.is_finite() {
            return Err(Error::domain("drive parameters must be finite"));
        }
        if self.rabi_hz < 0.0 {
            return Err(Error::domain(format!(
                "resonant Rabi frequency must be non-negative, got {}",
                self.rabi_hz
            )));
        }
        Ok(())
    }

    /// Generalized Rabi frequency `√(δ² + Ω_R²)` in Hz.
    pub fn generalized_rabi_hz(&self) -> f64 {
        self.delta_hz.hypot(self.rabi_hz)
    }
}

/// Hamiltonian parameters `(ω, θ, ε)`; `ω` and `ε` in Hz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarParams {
    pub omega_hz: f64,
    pub theta: f64,
    pub epsilon_hz: f64,
}

impl PolarParams {
    pub fn new(omega_hz: f64, theta: f64, epsilon_hz: f64) -> Result<Self> {
        if !(omega_hz > 0.0) || !omega_hz.is_finite() {
            return Err(Error::domain(format!("omega must be positive, got {omega_hz}")));
        }
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::domain(format!("theta must lie in [0, π], got {theta}")));
        }
        if !epsilon_hz.is_finite() {
            return Err(Error::domain("epsilon must be finite"));
        }
        Ok(Self {
            omega_hz,
            theta,
            epsilon_hz,
        })
    }

    pub fn omega_rad(&self) -> f64 {
        TAU * self.omega_hz
    }

    pub fn epsilon_rad(&self) -> f64 {
        TAU * self.epsilon_hz
    }

    /// `ε/ω`, dimensionless.
    pub fn offset_ratio(&self) -> f64 {
        self.epsilon_hz / self.omega_hz
    }

    pub fn axis(&self) -> [f64; 3] {
        [self.theta.sin(), 0.0, self.theta.cos()]
    }

    /// One precession period `T = 2π/ω` in seconds.
    pub fn period(&self) -> f64 {
        1.0 / self.omega_hz
    }

    pub fn hamiltonian(&self) -> HermitianOperator {
        HermitianOperator::two_level(self.axis(), self.omega_rad(), self.epsilon_rad())
            .expect("validated polar parameters")
    }

    pub fn propagator(&self, t: f64) -> UnitaryOperator {
        quantum::su2_propagator(self.axis(), self.omega_rad(), self.epsilon_rad(), t)
            .expect("validated polar parameters")
    }

    /// The resonant Rabi frequency and detuning this Hamiltonian corresponds to.
    pub fn drive(&self) -> DriveParams {
        DriveParams {
            delta_hz: self.omega_hz * self.theta.cos(),
            rabi_hz: self.omega_hz * self.theta.sin(),
        }
    }
}

/// `ω = √(δ² + Ω_R²)`, `θ = atan2(Ω_R, δ)`.
pub fn from_detuning(drive: DriveParams, epsilon_hz: f64) -> Result<PolarParams> {
    drive.validate()?;
    if drive.delta_hz == 0.0 && drive.rabi_hz == 0.0 {
        return Err(Error::domain(
            "detuning and Rabi frequency both vanish: drive axis undefined",
        ));
    }
    PolarParams::new(
        drive.generalized_rabi_hz(),
        drive.rabi_hz.atan2(drive.delta_hz),
        epsilon_hz,
    )
}

/// `φ₀ = −π(1 + ε/ω)`, unwrapped.
pub fn total_phase_unwrapped(p: &PolarParams) -> f64 {
    -PI * (1.0 + p.offset_ratio())
}

/// `φ₀` wrapped into `(−π, π]`.
pub fn total_phase(p: &PolarParams) -> f64 {
    wrap_phase(total_phase_unwrapped(p))
}

/// `φ_d = π(cosθ − ε/ω)` (unwrapped).
pub fn dynamical_phase(p: &PolarParams) -> f64 {
    PI * (p.theta.cos() - p.offset_ratio())
}

/// `φ_d = −∫₀ᵀ ⟨ψ(t)|H|ψ(t)⟩ dt` by composite Simpson quadrature, with
/// `ψ(t) = U(t)|↓⟩` from the closed-form propagator.
pub fn dynamical_phase_numeric(p: &PolarParams, steps: usize) -> Result<f64> {
    if steps < 100 {
        return Err(Error::domain(format!(
            "quadrature needs at least 100 steps, got {steps}"
        )));
    }
    let steps = steps + steps % 2;
    let h = p.hamiltonian();
    let down = StateVector::down();
    let period = p.period();
    let dt = period / steps as f64;
    let energy = |t: f64| -> Result<f64> {
        let psi = quantum::apply(&p.propagator(t), &down)?;
        h.expectation(&psi)
    };
    let mut acc = energy(0.0)? + energy(period)?;
    for k in 1..steps {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * energy(k as f64 * dt)?;
    }
    Ok(-acc * dt / 3.0)
}

/// A loop phase kept both unwrapped and wrapped into `(−π, π]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopPhase {
    pub unwrapped: f64,
    pub wrapped: f64,
}

impl LoopPhase {
    pub fn new(unwrapped: f64) -> Self {
        Self {
            unwrapped,
            wrapped: wrap_phase(unwrapped),
        }
    }
}

/// Aharonov–Anandan phase `β = loops · π(1 − cosθ)`, half the enclosed solid angle.
pub fn aa_phase(theta: f64, loops: u32) -> Result<LoopPhase> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::domain(format!("theta must lie in [0, π], got {theta}")));
    }
    if loops == 0 {
        return Err(Error::domain("at least one loop is required"));
    }
    Ok(LoopPhase::new(loops as f64 * PI * (1.0 - theta.cos())))
}

/// Per-projection overlap `⟨↓|U†(δt)|↓⟩` without the ε factor:
/// `cos(π/N) − i cosθ sin(π/N)`.
pub fn zeno_step_overlap(n: u32, theta: f64) -> C64 {
    let x = PI / n as f64;
    C64::new(x.cos(), -theta.cos() * x.sin())
}

/// Finite-N phase of the projection sequence,
/// `φ_p = N·arg(cos(π/N) − i cosθ sin(π/N)) + πε/ω`, wrapped.
pub fn zeno_phase_exact(n: u32, p: &PolarParams) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("at least one projection is required"));
    }
    let z = zeno_step_overlap(n, p.theta);
    if z.norm() <= 1e-12 {
        return Err(Error::ExtinguishedTrajectory { amplitude: z.norm() });
    }
    Ok(wrap_phase(n as f64 * z.arg() + PI * p.offset_ratio()))
}

/// `lim_{N→∞} φ_p = −φ_d`.
pub fn zeno_phase_limit(p: &PolarParams) -> f64 {
    -dynamical_phase(p)
}

/// Survival probability of `N` equally spaced projections over one loop,
/// `(1 − sin²θ sin²(π/N))^N`.
pub fn zeno_survival(n: u32, theta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("at least one projection is required"));
    }
    let s = theta.sin() * (PI / n as f64).sin();
    Ok((1.0 - s * s).powi(n as i32))
}

/// The four phases of one closed loop (unwrapped), plus the solid angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseBudget {
    pub phi_total: f64,
    pub phi_dyn: f64,
    pub phi_geom: f64,
    pub phi_zeno: f64,
    pub loop_count: u32,
    pub solid_angle: f64,
}

impl PhaseBudget {
    /// Budget for `loops` traversals of the circle. With `projections =
    /// Some(N)` the Zeno phase is the finite-N value for N projections per
    /// loop; otherwise the N→∞ limit.
    pub fn circular(p: &PolarParams, loops: u32, projections: Option<u32>) -> Result<Self> {
        let beta = aa_phase(p.theta, loops)?;
        let l = loops as f64;
        let phi_zeno = match projections {
            Some(n) => {
                let z = zeno_step_overlap(n, p.theta);
                if z.norm() <= 1e-12 {
                    return Err(Error::ExtinguishedTrajectory { amplitude: z.norm() });
                }
                l * (n as f64 * z.arg() + PI * p.offset_ratio())
            }
            None => l * zeno_phase_limit(p),
        };
        Ok(Self {
            phi_total: l * total_phase_unwrapped(p),
            phi_dyn: l * dynamical_phase(p),
            phi_geom: beta.unwrapped,
            phi_zeno,
            loop_count: loops,
            solid_angle: 2.0 * beta.unwrapped,
        })
    }

    /// Number of 2π wraps separating `φ_total` from `φ_d + β`.
    pub fn wrap_count(&self) -> i64 {
        ((self.phi_total - self.phi_dyn - self.phi_geom) / TAU).round() as i64
    }

    pub fn wrapped(&self) -> Self {
        Self {
            phi_total: wrap_phase(self.phi_total),
            phi_dyn: wrap_phase(self.phi_dyn),
            phi_geom: wrap_phase(self.phi_geom),
            phi_zeno: wrap_phase(self.phi_zeno),
            ..*self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polar(theta: f64, eps_ratio: f64) -> PolarParams {
        let omega = 43_453.0;
        PolarParams::new(omega, theta, eps_ratio * omega).unwrap()
    }

    #[test]
    fn wrap_convention() {
        assert_eq!(wrap_phase(-PI), PI);
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!(wrap_phase(TAU).abs() < 1e-15);
    }

    #[test]
    fn detuning_mapping_examples() {
        let p = from_detuning(DriveParams::new(16e3, 40.4e3).unwrap(), 0.0).unwrap();
        assert!((p.omega_hz - 43_453.0).abs() < 1.0);
        assert!((p.theta - 1.1937).abs() < 1e-4);

        let p = from_detuning(DriveParams::new(0.0, 10e3).unwrap(), 0.0).unwrap();
        assert!((p.theta - PI / 2.0).abs() < 1e-15);

        let p = from_detuning(DriveParams::new(24e3, 36.7e3).unwrap(), 0.0).unwrap();
        assert!((p.omega_hz - 43_851.0).abs() < 1.0);
        assert!((p.theta - 0.9916).abs() < 1e-4);

        let p = from_detuning(DriveParams::new(-16e3, 40.4e3).unwrap(), 0.0).unwrap();
        assert!(p.theta > PI / 2.0 && p.theta < PI);

        assert!(from_detuning(
            DriveParams {
                delta_hz: 0.0,
                rabi_hz: 0.0
            },
            0.0
        )
        .is_err());
        assert!(DriveParams::new(1.0, -1.0).is_err());
    }

    #[test]
    fn total_phase_examples() {
        assert!((total_phase(&polar(1.0, 0.0)) - PI).abs() < 1e-12);
        assert!(total_phase(&polar(1.0, 1.0)).abs() < 1e-12);
        let p = polar(1.0, -0.5);
        assert!((total_phase(&p) + PI / 2.0).abs() < 1e-12);
        // cross-check against the trace of the full-period propagator
        let u = p.propagator(p.period());
        let tr = u.element(0, 0) + u.element(1, 1);
        assert!(phase_distance(tr.arg(), total_phase(&p)) < 1e-12);
    }

    #[test]
    fn dynamical_phase_examples() {
        assert!(dynamical_phase(&polar(PI / 2.0, 0.0)).abs() < 1e-15);
        assert!((dynamical_phase(&polar(1.1937, 0.0)) - 1.1568).abs() < 1e-4);
        assert!((dynamical_phase(&polar(0.0, 0.0)) - PI).abs() < 1e-15);
    }

    #[test]
    fn dynamical_phase_quadrature() {
        let got = dynamical_phase_numeric(&polar(PI / 2.0, 0.0), 10_000).unwrap();
        assert!(got.abs() < 1e-10);
        let p = polar(1.1937, 0.0);
        let got = dynamical_phase_numeric(&p, 10_000).unwrap();
        assert!((got - dynamical_phase(&p)).abs() < 1e-8);
        assert!((got - 1.1568).abs() < 1e-4);
        let got = dynamical_phase_numeric(&polar(0.5, 0.3), 10_000).unwrap();
        assert!((got - PI * (0.5f64.cos() - 0.3)).abs() < 1e-8);
        assert!(dynamical_phase_numeric(&p, 50).is_err());
    }

    #[test]
    fn aa_phase_examples() {
        assert!((aa_phase(PI / 2.0, 1).unwrap().unwrapped - PI).abs() < 1e-15);
        assert!((aa_phase(1.1937, 1).unwrap().unwrapped - 1.9848).abs() < 1e-4);
        let two = aa_phase(1.1937, 2).unwrap();
        assert!((two.unwrapped - 3.9696).abs() < 2e-4);
        assert!((two.wrapped + 2.3136).abs() < 2e-4);
        assert!(aa_phase(1.0, 0).is_err());
    }

    #[test]
    fn zeno_phase_examples() {
        for theta in [0.0, 0.7, 2.9] {
            let got = zeno_phase_exact(1, &polar(theta, 0.0)).unwrap();
            assert!(phase_distance(got, PI) < 1e-12);
        }
        assert!(zeno_phase_exact(4, &polar(PI / 2.0, 0.0)).unwrap().abs() < 1e-15);
        for n in [3u32, 7, 50] {
            let p = polar(PI / 2.0, 0.21);
            let got = zeno_phase_exact(n, &p).unwrap();
            assert!(phase_distance(got, PI * 0.21) < 1e-12);
        }
        let got = zeno_phase_exact(10_000, &polar(1.1937, 0.0)).unwrap();
        assert!((got + 1.1568).abs() < 1e-3);
        assert!(matches!(
            zeno_phase_exact(2, &polar(PI / 2.0, 0.0)),
            Err(Error::ExtinguishedTrajectory { .. })
        ));
    }

    #[test]
    fn zeno_limit_examples() {
        assert!(zeno_phase_limit(&polar(PI / 2.0, 0.0)).abs() < 1e-15);
        assert!((zeno_phase_limit(&polar(1.1937, 0.0)) + 1.1568).abs() < 1e-4);
        // −π·cos(0.9916) = −1.71956
        assert!((zeno_phase_limit(&polar(0.9916, 0.0)) + 1.71956).abs() < 1e-4);
    }

    #[test]
    fn zeno_survival_examples() {
        assert_eq!(zeno_survival(17, 0.0).unwrap(), 1.0);
        let s10 = zeno_survival(10, PI / 2.0).unwrap();
        assert!((s10 - (PI / 10.0).cos().powi(20)).abs() < 1e-15);
        assert!((s10 - 0.3666).abs() < 1e-4);
        let s100 = zeno_survival(100, PI / 2.0).unwrap();
        assert!((s100 - 0.9060).abs() < 1e-4);
        assert!((1.0 - s100) <= PI * PI / 100.0);
    }

    #[test]
    fn survival_deficit_follows_inverse_n() {
        for theta in [0.4, 1.1937, PI / 2.0, 2.6] {
            for n in [1_000u32, 10_000] {
                let deficit = 1.0 - zeno_survival(n, theta).unwrap();
                let bound = PI * PI * theta.sin().powi(2) / n as f64;
                assert!(deficit <= bound * (1.0 + 1e-9));
                assert!(deficit >= bound * (1.0 - 1e-2));
            }
        }
    }

    #[test]
    fn budget_closes_on_grid() {
        for k in 0..=31 {
            let theta = (0.1 * k as f64).min(PI);
            for r in [-1.0, -0.5, 0.0, 0.5, 1.0] {
                let p = polar(theta, r);
                let b = PhaseBudget::circular(&p, 1, None).unwrap();
                let resid = total_phase(&p) - dynamical_phase(&p) - aa_phase(theta, 1).unwrap().wrapped;
                assert!(phase_distance(resid, 0.0) < 1e-9, "θ={theta} ε/ω={r}");
                assert!(phase_distance(b.phi_total - b.phi_dyn - b.phi_geom, 0.0) < 1e-9);
                assert!(phase_distance(b.phi_zeno + b.phi_dyn, 0.0) < 1e-12);
            }
        }
    }

    #[test]
    fn geometric_part_ignores_offset() {
        let base = total_phase_unwrapped(&polar(0.8, 0.0)) - dynamical_phase(&polar(0.8, 0.0));
        for r in [-1.0, -0.3, 0.4, 1.0] {
            let p = polar(0.8, r);
            let d = total_phase_unwrapped(&p) - dynamical_phase(&p);
            assert!((d - base).abs() < 1e-12);
        }
    }

    #[test]
    fn mapping_reproduces_detuning() {
        for (d, r) in [(16e3, 40.4e3), (-48e3, 40.4e3), (24e3, 0.0), (0.0, 1.0)] {
            let p = from_detuning(DriveParams::new(d, r).unwrap(), 0.0).unwrap();
            assert!((p.theta.cos() * p.omega_hz - d).abs() <= 1e-12 * p.omega_hz);
        }
    }

    #[test]
    fn double_loop_budget_tracks_wraps() {
        let b = PhaseBudget::circular(&polar(1.1937, 0.0), 2, None).unwrap();
        assert_eq!(b.loop_count, 2);
        assert_eq!(b.wrap_count(), -2);
        assert!((b.wrapped().phi_geom + 2.3136).abs() < 2e-4);
    }
}
