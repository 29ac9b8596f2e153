//! ⁸⁷Rb level structure: Zeeman splittings, the four-level delay
//! Hamiltonians, RF spin-1 pulses, the Zeno light pulse and Stern–Gerlach
//! readout.
//!
//! Basis order is `[|1,−1⟩, |1,0⟩ = |↓⟩, |1,+1⟩, |2,0⟩ = |↑⟩]`. Energies are
//! in MHz at this layer and converted to rad/s when operators are built.

use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::DriveParams;
use crate::quantum::{self, HermitianOperator, LinearOperator, Propagator, StateVector, UnitaryOperator};
use crate::zeno::ZenoPulseSpec;

pub const M_MINUS: usize = 0;
pub const DOWN: usize = 1;
pub const M_PLUS: usize = 2;
pub const UP: usize = 3;
pub const LEVELS: [&str; 4] = ["1,-1", "1,0", "1,+1", "2,0"];
/// Levels never touched by the microwave or the light pulses.
pub const REFERENCE_LEVELS: [usize; 2] = [M_MINUS, M_PLUS];

pub const G_J: f64 = 2.002331;
pub const G_I: f64 = -0.0009951;
pub const MU_B_MHZ_PER_GAUSS: f64 = 1.3996245;
pub const NU_HFS_MHZ: f64 = 6834.682611;
pub const DEFAULT_B_GAUSS: f64 = 6.179;
pub const DEFAULT_NU_RF_MHZ: f64 = 4.323;

const MHZ_TO_RAD: f64 = 2.0 * PI * 1e6;

pub fn basis_state(index: usize) -> Result<StateVector> {
    StateVector::basis(&LEVELS, index)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MagneticEnvironment {
    pub b_gauss: f64,
    pub g_i: f64,
    pub g_j: f64,
    pub mu_b_mhz_per_gauss: f64,
    pub nu_hfs_mhz: f64,
}

impl Default for MagneticEnvironment {
    fn default() -> Self {
        Self {
            b_gauss: DEFAULT_B_GAUSS,
            g_i: G_I,
            g_j: G_J,
            mu_b_mhz_per_gauss: MU_B_MHZ_PER_GAUSS,
            nu_hfs_mhz: NU_HFS_MHZ,
        }
    }
}

impl MagneticEnvironment {
    pub fn with_field(b_gauss: f64) -> Result<Self> {
        let env = Self {
            b_gauss,
            ..Self::default()
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b_gauss >= 0.0) || !self.b_gauss.is_finite() {
            return Err(Error::domain(format!("field must be ≥ 0, got {}", self.b_gauss)));
        }
        if !(self.nu_hfs_mhz > 0.0) {
            return Err(Error::domain(format!(
                "hyperfine splitting must be positive, got {}",
                self.nu_hfs_mhz
            )));
        }
        Ok(())
    }

    /// Breit–Rabi field parameter `x = (g_J − g_I)μ_B B / ν`.
    pub fn x(&self) -> f64 {
        (self.g_j - self.g_i) * self.mu_b_mhz_per_gauss * self.b_gauss / self.nu_hfs_mhz
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplittingMode {
    /// `ν(m=±1) − ν(m=0)` from the full Breit–Rabi formula.
    #[default]
    Corrected,
    /// The square-root term alone, without subtracting the `m=0` level.
    Literal,
}

/// `(Δ₊, Δ₋)` in MHz.
pub fn zeeman_splittings(env: &MagneticEnvironment) -> (f64, f64) {
    zeeman_splittings_with(env, SplittingMode::Corrected)
}

pub fn zeeman_splittings_with(env: &MagneticEnvironment, mode: SplittingMode) -> (f64, f64) {
    let x = env.x();
    let linear = env.g_i * env.mu_b_mhz_per_gauss * env.b_gauss;
    let half = env.nu_hfs_mhz / 2.0;
    let offset = match mode {
        SplittingMode::Corrected => (1.0 + x * x).sqrt(),
        SplittingMode::Literal => 0.0,
    };
    let plus = -linear - half * ((1.0 + x + x * x).sqrt() - offset);
    let minus = linear - half * ((1.0 - x + x * x).sqrt() - offset);
    (plus, minus)
}

/// `|1,0⟩ → |2,0⟩` frequency in MHz.
pub fn clock_frequency(env: &MagneticEnvironment) -> f64 {
    let x = env.x();
    env.nu_hfs_mhz * (1.0 + x * x).sqrt()
}

/// Residual rotating-frame detunings `(η₊, η₋)` in MHz of `|1,±1⟩` relative
/// to `|↓⟩`, for an RF drive at `nu_rf` MHz. Fringes beat at `|η±|`.
pub fn rotating_frame_detunings(env: &MagneticEnvironment, nu_rf_mhz: f64) -> (f64, f64) {
    let (plus, minus) = zeeman_splittings(env);
    (plus + nu_rf_mhz, minus - nu_rf_mhz)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RfPulseKind {
    /// Instantaneous spin-1 rotation by π/4.
    Ideal,
    /// Resonant coupling at Rabi frequency `rabi_hz` for `duration_s`.
    Finite { duration_s: f64, rabi_hz: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfPulseSpec {
    pub kind: RfPulseKind,
    /// Rotation axis azimuth: 0 for x, π/2 for y.
    pub phase: f64,
}

impl Default for RfPulseSpec {
    fn default() -> Self {
        Self {
            kind: RfPulseKind::Ideal,
            phase: 0.0,
        }
    }
}

/// Spin-1 generator `cos φ J_x + sin φ J_y` on the F=1 block, zero on `|↑⟩`.
fn rf_generator(phase: f64) -> DMatrix<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let raise = C64::from_polar(s, phase);
    let mut k = DMatrix::zeros(4, 4);
    // ⟨m+1|K|m⟩ = e^{iφ}/√2 in the (−1, 0, +1) ordering.
    k[(DOWN, M_MINUS)] = raise;
    k[(M_PLUS, DOWN)] = raise;
    k[(M_MINUS, DOWN)] = raise.conj();
    k[(DOWN, M_PLUS)] = raise.conj();
    k
}

pub fn rf_pulse_unitary(spec: &RfPulseSpec) -> Result<UnitaryOperator> {
    let k = rf_generator(spec.phase);
    match spec.kind {
        RfPulseKind::Ideal => {
            // Spin-1 generators obey K³ = K, so the exponential truncates.
            let beta = FRAC_PI_4;
            let mut r = quantum::identity(4) - &k * C64::new(0.0, beta.sin()) - &k * &k * C64::from(1.0 - beta.cos());
            r[(UP, UP)] = C64::new(1.0, 0.0);
            UnitaryOperator::new(r)
        }
        RfPulseKind::Finite { duration_s, rabi_hz } => {
            if !(duration_s > 0.0) || !rabi_hz.is_finite() {
                return Err(Error::domain(format!(
                    "finite RF pulse needs a positive duration, got {duration_s}"
                )));
            }
            let h = HermitianOperator::new(k * C64::from(2.0 * PI * rabi_hz))?;
            Ok(quantum::expm_hermitian(&h, duration_s))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DelayCase {
    /// Undriven reference evolution.
    Reference = 1,
    /// Undriven, with measurement pulses.
    ReferenceZeno = 2,
    /// Driven, measurement free.
    Driven = 3,
    /// Driven under frequent measurement.
    DrivenZeno = 4,
}

impl DelayCase {
    pub const ALL: [DelayCase; 4] = [
        DelayCase::Reference,
        DelayCase::ReferenceZeno,
        DelayCase::Driven,
        DelayCase::DrivenZeno,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_number(n: u8) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.number() == n)
            .ok_or_else(|| Error::domain(format!("case must be 1–4, got {n}")))
    }

    pub fn driven(self) -> bool {
        matches!(self, DelayCase::Driven | DelayCase::DrivenZeno)
    }

    pub fn measured(self) -> bool {
        matches!(self, DelayCase::ReferenceZeno | DelayCase::DrivenZeno)
    }
}

/// Diagonal reference-level energies (rad/s) with nothing on `|↓⟩, |↑⟩`.
pub fn idle_hamiltonian(env: &MagneticEnvironment, nu_rf_mhz: f64) -> HermitianOperator {
    let (eta_plus, eta_minus) = rotating_frame_detunings(env, nu_rf_mhz);
    let mut h = DMatrix::zeros(4, 4);
    h[(M_MINUS, M_MINUS)] = C64::from(MHZ_TO_RAD * eta_minus);
    h[(M_PLUS, M_PLUS)] = C64::from(MHZ_TO_RAD * eta_plus);
    HermitianOperator::new(h).expect("diagonal real matrix")
}

/// Four-level Hamiltonian (rad/s) while the microwave window is open. The
/// `{|↓⟩, |↑⟩}` block is `π(Ω_R σ_x + δ σ_z + ε𝟙)`, with `Ω_R` forced to
/// zero in the undriven cases.
pub fn delay_hamiltonian(
    case: DelayCase,
    drive: &DriveParams,
    env: &MagneticEnvironment,
    nu_rf_mhz: f64,
    epsilon_hz: f64,
) -> HermitianOperator {
    let mut h = idle_hamiltonian(env, nu_rf_mhz).matrix().clone();
    let rabi = if case.driven() { drive.rabi_hz } else { 0.0 };
    h[(DOWN, DOWN)] = C64::from(PI * (epsilon_hz - drive.delta_hz));
    h[(UP, UP)] = C64::from(PI * (epsilon_hz + drive.delta_hz));
    h[(DOWN, UP)] = C64::from(PI * rabi);
    h[(UP, DOWN)] = C64::from(PI * rabi);
    HermitianOperator::new(h).expect("real symmetric matrix")
}

/// One Zeno light pulse acting while `h` is on.
pub fn zeno_pulse_channel(spec: &ZenoPulseSpec, h: &HermitianOperator) -> Result<Propagator> {
    if h.dim() == 4 && spec.lossy_level != UP {
        return Err(Error::domain("the light pulse removes |2,0⟩ only"));
    }
    spec.channel(h)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    pub sigma_p: f64,
    /// Atoms per shot for multinomial shot noise; 0 disables it.
    pub atom_number: u64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_p: 0.02,
            atom_number: 0,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_p >= 0.0) || !self.sigma_p.is_finite() {
            return Err(Error::domain(format!("sigma_p must be ≥ 0, got {}", self.sigma_p)));
        }
        Ok(())
    }

    pub fn is_silent(&self) -> bool {
        self.sigma_p == 0.0 && self.atom_number == 0
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent RNG stream for one data point of one run.
pub fn point_rng(master: u64, point: u64, stream: u64) -> ChaCha8Rng {
    let s = splitmix64(splitmix64(splitmix64(master) ^ point) ^ stream.rotate_left(32));
    ChaCha8Rng::seed_from_u64(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    pub p_m1: f64,
    pub p_0: f64,
    pub p_p1: f64,
    pub p_f2: f64,
}

impl Readout {
    pub fn f1(&self) -> [f64; 3] {
        [self.p_m1, self.p_0, self.p_p1]
    }

    pub fn total(&self) -> f64 {
        self.p_m1 + self.p_0 + self.p_p1 + self.p_f2
    }
}

/// Normalized populations of a four-level state.
pub fn populations(psi: &StateVector) -> Result<Readout> {
    if psi.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: psi.dim(),
        });
    }
    let n = psi.norm_sqr();
    if !(n > 0.0) {
        return Err(Error::domain("no atoms left to read out"));
    }
    Ok(Readout {
        p_m1: psi.population(M_MINUS) / n,
        p_0: psi.population(DOWN) / n,
        p_p1: psi.population(M_PLUS) / n,
        p_f2: psi.population(UP) / n,
    })
}

/// Populations with shot noise (multinomial over `atom_number`) and then
/// Gaussian noise of width `sigma_p` on the three F=1 sublevels, clipped to
/// `[0, 1]` and renormalized.
pub fn stern_gerlach_readout<R: Rng + ?Sized>(psi: &StateVector, noise: &NoiseModel, rng: &mut R) -> Result<Readout> {
    noise.validate()?;
    let clean = populations(psi)?;
    if noise.is_silent() {
        return Ok(clean);
    }
    let mut p = [clean.p_m1, clean.p_0, clean.p_p1, clean.p_f2];
    if noise.atom_number > 0 {
        let mut left = noise.atom_number;
        let mut mass = 1.0;
        let mut counts = [0u64; 4];
        for k in 0..4 {
            let draw = if k == 3 || mass <= 0.0 {
                left
            } else {
                let q = (p[k] / mass).clamp(0.0, 1.0);
                Binomial::new(left, q)
                    .map_err(|e| Error::domain(e.to_string()))?
                    .sample(rng)
            };
            counts[k] = draw;
            left -= draw;
            mass -= p[k];
        }
        for k in 0..4 {
            p[k] = counts[k] as f64 / noise.atom_number as f64;
        }
    }
    if noise.sigma_p > 0.0 {
        let normal = Normal::new(0.0, noise.sigma_p).map_err(|e| Error::domain(e.to_string()))?;
        for v in p.iter_mut().take(3) {
            *v = (*v + normal.sample(rng)).clamp(0.0, 1.0);
        }
    }
    let sum: f64 = p.iter().sum();
    if !(sum > 0.0) {
        return Ok(clean);
    }
    Ok(Readout {
        p_m1: p[0] / sum,
        p_0: p[1] / sum,
        p_p1: p[2] / sum,
        p_f2: p[3] / sum,
    })
}

/// Convenience form drawing from a stream seeded by `noise.seed`.
pub fn stern_gerlach_readout_seeded(psi: &StateVector, noise: &NoiseModel) -> Result<Readout> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    stern_gerlach_readout(psi, noise, &mut rng)
}

/// Largest matrix element linking the reference levels to `{|↓⟩, |↑⟩}`.
pub fn reference_leakage(m: &DMatrix<C64>) -> f64 {
    let mut worst: f64 = 0.0;
    for &r in &REFERENCE_LEVELS {
        for c in [DOWN, UP] {
            worst = worst.max(m[(r, c)].norm()).max(m[(c, r)].norm());
        }
    }
    worst
}
