//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::atom::{MagneticEnvironment, NoiseModel, RfPulseKind, RfPulseSpec, DEFAULT_NU_RF_MHZ};
use crate::error::{Error, Result};
use crate::fringe::WindowPlacement;
use crate::zeno::{MeasurementSchedule, PulseModel, DEFAULT_DECAY_RATE, DEFAULT_PERIOD_S, DEFAULT_PULSE_S};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentConfig {
    pub b_gauss: f64,
    pub g_i: f64,
    pub g_j: f64,
    pub mu_b_mhz_per_gauss: f64,
    pub nu_hfs_mhz: f64,
    pub nu_rf_mhz: f64,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        let env = MagneticEnvironment::default();
        Self {
            b_gauss: env.b_gauss,
            g_i: env.g_i,
            g_j: env.g_j,
            mu_b_mhz_per_gauss: env.mu_b_mhz_per_gauss,
            nu_hfs_mhz: env.nu_hfs_mhz,
            nu_rf_mhz: DEFAULT_NU_RF_MHZ,
        }
    }
}

impl EnvironmentConfig {
    pub fn magnetic(&self) -> MagneticEnvironment {
        MagneticEnvironment {
            b_gauss: self.b_gauss,
            g_i: self.g_i,
            g_j: self.g_j,
            mu_b_mhz_per_gauss: self.mu_b_mhz_per_gauss,
            nu_hfs_mhz: self.nu_hfs_mhz,
        }
    }
}

/// A user-supplied constant-drive piece of the microwave window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub delta_hz: f64,
    pub rabi_hz: f64,
    pub duration_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveConfig {
    pub delta_hz: f64,
    pub rabi_hz: f64,
    pub epsilon_hz: f64,
    /// Full precession periods in the window.
    pub loops: u32,
    /// Rabi frequency after the switch in two-circle loops.
    pub second_rabi_hz: Option<f64>,
    /// Time on the first circle before switching (defaults to a quarter period).
    pub switch_time_s: Option<f64>,
    /// Explicit window, overriding `delta_hz`/`rabi_hz`/`loops` for single cases.
    pub segments: Vec<SegmentConfig>,
    pub placement: WindowPlacement,
    pub rf_pulse: RfPulseConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RfKind {
    Ideal,
    Finite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RfPulseConfig {
    pub kind: RfKind,
    /// Rotation axis azimuth in rad: 0 for x, π/2 for y.
    pub phase: f64,
    pub duration_s: Option<f64>,
    pub rabi_hz: Option<f64>,
}

impl Default for RfPulseConfig {
    fn default() -> Self {
        Self {
            kind: RfKind::Ideal,
            phase: 0.0,
            duration_s: None,
            rabi_hz: None,
        }
    }
}

impl RfPulseConfig {
    pub fn spec(&self) -> Result<RfPulseSpec> {
        let kind = match self.kind {
            RfKind::Ideal => RfPulseKind::Ideal,
            RfKind::Finite => {
                let duration_s = self
                    .duration_s
                    .ok_or_else(|| Error::config("drive.rf_pulse.duration_s", "required for finite pulses"))?;
                let rabi_hz = self
                    .rabi_hz
                    .ok_or_else(|| Error::config("drive.rf_pulse.rabi_hz", "required for finite pulses"))?;
                positive("drive.rf_pulse.duration_s", duration_s)?;
                positive("drive.rf_pulse.rabi_hz", rabi_hz)?;
                RfPulseKind::Finite { duration_s, rabi_hz }
            }
        };
        finite("drive.rf_pulse.phase", self.phase)?;
        Ok(RfPulseSpec {
            kind,
            phase: self.phase,
        })
    }
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            delta_hz: 16e3,
            rabi_hz: 40.4e3,
            epsilon_hz: 0.0,
            loops: 1,
            second_rabi_hz: None,
            switch_time_s: None,
            segments: Vec::new(),
            placement: WindowPlacement::Start,
            rf_pulse: RfPulseConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    Ideal,
    Decay,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZenoConfig {
    pub enabled: bool,
    pub period_s: f64,
    pub pulse_s: f64,
    pub model: PulseKind,
    pub decay_rate: f64,
    /// Spread this many pulses evenly over the drive window instead of
    /// using `period_s`.
    pub projections: Option<u32>,
    /// Share of each period taken by the pulse when `projections` is set.
    pub pulse_fraction: f64,
    pub idle_pulses: bool,
}

impl Default for ZenoConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            period_s: DEFAULT_PERIOD_S,
            pulse_s: DEFAULT_PULSE_S,
            model: PulseKind::Ideal,
            decay_rate: DEFAULT_DECAY_RATE,
            projections: None,
            pulse_fraction: 0.75,
            idle_pulses: false,
        }
    }
}

impl ZenoConfig {
    pub fn pulse_model(&self) -> PulseModel {
        match self.model {
            PulseKind::Ideal => PulseModel::Ideal,
            PulseKind::Decay => PulseModel::Decay { rate: self.decay_rate },
        }
    }

    pub fn schedule(&self, window_s: f64) -> Result<MeasurementSchedule> {
        match self.projections {
            Some(n) => MeasurementSchedule::dense(window_s, n, self.pulse_fraction, self.pulse_model()),
            None => MeasurementSchedule::new(self.period_s, self.pulse_s, self.pulse_model()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub t_start_s: f64,
    pub t_stop_s: f64,
    pub t_points: usize,
    pub delta_sweep_hz: Vec<f64>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            t_start_s: 50e-6,
            t_stop_s: 1.05e-3,
            t_points: 64,
            delta_sweep_hz: (-6..=6).map(|k| k as f64 * 8e3).collect(),
        }
    }
}

impl ScanConfig {
    pub fn t_grid(&self) -> Vec<f64> {
        let n = self.t_points;
        let step = (self.t_stop_s - self.t_start_s) / (n - 1) as f64;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.t_stop_s
                } else {
                    self.t_start_s + i as f64 * step
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub enabled: bool,
    pub sigma_p: f64,
    pub atom_number: u64,
    pub seed: Option<u64>,
    pub repetitions: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            sigma_p: 0.02,
            atom_number: 0,
            seed: Some(1),
            repetitions: 5,
        }
    }
}

impl NoiseConfig {
    /// The noise model in effect, if any.
    pub fn model(&self) -> Option<NoiseModel> {
        if !self.enabled {
            return None;
        }
        Some(NoiseModel {
            sigma_p: self.sigma_p,
            atom_number: self.atom_number,
            seed: self.seed.unwrap_or_default(),
        })
    }

    pub fn effective_repetitions(&self) -> usize {
        if self.enabled {
            self.repetitions
        } else {
            1
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Figure {
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "3")]
    Three,
    #[serde(rename = "4a")]
    FourA,
    #[serde(rename = "4b")]
    FourB,
    #[serde(rename = "4c")]
    FourC,
    #[serde(rename = "appendix")]
    Appendix,
}

impl Figure {
    pub fn label(self) -> &'static str {
        match self {
            Figure::Two => "2",
            Figure::Three => "3",
            Figure::FourA => "4a",
            Figure::FourB => "4b",
            Figure::FourC => "4c",
            Figure::Appendix => "appendix",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [
            Figure::Two,
            Figure::Three,
            Figure::FourA,
            Figure::FourB,
            Figure::FourC,
            Figure::Appendix,
        ]
        .into_iter()
        .find(|f| f.label() == s)
        .ok_or_else(|| Error::config("run.figure", format!("unknown figure `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub case: Option<u8>,
    pub figure: Option<Figure>,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case: None,
            figure: None,
            out_dir: PathBuf::from("out"),
            format: OutputFormat::Both,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub environment: EnvironmentConfig,
    pub drive: DriveConfig,
    pub zeno: ZenoConfig,
    pub scan: ScanConfig,
    pub noise: NoiseConfig,
    pub run: RunConfig,
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.environment;
        if !(e.b_gauss >= 0.0) || !e.b_gauss.is_finite() {
            return Err(Error::config(
                "environment.b_gauss",
                format!("must be ≥ 0, got {}", e.b_gauss),
            ));
        }
        positive("environment.nu_hfs_mhz", e.nu_hfs_mhz)?;
        positive("environment.mu_b_mhz_per_gauss", e.mu_b_mhz_per_gauss)?;
        positive("environment.nu_rf_mhz", e.nu_rf_mhz)?;
        finite("environment.g_i", e.g_i)?;
        finite("environment.g_j", e.g_j)?;

        let d = &self.drive;
        finite("drive.delta_hz", d.delta_hz)?;
        finite("drive.epsilon_hz", d.epsilon_hz)?;
        if !(d.rabi_hz >= 0.0) || !d.rabi_hz.is_finite() {
            return Err(Error::config(
                "drive.rabi_hz",
                format!("must be ≥ 0, got {}", d.rabi_hz),
            ));
        }
        if d.delta_hz == 0.0 && d.rabi_hz == 0.0 && d.segments.is_empty() {
            return Err(Error::config("drive", "δ and Ω_R cannot both vanish"));
        }
        if d.loops == 0 {
            return Err(Error::config("drive.loops", "must be at least 1"));
        }
        if let Some(r) = d.second_rabi_hz {
            positive("drive.second_rabi_hz", r)?;
        }
        if let Some(t) = d.switch_time_s {
            positive("drive.switch_time_s", t)?;
        }
        for (i, s) in d.segments.iter().enumerate() {
            finite(&format!("drive.segments[{i}].delta_hz"), s.delta_hz)?;
            if !(s.rabi_hz >= 0.0) {
                return Err(Error::config(format!("drive.segments[{i}].rabi_hz"), "must be ≥ 0"));
            }
            if !(s.duration_s >= 0.0) {
                return Err(Error::config(format!("drive.segments[{i}].duration_s"), "must be ≥ 0"));
            }
        }
        d.rf_pulse.spec()?;

        let z = &self.zeno;
        positive("zeno.period_s", z.period_s)?;
        positive("zeno.pulse_s", z.pulse_s)?;
        if z.pulse_s > z.period_s {
            return Err(Error::config("zeno.pulse_s", "must not exceed zeno.period_s"));
        }
        if z.model == PulseKind::Decay {
            positive("zeno.decay_rate", z.decay_rate)?;
        }
        if z.projections == Some(0) {
            return Err(Error::config("zeno.projections", "must be at least 1"));
        }
        if !(z.pulse_fraction > 0.0 && z.pulse_fraction <= 1.0) {
            return Err(Error::config("zeno.pulse_fraction", "must lie in (0, 1]"));
        }

        let s = &self.scan;
        positive("scan.t_start_s", s.t_start_s)?;
        if !(s.t_stop_s > s.t_start_s) {
            return Err(Error::config("scan.t_stop_s", "must exceed scan.t_start_s"));
        }
        if s.t_points < crate::fringe::MIN_GRID_POINTS {
            return Err(Error::config(
                "scan.t_points",
                format!("need at least {}", crate::fringe::MIN_GRID_POINTS),
            ));
        }
        for (i, v) in s.delta_sweep_hz.iter().enumerate() {
            finite(&format!("scan.delta_sweep_hz[{i}]"), *v)?;
        }

        let n = &self.noise;
        if !(n.sigma_p >= 0.0) || !n.sigma_p.is_finite() {
            return Err(Error::config("noise.sigma_p", "must be ≥ 0"));
        }
        if n.enabled && n.seed.is_none() {
            return Err(Error::config(
                "noise.seed",
                "a master seed is required when noise is enabled",
            ));
        }
        if n.repetitions == 0 {
            return Err(Error::config("noise.repetitions", "must be at least 1"));
        }

        if let Some(c) = self.run.case {
            if !(1..=4).contains(&c) {
                return Err(Error::config("run.case", format!("must be 1–4, got {c}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.scan.delta_sweep_hz.len(), 13);
        assert_eq!(cfg.scan.delta_sweep_hz[0], -48e3);
        let grid = cfg.scan.t_grid();
        assert_eq!(grid.len(), 64);
        assert_eq!(grid[63], 1.05e-3);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            "[drive]\ndelta_hz = 0.0\n[zeno]\nprojections = 10000\n[run]\nfigure = \"4b\"\n",
        )
        .unwrap();
        assert_eq!(cfg.drive.delta_hz, 0.0);
        assert_eq!(cfg.drive.rabi_hz, 40.4e3);
        assert_eq!(cfg.zeno.projections, Some(10_000));
        assert_eq!(cfg.run.figure, Some(Figure::FourB));
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(ExperimentConfig::from_toml_str("[drive]\ndelta = 1.0\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[lasers]\n").is_err());
    }

    #[test]
    fn field_level_messages() {
        let err = ExperimentConfig::from_toml_str("[zeno]\npulse_s = 3e-6\n").unwrap_err();
        assert!(err.to_string().contains("zeno.pulse_s"), "{err}");
        let err = ExperimentConfig::from_toml_str("[noise]\nseed = 1\n[run]\ncase = 7\n").unwrap_err();
        assert!(err.to_string().contains("run.case"));
        let mut cfg = ExperimentConfig::default();
        cfg.noise.seed = None;
        assert!(cfg.validate().unwrap_err().to_string().contains("noise.seed"));
        cfg.noise.enabled = false;
        cfg.validate().unwrap();
    }

    #[test]
    fn finite_rf_pulses_need_timing() {
        let cfg = ExperimentConfig::from_toml_str(
            "[drive.rf_pulse]\nkind = \"finite\"\nduration_s = 6.245e-6\nrabi_hz = 20000.0\n",
        )
        .unwrap();
        assert!(matches!(
            cfg.drive.rf_pulse.spec().unwrap().kind,
            RfPulseKind::Finite { .. }
        ));
        let err = ExperimentConfig::from_toml_str("[drive.rf_pulse]\nkind = \"finite\"\n").unwrap_err();
        assert!(err.to_string().contains("drive.rf_pulse.duration_s"));
    }

    #[test]
    fn schedules() {
        let z = ZenoConfig::default();
        let s = z.schedule(23e-6).unwrap();
        assert_eq!((s.period, s.pulse_duration), (2e-6, 1.5e-6));
        let dense = ZenoConfig {
            projections: Some(100),
            ..z
        };
        let s = dense.schedule(23e-6).unwrap();
        assert!((s.period - 0.23e-6).abs() < 1e-20);
    }
}
