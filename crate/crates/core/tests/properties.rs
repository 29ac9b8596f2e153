//! Property tests for the physics and I/O invariants.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use proptest::prelude::*;

use zeno_phase::atom::{self, DelayCase, NoiseModel};
use zeno_phase::bloch;
use zeno_phase::config::ExperimentConfig;
use zeno_phase::fringe::FringeDataset;
use zeno_phase::phase::{self, phase_distance, wrap_phase, PhaseBudget, PolarParams};
use zeno_phase::quantum::{self, HermitianOperator, LinearOperator, StateVector, DOWN};
use zeno_phase::zeno;

fn polar() -> impl Strategy<Value = PolarParams> {
    (1e3..1e5f64, 0.05..(PI - 0.05), -1.5..1.5f64).prop_map(|(w, theta, r)| PolarParams::new(w, theta, r * w).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wrapped_phases_stay_in_range(x in -1e4..1e4f64) {
        let w = wrap_phase(x);
        prop_assert!(w > -PI && w <= PI);
        let turns = (x - w) / TAU;
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn closed_form_propagator_is_unitary(p in polar(), t in 0.0..1e-3f64) {
        let u = p.propagator(t);
        prop_assert!(quantum::unitarity_defect(u.matrix()) < 1e-12);
        let numeric = quantum::expm_hermitian(&p.hamiltonian(), t);
        let gap = (u.matrix() - numeric.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(gap < 1e-9, "closed form vs eigendecomposition {}", gap);
    }

    #[test]
    fn projective_product_matches_closed_form(p in polar(), n in 1u32..300) {
        let run = zeno::projective_product(&p, n).unwrap();
        let z = phase::zeno_step_overlap(n, p.theta);
        let expected = C64::from_polar(1.0, phase::total_phase_unwrapped(&p) + PI * p.offset_ratio()) * z.powu(n);
        prop_assert!((run.final_state.amplitude(DOWN) - expected).norm() < 1e-10);
        prop_assert!((run.survival - phase::zeno_survival(n, p.theta).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn phase_budget_closes(p in polar(), loops in 1u32..5) {
        let b = PhaseBudget::circular(&p, loops, None).unwrap();
        let gap = b.phi_total - b.phi_dyn - b.phi_geom - TAU * b.wrap_count() as f64;
        prop_assert!(gap.abs() < 1e-9);
        prop_assert!((b.phi_zeno + b.phi_dyn).abs() < 1e-9);
        prop_assert!((b.solid_angle - 2.0 * b.phi_geom).abs() < 1e-12);
    }

    #[test]
    fn bargmann_phase_is_gauge_invariant(p in polar(), seeds in prop::collection::vec(0.0..TAU, 64)) {
        let states = bloch::circle_states(&p, 64).unwrap();
        let base = bloch::bargmann_geometric_phase(&states).unwrap();
        let last = states.len() - 1;
        let regauged: Vec<StateVector> = states
            .iter()
            .enumerate()
            .map(|(k, s)| if k == last { s.clone() } else { s.scaled(C64::from_polar(1.0, seeds[k])) })
            .collect();
        let again = bloch::bargmann_geometric_phase(&regauged).unwrap();
        prop_assert!(phase_distance(base, again) < 1e-9);
    }

    #[test]
    fn bargmann_circle_approaches_half_solid_angle(p in polar()) {
        let states = bloch::circle_states(&p, 4_000).unwrap();
        let beta = bloch::bargmann_geometric_phase(&states).unwrap();
        prop_assert!(phase_distance(beta, bloch::cone_solid_angle(p.theta) / 2.0) < 1e-5);
    }

    #[test]
    fn readout_is_normalized(
        re in prop::collection::vec(-1.0..1.0f64, 4),
        im in prop::collection::vec(-1.0..1.0f64, 4),
        sigma in 0.0..0.2f64,
        atoms in prop_oneof![Just(0u64), 1u64..10_000],
        seed in any::<u64>(),
        keep in 0.01..=1.0f64,
    ) {
        prop_assume!(re.iter().chain(&im).any(|x| x.abs() > 1e-3));
        // Sub-normalized after a random loss.
        let raw: Vec<C64> = re.iter().zip(&im).map(|(a, b)| C64::new(*a, *b)).collect();
        let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let amps = raw.iter().map(|z| z * (keep.sqrt() / norm)).collect();
        let labels = ["1,-1", "1,0", "1,+1", "2,0"].map(String::from).to_vec();
        let psi = StateVector::new(amps, labels).unwrap();
        let noise = NoiseModel { sigma_p: sigma, atom_number: atoms, seed };
        let r = atom::stern_gerlach_readout_seeded(&psi, &noise).unwrap();
        prop_assert!((r.total() - 1.0).abs() < 1e-12);
        for v in [r.p_m1, r.p_0, r.p_p1, r.p_f2] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let again = atom::stern_gerlach_readout_seeded(&psi, &noise).unwrap();
        prop_assert_eq!(r, again);
    }

    #[test]
    fn reference_run_ignores_projections(eps in -1e5..1e5f64, t in 0.0..1e-3f64) {
        let free = zeno::reference_run(eps, t, false).unwrap();
        let frozen = zeno::reference_run(eps, t, true).unwrap();
        prop_assert_eq!(free.final_state, frozen.final_state);
        prop_assert!(phase_distance(free.accumulated_phase, -PI * eps * t) < 1e-9);
    }

    #[test]
    fn hermitian_expectations_are_real(p in polar(), t in 0.0..1e-4f64) {
        let psi = quantum::apply(&p.propagator(t), &StateVector::down()).unwrap();
        let h: HermitianOperator = p.hamiltonian();
        let e = h.expectation(&psi).unwrap();
        let bound = PI * (p.omega_hz + p.epsilon_hz.abs()) + 1e-6;
        prop_assert!(e.abs() <= bound);
    }

    #[test]
    fn fringe_csv_round_trips(rows in prop::collection::vec(prop::array::uniform3(0.0..1.0f64), 8..20)) {
        let t_grid: Vec<f64> = (0..rows.len()).map(|i| 1e-5 * (i as f64 + 1.0) / 3.0).collect();
        let ds = FringeDataset {
            case: DelayCase::Driven,
            t_grid,
            repetitions: 1,
            populations: rows.iter().map(|r| vec![*r]).collect(),
            noise: None,
        };
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = FringeDataset::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.populations, ds.populations);
        prop_assert_eq!(back.t_grid, ds.t_grid);
    }

    #[test]
    fn config_round_trips_through_toml(seed in 0..=i64::MAX as u64, delta in -5e4..5e4f64, sigma in 0.0..0.1f64) {
        let mut cfg = ExperimentConfig::default();
        cfg.noise.seed = Some(seed);
        cfg.noise.sigma_p = sigma;
        cfg.drive.delta_hz = delta;
        let text = cfg.to_toml_string().unwrap();
        prop_assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
