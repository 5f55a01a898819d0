//! Property tests for model, generator and semigroup invariants.

use proptest::prelude::*;

use stochlab::doi::{
    basis_state, build_generator_direct, build_liouvillian_doi, doi_shift, evolve_state, green_function_operator,
    projection_expectation, shift_state,
};
use stochlab::fpe::{build_fpe_generator, evolve_pdf, green_function_chain, CellGrid, PdfGrid};
use stochlab::perturbation::{propagator_eval, split_liouvillian, Propagator};
use stochlab::{Interpretation, LangevinSpec, MasterSpec, Polynomial, ReactionChannel};

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 32,
        ..ProptestConfig::default()
    }
}

fn langevin(k: f64, u3: f64, b0: f64, b1: f64, d: f64, interp: Interpretation) -> LangevinSpec {
    LangevinSpec {
        k_relax: k,
        drift_poly: Polynomial::monomial(-u3, 3),
        noise_poly: Polynomial::new(vec![b0, b1]),
        noise_strength: d,
        interpretation: interp,
    }
}

fn interp_strategy() -> impl Strategy<Value = Interpretation> {
    prop_oneof![Just(Interpretation::Ito), Just(Interpretation::Stratonovich)]
}

/// Random one-step channels that never leave `n >= 0`: death rates carry a
/// factor `n`, pair losses a factor `n (n - 1)`.
fn channel_spec() -> impl Strategy<Value = MasterSpec> {
    (0.0..2.0_f64, 0.0..2.0_f64, 0.0..0.5_f64, 0.0..0.5_f64, 0.0..1.0_f64).prop_map(|(b, l, g, k, c)| {
        MasterSpec::from_channels(vec![
            ReactionChannel::new(-1, Polynomial::new(vec![0.0, b, g])),
            ReactionChannel::new(1, Polynomial::new(vec![c, l])),
            ReactionChannel::new(-2, Polynomial::new(vec![0.0, -k, k])),
        ])
    })
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn verhulst_rates_reproduce_gain_loss_terms(
        beta in 0.0..5.0_f64, lambda in 0.0..5.0_f64, gamma in 0.0..1.0_f64, n in 0u64..500,
    ) {
        let spec = MasterSpec::verhulst(beta, lambda, gamma);
        let nf = n as f64;
        let tol = 1e-12 * (1.0 + nf * nf);
        prop_assert!((spec.total_rate(n) - (beta * nf + lambda * nf + gamma * nf * nf)).abs() <= tol);
        let from_above: f64 = spec.channels.iter().filter(|c| c.delta == -1).map(|c| c.rate(n + 1)).sum();
        let m = nf + 1.0;
        prop_assert!((from_above - (beta * m + gamma * m * m)).abs() <= tol * 4.0);
        if n > 0 {
            let from_below: f64 = spec.channels.iter().filter(|c| c.delta == 1).map(|c| c.rate(n - 1)).sum();
            prop_assert!((from_below - lambda * (nf - 1.0)).abs() <= tol);
        }
    }

    #[test]
    fn master_validation_is_idempotent(spec in channel_spec()) {
        let once = spec.validate();
        prop_assert!(once.is_ok());
        let once = once.unwrap();
        prop_assert_eq!(once.clone().validate(), Ok(once));
    }

    #[test]
    fn langevin_validation_is_idempotent(
        k in -1.0..3.0_f64, u3 in 0.0..1.0_f64, b0 in -1.0..1.0_f64, d in -0.5..2.0_f64, interp in interp_strategy(),
    ) {
        let spec = langevin(k, u3, b0, 0.3, d, interp);
        match spec.clone().validate() {
            Ok(v) => prop_assert_eq!(v.clone().validate(), Ok(v)),
            Err(e) => prop_assert_eq!(spec.validate(), Err(e)),
        }
    }

    #[test]
    fn fpe_columns_conserve_and_evolution_stays_positive(
        k in 0.2..3.0_f64, u3 in 0.0..0.5_f64, b0 in 0.5..1.5_f64, b1 in -0.2..0.2_f64,
        d in 0.05..1.0_f64, interp in interp_strategy(), phi0 in -1.0..1.0_f64, t in 0.01..2.0_f64,
    ) {
        let spec = langevin(k, u3, b0, b1, d, interp);
        let grid = CellGrid::new(-4.0, 4.0, 160).unwrap();
        let gen = build_fpe_generator(&spec, grid, interp).unwrap();
        let dx = grid.width();
        for s in gen.column_sums() {
            prop_assert!((s * dx).abs() <= 1e-12, "column sum {s}");
        }
        let p = evolve_pdf(&gen, &PdfGrid::delta(grid, phi0).unwrap(), t).unwrap();
        prop_assert!((p.mass() - 1.0).abs() < 1e-9);
        prop_assert!(p.min_value() >= -1e-12);
    }

    #[test]
    fn stratonovich_generator_is_ito_with_induced_drift(
        k in 0.2..3.0_f64, b0 in 0.5..1.5_f64, b1 in -0.3..0.3_f64, d in 0.05..1.0_f64,
    ) {
        let strat = langevin(k, 0.0, b0, b1, d, Interpretation::Stratonovich);
        // ½ D b b' with b = b0 + b1 φ, absorbed into U (drift is -K φ + U)
        let shifted = LangevinSpec {
            drift_poly: Polynomial::new(vec![0.5 * d * b0 * b1, 0.5 * d * b1 * b1]),
            interpretation: Interpretation::Ito,
            ..strat.clone()
        };
        let grid = CellGrid::new(-5.0, 5.0, 120).unwrap();
        let a = build_fpe_generator(&strat, grid, Interpretation::Stratonovich).unwrap();
        let b = build_fpe_generator(&shifted, grid, Interpretation::Ito).unwrap();
        for ((x, y), (z, w)) in a.lower().iter().zip(b.lower()).zip(a.upper().iter().zip(b.upper())) {
            prop_assert!((x - y).abs() <= 1e-12 && (z - w).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_power_chain_is_normalization(
        k in 0.2..2.0_f64, d in 0.1..1.0_f64, t1 in 0.6..2.0_f64, t2 in 0.0..0.5_f64,
    ) {
        let grid = CellGrid::new(-5.0, 5.0, 128).unwrap();
        let gen = build_fpe_generator(&LangevinSpec::ornstein_uhlenbeck(k, d), grid, Interpretation::Ito).unwrap();
        let g = green_function_chain(&gen, &PdfGrid::delta(grid, 0.3).unwrap(), &[t1, t2], &[0, 0]).unwrap();
        prop_assert!((g - 1.0).abs() < 1e-9);
    }

    #[test]
    fn doi_matches_direct_and_conserves_on_safe_columns(spec in channel_spec(), n in 8usize..40) {
        let doi = build_liouvillian_doi(&spec, n).unwrap();
        let direct = build_generator_direct(&spec, n);
        for m in doi.safe_columns() {
            let mut col = 0.0;
            for r in 0..=n {
                let (x, y) = (*doi.matrix.get(r, m), *direct.matrix.get(r, m));
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()), "({r},{m}): {x} vs {y}");
                col += x;
            }
            prop_assert!(col.abs() <= 1e-9 * (1.0 + (m * m) as f64));
        }
    }

    #[test]
    fn projection_of_basis_states_is_one(n in 0usize..60) {
        prop_assert_eq!(projection_expectation(&basis_state(60, n), 0), 1.0);
    }

    #[test]
    fn single_time_green_function_is_projected_mean(
        beta in 0.2..2.0_f64, lambda in 0.0..2.0_f64, gamma in 0.05..0.3_f64, n0 in 1usize..10, t in 0.0..2.0_f64,
    ) {
        let spec = MasterSpec::verhulst(beta, lambda, gamma);
        let l = build_liouvillian_doi(&spec, 50).unwrap();
        let p0 = basis_state(50, n0);
        let g1 = green_function_operator(&l, &p0, &[t]).unwrap();
        let mean = projection_expectation(&evolve_state(&l, &p0, t).unwrap(), 1);
        prop_assert!((g1 - mean).abs() <= 1e-12 * (1.0 + mean));
    }

    #[test]
    fn shifted_moments_of_basis_states_are_powers(n0 in 0usize..25, k in 0u32..4) {
        let s = doi_shift(&MasterSpec::pure_death(1.0), 30).unwrap();
        let m = s.moment(&shift_state(&basis_state(30, n0)), k);
        let expected = (n0 as f64).powi(k as i32);
        prop_assert!((m - expected).abs() <= 1e-9 * (1.0 + expected));
    }

    #[test]
    fn propagator_is_causal(rate in 0.0..5.0_f64, t in -3.0..3.0_f64, tp in -3.0..3.0_f64) {
        let p = Propagator { rate };
        let v = propagator_eval(&p, t, tp);
        if t <= tp {
            prop_assert_eq!(v, 0.0);
        } else {
            prop_assert!((v - (-rate * (t - tp)).exp()).abs() <= 1e-15);
        }
        prop_assert_eq!(propagator_eval(&p, t, t), 0.0);
    }

    #[test]
    fn split_reassembles_liouvillian(beta in 0.1..2.0_f64, lambda in 0.0..2.0_f64, gamma in 0.0..0.5_f64) {
        let spec = MasterSpec::verhulst(beta, lambda, gamma);
        let split = split_liouvillian(&spec, 20).unwrap();
        let full = build_liouvillian_doi(&spec, 20).unwrap();
        prop_assert!(split.full().max_abs_diff(&full.matrix) <= 1e-12);
        for i in 0..split.dim() {
            prop_assert!(*split.free().get(i, i) <= 0.0);
        }
    }
}
