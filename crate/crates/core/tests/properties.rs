//! Property tests over seeded random inputs: norm inequalities, projection
//! geometry, and sampling determinism.

use proptest::prelude::*;

use plstomo::estimate::{project_to_states, LinearInversionEstimate};
use plstomo::linalg::{random_hermitian, DensityMatrix, HermitianMatrix};
use plstomo::measurements::{MeasurementScheme, SchemeKind};
use plstomo::simulate::{born_probabilities, sample_counts};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // ‖A‖₁ ≥ ‖A‖∞ ≥ ‖A‖₁/d
    #[test]
    fn norm_chain(seed in 0u64..10_000, d in 2usize..12) {
        let a = random_hermitian(d, seed);
        let trace_norm = a.trace_norm().unwrap();
        let op_norm = a.operator_norm().unwrap();
        prop_assert!(trace_norm >= op_norm - 1e-10);
        prop_assert!(op_norm >= trace_norm / d as f64 - 1e-10);
    }

    // states are at most trace distance 2 apart, and the distance is symmetric
    #[test]
    fn trace_distance_range(seed in 0u64..10_000, d in 2usize..9) {
        let r = 1 + (seed as usize % d);
        let rho = DensityMatrix::random_rank(d, r, seed).unwrap();
        let sigma = DensityMatrix::random_rank(d, d, seed ^ 0xabcd).unwrap();
        let dist = rho.trace_norm_distance(&sigma).unwrap();
        prop_assert!((0.0..=2.0 + 1e-10).contains(&dist));
        let back = sigma.trace_norm_distance(&rho).unwrap();
        prop_assert!((dist - back).abs() < 1e-10);
    }

    // truncation residual decreases in r and vanishes at full rank
    #[test]
    fn rank_residual_monotone(seed in 0u64..10_000, d in 2usize..10) {
        let rho = DensityMatrix::random_rank(d, 1 + (seed as usize % d), seed).unwrap();
        let mut prev = f64::INFINITY;
        for r in 1..=d {
            let s = rho.rank_residual(r).unwrap();
            prop_assert!(s <= prev + 1e-12);
            prev = s;
        }
        prop_assert!(rho.rank_residual(d).unwrap() < 1e-10);
    }

    // projecting onto the states never moves away from any state
    // (nonexpansiveness of projections onto convex sets)
    #[test]
    fn projection_is_nonexpansive(seed in 0u64..10_000, d in 2usize..10) {
        let raw = random_hermitian(d, seed);
        let shift = (1.0 - raw.trace()) / d as f64;
        let l = LinearInversionEstimate {
            matrix: raw.add(&HermitianMatrix::identity(d).scale(shift)).unwrap(),
            kind: SchemeKind::Structured,
            n: 0,
        };
        let pls = project_to_states(&l).unwrap();
        let sigma = DensityMatrix::random_rank(d, d, seed ^ 0x5555).unwrap();
        let before = l.matrix.frobenius_distance(sigma.hermitian()).unwrap();
        let after = pls.state.frobenius_distance(&sigma).unwrap();
        prop_assert!(after <= before + 1e-10);
        // output spectrum sums to one
        let total: f64 = pls.state.eigenvalues().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    // counts are a deterministic function of (state, scheme, shots, seed)
    #[test]
    fn sampling_determinism(seed in 0u64..10_000) {
        let scheme = MeasurementScheme::mub(3).unwrap();
        let rho = DensityMatrix::random_pure(3, seed);
        let table = born_probabilities(&rho, &scheme).unwrap();
        let a = sample_counts(&table, 200, seed);
        let b = sample_counts(&table, 200, seed);
        prop_assert_eq!(a, b);
    }
}
