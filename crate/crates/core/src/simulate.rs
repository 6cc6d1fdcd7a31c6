//! Born-rule outcome distributions and seeded sampling.
//!
//! Counts are drawn per setting from an independent ChaCha8 stream keyed by
//! (seed, setting index), so trial batches parallelize without changing any
//! result. Multinomial draws use the conditional method: a chain of exact
//! binomials, one per outcome.

use num_complex::Complex64;
use rand::{Rng, RngExt};
use rand_distr::{Beta, Binomial, Distribution};

use crate::error::{Error, Result};
use crate::linalg::{expect_real, CVector, DensityMatrix};
use crate::measurements::MeasurementScheme;
use crate::rng::stream_rng;

/// Per-setting Born-rule outcome probabilities.
#[derive(Debug, Clone)]
pub struct ProbabilityTable {
    probs: Vec<Vec<f64>>,
}

impl ProbabilityTable {
    pub fn settings(&self) -> usize {
        self.probs.len()
    }

    pub fn outcomes(&self, setting: usize) -> usize {
        self.probs[setting].len()
    }

    pub fn setting(&self, setting: usize) -> &[f64] {
        &self.probs[setting]
    }
}

/// p(setting, outcome) = tr(effect · ρ). Entries are clamped at zero;
/// a per-setting sum off by more than 1e-8 is reported as a broken scheme.
pub fn born_probabilities(
    rho: &DensityMatrix,
    scheme: &MeasurementScheme,
) -> Result<ProbabilityTable> {
    if rho.dim() != scheme.d() {
        return Err(Error::DimensionMismatch(rho.dim(), scheme.d()));
    }
    let raw: Vec<Vec<f64>> = match scheme {
        MeasurementScheme::Structured(povm) => {
            let weight = povm.d() as f64 / povm.vectors_per_setting() as f64;
            (0..povm.settings())
                .map(|s| {
                    (0..povm.vectors_per_setting())
                        .map(|o| weight * expect_real(rho.matrix(), povm.vector(s, o)))
                        .collect()
                })
                .collect()
        }
        MeasurementScheme::PauliObservables(p) => (0..p.settings())
            .map(|s| {
                let mu = p.word_for_setting(s).expectation(rho.matrix());
                vec![(1.0 + mu) / 2.0, (1.0 - mu) / 2.0]
            })
            .collect(),
        MeasurementScheme::PauliBasis(p) => (0..p.settings())
            .map(|s| {
                (0..p.outcomes())
                    .map(|o| expect_real(rho.matrix(), &p.basis_vector(s, o)))
                    .collect()
            })
            .collect(),
        MeasurementScheme::Uniform { .. } => {
            return Err(Error::Domain(
                "the uniform POVM is continuous; use sample_uniform_povm".into(),
            ))
        }
    };
    let mut probs = Vec::with_capacity(raw.len());
    for (setting, row) in raw.into_iter().enumerate() {
        let mut clamped: Vec<f64> = row.iter().map(|&p| p.max(0.0)).collect();
        let shift: f64 = row.iter().filter(|&&p| p < 0.0).map(|p| -p).sum();
        let sum: f64 = clamped.iter().sum();
        if shift > 1e-8 || (sum - 1.0).abs() > 1e-8 {
            return Err(Error::ProbabilityNotNormalized { setting, sum });
        }
        if (sum - 1.0).abs() > 1e-12 {
            for p in &mut clamped {
                *p /= sum;
            }
        }
        probs.push(clamped);
    }
    Ok(ProbabilityTable { probs })
}

/// Integer outcome counts per setting, with the shot budget that produced them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeCounts {
    counts: Vec<Vec<u64>>,
    shots: Vec<u64>,
    total: u64,
}

impl OutcomeCounts {
    pub fn settings(&self) -> usize {
        self.counts.len()
    }

    pub fn setting(&self, setting: usize) -> &[u64] {
        &self.counts[setting]
    }

    pub fn shots(&self, setting: usize) -> u64 {
        self.shots[setting]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// CSV export: header `setting,outcome,count,shots`.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "setting,outcome,count,shots")?;
        for (s, row) in self.counts.iter().enumerate() {
            for (o, c) in row.iter().enumerate() {
                writeln!(w, "{},{},{},{}", s, o, c, self.shots[s])?;
            }
        }
        Ok(())
    }
}

/// Split n shots equally over the settings; remainders go to the
/// lowest-indexed settings, one extra shot each.
pub fn allocate_shots(n: u64, settings: usize) -> Vec<u64> {
    let base = n / settings as u64;
    let rem = (n % settings as u64) as usize;
    (0..settings)
        .map(|s| base + u64::from(s < rem))
        .collect()
}

/// Exact multinomial draw by sequential binomial decomposition.
fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining_n = n;
    let mut remaining_p = 1.0_f64;
    for i in 0..probs.len() {
        if remaining_n == 0 {
            break;
        }
        if i == probs.len() - 1 {
            counts[i] = remaining_n;
            break;
        }
        let ratio = if remaining_p <= 0.0 {
            1.0
        } else {
            (probs[i] / remaining_p).clamp(0.0, 1.0)
        };
        let draw = if ratio >= 1.0 {
            remaining_n
        } else if ratio <= 0.0 {
            0
        } else {
            Binomial::new(remaining_n, ratio)
                .expect("ratio in (0,1)")
                .sample(rng)
        };
        counts[i] = draw;
        remaining_n -= draw;
        remaining_p -= probs[i];
    }
    counts
}

/// Equal shot budget for every setting.
pub fn sample_counts(table: &ProbabilityTable, shots_per_setting: u64, seed: u64) -> OutcomeCounts {
    let shots = vec![shots_per_setting; table.settings()];
    sample_counts_allocated(table, &shots, seed)
}

/// One independent multinomial per setting, stream keyed by (seed, setting).
pub fn sample_counts_allocated(
    table: &ProbabilityTable,
    shots: &[u64],
    seed: u64,
) -> OutcomeCounts {
    assert_eq!(shots.len(), table.settings());
    let counts: Vec<Vec<u64>> = (0..table.settings())
        .map(|s| {
            let mut rng = stream_rng(seed, &[s as u64]);
            multinomial(&mut rng, shots[s], table.setting(s))
        })
        .collect();
    let total = shots.iter().sum();
    OutcomeCounts {
        counts,
        shots: shots.to_vec(),
        total,
    }
}

/// Frequencies normalized within each setting, with the weight every setting
/// carries in the global sample (shots_s / n). Estimators document which of
/// the two normalizations they consume.
#[derive(Debug, Clone)]
pub struct FrequencyVector {
    freqs: Vec<Vec<f64>>,
    weights: Vec<f64>,
    n: u64,
}

impl FrequencyVector {
    pub fn from_counts(counts: &OutcomeCounts) -> Result<Self> {
        let n = counts.total();
        if n == 0 {
            return Err(Error::FrequencyNormalization("no samples drawn".into()));
        }
        let mut freqs = Vec::with_capacity(counts.settings());
        let mut weights = Vec::with_capacity(counts.settings());
        for s in 0..counts.settings() {
            let shots = counts.shots(s);
            if shots == 0 {
                return Err(Error::FrequencyNormalization(format!(
                    "setting {s} received zero shots"
                )));
            }
            freqs.push(
                counts
                    .setting(s)
                    .iter()
                    .map(|&c| c as f64 / shots as f64)
                    .collect(),
            );
            weights.push(shots as f64 / n as f64);
        }
        Ok(Self { freqs, weights, n })
    }

    /// Frequencies equal to the exact Born probabilities with equal setting
    /// weights; used by the infinite-sample shortcut (n is recorded as 0).
    pub fn exact(table: &ProbabilityTable) -> Self {
        let settings = table.settings();
        Self {
            freqs: (0..settings).map(|s| table.setting(s).to_vec()).collect(),
            weights: vec![1.0 / settings as f64; settings],
            n: 0,
        }
    }

    pub fn settings(&self) -> usize {
        self.freqs.len()
    }

    pub fn setting(&self, setting: usize) -> &[f64] {
        &self.freqs[setting]
    }

    /// shots_s / n.
    pub fn weight(&self, setting: usize) -> f64 {
        self.weights[setting]
    }

    pub fn total_samples(&self) -> u64 {
        self.n
    }
}

/// n outcome vectors of a uniform-POVM measurement.
#[derive(Debug, Clone)]
pub struct UniformPovmSample {
    d: usize,
    vectors: Vec<CVector>,
}

impl UniformPovmSample {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[CVector] {
        &self.vectors
    }
}

/// Draw n outcomes exactly from the density d·⟨v|ρ|v⟩ dv.
///
/// Construction: pick an eigenvector x of ρ with probability equal to its
/// eigenvalue; the squared overlap t = |⟨x|v⟩|² then has density
/// proportional to t·(1−t)^{d−2}, i.e. Beta(2, d−1); the remainder of v is a
/// uniformly random phase times x plus a Haar direction in the orthogonal
/// complement. Validated against a rejection sampler in the test suite.
pub fn sample_uniform_povm(rho: &DensityMatrix, n: usize, seed: u64) -> Result<UniformPovmSample> {
    let d = rho.dim();
    let eig = rho.hermitian().eigh()?;
    let lambdas: Vec<f64> = eig.eigenvalues().iter().map(|&l| l.max(0.0)).collect();
    let lambda_sum: f64 = lambdas.iter().sum();
    let eigenvectors: Vec<CVector> = (0..d).map(|i| eig.eigenvector(i)).collect();

    let beta = if d > 1 {
        Some(Beta::new(2.0, (d - 1) as f64).expect("valid shape parameters"))
    } else {
        None
    };
    let mut rng = stream_rng(seed, &[0]);
    let mut vectors = Vec::with_capacity(n);
    for _ in 0..n {
        // eigenvector index with probability λ_i
        let mut u = rng.random::<f64>() * lambda_sum;
        let mut idx = 0;
        for (i, &l) in lambdas.iter().enumerate() {
            if u < l || i == d - 1 {
                idx = i;
                break;
            }
            u -= l;
        }
        let x = &eigenvectors[idx];
        if d == 1 {
            vectors.push(x.clone());
            continue;
        }
        let t: f64 = beta.as_ref().unwrap().sample(&mut rng);
        let phase = Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU);
        // Haar direction in the orthogonal complement of x
        let w = loop {
            let g = CVector::from_fn(d, |_, _| crate::linalg::complex_gaussian(&mut rng));
            let overlap = x.dotc(&g);
            let candidate = g - x * overlap;
            let norm = candidate.norm();
            if norm > 1e-9 {
                break candidate / Complex64::new(norm, 0.0);
            }
        };
        let v = x * (phase * Complex64::new(t.sqrt(), 0.0))
            + w * Complex64::new((1.0 - t).sqrt(), 0.0);
        vectors.push(v);
    }
    Ok(UniformPovmSample { d, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::outer_product;
    use crate::linalg::CMatrix;
    use statrs::distribution::{Beta as BetaDist, ChiSquared, ContinuousCDF};

    fn pure_basis_state(d: usize, i: usize) -> DensityMatrix {
        let v = CVector::from_fn(d, |k, _| Complex64::new(if k == i { 1.0 } else { 0.0 }, 0.0));
        DensityMatrix::pure(&v).unwrap()
    }

    #[test]
    fn born_uniform_for_mixed_state() {
        let scheme = MeasurementScheme::mub(5).unwrap();
        let table = born_probabilities(&DensityMatrix::maximally_mixed(5), &scheme).unwrap();
        for s in 0..table.settings() {
            for &p in table.setting(s) {
                assert!((p - 0.2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn born_computational_and_unbiased_bases() {
        let scheme = MeasurementScheme::mub(2).unwrap();
        let rho = pure_basis_state(2, 0);
        let table = born_probabilities(&rho, &scheme).unwrap();
        // setting 0 is the computational basis
        assert!((table.setting(0)[0] - 1.0).abs() < 1e-12);
        assert!(table.setting(0)[1].abs() < 1e-12);
        // setting 1 is the σ_x eigenbasis
        assert!((table.setting(1)[0] - 0.5).abs() < 1e-12);
        assert!((table.setting(1)[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn born_pauli_observables() {
        let scheme = MeasurementScheme::pauli_observables(1).unwrap();
        let rho = pure_basis_state(2, 0);
        let table = born_probabilities(&rho, &scheme).unwrap();
        // settings are X, Y, Z
        assert!((table.setting(0)[0] - 0.5).abs() < 1e-12);
        assert!((table.setting(2)[0] - 1.0).abs() < 1e-12);
        assert!(table.setting(2)[1].abs() < 1e-12);
    }

    #[test]
    fn born_rejects_mismatch_and_uniform() {
        let scheme = MeasurementScheme::mub(3).unwrap();
        assert!(born_probabilities(&DensityMatrix::maximally_mixed(2), &scheme).is_err());
        let uniform = MeasurementScheme::uniform(3).unwrap();
        assert!(born_probabilities(&DensityMatrix::maximally_mixed(3), &uniform).is_err());
    }

    #[test]
    fn shot_allocation_covers_remainder() {
        assert_eq!(allocate_shots(10, 3), vec![4, 3, 3]);
        assert_eq!(allocate_shots(9, 3), vec![3, 3, 3]);
        assert_eq!(allocate_shots(2, 4), vec![1, 1, 0, 0]);
        let alloc = allocate_shots(1_000_003, 7);
        assert_eq!(alloc.iter().sum::<u64>(), 1_000_003);
    }

    #[test]
    fn sampling_degenerate_distribution() {
        let table = ProbabilityTable {
            probs: vec![vec![0.0, 1.0, 0.0]],
        };
        let counts = sample_counts(&table, 50, 7);
        assert_eq!(counts.setting(0), &[0, 50, 0]);
    }

    #[test]
    fn sampling_is_deterministic_and_complete() {
        let scheme = MeasurementScheme::mub(5).unwrap();
        let rho = DensityMatrix::random_pure(5, 1);
        let table = born_probabilities(&rho, &scheme).unwrap();
        let a = sample_counts(&table, 1000, 99);
        let b = sample_counts(&table, 1000, 99);
        assert_eq!(a, b);
        for s in 0..a.settings() {
            assert_eq!(a.setting(s).iter().sum::<u64>(), 1000);
        }
        let c = sample_counts(&table, 1000, 100);
        assert_ne!(a, c);
    }

    #[test]
    fn sampling_matches_distribution_chi_square() {
        // p-value above 0.001 for at least 99 of 100 seeds
        let scheme = MeasurementScheme::mub(5).unwrap();
        let rho = DensityMatrix::random_pure(5, 12);
        let table = born_probabilities(&rho, &scheme).unwrap();
        let shots = 100_000u64;
        let mut passes = 0;
        for seed in 0..100 {
            let counts = sample_counts(&table, shots, seed);
            let mut stat = 0.0;
            let mut dof = 0isize;
            for s in 0..counts.settings() {
                for (o, &p) in table.setting(s).iter().enumerate() {
                    let expected = p * shots as f64;
                    if expected > 1e-9 {
                        let diff = counts.setting(s)[o] as f64 - expected;
                        stat += diff * diff / expected;
                        dof += 1;
                    }
                }
                dof -= 1; // each setting's counts are constrained to its shot total
            }
            let p_value = 1.0 - ChiSquared::new(dof as f64).unwrap().cdf(stat);
            if p_value > 0.001 {
                passes += 1;
            }
        }
        assert!(passes >= 99, "only {passes}/100 seeds passed");
    }

    #[test]
    fn frequencies_converge_to_probabilities() {
        let scheme = MeasurementScheme::mub(5).unwrap();
        let rho = DensityMatrix::random_pure(5, 3);
        let table = born_probabilities(&rho, &scheme).unwrap();
        let counts = sample_counts(&table, 1_000_000, 5);
        let f = FrequencyVector::from_counts(&counts).unwrap();
        let mut max_dev = 0.0_f64;
        for s in 0..table.settings() {
            for (o, &p) in table.setting(s).iter().enumerate() {
                max_dev = max_dev.max((f.setting(s)[o] - p).abs());
            }
        }
        assert!(max_dev < 5e-3, "max deviation {max_dev}");
    }

    #[test]
    fn frequency_vector_normalization() {
        let table = ProbabilityTable {
            probs: vec![vec![0.25, 0.75], vec![0.5, 0.5]],
        };
        let counts = sample_counts_allocated(&table, &[3, 2], 1);
        let f = FrequencyVector::from_counts(&counts).unwrap();
        assert!((f.setting(0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((f.weight(0) - 0.6).abs() < 1e-12);
        assert!((f.weight(1) - 0.4).abs() < 1e-12);

        let exact = FrequencyVector::exact(&table);
        assert_eq!(exact.total_samples(), 0);
        assert!((exact.weight(0) - 0.5).abs() < 1e-12);

        let zero_shots = sample_counts_allocated(&table, &[5, 0], 1);
        assert!(FrequencyVector::from_counts(&zero_shots).is_err());
    }

    #[test]
    fn uniform_sampler_dimension_one() {
        let rho = DensityMatrix::maximally_mixed(1);
        let sample = sample_uniform_povm(&rho, 10, 4).unwrap();
        for v in sample.vectors() {
            assert!((v[0].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_sampler_overlap_marginal_is_beta() {
        // for pure ρ = |x⟩⟨x|, t = |⟨x|v⟩|² ~ Beta(2, d−1)
        let d = 8;
        let rho = DensityMatrix::random_pure(d, 42);
        let eig = rho.hermitian().eigh().unwrap();
        let x = eig.eigenvector(0);
        let n = 20_000;
        let sample = sample_uniform_povm(&rho, n, 7).unwrap();
        let mut overlaps: Vec<f64> = sample
            .vectors()
            .iter()
            .map(|v| x.dotc(v).norm_sqr())
            .collect();
        overlaps.sort_by(|a, b| a.total_cmp(b));
        let beta = BetaDist::new(2.0, (d - 1) as f64).unwrap();
        let stat = crate::stats::ks_statistic(&overlaps, |t| beta.cdf(t));
        let crit = crate::stats::ks_one_sample_critical(0.001, n);
        assert!(stat < crit, "KS statistic {stat:.4} >= critical {crit:.4}");
    }

    #[test]
    fn uniform_sampler_unit_norm_and_unbiased() {
        let d = 4;
        let rho = DensityMatrix::random_rank(d, 2, 9).unwrap();
        let n = 100_000;
        let sample = sample_uniform_povm(&rho, n, 11).unwrap();
        // running mean and second moment of the estimator entries
        let mut mean = CMatrix::zeros(d, d);
        let mut sq_re = vec![0.0; d * d];
        let mut sq_im = vec![0.0; d * d];
        let id = CMatrix::identity(d, d);
        for v in sample.vectors() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
            let term = outer_product(v) * Complex64::new((d + 1) as f64, 0.0) - &id;
            for (k, c) in term.iter().enumerate() {
                sq_re[k] += c.re * c.re;
                sq_im[k] += c.im * c.im;
            }
            mean += term;
        }
        mean /= Complex64::new(n as f64, 0.0);
        for (k, c) in mean.iter().enumerate() {
            let target = rho.matrix()[(k % d, k / d)];
            let var_re = (sq_re[k] / n as f64 - c.re * c.re).max(0.0);
            let var_im = (sq_im[k] / n as f64 - c.im * c.im).max(0.0);
            let se_re = (var_re / n as f64).sqrt();
            let se_im = (var_im / n as f64).sqrt();
            assert!(
                (c.re - target.re).abs() <= 3.0 * se_re + 1e-12,
                "entry {k}: re off by {:.2e} vs 3σ {:.2e}",
                (c.re - target.re).abs(),
                3.0 * se_re
            );
            assert!((c.im - target.im).abs() <= 3.0 * se_im + 1e-12);
        }
    }
}
