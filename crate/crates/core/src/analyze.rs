//! Tail bounds, sample-complexity and confidence-radius formulas, and the
//! conversion inequalities that relate operator-norm closeness of the raw
//! inversion to trace-norm closeness of the projected estimator. Bounds above
//! 1 are returned as-is; coverage checks treat them as vacuous.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, DensityMatrix, HermitianMatrix};
use crate::measurements::{SchemeKind, StructuredPovm};

/// Dimension factor g(d) of the tail bounds: 2d for structured POVMs, d² for
/// Pauli observables, and exactly 3^k for Pauli basis measurements (the
/// commonly quoted d^1.6 is shorthand for d^(log₂3)).
pub fn g_factor(kind: SchemeKind, d: usize) -> Result<f64> {
    match kind {
        SchemeKind::Structured => Ok(2.0 * d as f64),
        SchemeKind::PauliObservables => Ok((d as f64) * (d as f64)),
        SchemeKind::PauliBasis => {
            if d == 0 || d & (d - 1) != 0 {
                return Err(Error::UnsupportedDimension {
                    d,
                    constraint: "Pauli basis dimension must be a power of 2",
                });
            }
            Ok(3.0_f64.powi(d.trailing_zeros() as i32))
        }
        SchemeKind::Uniform => Err(Error::Domain(
            "the uniform POVM has its own dimension-free tail bound".into(),
        )),
    }
}

/// Inputs shared by the bound formulas.
#[derive(Debug, Clone, Copy)]
pub struct BoundParams {
    pub d: usize,
    /// Sample count; real-valued so formula identities can be probed exactly.
    pub n: f64,
    pub r: usize,
    /// ε (trace norm) or τ (operator norm), depending on the formula.
    pub accuracy: f64,
    pub delta: f64,
    pub g: f64,
}

impl BoundParams {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // the negated forms also reject NaN
    pub fn new(d: usize, n: f64, r: usize, accuracy: f64, delta: f64, g: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        if !(n > 0.0) {
            return Err(Error::Domain(format!("sample count {n} must be positive")));
        }
        if r < 1 || r > d {
            return Err(Error::RankOutOfRange { r, d });
        }
        if !(accuracy >= 0.0) {
            return Err(Error::Domain(format!("accuracy {accuracy} must be >= 0")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Domain(format!("delta {delta} must lie in (0, 1)")));
        }
        if !(g > 0.0) {
            return Err(Error::Domain(format!("dimension factor {g} must be positive")));
        }
        Ok(Self {
            d,
            n,
            r,
            accuracy,
            delta,
            g,
        })
    }

    /// Same, with g filled in from the scheme kind.
    pub fn for_scheme(
        kind: SchemeKind,
        d: usize,
        n: f64,
        r: usize,
        accuracy: f64,
        delta: f64,
    ) -> Result<Self> {
        Self::new(d, n, r, accuracy, delta, g_factor(kind, d)?)
    }
}

/// Pr[‖ρ̂ − ρ‖₁ ≥ ε] ≤ d·exp(−nε²/(43·g·r²)), valid for ε ∈ [0, 1].
pub fn thm1_tail(p: &BoundParams) -> Result<f64> {
    if p.accuracy > 1.0 {
        return Err(Error::Domain(format!(
            "trace-norm accuracy {} outside the stated range [0, 1]",
            p.accuracy
        )));
    }
    let exponent = -p.n * p.accuracy * p.accuracy / (43.0 * p.g * (p.r * p.r) as f64);
    Ok(p.d as f64 * exponent.exp())
}

/// Radius of the δ-confidence trace-norm ball: rank·sqrt(43·g·log(d/δ)/n).
pub fn confidence_radius(p: &BoundParams, rank_estimate: usize) -> Result<f64> {
    if rank_estimate == 0 {
        return Err(Error::Domain("rank estimate must be at least 1".into()));
    }
    Ok(rank_estimate as f64 * (43.0 * p.g * (p.d as f64 / p.delta).ln() / p.n).sqrt())
}

/// Samples sufficient for trace-norm accuracy ε at confidence 1 − δ:
/// ceil(43·g·r²/ε²·log(d/δ)).
pub fn sample_complexity(p: &BoundParams) -> Result<u64> {
    if p.accuracy <= 0.0 {
        return Err(Error::Domain("accuracy must be positive".into()));
    }
    let value =
        43.0 * p.g * (p.r * p.r) as f64 / (p.accuracy * p.accuracy) * (p.d as f64 / p.delta).ln();
    Ok(value.ceil() as u64)
}

/// Subgaussian range of τ for the operator-norm tail, per scheme.
fn essential_tau_range(kind: SchemeKind, d: usize) -> Result<f64> {
    match kind {
        SchemeKind::Structured => Ok(2.0),
        SchemeKind::PauliObservables => Ok(d as f64 / 2.0),
        SchemeKind::PauliBasis => Ok(1.0),
        SchemeKind::Uniform => Err(Error::Domain(
            "use thm2_tail for the uniform POVM".into(),
        )),
    }
}

/// Pr[‖L̂ − ρ‖∞ ≥ τ] ≤ d·exp(−3nτ²/(8·g)) within the scheme's subgaussian range.
pub fn essential_opnorm_tail(p: &BoundParams, kind: SchemeKind) -> Result<f64> {
    let max_tau = essential_tau_range(kind, p.d)?;
    if p.accuracy > max_tau {
        return Err(Error::Domain(format!(
            "operator-norm accuracy {} outside the subgaussian range [0, {max_tau}] for {kind}",
            p.accuracy
        )));
    }
    let exponent = -3.0 * p.n * p.accuracy * p.accuracy / (8.0 * p.g);
    Ok(p.d as f64 * exponent.exp())
}

/// Uniform-POVM tail: Pr[‖ρ̂ − ρ‖₁ ≥ ε] ≤ exp(2.2·d − ε²n/(480·r²)).
pub fn thm2_tail(p: &BoundParams) -> Result<f64> {
    if p.accuracy <= 0.0 {
        return Err(Error::Domain("accuracy must be positive".into()));
    }
    let exponent = 2.2 * p.d as f64 - p.accuracy * p.accuracy * p.n / (480.0 * (p.r * p.r) as f64);
    Ok(exponent.exp())
}

/// Two sides of an inequality plus the verdict (rhs gets 1e-9 slack).
#[derive(Debug, Clone, Copy)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn check(lhs: f64, rhs: f64) -> InequalityCheck {
    InequalityCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9,
    }
}

/// ‖ρ̂ − ρ‖₁ ≤ 4rτ + 2·min{σ_r(ρ), σ_r(ρ̂)} whenever ‖L̂ − ρ‖∞ ≤ τ and the raw
/// inversion has unit trace. The caller supplies a τ at least as large as the
/// realized operator-norm error.
pub fn prop1_conversion_check(
    tau: f64,
    rho: &DensityMatrix,
    rho_hat: &DensityMatrix,
    r: usize,
) -> Result<InequalityCheck> {
    let lhs = rho_hat.trace_norm_distance(rho)?;
    let residual = rho.rank_residual(r)?.min(rho_hat.rank_residual(r)?);
    Ok(check(lhs, 4.0 * r as f64 * tau + 2.0 * residual))
}

/// ‖ρ − σ‖₁ ≤ 2r·‖ρ − σ‖∞ + 2·min{σ_r(ρ), σ_r(σ)} for any two states.
pub fn lemma2_rank_comparison_check(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    r: usize,
) -> Result<InequalityCheck> {
    let diff = rho.hermitian().sub(sigma.hermitian())?;
    let lhs = diff.trace_norm()?;
    let opnorm = diff.operator_norm()?;
    let residual = rho.rank_residual(r)?.min(sigma.rank_residual(r)?);
    Ok(check(lhs, 2.0 * r as f64 * opnorm + 2.0 * residual))
}

/// One simulated tomography run. `sigma_true` and `sigma_est` hold the
/// rank-r truncation residuals of ρ and ρ̂ for r = 1..d.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub scheme: SchemeKind,
    pub d: usize,
    pub r_true: usize,
    pub n: u64,
    pub seed: u64,
    /// ‖ρ̂ − ρ‖₁
    pub trace_error: f64,
    /// ‖L̂ − ρ‖∞
    pub op_error_l: f64,
    /// ‖ρ̂ − ρ‖∞
    pub op_error_rho: f64,
    pub x0: f64,
    pub rank_estimate: usize,
    pub sigma_true: Vec<f64>,
    pub sigma_est: Vec<f64>,
    /// Confidence radius at δ = 0.05 (NaN for the uniform POVM, which has no g(d)).
    pub radius_delta05: f64,
    pub runtime_ms: f64,
    /// Share of the trial spent in the projection step.
    pub projection_fraction: f64,
}

/// Empirical failure frequency against a bound value.
#[derive(Debug, Clone, Copy)]
pub struct CoverageCheck {
    pub empirical_failure: f64,
    pub bound: f64,
    pub trials: usize,
    pub holds: bool,
}

/// A bound ≥ 1 passes vacuously; otherwise the empirical frequency may exceed
/// the bound by at most three binomial standard deviations.
pub fn coverage_holds(empirical: f64, bound: f64, trials: usize) -> bool {
    if bound >= 1.0 {
        return true;
    }
    let slack = 3.0 * (bound * (1.0 - bound) / trials as f64).sqrt();
    empirical <= bound + slack
}

/// Effective-rank tail check on a batch of trials with common scheme, state,
/// and sample count: the frequency of
/// ‖ρ̂ − ρ‖₁ ≥ ε + 2·min{σ_r(ρ), σ_r(ρ̂)} may not exceed d·exp(−nε²/(43·g·r²))
/// beyond binomial slack.
pub fn thm4_effective_rank_check(
    trials: &[TrialRecord],
    r: usize,
    epsilon: f64,
) -> Result<CoverageCheck> {
    let first = trials
        .first()
        .ok_or_else(|| Error::Domain("empty trial batch".into()))?;
    let (kind, d, n) = (first.scheme, first.d, first.n);
    if r < 1 || r > d {
        return Err(Error::RankOutOfRange { r, d });
    }
    let mut failures = 0usize;
    for t in trials {
        if t.scheme != kind || t.d != d || t.n != n {
            return Err(Error::Domain(
                "trial batch mixes schemes, dimensions, or sample counts".into(),
            ));
        }
        let residual = t.sigma_true[r - 1].min(t.sigma_est[r - 1]);
        if t.trace_error >= epsilon + 2.0 * residual {
            failures += 1;
        }
    }
    let params = BoundParams::for_scheme(kind, d, n as f64, r, epsilon, 0.5)?;
    let bound = thm1_tail(&params)?;
    let empirical = failures as f64 / trials.len() as f64;
    Ok(CoverageCheck {
        empirical_failure: empirical,
        bound,
        trials: trials.len(),
        holds: coverage_holds(empirical, bound, trials.len()),
    })
}

/// Exact single-draw second moment of the structured-POVM random matrix:
/// Σ_k (d/m)·⟨v_k|ρ|v_k⟩·((d+1)|v_k⟩⟨v_k| − I)² must equal (d−1)(ρ + I) + I.
/// Returns the operator-norm deviation.
pub fn design_second_moment_check(povm: &StructuredPovm, rho: &DensityMatrix) -> Result<f64> {
    let d = povm.d();
    if rho.dim() != d {
        return Err(Error::DimensionMismatch(rho.dim(), d));
    }
    let m = povm.total_vectors() as f64;
    let id = CMatrix::identity(d, d);
    let mut acc = CMatrix::zeros(d, d);
    for v in povm.vectors() {
        let prob = d as f64 / m * crate::linalg::expect_real(rho.matrix(), v);
        let x = crate::linalg::outer_product(v) * num_complex::Complex64::new((d + 1) as f64, 0.0)
            - &id;
        acc += (&x * &x) * num_complex::Complex64::new(prob, 0.0);
    }
    let target = (rho.matrix() + &id) * num_complex::Complex64::new(d as f64 - 1.0, 0.0) + &id;
    HermitianMatrix::new(acc - target)?.operator_norm()
}
