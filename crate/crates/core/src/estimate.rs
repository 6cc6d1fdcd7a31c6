//! Linear-inversion estimators and the projection onto state space.
//!
//! Each measurement family has a closed-form inversion; `ls_generic` solves
//! the same least-squares problem by materializing the d²×d² frame
//! superoperator in an orthonormal Hermitian basis and serves as the oracle
//! the closed forms are checked against. Projection is the analytic
//! eigenvalue soft-thresholding with the threshold found by sort-and-scan.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::analyze::{confidence_radius, BoundParams, TrialRecord};
use crate::error::{Error, Result};
use crate::linalg::{
    kron, outer_product, CMatrix, DensityMatrix, HermitianMatrix,
};
use crate::measurements::{
    MeasurementScheme, PauliBasisScheme, PauliObservableScheme, SchemeKind, StructuredPovm,
};
use crate::simulate::{
    allocate_shots, born_probabilities, sample_counts_allocated, sample_uniform_povm,
    FrequencyVector, UniformPovmSample,
};

/// Largest dimension for which the generic solver may materialize the
/// d⁴-entry superoperator.
pub const GENERIC_MAX_DIM: usize = 16;

/// The raw least-squares estimator L̂: Hermitian, unit trace, generally
/// indefinite.
#[derive(Debug, Clone)]
pub struct LinearInversionEstimate {
    pub matrix: HermitianMatrix,
    pub kind: SchemeKind,
    /// Total samples behind the frequencies (0 for the exact-probability path).
    pub n: u64,
}

fn check_unit_trace(matrix: &HermitianMatrix) -> Result<()> {
    let trace = matrix.trace();
    if (trace - 1.0).abs() > 1e-10 {
        return Err(Error::TraceNotOne {
            trace,
            tol: 1e-10,
        });
    }
    Ok(())
}

/// L̂ = (d+1)·Σ_i f_i·|v_i⟩⟨v_i| − I with globally normalized frequencies
/// f_i = count_i / n (per-setting frequencies times the setting weight).
pub fn ls_structured(povm: &StructuredPovm, f: &FrequencyVector) -> Result<LinearInversionEstimate> {
    if f.settings() != povm.settings() {
        return Err(Error::DimensionMismatch(povm.settings(), f.settings()));
    }
    let d = povm.d();
    let per = povm.vectors_per_setting();
    let mut acc = CMatrix::zeros(d, d);
    let mut total = 0.0;
    for s in 0..povm.settings() {
        let w = f.weight(s);
        for o in 0..per {
            let g = f.setting(s)[o] * w;
            if g != 0.0 {
                acc += outer_product(povm.vector(s, o)) * Complex64::new(g, 0.0);
            }
            total += g;
        }
    }
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::FrequencyNormalization(format!(
            "global frequencies sum to {total}"
        )));
    }
    let l = acc * Complex64::new(d as f64 + 1.0, 0.0) - CMatrix::identity(d, d);
    let matrix = HermitianMatrix::from_hermitian_unchecked(l);
    check_unit_trace(&matrix)?;
    Ok(LinearInversionEstimate {
        matrix,
        kind: SchemeKind::Structured,
        n: f.total_samples(),
    })
}

/// L̂ = (1/d)·Σ_i (f_i⁺ − f_i⁻)·W_i over all d² Pauli words; the identity
/// word enters with f⁺ = 1 deterministically and consumes no shots.
pub fn ls_pauli_observables(
    scheme: &PauliObservableScheme,
    f: &FrequencyVector,
) -> Result<LinearInversionEstimate> {
    if f.settings() != scheme.settings() {
        return Err(Error::DimensionMismatch(scheme.settings(), f.settings()));
    }
    let d = scheme.d();
    let mut acc = CMatrix::identity(d, d); // identity word: f⁺ − f⁻ = 1
    for s in 0..scheme.settings() {
        let row = f.setting(s);
        let sum = row[0] + row[1];
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::DichotomyViolated { setting: s, sum });
        }
        let mu = row[0] - row[1];
        if mu != 0.0 {
            acc += scheme.word_for_setting(s).matrix().matrix() * Complex64::new(mu, 0.0);
        }
    }
    let matrix = HermitianMatrix::from_hermitian_unchecked(acc / Complex64::new(d as f64, 0.0));
    check_unit_trace(&matrix)?;
    Ok(LinearInversionEstimate {
        matrix,
        kind: SchemeKind::PauliObservables,
        n: f.total_samples(),
    })
}

/// L̂ = 3^{−k}·Σ_{s,o} f_o^(s)·⊗_j (3|b⟩⟨b| − I): the depolarizing-inverse
/// form evaluated factor by factor, with per-setting normalized frequencies.
pub fn ls_pauli_basis(
    scheme: &PauliBasisScheme,
    f: &FrequencyVector,
) -> Result<LinearInversionEstimate> {
    if f.settings() != scheme.settings() {
        return Err(Error::DimensionMismatch(scheme.settings(), f.settings()));
    }
    let k = scheme.qubits();
    let d = scheme.d();
    // the six single-qubit factors 3|b⟩⟨b| − I, indexed by (axis, outcome bit)
    let factors: Vec<[CMatrix; 2]> = [
        crate::measurements::Axis::X,
        crate::measurements::Axis::Y,
        crate::measurements::Axis::Z,
    ]
    .iter()
    .map(|&axis| {
        [true, false].map(|plus| {
            let b = crate::measurements::qubit_basis_vector(axis, plus);
            let bv = crate::linalg::CVector::from_fn(2, |i, _| b[i]);
            outer_product(&bv) * Complex64::new(3.0, 0.0) - CMatrix::identity(2, 2)
        })
    })
    .collect();

    let mut acc = CMatrix::zeros(d, d);
    for s in 0..scheme.settings() {
        let row = f.setting(s);
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::FrequencyNormalization(format!(
                "setting {s} frequencies sum to {sum}"
            )));
        }
        let axes = scheme.setting_axes(s);
        for (o, &fo) in row.iter().enumerate() {
            if fo == 0.0 {
                continue;
            }
            let mut term = CMatrix::identity(1, 1);
            for (j, &axis) in axes.iter().enumerate() {
                let bit = (o >> (k - 1 - j)) & 1;
                term = kron(&term, &factors[axis as usize][bit]);
            }
            acc += term * Complex64::new(fo, 0.0);
        }
    }
    acc /= Complex64::new(3.0_f64.powi(k as i32), 0.0);
    let matrix = HermitianMatrix::from_hermitian_unchecked(acc);
    check_unit_trace(&matrix)?;
    Ok(LinearInversionEstimate {
        matrix,
        kind: SchemeKind::PauliBasis,
        n: f.total_samples(),
    })
}

/// Empirical mean of (d+1)|v⟩⟨v| − I over the sampled outcome vectors.
pub fn ls_uniform(sample: &UniformPovmSample) -> Result<LinearInversionEstimate> {
    if sample.is_empty() {
        return Err(Error::Domain("empty uniform-POVM sample".into()));
    }
    let d = sample.d();
    let mut acc = CMatrix::zeros(d, d);
    for v in sample.vectors() {
        acc += outer_product(v);
    }
    acc *= Complex64::new((d as f64 + 1.0) / sample.len() as f64, 0.0);
    acc -= CMatrix::identity(d, d);
    let matrix = HermitianMatrix::from_hermitian_unchecked(acc);
    check_unit_trace(&matrix)?;
    Ok(LinearInversionEstimate {
        matrix,
        kind: SchemeKind::Uniform,
        n: sample.len() as u64,
    })
}

/// Dispatch to the closed form matching the scheme.
pub fn ls_estimate(
    scheme: &MeasurementScheme,
    f: &FrequencyVector,
) -> Result<LinearInversionEstimate> {
    match scheme {
        MeasurementScheme::Structured(p) => ls_structured(p, f),
        MeasurementScheme::PauliObservables(p) => ls_pauli_observables(p, f),
        MeasurementScheme::PauliBasis(p) => ls_pauli_basis(p, f),
        MeasurementScheme::Uniform { .. } => Err(Error::Domain(
            "uniform-POVM data is a vector sample; use ls_uniform".into(),
        )),
    }
}

/// Output of the generic least-squares solver.
#[derive(Debug, Clone)]
pub struct GenericInversion {
    pub matrix: HermitianMatrix,
    /// Condition number of the frame superoperator M†M.
    pub condition_number: f64,
}

/// Orthonormal basis of the real vector space of d×d Hermitian matrices:
/// d diagonal units, then √2-normalized real and imaginary off-diagonal pairs.
fn hermitian_basis_coefficients(m: &CMatrix, d: usize, out: &mut [f64]) {
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut idx = 0;
    for i in 0..d {
        out[idx] = m[(i, i)].re;
        idx += 1;
    }
    for i in 0..d {
        for j in (i + 1)..d {
            out[idx] = sqrt2 * m[(i, j)].re;
            out[idx + 1] = sqrt2 * m[(i, j)].im;
            idx += 2;
        }
    }
}

fn hermitian_from_coefficients(x: &[f64], d: usize) -> CMatrix {
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut m = CMatrix::zeros(d, d);
    let mut idx = d;
    for i in 0..d {
        m[(i, i)] = Complex64::new(x[i], 0.0);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let c = Complex64::new(x[idx] / sqrt2, x[idx + 1] / sqrt2);
            m[(i, j)] = c;
            m[(j, i)] = c.conj();
            idx += 2;
        }
    }
    m
}

/// Solve argmin_X Σ_i (f_i − tr(M_i X))² over Hermitian X by forming
/// (M†M)⁻¹ M†(f) explicitly. The superoperator is d²×d², so this is limited
/// to d ≤ 16 and exists as the oracle for the closed forms above.
pub fn ls_generic(effects: &[CMatrix], data: &[f64]) -> Result<GenericInversion> {
    let first = effects
        .first()
        .ok_or_else(|| Error::Domain("empty effect list".into()))?;
    let d = first.nrows();
    if d > GENERIC_MAX_DIM {
        return Err(Error::UnsupportedDimension {
            d,
            constraint: "generic least squares materializes a d^4 superoperator; use a closed form",
        });
    }
    if effects.len() != data.len() {
        return Err(Error::DimensionMismatch(effects.len(), data.len()));
    }
    let dim = d * d;
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    let mut coeff = vec![0.0; dim];
    for (m, &fi) in effects.iter().zip(data.iter()) {
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch(d, m.nrows()));
        }
        hermitian_basis_coefficients(m, d, &mut coeff);
        for a in 0..dim {
            if coeff[a] == 0.0 {
                continue;
            }
            rhs[a] += fi * coeff[a];
            for b in 0..dim {
                gram[(a, b)] += coeff[a] * coeff[b];
            }
        }
    }
    let eig = gram.symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().fold(0.0_f64, |m, &x| m.max(x));
    let min_ev = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    let cond = if min_ev > 0.0 {
        max_ev / min_ev
    } else {
        f64::INFINITY
    };
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects a NaN condition number
    if !(cond <= 1e10) {
        return Err(Error::IncompleteMeasurement { cond });
    }
    // x = V diag(1/λ) Vᵀ rhs, reusing the eigendecomposition
    let vt_rhs = eig.eigenvectors.transpose() * &rhs;
    let scaled = DVector::<f64>::from_fn(dim, |i, _| vt_rhs[i] / eig.eigenvalues[i]);
    let x = &eig.eigenvectors * scaled;
    let matrix = HermitianMatrix::from_hermitian_unchecked(hermitian_from_coefficients(
        x.as_slice(),
        d,
    ));
    Ok(GenericInversion {
        matrix,
        condition_number: cond,
    })
}

/// Flattened (effects, data) pair that feeds `ls_generic` with exactly the
/// statistics each closed form consumes.
pub fn scheme_effects_and_data(
    scheme: &MeasurementScheme,
    f: &FrequencyVector,
) -> Result<(Vec<CMatrix>, Vec<f64>)> {
    match scheme {
        MeasurementScheme::Structured(p) => {
            let mut effects = Vec::with_capacity(p.total_vectors());
            let mut data = Vec::with_capacity(p.total_vectors());
            let scale = Complex64::new(p.d() as f64 / p.total_vectors() as f64, 0.0);
            for s in 0..p.settings() {
                for o in 0..p.vectors_per_setting() {
                    effects.push(outer_product(p.vector(s, o)) * scale);
                    data.push(f.setting(s)[o] * f.weight(s));
                }
            }
            Ok((effects, data))
        }
        MeasurementScheme::PauliObservables(p) => {
            let d = p.d();
            let mut effects = vec![CMatrix::identity(d, d), CMatrix::zeros(d, d)];
            let mut data = vec![1.0, 0.0]; // identity word observed deterministically
            for s in 0..p.settings() {
                let [plus, minus] = p.effects(s);
                effects.push(plus);
                effects.push(minus);
                data.push(f.setting(s)[0]);
                data.push(f.setting(s)[1]);
            }
            Ok((effects, data))
        }
        MeasurementScheme::PauliBasis(p) => {
            let mut effects = Vec::new();
            let mut data = Vec::new();
            for s in 0..p.settings() {
                for o in 0..p.outcomes() {
                    effects.push(p.effect(s, o));
                    data.push(f.setting(s)[o]);
                }
            }
            Ok((effects, data))
        }
        MeasurementScheme::Uniform { .. } => Err(Error::Domain(
            "the uniform POVM has no discrete effect list".into(),
        )),
    }
}

/// Result of projecting a raw inversion onto the density matrices.
#[derive(Debug, Clone)]
pub struct PlsEstimate {
    pub state: DensityMatrix,
    /// Soft threshold subtracted from every eigenvalue before clipping at 0.
    pub x0: f64,
}

/// Threshold x₀ with Σ_i max(λ_i − x₀, 0) = 1 for eigenvalues sorted
/// non-increasing: scan for the largest j with λ_j > (Σ_{i≤j} λ_i − 1)/j.
pub fn simplex_threshold(sorted_eigenvalues: &[f64]) -> f64 {
    let mut cumulative = 0.0;
    let mut x0 = 0.0;
    for (j, &l) in sorted_eigenvalues.iter().enumerate() {
        cumulative += l;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if l > candidate {
            x0 = candidate;
        }
    }
    x0
}

/// Frobenius-nearest density matrix: eigendecompose, subtract x₀, clip at 0.
pub fn project_to_states(l: &LinearInversionEstimate) -> Result<PlsEstimate> {
    let trace = l.matrix.trace();
    if (trace - 1.0).abs() > 1e-8 {
        return Err(Error::TraceNotOne { trace, tol: 1e-8 });
    }
    let eig = l.matrix.eigh()?;
    let x0 = simplex_threshold(eig.eigenvalues());
    let spectrum: Vec<f64> = eig
        .eigenvalues()
        .iter()
        .map(|&v| (v - x0).max(0.0))
        .collect();
    let mat = HermitianMatrix::from_hermitian_unchecked(eig.reconstruct_with(&spectrum));
    Ok(PlsEstimate {
        state: DensityMatrix::from_parts_unchecked(mat, spectrum),
        x0,
    })
}

/// Everything produced by one tomography run.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub record: TrialRecord,
    pub l_hat: LinearInversionEstimate,
    pub pls: PlsEstimate,
}

/// Simulate → invert → project for a single trial. Shots are split equally
/// over the settings (remainder to the lowest indices); the uniform POVM
/// draws n individual outcome vectors instead.
pub fn pls_pipeline(
    rho: &DensityMatrix,
    scheme: &MeasurementScheme,
    n: u64,
    seed: u64,
) -> Result<PipelineOutput> {
    let start = Instant::now();
    let l_hat = match scheme {
        MeasurementScheme::Uniform { .. } => {
            if rho.dim() != scheme.d() {
                return Err(Error::DimensionMismatch(rho.dim(), scheme.d()));
            }
            let sample = sample_uniform_povm(rho, n as usize, seed)?;
            ls_uniform(&sample)?
        }
        _ => {
            let settings = scheme.settings() as u64;
            if n < settings {
                return Err(Error::Config(format!(
                    "n = {n} cannot give every one of {settings} settings a shot"
                )));
            }
            let table = born_probabilities(rho, scheme)?;
            let shots = allocate_shots(n, scheme.settings());
            let counts = sample_counts_allocated(&table, &shots, seed);
            let f = FrequencyVector::from_counts(&counts)?;
            ls_estimate(scheme, &f)?
        }
    };
    finish_pipeline(rho, l_hat, seed, start)
}

/// Infinite-sample shortcut: frequencies equal to the exact Born
/// probabilities. Not available for the continuous uniform POVM.
pub fn pls_pipeline_exact(rho: &DensityMatrix, scheme: &MeasurementScheme) -> Result<PipelineOutput> {
    let start = Instant::now();
    let table = born_probabilities(rho, scheme)?;
    let f = FrequencyVector::exact(&table);
    let l_hat = ls_estimate(scheme, &f)?;
    finish_pipeline(rho, l_hat, 0, start)
}

fn finish_pipeline(
    rho: &DensityMatrix,
    l_hat: LinearInversionEstimate,
    seed: u64,
    start: Instant,
) -> Result<PipelineOutput> {
    let projection_start = Instant::now();
    let pls = project_to_states(&l_hat)?;
    let projection_time = projection_start.elapsed();

    let d = rho.dim();
    let op_error_l = l_hat.matrix.operator_norm_distance(rho.hermitian())?;
    let diff_rho = pls.state.hermitian().sub(rho.hermitian())?;
    let trace_error = diff_rho.trace_norm()?;
    let op_error_rho = diff_rho.operator_norm()?;
    let sigma_true: Vec<f64> = (1..=d).map(|r| rho.rank_residual(r).unwrap()).collect();
    let sigma_est: Vec<f64> = (1..=d)
        .map(|r| pls.state.rank_residual(r).unwrap())
        .collect();
    let rank_estimate = pls.state.rank();
    let radius_delta05 = match l_hat.kind {
        SchemeKind::Uniform => f64::NAN,
        kind if l_hat.n > 0 => confidence_radius(
            &BoundParams::for_scheme(kind, d, l_hat.n as f64, 1, 0.0, 0.05)?,
            rank_estimate.max(1),
        )?,
        _ => f64::INFINITY,
    };
    let runtime = start.elapsed();
    let record = TrialRecord {
        scheme: l_hat.kind,
        d,
        r_true: rho.rank(),
        n: l_hat.n,
        seed,
        trace_error,
        op_error_l,
        op_error_rho,
        x0: pls.x0,
        rank_estimate,
        sigma_true,
        sigma_est,
        radius_delta05,
        runtime_ms: runtime.as_secs_f64() * 1e3,
        projection_fraction: if runtime.as_secs_f64() > 0.0 {
            projection_time.as_secs_f64() / runtime.as_secs_f64()
        } else {
            0.0
        },
    };
    Ok(PipelineOutput {
        record,
        l_hat,
        pls,
    })
}
