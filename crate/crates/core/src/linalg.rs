//! Dense complex/Hermitian matrix arithmetic: eigendecompositions, norms,
//! rank truncation, and random state generation. Everything downstream
//! (schemes, simulation, estimators, bounds) is built on this module.
//!
//! Matrices are dense `nalgebra` storage with `Complex64` entries; target
//! dimensions are small (d ≤ 128), so no sparse or factored formats.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Default absolute tolerance for equality checks (two orders above
/// double-precision eigensolver noise at d = 128).
pub const DEFAULT_TOL: f64 = 1e-10;

/// Eigenvalues below this threshold count as zero when ranking states.
pub const RANK_TOL: f64 = 1e-10;

const EIGH_MAX_ITER: usize = 100_000;

/// |v⟩⟨v| for a (not necessarily normalized) vector.
pub fn outer_product(v: &CVector) -> CMatrix {
    let d = v.len();
    CMatrix::from_fn(d, d, |i, j| v[i] * v[j].conj())
}

/// Kronecker product a ⊗ b (a's indices are most significant).
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Real part of ⟨v|X|v⟩. Exact for Hermitian X and the only part that matters there.
pub fn expect_real(x: &CMatrix, v: &CVector) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..x.ncols() {
        let mut col = Complex64::new(0.0, 0.0);
        for i in 0..x.nrows() {
            col += v[i].conj() * x[(i, j)];
        }
        acc += col * v[j];
    }
    acc.re
}

/// One standard complex Gaussian: two independent real normals scaled by 1/√2,
/// so that normalized Gaussian vectors are Haar-distributed.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-random unit vector in dimension d.
pub fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVector {
    loop {
        let v = CVector::from_fn(d, |_, _| complex_gaussian(rng));
        let norm = v.norm();
        if norm > 1e-6 {
            return v / Complex64::new(norm, 0.0);
        }
    }
}

fn check_finite(m: &CMatrix) -> Result<()> {
    if m.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// A d×d Hermitian matrix. Construction symmetrizes (A + A†)/2 to absorb
/// accumulated floating-point asymmetry rather than rejecting it.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    mat: CMatrix,
}

impl HermitianMatrix {
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::NotSquare(mat.nrows(), mat.ncols()));
        }
        check_finite(&mat)?;
        let sym = (&mat + mat.adjoint()) * Complex64::new(0.5, 0.0);
        Ok(Self { mat: sym })
    }

    /// Wrap a matrix that is Hermitian by construction.
    pub(crate) fn from_hermitian_unchecked(mat: CMatrix) -> Self {
        debug_assert_eq!(mat.nrows(), mat.ncols());
        Self { mat }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            mat: CMatrix::zeros(d, d),
        }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            mat: CMatrix::identity(d, d),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        Self {
            mat: CMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    Complex64::new(diag[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    /// tr(A); real because A is Hermitian.
    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            mat: &self.mat * Complex64::new(s, 0.0),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self {
            mat: &self.mat + &other.mat,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self {
            mat: &self.mat - &other.mat,
        })
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            Err(Error::DimensionMismatch(self.dim(), other.dim()))
        } else {
            Ok(())
        }
    }

    /// Eigendecomposition with eigenvalues sorted non-increasing and
    /// orthonormal eigenvector columns paired to them.
    pub fn eigh(&self) -> Result<EigenDecomposition> {
        let d = self.dim();
        let se = self
            .mat
            .clone()
            .try_symmetric_eigen(f64::EPSILON, EIGH_MAX_ITER)
            .ok_or(Error::EigenConvergence {
                dim: d,
                max_iter: EIGH_MAX_ITER,
            })?;
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
        let eigenvectors = CMatrix::from_fn(d, d, |i, j| se.eigenvectors[(i, order[j])]);
        Ok(EigenDecomposition {
            eigenvalues,
            eigenvectors,
        })
    }

    /// Max absolute eigenvalue ‖A‖∞.
    pub fn operator_norm(&self) -> Result<f64> {
        let eig = self.eigh()?;
        Ok(eig
            .eigenvalues
            .iter()
            .fold(0.0_f64, |m, &x| m.max(x.abs())))
    }

    /// Sum of absolute eigenvalues ‖A‖₁.
    pub fn trace_norm(&self) -> Result<f64> {
        let eig = self.eigh()?;
        Ok(eig.eigenvalues.iter().map(|x| x.abs()).sum())
    }

    /// ‖A − B‖₁.
    pub fn trace_norm_distance(&self, other: &Self) -> Result<f64> {
        self.sub(other)?.trace_norm()
    }

    /// ‖A − B‖∞.
    pub fn operator_norm_distance(&self, other: &Self) -> Result<f64> {
        self.sub(other)?.operator_norm()
    }

    /// ‖A − B‖₂ = sqrt(Σ |a_ij − b_ij|²).
    pub fn frobenius_distance(&self, other: &Self) -> Result<f64> {
        self.check_same_dim(other)?;
        Ok((&self.mat - &other.mat).norm())
    }
}

/// Eigendecomposition A = U diag(λ) U† with λ non-increasing.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

impl EigenDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Column i as an owned vector.
    pub fn eigenvector(&self, i: usize) -> CVector {
        self.eigenvectors.column(i).into_owned()
    }

    /// U diag(λ) U†.
    pub fn reconstruct(&self) -> CMatrix {
        self.reconstruct_with(&self.eigenvalues)
    }

    /// U diag(values) U† for a replacement spectrum in the same basis.
    pub fn reconstruct_with(&self, values: &[f64]) -> CMatrix {
        let d = self.dim();
        assert_eq!(values.len(), d);
        let mut scaled = self.eigenvectors.clone();
        for (j, &v) in values.iter().enumerate() {
            let mut col = scaled.column_mut(j);
            col *= Complex64::new(v, 0.0);
        }
        &scaled * self.eigenvectors.adjoint()
    }
}

/// Hermitian, positive semidefinite, unit trace. The eigenvalues (sorted
/// non-increasing) are validated at construction and cached.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mat: HermitianMatrix,
    eigenvalues: Vec<f64>,
}

impl DensityMatrix {
    pub fn new(mat: HermitianMatrix) -> Result<Self> {
        Self::new_with_tol(mat, DEFAULT_TOL)
    }

    pub fn new_with_tol(mat: HermitianMatrix, tol: f64) -> Result<Self> {
        let eig = mat.eigh()?;
        let min = *eig.eigenvalues.last().unwrap_or(&0.0);
        if min < -tol {
            return Err(Error::NotAState(format!("minimum eigenvalue {min:.3e}")));
        }
        let trace: f64 = eig.eigenvalues.iter().sum();
        if (trace - 1.0).abs() > tol {
            return Err(Error::NotAState(format!("trace {trace}")));
        }
        Ok(Self {
            mat,
            eigenvalues: eig.eigenvalues,
        })
    }

    pub(crate) fn from_parts_unchecked(mat: HermitianMatrix, eigenvalues: Vec<f64>) -> Self {
        Self { mat, eigenvalues }
    }

    /// |ψ⟩⟨ψ| for a vector that is normalized here.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::NonFinite);
        }
        let v = psi / Complex64::new(norm, 0.0);
        let mut eigenvalues = vec![0.0; psi.len()];
        eigenvalues[0] = 1.0;
        Ok(Self {
            mat: HermitianMatrix::from_hermitian_unchecked(outer_product(&v)),
            eigenvalues,
        })
    }

    /// I/d.
    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            mat: HermitianMatrix::identity(d).scale(1.0 / d as f64),
            eigenvalues: vec![1.0 / d as f64; d],
        }
    }

    /// Rank-1 projector onto a Haar-random unit vector.
    pub fn random_pure(d: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, &[]);
        let v = random_unit_vector(d, &mut rng);
        Self::pure(&v).expect("normalized vector")
    }

    /// ρ = G G† / tr(G G†) with G a d×r complex Ginibre matrix; rank r almost surely.
    pub fn random_rank(d: usize, r: usize, seed: u64) -> Result<Self> {
        if r < 1 || r > d {
            return Err(Error::RankOutOfRange { r, d });
        }
        let mut rng = stream_rng(seed, &[]);
        let g = CMatrix::from_fn(d, r, |_, _| complex_gaussian(&mut rng));
        let gram = &g * g.adjoint();
        let trace = gram.trace().re;
        let mat = HermitianMatrix::new(gram / Complex64::new(trace, 0.0))?;
        Self::new(mat)
    }

    /// (1 − p)·ρ + (p/d)·I — the output of a preparation device that fails
    /// into the maximally mixed state with probability p.
    pub fn depolarize(&self, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("mixing probability {p} not in [0, 1]")));
        }
        let d = self.dim();
        let mat = self
            .mat
            .scale(1.0 - p)
            .add(&HermitianMatrix::identity(d).scale(p / d as f64))?;
        let mut eigenvalues: Vec<f64> = self
            .eigenvalues
            .iter()
            .map(|l| (1.0 - p) * l + p / d as f64)
            .collect();
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { mat, eigenvalues })
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn hermitian(&self) -> &HermitianMatrix {
        &self.mat
    }

    pub fn matrix(&self) -> &CMatrix {
        self.mat.matrix()
    }

    /// Spectrum sorted non-increasing, as validated at construction.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Number of eigenvalues above the rank threshold.
    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| l > RANK_TOL).count()
    }

    /// σ_r(ρ) = Σ_{i>r} λ_i, the trace-norm residual of the best rank-r truncation.
    pub fn rank_residual(&self, r: usize) -> Result<f64> {
        let d = self.dim();
        if r < 1 || r > d {
            return Err(Error::RankOutOfRange { r, d });
        }
        Ok(self.eigenvalues[r..].iter().sum::<f64>().max(0.0))
    }

    pub fn trace_norm_distance(&self, other: &Self) -> Result<f64> {
        self.mat.trace_norm_distance(&other.mat)
    }

    pub fn frobenius_distance(&self, other: &Self) -> Result<f64> {
        self.mat.frobenius_distance(&other.mat)
    }
}

// --- matrix text format -----------------------------------------------------
//
// First line "d <rows> <cols>", then one row-major line per entry: "re im".

pub fn write_matrix_text<W: std::io::Write>(m: &CMatrix, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "d {} {}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let c = m[(i, j)];
            writeln!(w, "{} {}", c.re, c.im)?;
        }
    }
    Ok(())
}

pub fn read_matrix_text<R: std::io::BufRead>(r: R, origin: &str) -> Result<CMatrix> {
    let parse_err = |message: String| Error::Parse {
        path: origin.to_string(),
        message,
    };
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err("empty input".into()))?
        .map_err(|e| Error::io(origin, e))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != "d" {
        return Err(parse_err(format!("bad header {header:?}, expected \"d <rows> <cols>\"")));
    }
    let rows: usize = fields[1]
        .parse()
        .map_err(|_| parse_err(format!("bad row count {:?}", fields[1])))?;
    let cols: usize = fields[2]
        .parse()
        .map_err(|_| parse_err(format!("bad column count {:?}", fields[2])))?;
    let mut entries = Vec::with_capacity(rows * cols);
    for line in lines {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(parse_err(format!("expected \"re im\", got {line:?}")));
        }
        let re: f64 = parts[0]
            .parse()
            .map_err(|_| parse_err(format!("bad float {:?}", parts[0])))?;
        let im: f64 = parts[1]
            .parse()
            .map_err(|_| parse_err(format!("bad float {:?}", parts[1])))?;
        entries.push(Complex64::new(re, im));
    }
    if entries.len() != rows * cols {
        return Err(parse_err(format!(
            "expected {} entries, found {}",
            rows * cols,
            entries.len()
        )));
    }
    Ok(CMatrix::from_row_slice(rows, cols, &entries))
}

pub fn write_matrix_file(m: &CMatrix, path: &std::path::Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?,
    );
    write_matrix_text(m, &mut f).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_matrix_file(path: &std::path::Path) -> Result<CMatrix> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    read_matrix_text(std::io::BufReader::new(f), &path.display().to_string())
}

/// Random Hermitian matrix with Gaussian entries, for tests and oracles.
pub fn random_hermitian(d: usize, seed: u64) -> HermitianMatrix {
    let mut rng = stream_rng(seed, &[]);
    let g = CMatrix::from_fn(d, d, |_, _| complex_gaussian(&mut rng));
    HermitianMatrix::new(g).expect("finite by construction")
}
