//! The four measurement families: structured rank-one POVMs (mutually
//! unbiased bases or imported vector sets), Pauli observables, Pauli basis
//! measurements, and the continuous uniform POVM.
//!
//! Schemes are immutable after construction. Effects are produced lazily per
//! setting so memory stays O(d²) regardless of how many settings exist.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{kron, outer_product, CMatrix, CVector, HermitianMatrix};

/// Which measurement family a scheme belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Structured,
    PauliObservables,
    PauliBasis,
    Uniform,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SchemeKind::Structured => "structured",
            SchemeKind::PauliObservables => "pauli-obs",
            SchemeKind::PauliBasis => "pauli-basis",
            SchemeKind::Uniform => "uniform",
        };
        f.write_str(s)
    }
}

/// Single-qubit Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn from_digit(digit: usize) -> Self {
        match digit {
            0 => Pauli::I,
            1 => Pauli::X,
            2 => Pauli::Y,
            _ => Pauli::Z,
        }
    }

    fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// A k-fold tensor product of elementary Pauli matrices, stored as its
/// letter string. `letters[0]` acts on the most significant bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PauliWord {
    letters: Vec<Pauli>,
}

impl PauliWord {
    pub fn new(letters: Vec<Pauli>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::Domain("empty Pauli word".into()));
        }
        Ok(Self { letters })
    }

    pub fn parse(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| match c {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::Domain(format!("invalid Pauli letter {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(letters)
    }

    /// Word at `index` in the lexicographic order over {I,X,Y,Z}^k
    /// (index 0 is the all-identity word).
    pub fn from_index(k: usize, index: usize) -> Self {
        let mut letters = vec![Pauli::I; k];
        let mut rest = index;
        for j in (0..k).rev() {
            letters[j] = Pauli::from_digit(rest % 4);
            rest /= 4;
        }
        Self { letters }
    }

    pub fn qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn dim(&self) -> usize {
        1 << self.letters.len()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|&l| l == Pauli::I)
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    /// The dense 2^k × 2^k matrix. Each row has exactly one nonzero entry:
    /// column `row XOR flip_mask` with a per-qubit phase.
    pub fn matrix(&self) -> HermitianMatrix {
        let k = self.qubits();
        let d = self.dim();
        let mut m = CMatrix::zeros(d, d);
        for row in 0..d {
            let (col, phase) = self.row_action(row);
            m[(row, col)] = phase;
        }
        debug_assert_eq!(k, self.letters.len());
        HermitianMatrix::from_hermitian_unchecked(m)
    }

    /// For a given row index, the unique column with a nonzero entry and its value.
    fn row_action(&self, row: usize) -> (usize, Complex64) {
        let k = self.qubits();
        let mut col = row;
        let mut phase = Complex64::new(1.0, 0.0);
        for (j, &letter) in self.letters.iter().enumerate() {
            let mask = 1usize << (k - 1 - j);
            let bit = row & mask != 0;
            match letter {
                Pauli::I => {}
                Pauli::X => col ^= mask,
                Pauli::Y => {
                    col ^= mask;
                    // σ_y[0,1] = −i, σ_y[1,0] = i
                    phase *= if bit {
                        Complex64::new(0.0, 1.0)
                    } else {
                        Complex64::new(0.0, -1.0)
                    };
                }
                Pauli::Z => {
                    if bit {
                        phase = -phase;
                    }
                }
            }
        }
        (col, phase)
    }

    /// tr(W ρ) using the one-nonzero-per-row structure; O(d) instead of O(d²).
    pub fn expectation(&self, rho: &CMatrix) -> f64 {
        let d = self.dim();
        debug_assert_eq!(rho.nrows(), d);
        let mut acc = Complex64::new(0.0, 0.0);
        for row in 0..d {
            let (col, phase) = self.row_action(row);
            acc += phase * rho[(col, row)];
        }
        acc.re
    }
}

impl fmt::Display for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &l in &self.letters {
            write!(f, "{}", l.as_char())?;
        }
        Ok(())
    }
}

// --- structured POVMs --------------------------------------------------------

/// A rank-one POVM {(d/m)|v_i⟩⟨v_i|} whose m unit vectors are grouped into
/// equally sized settings, each of which resolves the identity on its own.
#[derive(Debug, Clone)]
pub struct StructuredPovm {
    d: usize,
    settings: usize,
    vectors: Vec<CVector>,
}

impl StructuredPovm {
    pub fn new(d: usize, settings: usize, vectors: Vec<CVector>) -> Result<Self> {
        let m = vectors.len();
        if m == 0 || settings == 0 || !m.is_multiple_of(settings) {
            return Err(Error::Config(format!(
                "{m} vectors cannot be split into {settings} equal settings"
            )));
        }
        let per = m / settings;
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != d {
                return Err(Error::DimensionMismatch(d, v.len()));
            }
            if (v.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "vector {i} has norm {}, expected 1 within 1e-12",
                    v.norm()
                )));
            }
        }
        // each setting must resolve the identity: (d/per)·Σ_s |v⟩⟨v| = I
        for s in 0..settings {
            let mut sum = CMatrix::zeros(d, d);
            for v in &vectors[s * per..(s + 1) * per] {
                sum += outer_product(v);
            }
            sum *= Complex64::new(d as f64 / per as f64, 0.0);
            let dev = (&sum - CMatrix::identity(d, d))
                .iter()
                .fold(0.0_f64, |a, c| a.max(c.norm()));
            if dev > 1e-10 {
                return Err(Error::Config(format!(
                    "setting {s}: effects sum deviates from identity by {dev:.3e}"
                )));
            }
        }
        Ok(Self {
            d,
            settings,
            vectors,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn settings(&self) -> usize {
        self.settings
    }

    pub fn vectors_per_setting(&self) -> usize {
        self.vectors.len() / self.settings
    }

    pub fn total_vectors(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[CVector] {
        &self.vectors
    }

    pub fn vector(&self, setting: usize, outcome: usize) -> &CVector {
        &self.vectors[setting * self.vectors_per_setting() + outcome]
    }

    /// POVM effect for one outcome of one setting: (d/per)|v⟩⟨v|.
    pub fn effect(&self, setting: usize, outcome: usize) -> CMatrix {
        let scale = self.d as f64 / self.vectors_per_setting() as f64;
        outer_product(self.vector(setting, outcome)) * Complex64::new(scale, 0.0)
    }

    /// 2-design deviation of the vector set; the gatekeeper for using the
    /// closed-form inversion on imported vector sets.
    pub fn verify_design(&self) -> Result<DesignCheck> {
        verify_2design(&self.vectors)
    }
}

/// Result of the 2-design test.
#[derive(Debug, Clone, Copy)]
pub struct DesignCheck {
    pub max_deviation: f64,
    pub pass: bool,
}

/// ‖(1/m)·Σ (|v⟩⟨v|)⊗(|v⟩⟨v|) − P_sym / C(d+1,2)‖∞, pass iff ≤ 1e-9.
pub fn verify_2design(vectors: &[CVector]) -> Result<DesignCheck> {
    let d = match vectors.first() {
        Some(v) => v.len(),
        None => return Err(Error::Config("empty vector set".into())),
    };
    for v in vectors {
        if v.len() != d {
            return Err(Error::DimensionMismatch(d, v.len()));
        }
    }
    let m = vectors.len() as f64;
    let dd = d * d;
    let mut second_moment = CMatrix::zeros(dd, dd);
    for v in vectors {
        let p = outer_product(v);
        second_moment += kron(&p, &p);
    }
    second_moment /= Complex64::new(m, 0.0);

    // P_sym = (I + F)/2 with F the flip operator F|x⟩⊗|y⟩ = |y⟩⊗|x⟩
    let dim_sym = d as f64 * (d as f64 + 1.0) / 2.0;
    let mut target = CMatrix::zeros(dd, dd);
    for a in 0..d {
        for b in 0..d {
            let row = a * d + b;
            target[(row, row)] += Complex64::new(0.5 / dim_sym, 0.0);
            target[(row, b * d + a)] += Complex64::new(0.5 / dim_sym, 0.0);
        }
    }
    let max_deviation = HermitianMatrix::new(second_moment - target)?.operator_norm()?;
    Ok(DesignCheck {
        max_deviation,
        pass: max_deviation <= 1e-9,
    })
}

fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut k = 2;
    while k * k <= n {
        if n.is_multiple_of(k) {
            return false;
        }
        k += 1;
    }
    true
}

/// Maximal set of d+1 mutually unbiased bases in prime dimension d,
/// ordered computational basis first. For odd primes, basis a has vectors
/// with components ω^(a·k² + b·k)/√d, ω = exp(2πi/d); d = 2 uses the
/// σ_z, σ_x, σ_y eigenbases.
pub fn build_mub_scheme(d: usize, include_computational: bool) -> Result<StructuredPovm> {
    if !is_prime(d) {
        return Err(Error::UnsupportedDimension {
            d,
            constraint: "mutually unbiased bases require a prime dimension here",
        });
    }
    let mut vectors: Vec<CVector> = Vec::new();
    if include_computational {
        for b in 0..d {
            vectors.push(CVector::from_fn(d, |i, _| {
                if i == b {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }));
        }
    }
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    if d == 2 {
        // σ_x then σ_y eigenbases
        let half = Complex64::new(inv_sqrt_d, 0.0);
        for signs in [
            [Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)],
            [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)],
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0)],
        ] {
            vectors.push(CVector::from_fn(2, |i, _| half * signs[i]));
        }
    } else {
        for a in 0..d as u64 {
            for b in 0..d as u64 {
                vectors.push(CVector::from_fn(d, |i, _| {
                    let k = i as u64;
                    let exponent = (a * k % d as u64 * k + b * k) % d as u64;
                    let angle = 2.0 * std::f64::consts::PI * exponent as f64 / d as f64;
                    Complex64::from_polar(inv_sqrt_d, angle)
                }));
            }
        }
    }
    let settings = if include_computational { d + 1 } else { d };
    StructuredPovm::new(d, settings, vectors)
}

// --- Pauli observables --------------------------------------------------------

/// All d² Pauli words on k qubits, each non-identity word measured through
/// its two-outcome POVM P± = (I ± W)/2. The identity word consumes no shots.
#[derive(Debug, Clone)]
pub struct PauliObservableScheme {
    qubits: usize,
    words: Vec<PauliWord>,
}

impl PauliObservableScheme {
    pub fn new(qubits: usize) -> Result<Self> {
        if qubits == 0 {
            return Err(Error::Domain("qubit count must be at least 1".into()));
        }
        if qubits > 8 {
            return Err(Error::UnsupportedDimension {
                d: 1 << qubits,
                constraint: "Pauli observable schemes are capped at 8 qubits",
            });
        }
        let count = 1usize << (2 * qubits);
        let words = (0..count).map(|i| PauliWord::from_index(qubits, i)).collect();
        Ok(Self { qubits, words })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn d(&self) -> usize {
        1 << self.qubits
    }

    /// Number of sampled settings: one per non-identity word.
    pub fn settings(&self) -> usize {
        self.words.len() - 1
    }

    pub fn words(&self) -> &[PauliWord] {
        &self.words
    }

    /// Word measured in a given setting (settings skip the identity word).
    pub fn word_for_setting(&self, setting: usize) -> &PauliWord {
        &self.words[setting + 1]
    }

    /// The two effects (I ± W)/2 of a setting, + outcome first.
    pub fn effects(&self, setting: usize) -> [CMatrix; 2] {
        let d = self.d();
        let w = self.word_for_setting(setting).matrix();
        let id = CMatrix::identity(d, d);
        let half = Complex64::new(0.5, 0.0);
        [
            (&id + w.matrix()) * half,
            (&id - w.matrix()) * half,
        ]
    }
}

// --- Pauli basis measurements ---------------------------------------------------

///, one basis measurement per setting string in {x,y,z}^k; outcome vectors
/// are tensor products of single-qubit eigenvectors, built on demand.
#[derive(Debug, Clone)]
pub struct PauliBasisScheme {
    qubits: usize,
}

/// Single-qubit measurement axes, ordered x < y < z for setting enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn from_digit(digit: usize) -> Self {
        match digit {
            0 => Axis::X,
            1 => Axis::Y,
            _ => Axis::Z,
        }
    }

    fn as_char(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }
}

/// Normalized eigenvector of the single-qubit Pauli along `axis`;
/// `plus` selects the +1 eigenvalue.
pub fn qubit_basis_vector(axis: Axis, plus: bool) -> [Complex64; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match (axis, plus) {
        (Axis::X, true) => [Complex64::new(h, 0.0), Complex64::new(h, 0.0)],
        (Axis::X, false) => [Complex64::new(h, 0.0), Complex64::new(-h, 0.0)],
        (Axis::Y, true) => [Complex64::new(h, 0.0), Complex64::new(0.0, h)],
        (Axis::Y, false) => [Complex64::new(h, 0.0), Complex64::new(0.0, -h)],
        (Axis::Z, true) => [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        (Axis::Z, false) => [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
    }
}

impl PauliBasisScheme {
    pub fn new(qubits: usize) -> Result<Self> {
        if qubits == 0 {
            return Err(Error::Domain("qubit count must be at least 1".into()));
        }
        if qubits > 16 {
            return Err(Error::UnsupportedDimension {
                d: 0,
                constraint: "Pauli basis schemes are capped at 16 qubits",
            });
        }
        Ok(Self { qubits })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn d(&self) -> usize {
        1 << self.qubits
    }

    /// 3^k settings.
    pub fn settings(&self) -> usize {
        3usize.pow(self.qubits as u32)
    }

    pub fn outcomes(&self) -> usize {
        self.d()
    }

    /// Axes of a setting index, most significant digit first (lexicographic
    /// enumeration in x < y < z).
    pub fn setting_axes(&self, setting: usize) -> Vec<Axis> {
        let mut axes = vec![Axis::X; self.qubits];
        let mut rest = setting;
        for j in (0..self.qubits).rev() {
            axes[j] = Axis::from_digit(rest % 3);
            rest /= 3;
        }
        axes
    }

    pub fn setting_label(&self, setting: usize) -> String {
        self.setting_axes(setting).iter().map(|a| a.as_char()).collect()
    }

    /// |b^(s)_o⟩: tensor product of single-qubit eigenvectors. Outcome bit 0
    /// (most significant side) belongs to qubit 0; a 0 bit means +.
    pub fn basis_vector(&self, setting: usize, outcome: usize) -> CVector {
        let k = self.qubits;
        let d = self.d();
        let axes = self.setting_axes(setting);
        let factors: Vec<[Complex64; 2]> = (0..k)
            .map(|j| {
                let plus = outcome & (1 << (k - 1 - j)) == 0;
                qubit_basis_vector(axes[j], plus)
            })
            .collect();
        CVector::from_fn(d, |r, _| {
            let mut amp = Complex64::new(1.0, 0.0);
            for (j, f) in factors.iter().enumerate() {
                let bit = (r >> (k - 1 - j)) & 1;
                amp *= f[bit];
            }
            amp
        })
    }

    /// Projective effect |b^(s)_o⟩⟨b^(s)_o|.
    pub fn effect(&self, setting: usize, outcome: usize) -> CMatrix {
        outer_product(&self.basis_vector(setting, outcome))
    }
}

// --- depolarizing channels -------------------------------------------------------

fn check_power_of_two(d: usize) -> Result<usize> {
    if d == 0 || d & (d - 1) != 0 {
        return Err(Error::UnsupportedDimension {
            d,
            constraint: "dimension must be a power of 2",
        });
    }
    Ok(d.trailing_zeros() as usize)
}

/// (tr_j X) ⊗_j I embedded back at qubit j's position.
fn embed_partial_trace(x: &CMatrix, k: usize, j: usize) -> CMatrix {
    let d = x.nrows();
    let mask = 1usize << (k - 1 - j);
    CMatrix::from_fn(d, d, |r, c| {
        if r & mask == c & mask {
            x[(r & !mask, c & !mask)] + x[(r | mask, c | mask)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Apply the single-qubit depolarizing channel D_p(X) = pX + (1−p)/2·tr(X)·I
/// on every qubit of a k-qubit matrix (the tensor power D_p^{⊗k}).
pub fn depolarizing_apply(x: &HermitianMatrix, p: f64) -> Result<HermitianMatrix> {
    let k = check_power_of_two(x.dim())?;
    let mut m = x.matrix().clone();
    for j in 0..k {
        let traced = embed_partial_trace(&m, k, j);
        m = m * Complex64::new(p, 0.0) + traced * Complex64::new((1.0 - p) / 2.0, 0.0);
    }
    Ok(HermitianMatrix::from_hermitian_unchecked(m))
}

/// Inverse of D_{1/3}^{⊗k}: per qubit, X ↦ 3X − tr_j(X) ⊗_j I.
pub fn depolarizing_inverse_apply(x: &HermitianMatrix) -> Result<HermitianMatrix> {
    let k = check_power_of_two(x.dim())?;
    let mut m = x.matrix().clone();
    for j in 0..k {
        let traced = embed_partial_trace(&m, k, j);
        m = m * Complex64::new(3.0, 0.0) - traced;
    }
    Ok(HermitianMatrix::from_hermitian_unchecked(m))
}

// --- unified scheme ------------------------------------------------------------

/// A tagged measurement scheme; the payload carries everything needed to
/// enumerate settings and effects (except for the continuous uniform POVM,
/// which has its own sampling path).
#[derive(Debug, Clone)]
pub enum MeasurementScheme {
    Structured(StructuredPovm),
    PauliObservables(PauliObservableScheme),
    PauliBasis(PauliBasisScheme),
    Uniform { d: usize },
}

impl MeasurementScheme {
    /// Full set of d+1 mutually unbiased bases (d prime).
    pub fn mub(d: usize) -> Result<Self> {
        Ok(Self::Structured(build_mub_scheme(d, true)?))
    }

    pub fn pauli_observables(k: usize) -> Result<Self> {
        Ok(Self::PauliObservables(PauliObservableScheme::new(k)?))
    }

    pub fn pauli_basis(k: usize) -> Result<Self> {
        Ok(Self::PauliBasis(PauliBasisScheme::new(k)?))
    }

    pub fn uniform(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        Ok(Self::Uniform { d })
    }

    pub fn kind(&self) -> SchemeKind {
        match self {
            Self::Structured(_) => SchemeKind::Structured,
            Self::PauliObservables(_) => SchemeKind::PauliObservables,
            Self::PauliBasis(_) => SchemeKind::PauliBasis,
            Self::Uniform { .. } => SchemeKind::Uniform,
        }
    }

    pub fn d(&self) -> usize {
        match self {
            Self::Structured(s) => s.d(),
            Self::PauliObservables(s) => s.d(),
            Self::PauliBasis(s) => s.d(),
            Self::Uniform { d } => *d,
        }
    }

    /// Number of discrete settings; 0 for the uniform POVM (continuous).
    pub fn settings(&self) -> usize {
        match self {
            Self::Structured(s) => s.settings(),
            Self::PauliObservables(s) => s.settings(),
            Self::PauliBasis(s) => s.settings(),
            Self::Uniform { .. } => 0,
        }
    }

    pub fn outcomes_per_setting(&self) -> usize {
        match self {
            Self::Structured(s) => s.vectors_per_setting(),
            Self::PauliObservables(_) => 2,
            Self::PauliBasis(s) => s.outcomes(),
            Self::Uniform { .. } => 0,
        }
    }

    /// Materialized effects of one setting.
    pub fn setting_effects(&self, setting: usize) -> Result<Vec<CMatrix>> {
        match self {
            Self::Structured(s) => Ok((0..s.vectors_per_setting())
                .map(|o| s.effect(setting, o))
                .collect()),
            Self::PauliObservables(s) => Ok(s.effects(setting).into_iter().collect()),
            Self::PauliBasis(s) => Ok((0..s.outcomes()).map(|o| s.effect(setting, o)).collect()),
            Self::Uniform { .. } => Err(Error::Domain(
                "the uniform POVM has no discrete effects".into(),
            )),
        }
    }
}

// --- vector-set import -----------------------------------------------------------
//
// Line 1: "d m settings" (three integers); then m lines of 2d floats with
// re/im interleaved.

pub fn read_vector_set<R: std::io::BufRead>(r: R, origin: &str) -> Result<(usize, usize, Vec<CVector>)> {
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
    if fields.len() != 3 {
        return Err(parse_err(format!(
            "bad header {header:?}, expected \"d m settings\""
        )));
    }
    let d: usize = fields[0]
        .parse()
        .map_err(|_| parse_err(format!("bad dimension {:?}", fields[0])))?;
    let m: usize = fields[1]
        .parse()
        .map_err(|_| parse_err(format!("bad vector count {:?}", fields[1])))?;
    let settings: usize = fields[2]
        .parse()
        .map_err(|_| parse_err(format!("bad setting count {:?}", fields[2])))?;
    let mut vectors = Vec::with_capacity(m);
    for line in lines {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let nums = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| parse_err(format!("bad float {t:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        if nums.len() != 2 * d {
            return Err(parse_err(format!(
                "expected {} floats per vector line, got {}",
                2 * d,
                nums.len()
            )));
        }
        vectors.push(CVector::from_fn(d, |i, _| {
            Complex64::new(nums[2 * i], nums[2 * i + 1])
        }));
    }
    if vectors.len() != m {
        return Err(parse_err(format!(
            "expected {m} vectors, found {}",
            vectors.len()
        )));
    }
    Ok((d, settings, vectors))
}

pub fn read_vector_set_file(path: &std::path::Path) -> Result<(usize, usize, Vec<CVector>)> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    read_vector_set(std::io::BufReader::new(f), &path.display().to_string())
}

pub fn write_vector_set<W: std::io::Write>(
    w: &mut W,
    d: usize,
    settings: usize,
    vectors: &[CVector],
) -> std::io::Result<()> {
    writeln!(w, "{} {} {}", d, vectors.len(), settings)?;
    for v in vectors {
        let parts: Vec<String> = v.iter().map(|c| format!("{} {}", c.re, c.im)).collect();
        writeln!(w, "{}", parts.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expect_real, random_hermitian};

    fn overlaps_unbiased(povm: &StructuredPovm) {
        let d = povm.d();
        let per = povm.vectors_per_setting();
        let m = povm.total_vectors();
        for i in 0..m {
            for j in 0..m {
                let inner = povm.vectors()[i].dotc(&povm.vectors()[j]).norm_sqr();
                if i / per == j / per {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((inner - expected).abs() < 1e-12, "within-basis ({i},{j})");
                } else {
                    assert!(
                        (inner - 1.0 / d as f64).abs() < 1e-12,
                        "cross-basis ({i},{j}): {inner}"
                    );
                }
            }
        }
    }

    #[test]
    fn mub_qubit_case() {
        let povm = build_mub_scheme(2, true).unwrap();
        assert_eq!(povm.settings(), 3);
        overlaps_unbiased(&povm);
    }

    #[test]
    fn mub_odd_primes_are_unbiased() {
        for d in [3, 5, 7, 11, 13] {
            let povm = build_mub_scheme(d, true).unwrap();
            assert_eq!(povm.settings(), d + 1);
            assert_eq!(povm.total_vectors(), d * (d + 1));
            overlaps_unbiased(&povm);
        }
    }

    #[test]
    fn mub_without_computational_basis() {
        let povm = build_mub_scheme(5, false).unwrap();
        assert_eq!(povm.settings(), 5);
        assert_eq!(povm.total_vectors(), 25);
        // still valid per-setting measurements, but no longer a 2-design
        assert!(!povm.verify_design().unwrap().pass);
    }

    #[test]
    fn mub_rejects_composite_dimension() {
        assert!(matches!(
            build_mub_scheme(4, true),
            Err(Error::UnsupportedDimension { d: 4, .. })
        ));
        assert!(build_mub_scheme(1, true).is_err());
    }

    #[test]
    fn mub_is_2design() {
        for d in [2, 3, 5, 7, 11, 13] {
            let povm = build_mub_scheme(d, true).unwrap();
            let check = povm.verify_design().unwrap();
            assert!(check.pass, "d = {d}: deviation {}", check.max_deviation);
            assert!(check.max_deviation < 1e-12);
        }
    }

    #[test]
    fn single_basis_is_not_a_2design() {
        let e0 = CVector::from_fn(2, |i, _| Complex64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0));
        let e1 = CVector::from_fn(2, |i, _| Complex64::new(if i == 1 { 1.0 } else { 0.0 }, 0.0));
        let check = verify_2design(&[e0, e1]).unwrap();
        assert!(!check.pass);
        assert!(check.max_deviation >= 1.0 / 6.0 - 1e-12);
    }

    #[test]
    fn structured_near_isometry() {
        // M†M(X) = (d²/m²)·Σ ⟨v|X|v⟩ |v⟩⟨v| = d(X + tr(X)·I)/((d+1)·m)
        for d in [2, 3, 5] {
            let povm = build_mub_scheme(d, true).unwrap();
            let m = povm.total_vectors() as f64;
            let x = random_hermitian(d, 31 + d as u64);
            let mut lhs = CMatrix::zeros(d, d);
            for v in povm.vectors() {
                lhs += outer_product(v) * Complex64::new(expect_real(x.matrix(), v), 0.0);
            }
            lhs *= Complex64::new((d as f64 / m).powi(2), 0.0);
            let rhs = (x.matrix() + CMatrix::identity(d, d) * Complex64::new(x.trace(), 0.0))
                * Complex64::new(d as f64 / ((d as f64 + 1.0) * m), 0.0);
            let dev = HermitianMatrix::new(lhs - rhs).unwrap().operator_norm().unwrap();
            assert!(dev < 1e-10, "d = {d}: {dev:.3e}");
        }
    }

    #[test]
    fn pauli_word_enumeration() {
        let scheme = PauliObservableScheme::new(1).unwrap();
        let names: Vec<String> = scheme.words().iter().map(|w| w.to_string()).collect();
        assert_eq!(names, ["I", "X", "Y", "Z"]);

        let scheme2 = PauliObservableScheme::new(2).unwrap();
        assert_eq!(scheme2.words().len(), 16);
        assert_eq!(scheme2.settings(), 15);
        assert!(scheme2.words()[0].is_identity());
    }

    #[test]
    fn pauli_matrices() {
        let id = PauliWord::parse("I").unwrap().matrix();
        assert!((id.matrix() - CMatrix::identity(2, 2)).norm() < 1e-15);

        let z = PauliWord::parse("Z").unwrap().matrix();
        let z_expected = HermitianMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(z.operator_norm_distance(&z_expected).unwrap() < 1e-15);

        // XZ = σ_x ⊗ σ_z and squares to the identity
        let xz = PauliWord::parse("XZ").unwrap().matrix();
        let x = PauliWord::parse("X").unwrap();
        let zz = PauliWord::parse("Z").unwrap();
        let tensor = kron(x.matrix().matrix(), zz.matrix().matrix());
        assert!((xz.matrix() - &tensor).norm() < 1e-15);
        let sq = xz.matrix() * xz.matrix();
        assert!((sq - CMatrix::identity(4, 4)).norm() < 1e-14);
    }

    #[test]
    fn pauli_words_are_orthogonal() {
        for k in 1..=3 {
            let scheme = PauliObservableScheme::new(k).unwrap();
            let d = scheme.d() as f64;
            let mats: Vec<CMatrix> = scheme.words().iter().map(|w| w.matrix().into_matrix()).collect();
            for (i, a) in mats.iter().enumerate() {
                for (j, b) in mats.iter().enumerate() {
                    let t = (a * b).trace();
                    let expected = if i == j { d } else { 0.0 };
                    assert!((t.re - expected).abs() < 1e-12 && t.im.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn pauli_basis_expansion_identity() {
        // X = (1/d)·Σ tr(W_i X) W_i
        for k in 1..=3 {
            let scheme = PauliObservableScheme::new(k).unwrap();
            let d = scheme.d();
            let x = random_hermitian(d, 77 + k as u64);
            let mut acc = CMatrix::zeros(d, d);
            for w in scheme.words() {
                acc += w.matrix().matrix() * Complex64::new(w.expectation(x.matrix()), 0.0);
            }
            acc /= Complex64::new(d as f64, 0.0);
            assert!((acc - x.matrix()).norm() < 1e-10);
        }
    }

    #[test]
    fn pauli_expectation_matches_dense_trace() {
        let scheme = PauliObservableScheme::new(3).unwrap();
        let x = random_hermitian(8, 5);
        for w in scheme.words() {
            let dense = (w.matrix().matrix() * x.matrix()).trace().re;
            assert!((w.expectation(x.matrix()) - dense).abs() < 1e-12);
        }
    }

    #[test]
    fn pauli_basis_scheme_counts_and_completeness() {
        let s1 = PauliBasisScheme::new(1).unwrap();
        assert_eq!(s1.settings(), 3);
        assert_eq!(s1.outcomes(), 2);
        assert_eq!(s1.setting_label(0), "x");
        assert_eq!(s1.setting_label(2), "z");

        let s2 = PauliBasisScheme::new(2).unwrap();
        assert_eq!(s2.settings(), 9);
        assert_eq!(s2.setting_label(0), "xx");
        assert_eq!(s2.setting_label(8), "zz");
        for setting in 0..s2.settings() {
            let mut sum = CMatrix::zeros(4, 4);
            for o in 0..s2.outcomes() {
                sum += s2.effect(setting, o);
            }
            assert!((sum - CMatrix::identity(4, 4)).norm() < 1e-12);
        }
    }

    #[test]
    fn pauli_basis_frame_operator_is_depolarizing() {
        // Σ_{s,o} ⟨b|X|b⟩ |b⟩⟨b| = 3^k · D_{1/3}^{⊗k}(X)
        let scheme = PauliBasisScheme::new(2).unwrap();
        let d = scheme.d();
        for trial in 0..20 {
            let x = random_hermitian(d, 900 + trial);
            let mut acc = CMatrix::zeros(d, d);
            for s in 0..scheme.settings() {
                for o in 0..scheme.outcomes() {
                    let b = scheme.basis_vector(s, o);
                    acc += outer_product(&b) * Complex64::new(expect_real(x.matrix(), &b), 0.0);
                }
            }
            let rhs = depolarizing_apply(&x, 1.0 / 3.0).unwrap().scale(9.0);
            let dev = HermitianMatrix::new(acc).unwrap().operator_norm_distance(&rhs).unwrap();
            assert!(dev < 1e-10, "trial {trial}: {dev:.3e}");
        }
    }

    #[test]
    fn depolarizing_basics() {
        let id = HermitianMatrix::identity(2);
        let out = depolarizing_apply(&id, 1.0 / 3.0).unwrap();
        assert!(out.operator_norm_distance(&id).unwrap() < 1e-14, "unital");

        let z = PauliWord::parse("Z").unwrap().matrix();
        let dz = depolarizing_apply(&z, 1.0 / 3.0).unwrap();
        assert!(dz.operator_norm_distance(&z.scale(1.0 / 3.0)).unwrap() < 1e-14);

        assert!(depolarizing_apply(&HermitianMatrix::identity(3), 0.5).is_err());
    }

    #[test]
    fn depolarizing_composition() {
        // D_{3/5} ∘ D_{1/3} = D_{1/5}
        let x = random_hermitian(2, 404);
        let once = depolarizing_apply(&x, 1.0 / 3.0).unwrap();
        let twice = depolarizing_apply(&once, 3.0 / 5.0).unwrap();
        let direct = depolarizing_apply(&x, 1.0 / 5.0).unwrap();
        assert!(twice.operator_norm_distance(&direct).unwrap() < 1e-12);
    }

    #[test]
    fn depolarizing_inverse_identities() {
        let id = HermitianMatrix::identity(2);
        assert!(depolarizing_inverse_apply(&id)
            .unwrap()
            .operator_norm_distance(&id)
            .unwrap()
            < 1e-14);

        for axis in [Axis::X, Axis::Y, Axis::Z] {
            for plus in [true, false] {
                let b = qubit_basis_vector(axis, plus);
                let bv = CVector::from_fn(2, |i, _| b[i]);
                let proj = HermitianMatrix::new(outer_product(&bv)).unwrap();
                let inv = depolarizing_inverse_apply(&proj).unwrap();
                // D⁻¹(|b⟩⟨b|) = 3|b⟩⟨b| − I
                let expected = proj.scale(3.0).sub(&HermitianMatrix::identity(2)).unwrap();
                assert!(inv.operator_norm_distance(&expected).unwrap() < 1e-13);
                // (D⁻¹(|b⟩⟨b|))² = 5·D_{3/5}(|b⟩⟨b|)
                let sq = HermitianMatrix::new(inv.matrix() * inv.matrix()).unwrap();
                let rhs = depolarizing_apply(&proj, 3.0 / 5.0).unwrap().scale(5.0);
                assert!(sq.operator_norm_distance(&rhs).unwrap() < 1e-13);
            }
        }
    }

    #[test]
    fn depolarizing_inverse_inverts() {
        for k in 1..=2 {
            let x = random_hermitian(1 << k, 51 + k as u64);
            let roundtrip = depolarizing_apply(&depolarizing_inverse_apply(&x).unwrap(), 1.0 / 3.0).unwrap();
            assert!(roundtrip.operator_norm_distance(&x).unwrap() < 1e-10);
        }
    }

    #[test]
    fn vector_set_roundtrip() {
        let povm = build_mub_scheme(3, true).unwrap();
        let mut buf = Vec::new();
        write_vector_set(&mut buf, povm.d(), povm.settings(), povm.vectors()).unwrap();
        let (d, settings, vectors) = read_vector_set(buf.as_slice(), "buffer").unwrap();
        assert_eq!(d, 3);
        assert_eq!(settings, 4);
        assert_eq!(vectors.len(), 12);
        let rebuilt = StructuredPovm::new(d, settings, vectors).unwrap();
        assert!(rebuilt.verify_design().unwrap().pass);
    }

    #[test]
    fn structured_povm_validation() {
        let povm = build_mub_scheme(2, true).unwrap();
        // odd split
        assert!(StructuredPovm::new(2, 4, povm.vectors().to_vec()).is_err());
        // non-unit vector
        let mut bad = povm.vectors().to_vec();
        bad[0] *= Complex64::new(1.5, 0.0);
        assert!(StructuredPovm::new(2, 3, bad).is_err());
    }
}
