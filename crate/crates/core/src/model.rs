//! Synchronous (multicarrier) DS-CDMA signal model at the matched-filter output.
//!
//! On every subcarrier the despread vector is `y = R·H·b + n`, where `R` is the
//! normalized cross-correlation matrix of the signature sequences, `H` the
//! diagonal of flat Rayleigh fading coefficients, `b` the amplitude-scaled data
//! bits and `n` complex Gaussian noise with covariance `σ²R`.
//!
//! Every sampling routine takes an explicit RNG, so a fixed seed reproduces the
//! same draws bit for bit.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;

/// Binary (±1) signature sequences, one per user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpreadingSet {
    chips: Vec<Vec<i8>>,
}

impl SpreadingSet {
    pub fn new(chips: Vec<Vec<i8>>) -> Result<Self> {
        let len = chips.first().map(Vec::len).unwrap_or(0);
        if chips.is_empty() || len == 0 {
            return Err(Error::InvalidDimensions(
                "need at least one user and one chip".into(),
            ));
        }
        for (k, seq) in chips.iter().enumerate() {
            if seq.len() != len {
                return Err(Error::InvalidDimensions(format!(
                    "sequence {k} has {} chips, expected {len}",
                    seq.len()
                )));
            }
            if seq.iter().any(|&c| c != 1 && c != -1) {
                return Err(Error::InvalidParameter(format!(
                    "sequence {k} contains a chip outside {{+1,-1}}"
                )));
            }
        }
        Ok(Self { chips })
    }

    pub fn users(&self) -> usize {
        self.chips.len()
    }

    /// Chips per bit (processing gain).
    pub fn chips_per_bit(&self) -> usize {
        self.chips[0].len()
    }

    pub fn sequence(&self, user: usize) -> &[i8] {
        &self.chips[user]
    }
}

/// Draws `users` independent random binary sequences of `chips` chips each.
pub fn generate_spreading_set<G: Rng + ?Sized>(
    users: usize,
    chips: usize,
    rng: &mut G,
) -> Result<SpreadingSet> {
    if users == 0 || chips == 0 {
        return Err(Error::InvalidDimensions(format!(
            "K={users}, P={chips}; both must be at least 1"
        )));
    }
    let seqs = (0..users)
        .map(|_| {
            (0..chips)
                .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                .collect()
        })
        .collect();
    SpreadingSet::new(seqs)
}

/// Real symmetric correlation matrix with unit diagonal and entries in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix(DMatrix<f64>);

impl CorrelationMatrix {
    /// Validates and wraps a matrix. Symmetry is checked to a relative
    /// tolerance of 1e-12 and then enforced exactly.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        linalg::ensure_symmetric(&m)?;
        let k = m.nrows();
        if k == 0 {
            return Err(Error::InvalidDimensions("empty correlation matrix".into()));
        }
        for i in 0..k {
            if m[(i, i)] != 1.0 {
                return Err(Error::InvalidCorrelation(format!(
                    "diagonal entry {i} is {}, expected 1",
                    m[(i, i)]
                )));
            }
        }
        if m.iter().any(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::InvalidCorrelation(
                "entries must be finite and lie in [-1, 1]".into(),
            ));
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(Self(sym))
    }

    pub fn identity(users: usize) -> Self {
        Self(DMatrix::identity(users, users))
    }

    pub fn users(&self) -> usize {
        self.0.nrows()
    }

    pub fn rho(&self, l: usize, j: usize) -> f64 {
        self.0[(l, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

/// `ρ_lj = (1/P) Σ_p c_l[p] c_j[p]`.
pub fn correlation_matrix(set: &SpreadingSet) -> CorrelationMatrix {
    let k = set.users();
    let p = set.chips_per_bit() as f64;
    let mut m = DMatrix::identity(k, k);
    for l in 0..k {
        for j in (l + 1)..k {
            let dot: i64 = set
                .sequence(l)
                .iter()
                .zip(set.sequence(j))
                .map(|(&a, &b)| (a * b) as i64)
                .sum();
            let rho = dot as f64 / p;
            m[(l, j)] = rho;
            m[(j, l)] = rho;
        }
    }
    CorrelationMatrix(m)
}

/// All off-diagonal entries equal to `rho`.
pub fn equicorrelated_matrix(users: usize, rho: f64) -> Result<CorrelationMatrix> {
    if users == 0 {
        return Err(Error::InvalidDimensions("K must be at least 1".into()));
    }
    let min = if users > 1 {
        -1.0 / (users as f64 - 1.0)
    } else {
        -1.0
    };
    if !rho.is_finite() || rho < min || rho > 1.0 {
        return Err(Error::CorrelationOutOfRange { rho, min, users });
    }
    let m = DMatrix::from_fn(users, users, |i, j| if i == j { 1.0 } else { rho });
    Ok(CorrelationMatrix(m))
}

/// Draws one circularly-symmetric complex Gaussian sample with `E|z|² = variance`.
pub fn complex_gaussian<G: Rng + ?Sized>(rng: &mut G, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Flat Rayleigh fading coefficients `h_k^(i)` for `M` subcarriers and `K` users.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    coeffs: DMatrix<Complex64>,
}

impl ChannelRealization {
    /// `coeffs` is `M × K`: row `i` holds subcarrier `i`.
    pub fn from_coefficients(coeffs: DMatrix<Complex64>) -> Result<Self> {
        if coeffs.nrows() == 0 || coeffs.ncols() == 0 {
            return Err(Error::InvalidDimensions("empty channel".into()));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidParameter("non-finite channel coefficient".into()));
        }
        Ok(Self { coeffs })
    }

    /// Unit gain on every user and subcarrier.
    pub fn unit(users: usize, subcarriers: usize) -> Self {
        Self {
            coeffs: DMatrix::from_element(subcarriers, users, Complex64::new(1.0, 0.0)),
        }
    }

    pub fn users(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn subcarriers(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn coefficient(&self, subcarrier: usize, user: usize) -> Complex64 {
        self.coeffs[(subcarrier, user)]
    }

    /// Diagonal of `H^(i)` as a vector.
    pub fn subcarrier(&self, subcarrier: usize) -> DVector<Complex64> {
        self.coeffs.row(subcarrier).transpose()
    }

    pub fn coefficients(&self) -> &DMatrix<Complex64> {
        &self.coeffs
    }
}

/// Real and imaginary parts i.i.d. N(0, 0.5), independent across users and subcarriers.
pub fn sample_channel<G: Rng + ?Sized>(
    users: usize,
    subcarriers: usize,
    rng: &mut G,
) -> Result<ChannelRealization> {
    if users == 0 || subcarriers == 0 {
        return Err(Error::InvalidDimensions(format!(
            "K={users}, M={subcarriers}; both must be at least 1"
        )));
    }
    let mut coeffs = DMatrix::zeros(subcarriers, users);
    for i in 0..subcarriers {
        for k in 0..users {
            coeffs[(i, k)] = complex_gaussian(rng, 1.0);
        }
    }
    Ok(ChannelRealization { coeffs })
}

/// One transmitted bit per user together with the users' amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolBlock {
    bits: Vec<i8>,
    amplitudes: Vec<f64>,
}

impl SymbolBlock {
    pub fn new(bits: Vec<i8>, amplitudes: Vec<f64>) -> Result<Self> {
        if bits.len() != amplitudes.len() {
            return Err(Error::DimensionMismatch {
                expected: bits.len(),
                got: amplitudes.len(),
            });
        }
        if bits.iter().any(|&b| b != 1 && b != -1) {
            return Err(Error::InvalidParameter("bits must be +1 or -1".into()));
        }
        if amplitudes.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidParameter(
                "amplitudes must be finite and strictly positive".into(),
            ));
        }
        Ok(Self { bits, amplitudes })
    }

    pub fn random<G: Rng + ?Sized>(amplitudes: &[f64], rng: &mut G) -> Result<Self> {
        let bits = amplitudes
            .iter()
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        Self::new(bits, amplitudes.to_vec())
    }

    pub fn users(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[i8] {
        &self.bits
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// `A_k b_k` for every user.
    pub fn data_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.bits.len(),
            self.bits
                .iter()
                .zip(&self.amplitudes)
                .map(|(&b, &a)| a * b as f64),
        )
    }

    /// `x_k = A_k b_k h_k` on one subcarrier.
    pub fn effective_symbols(&self, h: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        if h.len() != self.users() {
            return Err(Error::DimensionMismatch {
                expected: self.users(),
                got: h.len(),
            });
        }
        Ok(DVector::from_iterator(
            h.len(),
            self.data_vector().iter().zip(h.iter()).map(|(&d, &c)| c * d),
        ))
    }
}

/// Noise samples of one subcarrier and the variance they were drawn with.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseVector {
    pub samples: DVector<Complex64>,
    pub variance: f64,
}

/// Cached square-root factor `L` (with `L·Lᵀ = R`) for repeated noise draws.
#[derive(Debug, Clone)]
pub struct NoiseShaper {
    factor: DMatrix<f64>,
}

impl NoiseShaper {
    /// Cholesky factorization of `R`; no regularization is applied.
    pub fn new(r: &CorrelationMatrix) -> Result<Self> {
        let chol = Cholesky::new(r.as_matrix().clone()).ok_or(Error::NotPositiveDefinite)?;
        let factor = chol.l();
        if factor.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { factor })
    }

    pub fn users(&self) -> usize {
        self.factor.nrows()
    }

    /// Draws `n = L·w` with `w` i.i.d. complex Gaussian of variance `sigma2`.
    ///
    /// The same number of normals is consumed for every `sigma2`, including zero.
    pub fn sample<G: Rng + ?Sized>(&self, sigma2: f64, rng: &mut G) -> Result<NoiseVector> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise variance {sigma2}")));
        }
        let k = self.users();
        let w: Vec<Complex64> = (0..k).map(|_| complex_gaussian(rng, sigma2)).collect();
        let mut samples = DVector::zeros(k);
        for i in 0..k {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, wj) in w.iter().enumerate().take(i + 1) {
                acc += wj * self.factor[(i, j)];
            }
            samples[i] = acc;
        }
        Ok(NoiseVector {
            samples,
            variance: sigma2,
        })
    }
}

/// One draw of correlated noise with covariance `σ²R`.
pub fn sample_noise<G: Rng + ?Sized>(
    r: &CorrelationMatrix,
    sigma2: f64,
    rng: &mut G,
) -> Result<NoiseVector> {
    NoiseShaper::new(r)?.sample(sigma2, rng)
}

/// Matched-filter (despread) output of one subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedFilterOutput {
    pub values: DVector<Complex64>,
}

/// `y = R·H·b + n`.
pub fn matched_filter_output(
    r: &CorrelationMatrix,
    h: &DVector<Complex64>,
    block: &SymbolBlock,
    noise: &NoiseVector,
) -> Result<MatchedFilterOutput> {
    let k = r.users();
    for got in [h.len(), block.users(), noise.samples.len()] {
        if got != k {
            return Err(Error::DimensionMismatch { expected: k, got });
        }
    }
    let x = block.effective_symbols(h)?;
    let mut values = noise.samples.clone();
    let m = r.as_matrix();
    for l in 0..k {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..k {
            acc += x[j] * m[(l, j)];
        }
        values[l] += acc;
    }
    Ok(MatchedFilterOutput { values })
}

/// `sgn(Re(h* · y))`, with an exact zero resolved to +1.
pub fn bit_decision(h: Complex64, y: Complex64) -> i8 {
    if (h.conj() * y).re < 0.0 {
        -1
    } else {
        1
    }
}

/// Outcome of the Neumann-series convergence test on a correlation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceCheck {
    pub max_eigenvalue: f64,
    pub converges: bool,
}

/// `λ_max(R)` and whether it is below two.
pub fn convergence_check(r: &DMatrix<f64>) -> Result<ConvergenceCheck> {
    let ev = linalg::symmetric_eigenvalues(r)?;
    let max_eigenvalue = ev[0];
    Ok(ConvergenceCheck {
        max_eigenvalue,
        converges: max_eigenvalue < 2.0,
    })
}
