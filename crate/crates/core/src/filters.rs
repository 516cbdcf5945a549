//! Linear matrix filters for multistage parallel interference cancellation.
//!
//! A stage-`m` canceller is a fixed `K×K` matrix `G` applied to the matched
//! filter output, `y^(m) = G·y^(1)`. The builders here cover:
//!
//! * `Conventional`: truncated Neumann series `Σ_{j<m} (I−R)^j`.
//! * `Proposed`: `Σ_{j<m} B_j` with `B_n = [B_{n−1}(I−R)]^⊙` and `B_0 = I`,
//!   where `[·]^⊙` zeroes the diagonal.
//! * `MmseConverging`: steepest-descent canceller whose step sizes
//!   `μ_i = 1/(λ_i+σ²)` reach `(R+σ²I)⁻¹` after `K` stages.
//! * `ModifiedMmse`: the same step sizes with the diagonal zeroed at every
//!   product step.
//! * `WeightedProposed`: the proposed recursion with per-user, per-stage
//!   weights `W^(j)`.
//! * `Decorrelator` and `Mmse`: the direct inverses `R⁻¹` and `(R+σ²I)⁻¹`.
//!
//! Every stage costs one `K×K` matrix product, so construction is linear in
//! `m`. The Neumann builders are generic over the scalar field so the
//! multicarrier receiver can reuse them on the complex `R_eff`.

use nalgebra::{ComplexField, DMatrix, DVector, RowDVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{self, CorrelationMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FilterKind {
    MatchedFilter,
    Conventional,
    Proposed,
    MmseConverging,
    ModifiedMmse,
    WeightedProposed,
    Decorrelator,
    Mmse,
}

impl FilterKind {
    /// Short label used in CSV output and configuration files.
    pub fn label(self) -> &'static str {
        match self {
            FilterKind::MatchedFilter => "MF",
            FilterKind::Conventional => "G",
            FilterKind::Proposed => "Gp",
            FilterKind::MmseConverging => "Gmu",
            FilterKind::ModifiedMmse => "Gpmu",
            FilterKind::WeightedProposed => "Gpw",
            FilterKind::Decorrelator => "DC",
            FilterKind::Mmse => "MMSE",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        let kind = match s.to_ascii_lowercase().as_str() {
            "mf" => FilterKind::MatchedFilter,
            "g" | "conventional" => FilterKind::Conventional,
            "gp" | "proposed" => FilterKind::Proposed,
            "gmu" => FilterKind::MmseConverging,
            "gpmu" => FilterKind::ModifiedMmse,
            "gpw" => FilterKind::WeightedProposed,
            "dc" | "decorrelator" => FilterKind::Decorrelator,
            "mmse" => FilterKind::Mmse,
            _ => return None,
        };
        Some(kind)
    }

    /// Whether the filter has a meaningful stage index.
    pub fn is_staged(self) -> bool {
        !matches!(
            self,
            FilterKind::MatchedFilter | FilterKind::Decorrelator | FilterKind::Mmse
        )
    }
}

/// Ordering of the eigenvalues of `R` that defines the step-size index `μ_i`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum EigenOrder {
    /// `λ_1 ≥ λ_2 ≥ … ≥ λ_K`.
    #[default]
    Descending,
    Ascending,
}

/// Per-stage diagonal weights `W^(2) … W^(m)`. `W^(1)` is implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSchedule {
    users: usize,
    // stages[j] holds W^(j + 2)
    stages: Vec<Vec<f64>>,
}

impl WeightSchedule {
    pub fn new(users: usize, stages: Vec<Vec<f64>>) -> Result<Self> {
        for (j, w) in stages.iter().enumerate() {
            if w.len() != users {
                return Err(Error::DimensionMismatch {
                    expected: users,
                    got: w.len(),
                });
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "non-finite weight at stage {}",
                    j + 2
                )));
            }
        }
        Ok(Self { users, stages })
    }

    /// Schedule with no stages defined.
    pub fn empty(users: usize) -> Self {
        Self {
            users,
            stages: Vec::new(),
        }
    }

    /// Same weight for every user on stages `2..=max_stage`.
    pub fn constant(users: usize, max_stage: usize, value: f64) -> Self {
        Self {
            users,
            stages: vec![vec![value; users]; max_stage.saturating_sub(1)],
        }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// Highest stage covered; 1 when only `W^(1)` exists.
    pub fn max_stage(&self) -> usize {
        self.stages.len() + 1
    }

    /// Diagonal of `W^(stage)`; `None` when the stage is not covered.
    pub fn stage(&self, stage: usize) -> Option<&[f64]> {
        match stage {
            0 => None,
            1 => None,
            s => self.stages.get(s - 2).map(Vec::as_slice),
        }
    }

    /// `w_user^(stage)`; stage 1 is zero by definition.
    pub fn weight(&self, stage: usize, user: usize) -> Option<f64> {
        if stage == 1 {
            return Some(0.0);
        }
        self.stage(stage).and_then(|w| w.get(user).copied())
    }

    pub fn push_stage(&mut self, weights: Vec<f64>) -> Result<()> {
        if weights.len() != self.users {
            return Err(Error::DimensionMismatch {
                expected: self.users,
                got: weights.len(),
            });
        }
        self.stages.push(weights);
        Ok(())
    }

    /// Copy restricted to stages `2..=max_stage`.
    pub fn truncated(&self, max_stage: usize) -> Self {
        Self {
            users: self.users,
            stages: self.stages[..max_stage.saturating_sub(1).min(self.stages.len())].to_vec(),
        }
    }
}

/// Parameters a filter was built with.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterParams {
    pub sigma2: Option<f64>,
    pub weights: Option<WeightSchedule>,
    pub eigen_order: Option<EigenOrder>,
}

/// A `K×K` linear filter together with how it was built.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFilter<T = f64> {
    matrix: DMatrix<T>,
    kind: FilterKind,
    stage: usize,
    params: FilterParams,
}

/// Scalar types a filter can be built over.
pub trait FilterScalar: ComplexField<RealField = f64> + Copy {
    fn mul_complex(self, z: Complex64) -> Complex64;
}

impl FilterScalar for f64 {
    #[inline]
    fn mul_complex(self, z: Complex64) -> Complex64 {
        z * self
    }
}

impl FilterScalar for Complex64 {
    #[inline]
    fn mul_complex(self, z: Complex64) -> Complex64 {
        self * z
    }
}

impl<T: FilterScalar> MatrixFilter<T> {
    pub fn new(matrix: DMatrix<T>, kind: FilterKind, stage: usize, params: FilterParams) -> Result<Self> {
        linalg::ensure_square(&matrix)?;
        if stage == 0 {
            return Err(Error::InvalidParameter("stage must be at least 1".into()));
        }
        Ok(Self {
            matrix,
            kind,
            stage,
            params,
        })
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn params(&self) -> &FilterParams {
        &self.params
    }

    pub fn users(&self) -> usize {
        self.matrix.nrows()
    }

    /// `G·y`.
    pub fn apply(&self, y: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        let k = self.users();
        if y.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: y.len(),
            });
        }
        Ok(DVector::from_fn(k, |i, _| self.apply_row(i, y)))
    }

    /// Output of a single user, `(G·y)_user`.
    pub fn apply_row(&self, user: usize, y: &DVector<Complex64>) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..y.len() {
            acc += self.matrix[(user, j)].mul_complex(y[j]);
        }
        acc
    }
}

/// `[M]^⊙` for square matrices; rejects non-square input.
pub fn zero_diagonal<T: FilterScalar>(m: &DMatrix<T>) -> Result<DMatrix<T>> {
    linalg::zero_diagonal(m)
}

fn ensure_stage(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidParameter("stage must be at least 1".into()));
    }
    Ok(())
}

/// `I − A` for a square `A`.
pub fn identity_minus<T: FilterScalar>(a: &DMatrix<T>) -> DMatrix<T> {
    DMatrix::<T>::identity(a.nrows(), a.ncols()) - a
}

/// `Σ_{j=0}^{m−1} E^j` through `G ← I + E·G`, where `E = I − R`.
pub fn conventional_series<T: FilterScalar>(e: &DMatrix<T>, m: usize) -> DMatrix<T> {
    let k = e.nrows();
    let id = DMatrix::<T>::identity(k, k);
    let mut g = id.clone();
    for _ in 1..m {
        g = &id + e * &g;
    }
    g
}

/// `Σ_{j=0}^{m−1} B_j` with `B_n = [B_{n−1}·E]^⊙`, `B_0 = I`.
pub fn proposed_series<T: FilterScalar>(e: &DMatrix<T>, m: usize) -> DMatrix<T> {
    let k = e.nrows();
    let mut b = DMatrix::<T>::identity(k, k);
    let mut g = b.clone();
    for _ in 1..m {
        b = &b * e;
        linalg::zero_diagonal_mut(&mut b).expect("square by construction");
        g += &b;
    }
    g
}

/// Row `user` of the conventional filter for every stage `1..=max_stage`.
///
/// Costs one vector–matrix product per stage instead of a matrix product,
/// which is what the per-trial multicarrier receivers need.
pub fn conventional_rows<T: FilterScalar>(
    e: &DMatrix<T>,
    user: usize,
    max_stage: usize,
) -> Vec<RowDVector<T>> {
    series_rows(e, user, max_stage, false)
}

/// Row `user` of the proposed filter for every stage `1..=max_stage`.
///
/// `[·]^⊙` acts on each row independently: row `k` of `B_n` is row `k` of
/// `B_{n−1}·E` with entry `k` cleared.
pub fn proposed_rows<T: FilterScalar>(
    e: &DMatrix<T>,
    user: usize,
    max_stage: usize,
) -> Vec<RowDVector<T>> {
    series_rows(e, user, max_stage, true)
}

fn series_rows<T: FilterScalar>(
    e: &DMatrix<T>,
    user: usize,
    max_stage: usize,
    zero_own: bool,
) -> Vec<RowDVector<T>> {
    let k = e.nrows();
    let mut term = RowDVector::<T>::from_fn(k, |_, j| if j == user { T::one() } else { T::zero() });
    let mut acc = term.clone();
    let mut out = Vec::with_capacity(max_stage);
    if max_stage == 0 {
        return out;
    }
    out.push(acc.clone());
    for _ in 1..max_stage {
        term = &term * e;
        if zero_own {
            term[user] = T::zero();
        }
        acc += &term;
        out.push(acc.clone());
    }
    out
}

/// Identity (stage-1 matched filter).
pub fn matched_filter(users: usize) -> MatrixFilter {
    MatrixFilter {
        matrix: DMatrix::identity(users, users),
        kind: FilterKind::MatchedFilter,
        stage: 1,
        params: FilterParams::default(),
    }
}

/// `G^(m) = Σ_{j=1}^{m} (I−R)^{j−1}`.
pub fn build_conventional(r: &CorrelationMatrix, m: usize) -> Result<MatrixFilter> {
    ensure_stage(m)?;
    let e = identity_minus(r.as_matrix());
    MatrixFilter::new(
        conventional_series(&e, m),
        FilterKind::Conventional,
        m,
        FilterParams::default(),
    )
}

/// `G_p^(m) = Σ_{j=0}^{m−1} B_j`, truncated at `m` even if `B_n` vanishes earlier.
pub fn build_proposed(r: &CorrelationMatrix, m: usize) -> Result<MatrixFilter> {
    ensure_stage(m)?;
    let e = identity_minus(r.as_matrix());
    MatrixFilter::new(
        proposed_series(&e, m),
        FilterKind::Proposed,
        m,
        FilterParams::default(),
    )
}

/// Step sizes `μ_i = 1/(λ_i + σ²)` in the requested eigenvalue order.
pub fn step_sizes(r: &CorrelationMatrix, sigma2: f64, order: EigenOrder) -> Result<Vec<f64>> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise variance {sigma2}")));
    }
    let mut ev = linalg::symmetric_eigenvalues(r.as_matrix())?;
    if order == EigenOrder::Ascending {
        ev.reverse();
    }
    ev.into_iter()
        .map(|l| {
            let d = l + sigma2;
            if d.abs() < linalg::PIVOT_THRESHOLD {
                Err(Error::Singular(d.abs()))
            } else {
                Ok(1.0 / d)
            }
        })
        .collect()
}

fn ensure_step_stage(m: usize, users: usize) -> Result<()> {
    ensure_stage(m)?;
    if m > users {
        return Err(Error::StageOutOfRange {
            stage: m,
            limit: users,
        });
    }
    Ok(())
}

/// `G_μ^(m) = μ_m I + Σ_{i=1}^{m−1} μ_{m−i} Π_{j=1}^{i} (I − μ_{m−i+j}(R+σ²I))`.
///
/// Evaluated through the equivalent recursion `G ← μ_s I + (I − μ_s(R+σ²I))·G`
/// (all factors are polynomials in `R` and commute).
pub fn build_mmse_converging(
    r: &CorrelationMatrix,
    sigma2: f64,
    m: usize,
    order: EigenOrder,
) -> Result<MatrixFilter> {
    let k = r.users();
    ensure_step_stage(m, k)?;
    let mu = step_sizes(r, sigma2, order)?;
    let rs = loaded(r, sigma2);
    let id = DMatrix::<f64>::identity(k, k);
    let mut g = &id * mu[0];
    for &step in &mu[1..m] {
        g = &id * step + (&id - &rs * step) * &g;
    }
    MatrixFilter::new(
        g,
        FilterKind::MmseConverging,
        m,
        FilterParams {
            sigma2: Some(sigma2),
            eigen_order: Some(order),
            ..Default::default()
        },
    )
}

/// `G_pμ^(m) = μ_m I + Σ_{i=1}^{m−1} μ_{m−i} J_i` with
/// `J_i = [J_{i−1}(I − μ_{m−i+1}(R+σ²I))]^⊙` and `J_0 = I`.
///
/// `J_i` takes the factors of the `i`-th product term of `G_μ^(m)` in the
/// same order, so that at `m = K` the factor indices are `K, K−1, …`.
pub fn build_modified_mmse(
    r: &CorrelationMatrix,
    sigma2: f64,
    m: usize,
    order: EigenOrder,
) -> Result<MatrixFilter> {
    let k = r.users();
    ensure_step_stage(m, k)?;
    let mu = step_sizes(r, sigma2, order)?;
    let rs = loaded(r, sigma2);
    let id = DMatrix::<f64>::identity(k, k);
    // mu is 0-based: μ_s == mu[s - 1]
    let mut g = &id * mu[m - 1];
    let mut j = id.clone();
    for i in 1..m {
        let step = mu[m - i];
        j = &j * (&id - &rs * step);
        linalg::zero_diagonal_mut(&mut j)?;
        g += &j * mu[m - i - 1];
    }
    MatrixFilter::new(
        g,
        FilterKind::ModifiedMmse,
        m,
        FilterParams {
            sigma2: Some(sigma2),
            eigen_order: Some(order),
            ..Default::default()
        },
    )
}

fn loaded(r: &CorrelationMatrix, sigma2: f64) -> DMatrix<f64> {
    let k = r.users();
    r.as_matrix() + DMatrix::<f64>::identity(k, k) * sigma2
}

/// `G_pw^(m) = Σ_{j=0}^{m−1} B̃_j` with `B̃_n = [B̃_{n−1} W^(m−n+1) (I−R)]^⊙`.
pub fn build_weighted_proposed(
    r: &CorrelationMatrix,
    weights: &WeightSchedule,
    m: usize,
) -> Result<MatrixFilter> {
    ensure_stage(m)?;
    let k = r.users();
    if weights.users() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: weights.users(),
        });
    }
    if m >= 2 && weights.max_stage() < m {
        return Err(Error::MissingWeights {
            needed: m,
            covered: weights.max_stage(),
        });
    }
    let e = identity_minus(r.as_matrix());
    let mut b = DMatrix::<f64>::identity(k, k);
    let mut g = b.clone();
    for n in 1..m {
        let w = weights.stage(m - n + 1).expect("checked above");
        // B̃·W scales column c by w_c
        for (c, &wc) in w.iter().enumerate() {
            b.column_mut(c).scale_mut(wc);
        }
        b = &b * &e;
        linalg::zero_diagonal_mut(&mut b)?;
        g += &b;
    }
    MatrixFilter::new(
        g,
        FilterKind::WeightedProposed,
        m,
        FilterParams {
            weights: Some(weights.truncated(m)),
            ..Default::default()
        },
    )
}

/// `R⁻¹`.
pub fn build_decorrelator(r: &CorrelationMatrix) -> Result<MatrixFilter> {
    MatrixFilter::new(
        linalg::invert(r.as_matrix())?,
        FilterKind::Decorrelator,
        1,
        FilterParams::default(),
    )
}

/// `(R + σ²I)⁻¹`.
pub fn build_mmse(r: &CorrelationMatrix, sigma2: f64) -> Result<MatrixFilter> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise variance {sigma2}")));
    }
    MatrixFilter::new(
        linalg::invert(&loaded(r, sigma2))?,
        FilterKind::Mmse,
        1,
        FilterParams {
            sigma2: Some(sigma2),
            ..Default::default()
        },
    )
}

/// Diagonal scaling `F` of the proposed filter's limit, `G_p^(∞) = F·R⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitScaling {
    pub f: DVector<f64>,
    pub tolerance: f64,
    /// Number of `D_n` terms accumulated.
    pub stages: usize,
}

/// `f_k = 1 − Σ_n (D_n)_kk`, where `D_n` is the diagonal of `B_{n−1}(I−R)`.
///
/// Accumulation stops once two successive `D_n` have diagonal norm below `tol`
/// (`D_1` is always zero).
pub fn limit_scaling_matrix(
    r: &CorrelationMatrix,
    tol: f64,
    max_stages: usize,
) -> Result<LimitScaling> {
    let check = model::convergence_check(r.as_matrix())?;
    if !check.converges {
        return Err(Error::NonConvergent(check.max_eigenvalue));
    }
    let k = r.users();
    let e = identity_minus(r.as_matrix());
    let mut b = DMatrix::<f64>::identity(k, k);
    let mut f = DVector::from_element(k, 1.0);
    let mut prev_small = false;
    for n in 1..=max_stages {
        let p = &b * &e;
        let d = p.diagonal();
        f -= &d;
        let small = d.norm() < tol;
        if small && prev_small {
            return Ok(LimitScaling {
                f,
                tolerance: tol,
                stages: n,
            });
        }
        if !d.iter().all(|v| v.is_finite()) {
            return Err(Error::NonConvergent(check.max_eigenvalue));
        }
        prev_small = small;
        b = p;
        linalg::zero_diagonal_mut(&mut b)?;
    }
    Err(Error::MaxStagesExceeded(max_stages))
}

/// Everything needed to build one single-carrier filter from a correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub stage: usize,
    /// Noise variance used by the MMSE-type and weighted filters.
    pub sigma2: f64,
    /// Received amplitudes used to compute optimum weights.
    pub amplitudes: Vec<f64>,
    pub eigen_order: EigenOrder,
}

impl FilterSpec {
    pub fn new(kind: FilterKind, stage: usize) -> Self {
        Self {
            kind,
            stage,
            sigma2: 0.0,
            amplitudes: Vec::new(),
            eigen_order: EigenOrder::Descending,
        }
    }

    pub fn with_noise(mut self, sigma2: f64) -> Self {
        self.sigma2 = sigma2;
        self
    }

    pub fn with_amplitudes(mut self, amplitudes: Vec<f64>) -> Self {
        self.amplitudes = amplitudes;
        self
    }

    pub fn build(&self, r: &CorrelationMatrix) -> Result<MatrixFilter> {
        match self.kind {
            FilterKind::MatchedFilter => Ok(matched_filter(r.users())),
            FilterKind::Conventional => build_conventional(r, self.stage),
            FilterKind::Proposed => build_proposed(r, self.stage),
            FilterKind::MmseConverging => {
                build_mmse_converging(r, self.sigma2, self.stage, self.eigen_order)
            }
            FilterKind::ModifiedMmse => {
                build_modified_mmse(r, self.sigma2, self.stage, self.eigen_order)
            }
            FilterKind::WeightedProposed => {
                let weights = if self.stage >= 2 {
                    let amps = if self.amplitudes.is_empty() {
                        vec![1.0; r.users()]
                    } else {
                        self.amplitudes.clone()
                    };
                    crate::sinr::compute_weight_schedule(r, &amps, self.sigma2, self.stage)?
                        .schedule
                } else {
                    WeightSchedule::empty(r.users())
                };
                build_weighted_proposed(r, &weights, self.stage)
            }
            FilterKind::Decorrelator => build_decorrelator(r),
            FilterKind::Mmse => build_mmse(r, self.sigma2),
        }
    }
}

/// Stage-by-stage conventional cancellation, `y_k^(s) = y_k^(1) − Σ_{j≠k} ρ_jk y_j^(s−1)`.
pub fn cancel_stagewise(
    r: &CorrelationMatrix,
    y1: &DVector<Complex64>,
    m: usize,
) -> Result<DVector<Complex64>> {
    ensure_stage(m)?;
    let k = r.users();
    if y1.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: y1.len(),
        });
    }
    let mut y = y1.clone();
    for _ in 1..m {
        let prev = y.clone();
        for u in 0..k {
            let mut mai = Complex64::new(0.0, 0.0);
            for j in (0..k).filter(|&j| j != u) {
                mai += prev[j] * r.rho(j, u);
            }
            y[u] = y1[u] - mai;
        }
    }
    Ok(y)
}
