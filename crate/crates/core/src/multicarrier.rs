//! Multicarrier CDMA receivers.
//!
//! Each of the `M` subcarriers carries the same bits through an independent
//! fading channel. Two receiver orders are provided:
//!
//! * Type-I cancels interference on every subcarrier with a fixed filter built
//!   from `R^(i)` and then combines with maximal ratio weights.
//! * Type-II combines first, `y^c = Σ_i H^(i)H y^(i) = R^c A b + n^c`, and then
//!   cancels in the combined domain with filters built from
//!   `R_eff = R^c H_D⁻¹`, where `H_D = diag(Σ_i |h_k^(i)|²)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::filters::{self, FilterKind, FilterParams, FilterSpec, MatrixFilter};
use crate::linalg;
use crate::model::{ChannelRealization, CorrelationMatrix, MatchedFilterOutput};

/// Matrices of the combined-domain model for one channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct McEffectiveModel {
    /// `R^c = Σ_i H^(i)H R^(i) H^(i)`, Hermitian.
    pub r_c: DMatrix<Complex64>,
    /// Diagonal of `H_D`.
    pub h_d: DVector<f64>,
    /// `R_eff = R^c H_D⁻¹`.
    pub r_eff: DMatrix<Complex64>,
}

impl McEffectiveModel {
    pub fn users(&self) -> usize {
        self.h_d.len()
    }

    /// `I − R_eff`.
    pub fn residual(&self) -> DMatrix<Complex64> {
        filters::identity_minus(&self.r_eff)
    }

    /// `H_D^{-1/2} R^c H_D^{-1/2}`, Hermitian and similar to `R_eff`.
    pub fn normalized(&self) -> DMatrix<Complex64> {
        let k = self.users();
        let s: Vec<f64> = self.h_d.iter().map(|d| d.sqrt().recip()).collect();
        DMatrix::from_fn(k, k, |i, j| self.r_c[(i, j)] * (s[i] * s[j]))
    }

    /// Largest eigenvalue of `R_eff`.
    pub fn max_eigenvalue(&self) -> Result<f64> {
        let eig = self
            .normalized()
            .try_symmetric_eigen(f64::EPSILON, 0)
            .ok_or(Error::Eigen)?;
        eig.eigenvalues
            .iter()
            .copied()
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
            .filter(|v| v.is_finite())
            .ok_or(Error::Eigen)
    }

    /// Whether the combined-domain Neumann series converges, `λ_max(R_eff) < 2`.
    ///
    /// Uses a Cholesky attempt on `2I − H_D^{-1/2} R^c H_D^{-1/2}` rather than
    /// an eigendecomposition.
    pub fn converges(&self) -> bool {
        let k = self.users();
        let shifted = DMatrix::<Complex64>::identity(k, k) * Complex64::new(2.0, 0.0) - self.normalized();
        linalg::is_hermitian_positive_definite(&shifted)
    }
}

/// Builds `R^c`, `H_D` and `R_eff` from per-subcarrier correlations and a channel draw.
pub fn effective_matrices(
    correlations: &[CorrelationMatrix],
    channel: &ChannelRealization,
) -> Result<McEffectiveModel> {
    let k = channel.users();
    check_subcarriers(correlations, channel)?;
    let mut r_c = DMatrix::<Complex64>::zeros(k, k);
    let mut h_d = DVector::<f64>::zeros(k);
    for (i, r) in correlations.iter().enumerate() {
        let rm = r.as_matrix();
        for a in 0..k {
            let ha = channel.coefficient(i, a).conj();
            h_d[a] += ha.norm_sqr();
            for b in 0..k {
                r_c[(a, b)] += ha * channel.coefficient(i, b) * rm[(a, b)];
            }
        }
    }
    let r_c = (&r_c + r_c.adjoint()) * Complex64::new(0.5, 0.0);
    if let Some(user) = h_d.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::SingularChannel(user));
    }
    let r_eff = DMatrix::from_fn(k, k, |a, b| r_c[(a, b)] / h_d[b]);
    Ok(McEffectiveModel { r_c, h_d, r_eff })
}

fn check_subcarriers(correlations: &[CorrelationMatrix], channel: &ChannelRealization) -> Result<()> {
    if correlations.len() != channel.subcarriers() {
        return Err(Error::DimensionMismatch {
            expected: channel.subcarriers(),
            got: correlations.len(),
        });
    }
    for r in correlations {
        if r.users() != channel.users() {
            return Err(Error::DimensionMismatch {
                expected: channel.users(),
                got: r.users(),
            });
        }
    }
    Ok(())
}

fn check_outputs(outputs: &[MatchedFilterOutput], channel: &ChannelRealization) -> Result<()> {
    if outputs.len() != channel.subcarriers() {
        return Err(Error::DimensionMismatch {
            expected: channel.subcarriers(),
            got: outputs.len(),
        });
    }
    for y in outputs {
        if y.values.len() != channel.users() {
            return Err(Error::DimensionMismatch {
                expected: channel.users(),
                got: y.values.len(),
            });
        }
    }
    Ok(())
}

/// Combiner output `y^c = R^c A b + z`, where `z` has covariance `σ²R^c`.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedOutput {
    pub values: DVector<Complex64>,
}

/// Maximal-ratio combining across subcarriers, `y^c_k = Σ_i h_k^(i)* y_k^(i)`.
pub fn mcc_combine(
    outputs: &[MatchedFilterOutput],
    channel: &ChannelRealization,
) -> Result<CombinedOutput> {
    check_outputs(outputs, channel)?;
    let k = channel.users();
    let mut yc = DVector::<Complex64>::zeros(k);
    for (i, y) in outputs.iter().enumerate() {
        for u in 0..k {
            yc[u] += channel.coefficient(i, u).conj() * y.values[u];
        }
    }
    Ok(CombinedOutput { values: yc })
}

/// `G^c = Σ_{j<m} (I − R_eff)^j`.
pub fn build_conventional_mcc(model: &McEffectiveModel, m: usize) -> Result<MatrixFilter<Complex64>> {
    let g = filters::conventional_series(&model.residual(), m.max(1));
    MatrixFilter::new(g, FilterKind::Conventional, m, FilterParams::default())
}

/// `G_p^c = Σ_{j<m} B_j` with `B_n = [B_{n−1}(I − R_eff)]^⊙`.
pub fn build_proposed_mcc(model: &McEffectiveModel, m: usize) -> Result<MatrixFilter<Complex64>> {
    let g = filters::proposed_series(&model.residual(), m.max(1));
    MatrixFilter::new(g, FilterKind::Proposed, m, FilterParams::default())
}

/// `R_eff⁻¹`.
pub fn build_decorrelator_mcc(model: &McEffectiveModel) -> Result<MatrixFilter<Complex64>> {
    let inv = linalg::invert(&model.r_eff)?;
    MatrixFilter::new(inv, FilterKind::Decorrelator, 1, FilterParams::default())
}

fn sign_re(z: Complex64) -> i8 {
    if z.re < 0.0 {
        -1
    } else {
        1
    }
}

/// Type-I receiver with one fixed filter per subcarrier.
#[derive(Debug, Clone)]
pub struct Type1Receiver {
    filters: Vec<MatrixFilter>,
}

impl Type1Receiver {
    pub fn new(spec: &FilterSpec, correlations: &[CorrelationMatrix]) -> Result<Self> {
        if correlations.is_empty() {
            return Err(Error::InvalidDimensions("no subcarriers".into()));
        }
        let filters = correlations
            .iter()
            .map(|r| spec.build(r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { filters })
    }

    pub fn filters(&self) -> &[MatrixFilter] {
        &self.filters
    }

    /// Combined soft statistic of one user, `Σ_i h^(i)* (G^(i) y^(i))_user`.
    pub fn statistic(
        &self,
        user: usize,
        outputs: &[MatchedFilterOutput],
        channel: &ChannelRealization,
    ) -> Result<Complex64> {
        check_outputs(outputs, channel)?;
        if self.filters.len() != outputs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.filters.len(),
                got: outputs.len(),
            });
        }
        if user >= channel.users() {
            return Err(Error::InvalidParameter(format!("user index {user}")));
        }
        Ok(self
            .filters
            .iter()
            .zip(outputs)
            .enumerate()
            .map(|(i, (g, y))| channel.coefficient(i, user).conj() * g.apply_row(user, &y.values))
            .sum())
    }

    pub fn decide(
        &self,
        outputs: &[MatchedFilterOutput],
        channel: &ChannelRealization,
    ) -> Result<Vec<i8>> {
        (0..channel.users())
            .map(|u| self.statistic(u, outputs, channel).map(sign_re))
            .collect()
    }
}

/// Per-subcarrier cancellation followed by maximal-ratio combining.
pub fn type1_receive(
    spec: &FilterSpec,
    correlations: &[CorrelationMatrix],
    outputs: &[MatchedFilterOutput],
    channel: &ChannelRealization,
) -> Result<Vec<i8>> {
    check_subcarriers(correlations, channel)?;
    Type1Receiver::new(spec, correlations)?.decide(outputs, channel)
}

/// Whether a filter kind has a combined-domain (Type-II) definition.
pub fn type2_supports(kind: FilterKind) -> bool {
    matches!(
        kind,
        FilterKind::MatchedFilter
            | FilterKind::Conventional
            | FilterKind::Proposed
            | FilterKind::Decorrelator
            | FilterKind::Mmse
    )
}

/// Combining followed by cancellation with `R_eff`.
///
/// `Mmse` has no combined-domain form; it is evaluated as per-subcarrier
/// `(R^(i)+σ²I)⁻¹` followed by combining, which is the Type-I MMSE receiver.
pub fn type2_receive(
    spec: &FilterSpec,
    correlations: &[CorrelationMatrix],
    outputs: &[MatchedFilterOutput],
    channel: &ChannelRealization,
) -> Result<Vec<i8>> {
    if !type2_supports(spec.kind) {
        return Err(Error::InvalidParameter(format!(
            "{} is not defined for the Type-II receiver",
            spec.kind.label()
        )));
    }
    if spec.kind == FilterKind::Mmse {
        return type1_receive(spec, correlations, outputs, channel);
    }
    let model = effective_matrices(correlations, channel)?;
    let yc = mcc_combine(outputs, channel)?.values;
    let z = match spec.kind {
        FilterKind::MatchedFilter => yc,
        FilterKind::Conventional => build_conventional_mcc(&model, spec.stage)?.apply(&yc)?,
        FilterKind::Proposed => build_proposed_mcc(&model, spec.stage)?.apply(&yc)?,
        FilterKind::Decorrelator => build_decorrelator_mcc(&model)?.apply(&yc)?,
        _ => unreachable!("rejected above"),
    };
    Ok(z.iter().copied().map(sign_re).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{self, sample_channel, SymbolBlock};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_setup(k: usize, p: usize, m: usize, seed: u64) -> (Vec<CorrelationMatrix>, ChannelRealization) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rs = (0..m)
            .map(|_| model::correlation_matrix(&model::generate_spreading_set(k, p, &mut rng).unwrap()))
            .collect();
        let ch = sample_channel(k, m, &mut rng).unwrap();
        (rs, ch)
    }

    fn noiseless_outputs(
        rs: &[CorrelationMatrix],
        ch: &ChannelRealization,
        block: &SymbolBlock,
    ) -> Vec<MatchedFilterOutput> {
        let k = ch.users();
        let zero = model::NoiseVector {
            samples: DVector::zeros(k),
            variance: 0.0,
        };
        rs.iter()
            .enumerate()
            .map(|(i, r)| model::matched_filter_output(r, &ch.subcarrier(i), block, &zero).unwrap())
            .collect()
    }

    #[test]
    fn single_subcarrier_unit_channel_reduces_to_single_carrier() {
        let r = model::equicorrelated_matrix(4, 0.2).unwrap();
        let ch = ChannelRealization::unit(4, 1);
        let m = effective_matrices(std::slice::from_ref(&r), &ch).unwrap();
        let real = m.r_eff.map(|z| z.re);
        assert!(linalg::frobenius_distance(&real, r.as_matrix()) < 1e-15);
        assert!(m.r_eff.iter().all(|z| z.im == 0.0));
        assert!(m.h_d.iter().all(|&d| d == 1.0));
    }

    #[test]
    fn uncorrelated_users_give_identity() {
        let (_, ch) = random_setup(3, 8, 4, 5);
        let rs = vec![CorrelationMatrix::identity(3); 4];
        let m = effective_matrices(&rs, &ch).unwrap();
        let id = DMatrix::<Complex64>::identity(3, 3);
        assert!(linalg::frobenius_distance(&m.r_eff, &id) < 1e-14);
    }

    #[test]
    fn combined_matrix_is_hermitian_with_hd_diagonal() {
        let (rs, ch) = random_setup(5, 16, 4, 11);
        let m = effective_matrices(&rs, &ch).unwrap();
        assert!(linalg::frobenius_distance(&m.r_c, &m.r_c.adjoint()) < 1e-14);
        for k in 0..5 {
            assert!((m.r_c[(k, k)].re - m.h_d[k]).abs() < 1e-12);
            assert!((m.r_eff[(k, k)] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn decorrelator_recovers_weighted_bits() {
        let (rs, ch) = random_setup(4, 16, 4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let block = SymbolBlock::random(&[1.0, 2.0, 1.0, 2.0], &mut rng).unwrap();
        let outputs = noiseless_outputs(&rs, &ch, &block);
        let m = effective_matrices(&rs, &ch).unwrap();
        let yc = mcc_combine(&outputs, &ch).unwrap().values;
        let z = build_decorrelator_mcc(&m).unwrap().apply(&yc).unwrap();
        for k in 0..4 {
            let expected = m.h_d[k] * block.amplitudes()[k] * f64::from(block.bits()[k]);
            assert!((z[k] - Complex64::new(expected, 0.0)).norm() < 1e-10 * expected.abs());
        }
    }

    #[test]
    fn combined_noise_covariance() {
        let (rs, ch) = random_setup(3, 8, 2, 21);
        let sigma2 = 0.5;
        let shapers: Vec<_> = rs.iter().map(|r| model::NoiseShaper::new(r).unwrap()).collect();
        let m = effective_matrices(&rs, &ch).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 200_000;
        let mut cov = DMatrix::<Complex64>::zeros(3, 3);
        for _ in 0..n {
            let outs: Vec<_> = shapers
                .iter()
                .map(|s| MatchedFilterOutput {
                    values: s.sample(sigma2, &mut rng).unwrap().samples,
                })
                .collect();
            let yc = mcc_combine(&outs, &ch).unwrap().values;
            cov += &yc * yc.adjoint();
        }
        cov /= Complex64::new(n as f64, 0.0);
        let expected = &m.r_c * Complex64::new(sigma2, 0.0);
        let scale = expected.norm();
        assert!(linalg::frobenius_distance(&cov, &expected) < 0.02 * scale);
    }

    #[test]
    fn filter_series_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rs = vec![model::equicorrelated_matrix(4, 0.1).unwrap(); 2];
        let ch = sample_channel(4, 2, &mut rng).unwrap();
        let m = effective_matrices(&rs, &ch).unwrap();
        assert!(m.converges());
        assert!(m.max_eigenvalue().unwrap() < 2.0);
        let inv = linalg::invert(&m.r_eff).unwrap();
        let g = build_conventional_mcc(&m, 200).unwrap();
        assert!(linalg::frobenius_distance(g.matrix(), &inv) < 1e-10);
        let g1 = build_conventional_mcc(&m, 1).unwrap();
        assert_eq!(g1.matrix(), &DMatrix::identity(4, 4));
        let gp = build_proposed_mcc(&m, 2).unwrap();
        let expected = DMatrix::identity(4, 4) + filters::zero_diagonal(&m.residual()).unwrap();
        assert!(linalg::frobenius_distance(gp.matrix(), &expected) < 1e-15);
    }

    #[test]
    fn convergence_test_matches_eigenvalues() {
        for seed in 0..20 {
            let (rs, ch) = random_setup(12, 16, 2, seed);
            let m = effective_matrices(&rs, &ch).unwrap();
            let lmax = m.max_eigenvalue().unwrap();
            if (lmax - 2.0).abs() > 1e-9 {
                assert_eq!(m.converges(), lmax < 2.0, "seed {seed}, lmax {lmax}");
            }
        }
    }

    #[test]
    fn zero_gain_user_is_rejected() {
        let mut coeffs = DMatrix::from_element(2, 3, Complex64::new(1.0, 0.0));
        coeffs[(0, 1)] = Complex64::new(0.0, 0.0);
        coeffs[(1, 1)] = Complex64::new(0.0, 0.0);
        let ch = ChannelRealization::from_coefficients(coeffs).unwrap();
        let rs = vec![CorrelationMatrix::identity(3); 2];
        assert_eq!(effective_matrices(&rs, &ch), Err(Error::SingularChannel(1)));
    }

    #[test]
    fn receivers_agree_when_noiseless_and_orthogonal() {
        let (_, ch) = random_setup(3, 8, 4, 2);
        let rs = vec![CorrelationMatrix::identity(3); 4];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let block = SymbolBlock::random(&[1.0; 3], &mut rng).unwrap();
        let outputs = noiseless_outputs(&rs, &ch, &block);
        for kind in [FilterKind::MatchedFilter, FilterKind::Conventional, FilterKind::Decorrelator] {
            let spec = FilterSpec::new(kind, 3);
            assert_eq!(type1_receive(&spec, &rs, &outputs, &ch).unwrap(), block.bits());
            assert_eq!(type2_receive(&spec, &rs, &outputs, &ch).unwrap(), block.bits());
        }
    }

    #[test]
    fn type2_rejects_undefined_filters() {
        let (rs, ch) = random_setup(3, 8, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let block = SymbolBlock::random(&[1.0; 3], &mut rng).unwrap();
        let outputs = noiseless_outputs(&rs, &ch, &block);
        let spec = FilterSpec::new(FilterKind::MmseConverging, 2).with_noise(0.1);
        assert!(matches!(
            type2_receive(&spec, &rs, &outputs, &ch),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn combining_examples() {
        let ch = ChannelRealization::unit(3, 2);
        let y = MatchedFilterOutput {
            values: DVector::from_vec(vec![
                Complex64::new(1.0, 0.5),
                Complex64::new(-2.0, 0.0),
                Complex64::new(0.0, 1.0),
            ]),
        };
        let yc = mcc_combine(&[y.clone(), y.clone()], &ch).unwrap();
        assert_eq!(yc.values, &y.values * Complex64::new(2.0, 0.0));
        let one = mcc_combine(std::slice::from_ref(&y), &ChannelRealization::unit(3, 1)).unwrap();
        assert_eq!(one.values, y.values);
        assert!(matches!(mcc_combine(&[y], &ch), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn repeated_subcarrier_doubles_combined_matrix() {
        let r = model::equicorrelated_matrix(3, -0.1).unwrap();
        let m = effective_matrices(&[r.clone(), r.clone()], &ChannelRealization::unit(3, 2)).unwrap();
        let twice = r.as_matrix().map(|v| Complex64::new(2.0 * v, 0.0));
        assert!(linalg::frobenius_distance(&m.r_c, &twice) < 1e-15);
        assert!(m.h_d.iter().all(|&d| d == 2.0));
        let real = m.r_eff.map(|z| z.re);
        assert!(linalg::frobenius_distance(&real, r.as_matrix()) < 1e-15);
    }

    #[test]
    fn single_user_effective_matrix_is_one() {
        let (rs, ch) = random_setup(1, 4, 3, 6);
        let m = effective_matrices(&rs, &ch).unwrap();
        assert!((m.r_eff[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn combined_output_reconstruction() {
        let (rs, ch) = random_setup(4, 32, 3, 13);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let block = SymbolBlock::random(&[1.0, 10.0, 1.0, 10.0], &mut rng).unwrap();
        let noises: Vec<_> = rs.iter().map(|r| model::sample_noise(r, 0.3, &mut rng).unwrap()).collect();
        let outputs: Vec<_> = rs
            .iter()
            .zip(&noises)
            .enumerate()
            .map(|(i, (r, n))| model::matched_filter_output(r, &ch.subcarrier(i), &block, n).unwrap())
            .collect();
        let noise_only: Vec<_> = noises.iter().map(|n| MatchedFilterOutput { values: n.samples.clone() }).collect();
        let z = mcc_combine(&noise_only, &ch).unwrap().values;
        let m = effective_matrices(&rs, &ch).unwrap();
        let b = block.data_vector().map(|v| Complex64::new(v, 0.0));
        let expected = &m.r_c * b + z;
        let yc = mcc_combine(&outputs, &ch).unwrap().values;
        assert!((yc - expected).norm() < 1e-12);
    }

    #[test]
    fn two_user_structure() {
        let (rs, ch) = random_setup(2, 8, 2, 17);
        let m = effective_matrices(&rs, &ch).unwrap();
        let e = m.residual();
        let g2 = build_conventional_mcc(&m, 2).unwrap();
        assert!(linalg::frobenius_distance(g2.matrix(), &(DMatrix::identity(2, 2) + &e)) < 1e-15);
        let gp2 = build_proposed_mcc(&m, 2).unwrap();
        assert!(linalg::frobenius_distance(gp2.matrix(), g2.matrix()) < 1e-15);
        for stage in 3..6 {
            assert_eq!(build_proposed_mcc(&m, stage).unwrap().matrix(), gp2.matrix());
        }
    }

    #[test]
    fn single_carrier_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let r = model::correlation_matrix(&model::generate_spreading_set(5, 16, &mut rng).unwrap());
        let ch = ChannelRealization::unit(5, 1);
        let shaper = model::NoiseShaper::new(&r).unwrap();
        let kinds = [
            FilterKind::MatchedFilter,
            FilterKind::Conventional,
            FilterKind::Proposed,
            FilterKind::MmseConverging,
            FilterKind::ModifiedMmse,
            FilterKind::WeightedProposed,
            FilterKind::Decorrelator,
            FilterKind::Mmse,
        ];
        for _ in 0..50 {
            let block = SymbolBlock::random(&[1.0; 5], &mut rng).unwrap();
            let noise = shaper.sample(0.5, &mut rng).unwrap();
            let y = model::matched_filter_output(&r, &ch.subcarrier(0), &block, &noise).unwrap();
            let outputs = [y.clone()];
            for kind in kinds {
                for stage in 1..=4 {
                    let spec = FilterSpec::new(kind, stage).with_noise(0.5);
                    let g = spec.build(&r).unwrap();
                    let single: Vec<i8> = (0..5)
                        .map(|u| model::bit_decision(Complex64::new(1.0, 0.0), g.apply_row(u, &y.values)))
                        .collect();
                    let rs = std::slice::from_ref(&r);
                    assert_eq!(type1_receive(&spec, rs, &outputs, &ch).unwrap(), single);
                    if type2_supports(kind) {
                        assert_eq!(type2_receive(&spec, rs, &outputs, &ch).unwrap(), single);
                    }
                }
            }
        }
    }

    #[test]
    fn single_user_receivers_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let rs = vec![CorrelationMatrix::identity(1); 4];
        for _ in 0..200 {
            let ch = sample_channel(1, 4, &mut rng).unwrap();
            let block = SymbolBlock::random(&[1.0], &mut rng).unwrap();
            let outputs: Vec<_> = (0..4)
                .map(|i| {
                    let n = model::sample_noise(&rs[i], 2.0, &mut rng).unwrap();
                    model::matched_filter_output(&rs[i], &ch.subcarrier(i), &block, &n).unwrap()
                })
                .collect();
            for kind in [FilterKind::MatchedFilter, FilterKind::Conventional, FilterKind::Proposed] {
                let spec = FilterSpec::new(kind, 3);
                assert_eq!(
                    type1_receive(&spec, &rs, &outputs, &ch).unwrap(),
                    type2_receive(&spec, &rs, &outputs, &ch).unwrap()
                );
            }
        }
    }

    #[test]
    fn type1_noiseless_decorrelating_limit() {
        let (rs, _) = random_setup(6, 32, 3, 23);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let receiver = Type1Receiver::new(&FilterSpec::new(FilterKind::Decorrelator, 1), &rs).unwrap();
        for _ in 0..100 {
            let ch = sample_channel(6, 3, &mut rng).unwrap();
            let block = SymbolBlock::random(&[1.0; 6], &mut rng).unwrap();
            let outputs = noiseless_outputs(&rs, &ch, &block);
            assert_eq!(receiver.decide(&outputs, &ch).unwrap(), block.bits());
        }
    }
}
