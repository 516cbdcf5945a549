//! Interval estimates and closed-form fading references.

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `errors` successes out of `n`; `(NaN, NaN)` when `n = 0`.
pub fn wilson_interval(errors: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let n = n as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // The bounds are exactly 0 and 1 at the extremes.
    let lo = if errors == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if errors as f64 == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// `sqrt(p(1−p)/n)`.
pub fn standard_error(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// BPSK over flat Rayleigh fading with average SNR `gamma` (linear).
pub fn rayleigh_bpsk_ber(gamma: f64) -> f64 {
    0.5 * (1.0 - (gamma / (1.0 + gamma)).sqrt())
}

/// BPSK with `branches`-fold maximal-ratio combining of i.i.d. Rayleigh
/// branches, each at average SNR `gamma_branch` (linear).
pub fn mrc_bpsk_ber(gamma_branch: f64, branches: usize) -> f64 {
    let mu = (gamma_branch / (1.0 + gamma_branch)).sqrt();
    let l = branches as i32;
    let lo = (1.0 - mu) / 2.0;
    let hi = (1.0 + mu) / 2.0;
    let mut sum = 0.0;
    let mut binom = 1.0; // C(L−1+l, l)
    for j in 0..l {
        if j > 0 {
            binom *= f64::from(l - 1 + j) / f64::from(j);
        }
        sum += binom * hi.powi(j);
    }
    lo.powi(l) * sum
}
