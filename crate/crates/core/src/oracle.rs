//! Brute-force expanded forms of the canceller outputs.
//!
//! Every function here evaluates nested index sums literally, one index per
//! loop level, so the cost grows as `K^m`. They exist to check the matrix
//! filters and are guarded by [`COST_GUARD`].
//!
//! A product `ρ_{k v₁} ρ_{v₁ v₂} ⋯ ρ_{v_{s−1} v_s}` is treated as a walk
//! `k → v₁ → ⋯ → v_s` with consecutive vertices distinct.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::CorrelationMatrix;

/// Largest number of index tuples an expanded evaluation may visit.
pub const COST_GUARD: f64 = 1e7;

fn guard(users: usize, m: usize) -> Result<()> {
    let cost = (users as f64).powi(m as i32);
    if cost > COST_GUARD {
        return Err(Error::CostGuard(cost));
    }
    Ok(())
}

fn check_user(r: &CorrelationMatrix, k: usize, vectors: &[&[f64]]) -> Result<()> {
    let users = r.users();
    if users < 2 {
        return Err(Error::InvalidDimensions("at least two users are required".into()));
    }
    if k >= users {
        return Err(Error::InvalidParameter(format!("user index {k}")));
    }
    for v in vectors {
        if v.len() != users {
            return Err(Error::DimensionMismatch {
                expected: users,
                got: v.len(),
            });
        }
    }
    Ok(())
}

/// Which walks a chain sum admits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Walks {
    /// Consecutive vertices distinct.
    Any,
    /// Consecutive vertices distinct and no vertex after the start equals it.
    AvoidStart,
}

/// Calls `f(end, product)` for every walk of `steps` steps starting at `k`.
fn for_each_walk(r: &CorrelationMatrix, k: usize, steps: usize, walks: Walks, f: &mut impl FnMut(usize, f64)) {
    fn go(
        r: &CorrelationMatrix,
        start: usize,
        at: usize,
        left: usize,
        walks: Walks,
        prod: f64,
        f: &mut impl FnMut(usize, f64),
    ) {
        if left == 0 {
            f(at, prod);
            return;
        }
        for next in 0..r.users() {
            if next == at || (walks == Walks::AvoidStart && next == start) {
                continue;
            }
            go(r, start, next, left - 1, walks, prod * r.rho(at, next), f);
        }
    }
    go(r, k, k, steps, walks, 1.0, f);
}

/// Groups of the second-stage output of user `k`:
/// `y_k^(2) = signal − loss − new_interference + noise − extra_noise`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage2Terms {
    pub signal: f64,
    pub loss: f64,
    pub new_interference: f64,
    pub noise: f64,
    pub extra_noise: f64,
}

impl Stage2Terms {
    pub fn total(&self) -> f64 {
        self.signal - self.loss - self.new_interference + self.noise - self.extra_noise
    }
}

pub fn stage2_expanded(r: &CorrelationMatrix, x: &[f64], n: &[f64], k: usize) -> Result<Stage2Terms> {
    check_user(r, k, &[x, n])?;
    let users = r.users();
    let mut loss = 0.0;
    let mut new_interference = 0.0;
    let mut extra_noise = 0.0;
    for j in (0..users).filter(|&j| j != k) {
        loss += r.rho(j, k) * r.rho(j, k) * x[k];
        for l in (0..users).filter(|&l| l != j && l != k) {
            new_interference += r.rho(j, k) * r.rho(j, l) * x[l];
        }
        extra_noise += r.rho(j, k) * n[j];
    }
    Ok(Stage2Terms {
        signal: x[k],
        loss,
        new_interference,
        noise: n[k],
        extra_noise,
    })
}

/// Labeled groups of the third-stage output of user `k`.
///
/// The loss and recovery halves of `A`, and the two halves of `C`, are
/// evaluated by separate sums so their cancellation can be checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage3Terms {
    pub x_k: f64,
    pub n_k: f64,
    /// `Σ_{j≠k} ρ_kj n_j`.
    pub first_noise: f64,
    /// `Σ_{j≠k} ρ_kj ρ_jk x_k`, lost in the second stage.
    pub a_loss: f64,
    /// `Σ_{i≠k} ρ_ki ρ_ik x_k`, recovered in the third stage.
    pub a_recovery: f64,
    pub b_i: f64,
    pub b_n: f64,
    /// `Σ_{j≠k} Σ_{l≠j,k} ρ_kj ρ_jl x_l`, generated in the second stage.
    pub c_generated: f64,
    /// `Σ_{j≠k} Σ_{i≠k,j} ρ_ki ρ_ij x_j`, removed in the third stage.
    pub c_removal: f64,
    pub d: f64,
    pub e_i: f64,
    pub e_n: f64,
}

impl Stage3Terms {
    /// Signed sum of every group; equals the conventional third-stage output.
    pub fn total(&self) -> f64 {
        self.x_k - self.a_loss - self.c_generated + self.n_k - self.first_noise
            + self.a_recovery
            + self.b_i
            + self.b_n
            + self.c_removal
            + self.d
            + self.e_i
            + self.e_n
    }

    /// Third-stage output of the proposed filter, which never generates `B_I` or `B_N`.
    pub fn proposed_total(&self) -> f64 {
        self.x_k - self.a_loss - self.c_generated + self.n_k - self.first_noise
            + self.c_removal
            + self.d
            + self.e_i
            + self.e_n
    }

    /// `−A + A`.
    pub fn a_residual(&self) -> f64 {
        self.a_recovery - self.a_loss
    }

    /// `−C + C`.
    pub fn c_residual(&self) -> f64 {
        self.c_removal - self.c_generated
    }
}

pub fn stage3_terms(r: &CorrelationMatrix, x: &[f64], n: &[f64], k: usize) -> Result<Stage3Terms> {
    check_user(r, k, &[x, n])?;
    let users = r.users();
    let others = |excl: &[usize]| (0..users).filter(move |v| !excl.contains(v)).collect::<Vec<_>>();
    let mut t = Stage3Terms {
        x_k: x[k],
        n_k: n[k],
        first_noise: 0.0,
        a_loss: 0.0,
        a_recovery: 0.0,
        b_i: 0.0,
        b_n: 0.0,
        c_generated: 0.0,
        c_removal: 0.0,
        d: 0.0,
        e_i: 0.0,
        e_n: 0.0,
    };
    for j in others(&[k]) {
        t.first_noise += r.rho(k, j) * n[j];
        t.a_loss += r.rho(k, j) * r.rho(j, k) * x[k];
        for l in others(&[j, k]) {
            t.c_generated += r.rho(k, j) * r.rho(j, l) * x[l];
        }
    }
    for i in others(&[k]) {
        let loop_gain = r.rho(k, i) * r.rho(i, k);
        t.a_recovery += loop_gain * x[k];
        for j in others(&[k]) {
            t.b_i += loop_gain * r.rho(k, j) * x[j];
        }
        t.b_n += loop_gain * n[k];
    }
    for j in others(&[k]) {
        for i in others(&[k, j]) {
            let path = r.rho(k, i) * r.rho(i, j);
            t.c_removal += path * x[j];
            t.d += path * r.rho(j, k) * x[k];
            for l in others(&[k, j]) {
                t.e_i += path * r.rho(j, l) * x[l];
            }
            t.e_n += path * n[j];
        }
    }
    Ok(t)
}

/// Stage-`m` conventional output of user `k` from stage-by-stage increments
/// `y_k^(s) = y_k^(s−1) + (−1)^{s+1} Σ ρ_{k k_{s−1}} ⋯ ρ_{k₂ k₁} y_{k₁}^(1)`,
/// where `k₁` ranges over every user, including `k`.
pub fn stagem_expanded_conventional(r: &CorrelationMatrix, y1: &[f64], k: usize, m: usize) -> Result<f64> {
    check_user(r, k, &[y1])?;
    expanded(r, y1, k, m, Walks::Any)
}

/// Stage-`m` proposed output of user `k`; every summation index excludes `k`.
pub fn stagem_expanded_proposed(r: &CorrelationMatrix, y1: &[f64], k: usize, m: usize) -> Result<f64> {
    check_user(r, k, &[y1])?;
    expanded(r, y1, k, m, Walks::AvoidStart)
}

fn expanded(r: &CorrelationMatrix, y1: &[f64], k: usize, m: usize, walks: Walks) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParameter("stage must be at least 1".into()));
    }
    guard(r.users(), m)?;
    let mut y = y1[k];
    for s in 2..=m {
        let sign = if s % 2 == 1 { 1.0 } else { -1.0 };
        let mut inc = 0.0;
        for_each_walk(r, k, s - 1, walks, &mut |end, prod| inc += prod * y1[end]);
        y += sign * inc;
    }
    Ok(y)
}

/// Split of the stage-`m` conventional output, `m ≥ 4`.
///
/// `T3` acts on `y_k^(1)` and `T4` on `y_{k₁}^(1)`, `k₁ ≠ k`; each is split into
/// the part carried by the desired component of that output and the new
/// interference and noise it drags along. `T5`, `T6` and `noise_series` make
/// up the stage-`(m−1)` output together with `x_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageMDecomposition {
    pub stage: usize,
    pub x_k: f64,
    pub t3_signal: f64,
    pub t3_interference: f64,
    pub t3_noise: f64,
    pub t4_signal: f64,
    pub t4_interference: f64,
    pub t4_noise: f64,
    pub t5: f64,
    pub t6: f64,
    pub noise_series: f64,
}

impl StageMDecomposition {
    /// `T3`'s `x_k` content plus `T5`; zero when the loss is fully recovered.
    pub fn t3_cancellation(&self) -> f64 {
        self.t3_signal + self.t5
    }

    /// `T4`'s `x_{k₁}` content plus `T6`.
    pub fn t4_cancellation(&self) -> f64 {
        self.t4_signal + self.t6
    }

    /// New interference left at stage `m`, of order `ρ^m`.
    pub fn residual_interference(&self) -> f64 {
        self.t3_interference + self.t4_interference
    }

    /// New noise generated at stage `m`, of order `ρ^{m−1}`.
    pub fn residual_noise(&self) -> f64 {
        self.t3_noise + self.t4_noise
    }

    pub fn previous_stage(&self) -> f64 {
        self.x_k + self.t5 + self.t6 + self.noise_series
    }

    pub fn total(&self) -> f64 {
        self.previous_stage()
            + self.t3_signal
            + self.t3_interference
            + self.t3_noise
            + self.t4_signal
            + self.t4_interference
            + self.t4_noise
    }
}

pub fn stagem_decomposition(
    r: &CorrelationMatrix,
    x: &[f64],
    n: &[f64],
    k: usize,
    m: usize,
) -> Result<StageMDecomposition> {
    check_user(r, k, &[x, n])?;
    if m < 4 {
        return Err(Error::InvalidParameter(format!("decomposition needs m >= 4, got {m}")));
    }
    guard(r.users(), m)?;
    let users = r.users();
    // Parts of y_j^(1) = x_j + Σ_{l≠j} ρ_jl x_l + n_j.
    let interference = |j: usize| -> f64 {
        (0..users).filter(|&l| l != j).map(|l| r.rho(j, l) * x[l]).sum()
    };
    let sign_m = if m % 2 == 0 { 1.0 } else { -1.0 };

    let mut d = StageMDecomposition {
        stage: m,
        x_k: x[k],
        t3_signal: 0.0,
        t3_interference: 0.0,
        t3_noise: 0.0,
        t4_signal: 0.0,
        t4_interference: 0.0,
        t4_noise: 0.0,
        t5: 0.0,
        t6: 0.0,
        noise_series: 0.0,
    };
    for_each_walk(r, k, m - 1, Walks::Any, &mut |end, prod| {
        let c = -sign_m * prod;
        if end == k {
            d.t3_signal += c * x[k];
            d.t3_interference += c * interference(k);
            d.t3_noise += c * n[k];
            d.t5 += sign_m * prod * x[k];
        } else {
            d.t4_signal += c * x[end];
            d.t4_interference += c * interference(end);
            d.t4_noise += c * n[end];
            d.t6 += sign_m * prod * x[end];
        }
    });
    for s in 0..=(m - 2) {
        let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
        for_each_walk(r, k, s, Walks::Any, &mut |end, prod| d.noise_series += sign * prod * n[end]);
    }
    Ok(d)
}

/// What a monomial multiplies at its end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Payload {
    Data,
    Noise,
}

/// `± ρ_{w₀w₁} ρ_{w₁w₂} ⋯ · (x or n)_{w_last}`, keyed by its ordered walk.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    pub walk: Vec<usize>,
    pub payload: Payload,
}

impl Monomial {
    pub fn target(&self) -> usize {
        *self.walk.last().expect("walks are never empty")
    }

    pub fn is_interference(&self) -> bool {
        self.payload == Payload::Data && self.target() != self.walk[0]
    }

    pub fn is_noise(&self) -> bool {
        self.payload == Payload::Noise
    }

    pub fn evaluate(&self, r: &CorrelationMatrix, x: &[f64], n: &[f64]) -> f64 {
        let prod: f64 = self.walk.windows(2).map(|w| r.rho(w[0], w[1])).product();
        let v = match self.payload {
            Payload::Data => x[self.target()],
            Payload::Noise => n[self.target()],
        };
        prod * v
    }
}

/// Net integer coefficient of every monomial; zero entries are removed.
pub type MonomialSet = BTreeMap<Monomial, i64>;

fn walks_of(users: usize, k: usize, steps: usize, walks: Walks) -> Vec<Vec<usize>> {
    let mut out = vec![vec![k]];
    for _ in 0..steps {
        let mut next = Vec::new();
        for w in &out {
            let at = *w.last().unwrap();
            for v in 0..users {
                if v == at || (walks == Walks::AvoidStart && v == k) {
                    continue;
                }
                let mut w2 = w.clone();
                w2.push(v);
                next.push(w2);
            }
        }
        out = next;
    }
    out
}

fn monomials(users: usize, k: usize, m: usize, walks: Walks) -> Result<MonomialSet> {
    if users < 2 || k >= users || m == 0 {
        return Err(Error::InvalidParameter(format!("users {users}, user {k}, stage {m}")));
    }
    guard(users, m)?;
    let mut set = MonomialSet::new();
    let mut add = |walk: Vec<usize>, payload: Payload, c: i64| {
        *set.entry(Monomial { walk, payload }).or_insert(0) += c;
    };
    for s in 0..m {
        let sign = if s % 2 == 0 { 1 } else { -1 };
        for w in walks_of(users, k, s, walks) {
            let end = *w.last().unwrap();
            add(w.clone(), Payload::Data, sign);
            add(w.clone(), Payload::Noise, sign);
            for l in (0..users).filter(|&l| l != end) {
                let mut ext = w.clone();
                ext.push(l);
                add(ext, Payload::Data, sign);
            }
        }
    }
    set.retain(|_, c| *c != 0);
    Ok(set)
}

/// Symbolic expansion of the stage-`m` conventional output of user `k`.
pub fn conventional_monomials(users: usize, k: usize, m: usize) -> Result<MonomialSet> {
    monomials(users, k, m, Walks::Any)
}

/// Symbolic expansion of the stage-`m` proposed output of user `k`.
pub fn proposed_monomials(users: usize, k: usize, m: usize) -> Result<MonomialSet> {
    monomials(users, k, m, Walks::AvoidStart)
}

/// Interference and noise monomials of the proposed output that are absent
/// from the conventional output. Empty when the subset property holds.
pub fn term_subset_violations(users: usize, k: usize, m: usize) -> Result<Vec<Monomial>> {
    let conv = conventional_monomials(users, k, m)?;
    let prop = proposed_monomials(users, k, m)?;
    Ok(prop
        .keys()
        .filter(|t| t.is_interference() || t.is_noise())
        .filter(|t| !conv.contains_key(*t))
        .cloned()
        .collect())
}

pub fn evaluate_monomials(set: &MonomialSet, r: &CorrelationMatrix, x: &[f64], n: &[f64]) -> f64 {
    set.iter().map(|(t, &c)| c as f64 * t.evaluate(r, x, n)).sum()
}
