//! Stationary vector of the generator truncated to `{a : |a|_1 <= N}`.
//!
//! Inflow out of the top level is dropped (reflecting truncation). Small
//! lattices are solved densely with one balance equation replaced by the
//! normalization; larger ones use exact block elimination over the levels
//! `E_0, ..., E_N`, exploiting that every jump changes `n` by at most one.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use serde_json::json;

use super::{network_params, VerificationReport};
use crate::analytic::{poisson_tail_bound, MixtureStationary};
use crate::error::{Error, Result};
use crate::model::{simplex_size, ReactionNetwork, Simplex, TransitionKind};

/// Upper bound on lattice size.
pub const STATE_CAP: u128 = 2_000_000;
/// Dense LU is used up to this many states.
pub const DENSE_STATE_MAX: usize = 2_000;
/// Largest single level handled by block elimination.
pub const MAX_LEVEL_BLOCK: usize = 4_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Dense,
    LevelReduction,
}

/// Truncated stationary law, stored level by level.
#[derive(Debug, Clone)]
pub struct TruncatedSolution {
    pub d: usize,
    pub n_total: u64,
    pub method: SolveMethod,
    /// `levels[n]` lists `E_n` in [`Simplex`] order.
    pub levels: Vec<Vec<Vec<u64>>>,
    pub probs: Vec<Vec<f64>>,
    /// Chernoff bound on the stationary mass beyond `N`.
    pub tail_bound: f64,
}

impl TruncatedSolution {
    pub fn iter(&self) -> impl Iterator<Item = (&[u64], f64)> + '_ {
        self.levels
            .iter()
            .zip(&self.probs)
            .flat_map(|(states, ps)| states.iter().map(Vec::as_slice).zip(ps.iter().copied()))
    }

    pub fn to_map(&self) -> BTreeMap<Vec<u64>, f64> {
        self.iter().map(|(a, p)| (a.to_vec(), p)).collect()
    }

    /// Marginal law of the total count.
    pub fn level_masses(&self) -> Vec<f64> {
        self.probs.iter().map(|ps| ps.iter().sum()).collect()
    }

    pub fn n_states(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// TV distance to `ms` renormalized on the truncated lattice.
    pub fn tv_to(&self, ms: &MixtureStationary) -> Result<f64> {
        let mut q = Vec::with_capacity(self.n_states());
        for (a, _) in self.iter() {
            q.push(ms.ln_pmf(a)?.exp());
        }
        let z: f64 = q.iter().sum();
        Ok(0.5
            * self
                .iter()
                .zip(&q)
                .map(|((_, p), qv)| (p - qv / z).abs())
                .sum::<f64>())
    }
}

fn lattice_size(d: usize, n_total: u64) -> u128 {
    // |{a : |a|_1 <= N}| = C(N + d, d)
    simplex_size(d + 1, n_total)
}

/// Solve `pi Q = 0` on the truncated lattice.
pub fn truncated_stationary_solve(net: &ReactionNetwork, n_total: u64) -> Result<TruncatedSolution> {
    let d = net.dimension();
    let size = lattice_size(d, n_total);
    if size > STATE_CAP {
        return Err(Error::SizeCap {
            states: size,
            cap: STATE_CAP,
        });
    }
    if size as usize <= DENSE_STATE_MAX {
        solve_dense(net, n_total)
    } else {
        solve_levels(net, n_total)
    }
}

/// Same as [`truncated_stationary_solve`] with the method forced.
pub fn solve_with(net: &ReactionNetwork, n_total: u64, method: SolveMethod) -> Result<TruncatedSolution> {
    match method {
        SolveMethod::Dense => solve_dense(net, n_total),
        SolveMethod::LevelReduction => solve_levels(net, n_total),
    }
}

fn build_levels(d: usize, n_total: u64) -> (Vec<Vec<Vec<u64>>>, Vec<HashMap<Vec<u64>, usize>>) {
    let levels: Vec<Vec<Vec<u64>>> = (0..=n_total).map(|n| Simplex::new(d, n).collect()).collect();
    let index = levels
        .iter()
        .map(|l| l.iter().enumerate().map(|(k, a)| (a.clone(), k)).collect())
        .collect();
    (levels, index)
}

fn tail(net: &ReactionNetwork, n_total: u64) -> f64 {
    // the total count is dominated by a birth-death chain with death rate min(delta) n
    let dmin = net.delta().iter().copied().fold(f64::INFINITY, f64::min);
    poisson_tail_bound(net.total_inflow() / dmin, n_total)
}

/// Outgoing transitions `(target level offset, target state, rate)` kept by the truncation.
fn moves(net: &ReactionNetwork, a: &[u64], n: u64, n_total: u64) -> Vec<(i64, Vec<u64>, f64)> {
    let mut out = Vec::new();
    for kind in net.reactions() {
        let rate = net.rate(kind, a);
        if rate <= 0.0 {
            continue;
        }
        let dn = kind.total_change();
        if dn == 1 && n == n_total {
            continue;
        }
        let mut b = a.to_vec();
        if let TransitionKind::Autocatalytic { from, .. } | TransitionKind::Outflow(from) = kind {
            if b[from] == 0 {
                continue;
            }
        }
        kind.apply_in_place(&mut b).expect("feasible jump");
        out.push((dn, b, rate));
    }
    out
}

fn solve_dense(net: &ReactionNetwork, n_total: u64) -> Result<TruncatedSolution> {
    let d = net.dimension();
    let (levels, index) = build_levels(d, n_total);
    let offsets: Vec<usize> = levels
        .iter()
        .scan(0, |acc, l| {
            let o = *acc;
            *acc += l.len();
            Some(o)
        })
        .collect();
    let m = offsets.last().unwrap() + levels.last().unwrap().len();

    // rows of Q^T: balance equation of each target state
    let mut qt = DMatrix::<f64>::zeros(m, m);
    for (n, states) in levels.iter().enumerate() {
        for (k, a) in states.iter().enumerate() {
            let src = offsets[n] + k;
            for (dn, b, rate) in moves(net, a, n as u64, n_total) {
                let tn = (n as i64 + dn) as usize;
                let dst = offsets[tn] + index[tn][&b];
                qt[(dst, src)] += rate;
                qt[(src, src)] -= rate;
            }
        }
    }
    for c in 0..m {
        qt[(0, c)] = 1.0;
    }
    let mut rhs = nalgebra::DVector::<f64>::zeros(m);
    rhs[0] = 1.0;
    let sol = qt.lu().solve(&rhs).ok_or(Error::Singular)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    let probs = levels
        .iter()
        .enumerate()
        .map(|(n, l)| (0..l.len()).map(|k| sol[offsets[n] + k].max(0.0)).collect())
        .collect();
    let mut out = TruncatedSolution {
        d,
        n_total,
        method: SolveMethod::Dense,
        levels,
        probs,
        tail_bound: tail(net, n_total),
    };
    renormalize(&mut out);
    Ok(out)
}

fn renormalize(sol: &mut TruncatedSolution) {
    let z: f64 = sol.probs.iter().flatten().sum();
    for ps in &mut sol.probs {
        ps.iter_mut().for_each(|p| *p /= z);
    }
}

/// Block elimination. With `A_n` the within-level block, `U_n` the
/// level-up block and `L_n` the level-down block, set `S_N = A_N`,
/// `R_n = U_{n-1} (-S_n)^{-1}` and `S_{n-1} = A_{n-1} + R_n L_n`;
/// then `pi_n = pi_{n-1} R_n` from `pi_0 = 1`.
fn solve_levels(net: &ReactionNetwork, n_total: u64) -> Result<TruncatedSolution> {
    let d = net.dimension();
    let (levels, index) = build_levels(d, n_total);
    if let Some(big) = levels.iter().map(Vec::len).max().filter(|&b| b > MAX_LEVEL_BLOCK) {
        return Err(Error::SizeCap {
            states: big as u128,
            cap: MAX_LEVEL_BLOCK as u128,
        });
    }
    let nl = levels.len();
    let mut within: Vec<DMatrix<f64>> = Vec::with_capacity(nl);
    let mut up: Vec<DMatrix<f64>> = Vec::with_capacity(nl);
    let mut down: Vec<DMatrix<f64>> = Vec::with_capacity(nl);
    for (n, states) in levels.iter().enumerate() {
        let b = states.len();
        let mut a_blk = DMatrix::<f64>::zeros(b, b);
        let mut u_blk = DMatrix::<f64>::zeros(b, if n + 1 < nl { levels[n + 1].len() } else { 0 });
        let mut l_blk = DMatrix::<f64>::zeros(b, if n > 0 { levels[n - 1].len() } else { 0 });
        for (k, a) in states.iter().enumerate() {
            for (dn, tgt, rate) in moves(net, a, n as u64, n_total) {
                a_blk[(k, k)] -= rate;
                match dn {
                    0 => a_blk[(k, index[n][&tgt])] += rate,
                    1 => u_blk[(k, index[n + 1][&tgt])] += rate,
                    _ => l_blk[(k, index[n - 1][&tgt])] += rate,
                }
            }
        }
        within.push(a_blk);
        up.push(u_blk);
        down.push(l_blk);
    }

    // r[n] maps pi_{n-1} to pi_n
    let mut r: Vec<Option<DMatrix<f64>>> = vec![None; nl];
    let mut s = within[nl - 1].clone();
    for n in (1..nl).rev() {
        let neg_s = -&s;
        // R_n^T = (-S_n)^{-T} U_{n-1}^T
        let rt = neg_s
            .transpose()
            .lu()
            .solve(&up[n - 1].transpose())
            .ok_or(Error::Singular)?;
        let rn = rt.transpose();
        s = &within[n - 1] + &rn * &down[n];
        r[n] = Some(rn);
    }

    let mut probs: Vec<Vec<f64>> = Vec::with_capacity(nl);
    let mut cur = DMatrix::<f64>::from_element(1, 1, 1.0);
    probs.push(vec![1.0]);
    for rn in r.iter().skip(1) {
        cur = &cur * rn.as_ref().expect("filled for n >= 1");
        probs.push(cur.iter().map(|v| v.max(0.0)).collect());
    }
    if probs.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    let mut out = TruncatedSolution {
        d,
        n_total,
        method: SolveMethod::LevelReduction,
        levels,
        probs,
        tail_bound: tail(net, n_total),
    };
    renormalize(&mut out);
    Ok(out)
}

/// Compare the truncated solution with the network's closed-form law.
pub fn oracle_report(net: &ReactionNetwork, n_total: u64, tolerance: f64) -> Result<VerificationReport> {
    let ms = MixtureStationary::for_network(net)?;
    let sol = truncated_stationary_solve(net, n_total)?;
    let tv = sol.tv_to(&ms)?;
    let mut rep = VerificationReport::new(
        "oracle",
        json!({ "network": network_params(net), "n_total": n_total,
                "mixture": ms }),
        tolerance,
    );
    // worst pointwise discrepancy
    let z: f64 = sol.iter().map(|(a, _)| ms.ln_pmf(a).map(f64::exp).unwrap_or(0.0)).sum();
    for (a, p) in sol.iter() {
        let q = ms.ln_pmf(a)?.exp() / z;
        let abs = (p - q).abs();
        if abs > rep.max_abs_residual {
            rep.max_abs_residual = abs;
            rep.worst_case = json!({ "state": a, "oracle": p, "closed_form": q });
        }
    }
    rep.max_rel_residual = tv;
    rep.passed = tv <= tolerance;
    rep.notes.push(format!(
        "TV distance {tv:e} over {} states ({:?}); Poisson tail bound beyond N: {:e}",
        sol.n_states(),
        sol.method,
        sol.tail_bound
    ));
    Ok(rep)
}
