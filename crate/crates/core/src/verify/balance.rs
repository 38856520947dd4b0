//! Stationarity of the product form `pi(a | n) nu(n)`, level by level.
//!
//! Dividing the global balance equation at `a in E_n` by `nu(n)` gives
//! `R_n = L_{n-1} + L_n + L_{n+1}` with
//!
//! ```text
//! R_n     = pi(a|n) [ sum lambda + delta n + sum_{i != j} kappa_ij a_i a_j ]
//! L_{n-1} = delta n / sum lambda * sum_{i: a_i >= 1} lambda_i pi(a - e_i | n-1)
//! L_n     = sum_{i != j, a_j >= 1} kappa_ij (a_i + 1)(a_j - 1) pi(a + e_i - e_j | n)
//! L_{n+1} = sum lambda / (n+1) * sum_i (a_i + 1) pi(a + e_i | n+1)
//! ```
//!
//! `L_n` is built from the actual nonzero pattern of `kappa`, so the same
//! code covers the full-symmetric, cycle and custom cases. States off the
//! simplex carry zero probability.

use serde_json::json;

use super::{network_params, VerificationReport, BALANCE_ABS_FLOOR, BALANCE_REL_TOL};
use crate::analytic::{conditional_pmf, Conditional};
use crate::error::{Error, Result};
use crate::model::{ReactionNetwork, Simplex, Topology};

/// The four terms of the balance identity at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceTerms {
    pub r: f64,
    pub l_down: f64,
    pub l_same: f64,
    pub l_up: f64,
}

impl BalanceTerms {
    pub fn residual(&self) -> f64 {
        self.r - (self.l_down + self.l_same + self.l_up)
    }
}

fn pi(cond: &Conditional, a: &[u64]) -> f64 {
    let n = a.iter().sum();
    conditional_pmf(cond, n, a).expect("state lies on its own simplex")
}

/// Evaluate `R_n` and the three `L` terms at `a`.
pub fn balance_terms(net: &ReactionNetwork, cond: &Conditional, a: &[u64]) -> Result<BalanceTerms> {
    let delta = net.common_delta()?;
    let d = net.dimension();
    if cond.dimension() != d || a.len() != d {
        return Err(Error::DimensionMismatch {
            what: "conditional",
            expected: d,
            got: cond.dimension().min(a.len()),
        });
    }
    let n: u64 = a.iter().sum();
    let nf = n as f64;
    let lam_sum = net.total_inflow();
    let mut b = a.to_vec();

    let auto_out: f64 = net
        .autocatalytic_pairs()
        .iter()
        .map(|&(i, j, k)| k * a[i] as f64 * a[j] as f64)
        .sum();
    let r = pi(cond, a) * (lam_sum + delta * nf + auto_out);

    let mut l_down = 0.0;
    if n >= 1 {
        for i in 0..d {
            if a[i] >= 1 {
                b[i] -= 1;
                l_down += net.lambda()[i] * pi(cond, &b);
                b[i] += 1;
            }
        }
        l_down *= delta * nf / lam_sum;
    }

    let mut l_same = 0.0;
    for &(i, j, k) in net.autocatalytic_pairs() {
        if a[j] >= 1 {
            b[i] += 1;
            b[j] -= 1;
            l_same += k * (a[i] + 1) as f64 * (a[j] - 1) as f64 * pi(cond, &b);
            b[i] -= 1;
            b[j] += 1;
        }
    }

    let mut l_up = 0.0;
    for i in 0..d {
        b[i] += 1;
        l_up += (a[i] + 1) as f64 * pi(cond, &b);
        b[i] -= 1;
    }
    l_up *= lam_sum / (nf + 1.0);

    Ok(BalanceTerms {
        r,
        l_down,
        l_same,
        l_up,
    })
}

fn form_name(topology: Topology) -> &'static str {
    match topology {
        Topology::FullSymmetric => "full-symmetric double sum over i != j",
        Topology::TkCycle => "cycle sum over j = i + 1 mod d",
        Topology::Custom => "generic double sum over nonzero kappa_ij",
    }
}

/// Maximum relative residual `|R_n - sum L| / R_n` over `a in E_n`.
pub fn master_equation_residual(
    net: &ReactionNetwork,
    cond: &Conditional,
    n: u64,
) -> Result<VerificationReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("balance check needs n >= 1".into()));
    }
    let delta = net.common_delta()?;
    let mut rep = VerificationReport::new(
        "master-eq",
        json!({ "network": network_params(net), "conditional": cond, "n": n, "delta": delta }),
        BALANCE_REL_TOL,
    );
    let mut failing = 0usize;
    for a in Simplex::new(net.dimension(), n) {
        let t = balance_terms(net, cond, &a)?;
        let abs = t.residual().abs();
        let rel = abs / t.r;
        let ok = rel <= BALANCE_REL_TOL || (t.r < 1.0 && abs <= BALANCE_ABS_FLOOR);
        if !ok {
            failing += 1;
        }
        rep.max_abs_residual = rep.max_abs_residual.max(abs);
        if rel > rep.max_rel_residual || rel.is_nan() {
            rep.max_rel_residual = rel;
            rep.worst_case = json!({ "n": n, "state": a, "R": t.r,
                "L_down": t.l_down, "L_same": t.l_same, "L_up": t.l_up });
        }
    }
    rep.passed = failing == 0;
    rep.notes.push(format!("L_n form: {}", form_name(net.topology())));
    if failing > 0 {
        rep.notes.push(format!("E_{n}: {failing} states out of tolerance"));
    }
    Ok(rep)
}

/// Merge of [`master_equation_residual`] over `n = 1..=n_max`.
pub fn master_equation_residual_range(
    net: &ReactionNetwork,
    cond: &Conditional,
    n_max: u64,
) -> Result<VerificationReport> {
    let mut rep = master_equation_residual(net, cond, 1)?;
    rep.notes.clear();
    for n in 2..=n_max {
        let mut r = master_equation_residual(net, cond, n)?;
        r.notes.retain(|s| !s.starts_with("L_n form"));
        rep.merge(r);
    }
    if let Some(p) = rep.params.as_object_mut() {
        p.remove("n");
        p.insert("n_max".into(), json!(n_max));
    }
    rep.notes.insert(0, format!("L_n form: {}", form_name(net.topology())));
    Ok(rep)
}

/// Pointwise check of the Dirichlet-multinomial recurrences at `(a, n, i, j)`:
///
/// ```text
/// pi(a|n)             = 1/(n+1) sum_k (a_k + 1) pi(a + e_k | n+1)
/// pi(a - e_i | n-1)   = a_i (n - 1 + A) / (n (a_i - 1 + alpha_i)) pi(a|n)
/// pi(a - e_i + e_j|n) = a_i (a_j + alpha_j) / ((a_j + 1)(a_i - 1 + alpha_i)) pi(a|n)
/// ```
///
/// and, when every `alpha_k = 1`, the uniform-simplex forms
/// `pi(a + e_i | n+1) = (n+1)/(n+d) pi(a|n)` and
/// `pi(a - e_i | n-1) = (n+d-1)/n pi(a|n)`.
pub fn recurrence_check(alpha: &[f64], n: u64, a: &[u64], i: usize, j: usize) -> Result<VerificationReport> {
    let d = alpha.len();
    if a.len() != d {
        return Err(Error::DimensionMismatch {
            what: "state",
            expected: d,
            got: a.len(),
        });
    }
    if i >= d || j >= d || i == j {
        return Err(Error::Domain(format!("need distinct indices below {d}, got i={i}, j={j}")));
    }
    let total: u64 = a.iter().sum();
    if total != n {
        return Err(Error::SimplexMismatch { n, total });
    }
    if n == 0 {
        return Err(Error::Domain("recurrences need n >= 1".into()));
    }
    if a[i] == 0 {
        return Err(Error::Domain(format!("relation requires a_{} >= 1", i + 1)));
    }
    if alpha.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Domain("alpha must be positive".into()));
    }
    let cond = Conditional::DirichletMultinomial {
        alpha: alpha.to_vec(),
    };
    let a_sum: f64 = alpha.iter().sum();
    let nf = n as f64;
    let p = pi(&cond, a);
    let ai = a[i] as f64;

    let mut checks: Vec<(&str, f64, f64)> = Vec::new();

    let mut up = 0.0;
    let mut b = a.to_vec();
    for k in 0..d {
        b[k] += 1;
        up += (a[k] + 1) as f64 * pi(&cond, &b);
        b[k] -= 1;
    }
    checks.push(("level-up average", p, up / (nf + 1.0)));

    b[i] -= 1;
    let lhs = pi(&cond, &b);
    b[i] += 1;
    checks.push((
        "level-down",
        lhs,
        ai * (nf - 1.0 + a_sum) / (nf * (ai - 1.0 + alpha[i])) * p,
    ));

    b[i] -= 1;
    b[j] += 1;
    let lhs = pi(&cond, &b);
    b[i] += 1;
    b[j] -= 1;
    checks.push((
        "in-level move",
        lhs,
        ai * (a[j] as f64 + alpha[j]) / ((a[j] + 1) as f64 * (ai - 1.0 + alpha[i])) * p,
    ));

    if alpha.iter().all(|&x| x == 1.0) {
        let df = d as f64;
        b[i] += 1;
        let lhs = pi(&cond, &b);
        b[i] -= 1;
        checks.push(("uniform level-up", lhs, (nf + 1.0) / (nf + df) * p));
        b[i] -= 1;
        let lhs = pi(&cond, &b);
        b[i] += 1;
        checks.push(("uniform level-down", lhs, (nf + df - 1.0) / nf * p));
    }

    let tol = 1e-10;
    let mut rep = VerificationReport::new(
        "recurrence",
        json!({ "alpha": alpha, "n": n, "state": a, "i": i, "j": j }),
        tol,
    );
    for (name, lhs, rhs) in checks {
        let abs = (lhs - rhs).abs();
        let rel = abs / lhs.abs().max(rhs.abs());
        rep.max_abs_residual = rep.max_abs_residual.max(abs);
        if rel > rep.max_rel_residual {
            rep.max_rel_residual = rel;
            rep.worst_case = json!({ "relation": name, "lhs": lhs, "rhs": rhs });
        }
        rep.notes.push(format!("{name}: lhs={lhs:e} rhs={rhs:e} rel={rel:e}"));
    }
    rep.passed = rep.max_rel_residual <= tol;
    Ok(rep)
}
