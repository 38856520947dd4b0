//! Closed-form stationary laws.
//!
//! With equal outflow rates the total count is a birth-death chain with
//! Poisson(`mu`) stationary law, and the full stationary law factorizes as
//! `alpha(a) = pi(a | n) nu(n)`. For the full-symmetric network the
//! conditional `pi(. | n)` is Dirichlet-multinomial; for the cycle it is
//! claimed uniform on the simplex at `delta = d kappa / (d - 1)`.
//!
//! Everything is evaluated in log space and exponentiated at the end.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{ReactionNetwork, Topology};

/// Rising factorials with at most this many factors are summed directly.
const DIRECT_RISING_MAX: u64 = 48;

/// `ln( Gamma(x + k) / Gamma(x) ) = ln( x (x+1) ... (x+k-1) )` for `x > 0`.
pub fn ln_rising(x: f64, k: u64) -> f64 {
    if k <= DIRECT_RISING_MAX {
        (0..k).map(|m| (x + m as f64).ln()).sum()
    } else {
        ln_gamma(x + k as f64) - ln_gamma(x)
    }
}

fn ln_fact(n: u64) -> f64 {
    ln_factorial(n)
}

/// `ln B(x, y)`.
pub fn ln_beta(x: f64, y: f64) -> f64 {
    ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y)
}

/// Poisson intensity `mu = sum lambda_i / delta` of the lumped chain.
pub fn mixing_intensity(net: &ReactionNetwork) -> Result<f64> {
    let delta = net.common_delta()?;
    Ok(net.total_inflow() / delta)
}

/// Whether the autocatalytic matrix is the full-symmetric pattern. A 2-species
/// cycle has the same matrix.
fn is_full_symmetric(net: &ReactionNetwork) -> bool {
    match net.topology() {
        Topology::FullSymmetric => true,
        Topology::TkCycle => net.dimension() == 2,
        Topology::Custom => {
            let d = net.dimension();
            net.autocatalytic_pairs().len() == d * (d - 1) && net.common_kappa().is_some()
        }
    }
}

/// `alpha_i = delta lambda_i / (kappa sum_j lambda_j)`, so that `sum alpha_i = delta / kappa`.
pub fn dirichlet_params(net: &ReactionNetwork) -> Result<Vec<f64>> {
    if net.dimension() < 2 {
        return Err(Error::Hypothesis(
            "Dirichlet parameters need at least two species".into(),
        ));
    }
    if !is_full_symmetric(net) {
        return Err(Error::Hypothesis(format!(
            "Dirichlet-multinomial conditional requires the full-symmetric topology, got {}",
            net.topology()
        )));
    }
    let kappa = net
        .common_kappa()
        .ok_or_else(|| Error::Hypothesis("autocatalytic rates are not all equal".into()))?;
    if !(kappa > 0.0) {
        return Err(Error::Hypothesis("kappa must be positive".into()));
    }
    let delta = net.common_delta()?;
    let total = net.total_inflow();
    Ok(net
        .lambda()
        .iter()
        .map(|l| delta * l / (kappa * total))
        .collect())
}

/// `mu^n e^{-mu} / n!`.
pub fn poisson_pmf(mu: f64, n: u64) -> f64 {
    ln_poisson_pmf(mu, n).exp()
}

pub fn ln_poisson_pmf(mu: f64, n: u64) -> f64 {
    debug_assert!(mu > 0.0);
    n as f64 * mu.ln() - mu - ln_fact(n)
}

/// Chernoff bound on `P(N > n)` for `N ~ Poisson(mu)`; 1 when `n + 1 <= mu`.
pub fn poisson_tail_bound(mu: f64, n: u64) -> f64 {
    let k = (n + 1) as f64;
    if k <= mu {
        return 1.0;
    }
    (-mu + k * (1.0 + mu.ln() - k.ln())).exp().min(1.0)
}

/// Smallest `n` whose Chernoff tail bound is below `eps`.
pub fn poisson_truncation_level(mu: f64, eps: f64) -> u64 {
    let mut n = mu.ceil() as u64;
    while poisson_tail_bound(mu, n) >= eps {
        n += 1;
    }
    n
}

/// Conditional law on the simplex `E_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Conditional {
    DirichletMultinomial { alpha: Vec<f64> },
    UniformSimplex { d: usize },
}

impl Conditional {
    pub fn dimension(&self) -> usize {
        match self {
            Conditional::DirichletMultinomial { alpha } => alpha.len(),
            Conditional::UniformSimplex { d } => *d,
        }
    }

    /// Dirichlet parameters; all ones for the uniform law.
    pub fn alpha(&self) -> Vec<f64> {
        match self {
            Conditional::DirichletMultinomial { alpha } => alpha.clone(),
            Conditional::UniformSimplex { d } => vec![1.0; *d],
        }
    }

    /// `ln pi(a | n)`, with `-inf` for states off the simplex.
    pub fn ln_pmf(&self, n: u64, a: &[u64]) -> Result<f64> {
        if a.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                what: "state",
                expected: self.dimension(),
                got: a.len(),
            });
        }
        let total: u64 = a.iter().sum();
        if total != n {
            return Err(Error::SimplexMismatch { n, total });
        }
        Ok(match self {
            Conditional::DirichletMultinomial { alpha } => {
                let sum_alpha: f64 = alpha.iter().sum();
                let ln_multinomial = ln_fact(n) - a.iter().map(|&k| ln_fact(k)).sum::<f64>();
                let ln_num: f64 = a
                    .iter()
                    .zip(alpha)
                    .map(|(&k, &al)| ln_rising(al, k))
                    .sum();
                ln_multinomial + ln_num - ln_rising(sum_alpha, n)
            }
            Conditional::UniformSimplex { d } => {
                ln_fact(n) + ln_fact(*d as u64 - 1) - ln_fact(n + *d as u64 - 1)
            }
        })
    }
}

/// `pi(a | n)`. Errors when `sum a_i != n`.
pub fn conditional_pmf(cond: &Conditional, n: u64, a: &[u64]) -> Result<f64> {
    cond.ln_pmf(n, a).map(f64::exp)
}

/// Beta-binomial `C(n, i) B(i + alpha, n - i + beta) / B(alpha, beta)`,
/// evaluated through log-beta functions.
pub fn beta_binomial_pmf(alpha: f64, beta: f64, n: u64, i: u64) -> f64 {
    if i > n {
        return 0.0;
    }
    let ln_choose = ln_fact(n) - ln_fact(i) - ln_fact(n - i);
    (ln_choose + ln_beta(i as f64 + alpha, (n - i) as f64 + beta) - ln_beta(alpha, beta)).exp()
}

/// Product-form stationary law `alpha(a) = pi(a | n) nu(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureStationary {
    pub mu: f64,
    pub conditional: Conditional,
}

impl MixtureStationary {
    /// The closed-form stationary law for the network, when one is known:
    /// a single species (Poisson), the full-symmetric network
    /// (Dirichlet-multinomial), or the cycle at `delta = d kappa / (d - 1)`
    /// (uniform simplex).
    pub fn for_network(net: &ReactionNetwork) -> Result<Self> {
        let mu = mixing_intensity(net)?;
        let d = net.dimension();
        if d == 1 {
            return Ok(MixtureStationary {
                mu,
                conditional: Conditional::UniformSimplex { d: 1 },
            });
        }
        if is_full_symmetric(net) {
            return Ok(MixtureStationary {
                mu,
                conditional: Conditional::DirichletMultinomial {
                    alpha: dirichlet_params(net)?,
                },
            });
        }
        if net.topology() == Topology::TkCycle {
            let kappa = net
                .common_kappa()
                .ok_or_else(|| Error::Hypothesis("cycle rates are not all equal".into()))?;
            let delta = net.common_delta()?;
            if !at_cycle_critical_relation(d, kappa, delta) {
                return Err(Error::Hypothesis(format!(
                    "cycle requires delta = d kappa / (d - 1) = {}, got {delta}",
                    d as f64 * kappa / (d as f64 - 1.0)
                )));
            }
            let l0 = net.lambda()[0];
            if net.lambda().iter().any(|&l| l != l0) {
                return Err(Error::Hypothesis("cycle requires equal inflow rates".into()));
            }
            return Ok(MixtureStationary {
                mu,
                conditional: Conditional::UniformSimplex { d },
            });
        }
        Err(Error::Hypothesis(format!(
            "no closed-form stationary law for topology {}",
            net.topology()
        )))
    }

    pub fn dimension(&self) -> usize {
        self.conditional.dimension()
    }

    pub fn ln_pmf(&self, a: &[u64]) -> Result<f64> {
        let n: u64 = a.iter().sum();
        Ok(self.conditional.ln_pmf(n, a)? + ln_poisson_pmf(self.mu, n))
    }
}

/// `delta (d - 1) = kappa d` up to round-off.
pub fn at_cycle_critical_relation(d: usize, kappa: f64, delta: f64) -> bool {
    let lhs = delta * (d as f64 - 1.0);
    let rhs = kappa * d as f64;
    (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs())
}

/// `alpha(a) = pi(a | n) nu(n)` with `n = sum a_i`.
pub fn stationary_pmf(ms: &MixtureStationary, a: &[u64]) -> Result<f64> {
    ms.ln_pmf(a).map(f64::exp)
}

/// Mean vector and covariance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

/// Exact mean and covariance of `X / V` under the stationary law.
///
/// With `p_i = alpha_i / A`, `A = sum alpha_i`, and `N ~ Poisson(mu)`:
/// `E X_i = mu p_i` and
/// `Cov(X_i, X_j) = (mu^2 + mu + A mu) / (1 + A) (p_i [i = j] - p_i p_j) + mu p_i p_j`.
pub fn analytic_moments(ms: &MixtureStationary, volume: f64) -> Result<Moments> {
    if !(volume > 0.0) {
        return Err(Error::NonPositiveVolume(volume));
    }
    let alpha = ms.conditional.alpha();
    let a_sum: f64 = alpha.iter().sum();
    let p: Vec<f64> = alpha.iter().map(|a| a / a_sum).collect();
    let mu = ms.mu;
    let within = (mu * mu + mu + a_sum * mu) / (1.0 + a_sum);
    let v2 = volume * volume;
    let d = p.len();
    let mean = p.iter().map(|pi| mu * pi / volume).collect();
    let cov = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let diag = if i == j { p[i] } else { 0.0 };
                    (within * (diag - p[i] * p[j]) + mu * p[i] * p[j]) / v2
                })
                .collect()
        })
        .collect();
    Ok(Moments { mean, cov })
}

/// Conditional mass of the corner states `n e_i`.
pub fn corner_mass(alpha: &[f64], n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("corner mass needs n >= 1".into()));
    }
    if let Some(a) = alpha.iter().find(|&&a| !(a > 0.0)) {
        return Err(Error::Domain(format!("alpha must be positive, got {a}")));
    }
    let a_sum: f64 = alpha.iter().sum();
    let denom = ln_rising(a_sum, n);
    Ok(alpha.iter().map(|&a| (ln_rising(a, n) - denom).exp()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{create_network, Simplex};

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs())
    }

    #[test]
    fn intensity_examples() {
        let fig1 = create_network(2, Topology::FullSymmetric, 0.05, 0.2, 0.01).unwrap();
        assert!(close(mixing_intensity(&fig1).unwrap(), 40.0, 1e-14));
        let unit = create_network(2, Topology::FullSymmetric, 0.05, 0.05, 0.1).unwrap();
        assert!(close(mixing_intensity(&unit).unwrap(), 1.0, 1e-14));
        let bad = create_network(2, Topology::FullSymmetric, 0.05, 0.05, vec![0.01, 0.02]).unwrap();
        assert!(matches!(
            mixing_intensity(&bad),
            Err(Error::UnequalOutflow { index: 1, .. })
        ));
    }

    #[test]
    fn dirichlet_examples() {
        let fig1 = create_network(2, Topology::FullSymmetric, 0.05, 0.2, 0.01).unwrap();
        let a = dirichlet_params(&fig1).unwrap();
        assert!(close(a[0], 0.1, 1e-14) && close(a[1], 0.1, 1e-14));

        let cyc = create_network(4, Topology::TkCycle, 0.05, 0.2, 0.01).unwrap();
        assert!(matches!(dirichlet_params(&cyc), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn poisson_values() {
        assert!(close(poisson_pmf(1.0, 0), (-1.0f64).exp(), 1e-15));
        let mut p = (-40.0f64).exp();
        for n in 1..=40 {
            p *= 40.0 / n as f64;
        }
        assert!(close(poisson_pmf(40.0, 40), p, 1e-12));
        let s: f64 = (0..=200).map(|n| poisson_pmf(40.0, n)).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_bound_dominates_tail() {
        for &mu in &[0.5f64, 1.0, 3.0, 40.0] {
            for n in (mu.ceil() as u64)..(mu as u64 * 4 + 30) {
                let tail: f64 = 1.0 - (0..=n).map(|k| poisson_pmf(mu, k)).sum::<f64>();
                assert!(poisson_tail_bound(mu, n) >= tail - 1e-15, "mu={mu} n={n}");
            }
        }
        let n = poisson_truncation_level(1.0, 1e-14);
        assert!(poisson_tail_bound(1.0, n) < 1e-14);
        assert!(poisson_tail_bound(1.0, n - 1) >= 1e-14);
    }

    #[test]
    fn uniform_cases() {
        let c = Conditional::DirichletMultinomial {
            alpha: vec![1.0, 1.0],
        };
        assert!(close(conditional_pmf(&c, 3, &[1, 2]).unwrap(), 0.25, 1e-14));
        let u = Conditional::UniformSimplex { d: 3 };
        for a in Simplex::new(3, 2) {
            assert!(close(conditional_pmf(&u, 2, &a).unwrap(), 1.0 / 6.0, 1e-14));
        }
        assert!(matches!(
            conditional_pmf(&u, 3, &[1, 1, 0]),
            Err(Error::SimplexMismatch { n: 3, total: 2 })
        ));
    }

    #[test]
    fn stationary_examples() {
        let net = create_network(2, Topology::FullSymmetric, 0.05, 0.05, 0.1).unwrap();
        let ms = MixtureStationary::for_network(&net).unwrap();
        assert!(close(ms.mu, 1.0, 1e-14));
        assert!(close(stationary_pmf(&ms, &[0, 0]).unwrap(), 0.367_879_441_171_442_3, 1e-14));
        assert!(close(
            stationary_pmf(&ms, &[1, 0]).unwrap(),
            0.5 * (-1.0f64).exp(),
            1e-14
        ));
        let total: f64 = (0..=60)
            .flat_map(|n| Simplex::new(2, n))
            .map(|a| stationary_pmf(&ms, &a).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn corner_uniform() {
        for n in 1..30 {
            assert!(close(corner_mass(&[1.0, 1.0], n).unwrap(), 2.0 / (n as f64 + 1.0), 1e-13));
        }
        assert!(corner_mass(&[1.0, 1.0], 0).is_err());
        assert!(corner_mass(&[1.0, 0.0], 3).is_err());
    }

    #[test]
    fn corner_gamma_form() {
        // [Gamma(n+a)/Gamma(a) + Gamma(n+b)/Gamma(b)] Gamma(a+b)/Gamma(n+a+b)
        let (a, b, n) = (0.1, 0.1, 10u64);
        let nf = n as f64;
        let display = ((ln_gamma(nf + a) - ln_gamma(a)).exp() + (ln_gamma(nf + b) - ln_gamma(b)).exp())
            * (ln_gamma(a + b) - ln_gamma(nf + a + b)).exp();
        let endpoints = beta_binomial_pmf(a, b, n, 0) + beta_binomial_pmf(a, b, n, n);
        let cm = corner_mass(&[a, b], n).unwrap();
        assert!(close(cm, display, 1e-12));
        assert!(close(cm, endpoints, 1e-12));
    }

    #[test]
    fn corner_mass_grows_as_volume_shrinks() {
        let alpha_prime = [0.3, 0.7];
        let masses: Vec<f64> = [1.0, 0.1, 0.01]
            .iter()
            .map(|v| corner_mass(&[alpha_prime[0] * v, alpha_prime[1] * v], 10).unwrap())
            .collect();
        assert!(masses[0] < masses[1] && masses[1] < masses[2] && masses[2] < 1.0);
        assert!(masses[2] > 0.97);
    }

    #[test]
    fn cycle_mixture_requires_critical_relation() {
        let ok = create_network(4, Topology::TkCycle, 0.3, 0.2, 0.4).unwrap();
        let ms = MixtureStationary::for_network(&ok).unwrap();
        assert_eq!(ms.conditional, Conditional::UniformSimplex { d: 4 });
        let off = create_network(4, Topology::TkCycle, 0.3, 0.2, 0.5).unwrap();
        assert!(MixtureStationary::for_network(&off).is_err());
    }

    #[test]
    fn moments_limits() {
        // A -> infinity: Poisson thinning; A -> 0: all mass at one corner.
        let mu = 7.0;
        let big = MixtureStationary {
            mu,
            conditional: Conditional::DirichletMultinomial {
                alpha: vec![3e9, 1e9],
            },
        };
        let m = analytic_moments(&big, 1.0).unwrap();
        assert!(close(m.cov[0][0], mu * 0.75, 1e-6));
        assert!(m.cov[0][1].abs() < 1e-6);
        let small = MixtureStationary {
            mu,
            conditional: Conditional::DirichletMultinomial {
                alpha: vec![3e-9, 1e-9],
            },
        };
        let m = analytic_moments(&small, 1.0).unwrap();
        let expect = 0.75 * (mu * mu + mu) - 0.75 * 0.75 * mu * mu;
        assert!(close(m.cov[0][0], expect, 1e-6));
    }

    #[test]
    fn moments_two_species_display() {
        // (1/V^2)[ ab/(a+b)^2 ((a+b)mu + mu^2 + mu)/(a+b+1) + mu a^2/(a+b)^2 ]
        let (a, b, mu, v) = (0.3, 1.7, 12.0, 3.0);
        let ms = MixtureStationary {
            mu,
            conditional: Conditional::DirichletMultinomial { alpha: vec![a, b] },
        };
        let m = analytic_moments(&ms, v).unwrap();
        let s = a + b;
        let display = (a * b / (s * s) * (s * mu + mu * mu + mu) / (s + 1.0) + mu * a * a / (s * s)) / (v * v);
        assert!(close(m.cov[0][0], display, 1e-14));
        assert!(close(m.mean[0], mu / v * a / s, 1e-14));
    }
}
