//! Foster-Lyapunov drift for `V(x) = exp(|x|_1)`.
//!
//! Autocatalytic jumps keep `|x|_1`, so
//! `LV(x) / V(x) = (e^{-1} - 1) sum delta_i a_i + (e - 1) sum lambda_i`,
//! which decreases in `s = sum delta_i a_i`. With `C = 1`,
//! `LV + CV <= 0` whenever `s >= ((e - 1) sum lambda + C) / (1 - e^{-1})`,
//! so any violator of `LV <= -CV + D` lies in the finite set below that
//! threshold, and `D` is the maximum of `LV + CV` over it.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{network_params, VerificationReport};
use crate::error::{Error, Result};
use crate::model::{generator_apply, ReactionNetwork, State, TransitionKind};

/// Scanning beyond this norm overflows `exp`.
const MAX_SCAN_NORM: u64 = 700;
const MAX_SCAN_STATES: u128 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftCertificate {
    pub c: f64,
    pub d: f64,
    pub ln_d: f64,
    /// Violators satisfy `sum delta_i a_i < threshold`.
    pub threshold: f64,
    /// Norm `|x|_1` at which `LV + CV` attains `D`.
    pub argmax_norm: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub certificate: DriftCertificate,
    pub report: VerificationReport,
    pub scanned_states: u64,
    pub violations: u64,
    /// States where the autocatalytic part of `LV` was not exactly zero.
    pub autocatalytic_nonzero: u64,
    /// Largest gap between the direct generator sum and the closed form,
    /// relative to the magnitude of the summed terms.
    pub max_closed_form_gap: f64,
}

/// `LV(x) / V(x)` in closed form.
pub fn drift_ratio(net: &ReactionNetwork, x: &[u64]) -> f64 {
    let s: f64 = net.delta().iter().zip(x).map(|(d, &a)| d * a as f64).sum();
    (1.0 / E - 1.0) * s + (E - 1.0) * net.total_inflow()
}

/// Sum of the absolute terms of `LV / V`; round-off is measured against this.
fn term_scale(net: &ReactionNetwork, x: &[u64]) -> f64 {
    let s: f64 = net.delta().iter().zip(x).map(|(d, &a)| d * a as f64).sum();
    (1.0 - 1.0 / E) * s + (E - 1.0) * net.total_inflow()
}

fn certify(net: &ReactionNetwork, c: f64) -> DriftCertificate {
    let c0 = (E - 1.0) * net.total_inflow() + c;
    let c1 = 1.0 - 1.0 / E;
    let threshold = c0 / c1;
    let dmin = net.delta().iter().copied().fold(f64::INFINITY, f64::min);
    // for fixed |x|_1 = m the smallest s is dmin * m, reached at a corner
    let mut best = (f64::NEG_INFINITY, 0u64);
    let mut m = 0u64;
    while dmin * (m as f64) < threshold {
        let g = c0 - c1 * dmin * m as f64;
        let ln_val = m as f64 + g.ln();
        if ln_val > best.0 {
            best = (ln_val, m);
        }
        m += 1;
    }
    DriftCertificate {
        c,
        d: best.0.exp(),
        ln_d: best.0,
        threshold,
        argmax_norm: best.1,
    }
}

/// Certify `(C, D)` with `C = 1` and scan every state with `|x|_1 <= scan_bound`.
pub fn drift_report(net: &ReactionNetwork, scan_bound: u64) -> Result<DriftReport> {
    if scan_bound == 0 {
        return Err(Error::InvalidArgument("scan bound must be at least 1".into()));
    }
    if scan_bound > MAX_SCAN_NORM {
        return Err(Error::InvalidArgument(format!(
            "scan bound {scan_bound} exceeds {MAX_SCAN_NORM} (exp overflow)"
        )));
    }
    let d = net.dimension();
    let states = crate::model::simplex_size(d + 1, scan_bound);
    if states > MAX_SCAN_STATES {
        return Err(Error::SizeCap {
            states,
            cap: MAX_SCAN_STATES,
        });
    }
    let cert = certify(net, 1.0);
    let mut rep = VerificationReport::new(
        "drift",
        json!({ "network": network_params(net), "scan_bound": scan_bound }),
        0.0,
    );

    let v = |s: &State| (s.total() as f64).exp();
    let mut scanned = 0u64;
    let mut violations = 0u64;
    let mut auto_nonzero = 0u64;
    let mut gap_max: f64 = 0.0;
    let mut worst_ratio = f64::NEG_INFINITY;
    for m in 0..=scan_bound {
        for a in crate::model::Simplex::new(d, m) {
            scanned += 1;
            let x = State::new(a);
            let vx = v(&x);
            let lv = generator_apply(net, v, &x)?;
            let closed = vx * drift_ratio(net, x.counts());
            let gap = (lv - closed).abs() / (vx * term_scale(net, x.counts()));
            gap_max = gap_max.max(gap);

            let mut auto = 0.0;
            for &(i, j, k) in net.autocatalytic_pairs() {
                let kind = TransitionKind::Autocatalytic { from: i, to: j };
                let rate = k * x.counts()[i] as f64 * x.counts()[j] as f64;
                if rate > 0.0 {
                    auto += rate * (v(&kind.apply(&x)?) - vx);
                }
            }
            if auto != 0.0 {
                auto_nonzero += 1;
            }

            // LV + CV <= D, compared as a ratio to D
            let lhs = lv + cert.c * vx;
            let ratio = if lhs <= 0.0 {
                f64::NEG_INFINITY
            } else {
                (lhs.ln() - cert.ln_d).exp()
            };
            if ratio > worst_ratio {
                worst_ratio = ratio;
                rep.worst_case = json!({ "state": x.counts(), "LV_plus_CV": lhs, "D": cert.d });
            }
            if ratio > 1.0 + 1e-9 {
                violations += 1;
            }
        }
    }
    rep.max_rel_residual = (worst_ratio - 1.0).max(0.0);
    rep.max_abs_residual = gap_max;
    rep.passed = violations == 0 && auto_nonzero == 0 && cert.ln_d.is_finite();
    rep.notes.push(format!(
        "C = {}, D = {:e} (ln D = {}), violators confined to sum delta_i a_i < {}",
        cert.c, cert.d, cert.ln_d, cert.threshold
    ));
    rep.notes.push(format!(
        "scanned {scanned} states; max (LV+CV)/D = {worst_ratio}; direct vs closed-form gap {gap_max:e}"
    ));
    Ok(DriftReport {
        certificate: cert,
        report: rep,
        scanned_states: scanned,
        violations,
        autocatalytic_nonzero: auto_nonzero,
        max_closed_form_gap: gap_max,
    })
}
