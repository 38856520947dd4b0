use serde_json::json;

use super::VerificationReport;
use crate::analytic::{analytic_moments, MixtureStationary};
use crate::error::{Error, Result};
use crate::simulate::EnsembleResult;
use crate::stats::sample_moments;

pub const MIN_MOMENT_ENSEMBLE: usize = 1_000;
const Z_LIMIT: f64 = 3.0;

/// z-scores of the empirical mean and covariance of `X(T) / V` against the
/// stationary values. Passes when every `|z| <= 3`.
pub fn moment_zscore_report(ens: &EnsembleResult, ms: &MixtureStationary, volume: f64) -> Result<VerificationReport> {
    let n = ens.end_states.len();
    if n < MIN_MOMENT_ENSEMBLE {
        return Err(Error::UndersizedEnsemble {
            got: n,
            min: MIN_MOMENT_ENSEMBLE,
        });
    }
    let theory = analytic_moments(ms, volume)?;
    let rows: Vec<Vec<f64>> = ens
        .end_states
        .iter()
        .map(|s| s.counts().iter().map(|&a| a as f64 / volume).collect())
        .collect();
    let emp = sample_moments(&rows);
    let d = theory.mean.len();

    let mut z_mean = vec![0.0; d];
    let mut z_cov = vec![vec![0.0; d]; d];
    let mut worst = (0.0f64, json!(null));
    for i in 0..d {
        z_mean[i] = (emp.mean[i] - theory.mean[i]) / emp.se_mean[i];
        if z_mean[i].abs() > worst.0 {
            worst = (z_mean[i].abs(), json!({ "entry": format!("mean_{}", i + 1),
                "empirical": emp.mean[i], "analytic": theory.mean[i], "z": z_mean[i] }));
        }
        for j in 0..d {
            z_cov[i][j] = (emp.cov[i][j] - theory.cov[i][j]) / emp.se_cov[i][j];
            if z_cov[i][j].abs() > worst.0 {
                worst = (z_cov[i][j].abs(), json!({ "entry": format!("cov_{}{}", i + 1, j + 1),
                    "empirical": emp.cov[i][j], "analytic": theory.cov[i][j], "z": z_cov[i][j] }));
            }
        }
    }

    let mut rep = VerificationReport::new(
        "moments",
        json!({ "n_traj": n, "end_time": ens.config.end_time, "master_seed": ens.config.master_seed,
                "volume": volume, "mixture": ms }),
        Z_LIMIT,
    );
    rep.max_rel_residual = worst.0;
    rep.max_abs_residual = worst.0;
    rep.worst_case = worst.1;
    rep.passed = worst.0 <= Z_LIMIT;
    rep.notes.push(format!("mean z-scores: {z_mean:?}"));
    rep.notes.push(format!("covariance z-scores: {z_cov:?}"));
    rep.notes.push(format!(
        "empirical mean {:?} / analytic {:?}; empirical cov {:?} / analytic {:?}",
        emp.mean, theory.mean, emp.cov, theory.cov
    ));
    Ok(rep)
}
