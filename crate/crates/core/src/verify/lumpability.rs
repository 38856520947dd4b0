use serde_json::json;

use super::{network_params, VerificationReport};
use crate::model::{ReactionNetwork, Simplex, TransitionKind};

/// Rate out of `a` into `E_{n-1}`, summed per distinct outflow value so that
/// equal rates give exactly `delta * n`.
fn down_rate(net: &ReactionNetwork, a: &[u64]) -> f64 {
    let mut groups: Vec<(f64, u64)> = Vec::new();
    for (&dl, &k) in net.delta().iter().zip(a) {
        match groups.iter_mut().find(|g| g.0.to_bits() == dl.to_bits()) {
            Some(g) => g.1 += k,
            None => groups.push((dl, k)),
        }
    }
    groups.iter().map(|&(dl, k)| dl * k as f64).sum()
}

/// Checks that every state of `E_n`, `n <= n_max`, leaves for `E_{n+1}` at
/// the same total rate and for `E_{n-1}` at the same total rate.
pub fn lumpability_check(net: &ReactionNetwork, n_max: u64) -> VerificationReport {
    let mut rep = VerificationReport::new(
        "lumpability",
        json!({ "network": network_params(net), "n_max": n_max }),
        0.0,
    );
    let d = net.dimension();

    // autocatalytic jumps stay inside the block
    let internal = net
        .reactions()
        .iter()
        .filter(|k| matches!(k, TransitionKind::Autocatalytic { .. }))
        .all(|k| k.total_change() == 0);
    if !internal {
        rep.passed = false;
        rep.notes.push("an autocatalytic channel changes the total".into());
    }

    let up_reference = net.total_inflow();
    let common = net.common_delta().ok();
    let mut first_violation = None;
    for n in 0..=n_max {
        let mut reference: Option<(Vec<u64>, f64)> = None;
        for a in Simplex::new(d, n) {
            let up: f64 = net
                .reactions()
                .iter()
                .filter(|k| k.total_change() == 1)
                .map(|&k| net.rate(k, &a))
                .sum();
            let down = down_rate(net, &a);
            let up_res = (up - up_reference).abs();
            let (ref_state, ref_down) = reference.get_or_insert_with(|| (a.clone(), down)).clone();
            let down_res = (down - ref_down).abs();
            let res = up_res.max(down_res);
            if res > rep.max_abs_residual {
                rep.max_abs_residual = res;
                rep.max_rel_residual = res / ref_down.max(up_reference);
                rep.worst_case = json!({ "n": n, "state": a, "reference_state": ref_state,
                    "down_rate": down, "reference_down_rate": ref_down });
            }
            if res > 0.0 && first_violation.is_none() {
                first_violation = Some(json!({ "n": n, "state": a, "down_rate": down,
                    "reference_state": ref_state, "reference_down_rate": ref_down }));
            }
        }
        if let (Some(dl), Some((_, ref_down))) = (common, reference) {
            if ref_down != dl * n as f64 {
                rep.notes.push(format!("E_{n}: down rate {ref_down} != delta n"));
            }
        }
    }
    if let Some(v) = first_violation {
        rep.passed = false;
        rep.notes.push(format!("first violation: {v}"));
        rep.worst_case = v;
    }
    rep
}
