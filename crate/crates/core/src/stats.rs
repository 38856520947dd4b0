//! Small sample-statistics helpers shared by verification and tests.

use std::collections::BTreeMap;
use std::hash::Hash;

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Total variation distance `0.5 sum |p - q|` between two pmfs over keyed supports.
pub fn tv_distance<K: Ord + Clone>(p: &BTreeMap<K, f64>, q: &BTreeMap<K, f64>) -> f64 {
    let mut acc = 0.0;
    for (k, pv) in p {
        acc += (pv - q.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, qv) in q {
        if !p.contains_key(k) {
            acc += qv.abs();
        }
    }
    0.5 * acc
}

/// Normalize counts into a pmf.
pub fn normalize<K: Ord + Clone>(counts: &BTreeMap<K, usize>) -> BTreeMap<K, f64> {
    let total: usize = counts.values().sum();
    counts
        .iter()
        .map(|(k, &c)| (k.clone(), c as f64 / total as f64))
        .collect()
}

pub fn histogram<K: Ord + Clone + Hash, I: IntoIterator<Item = K>>(items: I) -> BTreeMap<K, usize> {
    let mut h = BTreeMap::new();
    for k in items {
        *h.entry(k).or_insert(0) += 1;
    }
    h
}

/// Chi-square test of homogeneity of two histograms. Bins with expected
/// count below 5 are pooled. Returns `(statistic, dof, p_value)`.
pub fn two_sample_chi_square<K: Ord + Clone>(
    a: &BTreeMap<K, usize>,
    b: &BTreeMap<K, usize>,
) -> (f64, usize, f64) {
    let na: usize = a.values().sum();
    let nb: usize = b.values().sum();
    let n = (na + nb) as f64;
    let mut keys: Vec<K> = a.keys().cloned().collect();
    keys.extend(b.keys().filter(|k| !a.contains_key(*k)).cloned());
    keys.sort();

    // pool consecutive bins until both expected counts reach 5
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut ca, mut cb) = (0.0, 0.0);
    for k in &keys {
        ca += a.get(k).copied().unwrap_or(0) as f64;
        cb += b.get(k).copied().unwrap_or(0) as f64;
        let tot = ca + cb;
        if tot * na as f64 / n >= 5.0 && tot * nb as f64 / n >= 5.0 {
            bins.push((ca, cb));
            ca = 0.0;
            cb = 0.0;
        }
    }
    if ca + cb > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += ca;
                last.1 += cb;
            }
            None => bins.push((ca, cb)),
        }
    }
    if bins.len() < 2 {
        return (0.0, 0, 1.0);
    }
    let mut stat = 0.0;
    for &(oa, ob) in &bins {
        let tot = oa + ob;
        let ea = tot * na as f64 / n;
        let eb = tot * nb as f64 / n;
        stat += (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb;
    }
    let dof = bins.len() - 1;
    let p = 1.0 - ChiSquared::new(dof as f64).expect("dof > 0").cdf(stat);
    (stat, dof, p)
}

/// Sample mean and unbiased covariance of the rows, plus the standard errors
/// of the mean entries and of the variance (diagonal) entries.
#[derive(Debug, Clone)]
pub struct SampleMoments {
    pub n: usize,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub se_mean: Vec<f64>,
    /// Standard error of each covariance entry, from fourth central moments.
    pub se_cov: Vec<Vec<f64>>,
}

pub fn sample_moments(rows: &[Vec<f64>]) -> SampleMoments {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    let nf = n as f64;
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= nf;
    }
    let mut cov = vec![vec![0.0; d]; d];
    let mut m4 = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            let di = r[i] - mean[i];
            for j in 0..d {
                let dj = r[j] - mean[j];
                cov[i][j] += di * dj;
                m4[i][j] += di * di * dj * dj;
            }
        }
    }
    let mut se_cov = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            let c_biased = cov[i][j] / nf;
            let fourth = m4[i][j] / nf;
            se_cov[i][j] = ((fourth - c_biased * c_biased).max(0.0) / nf).sqrt();
            cov[i][j] /= nf - 1.0;
        }
    }
    let se_mean = (0..d).map(|i| (cov[i][i] / nf).sqrt()).collect();
    SampleMoments {
        n,
        mean,
        cov,
        se_mean,
        se_cov,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tv_of_disjoint_and_equal() {
        let p: BTreeMap<u32, f64> = [(0, 0.5), (1, 0.5)].into_iter().collect();
        let q: BTreeMap<u32, f64> = [(2, 1.0)].into_iter().collect();
        assert_eq!(tv_distance(&p, &q), 1.0);
        assert_eq!(tv_distance(&p, &p), 0.0);
    }

    #[test]
    fn chi_square_identical_histograms() {
        let h: BTreeMap<u32, usize> = (0..10).map(|k| (k, 100 + k as usize)).collect();
        let (stat, dof, p) = two_sample_chi_square(&h, &h);
        assert_eq!(stat, 0.0);
        assert_eq!(dof, 9);
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_detects_shift() {
        let a: BTreeMap<u32, usize> = (0..10).map(|k| (k, 1000)).collect();
        let b: BTreeMap<u32, usize> = (0..10).map(|k| (k, 500 + 100 * k as usize)).collect();
        let (_, _, p) = two_sample_chi_square(&a, &b);
        assert!(p < 1e-10);
    }

    #[test]
    fn moments_of_known_rows() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, 6.0], vec![5.0, 10.0]];
        let m = sample_moments(&rows);
        assert_eq!(m.mean, vec![3.0, 6.0]);
        assert!((m.cov[0][0] - 4.0).abs() < 1e-12);
        assert!((m.cov[0][1] - 8.0).abs() < 1e-12);
        assert!((m.cov[1][1] - 16.0).abs() < 1e-12);
    }
}
