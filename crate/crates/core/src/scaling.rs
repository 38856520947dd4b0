//! Volume scaling: `kappa = kappa'/V`, `delta = delta'`, `lambda_i = lambda'_i V`.
//!
//! Under the symmetric preset `kappa' = 1`, `lambda'_i = delta' = D` the
//! Dirichlet parameters are `alpha_i = D V / d`, so the conditional law passes
//! from corner-concentrated (small `V`) through uniform to interior-unimodal.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytic::{analytic_moments, corner_mass, mixing_intensity, Conditional, MixtureStationary, Moments};
use crate::error::{Error, Result};
use crate::model::{apply_volume_scaling, simplex_size, PrimedParameters, Simplex, Topology};

/// Relative tolerance for calling a Dirichlet parameter equal to one.
pub const FLAT_TOL: f64 = 1e-12;
/// Largest simplex enumerated when measuring flatness.
pub const FLATNESS_STATE_CAP: u128 = 2_000_000;

/// Volume at which the conditional law is uniform under the symmetric preset
/// with rate `D`: `d / D` for the full-symmetric network, `d / ((d - 1) D)` for
/// the cycle.
pub fn critical_volume(d: usize, diffusion: f64, topology: Topology) -> Result<f64> {
    if !(diffusion > 0.0) || !diffusion.is_finite() {
        return Err(Error::InvalidArgument(format!("D must be positive, got {diffusion}")));
    }
    match topology {
        Topology::FullSymmetric if d >= 1 => Ok(d as f64 / diffusion),
        Topology::TkCycle if d >= 2 => Ok(d as f64 / ((d - 1) as f64 * diffusion)),
        Topology::TkCycle => Err(Error::InvalidArgument("the cycle needs d >= 2".into())),
        Topology::FullSymmetric => Err(Error::ZeroDimension),
        Topology::Custom => Err(Error::UnsupportedTopology(topology.as_str())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modality {
    BoundaryConcentrated,
    Flat,
    InteriorUnimodal,
    Mixed,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::BoundaryConcentrated => "boundary-concentrated",
            Modality::Flat => "flat",
            Modality::InteriorUnimodal => "interior-unimodal",
            Modality::Mixed => "mixed",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [Modality::BoundaryConcentrated, Modality::Flat, Modality::InteriorUnimodal, Modality::Mixed]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown modality {s:?}")))
    }
}

/// Shape of the Dirichlet-multinomial conditional. Parameters within
/// [`FLAT_TOL`] of one count as one.
pub fn modality_class(alpha: &[f64]) -> Modality {
    let cmp = |a: f64| {
        if (a - 1.0).abs() <= FLAT_TOL {
            std::cmp::Ordering::Equal
        } else {
            a.partial_cmp(&1.0).unwrap_or(std::cmp::Ordering::Equal)
        }
    };
    use std::cmp::Ordering::*;
    if alpha.iter().all(|&a| cmp(a) == Equal) {
        Modality::Flat
    } else if alpha.iter().all(|&a| cmp(a) == Less) {
        Modality::BoundaryConcentrated
    } else if alpha.iter().all(|&a| cmp(a) == Greater) {
        Modality::InteriorUnimodal
    } else {
        Modality::Mixed
    }
}

/// `max_a |pi(a | n) - 1/|E_n||`. `None` when the simplex is too large to enumerate.
pub fn flatness(cond: &Conditional, n: u64) -> Result<Option<f64>> {
    if let Conditional::UniformSimplex { .. } = cond {
        return Ok(Some(0.0));
    }
    let d = cond.dimension();
    let size = simplex_size(d, n);
    if size > FLATNESS_STATE_CAP {
        return Ok(None);
    }
    let uniform = 1.0 / size as f64;
    let mut worst: f64 = 0.0;
    for a in Simplex::new(d, n) {
        worst = worst.max((cond.ln_pmf(n, &a)?.exp() - uniform).abs());
    }
    Ok(Some(worst))
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub volume: f64,
    pub mu: f64,
    pub reference_n: u64,
    /// `false` for a cycle away from `delta = d kappa / (d - 1)`: only the
    /// lumped Poisson law is known there.
    pub conditional_available: bool,
    pub alpha: Option<Vec<f64>>,
    pub modality: Option<Modality>,
    pub flatness: Option<f64>,
    pub corner_mass: Option<f64>,
    pub moments: Option<Moments>,
    /// Mean and variance of `|X| / V` under `Poisson(mu)`.
    pub lumped_mean: f64,
    pub lumped_var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSweep {
    pub primed: PrimedParameters,
    pub dimension: usize,
    pub topology: Topology,
    pub records: Vec<SweepRecord>,
}

/// Evaluate the stationary law across a volume grid. `reference_n = None`
/// uses `round(mu)` at each volume.
pub fn scaling_sweep(
    primed: &PrimedParameters,
    volumes: &[f64],
    d: usize,
    topology: Topology,
    reference_n: Option<u64>,
) -> Result<ScalingSweep> {
    if volumes.is_empty() {
        return Err(Error::InvalidArgument("empty volume grid".into()));
    }
    let records = volumes
        .iter()
        .map(|&v| sweep_record(primed, v, d, topology, reference_n))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalingSweep {
        primed: primed.clone(),
        dimension: d,
        topology,
        records,
    })
}

fn sweep_record(
    primed: &PrimedParameters,
    volume: f64,
    d: usize,
    topology: Topology,
    reference_n: Option<u64>,
) -> Result<SweepRecord> {
    let net = apply_volume_scaling(primed, volume, d, topology)?;
    let mu = mixing_intensity(&net)?;
    let n = reference_n.unwrap_or_else(|| mu.round().max(1.0) as u64);
    let mut rec = SweepRecord {
        volume,
        mu,
        reference_n: n,
        conditional_available: false,
        alpha: None,
        modality: None,
        flatness: None,
        corner_mass: None,
        moments: None,
        lumped_mean: mu / volume,
        lumped_var: mu / (volume * volume),
    };
    let ms = match MixtureStationary::for_network(&net) {
        Ok(ms) => ms,
        // a cycle off its critical relation: the conditional is unknown
        Err(Error::Hypothesis(_)) if topology == Topology::TkCycle => return Ok(rec),
        Err(e) => return Err(e),
    };
    let alpha = ms.conditional.alpha();
    rec.conditional_available = true;
    rec.modality = Some(match ms.conditional {
        Conditional::UniformSimplex { .. } => Modality::Flat,
        Conditional::DirichletMultinomial { .. } => modality_class(&alpha),
    });
    rec.flatness = flatness(&ms.conditional, n)?;
    rec.corner_mass = Some(corner_mass(&alpha, n)?);
    rec.moments = Some(analytic_moments(&ms, volume)?);
    rec.alpha = Some(alpha);
    Ok(rec)
}

impl ScalingSweep {
    pub fn modalities(&self) -> Vec<Option<Modality>> {
        self.records.iter().map(|r| r.modality).collect()
    }

    /// `V,alpha_1..alpha_d,modality,flatness,corner_mass,mean_1..mean_d,var_11`;
    /// unavailable fields are left empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.dimension;
        let mut header = vec!["V".to_string()];
        header.extend((1..=d).map(|i| format!("alpha_{i}")));
        header.extend(["modality", "flatness", "corner_mass"].map(String::from));
        header.extend((1..=d).map(|i| format!("mean_{i}")));
        header.push("var_11".into());
        writeln!(w, "{}", header.join(","))?;

        let num = |x: f64| format!("{x:.17e}");
        let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
        for r in &self.records {
            let mut row = vec![num(r.volume)];
            match &r.alpha {
                Some(a) => row.extend(a.iter().map(|&x| num(x))),
                None => row.extend(std::iter::repeat(String::new()).take(d)),
            }
            row.push(r.modality.map(|m| m.to_string()).unwrap_or_default());
            row.push(opt(r.flatness));
            row.push(opt(r.corner_mass));
            match &r.moments {
                Some(m) => {
                    row.extend(m.mean.iter().map(|&x| num(x)));
                    row.push(num(m.cov[0][0]));
                }
                None => row.extend(std::iter::repeat(String::new()).take(d + 1)),
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Where a single Dirichlet parameter crosses one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaCrossing {
    pub species: usize,
    /// `alpha_i(V)` is linear in `V`; this is the slope.
    pub slope: f64,
    pub crossing_volume: f64,
}

/// Per-species crossing volumes `V_i` with `alpha_i(V_i) = 1`. With unequal
/// inflows these differ, so the family never passes through the uniform law.
pub fn alpha_crossings(primed: &PrimedParameters, d: usize, topology: Topology) -> Result<Vec<AlphaCrossing>> {
    let net = apply_volume_scaling(primed, 1.0, d, topology)?;
    let alpha = crate::analytic::dirichlet_params(&net)?;
    Ok(alpha
        .into_iter()
        .enumerate()
        .map(|(species, slope)| AlphaCrossing {
            species,
            slope,
            crossing_volume: 1.0 / slope,
        })
        .collect())
}
