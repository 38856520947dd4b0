//! Reaction network family `A_i + A_j -> 2 A_j` (rate `kappa_ij`) with
//! inflow `0 -> A_i` (rate `lambda_i`) and outflow `A_i -> 0` (rate
//! `delta_i` per molecule), under stochastic mass-action kinetics.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the autocatalytic rate matrix was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    /// Every ordered pair `i != j` reacts with the same rate.
    FullSymmetric,
    /// Only `A_i + A_{i+1 mod d} -> 2 A_{i+1 mod d}` reacts.
    TkCycle,
    /// Arbitrary nonnegative zero-diagonal matrix.
    Custom,
}

impl Topology {
    pub fn as_str(self) -> &'static str {
        match self {
            Topology::FullSymmetric => "full-symmetric",
            Topology::TkCycle => "tk-cycle",
            Topology::Custom => "custom",
        }
    }

    /// Whether the topology allows a nonzero `kappa[i][j]` in dimension `d`.
    pub fn allows(self, d: usize, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        match self {
            Topology::FullSymmetric | Topology::Custom => true,
            Topology::TkCycle => j == (i + 1) % d,
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-symmetric" => Ok(Topology::FullSymmetric),
            "tk-cycle" => Ok(Topology::TkCycle),
            "custom" => Ok(Topology::Custom),
            other => Err(Error::Config(format!("unknown topology {other:?}"))),
        }
    }
}

/// A per-species parameter given either as one value for all species or as a vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Param {
    fn broadcast(&self, what: &'static str, d: usize) -> Result<Vec<f64>> {
        match self {
            Param::Scalar(v) => Ok(vec![*v; d]),
            Param::Vector(v) if v.len() == d => Ok(v.clone()),
            Param::Vector(v) => Err(Error::DimensionMismatch {
                what,
                expected: d,
                got: v.len(),
            }),
        }
    }
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Scalar(v)
    }
}

impl From<Vec<f64>> for Param {
    fn from(v: Vec<f64>) -> Self {
        Param::Vector(v)
    }
}

impl From<&[f64]> for Param {
    fn from(v: &[f64]) -> Self {
        Param::Vector(v.to_vec())
    }
}

/// Autocatalytic rates: a scalar spread over the topology's pattern, or a full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaParam {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl From<f64> for KappaParam {
    fn from(v: f64) -> Self {
        KappaParam::Scalar(v)
    }
}

impl From<Vec<Vec<f64>>> for KappaParam {
    fn from(v: Vec<Vec<f64>>) -> Self {
        KappaParam::Matrix(v)
    }
}

/// Validated network: dimension, autocatalytic matrix, inflow and outflow rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReactionNetwork {
    d: usize,
    /// Row-major `d x d`.
    kappa: Vec<f64>,
    lambda: Vec<f64>,
    delta: Vec<f64>,
    topology: Topology,
    /// Nonzero `(i, j, kappa_ij)` in row-major order.
    #[serde(skip)]
    pairs: Vec<(usize, usize, f64)>,
}

impl ReactionNetwork {
    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn kappa(&self, i: usize, j: usize) -> f64 {
        self.kappa[i * self.d + j]
    }

    pub fn kappa_matrix(&self) -> Vec<Vec<f64>> {
        self.kappa.chunks(self.d).map(<[f64]>::to_vec).collect()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    /// Nonzero autocatalytic channels `(i, j, kappa_ij)`.
    pub fn autocatalytic_pairs(&self) -> &[(usize, usize, f64)] {
        &self.pairs
    }

    pub fn total_inflow(&self) -> f64 {
        self.lambda.iter().sum()
    }

    /// The common outflow rate, if all `delta_i` are equal.
    pub fn common_delta(&self) -> Result<f64> {
        let first = self.delta[0];
        match self.delta.iter().position(|&x| x != first) {
            None => Ok(first),
            Some(index) => Err(Error::UnequalOutflow {
                first,
                index,
                other: self.delta[index],
            }),
        }
    }

    /// The common off-diagonal rate of a full-symmetric network.
    pub fn common_kappa(&self) -> Option<f64> {
        let mut it = self.pairs.iter().map(|p| p.2);
        let first = it.next()?;
        it.all(|k| k == first).then_some(first)
    }

    /// Every reaction channel of the network, including those whose
    /// propensity vanishes at a particular state.
    pub fn reactions(&self) -> Vec<TransitionKind> {
        let mut out = Vec::with_capacity(self.pairs.len() + 2 * self.d);
        out.extend(
            self.pairs
                .iter()
                .map(|&(from, to, _)| TransitionKind::Autocatalytic { from, to }),
        );
        for i in 0..self.d {
            out.push(TransitionKind::Inflow(i));
            out.push(TransitionKind::Outflow(i));
        }
        out
    }

    /// Propensity of `kind` at `x`.
    pub fn rate(&self, kind: TransitionKind, x: &[u64]) -> f64 {
        match kind {
            TransitionKind::Autocatalytic { from, to } => {
                self.kappa(from, to) * x[from] as f64 * x[to] as f64
            }
            TransitionKind::Inflow(i) => self.lambda[i],
            TransitionKind::Outflow(i) => self.delta[i] * x[i] as f64,
        }
    }
}

/// Create and validate a network.
///
/// Scalars broadcast to every species. A scalar `kappa` fills exactly the
/// entries allowed by `topology`; a matrix `kappa` must respect that pattern.
pub fn create_network(
    d: usize,
    topology: Topology,
    kappa: impl Into<KappaParam>,
    lambda: impl Into<Param>,
    delta: impl Into<Param>,
) -> Result<ReactionNetwork> {
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    let lambda = lambda.into().broadcast("lambda", d)?;
    let delta = delta.into().broadcast("delta", d)?;
    for (index, &value) in lambda.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFiniteRate("lambda"));
        }
        if value <= 0.0 {
            return Err(Error::NonPositiveInflow { index, value });
        }
    }
    for (index, &value) in delta.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFiniteRate("delta"));
        }
        if value <= 0.0 {
            return Err(Error::NonPositiveOutflow { index, value });
        }
    }

    let mut k = vec![0.0; d * d];
    match kappa.into() {
        KappaParam::Scalar(value) => {
            if !value.is_finite() {
                return Err(Error::NonFiniteRate("kappa"));
            }
            if value < 0.0 {
                return Err(Error::NegativeKappa { i: 0, j: 0, value });
            }
            for i in 0..d {
                for j in 0..d {
                    if topology.allows(d, i, j) {
                        k[i * d + j] = value;
                    }
                }
            }
        }
        KappaParam::Matrix(rows) => {
            if rows.len() != d {
                return Err(Error::DimensionMismatch {
                    what: "kappa rows",
                    expected: d,
                    got: rows.len(),
                });
            }
            for (i, row) in rows.iter().enumerate() {
                if row.len() != d {
                    return Err(Error::DimensionMismatch {
                        what: "kappa columns",
                        expected: d,
                        got: row.len(),
                    });
                }
                for (j, &value) in row.iter().enumerate() {
                    if !value.is_finite() {
                        return Err(Error::NonFiniteRate("kappa"));
                    }
                    if value < 0.0 {
                        return Err(Error::NegativeKappa { i, j, value });
                    }
                    if i == j && value != 0.0 {
                        return Err(Error::NonzeroKappaDiagonal { i, value });
                    }
                    if value != 0.0 && !topology.allows(d, i, j) {
                        return Err(Error::TopologyMismatch {
                            topology: topology.as_str(),
                            i,
                            j,
                        });
                    }
                    k[i * d + j] = value;
                }
            }
            if topology == Topology::FullSymmetric && d > 1 {
                let first = k[1];
                for i in 0..d {
                    for j in 0..d {
                        if i != j && k[i * d + j] != first {
                            return Err(Error::TopologyMismatch {
                                topology: topology.as_str(),
                                i,
                                j,
                            });
                        }
                    }
                }
            }
            if topology == Topology::TkCycle && d > 1 {
                let first = k[1];
                for i in 0..d {
                    let j = (i + 1) % d;
                    if k[i * d + j] != first {
                        return Err(Error::TopologyMismatch {
                            topology: topology.as_str(),
                            i,
                            j,
                        });
                    }
                }
            }
        }
    }

    let pairs = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .filter_map(|(i, j)| {
            let v = k[i * d + j];
            (v > 0.0).then_some((i, j, v))
        })
        .collect();

    Ok(ReactionNetwork {
        d,
        kappa: k,
        lambda,
        delta,
        topology,
        pairs,
    })
}

/// Molecule counts `a_1..a_d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State(Vec<u64>);

impl State {
    pub fn new(counts: Vec<u64>) -> Self {
        State(counts)
    }

    pub fn zeros(d: usize) -> Self {
        State(vec![0; d])
    }

    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    pub fn counts_mut(&mut self) -> &mut [u64] {
        &mut self.0
    }

    pub fn into_counts(self) -> Vec<u64> {
        self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    /// `n = sum a_i`.
    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }
}

impl From<Vec<u64>> for State {
    fn from(v: Vec<u64>) -> Self {
        State(v)
    }
}

impl AsRef<[u64]> for State {
    fn as_ref(&self) -> &[u64] {
        &self.0
    }
}

/// Reaction channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    /// `A_from + A_to -> 2 A_to`, jump `e_to - e_from`.
    Autocatalytic { from: usize, to: usize },
    /// `0 -> A_i`, jump `+e_i`.
    Inflow(usize),
    /// `A_i -> 0`, jump `-e_i`.
    Outflow(usize),
}

impl TransitionKind {
    /// Jump vector in `{-1, 0, 1}^d`.
    pub fn jump(self, d: usize) -> Vec<i64> {
        let mut v = vec![0; d];
        match self {
            TransitionKind::Autocatalytic { from, to } => {
                v[from] -= 1;
                v[to] += 1;
            }
            TransitionKind::Inflow(i) => v[i] += 1,
            TransitionKind::Outflow(i) => v[i] -= 1,
        }
        v
    }

    /// Change of the total count `n`.
    pub fn total_change(self) -> i64 {
        match self {
            TransitionKind::Autocatalytic { .. } => 0,
            TransitionKind::Inflow(_) => 1,
            TransitionKind::Outflow(_) => -1,
        }
    }

    /// Apply the jump in place. Fails if a count would go negative or overflow.
    pub fn apply_in_place(self, x: &mut [u64]) -> Result<()> {
        match self {
            TransitionKind::Autocatalytic { from, to } => {
                let f = x[from].checked_sub(1).ok_or_else(|| negative(from))?;
                let t = x[to].checked_add(1).ok_or(Error::CountOverflow)?;
                x[from] = f;
                x[to] = t;
            }
            TransitionKind::Inflow(i) => {
                x[i] = x[i].checked_add(1).ok_or(Error::CountOverflow)?;
            }
            TransitionKind::Outflow(i) => {
                x[i] = x[i].checked_sub(1).ok_or_else(|| negative(i))?;
            }
        }
        Ok(())
    }

    pub fn apply(self, x: &State) -> Result<State> {
        let mut y = x.clone();
        self.apply_in_place(&mut y.0)?;
        Ok(y)
    }
}

fn negative(i: usize) -> Error {
    Error::Domain(format!("jump would make a_{} negative", i + 1))
}

/// A reaction channel together with its propensity at a given state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub kind: TransitionKind,
    pub rate: f64,
}

/// Transitions with positive propensity at `x`. Zero-rate channels are
/// omitted; [`ReactionNetwork::reactions`] lists them all.
pub fn propensities(net: &ReactionNetwork, x: &State) -> Vec<Transition> {
    let a = x.counts();
    debug_assert_eq!(a.len(), net.d);
    let mut out = Vec::with_capacity(net.pairs.len() + 2 * net.d);
    for &(from, to, k) in &net.pairs {
        let rate = k * a[from] as f64 * a[to] as f64;
        if rate > 0.0 {
            out.push(Transition {
                kind: TransitionKind::Autocatalytic { from, to },
                rate,
            });
        }
    }
    for i in 0..net.d {
        out.push(Transition {
            kind: TransitionKind::Inflow(i),
            rate: net.lambda[i],
        });
        if a[i] > 0 {
            out.push(Transition {
                kind: TransitionKind::Outflow(i),
                rate: net.delta[i] * a[i] as f64,
            });
        }
    }
    out
}

/// Total propensity `Lambda(x)` without allocating.
pub fn total_propensity(net: &ReactionNetwork, x: &[u64]) -> f64 {
    let auto: f64 = net
        .pairs
        .iter()
        .map(|&(i, j, k)| k * x[i] as f64 * x[j] as f64)
        .sum();
    let out: f64 = net
        .delta
        .iter()
        .zip(x)
        .map(|(&dl, &a)| dl * a as f64)
        .sum();
    auto + net.total_inflow() + out
}

/// Parameters before volume scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimedParameters {
    pub kappa: KappaParam,
    pub lambda: Param,
    pub delta: Param,
}

impl PrimedParameters {
    /// `kappa' = 1`, `lambda'_i = delta' = D`.
    pub fn tk_preset(diffusion: f64) -> Self {
        PrimedParameters {
            kappa: KappaParam::Scalar(1.0),
            lambda: Param::Scalar(diffusion),
            delta: Param::Scalar(diffusion),
        }
    }
}

/// Network at volume `V`: `kappa = kappa'/V`, `delta = delta'`, `lambda_i = lambda'_i V`.
pub fn apply_volume_scaling(
    primed: &PrimedParameters,
    volume: f64,
    d: usize,
    topology: Topology,
) -> Result<ReactionNetwork> {
    if !(volume > 0.0) || !volume.is_finite() {
        return Err(Error::NonPositiveVolume(volume));
    }
    let kappa = match &primed.kappa {
        KappaParam::Scalar(k) => KappaParam::Scalar(k / volume),
        KappaParam::Matrix(m) => KappaParam::Matrix(
            m.iter()
                .map(|row| row.iter().map(|k| k / volume).collect())
                .collect(),
        ),
    };
    let lambda = match &primed.lambda {
        Param::Scalar(l) => Param::Scalar(l * volume),
        Param::Vector(v) => Param::Vector(v.iter().map(|l| l * volume).collect()),
    };
    create_network(d, topology, kappa, lambda, primed.delta.clone())
}

/// `(L f)(x) = sum over transitions of rate * (f(x + jump) - f(x))`.
pub fn generator_apply<F>(net: &ReactionNetwork, f: F, x: &State) -> Result<f64>
where
    F: Fn(&State) -> f64,
{
    let fx = f(x);
    let mut acc = 0.0;
    for t in propensities(net, x) {
        let y = t.kind.apply(x)?;
        acc += t.rate * (f(&y) - fx);
    }
    Ok(acc)
}

/// Iterator over the simplex `E_n = {a in N^d : sum a_i = n}` in
/// lexicographically decreasing order of `a_1, a_2, ...`.
#[derive(Debug, Clone)]
pub struct Simplex {
    current: Option<Vec<u64>>,
}

impl Simplex {
    pub fn new(d: usize, n: u64) -> Self {
        assert!(d >= 1, "simplex dimension must be at least 1");
        let mut start = vec![0; d];
        start[0] = n;
        Simplex {
            current: Some(start),
        }
    }
}

impl Iterator for Simplex {
    type Item = Vec<u64>;

    fn next(&mut self) -> Option<Vec<u64>> {
        let cur = self.current.take()?;
        let d = cur.len();
        let mut nxt = cur.clone();
        // rightmost position (excluding the last) holding a positive count
        if let Some(p) = (0..d.saturating_sub(1)).rev().find(|&p| nxt[p] > 0) {
            nxt[p] -= 1;
            let tail: u64 = nxt[p + 1..].iter().sum::<u64>() + 1;
            for v in &mut nxt[p + 1..] {
                *v = 0;
            }
            nxt[p + 1] = tail;
            self.current = Some(nxt);
        }
        Some(cur)
    }
}

/// `|E_n| = C(n + d - 1, d - 1)`.
pub fn simplex_size(d: usize, n: u64) -> u128 {
    binomial(n as u128 + d as u128 - 1, d as u128 - 1)
}

pub(crate) fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Network description ingested from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub dimension: usize,
    pub topology: Topology,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<KappaParam>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Param>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Param>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<VolumeConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeConfig {
    #[serde(rename = "V")]
    pub volume: f64,
    pub kappa_prime: KappaParam,
    pub lambda_prime: Param,
    pub delta_prime: Param,
}

impl VolumeConfig {
    pub fn primed(&self) -> PrimedParameters {
        PrimedParameters {
            kappa: self.kappa_prime.clone(),
            lambda: self.lambda_prime.clone(),
            delta: self.delta_prime.clone(),
        }
    }
}

impl NetworkConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Build the network; a `volume` block overrides the direct parameters.
    pub fn build(&self) -> Result<ReactionNetwork> {
        if let Some(v) = &self.volume {
            return apply_volume_scaling(&v.primed(), v.volume, self.dimension, self.topology);
        }
        let missing = |k: &str| Error::Config(format!("missing key {k:?} (and no \"volume\" block)"));
        create_network(
            self.dimension,
            self.topology,
            self.kappa.clone().ok_or_else(|| missing("kappa"))?,
            self.lambda.clone().ok_or_else(|| missing("lambda"))?,
            self.delta.clone().ok_or_else(|| missing("delta"))?,
        )
    }
}
