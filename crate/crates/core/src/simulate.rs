//! Exact stochastic simulation (direct method), ensembles, lumped paths and
//! switching statistics.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ReactionNetwork, State, TransitionKind};
use crate::rng::{self, derive_seed};

pub const DEFAULT_EVENT_CAP: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOptions {
    pub event_cap: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            event_cap: DEFAULT_EVENT_CAP,
        }
    }
}

/// Channel rates in a fixed order: autocatalytic pairs, then inflow and
/// outflow of each species. Reused across steps to avoid reallocating.
struct Rates {
    n_pairs: usize,
    buf: Vec<f64>,
    xf: Vec<f64>,
}

impl Rates {
    fn new(net: &ReactionNetwork) -> Self {
        let n_pairs = net.autocatalytic_pairs().len();
        Rates {
            n_pairs,
            buf: vec![0.0; n_pairs + 2 * net.dimension()],
            xf: Vec::with_capacity(net.dimension()),
        }
    }

    /// Refresh every rate at `x` and return their sum.
    fn fill(&mut self, net: &ReactionNetwork, x: &[u64]) -> f64 {
        // counts stay far below 2^63, and the signed conversion is a single instruction
        self.xf.clear();
        self.xf.extend(x.iter().map(|&a| a as i64 as f64));
        let (auto, rest) = self.buf.split_at_mut(self.n_pairs);
        let mut total = 0.0;
        for (r, &(i, j, k)) in auto.iter_mut().zip(net.autocatalytic_pairs()) {
            *r = k * self.xf[i] * self.xf[j];
            total += *r;
        }
        for (((r, &l), &dl), &a) in rest.chunks_exact_mut(2).zip(net.lambda()).zip(net.delta()).zip(&self.xf) {
            r[0] = l;
            r[1] = dl * a;
            total += r[0] + r[1];
        }
        total
    }

    /// Index of the channel whose cumulative rate first exceeds `target`.
    fn select(&self, mut target: f64) -> usize {
        let mut last = self.n_pairs;
        for (idx, &r) in self.buf.iter().enumerate() {
            if r > 0.0 {
                if target < r {
                    return idx;
                }
                target -= r;
                last = idx;
            }
        }
        // round-off left `target` marginally above the total
        last
    }

    fn kind(&self, net: &ReactionNetwork, idx: usize) -> TransitionKind {
        if idx < self.n_pairs {
            let (from, to, _) = net.autocatalytic_pairs()[idx];
            return TransitionKind::Autocatalytic { from, to };
        }
        let k = idx - self.n_pairs;
        if k % 2 == 0 {
            TransitionKind::Inflow(k / 2)
        } else {
            TransitionKind::Outflow(k / 2)
        }
    }
}

/// One direct-method step on `x` in place. Returns the waiting time and the fired channel.
pub fn step_in_place<R: Rng + ?Sized>(
    net: &ReactionNetwork,
    x: &mut [u64],
    rng: &mut R,
) -> Result<(f64, TransitionKind)> {
    let mut rates = Rates::new(net);
    let total = rates.fill(net, x);
    let wait = rng::exponential(rng, total);
    let kind = rates.kind(net, rates.select(rng.random::<f64>() * total));
    kind.apply_in_place(x)?;
    Ok((wait, kind))
}

/// One SSA step from `x`: exponential waiting time with rate `Lambda(x)`,
/// channel chosen with probability `rate / Lambda(x)`.
pub fn ssa_step<R: Rng + ?Sized>(net: &ReactionNetwork, x: &State, rng: &mut R) -> Result<(f64, State)> {
    let mut y = x.clone();
    let (wait, _) = step_in_place(net, y.counts_mut(), rng)?;
    Ok((wait, y))
}

/// Simulate on `[0, end_time]`, calling `observer(time, new_state, kind)` after every event.
/// Returns the final state and the number of events.
pub fn simulate_with<F>(
    net: &ReactionNetwork,
    x0: &State,
    end_time: f64,
    seed: u64,
    opts: SimOptions,
    mut observer: F,
) -> Result<(State, u64)>
where
    F: FnMut(f64, &[u64], TransitionKind),
{
    check_inputs(net, x0, end_time)?;
    let mut rng = rng::stream(seed);
    let mut rates = Rates::new(net);
    let mut x = x0.clone();
    let mut t = 0.0;
    let mut events = 0u64;
    loop {
        let total = rates.fill(net, x.counts());
        let wait = rng::exponential(&mut rng, total);
        if t + wait > end_time {
            break;
        }
        if events >= opts.event_cap {
            return Err(Error::EventCapExceeded {
                cap: opts.event_cap,
                time: t,
            });
        }
        t += wait;
        let kind = rates.kind(net, rates.select(rng.random::<f64>() * total));
        kind.apply_in_place(x.counts_mut())?;
        events += 1;
        observer(t, x.counts(), kind);
    }
    Ok((x, events))
}

fn check_inputs(net: &ReactionNetwork, x0: &State, end_time: f64) -> Result<()> {
    if x0.dimension() != net.dimension() {
        return Err(Error::DimensionMismatch {
            what: "initial state",
            expected: net.dimension(),
            got: x0.dimension(),
        });
    }
    if !(end_time > 0.0) || !end_time.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "end time must be positive and finite, got {end_time}"
        )));
    }
    Ok(())
}

/// Sample path: event times and post-event states, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial_state: State,
    pub end_time: f64,
    pub seed: u64,
    times: Vec<f64>,
    states: Vec<u64>,
}

impl Trajectory {
    pub fn dimension(&self) -> usize {
        self.initial_state.dimension()
    }

    pub fn n_events(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// State right after event `k`.
    pub fn state_after(&self, k: usize) -> &[u64] {
        let d = self.dimension();
        &self.states[k * d..(k + 1) * d]
    }

    pub fn final_state(&self) -> &[u64] {
        match self.n_events() {
            0 => self.initial_state.counts(),
            k => self.state_after(k - 1),
        }
    }

    /// `(time, new_state)` pairs.
    pub fn events(&self) -> impl Iterator<Item = (f64, &[u64])> + '_ {
        self.times
            .iter()
            .zip(self.states.chunks(self.dimension()))
            .map(|(&t, s)| (t, s))
    }

    /// Piecewise-constant segments `(start, end, state)` covering `[0, end_time]`.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, &[u64])> + '_ {
        let starts = std::iter::once(0.0).chain(self.times.iter().copied());
        let ends = self.times.iter().copied().chain(std::iter::once(self.end_time));
        let states = std::iter::once(self.initial_state.counts()).chain(self.states.chunks(self.dimension()));
        starts
            .zip(ends)
            .zip(states)
            .map(|((s, e), x)| (s, e, x))
    }

    /// CSV `time,a_1,...,a_d`; the first row is the initial state at time 0.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.dimension();
        let header: Vec<String> = (1..=d).map(|i| format!("a_{i}")).collect();
        writeln!(w, "time,{}", header.join(","))?;
        write_row(&mut w, 0.0, self.initial_state.counts())?;
        for (t, s) in self.events() {
            write_row(&mut w, t, s)?;
        }
        Ok(())
    }
}

fn write_row<W: Write>(w: &mut W, t: f64, s: &[u64]) -> io::Result<()> {
    write!(w, "{}", format_time(t))?;
    for v in s {
        write!(w, ",{v}")?;
    }
    writeln!(w)
}

/// Seventeen significant digits, scientific notation.
pub fn format_time(t: f64) -> String {
    format!("{t:.16e}")
}

/// Exact trajectory on `[0, end_time]`; deterministic in `seed`.
pub fn simulate_trajectory(
    net: &ReactionNetwork,
    x0: &State,
    end_time: f64,
    seed: u64,
    opts: SimOptions,
) -> Result<Trajectory> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    simulate_with(net, x0, end_time, seed, opts, |t, x, _| {
        times.push(t);
        states.extend_from_slice(x);
    })?;
    Ok(Trajectory {
        initial_state: x0.clone(),
        end_time,
        seed,
        times,
        states,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    pub end_time: f64,
    pub master_seed: u64,
}

/// End states `X(T)` of independent trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub config: EnsembleConfig,
    pub initial_state: State,
    pub seeds: Vec<u64>,
    pub end_states: Vec<State>,
}

impl EnsembleResult {
    /// CSV `traj_id,seed,a_1,...,a_d`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.initial_state.dimension();
        let header: Vec<String> = (1..=d).map(|i| format!("a_{i}")).collect();
        writeln!(w, "traj_id,seed,{}", header.join(","))?;
        for (k, (seed, s)) in self.seeds.iter().zip(&self.end_states).enumerate() {
            write!(w, "{k},{seed}")?;
            for v in s.counts() {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Number of end states at each total count.
    pub fn totals_histogram(&self) -> BTreeMap<u64, usize> {
        crate::stats::histogram(self.end_states.iter().map(State::total))
    }
}

/// Sample `n_traj` independent end states. Trajectory `k` uses seed
/// `derive_seed(master_seed, k)`, so the result does not depend on scheduling.
pub fn ensemble_sample(
    net: &ReactionNetwork,
    x0: &State,
    end_time: f64,
    n_traj: usize,
    master_seed: u64,
    opts: SimOptions,
) -> Result<EnsembleResult> {
    if n_traj == 0 {
        return Err(Error::InvalidArgument("n_traj must be at least 1".into()));
    }
    check_inputs(net, x0, end_time)?;
    let seeds: Vec<u64> = (0..n_traj as u64).map(|k| derive_seed(master_seed, k)).collect();
    let end_states = seeds
        .par_iter()
        .map(|&seed| simulate_with(net, x0, end_time, seed, opts, |_, _, _| {}).map(|r| r.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleResult {
        config: EnsembleConfig {
            n_traj,
            end_time,
            master_seed,
        },
        initial_state: x0.clone(),
        seeds,
        end_states,
    })
}

/// Normalized histogram of end states on the simplex `E_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalConditional {
    pub n: u64,
    pub retained: usize,
    pub pmf: BTreeMap<Vec<u64>, f64>,
    pub counts: BTreeMap<Vec<u64>, usize>,
}

pub fn empirical_conditional(ens: &EnsembleResult, n: u64) -> Result<EmpiricalConditional> {
    let counts = crate::stats::histogram(
        ens.end_states
            .iter()
            .filter(|s| s.total() == n)
            .map(|s| s.counts().to_vec()),
    );
    let retained: usize = counts.values().sum();
    if retained == 0 {
        return Err(Error::EmptySlice(n));
    }
    Ok(EmpiricalConditional {
        n,
        retained,
        pmf: crate::stats::normalize(&counts),
        counts,
    })
}

/// Birth-death path of the total count `n(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LumpedPath {
    pub initial: u64,
    pub end_time: f64,
    /// `(time, new_total)` at every inflow or outflow event.
    pub jumps: Vec<(f64, u64)>,
}

impl LumpedPath {
    /// Time spent at each total on `[burn_in, end_time]`.
    pub fn occupancy(&self, burn_in: f64) -> BTreeMap<u64, f64> {
        let mut occ = Occupancy::new(self.initial, burn_in);
        for &(t, n) in &self.jumps {
            occ.jump(t, n);
        }
        occ.finish(self.end_time)
    }
}

/// Drop autocatalytic events (which leave `n` unchanged) and keep the totals.
pub fn lumped_projection(traj: &Trajectory) -> LumpedPath {
    let mut prev = traj.initial_state.total();
    let mut jumps = Vec::new();
    for (t, s) in traj.events() {
        let n: u64 = s.iter().sum();
        if n != prev {
            jumps.push((t, n));
            prev = n;
        }
    }
    LumpedPath {
        initial: traj.initial_state.total(),
        end_time: traj.end_time,
        jumps,
    }
}

/// Streaming time-weighted occupancy of a piecewise-constant integer path.
#[derive(Debug, Clone)]
pub struct Occupancy {
    current: u64,
    since: f64,
    burn_in: f64,
    acc: BTreeMap<u64, f64>,
}

impl Occupancy {
    pub fn new(initial: u64, burn_in: f64) -> Self {
        Occupancy {
            current: initial,
            since: 0.0,
            burn_in,
            acc: BTreeMap::new(),
        }
    }

    fn credit(&mut self, until: f64) {
        let from = self.since.max(self.burn_in);
        if until > from {
            *self.acc.entry(self.current).or_insert(0.0) += until - from;
        }
    }

    pub fn jump(&mut self, t: f64, value: u64) {
        if value == self.current {
            return;
        }
        self.credit(t);
        self.current = value;
        self.since = t;
    }

    /// Close the path at `end_time` and return the normalized occupancy.
    pub fn finish(mut self, end_time: f64) -> BTreeMap<u64, f64> {
        self.credit(end_time);
        let total: f64 = self.acc.values().sum();
        self.acc.values_mut().for_each(|v| *v /= total);
        self.acc
    }
}

/// Switching statistics between single-species dominance patterns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DitStats {
    pub epsilon: f64,
    pub floor: u64,
    /// Switches between distinct dominant species (non-dominant gaps in between are skipped).
    pub n_switches: usize,
    /// Total time each species was dominant.
    pub dominant_species_dwell: Vec<f64>,
    pub none_dwell: f64,
    pub end_time: f64,
    /// Run-length encoded pattern labels with their entry times.
    pub pattern_sequence: Vec<(Option<usize>, f64)>,
}

impl DitStats {
    pub fn dominant_fraction(&self) -> f64 {
        self.dominant_species_dwell.iter().sum::<f64>() / self.end_time
    }

    /// Dominant species in order of appearance, repeats collapsed.
    pub fn dominant_sequence(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for &(label, _) in &self.pattern_sequence {
            if let Some(i) = label {
                if out.last() != Some(&i) {
                    out.push(i);
                }
            }
        }
        out
    }
}

/// Species `i` dominates when `a_i >= epsilon n` and `n >= floor`.
pub fn dominant_species(x: &[u64], epsilon: f64, floor: u64) -> Option<usize> {
    let n: u64 = x.iter().sum();
    if n < floor || n == 0 {
        return None;
    }
    let (i, &best) = x.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
    (best as f64 >= epsilon * n as f64).then_some(i)
}

pub const DEFAULT_DIT_FLOOR: u64 = 5;

pub fn dit_statistics(traj: &Trajectory, epsilon: f64, floor: u64) -> Result<DitStats> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let d = traj.dimension();
    let mut dwell = vec![0.0; d];
    let mut none_dwell = 0.0;
    let mut seq: Vec<(Option<usize>, f64)> = Vec::new();
    for (start, end, x) in traj.segments() {
        let label = dominant_species(x, epsilon, floor);
        match label {
            Some(i) => dwell[i] += end - start,
            None => none_dwell += end - start,
        }
        if seq.last().map(|l| l.0) != Some(label) {
            seq.push((label, start));
        }
    }
    let mut stats = DitStats {
        epsilon,
        floor,
        n_switches: 0,
        dominant_species_dwell: dwell,
        none_dwell,
        end_time: traj.end_time,
        pattern_sequence: seq,
    };
    stats.n_switches = stats.dominant_sequence().len().saturating_sub(1);
    Ok(stats)
}

/// Rounded analytic mean `(lambda_i / delta_i)`, the default initial state.
pub fn default_initial_state(net: &ReactionNetwork) -> State {
    State::new(
        net.lambda()
            .iter()
            .zip(net.delta())
            .map(|(l, d)| (l / d).round() as u64)
            .collect(),
    )
}
