//! Pathwise evolution of the five processes through a substructure, their
//! exact generators, and the dispersal law of the limit process.
//!
//! Effect of each label, by process (no listed effect means the label is
//! ignored):
//!
//! | process   | `×` at x        | `★` at x        | `→` from x to y                         |
//! |-----------|-----------------|-----------------|-----------------------------------------|
//! | contact   | 2→0             | –               | if x=2: y 0→2                           |
//! | SEIS      | 2→0             | 1→2             | if x=2: y 0→1                           |
//! | two-stage | 2→0, 1→0        | 1→2             | if x=2: y 0→1                           |
//! | upper     | 2→0, 3→1        | 1→2, 3→2        | if x∈{2,3}: y 0→1, 2→3                  |
//! | limit     | –               | if x=1: x→0 and vacant members of a dispersal set A → 1 |

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::lattice::{Configuration, Graph, Model};
use crate::stats::{ols_slope, replica_seed, Estimate};
use crate::substructure::{Fiber, Intensities, Label, LabelKind, Substructure, DISPERSAL_STRIDE};
use crate::{Error, Result};

/// A process family together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Process {
    pub model: Model,
    /// Transmission rate per ordered adjacent pair.
    pub lambda: f64,
    /// Mean latent time; zero for the contact and limit processes.
    pub tau: f64,
}

impl Process {
    pub fn new(model: Model, lambda: f64, tau: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::param("lambda", format!("must be finite and >= 0, got {lambda}")));
        }
        if model == Model::Limit && lambda <= 0.0 {
            return Err(Error::param("lambda", "the limit process needs lambda > 0"));
        }
        let tau = match model {
            Model::Contact | Model::Limit => 0.0,
            _ => {
                if !(tau > 0.0) || !tau.is_finite() {
                    return Err(Error::param(
                        "tau",
                        format!("{model} needs a finite tau > 0, got {tau}"),
                    ));
                }
                tau
            }
        };
        Ok(Process { model, lambda, tau })
    }

    pub fn contact(lambda: f64) -> Result<Self> {
        Self::new(Model::Contact, lambda, 0.0)
    }

    pub fn seis(lambda: f64, tau: f64) -> Result<Self> {
        Self::new(Model::Seis, lambda, tau)
    }

    pub fn two_stage(lambda: f64, tau: f64) -> Result<Self> {
        Self::new(Model::TwoStage, lambda, tau)
    }

    pub fn upper(lambda: f64, tau: f64) -> Result<Self> {
        Self::new(Model::Upper, lambda, tau)
    }

    pub fn limit(lambda: f64) -> Result<Self> {
        Self::new(Model::Limit, lambda, 0.0)
    }

    pub fn onset_rate(&self) -> f64 {
        match self.model {
            Model::Contact => 0.0,
            Model::Limit => 1.0,
            _ => 1.0 / self.tau,
        }
    }

    /// Label intensities of this process's graphical representation.
    pub fn intensities(&self) -> Intensities {
        match self.model {
            Model::Limit => Intensities::new(0.0, 1.0, 0.0),
            _ => Intensities::new(1.0, self.onset_rate(), self.lambda),
        }
    }

    fn check_configuration(&self, eta: &Configuration, graph: &Graph) -> Result<()> {
        if eta.model() != self.model {
            return Err(Error::param(
                "configuration",
                format!("built for {}, process is {}", eta.model(), self.model),
            ));
        }
        if eta.len() != graph.n() {
            return Err(Error::param(
                "configuration",
                format!("{} sites, graph has {}", eta.len(), graph.n()),
            ));
        }
        Ok(())
    }
}

/// A single effective site change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub time: f64,
    pub site: usize,
    pub old: u8,
    pub new: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: Configuration,
    /// Effective changes in time order. A limit-process jump is recorded as
    /// consecutive entries sharing one time.
    pub transitions: Vec<Transition>,
    pub final_state: Configuration,
    pub t_start: f64,
    pub t_end: f64,
}

impl Trajectory {
    /// Configuration just after every transition at times `<= t`.
    pub fn state_at(&self, t: f64) -> Configuration {
        let mut eta = self.initial.clone();
        for tr in self.transitions.iter().take_while(|tr| tr.time <= t) {
            eta.set_unchecked(tr.site, tr.new);
        }
        eta
    }

    /// Replays the transitions, checking each recorded `old` type and the
    /// final configuration.
    pub fn replay_is_consistent(&self) -> bool {
        let mut eta = self.initial.clone();
        for tr in &self.transitions {
            if eta.get(tr.site) != tr.old || tr.old == tr.new {
                return false;
            }
            eta.set_unchecked(tr.site, tr.new);
        }
        let ordered = self.transitions.windows(2).all(|w| w[0].time <= w[1].time);
        ordered && eta == self.final_state
    }

    /// Distinct event times (limit jumps share a time).
    pub fn event_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self.transitions.iter().map(|t| t.time).collect();
        times.dedup();
        times
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,site,old,new\n");
        for tr in &self.transitions {
            let _ = writeln!(s, "{:?},{},{},{}", tr.time, tr.site, tr.old, tr.new);
        }
        s
    }
}

/// Applies one label to `states`, pushing `(site, old, new)` for each
/// effective change. `uniforms` is only consulted by the limit process.
fn apply_label(
    process: &Process,
    graph: &Graph,
    states: &mut [u8],
    label: &Label,
    uniforms: &[f64],
    changes: &mut Vec<(usize, u8, u8)>,
) {
    let x = label.site;
    let mut set = |states: &mut [u8], site: usize, new: u8| {
        let old = states[site];
        if old != new {
            states[site] = new;
            changes.push((site, old, new));
        }
    };
    match (process.model, label.kind()) {
        (Model::Limit, LabelKind::Onset) => {
            if states[x] != 1 {
                return;
            }
            set(states, x, 0);
            let dispersal = race_dispersal(process.lambda, graph.degree(x), uniforms);
            for (j, &y) in graph.neighbors(x).iter().enumerate() {
                if dispersal & (1 << j) != 0 && states[y] == 0 {
                    set(states, y, 1);
                }
            }
        }
        (Model::Limit, _) => {}
        (model, LabelKind::Recovery) => {
            let new = match (model, states[x]) {
                (_, 2) => 0,
                (Model::TwoStage, 1) => 0,
                (Model::Upper, 3) => 1,
                (_, s) => s,
            };
            set(states, x, new);
        }
        (Model::Contact, LabelKind::Onset) => {}
        (model, LabelKind::Onset) => {
            let new = match (model, states[x]) {
                (_, 1) => 2,
                (Model::Upper, 3) => 2,
                (_, s) => s,
            };
            set(states, x, new);
        }
        (model, LabelKind::Transmission) => {
            let y = label.target;
            let emits = match model {
                Model::Upper => matches!(states[x], 2 | 3),
                _ => states[x] == 2,
            };
            if !emits {
                return;
            }
            let new = match (model, states[y]) {
                (Model::Contact, 0) => 2,
                (_, 0) => 1,
                (Model::Upper, 2) => 3,
                (_, s) => s,
            };
            set(states, y, new);
        }
    }
}

/// Drives `states` through the labels of `sub` in `(t0, t1]`, calling
/// `observe` after every label that changed something.
fn drive(
    process: &Process,
    sub: &Substructure,
    states: &mut [u8],
    t0: f64,
    t1: f64,
    mut observe: impl FnMut(f64, &[(usize, u8, u8)], &[u8]),
) {
    let graph = sub.graph();
    let limit = process.model == Model::Limit;
    // ordinal of the next onset label per site, for the dispersal stream
    let mut onset_ordinal: Vec<usize> = if limit {
        (0..graph.n())
            .map(|x| {
                sub.fiber_times(Fiber::onset(x))
                    .partition_point(|&t| t <= t0)
            })
            .collect()
    } else {
        Vec::new()
    };
    let mut uniforms = [0.0; DISPERSAL_STRIDE];
    let mut changes = Vec::with_capacity(4);
    for label in sub.labels_between(t0, t1) {
        let mut u: &[f64] = &[];
        if limit && label.kind() == LabelKind::Onset {
            let x = label.site;
            let k = graph.degree(x) + 1;
            if states[x] == 1 {
                sub.dispersal_uniforms(x, onset_ordinal[x], &mut uniforms[..k]);
                u = &uniforms[..k];
            }
            onset_ordinal[x] += 1;
        }
        changes.clear();
        apply_label(process, graph, states, &label, u, &mut changes);
        if !changes.is_empty() {
            observe(label.time, &changes, states);
        }
    }
}

fn check_window(sub: &Substructure, t_start: f64, t_end: f64) -> Result<()> {
    if !(t_end <= sub.horizon()) {
        return Err(Error::Range(format!(
            "t_end = {t_end} beyond the substructure horizon {}",
            sub.horizon()
        )));
    }
    if !(t_start >= 0.0 && t_start <= t_end) {
        return Err(Error::Range(format!("bad time window [{t_start}, {t_end}]")));
    }
    Ok(())
}

/// Evolves `eta0` at time 0 through the labels of `sub` up to `t_end`.
pub fn evolve(process: &Process, eta0: &Configuration, sub: &Substructure, t_end: f64) -> Result<Trajectory> {
    evolve_between(process, eta0, sub, 0.0, t_end)
}

/// As [`evolve`], starting from `eta0` at time `t_start` and using only the
/// labels in `(t_start, t_end]`.
pub fn evolve_between(
    process: &Process,
    eta0: &Configuration,
    sub: &Substructure,
    t_start: f64,
    t_end: f64,
) -> Result<Trajectory> {
    process.check_configuration(eta0, sub.graph())?;
    check_window(sub, t_start, t_end)?;
    let mut states = eta0.states().to_vec();
    let mut transitions = Vec::new();
    drive(process, sub, &mut states, t_start, t_end, |time, changes, _| {
        transitions.extend(changes.iter().map(|&(site, old, new)| Transition {
            time,
            site,
            old,
            new,
        }));
    });
    Ok(Trajectory {
        initial: eta0.clone(),
        transitions,
        final_state: Configuration::new(process.model, states)?,
        t_start,
        t_end,
    })
}

/// First event time at which `a` is not below `b` site-wise under `le`,
/// checking the initial configurations and the state after every event of
/// either trajectory.
pub fn first_violation(a: &Trajectory, b: &Trajectory, le: impl Fn(u8, u8) -> bool) -> Option<f64> {
    let below = |x: &[u8], y: &[u8]| x.iter().zip(y).all(|(&p, &q)| le(p, q));
    let (mut x, mut y) = (a.initial.states().to_vec(), b.initial.states().to_vec());
    if !below(&x, &y) {
        return Some(a.t_start);
    }
    let (ta, tb) = (&a.transitions, &b.transitions);
    let (mut i, mut j) = (0, 0);
    while i < ta.len() || j < tb.len() {
        let t = match (ta.get(i), tb.get(j)) {
            (Some(p), Some(q)) => p.time.min(q.time),
            (Some(p), None) => p.time,
            (None, Some(q)) => q.time,
            (None, None) => unreachable!(),
        };
        while i < ta.len() && ta[i].time == t {
            x[ta[i].site] = ta[i].new;
            i += 1;
        }
        while j < tb.len() && tb[j].time == t {
            y[tb[j].site] = tb[j].new;
            j += 1;
        }
        if !below(&x, &y) {
            return Some(t);
        }
    }
    None
}

/// One jump of the continuous-time chain: simultaneous site changes and
/// their rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Jump {
    pub rate: f64,
    pub changes: Vec<(usize, u8)>,
}

/// Every effective jump out of `states`, one entry per label fiber (and,
/// for the limit process, per dispersal outcome). No-effect labels are
/// omitted; the rates of the returned jumps sum to at most
/// `process.intensities().total(graph)`.
pub fn jumps(process: &Process, graph: &Graph, states: &[u8]) -> Vec<Jump> {
    let mut out = Vec::new();
    let mut scratch = states.to_vec();
    let mut changes = Vec::with_capacity(4);
    let mut push = |rate: f64, changes: &[(usize, u8, u8)]| {
        if rate > 0.0 && !changes.is_empty() {
            out.push(Jump {
                rate,
                changes: changes.iter().map(|&(s, _, new)| (s, new)).collect(),
            });
        }
    };
    if process.model == Model::Limit {
        for x in (0..graph.n()).filter(|&x| states[x] == 1) {
            let pmf = dispersal_pmf(process.lambda, graph.degree(x)).expect("limit lambda > 0");
            for (mask, &p) in pmf.probs.iter().enumerate() {
                changes.clear();
                changes.push((x, 1, 0));
                for (j, &y) in graph.neighbors(x).iter().enumerate() {
                    if mask & (1 << j) != 0 && states[y] == 0 {
                        changes.push((y, 0, 1));
                    }
                }
                push(p, &changes);
            }
        }
        return out;
    }
    let mut probe = |kind: LabelKind, site: usize, target: usize, changes: &mut Vec<(usize, u8, u8)>| {
        let label = Label {
            time: 0.0,
            fiber: Fiber { kind, index: 0 },
            site,
            target,
        };
        changes.clear();
        apply_label(process, graph, &mut scratch, &label, &[], changes);
        for &(s, old, _) in changes.iter() {
            scratch[s] = old;
        }
    };
    let onset = process.onset_rate();
    for x in 0..graph.n() {
        probe(LabelKind::Recovery, x, x, &mut changes);
        push(1.0, &changes);
        if onset > 0.0 {
            probe(LabelKind::Onset, x, x, &mut changes);
            push(onset, &changes);
        }
    }
    for (x, y) in graph.directed_edges() {
        probe(LabelKind::Transmission, x, y, &mut changes);
        push(process.lambda, &changes);
    }
    out
}

/// Instantaneous rate of every effective `(site, new type)` change. For the
/// limit process the rate of a neighbor becoming occupied is the marginal
/// over dispersal outcomes.
pub fn rate_map(process: &Process, eta: &Configuration, graph: &Graph) -> Result<BTreeMap<(usize, u8), f64>> {
    process.check_configuration(eta, graph)?;
    let mut map = BTreeMap::new();
    for jump in jumps(process, graph, eta.states()) {
        for &(site, new) in &jump.changes {
            *map.entry((site, new)).or_insert(0.0) += jump.rate;
        }
    }
    Ok(map)
}

/// Law of the set of neighbors an isolated infectious site infects before
/// recovering, over the `2^k` subsets (bit `j` = `j`-th neighbor).
#[derive(Debug, Clone, PartialEq)]
pub struct DispersalPmf {
    pub lambda: f64,
    pub k: usize,
    pub probs: Vec<f64>,
}

pub fn dispersal_pmf(lambda: f64, k: usize) -> Result<DispersalPmf> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::param("lambda", format!("must be > 0, got {lambda}")));
    }
    if k >= DISPERSAL_STRIDE {
        return Err(Error::param("k", format!("at most {} neighbors", DISPERSAL_STRIDE - 1)));
    }
    // p(A) = a! * prod_{j<a} lambda / (1 + (k-j) lambda) * 1 / (1 + (k-a) lambda)
    let by_size: Vec<f64> = (0..=k)
        .map(|a| {
            let mut p = 1.0 / (1.0 + (k - a) as f64 * lambda);
            for j in 0..a {
                p *= (j + 1) as f64 * lambda / (1.0 + (k - j) as f64 * lambda);
            }
            p
        })
        .collect();
    let probs = (0..1usize << k)
        .map(|mask| by_size[mask.count_ones() as usize])
        .collect();
    Ok(DispersalPmf { lambda, k, probs })
}

impl DispersalPmf {
    pub fn prob(&self, mask: usize) -> f64 {
        self.probs[mask]
    }
}

/// Inverse-CDF draw of a subset mask.
pub fn sample_dispersal(pmf: &DispersalPmf, rng: &mut impl rand::Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (mask, &p) in pmf.probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return mask;
        }
    }
    pmf.probs.len() - 1
}

/// Dispersal set from an explicit exponential race: `uniforms[0]` drives the
/// rate-1 recovery clock, `uniforms[1 + j]` the rate-`lambda` clock toward
/// neighbor `j`. Neighbors whose clock rings first are infected. Sharing
/// the uniforms across `lambda < lambda'` yields nested sets.
pub fn race_dispersal(lambda: f64, k: usize, uniforms: &[f64]) -> usize {
    let recovery = -(1.0 - uniforms[0]).ln();
    let mut mask = 0;
    for j in 0..k {
        let clock = -(1.0 - uniforms[1 + j]).ln() / lambda;
        if clock < recovery {
            mask |= 1 << j;
        }
    }
    mask
}

/// Left-edge drift from the half-line start.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedEstimate {
    pub alpha: f64,
    pub half_width: f64,
    pub std_err: f64,
    pub per_replica: Vec<f64>,
}

/// Samples per replica of the left edge `l_t`.
pub const EDGE_SAMPLES: usize = 200;

/// Estimates the left-edge speed `alpha = lim l_t / t` from the half-line
/// configuration (strongest type at every site right of the window center),
/// by least squares over `[t_end/2, t_end]` per replica.
pub fn edge_speed(process: &Process, width: usize, t_end: f64, replicas: usize, seed: u64) -> Result<SpeedEstimate> {
    if width < 20 {
        return Err(Error::param("width", "need at least 20 sites"));
    }
    if !(t_end > 0.0) {
        return Err(Error::param("t_end", "must be > 0"));
    }
    if replicas == 0 {
        return Err(Error::param("replicas", "must be >= 1"));
    }
    let graph = Graph::path(width)?;
    let origin = width / 2;
    let margin = (width / 10).max(5);
    let mut init = vec![0u8; width];
    for s in init.iter_mut().skip(origin) {
        *s = process.model.top();
    }
    let eta0 = Configuration::new(process.model, init)?;
    let dt = t_end / EDGE_SAMPLES as f64;
    let grid: Vec<f64> = (0..=EDGE_SAMPLES).map(|k| k as f64 * dt).collect();

    let slopes: Vec<Result<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let sub = Substructure::generate(&graph, process.intensities(), t_end, replica_seed(seed, r as u64))?;
            let traj = evolve(process, &eta0, &sub, t_end)?;
            let mut states = eta0.states().to_vec();
            let mut edges = Vec::with_capacity(grid.len());
            let mut next = 0;
            let record = |states: &[u8], upto: f64, edges: &mut Vec<f64>, next: &mut usize| -> Result<()> {
                while *next < grid.len() && grid[*next] < upto {
                    let l = states.iter().position(|&c| c != 0);
                    match l {
                        Some(l) if l >= margin && l + margin < width => edges.push(l as f64 - origin as f64),
                        _ => return Err(Error::Truncation { time: grid[*next] }),
                    }
                    *next += 1;
                }
                Ok(())
            };
            for tr in &traj.transitions {
                record(&states, tr.time, &mut edges, &mut next)?;
                states[tr.site] = tr.new;
            }
            record(&states, f64::INFINITY, &mut edges, &mut next)?;
            let half = EDGE_SAMPLES / 2;
            Ok(ols_slope(&grid[half..], &edges[half..]))
        })
        .collect();
    let per_replica = slopes.into_iter().collect::<Result<Vec<f64>>>()?;
    let est = Estimate::from_samples(&per_replica);
    Ok(SpeedEstimate {
        alpha: est.mean,
        half_width: est.half_width,
        std_err: est.std_err,
        per_replica,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substructure::Mark;

    fn scripted(n: usize, marks: &[(Mark, f64)]) -> Substructure {
        let g = Graph::path(n).unwrap();
        Substructure::scripted(&g, Intensities::default(), 1.0, 0, marks).unwrap()
    }

    #[test]
    fn all_zero_is_absorbing() {
        let g = Graph::path(6).unwrap();
        for p in [
            Process::contact(2.0).unwrap(),
            Process::seis(2.0, 0.5).unwrap(),
            Process::upper(2.0, 0.5).unwrap(),
            Process::limit(2.0).unwrap(),
        ] {
            let sub = Substructure::generate(&g, p.intensities(), 10.0, 1).unwrap();
            let eta = Configuration::zeros(p.model, 6);
            let tr = evolve(&p, &eta, &sub, 10.0).unwrap();
            assert!(tr.transitions.is_empty());
            assert_eq!(tr.final_state, eta);
        }
    }

    #[test]
    fn seis_hand_trace() {
        let sub = scripted(
            2,
            &[
                (Mark::Transmission(0, 1), 0.3),
                (Mark::Onset(1), 0.5),
                (Mark::Recovery(0), 0.7),
            ],
        );
        let p = Process::seis(1.0, 1.0).unwrap();
        let eta0 = Configuration::new(Model::Seis, vec![2, 0]).unwrap();
        let tr = evolve(&p, &eta0, &sub, 0.9).unwrap();
        assert_eq!(tr.final_state.states(), &[0, 2]);
        assert_eq!(tr.transitions.len(), 3);
        assert_eq!((tr.transitions[0].site, tr.transitions[0].old, tr.transitions[0].new), (1, 0, 1));
        assert!(tr.replay_is_consistent());
        assert_eq!(tr.state_at(0.6).states(), &[2, 2]);
    }

    #[test]
    fn two_stage_recovery_kills_exposed() {
        let sub = scripted(
            2,
            &[
                (Mark::Transmission(0, 1), 0.3),
                (Mark::Recovery(1), 0.4),
                (Mark::Onset(1), 0.5),
                (Mark::Recovery(0), 0.7),
            ],
        );
        let p = Process::two_stage(1.0, 1.0).unwrap();
        let eta0 = Configuration::new(Model::TwoStage, vec![2, 0]).unwrap();
        let tr = evolve(&p, &eta0, &sub, 0.9).unwrap();
        assert_eq!(tr.final_state.states(), &[0, 0]);
        // the same labels under SEIS leave site 1 infectious
        let seis = Process::seis(1.0, 1.0).unwrap();
        let eta0 = Configuration::new(Model::Seis, vec![2, 0]).unwrap();
        assert_eq!(evolve(&seis, &eta0, &sub, 0.9).unwrap().final_state.states(), &[0, 2]);
    }

    #[test]
    fn upper_type_three_rules() {
        let sub = scripted(
            3,
            &[
                (Mark::Transmission(0, 1), 0.1),
                (Mark::Recovery(1), 0.2),
                (Mark::Transmission(0, 1), 0.3),
                (Mark::Onset(1), 0.4),
                (Mark::Transmission(1, 2), 0.5),
                (Mark::Transmission(0, 1), 0.6),
                (Mark::Recovery(1), 0.65),
                (Mark::Transmission(1, 2), 0.7),
            ],
        );
        let p = Process::upper(1.0, 1.0).unwrap();
        let eta0 = Configuration::new(Model::Upper, vec![2, 2, 0]).unwrap();
        let tr = evolve(&p, &eta0, &sub, 0.9).unwrap();
        let at = |t: f64| tr.state_at(t).states().to_vec();
        assert_eq!(at(0.15), vec![2, 3, 0]); // 2 -> 3 on transmission
        assert_eq!(at(0.25), vec![2, 1, 0]); // × knocks out the solid line
        assert_eq!(at(0.35), vec![2, 1, 0]); // 1 stays 1
        assert_eq!(at(0.45), vec![2, 2, 0]); // ★ 1 -> 2
        assert_eq!(at(0.55), vec![2, 2, 1]);
        assert_eq!(at(0.62), vec![2, 3, 1]);
        assert_eq!(at(0.66), vec![2, 1, 1]);
        // type 1 does not transmit
        assert_eq!(at(0.8), vec![2, 1, 1]);
        assert!(tr.replay_is_consistent());
    }

    #[test]
    fn contact_ignores_onset_and_infects_directly() {
        let sub = scripted(2, &[(Mark::Onset(0), 0.1), (Mark::Transmission(0, 1), 0.2)]);
        let p = Process::contact(1.0).unwrap();
        let eta0 = Configuration::new(Model::Contact, vec![2, 0]).unwrap();
        let tr = evolve(&p, &eta0, &sub, 0.5).unwrap();
        assert_eq!(tr.final_state.states(), &[2, 2]);
        assert_eq!(tr.transitions.len(), 1);
    }

    #[test]
    fn evolve_errors() {
        let sub = scripted(2, &[]);
        let p = Process::seis(1.0, 1.0).unwrap();
        let good = Configuration::new(Model::Seis, vec![2, 0]).unwrap();
        assert!(matches!(evolve(&p, &good, &sub, 2.0), Err(Error::Range(_))));
        let wrong_model = Configuration::new(Model::Upper, vec![3, 0]).unwrap();
        assert!(evolve(&p, &wrong_model, &sub, 0.5).is_err());
        let wrong_len = Configuration::new(Model::Seis, vec![2, 0, 0]).unwrap();
        assert!(evolve(&p, &wrong_len, &sub, 0.5).is_err());
    }

    #[test]
    fn process_validation() {
        assert!(Process::seis(1.0, 0.0).is_err());
        assert!(Process::upper(1.0, -2.0).is_err());
        assert!(Process::contact(-1.0).is_err());
        assert!(Process::limit(0.0).is_err());
        assert_eq!(Process::contact(1.0).unwrap().tau, 0.0);
    }

    #[test]
    fn seis_rate_map_single_infectious() {
        let g = Graph::path(3).unwrap();
        let p = Process::seis(1.7, 0.5).unwrap();
        let eta = Configuration::new(Model::Seis, vec![0, 2, 0]).unwrap();
        let m = rate_map(&p, &eta, &g).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m[&(1, 0)], 1.0);
        assert_eq!(m[&(0, 1)], 1.7);
        assert_eq!(m[&(2, 1)], 1.7);
    }

    #[test]
    fn two_stage_rate_map_single_exposed() {
        let g = Graph::path(3).unwrap();
        let p = Process::two_stage(1.7, 0.25).unwrap();
        let eta = Configuration::new(Model::TwoStage, vec![0, 1, 0]).unwrap();
        let m = rate_map(&p, &eta, &g).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[&(1, 2)], 4.0);
        assert_eq!(m[&(1, 0)], 1.0);
    }

    #[test]
    fn upper_rate_map_single_type_three() {
        let g = Graph::path(3).unwrap();
        let p = Process::upper(1.3, 0.5).unwrap();
        let eta = Configuration::new(Model::Upper, vec![0, 3, 0]).unwrap();
        let m = rate_map(&p, &eta, &g).unwrap();
        assert_eq!(m[&(1, 2)], 2.0);
        assert_eq!(m[&(1, 1)], 1.0);
        assert_eq!(m[&(0, 1)], 1.3);
        assert_eq!(m[&(2, 1)], 1.3);
        assert_eq!(m.len(), 4);
    }

    #[test]
    fn limit_rate_map_marginals() {
        let g = Graph::path(3).unwrap();
        let p = Process::limit(2.0).unwrap();
        let eta = Configuration::new(Model::Limit, vec![0, 1, 0]).unwrap();
        let m = rate_map(&p, &eta, &g).unwrap();
        assert!((m[&(1, 0)] - 1.0).abs() < 1e-12);
        assert!((m[&(0, 1)] - 2.0 / 3.0).abs() < 1e-12);
        assert!((m[&(2, 1)] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn jump_rates_bounded_by_total_intensity() {
        let g = Graph::path(5).unwrap();
        let p = Process::upper(1.5, 0.4).unwrap();
        let eta = [3u8, 2, 1, 0, 3];
        let total: f64 = jumps(&p, &g, &eta).iter().map(|j| j.rate).sum();
        assert!(total <= p.intensities().total(&g) + 1e-12);
    }

    #[test]
    fn pmf_examples() {
        let p = dispersal_pmf(3.0, 0).unwrap();
        assert_eq!(p.probs, vec![1.0]);
        let p = dispersal_pmf(1.0, 2).unwrap();
        let expect = [1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0];
        for (a, b) in p.probs.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        for lambda in [0.01, 0.5, 1.0, 3.7, 50.0] {
            for k in 0..6 {
                let s: f64 = dispersal_pmf(lambda, k).unwrap().probs.iter().sum();
                assert!((s - 1.0).abs() < 1e-12, "lambda {lambda} k {k}: {s}");
            }
        }
        assert!(dispersal_pmf(0.0, 2).is_err());
        assert!(dispersal_pmf(-1.0, 2).is_err());
    }

    #[test]
    fn sample_dispersal_degenerate_and_replay() {
        use rand::SeedableRng;
        let p = dispersal_pmf(2.0, 0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        assert!((0..100).all(|_| sample_dispersal(&p, &mut rng) == 0));
        let p = dispersal_pmf(1.0, 2).unwrap();
        let a: Vec<_> = {
            let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(9);
            (0..50).map(|_| sample_dispersal(&p, &mut r)).collect()
        };
        let b: Vec<_> = {
            let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(9);
            (0..50).map(|_| sample_dispersal(&p, &mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn race_is_nested_in_lambda() {
        let u = [0.3, 0.6, 0.1];
        let lo = race_dispersal(0.5, 2, &u);
        let hi = race_dispersal(5.0, 2, &u);
        assert_eq!(lo & hi, lo);
    }

    #[test]
    fn limit_evolve_vacates_and_disperses() {
        let g = Graph::path(5).unwrap();
        let p = Process::limit(1.0).unwrap();
        let sub = Substructure::generate(&g, p.intensities(), 20.0, 5).unwrap();
        let eta0 = Configuration::new(Model::Limit, vec![0, 0, 1, 0, 0]).unwrap();
        let tr = evolve(&p, &eta0, &sub, 20.0).unwrap();
        assert!(tr.replay_is_consistent());
        // every jump begins with a vacating site
        let mut last = f64::NEG_INFINITY;
        for t in &tr.transitions {
            if t.time != last {
                assert_eq!((t.old, t.new), (1, 0));
                last = t.time;
            } else {
                assert_eq!((t.old, t.new), (0, 1));
            }
        }
        // deterministic replay
        assert_eq!(evolve(&p, &eta0, &sub, 20.0).unwrap(), tr);
    }

    #[test]
    fn evolve_between_matches_split_evolution() {
        let g = Graph::path(6).unwrap();
        for p in [Process::seis(1.5, 0.7).unwrap(), Process::limit(2.5).unwrap()] {
            let sub = Substructure::generate(&g, p.intensities(), 8.0, 17).unwrap();
            let mut init = vec![0; 6];
            init[2] = 1;
            init[3] = 1;
            let eta0 = Configuration::new(p.model, init).unwrap();
            let whole = evolve(&p, &eta0, &sub, 8.0).unwrap();
            let first = evolve(&p, &eta0, &sub, 3.0).unwrap();
            let second = evolve_between(&p, &first.final_state, &sub, 3.0, 8.0).unwrap();
            assert_eq!(second.final_state, whole.final_state);
        }
    }

    #[test]
    fn trajectory_csv_has_header_and_rows() {
        let sub = scripted(2, &[(Mark::Recovery(0), 0.5)]);
        let p = Process::contact(1.0).unwrap();
        let eta0 = Configuration::new(Model::Contact, vec![2, 0]).unwrap();
        let csv = evolve(&p, &eta0, &sub, 1.0).unwrap().to_csv();
        assert_eq!(csv, "time,site,old,new\n0.5,0,2,0\n");
    }
}
