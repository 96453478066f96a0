//! SEIS with time sped up by `tau` (recovery rate `tau`, onset rate 1,
//! transmission rate `lambda * tau`) coupled to the limit process: each
//! onset at `x` at time `t` becomes a limit jump at `t` whose dispersal set
//! is the neighbors `x` transmits to before its next recovery `s`. The
//! coupling breaks down (a discrepancy) when another onset happens before
//! `s`.

use std::fmt::Write as _;

use crate::dynamics::{evolve, evolve_between, Process, Trajectory, Transition};
use crate::lattice::{Configuration, Graph, Model};
use crate::substructure::{Fiber, Intensities, LabelKind, Region, Substructure};
use crate::{Error, Result};

const INDEPENDENT_SALT: u64 = 0x5EED_1D3A_C0FF_EE00;
/// Sample points of the agreement grid.
pub const GRID: usize = 1000;
/// Extra horizon, in mean recovery times, for resolving late recoveries.
const TAIL_RECOVERIES: f64 = 50.0;

/// Every `★` in the region is followed by a `×` at its own site before the
/// next `★` anywhere in the region.
pub fn onset_ordered(sub: &Substructure, region: &Region) -> Result<bool> {
    let mut pending: Option<usize> = None;
    for label in sub.restrict(region)? {
        match label.kind() {
            LabelKind::Recovery if pending == Some(label.site) => pending = None,
            LabelKind::Onset => {
                if pending.is_some() {
                    return Ok(false);
                }
                pending = Some(label.site);
            }
            _ => {}
        }
    }
    Ok(true)
}

/// A limit-process jump read off one SEIS onset.
#[derive(Debug, Clone, PartialEq)]
pub struct Onset {
    pub time: f64,
    pub site: usize,
    /// First recovery label at `site` after `time`; infinite if none
    /// within the substructure.
    pub recovery: f64,
    /// Bit `j` set iff a transmission to the `j`-th neighbor occurs in
    /// `(time, recovery)`.
    pub dispersal: usize,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingReport {
    pub lambda: f64,
    pub tau: f64,
    pub horizon: f64,
    pub seed: u64,
    pub discrepancy: bool,
    pub first_discrepancy: Option<f64>,
    /// Times at which agreement was checked, with the outcome; times in
    /// `S` or after the first discrepancy are skipped.
    pub agreement: Vec<(f64, bool)>,
    pub lebesgue_s: f64,
    /// Largest number of simultaneously infectious sites.
    pub max_infectious: usize,
    /// Onsets before the first discrepancy (and the discrepant one).
    pub onsets: Vec<Onset>,
    pub seis: Trajectory,
    pub limit: Trajectory,
}

impl CouplingReport {
    pub fn agrees(&self) -> bool {
        self.agreement.iter().all(|&(_, ok)| ok)
    }

    pub const CSV_HEADER: &'static str = "tau,seed,discrepancy,first_time,lebesgue_S";

    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        let first = self.first_discrepancy.map(|t| format!("{t:?}")).unwrap_or_default();
        let _ = write!(
            s,
            "{},{},{},{},{:?}",
            self.tau, self.seed, self.discrepancy as u8, first, self.lebesgue_s
        );
        s
    }
}

/// The substructure `run_coupled` draws for these arguments. It extends past
/// `horizon` so that recoveries of late onsets are resolved.
pub fn coupling_substructure(lambda: f64, tau: f64, graph: &Graph, horizon: f64, seed: u64) -> Result<Substructure> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::param("tau", format!("must be > 0, got {tau}")));
    }
    let intensities = Intensities::new(tau, 1.0, lambda * tau);
    Substructure::generate(graph, intensities, horizon + TAIL_RECOVERIES / tau, seed)
}

fn first_after(times: &[f64], t: f64) -> f64 {
    let k = times.partition_point(|&x| x <= t);
    times.get(k).copied().unwrap_or(f64::INFINITY)
}

/// Runs the rescaled SEIS process from `eta0` up to `horizon` and the limit
/// process induced from it.
pub fn run_coupled(
    lambda: f64,
    tau: f64,
    graph: &Graph,
    eta0: &Configuration,
    horizon: f64,
    seed: u64,
) -> Result<CouplingReport> {
    let seis = Process::seis(lambda * tau, 1.0)?;
    let limit = Process::limit(lambda)?;
    if eta0.model() != Model::Seis {
        return Err(Error::param("eta0", "must be an SEIS configuration"));
    }
    if let Some(x) = eta0.states().iter().position(|&c| c == 2) {
        return Err(Error::param("eta0", format!("site {x} is infectious; start from exposed sites only")));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::param("T", format!("must be > 0, got {horizon}")));
    }
    let sub = coupling_substructure(lambda, tau, graph, horizon, seed)?;
    let eta = evolve(&seis, eta0, &sub, horizon)?;

    // S and the infectious count
    let mut infectious = 0usize;
    let mut max_infectious = 0usize;
    let mut lebesgue_s = 0.0;
    let mut since = 0.0;
    for tr in &eta.transitions {
        let before = infectious;
        if tr.new == 2 {
            infectious += 1;
        }
        if tr.old == 2 {
            infectious -= 1;
        }
        if before == 0 && infectious > 0 {
            since = tr.time;
        }
        if before > 0 && infectious == 0 {
            lebesgue_s += tr.time - since;
        }
        max_infectious = max_infectious.max(infectious);
    }
    if infectious > 0 {
        lebesgue_s += horizon - since;
    }

    // induced limit jumps
    let zeta_init = Configuration::new(Model::Limit, eta0.states().to_vec())?;
    let mut zeta_states = zeta_init.states().to_vec();
    let mut zeta_transitions = Vec::new();
    let mut onsets = Vec::new();
    let onset_times: Vec<(f64, usize)> = eta
        .transitions
        .iter()
        .filter(|tr| tr.old == 1 && tr.new == 2)
        .map(|tr| (tr.time, tr.site))
        .collect();
    let mut first_discrepancy = None;
    for (k, &(t, x)) in onset_times.iter().enumerate() {
        let s = first_after(sub.fiber_times(Fiber::recovery(x)), t);
        let mut dispersal = 0;
        for (j, &y) in graph.neighbors(x).iter().enumerate() {
            let e = sub.edge_index(x, y).expect("adjacent");
            if first_after(sub.fiber_times(Fiber::transmission(e)), t) < s {
                dispersal |= 1 << j;
            }
        }
        onsets.push(Onset {
            time: t,
            site: x,
            recovery: s,
            dispersal,
            degree: graph.degree(x),
        });
        debug_assert_eq!(zeta_states[x], 1);
        zeta_states[x] = 0;
        zeta_transitions.push(Transition {
            time: t,
            site: x,
            old: 1,
            new: 0,
        });
        for (j, &y) in graph.neighbors(x).iter().enumerate() {
            if dispersal & (1 << j) != 0 && zeta_states[y] == 0 {
                zeta_states[y] = 1;
                zeta_transitions.push(Transition {
                    time: t,
                    site: y,
                    old: 0,
                    new: 1,
                });
            }
        }
        if let Some(&(next, _)) = onset_times.get(k + 1) {
            if next < s {
                first_discrepancy = Some(next);
                break;
            }
        }
    }
    let mut zeta = Trajectory {
        initial: zeta_init,
        transitions: zeta_transitions,
        final_state: Configuration::new(Model::Limit, zeta_states)?,
        t_start: 0.0,
        t_end: horizon,
    };
    if let Some(t) = first_discrepancy {
        let fresh = Substructure::generate(graph, limit.intensities(), horizon, seed ^ INDEPENDENT_SALT)?;
        let rest = evolve_between(&limit, &zeta.final_state, &fresh, t, horizon)?;
        zeta.transitions.extend(rest.transitions);
        zeta.final_state = rest.final_state;
    }

    // agreement outside S, up to the first discrepancy
    let stop = first_discrepancy.unwrap_or(f64::INFINITY);
    let mut times: Vec<f64> = (1..=GRID).map(|k| horizon * k as f64 / GRID as f64).collect();
    times.extend(eta.transitions.iter().map(|t| t.time));
    times.extend(zeta.transitions.iter().map(|t| t.time));
    times.retain(|&t| t < stop && t <= horizon);
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut agreement = Vec::with_capacity(times.len());
    let (mut a, mut b) = (eta.initial.states().to_vec(), zeta.initial.states().to_vec());
    let (mut ia, mut ib) = (0, 0);
    for &t in &times {
        while ia < eta.transitions.len() && eta.transitions[ia].time <= t {
            a[eta.transitions[ia].site] = eta.transitions[ia].new;
            ia += 1;
        }
        while ib < zeta.transitions.len() && zeta.transitions[ib].time <= t {
            b[zeta.transitions[ib].site] = zeta.transitions[ib].new;
            ib += 1;
        }
        if a.contains(&2) {
            continue;
        }
        agreement.push((t, a == b));
    }

    Ok(CouplingReport {
        lambda,
        tau,
        horizon,
        seed,
        discrepancy: first_discrepancy.is_some(),
        first_discrepancy,
        agreement,
        lebesgue_s,
        max_infectious,
        onsets,
        seis: eta,
        limit: zeta,
    })
}
