//! Edge (window) process: the configuration seen from the leftmost active
//! site, `m + 1` sites wide, with every site beyond the window frozen at the
//! boundary type. Its embedded jump chain, invariant measure and mean left
//! edge increment give the lower bounds `lambda_m`.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{jumps, Process};
use crate::lattice::{Graph, Model};
use crate::{Error, Result};

/// Largest state count accepted by the dense solver.
pub const MAX_STATES: usize = 4096;

/// Type of every site to the right of the window.
pub fn boundary_type(model: Model) -> Result<u8> {
    match model {
        Model::Upper => Ok(3),
        Model::Contact => Ok(2),
        Model::Limit => Ok(1),
        other => Err(Error::param(
            "process",
            format!("the edge chain needs a monotone process (upper, contact, limit), got {other}"),
        )),
    }
}

fn state_count(model: Model, m: usize) -> Result<usize> {
    let b = model.alphabet().len();
    let count = u32::try_from(m)
        .ok()
        .and_then(|m| b.checked_pow(m))
        .and_then(|p| p.checked_mul(b - 1))
        .ok_or(Error::Memory {
            states: usize::MAX,
            limit: MAX_STATES,
        })?;
    Ok(count)
}

/// All windows of length `m + 1` over the process alphabet with site 0
/// active, in increasing base-`|alphabet|` order (site 0 most significant).
pub fn enumerate_states(model: Model, m: usize) -> Result<Vec<Vec<u8>>> {
    boundary_type(model)?;
    let count = state_count(model, m)?;
    if count > MAX_STATES {
        return Err(Error::Memory {
            states: count,
            limit: MAX_STATES,
        });
    }
    let alphabet = model.alphabet();
    let b = alphabet.len();
    let offset = b.pow(m as u32);
    Ok((offset..offset + count)
        .map(|mut code| {
            let mut w = vec![0u8; m + 1];
            for slot in w.iter_mut().rev() {
                *slot = alphabet[code % b];
                code /= b;
            }
            w
        })
        .collect())
}

fn state_index(model: Model, window: &[u8]) -> usize {
    let alphabet = model.alphabet();
    let b = alphabet.len();
    let mut code = 0;
    for &c in window {
        let d = alphabet.iter().position(|&a| a == c).expect("code in alphabet");
        code = code * b + d;
    }
    code - b.pow(window.len() as u32 - 1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeTransition {
    pub from: usize,
    pub to: usize,
    /// Ordinal among the transitions leaving `from`.
    pub r: usize,
    pub rate: f64,
    pub prob: f64,
    pub delta: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeChain {
    pub process: Process,
    pub m: usize,
    pub states: Vec<Vec<u8>>,
    /// Grouped by `from`, in state order.
    pub transitions: Vec<EdgeTransition>,
    pub exit_rates: Vec<f64>,
}

/// Builds the embedded jump chain of the window process.
///
/// Each window is embedded in a path of `m + 3` sites: a vacant site to the
/// left, the window, and one boundary site on the right that keeps
/// interacting with the window and is restored after every jump.
pub fn build_edge_chain(process: &Process, m: usize) -> Result<EdgeChain> {
    let model = process.model;
    let boundary = boundary_type(model)?;
    if !(process.lambda > 0.0) {
        return Err(Error::param("lambda", "the edge chain needs lambda > 0"));
    }
    let states = enumerate_states(model, m)?;
    let graph = Graph::path(m + 3)?;
    let mut transitions = Vec::new();
    let mut exit_rates = Vec::with_capacity(states.len());
    let mut ext = vec![0u8; m + 3];
    let mut window = vec![0u8; m + 1];
    for (i, state) in states.iter().enumerate() {
        ext[0] = 0;
        ext[1..=m + 1].copy_from_slice(state);
        ext[m + 2] = boundary;
        let mut merged: BTreeMap<(usize, i64), f64> = BTreeMap::new();
        for jump in jumps(process, &graph, &ext) {
            let mut next = ext.clone();
            for &(site, new) in &jump.changes {
                next[site] = new;
            }
            next[m + 2] = boundary;
            let anchor = next.iter().position(|&c| c != 0).expect("boundary is active");
            for (k, slot) in window.iter_mut().enumerate() {
                *slot = next.get(anchor + k).copied().unwrap_or(boundary);
            }
            let delta = anchor as i64 - 1;
            let j = state_index(model, &window);
            if j == i && delta == 0 {
                continue;
            }
            *merged.entry((j, delta)).or_insert(0.0) += jump.rate;
        }
        let q: f64 = merged.values().sum();
        if !(q > 0.0) {
            return Err(Error::Structural(format!("state {i} has no effective transition")));
        }
        exit_rates.push(q);
        transitions.extend(merged.into_iter().enumerate().map(|(r, ((j, delta), rate))| EdgeTransition {
            from: i,
            to: j,
            r,
            rate,
            prob: rate / q,
            delta,
        }));
    }
    let chain = EdgeChain {
        process: *process,
        m,
        states,
        transitions,
        exit_rates,
    };
    chain.check_irreducible()?;
    Ok(chain)
}

impl EdgeChain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Transitions leaving state `i`.
    pub fn row(&self, i: usize) -> &[EdgeTransition] {
        let lo = self.transitions.partition_point(|t| t.from < i);
        let hi = self.transitions.partition_point(|t| t.from <= i);
        &self.transitions[lo..hi]
    }

    fn check_irreducible(&self) -> Result<()> {
        let n = self.len();
        let full = vec![self.process.model.top(); self.m + 1];
        let root = state_index(self.process.model, &full);
        let mut fwd = vec![Vec::new(); n];
        let mut bwd = vec![Vec::new(); n];
        for t in &self.transitions {
            fwd[t.from].push(t.to);
            bwd[t.to].push(t.from);
        }
        for (adj, dir) in [(&fwd, "reached from"), (&bwd, "able to reach")] {
            let mut seen = vec![false; n];
            seen[root] = true;
            let mut queue = VecDeque::from([root]);
            while let Some(i) = queue.pop_front() {
                for &j in &adj[i] {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            if let Some(bad) = seen.iter().position(|&s| !s) {
                return Err(Error::Structural(format!(
                    "edge chain reducible: state {:?} not {dir} the full state",
                    self.states[bad]
                )));
            }
        }
        Ok(())
    }

    /// `from,to,r,rate,probability,delta` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,j,r,rate,probability,delta\n");
        for t in &self.transitions {
            let _ = writeln!(s, "{},{},{},{:?},{:?},{}", t.from, t.to, t.r, t.rate, t.prob, t.delta);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantMeasure {
    pub probs: Vec<f64>,
    /// Max-norm of `mu P - mu` together with the normalization error.
    pub residual: f64,
}

const RESIDUAL_TOL: f64 = 1e-10;
const POWER_ITERATIONS: usize = 100_000;

fn residual(n: usize, entries: &[(usize, usize, f64)], mu: &[f64]) -> f64 {
    let mut next = vec![0.0; n];
    for &(i, j, p) in entries {
        next[j] += mu[i] * p;
    }
    let balance = next.iter().zip(mu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    balance.max((mu.iter().sum::<f64>() - 1.0).abs())
}

/// Invariant law of the stochastic matrix given by `(i, j, p)` entries
/// (duplicates are summed).
pub fn stationary(n: usize, entries: &[(usize, usize, f64)]) -> Result<InvariantMeasure> {
    if n == 0 {
        return Err(Error::param("n", "empty chain"));
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    for &(i, j, p) in entries {
        a[(j, i)] += p;
    }
    for k in 0..n {
        a[(k, k)] -= 1.0;
    }
    for k in 0..n {
        a[(n - 1, k)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let mut mu: Vec<f64> = match a.lu().solve(&b) {
        Some(x) => x.iter().map(|&v| v.max(0.0)).collect(),
        None => vec![1.0 / n as f64; n],
    };
    let total: f64 = mu.iter().sum();
    if total > 0.0 {
        mu.iter_mut().for_each(|v| *v /= total);
    }
    let mut res = residual(n, entries, &mu);
    if !(res <= RESIDUAL_TOL) {
        // lazy power iteration
        let mut next = vec![0.0; n];
        for _ in 0..POWER_ITERATIONS {
            next.iter_mut().zip(&mu).for_each(|(x, &m)| *x = 0.5 * m);
            for &(i, j, p) in entries {
                next[j] += 0.5 * mu[i] * p;
            }
            std::mem::swap(&mut mu, &mut next);
            res = residual(n, entries, &mu);
            if res <= RESIDUAL_TOL {
                break;
            }
        }
    }
    if !(res <= RESIDUAL_TOL) {
        return Err(Error::Numerical { residual: res });
    }
    Ok(InvariantMeasure { probs: mu, residual: res })
}

pub fn invariant_measure(chain: &EdgeChain) -> Result<InvariantMeasure> {
    let entries: Vec<_> = chain.transitions.iter().map(|t| (t.from, t.to, t.prob)).collect();
    stationary(chain.len(), &entries)
}

/// Mean left-edge increment per jump under `mu`.
pub fn expected_increment(chain: &EdgeChain, mu: &InvariantMeasure) -> f64 {
    chain
        .transitions
        .iter()
        .map(|t| mu.probs[t.from] * t.prob * t.delta as f64)
        .sum()
}

/// `E_mu Delta` for the window process at the given parameters.
pub fn drift(process: &Process, m: usize) -> Result<f64> {
    let chain = build_edge_chain(process, m)?;
    let mu = invariant_measure(&chain)?;
    Ok(expected_increment(&chain, &mu))
}

pub const GRID_POINTS: usize = 50;
pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_BRACKET: (f64, f64) = (0.1, 10.0);

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaRoot {
    pub lambda: f64,
    /// Sign changes seen by the grid pre-scan; above one the largest is used.
    pub sign_changes: usize,
    pub evaluations: usize,
}

/// `sup { lambda : E_mu Delta > 0 }` located by a grid pre-scan of the
/// bracket followed by bisection to `tol`.
pub fn lambda_m(model: Model, m: usize, tau: f64, bracket: (f64, f64), tol: f64) -> Result<LambdaRoot> {
    boundary_type(model)?;
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::param("bracket", format!("need 0 < lo < hi, got [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be > 0"));
    }
    let positive = |lambda: f64| -> Result<bool> { Ok(drift(&Process::new(model, lambda, tau)?, m)? > 0.0) };
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|k| lo + (hi - lo) * k as f64 / (GRID_POINTS - 1) as f64)
        .collect();
    let signs = grid.iter().map(|&l| positive(l)).collect::<Result<Vec<bool>>>()?;
    let changes: Vec<usize> = (0..GRID_POINTS - 1).filter(|&k| signs[k] && !signs[k + 1]).collect();
    let Some(&k) = changes.last() else {
        return Err(Error::NoSignChange { lo, hi });
    };
    let (mut a, mut b) = (grid[k], grid[k + 1]);
    let mut evaluations = GRID_POINTS;
    while b - a > tol {
        let mid = 0.5 * (a + b);
        evaluations += 1;
        if positive(mid)? {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(LambdaRoot {
        lambda: 0.5 * (a + b),
        sign_changes: changes.len(),
        evaluations,
    })
}
