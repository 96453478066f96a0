//! Block certificates: the law at time `T` of a process restricted to the
//! sites `0..=J` of a block, computed by uniformization, and the worst-case
//! probability of the block crossing event.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::dynamics::{evolve, jumps, Process};
use crate::lattice::{Configuration, Graph, Model};
use crate::stats::{replica_seed, Estimate};
use crate::substructure::Substructure;
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.819;
pub const DEFAULT_BUDGET: f64 = 650.0;
pub const MAX_STATES: usize = 1_000_000;

/// Block `[0, J] x [0, T]`, shifted by `K` sites between rows, with
/// `j = J - K + 1` overlap sites of which `i` must be active.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockGeometry {
    pub width: usize,
    pub shift: usize,
    pub overlap: usize,
    pub required: usize,
    /// Expected number of labels in the block; sets `T = budget / gamma`.
    pub budget: f64,
    /// Explicit block duration, overriding the budget.
    pub duration: Option<f64>,
}

impl BlockGeometry {
    pub fn new(width: usize, shift: usize, required: usize, budget: f64) -> Result<Self> {
        if !(shift <= width && width < 2 * shift) {
            return Err(Error::param("K", format!("need K <= J < 2K, got J={width}, K={shift}")));
        }
        let overlap = width - shift + 1;
        if !(required >= 1 && required <= overlap) {
            return Err(Error::param("i", format!("need 1 <= i <= j = {overlap}, got {required}")));
        }
        if !(budget > 0.0) || !budget.is_finite() {
            return Err(Error::param("budget", format!("must be > 0, got {budget}")));
        }
        Ok(BlockGeometry {
            width,
            shift,
            overlap,
            required,
            budget,
            duration: None,
        })
    }

    /// Geometry fixed by `J` and the overlap `j`, with `K = J - j + 1`.
    pub fn from_overlap(width: usize, overlap: usize, required: usize, budget: f64) -> Result<Self> {
        if overlap == 0 || overlap > width {
            return Err(Error::param("j", format!("need 1 <= j <= J, got j={overlap}, J={width}")));
        }
        Self::new(width, width - overlap + 1, required, budget)
    }

    pub fn with_duration(mut self, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::param("T", format!("must be > 0, got {t}")));
        }
        self.duration = Some(t);
        Ok(self)
    }

    pub fn sites(&self) -> usize {
        self.width + 1
    }

    /// At least `i` active among the leftmost `j` sites and among the
    /// rightmost `j` sites.
    pub fn event(&self, states: &[u8]) -> bool {
        let s = self.sites();
        let j = self.overlap;
        let left = states[..j].iter().filter(|&&c| c != 0).count();
        let right = states[s - j..].iter().filter(|&&c| c != 0).count();
        left >= self.required && right >= self.required
    }

    /// Every choice of `i` sites among the leftmost `j`.
    pub fn left_seeds(&self) -> Vec<Vec<usize>> {
        combinations(self.overlap, self.required)
    }

    /// Mirror images of [`Self::left_seeds`].
    pub fn right_seeds(&self) -> Vec<Vec<usize>> {
        self.left_seeds()
            .into_iter()
            .map(|c| c.into_iter().rev().map(|x| self.width - x).collect())
            .collect()
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for x in start..n {
            cur.push(x);
            rec(x + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

fn check_kind(process: &Process) -> Result<()> {
    match process.model {
        Model::TwoStage | Model::Limit => Ok(()),
        other => Err(Error::Unsupported(format!(
            "block certificates need two-stage or limit, got {other}"
        ))),
    }
}

/// Weakest active type, used for the designated seed sites.
pub fn weakest_active(model: Model) -> u8 {
    match model {
        Model::Contact => 2,
        _ => 1,
    }
}

/// One-step matrix `P = I + Q / gamma` of the block process, stored by row.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformizedChain {
    pub process: Process,
    pub sites: usize,
    pub gamma: f64,
    /// Off-diagonal entries of each row.
    pub rows: Vec<Vec<(u32, f64)>>,
    pub diagonal: Vec<f64>,
}

impl UniformizedChain {
    pub fn len(&self) -> usize {
        self.diagonal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonal.is_empty()
    }

    pub fn encode(&self, states: &[u8]) -> usize {
        encode(self.process.model, states)
    }

    pub fn decode(&self, code: usize) -> Vec<u8> {
        decode(self.process.model, self.sites, code)
    }

    /// `v P`.
    pub fn step(&self, v: &[f64], out: &mut [f64]) {
        for (o, (&x, &d)) in out.iter_mut().zip(v.iter().zip(&self.diagonal)) {
            *o = x * d;
        }
        for (i, row) in self.rows.iter().enumerate() {
            let x = v[i];
            if x == 0.0 {
                continue;
            }
            for &(j, p) in row {
                out[j as usize] += x * p;
            }
        }
    }
}

fn encode(model: Model, states: &[u8]) -> usize {
    let alphabet = model.alphabet();
    let b = alphabet.len();
    states.iter().rev().fold(0, |acc, &c| {
        acc * b + alphabet.iter().position(|&a| a == c).expect("code in alphabet")
    })
}

fn decode(model: Model, sites: usize, mut code: usize) -> Vec<u8> {
    let alphabet = model.alphabet();
    let b = alphabet.len();
    (0..sites)
        .map(|_| {
            let c = alphabet[code % b];
            code /= b;
            c
        })
        .collect()
}

pub fn uniformized_chain(process: &Process, sites: usize) -> Result<UniformizedChain> {
    check_kind(process)?;
    let graph = Graph::path(sites)?;
    let b = process.model.alphabet().len();
    let n = u32::try_from(sites)
        .ok()
        .and_then(|s| b.checked_pow(s))
        .filter(|&n| n <= MAX_STATES)
        .ok_or(Error::Memory {
            states: b.checked_pow(sites as u32).unwrap_or(usize::MAX),
            limit: MAX_STATES,
        })?;
    let gamma = process.intensities().total(&graph);
    if !(gamma > 0.0) {
        return Err(Error::param("gamma", "total label intensity is zero"));
    }
    let model = process.model;
    let built: Vec<(Vec<(u32, f64)>, f64)> = (0..n)
        .into_par_iter()
        .map(|code| {
            let states = decode(model, sites, code);
            let mut row: Vec<(u32, f64)> = Vec::new();
            let mut next = states.clone();
            for jump in jumps(process, &graph, &states) {
                for &(site, new) in &jump.changes {
                    next[site] = new;
                }
                row.push((encode(model, &next) as u32, jump.rate / gamma));
                next.copy_from_slice(&states);
            }
            row.sort_by_key(|e| e.0);
            row.dedup_by(|a, b| {
                if a.0 == b.0 {
                    b.1 += a.1;
                    true
                } else {
                    false
                }
            });
            let off: f64 = row.iter().map(|e| e.1).sum();
            (row, 1.0 - off)
        })
        .collect();
    let (rows, diagonal) = built.into_iter().unzip();
    Ok(UniformizedChain {
        process: *process,
        sites,
        gamma,
        rows,
        diagonal,
    })
}

/// Default truncation `ceil(gT + 10 sqrt(gT))`.
pub fn default_terms(gamma_t: f64) -> usize {
    (gamma_t + 10.0 * gamma_t.sqrt()).ceil() as usize
}

/// Poisson(`mean`) weights for `0..=n` and the mass beyond `n`.
pub fn poisson_weights(mean: f64, n: usize) -> (Vec<f64>, f64) {
    let ln_mean = mean.ln();
    let mut log_w = -mean;
    let mut weights = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if k > 0 {
            log_w += ln_mean - (k as f64).ln();
        }
        weights.push(if mean == 0.0 { if k == 0 { 1.0 } else { 0.0 } } else { log_w.exp() });
    }
    let mut tail = 0.0;
    if mean > 0.0 {
        let mut k = n + 1;
        loop {
            log_w += ln_mean - (k as f64).ln();
            let w = log_w.exp();
            tail += w;
            if k as f64 > mean && (w == 0.0 || w < 1e-18 * tail) {
                break;
            }
            k += 1;
        }
    }
    (weights, tail)
}

/// `sum_{k=0}^{N} e^{-gT} (gT)^k / k! v0 P^k`, a sub-probability vector
/// bounded above by the law at time `T`, together with the neglected
/// Poisson tail.
pub fn poisson_time_t(chain: &UniformizedChain, t: f64, v0: &[f64], terms: usize) -> Result<(Vec<f64>, f64)> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param("T", format!("must be >= 0, got {t}")));
    }
    if v0.len() != chain.len() {
        return Err(Error::param("v0", "length differs from the state count"));
    }
    let (weights, tail) = poisson_weights(chain.gamma * t, terms);
    let mut v = v0.to_vec();
    let mut next = vec![0.0; v.len()];
    let mut acc = vec![0.0; v.len()];
    for (k, &w) in weights.iter().enumerate() {
        for (a, &x) in acc.iter_mut().zip(&v) {
            *a += w * x;
        }
        if k < terms {
            chain.step(&v, &mut next);
            std::mem::swap(&mut v, &mut next);
        }
    }
    Ok((acc, tail))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub sites: Vec<usize>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertResult {
    pub process: Process,
    pub geometry: BlockGeometry,
    pub gamma: f64,
    pub duration: f64,
    pub terms: usize,
    pub deficiency: f64,
    pub left: Vec<SeedResult>,
    pub right: Vec<SeedResult>,
    pub min_prob: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CertResult {
    pub fn left_min(&self) -> f64 {
        self.left.iter().map(|s| s.prob).fold(f64::INFINITY, f64::min)
    }

    pub fn right_min(&self) -> f64 {
        self.right.iter().map(|s| s.prob).fold(f64::INFINITY, f64::min)
    }

    pub fn to_text(&self) -> String {
        let g = &self.geometry;
        let mut s = String::new();
        let _ = writeln!(s, "process      {}", self.process.model);
        let _ = writeln!(s, "lambda       {}", self.process.lambda);
        if matches!(self.process.model, Model::TwoStage) {
            let _ = writeln!(s, "tau          {}", self.process.tau);
        }
        let _ = writeln!(s, "J K j i      {} {} {} {}", g.width, g.shift, g.overlap, g.required);
        let _ = writeln!(s, "gamma        {}", self.gamma);
        let _ = writeln!(s, "T            {}", self.duration);
        let _ = writeln!(s, "N            {}", self.terms);
        let _ = writeln!(s, "deficiency   {:e}", self.deficiency);
        for (flank, seeds) in [("left", &self.left), ("right", &self.right)] {
            for seed in seeds {
                let _ = writeln!(s, "{flank:<6} {:?} {:.6}", seed.sites, seed.prob);
            }
        }
        let _ = writeln!(s, "min          {:.6}", self.min_prob);
        let _ = writeln!(s, "threshold    {}", self.threshold);
        let _ = writeln!(s, "result       {}", if self.pass { "PASS" } else { "FAIL" });
        s
    }

    /// `flank,sites,probability` rows preceded by a `#` metadata line.
    pub fn to_csv(&self) -> String {
        let g = &self.geometry;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# process={} lambda={} tau={} J={} K={} j={} i={} gamma={} T={} N={} deficiency={:e} min={} threshold={} pass={}",
            self.process.model,
            self.process.lambda,
            self.process.tau,
            g.width,
            g.shift,
            g.overlap,
            g.required,
            self.gamma,
            self.duration,
            self.terms,
            self.deficiency,
            self.min_prob,
            self.threshold,
            self.pass
        );
        s.push_str("flank,sites,probability\n");
        for (flank, seeds) in [("left", &self.left), ("right", &self.right)] {
            for seed in seeds {
                let sites: Vec<String> = seed.sites.iter().map(|x| x.to_string()).collect();
                let _ = writeln!(s, "{flank},{},{:?}", sites.join(" "), seed.prob);
            }
        }
        s
    }
}

fn seeded(model: Model, sites: usize, seed: &[usize]) -> Vec<u8> {
    let mut states = vec![0u8; sites];
    for &x in seed {
        states[x] = weakest_active(model);
    }
    states
}

/// Probability of the crossing event at time `T` from each minimal good
/// configuration (and its mirror image), minimized.
pub fn certify_block(process: &Process, geometry: &BlockGeometry, threshold: f64) -> Result<CertResult> {
    check_kind(process)?;
    let chain = uniformized_chain(process, geometry.sites())?;
    certify_with_chain(&chain, geometry, threshold)
}

pub fn certify_with_chain(chain: &UniformizedChain, geometry: &BlockGeometry, threshold: f64) -> Result<CertResult> {
    if chain.sites != geometry.sites() {
        return Err(Error::param("geometry", "chain and geometry sizes differ"));
    }
    let duration = geometry.duration.unwrap_or(geometry.budget / chain.gamma);
    let terms = default_terms(chain.gamma * duration);
    let event: Vec<bool> = (0..chain.len()).map(|c| geometry.event(&chain.decode(c))).collect();
    let model = chain.process.model;
    let run = |seeds: Vec<Vec<usize>>| -> Result<(Vec<SeedResult>, f64)> {
        let out = seeds
            .into_par_iter()
            .map(|sites| {
                let mut v0 = vec![0.0; chain.len()];
                v0[chain.encode(&seeded(model, chain.sites, &sites))] = 1.0;
                let (v, tail) = poisson_time_t(chain, duration, &v0, terms)?;
                let prob = v.iter().zip(&event).filter(|(_, &e)| e).map(|(x, _)| x).sum();
                Ok((SeedResult { sites, prob }, tail))
            })
            .collect::<Result<Vec<_>>>()?;
        let tail = out.first().map_or(0.0, |o| o.1);
        Ok((out.into_iter().map(|o| o.0).collect(), tail))
    };
    let (left, deficiency) = run(geometry.left_seeds())?;
    let (right, _) = run(geometry.right_seeds())?;
    let min_prob = left
        .iter()
        .chain(&right)
        .map(|s| s.prob)
        .fold(f64::INFINITY, f64::min);
    Ok(CertResult {
        process: chain.process,
        geometry: *geometry,
        gamma: chain.gamma,
        duration,
        terms,
        deficiency,
        left,
        right,
        min_prob,
        threshold,
        pass: min_prob >= threshold,
    })
}

/// Monte Carlo estimate of the crossing event at time `t` for the block
/// process started from `init`.
pub fn simulate_block(
    process: &Process,
    geometry: &BlockGeometry,
    init: &[u8],
    t: f64,
    replicas: usize,
    seed: u64,
) -> Result<Estimate> {
    let graph = Graph::path(geometry.sites())?;
    let eta0 = Configuration::new(process.model, init.to_vec())?;
    let hits = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<bool> {
            let sub = Substructure::generate(&graph, process.intensities(), t, replica_seed(seed, r as u64))?;
            let traj = evolve(process, &eta0, &sub, t)?;
            Ok(geometry.event(traj.final_state.states()))
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(Estimate::proportion(hits.iter().filter(|&&h| h).count(), replicas))
}
