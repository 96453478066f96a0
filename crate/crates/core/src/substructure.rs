//! The graphical representation: independent Poisson label streams on the
//! site fibers (recovery `×`, onset `★`) and on the directed-edge fibers
//! (transmission `→`) of a graph, generated eagerly up to a horizon.
//!
//! Each fiber draws from its own ChaCha stream keyed by `(seed, fiber)`, so
//! the labels inside any region are independent of how or in what order
//! the region is queried.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::lattice::{Graph, GraphKind};
use crate::{Error, Result};

/// Label kinds; the derived order is the tie-break rank `× < ★ < →`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LabelKind {
    Recovery,
    Onset,
    Transmission,
}

impl LabelKind {
    pub fn name(self) -> &'static str {
        match self {
            LabelKind::Recovery => "recovery",
            LabelKind::Onset => "onset",
            LabelKind::Transmission => "transmission",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "recovery" => Some(LabelKind::Recovery),
            "onset" => Some(LabelKind::Onset),
            "transmission" => Some(LabelKind::Transmission),
            _ => None,
        }
    }

    fn rank(self) -> u64 {
        self as u64
    }
}

/// A single Poisson stream: a site fiber for recovery/onset, a directed
/// edge (index into [`Graph::directed_edges`]) for transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fiber {
    pub kind: LabelKind,
    pub index: usize,
}

impl Fiber {
    pub fn recovery(site: usize) -> Self {
        Fiber {
            kind: LabelKind::Recovery,
            index: site,
        }
    }

    pub fn onset(site: usize) -> Self {
        Fiber {
            kind: LabelKind::Onset,
            index: site,
        }
    }

    pub fn transmission(edge: usize) -> Self {
        Fiber {
            kind: LabelKind::Transmission,
            index: edge,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Label {
    pub time: f64,
    pub fiber: Fiber,
    /// Site of a recovery/onset label, source of a transmission.
    pub site: usize,
    /// Equal to `site` except for transmissions.
    pub target: usize,
}

impl Label {
    pub fn kind(&self) -> LabelKind {
        self.fiber.kind
    }

    fn order_key(&self, other: &Label) -> std::cmp::Ordering {
        self.time
            .total_cmp(&other.time)
            .then_with(|| self.fiber.cmp(&other.fiber))
    }
}

/// Label location used when scripting a substructure by hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Recovery(usize),
    Onset(usize),
    Transmission(usize, usize),
}

/// Per-fiber intensities, in events per unit time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Intensities {
    pub recovery: f64,
    pub onset: f64,
    /// Per ordered adjacent pair.
    pub transmission: f64,
}

impl Intensities {
    pub fn new(recovery: f64, onset: f64, transmission: f64) -> Self {
        Intensities {
            recovery,
            onset,
            transmission,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("recovery_rate", self.recovery),
            ("onset_rate", self.onset),
            ("transmission_rate", self.transmission),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::param(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Total label intensity over every fiber of `graph`.
    pub fn total(&self, graph: &Graph) -> f64 {
        graph.n() as f64 * (self.recovery + self.onset)
            + 2.0 * graph.edge_count() as f64 * self.transmission
    }
}

const TAG_BASE: u64 = 0;
const TAG_COUPLING: u64 = 1;
const TAG_DISPERSAL: u64 = 2;
/// Maximum number of uniforms per onset label (degree + 1).
pub const DISPERSAL_STRIDE: usize = 8;

fn stream_id(tag: u64, fiber: Fiber) -> u64 {
    (tag << 56) | (fiber.kind.rank() << 48) | fiber.index as u64
}

fn fiber_rng(seed: u64, tag: u64, fiber: Fiber) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(tag, fiber));
    rng
}

/// Arrival times of a rate-`rate` Poisson process on `[0, horizon)`.
fn poisson_times(rng: &mut impl Rng, rate: f64, horizon: f64) -> Vec<f64> {
    if rate <= 0.0 || horizon <= 0.0 {
        return Vec::new();
    }
    let exp = Exp::new(rate).expect("positive rate");
    let mut times = Vec::with_capacity((rate * horizon * 1.2) as usize + 4);
    let mut t = 0.0;
    loop {
        let next = t + exp.sample(rng);
        if next >= horizon {
            break;
        }
        // equal floats would break strict ordering within the fiber
        if next > t {
            times.push(next);
            t = next;
        }
    }
    times
}

#[derive(Debug, Clone, PartialEq)]
pub struct Substructure {
    graph: Graph,
    edges: Vec<(usize, usize)>,
    intensities: Intensities,
    horizon: f64,
    seed: u64,
    recovery: Vec<Vec<f64>>,
    onset: Vec<Vec<f64>>,
    transmission: Vec<Vec<f64>>,
}

impl Substructure {
    pub fn generate(graph: &Graph, intensities: Intensities, horizon: f64, seed: u64) -> Result<Self> {
        intensities.validate()?;
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(Error::param("horizon", format!("must be finite and >= 0, got {horizon}")));
        }
        let n = graph.n();
        let edges = graph.directed_edges();
        let draw = |fiber: Fiber, rate: f64| poisson_times(&mut fiber_rng(seed, TAG_BASE, fiber), rate, horizon);
        let recovery = (0..n).map(|x| draw(Fiber::recovery(x), intensities.recovery)).collect();
        let onset = (0..n).map(|x| draw(Fiber::onset(x), intensities.onset)).collect();
        let transmission = (0..edges.len())
            .map(|e| draw(Fiber::transmission(e), intensities.transmission))
            .collect();
        Ok(Substructure {
            graph: graph.clone(),
            edges,
            intensities,
            horizon,
            seed,
            recovery,
            onset,
            transmission,
        })
    }

    /// A substructure with hand-placed labels. Times must lie in
    /// `[0, horizon)` and transmissions must join adjacent sites.
    pub fn scripted(
        graph: &Graph,
        intensities: Intensities,
        horizon: f64,
        seed: u64,
        marks: &[(Mark, f64)],
    ) -> Result<Self> {
        let mut sub = Substructure::generate(graph, Intensities::default(), horizon, seed)?;
        sub.intensities = intensities;
        for &(mark, time) in marks {
            if !(0.0..horizon).contains(&time) {
                return Err(Error::Range(format!("label time {time} outside [0, {horizon})")));
            }
            let fiber = sub.fiber_of(mark)?;
            sub.fiber_times_mut(fiber).push(time);
        }
        for list in sub.lists_mut() {
            list.sort_by(f64::total_cmp);
            let before = list.len();
            list.dedup();
            if list.len() != before {
                return Err(Error::Range("duplicate label time within a fiber".into()));
            }
        }
        Ok(sub)
    }

    pub fn fiber_of(&self, mark: Mark) -> Result<Fiber> {
        let n = self.graph.n();
        let check = |x: usize| {
            if x < n {
                Ok(x)
            } else {
                Err(Error::Range(format!("site {x} not in graph of {n} sites")))
            }
        };
        match mark {
            Mark::Recovery(x) => Ok(Fiber::recovery(check(x)?)),
            Mark::Onset(x) => Ok(Fiber::onset(check(x)?)),
            Mark::Transmission(x, y) => self
                .edge_index(x, y)
                .map(Fiber::transmission)
                .ok_or_else(|| Error::Range(format!("({x}, {y}) is not an adjacent pair"))),
        }
    }

    pub fn edge_index(&self, from: usize, to: usize) -> Option<usize> {
        self.edges.iter().position(|&e| e == (from, to))
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn intensities(&self) -> Intensities {
        self.intensities
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fibers(&self) -> impl Iterator<Item = Fiber> + '_ {
        let n = self.graph.n();
        (0..n)
            .map(Fiber::recovery)
            .chain((0..n).map(Fiber::onset))
            .chain((0..self.edges.len()).map(Fiber::transmission))
    }

    pub fn fiber_times(&self, fiber: Fiber) -> &[f64] {
        match fiber.kind {
            LabelKind::Recovery => &self.recovery[fiber.index],
            LabelKind::Onset => &self.onset[fiber.index],
            LabelKind::Transmission => &self.transmission[fiber.index],
        }
    }

    fn fiber_times_mut(&mut self, fiber: Fiber) -> &mut Vec<f64> {
        match fiber.kind {
            LabelKind::Recovery => &mut self.recovery[fiber.index],
            LabelKind::Onset => &mut self.onset[fiber.index],
            LabelKind::Transmission => &mut self.transmission[fiber.index],
        }
    }

    fn lists_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.recovery
            .iter_mut()
            .chain(self.onset.iter_mut())
            .chain(self.transmission.iter_mut())
    }

    fn label(&self, fiber: Fiber, time: f64) -> Label {
        let (site, target) = match fiber.kind {
            LabelKind::Transmission => self.edges[fiber.index],
            _ => (fiber.index, fiber.index),
        };
        Label {
            time,
            fiber,
            site,
            target,
        }
    }

    pub fn total_labels(&self) -> usize {
        self.fibers().map(|f| self.fiber_times(f).len()).sum()
    }

    /// Every label, globally ordered by `(time, kind rank, location index)`.
    pub fn labels(&self) -> Vec<Label> {
        self.labels_between(0.0, f64::INFINITY)
    }

    /// Labels with `t0 < time <= t1`, in global order.
    pub fn labels_between(&self, t0: f64, t1: f64) -> Vec<Label> {
        let mut out = Vec::new();
        for fiber in self.fibers() {
            let times = self.fiber_times(fiber);
            let lo = times.partition_point(|&t| t <= t0);
            let hi = times.partition_point(|&t| t <= t1);
            out.extend(times[lo..hi].iter().map(|&t| self.label(fiber, t)));
        }
        out.sort_unstable_by(Label::order_key);
        out
    }

    /// Labels whose fiber and time lie in `region`, in global order.
    pub fn restrict(&self, region: &Region) -> Result<Vec<Label>> {
        let mut out = Vec::new();
        for (&fiber, intervals) in &region.pieces {
            let in_graph = match fiber.kind {
                LabelKind::Transmission => fiber.index < self.edges.len(),
                _ => fiber.index < self.graph.n(),
            };
            if !in_graph {
                return Err(Error::Range(format!("{fiber:?} is not a fiber of this substructure")));
            }
            let times = self.fiber_times(fiber);
            for &(a, b) in intervals {
                if a < 0.0 || b > self.horizon {
                    return Err(Error::Range(format!(
                        "interval [{a}, {b}) outside [0, {}]",
                        self.horizon
                    )));
                }
                let lo = times.partition_point(|&t| t < a);
                let hi = times.partition_point(|&t| t < b);
                out.extend(times[lo..hi].iter().map(|&t| self.label(fiber, t)));
            }
        }
        out.sort_unstable_by(Label::order_key);
        Ok(out)
    }

    /// Uniforms attached to the `ordinal`-th onset label at `site`, drawn
    /// from a dedicated per-site stream. Random access: the values do not
    /// depend on which other onsets were consumed.
    pub fn dispersal_uniforms(&self, site: usize, ordinal: usize, out: &mut [f64]) {
        assert!(out.len() <= DISPERSAL_STRIDE, "too many uniforms per onset");
        let mut rng = fiber_rng(self.seed, TAG_DISPERSAL, Fiber::onset(site));
        // two 32-bit words per f64
        rng.set_word_pos((ordinal * DISPERSAL_STRIDE * 2) as u128);
        for u in out.iter_mut() {
            *u = rng.random::<f64>();
        }
    }

    /// Rows `fiber,kind,time` preceded by a `#` metadata line.
    pub fn to_csv(&self) -> String {
        let i = self.intensities;
        let mut s = format!(
            "# graph={} n={} recovery={:?} onset={:?} transmission={:?} horizon={:?} seed={}\nfiber,kind,time\n",
            self.graph.kind().name(),
            self.graph.n(),
            i.recovery,
            i.onset,
            i.transmission,
            self.horizon,
            self.seed
        );
        for label in self.labels() {
            let loc = match label.kind() {
                LabelKind::Transmission => format!("{}>{}", label.site, label.target),
                _ => label.site.to_string(),
            };
            let _ = writeln!(s, "{loc},{},{:?}", label.kind().name(), label.time);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let meta = lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .ok_or_else(|| Error::Parse("missing metadata line".into()))?;
        let mut fields = BTreeMap::new();
        for kv in meta.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad metadata field `{kv}`")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::Parse(format!("metadata lacks `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?.parse().map_err(|_| Error::Parse(format!("bad number for `{k}`")))
        };
        let n: usize = get("n")?.parse().map_err(|_| Error::Parse("bad n".into()))?;
        let kind = match get("graph")? {
            "path" => GraphKind::Path,
            "cycle" => GraphKind::Cycle,
            other => return Err(Error::Parse(format!("unknown graph `{other}`"))),
        };
        let graph = Graph::build(kind, n)?;
        let intensities = Intensities::new(num("recovery")?, num("onset")?, num("transmission")?);
        let seed = get("seed")?.parse().map_err(|_| Error::Parse("bad seed".into()))?;
        let horizon = num("horizon")?;
        if lines.next() != Some("fiber,kind,time") {
            return Err(Error::Parse("missing header row".into()));
        }
        let mut marks = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let mut cols = line.split(',');
            let (loc, kind, time) = match (cols.next(), cols.next(), cols.next()) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => return Err(Error::Parse(format!("short row `{line}`"))),
            };
            let bad = || Error::Parse(format!("bad row `{line}`"));
            let kind = LabelKind::parse(kind).ok_or_else(bad)?;
            let time: f64 = time.parse().map_err(|_| bad())?;
            let mark = match kind {
                LabelKind::Transmission => {
                    let (a, b) = loc.split_once('>').ok_or_else(bad)?;
                    Mark::Transmission(a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?)
                }
                LabelKind::Recovery => Mark::Recovery(loc.parse().map_err(|_| bad())?),
                LabelKind::Onset => Mark::Onset(loc.parse().map_err(|_| bad())?),
            };
            marks.push((mark, time));
        }
        Substructure::scripted(&graph, intensities, horizon, seed, &marks)
    }
}

/// The pair of substructures for the monotone coupling in the infection
/// parameter: the `lambda_hi` transmission labels are the `lambda` labels
/// plus an independent stream of intensity `lambda_hi - lambda`; every
/// other label is shared.
pub fn split_for_lambda_coupling(
    graph: &Graph,
    lambda: f64,
    lambda_hi: f64,
    recovery_rate: f64,
    onset_rate: f64,
    horizon: f64,
    seed: u64,
) -> Result<(Substructure, Substructure)> {
    if !(lambda >= 0.0) {
        return Err(Error::param("lambda", format!("must be >= 0, got {lambda}")));
    }
    if !(lambda_hi > lambda) {
        return Err(Error::param(
            "lambda_hi",
            format!("must exceed lambda = {lambda}, got {lambda_hi}"),
        ));
    }
    let low = Substructure::generate(
        graph,
        Intensities::new(recovery_rate, onset_rate, lambda),
        horizon,
        seed,
    )?;
    let mut high = low.clone();
    high.intensities.transmission = lambda_hi;
    for (e, list) in high.transmission.iter_mut().enumerate() {
        let extra = poisson_times(
            &mut fiber_rng(seed, TAG_COUPLING, Fiber::transmission(e)),
            lambda_hi - lambda,
            horizon,
        );
        list.extend(extra);
        list.sort_by(f64::total_cmp);
        list.dedup();
    }
    Ok((low, high))
}

/// A finite union of `(fiber, [a, b))` pieces; overlapping intervals on the
/// same fiber are merged on insertion.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Region {
    pieces: BTreeMap<Fiber, Vec<(f64, f64)>>,
}

impl Region {
    pub fn empty() -> Self {
        Region::default()
    }

    pub fn full(sub: &Substructure) -> Self {
        let mut r = Region::empty();
        for fiber in sub.fibers() {
            r.insert(fiber, 0.0, sub.horizon());
        }
        r
    }

    /// Site fibers for `sites` and directed-edge fibers with both endpoints
    /// in `sites`, over `[a, b)`.
    pub fn rectangle(sub: &Substructure, sites: Range<usize>, a: f64, b: f64) -> Self {
        let mut r = Region::empty();
        for x in sites.clone() {
            r.insert(Fiber::recovery(x), a, b);
            r.insert(Fiber::onset(x), a, b);
        }
        for (e, &(x, y)) in sub.edges().iter().enumerate() {
            if sites.contains(&x) && sites.contains(&y) {
                r.insert(Fiber::transmission(e), a, b);
            }
        }
        r
    }

    pub fn insert(&mut self, fiber: Fiber, a: f64, b: f64) {
        if !(b > a) {
            return;
        }
        let list = self.pieces.entry(fiber).or_default();
        list.push((a, b));
        list.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(list.len());
        for &(a, b) in list.iter() {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        *list = merged;
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn contains(&self, label: &Label) -> bool {
        self.pieces
            .get(&label.fiber)
            .is_some_and(|iv| iv.iter().any(|&(a, b)| a <= label.time && label.time < b))
    }

    pub fn intersect(&self, other: &Region) -> Region {
        let mut out = Region::empty();
        for (fiber, mine) in &self.pieces {
            let Some(theirs) = other.pieces.get(fiber) else {
                continue;
            };
            for &(a, b) in mine {
                for &(c, d) in theirs {
                    out.insert(*fiber, a.max(c), b.min(d));
                }
            }
        }
        out
    }

    pub fn pieces(&self) -> impl Iterator<Item = (Fiber, f64, f64)> + '_ {
        self.pieces
            .iter()
            .flat_map(|(&f, iv)| iv.iter().map(move |&(a, b)| (f, a, b)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_rates() -> Intensities {
        Intensities::new(1.0, 0.5, 0.7)
    }

    #[test]
    fn zero_horizon_is_empty() {
        let g = Graph::path(6).unwrap();
        let sub = Substructure::generate(&g, Intensities::new(3.0, 2.0, 5.0), 0.0, 9).unwrap();
        assert_eq!(sub.total_labels(), 0);
    }

    #[test]
    fn rejects_negative_parameters() {
        let g = Graph::path(3).unwrap();
        assert!(Substructure::generate(&g, Intensities::new(-1.0, 0.0, 0.0), 1.0, 0).is_err());
        assert!(Substructure::generate(&g, unit_rates(), -1.0, 0).is_err());
    }

    #[test]
    fn deterministic_in_seed() {
        let g = Graph::cycle(7).unwrap();
        let a = Substructure::generate(&g, unit_rates(), 20.0, 42).unwrap();
        let b = Substructure::generate(&g, unit_rates(), 20.0, 42).unwrap();
        let c = Substructure::generate(&g, unit_rates(), 20.0, 43).unwrap();
        assert_eq!(a.labels(), b.labels());
        assert_ne!(a.labels(), c.labels());
    }

    #[test]
    fn fibers_strictly_increasing_within_horizon() {
        let g = Graph::path(8).unwrap();
        let sub = Substructure::generate(&g, Intensities::new(4.0, 3.0, 2.0), 50.0, 1).unwrap();
        for f in sub.fibers() {
            let t = sub.fiber_times(f);
            assert!(t.windows(2).all(|w| w[0] < w[1]));
            assert!(t.iter().all(|&x| (0.0..50.0).contains(&x)));
        }
        let all = sub.labels();
        assert!(all.windows(2).all(|w| w[0].order_key(&w[1]).is_lt()));
        for l in &all {
            if l.kind() == LabelKind::Transmission {
                assert!(g.is_adjacent(l.site, l.target));
            }
        }
    }

    #[test]
    fn restrict_empty_and_full() {
        let g = Graph::path(5).unwrap();
        let sub = Substructure::generate(&g, unit_rates(), 10.0, 3).unwrap();
        assert!(sub.restrict(&Region::empty()).unwrap().is_empty());
        let full = sub.restrict(&Region::full(&sub)).unwrap();
        assert_eq!(full.len(), sub.total_labels());
        assert_eq!(full, sub.labels());
    }

    #[test]
    fn restrict_rejects_out_of_horizon() {
        let g = Graph::path(3).unwrap();
        let sub = Substructure::generate(&g, unit_rates(), 5.0, 3).unwrap();
        let mut r = Region::empty();
        r.insert(Fiber::recovery(0), 0.0, 6.0);
        assert!(matches!(sub.restrict(&r), Err(Error::Range(_))));
        let mut r = Region::empty();
        r.insert(Fiber::recovery(9), 0.0, 1.0);
        assert!(sub.restrict(&r).is_err());
    }

    #[test]
    fn disjoint_regions_partition_labels() {
        let g = Graph::path(6).unwrap();
        let sub = Substructure::generate(&g, Intensities::new(2.0, 1.0, 1.5), 12.0, 77).unwrap();
        let cuts = [0.0, 2.5, 7.0, 12.0];
        let mut pieces = Vec::new();
        for w in cuts.windows(2) {
            pieces.push(Region::rectangle(&sub, 0..3, w[0], w[1]));
            pieces.push(Region::rectangle(&sub, 3..6, w[0], w[1]));
        }
        // the two edges crossing the 2|3 cut belong to neither rectangle
        let (e1, e2) = (sub.edge_index(2, 3).unwrap(), sub.edge_index(3, 2).unwrap());
        let mut cross = Region::empty();
        cross.insert(Fiber::transmission(e1), 0.0, 12.0);
        cross.insert(Fiber::transmission(e2), 0.0, 12.0);
        pieces.push(cross);
        let mut collected: Vec<Label> = pieces
            .iter()
            .flat_map(|r| sub.restrict(r).unwrap())
            .collect();
        collected.sort_unstable_by(Label::order_key);
        assert_eq!(collected, sub.labels());
    }

    #[test]
    fn scripted_and_csv_roundtrip() {
        let g = Graph::path(3).unwrap();
        let sub = Substructure::scripted(
            &g,
            unit_rates(),
            1.0,
            5,
            &[
                (Mark::Transmission(0, 1), 0.3),
                (Mark::Onset(1), 0.5),
                (Mark::Recovery(0), 0.7),
            ],
        )
        .unwrap();
        let labels = sub.labels();
        assert_eq!(labels.len(), 3);
        assert_eq!(labels[0].kind(), LabelKind::Transmission);
        assert_eq!((labels[0].site, labels[0].target), (0, 1));
        let back = Substructure::from_csv(&sub.to_csv()).unwrap();
        assert_eq!(back, sub);
        assert!(Substructure::scripted(&g, unit_rates(), 1.0, 5, &[(Mark::Transmission(0, 2), 0.1)]).is_err());
        assert!(Substructure::scripted(&g, unit_rates(), 1.0, 5, &[(Mark::Onset(0), 1.5)]).is_err());
    }

    #[test]
    fn generated_csv_roundtrip_is_exact() {
        let g = Graph::cycle(4).unwrap();
        let sub = Substructure::generate(&g, unit_rates(), 6.0, 11).unwrap();
        assert_eq!(Substructure::from_csv(&sub.to_csv()).unwrap(), sub);
    }

    #[test]
    fn lambda_split_subset_property() {
        let g = Graph::path(6).unwrap();
        let (lo, hi) = split_for_lambda_coupling(&g, 0.8, 2.0, 1.0, 0.5, 30.0, 8).unwrap();
        assert_eq!(lo, Substructure::generate(&g, Intensities::new(1.0, 0.5, 0.8), 30.0, 8).unwrap());
        for f in lo.fibers() {
            let (a, b) = (lo.fiber_times(f), hi.fiber_times(f));
            match f.kind {
                LabelKind::Transmission => assert!(a.iter().all(|t| b.contains(t))),
                _ => assert_eq!(a, b),
            }
        }
        assert!(hi.total_labels() > lo.total_labels());
    }

    #[test]
    fn lambda_split_edge_cases() {
        let g = Graph::path(4).unwrap();
        assert!(split_for_lambda_coupling(&g, 1.0, 1.0, 1.0, 0.0, 5.0, 0).is_err());
        assert!(split_for_lambda_coupling(&g, 2.0, 1.0, 1.0, 0.0, 5.0, 0).is_err());
        let (lo, _) = split_for_lambda_coupling(&g, 0.0, 1.0, 1.0, 0.0, 5.0, 0).unwrap();
        assert!(lo.labels().iter().all(|l| l.kind() != LabelKind::Transmission));
    }

    #[test]
    fn region_intersection_merges() {
        let mut a = Region::empty();
        a.insert(Fiber::onset(1), 0.0, 2.0);
        a.insert(Fiber::onset(1), 1.0, 3.0);
        assert_eq!(a.pieces().count(), 1);
        let mut b = Region::empty();
        b.insert(Fiber::onset(1), 2.5, 5.0);
        b.insert(Fiber::recovery(1), 0.0, 5.0);
        let c = a.intersect(&b);
        assert_eq!(c.pieces().collect::<Vec<_>>(), vec![(Fiber::onset(1), 2.5, 3.0)]);
    }
}
