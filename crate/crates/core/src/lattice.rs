//! Finite bounded-degree graphs and typed configurations.

use std::fmt;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphKind {
    Path,
    Cycle,
}

impl GraphKind {
    pub fn name(self) -> &'static str {
        match self {
            GraphKind::Path => "path",
            GraphKind::Cycle => "cycle",
        }
    }
}

/// Undirected simple graph on vertices `0..n`.
///
/// The integer line is always represented by a path segment; callers keep
/// the window of interest away from the ends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    kind: GraphKind,
    adjacency: Vec<Vec<usize>>,
    max_degree: usize,
}

impl Graph {
    pub fn build(kind: GraphKind, n: usize) -> Result<Self> {
        match kind {
            GraphKind::Path => Self::path(n),
            GraphKind::Cycle => Self::cycle(n),
        }
    }

    pub fn path(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Size {
                kind: "path",
                n,
                reason: "need at least one vertex",
            });
        }
        let adjacency = (0..n)
            .map(|x| {
                let mut nbrs = Vec::with_capacity(2);
                if x > 0 {
                    nbrs.push(x - 1);
                }
                if x + 1 < n {
                    nbrs.push(x + 1);
                }
                nbrs
            })
            .collect();
        Ok(Self::from_adjacency(GraphKind::Path, adjacency))
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Size {
                kind: "cycle",
                n,
                reason: "need at least three vertices",
            });
        }
        let adjacency = (0..n).map(|x| vec![(x + n - 1) % n, (x + 1) % n]).collect();
        Ok(Self::from_adjacency(GraphKind::Cycle, adjacency))
    }

    fn from_adjacency(kind: GraphKind, adjacency: Vec<Vec<usize>>) -> Self {
        let max_degree = adjacency.iter().map(Vec::len).max().unwrap_or(0);
        Graph {
            kind,
            adjacency,
            max_degree,
        }
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn degree(&self, x: usize) -> usize {
        self.adjacency[x].len()
    }

    /// Neighbors of `x` in increasing order of discovery (left before right
    /// on a path).
    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.adjacency[x]
    }

    pub fn is_adjacent(&self, x: usize, y: usize) -> bool {
        x < self.n() && self.adjacency[x].contains(&y)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Ordered adjacent pairs `(from, to)`, sorted by `from` then by
    /// neighbor order. This order fixes the directed-edge fiber indices.
    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(x, nbrs)| nbrs.iter().map(move |&y| (x, y)))
            .collect()
    }
}

/// Process family; determines which type codes a configuration may hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    Contact,
    Seis,
    TwoStage,
    Upper,
    Limit,
}

impl Model {
    pub const ALL: [Model; 5] = [
        Model::Contact,
        Model::Seis,
        Model::TwoStage,
        Model::Upper,
        Model::Limit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Model::Contact => "contact",
            Model::Seis => "seis",
            Model::TwoStage => "two-stage",
            Model::Upper => "upper",
            Model::Limit => "limit",
        }
    }

    pub fn parse(s: &str) -> Option<Model> {
        match s.to_ascii_lowercase().as_str() {
            "contact" => Some(Model::Contact),
            "seis" => Some(Model::Seis),
            "two-stage" | "twostage" | "lower" | "two_stage" => Some(Model::TwoStage),
            "upper" => Some(Model::Upper),
            "limit" => Some(Model::Limit),
            _ => None,
        }
    }

    pub fn alphabet(self) -> &'static [u8] {
        match self {
            Model::Contact => &[0, 2],
            Model::Seis | Model::TwoStage => &[0, 1, 2],
            Model::Upper => &[0, 1, 2, 3],
            Model::Limit => &[0, 1],
        }
    }

    pub fn allows(self, code: u8) -> bool {
        self.alphabet().contains(&code)
    }

    /// The strongest type, used to fill half-lines and window boundaries.
    pub fn top(self) -> u8 {
        *self.alphabet().last().unwrap()
    }

    /// Site-wise order used for monotone couplings: total `0<1<2` for the
    /// contact/SEIS/two-stage family, `0<1,2<3` for the upper process.
    pub fn site_le(self, a: u8, b: u8) -> bool {
        match self {
            Model::Upper => a == 0 || a == b || b == 3,
            _ => a <= b,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One type code per site; the model is carried alongside for validation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    model: Model,
    states: Vec<u8>,
}

impl Configuration {
    pub fn new(model: Model, states: Vec<u8>) -> Result<Self> {
        if let Some((site, &code)) = states.iter().enumerate().find(|(_, &c)| !model.allows(c)) {
            return Err(Error::InvalidCode {
                model: model.name(),
                site,
                code,
            });
        }
        Ok(Configuration { model, states })
    }

    pub fn zeros(model: Model, n: usize) -> Self {
        Configuration {
            model,
            states: vec![0; n],
        }
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[u8] {
        &self.states
    }

    pub fn get(&self, x: usize) -> u8 {
        self.states[x]
    }

    pub fn set(&mut self, x: usize, code: u8) -> Result<()> {
        if !self.model.allows(code) {
            return Err(Error::InvalidCode {
                model: self.model.name(),
                site: x,
                code,
            });
        }
        self.states[x] = code;
        Ok(())
    }

    pub(crate) fn set_unchecked(&mut self, x: usize, code: u8) {
        debug_assert!(self.model.allows(code));
        self.states[x] = code;
    }

    pub fn active_count(&self) -> usize {
        self.states.iter().filter(|&&c| c != 0).count()
    }

    pub fn leftmost_active(&self) -> Option<usize> {
        self.states.iter().position(|&c| c != 0)
    }

    /// Site-wise domination in this configuration's model order.
    pub fn le(&self, other: &Configuration) -> bool {
        self.len() == other.len()
            && self
                .states
                .iter()
                .zip(&other.states)
                .all(|(&a, &b)| self.model.site_le(a, b))
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.states {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}
