//! Oriented site percolation on `{(m, n) : m + n even, n >= 0}` with steps
//! `(m, n) -> (m ± 1, n + 1)`, truncated to `|m| <= width` and `n < rows`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::stats::{replica_seed, Estimate};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dependence {
    Independent,
    /// Site `s` is open iff `U_s <= sqrt(p)` and `U_{s+(1,1)} <= sqrt(p)`
    /// for i.i.d. uniforms `U`; sites at L1 distance above 2 never share a
    /// uniform.
    OneDependent,
}

impl Dependence {
    pub fn name(self) -> &'static str {
        match self {
            Dependence::Independent => "independent",
            Dependence::OneDependent => "one-dependent",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "independent" | "iid" => Some(Dependence::Independent),
            "one-dependent" | "1-dependent" => Some(Dependence::OneDependent),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PercField {
    pub p: f64,
    pub rows: usize,
    /// Columns run over `-width..=width`.
    pub width: usize,
    pub dependence: Dependence,
    pub seed: u64,
    open: Vec<bool>,
}

impl PercField {
    fn cols(&self) -> usize {
        2 * self.width + 1
    }

    fn slot(&self, m: i64, n: usize) -> Option<usize> {
        let col = m + self.width as i64;
        if n >= self.rows || col < 0 || col as usize >= self.cols() || (m + n as i64) % 2 != 0 {
            return None;
        }
        Some(n * self.cols() + col as usize)
    }

    /// `None` for points outside the truncated lattice.
    pub fn is_open(&self, m: i64, n: usize) -> Option<bool> {
        self.slot(m, n).map(|s| self.open[s])
    }

    /// Lattice sites inside the truncation, row by row.
    pub fn sites(&self) -> impl Iterator<Item = (i64, usize)> + '_ {
        let w = self.width as i64;
        (0..self.rows).flat_map(move |n| (-w..=w).filter(move |m| (m + n as i64) % 2 == 0).map(move |m| (m, n)))
    }

    pub fn open_count(&self) -> usize {
        self.sites().filter(|&(m, n)| self.is_open(m, n) == Some(true)).count()
    }

    /// A field with the given open sites, everything else closed.
    pub fn from_open_sites(rows: usize, width: usize, open_sites: &[(i64, usize)]) -> Result<Self> {
        let mut field = PercField {
            p: f64::NAN,
            rows,
            width,
            dependence: Dependence::Independent,
            seed: 0,
            open: vec![false; rows * (2 * width + 1)],
        };
        for &(m, n) in open_sites {
            let s = field
                .slot(m, n)
                .ok_or_else(|| Error::Range(format!("({m}, {n}) is not a lattice site of the field")))?;
            field.open[s] = true;
        }
        Ok(field)
    }
}

fn uniforms(rows: usize, cols: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows * cols).map(|_| rng.random::<f64>()).collect()
}

pub fn sample_field(p: f64, rows: usize, width: usize, dependence: Dependence, seed: u64) -> Result<PercField> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", format!("must lie in [0, 1], got {p}")));
    }
    if rows == 0 {
        return Err(Error::param("rows", "must be >= 1"));
    }
    let cols = 2 * width + 1;
    let open = match dependence {
        Dependence::Independent => uniforms(rows, cols, seed).into_iter().map(|u| u < p).collect(),
        Dependence::OneDependent => {
            // one extra row and column for the (1, 1) partner
            let u = uniforms(rows + 1, cols + 1, seed);
            let q = p.sqrt();
            let pass = |x: f64| x < q;
            (0..rows)
                .flat_map(|n| (0..cols).map(move |c| (n, c)))
                .map(|(n, c)| pass(u[n * (cols + 1) + c]) && pass(u[(n + 1) * (cols + 1) + c + 1]))
                .collect()
        }
    };
    Ok(PercField {
        p,
        rows,
        width,
        dependence,
        seed,
        open,
    })
}

/// Deepest row reached from `origin`. Paths step from open sites only; the
/// endpoint need not be open, so a closed origin reaches row `n0` alone.
/// Steps leaving the strip are discarded.
pub fn cluster_rows(field: &PercField, origin: (i64, usize)) -> Result<usize> {
    let (m0, n0) = origin;
    if field.slot(m0, n0).is_none() {
        return Err(Error::Range(format!("origin ({m0}, {n0}) is not a lattice site of the field")));
    }
    let w = field.width as i64;
    let mut frontier: Vec<i64> = vec![m0];
    let mut deepest = n0;
    let mut n = n0;
    let mut next = Vec::new();
    while !frontier.is_empty() && n + 1 < field.rows {
        next.clear();
        for &m in &frontier {
            if field.is_open(m, n) != Some(true) {
                continue;
            }
            for step in [m - 1, m + 1] {
                if (-w..=w).contains(&step) && !next.contains(&step) {
                    next.push(step);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        n += 1;
        deepest = n;
        std::mem::swap(&mut frontier, &mut next);
        frontier.sort_unstable();
    }
    Ok(deepest)
}

/// Fraction of fields in which the cluster of `(0, 0)` reaches the last row.
pub fn survival_frequency(
    p: f64,
    rows: usize,
    width: usize,
    dependence: Dependence,
    reps: usize,
    seed: u64,
) -> Result<Estimate> {
    if reps == 0 {
        return Err(Error::param("reps", "must be >= 1"));
    }
    let hits = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<bool> {
            let field = sample_field(p, rows, width, dependence, replica_seed(seed, r as u64))?;
            Ok(cluster_rows(&field, (0, 0))? + 1 == rows)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(Estimate::proportion(hits.iter().filter(|&&h| h).count(), reps))
}

pub const CSV_HEADER: &str = "p,rows,reps,survival,ci";

pub fn csv_row(p: f64, rows: usize, estimate: &Estimate) -> String {
    let mut s = String::new();
    let _ = write!(s, "{p},{rows},{},{:?},{:?}", estimate.n, estimate.mean, estimate.half_width);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extremes() {
        for dep in [Dependence::Independent, Dependence::OneDependent] {
            let f = sample_field(1.0, 20, 10, dep, 3).unwrap();
            assert!(f.sites().all(|(m, n)| f.is_open(m, n) == Some(true)));
            assert_eq!(cluster_rows(&f, (0, 0)).unwrap(), 19);
            let f = sample_field(0.0, 20, 10, dep, 3).unwrap();
            assert_eq!(f.open_count(), 0);
            assert_eq!(cluster_rows(&f, (0, 0)).unwrap(), 0);
        }
        assert!(sample_field(1.2, 3, 3, Dependence::Independent, 0).is_err());
        assert!(sample_field(-0.1, 3, 3, Dependence::Independent, 0).is_err());
    }

    #[test]
    fn closed_origin_stays_at_row_zero() {
        let f = PercField::from_open_sites(4, 4, &[(1, 1), (0, 2)]).unwrap();
        assert_eq!(cluster_rows(&f, (0, 0)).unwrap(), 0);
    }

    #[test]
    fn zig_zag_path_depth() {
        // open: (0,0) (1,1) (0,2); the endpoint (±1, 3) need not be open
        let f = PercField::from_open_sites(5, 4, &[(0, 0), (1, 1), (0, 2)]).unwrap();
        assert_eq!(cluster_rows(&f, (0, 0)).unwrap(), 3);
        let f = PercField::from_open_sites(4, 4, &[(0, 0), (1, 1), (2, 2)]).unwrap();
        assert_eq!(cluster_rows(&f, (0, 0)).unwrap(), 3);
        let f = PercField::from_open_sites(6, 4, &[(0, 0), (-1, 1)]).unwrap();
        assert_eq!(cluster_rows(&f, (0, 0)).unwrap(), 2);
    }

    #[test]
    fn parity_and_bounds() {
        let f = PercField::from_open_sites(3, 2, &[]).unwrap();
        assert_eq!(f.is_open(1, 0), None);
        assert_eq!(f.is_open(0, 3), None);
        assert_eq!(f.is_open(3, 1), None);
        assert!(cluster_rows(&f, (1, 0)).is_err());
        assert!(PercField::from_open_sites(3, 2, &[(1, 0)]).is_err());
    }

    #[test]
    fn deterministic_in_seed() {
        let a = sample_field(0.6, 30, 30, Dependence::OneDependent, 11).unwrap();
        let b = sample_field(0.6, 30, 30, Dependence::OneDependent, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_formatting() {
        let e = Estimate::proportion(1, 1);
        assert_eq!(csv_row(1.0, 10, &e), "1,10,1,1.0,0.0");
        assert_eq!(Dependence::parse("1-dependent"), Some(Dependence::OneDependent));
    }
}
