use std::fmt::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use seis::blockcert::{certify_block, BlockGeometry, CertResult};
use seis::coupling::{run_coupled, CouplingReport};
use seis::dynamics::{dispersal_pmf, edge_speed, evolve, sample_dispersal, SpeedEstimate, Trajectory};
use seis::edgechain::{drift, lambda_m, LambdaRoot, DEFAULT_BRACKET, DEFAULT_TOL};
use seis::percolation::{self, survival_frequency};
use seis::stats::{replica_seed, Estimate};
use seis::{Configuration, Graph, Model, Process, Substructure};

use crate::config::{CommandKind, Format, RunConfig};
use crate::plot::{Plot, Point};
use crate::CliError;

/// What a command produced: the CSV or SVG body, a short human-readable
/// summary, and for certificates whether they passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub body: String,
    pub summary: String,
    pub passed: Option<bool>,
}

fn lambda(cfg: &RunConfig) -> Result<f64, CliError> {
    cfg.lambda.ok_or_else(|| CliError::Param {
        name: "lambda".into(),
        reason: format!("{} needs --lambda", cfg.command.name()),
    })
}

fn process(cfg: &RunConfig) -> Result<Process, CliError> {
    Ok(Process::new(cfg.process, lambda(cfg)?, cfg.tau)?)
}

fn t_end(cfg: &RunConfig) -> Result<f64, CliError> {
    cfg.t_end.ok_or_else(|| CliError::Param {
        name: "T".into(),
        reason: format!("{} needs --T", cfg.command.name()),
    })
}

/// Active types on the middle sites, or the configured string.
fn initial(cfg: &RunConfig, model: Model, code: u8, spread: usize) -> Result<Configuration, CliError> {
    let states = match &cfg.init {
        Some(init) => init.clone(),
        None => {
            let mut s = vec![0u8; cfg.sites];
            let mid = cfg.sites / 2;
            for x in mid.saturating_sub(spread)..=(mid + spread).min(cfg.sites - 1) {
                s[x] = code;
            }
            s
        }
    };
    Ok(Configuration::new(model, states)?)
}

pub fn simulate(cfg: &RunConfig) -> Result<Trajectory, CliError> {
    let p = process(cfg)?;
    let t = t_end(cfg)?;
    let graph = Graph::build(cfg.graph, cfg.sites)?;
    let eta0 = initial(cfg, p.model, p.model.top(), 0)?;
    let sub = Substructure::generate(&graph, p.intensities(), t, cfg.seed)?;
    Ok(evolve(&p, &eta0, &sub, t)?)
}

pub fn speed(cfg: &RunConfig) -> Result<SpeedEstimate, CliError> {
    Ok(edge_speed(&process(cfg)?, cfg.window, t_end(cfg)?, cfg.replicas, cfg.seed)?)
}

pub fn ziezold(cfg: &RunConfig) -> Result<LambdaRoot, CliError> {
    Ok(lambda_m(cfg.process, cfg.m, cfg.tau, DEFAULT_BRACKET, DEFAULT_TOL)?)
}

/// `(tau, lambda_m(tau))` for the upper-bound process.
pub fn run_table1(taus: &[f64], m: usize) -> Result<Vec<(f64, f64)>, CliError> {
    if m > 4 {
        return Err(CliError::Param {
            name: "m".into(),
            reason: format!("table1 supports m <= 4, got {m}"),
        });
    }
    taus.par_iter()
        .map(|&tau| Ok((tau, lambda_m(Model::Upper, m, tau, DEFAULT_BRACKET, DEFAULT_TOL)?.lambda)))
        .collect()
}

pub fn geometry(cfg: &RunConfig) -> Result<BlockGeometry, CliError> {
    let g = match (cfg.shift, cfg.overlap) {
        (_, Some(j)) => BlockGeometry::from_overlap(cfg.width, j, cfg.required, cfg.budget)?,
        (Some(k), None) => BlockGeometry::new(cfg.width, k, cfg.required, cfg.budget)?,
        (None, None) => unreachable!("resolve fills one of K and j"),
    };
    Ok(match cfg.t_end {
        Some(t) => g.with_duration(t)?,
        None => g,
    })
}

pub fn block(cfg: &RunConfig) -> Result<CertResult, CliError> {
    Ok(certify_block(&process(cfg)?, &geometry(cfg)?, cfg.threshold)?)
}

/// Lower bound from the edge chain and an upper-bound certificate at the
/// configured `lambda`.
pub fn limit_bounds(cfg: &RunConfig) -> Result<(LambdaRoot, CertResult), CliError> {
    let lower = lambda_m(Model::Limit, cfg.m, 0.0, DEFAULT_BRACKET, DEFAULT_TOL)?;
    Ok((lower, block(cfg)?))
}

/// Sample counts per dispersal mask.
pub fn dispersal(cfg: &RunConfig) -> Result<(Vec<f64>, Vec<usize>), CliError> {
    let pmf = dispersal_pmf(lambda(cfg)?, cfg.k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut counts = vec![0usize; pmf.probs.len()];
    for _ in 0..cfg.replicas {
        counts[sample_dispersal(&pmf, &mut rng)] += 1;
    }
    Ok((pmf.probs.clone(), counts))
}

#[derive(Debug, Clone)]
pub struct CoupleSummary {
    pub tau: f64,
    pub discrepancy: Estimate,
    pub lebesgue: Estimate,
    pub reports: Vec<CouplingReport>,
}

pub fn couple(cfg: &RunConfig) -> Result<Vec<CoupleSummary>, CliError> {
    let lambda = lambda(cfg)?;
    let t = t_end(cfg)?;
    let graph = Graph::build(cfg.graph, cfg.sites)?;
    let eta0 = initial(cfg, Model::Seis, 1, 1)?;
    cfg.taus
        .iter()
        .enumerate()
        .map(|(k, &tau)| {
            let base = replica_seed(cfg.seed, k as u64);
            let reports = (0..cfg.replicas as u64)
                .into_par_iter()
                .map(|r| run_coupled(lambda, tau, &graph, &eta0, t, replica_seed(base, r)))
                .collect::<seis::Result<Vec<_>>>()?;
            let hits = reports.iter().filter(|r| r.discrepancy).count();
            let leb: Vec<f64> = reports.iter().map(|r| r.lebesgue_s).collect();
            Ok(CoupleSummary {
                tau,
                discrepancy: Estimate::proportion(hits, reports.len()),
                lebesgue: Estimate::from_samples(&leb),
                reports,
            })
        })
        .collect()
}

pub fn percolation(cfg: &RunConfig) -> Result<Vec<(f64, Estimate)>, CliError> {
    cfg.ps
        .iter()
        .map(|&p| Ok((p, survival_frequency(p, cfg.rows, cfg.strip, cfg.dependence, cfg.replicas, cfg.seed)?)))
        .collect()
}

/// Runs the configured command and renders its output.
pub fn run(cfg: &RunConfig) -> Result<Output, CliError> {
    let mut body = String::new();
    let mut summary = String::new();
    let mut passed = None;
    let svg = cfg.format == Format::Svg;
    match cfg.command {
        CommandKind::Simulate => {
            let traj = simulate(cfg)?;
            body = traj.to_csv();
            let _ = write!(
                summary,
                "{} transitions; final active sites {}",
                traj.transitions.len(),
                traj.final_state.active_count()
            );
        }
        CommandKind::EdgeSpeed => {
            let est = speed(cfg)?;
            body.push_str("replica,alpha,std_err\n");
            for (r, a) in est.per_replica.iter().enumerate() {
                let _ = writeln!(body, "{r},{a},");
            }
            let _ = writeln!(body, "mean,{},{}", est.alpha, est.std_err);
            let _ = write!(summary, "alpha = {:.4} +/- {:.4}", est.alpha, est.half_width);
        }
        CommandKind::Ziezold => {
            if let Some(l) = cfg.lambda {
                let e = drift(&Process::new(cfg.process, l, cfg.tau)?, cfg.m)?;
                body.push_str("process,m,tau,lambda,drift\n");
                let _ = writeln!(body, "{},{},{},{l},{e}", cfg.process, cfg.m, cfg.tau);
                let _ = write!(summary, "E_mu Delta = {e:.6e}");
            } else {
                let root = ziezold(cfg)?;
                body.push_str("process,m,tau,lambda_m,sign_changes,evaluations\n");
                let _ = writeln!(
                    body,
                    "{},{},{},{},{},{}",
                    cfg.process, cfg.m, cfg.tau, root.lambda, root.sign_changes, root.evaluations
                );
                let _ = write!(summary, "lambda_{} = {:.4}", cfg.m, root.lambda);
            }
        }
        CommandKind::Table1 => {
            let rows = run_table1(&cfg.taus, cfg.m)?;
            if svg {
                body = Plot {
                    title: format!("lambda_{} of the upper-bound process", cfg.m),
                    x_label: "tau".into(),
                    y_label: format!("lambda_{}", cfg.m),
                    log_x: true,
                    points: rows.iter().map(|&(t, l)| Point::new(t, l)).collect(),
                }
                .to_svg();
            } else {
                body.push_str("tau,lambda_m\n");
                for (t, l) in &rows {
                    let _ = writeln!(body, "{t},{l}");
                }
            }
            let _ = write!(summary, "{} rows at m = {}", rows.len(), cfg.m);
        }
        CommandKind::Block => {
            let cert = block(cfg)?;
            body = cert.to_csv();
            summary = cert.to_text();
            passed = Some(cert.pass);
        }
        CommandKind::LimitBounds => {
            let (lower, cert) = limit_bounds(cfg)?;
            body.push_str("bound,lambda,method,min_prob,status\n");
            let _ = writeln!(body, "lower,{},edge-chain m={},,ok", lower.lambda, cfg.m);
            let g = cert.geometry;
            let _ = writeln!(
                body,
                "upper,{},block J={} K={} i={},{},{}",
                cert.process.lambda,
                g.width,
                g.shift,
                g.required,
                cert.min_prob,
                if cert.pass { "pass" } else { "fail" }
            );
            let _ = write!(
                summary,
                "{:.4} < lambda_c < {} ({})",
                lower.lambda,
                cert.process.lambda,
                if cert.pass { "certified" } else { "upper bound NOT certified" }
            );
            passed = Some(cert.pass);
        }
        CommandKind::Dispersal => {
            let (probs, counts) = dispersal(cfg)?;
            body.push_str("mask,probability,count,frequency\n");
            let stat: f64 = probs
                .iter()
                .zip(&counts)
                .map(|(&p, &c)| {
                    let e = p * cfg.replicas as f64;
                    if e > 0.0 { (c as f64 - e).powi(2) / e } else { 0.0 }
                })
                .sum();
            for (mask, (p, c)) in probs.iter().zip(&counts).enumerate() {
                let _ = writeln!(body, "{mask},{p},{c},{}", *c as f64 / cfg.replicas as f64);
            }
            let _ = write!(summary, "chi-squared {stat:.3} on {} degrees of freedom", probs.len() - 1);
        }
        CommandKind::Couple => {
            let rows = couple(cfg)?;
            if svg {
                body = Plot {
                    title: format!("time outside the onset-ordered region, lambda = {}", lambda(cfg)?),
                    x_label: "tau".into(),
                    y_label: "mean l(S)".into(),
                    log_x: true,
                    points: rows
                        .iter()
                        .map(|s| Point::with_err(s.tau, s.lebesgue.mean, s.lebesgue.half_width))
                        .collect(),
                }
                .to_svg();
            } else {
                body.push_str(CouplingReport::CSV_HEADER);
                body.push('\n');
                for s in &rows {
                    for r in &s.reports {
                        body.push_str(&r.csv_row());
                        body.push('\n');
                    }
                }
            }
            for s in &rows {
                let _ = writeln!(
                    summary,
                    "tau {}: discrepancy {:.4} +/- {:.4}, mean l(S) {:.5} +/- {:.5}",
                    s.tau, s.discrepancy.mean, s.discrepancy.half_width, s.lebesgue.mean, s.lebesgue.half_width
                );
            }
        }
        CommandKind::Percolation => {
            let rows = percolation(cfg)?;
            if svg {
                body = Plot {
                    title: format!("{} oriented site percolation, {} rows", cfg.dependence.name(), cfg.rows),
                    x_label: "p".into(),
                    y_label: "survival frequency".into(),
                    log_x: false,
                    points: rows.iter().map(|(p, e)| Point::with_err(*p, e.mean, e.half_width)).collect(),
                }
                .to_svg();
            } else {
                let _ = writeln!(
                    body,
                    "# dependence={} strip={} boundary=truncated seed={} (exploratory, not a certificate)",
                    cfg.dependence.name(),
                    cfg.strip,
                    cfg.seed
                );
                body.push_str(percolation::CSV_HEADER);
                body.push('\n');
                for (p, e) in &rows {
                    body.push_str(&percolation::csv_row(*p, cfg.rows, e));
                    body.push('\n');
                }
            }
            let _ = write!(summary, "{} densities, {} fields each", rows.len(), cfg.replicas);
        }
    }
    Ok(Output {
        body,
        summary: summary.trim_end().to_string(),
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn cfg(args: &str) -> RunConfig {
        parse_config(std::iter::once("seis").chain(args.split_whitespace())).unwrap()
    }

    #[test]
    fn table1_rows() {
        let rows = run_table1(&[1.0, 0.58, 1e-4], 3).unwrap();
        let bands = [(1.15, 1.17), (1.13, 1.15), (1.34, 1.36)];
        for ((tau, l), (lo, hi)) in rows.iter().zip(bands) {
            assert!((lo..=hi).contains(l), "tau {tau}: {l}");
        }
        assert!(run_table1(&[1.0], 5).is_err());
    }

    #[test]
    fn reruns_are_byte_identical() {
        for args in [
            "simulate --process upper --sites 15 --T 3 --seed 4",
            "couple --taus 10,100 --replicas 20 --sites 12",
            "percolation --ps 0.6,0.8 --replicas 50 --rows 30 --strip 30 --format svg",
            "dispersal --replicas 5000 --k 3",
            "edge-speed --lambda 2 --window 60 --T 5 --replicas 4",
        ] {
            let a = run(&cfg(args)).unwrap();
            let b = run(&cfg(args)).unwrap();
            assert_eq!(a.body, b.body, "{args}");
            assert!(!a.body.is_empty());
        }
    }

    #[test]
    fn ziezold_csv() {
        let out = run(&cfg("ziezold --process contact --m 0")).unwrap();
        let mut lines = out.body.lines();
        assert_eq!(lines.next(), Some("process,m,tau,lambda_m,sign_changes,evaluations"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "contact");
        assert!((row[3].parse::<f64>().unwrap() - 1.0).abs() <= 1e-4);
        let out = run(&cfg("ziezold --process contact --m 0 --lambda 3")).unwrap();
        let e: f64 = out.body.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
        assert!((e - (1.0 - 3.0) / (1.0 + 3.0)).abs() < 1e-10);
    }

    #[test]
    fn block_reports_pass_flag() {
        let out = run(&cfg("block --J 3 --K 2 --i 1 --lambda 3 --tau 0.3 --budget 40 --threshold 0.01")).unwrap();
        assert_eq!(out.passed, Some(true));
        assert!(out.body.lines().any(|l| l == "flank,sites,probability"));
        let out = run(&cfg("block --J 3 --K 2 --i 1 --lambda 0.2 --tau 0.3 --budget 40")).unwrap();
        assert_eq!(out.passed, Some(false));
    }

    #[test]
    fn simulate_default_start_is_centered() {
        let c = cfg("simulate --sites 9 --T 0.001 --lambda 0.1");
        let traj = simulate(&c).unwrap();
        assert_eq!(traj.initial.states(), &[0, 0, 0, 0, 2, 0, 0, 0, 0]);
        assert!(traj.replay_is_consistent());
    }

    #[test]
    fn couple_default_start_and_csv() {
        let c = cfg("couple --taus 50 --replicas 8 --sites 10");
        let rows = couple(&c).unwrap();
        assert_eq!(rows[0].reports[0].seis.initial.states(), &[0, 0, 0, 0, 1, 1, 1, 0, 0, 0]);
        let out = run(&c).unwrap();
        assert_eq!(out.body.lines().count(), 9);
        assert!(out.body.starts_with("tau,seed,discrepancy,first_time,lebesgue_S\n50,"));
    }

    #[test]
    fn dispersal_counts_sum_to_samples() {
        let (probs, counts) = dispersal(&cfg("dispersal --replicas 1000")).unwrap();
        assert_eq!(probs.len(), 4);
        assert_eq!(counts.iter().sum::<usize>(), 1000);
    }
}
