use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, ValueEnum};
use seis::percolation::Dependence;
use seis::{GraphKind, Model};

use crate::CliError;

pub const TABLE_TAUS: [f64; 10] = [1e4, 1e3, 100.0, 10.0, 1.0, 0.58, 0.1, 0.01, 1e-3, 1e-4];
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CommandKind {
    Simulate,
    EdgeSpeed,
    Ziezold,
    Table1,
    Block,
    LimitBounds,
    Dispersal,
    Couple,
    Percolation,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Simulate => "simulate",
            CommandKind::EdgeSpeed => "edge-speed",
            CommandKind::Ziezold => "ziezold",
            CommandKind::Table1 => "table1",
            CommandKind::Block => "block",
            CommandKind::LimitBounds => "limit-bounds",
            CommandKind::Dispersal => "dispersal",
            CommandKind::Couple => "couple",
            CommandKind::Percolation => "percolation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Svg,
}

const CONFIG_HELP: &str = "\
CONFIG FILE
  --config FILE reads flat `key = value` lines. Keys are the long flag names
  without dashes (process, lambda, tau, m, J, K, j, i, budget, T, replicas,
  seed, output, format, sites, graph, init, taus, ps, rows, strip,
  dependence, threshold, window, k, require-pass) plus `command`. Blank
  lines and lines starting with `#` are ignored. Unknown keys are errors.
  Flags given on the command line override values from the file.

EXIT CODES
  0 success, 2 parameter error, 3 failed certificate under --require-pass,
  1 any other failure.

CSV COLUMNS
  simulate      time,site,old,new
  edge-speed    replica,alpha,std_err  (last row: mean)
  ziezold       process,m,tau,lambda_m,sign_changes,evaluations
                process,m,tau,lambda,drift  (when --lambda is given)
  table1        tau,lambda_m
  block         flank,sites,probability  (after a `#` metadata line)
  limit-bounds  bound,lambda,method,min_prob,status
  dispersal     mask,probability,count,frequency
  couple        tau,seed,discrepancy,first_time,lebesgue_S
  percolation   p,rows,reps,survival,ci  (after a `#` metadata line)";

// Aliases keep clap from treating these as repeated flags.
type Codes = Vec<u8>;
type Floats = Vec<f64>;

/// Every setting, optional so that file values and flags can be layered.
#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct Params {
    /// contact | seis | two-stage | upper | limit
    #[arg(long, value_parser = parse_model)]
    pub process: Option<Model>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Edge-chain window parameter
    #[arg(long)]
    pub m: Option<usize>,
    /// Block width
    #[arg(long = "J")]
    pub width: Option<usize>,
    /// Block shift
    #[arg(long = "K")]
    pub shift: Option<usize>,
    /// Block overlap (alternative to K)
    #[arg(long = "j")]
    pub overlap: Option<usize>,
    /// Active sites required on each flank
    #[arg(long = "i")]
    pub required: Option<usize>,
    /// Expected labels per block
    #[arg(long)]
    pub budget: Option<f64>,
    /// Time horizon
    #[arg(long = "T")]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Number of graph vertices
    #[arg(long)]
    pub sites: Option<usize>,
    /// path | cycle
    #[arg(long, value_parser = parse_graph)]
    pub graph: Option<GraphKind>,
    /// Initial types as a digit string, e.g. 0012100
    #[arg(long, value_parser = parse_init)]
    pub init: Option<Codes>,
    /// Comma-separated latency values
    #[arg(long, value_parser = parse_list)]
    pub taus: Option<Floats>,
    /// Comma-separated percolation densities
    #[arg(long, value_parser = parse_list)]
    pub ps: Option<Floats>,
    #[arg(long)]
    pub rows: Option<usize>,
    /// Percolation strip half-width
    #[arg(long)]
    pub strip: Option<usize>,
    /// iid | 1-dependent
    #[arg(long, value_parser = parse_dependence)]
    pub dependence: Option<Dependence>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Edge-speed window width
    #[arg(long)]
    pub window: Option<usize>,
    /// Dispersal degree
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long = "require-pass", num_args = 0..=1, default_missing_value = "true")]
    pub require_pass: Option<bool>,
}

impl Params {
    /// Fields set in `self` win over those in `base`.
    fn over(self, base: Params) -> Params {
        Params {
            process: self.process.or(base.process),
            lambda: self.lambda.or(base.lambda),
            tau: self.tau.or(base.tau),
            m: self.m.or(base.m),
            width: self.width.or(base.width),
            shift: self.shift.or(base.shift),
            overlap: self.overlap.or(base.overlap),
            required: self.required.or(base.required),
            budget: self.budget.or(base.budget),
            t_end: self.t_end.or(base.t_end),
            replicas: self.replicas.or(base.replicas),
            seed: self.seed.or(base.seed),
            output: self.output.or(base.output),
            format: self.format.or(base.format),
            sites: self.sites.or(base.sites),
            graph: self.graph.or(base.graph),
            init: self.init.or(base.init),
            taus: self.taus.or(base.taus),
            ps: self.ps.or(base.ps),
            rows: self.rows.or(base.rows),
            strip: self.strip.or(base.strip),
            dependence: self.dependence.or(base.dependence),
            threshold: self.threshold.or(base.threshold),
            window: self.window.or(base.window),
            k: self.k.or(base.k),
            require_pass: self.require_pass.or(base.require_pass),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "seis", version, about = "SEIS particle system simulator and critical-value certifier")]
#[command(allow_negative_numbers = true, after_help = CONFIG_HELP)]
struct Cli {
    #[arg(value_enum)]
    command: Option<CommandKind>,
    /// Flat key=value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    params: Params,
}

/// File-only parser: the same flags, no positional command.
#[derive(Debug, Parser)]
#[command(name = "config", allow_negative_numbers = true)]
struct FileArgs {
    #[command(flatten)]
    params: Params,
}

fn parse_model(s: &str) -> Result<Model, String> {
    Model::parse(s).ok_or_else(|| format!("unknown process `{s}`"))
}

fn parse_graph(s: &str) -> Result<GraphKind, String> {
    match s {
        "path" => Ok(GraphKind::Path),
        "cycle" => Ok(GraphKind::Cycle),
        _ => Err(format!("unknown graph `{s}`")),
    }
}

fn parse_dependence(s: &str) -> Result<Dependence, String> {
    Dependence::parse(s).ok_or_else(|| format!("unknown dependence `{s}`"))
}

fn parse_init(s: &str) -> Result<Vec<u8>, String> {
    s.chars()
        .map(|c| c.to_digit(10).map(|d| d as u8).ok_or_else(|| format!("bad type code `{c}`")))
        .collect()
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
        .collect()
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub process: Model,
    /// `None` for `ziezold` means: root-find instead of evaluating the drift.
    pub lambda: Option<f64>,
    pub tau: f64,
    pub m: usize,
    pub width: usize,
    pub shift: Option<usize>,
    pub overlap: Option<usize>,
    pub required: usize,
    pub budget: f64,
    pub t_end: Option<f64>,
    pub replicas: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub sites: usize,
    pub graph: GraphKind,
    pub init: Option<Vec<u8>>,
    pub taus: Vec<f64>,
    pub ps: Vec<f64>,
    pub rows: usize,
    pub strip: usize,
    pub dependence: Dependence,
    pub threshold: f64,
    pub window: usize,
    pub k: usize,
    pub require_pass: bool,
}

fn param(name: &str, reason: impl Into<String>) -> CliError {
    CliError::Param {
        name: name.to_string(),
        reason: reason.into(),
    }
}

/// Reads a flat `key = value` file into flag form.
pub fn parse_file(text: &str) -> Result<(Option<CommandKind>, Params), CliError> {
    let known: Vec<String> = FileArgs::command()
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect();
    let mut command = None;
    let mut argv = vec!["config".to_string()];
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", n + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if key == "command" {
            command = Some(
                CommandKind::from_str(value, false).map_err(|_| CliError::Usage(format!("unknown command `{value}`")))?,
            );
            continue;
        }
        if !known.iter().any(|k| k == key) {
            return Err(CliError::Usage(format!("config line {}: unknown key `{key}`", n + 1)));
        }
        argv.push(format!("--{key}"));
        argv.push(value.to_string());
    }
    let args = FileArgs::try_parse_from(argv)?;
    Ok((command, args.params))
}

/// Parses argv (including the program name), layering flags over an
/// optional `--config` file, and validates the result.
pub fn parse_config<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    let (file_command, file_params) = match &cli.config {
        Some(path) => parse_file(&read(path)?)?,
        None => (None, Params::default()),
    };
    let command = cli
        .command
        .or(file_command)
        .ok_or_else(|| CliError::Usage("no command given".into()))?;
    resolve(command, cli.params.over(file_params))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn positive(name: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(param(name, format!("must be > 0, got {x}")))
    }
}

fn nonnegative(name: &str, x: f64) -> Result<f64, CliError> {
    if x >= 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(param(name, format!("must be >= 0, got {x}")))
    }
}

fn at_least(name: &str, x: usize, lo: usize) -> Result<usize, CliError> {
    if x >= lo {
        Ok(x)
    } else {
        Err(param(name, format!("must be >= {lo}, got {x}")))
    }
}

/// Applies per-command defaults and range checks.
pub fn resolve(command: CommandKind, p: Params) -> Result<RunConfig, CliError> {
    use CommandKind::*;
    let process = match command {
        Table1 => Model::Upper,
        LimitBounds | Dispersal => Model::Limit,
        Couple => Model::Seis,
        Block => p.process.unwrap_or(Model::TwoStage),
        EdgeSpeed => p.process.unwrap_or(Model::Contact),
        Ziezold => p.process.unwrap_or(Model::Upper),
        Simulate => p.process.unwrap_or(Model::Seis),
        Percolation => Model::Contact,
    };
    if let Some(given) = p.process {
        if given != process {
            return Err(param("process", format!("{} runs the {process} process only, got {given}", command.name())));
        }
    }
    let limit_block = process == Model::Limit;
    let default_lambda = match command {
        LimitBounds => Some(8.563),
        Block if limit_block => Some(8.563),
        Block => Some(6.875),
        Ziezold | Table1 | Percolation => None,
        Dispersal => Some(1.0),
        EdgeSpeed => Some(2.0),
        Simulate | Couple => Some(1.5),
    };
    let lambda = p.lambda.or(default_lambda).map(|l| positive("lambda", l)).transpose()?;
    let tau = nonnegative("tau", p.tau.unwrap_or(if command == Block { 0.1 } else { 1.0 }))?;
    if matches!(process, Model::Seis | Model::TwoStage | Model::Upper) && tau == 0.0 && command != Couple {
        return Err(param("tau", format!("must be > 0 for the {process} process")));
    }

    let m = p.m.unwrap_or(if limit_block { 8 } else { 3 });
    if command == Table1 && m > 4 {
        return Err(param("m", format!("table1 supports m <= 4, got {m}")));
    }
    let (default_width, default_required) = if limit_block { (10, 2) } else { (7, 1) };
    let width = at_least("J", p.width.unwrap_or(default_width), 1)?;
    let (shift, overlap) = match (p.shift, p.overlap) {
        (Some(_), Some(_)) => return Err(param("j", "give either K or j, not both")),
        (None, None) if limit_block => (None, Some(4)),
        (None, None) => (Some(6), None),
        other => other,
    };
    let required = p.required.unwrap_or(default_required);
    let budget = positive("budget", p.budget.unwrap_or(650.0))?;
    let t_end = match (p.t_end, command) {
        (Some(t), _) => Some(positive("T", t)?),
        (None, Simulate) => Some(10.0),
        (None, EdgeSpeed) => Some(40.0),
        (None, Couple) => Some(5.0),
        (None, _) => None,
    };
    let default_replicas = match command {
        Dispersal => 1_000_000,
        EdgeSpeed => 100,
        _ => 1000,
    };
    let replicas = at_least("replicas", p.replicas.unwrap_or(default_replicas), 1)?;
    let sites = at_least("sites", p.sites.unwrap_or(30), 1)?;
    let graph = p.graph.unwrap_or(GraphKind::Path);
    if let Some(init) = &p.init {
        if init.len() != sites && p.sites.is_some() {
            return Err(param("init", format!("has {} sites but sites = {sites}", init.len())));
        }
        if let Some(&c) = init.iter().find(|&&c| !process.allows(c)) {
            return Err(param("init", format!("type {c} is not valid for the {process} process")));
        }
    }
    let sites = p.init.as_ref().map_or(sites, Vec::len);
    let taus = p.taus.unwrap_or_else(|| match command {
        Couple => vec![10.0, 100.0, 1000.0],
        _ => TABLE_TAUS.to_vec(),
    });
    for &t in &taus {
        positive("taus", t)?;
    }
    let ps = p.ps.unwrap_or_else(|| (0..8).map(|k| 0.6 + 0.05 * k as f64).collect());
    for &x in &ps {
        if !(0.0..=1.0).contains(&x) {
            return Err(param("ps", format!("densities must lie in [0, 1], got {x}")));
        }
    }
    let threshold = p.threshold.unwrap_or(0.819);
    if !(0.0..=1.0).contains(&threshold) {
        return Err(param("threshold", format!("must lie in [0, 1], got {threshold}")));
    }
    let format = p.format.unwrap_or(Format::Csv);
    if format == Format::Svg && !matches!(command, Table1 | Couple | Percolation) {
        return Err(param("format", format!("svg output is available for table1, couple and percolation, not {}", command.name())));
    }
    Ok(RunConfig {
        command,
        process,
        lambda,
        tau,
        m,
        width,
        shift,
        overlap,
        required,
        budget,
        t_end,
        replicas,
        seed: p.seed.unwrap_or(DEFAULT_SEED),
        output: p.output,
        format,
        sites,
        graph,
        init: p.init,
        taus,
        ps,
        rows: at_least("rows", p.rows.unwrap_or(100), 1)?,
        strip: at_least("strip", p.strip.unwrap_or(120), 1)?,
        dependence: p.dependence.unwrap_or(Dependence::Independent),
        threshold,
        window: at_least("window", p.window.unwrap_or(300), 20)?,
        k: p.k.unwrap_or(2),
        require_pass: p.require_pass.unwrap_or(false),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &str) -> Result<RunConfig, CliError> {
        parse_config(std::iter::once("seis").chain(args.split_whitespace()))
    }

    #[test]
    fn ziezold_echo() {
        let c = parse("ziezold --process upper --m 3 --tau 1.0").unwrap();
        assert_eq!(c.command, CommandKind::Ziezold);
        assert_eq!(c.process, Model::Upper);
        assert_eq!(c.m, 3);
        assert_eq!(c.tau, 1.0);
        assert_eq!(c.lambda, None);
    }

    #[test]
    fn negative_tau_names_tau() {
        match parse("ziezold --process upper --tau -1") {
            Err(CliError::Param { name, .. }) => assert_eq!(name, "tau"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flag_overrides_file() {
        let dir = std::env::temp_dir().join(format!("seis-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        std::fs::write(&path, "# table\ncommand = ziezold\ntau = 0.5\nm = 2\n").unwrap();
        let c = parse(&format!("--config {} --tau 2.0", path.display())).unwrap();
        assert_eq!(c.command, CommandKind::Ziezold);
        assert_eq!(c.tau, 2.0);
        assert_eq!(c.m, 2);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn unknown_file_key_is_rejected() {
        assert!(matches!(parse_file("tau = 1\nflux = 2\n"), Err(CliError::Usage(msg)) if msg.contains("flux")));
        assert!(matches!(parse_file("command = frobnicate\n"), Err(CliError::Usage(_))));
    }

    #[test]
    fn block_geometry_defaults_follow_process() {
        let c = parse("block").unwrap();
        assert_eq!((c.process, c.width, c.shift, c.required, c.lambda), (Model::TwoStage, 7, Some(6), 1, Some(6.875)));
        assert_eq!(c.tau, 0.1);
        let c = parse("block --process limit --j 4 --i 2").unwrap();
        assert_eq!((c.width, c.overlap, c.shift, c.lambda), (10, Some(4), None, Some(8.563)));
        assert!(matches!(parse("block --K 6 --j 2"), Err(CliError::Param { .. })));
    }

    #[test]
    fn guards() {
        assert!(matches!(parse("table1 --m 5"), Err(CliError::Param { name, .. }) if name == "m"));
        assert!(matches!(parse("simulate --format svg"), Err(CliError::Param { name, .. }) if name == "format"));
        assert!(matches!(parse("table1 --process limit"), Err(CliError::Param { name, .. }) if name == "process"));
        assert!(matches!(parse("simulate --init 0130"), Err(CliError::Param { name, .. }) if name == "init"));
        assert!(matches!(parse("frobnicate"), Err(CliError::Clap(_))));
        assert!(matches!(parse("--tau 1"), Err(CliError::Usage(_))));
    }

    #[test]
    fn require_pass_flag_forms() {
        assert!(parse("block --require-pass").unwrap().require_pass);
        assert!(!parse("block --require-pass false").unwrap().require_pass);
        assert!(!parse("block").unwrap().require_pass);
    }
}
