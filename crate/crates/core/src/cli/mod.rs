//! Batch command-line front end.
//!
//! Every parameter resolves as flag, then `CLARK_OCONE_*` environment
//! variable, then `--config` TOML file, then built-in default. The resolved
//! configuration is echoed as `# key=value` lines at the top of every output.

mod commands;

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{invalid, Error, Result};
use crate::montecarlo::Payoff;

pub use commands::run_config;

/// Environment variable prefix for every flag.
pub const ENV_PREFIX: &str = "CLARK_OCONE_";

#[derive(Debug, Parser)]
#[command(
    name = "clark-ocone",
    version,
    about = "Discrete-time Clark-Ocone decomposition experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    /// Write the chaos expansion of a payoff.
    Expand,
    /// Write the per-slot, per-order terms of the decomposition.
    Decompose,
    /// Compare exact refined error norms with their bound.
    VerifyBound,
    /// Exact refined error norms over a list of refinement factors.
    RateSweep,
    /// First-order tracking error of the delta hedge over grid sizes.
    SimulateHedge,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Expand => "expand",
            CommandKind::Decompose => "decompose",
            CommandKind::VerifyBound => "verify-bound",
            CommandKind::RateSweep => "rate-sweep",
            CommandKind::SimulateHedge => "simulate-hedge",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the chaos expansion of a payoff on the N0-step grid.
    Expand(CommonArgs),
    /// Write the per-slot, per-order integrands of the decomposition.
    Decompose(CommonArgs),
    /// Compare exact refined error norms with their bound.
    VerifyBound(CommonArgs),
    /// Exact refined error norms over the N1 list, with a log-log slope.
    RateSweep(CommonArgs),
    /// Monte Carlo first-order tracking error over N = N0*N1.
    SimulateHedge(CommonArgs),
}

impl Command {
    pub fn split(self) -> (CommandKind, CommonArgs) {
        match self {
            Command::Expand(a) => (CommandKind::Expand, a),
            Command::Decompose(a) => (CommandKind::Decompose, a),
            Command::VerifyBound(a) => (CommandKind::VerifyBound, a),
            Command::RateSweep(a) => (CommandKind::RateSweep, a),
            Command::SimulateHedge(a) => (CommandKind::SimulateHedge, a),
        }
    }
}

/// Raw flag values; lists are comma separated.
#[derive(Debug, Default, Clone, Args)]
pub struct CommonArgs {
    /// poly:c0,c1,..; const:v; exp:l; cos:w; digital:K; occupation; random:COUNT; file:PATH
    #[arg(long, env = "CLARK_OCONE_PAYOFF")]
    pub payoff: Option<String>,
    /// Time horizon.
    #[arg(long = "T", env = "CLARK_OCONE_T")]
    pub horizon: Option<String>,
    /// Coarse step count.
    #[arg(long = "N0", env = "CLARK_OCONE_N0")]
    pub n0: Option<String>,
    /// Refinement factors, e.g. 4,8,16.
    #[arg(long = "N1-list", env = "CLARK_OCONE_N1_LIST")]
    pub n1_list: Option<String>,
    /// Hermite truncation degree.
    #[arg(
        long = "max-degree",
        env = "CLARK_OCONE_MAX_DEGREE",
        allow_hyphen_values = true
    )]
    pub max_degree: Option<String>,
    /// Error order(s) n.
    #[arg(long = "order-n", env = "CLARK_OCONE_ORDER_N")]
    pub order_n: Option<String>,
    /// Sobolev exponent(s) s.
    #[arg(
        long = "sobolev-s",
        env = "CLARK_OCONE_SOBOLEV_S",
        allow_hyphen_values = true
    )]
    pub sobolev_s: Option<String>,
    /// Interpolation exponent(s) r in [0, 1].
    #[arg(
        long = "interp-r",
        env = "CLARK_OCONE_INTERP_R",
        allow_hyphen_values = true
    )]
    pub interp_r: Option<String>,
    #[arg(long, env = "CLARK_OCONE_SEED")]
    pub seed: Option<String>,
    /// Monte Carlo paths per grid.
    #[arg(long, env = "CLARK_OCONE_SAMPLES")]
    pub samples: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long, env = "CLARK_OCONE_OUT")]
    pub out: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long, env = "CLARK_OCONE_WORKERS")]
    pub workers: Option<String>,
    /// TOML file whose keys are the long flag names.
    #[arg(long, env = "CLARK_OCONE_CONFIG")]
    pub config: Option<PathBuf>,
}

/// Where the functional under study comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Payoff(Payoff),
    /// `count` seeded random expansions.
    Random(usize),
    /// An expansion CSV on the `T`, `N0` grid.
    File(PathBuf),
}

impl Source {
    fn parse(spec: &str) -> Result<Source> {
        if let Some(count) = spec.strip_prefix("random:") {
            let count: usize = parse_scalar("payoff random count", count)?;
            if count == 0 {
                return Err(invalid("random:COUNT needs COUNT >= 1"));
            }
            return Ok(Source::Random(count));
        }
        if let Some(path) = spec.strip_prefix("file:") {
            return Ok(Source::File(PathBuf::from(path)));
        }
        Ok(Source::Payoff(spec.parse()?))
    }
}

/// Fully resolved and validated parameters of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub payoff_spec: String,
    pub source: Source,
    pub horizon: f64,
    pub n0: usize,
    pub n1_list: Vec<usize>,
    pub max_degree: u32,
    pub orders: Vec<u32>,
    pub sobolev_s: Vec<f64>,
    pub interp_r: Vec<f64>,
    pub seed: u64,
    pub samples: usize,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

const DEFAULTS: [(&str, &str); 10] = [
    ("payoff", "poly:0,0,1"),
    ("T", "1"),
    ("N0", "1"),
    ("N1-list", "4,8,16,32,64,128,256"),
    ("max-degree", "20"),
    ("order-n", "1"),
    ("sobolev-s", "0"),
    ("interp-r", "1"),
    ("seed", "42"),
    ("samples", "100000"),
];

const FILE_KEYS: [&str; 12] = [
    "payoff",
    "T",
    "N0",
    "N1-list",
    "max-degree",
    "order-n",
    "sobolev-s",
    "interp-r",
    "seed",
    "samples",
    "out",
    "workers",
];

/// Reads a TOML config into `key -> text`; arrays become comma lists.
fn read_config_file(path: &std::path::Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| Error::Parse(format!("config {}: {e}", path.display())))?;
    if let Some(key) = table.keys().find(|k| !FILE_KEYS.contains(&k.as_str())) {
        return Err(Error::Parse(format!(
            "unknown config key {key:?} in {}",
            path.display()
        )));
    }
    Ok(table)
}

fn toml_text(key: &str, value: &toml::Value) -> Result<String> {
    match value {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(x) => Ok(x.to_string()),
        toml::Value::Array(items) => {
            let parts = items
                .iter()
                .map(|v| toml_text(key, v))
                .collect::<Result<Vec<_>>>()?;
            Ok(parts.join(","))
        }
        other => Err(Error::Parse(format!(
            "config key {key:?} has unsupported value {other}"
        ))),
    }
}

fn parse_scalar<T: std::str::FromStr>(name: &str, text: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    text.trim()
        .parse()
        .map_err(|e| Error::Parse(format!("--{name}: cannot parse {text:?}: {e}")))
}

fn parse_list<T: std::str::FromStr>(name: &str, text: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items = text
        .split(',')
        .map(|t| parse_scalar(name, t))
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(invalid(format!("--{name} is empty")));
    }
    Ok(items)
}

impl RunConfig {
    /// Layers flags (with their environment fallbacks) over the config file and defaults.
    pub fn resolve(command: CommandKind, args: &CommonArgs) -> Result<RunConfig> {
        let file = match &args.config {
            Some(path) => read_config_file(path)?,
            None => toml::Table::new(),
        };
        let pick = |key: &str, flag: &Option<String>| -> Result<Option<String>> {
            if let Some(v) = flag {
                return Ok(Some(v.clone()));
            }
            if let Some(v) = file.get(key) {
                return toml_text(key, v).map(Some);
            }
            Ok(DEFAULTS
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| v.to_string()))
        };
        let need = |key: &str, flag: &Option<String>| -> Result<String> {
            Ok(pick(key, flag)?.expect("every required key has a default"))
        };

        let payoff_spec = need("payoff", &args.payoff)?;
        let source = Source::parse(&payoff_spec)?;
        let horizon: f64 = parse_scalar("T", &need("T", &args.horizon)?)?;
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(invalid(format!(
                "--T must be positive and finite, got {horizon}"
            )));
        }
        let n0: usize = parse_scalar("N0", &need("N0", &args.n0)?)?;
        if n0 == 0 {
            return Err(invalid("--N0 must be at least 1"));
        }
        let n1_list: Vec<usize> = parse_list("N1-list", &need("N1-list", &args.n1_list)?)?;
        if n1_list.contains(&0) {
            return Err(invalid("--N1-list entries must be at least 1"));
        }
        let max_degree: i64 = parse_scalar("max-degree", &need("max-degree", &args.max_degree)?)?;
        let max_degree = u32::try_from(max_degree).map_err(|_| {
            invalid(format!(
                "--max-degree must be a non-negative integer, got {max_degree}"
            ))
        })?;
        let orders: Vec<u32> = parse_list("order-n", &need("order-n", &args.order_n)?)?;
        if orders.contains(&0) {
            return Err(invalid("--order-n entries must be at least 1"));
        }
        let sobolev_s: Vec<f64> = parse_list("sobolev-s", &need("sobolev-s", &args.sobolev_s)?)?;
        if sobolev_s.iter().any(|s| !s.is_finite()) {
            return Err(invalid("--sobolev-s entries must be finite"));
        }
        let interp_r: Vec<f64> = parse_list("interp-r", &need("interp-r", &args.interp_r)?)?;
        if let Some(r) = interp_r.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(invalid(format!(
                "--interp-r entries must lie in [0, 1], got {r}"
            )));
        }
        let seed: u64 = parse_scalar("seed", &need("seed", &args.seed)?)?;
        let samples: usize = parse_scalar("samples", &need("samples", &args.samples)?)?;
        if samples == 0 {
            return Err(invalid("--samples must be at least 1"));
        }
        let out = match &args.out {
            Some(p) => Some(p.clone()),
            None => pick("out", &None)?.map(PathBuf::from),
        };
        let workers = match pick("workers", &args.workers)? {
            Some(w) => {
                let w: usize = parse_scalar("workers", &w)?;
                if w == 0 {
                    return Err(invalid("--workers must be at least 1"));
                }
                Some(w)
            }
            None => None,
        };
        Ok(RunConfig {
            command,
            payoff_spec,
            source,
            horizon,
            n0,
            n1_list,
            max_degree,
            orders,
            sobolev_s,
            interp_r,
            seed,
            samples,
            out,
            workers,
        })
    }

    /// `# key=value` lines for every parameter that can change the output.
    pub fn header(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut h = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(h, "# {k}={v}");
        };
        line("command", self.command.name().to_string());
        line("payoff", self.payoff_spec.clone());
        line("T", self.horizon.to_string());
        line("N0", self.n0.to_string());
        line(
            "N1-list",
            join(self.n1_list.iter().map(|x| x.to_string()).collect()),
        );
        line("max-degree", self.max_degree.to_string());
        line(
            "order-n",
            join(self.orders.iter().map(|x| x.to_string()).collect()),
        );
        line(
            "sobolev-s",
            join(self.sobolev_s.iter().map(|x| x.to_string()).collect()),
        );
        line(
            "interp-r",
            join(self.interp_r.iter().map(|x| x.to_string()).collect()),
        );
        line("seed", self.seed.to_string());
        line("samples", self.samples.to_string());
        h
    }
}

/// Parses arguments, runs the command and returns the process exit code:
/// 0 on success, 1 on a numerical failure or a failed check, 2 on invalid input.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (kind, args) = cli.command.split();
    let outcome = RunConfig::resolve(kind, &args).and_then(|config| run_config(&config));
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("clark-ocone: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args() -> CommonArgs {
        CommonArgs::default()
    }

    #[test]
    fn defaults_resolve() {
        let c = RunConfig::resolve(CommandKind::Expand, &args()).unwrap();
        assert_eq!(
            c.source,
            Source::Payoff(Payoff::Polynomial(vec![0.0, 0.0, 1.0]))
        );
        assert_eq!(c.n1_list, vec![4, 8, 16, 32, 64, 128, 256]);
        assert_eq!(
            (c.max_degree, c.seed, c.samples, c.n0),
            (20, 42, 100_000, 1)
        );
        assert_eq!(
            (c.orders.clone(), c.sobolev_s.clone(), c.interp_r.clone()),
            (vec![1], vec![0.0], vec![1.0])
        );
        assert!(c
            .header()
            .starts_with("# command=expand\n# payoff=poly:0,0,1\n"));
        assert!(!c.header().contains("workers"));
    }

    #[test]
    fn validation_failures() {
        let cases: Vec<fn(&mut CommonArgs)> = vec![
            |a| a.max_degree = Some("-1".into()),
            |a| a.interp_r = Some("1.5".into()),
            |a| a.horizon = Some("0".into()),
            |a| a.n0 = Some("0".into()),
            |a| a.n1_list = Some("4,x".into()),
            |a| a.order_n = Some("0".into()),
            |a| a.samples = Some("0".into()),
            |a| a.workers = Some("0".into()),
            |a| a.payoff = Some("bogus".into()),
            |a| a.payoff = Some("random:0".into()),
            |a| a.config = Some("/nonexistent/config.toml".into()),
        ];
        for set in cases {
            let mut a = args();
            set(&mut a);
            let err = RunConfig::resolve(CommandKind::RateSweep, &a).unwrap_err();
            assert!(err.is_validation(), "{err}");
        }
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "T = 2.5\nN1-list = [2, 4]\npayoff = \"digital:0\"\nseed = 7\n",
        )
        .unwrap();
        let mut a = args();
        a.config = Some(path.clone());
        a.seed = Some("9".into());
        let c = RunConfig::resolve(CommandKind::RateSweep, &a).unwrap();
        assert_eq!(c.horizon, 2.5);
        assert_eq!(c.n1_list, vec![2, 4]);
        assert_eq!(c.seed, 9);
        assert_eq!(c.source, Source::Payoff(Payoff::digital(0.0)));
        assert_eq!(c.max_degree, 20);

        std::fs::write(&path, "colour = 1\n").unwrap();
        assert!(RunConfig::resolve(CommandKind::RateSweep, &a)
            .unwrap_err()
            .is_validation());
    }

    #[test]
    fn sources() {
        assert_eq!(Source::parse("random:5").unwrap(), Source::Random(5));
        assert_eq!(
            Source::parse("file:x.csv").unwrap(),
            Source::File("x.csv".into())
        );
        assert_eq!(
            Source::parse("occupation").unwrap(),
            Source::Payoff(Payoff::OccupationTime)
        );
    }
}
