use std::io::Write;
use std::path::Path;

use super::{CommandKind, RunConfig, Source};
use crate::chaos::{ChaosExpansion, GridSpec};
use crate::clark_ocone::{decompose, verify_bound};
use crate::error::{invalid, Error, Result};
use crate::montecarlo::{hedge_sweep, payoff_expansion, random_expansion, rate_sweep_expansion};

/// Runs one resolved command inside a pool of the requested size and returns
/// its exit code (1 when a bound check fails).
pub fn run_config(config: &RunConfig) -> Result<i32> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    let (body, code) = pool.install(|| render(config))?;
    let mut text = config.header();
    text.push_str(&body);
    emit(config.out.as_deref(), text.as_bytes())?;
    Ok(code)
}

/// Writes the whole output at once; files go through a sibling temporary and a rename.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(bytes)?;
            tmp.flush()?;
            tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        }
    }
    Ok(())
}

fn real(x: f64) -> String {
    crate::chaos::format_real(x)
}

/// The expansion named by the payoff source on the `T`, `N0` grid.
fn single_expansion(config: &RunConfig) -> Result<(String, ChaosExpansion)> {
    let grid = GridSpec::new(config.horizon, config.n0)?;
    match &config.source {
        Source::Payoff(p) => Ok((p.to_string(), payoff_expansion(p, grid, config.max_degree)?)),
        Source::File(path) => {
            let file = std::fs::File::open(path)
                .map_err(|e| invalid(format!("cannot open expansion {}: {e}", path.display())))?;
            Ok((
                config.payoff_spec.clone(),
                ChaosExpansion::read_csv(file, grid)?,
            ))
        }
        Source::Random(_) => Err(invalid(format!(
            "{} works on a single expansion; random:COUNT is only accepted by verify-bound",
            config.command.name()
        ))),
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

fn slope_line(slope: Option<f64>) -> String {
    match slope {
        Some(s) => format!("# slope={}\n", real(s)),
        None => "# slope=none\n".to_string(),
    }
}

fn single<T: Copy + std::fmt::Display>(name: &str, values: &[T]) -> Result<T> {
    match values {
        [v] => Ok(*v),
        _ => Err(invalid(format!(
            "--{name} takes a single value for this command"
        ))),
    }
}

fn render(config: &RunConfig) -> Result<(String, i32)> {
    match config.command {
        CommandKind::Expand => {
            let (_, f) = single_expansion(config)?;
            let mut buf = Vec::new();
            f.write_csv(&mut buf)?;
            Ok((String::from_utf8(buf).expect("CSV output is UTF-8"), 0))
        }
        CommandKind::Decompose => {
            let (_, f) = single_expansion(config)?;
            let d = decompose(&f);
            let mut w = csv_writer();
            w.write_record(["slot", "order", "multiindex", "coefficient"])?;
            w.write_record(["0", "0", "()", &real(d.mean)])?;
            for term in &d.terms {
                for (a, c) in term.integrand.iter() {
                    w.write_record([
                        term.slot.to_string(),
                        term.order.to_string(),
                        a.to_string(),
                        real(c),
                    ])?;
                }
            }
            Ok((finish(w)?, 0))
        }
        CommandKind::VerifyBound => {
            let cases: Vec<(String, ChaosExpansion)> = match &config.source {
                Source::Random(count) => (0..*count as u64)
                    .map(|case| {
                        (
                            format!("random:{}:{case}", config.seed),
                            random_expansion(config.seed, case),
                        )
                    })
                    .collect(),
                _ => vec![single_expansion(config)?],
            };
            let mut w = csv_writer();
            w.write_record([
                "payoff", "n", "N1", "s", "r", "lhs", "rhs", "holds", "slack",
            ])?;
            let mut all_hold = true;
            for (id, f) in &cases {
                for &n in &config.orders {
                    for &n1 in &config.n1_list {
                        for &s in &config.sobolev_s {
                            for &r in &config.interp_r {
                                let check = verify_bound(f, n, n1, s, r)?;
                                all_hold &= check.holds;
                                w.write_record([
                                    id.clone(),
                                    n.to_string(),
                                    n1.to_string(),
                                    s.to_string(),
                                    r.to_string(),
                                    real(check.lhs),
                                    real(check.rhs),
                                    check.holds.to_string(),
                                    real(check.slack),
                                ])?;
                            }
                        }
                    }
                }
            }
            Ok((finish(w)?, if all_hold { 0 } else { 1 }))
        }
        CommandKind::RateSweep => {
            let n = single("order-n", &config.orders)?;
            let s = single("sobolev-s", &config.sobolev_s)?;
            let r = single("interp-r", &config.interp_r)?;
            let (id, f) = single_expansion(config)?;
            let report = rate_sweep_expansion(&f, &id, n, s, r, &config.n1_list)?;
            let mut w = csv_writer();
            w.write_record(["N1", "error_norm", "bound", "holds"])?;
            for row in &report.rows {
                w.write_record([
                    row.n1.to_string(),
                    real(row.error_norm),
                    real(row.bound),
                    row.holds.to_string(),
                ])?;
            }
            let mut body = finish(w)?;
            body.push_str(&slope_line(report.fitted_slope));
            let code = if report.rows.iter().all(|r| r.holds) {
                0
            } else {
                1
            };
            Ok((body, code))
        }
        CommandKind::SimulateHedge => {
            let payoff = match &config.source {
                Source::Payoff(p) => p,
                _ => {
                    return Err(invalid(
                        "simulate-hedge needs a payoff, not random: or file:",
                    ))
                }
            };
            let steps: Vec<usize> = config.n1_list.iter().map(|n1| config.n0 * n1).collect();
            let report = hedge_sweep(
                payoff,
                config.horizon,
                &steps,
                config.samples,
                config.seed,
                config.max_degree,
            )?;
            let mut w = csv_writer();
            w.write_record(["N", "l2_estimate", "std_error"])?;
            for row in &report.rows {
                w.write_record([
                    row.steps.to_string(),
                    real(row.l2_estimate),
                    real(row.std_error),
                ])?;
            }
            let mut body = finish(w)?;
            body.push_str(&slope_line(report.fitted_slope));
            Ok((body, 0))
        }
    }
}
