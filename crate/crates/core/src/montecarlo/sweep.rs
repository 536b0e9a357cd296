use rayon::prelude::*;

use crate::chaos::{ChaosExpansion, GridSpec};
use crate::clark_ocone::{
    err_norm_refined, loglog_slope, refined_error_bound, RateReport, RateRow, BOUND_REL_SLACK,
};
use crate::error::{invalid, Result};

use super::{
    coeffs_occupation_time, coeffs_terminal, occupation_err_norm, sample_paths,
    tracking_error_hedge, Payoff,
};

fn check_increasing(name: &str, list: &[usize]) -> Result<()> {
    if list.is_empty() {
        return Err(invalid(format!("{name} list is empty")));
    }
    if list.contains(&0) {
        return Err(invalid(format!("{name} values must be positive")));
    }
    if list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid(format!("{name} list must be strictly increasing")));
    }
    Ok(())
}

/// Exact refined error norms of `f` and their bounds over `n1_list`.
pub fn rate_sweep_expansion(
    f: &ChaosExpansion,
    payoff_id: &str,
    n: u32,
    s: f64,
    r: f64,
    n1_list: &[usize],
) -> Result<RateReport> {
    check_increasing("N1", n1_list)?;
    let rows = n1_list
        .par_iter()
        .map(|&n1| {
            let error_norm = err_norm_refined(f, n, n1, s)?;
            let bound = refined_error_bound(f, n, n1, s, r)?;
            let holds = error_norm <= bound * (1.0 + BOUND_REL_SLACK);
            Ok(RateRow {
                n1,
                error_norm,
                bound,
                holds,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RateReport::new(payoff_id, n, s, r, rows))
}

/// [`rate_sweep_expansion`] for the expansion of `payoff` on an `n0`-step grid of `[0, horizon]`.
#[allow(clippy::too_many_arguments)]
pub fn rate_sweep(
    payoff: &Payoff,
    n: u32,
    s: f64,
    r: f64,
    n1_list: &[usize],
    n0: usize,
    horizon: f64,
    max_degree: u32,
) -> Result<RateReport> {
    let grid = GridSpec::new(horizon, n0)?;
    let f = payoff_expansion(payoff, grid, max_degree)?;
    rate_sweep_expansion(&f, &payoff.to_string(), n, s, r, n1_list)
}

/// Chaos expansion of any payoff on `grid`, truncated at `max_degree`.
pub fn payoff_expansion(
    payoff: &Payoff,
    grid: GridSpec,
    max_degree: u32,
) -> Result<ChaosExpansion> {
    match payoff {
        Payoff::OccupationTime => coeffs_occupation_time(grid, max_degree),
        _ => coeffs_terminal(payoff, grid, max_degree),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgeRow {
    pub steps: usize,
    pub l2_estimate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HedgeReport {
    pub payoff_id: String,
    pub rows: Vec<HedgeRow>,
    /// Least-squares slope of `ln l2_estimate` on `ln N`.
    pub fitted_slope: Option<f64>,
}

/// First-order tracking error over the grid sizes in `steps_list`.
///
/// Terminal payoffs are hedged on `samples` seeded paths per grid. The
/// occupation time uses the exact norm of its truncated first-order tail, so
/// its standard error is 0.
pub fn hedge_sweep(
    payoff: &Payoff,
    horizon: f64,
    steps_list: &[usize],
    samples: usize,
    seed: u64,
    max_degree: u32,
) -> Result<HedgeReport> {
    check_increasing("N", steps_list)?;
    let mut rows = Vec::with_capacity(steps_list.len());
    for &steps in steps_list {
        let grid = GridSpec::new(horizon, steps)?;
        let row = if payoff.is_terminal() {
            let batch = sample_paths(grid, samples, seed)?;
            let e = tracking_error_hedge(payoff, &batch)?;
            HedgeRow {
                steps,
                l2_estimate: e.estimate,
                std_error: e.std_error,
            }
        } else {
            let l2 = occupation_err_norm(grid, 1, 0.0, max_degree)?;
            HedgeRow {
                steps,
                l2_estimate: l2,
                std_error: 0.0,
            }
        };
        rows.push(row);
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.steps as f64, r.l2_estimate))
        .collect();
    Ok(HedgeReport {
        payoff_id: payoff.to_string(),
        fitted_slope: loglog_slope(&points),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clark_ocone::err_tail;
    use crate::multiindex::MultiIndex;
    use approx::assert_abs_diff_eq;

    const POWERS: [usize; 7] = [4, 8, 16, 32, 64, 128, 256];

    #[test]
    fn degree_two_rate() {
        let f = ChaosExpansion::new(
            GridSpec::new(1.0, 1).unwrap(),
            [(MultiIndex::unit(1, 2), 1.0)],
        )
        .unwrap();
        let report = rate_sweep_expansion(&f, "h2", 1, 0.0, 1.0, &POWERS).unwrap();
        assert!(report.rows.iter().all(|r| r.holds));
        assert!((report.fitted_slope.unwrap() + 0.5).abs() < 0.1);
    }

    #[test]
    fn low_degree_polynomial_has_no_tail() {
        let p: Payoff = "poly:1;2".parse().unwrap();
        let report = rate_sweep(&p, 1, 0.0, 1.0, &POWERS, 1, 1.0, 20).unwrap();
        assert!(report.rows.iter().all(|r| r.error_norm == 0.0));
        assert_eq!(report.fitted_slope, None);
    }

    #[test]
    fn truncated_digital_rate_tends_to_half() {
        // At any fixed truncation degree the tail is eventually dominated by
        // S((k),1,N1) ~ C(k,2)/N1, so the fitted slope drifts towards -1/2.
        let report = rate_sweep(&Payoff::digital(0.0), 1, 0.0, 1.0, &POWERS, 1, 1.0, 20).unwrap();
        let slope = report.fitted_slope.unwrap();
        assert!(slope < -0.35 && slope > -0.5, "slope {slope}");
        assert!(report.rows.iter().all(|r| r.holds));
    }

    #[test]
    fn sweep_validation() {
        let p = Payoff::digital(0.0);
        assert!(rate_sweep(&p, 1, 0.0, 1.0, &[], 1, 1.0, 4).is_err());
        assert!(rate_sweep(&p, 1, 0.0, 1.0, &[4, 2], 1, 1.0, 4).is_err());
        assert!(rate_sweep(&p, 1, 0.0, 1.0, &[0, 2], 1, 1.0, 4).is_err());
        assert!(rate_sweep(&p, 1, 0.0, 1.5, &[2, 4], 1, 1.0, 4).is_err());
    }

    #[test]
    fn occupation_norm_matches_materialized_tail() {
        for steps in 1..=3 {
            let grid = GridSpec::new(1.0, steps).unwrap();
            let f = coeffs_occupation_time(grid, 6).unwrap();
            for (n, s) in [(1, 0.0), (2, 1.0), (1, -0.5)] {
                let direct = err_tail(&f, n).unwrap().sobolev_norm(s);
                let formula = occupation_err_norm(grid, n, s, 6).unwrap();
                assert_abs_diff_eq!(direct, formula, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn hedge_sweep_rows() {
        let x: Payoff = "poly:0;1".parse().unwrap();
        let report = hedge_sweep(&x, 1.0, &[2, 4], 500, 1, 10).unwrap();
        assert!(report.rows.iter().all(|r| r.l2_estimate < 1e-14));
        let occ = hedge_sweep(&Payoff::OccupationTime, 1.0, &[4, 8, 16], 10, 1, 10).unwrap();
        assert!(occ
            .rows
            .iter()
            .all(|r| r.std_error == 0.0 && r.l2_estimate > 0.0));
        assert!(occ
            .rows
            .windows(2)
            .all(|w| w[1].l2_estimate < w[0].l2_estimate));
    }
}
