use crate::chaos::{ChaosExpansion, GridSpec};
use crate::clark_ocone::err_tail;
use crate::error::{invalid, Error, Result};
use crate::hermite::{self, QuadratureRule};

use super::{PathBatch, Payoff};

/// Gauss-Hermite order for conditional deltas of smooth payoffs.
const DELTA_QUADRATURE_ORDER: usize = 48;

/// An `L₂` norm estimated from per-path values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    /// `sqrt(mean e²)`.
    pub estimate: f64,
    /// Delta-method standard error of `estimate`.
    pub std_error: f64,
}

impl McEstimate {
    /// Sums run in sample order, so the result depends only on `values`.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean_sq = values.iter().map(|e| e * e).sum::<f64>() / n;
        let var_sq = values
            .iter()
            .map(|e| (e * e - mean_sq).powi(2))
            .sum::<f64>()
            / (n - 1.0).max(1.0);
        let estimate = mean_sq.sqrt();
        let std_error = if estimate > 0.0 {
            var_sq.sqrt() / n.sqrt() / (2.0 * estimate)
        } else {
            0.0
        };
        McEstimate {
            estimate,
            std_error,
        }
    }
}

fn check_grid(expected: GridSpec, batch: &PathBatch) -> Result<()> {
    if batch.grid() != expected {
        return Err(Error::DimensionMismatch(format!(
            "paths live on a {}-step grid of horizon {}, expected {} steps of horizon {}",
            batch.grid().steps(),
            batch.grid().horizon(),
            expected.steps(),
            expected.horizon()
        )));
    }
    Ok(())
}

/// Monte Carlo `‖Err_n(F)‖₂`, evaluating the tail of `F` on every path.
pub fn mc_err_norm(f: &ChaosExpansion, n: u32, batch: &PathBatch) -> Result<McEstimate> {
    check_grid(f.grid(), batch)?;
    let tail = err_tail(f, n)?;
    let max = tail.max_entry();
    let values = batch.map(|xi| {
        let tables: Vec<Vec<f64>> = xi
            .iter()
            .map(|&x| {
                let mut t = Vec::new();
                hermite::eval_table(max, x, &mut t);
                t
            })
            .collect();
        tail.evaluate_with_tables(&tables)
    });
    Ok(McEstimate::from_values(&values))
}

/// `E[f'(x + √v·Z)]`, the delta of a terminal payoff with residual variance `v`.
pub(crate) struct ConditionalDelta<'a> {
    payoff: &'a Payoff,
    rule: QuadratureRule,
    /// Coefficients of `f'` for polynomial payoffs.
    derivative: Vec<f64>,
}

impl<'a> ConditionalDelta<'a> {
    pub(crate) fn new(payoff: &'a Payoff) -> Result<Self> {
        let order = match payoff {
            // f' of degree p-1 is integrated exactly.
            Payoff::Polynomial(p) => p.len() / 2 + 1,
            Payoff::Smooth { .. } => DELTA_QUADRATURE_ORDER,
            Payoff::Digital { .. } => 1,
            Payoff::OccupationTime => return Err(invalid("hedging needs a terminal payoff")),
        };
        let derivative = match payoff {
            Payoff::Polynomial(p) => p
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
            _ => Vec::new(),
        };
        Ok(ConditionalDelta {
            payoff,
            rule: QuadratureRule::gauss_hermite(order)?,
            derivative,
        })
    }

    pub(crate) fn at(&self, x: f64, v: f64) -> f64 {
        let root_v = v.sqrt();
        match self.payoff {
            Payoff::Polynomial(_) => self.rule.expect(|z| {
                self.derivative
                    .iter()
                    .rev()
                    .fold(0.0, |acc, c| acc * (x + root_v * z) + c)
            }),
            // Stein: E[f'(x + √v Z)] = E[f(x + √v Z)·Z]/√v.
            Payoff::Smooth { f, .. } => self.rule.expect(|z| f(x + root_v * z) * z) / root_v,
            Payoff::Digital { strike } => hermite::normal_pdf((strike - x) / root_v) / root_v,
            Payoff::OccupationTime => unreachable!("rejected in new"),
        }
    }
}

/// Monte Carlo `L₂` norm of `F − E[F] − Σ_ℓ E[f'(W_T) | W_{t_{ℓ-1}}]·ΔW_ℓ`.
pub fn tracking_error_hedge(payoff: &Payoff, batch: &PathBatch) -> Result<McEstimate> {
    let grid = batch.grid();
    let delta = ConditionalDelta::new(payoff)?;
    let mean = payoff.terminal_mean(grid.horizon())?;
    let scale = grid.step_variance().sqrt();
    let values = batch.map(|xi| {
        let mut w = 0.0;
        let mut hedge = 0.0;
        for (l, &x) in xi.iter().enumerate() {
            let residual = grid.horizon() - grid.time(l);
            let dw = scale * x;
            hedge += delta.at(w, residual) * dw;
            w += dw;
        }
        payoff.terminal_value(w).map(|f| f - mean - hedge)
    });
    let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "tracking error {bad} for {payoff}"
        )));
    }
    Ok(McEstimate::from_values(&values))
}
