//! Discrete-time Clark-Ocone decomposition and its truncation error.
//!
//! For `F = Σ_a c_a H_a` on an `N`-step grid,
//!
//! ```text
//! F = E[F] + Σ_{ℓ=1}^{N} Σ_{m≥1} (Σ_{a ∈ Z_+^{ℓ-1}} c_{(a,m)} H_a) · H_m(ξ_ℓ)
//! ```
//!
//! and the inner sum equals `E[∂^m F/∂ΔW_ℓ^m | ΔW_1, …, ΔW_{ℓ-1}] · (T/N)^{m/2}/√(m!)`.
//! The `n`-th order error `Err_n(F)` keeps the terms with `m > n`, i.e. the
//! coefficients whose last nonzero entry exceeds `n`.

use std::collections::BTreeMap;

use crate::chaos::{sobolev_weight, ChaosExpansion, GridSpec};
use crate::error::{invalid, Error, Result};
use crate::hermite;
use crate::multiindex::{ln_factorial, MultiIndex};

/// Relative slack allowed when comparing an exact norm with its bound.
pub const BOUND_REL_SLACK: f64 = 1e-12;

/// The `(ℓ, m)` summand: `integrand · H_m(ξ_ℓ)`, with `integrand` supported on slots `< ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClarkOconeTerm {
    pub slot: usize,
    pub order: u32,
    pub integrand: ChaosExpansion,
}

impl ClarkOconeTerm {
    /// `E[∂^m F/∂ΔW_ℓ^m | ΔW_1, …, ΔW_{ℓ-1}] = integrand · √(m!)/(T/N)^{m/2}`.
    pub fn conditional_derivative(&self) -> ChaosExpansion {
        let var = self.integrand.grid().step_variance();
        let ln = 0.5 * ln_factorial(self.order) - 0.5 * self.order as f64 * var.ln();
        self.integrand.scaled(ln.exp())
    }

    /// Pathwise value at standardized increments `xi`.
    pub fn evaluate(&self, xi: &[f64]) -> Result<f64> {
        Ok(self.integrand.evaluate(xi)? * hermite::eval_normalized(self.order, xi[self.slot - 1]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClarkOconeDecomposition {
    pub grid: GridSpec,
    pub mean: f64,
    /// Sorted by `(slot, order)`.
    pub terms: Vec<ClarkOconeTerm>,
}

/// Groups the non-constant coefficients by the slot and value of their last nonzero entry.
pub fn decompose(f: &ChaosExpansion) -> ClarkOconeDecomposition {
    let grid = f.grid();
    let mut groups: BTreeMap<(usize, u32), Vec<(MultiIndex, f64)>> = BTreeMap::new();
    for (a, c) in f.iter() {
        if let Some((prefix, slot, order)) = a.split_last() {
            groups.entry((slot, order)).or_default().push((prefix, c));
        }
    }
    let terms = groups
        .into_iter()
        .map(|((slot, order), coeffs)| ClarkOconeTerm {
            slot,
            order,
            integrand: ChaosExpansion::new(grid, coeffs)
                .expect("prefix of a valid index fits the grid"),
        })
        .collect();
    ClarkOconeDecomposition {
        grid,
        mean: f.mean(),
        terms,
    }
}

impl ClarkOconeDecomposition {
    /// Reassembles `E[F] + Σ integrand ⊗ H_m(ξ_ℓ)` into a single expansion.
    pub fn reconstruct(&self) -> Result<ChaosExpansion> {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(MultiIndex::zero(), self.mean);
        for term in &self.terms {
            if term.order == 0 || term.slot == 0 || term.slot > self.grid.steps() {
                return Err(invalid(format!(
                    "term (slot {}, order {}) is outside the grid",
                    term.slot, term.order
                )));
            }
            if term.integrand.grid() != self.grid {
                return Err(Error::DimensionMismatch(
                    "term integrand lives on another grid".into(),
                ));
            }
            for (a, c) in term.integrand.iter() {
                if a.support_len() >= term.slot {
                    return Err(invalid(format!(
                        "integrand index {a} reaches slot {} of its own term",
                        term.slot
                    )));
                }
                let key = a.with_last(term.slot, term.order);
                if coeffs.insert(key.clone(), c).is_some() {
                    return Err(invalid(format!("index {key} appears in two terms")));
                }
            }
        }
        ChaosExpansion::new(self.grid, coeffs)
    }

    /// `E[F] + Σ_{m ≤ n} term_{ℓ,m}(ξ)`; with `n` at least the largest order this equals `F(ξ)`.
    pub fn evaluate_truncated(&self, xi: &[f64], n: u32) -> Result<f64> {
        if xi.len() != self.grid.steps() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} standardized increments, got {}",
                self.grid.steps(),
                xi.len()
            )));
        }
        let mut total = self.mean;
        for term in self.terms.iter().filter(|t| t.order <= n) {
            total += term.evaluate(xi)?;
        }
        Ok(total)
    }

    pub fn max_order(&self) -> u32 {
        self.terms.iter().map(|t| t.order).max().unwrap_or(0)
    }
}

fn check_order(n: u32) -> Result<()> {
    if n == 0 {
        return Err(invalid("error order n must be at least 1"));
    }
    Ok(())
}

fn check_interp(r: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&r) {
        return Err(invalid(format!(
            "interpolation exponent r must lie in [0, 1], got {r}"
        )));
    }
    Ok(())
}

fn check_refinement(n1: usize) -> Result<()> {
    if n1 == 0 {
        return Err(invalid("refinement factor must be at least 1"));
    }
    Ok(())
}

/// `Err_n(F)`: the coefficients whose last nonzero entry exceeds `n`.
pub fn err_tail(f: &ChaosExpansion, n: u32) -> Result<ChaosExpansion> {
    check_order(n)?;
    Ok(f.filtered(|a| a.last_nonzero().is_some_and(|(_, v)| v > n)))
}

/// Share of `c_a²` that lands in `Err_n` after refining by `n1`:
/// `Σ_{j=0}^{n1-1} Σ_{k=n+1}^{A} C(A,k) j^{A-k} / n1^A`, where `A` is the
/// last nonzero entry of `a` (`0^0 = 1`).
pub fn tail_mass(a: &MultiIndex, n: u32, n1: usize) -> Result<f64> {
    check_order(n)?;
    check_refinement(n1)?;
    let (_, big_a) = a
        .last_nonzero()
        .ok_or_else(|| invalid("tail mass is undefined for the zero index"))?;
    if big_a <= n {
        return Ok(0.0);
    }
    let ln_n1 = (n1 as f64).ln();
    let ln_fact_a = ln_factorial(big_a);
    let mut total = 0.0;
    for j in 0..n1 {
        let ln_j = if j == 0 {
            f64::NEG_INFINITY
        } else {
            (j as f64).ln()
        };
        for k in n + 1..=big_a {
            let rest = big_a - k;
            let ln_pow = if rest == 0 { 0.0 } else { rest as f64 * ln_j };
            if ln_pow == f64::NEG_INFINITY {
                continue;
            }
            let ln_term =
                ln_fact_a - ln_factorial(k) - ln_factorial(rest) + ln_pow - big_a as f64 * ln_n1;
            total += ln_term.exp();
        }
    }
    Ok(total)
}

/// `(|a|^n / (n!·n1^n))^r`.
pub fn tail_mass_bound(a: &MultiIndex, n: u32, n1: usize, r: f64) -> Result<f64> {
    check_order(n)?;
    check_refinement(n1)?;
    check_interp(r)?;
    if a.is_zero() {
        return Err(invalid("tail mass is undefined for the zero index"));
    }
    if r == 0.0 {
        return Ok(1.0);
    }
    let ln = n as f64 * (a.degree() as f64).ln() - ln_factorial(n) - n as f64 * (n1 as f64).ln();
    Ok((r * ln).exp())
}

/// `‖Err_n(F)‖_{2,s}` on the grid refined by `n1`, summed over the coarse coefficients.
pub fn err_norm_refined(f: &ChaosExpansion, n: u32, n1: usize, s: f64) -> Result<f64> {
    check_order(n)?;
    check_refinement(n1)?;
    let mut total = 0.0;
    for (a, c) in f.iter() {
        if a.is_zero() {
            continue;
        }
        total += sobolev_weight(a.degree(), s) * c * c * tail_mass(a, n, n1)?;
    }
    Ok(total.sqrt())
}

/// `‖F‖_{2,s+rn} / (n!·n1^n)^{r/2}`.
pub fn refined_error_bound(f: &ChaosExpansion, n: u32, n1: usize, s: f64, r: f64) -> Result<f64> {
    check_order(n)?;
    check_refinement(n1)?;
    check_interp(r)?;
    let ln_denominator = 0.5 * r * (ln_factorial(n) + n as f64 * (n1 as f64).ln());
    Ok(f.sobolev_norm(s + r * n as f64) * (-ln_denominator).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs ≤ rhs·(1 + BOUND_REL_SLACK)`.
    pub holds: bool,
    /// `rhs − lhs`.
    pub slack: f64,
}

/// Compares the exact refined error norm with its bound.
pub fn verify_bound(f: &ChaosExpansion, n: u32, n1: usize, s: f64, r: f64) -> Result<BoundCheck> {
    let lhs = err_norm_refined(f, n, n1, s)?;
    let rhs = refined_error_bound(f, n, n1, s, r)?;
    Ok(BoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + BOUND_REL_SLACK),
        slack: rhs - lhs,
    })
}

/// `D^m_{h_ℓ} F` for the unit direction `h_ℓ`: `Σ_a c_a √(a_ℓ!/(a_ℓ−m)!) H_{a − m·e_ℓ}`.
pub fn gateaux_derivative(f: &ChaosExpansion, slot: usize, m: u32) -> Result<ChaosExpansion> {
    let grid = f.grid();
    if slot == 0 || slot > grid.steps() {
        return Err(invalid(format!(
            "slot {slot} is outside a {}-step grid",
            grid.steps()
        )));
    }
    let coeffs = f.iter().filter_map(|(a, c)| {
        let k = a.get(slot);
        let lowered = a.lowered(slot, m)?;
        let ln = 0.5 * (ln_factorial(k) - ln_factorial(k - m));
        Some((lowered, c * ln.exp()))
    });
    ChaosExpansion::new(grid, coeffs)
}

/// `‖D^m_{h_ℓ} F‖₂² = Σ_a c_a² a_ℓ!/(a_ℓ−m)!`.
fn derivative_norm_sq(f: &ChaosExpansion, slot: usize, m: u32) -> f64 {
    f.iter()
        .filter_map(|(a, c)| {
            let k = a.get(slot);
            (k >= m).then(|| c * c * (ln_factorial(k) - ln_factorial(k - m)).exp())
        })
        .sum()
}

/// `(T·ζ(n+1)·∫₀ᵀ‖D_t^{n+1}F‖² dt)^{1/2} / N^{1/2}` on the expansion's own grid.
///
/// On step `i`, `D_t = (N/T)^{1/2} D_{h_i}`, so the integral is the finite sum
/// `Σ_i (T/N)(N/T)^{n+1} ‖D^{n+1}_{h_i} F‖²`.
pub fn first_order_error_zeta_bound(f: &ChaosExpansion, n: u32) -> Result<f64> {
    check_order(n)?;
    let grid = f.grid();
    let var = grid.step_variance();
    let scale = var * var.powi(-(n as i32 + 1));
    let integral: f64 = (1..=grid.steps())
        .map(|i| scale * derivative_norm_sq(f, i, n + 1))
        .sum();
    let t = grid.horizon();
    Ok((t * riemann_zeta(n as f64 + 1.0) * integral / grid.steps() as f64).sqrt())
}

/// `ζ(s)` for real `s > 1`, by Euler-Maclaurin summation with a cutoff of 16 terms.
pub fn riemann_zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta is only implemented for s > 1");
    const CUT: usize = 16;
    // B_{2j} / (2j)!
    const BERNOULLI_OVER_FACT: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
    ];
    let head: f64 = (1..CUT).map(|k| (k as f64).powf(-s)).sum();
    let big_n = CUT as f64;
    let mut total = head + big_n.powf(1.0 - s) / (s - 1.0) + 0.5 * big_n.powf(-s);
    // s(s+1)…(s+2j-2)·N^{-s-2j+1}
    let mut rising = s;
    let mut power = big_n.powf(-s - 1.0);
    for (j, b) in BERNOULLI_OVER_FACT.iter().enumerate() {
        total += b * rising * power;
        let p = s + 2.0 * j as f64;
        rising *= (p + 1.0) * (p + 2.0);
        power /= big_n * big_n;
    }
    total
}

/// One row of a refinement sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub n1: usize,
    pub error_norm: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Error norms and bounds over increasing refinement factors.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub payoff_id: String,
    pub n: u32,
    pub s: f64,
    pub r: f64,
    /// Sorted by `n1`.
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `ln error_norm` on `ln n1`; `None` with fewer than two positive norms.
    pub fitted_slope: Option<f64>,
}

impl RateReport {
    pub fn new(
        payoff_id: impl Into<String>,
        n: u32,
        s: f64,
        r: f64,
        mut rows: Vec<RateRow>,
    ) -> Self {
        rows.sort_by_key(|row| row.n1);
        let points: Vec<(f64, f64)> = rows
            .iter()
            .map(|row| (row.n1 as f64, row.error_norm))
            .collect();
        let fitted_slope = loglog_slope(&points);
        RateReport {
            payoff_id: payoff_id.into(),
            n,
            s,
            r,
            rows,
            fitted_slope,
        }
    }
}

/// Ordinary least-squares slope of `ln y` on `ln x`; points with `y ≤ 0` are skipped.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(x, y)| {
            let keep = x > 0.0 && y > 0.0;
            if !keep {
                log::warn!("excluding point ({x}, {y}) from the log-log fit");
            }
            keep
        })
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
