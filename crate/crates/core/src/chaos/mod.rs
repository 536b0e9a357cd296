//! Finitely supported Wiener chaos expansions on a uniform increment grid.

mod io;
mod pairing;

use std::collections::BTreeMap;

pub(crate) use io::format_real;
pub use pairing::{
    coarse_fine_hs, hs_bruteforce, pairing_combinatorial, GramMatrix, HS_BRUTEFORCE_MAX_DEGREE,
};

use crate::error::{invalid, Error, Result};
use crate::hermite;
use crate::multiindex::{enumerate_matching, matching_count, MultiIndex};

/// Coefficients smaller than this in magnitude are dropped on construction.
pub const PRUNE_TOLERANCE: f64 = 1e-14;

/// Largest number of fine coefficients [`ChaosExpansion::refine`] will materialize.
pub const REFINE_MAX_TERMS: u128 = 4_000_000;

/// A horizon `T` split into `N` equal steps of variance `T/N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    horizon: f64,
    steps: usize,
}

impl GridSpec {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(invalid(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(invalid("grid needs at least one step"));
        }
        Ok(GridSpec { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Variance `T/N` of each increment.
    pub fn step_variance(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Time `t_i = iT/N`.
    pub fn time(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.steps as f64
    }

    pub fn refined(&self, n1: usize) -> Result<GridSpec> {
        if n1 == 0 {
            return Err(invalid("refinement factor must be at least 1"));
        }
        GridSpec::new(self.horizon, self.steps * n1)
    }

    /// `ξᵢ = ΔWᵢ / √(T/N)`.
    pub fn standardize(&self, increments: &[f64]) -> Vec<f64> {
        let scale = self.step_variance().sqrt();
        increments.iter().map(|d| d / scale).collect()
    }

    fn same_steps_as(&self, other: &GridSpec) -> bool {
        let (a, b) = (self.step_variance(), other.step_variance());
        (a - b).abs() <= 1e-14 * a.max(b)
    }
}

/// `F = Σ_a c_a H_a(ξ)` with finitely many nonzero `c_a`.
///
/// Keys are kept in graded order, so every reduction over the coefficients
/// runs in the same order on every call.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosExpansion {
    grid: GridSpec,
    coeffs: BTreeMap<MultiIndex, f64>,
}

impl ChaosExpansion {
    /// Collects `(index, coefficient)` pairs, summing repeated indexes.
    pub fn new<I>(grid: GridSpec, coeffs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let mut map = BTreeMap::new();
        for (a, c) in coeffs {
            if a.support_len() > grid.steps() {
                return Err(Error::DimensionMismatch(format!(
                    "index {a} does not fit a grid of {} steps",
                    grid.steps()
                )));
            }
            if !c.is_finite() {
                return Err(Error::NonFinite(format!("coefficient of {a} is {c}")));
            }
            *map.entry(a).or_insert(0.0) += c;
        }
        Ok(Self::from_map(grid, map))
    }

    fn from_map(grid: GridSpec, mut coeffs: BTreeMap<MultiIndex, f64>) -> Self {
        coeffs.retain(|_, c| c.abs() >= PRUNE_TOLERANCE);
        ChaosExpansion { grid, coeffs }
    }

    pub fn zero(grid: GridSpec) -> Self {
        ChaosExpansion {
            grid,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self::from_map(grid, BTreeMap::from([(MultiIndex::zero(), value)]))
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn coeff(&self, a: &MultiIndex) -> f64 {
        self.coeffs.get(a).copied().unwrap_or(0.0)
    }

    /// `E[F]`, the coefficient of the zero index.
    pub fn mean(&self) -> f64 {
        self.coeff(&MultiIndex::zero())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.coeffs.iter().map(|(a, &c)| (a, c))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest total degree in the support (0 for an empty expansion).
    pub fn max_degree(&self) -> u32 {
        self.coeffs
            .keys()
            .map(MultiIndex::degree)
            .max()
            .unwrap_or(0)
    }

    /// Largest single entry over all indexes in the support.
    pub fn max_entry(&self) -> u32 {
        self.coeffs
            .keys()
            .flat_map(|a| a.entries().iter().copied())
            .max()
            .unwrap_or(0)
    }

    /// `‖F‖_{2,s} = (Σ_a (1+|a|)^s c_a²)^{1/2}`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|(a, c)| sobolev_weight(a.degree(), s) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// `E[F | ΔW₁, …, ΔW_ell]`: keeps the coefficients supported in the first `ell` slots.
    pub fn conditional_expectation(&self, ell: usize) -> Result<ChaosExpansion> {
        if ell > self.grid.steps() {
            return Err(invalid(format!(
                "cannot condition on {ell} increments of a {}-step grid",
                self.grid.steps()
            )));
        }
        Ok(self.filtered(|a| a.support_len() <= ell))
    }

    /// Keeps the coefficients whose index satisfies `keep`.
    pub fn filtered<P: Fn(&MultiIndex) -> bool>(&self, keep: P) -> ChaosExpansion {
        let coeffs = self
            .coeffs
            .iter()
            .filter(|(a, _)| keep(a))
            .map(|(a, &c)| (a.clone(), c))
            .collect();
        ChaosExpansion {
            grid: self.grid,
            coeffs,
        }
    }

    /// Pathwise value at standardized increments `xi` (one per grid step).
    pub fn evaluate(&self, xi: &[f64]) -> Result<f64> {
        if xi.len() != self.grid.steps() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} standardized increments, got {}",
                self.grid.steps(),
                xi.len()
            )));
        }
        let max = self.max_entry();
        let mut table = Vec::new();
        let tables: Vec<Vec<f64>> = xi
            .iter()
            .map(|&x| {
                hermite::eval_table(max, x, &mut table);
                table.clone()
            })
            .collect();
        Ok(self.evaluate_with_tables(&tables))
    }

    /// Evaluation against precomputed `tables[i][m] = H_m(ξ_{i+1})`.
    pub(crate) fn evaluate_with_tables(&self, tables: &[Vec<f64>]) -> f64 {
        self.coeffs
            .iter()
            .map(|(a, c)| {
                let basis: f64 = a
                    .entries()
                    .iter()
                    .enumerate()
                    .map(|(i, &m)| tables[i][m as usize])
                    .product();
                c * basis
            })
            .sum()
    }

    /// The same functional written in the basis of the grid refined by `n1`.
    ///
    /// A fine index `a'` picks up `c_a · √(a!/a'!) · n1^{−|a|/2}` from the
    /// unique coarse index `a` it matches, so the map is an isometry.
    pub fn refine(&self, n1: usize) -> Result<ChaosExpansion> {
        let fine_grid = self.grid.refined(n1)?;
        if n1 == 1 {
            return Ok(ChaosExpansion {
                grid: fine_grid,
                coeffs: self.coeffs.clone(),
            });
        }
        let n0 = self.grid.steps();
        let fine_terms: u128 = self.coeffs.keys().map(|a| matching_count(a, n1)).sum();
        if fine_terms > REFINE_MAX_TERMS {
            return Err(invalid(format!(
                "refining by {n1} would create {fine_terms} coefficients (limit {REFINE_MAX_TERMS})"
            )));
        }
        let ln_n1 = (n1 as f64).ln();
        let mut coeffs = BTreeMap::new();
        for (a, &c) in &self.coeffs {
            let ln_a_fact = a.ln_factorial();
            let ln_scale = -0.5 * a.degree() as f64 * ln_n1;
            for fine in enumerate_matching(a, n0, n1) {
                let ratio = (0.5 * (ln_a_fact - fine.ln_factorial()) + ln_scale).exp();
                coeffs.insert(fine, c * ratio);
            }
        }
        Ok(Self::from_map(fine_grid, coeffs))
    }

    /// Reinterprets this expansion on a longer grid with the same step size.
    pub fn embed(&self, grid: GridSpec) -> Result<ChaosExpansion> {
        if !self.grid.same_steps_as(&grid) || grid.steps() < self.grid.steps() {
            return Err(Error::DimensionMismatch(format!(
                "cannot embed a {}-step grid of horizon {} into a {}-step grid of horizon {}",
                self.grid.steps(),
                self.grid.horizon(),
                grid.steps(),
                grid.horizon()
            )));
        }
        Ok(ChaosExpansion {
            grid,
            coeffs: self.coeffs.clone(),
        })
    }

    pub fn scaled(&self, factor: f64) -> ChaosExpansion {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(a, &c)| (a.clone(), c * factor))
            .collect();
        Self::from_map(self.grid, coeffs)
    }

    /// Coefficientwise sum; both operands must live on the same grid.
    pub fn add(&self, other: &ChaosExpansion) -> Result<ChaosExpansion> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch(
                "cannot add expansions on different grids".into(),
            ));
        }
        let mut coeffs = self.coeffs.clone();
        for (a, &c) in &other.coeffs {
            *coeffs.entry(a.clone()).or_insert(0.0) += c;
        }
        Ok(Self::from_map(self.grid, coeffs))
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        io::write_expansion(self, writer)
    }

    /// Reads the `multiindex,coefficient` CSV; `#` lines are skipped.
    pub fn read_csv<R: std::io::Read>(reader: R, grid: GridSpec) -> Result<ChaosExpansion> {
        io::read_expansion(reader, grid)
    }
}

/// `(1+|a|)^s`.
pub fn sobolev_weight(degree: u32, s: f64) -> f64 {
    if s == 0.0 {
        1.0
    } else {
        (1.0 + degree as f64).powf(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(1.0, n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(0.0, 1).is_err());
        assert!(GridSpec::new(f64::NAN, 1).is_err());
        assert!(GridSpec::new(1.0, 0).is_err());
        let g = GridSpec::new(2.0, 4).unwrap();
        assert_eq!(g.step_variance(), 0.5);
        assert_eq!(g.time(3), 1.5);
        assert_eq!(g.standardize(&[0.5f64.sqrt()]), vec![1.0]);
    }

    #[test]
    fn construction_checks_support_and_prunes() {
        assert!(ChaosExpansion::new(grid(1), [(mi(&[0, 1]), 1.0)]).is_err());
        assert!(ChaosExpansion::new(grid(1), [(mi(&[1]), f64::NAN)]).is_err());
        let f = ChaosExpansion::new(
            grid(2),
            [(mi(&[1]), 1e-15), (mi(&[0, 1]), 2.0), (mi(&[0, 1]), 1.0)],
        )
        .unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.coeff(&mi(&[0, 1])), 3.0);
    }

    #[test]
    fn sobolev_norm_examples() {
        let f = ChaosExpansion::constant(grid(3), 5.0);
        for s in [-2.0, 0.0, 1.5] {
            assert_abs_diff_eq!(f.sobolev_norm(s), 5.0, epsilon = 1e-15);
        }
        let f = ChaosExpansion::new(grid(1), [(mi(&[2]), 1.0)]).unwrap();
        assert_abs_diff_eq!(f.sobolev_norm(2.0), 3.0, epsilon = 1e-15);
        let f = ChaosExpansion::new(grid(2), [(mi(&[1]), 3.0), (mi(&[0, 1]), 4.0)]).unwrap();
        assert_abs_diff_eq!(f.sobolev_norm(0.0), 5.0, epsilon = 1e-15);
    }

    #[test]
    fn conditional_expectation_examples() {
        let f = ChaosExpansion::new(
            grid(2),
            [(mi(&[]), 0.5), (mi(&[1]), 1.0), (mi(&[0, 1]), 2.0)],
        )
        .unwrap();
        assert_eq!(f.conditional_expectation(2).unwrap(), f);
        let c0 = f.conditional_expectation(0).unwrap();
        assert_eq!(c0, ChaosExpansion::constant(grid(2), 0.5));
        let c1 = f.conditional_expectation(1).unwrap();
        assert_eq!(c1.len(), 2);
        assert_eq!(c1.coeff(&mi(&[1])), 1.0);
        assert_eq!(c1.coeff(&mi(&[0, 1])), 0.0);
        assert!(f.conditional_expectation(3).is_err());
        assert_eq!(c1.conditional_expectation(1).unwrap(), c1);
    }

    #[test]
    fn evaluate_examples() {
        let f = ChaosExpansion::constant(grid(2), 5.0);
        assert_eq!(f.evaluate(&[0.3, -1.0]).unwrap(), 5.0);
        let f = ChaosExpansion::new(grid(1), [(mi(&[2]), 1.0)]).unwrap();
        assert_abs_diff_eq!(f.evaluate(&[0.0]).unwrap(), -FRAC_1_SQRT_2, epsilon = 1e-15);
        let sq = ChaosExpansion::new(grid(1), [(mi(&[]), 1.0), (mi(&[2]), SQRT_2)]).unwrap();
        assert_abs_diff_eq!(sq.evaluate(&[1.0]).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sq.evaluate(&[-2.5]).unwrap(), 6.25, epsilon = 1e-14);
        assert!(sq.evaluate(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn refine_examples() {
        let c = ChaosExpansion::constant(grid(1), 2.5);
        let r = c.refine(3).unwrap();
        assert_eq!(r.grid().steps(), 3);
        assert_eq!(r.coeff(&mi(&[])), 2.5);
        assert_eq!(r.len(), 1);

        let f = ChaosExpansion::new(grid(1), [(mi(&[2]), 1.0)]).unwrap();
        let r = f.refine(2).unwrap();
        assert_abs_diff_eq!(r.coeff(&mi(&[2, 0])), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.coeff(&mi(&[1, 1])), FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(r.coeff(&mi(&[0, 2])), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.sobolev_norm(0.0), 1.0, epsilon = 1e-15);

        let same = f.refine(1).unwrap();
        assert_eq!(same.coeff(&mi(&[2])), 1.0);
        assert_eq!(same.len(), 1);
        assert!(f.refine(0).is_err());
        let deep = ChaosExpansion::new(grid(1), [(mi(&[20]), 1.0)]).unwrap();
        assert!(deep.refine(256).unwrap_err().is_validation());
    }

    #[test]
    fn refine_preserves_pathwise_values() {
        // W_T² on one step, refined to 3 steps, evaluated on a path.
        let sq = ChaosExpansion::new(grid(1), [(mi(&[]), 1.0), (mi(&[2]), SQRT_2)]).unwrap();
        let fine = sq.refine(3).unwrap();
        let xi = [0.4, -1.1, 0.9];
        let w_t = xi.iter().sum::<f64>() / 3f64.sqrt();
        assert_abs_diff_eq!(fine.evaluate(&xi).unwrap(), w_t * w_t, epsilon = 1e-14);
    }

    #[test]
    fn embed_and_arithmetic() {
        let g2 = GridSpec::new(0.5, 2).unwrap();
        let f = ChaosExpansion::new(g2, [(mi(&[0, 1]), 1.0)]).unwrap();
        let e = f.embed(GridSpec::new(1.0, 4).unwrap()).unwrap();
        assert_eq!(e.grid().steps(), 4);
        assert!(f.embed(GridSpec::new(1.0, 2).unwrap()).is_err());
        let sum = e.add(&e.scaled(-1.0)).unwrap();
        assert!(sum.is_empty());
        assert!(e.add(&f).is_err());
    }
}
