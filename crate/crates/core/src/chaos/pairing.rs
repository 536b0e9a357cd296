//! Cross-expectations `E[H_a(h) H_{a'}(h')]` between Fourier-Hermite bases
//! built on two orthonormal systems `h` and `h'`.

use itertools::Itertools;

use crate::error::{invalid, Error, Result};
use crate::multiindex::{ln_factorial, MultiIndex};

/// Largest total degree accepted by [`hs_bruteforce`].
pub const HS_BRUTEFORCE_MAX_DEGREE: u32 = 8;

const NORM_SLACK: f64 = 1e-12;

/// Dense `g_ij = ⟨h_i, h'_j⟩`, rows and columns numbered from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl GramMatrix {
    /// Row-major entries; every row and column must have Euclidean norm at most 1.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} Gram matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(x) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("Gram entry {x}")));
        }
        let g = GramMatrix { rows, cols, data };
        for i in 1..=rows {
            let norm: f64 = (1..=cols).map(|j| g.get(i, j).powi(2)).sum::<f64>().sqrt();
            if norm > 1.0 + NORM_SLACK {
                return Err(invalid(format!("Gram row {i} has norm {norm} > 1")));
            }
        }
        for j in 1..=cols {
            let norm: f64 = (1..=rows).map(|i| g.get(i, j).powi(2)).sum::<f64>().sqrt();
            if norm > 1.0 + NORM_SLACK {
                return Err(invalid(format!("Gram column {j} has norm {norm} > 1")));
            }
        }
        Ok(g)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        GramMatrix {
            rows: n,
            cols: n,
            data,
        }
    }

    /// Pairing of the `n0`-step increment basis with its `n1`-fold refinement:
    /// `1/√n1` when `(i−1)n1 < j ≤ i·n1`, else 0.
    pub fn coarse_fine(n0: usize, n1: usize) -> Result<Self> {
        if n0 == 0 || n1 == 0 {
            return Err(invalid("coarse/fine Gram needs positive grid sizes"));
        }
        let cols = n0 * n1;
        let v = 1.0 / (n1 as f64).sqrt();
        let mut data = vec![0.0; n0 * cols];
        for i in 0..n0 {
            for j in i * n1..(i + 1) * n1 {
                data[i * cols + j] = v;
            }
        }
        Ok(GramMatrix {
            rows: n0,
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `g_ij`, 1-based.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!((1..=self.rows).contains(&i) && (1..=self.cols).contains(&j));
        self.data[(i - 1) * self.cols + (j - 1)]
    }

    fn check_fits(&self, a: &MultiIndex, a2: &MultiIndex) -> Result<()> {
        if a.support_len() > self.rows || a2.support_len() > self.cols {
            return Err(Error::DimensionMismatch(format!(
                "indexes {a} and {a2} do not fit a {}x{} Gram matrix",
                self.rows, self.cols
            )));
        }
        Ok(())
    }
}

/// Slot `i` repeated `a_i` times.
fn slot_word(a: &MultiIndex) -> Vec<usize> {
    a.entries()
        .iter()
        .enumerate()
        .flat_map(|(i, &k)| std::iter::repeat_n(i + 1, k as usize))
        .collect()
}

/// `(1/(√(a!a'!)·m!)) Σ_σ Σ_σ' Π_n g(η_a(σ(n)), η_a'(σ'(n)))` summed literally over `S_m × S_m`.
pub fn hs_bruteforce(a: &MultiIndex, a2: &MultiIndex, gram: &GramMatrix) -> Result<f64> {
    gram.check_fits(a, a2)?;
    let m = a.degree();
    if m != a2.degree() {
        return Ok(0.0);
    }
    if m > HS_BRUTEFORCE_MAX_DEGREE {
        return Err(invalid(format!(
            "brute-force pairing is capped at degree {HS_BRUTEFORCE_MAX_DEGREE}, got {m}"
        )));
    }
    let eta = slot_word(a);
    let eta2 = slot_word(a2);
    let m = m as usize;
    let perms: Vec<Vec<usize>> = (0..m).permutations(m).collect();
    let mut total = 0.0;
    for sigma in &perms {
        for sigma2 in &perms {
            total += (0..m)
                .map(|n| gram.get(eta[sigma[n]], eta2[sigma2[n]]))
                .product::<f64>();
        }
    }
    let ln_norm = 0.5 * (a.ln_factorial() + a2.ln_factorial()) + ln_factorial(m as u32);
    Ok(total * (-ln_norm).exp())
}

/// `√(a!a'!) Σ_k Π_ij g_ij^{k_ij}/k_ij!` over nonnegative integer tables `k`
/// with row sums `a_i` and column sums `a'_j`.
pub fn pairing_combinatorial(a: &MultiIndex, a2: &MultiIndex, gram: &GramMatrix) -> Result<f64> {
    gram.check_fits(a, a2)?;
    if a.degree() != a2.degree() {
        return Ok(0.0);
    }
    let rows: Vec<(usize, u32)> = nonzero_slots(a);
    let cols: Vec<(usize, u32)> = nonzero_slots(a2);
    let mut remaining: Vec<u32> = cols.iter().map(|&(_, k)| k).collect();
    let mut table = TableSum {
        gram,
        rows: &rows,
        cols: &cols,
        total: 0.0,
    };
    table.fill_row(0, 0, rows.first().map_or(0, |r| r.1), 1.0, &mut remaining);
    let ln_scale = 0.5 * (a.ln_factorial() + a2.ln_factorial());
    Ok(table.total * ln_scale.exp())
}

fn nonzero_slots(a: &MultiIndex) -> Vec<(usize, u32)> {
    a.entries()
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .map(|(i, &k)| (i + 1, k))
        .collect()
}

struct TableSum<'a> {
    gram: &'a GramMatrix,
    rows: &'a [(usize, u32)],
    cols: &'a [(usize, u32)],
    total: f64,
}

impl TableSum<'_> {
    /// Places the remaining `left` units of row `r` into columns `c..`.
    fn fill_row(&mut self, r: usize, c: usize, left: u32, weight: f64, remaining: &mut [u32]) {
        if r == self.rows.len() {
            if remaining.iter().all(|&k| k == 0) {
                self.total += weight;
            }
            return;
        }
        if c == self.cols.len() {
            if left == 0 {
                let next = self.rows.get(r + 1).map_or(0, |row| row.1);
                self.fill_row(r + 1, 0, next, weight, remaining);
            }
            return;
        }
        // Later columns must be able to absorb what this one leaves.
        let capacity_after: u32 = remaining[c + 1..].iter().sum();
        let lo = left.saturating_sub(capacity_after);
        let hi = left.min(remaining[c]);
        let g = self.gram.get(self.rows[r].0, self.cols[c].0);
        let mut term = 1.0;
        for k in 0..=hi {
            if k > 0 {
                term *= g / k as f64;
            }
            if k >= lo && term != 0.0 {
                remaining[c] -= k;
                self.fill_row(r, c + 1, left - k, weight * term, remaining);
                remaining[c] += k;
            }
            if term == 0.0 {
                break;
            }
        }
    }
}

/// Closed form of the coarse/fine pairing: `√(a!/a'!)·n1^{−m/2}` when `a2`
/// matches `a`, exactly 0 otherwise.
pub fn coarse_fine_hs(a: &MultiIndex, a2: &MultiIndex, n0: usize, n1: usize) -> f64 {
    let m = a.degree();
    if m != a2.degree() || !a2.matches(a, n0, n1) {
        return 0.0;
    }
    let ln = 0.5 * (a.ln_factorial() - a2.ln_factorial()) - 0.5 * m as f64 * (n1 as f64).ln();
    ln.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn gram_validation() {
        assert!(GramMatrix::new(1, 2, vec![1.0]).is_err());
        assert!(GramMatrix::new(1, 2, vec![0.8, 0.8]).is_err());
        assert!(GramMatrix::new(2, 1, vec![0.8, 0.8]).is_err());
        assert!(GramMatrix::new(1, 2, vec![0.6, 0.8]).is_ok());
        let g = GramMatrix::coarse_fine(2, 3).unwrap();
        assert_eq!((g.rows(), g.cols()), (2, 6));
        assert_eq!(g.get(1, 3), 1.0 / 3f64.sqrt());
        assert_eq!(g.get(1, 4), 0.0);
        assert_eq!(g.get(2, 4), 1.0 / 3f64.sqrt());
    }

    #[test]
    fn bruteforce_examples() {
        let id = GramMatrix::identity(2);
        assert_abs_diff_eq!(
            hs_bruteforce(&mi(&[1]), &mi(&[1]), &id).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        let cf = GramMatrix::coarse_fine(1, 2).unwrap();
        assert_abs_diff_eq!(
            hs_bruteforce(&mi(&[2]), &mi(&[1, 1]), &cf).unwrap(),
            FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        assert_eq!(hs_bruteforce(&mi(&[1]), &mi(&[2]), &id).unwrap(), 0.0);
        let big = GramMatrix::identity(1);
        assert!(hs_bruteforce(&mi(&[9]), &mi(&[9]), &big).is_err());
        assert!(hs_bruteforce(&mi(&[0, 0, 1]), &mi(&[1]), &id).is_err());
    }

    #[test]
    fn combinatorial_examples() {
        let id = GramMatrix::identity(3);
        for a in [mi(&[2, 1]), mi(&[0, 3]), mi(&[1, 1, 1])] {
            assert_abs_diff_eq!(
                pairing_combinatorial(&a, &a, &id).unwrap(),
                1.0,
                epsilon = 1e-14
            );
        }
        assert_eq!(
            pairing_combinatorial(&mi(&[2, 1]), &mi(&[1, 2]), &id).unwrap(),
            0.0
        );
        let cf = GramMatrix::coarse_fine(1, 2).unwrap();
        assert_abs_diff_eq!(
            pairing_combinatorial(&mi(&[2]), &mi(&[1, 1]), &cf).unwrap(),
            FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        assert_eq!(pairing_combinatorial(&mi(&[]), &mi(&[]), &cf).unwrap(), 1.0);
    }

    #[test]
    fn closed_form_examples() {
        assert_abs_diff_eq!(
            coarse_fine_hs(&mi(&[2]), &mi(&[1, 1]), 1, 2),
            FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            coarse_fine_hs(&mi(&[2]), &mi(&[2, 0]), 1, 2),
            0.5,
            epsilon = 1e-15
        );
        assert_eq!(coarse_fine_hs(&mi(&[1, 1]), &mi(&[2, 0, 0, 0]), 2, 2), 0.0);
    }

    #[test]
    fn three_forms_agree_on_coarse_fine() {
        let g = GramMatrix::coarse_fine(2, 2).unwrap();
        for a in [mi(&[1, 2]), mi(&[3]), mi(&[2, 1])] {
            for a2 in crate::multiindex::enumerate_upto(4, 3).filter(|x| x.degree() == 3) {
                let b = hs_bruteforce(&a, &a2, &g).unwrap();
                let c = pairing_combinatorial(&a, &a2, &g).unwrap();
                let d = coarse_fine_hs(&a, &a2, 2, 2);
                assert_abs_diff_eq!(b, c, epsilon = 1e-12);
                assert_abs_diff_eq!(b, d, epsilon = 1e-12);
            }
        }
    }
}
