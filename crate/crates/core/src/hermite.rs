//! Normalized (probabilists') Hermite polynomials and Gauss-Hermite
//! quadrature for the standard normal weight.
//!
//! `H_m` here is orthonormal under the standard normal law:
//! `E[H_m(Z) H_n(Z)] = δ_mn`, so `H_m = He_m / √(m!)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::multiindex::MultiIndex;

/// `H_m(x)` via `√(k+1)·H_{k+1} = x·H_k − √k·H_{k−1}`.
pub fn eval_normalized(m: u32, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..m {
        let kf = k as f64;
        let next = (x * cur - kf.sqrt() * prev) / (kf + 1.0).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out` with `H_0(x), …, H_max(x)`.
pub fn eval_table(max: u32, x: f64, out: &mut Vec<f64>) {
    out.clear();
    out.reserve(max as usize + 1);
    out.push(1.0);
    if max == 0 {
        return;
    }
    out.push(x);
    for k in 1..max as usize {
        let kf = k as f64;
        let next = (x * out[k] - kf.sqrt() * out[k - 1]) / (kf + 1.0).sqrt();
        out.push(next);
    }
}

/// `H_a = ∏ᵢ H_{aᵢ}(ξᵢ)` at standardized increments `xi`.
pub fn eval_fourier_hermite(a: &MultiIndex, xi: &[f64]) -> Result<f64> {
    if xi.len() < a.support_len() {
        return Err(Error::DimensionMismatch(format!(
            "index {a} needs {} inputs, got {}",
            a.support_len(),
            xi.len()
        )));
    }
    Ok(a.entries()
        .iter()
        .zip(xi)
        .map(|(&m, &x)| if m == 0 { 1.0 } else { eval_normalized(m, x) })
        .product())
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `P(Z ≥ x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `∫_K^∞ H_m(x) φ(x) dx`.
///
/// For `m ≥ 1`, `He_m φ = −(He_{m−1} φ)'` gives `φ(K)·H_{m−1}(K)/√m`.
pub fn hermite_indicator_integral(m: u32, strike: f64) -> f64 {
    if m == 0 {
        return normal_sf(strike);
    }
    if strike.is_infinite() {
        return 0.0;
    }
    normal_pdf(strike) * eval_normalized(m - 1, strike) / (m as f64).sqrt()
}

/// Nodes and weights of a Gauss rule for the standard normal density.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// The `order`-point Gauss-Hermite rule; exact for polynomials of degree
    /// at most `2·order − 1`.
    ///
    /// Nodes come from the eigenvalues of the Jacobi matrix of the
    /// orthonormal recurrence (zero diagonal, `√k` off-diagonal). Each node is
    /// then polished with Newton steps on `H_order`, and weights are taken
    /// from the Christoffel formula `w = 1 / Σ_{k<order} H_k(x)²`.
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(invalid("quadrature order must be at least 1"));
        }
        let jacobi = DMatrix::from_fn(order, order, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64).sqrt()
            } else {
                0.0
            }
        });
        let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
        nodes.sort_by(|a, b| a.total_cmp(b));

        let q = order as u32;
        let mut table = Vec::new();
        for x in nodes.iter_mut() {
            for _ in 0..8 {
                eval_table(q, *x, &mut table);
                let value = table[order];
                let slope = (order as f64).sqrt() * table[order - 1];
                let step = value / slope;
                *x -= step;
                if step.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
        }
        let mut weights: Vec<f64> = nodes
            .iter()
            .map(|&x| {
                eval_table(q - 1, x, &mut table);
                1.0 / table.iter().map(|h| h * h).sum::<f64>()
            })
            .collect();

        // Enforce the reflection symmetry of the normal weight.
        for i in 0..order / 2 {
            let j = order - 1 - i;
            let x = 0.5 * (nodes[j] - nodes[i]);
            nodes[i] = -x;
            nodes[j] = x;
            let w = 0.5 * (weights[i] + weights[j]);
            weights[i] = w;
            weights[j] = w;
        }
        if order % 2 == 1 {
            nodes[order / 2] = 0.0;
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(QuadratureRule { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `E[f(Z)]` for a standard normal `Z`.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// `E[f(Z₁, …, Z_dim)]` over independent standard normals, using the
    /// tensor product of this rule.
    pub fn expect_tensor<F: FnMut(&[f64]) -> f64>(&self, dim: usize, mut f: F) -> f64 {
        let q = self.len();
        let mut counter = vec![0usize; dim];
        let mut point: Vec<f64> = vec![self.nodes[0]; dim];
        let mut total = 0.0;
        loop {
            let w: f64 = counter.iter().map(|&c| self.weights[c]).product();
            total += w * f(&point);
            let mut i = dim;
            loop {
                if i == 0 {
                    return total;
                }
                i -= 1;
                counter[i] += 1;
                if counter[i] < q {
                    point[i] = self.nodes[counter[i]];
                    break;
                }
                counter[i] = 0;
                point[i] = self.nodes[0];
            }
        }
    }
}

/// Convenience wrapper for [`QuadratureRule::gauss_hermite`].
pub fn gauss_hermite_rule(order: usize) -> Result<QuadratureRule> {
    QuadratureRule::gauss_hermite(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn low_order_values() {
        assert_eq!(eval_normalized(0, 3.7), 1.0);
        assert_eq!(eval_normalized(1, 1.5), 1.5);
        assert_abs_diff_eq!(
            eval_normalized(2, 0.0),
            -std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
    }

    #[test]
    fn recurrence_matches_closed_forms() {
        let mut x = -10.0;
        while x <= 10.0 {
            let h2 = (x * x - 1.0) / 2f64.sqrt();
            let h3 = (x * x * x - 3.0 * x) / 6f64.sqrt();
            assert!((eval_normalized(2, x) - h2).abs() <= 1e-13 * h2.abs().max(1.0));
            assert!((eval_normalized(3, x) - h3).abs() <= 1e-13 * h3.abs().max(1.0));
            x += 0.37;
        }
    }

    #[test]
    fn table_agrees_with_pointwise() {
        let mut t = Vec::new();
        eval_table(9, 1.3, &mut t);
        for (m, v) in t.iter().enumerate() {
            assert_abs_diff_eq!(*v, eval_normalized(m as u32, 1.3), epsilon = 1e-14);
        }
        eval_table(0, 2.0, &mut t);
        assert_eq!(t, vec![1.0]);
    }

    #[test]
    fn fourier_hermite_examples() {
        assert_eq!(eval_fourier_hermite(&MultiIndex::zero(), &[]).unwrap(), 1.0);
        let a = MultiIndex::new(vec![1, 1]);
        assert_abs_diff_eq!(
            eval_fourier_hermite(&a, &[2.0, 0.5]).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        let a = MultiIndex::new(vec![2]);
        assert_abs_diff_eq!(
            eval_fourier_hermite(&a, &[0.0, 4.0]).unwrap(),
            -std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        assert!(eval_fourier_hermite(&MultiIndex::new(vec![0, 0, 1]), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn small_rules() {
        let r1 = gauss_hermite_rule(1).unwrap();
        assert_eq!(r1.nodes(), &[0.0]);
        assert_abs_diff_eq!(r1.weights()[0], 1.0, epsilon = 1e-15);

        let r2 = gauss_hermite_rule(2).unwrap();
        assert_abs_diff_eq!(r2.nodes()[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r2.nodes()[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r2.weights()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r2.expect(|x| x * x), 1.0, epsilon = 1e-15);

        assert!(gauss_hermite_rule(0).is_err());
    }

    #[test]
    fn rules_are_exact_to_degree_2q_minus_1() {
        for q in 1..=40usize {
            let rule = gauss_hermite_rule(q).unwrap();
            assert_abs_diff_eq!(rule.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-14);
            assert!(rule.weights().iter().all(|&w| w > 0.0));
            assert!(rule.nodes().windows(2).all(|p| p[0] < p[1]));
            let odd = rule.expect(|x| x.powi(2 * q as i32 - 1));
            let magnitude = rule.expect(|x| x.abs().powi(2 * q as i32 - 1));
            assert!(
                odd.abs() <= 1e-14 * magnitude.max(1.0),
                "q={q}: {odd} vs {magnitude}"
            );
            for &x in rule.nodes() {
                let scale: f64 = (0..=q as u32).map(|k| eval_normalized(k, x).abs()).sum();
                assert!(eval_normalized(q as u32, x).abs() <= 1e-14 * scale.max(1.0));
            }
        }
        // Even moments E[Z^{2k}] = (2k-1)!!
        let rule = gauss_hermite_rule(6).unwrap();
        let mut dfact = 1.0;
        for k in 1..6 {
            dfact *= (2 * k - 1) as f64;
            assert_abs_diff_eq!(
                rule.expect(|x| x.powi(2 * k)),
                dfact,
                epsilon = 1e-10 * dfact
            );
        }
    }

    #[test]
    fn indicator_integral_values() {
        assert_abs_diff_eq!(hermite_indicator_integral(0, 0.0), 0.5, epsilon = 1e-16);
        assert_abs_diff_eq!(
            hermite_indicator_integral(1, 0.0),
            1.0 / (2.0 * PI).sqrt(),
            epsilon = 1e-16
        );
        assert_eq!(hermite_indicator_integral(2, 0.0), 0.0);
        for m in 0..=12 {
            let expected = if m == 0 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(
                hermite_indicator_integral(m, -12.0),
                expected,
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(hermite_indicator_integral(m, 40.0), 0.0, epsilon = 1e-300);
        }
    }

    #[test]
    fn indicator_integral_matches_composite_quadrature() {
        // Composite Gauss-Legendre-free check: Simpson on [K, K + 16] of a smooth integrand.
        fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
            let h = (b - a) / n as f64;
            let mut s = f(a) + f(b);
            for i in 1..n {
                let x = a + i as f64 * h;
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
            }
            s * h / 3.0
        }
        for &k in &[-2.5, -0.3, 0.0, 0.7, 1.9] {
            for m in 0..=10 {
                let numeric = simpson(
                    |x| eval_normalized(m, x) * normal_pdf(x),
                    k,
                    k + 16.0,
                    20_000,
                );
                assert_abs_diff_eq!(hermite_indicator_integral(m, k), numeric, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn tensor_expectation() {
        let rule = gauss_hermite_rule(4).unwrap();
        let v = rule.expect_tensor(3, |x| x[0] * x[0] * x[1] * x[1] + x[2]);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
    }
}
