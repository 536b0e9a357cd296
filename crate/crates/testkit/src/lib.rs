//! Reference computations for tests. Nothing here calls into the library under test.

use nalgebra::DMatrix;
use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Normalized Hermite polynomial from the explicit sum
/// `He_m(x) = m! Σ_k (-1)^k x^{m-2k} / (k! (m-2k)! 2^k)`, divided by `√(m!)`.
pub fn hermite_explicit(m: u32, x: f64) -> f64 {
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    let mut sum = 0.0;
    for k in 0..=m / 2 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum +=
            sign * x.powi((m - 2 * k) as i32) / (fact(k) * fact(m - 2 * k) * 2f64.powi(k as i32));
    }
    sum * fact(m) / fact(m).sqrt()
}

/// `Σ |terms|` of the explicit sum, the scale of its rounding error.
pub fn hermite_explicit_magnitude(m: u32, x: f64) -> f64 {
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    let sum: f64 = (0..=m / 2)
        .map(|k| {
            x.abs().powi((m - 2 * k) as i32) / (fact(k) * fact(m - 2 * k) * 2f64.powi(k as i32))
        })
        .sum();
    sum * fact(m) / fact(m).sqrt()
}

pub fn normal_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Composite Simpson rule with `intervals` (even) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    assert!(intervals.is_multiple_of(2));
    let h = (b - a) / intervals as f64;
    let mut sum = f(a) + f(b);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

fn factorial_big(n: u32) -> BigUint {
    (1..=n).fold(BigUint::from(1u32), |acc, k| acc * k)
}

fn multi_factorial_big(a: &[u32]) -> BigUint {
    a.iter()
        .fold(BigUint::from(1u32), |acc, &k| acc * factorial_big(k))
}

fn big_ratio(num: &BigUint, den: &BigUint) -> f64 {
    // Both fit easily in f64 range for the sizes used in tests.
    let n: f64 = num.to_string().parse().unwrap();
    let d: f64 = den.to_string().parse().unwrap();
    n / d
}

/// Every composition of `total` into `parts` parts, by plain recursion.
pub fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// All fine vectors on `n0*n1` slots whose blocks of `n1` sum to the coarse entries.
pub fn matching_vectors(coarse: &[u32], n0: usize, n1: usize) -> Vec<Vec<u32>> {
    let mut padded = coarse.to_vec();
    padded.resize(n0, 0);
    let mut out = vec![vec![]];
    for &c in &padded {
        let blocks = compositions(c, n1);
        let mut next = Vec::new();
        for prefix in &out {
            for b in &blocks {
                let mut v: Vec<u32> = prefix.clone();
                v.extend_from_slice(b);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// `(Σ a!/a'!, Σ_{last nonzero of a' > n} a!/a'!)`, both divided by `n1^{|a|}`,
/// with exact integer sums.
pub fn matching_masses(coarse: &[u32], n0: usize, n1: usize, n: u32) -> (f64, f64) {
    let a_fact = multi_factorial_big(coarse);
    let degree: u32 = coarse.iter().sum();
    let scale = BigUint::from(n1 as u64).pow(degree);
    let mut total = BigUint::from(0u32);
    let mut tail = BigUint::from(0u32);
    for fine in matching_vectors(coarse, n0, n1) {
        // a!/a'! is an integer (multinomial coefficients per block).
        let term = &a_fact / multi_factorial_big(&fine);
        let last = fine.iter().rev().find(|&&x| x > 0).copied().unwrap_or(0);
        if last > n {
            tail += &term;
        }
        total += term;
    }
    (big_ratio(&total, &scale), big_ratio(&tail, &scale))
}

/// `‖Err_1‖²` of the untruncated digital `1_{[0,∞)}(W_1)` on `N` steps:
/// `1/4 − Σ_ℓ (1/N)/(2π√(1−t²))`, `t = (ℓ−1)/N`, from the conditional delta
/// `φ(W_t/√(1−t))/√(1−t)` and `E[e^{−W_t²/(1−t)}] = √((1−t)/(1+t))`.
pub fn digital_first_order_error_sq(steps: usize) -> f64 {
    let n = steps as f64;
    let hedged: f64 = (1..=steps)
        .map(|l| {
            let t = (l - 1) as f64 / n;
            (1.0 / n) / (2.0 * std::f64::consts::PI * (1.0 - t * t).sqrt())
        })
        .sum();
    0.25 - hedged
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn ols_loglog(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// A Haar-ish random orthogonal `d×d` matrix (QR of a Gaussian matrix).
pub fn random_rotation(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g: DMatrix<f64> = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    // Fix column signs so that diag(r) > 0.
    let mut q = q;
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Tensor Gauss-Hermite expectation `E[f(ξ)]` over `dim` standard normals.
pub fn tensor_expect<F: FnMut(&[f64]) -> f64>(
    nodes: &[f64],
    weights: &[f64],
    dim: usize,
    mut f: F,
) -> f64 {
    let q = nodes.len();
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for (k, &i) in idx.iter().enumerate() {
            x[k] = nodes[i];
            w *= weights[i];
        }
        total += w * f(&x);
        let mut k = 0;
        loop {
            if k == dim {
                return total;
            }
            idx[k] += 1;
            if idx[k] < q {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// `∏ H_{a_i}(x_i)` with the explicit-sum Hermite polynomials.
pub fn fourier_hermite(a: &[u32], x: &[f64]) -> f64 {
    a.iter()
        .zip(x)
        .map(|(&k, &xi)| hermite_explicit(k, xi))
        .product()
}
