use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chaos::{sobolev_weight, ChaosExpansion, GridSpec};
use crate::clark_ocone::tail_mass;
use crate::error::{invalid, Error, Result};
use crate::hermite::{self, QuadratureRule};
use crate::multiindex::{enumerate_upto, MultiIndex};

/// Extra Gauss-Hermite nodes beyond the truncation degree for smooth integrands.
const SMOOTH_QUADRATURE_MARGIN: usize = 8;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A functional of the Brownian path on `[0, T]`.
#[derive(Clone)]
pub enum Payoff {
    /// `f(W_T) = Σ_k p_k W_T^k`.
    Polynomial(Vec<f64>),
    /// `f(W_T)` for a smooth `f` of at most exponential growth.
    Smooth { label: String, f: RealFn },
    /// `1_{[K,∞)}(W_T)`.
    Digital { strike: f64 },
    /// `Σ_{i=1}^{N} 1_{[0,∞)}(W_{iT/N})·T/N` on the grid it is evaluated on.
    OccupationTime,
}

impl Payoff {
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Payoff::Polynomial(coeffs)
    }

    pub fn smooth(
        label: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Payoff::Smooth {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn digital(strike: f64) -> Self {
        Payoff::Digital { strike }
    }

    /// Whether the payoff depends on `W_T` alone.
    pub fn is_terminal(&self) -> bool {
        !matches!(self, Payoff::OccupationTime)
    }

    /// `f(x)` for terminal payoffs.
    pub fn terminal_value(&self, x: f64) -> Result<f64> {
        match self {
            Payoff::Polynomial(p) => Ok(horner(p, x)),
            Payoff::Smooth { f, .. } => Ok(f(x)),
            Payoff::Digital { strike } => Ok(if x >= *strike { 1.0 } else { 0.0 }),
            Payoff::OccupationTime => Err(invalid("occupation time is not a terminal payoff")),
        }
    }

    /// Value on the path with standardized increments `xi` on `grid`.
    pub fn evaluate_path(&self, grid: &GridSpec, xi: &[f64]) -> Result<f64> {
        if xi.len() != grid.steps() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} standardized increments, got {}",
                grid.steps(),
                xi.len()
            )));
        }
        let scale = grid.step_variance().sqrt();
        match self {
            Payoff::OccupationTime => {
                let mut w = 0.0;
                let mut hits = 0usize;
                for &x in xi {
                    w += scale * x;
                    if w >= 0.0 {
                        hits += 1;
                    }
                }
                Ok(hits as f64 * grid.step_variance())
            }
            _ => self.terminal_value(scale * xi.iter().sum::<f64>()),
        }
    }

    /// `E[f(W_T)]` for terminal payoffs.
    pub fn terminal_mean(&self, horizon: f64) -> Result<f64> {
        Ok(hermite_expand_terminal(self, horizon, 0)?[0])
    }
}

fn horner(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

impl fmt::Debug for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Payoff({self})")
    }
}

impl PartialEq for Payoff {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Payoff::Polynomial(a), Payoff::Polynomial(b)) => a == b,
            (Payoff::Smooth { label: a, .. }, Payoff::Smooth { label: b, .. }) => a == b,
            (Payoff::Digital { strike: a }, Payoff::Digital { strike: b }) => a == b,
            (Payoff::OccupationTime, Payoff::OccupationTime) => true,
            _ => false,
        }
    }
}

/// Round-trips through [`FromStr`].
impl fmt::Display for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payoff::Polynomial(p) => {
                let body: Vec<String> = p.iter().map(|c| c.to_string()).collect();
                write!(f, "poly:{}", body.join(";"))
            }
            Payoff::Smooth { label, .. } => f.write_str(label),
            Payoff::Digital { strike } => write!(f, "digital:{strike}"),
            Payoff::OccupationTime => f.write_str("occupation"),
        }
    }
}

/// Accepted forms: `poly:c0;c1;…` (commas also accepted), `const:v`,
/// `exp:λ` for `e^{λx}`, `cos:ω` for `cos(ωx)`, `digital:K` (`digital` means
/// `K = 0`) and `occupation`.
impl FromStr for Payoff {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (s, None),
        };
        let real = |text: Option<&str>| -> Result<f64> {
            let text =
                text.ok_or_else(|| Error::Parse(format!("payoff {s:?} needs a parameter")))?;
            let v: f64 = text
                .parse()
                .map_err(|e| Error::Parse(format!("bad payoff parameter {text:?}: {e}")))?;
            if !v.is_finite() {
                return Err(Error::Parse(format!(
                    "payoff parameter {text:?} is not finite"
                )));
            }
            Ok(v)
        };
        match kind {
            "poly" => {
                let text = arg.ok_or_else(|| Error::Parse("poly needs coefficients".into()))?;
                let coeffs = text
                    .split([';', ','])
                    .map(|t| real(Some(t.trim())))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Payoff::Polynomial(coeffs))
            }
            "const" => Ok(Payoff::Polynomial(vec![real(arg)?])),
            "exp" => {
                let lambda = real(arg)?;
                Ok(Payoff::smooth(format!("exp:{lambda}"), move |x| {
                    (lambda * x).exp()
                }))
            }
            "cos" => {
                let omega = real(arg)?;
                Ok(Payoff::smooth(format!("cos:{omega}"), move |x| {
                    (omega * x).cos()
                }))
            }
            "digital" => Ok(Payoff::Digital {
                strike: arg.map_or(Ok(0.0), |a| real(Some(a)))?,
            }),
            "occupation" if arg.is_none() => Ok(Payoff::OccupationTime),
            _ => Err(Error::Parse(format!("unknown payoff {s:?}"))),
        }
    }
}

/// `d_k = E[f(√T·Z)·H_k(Z)]` for `k = 0..=max_degree`.
///
/// Polynomials are converted exactly, smooth payoffs use Gauss-Hermite
/// quadrature and the digital uses the closed-form half-line integrals at `K/√T`.
pub fn hermite_expand_terminal(payoff: &Payoff, horizon: f64, max_degree: u32) -> Result<Vec<f64>> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(invalid(format!(
            "horizon must be positive and finite, got {horizon}"
        )));
    }
    let m = max_degree as usize;
    let root_t = horizon.sqrt();
    let coeffs = match payoff {
        Payoff::OccupationTime => {
            return Err(invalid("occupation time is not a terminal payoff"));
        }
        Payoff::Digital { strike } => {
            let k = strike / root_t;
            (0..=max_degree)
                .map(|j| hermite::hermite_indicator_integral(j, k))
                .collect()
        }
        Payoff::Polynomial(p) => polynomial_hermite(p, root_t, m),
        Payoff::Smooth { f, .. } => {
            let rule = QuadratureRule::gauss_hermite(m + SMOOTH_QUADRATURE_MARGIN)?;
            project(&rule, m, |z| f(root_t * z))
        }
    };
    if let Some(bad) = coeffs.iter().position(|c: &f64| !c.is_finite()) {
        return Err(Error::NonFinite(format!(
            "Hermite coefficient {bad} of {payoff}"
        )));
    }
    Ok(coeffs)
}

/// Hermite coefficients of `Σ_j p_j (σz)^j` by Horner's scheme in the
/// Hermite basis, using `z·H_k = √(k+1)·H_{k+1} + √k·H_{k-1}`.
fn polynomial_hermite(p: &[f64], sigma: f64, m: usize) -> Vec<f64> {
    let mut v: Vec<f64> = Vec::with_capacity(p.len());
    for (j, &c) in p.iter().enumerate().rev() {
        let mut next = vec![0.0; v.len() + 1];
        for (k, &x) in v.iter().enumerate() {
            next[k + 1] += (k as f64 + 1.0).sqrt() * x;
            if k > 0 {
                next[k - 1] += (k as f64).sqrt() * x;
            }
        }
        next[0] += c * sigma.powi(j as i32);
        v = next;
    }
    v.resize(m + 1, 0.0);
    v.truncate(m + 1);
    v
}

fn project<F: Fn(f64) -> f64>(rule: &QuadratureRule, m: usize, f: F) -> Vec<f64> {
    let mut out = vec![0.0; m + 1];
    let mut table = Vec::new();
    for (&z, &w) in rule.nodes().iter().zip(rule.weights()) {
        let fz = f(z);
        hermite::eval_table(m as u32, z, &mut table);
        for (o, h) in out.iter_mut().zip(&table) {
            *o += w * fz * h;
        }
    }
    out
}

/// Chaos expansion of a terminal payoff on `grid`, truncated at `max_degree`:
/// the one-step expansion refined onto `grid.steps()` slots.
pub fn coeffs_terminal(payoff: &Payoff, grid: GridSpec, max_degree: u32) -> Result<ChaosExpansion> {
    let d = hermite_expand_terminal(payoff, grid.horizon(), max_degree)?;
    one_step(grid.horizon(), &d)?.refine(grid.steps())
}

fn one_step(horizon: f64, d: &[f64]) -> Result<ChaosExpansion> {
    let coarse = GridSpec::new(horizon, 1)?;
    ChaosExpansion::new(
        coarse,
        d.iter()
            .enumerate()
            .map(|(k, &c)| (MultiIndex::unit(1, k as u32), c)),
    )
}

/// Expansion of the occupation time on `grid`: each `1_{[0,∞)}(W_{t_i})·T/N`
/// is a digital at horizon `t_i`, refined onto the first `i` slots.
pub fn coeffs_occupation_time(grid: GridSpec, max_degree: u32) -> Result<ChaosExpansion> {
    let digital = Payoff::digital(0.0);
    let weight = grid.step_variance();
    let mut total = ChaosExpansion::zero(grid);
    for i in 1..=grid.steps() {
        let d = hermite_expand_terminal(&digital, grid.time(i), max_degree)?;
        let summand = one_step(grid.time(i), &d)?.refine(i)?.embed(grid)?;
        total = total.add(&summand.scaled(weight))?;
    }
    Ok(total)
}

/// `‖Err_n(F)‖_{2,s}` for the occupation time on `grid`, truncated at `max_degree`,
/// without materializing its coefficients.
///
/// With `d_k` the digital-at-0 coefficients,
/// `‖Err_n‖² = (T/N)² Σ_{i,j} Σ_{k=n+1}^{M} (1+k)^s d_k² (min/max)^{k/2} S((k), n, min(i,j))`,
/// since the Hermite polynomial of `W_{t_i}` refines onto the first `i` slots only.
pub fn occupation_err_norm(grid: GridSpec, n: u32, s: f64, max_degree: u32) -> Result<f64> {
    let steps = grid.steps();
    let d = hermite_expand_terminal(&Payoff::digital(0.0), 1.0, max_degree)?;
    // tails[i-1][k] = (1+k)^s d_k² S((k), n, i)
    let mut tails = Vec::with_capacity(steps);
    for i in 1..=steps {
        let row = (0..=max_degree)
            .map(|k| {
                if k <= n {
                    return Ok(0.0);
                }
                let dk = d[k as usize];
                Ok(sobolev_weight(k, s) * dk * dk * tail_mass(&MultiIndex::unit(1, k), n, i)?)
            })
            .collect::<Result<Vec<f64>>>()?;
        tails.push(row);
    }
    let mut total = 0.0;
    for i in 1..=steps {
        // j == i
        total += tails[i - 1].iter().sum::<f64>();
        for j in i + 1..=steps {
            let ratio = i as f64 / j as f64;
            let cross: f64 = tails[i - 1]
                .iter()
                .enumerate()
                .map(|(k, t)| t * ratio.powf(0.5 * k as f64))
                .sum();
            total += 2.0 * cross;
        }
    }
    let w = grid.step_variance();
    Ok(w * total.sqrt())
}

/// A seeded random expansion on `1..=3` steps of `[0, 1]` with degree `0..=6`
/// and coefficients uniform in `[-1, 1]`; `case` selects an independent stream.
pub fn random_expansion(seed: u64, case: u64) -> ChaosExpansion {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(case);
    let steps = rng.random_range(1..=3usize);
    let degree = rng.random_range(0..=6u32);
    let grid = GridSpec::new(1.0, steps).expect("positive grid");
    let coeffs: Vec<(MultiIndex, f64)> = enumerate_upto(steps, degree)
        .map(|a| (a, rng.random_range(-1.0..=1.0)))
        .collect();
    ChaosExpansion::new(grid, coeffs).expect("indexes fit the grid")
}
