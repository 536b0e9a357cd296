//! The twelve acceptance criteria. Each returns a verdict with the measured
//! quantities; `tests/acceptance.rs` runs them all and prints one line apiece.

use std::time::{Duration, Instant};

use clark_ocone::chaos::{coarse_fine_hs, hs_bruteforce, pairing_combinatorial, GramMatrix};
use clark_ocone::clark_ocone::{
    decompose, err_norm_refined, tail_mass, tail_mass_bound, verify_bound,
};
use clark_ocone::cli::main_with_args;
use clark_ocone::hermite::{eval_normalized, gauss_hermite_rule};
use clark_ocone::montecarlo::{
    coeffs_terminal, hedge_sweep, random_expansion, rate_sweep, sample_paths, tracking_error_hedge,
};
use clark_ocone::multiindex::{enumerate_matching, enumerate_upto};
use clark_ocone::{ChaosExpansion, GridSpec, MultiIndex, Payoff};
use num_bigint::BigUint;

pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within_budget(start: Instant, budget: Duration) -> (bool, String) {
    let elapsed = start.elapsed();
    (
        elapsed <= budget,
        format!("{:.2}s of {}s", elapsed.as_secs_f64(), budget.as_secs()),
    )
}

const POWERS_4_256: [usize; 7] = [4, 8, 16, 32, 64, 128, 256];

fn hermite_orthonormality() -> Outcome {
    let start = Instant::now();
    let rule = gauss_hermite_rule(30).unwrap();
    let mut worst: f64 = 0.0;
    for m in 0..=12u32 {
        for n in 0..=12u32 {
            let q = rule.expect(|x| eval_normalized(m, x) * eval_normalized(n, x));
            let delta = if m == n { 1.0 } else { 0.0 };
            worst = worst.max((q - delta).abs());
        }
    }
    let (fast, time) = within_budget(start, Duration::from_secs(1));
    outcome(
        worst < 1e-12 && fast,
        format!("max |<H_m,H_n> - delta| = {worst:.2e}, {time}"),
    )
}

/// Index list with `dim` slots and degree in `1..=max`.
fn indexes(dim: usize, max: u32) -> Vec<MultiIndex> {
    enumerate_upto(dim, max).filter(|a| !a.is_zero()).collect()
}

fn pairing_oracles() -> Outcome {
    let start = Instant::now();
    let rule = gauss_hermite_rule(5).unwrap();
    let mut worst_comb: f64 = 0.0;
    let mut worst_quad: f64 = 0.0;
    let mut pairs = 0usize;

    for n0 in 1..=2usize {
        for n1 in 1..=3usize {
            let gram = GramMatrix::coarse_fine(n0, n1).unwrap();
            let coarse = indexes(n0, 4);
            let fine = indexes(n0 * n1, 4);
            // quad[i][j] = E[H_{coarse_i}(ξ) H_{fine_j}(ξ')] with ξ_k = Σ_block ξ'_j / √n1.
            let mut quad = vec![vec![0.0; fine.len()]; coarse.len()];
            let scale = 1.0 / (n1 as f64).sqrt();
            let total_nodes = rule.len().pow((n0 * n1) as u32);
            let mut hc = vec![0.0; coarse.len()];
            let mut hf = vec![0.0; fine.len()];
            let q = rule.len();
            let dim = n0 * n1;
            let mut idx = vec![0usize; dim];
            let mut x = vec![0.0; dim];
            for _ in 0..total_nodes {
                let mut w = 1.0;
                for (k, &i) in idx.iter().enumerate() {
                    x[k] = rule.nodes()[i];
                    w *= rule.weights()[i];
                }
                let xc: Vec<f64> = x
                    .chunks(n1)
                    .map(|b| b.iter().sum::<f64>() * scale)
                    .collect();
                for (v, a) in hc.iter_mut().zip(&coarse) {
                    *v = testkit::fourier_hermite(a.entries(), &xc);
                }
                for (v, a) in hf.iter_mut().zip(&fine) {
                    *v = testkit::fourier_hermite(a.entries(), &x);
                }
                for (row, &c) in quad.iter_mut().zip(&hc) {
                    for (cell, &f) in row.iter_mut().zip(&hf) {
                        *cell += w * c * f;
                    }
                }
                for i in idx.iter_mut() {
                    *i += 1;
                    if *i < q {
                        break;
                    }
                    *i = 0;
                }
            }
            for (i, a) in coarse.iter().enumerate() {
                for (j, b) in fine.iter().enumerate() {
                    if a.degree() != b.degree() {
                        continue;
                    }
                    pairs += 1;
                    let brute = hs_bruteforce(a, b, &gram).unwrap();
                    let comb = pairing_combinatorial(a, b, &gram).unwrap();
                    worst_comb = worst_comb.max((brute - comb).abs());
                    worst_quad = worst_quad
                        .max((brute - quad[i][j]).abs())
                        .max((comb - quad[i][j]).abs());
                }
            }
        }
    }

    let all3 = indexes(3, 4);
    for seed in 0..20u64 {
        let q = testkit::random_rotation(3, 1000 + seed);
        let data: Vec<f64> = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| q[(i, j)])
            .collect();
        let gram = GramMatrix::new(3, 3, data).unwrap();
        // W(h'_j) = Σ_i g_ij ξ_i.
        let mut quad = vec![vec![0.0; all3.len()]; all3.len()];
        for (i, a) in all3.iter().enumerate() {
            for (j, b) in all3.iter().enumerate() {
                if a.degree() != b.degree() {
                    continue;
                }
                quad[i][j] = testkit::tensor_expect(rule.nodes(), rule.weights(), 3, |x| {
                    let xp: Vec<f64> = (0..3)
                        .map(|c| (0..3).map(|r| q[(r, c)] * x[r]).sum())
                        .collect();
                    testkit::fourier_hermite(a.entries(), x)
                        * testkit::fourier_hermite(b.entries(), &xp)
                });
            }
        }
        for (i, a) in all3.iter().enumerate() {
            for (j, b) in all3.iter().enumerate() {
                if a.degree() != b.degree() {
                    continue;
                }
                pairs += 1;
                let brute = hs_bruteforce(a, b, &gram).unwrap();
                let comb = pairing_combinatorial(a, b, &gram).unwrap();
                worst_comb = worst_comb.max((brute - comb).abs());
                worst_quad = worst_quad
                    .max((brute - quad[i][j]).abs())
                    .max((comb - quad[i][j]).abs());
            }
        }
    }
    let (fast, time) = within_budget(start, Duration::from_secs(30));
    outcome(
        worst_comb <= 1e-10 && worst_quad <= 1e-8 && fast,
        format!("{pairs} pairs, combinatorial vs brute {worst_comb:.2e}, vs quadrature {worst_quad:.2e}, {time}"),
    )
}

fn coarse_fine_closed_form() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut nonmatching = 0usize;
    let mut exact_zero = true;
    for n0 in 1..=2usize {
        for n1 in 1..=3usize {
            let gram = GramMatrix::coarse_fine(n0, n1).unwrap();
            for a in enumerate_upto(n0, 4) {
                for b in enumerate_upto(n0 * n1, 4).filter(|b| b.degree() == a.degree()) {
                    let closed = coarse_fine_hs(&a, &b, n0, n1);
                    let brute = hs_bruteforce(&a, &b, &gram).unwrap();
                    worst = worst.max((closed - brute).abs());
                    if !b.matches(&a, n0, n1) {
                        nonmatching += 1;
                        exact_zero &= closed == 0.0 && brute == 0.0;
                    }
                }
            }
        }
    }
    outcome(
        worst <= 1e-12 && exact_zero,
        format!("max deviation {worst:.2e}, {nonmatching} non-matching pairs exactly zero: {exact_zero}"),
    )
}

fn refinement_mass() -> Outcome {
    let mut worst_total: f64 = 0.0;
    let mut bound_violations = 0usize;
    let mut checks = 0usize;
    for n0 in 1..=2usize {
        for n1 in 1..=4usize {
            for a in indexes(n0, 6) {
                let a_fact = a.factorial();
                let scale = BigUint::from(n1 as u64).pow(a.degree());
                let mut total = BigUint::from(0u32);
                for b in enumerate_matching(&a, n0, n1) {
                    total += &a_fact / b.factorial();
                }
                let ratio = total.to_string().parse::<f64>().unwrap()
                    / scale.to_string().parse::<f64>().unwrap();
                worst_total = worst_total.max((ratio - 1.0).abs());
                for n in 1..=6u32 {
                    let s = tail_mass(&a, n, n1).unwrap();
                    for r in [0.0, 0.25, 0.5, 0.75, 1.0] {
                        checks += 1;
                        if s > tail_mass_bound(&a, n, n1, r).unwrap() {
                            bound_violations += 1;
                        }
                    }
                }
            }
        }
    }
    outcome(
        worst_total <= 1e-12 && bound_violations == 0,
        format!("max |mass - 1| = {worst_total:.2e}, {bound_violations} of {checks} bound checks violated"),
    )
}

fn tail_mass_closed_form() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0usize;
    for n0 in 1..=2usize {
        for n1 in 1..=4usize {
            for a in indexes(n0, 6) {
                for n in 1..=6u32 {
                    let (_, brute) = testkit::matching_masses(a.entries(), n0, n1, n);
                    worst = worst.max((tail_mass(&a, n, n1).unwrap() - brute).abs());
                    cases += 1;
                }
            }
        }
    }
    outcome(
        worst <= 1e-12,
        format!("{cases} cases, max deviation {worst:.2e}"),
    )
}

fn refined_error_bound() -> Outcome {
    let start = Instant::now();
    let mut failures = 0usize;
    let mut cases = 0usize;
    let mut tightest = f64::INFINITY;
    for case in 0..100u64 {
        let f = random_expansion(2024, case);
        for n in 1..=3u32 {
            for n1 in [1usize, 2, 4, 8] {
                for s in [-1.0, 0.0, 1.0] {
                    for r in [0.0, 0.5, 1.0] {
                        let check = verify_bound(&f, n, n1, s, r).unwrap();
                        cases += 1;
                        if !check.holds {
                            failures += 1;
                        }
                        if check.rhs > 0.0 {
                            tightest = tightest.min(check.slack / check.rhs);
                        }
                    }
                }
            }
        }
    }
    let mut slope_detail = Vec::new();
    let mut slopes_ok = true;
    for m in 3..=5u32 {
        let f = ChaosExpansion::new(
            GridSpec::new(1.0, 1).unwrap(),
            [(MultiIndex::unit(1, m), 1.0)],
        )
        .unwrap();
        for n in 1..m {
            let points: Vec<(f64, f64)> = POWERS_4_256
                .iter()
                .map(|&n1| (n1 as f64, err_norm_refined(&f, n, n1, 0.0).unwrap()))
                .collect();
            let slope = testkit::ols_loglog(&points);
            let ok = (slope + n as f64 / 2.0).abs() <= 0.1;
            slopes_ok &= ok;
            slope_detail.push(format!("m={m},n={n}:{slope:.3}"));
        }
    }
    let (fast, time) = within_budget(start, Duration::from_secs(60));
    outcome(
        failures == 0 && slopes_ok && fast,
        format!(
            "{failures} of {cases} bound checks failed, min relative slack {tightest:.3e}; slopes {}; {time}",
            slope_detail.join(" ")
        ),
    )
}

fn decompose_reconstruct() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut support_mismatch = 0usize;
    for case in 0..1000u64 {
        let f = random_expansion(77, case);
        let back = decompose(&f).reconstruct().unwrap();
        if back.len() != f.len() {
            support_mismatch += 1;
        }
        for (a, c) in f.iter() {
            worst = worst.max((back.coeff(a) - c).abs());
        }
    }
    outcome(
        worst <= 1e-14 && support_mismatch == 0,
        format!("1000 expansions, max coefficient deviation {worst:.2e}, {support_mismatch} support mismatches"),
    )
}

fn quadratic_tracking_error() -> Outcome {
    let grid = GridSpec::new(1.0, 4).unwrap();
    let batch = sample_paths(grid, 100_000, 42).unwrap();
    let e = tracking_error_hedge(&"poly:0,0,1".parse().unwrap(), &batch).unwrap();
    let exact = std::f64::consts::FRAC_1_SQRT_2;
    let z = (e.estimate - exact) / e.std_error;
    outcome(
        z.abs() <= 3.0,
        format!(
            "estimate {:.5} +- {:.5} vs {exact:.5} ({z:+.2} standard errors)",
            e.estimate, e.std_error
        ),
    )
}

fn digital_rate() -> Outcome {
    let start = Instant::now();
    let report = rate_sweep(
        &Payoff::digital(0.0),
        1,
        0.0,
        1.0,
        &POWERS_4_256,
        1,
        1.0,
        20,
    )
    .unwrap();
    let slope = report.fitted_slope.unwrap_or(f64::NAN);
    let untruncated: Vec<(f64, f64)> = POWERS_4_256
        .iter()
        .map(|&n| (n as f64, testkit::digital_first_order_error_sq(n).sqrt()))
        .collect();
    let reference = testkit::ols_loglog(&untruncated);
    let (fast, time) = within_budget(start, Duration::from_secs(60));
    outcome(
        (-0.35..=-0.15).contains(&slope) && fast,
        format!(
            "degree-20 slope {slope:.4} (band [-0.35, -0.15]); untruncated closed-form slope {reference:.4}; {time}"
        ),
    )
}

fn occupation_rate() -> Outcome {
    let report = hedge_sweep(&Payoff::OccupationTime, 1.0, &[4, 8, 16, 32, 64], 1, 0, 20).unwrap();
    let slope = report.fitted_slope.unwrap_or(f64::NAN);
    outcome(
        (-0.65..=-0.35).contains(&slope),
        format!("slope {slope:.4} (band [-0.65, -0.35])"),
    )
}

fn perfect_control_variate() -> Outcome {
    let grid = GridSpec::new(1.0, 4).unwrap();
    let batch = sample_paths(grid, 10_000, 11).unwrap();
    let polys = [
        "poly:0.3,-1",
        "poly:1,0,1",
        "poly:-0.5,2,0.25,1",
        "poly:0,0,0,0,1",
        "poly:1,1,1,1,1,-0.2",
    ];
    let mut worst_var: f64 = 0.0;
    let mut worst_abs: f64 = 0.0;
    for spec in polys {
        let payoff: Payoff = spec.parse().unwrap();
        let d = match &payoff {
            Payoff::Polynomial(p) => p.len() as u32 - 1,
            _ => unreachable!(),
        };
        let f = coeffs_terminal(&payoff, grid, d).unwrap();
        let dec = decompose(&f);
        for n in [d.max(1), d + 2] {
            let diffs: Vec<f64> = batch
                .paths()
                .map(|xi| {
                    payoff.evaluate_path(&grid, xi).unwrap()
                        - dec.evaluate_truncated(xi, n).unwrap()
                })
                .collect();
            let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
            let var =
                diffs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
            worst_var = worst_var.max(var);
            worst_abs = worst_abs.max(diffs.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        }
    }
    outcome(
        worst_var <= 1e-12,
        format!("max residual variance {worst_var:.2e}, max pathwise residual {worst_abs:.2e}"),
    )
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 6] = [
        &[
            "expand",
            "--payoff",
            "digital:0",
            "--max-degree",
            "6",
            "--N0",
            "2",
        ],
        &[
            "decompose",
            "--payoff",
            "exp:0.5",
            "--max-degree",
            "5",
            "--N0",
            "2",
        ],
        &[
            "verify-bound",
            "--payoff",
            "random:20",
            "--order-n",
            "1,2",
            "--N1-list",
            "1,2,4",
            "--interp-r",
            "0,0.5,1",
        ],
        &["rate-sweep", "--payoff", "digital:0.3"],
        &[
            "simulate-hedge",
            "--payoff",
            "poly:0,0,1",
            "--N1-list",
            "2,4,8",
            "--samples",
            "20000",
        ],
        &[
            "simulate-hedge",
            "--payoff",
            "occupation",
            "--N1-list",
            "4,8,16",
        ],
    ];
    let mut mismatches = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for (k, workers) in ["1", "1", "4", "4"].iter().enumerate() {
            let out = dir.path().join(format!("run{i}_{k}.csv"));
            let mut argv: Vec<std::ffi::OsString> = vec!["clark-ocone".into()];
            argv.extend(args.iter().map(Into::into));
            argv.extend([
                "--workers".into(),
                (*workers).into(),
                "--out".into(),
                out.clone().into_os_string(),
            ]);
            let code = main_with_args(argv);
            assert_eq!(code, 0, "{args:?} exited with {code}");
            outputs.push(std::fs::read(&out).unwrap());
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            mismatches.push(args[0]);
        }
    }
    outcome(
        mismatches.is_empty(),
        format!(
            "{} configurations x workers {{1,1,4,4}}, differing: {mismatches:?}",
            runs.len()
        ),
    )
}

pub type Criterion = (&'static str, fn() -> Outcome);

/// In numbering order.
pub const CRITERIA: [Criterion; 12] = [
    ("Hermite orthonormality", hermite_orthonormality),
    ("pairing oracle equivalence", pairing_oracles),
    ("coarse/fine closed form", coarse_fine_closed_form),
    ("refinement mass and tail bound", refinement_mass),
    ("tail mass closed form", tail_mass_closed_form),
    ("refined error bound", refined_error_bound),
    ("decompose/reconstruct identity", decompose_reconstruct),
    ("quadratic tracking error", quadratic_tracking_error),
    ("digital first-order rate", digital_rate),
    ("occupation-time rate", occupation_rate),
    ("perfect control variate", perfect_control_variate),
    ("CLI determinism", cli_determinism),
];
