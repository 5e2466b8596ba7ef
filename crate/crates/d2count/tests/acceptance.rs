//! Acceptance suite.
//!
//! Runs the ten acceptance criteria in order and prints one `PASS`/`FAIL`
//! line for each; the process exits non-zero if any criterion fails.  Pass
//! criterion numbers to run a subset:
//!
//! ```text
//! cargo test --test z_acceptance -- 4 7
//! ```

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rug::{Float, Rational};

use common::{
    dense_general, dense_multilinear, erdos_renyi, r, random_symmetric, rng, sparse_multilinear,
    TestRng,
};
use d2count::boolcount::{count_boolean, count_boolean_regular};
use d2count::decouple::{
    approximate_decompose, check_trace_invariants, construct_junta, DecomposeKind,
};
use d2count::gausscount::{
    count_gaussian, dp_count, dp_table_with, normal_cover, DiscreteSupport, DpStrategy,
};
use d2count::harness::{
    brute_force_boolean, for_each_cube_value, jacobi_eigenvalues, mc_gaussian, normal_cdf_hp,
    RunReport,
};
use d2count::moments::absolute_moment;
use d2count::poly::{graph_cut_poly, raw_moment_exact, Degree2Polynomial, SymmetricMatrix};
use d2count::spectral::{approximate_largest_eigen, EigenKind};
use d2count::Config;

/// `Ok(summary)` on pass, `Err(reason)` on failure.
type Outcome = Result<String, String>;

const ORACLE_BITS: u32 = 256;

fn main() {
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "boolean counting vs enumeration", boolean_vs_enumeration),
        (
            2,
            "gaussian counting vs monte carlo",
            gaussian_vs_monte_carlo,
        ),
        (
            3,
            "regular fast path on dense graphs",
            regular_fast_path_on_graphs,
        ),
        (4, "spectral guarantees", spectral_guarantees),
        (5, "decompose contracts", decompose_contracts),
        (6, "junta loop invariants", junta_invariants),
        (7, "dp exactness", dp_exactness),
        (8, "cover certification", cover_certification),
        (9, "absolute moments", absolute_moments),
        (10, "determinism", determinism),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(summary) => println!("criterion {id:>2} PASS  {name} ({secs:.1}s): {summary}"),
            Err(reason) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name} ({secs:.1}s): {reason}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn fail<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> String + '_ {
    move |e| format!("{context}: {e}")
}

/// Criterion 1: `count_boolean` within eps of enumeration on 200 random
/// polynomials, under ten minutes in total.
fn boolean_vs_enumeration() -> Outcome {
    let cfg = Config::default();
    let eps = r(15, 100);
    let mut g = rng(0xB001);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for i in 0..200 {
        let n = g.gen_range(10..=16);
        let p = dense_multilinear(&mut g, n, 8);
        let est = count_boolean(&p, &eps, &cfg)
            .map_err(fail("count_boolean"))?
            .value;
        let exact = brute_force_boolean(&p, cfg.oracle.enum_cap, |v| *v >= 0)
            .map_err(fail("enumeration"))?;
        let err = Rational::from(&est - &exact).abs();
        worst = worst.max(err.to_f64());
        if err > eps {
            bad.push(format!(
                "#{i} (n = {n}): {} vs {}",
                est.to_f64(),
                exact.to_f64()
            ));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if !bad.is_empty() {
        return Err(format!(
            "{} instances off by more than 0.15: {}",
            bad.len(),
            bad.join("; ")
        ));
    }
    if secs > 600.0 {
        return Err(format!("all 200 within 0.15 but took {secs:.0}s (> 600s)"));
    }
    Ok(format!(
        "200/200 within 0.15, max error {worst:.4}, {secs:.1}s"
    ))
}

/// Criterion 2: `count_gaussian` within `0.1 + 3 SE` of a 10^6-sample Monte
/// Carlo estimate on 100 random polynomials.
fn gaussian_vs_monte_carlo() -> Outcome {
    let cfg = Config::default();
    let eps = r(1, 10);
    let mut g = rng(0x6A55);
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for i in 0..100 {
        let n = g.gen_range(10..=50);
        let p = dense_general(&mut g, n, 8);
        let est = count_gaussian(&p, &eps, &cfg)
            .map_err(fail("count_gaussian"))?
            .value
            .to_f64();
        let mc = mc_gaussian(&p, &cfg.oracle, |v| v >= 0.0);
        let err = (est - mc.estimate).abs();
        worst = worst.max(err);
        if err > 0.1 + 3.0 * mc.std_error {
            bad.push(format!(
                "#{i} (n = {n}): {est} vs {} ± {}",
                mc.estimate, mc.std_error
            ));
        }
    }
    if !bad.is_empty() {
        return Err(format!(
            "{} instances outside tolerance: {}",
            bad.len(),
            bad.join("; ")
        ));
    }
    Ok(format!(
        "100/100 within 0.1 + 3 SE, max |difference| {worst:.4}"
    ))
}

fn cli_value(args: &[&str]) -> Result<f64, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_d2count"))
        .args(args)
        .output()
        .map_err(fail("spawn"))?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).trim().to_string());
    }
    String::from_utf8_lossy(&out.stdout)
        .trim()
        .parse()
        .map_err(fail("stdout"))
}

/// Criterion 3: on Erdős–Rényi graphs with `|E| >= 20 n` and `n <= 16`,
/// `cut-fraction` is within 0.1 of enumeration and the regular counter is
/// within `2 eps` of the general one.
fn regular_fast_path_on_graphs() -> Outcome {
    let eps = r(1, 10);
    let cfg = Config::default();
    let mut g = rng(0xC07);
    let dir = tempfile::tempdir().map_err(fail("tempdir"))?;
    let mut admissible = 0;
    let mut cli_bad = Vec::new();
    let mut regular_bad = Vec::new();
    let mut checked = 0;
    for n in 2..=16usize {
        for density in [0.5, 0.9, 1.0] {
            let graph = erdos_renyi(&mut g, n, density);
            if graph.edges().len() >= 20 * n {
                admissible += 1;
            }
            if n < 8 {
                continue;
            }
            // Exact cut-size distribution.
            let mut hist = vec![0u64; graph.edges().len() + 1];
            let mut x = vec![1i8; n];
            for mask in 0u64..(1 << n) {
                for (i, xi) in x.iter_mut().enumerate() {
                    *xi = if mask >> i & 1 == 1 { -1 } else { 1 };
                }
                hist[graph.cut_size(&x)] += 1;
            }
            let path = dir.path().join(format!("g{n}_{density}.edges"));
            let text: String = graph
                .edges()
                .iter()
                .map(|(u, v)| format!("{} {}\n", u + 1, v + 1))
                .collect();
            std::fs::write(&path, format!("n {n}\n{text}")).map_err(fail("write"))?;
            let m = graph.edges().len();
            for t in [m / 4, m / 2, (2 * m) / 3] {
                checked += 1;
                let exact = hist[t..].iter().sum::<u64>() as f64 / (1u64 << n) as f64;
                let path_s = path.to_str().unwrap();
                match cli_value(&[
                    "cut-fraction",
                    "--graph",
                    path_s,
                    "--threshold",
                    &t.to_string(),
                    "--eps",
                    "0.1",
                ]) {
                    Ok(v) if (v - exact).abs() <= 0.1 => {}
                    Ok(v) => cli_bad.push(format!("n = {n}, T = {t}: {v} vs {exact}")),
                    Err(e) => cli_bad.push(format!("n = {n}, T = {t}: {e}")),
                }
                let p = graph_cut_poly(&graph).shifted(&Rational::from(-(t as i64)));
                let general = count_boolean(&p, &eps, &cfg)
                    .map_err(fail("count_boolean"))?
                    .value;
                match count_boolean_regular(&p, &eps, &cfg) {
                    Ok(reg)
                        if Rational::from(&reg.value - &general).abs()
                            <= Rational::from(&eps * 2u32) => {}
                    Ok(reg) => regular_bad.push(format!(
                        "n = {n}, T = {t}: {} vs {}",
                        reg.value.to_f64(),
                        general.to_f64()
                    )),
                    Err(_) => regular_bad.push(format!("n = {n}, T = {t}: not regular")),
                }
            }
        }
    }
    let summary = format!(
        "{admissible} admissible graphs (|E| >= 20n needs n >= 41, but n <= 16 allows at most 120 edges); \
         on {checked} dense stand-ins: cut-fraction off in {} cases, regular counter unavailable or off in {} cases{}",
        cli_bad.len(),
        regular_bad.len(),
        regular_bad.first().map(|s| format!(" (e.g. {s})")).unwrap_or_default()
    );
    if admissible == 0 || !cli_bad.is_empty() || !regular_bad.is_empty() {
        return Err(summary);
    }
    Ok(summary)
}

fn oracle_lambda_max(a: &SymmetricMatrix) -> Float {
    let eig = jacobi_eigenvalues(a, ORACLE_BITS);
    let lo = Float::with_val(ORACLE_BITS, eig.first().expect("n >= 1").abs_ref());
    let hi = Float::with_val(ORACLE_BITS, eig.last().expect("n >= 1").abs_ref());
    lo.max(&hi)
}

/// Slack for the eigenvalue oracle's own error.
fn oracle_slack(a: &SymmetricMatrix) -> Float {
    Float::with_val(ORACLE_BITS, a.frobenius_sq()).sqrt() >> (ORACLE_BITS as i32 - 40)
}

fn spectral_cases(g: &mut TestRng) -> Vec<SymmetricMatrix> {
    let mut cases = Vec::new();
    for _ in 0..500 {
        let n = g.gen_range(1..=50);
        cases.push(random_symmetric(g, n, 8));
    }
    let diag = |d: &[i64]| {
        SymmetricMatrix::diagonal(&d.iter().map(|&v| Rational::from(v)).collect::<Vec<_>>())
    };
    cases.push(diag(&[1]));
    cases.push(diag(&[3, -3, 1]));
    cases.push(diag(&[1, 1, 1, 1, 1, 1]));
    cases.push(diag(&[-7, 2, 2, 0, 5]));
    cases.push(diag(&[100, 99, 98, 0, 0, 0, 0, 1]));
    cases.push(diag(&(1..=40).collect::<Vec<_>>()));
    for (n, sign) in [(2usize, 1i64), (5, -1), (17, 1), (50, -1)] {
        let v: Vec<Rational> = (0..n)
            .map(|i| Rational::from((i as i64 % 5) - 2 + sign * 3))
            .collect();
        let rank1 = SymmetricMatrix::from_fn(n, |i, j| Rational::from(&v[i] * &v[j]) * sign);
        let noisy = SymmetricMatrix::from_fn(n, |i, j| {
            Rational::from(&v[i] * &v[j]) * sign
                + Rational::from((((i * 7 + j * 7) % 3) as i64 - 1, 50))
        });
        cases.push(rank1);
        cases.push(noisy);
    }
    cases
}

/// Criterion 4: every eigenpair meets its three guarantees.
fn spectral_guarantees() -> Outcome {
    let cfg = Config::default();
    let mut g = rng(0x5BEC);
    let cases = spectral_cases(&mut g);
    let params = [
        (r(1, 2), r(1, 2)),
        (r(1, 2), r(1, 8)),
        (r(1, 4), r(1, 4)),
        (r(1, 8), r(1, 16)),
        (r(3, 10), r(1, 100)),
    ];
    let (mut pairs, mut small) = (0, 0);
    let mut bad = Vec::new();
    for (idx, a) in cases.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        let (eps, eta) = &params[idx % params.len()];
        let res = approximate_largest_eigen(a, eps, eta, &cfg.spectral).map_err(fail("eigen"))?;
        if res.kind == EigenKind::SmallMaxEigenvalue {
            small += 1;
            continue;
        }
        pairs += 1;
        let lambda = res.lambda_tilde.clone().expect("pair");
        let w = res.w_tilde.clone().expect("pair");
        let fro_sq = a.frobenius_sq();
        // (i) (1 - eta)|lambda_max| <= lambda~ <= |lambda_max|.
        let top = oracle_lambda_max(a);
        let slack = oracle_slack(a);
        let lam_f = Float::with_val(ORACLE_BITS, &lambda);
        let lower = Float::with_val(
            ORACLE_BITS,
            &top * Float::with_val(ORACLE_BITS, 1 - eta.clone()),
        );
        if lam_f.clone() + &slack < lower || lam_f > Float::with_val(ORACLE_BITS, &top + &slack) {
            bad.push(format!("case {idx}: lambda~ = {} outside [(1-eta)|lambda_max|, |lambda_max|], |lambda_max| = {}", lambda.to_f64(), top.to_f64()));
        }
        // (ii) ||B~ w~|| < eta ||A||_F.
        let b = res.b_tilde(a).expect("pair");
        let bw: Rational = b
            .mul_vec(&w)
            .iter()
            .map(|x| Rational::from(x.square_ref()))
            .sum();
        if bw >= Rational::from(eta.square_ref()) * &fro_sq {
            bad.push(format!(
                "case {idx}: ||B~w~||^2 = {} not below eta^2 ||A||_F^2",
                bw.to_f64()
            ));
        }
        // (iii) ||B~||_F <= (1 - eps^2/40) ||A||_F.
        let shrink = Rational::from(1) - Rational::from(eps.square_ref()) / 40u32;
        if b.frobenius_sq() > shrink.square() * &fro_sq {
            bad.push(format!(
                "case {idx}: ||B~||_F^2 = {} too large",
                b.frobenius_sq().to_f64()
            ));
        }
    }
    if !bad.is_empty() {
        return Err(format!("{} violations: {}", bad.len(), bad.join("; ")));
    }
    Ok(format!(
        "{} matrices: {pairs} pairs satisfy (i)-(iii), {small} small-eigenvalue outputs",
        cases.len()
    ))
}

/// `d` as a sum of four squares (Lagrange), by search.
fn four_squares(d: u64) -> [u64; 4] {
    let root = |x: u64| (x as f64).sqrt() as u64;
    for a in 0..=root(d) {
        for b in a..=root(d - a * a) {
            for c in b..=root(d - a * a - b * b) {
                let rest = d - a * a - b * b - c * c;
                let e = root(rest);
                for e in e.saturating_sub(1)..=e + 1 {
                    if e * e == rest {
                        return [a, b, c, e];
                    }
                }
            }
        }
    }
    unreachable!("every non-negative integer is a sum of four squares")
}

/// A random zero-constant polynomial with Gaussian variance exactly one.
///
/// The raw integer variance `V` is completed to the square `m^2`,
/// `m = ceil(sqrt V)`, by linear terms on four extra variables whose squared
/// coefficients sum to `m^2 - V`; everything is then divided by `m`.
fn unit_variance_poly(g: &mut TestRng, n: usize) -> Degree2Polynomial {
    loop {
        let mut p = Degree2Polynomial::new(n + 4);
        let style = g.gen_range(0..4);
        if style == 3 {
            // A dominant rank-one quadratic form (v . x)^2 plus noise.
            let v: Vec<i64> = (0..n).map(|_| g.gen_range(-3..=3)).collect();
            for i in 0..n {
                for j in i..n {
                    let c = if i == j { v[i] * v[i] } else { 2 * v[i] * v[j] };
                    p.add_quad(i, j, Rational::from(4 * c + g.gen_range(-1..=1)))
                        .unwrap();
                }
            }
        }
        for i in 0..n {
            for j in i..n {
                if style != 3 && g.gen_bool(0.6) {
                    p.add_quad(i, j, Rational::from(g.gen_range(-6..=6)))
                        .unwrap();
                }
            }
            let spread = if style == 1 { 24 } else { 6 };
            if g.gen_bool(0.6) {
                p.add_lin(i, Rational::from(g.gen_range(-spread..=spread)))
                    .unwrap();
            }
        }
        if style == 0 {
            // A dominant square direction.
            p.add_quad(0, 0, Rational::from(g.gen_range(20..=40)))
                .unwrap();
        }
        let v = p.variance_gaussian();
        if v == 0 {
            continue;
        }
        let v = v.numer().to_u64().expect("small");
        let m = (v as f64).sqrt().ceil() as u64;
        let m = (m.saturating_sub(1)..=m + 1)
            .find(|k| k * k >= v)
            .expect("ceil sqrt");
        for (t, s) in four_squares(m * m - v).into_iter().enumerate() {
            p.add_lin(n + t, Rational::from(s)).unwrap();
        }
        let p = p.scaled(&r(1, m as i64));
        assert_eq!(p.variance_gaussian(), 1);
        return p;
    }
}

/// Criterion 5: decomposition contracts on 200 unit-variance polynomials.
fn decompose_contracts() -> Outcome {
    let cfg = Config::default();
    let mut g = rng(0xDEC0);
    let settings = [
        (r(1, 2), r(1, 4)),
        (r(1, 4), r(1, 8)),
        (r(3, 10), r(1, 16)),
        (r(1, 8), r(1, 8)),
    ];
    let (mut splits, mut small) = (0, 0);
    let mut bad = Vec::new();
    for i in 0..200 {
        let n = g.gen_range(1..=20);
        let p = unit_variance_poly(&mut g, n);
        let (eps, eta) = &settings[i % settings.len()];
        let d = approximate_decompose(&p, eps, eta, &cfg.spectral).map_err(fail("decompose"))?;
        match d.kind {
            DecomposeKind::Split => {
                splits += 1;
                let q = d.recombined().expect("split");
                if q.mean_gaussian() != p.mean_gaussian()
                    || q.variance_gaussian() != p.variance_gaussian()
                {
                    bad.push(format!("#{i}: mean/variance not preserved"));
                }
                let rest = d.r.as_ref().expect("split");
                let res_var = rest.cross_terms_with(0).variance_gaussian();
                if res_var > Rational::from(eta.square_ref()) * 4u32 {
                    bad.push(format!("#{i}: Var(Res) = {} > 4 eta^2", res_var.to_f64()));
                }
                let bound = Rational::from(1) - Rational::from(eps.square_ref()).square() / 40u32;
                if rest.variance_gaussian() > bound {
                    bad.push(format!(
                        "#{i}: Var(r) = {} > 1 - eps^4/40",
                        rest.variance_gaussian().to_f64()
                    ));
                }
            }
            DecomposeKind::SmallMaxEigenvalue => {
                small += 1;
                let a = p.quadratic_matrix();
                if a.is_zero() {
                    continue;
                }
                let top = oracle_lambda_max(&a);
                let lhs = Float::with_val(ORACLE_BITS, top.square_ref());
                let rhs = Float::with_val(ORACLE_BITS, Rational::from(eps.square_ref()))
                    + oracle_slack(&a);
                if lhs > rhs {
                    bad.push(format!(
                        "#{i}: small branch but lambda_max^2 = {}",
                        lhs.to_f64()
                    ));
                }
            }
        }
    }
    if !bad.is_empty() {
        return Err(format!("{} violations: {}", bad.len(), bad.join("; ")));
    }
    if splits == 0 || small == 0 {
        return Err(format!(
            "degenerate sample: {splits} splits, {small} small outputs"
        ));
    }
    Ok(format!("200 polynomials: {splits} splits and {small} small-eigenvalue outputs meet their contracts"))
}

/// Criterion 6: loop invariants on junta traces.
fn junta_invariants() -> Outcome {
    let cfg = Config::default();
    let mut g = rng(0x7047);
    let eps_set = [r(1, 2), r(3, 10), r(1, 4), r(1, 8)];
    let mut iterations = 0;
    let mut bad = Vec::new();
    for i in 0..120 {
        let n = g.gen_range(1..=30);
        let p = match i % 3 {
            0 => dense_general(&mut g, n, 8),
            1 => sparse_multilinear(&mut g, n, 8, 0.3),
            _ => unit_variance_poly(&mut g, n),
        };
        let eps = &eps_set[i % eps_set.len()];
        let (_, trace) =
            construct_junta(&p, eps, &cfg.junta, &cfg.spectral).map_err(fail("junta"))?;
        iterations += trace.iterations.len();
        if let Err(e) = check_trace_invariants(&trace) {
            bad.push(format!("#{i}: {e}"));
        }
        if trace.iterations.len() as u64 > trace.params.k + 1 {
            bad.push(format!(
                "#{i}: {} iterations for K = {}",
                trace.iterations.len(),
                trace.params.k
            ));
        }
    }
    if !bad.is_empty() {
        return Err(format!("{} violations: {}", bad.len(), bad.join("; ")));
    }
    Ok(format!(
        "120 traces ({iterations} iterations) satisfy both invariants and the iteration bound"
    ))
}

/// Counts tuples of lattice indices (one per support) whose sum is at least
/// `cut`, by walking the whole product.
fn enumerate_at_least(points: &[Vec<i64>], cut: i64) -> u64 {
    let k = points.len();
    let mut idx = vec![0usize; k];
    let mut hits = 0u64;
    loop {
        let s: i64 = (0..k).map(|i| points[i][idx[i]]).sum();
        if s >= cut {
            hits += 1;
        }
        let mut pos = 0;
        loop {
            if pos == k {
                return hits;
            }
            idx[pos] += 1;
            if idx[pos] < points[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Criterion 7: `dp_count` equals product enumeration exactly on 10^4
/// random instances with `K <= 6`, `R <= 16`.
fn dp_exactness() -> Outcome {
    let cfg = Config::default();
    let mut g = rng(0xD9);
    let mut bad = Vec::new();
    let mut comparisons = 0;
    for i in 0..10_000 {
        let k = g.gen_range(1..=6);
        let grid = r(1, 1 << g.gen_range(0..=4));
        let mut supports = Vec::with_capacity(k);
        let mut points = Vec::with_capacity(k);
        for _ in 0..k {
            let len = g.gen_range(1..=16);
            let pts: Vec<i64> = (0..len).map(|_| g.gen_range(-40..=40)).collect();
            let values = pts.iter().map(|&v| Rational::from(v) * &grid).collect();
            supports.push(DiscreteSupport::new(values, grid.clone()).map_err(fail("support"))?);
            points.push(pts);
        }
        let total: u64 = points.iter().map(|p| p.len() as u64).product();
        // An attained sum (boundary case) and an off-lattice threshold.
        let attained: i64 = points.iter().map(|p| p[g.gen_range(0..p.len())]).sum();
        let taus = [
            Rational::from(-attained) * &grid,
            Rational::from((g.gen_range(-2000..=2000), 97)),
        ];
        for tau in taus {
            comparisons += 1;
            let dp =
                dp_count(&supports, &tau, cfg.count.dp_bit_budget).map_err(fail("dp_count"))?;
            // s * grid + tau >= 0  <=>  s >= ceil(-tau / grid).
            let cut = (Rational::from(-&tau) / &grid)
                .ceil()
                .numer()
                .to_i64()
                .expect("small");
            let exact = Rational::from((enumerate_at_least(&points, cut), total));
            if dp != exact {
                bad.push(format!("#{i}: dp {dp} vs enumeration {exact}"));
            }
        }
        if i % 100 == 0 {
            let dense = dp_table_with(&supports, DpStrategy::Dense, cfg.count.dp_bit_budget)
                .map_err(fail("dense"))?;
            let sparse = dp_table_with(&supports, DpStrategy::Sparse, cfg.count.dp_bit_budget)
                .map_err(fail("sparse"))?;
            if dense != sparse {
                bad.push(format!("#{i}: dense and sparse tables differ"));
            }
        }
    }
    if !bad.is_empty() {
        return Err(format!(
            "{} mismatches: {}",
            bad.len(),
            bad.iter().take(5).cloned().collect::<Vec<_>>().join("; ")
        ));
    }
    Ok(format!(
        "10000 instances, {comparisons} thresholds: exact agreement"
    ))
}

/// Criterion 8: the cover's CDF stays within eps* of Phi at every point.
fn cover_certification() -> Outcome {
    let cfg = Config::default();
    let mut lines = Vec::new();
    for j in [3u32, 4, 6] {
        let eps_star = r(1, 1 << j);
        let cover = normal_cover(&eps_star, cfg.count.cover_constant).map_err(fail("cover"))?;
        let len = cover.points.len();
        if cover.points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(format!(
                "eps* = 1/{}: points not strictly increasing",
                1 << j
            ));
        }
        let mut worst = Float::new(128);
        for (i, t) in cover.points.iter().enumerate() {
            let phi = normal_cdf_hp(t, 64);
            for k in [i, i + 1] {
                let dev = Float::with_val(128, &phi - Rational::from((k as u64, len as u64))).abs();
                if dev > worst {
                    worst = dev;
                }
            }
        }
        if worst > Float::with_val(128, &eps_star) {
            return Err(format!(
                "eps* = 1/{}: deviation {} exceeds eps*",
                1 << j,
                worst.to_f64()
            ));
        }
        lines.push(format!(
            "1/{}: {len} points, deviation {:.5}",
            1 << j,
            worst.to_f64()
        ));
    }
    Ok(lines.join(", "))
}

/// Exact `E[|p / ||p||_2|^k]` over the cube, in floating point.
fn enumerate_moment(p: &Degree2Polynomial, k: u32) -> f64 {
    let norm = raw_moment_exact(p, 2).unwrap().to_f64().sqrt();
    let mut sum = 0.0;
    for_each_cube_value(p, 20, |v| sum += (v.to_f64() / norm).abs().powi(k as i32)).unwrap();
    sum / (1u64 << p.n()) as f64
}

/// Criterion 9: absolute moments for `k = 1, 2, 3` within 0.1 of
/// enumeration, and the exact second-moment identity.
fn absolute_moments() -> Outcome {
    let cfg = Config::default();
    let eps = r(1, 10);
    let mut g = rng(0x307);
    let mut worst = [0.0f64; 3];
    let mut bad = Vec::new();
    for i in 0..50 {
        let n = g.gen_range(1..=14);
        let p = loop {
            let p = sparse_multilinear(&mut g, n, 8, 0.5);
            if !p.is_constant() || *p.constant_term() != 0 {
                break p;
            }
        };
        let raw2 = raw_moment_exact(&p, 2).map_err(fail("raw moment"))?;
        let identity = p.variance_boolean().unwrap() + p.mean_boolean().unwrap().square();
        if raw2 != identity {
            bad.push(format!(
                "#{i}: raw_moment_exact(p, 2) = {raw2} but Var + mean^2 = {identity}"
            ));
        }
        for k in 1..=3u32 {
            let est = absolute_moment(&p, k, &eps, &cfg)
                .map_err(fail("absolute_moment"))?
                .value
                .to_f64();
            let exact = enumerate_moment(&p, k);
            let err = (est - exact).abs();
            worst[k as usize - 1] = worst[k as usize - 1].max(err);
            if err > 0.1 {
                bad.push(format!("#{i} k = {k}: {est} vs {exact}"));
            }
        }
    }
    if !bad.is_empty() {
        return Err(format!("{} violations: {}", bad.len(), bad.join("; ")));
    }
    Ok(format!(
        "50 instances x k = 1,2,3: max errors {:.4}, {:.4}, {:.4}; second-moment identity exact",
        worst[0], worst[1], worst[2]
    ))
}

/// Serialized outputs of every pipeline stage on fixed inputs.
fn pipeline_snapshot() -> Vec<String> {
    let cfg = Config::default();
    let mut g = rng(0x10);
    let json = |v: serde_json::Result<String>| v.expect("serializable");
    let bool_p = dense_multilinear(&mut g, 13, 8);
    let gauss_p = dense_general(&mut g, 24, 8);
    let moment_p = sparse_multilinear(&mut g, 10, 8, 0.6);
    let decomp_p = gauss_p.without_constant();
    let matrix = random_symmetric(&mut g, 30, 8);
    let supports: Vec<DiscreteSupport> = (0..5)
        .map(|_| {
            DiscreteSupport::new(
                (0..12).map(|_| r(g.gen_range(-30..=30), 8)).collect(),
                r(1, 8),
            )
            .unwrap()
        })
        .collect();
    let mut out = vec![
        json(serde_json::to_string(
            &count_boolean(&bool_p, &r(15, 100), &cfg).unwrap(),
        )),
        json(serde_json::to_string(
            &count_gaussian(&gauss_p, &r(1, 10), &cfg).unwrap(),
        )),
        json(serde_json::to_string(
            &absolute_moment(&moment_p, 2, &r(1, 10), &cfg).unwrap(),
        )),
        json(serde_json::to_string(
            &approximate_decompose(&decomp_p, &r(1, 4), &r(1, 8), &cfg.spectral).unwrap(),
        )),
        json(serde_json::to_string(
            &construct_junta(&gauss_p, &r(1, 4), &cfg.junta, &cfg.spectral).unwrap(),
        )),
        json(serde_json::to_string(
            &approximate_largest_eigen(&matrix, &r(1, 4), &r(1, 16), &cfg.spectral).unwrap(),
        )),
        json(serde_json::to_string(
            &normal_cover(&r(1, 16), cfg.count.cover_constant).unwrap(),
        )),
    ];
    out.push(format!(
        "{:?}",
        dp_table_with(&supports, DpStrategy::Auto, cfg.count.dp_bit_budget).unwrap()
    ));
    out
}

fn cli_run(dir: &Path, threads: usize, args: &[&str]) -> Result<(String, RunReport), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_d2count"))
        .args(args)
        .args(["--report", "report.json"])
        .current_dir(dir)
        .env("RAYON_NUM_THREADS", threads.to_string())
        .output()
        .map_err(fail("spawn"))?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).to_string());
    }
    let text = std::fs::read_to_string(dir.join("report.json")).map_err(fail("report"))?;
    let report: RunReport = serde_json::from_str(&text).map_err(fail("report json"))?;
    Ok((String::from_utf8_lossy(&out.stdout).to_string(), report))
}

/// Criterion 10: bit-identical outputs across three runs and thread counts
/// 1 and 4, both in-process and through the CLI.
fn determinism() -> Outcome {
    let mut snapshots = Vec::new();
    for threads in [1usize, 4] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(fail("pool"))?;
        for _ in 0..3 {
            snapshots.push(pool.install(pipeline_snapshot));
        }
    }
    if let Some(pos) = snapshots.iter().position(|s| *s != snapshots[0]) {
        let stage = snapshots[0]
            .iter()
            .zip(&snapshots[pos])
            .position(|(a, b)| a != b)
            .unwrap_or(0);
        return Err(format!(
            "in-process run {pos} differs from run 0 at stage {stage}"
        ));
    }

    let input = tempfile::tempdir().map_err(fail("tempdir"))?;
    let mut g = rng(0x11);
    let poly = input.path().join("p.d2p");
    std::fs::write(
        &poly,
        d2count::poly::format_d2p(&dense_multilinear(&mut g, 12, 8)),
    )
    .map_err(fail("write"))?;
    let graph = input.path().join("g.edges");
    let edges: String = erdos_renyi(&mut g, 12, 0.5)
        .edges()
        .iter()
        .map(|(u, v)| format!("{} {}\n", u + 1, v + 1))
        .collect();
    std::fs::write(&graph, edges).map_err(fail("write"))?;
    let poly_s = poly.to_str().unwrap();
    let graph_s = graph.to_str().unwrap();
    let commands: [Vec<&str>; 5] = [
        vec!["boolean", "--eps", "0.15", poly_s],
        vec!["gaussian", "--eps", "0.1", poly_s],
        vec!["moment", "-k", "1", "--eps", "0.1", poly_s],
        vec!["junta", "--eps", "0.25", poly_s],
        vec![
            "cut-fraction",
            "--graph",
            graph_s,
            "--threshold",
            "18",
            "--eps",
            "0.1",
        ],
    ];
    for cmd in &commands {
        let mut runs = Vec::new();
        for threads in [1usize, 4] {
            for _ in 0..3 {
                let dir = tempfile::tempdir().map_err(fail("tempdir"))?;
                runs.push(cli_run(dir.path(), threads, cmd)?);
            }
        }
        let (stdout0, report0) = &runs[0];
        for (stdout, report) in &runs[1..] {
            if stdout != stdout0 || !report.same_outcome(report0) {
                return Err(format!("`d2count {}` is not reproducible", cmd.join(" ")));
            }
        }
    }
    Ok(format!(
        "{} in-process stages and {} CLI commands identical over 3 runs x threads {{1, 4}}",
        snapshots[0].len(),
        commands.len()
    ))
}
