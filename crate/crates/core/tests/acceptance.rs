//! Acceptance checks, one line per criterion.

use std::f64::consts::FRAC_PI_2;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ddecert::certificate::{
    build_certificate, corollary_bounds, dissipativity_gap, lyapunov_renorm, min_mu,
    WeightFunction,
};
use ddecert::discretization::discretize_generator;
use ddecert::kernel::{
    dissipativity_lambda, total_variation, DelayAtom, DelayDensity, DelayKernel,
    LinearDelaySystem,
};
use ddecert::linalg::{eigenvalues, sym_eigmin};
use ddecert::operator_check::check_dissipativity;
use ddecert::simulation::{
    as_lyapunov_exponent, contraction_report, integrate_dde, mean_square_contraction,
    AdditiveNoise, HistorySegment, LyapunovConfig, SddeProblem, ZeroDrift,
};
use ddecert::spectrum::{dominant_real_root, generator_eigenvalues};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct Case {
    system: LinearDelaySystem,
    lambda: f64,
    v: f64,
    off_zero: bool,
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// 200 kernels: 1 to 3 atoms (some at 0) plus an optional constant density,
/// `0 < V ≤ 5`, `λ ∈ [-5, 2]`; the first 150 scalar, the rest 2×2.
fn fuzz_corpus() -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_611);
    (0..200)
        .map(|i| {
            let n = if i < 150 { 1 } else { 2 };
            let lambda = rng.random_range(-5.0..2.0);
            let v_target = rng.random_range(0.05..5.0);
            let only_zero = i % 25 == 0;
            let atom_count = if only_zero { 1 } else { rng.random_range(1..=3) };
            let mut locations: Vec<f64> = Vec::new();
            while locations.len() < atom_count {
                let r = if only_zero || rng.random_bool(0.15) {
                    0.0
                } else {
                    -(rng.random_range(1..=40) as f64) / 40.0
                };
                if !locations.contains(&r) {
                    locations.push(r);
                }
            }
            let with_density = !only_zero && rng.random_bool(0.4);
            let mut atoms: Vec<DelayAtom> = locations
                .iter()
                .map(|&r| DelayAtom::new(r, random_matrix(&mut rng, n)))
                .collect();
            let mut density = with_density.then(|| random_matrix(&mut rng, n));

            let raw = DelayKernel::new(
                n,
                atoms.clone(),
                density.clone().map(|d| DelayDensity::constant(d).unwrap()),
            )
            .unwrap();
            let scale = v_target / total_variation(&raw);
            for a in &mut atoms {
                a.weight *= scale;
            }
            if let Some(d) = &mut density {
                *d *= scale;
            }
            let kernel = DelayKernel::new(
                n,
                atoms,
                density.map(|d| DelayDensity::constant(d).unwrap()),
            )
            .unwrap();

            let b = random_matrix(&mut rng, n);
            let shift = lambda - dissipativity_lambda(&b).unwrap();
            let b = b + DMatrix::identity(n, n) * shift;
            let lambda = dissipativity_lambda(&b).unwrap();
            let v = total_variation(&kernel);
            let off_zero = !kernel.mass_only_at_zero();
            Case {
                system: LinearDelaySystem::new(b, kernel).unwrap(),
                lambda,
                v,
                off_zero,
            }
        })
        .collect()
}

fn scalar_family() -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for b in [-3.0, -2.0, -1.0, 0.0, 1.0] {
        for c in [0.25, 1.0] {
            out.push((b, c));
        }
    }
    out
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let elapsed = start.elapsed();
    o.detail.push_str(&format!("; {:.2}s", elapsed.as_secs_f64()));
    if let Some(limit) = limit {
        if elapsed > limit {
            o.pass = false;
            o.detail.push_str(&format!(" exceeds {}s", limit.as_secs()));
        }
    }
    o
}

fn sharpness() -> Outcome {
    let mut worst = 0.0f64;
    let mut above = true;
    for (b, c) in scalar_family() {
        let k = DelayKernel::scalar_atom(-1.0, c).unwrap();
        let root = dominant_real_root(b, c, 1e-15).unwrap();
        worst = worst.max(dissipativity_gap(b, root, &k).unwrap().abs());
        above &= dissipativity_gap(b, root + 1e-3, &k).unwrap() > 0.0;
    }
    outcome(
        worst <= 1e-8 && above,
        format!("max |gap(γ*)| = {worst:.2e}, gap(γ*+1e-3) > 0: {above}"),
    )
}

fn bound_ordering(corpus: &[Case]) -> Outcome {
    let mut violations = 0;
    let mut not_strict = 0;
    let mut min_margin = f64::INFINITY;
    for case in corpus {
        let k = case.system.kernel();
        let star = min_mu(case.lambda, k, 1e-12).unwrap();
        let suff = corollary_bounds(case.lambda, k).mu_sufficient;
        if star > suff + 1e-12 {
            violations += 1;
        }
        if case.off_zero {
            min_margin = min_margin.min(suff - star);
            if !(star < suff) {
                not_strict += 1;
            }
        }
    }
    outcome(
        violations == 0 && not_strict == 0,
        format!(
            "{} kernels, {violations} violations, {not_strict} not strict, min margin off zero {min_margin:.2e}",
            corpus.len()
        ),
    )
}

fn comparison(corpus: &[Case]) -> Outcome {
    let mut eligible = 0;
    let mut equal = 0;
    let mut failures = 0;
    for case in corpus {
        if case.lambda > 0.0 || case.lambda * case.lambda.exp() < -case.v {
            let b = corollary_bounds(case.lambda, case.system.kernel());
            // Mass only at r = 0 makes the two bounds coincide.
            let ok = if case.off_zero {
                eligible += 1;
                b.mu_sufficient < b.webb_mu
            } else {
                equal += 1;
                (b.mu_sufficient - b.webb_mu).abs() <= 1e-12 * b.webb_mu.abs().max(1.0)
            };
            if !ok {
                failures += 1;
            }
        }
    }
    outcome(
        failures == 0 && eligible > 0,
        format!("{eligible} strict cases, {equal} mass-at-zero cases (equal), {failures} failures"),
    )
}

fn positivity(corpus: &[Case]) -> Outcome {
    let mut checked = 0;
    let mut mismatches = 0;
    for case in corpus {
        let k = case.system.kernel();
        let star = min_mu(case.lambda, k, 1e-12).unwrap();
        let d = star - case.lambda;
        let candidates = [
            case.lambda + 0.5 * d,
            star - 1e-2 * d,
            star + 1e-2 * d.max(1e-3),
            star + 0.5,
            star + 3.0,
        ];
        for mu in candidates {
            if !(mu > case.lambda) {
                continue;
            }
            let gap = dissipativity_gap(case.lambda, mu, k).unwrap();
            let built = build_certificate(&case.system, mu, 16);
            let c1 = WeightFunction::new(k, case.lambda, mu, 16).unwrap().bounds().0;
            let ok = match &built {
                Ok(cert) => gap > 0.0 && cert.c1 > 0.0 && c1 > 0.0,
                Err(_) => !(gap > 0.0) && !(c1 > 0.0),
            };
            checked += 1;
            if !ok {
                mismatches += 1;
            }
        }
    }
    let sys = LinearDelaySystem::scalar(-2.0, &[(-1.0, 1.0)]).unwrap();
    let cert = build_certificate(&sys, 0.0, 16).unwrap();
    let exact = (cert.c1 - 1.5).abs() <= 1e-12 && (cert.c2 - 2.0).abs() <= 1e-12;
    outcome(
        mismatches == 0 && exact,
        format!(
            "{checked} (kernel, μ) pairs, {mismatches} mismatches; c1 = {}, c2 = {}",
            cert.c1, cert.c2
        ),
    )
}

fn spectrum_agreement() -> Outcome {
    let mut worst = 0.0f64;
    for (b, c) in scalar_family() {
        let sys = LinearDelaySystem::scalar(b, &[(-1.0, c)]).unwrap();
        let spec = generator_eigenvalues(&sys, 32).unwrap();
        let root = dominant_real_root(b, c, 1e-15).unwrap();
        worst = worst.max((spec.abscissa - root).abs());
    }
    let osc = LinearDelaySystem::scalar(0.0, &[(-1.0, -FRAC_PI_2)]).unwrap();
    let neutral = generator_eigenvalues(&osc, 32).unwrap().abscissa;
    outcome(
        worst <= 1e-8 && neutral.abs() <= 1e-6,
        format!("max |abscissa - γ*| = {worst:.2e}, neutral abscissa = {neutral:.2e}"),
    )
}

fn operator_check(corpus: &[Case]) -> Outcome {
    let mut count = 0;
    let mut failures = 0;
    let mut worst32 = f64::NEG_INFINITY;
    let mut worst64 = f64::NEG_INFINITY;
    for case in corpus {
        let k = case.system.kernel();
        let mu = min_mu(case.lambda, k, 1e-12).unwrap() + 0.5;
        if dissipativity_gap(case.lambda, mu, k).unwrap() < 0.1 {
            continue;
        }
        let cert = build_certificate(&case.system, mu, 16).unwrap();
        count += 1;
        for (n, tol, worst) in [(32, 1e-3, &mut worst32), (64, 1e-6, &mut worst64)] {
            let disc = discretize_generator(&case.system, n).unwrap();
            let rep = check_dissipativity(&disc, &cert).unwrap();
            let excess = rep.theta_max - mu;
            *worst = worst.max(excess);
            if excess > tol {
                failures += 1;
            }
        }
    }
    outcome(
        failures == 0 && count > 0,
        format!(
            "{count} certificates, {failures} failures; max θ-μ: {worst32:.2e} (N=32), {worst64:.2e} (N=64)"
        ),
    )
}

fn random_history(rng: &mut ChaCha8Rng, n: usize, h: f64) -> (DVector<f64>, HistorySegment) {
    let terms: Vec<(f64, f64, f64)> = (0..n * 3)
        .map(|_| {
            (
                rng.random_range(-1.0..1.0),
                rng.random_range(0.5..6.0),
                rng.random_range(0.0..6.3),
            )
        })
        .collect();
    let f = |s: f64| {
        DVector::from_fn(n, |i, _| {
            terms[3 * i..3 * i + 3]
                .iter()
                .map(|&(a, w, p)| a * (w * s + p).cos())
                .sum::<f64>()
        })
    };
    let df = |s: f64| {
        DVector::from_fn(n, |i, _| {
            terms[3 * i..3 * i + 3]
                .iter()
                .map(|&(a, w, p)| -a * w * (w * s + p).sin())
                .sum::<f64>()
        })
    };
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    (x0, HistorySegment::from_fn_with_derivative(h, n, f, df).unwrap())
}

fn trajectory_contraction() -> Outcome {
    let h = 1e-3;
    let density = DelayKernel::new(1, vec![], Some(DelayDensity::scalar_constant(0.5))).unwrap();
    let matrix = DelayKernel::new(
        2,
        vec![
            DelayAtom::new(-1.0, DMatrix::from_row_slice(2, 2, &[0.5, 0.2, -0.1, 0.3])),
            DelayAtom::new(-0.5, DMatrix::from_row_slice(2, 2, &[0.0, 0.4, 0.4, 0.0])),
        ],
        None,
    )
    .unwrap();
    let systems = vec![
        LinearDelaySystem::scalar(-2.0, &[(-1.0, 1.0)]).unwrap(),
        LinearDelaySystem::scalar(-3.0, &[(-0.5, 1.0), (-1.0, 0.5)]).unwrap(),
        LinearDelaySystem::scalar(-1.0, &[(-0.25, 0.3), (-1.0, -0.2)]).unwrap(),
        LinearDelaySystem::new(DMatrix::from_element(1, 1, -2.0), density).unwrap(),
        LinearDelaySystem::new(DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, -1.0, -3.0]), matrix)
            .unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut runs = 0;
    let mut failures = 0;
    let mut worst = 0.0f64;
    for sys in &systems {
        let lambda = dissipativity_lambda(sys.drift()).unwrap();
        let mu = min_mu(lambda, sys.kernel(), 1e-12).unwrap() + 1e-3;
        let cert = build_certificate(sys, mu, 16).unwrap();
        for _ in 0..20 {
            let (x0, hist) = random_history(&mut rng, sys.dim(), h);
            let traj = integrate_dde(sys, &x0, &hist, 10.0, h).unwrap();
            let rep = contraction_report(&traj, &cert).unwrap();
            worst = worst.max(rep.max_ratio);
            runs += 1;
            if !rep.pass {
                failures += 1;
            }
        }
    }
    let sys = &systems[0];
    let mut wrong = build_certificate(sys, 0.0, 16).unwrap();
    wrong.mu = -0.6;
    let hist = HistorySegment::constant(&DVector::from_element(1, 1.0), h).unwrap();
    let traj = integrate_dde(sys, &DVector::from_element(1, 1.0), &hist, 10.0, h).unwrap();
    let control = contraction_report(&traj, &wrong).unwrap();
    outcome(
        failures == 0 && !control.pass,
        format!(
            "{runs} runs, {failures} failures, max ratio {worst:.8}; negative control ratio {:.3} (fails: {})",
            control.max_ratio, !control.pass
        ),
    )
}

fn lyapunov() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_res = 0.0f64;
    let mut min_eig = f64::INFINITY;
    let mut worst_form = f64::NEG_INFINITY;
    for i in 0..50 {
        let n = 1 + i % 6;
        let raw = random_matrix(&mut rng, n);
        let abscissa = eigenvalues(&raw).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let a = raw - DMatrix::identity(n, n) * (abscissa + rng.random_range(0.2..1.0));
        let c = DMatrix::identity(n, n);
        let r = lyapunov_renorm(&a, &c).unwrap();
        let res = a.transpose() * &r.q + &r.q * &a + c.transpose() * &c;
        let inf = res
            .row_iter()
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        worst_res = worst_res.max(inf);
        min_eig = min_eig.min(sym_eigmin(&r.q));
        for _ in 0..1000 {
            let x = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            worst_form = worst_form.max((x.transpose() * &r.q * &a * &x)[(0, 0)]);
        }
    }
    outcome(
        worst_res <= 1e-10 && min_eig > 0.0 && worst_form <= 1e-12,
        format!("max residual {worst_res:.2e}, min eig(Q) {min_eig:.3e}, max xᵀQAx {worst_form:.3e}"),
    )
}

fn mean_square_report() -> String {
    let sys = LinearDelaySystem::scalar(-1.0, &[(-1.0, 0.25)]).unwrap();
    let problem = SddeProblem {
        system: &sys,
        nonlinearity: &ZeroDrift,
        diffusion: &AdditiveNoise { sigma: 1.0 },
        dt: 1e-3,
        t_final: 20.0,
    };
    let rep = mean_square_contraction(
        &problem,
        &DVector::from_element(1, 0.0),
        &DVector::from_element(1, 1.0),
        0.5,
        500,
        2024,
    )
    .unwrap();
    serde_json::to_string(&rep).unwrap()
}

fn mean_square() -> (Outcome, String) {
    let json = mean_square_report();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let e = &v["estimate"];
    let (rate, hi) = (e["rate"].as_f64().unwrap(), e["ci_high"].as_f64().unwrap());
    let pass = v["pass"].as_bool().unwrap() && hi <= -0.5 && v["condition_holds"].as_bool().unwrap();
    (
        outcome(
            pass,
            format!(
                "rate {rate:.4}, CI high {hi:.4}, condition lhs {:.4}",
                v["condition_lhs"].as_f64().unwrap()
            ),
        ),
        json,
    )
}

fn lyapunov_reports() -> (String, String) {
    let config = |b: f64, c: f64| LyapunovConfig {
        b,
        c,
        sigma: 1.0,
        dt: 1e-3,
        t_final: 50.0,
        path_count: 500,
        seed: 99,
    };
    let inside = as_lyapunov_exponent(&config(-1.0, 0.3)).unwrap();
    let outside = as_lyapunov_exponent(&config(1.0, 0.0)).unwrap();
    (
        serde_json::to_string(&inside).unwrap(),
        serde_json::to_string(&outside).unwrap(),
    )
}

fn almost_sure() -> (Outcome, (String, String)) {
    let (inside, outside) = lyapunov_reports();
    let a: serde_json::Value = serde_json::from_str(&inside).unwrap();
    let b: serde_json::Value = serde_json::from_str(&outside).unwrap();
    let a_hi = a["estimate"]["ci_high"].as_f64().unwrap();
    let b_rate = b["estimate"]["rate"].as_f64().unwrap();
    let pass = a["region"]["inside"].as_bool().unwrap()
        && a_hi < 0.0
        && !b["region"]["inside"].as_bool().unwrap()
        && (b_rate - 0.5).abs() <= 0.05;
    (
        outcome(
            pass,
            format!(
                "inside: λ̂ = {:.4} (CI high {a_hi:.4}); outside: λ̂ = {b_rate:.4} vs 0.5",
                a["estimate"]["rate"].as_f64().unwrap()
            ),
        ),
        (inside, outside),
    )
}

fn determinism(reference: &(String, (String, String))) -> Outcome {
    let mut mismatches = Vec::new();
    for threads in [1, 2, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let again = pool.install(|| (mean_square_report(), lyapunov_reports()));
        if &again != reference {
            mismatches.push(threads);
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("reports under 1, 2, 8 threads; mismatching thread counts: {mismatches:?}"),
    )
}

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let corpus = fuzz_corpus();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "sharpness at the dominant root", timed(secs(1), sharpness)));
    results.push((2, "bound ordering", timed(secs(10), || bound_ordering(&corpus))));
    results.push((3, "comparison bound", timed(None, || comparison(&corpus))));
    results.push((4, "weight positivity equivalence", timed(None, || positivity(&corpus))));
    results.push((5, "spectrum agreement", timed(secs(5), spectrum_agreement)));
    results.push((6, "operator check", timed(secs(60), || operator_check(&corpus))));
    results.push((7, "trajectory contraction", timed(secs(30), trajectory_contraction)));
    results.push((8, "Lyapunov renorm", timed(None, lyapunov)));

    let mut ms_json = String::new();
    results.push((
        9,
        "mean-square contraction",
        timed(secs(120), || {
            let (o, json) = mean_square();
            ms_json = json;
            o
        }),
    ));
    let mut lyap_json = (String::new(), String::new());
    results.push((
        10,
        "almost-sure stability region",
        timed(secs(120), || {
            let (o, json) = almost_sure();
            lyap_json = json;
            o
        }),
    ));
    let reference = (ms_json, lyap_json);
    results.push((11, "determinism", timed(None, || determinism(&reference))));

    let mut all = true;
    for (id, name, o) in &results {
        all &= o.pass;
        println!(
            "criterion {id:>2} {}: {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
