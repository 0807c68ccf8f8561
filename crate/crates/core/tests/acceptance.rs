// Acceptance suite: one PASS/FAIL line per criterion. Runs without the libtest
// harness so the lines appear in order on stdout.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cndr::cli::run_demo;
use cndr::complexity::{
    compare_complexity_terms, concentration_experiment, eigengap_proposition, estimate_rademacher, khintchine_check,
    lower_bound_construct, massart_check, theorem1_bound, ConcentrationConfig, RademacherMethod,
};
use cndr::constraints::{check_m, ConstraintParams};
use cndr::data::Dataset;
use cndr::hypothesis::Model;
use cndr::kernels::{normalize_flagged, KernelSpec};
use cndr::oracle::{
    brute_force_coupled_term, exact_abs_correlation, exact_massart, exhaustive_rademacher, explicit_covariance,
    explicit_projection_norm, sorted_eigenvalues, ExplicitFeatureMap,
};
use cndr::spectral::{build_bundle, eigengap_plugin, kyfan_r, projected_sigma_norm, SpectralBundle, DEFAULT_RANK_TOL};
use cndr::trainer::{train, Loss, TrainConfig, TrainMode, TrainTrace};

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

fn signs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// Coordinate-linear kernels on disjoint consecutive blocks of 1..=3 coordinates.
fn disjoint_kernels(rng: &mut ChaCha8Rng, p: usize) -> (Vec<KernelSpec>, usize) {
    let mut next = 0;
    let mut out = Vec::new();
    for _ in 0..p {
        let width = rng.random_range(1..=3);
        out.push(KernelSpec::coordinate_linear((next..next + width).collect()).unwrap());
        next += width;
    }
    (out, next)
}

fn normalized(kernels: Vec<KernelSpec>, pts: &[Vec<f64>]) -> Vec<KernelSpec> {
    let flagged: Vec<_> = kernels
        .into_iter()
        .map(|mut k| {
            k.normalize = true;
            k
        })
        .collect();
    normalize_flagged(&flagged, pts).unwrap()
}

fn c1_eigengap() -> Outcome {
    let mut worst = 0.0_f64;
    for eps in [1e-6, 0.5, 1.0] {
        let e = eigengap_proposition(eps)?;
        worst = worst.max((e.lhs - 2.0).abs()).max((e.rhs - 2.0).abs());
    }
    Ok((worst <= 1e-12, format!("max |lhs - 2|, |rhs - 2| = {worst:e}")))
}

fn c2_lower_sandwich() -> Outcome {
    let inst = lower_bound_construct(32, 4, 0.4)?;
    let est = estimate_rademacher(
        &inst.bundle,
        &inst.params,
        RademacherMethod::MonteCarlo {
            draws: 100_000,
            seed: 2,
        },
    )?;
    let target = (0.4f64 / 64.0).sqrt();
    Ok((
        est.estimate + 3.0 * est.stderr >= target,
        format!("estimate {:.6} + 3 * {:.2e} >= {target:.7}", est.estimate, est.stderr),
    ))
}

fn c3_upper_dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = f64::INFINITY;
    let mut lower_estimates = 0;
    for i in 0..20 {
        let p = 1 + i % 3;
        let m = if i % 2 == 0 { 16 } else { 32 };
        let (mut kernels, dim) = disjoint_kernels(&mut rng, p);
        if p > 1 && rng.random_bool(0.5) {
            kernels[0] = KernelSpec::gaussian(rng.random_range(0.5..2.0))?;
        }
        let pts = points(&mut rng, m, dim);
        let kernels = normalized(kernels, &pts);
        let bundle = build_bundle(&kernels, &pts, DEFAULT_RANK_TOL)?;
        let r = rng.random_range(1..=bundle.total_rank().min(4));
        let uniform = vec![1.0 / p as f64; p];
        let params = ConstraintParams {
            r,
            lambda_r: kyfan_r(&bundle, &uniform, r)? * rng.random_range(1.0..2.0),
            nu: (p * p) as f64 * rng.random_range(1.5..4.0),
            delta: 0.05,
        };
        let est = estimate_rademacher(
            &bundle,
            &params,
            RademacherMethod::MonteCarlo {
                draws: 2000,
                seed: i as u64,
            },
        )?;
        lower_estimates += usize::from(est.lower_estimate);
        let bound = theorem1_bound(&params, p, m, eigengap_plugin(&bundle, r)?)?.total;
        worst = worst.min(bound - (est.estimate - 3.0 * est.stderr));
    }
    Ok((
        worst >= 0.0,
        format!(
            "min over 20 instances of bound - (estimate - 3 stderr) = {worst:.4} ({lower_estimates} numerical sups)"
        ),
    ))
}

fn c4_explicit_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0_f64;
    let mut comparisons = 0;
    for _ in 0..100 {
        let p = rng.random_range(1..=3);
        let m = rng.random_range(1..=12);
        let (kernels, dim) = disjoint_kernels(&mut rng, p);
        let pts = points(&mut rng, m, dim);
        let bundle = build_bundle(&kernels, &pts, DEFAULT_RANK_TOL)?;
        let maps: Vec<_> = kernels
            .iter()
            .map(|k| ExplicitFeatureMap::from_spec(k, dim))
            .collect::<Result<_, _>>()?;
        let mu: Vec<f64> = (0..p).map(|_| rng.random_range(0.05..1.0)).collect();
        let sigma = signs(&mut rng, m);
        for r in 1..=bundle.total_rank() {
            let fast = projected_sigma_norm(&bundle, &mu, r, &sigma)?;
            let slow = explicit_projection_norm(&maps, &mu, r, &sigma, &pts)?;
            let scale = slow.max(fast).max(1e-300);
            let err = if fast == slow { 0.0 } else { (fast - slow).abs() / scale };
            // both sides vanish (up to rounding) when sigma is orthogonal to the features
            let err = if scale < 1e-12 { 0.0 } else { err };
            worst = worst.max(err);
            comparisons += 1;
        }
    }
    Ok((
        worst <= 1e-8,
        format!("max relative error {worst:e} over {comparisons} comparisons"),
    ))
}

fn c5_exhaustive_mc() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut details = Vec::new();
    let mut ok = true;
    for (i, m) in [3usize, 5, 8, 10].into_iter().enumerate() {
        let dim = rng.random_range(2..=4);
        let pts = points(&mut rng, m, dim);
        let bundle = build_bundle(&normalized(vec![KernelSpec::linear()], &pts), &pts, DEFAULT_RANK_TOL)?;
        let r = rng.random_range(1..=bundle.total_rank());
        let top: f64 = (0..r).map(|j| bundle.spectra[0].value(j)).sum();
        let params = ConstraintParams {
            r,
            lambda_r: top * rng.random_range(0.3..1.2),
            nu: 4.0,
            delta: 0.05,
        };
        let exact = exhaustive_rademacher(&bundle, &params, 10)?;
        let est = estimate_rademacher(
            &bundle,
            &params,
            RademacherMethod::MonteCarlo {
                draws: 100_000,
                seed: i as u64,
            },
        )?;
        let z = (est.estimate - exact).abs() / est.stderr;
        ok &= z <= 3.0;
        details.push(format!("m={m}: {z:.2} sigma"));
    }
    Ok((ok, details.join(", ")))
}

fn c6_khintchine() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = f64::INFINITY;
    for m in [4, 16, 64] {
        for i in 0..50 {
            let raw: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n: f64 = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            let v: Vec<f64> = raw.iter().map(|x| x / n).collect();
            let e = khintchine_check(&v, 10_000, 1000 * m as u64 + i)?;
            worst = worst.min(e.estimate + 3.0 * e.stderr - std::f64::consts::FRAC_1_SQRT_2);
        }
    }
    let h2 = 1.0 / 2f64.sqrt();
    let h3 = 1.0 / 3f64.sqrt();
    let hand = [
        (vec![1.0, 0.0, 0.0, 0.0], 1.0),
        (vec![h2, h2, 0.0, 0.0], h2),
        (vec![h3, h3, h3, 0.0], 3f64.sqrt() / 2.0),
        (vec![0.5; 4], 0.75),
    ];
    let mut hand_err = 0.0_f64;
    for (v, value) in &hand {
        hand_err = hand_err.max((exact_abs_correlation(v)? - value).abs());
    }
    Ok((
        worst >= 0.0 && hand_err <= 1e-10,
        format!("min (estimate + 3 stderr - 2^-1/2) = {worst:.4}; m=4 enumeration error {hand_err:e}"),
    ))
}

fn c7_massart() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = f64::INFINITY;
    let mut exact_ok = true;
    for i in 0..20 {
        let p = 1 + i % 3;
        let m = [4, 6, 8, 16, 32][i % 5];
        let (mut kernels, dim) = disjoint_kernels(&mut rng, p);
        if i % 4 == 3 {
            kernels[0] = KernelSpec::gaussian(1.0)?;
        }
        let pts = points(&mut rng, m, dim);
        let bundle = build_bundle(&kernels, &pts, DEFAULT_RANK_TOL)?;
        let c = massart_check(&bundle, 20_000, i as u64)?;
        worst = worst.min(c.bound + 3.0 * c.mc.stderr - c.mc.estimate);
        if m <= 8 {
            let exact = exact_massart(&bundle)?;
            exact_ok &= exact <= c.bound && (exact - c.mc.estimate).abs() <= 4.0 * c.mc.stderr.max(1e-12);
        }
    }
    Ok((
        worst >= 0.0 && exact_ok,
        format!("min (bound + 3 stderr - estimate) = {worst:.4}; enumeration at m <= 8 consistent: {exact_ok}"),
    ))
}

fn c8_spectral_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let m = rng.random_range(2..=20);
        let d = rng.random_range(1..=8);
        let pts = points(&mut rng, m, d);
        let bundle = build_bundle(&[KernelSpec::linear()], &pts, DEFAULT_RANK_TOL)?;
        let cov = explicit_covariance(&ExplicitFeatureMap::from_spec(&KernelSpec::linear(), d)?, &pts)?;
        let ev = sorted_eigenvalues(&cov);
        let top = bundle.spectra[0].values[0];
        for (a, b) in ev.iter().zip(&bundle.spectra[0].values).take(m.min(d)) {
            worst = worst.max((a - b).abs() / top);
        }
    }
    Ok((worst <= 1e-8, format!("max relative difference {worst:e}")))
}

fn c9_concentration() -> Outcome {
    let rep = concentration_experiment(&ConcentrationConfig::default())?;
    let rates: Vec<String> = rep
        .rows
        .iter()
        .map(|r| format!("{}:{:.3}", r.m, r.satisfaction_rate))
        .collect();
    let ok = rep.rows.iter().all(|r| r.satisfaction_rate >= 0.95) && (rep.slope + 0.5).abs() <= 0.2;
    Ok((ok, format!("satisfaction {}; slope {:.3}", rates.join(" "), rep.slope)))
}

fn sound_run(
    data: &Dataset,
    kernels: &[KernelSpec],
    params: &ConstraintParams,
    cfg: &TrainConfig,
) -> Result<Option<String>, Box<dyn std::error::Error>> {
    let (model, trace) = train(data, kernels, params, cfg, DEFAULT_RANK_TOL)?;
    let (again, trace2) = train(data, kernels, params, cfg, DEFAULT_RANK_TOL)?;
    let label = format!("{:?}/{:?}", cfg.mode, cfg.loss);
    if !check_m(&model.mu, &model.params, &model.space.bundle)?.feasible() {
        return Ok(Some(format!("{label}: mu outside M")));
    }
    if model.weight_norm() > 1.0 + 1e-8 {
        return Ok(Some(format!("{label}: weight norm {}", model.weight_norm())));
    }
    if let Some(msg) = monotone(&trace) {
        return Ok(Some(format!("{label}: {msg}")));
    }
    if model.to_json()? != again.to_json()? || trace.to_csv() != trace2.to_csv() {
        return Ok(Some(format!("{label}: reruns differ")));
    }
    let reloaded = Model::from_json(&model.to_json()?)?;
    if reloaded.evaluate_many(&data.s_points)? != model.evaluate_many(&data.s_points)? {
        return Ok(Some(format!("{label}: reloaded model scores differ")));
    }
    Ok(None)
}

fn monotone(trace: &TrainTrace) -> Option<String> {
    for w in trace.rounds.windows(2) {
        if w[1].objective > w[0].objective + 1e-9 && !w[1].selection_changed {
            return Some(format!("objective rose at round {}", w[1].round));
        }
    }
    None
}

fn c10_trainer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut runs = 0;
    let mut failures = Vec::new();
    let fig = cndr::cli::figure_one_data();
    let mut datasets = vec![(fig, 2usize)];
    for _ in 0..3 {
        let dim = 3;
        let s = points(&mut rng, 20, dim);
        let labels: Vec<i8> = s.iter().map(|x| if x[1] + 0.3 * x[2] > 0.0 { 1 } else { -1 }).collect();
        let u = points(&mut rng, 40, dim);
        datasets.push((Dataset::new(s, labels, u)?, dim));
    }
    for (di, (data, dim)) in datasets.iter().enumerate() {
        let mut kernels: Vec<KernelSpec> = (0..*dim)
            .map(|c| KernelSpec::coordinate_linear(vec![c]).unwrap())
            .collect();
        if di > 0 {
            kernels.push(KernelSpec::gaussian(1.0)?);
        }
        for k in &mut kernels {
            k.normalize = true;
        }
        let p = kernels.len();
        // r = 2 needs a kernel of rank >= 2, which the four-point axes lack
        let rs: &[usize] = if di == 0 { &[1] } else { &[1, 2] };
        for &r in rs {
            let params = ConstraintParams {
                r,
                lambda_r: if di == 0 { 100.0 } else { 0.6 },
                nu: 2.5 * (p * p) as f64,
                delta: 0.05,
            };
            for mode in [
                TrainMode::Coupled,
                TrainMode::DiscreteRelaxed,
                TrainMode::ContinuousRelaxed,
            ] {
                for loss in [Loss::Hinge, Loss::Logistic] {
                    let cfg = TrainConfig {
                        mode,
                        loss,
                        max_rounds: 30,
                        ..TrainConfig::default()
                    };
                    runs += 1;
                    match sound_run(data, &kernels, &params, &cfg) {
                        Ok(None) => {}
                        Ok(Some(msg)) => failures.push(format!("dataset {di} r={r} {msg}")),
                        Err(e) => failures.push(format!("dataset {di} r={r} {mode:?}/{loss:?}: error {e}")),
                    }
                }
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("{runs} runs feasible, norm-bounded, monotone and reproducible")
    } else {
        format!("{} of {runs} runs failed: {}", failures.len(), failures.join("; "))
    };
    Ok((failures.is_empty(), detail))
}

fn c11_demo() -> Outcome {
    let rep = run_demo()?;
    Ok((
        rep.plain_error >= 0.5 && rep.coupled_error == 0.0,
        format!("plain error {}, coupled error {}", rep.plain_error, rep.coupled_error),
    ))
}

fn c12_complexity_terms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut cases = 0;
    let mut ok = true;
    for p in 1..=3 {
        for m in 1..=8 {
            let (mut kernels, dim) = disjoint_kernels(&mut rng, p);
            if p > 1 && m % 2 == 0 {
                kernels[p - 1] = KernelSpec::gaussian(0.7)?;
            }
            let pts = points(&mut rng, m, dim);
            let bundle: SpectralBundle = build_bundle(&kernels, &pts, DEFAULT_RANK_TOL)?;
            for r in 1..=p * m {
                cases += 1;
                ok &= compare_complexity_terms(&bundle, r)?.coupled == brute_force_coupled_term(&bundle, r);
            }
        }
    }
    Ok((ok, format!("{cases} (p, m, r) cases, exact equality: {ok}")))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("1 eigengap proposition", Duration::from_secs(1), c1_eigengap),
        ("2 lower-bound sandwich", Duration::from_secs(60), c2_lower_sandwich),
        ("3 upper-bound dominance", Duration::from_secs(300), c3_upper_dominance),
        (
            "4 explicit-oracle equivalence",
            Duration::from_secs(60),
            c4_explicit_oracle,
        ),
        (
            "5 exhaustive-MC consistency",
            Duration::from_secs(120),
            c5_exhaustive_mc,
        ),
        ("6 khintchine", Duration::from_secs(600), c6_khintchine),
        ("7 massart", Duration::from_secs(600), c7_massart),
        ("8 spectral identity", Duration::from_secs(600), c8_spectral_identity),
        ("9 projection concentration", Duration::from_secs(600), c9_concentration),
        ("10 trainer soundness", Duration::from_secs(600), c10_trainer),
        ("11 four-point demo", Duration::from_secs(5), c11_demo),
        (
            "12 complexity-term comparison",
            Duration::from_secs(600),
            c12_complexity_terms,
        ),
    ];
    let mut failed = 0;
    for (name, limit, f) in criteria {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (passed, detail) = match outcome {
            Ok((ok, detail)) if elapsed <= limit => (ok, detail),
            Ok((_, detail)) => (false, format!("{detail}; over the {limit:?} limit")),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!passed);
        println!(
            "{} criterion {name}: {detail} [{:.2}s]",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
