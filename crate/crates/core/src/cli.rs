//! Subcommand implementations behind the `cndr` binary. Each command writes
//! its reports under the configured output directory; wall-clock metadata goes
//! to a separate `<name>.meta.json` so the reports themselves are reproducible.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complexity::{
    compare_complexity_terms, concentration_experiment, eigengap_proposition, estimate_rademacher, khintchine_check,
    lower_bound_construct, massart_check, theorem1_bound, theorem2_bound, BoundReport, ConcentrationConfig,
    RademacherEstimate, RademacherMethod,
};
use crate::config::{ReportFormat, RunConfig};
use crate::constraints::{check_m, ConstraintParams};
use crate::data::{load_dataset, parse_labeled, parse_unlabeled, DataFormat, Dataset};
use crate::error::{Error, Result};
use crate::hypothesis::{margin_loss_from_scores, training_error, Model};
use crate::kernels::{normalize_flagged, KernelSpec};
use crate::oracle::{
    brute_force_coupled_term, exact_massart, exhaustive_rademacher, explicit_covariance, explicit_projection_norm,
    sorted_eigenvalues, ExplicitFeatureMap,
};
use crate::spectral::{build_bundle, eigengap_plugin, projected_sigma_norm, SpectralBundle};
use crate::trainer::{train, TrainConfig, TrainTrace};

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

/// Writes `<stem>.json` and/or `<stem>.csv` as requested, plus the metadata file.
fn write_report(cfg: &RunConfig, stem: &str, json: &str, csv: Option<&str>) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if cfg.wants(ReportFormat::Json) {
        let path = cfg.output_dir.join(format!("{stem}.json"));
        write_file(&path, json)?;
        written.push(path);
    }
    if let (true, Some(csv)) = (cfg.wants(ReportFormat::Csv), csv) {
        let path = cfg.output_dir.join(format!("{stem}.csv"));
        write_file(&path, csv)?;
        written.push(path);
    }
    write_metadata(&cfg.output_dir, stem)?;
    Ok(written)
}

fn write_metadata(dir: &Path, stem: &str) -> Result<()> {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let meta = serde_json::json!({
        "command": stem,
        "unix_time": secs,
        "version": env!("CARGO_PKG_VERSION"),
    });
    write_file(
        &dir.join(format!("{stem}.meta.json")),
        &serde_json::to_string_pretty(&meta)?,
    )
}

fn load_data(cfg: &RunConfig) -> Result<Dataset> {
    let labeled = cfg
        .labeled
        .as_deref()
        .ok_or_else(|| Error::Config("data.labeled is required for this command".into()))?;
    load_dataset(labeled, cfg.unlabeled.as_deref(), cfg.format, cfg.dim)
}

fn require_kernels(cfg: &RunConfig) -> Result<()> {
    if cfg.kernels.is_empty() {
        return Err(Error::Config("at least one kernel.<i>.kind is required".into()));
    }
    Ok(())
}

/// Kernels normalized on S and U together, and the spectral bundle on S.
fn labeled_bundle(cfg: &RunConfig, data: &Dataset) -> Result<(Vec<KernelSpec>, SpectralBundle)> {
    require_kernels(cfg)?;
    let kernels = normalize_flagged(&cfg.kernels, &data.all_points())?;
    let bundle = build_bundle(&kernels, &data.s_points, cfg.rank_tol)?;
    Ok((kernels, bundle))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainSummary {
    pub model_path: PathBuf,
    pub trace_path: PathBuf,
    pub training_error: f64,
    pub final_objective: f64,
    pub rounds: usize,
    pub stop_reason: String,
}

pub fn cmd_train(cfg: &RunConfig) -> Result<(Model, TrainTrace, TrainSummary)> {
    require_kernels(cfg)?;
    let data = load_data(cfg)?;
    let (model, trace) = train(&data, &cfg.kernels, &cfg.params, &cfg.train, cfg.rank_tol)?;
    let scores = model.evaluate_many(&data.s_points)?;
    let model_path = cfg.output_dir.join("model.json");
    let trace_path = cfg.output_dir.join("trace.csv");
    write_file(&model_path, &model.to_json()?)?;
    write_file(&trace_path, &trace.to_csv())?;
    write_file(
        &cfg.output_dir.join("trace.json"),
        &serde_json::to_string_pretty(&trace)?,
    )?;
    write_metadata(&cfg.output_dir, "train")?;
    let summary = TrainSummary {
        model_path,
        trace_path,
        training_error: training_error(&scores, &data.s_labels),
        final_objective: trace.final_objective(),
        rounds: trace.rounds.len() - 1,
        stop_reason: trace.stop_reason.clone(),
    };
    Ok((model, trace, summary))
}

/// Scores every row of `data` and writes `index,score,label` to `out`.
/// With `labeled`, rows carry a leading label that is ignored.
pub fn cmd_predict(model_path: &Path, data: &Path, format: DataFormat, labeled: bool, out: &Path) -> Result<Vec<f64>> {
    let model = Model::load(model_path)?;
    let dim = model.space.anchor.first().map(Vec::len);
    let text = fs::read_to_string(data)?;
    let points = if labeled {
        parse_labeled(&text, format, dim)?.0
    } else {
        parse_unlabeled(&text, format, dim)?
    };
    let scores = model.evaluate_many(&points)?;
    let mut csv = String::from("index,score,label\n");
    for (i, s) in scores.iter().enumerate() {
        csv.push_str(&format!("{i},{s:e},{}\n", crate::hypothesis::sign_label(*s)));
    }
    write_file(out, &csv)?;
    Ok(scores)
}

pub fn cmd_bounds(cfg: &RunConfig, model: Option<&Path>) -> Result<BoundReport> {
    let data = load_data(cfg)?;
    let (_, bundle) = labeled_bundle(cfg, &data)?;
    let gap = eigengap_plugin(&bundle, cfg.params.r)?;
    let mut report = theorem1_bound(&cfg.params, bundle.num_kernels(), bundle.m, gap)?;
    if let Some(path) = model {
        let model = Model::load(path)?;
        let scores = model.evaluate_many(&data.s_points)?;
        let loss = margin_loss_from_scores(&scores, &data.s_labels, cfg.rho)?;
        report = theorem2_bound(&report, loss, cfg.rho)?;
    }
    write_report(cfg, "bounds", &report.to_json()?, Some(&report.to_csv()))?;
    Ok(report)
}

pub fn cmd_rademacher(cfg: &RunConfig) -> Result<RademacherEstimate> {
    let data = load_data(cfg)?;
    let (_, bundle) = labeled_bundle(cfg, &data)?;
    let method = RademacherMethod::MonteCarlo {
        draws: cfg.rademacher_draws,
        seed: cfg.seed,
    };
    let est = estimate_rademacher(&bundle, &cfg.params, method)?;
    write_report(cfg, "rademacher", &est.to_json()?, Some(&est.to_csv()))?;
    Ok(est)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            return Ok(self);
        }
        let failed: Vec<&str> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        Err(Error::Verification(format!("failed checks: {}", failed.join(", "))))
    }
}

fn check(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match f() {
        Ok((passed, detail)) => CheckResult {
            name: name.into(),
            passed,
            detail,
        },
        Err(e) => CheckResult {
            name: name.into(),
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

fn random_signs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// Coordinate-linear kernels on consecutive disjoint coordinate blocks.
fn disjoint_kernels(rng: &mut ChaCha8Rng, p: usize) -> (Vec<KernelSpec>, usize) {
    let mut next = 0;
    let kernels = (0..p)
        .map(|_| {
            let width = rng.random_range(1..=3);
            let spec = KernelSpec::coordinate_linear((next..next + width).collect()).expect("non-empty block");
            next += width;
            spec
        })
        .collect();
    (kernels, next)
}

/// Runs the numerical checks of the bounds and identities. Sizes are kept
/// small enough for an interactive run; `cfg.seed` and `cfg.rademacher_draws`
/// control the Monte-Carlo parts.
pub fn verify_suite(cfg: &RunConfig) -> VerifyReport {
    let seed = cfg.seed;
    let draws = cfg.rademacher_draws;
    let mut checks = Vec::new();

    checks.push(check("eigengap-proposition", || {
        let mut worst = 0.0_f64;
        for eps in [1e-6, 0.5, 1.0] {
            let e = eigengap_proposition(eps)?;
            worst = worst.max((e.lhs - 2.0).abs()).max((e.rhs - 2.0).abs());
        }
        Ok((worst <= 1e-12, format!("max |value - 2| = {worst:e}")))
    }));

    checks.push(check("lower-bound-sandwich", || {
        let inst = lower_bound_construct(32, 4, 0.4)?;
        let est = estimate_rademacher(&inst.bundle, &inst.params, RademacherMethod::MonteCarlo { draws, seed })?;
        let upper = theorem1_bound(&inst.params, 1, 32, eigengap_plugin(&inst.bundle, 4)?)?.total;
        let ok = est.estimate + 3.0 * est.stderr >= inst.lower_bound && est.estimate - 3.0 * est.stderr <= upper;
        Ok((
            ok,
            format!(
                "lower {:.6} <= estimate {:.6} (stderr {:.2e}) <= upper {:.4}",
                inst.lower_bound, est.estimate, est.stderr, upper
            ),
        ))
    }));

    checks.push(check("upper-bound-dominance", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51);
        let mut worst = f64::INFINITY;
        for p in 1..=3 {
            let (kernels, dim) = disjoint_kernels(&mut rng, p);
            let kernels: Vec<_> = kernels
                .into_iter()
                .map(|mut k| {
                    k.normalize = true;
                    k
                })
                .collect();
            let pts = random_points(&mut rng, 16, dim);
            let kernels = normalize_flagged(&kernels, &pts)?;
            let bundle = build_bundle(&kernels, &pts, cfg.rank_tol)?;
            let params = ConstraintParams {
                r: 1,
                lambda_r: 0.5,
                nu: 2.0 * (p * p) as f64,
                delta: 0.05,
            };
            let est = estimate_rademacher(
                &bundle,
                &params,
                RademacherMethod::MonteCarlo {
                    draws: draws.min(500),
                    seed,
                },
            )?;
            let bound = theorem1_bound(&params, p, 16, eigengap_plugin(&bundle, 1)?)?.total;
            worst = worst.min(bound - (est.estimate - 3.0 * est.stderr));
        }
        Ok((
            worst >= 0.0,
            format!("smallest bound - (estimate - 3 stderr) = {worst:.4}"),
        ))
    }));

    checks.push(check("khintchine", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4b);
        let mut worst = f64::INFINITY;
        for i in 0..10 {
            let raw: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n: f64 = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            let v: Vec<f64> = raw.iter().map(|x| x / n).collect();
            let e = khintchine_check(&v, draws, seed.wrapping_add(i))?;
            worst = worst.min(e.estimate + 3.0 * e.stderr - std::f64::consts::FRAC_1_SQRT_2);
        }
        Ok((worst >= 0.0, format!("smallest margin over 2^-1/2 = {worst:.4}")))
    }));

    checks.push(check("massart", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4d);
        let mut details = Vec::new();
        let mut ok = true;
        for p in 1..=3 {
            let (kernels, dim) = disjoint_kernels(&mut rng, p);
            let pts = random_points(&mut rng, 8, dim);
            let bundle = build_bundle(&kernels, &pts, cfg.rank_tol)?;
            let mc = massart_check(&bundle, draws, seed)?;
            let exact = exact_massart(&bundle)?;
            ok &= mc.mc.estimate <= mc.bound + 3.0 * mc.mc.stderr && exact <= mc.bound;
            details.push(format!("p={p}: exact {exact:.4} <= {:.4}", mc.bound));
        }
        Ok((ok, details.join("; ")))
    }));

    checks.push(check("spectral-identity", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x53);
        let mut worst = 0.0_f64;
        for _ in 0..10 {
            let (m, d) = (rng.random_range(3..=10), rng.random_range(1..=5));
            let pts = random_points(&mut rng, m, d);
            let bundle = build_bundle(&[KernelSpec::linear()], &pts, cfg.rank_tol)?;
            let cov = explicit_covariance(&ExplicitFeatureMap::from_spec(&KernelSpec::linear(), d)?, &pts)?;
            let ev = sorted_eigenvalues(&cov);
            let top = bundle.spectra[0].values[0].max(f64::MIN_POSITIVE);
            for (a, b) in ev.iter().zip(&bundle.spectra[0].values).take(m.min(d)) {
                worst = worst.max((a - b).abs() / top);
            }
        }
        Ok((worst <= 1e-8, format!("max relative difference {worst:e}")))
    }));

    checks.push(check("projection-oracle", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x50);
        let mut worst = 0.0_f64;
        for _ in 0..20 {
            let p = rng.random_range(1..=3);
            let m = rng.random_range(2..=12);
            let (kernels, dim) = disjoint_kernels(&mut rng, p);
            let pts = random_points(&mut rng, m, dim);
            let bundle = build_bundle(&kernels, &pts, cfg.rank_tol)?;
            let maps: Vec<_> = kernels
                .iter()
                .map(|k| ExplicitFeatureMap::from_spec(k, dim))
                .collect::<Result<_>>()?;
            let mu: Vec<f64> = (0..p).map(|_| rng.random_range(0.1..1.0)).collect();
            let sigma = random_signs(&mut rng, m);
            for r in 1..=bundle.total_rank() {
                let fast = projected_sigma_norm(&bundle, &mu, r, &sigma)?;
                let slow = explicit_projection_norm(&maps, &mu, r, &sigma, &pts)?;
                worst = worst.max((fast - slow).abs() / slow.max(1e-12));
            }
        }
        Ok((worst <= 1e-8, format!("max relative error {worst:e}")))
    }));

    checks.push(check("exhaustive-consistency", || {
        let inst = lower_bound_construct(8, 2, 0.3)?;
        let exact = exhaustive_rademacher(&inst.bundle, &inst.params, 10)?;
        let est = estimate_rademacher(&inst.bundle, &inst.params, RademacherMethod::MonteCarlo { draws, seed })?;
        let ok = (est.estimate - exact).abs() <= 3.0 * est.stderr;
        Ok((
            ok,
            format!("exact {exact:.6}, estimate {:.6} +/- {:.2e}", est.estimate, est.stderr),
        ))
    }));

    checks.push(check("complexity-terms", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x43);
        let mut ok = true;
        for p in 1..=3 {
            let (kernels, dim) = disjoint_kernels(&mut rng, p);
            let pts = random_points(&mut rng, 6, dim);
            let bundle = build_bundle(&kernels, &pts, cfg.rank_tol)?;
            for r in 1..=6 * p {
                ok &= compare_complexity_terms(&bundle, r)?.coupled == brute_force_coupled_term(&bundle, r);
            }
        }
        Ok((ok, "coupled term matches enumeration".into()))
    }));

    checks.push(check("concentration", || {
        let ccfg = ConcentrationConfig {
            trials: 100,
            seed,
            ..ConcentrationConfig::default()
        };
        let rep = concentration_experiment(&ccfg)?;
        let rate = rep.rows.iter().map(|r| r.satisfaction_rate).fold(1.0, f64::min);
        let ok = rate >= 0.95 && (rep.slope + 0.5).abs() <= 0.2;
        Ok((ok, format!("min satisfaction {rate:.3}, slope {:.3}", rep.slope)))
    }));

    VerifyReport { seed, checks }
}

/// Runs [`verify_suite`] and writes `verify.json`. Use
/// [`VerifyReport::into_result`] to turn failed checks into an error.
pub fn cmd_verify(cfg: &RunConfig) -> Result<VerifyReport> {
    let report = verify_suite(cfg);
    let mut csv = String::from("name,passed,detail\n");
    for c in &report.checks {
        csv.push_str(&format!("{},{},\"{}\"\n", c.name, c.passed, c.detail.replace('"', "'")));
    }
    write_report(cfg, "verify", &serde_json::to_string_pretty(&report)?, Some(&csv))?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<i8>,
    /// Single linear kernel, rank-1 projection, then a linear classifier.
    pub plain_error: f64,
    pub plain_index_set: String,
    /// One coordinate-linear kernel per axis, r = 1, coupled training.
    pub coupled_error: f64,
    pub coupled_index_set: String,
    pub coupled_mu: Vec<f64>,
}

/// Four points where the top principal direction merges the two classes.
pub fn figure_one_data() -> Dataset {
    let pts = vec![vec![-2.0, 1.0], vec![2.0, 1.0], vec![-2.0, -1.0], vec![2.0, -1.0]];
    Dataset::same_sample(pts, vec![1, 1, -1, -1]).expect("valid demo data")
}

pub fn run_demo() -> Result<DemoReport> {
    let data = figure_one_data();
    let params = ConstraintParams {
        r: 1,
        lambda_r: 100.0,
        nu: 10.0,
        delta: 0.05,
    };
    let cfg = TrainConfig::default();
    let mut linear = KernelSpec::linear();
    linear.normalize = true;
    let (plain, _) = train(&data, &[linear], &params, &cfg, crate::spectral::DEFAULT_RANK_TOL)?;
    let mut axes = Vec::new();
    for c in 0..2 {
        let mut k = KernelSpec::coordinate_linear(vec![c])?;
        k.normalize = true;
        axes.push(k);
    }
    let (coupled, _) = train(&data, &axes, &params, &cfg, crate::spectral::DEFAULT_RANK_TOL)?;
    for model in [&plain, &coupled] {
        if !check_m(&model.mu, &model.params, &model.space.bundle)?.feasible() {
            return Err(Error::numeric("demo model left the feasible set"));
        }
    }
    let error = |m: &Model| -> Result<f64> { Ok(training_error(&m.evaluate_many(&data.s_points)?, &data.s_labels)) };
    Ok(DemoReport {
        plain_error: error(&plain)?,
        plain_index_set: plain.selection.dominant(1).to_token_string(),
        coupled_error: error(&coupled)?,
        coupled_index_set: coupled.selection.dominant(1).to_token_string(),
        coupled_mu: coupled.mu.clone(),
        points: data.s_points,
        labels: data.s_labels,
    })
}

pub fn cmd_demo(out_dir: &Path) -> Result<DemoReport> {
    let report = run_demo()?;
    write_file(&out_dir.join("demo.json"), &serde_json::to_string_pretty(&report)?)?;
    write_metadata(out_dir, "demo")?;
    Ok(report)
}
