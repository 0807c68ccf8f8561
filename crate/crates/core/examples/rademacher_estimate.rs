// Monte-Carlo and exhaustive estimates of the empirical Rademacher
// complexity of the projected hypothesis class.

use cndr::complexity::{estimate_rademacher, RademacherMethod};
use cndr::constraints::ConstraintParams;
use cndr::kernels::{normalize_spec, KernelSpec};
use cndr::spectral::{build_bundle, DEFAULT_RANK_TOL};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let points: Vec<Vec<f64>> = (0..10)
        .map(|i| {
            let t = i as f64;
            vec![(0.7 * t).sin(), (1.3 * t).cos(), 0.2 * t - 1.0]
        })
        .collect();
    let single = vec![normalize_spec(&KernelSpec::linear(), &points)?];
    let pair = vec![
        normalize_spec(&KernelSpec::coordinate_linear(vec![0, 1])?, &points)?,
        normalize_spec(&KernelSpec::coordinate_linear(vec![2])?, &points)?,
    ];
    let params = ConstraintParams {
        r: 2,
        lambda_r: 0.4,
        nu: 8.0,
        delta: 0.05,
    };
    for kernels in [single, pair] {
        let bundle = build_bundle(&kernels, &points, DEFAULT_RANK_TOL)?;
        let mc = estimate_rademacher(&bundle, &params, RademacherMethod::MonteCarlo { draws: 2000, seed: 1 })?;
        let exact = estimate_rademacher(&bundle, &params, RademacherMethod::Exhaustive)?;
        println!(
            "p = {}: MC {:.5} +/- {:.1e}, all 2^10 signs {:.5} (inner sup: {})",
            bundle.num_kernels(),
            mc.estimate,
            mc.stderr,
            exact.estimate,
            exact.sup_method
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
