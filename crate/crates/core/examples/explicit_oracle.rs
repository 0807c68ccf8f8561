// Checking the fast spectral formulas against explicit feature-space
// computations for finite-dimensional kernels.

use cndr::kernels::KernelSpec;
use cndr::oracle::{explicit_covariance, explicit_projection_norm, sorted_eigenvalues, ExplicitFeatureMap};
use cndr::spectral::{build_bundle, projected_sigma_norm, DEFAULT_RANK_TOL};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let points: Vec<Vec<f64>> = (0..6)
        .map(|i| {
            let t = i as f64;
            vec![(0.9 * t).cos(), (0.4 * t).sin(), 0.3 * t - 0.7]
        })
        .collect();
    let kernels = vec![
        KernelSpec::coordinate_linear(vec![0, 1])?,
        KernelSpec::coordinate_linear(vec![2])?,
    ];
    let bundle = build_bundle(&kernels, &points, DEFAULT_RANK_TOL)?;
    let maps: Vec<_> = kernels
        .iter()
        .map(|k| ExplicitFeatureMap::from_spec(k, 3))
        .collect::<Result<_, _>>()?;

    let cov = explicit_covariance(&maps[0], &points)?;
    println!("covariance eigenvalues {:.6?}", sorted_eigenvalues(&cov));
    println!("Gram eigenvalues       {:.6?}", &bundle.spectra[0].values[..2]);

    let mu = [0.4, 0.6];
    let sigma = [1.0, -1.0, -1.0, 1.0, 1.0, -1.0];
    for r in 1..=3 {
        let fast = projected_sigma_norm(&bundle, &mu, r, &sigma)?;
        let slow = explicit_projection_norm(&maps, &mu, r, &sigma, &points)?;
        println!("r = {r}: spectral {fast:.10}, explicit {slow:.10}");
        assert!((fast - slow).abs() <= 1e-10 * slow.max(1.0));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
