// The smaller numerical facts behind the bounds: the eigengap example,
// Khintchine and Massart inequalities, the coupled versus per-kernel
// complexity terms, and the kernel independence diagnostic.

use cndr::complexity::{
    compare_complexity_terms, eigengap_proposition, independence_diagnostic, khintchine_check, massart_check,
};
use cndr::kernels::{normalize_spec, KernelSpec};
use cndr::spectral::{build_bundle, DEFAULT_RANK_TOL};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let e = eigengap_proposition(0.5)?;
    println!(
        "eigengap example: trace-norm lhs {}, operator-norm lhs {}, rhs {}",
        e.lhs, e.lhs_operator, e.rhs
    );

    let v = vec![0.5; 4];
    let k = khintchine_check(&v, 4000, 11)?;
    println!(
        "E|v.sigma| = {:.4} +/- {:.1e} (>= {:.4})",
        k.estimate,
        k.stderr,
        std::f64::consts::FRAC_1_SQRT_2
    );

    let points: Vec<Vec<f64>> = (0..8).map(|i| vec![(i as f64).sin(), (i as f64 * 0.4).cos()]).collect();
    let kernels = vec![
        normalize_spec(&KernelSpec::coordinate_linear(vec![0])?, &points)?,
        normalize_spec(&KernelSpec::gaussian(0.5)?, &points)?,
    ];
    let bundle = build_bundle(&kernels, &points, DEFAULT_RANK_TOL)?;
    let ms = massart_check(&bundle, 4000, 12)?;
    println!("E max |v.sigma| = {:.4} <= {:.4}", ms.mc.estimate, ms.bound);

    for r in [1, 4, 8] {
        let t = compare_complexity_terms(&bundle, r)?;
        println!(
            "r = {r}: coupled term {:.3}, per-kernel trace term {:.3}",
            t.coupled, t.standard
        );
    }

    let mut grid = points.clone();
    grid.extend((0..10).map(|i| vec![0.2 * i as f64 - 1.0, 0.1 * i as f64]));
    let scores = independence_diagnostic(&kernels, &points, &grid)?;
    println!("independence residuals {scores:.4?}");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
