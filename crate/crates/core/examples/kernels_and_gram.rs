// Kernel families, normalization and normalized Gram matrices.

use cndr::kernels::{eval_kernel, max_diagonal, normalize_spec, normalized_gram, KernelSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let points = vec![vec![0.5, 1.0, -0.2], vec![-1.0, 0.3, 0.8], vec![2.0, -0.4, 0.1]];
    let specs = vec![
        KernelSpec::linear(),
        KernelSpec::polynomial(2)?,
        KernelSpec::gaussian(1.0)?,
        KernelSpec::coordinate_linear(vec![0, 2])?,
    ];
    for spec in &specs {
        // rescale so that K(x, x) <= 1 on the sample
        let spec = normalize_spec(spec, &points)?;
        let g = normalized_gram(&spec, &points)?;
        println!(
            "{:<28} K(x0,x1) = {:+.4}  max diag = {:.3}  trace/m = {:.4}",
            spec.label(),
            eval_kernel(&spec, &points[0], &points[1])?,
            max_diagonal(&spec, &points)?,
            g.trace()
        );
        assert!(max_diagonal(&spec, &points)? <= 1.0 + 1e-12);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
