// Membership checks for the kernel-weight set and projection onto it.

use cndr::constraints::{check_m, check_n, kappa, project_to_m, ConstraintParams};
use cndr::spectral::{SpectralBundle, DEFAULT_RANK_TOL};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let e = |n: usize, i: usize| -> Vec<f64> { (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect() };
    let bundle = SpectralBundle::from_spectra(
        3,
        DEFAULT_RANK_TOL,
        vec![
            (vec![0.6, 0.3, 0.1], vec![e(3, 0), e(3, 1), e(3, 2)]),
            (vec![0.5, 0.4, 0.1], vec![e(3, 0), e(3, 1), e(3, 2)]),
        ],
    )?;
    let params = ConstraintParams {
        r: 2,
        lambda_r: 0.5,
        nu: 6.0,
        delta: 0.05,
    };
    let start = [0.9, 0.1];
    let before = check_m(&start, &params, &bundle)?;
    println!(
        "start {start:?}: feasible = {}, Ky-Fan {:.4} vs {:.4}",
        before.feasible(),
        before.kyfan.value,
        before.kyfan.bound
    );

    let mu = project_to_m(&start, &params, &bundle)?;
    let after = check_m(&mu, &params, &bundle)?;
    println!("projected {mu:.6?}: feasible = {}", after.feasible());
    assert!(after.feasible());

    // the sample-side set uses the looser budget Lambda + kappa
    println!("kappa(p=2, delta=0.05) = {:.4}", kappa(2, 0.05)?);
    assert!(check_n(&mu, &params, &bundle)?.feasible());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
