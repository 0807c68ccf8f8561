// The lower-bound instance: the Monte-Carlo estimate sits between
// sqrt(Lambda / 2m) and the upper bound.

use cndr::complexity::{estimate_rademacher, lower_bound_construct, theorem1_bound, RademacherMethod};
use cndr::spectral::eigengap_plugin;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let inst = lower_bound_construct(32, 4, 0.4)?;
    let est = estimate_rademacher(
        &inst.bundle,
        &inst.params,
        RademacherMethod::MonteCarlo { draws: 5000, seed: 3 },
    )?;
    let upper = theorem1_bound(&inst.params, 1, 32, eigengap_plugin(&inst.bundle, 4)?)?;
    println!("eigenvalues {:.4?}", &inst.bundle.spectra[0].values[..4]);
    println!(
        "{:.5} <= {:.5} (+/- {:.1e}) <= {:.4}",
        inst.lower_bound, est.estimate, est.stderr, upper.total
    );
    assert!(est.estimate + 3.0 * est.stderr >= inst.lower_bound);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
