// Complexity upper bound, margin bound and the matching lower-bound value.

use cndr::complexity::{theorem1_bound, theorem2_bound, theorem3_value};
use cndr::constraints::ConstraintParams;
use cndr::spectral::Eigengap;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let params = ConstraintParams {
        r: 5,
        lambda_r: 1.0,
        nu: 20.0,
        delta: 0.05,
    };
    for m in [100, 1_000, 10_000, 100_000] {
        let rep = theorem1_bound(&params, 3, m, Eigengap::exact(0.05))?;
        let margin = theorem2_bound(&rep, 0.1, 0.5)?.theorem2.expect("margin terms");
        println!(
            "m = {m:>6}: term1 {:.4}  term2 {:.4}  margin bound {:.4}  lower {:.5}  precondition {}",
            rep.term1,
            rep.term2,
            margin.total,
            theorem3_value(params.lambda_r, m),
            rep.precondition_holds
        );
    }
    // with one kernel the projection term vanishes
    let single = theorem1_bound(&params, 1, 1000, Eigengap::exact(0.05))?;
    assert_eq!(single.term2, 0.0);
    println!("{}", single.to_csv());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
