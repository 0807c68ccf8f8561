// How far the rank-r projection built on the labeled sample drifts from the
// one built on a larger unlabeled sample.

use cndr::complexity::{concentration_experiment, ConcentrationConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ConcentrationConfig {
        trials: 40,
        ..ConcentrationConfig::default()
    };
    let rep = concentration_experiment(&cfg)?;
    println!("kappa {:.3}, nu {:.1}, gap {:.2}", rep.kappa, rep.nu, rep.eigengap);
    for row in &rep.rows {
        println!(
            "m {:>4}: mean ||(P_U - P_S) v|| {:.4}, bound {:.2}, satisfied {:.0}%, Ky-Fan drift {:.4}",
            row.m,
            row.mean_difference,
            row.bound_coefficient,
            100.0 * row.satisfaction_rate,
            row.kyfan_drift_mean
        );
    }
    println!("log-log slope {:.3}", rep.slope);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
