// Joint training of kernel weights, projection and separator on the
// four-point example, in each of the three selection modes.

use cndr::cli::figure_one_data;
use cndr::constraints::ConstraintParams;
use cndr::hypothesis::training_error;
use cndr::kernels::KernelSpec;
use cndr::spectral::DEFAULT_RANK_TOL;
use cndr::trainer::{train, TrainConfig, TrainMode};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let data = figure_one_data();
    let mut kernels = Vec::new();
    for c in 0..2 {
        let mut k = KernelSpec::coordinate_linear(vec![c])?;
        k.normalize = true;
        kernels.push(k);
    }
    let params = ConstraintParams {
        r: 1,
        lambda_r: 100.0,
        nu: 10.0,
        delta: 0.05,
    };
    for mode in [
        TrainMode::Coupled,
        TrainMode::DiscreteRelaxed,
        TrainMode::ContinuousRelaxed,
    ] {
        let cfg = TrainConfig {
            mode,
            ..TrainConfig::default()
        };
        let (model, trace) = train(&data, &kernels, &params, &cfg, DEFAULT_RANK_TOL)?;
        let err = training_error(&model.evaluate_many(&data.s_points)?, &data.s_labels);
        println!(
            "{mode:?}: {} rounds ({}), objective {:.4}, mu {:.3?}, error {err}",
            trace.rounds.len() - 1,
            trace.stop_reason,
            trace.final_objective(),
            model.mu
        );
        if mode == TrainMode::Coupled {
            assert_eq!(err, 0.0);
            print!("{}", trace.to_csv());
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
