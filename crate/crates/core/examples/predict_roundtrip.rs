// Saving a trained model and scoring new points with the reloaded copy.

use cndr::constraints::ConstraintParams;
use cndr::data::Dataset;
use cndr::hypothesis::Model;
use cndr::kernels::KernelSpec;
use cndr::spectral::DEFAULT_RANK_TOL;
use cndr::trainer::{train, Loss, TrainConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let s: Vec<Vec<f64>> = (0..12)
        .map(|i| vec![(i as f64 * 0.9).sin(), (i % 2) as f64 - 0.5 + 0.05 * i as f64])
        .collect();
    let labels: Vec<i8> = (0..12).map(|i| if i % 2 == 1 { 1 } else { -1 }).collect();
    let u: Vec<Vec<f64>> = (0..24)
        .map(|i| vec![(i as f64 * 0.37).cos(), (i as f64 * 0.61).sin() * 0.6])
        .collect();
    let data = Dataset::new(s, labels, u)?;

    let mut gauss = KernelSpec::gaussian(1.0)?;
    gauss.normalize = true;
    let mut lin = KernelSpec::coordinate_linear(vec![1])?;
    lin.normalize = true;
    let params = ConstraintParams {
        r: 2,
        lambda_r: 0.8,
        nu: 8.0,
        delta: 0.05,
    };
    let cfg = TrainConfig {
        loss: Loss::Logistic,
        ..TrainConfig::default()
    };
    let (model, _) = train(&data, &[gauss, lin], &params, &cfg, DEFAULT_RANK_TOL)?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.json");
    model.save(&path)?;
    let loaded = Model::load(&path)?;
    let fresh = [vec![0.1, 0.4], vec![-0.3, -0.5]];
    for x in &fresh {
        let (a, b) = (model.evaluate(x)?, loaded.evaluate(x)?);
        assert_eq!(a.to_bits(), b.to_bits());
        println!("h({x:?}) = {a:+.5} -> label {}", loaded.predict(x)?);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
