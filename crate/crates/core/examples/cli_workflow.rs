// The command-line workflow driven from code: write a configuration and a
// data file, train, predict, and compute bounds.

use std::fs;

use cndr::cli::{cmd_bounds, cmd_predict, cmd_train};
use cndr::config::RunConfig;
use cndr::data::DataFormat;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let rows: String = (0..16)
        .map(|i| {
            let x = (i as f64 * 0.7).sin();
            let y = if i % 2 == 0 { 0.8 } else { -0.8 } + 0.1 * (i as f64).cos();
            format!("{},{x},{y}\n", if i % 2 == 0 { "+1" } else { "-1" })
        })
        .collect();
    fs::write(dir.path().join("train.csv"), rows)?;
    fs::write(
        dir.path().join("run.conf"),
        "data.labeled = train.csv\n\
         kernel.0.kind = coordinate-linear\nkernel.0.coords = 0\n\
         kernel.1.kind = coordinate-linear\nkernel.1.coords = 1\n\
         constraints.r = 1\nconstraints.lambda_r = 1.0\nconstraints.nu = 8\n\
         bounds.rho = 0.5\noutput.formats = json,csv\nseed = 5\n",
    )?;
    let cfg = RunConfig::load(&dir.path().join("run.conf"))?;
    let (_, _, summary) = cmd_train(&cfg)?;
    println!(
        "training error {} after {} rounds",
        summary.training_error, summary.rounds
    );
    let scores = cmd_predict(
        &summary.model_path,
        &dir.path().join("train.csv"),
        DataFormat::Csv,
        true,
        &dir.path().join("pred.csv"),
    )?;
    println!("first scores {:.4?}", &scores[..4]);
    let bounds = cmd_bounds(&cfg, Some(&summary.model_path))?;
    println!(
        "complexity bound {:.4}, margin bound {:.4}",
        bounds.total,
        bounds.theorem2.map_or(f64::NAN, |t| t.total)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
