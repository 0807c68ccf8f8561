// Per-kernel spectra, the weighted union spectrum, the selected index set
// and the Ky-Fan r-norm of the kernel weights.

use cndr::kernels::{normalize_spec, KernelSpec};
use cndr::spectral::{build_bundle, kyfan_r, top_r_index_set, union_spectrum, SpectralBundle, DEFAULT_RANK_TOL};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let points: Vec<Vec<f64>> = (0..8)
        .map(|i| {
            let t = i as f64 / 7.0;
            vec![2.0 * t - 1.0, (3.0 * t).sin(), t * t]
        })
        .collect();
    let kernels = vec![
        normalize_spec(&KernelSpec::coordinate_linear(vec![0, 1])?, &points)?,
        normalize_spec(&KernelSpec::coordinate_linear(vec![2])?, &points)?,
    ];
    let bundle = build_bundle(&kernels, &points, DEFAULT_RANK_TOL)?;
    for (k, s) in bundle.spectra.iter().enumerate() {
        println!(
            "kernel {k}: rank {}, top eigenvalues {:.4?}",
            s.rank,
            &s.values[..s.rank]
        );
    }

    let mu = [0.7, 0.3];
    for entry in union_spectrum(&bundle, &mu)?.iter().take(3) {
        println!("  {:?} -> {:.4}", entry.pair, entry.value);
    }
    let r = 2;
    let set = top_r_index_set(&bundle, &mu, r)?;
    println!(
        "top-{r} pairs: {}, Ky-Fan norm {:.4}",
        set.to_token_string(),
        kyfan_r(&bundle, &mu, r)?
    );

    // bundles round-trip through JSON for caching
    let restored = SpectralBundle::from_json(&bundle.to_json()?)?;
    assert_eq!(restored.content_hash(), bundle.content_hash());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
