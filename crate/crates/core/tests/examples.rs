mod cli_workflow_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/cli_workflow.rs"));
}

mod concentration_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/concentration.rs"));
}

mod data_formats_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data_formats.rs"));
}

mod explicit_oracle_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/explicit_oracle.rs"));
}

mod feasible_set_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/feasible_set.rs"));
}

mod generalization_bounds_example {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/generalization_bounds.rs"
    ));
}

mod inequality_checks_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/inequality_checks.rs"));
}

mod kernels_and_gram_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/kernels_and_gram.rs"));
}

mod lower_bound_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/lower_bound.rs"));
}

mod predict_roundtrip_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/predict_roundtrip.rs"));
}

mod rademacher_estimate_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/rademacher_estimate.rs"));
}

mod spectral_bundle_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/spectral_bundle.rs"));
}

mod train_coupled_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/train_coupled.rs"));
}

#[test]
fn cli_workflow_example_runs() {
    cli_workflow_example::run_example().expect("cli workflow example should run");
}

#[test]
fn concentration_example_runs() {
    concentration_example::run_example().expect("concentration example should run");
}

#[test]
fn data_formats_example_runs() {
    data_formats_example::run_example().expect("data formats example should run");
}

#[test]
fn explicit_oracle_example_runs() {
    explicit_oracle_example::run_example().expect("explicit oracle example should run");
}

#[test]
fn feasible_set_example_runs() {
    feasible_set_example::run_example().expect("feasible set example should run");
}

#[test]
fn generalization_bounds_example_runs() {
    generalization_bounds_example::run_example().expect("generalization bounds example should run");
}

#[test]
fn inequality_checks_example_runs() {
    inequality_checks_example::run_example().expect("inequality checks example should run");
}

#[test]
fn kernels_and_gram_example_runs() {
    kernels_and_gram_example::run_example().expect("kernels and gram example should run");
}

#[test]
fn lower_bound_example_runs() {
    lower_bound_example::run_example().expect("lower bound example should run");
}

#[test]
fn predict_roundtrip_example_runs() {
    predict_roundtrip_example::run_example().expect("predict roundtrip example should run");
}

#[test]
fn rademacher_estimate_example_runs() {
    rademacher_estimate_example::run_example().expect("rademacher estimate example should run");
}

#[test]
fn spectral_bundle_example_runs() {
    spectral_bundle_example::run_example().expect("spectral bundle example should run");
}

#[test]
fn train_coupled_example_runs() {
    train_coupled_example::run_example().expect("train coupled example should run");
}
