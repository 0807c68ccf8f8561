// Reading labeled and unlabeled samples from CSV and svmlight text.

use cndr::data::{parse_labeled, parse_unlabeled, DataFormat, Dataset};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let csv = "# label, x, y\n+1,0.5,1.0\n-1,-0.25,0.75\n";
    let (points, labels) = parse_labeled(csv, DataFormat::Csv, None)?;
    println!("csv: {points:?} {labels:?}");

    let svm = "-1 3:2.5\n+1 1:0.5 4:-1\n";
    let (sparse, labels) = parse_labeled(svm, DataFormat::Svmlight, Some(4))?;
    println!("svmlight: {sparse:?} {labels:?}");

    let unlabeled = parse_unlabeled("0.1,0.2\n0.3,0.4\n0.5,0.6\n", DataFormat::Csv, Some(2))?;
    let data = Dataset::new(points, vec![1, -1], unlabeled)?;
    println!("m = {}, u = {}, dim = {}", data.m(), data.u(), data.dim);

    match parse_labeled("2,0.5\n", DataFormat::Csv, None) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!("label 2 is not allowed"),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
