//! Round-tripping data through the CSV layer and the CLI report format.
//!
//! Exports two simulated groups to a wide CSV, ingests the file back, runs
//! the test and prints the JSON report the `covop` binary would emit.
//!
//! Run with: cargo run --release -p covop --example csv_workflow

use covop::csvio::{export_wide_csv, ingest_csv_path, Layout};
use covop::hilbert::Grid;
use covop::hypothesis::{run_test, TestConfig};
use covop::simulation::{generate_sample, FcpcModel, Population, ScoreLaw};

fn main() -> covop::Result<()> {
    let grid = Grid::uniform(0.0, 1.0, 15)?;
    let model = FcpcModel::with_orthonormal_fourier(
        grid,
        vec![1.5, 0.75],
        vec![0.0, 0.0],
        ScoreLaw::Gaussian,
    )?;
    let s1 = generate_sample(&model, 60, Population::First, 120, 91)?.relabeled("control");
    let s2 = generate_sample(&model, 60, Population::First, 120, 92)?.relabeled("treated");

    let path = std::env::temp_dir().join("covop_example_groups.csv");
    let mut buffer = Vec::new();
    export_wide_csv(&[s1.clone(), s2.clone()], &mut buffer)?;
    std::fs::write(&path, &buffer)?;
    println!("wrote {} bytes to {}", buffer.len(), path.display());

    let ingested = ingest_csv_path(&path, Layout::Wide)?;
    println!(
        "ingested {} groups: {:?}",
        ingested.len(),
        ingested.iter().map(|s| s.label()).collect::<Vec<_>>()
    );
    // The round trip is bit-exact.
    assert_eq!(ingested[0].values(), s1.values());
    assert_eq!(ingested[1].values(), s2.values());

    let config = TestConfig {
        n_boot: 1000,
        seed: 17,
        ..TestConfig::default()
    };
    let report = run_test(&ingested, &config)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report json")
    );
    Ok(())
}
