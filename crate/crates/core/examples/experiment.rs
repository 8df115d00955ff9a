//! A reduced experiment: static versus adapted SNN and ELM on a short deployment.

use aqcal::dataset::ModelKind;
use aqcal::experiment::{run_grid, ExperimentConfig, Strategy};
use aqcal::schedule::UpdateMode;
use aqcal::simulate::{default_scenario, generate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate(&default_scenario(3000))?.dataset;
    let cfg = ExperimentConfig {
        models: vec![
            (ModelKind::Snn, Strategy::Static),
            (ModelKind::Snn, Strategy::IncrementalRetrain),
            (ModelKind::Elm, Strategy::Static),
            (ModelKind::Elm, Strategy::AdaptiveUpdate),
        ],
        grid: vec![(24, 12), (240, 24)],
        modes: vec![UpdateMode::Regular],
        offsets: vec![0],
        init_repeats: 1,
        test_span: 2000,
        ..ExperimentConfig::default()
    };
    let report = run_grid(&data, &cfg)?;
    for cell in &report.cells {
        match cell.mae() {
            Some(mae) => println!("{:<40} MAE {mae:.2}", cell.cell.to_string()),
            None => println!("{:<40} absent", cell.cell.to_string()),
        }
    }
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    println!("report.csv would hold {} lines", String::from_utf8(csv)?.lines().count());
    Ok(())
}
