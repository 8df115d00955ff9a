//! Scan the hidden size of a Bayesian-regularized tanh network and save the winner.

use aqcal::experiment::LabeledStream;
use aqcal::models::{scan_snn, snn_train_report, CalibrationModel, SnnConfig};
use aqcal::simulate::{default_scenario, generate};
use aqcal::FeatureVector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let stream = LabeledStream::from_dataset(&generate(&default_scenario(1200))?.dataset);
    let (train, test) = stream.samples.split_at(672);
    let cfg = SnnConfig::default();
    let scan = scan_snn(train, &[3, 5, 7], 1, &cfg)?;
    for (h, mse) in &scan.scores {
        println!("hidden {h}: validation MSE {mse:.4}");
    }
    let (_, report) = snn_train_report(train, scan.hidden, 1, &cfg)?;
    println!("chosen {} units, stopped after {} epochs ({:?})", scan.hidden, report.epochs, report.stop);

    let model = CalibrationModel::Snn(scan.model);
    let restored = CalibrationModel::from_container(&model.to_container())?;
    let mae = test
        .iter()
        .map(|s| (restored.predict(&FeatureVector::from_array(s.x)).unwrap() - s.y).abs())
        .sum::<f64>()
        / test.len() as f64;
    println!("test MAE {mae:.2} ppb after a container round trip");
    Ok(())
}
