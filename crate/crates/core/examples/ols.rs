//! Multilinear calibration fitted on one month and tested on the next.

use aqcal::experiment::LabeledStream;
use aqcal::models::{train_linear, CalibrationModel};
use aqcal::simulate::{default_scenario, generate};
use aqcal::FeatureVector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let stream = LabeledStream::from_dataset(&generate(&default_scenario(1600))?.dataset);
    let (train, test) = stream.samples.split_at(672);
    let model = train_linear(train)?;
    println!("slopes {:?}", model.slopes().iter().map(|s| format!("{s:.4}")).collect::<Vec<_>>());
    println!("intercept {:.3}", model.intercept());
    let model = CalibrationModel::Multilinear(model);
    let mae = test
        .iter()
        .map(|s| (model.predict(&FeatureVector::from_array(s.x)).unwrap() - s.y).abs())
        .sum::<f64>()
        / test.len() as f64;
    println!("test MAE {mae:.2} ppb on {} hours", test.len());
    Ok(())
}
