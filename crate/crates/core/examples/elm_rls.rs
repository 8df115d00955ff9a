//! Keep an RBF extreme learning machine current with recursive least squares
//! and compare it against the frozen initial fit.

use aqcal::experiment::LabeledStream;
use aqcal::models::{elm_fit, elm_update, CalibrationModel, ElmConfig};
use aqcal::simulate::{default_scenario, generate};
use aqcal::FeatureVector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let stream = LabeledStream::from_dataset(&generate(&default_scenario(8760))?.dataset);
    let (init, rest) = stream.samples.split_at(672);
    let first = elm_fit(init, 45, 3, &ElmConfig::default())?;
    let frozen = CalibrationModel::Elm(first.clone());
    let mut live = first;
    let (mut err_frozen, mut err_live) = (0.0, 0.0);
    // one label every 24 hours, predictions scored on everything else
    for (day, chunk) in rest.chunks(24).enumerate() {
        let current = CalibrationModel::Elm(live.clone());
        for s in &chunk[1..] {
            let f = FeatureVector::from_array(s.x);
            err_frozen += (frozen.predict(&f)? - s.y).abs();
            err_live += (current.predict(&f)? - s.y).abs();
        }
        live = elm_update(&live, &chunk[..1])?;
        if day % 60 == 59 {
            println!("day {:>3}: cumulative abs error frozen {err_frozen:.0}, updated {err_live:.0}", day + 1);
        }
    }
    Ok(())
}
