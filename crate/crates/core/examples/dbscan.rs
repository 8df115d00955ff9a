//! Flag outliers in the joint standardized space of features and label.

use aqcal::preprocess::{dbscan_outliers, DbscanParams};
use aqcal::simulate::{default_scenario, generate};
use aqcal::Flag;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut d = generate(&default_scenario(2000))?.dataset;
    for i in (100..d.len()).step_by(250) {
        d.records[i].features.we_no2 += 60.0;
    }
    let (cleaned, summary) = dbscan_outliers(&d, &DbscanParams::default())?;
    println!("{} points, {} clusters, {} flagged", summary.points, summary.clusters, summary.flagged);
    let spiked: Vec<usize> = (100..d.len()).step_by(250).collect();
    let caught = spiked.iter().filter(|&&i| cleaned.records[i].flags.contains(Flag::Outlier)).count();
    println!("injected spikes caught: {caught}/{}", spiked.len());
    Ok(())
}
