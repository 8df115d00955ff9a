//! Generate a synthetic year with drifting NO2 electrodes and show how the
//! raw signal decorrelates from the reference month by month.

use aqcal::simulate::{default_scenario, generate, monthly_correlation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = default_scenario(8760);
    let sim = generate(&scenario)?;
    let d = &sim.dataset;
    println!("{} hourly records, {} usable", d.len(), d.usable().len());

    let drift_free = generate(&scenario.without_drift())?;
    let with = monthly_correlation(d, scenario.start);
    let without = monthly_correlation(&drift_free.dataset, scenario.start);
    println!("month  corr(drift)  corr(no drift)");
    for (m, (a, b)) in with.iter().zip(&without).enumerate() {
        let show = |v: &Option<f64>| v.map_or("-".to_string(), |c| format!("{c:.3}"));
        println!("{:>5}  {:>11}  {:>14}", m + 1, show(a), show(b));
    }
    Ok(())
}
