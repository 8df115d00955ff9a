//! Show which hours receive labels under the regular and opportunistic modes.

use aqcal::schedule::{enumerate_grid, plan, UpdateMode, UpdateSchedule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for mode in [UpdateMode::Regular, UpdateMode::Opportunistic] {
        let p = plan(&UpdateSchedule::new(24, 4, mode, 5), 100)?;
        println!("{} tau=24 pi=4 over 100 hours: {} labels", mode.name(), p.total_labels());
        for period in &p.periods {
            println!("  period {}: labels {:?}, adapt at {}", period.period, period.labels, period.adaptation_point);
        }
    }
    println!("grid has {} (tau, pi) pairs", enumerate_grid().len());
    Ok(())
}
