//! Average a raw 10-per-minute stream into hourly records and attach reference labels.

use aqcal::ingest::{aggregate_hourly, join_reference, RawSample, ReferenceRow};
use aqcal::{Flag, FeatureVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let start = 1_700_000_000 / 3600 * 3600;
    let mut raw = Vec::new();
    for hour in 0..6i64 {
        // hour 3 loses most of its samples
        let n = if hour == 3 { 200 } else { 600 };
        for k in 0..n {
            let t = start + hour * 3600 + k * 6;
            let wave = (k as f64 / 50.0).sin();
            raw.push(RawSample {
                timestamp: t,
                features: FeatureVector::from_array([220.0 + wave, 240.0, 350.0, 330.0, 410.0, 400.0, 18.0 + hour as f64, 60.0]),
            });
        }
    }
    let hourly = aggregate_hourly(&raw, 0.75)?;
    let refs: Vec<ReferenceRow> = (0..5)
        .map(|h| ReferenceRow {
            timestamp: start + h * 3600,
            no2_ppb: Some(20.0 + h as f64),
            co_ppm: None,
        })
        .collect();
    let (joined, report) = join_reference(&hourly, &refs)?;
    println!("matched {} labels, ignored {}", report.matched, report.ignored);
    for r in &joined.records {
        println!(
            "{} coverage {:.2} we_no2 {:.3} ref {:?} low_coverage {}",
            aqcal::dataset::format_timestamp(r.timestamp),
            r.coverage,
            r.features.we_no2,
            r.ref_no2,
            r.flags.contains(Flag::LowCoverage)
        );
    }
    Ok(())
}
