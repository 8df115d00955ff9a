//! Score a prediction series and smooth its absolute error for plotting.

use aqcal::metrics::{compute_metrics, smooth_series};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth: Vec<f64> = (0..500).map(|h| 25.0 + 10.0 * (h as f64 / 24.0 * std::f64::consts::TAU).sin()).collect();
    let pred: Vec<f64> = truth.iter().enumerate().map(|(h, y)| y + 0.01 * h as f64).collect();
    let m = compute_metrics(&truth, &pred, 1.0)?;
    println!("MAE {:.3}  MAnE {:.4}  MRE {:.4}  RMSE {:.3}  nRMSE {:.4}", m.mae, m.mane, m.mre, m.rmse, m.nrmse);
    let err: Vec<f64> = truth.iter().zip(&pred).map(|(y, p)| (p - y).abs()).collect();
    let smooth = smooth_series(&err, 96)?;
    for h in (0..500).step_by(100) {
        println!("hour {h:>3}: |error| {:.3}, smoothed {:.3}", err[h], smooth[h]);
    }
    Ok(())
}
