//! Console tables and CSV artifacts.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::time::Duration;

use heston_ddn::calibration::{CalibrationResult, MarketQuote, DAYS_PER_YEAR};
use heston_ddn::ddn::LossBreakdown;
use heston_ddn::heston::PARAM_NAMES;
use heston_ddn::Result;

use crate::sibling;

fn short_count(n: usize) -> String {
    if n >= 1000 && n % 1000 == 0 {
        format!("{}k", n / 1000)
    } else {
        n.to_string()
    }
}

pub fn loss_table(n: usize, train: f64, val: f64, test: f64, time: Duration) {
    println!(
        "{:<14}{:<16}{:<18}{:<12}{}",
        "Dataset size", "Training loss", "Validation loss", "Test loss", "Training time"
    );
    println!(
        "{:<14}{:<16.2e}{:<18.2e}{:<12.2e}{:.0}s",
        short_count(n),
        train,
        val,
        test,
        time.as_secs_f64()
    );
}

pub const GRID_HEADER: [&str; 7] = [
    "hidden_layers",
    "width",
    "n_params",
    "epochs",
    "test_price",
    "test_derivative",
    "test_loss",
];

pub fn append_grid_row(
    path: &Path,
    hidden: usize,
    width: usize,
    n_params: usize,
    epochs: usize,
    test: &LossBreakdown,
) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(GRID_HEADER)?;
    }
    w.write_record([
        hidden.to_string(),
        width.to_string(),
        n_params.to_string(),
        epochs.to_string(),
        format!("{:e}", test.price_term),
        format!("{:e}", test.derivative_term),
        format!("{:e}", test.data_total()),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn sensitivities(label: &str, g: &[f64; 5]) {
    let parts: Vec<String> = PARAM_NAMES.iter().zip(g).map(|(n, v)| format!("d/d{n} {v:.6e}")).collect();
    println!("{label} sensitivities: {}", parts.join(", "));
}

pub fn result_table(results: &[CalibrationResult]) {
    print!("{:<13}", "method");
    for n in PARAM_NAMES {
        print!("{n:>10}");
    }
    println!("{:>13}{:>10}{:>11}", "objective", "MRE", "time (s)");
    for r in results {
        print!("{:<13}", r.method.to_string());
        for v in r.theta_star.to_array() {
            print!("{v:>10.4}");
        }
        println!(
            "{:>13.4e}{:>10.5}{:>11.3}",
            r.objective,
            r.mre,
            r.wall_time.as_secs_f64()
        );
    }
}

pub fn write_residuals(path: &Path, quotes: &[MarketQuote], r: &CalibrationResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["strike", "maturity_days", "market_price", "model_price", "residual", "relative_error"])?;
    for ((q, p), e) in quotes.iter().zip(&r.model_prices).zip(&r.residuals) {
        w.write_record([
            q.k.to_string(),
            (q.tau * DAYS_PER_YEAR).to_string(),
            q.price_mkt.to_string(),
            p.to_string(),
            e.to_string(),
            (e / q.price_mkt).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One `strike,market_price,model_price` file per maturity, strikes
/// ascending. Returns the paths written.
pub fn write_curves(prefix: &Path, quotes: &[MarketQuote], r: &CalibrationResult) -> Result<Vec<PathBuf>> {
    let mut by_days: BTreeMap<i64, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for (q, p) in quotes.iter().zip(&r.model_prices) {
        let days = (q.tau * DAYS_PER_YEAR).round() as i64;
        by_days.entry(days).or_default().push((q.k, q.price_mkt, *p));
    }
    let mut paths = Vec::new();
    for (days, mut rows) in by_days {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path = sibling(prefix, &format!(".curve_{days}d.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["strike", "market_price", "model_price"])?;
        for (k, m, p) in rows {
            w.write_record([k.to_string(), m.to_string(), p.to_string()])?;
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn write_benchmark(path: &Path, results: &[CalibrationResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["method"];
    header.extend(PARAM_NAMES);
    header.extend(["objective", "mre", "wall_time_s", "n_starts"]);
    w.write_record(&header)?;
    for r in results {
        let mut row = vec![r.method.to_string()];
        row.extend(r.theta_star.to_array().iter().map(f64::to_string));
        row.extend([
            r.objective.to_string(),
            r.mre.to_string(),
            r.wall_time.as_secs_f64().to_string(),
            r.n_starts_used.to_string(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
