use std::path::Path;

use log::warn;
use rand::RngExt;
use rand_distr::StandardNormal;
use serde::Deserialize;

use crate::heston::{call_price, HestonParams, PricingInput, QuadratureConfig};
use crate::rng::{seeded, stream};
use crate::{Error, Result};

pub const DAYS_PER_YEAR: f64 = 365.0;
const DAYS_PER_WEEK: f64 = 7.0;

/// One observed call price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketQuote {
    pub k: f64,
    /// Years.
    pub tau: f64,
    pub price_mkt: f64,
    pub s0: f64,
    pub r: f64,
}

impl MarketQuote {
    pub fn pricing_input(&self, heston: HestonParams) -> PricingInput {
        PricingInput::new(heston, self.s0, self.r, self.tau, self.k)
    }

    /// Positive and within `[max(S0 - K e^{-r tau}, 0), S0]`.
    pub fn is_arbitrage_free(&self) -> bool {
        let lower = (self.s0 - self.k * (-self.r * self.tau).exp()).max(0.0);
        self.price_mkt > 0.0 && self.price_mkt >= lower && self.price_mkt <= self.s0
    }
}

/// Annualised rates by tenor in weeks, interpolated linearly in maturity
/// and extrapolated flat.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    weeks: Vec<f64>,
    rates: Vec<f64>,
}

impl RateCurve {
    /// `rates` are decimals, not percent.
    pub fn new(weeks: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if weeks.is_empty() || weeks.len() != rates.len() {
            return Err(Error::Format("rate curve needs matching, nonempty tenor and rate columns".into()));
        }
        if weeks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Format("rate curve tenors must be strictly increasing".into()));
        }
        if weeks.iter().chain(&rates).any(|v| !v.is_finite()) {
            return Err(Error::Format("rate curve contains non-finite values".into()));
        }
        Ok(Self { weeks, rates })
    }

    pub fn flat(rate: f64) -> Self {
        Self {
            weeks: vec![1.0],
            rates: vec![rate],
        }
    }

    /// Rate for a maturity in years.
    pub fn rate(&self, tau: f64) -> f64 {
        let w = tau * DAYS_PER_YEAR / DAYS_PER_WEEK;
        let n = self.weeks.len();
        if w <= self.weeks[0] {
            return self.rates[0];
        }
        if w >= self.weeks[n - 1] {
            return self.rates[n - 1];
        }
        let j = self.weeks.partition_point(|&x| x <= w);
        let (w0, w1) = (self.weeks[j - 1], self.weeks[j]);
        let t = (w - w0) / (w1 - w0);
        self.rates[j - 1] + t * (self.rates[j] - self.rates[j - 1])
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.weeks.iter().copied().zip(self.rates.iter().copied())
    }
}

#[derive(Deserialize)]
struct RateRow {
    weeks: f64,
    rate_pct: f64,
}

#[derive(Deserialize)]
struct QuoteRow {
    strike: f64,
    maturity_days: f64,
    price: f64,
    spot: f64,
}

/// Reads a `weeks,rate_pct` file.
pub fn load_rate_curve(path: impl AsRef<Path>) -> Result<RateCurve> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut weeks = Vec::new();
    let mut rates = Vec::new();
    for row in rdr.deserialize() {
        let row: RateRow = row.map_err(|e| Error::Format(format!("rate curve: {e}")))?;
        weeks.push(row.weeks);
        rates.push(row.rate_pct / 100.0);
    }
    RateCurve::new(weeks, rates)
}

pub fn write_rate_curve(path: impl AsRef<Path>, curve: &RateCurve) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["weeks", "rate_pct"])?;
    for (wk, r) in curve.points() {
        w.write_record([wk.to_string(), (100.0 * r).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `strike,maturity_days,price,spot` file, attaching rates from
/// `curve`. Quotes outside the no-arbitrage interval are dropped with a
/// warning.
pub fn load_quotes(path: impl AsRef<Path>, curve: &RateCurve) -> Result<Vec<MarketQuote>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut quotes = Vec::new();
    for row in rdr.deserialize() {
        let row: QuoteRow = row.map_err(|e| Error::Format(format!("quote file: {e}")))?;
        let tau = row.maturity_days / DAYS_PER_YEAR;
        if !(row.strike > 0.0 && row.spot > 0.0 && tau > 0.0) {
            return Err(Error::Format(format!(
                "quote with strike {}, maturity {} days, spot {} is not positive",
                row.strike, row.maturity_days, row.spot
            )));
        }
        quotes.push(MarketQuote {
            k: row.strike,
            tau,
            price_mkt: row.price,
            s0: row.spot,
            r: curve.rate(tau),
        });
    }
    Ok(filter_quotes(quotes))
}

pub fn filter_quotes(quotes: Vec<MarketQuote>) -> Vec<MarketQuote> {
    let (ok, bad): (Vec<_>, Vec<_>) = quotes.into_iter().partition(MarketQuote::is_arbitrage_free);
    for q in &bad {
        warn!(
            "dropping quote K={} tau={:.4} price={}: outside no-arbitrage bounds",
            q.k, q.tau, q.price_mkt
        );
    }
    ok
}

pub fn write_quotes(path: impl AsRef<Path>, quotes: &[MarketQuote]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["strike", "maturity_days", "price", "spot"])?;
    for q in quotes {
        w.write_record([
            q.k.to_string(),
            (q.tau * DAYS_PER_YEAR).to_string(),
            q.price_mkt.to_string(),
            q.s0.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Strike and maturity grid for a generated market.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketGrid {
    pub s0: f64,
    /// Strikes as `log(K / S0)`.
    pub log_moneyness: Vec<f64>,
    pub maturity_days: Vec<f64>,
    /// Multiplicative noise: each price is scaled by `1 + noise * e`,
    /// `e` standard normal.
    pub noise: f64,
    pub seed: u64,
}

impl MarketGrid {
    /// `n_strikes` equally spaced log-moneyness values in `[lo, hi]`.
    pub fn spaced(s0: f64, n_strikes: usize, (lo, hi): (f64, f64), maturity_days: Vec<f64>) -> Self {
        let log_moneyness = (0..n_strikes)
            .map(|i| if n_strikes == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * i as f64 / (n_strikes - 1) as f64 })
            .collect();
        Self {
            s0,
            log_moneyness,
            maturity_days,
            noise: 0.0,
            seed: 0,
        }
    }
}

/// Quotes priced by the Fourier pricer at `heston` on the grid, maturities
/// outermost.
pub fn synthetic_market(
    heston: HestonParams,
    grid: &MarketGrid,
    curve: &RateCurve,
    quad: &QuadratureConfig,
) -> Result<Vec<MarketQuote>> {
    let mut rng = seeded(grid.seed, stream::NOISE);
    let mut quotes = Vec::new();
    for &days in &grid.maturity_days {
        let tau = days / DAYS_PER_YEAR;
        for &m in &grid.log_moneyness {
            let k = grid.s0 * m.exp();
            let r = curve.rate(tau);
            let clean = call_price(&PricingInput::new(heston, grid.s0, r, tau, k), quad)?;
            let z: f64 = rng.sample(StandardNormal);
            let price = if grid.noise > 0.0 { clean * (1.0 + grid.noise * z) } else { clean };
            quotes.push(MarketQuote {
                k,
                tau,
                price_mkt: price,
                s0: grid.s0,
                r,
            });
        }
    }
    Ok(quotes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_interpolates_and_extrapolates_flat() {
        let c = RateCurve::new(vec![4.0, 13.0, 52.0], vec![0.05, 0.052, 0.048]).unwrap();
        assert_eq!(c.rate(1.0 / 365.0), 0.05);
        assert_eq!(c.rate(3.0), 0.048);
        let tau = 8.5 * 7.0 / 365.0;
        assert!((c.rate(tau) - 0.051).abs() < 1e-12);
        assert!(RateCurve::new(vec![4.0, 4.0], vec![0.1, 0.1]).is_err());
    }

    #[test]
    fn quote_files_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let curve = RateCurve::new(vec![4.0, 52.0], vec![0.05, 0.04]).unwrap();
        write_rate_curve(dir.path().join("r.csv"), &curve).unwrap();
        let back = load_rate_curve(dir.path().join("r.csv")).unwrap();
        for ((a, b), (c, d)) in curve.points().zip(back.points()) {
            assert_eq!(a, c);
            assert!((b - d).abs() < 1e-15);
        }

        let h = HestonParams::new(2.0, 0.09, 0.3, -0.5, 0.09);
        let grid = MarketGrid::spaced(100.0, 5, (-0.2, 0.2), vec![30.0, 180.0]);
        let quotes = synthetic_market(h, &grid, &curve, &QuadratureConfig::default()).unwrap();
        assert_eq!(quotes.len(), 10);
        write_quotes(dir.path().join("q.csv"), &quotes).unwrap();
        let loaded = load_quotes(dir.path().join("q.csv"), &back).unwrap();
        assert_eq!(loaded.len(), 10);
        for (a, b) in quotes.iter().zip(&loaded) {
            assert_eq!(a.k, b.k);
            assert_eq!(a.price_mkt, b.price_mkt);
            assert!((a.tau - b.tau).abs() < 1e-15 && (a.r - b.r).abs() < 1e-15);
        }
    }

    #[test]
    fn arbitrage_violations_are_dropped() {
        let q = |price| MarketQuote {
            k: 90.0,
            tau: 0.5,
            price_mkt: price,
            s0: 100.0,
            r: 0.0,
        };
        let kept = filter_quotes(vec![q(12.0), q(5.0), q(150.0), q(0.0)]);
        assert_eq!(kept, vec![q(12.0)]);
    }

    #[test]
    fn noise_is_seeded_and_multiplicative() {
        let h = HestonParams::new(2.0, 0.09, 0.3, -0.5, 0.09);
        let curve = RateCurve::flat(0.02);
        let quad = QuadratureConfig::default();
        let mut grid = MarketGrid::spaced(100.0, 40, (-0.2, 0.2), vec![90.0, 180.0]);
        let clean = synthetic_market(h, &grid, &curve, &quad).unwrap();
        grid.noise = 0.005;
        grid.seed = 4;
        let a = synthetic_market(h, &grid, &curve, &quad).unwrap();
        assert_eq!(a, synthetic_market(h, &grid, &curve, &quad).unwrap());
        let rel: Vec<f64> = a.iter().zip(&clean).map(|(n, c)| n.price_mkt / c.price_mkt - 1.0).collect();
        let sd = (rel.iter().map(|x| x * x).sum::<f64>() / rel.len() as f64).sqrt();
        assert!(sd > 0.003 && sd < 0.007, "{sd}");
    }
}
