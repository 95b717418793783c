use std::path::Path;
use std::time::Instant;

use heston_ddn::calibration::{
    benchmark as run_benchmark, calibrate_ddn, calibrate_fnn, calibrate_nm, filter_quotes, load_quotes,
    load_rate_curve, synthetic_market, write_quotes, write_rate_curve, CalibrationResult, MarketGrid, MarketQuote,
    Method, RateCurve,
};
use heston_ddn::config::RunConfig;
use heston_ddn::dataset::{export_csv, load_dataset, save_dataset, Dataset};
use heston_ddn::ddn::{evaluate as eval_loss, load_model, predict_with_gradient, save_model, train as fit, write_history_csv};
use heston_ddn::heston::{call_price, price_gradient, HestonParams, PricingInput, PARAM_NAMES};
use heston_ddn::{Error, Result};
use log::{info, warn};

use crate::report;
use crate::{sibling, RateArgs};

fn echo_config(cfg: &RunConfig, primary: &Path) -> Result<()> {
    let path = sibling(primary, ".config.toml");
    cfg.save(&path)?;
    info!("effective configuration written to {}", path.display());
    Ok(())
}

fn heston_from(v: &[f64]) -> Result<HestonParams> {
    let a: [f64; 5] = v
        .try_into()
        .map_err(|_| Error::InvalidInput(format!("expected 5 Heston parameters, got {}", v.len())))?;
    let h = HestonParams::from_array(a);
    h.validate()?;
    Ok(h)
}

fn rate_curve(args: &RateArgs) -> Result<RateCurve> {
    match (&args.rates, args.rate) {
        (Some(p), _) => load_rate_curve(p),
        (None, Some(r)) => Ok(RateCurve::flat(r)),
        (None, None) => Err(Error::InvalidInput("give --rates or --rate".into())),
    }
}

fn quotes_from(path: &Path, rates: &RateArgs) -> Result<Vec<MarketQuote>> {
    let quotes = load_quotes(path, &rate_curve(rates)?)?;
    if quotes.is_empty() {
        return Err(Error::Format(format!("{} holds no usable quotes", path.display())));
    }
    Ok(quotes)
}

pub fn generate_data(cfg: &RunConfig, n: usize, out: &Path, csv: Option<&Path>) -> Result<()> {
    cfg.validate()?;
    let clock = Instant::now();
    let (ds, stats) = Dataset::generate(n, &cfg.ranges, cfg.seed, &cfg.quadrature, &cfg.finite_difference)?;
    save_dataset(out, &ds)?;
    if let Some(c) = csv {
        export_csv(c, &ds.samples)?;
    }
    echo_config(cfg, out)?;
    println!(
        "labelled {} samples in {:.1}s: {} replaced over {} rounds ({:.3}%)",
        ds.samples.len(),
        clock.elapsed().as_secs_f64(),
        stats.replaced,
        stats.rounds,
        100.0 * stats.replaced as f64 / stats.requested as f64
    );
    println!(
        "split train/validation/test = {}/{}/{}",
        ds.split.train.len(),
        ds.split.validation.len(),
        ds.split.test.len()
    );
    Ok(())
}

pub fn train(cfg: &RunConfig, data: &Path, out_model: &Path, history: &Path) -> Result<()> {
    cfg.validate()?;
    let ds = load_dataset(data)?;
    if ds.ranges != cfg.ranges {
        warn!("dataset was generated with different parameter ranges than the configuration");
    }
    let net = cfg.network();
    let clock = Instant::now();
    let out = fit(&ds.samples, &ds.split, &net)?;
    let elapsed = clock.elapsed();
    save_model(out_model, &out.state)?;
    write_history_csv(history, &out.history)?;
    echo_config(cfg, out_model)?;

    let loss = |idx: &[usize]| eval_loss(&out.state, &ds.subset(idx)).map(|l| l.data_total());
    let (tr, va, te) = (loss(&ds.split.train)?, loss(&ds.split.validation)?, loss(&ds.split.test)?);
    println!(
        "{} network, best epoch {} of {}",
        if net.is_differential() { "differential" } else { "feedforward" },
        out.best_epoch,
        net.epochs
    );
    report::loss_table(ds.samples.len(), tr, va, te, elapsed);
    Ok(())
}

pub fn evaluate(model: &Path, data: &Path, grid_csv: Option<&Path>) -> Result<()> {
    let state = load_model(model)?;
    let ds = load_dataset(data)?;
    let test = eval_loss(&state, &ds.subset(&ds.split.test))?;
    println!(
        "normalised test MSE {:.4e} (price {:.4e}, derivative {:.4e}, {} samples)",
        test.data_total(),
        test.price_term,
        test.derivative_term,
        ds.split.test.len()
    );
    if let Some(path) = grid_csv {
        let sizes = &state.config.layer_sizes;
        report::append_grid_row(
            path,
            sizes.len() - 2,
            sizes[1],
            state.n_params(),
            state.epoch,
            &test,
        )?;
    }
    Ok(())
}

pub fn price(
    cfg: &RunConfig,
    model: Option<&Path>,
    params: &[f64],
    spot: f64,
    rate: f64,
    tau: f64,
    strike: f64,
) -> Result<()> {
    let input = PricingInput::new(heston_from(params)?, spot, rate, tau, strike);
    input.validate()?;
    let p = call_price(&input, &cfg.quadrature)?;
    let g = price_gradient(&input, &cfg.quadrature, &cfg.finite_difference)?;
    println!("fourier price {p:.10}");
    report::sensitivities("fourier", &g);
    if let Some(m) = model {
        let state = load_model(m)?;
        let (q, dg) = predict_with_gradient(&state, &input)?;
        println!("network price {q:.10}");
        report::sensitivities("network", &dg);
        let gap = q - p;
        let rel = if p != 0.0 { gap.abs() / p.abs() } else { f64::INFINITY };
        println!("absolute gap {gap:.6e}, relative gap {rel:.6e}");
    }
    Ok(())
}

pub fn calibrate(
    cfg: &RunConfig,
    quotes: &Path,
    rates: &RateArgs,
    method: Method,
    model: Option<&Path>,
    prefix: &Path,
) -> Result<()> {
    cfg.validate()?;
    let quotes = quotes_from(quotes, rates)?;
    let cal = cfg.calibration();
    let bx = cfg.calibration_box();
    let need_model = || {
        model
            .ok_or_else(|| Error::Config(format!("--model is required for the {method} method")))
            .and_then(load_model)
    };
    let result = match method {
        Method::Ddn => calibrate_ddn(&quotes, &need_model()?, &cal, &bx)?,
        Method::Fnn => calibrate_fnn(&quotes, &need_model()?, &cal, &bx)?,
        Method::NelderMead => calibrate_nm(&quotes, &cfg.quadrature, &cal, &bx)?,
    };
    report::result_table(std::slice::from_ref(&result));
    report::write_residuals(&sibling(prefix, ".residuals.csv"), &quotes, &result)?;
    for path in report::write_curves(prefix, &quotes, &result)? {
        info!("wrote {}", path.display());
    }
    echo_config(cfg, prefix)
}

pub fn benchmark(
    cfg: &RunConfig,
    quotes: &Path,
    rates: &RateArgs,
    model: &Path,
    model_fnn: &Path,
    out: &Path,
) -> Result<()> {
    cfg.validate()?;
    let quotes = quotes_from(quotes, rates)?;
    let (ddn, fnn) = (load_model(model)?, load_model(model_fnn)?);
    let results: Vec<CalibrationResult> =
        run_benchmark(&quotes, &ddn, &fnn, &cfg.quadrature, &cfg.calibration(), &cfg.calibration_box())?;
    report::result_table(&results);
    report::write_benchmark(out, &results)?;
    echo_config(cfg, out)
}

pub struct SynthArgs<'a> {
    pub theta: &'a [f64],
    pub n_quotes: usize,
    pub spot: f64,
    pub rate: f64,
    pub maturities: Vec<f64>,
    pub moneyness: (f64, f64),
    pub noise: f64,
}

pub fn synth_market(cfg: &RunConfig, a: &SynthArgs, out: &Path, rates_out: Option<&Path>) -> Result<()> {
    let heston = heston_from(a.theta)?;
    if a.n_quotes == 0 || a.maturities.is_empty() {
        return Err(Error::InvalidInput("need at least one quote and one maturity".into()));
    }
    if !(a.noise >= 0.0) {
        return Err(Error::InvalidInput(format!("noise must be non-negative, got {}", a.noise)));
    }
    let per_maturity = a.n_quotes.div_ceil(a.maturities.len());
    let mut grid = MarketGrid::spaced(a.spot, per_maturity, a.moneyness, a.maturities.clone());
    grid.noise = a.noise;
    grid.seed = cfg.seed;
    let curve = RateCurve::flat(a.rate);
    let mut quotes = synthetic_market(heston, &grid, &curve, &cfg.quadrature)?;
    quotes.truncate(a.n_quotes);
    let quotes = filter_quotes(quotes);
    write_quotes(out, &quotes)?;
    if let Some(r) = rates_out {
        write_rate_curve(r, &curve)?;
    }
    echo_config(cfg, out)?;
    let names = PARAM_NAMES.map(|n| n.to_string()).join(", ");
    println!("wrote {} quotes at ({names}) = {:?}", quotes.len(), heston.to_array());
    Ok(())
}
