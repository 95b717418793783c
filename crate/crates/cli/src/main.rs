use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use heston_ddn::calibration::Method;
use heston_ddn::config::RunConfig;
use heston_ddn::Error;

mod commands;
mod report;

#[derive(Parser, Debug)]
#[command(name = "heston-ddn", version, about = "Heston pricing, differential-network training and calibration")]
struct Cli {
    /// TOML run configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample inputs, label them with the Fourier pricer and save a dataset.
    GenerateData {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write the samples as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Train a network on a dataset file.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out_model: PathBuf,
        /// Drop the derivative term, giving the plain feedforward baseline.
        #[arg(long)]
        fnn: bool,
        #[arg(long)]
        epochs: Option<usize>,
        /// Hidden layer count, replacing the configured architecture.
        #[arg(long, requires = "width")]
        hidden: Option<usize>,
        #[arg(long, requires = "hidden")]
        width: Option<usize>,
        /// Defaults to the model path with a `.history.csv` suffix.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Report the normalised test-set loss of a trained model.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Append an architecture row to this CSV, writing the header when
        /// the file is new.
        #[arg(long)]
        grid_csv: Option<PathBuf>,
    },
    /// Price one call option.
    Price {
        /// Network to compare against the Fourier price.
        #[arg(long)]
        model: Option<PathBuf>,
        /// kappa lambda sigma rho v0
        #[arg(long, num_args = 5, value_names = ["KAPPA", "LAMBDA", "SIGMA", "RHO", "V0"], allow_negative_numbers = true)]
        params: Vec<f64>,
        #[arg(long)]
        spot: f64,
        #[arg(long, allow_negative_numbers = true)]
        rate: f64,
        /// Years.
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        strike: f64,
    },
    /// Fit Heston parameters to a quote file.
    Calibrate {
        #[arg(long)]
        quotes: PathBuf,
        #[command(flatten)]
        rates: RateArgs,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Required for the network methods.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        starts: Option<usize>,
        /// Prefix for the residual and curve CSVs.
        #[arg(long, default_value = "calibration")]
        out_prefix: PathBuf,
    },
    /// Run all three calibration methods on the same quotes and starts.
    Benchmark {
        #[arg(long)]
        quotes: PathBuf,
        #[command(flatten)]
        rates: RateArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        model_fnn: PathBuf,
        #[arg(long)]
        starts: Option<usize>,
        #[arg(long, default_value = "benchmark.csv")]
        out: PathBuf,
    },
    /// Write a quote file priced by the Fourier pricer at a chosen point.
    SynthMarket {
        /// kappa lambda sigma rho v0
        #[arg(long, num_args = 5, value_names = ["KAPPA", "LAMBDA", "SIGMA", "RHO", "V0"], allow_negative_numbers = true)]
        theta: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        n_quotes: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5000.0)]
        spot: f64,
        #[arg(long, default_value_t = 0.02, allow_negative_numbers = true)]
        rate: f64,
        /// Also write the flat rate curve here.
        #[arg(long)]
        rates_out: Option<PathBuf>,
        /// Maturities in days.
        #[arg(long, value_delimiter = ',', default_values_t = [30.0, 91.0, 182.0, 273.0, 365.0])]
        maturities: Vec<f64>,
        /// Log-moneyness range `lo,hi`.
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [-0.2, 0.2], allow_negative_numbers = true)]
        moneyness: Vec<f64>,
        /// Relative standard deviation of multiplicative noise.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
}

#[derive(clap::Args, Debug)]
#[group(required = true, multiple = false)]
pub struct RateArgs {
    /// `weeks,rate_pct` curve file.
    #[arg(long)]
    rates: Option<PathBuf>,
    /// Flat annual rate in decimals.
    #[arg(long, allow_negative_numbers = true)]
    rate: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodArg {
    Ddn,
    Fnn,
    Nm,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ddn => Method::Ddn,
            MethodArg::Fnn => Method::Fnn,
            MethodArg::Nm => Method::NelderMead,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidInput(_) => 2,
        Error::Format(_) | Error::Io(_) | Error::Csv(_) => 4,
        _ if e.is_numerical() => 3,
        _ => 1,
    }
}

/// Path with `suffix` appended to its file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_config(cli: &Cli) -> heston_ddn::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> heston_ddn::Result<()> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::GenerateData { n, out, csv } => commands::generate_data(&cfg, n, &out, csv.as_deref()),
        Command::Train {
            data,
            out_model,
            fnn,
            epochs,
            hidden,
            width,
            history,
        } => {
            if let (Some(h), Some(w)) = (hidden, width) {
                cfg.network.layer_sizes = heston_ddn::ddn::NetworkConfig::with_hidden(h, w).layer_sizes;
            }
            if let Some(e) = epochs {
                cfg.network.epochs = e;
            }
            if fnn {
                cfg.network.deriv_loss_weight = 0.0;
            }
            let history = history.unwrap_or_else(|| sibling(&out_model, ".history.csv"));
            commands::train(&cfg, &data, &out_model, &history)
        }
        Command::Evaluate { model, data, grid_csv } => commands::evaluate(&model, &data, grid_csv.as_deref()),
        Command::Price {
            model,
            params,
            spot,
            rate,
            tau,
            strike,
        } => commands::price(&cfg, model.as_deref(), &params, spot, rate, tau, strike),
        Command::Calibrate {
            quotes,
            rates,
            method,
            model,
            starts,
            out_prefix,
        } => {
            if let Some(s) = starts {
                cfg.calibration.n_starts = s;
            }
            commands::calibrate(&cfg, &quotes, &rates, method.into(), model.as_deref(), &out_prefix)
        }
        Command::Benchmark {
            quotes,
            rates,
            model,
            model_fnn,
            starts,
            out,
        } => {
            if let Some(s) = starts {
                cfg.calibration.n_starts = s;
            }
            commands::benchmark(&cfg, &quotes, &rates, &model, &model_fnn, &out)
        }
        Command::SynthMarket {
            theta,
            n_quotes,
            out,
            spot,
            rate,
            rates_out,
            maturities,
            moneyness,
            noise,
        } => {
            let market = commands::SynthArgs {
                theta: &theta,
                n_quotes,
                spot,
                rate,
                maturities,
                moneyness: (moneyness[0], moneyness[1]),
                noise,
            };
            commands::synth_market(&cfg, &market, &out, rates_out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
