use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use gp_takeover::gp::{Dataset, GpModel, SpgpModel};
use gp_takeover::sim::io::{read_run, write_montecarlo, write_plot_scripts, write_run};
use gp_takeover::sim::{
    collect_training_data, monte_carlo, summarize, train_full, train_sparse, Experiment, Mode, Models,
    ScenarioConfig,
};
use gp_takeover::Result;

#[derive(Parser)]
#[command(name = "gp-takeover", version, about = "GP-based attitude takeover control simulations")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario TOML; the stabilization scenario when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(short, long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the collection phase and write the training set.
    Collect(Common),
    /// Collect and fit the full and sparse GP models.
    Train(Common),
    /// Run one mode (or `all`), reusing models found in the output directory.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(short, long, default_value = "rosgp")]
        mode: String,
    },
    /// Randomized rosgp sweep.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        /// Overrides the number of runs.
        #[arg(short = 'n', long)]
        runs: Option<usize>,
    },
    /// Recompute metrics of runs written by `run`.
    Metrics {
        #[command(flatten)]
        common: Common,
        #[arg(short, long, default_value = "all")]
        mode: String,
    },
    /// Write the plotting scripts.
    EmitPlots {
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
}

fn load_config(c: &Common) -> Result<ScenarioConfig> {
    let mut cfg = match &c.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::stabilization(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn modes(arg: &str) -> Result<Vec<Mode>> {
    if arg == "all" {
        Ok(Mode::ALL.to_vec())
    } else {
        Ok(vec![arg.parse()?])
    }
}

const FULL_MODEL: &str = "full_gp.json";
const SPARSE_MODEL: &str = "sparse_gp.json";

fn cached_models(dir: &Path, data: &Dataset) -> Models {
    let full = GpModel::load(&dir.join(FULL_MODEL), data).ok().map(Arc::new);
    let sparse = SpgpModel::load(&dir.join(SPARSE_MODEL), data).ok().map(Arc::new);
    Models { full, sparse }
}

fn train(cfg: &ScenarioConfig, out: &Path, data: &Dataset) -> Result<Models> {
    std::fs::create_dir_all(out)?;
    let full = train_full(data)?;
    full.save(&out.join(FULL_MODEL))?;
    let sparse = train_sparse(cfg, data)?;
    sparse.save(&out.join(SPARSE_MODEL))?;
    for (name, hyps) in [("full", full.hyperparams()), ("sparse", sparse.hyperparams())] {
        for (j, h) in hyps.iter().enumerate() {
            println!("{name} dim {j}: sigma_f2 {:.3e} sigma_eps2 {:.3e}", h.sigma_f2, h.sigma_eps2);
        }
    }
    Ok(Models { full: Some(Arc::new(full)), sparse: Some(Arc::new(sparse)) })
}

fn main() -> Result<()> {
    env_logger::init();
    match Cli::parse().cmd {
        Cmd::Collect(c) => {
            let cfg = load_config(&c)?;
            std::fs::create_dir_all(&c.out)?;
            let data = collect_training_data(&cfg)?;
            data.write_csv(&c.out.join("dataset.csv"))?;
            cfg.save(&c.out.join("scenario.toml"))?;
            println!("{} pairs, hash {}", data.len(), data.hash());
        }
        Cmd::Train(c) => {
            let cfg = load_config(&c)?;
            let data = collect_training_data(&cfg)?;
            std::fs::create_dir_all(&c.out)?;
            data.write_csv(&c.out.join("dataset.csv"))?;
            train(&cfg, &c.out, &data)?;
        }
        Cmd::Run { common: c, mode } => {
            let cfg = load_config(&c)?;
            let modes = modes(&mode)?;
            let data = collect_training_data(&cfg)?;
            let mut models = cached_models(&c.out, &data);
            let needs_full = modes.contains(&Mode::FrozenGp) && models.full.is_none();
            let needs_sparse = modes.contains(&Mode::Rosgp) && models.sparse.is_none();
            if needs_full || needs_sparse {
                models = train(&cfg, &c.out, &data)?;
            }
            let exp = Experiment::with_models(&cfg, models)?;
            cfg.save(&c.out.join("scenario.toml"))?;
            for m in modes {
                let log = exp.run(m)?;
                let metrics = summarize(&log, &cfg.metrics).ok();
                let (csv, _) = write_run(&c.out, m.as_str(), &log, metrics.clone())?;
                match metrics {
                    Some(x) => println!(
                        "{m}: steady |q_e| {:.3e}, |w| {:.3e}, MSE q_e {:.3e} -> {}",
                        x.steady_q,
                        x.steady_omega,
                        x.mse_q,
                        csv.display()
                    ),
                    None => println!("{m}: no metrics -> {}", csv.display()),
                }
            }
        }
        Cmd::Montecarlo { common: c, runs } => {
            let cfg = load_config(&c)?;
            let mut mc = cfg.montecarlo.clone();
            if let Some(n) = runs {
                mc.runs = n;
            }
            let s = monte_carlo(&cfg, &mc)?;
            let (csv, _) = write_montecarlo(&c.out, &s)?;
            println!(
                "{}/{} runs converged ({:.0} %), {} failed, {:.1} s -> {}",
                s.runs.iter().filter(|r| r.converged).count(),
                s.runs.len(),
                100.0 * s.success_rate,
                s.failed,
                s.wall_time,
                csv.display()
            );
        }
        Cmd::Metrics { common: c, mode } => {
            let cfg = load_config(&c)?;
            for m in modes(&mode)? {
                let (log, _) = match read_run(&c.out, m.as_str()) {
                    Ok(r) => r,
                    Err(e) if mode == "all" => {
                        log::info!("skipping {m}: {e}");
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let metrics = summarize(&log, &cfg.metrics)?;
                println!("[{m}]\n{}", toml::to_string_pretty(&metrics).expect("metrics serialize"));
            }
        }
        Cmd::EmitPlots { out } => {
            for p in write_plot_scripts(&out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}
