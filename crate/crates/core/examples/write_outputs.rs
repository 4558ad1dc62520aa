//! Files a run leaves behind: scenario TOML, run CSVs with their summaries,
//! the trained models, and the plotting scripts that read the CSVs.
//!
//! `cargo run --release --example write_outputs -- [config.toml] [out-dir]`

use std::path::PathBuf;

use gp_takeover::sim::io::{read_run, write_plot_scripts, write_run};
use gp_takeover::sim::{summarize, Experiment, Mode, ScenarioConfig};

fn main() -> gp_takeover::Result<()> {
    let mut args = std::env::args().skip(1);
    let cfg = match args.next() {
        Some(p) => ScenarioConfig::load(&PathBuf::from(p))?,
        None => ScenarioConfig::stabilization(),
    };
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out".into()));
    std::fs::create_dir_all(&out)?;

    cfg.save(&out.join("scenario.toml"))?;
    let exp = Experiment::prepare(&cfg, &Mode::ALL)?;
    exp.dataset.write_csv(&out.join("dataset.csv"))?;
    if let Some(m) = &exp.models.full {
        m.save(&out.join("full_gp.json"))?;
    }
    if let Some(m) = &exp.models.sparse {
        m.save(&out.join("sparse_gp.json"))?;
    }
    for mode in Mode::ALL {
        let log = exp.run(mode)?;
        let metrics = summarize(&log, &cfg.metrics)?;
        let (csv, summary) = write_run(&out, mode.as_str(), &log, Some(metrics))?;
        let (back, s) = read_run(&out, mode.as_str())?;
        assert_eq!(back.digest(), log.digest());
        println!("{} ({} rows), {} (digest {})", csv.display(), back.records.len(), summary.display(), &s.digest[..12]);
    }
    for p in write_plot_scripts(&out)? {
        println!("{}", p.display());
    }
    println!("python3 {0}/plot_run.py {0}/baseline.csv {0}/frozen-gp.csv {0}/rosgp.csv", out.display());
    Ok(())
}
