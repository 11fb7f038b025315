use std::path::{Path, PathBuf};

use afsim::cfo_demo::{cfo_demo, traces_csv};
use afsim::compare::{comparison_csv, compare_power, mrc_bound, modulation_compare, qpsk_relay_beats_bpsk_direct};
use afsim::config::ExperimentConfig;
use afsim::sweep::{sweep_ber, to_csv, with_workers, write_file};
use anyhow::Result;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "afsim", version, about = "Amplify-and-forward OFDM link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV. Overrides `output` in the configuration; stdout if neither.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 for one per core. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// BER against source power for each configuration and modulation.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Append the SISO curve shifted by 3 dB as `mrc_bound` rows.
        #[arg(long)]
        bound: bool,
    },
    /// Phase traces of a passband relay loopback.
    CfoDemo {
        #[command(flatten)]
        common: Common,
    },
    /// Relay-aided against relay-less BER at equal total power.
    ComparePower {
        #[command(flatten)]
        common: Common,
        /// Also write the underlying sweep rows here.
        #[arg(long)]
        rows: Option<PathBuf>,
    },
    /// BPSK and QPSK, with and without the relay, same symbols per packet.
    CompareMod {
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }

    fn emit(&self, cfg: &ExperimentConfig, text: &str) -> Result<()> {
        match self.out.as_deref().or(cfg.output.as_deref()) {
            Some(p) => write_out(p, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_file(path, text)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Sweep { common, bound } => {
            let cfg = common.load()?;
            let mut rows = with_workers(common.workers, || sweep_ber(&cfg))??;
            if bound {
                let b = mrc_bound(&rows);
                rows.extend(b);
            }
            common.emit(&cfg, &to_csv(&cfg.hash(), &rows))
        }
        Command::CfoDemo { common } => {
            let cfg = common.load()?;
            let traces = cfo_demo(&cfg.cfo_demo)?;
            for t in &traces {
                eprintln!(
                    "{}: relay slope {:.4e} rad/sample (expected {:.4e}), return slope {:.4e} (expected {:.4e})",
                    t.case, t.relay_slope, t.expected_relay_slope, t.return_slope, t.expected_return_slope
                );
            }
            common.emit(&cfg, &traces_csv(&cfg.hash(), &traces))
        }
        Command::ComparePower { common, rows } => {
            let cfg = common.load()?;
            let (aided, direct, table) = with_workers(common.workers, || compare_power(&cfg))??;
            if let Some(p) = rows {
                let all: Vec<_> = aided.into_iter().chain(direct).collect();
                write_out(&p, &to_csv(&cfg.hash(), &all))?;
            }
            common.emit(&cfg, &comparison_csv(&cfg.hash(), &table))
        }
        Command::CompareMod { common } => {
            let cfg = common.load()?;
            let rows = with_workers(common.workers, || modulation_compare(&cfg))??;
            let wins = qpsk_relay_beats_bpsk_direct(&rows);
            if wins.is_empty() {
                eprintln!("relay-aided QPSK does not beat relay-less BPSK at any swept power");
            } else {
                eprintln!("relay-aided QPSK beats relay-less BPSK at source power (dB): {wins:?}");
            }
            common.emit(&cfg, &to_csv(&cfg.hash(), &rows))
        }
    }
}
