//! BLER campaign driver. Every flag overrides the matching key of the
//! optional TOML config.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use otfdm::sim::{dump_iq, emit_channel_snapshot, CampaignConfig, Simulator};

#[derive(Debug, Parser)]
#[command(name = "otfdm-sim", version, about = "OTFDM vs OFDM link-level BLER campaign")]
struct Args {
    /// TOML file with campaign keys; see configs/ for examples.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    drops: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Maximum speeds in km/h, comma separated.
    #[arg(long, value_delimiter = ',')]
    speeds: Option<Vec<f64>>,
    /// SNRs in dB, comma separated.
    #[arg(long, value_delimiter = ',')]
    snrs: Option<Vec<f64>>,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write true and estimated channel dumps of drop 0 into this directory.
    #[arg(long, value_name = "DIR", num_args = 0..=1, default_missing_value = "snapshot")]
    snapshot: Option<PathBuf>,
    /// Write the drop-0 transmit frame as little-endian f64 (re, im) pairs.
    #[arg(long, value_name = "PATH")]
    dump_iq: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Fill the wall_ms column.
    #[arg(long)]
    timing: bool,
    /// Print the resolved config as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

fn resolve(args: &Args) -> otfdm::Result<CampaignConfig> {
    let mut cfg = match &args.config {
        Some(p) => CampaignConfig::load(p)?,
        None => CampaignConfig::default(),
    };
    if let Some(d) = args.drops {
        cfg.drops = d;
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(v) = &args.speeds {
        cfg.max_speeds_kmh = v.clone();
    }
    if let Some(v) = &args.snrs {
        cfg.snrs_db = v.clone();
    }
    if let Some(p) = &args.out {
        cfg.output = p.clone();
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    cfg.timing |= args.timing;
    Ok(cfg)
}

fn run(args: &Args) -> otfdm::Result<()> {
    let cfg = resolve(args)?;
    if args.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let sim = Simulator::new(cfg.clone())?;
    for p in sim.points() {
        sim.check_feasible(p)?;
    }
    if let Some(path) = &args.dump_iq {
        let w = dump_iq(&cfg, path)?;
        eprintln!("wrote {w} transmit frame to {}", path.display());
    }
    if let Some(dir) = &args.snapshot {
        let r = emit_channel_snapshot(&cfg, cfg.master_seed, dir)?;
        eprintln!(
            "wrote {}x{} channel snapshot to {} (NMSE {:.2} dB)",
            r.rows,
            r.cols,
            dir.display(),
            r.nmse_db
        );
    }
    let table = sim.run_campaign()?;
    table.write_csv(&cfg.output)?;
    print!("{}", table.to_csv());
    eprintln!("wrote {}", cfg.output.display());
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ otfdm::Error::Infeasible(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
