use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lidistill::boolean_dt::serialize_bundle;
use lidistill::harness::{
    apply_override, parse_config, prepare, render_config, run_e2e_table, run_lrh_table, run_separation, truth_for, Backend,
    ExperimentConfig, Table,
};
use lidistill::{Error, Result};

#[derive(Parser)]
#[command(name = "lidistill", version, about = "Distill source models into local-iteration decision-tree models")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; missing keys take defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set mlp.width=64`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long, value_parser = ["oracle", "mlp"])]
    backend: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (the LIDISTILL_OUT variable takes precedence).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the n=6, l=6 sweep profile as the base config.
    #[arg(long)]
    full: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a random truth model as a tree bundle.
    GenTruth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train (or load from the cache) the MLP source for a truth.
    TrainSource {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Probe the truth's conjunctions on the source latents.
    ProbeLrh {
        #[command(flatten)]
        common: Common,
    },
    /// End-to-end distillation sweep over depths, k and seeds.
    Distill {
        #[command(flatten)]
        common: Common,
    },
    /// Restricted-family separation report.
    Separation {
        #[command(flatten)]
        common: Common,
    },
    /// Render a result CSV as markdown, optionally averaged over seeds.
    Report {
        input: PathBuf,
        /// Comma-separated key columns to average over.
        #[arg(long)]
        mean_by: Option<String>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut text = match (&common.config, common.full) {
        (Some(_), true) => return Err(Error::Invalid("--config and --full are exclusive".into())),
        (Some(p), false) => fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        (None, true) => render_config(&ExperimentConfig::full_profile())?,
        (None, false) => String::new(),
    };
    for s in &common.sets {
        text = apply_override(&text, s)?;
    }
    if let Some(b) = &common.backend {
        text = apply_override(&text, &format!("backend={b:?}"))?;
    }
    if let Some(seed) = common.seed {
        text = apply_override(&text, &format!("seed={seed}"))?;
    }
    if let Some(out) = &common.out {
        text = apply_override(&text, &format!("out_dir={:?}", out.display().to_string()))?;
    }
    parse_config(&text)
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::GenTruth { common, depth, output } => {
            let cfg = load(&common)?;
            let depth = depth.unwrap_or(cfg.depths[0]);
            let truth = truth_for(&cfg, depth, cfg.seed)?;
            let path = output.unwrap_or_else(|| {
                cfg.resolved_out_dir().join(format!("truth-d{depth}-s{}.trees", cfg.seed))
            });
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir)?;
            }
            fs::write(&path, serialize_bundle(&truth.to_bundle()))?;
            println!("{}", path.display());
        }
        Cmd::TrainSource { common, depth } => {
            let mut cfg = load(&common)?;
            cfg.backend = Backend::Mlp;
            let depth = depth.unwrap_or(cfg.depths[0]);
            let p = prepare(&cfg, depth, cfg.seed)?;
            println!(
                "{{\"depth\": {depth}, \"seed\": {}, \"source_acc\": {}, \"bound\": {}, \"cache\": \"{}\"}}",
                cfg.seed,
                p.source_acc,
                p.source.bound(),
                cfg.resolved_out_dir().join("sources").display()
            );
        }
        Cmd::ProbeLrh { common } => {
            let cfg = load(&common)?;
            let t = run_lrh_table(&cfg)?;
            print!("{}", t.summary.to_markdown());
        }
        Cmd::Distill { common } => {
            let cfg = load(&common)?;
            print!("{}", run_e2e_table(&cfg)?.to_markdown());
        }
        Cmd::Separation { common } => {
            let cfg = load(&common)?;
            print!("{}", run_separation(&cfg)?.to_markdown());
        }
        Cmd::Report { input, mean_by } => {
            let text = fs::read_to_string(&input).map_err(|e| Error::Io(format!("{}: {e}", input.display())))?;
            let mut t = Table::parse(&text)?;
            if let Some(keys) = mean_by {
                let keys: Vec<&str> = keys.split(',').map(str::trim).collect();
                t = t.mean_by(&keys)?;
            }
            print!("{}", t.to_markdown());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({"error": e.kind(), "message": e.to_string()}));
            ExitCode::FAILURE
        }
    }
}
