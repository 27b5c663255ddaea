//! `chaosfield`: run, inspect and reproduce field experiments.
//!
//! Exit codes: 0 every check passed, 1 an acceptance check failed or a
//! compute stage errored, 2 the configuration or a parameter gate is invalid.

use chaosfield::runner::{self, Experiment, RunConfig, RunError, RunManifest};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "chaosfield", version, about = "Multifractal random field experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; without it the experiment's preset is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Experiment name; overrides the one in the configuration.
    #[arg(long, global = true)]
    experiment: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "CHAOSFIELD_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of realizations.
    #[arg(long, global = true)]
    realizations: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize realizations and write binary dumps with JSON sidecars.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Realizations to dump.
        #[arg(long, default_value_t = 4)]
        count: usize,
    },
    /// Run the experiment: synthesis, analysis and acceptance checks.
    Analyze {
        #[command(flatten)]
        common: Common,
    },
    /// Deterministic moment table of the experiment's family.
    Moments {
        #[command(flatten)]
        common: Common,
    },
    /// Appendix coefficient report.
    Appendix {
        #[command(flatten)]
        common: Common,
    },
    /// Print the parameter-gate report without computing anything.
    Gates {
        #[command(flatten)]
        common: Common,
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Rerun a manifest's configuration and compare artifact hashes.
    Reproduce {
        manifest: PathBuf,
        /// Output directory of the rerun.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const PASS: u8 = 0;
const FAIL: u8 = 1;
const INVALID: u8 = 2;

fn resolve(common: &Common, default: Option<Experiment>) -> Result<RunConfig, String> {
    let named = common.experiment.as_deref().map(Experiment::parse).transpose().map_err(|e| e.to_string())?;
    let mut cfg = match (&common.config, named.or(default)) {
        (Some(path), _) => RunConfig::load(path).map_err(|e| format!("{}: {e}", path.display()))?,
        (None, Some(e)) => RunConfig::preset(e),
        (None, None) => return Err("either --config or --experiment is required".into()),
    };
    if let Some(e) = named {
        cfg.experiment = e;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    if let Some(n) = common.realizations {
        cfg.n_realizations = n;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn report_error(e: &RunError) -> u8 {
    eprintln!("error: {e}");
    if let RunError::Gates(g) = e {
        eprint!("{}", g.render());
    }
    if e.is_config() {
        INVALID
    } else {
        FAIL
    }
}

fn print_manifest(m: &RunManifest) -> u8 {
    for c in &m.checks {
        println!("{} {:<40} value={:<14.6e} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.detail);
    }
    println!(
        "manifest: {} ({} artifacts, {:.1} s)",
        m.config.output_dir.join(runner::MANIFEST_FILE).display(),
        m.artifacts.len(),
        m.wall_clock_s
    );
    if m.pass {
        PASS
    } else {
        FAIL
    }
}

fn execute(cli: Cli) -> u8 {
    let config_of = |common: &Common, default| match resolve(common, default) {
        Ok(c) => Ok(c),
        Err(msg) => {
            eprintln!("error: {msg}");
            Err(INVALID)
        }
    };
    let result = match cli.command {
        Command::Synth { common, count } => config_of(&common, None).map(|cfg| match runner::synth(&cfg, count) {
            Ok(paths) => {
                for p in paths {
                    println!("{}", p.display());
                }
                PASS
            }
            Err(e) => report_error(&e),
        }),
        Command::Analyze { common } => config_of(&common, None).map(|cfg| match runner::run(&cfg) {
            Ok(m) => print_manifest(&m),
            Err(e) => report_error(&e),
        }),
        Command::Moments { common } => config_of(&common, None).map(|cfg| match runner::moments(&cfg) {
            Ok(rows) => {
                for r in rows {
                    println!("order {} lag {:?}: {:.10e} ± {:.2e}", r.spec.order, r.spec.lag, r.estimate.value, r.estimate.abs_error);
                }
                println!("table: {}", cfg.output_dir.join("moments.csv").display());
                PASS
            }
            Err(e) => report_error(&e),
        }),
        Command::Appendix { mut common } => {
            common.experiment.get_or_insert_with(|| Experiment::Appendix.name().to_string());
            config_of(&common, Some(Experiment::Appendix)).map(|cfg| match runner::run(&cfg) {
                Ok(m) => print_manifest(&m),
                Err(e) => report_error(&e),
            })
        }
        Command::Gates { common, json } => config_of(&common, None).map(|cfg| {
            let report = runner::validate_gates(&cfg);
            if json {
                println!("{}", serde_json::to_string_pretty(&report).unwrap_or_default());
            } else {
                print!("{}", report.render());
            }
            if report.pass {
                PASS
            } else {
                INVALID
            }
        }),
        Command::Reproduce { manifest, out } => {
            let out = out.unwrap_or_else(|| std::env::temp_dir().join(format!("chaosfield-reproduce-{}", std::process::id())));
            Ok(match runner::reproduce(&manifest, &out) {
                Ok(r) => {
                    for (name, expected, actual) in &r.artifacts {
                        let same = actual.as_deref() == Some(expected.as_str());
                        println!("{} {name}", if same { "identical" } else { "DIFFERS  " });
                    }
                    if r.identical {
                        println!("all artifacts reproduced in {}", out.display());
                        PASS
                    } else {
                        FAIL
                    }
                }
                Err(e) => report_error(&e),
            })
        }
    };
    result.unwrap_or_else(|code| code)
}

fn main() -> ExitCode {
    ExitCode::from(execute(Cli::parse()))
}
