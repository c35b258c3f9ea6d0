//! `cascade-verify`: synthesize a corpus, train the model hierarchy,
//! evaluate the verification frameworks, verify single files.
//!
//! Exit codes: 0 success (or ACCEPT for `verify`), 1 REJECT for `verify` or
//! a failed ordering gate for `evaluate`, 2 any error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use cascade_verify::cascade::Mode;
use cascade_verify::config::RunConfig;
use cascade_verify::corpus::{describe_corpus, DatasetManifest};
use cascade_verify::eval::{decisions_from_trials, read_trials, render_text, summarize, write_report, Framework};
use cascade_verify::pipeline;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cascade-verify", version, about = "Gender -> emotion -> speaker cascaded HMM speaker verification")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Built-in profile: defaults, micro, benchmark, paper-shaped.
    #[arg(long, global = true)]
    profile: Option<String>,
    /// TOML config file layered over the profile.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set training.n_mixtures=2`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Top-level seed for synthesis and training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores, 1 = sequential).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus and its manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every model and write the registry.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        models: PathBuf,
    },
    /// Score the test split under each framework and write reports.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Comma-separated frameworks (default: all five).
        #[arg(long, value_delimiter = ',')]
        modes: Vec<String>,
    },
    /// Verify one WAV file against a claimed identity.
    Verify {
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        claimed: String,
        /// Accept when the score is at least this value; `-inf` and `inf` allowed.
        #[arg(long, allow_hyphen_values = true)]
        threshold: f64,
        /// three_stage, two_stage_gender, two_stage_emotion, one_stage or forced(<gender>,<emotion>).
        #[arg(long, default_value = "three_stage")]
        mode: String,
    },
    /// Rebuild report files from a trials.csv.
    Report {
        #[arg(long)]
        trials: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print corpus statistics for a manifest.
    Describe {
        #[arg(long)]
        manifest: PathBuf,
    },
}

fn resolve(common: &Common, extra: Vec<String>) -> Result<RunConfig> {
    let mut sets = common.sets.clone();
    if let Some(s) = common.seed {
        sets.push(format!("seed={s}"));
    }
    if let Some(j) = common.jobs {
        sets.push(format!("jobs={j}"));
    }
    sets.extend(extra);
    let cfg = RunConfig::resolve(common.profile.as_deref(), common.config.as_deref(), &sets)?;
    log::info!("resolved configuration:\n{}", cfg.to_toml()?);
    Ok(cfg)
}

fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("manifest.csv")
    } else {
        p.to_path_buf()
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Synth { out } => {
            let cfg = resolve(&cli.common, vec![])?;
            let m = pipeline::synthesize(&cfg, &out, &cfg.parallelism())
                .with_context(|| format!("synthesizing into {}", out.display()))?;
            print!("{}", describe_corpus(&m, false).render());
            println!("manifest: {}", out.join("manifest.csv").display());
        }
        Command::Train { manifest, models } => {
            let cfg = resolve(&cli.common, vec![])?;
            let (reg, log) = pipeline::train(&cfg, &manifest_path(&manifest), &models, &cfg.parallelism())?;
            let c = reg.counts();
            println!(
                "trained {} models: {} gender, {} emotion, {} pooled emotion, {} speaker, {} gender-pooled speaker, {} pooled speaker",
                c.total(),
                c.gender,
                c.emotion,
                c.pooled_emotion,
                c.speaker,
                c.gender_pooled_speaker,
                c.pooled_speaker
            );
            let unconverged = log.models.iter().filter(|m| !m.converged).count();
            if unconverged > 0 {
                println!("{unconverged} model(s) stopped at max_iters before converging");
            }
            println!("registry: {}", models.display());
        }
        Command::Evaluate {
            manifest,
            models,
            report,
            modes,
        } => {
            let extra = if modes.is_empty() {
                vec![]
            } else {
                for m in &modes {
                    m.parse::<Framework>()?;
                }
                let list: Vec<String> = modes.iter().map(|m| format!("\"{}\"", m.trim())).collect();
                vec![format!("evaluation.modes=[{}]", list.join(","))]
            };
            let cfg = resolve(&cli.common, extra)?;
            let (rep, _) = pipeline::evaluate(&cfg, &manifest_path(&manifest), &models, &report, &cfg.parallelism())?;
            print!("{}", render_text(&rep));
            if cfg.evaluation.enforce_ordering && !rep.ordering_holds() {
                eprintln!("error: framework EER ordering violated (see report)");
                return Ok(ExitCode::from(1));
            }
        }
        Command::Verify {
            models,
            wav,
            claimed,
            threshold,
            mode,
        } => {
            let cfg = resolve(&cli.common, vec![])?;
            let mode: Mode = mode.parse()?;
            let v = pipeline::verify_file(&cfg, &models, &wav, &claimed, threshold, &mode)?;
            let t = &v.score.trace;
            if let Some(g) = &t.gender {
                println!("G* = {}{}", g.chosen, if g.tie { " (tie)" } else { "" });
            }
            if let Some(e) = &t.emotion {
                println!("E* = {}{}", e.chosen, if e.tie { " (tie)" } else { "" });
            }
            if let Some(o) = &t.overrides {
                println!("forced gender = {}, emotion = {}", o.gender, o.emotion);
            }
            println!(
                "lambda = {:.6} (target {:.6}, wrong emotion {:.6}, wrong gender {:.6})",
                v.score.lambda, v.score.target_term, v.score.wrong_emotion_term, v.score.wrong_gender_term
            );
            println!("{}", if v.accept { "ACCEPT" } else { "REJECT" });
            return Ok(ExitCode::from(if v.accept { 0 } else { 1 }));
        }
        Command::Report { trials, out } => {
            let mut cfg = resolve(&cli.common, vec![])?;
            let rows = read_trials(&trials)?;
            let mut emotions: Vec<String> = Vec::new();
            for r in &rows {
                if !emotions.contains(&r.emotion_true) {
                    emotions.push(r.emotion_true.clone());
                }
            }
            cfg.evaluation.modes = Framework::ALL
                .into_iter()
                .filter(|f| rows.iter().any(|r| r.mode == *f))
                .collect();
            let rep = summarize(&rows, &decisions_from_trials(&rows), &emotions, &cfg.evaluation)?;
            write_report(&rep, &out)?;
            cfg.echo(&out)?;
            print!("{}", render_text(&rep));
        }
        Command::Describe { manifest } => {
            let m = DatasetManifest::load(manifest_path(&manifest))?;
            print!("{}", describe_corpus(&m, true).render());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
