use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use negotiate_core::domain::total_profit;
use negotiate_core::harness::{
    bundled, compare_prediction, load_scenario, parse_scenario, run_batch_from, write_batch, Mode,
    Scenario, SessionRun,
};
use negotiate_core::protocol::{run_session, SessionOptions, SessionResult};
use negotiate_core::registry::{DiscoveryQuery, IssueMenu, Registry, ServiceRecord};

#[derive(Parser)]
#[command(
    name = "negotiate",
    version,
    about = "Run automated multi-issue negotiations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single session and write its outcome.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Session seed; defaults to the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write the round-by-round trace as CSV.
        #[arg(long)]
        trace: bool,
    },
    /// Run many sessions; session i uses seed + i.
    Batch {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(short = 'n', long = "count", default_value_t = 100)]
        count: usize,
        /// Base seed; defaults to the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Skip the per-session trace files.
        #[arg(long)]
        no_traces: bool,
    },
    /// Run the same sessions with prediction off and on.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(short = 'n', long = "count", default_value_t = 100)]
        count: usize,
        /// Also write the comparison as JSON into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Register the bundled suppliers, discover them, and negotiate with each.
    RegistryDemo {
        /// Product category to query.
        #[arg(long, default_value = "aircraft")]
        category: String,
        /// Issues every discovered seller must offer.
        #[arg(long = "require")]
        require: Vec<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run {
            scenario,
            seed,
            out,
            trace,
        } => run(&scenario, seed, &out, trace),
        Command::Batch {
            scenario,
            count,
            seed,
            out,
            no_traces,
        } => batch(&scenario, count, seed, &out, !no_traces),
        Command::Compare {
            scenario,
            count,
            out,
        } => compare(&scenario, count, out.as_deref()),
        Command::RegistryDemo { category, require } => registry_demo(&category, &require),
    }
}

fn load(path: &Path) -> Result<Scenario> {
    Ok(load_scenario(path)?)
}

fn run(path: &Path, seed: Option<u64>, out: &Path, trace: bool) -> Result<()> {
    let scenario = load(path)?;
    let seed = seed.unwrap_or(scenario.seed);
    let batch = run_batch_from(&scenario, 1, seed)?;
    write_batch(out, &scenario, &batch, trace)?;
    let record = &batch.sessions[0];
    match &record.run {
        SessionRun::Bilateral(r) => {
            println!("{}", serde_json::to_string(&r.outcome)?);
        }
        SessionRun::OneToMany(r) => {
            println!("{}", serde_json::to_string(&r.choice)?);
        }
    }
    log::info!("wrote results to {}", out.display());
    Ok(())
}

fn batch(path: &Path, count: usize, seed: Option<u64>, out: &Path, traces: bool) -> Result<()> {
    if count == 0 {
        bail!("-n must be at least 1");
    }
    let scenario = load(path)?;
    let batch = run_batch_from(&scenario, count, seed.unwrap_or(scenario.seed))?;
    write_batch(out, &scenario, &batch, traces)?;
    let s = &batch.stats;
    println!(
        "{} sessions: {} agreements ({:.1}%), {} early terminations, {} breakdowns, mean rounds {:.2}",
        s.sessions,
        s.agreements,
        s.agreement_rate * 100.0,
        s.early_terminations,
        s.breakdowns,
        s.mean_rounds
    );
    for (agent, u) in &s.mean_utility {
        println!("  mean utility {agent}: {u:.2}");
    }
    Ok(())
}

fn compare(path: &Path, count: usize, out: Option<&Path>) -> Result<()> {
    if count == 0 {
        bail!("-n must be at least 1");
    }
    let scenario = load(path)?;
    let cmp = compare_prediction(&scenario, count)?;
    println!(
        "prediction off: agreement {:.3}, mean rounds {:.2}",
        cmp.off.agreement_rate, cmp.off.mean_rounds
    );
    println!(
        "prediction on:  agreement {:.3}, mean rounds {:.2}",
        cmp.on.agreement_rate, cmp.on.mean_rounds
    );
    println!(
        "delta:          agreement {:+.3}, mean rounds {:+.2}",
        cmp.delta_agreement_rate, cmp.delta_mean_rounds
    );
    for (agent, d) in &cmp.delta_mean_utility {
        println!("  mean utility delta {agent}: {d:+.2}");
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let file = dir.join("comparison.json");
        std::fs::write(&file, serde_json::to_string_pretty(&cmp)? + "\n")
            .with_context(|| format!("writing {}", file.display()))?;
    }
    Ok(())
}

fn registry_demo(category: &str, require: &[String]) -> Result<()> {
    let scenario = parse_scenario(bundled::SUPPLIERS, "suppliers.scenario")?;
    let Mode::OneToMany {
        buyer, suppliers, ..
    } = &scenario.mode
    else {
        bail!("bundled suppliers scenario is not one-to-many");
    };
    let registry = Registry::new();
    for &i in suppliers {
        let profile = &scenario.agents[i].config.profile;
        let record = ServiceRecord::new(
            profile.agent().clone(),
            "aircraft",
            IssueMenu::from_profile(profile),
        );
        let handle = registry.register(record)?;
        println!("registered {} (#{})", profile.agent(), handle.sequence());
    }

    let query = require
        .iter()
        .fold(DiscoveryQuery::category(category), |q, issue| {
            q.requiring(issue.clone())
        });
    let found = registry.discover(&query)?;
    println!(
        "discover {category:?} requiring {require:?}: {} seller(s)",
        found.len()
    );
    if found.is_empty() {
        return Ok(());
    }

    let buyer = &scenario.agents[*buyer].config;
    let opener = usize::from(buyer.id() != &scenario.opener);
    for record in &found {
        let seller = scenario
            .agent(record.seller.as_str())
            .with_context(|| format!("no profile for {}", record.seller))?;
        let options = SessionOptions {
            opener,
            max_rounds: scenario.max_rounds,
            seed: scenario.seed,
        };
        let report = run_session(buyer, &seller.config, &options)?;
        let summary = match &report.outcome.result {
            SessionResult::Agreement { offer, round } => {
                format!(
                    "agreement at round {round}: {:?}, buyer utility {:.1}",
                    offer.choices,
                    total_profit(&buyer.profile, offer)?
                )
            }
            other => format!("no agreement ({})", serde_json::to_string(other)?),
        };
        println!("  {} -> {summary}", record.seller);
    }
    println!("{}", registry.snapshot());
    Ok(())
}
