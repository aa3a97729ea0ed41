//! Command-line front end.
//!
//! Exit codes: `0` success, `2` invalid input, `3` runtime failure.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::accountant::{self, LocalPrivacySpec, SamplingSpec, SubsampleMode, TotalPrivacyReport};
use crate::config::RunConfig;
use crate::data::{self, CsvSchema};
use crate::engine;
use crate::error::{Error, Result};
use crate::report::{self, fmt_g9};

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fedsplit", version, about = "Split-model federated learning simulator and privacy accountant")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write trace.csv and summary.json.
    Run(RunArgs),
    /// Run an experiment for several values of one config key.
    Sweep(SweepArgs),
    /// Standalone privacy calculations.
    #[command(subcommand)]
    Accountant(AccountantCommand),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Experiment file in `key = value` format.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the file's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "FEDSPLIT_OUTPUT_DIR", default_value = "out")]
    pub output: PathBuf,
    /// Apply the amplification bound even when eps_local > 1.
    #[arg(long)]
    pub allow_extrapolation: bool,
    /// Extra `key=value` overrides applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Config key to vary, e.g. check_in_prob.
    #[arg(long)]
    pub axis: String,
    /// Comma-separated values for the axis.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
    /// Seeds per point, starting from the configured seed.
    #[arg(long, default_value_t = 1)]
    pub repeats: u64,
    /// Only compute privacy budgets; no training.
    #[arg(long)]
    pub accountant_only: bool,
}

#[derive(Debug, Subcommand)]
pub enum AccountantCommand {
    /// Subsampling ratio q of one client.
    Ratio {
        #[arg(long, default_value = "wor")]
        mode: SubsampleMode,
        #[arg(long)]
        local_steps: usize,
        #[arg(long)]
        batch_size: usize,
        #[arg(long)]
        dataset_size: usize,
    },
    /// Gaussian noise variance for a local guarantee.
    Sigma {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        clip: f64,
        /// Defaults to 2 * clip.
        #[arg(long)]
        sensitivity: Option<f64>,
    },
    /// Single-round central guarantee with uniform p and q.
    Round {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        clients: usize,
        #[arg(long)]
        allow_extrapolation: bool,
    },
    /// Total local epsilon of one client after T rounds.
    TotalLocal {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        rounds: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        clip: f64,
        /// Also solve the tail bound numerically.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = accountant::DEFAULT_LAMBDA_MAX)]
        lambda_max: u64,
    },
    /// Strong composition of a per-round guarantee over T rounds.
    TotalGlobal {
        #[arg(long)]
        eps_round: f64,
        #[arg(long)]
        delta_round: f64,
        #[arg(long)]
        rounds: usize,
        #[arg(long, default_value_t = 1e-4)]
        composition_delta: f64,
    },
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    rounds: usize,
    final_test_accuracy: f64,
    final_server_accuracy: f64,
    final_train_loss: f64,
    sigma_squared: f64,
    mean_participants: f64,
    privacy: &'a TotalPrivacyReport,
    config: String,
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::Accountant(cmd) => accountant_cmd(cmd),
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    let text = std::fs::read_to_string(&common.config)?;
    let base = common.config.parent();
    let mut extra = Vec::new();
    if let Some(seed) = common.seed {
        extra.push(format!("seed = {seed}"));
    }
    if common.allow_extrapolation {
        extra.push("allow_extrapolation = true".into());
    }
    for o in &common.overrides {
        if !o.contains('=') {
            return Err(Error::Config(vec![format!("--set {o:?}: expected KEY=VALUE")]));
        }
        extra.push(o.clone());
    }
    RunConfig::parse(&format!("{text}\n{}", extra.join("\n")), base)
}

fn load_samples(cfg: &RunConfig) -> Result<Vec<data::Sample>> {
    let path = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| Error::Config(vec!["no dataset given".into()]))?;
    data::load_csv(
        path,
        &CsvSchema {
            standardize: cfg.standardize,
            feature_count: None,
        },
    )
}

fn summary_json(cfg: &RunConfig, result: &engine::ExperimentResult, sigma_squared: f64) -> Result<String> {
    let last = result.traces.last();
    let summary = RunSummary {
        rounds: result.traces.len(),
        final_test_accuracy: last.map_or(f64::NAN, |t| t.test_accuracy),
        final_server_accuracy: last.map_or(f64::NAN, |t| t.server_accuracy),
        final_train_loss: last.map_or(f64::NAN, |t| t.train_loss),
        sigma_squared,
        mean_participants: if result.traces.is_empty() {
            0.0
        } else {
            result.traces.iter().map(|t| t.participants.len()).sum::<usize>() as f64 / result.traces.len() as f64
        },
        privacy: &result.report,
        config: cfg.to_text(),
    };
    serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(std::io::Error::other(e)))
}

fn run_one(cfg: &RunConfig, samples: Vec<data::Sample>) -> Result<(engine::ExperimentResult, f64)> {
    let mut sim = engine::Simulation::from_dataset(cfg.experiment.clone(), samples)?;
    let traces = (0..cfg.experiment.rounds)
        .map(|_| sim.run_round())
        .collect::<Result<Vec<_>>>()?;
    let sigma_squared = sim.sigma_squared();
    Ok((
        engine::ExperimentResult {
            traces,
            report: sim.report()?,
        },
        sigma_squared,
    ))
}

fn run(args: &RunArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let samples = load_samples(&cfg)?;
    let (result, sigma_squared) = run_one(&cfg, samples)?;
    let out = &args.common.output;
    report::write_trace_csv(&out.join("trace.csv"), &result.traces)?;
    report::write_atomic(&out.join("summary.json"), &summary_json(&cfg, &result, sigma_squared)?)?;
    println!(
        "rounds={} test_accuracy={} eps_c_total={} eps_local_max={} output={}",
        result.traces.len(),
        fmt_g9(result.final_accuracy()),
        fmt_g9(result.report.global_total_eps),
        fmt_g9(result.report.max_local_eps()),
        out.display()
    );
    Ok(())
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn sanitize(value: &str) -> String {
    value
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let base = load_config(&args.common)?;
    if !crate::config::KEYS.contains(&args.axis.as_str()) {
        return Err(Error::Config(vec![format!("unknown sweep axis {:?}", args.axis)]));
    }
    if args.repeats == 0 {
        return Err(Error::Config(vec!["--repeats must be >= 1".into()]));
    }
    let mut points = Vec::with_capacity(args.values.len());
    for value in &args.values {
        let mut cfg = base.clone();
        let mut problems = Vec::new();
        if let Err(msg) = cfg.set(&args.axis, value, None) {
            problems.push(msg);
        } else if let Err(Error::Config(more)) = cfg.experiment.validate() {
            problems.extend(more.into_iter().map(|m| format!("{}={value}: {m}", args.axis)));
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        points.push((value.clone(), cfg));
    }

    let samples = load_samples(&base)?;
    let out = &args.common.output;
    let mut summary = String::new();
    if args.accountant_only {
        summary.push_str(&format!("{},eps_c_round,delta_c_round,eps_c_total,eps_local_max\n", args.axis));
        for (value, cfg) in &points {
            let e = &cfg.experiment;
            let n_test = (e.test_fraction * samples.len() as f64).round() as usize;
            let sizes = engine::partition_sizes(samples.len() - n_test, e.num_clients);
            let budget = engine::planned_budget(e, &sizes)?;
            summary.push_str(&format!(
                "{value},{},{},{},{}\n",
                fmt_g9(budget.worst_round_eps),
                fmt_g9(budget.worst_round_delta),
                fmt_g9(budget.global_total_eps),
                fmt_g9(budget.max_local_eps()),
            ));
        }
    } else {
        summary.push_str(&format!(
            "{},repeats,test_accuracy_mean,test_accuracy_std,train_loss_mean,eps_c_total_mean,eps_local_max\n",
            args.axis
        ));
        for (value, cfg) in &points {
            let mut accs = Vec::new();
            let mut losses = Vec::new();
            let mut eps_totals = Vec::new();
            let mut eps_local = 0.0f64;
            for r in 0..args.repeats {
                let mut cfg = cfg.clone();
                cfg.experiment.master_seed = base.experiment.master_seed.wrapping_add(r);
                let (result, _) = run_one(&cfg, samples.clone())?;
                let name = format!("{}={}_seed={}.csv", args.axis, sanitize(value), cfg.experiment.master_seed);
                report::write_trace_csv(&out.join(name), &result.traces)?;
                accs.push(result.final_accuracy());
                losses.push(result.traces.last().map_or(f64::NAN, |t| t.train_loss));
                eps_totals.push(result.report.global_total_eps);
                eps_local = eps_local.max(result.report.max_local_eps());
            }
            let (acc_mean, acc_std) = mean_std(&accs);
            summary.push_str(&format!(
                "{value},{},{},{},{},{},{}\n",
                args.repeats,
                fmt_g9(acc_mean),
                fmt_g9(acc_std),
                fmt_g9(mean_std(&losses).0),
                fmt_g9(mean_std(&eps_totals).0),
                fmt_g9(eps_local),
            ));
        }
    }
    report::write_atomic(&out.join("summary.csv"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn accountant_cmd(cmd: &AccountantCommand) -> Result<()> {
    match *cmd {
        AccountantCommand::Ratio {
            mode,
            local_steps,
            batch_size,
            dataset_size,
        } => {
            let spec = SamplingSpec::new(1.0, mode, local_steps, batch_size, dataset_size)?;
            println!("q={}", fmt_g9(accountant::subsampling_ratio(&spec)?));
        }
        AccountantCommand::Sigma {
            eps,
            delta,
            clip,
            sensitivity,
        } => {
            let mut spec = LocalPrivacySpec::new(eps, delta, clip)?;
            if let Some(s) = sensitivity {
                spec = spec.with_sensitivity(s)?;
            }
            println!("sigma_squared={}", fmt_g9(accountant::gaussian_sigma_squared(&spec)));
        }
        AccountantCommand::Round {
            p,
            q,
            eps,
            delta,
            beta,
            clients,
            allow_extrapolation,
        } => {
            let r = accountant::central_round_privacy_uniform_with(p, q, eps, delta, beta, clients, allow_extrapolation)?;
            println!(
                "eps_c={} delta_c={} hoeffding_delta={}{}",
                fmt_g9(r.eps_central),
                fmt_g9(r.delta_central),
                fmt_g9(r.hoeffding_delta),
                if r.extrapolated { " extrapolated=true" } else { "" }
            );
        }
        AccountantCommand::TotalLocal {
            q,
            p,
            rounds,
            eps,
            delta,
            clip,
            oracle,
            lambda_max,
        } => {
            let cf = accountant::total_local_epsilon_closed_form(q, p, rounds, eps, delta, clip)?;
            if oracle {
                let num = accountant::total_local_epsilon_oracle(q, p, rounds, eps, delta, clip, lambda_max)?;
                println!("eps_local_total={} eps_local_total_oracle={}", fmt_g9(cf), fmt_g9(num));
            } else {
                println!("eps_local_total={}", fmt_g9(cf));
            }
        }
        AccountantCommand::TotalGlobal {
            eps_round,
            delta_round,
            rounds,
            composition_delta,
        } => {
            let (e, d) = accountant::strong_composition(eps_round, delta_round, rounds, composition_delta)?;
            println!("eps_total={} delta_total={}", fmt_g9(e), fmt_g9(d));
        }
    }
    Ok(())
}
