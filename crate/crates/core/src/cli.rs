//! Command-line front end.
//!
//! Every flag has a kebab-case twin in the optional JSON config file.
//! Precedence is flag, then config file, then `MDIQCT_SEED` (seed only),
//! then the built-in defaults. Output is rendered fully in memory and
//! written in one go, so a failing command never leaves a partial file.
//!
//! Exit codes: 0 success, 2 usage or parameter error, 1 runtime error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::adversaries::{AdversaryStrategy, AttackKind, CheatState, RevealTieBreak};
use crate::analysis::{
    attack_tally, coherent_table, estimate, solve_fair_y, sweep_distance, with_threads, Scenario, ScenarioOptions,
};
use crate::devices::{ChannelParams, DetectorParams, SourceModel, DEFAULT_LOSS_DB_PER_KM};
use crate::protocol::{run_baseline, run_honest, run_weak_coherent, run_with_adversary, Mode, RunConfig, Transcript};
use crate::qmath::{verification_table, BsmOutcome, ProtocolParams, StateLabel};
use crate::{Error, Streams};

pub const SEED_ENV: &str = "MDIQCT_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "mdiqct", version, about = "MDI quantum coin tossing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON file with defaults for any of the flags (kebab-case keys).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Verification table and the |±⟩ table.
    Tables,
    /// Individual protocol executions as transcripts.
    Run,
    /// Monte Carlo success rate of a cheating strategy.
    Attack,
    /// Monte Carlo estimate of a named scenario.
    Estimate,
    /// Honest abort probability against fiber length.
    Sweep,
    /// Fair value of y and the resulting bias.
    Fair,
}

/// Every tunable, as flag and as config key.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct Settings {
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true)]
    y: Option<f64>,
    #[arg(long, global = true)]
    eta: Option<f64>,
    #[arg(long, global = true)]
    dark: Option<f64>,
    /// Fiber loss in dB/km.
    #[arg(long, global = true)]
    loss: Option<f64>,
    /// Length of both fiber spans in km.
    #[arg(long, global = true)]
    length: Option<f64>,
    #[arg(long, global = true)]
    la: Option<f64>,
    #[arg(long, global = true)]
    lb: Option<f64>,
    /// mdi, mdi-weak-coherent or baseline.
    #[arg(long, global = true)]
    mode: Option<String>,
    #[arg(long, global = true)]
    mu_a: Option<f64>,
    #[arg(long, global = true)]
    mu_b: Option<f64>,
    #[arg(long, global = true)]
    pulses: Option<u32>,
    #[arg(long, global = true)]
    max_rounds: Option<u64>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    extended_dark_counts: Option<bool>,

    /// none, bob-med, alice-individual, alice-coherent, alice-blinding.
    #[arg(long, global = true)]
    adversary: Option<String>,
    #[arg(long, global = true)]
    target: Option<u8>,
    /// plus or minus (coherent attack).
    #[arg(long, global = true)]
    sent: Option<String>,
    /// smaller-cell, uniform or larger-cell (individual attack).
    #[arg(long, global = true)]
    tie_break: Option<String>,
    #[arg(long, global = true)]
    scenario: Option<String>,
    /// psi-plus or psi-minus.
    #[arg(long, global = true)]
    outcome: Option<String>,
    /// State label such as 01 (basis, bit).
    #[arg(long, global = true)]
    alice: Option<String>,
    #[arg(long, global = true)]
    bob: Option<String>,
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[arg(long, global = true)]
    runs: Option<u64>,

    #[arg(long, global = true)]
    lmin: Option<f64>,
    #[arg(long, global = true)]
    lmax: Option<f64>,
    #[arg(long, global = true)]
    step: Option<f64>,
    #[arg(long, global = true)]
    tolerance: Option<f64>,
}

macro_rules! layer {
    ($hi:expr, $lo:expr; $($f:ident),* $(,)?) => {
        Settings { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl Settings {
    fn over(self, lo: Settings) -> Settings {
        layer!(self, lo;
            format, out, seed, threads, y, eta, dark, loss, length, la, lb, mode, mu_a, mu_b,
            pulses, max_rounds, extended_dark_counts, adversary, target, sent, tie_break,
            scenario, outcome, alice, bob, trials, runs, lmin, lmax, step, tolerance)
    }
}

/// Failure classes that map onto exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Exhausted { .. } | Error::OutOfOrder { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Runs the CLI and returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = stdout.write_all(text.as_bytes());
            } else {
                let _ = stderr.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match execute(cli) {
        Ok((text, None)) => match stdout.write_all(text.as_bytes()) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                1
            }
        },
        Ok((text, Some(path))) => match write_atomically(&path, &text) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(stderr, "error: cannot write {}: {e}", path.display());
                1
            }
        },
        Err(e) => {
            let (CliError::Usage(msg) | CliError::Runtime(msg)) = &e;
            let _ = writeln!(stderr, "error: {msg}");
            e.exit_code()
        }
    }
}

fn write_atomically(path: &Path, text: &str) -> std::io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}

fn load_config(path: &Path) -> Result<Settings, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("{SEED_ENV} must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

/// Fully merged settings with defaults applied.
struct Resolved {
    s: Settings,
    format: Format,
    seed: u64,
}

impl Resolved {
    fn params(&self) -> Result<ProtocolParams, CliError> {
        Ok(ProtocolParams::new(self.s.y.unwrap_or(0.9))?)
    }

    fn detector(&self) -> Result<DetectorParams, CliError> {
        Ok(DetectorParams::new(
            self.s.eta.unwrap_or(0.1),
            self.s.dark.unwrap_or(1e-4),
        )?)
    }

    fn loss(&self) -> f64 {
        self.s.loss.unwrap_or(DEFAULT_LOSS_DB_PER_KM)
    }

    fn run_config(&self) -> Result<RunConfig, CliError> {
        let length = self.s.length.unwrap_or(0.0);
        let channel = ChannelParams::new(self.s.la.unwrap_or(length), self.s.lb.unwrap_or(length), self.loss())?;
        let source = |mu: Option<f64>| -> Result<SourceModel, CliError> {
            Ok(match mu {
                Some(mu) => SourceModel::weak_coherent(mu)?,
                None => SourceModel::SinglePhoton,
            })
        };
        let mode: Mode = self.s.mode.as_deref().unwrap_or("mdi").parse()?;
        let config = RunConfig {
            params: self.params()?,
            channel,
            detector: self.detector()?,
            source_a: source(self.s.mu_a)?,
            source_b: source(self.s.mu_b)?,
            max_rounds: self.s.max_rounds.unwrap_or(crate::protocol::DEFAULT_MAX_ROUNDS),
            mode,
            pulses: self.s.pulses.unwrap_or(1),
            extended_dark_counts: self.s.extended_dark_counts.unwrap_or(false),
        };
        config.validate()?;
        Ok(config)
    }

    fn target(&self) -> Result<u8, CliError> {
        match self.s.target.unwrap_or(0) {
            t @ 0..=1 => Ok(t),
            t => Err(usage(format!("target must be 0 or 1, got {t}"))),
        }
    }

    fn sent(&self) -> Result<CheatState, CliError> {
        Ok(self.s.sent.as_deref().unwrap_or("plus").parse()?)
    }

    fn tie_break(&self) -> Result<RevealTieBreak, CliError> {
        Ok(self.s.tie_break.as_deref().unwrap_or("smaller-cell").parse()?)
    }

    fn strategy(&self, config: &RunConfig) -> Result<Option<AdversaryStrategy>, CliError> {
        let Some(name) = self.s.adversary.as_deref() else {
            return Ok(None);
        };
        let kind: AttackKind = name.parse().map_err(|_| usage(format!("unknown adversary `{name}`")))?;
        Ok(Some(
            AdversaryStrategy::from_kind(kind, config.params, self.target()?, self.sent()?)?
                .with_tie_break(self.tie_break()?),
        ))
    }

    fn trials(&self, default: u64) -> Result<u64, CliError> {
        match self.s.trials.unwrap_or(default) {
            0 => Err(usage("trials must be at least 1")),
            n => Ok(n),
        }
    }

    fn threads(&self) -> Result<Option<usize>, CliError> {
        match self.s.threads {
            Some(0) => Err(usage("threads must be at least 1")),
            t => Ok(t),
        }
    }
}

fn parse_label(s: &str) -> Result<StateLabel, CliError> {
    let digits = s.trim_start_matches("φ").trim_start_matches("phi");
    let b: Vec<u8> = digits.bytes().collect();
    match b.as_slice() {
        [x @ b'0'..=b'1', y @ b'0'..=b'1'] => Ok(StateLabel::new(x - b'0', y - b'0')?),
        _ => Err(usage(format!("state label must look like 01, got `{s}`"))),
    }
}

fn parse_outcome(s: &str) -> Result<BsmOutcome, CliError> {
    match s {
        "psi-plus" | "Ψ+" => Ok(BsmOutcome::PsiPlus),
        "psi-minus" | "Ψ-" => Ok(BsmOutcome::PsiMinus),
        _ => Err(usage(format!("outcome must be psi-plus or psi-minus, got `{s}`"))),
    }
}

fn execute(cli: Cli) -> Result<(String, Option<PathBuf>), CliError> {
    let file = match &cli.config {
        Some(p) => load_config(p)?,
        None => Settings::default(),
    };
    let s = cli.settings.over(file);
    let seed = match s.seed {
        Some(seed) => seed,
        None => env_seed()?.unwrap_or(0),
    };
    let r = Resolved {
        format: s.format.unwrap_or(Format::Json),
        seed,
        s,
    };
    let threads = r.threads()?;
    let text = match cli.command {
        Command::Tables => cmd_tables(&r)?,
        Command::Run => cmd_run(&r)?,
        Command::Attack => with_threads(threads, || cmd_attack(&r))??,
        Command::Estimate => with_threads(threads, || cmd_estimate(&r))??,
        Command::Sweep => cmd_sweep(&r)?,
        Command::Fair => cmd_fair(&r)?,
    };
    Ok((text, r.s.out.clone()))
}

fn to_json(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

const OUTCOME_KEYS: [(BsmOutcome, &str); 2] = [(BsmOutcome::PsiPlus, "psi-plus"), (BsmOutcome::PsiMinus, "psi-minus")];

fn cmd_tables(r: &Resolved) -> Result<String, CliError> {
    let params = r.params()?;
    let table = verification_table(params);
    let coherent = coherent_table(params)?;
    let labels: Vec<String> = StateLabel::ALL
        .iter()
        .map(|l| format!("{}{}", l.basis, l.bit))
        .collect();
    Ok(match r.format {
        Format::Json => {
            let mut verification = serde_json::Map::new();
            let mut zeros = serde_json::Map::new();
            let mut sent_tables = serde_json::Map::new();
            for (o, key) in OUTCOME_KEYS {
                verification.insert(key.into(), json!(table.panel(o)));
                let z: Vec<Vec<bool>> = StateLabel::ALL
                    .iter()
                    .map(|a| StateLabel::ALL.iter().map(|b| table.is_zero_cell(o, *a, *b)).collect())
                    .collect();
                zeros.insert(key.into(), json!(z));
            }
            for (sent, key) in [(CheatState::Plus, "plus"), (CheatState::Minus, "minus")] {
                let mut by_outcome = serde_json::Map::new();
                for (o, okey) in OUTCOME_KEYS {
                    let row: Vec<f64> = StateLabel::ALL
                        .iter()
                        .map(|b| coherent.probability(sent, o, *b))
                        .collect();
                    by_outcome.insert(okey.into(), json!(row));
                }
                sent_tables.insert(key.into(), by_outcome.into());
            }
            to_json(&json!({
                "y": params.y(),
                "labels": labels,
                "verification": verification,
                "zero_cells": zeros,
                "coherent": sent_tables,
            }))
        }
        Format::Csv => {
            let mut out = String::from("table,outcome,alice,bob,probability,zero_cell\n");
            for (o, key) in OUTCOME_KEYS {
                for a in StateLabel::ALL {
                    for b in StateLabel::ALL {
                        let _ = writeln!(
                            out,
                            "verification,{key},{}{},{}{},{},{}",
                            a.basis,
                            a.bit,
                            b.basis,
                            b.bit,
                            table.probability(o, a, b),
                            table.is_zero_cell(o, a, b)
                        );
                    }
                }
            }
            for (sent, key) in [(CheatState::Plus, "plus"), (CheatState::Minus, "minus")] {
                for (o, okey) in OUTCOME_KEYS {
                    for b in StateLabel::ALL {
                        let _ = writeln!(
                            out,
                            "coherent,{okey},{key},{}{},{},false",
                            b.basis,
                            b.bit,
                            coherent.probability(sent, o, b)
                        );
                    }
                }
            }
            out
        }
        Format::Text => {
            let mut out = format!("Verification table, y = {}  (* = zero cell)\n", params.y());
            for (o, _) in OUTCOME_KEYS {
                let _ = writeln!(out, "\n{o}   Alice \\ Bob");
                let _ = writeln!(
                    out,
                    "{:>8}{}",
                    "",
                    StateLabel::ALL
                        .iter()
                        .map(|b| format!("{:>10}", b.to_string()))
                        .collect::<String>()
                );
                for a in StateLabel::ALL {
                    let _ = write!(out, "{:>8}", a.to_string());
                    for b in StateLabel::ALL {
                        let cell = if table.is_zero_cell(o, a, b) {
                            "0*".to_string()
                        } else {
                            format!("{:.4}", table.probability(o, a, b))
                        };
                        let _ = write!(out, "{cell:>10}");
                    }
                    out.push('\n');
                }
            }
            let _ = writeln!(out, "\nAlice sends |±⟩, normalised over Ψ±");
            let _ = writeln!(
                out,
                "{:>8}{}",
                "",
                StateLabel::ALL
                    .iter()
                    .map(|b| format!("{:>10}", b.to_string()))
                    .collect::<String>()
            );
            for (sent, sk) in [(CheatState::Plus, "+"), (CheatState::Minus, "-")] {
                for (o, _) in OUTCOME_KEYS {
                    let _ = write!(out, "{:>8}", format!("|{sk}⟩ {o}"));
                    for b in StateLabel::ALL {
                        let _ = write!(out, "{:>10}", format!("{:.4}", coherent.probability(sent, o, b)));
                    }
                    out.push('\n');
                }
            }
            out
        }
    })
}

fn transcript_csv_header() -> &'static str {
    "run,mode,rounds,outcome,cause,bob_label,bob_random_bit,revealed_label,verdict,abort_reason,coin,pulse_index,multi_photon,adversary,target_coin,adversary_success,box_guess_correct\n"
}

fn csv_field<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v).expect("serializable") {
        serde_json::Value::Null => String::new(),
        serde_json::Value::String(s) => s,
        serde_json::Value::Object(m) => {
            // State labels render as two digits.
            match (m.get("basis"), m.get("bit")) {
                (Some(a), Some(b)) => format!("{a}{b}"),
                _ => serde_json::Value::Object(m).to_string(),
            }
        }
        other => other.to_string(),
    }
}

fn transcript_csv_row(i: u64, t: &Transcript) -> String {
    [
        i.to_string(),
        csv_field(&t.mode),
        t.rounds.to_string(),
        csv_field(&t.outcome),
        csv_field(&t.cause),
        csv_field(&t.bob_label),
        csv_field(&t.bob_random_bit),
        csv_field(&t.revealed_label),
        csv_field(&t.verdict),
        csv_field(&t.abort_reason),
        csv_field(&t.coin),
        csv_field(&t.pulse_index),
        csv_field(&t.multi_photon),
        csv_field(&t.adversary),
        csv_field(&t.target_coin),
        csv_field(&t.adversary_success),
        csv_field(&t.box_guess_correct),
    ]
    .join(",")
        + "\n"
}

/// Execution `i` always uses `Streams::for_trial(seed, i)`, so any single
/// transcript can be replayed on its own.
fn cmd_run(r: &Resolved) -> Result<String, CliError> {
    let config = r.run_config()?;
    let strategy = r.strategy(&config)?;
    let runs = match r.s.runs.unwrap_or(10) {
        0 => return Err(usage("runs must be at least 1")),
        n => n,
    };
    // Configuration problems surface before any output exists.
    if let Some(s) = &strategy {
        run_with_adversary(&config, s, &mut Streams::for_trial(r.seed, 0))?;
    }
    let mut out = match r.format {
        Format::Csv => transcript_csv_header().to_string(),
        _ => String::new(),
    };
    for i in 0..runs {
        let mut streams = Streams::for_trial(r.seed, i);
        let t = match (&strategy, config.mode) {
            (Some(s), _) => run_with_adversary(&config, s, &mut streams)?,
            (None, Mode::Mdi) => run_honest(&config, &mut streams)?,
            (None, Mode::MdiWeakCoherent) => run_weak_coherent(&config, &mut streams)?,
            (None, Mode::Baseline) => run_baseline(&config, None, &mut streams)?,
        };
        match r.format {
            Format::Json => {
                out.push_str(&serde_json::to_string(&t).expect("serializable"));
                out.push('\n');
            }
            Format::Csv => out.push_str(&transcript_csv_row(i, &t)),
            Format::Text => {
                let _ = writeln!(
                    out,
                    "run {i}: {:?} after {} round(s), coin {}",
                    t.verdict,
                    t.rounds,
                    t.coin.map_or("-".to_string(), |c| c.to_string())
                );
            }
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct AttackReport {
    adversary: AttackKind,
    target: u8,
    y: f64,
    mode: Mode,
    trials: u64,
    seed: u64,
    success: f64,
    stderr: f64,
    abort_rate: f64,
    mean_rounds: f64,
    closed_form: Option<f64>,
    success_given_correct_guess: Option<f64>,
    success_given_wrong_guess: Option<f64>,
}

fn cmd_attack(r: &Resolved) -> Result<String, CliError> {
    let config = r.run_config()?;
    let strategy = r.strategy(&config)?.ok_or_else(|| usage("attack needs --adversary"))?;
    let trials = r.trials(100_000)?;
    let scenario = Scenario::Attack(config, strategy);
    let closed_form = scenario.closed_form()?;
    let t = attack_tally(&config, &strategy, trials, r.seed)?;
    let success = t.success(r.seed);
    let individual = strategy.kind() == AttackKind::AliceIndividual;
    let report = AttackReport {
        adversary: strategy.kind(),
        target: strategy.target(),
        y: config.params.y(),
        mode: config.mode,
        trials,
        seed: r.seed,
        success: success.mean,
        stderr: success.stderr,
        abort_rate: t.abort(r.seed).mean,
        mean_rounds: t.rounds as f64 / trials as f64,
        closed_form,
        success_given_correct_guess: individual.then(|| t.success_given_correct_guess(r.seed).mean),
        success_given_wrong_guess: individual.then(|| t.success_given_wrong_guess(r.seed).mean),
    };
    Ok(match r.format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
            format!(
                "adversary,target,y,mode,trials,seed,success,stderr,abort_rate,mean_rounds,closed_form,success_given_correct_guess,success_given_wrong_guess\n\
                 {},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                report.adversary,
                report.target,
                report.y,
                csv_field(&report.mode),
                report.trials,
                report.seed,
                report.success,
                report.stderr,
                report.abort_rate,
                report.mean_rounds,
                opt(report.closed_form),
                opt(report.success_given_correct_guess),
                opt(report.success_given_wrong_guess)
            )
        }
        Format::Text => {
            let mut s = format!(
                "{} (target {}, y = {}): success {:.6} ± {:.6} over {} trials, abort rate {:.6}\n",
                report.adversary, report.target, report.y, report.success, report.stderr, trials, report.abort_rate
            );
            if let Some(cf) = closed_form {
                let _ = writeln!(s, "closed form {cf:.6}");
            }
            s
        }
    })
}

#[derive(Serialize)]
struct EstimateReport {
    scenario: String,
    mean: f64,
    stderr: f64,
    trials: u64,
    seed: u64,
    hits: u64,
    closed_form: Option<f64>,
    z: Option<f64>,
}

fn cmd_estimate(r: &Resolved) -> Result<String, CliError> {
    let name =
        r.s.scenario
            .as_deref()
            .ok_or_else(|| usage("estimate needs --scenario"))?;
    let config = r.run_config()?;
    let opts = ScenarioOptions {
        target: r.target()?,
        sent: r.sent()?,
        tie_break: r.tie_break()?,
        outcome: parse_outcome(r.s.outcome.as_deref().unwrap_or("psi-plus"))?,
        alice: parse_label(r.s.alice.as_deref().unwrap_or("00"))?,
        bob: parse_label(r.s.bob.as_deref().unwrap_or("00"))?,
    };
    let scenario = Scenario::from_name(name, config, &opts)?;
    let closed_form = scenario.closed_form()?;
    let trials = r.trials(100_000)?;
    let e = estimate(&scenario, trials, r.seed)?;
    let z = closed_form.and_then(|p| {
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        (sigma > 0.0).then(|| (e.mean - p) / sigma)
    });
    let report = EstimateReport {
        scenario: scenario.name(),
        mean: e.mean,
        stderr: e.stderr,
        trials: e.trials,
        seed: e.seed,
        hits: e.hits,
        closed_form,
        z,
    };
    Ok(match r.format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
            format!(
                "scenario,mean,stderr,trials,seed,hits,closed_form,z\n{},{},{},{},{},{},{},{}\n",
                report.scenario,
                report.mean,
                report.stderr,
                report.trials,
                report.seed,
                report.hits,
                opt(closed_form),
                opt(z)
            )
        }
        Format::Text => format!(
            "{}: {:.6} ± {:.6} ({} / {} trials, seed {}){}\n",
            report.scenario,
            report.mean,
            report.stderr,
            report.hits,
            report.trials,
            report.seed,
            closed_form.map_or(String::new(), |p| format!(", closed form {p:.6}"))
        ),
    })
}

fn cmd_sweep(r: &Resolved) -> Result<String, CliError> {
    let det = r.detector()?;
    let (lmin, lmax, step) = (
        r.s.lmin.unwrap_or(0.0),
        r.s.lmax.unwrap_or(50.0),
        r.s.step.unwrap_or(5.0),
    );
    let points = sweep_distance(lmin, lmax, step, &det, r.loss())?;
    Ok(match r.format {
        Format::Json => to_json(&json!({
            "eta": det.efficiency(),
            "dark": det.dark_count(),
            "loss": r.loss(),
            "points": points,
        })),
        Format::Csv => {
            let mut s = String::from("length_km,pr_h,dark_dark_fraction\n");
            for p in &points {
                let _ = writeln!(s, "{},{},{}", p.length_km, p.pr_h, p.dark_dark_fraction);
            }
            s
        }
        Format::Text => {
            let mut s = format!(
                "Honest abort probability, eta = {}, d = {}, {} dB/km\n{:>10} {:>14} {:>12}\n",
                det.efficiency(),
                det.dark_count(),
                r.loss(),
                "L (km)",
                "Pr_H",
                "dark-dark"
            );
            for p in &points {
                let _ = writeln!(
                    s,
                    "{:>10} {:>14.6e} {:>12.6}",
                    p.length_km, p.pr_h, p.dark_dark_fraction
                );
            }
            s
        }
    })
}

fn cmd_fair(r: &Resolved) -> Result<String, CliError> {
    let tolerance = r.s.tolerance.unwrap_or(1e-12);
    let f = solve_fair_y(tolerance)?;
    Ok(match r.format {
        Format::Json => to_json(&json!({
            "y": f.y,
            "bias": f.bias,
            "iterations": f.iterations,
            "tolerance": tolerance,
        })),
        Format::Csv => format!(
            "y,bias,iterations,tolerance\n{},{},{},{}\n",
            f.y, f.bias, f.iterations, tolerance
        ),
        Format::Text => format!(
            "fair y = {:.10}, bias = {:.10} ({} bisection steps)\n",
            f.y, f.bias, f.iterations
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = main_with_args(
            std::iter::once("mdiqct").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(&["fair"]).0, 0);
        assert_eq!(run(&["tables", "--y", "0.3"]).0, 2);
        assert_eq!(run(&["bogus"]).0, 2);
        assert_eq!(run(&["fair", "--no-such-flag"]).0, 2);
        assert_eq!(run(&["attack", "--adversary", "eve"]).0, 2);
        assert_eq!(run(&["run", "--adversary", "alice-blinding"]).0, 2);
        assert_eq!(run(&["run", "--eta", "0", "--max-rounds", "5"]).0, 1);
        assert_eq!(run(&["--help"]).0, 0);
    }

    #[test]
    fn labels() {
        assert_eq!(parse_label("10").unwrap(), StateLabel { basis: 1, bit: 0 });
        assert_eq!(parse_label("φ01").unwrap(), StateLabel { basis: 0, bit: 1 });
        assert!(parse_label("2").is_err());
    }

    #[test]
    fn config_layering() {
        let hi = Settings {
            y: Some(0.8),
            ..Default::default()
        };
        let lo = Settings {
            y: Some(0.7),
            eta: Some(0.5),
            ..Default::default()
        };
        let m = hi.over(lo);
        assert_eq!(m.y, Some(0.8));
        assert_eq!(m.eta, Some(0.5));
        assert!(serde_json::from_str::<Settings>(r#"{"bogus": 1}"#).is_err());
        let s: Settings = serde_json::from_str(r#"{"max-rounds": 5, "tie-break": "uniform"}"#).unwrap();
        assert_eq!(s.max_rounds, Some(5));
    }
}
