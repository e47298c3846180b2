//! Closed forms, the fairness solver and the Monte Carlo harness.
//!
//! Monte Carlo work is split into fixed-size batches of [`BATCH`] trials.
//! Batch `k` draws from `Streams::for_trial(seed, k)`, and per-batch counts
//! are summed, so results depend only on `(seed, trials)` and never on the
//! worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::adversaries::{AdversaryStrategy, AttackKind, CheatState, RevealTieBreak};
use crate::devices::{sample_bsm_ideal, CaseWeights, ChannelParams, DetectorParams, DEFAULT_LOSS_DB_PER_KM};
use crate::error::{Error, Result};
use crate::protocol::{honest_gate, run_with_adversary, RunConfig};
use crate::qmath::{atvy_state, bell_projection_probs, verification_table, BsmOutcome, ProtocolParams, StateLabel};
use crate::Streams;

/// Trials per random-stream batch.
pub const BATCH: u64 = 4096;

/// Honest abort probability per gate, term by term:
///
/// `½[(1−tA)(1−tB)·2d² + tA(1−tB)·ηd + tB(1−tA)·ηd
///    + tA(1−tB)(1−η)·2d² + tB(1−tA)(1−η)·2d² + tA·tB(1−η)²·2d²]`
pub fn honest_abort_closed_form(channel: &ChannelParams, det: &DetectorParams) -> f64 {
    let (ta, tb) = (channel.transmittance_a(), channel.transmittance_b());
    let (eta, d) = (det.efficiency(), det.dark_count());
    let d2 = 2.0 * d * d;
    0.5 * ((1.0 - ta) * (1.0 - tb) * d2
        + ta * (1.0 - tb) * eta * d
        + tb * (1.0 - ta) * eta * d
        + ta * (1.0 - tb) * (1.0 - eta) * d2
        + tb * (1.0 - ta) * (1.0 - eta) * d2
        + ta * tb * (1.0 - eta).powi(2) * d2)
}

/// Probability that a whole honest execution (restarting until a Bell
/// outcome) ends in an abort. A gate announces a Bell outcome with
/// probability `½·tA·tB·η² + 4·Pr_H`, and a quarter of the dark-assisted
/// announcements are rejected.
pub fn honest_abort_per_run(channel: &ChannelParams, det: &DetectorParams) -> f64 {
    let pr_h = honest_abort_closed_form(channel, det);
    let eta = det.efficiency();
    let success = 0.5 * channel.transmittance_a() * channel.transmittance_b() * eta * eta + 4.0 * pr_h;
    if success == 0.0 {
        0.0
    } else {
        pr_h / success
    }
}

/// Share of announced Bell outcomes caused by two dark counts.
pub fn dark_dark_fraction(channel: &ChannelParams, det: &DetectorParams) -> f64 {
    let w = CaseWeights::new(channel.transmittance_a(), channel.transmittance_b(), det, false);
    let announced = 0.5 * w.both_photons + w.dark_assisted();
    if announced == 0.0 {
        0.0
    } else {
        w.dark_dark / announced
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub length_km: f64,
    pub pr_h: f64,
    pub dark_dark_fraction: f64,
}

/// Honest abort curve with `l_A = l_B = L` for `L = lmin, lmin+step, …, ≤ lmax`.
pub fn sweep_distance(
    lmin: f64,
    lmax: f64,
    step: f64,
    det: &DetectorParams,
    loss_db_per_km: f64,
) -> Result<Vec<SweepPoint>> {
    if !(lmin.is_finite() && lmax.is_finite() && step.is_finite()) || lmin < 0.0 {
        return Err(Error::Parameter("sweep bounds must be finite and non-negative".into()));
    }
    if lmin > lmax {
        return Err(Error::Parameter(format!("lmin {lmin} exceeds lmax {lmax}")));
    }
    if step <= 0.0 {
        return Err(Error::Parameter(format!("step must be positive, got {step}")));
    }
    let n = ((lmax - lmin) / step + 1e-9).floor() as u64 + 1;
    (0..n)
        .map(|i| {
            let length = lmin + i as f64 * step;
            let channel = ChannelParams::new(length, length, loss_db_per_km)?;
            Ok(SweepPoint {
                length_km: length,
                pr_h: honest_abort_closed_form(&channel, det),
                dark_dark_fraction: dark_dark_fraction(&channel, det),
            })
        })
        .collect()
}

/// Same sweep at the default fiber loss.
pub fn sweep_distance_default_loss(lmin: f64, lmax: f64, step: f64, det: &DetectorParams) -> Result<Vec<SweepPoint>> {
    sweep_distance(lmin, lmax, step, det, DEFAULT_LOSS_DB_PER_KM)
}

/// Dishonest Bob's optimal success: the Helstrom bound for `ρ0` vs `ρ1`,
/// which equals `y`.
pub fn cheat_bob(params: ProtocolParams) -> f64 {
    params.y()
}

/// Coherent attack: `(3 + 2√(y(1−y)))/4`.
pub fn cheat_alice_coherent(params: ProtocolParams) -> f64 {
    (3.0 + 2.0 * params.overlap()) / 4.0
}

/// Individual attack: the box is right half the time, and a wrong guess
/// still passes half the time.
pub fn cheat_alice_individual() -> f64 {
    0.5 + 0.5 * 0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairPoint {
    pub y: f64,
    pub bias: f64,
    pub iterations: u32,
}

fn fairness_gap(y: f64) -> f64 {
    (3.0 + 2.0 * (y * (1.0 - y)).sqrt()) / 4.0 - y
}

/// Bisection for `cheat_alice_coherent(y) = cheat_bob(y)` on `(½, 1)`. The
/// gap is `½` at `y = ½` and `−¼` at `y = 1`.
pub fn solve_fair_y(tolerance: f64) -> Result<FairPoint> {
    if !(tolerance > 0.0) {
        return Err(Error::Precondition(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    let (mut lo, mut hi) = (0.5, 1.0);
    let mut iterations = 0;
    while hi - lo > tolerance && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if fairness_gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let y = 0.5 * (lo + hi);
    Ok(FairPoint {
        y,
        bias: y - 0.5,
        iterations,
    })
}

/// Table II: Bell outcome probabilities for Alice's `|±⟩` against each honest
/// Bob state, normalised over the two announced outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoherentTable {
    /// `[sent][bob label index][Ψ+, Ψ−]`, sent 0 = `|+⟩`, 1 = `|−⟩`.
    pub cells: [[[f64; 2]; 4]; 2],
}

impl CoherentTable {
    pub fn probability(&self, sent: CheatState, outcome: BsmOutcome, bob: StateLabel) -> f64 {
        let s = match sent {
            CheatState::Plus => 0,
            CheatState::Minus => 1,
        };
        match outcome {
            BsmOutcome::PsiPlus => self.cells[s][bob.index()][0],
            BsmOutcome::PsiMinus => self.cells[s][bob.index()][1],
            BsmOutcome::Failure => 0.0,
        }
    }
}

pub fn coherent_table(params: ProtocolParams) -> Result<CoherentTable> {
    let mut cells = [[[0.0; 2]; 4]; 2];
    for (s, sent) in [CheatState::Plus, CheatState::Minus].into_iter().enumerate() {
        for bob in StateLabel::ALL {
            let p = bell_projection_probs(&sent.state(), &atvy_state(bob, params))?.conditioned_on_success();
            cells[s][bob.index()] = [p.of(BsmOutcome::PsiPlus), p.of(BsmOutcome::PsiMinus)];
        }
    }
    Ok(CoherentTable { cells })
}

/// Bernoulli estimate with normal-approximation standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
    pub seed: u64,
    pub hits: u64,
}

impl Estimate {
    pub fn from_counts(hits: u64, trials: u64, seed: u64) -> Self {
        let mean = if trials == 0 { 0.0 } else { hits as f64 / trials as f64 };
        let stderr = if trials == 0 {
            0.0
        } else {
            (mean * (1.0 - mean) / trials as f64).sqrt()
        };
        Self {
            mean,
            stderr,
            trials,
            seed,
            hits,
        }
    }

    /// `|mean − p| ≤ k·σ`, with `σ` from `p` itself so that zero-hit
    /// estimates of a small `p` are judged fairly.
    pub fn agrees_with(&self, p: f64, k: f64) -> bool {
        let sigma = (p * (1.0 - p) / self.trials as f64).sqrt();
        (self.mean - p).abs() <= k * sigma
    }
}

/// `(a − b) / √(σa² + σb²)`.
pub fn z_score(a: &Estimate, b: &Estimate) -> f64 {
    let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    if se == 0.0 {
        if a.mean == b.mean {
            0.0
        } else {
            f64::INFINITY.copysign(a.mean - b.mean)
        }
    } else {
        (a.mean - b.mean) / se
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
}

/// Pearson test of `counts` against the uniform distribution.
pub fn chi_square_uniform(counts: &[u64]) -> Result<ChiSquare> {
    if counts.len() < 2 {
        return Err(Error::Precondition("chi-square needs at least two categories".into()));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Precondition("chi-square needs at least one observation".into()));
    }
    let expected = total as f64 / counts.len() as f64;
    let statistic = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dof = counts.len() as u64 - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Precondition(e.to_string()))?;
    Ok(ChiSquare {
        statistic,
        dof,
        p_value: 1.0 - dist.cdf(statistic),
    })
}

/// Runs `trials` trials in parallel batches and sums the `N` counters each
/// trial increments.
pub fn tally<const N: usize, F>(trials: u64, seed: u64, trial: F) -> Result<[u64; N]>
where
    F: Fn(&mut Streams, &mut [u64; N]) -> Result<()> + Sync,
{
    let batches = trials.div_ceil(BATCH);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut streams = Streams::for_trial(seed, b);
            let mut counts = [0u64; N];
            let end = ((b + 1) * BATCH).min(trials);
            for _ in b * BATCH..end {
                trial(&mut streams, &mut counts)?;
            }
            Ok(counts)
        })
        .try_reduce(
            || [0u64; N],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )
}

/// Runs `f` on a dedicated pool with `threads` workers (`None`: rayon's
/// default pool).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::Parameter("thread count must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::Configuration(e.to_string())),
    }
}

/// Device-level counts over independent honest gates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateTally {
    pub gates: u64,
    pub announced: u64,
    pub aborts: u64,
    pub dark_assisted: u64,
    pub dark_dark: u64,
}

pub fn gate_tally(config: &RunConfig, trials: u64, seed: u64) -> Result<GateTally> {
    let device = config.device()?;
    let params = config.params;
    let [announced, aborts, dark_assisted, dark_dark] = tally::<4, _>(trials, seed, |s, c| {
        let g = honest_gate(&device, params, s);
        if g.sample.outcome.is_success() {
            c[0] += 1;
            c[1] += g.aborts as u64;
            c[2] += g.sample.cause.is_dark_assisted() as u64;
            c[3] += (g.sample.cause == crate::devices::EventCause::DarkDark) as u64;
        }
        Ok(())
    })?;
    Ok(GateTally {
        gates: trials,
        announced,
        aborts,
        dark_assisted,
        dark_dark,
    })
}

/// Run-level counts for one strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttackTally {
    pub runs: u64,
    pub rounds: u64,
    pub successes: u64,
    pub aborts: u64,
    pub coin_ones: u64,
    /// Individual attack only: runs where the box identified Bob's state.
    pub guess_correct: u64,
    pub success_given_correct: u64,
}

impl AttackTally {
    pub fn success(&self, seed: u64) -> Estimate {
        Estimate::from_counts(self.successes, self.runs, seed)
    }

    pub fn abort(&self, seed: u64) -> Estimate {
        Estimate::from_counts(self.aborts, self.runs, seed)
    }

    pub fn success_given_correct_guess(&self, seed: u64) -> Estimate {
        Estimate::from_counts(self.success_given_correct, self.guess_correct, seed)
    }

    pub fn success_given_wrong_guess(&self, seed: u64) -> Estimate {
        Estimate::from_counts(
            self.successes - self.success_given_correct,
            self.runs - self.guess_correct,
            seed,
        )
    }
}

pub fn attack_tally(config: &RunConfig, strategy: &AdversaryStrategy, trials: u64, seed: u64) -> Result<AttackTally> {
    config.validate()?;
    let [rounds, successes, aborts, coin_ones, guess_correct, success_given_correct] =
        tally::<6, _>(trials, seed, |s, c| {
            let t = run_with_adversary(config, strategy, s)?;
            let ok = t.adversary_success == Some(true);
            c[0] += t.rounds;
            c[1] += ok as u64;
            c[2] += !t.accepted() as u64;
            c[3] += (t.coin == Some(1)) as u64;
            if t.box_guess_correct == Some(true) {
                c[4] += 1;
                c[5] += ok as u64;
            }
            Ok(())
        })?;
    Ok(AttackTally {
        runs: trials,
        rounds,
        successes,
        aborts,
        coin_ones,
        guess_correct,
        success_given_correct,
    })
}

/// A named Monte Carlo experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    /// Fraction of honest executions whose coin is 1.
    HonestCoinUniformity(RunConfig),
    /// Fraction of single honest gates that end in an abort.
    HonestAbortPerRound(RunConfig),
    /// Fraction of honest executions that end in an abort.
    HonestAbortPerRun(RunConfig),
    /// Success rate of a cheating strategy.
    Attack(RunConfig, AdversaryStrategy),
    /// Frequency of `outcome` for one verification-table cell with an ideal analyser.
    TableCell {
        params: ProtocolParams,
        outcome: BsmOutcome,
        alice: StateLabel,
        bob: StateLabel,
    },
    /// Frequency of `outcome` for `|±⟩` against an honest state, conditioned
    /// on a Bell outcome.
    CoherentCell {
        params: ProtocolParams,
        sent: CheatState,
        outcome: BsmOutcome,
        bob: StateLabel,
    },
}

/// Names accepted by [`Scenario::from_name`].
pub const SCENARIO_NAMES: [&str; 10] = [
    "honest-coin-uniformity",
    "honest-abort-per-round",
    "honest-abort-per-run",
    "none",
    "bob-med",
    "alice-individual",
    "alice-coherent",
    "alice-blinding",
    "table-cell",
    "coherent-cell",
];

/// Extra knobs some scenarios need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioOptions {
    pub target: u8,
    pub sent: CheatState,
    pub tie_break: RevealTieBreak,
    pub outcome: BsmOutcome,
    pub alice: StateLabel,
    pub bob: StateLabel,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self {
            target: 0,
            sent: CheatState::Plus,
            tie_break: RevealTieBreak::default(),
            outcome: BsmOutcome::PsiPlus,
            alice: StateLabel { basis: 0, bit: 0 },
            bob: StateLabel { basis: 0, bit: 0 },
        }
    }
}

impl Scenario {
    pub fn from_name(name: &str, config: RunConfig, opts: &ScenarioOptions) -> Result<Self> {
        let params = config.params;
        Ok(match name {
            "honest-coin-uniformity" => Scenario::HonestCoinUniformity(config),
            "honest-abort-per-round" => Scenario::HonestAbortPerRound(config),
            "honest-abort-per-run" => Scenario::HonestAbortPerRun(config),
            "table-cell" => Scenario::TableCell {
                params,
                outcome: opts.outcome,
                alice: opts.alice,
                bob: opts.bob,
            },
            "coherent-cell" => Scenario::CoherentCell {
                params,
                sent: opts.sent,
                outcome: opts.outcome,
                bob: opts.bob,
            },
            other => {
                let kind: AttackKind = other.parse()?;
                let strategy =
                    AdversaryStrategy::from_kind(kind, params, opts.target, opts.sent)?.with_tie_break(opts.tie_break);
                Scenario::Attack(config, strategy)
            }
        })
    }

    pub fn name(&self) -> String {
        match self {
            Scenario::HonestCoinUniformity(_) => "honest-coin-uniformity".into(),
            Scenario::HonestAbortPerRound(_) => "honest-abort-per-round".into(),
            Scenario::HonestAbortPerRun(_) => "honest-abort-per-run".into(),
            Scenario::Attack(_, s) => s.kind().to_string(),
            Scenario::TableCell { .. } => "table-cell".into(),
            Scenario::CoherentCell { .. } => "coherent-cell".into(),
        }
    }

    /// Value the estimate should converge to, where one is known.
    pub fn closed_form(&self) -> Result<Option<f64>> {
        Ok(match self {
            Scenario::HonestCoinUniformity(_) => Some(0.5),
            Scenario::HonestAbortPerRound(c) => {
                (!c.extended_dark_counts).then(|| honest_abort_closed_form(&c.channel, &c.detector))
            }
            Scenario::HonestAbortPerRun(c) => {
                (!c.extended_dark_counts).then(|| honest_abort_per_run(&c.channel, &c.detector))
            }
            Scenario::Attack(c, s) => {
                let ideal = c.detector == DetectorParams::ideal();
                match s.kind() {
                    AttackKind::None if ideal => Some(0.5),
                    AttackKind::BobMed | AttackKind::AliceIndividual | AttackKind::AliceBlinding => {
                        Some(s.expected_success())
                    }
                    AttackKind::AliceCoherent if ideal => Some(s.expected_success()),
                    _ => None,
                }
            }
            Scenario::TableCell {
                params,
                outcome,
                alice,
                bob,
            } => Some(verification_table(*params).probability(*outcome, *alice, *bob)),
            Scenario::CoherentCell {
                params,
                sent,
                outcome,
                bob,
            } => Some(coherent_table(*params)?.probability(*sent, *outcome, *bob)),
        })
    }
}

/// Monte Carlo estimate of `scenario`; identical inputs give identical output.
pub fn estimate(scenario: &Scenario, trials: u64, seed: u64) -> Result<Estimate> {
    if trials < 1 {
        return Err(Error::Precondition("trials must be at least 1".into()));
    }
    let hits = match scenario {
        Scenario::HonestCoinUniformity(config) => {
            let honest = AdversaryStrategy::honest(config.params, 1)?;
            attack_tally(config, &honest, trials, seed)?.coin_ones
        }
        Scenario::HonestAbortPerRound(config) => {
            config.validate()?;
            gate_tally(config, trials, seed)?.aborts
        }
        Scenario::HonestAbortPerRun(config) => {
            let honest = AdversaryStrategy::honest(config.params, 0)?;
            attack_tally(config, &honest, trials, seed)?.aborts
        }
        Scenario::Attack(config, strategy) => attack_tally(config, strategy, trials, seed)?.successes,
        Scenario::TableCell {
            params,
            outcome,
            alice,
            bob,
        } => {
            let (a, b) = (atvy_state(*alice, *params), atvy_state(*bob, *params));
            tally::<1, _>(trials, seed, |s, c| {
                c[0] += (sample_bsm_ideal(&a, &b, &mut s.device) == *outcome) as u64;
                Ok(())
            })?[0]
        }
        Scenario::CoherentCell {
            params,
            sent,
            outcome,
            bob,
        } => {
            let (a, b) = (sent.state(), atvy_state(*bob, *params));
            tally::<1, _>(trials, seed, |s, c| {
                let o = loop {
                    let o = sample_bsm_ideal(&a, &b, &mut s.device);
                    if o.is_success() {
                        break o;
                    }
                };
                c[0] += (o == *outcome) as u64;
                Ok(())
            })?[0]
        }
    };
    Ok(Estimate::from_counts(hits, trials, seed))
}
