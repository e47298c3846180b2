//! The coin-tossing state machine.
//!
//! One execution runs the following steps:
//!
//! 1. Alice prepares `|φ_{α,a}⟩` for a uniformly random label.
//! 2. Bob prepares `|φ_{β,b}⟩`. Both photons enter an untrusted measurement
//!    box which announces `Ψ+`, `Ψ−` or failure. On failure both restart.
//! 3. Bob sends a random bit `b′`.
//! 4. Alice reveals `(α, a)`.
//! 5. Bob aborts if the revealed label, his own label and the announced
//!    outcome form a zero-probability cell. Otherwise the coin is `a ⊕ b′`.
//!
//! Bob's side is the [`BobVerifier`] phase machine. It rejects messages that
//! arrive out of order. The measurement box only ever sees quantum states
//! ([`MeasurementBox::measure`] takes no labels), so nothing about Bob's
//! preparation can leak through it.
//!
//! The weak-coherent variant replaces the restart loop by a fixed block of
//! `K` pulse slots and keeps the first slot with a Bell outcome. The
//! baseline mode is a prepare-and-measure protocol where Bob measures
//! Alice's photon himself. It is only used to show what detector control
//! does to a protocol with trusted detectors.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversaries::{
    AdversaryStrategy, AttackKind, BlindingAlice, CoherentAlice, ColludingBox, IndividualAlice, MedBob,
};
use crate::devices::{
    sample_photon_number, transmittance, BsmSample, ChannelParams, DetectorParams, EventCause, NoisyBsm, SourceModel,
};
use crate::error::{Error, Result};
use crate::qmath::{atvy_state, honest_states, is_zero_cell, ProtocolParams, PureState};

pub use crate::qmath::{BsmOutcome, StateLabel};

/// Default cap on the restart loop.
pub const DEFAULT_MAX_ROUNDS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Mdi,
    MdiWeakCoherent,
    Baseline,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mdi" => Ok(Mode::Mdi),
            "mdi-weak-coherent" | "weak-coherent" => Ok(Mode::MdiWeakCoherent),
            "baseline" => Ok(Mode::Baseline),
            other => Err(Error::Parameter(format!("unknown mode `{other}`"))),
        }
    }
}

/// Everything a run needs besides randomness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: ProtocolParams,
    pub channel: ChannelParams,
    pub detector: DetectorParams,
    pub source_a: SourceModel,
    pub source_b: SourceModel,
    pub max_rounds: u64,
    pub mode: Mode,
    /// Pulse slots per execution in weak-coherent mode.
    pub pulses: u32,
    /// Include the photon-missed-plus-dark-count coincidence in the device model.
    pub extended_dark_counts: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ProtocolParams::default(),
            channel: ChannelParams::lossless(),
            detector: DetectorParams::default(),
            source_a: SourceModel::SinglePhoton,
            source_b: SourceModel::SinglePhoton,
            max_rounds: DEFAULT_MAX_ROUNDS,
            mode: Mode::Mdi,
            pulses: 1,
            extended_dark_counts: false,
        }
    }
}

impl RunConfig {
    /// Lossless channel with perfect detectors.
    pub fn ideal(params: ProtocolParams) -> Self {
        Self {
            params,
            detector: DetectorParams::ideal(),
            ..Self::default()
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_rounds < 1 {
            return Err(Error::Parameter("max rounds must be at least 1".into()));
        }
        self.source_a.validate()?;
        self.source_b.validate()?;
        match self.mode {
            Mode::MdiWeakCoherent => {
                if self.pulses < 1 {
                    return Err(Error::Parameter("weak-coherent mode needs at least one pulse".into()));
                }
            }
            Mode::Mdi | Mode::Baseline => {
                if self.source_a != SourceModel::SinglePhoton || self.source_b != SourceModel::SinglePhoton {
                    return Err(Error::Configuration(
                        "weak-coherent sources require mode mdi-weak-coherent".into(),
                    ));
                }
            }
        }
        NoisyBsm::new(self.channel, self.detector, self.extended_dark_counts).map(|_| ())
    }

    pub fn device(&self) -> Result<NoisyBsm> {
        NoisyBsm::new(self.channel, self.detector, self.extended_dark_counts)
    }

    fn require_mode(&self, mode: Mode) -> Result<()> {
        if self.mode != mode {
            return Err(Error::Configuration(format!(
                "operation needs mode {mode:?}, config has {:?}",
                self.mode
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Accept,
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbortReason {
    /// Bob's check hit a zero-probability combination.
    CheatingDetected,
    /// Weak-coherent mode: none of the `K` slots produced a Bell outcome.
    NoSuccessfulSlot,
}

/// Record of one execution. Every field is always present in serialized
/// form; fields that do not apply are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub mode: Mode,
    /// Rounds (or pulse slots) consumed, including the successful one.
    pub rounds: u64,
    pub outcome: Option<BsmOutcome>,
    pub cause: Option<EventCause>,
    pub bob_label: Option<StateLabel>,
    pub bob_random_bit: Option<u8>,
    pub revealed_label: Option<StateLabel>,
    pub verdict: Verdict,
    pub abort_reason: Option<AbortReason>,
    pub coin: Option<u8>,
    /// Weak-coherent mode: index of the first slot with a Bell outcome.
    pub pulse_index: Option<u32>,
    /// Weak-coherent mode: a party emitted two or more photons in the kept slot.
    pub multi_photon: Option<bool>,
    pub adversary: Option<AttackKind>,
    pub target_coin: Option<u8>,
    pub adversary_success: Option<bool>,
    /// Individual attack: whether the box identified Bob's state.
    pub box_guess_correct: Option<bool>,
}

impl Transcript {
    fn new(mode: Mode) -> Self {
        Self {
            mode,
            rounds: 0,
            outcome: None,
            cause: None,
            bob_label: None,
            bob_random_bit: None,
            revealed_label: None,
            verdict: Verdict::Abort,
            abort_reason: None,
            coin: None,
            pulse_index: None,
            multi_photon: None,
            adversary: None,
            target_coin: None,
            adversary_success: None,
            box_guess_correct: None,
        }
    }

    pub fn accepted(&self) -> bool {
        self.verdict == Verdict::Accept
    }

    fn tag_adversary(&mut self, strategy: &AdversaryStrategy) {
        self.adversary = Some(strategy.kind());
        self.target_coin = Some(strategy.target());
        self.adversary_success = Some(self.accepted() && self.coin == Some(strategy.target()));
    }
}

/// Bob's check for the MDI protocol: abort iff the cell is a zero of the
/// verification table. The zero set does not depend on `y`.
pub fn verify(outcome: BsmOutcome, revealed: StateLabel, bob: StateLabel) -> Result<Verdict> {
    if outcome == BsmOutcome::Failure {
        return Err(Error::Precondition("cannot verify against a failed measurement".into()));
    }
    Ok(if is_zero_cell(outcome, revealed, bob) {
        Verdict::Abort
    } else {
        Verdict::Accept
    })
}

/// Bob's check for the prepare-and-measure baseline: abort iff he measured in
/// Alice's basis and saw the state orthogonal to the one she claims.
pub fn verify_baseline(revealed: StateLabel, measured: StateLabel) -> Verdict {
    if revealed.basis == measured.basis && revealed.bit != measured.bit {
        Verdict::Abort
    } else {
        Verdict::Accept
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    AwaitingOutcome,
    AwaitingDetection,
    Recorded,
    BitSent,
    Finished,
}

impl Phase {
    fn name(self) -> &'static str {
        match self {
            Phase::Idle => "idle",
            Phase::AwaitingOutcome => "awaiting-outcome",
            Phase::AwaitingDetection => "awaiting-detection",
            Phase::Recorded => "recorded",
            Phase::BitSent => "bit-sent",
            Phase::Finished => "finished",
        }
    }
}

/// Bob's decision after Alice's reveal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub verdict: Verdict,
    pub coin: Option<u8>,
}

/// Honest Bob as a phase machine.
///
/// MDI: `prepare_state` → `record_outcome` → `send_random_bit` → `verify`.
/// Baseline: `choose_basis` → `record_detection` → `send_random_bit` → `verify`.
/// A failed outcome or a missing click sends Bob back to the start.
#[derive(Debug, Clone)]
pub struct BobVerifier {
    states: [PureState; 4],
    phase: Phase,
    label: Option<StateLabel>,
    basis: Option<u8>,
    outcome: Option<BsmOutcome>,
    b_prime: Option<u8>,
    decision: Option<Decision>,
}

impl BobVerifier {
    pub fn new(params: ProtocolParams) -> Self {
        Self {
            states: honest_states(params),
            phase: Phase::Idle,
            label: None,
            basis: None,
            outcome: None,
            b_prime: None,
            decision: None,
        }
    }

    fn expect(&self, phase: Phase, message: &'static str) -> Result<()> {
        if self.phase != phase {
            return Err(Error::OutOfOrder {
                message,
                phase: self.phase.name(),
            });
        }
        Ok(())
    }

    /// Draws a fresh label and returns only the photon.
    pub fn prepare_state<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<PureState> {
        self.expect(Phase::Idle, "prepare-state")?;
        let label = StateLabel::from_index(rng.gen_range(0..4));
        self.label = Some(label);
        self.phase = Phase::AwaitingOutcome;
        Ok(self.states[label.index()])
    }

    /// Returns `true` once a Bell outcome is recorded; failure resets the round.
    pub fn record_outcome(&mut self, outcome: BsmOutcome) -> Result<bool> {
        self.expect(Phase::AwaitingOutcome, "bsm-outcome")?;
        if outcome == BsmOutcome::Failure {
            self.label = None;
            self.phase = Phase::Idle;
            return Ok(false);
        }
        self.outcome = Some(outcome);
        self.phase = Phase::Recorded;
        Ok(true)
    }

    pub fn choose_basis<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<u8> {
        self.expect(Phase::Idle, "choose-basis")?;
        let basis = rng.gen_range(0..2u8);
        self.basis = Some(basis);
        self.phase = Phase::AwaitingDetection;
        Ok(basis)
    }

    /// The basis Bob measures in during the current baseline round.
    pub fn measurement_basis(&self) -> Option<[PureState; 2]> {
        let b = self.basis? as usize;
        Some([self.states[2 * b], self.states[2 * b + 1]])
    }

    /// `None` means no click; Bob asks Alice to resend.
    pub fn record_detection(&mut self, measured_bit: Option<u8>) -> Result<bool> {
        self.expect(Phase::AwaitingDetection, "detection")?;
        let basis = self.basis.expect("basis chosen before detection");
        match measured_bit {
            None => {
                self.basis = None;
                self.phase = Phase::Idle;
                Ok(false)
            }
            Some(bit) => {
                self.label = Some(StateLabel::new(basis, bit)?);
                self.phase = Phase::Recorded;
                Ok(true)
            }
        }
    }

    pub fn send_random_bit<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<u8> {
        self.expect(Phase::Recorded, "random-bit")?;
        let b = rng.gen_range(0..2u8);
        self.b_prime = Some(b);
        self.phase = Phase::BitSent;
        Ok(b)
    }

    pub fn verify(&mut self, revealed: StateLabel) -> Result<Decision> {
        self.expect(Phase::BitSent, "reveal")?;
        let own = self.label.expect("label recorded");
        let verdict = match self.outcome {
            Some(outcome) => verify(outcome, revealed, own)?,
            None => verify_baseline(revealed, own),
        };
        let coin = match verdict {
            Verdict::Accept => Some(revealed.bit ^ self.b_prime.expect("bit sent")),
            Verdict::Abort => None,
        };
        let decision = Decision { verdict, coin };
        self.decision = Some(decision);
        self.phase = Phase::Finished;
        Ok(decision)
    }

    /// Bob's private label, readable only once the execution is over.
    pub fn revealed_own_label(&self) -> Result<StateLabel> {
        self.expect(Phase::Finished, "read-label")?;
        Ok(self.label.expect("label recorded"))
    }
}

/// Randomness handed to a measurement box.
pub struct BoxRngs<'a> {
    pub device: &'a mut ChaCha8Rng,
    pub adversary: &'a mut ChaCha8Rng,
}

/// What the box announces, plus an optional classical leak to Alice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxOutput {
    pub outcome: BsmOutcome,
    pub cause: Option<EventCause>,
    /// Only a colluding box fills this; it is routed to Alice, never to Bob.
    pub leak: Option<StateLabel>,
}

impl From<BsmSample> for BoxOutput {
    fn from(s: BsmSample) -> Self {
        Self {
            outcome: s.outcome,
            cause: Some(s.cause),
            leak: None,
        }
    }
}

/// The untrusted Bell-measurement box. It receives photons only.
pub trait MeasurementBox {
    /// `alice` is `None` when Alice sends nothing.
    fn measure(&mut self, alice: Option<&PureState>, bob: &PureState, rng: BoxRngs<'_>) -> BoxOutput;
}

impl MeasurementBox for NoisyBsm {
    fn measure(&mut self, alice: Option<&PureState>, bob: &PureState, rng: BoxRngs<'_>) -> BoxOutput {
        match alice {
            Some(a) => self.sample(a, bob, rng.device).into(),
            None => {
                let t_b = self.channel().transmittance_b();
                self.sample_with_transmittance(bob, bob, 0.0, t_b, rng.device).into()
            }
        }
    }
}

/// Alice's side of the MDI protocol.
pub trait AliceParty {
    /// Photon for a new round, or `None` if she sends nothing.
    fn emit(&mut self, rng: &mut ChaCha8Rng) -> Option<PureState>;

    /// Classical information from a colluding box.
    fn receive_leak(&mut self, _guess: StateLabel) {}

    /// Step 4. Called only after `b′` has been fixed.
    fn reveal(&mut self, outcome: BsmOutcome, b_prime: u8, rng: &mut ChaCha8Rng) -> StateLabel;
}

/// What Alice puts on the line in the baseline protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaselineEmission {
    Photon(PureState),
    /// Detector control: Bob clicks only if he measures in `basis`, and then
    /// always reports `bit`.
    Blinding {
        basis: u8,
        bit: u8,
    },
}

/// Alice's side of the baseline protocol.
pub trait BaselineAlice {
    fn emit_baseline(&mut self, rng: &mut ChaCha8Rng) -> BaselineEmission;
    fn reveal_baseline(&mut self, b_prime: u8, rng: &mut ChaCha8Rng) -> StateLabel;
}

/// Uniformly random label, honestly revealed.
#[derive(Debug, Clone)]
pub struct HonestAlice {
    states: [PureState; 4],
    label: Option<StateLabel>,
}

impl HonestAlice {
    pub fn new(params: ProtocolParams) -> Self {
        Self {
            states: honest_states(params),
            label: None,
        }
    }

    pub fn label(&self) -> Option<StateLabel> {
        self.label
    }

    fn pick(&mut self, rng: &mut ChaCha8Rng) -> PureState {
        let label = StateLabel::from_index(rng.gen_range(0..4));
        self.label = Some(label);
        self.states[label.index()]
    }
}

impl AliceParty for HonestAlice {
    fn emit(&mut self, rng: &mut ChaCha8Rng) -> Option<PureState> {
        Some(self.pick(rng))
    }

    fn reveal(&mut self, _outcome: BsmOutcome, _b_prime: u8, _rng: &mut ChaCha8Rng) -> StateLabel {
        self.label.expect("reveal after emit")
    }
}

impl BaselineAlice for HonestAlice {
    fn emit_baseline(&mut self, rng: &mut ChaCha8Rng) -> BaselineEmission {
        BaselineEmission::Photon(self.pick(rng))
    }

    fn reveal_baseline(&mut self, _b_prime: u8, _rng: &mut ChaCha8Rng) -> StateLabel {
        self.label.expect("reveal after emit")
    }
}

/// Runs the MDI restart loop with arbitrary Alice and box implementations.
pub fn run_mdi_with<A: AliceParty, B: MeasurementBox>(
    config: &RunConfig,
    alice: &mut A,
    bbox: &mut B,
    streams: &mut crate::Streams,
) -> Result<Transcript> {
    let mut bob = BobVerifier::new(config.params);
    let mut transcript = Transcript::new(Mode::Mdi);
    for round in 1..=config.max_rounds {
        let photon_a = alice.emit(&mut streams.alice);
        let photon_b = bob.prepare_state(&mut streams.bob)?;
        let out = bbox.measure(
            photon_a.as_ref(),
            &photon_b,
            BoxRngs {
                device: &mut streams.device,
                adversary: &mut streams.adversary,
            },
        );
        if let Some(guess) = out.leak {
            alice.receive_leak(guess);
        }
        if !bob.record_outcome(out.outcome)? {
            continue;
        }
        let b_prime = bob.send_random_bit(&mut streams.bob)?;
        let revealed = alice.reveal(out.outcome, b_prime, &mut streams.alice);
        let decision = bob.verify(revealed)?;
        let own = bob.revealed_own_label()?;
        transcript.rounds = round;
        transcript.outcome = Some(out.outcome);
        transcript.cause = out.cause;
        transcript.bob_label = Some(own);
        transcript.bob_random_bit = Some(b_prime);
        transcript.revealed_label = Some(revealed);
        transcript.verdict = decision.verdict;
        transcript.coin = decision.coin;
        if decision.verdict == Verdict::Abort {
            transcript.abort_reason = Some(AbortReason::CheatingDetected);
        }
        transcript.box_guess_correct = out.leak.map(|g| g == own);
        return Ok(transcript);
    }
    Err(Error::Exhausted {
        rounds: config.max_rounds,
    })
}

/// Both parties honest, single-photon sources, restart on failure.
pub fn run_honest(config: &RunConfig, streams: &mut crate::Streams) -> Result<Transcript> {
    config.require_mode(Mode::Mdi)?;
    config.validate()?;
    let mut device = config.device()?;
    run_mdi_with(config, &mut HonestAlice::new(config.params), &mut device, streams)
}

/// One gate of the honest protocol without the restart loop: both parties
/// pick labels, the device fires once, and `aborts` records whether the gate
/// produced an outcome that Bob would reject.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HonestGate {
    pub alice: StateLabel,
    pub bob: StateLabel,
    pub sample: BsmSample,
    pub aborts: bool,
}

pub fn honest_gate(device: &NoisyBsm, params: ProtocolParams, streams: &mut crate::Streams) -> HonestGate {
    let alice = StateLabel::from_index(streams.alice.gen_range(0..4));
    let bob = StateLabel::from_index(streams.bob.gen_range(0..4));
    let sample = device.sample(
        &atvy_state(alice, params),
        &atvy_state(bob, params),
        &mut streams.device,
    );
    HonestGate {
        alice,
        bob,
        sample,
        aborts: sample.outcome.is_success() && is_zero_cell(sample.outcome, alice, bob),
    }
}

/// Weak-coherent variant: `K` slots, keep the first Bell outcome, abort if
/// there is none.
pub fn run_weak_coherent(config: &RunConfig, streams: &mut crate::Streams) -> Result<Transcript> {
    config.require_mode(Mode::MdiWeakCoherent)?;
    config.validate()?;
    let device = config.device()?;
    let (t_a, t_b) = (config.channel.transmittance_a(), config.channel.transmittance_b());
    let mut alice = HonestAlice::new(config.params);
    let mut bob = BobVerifier::new(config.params);
    let mut transcript = Transcript::new(Mode::MdiWeakCoherent);
    transcript.rounds = config.pulses as u64;
    for slot in 0..config.pulses {
        let photon_a = alice.pick(&mut streams.alice);
        let photon_b = bob.prepare_state(&mut streams.bob)?;
        let n_a = sample_photon_number(&config.source_a, &mut streams.device);
        let n_b = sample_photon_number(&config.source_b, &mut streams.device);
        // At least one of n photons survives the fiber.
        let eff = |t: f64, n: u64| 1.0 - (1.0 - t).powi(n.min(i32::MAX as u64) as i32);
        let sample =
            device.sample_with_transmittance(&photon_a, &photon_b, eff(t_a, n_a), eff(t_b, n_b), &mut streams.device);
        if !bob.record_outcome(sample.outcome)? {
            continue;
        }
        let b_prime = bob.send_random_bit(&mut streams.bob)?;
        let revealed = alice.reveal(sample.outcome, b_prime, &mut streams.alice);
        let decision = bob.verify(revealed)?;
        transcript.rounds = slot as u64 + 1;
        transcript.pulse_index = Some(slot);
        transcript.multi_photon = Some(n_a >= 2 || n_b >= 2);
        transcript.outcome = Some(sample.outcome);
        transcript.cause = Some(sample.cause);
        transcript.bob_label = Some(bob.revealed_own_label()?);
        transcript.bob_random_bit = Some(b_prime);
        transcript.revealed_label = Some(revealed);
        transcript.verdict = decision.verdict;
        transcript.coin = decision.coin;
        if decision.verdict == Verdict::Abort {
            transcript.abort_reason = Some(AbortReason::CheatingDetected);
        }
        return Ok(transcript);
    }
    transcript.verdict = Verdict::Abort;
    transcript.abort_reason = Some(AbortReason::NoSuccessfulSlot);
    Ok(transcript)
}

fn run_baseline_with<A: BaselineAlice>(
    config: &RunConfig,
    alice: &mut A,
    streams: &mut crate::Streams,
) -> Result<Transcript> {
    // Direct Alice → Bob link over both fiber spans, Bob's own detector.
    let t = transmittance(
        config.channel.length_a_km() + config.channel.length_b_km(),
        config.channel.loss_db_per_km(),
    )?;
    let click_probability = t * config.detector.efficiency();
    let mut bob = BobVerifier::new(config.params);
    let mut transcript = Transcript::new(Mode::Baseline);
    for round in 1..=config.max_rounds {
        let emission = alice.emit_baseline(&mut streams.alice);
        let basis = bob.choose_basis(&mut streams.bob)?;
        let measured = match emission {
            BaselineEmission::Photon(state) => {
                if streams.device.gen::<f64>() < click_probability {
                    let [e0, _] = bob.measurement_basis().expect("basis chosen");
                    Some(if streams.device.gen::<f64>() < e0.overlap(&state) {
                        0
                    } else {
                        1
                    })
                } else {
                    None
                }
            }
            BaselineEmission::Blinding { basis: forced, bit } => (forced == basis).then_some(bit),
        };
        if !bob.record_detection(measured)? {
            continue;
        }
        let b_prime = bob.send_random_bit(&mut streams.bob)?;
        let revealed = alice.reveal_baseline(b_prime, &mut streams.alice);
        let decision = bob.verify(revealed)?;
        transcript.rounds = round;
        transcript.bob_label = Some(bob.revealed_own_label()?);
        transcript.bob_random_bit = Some(b_prime);
        transcript.revealed_label = Some(revealed);
        transcript.verdict = decision.verdict;
        transcript.coin = decision.coin;
        if decision.verdict == Verdict::Abort {
            transcript.abort_reason = Some(AbortReason::CheatingDetected);
        }
        return Ok(transcript);
    }
    Err(Error::Exhausted {
        rounds: config.max_rounds,
    })
}

/// Prepare-and-measure baseline with trusted detectors. Supported
/// adversaries: honest, dishonest Bob, detector blinding.
pub fn run_baseline(
    config: &RunConfig,
    adversary: Option<&AdversaryStrategy>,
    streams: &mut crate::Streams,
) -> Result<Transcript> {
    config.require_mode(Mode::Baseline)?;
    config.validate()?;
    let Some(strategy) = adversary else {
        return run_baseline_with(config, &mut HonestAlice::new(config.params), streams);
    };
    let mut t = match strategy.kind() {
        AttackKind::None => run_baseline_with(config, &mut HonestAlice::new(config.params), streams)?,
        AttackKind::AliceBlinding => run_baseline_with(config, &mut BlindingAlice::new(strategy), streams)?,
        AttackKind::BobMed => run_dishonest_bob(config, strategy, Mode::Baseline, streams)?,
        kind => {
            return Err(Error::Configuration(format!(
                "strategy {kind} needs the MDI measurement box and cannot run on the baseline"
            )))
        }
    };
    t.tag_adversary(strategy);
    Ok(t)
}

/// Bob measures Alice's photon with the optimal two-state measurement and
/// picks `b′` to steer the coin. Bob is the cheater, so nobody verifies.
fn run_dishonest_bob(
    config: &RunConfig,
    strategy: &AdversaryStrategy,
    mode: Mode,
    streams: &mut crate::Streams,
) -> Result<Transcript> {
    let mut alice = HonestAlice::new(config.params);
    let bob = MedBob::new(strategy)?;
    let photon = alice.pick(&mut streams.alice);
    let guess = bob.guess(&photon, &mut streams.adversary);
    let b_prime = guess ^ strategy.target();
    let revealed = alice.label().expect("picked");
    let mut t = Transcript::new(mode);
    t.rounds = 1;
    t.bob_random_bit = Some(b_prime);
    t.revealed_label = Some(revealed);
    t.verdict = Verdict::Accept;
    t.coin = Some(revealed.bit ^ b_prime);
    Ok(t)
}

/// Runs the protocol with one party (or the box) replaced by `strategy`.
pub fn run_with_adversary(
    config: &RunConfig,
    strategy: &AdversaryStrategy,
    streams: &mut crate::Streams,
) -> Result<Transcript> {
    config.validate()?;
    match config.mode {
        Mode::Baseline => return run_baseline(config, Some(strategy), streams),
        Mode::MdiWeakCoherent => {
            if strategy.kind() != AttackKind::None {
                return Err(Error::Configuration(
                    "adversaries are only modelled for single-photon modes".into(),
                ));
            }
            let mut t = run_weak_coherent(config, streams)?;
            t.tag_adversary(strategy);
            return Ok(t);
        }
        Mode::Mdi => {}
    }
    let mut t = match strategy.kind() {
        AttackKind::None => run_honest(config, streams)?,
        AttackKind::BobMed => run_dishonest_bob(config, strategy, Mode::Mdi, streams)?,
        AttackKind::AliceCoherent => {
            let mut device = config.device()?;
            run_mdi_with(config, &mut CoherentAlice::new(strategy), &mut device, streams)?
        }
        AttackKind::AliceIndividual => run_mdi_with(
            config,
            &mut IndividualAlice::new(strategy),
            &mut ColludingBox::new(strategy),
            streams,
        )?,
        AttackKind::AliceBlinding => {
            return Err(Error::Configuration(
                "detector blinding needs control over Bob's detectors; the MDI box offers no such channel".into(),
            ))
        }
    };
    t.tag_adversary(strategy);
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Streams;

    fn l(basis: u8, bit: u8) -> StateLabel {
        StateLabel::new(basis, bit).unwrap()
    }

    #[test]
    fn verify_examples() {
        assert_eq!(verify(BsmOutcome::PsiPlus, l(1, 0), l(0, 0)).unwrap(), Verdict::Abort);
        assert_eq!(verify(BsmOutcome::PsiMinus, l(0, 0), l(1, 0)).unwrap(), Verdict::Accept);
        assert!(verify(BsmOutcome::Failure, l(0, 0), l(0, 0)).is_err());
        for o in BsmOutcome::BELL {
            let aborts = StateLabel::ALL
                .iter()
                .flat_map(|a| StateLabel::ALL.map(|b| (*a, b)))
                .filter(|(a, b)| verify(o, *a, *b).unwrap() == Verdict::Abort)
                .count();
            assert_eq!(aborts, 4);
        }
    }

    #[test]
    fn baseline_check() {
        assert_eq!(verify_baseline(l(0, 0), l(0, 1)), Verdict::Abort);
        assert_eq!(verify_baseline(l(0, 0), l(0, 0)), Verdict::Accept);
        assert_eq!(verify_baseline(l(1, 0), l(0, 1)), Verdict::Accept);
    }

    #[test]
    fn bob_rejects_out_of_order_messages() {
        let mut bob = BobVerifier::new(ProtocolParams::default());
        let mut s = Streams::from_seed(1);
        // A probe that reveals before b′ exists.
        assert!(matches!(bob.verify(l(0, 0)), Err(Error::OutOfOrder { .. })));
        assert!(matches!(bob.send_random_bit(&mut s.bob), Err(Error::OutOfOrder { .. })));
        assert!(matches!(
            bob.record_outcome(BsmOutcome::PsiPlus),
            Err(Error::OutOfOrder { .. })
        ));
        assert!(bob.revealed_own_label().is_err());
        bob.prepare_state(&mut s.bob).unwrap();
        assert!(bob.prepare_state(&mut s.bob).is_err());
        assert!(matches!(bob.verify(l(0, 0)), Err(Error::OutOfOrder { .. })));
        assert!(!bob.record_outcome(BsmOutcome::Failure).unwrap());
        bob.prepare_state(&mut s.bob).unwrap();
        assert!(bob.record_outcome(BsmOutcome::PsiMinus).unwrap());
        assert!(matches!(bob.verify(l(0, 0)), Err(Error::OutOfOrder { .. })));
        let b = bob.send_random_bit(&mut s.bob).unwrap();
        assert!(bob.send_random_bit(&mut s.bob).is_err());
        let d = bob.verify(l(0, 1)).unwrap();
        if d.verdict == Verdict::Accept {
            assert_eq!(d.coin, Some(1 ^ b));
        }
        assert!(bob.verify(l(0, 1)).is_err());
        assert!(bob.revealed_own_label().is_ok());
    }

    #[test]
    fn honest_ideal_never_aborts_and_coin_formula_holds() {
        let config = RunConfig::ideal(ProtocolParams::default());
        for trial in 0..20_000 {
            let t = run_honest(&config, &mut Streams::for_trial(3, trial)).unwrap();
            assert_eq!(t.verdict, Verdict::Accept);
            let revealed = t.revealed_label.unwrap();
            assert_eq!(t.coin, Some(revealed.bit ^ t.bob_random_bit.unwrap()));
            assert_eq!(t.cause, Some(EventCause::BothPhotons));
        }
    }

    #[test]
    fn loss_only_grows_rounds() {
        let config = RunConfig {
            channel: ChannelParams::symmetric(25.0).unwrap(),
            detector: DetectorParams::new(0.1, 0.0).unwrap(),
            ..RunConfig::default()
        };
        let mut total_rounds = 0;
        for trial in 0..300 {
            let t = run_honest(&config, &mut Streams::for_trial(4, trial)).unwrap();
            assert_eq!(t.verdict, Verdict::Accept);
            total_rounds += t.rounds;
        }
        // Success per round is t_A t_B η² / 2 = 5e-4.
        assert!(total_rounds / 300 > 1000);
    }

    #[test]
    fn exhaustion_is_distinct_from_abort() {
        let config = RunConfig {
            channel: ChannelParams::symmetric(200.0).unwrap(),
            detector: DetectorParams::new(0.1, 0.0).unwrap(),
            max_rounds: 10,
            ..RunConfig::default()
        };
        assert_eq!(
            run_honest(&config, &mut Streams::from_seed(0)),
            Err(Error::Exhausted { rounds: 10 })
        );
    }

    #[test]
    fn mode_checks() {
        let base = RunConfig::ideal(ProtocolParams::default());
        let mut s = Streams::from_seed(0);
        assert!(matches!(
            run_honest(&base.with_mode(Mode::Baseline), &mut s),
            Err(Error::Configuration(_))
        ));
        assert!(matches!(run_weak_coherent(&base, &mut s), Err(Error::Configuration(_))));
        let wc_src = RunConfig {
            source_a: SourceModel::weak_coherent(0.5).unwrap(),
            ..base
        };
        assert!(matches!(run_honest(&wc_src, &mut s), Err(Error::Configuration(_))));
        let zero = RunConfig { max_rounds: 0, ..base };
        assert!(run_honest(&zero, &mut s).is_err());
    }

    #[test]
    fn weak_coherent_single_slot_reduces_to_one_round() {
        let config = RunConfig {
            mode: Mode::MdiWeakCoherent,
            pulses: 1,
            source_a: SourceModel::weak_coherent(40.0).unwrap(),
            source_b: SourceModel::weak_coherent(40.0).unwrap(),
            ..RunConfig::ideal(ProtocolParams::default())
        };
        let n = 40_000;
        let mut successes = 0;
        for trial in 0..n {
            let t = run_weak_coherent(&config, &mut Streams::for_trial(5, trial)).unwrap();
            assert_eq!(t.rounds, 1);
            match t.abort_reason {
                Some(AbortReason::NoSuccessfulSlot) => assert!(t.outcome.is_none()),
                Some(AbortReason::CheatingDetected) => panic!("honest noiseless run aborted on check"),
                None => {
                    successes += 1;
                    assert_eq!(t.pulse_index, Some(0));
                    assert_eq!(t.multi_photon, Some(true));
                }
            }
        }
        // Average ideal success over honest labels is 1/2.
        let f = successes as f64 / n as f64;
        assert!((f - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn baseline_honest_ideal_never_aborts() {
        let config = RunConfig::ideal(ProtocolParams::default()).with_mode(Mode::Baseline);
        for trial in 0..20_000 {
            let t = run_baseline(&config, None, &mut Streams::for_trial(6, trial)).unwrap();
            assert!(t.accepted());
        }
    }

    #[test]
    fn honest_party_streams_do_not_depend_on_alice() {
        // Same seed, different Alice behaviour: Bob's label and b′ are unchanged.
        let config = RunConfig::ideal(ProtocolParams::default());
        struct Fixed(PureState);
        impl AliceParty for Fixed {
            fn emit(&mut self, _: &mut ChaCha8Rng) -> Option<PureState> {
                Some(self.0)
            }
            fn reveal(&mut self, _: BsmOutcome, _: u8, _: &mut ChaCha8Rng) -> StateLabel {
                StateLabel::ALL[0]
            }
        }
        let mut dev = config.device().unwrap();
        let a = run_mdi_with(
            &config,
            &mut HonestAlice::new(config.params),
            &mut dev,
            &mut Streams::from_seed(9),
        )
        .unwrap();
        let b = run_mdi_with(
            &config,
            &mut Fixed(PureState::plus()),
            &mut dev,
            &mut Streams::from_seed(9),
        )
        .unwrap();
        if a.rounds == b.rounds {
            assert_eq!(a.bob_label, b.bob_label);
            assert_eq!(a.bob_random_bit, b.bob_random_bit);
        }
    }
}
