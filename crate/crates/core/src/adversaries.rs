//! Cheating strategies.
//!
//! A strategy is an immutable description ([`AdversaryStrategy`]). Per-run
//! state lives in the small party objects built from it for each execution
//! ([`CoherentAlice`], [`IndividualAlice`], [`ColludingBox`],
//! [`BlindingAlice`], [`MedBob`]). Those objects plug into the protocol
//! engines.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::protocol::{AliceParty, BaselineAlice, BaselineEmission, BoxOutput, BoxRngs, MeasurementBox};
use crate::qmath::{
    commitment_density, honest_states, is_zero_cell, verification_table, BsmOutcome, HelstromMeasurement,
    ProtocolParams, PureState, StateLabel, VerificationTable,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    /// Identity strategy: everybody honest.
    None,
    BobMed,
    AliceIndividual,
    AliceCoherent,
    AliceBlinding,
}

impl AttackKind {
    pub const ALL: [AttackKind; 5] = [
        AttackKind::None,
        AttackKind::BobMed,
        AttackKind::AliceIndividual,
        AttackKind::AliceCoherent,
        AttackKind::AliceBlinding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::BobMed => "bob-med",
            AttackKind::AliceIndividual => "alice-individual",
            AttackKind::AliceCoherent => "alice-coherent",
            AttackKind::AliceBlinding => "alice-blinding",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Alice,
    Bob,
    BlackboxColludingWithAlice,
}

/// Which of the two optimal coherent-attack states Alice submits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheatState {
    #[default]
    Plus,
    Minus,
}

impl CheatState {
    pub fn state(self) -> PureState {
        match self {
            CheatState::Plus => PureState::plus(),
            CheatState::Minus => PureState::minus(),
        }
    }

    /// Basis Alice claims for committed bit `a`. `|+⟩` sits closest to
    /// `φ00` and `φ11`, `|−⟩` to `φ01` and `φ10`.
    pub fn claimed_basis(self, bit: u8) -> u8 {
        match self {
            CheatState::Plus => bit,
            CheatState::Minus => 1 - bit,
        }
    }
}

impl FromStr for CheatState {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" | "+" => Ok(CheatState::Plus),
            "minus" | "-" => Ok(CheatState::Minus),
            other => Err(param(format!("sent state must be plus or minus, got `{other}`"))),
        }
    }
}

/// How the individual attack picks between two basis claims that both pass
/// against the box's guess.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RevealTieBreak {
    /// Claim the basis whose verification-table cell with the guessed state
    /// is smaller. A wrong guess then passes with probability exactly ½ and
    /// the attack succeeds with probability ¾.
    #[default]
    SmallerCell,
    Uniform,
    /// Claim the basis with the larger cell. This is the better choice for
    /// Alice.
    LargerCell,
}

impl RevealTieBreak {
    /// Exact success probability of the individual attack under this rule.
    ///
    /// The box errs with probability ½. When it errs, Bob's true state is in
    /// the other basis. It carries the guessed bit with weight `(2y−1)²`
    /// and the flipped bit with weight `4y(1−y)`. The first case passes ½ of
    /// the time under every rule. The second passes ½, ¾ or 1 depending on
    /// the rule.
    pub fn success_probability(self, params: ProtocolParams) -> f64 {
        let y = params.y();
        let same_bit = (2.0 * y - 1.0).powi(2);
        let flipped_bit = 4.0 * y * (1.0 - y);
        let flipped_pass = match self {
            RevealTieBreak::SmallerCell => 0.5,
            RevealTieBreak::Uniform => 0.75,
            RevealTieBreak::LargerCell => 1.0,
        };
        0.5 + 0.5 * (0.5 * same_bit + flipped_pass * flipped_bit)
    }
}

impl FromStr for RevealTieBreak {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smaller-cell" => Ok(RevealTieBreak::SmallerCell),
            "uniform" => Ok(RevealTieBreak::Uniform),
            "larger-cell" => Ok(RevealTieBreak::LargerCell),
            other => Err(param(format!("unknown tie-break rule `{other}`"))),
        }
    }
}

/// Immutable description of one cheating strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversaryStrategy {
    kind: AttackKind,
    target: u8,
    params: ProtocolParams,
    sent: CheatState,
    tie_break: RevealTieBreak,
}

fn check_target(target: u8) -> Result<()> {
    if target > 1 {
        return Err(param(format!("target coin must be 0 or 1, got {target}")));
    }
    Ok(())
}

impl AdversaryStrategy {
    fn build(kind: AttackKind, params: ProtocolParams, target: u8) -> Result<Self> {
        check_target(target)?;
        Ok(Self {
            kind,
            target,
            params,
            sent: CheatState::Plus,
            tie_break: RevealTieBreak::default(),
        })
    }

    /// Nobody cheats; success means the coin happened to equal `target`.
    pub fn honest(params: ProtocolParams, target: u8) -> Result<Self> {
        Self::build(AttackKind::None, params, target)
    }

    /// Bob measures Alice's photon with the Helstrom measurement for
    /// `ρ0` vs `ρ1` and sets `b′ = â ⊕ target`.
    pub fn bob_med_attack(params: ProtocolParams, target: u8) -> Result<Self> {
        Self::build(AttackKind::BobMed, params, target)
    }

    /// Alice sends nothing. Her box performs the optimal four-state
    /// discrimination on Bob's photon, leaks the guess and announces a random
    /// Bell outcome.
    pub fn alice_individual_attack(params: ProtocolParams, target: u8) -> Result<Self> {
        Self::build(AttackKind::AliceIndividual, params, target)
    }

    /// Alice submits `|+⟩` or `|−⟩` to an honest box and picks her claim
    /// after seeing `b′`.
    pub fn alice_coherent_attack(params: ProtocolParams, target: u8, sent: CheatState) -> Result<Self> {
        let mut s = Self::build(AttackKind::AliceCoherent, params, target)?;
        s.sent = sent;
        Ok(s)
    }

    /// Detector control against the baseline protocol.
    pub fn alice_blinding_attack(target: u8) -> Result<Self> {
        Self::build(AttackKind::AliceBlinding, ProtocolParams::default(), target)
    }

    pub fn from_kind(kind: AttackKind, params: ProtocolParams, target: u8, sent: CheatState) -> Result<Self> {
        match kind {
            AttackKind::None => Self::honest(params, target),
            AttackKind::BobMed => Self::bob_med_attack(params, target),
            AttackKind::AliceIndividual => Self::alice_individual_attack(params, target),
            AttackKind::AliceCoherent => Self::alice_coherent_attack(params, target, sent),
            AttackKind::AliceBlinding => Self::alice_blinding_attack(target),
        }
    }

    pub fn with_tie_break(mut self, tie_break: RevealTieBreak) -> Self {
        self.tie_break = tie_break;
        self
    }

    pub fn kind(&self) -> AttackKind {
        self.kind
    }

    pub fn target(&self) -> u8 {
        self.target
    }

    pub fn params(&self) -> ProtocolParams {
        self.params
    }

    pub fn sent_state(&self) -> CheatState {
        self.sent
    }

    pub fn tie_break(&self) -> RevealTieBreak {
        self.tie_break
    }

    pub fn role(&self) -> Option<Role> {
        match self.kind {
            AttackKind::None => None,
            AttackKind::BobMed => Some(Role::Bob),
            AttackKind::AliceIndividual => Some(Role::BlackboxColludingWithAlice),
            AttackKind::AliceCoherent | AttackKind::AliceBlinding => Some(Role::Alice),
        }
    }

    /// Closed-form success probability with ideal devices.
    pub fn expected_success(&self) -> f64 {
        let p = self.params;
        match self.kind {
            AttackKind::None => 0.5,
            AttackKind::BobMed => crate::analysis::cheat_bob(p),
            AttackKind::AliceIndividual => self.tie_break.success_probability(p),
            AttackKind::AliceCoherent => crate::analysis::cheat_alice_coherent(p),
            AttackKind::AliceBlinding => 1.0,
        }
    }
}

/// Coherent-attack Alice.
#[derive(Debug, Clone)]
pub struct CoherentAlice {
    target: u8,
    sent: CheatState,
}

impl CoherentAlice {
    pub fn new(strategy: &AdversaryStrategy) -> Self {
        Self {
            target: strategy.target,
            sent: strategy.sent,
        }
    }

    pub fn claim(&self, b_prime: u8) -> StateLabel {
        let bit = b_prime ^ self.target;
        StateLabel {
            basis: self.sent.claimed_basis(bit),
            bit,
        }
    }
}

impl AliceParty for CoherentAlice {
    fn emit(&mut self, _rng: &mut ChaCha8Rng) -> Option<PureState> {
        Some(self.sent.state())
    }

    fn reveal(&mut self, _outcome: BsmOutcome, b_prime: u8, _rng: &mut ChaCha8Rng) -> StateLabel {
        self.claim(b_prime)
    }
}

/// Individual-attack Alice: reveals a claim consistent with the box's guess.
#[derive(Debug, Clone)]
pub struct IndividualAlice {
    target: u8,
    tie_break: RevealTieBreak,
    table: VerificationTable,
    guess: Option<StateLabel>,
}

impl IndividualAlice {
    pub fn new(strategy: &AdversaryStrategy) -> Self {
        Self {
            target: strategy.target,
            tie_break: strategy.tie_break,
            table: verification_table(strategy.params),
            guess: None,
        }
    }

    /// Claims that pass if `guess` is Bob's true label.
    pub fn consistent_claims(outcome: BsmOutcome, bit: u8, guess: StateLabel) -> Vec<StateLabel> {
        (0..2)
            .map(|basis| StateLabel { basis, bit })
            .filter(|claim| !is_zero_cell(outcome, *claim, guess))
            .collect()
    }

    fn choose(&self, outcome: BsmOutcome, bit: u8, rng: &mut ChaCha8Rng) -> StateLabel {
        let Some(guess) = self.guess else {
            return StateLabel {
                basis: rng.gen_range(0..2),
                bit,
            };
        };
        let claims = Self::consistent_claims(outcome, bit, guess);
        match claims.as_slice() {
            [only] => *only,
            [a, b] => {
                let cell = |c: &StateLabel| self.table.probability(outcome, *c, guess);
                match self.tie_break {
                    RevealTieBreak::Uniform => {
                        if rng.gen::<bool>() {
                            *a
                        } else {
                            *b
                        }
                    }
                    RevealTieBreak::SmallerCell => {
                        if cell(a) <= cell(b) {
                            *a
                        } else {
                            *b
                        }
                    }
                    RevealTieBreak::LargerCell => {
                        if cell(a) >= cell(b) {
                            *a
                        } else {
                            *b
                        }
                    }
                }
            }
            // Every (outcome, bit, guess) has at least one passing basis.
            _ => unreachable!("no consistent claim"),
        }
    }
}

impl AliceParty for IndividualAlice {
    fn emit(&mut self, _rng: &mut ChaCha8Rng) -> Option<PureState> {
        self.guess = None;
        None
    }

    fn receive_leak(&mut self, guess: StateLabel) {
        self.guess = Some(guess);
    }

    fn reveal(&mut self, outcome: BsmOutcome, b_prime: u8, rng: &mut ChaCha8Rng) -> StateLabel {
        self.choose(outcome, b_prime ^ self.target, rng)
    }
}

/// Box built by Alice for the individual attack.
///
/// It discriminates Bob's photon with the square-root measurement of the
/// four honest states, `E_i = ½|φ_i⟩⟨φ_i|`. That is the same as picking a
/// basis at random and measuring projectively in it. It then announces a
/// uniformly random Bell outcome.
#[derive(Debug, Clone)]
pub struct ColludingBox {
    states: [PureState; 4],
}

impl ColludingBox {
    pub fn new(strategy: &AdversaryStrategy) -> Self {
        Self {
            states: honest_states(strategy.params),
        }
    }

    pub fn discriminate(&self, photon: &PureState, rng: &mut ChaCha8Rng) -> StateLabel {
        let basis = rng.gen_range(0..2u8);
        let e0 = &self.states[2 * basis as usize];
        let bit = if rng.gen::<f64>() < e0.overlap(photon) { 0 } else { 1 };
        StateLabel { basis, bit }
    }
}

impl MeasurementBox for ColludingBox {
    fn measure(&mut self, _alice: Option<&PureState>, bob: &PureState, rng: BoxRngs<'_>) -> BoxOutput {
        let guess = self.discriminate(bob, rng.adversary);
        let outcome = if rng.adversary.gen::<bool>() {
            BsmOutcome::PsiPlus
        } else {
            BsmOutcome::PsiMinus
        };
        BoxOutput {
            outcome,
            cause: None,
            leak: Some(guess),
        }
    }
}

/// Blinding Alice on the baseline: she decides which basis makes Bob click
/// and what he records, so she always knows his record.
#[derive(Debug, Clone)]
pub struct BlindingAlice {
    target: u8,
    forced: Option<(u8, u8)>,
}

impl BlindingAlice {
    pub fn new(strategy: &AdversaryStrategy) -> Self {
        Self {
            target: strategy.target,
            forced: None,
        }
    }
}

impl BaselineAlice for BlindingAlice {
    fn emit_baseline(&mut self, rng: &mut ChaCha8Rng) -> BaselineEmission {
        let (basis, bit) = (rng.gen_range(0..2u8), rng.gen_range(0..2u8));
        self.forced = Some((basis, bit));
        BaselineEmission::Blinding { basis, bit }
    }

    fn reveal_baseline(&mut self, b_prime: u8, _rng: &mut ChaCha8Rng) -> StateLabel {
        let (basis, recorded) = self.forced.expect("reveal after emit");
        let bit = b_prime ^ self.target;
        // Matching bit: claim Bob's basis. Otherwise claim the other basis,
        // which Bob cannot check.
        let basis = if bit == recorded { basis } else { 1 - basis };
        StateLabel { basis, bit }
    }
}

/// Dishonest Bob's optimal guess of Alice's committed bit.
#[derive(Debug, Clone)]
pub struct MedBob {
    measurement: HelstromMeasurement,
}

impl MedBob {
    pub fn new(strategy: &AdversaryStrategy) -> Result<Self> {
        let p = strategy.params;
        let measurement = HelstromMeasurement::new(&commitment_density(0, p)?, &commitment_density(1, p)?, 0.5)?;
        Ok(Self { measurement })
    }

    pub fn guess(&self, photon: &PureState, rng: &mut ChaCha8Rng) -> u8 {
        if rng.gen::<f64>() < self.measurement.prob_guess_zero(photon) {
            0
        } else {
            1
        }
    }
}
