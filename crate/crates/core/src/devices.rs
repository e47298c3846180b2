//! Physical-layer models: fiber loss, detectors and the linear-optics Bell
//! analyser.
//!
//! The noisy analyser is a case model rather than a detector-resolved one.
//! Each gate first picks which of the coincidence cases happened (two real
//! photons, one photon plus a dark count, two dark counts, or nothing), then
//! picks the announced outcome. Dark-count-assisted coincidences announce
//! `Ψ+` or `Ψ−` uniformly and carry no information about the inputs. The
//! `(1−d)²` factor for the two idle detectors is dropped.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::qmath::{bell_projection_probs, BsmOutcome, PureState};

/// Default fiber attenuation in dB/km.
pub const DEFAULT_LOSS_DB_PER_KM: f64 = 0.2;

/// Survival probability through `length_km` of fiber: `10^(−loss·L/10)`.
pub fn transmittance(length_km: f64, loss_db_per_km: f64) -> Result<f64> {
    if !(length_km >= 0.0) || !length_km.is_finite() {
        return Err(param(format!("fiber length must be >= 0 km, got {length_km}")));
    }
    if !(loss_db_per_km > 0.0) || !loss_db_per_km.is_finite() {
        return Err(param(format!(
            "loss coefficient must be > 0 dB/km, got {loss_db_per_km}"
        )));
    }
    Ok(10f64.powf(-loss_db_per_km * length_km / 10.0))
}

/// Fiber lengths from each party to the analyser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    length_a_km: f64,
    length_b_km: f64,
    loss_db_per_km: f64,
}

impl ChannelParams {
    pub fn new(length_a_km: f64, length_b_km: f64, loss_db_per_km: f64) -> Result<Self> {
        transmittance(length_a_km, loss_db_per_km)?;
        transmittance(length_b_km, loss_db_per_km)?;
        Ok(Self {
            length_a_km,
            length_b_km,
            loss_db_per_km,
        })
    }

    /// Equal lengths on both sides at the default attenuation.
    pub fn symmetric(length_km: f64) -> Result<Self> {
        Self::new(length_km, length_km, DEFAULT_LOSS_DB_PER_KM)
    }

    pub fn lossless() -> Self {
        Self {
            length_a_km: 0.0,
            length_b_km: 0.0,
            loss_db_per_km: DEFAULT_LOSS_DB_PER_KM,
        }
    }

    pub fn length_a_km(&self) -> f64 {
        self.length_a_km
    }

    pub fn length_b_km(&self) -> f64 {
        self.length_b_km
    }

    pub fn loss_db_per_km(&self) -> f64 {
        self.loss_db_per_km
    }

    pub fn transmittance_a(&self) -> f64 {
        10f64.powf(-self.loss_db_per_km * self.length_a_km / 10.0)
    }

    pub fn transmittance_b(&self) -> f64 {
        10f64.powf(-self.loss_db_per_km * self.length_b_km / 10.0)
    }
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self::lossless()
    }
}

/// Identical single-photon detectors: efficiency `η` and per-gate dark-count
/// probability `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    efficiency: f64,
    dark_count: f64,
}

impl DetectorParams {
    pub fn new(efficiency: f64, dark_count: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&efficiency) {
            return Err(param(format!(
                "detector efficiency must be in [0, 1], got {efficiency}"
            )));
        }
        if !(0.0..1.0).contains(&dark_count) {
            return Err(param(format!(
                "dark-count probability must be in [0, 1), got {dark_count}"
            )));
        }
        Ok(Self { efficiency, dark_count })
    }

    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            dark_count: 0.0,
        }
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    pub fn dark_count(&self) -> f64 {
        self.dark_count
    }
}

impl Default for DetectorParams {
    /// η = 10 %, d = 1e-4.
    fn default() -> Self {
        Self {
            efficiency: 0.1,
            dark_count: 1e-4,
        }
    }
}

/// What produced the coincidence behind an announced outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventCause {
    BothPhotons,
    PhotonDark,
    DarkDark,
    Failure,
}

impl EventCause {
    pub fn is_dark_assisted(self) -> bool {
        matches!(self, EventCause::PhotonDark | EventCause::DarkDark)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BsmSample {
    pub outcome: BsmOutcome,
    pub cause: EventCause,
}

/// Photon source attached to one party.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SourceModel {
    SinglePhoton,
    WeakCoherent { mu: f64 },
}

impl SourceModel {
    pub fn weak_coherent(mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(param(format!("mean photon number must be > 0, got {mu}")));
        }
        Ok(Self::WeakCoherent { mu })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SourceModel::SinglePhoton => Ok(()),
            SourceModel::WeakCoherent { mu } => Self::weak_coherent(mu).map(|_| ()),
        }
    }

    /// Probability that a pulse carries two or more photons.
    pub fn multi_photon_probability(&self) -> f64 {
        match *self {
            SourceModel::SinglePhoton => 0.0,
            SourceModel::WeakCoherent { mu } => 1.0 - (-mu).exp() * (1.0 + mu),
        }
    }
}

impl Default for SourceModel {
    fn default() -> Self {
        SourceModel::SinglePhoton
    }
}

pub fn sample_photon_number<R: Rng + ?Sized>(source: &SourceModel, rng: &mut R) -> u64 {
    match *source {
        SourceModel::SinglePhoton => 1,
        SourceModel::WeakCoherent { mu } => {
            let poisson = Poisson::new(mu).expect("mu validated at construction");
            poisson.sample(rng) as u64
        }
    }
}

/// Lossless, noiseless, unit-efficiency analyser.
pub fn sample_bsm_ideal<R: Rng + ?Sized>(alice: &PureState, bob: &PureState, rng: &mut R) -> BsmOutcome {
    let p = bell_projection_probs(alice, bob).expect("pure states are normalized by construction");
    let u: f64 = rng.gen();
    if u < p.plus {
        BsmOutcome::PsiPlus
    } else if u < p.plus + p.minus {
        BsmOutcome::PsiMinus
    } else {
        BsmOutcome::Failure
    }
}

/// Per-gate probabilities of each coincidence case, summed over both
/// announced outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseWeights {
    pub both_photons: f64,
    pub photon_dark: f64,
    pub dark_dark: f64,
}

impl CaseWeights {
    pub fn new(t_a: f64, t_b: f64, det: &DetectorParams, extended: bool) -> Self {
        let (eta, d) = (det.efficiency, det.dark_count);
        // Per announced outcome: a detected photon pairs with one specific
        // detector (η·d); two dark counts can pair up in two ways (2d²).
        let mut photon_dark = t_a * (1.0 - t_b) * eta * d + t_b * (1.0 - t_a) * eta * d;
        if extended {
            photon_dark += 2.0 * t_a * t_b * eta * (1.0 - eta) * d;
        }
        let no_detection = (1.0 - t_a) * (1.0 - t_b)
            + t_a * (1.0 - t_b) * (1.0 - eta)
            + t_b * (1.0 - t_a) * (1.0 - eta)
            + t_a * t_b * (1.0 - eta).powi(2);
        Self {
            both_photons: t_a * t_b * eta * eta,
            photon_dark: 2.0 * photon_dark,
            dark_dark: 2.0 * 2.0 * d * d * no_detection,
        }
    }

    pub fn dark_assisted(&self) -> f64 {
        self.photon_dark + self.dark_dark
    }

    pub fn total(&self) -> f64 {
        self.both_photons + self.dark_assisted()
    }
}

/// Analyser with fiber loss, finite efficiency and dark counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyBsm {
    channel: ChannelParams,
    detector: DetectorParams,
    extended: bool,
    weights: CaseWeights,
}

impl NoisyBsm {
    /// `extended` adds the coincidence where one photon is detected, its
    /// partner arrives but is missed, and a dark count fills in.
    pub fn new(channel: ChannelParams, detector: DetectorParams, extended: bool) -> Result<Self> {
        // Weights are multilinear in (t_A, t_B), so the corners bound them.
        for t_a in [0.0, 1.0] {
            for t_b in [0.0, 1.0] {
                let total = CaseWeights::new(t_a, t_b, &detector, extended).total();
                if total > 1.0 {
                    return Err(param(format!(
                        "dark-count probability {} is too large for the coincidence model \
                         (case weights sum to {total})",
                        detector.dark_count
                    )));
                }
            }
        }
        let weights = CaseWeights::new(
            channel.transmittance_a(),
            channel.transmittance_b(),
            &detector,
            extended,
        );
        Ok(Self {
            channel,
            detector,
            extended,
            weights,
        })
    }

    pub fn channel(&self) -> &ChannelParams {
        &self.channel
    }

    pub fn detector(&self) -> &DetectorParams {
        &self.detector
    }

    pub fn extended(&self) -> bool {
        self.extended
    }

    pub fn case_weights(&self) -> CaseWeights {
        self.weights
    }

    pub fn sample<R: Rng + ?Sized>(&self, alice: &PureState, bob: &PureState, rng: &mut R) -> BsmSample {
        sample_with_weights(&self.weights, alice, bob, rng)
    }

    /// Same as [`sample`](Self::sample) with explicit arrival probabilities,
    /// for slots where a party sent zero or several photons.
    pub fn sample_with_transmittance<R: Rng + ?Sized>(
        &self,
        alice: &PureState,
        bob: &PureState,
        t_a: f64,
        t_b: f64,
        rng: &mut R,
    ) -> BsmSample {
        let w = CaseWeights::new(t_a, t_b, &self.detector, self.extended);
        sample_with_weights(&w, alice, bob, rng)
    }
}

fn sample_with_weights<R: Rng + ?Sized>(w: &CaseWeights, alice: &PureState, bob: &PureState, rng: &mut R) -> BsmSample {
    let u: f64 = rng.gen();
    let cause = if u < w.both_photons {
        let outcome = sample_bsm_ideal(alice, bob, rng);
        return BsmSample {
            outcome,
            cause: EventCause::BothPhotons,
        };
    } else if u < w.both_photons + w.photon_dark {
        EventCause::PhotonDark
    } else if u < w.total() {
        EventCause::DarkDark
    } else {
        return BsmSample {
            outcome: BsmOutcome::Failure,
            cause: EventCause::Failure,
        };
    };
    let outcome = if rng.gen::<bool>() {
        BsmOutcome::PsiPlus
    } else {
        BsmOutcome::PsiMinus
    };
    BsmSample { outcome, cause }
}
