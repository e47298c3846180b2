//! Exact single-qubit and two-qubit algebra for the coin-tossing states.
//!
//! Everything here is a pure function over small fixed-size complex arrays.
//! The polarization basis is `{H, V}`; two-photon states are ordered with
//! Alice's photon first and Bob's second, so `|HV⟩` means Alice `H`, Bob `V`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

pub type C64 = Complex64;

/// Tolerance for algebraic identities (normalization, Hermiticity, trace).
pub const EXACT_TOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// The coefficient `y` of the four honest states, strictly inside `(1/2, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ProtocolParams {
    y: f64,
}

impl ProtocolParams {
    pub fn new(y: f64) -> Result<Self> {
        if y.is_finite() && y > 0.5 && y < 1.0 {
            Ok(Self { y })
        } else {
            Err(param(format!("y must lie in (1/2, 1), got {y}")))
        }
    }

    pub fn y(self) -> f64 {
        self.y
    }

    /// `sqrt(y(1-y))`, the overlap scale that shows up in every closed form.
    pub fn overlap(self) -> f64 {
        (self.y * (1.0 - self.y)).sqrt()
    }
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self { y: 0.9 }
    }
}

impl TryFrom<f64> for ProtocolParams {
    type Error = Error;
    fn try_from(y: f64) -> Result<Self> {
        Self::new(y)
    }
}

impl From<ProtocolParams> for f64 {
    fn from(p: ProtocolParams) -> f64 {
        p.y
    }
}

/// Classical label `(basis, bit)` of one of the four honest states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateLabel {
    pub basis: u8,
    pub bit: u8,
}

impl StateLabel {
    /// All four labels in table order: `φ00, φ01, φ10, φ11`.
    pub const ALL: [StateLabel; 4] = [
        StateLabel { basis: 0, bit: 0 },
        StateLabel { basis: 0, bit: 1 },
        StateLabel { basis: 1, bit: 0 },
        StateLabel { basis: 1, bit: 1 },
    ];

    pub fn new(basis: u8, bit: u8) -> Result<Self> {
        if basis > 1 || bit > 1 {
            return Err(param(format!("label entries must be bits, got ({basis}, {bit})")));
        }
        Ok(Self { basis, bit })
    }

    /// Position of this label in [`StateLabel::ALL`].
    pub fn index(self) -> usize {
        (self.basis as usize) * 2 + self.bit as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i & 3]
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "φ{}{}", self.basis, self.bit)
    }
}

/// Output of the Bell-state-measurement box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BsmOutcome {
    PsiPlus,
    PsiMinus,
    Failure,
}

impl BsmOutcome {
    /// The two announceable outcomes, in table-panel order.
    pub const BELL: [BsmOutcome; 2] = [BsmOutcome::PsiPlus, BsmOutcome::PsiMinus];

    pub fn is_success(self) -> bool {
        self != BsmOutcome::Failure
    }
}

impl fmt::Display for BsmOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BsmOutcome::PsiPlus => "Ψ+",
            BsmOutcome::PsiMinus => "Ψ-",
            BsmOutcome::Failure => "failure",
        })
    }
}

/// A normalized polarization qubit `a_H|H⟩ + a_V|V⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureState {
    amp_h: C64,
    amp_v: C64,
}

impl PureState {
    pub fn new(amp_h: C64, amp_v: C64) -> Result<Self> {
        let norm = amp_h.norm_sqr() + amp_v.norm_sqr();
        if !norm.is_finite() || (norm - 1.0).abs() > EXACT_TOL {
            return Err(Error::Precondition(format!(
                "state is not normalized (|a_H|²+|a_V|² = {norm})"
            )));
        }
        Ok(Self { amp_h, amp_v })
    }

    pub fn real(amp_h: f64, amp_v: f64) -> Result<Self> {
        Self::new(C64::new(amp_h, 0.0), C64::new(amp_v, 0.0))
    }

    /// Rescales arbitrary non-zero amplitudes to unit norm.
    pub fn normalized(amp_h: C64, amp_v: C64) -> Result<Self> {
        let norm = (amp_h.norm_sqr() + amp_v.norm_sqr()).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Precondition("cannot normalize a zero vector".into()));
        }
        Ok(Self {
            amp_h: amp_h / norm,
            amp_v: amp_v / norm,
        })
    }

    pub fn horizontal() -> Self {
        Self {
            amp_h: ONE,
            amp_v: ZERO,
        }
    }

    pub fn vertical() -> Self {
        Self {
            amp_h: ZERO,
            amp_v: ONE,
        }
    }

    /// `|+⟩ = (|H⟩ + |V⟩)/√2`.
    pub fn plus() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            amp_h: C64::new(r, 0.0),
            amp_v: C64::new(r, 0.0),
        }
    }

    /// `|−⟩ = (|H⟩ − |V⟩)/√2`.
    pub fn minus() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            amp_h: C64::new(r, 0.0),
            amp_v: C64::new(-r, 0.0),
        }
    }

    /// Point on the Bloch sphere at polar angle `theta` and azimuth `phi`.
    pub fn bloch(theta: f64, phi: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        Self {
            amp_h: C64::new(c, 0.0),
            amp_v: C64::from_polar(s, phi),
        }
    }

    pub fn amp_h(&self) -> C64 {
        self.amp_h
    }

    pub fn amp_v(&self) -> C64 {
        self.amp_v
    }

    /// The state orthogonal to this one (fixed phase convention).
    pub fn orthogonal(&self) -> Self {
        Self {
            amp_h: -self.amp_v.conj(),
            amp_v: self.amp_h.conj(),
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amp_h.conj() * other.amp_h + self.amp_v.conj() * other.amp_v
    }

    /// Born-rule probability `|⟨self|other⟩|²`.
    pub fn overlap(&self, other: &PureState) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp_h.norm_sqr() + self.amp_v.norm_sqr()
    }

    pub fn is_real(&self) -> bool {
        self.amp_h.im.abs() <= EXACT_TOL && self.amp_v.im.abs() <= EXACT_TOL
    }

    pub fn projector(&self) -> DensityMatrix {
        let a = [self.amp_h, self.amp_v];
        let mut m = [[ZERO; 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i] * a[j].conj();
            }
        }
        DensityMatrix { m }
    }
}

/// One of the four honest states:
/// `|φ_{α,0}⟩ = √y|H⟩ + (−1)^α √(1−y)|V⟩`, `|φ_{α,1}⟩ = √(1−y)|H⟩ − (−1)^α √y|V⟩`.
pub fn atvy_state(label: StateLabel, params: ProtocolParams) -> PureState {
    let y = params.y();
    let sign = if label.basis == 0 { 1.0 } else { -1.0 };
    let (h, v) = if label.bit == 0 {
        (y.sqrt(), sign * (1.0 - y).sqrt())
    } else {
        ((1.0 - y).sqrt(), -sign * y.sqrt())
    };
    PureState {
        amp_h: C64::new(h, 0.0),
        amp_v: C64::new(v, 0.0),
    }
}

/// The four honest states in [`StateLabel::ALL`] order.
pub fn honest_states(params: ProtocolParams) -> [PureState; 4] {
    StateLabel::ALL.map(|l| atvy_state(l, params))
}

/// A 2×2 density operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    m: [[C64; 2]; 2],
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positive semidefiniteness.
    pub fn new(m: [[C64; 2]; 2]) -> Result<Self> {
        let rho = Self { m };
        rho.validate()?;
        Ok(rho)
    }

    pub fn maximally_mixed() -> Self {
        Self {
            m: [[C64::new(0.5, 0.0), ZERO], [ZERO, C64::new(0.5, 0.0)]],
        }
    }

    /// Convex combination `Σ w_i ρ_i`. Weights must be non-negative and sum to one.
    pub fn mixture(parts: &[(f64, DensityMatrix)]) -> Result<Self> {
        let total: f64 = parts.iter().map(|(w, _)| *w).sum();
        if parts.iter().any(|(w, _)| !(*w >= 0.0)) || (total - 1.0).abs() > EXACT_TOL {
            return Err(Error::Precondition(format!(
                "mixture weights must be non-negative and sum to 1, got {total}"
            )));
        }
        let mut m = [[ZERO; 2]; 2];
        for (w, rho) in parts {
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] += rho.m[i][j] * *w;
                }
            }
        }
        Ok(Self { m })
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.m[i][j]
    }

    pub fn entries(&self) -> [[C64; 2]; 2] {
        self.m
    }

    pub fn trace(&self) -> f64 {
        (self.m[0][0] + self.m[1][1]).re
    }

    pub fn eigenvalues(&self) -> [f64; 2] {
        Hermitian2::from_matrix(&self.m).eigenvalues()
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.m;
        let herm = (m[0][1] - m[1][0].conj()).norm() + m[0][0].im.abs() + m[1][1].im.abs();
        if !(herm <= EXACT_TOL) {
            return Err(Error::Precondition("density matrix is not Hermitian".into()));
        }
        if (self.trace() - 1.0).abs() > EXACT_TOL {
            return Err(Error::Precondition(format!(
                "density matrix trace is {}, expected 1",
                self.trace()
            )));
        }
        let [lo, _] = self.eigenvalues();
        if lo < -EXACT_TOL {
            return Err(Error::Precondition(format!(
                "density matrix has negative eigenvalue {lo}"
            )));
        }
        Ok(())
    }

    /// Maximum entrywise distance, for comparing against reference matrices.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((self.m[i][j] - other.m[i][j]).norm());
            }
        }
        worst
    }
}

/// Hermitian 2×2 operator `[[a, b], [b*, d]]` with real `a`, `d`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Hermitian2 {
    a: f64,
    b: C64,
    d: f64,
}

impl Hermitian2 {
    fn from_matrix(m: &[[C64; 2]; 2]) -> Self {
        Self {
            a: m[0][0].re,
            b: (m[0][1] + m[1][0].conj()) * 0.5,
            d: m[1][1].re,
        }
    }

    /// `w0·ρ0 − w1·ρ1`.
    fn weighted_difference(w0: f64, rho0: &DensityMatrix, w1: f64, rho1: &DensityMatrix) -> Self {
        let mut m = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = rho0.m[i][j] * w0 - rho1.m[i][j] * w1;
            }
        }
        Self::from_matrix(&m)
    }

    /// Ascending eigenvalues.
    fn eigenvalues(&self) -> [f64; 2] {
        let mean = 0.5 * (self.a + self.d);
        let half_gap = (0.25 * (self.a - self.d).powi(2) + self.b.norm_sqr()).sqrt();
        [mean - half_gap, mean + half_gap]
    }

    /// Eigenpairs, ascending by eigenvalue.
    fn eigen(&self) -> [(f64, PureState); 2] {
        let [lo, hi] = self.eigenvalues();
        if self.b.norm() <= f64::EPSILON * (self.a.abs() + self.d.abs()).max(1.0) {
            // Already diagonal.
            let (h, v) = (PureState::horizontal(), PureState::vertical());
            return if self.a <= self.d {
                [(self.a, h), (self.d, v)]
            } else {
                [(self.d, v), (self.a, h)]
            };
        }
        // (A − λ)x = 0 with first row (a − λ, b): x = (b, λ − a).
        let top = PureState::normalized(self.b, C64::new(hi - self.a, 0.0)).expect("non-degenerate off-diagonal");
        [(lo, top.orthogonal()), (hi, top)]
    }
}

/// Two-photon pure state over `{HH, HV, VH, VV}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitState {
    amps: [C64; 4],
}

impl TwoQubitState {
    pub fn new(amps: [C64; 4]) -> Result<Self> {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > EXACT_TOL {
            return Err(Error::Precondition(format!(
                "two-qubit state is not normalized (norm² = {norm})"
            )));
        }
        Ok(Self { amps })
    }

    pub fn product(alice: &PureState, bob: &PureState) -> Self {
        let (a, b) = ([alice.amp_h, alice.amp_v], [bob.amp_h, bob.amp_v]);
        Self {
            amps: [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]],
        }
    }

    pub fn amps(&self) -> [C64; 4] {
        self.amps
    }

    /// Probabilities of the four Bell projections.
    pub fn bell_probabilities(&self) -> BellBasisProbs {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let [hh, hv, vh, vv] = self.amps;
        BellBasisProbs {
            psi_plus: ((hv + vh) * r).norm_sqr(),
            psi_minus: ((hv - vh) * r).norm_sqr(),
            phi_plus: ((hh + vv) * r).norm_sqr(),
            phi_minus: ((hh - vv) * r).norm_sqr(),
        }
    }
}

/// Projection probabilities onto the whole Bell basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellBasisProbs {
    pub psi_plus: f64,
    pub psi_minus: f64,
    pub phi_plus: f64,
    pub phi_minus: f64,
}

impl BellBasisProbs {
    pub fn total(&self) -> f64 {
        self.psi_plus + self.psi_minus + self.phi_plus + self.phi_minus
    }
}

/// Probabilities of the two outcomes a linear-optics analyser can announce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellProbs {
    pub plus: f64,
    pub minus: f64,
}

impl BellProbs {
    pub fn success(&self) -> f64 {
        self.plus + self.minus
    }

    pub fn of(&self, outcome: BsmOutcome) -> f64 {
        match outcome {
            BsmOutcome::PsiPlus => self.plus,
            BsmOutcome::PsiMinus => self.minus,
            BsmOutcome::Failure => 1.0 - self.success(),
        }
    }

    /// Renormalized to the announced outcomes only.
    pub fn conditioned_on_success(&self) -> BellProbs {
        let s = self.success();
        BellProbs {
            plus: self.plus / s,
            minus: self.minus / s,
        }
    }
}

/// `|⟨Ψ±|A⊗B⟩|²` with `|Ψ±⟩ = (|HV⟩ ± |VH⟩)/√2`.
pub fn bell_projection_probs(alice: &PureState, bob: &PureState) -> Result<BellProbs> {
    for (who, s) in [("first", alice), ("second", bob)] {
        if (s.norm_sqr() - 1.0).abs() > EXACT_TOL {
            return Err(Error::Precondition(format!("{who} input state is not normalized")));
        }
    }
    let p = TwoQubitState::product(alice, bob).bell_probabilities();
    Ok(BellProbs {
        plus: p.psi_plus,
        minus: p.psi_minus,
    })
}

/// Structural zero set of the verification table.
///
/// `Ψ+` vanishes when Bob holds the other-basis state carrying the same bit,
/// `Ψ−` vanishes when both photons carry the same label.
pub fn is_zero_cell(outcome: BsmOutcome, alice: StateLabel, bob: StateLabel) -> bool {
    match outcome {
        BsmOutcome::PsiPlus => bob.basis != alice.basis && bob.bit == alice.bit,
        BsmOutcome::PsiMinus => bob == alice,
        BsmOutcome::Failure => false,
    }
}

/// Bell-outcome probabilities for every pair of honest labels at a fixed `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationTable {
    params: ProtocolParams,
    // [outcome][alice][bob]
    cells: [[[f64; 4]; 4]; 2],
}

impl VerificationTable {
    pub fn params(&self) -> ProtocolParams {
        self.params
    }

    pub fn probability(&self, outcome: BsmOutcome, alice: StateLabel, bob: StateLabel) -> f64 {
        match outcome {
            BsmOutcome::PsiPlus => self.cells[0][alice.index()][bob.index()],
            BsmOutcome::PsiMinus => self.cells[1][alice.index()][bob.index()],
            BsmOutcome::Failure => {
                1.0 - self.cells[0][alice.index()][bob.index()] - self.cells[1][alice.index()][bob.index()]
            }
        }
    }

    pub fn is_zero_cell(&self, outcome: BsmOutcome, alice: StateLabel, bob: StateLabel) -> bool {
        is_zero_cell(outcome, alice, bob)
    }

    /// One panel as `[alice][bob]`.
    pub fn panel(&self, outcome: BsmOutcome) -> [[f64; 4]; 4] {
        match outcome {
            BsmOutcome::PsiPlus => self.cells[0],
            BsmOutcome::PsiMinus => self.cells[1],
            BsmOutcome::Failure => {
                let mut out = [[0.0; 4]; 4];
                for (i, row) in out.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = 1.0 - self.cells[0][i][j] - self.cells[1][i][j];
                    }
                }
                out
            }
        }
    }
}

pub fn verification_table(params: ProtocolParams) -> VerificationTable {
    let states = honest_states(params);
    let mut cells = [[[0.0; 4]; 4]; 2];
    for (i, a) in states.iter().enumerate() {
        for (j, b) in states.iter().enumerate() {
            let p = TwoQubitState::product(a, b).bell_probabilities();
            cells[0][i][j] = p.psi_plus;
            cells[1][i][j] = p.psi_minus;
        }
    }
    VerificationTable { params, cells }
}

/// Equal mixture of the two basis states that commit to `bit`.
pub fn commitment_density(bit: u8, params: ProtocolParams) -> Result<DensityMatrix> {
    if bit > 1 {
        return Err(param(format!("committed bit must be 0 or 1, got {bit}")));
    }
    let a = atvy_state(StateLabel { basis: 0, bit }, params).projector();
    let b = atvy_state(StateLabel { basis: 1, bit }, params).projector();
    DensityMatrix::mixture(&[(0.5, a), (0.5, b)])
}

/// `½ Tr|ρ − σ|`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    rho.validate()?;
    sigma.validate()?;
    let diff = Hermitian2::weighted_difference(1.0, rho, 1.0, sigma);
    let [lo, hi] = diff.eigenvalues();
    Ok((0.5 * (lo.abs() + hi.abs())).min(1.0))
}

/// Optimal (Helstrom) measurement separating `ρ0` from `ρ1`.
#[derive(Debug, Clone, Copy)]
pub struct HelstromMeasurement {
    basis: [PureState; 2],
    guess_zero: [bool; 2],
    success: f64,
}

impl HelstromMeasurement {
    pub fn new(rho0: &DensityMatrix, rho1: &DensityMatrix, prior0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&prior0) {
            return Err(Error::Precondition(format!("prior must be in [0, 1], got {prior0}")));
        }
        rho0.validate()?;
        rho1.validate()?;
        let prior1 = 1.0 - prior0;
        let gamma = Hermitian2::weighted_difference(prior0, rho0, prior1, rho1);
        let eig = gamma.eigen();
        let positive: f64 = eig.iter().map(|(l, _)| l.max(0.0)).sum();
        Ok(Self {
            basis: [eig[0].1, eig[1].1],
            guess_zero: [eig[0].0 > 0.0, eig[1].0 > 0.0],
            success: (prior1 + positive).min(1.0),
        })
    }

    /// Optimal guessing probability.
    pub fn success(&self) -> f64 {
        self.success
    }

    /// Measurement basis; outcome `k` maps to guess 0 iff `guesses_zero(k)`.
    pub fn basis(&self) -> [PureState; 2] {
        self.basis
    }

    pub fn guesses_zero(&self, k: usize) -> bool {
        self.guess_zero[k]
    }

    /// Probability that measuring `state` yields the guess 0.
    pub fn prob_guess_zero(&self, state: &PureState) -> f64 {
        self.basis
            .iter()
            .zip(self.guess_zero)
            .filter(|(_, g)| *g)
            .map(|(e, _)| e.overlap(state))
            .sum()
    }
}

/// Optimal two-state guessing probability with prior `prior0` on `ρ0`.
pub fn helstrom_probability(rho0: &DensityMatrix, rho1: &DensityMatrix, prior0: f64) -> Result<f64> {
    Ok(HelstromMeasurement::new(rho0, rho1, prior0)?.success())
}

/// Success of a projective measurement `{|e0⟩, |e1⟩}` that guesses, per
/// outcome, whichever candidate is most likely.
pub fn projective_guessing_probability(basis: [PureState; 2], states: &[PureState], priors: &[f64]) -> f64 {
    basis
        .iter()
        .map(|e| {
            states
                .iter()
                .zip(priors)
                .map(|(s, p)| p * e.overlap(s))
                .fold(0.0_f64, f64::max)
        })
        .sum()
}

/// Minimum-error guessing for the uniform four-state honest ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FourStateGuess {
    /// Best projective measurement found on the 1° Bloch grid.
    pub grid_optimum: f64,
    /// `¼ · Σ Tr(E_i) · λmax(ρ_i) = ½`, valid for any POVM.
    pub analytic_bound: f64,
}

/// Grid search over projective measurements (1° steps in both Bloch angles)
/// together with the POVM upper bound.
pub fn four_state_guessing_probability(params: ProtocolParams) -> FourStateGuess {
    let states = honest_states(params);
    let priors = [0.25; 4];
    let mut best: f64 = 0.0;
    for t in 0..=180 {
        let theta = (t as f64).to_radians();
        for p in 0..360 {
            let phi = (p as f64).to_radians();
            let e = PureState::bloch(theta, phi);
            best = best.max(projective_guessing_probability([e, e.orthogonal()], &states, &priors));
        }
    }
    // Pure states have λmax = 1 and Σ Tr(E_i) = Tr(I) = 2.
    let lambda_max = states
        .iter()
        .map(|s| s.projector().eigenvalues()[1])
        .fold(0.0_f64, f64::max);
    FourStateGuess {
        grid_optimum: best,
        analytic_bound: 0.25 * 2.0 * lambda_max,
    }
}
