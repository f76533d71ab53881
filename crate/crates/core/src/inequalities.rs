//! Slack-reporting checkers for entropy inequalities, and a fuzz driver.
//!
//! Every checker returns a [`CheckResult`] with `slack = rhs − lhs`; the
//! inequality holds when the slack is non-negative. `pass` compares the
//! slack against a signed threshold (default `-1e-9`), so a positive
//! threshold turns near-equalities into failures.
//!
//! [`run_fuzz`] draws one RNG stream per `(inequality, trial)` pair. Trials
//! are evaluated in parallel and aggregated in trial order, so reports are
//! identical for any worker count.

use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{self, Channel, QuantumChannel};
use crate::entropy::{self, EntropyValue};
use crate::error::{Error, Result};
use crate::json::{self, ext_real, StateDoc};
use crate::linalg::DimSignature;
use crate::qstate::{self, Decomposition, DensityOperator, Ensemble, PureEnsemble, RngStream};

pub const DEFAULT_THRESHOLD: f64 = -1e-9;
/// Lowest-slack trials kept as witnesses per inequality per campaign.
pub const WITNESS_KEEP: usize = 10;
/// Slacks this close to zero are re-evaluated with a finer eigenvalue cutoff.
pub const EQUALITY_BAND: f64 = 1e-9;
/// Largest change allowed for a near-equality under the finer cutoff.
pub const EQUALITY_DRIFT: f64 = 1e-6;

/// One side-by-side comparison inside a check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlackComponent {
    pub label: String,
    #[serde(with = "ext_real")]
    pub lhs: f64,
    #[serde(with = "ext_real")]
    pub rhs: f64,
    #[serde(with = "ext_real")]
    pub slack: f64,
    #[serde(with = "ext_real")]
    pub threshold: f64,
    pub pass: bool,
}

impl SlackComponent {
    /// Extended-real comparison: `rhs = +∞` always passes, `lhs = +∞`
    /// against a finite `rhs` always fails.
    pub fn new(label: impl Into<String>, lhs: f64, rhs: f64, threshold: f64) -> Self {
        let (slack, pass) = if rhs == f64::INFINITY {
            (f64::INFINITY, true)
        } else if lhs == f64::INFINITY {
            (f64::NEG_INFINITY, false)
        } else {
            let slack = rhs - lhs;
            (slack, slack >= threshold)
        };
        Self { label: label.into(), lhs, rhs, slack, threshold, pass }
    }
}

/// Outcome of one inequality instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    #[serde(with = "ext_real")]
    pub lhs: f64,
    #[serde(with = "ext_real")]
    pub rhs: f64,
    #[serde(with = "ext_real")]
    pub slack: f64,
    #[serde(with = "ext_real")]
    pub threshold: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<SlackComponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<serde_json::Value>,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, threshold: f64) -> Self {
        let main = SlackComponent::new(name, lhs, rhs, threshold);
        Self {
            name: main.label,
            lhs: main.lhs,
            rhs: main.rhs,
            slack: main.slack,
            threshold: main.threshold,
            pass: main.pass,
            components: Vec::new(),
            witness: None,
        }
    }

    /// Adds a sub-check; the result passes only if every component passes.
    pub fn with_component(mut self, c: SlackComponent) -> Self {
        self.pass &= c.pass;
        self.components.push(c);
        self
    }

    pub fn with_witness(mut self, witness: serde_json::Value) -> Self {
        self.witness = Some(witness);
        self
    }
}

/// The inequalities exercised by the fuzz driver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Inequality {
    MonotonicityCptp,
    MonotonicityPartialTrace,
    StrongSubadditivityI,
    StrongSubadditivityII,
    JointConvexity,
    ConcavityConditional,
    StrongConcavity,
    PurificationDecomposition,
}

impl Inequality {
    pub const ALL: [Inequality; 8] = [
        Inequality::MonotonicityCptp,
        Inequality::MonotonicityPartialTrace,
        Inequality::StrongSubadditivityI,
        Inequality::StrongSubadditivityII,
        Inequality::JointConvexity,
        Inequality::ConcavityConditional,
        Inequality::StrongConcavity,
        Inequality::PurificationDecomposition,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Inequality::MonotonicityCptp => "monotonicity-cptp",
            Inequality::MonotonicityPartialTrace => "monotonicity-partial-trace",
            Inequality::StrongSubadditivityI => "strong-subadditivity-i",
            Inequality::StrongSubadditivityII => "strong-subadditivity-ii",
            Inequality::JointConvexity => "joint-convexity",
            Inequality::ConcavityConditional => "concavity-conditional-entropy",
            Inequality::StrongConcavity => "strong-concavity",
            Inequality::PurificationDecomposition => "purification-decomposition",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|i| i.label() == label)
    }

    fn index(self) -> u64 {
        Self::ALL.iter().position(|&i| i == self).expect("listed") as u64
    }
}

impl std::fmt::Display for Inequality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Entropy evaluation with a configurable zero-eigenvalue cutoff.
#[derive(Clone, Copy, Debug)]
struct Eval {
    cutoff: f64,
}

impl Eval {
    const DEFAULT: Eval = Eval { cutoff: entropy::ZERO_EIGENVALUE };
    /// Squared cutoff used to re-check near-equalities.
    const FINE: Eval = Eval { cutoff: entropy::ZERO_EIGENVALUE * entropy::ZERO_EIGENVALUE };

    fn s(&self, rho: &DensityOperator) -> f64 {
        entropy::von_neumann_with_cutoff(rho, self.cutoff)
    }

    fn rel(&self, rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
        let v: EntropyValue = entropy::relative_entropy_with_cutoff(rho, sigma, self.cutoff)?;
        Ok(v.value)
    }
}

fn require_parts(rho: &DensityOperator, parts: usize, what: &str) -> Result<()> {
    if rho.sig().len() != parts {
        return Err(Error::InvalidSignature(format!(
            "{what} needs a {parts}-partite state, got {:?}",
            rho.sig().dims()
        )));
    }
    Ok(())
}

/// `S(Φρ‖Φσ) ≤ S(ρ‖σ)`.
pub fn check_monotonicity_cptp<C: QuantumChannel + ?Sized>(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    ch: &C,
    threshold: f64,
) -> Result<CheckResult> {
    monotonicity_cptp(Eval::DEFAULT, rho, sigma, ch, threshold)
}

fn monotonicity_cptp<C: QuantumChannel + ?Sized>(
    ev: Eval,
    rho: &DensityOperator,
    sigma: &DensityOperator,
    ch: &C,
    threshold: f64,
) -> Result<CheckResult> {
    let rhs = ev.rel(rho, sigma)?;
    let lhs = ev.rel(&ch.apply(rho)?, &ch.apply(sigma)?)?;
    Ok(CheckResult::new(Inequality::MonotonicityCptp.label(), lhs, rhs, threshold))
}

/// `S(ρ_A‖σ_A) ≤ S(ρ_AC‖σ_AC)` for bipartite `[A, C]` states.
pub fn check_monotonicity_partial_trace(
    rho_ac: &DensityOperator,
    sigma_ac: &DensityOperator,
    threshold: f64,
) -> Result<CheckResult> {
    monotonicity_partial_trace(Eval::DEFAULT, rho_ac, sigma_ac, threshold)
}

fn monotonicity_partial_trace(
    ev: Eval,
    rho_ac: &DensityOperator,
    sigma_ac: &DensityOperator,
    threshold: f64,
) -> Result<CheckResult> {
    require_parts(rho_ac, 2, "partial-trace monotonicity")?;
    if rho_ac.sig() != sigma_ac.sig() {
        return Err(Error::InvalidSignature("states differ in signature".into()));
    }
    let rhs = ev.rel(rho_ac, sigma_ac)?;
    let lhs = ev.rel(&rho_ac.reduce(&[0])?, &sigma_ac.reduce(&[0])?)?;
    Ok(CheckResult::new(Inequality::MonotonicityPartialTrace.label(), lhs, rhs, threshold))
}

/// `S(ρ_A) + S(ρ_B) ≤ S(ρ_AC) + S(ρ_BC)` for `[A, B, C]` states.
pub fn check_ssa_i(rho_abc: &DensityOperator, threshold: f64) -> Result<CheckResult> {
    ssa_i(Eval::DEFAULT, rho_abc, threshold)
}

fn ssa_i(ev: Eval, rho: &DensityOperator, threshold: f64) -> Result<CheckResult> {
    require_parts(rho, 3, "strong subadditivity")?;
    let lhs = ev.s(&rho.reduce(&[0])?) + ev.s(&rho.reduce(&[1])?);
    let rhs = ev.s(&rho.reduce(&[0, 2])?) + ev.s(&rho.reduce(&[1, 2])?);
    Ok(CheckResult::new(Inequality::StrongSubadditivityI.label(), lhs, rhs, threshold))
}

/// `S(ρ_ABC) + S(ρ_B) ≤ S(ρ_AB) + S(ρ_BC)` for `[A, B, C]` states.
pub fn check_ssa_ii(rho_abc: &DensityOperator, threshold: f64) -> Result<CheckResult> {
    ssa_ii(Eval::DEFAULT, rho_abc, threshold)
}

fn ssa_ii(ev: Eval, rho: &DensityOperator, threshold: f64) -> Result<CheckResult> {
    require_parts(rho, 3, "strong subadditivity")?;
    let lhs = ev.s(rho) + ev.s(&rho.reduce(&[1])?);
    let rhs = ev.s(&rho.reduce(&[0, 1])?) + ev.s(&rho.reduce(&[1, 2])?);
    Ok(CheckResult::new(Inequality::StrongSubadditivityII.label(), lhs, rhs, threshold))
}

/// `S(Σ p ρⁱ ‖ Σ p σⁱ) ≤ Σ pᵢ S(ρⁱ‖σⁱ)`; both ensembles share their weights.
pub fn check_joint_convexity(
    ens_rho: &Ensemble,
    ens_sigma: &Ensemble,
    threshold: f64,
) -> Result<CheckResult> {
    joint_convexity(Eval::DEFAULT, ens_rho, ens_sigma, threshold)
}

fn joint_convexity(
    ev: Eval,
    ens_rho: &Ensemble,
    ens_sigma: &Ensemble,
    threshold: f64,
) -> Result<CheckResult> {
    if ens_rho.len() != ens_sigma.len() {
        return Err(Error::DimensionMismatch { expected: ens_rho.len(), found: ens_sigma.len() });
    }
    if ens_rho.probs().iter().zip(ens_sigma.probs()).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(Error::InvalidParameter("ensembles must share their probabilities".into()));
    }
    let mut rhs = 0.0;
    for ((p, r), s) in ens_rho.iter().zip(ens_sigma.states()) {
        if p > 0.0 {
            rhs += p * ev.rel(r, s)?;
        }
    }
    let lhs = ev.rel(&ens_rho.average(), &ens_sigma.average())?;
    Ok(CheckResult::new(Inequality::JointConvexity.label(), lhs, rhs, threshold))
}

/// `Σ pᵢ [S(ρ_ABⁱ) − S(ρ_Bⁱ)] ≤ S(ρ_AB) − S(ρ_B)` for an ensemble of `[A, B]` states.
pub fn check_concavity_conditional(ens: &Ensemble, threshold: f64) -> Result<CheckResult> {
    concavity_conditional(Eval::DEFAULT, ens, threshold)
}

fn concavity_conditional(ev: Eval, ens: &Ensemble, threshold: f64) -> Result<CheckResult> {
    require_parts(&ens.states()[0], 2, "conditional-entropy concavity")?;
    let cond = |rho: &DensityOperator| -> Result<f64> { Ok(ev.s(rho) - ev.s(&rho.reduce(&[1])?)) };
    let mut lhs = 0.0;
    for (p, rho) in ens.iter() {
        lhs += p * cond(rho)?;
    }
    let rhs = cond(&ens.average())?;
    Ok(CheckResult::new(Inequality::ConcavityConditional.label(), lhs, rhs, threshold))
}

/// `max{Σ pᵢ S(ρ_Aⁱ) + S(ρ_B), Σ pᵢ S(ρ_Bⁱ) + S(ρ_A)} ≤ S(Σ pᵢ ρ_Aⁱ ⊗ ρ_Bⁱ)`.
///
/// Both one-sided forms are reported as components.
pub fn check_strong_concavity(
    probs: &[f64],
    rhos_a: &[DensityOperator],
    rhos_b: &[DensityOperator],
    threshold: f64,
) -> Result<CheckResult> {
    strong_concavity(Eval::DEFAULT, probs, rhos_a, rhos_b, threshold)
}

fn strong_concavity(
    ev: Eval,
    probs: &[f64],
    rhos_a: &[DensityOperator],
    rhos_b: &[DensityOperator],
    threshold: f64,
) -> Result<CheckResult> {
    if rhos_a.len() != rhos_b.len() {
        return Err(Error::DimensionMismatch { expected: rhos_a.len(), found: rhos_b.len() });
    }
    let ens_a = Ensemble::new(probs.to_vec(), rhos_a.to_vec())?;
    let ens_b = Ensemble::new(probs.to_vec(), rhos_b.to_vec())?;
    let products: Vec<DensityOperator> =
        rhos_a.iter().zip(rhos_b).map(|(a, b)| a.tensor(b)).collect();
    let joint = DensityOperator::mix(probs, &products)?;

    let avg = |ens: &Ensemble| ens.iter().map(|(p, r)| p * ev.s(r)).sum::<f64>();
    let rhs = ev.s(&joint);
    let keep_a = avg(&ens_a) + ev.s(&ens_b.average());
    let keep_b = avg(&ens_b) + ev.s(&ens_a.average());
    Ok(CheckResult::new(Inequality::StrongConcavity.label(), keep_a.max(keep_b), rhs, threshold)
        .with_component(SlackComponent::new("average-a-plus-mixed-b", keep_a, rhs, threshold))
        .with_component(SlackComponent::new("average-b-plus-mixed-a", keep_b, rhs, threshold)))
}

/// `Σ_j q_j S(Φ(ψ_j)) ≤ S((Φ ⊗ I)|Ψ⟩⟨Ψ|)` for a pure decomposition `{q_j, ψ_j}`
/// of `rho` and a purification `|Ψ⟩` of `rho`.
pub fn check_purification_decomposition<C: QuantumChannel + ?Sized>(
    rho: &DensityOperator,
    decomp: &PureEnsemble,
    ch: &C,
    threshold: f64,
) -> Result<CheckResult> {
    purification_decomposition(Eval::DEFAULT, rho, decomp, ch, threshold)
}

fn purification_decomposition<C: QuantumChannel + ?Sized>(
    ev: Eval,
    rho: &DensityOperator,
    decomp: &PureEnsemble,
    ch: &C,
    threshold: f64,
) -> Result<CheckResult> {
    if decomp.dim() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: decomp.dim() });
    }
    let mut lhs = 0.0;
    for (q, psi) in decomp.probs().iter().zip(decomp.states()) {
        lhs += q * ev.s(&ch.apply(&psi.density())?);
    }
    let purification = qstate::purify(rho)?.density();
    let rhs = ev.s(&ch.apply_left(&purification)?);
    Ok(CheckResult::new(Inequality::PurificationDecomposition.label(), lhs, rhs, threshold))
}

/// Fuzz campaign parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FuzzConfig {
    pub seed: u64,
    /// Trials per inequality.
    pub trials: usize,
    /// Trials for the purification-decomposition check.
    pub decomposition_trials: usize,
    /// Allowed subsystem dimensions.
    pub dims: Vec<usize>,
    /// Largest total dimension of a sampled multipartite state.
    pub max_total_dim: usize,
    /// Ensemble sizes are drawn from `1..=max_ensemble`.
    pub max_ensemble: usize,
    #[serde(with = "ext_real")]
    pub threshold: f64,
    pub witness_keep: usize,
    pub inequalities: Vec<Inequality>,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 1000,
            decomposition_trials: 500,
            dims: vec![2, 3, 4],
            max_total_dim: 64,
            max_ensemble: 5,
            threshold: DEFAULT_THRESHOLD,
            witness_keep: WITNESS_KEEP,
            inequalities: Inequality::ALL.to_vec(),
        }
    }
}

impl FuzzConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.iter().any(|&d| d < 1) {
            return Err(Error::InvalidParameter("dims must be a non-empty list of positive sizes".into()));
        }
        let smallest = *self.dims.iter().min().expect("non-empty");
        if smallest.pow(3) > self.max_total_dim {
            return Err(Error::InvalidParameter(format!(
                "tripartite states of dimension {}^3 exceed the total-dimension limit {}",
                smallest, self.max_total_dim
            )));
        }
        if self.max_ensemble == 0 {
            return Err(Error::InvalidParameter("max_ensemble must be at least 1".into()));
        }
        if self.threshold.is_nan() {
            return Err(Error::InvalidParameter("threshold is NaN".into()));
        }
        Ok(())
    }

    fn trials_for(&self, ineq: Inequality) -> usize {
        match ineq {
            Inequality::PurificationDecomposition => self.decomposition_trials,
            _ => self.trials,
        }
    }

    fn pick_dim<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.dims[rng.random_range(0..self.dims.len())]
    }

    /// Subsystem dimensions with total at most `max_total_dim`.
    fn pick_dims<R: Rng + ?Sized>(&self, parts: usize, rng: &mut R) -> Vec<usize> {
        loop {
            let dims: Vec<usize> = (0..parts).map(|_| self.pick_dim(rng)).collect();
            if dims.iter().product::<usize>() <= self.max_total_dim {
                return dims;
            }
        }
    }

    fn stream(&self, ineq: Inequality, trial: usize) -> RngStream {
        RngStream::new(self.seed, (ineq.index() << 32) | trial as u64)
    }
}

/// Sampled inputs for one trial.
#[derive(Clone, Debug)]
enum Instance {
    Cptp { rho: DensityOperator, sigma: DensityOperator, channel: Channel },
    PartialTrace { rho: DensityOperator, sigma: DensityOperator },
    Tripartite { rho: DensityOperator },
    Convexity { rhos: Ensemble, sigmas: Ensemble },
    Conditional { ens: Ensemble },
    StrongConcavity { probs: Vec<f64>, rhos_a: Vec<DensityOperator>, rhos_b: Vec<DensityOperator> },
    Decomposition { rho: DensityOperator, decomp: PureEnsemble, channel: Channel },
}

fn random_state_on<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> DensityOperator {
    let sig = DimSignature::new(dims.to_vec()).expect("positive dims");
    let rank = rng.random_range(1..=sig.total());
    qstate::random_density_sig(&sig, rank, rng).expect("rank in range")
}

fn random_any_channel<R: Rng + ?Sized>(d_in: usize, d_out: usize, rng: &mut R) -> Channel {
    if rng.random_bool(0.25) {
        let k = rng.random_range(1..=4);
        channel::random_mp_channel(d_in, d_out, k, rng).expect("valid dims").into()
    } else {
        let min_k = d_in.div_ceil(d_out);
        let k = rng.random_range(min_k..=min_k + 3);
        channel::random_channel(d_in, d_out, k, rng).expect("valid dims").into()
    }
}

fn sample(ineq: Inequality, cfg: &FuzzConfig, stream: RngStream) -> Instance {
    let mut rng = stream.rng();
    let rng = &mut rng;
    match ineq {
        Inequality::MonotonicityCptp => {
            let d_in = cfg.pick_dim(rng);
            let d_out = cfg.pick_dim(rng);
            let rho = random_state_on(&[d_in], rng);
            // Full-rank σ half the time keeps the right-hand side finite.
            let sigma = if rng.random_bool(0.5) {
                qstate::random_density(d_in, d_in, rng).expect("full rank")
            } else {
                random_state_on(&[d_in], rng)
            };
            let channel = random_any_channel(d_in, d_out, rng);
            Instance::Cptp { rho, sigma, channel }
        }
        Inequality::MonotonicityPartialTrace => {
            let dims = cfg.pick_dims(2, rng);
            let rho = random_state_on(&dims, rng);
            let sigma = if rng.random_bool(0.5) {
                let sig = DimSignature::new(dims.clone()).expect("positive dims");
                qstate::random_density_sig(&sig, sig.total(), rng).expect("full rank")
            } else {
                random_state_on(&dims, rng)
            };
            Instance::PartialTrace { rho, sigma }
        }
        Inequality::StrongSubadditivityI | Inequality::StrongSubadditivityII => {
            let dims = cfg.pick_dims(3, rng);
            Instance::Tripartite { rho: random_state_on(&dims, rng) }
        }
        Inequality::JointConvexity => {
            let d = cfg.pick_dim(rng);
            let k = rng.random_range(1..=cfg.max_ensemble);
            let probs = qstate::random_simplex(k, rng);
            let rhos: Vec<_> = (0..k).map(|_| random_state_on(&[d], rng)).collect();
            // Full-rank σⁱ keep every S(ρⁱ‖σⁱ) finite.
            let sigmas: Vec<_> =
                (0..k).map(|_| qstate::random_density(d, d, rng).expect("full rank")).collect();
            Instance::Convexity {
                rhos: Ensemble::new(probs.clone(), rhos).expect("valid ensemble"),
                sigmas: Ensemble::new(probs, sigmas).expect("valid ensemble"),
            }
        }
        Inequality::ConcavityConditional => {
            let dims = cfg.pick_dims(2, rng);
            let k = rng.random_range(1..=cfg.max_ensemble);
            let probs = qstate::random_simplex(k, rng);
            let states = (0..k).map(|_| random_state_on(&dims, rng)).collect();
            Instance::Conditional { ens: Ensemble::new(probs, states).expect("valid ensemble") }
        }
        Inequality::StrongConcavity => {
            let dims = cfg.pick_dims(2, rng);
            let k = rng.random_range(1..=cfg.max_ensemble);
            let probs = qstate::random_simplex(k, rng);
            let rhos_a = (0..k).map(|_| random_state_on(&dims[..1], rng)).collect();
            let rhos_b = (0..k).map(|_| random_state_on(&dims[1..], rng)).collect();
            Instance::StrongConcavity { probs, rhos_a, rhos_b }
        }
        Inequality::PurificationDecomposition => {
            let small: Vec<usize> = cfg.dims.iter().copied().filter(|&d| d <= 3).collect();
            let pool = if small.is_empty() { vec![*cfg.dims.iter().min().expect("non-empty")] } else { small };
            let d = pool[rng.random_range(0..pool.len())];
            let d_out = pool[rng.random_range(0..pool.len())];
            let rho = random_state_on(&[d], rng);
            let kind = if rng.random_bool(0.2) {
                Decomposition::Eigen
            } else {
                Decomposition::Randomized { members: rng.random_range(1..=cfg.max_ensemble.max(d)) }
            };
            let decomp = qstate::pure_decompositions(&rho, kind, rng).expect("single system");
            let channel = random_any_channel(d, d_out, rng);
            Instance::Decomposition { rho, decomp, channel }
        }
    }
}

fn evaluate(ineq: Inequality, inst: &Instance, ev: Eval, threshold: f64) -> Result<CheckResult> {
    match (ineq, inst) {
        (Inequality::MonotonicityCptp, Instance::Cptp { rho, sigma, channel }) => {
            monotonicity_cptp(ev, rho, sigma, channel, threshold)
        }
        (Inequality::MonotonicityPartialTrace, Instance::PartialTrace { rho, sigma }) => {
            monotonicity_partial_trace(ev, rho, sigma, threshold)
        }
        (Inequality::StrongSubadditivityI, Instance::Tripartite { rho }) => ssa_i(ev, rho, threshold),
        (Inequality::StrongSubadditivityII, Instance::Tripartite { rho }) => ssa_ii(ev, rho, threshold),
        (Inequality::JointConvexity, Instance::Convexity { rhos, sigmas }) => {
            joint_convexity(ev, rhos, sigmas, threshold)
        }
        (Inequality::ConcavityConditional, Instance::Conditional { ens }) => {
            concavity_conditional(ev, ens, threshold)
        }
        (Inequality::StrongConcavity, Instance::StrongConcavity { probs, rhos_a, rhos_b }) => {
            strong_concavity(ev, probs, rhos_a, rhos_b, threshold)
        }
        (Inequality::PurificationDecomposition, Instance::Decomposition { rho, decomp, channel }) => {
            purification_decomposition(ev, rho, decomp, channel, threshold)
        }
        _ => unreachable!("instance sampled for a different inequality"),
    }
}

fn instance_json(inst: &Instance) -> Result<serde_json::Value> {
    use serde_json::{json, to_value};
    let doc = |rho: &DensityOperator| to_value(StateDoc::from(rho));
    Ok(match inst {
        Instance::Cptp { rho, sigma, channel } => {
            json!({ "rho": doc(rho)?, "sigma": doc(sigma)?, "channel": to_value(channel)? })
        }
        Instance::PartialTrace { rho, sigma } => json!({ "rho": doc(rho)?, "sigma": doc(sigma)? }),
        Instance::Tripartite { rho } => json!({ "rho": doc(rho)? }),
        Instance::Convexity { rhos, sigmas } => json!({ "rhos": to_value(rhos)?, "sigmas": to_value(sigmas)? }),
        Instance::Conditional { ens } => json!({ "ensemble": to_value(ens)? }),
        Instance::StrongConcavity { probs, rhos_a, rhos_b } => json!({
            "probs": probs,
            "rhos_a": rhos_a.iter().map(doc).collect::<serde_json::Result<Vec<_>>>()?,
            "rhos_b": rhos_b.iter().map(doc).collect::<serde_json::Result<Vec<_>>>()?,
        }),
        Instance::Decomposition { rho, decomp, channel } => json!({
            "rho": doc(rho)?,
            "decomposition": to_value(decomp)?,
            "channel": to_value(channel)?,
        }),
    })
}

/// Trial index and slack of a retained instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSlack {
    pub trial: usize,
    #[serde(with = "ext_real")]
    pub slack: f64,
    pub pass: bool,
}

/// Aggregate outcome of one inequality's campaign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzReport {
    pub inequality: Inequality,
    pub seed: u64,
    pub trials: usize,
    #[serde(with = "ext_real")]
    pub threshold: f64,
    #[serde(with = "ext_real")]
    pub min_slack: f64,
    /// Mean over trials with a finite slack.
    #[serde(with = "ext_real")]
    pub mean_slack: f64,
    pub failures: usize,
    /// Trials within the equality band that were re-evaluated.
    pub equality_rechecks: usize,
    /// Largest |slack| among the re-evaluated near-equalities.
    #[serde(with = "ext_real")]
    pub max_equality_recheck: f64,
    pub lowest: Vec<TrialSlack>,
    /// Witness files relative to the output directory.
    pub witnesses: Vec<String>,
}

/// Witness document written for retained trials.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Witness {
    pub inequality: Inequality,
    pub seed: u64,
    pub trial: usize,
    pub check: CheckResult,
    pub inputs: serde_json::Value,
}

pub fn report_path(out: &Path, ineq: Inequality, seed: u64) -> PathBuf {
    out.join("reports").join(ineq.label()).join(format!("{seed}.json"))
}

pub fn witness_path(ineq: Inequality, seed: u64, trial: usize) -> PathBuf {
    PathBuf::from("witnesses").join(ineq.label()).join(format!("{seed}-{trial}.json"))
}

/// Runs one inequality's campaign; writes the report and witnesses under
/// `out` when given.
pub fn run_campaign(ineq: Inequality, cfg: &FuzzConfig, out: Option<&Path>) -> Result<FuzzReport> {
    cfg.validate()?;
    let trials = cfg.trials_for(ineq);
    let results: Vec<(CheckResult, Option<f64>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let inst = sample(ineq, cfg, cfg.stream(ineq, t));
            let res = evaluate(ineq, &inst, Eval::DEFAULT, cfg.threshold)?;
            let recheck = if res.slack.abs() <= EQUALITY_BAND {
                Some(evaluate(ineq, &inst, Eval::FINE, cfg.threshold)?.slack.abs())
            } else {
                None
            };
            Ok((res, recheck))
        })
        .collect::<Result<_>>()?;

    let mut min_slack = f64::INFINITY;
    let (mut sum, mut finite) = (0.0, 0usize);
    let mut failures = 0;
    let mut rechecks = 0;
    let mut max_recheck = 0.0f64;
    for (res, recheck) in &results {
        min_slack = min_slack.min(res.slack);
        if res.slack.is_finite() {
            sum += res.slack;
            finite += 1;
        }
        failures += usize::from(!res.pass);
        if let Some(r) = recheck {
            rechecks += 1;
            max_recheck = max_recheck.max(*r);
        }
    }
    let mean_slack = if finite > 0 { sum / finite as f64 } else { f64::INFINITY };

    let mut order: Vec<usize> = (0..trials).collect();
    order.sort_by(|&a, &b| results[a].0.slack.total_cmp(&results[b].0.slack).then(a.cmp(&b)));
    order.truncate(cfg.witness_keep);

    let lowest: Vec<TrialSlack> = order
        .iter()
        .map(|&t| TrialSlack { trial: t, slack: results[t].0.slack, pass: results[t].0.pass })
        .collect();

    let mut witnesses = Vec::new();
    if let Some(out) = out {
        for &t in &order {
            let inst = sample(ineq, cfg, cfg.stream(ineq, t));
            let inputs = instance_json(&inst)?;
            let check = results[t].0.clone().with_witness(inputs.clone());
            let rel = witness_path(ineq, cfg.seed, t);
            json::write_file(&out.join(&rel), &Witness { inequality: ineq, seed: cfg.seed, trial: t, check, inputs })?;
            witnesses.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }

    let report = FuzzReport {
        inequality: ineq,
        seed: cfg.seed,
        trials,
        threshold: cfg.threshold,
        min_slack,
        mean_slack,
        failures,
        equality_rechecks: rechecks,
        max_equality_recheck: max_recheck,
        lowest,
        witnesses,
    };
    if let Some(out) = out {
        json::write_file(&report_path(out, ineq, cfg.seed), &report)?;
    }
    Ok(report)
}

/// Runs every configured campaign in order.
pub fn run_fuzz(cfg: &FuzzConfig, out: Option<&Path>) -> Result<Vec<FuzzReport>> {
    cfg.inequalities.iter().map(|&ineq| run_campaign(ineq, cfg, out)).collect()
}

/// Re-samples a single trial's inputs; used to reproduce a witness.
pub fn reproduce_trial(ineq: Inequality, cfg: &FuzzConfig, trial: usize) -> Result<CheckResult> {
    let inst = sample(ineq, cfg, cfg.stream(ineq, trial));
    Ok(evaluate(ineq, &inst, Eval::DEFAULT, cfg.threshold)?.with_witness(instance_json(&inst)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{depolarizing, random_channel};
    use crate::linalg::{real, CVector};
    use crate::qstate::{random_density, random_density_any_rank, PureState};
    use approx::assert_abs_diff_eq;

    const T: f64 = DEFAULT_THRESHOLD;

    fn rng(stream: u64) -> rand_chacha::ChaCha8Rng {
        RngStream::new(314, stream).rng()
    }

    fn sig(d: &[usize]) -> DimSignature {
        DimSignature::new(d.to_vec()).unwrap()
    }

    #[test]
    fn slack_component_extended_reals() {
        let c = SlackComponent::new("x", 1.0, f64::INFINITY, T);
        assert!(c.pass && c.slack == f64::INFINITY);
        let c = SlackComponent::new("x", f64::INFINITY, 1.0, T);
        assert!(!c.pass && c.slack == f64::NEG_INFINITY);
        let c = SlackComponent::new("x", f64::INFINITY, f64::INFINITY, T);
        assert!(c.pass);
        let c = SlackComponent::new("x", 1.0, 1.0 - 2e-9, T);
        assert!(!c.pass);
        let c = SlackComponent::new("x", 1.0, 1.0, 0.5);
        assert!(!c.pass);
    }

    #[test]
    fn monotonicity_cptp_examples() {
        let mut r = rng(0);
        let rho = random_density(3, 3, &mut r).unwrap();
        let ch = random_channel(3, 2, 2, &mut r).unwrap();
        let res = check_monotonicity_cptp(&rho, &rho, &ch, T).unwrap();
        assert_abs_diff_eq!(res.slack, 0.0, epsilon = 1e-9);

        let sigma = random_density(2, 2, &mut r).unwrap();
        let rho = random_density(2, 1, &mut r).unwrap();
        let res = check_monotonicity_cptp(&rho, &sigma, &depolarizing(2, 1.0).unwrap(), T).unwrap();
        assert_abs_diff_eq!(res.lhs, 0.0, epsilon = 1e-9);
        assert!(res.pass && res.slack >= 0.0);
        assert_abs_diff_eq!(res.slack, entropy::relative_entropy(&rho, &sigma).unwrap().value, epsilon = 1e-9);
    }

    #[test]
    fn monotonicity_cptp_infinite_rhs_passes() {
        let rho = DensityOperator::basis(2, 0);
        let sigma = DensityOperator::basis(2, 1);
        let res = check_monotonicity_cptp(&rho, &sigma, &channel::identity(2), T).unwrap();
        assert!(res.pass);
        assert_eq!(res.slack, f64::INFINITY);
    }

    #[test]
    fn monotonicity_partial_trace_examples() {
        let mut r = rng(1);
        let rho = random_density(4, 3, &mut r).unwrap().with_sig(sig(&[2, 2])).unwrap();
        assert_abs_diff_eq!(check_monotonicity_partial_trace(&rho, &rho, T).unwrap().slack, 0.0, epsilon = 1e-9);

        let tau = random_density(3, 2, &mut r).unwrap();
        let ra = random_density(2, 2, &mut r).unwrap();
        let sa = random_density(2, 2, &mut r).unwrap();
        let res = check_monotonicity_partial_trace(&ra.tensor(&tau), &sa.tensor(&tau), T).unwrap();
        assert_abs_diff_eq!(res.slack, 0.0, epsilon = 1e-9);
        assert!(check_monotonicity_partial_trace(&ra, &sa, T).is_err());
    }

    #[test]
    fn ssa_examples() {
        let mut r = rng(2);
        let a = random_density(2, 2, &mut r).unwrap();
        let b = random_density(3, 2, &mut r).unwrap();
        let c = random_density(2, 1, &mut r).unwrap();
        let prod = a.tensor(&b).tensor(&c);
        assert_abs_diff_eq!(check_ssa_ii(&prod, T).unwrap().slack, 0.0, epsilon = 1e-9);

        let s = 0.5f64.sqrt();
        let mut v = CVector::zeros(8);
        v[0] = real(s);
        v[7] = real(s);
        let ghz = PureState::new(v, sig(&[2, 2, 2])).unwrap().density();
        let res = check_ssa_ii(&ghz, T).unwrap();
        assert_abs_diff_eq!(res.lhs, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(res.rhs, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(res.slack, 1.0, epsilon = 1e-9);
        assert!(check_ssa_i(&a, T).is_err());
    }

    #[test]
    fn joint_convexity_examples() {
        let mut r = rng(3);
        let rho = random_density(2, 2, &mut r).unwrap();
        let sigma = random_density(2, 2, &mut r).unwrap();
        let single_r = Ensemble::new(vec![1.0], vec![rho.clone()]).unwrap();
        let single_s = Ensemble::new(vec![1.0], vec![sigma.clone()]).unwrap();
        assert_abs_diff_eq!(check_joint_convexity(&single_r, &single_s, T).unwrap().slack, 0.0, epsilon = 1e-9);

        let p = vec![0.2, 0.3, 0.5];
        let er = Ensemble::new(p.clone(), vec![rho.clone(); 3]).unwrap();
        let es = Ensemble::new(p, vec![sigma.clone(); 3]).unwrap();
        assert_abs_diff_eq!(check_joint_convexity(&er, &es, T).unwrap().slack, 0.0, epsilon = 1e-9);

        let other = Ensemble::new(vec![0.5, 0.5], vec![sigma.clone(); 2]).unwrap();
        let two = Ensemble::new(vec![0.9, 0.1], vec![rho; 2]).unwrap();
        assert!(check_joint_convexity(&two, &other, T).is_err());
    }

    #[test]
    fn concavity_conditional_examples() {
        let mut r = rng(4);
        let rho = random_density(4, 4, &mut r).unwrap().with_sig(sig(&[2, 2])).unwrap();
        let single = Ensemble::new(vec![1.0], vec![rho]).unwrap();
        assert_abs_diff_eq!(check_concavity_conditional(&single, T).unwrap().slack, 0.0, epsilon = 1e-9);

        // Members |i⟩⟨i| ⊗ τ differ only on A: slack is the mixing entropy on A.
        let tau = random_density(2, 2, &mut r).unwrap();
        let ens = Ensemble::new(
            vec![0.3, 0.7],
            vec![DensityOperator::basis(2, 0).tensor(&tau), DensityOperator::basis(2, 1).tensor(&tau)],
        )
        .unwrap();
        let res = check_concavity_conditional(&ens, T).unwrap();
        let h = -0.3 * 0.3f64.log2() - 0.7 * 0.7f64.log2();
        assert_abs_diff_eq!(res.slack, h, epsilon = 1e-9);
    }

    #[test]
    fn strong_concavity_examples() {
        let mut r = rng(5);
        let a = random_density(2, 2, &mut r).unwrap();
        let b = random_density(3, 2, &mut r).unwrap();
        let res = check_strong_concavity(&[1.0], std::slice::from_ref(&a), &[b], T).unwrap();
        assert_abs_diff_eq!(res.slack, 0.0, epsilon = 1e-9);
        assert_eq!(res.components.len(), 2);

        let probs = qstate::random_simplex(3, &mut r);
        let rhos_b: Vec<_> = (0..3).map(|_| random_density_any_rank(2, &mut r)).collect();
        let res = check_strong_concavity(&probs, &vec![a; 3], &rhos_b, T).unwrap();
        assert!(res.pass && res.components.iter().all(|c| c.slack >= -1e-9));
    }

    #[test]
    fn purification_decomposition_examples() {
        let mut r = rng(6);
        let ch = random_channel(2, 3, 2, &mut r).unwrap();
        let psi = qstate::random_pure(2, &mut r);
        let rho = psi.density();
        let decomp = PureEnsemble::new(vec![1.0], vec![psi]).unwrap();
        let res = check_purification_decomposition(&rho, &decomp, &ch, T).unwrap();
        assert_abs_diff_eq!(res.slack, 0.0, epsilon = 1e-9);

        let rho = random_density(3, 3, &mut r).unwrap();
        let decomp = qstate::pure_decompositions(&rho, Decomposition::Randomized { members: 4 }, &mut r).unwrap();
        let res = check_purification_decomposition(&rho, &decomp, &channel::identity(3), T).unwrap();
        assert_abs_diff_eq!(res.lhs, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(res.rhs, 0.0, epsilon = 1e-9);
    }

    fn small_cfg(seed: u64) -> FuzzConfig {
        FuzzConfig { seed, trials: 60, decomposition_trials: 40, ..FuzzConfig::default() }
    }

    #[test]
    fn small_campaign_has_no_failures() {
        for report in run_fuzz(&small_cfg(1), None).unwrap() {
            assert_eq!(report.failures, 0, "{}: min slack {}", report.inequality, report.min_slack);
            assert!(report.min_slack >= DEFAULT_THRESHOLD);
            assert!(report.max_equality_recheck <= EQUALITY_DRIFT);
        }
    }

    #[test]
    fn positive_threshold_reports_failures() {
        let cfg = FuzzConfig { threshold: 0.5, inequalities: vec![Inequality::StrongSubadditivityII], ..small_cfg(2) };
        let report = run_campaign(Inequality::StrongSubadditivityII, &cfg, None).unwrap();
        assert!(report.failures > 0);
    }

    #[test]
    fn campaigns_are_deterministic_and_write_witnesses() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = FuzzConfig { inequalities: vec![Inequality::StrongConcavity], ..small_cfg(3) };
        let a = run_fuzz(&cfg, Some(dir.path())).unwrap();
        let bytes_a = std::fs::read(report_path(dir.path(), Inequality::StrongConcavity, 3)).unwrap();
        let b = run_fuzz(&cfg, Some(dir.path())).unwrap();
        let bytes_b = std::fs::read(report_path(dir.path(), Inequality::StrongConcavity, 3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(bytes_a, bytes_b);
        assert_eq!(a[0].witnesses.len(), WITNESS_KEEP);
        let w: Witness = json::read_file(&dir.path().join(&a[0].witnesses[0])).unwrap();
        assert_eq!(w.trial, a[0].lowest[0].trial);
        let again = reproduce_trial(Inequality::StrongConcavity, &cfg, w.trial).unwrap();
        assert_eq!(again.slack, w.check.slack);
    }

    #[test]
    fn labels_round_trip() {
        for ineq in Inequality::ALL {
            assert_eq!(Inequality::from_label(ineq.label()), Some(ineq));
        }
        let v = serde_json::to_value(Inequality::StrongConcavity).unwrap();
        assert_eq!(v, "strong-concavity");
    }

    #[test]
    fn witness_inputs_rebuild_states() {
        let cfg = small_cfg(4);
        let res = reproduce_trial(Inequality::MonotonicityPartialTrace, &cfg, 0).unwrap();
        let w = res.witness.unwrap();
        let rho: DensityOperator = serde_json::from_value(w["rho"].clone()).unwrap();
        let sigma: DensityOperator = serde_json::from_value(w["sigma"].clone()).unwrap();
        let again = check_monotonicity_partial_trace(&rho, &sigma, T).unwrap();
        assert!((again.slack - res.slack).abs() < 1e-9 || again.slack == res.slack);
    }
}
