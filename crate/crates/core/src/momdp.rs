//! Mixed-observability MDP machinery.
//!
//! A state is the pair `(x, y)` where `x` is observed exactly and `y` is
//! hidden. The observable factor moves deterministically through `next_x`;
//! the hidden factor moves through a distribution conditioned on the new `x`,
//! and the agent receives one observation about the new `y`. Everything is
//! indexed densely; domain layers own the mapping to names.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Portable seeded stream used by every simulation in the crate.
pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

const DIST_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FactoredState {
    pub x: usize,
    pub y: usize,
}

impl FactoredState {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

/// Environment contract for a finite MOMDP.
///
/// Observations only carry information about `y`; `x` is always seen exactly.
/// A state with no actions is terminal.
pub trait MomdpModel {
    fn num_x(&self) -> usize;
    fn num_y(&self) -> usize;
    fn num_observations(&self) -> usize;

    /// Action ids available at `x`, ascending.
    fn actions(&self, x: usize) -> Vec<usize>;

    fn next_x(&self, x: usize, y: usize, action: usize) -> usize;

    /// Distribution over the next hidden value, length `num_y`.
    fn hidden_transition(&self, x: usize, y: usize, action: usize, x_next: usize) -> Vec<f64>;

    /// Distribution over observations, length `num_observations`.
    fn observation(&self, x_next: usize, y_next: usize, action: usize) -> Vec<f64>;

    fn reward(&self, x: usize, y: usize, action: usize) -> f64;

    fn discount(&self) -> f64;

    fn is_terminal(&self, x: usize) -> bool {
        self.actions(x).is_empty()
    }

    fn describe_x(&self, x: usize) -> String {
        format!("x={x}")
    }
}

/// Probability mass over the hidden factor.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefY {
    probs: Vec<f64>,
}

impl BeliefY {
    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[at] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, y: usize) -> f64 {
        self.probs[y]
    }

    /// Index of the largest mass, lowest index on ties.
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn is_point_mass(&self) -> Option<usize> {
        let at = self.mode();
        (self.probs[at] == 1.0).then_some(at)
    }
}

/// Scale nonnegative mass to a distribution.
pub fn normalize(mass: &[f64]) -> Result<BeliefY> {
    if let Some(bad) = mass.iter().find(|m| !m.is_finite() || **m < 0.0) {
        return Err(Error::InvalidState(format!("belief mass entry {bad} is not a nonnegative number")));
    }
    let total: f64 = mass.iter().sum();
    if total <= 0.0 {
        return Err(Error::InconsistentObservation("all belief mass is zero".into()));
    }
    Ok(BeliefY {
        probs: mass.iter().map(|m| m / total).collect(),
    })
}

/// Inverse-CDF draw: one uniform variate, scanned in ascending index order.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left the cumulative sum just below u.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn check_state<M: MomdpModel + ?Sized>(model: &M, state: FactoredState) -> Result<()> {
    if state.x >= model.num_x() {
        return Err(Error::InvalidState(format!(
            "observable index {} out of range (|X| = {})",
            state.x,
            model.num_x()
        )));
    }
    if state.y >= model.num_y() {
        return Err(Error::InvalidState(format!(
            "hidden index {} out of range (|Y| = {})",
            state.y,
            model.num_y()
        )));
    }
    Ok(())
}

fn check_action<M: MomdpModel + ?Sized>(model: &M, x: usize, action: usize) -> Result<()> {
    if model.actions(x).contains(&action) {
        Ok(())
    } else {
        Err(Error::InvalidAction {
            state: model.describe_x(x),
            action: action.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next: FactoredState,
    pub obs: usize,
    pub reward: f64,
}

/// Advance one step. Consumes exactly two uniforms: hidden draw, then observation draw.
pub fn step<M, R>(model: &M, state: FactoredState, action: usize, rng: &mut R) -> Result<StepOutcome>
where
    M: MomdpModel + ?Sized,
    R: Rng + ?Sized,
{
    check_state(model, state)?;
    check_action(model, state.x, action)?;
    let x_next = model.next_x(state.x, state.y, action);
    let y_next = sample_categorical(&model.hidden_transition(state.x, state.y, action, x_next), rng);
    let obs = sample_categorical(&model.observation(x_next, y_next, action), rng);
    Ok(StepOutcome {
        next: FactoredState::new(x_next, y_next),
        obs,
        reward: model.reward(state.x, state.y, action),
    })
}

/// Exact Bayes filter over the hidden factor.
///
/// `b'(y') ∝ Z(obs | x', y', a) · Σ_y [Tx(x, y, a) = x'] · Ty(y' | x, y, a, x') · b(y)`
pub fn belief_update<M: MomdpModel + ?Sized>(
    model: &M,
    prior: &BeliefY,
    x: usize,
    action: usize,
    x_next: usize,
    obs: usize,
) -> Result<BeliefY> {
    let ny = model.num_y();
    if prior.len() != ny {
        return Err(Error::InvalidState(format!("prior has {} entries, |Y| = {ny}", prior.len())));
    }
    check_state(model, FactoredState::new(x, 0))?;
    check_state(model, FactoredState::new(x_next, 0))?;
    check_action(model, x, action)?;
    if obs >= model.num_observations() {
        return Err(Error::InvalidState(format!("observation {obs} out of range")));
    }

    let mut predicted = vec![0.0; ny];
    let mut feasible = false;
    for (y, &b) in prior.probs().iter().enumerate() {
        if b == 0.0 || model.next_x(x, y, action) != x_next {
            continue;
        }
        feasible = true;
        for (dst, t) in predicted.iter_mut().zip(model.hidden_transition(x, y, action, x_next)) {
            *dst += t * b;
        }
    }
    if !feasible {
        return Err(Error::InconsistentObservation(format!(
            "transition {} -> {} under action {action} has zero probability under the prior",
            model.describe_x(x),
            model.describe_x(x_next)
        )));
    }

    let unnormalized: Vec<f64> = predicted
        .iter()
        .enumerate()
        .map(|(y_next, &p)| p * model.observation(x_next, y_next, action)[obs])
        .collect();
    normalize(&unnormalized).map_err(|e| match e {
        Error::InconsistentObservation(_) => Error::InconsistentObservation(format!(
            "observation {obs} is impossible after {} under action {action}",
            model.describe_x(x)
        )),
        other => other,
    })
}

fn check_distribution(what: &str, probs: &[f64], len: usize) -> Result<()> {
    if probs.len() != len {
        return Err(Error::Config(format!("{what} has {} entries, expected {len}", probs.len())));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Config(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > DIST_TOL {
        return Err(Error::Config(format!("{what} sums to {total}")));
    }
    Ok(())
}

/// Check every Ty and Z row, every `next_x`, and the discount range.
pub fn validate_model<M: MomdpModel + ?Sized>(model: &M) -> Result<()> {
    let gamma = model.discount();
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Config(format!("discount {gamma} outside [0, 1)")));
    }
    for x in 0..model.num_x() {
        for a in model.actions(x) {
            for y in 0..model.num_y() {
                let x_next = model.next_x(x, y, a);
                if x_next >= model.num_x() {
                    return Err(Error::Config(format!("next_x({x}, {y}, {a}) = {x_next} out of range")));
                }
                let ty = model.hidden_transition(x, y, a, x_next);
                check_distribution(&format!("Ty(. | x={x}, y={y}, a={a})"), &ty, model.num_y())?;
                if !model.reward(x, y, a).is_finite() {
                    return Err(Error::Config(format!("R(x={x}, y={y}, a={a}) is not finite")));
                }
                for y_next in 0..model.num_y() {
                    let z = model.observation(x_next, y_next, a);
                    check_distribution(
                        &format!("Z(. | x'={x_next}, y'={y_next}, a={a})"),
                        &z,
                        model.num_observations(),
                    )?;
                }
            }
        }
    }
    Ok(())
}

/// A MOMDP given by explicit tables. Ty here ignores `x'` beyond the
/// deterministic `next_x` table.
#[derive(Debug, Clone)]
pub struct TabularMomdp {
    pub num_y: usize,
    pub num_obs: usize,
    /// `actions[x]` is the number of actions at `x`; ids are `0..n`.
    pub actions: Vec<usize>,
    /// `[x][y][a]`
    pub next_x: Vec<Vec<Vec<usize>>>,
    /// `[x][y][a] -> dist over y'`
    pub hidden: Vec<Vec<Vec<Vec<f64>>>>,
    /// `[x'][y'][a] -> dist over obs`; `a` ranges over the largest action count.
    pub obs: Vec<Vec<Vec<Vec<f64>>>>,
    /// `[x][y][a]`
    pub rewards: Vec<Vec<Vec<f64>>>,
    pub gamma: f64,
}

impl TabularMomdp {
    /// Random model with full-support distributions; sizes drawn from small ranges.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let nx = rng.gen_range(1..=5);
        let ny = rng.gen_range(1..=7);
        let no = rng.gen_range(1..=6);
        let max_a = rng.gen_range(1..=4);
        let dist = |n: usize, rng: &mut R| -> Vec<f64> {
            // Occasional exact zeros exercise sparse rows.
            let raw: Vec<f64> = (0..n)
                .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen::<f64>() })
                .collect();
            let total: f64 = raw.iter().sum();
            if total == 0.0 {
                let mut v = vec![0.0; n];
                v[rng.gen_range(0..n)] = 1.0;
                v
            } else {
                raw.iter().map(|r| r / total).collect()
            }
        };
        let actions: Vec<usize> = (0..nx).map(|_| rng.gen_range(1..=max_a)).collect();
        let next_x = (0..nx)
            .map(|_| (0..ny).map(|_| (0..max_a).map(|_| rng.gen_range(0..nx)).collect()).collect())
            .collect();
        let hidden = (0..nx)
            .map(|_| (0..ny).map(|_| (0..max_a).map(|_| dist(ny, rng)).collect()).collect())
            .collect();
        let obs = (0..nx)
            .map(|_| (0..ny).map(|_| (0..max_a).map(|_| dist(no, rng)).collect()).collect())
            .collect();
        let rewards = (0..nx)
            .map(|_| (0..ny).map(|_| (0..max_a).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect())
            .collect();
        Self {
            num_y: ny,
            num_obs: no,
            actions,
            next_x,
            hidden,
            obs,
            rewards,
            gamma: rng.gen_range(0.0..0.99),
        }
    }
}

impl MomdpModel for TabularMomdp {
    fn num_x(&self) -> usize {
        self.actions.len()
    }

    fn num_y(&self) -> usize {
        self.num_y
    }

    fn num_observations(&self) -> usize {
        self.num_obs
    }

    fn actions(&self, x: usize) -> Vec<usize> {
        (0..self.actions[x]).collect()
    }

    fn next_x(&self, x: usize, y: usize, action: usize) -> usize {
        self.next_x[x][y][action]
    }

    fn hidden_transition(&self, x: usize, y: usize, action: usize, _x_next: usize) -> Vec<f64> {
        self.hidden[x][y][action].clone()
    }

    fn observation(&self, x_next: usize, y_next: usize, action: usize) -> Vec<f64> {
        self.obs[x_next][y_next][action].clone()
    }

    fn reward(&self, x: usize, y: usize, action: usize) -> f64 {
        self.rewards[x][y][action]
    }

    fn discount(&self) -> f64 {
        self.gamma
    }
}
