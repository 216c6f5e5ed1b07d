//! Tabular Q-learning over (pitch, interval) cells.
//!
//! A macro-step at `(p, k)` picks a decomposition `(i, j)` and reinforces two
//! cells: `(p, i)` for the first leg and `(y, j)` for the second, where `y`
//! is the observed intermediate pitch. Decompositions are scored
//! compositionally from the same table.

pub mod oracle;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{actions, make_env, sub_rewards, EnvConfig, PitchEnv, PitchObservableState};
use crate::error::{Error, Result};
use crate::momdp::{belief_update, seeded_rng, step, BeliefY, FactoredState, MomdpModel};
use crate::pitch::{Decomposition, IntervalNumber, PitchClass, NUM_INTERVALS, NUM_PITCHES};

pub type Grid<T> = [[T; NUM_PITCHES]; NUM_INTERVALS];

/// Values indexed `[interval][pitch]`: rows are intervals 1..7, columns C..B.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QTable {
    values: Grid<f64>,
}

impl QTable {
    pub fn zeros() -> Self {
        Self::default()
    }

    pub fn from_grid(values: Grid<f64>) -> Self {
        Self { values }
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.values
    }

    pub fn get(&self, interval: IntervalNumber, pitch: PitchClass) -> f64 {
        self.values[interval.index()][pitch.index()]
    }

    pub fn set(&mut self, interval: IntervalNumber, pitch: PitchClass, value: f64) {
        self.values[interval.index()][pitch.index()] = value;
    }

    /// Max over `candidates` at `pitch`; zero when there are none.
    pub fn max_at(&self, pitch: PitchClass, candidates: &[IntervalNumber]) -> f64 {
        candidates
            .iter()
            .map(|&c| self.get(c, pitch))
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
            .unwrap_or(0.0)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn iter(&self) -> impl Iterator<Item = (IntervalNumber, PitchClass, f64)> + '_ {
        IntervalNumber::all().flat_map(move |k| PitchClass::all().map(move |p| (k, p, self.get(k, p))))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }

    /// Compositional score of a decomposition played from `pitch`.
    pub fn score(&self, pitch: PitchClass, a: Decomposition, gamma: f64) -> f64 {
        self.get(a.first, pitch) + gamma * self.get(a.second, pitch.advance(a.first))
    }

    /// Highest-scoring decomposition of `command`, lowest first leg on ties.
    pub fn greedy(&self, pitch: PitchClass, command: IntervalNumber, gamma: f64) -> Decomposition {
        let mut best: Option<(Decomposition, f64)> = None;
        for a in command.decompositions() {
            let s = self.score(pitch, a, gamma);
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((a, s));
            }
        }
        best.expect("every interval has a decomposition").0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaSchedule {
    #[default]
    Constant,
    /// `1 / n` where `n` counts updates of the cell, this one included.
    InverseVisitCount,
}

/// What one unit of the training budget means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InteractionUnit {
    /// A full pass over the contour.
    #[default]
    Pass,
    /// A single macro-step; episodes restart at the contour start.
    Step,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_greedy: f64,
    pub passes: usize,
    pub seed: u64,
    pub alpha_schedule: AlphaSchedule,
    pub interaction: InteractionUnit,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.4,
            gamma: 0.5,
            epsilon_greedy: 0.1,
            passes: 20,
            seed: 42,
            alpha_schedule: AlphaSchedule::Constant,
            interaction: InteractionUnit::Pass,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.epsilon_greedy) {
            return Err(Error::Config(format!("epsilon {} outside [0, 1]", self.epsilon_greedy)));
        }
        Ok(())
    }
}

/// Epsilon-greedy choice of decomposition at a non-terminal state.
///
/// Draws one uniform to decide whether to explore, and a second one only
/// when exploring.
pub fn select_action<R: Rng + ?Sized>(
    q: &QTable,
    x: &PitchObservableState,
    epsilon: f64,
    gamma: f64,
    rng: &mut R,
) -> Result<Decomposition> {
    let candidates = actions(x)?;
    let explore = rng.gen::<f64>() < epsilon;
    if explore {
        Ok(candidates[rng.gen_range(0..candidates.len())])
    } else {
        Ok(q.greedy(x.pitch, x.command.expect("non-terminal"), gamma))
    }
}

/// One-step Q-learning backup of cell `[interval][pitch]`. Returns the new value.
#[allow(clippy::too_many_arguments)]
pub fn q_update(
    q: &mut QTable,
    pitch: PitchClass,
    interval: IntervalNumber,
    reward: f64,
    next_pitch: PitchClass,
    next_candidates: &[IntervalNumber],
    alpha: f64,
    gamma: f64,
) -> f64 {
    let old = q.get(interval, pitch);
    let target = reward + gamma * q.max_at(next_pitch, next_candidates);
    let new = old + alpha * (target - old);
    q.set(interval, pitch, new);
    new
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub qtable: QTable,
    pub visit_counts: Grid<u64>,
    pub contour_mask: Grid<bool>,
    /// Undiscounted sum of macro-step rewards for each episode.
    pub pass_returns: Vec<f64>,
    /// Mean posterior mass on the true intermediate pitch, per episode.
    pub belief_true_mass: Vec<f64>,
    pub macro_steps: u64,
}

impl TrainReport {
    pub fn visits(&self, interval: IntervalNumber, pitch: PitchClass) -> u64 {
        self.visit_counts[interval.index()][pitch.index()]
    }

    pub fn is_contour_cell(&self, interval: IntervalNumber, pitch: PitchClass) -> bool {
        self.contour_mask[interval.index()][pitch.index()]
    }

    pub fn nonzero_cells(&self) -> usize {
        self.qtable.iter().filter(|&(_, _, v)| v != 0.0).count()
    }

    pub fn nonzero_non_contour_cells(&self) -> usize {
        self.qtable
            .iter()
            .filter(|&(k, p, v)| v != 0.0 && !self.is_contour_cell(k, p))
            .count()
    }
}

pub fn contour_mask(contour: &crate::pitch::Contour) -> Grid<bool> {
    let mut mask = [[false; NUM_PITCHES]; NUM_INTERVALS];
    for (p, k) in contour.cells() {
        mask[k.index()][p.index()] = true;
    }
    mask
}

struct Trainer<'a> {
    env: &'a PitchEnv,
    cfg: &'a LearnerConfig,
    q: QTable,
    visits: Grid<u64>,
}

impl Trainer<'_> {
    fn alpha_for(&mut self, interval: IntervalNumber, pitch: PitchClass) -> f64 {
        let n = &mut self.visits[interval.index()][pitch.index()];
        *n += 1;
        match self.cfg.alpha_schedule {
            AlphaSchedule::Constant => self.cfg.alpha,
            AlphaSchedule::InverseVisitCount => 1.0 / *n as f64,
        }
    }

    fn backup(&mut self, pitch: PitchClass, interval: IntervalNumber, reward: f64, next: PitchClass, cands: &[IntervalNumber]) {
        let alpha = self.alpha_for(interval, pitch);
        q_update(&mut self.q, pitch, interval, reward, next, cands, alpha, self.cfg.gamma);
    }

    /// One macro-step from `state`; returns the successor and the environment reward.
    fn macro_step<R: Rng>(&mut self, state: FactoredState, belief: &mut BeliefY, rng: &mut R) -> Result<(FactoredState, f64, f64)> {
        let env = self.env;
        let x = env.state(state.x).expect("state comes from the env");
        let a = select_action(&self.q, &x, self.cfg.epsilon_greedy, self.cfg.gamma, rng)?;
        let action = PitchEnv::action_id(a);
        let out = step(env, state, action, rng)?;
        *belief = belief_update(env, belief, state.x, action, out.next.x, out.obs)?;

        let y_obs = PitchClass::new(out.obs).expect("observations are pitches");
        let next = env.state(out.next.x).expect("successor comes from the env");
        let (r1, r2) = sub_rewards(&x, a, env.config())?;
        let all: Vec<IntervalNumber> = IntervalNumber::all().collect();
        self.backup(x.pitch, a.first, r1, y_obs, &all);
        let cont: Vec<IntervalNumber> = next.command.into_iter().collect();
        self.backup(y_obs, a.second, r2, next.pitch, &cont);

        Ok((out.next, out.reward, belief.get(out.next.y)))
    }
}

/// Run Q-learning over the contour described by `env_config`.
pub fn train(env_config: &EnvConfig, cfg: &LearnerConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let env = make_env(env_config.clone())?;
    let mut rng = seeded_rng(cfg.seed);
    let mut trainer = Trainer {
        env: &env,
        cfg,
        q: QTable::zeros(),
        visits: [[0; NUM_PITCHES]; NUM_INTERVALS],
    };

    let start = FactoredState::new(0, env.initial_hidden().index());
    let mut pass_returns = Vec::new();
    let mut belief_true_mass = Vec::new();
    let mut macro_steps = 0u64;
    let budget = cfg.passes as u64;

    'episodes: loop {
        let done = match cfg.interaction {
            InteractionUnit::Pass => pass_returns.len() as u64 >= budget,
            InteractionUnit::Step => macro_steps >= budget,
        };
        if done {
            break;
        }
        let mut state = start;
        let mut belief = BeliefY::point_mass(env.num_y(), start.y);
        let mut ret = 0.0;
        let mut mass = 0.0;
        let mut steps = 0usize;
        while !env.is_terminal(state.x) {
            if cfg.interaction == InteractionUnit::Step && macro_steps >= budget {
                pass_returns.push(ret);
                belief_true_mass.push(mass / steps.max(1) as f64);
                break 'episodes;
            }
            let (next, reward, true_mass) = trainer.macro_step(state, &mut belief, &mut rng)?;
            state = next;
            ret += reward;
            mass += true_mass;
            steps += 1;
            macro_steps += 1;
        }
        pass_returns.push(ret);
        belief_true_mass.push(mass / steps.max(1) as f64);
    }

    Ok(TrainReport {
        qtable: trainer.q,
        visit_counts: trainer.visits,
        contour_mask: contour_mask(env.contour()),
        pass_returns,
        belief_true_mass,
        macro_steps,
    })
}
