//! Exact solutions for the noiseless pitch chain.
//!
//! [`backward_induction`] solves the macro-level problem: contour position `t`,
//! action = decomposition, reward = the combined sub-rewards, continuation
//! discounted by `gamma`. [`OracleSolution::project`] then computes the value
//! grid a tabular learner over (pitch, interval) cells converges to: the
//! fixed point of the Bellman backup averaged over every context that writes
//! a cell, weighted by how often an epsilon-greedy behaviour visits it. A
//! shared cell ties several decompositions together, so the greedy part of
//! that behaviour is an equilibrium mixture over the macro-optimal actions
//! rather than a single choice.

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::learner::{Grid, QTable};
use crate::pitch::{Decomposition, IntervalNumber, PitchClass, NUM_INTERVALS, NUM_PITCHES};

const OPTIMAL_TOL: f64 = 1e-12;
const FIXED_POINT_TOL: f64 = 1e-14;
const FICTITIOUS_ROUNDS: usize = 4000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub gamma: f64,
    pub macro_reward: f64,
    pub pitches: Vec<PitchClass>,
    pub commands: Vec<IntervalNumber>,
    /// `q[t][a]`, actions in `decompositions(commands[t])` order.
    pub q: Vec<Vec<f64>>,
    /// `values[t]`, with `values[m] = 0` at the terminal position.
    pub values: Vec<f64>,
}

pub fn backward_induction(env_config: &EnvConfig, gamma: f64) -> Result<OracleSolution> {
    env_config.validate()?;
    if !env_config.obs.is_exact() {
        return Err(Error::NondeterministicOracle(env_config.obs.epsilon));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Config(format!("gamma {gamma} outside [0, 1)")));
    }
    let contour = &env_config.contour;
    let commands = contour.commands().to_vec();
    let m = commands.len();
    let reward = env_config.macro_reward();

    let mut values = vec![0.0; m + 1];
    let mut q = vec![Vec::new(); m];
    for t in (0..m).rev() {
        q[t] = commands[t]
            .decompositions()
            .iter()
            .map(|_| reward + gamma * values[t + 1])
            .collect();
        values[t] = q[t].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }

    Ok(OracleSolution {
        gamma,
        macro_reward: reward,
        pitches: contour.pitches(),
        commands,
        q,
        values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridProjection {
    /// `None` where the behaviour never writes the cell.
    pub values: Grid<Option<f64>>,
    /// Greedy mixture over `decompositions(commands[t])` at each position.
    pub mixture: Vec<Vec<f64>>,
    /// Projected compositional score of each action at each position.
    pub scores: Vec<Vec<f64>>,
    /// Largest shortfall of the mixture's expected score below the best score.
    pub equilibrium_gap: f64,
}

/// A cell written by one (position, action, leg) context.
struct Context {
    weight: f64,
    interval: IntervalNumber,
    pitch: PitchClass,
    reward: f64,
    /// Pitch and candidate intervals the backup maximizes over.
    next_pitch: PitchClass,
    next_candidates: Vec<IntervalNumber>,
}

impl OracleSolution {
    pub fn steps(&self) -> usize {
        self.commands.len()
    }

    pub fn actions(&self, t: usize) -> Vec<Decomposition> {
        self.commands[t].decompositions()
    }

    /// Actions whose value is within rounding of the optimum at `t`.
    pub fn optimal_actions(&self, t: usize) -> Vec<Decomposition> {
        self.actions(t)
            .into_iter()
            .zip(&self.q[t])
            .filter(|&(_, &v)| v >= self.values[t] - OPTIMAL_TOL)
            .map(|(a, _)| a)
            .collect()
    }

    /// Largest `|Q(t, a) - (R + gamma * max_a' Q(t+1, a'))|` over the chain.
    pub fn bellman_residual(&self) -> f64 {
        let m = self.steps();
        let mut worst = 0.0f64;
        for t in 0..m {
            let continuation = if t + 1 < m {
                self.q[t + 1].iter().copied().fold(f64::NEG_INFINITY, f64::max)
            } else {
                0.0
            };
            for &v in &self.q[t] {
                worst = worst.max((v - (self.macro_reward + self.gamma * continuation)).abs());
            }
        }
        worst
    }

    fn contexts(&self, env_config: &EnvConfig, mixture: &[Vec<f64>], exploration: f64) -> Vec<Context> {
        let m = self.steps();
        let all: Vec<IntervalNumber> = IntervalNumber::all().collect();
        let mut out = Vec::new();
        for t in 0..m {
            let p = self.pitches[t];
            let options = self.actions(t);
            let k = options.len() as f64;
            let continuation: Vec<IntervalNumber> = self.commands.get(t + 1).copied().into_iter().collect();
            for (i, a) in options.into_iter().enumerate() {
                let weight = exploration / k + (1.0 - exploration) * mixture[t][i];
                if weight == 0.0 {
                    continue;
                }
                let y = p.advance(a.first);
                out.push(Context {
                    weight,
                    interval: a.first,
                    pitch: p,
                    reward: env_config.r1_base,
                    next_pitch: y,
                    next_candidates: all.clone(),
                });
                out.push(Context {
                    weight,
                    interval: a.second,
                    pitch: y,
                    reward: env_config.r2_base,
                    next_pitch: self.pitches[t + 1],
                    next_candidates: continuation.clone(),
                });
            }
        }
        out
    }

    /// Visit-weighted fixed point for a fixed behaviour.
    fn averaged_fixed_point(&self, contexts: &[Context], learner_gamma: f64) -> (QTable, Grid<f64>) {
        let mut mass = [[0.0; NUM_PITCHES]; NUM_INTERVALS];
        for c in contexts {
            mass[c.interval.index()][c.pitch.index()] += c.weight;
        }
        let mut q = QTable::zeros();
        // Averaging gamma-contractions is a gamma-contraction in sup norm.
        for _ in 0..10_000 {
            let mut acc = [[0.0; NUM_PITCHES]; NUM_INTERVALS];
            for c in contexts {
                let target = c.reward + learner_gamma * q.max_at(c.next_pitch, &c.next_candidates);
                acc[c.interval.index()][c.pitch.index()] += c.weight * target;
            }
            let mut next = QTable::zeros();
            let mut delta = 0.0f64;
            for k in IntervalNumber::all() {
                for p in PitchClass::all() {
                    let w = mass[k.index()][p.index()];
                    if w > 0.0 {
                        let v = acc[k.index()][p.index()] / w;
                        delta = delta.max((v - q.get(k, p)).abs());
                        next.set(k, p, v);
                    }
                }
            }
            q = next;
            if delta < FIXED_POINT_TOL {
                break;
            }
        }
        (q, mass)
    }

    /// Scores of every action at every position under `q`.
    fn scores(&self, q: &QTable, learner_gamma: f64) -> Vec<Vec<f64>> {
        (0..self.steps())
            .map(|t| {
                self.actions(t)
                    .into_iter()
                    .map(|a| q.score(self.pitches[t], a, learner_gamma))
                    .collect()
            })
            .collect()
    }

    /// Project onto the (pitch, interval) grid for a learner with discount
    /// `learner_gamma` exploring uniformly with probability `exploration`.
    ///
    /// Playing greedily against the projected scores can cycle, so the greedy
    /// part is a mixture over the optimal actions, found by fictitious play:
    /// each round best-responds to the current fixed point and folds that
    /// response into the running average.
    pub fn project(&self, env_config: &EnvConfig, learner_gamma: f64, exploration: f64) -> Result<GridProjection> {
        if !(0.0..=1.0).contains(&exploration) {
            return Err(Error::Config(format!("exploration {exploration} outside [0, 1]")));
        }
        let m = self.steps();
        let optimal: Vec<Vec<bool>> = (0..m)
            .map(|t| {
                let opt = self.optimal_actions(t);
                self.actions(t).iter().map(|a| opt.contains(a)).collect()
            })
            .collect();
        let mut mixture: Vec<Vec<f64>> = (0..m)
            .map(|t| {
                let first = optimal[t].iter().position(|&o| o).expect("optimal set is nonempty");
                (0..optimal[t].len()).map(|i| if i == first { 1.0 } else { 0.0 }).collect()
            })
            .collect();

        let best_response = |scores: &[Vec<f64>]| -> Vec<usize> {
            (0..m)
                .map(|t| {
                    let mut best: Option<(usize, f64)> = None;
                    for (i, &s) in scores[t].iter().enumerate() {
                        if optimal[t][i] && best.map_or(true, |(_, b)| s > b) {
                            best = Some((i, s));
                        }
                    }
                    best.expect("optimal set is nonempty").0
                })
                .collect()
        };

        for round in 1..=FICTITIOUS_ROUNDS {
            let contexts = self.contexts(env_config, &mixture, exploration);
            let (q, _) = self.averaged_fixed_point(&contexts, learner_gamma);
            let response = best_response(&self.scores(&q, learner_gamma));
            let step = 1.0 / (round as f64 + 1.0);
            for (w, &r) in mixture.iter_mut().zip(&response) {
                for (i, wi) in w.iter_mut().enumerate() {
                    *wi += step * (if i == r { 1.0 } else { 0.0 } - *wi);
                }
            }
        }

        let contexts = self.contexts(env_config, &mixture, exploration);
        let (q, mass) = self.averaged_fixed_point(&contexts, learner_gamma);
        let scores = self.scores(&q, learner_gamma);
        let gap = (0..m)
            .map(|t| {
                let best = scores[t].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let played: f64 = scores[t].iter().zip(&mixture[t]).map(|(s, w)| s * w).sum();
                best - played
            })
            .fold(0.0, f64::max);

        let mut values = [[None; NUM_PITCHES]; NUM_INTERVALS];
        for (k, p, v) in q.iter() {
            if mass[k.index()][p.index()] > 0.0 {
                values[k.index()][p.index()] = Some(v);
            }
        }
        Ok(GridProjection {
            values,
            mixture,
            scores,
            equilibrium_gap: gap,
        })
    }
}

impl GridProjection {
    pub fn get(&self, interval: IntervalNumber, pitch: PitchClass) -> Option<f64> {
        self.values[interval.index()][pitch.index()]
    }

    /// Sup-norm distance to `q` over the cells this projection covers.
    pub fn distance(&self, q: &QTable) -> f64 {
        q.iter()
            .filter_map(|(k, p, v)| self.get(k, p).map(|w| (v - w).abs()))
            .fold(0.0, f64::max)
    }
}
