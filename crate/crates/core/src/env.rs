//! The pitch environment.
//!
//! The observable factor is the current pitch together with the interval the
//! contour commands next; the hidden factor is the intermediate pitch reached
//! after the first leg of the chosen decomposition. One episode is one pass
//! over the contour. Observable indices are contour positions `0..=m`, hidden
//! indices and observation ids are pitch-class indices.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::momdp::{sample_categorical, MomdpModel};
use crate::pitch::{Contour, Decomposition, IntervalNumber, PitchClass, NUM_PITCHES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PitchObservableState {
    pub pitch: PitchClass,
    /// `None` at the terminal position.
    pub command: Option<IntervalNumber>,
    pub step_index: usize,
}

impl PitchObservableState {
    pub fn is_terminal(&self) -> bool {
        self.command.is_none()
    }
}

impl std::fmt::Display for PitchObservableState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.command {
            Some(k) => write!(f, "({}, {}, step {})", self.pitch, k, self.step_index),
            None => write!(f, "({}, terminal, step {})", self.pitch, self.step_index),
        }
    }
}

/// Symmetric confusion over the seven pitch classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationModel {
    pub epsilon: f64,
}

impl ObservationModel {
    pub const EXACT: Self = Self { epsilon: 0.0 };

    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Config(format!("observation noise {epsilon} outside [0, 1]")));
        }
        Ok(Self { epsilon })
    }

    pub fn distribution(&self, y_true: PitchClass) -> [f64; NUM_PITCHES] {
        let wrong = self.epsilon / (NUM_PITCHES - 1) as f64;
        let mut d = [wrong; NUM_PITCHES];
        d[y_true.index()] = 1.0 - self.epsilon;
        d
    }

    pub fn is_exact(&self) -> bool {
        self.epsilon == 0.0
    }
}

/// Draw the observed intermediate pitch. Always consumes one uniform.
pub fn observe<R: Rng + ?Sized>(y_true: PitchClass, obs: &ObservationModel, rng: &mut R) -> PitchClass {
    let i = sample_categorical(&obs.distribution(y_true), rng);
    PitchClass::new(i).expect("categorical over seven pitches")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardCombine {
    /// `r1·γ + r2`
    #[default]
    Paper,
    /// `r1 + γ·r2`
    DiscountedSecond,
}

impl std::str::FromStr for RewardCombine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Self::Paper),
            "discounted-second" => Ok(Self::DiscountedSecond),
            other => Err(Error::Config(format!("unknown reward combination '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    pub r1: f64,
    pub r2: f64,
    pub gamma: f64,
}

impl RewardSpec {
    pub fn combined(&self, mode: RewardCombine) -> f64 {
        match mode {
            RewardCombine::Paper => combined_reward(self.r1, self.r2, self.gamma),
            RewardCombine::DiscountedSecond => self.r1 + self.gamma * self.r2,
        }
    }
}

/// The macro-step reward, `r1·γ + r2` exactly.
pub fn combined_reward(r1: f64, r2: f64, gamma: f64) -> f64 {
    r1 * gamma + r2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub contour: Contour,
    pub obs: ObservationModel,
    pub r1_base: f64,
    pub r2_base: f64,
    /// Discount used inside the reward combination.
    pub gamma: f64,
    pub combine: RewardCombine,
}

impl EnvConfig {
    pub fn new(contour: Contour) -> Self {
        Self {
            contour,
            obs: ObservationModel::EXACT,
            r1_base: 0.0,
            r2_base: 1.0,
            gamma: 0.5,
            combine: RewardCombine::Paper,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.contour.is_empty() {
            return Err(Error::Config("contour has no commands".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        if !self.r1_base.is_finite() || !self.r2_base.is_finite() {
            return Err(Error::Config("rewards must be finite".into()));
        }
        if self.r2_base <= 0.0 {
            return Err(Error::Config(format!("r2 base {} must be positive", self.r2_base)));
        }
        ObservationModel::new(self.obs.epsilon)?;
        Ok(())
    }

    pub fn reward_spec(&self) -> RewardSpec {
        RewardSpec {
            r1: self.r1_base,
            r2: self.r2_base,
            gamma: self.gamma,
        }
    }

    /// Reward of one macro-step under the configured combination.
    pub fn macro_reward(&self) -> f64 {
        self.reward_spec().combined(self.combine)
    }
}

/// The decompositions available at `x`.
pub fn actions(x: &PitchObservableState) -> Result<Vec<Decomposition>> {
    x.command
        .map(IntervalNumber::decompositions)
        .ok_or_else(|| Error::Terminal(x.to_string()))
}

pub fn sub_rewards(x: &PitchObservableState, a: Decomposition, cfg: &EnvConfig) -> Result<(f64, f64)> {
    check_action(x, a)?;
    Ok((cfg.r1_base, cfg.r2_base))
}

fn check_action(x: &PitchObservableState, a: Decomposition) -> Result<()> {
    let k = x.command.ok_or_else(|| Error::Terminal(x.to_string()))?;
    if a.first.number() + a.second.number() == k.number() + 1 {
        Ok(())
    } else {
        Err(Error::InvalidAction {
            state: x.to_string(),
            action: a.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    /// The intermediate pitch, the hidden factor.
    pub y: PitchClass,
    pub next: PitchObservableState,
}

/// Finite MOMDP over one contour.
#[derive(Debug, Clone)]
pub struct PitchEnv {
    config: EnvConfig,
    states: Vec<PitchObservableState>,
}

pub fn make_env(config: EnvConfig) -> Result<PitchEnv> {
    config.validate()?;
    let pitches = config.contour.pitches();
    let commands = config.contour.commands();
    let states = pitches
        .iter()
        .enumerate()
        .map(|(t, &pitch)| PitchObservableState {
            pitch,
            command: commands.get(t).copied(),
            step_index: t,
        })
        .collect();
    Ok(PitchEnv { config, states })
}

impl PitchEnv {
    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn contour(&self) -> &Contour {
        &self.config.contour
    }

    pub fn states(&self) -> &[PitchObservableState] {
        &self.states
    }

    pub fn initial(&self) -> PitchObservableState {
        self.states[0]
    }

    /// Observable state at a contour position.
    pub fn state(&self, step_index: usize) -> Option<PitchObservableState> {
        self.states.get(step_index).copied()
    }

    /// Hidden value before any decomposition has been made.
    pub fn initial_hidden(&self) -> PitchClass {
        self.config.contour.start()
    }

    pub fn transition(&self, x: &PitchObservableState, a: Decomposition) -> Result<Transition> {
        check_action(x, a)?;
        let k = x.command.expect("checked non-terminal");
        let next = self
            .state(x.step_index + 1)
            .filter(|n| n.pitch == x.pitch.advance(k))
            .ok_or_else(|| Error::InvalidState(format!("{x} is not a state of this contour")))?;
        Ok(Transition {
            y: x.pitch.advance(a.first),
            next,
        })
    }

    pub fn action_id(a: Decomposition) -> usize {
        a.first.index()
    }

    pub fn decomposition(&self, x: usize, action: usize) -> Option<Decomposition> {
        let k = self.states.get(x)?.command?;
        k.decompositions().get(action).copied()
    }
}

impl MomdpModel for PitchEnv {
    fn num_x(&self) -> usize {
        self.states.len()
    }

    fn num_y(&self) -> usize {
        NUM_PITCHES
    }

    fn num_observations(&self) -> usize {
        NUM_PITCHES
    }

    fn actions(&self, x: usize) -> Vec<usize> {
        match self.states[x].command {
            Some(k) => (0..k.number()).collect(),
            None => Vec::new(),
        }
    }

    fn next_x(&self, x: usize, _y: usize, _action: usize) -> usize {
        x + 1
    }

    fn hidden_transition(&self, x: usize, _y: usize, action: usize, _x_next: usize) -> Vec<f64> {
        let a = self.decomposition(x, action).expect("valid action");
        let mut d = vec![0.0; NUM_PITCHES];
        d[self.states[x].pitch.advance(a.first).index()] = 1.0;
        d
    }

    fn observation(&self, _x_next: usize, y_next: usize, _action: usize) -> Vec<f64> {
        let y = PitchClass::new(y_next).expect("hidden index is a pitch");
        self.config.obs.distribution(y).to_vec()
    }

    fn reward(&self, _x: usize, _y: usize, _action: usize) -> f64 {
        self.config.macro_reward()
    }

    fn discount(&self) -> f64 {
        self.config.gamma
    }

    fn describe_x(&self, x: usize) -> String {
        self.states
            .get(x)
            .map(|s| s.to_string())
            .unwrap_or_else(|| format!("x={x}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::momdp::{belief_update, seeded_rng, step, validate_model, BeliefY, FactoredState};
    use crate::pitch::parse_contour;

    fn iv(n: usize) -> IntervalNumber {
        IntervalNumber::new(n).unwrap()
    }

    fn env(text: &str) -> PitchEnv {
        make_env(EnvConfig::new(parse_contour(text).unwrap())).unwrap()
    }

    #[test]
    fn actions_follow_command() {
        let e = env("C: 5 1");
        let x0 = e.initial();
        assert_eq!(actions(&x0).unwrap(), iv(5).decompositions());
        assert_eq!(actions(&e.state(1).unwrap()).unwrap(), vec![Decomposition::new(iv(1), iv(1))]);
        assert!(matches!(actions(&e.state(2).unwrap()), Err(Error::Terminal(_))));
    }

    #[test]
    fn fifth_through_a_third() {
        let e = env("C: 5");
        let t = e.transition(&e.initial(), Decomposition::new(iv(3), iv(3))).unwrap();
        assert_eq!(t.y, PitchClass::E);
        assert_eq!(t.next.pitch, PitchClass::G);
        assert!(t.next.is_terminal());
    }

    #[test]
    fn second_from_b_wraps() {
        let e = env("B: 2");
        let t = e.transition(&e.initial(), Decomposition::new(iv(1), iv(2))).unwrap();
        assert_eq!(t.y, PitchClass::B);
        assert_eq!(t.next.pitch, PitchClass::C);
    }

    #[test]
    fn transition_rejects_foreign_actions() {
        let e = env("C: 5");
        assert!(matches!(
            e.transition(&e.initial(), Decomposition::new(iv(2), iv(2))),
            Err(Error::InvalidAction { .. })
        ));
        assert!(matches!(
            e.transition(&e.state(1).unwrap(), Decomposition::new(iv(1), iv(1))),
            Err(Error::Terminal(_))
        ));
    }

    #[test]
    fn observe_exact_and_fully_wrong() {
        let exact = ObservationModel::EXACT;
        let mut rng = seeded_rng(1);
        for p in PitchClass::all() {
            assert_eq!(observe(p, &exact, &mut rng), p);
        }
        let wrong = ObservationModel::new(1.0).unwrap();
        let mut a = seeded_rng(5);
        let mut b = seeded_rng(5);
        let mut counts = [0usize; NUM_PITCHES];
        for _ in 0..60_000 {
            let o = observe(PitchClass::D, &wrong, &mut a);
            assert_eq!(o, observe(PitchClass::D, &wrong, &mut b));
            counts[o.index()] += 1;
        }
        assert_eq!(counts[PitchClass::D.index()], 0);
        for (i, &c) in counts.iter().enumerate() {
            if i != PitchClass::D.index() {
                assert!((c as f64 / 60_000.0 - 1.0 / 6.0).abs() < 0.01, "{counts:?}");
            }
        }
        assert!(ObservationModel::new(1.5).is_err());
    }

    #[test]
    fn reward_combinations() {
        assert_eq!(combined_reward(1.0, 1.0, 0.5), 1.5);
        assert_eq!(combined_reward(1.0, 0.0, 0.5), 0.5);
        for r in [-2.0, 0.0, 3.25] {
            for g in [0.0, 0.3, 0.9] {
                assert_eq!(combined_reward(0.0, r, g), r);
            }
        }
        let spec = RewardSpec { r1: 1.0, r2: 0.0, gamma: 0.5 };
        assert_eq!(spec.combined(RewardCombine::Paper), 0.5);
        assert_eq!(spec.combined(RewardCombine::DiscountedSecond), 1.0);
        assert_eq!("discounted-second".parse::<RewardCombine>().unwrap(), RewardCombine::DiscountedSecond);
        assert!("other".parse::<RewardCombine>().is_err());
    }

    #[test]
    fn sub_reward_defaults() {
        let e = env("C: 3");
        let x = e.initial();
        let a = Decomposition::new(iv(1), iv(3));
        assert_eq!(sub_rewards(&x, a, e.config()).unwrap(), (0.0, 1.0));
        let mut cfg = e.config().clone();
        cfg.r1_base = 1.0;
        assert_eq!(sub_rewards(&x, a, &cfg).unwrap(), (1.0, 1.0));
        assert!(sub_rewards(&e.state(1).unwrap(), a, &cfg).is_err());
    }

    #[test]
    fn make_env_shapes() {
        let e = env("C E");
        assert_eq!(e.num_x(), 2);
        assert_eq!(e.num_y(), 7);
        assert_eq!(MomdpModel::actions(&e, 0).len(), 3);
        assert!(e.is_terminal(1));
        validate_model(&e).unwrap();

        let mut noisy = EnvConfig::new(parse_contour("C E F D C").unwrap());
        noisy.obs = ObservationModel::new(0.3).unwrap();
        validate_model(&make_env(noisy).unwrap()).unwrap();
    }

    #[test]
    fn make_env_rejects_bad_config() {
        let mut cfg = EnvConfig::new(Contour::new(PitchClass::C, vec![]));
        assert!(matches!(make_env(cfg.clone()), Err(Error::Config(_))));
        cfg.contour = parse_contour("C E").unwrap();
        cfg.gamma = 1.0;
        assert!(make_env(cfg.clone()).is_err());
        cfg.gamma = 0.5;
        cfg.r2_base = 0.0;
        assert!(make_env(cfg).is_err());
    }

    #[test]
    fn generic_step_matches_domain_transition() {
        let e = env("C: 5");
        let a = Decomposition::new(iv(3), iv(3));
        let start = FactoredState::new(0, e.initial_hidden().index());
        let out = step(&e, start, PitchEnv::action_id(a), &mut seeded_rng(0)).unwrap();
        assert_eq!(e.state(out.next.x).unwrap().pitch, PitchClass::G);
        assert_eq!(out.next.y, PitchClass::E.index());
        assert_eq!(out.obs, PitchClass::E.index());
        assert_eq!(out.reward, 1.0);
        assert!(matches!(step(&e, start, 5, &mut seeded_rng(0)), Err(Error::InvalidAction { .. })));
    }

    #[test]
    fn belief_tracks_intermediate_pitch() {
        let mut cfg = EnvConfig::new(parse_contour("C: 5").unwrap());
        cfg.obs = ObservationModel::new(0.3).unwrap();
        let e = make_env(cfg).unwrap();
        let a = PitchEnv::action_id(Decomposition::new(iv(3), iv(3)));
        for obs in 0..7 {
            let b = belief_update(&e, &BeliefY::uniform(7), 0, a, 1, obs).unwrap();
            assert_eq!(b.is_point_mass(), Some(PitchClass::E.index()));
        }
    }
}
