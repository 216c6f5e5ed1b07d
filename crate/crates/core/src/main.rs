use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use pitch_momdp::env::RewardCombine;
use pitch_momdp::learner::{AlphaSchedule, InteractionUnit};
use pitch_momdp::report::{run_experiment, RunConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Combine {
    Paper,
    DiscountedSecond,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Schedule {
    Constant,
    InverseVisitCount,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Unit {
    Pass,
    Step,
}

/// Train a Q-learner on a pitch contour and write the interval x note grid.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// Contour file (notes form "C E F D" or intervals form "C: 3 2 6").
    /// Defaults to the bundled stand-in contour.
    #[arg(long)]
    contour: Option<PathBuf>,

    #[arg(long, default_value_t = 0.4)]
    alpha: f64,

    #[arg(long, default_value_t = 0.5)]
    gamma: f64,

    /// Discount used inside the reward combination (defaults to --gamma).
    #[arg(long)]
    reward_gamma: Option<f64>,

    /// Exploration rate of the epsilon-greedy policy.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,

    /// Probability of mis-observing the intermediate pitch.
    #[arg(long, default_value_t = 0.0)]
    obs_noise: f64,

    /// Number of interactions.
    #[arg(long, default_value_t = 20)]
    passes: usize,

    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// How sub-rewards combine: "paper" is r1*gamma + r2,
    /// "discounted-second" is r1 + gamma*r2.
    #[arg(long, value_enum, default_value = "paper")]
    reward_combine: Combine,

    /// Reward credited to the first sub-interval.
    #[arg(long, default_value_t = 0.0)]
    r1: f64,

    /// Reward credited to the second sub-interval.
    #[arg(long, default_value_t = 1.0)]
    r2: f64,

    #[arg(long, value_enum, default_value = "constant")]
    alpha_schedule: Schedule,

    /// Whether --passes counts contour passes or single steps.
    #[arg(long, value_enum, default_value = "pass")]
    interaction: Unit,

    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl From<Args> for RunConfig {
    fn from(a: Args) -> Self {
        RunConfig {
            contour_path: a.contour,
            alpha: a.alpha,
            gamma: a.gamma,
            reward_gamma: a.reward_gamma,
            epsilon_greedy: a.epsilon,
            obs_epsilon: a.obs_noise,
            passes: a.passes,
            seed: a.seed,
            reward_combine: match a.reward_combine {
                Combine::Paper => RewardCombine::Paper,
                Combine::DiscountedSecond => RewardCombine::DiscountedSecond,
            },
            r1: a.r1,
            r2: a.r2,
            alpha_schedule: match a.alpha_schedule {
                Schedule::Constant => AlphaSchedule::Constant,
                Schedule::InverseVisitCount => AlphaSchedule::InverseVisitCount,
            },
            interaction: match a.interaction {
                Unit::Pass => InteractionUnit::Pass,
                Unit::Step => InteractionUnit::Step,
            },
            out_dir: a.out,
        }
    }
}

fn main() -> ExitCode {
    let cfg = RunConfig::from(Args::parse());
    match run_experiment(&cfg) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
