//! Experiment runner and output files.
//!
//! Grids are written interval-major: one row per interval 1..7, one column per
//! pitch C..B. Every number is printed with fixed precision, so identical
//! configurations produce byte-identical files.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::env::{EnvConfig, ObservationModel, RewardCombine};
use crate::error::{Error, Result};
use crate::learner::{train, AlphaSchedule, Grid, InteractionUnit, LearnerConfig, QTable, TrainReport};
use crate::pitch::{parse_contour, Contour, IntervalNumber, PitchClass, NUM_INTERVALS, NUM_PITCHES};

/// Stand-in pattern used when no contour file is given.
pub const DEFAULT_CONTOUR: &str = include_str!("../examples/contour.txt");

pub const QTABLE_CSV: &str = "qtable.csv";
pub const QTABLE_PGM: &str = "qtable.pgm";
pub const CONTOUR_MASK_CSV: &str = "contour_mask.csv";
pub const SUMMARY_JSON: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    /// `None` selects [`DEFAULT_CONTOUR`].
    pub contour_path: Option<PathBuf>,
    pub alpha: f64,
    pub gamma: f64,
    /// Discount inside the reward combination; follows `gamma` when unset.
    pub reward_gamma: Option<f64>,
    pub epsilon_greedy: f64,
    pub obs_epsilon: f64,
    pub passes: usize,
    pub seed: u64,
    pub reward_combine: RewardCombine,
    pub r1: f64,
    pub r2: f64,
    pub alpha_schedule: AlphaSchedule,
    pub interaction: InteractionUnit,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            contour_path: None,
            alpha: 0.4,
            gamma: 0.5,
            reward_gamma: None,
            epsilon_greedy: 0.1,
            obs_epsilon: 0.0,
            passes: 20,
            seed: 42,
            reward_combine: RewardCombine::Paper,
            r1: 0.0,
            r2: 1.0,
            alpha_schedule: AlphaSchedule::Constant,
            interaction: InteractionUnit::Pass,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load_contour(&self) -> Result<Contour> {
        let text = match &self.contour_path {
            Some(path) => fs::read_to_string(path)
                .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))?,
            None => DEFAULT_CONTOUR.to_string(),
        };
        Ok(parse_contour(&text)?)
    }

    pub fn env_config(&self, contour: Contour) -> Result<EnvConfig> {
        let cfg = EnvConfig {
            contour,
            obs: ObservationModel::new(self.obs_epsilon)?,
            r1_base: self.r1,
            r2_base: self.r2,
            gamma: self.reward_gamma.unwrap_or(self.gamma),
            combine: self.reward_combine,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn learner_config(&self) -> LearnerConfig {
        LearnerConfig {
            alpha: self.alpha,
            gamma: self.gamma,
            epsilon_greedy: self.epsilon_greedy,
            passes: self.passes,
            seed: self.seed,
            alpha_schedule: self.alpha_schedule,
            interaction: self.interaction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub contour_path: Option<String>,
    pub contour: String,
    pub alpha: f64,
    pub gamma: f64,
    pub reward_gamma: f64,
    pub epsilon_greedy: f64,
    pub obs_epsilon: f64,
    pub passes: usize,
    pub seed: u64,
    pub reward_combine: RewardCombine,
    pub r1: f64,
    pub r2: f64,
    pub alpha_schedule: AlphaSchedule,
    pub interaction: InteractionUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub config: ResolvedConfig,
    pub pass_returns: Vec<f64>,
    pub macro_steps: u64,
    pub contour_cells: usize,
    pub nonzero_cells: usize,
    pub nonzero_non_contour_cells: usize,
    pub mean_belief_true_mass: f64,
}

impl Summary {
    pub fn new(cfg: &RunConfig, env: &EnvConfig, report: &TrainReport) -> Self {
        let mass = &report.belief_true_mass;
        Self {
            config: ResolvedConfig {
                contour_path: cfg.contour_path.as_ref().map(|p| p.display().to_string()),
                contour: env.contour.to_string(),
                alpha: cfg.alpha,
                gamma: cfg.gamma,
                reward_gamma: env.gamma,
                epsilon_greedy: cfg.epsilon_greedy,
                obs_epsilon: cfg.obs_epsilon,
                passes: cfg.passes,
                seed: cfg.seed,
                reward_combine: cfg.reward_combine,
                r1: env.r1_base,
                r2: env.r2_base,
                alpha_schedule: cfg.alpha_schedule,
                interaction: cfg.interaction,
            },
            pass_returns: report.pass_returns.clone(),
            macro_steps: report.macro_steps,
            contour_cells: report.contour_mask.iter().flatten().filter(|&&m| m).count(),
            nonzero_cells: report.nonzero_cells(),
            nonzero_non_contour_cells: report.nonzero_non_contour_cells(),
            mean_belief_true_mass: if mass.is_empty() {
                0.0
            } else {
                mass.iter().sum::<f64>() / mass.len() as f64
            },
        }
    }
}

fn write_header<W: Write>(sink: &mut W) -> io::Result<()> {
    write!(sink, "interval")?;
    for p in PitchClass::all() {
        write!(sink, ",{p}")?;
    }
    writeln!(sink)
}

pub fn write_qtable_csv<W: Write>(q: &QTable, sink: &mut W) -> io::Result<()> {
    write_header(sink)?;
    for k in IntervalNumber::all() {
        write!(sink, "{}", k.number())?;
        for p in PitchClass::all() {
            let v = q.get(k, p);
            // no "-0.000000"
            let v = if v == 0.0 { 0.0 } else { v };
            write!(sink, ",{v:.6}")?;
        }
        writeln!(sink)?;
    }
    Ok(())
}

/// Inverse of [`write_qtable_csv`], accurate to the printed precision.
pub fn read_qtable_csv(text: &str) -> Result<QTable> {
    let mut lines = text.lines();
    let mut expected_header = Vec::new();
    write_header(&mut expected_header).expect("writing to a Vec");
    let header = lines.next().ok_or_else(|| Error::Table("empty table".into()))?;
    if header.as_bytes() != expected_header.trim_ascii_end() {
        return Err(Error::Table(format!("unexpected header '{header}'")));
    }
    let mut grid: Grid<f64> = [[0.0; NUM_PITCHES]; NUM_INTERVALS];
    for (row, k) in IntervalNumber::all().enumerate() {
        let line = lines
            .next()
            .ok_or_else(|| Error::Table(format!("missing row for interval {}", k.number())))?;
        let mut fields = line.split(',');
        if fields.next() != Some(k.number().to_string().as_str()) {
            return Err(Error::Table(format!("row {} should be labelled {}", row + 2, k.number())));
        }
        for (col, cell) in grid[row].iter_mut().enumerate() {
            let field = fields
                .next()
                .ok_or_else(|| Error::Table(format!("row {} is missing column {}", row + 2, col + 2)))?;
            *cell = field
                .parse()
                .map_err(|_| Error::Table(format!("'{field}' is not a number")))?;
        }
        if fields.next().is_some() {
            return Err(Error::Table(format!("row {} has extra columns", row + 2)));
        }
    }
    if lines.any(|l| !l.is_empty()) {
        return Err(Error::Table("trailing rows".into()));
    }
    Ok(QTable::from_grid(grid))
}

/// Gray levels `round(255 · q / max q)`, half rounding up; nonpositive maxima
/// and negative cells map to 0.
pub fn pgm_levels(q: &QTable) -> Grid<u8> {
    let max = q.max_value();
    let mut out = [[0u8; NUM_PITCHES]; NUM_INTERVALS];
    if max <= 0.0 {
        return out;
    }
    for (k, p, v) in q.iter() {
        let level = (255.0 * v.max(0.0) / max + 0.5).floor();
        out[k.index()][p.index()] = level.min(255.0) as u8;
    }
    out
}

/// Plain P2 graymap, interval 1 on the top row.
pub fn write_pgm<W: Write>(q: &QTable, sink: &mut W) -> io::Result<()> {
    writeln!(sink, "P2")?;
    writeln!(sink, "{NUM_PITCHES} {NUM_INTERVALS}")?;
    writeln!(sink, "255")?;
    for row in pgm_levels(q) {
        let line: Vec<String> = row.iter().map(u8::to_string).collect();
        writeln!(sink, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn write_contour_mask<W: Write>(report: &TrainReport, sink: &mut W) -> io::Result<()> {
    write_header(sink)?;
    for (k, row) in IntervalNumber::all().zip(&report.contour_mask) {
        write!(sink, "{}", k.number())?;
        for &m in row {
            write!(sink, ",{}", u8::from(m))?;
        }
        writeln!(sink)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: TrainReport,
    pub summary: Summary,
    pub files: Vec<PathBuf>,
}

/// Rendered outputs, in the order they are written.
pub fn render(cfg: &RunConfig, env: &EnvConfig, report: &TrainReport) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let mut csv = Vec::new();
    write_qtable_csv(&report.qtable, &mut csv)?;
    let mut pgm = Vec::new();
    write_pgm(&report.qtable, &mut pgm)?;
    let mut mask = Vec::new();
    write_contour_mask(report, &mut mask)?;
    let mut json = serde_json::to_vec_pretty(&Summary::new(cfg, env, report))?;
    json.push(b'\n');
    Ok(vec![
        (QTABLE_CSV, csv),
        (QTABLE_PGM, pgm),
        (CONTOUR_MASK_CSV, mask),
        (SUMMARY_JSON, json),
    ])
}

fn publish(out_dir: &Path, files: &[(&'static str, Vec<u8>)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let staging = tempfile::Builder::new().prefix(".staging-").tempdir_in(out_dir)?;
    for (name, bytes) in files {
        fs::write(staging.path().join(name), bytes)?;
    }
    let mut written = Vec::with_capacity(files.len());
    for (name, _) in files {
        let dst = out_dir.join(name);
        fs::rename(staging.path().join(name), &dst)?;
        written.push(dst);
    }
    Ok(written)
}

/// Train and write the four output files into `cfg.out_dir`.
///
/// Nothing is written unless parsing, configuration and training all succeed.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutcome> {
    let contour = cfg.load_contour()?;
    let env = cfg.env_config(contour)?;
    let report = train(&env, &cfg.learner_config())?;
    let rendered = render(cfg, &env, &report)?;
    let files = publish(&cfg.out_dir, &rendered)?;
    Ok(RunOutcome {
        summary: Summary::new(cfg, &env, &report),
        report,
        files,
    })
}
