//! Diatonic pitch classes and interval numbers.
//!
//! Pitches are the seven natural letter names taken modulo the octave and
//! intervals are diatonic sizes from unison (1) to seventh (7). All intervals
//! ascend. Interval numbers compose with an offset of one: a second on top of
//! a second is a third.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ParseError, Result};

pub const NUM_PITCHES: usize = 7;
pub const NUM_INTERVALS: usize = 7;

const LETTERS: [char; NUM_PITCHES] = ['C', 'D', 'E', 'F', 'G', 'A', 'B'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PitchClass(u8);

impl PitchClass {
    pub const C: Self = Self(0);
    pub const D: Self = Self(1);
    pub const E: Self = Self(2);
    pub const F: Self = Self(3);
    pub const G: Self = Self(4);
    pub const A: Self = Self(5);
    pub const B: Self = Self(6);

    pub fn new(index: usize) -> Option<Self> {
        (index < NUM_PITCHES).then(|| Self(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn letter(self) -> char {
        LETTERS[self.index()]
    }

    pub fn from_letter(letter: char) -> Option<Self> {
        LETTERS.iter().position(|&l| l == letter).and_then(Self::new)
    }

    /// All seven pitch classes, C first.
    pub fn all() -> impl Iterator<Item = Self> {
        (0..NUM_PITCHES).map(|i| Self(i as u8))
    }

    /// Move up by `interval` diatonic steps, wrapping at the octave.
    pub fn advance(self, interval: IntervalNumber) -> Self {
        Self(((self.index() + interval.steps()) % NUM_PITCHES) as u8)
    }

    /// The ascending interval that takes `self` to `to`.
    pub fn interval_to(self, to: PitchClass) -> IntervalNumber {
        let steps = (to.index() + NUM_PITCHES - self.index()) % NUM_PITCHES;
        IntervalNumber(steps as u8 + 1)
    }
}

impl fmt::Display for PitchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Diatonic interval size, 1 (unison) through 7 (seventh).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IntervalNumber(u8);

impl IntervalNumber {
    pub const UNISON: Self = Self(1);

    pub fn new(number: usize) -> Option<Self> {
        (1..=NUM_INTERVALS).contains(&number).then(|| Self(number as u8))
    }

    pub fn number(self) -> usize {
        self.0 as usize
    }

    /// Zero-based row index into interval-major grids.
    pub fn index(self) -> usize {
        self.number() - 1
    }

    fn steps(self) -> usize {
        self.number() - 1
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (1..=NUM_INTERVALS).map(|n| Self(n as u8))
    }

    /// Stack `other` on top of `self`; wraps past the octave back to unison.
    pub fn compose(self, other: IntervalNumber) -> IntervalNumber {
        Self(((self.steps() + other.steps()) % NUM_INTERVALS) as u8 + 1)
    }

    /// Every ordered split `(i, j)` with `i + j = k + 1`, ascending in `i`.
    pub fn decompositions(self) -> Vec<Decomposition> {
        let k = self.number();
        (1..=k)
            .map(|i| Decomposition {
                first: Self(i as u8),
                second: Self((k + 1 - i) as u8),
            })
            .collect()
    }

    fn ordinal(self) -> &'static str {
        ["1st", "2nd", "3rd", "4th", "5th", "6th", "7th"][self.index()]
    }
}

impl fmt::Display for IntervalNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.ordinal())
    }
}

pub fn advance(p: PitchClass, k: IntervalNumber) -> PitchClass {
    p.advance(k)
}

pub fn compose(i: IntervalNumber, j: IntervalNumber) -> IntervalNumber {
    i.compose(j)
}

pub fn interval_between(p: PitchClass, q: PitchClass) -> IntervalNumber {
    p.interval_to(q)
}

pub fn decompositions(k: IntervalNumber) -> Vec<Decomposition> {
    k.decompositions()
}

/// An action: realize a commanded interval as two stacked sub-intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Decomposition {
    pub first: IntervalNumber,
    pub second: IntervalNumber,
}

impl Decomposition {
    pub fn new(first: IntervalNumber, second: IntervalNumber) -> Self {
        Self { first, second }
    }

    /// The interval this pair realizes.
    pub fn total(self) -> IntervalNumber {
        self.first.compose(self.second)
    }
}

impl fmt::Display for Decomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.first.number(), self.second.number())
    }
}

/// A training pattern: a start pitch followed by commanded ascending intervals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contour {
    start: PitchClass,
    commands: Vec<IntervalNumber>,
}

impl Contour {
    pub fn new(start: PitchClass, commands: Vec<IntervalNumber>) -> Self {
        Self { start, commands }
    }

    pub fn from_pitches(pitches: &[PitchClass]) -> Option<Self> {
        let (&start, _) = pitches.split_first()?;
        let commands = pitches.windows(2).map(|w| w[0].interval_to(w[1])).collect();
        Some(Self { start, commands })
    }

    pub fn start(&self) -> PitchClass {
        self.start
    }

    pub fn commands(&self) -> &[IntervalNumber] {
        &self.commands
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    /// `p_0 .. p_m`, one longer than the command list.
    pub fn pitches(&self) -> Vec<PitchClass> {
        let mut out = Vec::with_capacity(self.commands.len() + 1);
        let mut p = self.start;
        out.push(p);
        for &k in &self.commands {
            p = p.advance(k);
            out.push(p);
        }
        out
    }

    /// `(p_t, k_{t+1})` for every step of the pattern, in order.
    pub fn cells(&self) -> impl Iterator<Item = (PitchClass, IntervalNumber)> + '_ {
        self.pitches().into_iter().zip(self.commands.iter().copied())
    }
}

/// Intervals form, e.g. `C: 3 2 6`.
impl fmt::Display for Contour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.start)?;
        for k in &self.commands {
            write!(f, " {}", k.number())?;
        }
        Ok(())
    }
}

impl FromStr for Contour {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        parse_contour(s)
    }
}

struct Token<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        column,
        message: message.into(),
    }
}

fn tokens(line_no: usize, line: &str, offset: usize) -> impl Iterator<Item = Token<'_>> {
    line.split_whitespace().map(move |text| {
        let byte = text.as_ptr() as usize - line.as_ptr() as usize;
        Token {
            text,
            line: line_no,
            column: offset + line[..byte].chars().count() + 1,
        }
    })
}

fn parse_pitch(tok: &Token<'_>) -> Result<PitchClass, ParseError> {
    let mut chars = tok.text.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => PitchClass::from_letter(c).ok_or_else(|| {
            err(tok.line, tok.column, format!("'{c}' is not a natural pitch (expected one of C D E F G A B)"))
        }),
        _ => Err(err(tok.line, tok.column, format!("'{}' is not a natural pitch", tok.text))),
    }
}

fn parse_interval(tok: &Token<'_>) -> Result<IntervalNumber, ParseError> {
    tok.text
        .parse::<usize>()
        .ok()
        .and_then(IntervalNumber::new)
        .ok_or_else(|| err(tok.line, tok.column, format!("interval '{}' is outside 1..7", tok.text)))
}

/// Parse a contour in notes form (`C E F D`) or intervals form (`C: 3 2 6`).
///
/// Blank lines and lines starting with `#` are ignored. Either form may
/// continue over several lines. Line and column numbers are 1-based.
pub fn parse_contour(text: &str) -> Result<Contour, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| {
            let t = l.trim_start();
            !t.is_empty() && !t.starts_with('#')
        });

    let Some((first_no, first)) = lines.next() else {
        return Err(err(1, 1, "empty contour"));
    };

    if let Some(colon) = first.find(':') {
        let head: Vec<_> = tokens(first_no, &first[..colon], 0).collect();
        let start = match head.as_slice() {
            [tok] => parse_pitch(tok)?,
            [] => return Err(err(first_no, colon + 1, "missing start pitch before ':'")),
            [_, extra, ..] => {
                return Err(err(extra.line, extra.column, "expected a single start pitch before ':'"))
            }
        };
        let tail = &first[colon + 1..];
        let offset = first[..colon + 1].chars().count();
        let mut commands = Vec::new();
        for tok in tokens(first_no, tail, offset).chain(lines.flat_map(|(n, l)| tokens(n, l, 0))) {
            commands.push(parse_interval(&tok)?);
        }
        if commands.is_empty() {
            let column = first.chars().count() + 1;
            return Err(err(first_no, column, "contour has no interval commands"));
        }
        Ok(Contour::new(start, commands))
    } else {
        let mut pitches = Vec::new();
        for tok in tokens(first_no, first, 0).chain(lines.flat_map(|(n, l)| tokens(n, l, 0))) {
            if tok.text.contains(':') {
                return Err(err(tok.line, tok.column, "':' is only allowed after the start pitch"));
            }
            pitches.push(parse_pitch(&tok)?);
        }
        if pitches.len() < 2 {
            let column = first.chars().count() + 1;
            return Err(err(first_no, column, "contour needs at least two notes"));
        }
        Ok(Contour::from_pitches(&pitches).expect("nonempty pitch list"))
    }
}
