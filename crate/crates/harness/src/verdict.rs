use std::fmt;

use crate::output::fmt17;
use crate::HarnessError;

/// One line of the verdict file.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub id: String,
    pub pass: bool,
    pub measured: f64,
    pub tolerance: String,
}

impl Verdict {
    pub fn new(id: impl Into<String>, pass: bool, measured: f64, tolerance: impl Into<String>) -> Self {
        Verdict { id: id.into(), pass, measured, tolerance: tolerance.into() }
    }

    /// `measured < bound`.
    pub fn below(id: impl Into<String>, measured: f64, bound: f64) -> Self {
        Verdict::new(id, measured < bound, measured, format!("<{bound:e}"))
    }

    /// `measured <= bound`.
    pub fn at_most(id: impl Into<String>, measured: f64, bound: f64) -> Self {
        Verdict::new(id, measured <= bound, measured, format!("<={bound:e}"))
    }

    /// `measured >= bound`.
    pub fn at_least(id: impl Into<String>, measured: f64, bound: f64) -> Self {
        Verdict::new(id, measured >= bound, measured, format!(">={bound:e}"))
    }

    /// `|measured - center| <= half_width`.
    pub fn within(id: impl Into<String>, measured: f64, center: f64, half_width: f64) -> Self {
        Verdict::new(
            id,
            (measured - center).abs() <= half_width,
            measured,
            format!("{center}+-{half_width}"),
        )
    }

    /// The criterion this assertion belongs to, e.g. `C6` for `C6.r2`.
    pub fn criterion(&self) -> &str {
        self.id.split('.').next().unwrap_or(&self.id)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}",
            self.id,
            if self.pass { "pass" } else { "fail" },
            fmt17(self.measured),
            self.tolerance
        )
    }
}

pub fn verdict_file(verdicts: &[Verdict]) -> String {
    verdicts.iter().map(|v| format!("{v}\n")).collect()
}

pub fn parse_verdict_file(text: &str) -> Result<Vec<Verdict>, HarnessError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            if f.len() != 4 || !(f[1] == "pass" || f[1] == "fail") {
                return Err(HarnessError::Config(format!("malformed verdict line '{l}'")));
            }
            let measured = f[2]
                .parse()
                .map_err(|_| HarnessError::Config(format!("bad measured value in '{l}'")))?;
            Ok(Verdict::new(f[0], f[1] == "pass", measured, f[3]))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Absolute,
    Relative,
}

/// A sampled signal.
#[derive(Debug, Clone, Copy)]
pub struct Series<'a> {
    pub times: &'a [f64],
    pub values: &'a [f64],
}

impl<'a> Series<'a> {
    pub fn new(times: &'a [f64], values: &'a [f64]) -> Self {
        Series { times, values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub max_deviation: f64,
    pub argmax_time: f64,
    pub tolerance: f64,
    /// `max_deviation < tolerance`; equality fails.
    pub pass: bool,
}

impl Comparison {
    pub fn verdict(&self, id: impl Into<String>) -> Verdict {
        Verdict::new(id, self.pass, self.max_deviation, format!("<{:e}", self.tolerance))
    }
}

/// Largest deviation of `measured` from `reference` over `window` (inclusive).
/// Relative deviations are taken with respect to `reference`.
pub fn compare_channels(
    measured: Series,
    reference: Series,
    tolerance: f64,
    mode: Mode,
    window: (f64, f64),
) -> Result<Comparison, HarnessError> {
    if measured.times.len() != reference.times.len()
        || measured.values.len() != measured.times.len()
        || reference.values.len() != reference.times.len()
    {
        return Err(HarnessError::Grid("series lengths differ".into()));
    }
    if let Some((a, b)) = measured.times.iter().zip(reference.times).find(|(a, b)| (*a - *b).abs() > 1e-12 * (1.0 + a.abs())) {
        return Err(HarnessError::Grid(format!("time grids differ ({a} vs {b})")));
    }
    let mut max_deviation = 0.0;
    let mut argmax_time = f64::NAN;
    for ((t, m), r) in measured.times.iter().zip(measured.values).zip(reference.values) {
        if *t < window.0 || *t > window.1 {
            continue;
        }
        let d = match mode {
            Mode::Absolute => (m - r).abs(),
            Mode::Relative => (m - r).abs() / r.abs(),
        };
        if d.is_nan() {
            max_deviation = f64::INFINITY;
            argmax_time = *t;
            break;
        }
        if argmax_time.is_nan() || d > max_deviation {
            max_deviation = d;
            argmax_time = *t;
        }
    }
    if argmax_time.is_nan() {
        return Err(HarnessError::Grid(format!("window {window:?} contains no samples")));
    }
    Ok(Comparison { max_deviation, argmax_time, tolerance, pass: max_deviation < tolerance })
}
