//! Uniformly sampled time series and their CSV representation.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// What to do when a sampled function is evaluated outside its grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutOfDomain {
    #[default]
    Error,
    ZeroExtend,
}

/// Uniform grid `t0, t0 + dt, ..., t0 + (len - 1) dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    dt: f64,
    len: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, len: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || !t0.is_finite() {
            return Err(Error::validation(format!("time grid needs finite dt > 0 (dt = {dt})")));
        }
        if len == 0 {
            return Err(Error::validation("time grid must contain at least one sample"));
        }
        Ok(Self { t0, dt, len })
    }

    /// Grid on `[0, t_end]` with `steps` intervals.
    pub fn span(t_end: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(t_end > 0.0) {
            return Err(Error::validation("span needs t_end > 0 and at least one step"));
        }
        Self::new(0.0, t_end / steps as f64, steps + 1)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + self.dt * i as f64
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.time(i))
    }

    /// Same spacing, first `len` samples.
    pub fn truncated(&self, len: usize) -> Self {
        Self { len: len.min(self.len).max(1), ..*self }
    }
}

/// Record left behind by [`crate::inversion::normalize_max_abs`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub divisor: f64,
    pub at: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    grid: TimeGrid,
    samples: Vec<f64>,
    pub normalization: Option<Normalization>,
}

impl Signal {
    pub fn new(grid: TimeGrid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::Dimension { expected: grid.len(), found: samples.len() });
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: grid.time(i) });
        }
        Ok(Self { grid, samples, normalization: None })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let samples = grid.times().map(f).collect();
        Self::new(grid, samples)
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self { grid, samples: vec![0.0; grid.len()], normalization: None }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.grid.times()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.times().zip(self.samples.iter().copied())
    }

    /// Linear interpolation between samples.
    pub fn value_at(&self, t: f64, policy: OutOfDomain) -> Result<f64> {
        let lo = self.grid.t0();
        let hi = self.grid.t_end();
        let slack = 1e-9 * self.grid.dt();
        if !(t >= lo - slack && t <= hi + slack) {
            return match policy {
                OutOfDomain::ZeroExtend if t.is_finite() => Ok(0.0),
                _ => Err(Error::OutOfDomain { what: "t", value: t, lo, hi }),
            };
        }
        Ok(interpolate(&self.samples, (t - lo) / self.grid.dt()))
    }

    /// Largest absolute sample and the time where it occurs.
    pub fn max_abs(&self) -> (f64, f64) {
        self.iter()
            .fold((0.0, self.grid.t0()), |(m, tm), (t, v)| if v.abs() > m { (v.abs(), t) } else { (m, tm) })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.iter().map(|&v| f(v)).collect(),
            normalization: None,
        }
    }

    /// Two-column CSV with header `t,<name>`.
    pub fn write_csv<W: Write>(&self, out: W, name: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", name])?;
        for (t, v) in self.iter() {
            w.write_record([fmt_f64(t), fmt_f64(v)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a two-column `(t, value)` CSV; the grid must be uniform.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let (ts, vs) = read_two_columns(input)?;
        let grid = uniform_grid_of(&ts)?;
        Self::new(grid, vs)
    }
}

/// Linear interpolation at fractional index `u` (clamped to the sample range).
pub(crate) fn interpolate(samples: &[f64], u: f64) -> f64 {
    let last = samples.len() - 1;
    if last == 0 {
        return samples[0];
    }
    let u = u.clamp(0.0, last as f64);
    let i = (u.floor() as usize).min(last - 1);
    let frac = u - i as f64;
    samples[i] * (1.0 - frac) + samples[i + 1] * frac
}

/// 17 significant digits; round-trips every f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Parses a headerless or headed two-column numeric CSV.
pub(crate) fn read_two_columns<R: Read>(input: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 1);
        if rec.len() < 2 {
            return Err(Error::Parse { line, message: "expected two columns".into() });
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(x), Ok(y)) => {
                xs.push(x);
                ys.push(y);
            }
            // header row
            _ if xs.is_empty() && i == 0 => continue,
            _ => return Err(Error::Parse { line, message: format!("not a number pair: {:?}", rec) }),
        }
    }
    if xs.len() < 2 {
        return Err(Error::validation("need at least two samples"));
    }
    Ok((xs, ys))
}

pub(crate) fn uniform_grid_of(xs: &[f64]) -> Result<TimeGrid> {
    let dt = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    for (i, &x) in xs.iter().enumerate() {
        let expect = xs[0] + dt * i as f64;
        if (x - expect).abs() > 1e-6 * dt {
            return Err(Error::validation(format!("samples are not uniformly spaced near x = {x}")));
        }
    }
    TimeGrid::new(xs[0], dt, xs.len())
}
