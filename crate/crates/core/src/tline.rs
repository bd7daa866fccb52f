//! Semi-infinite lossless line: parameters, d'Alembert waves and the
//! one-port (Thevenin) source seen at `x = 0`.

use std::io::Read;

use crate::error::{Error, Result};
use crate::signal::{interpolate, read_two_columns, uniform_grid_of, OutOfDomain, Signal, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineParams {
    /// Inductance per unit length.
    pub ell: f64,
    /// Capacitance per unit length.
    pub c_per_len: f64,
    pub v_p: f64,
    pub z_c: f64,
}

pub fn line_params(ell: f64, c_per_len: f64) -> Result<LineParams> {
    if !(ell > 0.0 && c_per_len > 0.0 && ell.is_finite() && c_per_len.is_finite()) {
        return Err(Error::validation(format!(
            "line constants must be positive (ell = {ell}, c = {c_per_len})"
        )));
    }
    Ok(LineParams { ell, c_per_len, v_p: 1.0 / (ell * c_per_len).sqrt(), z_c: (ell / c_per_len).sqrt() })
}

impl LineParams {
    /// Line with the given impedance and phase velocity.
    pub fn from_impedance(z_c: f64, v_p: f64) -> Result<Self> {
        if !(z_c > 0.0 && v_p > 0.0) {
            return Err(Error::validation("impedance and phase velocity must be positive"));
        }
        line_params(z_c / v_p, 1.0 / (z_c * v_p))
    }
}

/// Uniform samples of a function of `x` on `[0, (len-1)·dx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledProfile {
    dx: f64,
    values: Vec<f64>,
}

impl SampledProfile {
    pub fn new(dx: f64, values: Vec<f64>) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::validation(format!("profile spacing must be positive (dx = {dx})")));
        }
        if values.len() < 2 {
            return Err(Error::validation("profile needs at least two samples"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("non-finite profile value at x = {}", dx * i as f64)));
        }
        Ok(Self { dx, values })
    }

    pub fn from_fn(dx: f64, len: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(dx, (0..len).map(|i| f(dx * i as f64)).collect())
    }

    pub fn zeros(dx: f64, len: usize) -> Result<Self> {
        Self::new(dx, vec![0.0; len])
    }

    /// Two-column `(x, value)` CSV; `x` must start at 0 and be uniform.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let (xs, vs) = read_two_columns(input)?;
        if xs[0].abs() > 1e-12 * (xs[1] - xs[0]).abs() {
            return Err(Error::validation("profile must start at x = 0"));
        }
        let grid = uniform_grid_of(&xs)?;
        Self::new(grid.dt(), vs)
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn x_max(&self) -> f64 {
        self.dx * (self.values.len() - 1) as f64
    }

    fn locate(&self, x: f64, policy: OutOfDomain) -> Result<Option<f64>> {
        let hi = self.x_max();
        let slack = 1e-9 * self.dx;
        if x >= -slack && x <= hi + slack {
            return Ok(Some(x / self.dx));
        }
        match policy {
            OutOfDomain::ZeroExtend if x.is_finite() => Ok(None),
            _ => Err(Error::OutOfDomain { what: "x", value: x, lo: 0.0, hi }),
        }
    }

    pub fn value_at(&self, x: f64, policy: OutOfDomain) -> Result<f64> {
        Ok(self.locate(x, policy)?.map_or(0.0, |u| interpolate(&self.values, u)))
    }

    /// Central differences inside, one-sided at the ends, interpolated linearly.
    pub fn derivative_at(&self, x: f64, policy: OutOfDomain) -> Result<f64> {
        let Some(u) = self.locate(x, policy)? else { return Ok(0.0) };
        let n = self.values.len();
        let d = |i: usize| -> f64 {
            let v = &self.values;
            if i == 0 {
                (v[1] - v[0]) / self.dx
            } else if i == n - 1 {
                (v[n - 1] - v[n - 2]) / self.dx
            } else {
                (v[i + 1] - v[i - 1]) / (2.0 * self.dx)
            }
        };
        let u = u.clamp(0.0, (n - 1) as f64);
        let i = (u.floor() as usize).min(n - 2);
        let frac = u - i as f64;
        Ok(d(i) * (1.0 - frac) + d(i + 1) * frac)
    }
}

/// Initial flux and charge-density profiles of the line.
#[derive(Debug, Clone, PartialEq)]
pub struct LineInitialState {
    pub phi: SampledProfile,
    pub q: SampledProfile,
}

impl LineInitialState {
    pub fn new(phi: SampledProfile, q: SampledProfile) -> Self {
        Self { phi, q }
    }

    /// Line at rest on `[0, length]`.
    pub fn at_rest(length: f64, samples: usize) -> Result<Self> {
        let dx = length / (samples.max(2) - 1) as f64;
        Ok(Self { phi: SampledProfile::zeros(dx, samples.max(2))?, q: SampledProfile::zeros(dx, samples.max(2))? })
    }

    /// Flux at `x = 0`, which must equal the initial `Φ₀`.
    pub fn boundary_flux(&self) -> f64 {
        self.phi.values[0]
    }

    /// Largest `x` covered by both profiles.
    pub fn x_max(&self) -> f64 {
        self.phi.x_max().min(self.q.x_max())
    }
}

/// Backward (incoming) voltage wave at `x = 0`:
/// `v←(t) = q(v_p t)/(2c) + (v_p/2) φ_x(v_p t)`.
pub fn backward_wave(initial: &LineInitialState, params: &LineParams, t: f64, policy: OutOfDomain) -> Result<f64> {
    let x = params.v_p * t;
    let q = initial.q.value_at(x, policy)?;
    let phi_x = initial.phi.derivative_at(x, policy)?;
    Ok(q / (2.0 * params.c_per_len) + 0.5 * params.v_p * phi_x)
}

/// Forward (outgoing) voltage wave for `t ≤ 0`, fixed by the initial data:
/// `v→(t) = q(−v_p t)/(2c) − (v_p/2) φ_x(−v_p t)`.
pub fn forward_wave(initial: &LineInitialState, params: &LineParams, t: f64, policy: OutOfDomain) -> Result<f64> {
    let x = -params.v_p * t;
    let q = initial.q.value_at(x, policy)?;
    let phi_x = initial.phi.derivative_at(x, policy)?;
    Ok(q / (2.0 * params.c_per_len) - 0.5 * params.v_p * phi_x)
}

/// `e₀(t) = 2 v←(t)` sampled on `grid`.
pub fn thevenin_source(
    initial: &LineInitialState,
    params: &LineParams,
    grid: TimeGrid,
    policy: OutOfDomain,
) -> Result<Signal> {
    let samples = grid
        .times()
        .map(|t| backward_wave(initial, params, t, policy).map(|v| 2.0 * v))
        .collect::<Result<Vec<_>>>()?;
    Signal::new(grid, samples)
}

/// Voltage and current at `(x, t)` from the two travelling waves.
pub fn dalembert_eval(v_fwd: &Signal, v_bwd: &Signal, params: &LineParams, x: f64, t: f64) -> Result<(f64, f64)> {
    let f = v_fwd.value_at(t - x / params.v_p, OutOfDomain::Error)?;
    let b = v_bwd.value_at(t + x / params.v_p, OutOfDomain::Error)?;
    Ok((f + b, (f - b) / params.z_c))
}
