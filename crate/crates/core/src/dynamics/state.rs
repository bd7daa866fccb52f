use std::io::Write;

use nalgebra::DVector;
use serde_json::json;

use crate::error::{Error, Result};
use crate::netlist::ReducedModel;
use crate::signal::{fmt_f64, Signal, TimeGrid};

/// Node fluxes, node charges and the coupling-capacitor momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub phi: DVector<f64>,
    pub q: DVector<f64>,
    pub q0: f64,
    /// Port voltage, when integrated as its own coordinate.
    pub v0: Option<f64>,
}

impl ReducedState {
    pub fn zeros(n: usize) -> Self {
        Self { phi: DVector::zeros(n), q: DVector::zeros(n), q0: 0.0, v0: None }
    }

    pub fn new(phi: DVector<f64>, q: DVector<f64>, q0: f64) -> Result<Self> {
        if phi.len() != q.len() {
            return Err(Error::Dimension { expected: phi.len(), found: q.len() });
        }
        Ok(Self { phi, q, q0, v0: None })
    }

    pub fn node_count(&self) -> usize {
        self.phi.len()
    }

    /// `V₀ = pᵀQ + Q₀/C_p`.
    pub fn port_voltage(&self, model: &ReducedModel) -> f64 {
        model.p.dot(&self.q) + self.q0 / model.c_p
    }

    /// Starts tracking `V₀`, initialised from the definitional identity.
    pub fn with_tracked_v0(mut self, model: &ReducedModel) -> Self {
        self.v0 = Some(self.port_voltage(model));
        self
    }

    pub(crate) fn check(&self, n: usize) -> Result<()> {
        if self.phi.len() != n {
            return Err(Error::Dimension { expected: n, found: self.phi.len() });
        }
        if self.q.len() != n {
            return Err(Error::Dimension { expected: n, found: self.q.len() });
        }
        Ok(())
    }

    pub(crate) fn pack(&self) -> DVector<f64> {
        let n = self.phi.len();
        let extra = if self.v0.is_some() { 2 } else { 1 };
        let mut x = DVector::zeros(2 * n + extra);
        x.rows_mut(0, n).copy_from(&self.phi);
        x.rows_mut(n, n).copy_from(&self.q);
        x[2 * n] = self.q0;
        if let Some(v) = self.v0 {
            x[2 * n + 1] = v;
        }
        x
    }

    pub(crate) fn unpack(x: &DVector<f64>, n: usize, track_v0: bool) -> Self {
        Self {
            phi: x.rows(0, n).into_owned(),
            q: x.rows(n, n).into_owned(),
            q0: x[2 * n],
            v0: track_v0.then(|| x[2 * n + 1]),
        }
    }
}

/// States sampled on a uniform grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<ReducedState>,
    pub integrator: String,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Flux of node `node` (1-based).
    pub fn flux(&self, node: usize) -> Result<Signal> {
        self.series(|s| s.phi[node - 1])
    }

    pub fn charge(&self, node: usize) -> Result<Signal> {
        self.series(|s| s.q[node - 1])
    }

    pub fn q0(&self) -> Result<Signal> {
        self.series(|s| s.q0)
    }

    /// Tracked `V₀` where present, the identity otherwise.
    pub fn v0(&self, model: &ReducedModel) -> Result<Signal> {
        self.series(|s| s.v0.unwrap_or_else(|| s.port_voltage(model)))
    }

    pub fn series(&self, f: impl Fn(&ReducedState) -> f64) -> Result<Signal> {
        Signal::new(self.grid, self.states.iter().map(f).collect())
    }

    /// CSV with header `t,phi_1..phi_N,q_1..q_N,q0,v0`.
    pub fn write_csv<W: Write>(&self, out: W, model: &ReducedModel) -> Result<()> {
        let n = model.node_count();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("phi_{i}")));
        header.extend((1..=n).map(|i| format!("q_{i}")));
        header.push("q0".into());
        header.push("v0".into());
        w.write_record(&header)?;
        for (t, s) in self.grid.times().zip(&self.states) {
            let mut row = vec![fmt_f64(t)];
            row.extend(s.phi.iter().map(|&v| fmt_f64(v)));
            row.extend(s.q.iter().map(|&v| fmt_f64(v)));
            row.push(fmt_f64(s.q0));
            row.push(fmt_f64(s.v0.unwrap_or_else(|| s.port_voltage(model))));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Metadata sidecar: model, time step and integrator.
    pub fn sidecar(&self, model: &ReducedModel) -> Result<serde_json::Value> {
        let model: serde_json::Value = serde_json::from_str(&model.to_json()?)?;
        Ok(json!({
            "model": model,
            "dt": self.grid.dt(),
            "t0": self.grid.t0(),
            "samples": self.grid.len(),
            "integrator": self.integrator,
            "warnings": self.warnings,
        }))
    }
}
