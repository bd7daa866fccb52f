//! Finite LC-ladder model of the line attached to the full circuit: an
//! independent, strictly Hamiltonian oracle for the reduced one-port model.
//!
//! Coordinates are ordered `[Φ₁..Φ_N, Φ₀, φ₀..φ_{n−1}]`. Node `Φ₀` carries only
//! the coupling capacitor; a half-section inductor `ℓΔx/2` joins it to the first
//! line node at `x = Δx/2`, and line nodes at `(k + ½)Δx` carry `cΔx` each and are
//! joined by `ℓΔx`. The far end is open. Momenta are `P = K_c Φ̇`, so the circuit
//! block of `P` is the reduced model's `Q` and the `Φ₀` entry is `Q₀`.

use nalgebra::{DMatrix, DVector};

use super::state::{ReducedState, Trajectory};
use crate::error::{Error, Result};
use crate::netlist::{build_capacitance_matrix, potential_gradient, reduce_ground, CircuitTopology};
use crate::signal::{OutOfDomain, TimeGrid};
use crate::tline::{LineInitialState, LineParams};

#[derive(Debug, Clone)]
pub struct LadderSystem {
    topology: CircuitTopology,
    line: LineParams,
    n_sections: usize,
    dx: f64,
    port_inv: DMatrix<f64>,
    port_cap: DMatrix<f64>,
    c_node: f64,
    l_half: f64,
    l_section: f64,
}

/// Node fluxes and canonical momenta of the ladder system.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderState {
    pub phi: Vec<f64>,
    pub p: Vec<f64>,
}

impl LadderSystem {
    pub fn new(line: LineParams, n_sections: usize, length: f64, topology: &CircuitTopology) -> Result<Self> {
        if n_sections < 2 {
            return Err(Error::validation("ladder needs at least two sections"));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::validation(format!("line length must be positive (got {length})")));
        }
        topology.check_active()?;
        let n = topology.node_count();
        let cb = reduce_ground(&build_capacitance_matrix(topology), topology.ground())?;
        let c_c = topology.coupling();
        let mut port_cap = DMatrix::zeros(n + 1, n + 1);
        port_cap.view_mut((0, 0), (n, n)).copy_from(&cb);
        port_cap[(0, 0)] += c_c;
        port_cap[(0, n)] = -c_c;
        port_cap[(n, 0)] = -c_c;
        port_cap[(n, n)] = c_c;
        let port_inv = port_cap
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular("port capacitance block is not positive definite".into()))?
            .inverse();
        let dx = length / n_sections as f64;
        Ok(Self {
            topology: topology.clone(),
            line,
            n_sections,
            dx,
            port_inv,
            port_cap,
            c_node: line.c_per_len * dx,
            l_half: 0.5 * line.ell * dx,
            l_section: line.ell * dx,
        })
    }

    pub fn n_sections(&self) -> usize {
        self.n_sections
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn length(&self) -> f64 {
        self.dx * self.n_sections as f64
    }

    pub fn line(&self) -> &LineParams {
        &self.line
    }

    fn circuit_nodes(&self) -> usize {
        self.topology.node_count()
    }

    /// Number of flux coordinates.
    pub fn dim(&self) -> usize {
        self.circuit_nodes() + 1 + self.n_sections
    }

    /// Capacitance block of the circuit nodes and `Φ₀`, and its inverse.
    pub fn port_block(&self) -> (&DMatrix<f64>, &DMatrix<f64>) {
        (&self.port_cap, &self.port_inv)
    }

    /// Ladder state matching a reduced-model initial state and a line profile
    /// (`None` = line at rest). Line nodes sample the profiles at `(k + ½)Δx`.
    pub fn initial_state(&self, circuit: &ReducedState, line: Option<&LineInitialState>) -> Result<LadderState> {
        let n = self.circuit_nodes();
        circuit.check(n)?;
        let mut phi = vec![0.0; self.dim()];
        let mut p = vec![0.0; self.dim()];
        phi[..n].copy_from_slice(circuit.phi.as_slice());
        p[..n].copy_from_slice(circuit.q.as_slice());
        p[n] = circuit.q0;
        if let Some(init) = line {
            phi[n] = init.boundary_flux();
            for k in 0..self.n_sections {
                let x = (k as f64 + 0.5) * self.dx;
                phi[n + 1 + k] = init.phi.value_at(x, OutOfDomain::Error)?;
                p[n + 1 + k] = init.q.value_at(x, OutOfDomain::Error)? * self.dx;
            }
        }
        Ok(LadderState { phi, p })
    }

    /// `Φ̇ = K_c⁻¹ P`.
    pub fn velocity(&self, p: &[f64], out: &mut [f64]) {
        let n = self.circuit_nodes();
        for i in 0..=n {
            out[i] = (0..=n).map(|j| self.port_inv[(i, j)] * p[j]).sum();
        }
        for k in n + 1..self.dim() {
            out[k] = p[k] / self.c_node;
        }
    }

    /// `−∂U/∂Φ`.
    pub fn force(&self, phi: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.circuit_nodes();
        let g = potential_gradient(&self.topology, &phi[..n])?;
        for i in 0..n {
            out[i] = -g[i];
        }
        for v in out[n..].iter_mut() {
            *v = 0.0;
        }
        let i0 = (phi[n] - phi[n + 1]) / self.l_half;
        out[n] -= i0;
        out[n + 1] += i0;
        for k in n + 1..self.dim() - 1 {
            let i = (phi[k] - phi[k + 1]) / self.l_section;
            out[k] -= i;
            out[k + 1] += i;
        }
        Ok(())
    }

    pub fn energy(&self, s: &LadderState) -> Result<f64> {
        let n = self.circuit_nodes();
        let mut v = vec![0.0; self.dim()];
        self.velocity(&s.p, &mut v);
        let kinetic: f64 = 0.5 * s.p.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        let mut u = self.topology.potential_energy(&s.phi[..n])?;
        u += (s.phi[n] - s.phi[n + 1]).powi(2) / (2.0 * self.l_half);
        for k in n + 1..self.dim() - 1 {
            u += (s.phi[k] - s.phi[k + 1]).powi(2) / (2.0 * self.l_section);
        }
        Ok(kinetic + u)
    }

    /// Upper bound on `ω_max²` from the max-row-sum norm of `K_c⁻¹K`.
    pub fn max_frequency_sq(&self) -> f64 {
        let n = self.circuit_nodes();
        let dim = self.dim();
        let mut row = vec![0.0; dim];
        let stiff = self.topology.inductive_stiffness();
        for i in 0..n {
            row[i] = stiff.row(i).iter().map(|v| v.abs()).sum();
        }
        for j in self.topology.junctions() {
            let k = 2.0 * j.e_j / (j.phi0 * j.phi0);
            for node in [j.a, j.b] {
                if node <= n {
                    row[node - 1] += k;
                }
            }
        }
        row[n] = 2.0 / self.l_half;
        for k in n + 1..dim {
            let left = if k == n + 1 { 1.0 / self.l_half } else { 1.0 / self.l_section };
            let right = if k + 1 < dim { 1.0 / self.l_section } else { 0.0 };
            row[k] = 2.0 * (left + right);
        }
        let mut bound = 0.0_f64;
        for i in 0..=n {
            let s: f64 = (0..=n).map(|m| self.port_inv[(i, m)].abs() * row[m]).sum();
            bound = bound.max(s);
        }
        for k in n + 1..dim {
            bound = bound.max(row[k] / self.c_node);
        }
        bound
    }

    /// Largest stable leapfrog step scaled by `safety`.
    pub fn stable_dt(&self, safety: f64) -> f64 {
        safety * 2.0 / self.max_frequency_sq().sqrt()
    }

    /// One kick-drift-kick step.
    pub fn step(&self, s: &mut LadderState, h: f64, scratch: &mut [f64]) -> Result<()> {
        self.force(&s.phi, scratch)?;
        for (p, f) in s.p.iter_mut().zip(scratch.iter()) {
            *p += 0.5 * h * f;
        }
        self.velocity(&s.p, scratch);
        for (x, v) in s.phi.iter_mut().zip(scratch.iter()) {
            *x += h * v;
        }
        self.force(&s.phi, scratch)?;
        for (p, f) in s.p.iter_mut().zip(scratch.iter()) {
            *p += 0.5 * h * f;
        }
        Ok(())
    }

    /// Dense stiffness matrix `K` (linear elements only).
    pub fn stiffness_matrix(&self) -> Result<DMatrix<f64>> {
        if !self.topology.is_linear() {
            return Err(Error::Nonlinear);
        }
        let n = self.circuit_nodes();
        let dim = self.dim();
        let mut k = DMatrix::zeros(dim, dim);
        k.view_mut((0, 0), (n, n)).copy_from(&self.topology.inductive_stiffness());
        let mut link = |a: usize, b: usize, l: f64| {
            k[(a, a)] += 1.0 / l;
            k[(b, b)] += 1.0 / l;
            k[(a, b)] -= 1.0 / l;
            k[(b, a)] -= 1.0 / l;
        };
        link(n, n + 1, self.l_half);
        for j in n + 1..dim - 1 {
            link(j, j + 1, self.l_section);
        }
        Ok(k)
    }

    /// Dense `K_c⁻¹`.
    pub fn inverse_capacitance(&self) -> DMatrix<f64> {
        let n = self.circuit_nodes();
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        m.view_mut((0, 0), (n + 1, n + 1)).copy_from(&self.port_inv);
        for k in n + 1..self.dim() {
            m[(k, k)] = 1.0 / self.c_node;
        }
        m
    }

    /// Matrix of one leapfrog step acting on `[Φ; P]`.
    pub fn one_step_matrix(&self, h: f64) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let k = self.stiffness_matrix()?;
        let kinv = self.inverse_capacitance();
        let mut kick = DMatrix::identity(2 * d, 2 * d);
        kick.view_mut((d, 0), (d, d)).copy_from(&(&k * (-0.5 * h)));
        let mut drift = DMatrix::identity(2 * d, 2 * d);
        drift.view_mut((0, d), (d, d)).copy_from(&(&kinv * h));
        Ok(&kick * &drift * &kick)
    }
}

impl LadderState {
    pub fn packed(&self) -> DVector<f64> {
        DVector::from_iterator(self.phi.len() * 2, self.phi.iter().chain(&self.p).copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderOptions {
    /// Fraction of the stability limit used for the internal step.
    pub safety: f64,
    /// Internal step upper bound; the stability limit applies regardless.
    pub max_dt: Option<f64>,
    /// Relative energy drift that aborts the run.
    pub drift_limit: f64,
    /// Require at least this many sections.
    pub min_sections: usize,
}

impl Default for LadderOptions {
    fn default() -> Self {
        Self { safety: 0.5, max_dt: None, drift_limit: 0.01, min_sections: 100 }
    }
}

#[derive(Debug, Clone)]
pub struct LadderRun {
    pub trajectory: Trajectory,
    /// Largest `|E(t) − E(0)| / |E(0)|` over the output samples.
    pub energy_drift: f64,
    pub energies: Vec<f64>,
    pub dt: f64,
}

/// Simulates the ladder + circuit system and reports the circuit observables.
pub fn ladder_oracle(
    line: LineParams,
    n_sections: usize,
    length: f64,
    topology: &CircuitTopology,
    initial: &ReducedState,
    line_initial: Option<&LineInitialState>,
    grid: TimeGrid,
    opts: LadderOptions,
) -> Result<LadderRun> {
    if n_sections < opts.min_sections {
        return Err(Error::validation(format!(
            "ladder needs at least {} sections (got {n_sections})",
            opts.min_sections
        )));
    }
    let span = grid.t_end() - grid.t0();
    let min_length = 0.5 * span * line.v_p;
    if !(length > min_length) {
        return Err(Error::EchoWindow { t_max: span, length, min_length });
    }
    let sys = LadderSystem::new(line, n_sections, length, topology)?;
    let mut h_max = sys.stable_dt(opts.safety);
    if let Some(m) = opts.max_dt {
        h_max = h_max.min(m);
    }
    let substeps = (grid.dt() / h_max).ceil().max(1.0) as usize;
    let h = grid.dt() / substeps as f64;
    let mut state = sys.initial_state(initial, line_initial)?;
    let n = topology.node_count();
    let observe = |s: &LadderState| ReducedState {
        phi: DVector::from_column_slice(&s.phi[..n]),
        q: DVector::from_column_slice(&s.p[..n]),
        q0: s.p[n],
        v0: None,
    };
    let e_start = sys.energy(&state)?;
    let mut energies = vec![e_start];
    let mut states = vec![observe(&state)];
    let mut drift = 0.0_f64;
    let mut scratch = vec![0.0; sys.dim()];
    for k in 1..grid.len() {
        for _ in 0..substeps {
            sys.step(&mut state, h, &mut scratch)?;
        }
        let t = grid.time(k);
        if state.phi.iter().chain(&state.p).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t });
        }
        let e = sys.energy(&state)?;
        if e_start != 0.0 {
            drift = drift.max((e - e_start).abs() / e_start.abs());
        }
        if drift > opts.drift_limit {
            return Err(Error::Unstable { drift, limit: opts.drift_limit });
        }
        energies.push(e);
        states.push(observe(&state));
    }
    let trajectory = Trajectory { grid, states, integrator: "leapfrog-ladder".into(), warnings: Vec::new() };
    Ok(LadderRun { trajectory, energy_drift: drift, energies, dt: h })
}
