//! Canonical-structure checks on the linear propagators, Gaussian moment
//! propagation and the weak-coupling Langevin model of the LC example.
//!
//! For linear circuits the Heisenberg equations are classical linear ODEs for
//! the operator coefficients: every operator at time `t` is `S(t)` applied to
//! the operators at 0. Equal-time commutators are preserved exactly when `S`
//! is symplectic, so the quantum content is checked through `SᵀJS = J`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::{LadderSystem, LinearSystem};
use crate::error::{Error, Result};
use crate::netlist::{CircuitTopology, ReducedModel};
use crate::signal::{OutOfDomain, Signal, TimeGrid};
use crate::spectral::{weak_coupling, LcExampleParams};

/// State-transition matrix on `[fluxes; momenta]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    pub matrix: DMatrix<f64>,
    pub t: f64,
    /// Integrator step when the propagator is a composed one-step map.
    pub dt: Option<f64>,
    pub system: String,
}

/// System whose canonical state is propagated.
#[derive(Debug, Clone, Copy)]
pub enum CanonicalSystem<'a> {
    /// Isolated lumped circuit (coupling capacitor left open), `[Φ; Q]`.
    Lumped(&'a CircuitTopology),
    /// Reduced one-port model with `e₀ = 0`, `[Φ, Φ₀; Q, Q₀]`. Open: `det S = e^{−t/τ}`.
    Reduced { model: &'a ReducedModel, topology: &'a CircuitTopology },
    /// Closed ladder + circuit under leapfrog steps of size `dt`.
    Ladder { system: &'a LadderSystem, dt: f64 },
}

fn require_linear(topo: &CircuitTopology) -> Result<()> {
    if topo.is_linear() {
        Ok(())
    } else {
        Err(Error::Nonlinear)
    }
}

fn lumped_generator(topo: &CircuitTopology) -> Result<DMatrix<f64>> {
    let n = topo.node_count();
    let cb = crate::netlist::reduce_ground(&crate::netlist::build_capacitance_matrix(topo), topo.ground())?;
    let cb_inv = cb
        .cholesky()
        .ok_or_else(|| Error::Singular("circuit capacitance matrix is not positive definite".into()))?
        .inverse();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, n), (n, n)).copy_from(&cb_inv);
    m.view_mut((n, 0), (n, n)).copy_from(&(-topo.inductive_stiffness()));
    Ok(m)
}

fn reduced_generator(model: &ReducedModel, topo: &CircuitTopology) -> DMatrix<f64> {
    let n = model.node_count();
    let d = n + 1;
    let k = topo.inductive_stiffness();
    let mut m = DMatrix::zeros(2 * d, 2 * d);
    // Φ̇ = Cb⁻¹Q + pQ₀
    m.view_mut((0, d), (n, n)).copy_from(&model.cb_inv);
    m.view_mut((0, d + n), (n, 1)).copy_from(&model.p);
    // Φ̇₀ = V₀ = pᵀQ + Q₀/C_p
    for j in 0..n {
        m[(n, d + j)] = model.p[j];
    }
    m[(n, d + n)] = 1.0 / model.c_p;
    m.view_mut((d, 0), (n, n)).copy_from(&(-&k));
    for j in 0..n {
        m[(d + n, d + j)] = -model.p[j] / model.z_c;
    }
    m[(d + n, d + n)] = -1.0 / model.tau;
    m
}

/// `S^k` by repeated squaring.
fn matrix_power(base: &DMatrix<f64>, mut k: u64) -> DMatrix<f64> {
    let mut acc = DMatrix::identity(base.nrows(), base.ncols());
    let mut sq = base.clone();
    while k > 0 {
        if k & 1 == 1 {
            acc = &acc * &sq;
        }
        k >>= 1;
        if k > 0 {
            sq = &sq * &sq;
        }
    }
    acc
}

/// Propagator from 0 to `t`. Ladder systems need `t` to be a whole number of steps.
pub fn propagator_of(system: CanonicalSystem<'_>, t: f64) -> Result<Propagator> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::validation(format!("propagation time must be non-negative (got {t})")));
    }
    match system {
        CanonicalSystem::Lumped(topo) => {
            require_linear(topo)?;
            let m = lumped_generator(topo)?;
            let sys = LinearSystem { b: DVector::zeros(m.nrows()), m };
            Ok(Propagator { matrix: sys.transition(t), t, dt: None, system: "lumped".into() })
        }
        CanonicalSystem::Reduced { model, topology } => {
            require_linear(topology)?;
            if topology.node_count() != model.node_count() {
                return Err(Error::Dimension { expected: model.node_count(), found: topology.node_count() });
            }
            let m = reduced_generator(model, topology);
            let sys = LinearSystem { b: DVector::zeros(m.nrows()), m };
            Ok(Propagator { matrix: sys.transition(t), t, dt: None, system: "reduced".into() })
        }
        CanonicalSystem::Ladder { system, dt } => {
            if !(dt > 0.0) {
                return Err(Error::validation("leapfrog step must be positive"));
            }
            let steps = (t / dt).round();
            if (steps * dt - t).abs() > 1e-9 * t.max(dt) {
                return Err(Error::validation(format!("t = {t} is not a whole number of steps of {dt}")));
            }
            let one = system.one_step_matrix(dt)?;
            let matrix = matrix_power(&one, steps as u64);
            Ok(Propagator { matrix, t, dt: Some(dt), system: format!("ladder/{}", system.n_sections()) })
        }
    }
}

/// Canonical form `J = [[0, I], [−I, 0]]` of dimension `2d`.
pub fn canonical_form(d: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        j[(i, d + i)] = 1.0;
        j[(d + i, i)] = -1.0;
    }
    j
}

/// `‖SᵀJS − J‖_∞` (largest absolute row sum).
pub fn commutator_residual(prop: &Propagator) -> Result<f64> {
    let s = &prop.matrix;
    if s.nrows() != s.ncols() || s.nrows() % 2 != 0 {
        return Err(Error::validation(format!(
            "propagator must be square with even dimension (got {}x{})",
            s.nrows(),
            s.ncols()
        )));
    }
    let j = canonical_form(s.nrows() / 2);
    let r = s.transpose() * &j * s - &j;
    Ok(r.row_iter().map(|row| row.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub symplectic_residual: f64,
    pub t: f64,
    pub dt: Option<f64>,
    pub system: String,
}

impl ResidualReport {
    pub fn of(prop: &Propagator) -> Result<Self> {
        Ok(Self { symplectic_residual: commutator_residual(prop)?, t: prop.t, dt: prop.dt, system: prop.system.clone() })
    }
}

/// Means and symmetrised covariances of the canonical observables.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Only enters the uncertainty check.
    pub hbar: f64,
}

impl GaussianMoments {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, hbar: f64) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::Dimension { expected: d, found: cov.nrows() });
        }
        let scale = cov.amax().max(f64::MIN_POSITIVE);
        if (&cov - cov.transpose()).amax() > 1e-12 * scale {
            return Err(Error::validation("covariance must be symmetric"));
        }
        let min_eig = cov.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-12 * scale {
            return Err(Error::validation(format!("covariance is not positive semidefinite (eigenvalue {min_eig:e})")));
        }
        Ok(Self { mean, cov, hbar })
    }

    /// Minimum-uncertainty state `cov = (ħ/2)·I` centred at `mean`.
    pub fn vacuum(mean: DVector<f64>, hbar: f64) -> Self {
        let d = mean.len();
        Self { mean, cov: DMatrix::identity(d, d) * (0.5 * hbar), hbar }
    }

    /// Smallest eigenvalue of `cov + (iħ/2)J`; non-negative for a physical state.
    pub fn uncertainty_margin(&self) -> Result<f64> {
        let d = self.mean.len();
        if d % 2 != 0 {
            return Err(Error::validation("canonical state must have even dimension"));
        }
        let j = canonical_form(d / 2);
        let m = DMatrix::from_fn(d, d, |r, c| Complex64::new(self.cov[(r, c)], 0.5 * self.hbar * j[(r, c)]));
        Ok(m.symmetric_eigenvalues().min())
    }
}

/// `mean' = S·mean`, `cov' = S·cov·Sᵀ`. The line's vacuum-noise contribution is
/// not modelled, so `noise_free` must be set to acknowledge that.
pub fn propagate_gaussian(m: &GaussianMoments, prop: &Propagator, noise_free: bool) -> Result<GaussianMoments> {
    if !noise_free {
        return Err(Error::NoiseTermOutOfScope);
    }
    let s = &prop.matrix;
    if s.ncols() != m.mean.len() {
        return Err(Error::Dimension { expected: s.ncols(), found: m.mean.len() });
    }
    let cov = s * &m.cov * s.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianMoments { mean: s * &m.mean, cov, hbar: m.hbar })
}

#[derive(Debug, Clone)]
pub struct WeakRun {
    pub phi: Signal,
    pub omega: f64,
    pub kappa: f64,
    pub warnings: Vec<String>,
}

/// `Φ̈₁ + κΦ̇₁ + Ω_r²Φ₁ = 2g·v̇←` from `(Φ₁, Φ̇₁)` at `grid.t0()`.
///
/// Integrated exactly in the variable `y = Φ̇₁ − 2g·v←`, which removes the
/// derivative of the drive: `Φ̇₁ = y + 2g v←`, `ẏ = −Ω²Φ₁ − κy − 2gκ v←`.
pub fn langevin_weak(
    params: &LcExampleParams,
    drive: Option<&Signal>,
    initial: (f64, f64),
    grid: TimeGrid,
) -> Result<WeakRun> {
    let g = params.g();
    let w_r = params.omega_r();
    let wc = weak_coupling(g, params.alpha(), w_r);
    let mut warnings = Vec::new();
    if w_r * params.tau() > 0.1 {
        warnings.push(format!(
            "ω_r·τ = {:.3} > 0.1: the Markovian weak-coupling approximation is outside its range",
            w_r * params.tau()
        ));
    }
    let d = |t: f64| drive.map_or(Ok(0.0), |s| s.value_at(t, OutOfDomain::Error));
    let sys = LinearSystem {
        m: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -wc.omega * wc.omega, -wc.kappa]),
        b: DVector::from_vec(vec![2.0 * g, -2.0 * g * wc.kappa]),
    };
    let step = sys.discretize(grid.dt());
    let mut u_prev = d(grid.t0())?;
    let mut x = DVector::from_vec(vec![initial.0, initial.1 - 2.0 * g * u_prev]);
    let mut out = Vec::with_capacity(grid.len());
    out.push(x[0]);
    for k in 1..grid.len() {
        let u = d(grid.time(k))?;
        x = step.step(&x, u_prev, u);
        u_prev = u;
        out.push(x[0]);
    }
    Ok(WeakRun { phi: Signal::new(grid, out)?, omega: wc.omega, kappa: wc.kappa, warnings })
}

/// Local maxima of `|x|`, refined by a parabola through the three samples.
pub fn peak_envelope(sig: &Signal) -> Vec<(f64, f64)> {
    let a: Vec<f64> = sig.samples().iter().map(|v| v.abs()).collect();
    let dt = sig.grid().dt();
    let mut peaks = Vec::new();
    for i in 1..a.len().saturating_sub(1) {
        if a[i] > a[i - 1] && a[i] >= a[i + 1] {
            let (l, c, r) = (a[i - 1], a[i], a[i + 1]);
            let den = l - 2.0 * c + r;
            let (off, val) = if den < 0.0 {
                let off = 0.5 * (l - r) / den;
                (off, c - 0.25 * (l - r) * off)
            } else {
                (0.0, c)
            };
            peaks.push((sig.grid().time(i) + off * dt, val));
        }
    }
    peaks
}

/// Amplitude decay rate from a least-squares fit of `ln A` against `t`.
pub fn envelope_decay_rate(peaks: &[(f64, f64)]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = peaks.iter().filter(|p| p.1 > 0.0).map(|&(t, a)| (t, a.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::validation("need at least two envelope peaks"));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Ok(-sxy / sxx)
}
