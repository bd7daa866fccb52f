//! Convolution (memory-kernel) form of the reduced equations,
//! `Φ̇ = AQ + B(g∗Q̇) + w(t)`, `Q̇ = −∂U/∂Φ`, with `g(t) = u(t)e^{−t/τ}`.
//!
//! The convolution is carried by auxiliary states: `m = g∗Q̇` obeys
//! `ṁ = −m/τ + Q̇`, and `y = g(t)V₀(0) + (g∗e₀)/τ` obeys `ẏ = −y/τ + e₀/τ`,
//! so that `w = C_p p y` and `V₀ = pᵀm + y`.

use nalgebra::{DMatrix, DVector};

use super::integrate::{check_finite, resolve, rk4_step, IntegrateOptions, Integrator, LinearSystem};
use super::rhs::ReducedRhs;
use super::state::{ReducedState, Trajectory};
use crate::error::Result;
use crate::netlist::potential_gradient;
use crate::signal::TimeGrid;

fn derivative(rhs: &ReducedRhs<'_>, t: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
    let model = rhs.model;
    let n = rhs.node_count();
    let phi = x.rows(0, n);
    let q = x.rows(n, n);
    let mem = x.rows(2 * n, n);
    let y = x[3 * n];
    let e0 = rhs.source(t)?;
    let q_dot = -potential_gradient(rhs.topology, phi.as_slice())?;
    let mut d = DVector::zeros(3 * n + 1);
    let phi_dot = &model.a * q + &model.b * mem + &model.p * (model.c_p * y);
    d.rows_mut(0, n).copy_from(&phi_dot);
    d.rows_mut(n, n).copy_from(&q_dot);
    let m_dot = -mem / model.tau + &q_dot;
    d.rows_mut(2 * n, n).copy_from(&m_dot);
    d[3 * n] = (e0 - y) / model.tau;
    Ok(d)
}

fn linear_system(rhs: &ReducedRhs<'_>) -> Result<LinearSystem> {
    let model = rhs.model;
    let n = rhs.node_count();
    let k = rhs.topology.inductive_stiffness();
    // reuse the reduced linear system's nonlinearity check
    rhs.linear_system(false)?;
    let dim = 3 * n + 1;
    let mut m = DMatrix::zeros(dim, dim);
    let mut b = DVector::zeros(dim);
    m.view_mut((0, n), (n, n)).copy_from(&model.a);
    m.view_mut((0, 2 * n), (n, n)).copy_from(&model.b);
    m.view_mut((0, 3 * n), (n, 1)).copy_from(&(&model.p * model.c_p));
    m.view_mut((n, 0), (n, n)).copy_from(&(-&k));
    m.view_mut((2 * n, 0), (n, n)).copy_from(&(-&k));
    for i in 0..n {
        m[(2 * n + i, 2 * n + i)] = -1.0 / model.tau;
    }
    m[(3 * n, 3 * n)] = -1.0 / model.tau;
    b[3 * n] = 1.0 / model.tau;
    Ok(LinearSystem { m, b })
}

/// Integrates the memory-kernel form; `Q₀` and `V₀` are reconstructed from the auxiliary states.
pub fn langevin_form(
    rhs: &ReducedRhs<'_>,
    initial: &ReducedState,
    grid: TimeGrid,
    opts: IntegrateOptions,
) -> Result<Trajectory> {
    let model = rhs.model;
    let n = rhs.node_count();
    initial.check(n)?;
    let mut x = DVector::zeros(3 * n + 1);
    x.rows_mut(0, n).copy_from(&initial.phi);
    x.rows_mut(n, n).copy_from(&initial.q);
    x[3 * n] = initial.v0.unwrap_or_else(|| initial.port_voltage(model));
    let unpack = |x: &DVector<f64>| {
        let q = x.rows(n, n).into_owned();
        let v0 = model.p.dot(&x.rows(2 * n, n)) + x[3 * n];
        let q0 = model.c_p * (v0 - model.p.dot(&q));
        ReducedState { phi: x.rows(0, n).into_owned(), q, q0, v0: Some(v0) }
    };
    let substeps = opts.substeps.max(1);
    let h = grid.dt() / substeps as f64;
    let method = resolve(opts.integrator, rhs.topology.is_linear())?;
    let mut states = Vec::with_capacity(grid.len());
    states.push(unpack(&x));
    if method == Integrator::MatrixExponential {
        let step = linear_system(rhs)?.discretize(h);
        let mut u_prev = rhs.source(grid.t0())?;
        for k in 1..grid.len() {
            let t_prev = grid.time(k - 1);
            for j in 1..=substeps {
                let u = rhs.source(t_prev + h * j as f64)?;
                x = step.step(&x, u_prev, u);
                u_prev = u;
            }
            check_finite(&x, grid.time(k))?;
            states.push(unpack(&x));
        }
    } else {
        let f = |t: f64, y: &DVector<f64>| derivative(rhs, t, y);
        for k in 1..grid.len() {
            let t_prev = grid.time(k - 1);
            for j in 0..substeps {
                x = rk4_step(f, t_prev + h * j as f64, &x, h)?;
            }
            check_finite(&x, grid.time(k))?;
            states.push(unpack(&x));
        }
    }
    let name = format!("langevin/{}", method.name());
    Ok(Trajectory { grid, states, integrator: name, warnings: Vec::new() })
}
