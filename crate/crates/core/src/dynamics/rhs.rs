use nalgebra::{DMatrix, DVector};

use super::integrate::LinearSystem;
use super::state::ReducedState;
use crate::error::{Error, Result};
use crate::netlist::{potential_gradient, CircuitTopology, ReducedModel};
use crate::signal::{OutOfDomain, Signal};

/// Right-hand side of the reduced equations
/// `Φ̇ = Cb⁻¹Q + pQ₀`, `Q̇ = −∂U/∂Φ`, `Q̇₀ = −Q₀/τ − pᵀQ/Z_c + e₀/Z_c`.
#[derive(Debug, Clone, Copy)]
pub struct ReducedRhs<'a> {
    pub model: &'a ReducedModel,
    pub topology: &'a CircuitTopology,
    pub e0: Option<&'a Signal>,
    pub policy: OutOfDomain,
}

pub fn assemble_rhs<'a>(
    model: &'a ReducedModel,
    topology: &'a CircuitTopology,
    e0: Option<&'a Signal>,
) -> Result<ReducedRhs<'a>> {
    if topology.node_count() != model.node_count() {
        return Err(Error::Dimension { expected: model.node_count(), found: topology.node_count() });
    }
    Ok(ReducedRhs { model, topology, e0, policy: OutOfDomain::Error })
}

impl<'a> ReducedRhs<'a> {
    pub fn node_count(&self) -> usize {
        self.model.node_count()
    }

    pub fn source(&self, t: f64) -> Result<f64> {
        match self.e0 {
            Some(s) => s.value_at(t, self.policy),
            None => Ok(0.0),
        }
    }

    /// Time derivative, returned in state form.
    pub fn derivative(&self, t: f64, s: &ReducedState) -> Result<ReducedState> {
        s.check(self.node_count())?;
        let m = self.model;
        let e0 = self.source(t)?;
        let q_dot = -potential_gradient(self.topology, s.phi.as_slice())?;
        let phi_dot = &m.cb_inv * &s.q + &m.p * s.q0;
        let pq = m.p.dot(&s.q);
        let q0_dot = -s.q0 / m.tau - pq / m.z_c + e0 / m.z_c;
        let v0_dot = s.v0.map(|v0| m.p.dot(&q_dot) - v0 / m.tau + e0 / m.tau);
        Ok(ReducedState { phi: phi_dot, q: q_dot, q0: q0_dot, v0: v0_dot })
    }

    pub(crate) fn packed(&self, t: f64, x: &DVector<f64>, track_v0: bool) -> Result<DVector<f64>> {
        let s = ReducedState::unpack(x, self.node_count(), track_v0);
        Ok(self.derivative(t, &s)?.pack())
    }

    /// `ẋ = Mx + b·e₀` for circuits without junctions; state order `[Φ, Q, Q₀, (V₀)]`.
    pub fn linear_system(&self, track_v0: bool) -> Result<LinearSystem> {
        if !self.topology.is_linear() {
            return Err(Error::Nonlinear);
        }
        let m = self.model;
        let n = self.node_count();
        let dim = 2 * n + 1 + usize::from(track_v0);
        let k = self.topology.inductive_stiffness();
        let mut a = DMatrix::zeros(dim, dim);
        let mut b = DVector::zeros(dim);
        a.view_mut((0, n), (n, n)).copy_from(&m.cb_inv);
        a.view_mut((0, 2 * n), (n, 1)).copy_from(&m.p);
        a.view_mut((n, 0), (n, n)).copy_from(&(-&k));
        for j in 0..n {
            a[(2 * n, n + j)] = -m.p[j] / m.z_c;
        }
        a[(2 * n, 2 * n)] = -1.0 / m.tau;
        b[2 * n] = 1.0 / m.z_c;
        if track_v0 {
            let row = -(m.p.transpose() * &k);
            for j in 0..n {
                a[(2 * n + 1, j)] = row[j];
            }
            a[(2 * n + 1, 2 * n + 1)] = -1.0 / m.tau;
            b[2 * n + 1] = 1.0 / m.tau;
        }
        Ok(LinearSystem { m: a, b })
    }

    /// Rough upper bound on the fastest rate in the equations.
    pub fn fastest_rate(&self) -> f64 {
        let inv_norm = self.model.cb_inv.abs().row_sum().max() + self.model.p.amax() * self.model.c_p.recip();
        let mut stiff = self.topology.inductive_stiffness().abs().row_sum().max();
        for j in self.topology.junctions() {
            stiff += 2.0 * j.e_j / (j.phi0 * j.phi0);
        }
        (inv_norm * stiff).sqrt().max(1.0 / self.model.tau)
    }
}
