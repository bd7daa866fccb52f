//! Lumped-circuit description, capacitance matrices and the reduced one-port model.
//!
//! Nodes are labelled `1..=N`, the ground is node `N + 1` and node `0` is the
//! line-side end of the coupling capacitor, which always attaches to node 1.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ħ / 2e in weber.
pub const REDUCED_FLUX_QUANTUM: f64 = 1.054_571_817e-34 / (2.0 * 1.602_176_634e-19);

/// Two-terminal linear element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub a: usize,
    pub b: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Junction {
    pub a: usize,
    pub b: usize,
    pub e_j: f64,
    pub phi0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitTopology {
    node_count: usize,
    capacitors: Vec<Branch>,
    inductors: Vec<Branch>,
    junctions: Vec<Junction>,
    coupling: f64,
}

impl CircuitTopology {
    /// Empty circuit with `node_count` nodes and coupling capacitance `c_c`.
    pub fn new(node_count: usize, c_c: f64) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::validation("circuit needs at least one node"));
        }
        check_positive("coupling capacitance", c_c)?;
        Ok(Self { node_count, capacitors: Vec::new(), inductors: Vec::new(), junctions: Vec::new(), coupling: c_c })
    }

    /// Capacitor `c_r` and inductor `l_r` from node 1 to ground.
    pub fn lc_example(l_r: f64, c_r: f64, c_c: f64) -> Result<Self> {
        let mut t = Self::new(1, c_c)?;
        t.add_capacitor(1, 2, c_r)?;
        t.add_inductor(1, 2, l_r)?;
        Ok(t)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn ground(&self) -> usize {
        self.node_count + 1
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn capacitors(&self) -> &[Branch] {
        &self.capacitors
    }

    pub fn inductors(&self) -> &[Branch] {
        &self.inductors
    }

    pub fn junctions(&self) -> &[Junction] {
        &self.junctions
    }

    pub fn is_linear(&self) -> bool {
        self.junctions.is_empty()
    }

    pub fn set_coupling(&mut self, c_c: f64) -> Result<()> {
        check_positive("coupling capacitance", c_c)?;
        self.coupling = c_c;
        Ok(())
    }

    pub fn add_capacitor(&mut self, a: usize, b: usize, c: f64) -> Result<()> {
        self.check_nodes(a, b)?;
        check_positive("capacitance", c)?;
        self.capacitors.push(Branch { a, b, value: c });
        Ok(())
    }

    pub fn add_inductor(&mut self, a: usize, b: usize, l: f64) -> Result<()> {
        self.check_nodes(a, b)?;
        check_positive("inductance", l)?;
        self.inductors.push(Branch { a, b, value: l });
        Ok(())
    }

    pub fn add_junction(&mut self, a: usize, b: usize, e_j: f64, phi0: f64) -> Result<()> {
        self.check_nodes(a, b)?;
        check_positive("Josephson energy", e_j)?;
        check_positive("flux scale", phi0)?;
        self.junctions.push(Junction { a, b, e_j, phi0 });
        Ok(())
    }

    fn check_nodes(&self, a: usize, b: usize) -> Result<()> {
        let hi = self.ground();
        for n in [a, b] {
            if n == 0 {
                return Err(Error::validation("node 0 is reserved for the line side of the coupling capacitor"));
            }
            if n > hi {
                return Err(Error::validation(format!("node {n} out of range 1..={hi}")));
            }
        }
        if a == b {
            return Err(Error::validation(format!("element shorted on node {a}")));
        }
        Ok(())
    }

    /// Every node needs a capacitor and an inductive element.
    pub fn check_active(&self) -> Result<()> {
        for node in 1..=self.node_count {
            let touches = |a: usize, b: usize| a == node || b == node;
            if !self.capacitors.iter().any(|e| touches(e.a, e.b)) {
                return Err(Error::InactiveNode { node, reason: "no capacitor attached".into() });
            }
            let inductive = self.inductors.iter().any(|e| touches(e.a, e.b))
                || self.junctions.iter().any(|e| touches(e.a, e.b));
            if !inductive {
                return Err(Error::InactiveNode { node, reason: "no inductor or junction attached".into() });
            }
        }
        Ok(())
    }

    /// Stiffness matrix of the linear inductors, `∂²U/∂Φ²` without junctions.
    pub fn inductive_stiffness(&self) -> DMatrix<f64> {
        let n = self.node_count;
        let mut k = DMatrix::zeros(n, n);
        for e in &self.inductors {
            stamp(&mut k, e.a, e.b, 1.0 / e.value, n);
        }
        k
    }

    /// Potential energy `U_b(Φ)` with the ground flux pinned to zero.
    pub fn potential_energy(&self, phi: &[f64]) -> Result<f64> {
        self.check_flux(phi)?;
        let at = |i: usize| if i > self.node_count { 0.0 } else { phi[i - 1] };
        let mut u = 0.0;
        for e in &self.inductors {
            let d = at(e.a) - at(e.b);
            u += d * d / (2.0 * e.value);
        }
        for j in &self.junctions {
            u -= j.e_j * ((at(j.a) - at(j.b)) / j.phi0).cos();
        }
        Ok(u)
    }

    fn check_flux(&self, phi: &[f64]) -> Result<()> {
        if phi.len() != self.node_count {
            return Err(Error::Dimension { expected: self.node_count, found: phi.len() });
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite node flux"));
        }
        Ok(())
    }
}

fn check_positive(what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(format!("{what} must be positive and finite (got {v})")))
    }
}

/// Adds a conductance-like stamp between 1-based nodes; rows past `n` (ground) are dropped.
fn stamp(m: &mut DMatrix<f64>, a: usize, b: usize, y: f64, n: usize) {
    let (ia, ib) = (a - 1, b - 1);
    if ia < n {
        m[(ia, ia)] += y;
    }
    if ib < n {
        m[(ib, ib)] += y;
    }
    if ia < n && ib < n {
        m[(ia, ib)] -= y;
        m[(ib, ia)] -= y;
    }
}

/// `∂U_b/∂Φ` assembled node by node.
pub fn potential_gradient(topology: &CircuitTopology, phi: &[f64]) -> Result<DVector<f64>> {
    topology.check_flux(phi)?;
    let n = topology.node_count;
    let at = |i: usize| if i > n { 0.0 } else { phi[i - 1] };
    let mut grad = DVector::zeros(n);
    let mut push = |a: usize, b: usize, f: f64| {
        if a <= n {
            grad[a - 1] += f;
        }
        if b <= n {
            grad[b - 1] -= f;
        }
    };
    for e in &topology.inductors {
        push(e.a, e.b, (at(e.a) - at(e.b)) / e.value);
    }
    for j in &topology.junctions {
        push(j.a, j.b, j.e_j / j.phi0 * ((at(j.a) - at(j.b)) / j.phi0).sin());
    }
    Ok(grad)
}

/// Full `(N+1)×(N+1)` capacitance matrix over nodes `1..=N+1`, coupling capacitor excluded.
pub fn build_capacitance_matrix(topology: &CircuitTopology) -> DMatrix<f64> {
    let n = topology.node_count + 1;
    let mut m = DMatrix::zeros(n, n);
    for e in &topology.capacitors {
        stamp(&mut m, e.a, e.b, e.value, n);
    }
    m
}

/// Drops the row and column of `ground` (1-based label) and checks the result is positive definite.
pub fn reduce_ground(full: &DMatrix<f64>, ground: usize) -> Result<DMatrix<f64>> {
    if !full.is_square() {
        return Err(Error::validation("capacitance matrix must be square"));
    }
    if ground == 0 || ground > full.nrows() {
        return Err(Error::validation(format!("ground index {ground} out of range 1..={}", full.nrows())));
    }
    let cb = full.clone().remove_row(ground - 1).remove_column(ground - 1);
    if cb.nrows() == 0 || cb.clone().cholesky().is_none() {
        return Err(Error::Singular("reduced capacitance matrix is not positive definite".into()));
    }
    Ok(cb)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReduceOptions {
    /// Condition numbers of `Cb` above this attach a warning.
    pub condition_bound: f64,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        Self { condition_bound: 1e12 }
    }
}

/// Everything the reduced equations of motion need.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub cb: DMatrix<f64>,
    pub cb_inv: DMatrix<f64>,
    pub p: DVector<f64>,
    pub c_c: f64,
    pub c_p: f64,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub tau: f64,
    pub z_c: f64,
    pub condition: f64,
    pub warnings: Vec<String>,
}

impl ReducedModel {
    /// Builds the model from a positive definite `Cb`.
    pub fn from_cb(cb: DMatrix<f64>, c_c: f64, z_c: f64, opts: ReduceOptions) -> Result<Self> {
        check_positive("coupling capacitance", c_c)?;
        check_positive("characteristic impedance", z_c)?;
        let n = cb.nrows();
        if n == 0 || !cb.is_square() {
            return Err(Error::validation("Cb must be a non-empty square matrix"));
        }
        let chol = cb
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular("Cb is not positive definite".into()))?;
        let mut cb_inv = chol.inverse();
        cb_inv = (&cb_inv + cb_inv.transpose()) * 0.5;
        let mut e1 = DVector::zeros(n);
        e1[0] = 1.0;
        let p = chol.solve(&e1);
        let c_p = 1.0 / (1.0 / c_c + p[0]);
        let b = &p * p.transpose() * c_p;
        let a = &cb_inv - &b;
        let eig = cb.clone().symmetric_eigen().eigenvalues;
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
        let condition = hi / lo;
        let mut warnings = Vec::new();
        if !(condition <= opts.condition_bound) {
            warnings.push(format!(
                "Cb is ill-conditioned (condition number {condition:.3e} > {:.1e})",
                opts.condition_bound
            ));
        }
        Ok(Self { cb, cb_inv, p, c_c, c_p, a, b, tau: z_c * c_p, z_c, condition, warnings })
    }

    pub fn node_count(&self) -> usize {
        self.p.len()
    }

    pub fn invariants(&self) -> InvariantReport {
        let n = self.node_count();
        let mut e1 = DVector::zeros(n);
        e1[0] = 1.0;
        let cb_norm = self.cb.norm();
        InvariantReport {
            cb_p_residual: (&self.cb * &self.p - e1).norm() / (cb_norm * self.p.norm()),
            c_p_residual: ((1.0 / self.c_p - 1.0 / self.c_c - self.p[0]) * self.c_p).abs(),
            a_plus_b_residual: (&self.a + &self.b - &self.cb_inv).norm() / self.cb_inv.norm(),
            symmetry_residual: (&self.cb - self.cb.transpose()).norm() / cb_norm,
            tau_residual: (self.tau - self.z_c * self.c_p).abs() / self.tau,
            condition: self.condition,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelWire::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let w: ModelWire = serde_json::from_str(text)?;
        let n = w.p.len();
        let cb = matrix_from_rows(&w.cb, n)?;
        let c_c = 1.0 / (1.0 / w.c_p - w.p[0]);
        let mut m = Self::from_cb(cb, c_c, w.z_c, ReduceOptions::default())?;
        // keep the stored numbers bit-exact; only the inverse is recomputed
        m.p = DVector::from_vec(w.p);
        m.c_p = w.c_p;
        m.a = matrix_from_rows(&w.a, n)?;
        m.b = matrix_from_rows(&w.b, n)?;
        m.tau = w.tau;
        Ok(m)
    }
}

/// Relative residuals of the defining identities of a [`ReducedModel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantReport {
    pub cb_p_residual: f64,
    pub c_p_residual: f64,
    pub a_plus_b_residual: f64,
    pub symmetry_residual: f64,
    pub tau_residual: f64,
    pub condition: f64,
}

impl InvariantReport {
    pub fn worst(&self) -> f64 {
        [self.cb_p_residual, self.c_p_residual, self.a_plus_b_residual, self.symmetry_residual, self.tau_residual]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelWire {
    cb: Vec<Vec<f64>>,
    p: Vec<f64>,
    c_p: f64,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    tau: f64,
    z_c: f64,
}

impl From<&ReducedModel> for ModelWire {
    fn from(m: &ReducedModel) -> Self {
        Self {
            cb: rows_of(&m.cb),
            p: m.p.iter().copied().collect(),
            c_p: m.c_p,
            a: rows_of(&m.a),
            b: rows_of(&m.b),
            tau: m.tau,
            z_c: m.z_c,
        }
    }
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n {
        return Err(Error::Dimension { expected: n, found: rows.len() });
    }
    if let Some(r) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::Dimension { expected: n, found: r.len() });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn derive_reduced_model(topology: &CircuitTopology, z_c: f64) -> Result<ReducedModel> {
    derive_reduced_model_with(topology, z_c, ReduceOptions::default())
}

pub fn derive_reduced_model_with(topology: &CircuitTopology, z_c: f64, opts: ReduceOptions) -> Result<ReducedModel> {
    topology.check_active()?;
    let full = build_capacitance_matrix(topology);
    let cb = reduce_ground(&full, topology.ground())?;
    ReducedModel::from_cb(cb, topology.coupling, z_c, opts)
}

impl FromStr for CircuitTopology {
    type Err = Error;

    /// Netlist text: `C i j value`, `L i j value`, `J i j E_J [phi0]`,
    /// `COUPLE value`, `GROUND auto|k`. `#` and `*` start comments.
    fn from_str(text: &str) -> Result<Self> {
        enum Item {
            C(usize, usize, f64),
            L(usize, usize, f64),
            J(usize, usize, f64, f64),
        }
        let mut items = Vec::new();
        let mut coupling = None;
        let mut ground: Option<(usize, usize)> = None;
        let mut max_node = 0;
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || line.starts_with('*') {
                continue;
            }
            let err = |message: String| Error::Parse { line: line_no, message };
            let tok: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| err(format!("not a number: {s:?}")))
            };
            let node = |s: &str| -> Result<usize> {
                let n = s.parse::<usize>().map_err(|_| err(format!("not a node index: {s:?}")))?;
                if n == 0 {
                    return Err(err("node 0 is reserved for the coupling capacitor".into()));
                }
                Ok(n)
            };
            let arity = |lo: usize, hi: usize| {
                if tok.len() < lo || tok.len() > hi {
                    Err(err(format!("expected {} fields, found {}", lo, tok.len())))
                } else {
                    Ok(())
                }
            };
            match tok[0].to_ascii_uppercase().as_str() {
                kind @ ("C" | "L") => {
                    arity(4, 4)?;
                    let (a, b, v) = (node(tok[1])?, node(tok[2])?, num(tok[3])?);
                    if v <= 0.0 {
                        return Err(err(format!("element value must be positive (got {v})")));
                    }
                    if a == b {
                        return Err(err(format!("element shorted on node {a}")));
                    }
                    max_node = max_node.max(a).max(b);
                    items.push(if kind == "C" { Item::C(a, b, v) } else { Item::L(a, b, v) });
                }
                "J" => {
                    arity(4, 5)?;
                    let (a, b, e) = (node(tok[1])?, node(tok[2])?, num(tok[3])?);
                    let phi0 = if tok.len() == 5 { num(tok[4])? } else { REDUCED_FLUX_QUANTUM };
                    if e <= 0.0 || phi0 <= 0.0 {
                        return Err(err("junction parameters must be positive".into()));
                    }
                    if a == b {
                        return Err(err(format!("element shorted on node {a}")));
                    }
                    max_node = max_node.max(a).max(b);
                    items.push(Item::J(a, b, e, phi0));
                }
                "COUPLE" => {
                    arity(2, 2)?;
                    if coupling.is_some() {
                        return Err(err("COUPLE given twice".into()));
                    }
                    let v = num(tok[1])?;
                    if v <= 0.0 {
                        return Err(err(format!("coupling capacitance must be positive (got {v})")));
                    }
                    coupling = Some(v);
                }
                "GROUND" => {
                    arity(2, 2)?;
                    if !tok[1].eq_ignore_ascii_case("auto") {
                        ground = Some((node(tok[1])?, line_no));
                    }
                }
                other => return Err(err(format!("unknown element {other:?}"))),
            }
        }
        let c_c = coupling.ok_or_else(|| Error::validation("netlist has no COUPLE line"))?;
        if max_node < 2 {
            return Err(Error::validation("netlist needs at least one node and a ground"));
        }
        if let Some((g, line)) = ground {
            if g != max_node {
                return Err(Error::Parse {
                    line,
                    message: format!("ground must be the highest node index ({max_node}), got {g}"),
                });
            }
        }
        let mut t = CircuitTopology::new(max_node - 1, c_c)?;
        for it in items {
            match it {
                Item::C(a, b, v) => t.add_capacitor(a, b, v)?,
                Item::L(a, b, v) => t.add_inductor(a, b, v)?,
                Item::J(a, b, e, p) => t.add_junction(a, b, e, p)?,
            }
        }
        Ok(t)
    }
}

impl fmt::Display for CircuitTopology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "COUPLE {:e}", self.coupling)?;
        for e in &self.capacitors {
            writeln!(f, "C {} {} {:e}", e.a, e.b, e.value)?;
        }
        for e in &self.inductors {
            writeln!(f, "L {} {} {:e}", e.a, e.b, e.value)?;
        }
        for j in &self.junctions {
            writeln!(f, "J {} {} {:e} {:e}", j.a, j.b, j.e_j, j.phi0)?;
        }
        writeln!(f, "GROUND {}", self.ground())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_capacitor_matrix() {
        let t = CircuitTopology::lc_example(1.0, 2.0, 0.5).unwrap();
        let m = build_capacitance_matrix(&t);
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[2.0, -2.0, -2.0, 2.0]));
        assert_eq!(reduce_ground(&m, 2).unwrap(), DMatrix::from_row_slice(1, 1, &[2.0]));
        assert!(reduce_ground(&m, 3).is_err());
        assert!(reduce_ground(&m, 0).is_err());
    }

    #[test]
    fn two_capacitor_chain() {
        let (ca, cb) = (3.0, 5.0);
        let mut t = CircuitTopology::new(2, 1.0).unwrap();
        t.add_capacitor(1, 2, ca).unwrap();
        t.add_capacitor(2, 3, cb).unwrap();
        let m = build_capacitance_matrix(&t);
        let expect = DMatrix::from_row_slice(3, 3, &[ca, -ca, 0.0, -ca, ca + cb, -cb, 0.0, -cb, cb]);
        assert_eq!(m, expect);
        // removing node 3 leaves the chain of the two remaining nodes
        let r = reduce_ground(&m, 3).unwrap();
        assert_eq!(r, DMatrix::from_row_slice(2, 2, &[ca, -ca, -ca, ca + cb]));
    }

    #[test]
    fn empty_capacitor_list_is_inactive() {
        let mut t = CircuitTopology::new(1, 1.0).unwrap();
        t.add_inductor(1, 2, 1.0).unwrap();
        assert_eq!(build_capacitance_matrix(&t), DMatrix::zeros(2, 2));
        assert!(matches!(derive_reduced_model(&t, 1.0), Err(Error::InactiveNode { node: 1, .. })));
    }

    #[test]
    fn duplicate_branches_are_summed() {
        let mut t = CircuitTopology::new(1, 1.0).unwrap();
        t.add_capacitor(1, 2, 1.0).unwrap();
        t.add_capacitor(2, 1, 0.5).unwrap();
        assert_eq!(build_capacitance_matrix(&t)[(0, 0)], 1.5);
        assert!(t.add_capacitor(1, 2, -1.0).is_err());
        assert!(t.add_capacitor(0, 2, 1.0).is_err());
    }

    #[test]
    fn lc_example_reduced_model() {
        let (l_r, c_r, c_c, z_c) = (2e-9, 4e-13, 1e-13, 50.0);
        let t = CircuitTopology::lc_example(l_r, c_r, c_c).unwrap();
        let m = derive_reduced_model(&t, z_c).unwrap();
        let c_p = c_c * c_r / (c_c + c_r);
        assert!((m.p[0] - 1.0 / c_r).abs() <= 1e-15 / c_r);
        assert!((m.c_p - c_p).abs() <= 1e-15 * c_p);
        assert!((m.a[(0, 0)] - 1.0 / (c_c + c_r)).abs() <= 1e-15 / (c_c + c_r));
        assert!((m.tau - z_c * c_p).abs() <= 1e-15 * m.tau);
        assert!(m.warnings.is_empty());
        assert!(m.invariants().worst() < 1e-15);
    }

    #[test]
    fn strong_coupling_limit() {
        let t = CircuitTopology::lc_example(1.0, 1.0, 1e12).unwrap();
        let m = derive_reduced_model(&t, 1.0).unwrap();
        assert!((m.c_p - 1.0).abs() < 1e-11);
    }

    #[test]
    fn ill_conditioned_cb_warns() {
        let mut t = CircuitTopology::new(2, 1.0).unwrap();
        t.add_capacitor(1, 2, 1.0).unwrap();
        t.add_capacitor(2, 3, 1e-13).unwrap();
        t.add_inductor(1, 3, 1.0).unwrap();
        t.add_inductor(2, 3, 1.0).unwrap();
        let m = derive_reduced_model(&t, 1.0).unwrap();
        assert_eq!(m.warnings.len(), 1);
    }

    #[test]
    fn gradients_of_simple_potentials() {
        let t = CircuitTopology::lc_example(2.0, 1.0, 1.0).unwrap();
        assert_eq!(potential_gradient(&t, &[3.0]).unwrap()[0], 1.5);
        let mut j = CircuitTopology::new(2, 1.0).unwrap();
        let (e_j, phi0) = (2.0, 0.5);
        j.add_junction(1, 2, e_j, phi0).unwrap();
        assert_eq!(potential_gradient(&j, &[0.0, 0.0]).unwrap().norm(), 0.0);
        let phi = [std::f64::consts::FRAC_PI_2 * phi0, 0.0];
        let g = potential_gradient(&j, &phi).unwrap();
        assert!((g[0] - e_j / phi0).abs() < 1e-15);
        assert!((g[1] + e_j / phi0).abs() < 1e-15);
        assert!(potential_gradient(&j, &[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn parse_lc_netlist() {
        let text = "# LC resonator\n* spice-style comment\nc 1 2 4e-13\nL 1 2 2e-9  # inline\nCOUPLE 1e-13\nGROUND auto\n";
        let t: CircuitTopology = text.parse().unwrap();
        assert_eq!(t.node_count(), 1);
        assert_eq!(t.capacitors()[0].value, 4e-13);
        assert_eq!(t.coupling(), 1e-13);
        let back: CircuitTopology = t.to_string().parse().unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("COUPLE 1\nC 1 2 x\n", 2),
            ("COUPLE 1\nC 0 2 1\n", 2),
            ("COUPLE 1\nR 1 2 1\n", 2),
            ("COUPLE 1\nC 1 2\n", 2),
            ("C 1 2 1\nL 1 2 1\nCOUPLE 1\nGROUND 1\n", 4),
        ];
        for (text, line) in cases {
            match text.parse::<CircuitTopology>() {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
        assert!("C 1 2 1\nL 1 2 1\n".parse::<CircuitTopology>().is_err());
    }

    #[test]
    fn junction_default_flux_scale() {
        let t: CircuitTopology = "COUPLE 1e-15\nC 1 2 1e-13\nJ 1 2 1e-23\n".parse().unwrap();
        assert_eq!(t.junctions()[0].phi0, REDUCED_FLUX_QUANTUM);
        assert!(!t.is_linear());
        assert!(derive_reduced_model(&t, 50.0).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let mut t = CircuitTopology::new(2, 0.3).unwrap();
        t.add_capacitor(1, 2, 1.1).unwrap();
        t.add_capacitor(2, 3, 0.7).unwrap();
        t.add_inductor(1, 3, 1.0).unwrap();
        t.add_inductor(2, 3, 2.0).unwrap();
        let m = derive_reduced_model(&t, 3.0).unwrap();
        let text = m.to_json().unwrap();
        for key in ["\"cb\"", "\"p\"", "\"c_p\"", "\"a\"", "\"b\"", "\"tau\"", "\"z_c\""] {
            assert!(text.contains(key));
        }
        let back = ReducedModel::from_json(&text).unwrap();
        assert_eq!(back.cb, m.cb);
        assert_eq!(back.p, m.p);
        assert_eq!(back.a, m.a);
        assert_eq!(back.tau, m.tau);
    }
}
