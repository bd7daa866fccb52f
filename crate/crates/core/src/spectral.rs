//! Laplace-domain analysis of a parallel LC resonator capacitively coupled to
//! the line: characteristic cubic, transfer matrix, poles and their loci.
//!
//! Everything is expressed in the normalised variable `x = s/ω_r`. With
//! `g = C_c/(C_r+C_c)` and `α = Z_c/Z_r` the characteristic polynomial is
//! `p(x) = αg x³ + x² + αg x + (1 − g)`.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::netlist::{derive_reduced_model, CircuitTopology, ReducedModel};
use crate::poly::{Poly, Rational};
use crate::signal::fmt_f64;

/// Lumped values of the LC example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LcExampleParams {
    pub l_r: f64,
    pub c_r: f64,
    pub c_c: f64,
    pub z_c: f64,
}

impl LcExampleParams {
    pub fn new(l_r: f64, c_r: f64, c_c: f64, z_c: f64) -> Result<Self> {
        for (name, v) in [("L_r", l_r), ("C_r", c_r), ("C_c", c_c), ("Z_c", z_c)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} must be positive (got {v})")));
            }
        }
        Ok(Self { l_r, c_r, c_c, z_c })
    }

    /// Parameters with `Z_r = 1` and the requested `g`, `α`, `ω_r`.
    pub fn from_dimensionless(g: f64, alpha: f64, omega_r: f64) -> Result<Self> {
        if !(g > 0.0 && g < 1.0) {
            return Err(Error::OutOfDomain { what: "g", value: g, lo: 0.0, hi: 1.0 });
        }
        if !(alpha > 0.0) || !(omega_r > 0.0) {
            return Err(Error::validation("alpha and omega_r must be positive"));
        }
        let c_r = 1.0 / omega_r;
        Self::new(1.0 / omega_r, c_r, c_r * g / (1.0 - g), alpha)
    }

    /// `ω_r = 1`, `Z_r = 1`.
    pub fn normalized(g: f64, alpha: f64) -> Result<Self> {
        Self::from_dimensionless(g, alpha, 1.0)
    }

    pub fn omega_r(&self) -> f64 {
        1.0 / (self.l_r * self.c_r).sqrt()
    }

    pub fn z_r(&self) -> f64 {
        (self.l_r / self.c_r).sqrt()
    }

    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.omega_r()
    }

    pub fn g(&self) -> f64 {
        self.c_c / (self.c_r + self.c_c)
    }

    pub fn alpha(&self) -> f64 {
        self.z_c / self.z_r()
    }

    pub fn c_p(&self) -> f64 {
        self.c_c * self.c_r / (self.c_c + self.c_r)
    }

    pub fn tau(&self) -> f64 {
        self.z_c * self.c_p()
    }

    pub fn topology(&self) -> Result<CircuitTopology> {
        CircuitTopology::lc_example(self.l_r, self.c_r, self.c_c)
    }

    pub fn reduced_model(&self) -> Result<ReducedModel> {
        derive_reduced_model(&self.topology()?, self.z_c)
    }

    pub fn transfer_matrix(&self) -> Result<TransferMatrixSpec> {
        TransferMatrixSpec::new(self.g(), self.alpha(), self.omega_r())
    }
}

/// Coefficients `(a₃, a₂, a₁, a₀)` of `p(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharPoly {
    pub coeffs: [f64; 4],
    /// `g` sits on an end of `[0, 1]`: the leading or constant coefficient vanishes.
    pub boundary: bool,
}

impl CharPoly {
    pub fn poly(&self) -> Poly {
        Poly::from_descending(&self.coeffs)
    }
}

pub fn char_poly(g: f64, alpha: f64) -> Result<CharPoly> {
    if !(0.0..=1.0).contains(&g) {
        return Err(Error::OutOfDomain { what: "g", value: g, lo: 0.0, hi: 1.0 });
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::validation(format!("alpha must be positive (got {alpha})")));
    }
    let ag = alpha * g;
    Ok(CharPoly { coeffs: [ag, 1.0, ag, 1.0 - g], boundary: g == 0.0 || g == 1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Mode {
    Aperiodic { decay: f64 },
    Oscillatory { decay: f64, frequency: f64 },
}

/// Roots of `p`, normalised by `ω_r`.
///
/// Order: with one real root it comes first, then the pair with `Im > 0`
/// leading. With three real roots: most negative, rightmost, middle.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleSet {
    pub normalized: Vec<Complex64>,
    pub omega_r: f64,
    /// The cubic degenerated (`αg = 0`) and only two poles exist.
    pub degenerate: bool,
    /// Two poles coincide to within `1e−6` of the pole scale.
    pub double_root: bool,
}

impl PoleSet {
    /// Poles in physical units.
    pub fn scaled(&self) -> Vec<Complex64> {
        self.normalized.iter().map(|z| z * self.omega_r).collect()
    }

    pub fn get(&self, i: usize) -> Option<Complex64> {
        self.normalized.get(i).copied()
    }

    pub fn max_re(&self) -> f64 {
        self.normalized.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_re(&self) -> f64 {
        self.normalized.iter().map(|z| z.re).fold(f64::INFINITY, f64::min)
    }
}

fn order_poles(mut r: Vec<Complex64>) -> Vec<Complex64> {
    let reals: Vec<Complex64> = r.iter().copied().filter(|z| z.im == 0.0).collect();
    let mut cplx: Vec<Complex64> = r.iter().copied().filter(|z| z.im != 0.0).collect();
    cplx.sort_by(|a, b| b.im.total_cmp(&a.im));
    r.clear();
    match reals.len() {
        3 => {
            let mut s = reals;
            s.sort_by(|a, b| a.re.total_cmp(&b.re));
            r.extend([s[0], s[2], s[1]]);
        }
        2 if cplx.is_empty() => {
            let mut s = reals;
            s.sort_by(|a, b| b.re.total_cmp(&a.re));
            r.extend(s);
        }
        _ => {
            r.extend(reals);
            r.extend(cplx);
        }
    }
    r
}

pub fn find_poles(cp: &CharPoly, omega_r: f64) -> Result<PoleSet> {
    if !(omega_r > 0.0) {
        return Err(Error::validation("omega_r must be positive"));
    }
    let poly = cp.poly();
    let degenerate = poly.degree() < 3;
    let roots = order_poles(poly.roots()?);
    let scale = roots.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut double_root = false;
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            if (roots[i] - roots[j]).norm() <= 1e-6 * scale {
                double_root = true;
            }
        }
    }
    Ok(PoleSet { normalized: roots, omega_r, degenerate, double_root })
}

pub fn classify_modes(ps: &PoleSet) -> Vec<Mode> {
    ps.normalized
        .iter()
        .map(|z| {
            if z.im == 0.0 {
                Mode::Aperiodic { decay: -z.re }
            } else {
                Mode::Oscillatory { decay: -z.re, frequency: z.im.abs() }
            }
        })
        .collect()
}

/// Renormalised frequency `Ω_r = ω_r√(1−g)` and decay rate `κ = ω_r α g²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakCoupling {
    pub omega: f64,
    pub kappa: f64,
    /// `αg > 0.1`: the asymptotic forms are not expected to hold.
    pub outside_validity: bool,
}

pub fn weak_coupling(g: f64, alpha: f64, omega_r: f64) -> WeakCoupling {
    WeakCoupling {
        omega: omega_r * (1.0 - g).sqrt(),
        kappa: omega_r * alpha * g * g,
        outside_validity: alpha * g > 0.1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Entry {
    H11,
    H12,
    H21,
    H22,
}

impl Entry {
    pub const ALL: [Entry; 4] = [Entry::H11, Entry::H12, Entry::H21, Entry::H22];

    pub fn index(self) -> (usize, usize) {
        match self {
            Entry::H11 => (0, 0),
            Entry::H12 => (0, 1),
            Entry::H21 => (1, 0),
            Entry::H22 => (1, 1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Entry::H11 => "h11",
            Entry::H12 => "h12",
            Entry::H21 => "h21",
            Entry::H22 => "h22",
        }
    }
}

/// `H_ij(s) = ω_r^{e_ij} · N_ij(x)/p(x)` with `x = s/ω_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrixSpec {
    pub g: f64,
    pub alpha: f64,
    pub omega_r: f64,
    pub char_poly: CharPoly,
    entries: [Rational; 4],
}

impl TransferMatrixSpec {
    pub fn new(g: f64, alpha: f64, omega_r: f64) -> Result<Self> {
        if !(omega_r > 0.0 && omega_r.is_finite()) {
            return Err(Error::validation("omega_r must be positive"));
        }
        let cp = char_poly(g, alpha)?;
        let p = cp.poly();
        let ag = alpha * g;
        let r = |num: Vec<f64>| Rational::new(Poly::new(num), p.clone());
        // inverse of [[x² + 1 − g, −g x], [αg, αg x + 1]] in ω_r units
        let entries = [r(vec![1.0, ag])?, r(vec![0.0, g])?, r(vec![-ag])?, r(vec![1.0 - g, 0.0, 1.0])?];
        Ok(Self { g, alpha, omega_r, char_poly: cp, entries })
    }

    pub fn denominator(&self) -> Poly {
        self.char_poly.poly()
    }

    /// Rational function of `x`.
    pub fn normalized(&self, e: Entry) -> &Rational {
        let (i, j) = e.index();
        &self.entries[2 * i + j]
    }

    /// Power of `ω_r` multiplying the normalised entry.
    pub fn omega_exponent(e: Entry) -> i32 {
        match e {
            Entry::H11 => -2,
            Entry::H12 | Entry::H21 => -1,
            Entry::H22 => 0,
        }
    }

    pub fn scale(&self, e: Entry) -> f64 {
        self.omega_r.powi(Self::omega_exponent(e))
    }

    pub fn poles(&self) -> Result<PoleSet> {
        find_poles(&self.char_poly, self.omega_r)
    }
}

/// `H(s)` at complex frequency `s` (physical units).
pub fn transfer_eval(spec: &TransferMatrixSpec, s: Complex64) -> Result<[[Complex64; 2]; 2]> {
    let x = s / spec.omega_r;
    let p = spec.denominator();
    if p.eval_complex(x).norm() <= 1e-14 * p.abs_sum(x) {
        return Err(Error::AtPole { re: s.re, im: s.im });
    }
    let mut h = [[Complex64::new(0.0, 0.0); 2]; 2];
    for e in Entry::ALL {
        let (i, j) = e.index();
        h[i][j] = spec.normalized(e).eval(x) * spec.scale(e);
    }
    Ok(h)
}

/// `H⁻¹(s)` assembled directly from the two resonator equations in Laplace form.
pub fn inverse_transfer(spec: &TransferMatrixSpec, s: Complex64) -> [[Complex64; 2]; 2] {
    let w = spec.omega_r;
    let tau = spec.alpha * spec.g / w;
    [[s * s + w * w * (1.0 - spec.g), -s * spec.g], [Complex64::new(tau * w * w, 0.0), s * tau + 1.0]]
}

/// One row of a pole locus.
#[derive(Debug, Clone, PartialEq)]
pub struct LocusRow {
    pub g: f64,
    pub poles: [Complex64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoleLocus {
    pub alpha: f64,
    pub rows: Vec<LocusRow>,
    /// `g` values between which `Im(s₂)` changed between zero and nonzero.
    pub transitions: Vec<(f64, f64)>,
}

impl PoleLocus {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["g", "re_s1", "im_s1", "re_s2", "im_s2", "re_s3", "im_s3"])?;
        for r in &self.rows {
            let mut rec = vec![fmt_f64(r.g)];
            for z in r.poles {
                rec.push(fmt_f64(z.re));
                rec.push(fmt_f64(z.im));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn cubic_roots(g: f64, alpha: f64) -> Result<[Complex64; 3]> {
    let ps = find_poles(&char_poly(g, alpha)?, 1.0)?;
    if ps.normalized.len() != 3 {
        return Err(Error::validation(format!("g = {g} gives a degenerate polynomial; use g in (0, 1)")));
    }
    Ok([ps.normalized[0], ps.normalized[1], ps.normalized[2]])
}

const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Best and second-best total displacement over all assignments.
fn best_assignment(prev: &[Complex64; 3], next: &[Complex64; 3]) -> ([Complex64; 3], f64, f64) {
    let mut costs: Vec<(f64, [usize; 3])> = PERMS
        .iter()
        .map(|p| ((0..3).map(|i| (prev[i] - next[p[i]]).norm()).sum(), *p))
        .collect();
    costs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let p = costs[0].1;
    ([next[p[0]], next[p[1]], next[p[2]]], costs[0].0, costs[1].0)
}

fn track_step(prev: &[Complex64; 3], g0: f64, g1: f64, alpha: f64, depth: u32) -> Result<[Complex64; 3]> {
    let next = cubic_roots(g1, alpha)?;
    let (assigned, best, second) = best_assignment(prev, &next);
    if depth < 30 && second < 2.0 * best && best > 0.0 {
        let mid = 0.5 * (g0 + g1);
        let half = track_step(prev, g0, mid, alpha, depth + 1)?;
        return track_step(&half, mid, g1, alpha, depth + 1);
    }
    Ok(assigned)
}

/// Branch-tracked poles over a strictly increasing grid in `(0, 1)`.
pub fn pole_locus(alpha: f64, g_grid: &[f64]) -> Result<PoleLocus> {
    if g_grid.is_empty() {
        return Err(Error::validation("empty g grid"));
    }
    if let Some(&g) = g_grid.iter().find(|&&g| !(g > 0.0 && g < 1.0)) {
        return Err(Error::OutOfDomain { what: "g", value: g, lo: 0.0, hi: 1.0 });
    }
    if g_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation("g grid must be strictly increasing"));
    }
    let mut rows = Vec::with_capacity(g_grid.len());
    let mut transitions = Vec::new();
    let mut cur = cubic_roots(g_grid[0], alpha)?;
    rows.push(LocusRow { g: g_grid[0], poles: cur });
    for w in g_grid.windows(2) {
        let mut next = track_step(&cur, w[0], w[1], alpha, 0)?;
        if next[1].im != 0.0 && next[2].im != 0.0 && next[1].im < 0.0 {
            next.swap(1, 2);
        }
        if next[1].im == 0.0 && next[2].im == 0.0 && cur[1].im != 0.0 && next[1].re < next[2].re {
            next.swap(1, 2);
        }
        if (cur[1].im == 0.0) != (next[1].im == 0.0) {
            transitions.push((w[0], w[1]));
        }
        rows.push(LocusRow { g: w[1], poles: next });
        cur = next;
    }
    Ok(PoleLocus { alpha, rows, transitions })
}

/// `0.001, 0.002, ..., 0.999`.
pub fn default_g_grid() -> Vec<f64> {
    (1..1000).map(|k| k as f64 / 1000.0).collect()
}
