//! Real-coefficient polynomials, rational functions and their roots.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Polynomial with real coefficients stored lowest power first.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    /// Trailing (highest-power) zeros are dropped.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1] == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    /// From coefficients listed highest power first.
    pub fn from_descending(desc: &[f64]) -> Self {
        Self::new(desc.iter().rev().copied().collect())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[self.coeffs.len() - 1]
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Σ |a_i| |z|^i, the natural scale of `eval_complex(z)`.
    pub fn abs_sum(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c.abs())
    }

    /// `|p(z)| / Σ|a_i||z|^i`: the relative backward error of `z` as a root.
    pub fn backward_error(&self, z: Complex64) -> f64 {
        let scale = self.abs_sum(z);
        if scale == 0.0 {
            0.0
        } else {
            self.eval_complex(z).norm() / scale
        }
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() == 1 {
            return Poly::new(vec![0.0]);
        }
        Poly::new(self.coeffs.iter().enumerate().skip(1).map(|(i, &c)| c * i as f64).collect())
    }

    pub fn scale(&self, k: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|&c| c * k).collect())
    }

    /// Coefficients of `q(u) = p(u - shift)`.
    pub fn shifted(&self, shift: f64) -> Poly {
        // repeated synthetic division (Taylor shift)
        let mut c = self.coeffs.clone();
        let n = c.len();
        for i in 0..n {
            for j in (i..n - 1).rev() {
                c[j] -= shift * c[j + 1];
            }
        }
        Poly::new(c)
    }

    /// All complex roots: eigenvalues of the companion matrix, then one Newton
    /// polish each. Conjugate pairs are made exactly conjugate and near-real
    /// roots are snapped to the real axis.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let n = self.degree();
        if self.is_zero() {
            return Err(Error::validation("roots of the zero polynomial"));
        }
        if self.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::validation("polynomial has non-finite coefficients"));
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        let lead = self.leading();
        let mut companion = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            companion[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            companion[(i, n - 1)] = -self.coeffs[i] / lead;
        }
        let eig = companion.complex_eigenvalues();
        let d = self.derivative();
        let mut roots: Vec<Complex64> = eig
            .iter()
            .map(|&z| {
                let z = Complex64::new(z.re, z.im);
                let dp = d.eval_complex(z);
                if dp.norm() == 0.0 {
                    return z;
                }
                let step = self.eval_complex(z) / dp;
                let polished = z - step;
                // keep the polish only if it does not make things worse
                if polished.is_finite() && self.backward_error(polished) <= self.backward_error(z) {
                    polished
                } else {
                    z
                }
            })
            .collect();
        pair_conjugates(&mut roots);
        Ok(roots)
    }
}

/// Enforces exact conjugate symmetry of the root set of a real polynomial.
fn pair_conjugates(roots: &mut [Complex64]) {
    let n = roots.len();
    let scale = roots.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
    let tol = 1e-10 * scale;
    let mut used = vec![false; n];
    for i in 0..n {
        if used[i] {
            continue;
        }
        if roots[i].im.abs() <= tol {
            // a lone near-real root is real
            let partner = (0..n)
                .filter(|&j| j != i && !used[j])
                .filter(|&j| (roots[j] - roots[i].conj()).norm() <= tol && roots[j].im.abs() <= tol)
                .next();
            if partner.is_none() {
                roots[i].im = 0.0;
                used[i] = true;
                continue;
            }
        }
        let target = roots[i].conj();
        let best = (0..n)
            .filter(|&j| j != i && !used[j])
            .min_by(|&a, &b| (roots[a] - target).norm().total_cmp(&(roots[b] - target).norm()));
        match best {
            Some(j) if (roots[j] - target).norm() <= 1e-6 * scale => {
                let re = 0.5 * (roots[i].re + roots[j].re);
                let im = 0.5 * (roots[i].im.abs() + roots[j].im.abs());
                if im <= tol {
                    roots[i] = Complex64::new(roots[i].re, 0.0);
                    roots[j] = Complex64::new(roots[j].re, 0.0);
                } else {
                    roots[i] = Complex64::new(re, im);
                    roots[j] = Complex64::new(re, -im);
                }
                used[i] = true;
                used[j] = true;
            }
            _ => {
                roots[i].im = 0.0;
                used[i] = true;
            }
        }
    }
}

/// `num(s) / den(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rational {
    pub num: Poly,
    pub den: Poly,
}

impl Rational {
    pub fn new(num: Poly, den: Poly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::validation("rational function with zero denominator"));
        }
        Ok(Self { num, den })
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.num.eval_complex(s) / self.den.eval_complex(s)
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() < self.den.degree()
    }

    /// Degree of the denominator minus degree of the numerator.
    pub fn relative_degree(&self) -> isize {
        if self.num.is_zero() {
            return isize::MAX;
        }
        self.den.degree() as isize - self.num.degree() as isize
    }

    /// First `terms` coefficients `c_j` of the expansion
    /// `num/den = Σ_{j≥1} c_j (s + shift)^{-j}` about `s = ∞`.
    pub fn expansion_at_infinity(&self, shift: f64, terms: usize) -> Result<Vec<f64>> {
        if !self.is_strictly_proper() {
            return Err(Error::Improper { num: self.num.degree(), den: self.den.degree() });
        }
        let mut c = vec![0.0; terms];
        if self.num.is_zero() {
            return Ok(c);
        }
        let num = self.num.shifted(shift);
        let den = self.den.shifted(shift);
        let (m, n) = (num.degree(), den.degree());
        // series in w = 1/u of num~(w) / den~(w)
        let nt = |i: usize| if i <= m { num.coeffs()[m - i] } else { 0.0 };
        let dt = |i: usize| if i <= n { den.coeffs()[n - i] } else { 0.0 };
        let lag = n - m;
        let mut e = Vec::with_capacity(terms);
        for k in 0..terms {
            let mut acc = nt(k);
            for i in 1..=k {
                acc -= dt(i) * e[k - i];
            }
            e.push(acc / dt(0));
        }
        for j in 1..=terms {
            if j >= lag {
                c[j - 1] = e[j - lag];
            }
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_and_derivative() {
        let p = Poly::from_descending(&[2.0, -3.0, 0.0, 5.0]); // 2x^3 - 3x^2 + 5
        assert_eq!(p.eval(2.0), 9.0);
        assert_eq!(p.derivative().coeffs(), &[0.0, -6.0, 6.0]);
        assert_eq!(p.degree(), 3);
        assert_eq!(Poly::new(vec![1.0, 0.0, 0.0]).degree(), 0);
    }

    #[test]
    fn taylor_shift_matches_direct_evaluation() {
        let p = Poly::from_descending(&[0.6, 1.0, 0.6, 0.7]);
        let q = p.shifted(1.5);
        for &u in &[-2.0, 0.0, 0.3, 4.0] {
            assert!((q.eval(u) - p.eval(u - 1.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn roots_of_known_cubic() {
        // (x + 1)(x^2 + 4) = x^3 + x^2 + 4x + 4
        let p = Poly::from_descending(&[1.0, 1.0, 4.0, 4.0]);
        let mut r = p.roots().unwrap();
        r.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((r[0] - Complex64::new(0.0, -2.0)).norm() < 1e-13);
        assert_eq!(r[1], Complex64::new(-1.0, 0.0));
        assert_eq!(r[2], r[0].conj());
    }

    #[test]
    fn expansion_at_infinity_of_simple_pole() {
        // 1/(s + 2) about shift 1: 1/(u + 1) = 1/u - 1/u^2 + 1/u^3 - ...
        let r = Rational::new(Poly::new(vec![1.0]), Poly::new(vec![2.0, 1.0])).unwrap();
        let c = r.expansion_at_infinity(1.0, 4).unwrap();
        assert_eq!(c, vec![1.0, -1.0, 1.0, -1.0]);
        // relative degree 2: s / (s+1)^3 = (u-1)/u^3 with shift 1
        let r = Rational::new(Poly::new(vec![0.0, 1.0]), Poly::from_descending(&[1.0, 3.0, 3.0, 1.0])).unwrap();
        let c = r.expansion_at_infinity(1.0, 4).unwrap();
        assert!(c[0].abs() < 1e-15);
        assert!((c[1] - 1.0).abs() < 1e-15);
        assert!((c[2] + 1.0).abs() < 1e-15);
        assert!(c[3].abs() < 1e-15);
    }

    #[test]
    fn improper_expansion_is_refused() {
        let r = Rational::new(Poly::new(vec![1.0, 1.0]), Poly::new(vec![1.0, 1.0])).unwrap();
        assert!(matches!(r.expansion_at_infinity(1.0, 2), Err(Error::Improper { .. })));
    }
}
