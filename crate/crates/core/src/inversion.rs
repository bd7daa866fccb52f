//! Impulse responses of the transfer matrix: Bromwich-contour IFFT inversion,
//! residue (partial-fraction) inversion, and responses to the source terms.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::poly::Rational;
use crate::signal::{fmt_f64, Normalization, OutOfDomain, Signal, TimeGrid};
use crate::spectral::{Entry, LcExampleParams, TransferMatrixSpec};

/// Tail terms `c_j/(s + b)^j` subtracted before the FFT and added back analytically.
const TAIL_TERMS: usize = 8;
const TAIL_SHIFT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IfftOptions {
    pub n_samples: usize,
    /// Bromwich abscissa; by default `0.1·min|Re pole| + 1/t_max`.
    pub sigma: Option<f64>,
}

impl Default for IfftOptions {
    fn default() -> Self {
        Self { n_samples: 65_536, sigma: None }
    }
}

#[derive(Debug, Clone)]
pub struct IfftResult {
    pub signal: Signal,
    pub sigma: f64,
    pub period: f64,
    /// Largest imaginary part left after the inverse transform.
    pub imag_residue: f64,
    /// `max|h|·e^{−σT}`, the wrap-around contribution of the next period.
    pub alias_bound: f64,
}

/// Inverts a strictly proper rational `r(s)` on `[0, t_max]`.
///
/// `poles` are the roots of the denominator and only fix the default abscissa
/// and the admissibility check.
pub fn invert_ifft_rational(
    r: &Rational,
    poles: &[Complex64],
    t_max: f64,
    opts: IfftOptions,
) -> Result<IfftResult> {
    let n = opts.n_samples;
    if n < 1024 || !n.is_power_of_two() {
        return Err(Error::validation(format!("n_samples must be a power of two >= 1024 (got {n})")));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::validation("t_max must be positive"));
    }
    if !r.is_strictly_proper() {
        return Err(Error::Improper { num: r.num.degree(), den: r.den.degree() });
    }
    let max_re = poles.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let slowest = poles.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
    let sigma = opts.sigma.unwrap_or_else(|| {
        let base = if slowest.is_finite() { 0.1 * slowest } else { 0.0 };
        base.max(max_re.max(0.0)) + 1.0 / t_max
    });
    if !(sigma > max_re) {
        return Err(Error::ContourCrossesPole { sigma, max_re });
    }
    let period = (2.0 * t_max).max(36.0 / sigma);
    let dt = period / n as f64;
    let tail = r.expansion_at_infinity(TAIL_SHIFT, TAIL_TERMS)?;
    let tail_eval = |s: Complex64| -> Complex64 {
        let w = (s + TAIL_SHIFT).inv();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut pw = w;
        for c in &tail {
            acc += pw * *c;
            pw *= w;
        }
        acc
    };
    let smooth = |s: Complex64| r.eval(s) - tail_eval(s);
    let mut buf: Vec<Complex64> = (0..n)
        .map(|k| {
            let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
            let w = std::f64::consts::TAU * kk / period;
            let s = Complex64::new(sigma, w);
            if k == n / 2 {
                // Nyquist: half of +ω and half of −ω
                Complex64::new(smooth(s).re, 0.0)
            } else {
                smooth(s)
            }
        })
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n).process(&mut buf);
    let len = ((t_max / dt).floor() as usize + 1).min(n);
    let mut samples = Vec::with_capacity(len);
    let mut imag_residue = 0.0_f64;
    for (j, z) in buf.iter().take(len).enumerate() {
        let t = j as f64 * dt;
        let scale = (sigma * t).exp() / period;
        imag_residue = imag_residue.max((z.im * scale).abs());
        let mut tail_t = 0.0;
        let mut fact = 1.0;
        for (i, c) in tail.iter().enumerate() {
            if i > 0 {
                fact *= i as f64;
            }
            tail_t += c * t.powi(i as i32) / fact;
        }
        samples.push(z.re * scale + tail_t * (-TAIL_SHIFT * t).exp());
    }
    let signal = Signal::new(TimeGrid::new(0.0, dt, len)?, samples)?;
    let alias_bound = signal.max_abs().0 * (-sigma * period).exp();
    Ok(IfftResult { signal, sigma, period, imag_residue, alias_bound })
}

/// IFFT inversion of one transfer-matrix entry on `[0, t_max]` (physical time).
///
/// The inversion runs in normalised time `ω_r t`; the result is rescaled to
/// `h(t) = ω_r^{e+1} r(ω_r t)` where `ω_r^e` is the entry prefactor.
pub fn invert_ifft(spec: &TransferMatrixSpec, entry: Entry, t_max: f64, opts: IfftOptions) -> Result<IfftResult> {
    let w = spec.omega_r;
    let poles = spec.poles()?;
    let opts = IfftOptions { sigma: opts.sigma.map(|s| s / w), ..opts };
    let mut res = invert_ifft_rational(spec.normalized(entry), &poles.normalized, t_max * w, opts)?;
    let amp = spec.scale(entry) * w;
    let g = res.signal.grid();
    let grid = TimeGrid::new(0.0, g.dt() / w, g.len())?;
    res.signal = Signal::new(grid, res.signal.samples().iter().map(|v| v * amp).collect())?;
    res.sigma *= w;
    res.period /= w;
    res.imag_residue *= amp.abs();
    res.alias_bound *= amp.abs();
    Ok(res)
}

/// `r(s) = Σ R_i/(s − s_i)` for simple poles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialFractions {
    #[serde(serialize_with = "ser_complex")]
    pub poles: Vec<Complex64>,
    #[serde(serialize_with = "ser_complex")]
    pub residues: Vec<Complex64>,
    pub relative_degree: isize,
}

fn ser_complex<S: serde::Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

impl PartialFractions {
    pub fn new(r: &Rational) -> Result<Self> {
        if !r.is_strictly_proper() {
            return Err(Error::Improper { num: r.num.degree(), den: r.den.degree() });
        }
        let poles = r.den.roots()?;
        let scale = poles.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let mut sep = f64::INFINITY;
        for i in 0..poles.len() {
            for j in i + 1..poles.len() {
                sep = sep.min((poles[i] - poles[j]).norm());
            }
        }
        if sep <= 1e-6 * scale {
            return Err(Error::RepeatedPoles { separation: sep });
        }
        let d = r.den.derivative();
        let residues = poles.iter().map(|&z| r.num.eval_complex(z) / d.eval_complex(z)).collect();
        Ok(Self { poles, residues, relative_degree: r.relative_degree() })
    }

    /// `Σ R_i s_iᵏ e^{s_i t}`, complex.
    fn moment(&self, k: i32, t: f64) -> Complex64 {
        self.poles.iter().zip(&self.residues).map(|(s, r)| r * s.powi(k) * (s * t).exp()).sum()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.moment(0, t).re
    }

    /// Imaginary part left over by the conjugate pairing; zero up to round-off.
    pub fn eval_imag(&self, t: f64) -> f64 {
        self.moment(0, t).im
    }

    /// `dh/dt` for `t > 0` from the residue form; needs relative degree ≥ 2
    /// so that `h(0⁺) = 0` and no impulse appears.
    pub fn eval_derivative(&self, t: f64) -> Result<f64> {
        if self.relative_degree < 2 {
            return Err(Error::InvalidSource(format!(
                "derivative of an entry with relative degree {} contains an impulse",
                self.relative_degree
            )));
        }
        Ok(self.moment(1, t).re)
    }

    /// `Σ R_i s_iᵏ`, which equals the `1/s^{k+1}` coefficient at infinity.
    pub fn residue_moment(&self, k: i32) -> Complex64 {
        self.poles.iter().zip(&self.residues).map(|(s, r)| r * s.powi(k)).sum()
    }
}

fn entry_fractions(spec: &TransferMatrixSpec, entry: Entry) -> Result<PartialFractions> {
    PartialFractions::new(spec.normalized(entry))
}

/// Exact impulse response of one entry sampled on `grid` (physical time).
pub fn invert_partial_fractions(spec: &TransferMatrixSpec, entry: Entry, grid: TimeGrid) -> Result<Signal> {
    let pf = entry_fractions(spec, entry)?;
    let w = spec.omega_r;
    let amp = spec.scale(entry) * w;
    Signal::from_fn(grid, |t| amp * pf.eval(w * t))
}

/// Divides by the largest absolute sample and records the divisor.
pub fn normalize_max_abs(sig: &Signal) -> Result<Signal> {
    let (m, at) = sig.max_abs();
    if m == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let mut out = sig.map(|v| v / m);
    out.normalization = Some(Normalization { divisor: m, at });
    Ok(out)
}

/// Writes the four entries, in `Entry::ALL` order, as `t,h11,h12,h21,h22`.
pub fn write_impulse_csv<W: std::io::Write>(out: W, entries: &[Signal; 4]) -> Result<()> {
    let grid = *entries[0].grid();
    if entries.iter().any(|s| *s.grid() != grid) {
        return Err(Error::validation("impulse entries must share one time grid"));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "h11", "h12", "h21", "h22"])?;
    for (i, t) in grid.times().enumerate() {
        let mut rec = vec![fmt_f64(t)];
        rec.extend(entries.iter().map(|s| fmt_f64(s.samples()[i])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `f(t) = a·δ(t) + b·δ̇(t) + r(t)`.
#[derive(Debug, Clone, Default)]
pub struct SourceTerm {
    pub delta: f64,
    pub delta_dot: f64,
    pub regular: Option<Signal>,
}

impl SourceTerm {
    pub fn impulse(a: f64) -> Self {
        Self { delta: a, ..Default::default() }
    }
}

/// The two source terms `f₁` and `f₂` driving `[Φ₁, V₀]ᵀ = H [f₁, f₂]ᵀ`.
#[derive(Debug, Clone, Default)]
pub struct SourceSpec {
    pub f1: SourceTerm,
    pub f2: SourceTerm,
}

impl SourceSpec {
    /// Sources for initial data `(Φ₁, Q₁, Q₀)` and an incoming wave `v←(t)`:
    /// `f₁ = Φ₁δ̇ + [(Q₁+Q₀)/C_r − (C_p/C_r)V₀]δ`, `f₂ = τV₀δ + 2v←`,
    /// where `V₀ = Q₁/C_r + Q₀/C_p`.
    pub fn from_initial(
        params: &LcExampleParams,
        phi1: f64,
        q1: f64,
        q0: f64,
        backward: Option<Signal>,
    ) -> Self {
        let c_r = params.c_r;
        let c_p = params.c_p();
        let v0 = q1 / c_r + q0 / c_p;
        Self {
            f1: SourceTerm { delta: (q1 + q0) / c_r - c_p / c_r * v0, delta_dot: phi1, regular: None },
            f2: SourceTerm { delta: params.tau() * v0, delta_dot: 0.0, regular: backward.map(|s| s.map(|v| 2.0 * v)) },
        }
    }
}

/// Responses `Φ₁(t)` and `V₀(t)` on `grid` (which must start at 0).
pub fn respond(spec: &TransferMatrixSpec, sources: &SourceSpec, grid: TimeGrid) -> Result<(Signal, Signal)> {
    if grid.t0() != 0.0 {
        return Err(Error::validation("response grid must start at t = 0"));
    }
    let w = spec.omega_r;
    let mut out = [vec![0.0; grid.len()], vec![0.0; grid.len()]];
    let terms = [(&sources.f1, 0usize), (&sources.f2, 1usize)];
    for (row, acc) in out.iter_mut().enumerate() {
        for &(src, col) in &terms {
            let entry = match (row, col) {
                (0, 0) => Entry::H11,
                (0, _) => Entry::H12,
                (_, 0) => Entry::H21,
                _ => Entry::H22,
            };
            if src.delta == 0.0 && src.delta_dot == 0.0 && src.regular.is_none() {
                continue;
            }
            let pf = entry_fractions(spec, entry)?;
            let amp = spec.scale(entry) * w;
            if src.delta_dot != 0.0 && pf.relative_degree < 2 {
                return Err(Error::InvalidSource(format!(
                    "δ̇ term paired with {} (relative degree {})",
                    entry.name(),
                    pf.relative_degree
                )));
            }
            let h: Vec<f64> = grid.times().map(|t| amp * pf.eval(w * t)).collect();
            for (i, t) in grid.times().enumerate() {
                acc[i] += src.delta * h[i];
                if src.delta_dot != 0.0 {
                    acc[i] += src.delta_dot * amp * w * pf.eval_derivative(w * t)?;
                }
            }
            if let Some(reg) = &src.regular {
                let f: Vec<f64> =
                    grid.times().map(|t| reg.value_at(t, OutOfDomain::Error)).collect::<Result<_>>()?;
                let conv = convolve_trapezoid(&h, &f, grid.dt());
                for (a, c) in acc.iter_mut().zip(conv) {
                    *a += c;
                }
            }
        }
    }
    let [phi, v0] = out;
    Ok((Signal::new(grid, phi)?, Signal::new(grid, v0)?))
}

/// `(h ∗ f)(t_i)` by the trapezoid rule on a shared uniform grid.
fn convolve_trapezoid(h: &[f64], f: &[f64], dt: f64) -> Vec<f64> {
    (0..h.len())
        .map(|i| {
            if i == 0 {
                return 0.0;
            }
            let mut s = 0.5 * (h[0] * f[i] + h[i] * f[0]);
            for k in 1..i {
                s += h[k] * f[i - k];
            }
            s * dt
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly;

    fn first_order(a: f64) -> Rational {
        Rational::new(Poly::new(vec![1.0]), Poly::new(vec![a, 1.0])).unwrap()
    }

    #[test]
    fn ifft_of_exponential_kernel() {
        let tau = 0.7;
        let r = first_order(1.0 / tau);
        let poles = [Complex64::new(-1.0 / tau, 0.0)];
        let res = invert_ifft_rational(&r, &poles, 5.0, IfftOptions { n_samples: 8192, sigma: None }).unwrap();
        let err = res.signal.iter().map(|(t, v)| (v - (-t / tau).exp()).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-6, "{err}");
        assert!(res.imag_residue < 1e-6);
    }

    #[test]
    fn ifft_refuses_bad_inputs() {
        let r = first_order(1.0);
        let poles = [Complex64::new(-1.0, 0.0)];
        let bad_n = IfftOptions { n_samples: 1000, sigma: None };
        assert!(invert_ifft_rational(&r, &poles, 1.0, bad_n).is_err());
        let crossing = IfftOptions { n_samples: 1024, sigma: Some(-2.0) };
        assert!(matches!(
            invert_ifft_rational(&r, &poles, 1.0, crossing),
            Err(Error::ContourCrossesPole { .. })
        ));
        let improper = Rational::new(Poly::new(vec![1.0, 1.0]), Poly::new(vec![1.0, 1.0])).unwrap();
        assert!(matches!(
            invert_ifft_rational(&improper, &poles, 1.0, IfftOptions::default()),
            Err(Error::Improper { .. })
        ));
    }

    #[test]
    fn decoupled_h22_is_distributional() {
        let spec = TransferMatrixSpec::new(0.0, 1.0, 1.0).unwrap();
        let pf = PartialFractions::new(spec.normalized(Entry::H22));
        assert!(matches!(pf, Err(Error::Improper { .. })));
    }

    #[test]
    fn partial_fractions_of_simple_pole() {
        let pf = PartialFractions::new(&first_order(2.5)).unwrap();
        for t in [0.0, 0.3, 2.0] {
            assert!((pf.eval(t) - (-2.5 * t).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn residue_moments_reproduce_numerator() {
        let spec = TransferMatrixSpec::new(0.3, 2.0, 1.0).unwrap();
        let pf = PartialFractions::new(spec.normalized(Entry::H11)).unwrap();
        // N/p = Σ R/(s − s_i) = Σ_k (Σ R s_iᵏ)/s^{k+1}; N = αg x + 1, p = αg x³ + …
        let lead = spec.char_poly.coeffs[0];
        assert!(pf.residue_moment(0).norm() < 1e-13);
        assert!((pf.residue_moment(1) - 0.6 / lead).norm() < 1e-13);
        let c = spec.normalized(Entry::H11).expansion_at_infinity(0.0, 3).unwrap();
        assert!((pf.residue_moment(2).re - c[2]).abs() < 1e-12);
        for t in [0.1, 1.0, 7.0] {
            assert!(pf.eval_imag(t).abs() < 1e-14);
        }
    }

    #[test]
    fn derivative_requires_relative_degree_two() {
        let spec = TransferMatrixSpec::new(0.3, 2.0, 1.0).unwrap();
        let h22 = PartialFractions::new(spec.normalized(Entry::H22)).unwrap();
        assert!(h22.eval_derivative(1.0).is_err());
        let h11 = PartialFractions::new(spec.normalized(Entry::H11)).unwrap();
        let d = h11.eval_derivative(1.0).unwrap();
        let fd = (h11.eval(1.0 + 1e-6) - h11.eval(1.0 - 1e-6)) / 2e-6;
        assert!((d - fd).abs() < 1e-8);
    }

    #[test]
    fn normalization_record() {
        let grid = TimeGrid::span(5.0, 500).unwrap();
        let s = Signal::from_fn(grid, |_| 3.0).unwrap();
        let n = normalize_max_abs(&s).unwrap();
        assert!(n.samples().iter().all(|&v| v == 1.0));
        assert_eq!(n.normalization.unwrap().divisor, 3.0);
        let s = Signal::from_fn(grid, |t| (-t).exp() * (10.0 * t).cos()).unwrap();
        let n = normalize_max_abs(&s).unwrap();
        assert_eq!(n.normalization.unwrap().at, 0.0);
        assert_eq!(n.normalization.unwrap().divisor, 1.0);
        assert!(matches!(normalize_max_abs(&Signal::zeros(grid)), Err(Error::ZeroSignal)));
    }

    #[test]
    fn zero_sources_give_zero_response() {
        let spec = TransferMatrixSpec::new(0.3, 2.0, 1.0).unwrap();
        let grid = TimeGrid::span(10.0, 100).unwrap();
        let rest = Signal::zeros(grid);
        let src = SourceSpec { f1: SourceTerm::default(), f2: SourceTerm { regular: Some(rest), ..Default::default() } };
        let (phi, v0) = respond(&spec, &src, grid).unwrap();
        assert!(phi.samples().iter().chain(v0.samples()).all(|&v| v == 0.0));
    }

    #[test]
    fn delta_dot_on_h22_is_refused() {
        let spec = TransferMatrixSpec::new(0.3, 2.0, 1.0).unwrap();
        let grid = TimeGrid::span(1.0, 10).unwrap();
        let src = SourceSpec { f1: SourceTerm::default(), f2: SourceTerm { delta_dot: 1.0, ..Default::default() } };
        assert!(matches!(respond(&spec, &src, grid), Err(Error::InvalidSource(_))));
    }

    #[test]
    fn trapezoid_convolution_of_constants() {
        let h = vec![1.0; 11];
        let c = convolve_trapezoid(&h, &h, 0.1);
        assert!((c[10] - 1.0).abs() < 1e-14);
    }
}
