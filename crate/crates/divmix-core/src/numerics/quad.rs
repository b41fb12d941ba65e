//! Adaptive Gauss–Kronrod (7/15) quadrature with a composite Gauss–Legendre
//! fallback, infinite-range maps and the quantile change of variable.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QuadMethod {
    AdaptiveWithGLFallback,
    FixedGaussLegendre(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QuadTransform {
    None,
    /// Cut infinite ends where |f| drops below the given level.
    TailTruncation(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub method: QuadMethod,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub transform: QuadTransform,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            method: QuadMethod::AdaptiveWithGLFallback,
            abs_tol: 1e-8,
            rel_tol: 1e-6,
            transform: QuadTransform::None,
            max_subdivisions: 400,
        }
    }
}

impl QuadratureSpec {
    pub fn tight() -> Self {
        QuadratureSpec { abs_tol: 1e-12, rel_tol: 1e-10, max_subdivisions: 2000, ..Default::default() }
    }

    pub fn with_tol(mut self, abs_tol: f64, rel_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }

    pub fn gauss_legendre(n: usize) -> Self {
        QuadratureSpec { method: QuadMethod::FixedGaussLegendre(n), ..Default::default() }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (1.0, 0.0);
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
                }
                pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * pp * pp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Applies the rule on [a, b]. Stops at the first non-finite value.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, f: &mut F, a: f64, b: f64) -> Result<f64> {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let xx = c + h * x;
            let v = f(xx);
            if !v.is_finite() {
                return Err(Error::Integration { at: xx, msg: format!("integrand is {v}") });
            }
            s += w * v;
        }
        Ok(s * h)
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<Segment> {
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    let mut check = |x: f64| -> Result<f64> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Integration { at: x, msg: format!("integrand is {v}") })
        }
    };
    let fc = check(c)?;
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = check(c - dx)? + check(c + dx)?;
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    Ok(Segment { a, b, value: k * h, err: ((k - g) * h).abs() })
}

/// Adaptive integration over the consecutive panels given by `breaks`
/// (finite, increasing). Falls back to a composite 20-point Gauss–Legendre
/// rule when the subdivision budget runs out.
pub fn integrate_breaks<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], spec: &QuadratureSpec) -> Result<f64> {
    assert!(breaks.len() >= 2);
    if let QuadMethod::FixedGaussLegendre(n) = spec.method {
        let gl = GaussLegendre::new(n);
        let mut s = 0.0;
        for w in breaks.windows(2) {
            s += gl.integrate(&mut f, w[0], w[1])?;
        }
        return Ok(s);
    }
    let mut segs = Vec::with_capacity(spec.max_subdivisions + breaks.len());
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            segs.push(kronrod(&mut f, w[0], w[1])?);
        }
    }
    loop {
        let total: f64 = segs.iter().map(|s| s.value).sum();
        let err: f64 = segs.iter().map(|s| s.err).sum();
        if err <= spec.abs_tol.max(spec.rel_tol * total.abs()) {
            return Ok(total);
        }
        if segs.len() >= spec.max_subdivisions {
            break;
        }
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .unwrap();
        let s = segs.swap_remove(idx);
        let m = 0.5 * (s.a + s.b);
        if !(m > s.a && m < s.b) {
            // interval cannot be split further in floating point
            segs.push(Segment { err: 0.0, ..s });
            continue;
        }
        segs.push(kronrod(&mut f, s.a, m)?);
        segs.push(kronrod(&mut f, m, s.b)?);
    }
    // fallback: composite Gauss–Legendre over the refined partition
    let gl = GaussLegendre::new(20);
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut total = 0.0;
    for s in &segs {
        total += gl.integrate(&mut f, s.a, s.b)?;
    }
    Ok(total)
}

/// ∫_lo^hi f. Either end may be infinite; half-lines use
/// x = a ± s·t/(1−t) and the full line x = c + s·t/(1−t²).
pub fn integrate<F: FnMut(f64) -> f64>(f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<f64> {
    integrate_scaled(f, lo, hi, 0.0, 1.0, spec)
}

/// Like [`integrate`], with a centre and length scale used by the infinite
/// range maps (and by the tail scan).
pub fn integrate_scaled<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    center: f64,
    scale: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if lo.is_nan() || hi.is_nan() {
        return Err(Error::Integration { at: f64::NAN, msg: "NaN integration limit".into() });
    }
    if lo == hi {
        return Ok(0.0);
    }
    if lo > hi {
        return integrate_scaled(f, hi, lo, center, scale, spec).map(|v| -v);
    }
    let s = scale.abs().max(1e-300);
    if let QuadTransform::TailTruncation(eps) = spec.transform {
        let a = if lo.is_finite() { lo } else { scan_tail(&mut f, center.min(hi), -s, eps) };
        let b = if hi.is_finite() { hi } else { scan_tail(&mut f, center.max(lo), s, eps) };
        let inner = QuadratureSpec { transform: QuadTransform::None, ..*spec };
        let mid = center.clamp(a, b);
        let breaks: Vec<f64> = if mid > a && mid < b { vec![a, mid, b] } else { vec![a, b] };
        return integrate_breaks(f, &breaks, &inner);
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => integrate_breaks(f, &[lo, hi], spec),
        (true, false) => integrate_breaks(
            |t| {
                let x = lo + s * t / (1.0 - t);
                let v = f(x);
                if v == 0.0 { 0.0 } else { v * s / ((1.0 - t) * (1.0 - t)) }
            },
            &[0.0, 0.5, 1.0],
            spec,
        ),
        (false, true) => integrate_breaks(
            |t| {
                let x = hi - s * t / (1.0 - t);
                let v = f(x);
                if v == 0.0 { 0.0 } else { v * s / ((1.0 - t) * (1.0 - t)) }
            },
            &[0.0, 0.5, 1.0],
            spec,
        ),
        (false, false) => integrate_breaks(
            |t| {
                let d = 1.0 - t * t;
                let x = center + s * t / d;
                let v = f(x);
                if v == 0.0 { 0.0 } else { v * s * (1.0 + t * t) / (d * d) }
            },
            &[-1.0, -0.5, 0.0, 0.5, 1.0],
            spec,
        ),
    }
}

fn scan_tail<F: FnMut(f64) -> f64>(f: &mut F, from: f64, step: f64, eps: f64) -> f64 {
    let mut x = from + step;
    let mut h = step;
    let mut quiet = 0;
    for _ in 0..200 {
        if f(x).abs() < eps {
            quiet += 1;
            if quiet >= 2 {
                return x;
            }
        } else {
            quiet = 0;
        }
        h *= 1.5;
        x += h;
    }
    x
}

/// ∫₀¹ g(Q(u)) du, i.e. E[g(X)] for X with quantile function Q.
pub fn integrate_quantile<G: FnMut(f64) -> f64, Q: Fn(f64) -> f64>(
    mut g: G,
    quantile: Q,
    spec: &QuadratureSpec,
) -> Result<f64> {
    integrate_breaks(
        |u| g(quantile(u)),
        &[0.0, 1e-6, 1e-3, 0.05, 0.5, 0.95, 1.0 - 1e-3, 1.0 - 1e-6, 1.0],
        spec,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_on_half_line() {
        let v = integrate(|x: f64| (-x).exp(), 0.0, f64::INFINITY, &QuadratureSpec::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-8);
    }

    #[test]
    fn gaussian_on_line() {
        let c = (2.0 * std::f64::consts::PI).sqrt();
        let v = integrate(|x: f64| (-0.5 * x * x).exp() / c, f64::NEG_INFINITY, f64::INFINITY, &QuadratureSpec::tight())
            .unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gl_exact_on_polynomials() {
        for n in [2usize, 5, 10, 20] {
            let gl = GaussLegendre::new(n);
            let deg = 2 * n - 1;
            let v = gl.integrate(&mut |x: f64| x.powi(deg as i32 - 1) + x.powi(deg as i32), 0.0, 1.0).unwrap();
            let exact = 1.0 / deg as f64 + 1.0 / (deg + 1) as f64;
            assert!((v - exact).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn non_finite_reports_location() {
        let e = integrate(|x: f64| if x > 0.5 { f64::INFINITY } else { 1.0 }, 0.0, 1.0, &QuadratureSpec::default());
        match e {
            Err(Error::Integration { at, .. }) => assert!(at > 0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tail_truncation() {
        let spec = QuadratureSpec { transform: QuadTransform::TailTruncation(1e-14), ..Default::default() };
        let v = integrate(|x: f64| (-x.abs()).exp() * 0.5, f64::NEG_INFINITY, f64::INFINITY, &spec).unwrap();
        assert!((v - 1.0).abs() < 1e-8);
    }
}
