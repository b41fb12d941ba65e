//! Cressie–Read generators, their conjugates, divergence evaluation and the
//! TVD / √χ² error criteria.
//!
//! The γ = 1/2 member is φ(t) = 2(√t − 1)², four times the "(√t − 1)²/2"
//! Hellinger normalisation. Minimisers do not depend on the factor.

use crate::numerics::{integrate_scaled, QuadratureSpec};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiGenerator {
    pub gamma: f64,
}

impl PhiGenerator {
    pub fn new(gamma: f64) -> Self {
        PhiGenerator { gamma }
    }
    pub fn hellinger() -> Self {
        Self::new(0.5)
    }
    pub fn chi2() -> Self {
        Self::new(2.0)
    }
    pub fn neyman() -> Self {
        Self::new(-2.0)
    }
    /// Modified Kullback–Leibler, −log t + t − 1.
    pub fn kl_mod() -> Self {
        Self::new(0.0)
    }
    pub fn kl() -> Self {
        Self::new(1.0)
    }

    fn g(&self) -> f64 {
        self.gamma
    }

    /// Whether t ∈ dom φ. t = 0 is allowed for γ > 0.
    pub fn in_domain(&self, t: f64) -> bool {
        if !t.is_finite() {
            return false;
        }
        if self.g() > 0.0 {
            t >= 0.0
        } else {
            t > 0.0
        }
    }

    /// Whether t ∈ dom ψ. For γ = 2 the polynomial t²/2 + t is used on ℝ.
    pub fn in_psi_domain(&self, t: f64) -> bool {
        let g = self.g();
        if !t.is_finite() {
            return false;
        }
        if g == 1.0 || g == 2.0 {
            return true;
        }
        let base = (g - 1.0) * t + 1.0;
        if g > 0.0 && g < 1.0 || g == 0.0 {
            base > 0.0
        } else {
            base >= 0.0
        }
    }

    pub fn phi_or_inf(&self, t: f64) -> f64 {
        if !self.in_domain(t) {
            return f64::INFINITY;
        }
        let g = self.g();
        if g == 0.0 {
            -t.ln() + t - 1.0
        } else if g == 1.0 {
            if t == 0.0 {
                1.0
            } else {
                t * t.ln() - t + 1.0
            }
        } else if g == 2.0 {
            0.5 * (t - 1.0) * (t - 1.0)
        } else if g == 0.5 {
            let s = t.sqrt() - 1.0;
            2.0 * s * s
        } else {
            (t.powf(g) - g * t + g - 1.0) / (g * (g - 1.0))
        }
    }

    pub fn phi_prime_or_inf(&self, t: f64) -> f64 {
        if !self.in_domain(t) {
            return f64::INFINITY;
        }
        let g = self.g();
        if g == 1.0 {
            t.ln()
        } else if g == 0.0 {
            1.0 - 1.0 / t
        } else if g == 2.0 {
            t - 1.0
        } else {
            (t.powf(g - 1.0) - 1.0) / (g - 1.0)
        }
    }

    pub fn phi_second_or_inf(&self, t: f64) -> f64 {
        if !self.in_domain(t) {
            return f64::INFINITY;
        }
        t.powf(self.g() - 2.0)
    }

    /// φ#(t) = tφ′(t) − φ(t) = (t^γ − 1)/γ.
    pub fn phi_sharp_or_inf(&self, t: f64) -> f64 {
        if !self.in_domain(t) {
            return f64::INFINITY;
        }
        let g = self.g();
        if g == 0.0 {
            t.ln()
        } else if g == 2.0 {
            0.5 * (t * t - 1.0)
        } else {
            (t.powf(g) - 1.0) / g
        }
    }

    /// Convex conjugate ψ(t) = (1/γ)((γ−1)t + 1)^{γ/(γ−1)} − 1/γ.
    pub fn psi_or_inf(&self, t: f64) -> f64 {
        if !self.in_psi_domain(t) {
            return f64::INFINITY;
        }
        let g = self.g();
        if g == 0.0 {
            -(1.0 - t).ln()
        } else if g == 1.0 {
            t.exp_m1()
        } else if g == 2.0 {
            0.5 * t * t + t
        } else {
            (((g - 1.0) * t + 1.0).powf(g / (g - 1.0)) - 1.0) / g
        }
    }

    pub fn psi_prime_or_inf(&self, t: f64) -> f64 {
        if !self.in_psi_domain(t) {
            return f64::INFINITY;
        }
        let g = self.g();
        if g == 0.0 {
            1.0 / (1.0 - t)
        } else if g == 1.0 {
            t.exp()
        } else if g == 2.0 {
            t + 1.0
        } else {
            ((g - 1.0) * t + 1.0).powf(1.0 / (g - 1.0))
        }
    }

    fn checked(&self, t: f64, ok: bool, v: f64, what: &str) -> Result<f64> {
        if ok {
            Ok(v)
        } else {
            Err(Error::Domain(format!("{what}: t = {t} outside the domain for gamma = {}", self.gamma)))
        }
    }

    pub fn phi(&self, t: f64) -> Result<f64> {
        self.checked(t, self.in_domain(t), self.phi_or_inf(t), "phi")
    }
    pub fn phi_prime(&self, t: f64) -> Result<f64> {
        let v = self.phi_prime_or_inf(t);
        self.checked(t, self.in_domain(t) && v.is_finite(), v, "phi'")
    }
    pub fn phi_second(&self, t: f64) -> Result<f64> {
        let v = self.phi_second_or_inf(t);
        self.checked(t, self.in_domain(t) && v.is_finite(), v, "phi''")
    }
    pub fn phi_sharp(&self, t: f64) -> Result<f64> {
        let v = self.phi_sharp_or_inf(t);
        self.checked(t, self.in_domain(t) && v.is_finite(), v, "phi#")
    }
    pub fn psi(&self, t: f64) -> Result<f64> {
        let v = self.psi_or_inf(t);
        self.checked(t, self.in_psi_domain(t) && v.is_finite(), v, "psi")
    }
    pub fn psi_prime(&self, t: f64) -> Result<f64> {
        let v = self.psi_prime_or_inf(t);
        self.checked(t, self.in_psi_domain(t) && v.is_finite(), v, "psi'")
    }

    /// p·φ(q/p) from log-densities, without forming the ratio.
    pub fn perspective(&self, ln_q: f64, ln_p: f64) -> f64 {
        let (q, p) = (ln_q.exp(), ln_p.exp());
        if p == 0.0 && q == 0.0 {
            return 0.0;
        }
        let g = self.g();
        if g == 0.0 {
            // p ln(p/q) + q − p
            let t = if p == 0.0 { 0.0 } else { p * (ln_p - ln_q) };
            t + q - p
        } else if g == 1.0 {
            let t = if q == 0.0 { 0.0 } else { q * (ln_q - ln_p) };
            t - q + p
        } else {
            let mixed = (g * ln_q + (1.0 - g) * ln_p).exp();
            (mixed - g * q + (g - 1.0) * p) / (g * (g - 1.0))
        }
    }
}

/// A univariate density. Log-densities default to `pdf(x).ln()`.
pub trait Density: Sync {
    fn pdf(&self, x: f64) -> f64;
    fn ln_pdf(&self, x: f64) -> f64 {
        self.pdf(x).ln()
    }
    /// Closed support interval; ends may be infinite.
    fn support(&self) -> (f64, f64);
    /// Rough location and scale for the infinite-range maps.
    fn scale_hint(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
}

impl<D: Density + ?Sized> Density for &D {
    fn pdf(&self, x: f64) -> f64 {
        (**self).pdf(x)
    }
    fn ln_pdf(&self, x: f64) -> f64 {
        (**self).ln_pdf(x)
    }
    fn support(&self) -> (f64, f64) {
        (**self).support()
    }
    fn scale_hint(&self) -> (f64, f64) {
        (**self).scale_hint()
    }
}

/// A density given by a closure.
pub struct FnDensity<F: Fn(f64) -> f64 + Sync> {
    pub f: F,
    pub support: (f64, f64),
}

impl<F: Fn(f64) -> f64 + Sync> Density for FnDensity<F> {
    fn pdf(&self, x: f64) -> f64 {
        (self.f)(x)
    }
    fn support(&self) -> (f64, f64) {
        self.support
    }
}

fn hull(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0.min(b.0), a.1.max(b.1))
}

/// D_φ(Q, P) = ∫ φ(q/p) p, +∞ when the integrand is not finite.
pub fn divergence(gen: &PhiGenerator, q: &dyn Density, p: &dyn Density, quad: &QuadratureSpec) -> Result<f64> {
    let (lo, hi) = hull(q.support(), p.support());
    let (c, s) = p.scale_hint();
    let f = |x: f64| {
        let v = gen.perspective(q.ln_pdf(x), p.ln_pdf(x));
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    match integrate_scaled(f, lo, hi, c, s, quad) {
        Ok(v) => Ok(v.max(0.0)),
        // a nonnegative integrand that blows up: the divergence is infinite
        Err(Error::Integration { msg, .. }) if msg == "integrand is inf" => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorCriterionKind {
    TVD,
    ChiSquareRoot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorCriterion {
    pub kind: ErrorCriterionKind,
    pub value: f64,
}

/// (TVD, √χ²) of `p_hat` against `p_true`. √χ² is +∞ when p_true vanishes
/// where p_hat does not.
pub fn error_criteria(p_hat: &dyn Density, p_true: &dyn Density, quad: &QuadratureSpec) -> Result<(f64, f64)> {
    let (lo, hi) = hull(p_hat.support(), p_true.support());
    let (c, s) = p_true.scale_hint();
    let l1 = integrate_scaled(|x| (p_hat.pdf(x) - p_true.pdf(x)).abs(), lo, hi, c, s, quad)?;
    let tvd = (0.5 * l1).clamp(0.0, 1.0);
    let chi = integrate_scaled(
        |x| {
            // (a − b)²/b = b (a/b − 1)², with the ratio taken in log space so
            // that an underflowing truth density does not turn into 0/0 or ∞.
            let (la, lb) = (p_hat.ln_pdf(x), p_true.ln_pdf(x));
            if la == lb || (la == f64::NEG_INFINITY && lb == f64::NEG_INFINITY) {
                0.0
            } else if lb == f64::NEG_INFINITY {
                f64::INFINITY
            } else {
                let d = la - lb;
                // ln|e^d − 1|, which is d itself once e^d overflows.
                let lr = if d > 30.0 { d } else { d.exp_m1().abs().ln() };
                (lb + 2.0 * lr).exp()
            }
        },
        lo,
        hi,
        c,
        s,
        quad,
    );
    let chi_root = match chi {
        Ok(v) => v.max(0.0).sqrt(),
        Err(Error::Integration { .. }) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    Ok((tvd, chi_root))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_values() {
        assert_eq!(PhiGenerator::chi2().phi(1.0).unwrap(), 0.0);
        assert!((PhiGenerator::chi2().phi(3.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((PhiGenerator::chi2().psi(2.0).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn conjugacy_hellinger() {
        let g = PhiGenerator::hellinger();
        for t in [0.5, 1.0, 2.0] {
            let lhs = g.psi(g.phi_prime(t).unwrap()).unwrap();
            assert!((lhs - g.phi_sharp(t).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn direct_calls_raise_out_of_domain() {
        assert!(PhiGenerator::kl_mod().phi(0.0).is_err());
        assert!(PhiGenerator::hellinger().phi(-1.0).is_err());
        assert_eq!(PhiGenerator::kl_mod().phi_or_inf(-1.0), f64::INFINITY);
        assert!(PhiGenerator::kl_mod().psi(1.0).is_err());
    }

    #[test]
    fn perspective_matches_ratio_form() {
        for g in [-2.0, -1.0, 0.0, 0.5, 1.0, 2.0, 1.7] {
            let gen = PhiGenerator::new(g);
            let (q, p) = (0.3f64, 0.8f64);
            let direct = p * gen.phi_or_inf(q / p);
            assert!((gen.perspective(q.ln(), p.ln()) - direct).abs() < 1e-14, "gamma={g}");
        }
    }

    #[test]
    fn gaussian_chi2_against_closed_form() {
        // 1 + χ²(N(m, s²) ‖ N(0, 1)) = exp(m²/(2 − s²)) / (s √(2 − s²)) for s² < 2.
        let t = crate::models::ParametricFamily::gaussian(0.0, 1.0);
        for (m, s) in [(0.03, 1.2), (-0.4, 0.7), (0.0, 1.35)] {
            let p = crate::models::ParametricFamily::gaussian(m, s);
            let (_, r) = error_criteria(&p, &t, &QuadratureSpec::default()).unwrap();
            let exact = ((m * m / (2.0 - s * s)).exp() / (s * (2.0 - s * s).sqrt()) - 1.0).sqrt();
            assert!((r - exact).abs() < 1e-7, "{m} {s}: {r} vs {exact}");
        }
        let p = crate::models::ParametricFamily::gaussian(0.0, 1.5);
        assert_eq!(error_criteria(&p, &t, &QuadratureSpec::default()).unwrap().1, f64::INFINITY);
    }
}
