use super::family::ParametricFamily;
use crate::divergence::Density;
use crate::numerics::{integrate_quantile, DivRng, QuadratureSpec};
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// λ·P₁ + (1−λ)·P₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub lambda: f64,
    pub component1: ParametricFamily,
    pub component0: ParametricFamily,
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl MixtureSpec {
    pub fn new(lambda: f64, component1: ParametricFamily, component0: ParametricFamily) -> Result<Self> {
        let m = MixtureSpec { lambda, component1, component0 };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda <= 1.0) {
            return Err(Error::Parameter(format!("mixture proportion {} outside [0, 1]", self.lambda)));
        }
        self.component1.validate()?;
        self.component0.validate()?;
        if self.component1.is_bivariate() != self.component0.is_bivariate() {
            return Err(Error::Parameter("mixture components of different dimension".into()));
        }
        Ok(())
    }

    pub fn is_bivariate(&self) -> bool {
        self.component1.is_bivariate()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let a = self.lambda.ln() + self.component1.ln_pdf(x);
        let b = (1.0 - self.lambda).ln() + self.component0.ln_pdf(x);
        log_add(a, b)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.lambda * self.component1.pdf(x) + (1.0 - self.lambda) * self.component0.pdf(x)
    }

    pub fn pdf2(&self, x: f64, y: f64) -> f64 {
        self.lambda * self.component1.pdf2(x, y) + (1.0 - self.lambda) * self.component0.pdf2(x, y)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.lambda * self.component1.cdf(x) + (1.0 - self.lambda) * self.component0.cdf(x)
    }

    pub fn moment(&self, i: u32) -> Option<f64> {
        Some(self.lambda * self.component1.moment(i)? + (1.0 - self.lambda) * self.component0.moment(i)?)
    }

    /// Draws the component label first, then the observation. Label 1 marks
    /// the first (parametric) component.
    pub fn sample_labeled(&self, n: usize, rng: &mut DivRng) -> (Vec<f64>, Vec<u8>) {
        let mut xs = Vec::with_capacity(n);
        let mut zs = Vec::with_capacity(n);
        for _ in 0..n {
            let z = rng.random::<f64>() < self.lambda;
            xs.push(if z { self.component1.draw(rng) } else { self.component0.draw(rng) });
            zs.push(z as u8);
        }
        (xs, zs)
    }

    pub fn sample(&self, n: usize, rng: &mut DivRng) -> Vec<f64> {
        self.sample_labeled(n, rng).0
    }

    pub fn sample2(&self, n: usize, rng: &mut DivRng) -> Vec<[f64; 2]> {
        (0..n)
            .map(|_| {
                if rng.random::<f64>() < self.lambda {
                    self.component1.draw2(rng)
                } else {
                    self.component0.draw2(rng)
                }
            })
            .collect()
    }

    /// E[g(X)] through each component's quantile function.
    pub fn expect<G: FnMut(f64) -> f64>(&self, mut g: G, spec: &QuadratureSpec) -> Result<f64> {
        let mut total = 0.0;
        if self.lambda > 0.0 {
            total += self.lambda * integrate_quantile(&mut g, |u| self.component1.quantile(u), spec)?;
        }
        if self.lambda < 1.0 {
            total += (1.0 - self.lambda) * integrate_quantile(&mut g, |u| self.component0.quantile(u), spec)?;
        }
        Ok(total)
    }
}

impl Density for MixtureSpec {
    fn pdf(&self, x: f64) -> f64 {
        MixtureSpec::pdf(self, x)
    }
    fn ln_pdf(&self, x: f64) -> f64 {
        MixtureSpec::ln_pdf(self, x)
    }
    fn support(&self) -> (f64, f64) {
        let (a, b) = self.component1.support();
        let (c, d) = self.component0.support();
        (a.min(c), b.max(d))
    }
    fn scale_hint(&self) -> (f64, f64) {
        let (c1, s1) = self.component1.location_scale();
        let (c0, s0) = self.component0.location_scale();
        let c = self.lambda * c1 + (1.0 - self.lambda) * c0;
        (c, s1.max(s0).max((c1 - c0).abs() * 0.5))
    }
}

/// TVD and √χ² of a normalised estimate against a mixture truth, both as
/// expectations under the truth: TVD = E[(1 − p̂/p)₊] (Scheffé) and
/// χ² = E[(p̂/p − 1)²] + ∞·[p̂ has mass where p = 0].
pub fn error_criteria_vs_mixture(
    p_hat: &dyn Density,
    truth: &MixtureSpec,
    spec: &QuadratureSpec,
) -> Result<(f64, f64)> {
    let ratio = |x: f64| {
        let lp = truth.ln_pdf(x);
        let lh = p_hat.ln_pdf(x);
        if lh == f64::NEG_INFINITY {
            0.0
        } else {
            (lh - lp).exp()
        }
    };
    let tvd = truth.expect(|x| (1.0 - ratio(x)).max(0.0), spec)?;
    let chi2 = truth.expect(
        |x| {
            let r = ratio(x);
            (r - 1.0) * (r - 1.0)
        },
        spec,
    );
    let chi2 = match chi2 {
        Ok(v) => v,
        Err(Error::Integration { .. }) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    // mass of p̂ outside the truth's support makes χ² infinite
    let (lo, hi) = truth.support();
    let (hlo, hhi) = p_hat.support();
    let outside = (hlo < lo && p_hat.pdf(lo - 1e-3 * (1.0 + lo.abs())) > 0.0)
        || (hhi > hi && p_hat.pdf(hi + 1e-3 * (1.0 + hi.abs())) > 0.0);
    let chi_root = if outside { f64::INFINITY } else { chi2.max(0.0).sqrt() };
    Ok((tvd.clamp(0.0, 1.0), chi_root))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng;

    #[test]
    fn labels_follow_lambda() {
        let m = MixtureSpec::new(0.35, ParametricFamily::gaussian(-2.0, 1.0), ParametricFamily::gaussian(1.5, 1.0))
            .unwrap();
        let (_, z) = m.sample_labeled(20_000, &mut rng(1));
        let frac = z.iter().map(|&v| v as f64).sum::<f64>() / 20_000.0;
        assert!((frac - 0.35).abs() < 0.015);
    }

    #[test]
    fn pdf_matches_log_pdf() {
        let m = MixtureSpec::new(0.3, ParametricFamily::weibull(1.5, 1.0), ParametricFamily::lognormal(3.0, 0.5))
            .unwrap();
        for x in [0.1, 1.0, 5.0, 20.0] {
            assert!((m.pdf(x).ln() - m.ln_pdf(x)).abs() < 1e-12);
        }
    }
}
