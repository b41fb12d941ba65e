//! Kernel density estimators: symmetric kernels, the gamma and reciprocal
//! inverse Gaussian asymmetric kernels, and the varying (Mellin-transform)
//! kernel, together with bandwidth rules and model smoothing.

use crate::divergence::Density;
use crate::models::ParametricFamily;
use crate::numerics::{brent, brent_root, integrate_breaks, integrate_quantile, integrate_scaled, QuadratureSpec};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    Gaussian,
    Epanechnikov,
    Cauchy,
    GammaAsym,
    RIGAsym,
    VaryingMT,
}

impl KernelKind {
    pub fn is_asymmetric(&self) -> bool {
        matches!(self, KernelKind::GammaAsym | KernelKind::RIGAsym | KernelKind::VaryingMT)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BandwidthRule {
    Silverman,
    SheatherJones,
    Fixed(f64),
    LSCV,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeConfig {
    pub kernel: KernelKind,
    pub rule: BandwidthRule,
}

impl KdeConfig {
    pub fn new(kernel: KernelKind, rule: BandwidthRule) -> Self {
        KdeConfig { kernel, rule }
    }
    pub fn gaussian_silverman() -> Self {
        Self::new(KernelKind::Gaussian, BandwidthRule::Silverman)
    }
}

/// Type-7 sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

fn spread(sorted: &[f64]) -> Result<f64> {
    let (_, sd) = mean_sd(sorted);
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let mut lo = sd.min(iqr / 1.34);
    if !(lo > 0.0) {
        lo = sd;
    }
    if !(lo > 0.0) || !lo.is_finite() {
        return Err(Error::Bandwidth("sample has zero spread".into()));
    }
    Ok(lo)
}

/// h = 0.9 · min(sd, IQR/1.34) · n^{−1/5}.
pub fn silverman(sample: &[f64]) -> Result<f64> {
    if sample.len() < 2 {
        return Err(Error::Bandwidth("need at least two observations".into()));
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(0.9 * spread(&s)? * (s.len() as f64).powf(-0.2))
}

/// Binned pairwise-difference counts used by the Sheather–Jones functionals.
struct PairBins {
    delta: f64,
    counts: Vec<f64>,
    n: f64,
}

impl PairBins {
    fn new(sorted: &[f64]) -> Self {
        let nb = 1000usize;
        let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
        let delta = (hi - lo) * 1.01 / nb as f64;
        let mut x = vec![0.0f64; nb];
        for &v in sorted {
            let k = (((v - lo) / delta).floor() as usize).min(nb - 1);
            x[k] += 1.0;
        }
        let mut counts = vec![0.0; nb];
        for i in 0..nb {
            if x[i] == 0.0 {
                continue;
            }
            counts[0] += x[i] * (x[i] - 1.0) / 2.0;
            for j in 0..i {
                counts[i - j] += x[i] * x[j];
            }
        }
        PairBins { delta, counts, n: sorted.len() as f64 }
    }

    /// Σ_{i≠j} φ⁽⁴⁾((xᵢ−xⱼ)/h) / (n(n−1)h⁵), diagonal included as in R.
    fn phi4(&self, h: f64) -> f64 {
        let mut s = 0.0;
        for (k, &c) in self.counts.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let d = k as f64 * self.delta / h;
            let d2 = d * d;
            if d2 > 1000.0 {
                break;
            }
            s += c * (-0.5 * d2).exp() * (d2 * d2 - 6.0 * d2 + 3.0);
        }
        s = 2.0 * s + self.n * 3.0;
        s / (self.n * (self.n - 1.0) * h.powi(5) * (2.0 * PI).sqrt())
    }

    fn phi6(&self, h: f64) -> f64 {
        let mut s = 0.0;
        for (k, &c) in self.counts.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let d = k as f64 * self.delta / h;
            let d2 = d * d;
            if d2 > 1000.0 {
                break;
            }
            s += c * (-0.5 * d2).exp() * (d2 * d2 * d2 - 15.0 * d2 * d2 + 45.0 * d2 - 15.0);
        }
        s = 2.0 * s - 15.0 * self.n;
        s / (self.n * (self.n - 1.0) * h.powi(7) * (2.0 * PI).sqrt())
    }
}

/// Sheather–Jones solve-the-equation bandwidth. `None` when the root search
/// fails.
pub fn sheather_jones(sample: &[f64]) -> Result<Option<f64>> {
    if sample.len() < 2 {
        return Err(Error::Bandwidth("need at least two observations".into()));
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let scale = {
        let (_, sd) = mean_sd(&s);
        let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
        let v = sd.min(iqr / 1.349);
        if v > 0.0 { v } else { sd }
    };
    if !(scale > 0.0) {
        return Err(Error::Bandwidth("sample has zero spread".into()));
    }
    let bins = PairBins::new(&s);
    let a = 1.24 * scale * n.powf(-1.0 / 7.0);
    let b = 1.23 * scale * n.powf(-1.0 / 9.0);
    let c1 = 1.0 / (2.0 * PI.sqrt() * n);
    let td = -bins.phi6(b);
    if !(td > 0.0) {
        return Ok(None);
    }
    let alph2 = 1.357 * (bins.phi4(a) / td).powf(1.0 / 7.0);
    let fsd = |h: f64| (c1 / bins.phi4(alph2 * h.powf(5.0 / 7.0))).powf(0.2) - h;
    let hmax = 1.144 * scale * n.powf(-0.2);
    let (mut lo, mut hi) = (0.1 * hmax, hmax);
    for _ in 0..20 {
        if fsd(lo) * fsd(hi) <= 0.0 {
            break;
        }
        lo *= 0.5;
        hi *= 1.5;
    }
    Ok(brent_root(fsd, lo, hi, 1e-6 * hmax, 200).filter(|h| *h > 0.0))
}

/// A fitted estimate. Observations are kept sorted, with the original order
/// available through `order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDensityEstimate {
    pub kernel: KernelKind,
    pub bandwidth: f64,
    pub rule: BandwidthRule,
    sorted: Vec<f64>,
    /// order[k] = original index of sorted[k]
    order: Vec<usize>,
    /// Per-observation normalisation 1/c(y) (asymmetric kernels only).
    inv_norm: Vec<f64>,
    pub warning: Option<String>,
}

/// Kernel values at a fixed set of points, built by
/// [`KernelDensityEstimate::kernel_matrix`].
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    /// (first sorted index, end, offset into `vals`) per point.
    rows: Vec<(usize, usize, usize)>,
    vals: Vec<f64>,
    order: Vec<usize>,
}

impl KernelMatrix {
    /// Same values as `weighted_at` on the cached points.
    pub fn weighted(&self, weights: &[f64]) -> Result<Vec<f64>> {
        if weights.len() != self.order.len() {
            return Err(Error::Parameter(format!("{} weights for {} observations", weights.len(), self.order.len())));
        }
        let sw: f64 = weights.iter().sum();
        if !(sw > 0.0) {
            return Err(Error::Parameter("weights sum to zero".into()));
        }
        let ws: Vec<f64> = self.order.iter().map(|&i| weights[i]).collect();
        Ok(self
            .rows
            .iter()
            .map(|&(a, b, off)| {
                let v = &self.vals[off..off + (b - a)];
                ws[a..b].iter().zip(v).filter(|(w, _)| **w != 0.0).map(|(w, k)| w * k).sum::<f64>() / sw
            })
            .collect())
    }
}

impl KernelDensityEstimate {
    pub fn fit(kernel: KernelKind, rule: BandwidthRule, sample: &[f64]) -> Result<Self> {
        if sample.len() < 2 {
            return Err(Error::Bandwidth("need at least two observations".into()));
        }
        if sample.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite observation".into()));
        }
        if kernel.is_asymmetric() {
            if let Some(v) = sample.iter().find(|&&v| v < 0.0) {
                return Err(Error::Domain(format!("negative observation {v} with an asymmetric kernel")));
            }
            if kernel == KernelKind::VaryingMT && sample.iter().any(|&v| v == 0.0) {
                return Err(Error::Domain("the varying kernel needs strictly positive data".into()));
            }
        }
        let mut order: Vec<usize> = (0..sample.len()).collect();
        order.sort_by(|&i, &j| sample[i].total_cmp(&sample[j]).then(i.cmp(&j)));
        let sorted: Vec<f64> = order.iter().map(|&i| sample[i]).collect();
        let mut est = KernelDensityEstimate {
            kernel,
            bandwidth: f64::NAN,
            rule,
            sorted,
            order,
            inv_norm: vec![],
            warning: None,
        };
        let h = match rule {
            BandwidthRule::Fixed(h) => h,
            BandwidthRule::Silverman if kernel != KernelKind::VaryingMT => silverman(sample)?,
            BandwidthRule::SheatherJones if kernel != KernelKind::VaryingMT => match sheather_jones(sample)? {
                Some(h) => h,
                None => {
                    est.warning = Some("Sheather-Jones root search failed; used Silverman".into());
                    silverman(sample)?
                }
            },
            BandwidthRule::LSCV => est.lscv_bandwidth()?,
            _ => return Err(Error::Config("the varying kernel takes a fixed or LSCV integer bandwidth".into())),
        };
        est.set_bandwidth(h)?;
        Ok(est)
    }

    fn set_bandwidth(&mut self, h: f64) -> Result<()> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Bandwidth(format!("bandwidth {h} is not positive")));
        }
        if self.kernel == KernelKind::VaryingMT && (h.fract() != 0.0 || !(1.0..=50.0).contains(&h)) {
            return Err(Error::Bandwidth(format!("varying-kernel alpha must be an integer in 1..=50, got {h}")));
        }
        self.bandwidth = h;
        self.inv_norm = match self.kernel {
            KernelKind::GammaAsym | KernelKind::RIGAsym => {
                self.sorted.iter().map(|&y| 1.0 / asym_norm(self.kernel, y, h)).collect()
            }
            _ => vec![],
        };
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.sorted.len()
    }

    /// Observations in their original order.
    pub fn sample(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.n()];
        for (k, &i) in self.order.iter().enumerate() {
            v[i] = self.sorted[k];
        }
        v
    }

    pub fn support(&self) -> (f64, f64) {
        if self.kernel.is_asymmetric() {
            (0.0, f64::INFINITY)
        } else {
            (f64::NEG_INFINITY, f64::INFINITY)
        }
    }

    /// Log of the contribution of sorted observation k at point x.
    fn ln_contrib(&self, x: f64, k: usize) -> f64 {
        let y = self.sorted[k];
        let h = self.bandwidth;
        match self.kernel {
            KernelKind::Gaussian => {
                let u = (x - y) / h;
                -0.5 * u * u - LN_SQRT_2PI - h.ln()
            }
            KernelKind::Epanechnikov => {
                let u = (x - y) / h;
                if u.abs() >= 1.0 {
                    f64::NEG_INFINITY
                } else {
                    (0.75 * (1.0 - u * u) / h).ln()
                }
            }
            KernelKind::Cauchy => {
                let u = (x - y) / h;
                -(PI * h * (1.0 + u * u)).ln()
            }
            KernelKind::GammaAsym => gamma_kernel_ln(x, y, h) + self.inv_norm[k].ln(),
            KernelKind::RIGAsym => rig_kernel_ln(x, y, h) + self.inv_norm[k].ln(),
            KernelKind::VaryingMT => mt_kernel_ln(x, y, h),
        }
    }

    /// Sorted-index window outside which contributions are negligible.
    fn window(&self, x: f64) -> (usize, usize) {
        let h = self.bandwidth;
        let (lo, hi) = match self.kernel {
            KernelKind::Gaussian => (x - 9.0 * h, x + 9.0 * h),
            KernelKind::Epanechnikov => (x - h, x + h),
            KernelKind::GammaAsym => {
                let m = x + h;
                let sd = (h * m).sqrt();
                (m - 12.0 * sd, m + 15.0 * sd + 40.0 * h)
            }
            KernelKind::RIGAsym => {
                let z = rig_zeta(x, h);
                let c = z + 50.0 * h;
                let r = (c * c - z * z).max(0.0).sqrt();
                (c - r, c + r)
            }
            _ => return (0, self.n()),
        };
        let a = self.sorted.partition_point(|&v| v < lo);
        let b = self.sorted.partition_point(|&v| v <= hi);
        (a, b)
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        if self.kernel.is_asymmetric() && x < 0.0 {
            return 0.0;
        }
        if self.kernel == KernelKind::VaryingMT && x == 0.0 {
            return 0.0;
        }
        let (a, b) = self.window(x);
        let s: f64 = (a..b).map(|k| self.ln_contrib(x, k).exp()).sum();
        if s > 0.0 || self.kernel == KernelKind::Epanechnikov {
            return s / self.n() as f64;
        }
        self.ln_evaluate(x).exp()
    }

    /// ln f̂(x), accurate also far in the tails.
    pub fn ln_evaluate(&self, x: f64) -> f64 {
        if self.kernel.is_asymmetric() && x <= 0.0 {
            return if x == 0.0 && self.kernel != KernelKind::VaryingMT {
                self.evaluate_direct_at_zero().ln()
            } else {
                f64::NEG_INFINITY
            };
        }
        let (a, b) = self.window(x);
        let s: f64 = (a..b).map(|k| self.ln_contrib(x, k).exp()).sum();
        if s > 1e-280 {
            return (s / self.n() as f64).ln();
        }
        let terms: Vec<f64> = (0..self.n()).map(|k| self.ln_contrib(x, k)).collect();
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return m;
        }
        m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln() - (self.n() as f64).ln()
    }

    fn evaluate_direct_at_zero(&self) -> f64 {
        (0..self.n()).map(|k| self.ln_contrib(0.0, k).exp()).sum::<f64>() / self.n() as f64
    }

    /// Contribution of observation `i` (original order) at x, normalised
    /// so that Σᵢ contribᵢ(x)/n = f̂(x).
    pub fn contrib(&self, x: f64, i: usize) -> f64 {
        let k = self.order.iter().position(|&j| j == i).expect("observation index out of range");
        self.ln_contrib(x, k).exp()
    }

    /// Contribution matrix M[i][l] = K(xᵢ; y_l) with points and observations
    /// in original order.
    pub fn contrib_matrix(&self, points: &[f64]) -> Vec<Vec<f64>> {
        let n = self.n();
        points
            .iter()
            .map(|&x| {
                let mut row = vec![0.0; n];
                if !(self.kernel.is_asymmetric() && x < 0.0) {
                    let (a, b) = self.window(x);
                    for k in a..b {
                        row[self.order[k]] = self.ln_contrib(x, k).exp();
                    }
                }
                row
            })
            .collect()
    }

    /// Weighted estimate Σ_l w_l K(x; y_l) / Σ_l w_l at each point, with
    /// weights given in the original observation order.
    pub fn weighted_at(&self, points: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
        if weights.len() != self.n() {
            return Err(Error::Parameter(format!("{} weights for {} observations", weights.len(), self.n())));
        }
        let sw: f64 = weights.iter().sum();
        if !(sw > 0.0) {
            return Err(Error::Parameter("weights sum to zero".into()));
        }
        let ws: Vec<f64> = self.order.iter().map(|&i| weights[i]).collect();
        Ok(points
            .iter()
            .map(|&x| {
                if self.kernel.is_asymmetric() && x < 0.0 {
                    return 0.0;
                }
                let (a, b) = self.window(x);
                (a..b).filter(|&k| ws[k] != 0.0).map(|k| ws[k] * self.ln_contrib(x, k).exp()).sum::<f64>() / sw
            })
            .collect())
    }

    /// Caches K(x; y_l) at fixed points so that `weighted_at` can be
    /// repeated with new weights at the cost of a sparse product. Returns
    /// `None` when the windows hold more than `budget` entries.
    pub fn kernel_matrix(&self, points: &[f64], budget: usize) -> Option<KernelMatrix> {
        let windows: Vec<(usize, usize)> = points
            .iter()
            .map(|&x| if self.kernel.is_asymmetric() && x < 0.0 { (0, 0) } else { self.window(x) })
            .collect();
        let total: usize = windows.iter().map(|(a, b)| b - a).sum();
        if total > budget {
            return None;
        }
        let mut vals = Vec::with_capacity(total);
        let mut rows = Vec::with_capacity(points.len());
        for (&x, &(a, b)) in points.iter().zip(&windows) {
            rows.push((a, b, vals.len()));
            vals.extend((a..b).map(|k| self.ln_contrib(x, k).exp()));
        }
        Some(KernelMatrix { rows, vals, order: self.order.clone() })
    }

    /// Points where the estimate changes character, for quadrature.
    pub fn breakpoints(&self) -> Vec<f64> {
        let h = self.bandwidth;
        let (lo, hi) = (self.sorted[0], self.sorted[self.n() - 1]);
        match self.kernel {
            KernelKind::Epanechnikov => {
                let mut v: Vec<f64> = self.sorted.iter().flat_map(|&y| [y - h, y + h]).collect();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            }
            KernelKind::Gaussian | KernelKind::Cauchy => {
                let k = 16usize;
                let (a, b) = (lo - 9.0 * h, hi + 9.0 * h);
                (0..=k).map(|i| a + (b - a) * i as f64 / k as f64).collect()
            }
            _ => {
                let k = 16usize;
                let b = hi * 1.5 + 20.0 * h;
                (0..=k).map(|i| b * (i as f64 / k as f64).powi(2)).collect()
            }
        }
    }

    /// ∫ f̂ by quadrature (a check on the normalisation).
    pub fn total_mass(&self, spec: &QuadratureSpec) -> Result<f64> {
        let br = self.breakpoints();
        let (a, b) = (br[0], br[br.len() - 1]);
        let mid = integrate_breaks(|x| self.evaluate(x), &br, spec)?;
        let h = self.bandwidth;
        let right = integrate_scaled(|x| self.evaluate(x), b, f64::INFINITY, b, h.max(1.0), spec)?;
        let left = if self.kernel.is_asymmetric() {
            0.0
        } else {
            integrate_scaled(|x| self.evaluate(x), f64::NEG_INFINITY, a, a, h.max(1.0), spec)?
        };
        Ok(left + mid + right)
    }

    fn lscv_score(&self, h: f64) -> f64 {
        let mut e = self.clone();
        if e.set_bandwidth(h).is_err() {
            return f64::INFINITY;
        }
        let n = e.n() as f64;
        let quad = QuadratureSpec::default().with_tol(1e-10, 1e-8);
        let sq = if e.kernel == KernelKind::Gaussian {
            let mut s = 0.0;
            for &a in &e.sorted {
                for &b in &e.sorted {
                    let u = (a - b) / h;
                    s += (-0.25 * u * u).exp();
                }
            }
            s / (n * n * h * 2.0 * PI.sqrt())
        } else {
            let br = e.breakpoints();
            match integrate_breaks(|x| e.evaluate(x).powi(2), &br, &quad) {
                Ok(v) => v,
                Err(_) => return f64::INFINITY,
            }
        };
        let mut loo = 0.0;
        for k in 0..e.n() {
            let x = e.sorted[k];
            let total: f64 = (0..e.n()).filter(|&j| j != k).map(|j| e.ln_contrib(x, j).exp()).sum();
            loo += total / (n - 1.0);
        }
        sq - 2.0 * loo / n
    }

    fn lscv_bandwidth(&self) -> Result<f64> {
        if self.kernel == KernelKind::VaryingMT {
            let best = (1..=50)
                .map(|a| (a, self.lscv_score(a as f64)))
                .min_by(|x, y| x.1.total_cmp(&y.1))
                .unwrap();
            return Ok(best.0 as f64);
        }
        let h0 = silverman(&self.sorted)?;
        let r = brent(|lh| self.lscv_score(lh.exp()), (0.02 * h0).ln(), (4.0 * h0).ln(), 1e-6, 100);
        Ok(r.x[0].exp())
    }
}

impl Density for KernelDensityEstimate {
    fn pdf(&self, x: f64) -> f64 {
        self.evaluate(x)
    }
    fn ln_pdf(&self, x: f64) -> f64 {
        self.ln_evaluate(x)
    }
    fn support(&self) -> (f64, f64) {
        KernelDensityEstimate::support(self)
    }
    fn scale_hint(&self) -> (f64, f64) {
        let n = self.n();
        let c = self.sorted[n / 2];
        let s = (self.sorted[n - 1] - self.sorted[0]).max(self.bandwidth);
        (c, s)
    }
}

/// ln of the gamma kernel K_{x,b}(y) = y^{x/b} e^{−y/b} / (Γ(1+x/b) b^{1+x/b}).
pub fn gamma_kernel_ln(x: f64, y: f64, b: f64) -> f64 {
    let s = x / b;
    let ly = if y == 0.0 {
        if s == 0.0 {
            0.0
        } else {
            return f64::NEG_INFINITY;
        }
    } else {
        s * y.ln()
    };
    ly - y / b - ln_gamma(1.0 + s) - (1.0 + s) * b.ln()
}

/// Mean of the RIG kernel at x: x − b above 2b, x²/(4b) below.
pub fn rig_zeta(x: f64, b: f64) -> f64 {
    if x >= 2.0 * b {
        x - b
    } else {
        x * x / (4.0 * b)
    }
}

/// ln of the RIG kernel 1/√(2πby) · exp(−(y − ζ)²/(2by)).
pub fn rig_kernel_ln(x: f64, y: f64, b: f64) -> f64 {
    if y <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let z = rig_zeta(x, b);
    -0.5 * (2.0 * PI * b * y).ln() - (y - z) * (y - z) / (2.0 * b * y)
}

/// ln of the varying-kernel term (1/y)(αx/y)^α e^{−αx/y}/Γ(α).
pub fn mt_kernel_ln(x: f64, y: f64, alpha: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let t = alpha * x / y;
    -y.ln() + alpha * t.ln() - t - ln_gamma(alpha)
}

/// c(y) = ∫₀^∞ K_{z,b}(y) dz.
pub fn asym_norm(kernel: KernelKind, y: f64, b: f64) -> f64 {
    let spec = QuadratureSpec::default().with_tol(1e-12, 1e-10);
    match kernel {
        KernelKind::GammaAsym => {
            // With s = z/b the integrand is (y/b)^s e^{−y/b}/Γ(1+s).
            let u = y / b;
            let f = |s: f64| {
                let l = if u == 0.0 {
                    if s == 0.0 { 0.0 } else { f64::NEG_INFINITY }
                } else {
                    s * u.ln()
                };
                (l - u - ln_gamma(1.0 + s)).exp()
            };
            integrate_scaled(f, 0.0, f64::INFINITY, u, u.sqrt().max(1.0), &spec).unwrap_or(1.0)
        }
        KernelKind::RIGAsym => {
            let f = |z: f64| rig_kernel_ln(z, y, b).exp();
            let w = (b * y).sqrt().max(b);
            let hi = y + b + 60.0 * w;
            let mut br = vec![0.0, 2.0 * b];
            for k in 1..=8 {
                let p = y + b - 40.0 * w + 10.0 * w * k as f64;
                if p > 2.0 * b && p < hi {
                    br.push(p);
                }
            }
            br.push(hi);
            br.sort_by(f64::total_cmp);
            br.dedup();
            let core = integrate_breaks(f, &br, &spec).unwrap_or(1.0);
            let tail = integrate_scaled(f, hi, f64::INFINITY, hi, w, &spec).unwrap_or(0.0);
            core + tail
        }
        _ => 1.0,
    }
}

/// The Basu–Lindsay smoothed model p*(x) = ∫ p(y) K_w(x, y) dy.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedModel {
    pub family: ParametricFamily,
    pub kernel: KernelKind,
    pub bandwidth: f64,
}

pub fn smooth_model(family: &ParametricFamily, kernel: KernelKind, bandwidth: f64) -> Result<SmoothedModel> {
    match kernel {
        KernelKind::GammaAsym | KernelKind::RIGAsym => {
            Err(Error::Unsupported("model smoothing with asymmetric kernels".into()))
        }
        _ => {
            if !(bandwidth > 0.0) {
                return Err(Error::Bandwidth(format!("bandwidth {bandwidth} is not positive")));
            }
            family.validate()?;
            Ok(SmoothedModel { family: family.clone(), kernel, bandwidth })
        }
    }
}

impl SmoothedModel {
    pub fn pdf(&self, x: f64) -> f64 {
        let w = self.bandwidth;
        let f = &self.family;
        let spec = QuadratureSpec::default().with_tol(1e-13, 1e-10);
        match self.kernel {
            KernelKind::Gaussian if f.kind == crate::models::FamilyKind::Gaussian => {
                let s = (f.theta[1] * f.theta[1] + w * w).sqrt();
                ParametricFamily::gaussian(f.theta[0], s).pdf(x)
            }
            KernelKind::VaryingMT => {
                if x <= 0.0 {
                    return 0.0;
                }
                integrate_quantile(|y| if y > 0.0 { mt_kernel_ln(x, y, w).exp() } else { 0.0 }, |u| f.quantile(u), &spec)
                    .unwrap_or(f64::NAN)
            }
            _ => {
                // ∫ K(u) p(x − w u) du over the kernel variable
                let (lo, hi) = f.support();
                let k = |u: f64| match self.kernel {
                    KernelKind::Epanechnikov => {
                        if u.abs() < 1.0 { 0.75 * (1.0 - u * u) } else { 0.0 }
                    }
                    KernelKind::Cauchy => 1.0 / (PI * (1.0 + u * u)),
                    _ => (-0.5 * u * u - LN_SQRT_2PI).exp(),
                };
                let g = |u: f64| {
                    let y = x - w * u;
                    if y < lo || y > hi { 0.0 } else { k(u) * f.pdf(y) }
                };
                let (ulo, uhi) = match self.kernel {
                    KernelKind::Epanechnikov => (-1.0, 1.0),
                    KernelKind::Cauchy => (f64::NEG_INFINITY, f64::INFINITY),
                    _ => (-12.0, 12.0),
                };
                let mut br = vec![ulo.max(-1e6), uhi.min(1e6)];
                for edge in [(x - lo) / w, (x - hi) / w] {
                    if edge.is_finite() && edge > br[0] && edge < br[1] {
                        br.insert(1, edge);
                    }
                }
                br.sort_by(f64::total_cmp);
                let core = integrate_breaks(g, &br, &spec).unwrap_or(f64::NAN);
                if self.kernel == KernelKind::Cauchy {
                    let l = integrate_scaled(g, f64::NEG_INFINITY, -1e6, -1e6, 1e6, &spec).unwrap_or(0.0);
                    let r = integrate_scaled(g, 1e6, f64::INFINITY, 1e6, 1e6, &spec).unwrap_or(0.0);
                    core + l + r
                } else {
                    core
                }
            }
        }
    }
}

impl Density for SmoothedModel {
    fn pdf(&self, x: f64) -> f64 {
        SmoothedModel::pdf(self, x)
    }
    fn support(&self) -> (f64, f64) {
        if self.kernel == KernelKind::VaryingMT {
            (0.0, f64::INFINITY)
        } else {
            (f64::NEG_INFINITY, f64::INFINITY)
        }
    }
    fn scale_hint(&self) -> (f64, f64) {
        let (c, s) = self.family.location_scale();
        (c, s + self.bandwidth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cached_kernel_matrix_matches_direct() {
        let data: Vec<f64> = (1..60).map(|i| (i as f64 * 0.37).sin().abs() * 3.0 + 0.01).collect();
        let w: Vec<f64> = (0..data.len()).map(|i| (i % 7) as f64 / 7.0).collect();
        for kernel in [KernelKind::Gaussian, KernelKind::RIGAsym, KernelKind::GammaAsym] {
            let e = KernelDensityEstimate::fit(kernel, BandwidthRule::Silverman, &data).unwrap();
            let m = e.kernel_matrix(&data, usize::MAX).unwrap();
            assert_eq!(m.weighted(&w).unwrap(), e.weighted_at(&data, &w).unwrap());
            assert!(e.kernel_matrix(&data, 10).is_none());
        }
    }

    #[test]
    fn fixed_bandwidth_recorded() {
        let e = KernelDensityEstimate::fit(KernelKind::Gaussian, BandwidthRule::Fixed(0.01), &[0.0, 1.0]).unwrap();
        assert_eq!(e.bandwidth, 0.01);
    }

    #[test]
    fn single_point_gaussian() {
        let e = KernelDensityEstimate::fit(KernelKind::Gaussian, BandwidthRule::Fixed(1.0), &[0.0, 0.0]).unwrap();
        assert!((e.evaluate(0.0) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mt_hand_value() {
        let e = KernelDensityEstimate::fit(KernelKind::VaryingMT, BandwidthRule::Fixed(1.0), &[1.0, 1.0]).unwrap();
        assert!((e.evaluate(1.0) - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(e.evaluate(0.0), 0.0);
    }

    #[test]
    fn gamma_kernel_at_zero_is_exponential() {
        let b = 0.3;
        for y in [0.1, 1.0, 2.0] {
            assert!((gamma_kernel_ln(0.0, y, b).exp() - (-y / b).exp() / b).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_and_domain_errors() {
        assert!(matches!(
            KernelDensityEstimate::fit(KernelKind::Gaussian, BandwidthRule::Silverman, &[1.0; 10]),
            Err(Error::Bandwidth(_))
        ));
        assert!(matches!(
            KernelDensityEstimate::fit(KernelKind::GammaAsym, BandwidthRule::Fixed(0.1), &[1.0, -1.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            smooth_model(&ParametricFamily::gaussian(0.0, 1.0), KernelKind::RIGAsym, 0.1),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn smoothed_gaussian_closed_form() {
        let s = smooth_model(&ParametricFamily::gaussian(0.0, 1.0), KernelKind::Gaussian, 1.0).unwrap();
        assert!((s.pdf(0.0) - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-15);
    }
}
