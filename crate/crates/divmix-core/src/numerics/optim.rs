//! Derivative-free minimizers: bounded Nelder–Mead with restarts, Brent's
//! parabolic minimizer and the Brent–Dekker root finder.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptMethod {
    NelderMead,
    Brent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub method: OptMethod,
    pub tol_x: f64,
    pub tol_f: f64,
    pub max_evals: usize,
    /// Per-coordinate box. Empty means unbounded.
    #[serde(default)]
    pub bounds: Vec<(f64, f64)>,
    #[serde(default)]
    pub restarts: usize,
}

impl OptimizerSpec {
    pub fn nelder_mead(bounds: Vec<(f64, f64)>) -> Self {
        let d = bounds.len().max(1);
        OptimizerSpec {
            method: OptMethod::NelderMead,
            tol_x: 1e-8,
            tol_f: 1e-10,
            max_evals: 2000 * d,
            bounds,
            restarts: 3,
        }
    }

    pub fn brent(lo: f64, hi: f64) -> Self {
        OptimizerSpec {
            method: OptMethod::Brent,
            tol_x: 1e-10,
            tol_f: 1e-12,
            max_evals: 500,
            bounds: vec![(lo, hi)],
            restarts: 0,
        }
    }

    pub fn with_tol(mut self, tol_x: f64, tol_f: f64) -> Self {
        self.tol_x = tol_x;
        self.tol_f = tol_f;
        self
    }

    pub fn with_max_evals(mut self, n: usize) -> Self {
        self.max_evals = n;
        self
    }

    pub fn with_restarts(mut self, r: usize) -> Self {
        self.restarts = r;
        self
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(self.tol_x > 0.0 && self.tol_f > 0.0) {
            return Err(crate::Error::Config("optimizer tolerances must be positive".into()));
        }
        for &(lo, hi) in &self.bounds {
            if !(lo < hi) {
                return Err(crate::Error::Config(format!("empty bound interval [{lo}, {hi}]")));
            }
        }
        if self.method == OptMethod::Brent && self.bounds.len() != 1 {
            return Err(crate::Error::Config("Brent needs exactly one bracketing interval".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    /// False when the evaluation budget ran out first.
    pub converged: bool,
}

/// Dispatches on `spec.method`. For Brent, `x0` is ignored apart from its
/// length, which must be 1.
pub fn minimize<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], spec: &OptimizerSpec) -> OptResult {
    match spec.method {
        OptMethod::NelderMead => nelder_mead(f, x0, spec),
        OptMethod::Brent => {
            let (a, b) = spec.bounds[0];
            let r = brent(|x| f(&[x]), a, b, spec.tol_x, spec.max_evals);
            // keep the no-worse-than-start contract when a start is given
            if let Some(&s) = x0.first() {
                if s >= a && s <= b {
                    let fs = f(&[s]);
                    if fs < r.f {
                        return OptResult { x: vec![s], f: fs, evals: r.evals + 1, converged: r.converged };
                    }
                }
            }
            r
        }
    }
}

fn clip(x: &mut [f64], bounds: &[(f64, f64)]) {
    if bounds.is_empty() {
        return;
    }
    for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *xi = xi.clamp(lo, hi);
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Nelder–Mead on a box. Trial points are clipped back into the box.
/// After a run converges it is restarted from the best vertex with a fresh
/// simplex, up to `spec.restarts` times or until a restart stops improving.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], spec: &OptimizerSpec) -> OptResult {
    let mut start = x0.to_vec();
    clip(&mut start, &spec.bounds);
    let mut evals = 1;
    let f0 = sanitize(f(&start));
    let mut best = (start, f0);
    let mut converged = false;
    for round in 0..=spec.restarts {
        if evals >= spec.max_evals {
            break;
        }
        let (x, fx, conv) = nm_run(&mut f, &best.0, best.1, spec, &mut evals);
        converged = conv;
        let improvement = best.1 - fx;
        if fx < best.1 || (fx == best.1 && round == 0) {
            best = (x, fx);
        }
        if round > 0 && !(improvement > spec.tol_f * best.1.abs().max(1.0)) {
            break;
        }
    }
    OptResult { x: best.0, f: best.1, evals, converged }
}

fn nm_run<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x0: &[f64],
    f0: f64,
    spec: &OptimizerSpec,
    evals: &mut usize,
) -> (Vec<f64>, f64, bool) {
    let d = x0.len();
    let bounds = &spec.bounds;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        sanitize(f(x))
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..d {
        let mut v = x0.to_vec();
        let step = if bounds.is_empty() || !(bounds[i].1 - bounds[i].0).is_finite() {
            0.05 * x0[i].abs().max(0.2)
        } else {
            0.05 * (bounds[i].1 - bounds[i].0)
        };
        v[i] += step;
        if !bounds.is_empty() && v[i] > bounds[i].1 {
            v[i] = x0[i] - step;
        }
        clip(&mut v, bounds);
        let fv = eval(&v, evals);
        simplex.push((v, fv));
    }

    let cmp = |a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)| a.1.total_cmp(&b.1);
    loop {
        simplex.sort_by(cmp);
        let fbest = simplex[0].1;
        let fworst = simplex[d].1;
        if fbest == f64::INFINITY {
            return (simplex[0].0.clone(), fbest, false);
        }
        let fspread = fworst - fbest;
        let xspread = simplex[1..]
            .iter()
            .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if fspread <= spec.tol_f * fbest.abs().max(1.0) && xspread <= spec.tol_x {
            return (simplex[0].0.clone(), fbest, true);
        }
        if xspread == 0.0 {
            // simplex collapsed onto the box boundary
            return (simplex[0].0.clone(), fbest, true);
        }
        if *evals >= spec.max_evals {
            return (simplex[0].0.clone(), fbest, false);
        }

        let mut c = vec![0.0; d];
        for (v, _) in &simplex[..d] {
            for (ci, vi) in c.iter_mut().zip(v) {
                *ci += vi / d as f64;
            }
        }
        let worst = simplex[d].0.clone();
        let along = |t: f64| {
            let mut p: Vec<f64> = c.iter().zip(&worst).map(|(ci, wi)| ci + t * (ci - wi)).collect();
            clip(&mut p, bounds);
            p
        };

        let xr = along(1.0);
        let fr = eval(&xr, evals);
        if fr < fbest {
            let xe = along(2.0);
            let fe = eval(&xe, evals);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
            continue;
        }
        let (xc, fc, ok) = if fr < fworst {
            let xc = along(0.5);
            let fc = eval(&xc, evals);
            (xc, fc, fc <= fr)
        } else {
            let xc = along(-0.5);
            let fc = eval(&xc, evals);
            (xc, fc, fc < fworst)
        };
        if ok {
            simplex[d] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for vert in simplex.iter_mut().skip(1) {
            let mut p: Vec<f64> = x_best.iter().zip(&vert.0).map(|(b, v)| b + 0.5 * (v - b)).collect();
            clip(&mut p, bounds);
            let fp = eval(&p, evals);
            *vert = (p, fp);
        }
    }
}

/// Runs Nelder–Mead from every start and keeps the best result.
pub fn multistart<F: FnMut(&[f64]) -> f64>(mut f: F, starts: &[Vec<f64>], spec: &OptimizerSpec) -> OptResult {
    let mut best: Option<OptResult> = None;
    let mut evals = 0;
    for s in starts {
        let r = nelder_mead(&mut f, s, spec);
        evals += r.evals;
        if best.as_ref().map_or(true, |b| r.f < b.f) {
            best = Some(r);
        }
    }
    let mut b = best.expect("multistart needs at least one start");
    b.evals = evals;
    b
}

const CGOLD: f64 = 0.381_966_011_250_105_1;

/// Brent's minimizer on [a, b] (golden section with parabolic steps).
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> OptResult {
    let (mut a, mut b) = if a < b { (a, b) } else { (b, a) };
    let (a0, b0) = (a, b);
    let mut x = a + CGOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = sanitize(f(x));
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    let mut evals = 1;
    let mut converged = false;
    for _ in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-14;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            converged = true;
            break;
        }
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() >= (0.5 * q * etemp).abs() || p <= q * (a - x) || p >= q * (b - x) {
                e = if x >= xm { a - x } else { b - x };
                d = CGOLD * e;
            } else {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
            }
        } else {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = sanitize(f(u));
        evals += 1;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    // Brent cannot resolve x below √eps·|x| from function values alone; a
    // symmetric three-point parabola with a wider step can.
    let h = 1e-5 * x.abs().max(b0 - a0).max(1e-8);
    if x - h >= a0 && x + h <= b0 {
        let (fm, fp) = (sanitize(f(x - h)), sanitize(f(x + h)));
        evals += 2;
        let curv = fp - 2.0 * fx + fm;
        if curv > 0.0 && curv.is_finite() {
            let xn = x - 0.5 * h * (fp - fm) / curv;
            if (xn - x).abs() < h && xn >= a0 && xn <= b0 {
                let fxn = sanitize(f(xn));
                evals += 1;
                if fxn <= fx {
                    return OptResult { x: vec![xn], f: fxn, evals, converged };
                }
            }
        }
    }
    OptResult { x: vec![x], f: fx, evals, converged }
}

/// Brent–Dekker root finding. Returns `None` when [a, b] does not bracket a
/// sign change.
pub fn brent_root<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> Option<f64> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if !(fa.is_finite() && fb.is_finite()) || fa * fb > 0.0 {
        return None;
    }
    if fa == 0.0 {
        return Some(a);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Some(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if !fb.is_finite() {
            return None;
        }
    }
    Some(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_1d() {
        let spec = OptimizerSpec::nelder_mead(vec![]);
        let r = nelder_mead(|x| (x[0] - 3.0).powi(2), &[0.0], &spec);
        assert!((r.x[0] - 3.0).abs() < 1e-6, "{:?}", r);
    }

    #[test]
    fn rosenbrock() {
        let spec = OptimizerSpec::nelder_mead(vec![]).with_restarts(3);
        let r = nelder_mead(
            |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
            &[-1.2, 1.0],
            &spec,
        );
        assert!((r.x[0] - 1.0).abs() < 1e-3 && (r.x[1] - 1.0).abs() < 1e-3, "{:?}", r);
    }

    #[test]
    fn bounds_are_respected() {
        let spec = OptimizerSpec::nelder_mead(vec![(0.0, 1.0), (0.0, 1.0)]);
        let r = nelder_mead(|x| (x[0] - 3.0).powi(2) + (x[1] + 2.0).powi(2), &[0.5, 0.5], &spec);
        assert!((r.x[0] - 1.0).abs() < 1e-8 && r.x[1].abs() < 1e-8);
    }

    #[test]
    fn brent_cos() {
        let r = brent(f64::cos, 2.0, 4.0, 1e-10, 200);
        assert!((r.x[0] - std::f64::consts::PI).abs() < 1e-8, "{:?}", r);
    }

    #[test]
    fn root_of_cubic() {
        let r = brent_root(|x| x * x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-12);
        assert!(brent_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 100).is_none());
    }

    #[test]
    fn nan_is_treated_as_penalty() {
        let spec = OptimizerSpec::nelder_mead(vec![(-5.0, 5.0)]);
        let r = nelder_mead(|x| if x[0] < 0.0 { f64::NAN } else { (x[0] - 1.0).powi(2) }, &[2.0], &spec);
        assert!((r.x[0] - 1.0).abs() < 1e-5);
    }
}

/// Damped Newton refinement with central finite differences, for smooth
/// objectives near a minimum. Steps are taken only when they lower `f` and
/// stay inside the box, so the result is never worse than `x0`.
pub fn newton_polish<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], bounds: &[(f64, f64)], iters: usize) -> OptResult {
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut evals = 1;
    let inside = |v: &[f64]| bounds.is_empty() || v.iter().zip(bounds).all(|(x, b)| *x >= b.0 && *x <= b.1);
    let mut converged = false;
    for _ in 0..iters {
        let h: Vec<f64> = x.iter().map(|v| 1e-4 * v.abs().max(1e-2)).collect();
        let mut g = nalgebra::DVector::zeros(d);
        let mut hess = nalgebra::DMatrix::zeros(d, d);
        let mut at = |dx: &[(usize, f64)], x: &[f64]| {
            let mut y = x.to_vec();
            for &(i, s) in dx {
                y[i] += s;
            }
            f(&y)
        };
        for i in 0..d {
            let fp = at(&[(i, h[i])], &x);
            let fm = at(&[(i, -h[i])], &x);
            g[i] = (fp - fm) / (2.0 * h[i]);
            hess[(i, i)] = (fp - 2.0 * fx + fm) / (h[i] * h[i]);
            for j in 0..i {
                let fpp = at(&[(i, h[i]), (j, h[j])], &x);
                let fpm = at(&[(i, h[i]), (j, -h[j])], &x);
                let fmp = at(&[(i, -h[i]), (j, h[j])], &x);
                let fmm = at(&[(i, -h[i]), (j, -h[j])], &x);
                let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        evals += 2 * d + 2 * d * (d.saturating_sub(1));
        if !g.iter().chain(hess.iter()).all(|v| v.is_finite()) {
            break;
        }
        let step = match hess.clone().cholesky() {
            Some(c) => c.solve(&(-&g)),
            None => break,
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..20 {
            let y: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            if inside(&y) {
                let fy = f(&y);
                evals += 1;
                if fy <= fx {
                    let small = step.iter().zip(&x).all(|(s, a)| (t * s).abs() <= 1e-12 * a.abs().max(1.0));
                    x = y;
                    fx = fy;
                    moved = true;
                    converged = small;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved || converged {
            converged = true;
            break;
        }
    }
    OptResult { x, f: fx, evals, converged }
}
