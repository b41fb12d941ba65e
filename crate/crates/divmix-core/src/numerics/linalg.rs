use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

pub const COND_LIMIT: f64 = 1e12;

/// 2-norm condition number from the singular values.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.singular_values();
    let max = sv.iter().cloned().fold(0.0f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// LU with partial pivoting, guarded by the condition number.
pub fn lu_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let cond = condition_number(a);
    if !(cond <= COND_LIMIT) {
        return Err(Error::Singular(cond));
    }
    a.clone().lu().solve(b).ok_or(Error::Singular(f64::INFINITY))
}

/// d with d_i = a_ii^{-1/2}, or None if some diagonal entry is not positive.
fn equilibration(a: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = a.nrows();
    let mut d = DVector::zeros(n);
    for i in 0..n {
        let v = a[(i, i)];
        if !(v > 0.0) || !v.is_finite() {
            return None;
        }
        d[i] = 1.0 / v.sqrt();
    }
    Some(d)
}

fn scaled(a: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| a[(i, j)] * d[i] * d[j])
}

/// Sylvester's criterion: all leading principal minors positive. Evaluated
/// on the diagonally equilibrated matrix, which has the same minor signs.
pub fn is_spd(a: &DMatrix<f64>) -> bool {
    if !a.is_square() {
        return false;
    }
    let n = a.nrows();
    for i in 0..n {
        for j in 0..i {
            let (x, y) = (a[(i, j)], a[(j, i)]);
            if (x - y).abs() > 1e-12 * (x.abs() + y.abs()).max(1e-300) {
                return false;
            }
        }
    }
    let d = match equilibration(a) {
        Some(d) => d,
        None => return false,
    };
    let s = scaled(a, &d);
    (1..=n).all(|k| s.view((0, 0), (k, k)).clone_owned().determinant() > 0.0)
}

/// Solves A x = b for symmetric positive definite A. The condition guard is
/// applied to D A D with D = diag(A)^{-1/2}.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if !is_spd(a) {
        return Err(Error::Domain("matrix is not symmetric positive definite".into()));
    }
    let d = equilibration(a).ok_or(Error::Singular(f64::INFINITY))?;
    let s = scaled(a, &d);
    let cond = condition_number(&s);
    if !(cond <= COND_LIMIT) {
        return Err(Error::Singular(cond));
    }
    let rhs = b.component_mul(&d);
    let y = s.lu().solve(&rhs).ok_or(Error::Singular(f64::INFINITY))?;
    Ok(y.component_mul(&d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve() {
        let a = DMatrix::<f64>::identity(3, 3);
        let b = DVector::from_vec(vec![1.0, -2.0, 3.5]);
        assert_eq!(lu_solve(&a, &b).unwrap(), b);
        assert_eq!(solve_spd(&a, &b).unwrap(), b);
    }

    #[test]
    fn hilbert4() {
        let a = DMatrix::from_fn(4, 4, |i, j| 1.0 / (i + j + 1) as f64);
        // exact solution of H x = (1,1,1,1): (−4, 60, −180, 140)
        let b = DVector::from_element(4, 1.0);
        let x = solve_spd(&a, &b).unwrap();
        let exact = [-4.0, 60.0, -180.0, 140.0];
        for i in 0..4 {
            assert!((x[i] - exact[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn sylvester_examples() {
        assert!(is_spd(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])));
        assert!(!is_spd(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])));
    }

    #[test]
    fn singular_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(lu_solve(&a, &DVector::from_element(2, 1.0)), Err(Error::Singular(_))));
    }
}
