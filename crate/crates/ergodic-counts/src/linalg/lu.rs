//! Complex LU solves with partial pivoting (used by the Padé step in `expm`).

use super::CMat;

/// Solve `A X = B` for square `A`. Returns `None` when a pivot underflows,
/// i.e. the system is numerically singular.
pub fn solve(a: &CMat, b: &CMat) -> Option<CMat> {
    assert!(a.is_square());
    assert_eq!(a.rows(), b.rows());
    let n = a.rows();
    let nrhs = b.cols();
    let mut lu = a.clone();
    let mut x = b.clone();
    let floor = 1e-300 + f64::EPSILON * a.one_norm();

    for k in 0..n {
        let mut piv = k;
        let mut best = lu[(k, k)].norm();
        for i in (k + 1)..n {
            let m = lu[(i, k)].norm();
            if m > best {
                best = m;
                piv = i;
            }
        }
        if best < floor {
            return None;
        }
        if piv != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(piv, j)];
                lu[(piv, j)] = t;
            }
            for j in 0..nrhs {
                let t = x[(k, j)];
                x[(k, j)] = x[(piv, j)];
                x[(piv, j)] = t;
            }
        }
        let dkk = lu[(k, k)];
        for i in (k + 1)..n {
            let f = lu[(i, k)] / dkk;
            lu[(i, k)] = f;
            if f.re == 0.0 && f.im == 0.0 {
                continue;
            }
            for j in (k + 1)..n {
                let v = lu[(k, j)];
                lu[(i, j)] -= f * v;
            }
            for j in 0..nrhs {
                let v = x[(k, j)];
                x[(i, j)] -= f * v;
            }
        }
    }

    // Back substitution.
    for j in 0..nrhs {
        for i in (0..n).rev() {
            let mut acc = x[(i, j)];
            for k in (i + 1)..n {
                acc -= lu[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = acc / lu[(i, i)];
        }
    }
    Some(x)
}
