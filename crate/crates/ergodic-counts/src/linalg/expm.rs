//! Matrix exponential by scaling and squaring.
//!
//! Padé approximant order is picked from the 1-norm of the input using the
//! standard thresholds (Higham, "The Scaling and Squaring Method for the
//! Matrix Exponential Revisited"), which keeps the backward error at the
//! rounding level for every norm regime we encounter.

use super::{lu, CMat};

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.53939833006323e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068;
const THETA_13: f64 = 5.371920351148152;

/// exp(A) for square complex A.
pub fn expm(a: &CMat) -> CMat {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.rows();
    let norm = a.one_norm();
    if norm == 0.0 {
        return CMat::identity(n);
    }

    let (u, v, squarings) = if norm < THETA_3 {
        let (u, v) = pade(a, &PADE3);
        (u, v, 0)
    } else if norm < THETA_5 {
        let (u, v) = pade(a, &PADE5);
        (u, v, 0)
    } else if norm < THETA_7 {
        let (u, v) = pade(a, &PADE7);
        (u, v, 0)
    } else if norm < THETA_9 {
        let (u, v) = pade(a, &PADE9);
        (u, v, 0)
    } else {
        let squarings = ((norm / THETA_13).log2().ceil() as i32).max(0);
        let scaled = a.scale_re(0.5f64.powi(squarings));
        let (u, v) = pade13(&scaled);
        (u, v, squarings)
    };

    // exp(A) ≈ (V - U)^{-1} (V + U).
    let numer = v.add(&u);
    let denom = v.sub(&u);
    let mut result = lu::solve(&denom, &numer).expect("Padé denominator is nonsingular");
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Even/odd split U, V for orders 3..9; `b` holds the Padé coefficients.
fn pade(a: &CMat, b: &[f64]) -> (CMat, CMat) {
    let n = a.rows();
    let id = CMat::identity(n);
    let a2 = a.matmul(a);

    // Powers a^0, a^2, a^4, ... as needed.
    let mut even_pows = vec![id.clone(), a2.clone()];
    while even_pows.len() < b.len() / 2 {
        let next = even_pows.last().unwrap().matmul(&a2);
        even_pows.push(next);
    }

    let mut odd_sum = CMat::zeros(n, n);
    let mut even_sum = CMat::zeros(n, n);
    for (k, &coeff) in b.iter().enumerate() {
        let term = even_pows[k / 2].scale_re(coeff);
        if k % 2 == 1 {
            odd_sum.add_assign(&term);
        } else {
            even_sum.add_assign(&term);
        }
    }
    (a.matmul(&odd_sum), even_sum)
}

fn pade13(a: &CMat) -> (CMat, CMat) {
    let n = a.rows();
    let id = CMat::identity(n);
    let b = &PADE13;
    let a2 = a.matmul(a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);

    let mut inner_u = a6.scale_re(b[13]);
    inner_u.add_assign(&a4.scale_re(b[11]));
    inner_u.add_assign(&a2.scale_re(b[9]));
    let mut u_poly = a6.matmul(&inner_u);
    u_poly.add_assign(&a6.scale_re(b[7]));
    u_poly.add_assign(&a4.scale_re(b[5]));
    u_poly.add_assign(&a2.scale_re(b[3]));
    u_poly.add_assign(&id.scale_re(b[1]));
    let u = a.matmul(&u_poly);

    let mut inner_v = a6.scale_re(b[12]);
    inner_v.add_assign(&a4.scale_re(b[10]));
    inner_v.add_assign(&a2.scale_re(b[8]));
    let mut v = a6.matmul(&inner_v);
    v.add_assign(&a6.scale_re(b[6]));
    v.add_assign(&a4.scale_re(b[4]));
    v.add_assign(&a2.scale_re(b[2]));
    v.add_assign(&id.scale_re(b[0]));
    (u, v)
}
