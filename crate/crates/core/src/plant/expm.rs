//! Matrix exponential via Pade-13 approximation with scaling and squaring.

use nalgebra::DMatrix;

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

const THETA13: f64 = 5.371920351148152;

fn one_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let norm = one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let scaled = a / 2f64.powi(s as i32);

    let eye = DMatrix::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let u_inner = &a6 * (PADE13[13] * &a6 + PADE13[11] * &a4 + PADE13[9] * &a2)
        + PADE13[7] * &a6
        + PADE13[5] * &a4
        + PADE13[3] * &a2
        + PADE13[1] * &eye;
    let u = &scaled * u_inner;
    let v = &a6 * (PADE13[12] * &a6 + PADE13[10] * &a4 + PADE13[8] * &a2)
        + PADE13[6] * &a6
        + PADE13[4] * &a4
        + PADE13[2] * &a2
        + PADE13[0] * &eye;

    let denom = &v - &u;
    let numer = &v + &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .expect("Pade denominator is nonsingular for scaled inputs");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}
