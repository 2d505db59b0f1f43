//! Small dense helpers for row-major `d×d` matrices with `d ≤ 3` in practice.

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn identity(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

/// `out = a · b` for square row-major matrices.
pub fn matmul(a: &[f64], b: &[f64], d: usize, out: &mut [f64]) {
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += a[i * d + k] * b[k * d + j];
            }
            out[i * d + j] = s;
        }
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(m: &[f64], d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        _ => {
            let mut a = m.to_vec();
            let mut det = 1.0;
            for c in 0..d {
                let p = (c..d)
                    .max_by(|&i, &j| a[i * d + c].abs().total_cmp(&a[j * d + c].abs()))
                    .unwrap();
                if a[p * d + c] == 0.0 {
                    return 0.0;
                }
                if p != c {
                    for k in 0..d {
                        a.swap(p * d + k, c * d + k);
                    }
                    det = -det;
                }
                let piv = a[c * d + c];
                det *= piv;
                for r in c + 1..d {
                    let f = a[r * d + c] / piv;
                    for k in c..d {
                        a[r * d + k] -= f * a[c * d + k];
                    }
                }
            }
            det
        }
    }
}

/// Frobenius norm.
pub fn frobenius(m: &[f64]) -> f64 {
    norm(m)
}
