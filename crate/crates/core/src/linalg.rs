//! Dense helpers for the small (n ≤ 8) matrices that live at each node.
//! Everything is row-major.

/// Inverse by Gauss–Jordan elimination with partial pivoting.
pub fn invert(n: usize, a: &[f64]) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut inv = identity(n);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))?;
        let p = m[pivot * n + col];
        if p.abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(pivot * n + k, col * n + k);
                inv.swap(pivot * n + k, col * n + k);
            }
        }
        let scale = 1.0 / m[col * n + col];
        for k in 0..n {
            m[col * n + k] *= scale;
            inv[col * n + k] *= scale;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row * n + col];
            if f == 0.0 {
                continue;
            }
            for k in 0..n {
                m[row * n + k] -= f * m[col * n + k];
                inv[row * n + k] -= f * inv[col * n + k];
            }
        }
    }
    Some(inv)
}

pub fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

pub fn matmul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

pub fn matvec(n: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
    (0..n).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect()
}

/// Lower Cholesky factor, or `None` when the matrix is not positive definite.
pub fn cholesky(n: usize, a: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

pub fn det(n: usize, a: &[f64]) -> f64 {
    let mut m = a.to_vec();
    let mut d = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .unwrap();
        let p = m[pivot * n + col];
        if p == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(pivot * n + k, col * n + k);
            }
            d = -d;
        }
        d *= p;
        for row in col + 1..n {
            let f = m[row * n + col] / p;
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
        }
    }
    d
}

/// Max-row-sum norm.
pub fn norm_inf(n: usize, a: &[f64]) -> f64 {
    (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Integer determinant by cofactor expansion (n ≤ 8).
pub fn det_i64(n: usize, a: &[i64]) -> i64 {
    if n == 1 {
        return a[0];
    }
    let mut d = 0;
    for col in 0..n {
        let minor = minor_i64(n, a, 0, col);
        let sign = if col % 2 == 0 { 1 } else { -1 };
        d += sign * a[col] * det_i64(n - 1, &minor);
    }
    d
}

fn minor_i64(n: usize, a: &[i64], row: usize, col: usize) -> Vec<i64> {
    let mut out = Vec::with_capacity((n - 1) * (n - 1));
    for i in 0..n {
        if i == row {
            continue;
        }
        for j in 0..n {
            if j != col {
                out.push(a[i * n + j]);
            }
        }
    }
    out
}

/// Adjugate; equals the inverse when det = 1 and minus it when det = −1.
pub fn adjugate_i64(n: usize, a: &[i64]) -> Vec<i64> {
    if n == 1 {
        return vec![1];
    }
    let mut adj = vec![0; n * n];
    for i in 0..n {
        for j in 0..n {
            let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
            adj[j * n + i] = sign * det_i64(n - 1, &minor_i64(n, a, i, j));
        }
    }
    adj
}
