#![allow(dead_code, clippy::needless_range_loop)]

/// Builds the string split system directly and solves it with textbook
/// Gauss-Jordan elimination, no pivoting.
pub fn naive_split(phis: &[f64], gammas: &[f64], current: f64) -> Vec<f64> {
    let n = phis.len();
    let mut m = vec![vec![0.0; n + 1]; n];
    for i in 0..n - 1 {
        m[i][i] = phis[i];
        m[i][i + 1] = -phis[i + 1];
        m[i][n] = gammas[i] - gammas[i + 1];
    }
    for j in 0..n {
        m[n - 1][j] = 1.0;
    }
    m[n - 1][n] = current;
    for p in 0..n {
        let d = m[p][p];
        for j in 0..=n {
            m[p][j] /= d;
        }
        for r in 0..n {
            if r != p {
                let f = m[r][p];
                for j in 0..=n {
                    m[r][j] -= f * m[p][j];
                }
            }
        }
    }
    (0..n).map(|i| m[i][n]).collect()
}

/// Largest elementwise difference relative to the size of the problem.
pub fn split_error(a: &[f64], b: &[f64], current: f64) -> f64 {
    let scale = a
        .iter()
        .chain(b)
        .fold(current.abs().max(1.0), |s, v| s.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}
