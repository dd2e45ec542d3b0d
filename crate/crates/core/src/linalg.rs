//! Small dense least-squares helpers used by the regression stages.

/// Ridge added to the standardized normal matrix when it is not positive definite.
pub const SINGULAR_RIDGE: f64 = 1e-8;

/// In-place Cholesky factorization of a symmetric `n x n` matrix (row-major).
/// Fails when a pivot is not sufficiently positive.
fn cholesky(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 1e-12 * a[j * n + j].abs().max(1e-300)) {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves `a x = b` for symmetric positive (semi)definite `a`, retrying with
/// a diagonal ridge when the plain factorization fails.
pub fn solve_spd(a: &[f64], b: &[f64], n: usize, ridge: f64) -> Vec<f64> {
    let mut l = a.to_vec();
    if !cholesky(&mut l, n) {
        l = a.to_vec();
        for i in 0..n {
            l[i * n + i] += ridge;
        }
        if !cholesky(&mut l, n) {
            // Rank zero in every direction: the least-squares answer is zero.
            return vec![0.0; n];
        }
    }
    let mut x = b.to_vec();
    cholesky_solve(&l, n, &mut x);
    x
}

/// Least-squares fit `y ~ intercept + X beta` where `columns` are the
/// regressors. Regressors are standardized before solving; coefficients are
/// returned on the original scale.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub intercept: f64,
    pub beta: Vec<f64>,
}

pub fn ols_with_intercept(y: &[f64], columns: &[Vec<f64>]) -> OlsFit {
    let n = y.len();
    let k = columns.len();
    if n == 0 {
        return OlsFit {
            intercept: 0.0,
            beta: vec![0.0; k],
        };
    }
    let nf = n as f64;
    let y_mean = y.iter().sum::<f64>() / nf;
    if k == 0 {
        return OlsFit {
            intercept: y_mean,
            beta: Vec::new(),
        };
    }
    let mut means = Vec::with_capacity(k);
    let mut scales = Vec::with_capacity(k);
    for c in columns {
        let m = c.iter().sum::<f64>() / nf;
        let var = c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / nf;
        means.push(m);
        scales.push(if var > 0.0 { var.sqrt() } else { 1.0 });
    }
    let z: Vec<Vec<f64>> = columns
        .iter()
        .enumerate()
        .map(|(j, c)| c.iter().map(|v| (v - means[j]) / scales[j]).collect())
        .collect();
    let mut gram = vec![0.0; k * k];
    let mut rhs = vec![0.0; k];
    for a in 0..k {
        for b in a..k {
            let s = z[a].iter().zip(&z[b]).map(|(p, q)| p * q).sum::<f64>() / nf;
            gram[a * k + b] = s;
            gram[b * k + a] = s;
        }
        rhs[a] = z[a].iter().zip(y).map(|(p, q)| p * (q - y_mean)).sum::<f64>() / nf;
    }
    let coef = solve_spd(&gram, &rhs, k, SINGULAR_RIDGE);
    let beta: Vec<f64> = coef.iter().zip(&scales).map(|(c, s)| c / s).collect();
    let intercept = y_mean - beta.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
    OlsFit { intercept, beta }
}
