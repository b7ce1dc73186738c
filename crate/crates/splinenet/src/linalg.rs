//! Small dense-linear-algebra and combinatorics helpers.
//!
//! Systems here are tiny (k×k with k ≤ 8 for dual functionals and power
//! decompositions), so a partial-pivot Gaussian elimination is all that is
//! warranted.

use crate::error::{Error, Result};

/// Solve `a x = b` for square `a` (row-major, n×n) in place of copies.
/// Partial pivoting; returns `Numeric` if the pivot underflows.
pub fn solve(a: &[f64], b: &[f64], n: usize) -> Result<Vec<f64>> {
    if a.len() != n * n || b.len() != n {
        return Err(Error::DimMismatch(format!(
            "solve: a is {} (want {}), b is {} (want {})",
            a.len(),
            n * n,
            b.len(),
            n
        )));
    }
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        let mut best = m[col * n + col].abs();
        for r in col + 1..n {
            let v = m[r * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best < 1e-300 {
            return Err(Error::Numeric(format!(
                "singular system (pivot {best:.3e} in column {col})"
            )));
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
            }
            x.swap(col, piv);
        }
        let d = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[r * n + c] -= f * m[col * n + c];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for c in col + 1..n {
            s -= m[col * n + c] * x[c];
        }
        x[col] = s / m[col * n + col];
    }
    Ok(x)
}

/// C(n, k) as f64, exact for the small arguments used here.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// n! as f64 (n ≤ 170).
pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Ordinary least squares on (x, y) pairs; returns (slope, intercept, r²).
/// r² is defined as 1 when the responses are constant (zero total variance).
#[allow(clippy::many_single_char_names)]
pub fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::DimMismatch("ols: x/y length".into()));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::invalid("ols needs at least two points"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::invalid("ols: x values are all identical"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        let ss_res = (0..n)
            .map(|i| {
                let e = y[i] - (slope * x[i] + intercept);
                e * e
            })
            .sum::<f64>();
        1.0 - ss_res / syy
    };
    Ok((slope, intercept, r2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_known_system() {
        // [2 1; 1 3] x = [5; 10] → x = (1, 3).
        let x = solve(&[2.0, 1.0, 1.0, 3.0], &[5.0, 10.0], 2).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 3.0).abs() < 1e-14);
        assert!(solve(&[1.0, 2.0, 2.0, 4.0], &[1.0, 2.0], 2).is_err());
        assert!(solve(&[1.0], &[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn solve_needs_pivoting() {
        // Zero leading pivot forces a row swap.
        let x = solve(&[0.0, 1.0, 1.0, 0.0], &[2.0, 3.0], 2).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-14);
        assert!((x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn combinatorics() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(8, 0), 1.0);
        assert_eq!(binomial(3, 5), 0.0);
        assert_eq!(factorial(0), 1.0);
        assert_eq!(factorial(6), 720.0);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| -2.5 * v + 7.0).collect();
        let (m, b, r2) = ols(&x, &y).unwrap();
        assert!((m + 2.5).abs() < 1e-12);
        assert!((b - 7.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
        assert!(ols(&[1.0, 1.0], &[2.0, 3.0]).is_err());
        assert!(ols(&[1.0], &[2.0]).is_err());
    }
}
