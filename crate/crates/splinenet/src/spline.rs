//! B-splines of order `k` on uniform knots over [0,1], point-evaluation dual
//! functionals, tensor-product quasi-interpolation, and Sobolev-norm error
//! measurement.
//!
//! Knot layout for `n` subintervals and order `k`: the endpoints 0 and 1 are
//! repeated `k` times, interior knots sit at `j/n`, giving `n + 2k - 1` knots
//! and `n + k - 1` basis splines. Basis index `i` (0-based) has support
//! `[t_i, t_{i+k}]`. Evaluation is right-continuous at interior knots and
//! takes the left limit at x = 1.

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    n: usize,
    k: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    /// Uniform open knot vector on [0,1]: `n ≥ 1` subintervals, order `k ≥ 2`.
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid(format!("order k must be ≥ 2, got {k}")));
        }
        if n < 1 {
            return Err(Error::invalid("need at least one subinterval"));
        }
        let mut knots = Vec::with_capacity(n + 2 * k - 1);
        knots.extend(std::iter::repeat(0.0).take(k));
        for j in 1..n {
            knots.push(j as f64 / n as f64);
        }
        knots.extend(std::iter::repeat(1.0).take(k));
        Ok(KnotVector { n, k, knots })
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn intervals(&self) -> usize {
        self.n
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis splines: n + k - 1.
    pub fn basis_count(&self) -> usize {
        self.n + self.k - 1
    }

    /// Mesh width of the (uniform) interior grid.
    pub fn mesh(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Index μ of the knot interval containing x: t_μ ≤ x < t_{μ+1}, with
    /// x = 1 assigned to the last nonempty interval (left-limit convention).
    pub fn span(&self, x: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::invalid(format!("x = {x} outside [0,1]")));
        }
        let lo = self.k - 1;
        let hi = self.n + self.k - 2;
        if x >= 1.0 {
            return Ok(hi);
        }
        let mut mu = lo + ((x * self.n as f64).floor() as usize).min(self.n - 1);
        while mu < hi && self.knots[mu + 1] <= x {
            mu += 1;
        }
        while mu > lo && self.knots[mu] > x {
            mu -= 1;
        }
        Ok(mu)
    }

    /// Values of the k basis splines that are nonzero on the interval of x,
    /// differentiated σ times (0 ≤ σ ≤ k-1). Returns (first basis index,
    /// k values for indices first..first+k).
    ///
    /// The order-(k-σ) column of the Cox–de Boor triangle is built first and
    /// then lifted by σ difference passes, so values and derivatives come from
    /// one consistent recurrence.
    pub fn eval_all(&self, x: f64, sigma: usize) -> Result<(usize, Vec<f64>)> {
        if sigma >= self.k {
            return Err(Error::invalid(format!(
                "derivative order {sigma} not available at spline order {}",
                self.k
            )));
        }
        let mu = self.span(x)?;
        let k = self.k;
        let t = &self.knots;

        // Triangle up to order k-σ; level of order o holds B_{μ-o+1+r, o}(x).
        let target = k - sigma;
        let mut cur = vec![1.0f64];
        for o in 2..=target {
            let mut next = vec![0.0; o];
            for (r, slot) in next.iter_mut().enumerate() {
                let i = mu + 1 + r - o;
                let mut v = 0.0;
                if r >= 1 {
                    let den = t[i + o - 1] - t[i];
                    if den > 0.0 {
                        v += (x - t[i]) / den * cur[r - 1];
                    }
                }
                if r < o - 1 {
                    let den = t[i + o] - t[i + 1];
                    if den > 0.0 {
                        v += (t[i + o] - x) / den * cur[r];
                    }
                }
                *slot = v;
            }
            cur = next;
        }

        // σ derivative lifts: order o values of D^m become order o+1 values
        // of D^{m+1} via scaled first differences.
        for o in target..k {
            let mut next = vec![0.0; o + 1];
            for (r, slot) in next.iter_mut().enumerate() {
                let i = mu + r - o;
                // cur window covers basis μ-o+1..=μ at order o.
                let gi = if r >= 1 { cur[r - 1] } else { 0.0 };
                let gi1 = if r < o { cur[r] } else { 0.0 };
                let mut v = 0.0;
                let den = t[i + o] - t[i];
                if den > 0.0 {
                    v += gi / den;
                }
                let den = t[i + o + 1] - t[i + 1];
                if den > 0.0 {
                    v -= gi1 / den;
                }
                *slot = o as f64 * v;
            }
            cur = next;
        }

        Ok((mu + 1 - k, cur))
    }

    /// B_i^{(σ)}(x) for a single basis index.
    pub fn eval_deriv(&self, i: usize, x: f64, sigma: usize) -> Result<f64> {
        if i >= self.basis_count() {
            return Err(Error::IndexOutOfRange {
                index: i,
                max: self.basis_count(),
            });
        }
        let (first, vals) = self.eval_all(x, sigma)?;
        Ok(if i >= first && i < first + self.k {
            vals[i - first]
        } else {
            0.0
        })
    }

    /// B_i(x).
    pub fn eval(&self, i: usize, x: f64) -> Result<f64> {
        self.eval_deriv(i, x, 0)
    }
}

/// One point-evaluation dual functional: J(f) = Σ_m weights[m]·f(nodes[m]).
#[derive(Debug, Clone)]
pub struct DualFunctional {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl DualFunctional {
    pub fn apply(&self, f: &dyn Fn(f64) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        for (tau, w) in self.nodes.iter().zip(&self.weights) {
            let v = f(*tau);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("f({tau}) = {v}")));
            }
            acc += w * v;
        }
        Ok(acc)
    }
}

/// Dual basis {J_i} with J_i(B_j) = δ_ij, one functional per basis spline.
#[derive(Debug, Clone)]
pub struct DualFunctionals {
    items: Vec<DualFunctional>,
}

impl DualFunctionals {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, i: usize) -> Result<&DualFunctional> {
        self.items.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            max: self.items.len(),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &DualFunctional> {
        self.items.iter()
    }
}

/// Build the dual basis for `kv`. For basis i the nodes are the k equispaced
/// points τ_m = a + (m+1)(b-a)/(k+1) of one maximal-length knot interval
/// (a,b) of supp(B_i) — ties broken toward the interval whose midpoint is
/// closest to the middle of the support, then the smaller index — and the
/// weights solve the local k×k collocation system Σ_m w_m B_j(τ_m) = δ_ij.
pub fn dual_functionals(kv: &KnotVector) -> Result<DualFunctionals> {
    let k = kv.order();
    let t = kv.knots();
    let mut items = Vec::with_capacity(kv.basis_count());
    for ib in 0..kv.basis_count() {
        let support_mid = 0.5 * (t[ib] + t[ib + k]);
        let mut best: Option<(usize, f64, f64)> = None; // (j, len, |mid - support_mid|)
        for j in ib..ib + k {
            let len = t[j + 1] - t[j];
            if len <= 0.0 {
                continue;
            }
            let dist = (0.5 * (t[j] + t[j + 1]) - support_mid).abs();
            let better = match best {
                None => true,
                Some((_, bl, bd)) => {
                    len > bl + 1e-14 || ((len - bl).abs() <= 1e-14 && dist < bd - 1e-14)
                }
            };
            if better {
                best = Some((j, len, dist));
            }
        }
        let (j, len, _) = best.ok_or_else(|| Error::Numeric("empty support".into()))?;
        let a = t[j];
        let nodes: Vec<f64> = (0..k)
            .map(|m| a + (m as f64 + 1.0) * len / (k as f64 + 1.0))
            .collect();

        // Basis nonzero on (a,b) are first..first+k with first = j-k+1.
        let first = j + 1 - k;
        let pos = ib - first;
        let mut mat = vec![0.0; k * k]; // mat[c][m] = B_{first+c}(τ_m)
        for (m, tau) in nodes.iter().enumerate() {
            let (f0, vals) = kv.eval_all(*tau, 0)?;
            debug_assert_eq!(f0, first);
            for c in 0..k {
                mat[c * k + m] = vals[c];
            }
        }
        let mut rhs = vec![0.0; k];
        rhs[pos] = 1.0;
        let weights = linalg::solve(&mat, &rhs, k)?;
        items.push(DualFunctional { nodes, weights });
    }
    Ok(DualFunctionals { items })
}

/// Tensor-product spline space on [0,1]^d with identical axes.
#[derive(Debug, Clone)]
pub struct TensorSplineSpace {
    axes: Vec<KnotVector>,
}

impl TensorSplineSpace {
    pub fn new(dim: usize, n: usize, k: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::invalid(format!("dim must be 1..=3, got {dim}")));
        }
        let kv = KnotVector::new(n, k)?;
        Ok(TensorSplineSpace {
            axes: vec![kv; dim],
        })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, j: usize) -> &KnotVector {
        &self.axes[j]
    }

    pub fn order(&self) -> usize {
        self.axes[0].order()
    }

    pub fn intervals(&self) -> usize {
        self.axes[0].intervals()
    }

    /// Basis splines per axis.
    pub fn per_axis(&self) -> usize {
        self.axes[0].basis_count()
    }

    /// Total coefficient count (per_axis ^ dim).
    pub fn total(&self) -> usize {
        self.per_axis().pow(self.dim() as u32)
    }
}

/// Coefficients of a quasi-interpolant in row-major order, axis 0 slowest.
#[derive(Debug, Clone)]
pub struct QuasiInterpolant {
    pub space: TensorSplineSpace,
    pub coeffs: Vec<f64>,
}

impl QuasiInterpolant {
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        let m = self.space.per_axis();
        multi.iter().fold(0, |acc, &i| acc * m + i)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |a, c| a.max(c.abs()))
    }
}

/// Advance a mixed-radix counter; returns false after the last combination.
fn odometer(idx: &mut [usize], radix: usize) -> bool {
    for slot in idx.iter_mut().rev() {
        *slot += 1;
        if *slot < radix {
            return true;
        }
        *slot = 0;
    }
    false
}

/// Q f = Σ_i (Π_j J_{i_j}) f · B_i: tensor quasi-interpolation by applying the
/// axis dual functionals to f on the node grid of each multi-index.
pub fn quasi_interpolate(
    space: &TensorSplineSpace,
    f: &dyn Fn(&[f64]) -> f64,
) -> Result<QuasiInterpolant> {
    let d = space.dim();
    let k = space.order();
    let duals = dual_functionals(space.axis(0))?; // axes are identical
    let m = space.per_axis();
    let mut coeffs = vec![0.0; space.total()];
    let mut multi = vec![0usize; d];
    let mut x = vec![0.0; d];
    loop {
        let flat = multi.iter().fold(0, |acc, &i| acc * m + i);
        let funcs: Vec<&DualFunctional> = multi.iter().map(|&i| duals.get(i).unwrap()).collect();
        let mut acc = 0.0;
        let mut node = vec![0usize; d];
        loop {
            let mut w = 1.0;
            for j in 0..d {
                x[j] = funcs[j].nodes[node[j]];
                w *= funcs[j].weights[node[j]];
            }
            let v = f(&x);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("f({x:?}) = {v}")));
            }
            acc += w * v;
            if !odometer(&mut node, k) {
                break;
            }
        }
        coeffs[flat] = acc;
        if !odometer(&mut multi, m) {
            break;
        }
    }
    Ok(QuasiInterpolant {
        space: space.clone(),
        coeffs,
    })
}

/// D^α (Q f)(x) for a multi-index α (one entry per axis, each ≤ k-1).
pub fn spline_eval(qi: &QuasiInterpolant, x: &[f64], alpha: &[usize]) -> Result<f64> {
    let d = qi.space.dim();
    if x.len() != d || alpha.len() != d {
        return Err(Error::DimMismatch(format!(
            "point/alpha must have dim {d}, got {}/{}",
            x.len(),
            alpha.len()
        )));
    }
    let k = qi.space.order();
    let m = qi.space.per_axis();
    let mut firsts = Vec::with_capacity(d);
    let mut vals = Vec::with_capacity(d);
    for j in 0..d {
        let (f0, v) = qi.space.axis(j).eval_all(x[j], alpha[j])?;
        firsts.push(f0);
        vals.push(v);
    }
    let mut acc = 0.0;
    let mut node = vec![0usize; d];
    loop {
        let mut flat = 0;
        let mut w = 1.0;
        for j in 0..d {
            flat = flat * m + (firsts[j] + node[j]);
            w *= vals[j][node[j]];
        }
        acc += w * qi.coeffs[flat];
        if !odometer(&mut node, k) {
            break;
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LpNorm {
    P(f64),
    Infinity,
}

/// Enumerate multi-indices α with |α| ≤ s and α_j ≤ cap.
pub fn multi_indices(dim: usize, s: usize, cap: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; dim];
    loop {
        if cur.iter().sum::<usize>() <= s {
            out.push(cur.clone());
        }
        if !odometer(&mut cur, cap.min(s) + 1) {
            break;
        }
    }
    out
}

/// W^s_p error ‖f − Qf‖ on a uniform tensor grid with `grid_n` subintervals
/// per axis: trapezoid quadrature for finite p, grid max for p = ∞. `df`
/// must return D^α f(x) for every |α| ≤ s.
pub fn sobolev_error(
    df: &dyn Fn(&[f64], &[usize]) -> f64,
    qi: &QuasiInterpolant,
    s: usize,
    p: LpNorm,
    grid_n: usize,
) -> Result<f64> {
    let d = qi.space.dim();
    let k = qi.space.order();
    if s > k - 1 {
        return Err(Error::invalid(format!(
            "Sobolev order {s} exceeds spline smoothness budget {}",
            k - 1
        )));
    }
    if grid_n < 1 {
        return Err(Error::invalid("grid_n must be ≥ 1"));
    }
    if let LpNorm::P(pv) = p {
        if !(pv >= 1.0) {
            return Err(Error::invalid(format!("p must be ≥ 1, got {pv}")));
        }
    }
    let alphas = multi_indices(d, s, k - 1);
    let h = 1.0 / grid_n as f64;
    let mut acc: f64 = 0.0;
    let mut worst: f64 = 0.0;
    let mut gi = vec![0usize; d];
    let mut x = vec![0.0; d];
    loop {
        let mut w = 1.0;
        for j in 0..d {
            x[j] = gi[j] as f64 * h;
            w *= if gi[j] == 0 || gi[j] == grid_n {
                0.5 * h
            } else {
                h
            };
        }
        for alpha in &alphas {
            let target = df(&x, alpha);
            if !target.is_finite() {
                return Err(Error::NonFinite(format!("D^{alpha:?} f({x:?})")));
            }
            let e = (target - spline_eval(qi, &x, alpha)?).abs();
            match p {
                LpNorm::P(pv) => acc += w * e.powf(pv),
                LpNorm::Infinity => worst = worst.max(e),
            }
        }
        if !odometer(&mut gi, grid_n + 1) {
            break;
        }
    }
    Ok(match p {
        LpNorm::P(pv) => acc.powf(1.0 / pv),
        LpNorm::Infinity => worst,
    })
}
