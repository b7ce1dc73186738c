//! Training harness: small MLPs with ReLU^k activations on surface samples,
//! reverse-mode gradients of the weighted L² loss, Adam, and the
//! value / tangential-gradient / Laplace–Beltrami error metrics.

use crate::error::{Error, Result};
use crate::manifold::{
    project_tangent, recover_angles, sphere_lb_ambient, torus_embed, torus_lb_from_partials,
    ManifoldTag, TargetFunction, WeightedSampleSet,
};
use crate::net::{Activation, Layer, Network};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct MLPConfig {
    pub input_dim: usize,
    pub width: usize,
    pub depth: usize,
    /// ReLU exponent per hidden layer; length must equal `depth`.
    pub activation_pattern: Vec<u32>,
    pub layer_norm: bool,
    pub activation_clamp_max: Option<f64>,
    pub weight_clip: Option<f64>,
    pub sk_rescale: bool,
}

impl MLPConfig {
    /// Uniform-exponent config with the defaults used by the sweeps.
    pub fn uniform(width: usize, depth: usize, act_k: u32) -> Self {
        MLPConfig {
            input_dim: 3,
            width,
            depth,
            activation_pattern: vec![act_k; depth],
            layer_norm: false,
            activation_clamp_max: None,
            weight_clip: None,
            sk_rescale: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.width == 0 || self.depth == 0 {
            return Err(Error::invalid("input_dim, width, depth must be positive"));
        }
        if self.activation_pattern.len() != self.depth {
            return Err(Error::invalid(format!(
                "activation pattern has {} entries for depth {}",
                self.activation_pattern.len(),
                self.depth
            )));
        }
        if self.activation_pattern.iter().any(|&t| t == 0) {
            return Err(Error::invalid("activation exponents must be ≥ 1"));
        }
        if self.activation_clamp_max.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::invalid("activation clamp must be positive"));
        }
        if self.weight_clip.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::invalid("weight clip must be positive"));
        }
        Ok(())
    }

    fn fan_in(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_dim
        } else {
            self.width
        }
    }
}

/// Spans of each parameter block inside the flat vector.
struct Layout {
    /// (w, b, ln_gain, ln_offset) offsets per hidden layer.
    hidden: Vec<(usize, usize, usize, usize)>,
    out_w: usize,
    out_b: usize,
    total: usize,
}

fn layout(cfg: &MLPConfig) -> Layout {
    let mut off = 0;
    let mut hidden = Vec::with_capacity(cfg.depth);
    for l in 0..cfg.depth {
        let w = off;
        off += cfg.width * cfg.fan_in(l);
        let b = off;
        off += cfg.width;
        let (g, o) = if cfg.layer_norm {
            let g = off;
            off += cfg.width;
            let o = off;
            off += cfg.width;
            (g, o)
        } else {
            (off, off)
        };
        hidden.push((w, b, g, o));
    }
    let out_w = off;
    off += cfg.width;
    let out_b = off;
    off += 1;
    Layout { hidden, out_w, out_b, total: off }
}

pub fn mlp_param_count(cfg: &MLPConfig) -> usize {
    layout(cfg).total
}

#[derive(Debug, Clone, PartialEq)]
pub struct MLPParams {
    /// Flat parameter vector; see `layout` for the block structure.
    pub flat: Vec<f64>,
}

// ---- ReLU^k moment rescaling ----------------------------------------------------

fn double_factorial_odd(k: u32) -> f64 {
    // (2k−1)!!
    (1..=k).map(|j| (2 * j - 1) as f64).product()
}

/// Γ(j/2) for integer j ≥ 1 via the recursion Γ(x+1) = xΓ(x).
fn gamma_half(j: u32) -> f64 {
    match j {
        1 => PI.sqrt(),
        2 => 1.0,
        _ => (j as f64 / 2.0 - 1.0) * gamma_half(j - 2),
    }
}

/// Var(ReLU^k Z) for Z ~ N(0,1): (2k−1)!!/2 − m_k² with
/// m_k = 2^{k/2−1} Γ((k+1)/2)/√π.
pub fn relu_pow_variance(k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("exponent must be ≥ 1"));
    }
    let mk = (2.0f64).powf(k as f64 / 2.0 - 1.0) * gamma_half(k + 1) / PI.sqrt();
    Ok(double_factorial_odd(k) / 2.0 - mk * mk)
}

/// s_k = √(Var(ReLU Z)/Var(ReLU^k Z)); s_1 = 1.
pub fn sk_scale(k: u32) -> Result<f64> {
    Ok((relu_pow_variance(1)? / relu_pow_variance(k)?).sqrt())
}

/// Fan-in-scaled uniform init (zero biases, unit LN gains). With
/// `sk_rescale`, the weights *reading* a ReLU^k layer are multiplied by s_k
/// to restore unit activation variance at initialization.
pub fn mlp_init(cfg: &MLPConfig, seed: u64) -> Result<MLPParams> {
    cfg.validate()?;
    let lay = layout(cfg);
    let mut flat = vec![0.0; lay.total];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (l, &(w_off, _, g_off, o_off)) in lay.hidden.iter().enumerate() {
        let fan = cfg.fan_in(l);
        let a = (6.0 / fan as f64).sqrt();
        let scale = if cfg.sk_rescale && l > 0 {
            sk_scale(cfg.activation_pattern[l - 1])?
        } else {
            1.0
        };
        for w in &mut flat[w_off..w_off + cfg.width * fan] {
            *w = scale * rng.random_range(-a..a);
        }
        if cfg.layer_norm {
            flat[g_off..g_off + cfg.width].fill(1.0);
            flat[o_off..o_off + cfg.width].fill(0.0);
        }
    }
    let a = (6.0 / cfg.width as f64).sqrt();
    let scale = if cfg.sk_rescale {
        sk_scale(cfg.activation_pattern[cfg.depth - 1])?
    } else {
        1.0
    };
    for w in &mut flat[lay.out_w..lay.out_w + cfg.width] {
        *w = scale * rng.random_range(-a..a);
    }
    Ok(MLPParams { flat })
}

// ---- forward / backward ----------------------------------------------------------

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = [0.0f64; 4];
    let n4 = a.len() & !3;
    let mut i = 0;
    while i < n4 {
        s[0] += a[i] * b[i];
        s[1] += a[i + 1] * b[i + 1];
        s[2] += a[i + 2] * b[i + 2];
        s[3] += a[i + 3] * b[i + 3];
        i += 4;
    }
    let mut t = (s[0] + s[1]) + (s[2] + s[3]);
    while i < a.len() {
        t += a[i] * b[i];
        i += 1;
    }
    t
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn relu_pow(z: f64, t: u32) -> f64 {
    if z <= 0.0 {
        0.0
    } else if t == 1 {
        z
    } else {
        z.powi(t as i32)
    }
}

fn relu_pow_d(z: f64, t: u32) -> f64 {
    if z <= 0.0 {
        0.0
    } else if t == 1 {
        1.0
    } else {
        t as f64 * z.powi(t as i32 - 1)
    }
}

/// Per-sample forward trace, reused by the backward pass.
struct Trace {
    /// Input to each hidden layer's power activation (post-LN when enabled).
    z: Vec<Vec<f64>>,
    /// Affine outputs before LN (only stored when LN is on).
    a: Vec<Vec<f64>>,
    /// (μ, s) of each LN application.
    ln: Vec<(f64, f64)>,
    /// Post-activation outputs.
    h: Vec<Vec<f64>>,
    /// Clamp mask: true where the clamp is active.
    clamped: Vec<Vec<bool>>,
}

fn forward_one(p: &MLPParams, cfg: &MLPConfig, lay: &Layout, x: &[f64], trace: Option<&mut Trace>) -> Result<f64> {
    let mut keep = trace;
    let mut cur: Vec<f64> = x.to_vec();
    for (l, &(w_off, b_off, g_off, o_off)) in lay.hidden.iter().enumerate() {
        let fan = cfg.fan_in(l);
        let t = cfg.activation_pattern[l];
        let mut a = vec![0.0; cfg.width];
        for (j, aj) in a.iter_mut().enumerate() {
            *aj = p.flat[b_off + j] + dot(&p.flat[w_off + j * fan..w_off + (j + 1) * fan], &cur);
        }
        let mut z;
        let mut lnstat = (0.0, 1.0);
        if cfg.layer_norm {
            let w = cfg.width as f64;
            let mu = a.iter().sum::<f64>() / w;
            let var = a.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / w;
            let s = (var + LN_EPS).sqrt();
            lnstat = (mu, s);
            z = vec![0.0; cfg.width];
            for j in 0..cfg.width {
                z[j] = p.flat[g_off + j] * (a[j] - mu) / s + p.flat[o_off + j];
            }
        } else {
            z = a.clone();
        }
        let mut h = vec![0.0; cfg.width];
        let mut mask = vec![false; cfg.width];
        for j in 0..cfg.width {
            let mut v = relu_pow(z[j], t);
            if let Some(c) = cfg.activation_clamp_max {
                if v > c {
                    v = c;
                    mask[j] = true;
                }
            }
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("activation in hidden layer {l}")));
            }
            h[j] = v;
        }
        if let Some(tr) = keep.as_deref_mut() {
            if cfg.layer_norm {
                tr.a.push(a);
            }
            tr.ln.push(lnstat);
            tr.z.push(z);
            tr.h.push(h.clone());
            tr.clamped.push(mask);
        }
        cur = h;
    }
    let out = p.flat[lay.out_b] + dot(&p.flat[lay.out_w..lay.out_w + cfg.width], &cur);
    if !out.is_finite() {
        return Err(Error::NonFinite("network output".into()));
    }
    Ok(out)
}

/// Predictions at a batch of points.
pub fn mlp_forward(p: &MLPParams, cfg: &MLPConfig, points: &[[f64; 3]]) -> Result<Vec<f64>> {
    cfg.validate()?;
    if cfg.input_dim != 3 {
        return Err(Error::DimMismatch("surface MLPs take 3 inputs".into()));
    }
    let lay = layout(cfg);
    check_len(p, &lay)?;
    points.iter().map(|x| forward_one(p, cfg, &lay, x, None)).collect()
}

fn check_len(p: &MLPParams, lay: &Layout) -> Result<()> {
    if p.flat.len() != lay.total {
        return Err(Error::DimMismatch(format!(
            "parameter vector has {} entries, layout needs {}",
            p.flat.len(),
            lay.total
        )));
    }
    Ok(())
}

/// Full weighted-sum loss Σ w_i (u(x_i) − f_i)².
pub fn mlp_loss(
    p: &MLPParams,
    cfg: &MLPConfig,
    points: &[[f64; 3]],
    targets: &[f64],
    weights: &[f64],
) -> Result<f64> {
    let lay = layout(cfg);
    check_len(p, &lay)?;
    if points.len() != targets.len() || points.len() != weights.len() {
        return Err(Error::DimMismatch("points/targets/weights disagree".into()));
    }
    let mut loss = 0.0;
    for ((x, &f), &w) in points.iter().zip(targets).zip(weights) {
        let u = forward_one(p, cfg, &lay, x, None)?;
        loss += w * (u - f) * (u - f);
    }
    Ok(loss)
}

/// Loss and reverse-mode gradient of scale·Σ w_i (u(x_i) − f_i)² over the
/// given batch. Clamped activations propagate zero gradient.
pub fn mlp_grad(
    p: &MLPParams,
    cfg: &MLPConfig,
    points: &[[f64; 3]],
    targets: &[f64],
    weights: &[f64],
    scale: f64,
) -> Result<(f64, Vec<f64>)> {
    cfg.validate()?;
    let lay = layout(cfg);
    check_len(p, &lay)?;
    if points.len() != targets.len() || points.len() != weights.len() {
        return Err(Error::DimMismatch("points/targets/weights disagree".into()));
    }
    let mut grad = vec![0.0; lay.total];
    let mut loss = 0.0;
    for ((x, &f), &w) in points.iter().zip(targets).zip(weights) {
        let mut tr = Trace {
            z: Vec::with_capacity(cfg.depth),
            a: Vec::new(),
            ln: Vec::with_capacity(cfg.depth),
            h: Vec::with_capacity(cfg.depth),
            clamped: Vec::with_capacity(cfg.depth),
        };
        let u = forward_one(p, cfg, &lay, x, Some(&mut tr))?;
        let r = u - f;
        loss += scale * w * r * r;
        let dout = 2.0 * scale * w * r;

        // Output layer.
        let last = &tr.h[cfg.depth - 1];
        grad[lay.out_b] += dout;
        axpy(&mut grad[lay.out_w..lay.out_w + cfg.width], dout, last);
        let mut dh: Vec<f64> = p.flat[lay.out_w..lay.out_w + cfg.width]
            .iter()
            .map(|wj| wj * dout)
            .collect();

        for l in (0..cfg.depth).rev() {
            let (w_off, b_off, g_off, o_off) = lay.hidden[l];
            let fan = cfg.fan_in(l);
            let t = cfg.activation_pattern[l];
            // Through clamp and power.
            let mut dz = vec![0.0; cfg.width];
            for j in 0..cfg.width {
                if !tr.clamped[l][j] {
                    dz[j] = dh[j] * relu_pow_d(tr.z[l][j], t);
                }
            }
            // Through layer norm.
            let da = if cfg.layer_norm {
                let (mu, s) = tr.ln[l];
                let aa = &tr.a[l];
                let wd = cfg.width as f64;
                let mut dzg = vec![0.0; cfg.width];
                for j in 0..cfg.width {
                    let zh = (aa[j] - mu) / s;
                    grad[g_off + j] += dz[j] * zh;
                    grad[o_off + j] += dz[j];
                    dzg[j] = dz[j] * p.flat[g_off + j];
                }
                let m1 = dzg.iter().sum::<f64>() / wd;
                let m2 = dzg
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * (aa[j] - mu) / s)
                    .sum::<f64>()
                    / wd;
                let mut da = vec![0.0; cfg.width];
                for j in 0..cfg.width {
                    let zh = (aa[j] - mu) / s;
                    da[j] = (dzg[j] - m1 - zh * m2) / s;
                }
                da
            } else {
                dz
            };
            // Affine: accumulate parameter grads, propagate to the layer input.
            let below: &[f64] = if l == 0 { x } else { &tr.h[l - 1] };
            let mut dlow = vec![0.0; fan];
            for j in 0..cfg.width {
                let dj = da[j];
                if dj == 0.0 {
                    continue;
                }
                grad[b_off + j] += dj;
                let row = w_off + j * fan;
                axpy(&mut grad[row..row + fan], dj, below);
                axpy(&mut dlow, dj, &p.flat[row..row + fan]);
            }
            dh = dlow;
        }
    }
    Ok((loss, grad))
}

/// Value and exact gradient with respect to the ambient input.
pub fn mlp_value_input_grad(p: &MLPParams, cfg: &MLPConfig, x: &[f64; 3]) -> Result<(f64, [f64; 3])> {
    let lay = layout(cfg);
    check_len(p, &lay)?;
    let mut tr = Trace {
        z: Vec::with_capacity(cfg.depth),
        a: Vec::new(),
        ln: Vec::with_capacity(cfg.depth),
        h: Vec::with_capacity(cfg.depth),
        clamped: Vec::with_capacity(cfg.depth),
    };
    let u = forward_one(p, cfg, &lay, x, Some(&mut tr))?;
    let mut dh: Vec<f64> = p.flat[lay.out_w..lay.out_w + cfg.width].to_vec();
    for l in (0..cfg.depth).rev() {
        let (w_off, _, g_off, _) = lay.hidden[l];
        let fan = cfg.fan_in(l);
        let t = cfg.activation_pattern[l];
        let mut dz = vec![0.0; cfg.width];
        for j in 0..cfg.width {
            if !tr.clamped[l][j] {
                dz[j] = dh[j] * relu_pow_d(tr.z[l][j], t);
            }
        }
        let da = if cfg.layer_norm {
            let (mu, s) = tr.ln[l];
            let aa = &tr.a[l];
            let wd = cfg.width as f64;
            let dzg: Vec<f64> = (0..cfg.width).map(|j| dz[j] * p.flat[g_off + j]).collect();
            let m1 = dzg.iter().sum::<f64>() / wd;
            let m2 = dzg
                .iter()
                .enumerate()
                .map(|(j, v)| v * (aa[j] - mu) / s)
                .sum::<f64>()
                / wd;
            (0..cfg.width)
                .map(|j| (dzg[j] - m1 - (aa[j] - mu) / s * m2) / s)
                .collect()
        } else {
            dz
        };
        let mut dlow = vec![0.0; fan];
        for j in 0..cfg.width {
            if da[j] != 0.0 {
                let row = w_off + j * fan;
                axpy(&mut dlow, da[j], &p.flat[row..row + fan]);
            }
        }
        dh = dlow;
    }
    Ok((u, [dh[0], dh[1], dh[2]]))
}

/// Ambient value/gradient/Hessian of the MLP at x. Exact forward jets when
/// every exponent is ≥ 3 and layer norm is off; otherwise the Hessian falls
/// back to central differences of the exact gradient (h=1e−4) and `fd` is set.
pub struct SurfaceJet {
    pub value: f64,
    pub grad: [f64; 3],
    pub hess: [f64; 9],
    pub fd: bool,
}

pub fn mlp_hvp_surface(p: &MLPParams, cfg: &MLPConfig, x: &[f64; 3]) -> Result<SurfaceJet> {
    cfg.validate()?;
    if cfg.input_dim != 3 {
        return Err(Error::DimMismatch("surface MLPs take 3 inputs".into()));
    }
    let lay = layout(cfg);
    check_len(p, &lay)?;
    let exact = !cfg.layer_norm && cfg.activation_pattern.iter().all(|&t| t >= 3);
    if !exact {
        let (value, grad) = mlp_value_input_grad(p, cfg, x)?;
        let h = 1e-4;
        let mut hess = [0.0; 9];
        for j in 0..3 {
            let mut xp = *x;
            xp[j] += h;
            let mut xm = *x;
            xm[j] -= h;
            let (_, gp) = mlp_value_input_grad(p, cfg, &xp)?;
            let (_, gm) = mlp_value_input_grad(p, cfg, &xm)?;
            for i in 0..3 {
                hess[i * 3 + j] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        for i in 0..3 {
            for j in 0..i {
                let m = 0.5 * (hess[i * 3 + j] + hess[j * 3 + i]);
                hess[i * 3 + j] = m;
                hess[j * 3 + i] = m;
            }
        }
        return Ok(SurfaceJet { value, grad, hess, fd: true });
    }

    // Forward jets: per neuron value, 3-gradient, 3×3 Hessian.
    let dim = 3;
    let mut val: Vec<f64> = x.to_vec();
    let mut jac: Vec<f64> = vec![0.0; dim * dim];
    for j in 0..dim {
        jac[j * dim + j] = 1.0;
    }
    let mut hes: Vec<f64> = vec![0.0; dim * dim * dim];
    for (l, &(w_off, b_off, _, _)) in lay.hidden.iter().enumerate() {
        let fan = cfg.fan_in(l);
        let t = cfg.activation_pattern[l];
        let mut nval = vec![0.0; cfg.width];
        let mut njac = vec![0.0; cfg.width * dim];
        let mut nhes = vec![0.0; cfg.width * dim * dim];
        for j in 0..cfg.width {
            let row = &p.flat[w_off + j * fan..w_off + (j + 1) * fan];
            let a = p.flat[b_off + j] + dot(row, &val);
            let mut ga = [0.0; 3];
            let mut ha = [0.0; 9];
            for (r, &wr) in row.iter().enumerate() {
                for c in 0..dim {
                    ga[c] += wr * jac[r * dim + c];
                }
                for c in 0..dim * dim {
                    ha[c] += wr * hes[r * dim * dim + c];
                }
            }
            let (v, s1, s2) = if a <= 0.0 {
                (0.0, 0.0, 0.0)
            } else {
                let ti = t as i32;
                (
                    a.powi(ti),
                    t as f64 * a.powi(ti - 1),
                    (t * (t - 1)) as f64 * a.powi(ti - 2),
                )
            };
            let mut vj = v;
            let clamp_hit = cfg.activation_clamp_max.is_some_and(|c| v > c);
            if clamp_hit {
                vj = cfg.activation_clamp_max.unwrap();
            }
            if !vj.is_finite() {
                return Err(Error::NonFinite(format!("activation in hidden layer {l}")));
            }
            nval[j] = vj;
            if !clamp_hit {
                for c in 0..dim {
                    njac[j * dim + c] = s1 * ga[c];
                }
                for r in 0..dim {
                    for c in 0..dim {
                        nhes[j * dim * dim + r * dim + c] = s2 * ga[r] * ga[c] + s1 * ha[r * dim + c];
                    }
                }
            }
        }
        val = nval;
        jac = njac;
        hes = nhes;
    }
    let ow = &p.flat[lay.out_w..lay.out_w + cfg.width];
    let value = p.flat[lay.out_b] + dot(ow, &val);
    if !value.is_finite() {
        return Err(Error::NonFinite("network output".into()));
    }
    let mut grad = [0.0; 3];
    let mut hess = [0.0; 9];
    for (j, &wj) in ow.iter().enumerate() {
        for c in 0..dim {
            grad[c] += wj * jac[j * dim + c];
        }
        for c in 0..dim * dim {
            hess[c] += wj * hes[j * dim * dim + c];
        }
    }
    Ok(SurfaceJet { value, grad, hess, fd: false })
}

// ---- optimizer --------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam update; the weight clip (if configured) is applied to
/// every parameter after the step.
pub fn adam_step(st: &mut AdamState, p: &mut MLPParams, grad: &[f64], cfg: &MLPConfig) -> Result<()> {
    if grad.len() != p.flat.len() || st.m.len() != grad.len() {
        return Err(Error::DimMismatch("gradient/parameter length mismatch".into()));
    }
    st.step += 1;
    let c1 = 1.0 - st.beta1.powi(st.step as i32);
    let c2 = 1.0 - st.beta2.powi(st.step as i32);
    for i in 0..grad.len() {
        st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grad[i];
        st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grad[i] * grad[i];
        let mh = st.m[i] / c1;
        let vh = st.v[i] / c2;
        p.flat[i] -= st.lr * mh / (vh.sqrt() + st.eps);
    }
    if let Some(c) = cfg.weight_clip {
        for w in &mut p.flat {
            *w = w.clamp(-c, c);
        }
    }
    Ok(())
}

// ---- training loop ----------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { steps: 2000, batch: 2048, lr: 1e-3, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub params: MLPParams,
    /// (step, full-dataset loss) at every checkpoint (each 100 steps).
    pub trace: Vec<(usize, f64)>,
    pub best_loss: f64,
    pub diverged: bool,
}

const DIVERGENCE_LIMIT: f64 = 1e6;

/// Minibatch Adam on the weighted-sum loss. Batches are drawn by a seeded
/// without-replacement shuffle per epoch (remainders smaller than a batch are
/// reshuffled into the next epoch). The returned parameters are the best
/// full-dataset checkpoint, evaluated every 100 steps; a checkpoint loss
/// above 1e6 aborts with `diverged` set.
pub fn train(
    tc: &TrainConfig,
    cfg: &MLPConfig,
    samples: &WeightedSampleSet,
    targets: &[f64],
) -> Result<TrainResult> {
    cfg.validate()?;
    let n = samples.len();
    if n == 0 || targets.len() != n {
        return Err(Error::DimMismatch(format!(
            "{} targets for {} samples",
            targets.len(),
            n
        )));
    }
    let batch = tc.batch.clamp(1, n);
    let mut params = mlp_init(cfg, tc.seed)?;
    let mut adam = AdamState::new(params.flat.len(), tc.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..n).collect();
    let mut pos = n; // force an initial shuffle
    let scale = n as f64 / batch as f64;

    let mut best = params.clone();
    let mut best_loss = mlp_loss(&params, cfg, &samples.points, targets, &samples.weights)?;
    let mut trace = vec![(0usize, best_loss)];
    let mut diverged = false;

    let mut bp: Vec<[f64; 3]> = Vec::with_capacity(batch);
    let mut bt: Vec<f64> = Vec::with_capacity(batch);
    let mut bw: Vec<f64> = Vec::with_capacity(batch);
    for step in 1..=tc.steps {
        if pos + batch > n {
            // Fisher–Yates reshuffle.
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                order.swap(i, j);
            }
            pos = 0;
        }
        bp.clear();
        bt.clear();
        bw.clear();
        for &idx in &order[pos..pos + batch] {
            bp.push(samples.points[idx]);
            bt.push(targets[idx]);
            bw.push(samples.weights[idx]);
        }
        pos += batch;
        let (_, grad) = mlp_grad(&params, cfg, &bp, &bt, &bw, scale)?;
        adam_step(&mut adam, &mut params, &grad, cfg)?;

        if step % 100 == 0 || step == tc.steps {
            let full = mlp_loss(&params, cfg, &samples.points, targets, &samples.weights)?;
            trace.push((step, full));
            if full < best_loss {
                best_loss = full;
                best = params.clone();
            }
            if full > DIVERGENCE_LIMIT {
                diverged = true;
                break;
            }
        }
    }
    Ok(TrainResult { params: best, trace, best_loss, diverged })
}

// ---- surface metrics ----------------------------------------------------------------

/// Anything that exposes value, tangential gradient, and Laplace–Beltrami at
/// surface points. The boolean reports whether a finite-difference Hessian
/// fallback was used.
pub trait SurfaceModel {
    fn surface_jet(&self, x: &[f64; 3], tag: &ManifoldTag) -> Result<(f64, [f64; 3], f64, bool)>;
}

impl SurfaceModel for TargetFunction {
    fn surface_jet(&self, x: &[f64; 3], tag: &ManifoldTag) -> Result<(f64, [f64; 3], f64, bool)> {
        if *tag != self.tag() {
            return Err(Error::invalid("target manifold does not match the sample set"));
        }
        Ok((self.value(x)?, self.tangential_grad(x)?, self.lb(x)?, false))
    }
}

/// An MLP read as a function on the surface through its ambient jets.
pub struct MLPSurface<'a> {
    pub params: &'a MLPParams,
    pub cfg: &'a MLPConfig,
}

impl SurfaceModel for MLPSurface<'_> {
    fn surface_jet(&self, x: &[f64; 3], tag: &ManifoldTag) -> Result<(f64, [f64; 3], f64, bool)> {
        match tag {
            ManifoldTag::Sphere => {
                let jet = mlp_hvp_surface(self.params, self.cfg, x)?;
                let tang = project_tangent(x, &jet.grad);
                let lb = sphere_lb_ambient(x, &jet.grad, &jet.hess)?;
                Ok((jet.value, tang, lb, jet.fd))
            }
            ManifoldTag::Torus(p) => {
                let (u, v) = recover_angles(x, p)?;
                let (value, grad) = mlp_value_input_grad(self.params, self.cfg, x)?;
                let xu = |uu: f64, vv: f64| {
                    let ring = p.big_r + p.small_r * vv.cos();
                    [-ring * uu.sin(), ring * uu.cos(), 0.0]
                };
                let xv = |uu: f64, vv: f64| {
                    [
                        -p.small_r * vv.sin() * uu.cos(),
                        -p.small_r * vv.sin() * uu.sin(),
                        p.small_r * vv.cos(),
                    ]
                };
                // Chart partials of the composite u∘X from the exact ambient gradient.
                let fu = |uu: f64, vv: f64| {
                    let pt = torus_embed(uu, vv, p);
                    let (_, g) = mlp_value_input_grad(self.params, self.cfg, &pt).expect("finite");
                    let e = xu(uu, vv);
                    g[0] * e[0] + g[1] * e[1] + g[2] * e[2]
                };
                let fv = |uu: f64, vv: f64| {
                    let pt = torus_embed(uu, vv, p);
                    let (_, g) = mlp_value_input_grad(self.params, self.cfg, &pt).expect("finite");
                    let e = xv(uu, vv);
                    g[0] * e[0] + g[1] * e[1] + g[2] * e[2]
                };
                let lb = torus_lb_from_partials(&fu, &fv, u, v, p);
                // Tangential projection onto the (orthogonal) coordinate frame.
                let (eu, ev) = (xu(u, v), xv(u, v));
                let nu = eu[0] * eu[0] + eu[1] * eu[1] + eu[2] * eu[2];
                let nv = ev[0] * ev[0] + ev[1] * ev[1] + ev[2] * ev[2];
                let cu = (grad[0] * eu[0] + grad[1] * eu[1] + grad[2] * eu[2]) / nu;
                let cv = (grad[0] * ev[0] + grad[1] * ev[1] + grad[2] * ev[2]) / nv;
                let tang = [
                    cu * eu[0] + cv * ev[0],
                    cu * eu[1] + cv * ev[1],
                    cu * eu[2] + cv * ev[2],
                ];
                Ok((value, tang, lb, false))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    pub wmse_f: f64,
    pub wmse_grad: f64,
    pub wmse_lap: f64,
    /// True when any point used the finite-difference Hessian fallback.
    pub fd_hessian: bool,
}

/// Weighted squared-error components between a model and the analytic target
/// over a quadrature sample set: value, tangential gradient, and
/// Laplace–Beltrami mismatches.
pub fn eval_components(
    model: &dyn SurfaceModel,
    samples: &WeightedSampleSet,
    target: &TargetFunction,
) -> Result<EvalMetrics> {
    if samples.tag != target.tag() {
        return Err(Error::invalid("sample set and target live on different manifolds"));
    }
    let mut out = EvalMetrics { wmse_f: 0.0, wmse_grad: 0.0, wmse_lap: 0.0, fd_hessian: false };
    for (x, &w) in samples.points.iter().zip(&samples.weights) {
        let (mv, mg, ml, fd) = model.surface_jet(x, &samples.tag)?;
        let tv = target.value(x)?;
        let tg = target.tangential_grad(x)?;
        let tl = target.lb(x)?;
        out.wmse_f += w * (mv - tv) * (mv - tv);
        let d = [mg[0] - tg[0], mg[1] - tg[1], mg[2] - tg[2]];
        out.wmse_grad += w * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        out.wmse_lap += w * (ml - tl) * (ml - tl);
        out.fd_hessian |= fd;
    }
    if !(out.wmse_f.is_finite() && out.wmse_grad.is_finite() && out.wmse_lap.is_finite()) {
        return Err(Error::NonFinite("evaluation metrics".into()));
    }
    Ok(out)
}

// ---- checkpoints ---------------------------------------------------------------------

/// Exact conversion of a plain MLP (no layer norm, no clamp) into the
/// serializable network form.
pub fn mlp_to_network(p: &MLPParams, cfg: &MLPConfig) -> Result<Network> {
    cfg.validate()?;
    if cfg.layer_norm || cfg.activation_clamp_max.is_some() {
        return Err(Error::Unsupported(
            "layer norm and clamped activations have no exact network form".into(),
        ));
    }
    let lay = layout(cfg);
    check_len(p, &lay)?;
    let mut layers = Vec::with_capacity(cfg.depth + 1);
    for (l, &(w_off, b_off, _, _)) in lay.hidden.iter().enumerate() {
        let fan = cfg.fan_in(l);
        let mut layer = Layer::new(cfg.width, fan, Activation::Power(cfg.activation_pattern[l]));
        layer.weights.copy_from_slice(&p.flat[w_off..w_off + cfg.width * fan]);
        layer.biases.copy_from_slice(&p.flat[b_off..b_off + cfg.width]);
        layers.push(layer);
    }
    let mut out = Layer::new(1, cfg.width, Activation::Affine);
    out.weights.copy_from_slice(&p.flat[lay.out_w..lay.out_w + cfg.width]);
    out.biases[0] = p.flat[lay.out_b];
    layers.push(out);
    Network::assemble(cfg.input_dim, layers, f64::INFINITY)
}
