//! Explicit piecewise-polynomial networks: dense affine layers with
//! power-of-ReLU activations σ_t(z) = max(z,0)^t, a final affine layer, and
//! exact forward jets (values, gradients, Hessians).
//!
//! Networks built by [`build`] realize spline quasi-interpolants exactly; the
//! text serialization is bit-exact (f64 payloads stored as hex bit patterns).

pub mod build;

pub use build::{
    build_basis_net, build_derivative_net, build_identity_net, build_mult_net, build_qi_net,
    build_square_net, power_decomposition, power_units, PowerDecomposition, PowerUnit, WeightMode,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// σ_t(z) = max(z, 0)^t, t ≥ 1.
    Power(u32),
    /// No activation; only valid for the final layer.
    Affine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    /// Row-major rows×cols.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(rows: usize, cols: usize, activation: Activation) -> Self {
        Layer {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            biases: vec![0.0; rows],
            activation,
        }
    }

    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.reserve(self.rows);
        for r in 0..self.rows {
            let row = &self.weights[r * self.cols..(r + 1) * self.cols];
            let mut acc = self.biases[r];
            for (w, v) in row.iter().zip(input) {
                acc += w * v;
            }
            out.push(match self.activation {
                Activation::Power(t) => powf_relu(acc, t),
                Activation::Affine => acc,
            });
        }
    }
}

#[inline]
fn powf_relu(z: f64, t: u32) -> f64 {
    if z > 0.0 {
        z.powi(t as i32)
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub input_dim: usize,
    pub output_dim: usize,
    /// Max allowed parameter magnitude; ∞ for unconstrained networks.
    pub weight_bound: f64,
    /// Parameter budget declared at build time; param_count() may not exceed it.
    pub declared_budget: usize,
}

impl Network {
    /// Wrap layers into a validated network; the budget is set to the actual
    /// nonzero-parameter count.
    pub fn assemble(input_dim: usize, layers: Vec<Layer>, weight_bound: f64) -> Result<Self> {
        let output_dim = layers.last().map(|l| l.rows).unwrap_or(0);
        let mut net = Network {
            layers,
            input_dim,
            output_dim,
            weight_bound,
            declared_budget: 0,
        };
        net.declared_budget = net.param_count();
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("network has no layers"));
        }
        let mut dim = self.input_dim;
        for (i, l) in self.layers.iter().enumerate() {
            if l.cols != dim {
                return Err(Error::DimMismatch(format!(
                    "layer {i}: expects {} inputs, previous width is {dim}",
                    l.cols
                )));
            }
            if l.weights.len() != l.rows * l.cols || l.biases.len() != l.rows {
                return Err(Error::DimMismatch(format!("layer {i}: storage size")));
            }
            let last = i + 1 == self.layers.len();
            match (l.activation, last) {
                (Activation::Affine, true) => {}
                (Activation::Power(t), false) if t >= 1 => {}
                (Activation::Power(_), false) => {
                    return Err(Error::invalid(format!("layer {i}: power exponent must be ≥ 1")))
                }
                (Activation::Affine, false) => {
                    return Err(Error::invalid(format!(
                        "layer {i}: affine activation only allowed on the final layer"
                    )))
                }
                (Activation::Power(_), true) => {
                    return Err(Error::invalid("final layer must be affine"))
                }
            }
            for v in l.weights.iter().chain(&l.biases) {
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("layer {i} parameter {v}")));
                }
            }
            dim = l.rows;
        }
        if self.output_dim != dim {
            return Err(Error::DimMismatch("output_dim".into()));
        }
        if self.weight_bound.is_finite() {
            let m = self.max_abs_param();
            if m > self.weight_bound {
                return Err(Error::invalid(format!(
                    "parameter magnitude {m} exceeds declared bound {}",
                    self.weight_bound
                )));
            }
        }
        if self.param_count() > self.declared_budget {
            return Err(Error::invalid(format!(
                "parameter count {} exceeds declared budget {}",
                self.param_count(),
                self.declared_budget
            )));
        }
        Ok(())
    }

    /// Number of nonzero weights and biases.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                l.weights.iter().filter(|w| **w != 0.0).count()
                    + l.biases.iter().filter(|b| **b != 0.0).count()
            })
            .sum()
    }

    /// Hidden (activated) layer count.
    pub fn depth(&self) -> usize {
        self.layers.len().saturating_sub(1)
    }

    pub fn width(&self) -> usize {
        self.layers.iter().map(|l| l.rows).max().unwrap_or(0)
    }

    pub fn max_abs_param(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases))
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::DimMismatch(format!(
                "input has {} entries, network expects {}",
                x.len(),
                self.input_dim
            )));
        }
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for l in &self.layers {
            l.forward(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Scalar convenience for single-output networks.
    pub fn eval1(&self, x: &[f64]) -> Result<f64> {
        let out = self.eval(x)?;
        if out.len() != 1 {
            return Err(Error::DimMismatch(format!("{}-output network", out.len())));
        }
        Ok(out[0])
    }
}

/// Exact derivatives of the realized function at a point.
#[derive(Debug, Clone)]
pub struct NetJets {
    pub values: Vec<f64>,
    /// jacobian[o][j] = ∂ f_o / ∂ x_j.
    pub jacobian: Vec<Vec<f64>>,
    /// hessians[o] is the input_dim × input_dim matrix of f_o, row-major.
    pub hessians: Option<Vec<Vec<f64>>>,
    /// Set when a second derivative was requested through a Power(1) layer;
    /// the kink contributes 0 there (a.e. convention).
    pub kink_convention: bool,
}

/// First (order=1) or first+second (order=2) derivatives by forward jet
/// propagation. Activations differentiate as t·z^{t-1}, t(t-1)·z^{t-2} on
/// z > 0 and 0 on z ≤ 0.
pub fn net_deriv(net: &Network, x: &[f64], order: usize) -> Result<NetJets> {
    if !(1..=2).contains(&order) {
        return Err(Error::invalid(format!("derivative order {order} not supported")));
    }
    if x.len() != net.input_dim {
        return Err(Error::DimMismatch("net_deriv input".into()));
    }
    let d = net.input_dim;
    let want_h = order == 2;
    let mut kink = false;

    let mut vals = x.to_vec();
    let mut grads: Vec<f64> = (0..d * d)
        .map(|i| if i % d == i / d { 1.0 } else { 0.0 })
        .collect();
    let mut hess: Vec<f64> = vec![0.0; if want_h { d * d * d } else { 0 }];

    for l in &net.layers {
        let rows = l.rows;
        let mut nvals = vec![0.0; rows];
        let mut ngrads = vec![0.0; rows * d];
        let mut nhess = vec![0.0; if want_h { rows * d * d } else { 0 }];
        for r in 0..rows {
            let row = &l.weights[r * l.cols..(r + 1) * l.cols];
            let mut a = l.biases[r];
            let mut ag = vec![0.0; d];
            let mut ah = vec![0.0; if want_h { d * d } else { 0 }];
            for (c, w) in row.iter().enumerate() {
                if *w == 0.0 {
                    continue;
                }
                a += w * vals[c];
                for j in 0..d {
                    ag[j] += w * grads[c * d + j];
                }
                if want_h {
                    for j in 0..d * d {
                        ah[j] += w * hess[c * d * d + j];
                    }
                }
            }
            match l.activation {
                Activation::Affine => {
                    nvals[r] = a;
                    ngrads[r * d..(r + 1) * d].copy_from_slice(&ag);
                    if want_h {
                        nhess[r * d * d..(r + 1) * d * d].copy_from_slice(&ah);
                    }
                }
                Activation::Power(t) => {
                    if t == 1 && want_h {
                        kink = true;
                    }
                    let (v, d1, d2) = if a > 0.0 {
                        let tf = t as f64;
                        let v = a.powi(t as i32);
                        let d1 = tf * a.powi(t as i32 - 1);
                        let d2 = if t >= 2 {
                            tf * (tf - 1.0) * a.powi(t as i32 - 2)
                        } else {
                            0.0
                        };
                        (v, d1, d2)
                    } else {
                        (0.0, 0.0, 0.0)
                    };
                    nvals[r] = v;
                    for j in 0..d {
                        ngrads[r * d + j] = d1 * ag[j];
                    }
                    if want_h {
                        for p in 0..d {
                            for q in 0..d {
                                nhess[r * d * d + p * d + q] =
                                    d1 * ah[p * d + q] + d2 * ag[p] * ag[q];
                            }
                        }
                    }
                }
            }
        }
        vals = nvals;
        grads = ngrads;
        hess = nhess;
    }

    let out = net.output_dim;
    Ok(NetJets {
        values: vals,
        jacobian: (0..out).map(|o| grads[o * d..(o + 1) * d].to_vec()).collect(),
        hessians: want_h.then(|| {
            (0..out)
                .map(|o| hess[o * d * d..(o + 1) * d * d].to_vec())
                .collect()
        }),
        kink_convention: kink,
    })
}

// ---- serialization ---------------------------------------------------------

fn f64_hex(v: f64) -> String {
    format!("0x{:016x}", v.to_bits())
}

fn parse_f64_hex(tok: &str) -> Result<f64> {
    let hex = tok
        .strip_prefix("0x")
        .ok_or_else(|| Error::Parse(format!("expected hex float, got {tok:?}")))?;
    let bits =
        u64::from_str_radix(hex, 16).map_err(|e| Error::Parse(format!("bad float bits: {e}")))?;
    Ok(f64::from_bits(bits))
}

impl Network {
    /// Bit-exact, self-describing text form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("splinenet-net v1\n");
        s.push_str(&format!("input_dim {}\n", self.input_dim));
        s.push_str(&format!("output_dim {}\n", self.output_dim));
        s.push_str(&format!("weight_bound {}\n", f64_hex(self.weight_bound)));
        s.push_str(&format!("budget {}\n", self.declared_budget));
        s.push_str(&format!("layers {}\n", self.layers.len()));
        for l in &self.layers {
            match l.activation {
                Activation::Power(t) => {
                    s.push_str(&format!("layer power {t} rows {} cols {}\n", l.rows, l.cols))
                }
                Activation::Affine => {
                    s.push_str(&format!("layer affine rows {} cols {}\n", l.rows, l.cols))
                }
            }
            for r in 0..l.rows {
                s.push('w');
                for c in 0..l.cols {
                    s.push(' ');
                    s.push_str(&f64_hex(l.weights[r * l.cols + c]));
                }
                s.push('\n');
            }
            s.push('b');
            for r in 0..l.rows {
                s.push(' ');
                s.push_str(&f64_hex(l.biases[r]));
            }
            s.push('\n');
        }
        s.push_str("end\n");
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next = |what: &str| -> Result<&str> {
            lines
                .next()
                .ok_or_else(|| Error::Parse(format!("unexpected end of input, wanted {what}")))
        };
        let magic = next("header")?;
        if magic != "splinenet-net v1" {
            return Err(Error::Parse(format!("unrecognized header {magic:?}")));
        }
        fn field<'a>(line: &'a str, key: &str) -> Result<&'a str> {
            let rest = line
                .strip_prefix(key)
                .ok_or_else(|| Error::Parse(format!("expected {key:?} line, got {line:?}")))?;
            Ok(rest.trim())
        }
        fn int(s: &str) -> Result<usize> {
            s.parse().map_err(|e| Error::Parse(format!("bad integer {s:?}: {e}")))
        }
        let input_dim = int(field(next("input_dim")?, "input_dim")?)?;
        let output_dim = int(field(next("output_dim")?, "output_dim")?)?;
        let weight_bound = parse_f64_hex(field(next("weight_bound")?, "weight_bound")?)?;
        let budget = int(field(next("budget")?, "budget")?)?;
        let n_layers = int(field(next("layers")?, "layers")?)?;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let hdr = next("layer header")?;
            let toks: Vec<&str> = hdr.split_whitespace().collect();
            let (activation, rest) = match toks.as_slice() {
                ["layer", "power", t, rest @ ..] => (
                    Activation::Power(
                        t.parse()
                            .map_err(|e| Error::Parse(format!("bad exponent {t:?}: {e}")))?,
                    ),
                    rest,
                ),
                ["layer", "affine", rest @ ..] => (Activation::Affine, rest),
                _ => return Err(Error::Parse(format!("bad layer header {hdr:?}"))),
            };
            let (rows, cols) = match rest {
                ["rows", r, "cols", c] => (int(r)?, int(c)?),
                _ => return Err(Error::Parse(format!("bad layer shape in {hdr:?}"))),
            };
            let mut layer = Layer::new(rows, cols, activation);
            for r in 0..rows {
                let line = next("weight row")?;
                let mut toks = line.split_whitespace();
                if toks.next() != Some("w") {
                    return Err(Error::Parse(format!("expected weight row, got {line:?}")));
                }
                for c in 0..cols {
                    let tok = toks
                        .next()
                        .ok_or_else(|| Error::Parse(format!("row {r}: missing column {c}")))?;
                    layer.weights[r * cols + c] = parse_f64_hex(tok)?;
                }
                if toks.next().is_some() {
                    return Err(Error::Parse(format!("row {r}: trailing tokens")));
                }
            }
            let line = next("bias row")?;
            let mut toks = line.split_whitespace();
            if toks.next() != Some("b") {
                return Err(Error::Parse(format!("expected bias row, got {line:?}")));
            }
            for r in 0..rows {
                let tok = toks
                    .next()
                    .ok_or_else(|| Error::Parse(format!("missing bias {r}")))?;
                layer.biases[r] = parse_f64_hex(tok)?;
            }
            if toks.next().is_some() {
                return Err(Error::Parse("trailing bias tokens".into()));
            }
            layers.push(layer);
        }
        if next("end")? != "end" {
            return Err(Error::Parse("missing end marker".into()));
        }
        let net = Network {
            layers,
            input_dim,
            output_dim,
            weight_bound,
            declared_budget: budget,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }
}
