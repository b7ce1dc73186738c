//! Experiment suites: exactness verification of compiled networks, the cube
//! Sobolev-rate sweep, and the sphere/torus training ablations, plus the
//! config/CSV plumbing shared by the command-line front end.
//!
//! Every CSV row carries (suite, seed, 16-hex config digest); identical
//! config + seed reruns are byte-identical. Grid points are seeded as
//! base_seed + row index, in deterministic grid order.

use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{fibonacci_grid, torus_sample, TargetFunction, TorusParams, WeightedSampleSet};
use crate::net::build::{build_qi_net, WeightMode};
use crate::spline::{quasi_interpolate, sobolev_error, LpNorm, TensorSplineSpace};
use crate::train::{
    eval_components, mlp_param_count, train, EvalMetrics, MLPConfig, MLPSurface, TrainConfig,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Exactness,
    RateSweep,
    ActkSweep,
    WidthSweep,
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::Exactness => "exactness",
            Suite::RateSweep => "rate_sweep",
            Suite::ActkSweep => "actk_sweep",
            Suite::WidthSweep => "width_sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Manifold {
    Sphere,
    Torus,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub suite: Suite,
    pub seed: u64,
    pub desk_scale: bool,
    pub out: Option<String>,
    pub k_list: Vec<usize>,
    pub n_list: Vec<usize>,
    pub d_list: Vec<usize>,
    pub width_list: Vec<usize>,
    pub manifold: Manifold,
    pub torus_big_r: f64,
    pub torus_small_r: f64,
    pub repeats: usize,
    pub steps: usize,
    pub batch: usize,
    pub samples: usize,
    pub lr: f64,
    pub width: usize,
    pub depth: usize,
    pub act_k: u32,
    pub points: usize,
    pub grid_n: usize,
    pub layer_norm: bool,
    pub clamp: Option<f64>,
    pub weight_clip: Option<f64>,
    pub activation_pattern: Option<Vec<u32>>,
}

impl ExperimentConfig {
    /// Suite defaults. Desk scale keeps each training run under ~2 minutes;
    /// full scale restores the reference settings (never gated).
    pub fn defaults(suite: Suite, desk_scale: bool) -> Self {
        let mut cfg = ExperimentConfig {
            suite,
            seed: 42,
            desk_scale,
            out: None,
            k_list: vec![3, 4, 5],
            n_list: vec![4, 8, 16],
            d_list: vec![1, 2],
            width_list: if desk_scale {
                vec![16, 64, 128]
            } else {
                vec![16, 32, 64, 128, 256]
            },
            manifold: Manifold::Sphere,
            torus_big_r: 1.5,
            torus_small_r: 0.5,
            repeats: if desk_scale { 3 } else { 5 },
            steps: if desk_scale { 2000 } else { 5000 },
            batch: 2048,
            samples: if desk_scale { 5000 } else { 20000 },
            lr: 1e-3,
            width: 64,
            depth: 2,
            act_k: 4,
            points: 10_000,
            grid_n: 256,
            layer_norm: false,
            clamp: None,
            weight_clip: None,
            activation_pattern: None,
        };
        match suite {
            Suite::Exactness => {}
            Suite::RateSweep => {
                cfg.k_list = vec![4];
                cfg.n_list = vec![4, 8, 16, 32];
            }
            Suite::ActkSweep => {
                cfg.k_list = if desk_scale {
                    vec![1, 4]
                } else {
                    vec![1, 2, 3, 4, 5, 6, 7]
                };
            }
            Suite::WidthSweep => {
                cfg.k_list = vec![4];
                // One seed per width keeps the desk sweep under a few minutes.
                cfg.repeats = if desk_scale { 1 } else { 5 };
            }
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_list.is_empty()
            || self.n_list.is_empty()
            || self.d_list.is_empty()
            || self.width_list.is_empty()
        {
            return Err(Error::Config("grid lists must be nonempty".into()));
        }
        if !(self.torus_big_r > self.torus_small_r && self.torus_small_r > 0.0) {
            return Err(Error::Config(format!(
                "torus needs R > r > 0, got R={}, r={}",
                self.torus_big_r, self.torus_small_r
            )));
        }
        if self.repeats == 0 || self.samples < 10 || self.points == 0 || self.grid_n == 0 {
            return Err(Error::Config("counts must be positive (samples ≥ 10)".into()));
        }
        if self.width == 0 || self.depth == 0 || self.act_k == 0 {
            return Err(Error::Config("width, depth, act_k must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("lr must be positive".into()));
        }
        if let Some(p) = &self.activation_pattern {
            if p.is_empty() || p.iter().any(|&t| t == 0) {
                return Err(Error::Config("activation_pattern entries must be ≥ 1".into()));
            }
        }
        Ok(())
    }

    /// Canonical key=value rendering of every effective setting; hashed into
    /// the per-row config column.
    pub fn canonical(&self) -> String {
        fn list(v: &[usize]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
        }
        let mut s = String::new();
        let _ = writeln!(s, "suite={}", self.suite.name());
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "desk_scale={}", self.desk_scale);
        let _ = writeln!(s, "k_list={}", list(&self.k_list));
        let _ = writeln!(s, "n_list={}", list(&self.n_list));
        let _ = writeln!(s, "d_list={}", list(&self.d_list));
        let _ = writeln!(s, "width_list={}", list(&self.width_list));
        let _ = writeln!(
            s,
            "manifold={}",
            match self.manifold {
                Manifold::Sphere => "sphere",
                Manifold::Torus => "torus",
            }
        );
        let _ = writeln!(s, "torus_big_r={:.16e}", self.torus_big_r);
        let _ = writeln!(s, "torus_small_r={:.16e}", self.torus_small_r);
        let _ = writeln!(s, "repeats={}", self.repeats);
        let _ = writeln!(s, "steps={}", self.steps);
        let _ = writeln!(s, "batch={}", self.batch);
        let _ = writeln!(s, "samples={}", self.samples);
        let _ = writeln!(s, "lr={:.16e}", self.lr);
        let _ = writeln!(s, "width={}", self.width);
        let _ = writeln!(s, "depth={}", self.depth);
        let _ = writeln!(s, "act_k={}", self.act_k);
        let _ = writeln!(s, "points={}", self.points);
        let _ = writeln!(s, "grid_n={}", self.grid_n);
        let _ = writeln!(s, "layer_norm={}", self.layer_norm);
        let _ = writeln!(s, "clamp={}", opt_f(self.clamp));
        let _ = writeln!(s, "weight_clip={}", opt_f(self.weight_clip));
        let _ = writeln!(
            s,
            "activation_pattern={}",
            self.activation_pattern
                .as_ref()
                .map(|p| p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"))
                .unwrap_or_else(|| "none".into())
        );
        s
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.canonical().as_bytes());
        let out = h.finalize();
        out.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn opt_f(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_else(|| "none".into())
}

// ---- config file --------------------------------------------------------------------

const KNOWN_KEYS: &[&str] = &[
    "seed",
    "desk_scale",
    "out",
    "k_list",
    "n_list",
    "d_list",
    "width_list",
    "manifold",
    "torus_big_r",
    "torus_small_r",
    "repeats",
    "steps",
    "batch",
    "samples",
    "lr",
    "width",
    "depth",
    "act_k",
    "points",
    "grid_n",
    "layer_norm",
    "clamp",
    "weight_clip",
    "activation_pattern",
];

fn as_u64(v: &toml::Value, key: &str) -> Result<u64> {
    v.as_integer()
        .filter(|&i| i >= 0)
        .map(|i| i as u64)
        .ok_or_else(|| Error::Config(format!("{key} must be a nonnegative integer")))
}

fn as_usize(v: &toml::Value, key: &str) -> Result<usize> {
    Ok(as_u64(v, key)? as usize)
}

fn as_f64(v: &toml::Value, key: &str) -> Result<f64> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::Config(format!("{key} must be a number"))),
    }
}

fn as_bool(v: &toml::Value, key: &str) -> Result<bool> {
    v.as_bool().ok_or_else(|| Error::Config(format!("{key} must be a boolean")))
}

fn as_usize_list(v: &toml::Value, key: &str) -> Result<Vec<usize>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Config(format!("{key} must be an integer array")))?;
    arr.iter().map(|e| as_usize(e, key)).collect()
}

/// Flat key/value config with strict typing; unknown keys are errors.
/// `cli_seed` and `cli_desk` (the command-line flags) override the file;
/// desk scale is resolved first because it selects the defaults.
pub fn load_config(
    suite: Suite,
    text: Option<&str>,
    cli_seed: Option<u64>,
    cli_desk: Option<bool>,
) -> Result<ExperimentConfig> {
    let table: toml::Table = match text {
        Some(t) => t
            .parse()
            .map_err(|e| Error::Config(format!("config parse error: {e}")))?,
        None => toml::Table::new(),
    };
    for key in table.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("unknown config key `{key}`")));
        }
    }
    let desk = match cli_desk {
        Some(d) => d,
        None => match table.get("desk_scale") {
            Some(v) => as_bool(v, "desk_scale")?,
            None => true,
        },
    };
    let mut cfg = ExperimentConfig::defaults(suite, desk);
    for (key, v) in &table {
        match key.as_str() {
            "seed" => cfg.seed = as_u64(v, key)?,
            "desk_scale" => {}
            "out" => {
                cfg.out = Some(
                    v.as_str()
                        .ok_or_else(|| Error::Config("out must be a string".into()))?
                        .to_string(),
                )
            }
            "k_list" => cfg.k_list = as_usize_list(v, key)?,
            "n_list" => cfg.n_list = as_usize_list(v, key)?,
            "d_list" => cfg.d_list = as_usize_list(v, key)?,
            "width_list" => cfg.width_list = as_usize_list(v, key)?,
            "manifold" => {
                cfg.manifold = match v.as_str() {
                    Some("sphere") => Manifold::Sphere,
                    Some("torus") => Manifold::Torus,
                    _ => return Err(Error::Config("manifold must be \"sphere\" or \"torus\"".into())),
                }
            }
            "torus_big_r" => cfg.torus_big_r = as_f64(v, key)?,
            "torus_small_r" => cfg.torus_small_r = as_f64(v, key)?,
            "repeats" => cfg.repeats = as_usize(v, key)?,
            "steps" => cfg.steps = as_usize(v, key)?,
            "batch" => cfg.batch = as_usize(v, key)?,
            "samples" => cfg.samples = as_usize(v, key)?,
            "lr" => cfg.lr = as_f64(v, key)?,
            "width" => cfg.width = as_usize(v, key)?,
            "depth" => cfg.depth = as_usize(v, key)?,
            "act_k" => cfg.act_k = as_usize(v, key)? as u32,
            "points" => cfg.points = as_usize(v, key)?,
            "grid_n" => cfg.grid_n = as_usize(v, key)?,
            "layer_norm" => cfg.layer_norm = as_bool(v, key)?,
            "clamp" => cfg.clamp = Some(as_f64(v, key)?),
            "weight_clip" => cfg.weight_clip = Some(as_f64(v, key)?),
            "activation_pattern" => {
                cfg.activation_pattern =
                    Some(as_usize_list(v, key)?.iter().map(|&x| x as u32).collect())
            }
            _ => unreachable!("key set checked above"),
        }
    }
    if let Some(s) = cli_seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

// ---- slope fitting -----------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least squares on (log₁₀ x, log₁₀ y); needs ≥ 3 strictly positive points.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimMismatch("fit_loglog: x/y length".into()));
    }
    if xs.len() < 3 {
        return Err(Error::invalid("fit_loglog needs at least 3 points"));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid("fit_loglog needs strictly positive finite values"));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.log10()).collect();
    let (slope, intercept, r_squared) = linalg::ols(&lx, &ly)?;
    Ok(SlopeFit { slope, intercept, r_squared })
}

// ---- report plumbing -----------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Gate {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub csv: String,
    pub gates: Vec<Gate>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.pass)
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn gate(gates: &mut Vec<Gate>, name: &str, pass: bool, detail: String) {
    gates.push(Gate { name: name.into(), pass, detail });
}

// ---- exactness suite ------------------------------------------------------------------

const PLAIN_TOL: f64 = 1e-8;
const BOUNDED_TOL: f64 = 1e-6;

fn cube_target(x: &[f64]) -> f64 {
    x.iter().map(|&v| (2.0 * PI * v).sin()).product()
}

/// Compile quasi-interpolant networks over the (k, N, d, mode) grid and
/// verify them against spline evaluation at seeded random points.
pub fn run_exactness(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let digest = cfg.digest();
    let mut csv = String::from(
        "suite,seed,config,kind,k,n,d,mode,max_rel_err,max_abs_param,s_count,depth\n",
    );
    let mut gates = Vec::new();
    let mut worst_plain: f64 = 0.0;
    let mut worst_bounded: f64 = 0.0;
    let mut worst_param: f64 = 0.0;
    let mut any_bounded = false;
    let mut depth_ok = true;
    let mut row_idx = 0u64;
    for &d in &cfg.d_list {
        for &k in &cfg.k_list {
            for mode in [WeightMode::Plain, WeightMode::Bounded] {
                if mode == WeightMode::Bounded && (k < 3 || d > 2) {
                    continue;
                }
                let mut depths = Vec::new();
                for &n in &cfg.n_list {
                    let space = TensorSplineSpace::new(d, n, k)?;
                    let qi = quasi_interpolate(&space, &cube_target)?;
                    let net = build_qi_net(&qi, mode)?;
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(row_idx));
                    let mut max_rel: f64 = 0.0;
                    let mut x = vec![0.0; d];
                    for _ in 0..cfg.points {
                        for xj in &mut x {
                            *xj = rng.random_range(0.0..1.0);
                        }
                        let want = crate::spline::spline_eval(&qi, &x, &vec![0; d])?;
                        let got = net.eval1(&x)?;
                        let rel = (got - want).abs() / want.abs().max(1.0);
                        max_rel = max_rel.max(rel);
                    }
                    let max_param = net.max_abs_param();
                    let mode_name = match mode {
                        WeightMode::Plain => {
                            worst_plain = worst_plain.max(max_rel);
                            "plain"
                        }
                        WeightMode::Bounded => {
                            worst_bounded = worst_bounded.max(max_rel);
                            worst_param = worst_param.max(max_param);
                            any_bounded = true;
                            "bounded"
                        }
                    };
                    depths.push(net.depth());
                    let _ = writeln!(
                        csv,
                        "{},{},{},row,{},{},{},{},{},{},{},{}",
                        cfg.suite.name(),
                        cfg.seed,
                        digest,
                        k,
                        n,
                        d,
                        mode_name,
                        fmt_f(max_rel),
                        fmt_f(max_param),
                        net.param_count(),
                        net.depth()
                    );
                    row_idx += 1;
                }
                if depths.windows(2).any(|w| w[0] != w[1]) {
                    depth_ok = false;
                }
            }
        }
    }
    gate(
        &mut gates,
        "plain_rel_err",
        worst_plain <= PLAIN_TOL,
        format!("max {worst_plain:.3e} vs tol {PLAIN_TOL:.0e}"),
    );
    if any_bounded {
        gate(
            &mut gates,
            "bounded_rel_err",
            worst_bounded <= BOUNDED_TOL,
            format!("max {worst_bounded:.3e} vs tol {BOUNDED_TOL:.0e}"),
        );
        gate(
            &mut gates,
            "bounded_params",
            worst_param <= 1.0,
            format!("max |param| {worst_param}"),
        );
    }
    gate(&mut gates, "depth_constant_in_n", depth_ok, "depth fixed per (k,d,mode)".into());
    Ok(SuiteReport { csv, gates })
}

// ---- rate sweep -------------------------------------------------------------------------

fn cube_target_deriv(x: &[f64], alpha: &[usize]) -> f64 {
    let mut out = 1.0;
    for (&xj, &aj) in x.iter().zip(alpha) {
        out *= (2.0 * PI).powi(aj as i32) * (2.0 * PI * xj + aj as f64 * PI / 2.0).sin();
    }
    out
}

/// W^s_∞ approximation errors of the quasi-interpolant for s ∈ {0,1,2} over
/// the configured N list, with fitted log–log slopes per (d, s).
pub fn run_rate_sweep(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let k = cfg.k_list[0];
    if k < 3 {
        return Err(Error::Config("rate sweep needs spline order ≥ 3 (s reaches 2)".into()));
    }
    let digest = cfg.digest();
    let mut csv =
        String::from("suite,seed,config,kind,d,s,n,error,slope,intercept,r_squared\n");
    let mut gates = Vec::new();
    let mut nesting_ok = true;
    for &d in &cfg.d_list {
        // errors[s][i] over n_list.
        let mut errors = vec![Vec::new(); 3];
        for &n in &cfg.n_list {
            let space = TensorSplineSpace::new(d, n, k)?;
            let qi = quasi_interpolate(&space, &cube_target)?;
            let mut per_s = Vec::new();
            for s in 0..=2usize {
                let e = sobolev_error(&cube_target_deriv, &qi, s, LpNorm::Infinity, cfg.grid_n)?;
                per_s.push(e);
                errors[s].push(e);
                let _ = writeln!(
                    csv,
                    "{},{},{},row,{},{},{},{},,,",
                    cfg.suite.name(),
                    cfg.seed,
                    digest,
                    d,
                    s,
                    n,
                    fmt_f(e)
                );
            }
            if !(per_s[2] >= per_s[1] && per_s[1] >= per_s[0]) {
                nesting_ok = false;
            }
        }
        let ns: Vec<f64> = cfg.n_list.iter().map(|&n| n as f64).collect();
        for s in 0..=2usize {
            let fit = fit_loglog(&ns, &errors[s])?;
            let _ = writeln!(
                csv,
                "{},{},{},slope,{},{},,,{},{},{}",
                cfg.suite.name(),
                cfg.seed,
                digest,
                d,
                s,
                fmt_f(fit.slope),
                fmt_f(fit.intercept),
                fmt_f(fit.r_squared)
            );
            let want = -((k - s) as f64) + 0.5;
            gate(
                &mut gates,
                &format!("d{d}_s{s}_slope"),
                fit.slope <= want,
                format!("slope {:.3} vs bound {want:.1}", fit.slope),
            );
        }
    }
    gate(
        &mut gates,
        "error_nesting",
        nesting_ok,
        "W^s nests: error(s=2) ≥ error(s=1) ≥ error(s=0)".into(),
    );
    Ok(SuiteReport { csv, gates })
}

// ---- training sweeps ---------------------------------------------------------------------

fn dataset(cfg: &ExperimentConfig) -> Result<(WeightedSampleSet, TargetFunction)> {
    match cfg.manifold {
        Manifold::Sphere => Ok((fibonacci_grid(cfg.samples)?, TargetFunction::SphereY31)),
        Manifold::Torus => {
            let p = TorusParams::new(cfg.torus_big_r, cfg.torus_small_r)?;
            let set = torus_sample(cfg.samples, &p, cfg.seed)?;
            let t = TargetFunction::TorusFourier { a: 1.0, m: 2, b: 0.5, n: 1, params: p };
            Ok((set, t))
        }
    }
}

struct RunOutcome {
    final_loss: f64,
    metrics: EvalMetrics,
    diverged: bool,
}

fn run_one(
    cfg: &ExperimentConfig,
    pattern: &[u32],
    run_seed: u64,
    samples: &WeightedSampleSet,
    target: &TargetFunction,
    targets: &[f64],
) -> Result<RunOutcome> {
    let mcfg = MLPConfig {
        input_dim: 3,
        width: cfg.width,
        depth: pattern.len(),
        activation_pattern: pattern.to_vec(),
        layer_norm: cfg.layer_norm,
        activation_clamp_max: cfg.clamp,
        weight_clip: cfg.weight_clip,
        sk_rescale: true,
    };
    let tc = TrainConfig { steps: cfg.steps, batch: cfg.batch, lr: cfg.lr, seed: run_seed };
    let out = train(&tc, &mcfg, samples, targets)?;
    let surf = MLPSurface { params: &out.params, cfg: &mcfg };
    let metrics = eval_components(&surf, samples, target)?;
    Ok(RunOutcome { final_loss: out.best_loss, metrics, diverged: out.diverged })
}

fn pattern_label(p: &[u32]) -> String {
    p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("-")
}

/// Mean and sample standard deviation over non-diverged rows.
fn aggregate(rows: &[RunOutcome]) -> Option<(EvalMetrics, EvalMetrics, f64, f64, usize)> {
    let ok: Vec<&RunOutcome> = rows.iter().filter(|r| !r.diverged).collect();
    if ok.is_empty() {
        return None;
    }
    let n = ok.len() as f64;
    let mean = |f: &dyn Fn(&RunOutcome) -> f64| ok.iter().map(|r| f(r)).sum::<f64>() / n;
    let std = |f: &dyn Fn(&RunOutcome) -> f64, m: f64| {
        if ok.len() < 2 {
            0.0
        } else {
            (ok.iter().map(|r| (f(r) - m) * (f(r) - m)).sum::<f64>() / (n - 1.0)).sqrt()
        }
    };
    let lm = mean(&|r: &RunOutcome| r.final_loss);
    let fm = mean(&|r: &RunOutcome| r.metrics.wmse_f);
    let gm = mean(&|r: &RunOutcome| r.metrics.wmse_grad);
    let pm = mean(&|r: &RunOutcome| r.metrics.wmse_lap);
    let means = EvalMetrics { wmse_f: fm, wmse_grad: gm, wmse_lap: pm, fd_hessian: false };
    let stds = EvalMetrics {
        wmse_f: std(&|r: &RunOutcome| r.metrics.wmse_f, fm),
        wmse_grad: std(&|r: &RunOutcome| r.metrics.wmse_grad, gm),
        wmse_lap: std(&|r: &RunOutcome| r.metrics.wmse_lap, pm),
        fd_hessian: false,
    };
    Some((means, stds, lm, std(&|r: &RunOutcome| r.final_loss, lm), ok.len()))
}

/// Train one model per (activation order, repeat); emit per-run rows plus
/// mean ± std rows per order. Divergence is recorded per row, never fatal.
pub fn run_actk_sweep(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let digest = cfg.digest();
    let (samples, target) = dataset(cfg)?;
    let targets: Vec<f64> = samples
        .points
        .iter()
        .map(|p| target.value(p))
        .collect::<Result<_>>()?;
    let mut csv = String::from(
        "suite,seed,config,kind,k,pattern,repeat,final_loss,wmse_f,wmse_grad,wmse_lap,diverged\n",
    );
    let mut gates = Vec::new();
    let mut row_idx = 0u64;
    // (k label, pattern) families: uniform orders plus an optional mixed row.
    let mut families: Vec<(Option<usize>, Vec<u32>)> = cfg
        .k_list
        .iter()
        .map(|&k| (Some(k), vec![k as u32; cfg.depth]))
        .collect();
    if let Some(p) = &cfg.activation_pattern {
        families.push((None, p.clone()));
    }
    let mut means: Vec<(Option<usize>, f64, f64)> = Vec::new(); // (k, mean loss, mean wmse_lap)
    for (k, pattern) in &families {
        let mut rows = Vec::new();
        for rep in 0..cfg.repeats {
            let out = run_one(
                cfg,
                pattern,
                cfg.seed.wrapping_add(row_idx),
                &samples,
                &target,
                &targets,
            )?;
            let _ = writeln!(
                csv,
                "{},{},{},row,{},{},{},{},{},{},{},{}",
                cfg.suite.name(),
                cfg.seed,
                digest,
                k.map(|v| v.to_string()).unwrap_or_default(),
                pattern_label(pattern),
                rep,
                fmt_f(out.final_loss),
                fmt_f(out.metrics.wmse_f),
                fmt_f(out.metrics.wmse_grad),
                fmt_f(out.metrics.wmse_lap),
                out.diverged
            );
            rows.push(out);
            row_idx += 1;
        }
        if let Some((m, sd, lm, lsd, used)) = aggregate(&rows) {
            for (kind, loss, met) in [("mean", lm, &m), ("std", lsd, &sd)] {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    cfg.suite.name(),
                    cfg.seed,
                    digest,
                    kind,
                    k.map(|v| v.to_string()).unwrap_or_default(),
                    pattern_label(pattern),
                    used,
                    fmt_f(loss),
                    fmt_f(met.wmse_f),
                    fmt_f(met.wmse_grad),
                    fmt_f(met.wmse_lap),
                    rows.iter().filter(|r| r.diverged).count()
                );
            }
            means.push((*k, lm, m.wmse_lap));
        }
    }
    // Trend gates (the reference comparison): k=4 beats k=1 on the sphere.
    if cfg.manifold == Manifold::Sphere {
        let find = |k: usize| means.iter().find(|(kk, _, _)| *kk == Some(k));
        if let (Some(&(_, l1, p1)), Some(&(_, l4, p4))) = (find(1), find(4)) {
            gate(
                &mut gates,
                "loss_k4_below_k1",
                l4 < l1,
                format!("mean loss k=4 {l4:.3e} vs k=1 {l1:.3e}"),
            );
            gate(
                &mut gates,
                "lap_k4_below_k1",
                p4 < p1,
                format!("mean WMSE_lap k=4 {p4:.3e} vs k=1 {p1:.3e}"),
            );
        }
    }
    Ok(SuiteReport { csv, gates })
}

/// Train per width at fixed activation order; fit log–log slopes of each
/// component MSE against parameter count.
pub fn run_width_sweep(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let digest = cfg.digest();
    let (samples, target) = dataset(cfg)?;
    let targets: Vec<f64> = samples
        .points
        .iter()
        .map(|p| target.value(p))
        .collect::<Result<_>>()?;
    let mut csv = String::from(
        "suite,seed,config,kind,width,param_count,component,repeat,final_loss,wmse_f,wmse_grad,wmse_lap,diverged,slope,intercept,r_squared\n",
    );
    let mut gates = Vec::new();
    let mut row_idx = 0u64;
    let pattern = vec![cfg.act_k; cfg.depth];
    let mut counts = Vec::new();
    let mut mean_f = Vec::new();
    let mut mean_g = Vec::new();
    let mut mean_l = Vec::new();
    for &width in &cfg.width_list {
        let wcfg = ExperimentConfig { width, ..cfg.clone() };
        let mcfg_count = mlp_param_count(&MLPConfig {
            input_dim: 3,
            width,
            depth: cfg.depth,
            activation_pattern: pattern.clone(),
            layer_norm: cfg.layer_norm,
            activation_clamp_max: cfg.clamp,
            weight_clip: cfg.weight_clip,
            sk_rescale: true,
        });
        let mut rows = Vec::new();
        for rep in 0..cfg.repeats {
            let out = run_one(
                &wcfg,
                &pattern,
                cfg.seed.wrapping_add(row_idx),
                &samples,
                &target,
                &targets,
            )?;
            let _ = writeln!(
                csv,
                "{},{},{},row,{},{},,{},{},{},{},{},{},,,",
                cfg.suite.name(),
                cfg.seed,
                digest,
                width,
                mcfg_count,
                rep,
                fmt_f(out.final_loss),
                fmt_f(out.metrics.wmse_f),
                fmt_f(out.metrics.wmse_grad),
                fmt_f(out.metrics.wmse_lap),
                out.diverged
            );
            rows.push(out);
            row_idx += 1;
        }
        if let Some((m, sd, lm, lsd, used)) = aggregate(&rows) {
            for (kind, loss, met) in [("mean", lm, &m), ("std", lsd, &sd)] {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},,{},{},{},{},{},{},,,",
                    cfg.suite.name(),
                    cfg.seed,
                    digest,
                    kind,
                    width,
                    mcfg_count,
                    used,
                    fmt_f(loss),
                    fmt_f(met.wmse_f),
                    fmt_f(met.wmse_grad),
                    fmt_f(met.wmse_lap),
                    rows.iter().filter(|r| r.diverged).count()
                );
            }
            counts.push(mcfg_count as f64);
            mean_f.push(m.wmse_f);
            mean_g.push(m.wmse_grad);
            mean_l.push(m.wmse_lap);
        }
    }
    gate(
        &mut gates,
        "value_mse_decreasing",
        counts.len() == cfg.width_list.len() && mean_f.windows(2).all(|w| w[1] < w[0]),
        format!("means {:?}", mean_f.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>()),
    );
    if counts.len() >= 3 {
        for (comp, ys) in [("wmse_f", &mean_f), ("wmse_grad", &mean_g), ("wmse_lap", &mean_l)] {
            let fit = fit_loglog(&counts, ys)?;
            let _ = writeln!(
                csv,
                "{},{},{},slope,,,{},,,,,,,{},{},{}",
                cfg.suite.name(),
                cfg.seed,
                digest,
                comp,
                fmt_f(fit.slope),
                fmt_f(fit.intercept),
                fmt_f(fit.r_squared)
            );
            if comp == "wmse_f" {
                gate(
                    &mut gates,
                    "value_slope",
                    fit.slope < -0.5,
                    format!("slope {:.3}", fit.slope),
                );
                gate(
                    &mut gates,
                    "value_fit_quality",
                    fit.r_squared >= 0.8,
                    format!("r² {:.3}", fit.r_squared),
                );
            }
        }
    }
    Ok(SuiteReport { csv, gates })
}

/// Dispatch by the config's suite tag.
pub fn run_suite(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    match cfg.suite {
        Suite::Exactness => run_exactness(cfg),
        Suite::RateSweep => run_rate_sweep(cfg),
        Suite::ActkSweep => run_actk_sweep(cfg),
        Suite::WidthSweep => run_width_sweep(cfg),
    }
}
