use splinenet::manifold::{
    fibonacci_grid, sphere_lb, torus_embed, torus_lb_numeric, torus_sample, ManifoldTag,
    TargetFunction, TorusParams,
};
use splinenet::train::{
    adam_step, eval_components, mlp_forward, mlp_grad, mlp_hvp_surface, mlp_init, mlp_loss,
    mlp_param_count, mlp_to_network, mlp_value_input_grad, relu_pow_variance, sk_scale, train,
    AdamState, EvalMetrics, MLPConfig, MLPParams, MLPSurface, SurfaceModel, TrainConfig,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

fn cfg_with(pattern: &[u32], width: usize) -> MLPConfig {
    MLPConfig {
        input_dim: 3,
        width,
        depth: pattern.len(),
        activation_pattern: pattern.to_vec(),
        layer_norm: false,
        activation_clamp_max: None,
        weight_clip: None,
        sk_rescale: false,
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

#[test]
fn relu_power_variances_match_closed_forms_and_monte_carlo() {
    // Hand values: Var(ReLU Z) = 1/2 − 1/(2π); Var(ReLU² Z) = 3/2 − 1/4 = 5/4
    // (E[Z⁴]/2 = 3/2, E[ReLU² Z] = E[Z²]/2 = 1/2).
    let v1 = relu_pow_variance(1).unwrap();
    assert!((v1 - (0.5 - 1.0 / (2.0 * PI))).abs() <= 1e-15);
    let v2 = relu_pow_variance(2).unwrap();
    assert!((v2 - 1.25).abs() <= 1e-14, "Var(ReLU²) = {v2}, want 5/4");

    // Monte Carlo confirmation at 10⁷ draws.
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 10_000_000usize;
    let (mut s1, mut s2) = (0.0f64, 0.0f64);
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        let r = if z > 0.0 { z * z } else { 0.0 };
        s1 += r;
        s2 += r * r;
    }
    let mean = s1 / n as f64;
    let var = s2 / n as f64 - mean * mean;
    assert!((var - 1.25).abs() <= 0.0125, "MC Var(ReLU²) = {var}");

    assert_eq!(sk_scale(1).unwrap(), 1.0);
    let s2k = sk_scale(2).unwrap();
    assert!((s2k - (v1 / v2).sqrt()).abs() <= 1e-15);
    // Var grows quickly with k, so the scales decrease.
    let mut prev = f64::INFINITY;
    for k in 1..=7 {
        let s = sk_scale(k).unwrap();
        assert!(s > 0.0 && s < prev, "s_{k} = {s} not decreasing");
        prev = s;
    }
    assert!(sk_scale(0).is_err());
}

#[test]
fn init_is_seed_deterministic_and_fan_in_scaled() {
    let cfg = MLPConfig::uniform(8, 2, 3);
    let a = mlp_init(&cfg, 7).unwrap();
    let b = mlp_init(&cfg, 7).unwrap();
    let c = mlp_init(&cfg, 8).unwrap();
    assert_eq!(a.flat, b.flat);
    assert_ne!(a.flat, c.flat);
    assert_eq!(a.flat.len(), mlp_param_count(&cfg));

    // Layer-0 weights live in U(−√(6/3), √(6/3)); biases are zero.
    let bound0 = (6.0f64 / 3.0).sqrt();
    assert!(a.flat[..24].iter().all(|w| w.abs() < bound0));
    assert!(a.flat[24..32].iter().all(|&b| b == 0.0));

    // sk_rescale multiplies exactly the weights reading a ReLU^k layer.
    let mut plain = cfg.clone();
    plain.sk_rescale = false;
    let p = mlp_init(&plain, 7).unwrap();
    let s3 = sk_scale(3).unwrap();
    for i in 0..24 {
        assert_eq!(a.flat[i], p.flat[i], "layer-0 weights must not be rescaled");
    }
    for i in 32..(32 + 64) {
        assert!((a.flat[i] - s3 * p.flat[i]).abs() <= 1e-15);
    }

    // Layer-norm parameters start at gain 1, offset 0.
    let mut ln = cfg.clone();
    ln.layer_norm = true;
    let q = mlp_init(&ln, 7).unwrap();
    assert_eq!(mlp_param_count(&ln), mlp_param_count(&cfg) + 2 * 2 * 8);
    // First LN block sits right after layer-0 W and b.
    assert!(q.flat[32..40].iter().all(|&g| g == 1.0));
    assert!(q.flat[40..48].iter().all(|&o| o == 0.0));
}

#[test]
fn config_validation_rejects_malformed_setups() {
    let mut cfg = MLPConfig::uniform(4, 2, 2);
    cfg.activation_pattern = vec![2];
    assert!(mlp_init(&cfg, 0).is_err());
    let mut cfg = MLPConfig::uniform(4, 1, 2);
    cfg.activation_pattern = vec![0];
    assert!(mlp_init(&cfg, 0).is_err());
    let mut cfg = MLPConfig::uniform(4, 1, 2);
    cfg.activation_clamp_max = Some(-1.0);
    assert!(mlp_init(&cfg, 0).is_err());
    let cfg = MLPConfig::uniform(0, 1, 2);
    assert!(mlp_init(&cfg, 0).is_err());
}

#[test]
fn forward_matches_hand_computation() {
    // width 2, depth 1, pattern [2]; flat layout: W(2×3), b(2), out_w(2), out_b.
    let cfg = cfg_with(&[2], 2);
    let flat = vec![
        1.0, 0.0, 0.0, // row 0
        0.0, 1.0, -1.0, // row 1
        0.1, -0.2, // biases
        1.0, 2.0, // out weights
        0.5, // out bias
    ];
    let p = MLPParams { flat: flat.clone() };
    let x = [0.3, 0.4, 0.1];
    // a = (0.4, 0.1) → h = (0.16, 0.01) → 0.5 + 0.16 + 0.02
    let out = mlp_forward(&p, &cfg, &[x]).unwrap()[0];
    assert!((out - 0.68).abs() <= 1e-15);

    // Clamp caps the first unit at 0.1.
    let mut ccfg = cfg.clone();
    ccfg.activation_clamp_max = Some(0.1);
    let out = mlp_forward(&p, &ccfg, &[x]).unwrap()[0];
    assert!((out - 0.62).abs() <= 1e-15);

    // Layer norm (gain 1, offset 0): z = ±0.15/√(0.0225 + ε).
    let mut lcfg = cfg.clone();
    lcfg.layer_norm = true;
    let mut lflat = flat.clone();
    lflat.splice(8..8, [1.0, 1.0, 0.0, 0.0]); // gains then offsets
    let lp = MLPParams { flat: lflat };
    let s = (0.0225f64 + 1e-5).sqrt();
    let want = 0.5 + (0.15 / s) * (0.15 / s);
    let out = mlp_forward(&lp, &lcfg, &[x]).unwrap()[0];
    assert!((out - want).abs() <= 1e-12, "{out} vs {want}");

    // Non-finite parameters abort with the layer named.
    let mut bad = p.clone();
    bad.flat[0] = f64::INFINITY;
    let err = mlp_forward(&bad, &cfg, &[x]).unwrap_err().to_string();
    assert!(err.contains("hidden layer 0"), "{err}");
}

#[test]
fn reverse_mode_gradient_matches_central_differences() {
    let patterns: [&[u32]; 7] = [&[1], &[2], &[3], &[4], &[2, 3], &[1, 1], &[3, 3]];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut draws = 0;
    while draws < 100 {
        let pattern = patterns[draws % patterns.len()];
        let mut cfg = cfg_with(pattern, 4 + draws % 3);
        cfg.layer_norm = draws % 2 == 1;
        if draws % 5 == 0 {
            cfg.activation_clamp_max = Some(3.0);
        }
        let seed = 100 + draws as u64;
        let p = mlp_init(&cfg, seed).unwrap();
        let pts: Vec<[f64; 3]> = (0..5).map(|_| random_unit(&mut rng)).collect();
        let tgt: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let wts: Vec<f64> = (0..5).map(|_| rng.random_range(0.1..2.0)).collect();
        let (loss, grad) = mlp_grad(&p, &cfg, &pts, &tgt, &wts, 1.3).unwrap();
        assert!(loss.is_finite());

        let h = 1e-6;
        for i in (0..p.flat.len()).step_by(3) {
            let mut pp = p.clone();
            pp.flat[i] += h;
            let lp = 1.3 * mlp_loss(&pp, &cfg, &pts, &tgt, &wts).unwrap();
            pp.flat[i] -= 2.0 * h;
            let lm = 1.3 * mlp_loss(&pp, &cfg, &pts, &tgt, &wts).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            assert!(
                (grad[i] - fd).abs() <= 1e-5 * fd.abs().max(1.0),
                "draw {draws} pattern {pattern:?} ln={} param {i}: {} vs fd {fd}",
                cfg.layer_norm,
                grad[i]
            );
        }
        draws += 1;
    }
}

#[test]
fn clamped_units_propagate_zero_gradient() {
    // One unit saturated by the clamp: its incoming weights get no gradient.
    let mut cfg = cfg_with(&[2], 2);
    cfg.activation_clamp_max = Some(0.5);
    let p = MLPParams {
        flat: vec![
            5.0, 0.0, 0.0, // unit 0 saturates at x₀=1 (25 → clamp)
            0.0, 0.1, 0.0, // unit 1 stays linear-range
            0.0, 0.0, 1.0, 1.0, 0.0,
        ],
    };
    let pts = [[1.0, 0.5, 0.0]];
    let (_, grad) = mlp_grad(&p, &cfg, &pts, &[0.0], &[1.0], 1.0).unwrap();
    assert_eq!(grad[0], 0.0);
    assert_eq!(grad[1], 0.0);
    assert_eq!(grad[2], 0.0);
    assert_eq!(grad[6], 0.0); // its bias too
    assert!(grad[4] != 0.0, "unclamped unit must keep its gradient");
    // The clamped unit still contributes its (constant) value to out_w's grad.
    assert!(grad[8] != 0.0);
}

#[test]
fn input_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (i, pattern) in [&[2][..], &[3, 3][..], &[4][..]].iter().enumerate() {
        let mut cfg = cfg_with(pattern, 6);
        cfg.layer_norm = i == 1;
        let p = mlp_init(&cfg, 50 + i as u64).unwrap();
        for _ in 0..20 {
            let x = random_unit(&mut rng);
            let (v, g) = mlp_value_input_grad(&p, &cfg, &x).unwrap();
            assert!((v - mlp_forward(&p, &cfg, &[x]).unwrap()[0]).abs() <= 1e-14);
            let h = 1e-6;
            for j in 0..3 {
                let mut xp = x;
                xp[j] += h;
                let mut xm = x;
                xm[j] -= h;
                let fd = (mlp_forward(&p, &cfg, &[xp]).unwrap()[0]
                    - mlp_forward(&p, &cfg, &[xm]).unwrap()[0])
                    / (2.0 * h);
                assert!((g[j] - fd).abs() <= 1e-6 * fd.abs().max(1.0));
            }
        }
    }
}

#[test]
fn surface_jets_square_network_and_exactness() {
    // u = relu(x₀)² + relu(−x₀)² = x₀²: Hessian diag(2,0,0) via the FD path.
    let cfg = cfg_with(&[2], 2);
    let p = MLPParams {
        flat: vec![1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0],
    };
    let jet = mlp_hvp_surface(&p, &cfg, &[0.6, 0.8, 0.0]).unwrap();
    assert!(jet.fd, "exponent 2 must use the FD fallback");
    assert!((jet.value - 0.36).abs() <= 1e-14);
    assert!((jet.grad[0] - 1.2).abs() <= 1e-12);
    for (i, want) in [2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0].iter().enumerate() {
        assert!((jet.hess[i] - want).abs() <= 1e-6, "H[{i}] = {}", jet.hess[i]);
    }

    // Cubic variant is exact: u = |x₀|³ with grad 3x₀|x₀|, H₀₀ = 6|x₀|.
    let cfg3 = cfg_with(&[3], 2);
    let p3 = MLPParams {
        flat: vec![1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0],
    };
    let jet = mlp_hvp_surface(&p3, &cfg3, &[0.6, 0.8, 0.0]).unwrap();
    assert!(!jet.fd);
    assert!((jet.value - 0.216).abs() <= 1e-15);
    assert!((jet.grad[0] - 1.08).abs() <= 1e-15);
    assert!((jet.hess[0] - 3.6).abs() <= 1e-14);
}

#[test]
fn exact_hessians_match_fd_of_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let cfg = cfg_with(&[3, 4], 6);
    let p = mlp_init(&cfg, 77).unwrap();
    for _ in 0..30 {
        let x = random_unit(&mut rng);
        let jet = mlp_hvp_surface(&p, &cfg, &x).unwrap();
        assert!(!jet.fd);
        // Symmetry.
        for i in 0..3 {
            for j in 0..3 {
                assert!((jet.hess[i * 3 + j] - jet.hess[j * 3 + i]).abs() <= 1e-10);
            }
        }
        // FD of the exact gradient.
        let h = 1e-4;
        for j in 0..3 {
            let mut xp = x;
            xp[j] += h;
            let mut xm = x;
            xm[j] -= h;
            let (_, gp) = mlp_value_input_grad(&p, &cfg, &xp).unwrap();
            let (_, gm) = mlp_value_input_grad(&p, &cfg, &xm).unwrap();
            for i in 0..3 {
                let fd = (gp[i] - gm[i]) / (2.0 * h);
                assert!(
                    (jet.hess[i * 3 + j] - fd).abs() <= 1e-4 * fd.abs().max(1.0),
                    "H[{i}{j}] {} vs {fd}",
                    jet.hess[i * 3 + j]
                );
            }
        }
    }
}

#[test]
fn adam_steps_behave_as_specified() {
    let cfg = cfg_with(&[2], 4);
    let p0 = mlp_init(&cfg, 1).unwrap();

    // Zero gradient: parameters unchanged, step still advances.
    let mut p = p0.clone();
    let mut st = AdamState::new(p.flat.len(), 1e-3);
    let zeros = vec![0.0; p.flat.len()];
    adam_step(&mut st, &mut p, &zeros, &cfg).unwrap();
    assert_eq!(st.step, 1);
    assert_eq!(p.flat, p0.flat);

    // First step with a real gradient moves each coordinate by ≈ −lr·sign(g).
    let mut p = p0.clone();
    let mut st = AdamState::new(p.flat.len(), 1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grad: Vec<f64> = (0..p.flat.len())
        .map(|_| {
            let g: f64 = rng.random_range(0.2..2.0);
            if rng.random_range(0..2) == 0 { g } else { -g }
        })
        .collect();
    adam_step(&mut st, &mut p, &grad, &cfg).unwrap();
    for i in 0..p.flat.len() {
        let delta = p.flat[i] - p0.flat[i];
        assert!((delta + 1e-3 * grad[i].signum()).abs() <= 1e-3 * 1e-6);
    }

    // Weight clip bounds every parameter after the step.
    let mut ccfg = cfg.clone();
    ccfg.weight_clip = Some(0.05);
    let mut p = p0.clone();
    let mut st = AdamState::new(p.flat.len(), 0.5);
    adam_step(&mut st, &mut p, &grad, &ccfg).unwrap();
    assert!(p.flat.iter().all(|w| w.abs() <= 0.05));

    // Length mismatch is rejected.
    let mut st = AdamState::new(3, 1e-3);
    assert!(adam_step(&mut st, &mut p, &grad, &ccfg).is_err());
}

#[test]
fn training_fits_a_constant_target_quickly() {
    // Full-batch Adam at a bold step size: the output bias absorbs the
    // constant and the loss collapses well below 1e−6 inside 500 steps.
    let samples = fibonacci_grid(200).unwrap();
    let targets = vec![0.5; samples.len()];
    let cfg = MLPConfig::uniform(16, 1, 1);
    let tc = TrainConfig { steps: 500, batch: 200, lr: 3e-1, seed: 4 };
    let out = train(&tc, &cfg, &samples, &targets).unwrap();
    assert!(!out.diverged);
    assert!(out.best_loss < 1e-6, "loss {:.3e}", out.best_loss);
    assert!(out.trace.len() >= 2);
    assert_eq!(out.trace[0].0, 0);
}

#[test]
fn training_is_deterministic_and_returns_init_at_zero_steps() {
    let samples = fibonacci_grid(100).unwrap();
    let targets: Vec<f64> = samples.points.iter().map(|p| p[2]).collect();
    let cfg = MLPConfig::uniform(8, 2, 3);
    let tc = TrainConfig { steps: 150, batch: 32, lr: 1e-3, seed: 9 };
    let a = train(&tc, &cfg, &samples, &targets).unwrap();
    let b = train(&tc, &cfg, &samples, &targets).unwrap();
    assert_eq!(a.params.flat, b.params.flat);
    assert_eq!(a.trace, b.trace);

    let tc0 = TrainConfig { steps: 0, ..tc };
    let z = train(&tc0, &cfg, &samples, &targets).unwrap();
    assert_eq!(z.params.flat, mlp_init(&cfg, 9).unwrap().flat);
    assert_eq!(z.trace.len(), 1);
}

#[test]
fn training_flags_divergence_and_aborts() {
    let samples = fibonacci_grid(100).unwrap();
    let targets: Vec<f64> = samples.points.iter().map(|p| p[2]).collect();
    let cfg = MLPConfig::uniform(16, 1, 2);
    let tc = TrainConfig { steps: 2000, batch: 32, lr: 1e8, seed: 1 };
    let out = train(&tc, &cfg, &samples, &targets).unwrap();
    assert!(out.diverged);
    assert!(out.trace.len() < 21, "aborted early, trace has {}", out.trace.len());
    assert!(out.trace.last().unwrap().1 > 1e6);
}

struct ZeroModel;
impl SurfaceModel for ZeroModel {
    fn surface_jet(
        &self,
        _x: &[f64; 3],
        _tag: &ManifoldTag,
    ) -> splinenet::Result<(f64, [f64; 3], f64, bool)> {
        Ok((0.0, [0.0; 3], 0.0, false))
    }
}

#[test]
fn zero_model_metrics_reproduce_spherical_harmonics_identities() {
    // For Y₃₁: ∫Y² = 1, ∫‖∇Y‖² = 12, ∫(ΔY)² = 144.
    let samples = fibonacci_grid(20_000).unwrap();
    let target = TargetFunction::SphereY31;
    let m = eval_components(&ZeroModel, &samples, &target).unwrap();
    assert!((m.wmse_f - 1.0).abs() <= 1e-3, "wmse_f = {}", m.wmse_f);
    assert!(
        (m.wmse_grad - 12.0 * m.wmse_f).abs() <= 0.01 * 12.0 * m.wmse_f,
        "wmse_grad = {}",
        m.wmse_grad
    );
    assert!((m.wmse_lap - 144.0).abs() <= 0.01 * 144.0, "wmse_lap = {}", m.wmse_lap);
    assert!(!m.fd_hessian);
}

#[test]
fn target_injected_as_model_scores_zero() {
    let samples = fibonacci_grid(500).unwrap();
    let target = TargetFunction::SphereY31;
    let m = eval_components(&target, &samples, &target).unwrap();
    assert!(m.wmse_f <= 1e-6 && m.wmse_grad <= 1e-6 && m.wmse_lap <= 1e-6);

    let p = TorusParams::new(1.5, 0.5).unwrap();
    let tt = TargetFunction::TorusFourier { a: 1.0, m: 2, b: 0.5, n: 1, params: p };
    let ts = torus_sample(300, &p, 12).unwrap();
    let m = eval_components(&tt, &ts, &tt).unwrap();
    assert!(m.wmse_f <= 1e-6 && m.wmse_grad <= 1e-6 && m.wmse_lap <= 1e-6);

    // Manifold mismatch is refused.
    assert!(eval_components(&target, &ts, &target).is_err());
    assert!(eval_components(&tt, &samples, &tt).is_err());
    assert!(eval_components(&target, &samples, &tt).is_err());
}

#[test]
fn mlp_surface_jets_agree_with_manifold_operators() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let cfg = cfg_with(&[3, 3], 6);
    let p = mlp_init(&cfg, 99).unwrap();
    let surf = MLPSurface { params: &p, cfg: &cfg };
    let value = |x: &[f64; 3]| mlp_forward(&p, &cfg, &[*x]).unwrap()[0];

    for _ in 0..15 {
        let x = random_unit(&mut rng);
        let (v, tg, lb, fd) = surf.surface_jet(&x, &ManifoldTag::Sphere).unwrap();
        assert!(!fd);
        assert!((v - value(&x)).abs() <= 1e-14);
        // Tangency and agreement with the rotational-difference Laplacian.
        assert!((tg[0] * x[0] + tg[1] * x[1] + tg[2] * x[2]).abs() <= 1e-12);
        let lb_fd = sphere_lb(&value, &x).unwrap();
        assert!((lb - lb_fd).abs() <= 1e-4 * lb_fd.abs().max(1.0), "{lb} vs {lb_fd}");
    }

    // Torus side: chart Laplacian against the double-FD operator.
    let tp = TorusParams::new(1.5, 0.5).unwrap();
    let f_uv = |u: f64, v: f64| value(&torus_embed(u, v, &tp));
    for _ in 0..10 {
        let u = rng.random_range(-PI..PI);
        let v = rng.random_range(-PI..PI);
        let x = torus_embed(u, v, &tp);
        let (mv, tg, lb, fd) = surf.surface_jet(&x, &ManifoldTag::Torus(tp)).unwrap();
        assert!(!fd);
        assert!((mv - value(&x)).abs() <= 1e-14);
        let lb_fd = torus_lb_numeric(&f_uv, u, v, &tp);
        assert!((lb - lb_fd).abs() <= 1e-4 * lb_fd.abs().max(1.0), "{lb} vs {lb_fd}");
        // Tangential gradient is orthogonal to the surface normal.
        let ring = tp.big_r + tp.small_r * v.cos();
        let _ = ring;
        let nrm = [v.cos() * u.cos(), v.cos() * u.sin(), v.sin()];
        assert!((tg[0] * nrm[0] + tg[1] * nrm[1] + tg[2] * nrm[2]).abs() <= 1e-10);
    }
}

#[test]
fn trained_mlp_improves_on_zero_model() {
    // Short sanity run: fitting Y31 beats predicting zero on the value metric.
    let samples = fibonacci_grid(400).unwrap();
    let target = TargetFunction::SphereY31;
    let targets: Vec<f64> = samples.points.iter().map(|p| target.value(p).unwrap()).collect();
    let cfg = MLPConfig::uniform(16, 2, 3);
    let tc = TrainConfig { steps: 600, batch: 128, lr: 3e-3, seed: 11 };
    let out = train(&tc, &cfg, &samples, &targets).unwrap();
    assert!(!out.diverged);
    let zero: EvalMetrics = eval_components(&ZeroModel, &samples, &target).unwrap();
    let m = eval_components(&MLPSurface { params: &out.params, cfg: &cfg }, &samples, &target)
        .unwrap();
    assert!(
        m.wmse_f < 0.5 * zero.wmse_f,
        "trained {:.3e} vs zero {:.3e}",
        m.wmse_f,
        zero.wmse_f
    );
}

#[test]
fn checkpoint_conversion_to_network_is_exact() {
    let cfg = cfg_with(&[2, 3], 5);
    let p = mlp_init(&cfg, 13).unwrap();
    let net = mlp_to_network(&p, &cfg).unwrap();
    assert_eq!(net.input_dim, 3);
    assert_eq!(net.output_dim, 1);
    assert_eq!(net.depth(), 2);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..50 {
        let x = random_unit(&mut rng);
        let a = mlp_forward(&p, &cfg, &[x]).unwrap()[0];
        let b = net.eval1(&x).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
    // Round trip through the text format preserves evaluation.
    let text = net.to_text();
    let back = splinenet::net::Network::from_text(&text).unwrap();
    let x = [0.1, -0.4, 0.2];
    assert_eq!(net.eval1(&x).unwrap().to_bits(), back.eval1(&x).unwrap().to_bits());

    let mut ln = cfg.clone();
    ln.layer_norm = true;
    assert!(mlp_to_network(&mlp_init(&ln, 13).unwrap(), &ln).is_err());
    let mut cl = cfg.clone();
    cl.activation_clamp_max = Some(2.0);
    assert!(mlp_to_network(&p, &cl).is_err());
}
