use splinenet::manifold::{
    fibonacci_grid, project_tangent, recover_angles, sphere_grad, sphere_lb, sphere_lb_ambient,
    torus_embed, torus_lb_closed, torus_lb_from_partials, torus_lb_numeric, torus_sample,
    y31, y31_ambient_grad, ManifoldTag, TargetFunction, TorusParams,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let n = norm3(&v);
        if n > 0.1 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

#[test]
fn fibonacci_points_sit_on_the_sphere_with_equal_weights() {
    let set = fibonacci_grid(1000).unwrap();
    assert_eq!(set.len(), 1000);
    assert_eq!(set.tag, ManifoldTag::Sphere);
    for p in &set.points {
        assert!((norm3(p) - 1.0).abs() <= 1e-12);
    }
    let wsum: f64 = set.weights.iter().sum();
    assert!((wsum - 4.0 * PI).abs() <= 1e-9);
    assert!(set.weights.iter().all(|&w| w == set.weights[0]));

    assert!(fibonacci_grid(9).is_err());
}

#[test]
fn y31_is_odd_normalized_and_validates_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let x = random_unit(&mut rng);
        let neg = [-x[0], -x[1], -x[2]];
        assert!((y31(&x).unwrap() + y31(&neg).unwrap()).abs() <= 1e-14);
    }
    // Quadrature of the mean and the L² norm on a 20k lattice.
    let set = fibonacci_grid(20_000).unwrap();
    let mut mean = 0.0;
    let mut sq = 0.0;
    for (p, w) in set.points.iter().zip(&set.weights) {
        let y = y31(p).unwrap();
        mean += w * y;
        sq += w * y * y;
    }
    assert!(mean.abs() <= 1e-3, "mean {mean:e}");
    assert!((sq - 1.0).abs() <= 1e-3, "L2 {sq}");

    assert!(y31(&[0.5, 0.5, 0.5]).is_err());
    assert!(y31_ambient_grad(&[2.0, 0.0, 0.0]).is_err());
}

#[test]
fn fibonacci_quadrature_error_shrinks_with_count() {
    let err = |count: usize| {
        let set = fibonacci_grid(count).unwrap();
        let mut sq = 0.0;
        for (p, w) in set.points.iter().zip(&set.weights) {
            let y = y31(p).unwrap();
            sq += w * y * y;
        }
        (sq - 1.0).abs()
    };
    let (e3, e4, e5) = (err(1000), err(10_000), err(20_000));
    assert!(e4 < e3, "e(1e4)={e4:e} !< e(1e3)={e3:e}");
    assert!(e5 < e3, "e(2e4)={e5:e} !< e(1e3)={e3:e}");
}

#[test]
fn tangential_gradient_is_tangent_and_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // f = z has ambient gradient e_z and tangential gradient e_z − z·x.
    let gz = |_: &[f64; 3]| [0.0, 0.0, 1.0];
    for _ in 0..100 {
        let x = random_unit(&mut rng);
        let g = sphere_grad(&gz, &x).unwrap();
        let want = [-x[2] * x[0], -x[2] * x[1], 1.0 - x[2] * x[2]];
        for i in 0..3 {
            assert!((g[i] - want[i]).abs() <= 1e-14);
        }
        assert!(dot3(&x, &g).abs() <= 1e-12);

        // Idempotence of the projection.
        let twice = project_tangent(&x, &g);
        for i in 0..3 {
            assert!((twice[i] - g[i]).abs() <= 1e-14);
        }
    }
}

#[test]
fn tangential_gradient_matches_great_circle_differences() {
    // d/dt f(cos t · x + sin t · w)|_{t=0} = ∇_S f · w for unit tangent w.
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let grad_fn = |p: &[f64; 3]| y31_ambient_grad(p).unwrap();
    let h = 1e-5;
    for _ in 0..50 {
        let x = random_unit(&mut rng);
        let raw = random_unit(&mut rng);
        let mut w = project_tangent(&x, &raw);
        let n = norm3(&w);
        if n < 0.1 {
            continue;
        }
        for wi in &mut w {
            *wi /= n;
        }
        let g = sphere_grad(&grad_fn, &x).unwrap();
        let circle = |t: f64| {
            let p = [
                t.cos() * x[0] + t.sin() * w[0],
                t.cos() * x[1] + t.sin() * w[1],
                t.cos() * x[2] + t.sin() * w[2],
            ];
            y31(&p).unwrap()
        };
        let fd = (circle(h) - circle(-h)) / (2.0 * h);
        assert!((fd - dot3(&g, &w)).abs() <= 1e-6, "fd {fd} vs {}", dot3(&g, &w));
    }
}

#[test]
fn sphere_laplacian_annihilates_constants() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let x = random_unit(&mut rng);
        let lb = sphere_lb(&|_: &[f64; 3]| 2.75, &x).unwrap();
        assert!(lb.abs() <= 1e-6, "{lb:e}");
    }
}

#[test]
fn sphere_laplacian_reproduces_harmonic_eigenvalues() {
    // Δ f = −n(n+1) f for degree-n harmonics: z (n=1), xy (n=2), Y31 (n=3).
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let fz = |p: &[f64; 3]| p[2];
    let fxy = |p: &[f64; 3]| p[0] * p[1];
    let fy = |p: &[f64; 3]| y31(p).unwrap();
    for _ in 0..60 {
        let x = random_unit(&mut rng);
        let l1 = sphere_lb(&fz, &x).unwrap();
        assert!((l1 + 2.0 * x[2]).abs() <= 1e-4, "n=1 at {x:?}: {l1}");

        let l2 = sphere_lb(&fxy, &x).unwrap();
        assert!((l2 + 6.0 * x[0] * x[1]).abs() <= 1e-4, "n=2 at {x:?}: {l2}");

        let y = fy(&x);
        if y.abs() > 0.05 {
            let l3 = sphere_lb(&fy, &x).unwrap();
            assert!((l3 + 12.0 * y).abs() <= 1e-3 * y.abs() * 12.0, "n=3 at {x:?}: {l3} vs {}", -12.0 * y);
        }
    }
}

#[test]
fn ambient_jet_laplacian_agrees_with_rotational_differences() {
    // Y31's homogeneous extension: exact jets are polynomial derivatives.
    let c = (21.0 / (32.0 * PI)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..40 {
        let x = random_unit(&mut rng);
        let grad = y31_ambient_grad(&x).unwrap();
        #[rustfmt::skip]
        let hess = [
            0.0,                 0.0, c * 10.0 * x[2],
            0.0,                 0.0, 0.0,
            c * 10.0 * x[2],     0.0, c * 10.0 * x[0],
        ];
        let via_jets = sphere_lb_ambient(&x, &grad, &hess).unwrap();
        let via_fd = sphere_lb(&|p: &[f64; 3]| y31(p).unwrap(), &x).unwrap();
        assert!((via_jets - via_fd).abs() <= 1e-5, "{via_jets} vs {via_fd}");
        assert!((via_jets + 12.0 * y31(&x).unwrap()).abs() <= 1e-10);
    }
}

#[test]
fn torus_embedding_round_trips_and_rejects_off_surface_points() {
    let p = TorusParams::new(1.5, 0.5).unwrap();
    let at = torus_embed(0.0, 0.0, &p);
    assert!((at[0] - 2.0).abs() <= 1e-15 && at[1].abs() <= 1e-15 && at[2].abs() <= 1e-15);

    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..1000 {
        let u = rng.random_range(-PI..PI);
        let v = rng.random_range(-PI..PI);
        let pt = torus_embed(u, v, &p);
        assert!(p.surface_residual(&pt) <= 1e-12);
        let (ur, vr) = recover_angles(&pt, &p).unwrap();
        let back = torus_embed(ur, vr, &p);
        let d = ((back[0] - pt[0]).powi(2) + (back[1] - pt[1]).powi(2)
            + (back[2] - pt[2]).powi(2))
        .sqrt();
        assert!(d <= 1e-10, "round trip drifted {d:e}");
    }

    assert!(recover_angles(&[2.1, 0.0, 0.3], &p).is_err());
    assert!(TorusParams::new(0.5, 1.5).is_err());
    assert!(TorusParams::new(1.0, 0.0).is_err());
}

#[test]
fn torus_sampling_weights_estimate_the_area() {
    let p = TorusParams::new(1.5, 0.5).unwrap();
    let set = torus_sample(20_000, &p, 3).unwrap();
    assert_eq!(set.tag, ManifoldTag::Torus(p));
    assert_eq!(set.seed, Some(3));
    assert!(set.weights.iter().all(|&w| w > 0.0));
    for pt in &set.points {
        assert!(p.surface_residual(pt) <= 1e-10);
    }
    let area = p.area();
    let wsum: f64 = set.weights.iter().sum();
    assert!((wsum - area).abs() <= 0.02 * area, "wsum {wsum} vs area {area}");

    // ∫ cos u dω = 0; the weighted estimate should vanish at the percent level.
    let mut cosu = 0.0;
    for (pt, w) in set.points.iter().zip(&set.weights) {
        let (u, _) = recover_angles(pt, &p).unwrap();
        cosu += w * u.cos();
    }
    assert!(cosu.abs() / area <= 1e-2, "normalized ∫cos u = {:e}", cosu / area);

    assert!(torus_sample(5, &p, 0).is_err());
}

#[test]
fn torus_sampling_is_deterministic_in_the_seed() {
    let p = TorusParams::new(1.5, 0.5).unwrap();
    let a = torus_sample(100, &p, 9).unwrap();
    let b = torus_sample(100, &p, 9).unwrap();
    let c = torus_sample(100, &p, 10).unwrap();
    assert_eq!(a.points, b.points);
    assert_eq!(a.weights, b.weights);
    assert_ne!(a.points, c.points);
}

#[test]
fn closed_form_torus_laplacian_frozen_values() {
    // Hand-derived from Δf = g^{uu} f_uu + g^{vv} f_vv − (sin v)/(r(R+r cos v)) f_v
    // at R=1.5, r=0.5:
    //   f = cos(2u) at u=v=0:  −4/(R+r)² = −4/4 = −1
    //   f = sin(v) at v=π/2:   −sin(π/2)/r² − 0 = −4
    let p = TorusParams::new(1.5, 0.5).unwrap();
    let t1 = TargetFunction::TorusFourier { a: 1.0, m: 2, b: 0.0, n: 0, params: p };
    assert!((torus_lb_closed(&t1, 0.0, 0.0).unwrap() - (-1.0)).abs() <= 1e-14);

    let t2 = TargetFunction::TorusFourier { a: 0.0, m: 0, b: 1.0, n: 1, params: p };
    assert!((torus_lb_closed(&t2, 0.3, PI / 2.0).unwrap() - (-4.0)).abs() <= 1e-14);

    assert!(torus_lb_closed(&TargetFunction::SphereY31, 0.0, 0.0).is_err());
}

#[test]
fn numeric_torus_laplacian_matches_closed_forms() {
    let p = TorusParams::new(1.5, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for m in 0..=4u32 {
        for n in 0..=4u32 {
            let t = TargetFunction::TorusFourier { a: 0.8, m, b: -0.6, n, params: p };
            let f = |u: f64, v: f64| 0.8 * (m as f64 * u).cos() - 0.6 * (n as f64 * v).sin();
            for _ in 0..40 {
                let u = rng.random_range(-PI..PI);
                let v = rng.random_range(-PI..PI);
                let closed = torus_lb_closed(&t, u, v).unwrap();
                let numeric = torus_lb_numeric(&f, u, v, &p);
                assert!(
                    (numeric - closed).abs() <= 1e-5,
                    "m={m} n={n} u={u} v={v}: {numeric} vs {closed}"
                );
            }
        }
    }

    // Constants are annihilated.
    let z = torus_lb_numeric(&|_, _| 1.25, 0.4, -0.9, &p);
    assert!(z.abs() <= 1e-6);
}

#[test]
fn analytic_inner_partials_sharpen_the_numeric_laplacian() {
    let p = TorusParams::new(1.5, 0.5).unwrap();
    let t = TargetFunction::TorusFourier { a: 1.0, m: 3, b: 0.5, n: 2, params: p };
    let fu = |u: f64, _v: f64| -3.0 * (3.0 * u).sin();
    let fv = |_u: f64, v: f64| 0.5 * 2.0 * (2.0 * v).cos();
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for _ in 0..200 {
        let u = rng.random_range(-PI..PI);
        let v = rng.random_range(-PI..PI);
        let closed = torus_lb_closed(&t, u, v).unwrap();
        let numeric = torus_lb_from_partials(&fu, &fv, u, v, &p);
        assert!((numeric - closed).abs() <= 1e-6, "{numeric} vs {closed}");
    }
}

#[test]
fn target_functions_expose_consistent_values_gradients_and_laplacians() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);

    // Sphere target.
    let t = TargetFunction::SphereY31;
    assert_eq!(t.tag(), ManifoldTag::Sphere);
    for _ in 0..30 {
        let x = random_unit(&mut rng);
        let val = t.value(&x).unwrap();
        assert!((val - y31(&x).unwrap()).abs() <= 1e-15);
        assert!((t.lb(&x).unwrap() + 12.0 * val).abs() <= 1e-12);
        let g = t.tangential_grad(&x).unwrap();
        assert!(dot3(&x, &g).abs() <= 1e-12);
        let direct = sphere_grad(&|p: &[f64; 3]| y31_ambient_grad(p).unwrap(), &x).unwrap();
        for i in 0..3 {
            assert!((g[i] - direct[i]).abs() <= 1e-14);
        }
    }

    // Torus target: gradient projected into the chart recovers the partials.
    let p = TorusParams::new(1.5, 0.5).unwrap();
    let t = TargetFunction::TorusFourier { a: 0.7, m: 2, b: 1.1, n: 3, params: p };
    for _ in 0..200 {
        let u = rng.random_range(-PI..PI);
        let v = rng.random_range(-PI..PI);
        let x = torus_embed(u, v, &p);
        let val = t.value(&x).unwrap();
        assert!((val - (0.7 * (2.0 * u).cos() + 1.1 * (3.0 * v).sin())).abs() <= 1e-12);

        let g = t.tangential_grad(&x).unwrap();
        let ring = p.big_r + p.small_r * v.cos();
        let xu = [-ring * u.sin(), ring * u.cos(), 0.0];
        let xv = [
            -p.small_r * v.sin() * u.cos(),
            -p.small_r * v.sin() * u.sin(),
            p.small_r * v.cos(),
        ];
        // ∇f · X_u = f_u and ∇f · X_v = f_v.
        let fu = -0.7 * 2.0 * (2.0 * u).sin();
        let fv = 1.1 * 3.0 * (3.0 * v).cos();
        assert!((dot3(&g, &xu) - fu).abs() <= 1e-10);
        assert!((dot3(&g, &xv) - fv).abs() <= 1e-10);

        // Gradient is tangent: orthogonal to the surface normal X_u × X_v.
        let nrm = [
            xu[1] * xv[2] - xu[2] * xv[1],
            xu[2] * xv[0] - xu[0] * xv[2],
            xu[0] * xv[1] - xu[1] * xv[0],
        ];
        assert!(dot3(&g, &nrm).abs() <= 1e-10);

        let lb = t.lb(&x).unwrap();
        let closed = torus_lb_closed(&t, u, v).unwrap();
        assert!((lb - closed).abs() <= 1e-10);
    }
}

#[test]
fn csv_export_records_provenance_headers() {
    let dir = tempfile::tempdir().unwrap();

    let path = dir.path().join("sphere.csv");
    let set = fibonacci_grid(50).unwrap();
    set.export_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# manifold: sphere");
    assert_eq!(lines[1], "# count: 50");
    assert_eq!(lines[2], "# offset: 0.5");
    assert_eq!(lines[3], "x,y,z,weight");
    assert_eq!(lines.len(), 4 + 50);
    let first: Vec<f64> = lines[4].split(',').map(|t| t.parse().unwrap()).collect();
    assert_eq!(first.len(), 4);
    for i in 0..3 {
        assert!((first[i] - set.points[0][i]).abs() <= 1e-15);
    }
    assert!((first[3] - set.weights[0]).abs() <= 1e-18);

    let p = TorusParams::new(1.5, 0.5).unwrap();
    let tpath = dir.path().join("torus.csv");
    torus_sample(30, &p, 123).unwrap().export_csv(&tpath).unwrap();
    let ttext = std::fs::read_to_string(&tpath).unwrap();
    assert!(ttext.starts_with("# manifold: torus R=1.5 r=0.5\n# count: 30\n# seed: 123\n"));
}
