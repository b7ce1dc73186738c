//! Sphere and torus geometry: weighted quadrature sample sets, analytic
//! target functions (value / tangential gradient / Laplace–Beltrami), and the
//! numeric tangential operators used by the experiment metrics.
//!
//! Sign convention: Δ Y_n = −n(n+1) Y_n on S² (the operator is negative
//! semidefinite).

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Midpoint offset of the Fibonacci lattice in the z direction; recorded in
/// exported sample-set headers so grids are reproducible from the file alone.
pub const FIBONACCI_OFFSET: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusParams {
    pub big_r: f64,
    pub small_r: f64,
}

impl TorusParams {
    pub fn new(big_r: f64, small_r: f64) -> Result<Self> {
        if !(big_r > small_r && small_r > 0.0) {
            return Err(Error::invalid(format!(
                "torus needs R > r > 0, got R={big_r}, r={small_r}"
            )));
        }
        Ok(TorusParams { big_r, small_r })
    }

    pub fn area(&self) -> f64 {
        4.0 * PI * PI * self.big_r * self.small_r
    }

    /// |( √(x²+y²) − R )² + z² − r²| — zero exactly on the surface.
    pub fn surface_residual(&self, p: &[f64; 3]) -> f64 {
        let rho = p[0].hypot(p[1]);
        ((rho - self.big_r).powi(2) + p[2] * p[2] - self.small_r * self.small_r).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ManifoldTag {
    Sphere,
    Torus(TorusParams),
}

#[derive(Debug, Clone)]
pub struct WeightedSampleSet {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub tag: ManifoldTag,
    /// RNG seed for randomly sampled sets; lattice sets record
    /// [`FIBONACCI_OFFSET`] in their export header instead.
    pub seed: Option<u64>,
}

impl WeightedSampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV with provenance headers (`#`-prefixed), then x,y,z,weight rows.
    pub fn export_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut s = String::new();
        match self.tag {
            ManifoldTag::Sphere => s.push_str("# manifold: sphere\n"),
            ManifoldTag::Torus(p) => {
                s.push_str(&format!("# manifold: torus R={} r={}\n", p.big_r, p.small_r))
            }
        }
        s.push_str(&format!("# count: {}\n", self.len()));
        match self.seed {
            Some(seed) => s.push_str(&format!("# seed: {seed}\n")),
            None => s.push_str(&format!("# offset: {FIBONACCI_OFFSET}\n")),
        }
        s.push_str("x,y,z,weight\n");
        for (p, w) in self.points.iter().zip(&self.weights) {
            s.push_str(&format!("{:.16e},{:.16e},{:.16e},{:.16e}\n", p[0], p[1], p[2], w));
        }
        std::fs::write(path, s)?;
        Ok(())
    }
}

/// Golden-angle Fibonacci lattice with equal weights 4π/count.
pub fn fibonacci_grid(count: usize) -> Result<WeightedSampleSet> {
    if count < 10 {
        return Err(Error::invalid(format!("need ≥ 10 points, got {count}")));
    }
    let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
    let ga = 2.0 * PI * (1.0 - 1.0 / golden);
    let w = 4.0 * PI / count as f64;
    let mut points = Vec::with_capacity(count);
    for i in 0..count {
        let z = 1.0 - (2.0 * i as f64 + 2.0 * FIBONACCI_OFFSET) / count as f64;
        let rho = (1.0 - z * z).max(0.0).sqrt();
        let th = ga * i as f64;
        points.push([rho * th.cos(), rho * th.sin(), z]);
    }
    Ok(WeightedSampleSet {
        weights: vec![w; count],
        points,
        tag: ManifoldTag::Sphere,
        seed: None,
    })
}

fn check_unit(x: &[f64; 3]) -> Result<()> {
    let n = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("point has norm {n}, expected 1")));
    }
    Ok(())
}

/// Real orthonormal Y_{3,1} (no Condon–Shortley sign): c·x(5z²−1) with
/// c = √(21/32π), so ∫ Y² dω = 1 and Δ Y = −12 Y.
pub fn y31(x: &[f64; 3]) -> Result<f64> {
    check_unit(x)?;
    let c = (21.0 / (32.0 * PI)).sqrt();
    Ok(c * x[0] * (5.0 * x[2] * x[2] - 1.0))
}

/// Ambient gradient of the degree-3 homogeneous polynomial extending Y_{3,1}.
pub fn y31_ambient_grad(x: &[f64; 3]) -> Result<[f64; 3]> {
    check_unit(x)?;
    let c = (21.0 / (32.0 * PI)).sqrt();
    Ok([
        c * (5.0 * x[2] * x[2] - 1.0),
        0.0,
        c * 10.0 * x[0] * x[2],
    ])
}

/// P_x g = g − (x·g) x.
pub fn project_tangent(x: &[f64; 3], g: &[f64; 3]) -> [f64; 3] {
    let d = x[0] * g[0] + x[1] * g[1] + x[2] * g[2];
    [g[0] - d * x[0], g[1] - d * x[1], g[2] - d * x[2]]
}

/// Tangential gradient from an ambient-gradient callable.
pub fn sphere_grad(
    f_ambient_grad: &dyn Fn(&[f64; 3]) -> [f64; 3],
    x: &[f64; 3],
) -> Result<[f64; 3]> {
    check_unit(x)?;
    Ok(project_tangent(x, &f_ambient_grad(x)))
}

fn rotate_plane(x: &[f64; 3], i: usize, j: usize, h: f64) -> [f64; 3] {
    let (c, s) = (h.cos(), h.sin());
    let mut y = *x;
    y[i] = c * x[i] - s * x[j];
    y[j] = s * x[i] + c * x[j];
    y
}

/// Numeric Laplace–Beltrami on S² via the angular form Δ = Σ_{i<j} D_ij²,
/// each angular second derivative by a central difference with step h=1e−4.
pub fn sphere_lb(f: &dyn Fn(&[f64; 3]) -> f64, x: &[f64; 3]) -> Result<f64> {
    check_unit(x)?;
    let h = 1e-4;
    let f0 = f(x);
    let mut acc = 0.0;
    for (i, j) in [(0usize, 1usize), (0, 2), (1, 2)] {
        let fp = f(&rotate_plane(x, i, j, h));
        let fm = f(&rotate_plane(x, i, j, -h));
        acc += (fp - 2.0 * f0 + fm) / (h * h);
    }
    Ok(acc)
}

/// Laplace–Beltrami of an ambient-extended function from its ambient jets at
/// a sphere point: Δ_S u = Δu − xᵀ(Hess u)x − 2 x·∇u (the radial split of the
/// ambient Laplacian at r = 1).
pub fn sphere_lb_ambient(x: &[f64; 3], grad: &[f64; 3], hess: &[f64; 9]) -> Result<f64> {
    check_unit(x)?;
    let trace = hess[0] + hess[4] + hess[8];
    let mut xhx = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            xhx += x[i] * hess[i * 3 + j] * x[j];
        }
    }
    let xg = x[0] * grad[0] + x[1] * grad[1] + x[2] * grad[2];
    Ok(trace - xhx - 2.0 * xg)
}

// ---- torus --------------------------------------------------------------------

pub fn torus_embed(u: f64, v: f64, p: &TorusParams) -> [f64; 3] {
    let ring = p.big_r + p.small_r * v.cos();
    [ring * u.cos(), ring * u.sin(), p.small_r * v.sin()]
}

/// Angle chart inverse; rejects points farther than 1e−8 from the surface.
pub fn recover_angles(pt: &[f64; 3], p: &TorusParams) -> Result<(f64, f64)> {
    let u = pt[1].atan2(pt[0]);
    let rho = pt[0].hypot(pt[1]);
    let v = pt[2].atan2(rho - p.big_r);
    let back = torus_embed(u, v, p);
    let res = ((back[0] - pt[0]).powi(2) + (back[1] - pt[1]).powi(2) + (back[2] - pt[2]).powi(2))
        .sqrt();
    if res > 1e-8 {
        return Err(Error::invalid(format!(
            "point is {res:.2e} off the torus surface"
        )));
    }
    Ok((u, v))
}

/// Uniform angles with Jacobian weights (2π)²·r(R + r cos v)/count, so the
/// weight sum is a Monte Carlo estimate of the area 4π²Rr.
pub fn torus_sample(count: usize, p: &TorusParams, seed: u64) -> Result<WeightedSampleSet> {
    if count < 10 {
        return Err(Error::invalid(format!("need ≥ 10 points, got {count}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    let scale = 4.0 * PI * PI / count as f64;
    for _ in 0..count {
        let u = rng.random_range(0.0..2.0 * PI);
        let v = rng.random_range(0.0..2.0 * PI);
        points.push(torus_embed(u, v, p));
        weights.push(scale * p.small_r * (p.big_r + p.small_r * v.cos()));
    }
    Ok(WeightedSampleSet {
        points,
        weights,
        tag: ManifoldTag::Torus(*p),
        seed: Some(seed),
    })
}

/// Inner first-partial step. The outer step is larger: stacking both
/// differences at 1e−5 would divide the inner roundoff (~eps/h) by the outer
/// step and lose the 1e−5 agreement with the closed forms.
const TORUS_INNER_H: f64 = 1e-5;
const TORUS_OUTER_H: f64 = 1e-4;

/// Divergence-form Laplace–Beltrami on the torus from analytic first partials:
/// (1/√g)[∂_u(√g g^{uu} f_u) + ∂_v(√g g^{vv} f_v)] with the outer derivatives
/// by central differences, g^{uu}=(R+r cos v)^{−2}, g^{vv}=r^{−2},
/// √g = r(R+r cos v).
pub fn torus_lb_from_partials(
    f_u: &dyn Fn(f64, f64) -> f64,
    f_v: &dyn Fn(f64, f64) -> f64,
    u: f64,
    v: f64,
    p: &TorusParams,
) -> f64 {
    let h = TORUS_OUTER_H;
    let ring = |v: f64| p.big_r + p.small_r * v.cos();
    let flux_u = |uu: f64, vv: f64| p.small_r / ring(vv) * f_u(uu, vv);
    let flux_v = |uu: f64, vv: f64| ring(vv) / p.small_r * f_v(uu, vv);
    let div = (flux_u(u + h, v) - flux_u(u - h, v)) / (2.0 * h)
        + (flux_v(u, v + h) - flux_v(u, v - h)) / (2.0 * h);
    div / (p.small_r * ring(v))
}

/// As [`torus_lb_from_partials`] with the inner partials also taken by
/// central differences of f (h=1e−5).
pub fn torus_lb_numeric(f: &dyn Fn(f64, f64) -> f64, u: f64, v: f64, p: &TorusParams) -> f64 {
    let h = TORUS_INNER_H;
    let fu = |uu: f64, vv: f64| (f(uu + h, vv) - f(uu - h, vv)) / (2.0 * h);
    let fv = |uu: f64, vv: f64| (f(uu, vv + h) - f(uu, vv - h)) / (2.0 * h);
    torus_lb_from_partials(&fu, &fv, u, v, p)
}

// ---- targets ------------------------------------------------------------------

/// Analytic targets: value, tangential gradient, and exact Laplace–Beltrami
/// image on their manifold.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetFunction {
    SphereY31,
    TorusFourier {
        a: f64,
        m: u32,
        b: f64,
        n: u32,
        params: TorusParams,
    },
}

impl TargetFunction {
    pub fn tag(&self) -> ManifoldTag {
        match self {
            TargetFunction::SphereY31 => ManifoldTag::Sphere,
            TargetFunction::TorusFourier { params, .. } => ManifoldTag::Torus(*params),
        }
    }

    pub fn value(&self, x: &[f64; 3]) -> Result<f64> {
        match self {
            TargetFunction::SphereY31 => y31(x),
            TargetFunction::TorusFourier { a, m, b, n, params } => {
                let (u, v) = recover_angles(x, params)?;
                Ok(a * (*m as f64 * u).cos() + b * (*n as f64 * v).sin())
            }
        }
    }

    /// df/du, df/dv in the angle chart (torus variants).
    fn angle_partials(&self, u: f64, v: f64) -> Result<(f64, f64)> {
        match self {
            TargetFunction::TorusFourier { a, m, b, n, .. } => {
                let (mf, nf) = (*m as f64, *n as f64);
                Ok((-a * mf * (mf * u).sin(), b * nf * (nf * v).cos()))
            }
            TargetFunction::SphereY31 => Err(Error::invalid("sphere target has no angle chart")),
        }
    }

    pub fn tangential_grad(&self, x: &[f64; 3]) -> Result<[f64; 3]> {
        match self {
            TargetFunction::SphereY31 => sphere_grad(
                &|p: &[f64; 3]| y31_ambient_grad(p).expect("unit point"),
                x,
            ),
            TargetFunction::TorusFourier { params, .. } => {
                let (u, v) = recover_angles(x, params)?;
                let (fu, fv) = self.angle_partials(u, v)?;
                let ring = params.big_r + params.small_r * v.cos();
                // ∇f = g^{uu} f_u X_u + g^{vv} f_v X_v (X_u ⊥ X_v).
                let xu = [-ring * u.sin(), ring * u.cos(), 0.0];
                let xv = [
                    -params.small_r * v.sin() * u.cos(),
                    -params.small_r * v.sin() * u.sin(),
                    params.small_r * v.cos(),
                ];
                let cu = fu / (ring * ring);
                let cv = fv / (params.small_r * params.small_r);
                Ok([
                    cu * xu[0] + cv * xv[0],
                    cu * xu[1] + cv * xv[1],
                    cu * xu[2] + cv * xv[2],
                ])
            }
        }
    }

    pub fn lb(&self, x: &[f64; 3]) -> Result<f64> {
        match self {
            TargetFunction::SphereY31 => Ok(-12.0 * y31(x)?),
            TargetFunction::TorusFourier { params, .. } => {
                let (u, v) = recover_angles(x, params)?;
                torus_lb_closed(self, u, v)
            }
        }
    }
}

/// Closed-form torus Laplace–Beltrami of A cos(mu) + B sin(nv):
/// −m²A cos(mu)/(R+r cos v)² + (Bn/(r²(R+r cos v)))·[−r sin v cos(nv) − n(R+r cos v) sin(nv)].
pub fn torus_lb_closed(t: &TargetFunction, u: f64, v: f64) -> Result<f64> {
    let TargetFunction::TorusFourier { a, m, b, n, params } = t else {
        return Err(Error::invalid("closed-form torus LB needs a torus target"));
    };
    let (mf, nf) = (*m as f64, *n as f64);
    let ring = params.big_r + params.small_r * v.cos();
    let r = params.small_r;
    let cos_part = -mf * mf * a * (mf * u).cos() / (ring * ring);
    let sin_part = (b * nf / (r * r * ring))
        * (-r * v.sin() * (nf * v).cos() - nf * ring * (nf * v).sin());
    Ok(cos_part + sin_part)
}
