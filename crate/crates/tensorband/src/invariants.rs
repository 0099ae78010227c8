//! Topological invariants over explicit integration meshes, with
//! a-posteriori error estimates from mesh halving.
//!
//! Quadrature follows the integrands' smoothness: spectrally accurate
//! shifted trapezoid rules on periodic angles, Gauss-Legendre on radial and
//! polar axes. Mesh points are evaluated in parallel; reductions run in
//! fixed index order, so results are deterministic regardless of scheduling.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{self, M3};
use crate::model::{HyperPoint, ModelSpec, Momentum4, V4};
use crate::scalar::Real;
use crate::spectral::Band;

/// Gauss-Legendre nodes and weights on [a, b].
pub fn gauss_legendre<T: Real>(n: usize, a: T, b: T) -> (Vec<T>, Vec<T>) {
    assert!(n >= 2);
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = T::of(n as f64);
    for i in 0..n {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (T::pi() * (T::of(i as f64) + T::of(0.75)) / (nf + T::of(0.5))).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < T::of(1e-15) {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = T::of(2.0) / ((T::one() - x * x) * dp * dp);
        // Map [-1, 1] -> [a, b]; reverse so nodes come out ascending.
        let half = (b - a) * T::of(0.5);
        nodes[n - 1 - i] = a + half * (x + T::one());
        weights[n - 1 - i] = w * half;
    }
    (nodes, weights)
}

fn legendre_with_derivative<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 2..=n {
        let kf = T::of(k as f64);
        let p2 = ((T::of(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = T::of(n as f64);
    let dp = nf * (x * p1 - p0) / (x * x - T::one());
    (p1, dp)
}

/// Midpoint-shifted trapezoid rule on a periodic interval [a, b).
pub fn periodic_trapezoid<T: Real>(n: usize, a: T, b: T) -> (Vec<T>, Vec<T>) {
    assert!(n >= 2);
    let h = (b - a) / T::of(n as f64);
    let nodes = (0..n)
        .map(|j| a + h * (T::of(j as f64) + T::of(0.5)))
        .collect();
    let weights = vec![h; n];
    (nodes, weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshKind {
    Hypersphere3,
    Plane2,
    Sphere2,
    HalfSphere2,
    PolarDisk,
}

#[derive(Debug, Clone)]
pub struct MeshAxis<T> {
    pub label: &'static str,
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

/// Tensor-product integration mesh over up to three parameter axes.
#[derive(Debug, Clone)]
pub struct SurfaceMesh<T> {
    pub kind: MeshKind,
    pub axes: Vec<MeshAxis<T>>,
    /// +1 or -1; flips the oriented measure (and thus every signed
    /// invariant) exactly.
    pub orientation: T,
}

impl<T: Real> SurfaceMesh<T> {
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.nodes.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn resolutions(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.nodes.len()).collect()
    }

    /// Coordinates and quadrature weight of the flat index `i` (row-major).
    pub fn point(&self, i: usize) -> (Vec<T>, T) {
        let mut idx = i;
        let mut coords = vec![T::zero(); self.axes.len()];
        let mut weight = self.orientation;
        for (d, axis) in self.axes.iter().enumerate().rev() {
            let n = axis.nodes.len();
            let j = idx % n;
            idx /= n;
            coords[d] = axis.nodes[j];
            weight *= axis.weights[j];
        }
        (coords, weight)
    }

    pub fn describe(&self) -> String {
        let res: Vec<String> = self
            .axes
            .iter()
            .map(|a| format!("{}:{}", a.label, a.nodes.len()))
            .collect();
        format!("{:?}[{}]", self.kind, res.join(" x "))
    }
}

/// One invariant evaluation with its a-posteriori error estimate
/// |value(N) - value(N/2)|.
#[derive(Debug, Clone)]
pub struct InvariantReport {
    pub name: String,
    pub value: f64,
    pub band: i8,
    pub mesh: String,
    pub error_estimate: f64,
    pub wall_time_ms: f64,
}

impl InvariantReport {
    /// Fail with MeshTooCoarse when the halving estimate exceeds `tol`.
    pub fn require_converged(self, tol: f64) -> Result<Self> {
        if self.error_estimate > tol {
            return Err(Error::MeshTooCoarse { estimate: self.error_estimate, tolerance: tol });
        }
        Ok(self)
    }
}

/// Integrate `integrand(coords)` over the mesh: parallel evaluation,
/// deterministic index-order reduction.
pub fn integrate<T: Real, F>(mesh: &SurfaceMesh<T>, integrand: F) -> Result<T>
where
    F: Fn(&[T]) -> Result<T> + Sync,
{
    let values: Vec<T> = (0..mesh.len())
        .into_par_iter()
        .map(|i| {
            let (coords, w) = mesh.point(i);
            integrand(&coords).map(|v| v * w)
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(values.into_iter().sum())
}

fn halved_len(n: usize) -> usize {
    (n / 2).max(4)
}

/// Run the integral at full and half resolution and package the report.
fn integrate_with_estimate<T: Real, F, M>(
    name: &str,
    band: Band,
    build: M,
    resolutions: &[usize],
    integrand: F,
) -> Result<InvariantReport>
where
    F: Fn(&[T]) -> Result<T> + Sync,
    M: Fn(&[usize]) -> SurfaceMesh<T>,
{
    let start = Instant::now();
    let mesh = build(resolutions);
    let full = integrate(&mesh, &integrand)?;
    let halved: Vec<usize> = resolutions.iter().map(|&n| halved_len(n)).collect();
    let coarse = integrate(&build(&halved), &integrand)?;
    Ok(InvariantReport {
        name: name.to_string(),
        value: full.to_f(),
        band: band.index(),
        mesh: mesh.describe(),
        error_estimate: (full - coarse).abs().to_f(),
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Outward unit normal of the hypersphere parametrization at
/// (gamma, theta, phi): the momentum map with omega = 1, lambda = 0.
fn hypersphere_normal<T: Real>(gamma: T, theta: T, phi: T) -> V4<T> {
    HyperPoint::new(T::one(), gamma, theta, phi, T::zero())
        .to_momentum()
        .vector()
}

fn hypersphere_mesh<T: Real>(res: &[usize], flip: bool) -> SurfaceMesh<T> {
    let (gn, gw) = gauss_legendre(res[0], T::zero(), T::frac_pi_2());
    let (tn, tw) = periodic_trapezoid(res[1], T::zero(), T::two_pi());
    let (pn, pw) = periodic_trapezoid(res[2], T::zero(), T::two_pi());
    SurfaceMesh {
        kind: MeshKind::Hypersphere3,
        axes: vec![
            MeshAxis { label: "gamma", nodes: gn, weights: gw },
            MeshAxis { label: "theta", nodes: tn, weights: tw },
            MeshAxis { label: "phi", nodes: pn, weights: pw },
        ],
        orientation: if flip { -T::one() } else { T::one() },
    }
}

/// Check every mesh point is gapped; the margin guards the geometry
/// evaluations behind it.
fn require_gapped<T: Real>(
    spec: &ModelSpec<T>,
    points: impl Iterator<Item = Momentum4<T>>,
    margin: T,
) -> Result<()> {
    let mut min_gap = T::of(f64::INFINITY);
    for k in points {
        let gap = spec.closed_form_gap(&k);
        if gap < min_gap {
            min_gap = gap;
        }
    }
    if min_gap < margin {
        return Err(Error::DegeneracyCollision { gap: min_gap.to_f(), threshold: margin.to_f() });
    }
    Ok(())
}

/// Tensor monopole charge by integrating the 3-form source through an
/// enclosing 3-sphere: Q_T = (1/2 pi^2) * flux of H.
pub fn qt_cartesian<T: Real>(
    spec: &ModelSpec<T>,
    radius: T,
    center: &Momentum4<T>,
    band: Band,
    res: [usize; 3],
    flip: bool,
) -> Result<InvariantReport> {
    let c = center.vector();
    let point_at = move |coords: &[T]| -> Momentum4<T> {
        let n = hypersphere_normal(coords[0], coords[1], coords[2]);
        Momentum4::from_vector(c + n * radius)
    };
    {
        let probe = hypersphere_mesh::<T>(&res.map(halved_len), false);
        require_gapped(
            spec,
            (0..probe.len()).map(|i| point_at(&probe.point(i).0)),
            T::of(1e-4) * radius.max(T::one()),
        )?;
    }
    let r3 = radius * radius * radius;
    let norm = T::one() / (T::two_pi() * T::pi());
    let integrand = move |coords: &[T]| -> Result<T> {
        let k = point_at(coords);
        let n_hat = hypersphere_normal(coords[0], coords[1], coords[2]);
        let tf = geometry::tensor_three_form(spec, &k, band)?;
        let jac = coords[0].sin() * coords[0].cos() * r3;
        Ok(tf.source.dot(&n_hat) * jac * norm)
    };
    integrate_with_estimate("qt", band, |r| hypersphere_mesh(r, flip), &res, integrand)
}

fn metric_mesh<T: Real>(res: &[usize], flip: bool) -> SurfaceMesh<T> {
    let (gn, gw) = gauss_legendre(res[0], T::zero(), T::frac_pi_2());
    let (pn, pw) = periodic_trapezoid(res[1], T::zero(), T::two_pi());
    SurfaceMesh {
        kind: MeshKind::Hypersphere3,
        axes: vec![
            MeshAxis { label: "gamma", nodes: gn, weights: gw },
            MeshAxis { label: "phi", nodes: pn, weights: pw },
        ],
        orientation: if flip { -T::one() } else { T::one() },
    }
}

/// Fixed theta slice used once rotational symmetry has been certified.
const METRIC_ROUTE_THETA: f64 = 0.9;

/// Orientation of the hypersphere relative to the band's degree map: the
/// sign of det[z | dk/d(gamma, theta, phi)] with z the metric zero-mode
/// direction. Restores the flux sign that the determinant magnitude loses.
fn metric_orientation_sign<T: Real>(spec: &ModelSpec<T>, p: &HyperPoint<T>) -> T {
    let k = p.to_momentum();
    let z = spec.degree_orientation_vector(&k);
    let jac = p.angular_jacobian();
    let mut m = nalgebra::SMatrix::<T, 4, 4>::zeros();
    m.set_column(0, &z);
    for c in 0..3 {
        m.set_column(c + 1, &jac.column(c).clone_owned());
    }
    if m.determinant() >= T::zero() {
        T::one()
    } else {
        -T::one()
    }
}

/// Monopole charge from the trace metric on a hypersphere of radius `omega`
/// centered at offset `lambda`:
/// Q_T = (1/pi) int dgamma dphi sgn * sqrt(2 det G).
///
/// `metric` supplies the 3x3 trace metric over (gamma, theta, phi); the
/// direct route uses the geometry module, the ramp protocol substitutes its
/// extracted estimates.
pub fn qt_metric_route_with<T: Real, F>(
    spec: &ModelSpec<T>,
    omega: T,
    lambda: T,
    band: Band,
    res: [usize; 2],
    flip: bool,
    metric: F,
) -> Result<InvariantReport>
where
    F: Fn(&HyperPoint<T>) -> Result<M3<T>> + Sync,
{
    let theta0 = T::of(METRIC_ROUTE_THETA);
    let integrand_at = |p: &HyperPoint<T>| -> Result<T> {
        let g = metric(p)?;
        let det = g.determinant();
        let s = metric_orientation_sign(spec, p);
        Ok(s * (T::of(2.0) * det.max(T::zero())).sqrt())
    };
    // Rotational-symmetry certificate: the integrand must not depend on
    // theta (checked on probe points before collapsing that axis).
    for (g, ph) in [(0.4, 0.7), (0.9, 2.9), (1.3, 4.4)] {
        let base = integrand_at(&HyperPoint::new(omega, T::of(g), theta0, T::of(ph), lambda))?;
        let mut worst = T::zero();
        for th in [1.7, 3.1, 5.2] {
            let v = integrand_at(&HyperPoint::new(omega, T::of(g), T::of(th), T::of(ph), lambda))?;
            worst = worst.max((v - base).abs());
        }
        if worst > T::of(1e-6) * base.abs().max(T::one()) {
            return Err(Error::NonRotationalSymmetry { variation: worst.to_f() });
        }
    }
    let norm = T::one() / T::pi();
    integrate_with_estimate(
        "qt-metric",
        band,
        |r| metric_mesh(r, flip),
        &res,
        move |coords: &[T]| -> Result<T> {
            let p = HyperPoint::new(omega, coords[0], theta0, coords[1], lambda);
            Ok(integrand_at(&p)? * norm)
        },
    )
}

/// Direct-geometry version of the metric route.
pub fn qt_metric_route<T: Real>(
    spec: &ModelSpec<T>,
    omega: T,
    lambda: T,
    band: Band,
    res: [usize; 2],
    flip: bool,
) -> Result<InvariantReport> {
    qt_metric_route_with(spec, omega, lambda, band, res, flip, |p| {
        geometry::angular_trace_metric(spec, p, band)
    })
}

/// A 2-plane spanned by (kx, ky) at fixed (kz, kw).
#[derive(Debug, Clone, Copy)]
pub struct PlaneAt<T> {
    pub kz: T,
    pub kw: T,
}

impl<T: Real> PlaneAt<T> {
    /// Canonical plane at transverse radius `kpar`: (kz, kw) = (0, kpar).
    pub fn at_kpar(kpar: T) -> Self {
        PlaneAt { kz: T::zero(), kw: kpar }
    }

    pub fn kpar(&self) -> T {
        (self.kz * self.kz + self.kw * self.kw).sqrt()
    }

    fn momentum(&self, kx: T, ky: T) -> Momentum4<T> {
        Momentum4::new(kx, ky, self.kz, self.kw)
    }
}

fn polar_disk_mesh<T: Real>(
    res: &[usize],
    radius: T,
    kind: MeshKind,
    flip: bool,
) -> SurfaceMesh<T> {
    let (rn, rw) = gauss_legendre(res[0], T::zero(), radius);
    let (tn, tw) = periodic_trapezoid(res[1], T::zero(), T::two_pi());
    SurfaceMesh {
        kind,
        axes: vec![
            MeshAxis { label: "r", nodes: rn, weights: rw },
            MeshAxis { label: "theta", nodes: tn, weights: tw },
        ],
        orientation: if flip { -T::one() } else { T::one() },
    }
}

/// Algebraic-decay tail beyond the finite disk: fit |mean_theta f|(r) to
/// c r^-p on the outer 20% of the radius and integrate analytically.
/// Returns (tail, tail uncertainty).
fn plane_tail<T: Real>(radial_nodes: &[T], mean_f: &[T], radius: T) -> Result<(T, T)> {
    let cutoff = T::of(0.8) * radius;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut sign_acc = T::zero();
    let floor = T::of(1e-13);
    for (r, f) in radial_nodes.iter().zip(mean_f) {
        if *r >= cutoff && f.abs() > floor {
            xs.push(r.ln());
            ys.push(f.abs().ln());
            sign_acc += *f;
        }
    }
    if xs.len() < 3 {
        // Tail already at numerical zero.
        return Ok((T::zero(), T::zero()));
    }
    let n = T::of(xs.len() as f64);
    let sx: T = xs.iter().copied().sum();
    let sy: T = ys.iter().copied().sum();
    let sxx: T = xs.iter().map(|x| *x * *x).sum();
    let sxy: T = xs.iter().zip(&ys).map(|(x, y)| *x * *y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let p = -slope;
    if p <= T::of(2.2) {
        return Err(Error::TailTooFat { tail: f64::INFINITY, limit: 0.05 });
    }
    let c = intercept.exp();
    let sign = if sign_acc >= T::zero() { T::one() } else { -T::one() };
    // (1/2pi) * 2pi * int_R^inf c r^{1-p} dr
    let tail = sign * c * radius.powf(T::of(2.0) - p) / (p - T::of(2.0));
    let mut resid = T::zero();
    for (x, y) in xs.iter().zip(&ys) {
        resid = resid.max((*y - (intercept + slope * *x)).abs());
    }
    Ok((tail, tail.abs() * resid))
}

fn euler_disk_integral<T: Real, F>(
    name: &str,
    band: Band,
    kind: MeshKind,
    radius: T,
    res: [usize; 2],
    flip: bool,
    // f(r, theta) -> (weighted curvature density already including the
    // Jacobian, plane-equivalent curvature f_xy for the tail fit)
    density: F,
) -> Result<InvariantReport>
where
    F: Fn(T, T) -> Result<(T, T)> + Sync,
{
    let start = Instant::now();
    let norm = T::one() / T::two_pi();
    let run = |r: &[usize]| -> Result<(T, Vec<T>, Vec<T>)> {
        let mesh = polar_disk_mesh(r, radius, kind, flip);
        let n_theta = mesh.axes[1].nodes.len();
        let values: Vec<(T, T)> = (0..mesh.len())
            .into_par_iter()
            .map(|i| {
                let (coords, w) = mesh.point(i);
                let (d, f_plane) = density(coords[0], coords[1])?;
                Ok((d * w * norm, f_plane))
            })
            .collect::<Result<Vec<_>>>()?;
        let total: T = values.iter().map(|(v, _)| *v).sum();
        // Angular mean of the planar curvature per radial node.
        let mut mean = vec![T::zero(); mesh.axes[0].nodes.len()];
        for (i, (_, f)) in values.iter().enumerate() {
            mean[i / n_theta] += *f;
        }
        let inv = T::one() / T::of(n_theta as f64);
        for m in &mut mean {
            *m *= inv;
        }
        Ok((total, mesh.axes[0].nodes.clone(), mean))
    };
    let (full, nodes, mean) = run(&res)?;
    let (coarse, _, _) = run(&res.map(halved_len))?;
    let (tail, tail_resid) = plane_tail(&nodes, &mean, radius)?;
    if tail.abs() > T::of(0.05) {
        return Err(Error::TailTooFat { tail: tail.to_f().abs(), limit: 0.05 });
    }
    let orient = if flip { -T::one() } else { T::one() };
    Ok(InvariantReport {
        name: name.to_string(),
        value: (full + tail * orient).to_f(),
        band: band.index(),
        mesh: format!(
            "{:?}[r:{} x theta:{}; extent {:.3}]",
            kind,
            res[0],
            res[1],
            radius.to_f()
        ),
        error_estimate: (full - coarse).abs().to_f() + tail_resid.to_f(),
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn unit_axis<T: Real>(mu: usize) -> V4<T> {
    let mut t = V4::zeros();
    t[mu] = T::one();
    t
}

fn require_plane_off_ring<T: Real>(spec: &ModelSpec<T>, kpar: T) -> Result<()> {
    let d = spec.delta.abs();
    if d > T::zero() && (kpar - d).abs() < T::of(1e-3) * d.max(T::one()) {
        // The plane passes through the nodal ring.
        return Err(Error::DegeneracyCollision {
            gap: (kpar - d).abs().to_f(),
            threshold: 1e-3,
        });
    }
    Ok(())
}

/// First Euler number of a gapped 2-plane: chi_1 = (1/2pi) int f_xy dkx dky
/// with an algebraic tail extrapolation beyond the finite extent.
pub fn euler_plane<T: Real>(
    spec: &ModelSpec<T>,
    plane: PlaneAt<T>,
    extent: T,
    band: Band,
    res: [usize; 2],
    flip: bool,
) -> Result<InvariantReport> {
    require_plane_off_ring(spec, plane.kpar())?;
    let ex = unit_axis(0);
    let ey = unit_axis(1);
    euler_disk_integral(
        "euler-plane",
        band,
        MeshKind::Plane2,
        extent,
        res,
        flip,
        move |r, th| {
            let k = plane.momentum(r * th.cos(), r * th.sin());
            let f = geometry::curvature_directional(spec, &k, band, &ex, &ey)?;
            Ok((f * r, f))
        },
    )
}

/// Euler number in the generalized polar parametrization of the plane,
/// (kx, ky) = r (-sin theta, cos theta):
/// chi_1 = (1/2pi) int f_{r theta} dr dtheta.
pub fn euler_polar_route<T: Real>(
    spec: &ModelSpec<T>,
    kpar: T,
    omega_max: T,
    band: Band,
    res: [usize; 2],
    flip: bool,
) -> Result<InvariantReport> {
    require_plane_off_ring(spec, kpar)?;
    let plane = PlaneAt::at_kpar(kpar);
    euler_disk_integral(
        "euler-polar",
        band,
        MeshKind::PolarDisk,
        omega_max,
        res,
        flip,
        move |r, th| {
            let k = plane.momentum(-r * th.sin(), r * th.cos());
            let t_r = V4::new(-th.sin(), th.cos(), T::zero(), T::zero());
            let t_th = V4::new(-r * th.cos(), -r * th.sin(), T::zero(), T::zero());
            let f_polar = geometry::curvature_directional(spec, &k, band, &t_r, &t_th)?;
            Ok((f_polar, f_polar / r))
        },
    )
}

/// Nodal-ring invariant: the jump of the planar Euler number across the
/// ring, evaluated just outside (kpar = 2 delta) minus just inside
/// (kpar = delta / 2).
pub fn nodal_ring_invariant<T: Real>(
    spec: &ModelSpec<T>,
    band: Band,
    extent_scale: T,
    res: [usize; 2],
) -> Result<InvariantReport> {
    assert!(spec.delta != T::zero(), "nodal ring requires delta != 0");
    let start = Instant::now();
    let d = spec.delta.abs();
    let inside = euler_plane(
        spec,
        PlaneAt::at_kpar(d * T::of(0.5)),
        extent_scale * d,
        band,
        res,
        false,
    )?;
    let outside = euler_plane(
        spec,
        PlaneAt::at_kpar(d * T::of(2.0)),
        extent_scale * d,
        band,
        res,
        false,
    )?;
    Ok(InvariantReport {
        name: "nodal-ring".to_string(),
        value: outside.value - inside.value,
        band: band.index(),
        mesh: format!("{} | {}", inside.mesh, outside.mesh),
        error_estimate: inside.error_estimate + outside.error_estimate,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hemisphere {
    Full,
    KzPositive,
    KzNegative,
}

/// Euler-curvature flux through a sphere (or hemisphere) in the 3D reduced
/// model: (1/2pi) of the flux of the curvature vector
/// F_E = (f_yz, f_zx, f_xy).
pub fn dipole_sphere<T: Real>(
    spec: &ModelSpec<T>,
    center: [T; 3],
    radius: T,
    band: Band,
    hemisphere: Hemisphere,
    res: [usize; 2],
    flip: bool,
) -> Result<InvariantReport> {
    let (lo, hi) = match hemisphere {
        Hemisphere::Full => (T::zero(), T::pi()),
        Hemisphere::KzPositive => (T::zero(), T::frac_pi_2()),
        Hemisphere::KzNegative => (T::frac_pi_2(), T::pi()),
    };
    let kind = if hemisphere == Hemisphere::Full {
        MeshKind::Sphere2
    } else {
        MeshKind::HalfSphere2
    };
    let build = move |r: &[usize]| -> SurfaceMesh<T> {
        let (tn, tw) = gauss_legendre(r[0], lo, hi);
        let (pn, pw) = periodic_trapezoid(r[1], T::zero(), T::two_pi());
        SurfaceMesh {
            kind,
            axes: vec![
                MeshAxis { label: "polar", nodes: tn, weights: tw },
                MeshAxis { label: "azimuth", nodes: pn, weights: pw },
            ],
            orientation: if flip { -T::one() } else { T::one() },
        }
    };
    let r2 = radius * radius;
    let norm = T::one() / T::two_pi();
    let integrand = move |coords: &[T]| -> Result<T> {
        let (st, ct) = (coords[0].sin(), coords[0].cos());
        let (sp, cp) = (coords[1].sin(), coords[1].cos());
        let n_hat = [st * cp, st * sp, ct];
        let k = Momentum4::new(
            center[0] + radius * n_hat[0],
            center[1] + radius * n_hat[1],
            center[2] + radius * n_hat[2],
            T::zero(),
        );
        let f = geometry::curvature_cartesian_pairs(spec, &k, band)?;
        // F_E = (f_yz, f_zx, f_xy); pair order is (xy, xz, xw, yz, yw, zw).
        let fe = [f[3], -f[1], f[0]];
        let flux = fe[0] * n_hat[0] + fe[1] * n_hat[1] + fe[2] * n_hat[2];
        Ok(flux * st * r2 * norm)
    };
    let name = match hemisphere {
        Hemisphere::Full => "dipole-sphere",
        Hemisphere::KzPositive => "dipole-hemisphere+",
        Hemisphere::KzNegative => "dipole-hemisphere-",
    };
    integrate_with_estimate(name, band, build, &res, integrand)
}

/// Planar Euler integral of the 3D reduced model at fixed kz (kw = 0).
pub fn dipole_planes<T: Real>(
    spec: &ModelSpec<T>,
    kz: T,
    band: Band,
    extent: T,
    res: [usize; 2],
    flip: bool,
) -> Result<InvariantReport> {
    let d = spec.delta.abs();
    if d > T::zero() && (kz.abs() - d).abs() < T::of(1e-3) * d.max(T::one()) {
        return Err(Error::DegeneracyCollision {
            gap: (kz.abs() - d).abs().to_f(),
            threshold: 1e-3,
        });
    }
    let plane = PlaneAt { kz, kw: T::zero() };
    let ex = unit_axis(0);
    let ey = unit_axis(1);
    let mut report = euler_disk_integral(
        "dipole-plane",
        band,
        MeshKind::Plane2,
        extent,
        res,
        flip,
        move |r, th| {
            let k = plane.momentum(r * th.cos(), r * th.sin());
            let f = geometry::curvature_directional(spec, &k, band, &ex, &ey)?;
            Ok((f * r, f))
        },
    )?;
    report.mesh = format!("{} @ kz={:.3}", report.mesh, kz.to_f());
    Ok(report)
}

/// One row of the tight-binding node scan.
#[derive(Debug, Clone)]
pub struct NodeScanRow {
    pub lambda: f64,
    /// (kz, kw) locations where the flat-dispersive gap closes.
    pub nodes: Vec<(f64, f64)>,
    pub min_gap: f64,
}

/// Locate gap minima of the tight-binding model over the (kz, kw) plane at
/// kx = ky = 0, with iterative local refinement.
pub fn tb_node_scan<T: Real>(spec: &ModelSpec<T>, lambdas: &[T], grid: usize) -> Vec<NodeScanRow> {
    lambdas
        .iter()
        .map(|&lam| {
            let s = ModelSpec { lambda: lam, ..*spec };
            let gap_at = |kz: f64, kw: f64| -> f64 {
                s.closed_form_gap(&Momentum4::new(T::zero(), T::zero(), T::of(kz), T::of(kw)))
                    .to_f()
            };
            let pi = std::f64::consts::PI;
            let n = grid.max(16);
            let h = 2.0 * pi / n as f64;
            let mut cells: Vec<(f64, f64, f64)> = Vec::new();
            let mut min_gap = f64::INFINITY;
            for i in 0..n {
                for j in 0..n {
                    let kz = -pi + (i as f64 + 0.5) * h;
                    let kw = -pi + (j as f64 + 0.5) * h;
                    let g = gap_at(kz, kw);
                    min_gap = min_gap.min(g);
                    cells.push((kz, kw, g));
                }
            }
            // Refine every cell within one gap-slope length of the minimum.
            let mut candidates: Vec<(f64, f64, f64)> = cells
                .into_iter()
                .filter(|&(_, _, g)| g < min_gap + 2.0 * h)
                .collect();
            for c in &mut candidates {
                let mut half = h;
                for _ in 0..48 {
                    let (kz0, kw0, _) = *c;
                    let mut best = *c;
                    for di in -2i32..=2 {
                        for dj in -2i32..=2 {
                            let kz = kz0 + di as f64 * half / 2.0;
                            let kw = kw0 + dj as f64 * half / 2.0;
                            let g = gap_at(kz, kw);
                            if g < best.2 {
                                best = (kz, kw, g);
                            }
                        }
                    }
                    *c = best;
                    half *= 0.5;
                    if half < 1e-12 {
                        break;
                    }
                }
            }
            let mut nodes: Vec<(f64, f64)> = Vec::new();
            let mut refined_min = min_gap;
            for (kz, kw, g) in candidates {
                refined_min = refined_min.min(g);
                if g < 1e-6 {
                    let wrapped = (
                        crate::model::wrap_to_bz(T::of(kz)).to_f(),
                        crate::model::wrap_to_bz(T::of(kw)).to_f(),
                    );
                    if nodes.iter().all(|&(a, b)| {
                        ((a - wrapped.0).powi(2) + (b - wrapped.1).powi(2)).sqrt() > 0.1
                    }) {
                        nodes.push(wrapped);
                    }
                }
            }
            nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
            NodeScanRow { lambda: lam.to_f(), nodes, min_gap: refined_min }
        })
        .collect()
}
