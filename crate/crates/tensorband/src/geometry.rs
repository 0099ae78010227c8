//! Non-Abelian quantum geometry: metric, SO(2) curvature, and the 3-form
//! curvature sourced by the 4D singularity.
//!
//! Two independent curvature routes are provided. The sum-over-states route
//! contracts analytic Hamiltonian derivatives with the spectral resolvent,
//!
//!   Q_{mu nu}^{ab} = sum_{m not in band} <w_a|dH_mu|u_m><u_m|dH_nu|w_b>
//!                    / ((E_a - E_m)(E_b - E_m)),
//!
//! evaluated in the canonically oriented real gauge; the symmetric part (in
//! the frame indices) is the quantum metric block, and
//! f_{mu nu} = Q^{12} - Q^{21} is the invariant curvature scalar. The
//! plaquette route transports the frame around a small parameter loop and
//! reads the SO(2) holonomy angle per unit area. Both agree to second order
//! in the mesh, which is exercised by the test suites.

use crate::error::{Error, Result};
use crate::model::{HyperPoint, M2, ModelSpec, Momentum4, V4, V6};
use crate::scalar::Real;
use crate::spectral::{orientation, Band, EigenSystem};

use nalgebra::SMatrix;

pub type M3<T> = SMatrix<T, 3, 3>;

/// Axis labels for the two coordinate systems.
pub const CARTESIAN_AXES: [&str; 4] = ["kx", "ky", "kz", "kw"];
pub const ANGULAR_AXES: [&str; 3] = ["gamma", "theta", "phi"];

/// Where the geometric tensor is evaluated: directly in momentum space or on
/// the hyperspherical parametrization (chain-ruled through the Jacobian).
#[derive(Debug, Clone, Copy)]
pub enum Coords<T> {
    Cartesian(Momentum4<T>),
    Hyperspherical(HyperPoint<T>),
}

impl<T: Real> Coords<T> {
    pub fn momentum(&self) -> Momentum4<T> {
        match self {
            Coords::Cartesian(k) => *k,
            Coords::Hyperspherical(p) => p.to_momentum(),
        }
    }

    fn tangents(&self) -> Vec<V4<T>> {
        match self {
            Coords::Cartesian(_) => (0..4)
                .map(|mu| {
                    let mut t = V4::zeros();
                    t[mu] = T::one();
                    t
                })
                .collect(),
            Coords::Hyperspherical(p) => {
                let jac = p.angular_jacobian();
                (0..3).map(|c| jac.column(c).clone_owned()).collect()
            }
        }
    }

    pub fn axis_label(&self, mu: usize) -> &'static str {
        match self {
            Coords::Cartesian(_) => CARTESIAN_AXES[mu],
            Coords::Hyperspherical(_) => ANGULAR_AXES[mu],
        }
    }

    pub fn axis_count(&self) -> usize {
        match self {
            Coords::Cartesian(_) => 4,
            Coords::Hyperspherical(_) => 3,
        }
    }
}

/// One evaluation of the geometric tensor for a parameter pair.
#[derive(Debug, Clone)]
pub struct GeometrySample<T> {
    pub anchor: Momentum4<T>,
    pub band: Band,
    pub labels: (&'static str, &'static str),
    /// Metric block g_{mu nu}^{ab} in the oriented gauge (symmetric 2x2).
    pub metric: M2<T>,
    /// Invariant curvature scalar f_{mu nu} = F^{12}_{mu nu}.
    pub curvature: T,
    /// Frame-index trace G_{mu nu} = tr_ab g.
    pub trace_metric: T,
}

/// All Q blocks for one band at one point, for a set of tangent directions.
pub struct QgtAtPoint<T> {
    /// Q_{mu nu} as 2x2 blocks, indexed q[mu][nu].
    pub q: Vec<Vec<M2<T>>>,
    pub pair_energies: (T, T),
}

impl<T: Real> QgtAtPoint<T> {
    pub fn metric_block(&self, mu: usize, nu: usize) -> M2<T> {
        (self.q[mu][nu] + self.q[nu][mu]) * T::of(0.5)
    }

    pub fn curvature(&self, mu: usize, nu: usize) -> T {
        self.q[mu][nu][(0, 1)] - self.q[mu][nu][(1, 0)]
    }

    pub fn trace_metric(&self, mu: usize, nu: usize) -> T {
        let g = self.metric_block(mu, nu);
        g[(0, 0)] + g[(1, 1)]
    }
}

/// Evaluate the QGT blocks of `band` at `k` for the given tangents, in the
/// canonically oriented gauge.
pub fn qgt_at_point<T: Real>(
    spec: &ModelSpec<T>,
    k: &Momentum4<T>,
    band: Band,
    tangents: &[V4<T>],
) -> Result<QgtAtPoint<T>> {
    let h = spec.hamiltonian(k)?;
    let sys = EigenSystem::new(&h, crate::spectral::default_grouping_tol())?;
    qgt_with_system(spec, k, band, tangents, &sys)
}

/// Same, reusing an existing eigendecomposition of H(k).
pub fn qgt_with_system<T: Real>(
    spec: &ModelSpec<T>,
    k: &Momentum4<T>,
    band: Band,
    tangents: &[V4<T>],
    sys: &EigenSystem<T>,
) -> Result<QgtAtPoint<T>> {
    let frame = orientation::orient_frame(spec, k, band, &sys.pair_frame(band))?;
    let (e_a, e_b) = sys.pair_energies(band);
    let band_lo = 2 * band.slot();

    // Out-of-band states and energies.
    let mut out_states: Vec<(V6<T>, T)> = Vec::with_capacity(4);
    for m in 0..6 {
        if m == band_lo || m == band_lo + 1 {
            continue;
        }
        out_states.push((sys.vectors.column(m).clone_owned(), sys.energies[m]));
    }

    // t[dir][m][a] = <u_m | dH_dir | w_a>
    let n_dir = tangents.len();
    let mut t = vec![[[T::zero(); 2]; 4]; n_dir];
    for (dir, tangent) in tangents.iter().enumerate() {
        let dh = spec.hamiltonian_directional(k, tangent);
        let w = dh * frame;
        for (m, (um, _)) in out_states.iter().enumerate() {
            for a in 0..2 {
                t[dir][m][a] = um.dot(&w.column(a).clone_owned());
            }
        }
    }

    let energies = [e_a, e_b];
    let mut q = vec![vec![M2::zeros(); n_dir]; n_dir];
    for mu in 0..n_dir {
        for nu in 0..n_dir {
            let mut block = M2::zeros();
            for (m, (_, e_m)) in out_states.iter().enumerate() {
                for a in 0..2 {
                    for b in 0..2 {
                        let den = (energies[a] - *e_m) * (energies[b] - *e_m);
                        block[(a, b)] += t[mu][m][a] * t[nu][m][b] / den;
                    }
                }
            }
            q[mu][nu] = block;
        }
    }
    Ok(QgtAtPoint { q, pair_energies: (e_a, e_b) })
}

/// The geometric tensor for one parameter pair, in Cartesian or
/// hyperspherical coordinates.
pub fn qgt_sum_over_states<T: Real>(
    spec: &ModelSpec<T>,
    point: &Coords<T>,
    band: Band,
    mu: usize,
    nu: usize,
) -> Result<GeometrySample<T>> {
    let n = point.axis_count();
    assert!(mu < n && nu < n, "axis index out of range");
    let k = point.momentum();
    let tangents = point.tangents();
    let qgt = qgt_at_point(spec, &k, band, &[tangents[mu], tangents[nu]])?;
    Ok(GeometrySample {
        anchor: k,
        band,
        labels: (point.axis_label(mu), point.axis_label(nu)),
        metric: qgt.metric_block(0, 1),
        curvature: qgt.curvature(0, 1),
        trace_metric: qgt.trace_metric(0, 1),
    })
}

/// Curvature scalar for two explicit momentum-space tangents.
pub fn curvature_directional<T: Real>(
    spec: &ModelSpec<T>,
    k: &Momentum4<T>,
    band: Band,
    t1: &V4<T>,
    t2: &V4<T>,
) -> Result<T> {
    let qgt = qgt_at_point(spec, k, band, &[*t1, *t2])?;
    Ok(qgt.curvature(0, 1))
}

/// Curvature scalars for all six Cartesian axis pairs at once, ordered
/// (xy, xz, xw, yz, yw, zw). Reuses one eigendecomposition.
pub fn curvature_cartesian_pairs<T: Real>(
    spec: &ModelSpec<T>,
    k: &Momentum4<T>,
    band: Band,
) -> Result<[T; 6]> {
    let tangents: Vec<V4<T>> = (0..4)
        .map(|mu| {
            let mut t = V4::zeros();
            t[mu] = T::one();
            t
        })
        .collect();
    let qgt = qgt_at_point(spec, k, band, &tangents)?;
    Ok([
        qgt.curvature(0, 1),
        qgt.curvature(0, 2),
        qgt.curvature(0, 3),
        qgt.curvature(1, 2),
        qgt.curvature(1, 3),
        qgt.curvature(2, 3),
    ])
}

/// 3x3 trace metric over the hyperspherical angles (gamma, theta, phi).
pub fn angular_trace_metric<T: Real>(
    spec: &ModelSpec<T>,
    p: &HyperPoint<T>,
    band: Band,
) -> Result<M3<T>> {
    let k = p.to_momentum();
    let jac = p.angular_jacobian();
    let tangents: Vec<V4<T>> = (0..3).map(|c| jac.column(c).clone_owned()).collect();
    let qgt = qgt_at_point(spec, &k, band, &tangents)?;
    let mut g = M3::zeros();
    for mu in 0..3 {
        for nu in 0..3 {
            g[(mu, nu)] = qgt.trace_metric(mu, nu);
        }
    }
    Ok(g)
}

/// SO(2) holonomy angle of the frame transported around the loop
/// c0 -> c1 -> c2 -> c3 -> c0, divided by the plaquette area. Orientation of
/// the result follows the loop order; the seed gauge is the canonical one at
/// `corners[0]`.
pub fn qgt_plaquette<T: Real>(
    spec: &ModelSpec<T>,
    corners: &[Momentum4<T>; 4],
    band: Band,
) -> Result<T> {
    let tol = crate::spectral::default_grouping_tol::<T>();
    let u = corners[1].vector() - corners[0].vector();
    let v = corners[3].vector() - corners[0].vector();
    let gram = u.dot(&u) * v.dot(&v) - u.dot(&v) * u.dot(&v);
    let area = gram.max(T::zero()).sqrt();
    if area <= T::of(1e-30) {
        return Ok(T::zero());
    }

    let systems: Vec<EigenSystem<T>> = corners
        .iter()
        .map(|k| EigenSystem::new(&spec.hamiltonian(k)?, tol))
        .collect::<Result<_>>()?;
    let seed = orientation::orient_frame(spec, &corners[0], band, &systems[0].pair_frame(band))?;

    let mut frame = seed;
    for i in [1usize, 2, 3, 0] {
        let target = systems[i].pair_frame(band);
        let o = frame.transpose() * target;
        let det = o.determinant();
        if det.abs() <= T::of(0.1) {
            return Err(Error::FrameBreakdown { overlap_det: det.to_f() });
        }
        frame = target * crate::spectral::polar_align(&o);
    }
    // Net holonomy of the closed loop relative to the seed gauge.
    let w = seed.transpose() * frame;
    let angle = (w[(1, 0)] - w[(0, 1)]).atan2(w[(0, 0)] + w[(1, 1)]);
    Ok(angle / area)
}

/// Axis-aligned plaquette helper: loop spanning +h_mu then +h_nu.
pub fn plaquette_corners<T: Real>(
    k: &Momentum4<T>,
    mu: usize,
    nu: usize,
    h: T,
) -> [Momentum4<T>; 4] {
    let mut e_mu = V4::zeros();
    e_mu[mu] = h;
    let mut e_nu = V4::zeros();
    e_nu[nu] = h;
    let base = k.vector();
    [
        *k,
        Momentum4::from_vector(base + e_mu),
        Momentum4::from_vector(base + e_mu + e_nu),
        Momentum4::from_vector(base + e_nu),
    ]
}

/// Scalar components of the 3-form curvature at a point, plus the dual
/// source vector.
#[derive(Debug, Clone)]
pub struct ThreeFormSample<T> {
    pub anchor: Momentum4<T>,
    pub band: Band,
    /// h_{mu nu la} for the index triples (xyz, xyw, xzw, yzw).
    pub components: [T; 4],
    /// Dual source vector H^rho.
    pub source: V4<T>,
}

/// Full 4x4 trace metric G_{mu nu} in Cartesian momentum coordinates.
pub fn trace_metric_cartesian<T: Real>(
    spec: &ModelSpec<T>,
    k: &Momentum4<T>,
    band: Band,
) -> Result<SMatrix<T, 4, 4>> {
    let tangents: Vec<V4<T>> = (0..4)
        .map(|mu| {
            let mut t = V4::zeros();
            t[mu] = T::one();
            t
        })
        .collect();
    let qgt = qgt_at_point(spec, k, band, &tangents)?;
    let mut g = SMatrix::<T, 4, 4>::zeros();
    for mu in 0..4 {
        for nu in 0..4 {
            g[(mu, nu)] = qgt.trace_metric(mu, nu);
        }
    }
    Ok(g)
}

/// The 3-form curvature at a point.
///
/// The band projectors of this family vary only along three of the four
/// momentum directions (the trace metric has an exact zero mode z along the
/// pulled-back radial coefficient direction), so each component is the
/// metric volume of the corresponding 3-plane,
///
///   h_{mu nu la} = sqrt(2 det G|_(mu nu la)) * or(z, e_mu, e_nu, e_la),
///
/// the oriented volume swept by the band subspace. The exterior derivative
/// of the curvature two-form vanishes identically away from the nodes
/// (Bianchi identity) and carries no flux; this volume form is the object
/// whose dual reproduces the closed-form source field k/|k|^4 of the
/// unperturbed dispersive bands, and it vanishes identically on the flat
/// band, whose projector manifold is only two-dimensional (every 3x3 block
/// of its trace metric is singular).
pub fn tensor_three_form<T: Real>(
    spec: &ModelSpec<T>,
    k: &Momentum4<T>,
    band: Band,
) -> Result<ThreeFormSample<T>> {
    let g = trace_metric_cartesian(spec, k, band)?;
    let z = spec.degree_orientation_vector(k);
    let scale = spec.coefficients(k).norm();
    if z.norm() <= T::of(1e-12) * scale.max(T::one()) {
        return Err(Error::OrientationDegenerate { norm: z.norm().to_f() });
    }
    // Complement minor of G with row/column rho removed.
    let minor = |rho: usize| -> T {
        let idx: Vec<usize> = (0..4).filter(|&i| i != rho).collect();
        let mut m = M3::<T>::zeros();
        for (i, &a) in idx.iter().enumerate() {
            for (j, &b) in idx.iter().enumerate() {
                m[(i, j)] = g[(a, b)];
            }
        }
        m.determinant()
    };
    let vol =
        |rho: usize| -> T { (T::of(2.0) * minor(rho).max(T::zero())).sqrt() };
    let sgn = |x: T| -> T {
        if x >= T::zero() {
            T::one()
        } else {
            -T::one()
        }
    };
    // Oriented volumes: or_{mu nu la} = sign det[z, e_mu, e_nu, e_la].
    let components = [
        -sgn(z[3]) * vol(3), // xyz
        sgn(z[2]) * vol(2),  // xyw
        -sgn(z[1]) * vol(1), // xzw
        sgn(z[0]) * vol(0),  // yzw
    ];
    // Dual: H^rho = eps^{rho mu nu la} h_{mu nu la} / 3!.
    let source = V4::new(components[3], -components[2], components[1], -components[0]);
    Ok(ThreeFormSample { anchor: *k, band, components, source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type S = ModelSpec<f64>;

    fn unit(mu: usize) -> V4<f64> {
        let mut t = V4::zeros();
        t[mu] = 1.0;
        t
    }

    #[test]
    fn qgt_block_symmetries() {
        let spec = S::continuum_4d(0.0);
        let k = Momentum4::new(0.8, -0.4, 0.3, 0.6);
        for band in Band::ALL {
            let s1 = qgt_sum_over_states(&spec, &Coords::Cartesian(k), band, 0, 1).unwrap();
            let s2 = qgt_sum_over_states(&spec, &Coords::Cartesian(k), band, 1, 0).unwrap();
            // f antisymmetric, G symmetric, exactly.
            assert_eq!(s1.curvature, -s2.curvature);
            assert_eq!(s1.trace_metric, s2.trace_metric);
            // Metric block symmetric in the frame indices.
            assert!((s1.metric[(0, 1)] - s1.metric[(1, 0)]).abs() < 1e-15);
            // Diagonal metric entries are non-negative.
            let d = qgt_sum_over_states(&spec, &Coords::Cartesian(k), band, 2, 2).unwrap();
            assert!(d.metric[(0, 0)] >= 0.0 && d.metric[(1, 1)] >= 0.0);
        }
    }

    #[test]
    fn scale_covariance_of_unperturbed_model() {
        // k -> s k rescales g and f by 1/s^2 in the scale-free model.
        let spec = S::continuum_4d(0.0);
        let k1 = Momentum4::new(0.7, 0.2, -0.5, 0.4);
        let k2 = Momentum4::new(1.4, 0.4, -1.0, 0.8);
        for band in Band::ALL {
            let a = qgt_sum_over_states(&spec, &Coords::Cartesian(k1), band, 0, 3).unwrap();
            let b = qgt_sum_over_states(&spec, &Coords::Cartesian(k2), band, 0, 3).unwrap();
            assert!((a.curvature - 4.0 * b.curvature).abs() < 1e-10 * (1.0 + a.curvature.abs()));
            assert!(
                (a.trace_metric - 4.0 * b.trace_metric).abs()
                    < 1e-10 * (1.0 + a.trace_metric.abs())
            );
        }
    }

    #[test]
    fn plaquette_agrees_with_sum_over_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let specs = [S::continuum_4d(0.0), S::continuum_4d(1.0)];
        let mut checked = 0;
        let mut attempts = 0;
        while checked < 30 && attempts < 10_000 {
            attempts += 1;
            let spec = specs[attempts % 2];
            let k = crate::model::sample_momentum(&spec, &mut rng);
            if spec.closed_form_gap(&k) < 0.4 {
                continue;
            }
            let (mu, nu) = (rng.random_range(0..4), rng.random_range(0..4));
            if mu == nu {
                continue;
            }
            let band = Band::ALL[rng.random_range(0..3)];
            if spec.delta != 0.0 && band != Band::Flat {
                let c = spec.coefficients(&k);
                if (c[2] * c[2] + c[3] * c[3]).sqrt() < 0.1 {
                    continue;
                }
            }
            let f_sos = match curvature_directional(&spec, &k, band, &unit(mu), &unit(nu)) {
                Ok(f) => f,
                Err(_) => continue,
            };
            let h = 1e-3;
            let f_plq = qgt_plaquette(&spec, &plaquette_corners(&k, mu, nu, h), band).unwrap();
            let f_plq_half =
                qgt_plaquette(&spec, &plaquette_corners(&k, mu, nu, h / 2.0), band).unwrap();
            let mesh_err = (f_plq - f_plq_half).abs() * (4.0 / 3.0);
            let tol = 1e-6f64.max(2.0 * mesh_err);
            assert!(
                (f_sos - f_plq_half).abs() <= tol,
                "routes disagree: sos={f_sos} plq={f_plq_half} tol={tol} at {k:?} band {band:?}"
            );
            checked += 1;
        }
        assert_eq!(checked, 30, "not enough usable sample points");
    }

    #[test]
    fn degenerate_plaquette_is_flat() {
        let spec = S::continuum_4d(0.0);
        let k = Momentum4::new(0.5, 0.1, 0.2, -0.7);
        let corners = [k, k, k, k];
        assert_eq!(qgt_plaquette(&spec, &corners, Band::Upper).unwrap(), 0.0);
    }

    #[test]
    fn curvature_sums_to_zero_over_bands() {
        // Pointwise version of the Euler sum rule.
        let spec = S::continuum_4d(0.0);
        let k = Momentum4::new(0.3, -0.9, 0.5, 0.2);
        for (mu, nu) in [(0, 1), (0, 2), (1, 3), (2, 3)] {
            let total: f64 = Band::ALL
                .iter()
                .map(|&b| {
                    qgt_sum_over_states(&spec, &Coords::Cartesian(k), b, mu, nu)
                        .unwrap()
                        .curvature
                })
                .sum();
            assert!(total.abs() < 1e-10, "pair ({mu},{nu}): {total}");
        }
    }

    #[test]
    fn three_form_matches_inverse_quartic_source() {
        let spec = S::continuum_4d(0.0);
        // H = k/|k|^4 on both dispersive bands, componentwise.
        let k = Momentum4::new(1.0, 0.0, 0.0, 0.0);
        let tf = tensor_three_form(&spec, &k, Band::Upper).unwrap();
        let expect = V4::new(1.0, 0.0, 0.0, 0.0);
        assert!((tf.source - expect).norm() < 1e-10, "source {:?}", tf.source);

        for band in [Band::Upper, Band::Lower] {
            let k = Momentum4::new(0.9, -1.1, 0.7, 1.2);
            let tf = tensor_three_form(&spec, &k, band).unwrap();
            let r = k.norm();
            let expect = k.vector() / (r * r * r * r);
            assert!(
                (tf.source - expect).norm() < 1e-10 * expect.norm(),
                "source {:?} vs {:?}",
                tf.source,
                expect
            );
        }

        // |k| = 2 has |H| = 1/8.
        let k = Momentum4::new(0.0, 2.0, 0.0, 0.0);
        let tf = tensor_three_form(&spec, &k, Band::Upper).unwrap();
        assert!((tf.source.norm() - 0.125).abs() < 1e-10);
    }

    #[test]
    fn flat_band_three_form_vanishes() {
        // The flat projector manifold is two-dimensional: every 3x3 trace
        // metric block is singular, so the volume form is identically zero.
        let spec = S::continuum_4d(0.0);
        for k in [
            Momentum4::new(1.0, 0.0, 0.0, 0.0),
            Momentum4::new(0.4, -0.8, 0.6, 0.3),
        ] {
            let tf = tensor_three_form(&spec, &k, Band::Flat).unwrap();
            assert!(tf.source.norm() < 1e-6, "{:?}", tf.source);
            let g = trace_metric_cartesian(&spec, &k, Band::Flat).unwrap();
            let mut evs: Vec<f64> =
                g.symmetric_eigen().eigenvalues.iter().copied().collect();
            evs.sort_by(f64::total_cmp);
            assert!(evs[1].abs() < 1e-10, "flat metric rank > 2: {evs:?}");
        }
    }

    #[test]
    fn three_form_rejects_degenerate_orientation() {
        // The 3D reduction has a rank-3 coefficient map: no 4D source.
        let spec = S::continuum_3d(0.0);
        let k = Momentum4::new(0.5, 0.2, 0.8, 0.0);
        assert!(matches!(
            tensor_three_form(&spec, &k, Band::Upper),
            Err(Error::OrientationDegenerate { .. })
        ));
    }

    #[test]
    fn hyperspherical_chain_rule_consistent() {
        // Trace metric in angles equals J^T G_k J with the analytic Jacobian.
        let spec = S::continuum_4d(0.0);
        let p = HyperPoint::new(1.0, 0.7, 1.3, 2.4, 0.0);
        let g_ang = angular_trace_metric(&spec, &p, Band::Upper).unwrap();
        let k = p.to_momentum();
        let tangents: Vec<V4<f64>> = (0..4).map(unit).collect();
        let qgt = qgt_at_point(&spec, &k, Band::Upper, &tangents).unwrap();
        let mut g_cart = SMatrix::<f64, 4, 4>::zeros();
        for mu in 0..4 {
            for nu in 0..4 {
                g_cart[(mu, nu)] = qgt.trace_metric(mu, nu);
            }
        }
        let jac = p.angular_jacobian();
        let pulled = jac.transpose() * g_cart * jac;
        assert!((pulled - g_ang).iter().all(|x| x.abs() < 1e-10));
    }
}
