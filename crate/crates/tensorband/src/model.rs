//! The six-band model family and its exact symmetries.
//!
//! All members share one algebraic skeleton: five fixed real-symmetric 6x6
//! coefficient matrices contracted with momentum-dependent scalars,
//!
//!   H(k) = c1(k) L2xS2 + c2(k) L1xS0 + c3(k) L4xS3 + c4(k) L4xS1 + delta L4xS0,
//!
//! where Li are Gell-Mann matrices acting on a three-level index and Si are
//! Pauli matrices on a two-level index. The continuum families take
//! c = (kx, ky, kz, kw) (with kw = 0 in 3D); the tight-binding family
//! substitutes c = (sin kx, sin ky, sin kz, Lambda + 3 - sum_i cos k_i).
//!
//! Every H is real symmetric, commutes with complex conjugation (spacetime
//! inversion with (PT)^2 = +1) and anticommutes with the chiral operator
//! S = diag(-1, 1, 1) x id2.

use nalgebra::{Complex, SMatrix, SVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type V2<T> = SVector<T, 2>;
pub type M2<T> = SMatrix<T, 2, 2>;
pub type V4<T> = SVector<T, 4>;
pub type M4<T> = SMatrix<T, 4, 4>;
pub type V6<T> = SVector<T, 6>;
pub type M6<T> = SMatrix<T, 6, 6>;
pub type M6x2<T> = SMatrix<T, 6, 2>;
pub type CM2<T> = SMatrix<Complex<T>, 2, 2>;
pub type CM3<T> = SMatrix<Complex<T>, 3, 3>;
pub type CM6<T> = SMatrix<Complex<T>, 6, 6>;
pub type CV6<T> = SVector<Complex<T>, 6>;

/// A point of 4D momentum space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Momentum4<T> {
    pub kx: T,
    pub ky: T,
    pub kz: T,
    pub kw: T,
}

impl<T: Real> Momentum4<T> {
    pub fn new(kx: T, ky: T, kz: T, kw: T) -> Self {
        Self { kx, ky, kz, kw }
    }

    pub fn from_vector(v: V4<T>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn vector(&self) -> V4<T> {
        V4::new(self.kx, self.ky, self.kz, self.kw)
    }

    pub fn norm(&self) -> T {
        self.vector().norm()
    }

    pub fn is_finite(&self) -> bool {
        self.kx.is_fin() && self.ky.is_fin() && self.kz.is_fin() && self.kw.is_fin()
    }
}

/// Hyperspherical parametrization of a 3-sphere of radius `omega` centered
/// at (0, 0, 0, `lambda`):
///
///   kx = -omega cos(gamma) sin(theta),  ky = omega cos(gamma) cos(theta),
///   kz =  omega sin(gamma) cos(phi),    kw = -omega sin(gamma) sin(phi) + lambda,
///
/// with gamma in [0, pi/2] and theta, phi in [0, 2pi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperPoint<T> {
    pub omega: T,
    pub gamma: T,
    pub theta: T,
    pub phi: T,
    pub lambda: T,
}

impl<T: Real> HyperPoint<T> {
    pub fn new(omega: T, gamma: T, theta: T, phi: T, lambda: T) -> Self {
        Self { omega, gamma, theta, phi, lambda }
    }

    pub fn to_momentum(&self) -> Momentum4<T> {
        let (sg, cg) = (self.gamma.sin(), self.gamma.cos());
        let (st, ct) = (self.theta.sin(), self.theta.cos());
        let (sp, cp) = (self.phi.sin(), self.phi.cos());
        Momentum4::new(
            -self.omega * cg * st,
            self.omega * cg * ct,
            self.omega * sg * cp,
            -self.omega * sg * sp + self.lambda,
        )
    }

    /// Tangent vectors dk/dgamma, dk/dtheta, dk/dphi as columns of a 4x3
    /// matrix. Used to chain-rule momentum-space derivatives onto the
    /// angular parametrization.
    pub fn angular_jacobian(&self) -> SMatrix<T, 4, 3> {
        let (sg, cg) = (self.gamma.sin(), self.gamma.cos());
        let (st, ct) = (self.theta.sin(), self.theta.cos());
        let (sp, cp) = (self.phi.sin(), self.phi.cos());
        let o = self.omega;
        SMatrix::<T, 4, 3>::from_columns(&[
            V4::new(o * sg * st, -o * sg * ct, o * cg * cp, -o * cg * sp),
            V4::new(-o * cg * ct, -o * cg * st, T::zero(), T::zero()),
            V4::new(T::zero(), T::zero(), -o * sg * sp, -o * sg * cp),
        ])
    }
}

/// Which member of the model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Linear 4D continuum model.
    Continuum4D,
    /// Same with kw pinned to zero (3D reduction).
    Continuum3D,
    /// Lattice regularization on the 4-torus, momenta in [-pi, pi)^4.
    TightBinding,
}

/// Immutable description of one Hamiltonian: family plus the perturbation
/// strength `delta` and the offset `lambda` (tight-binding bias; also reused
/// as the hypersphere center offset in parametrized sweeps).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec<T> {
    pub family: Family,
    pub delta: T,
    pub lambda: T,
}

/// Wrap a momentum component into [-pi, pi).
pub fn wrap_to_bz<T: Real>(k: T) -> T {
    let two_pi = T::two_pi();
    let mut x = (k + T::pi()) % two_pi;
    if x < T::zero() {
        x += two_pi;
    }
    x - T::pi()
}

impl<T: Real> ModelSpec<T> {
    pub fn new(family: Family, delta: T, lambda: T) -> Self {
        Self { family, delta, lambda }
    }

    pub fn continuum_4d(delta: T) -> Self {
        Self::new(Family::Continuum4D, delta, T::zero())
    }

    pub fn continuum_3d(delta: T) -> Self {
        Self::new(Family::Continuum3D, delta, T::zero())
    }

    pub fn tight_binding(lambda: T) -> Self {
        Self::new(Family::TightBinding, T::zero(), lambda)
    }

    /// Scalar coefficients (c1, c2, c3, c4) multiplying the four momentum
    /// coefficient matrices at `k`.
    pub fn coefficients(&self, k: &Momentum4<T>) -> V4<T> {
        match self.family {
            Family::Continuum4D => V4::new(k.kx, k.ky, k.kz, k.kw),
            Family::Continuum3D => V4::new(k.kx, k.ky, k.kz, T::zero()),
            Family::TightBinding => {
                let (kx, ky, kz, kw) = (
                    wrap_to_bz(k.kx),
                    wrap_to_bz(k.ky),
                    wrap_to_bz(k.kz),
                    wrap_to_bz(k.kw),
                );
                let three = T::of(3.0);
                V4::new(
                    kx.sin(),
                    ky.sin(),
                    kz.sin(),
                    self.lambda + three - kx.cos() - ky.cos() - kz.cos() - kw.cos(),
                )
            }
        }
    }

    /// Jacobian dc_i/dk_mu (rows: coefficient, columns: momentum axis).
    pub fn coefficient_jacobian(&self, k: &Momentum4<T>) -> M4<T> {
        match self.family {
            Family::Continuum4D => M4::identity(),
            Family::Continuum3D => {
                let mut j = M4::identity();
                j[(3, 3)] = T::zero();
                j
            }
            Family::TightBinding => {
                let (kx, ky, kz, kw) = (
                    wrap_to_bz(k.kx),
                    wrap_to_bz(k.ky),
                    wrap_to_bz(k.kz),
                    wrap_to_bz(k.kw),
                );
                let mut j = M4::zeros();
                j[(0, 0)] = kx.cos();
                j[(1, 1)] = ky.cos();
                j[(2, 2)] = kz.cos();
                j[(3, 0)] = kx.sin();
                j[(3, 1)] = ky.sin();
                j[(3, 2)] = kz.sin();
                j[(3, 3)] = kw.sin();
                j
            }
        }
    }

    /// The Hamiltonian at `k` (real symmetric by construction).
    pub fn hamiltonian(&self, k: &Momentum4<T>) -> Result<M6<T>> {
        if !k.is_finite() {
            return Err(Error::NonFinite("momentum"));
        }
        let c = self.coefficients(k);
        let basis = coefficient_matrices::<T>();
        let mut h = basis[4] * self.delta;
        for i in 0..4 {
            h += basis[i] * c[i];
        }
        Ok(h)
    }

    /// Partial derivative dH/dk_mu at `k` (mu in 0..4 for kx..kw).
    pub fn hamiltonian_partial(&self, k: &Momentum4<T>, mu: usize) -> M6<T> {
        let j = self.coefficient_jacobian(k);
        let basis = coefficient_matrices::<T>();
        let mut dh = M6::zeros();
        for i in 0..4 {
            if j[(i, mu)] != T::zero() {
                dh += basis[i] * j[(i, mu)];
            }
        }
        dh
    }

    /// Directional derivative of H along a momentum-space tangent vector.
    pub fn hamiltonian_directional(&self, k: &Momentum4<T>, tangent: &V4<T>) -> M6<T> {
        let j = self.coefficient_jacobian(k);
        let coeff_rates = j * tangent;
        let basis = coefficient_matrices::<T>();
        let mut dh = M6::zeros();
        for i in 0..4 {
            dh += basis[i] * coeff_rates[i];
        }
        dh
    }

    /// The 2x2 blocks (A, B) of the chiral block form
    /// H = [[0, A, B], [A^T, 0, 0], [B^T, 0, 0]] at coefficients `c`:
    /// A = [[c2, -c1], [c1, c2]], B = [[delta + c3, c4], [c4, delta - c3]].
    pub fn chiral_blocks(&self, c: &V4<T>) -> (M2<T>, M2<T>) {
        let a = M2::new(c[1], -c[0], c[0], c[1]);
        let b = M2::new(self.delta + c[2], c[3], c[3], self.delta - c[2]);
        (a, b)
    }

    /// Closed-form spectrum at `k`, ascending. The six levels are
    /// {-s_hi, -s_lo, 0, 0, s_lo, s_hi} with
    /// s_{hi,lo} = sqrt(cperp^2 + (cpar +- |delta|)^2).
    pub fn closed_form_energies(&self, k: &Momentum4<T>) -> [T; 6] {
        let c = self.coefficients(k);
        let cperp2 = c[0] * c[0] + c[1] * c[1];
        let cpar = (c[2] * c[2] + c[3] * c[3]).sqrt();
        let d = self.delta.abs();
        let s_hi = (cperp2 + (cpar + d) * (cpar + d)).sqrt();
        let s_lo = (cperp2 + (cpar - d) * (cpar - d)).sqrt();
        [-s_hi, -s_lo, T::zero(), T::zero(), s_lo, s_hi]
    }

    /// Minimal gap separating the flat pair from the dispersive pairs at `k`.
    pub fn closed_form_gap(&self, k: &Momentum4<T>) -> T {
        self.closed_form_energies(k)[4]
    }
}

/// Standard Gell-Mann matrix for index i in {1, 2, 4}.
pub fn gell_mann<T: Real>(i: usize) -> Result<CM3<T>> {
    let z = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let im = Complex::new(T::zero(), T::one());
    let m = match i {
        1 => CM3::new(z, one, z, one, z, z, z, z, z),
        2 => CM3::new(z, -im, z, im, z, z, z, z, z),
        4 => CM3::new(z, z, one, z, z, z, one, z, z),
        _ => return Err(Error::UnsupportedIndex(i)),
    };
    Ok(m)
}

/// Pauli matrix for index i in {0, 1, 2, 3}.
pub fn pauli<T: Real>(i: usize) -> CM2<T> {
    let z = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let im = Complex::new(T::zero(), T::one());
    match i {
        0 => CM2::new(one, z, z, one),
        1 => CM2::new(z, one, one, z),
        2 => CM2::new(z, -im, im, z),
        3 => CM2::new(one, z, z, -one),
        _ => unreachable!("pauli index {i}"),
    }
}

fn kron_3x2<T: Real>(a: &CM3<T>, b: &CM2<T>) -> CM6<T> {
    let mut out = CM6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            for p in 0..2 {
                for q in 0..2 {
                    out[(2 * i + p, 2 * j + q)] = a[(i, j)] * b[(p, q)];
                }
            }
        }
    }
    out
}

/// The five coefficient matrices as complex Kronecker products
/// (L2xS2, L1xS0, L4xS3, L4xS1, L4xS0). Entry-wise these are real; the
/// complex construction is kept for symmetry certification.
pub fn coefficient_matrices_complex<T: Real>() -> [CM6<T>; 5] {
    let l1 = gell_mann::<T>(1).expect("index 1");
    let l2 = gell_mann::<T>(2).expect("index 2");
    let l4 = gell_mann::<T>(4).expect("index 4");
    [
        kron_3x2(&l2, &pauli(2)),
        kron_3x2(&l1, &pauli(0)),
        kron_3x2(&l4, &pauli(3)),
        kron_3x2(&l4, &pauli(1)),
        kron_3x2(&l4, &pauli(0)),
    ]
}

/// Real forms of the coefficient matrices. The imaginary parts of the
/// Kronecker products cancel exactly; this is asserted in debug builds.
pub fn coefficient_matrices<T: Real>() -> [M6<T>; 5] {
    let cs = coefficient_matrices_complex::<T>();
    let mut out = [M6::zeros(); 5];
    for (dst, src) in out.iter_mut().zip(cs.iter()) {
        *dst = src.map(|z| {
            debug_assert!(z.im == T::zero(), "coefficient matrix has imaginary part");
            z.re
        });
    }
    out
}

/// Chiral operator S = diag(-1, 1, 1) x id2.
pub fn chiral_operator<T: Real>() -> M6<T> {
    let mut s = M6::identity();
    s[(0, 0)] = -T::one();
    s[(1, 1)] = -T::one();
    s
}

/// The momentum-space Higgs field in the degenerate-frame convention:
/// the Pauli matrix S2, acting on a two-frame of a degenerate subspace.
pub fn higgs_phi<T: Real>() -> CM2<T> {
    pauli(2)
}

/// Residuals certifying the exact symmetries over a random momentum sample.
#[derive(Debug, Clone, Copy)]
pub struct SymmetryReport {
    /// max |H - conj(H)| over the sample: spacetime-inversion (PT = K).
    pub pt_residual: f64,
    /// max |S H + H S| over the sample: chiral symmetry.
    pub chiral_residual: f64,
    /// max | [J, H] | for the intra-subspace rotation J = diag(j, j, -j),
    /// j = [[0,-1],[1,0]]; finite only where delta = 0, where J generates the
    /// exact twofold degeneracy used by the frame-orientation convention.
    pub so2_residual: Option<f64>,
    /// max deviation of the spectrum from its negation (chiral pairing).
    pub spectral_residual: f64,
    pub samples: usize,
}

impl SymmetryReport {
    pub fn max_residual(&self) -> f64 {
        self.pt_residual
            .max(self.chiral_residual)
            .max(self.so2_residual.unwrap_or(0.0))
    }
}

/// Intra-subspace rotation generator for the unperturbed models:
/// J = diag(j, j, -j) with j = [[0,-1],[1,0]]. J is orthogonal,
/// antisymmetric, squares to -1 and commutes with every delta = 0
/// Hamiltonian of the family.
pub fn subspace_rotation<T: Real>() -> M6<T> {
    let mut j = M6::zeros();
    let one = T::one();
    j[(0, 1)] = -one;
    j[(1, 0)] = one;
    j[(2, 3)] = -one;
    j[(3, 2)] = one;
    j[(4, 5)] = one;
    j[(5, 4)] = -one;
    j
}

/// Same object for the k_par = 0 planes of the perturbed model:
/// J' = id3 x j commutes with H whenever c3 = c4 = 0.
pub fn subspace_rotation_inplane<T: Real>() -> M6<T> {
    let mut j = M6::zeros();
    let one = T::one();
    for b in 0..3 {
        j[(2 * b, 2 * b + 1)] = -one;
        j[(2 * b + 1, 2 * b)] = one;
    }
    j
}

/// Adjugate of a 4x4 matrix via cofactors (continuous where the matrix is
/// singular, unlike det * inverse).
pub fn adjugate4<T: Real>(m: &M4<T>) -> M4<T> {
    let minor = |r: usize, c: usize| -> T {
        let rs: Vec<usize> = (0..4).filter(|&i| i != r).collect();
        let cs: Vec<usize> = (0..4).filter(|&j| j != c).collect();
        let a = |i: usize, j: usize| m[(rs[i], cs[j])];
        a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1))
            - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
            + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0))
    };
    let mut adj = M4::zeros();
    for r in 0..4 {
        for c in 0..4 {
            let sign = if (r + c) % 2 == 0 { T::one() } else { -T::one() };
            // adj = cofactor transpose
            adj[(c, r)] = sign * minor(r, c);
        }
    }
    adj
}

impl<T: Real> ModelSpec<T> {
    /// Direction in momentum space along which the band projectors do not
    /// vary (the zero mode of the quantum metric), oriented so that it pulls
    /// back the outward radial orientation of the coefficient map:
    /// z = adj(dc/dk) c. For the 4D continuum this is k itself. Vanishes for
    /// the 3D reduction, whose coefficient map is degenerate in 4D.
    pub fn degree_orientation_vector(&self, k: &Momentum4<T>) -> V4<T> {
        let c = self.coefficients(k);
        let jac = self.coefficient_jacobian(k);
        adjugate4(&jac) * c
    }
}

/// Draw a random momentum appropriate for the family.
pub fn sample_momentum<T: Real, R: Rng>(spec: &ModelSpec<T>, rng: &mut R) -> Momentum4<T> {
    let range = match spec.family {
        Family::TightBinding => std::f64::consts::PI,
        _ => 2.0,
    };
    let mut draw = || T::of(rng.random_range(-range..range));
    Momentum4::new(draw(), draw(), draw(), draw())
}

/// Evaluate the symmetry certificates over `samples` random momenta.
pub fn certify_symmetries<T: Real>(spec: &ModelSpec<T>, samples: usize, seed: u64) -> SymmetryReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = chiral_operator::<T>();
    let j = subspace_rotation::<T>();
    let check_so2 = spec.delta == T::zero();
    let mut pt = 0.0f64;
    let mut chiral = 0.0f64;
    let mut so2 = 0.0f64;
    let mut spectral = 0.0f64;
    let cs = coefficient_matrices_complex::<T>();
    for _ in 0..samples {
        let k = sample_momentum(spec, &mut rng);
        let c = spec.coefficients(&k);
        let mut hc = cs[4] * Complex::new(spec.delta, T::zero());
        for i in 0..4 {
            hc += cs[i] * Complex::new(c[i], T::zero());
        }
        // PT = K: commuting with conjugation means H has no imaginary part.
        let pt_res = hc.iter().map(|z| z.im.abs().to_f()).fold(0.0, f64::max);
        pt = pt.max(pt_res);

        let h = spec.hamiltonian(&k).expect("finite sample");
        let anti = s * h + h * s;
        chiral = chiral.max(anti.iter().map(|x| x.abs().to_f()).fold(0.0, f64::max));
        if check_so2 {
            let comm = j * h - h * j;
            so2 = so2.max(comm.iter().map(|x| x.abs().to_f()).fold(0.0, f64::max));
        }

        let mut evs: Vec<f64> = h
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|x| x.to_f())
            .collect();
        evs.sort_by(f64::total_cmp);
        let res = (0..6)
            .map(|i| (evs[i] + evs[5 - i]).abs())
            .fold(0.0, f64::max);
        spectral = spectral.max(res);
    }
    SymmetryReport {
        pt_residual: pt,
        chiral_residual: chiral,
        so2_residual: check_so2.then_some(so2),
        spectral_residual: spectral,
        samples,
    }
}
