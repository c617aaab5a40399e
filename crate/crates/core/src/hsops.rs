//! Hermitian/PSD operator algebra on the discretized one-photon space.

use crate::grid::{GridParams, MomentumGrid};
use crate::{fro, C, CMat, CVec};
use rand::{Rng, SeedableRng};
use serde::Deserialize;
use thiserror::Error;

pub const HERM_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum HsError {
    #[error("operator is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),
    #[error("operator is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("checkpoint is malformed: {0}")]
    BadCheckpoint(String),
}

/// Complex matrix together with validated Hermitian/PSD flags.
#[derive(Debug, Clone)]
pub struct HSOperator {
    pub mat: CMat,
    pub hermitian: bool,
    pub psd: bool,
}

impl HSOperator {
    /// Compute both flags (the PSD flag costs one eigendecomposition).
    pub fn analyze(mat: CMat) -> Self {
        let hermitian = herm_residual(&mat) < HERM_TOL;
        let psd = if hermitian {
            let (ev, _) = eig_hermitian(&mat);
            let scale = 1.0 + fro(&mat);
            ev.iter().cloned().fold(f64::INFINITY, f64::min) >= -PSD_TOL * scale
        } else {
            false
        };
        HSOperator { mat, hermitian, psd }
    }
}

/// max-entry |A - A^dag| relative to 1 + max-entry |A|.
pub fn herm_residual(a: &CMat) -> f64 {
    let mut res: f64 = 0.0;
    let mut amax: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            amax = amax.max(a[(i, j)].norm());
            res = res.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    res / (1.0 + amax)
}

/// Eigendecomposition of a Hermitian matrix: ascending-ish eigenvalues and a
/// unitary eigenvector matrix Q with A = Q diag(ev) Q^dag.
pub fn eig_hermitian(a: &CMat) -> (Vec<f64>, CMat) {
    let es = nalgebra::linalg::SymmetricEigen::new(a.clone());
    (es.eigenvalues.iter().cloned().collect(), es.eigenvectors)
}

fn reconstruct(ev: &[f64], q: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let n = ev.len();
    let mut scaled = q.clone();
    for j in 0..n {
        let s = C::new(f(ev[j]), 0.0);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    &scaled * q.adjoint()
}

/// Apply a real scalar function to a Hermitian matrix through its spectrum.
pub fn func_hermitian(a: &CMat, f: impl Fn(f64) -> f64) -> Result<CMat, HsError> {
    let res = herm_residual(a);
    if res >= HERM_TOL {
        return Err(HsError::NotHermitian(res));
    }
    let (ev, q) = eig_hermitian(a);
    Ok(reconstruct(&ev, &q, f))
}

/// Same but requires a PSD spectrum (tiny negatives are clamped to zero).
pub fn func_psd(a: &CMat, f: impl Fn(f64) -> f64) -> Result<CMat, HsError> {
    let res = herm_residual(a);
    if res >= HERM_TOL {
        return Err(HsError::NotHermitian(res));
    }
    let (ev, q) = eig_hermitian(a);
    let scale = 1.0 + fro(a);
    let min = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOL * scale {
        return Err(HsError::NotPsd(min));
    }
    Ok(reconstruct(&ev, &q, |l| f(l.max(0.0))))
}

/// exp(A) for anti-Hermitian A, via the Hermitian eigendecomposition of -iA.
/// The result is unitary.
pub fn exp_antihermitian(a: &CMat) -> Result<CMat, HsError> {
    let h = a.map(|x| x * C::new(0.0, -1.0));
    let res = herm_residual(&h);
    if res >= HERM_TOL * 100.0 {
        return Err(HsError::NotHermitian(res));
    }
    let (ev, q) = eig_hermitian(&h);
    let n = ev.len();
    let mut scaled = q.clone();
    for j in 0..n {
        let s = C::new(0.0, ev[j]).exp();
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    Ok(&scaled * q.adjoint())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultKind {
    K1,
    K2,
    K3,
    /// |k|
    Abs,
    /// |k| + |k|^2 / 2
    AbsPlusHalfSq,
}

/// Diagonal multiplication operator for the chosen momentum function.
pub fn mult_operator(grid: &MomentumGrid, which: MultKind) -> HSOperator {
    let diag = |i: usize| -> f64 {
        match which {
            MultKind::K1 => grid.k[i][0],
            MultKind::K2 => grid.k[i][1],
            MultKind::K3 => grid.k[i][2],
            MultKind::Abs => grid.kabs[i],
            MultKind::AbsPlusHalfSq => grid.kabs[i] + 0.5 * grid.kabs_sq[i],
        }
    };
    let mut mat = CMat::zeros(grid.dim, grid.dim);
    for i in 0..grid.dim {
        mat[(i, i)] = C::new(diag(i), 0.0);
    }
    let psd = matches!(which, MultKind::Abs | MultKind::AbsPlusHalfSq);
    HSOperator {
        mat,
        hermitian: true,
        psd,
    }
}

/// (tr A, tr(AB) with the product actually formed, hs_norm A).
pub fn trace_forms(a: &HSOperator, b: &HSOperator) -> Result<(C, C, f64), HsError> {
    if a.mat.nrows() != b.mat.nrows() {
        return Err(HsError::DimMismatch(a.mat.nrows(), b.mat.nrows()));
    }
    let prod = &a.mat * &b.mat;
    Ok((a.mat.trace(), prod.trace(), fro(&a.mat)))
}

/// (z+1)^{-1} for PSD z; spectrum lands in (0, 1].
pub fn resolvent_shift(z: &HSOperator) -> Result<HSOperator, HsError> {
    let mat = func_psd(&z.mat, |l| 1.0 / (l + 1.0))?;
    Ok(HSOperator {
        mat,
        hermitian: true,
        psd: true,
    })
}

pub fn sqrt_psd(a: &HSOperator) -> Result<HSOperator, HsError> {
    let mat = func_psd(&a.mat, f64::sqrt)?;
    Ok(HSOperator {
        mat,
        hermitian: true,
        psd: true,
    })
}

/// V = ((z+1)^{1/2} - (z+1)^{-1/2}) / 2, the PSD block reaching z through
/// z = 2V^2 + 2V sqrt(1+V^2).
pub fn v_from_z(z: &HSOperator) -> Result<HSOperator, HsError> {
    let mat = func_psd(&z.mat, |l| 0.5 * ((l + 1.0).sqrt() - 1.0 / (l + 1.0).sqrt()))?;
    Ok(HSOperator {
        mat,
        hermitian: true,
        psd: true,
    })
}

/// Inverse of v_from_z.
pub fn z_from_v(v: &HSOperator) -> Result<HSOperator, HsError> {
    let mat = func_psd(&v.mat, |l| 2.0 * l * l + 2.0 * l * (1.0 + l * l).sqrt())?;
    Ok(HSOperator {
        mat,
        hermitian: true,
        psd: true,
    })
}

/// (Jf)_i = conj(f_{i*}).
pub fn j_vec(antipode: &[usize], f: &CVec) -> CVec {
    CVec::from_fn(f.len(), |i, _| f[antipode[i]].conj())
}

/// Linear operator JAJ: (JAJ)_{ij} = conj(A_{i* j*}).
pub fn conjugate_by_j(antipode: &[usize], a: &CMat) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| {
        a[(antipode[i], antipode[j])].conj()
    })
}

/// Rows-permuted conjugate P conj(X), i.e. the matrix of J o X when X is the
/// matrix of a linear map (row i of the result is row i* of conj X).
pub fn p_conj(antipode: &[usize], x: &CMat) -> CMat {
    CMat::from_fn(x.nrows(), x.ncols(), |i, j| x[(antipode[i], j)].conj())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectMode {
    Psd,
    JSymmetric,
    Both,
}

/// HS-norm-nearest point of the PSD cone (eigenvalue clamp), the J-symmetric
/// subspace (average with JAJ), or their intersection (symmetrize then clamp).
pub fn project(antipode: &[usize], a: &HSOperator, mode: ProjectMode) -> Result<HSOperator, HsError> {
    let res = herm_residual(&a.mat);
    if res >= HERM_TOL {
        return Err(HsError::NotHermitian(res));
    }
    let mat = match mode {
        ProjectMode::Psd => func_hermitian(&a.mat, |l| l.max(0.0))?,
        ProjectMode::JSymmetric => (&a.mat + conjugate_by_j(antipode, &a.mat)) * C::new(0.5, 0.0),
        ProjectMode::Both => {
            let s = (&a.mat + conjugate_by_j(antipode, &a.mat)) * C::new(0.5, 0.0);
            func_hermitian(&s, |l| l.max(0.0))?
        }
    };
    Ok(HSOperator::analyze(mat))
}

/// Bogolubov blocks (U, V) of B = (U JVJ; V JUJ).
#[derive(Debug, Clone)]
pub struct BogolubovPair {
    pub u: CMat,
    pub v: CMat,
}

/// Frobenius residuals of the four block relations:
/// U*U - V*V = 1,  U*JV = V*JU,  UU* - JVV*J = 1,  JUV* = VU*J.
pub fn bogolubov_residuals(antipode: &[usize], b: &BogolubovPair) -> [f64; 4] {
    let dim = b.u.nrows();
    let id = CMat::identity(dim, dim);
    let r1 = b.u.adjoint() * &b.u - b.v.adjoint() * &b.v - &id;
    let r2 = b.u.adjoint() * p_conj(antipode, &b.v) - b.v.adjoint() * p_conj(antipode, &b.u);
    let vv = &b.v * b.v.adjoint();
    let r3 = &b.u * b.u.adjoint() - conjugate_by_j(antipode, &vv) - &id;
    let uv = &b.u * b.v.adjoint();
    let vu = &b.v * b.u.adjoint();
    let r4 = p_conj(antipode, &uv) - CMat::from_fn(dim, dim, |i, j| vu[(i, antipode[j])]);
    [fro(&r1), fro(&r2), fro(&r3), fro(&r4)]
}

/// Relative scale used when judging relation residuals.
pub fn bogolubov_scale(b: &BogolubovPair) -> f64 {
    1.0 + fro(&b.u).powi(2) + fro(&b.v).powi(2)
}

/// Composition of two Bogolubov maps (matrix product of the doubled blocks).
pub fn compose_bogolubov(antipode: &[usize], a: &BogolubovPair, b: &BogolubovPair) -> BogolubovPair {
    let u = &a.u * &b.u + conjugate_by_j(antipode, &a.v) * &b.v;
    let v = &a.v * &b.u + conjugate_by_j(antipode, &a.u) * &b.v;
    BogolubovPair { u, v }
}

pub fn random_hermitian(dim: usize, rng: &mut impl Rng) -> CMat {
    let m = CMat::from_fn(dim, dim, |_, _| {
        C::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
    });
    (&m + m.adjoint()) * C::new(0.5, 0.0)
}

pub fn random_psd(dim: usize, rng: &mut impl Rng, scale: f64) -> CMat {
    let m = CMat::from_fn(dim, dim, |_, _| {
        C::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
    });
    let a = m.adjoint() * &m;
    let n = fro(&a);
    if n == 0.0 {
        a
    } else {
        a * C::new(scale / n, 0.0)
    }
}

pub fn random_cvec(dim: usize, rng: &mut impl Rng) -> CVec {
    CVec::from_fn(dim, |_, _| {
        C::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
    })
}

pub fn random_unitary(dim: usize, rng: &mut impl Rng) -> CMat {
    let m = CMat::from_fn(dim, dim, |_, _| {
        C::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
    });
    m.qr().q()
}

/// Sample a valid pair as W_u B_xi W_v: a squeeze factor U = cosh(xi),
/// V = P sinh(xi) with xi random real symmetric (Frobenius norm = scale),
/// sandwiched between two one-particle unitaries (V-block zero).
pub fn random_bogolubov(antipode: &[usize], seed: u64, scale: f64) -> BogolubovPair {
    let dim = antipode.len();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut xi = CMat::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..=i {
            let x = C::new(rng.gen::<f64>() * 2.0 - 1.0, 0.0);
            xi[(i, j)] = x;
            xi[(j, i)] = x;
        }
    }
    let n = fro(&xi);
    let factor = if n > 0.0 { scale / n } else { 0.0 };
    xi *= C::new(factor, 0.0);
    let cosh_xi = func_hermitian(&xi, f64::cosh).expect("xi is Hermitian");
    let sinh_xi = func_hermitian(&xi, f64::sinh).expect("xi is Hermitian");
    let b_xi = BogolubovPair {
        u: cosh_xi,
        v: CMat::from_fn(dim, dim, |i, j| sinh_xi[(antipode[i], j)]),
    };
    let w_u = BogolubovPair {
        u: random_unitary(dim, &mut rng),
        v: CMat::zeros(dim, dim),
    };
    let w_v = BogolubovPair {
        u: random_unitary(dim, &mut rng),
        v: CMat::zeros(dim, dim),
    };
    compose_bogolubov(antipode, &w_u, &compose_bogolubov(antipode, &b_xi, &w_v))
}

// ---------------------------------------------------------------------------
// checkpoint format for (z, eta)

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    dim: usize,
    grid: GridParams,
    z_real: Vec<f64>,
    z_imag: Vec<f64>,
    eta_real: Vec<f64>,
    eta_imag: Vec<f64>,
}

fn push_floats(out: &mut String, xs: impl Iterator<Item = f64>) {
    out.push('[');
    let mut first = true;
    for x in xs {
        if !first {
            out.push(',');
        }
        first = false;
        out.push_str(&format!("{x:e}"));
    }
    out.push(']');
}

/// Serialize (z, eta) with 17 significant digits so f64 round-trips bitwise.
pub fn checkpoint_to_string(grid: &GridParams, z: &CMat, eta: &CVec) -> String {
    let dim = z.nrows();
    let mut s = String::new();
    s.push_str(&format!("{{\"dim\":{dim},\"grid\":{{"));
    s.push_str(&format!(
        "\"sigma\":{:e},\"lambda\":{:e},\"n_r\":{},\"n_theta\":{},\"n_phi\":{}}}",
        grid.sigma, grid.lambda, grid.n_r, grid.n_theta, grid.n_phi
    ));
    s.push_str(",\"z_real\":");
    push_floats(&mut s, (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).map(|(i, j)| z[(i, j)].re));
    s.push_str(",\"z_imag\":");
    push_floats(&mut s, (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).map(|(i, j)| z[(i, j)].im));
    s.push_str(",\"eta_real\":");
    push_floats(&mut s, eta.iter().map(|c| c.re));
    s.push_str(",\"eta_imag\":");
    push_floats(&mut s, eta.iter().map(|c| c.im));
    s.push('}');
    s
}

pub fn checkpoint_from_str(s: &str) -> Result<(GridParams, CMat, CVec), HsError> {
    let f: CheckpointFile =
        serde_json::from_str(s).map_err(|e| HsError::BadCheckpoint(e.to_string()))?;
    let d = f.dim;
    if f.z_real.len() != d * d
        || f.z_imag.len() != d * d
        || f.eta_real.len() != d
        || f.eta_imag.len() != d
    {
        return Err(HsError::BadCheckpoint("array lengths do not match dim".into()));
    }
    let z = CMat::from_fn(d, d, |i, j| C::new(f.z_real[i * d + j], f.z_imag[i * d + j]));
    let eta = CVec::from_fn(d, |i, _| C::new(f.eta_real[i], f.eta_imag[i]));
    Ok((f.grid, z, eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    fn scalar(x: f64) -> HSOperator {
        HSOperator::analyze(CMat::from_element(1, 1, C::new(x, 0.0)))
    }

    #[test]
    fn analyze_flags() {
        let mut r = rng(1);
        let h = random_hermitian(6, &mut r);
        let op = HSOperator::analyze(h.clone());
        assert!(op.hermitian);
        let p = HSOperator::analyze(random_psd(6, &mut r, 2.0));
        assert!(p.hermitian && p.psd);
        let mut nh = h;
        nh[(0, 1)] += C::new(1e-6, 0.0);
        assert!(!HSOperator::analyze(nh).hermitian);
    }

    #[test]
    fn mult_operator_parity_and_spectrum() {
        let g = build_grid(1.0, 2.0, 2, 2, 4).unwrap();
        for which in [MultKind::K1, MultKind::K2, MultKind::K3] {
            let k = mult_operator(&g, which);
            let jkj = conjugate_by_j(&g.antipode, &k.mat);
            assert_eq!(jkj, -&k.mat, "J k J = -k must be exact");
        }
        let abs = mult_operator(&g, MultKind::Abs);
        for i in 0..g.dim {
            let l = abs.mat[(i, i)].re;
            assert!(l >= 1.0 && l <= 2.0);
        }
        // sum of squares identity, exact
        let (k1, k2, k3) = (
            mult_operator(&g, MultKind::K1),
            mult_operator(&g, MultKind::K2),
            mult_operator(&g, MultKind::K3),
        );
        for i in 0..g.dim {
            let s = k1.mat[(i, i)].re * k1.mat[(i, i)].re
                + k2.mat[(i, i)].re * k2.mat[(i, i)].re
                + k3.mat[(i, i)].re * k3.mat[(i, i)].re;
            assert_eq!(s, g.kabs_sq[i]);
        }
    }

    #[test]
    fn trace_forms_basics() {
        let mut r = rng(2);
        let a = HSOperator::analyze(random_hermitian(8, &mut r));
        let b = HSOperator::analyze(random_hermitian(8, &mut r));
        let id = HSOperator::analyze(CMat::identity(8, 8));
        let (tr, _, _) = trace_forms(&id, &id).unwrap();
        assert!((tr - C::new(8.0, 0.0)).norm() < 1e-14);
        let (_, ab, na) = trace_forms(&a, &b).unwrap();
        let (_, ba, nb) = trace_forms(&b, &a).unwrap();
        assert!((ab - ba).norm() < 1e-12 * na * nb);
        // Cauchy-Schwarz for the HS inner product
        let adag_b = (a.mat.adjoint() * &b.mat).trace();
        assert!(adag_b.norm() <= na * nb * (1.0 + 1e-12));
    }

    #[test]
    fn resolvent_and_sqrt() {
        let mut r = rng(3);
        let z = HSOperator::analyze(random_psd(10, &mut r, 3.0));
        let rs = resolvent_shift(&z).unwrap();
        let id = CMat::identity(10, 10);
        let res = (&z.mat + &id) * &rs.mat - &id;
        assert!(fro(&res) < 1e-12);
        let (ev, _) = eig_hermitian(&rs.mat);
        assert!(ev.iter().all(|&l| l > 0.0 && l <= 1.0 + 1e-12));
        assert!((resolvent_shift(&scalar(3.0)).unwrap().mat[(0, 0)].re - 0.25).abs() < 1e-15);
        assert!(
            fro(&(resolvent_shift(&scalar(0.0)).unwrap().mat - CMat::identity(1, 1))) < 1e-15
        );

        let s = sqrt_psd(&z).unwrap();
        assert!(fro(&(&s.mat * &s.mat - &z.mat)) < 1e-11 * (1.0 + fro(&z.mat)));
        assert!((sqrt_psd(&scalar(9.0)).unwrap().mat[(0, 0)].re - 3.0).abs() < 1e-14);
        let neg = HSOperator::analyze(CMat::from_element(1, 1, C::new(-1.0, 0.0)));
        assert!(sqrt_psd(&neg).is_err());
    }

    #[test]
    fn v_from_z_scalar_checks() {
        let v = v_from_z(&scalar(3.0)).unwrap().mat[(0, 0)].re;
        assert!((v - 0.75).abs() < 1e-15);
        assert!((v * v - 9.0 / 16.0).abs() < 1e-15);
        assert!((v * (1.0 + v * v).sqrt() - 0.9375).abs() < 1e-14);
        let d = v - (1.0 + v * v).sqrt();
        assert!((d * d - 0.25).abs() < 1e-14);
        assert!(fro(&v_from_z(&scalar(0.0)).unwrap().mat) < 1e-15);
    }

    #[test]
    fn v_z_parametrization_identities() {
        let mut r = rng(4);
        let z = HSOperator::analyze(random_psd(16, &mut r, 4.0));
        let v = v_from_z(&z).unwrap();
        let id = CMat::identity(16, 16);
        let vsq = &v.mat * &v.mat;
        let rhs1 = func_psd(&z.mat, |l| l * l / (4.0 * (l + 1.0))).unwrap();
        assert!(fro(&(&vsq - &rhs1)) < 1e-10 * (1.0 + fro(&rhs1)));
        let sq = sqrt_psd(&HSOperator::analyze(&id + &vsq)).unwrap();
        let lhs2 = &v.mat * &sq.mat;
        let rhs2 = func_psd(&z.mat, |l| (l + 2.0) * l / (4.0 * (l + 1.0))).unwrap();
        assert!(fro(&(&lhs2 - &rhs2)) < 1e-10 * (1.0 + fro(&rhs2)));
        let d = &v.mat - &sq.mat;
        let lhs3 = &d * &d;
        let rhs3 = resolvent_shift(&z).unwrap();
        assert!(fro(&(&lhs3 - &rhs3.mat)) < 1e-10 * (1.0 + fro(&rhs3.mat)));
        // round trip
        let z2 = z_from_v(&v).unwrap();
        assert!(fro(&(&z2.mat - &z.mat)) < 1e-10 * (1.0 + fro(&z.mat)));
    }

    #[test]
    fn conjugate_by_j_properties() {
        let g = build_grid(1.0, 2.0, 1, 2, 4).unwrap();
        let mut r = rng(5);
        let a = random_hermitian(g.dim, &mut r);
        let b = random_hermitian(g.dim, &mut r);
        let id = CMat::identity(g.dim, g.dim);
        assert_eq!(conjugate_by_j(&g.antipode, &id), id);
        let ja = conjugate_by_j(&g.antipode, &a);
        let jb = conjugate_by_j(&g.antipode, &b);
        let jab = conjugate_by_j(&g.antipode, &(&a * &b));
        assert!(fro(&(&ja * &jb - jab)) < 1e-12 * (1.0 + fro(&a) * fro(&b)));
        let jja = conjugate_by_j(&g.antipode, &ja);
        assert_eq!(jja, a);
        let ja_dag = conjugate_by_j(&g.antipode, &a.adjoint());
        assert!(fro(&(ja.adjoint() - ja_dag)) < 1e-14);
    }

    #[test]
    fn project_modes() {
        let g = build_grid(1.0, 2.0, 1, 2, 2).unwrap();
        let mut r = rng(6);
        let a = HSOperator::analyze(random_hermitian(g.dim, &mut r));
        for mode in [ProjectMode::Psd, ProjectMode::JSymmetric, ProjectMode::Both] {
            let p = project(&g.antipode, &a, mode).unwrap();
            let pp = project(&g.antipode, &p, mode).unwrap();
            assert!(fro(&(&pp.mat - &p.mat)) < 1e-12 * (1.0 + fro(&p.mat)), "idempotence {mode:?}");
        }
        let p = project(&g.antipode, &a, ProjectMode::Psd).unwrap();
        assert!(p.psd);
        let (ev, _) = eig_hermitian(&p.mat);
        assert!(ev.iter().all(|&l| l >= -1e-12));
        let s = project(&g.antipode, &a, ProjectMode::JSymmetric).unwrap();
        let js = conjugate_by_j(&g.antipode, &s.mat);
        assert!(fro(&(&js - &s.mat)) < 1e-12);
        let b = project(&g.antipode, &a, ProjectMode::Both).unwrap();
        assert!(b.psd);
        let jb = conjugate_by_j(&g.antipode, &b.mat);
        assert!(fro(&(&jb - &b.mat)) < 1e-12 * (1.0 + fro(&b.mat)));

        let mut d = CMat::zeros(2, 2);
        d[(0, 0)] = C::new(1.0, 0.0);
        d[(1, 1)] = C::new(-2.0, 0.0);
        let clip = project(&[0, 1], &HSOperator::analyze(d), ProjectMode::Psd).unwrap();
        assert!((clip.mat[(0, 0)].re - 1.0).abs() < 1e-14);
        assert!(clip.mat[(1, 1)].norm() < 1e-14);

        let psd_in = HSOperator::analyze(random_psd(g.dim, &mut r, 1.0));
        let kept = project(&g.antipode, &psd_in, ProjectMode::Psd).unwrap();
        assert!(fro(&(&kept.mat - &psd_in.mat)) < 1e-12 * (1.0 + fro(&psd_in.mat)));
    }

    #[test]
    fn random_bogolubov_satisfies_relations() {
        let g = build_grid(1.0, 2.0, 1, 2, 4).unwrap();
        for seed in 0..5u64 {
            let b = random_bogolubov(&g.antipode, seed, 0.8);
            let res = bogolubov_residuals(&g.antipode, &b);
            let scale = bogolubov_scale(&b);
            for (i, r) in res.iter().enumerate() {
                assert!(r < &(1e-10 * scale), "relation {} residual {r:.3e} seed {seed}", i + 1);
            }
        }
        let b0 = random_bogolubov(&g.antipode, 7, 0.0);
        assert!(fro(&b0.v) < 1e-12);
        let res = bogolubov_residuals(&g.antipode, &b0);
        assert!(res.iter().all(|r| *r < 1e-12));
        // determinism
        let b1 = random_bogolubov(&g.antipode, 9, 0.5);
        let b2 = random_bogolubov(&g.antipode, 9, 0.5);
        assert_eq!(b1.u, b2.u);
        assert_eq!(b1.v, b2.v);
    }

    #[test]
    fn exp_antihermitian_is_unitary() {
        let mut r = rng(8);
        let h = random_hermitian(6, &mut r);
        let a = h.map(|x| x * C::new(0.0, 1.0));
        let u = exp_antihermitian(&a).unwrap();
        let res = u.adjoint() * &u - CMat::identity(6, 6);
        assert!(fro(&res) < 1e-12);
        let z = exp_antihermitian(&CMat::zeros(4, 4)).unwrap();
        assert_eq!(z, CMat::identity(4, 4));
    }

    #[test]
    fn checkpoint_roundtrip_bitwise() {
        let mut r = rng(9);
        let gp = GridParams {
            sigma: 1.0,
            lambda: 2.0,
            n_r: 1,
            n_theta: 1,
            n_phi: 2,
        };
        let z = random_hermitian(4, &mut r);
        let eta = random_cvec(4, &mut r);
        let s = checkpoint_to_string(&gp, &z, &eta);
        let (gp2, z2, eta2) = checkpoint_from_str(&s).unwrap();
        assert_eq!(gp, gp2);
        assert_eq!(z, z2, "checkpoint must round-trip bitwise");
        assert_eq!(eta, eta2);
        assert!(checkpoint_from_str("{\"dim\":1}").is_err());
    }
}
