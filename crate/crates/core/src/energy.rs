//! Energy functionals on quasifree trial states.
//!
//! The same energy is exposed in several parametrizations: through a full
//! Bogolubov pair (U, V), through the positive block V alone, through the
//! operator z = 2V^2 + 2V sqrt(1+V^2), through a coherent displacement only,
//! and through a squeeze generator r with cosh/sinh occupation blocks.  They
//! agree on their common domains, which the tests check against each other.

use crate::grid::{coupling_vectors, MomentumGrid};
use crate::hsops::{
    bogolubov_residuals, bogolubov_scale, conjugate_by_j, func_hermitian, func_psd, herm_residual,
    mult_operator, p_conj, random_bogolubov, random_cvec, BogolubovPair, HsError, MultKind,
    HERM_TOL,
};
use crate::{fro, C, CMat, CVec};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("blocks do not satisfy the Bogolubov relations (residuals {0:?})")]
    BadPair([f64; 4]),
    #[error("a scalar that must be real has imaginary part {0:.3e}")]
    NotReal(f64),
    #[error("squeeze generator must commute with the involution (residual {0:.3e})")]
    NotJCommuting(f64),
    #[error("antipode table is not an involution")]
    BadAntipode,
    #[error(transparent)]
    Operator(#[from] HsError),
}

/// One-photon data the functionals are built from: the three momentum
/// components, the dispersion, and the coupling vectors, all over a common
/// basis with an antipodal involution i -> i*.
#[derive(Debug, Clone)]
pub struct ModelSpace {
    pub dim: usize,
    pub antipode: Vec<usize>,
    pub k: [CMat; 3],
    /// dispersion |k|
    pub omega: CMat,
    /// |k| + (k_1^2 + k_2^2 + k_3^2)/2
    pub omega_plus: CMat,
    pub g: [CVec; 3],
}

impl ModelSpace {
    pub fn from_grid(grid: &MomentumGrid, g: f64) -> ModelSpace {
        ModelSpace {
            dim: grid.dim,
            antipode: grid.antipode.clone(),
            k: [
                mult_operator(grid, MultKind::K1).mat,
                mult_operator(grid, MultKind::K2).mat,
                mult_operator(grid, MultKind::K3).mat,
            ],
            omega: mult_operator(grid, MultKind::Abs).mat,
            omega_plus: mult_operator(grid, MultKind::AbsPlusHalfSq).mat,
            g: coupling_vectors(grid, g),
        }
    }

    /// Assemble a small model by hand: arbitrary Hermitian momentum
    /// components and dispersion over any involutive antipode table.
    pub fn toy(
        antipode: Vec<usize>,
        k: [CMat; 3],
        omega: CMat,
        g: [CVec; 3],
    ) -> Result<ModelSpace, EnergyError> {
        let dim = antipode.len();
        if antipode.iter().any(|&j| j >= dim) || (0..dim).any(|i| antipode[antipode[i]] != i) {
            return Err(EnergyError::BadAntipode);
        }
        for m in k.iter().chain(std::iter::once(&omega)) {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(EnergyError::DimMismatch(m.nrows(), dim));
            }
            let r = herm_residual(m);
            if r >= HERM_TOL {
                return Err(EnergyError::Operator(HsError::NotHermitian(r)));
            }
        }
        for v in &g {
            if v.len() != dim {
                return Err(EnergyError::DimMismatch(v.len(), dim));
            }
        }
        let ksq = &k[0] * &k[0] + &k[1] * &k[1] + &k[2] * &k[2];
        let omega_plus = &omega + ksq * C::new(0.5, 0.0);
        Ok(ModelSpace {
            dim,
            antipode,
            k,
            omega,
            omega_plus,
            g,
        })
    }
}

/// Energy split into its summands.  Entries carry their prefactors, so the
/// parts add up to `total` exactly: per-nu squares of the momentum brackets,
/// the off-diagonal pairing terms, the quadratic-in-k traces, the field
/// terms, and the photon number energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub per_nu_square: [f64; 3],
    pub per_nu_offdiag: [f64; 3],
    pub per_nu_quad: [f64; 3],
    pub per_nu_field: [f64; 3],
    pub photon_energy: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn assemble(
        square: [f64; 3],
        offdiag: [f64; 3],
        quad: [f64; 3],
        field: [f64; 3],
        photon: f64,
    ) -> Self {
        let mut total = 0.0;
        for nu in 0..3 {
            total += square[nu] + offdiag[nu] + quad[nu] + field[nu];
        }
        total += photon;
        EnergyBreakdown {
            per_nu_square: square,
            per_nu_offdiag: offdiag,
            per_nu_quad: quad,
            per_nu_field: field,
            photon_energy: photon,
            total,
        }
    }
}

fn real_checked(c: C) -> Result<f64, EnergyError> {
    if c.im.abs() >= 1e-10 * (1.0 + c.re.abs()) {
        return Err(EnergyError::NotReal(c.im));
    }
    Ok(c.re)
}

fn check_dim(ms: &ModelSpace, n: usize) -> Result<(), EnergyError> {
    if n != ms.dim {
        return Err(EnergyError::DimMismatch(n, ms.dim));
    }
    Ok(())
}

/// 0.5 * sum_nu ||G_nu||^2, the energy of the trivial state.
pub fn half_coupling_norm(ms: &ModelSpace) -> f64 {
    0.5 * ms.g.iter().map(|v| v.norm_squared()).sum::<f64>()
}

/// Field vectors w_nu = G_nu + k_nu eta.
pub fn w_vectors(ms: &ModelSpace, eta: &CVec) -> [CVec; 3] {
    std::array::from_fn(|nu| &ms.g[nu] + &ms.k[nu] * eta)
}

/// Shared core of the (U, V) and cosh/sinh forms: the energy in terms of the
/// occupation block a = V^dag V and the antilinear pairing block given by the
/// matrix m (acting as f -> m conj f).
fn full_core(ms: &ModelSpace, a: &CMat, m: &CMat, eta: &CVec) -> Result<EnergyBreakdown, EnergyError> {
    let id = CMat::identity(ms.dim, ms.dim);
    let one_plus_a = &id + a;
    let one_plus_2a = &id + a * C::new(2.0, 0.0);
    let mut square = [0.0; 3];
    let mut offdiag = [0.0; 3];
    let mut quad = [0.0; 3];
    let mut field = [0.0; 3];
    for nu in 0..3 {
        let k = &ms.k[nu];
        let keta = k * eta;
        let w = &ms.g[nu] + &keta;
        let bracket = real_checked((k * a).trace())?
            + real_checked(eta.dotc(&keta))?
            + 2.0 * eta.dotc(&ms.g[nu]).re;
        square[nu] = 0.5 * bracket * bracket;
        let pair_sq = m * k.conjugate() * m.conjugate() * k;
        let t_pair = real_checked(pair_sq.trace())?;
        let w_pair = w.dotc(&(m * w.conjugate())).re;
        offdiag[nu] = 0.5 * (t_pair + 2.0 * w_pair);
        quad[nu] = 0.5 * real_checked((k * a * k * &one_plus_a).trace())?;
        field[nu] = 0.5 * real_checked(w.dotc(&(&one_plus_2a * &w)))?;
    }
    let photon =
        real_checked((&ms.omega * a).trace())? + real_checked(eta.dotc(&(&ms.omega * eta)))?;
    Ok(EnergyBreakdown::assemble(square, offdiag, quad, field, photon))
}

/// Energy of the pure quasifree state given by a Bogolubov pair and a
/// displacement, at total momentum zero.  The pair relations are validated
/// before evaluation.
pub fn energy_full(
    ms: &ModelSpace,
    pair: &BogolubovPair,
    eta: &CVec,
) -> Result<EnergyBreakdown, EnergyError> {
    check_dim(ms, pair.u.nrows())?;
    check_dim(ms, pair.v.nrows())?;
    check_dim(ms, eta.len())?;
    let res = bogolubov_residuals(&ms.antipode, pair);
    let scale = bogolubov_scale(pair);
    if res.iter().any(|r| *r >= 1e-10 * scale) {
        return Err(EnergyError::BadPair(res));
    }
    let a = pair.v.adjoint() * &pair.v;
    let m = pair.v.adjoint() * p_conj(&ms.antipode, &pair.u);
    full_core(ms, &a, &m, eta)
}

/// Energy through the positive block V alone (V Hermitian PSD).
pub fn energy_reduced_v(
    ms: &ModelSpace,
    v: &CMat,
    eta: &CVec,
) -> Result<EnergyBreakdown, EnergyError> {
    check_dim(ms, v.nrows())?;
    check_dim(ms, eta.len())?;
    let vw = func_psd(v, |l| l * (1.0 + l * l).sqrt())?;
    let dsq = func_psd(v, |l| {
        let d = l - (1.0 + l * l).sqrt();
        d * d
    })?;
    let vsq = v * v;
    let id = CMat::identity(ms.dim, ms.dim);
    let one_plus_vsq = &id + &vsq;
    let mut square = [0.0; 3];
    let mut offdiag = [0.0; 3];
    let mut quad = [0.0; 3];
    let mut field = [0.0; 3];
    for nu in 0..3 {
        let k = &ms.k[nu];
        let keta = k * eta;
        let w = &ms.g[nu] + &keta;
        let bracket = real_checked((k * &vsq).trace())?
            + real_checked(eta.dotc(&keta))?
            + 2.0 * eta.dotc(&ms.g[nu]).re;
        square[nu] = 0.5 * bracket * bracket;
        let kvw = k * &vw;
        offdiag[nu] = -0.5 * real_checked((&kvw * &kvw).trace())?;
        quad[nu] = 0.5 * real_checked((k * &vsq * k * &one_plus_vsq).trace())?;
        field[nu] = 0.5 * real_checked(w.dotc(&(&dsq * &w)))?;
    }
    let photon =
        real_checked((&ms.omega * &vsq).trace())? + real_checked(eta.dotc(&(&ms.omega * eta)))?;
    Ok(EnergyBreakdown::assemble(square, offdiag, quad, field, photon))
}

/// Momentum bracket values of the z parametrization:
/// b_nu = tr[k_nu (z+1)^{-1} z^2]/4 + <eta|k_nu eta> + 2 Re <eta|G_nu>.
pub fn bracket_values(ms: &ModelSpace, z: &CMat, eta: &CVec) -> Result<[f64; 3], EnergyError> {
    check_dim(ms, z.nrows())?;
    check_dim(ms, eta.len())?;
    let r = func_psd(z, |l| 1.0 / (l + 1.0))?;
    let rzz = &r * z * z;
    let mut b = [0.0; 3];
    for nu in 0..3 {
        let k = &ms.k[nu];
        b[nu] = 0.25 * real_checked((k * &rzz).trace())?
            + real_checked(eta.dotc(&(k * eta)))?
            + 2.0 * eta.dotc(&ms.g[nu]).re;
    }
    Ok(b)
}

/// Energy through z = 2V^2 + 2V sqrt(1+V^2) (z Hermitian PSD), at total
/// momentum p.
pub fn energy_reduced_z(
    ms: &ModelSpace,
    z: &CMat,
    eta: &CVec,
    p: [f64; 3],
) -> Result<EnergyBreakdown, EnergyError> {
    check_dim(ms, z.nrows())?;
    check_dim(ms, eta.len())?;
    let r = func_psd(z, |l| 1.0 / (l + 1.0))?;
    let rz = &r * z;
    let rzz = &rz * z;
    let mut square = [0.0; 3];
    let mut offdiag = [0.0; 3];
    let mut quad = [0.0; 3];
    let mut field = [0.0; 3];
    for nu in 0..3 {
        let k = &ms.k[nu];
        let keta = k * eta;
        let w = &ms.g[nu] + &keta;
        let bracket = 0.25 * real_checked((k * &rzz).trace())?
            + real_checked(eta.dotc(&keta))?
            + 2.0 * eta.dotc(&ms.g[nu]).re;
        let shifted = bracket - p[nu];
        square[nu] = 0.5 * shifted * shifted;
        offdiag[nu] = -0.125 * real_checked((k * z * k * &rz).trace())?;
        quad[nu] = 0.125 * real_checked((k * k * &rzz).trace())?;
        field[nu] = 0.5 * real_checked(w.dotc(&(&r * &w)))?;
    }
    let photon = 0.25 * real_checked((&ms.omega * &rzz).trace())?
        + real_checked(eta.dotc(&(&ms.omega * eta)))?;
    Ok(EnergyBreakdown::assemble(square, offdiag, quad, field, photon))
}

/// Energy of a purely coherent state (no squeezing) at total momentum p.
pub fn energy_coherent(
    ms: &ModelSpace,
    eta: &CVec,
    p: [f64; 3],
) -> Result<EnergyBreakdown, EnergyError> {
    check_dim(ms, eta.len())?;
    let mut square = [0.0; 3];
    let mut field = [0.0; 3];
    for nu in 0..3 {
        let k = &ms.k[nu];
        let keta = k * eta;
        let w = &ms.g[nu] + &keta;
        let bracket = real_checked(eta.dotc(&keta))? + 2.0 * eta.dotc(&ms.g[nu]).re;
        let shifted = bracket - p[nu];
        square[nu] = 0.5 * shifted * shifted;
        field[nu] = 0.5 * w.norm_squared();
    }
    let photon = real_checked(eta.dotc(&(&ms.omega * eta)))?;
    Ok(EnergyBreakdown::assemble(square, [0.0; 3], [0.0; 3], field, photon))
}

/// Energy through a Hermitian squeeze generator r that commutes with the
/// involution: occupation block (cosh(2r) - 1)/2 and pairing block
/// sinh(2r)/2 composed with the antipode.
pub fn energy_coshsinh(
    ms: &ModelSpace,
    r_gen: &CMat,
    eta: &CVec,
) -> Result<EnergyBreakdown, EnergyError> {
    check_dim(ms, r_gen.nrows())?;
    check_dim(ms, eta.len())?;
    let jr = conjugate_by_j(&ms.antipode, r_gen);
    let resj = fro(&(&jr - r_gen)) / (1.0 + fro(r_gen));
    if resj >= 1e-10 {
        return Err(EnergyError::NotJCommuting(resj));
    }
    let c2 = func_hermitian(r_gen, |l| (2.0 * l).cosh())?;
    let s2 = func_hermitian(r_gen, |l| (2.0 * l).sinh())?;
    let id = CMat::identity(ms.dim, ms.dim);
    let a = (&c2 - &id) * C::new(0.5, 0.0);
    let m = CMat::from_fn(ms.dim, ms.dim, |i, j| {
        s2[(i, ms.antipode[j])] * C::new(0.5, 0.0)
    });
    full_core(ms, &a, &m, eta)
}

/// Margins of the two pointwise bounds that compress a general pair onto its
/// positive block: the field bound <w|f(V*V)w> >= |Re <w|V*JU w>| and the
/// trace bound tr[f(V*V) k f(V*V) k] >= |tr[(k U*JV)^2]|, both with
/// f(l) = sqrt(l(1+l)).  Nonnegative margins certify the reduction.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaMargins {
    pub field_margin: [f64; 3],
    pub field_scale: [f64; 3],
    pub trace_margin: [f64; 3],
    pub trace_scale: [f64; 3],
}

/// Sample `n_pairs` Bogolubov pairs (squeeze strength up to `scale`) with
/// random displacements and report the bound margins for each.
pub fn check_lemma_bounds(
    ms: &ModelSpace,
    n_pairs: usize,
    seed: u64,
    scale: f64,
) -> Result<Vec<LemmaMargins>, EnergyError> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_pairs);
    for i in 0..n_pairs {
        let s: f64 = scale * rand::Rng::gen::<f64>(&mut rng);
        let pair = random_bogolubov(&ms.antipode, seed.wrapping_add(0x9e37 + i as u64), s);
        let eta = random_cvec(ms.dim, &mut rng);
        let vv = pair.v.adjoint() * &pair.v;
        let a = func_psd(&vv, |l| (l * (1.0 + l)).sqrt())?;
        let m_vu = pair.v.adjoint() * p_conj(&ms.antipode, &pair.u);
        let m_uv = pair.u.adjoint() * p_conj(&ms.antipode, &pair.v);
        let mut field_margin = [0.0; 3];
        let mut field_scale = [0.0; 3];
        let mut trace_margin = [0.0; 3];
        let mut trace_scale = [0.0; 3];
        for nu in 0..3 {
            let k = &ms.k[nu];
            let w = &ms.g[nu] + k * &eta;
            let lhs_f = real_checked(w.dotc(&(&a * &w)))?;
            let rhs_f = w.dotc(&(&m_vu * w.conjugate())).re.abs();
            field_margin[nu] = lhs_f - rhs_f;
            field_scale[nu] = 1.0 + lhs_f.abs() + rhs_f;
            let lhs_t = real_checked((&a * k * &a * k).trace())?;
            let rhs_t = real_checked((&m_uv * k.conjugate() * m_uv.conjugate() * k).trace())?.abs();
            trace_margin[nu] = lhs_t - rhs_t;
            trace_scale[nu] = 1.0 + lhs_t.abs() + rhs_t;
        }
        out.push(LemmaMargins {
            field_margin,
            field_scale,
            trace_margin,
            trace_scale,
        });
    }
    Ok(out)
}
