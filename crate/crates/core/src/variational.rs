//! Gradients of the z-parametrized energy and finite-difference validation.

use crate::energy::{energy_reduced_z, EnergyError, ModelSpace};
use crate::hsops::{eig_hermitian, func_psd, herm_residual, random_cvec, HsError, HERM_TOL};
use crate::{fro, C, CMat, CVec};
use rand::{Rng, SeedableRng};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VariationError {
    #[error("no spectral mass at or above {0:.3e}: cannot build an interior variation")]
    NoInteriorSpectrum(f64),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Operator(#[from] HsError),
}

/// First-order data of the energy at (z, eta).  The differential acts on a
/// Hermitian direction dz and a vector direction de as
/// dE = tr[grad_z dz] + 2 Re <grad_eta|de> + O(|dz|^2 + |de|^2);
/// grad_z is Hermitian, so the trace term is real.
#[derive(Debug, Clone)]
pub struct GradientPair {
    pub grad_z: CMat,
    pub grad_eta: CVec,
}

/// Gradient of the z-form energy at total momentum p.
pub fn gradient(
    ms: &ModelSpace,
    z: &CMat,
    eta: &CVec,
    p: [f64; 3],
) -> Result<GradientPair, EnergyError> {
    if z.nrows() != ms.dim {
        return Err(EnergyError::DimMismatch(z.nrows(), ms.dim));
    }
    if eta.len() != ms.dim {
        return Err(EnergyError::DimMismatch(eta.len(), ms.dim));
    }
    let r = func_psd(z, |l| 1.0 / (l + 1.0))?;
    let rz = &r * z;
    let rzz = &rz * z;
    let mut raw = CMat::zeros(ms.dim, ms.dim);
    let mut grad_eta = CVec::zeros(ms.dim);
    for nu in 0..3 {
        let k = &ms.k[nu];
        let keta = k * eta;
        let w = &ms.g[nu] + &keta;
        let bracket = 0.25 * (k * &rzz).trace().re
            + eta.dotc(&keta).re
            + 2.0 * eta.dotc(&ms.g[nu]).re;
        let shifted = bracket - p[nu];

        let kzr_sym = &r * k * z * &r + z * &r * k;
        let cross = k * z * &r * k + &r * k * z * k * &r;
        let rw = &r * &w;
        let outer = &rw * rw.adjoint();
        raw += (kzr_sym * C::new(0.5 * shifted, 0.0)
            - cross * C::new(0.25, 0.0)
            - outer)
            * C::new(0.5, 0.0);

        grad_eta += &w * C::new(shifted, 0.0) + (k * &rw) * C::new(0.5, 0.0);
    }
    let h = &ms.omega_plus;
    raw += (&r * h * z * &r + z * &r * h) * C::new(0.25, 0.0);
    let grad_z = (&raw + raw.adjoint()) * C::new(0.5, 0.0);
    grad_eta += &ms.omega * eta;
    Ok(GradientPair { grad_z, grad_eta })
}

/// Random Hermitian direction supported on the spectral subspace of z with
/// eigenvalues >= eps, scaled to operator norm eps/2.  Probing z + t dz for
/// |t| <= 1 then stays positive semidefinite.
pub fn make_variation(z: &CMat, seed: u64, eps: f64) -> Result<CMat, VariationError> {
    let res = herm_residual(z);
    if res >= HERM_TOL {
        return Err(VariationError::Operator(HsError::NotHermitian(res)));
    }
    let (ev, q) = eig_hermitian(z);
    let kept: Vec<usize> = (0..ev.len()).filter(|&i| ev[i] >= eps).collect();
    if kept.is_empty() {
        return Err(VariationError::NoInteriorSpectrum(eps));
    }
    let m = kept.len();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut s = CMat::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let c = if i == j {
                C::new(rng.gen::<f64>() * 2.0 - 1.0, 0.0)
            } else {
                C::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
            };
            s[(i, j)] = c;
            s[(j, i)] = c.conj();
        }
    }
    let (sev, _) = eig_hermitian(&s);
    let top = sev.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    if top > 0.0 {
        s *= C::new(0.5 * eps / top, 0.0);
    }
    let mut qs = CMat::zeros(z.nrows(), m);
    for (c, &i) in kept.iter().enumerate() {
        qs.set_column(c, &q.column(i));
    }
    let dz = &qs * s * qs.adjoint();
    Ok((&dz + dz.adjoint()) * C::new(0.5, 0.0))
}

/// Central-difference validation of the analytic gradient.
#[derive(Debug, Clone, Serialize)]
pub struct FdReport {
    pub point_summary: String,
    pub trials: usize,
    pub max_rel_error: f64,
    pub remainder_ratios: Vec<f64>,
}

/// Compare the analytic differential against central differences along
/// `trials` random admissible directions.  Differences are taken at step
/// 1e-5 (1 + |z| + |eta|); second-order remainder ratios are measured at the
/// larger step 1e-3 (1 + |z| + |eta|) where they sit well above rounding.
pub fn fd_check(
    ms: &ModelSpace,
    z: &CMat,
    eta: &CVec,
    p: [f64; 3],
    trials: usize,
    seed: u64,
) -> Result<FdReport, VariationError> {
    let scale = 1.0 + fro(z) + eta.norm();
    let t = 1e-5 * scale;
    let t_big = 1e-3 * scale;
    let (ev, _) = eig_hermitian(z);
    let top = ev.iter().fold(0.0f64, |a, &l| a.max(l));
    let eps = 0.25 * top;
    let g = gradient(ms, z, eta, p)?;
    let e0 = energy_reduced_z(ms, z, eta, p)?.total;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel: f64 = 0.0;
    let mut ratios = Vec::new();
    for trial in 0..trials {
        let dz = make_variation(z, seed.wrapping_add(101 + trial as u64), eps)?;
        let mut de = random_cvec(ms.dim, &mut rng);
        de /= C::new(de.norm(), 0.0);
        let analytic = (&g.grad_z * &dz).trace().re + 2.0 * g.grad_eta.dotc(&de).re;
        let probe = |s: f64| -> Result<f64, VariationError> {
            let zp = z + &dz * C::new(s, 0.0);
            let ep = eta + &de * C::new(s, 0.0);
            Ok(energy_reduced_z(ms, &zp, &ep, p)?.total)
        };
        let fd = (probe(t)? - probe(-t)?) / (2.0 * t);
        let rel = (fd - analytic).abs() / (1.0 + analytic.abs());
        max_rel = max_rel.max(rel);
        let rem_big = ((probe(t_big)? - probe(-t_big)?) / (2.0 * t_big) - analytic).abs();
        let rem_half =
            ((probe(0.5 * t_big)? - probe(-0.5 * t_big)?) / t_big - analytic).abs();
        if rem_big >= 1e-12 * (1.0 + e0.abs()) && rem_half > 0.0 {
            ratios.push(rem_big / rem_half);
        }
    }
    Ok(FdReport {
        point_summary: format!(
            "dim={} |z|={:.3e} |eta|={:.3e} p=[{:.3e},{:.3e},{:.3e}] E={:.6e}",
            ms.dim,
            fro(z),
            eta.norm(),
            p[0],
            p[1],
            p[2],
            e0
        ),
        trials,
        max_rel_error: max_rel,
        remainder_ratios: ratios,
    })
}
