//! Inversion-symmetric quadrature grid on the photon momentum shell.

use crate::{C, CVec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub sigma: f64,
    pub lambda: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub n_phi: usize,
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("cutoffs must satisfy 0 < sigma < lambda, got sigma={0}, lambda={1}")]
    BadCutoffs(f64, f64),
    #[error("n_r and n_theta must be >= 1")]
    EmptyGrid,
    #[error("n_phi must be even and >= 2 (antipodal closure), got {0}")]
    OddPhi(usize),
    #[error("vector length {0} does not match grid dim {1}")]
    DimMismatch(usize, usize),
}

/// Quadrature discretization of the shell sigma <= |k| <= lambda times the
/// two polarizations.  Basis slot 2p carries tau=+ and 2p+1 carries tau=- of
/// geometric point p.  Coordinates are weight-absorbed: a function f lives in
/// the grid as c_i = sqrt(w_i) f(k_i, tau_i), so the inner product is the
/// plain Hermitian dot product and multiplication operators are diagonal.
#[derive(Debug, Clone)]
pub struct MomentumGrid {
    pub params: GridParams,
    pub dim: usize,
    /// cartesian momentum per slot; exactly negated on antipodal partners
    pub k: Vec<[f64; 3]>,
    /// |k|^2 per slot, computed once as kx*kx + ky*ky + kz*kz
    pub kabs_sq: Vec<f64>,
    /// |k| per slot (= sqrt(kabs_sq))
    pub kabs: Vec<f64>,
    /// quadrature weight per slot (includes the r^2 Jacobian; both
    /// polarization slots of a point carry the same weight)
    pub weight: Vec<f64>,
    /// polarization vector eps_{tau_i}(k_i) per slot; exactly negated on partners
    pub pol: Vec<[f64; 3]>,
    /// 0 for tau=+, 1 for tau=-
    pub tau: Vec<u8>,
    /// antipode involution i -> i* with k_{i*} = -k_i, tau_{i*} = tau_i
    pub antipode: Vec<usize>,
    /// coupling vectors at unit coupling constant: sqrt(w) eps_nu |k|^{-1/2}
    pub coupling_unit: [Vec<f64>; 3],
}

/// Gauss-Legendre nodes (ascending) and weights on [-1, 1].
/// Nodes are computed for one half and mirrored, so x[i] == -x[n-1-i] exactly.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        if n % 2 == 1 && i == m - 1 {
            z = 0.0; // middle root is exactly zero
        } else {
            for _ in 0..100 {
                let (p, dp) = legendre_pn(n, z);
                let dz = p / dp;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            let (p, dp) = legendre_pn(n, z);
            z -= p / dp;
        }
        let (_, dp) = legendre_pn(n, z);
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[n - 1 - i] = z;
        x[i] = -z;
        w[n - 1 - i] = wi;
        w[i] = wi;
    }
    (x, w)
}

/// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre_pn(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let pj = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = pj;
    }
    let dp = if x.abs() < 1.0 {
        n as f64 * (x * p1 - p0) / (x * x - 1.0)
    } else {
        // endpoints never occur for interior Gauss nodes
        0.0
    };
    (p1, dp)
}

pub(crate) fn eps_plus(k: [f64; 3]) -> [f64; 3] {
    // k x zhat = (k_y, -k_x, 0)
    let n = (k[1] * k[1] + k[0] * k[0]).sqrt();
    [k[1] / n, -k[0] / n, 0.0]
}

pub(crate) fn eps_minus(k: [f64; 3], ep: [f64; 3]) -> [f64; 3] {
    let kn = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
    let kh = [k[0] / kn, k[1] / kn, k[2] / kn];
    let mut em = [
        kh[1] * ep[2] - kh[2] * ep[1],
        kh[2] * ep[0] - kh[0] * ep[2],
        kh[0] * ep[1] - kh[1] * ep[0],
    ];
    // sign(k_z) with the k_z = 0 tie broken towards +1; parity on the partner
    // is enforced by pairwise assignment, not by this sign
    let s = if k[2] < 0.0 { -1.0 } else { 1.0 };
    let n = (em[0] * em[0] + em[1] * em[1] + em[2] * em[2]).sqrt();
    for e in &mut em {
        *e *= s / n;
    }
    em
}

pub fn build_grid(
    sigma: f64,
    lambda: f64,
    n_r: usize,
    n_theta: usize,
    n_phi: usize,
) -> Result<MomentumGrid, GridError> {
    if !(sigma > 0.0 && lambda > sigma) {
        return Err(GridError::BadCutoffs(sigma, lambda));
    }
    if n_r < 1 || n_theta < 1 {
        return Err(GridError::EmptyGrid);
    }
    if n_phi < 2 || n_phi % 2 != 0 {
        return Err(GridError::OddPhi(n_phi));
    }

    let (xr, wr) = gauss_legendre(n_r);
    // map radial nodes to [sigma, lambda]
    let rc = 0.5 * (sigma + lambda);
    let rh = 0.5 * (lambda - sigma);
    let r_nodes: Vec<f64> = xr.iter().map(|x| rc + rh * x).collect();
    let r_weights: Vec<f64> = wr.iter().map(|w| rh * w).collect();
    let (xc, wc) = gauss_legendre(n_theta);
    let w_phi = 2.0 * std::f64::consts::PI / n_phi as f64;

    let n_points = n_r * n_theta * n_phi;
    let dim = 2 * n_points;
    let mut k = vec![[0.0; 3]; dim];
    let mut kabs_sq = vec![0.0; dim];
    let mut kabs = vec![0.0; dim];
    let mut weight = vec![0.0; dim];
    let mut pol = vec![[0.0; 3]; dim];
    let mut tau = vec![0u8; dim];
    let mut antipode = vec![0usize; dim];

    let point = |ir: usize, it: usize, ip: usize| (ir * n_theta + it) * n_phi + ip;
    let mut assigned = vec![false; n_points];

    for ir in 0..n_r {
        for it in 0..n_theta {
            for ip in 0..n_phi {
                let p = point(ir, it, ip);
                if assigned[p] {
                    continue;
                }
                let q = point(ir, n_theta - 1 - it, (ip + n_phi / 2) % n_phi);
                assigned[p] = true;
                assigned[q] = true;

                let r = r_nodes[ir];
                let ct = xc[it];
                let st = (1.0 - ct * ct).sqrt();
                let phi = std::f64::consts::PI / n_phi as f64
                    + 2.0 * std::f64::consts::PI * ip as f64 / n_phi as f64;
                let kv = [r * st * phi.cos(), r * st * phi.sin(), r * ct];
                let ksq = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
                let w = r_weights[ir] * r * r * wc[it] * w_phi;
                let ep = eps_plus(kv);
                let em = eps_minus(kv, ep);

                for (t, e) in [(0usize, ep), (1usize, em)] {
                    let s = 2 * p + t;
                    let sq = 2 * q + t;
                    k[s] = kv;
                    k[sq] = [-kv[0], -kv[1], -kv[2]];
                    kabs_sq[s] = ksq;
                    kabs_sq[sq] = ksq;
                    kabs[s] = ksq.sqrt();
                    kabs[sq] = kabs[s];
                    weight[s] = w;
                    weight[sq] = w;
                    pol[s] = e;
                    pol[sq] = [-e[0], -e[1], -e[2]];
                    tau[s] = t as u8;
                    tau[sq] = t as u8;
                    antipode[s] = sq;
                    antipode[sq] = s;
                }
            }
        }
    }

    let mut coupling_unit = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
    for i in 0..dim {
        let amp = weight[i].sqrt() / kabs[i].sqrt();
        for nu in 0..3 {
            coupling_unit[nu][i] = amp * pol[i][nu];
        }
    }

    Ok(MomentumGrid {
        params: GridParams {
            sigma,
            lambda,
            n_r,
            n_theta,
            n_phi,
        },
        dim,
        k,
        kabs_sq,
        kabs,
        weight,
        pol,
        tau,
        antipode,
        coupling_unit,
    })
}

pub fn build_grid_from_params(p: &GridParams) -> Result<MomentumGrid, GridError> {
    build_grid(p.sigma, p.lambda, p.n_r, p.n_theta, p.n_phi)
}

/// eps_{tau_i}(k_i) for slot i.
pub fn polarization(grid: &MomentumGrid, i: usize) -> [f64; 3] {
    grid.pol[i]
}

/// The three coupling vectors G_nu(k, tau) = g eps_tau(k)_nu |k|^{-1/2} in
/// weight-absorbed coordinates.  All entries are real; JG_nu = -G_nu exactly.
pub fn coupling_vectors(grid: &MomentumGrid, g: f64) -> [CVec; 3] {
    std::array::from_fn(|nu| {
        CVec::from_iterator(
            grid.dim,
            grid.coupling_unit[nu].iter().map(|&x| C::new(g * x, 0.0)),
        )
    })
}

/// The antiunitary involution (Jf)_i = conj(f_{i*}).
pub fn involution_apply(grid: &MomentumGrid, f: &CVec) -> Result<CVec, GridError> {
    if f.len() != grid.dim {
        return Err(GridError::DimMismatch(f.len(), grid.dim));
    }
    Ok(crate::hsops::j_vec(&grid.antipode, f))
}

/// Hermitian inner product, conjugate-linear in the first slot.
pub fn inner_product(f: &CVec, g: &CVec) -> Result<C, GridError> {
    if f.len() != g.len() {
        return Err(GridError::DimMismatch(f.len(), g.len()));
    }
    Ok(f.dotc(g))
}
