//! Exact Fock-space oracle on a handful of modes.  Everything here is dense
//! and brute force on purpose: truncated ladder operators, the Hamiltonian
//! assembled literally as a square of sums, squeezed-displaced states built
//! by matrix exponentials.  Expectations computed this way know nothing about
//! the closed-form energy and serve as its independent cross-check.

use crate::energy::{energy_full, EnergyError, ModelSpace};
use crate::hsops::{exp_antihermitian, func_hermitian, herm_residual, BogolubovPair, HsError};
use crate::{C, CMat, CVec};
use nalgebra::DMatrix;
use serde::Serialize;
use std::collections::HashMap;
use thiserror::Error;

/// Hard cap on the truncated basis.  Dense matrices stay practical well
/// below this, roughly up to two thousand states.
pub const MAX_STATES: u128 = 1_000_000;

#[derive(Debug, Error)]
pub enum FockError {
    #[error("basis would hold {0} states, cap is {MAX_STATES}")]
    TooManyStates(u128),
    #[error("bad dimensions: {0}")]
    BadDims(String),
    #[error("squeeze generator must be real symmetric, defect {0:.3e}")]
    NotRealSymmetric(f64),
    #[error("mode involution table is not an involution")]
    BadInvolution,
    #[error("ladder transformation convention broke: {0}")]
    ConventionCheck(String),
    #[error("prepared state has norm defect {0:.3e}")]
    NotNormalized(f64),
    #[error("string expectations cover orders 1 through 4, got {0}")]
    BadOrder(usize),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Operator(#[from] HsError),
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

fn occupations(d: usize, n_max: u32) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = vec![Vec::new()];
    for _ in 0..d {
        let mut next = Vec::new();
        for base in &out {
            let used: u32 = base.iter().sum();
            for n in 0..=(n_max - used) {
                let mut v = base.clone();
                v.push(n);
                next.push(v);
            }
        }
        out = next;
    }
    out.sort_by(|a, b| {
        let sa: u32 = a.iter().sum();
        let sb: u32 = b.iter().sum();
        (sa, a.as_slice()).cmp(&(sb, b.as_slice()))
    });
    out
}

/// Truncated bosonic Fock space over `d` modes with total occupation at most
/// `n_max`, together with the one-body data of a small model on those modes.
pub struct FockArena {
    pub d: usize,
    pub n_max: usize,
    /// Occupation vectors in graded lexicographic order; state 0 is the vacuum.
    pub states: Vec<Vec<u32>>,
    pub totals: Vec<u32>,
    pub index: HashMap<Vec<u32>, usize>,
    pub ann: Vec<CMat>,
    pub cre: Vec<CMat>,
    pub k_ops: [CMat; 3],
    pub omega: CMat,
    pub g_vecs: [CVec; 3],
    pub j_perm: Vec<usize>,
}

pub fn build_arena(
    d: usize,
    n_max: usize,
    k_ops: [CMat; 3],
    omega: CMat,
    g_vecs: [CVec; 3],
    j_perm: Vec<usize>,
) -> Result<FockArena, FockError> {
    if d == 0 || n_max == 0 {
        return Err(FockError::BadDims("need d >= 1 and n_max >= 1".into()));
    }
    let count = binomial((n_max + d) as u128, d as u128);
    if count > MAX_STATES {
        return Err(FockError::TooManyStates(count));
    }
    if j_perm.len() != d
        || j_perm.iter().any(|&j| j >= d)
        || (0..d).any(|i| j_perm[j_perm[i]] != i)
    {
        return Err(FockError::BadInvolution);
    }
    for m in k_ops.iter().chain(std::iter::once(&omega)) {
        if m.nrows() != d || m.ncols() != d {
            return Err(FockError::BadDims(format!(
                "one-body operator is {}x{}, want {d}x{d}",
                m.nrows(),
                m.ncols()
            )));
        }
        let r = herm_residual(m);
        if r >= 1e-12 {
            return Err(FockError::Operator(HsError::NotHermitian(r)));
        }
    }
    for v in &g_vecs {
        if v.len() != d {
            return Err(FockError::BadDims(format!(
                "coupling vector has {} entries, want {d}",
                v.len()
            )));
        }
    }

    let states = occupations(d, n_max as u32);
    let n = states.len();
    let totals: Vec<u32> = states.iter().map(|s| s.iter().sum()).collect();
    let index: HashMap<Vec<u32>, usize> =
        states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    let mut ann = vec![CMat::zeros(n, n); d];
    for (s_idx, occ) in states.iter().enumerate() {
        for m in 0..d {
            if occ[m] > 0 {
                let mut t = occ.clone();
                t[m] -= 1;
                ann[m][(index[&t], s_idx)] = C::new(f64::from(occ[m]).sqrt(), 0.0);
            }
        }
    }
    let cre: Vec<CMat> = ann.iter().map(|a| a.adjoint()).collect();
    Ok(FockArena {
        d,
        n_max,
        states,
        totals,
        index,
        ann,
        cre,
        k_ops,
        omega,
        g_vecs,
        j_perm,
    })
}

impl FockArena {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn second_quantize(&self, h: &CMat) -> CMat {
        let n = self.dim();
        let mut out = CMat::zeros(n, n);
        for i in 0..self.d {
            for j in 0..self.d {
                let c = h[(i, j)];
                if c != C::new(0.0, 0.0) {
                    out += (&self.cre[i] * &self.ann[j]) * c;
                }
            }
        }
        out
    }

    pub fn annihilator(&self, f: &CVec) -> CMat {
        let n = self.dim();
        let mut out = CMat::zeros(n, n);
        for m in 0..self.d {
            out += &self.ann[m] * f[m].conj();
        }
        out
    }

    pub fn creator(&self, h: &CVec) -> CMat {
        let n = self.dim();
        let mut out = CMat::zeros(n, n);
        for m in 0..self.d {
            out += &self.cre[m] * h[m];
        }
        out
    }

    pub fn field_operator(&self, op: &FieldOp) -> CMat {
        self.annihilator(&op.ann) + self.creator(&op.cre)
    }

    /// Half the squared sum of momentum components plus the photon number
    /// energy, built as literal operator products.
    pub fn fiber_hamiltonian(&self) -> CMat {
        let n = self.dim();
        let mut h = self.second_quantize(&self.omega);
        for nu in 0..3 {
            let t = self.second_quantize(&self.k_ops[nu])
                + self.annihilator(&self.g_vecs[nu])
                + self.creator(&self.g_vecs[nu]);
            h += (&t * &t) * C::new(0.5, 0.0);
        }
        debug_assert_eq!(h.nrows(), n);
        h
    }

    pub fn model_space(&self) -> Result<ModelSpace, FockError> {
        Ok(ModelSpace::toy(
            self.j_perm.clone(),
            self.k_ops.clone(),
            self.omega.clone(),
            self.g_vecs.clone(),
        )?)
    }

    pub fn top_shell_weight(&self, psi: &CVec) -> f64 {
        let cap = self.n_max as u32;
        (0..self.dim())
            .filter(|&i| self.totals[i] == cap)
            .map(|i| psi[i].norm_sqr())
            .sum()
    }

    /// Squeeze-then-displace: exp(sum xi_ml (a+_m a+_l - a_m a_l)/2) applied
    /// to the coherent state exp(sum eta_m a+_m - conj eta_m a_m) vacuum.
    /// The returned state records the ladder pair this construction implies,
    /// which is checked here against the exponentials on low-lying states.
    pub fn prepare_pure_quasifree(
        &self,
        xi: &DMatrix<f64>,
        eta0: &CVec,
    ) -> Result<PureQuasifreeState, FockError> {
        let d = self.d;
        if xi.nrows() != d || xi.ncols() != d || eta0.len() != d {
            return Err(FockError::BadDims(format!(
                "squeeze is {}x{}, displacement has {} entries, want {d}",
                xi.nrows(),
                xi.ncols(),
                eta0.len()
            )));
        }
        let sym_defect = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| (xi[(i, j)] - xi[(j, i)]).abs())
            .fold(0.0, f64::max);
        if sym_defect >= 1e-12 * (1.0 + xi.norm()) {
            return Err(FockError::NotRealSymmetric(sym_defect));
        }

        let n = self.dim();
        let mut x = CMat::zeros(n, n);
        for m in 0..d {
            for l in 0..d {
                let c = xi[(m, l)];
                if c != 0.0 {
                    x += (&self.cre[m] * &self.cre[l] - &self.ann[m] * &self.ann[l])
                        * C::new(0.5 * c, 0.0);
                }
            }
        }
        let s_mat = exp_antihermitian(&x)?;
        let y = self.creator(eta0) - self.annihilator(eta0);
        let d_mat = exp_antihermitian(&y)?;
        let mut vac = CVec::zeros(n);
        vac[0] = C::new(1.0, 0.0);
        let vector = &s_mat * (&d_mat * vac);
        let norm_defect = (vector.norm() - 1.0).abs();
        if norm_defect >= 1e-12 {
            return Err(FockError::NotNormalized(norm_defect));
        }

        let xi_c = CMat::from_fn(d, d, |i, j| C::new(xi[(i, j)], 0.0));
        let cosh_xi = func_hermitian(&xi_c, f64::cosh)?;
        let sinh_xi = func_hermitian(&xi_c, f64::sinh)?;
        self.verify_ladder_convention(&s_mat, &cosh_xi, &sinh_xi)?;
        let v = CMat::from_fn(d, d, |i, j| sinh_xi[(self.j_perm[i], j)]);
        let eta_effective = &cosh_xi * eta0 + &sinh_xi * eta0.map(|z| z.conj());
        Ok(PureQuasifreeState {
            vector,
            xi: xi.clone(),
            eta: eta0.clone(),
            u: cosh_xi,
            v,
            eta_effective,
        })
    }

    /// Conjugating an annihilator by the squeeze exponential must mix the
    /// ladder operators through cosh/sinh of the generator.  Truncation
    /// contaminates this at the size of the state's tail near the occupation
    /// cap, while a wrong convention shows up at the size of the generator
    /// itself, so the threshold scales with the latter and the comparison is
    /// restricted to matrix elements between low-lying states.
    fn verify_ladder_convention(
        &self,
        s_mat: &CMat,
        cosh_xi: &CMat,
        sinh_xi: &CMat,
    ) -> Result<(), FockError> {
        let n = self.dim();
        let tol = 1e-8 + 1e-2 * sinh_xi.norm();
        let cap = (self.n_max / 2) as u32;
        let rows: Vec<usize> = (0..n).filter(|&i| self.totals[i] <= cap).collect();
        let cols: Vec<usize> = (0..n).filter(|&i| self.totals[i] <= 2.min(cap)).collect();
        let s_dag = s_mat.adjoint();
        for m in 0..self.d {
            let lhs = &s_dag * &(&self.ann[m] * s_mat);
            let mut rhs = CMat::zeros(n, n);
            for l in 0..self.d {
                rhs += &self.ann[l] * cosh_xi[(m, l)] + &self.cre[l] * sinh_xi[(m, l)];
            }
            for &j in &cols {
                let mut diff2 = 0.0;
                let mut ref2 = 0.0;
                for &i in &rows {
                    diff2 += (lhs[(i, j)] - rhs[(i, j)]).norm_sqr();
                    ref2 += rhs[(i, j)].norm_sqr();
                }
                let rel = diff2.sqrt() / (1.0 + ref2.sqrt());
                if rel >= tol {
                    return Err(FockError::ConventionCheck(format!(
                        "mode {m}, source state {j}: residual {rel:.3e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A squeezed-displaced vector in the truncated space, together with the
/// ladder pair and effective displacement it realizes.
pub struct PureQuasifreeState {
    pub vector: CVec,
    pub xi: DMatrix<f64>,
    pub eta: CVec,
    pub u: CMat,
    pub v: CMat,
    pub eta_effective: CVec,
}

impl PureQuasifreeState {
    pub fn pair(&self) -> BogolubovPair {
        BogolubovPair {
            u: self.u.clone(),
            v: self.v.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub d: usize,
    pub n_max: usize,
    pub xi: Vec<Vec<f64>>,
    pub eta: Vec<[f64; 2]>,
    pub formula_energy: f64,
    pub fock_energy: f64,
    pub rel_error: f64,
    pub leakage: f64,
}

/// Prepare the state, take the raw Hamiltonian expectation, and compare it
/// against the closed-form energy of the implied pair and displacement.
pub fn oracle_compare(
    arena: &FockArena,
    xi: &DMatrix<f64>,
    eta0: &CVec,
) -> Result<OracleReport, FockError> {
    let st = arena.prepare_pure_quasifree(xi, eta0)?;
    let h = arena.fiber_hamiltonian();
    let hr = herm_residual(&h);
    if hr >= 1e-12 {
        return Err(FockError::Operator(HsError::NotHermitian(hr)));
    }
    let exp = st.vector.dotc(&(&h * &st.vector));
    let fock_energy = exp.re;
    let ms = arena.model_space()?;
    let formula_energy = energy_full(&ms, &st.pair(), &st.eta_effective)?.total;
    let rel_error = (formula_energy - fock_energy).abs() / (1.0 + formula_energy.abs());
    Ok(OracleReport {
        d: arena.d,
        n_max: arena.n_max,
        xi: (0..arena.d)
            .map(|i| (0..arena.d).map(|j| xi[(i, j)]).collect())
            .collect(),
        eta: eta0.iter().map(|z| [z.re, z.im]).collect(),
        formula_energy,
        fock_energy,
        rel_error,
        leakage: arena.top_shell_weight(&st.vector),
    })
}

/// One generalized field factor a(ann) + a+(cre).
#[derive(Debug, Clone)]
pub struct FieldOp {
    pub ann: CVec,
    pub cre: CVec,
}

/// Centered two-point function of a pure quasifree state between two
/// generalized field factors, left factor first.
pub fn field_kernel(
    pair: &BogolubovPair,
    antipode: &[usize],
    f1: &FieldOp,
    f2: &FieldOp,
) -> C {
    let bra = &pair.u * &f1.ann + crate::hsops::j_vec(antipode, &(&pair.v * &f1.cre));
    let ket = crate::hsops::j_vec(antipode, &(&pair.v * &f2.ann)) + &pair.u * &f2.cre;
    bra.dotc(&ket)
}

/// Expectation of a single generalized field factor in a displaced state.
pub fn field_one_point(eta: &CVec, op: &FieldOp) -> C {
    op.ann.dotc(eta) + eta.dotc(&op.cre)
}

/// All ways to pair up 2m items, as lists of index pairs (i, j) with i < j
/// and ascending first members.  Counts go 1, 3, 15, ...
pub fn enumerate_pairings(m: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(live: &[usize], acc: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        match live.split_first() {
            None => out.push(acc.clone()),
            Some((&first, rest)) => {
                for pos in 0..rest.len() {
                    let mut next: Vec<usize> = rest.to_vec();
                    let second = next.remove(pos);
                    acc.push((first, second));
                    rec(&next, acc, out);
                    acc.pop();
                }
            }
        }
    }
    let items: Vec<usize> = (0..2 * m).collect();
    let mut out = Vec::new();
    rec(&items, &mut Vec::new(), &mut out);
    out
}

/// The six ways to split four slots into an ordered pair of internally
/// sorted pairs; the index set behind the quartic pairing count.
pub fn ordered_pair_splits() -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..4usize {
        for b in 0..4usize {
            for c in 0..4usize {
                for e in 0..4usize {
                    let mut seen = [false; 4];
                    for &x in &[a, b, c, e] {
                        seen[x] = true;
                    }
                    if seen == [true; 4] && a < b && c < e {
                        out.push([a, b, c, e]);
                    }
                }
            }
        }
    }
    out
}

/// Wick expectation of an ordered product of up to four generalized field
/// factors: sum over partial pairings, paired factors through the kernel,
/// unpaired ones through the one-point function.
pub fn string_expectation_formula(
    pair: &BogolubovPair,
    antipode: &[usize],
    eta: &CVec,
    ops: &[FieldOp],
) -> Result<C, FockError> {
    let n = ops.len();
    if n == 0 || n > 4 {
        return Err(FockError::BadOrder(n));
    }
    let dim = eta.len();
    if ops.iter().any(|o| o.ann.len() != dim || o.cre.len() != dim) {
        return Err(FockError::BadDims("field factors must match the mode count".into()));
    }
    fn wick(
        live: &[usize],
        k: &dyn Fn(usize, usize) -> C,
        q: &dyn Fn(usize) -> C,
    ) -> C {
        match live.split_first() {
            None => C::new(1.0, 0.0),
            Some((&first, rest)) => {
                let mut total = q(first) * wick(rest, k, q);
                for pos in 0..rest.len() {
                    let mut next: Vec<usize> = rest.to_vec();
                    let second = next.remove(pos);
                    total += k(first, second) * wick(&next, k, q);
                }
                total
            }
        }
    }
    let kf = |i: usize, j: usize| field_kernel(pair, antipode, &ops[i], &ops[j]);
    let qf = |i: usize| field_one_point(eta, &ops[i]);
    let live: Vec<usize> = (0..n).collect();
    Ok(wick(&live, &kf, &qf))
}
