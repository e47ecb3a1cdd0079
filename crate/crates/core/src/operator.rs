//! The nonlinear operator `F(f) = f + T(A(f) conj(f_ζ))`, its linearization
//! and the finite-rank correction that makes the linearization invertible.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cauchy::transform;
use crate::error::{Error, Result};
use crate::grid::{differentiate, holder_norm, DiscGrid, DiscMap, HolderConfig, C64};
use crate::linalg::{from_real_vec, gmres, real_weights, to_real_vec, GmresOptions};
use crate::structure::{linearization_coefficients, BeltramiField, CMat};

/// `A(f) conj(f_ζ)` at every node.
fn nonlinear_source(a: &BeltramiField, f: &DiscMap) -> Result<DiscMap> {
    let (fz, _) = differentiate(f);
    let mut out = DiscMap::zeros(f.grid(), f.dim());
    for n in 0..f.grid().node_count() {
        let am = a.eval(f.node(n))?;
        let v = DVector::from_iterator(f.dim(), fz.node(n).iter().map(|c| c.conj()));
        out.node_mut(n).copy_from_slice((am * v).as_slice());
    }
    Ok(out)
}

/// `F(f)`, with `T₀` in place of `T` when `normalized`.
pub fn apply_f(a: &BeltramiField, f: &DiscMap, normalized: bool) -> Result<DiscMap> {
    if a.is_zero() {
        return Ok(f.clone());
    }
    let src = nonlinear_source(a, f)?;
    f.add(&transform(&src, normalized))
}

/// Sup norm of `f_ζ̄ + A(f) conj(f_ζ)` over the grid nodes.
pub fn residual(a: &BeltramiField, f: &DiscMap) -> Result<f64> {
    let (_, fzb) = differentiate(f);
    if a.is_zero() {
        return Ok(fzb.sup_norm());
    }
    Ok(fzb.add(&nonlinear_source(a, f)?)?.sup_norm())
}

/// `‖R‖ + ‖R_ζ‖ + ‖R_ζ̄‖` (sup norms) for `R = f_ζ̄ + A(f) conj(f_ζ)`: the
/// scale against which derivative-level quantities built from `f` are judged.
pub fn residual_c1(a: &BeltramiField, f: &DiscMap) -> Result<f64> {
    let (_, fzb) = differentiate(f);
    let r = if a.is_zero() { fzb } else { fzb.add(&nonlinear_source(a, f)?)? };
    let (rz, rzb) = differentiate(&r);
    Ok(r.sup_norm() + rz.sup_norm() + rzb.sup_norm())
}

/// Nodewise coefficients of `d_f F(V) = V + T(A(f) conj(V_ζ) + B1 V + B2 conj(V))`.
#[derive(Clone, Debug)]
pub struct Linearization {
    grid: Arc<DiscGrid>,
    dim: usize,
    pub a_f: Vec<CMat>,
    pub b1: Vec<CMat>,
    pub b2: Vec<CMat>,
}

impl Linearization {
    pub fn at(a: &BeltramiField, f: &DiscMap) -> Result<Self> {
        let n = f.dim();
        let nodes = f.grid().node_count();
        if a.is_zero() {
            let z = vec![CMat::zeros(n, n); nodes];
            return Self::from_coefficients(f.grid(), n, z.clone(), z.clone(), z);
        }
        let a_f = (0..nodes).map(|k| a.eval(f.node(k))).collect::<Result<Vec<_>>>()?;
        let (b1, b2) = linearization_coefficients(a, f)?;
        Self::from_coefficients(f.grid(), n, a_f, b1, b2)
    }

    /// Linearization with prescribed coefficients, for operators that do not
    /// come from a structure.
    pub fn from_coefficients(
        grid: &Arc<DiscGrid>,
        dim: usize,
        a_f: Vec<CMat>,
        b1: Vec<CMat>,
        b2: Vec<CMat>,
    ) -> Result<Self> {
        let nodes = grid.node_count();
        let ok = |v: &Vec<CMat>| v.len() == nodes && v.iter().all(|m| m.shape() == (dim, dim));
        if !(ok(&a_f) && ok(&b1) && ok(&b2)) {
            return Err(Error::Mismatch);
        }
        Ok(Self {
            grid: grid.clone(),
            dim,
            a_f,
            b1,
            b2,
        })
    }

    pub fn grid(&self) -> &Arc<DiscGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_trivial(&self) -> bool {
        self.a_f
            .iter()
            .chain(&self.b1)
            .chain(&self.b2)
            .all(|m| m.iter().all(|c| *c == C64::new(0.0, 0.0)))
    }

    /// `A(f) conj(V_ζ) + B1 V + B2 conj(V)`.
    pub fn source(&self, v: &DiscMap) -> DiscMap {
        let (vz, _) = differentiate(v);
        let mut out = DiscMap::zeros(&self.grid, self.dim);
        for n in 0..self.grid.node_count() {
            let vv = DVector::from_column_slice(v.node(n));
            let vc = vv.map(|c| c.conj());
            let vzc = DVector::from_iterator(self.dim, vz.node(n).iter().map(|c| c.conj()));
            let s = &self.a_f[n] * vzc + &self.b1[n] * &vv + &self.b2[n] * vc;
            out.node_mut(n).copy_from_slice(s.as_slice());
        }
        out
    }

    pub fn apply(&self, v: &DiscMap, normalized: bool) -> DiscMap {
        if self.is_trivial() {
            return v.clone();
        }
        v.add(&transform(&self.source(v), normalized)).expect("same shape")
    }
}

/// Knobs for [`build_corrected_with`].
#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    /// Singular values below `kernel_tol · σ_max` count as kernel.
    pub kernel_tol: f64,
    /// Largest real dimension assembled densely; beyond it the kernel is
    /// assumed trivial and `C` is estimated by inverse iteration.
    pub dense_limit: usize,
    /// Highest monomial degree offered to the complement search.
    pub max_degree: Option<usize>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            kernel_tol: 1e-8,
            dense_limit: 2400,
            max_degree: None,
        }
    }
}

/// `F̃(f) = F(f) + Σ_j Re⟨f, V_j⟩ h_j` linearized at `base_disc`.
#[derive(Clone, Debug)]
pub struct CorrectedOperator {
    pub a: Option<BeltramiField>,
    pub base_disc: DiscMap,
    pub kernel_basis: Vec<DiscMap>,
    pub complement_basis: Vec<DiscMap>,
    pub normalized: bool,
    /// `1/σ_min` of the corrected linearization in the weighted L² norm.
    pub inv_norm_estimate: f64,
    /// Weighted singular values of the uncorrected `d_f F`, largest first
    /// (empty when not assembled).
    pub singular_values: Vec<f64>,
    pub kernel_threshold: f64,
    lin: Linearization,
    matrix: Arc<OnceLock<DMatrix<f64>>>,
}

impl CorrectedOperator {
    pub fn linearization(&self) -> &Linearization {
        &self.lin
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel_basis.len()
    }

    pub fn real_dim(&self) -> usize {
        2 * self.lin.dim * self.lin.grid.node_count()
    }

    /// Dense real matrix of `d_f F̃` in interleaved coordinates, assembled on first use.
    pub fn matrix(&self) -> &DMatrix<f64> {
        self.matrix.get_or_init(|| {
            let mut m = assemble(&self.lin, self.normalized);
            add_correction(&mut m, &self.kernel_basis, &self.complement_basis);
            m
        })
    }

    fn correction(&self, v: &DiscMap) -> Result<Vec<(f64, &DiscMap)>> {
        self.kernel_basis
            .iter()
            .zip(&self.complement_basis)
            .map(|(k, h)| Ok((v.inner(k)?, h)))
            .collect()
    }

    /// The same `F̃` (same `V_j`, `h_j`) linearized at another disc. No
    /// decomposition is redone; `inv_norm_estimate` is carried over.
    pub fn relinearize(&self, f: &DiscMap) -> Result<CorrectedOperator> {
        let a = self.a.as_ref().ok_or(Error::NoNonlinearPart)?;
        if !f.same_shape(&self.base_disc) {
            return Err(Error::Mismatch);
        }
        Ok(CorrectedOperator {
            a: self.a.clone(),
            base_disc: f.clone(),
            kernel_basis: self.kernel_basis.clone(),
            complement_basis: self.complement_basis.clone(),
            normalized: self.normalized,
            inv_norm_estimate: self.inv_norm_estimate,
            singular_values: Vec::new(),
            kernel_threshold: self.kernel_threshold,
            lin: Linearization::at(a, f)?,
            matrix: Arc::new(OnceLock::new()),
        })
    }

    /// `F̃(f)`.
    pub fn apply_f_tilde(&self, f: &DiscMap) -> Result<DiscMap> {
        let a = self.a.as_ref().ok_or(Error::NoNonlinearPart)?;
        let mut out = apply_f(a, f, self.normalized)?;
        for (c, h) in self.correction(f)? {
            out = out.axpy(c, h)?;
        }
        Ok(out)
    }
}

fn apply_columns(lin: &Linearization, normalized: bool) -> Vec<Vec<f64>> {
    let dim = 2 * lin.dim * lin.grid.node_count();
    (0..dim)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            to_real_vec(&lin.apply(&from_real_vec(&lin.grid, lin.dim, &e), normalized))
        })
        .collect()
}

fn assemble(lin: &Linearization, normalized: bool) -> DMatrix<f64> {
    let cols = apply_columns(lin, normalized);
    let dim = cols.len();
    DMatrix::from_fn(dim, dim, |i, j| cols[j][i])
}

fn add_correction(m: &mut DMatrix<f64>, kernel: &[DiscMap], complement: &[DiscMap]) {
    for (k, h) in kernel.iter().zip(complement) {
        let w = real_weights(k.grid(), k.dim());
        let kv: Vec<f64> = to_real_vec(k).iter().zip(&w).map(|(a, b)| a * b).collect();
        let hv = to_real_vec(h);
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                m[(i, j)] += hv[i] * kv[j];
            }
        }
    }
}

/// `S M S^{-1}` with `S = diag(sqrt(w))`, so Euclidean singular values are
/// weighted-L² operator quantities.
fn weighted(m: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (w[i] / w[j]).sqrt())
}

/// Holomorphic candidates `ζ^k e_i` and `i ζ^k e_i`, by degree.
pub fn complement_dictionary(
    grid: &Arc<DiscGrid>,
    dim: usize,
    normalized: bool,
    max_degree: usize,
) -> Vec<DiscMap> {
    let start = if normalized { 2 } else { 0 };
    let mut out = Vec::new();
    for k in start..=max_degree {
        for i in 0..dim {
            for unit in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                out.push(DiscMap::from_fn(grid, dim, |z| {
                    let mut v = vec![C64::new(0.0, 0.0); dim];
                    v[i] = unit * z.powu(k as u32);
                    v
                }));
            }
        }
    }
    out
}

/// Build `F̃` around `f` for the structure with Beltrami field `a`.
pub fn build_corrected(a: &BeltramiField, f: &DiscMap, normalized: bool) -> Result<CorrectedOperator> {
    build_corrected_with(a, f, normalized, &BuildOptions::default())
}

pub fn build_corrected_with(
    a: &BeltramiField,
    f: &DiscMap,
    normalized: bool,
    opts: &BuildOptions,
) -> Result<CorrectedOperator> {
    let lin = Linearization::at(a, f)?;
    let mut op = build_from_linearization(lin, f, normalized, opts)?;
    op.a = Some(a.clone());
    Ok(op)
}

/// Build the correction for a prescribed linearization. The result has no
/// nonlinear part, so [`CorrectedOperator::apply_f_tilde`] is unavailable.
pub fn build_from_linearization(
    lin: Linearization,
    base: &DiscMap,
    normalized: bool,
    opts: &BuildOptions,
) -> Result<CorrectedOperator> {
    let grid = lin.grid.clone();
    let dim = lin.dim;
    let mut op = CorrectedOperator {
        a: None,
        base_disc: base.clone(),
        kernel_basis: Vec::new(),
        complement_basis: Vec::new(),
        normalized,
        inv_norm_estimate: 1.0,
        singular_values: Vec::new(),
        kernel_threshold: 0.0,
        lin,
        matrix: Arc::new(OnceLock::new()),
    };
    if op.lin.is_trivial() {
        return Ok(op);
    }
    let real_dim = op.real_dim();
    if real_dim > opts.dense_limit {
        op.inv_norm_estimate = estimate_inverse_norm(&op)?;
        return Ok(op);
    }

    let w = real_weights(&grid, dim);
    let m = assemble(&op.lin, normalized);
    let mw = weighted(&m, &w);
    // Singular values alone are much cheaper; vectors only when a kernel shows up.
    let mut sigma: Vec<f64> = mw.singular_values().iter().copied().collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    let threshold = opts.kernel_tol * sigma[0];
    let sigma_min = *sigma.last().expect("nonempty");
    op.singular_values = sigma;
    op.kernel_threshold = threshold;
    if sigma_min >= threshold {
        op.inv_norm_estimate = 1.0 / sigma_min;
        let _ = op.matrix.set(m);
        return Ok(op);
    }

    let svd = mw.svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let mut order: Vec<usize> = (0..real_dim).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let kernel_idx: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| svd.singular_values[i] < threshold)
        .collect();
    for &i in &kernel_idx {
        let x: Vec<f64> = (0..real_dim).map(|r| vt[(i, r)] / w[r].sqrt()).collect();
        let v = from_real_vec(&grid, dim, &x);
        let nrm = v.l2_norm();
        op.kernel_basis.push(v.scale_real(1.0 / nrm));
    }
    let cokernel: Vec<DVector<f64>> = kernel_idx.iter().map(|&i| u.column(i).into_owned()).collect();
    let max_degree = opts.max_degree.unwrap_or(grid.n_angular() / 2 - 1);
    op.complement_basis = select_complement(
        &cokernel,
        &complement_dictionary(&grid, dim, normalized, max_degree),
        &w,
    )?;

    let mut corrected = m;
    add_correction(&mut corrected, &op.kernel_basis, &op.complement_basis);
    let sigma_min = weighted(&corrected, &w).singular_values().min();
    if sigma_min < threshold {
        return Err(Error::DictionaryExhausted {
            found: 0,
            needed: op.kernel_basis.len(),
        });
    }
    op.inv_norm_estimate = 1.0 / sigma_min;
    let _ = op.matrix.set(corrected);
    Ok(op)
}

/// Orthonormal (weighted L²) basis of the discrete cokernel of the
/// uncorrected `d_f F`: the `V` with `⟨d_f F(U), V⟩ = 0` for every `U`.
pub fn discrete_cokernel(lin: &Linearization, normalized: bool, kernel_tol: f64) -> Vec<DiscMap> {
    if lin.is_trivial() {
        return Vec::new();
    }
    let w = real_weights(&lin.grid, lin.dim);
    let svd = weighted(&assemble(lin, normalized), &w).svd(true, false);
    let u = svd.u.as_ref().expect("requested U");
    let threshold = kernel_tol * svd.singular_values.max();
    (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] < threshold)
        .map(|i| {
            let x: Vec<f64> = (0..u.nrows()).map(|r| u[(r, i)] / w[r].sqrt()).collect();
            from_real_vec(&lin.grid, lin.dim, &x)
        })
        .collect()
}

/// For `V` in the cokernel, `W = conj(T(conj V))` satisfies
/// `W_ζ - conj(B1^T) W - B2^T conj(W) = 0`; returns the sup of the left side.
/// Requires `A(f) = 0` along the disc.
pub fn generalized_analytic_residual(lin: &Linearization, v: &DiscMap) -> Result<f64> {
    if v.dim() != lin.dim || !v.grid().as_ref().eq(lin.grid.as_ref()) {
        return Err(Error::Mismatch);
    }
    if lin.a_f.iter().any(|m| m.iter().any(|c| c.norm() != 0.0)) {
        return Err(Error::Precondition("the cokernel equation assumes A(f) = 0 along the disc".into()));
    }
    let w = transform(&v.conj(), false).conj();
    let (wz, _) = differentiate(&w);
    let mut sup = 0.0f64;
    for n in 0..lin.grid.node_count() {
        let wn = DVector::from_column_slice(w.node(n));
        let r = DVector::from_column_slice(wz.node(n))
            - lin.b1[n].transpose().map(|c| c.conj()) * &wn
            - lin.b2[n].transpose() * wn.map(|c| c.conj());
        sup = sup.max(r.norm());
    }
    Ok(sup)
}

/// Greedily pick dictionary elements whose cokernel projections are independent.
fn select_complement(
    cokernel: &[DVector<f64>],
    dictionary: &[DiscMap],
    w: &[f64],
) -> Result<Vec<DiscMap>> {
    let needed = cokernel.len();
    let mut chosen = Vec::new();
    let mut ortho: Vec<DVector<f64>> = Vec::new();
    for h in dictionary {
        let sh: Vec<f64> = to_real_vec(h).iter().zip(w).map(|(x, w)| x * w.sqrt()).collect();
        let sh = DVector::from_vec(sh);
        let scale = sh.norm();
        let mut p = DVector::from_iterator(needed, cokernel.iter().map(|u| u.dot(&sh)));
        for q in &ortho {
            let c = q.dot(&p);
            p -= q * c;
        }
        let pn = p.norm();
        if pn > 1e-6 * scale {
            ortho.push(p / pn);
            chosen.push(h.clone());
            if chosen.len() == needed {
                return Ok(chosen);
            }
        }
    }
    Err(Error::DictionaryExhausted {
        found: chosen.len(),
        needed,
    })
}

/// `1/σ_min` by inverse iteration on the weighted normal equations.
fn estimate_inverse_norm(op: &CorrectedOperator) -> Result<f64> {
    let grid = op.lin.grid.clone();
    let mut x = DiscMap::from_fn(&grid, op.lin.dim, |z| {
        vec![C64::new(1.0, 0.0) + z * 0.5 + z.conj() * 0.25; op.lin.dim]
    });
    x = x.scale_real(1.0 / x.l2_norm());
    let mut est = 1.0;
    for _ in 0..8 {
        let y = solve_plain(op, &x)?;
        let ny = y.l2_norm();
        if ny == 0.0 {
            break;
        }
        est = ny;
        x = y.scale_real(1.0 / ny);
    }
    Ok(est)
}

/// `d_f F̃(V)`.
pub fn apply_df(op: &CorrectedOperator, v: &DiscMap) -> Result<DiscMap> {
    if !v.same_shape(&op.base_disc) {
        return Err(Error::Mismatch);
    }
    let mut out = op.lin.apply(v, op.normalized);
    for (c, h) in op.correction(v)? {
        out = out.axpy(c, h)?;
    }
    Ok(out)
}

/// Adjoint of `d_f F̃` in the weighted real inner product: `W^{-1} M^T W`.
pub fn apply_adjoint_df(op: &CorrectedOperator, v: &DiscMap) -> Result<DiscMap> {
    if !v.same_shape(&op.base_disc) {
        return Err(Error::Mismatch);
    }
    if op.lin.is_trivial() && op.kernel_basis.is_empty() {
        return Ok(v.clone());
    }
    let w = real_weights(&op.lin.grid, op.lin.dim);
    let x: Vec<f64> = to_real_vec(v).iter().zip(&w).map(|(a, b)| a * b).collect();
    let y = op.matrix().tr_mul(&DVector::from_vec(x));
    let y: Vec<f64> = y.iter().zip(&w).map(|(a, b)| a / b).collect();
    Ok(from_real_vec(&op.lin.grid, op.lin.dim, &y))
}

/// Continuous adjoint `V - conj(B1^T T(conj V)) - B2^T T(conj V)`, valid when
/// `A(f) = 0` along the disc, no correction terms are present and `T` is not
/// normalized.
pub fn formula_adjoint_df(op: &CorrectedOperator, v: &DiscMap) -> Result<DiscMap> {
    if !v.same_shape(&op.base_disc) {
        return Err(Error::Mismatch);
    }
    let tv = transform(&v.conj(), false);
    let mut out = v.clone();
    for n in 0..op.lin.grid.node_count() {
        let t = DVector::from_column_slice(tv.node(n));
        let s = (op.lin.b1[n].transpose() * &t).map(|c| c.conj()) + op.lin.b2[n].transpose() * &t;
        for (o, d) in out.node_mut(n).iter_mut().zip(s.iter()) {
            *o -= d;
        }
    }
    Ok(out)
}

/// Outcome of a linear solve with `d_f F̃`.
#[derive(Clone, Debug)]
pub struct LinearSolution {
    pub solution: DiscMap,
    pub iterations: usize,
    pub relative_residual: f64,
    /// `‖V‖_{1,α} / (C ‖W‖_{1,α})`.
    pub holder_ratio: f64,
    /// `max(0, holder_ratio - 1)`.
    pub slack: f64,
}

fn solve_plain(op: &CorrectedOperator, w: &DiscMap) -> Result<DiscMap> {
    if op.lin.is_trivial() && op.kernel_basis.is_empty() {
        return Ok(w.clone());
    }
    let grid = op.lin.grid.clone();
    let dim = op.lin.dim;
    let b = to_real_vec(w);
    let out = gmres(
        |x| {
            let v = from_real_vec(&grid, dim, x);
            to_real_vec(&apply_df(op, &v).expect("shape checked"))
        },
        &b,
        GmresOptions::default(),
    )?;
    Ok(from_real_vec(&grid, dim, &out.x))
}

/// Solve `d_f F̃(V) = W`.
pub fn solve_df(op: &CorrectedOperator, w: &DiscMap) -> Result<LinearSolution> {
    solve_df_with(op, w, &HolderConfig::default(), GmresOptions::default())
}

pub fn solve_df_with(
    op: &CorrectedOperator,
    w: &DiscMap,
    holder: &HolderConfig,
    gmres_opts: GmresOptions,
) -> Result<LinearSolution> {
    if !w.same_shape(&op.base_disc) {
        return Err(Error::Mismatch);
    }
    let (solution, iterations, relative_residual) = if op.lin.is_trivial() && op.kernel_basis.is_empty() {
        (w.clone(), 0, 0.0)
    } else {
        let grid = op.lin.grid.clone();
        let dim = op.lin.dim;
        let out = gmres(
            |x| {
                let v = from_real_vec(&grid, dim, x);
                to_real_vec(&apply_df(op, &v).expect("shape checked"))
            },
            &to_real_vec(w),
            gmres_opts,
        )?;
        (from_real_vec(&grid, dim, &out.x), out.iterations, out.relative_residual)
    };
    let hw = holder_norm(w, holder);
    let holder_ratio = if hw == 0.0 {
        0.0
    } else {
        holder_norm(&solution, holder) / (op.inv_norm_estimate * hw)
    };
    Ok(LinearSolution {
        solution,
        iterations,
        relative_residual,
        holder_ratio,
        slack: (holder_ratio - 1.0).max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::structure::{structure_zoo, to_beltrami};
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn scalar_field(eps: f64) -> BeltramiField {
        BeltramiField::new(1, move |z| CMat::from_element(1, 1, z[0].conj() * eps))
    }

    #[test]
    fn identity_when_standard() {
        let g = make_grid(8, 16).unwrap();
        let a = BeltramiField::zero(2);
        let f = DiscMap::from_fn(&g, 2, |z| vec![z, z.conj() * z]);
        assert_eq!(apply_f(&a, &f, false).unwrap(), f);
        let op = build_corrected(&a, &f, false).unwrap();
        assert_eq!(op.kernel_dim(), 0);
        assert_eq!(op.inv_norm_estimate, 1.0);
        assert_eq!(apply_df(&op, &f).unwrap(), f);
        assert_eq!(solve_df(&op, &f).unwrap().solution, f);
        assert_abs_diff_eq!(residual(&a, &DiscMap::scalar_fn(&g, |z| z.conj())).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_beltrami_closed_form() {
        let g = make_grid(10, 20).unwrap();
        let eps = 0.2;
        let a = BeltramiField::new(1, move |_| CMat::from_element(1, 1, c(eps, 0.0)));
        let f = DiscMap::scalar_fn(&g, |z| z);
        let out = apply_f(&a, &f, false).unwrap();
        for n in 0..g.node_count() {
            let z = g.node_point(n);
            assert_abs_diff_eq!((out.node(n)[0] - (z + z.conj() * eps)).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn linearization_example_and_consistency() {
        let g = make_grid(10, 20).unwrap();
        let eps = 0.3;
        let a = scalar_field(eps);
        let f = DiscMap::scalar_fn(&g, |z| z);
        let op = build_corrected(&a, &f, false).unwrap();
        assert_eq!(op.kernel_dim(), 0);
        let one = DiscMap::constant(&g, &[c(1.0, 0.0)]);
        let d = apply_df(&op, &one).unwrap();
        for n in 0..g.node_count() {
            let z = g.node_point(n);
            assert_abs_diff_eq!((d.node(n)[0] - (1.0 + z.conj() * eps)).norm(), 0.0, epsilon = 1e-11);
        }
        let v = DiscMap::scalar_fn(&g, |z| (z * 0.8).sin() + z.conj() * c(0.1, 0.3));
        let lin = apply_df(&op, &v).unwrap();
        let f0 = apply_f(&a, &f, false).unwrap();
        let err = |t: f64| {
            let ft = apply_f(&a, &f.axpy(t, &v).unwrap(), false).unwrap();
            ft.sub(&f0).unwrap().scale_real(1.0 / t).sub(&lin).unwrap().sup_norm()
        };
        let (e1, e2) = (err(1e-3), err(5e-4));
        assert!((e2 / e1 - 0.5).abs() < 0.05, "{e1} {e2}");
    }

    #[test]
    fn real_linearity() {
        let g = make_grid(8, 16).unwrap();
        let j = structure_zoo("pullback_poly", &[0.1, 1.0]).unwrap();
        let a = to_beltrami(&j);
        let f = DiscMap::scalar_fn(&g, |z| z * 0.7 + z * z * 0.1);
        let op = build_corrected(&a, &f, false).unwrap();
        let u = DiscMap::scalar_fn(&g, |z| z.exp());
        let v = DiscMap::scalar_fn(&g, |z| z.conj() * c(0.0, 2.0));
        let lhs = apply_df(&op, &u.axpy(-1.7, &v).unwrap()).unwrap();
        let rhs = apply_df(&op, &u).unwrap().axpy(-1.7, &apply_df(&op, &v).unwrap()).unwrap();
        assert!(lhs.sub(&rhs).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn adjoint_duality_and_solve() {
        let g = make_grid(8, 16).unwrap();
        let j = structure_zoo("pullback_poly", &[0.1]).unwrap();
        let a = to_beltrami(&j);
        let f = DiscMap::from_fn(&g, 2, |z| vec![z * 0.6, z * z * 0.3 + c(0.1, 0.0)]);
        let op = build_corrected(&a, &f, false).unwrap();
        let u = DiscMap::from_fn(&g, 2, |z| vec![z.exp(), z.conj() * z]);
        let v = DiscMap::from_fn(&g, 2, |z| vec![c(0.3, -0.2) + z.conj(), (z * 2.0).cos()]);
        let lhs = apply_df(&op, &u).unwrap().inner(&v).unwrap();
        let rhs = u.inner(&apply_adjoint_df(&op, &v).unwrap()).unwrap();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10 * lhs.abs().max(1.0));
        let sol = solve_df(&op, &v).unwrap();
        assert!(apply_df(&op, &sol.solution).unwrap().sub(&v).unwrap().sup_norm() < 1e-10);
        assert!(op.inv_norm_estimate.is_finite() && op.inv_norm_estimate > 0.0);
    }

    #[test]
    fn formula_adjoint_agrees_with_transpose() {
        // A(f) vanishes identically when f stays on the line conj(z_1)= 0, i.e. f_1 = 0.
        let g = make_grid(12, 24).unwrap();
        let j = structure_zoo("pullback_poly", &[0.2]).unwrap();
        let a = to_beltrami(&j);
        let f = DiscMap::from_fn(&g, 2, |z| vec![c(0.0, 0.0), z]);
        let op = build_corrected(&a, &f, false).unwrap();
        let v = DiscMap::from_fn(&g, 2, |z| vec![z.conj() * z + c(0.5, 0.0), z.exp()]);
        let d = apply_adjoint_df(&op, &v).unwrap().sub(&formula_adjoint_df(&op, &v).unwrap()).unwrap();
        assert!(d.sup_norm() < 1e-6, "{}", d.sup_norm());
    }

    #[test]
    fn manufactured_kernel_is_corrected() {
        // V = (conj z, |z|^2 - 1) = T(1, ξ) and B1 = [[-z, 1], [-z^2, z]] give
        // B1 V = -V_ζ̄, so V + T(B1 V) = 0; iV is a second kernel vector.
        let g = make_grid(8, 16).unwrap();
        let n = g.node_count();
        let zero = vec![CMat::zeros(2, 2); n];
        let b1: Vec<CMat> = (0..n)
            .map(|k| {
                let z = g.node_point(k);
                CMat::from_row_slice(2, 2, &[-z, c(1.0, 0.0), -z * z, z])
            })
            .collect();
        let lin = Linearization::from_coefficients(&g, 2, zero.clone(), b1, zero).unwrap();
        let v0 = DiscMap::from_fn(&g, 2, |z| vec![z.conj(), c(z.norm_sqr() - 1.0, 0.0)]);
        assert!(lin.apply(&v0, false).sup_norm() < 1e-12);
        let base = DiscMap::zeros(&g, 2);
        let op = build_from_linearization(lin, &base, false, &BuildOptions::default()).unwrap();
        assert_eq!(op.kernel_dim(), 2);
        let iv0 = v0.scale(c(0.0, 1.0));
        let captured: f64 = [&v0, &iv0]
            .iter()
            .map(|v| {
                let proj: f64 = op.kernel_basis.iter().map(|k| k.inner(v).unwrap().powi(2)).sum();
                proj / v.l2_norm().powi(2)
            })
            .sum();
        assert_abs_diff_eq!(captured, 2.0, epsilon = 1e-8);
        assert!(op.inv_norm_estimate.is_finite());
        assert!(1.0 / op.inv_norm_estimate > op.kernel_threshold);
        assert!(matches!(op.apply_f_tilde(&base), Err(Error::NoNonlinearPart)));
        for h in &op.complement_basis {
            let (_, dzb) = differentiate(h);
            assert!(dzb.sup_norm() < 1e-12);
        }
        let w = DiscMap::from_fn(&g, 2, |z| vec![z.exp(), z.conj()]);
        let sol = solve_df(&op, &w).unwrap();
        assert!(apply_df(&op, &sol.solution).unwrap().sub(&w).unwrap().sup_norm() < 1e-9);
    }
}
