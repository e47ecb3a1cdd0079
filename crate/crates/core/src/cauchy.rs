//! The Cauchy–Green transform `T(u)(z) = -(1/π) ∬_D u(ξ) / (ξ - z) dA(ξ)`, its
//! normalized variant and the Schwarz operator.
//!
//! `T` is evaluated mode by mode. Writing `u = Σ_k u_k(ρ) e^{ikθ}` and expanding
//! `1/(ξ - z)` in a geometric series on either side of `|ξ| = |z|`, input mode
//! `k` lands in output mode `k - 1` with radial profile
//!
//! ```text
//! k >= 1:  O(r) = -2 ∫_r^1 (r/ρ)^{k-1} u_k(ρ) dρ
//! k <= 0:  O(r) =  2 ∫_0^r (ρ/r)^{1-k} u_k(ρ) dρ
//! ```
//!
//! The radial integrals are done with composite Gauss–Legendre on panels
//! that shrink geometrically with the kernel's decay, applied to the
//! polynomial interpolant of `u_k`. The resulting `n_r × n_r` matrices depend
//! only on `(n_r, k)` and are cached.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{value_at_origin, zeta_derivative_at_origin, DiscGrid, DiscMap, C64};

const GL_ORDER: usize = 24;
const KERNEL_CUTOFF: f64 = 1e-18;
const MAX_PANEL: f64 = 0.125;

type KernelCache = Mutex<HashMap<(usize, i64), Arc<DMatrix<f64>>>>;

fn cache() -> &'static KernelCache {
    static CACHE: OnceLock<KernelCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Golub–Welsch).
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(order, order, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

fn gl_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_ORDER))
}

/// Panels covering the support of the radial kernel for target radius `r`.
fn panels(r: f64, k: i64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    if k >= 1 {
        let power = (k - 1) as f64;
        let step = if power > 0.0 { 2.0 / power } else { f64::INFINITY };
        let mut a = r;
        while a < 1.0 {
            if power > 0.0 && (r / a).powf(power) < KERNEL_CUTOFF {
                break;
            }
            let b = (a + (a * step).min(MAX_PANEL)).min(1.0);
            out.push((a, b));
            a = b;
        }
    } else {
        let power = (1 - k) as f64;
        let step = 2.0 / power;
        let mut b = r;
        while b > 0.0 {
            if (b / r).powf(power) < KERNEL_CUTOFF {
                break;
            }
            let a = (b - (b * step).min(MAX_PANEL)).max(0.0);
            out.push((a, b));
            b = a;
        }
    }
    out
}

fn build_kernel(grid: &DiscGrid, k: i64) -> DMatrix<f64> {
    let nr = grid.n_radial();
    let (x, w) = gl_rule();
    let mut kmat = DMatrix::zeros(nr, nr);
    for (i, &r) in grid.radii().iter().enumerate() {
        for (a, b) in panels(r, k) {
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (xq, wq) in x.iter().zip(w) {
                let rho = mid + half * xq;
                let weight = if k >= 1 {
                    -2.0 * (r / rho).powi((k - 1) as i32)
                } else {
                    2.0 * (rho / r).powi((1 - k) as i32)
                };
                let row = grid.radial_interp_row(k, rho);
                let scale = weight * wq * half;
                for (l, v) in row.iter().enumerate() {
                    kmat[(i, l)] += scale * v;
                }
            }
        }
    }
    kmat
}

fn kernel(grid: &DiscGrid, k: i64) -> Arc<DMatrix<f64>> {
    let key = (grid.n_radial(), k);
    if let Some(m) = cache().lock().expect("kernel cache").get(&key) {
        return m.clone();
    }
    let m = Arc::new(build_kernel(grid, k));
    cache().lock().expect("kernel cache").insert(key, m.clone());
    m
}

/// Input modes that survive the transform: the Nyquist input is unresolved
/// and mode `-M/2 + 1` would land on it.
fn active_bins(grid: &DiscGrid) -> Vec<usize> {
    let half = (grid.n_angular() / 2) as i64;
    (0..grid.n_angular())
        .filter(|&b| {
            let k = grid.mode_of_bin(b);
            k != -half && k != -half + 1
        })
        .collect()
}

/// `T` applied to one scalar nodal field.
pub fn cauchy_green_scalar(grid: &DiscGrid, field: &[C64]) -> Vec<C64> {
    let coeffs = grid.analyze(field);
    let mut out = vec![C64::new(0.0, 0.0); coeffs.len()];
    for b in active_bins(grid) {
        let k = grid.mode_of_bin(b);
        let prof = grid.profile(&coeffs, b);
        if prof.iter().all(|c| c.norm() == 0.0) {
            continue;
        }
        let km = kernel(grid, k);
        let o = DVector::from_fn(grid.n_radial(), |i, _| {
            (0..grid.n_radial()).map(|l| prof[l] * km[(i, l)]).sum::<C64>()
        });
        grid.set_profile(&mut out, grid.bin_of_mode(k - 1), &o);
    }
    grid.synthesize(&out)
}

/// `T(u)`, componentwise on vector-valued maps.
pub fn cauchy_green(u: &DiscMap) -> DiscMap {
    let grid = u.grid();
    let comps: Vec<Vec<C64>> = (0..u.dim())
        .map(|c| cauchy_green_scalar(grid, &u.component(c)))
        .collect();
    DiscMap::from_components(grid, &comps)
}

/// `T₀(u) = T(u) - T(u)(0) - ζ ∂_ζ T(u)(0)`: still a right inverse of `∂̄`,
/// and vanishes to first order in `ζ` at the origin.
pub fn cauchy_green_normalized(u: &DiscMap) -> DiscMap {
    normalize_at_origin(&cauchy_green(u))
}

/// Subtract the holomorphic 1-jet `v(0) + ζ v_ζ(0)`.
pub fn normalize_at_origin(v: &DiscMap) -> DiscMap {
    let v0 = value_at_origin(v);
    let v1 = zeta_derivative_at_origin(v);
    let mut out = v.clone();
    let grid = v.grid().clone();
    for n in 0..grid.node_count() {
        let z = grid.node_point(n);
        for (c, x) in out.node_mut(n).iter_mut().enumerate() {
            *x -= v0[c] + z * v1[c];
        }
    }
    out
}

/// `T` or `T₀` selected by a flag.
pub fn transform(u: &DiscMap, normalized: bool) -> DiscMap {
    if normalized {
        cauchy_green_normalized(u)
    } else {
        cauchy_green(u)
    }
}

/// Complex `N × N` matrix of the scalar transform on the grid nodes.
pub fn cauchy_green_matrix(grid: &Arc<DiscGrid>, normalized: bool) -> DMatrix<C64> {
    let n = grid.node_count();
    let cols: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[j] = C64::new(1.0, 0.0);
            let u = DiscMap::new(grid.clone(), 1, e).expect("unit vector");
            transform(&u, normalized).into_values()
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| cols[j][i])
}

/// Holomorphic `φ` with `Re φ = chi` on the boundary and `Im φ(0) = 0`.
///
/// `chi[c]` holds the real boundary samples of component `c` at the grid's
/// angles. Mode `k >= 1` becomes `2 c_k ζ^k`, mode 0 stays; the Nyquist mode
/// is dropped.
pub fn schwarz_extend(grid: &Arc<DiscGrid>, chi: &[Vec<f64>]) -> Result<DiscMap> {
    let m = grid.n_angular();
    if chi.is_empty() {
        return Err(Error::Precondition("schwarz_extend needs at least one component".into()));
    }
    let mut comps = Vec::with_capacity(chi.len());
    for samples in chi {
        if samples.len() != m {
            return Err(Error::Precondition(format!(
                "boundary data has {} samples, grid has {m} angles",
                samples.len()
            )));
        }
        let row: Vec<C64> = samples.iter().map(|&x| C64::new(x, 0.0)).collect();
        let c = grid.analyze(&row);
        let coeffs: Vec<C64> = (0..m / 2)
            .map(|k| if k == 0 { C64::new(c[0].re, 0.0) } else { 2.0 * c[k] })
            .collect();
        let values = grid
            .points()
            .iter()
            .map(|&z| coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &a| acc * z + a))
            .collect();
        comps.push(values);
    }
    Ok(DiscMap::from_components(grid, &comps))
}
