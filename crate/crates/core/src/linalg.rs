//! Restarted GMRES and real-vector views of disc maps.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{DiscGrid, DiscMap, C64};

/// Interleaved real coordinates `(re, im)` of every node and component.
pub fn to_real_vec(f: &DiscMap) -> Vec<f64> {
    f.values().iter().flat_map(|c| [c.re, c.im]).collect()
}

pub fn from_real_vec(grid: &Arc<DiscGrid>, dim: usize, x: &[f64]) -> DiscMap {
    let values = x.chunks(2).map(|p| C64::new(p[0], p[1])).collect();
    DiscMap::new(grid.clone(), dim, values).expect("length matches grid")
}

/// Quadrature weight of every real coordinate.
pub fn real_weights(grid: &DiscGrid, dim: usize) -> Vec<f64> {
    grid.weights()
        .iter()
        .flat_map(|&w| std::iter::repeat_n(w, 2 * dim))
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Copy, Debug)]
pub struct GmresOptions {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            restart: 60,
            max_iter: 600,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solve `A x = b` from `x = 0`; stops at `|b - A x| <= tol |b|`.
pub fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    opts: GmresOptions,
) -> Result<GmresOutcome> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(GmresOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut iterations = 0;
    let mut rel = 1.0;
    while iterations < opts.max_iter {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= opts.tol {
            break;
        }
        let m = opts.restart;
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && iterations < opts.max_iter {
            let mut w = apply(&basis[k]);
            for (i, q) in basis.iter().enumerate() {
                h[i][k] = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(a, b)| *a -= h[i][k] * b);
            }
            // Second pass keeps the basis orthogonal when the operator is near identity.
            for (i, q) in basis.iter().enumerate() {
                let c = dot(&w, q);
                h[i][k] += c;
                w.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
            }
            let wn = norm(&w);
            h[k + 1][k] = wn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k += 1;
            rel = g[k].abs() / bnorm;
            if rel <= opts.tol || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (yi, q) in y.iter().zip(&basis) {
            x.iter_mut().zip(q).for_each(|(a, b)| *a += yi * b);
        }
    }
    // Report the true residual, not the recurrence estimate.
    let ax = apply(&x);
    let true_rel = norm(&b.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>()) / bnorm;
    if true_rel > opts.tol.max(rel) * 10.0 {
        return Err(Error::LinearSolve {
            iterations,
            residual: true_rel,
        });
    }
    Ok(GmresOutcome {
        x,
        iterations,
        relative_residual: true_rel,
    })
}
