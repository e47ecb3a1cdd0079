//! Variational vector fields along J-holomorphic discs.
//!
//! `V` is variational along `f` when `V_x + J(f) V_y + d_f J(V) f_y = 0`, or
//! equivalently `V_ζ̄ + A(f) conj(V_ζ) + d_f A(V) conj(f_ζ) = 0`.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cauchy::schwarz_extend;
use crate::error::{Error, Result};
use crate::grid::{differentiate, real_derivatives, DiscGrid, DiscMap, C64};
use crate::solver::DiscFamily;
use crate::structure::{to_complex, to_real, BeltramiField, StructureField};

/// Sup norm of `V_x + J(f) V_y + d_f J(V) f_y`.
pub fn variational_residual_real(j: &StructureField, f: &DiscMap, v: &DiscMap) -> Result<f64> {
    if !f.same_shape(v) || f.dim() != j.dim() {
        return Err(Error::Mismatch);
    }
    let (vx, vy) = real_derivatives(v);
    let (_, fy) = real_derivatives(f);
    let mut sup = 0.0f64;
    for n in 0..f.grid().node_count() {
        let z = f.node(n);
        let jz = j.eval(z)?;
        let dj = j.directional_derivative(z, v.node(n))?;
        let r = to_real(vx.node(n)) + &jz * to_real(vy.node(n)) + dj * to_real(fy.node(n));
        sup = sup.max(r.norm());
    }
    Ok(sup)
}

/// Sup norm of `V_ζ̄ + A(f) conj(V_ζ) + d_f A(V) conj(f_ζ)`.
pub fn variational_residual_complex(a: &BeltramiField, f: &DiscMap, v: &DiscMap) -> Result<f64> {
    if !f.same_shape(v) || f.dim() != a.dim() {
        return Err(Error::Mismatch);
    }
    let (vz, vzb) = differentiate(v);
    if a.is_zero() {
        return Ok(vzb.sup_norm());
    }
    let (fz, _) = differentiate(f);
    let mut sup = 0.0f64;
    for n in 0..f.grid().node_count() {
        let z = f.node(n);
        let conj = |s: &[C64]| DVector::from_iterator(s.len(), s.iter().map(|c| c.conj()));
        let r = DVector::from_column_slice(vzb.node(n))
            + a.eval(z)? * conj(vz.node(n))
            + a.differential(z, v.node(n))? * conj(fz.node(n));
        sup = sup.max(r.norm());
    }
    Ok(sup)
}

/// A holomorphic scalar multiplier for [`phi_times_fprime`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Multiplier {
    /// `φ(ζ) = Σ_k c_k ζ^k`.
    Coefficients(Vec<C64>),
    /// Real boundary samples of `Re φ` at the grid angles, extended with `Im φ(0) = 0`.
    Boundary(Vec<f64>),
}

impl Multiplier {
    pub fn to_map(&self, grid: &Arc<DiscGrid>) -> Result<DiscMap> {
        match self {
            Multiplier::Coefficients(c) => Ok(DiscMap::scalar_fn(grid, |z| {
                c.iter().rev().fold(C64::new(0.0, 0.0), |acc, a| acc * z + a)
            })),
            Multiplier::Boundary(chi) => schwarz_extend(grid, std::slice::from_ref(chi)),
        }
    }
}

/// Tolerance on `‖φ_ζ̄‖_sup` relative to `max(1, ‖φ‖_sup)`.
pub const HOLOMORPHY_TOL: f64 = 1e-8;

pub fn check_holomorphic(phi: &DiscMap) -> Result<()> {
    let (_, dzb) = differentiate(phi);
    let tol = HOLOMORPHY_TOL * phi.sup_norm().max(1.0);
    let res = dzb.sup_norm();
    if res > tol {
        return Err(Error::NotHolomorphic { residual: res, tol });
    }
    Ok(())
}

/// `φ·f' = a f' + b J(f) f'` with `a = Re φ`, `b = Im φ` and `f' = f_x`.
pub fn phi_times_fprime(j: &StructureField, f: &DiscMap, phi: &DiscMap) -> Result<DiscMap> {
    if phi.dim() != 1 || !phi.grid().as_ref().eq(f.grid().as_ref()) {
        return Err(Error::Mismatch);
    }
    check_holomorphic(phi)?;
    let (fx, _) = real_derivatives(f);
    let mut out = DiscMap::zeros(f.grid(), f.dim());
    for n in 0..f.grid().node_count() {
        let p = phi.node(n)[0];
        let jf = j.apply(f.node(n), fx.node(n))?;
        for (k, o) in out.node_mut(n).iter_mut().enumerate() {
            *o = fx.node(n)[k] * p.re + jf[k] * p.im;
        }
    }
    Ok(out)
}

pub fn phi_times_fprime_from(j: &StructureField, f: &DiscMap, phi: &Multiplier) -> Result<DiscMap> {
    phi_times_fprime(j, f, &phi.to_map(f.grid())?)
}

/// `J(f) v` at every node.
pub fn apply_structure(j: &StructureField, f: &DiscMap, v: &DiscMap) -> Result<DiscMap> {
    let mut out = v.clone();
    for n in 0..f.grid().node_count() {
        let w = to_complex(&(j.eval(f.node(n))? * to_real(v.node(n))));
        out.node_mut(n).copy_from_slice(&w);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RealizationEntry {
    pub t: f64,
    /// `‖(f_t - f_{-t}) / 2t - V‖_sup`.
    pub defect: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RealizationReport {
    /// Entries by decreasing `t`.
    pub entries: Vec<RealizationEntry>,
    /// `log(d_i / d_{i+1}) / log(t_i / t_{i+1})` for consecutive entries;
    /// infinite (written as `null`) when a defect is exactly zero.
    #[serde(deserialize_with = "crate::io::de_f64_vec_null_inf")]
    pub orders: Vec<f64>,
    #[serde(deserialize_with = "crate::io::de_f64_null_inf")]
    pub observed_order: f64,
    pub final_defect: f64,
    /// False when the defect fails to decrease at order at least 1/2.
    pub converging: bool,
}

/// Compare symmetric difference quotients of the family with its field.
pub fn check_derivative_realization(family: &DiscFamily) -> Result<RealizationReport> {
    let mut ts: Vec<f64> = family
        .samples
        .iter()
        .map(|s| s.t)
        .filter(|&t| t > 0.0 && family.sample(-t).is_some())
        .collect();
    ts.sort_by(|a, b| b.total_cmp(a));
    if ts.len() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "need at least two symmetric pairs ±t, found {}",
            ts.len()
        )));
    }
    let mut entries = Vec::with_capacity(ts.len());
    for &t in &ts {
        let plus = &family.sample(t).expect("filtered").disc;
        let minus = &family.sample(-t).expect("filtered").disc;
        let quotient = plus.sub(minus)?.scale_real(0.5 / t);
        entries.push(RealizationEntry {
            t,
            defect: quotient.sub(&family.field)?.sup_norm(),
        });
    }
    let orders: Vec<f64> = entries
        .windows(2)
        .map(|w| {
            if w[1].defect == 0.0 || w[0].defect == 0.0 {
                f64::INFINITY
            } else {
                (w[0].defect / w[1].defect).ln() / (w[0].t / w[1].t).ln()
            }
        })
        .collect();
    let observed_order = *orders.last().expect("two entries");
    let final_defect = entries.last().expect("two entries").defect;
    let converging = final_defect < 1e-12 || observed_order >= 0.5;
    Ok(RealizationReport {
        entries,
        orders,
        observed_order,
        final_defect,
        converging,
    })
}
