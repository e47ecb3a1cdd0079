//! Damped Newton inversion of `F̃` and one-parameter families of discs
//! `f_t = F̃^{-1}(F̃(f) + t d_f F̃(V))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{holder_norm, value_at_origin, DiscMap, HolderConfig};
use crate::operator::{apply_df, apply_f, build_corrected_with, residual, solve_df_with, BuildOptions, CorrectedOperator};
use crate::linalg::GmresOptions;
use crate::structure::BeltramiField;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    pub max_iter: usize,
    /// Stop when `‖F̃(g) - target‖_sup <= tol`.
    pub tol: f64,
    /// Initial step factor in `(0, 1]`.
    pub damping: f64,
    /// Trust radius around the start disc, in the discrete `C^{1,α}` norm.
    pub epsilon_ball: f64,
    #[serde(skip)]
    pub holder: HolderConfig,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_iter: 30,
            tol: 1e-11,
            damping: 1.0,
            epsilon_ball: 1.0,
            holder: HolderConfig::default(),
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("newton tol must be positive, got {}", self.tol)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.epsilon_ball > 0.0) {
            return Err(Error::Config("epsilon_ball must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

const MIN_STEP: f64 = 1.0 / (1u64 << 20) as f64;

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub disc: DiscMap,
    pub iterations: usize,
    /// `‖F̃(g) - target‖_sup` at exit.
    pub residual: f64,
    /// Residual after each accepted step, starting with the initial one.
    pub history: Vec<f64>,
}

/// Solve `F̃(g) = target` by damped Newton from `start`, relinearizing every step.
pub fn invert_f(
    op: &CorrectedOperator,
    target: &DiscMap,
    start: &DiscMap,
    cfg: &NewtonConfig,
) -> Result<NewtonOutcome> {
    cfg.validate()?;
    if !target.same_shape(start) || !start.same_shape(&op.base_disc) {
        return Err(Error::Mismatch);
    }
    let gm = GmresOptions {
        tol: (cfg.tol * 1e-2).max(1e-14),
        ..GmresOptions::default()
    };
    let mut g = start.clone();
    let mut r = op.apply_f_tilde(&g)?.sub(target)?;
    let mut res = r.sup_norm();
    let mut history = vec![res];
    for it in 0..cfg.max_iter {
        if res <= cfg.tol {
            return Ok(NewtonOutcome {
                disc: g,
                iterations: it,
                residual: res,
                history,
            });
        }
        let local = op.relinearize(&g)?;
        let delta = solve_df_with(&local, &r, &cfg.holder, gm)?.solution;
        let mut step = cfg.damping;
        loop {
            let trial = g.axpy(-step, &delta)?;
            let accepted = match op.apply_f_tilde(&trial) {
                Ok(ft) => {
                    let tr = ft.sub(target)?;
                    let tres = tr.sup_norm();
                    if tres < res {
                        Some((trial, tr, tres))
                    } else {
                        None
                    }
                }
                Err(Error::OutsideBox { .. }) => None,
                Err(e) => return Err(e),
            };
            if let Some((trial, tr, tres)) = accepted {
                let dist = holder_norm(&trial.sub(start)?, &cfg.holder);
                if dist > cfg.epsilon_ball {
                    return Err(Error::TrustBallExit {
                        distance: dist,
                        radius: cfg.epsilon_ball,
                        last_residual: tres,
                    });
                }
                g = trial;
                r = tr;
                res = tres;
                history.push(res);
                break;
            }
            step *= 0.5;
            if step < MIN_STEP {
                return Err(Error::LineSearch { last_residual: res });
            }
        }
    }
    if res <= cfg.tol {
        return Ok(NewtonOutcome {
            disc: g,
            iterations: cfg.max_iter,
            residual: res,
            history,
        });
    }
    Err(Error::MaxIterations {
        iterations: cfg.max_iter,
        last_residual: res,
    })
}

#[derive(Clone, Debug)]
pub struct DiscSolution {
    pub disc: DiscMap,
    pub newton: NewtonOutcome,
    /// Nonlinear Cauchy–Riemann residual of the returned disc.
    pub cr_residual: f64,
    pub operator: CorrectedOperator,
}

/// Find the J-holomorphic disc `f` with `F̃(f) = h`, starting from `start`.
pub fn solve_disc(a: &BeltramiField, h: &DiscMap, start: &DiscMap, cfg: &NewtonConfig) -> Result<DiscSolution> {
    solve_disc_with(a, h, start, cfg, &BuildOptions::default())
}

pub fn solve_disc_with(
    a: &BeltramiField,
    h: &DiscMap,
    start: &DiscMap,
    cfg: &NewtonConfig,
    build: &BuildOptions,
) -> Result<DiscSolution> {
    let op = build_corrected_with(a, start, false, build)?;
    let newton = invert_f(&op, h, start, cfg)?;
    let cr_residual = residual(a, &newton.disc)?;
    Ok(DiscSolution {
        disc: newton.disc.clone(),
        newton,
        cr_residual,
        operator: op,
    })
}

/// Holomorphic data `F(f)` of a disc.
pub fn holomorphic_data(a: &BeltramiField, f: &DiscMap) -> Result<DiscMap> {
    apply_f(a, f, false)
}

#[derive(Clone, Debug)]
pub struct FamilySample {
    pub t: f64,
    pub disc: DiscMap,
    pub cr_residual: f64,
    pub newton_residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct DiscFamily {
    pub base: DiscMap,
    pub field: DiscMap,
    /// Largest `|t|` for which solves are attempted.
    pub t_max: f64,
    /// The a-priori radius `ε / (2 C ‖d F̃(V)‖_{1,α})`.
    pub t_hat: f64,
    /// Samples sorted by `t`; always contains `t = 0`.
    pub samples: Vec<FamilySample>,
    pub notices: Vec<String>,
    pub normalized: bool,
}

impl DiscFamily {
    pub fn sample(&self, t: f64) -> Option<&FamilySample> {
        self.samples.iter().find(|s| s.t == t)
    }

    pub fn max_cr_residual(&self) -> f64 {
        self.samples.iter().map(|s| s.cr_residual).fold(0.0, f64::max)
    }
}

/// Options for family generation beyond Newton.
#[derive(Clone, Copy, Debug)]
#[derive(Default)]
pub struct FamilyOptions {
    /// Override the a-priori `t_max`; `None` uses `ε / (2 C ‖d F̃(V)‖_{1,α})`.
    pub t_max: Option<f64>,
}


/// `f_t` for each requested `t`, warm-starting outward from `t = 0` in each direction.
pub fn make_family(
    op: &CorrectedOperator,
    f: &DiscMap,
    v: &DiscMap,
    t_values: &[f64],
    cfg: &NewtonConfig,
) -> Result<DiscFamily> {
    make_family_with(op, f, v, t_values, cfg, &FamilyOptions::default())
}

pub fn make_family_with(
    op: &CorrectedOperator,
    f: &DiscMap,
    v: &DiscMap,
    t_values: &[f64],
    cfg: &NewtonConfig,
    opts: &FamilyOptions,
) -> Result<DiscFamily> {
    cfg.validate()?;
    let a = op.a.as_ref().ok_or(Error::NoNonlinearPart)?;
    if !f.same_shape(v) || !f.same_shape(&op.base_disc) {
        return Err(Error::Mismatch);
    }
    let ff = op.apply_f_tilde(f)?;
    let dv = apply_df(op, v)?;
    let dv_norm = holder_norm(&dv, &cfg.holder);
    let t_hat = if dv_norm == 0.0 {
        f64::INFINITY
    } else {
        cfg.epsilon_ball / (2.0 * op.inv_norm_estimate * dv_norm)
    };
    let mut t_max = opts.t_max.unwrap_or(t_hat);
    let mut notices = Vec::new();
    let mut samples = vec![FamilySample {
        t: 0.0,
        disc: f.clone(),
        cr_residual: residual(a, f)?,
        newton_residual: 0.0,
        iterations: 0,
    }];

    for sign in [1.0, -1.0] {
        let mut ts: Vec<f64> = t_values
            .iter()
            .copied()
            .filter(|&t| t != 0.0 && t.signum() == sign)
            .collect();
        ts.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
        ts.dedup();
        let mut start = f.clone();
        for t in ts {
            if t.abs() > t_max {
                notices.push(format!("t = {t} skipped: beyond t_max = {t_max:.3e}"));
                continue;
            }
            let target = ff.axpy(t, &dv)?;
            match invert_f(op, &target, &start, cfg) {
                Ok(out) => {
                    samples.push(FamilySample {
                        t,
                        cr_residual: residual(a, &out.disc)?,
                        newton_residual: out.residual,
                        iterations: out.iterations,
                        disc: out.disc.clone(),
                    });
                    start = out.disc;
                }
                Err(e @ (Error::MaxIterations { .. }
                | Error::TrustBallExit { .. }
                | Error::LineSearch { .. }
                | Error::LinearSolve { .. }
                | Error::OutsideBox { .. })) => {
                    t_max = 0.5 * t.abs();
                    notices.push(format!("t = {t} failed ({e}); t_max lowered to {t_max:.3e}"));
                }
                Err(e) => return Err(e),
            }
        }
    }
    samples.sort_by(|x, y| x.t.total_cmp(&y.t));
    Ok(DiscFamily {
        base: f.clone(),
        field: v.clone(),
        t_max,
        t_hat,
        samples,
        notices,
        normalized: op.normalized,
    })
}

/// Family with `f_t(0) = f(0)` and `∂_ζ f_t(0) = ∂_ζ f(0) + t ∂_ζ V(0)`;
/// requires an operator built with `T₀` and `V(0) = 0`.
pub fn make_family_normalized(
    op: &CorrectedOperator,
    f: &DiscMap,
    v: &DiscMap,
    t_values: &[f64],
    cfg: &NewtonConfig,
) -> Result<DiscFamily> {
    make_family_normalized_with(op, f, v, t_values, cfg, &FamilyOptions::default())
}

pub fn make_family_normalized_with(
    op: &CorrectedOperator,
    f: &DiscMap,
    v: &DiscMap,
    t_values: &[f64],
    cfg: &NewtonConfig,
    opts: &FamilyOptions,
) -> Result<DiscFamily> {
    if !op.normalized {
        return Err(Error::Precondition("operator was not built with the normalized transform".into()));
    }
    let v0 = value_at_origin(v);
    let size = crate::grid::vec_norm(&v0);
    if size > 1e-8 * v.sup_norm().max(1.0) {
        return Err(Error::Precondition(format!("V(0) must vanish, |V(0)| = {size:e}")));
    }
    make_family_with(op, f, v, t_values, cfg, opts)
}
