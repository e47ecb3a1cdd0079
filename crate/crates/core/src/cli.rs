//! The `jdisc` command line: `solve`, `family`, `probe` and `converge`.
//!
//! Exit codes: 0 on success, 1 for configuration errors, 2 when a solver
//! or a precondition fails. Messages go to standard error.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::cauchy::cauchy_green;
use crate::config::{Config, DiscKind};
use crate::error::{Error, Result};
use crate::extremal::{psh_spot_check, run_probe, PshSample};
use crate::grid::{differentiate, make_grid, value_at_origin, zeta_derivative_at_origin, DiscGrid, DiscMap, C64};
use crate::io::{disc_to_csv, probe_cells_csv, to_json_string, write_disc_json};
use crate::operator::{build_corrected, residual, residual_c1, solve_df_with, CorrectedOperator};
use crate::linalg::GmresOptions;
use crate::solver::{
    holomorphic_data, make_family_normalized_with, make_family_with, solve_disc, FamilyOptions, NewtonConfig,
};
use crate::structure::{to_beltrami, BeltramiField, StructureField};
use crate::variation::{
    check_derivative_realization, phi_times_fprime_from, variational_residual_complex, RealizationReport,
};

#[derive(Debug, Parser)]
#[command(name = "jdisc", version, about = "J-holomorphic discs by Cauchy–Green transforms and Newton's method")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the disc with prescribed holomorphic data.
    Solve(CommonArgs),
    /// Build a one-parameter family along a variational field.
    Family(CommonArgs),
    /// Run the boundary probe on a disc.
    Probe(CommonArgs),
    /// Grid-refinement study.
    Converge(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "./out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Seed for sampled Hölder pairs and spot checks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl Command {
    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Solve(a) | Command::Family(a) | Command::Probe(a) | Command::Converge(a) => a,
        }
    }
}

/// 1 for problems with the configuration, 2 for everything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Json(_)
        | Error::UnknownStructure(_)
        | Error::StructureParams(_)
        | Error::InvalidGrid(_)
        | Error::SingularPullback { .. }
        | Error::BeltramiTooLarge { .. } => 1,
        _ => 2,
    }
}

/// Run a parsed command line and return the process exit code.
pub fn run(cli: Cli) -> i32 {
    let args = cli.command.args().clone();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(args.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return 2;
        }
    };
    let result = pool.install(|| {
        let cfg = Config::load(&args.config)?;
        match &cli.command {
            Command::Solve(_) => cmd_solve(&cfg, &args),
            Command::Family(_) => cmd_family(&cfg, &args),
            Command::Probe(_) => cmd_probe(&cfg, &args),
            Command::Converge(_) => cmd_converge(&cfg, &args),
        }
    });
    match result {
        Ok(written) => {
            for p in written {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.dir.join(name);
        fs::write(&p, body)?;
        self.written.push(p);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.text(name, &to_json_string(value)?)
    }

    fn disc(&mut self, stem: &str, f: &DiscMap, csv: bool) -> Result<()> {
        let p = self.dir.join(format!("{stem}.json"));
        write_disc_json(f, &p)?;
        self.written.push(p);
        if csv {
            self.text(&format!("{stem}.csv"), &disc_to_csv(f))?;
        }
        Ok(())
    }
}

/// The structure, its Beltrami field and the grid of a config.
struct Setup {
    j: StructureField,
    a: BeltramiField,
    grid: Arc<DiscGrid>,
    newton: NewtonConfig,
}

fn setup(cfg: &Config, seed: u64) -> Result<Setup> {
    let j = cfg.structure(seed)?;
    let a = to_beltrami(&j);
    let grid = cfg.grid()?;
    let newton = cfg.newton(seed)?;
    Ok(Setup { j, a, grid, newton })
}

/// A J-holomorphic disc from the `disc` section.
struct BaseDisc {
    disc: DiscMap,
    solve: Option<SolveTrace>,
}

fn base_disc(cfg: &Config, s: &Setup) -> Result<BaseDisc> {
    let section = cfg.disc_section()?;
    let p = section.polynomial(&s.grid)?;
    if p.dim() != s.j.dim() {
        return Err(Error::Config(format!(
            "disc has {} components, structure `{}` has dimension {}",
            p.dim(),
            s.j.name(),
            s.j.dim()
        )));
    }
    match section.kind {
        DiscKind::PullbackImage => {
            let phi = s
                .j
                .diffeo()
                .ok_or_else(|| Error::Config("disc.kind = pullback_image needs a pullback structure".into()))?;
            Ok(BaseDisc {
                disc: phi.inverse_map(&p),
                solve: None,
            })
        }
        DiscKind::Data => {
            let sol = solve_disc(&s.a, &p, &p, &s.newton)?;
            let trace = SolveTrace::new(&sol.newton.history, sol.newton.iterations, &sol.operator, &p, &s.newton);
            Ok(BaseDisc {
                disc: sol.disc,
                solve: Some(trace),
            })
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct OperatorReport {
    /// Real dimension `N` of the discretized linearization.
    pub real_dim: usize,
    pub kernel_dim: usize,
    /// Smallest weighted singular value of `d_f F` (absent when not assembled).
    pub sigma_min: Option<f64>,
    pub sigma_max: Option<f64>,
    /// Estimate of `C = ‖(d_f F̃)^{-1}‖`.
    pub inverse_norm: f64,
    pub kernel_threshold: f64,
    /// Hölder slack of a test solve `d_f F̃(V) = h`: `max(0, ‖V‖ / (C ‖h‖) - 1)`.
    /// Absent when the test solve fails.
    pub holder_ratio: Option<f64>,
    pub slack: Option<f64>,
}

impl OperatorReport {
    fn new(op: &CorrectedOperator, probe: &DiscMap, newton: &NewtonConfig) -> Self {
        let lin = solve_df_with(op, probe, &newton.holder, GmresOptions::default()).ok();
        Self {
            real_dim: op.real_dim(),
            kernel_dim: op.kernel_dim(),
            sigma_min: op.singular_values.last().copied(),
            sigma_max: op.singular_values.first().copied(),
            inverse_norm: op.inv_norm_estimate,
            kernel_threshold: op.kernel_threshold,
            holder_ratio: lin.as_ref().map(|l| l.holder_ratio),
            slack: lin.as_ref().map(|l| l.slack),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolveTrace {
    pub iterations: usize,
    /// `‖F̃(g) - h‖_sup` before each accepted step and at exit.
    pub newton_history: Vec<f64>,
    pub operator: OperatorReport,
}

impl SolveTrace {
    fn new(history: &[f64], iterations: usize, op: &CorrectedOperator, h: &DiscMap, cfg: &NewtonConfig) -> Self {
        Self {
            iterations,
            newton_history: history.to_vec(),
            operator: OperatorReport::new(op, h, cfg),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolveReport {
    pub structure: String,
    pub n_radial: usize,
    pub n_angular: usize,
    pub dim: usize,
    /// `‖f_ζ̄ + A(f) conj(f_ζ)‖_sup`.
    pub residual: f64,
    /// The same plus the sup norms of its first derivatives.
    pub residual_c1: f64,
    /// `‖f - Φ^{-1}∘p‖_sup` for pullback images.
    pub error_vs_truth: Option<f64>,
    pub trace: SolveTrace,
}

fn cmd_solve(cfg: &Config, args: &CommonArgs) -> Result<Vec<PathBuf>> {
    let s = setup(cfg, args.seed)?;
    let section = cfg.disc_section()?;
    let p = section.polynomial(&s.grid)?;
    if p.dim() != s.j.dim() {
        return Err(Error::Config(format!("disc has {} components, structure has {}", p.dim(), s.j.dim())));
    }
    let (h, truth) = match section.kind {
        DiscKind::Data => (p.clone(), None),
        DiscKind::PullbackImage => {
            let phi = s
                .j
                .diffeo()
                .ok_or_else(|| Error::Config("disc.kind = pullback_image needs a pullback structure".into()))?;
            let truth = phi.inverse_map(&p);
            (holomorphic_data(&s.a, &truth)?, Some(truth))
        }
    };
    let sol = solve_disc(&s.a, &h, &p, &s.newton)?;
    let report = SolveReport {
        structure: s.j.name().to_string(),
        n_radial: s.grid.n_radial(),
        n_angular: s.grid.n_angular(),
        dim: sol.disc.dim(),
        residual: sol.cr_residual,
        residual_c1: residual_c1(&s.a, &sol.disc)?,
        error_vs_truth: truth.map(|t| sol.disc.sub(&t).map(|d| d.sup_norm())).transpose()?,
        trace: SolveTrace::new(&sol.newton.history, sol.newton.iterations, &sol.operator, &h, &s.newton),
    };
    let mut out = Outputs::new(&args.out)?;
    out.disc("disc", &sol.disc, cfg.output.csv)?;
    out.json("solve_report.json", &report)?;
    Ok(out.written)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FamilySampleReport {
    pub t: f64,
    pub cr_residual: f64,
    pub newton_residual: f64,
    pub iterations: usize,
    /// `|f_t(0) - f(0)|` (normalized families only).
    pub pin_value: Option<f64>,
    /// `|∂_ζ f_t(0) - ∂_ζ f(0) - t ∂_ζ V(0)|` (normalized families only).
    pub pin_derivative: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FamilyReport {
    pub structure: String,
    pub n_radial: usize,
    pub n_angular: usize,
    pub normalized: bool,
    /// Variational residual of `V` along the base disc.
    pub field_residual: f64,
    pub field_sup: f64,
    pub base_residual: f64,
    pub base_solve: Option<SolveTrace>,
    pub t_hat: Option<f64>,
    pub t_max: Option<f64>,
    pub operator: OperatorReport,
    pub samples: Vec<FamilySampleReport>,
    pub notices: Vec<String>,
    pub realization: Option<RealizationReport>,
    pub realization_note: Option<String>,
}

fn cmd_family(cfg: &Config, args: &CommonArgs) -> Result<Vec<PathBuf>> {
    let s = setup(cfg, args.seed)?;
    let field = cfg.field_section()?;
    let fam_cfg = cfg.family_section()?;
    let base = base_disc(cfg, &s)?;
    let f = &base.disc;
    let v = match (&field.multiplier, &field.polynomial) {
        (Some(m), _) => phi_times_fprime_from(&s.j, f, m)?,
        (None, Some(terms)) => {
            let v = field.polynomial_map(&s.grid, terms)?;
            if v.dim() != f.dim() {
                return Err(Error::Config(format!("field has {} components, disc has {}", v.dim(), f.dim())));
            }
            v
        }
        (None, None) => unreachable!("validated"),
    };
    let field_residual = variational_residual_complex(&s.a, f, &v)?;
    if field_residual > field.residual_tol {
        return Err(Error::Precondition(format!(
            "field is not variational along the disc: residual {field_residual:e} > {:e}",
            field.residual_tol
        )));
    }
    let op = build_corrected(&s.a, f, fam_cfg.normalized)?;
    let opts = FamilyOptions { t_max: fam_cfg.t_max };
    let family = if fam_cfg.normalized {
        make_family_normalized_with(&op, f, &v, &fam_cfg.t_values, &s.newton, &opts)?
    } else {
        make_family_with(&op, f, &v, &fam_cfg.t_values, &s.newton, &opts)?
    };
    let (f0, f1, v1) = (value_at_origin(f), zeta_derivative_at_origin(f), zeta_derivative_at_origin(&v));
    let samples = family
        .samples
        .iter()
        .map(|smp| {
            let (pin_value, pin_derivative) = if family.normalized {
                let g0 = value_at_origin(&smp.disc);
                let g1 = zeta_derivative_at_origin(&smp.disc);
                let dist = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
                let want: Vec<C64> = f1.iter().zip(&v1).map(|(a, b)| a + b * smp.t).collect();
                (Some(dist(&g0, &f0)), Some(dist(&g1, &want)))
            } else {
                (None, None)
            };
            FamilySampleReport {
                t: smp.t,
                cr_residual: smp.cr_residual,
                newton_residual: smp.newton_residual,
                iterations: smp.iterations,
                pin_value,
                pin_derivative,
            }
        })
        .collect();
    let (realization, realization_note) = match check_derivative_realization(&family) {
        Ok(r) => (Some(r), None),
        Err(e @ Error::InsufficientSamples(_)) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let dv = crate::operator::apply_df(&op, &v)?;
    let report = FamilyReport {
        structure: s.j.name().to_string(),
        n_radial: s.grid.n_radial(),
        n_angular: s.grid.n_angular(),
        normalized: family.normalized,
        field_residual,
        field_sup: v.sup_norm(),
        base_residual: residual(&s.a, f)?,
        base_solve: base.solve,
        t_hat: finite(family.t_hat),
        t_max: finite(family.t_max),
        operator: OperatorReport::new(&op, &dv, &s.newton),
        samples,
        notices: family.notices.clone(),
        realization,
        realization_note,
    };
    let mut out = Outputs::new(&args.out)?;
    out.disc("base_disc", f, cfg.output.csv)?;
    out.disc("field", &v, cfg.output.csv)?;
    if cfg.output.family_discs {
        for (i, smp) in family.samples.iter().enumerate() {
            out.disc(&format!("family_{i:03}"), &smp.disc, cfg.output.csv)?;
        }
    }
    out.json("family_report.json", &report)?;
    Ok(out.written)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SpotCheckReport {
    pub domain: String,
    pub samples: Vec<PshSample>,
    pub all_subharmonic: bool,
}

/// Spot checks run on this coarse grid whatever the probe grid is.
const SPOT_CHECK_GRID: (usize, usize) = (8, 16);

fn cmd_probe(cfg: &Config, args: &CommonArgs) -> Result<Vec<PathBuf>> {
    let s = setup(cfg, args.seed)?;
    let section = cfg.probe_section()?;
    let dom = section.domain_spec()?;
    if dom.dim() != s.j.dim() {
        return Err(Error::Config(format!(
            "domain `{}` has dimension {}, structure has {}",
            dom.name(),
            dom.dim(),
            s.j.dim()
        )));
    }
    let base = base_disc(cfg, &s)?;
    let diagnostics = run_probe(&s.a, &s.j, &dom, &base.disc, &section.probe_config(), &s.newton)?;
    let spot_grid = make_grid(SPOT_CHECK_GRID.0, SPOT_CHECK_GRID.1)?;
    let samples = psh_spot_check(&dom, &s.a, &spot_grid, args.seed)?;
    let spot = SpotCheckReport {
        domain: dom.name().to_string(),
        all_subharmonic: samples.iter().all(|p| p.subharmonic),
        samples,
    };
    let mut out = Outputs::new(&args.out)?;
    out.disc("base_disc", &base.disc, cfg.output.csv)?;
    out.json("probe_diagnostics.json", &diagnostics)?;
    if cfg.output.csv {
        out.text("probe_cells.csv", &probe_cells_csv(&diagnostics))?;
    }
    out.json("psh_spot_checks.json", &spot)?;
    eprintln!("{}", diagnostics.verdict.summary);
    Ok(out.written)
}

/// One line of the refinement table.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergeRow {
    pub study: String,
    pub n_radial: usize,
    pub n_angular: usize,
    pub error: f64,
    /// `log(e_{i-1}/e_i) / log(n_i/n_{i-1})` in the angular size; `+∞` once
    /// both errors are at round-off, absent on the first level.
    pub observed_order: Option<f64>,
}

/// Errors at or below this are round-off.
pub const ROUNDOFF_FLOOR: f64 = 1e-13;

fn orders(study: &str, levels: &[[usize; 2]], errors: &[f64]) -> Vec<ConvergeRow> {
    levels
        .iter()
        .zip(errors)
        .enumerate()
        .map(|(i, (lv, &e))| {
            let observed_order = (i > 0).then(|| {
                let prev = errors[i - 1];
                if prev <= ROUNDOFF_FLOOR && e <= ROUNDOFF_FLOOR {
                    f64::INFINITY
                } else {
                    (prev / e).ln() / (lv[1] as f64 / levels[i - 1][1] as f64).ln()
                }
            });
            ConvergeRow {
                study: study.to_string(),
                n_radial: lv[0],
                n_angular: lv[1],
                error: e,
                observed_order,
            }
        })
        .collect()
}

fn sup_diff(f: &DiscMap, exact: impl Fn(C64) -> C64) -> f64 {
    let g = f.grid();
    (0..g.node_count())
        .map(|n| (f.node(n)[0] - exact(g.node_point(n))).norm())
        .fold(0.0, f64::max)
}

/// The refinement studies on `levels`:
///
/// * `cauchy_green_one`: `T(1)` against `conj(z)`;
/// * `cauchy_green_cubic`: `T(|z|³)` against `(2/5)|z|³ conj(z)`;
/// * `derivative_exp`: `∂_ζ exp(ζ)` against `exp(ζ)`;
/// * `solve_pullback`: the disc solve against `Φ^{-1}∘p`, when the config
///   has a pullback structure and a `pullback_image` disc.
pub fn converge_rows(cfg: &Config, seed: u64) -> Result<Vec<ConvergeRow>> {
    let levels = &cfg.grid.refinements;
    if levels.len() < 2 {
        return Err(Error::Config(format!(
            "converge needs at least 2 grid.refinements, got {}",
            levels.len()
        )));
    }
    let grids = levels
        .iter()
        .map(|lv| make_grid(lv[0], lv[1]).map_err(|e| Error::Config(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();

    let errs: Vec<f64> = grids
        .iter()
        .map(|g| sup_diff(&cauchy_green(&DiscMap::scalar_fn(g, |_| C64::new(1.0, 0.0))), |z| z.conj()))
        .collect();
    rows.extend(orders("cauchy_green_one", levels, &errs));

    let errs: Vec<f64> = grids
        .iter()
        .map(|g| {
            let u = DiscMap::scalar_fn(g, |z| C64::new(z.norm().powi(3), 0.0));
            sup_diff(&cauchy_green(&u), |z| z.conj() * 0.4 * z.norm().powi(3))
        })
        .collect();
    rows.extend(orders("cauchy_green_cubic", levels, &errs));

    let errs: Vec<f64> = grids
        .iter()
        .map(|g| sup_diff(&differentiate(&DiscMap::scalar_fn(g, |z| z.exp())).0, |z| z.exp()))
        .collect();
    rows.extend(orders("derivative_exp", levels, &errs));

    let pullback = cfg
        .disc
        .as_ref()
        .filter(|d| d.kind == DiscKind::PullbackImage)
        .map(|d| (d, cfg.structure(seed)))
        .filter(|(_, j)| j.as_ref().map_or(true, |j| j.diffeo().is_some()));
    if let Some((section, j)) = pullback {
        let j = j?;
        let a = to_beltrami(&j);
        let newton = cfg.newton(seed)?;
        let phi = *j.diffeo().expect("filtered");
        let mut errs = Vec::new();
        for g in &grids {
            let p = section.polynomial(g)?;
            let truth = phi.inverse_map(&p);
            let h = holomorphic_data(&a, &truth)?;
            let sol = solve_disc(&a, &h, &p, &newton)?;
            errs.push(sol.disc.sub(&truth)?.sup_norm());
        }
        rows.extend(orders("solve_pullback", levels, &errs));
    }
    Ok(rows)
}

pub fn converge_csv(rows: &[ConvergeRow]) -> String {
    use crate::io::format_f64;
    let mut out = String::from("study,n_radial,n_angular,error,observed_order\n");
    for r in rows {
        let order = match r.observed_order {
            None => String::new(),
            Some(o) if o.is_infinite() => "inf".into(),
            Some(o) => format_f64(o),
        };
        out.push_str(&format!(
            "{},{},{},{},{order}\n",
            r.study,
            r.n_radial,
            r.n_angular,
            format_f64(r.error)
        ));
    }
    out
}

fn cmd_converge(cfg: &Config, args: &CommonArgs) -> Result<Vec<PathBuf>> {
    let rows = converge_rows(cfg, args.seed)?;
    let mut out = Outputs::new(&args.out)?;
    out.text("converge.csv", &converge_csv(&rows))?;
    Ok(out.written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_and_floor() {
        let rows = orders("x", &[[4, 8], [8, 16], [16, 32]], &[1e-2, 2.5e-3, 6.25e-4]);
        assert_eq!(rows[0].observed_order, None);
        assert!((rows[1].observed_order.unwrap() - 2.0).abs() < 1e-12);
        let flat = orders("y", &[[4, 8], [8, 16]], &[1e-15, 3e-15]);
        assert_eq!(flat[1].observed_order, Some(f64::INFINITY));
        assert!(converge_csv(&flat).lines().nth(2).unwrap().ends_with(",inf"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 1);
        assert_eq!(exit_code(&Error::UnknownStructure("x".into())), 1);
        assert_eq!(exit_code(&Error::Precondition("x".into())), 2);
        assert_eq!(exit_code(&Error::MaxIterations { iterations: 1, last_residual: 1.0 }), 2);
    }
}
