//! Boundary probe for extremal discs.
//!
//! Given a domain `{ρ < 0}` and a disc `f` that stays away from the boundary
//! on an arc `P`, shrink it to `f_r(ζ) = f(rζ)`, push it out along
//! `V = ζ exp(φ_R) · f_r'` and look for a member of the normalized family with
//! `h'(0) = λ f'(0)`, `λ > 1`, still inside the domain.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cauchy::schwarz_extend;
use crate::error::{Error, Result};
use crate::grid::{laplacian, x_derivative_at_origin, DiscGrid, DiscMap, C64};
use crate::operator::{build_corrected, residual};
use crate::solver::{make_family_normalized_with, solve_disc, FamilyOptions, NewtonConfig};
use crate::structure::{random_point, structure_zoo, BeltramiField, StructureField};
use crate::variation::{phi_times_fprime_from, variational_residual_complex, Multiplier};

pub type RhoFn = Arc<dyn Fn(&[C64]) -> f64 + Send + Sync>;
/// Gradient packed as `∂ρ/∂x_k + i ∂ρ/∂y_k` per component.
pub type GradientFn = Arc<dyn Fn(&[C64]) -> Vec<C64> + Send + Sync>;

const GRADIENT_STEP: f64 = 1e-6;

/// A domain `Ω = {ρ < 0}` given by its defining function.
#[derive(Clone)]
pub struct DomainSpec {
    name: String,
    dim: usize,
    rho: RhoFn,
    gradient: Option<GradientFn>,
    /// Number of sampled test discs in [`psh_spot_check`].
    pub psh_check_budget: usize,
    /// Radius of the box on which boundedness is checked.
    pub box_radius: f64,
}

impl std::fmt::Debug for DomainSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DomainSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("analytic_gradient", &self.gradient.is_some())
            .field("psh_check_budget", &self.psh_check_budget)
            .finish()
    }
}

impl DomainSpec {
    pub fn new(name: impl Into<String>, dim: usize, rho: impl Fn(&[C64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            dim,
            rho: Arc::new(rho),
            gradient: None,
            psh_check_budget: 8,
            box_radius: 2.0,
        }
    }

    pub fn with_gradient(mut self, g: impl Fn(&[C64]) -> Vec<C64> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.psh_check_budget = budget;
        self
    }

    pub fn with_box(mut self, radius: f64) -> Self {
        self.box_radius = radius;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rho(&self, z: &[C64]) -> f64 {
        (self.rho)(z)
    }

    pub fn gradient(&self, z: &[C64]) -> Vec<C64> {
        if let Some(g) = &self.gradient {
            return g(z);
        }
        let h = GRADIENT_STEP;
        let mut w = z.to_vec();
        (0..z.len())
            .map(|k| {
                let mut partial = |d: C64| {
                    w[k] = z[k] + d;
                    let p = self.rho(&w);
                    w[k] = z[k] - d;
                    let m = self.rho(&w);
                    w[k] = z[k];
                    (p - m) / (2.0 * h)
                };
                C64::new(partial(C64::new(h, 0.0)), partial(C64::new(0.0, h)))
            })
            .collect()
    }

    /// `dρ_z(v)`.
    pub fn differential(&self, z: &[C64], v: &[C64]) -> f64 {
        self.gradient(z).iter().zip(v).map(|(g, v)| (g.conj() * v).re).sum()
    }

    /// `ρ ∘ f` at every node.
    pub fn compose(&self, f: &DiscMap) -> Result<Vec<f64>> {
        if f.dim() != self.dim {
            return Err(Error::Mismatch);
        }
        Ok((0..f.grid().node_count()).map(|n| self.rho(f.node(n))).collect())
    }

    /// Sample the sphere of radius `box_radius` and require `ρ > 0` there,
    /// together with `ρ(0) < 0` so the domain is nonempty.
    pub fn check_bounded(&self, samples: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let mut z = random_point(&mut rng, self.dim, 1.0);
            let nrm = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if nrm == 0.0 {
                continue;
            }
            z.iter_mut().for_each(|c| *c *= self.box_radius / nrm);
            let v = self.rho(&z);
            if !(v > 0.0) {
                return Err(Error::Precondition(format!(
                    "domain `{}` is not bounded inside the box: rho = {v:e} at {z:?}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Named domains: `ball [radius, n]`, `pullback_ball [ε, n]`
/// (`|Φ(z)|² - 1`, plurisubharmonic for the matching pullback structure) and
/// `quartic_nonpsh [κ, n]` (`|z|² - 1 - κ|z₁|² + κ|z₁|⁴`, not psh for `κ > 1`).
pub fn domain_zoo(name: &str, params: &[f64]) -> Result<DomainSpec> {
    let dim_at = |i: usize| -> Result<usize> {
        match params.get(i) {
            None => Ok(2),
            Some(&d) if d >= 1.0 && d.fract() == 0.0 => Ok(d as usize),
            Some(&d) => Err(Error::Config(format!("domain dimension must be a positive integer, got {d}"))),
        }
    };
    let norm2 = |z: &[C64]| z.iter().map(|c| c.norm_sqr()).sum::<f64>();
    match name {
        "ball" => {
            let radius = params.first().copied().unwrap_or(1.0);
            if !(radius > 0.0) {
                return Err(Error::Config(format!("ball radius must be positive, got {radius}")));
            }
            let dim = dim_at(1)?;
            Ok(DomainSpec::new(format!("ball({radius})"), dim, move |z| norm2(z) - radius * radius)
                .with_gradient(|z| z.iter().map(|c| 2.0 * c).collect())
                .with_box(2.0 * radius))
        }
        "pullback_ball" => {
            let eps = params.first().copied().unwrap_or(0.05);
            let dim = dim_at(1)?;
            let j = structure_zoo("pullback_poly", &[eps, dim as f64])?;
            let phi = *j.diffeo().expect("pullback structure carries its diffeomorphism");
            Ok(DomainSpec::new(format!("pullback_ball({eps})"), dim, move |z| norm2(&phi.forward(z)) - 1.0).with_box(1.8))
        }
        "quartic_nonpsh" => {
            let kappa = params.first().copied().unwrap_or(3.0);
            let dim = dim_at(1)?;
            Ok(DomainSpec::new(format!("quartic_nonpsh({kappa})"), dim, move |z| {
                let s = z[0].norm_sqr();
                norm2(z) - 1.0 - kappa * s + kappa * s * s
            })
            .with_box(2.0))
        }
        other => Err(Error::Config(format!("unknown domain `{other}`"))),
    }
}

/// Probe parameters. Arcs are `[start, end]` in radians with `start < end`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// The open arc `P` on which the disc stays inside the domain.
    pub arc_p: [f64; 2],
    /// The plateau arc `P₁ ⊂ P`.
    pub arc_p1: [f64; 2],
    pub plateau_r: f64,
    pub r_values: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// `K = {ρ <= -compact_margin}`.
    pub compact_margin: f64,
    /// Largest accepted CR residual of the input disc.
    #[serde(default = "default_holomorphic_tol")]
    pub holomorphic_tol: f64,
    /// Stop families at the a-priori radius instead of attempting every `t`.
    #[serde(default)]
    pub enforce_t_hat: bool,
}

fn default_holomorphic_tol() -> f64 {
    1e-8
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        let [p0, p1] = self.arc_p;
        let [q0, q1] = self.arc_p1;
        if ![p0, p1, q0, q1].iter().all(|x| x.is_finite()) {
            return Err(Error::Config("arc endpoints must be finite".into()));
        }
        if !(p1 > p0 && p1 - p0 < 2.0 * PI) {
            return Err(Error::Config(format!("arc P = [{p0}, {p1}] must satisfy start < end < start + 2π")));
        }
        if !(p0 < q0 && q0 < q1 && q1 < p1) {
            return Err(Error::Config(format!(
                "arc P1 = [{q0}, {q1}] must be a nondegenerate subinterval strictly inside P = [{p0}, {p1}]"
            )));
        }
        if !(self.plateau_r >= 0.0 && self.plateau_r.is_finite()) {
            return Err(Error::Config(format!("plateau R must be nonnegative, got {}", self.plateau_r)));
        }
        if self.r_values.is_empty() || self.r_values.iter().any(|r| !(0.5..=1.0).contains(r)) {
            return Err(Error::Config("r_values must be a nonempty list in [1/2, 1]".into()));
        }
        if self.t_grid.is_empty() || self.t_grid.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("t_grid must be a nonempty list of finite reals".into()));
        }
        if !(self.compact_margin > 0.0) {
            return Err(Error::Config("compact_margin must be positive".into()));
        }
        if !(self.holomorphic_tol > 0.0) {
            return Err(Error::Config("holomorphic_tol must be positive".into()));
        }
        Ok(())
    }

    /// `l`, the length of `P₁`.
    pub fn plateau_length(&self) -> f64 {
        self.arc_p1[1] - self.arc_p1[0]
    }

    /// `lR / 2π`.
    pub fn bump_lower_bound(&self) -> f64 {
        self.plateau_length() * self.plateau_r / (2.0 * PI)
    }

    /// `t₁(r, R) = ((1 - r)/r) exp(-lR/2π)`: beyond it `λ > 1`.
    pub fn t1(&self, r: f64) -> f64 {
        (1.0 - r) / r * (-self.bump_lower_bound()).exp()
    }

    pub fn in_p(&self, theta: f64) -> bool {
        let d = (theta - self.arc_p[0]).rem_euclid(2.0 * PI);
        d > 0.0 && d < self.arc_p[1] - self.arc_p[0]
    }

    /// `χ_R(θ)`: `R` on `P₁`, zero off `P`, `C^∞` ramps in between.
    pub fn chi(&self, theta: f64) -> f64 {
        let [p0, p1] = self.arc_p;
        let [q0, q1] = self.arc_p1;
        let d = (theta - p0).rem_euclid(2.0 * PI);
        if d <= 0.0 || d >= p1 - p0 {
            return 0.0;
        }
        self.plateau_r * smoothstep(d / (q0 - p0)) * smoothstep((p1 - p0 - d) / (p1 - q1))
    }
}

/// `0` for `x <= 0`, `1` for `x >= 1`, smooth and monotone in between.
fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let e = |s: f64| (-1.0 / s).exp();
    e(x) / (e(x) + e(1.0 - x))
}

#[derive(Clone, Debug)]
pub struct Bump {
    /// `χ_R` at the grid angles.
    pub chi: Vec<f64>,
    /// `φ_R`: holomorphic, `Re φ_R = χ_R` on the circle, `Im φ_R(0) = 0`.
    pub phi: DiscMap,
    /// `φ_R(0)`, real.
    pub phi0: f64,
    /// `lR / 2π`.
    pub lower_bound: f64,
}

pub fn build_bump(cfg: &ProbeConfig, grid: &Arc<DiscGrid>) -> Result<Bump> {
    cfg.validate()?;
    let chi: Vec<f64> = grid.angles().iter().map(|&t| cfg.chi(t)).collect();
    let phi = schwarz_extend(grid, std::slice::from_ref(&chi))?;
    // Mode 0 of the boundary data, exact regardless of radial resolution.
    let phi0 = chi.iter().sum::<f64>() / chi.len() as f64;
    Ok(Bump {
        chi,
        phi,
        phi0,
        lower_bound: cfg.bump_lower_bound(),
    })
}

/// Taylor coefficients of `ζ exp(φ)` from the boundary samples of `exp(φ)`.
///
/// The series is cut where the grid stops resolving `ζ^k` radially; the mass
/// of the discarded positive modes and of the (aliased) negative modes is
/// returned alongside.
fn multiplier(bump: &Bump, grid: &DiscGrid) -> (Multiplier, f64, f64) {
    let m = grid.n_angular();
    let ring: Vec<C64> = bump
        .phi
        .boundary_values()
        .iter()
        .map(|v| v[0].exp())
        .collect();
    let c = grid.analyze(&ring);
    let degree = (m / 2).min(2 * grid.n_radial()).saturating_sub(4).max(1);
    let mut coeffs = vec![C64::new(0.0, 0.0)];
    coeffs.extend((0..degree).map(|k| c[k]));
    let tail: f64 = (degree..m / 2).map(|k| c[k].norm()).sum();
    let alias: f64 = (m / 2..m).map(|b| c[b].norm()).sum();
    (Multiplier::Coefficients(coeffs), tail, alias)
}

/// `f_r(ζ) = f(rζ)`, exact for the grid's own polynomial representation.
pub fn rescale_disc(f: &DiscMap, r: f64) -> Result<DiscMap> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Precondition(format!("rescaling factor {r} not in (0, 1]")));
    }
    if r == 1.0 {
        return Ok(f.clone());
    }
    let grid = f.grid();
    let (nr, m) = (grid.n_radial(), grid.n_angular());
    let rows: Vec<Vec<Vec<f64>>> = (0..m)
        .map(|b| {
            let k = grid.mode_of_bin(b);
            grid.radii().iter().map(|&rho| grid.radial_interp_row(k, r * rho)).collect()
        })
        .collect();
    let comps: Vec<Vec<C64>> = f
        .modes()
        .iter()
        .map(|coeffs| {
            let mut out = vec![C64::new(0.0, 0.0); nr * m];
            for (b, rows_b) in rows.iter().enumerate() {
                for (i, row) in rows_b.iter().enumerate() {
                    out[i * m + b] = row.iter().enumerate().map(|(j, w)| coeffs[j * m + b] * *w).sum();
                }
            }
            grid.synthesize(&out)
        })
        .collect();
    Ok(DiscMap::from_components(grid, &comps))
}

/// Relative floor for the Laplacian test.
pub const SUBHARMONIC_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SubharmonicityReport {
    pub min_laplacian: f64,
    /// Interior nodes with `Δ(ρ∘f) < -tol`.
    pub negative_nodes: usize,
    pub tol: f64,
    pub subharmonic: bool,
    /// Largest `C₂` with `ρ∘f(ζ) <= -C₂ (1 - |ζ|)` on the interior nodes.
    pub c2: f64,
}

/// Check `Δ(ρ∘f) >= -tol` and fit `C₂`.
pub fn subharmonicity_certificate(dom: &DomainSpec, f: &DiscMap) -> Result<SubharmonicityReport> {
    let grid = f.grid();
    let values: Vec<C64> = dom.compose(f)?.into_iter().map(|v| C64::new(v, 0.0)).collect();
    let comp = DiscMap::new(grid.clone(), 1, values)?;
    let lap = laplacian(&comp);
    let interior: Vec<usize> = (0..grid.node_count()).filter(|&n| grid.node_radius(n) < 1.0).collect();
    let lap_vals: Vec<f64> = interior.iter().map(|&n| lap.node(n)[0].re).collect();
    let scale = lap_vals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let tol = SUBHARMONIC_TOL * scale;
    let min_laplacian = lap_vals.iter().copied().fold(f64::INFINITY, f64::min);
    let negative_nodes = lap_vals.iter().filter(|&&v| v < -tol).count();
    let c2 = interior
        .iter()
        .map(|&n| -comp.node(n)[0].re / (1.0 - grid.node_radius(n)))
        .fold(f64::INFINITY, f64::min);
    Ok(SubharmonicityReport {
        min_laplacian,
        negative_nodes,
        tol,
        subharmonic: negative_nodes == 0,
        c2,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PshSample {
    pub center: Vec<C64>,
    pub direction: Vec<C64>,
    pub min_laplacian: f64,
    pub subharmonic: bool,
}

/// Solve small J-holomorphic discs through random points of the domain and
/// test `ρ` for subharmonicity along them.
pub fn psh_spot_check(
    dom: &DomainSpec,
    a: &BeltramiField,
    grid: &Arc<DiscGrid>,
    seed: u64,
) -> Result<Vec<PshSample>> {
    if a.dim() != dom.dim() {
        return Err(Error::Mismatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(dom.psh_check_budget);
    let mut tries = 0;
    while out.len() < dom.psh_check_budget && tries < 100 * dom.psh_check_budget.max(1) {
        tries += 1;
        let p = random_point(&mut rng, dom.dim(), dom.box_radius);
        if !(dom.rho(&p) < 0.0) {
            continue;
        }
        let mut v = random_point(&mut rng, dom.dim(), 1.0);
        let nv = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if nv == 0.0 {
            continue;
        }
        let s = 0.05 * rng.random_range(0.5..1.0) / nv;
        v.iter_mut().for_each(|c| *c *= s);
        let h = DiscMap::from_fn(grid, dom.dim(), |z| p.iter().zip(&v).map(|(p, v)| p + v * z).collect());
        let disc = solve_disc(a, &h, &h, &NewtonConfig::default())?.disc;
        let rep = subharmonicity_certificate(dom, &disc)?;
        out.push(PshSample {
            center: p,
            direction: v,
            min_laplacian: rep.min_laplacian,
            subharmonic: rep.subharmonic,
        });
    }
    Ok(out)
}

/// One `(r, t)` member `h_{r,t}` of the probe.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ProbeCell {
    pub r: f64,
    pub t: f64,
    /// `⟨h'(0), f'(0)⟩ / |f'(0)|²`.
    pub lambda: Option<f64>,
    /// `r (1 + t exp(φ_R(0)))`.
    pub lambda_predicted: f64,
    /// `|h'(0) - λ_predicted f'(0)| / |f'(0)|`.
    pub derivative_defect: Option<f64>,
    pub max_rho: Option<f64>,
    pub contained: bool,
    pub family_residual: Option<f64>,
    pub error: Option<String>,
}

/// Per-`r` data of the probe.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ProbeRow {
    pub r: f64,
    /// `min_{ζ ∈ P} -ρ∘f_r`.
    pub d_k: f64,
    pub c2: f64,
    pub subharmonic: bool,
    /// Variational residual of `V_r^R` along `f_r`.
    pub field_residual: f64,
    pub field_sup: f64,
    /// A-priori family radius `ε / (2 C ‖d F̃(V)‖)`.
    pub t_hat: Option<f64>,
    /// Family radius after Newton failures.
    pub t_max: Option<f64>,
    pub t1: f64,
    pub t3: Option<f64>,
    pub notices: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TBounds {
    /// `min_r t_max`: the measured family radius.
    pub t0_r: Option<f64>,
    /// Largest `|t|` with a successful sample: the range over which `C₁`, `C₃` were fitted.
    pub t1_r: f64,
    pub t2_r: f64,
    /// `t₁(r, R)` per `r`.
    pub t1_r_r: Vec<f64>,
    /// `t₃(r) = C₂ (1 - r) / C₃` per `r`.
    pub t3_r: Vec<Option<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Verdict {
    pub contradiction_found: bool,
    /// Cell with the largest `λ` among contained cells with `λ > 1`.
    pub witness: Option<ProbeCell>,
    /// `exp(-lR/2π) < C₂ / (2 C₃)`.
    pub recipe_satisfied: bool,
    pub summary: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Tolerances {
    pub holomorphic: f64,
    pub newton: f64,
    pub subharmonic_rel: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ProbeDiagnostics {
    pub cells: Vec<ProbeCell>,
    pub rows: Vec<ProbeRow>,
    pub d_k_rho: f64,
    /// True when `f_r(P) ⊂ K = {ρ <= -compact_margin}` for every `r`.
    pub k_contains_arc: bool,
    pub c1_r: f64,
    pub c2: f64,
    pub c3: f64,
    /// `max |dρ(V_r^R)|` off `P`: the `t → 0` limit of `C₃`.
    pub c3_linear: f64,
    pub t_bounds: TBounds,
    pub plateau_length: f64,
    pub phi0: f64,
    pub bump_lower_bound: f64,
    /// Mass of the Taylor modes of `exp(φ_R)` beyond the grid's resolution.
    pub multiplier_tail: f64,
    /// Mass of negative Fourier modes of `exp(φ_R)` on the circle.
    pub multiplier_alias: f64,
    pub tolerances: Tolerances,
    pub verdict: Verdict,
}

struct RowOutcome {
    row: ProbeRow,
    cells: Vec<ProbeCell>,
    c1: f64,
    c3: f64,
    c3_linear: f64,
}

fn max_abs_ratio(a: &[f64], b: &[f64], nodes: &[usize], t: f64) -> f64 {
    nodes.iter().map(|&n| (a[n] - b[n]).abs() / t.abs()).fold(0.0, f64::max)
}

/// Run the probe on the `(r, t)` grid of `cfg`.
pub fn run_probe(
    a: &BeltramiField,
    j: &StructureField,
    dom: &DomainSpec,
    f: &DiscMap,
    cfg: &ProbeConfig,
    newton: &NewtonConfig,
) -> Result<ProbeDiagnostics> {
    cfg.validate()?;
    newton.validate()?;
    if a.dim() != f.dim() || j.dim() != f.dim() || dom.dim() != f.dim() {
        return Err(Error::Mismatch);
    }
    let grid = f.grid().clone();
    let res = residual(a, f)?;
    if res > cfg.holomorphic_tol {
        return Err(Error::Precondition(format!(
            "input disc is not J-holomorphic: residual {res:e} > {:e}",
            cfg.holomorphic_tol
        )));
    }
    let p_nodes: Vec<usize> = grid.boundary_nodes().filter(|&n| cfg.in_p(grid.node_angle(n))).collect();
    let gap_nodes: Vec<usize> = grid.boundary_nodes().filter(|&n| !cfg.in_p(grid.node_angle(n))).collect();
    if p_nodes.is_empty() {
        return Err(Error::Config("arc P contains no boundary nodes of the grid".into()));
    }
    let rho_f = dom.compose(f)?;
    let sup_p = p_nodes.iter().map(|&n| rho_f[n]).fold(f64::NEG_INFINITY, f64::max);
    if sup_p >= -1e-10 {
        return Err(Error::Precondition(format!(
            "disc reaches the boundary on P: sup_P rho(f) = {sup_p:e}"
        )));
    }
    let fp0 = x_derivative_at_origin(f);
    let fp0_sq: f64 = fp0.iter().map(|c| c.norm_sqr()).sum();
    if fp0_sq == 0.0 {
        return Err(Error::Precondition("f'(0) = 0".into()));
    }

    let bump = build_bump(cfg, &grid)?;
    let (mult, tail, alias) = multiplier(&bump, &grid);
    let e0 = bump.phi0.exp();
    let t_extent = cfg.t_grid.iter().fold(0.0f64, |a, t| a.max(t.abs()));
    let fam_opts = FamilyOptions {
        t_max: if cfg.enforce_t_hat { None } else { Some(t_extent) },
    };

    let outcomes: Vec<RowOutcome> = cfg
        .r_values
        .par_iter()
        .map(|&r| -> Result<RowOutcome> {
            let fr = rescale_disc(f, r)?;
            let rho_fr = dom.compose(&fr)?;
            let d_k = p_nodes.iter().map(|&n| -rho_fr[n]).fold(f64::INFINITY, f64::min);
            let cert = subharmonicity_certificate(dom, &fr)?;
            let v = phi_times_fprime_from(j, &fr, &mult)?;
            let field_residual = variational_residual_complex(a, &fr, &v)?;
            let c3_linear = gap_nodes
                .iter()
                .map(|&n| dom.differential(fr.node(n), v.node(n)).abs())
                .fold(0.0, f64::max);
            let mut row = ProbeRow {
                r,
                d_k,
                c2: cert.c2,
                subharmonic: cert.subharmonic,
                field_residual,
                field_sup: v.sup_norm(),
                t_hat: None,
                t_max: None,
                t1: cfg.t1(r),
                t3: None,
                notices: Vec::new(),
            };
            let blank = |t: f64, error: Option<String>| ProbeCell {
                r,
                t,
                lambda: None,
                lambda_predicted: r * (1.0 + t * e0),
                derivative_defect: None,
                max_rho: None,
                contained: false,
                family_residual: None,
                error,
            };
            let family = build_corrected(a, &fr, true)
                .and_then(|op| make_family_normalized_with(&op, &fr, &v, &cfg.t_grid, newton, &fam_opts));
            let family = match family {
                Ok(fam) => fam,
                Err(e) => {
                    let msg = e.to_string();
                    row.notices.push(format!("family generation failed: {msg}"));
                    let cells = cfg.t_grid.iter().map(|&t| blank(t, Some(msg.clone()))).collect();
                    return Ok(RowOutcome { row, cells, c1: 0.0, c3: 0.0, c3_linear });
                }
            };
            row.t_hat = Some(family.t_hat).filter(|x| x.is_finite());
            row.t_max = Some(family.t_max).filter(|x| x.is_finite());
            row.notices = family.notices.clone();
            let (mut c1, mut c3) = (0.0f64, 0.0f64);
            let cells = cfg
                .t_grid
                .iter()
                .map(|&t| -> Result<ProbeCell> {
                    let Some(sample) = family.sample(t) else {
                        return Ok(blank(t, Some(format!("no family member at t = {t}"))));
                    };
                    let h = &sample.disc;
                    let rho_h = dom.compose(h)?;
                    let hp0 = x_derivative_at_origin(h);
                    let lambda = hp0.iter().zip(&fp0).map(|(h, f)| (f.conj() * h).re).sum::<f64>() / fp0_sq;
                    let predicted = r * (1.0 + t * e0);
                    let defect = hp0
                        .iter()
                        .zip(&fp0)
                        .map(|(h, f)| (h - f * predicted).norm_sqr())
                        .sum::<f64>()
                        .sqrt()
                        / fp0_sq.sqrt();
                    let max_rho = rho_h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    if t != 0.0 {
                        c1 = c1.max(max_abs_ratio(&rho_h, &rho_fr, &p_nodes, t));
                        c3 = c3.max(max_abs_ratio(&rho_h, &rho_fr, &gap_nodes, t));
                    }
                    Ok(ProbeCell {
                        r,
                        t,
                        lambda: Some(lambda),
                        lambda_predicted: predicted,
                        derivative_defect: Some(defect),
                        max_rho: Some(max_rho),
                        contained: max_rho < 0.0,
                        family_residual: Some(sample.cr_residual),
                        error: None,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(RowOutcome { row, cells, c1, c3, c3_linear })
        })
        .collect::<Result<Vec<_>>>()?;

    let c1_r = outcomes.iter().map(|o| o.c1).fold(0.0, f64::max);
    let c3 = outcomes.iter().map(|o| o.c3).fold(0.0, f64::max);
    let c3_linear = outcomes.iter().map(|o| o.c3_linear).fold(0.0, f64::max);
    let c2 = outcomes.iter().map(|o| o.row.c2).fold(f64::INFINITY, f64::min);
    let d_k_rho = outcomes.iter().map(|o| o.row.d_k).fold(f64::INFINITY, f64::min);
    let t3 = |r: f64| Some(c2 * (1.0 - r) / c3).filter(|x| x.is_finite());
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut cells = Vec::new();
    for o in outcomes {
        let mut row = o.row;
        row.t3 = t3(row.r);
        rows.push(row);
        cells.extend(o.cells);
    }
    let fitted = cells
        .iter()
        .filter(|c| c.error.is_none() && c.t != 0.0)
        .map(|c| c.t.abs())
        .fold(0.0, f64::max);
    let t_bounds = TBounds {
        t0_r: rows.iter().filter_map(|r| r.t_max).reduce(f64::min),
        t1_r: fitted,
        t2_r: fitted,
        t1_r_r: rows.iter().map(|r| r.t1).collect(),
        t3_r: rows.iter().map(|r| r.t3).collect(),
    };
    let witness = cells
        .iter()
        .filter(|c| c.contained && c.lambda.is_some_and(|l| l > 1.0))
        .max_by(|x, y| x.lambda.unwrap().total_cmp(&y.lambda.unwrap()))
        .cloned();
    let recipe_satisfied = (-cfg.bump_lower_bound()).exp() < c2 / (2.0 * c3);
    let summary = match &witness {
        Some(w) => format!(
            "contradiction found: r = {}, t = {} gives lambda = {} with max rho = {}",
            w.r,
            w.t,
            w.lambda.unwrap(),
            w.max_rho.unwrap()
        ),
        None => "no contradiction found".to_string(),
    };
    Ok(ProbeDiagnostics {
        cells,
        rows,
        d_k_rho,
        k_contains_arc: d_k_rho >= cfg.compact_margin,
        c1_r,
        c2,
        c3,
        c3_linear,
        t_bounds,
        plateau_length: cfg.plateau_length(),
        phi0: bump.phi0,
        bump_lower_bound: bump.lower_bound,
        multiplier_tail: tail,
        multiplier_alias: alias,
        tolerances: Tolerances {
            holomorphic: cfg.holomorphic_tol,
            newton: newton.tol,
            subharmonic_rel: SUBHARMONIC_TOL,
        },
        verdict: Verdict {
            contradiction_found: witness.is_some(),
            witness,
            recipe_satisfied,
            summary,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, value_at_origin};
    use crate::structure::to_beltrami;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn ball_config() -> ProbeConfig {
        ProbeConfig {
            arc_p: [0.5, 2.0 * PI - 0.5],
            arc_p1: [1.5, 2.0 * PI - 1.5],
            plateau_r: 3.0,
            r_values: vec![0.5, 0.75, 1.0],
            t_grid: vec![0.0, 0.01, 0.02, 0.04],
            compact_margin: 0.1,
            holomorphic_tol: 1e-8,
            enforce_t_hat: false,
        }
    }

    #[test]
    fn bump_shape_and_bound() {
        let g = make_grid(8, 64).unwrap();
        let cfg = ball_config();
        let b = build_bump(&cfg, &g).unwrap();
        for (&t, &x) in g.angles().iter().zip(&b.chi) {
            let d = (t - cfg.arc_p1[0]).rem_euclid(2.0 * PI);
            if d <= cfg.plateau_length() {
                assert_eq!(x, cfg.plateau_r);
            }
            if !cfg.in_p(t) {
                assert_eq!(x, 0.0);
            }
            assert!((0.0..=cfg.plateau_r).contains(&x));
        }
        assert!(b.phi0 >= b.lower_bound);
        // Mean value property on a grid that resolves the extension radially.
        let fine = make_grid(32, 64).unwrap();
        let bf = build_bump(&cfg, &fine).unwrap();
        assert!((value_at_origin(&bf.phi)[0] - bf.phi0).norm() < 1e-12);

        let flat = ProbeConfig { plateau_r: 0.0, ..cfg };
        assert_eq!(build_bump(&flat, &g).unwrap().phi.sup_norm(), 0.0);
    }

    #[test]
    fn config_rejects_degenerate_arcs() {
        let bad = ProbeConfig { arc_p1: [1.0, 1.0], ..ball_config() };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let outside = ProbeConfig { arc_p1: [0.2, 1.0], ..ball_config() };
        assert!(outside.validate().is_err());
        let big_r = ProbeConfig { r_values: vec![0.4], ..ball_config() };
        assert!(big_r.validate().is_err());
    }

    #[test]
    fn t1_is_monotone() {
        let cfg = ball_config();
        assert!(cfg.t1(0.6) > cfg.t1(0.8));
        let higher = ProbeConfig { plateau_r: 4.0, ..ball_config() };
        assert!(higher.t1(0.6) < cfg.t1(0.6));
        assert_eq!(cfg.t1(1.0), 0.0);
    }

    #[test]
    fn rescale_examples() {
        let g = make_grid(10, 20).unwrap();
        let f = DiscMap::scalar_fn(&g, |z| z);
        let half = rescale_disc(&f, 0.5).unwrap();
        assert!(half.sub(&f.scale_real(0.5)).unwrap().sup_norm() < 1e-14);
        assert_eq!(rescale_disc(&f, 1.0).unwrap(), f);
        let e = DiscMap::scalar_fn(&g, |z| (z + z.conj() * z * 0.3).exp());
        let r = rescale_disc(&e, 0.7).unwrap();
        let expect = DiscMap::scalar_fn(&g, |z| (z * 0.7 + (z * 0.7).conj() * (z * 0.7) * 0.3).exp());
        assert!(r.sub(&expect).unwrap().sup_norm() < 1e-9);
        assert!(rescale_disc(&f, 0.0).is_err());
    }

    #[test]
    fn certificate_examples() {
        let g = make_grid(10, 20).unwrap();
        let ball = domain_zoo("ball", &[]).unwrap();
        let f = DiscMap::from_fn(&g, 2, |z| vec![z * 0.5, c(0.0, 0.0)]);
        let rep = subharmonicity_certificate(&ball, &f).unwrap();
        // |ζ/2|² - 1 has Laplacian exactly 1.
        assert!((rep.min_laplacian - 1.0).abs() < 1e-10);
        assert!(rep.subharmonic && rep.c2 > 0.0);

        let konst = DiscMap::constant(&g, &[c(0.3, 0.0), c(0.0, 0.2)]);
        let rep = subharmonicity_certificate(&ball, &konst).unwrap();
        assert!(rep.min_laplacian.abs() < 1e-12 && rep.subharmonic);
        let depth = 1.0 - 0.09 - 0.04;
        let inner = g.radii()[0];
        assert!((rep.c2 - depth / (1.0 - inner)).abs() < 1e-12);

        let quartic = domain_zoo("quartic_nonpsh", &[3.0]).unwrap();
        let rep = subharmonicity_certificate(&quartic, &f).unwrap();
        assert!(!rep.subharmonic && rep.min_laplacian < -1.0);
    }

    #[test]
    fn domains_are_bounded() {
        for (name, p) in [("ball", vec![]), ("pullback_ball", vec![0.05]), ("quartic_nonpsh", vec![3.0])] {
            domain_zoo(name, &p).unwrap().check_bounded(200, 1).unwrap();
        }
        let half_space = DomainSpec::new("half", 1, |z: &[C64]| z[0].re);
        assert!(half_space.check_bounded(200, 1).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let ball = domain_zoo("ball", &[]).unwrap();
        let fd = DomainSpec::new("ball_fd", 2, |z: &[C64]| z.iter().map(|c| c.norm_sqr()).sum::<f64>() - 1.0);
        let z = [c(0.3, -0.2), c(0.1, 0.4)];
        for (a, b) in ball.gradient(&z).iter().zip(fd.gradient(&z)) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn standard_ball_probe() {
        // exp(φ_R) needs about 96 angular modes for R = 3.
        let g = make_grid(24, 96).unwrap();
        let j = StructureField::standard(2);
        let a = to_beltrami(&j);
        let dom = domain_zoo("ball", &[]).unwrap();
        let f = DiscMap::from_fn(&g, 2, |z| vec![z * 0.5, c(0.0, 0.0)]);
        let newton = NewtonConfig { epsilon_ball: 1e3, ..Default::default() };
        let diag = run_probe(&a, &j, &dom, &f, &ball_config(), &newton).unwrap();
        assert!(diag.verdict.contradiction_found, "{}", diag.verdict.summary);
        for cell in diag.cells.iter().filter(|c| c.t == 0.0) {
            assert!((cell.lambda.unwrap() - cell.r).abs() < 1e-12);
            assert!(cell.contained);
        }
        // Closed form: with F the identity, h = f_r + t V_r.
        for cell in &diag.cells {
            assert!(cell.derivative_defect.unwrap() < 1e-8, "{cell:?}");
        }
        assert!(diag.rows.iter().all(|r| r.field_residual < 1e-8));
        assert!(diag.c2 > 0.0 && diag.c3 > 0.0 && diag.d_k_rho > 0.0);
    }

    #[test]
    fn proper_disc_is_refused() {
        let g = make_grid(8, 32).unwrap();
        let j = StructureField::standard(2);
        let a = to_beltrami(&j);
        let dom = domain_zoo("ball", &[]).unwrap();
        let f = DiscMap::from_fn(&g, 2, |z| vec![z, c(0.0, 0.0)]);
        let err = run_probe(&a, &j, &dom, &f, &ball_config(), &NewtonConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }
}
