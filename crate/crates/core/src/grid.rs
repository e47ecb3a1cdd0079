//! Polar discretization of the closed unit disc.
//!
//! Nodes sit on a tensor grid: `n_angular` uniform angles times `n_radial`
//! positive Chebyshev-Lobatto radii. The radial nodes are the positive half
//! of an even-sized Chebyshev grid on `[-1, 1]`, so the center is never a
//! node. A function on the disc is extended to negative radii through
//! `f(-r, θ) = f(r, θ + π)`, which gives each angular Fourier mode `k` a
//! radial profile of parity `(-1)^k`. Differentiation, interpolation and the
//! Cauchy-Green transform all work on these per-mode profiles.
//!
//! Node `i * n_angular + j` has radius `radii[i]` and angle `angles[j]`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const I: C64 = C64::new(0.0, 1.0);

/// Tensor polar grid with quadrature and spectral differentiation data.
pub struct DiscGrid {
    n_radial: usize,
    n_angular: usize,
    radii: Vec<f64>,
    angles: Vec<f64>,
    weights: Vec<f64>,
    // Full Chebyshev-Lobatto grid x_m = cos(πm/N), N = 2 n_radial - 1.
    cheb: Vec<f64>,
    bary: Vec<f64>,
    diff_even: DMatrix<f64>,
    diff_odd: DMatrix<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for DiscGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscGrid")
            .field("n_radial", &self.n_radial)
            .field("n_angular", &self.n_angular)
            .finish()
    }
}

impl PartialEq for DiscGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n_radial == other.n_radial && self.n_angular == other.n_angular
    }
}

/// Build a grid with `n_radial >= 4` radii and an even `n_angular >= 8`.
pub fn make_grid(n_radial: usize, n_angular: usize) -> Result<Arc<DiscGrid>> {
    DiscGrid::new(n_radial, n_angular).map(Arc::new)
}

impl DiscGrid {
    pub fn new(n_radial: usize, n_angular: usize) -> Result<Self> {
        if n_radial < 4 {
            return Err(Error::InvalidGrid(format!("n_radial = {n_radial} < 4")));
        }
        if n_angular < 8 || !n_angular.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "n_angular = {n_angular} must be even and >= 8"
            )));
        }
        let big_n = 2 * n_radial - 1;
        let cheb: Vec<f64> = (0..=big_n)
            .map(|m| (PI * m as f64 / big_n as f64).cos())
            .collect();
        let bary: Vec<f64> = (0..=big_n)
            .map(|m| {
                let s = if m % 2 == 0 { 1.0 } else { -1.0 };
                if m == 0 || m == big_n {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        let radii: Vec<f64> = (0..n_radial).map(|i| cheb[n_radial - 1 - i]).collect();
        let angles: Vec<f64> = (0..n_angular)
            .map(|j| 2.0 * PI * j as f64 / n_angular as f64)
            .collect();

        let full = cheb_diff_matrix(&cheb);
        let full_index = |i: usize| n_radial - 1 - i;
        let diff_parity = |p: f64| {
            DMatrix::from_fn(n_radial, n_radial, |i, l| {
                full[(full_index(i), full_index(l))] + p * full[(full_index(i), big_n - full_index(l))]
            })
        };
        let diff_even = diff_parity(1.0);
        let diff_odd = diff_parity(-1.0);

        let radial_weights = radial_area_weights(&radii)?;
        let mut weights = Vec::with_capacity(n_radial * n_angular);
        for w in &radial_weights {
            for _ in 0..n_angular {
                weights.push(PI / (2.0 * n_angular as f64) * w);
            }
        }

        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n_angular);
        let ifft = planner.plan_fft_inverse(n_angular);

        Ok(Self {
            n_radial,
            n_angular,
            radii,
            angles,
            weights,
            cheb,
            bary,
            diff_even,
            diff_odd,
            fft,
            ifft,
        })
    }

    pub fn n_radial(&self) -> usize {
        self.n_radial
    }

    pub fn n_angular(&self) -> usize {
        self.n_angular
    }

    pub fn node_count(&self) -> usize {
        self.n_radial * self.n_angular
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Area quadrature weight of every node; they sum to π.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node_index(&self, radial: usize, angular: usize) -> usize {
        radial * self.n_angular + angular
    }

    pub fn node_radius(&self, node: usize) -> f64 {
        self.radii[node / self.n_angular]
    }

    pub fn node_angle(&self, node: usize) -> f64 {
        self.angles[node % self.n_angular]
    }

    pub fn node_point(&self, node: usize) -> C64 {
        C64::from_polar(self.node_radius(node), self.node_angle(node))
    }

    pub fn points(&self) -> Vec<C64> {
        (0..self.node_count()).map(|n| self.node_point(n)).collect()
    }

    /// Nodes on the unit circle, in angular order.
    pub fn boundary_nodes(&self) -> std::ops::Range<usize> {
        let start = (self.n_radial - 1) * self.n_angular;
        start..start + self.n_angular
    }

    /// Signed Fourier mode carried by FFT bin `b`; bin `M/2` is the Nyquist mode `-M/2`.
    pub fn mode_of_bin(&self, b: usize) -> i64 {
        let m = self.n_angular as i64;
        if (b as i64) < m / 2 {
            b as i64
        } else {
            b as i64 - m
        }
    }

    pub fn bin_of_mode(&self, k: i64) -> usize {
        k.rem_euclid(self.n_angular as i64) as usize
    }

    pub fn nyquist_bin(&self) -> usize {
        self.n_angular / 2
    }

    /// Radial differentiation matrix acting on profiles of the given parity.
    pub fn radial_diff(&self, mode: i64) -> &DMatrix<f64> {
        if mode.rem_euclid(2) == 0 {
            &self.diff_even
        } else {
            &self.diff_odd
        }
    }

    /// Row of weights that evaluates a radial profile of parity `(-1)^mode`
    /// at radius `rho` in `[-1, 1]` from its nodal values.
    pub fn radial_interp_row(&self, mode: i64, rho: f64) -> Vec<f64> {
        let big_n = self.cheb.len() - 1;
        let nr = self.n_radial;
        let p = if mode.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let mut full = vec![0.0; big_n + 1];
        if let Some(m) = self.cheb.iter().position(|&x| (x - rho).abs() < 1e-15) {
            full[m] = 1.0;
        } else {
            let mut denom = 0.0;
            for m in 0..=big_n {
                let t = self.bary[m] / (rho - self.cheb[m]);
                full[m] = t;
                denom += t;
            }
            for v in &mut full {
                *v /= denom;
            }
        }
        (0..nr)
            .map(|i| {
                let a = nr - 1 - i;
                full[a] + p * full[big_n - a]
            })
            .collect()
    }

    /// Angular Fourier analysis of a scalar nodal field: returns
    /// `coeffs[i * M + b]` with `f(r_i, θ) = Σ_b coeffs[i, b] e^{i k(b) θ}`.
    pub fn analyze(&self, field: &[C64]) -> Vec<C64> {
        let m = self.n_angular;
        let mut out = field.to_vec();
        for row in out.chunks_mut(m) {
            self.fft.process(row);
        }
        let scale = 1.0 / m as f64;
        out.iter_mut().for_each(|c| *c *= scale);
        out
    }

    /// Inverse of [`DiscGrid::analyze`].
    pub fn synthesize(&self, coeffs: &[C64]) -> Vec<C64> {
        let m = self.n_angular;
        let mut out = coeffs.to_vec();
        for row in out.chunks_mut(m) {
            self.ifft.process(row);
        }
        out
    }

    /// Radial profile of bin `b` as a vector over the radii.
    pub fn profile(&self, coeffs: &[C64], b: usize) -> DVector<C64> {
        DVector::from_fn(self.n_radial, |i, _| coeffs[i * self.n_angular + b])
    }

    pub fn set_profile(&self, coeffs: &mut [C64], b: usize, profile: &DVector<C64>) {
        for i in 0..self.n_radial {
            coeffs[i * self.n_angular + b] = profile[i];
        }
    }

    /// `∫∫ f dA` for a scalar nodal field.
    pub fn integrate(&self, field: &[C64]) -> C64 {
        field
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v * *w)
            .sum()
    }

    fn nearest_node(&self, z: C64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for n in 0..self.node_count() {
            let d = (self.node_point(n) - z).norm_sqr();
            if d < best_d {
                best_d = d;
                best = n;
            }
        }
        best
    }
}

fn cheb_diff_matrix(x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let big_n = n - 1;
    let c = |m: usize| {
        let s = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
        if m == 0 || m == big_n {
            2.0 * s
        } else {
            s
        }
    };
    let mut d = DMatrix::zeros(n, n);
    for m in 0..n {
        for l in 0..n {
            if m != l {
                d[(m, l)] = c(m) / c(l) / (x[m] - x[l]);
            }
        }
    }
    for m in 0..n {
        let s: f64 = (0..n).filter(|&l| l != m).map(|l| d[(m, l)]).sum();
        d[(m, m)] = -s;
    }
    d
}

/// Weights `w_i` with `Σ w_i g(r_i) = ∫_{-1}^{1} g dt`, `t = 2r² - 1`, exact
/// for even polynomials in r of degree `2(n_r - 1)`.
fn radial_area_weights(radii: &[f64]) -> Result<Vec<f64>> {
    let n = radii.len();
    let t: Vec<f64> = radii.iter().map(|r| 2.0 * r * r - 1.0).collect();
    let vander = DMatrix::from_fn(n, n, |l, i| cheb_t(l, t[i]));
    let moments = DVector::from_fn(n, |l, _| {
        if l % 2 == 1 {
            0.0
        } else {
            2.0 / (1.0 - (l * l) as f64)
        }
    });
    vander
        .lu()
        .solve(&moments)
        .map(|w| w.iter().copied().collect())
        .ok_or_else(|| Error::InvalidGrid("singular radial quadrature system".into()))
}

fn cheb_t(l: usize, t: f64) -> f64 {
    (l as f64 * t.clamp(-1.0, 1.0).acos()).cos()
}

/// A map from the closed disc into `C^dim`, sampled at the grid nodes.
/// Values are stored node-major: `values[node * dim + c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscMap {
    grid: Arc<DiscGrid>,
    dim: usize,
    values: Vec<C64>,
}

impl DiscMap {
    pub fn new(grid: Arc<DiscGrid>, dim: usize, values: Vec<C64>) -> Result<Self> {
        if dim == 0 || values.len() != grid.node_count() * dim {
            return Err(Error::Mismatch);
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Precondition("non-finite map value".into()));
        }
        Ok(Self { grid, dim, values })
    }

    pub fn zeros(grid: &Arc<DiscGrid>, dim: usize) -> Self {
        Self {
            grid: grid.clone(),
            dim,
            values: vec![C64::new(0.0, 0.0); grid.node_count() * dim],
        }
    }

    pub fn constant(grid: &Arc<DiscGrid>, value: &[C64]) -> Self {
        Self::from_fn(grid, value.len(), |_| value.to_vec())
    }

    /// Sample `f(ζ)` at every node.
    pub fn from_fn(grid: &Arc<DiscGrid>, dim: usize, f: impl Fn(C64) -> Vec<C64>) -> Self {
        let mut values = Vec::with_capacity(grid.node_count() * dim);
        for n in 0..grid.node_count() {
            let v = f(grid.node_point(n));
            assert_eq!(v.len(), dim, "sampled vector has wrong dimension");
            values.extend(v);
        }
        Self {
            grid: grid.clone(),
            dim,
            values,
        }
    }

    pub fn scalar_fn(grid: &Arc<DiscGrid>, f: impl Fn(C64) -> C64) -> Self {
        Self::from_fn(grid, 1, |z| vec![f(z)])
    }

    pub fn grid(&self) -> &Arc<DiscGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn node(&self, n: usize) -> &[C64] {
        &self.values[n * self.dim..(n + 1) * self.dim]
    }

    pub fn node_mut(&mut self, n: usize) -> &mut [C64] {
        &mut self.values[n * self.dim..(n + 1) * self.dim]
    }

    pub fn component(&self, c: usize) -> Vec<C64> {
        self.values.iter().skip(c).step_by(self.dim).copied().collect()
    }

    pub fn set_component(&mut self, c: usize, field: &[C64]) {
        for (n, v) in field.iter().enumerate() {
            self.values[n * self.dim + c] = *v;
        }
    }

    /// Assemble a map from per-component scalar fields.
    pub fn from_components(grid: &Arc<DiscGrid>, comps: &[Vec<C64>]) -> Self {
        let mut out = Self::zeros(grid, comps.len());
        for (c, field) in comps.iter().enumerate() {
            out.set_component(c, field);
        }
        out
    }

    pub fn same_shape(&self, other: &DiscMap) -> bool {
        self.dim == other.dim && (Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid)
    }

    fn check_shape(&self, other: &DiscMap) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Mismatch)
        }
    }

    pub fn map_values(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            grid: self.grid.clone(),
            dim: self.dim,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        self.map_values(|v| v.conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map_values(|v| v * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.map_values(|v| v * s)
    }

    pub fn add(&self, other: &DiscMap) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &DiscMap) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &DiscMap) -> Result<Self> {
        self.check_shape(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            dim: self.dim,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x + y * a)
                .collect(),
        })
    }

    /// Multiply every component pointwise by a scalar map.
    pub fn mul_scalar_map(&self, s: &DiscMap) -> Result<Self> {
        if s.dim != 1 || *s.grid != *self.grid {
            return Err(Error::Mismatch);
        }
        let mut out = self.clone();
        for n in 0..self.grid.node_count() {
            let f = s.values[n];
            out.node_mut(n).iter_mut().for_each(|v| *v *= f);
        }
        Ok(out)
    }

    /// Largest Euclidean norm of the nodal vectors.
    pub fn sup_norm(&self) -> f64 {
        (0..self.grid.node_count())
            .map(|n| vec_norm(self.node(n)))
            .fold(0.0, f64::max)
    }

    /// Real inner product `Re Σ_j ∫∫ f_j conj(g_j) dA`.
    pub fn inner(&self, other: &DiscMap) -> Result<f64> {
        self.check_shape(other)?;
        let w = self.grid.weights();
        let mut acc = 0.0;
        for n in 0..self.grid.node_count() {
            let s: f64 = self
                .node(n)
                .iter()
                .zip(other.node(n))
                .map(|(a, b)| (a * b.conj()).re)
                .sum();
            acc += w[n] * s;
        }
        Ok(acc)
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).unwrap_or(0.0).max(0.0).sqrt()
    }

    /// Values on the unit circle, per boundary node.
    pub fn boundary_values(&self) -> Vec<Vec<C64>> {
        self.grid.boundary_nodes().map(|n| self.node(n).to_vec()).collect()
    }

    /// Fourier profile of every component: `out[c]` indexed as in [`DiscGrid::analyze`].
    pub fn modes(&self) -> Vec<Vec<C64>> {
        (0..self.dim)
            .map(|c| self.grid.analyze(&self.component(c)))
            .collect()
    }

    /// Size of the Nyquist content, which every spectral operation drops.
    pub fn unresolved_content(&self) -> f64 {
        let nb = self.grid.nyquist_bin();
        self.modes()
            .iter()
            .flat_map(|m| (0..self.grid.n_radial()).map(move |i| m[i * self.grid.n_angular() + nb].norm()))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Wirtinger derivatives `(f_ζ, f_ζ̄)`.
pub fn differentiate(f: &DiscMap) -> (DiscMap, DiscMap) {
    let grid = f.grid();
    let mut fz = DiscMap::zeros(grid, f.dim());
    let mut fzb = DiscMap::zeros(grid, f.dim());
    for c in 0..f.dim() {
        let (dz, dzb) = differentiate_scalar(grid, &f.component(c));
        fz.set_component(c, &dz);
        fzb.set_component(c, &dzb);
    }
    (fz, fzb)
}

/// Polar derivatives `(∂_r f, ∂_θ f)` of a scalar nodal field.
pub fn polar_derivatives(grid: &DiscGrid, field: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let m = grid.n_angular();
    let coeffs = grid.analyze(field);
    let mut dr = vec![C64::new(0.0, 0.0); coeffs.len()];
    let mut dth = vec![C64::new(0.0, 0.0); coeffs.len()];
    for b in 0..m {
        if b == grid.nyquist_bin() {
            continue;
        }
        let k = grid.mode_of_bin(b);
        let prof = grid.profile(&coeffs, b);
        let d = grid.radial_diff(k).map(|x| C64::new(x, 0.0)) * &prof;
        grid.set_profile(&mut dr, b, &d);
        grid.set_profile(&mut dth, b, &(prof * (I * k as f64)));
    }
    (grid.synthesize(&dr), grid.synthesize(&dth))
}

pub fn differentiate_scalar(grid: &DiscGrid, field: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let (dr, dth) = polar_derivatives(grid, field);
    let mut dz = Vec::with_capacity(field.len());
    let mut dzb = Vec::with_capacity(field.len());
    for n in 0..grid.node_count() {
        let r = grid.node_radius(n);
        let e = C64::from_polar(1.0, grid.node_angle(n));
        let tang = I / r * dth[n];
        dz.push(0.5 * e.conj() * (dr[n] - tang));
        dzb.push(0.5 * e * (dr[n] + tang));
    }
    (dz, dzb)
}

/// Real derivatives `(f_x, f_y)`.
pub fn real_derivatives(f: &DiscMap) -> (DiscMap, DiscMap) {
    let (fz, fzb) = differentiate(f);
    let fx = fz.add(&fzb).expect("same shape");
    let fy = fz.sub(&fzb).expect("same shape").scale(I);
    (fx, fy)
}

/// `Δ f = 4 ∂_ζ ∂_ζ̄ f`.
pub fn laplacian(f: &DiscMap) -> DiscMap {
    let (_, fzb) = differentiate(f);
    let (fzzb, _) = differentiate(&fzb);
    fzzb.scale_real(4.0)
}

/// Spectral-in-angle, polynomial-in-radius interpolation at points of the closed disc.
pub fn interpolate(f: &DiscMap, points: &[C64]) -> Result<Vec<Vec<C64>>> {
    let grid = f.grid();
    let modes = f.modes();
    points
        .iter()
        .map(|&z| {
            let rho = z.norm();
            if rho > 1.0 + 1e-12 {
                return Err(Error::OutsideDisc(z));
            }
            let rho = rho.min(1.0);
            let phi = if rho == 0.0 { 0.0 } else { z.arg() };
            Ok(modes
                .iter()
                .map(|coeffs| eval_modes(grid, coeffs, rho, phi))
                .collect())
        })
        .collect()
}

pub(crate) fn eval_modes(grid: &DiscGrid, coeffs: &[C64], rho: f64, phi: f64) -> C64 {
    let m = grid.n_angular();
    let mut acc = C64::new(0.0, 0.0);
    for b in 0..m {
        let k = grid.mode_of_bin(b);
        let row = grid.radial_interp_row(k, rho);
        let mut v = C64::new(0.0, 0.0);
        for (i, w) in row.iter().enumerate() {
            v += coeffs[i * m + b] * *w;
        }
        let phase = if b == grid.nyquist_bin() {
            C64::new((k as f64 * phi).cos(), 0.0)
        } else {
            C64::from_polar(1.0, k as f64 * phi)
        };
        acc += v * phase;
    }
    acc
}

/// Value of the map at the origin.
pub fn value_at_origin(f: &DiscMap) -> Vec<C64> {
    interpolate(f, &[C64::new(0.0, 0.0)])
        .expect("origin is inside the disc")
        .remove(0)
}

/// `f_ζ(0)`.
pub fn zeta_derivative_at_origin(f: &DiscMap) -> Vec<C64> {
    value_at_origin(&differentiate(f).0)
}

/// `f_x(0)`, the velocity vector at the center.
pub fn x_derivative_at_origin(f: &DiscMap) -> Vec<C64> {
    value_at_origin(&real_derivatives(f).0)
}

/// Parameters of the discrete C^{1,α} norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolderConfig {
    pub alpha: f64,
    pub pair_budget: usize,
    pub seed: u64,
}

impl Default for HolderConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            pair_budget: 256,
            seed: 0,
        }
    }
}

impl HolderConfig {
    pub fn new(alpha: f64, pair_budget: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Precondition(format!("Hölder exponent {alpha} not in (0,1)")));
        }
        Ok(Self {
            alpha,
            pair_budget,
            seed: 0,
        })
    }
}

/// Node pairs at stratified dyadic distances, deterministic in the seed.
fn holder_pairs(grid: &DiscGrid, cfg: &HolderConfig) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let levels = ((grid.n_radial().max(grid.n_angular()) as f64).log2().ceil() as usize).max(1) + 1;
    let mut pairs = Vec::with_capacity(cfg.pair_budget);
    let nodes = grid.node_count();
    for s in 0..cfg.pair_budget {
        let level = s % levels;
        let p = rng.random_range(0..nodes);
        let d = 2f64.powi(-(level as i32)) * rng.random_range(0.5..1.0);
        let dir = rng.random_range(0.0..2.0 * PI);
        let mut target = grid.node_point(p) + C64::from_polar(d, dir);
        if target.norm() > 1.0 {
            target /= target.norm();
        }
        let q = grid.nearest_node(target);
        if q != p {
            pairs.push((p, q));
        }
    }
    pairs
}

/// Discrete `C^{1,α}` norm estimate: `sup|f| + sup|df| + sampled Hölder quotient of df`.
pub fn holder_norm(f: &DiscMap, cfg: &HolderConfig) -> f64 {
    let grid = f.grid();
    let (fz, fzb) = differentiate(f);
    let df = |n: usize| vec_norm(fz.node(n)) + vec_norm(fzb.node(n));
    let sup_f = f.sup_norm();
    let sup_df = (0..grid.node_count()).map(df).fold(0.0, f64::max);
    let diff = |a: &[C64], b: &[C64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt()
    };
    let quotient = holder_pairs(grid, cfg)
        .into_iter()
        .map(|(p, q)| {
            let num = diff(fz.node(p), fz.node(q)) + diff(fzb.node(p), fzb.node(q));
            let dist = (grid.node_point(p) - grid.node_point(q)).norm();
            num / dist.powf(cfg.alpha)
        })
        .fold(0.0, f64::max);
    sup_f + sup_df + quotient
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn grid_sizes_are_validated() {
        assert!(make_grid(8, 15).is_err());
        assert!(make_grid(3, 16).is_err());
        assert!(make_grid(4, 6).is_err());
        let g = make_grid(8, 16).unwrap();
        assert_eq!(g.node_count(), 128);
    }

    #[test]
    fn weights_sum_to_disc_area() {
        let g = make_grid(8, 16).unwrap();
        assert_abs_diff_eq!(g.weights().iter().sum::<f64>(), PI, epsilon = 1e-8);
        let g = make_grid(16, 32).unwrap();
        assert_abs_diff_eq!(g.weights().iter().sum::<f64>(), PI, epsilon = 1e-10);
        assert!(g.weights().iter().all(|w| *w > 0.0));
    }

    #[test]
    fn layout_invariants() {
        let g = make_grid(9, 20).unwrap();
        assert!(g.radii().windows(2).all(|w| w[0] < w[1]));
        assert!(g.radii()[0] > 0.0);
        assert_eq!(*g.radii().last().unwrap(), 1.0);
        for (j, a) in g.angles().iter().enumerate() {
            assert_abs_diff_eq!(*a, 2.0 * PI * j as f64 / 20.0, epsilon = 1e-15);
        }
        for n in g.boundary_nodes() {
            assert_eq!(g.node_radius(n), 1.0);
        }
    }

    #[test]
    fn quadrature_moments() {
        for (nr, na) in [(6, 12), (10, 20), (16, 32)] {
            let g = make_grid(nr, na).unwrap();
            let pts = g.points();
            let re: Vec<C64> = pts.iter().map(|z| c(z.re, 0.0)).collect();
            let r2: Vec<C64> = pts.iter().map(|z| c(z.norm_sqr(), 0.0)).collect();
            assert_abs_diff_eq!(g.integrate(&re).norm(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(g.integrate(&r2).re, PI / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn derivatives_of_monomials() {
        let g = make_grid(8, 16).unwrap();
        let id = DiscMap::scalar_fn(&g, |z| z);
        let (fz, fzb) = differentiate(&id);
        for n in 0..g.node_count() {
            assert_abs_diff_eq!((fz.node(n)[0] - 1.0).norm(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(fzb.node(n)[0].norm(), 0.0, epsilon = 1e-12);
        }
        let bar = DiscMap::scalar_fn(&g, |z| z.conj());
        let (fz, fzb) = differentiate(&bar);
        for n in 0..g.node_count() {
            assert_abs_diff_eq!(fz.node(n)[0].norm(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!((fzb.node(n)[0] - 1.0).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn derivative_of_modulus_squared() {
        let g = make_grid(8, 16).unwrap();
        let f = DiscMap::scalar_fn(&g, |z| c(z.norm_sqr(), 0.0));
        let (fz, fzb) = differentiate(&f);
        for n in 0..g.node_count() {
            let z = g.node_point(n);
            assert_abs_diff_eq!((fz.node(n)[0] - z.conj()).norm(), 0.0, epsilon = 1e-11);
            assert_abs_diff_eq!((fzb.node(n)[0] - z).norm(), 0.0, epsilon = 1e-11);
        }
    }

    #[test]
    fn interpolation_examples() {
        let g = make_grid(8, 16).unwrap();
        let sq = DiscMap::scalar_fn(&g, |z| z * z);
        assert_abs_diff_eq!(value_at_origin(&sq)[0].norm(), 0.0, epsilon = 1e-14);
        let id = DiscMap::scalar_fn(&g, |z| z);
        let p = c(0.3, 0.4);
        assert_abs_diff_eq!((interpolate(&id, &[p]).unwrap()[0][0] - p).norm(), 0.0, epsilon = 1e-10);
        let g = make_grid(12, 24).unwrap();
        let ex = DiscMap::scalar_fn(&g, |z| z.exp());
        let v = interpolate(&ex, &[c(0.5, 0.0)]).unwrap()[0][0];
        assert_abs_diff_eq!((v - 0.5f64.exp()).norm(), 0.0, epsilon = 1e-10);
        assert!(interpolate(&ex, &[c(0.9, 0.9)]).is_err());
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let g = make_grid(6, 12).unwrap();
        let f = DiscMap::scalar_fn(&g, |z| (z * 1.3).sin() + z.conj().powi(3) * 0.2);
        let pts = g.points();
        let vals = interpolate(&f, &pts).unwrap();
        for (n, v) in vals.iter().enumerate() {
            assert_abs_diff_eq!((v[0] - f.node(n)[0]).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn holder_norm_examples() {
        let g = make_grid(8, 16).unwrap();
        let cfg = HolderConfig::default();
        let one = DiscMap::constant(&g, &[c(1.0, 0.0)]);
        assert_abs_diff_eq!(holder_norm(&one, &cfg), 1.0, epsilon = 1e-10);
        let id = DiscMap::scalar_fn(&g, |z| z);
        assert_abs_diff_eq!(holder_norm(&id, &cfg), 2.0, epsilon = 1e-10);
        let zero = DiscMap::zeros(&g, 2);
        assert_eq!(holder_norm(&zero, &cfg), 0.0);
        assert!(HolderConfig::new(1.0, 10).is_err());
    }

    #[test]
    fn holder_norm_is_homogeneous() {
        let g = make_grid(8, 16).unwrap();
        let cfg = HolderConfig::default();
        let f = DiscMap::scalar_fn(&g, |z| z * z + z.conj() * 0.3);
        let base = holder_norm(&f, &cfg);
        for s in [-2.5, 0.1, 3.0] {
            assert_abs_diff_eq!(holder_norm(&f.scale_real(s), &cfg), s.abs() * base, epsilon = 1e-10 * base);
        }
    }
}
