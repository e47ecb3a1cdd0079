//! Almost complex structures on `R^{2n}` and their complex Beltrami form.
//!
//! Real coordinates are interleaved: `z = (x_1, y_1, ..., x_n, y_n)`. The
//! standard structure `J_st` acts blockwise as multiplication by `i`.
//!
//! A structure `J` with `det(J + J_st) != 0` is equivalent to the matrix
//! field `A(z) v = (J + J_st)^{-1} (J - J_st) conj(v)`, which turns
//! `f_x + J(f) f_y = 0` into `f_ζ̄ + A(f) conj(f_ζ) = 0`. All solver code works
//! with `A`; `J` is only needed by the real-form checks.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{differentiate, DiscMap, C64};

pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;

/// Central-difference step, scaled by `max(1, |z|)`.
pub const FD_STEP: f64 = 1e-5;

/// Default radius of the box on which zoo structures may be evaluated.
pub const DEFAULT_BOX_RADIUS: f64 = 2.0;

type JEval = Arc<dyn Fn(&[C64]) -> RMat + Send + Sync>;
type JDeriv = Arc<dyn Fn(&[C64], &[C64]) -> RMat + Send + Sync>;
type AEval = Arc<dyn Fn(&[C64]) -> Result<CMat> + Send + Sync>;
type APartials = Arc<dyn Fn(&[C64]) -> Result<(Vec<CMat>, Vec<CMat>)> + Send + Sync>;

pub fn to_real(v: &[C64]) -> DVector<f64> {
    DVector::from_iterator(2 * v.len(), v.iter().flat_map(|c| [c.re, c.im]))
}

pub fn to_complex(v: &DVector<f64>) -> Vec<C64> {
    v.as_slice()
        .chunks(2)
        .map(|p| C64::new(p[0], p[1]))
        .collect()
}

fn norm(z: &[C64]) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// `J_st` as a real `2n × 2n` matrix.
pub fn standard_matrix(dim: usize) -> RMat {
    let mut j = RMat::zeros(2 * dim, 2 * dim);
    for k in 0..dim {
        j[(2 * k, 2 * k + 1)] = -1.0;
        j[(2 * k + 1, 2 * k)] = 1.0;
    }
    j
}

/// Real matrix of `v ↦ M v` for complex `M`.
pub fn complex_linear_real(m: &CMat) -> RMat {
    let n = m.nrows();
    let mut r = RMat::zeros(2 * n, 2 * m.ncols());
    for i in 0..n {
        for j in 0..m.ncols() {
            let a = m[(i, j)];
            r[(2 * i, 2 * j)] = a.re;
            r[(2 * i, 2 * j + 1)] = -a.im;
            r[(2 * i + 1, 2 * j)] = a.im;
            r[(2 * i + 1, 2 * j + 1)] = a.re;
        }
    }
    r
}

/// Real matrix of `v ↦ M conj(v)`.
pub fn conj_linear_real(m: &CMat) -> RMat {
    let n = m.nrows();
    let mut r = RMat::zeros(2 * n, 2 * m.ncols());
    for i in 0..n {
        for j in 0..m.ncols() {
            let a = m[(i, j)];
            r[(2 * i, 2 * j)] = a.re;
            r[(2 * i, 2 * j + 1)] = a.im;
            r[(2 * i + 1, 2 * j)] = a.im;
            r[(2 * i + 1, 2 * j + 1)] = -a.re;
        }
    }
    r
}

fn check_box(z: &[C64], radius: f64) -> Result<()> {
    if norm(z) > radius {
        Err(Error::OutsideBox {
            point: z.to_vec(),
            radius,
        })
    } else {
        Ok(())
    }
}

/// An almost complex structure `J(z)` on `R^{2n}`.
#[derive(Clone)]
pub struct StructureField {
    name: String,
    dim: usize,
    eval: JEval,
    derivative: Option<JDeriv>,
    box_radius: f64,
    standard: bool,
    diffeo: Option<PolyDiffeo>,
    beltrami: Option<BeltramiField>,
}

impl fmt::Debug for StructureField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StructureField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("box_radius", &self.box_radius)
            .finish()
    }
}

impl StructureField {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        eval: impl Fn(&[C64]) -> RMat + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            eval: Arc::new(eval),
            derivative: None,
            box_radius: DEFAULT_BOX_RADIUS,
            standard: false,
            diffeo: None,
            beltrami: None,
        }
    }

    pub fn standard(dim: usize) -> Self {
        let j = standard_matrix(dim);
        let mut s = Self::new("standard", dim, move |_| j.clone());
        s.derivative = Some(Arc::new(move |_, _| RMat::zeros(2 * dim, 2 * dim)));
        s.standard = true;
        s.box_radius = f64::INFINITY;
        s.beltrami = Some(BeltramiField::zero(dim));
        s
    }

    /// `J = dΦ^{-1} J_st dΦ` for the polynomial diffeomorphism `Φ`.
    pub fn pullback(diffeo: PolyDiffeo) -> Self {
        let dim = diffeo.dim;
        let jst = standard_matrix(dim);
        let d = diffeo;
        let jst_e = jst.clone();
        let mut s = Self::new("pullback_poly", dim, move |z| {
            let m = d.jacobian_real(z);
            let inv = m.clone().try_inverse().expect("pullback Jacobian invertible on its box");
            &inv * &jst_e * m
        });
        let d = diffeo;
        s.derivative = Some(Arc::new(move |z, u| {
            let m = d.jacobian_real(z);
            let inv = m.clone().try_inverse().expect("pullback Jacobian invertible on its box");
            let j = &inv * &jst * &m;
            let dm = d.jacobian_derivative_real(u);
            &inv * (&jst * &dm - &dm * &j)
        }));
        s.diffeo = Some(diffeo);
        s
    }

    /// Structure whose Beltrami form is `field`: `J = J_st (I + P)(I - P)^{-1}`
    /// with `P` the real matrix of `v ↦ A conj(v)`. Requires `sup |A| < 1` on
    /// the field's box, checked on `samples` random points.
    pub fn from_beltrami(field: BeltramiField, samples: usize, seed: u64) -> Result<Self> {
        let radius = field.box_radius();
        let dim = field.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sup = 0.0f64;
        for z in std::iter::once(vec![C64::new(0.0, 0.0); dim])
            .chain((0..samples).map(|_| random_point(&mut rng, dim, radius)))
        {
            let a = field.eval(&z)?;
            sup = sup.max(a.svd(false, false).singular_values.max());
        }
        if sup >= 1.0 {
            return Err(Error::BeltramiTooLarge { sup_norm: sup });
        }
        let jst = standard_matrix(dim);
        let f = field.clone();
        let mut s = Self::new("beltrami_direct", dim, move |z| {
            let a = f.eval_unchecked(z).expect("Beltrami field evaluates on its box");
            let p = conj_linear_real(&a);
            let id = RMat::identity(2 * dim, 2 * dim);
            let inv = (&id - &p).try_inverse().expect("|A| < 1");
            &jst * (&id + &p) * inv
        });
        s.box_radius = radius;
        s.beltrami = Some(field);
        Ok(s)
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

    pub fn box_radius(&self) -> f64 {
        self.box_radius
    }

    pub fn is_standard(&self) -> bool {
        self.standard
    }

    /// The diffeomorphism behind a pullback structure; its inverse maps
    /// holomorphic discs to J-holomorphic ones.
    pub fn diffeo(&self) -> Option<&PolyDiffeo> {
        self.diffeo.as_ref()
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    pub fn eval(&self, z: &[C64]) -> Result<RMat> {
        check_box(z, self.box_radius)?;
        Ok((self.eval)(z))
    }

    /// `d_z J(u)`: analytic when available, otherwise central differences
    /// with one Richardson step.
    pub fn directional_derivative(&self, z: &[C64], u: &[C64]) -> Result<RMat> {
        check_box(z, self.box_radius)?;
        if let Some(d) = &self.derivative {
            return Ok(d(z, u));
        }
        let scale = norm(u);
        if scale == 0.0 {
            return Ok(RMat::zeros(2 * self.dim, 2 * self.dim));
        }
        let h = FD_STEP * norm(z).max(1.0) / scale;
        let central = |h: f64| {
            let zp: Vec<C64> = z.iter().zip(u).map(|(a, b)| a + b * h).collect();
            let zm: Vec<C64> = z.iter().zip(u).map(|(a, b)| a - b * h).collect();
            ((self.eval)(&zp) - (self.eval)(&zm)) / (2.0 * h)
        };
        let coarse = central(h);
        let fine = central(h / 2.0);
        Ok((fine * 4.0 - coarse) / 3.0)
    }

    /// Apply `J(z)` to a vector of `C^n ≅ R^{2n}`.
    pub fn apply(&self, z: &[C64], v: &[C64]) -> Result<Vec<C64>> {
        Ok(to_complex(&(self.eval(z)? * to_real(v))))
    }

    /// The Beltrami form, reusing an exact field when the structure was built from one.
    pub fn beltrami(&self) -> Result<BeltramiField> {
        match &self.beltrami {
            Some(b) => Ok(b.clone()),
            None => Ok(to_beltrami(self)),
        }
    }
}

/// Complex Beltrami-type matrix field `A(z)` with its partials.
#[derive(Clone)]
pub struct BeltramiField {
    dim: usize,
    eval: AEval,
    partials: Option<APartials>,
    box_radius: f64,
    zero: bool,
}

impl fmt::Debug for BeltramiField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BeltramiField")
            .field("dim", &self.dim)
            .field("box_radius", &self.box_radius)
            .field("zero", &self.zero)
            .finish()
    }
}

impl BeltramiField {
    pub fn new(dim: usize, eval: impl Fn(&[C64]) -> CMat + Send + Sync + 'static) -> Self {
        Self {
            dim,
            eval: Arc::new(move |z| Ok(eval(z))),
            partials: None,
            box_radius: DEFAULT_BOX_RADIUS,
            zero: false,
        }
    }

    pub fn fallible(
        dim: usize,
        eval: impl Fn(&[C64]) -> Result<CMat> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            eval: Arc::new(eval),
            partials: None,
            box_radius: DEFAULT_BOX_RADIUS,
            zero: false,
        }
    }

    /// `A ≡ 0`, the Beltrami form of `J_st`.
    pub fn zero(dim: usize) -> Self {
        let mut b = Self::new(dim, move |_| CMat::zeros(dim, dim));
        b.partials = Some(Arc::new(move |_| {
            Ok((
                vec![CMat::zeros(dim, dim); dim],
                vec![CMat::zeros(dim, dim); dim],
            ))
        }));
        b.zero = true;
        b.box_radius = f64::INFINITY;
        b
    }

    /// Supply analytic `(∂A/∂z_j, ∂A/∂z̄_j)`.
    pub fn with_partials(
        mut self,
        partials: impl Fn(&[C64]) -> (Vec<CMat>, Vec<CMat>) + Send + Sync + 'static,
    ) -> Self {
        self.partials = Some(Arc::new(move |z| Ok(partials(z))));
        self
    }

    pub fn with_box(mut self, radius: f64) -> Self {
        self.box_radius = radius;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn box_radius(&self) -> f64 {
        self.box_radius
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn eval(&self, z: &[C64]) -> Result<CMat> {
        check_box(z, self.box_radius)?;
        (self.eval)(z)
    }

    fn eval_unchecked(&self, z: &[C64]) -> Result<CMat> {
        (self.eval)(z)
    }

    /// `A(z) v`.
    pub fn apply(&self, z: &[C64], v: &[C64]) -> Result<Vec<C64>> {
        let a = self.eval(z)?;
        Ok((a * DVector::from_column_slice(v)).iter().copied().collect())
    }

    /// `(∂A/∂z_j, ∂A/∂z̄_j)` for `j = 1..n`.
    pub fn partials(&self, z: &[C64]) -> Result<(Vec<CMat>, Vec<CMat>)> {
        check_box(z, self.box_radius)?;
        if let Some(p) = &self.partials {
            return p(z);
        }
        let h = FD_STEP * norm(z).max(1.0);
        let mut dz = Vec::with_capacity(self.dim);
        let mut dzb = Vec::with_capacity(self.dim);
        for j in 0..self.dim {
            let shifted = |delta: C64| {
                let mut w = z.to_vec();
                w[j] += delta;
                self.eval_unchecked(&w)
            };
            let dx = (shifted(C64::new(h, 0.0))? - shifted(C64::new(-h, 0.0))?) / C64::new(2.0 * h, 0.0);
            let dy = (shifted(C64::new(0.0, h))? - shifted(C64::new(0.0, -h))?) / C64::new(2.0 * h, 0.0);
            let i_dy = dy * C64::new(0.0, 1.0);
            dz.push((&dx - &i_dy) * C64::new(0.5, 0.0));
            dzb.push((dx + i_dy) * C64::new(0.5, 0.0));
        }
        Ok((dz, dzb))
    }

    /// `d_z A(v) = Σ_j ∂A/∂z_j v_j + ∂A/∂z̄_j conj(v_j)`.
    pub fn differential(&self, z: &[C64], v: &[C64]) -> Result<CMat> {
        let (dz, dzb) = self.partials(z)?;
        let mut out = CMat::zeros(self.dim, self.dim);
        for j in 0..self.dim {
            out += &dz[j] * v[j] + &dzb[j] * v[j].conj();
        }
        Ok(out)
    }
}

/// Convert `J` to its Beltrami form. Evaluation fails with
/// [`Error::SingularStructure`] where `J + J_st` is singular.
pub fn to_beltrami(j: &StructureField) -> BeltramiField {
    if j.is_standard() {
        return BeltramiField::zero(j.dim());
    }
    let dim = j.dim();
    let jst = standard_matrix(dim);
    let s = j.clone();
    BeltramiField::fallible(dim, move |z| {
        let jz = (s.eval)(z);
        let sum = &jz + &jst;
        let lu = sum.lu();
        if lu.determinant().abs() < 1e-12 {
            return Err(Error::SingularStructure { point: z.to_vec() });
        }
        let p = lu.solve(&(&jz - &jst)).ok_or_else(|| Error::SingularStructure { point: z.to_vec() })?;
        Ok(CMat::from_fn(dim, dim, |r, c| C64::new(p[(2 * r, 2 * c)], p[(2 * r + 1, 2 * c)])))
    })
    .with_box(j.box_radius())
}

/// Per-node `(B1, B2)` with `B1 V + B2 conj(V) = (Σ_j ∂A/∂z_j(f) V_j + ∂A/∂z̄_j(f) conj(V_j)) conj(f_ζ)`.
pub fn linearization_coefficients(a: &BeltramiField, f: &DiscMap) -> Result<(Vec<CMat>, Vec<CMat>)> {
    let n = a.dim();
    if f.dim() != n {
        return Err(Error::Mismatch);
    }
    let (fz, _) = differentiate(f);
    let nodes = f.grid().node_count();
    let mut b1 = Vec::with_capacity(nodes);
    let mut b2 = Vec::with_capacity(nodes);
    for node in 0..nodes {
        if a.is_zero() {
            b1.push(CMat::zeros(n, n));
            b2.push(CMat::zeros(n, n));
            continue;
        }
        let (dz, dzb) = a.partials(f.node(node))?;
        let fzc: Vec<C64> = fz.node(node).iter().map(|c| c.conj()).collect();
        let fzc = DVector::from_vec(fzc);
        let mut m1 = CMat::zeros(n, n);
        let mut m2 = CMat::zeros(n, n);
        for j in 0..n {
            m1.set_column(j, &(&dz[j] * &fzc));
            m2.set_column(j, &(&dzb[j] * &fzc));
        }
        b1.push(m1);
        b2.push(m2);
    }
    Ok((b1, b2))
}

/// `Φ(z) = z + (ε conj(z_1)^2, 0, ..., 0)`, a polynomial diffeomorphism
/// near the origin with `det dΦ = 1 - 4ε²|z_1|²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolyDiffeo {
    pub eps: f64,
    pub dim: usize,
}

impl PolyDiffeo {
    pub fn forward(&self, z: &[C64]) -> Vec<C64> {
        let mut w = z.to_vec();
        w[0] += self.eps * z[0].conj() * z[0].conj();
        w
    }

    /// Solve `Φ(z) = w` by Newton's method on the first coordinate.
    pub fn inverse(&self, w: &[C64]) -> Vec<C64> {
        let mut z = w.to_vec();
        let mut z1 = w[0];
        for _ in 0..100 {
            // g(z1) = z1 + ε conj(z1)^2 - w1, real Jacobian [1, 2ε conj(z1)] (conj-linear part)
            let g = z1 + self.eps * z1.conj() * z1.conj() - w[0];
            if g.norm() < 1e-16 * (1.0 + w[0].norm()) {
                break;
            }
            let b = 2.0 * self.eps * z1.conj();
            // Solve δ + b conj(δ) = g for δ.
            let det = 1.0 - b.norm_sqr();
            let delta = (g - b * g.conj()) / det;
            z1 -= delta;
        }
        z[0] = z1;
        z
    }

    /// Real Jacobian of `Φ` at `z`.
    pub fn jacobian_real(&self, z: &[C64]) -> RMat {
        let mut m = RMat::identity(2 * self.dim, 2 * self.dim);
        let a = 2.0 * self.eps * z[0].conj();
        let block = conj_linear_real(&CMat::from_element(1, 1, a));
        for r in 0..2 {
            for c in 0..2 {
                m[(r, c)] += block[(r, c)];
            }
        }
        m
    }

    /// Derivative of the real Jacobian in direction `u`.
    pub fn jacobian_derivative_real(&self, u: &[C64]) -> RMat {
        let mut m = RMat::zeros(2 * self.dim, 2 * self.dim);
        let block = conj_linear_real(&CMat::from_element(1, 1, 2.0 * self.eps * u[0].conj()));
        for r in 0..2 {
            for c in 0..2 {
                m[(r, c)] = block[(r, c)];
            }
        }
        m
    }

    pub fn jacobian_det(&self, z: &[C64]) -> f64 {
        1.0 - 4.0 * self.eps * self.eps * z[0].norm_sqr()
    }

    /// `Φ^{-1} ∘ h`, a J-holomorphic disc when `h` is holomorphic.
    pub fn inverse_map(&self, h: &DiscMap) -> DiscMap {
        let mut out = h.clone();
        for n in 0..h.grid().node_count() {
            let z = self.inverse(h.node(n));
            out.node_mut(n).copy_from_slice(&z);
        }
        out
    }

    /// Closed-form Beltrami field of the pullback: `A(z) = 2ε conj(z_1) e_1 e_1^T`.
    pub fn beltrami(&self) -> BeltramiField {
        let (eps, dim) = (self.eps, self.dim);
        BeltramiField::new(dim, move |z| {
            let mut a = CMat::zeros(dim, dim);
            a[(0, 0)] = 2.0 * eps * z[0].conj();
            a
        })
        .with_partials(move |_| {
            let mut dzb = vec![CMat::zeros(dim, dim); dim];
            dzb[0][(0, 0)] = C64::new(2.0 * eps, 0.0);
            (vec![CMat::zeros(dim, dim); dim], dzb)
        })
    }
}

pub(crate) fn random_point(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<C64> {
    loop {
        let z: Vec<C64> = (0..dim)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * radius)
            .collect();
        if norm(&z) <= radius {
            return z;
        }
    }
}

/// Options for [`structure_zoo_with`].
#[derive(Clone, Copy, Debug)]
pub struct ZooOptions {
    pub box_radius: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for ZooOptions {
    fn default() -> Self {
        Self {
            box_radius: DEFAULT_BOX_RADIUS,
            samples: 200,
            seed: 0,
        }
    }
}

/// Named test structures: `standard [n]`, `pullback_poly [ε, n]` and
/// `beltrami_direct [a0, a1, a2]` or `[a0re, a0im, a1re, a1im, a2re, a2im]`
/// for the scalar field `A(z) = a0 + a1 conj(z) + a2 z`.
pub fn structure_zoo(name: &str, params: &[f64]) -> Result<StructureField> {
    structure_zoo_with(name, params, ZooOptions::default())
}

pub fn structure_zoo_with(name: &str, params: &[f64], opts: ZooOptions) -> Result<StructureField> {
    let dim_param = |p: Option<&f64>| -> Result<usize> {
        match p {
            None => Ok(2),
            Some(&d) if d >= 1.0 && d.fract() == 0.0 => Ok(d as usize),
            Some(d) => Err(Error::StructureParams(format!("dimension {d} is not a positive integer"))),
        }
    };
    match name {
        "standard" => {
            if params.len() > 1 {
                return Err(Error::StructureParams("standard takes at most [n]".into()));
            }
            Ok(StructureField::standard(dim_param(params.first())?))
        }
        "pullback_poly" => {
            let eps = *params
                .first()
                .ok_or_else(|| Error::StructureParams("pullback_poly needs [eps]".into()))?;
            if params.len() > 2 {
                return Err(Error::StructureParams("pullback_poly takes [eps, n]".into()));
            }
            let dim = dim_param(params.get(1))?;
            let diffeo = PolyDiffeo { eps, dim };
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            for _ in 0..opts.samples {
                let z = random_point(&mut rng, dim, opts.box_radius);
                if diffeo.jacobian_det(&z) <= 0.0 {
                    return Err(Error::SingularPullback { point: z });
                }
            }
            Ok(StructureField::pullback(diffeo).with_box(opts.box_radius))
        }
        "beltrami_direct" => {
            let coeffs: Vec<C64> = match params.len() {
                3 => params.iter().map(|&a| C64::new(a, 0.0)).collect(),
                6 => params.chunks(2).map(|p| C64::new(p[0], p[1])).collect(),
                _ => {
                    return Err(Error::StructureParams(
                        "beltrami_direct takes 3 real or 3 complex coefficients".into(),
                    ))
                }
            };
            let (a0, a1, a2) = (coeffs[0], coeffs[1], coeffs[2]);
            let field = BeltramiField::new(1, move |z| {
                CMat::from_element(1, 1, a0 + a1 * z[0].conj() + a2 * z[0])
            })
            .with_partials(move |_| {
                (vec![CMat::from_element(1, 1, a2)], vec![CMat::from_element(1, 1, a1)])
            })
            .with_box(opts.box_radius);
            StructureField::from_beltrami(field, opts.samples, opts.seed)
        }
        other => Err(Error::UnknownStructure(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn max_abs(m: &RMat) -> f64 {
        m.iter().fold(0.0f64, |a, b| a.max(b.abs()))
    }

    #[test]
    fn standard_structure() {
        let j = structure_zoo("standard", &[]).unwrap();
        let z = vec![c(0.3, 0.1), c(-0.2, 0.5)];
        let m = j.eval(&z).unwrap();
        assert_eq!(&m * &m, -RMat::identity(4, 4));
        let a = to_beltrami(&j);
        assert!(a.is_zero());
        assert_eq!(a.eval(&z).unwrap(), CMat::zeros(2, 2));
    }

    #[test]
    fn pullback_squares_to_minus_identity() {
        let j = structure_zoo("pullback_poly", &[0.05]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let z = random_point(&mut rng, 2, 1.0);
            let m = j.eval(&z).unwrap();
            assert!(max_abs(&(&m * &m + RMat::identity(4, 4))) < 1e-12);
        }
    }

    #[test]
    fn pullback_detects_fold() {
        let err = structure_zoo("pullback_poly", &[1.0]).unwrap_err();
        assert!(matches!(err, Error::SingularPullback { .. }));
        assert!(matches!(structure_zoo("nope", &[]), Err(Error::UnknownStructure(_))));
    }

    #[test]
    fn pullback_beltrami_matches_closed_form() {
        // n = 1, ε = 0.1: ∂̄(f + ε conj(f)^2) = f_ζ̄ + 2ε conj(f) conj(f_ζ), so A(z) = 2ε conj(z).
        let j = structure_zoo("pullback_poly", &[0.1, 1.0]).unwrap();
        let a = to_beltrami(&j);
        assert_abs_diff_eq!(a.eval(&[c(0.0, 0.0)]).unwrap()[(0, 0)].norm(), 0.0, epsilon = 1e-14);
        let exact = j.diffeo().unwrap().beltrami();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let z = random_point(&mut rng, 1, 1.5);
            let d = a.eval(&z).unwrap() - exact.eval(&z).unwrap();
            assert!(d.norm() < 1e-12, "{d}");
            assert_abs_diff_eq!((a.eval(&z).unwrap()[(0, 0)] - 2.0 * 0.1 * z[0].conj()).norm(), 0.0, epsilon = 1e-12);
        }
        // Cross-check the partials by finite differences.
        let z = [c(0.3, -0.2)];
        let (dz, dzb) = a.partials(&z).unwrap();
        assert_abs_diff_eq!(dz[0][(0, 0)].norm(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!((dzb[0][(0, 0)] - 0.2).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn singular_structure_is_reported() {
        // J = -J_st has J^2 = -id but J + J_st = 0.
        let j = StructureField::new("minus_standard", 1, |_| -standard_matrix(1));
        let a = to_beltrami(&j);
        assert!(matches!(a.eval(&[c(0.1, 0.2)]), Err(Error::SingularStructure { .. })));
    }

    #[test]
    fn beltrami_round_trip_and_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let structures = vec![
            structure_zoo("pullback_poly", &[0.05]).unwrap(),
            structure_zoo("pullback_poly", &[0.2, 3.0]).unwrap(),
            structure_zoo("beltrami_direct", &[0.2, 0.0, 0.1, 0.05, 0.0, -0.1]).unwrap(),
        ];
        for j in &structures {
            let dim = j.dim();
            let a = to_beltrami(j);
            let jst = standard_matrix(dim);
            for _ in 0..20 {
                let z = random_point(&mut rng, dim, 1.0);
                let am = a.eval(&z).unwrap();
                // Rebuild J from A and compare.
                let p = conj_linear_real(&am);
                let id = RMat::identity(2 * dim, 2 * dim);
                let rebuilt = &jst * (&id + &p) * (&id - &p).try_inverse().unwrap();
                assert!(max_abs(&(rebuilt - j.eval(&z).unwrap())) < 1e-10);
                // Complex linearity of v ↦ (J + J_st)^{-1}(J - J_st) conj(v).
                let v = random_point(&mut rng, dim, 1.0);
                let lam = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let jm = j.eval(&z).unwrap();
                let pm = (&jm + &jst).try_inverse().unwrap() * (&jm - &jst);
                let act = |w: &[C64]| {
                    let conj: Vec<C64> = w.iter().map(|x| x.conj()).collect();
                    to_complex(&(&pm * to_real(&conj)))
                };
                let lv: Vec<C64> = v.iter().map(|x| x * lam).collect();
                let lhs = act(&lv);
                let rhs: Vec<C64> = act(&v).iter().map(|x| x * lam).collect();
                for (x, y) in lhs.iter().zip(&rhs) {
                    assert!((x - y).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn derivative_matches_richardson() {
        let j = structure_zoo("pullback_poly", &[0.1]).unwrap();
        let numeric = StructureField::new("numeric", 2, {
            let j = j.clone();
            move |z| j.eval(z).unwrap()
        });
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let z = random_point(&mut rng, 2, 1.0);
            let u = random_point(&mut rng, 2, 1.0);
            let exact = j.directional_derivative(&z, &u).unwrap();
            let fd = numeric.directional_derivative(&z, &u).unwrap();
            assert!(max_abs(&(&exact - &fd)) <= 1e-6 * max_abs(&exact).max(1e-3));
        }
    }

    #[test]
    fn beltrami_direct_validates_size() {
        assert!(matches!(
            structure_zoo("beltrami_direct", &[0.5, 0.4, 0.0]),
            Err(Error::BeltramiTooLarge { .. })
        ));
        let j = structure_zoo("beltrami_direct", &[0.2, 0.1, 0.0]).unwrap();
        let z = [c(0.3, 0.4)];
        let m = j.eval(&z).unwrap();
        assert!(max_abs(&(&m * &m + RMat::identity(2, 2))) < 1e-12);
        let a = to_beltrami(&j);
        assert_abs_diff_eq!((a.eval(&z).unwrap()[(0, 0)] - (0.2 + 0.1 * z[0].conj())).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn evaluation_outside_box_fails() {
        let j = structure_zoo("pullback_poly", &[0.05]).unwrap();
        assert!(matches!(j.eval(&[c(3.0, 0.0), c(0.0, 0.0)]), Err(Error::OutsideBox { .. })));
    }

    #[test]
    fn linearization_coefficient_examples() {
        let g = make_grid(8, 16).unwrap();
        let f = DiscMap::scalar_fn(&g, |z| z);
        let (b1, b2) = linearization_coefficients(&BeltramiField::zero(1), &f).unwrap();
        assert!(b1.iter().chain(&b2).all(|m| m.norm() == 0.0));

        let eps = 0.3;
        let a = BeltramiField::new(1, move |z| CMat::from_element(1, 1, z[0].conj() * eps));
        let konst = DiscMap::constant(&g, &[c(0.2, 0.1)]);
        let (b1, b2) = linearization_coefficients(&a, &konst).unwrap();
        assert!(b1.iter().chain(&b2).all(|m| m.norm() < 1e-12));

        let (b1, b2) = linearization_coefficients(&a, &f).unwrap();
        for n in 0..g.node_count() {
            assert_abs_diff_eq!(b1[n][(0, 0)].norm(), 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!((b2[n][(0, 0)] - eps).norm(), 0.0, epsilon = 1e-9);
        }
        // Directional finite difference of A(f + tV) conj(f_ζ).
        let v = [c(0.4, -0.7)];
        let node = 37;
        let z = f.node(node);
        let t = 1e-6;
        let zp = [z[0] + v[0] * t];
        let zm = [z[0] - v[0] * t];
        let fd = (a.eval(&zp).unwrap()[(0, 0)] - a.eval(&zm).unwrap()[(0, 0)]) / (2.0 * t);
        let lin = b1[node][(0, 0)] * v[0] + b2[node][(0, 0)] * v[0].conj();
        assert_abs_diff_eq!((fd - lin).norm(), 0.0, epsilon = 1e-8);
    }
}
