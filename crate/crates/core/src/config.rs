//! The JSON run configuration. Every section rejects unknown keys.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extremal::{domain_zoo, DomainSpec, ProbeConfig};
use crate::grid::{make_grid, DiscGrid, DiscMap, HolderConfig, C64};
use crate::solver::NewtonConfig;
use crate::structure::{structure_zoo_with, StructureField, ZooOptions, DEFAULT_BOX_RADIUS};
use crate::variation::Multiplier;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub grid: GridSection,
    #[serde(default)]
    pub structure: StructureSection,
    #[serde(default)]
    pub disc: Option<DiscSection>,
    #[serde(default)]
    pub field: Option<FieldSection>,
    #[serde(default)]
    pub family: Option<FamilySection>,
    #[serde(default)]
    pub probe: Option<ProbeSection>,
    #[serde(default)]
    pub newton: NewtonConfig,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_radial: usize,
    pub n_angular: usize,
    #[serde(default = "default_alpha")]
    pub holder_alpha: f64,
    #[serde(default = "default_pairs")]
    pub holder_pairs: usize,
    /// `[n_radial, n_angular]` per level, coarse to fine; used by `converge`.
    #[serde(default)]
    pub refinements: Vec<[usize; 2]>,
}

fn default_alpha() -> f64 {
    0.5
}

fn default_pairs() -> usize {
    256
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureSection {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default)]
    pub box_radius: Option<f64>,
    /// Sample count for the validity checks of the zoo.
    #[serde(default)]
    pub samples: Option<usize>,
}

impl Default for StructureSection {
    fn default() -> Self {
        Self {
            name: "standard".into(),
            params: Vec::new(),
            box_radius: None,
            samples: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum DiscKind {
    /// Solve `F(f) = p` for the polynomial `p`.
    #[default]
    Data,
    /// The disc is `Φ^{-1} ∘ p` for a pullback structure; its data is
    /// computed from it and the solve is checked against it.
    PullbackImage,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscSection {
    /// Taylor coefficients `[re, im]` of each component of `p`.
    pub coefficients: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    pub kind: DiscKind,
}

impl DiscSection {
    pub fn polynomial(&self, grid: &Arc<DiscGrid>) -> Result<DiscMap> {
        if self.coefficients.is_empty() {
            return Err(Error::Config("disc.coefficients must list at least one component".into()));
        }
        let comps: Vec<Vec<C64>> = self
            .coefficients
            .iter()
            .map(|c| c.iter().map(|p| C64::new(p[0], p[1])).collect())
            .collect();
        Ok(DiscMap::from_fn(grid, comps.len(), |z| {
            comps
                .iter()
                .map(|c| c.iter().rev().fold(C64::new(0.0, 0.0), |acc, a| acc * z + a))
                .collect()
        }))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    /// `V = φ · f'` for this holomorphic `φ`.
    #[serde(default)]
    pub multiplier: Option<Multiplier>,
    /// `V` given directly: per component, terms `[re, im, p, q]` meaning
    /// `(re + i im) ζ^p conj(ζ)^q`.
    #[serde(default)]
    pub polynomial: Option<Vec<Vec<[f64; 4]>>>,
    /// Largest accepted variational residual of `V`.
    #[serde(default = "default_field_tol")]
    pub residual_tol: f64,
}

fn default_field_tol() -> f64 {
    1e-6
}

impl FieldSection {
    pub fn validate(&self) -> Result<()> {
        match (&self.multiplier, &self.polynomial) {
            (Some(_), None) | (None, Some(_)) => Ok(()),
            _ => Err(Error::Config("field needs exactly one of `multiplier` or `polynomial`".into())),
        }
    }

    pub fn polynomial_map(&self, grid: &Arc<DiscGrid>, terms: &[Vec<[f64; 4]>]) -> Result<DiscMap> {
        for t in terms.iter().flatten() {
            if t[2] < 0.0 || t[3] < 0.0 || t[2].fract() != 0.0 || t[3].fract() != 0.0 {
                return Err(Error::Config(format!("polynomial exponents must be nonnegative integers, got {t:?}")));
            }
        }
        Ok(DiscMap::from_fn(grid, terms.len(), |z| {
            terms
                .iter()
                .map(|comp| {
                    comp.iter()
                        .map(|t| C64::new(t[0], t[1]) * z.powu(t[2] as u32) * z.conj().powu(t[3] as u32))
                        .sum()
                })
                .collect()
        }))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySection {
    pub t_values: Vec<f64>,
    /// Use `T₀` so that `f_t(0) = f(0)`; requires `V(0) = 0`.
    #[serde(default)]
    pub normalized: bool,
    /// Override the a-priori family radius.
    #[serde(default)]
    pub t_max: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub domain: DomainSection,
    pub arc_p: [f64; 2],
    pub arc_p1: [f64; 2],
    pub plateau_r: f64,
    pub r_values: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub compact_margin: f64,
    #[serde(default)]
    pub holomorphic_tol: Option<f64>,
    #[serde(default)]
    pub enforce_t_hat: bool,
    /// Test discs for the plurisubharmonicity spot check.
    #[serde(default = "default_psh_budget")]
    pub psh_check_budget: usize,
}

fn default_psh_budget() -> usize {
    4
}

impl ProbeSection {
    pub fn probe_config(&self) -> ProbeConfig {
        let defaults: ProbeConfig = serde_json::from_str(
            r#"{"arc_p":[0,1],"arc_p1":[0,1],"plateau_r":0,"r_values":[],"t_grid":[],"compact_margin":0}"#,
        )
        .expect("literal parses");
        ProbeConfig {
            arc_p: self.arc_p,
            arc_p1: self.arc_p1,
            plateau_r: self.plateau_r,
            r_values: self.r_values.clone(),
            t_grid: self.t_grid.clone(),
            compact_margin: self.compact_margin,
            holomorphic_tol: self.holomorphic_tol.unwrap_or(defaults.holomorphic_tol),
            enforce_t_hat: self.enforce_t_hat,
        }
    }

    pub fn domain_spec(&self) -> Result<DomainSpec> {
        Ok(domain_zoo(&self.domain.name, &self.domain.params)?.with_budget(self.psh_check_budget))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Also write discs as CSV.
    #[serde(default = "yes")]
    pub csv: bool,
    /// Write every family member as its own disc file.
    #[serde(default)]
    pub family_discs: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            csv: true,
            family_discs: false,
        }
    }
}

impl Config {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn grid(&self) -> Result<Arc<DiscGrid>> {
        make_grid(self.grid.n_radial, self.grid.n_angular).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn holder(&self, seed: u64) -> Result<HolderConfig> {
        let mut h = HolderConfig::new(self.grid.holder_alpha, self.grid.holder_pairs)
            .map_err(|e| Error::Config(e.to_string()))?;
        h.seed = seed;
        Ok(h)
    }

    /// Newton settings with the Hölder sampling taken from the grid section.
    pub fn newton(&self, seed: u64) -> Result<NewtonConfig> {
        let mut n = self.newton;
        n.holder = self.holder(seed)?;
        n.validate()?;
        Ok(n)
    }

    pub fn structure(&self, seed: u64) -> Result<StructureField> {
        let s = &self.structure;
        let opts = ZooOptions {
            box_radius: s.box_radius.unwrap_or(DEFAULT_BOX_RADIUS),
            samples: s.samples.unwrap_or(ZooOptions::default().samples),
            seed,
        };
        structure_zoo_with(&s.name, &s.params, opts)
    }

    pub fn disc_section(&self) -> Result<&DiscSection> {
        self.disc.as_ref().ok_or_else(|| Error::Config("missing `disc` section".into()))
    }

    pub fn field_section(&self) -> Result<&FieldSection> {
        let f = self.field.as_ref().ok_or_else(|| Error::Config("missing `field` section".into()))?;
        f.validate()?;
        Ok(f)
    }

    pub fn family_section(&self) -> Result<&FamilySection> {
        self.family.as_ref().ok_or_else(|| Error::Config("missing `family` section".into()))
    }

    pub fn probe_section(&self) -> Result<&ProbeSection> {
        let p = self.probe.as_ref().ok_or_else(|| Error::Config("missing `probe` section".into()))?;
        p.probe_config().validate()?;
        Ok(p)
    }
}
