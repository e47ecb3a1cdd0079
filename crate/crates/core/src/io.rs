//! Serialization of discs and reports. Every float is written with 17
//! significant digits so that files round-trip bit for bit.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::extremal::ProbeDiagnostics;
use crate::grid::{make_grid, DiscMap, C64};

/// `x` in scientific notation with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty JSON with every `f64` printed through [`format_f64`].
struct Digits17<'a>(PrettyFormatter<'a>);

impl Formatter for Digits17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Non-finite floats become `null`.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Read back an `f64` whose infinite value was written as `null`.
pub fn de_f64_null_inf<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

pub fn de_f64_vec_null_inf<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    Ok(Vec::<Option<f64>>::deserialize(d)?
        .into_iter()
        .map(|x| x.unwrap_or(f64::INFINITY))
        .collect())
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, to_json_string(value)?)?;
    Ok(())
}

/// On-disk form of a [`DiscMap`]: `values` holds `[re, im]` pairs in
/// node-major order (all components of node 0, then node 1, ...).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DiscMapRecord {
    pub n_radial: usize,
    pub n_angular: usize,
    pub dim: usize,
    pub values: Vec<[f64; 2]>,
}

impl DiscMapRecord {
    pub fn from_disc(f: &DiscMap) -> Self {
        Self {
            n_radial: f.grid().n_radial(),
            n_angular: f.grid().n_angular(),
            dim: f.dim(),
            values: f.values().iter().map(|c| [c.re, c.im]).collect(),
        }
    }

    pub fn to_disc(&self) -> Result<DiscMap> {
        let grid = make_grid(self.n_radial, self.n_angular)?;
        let values = self.values.iter().map(|p| C64::new(p[0], p[1])).collect();
        DiscMap::new(grid, self.dim, values)
    }
}

pub fn disc_to_json(f: &DiscMap) -> Result<String> {
    to_json_string(&DiscMapRecord::from_disc(f))
}

pub fn disc_from_json(s: &str) -> Result<DiscMap> {
    serde_json::from_str::<DiscMapRecord>(s)?.to_disc()
}

pub fn write_disc_json(f: &DiscMap, path: &Path) -> Result<()> {
    fs::write(path, disc_to_json(f)?)?;
    Ok(())
}

pub fn read_disc_json(path: &Path) -> Result<DiscMap> {
    disc_from_json(&fs::read_to_string(path)?)
}

/// Columns `radius,angle,component_index,re,im`, one row per node and component.
pub fn disc_to_csv(f: &DiscMap) -> String {
    let grid = f.grid();
    let mut out = String::from("radius,angle,component_index,re,im\n");
    for n in 0..grid.node_count() {
        for (c, v) in f.node(n).iter().enumerate() {
            out.push_str(&format!(
                "{},{},{c},{},{}\n",
                format_f64(grid.node_radius(n)),
                format_f64(grid.node_angle(n)),
                format_f64(v.re),
                format_f64(v.im)
            ));
        }
    }
    out
}

pub fn write_disc_csv(f: &DiscMap, path: &Path) -> Result<()> {
    fs::write(path, disc_to_csv(f))?;
    Ok(())
}

/// Read back [`disc_to_csv`] output onto the grid of the given shape.
pub fn disc_from_csv(s: &str, n_radial: usize, n_angular: usize) -> Result<DiscMap> {
    let grid = make_grid(n_radial, n_angular)?;
    let rows: Vec<&str> = s.lines().skip(1).filter(|l| !l.trim().is_empty()).collect();
    let nodes = grid.node_count();
    if nodes == 0 || !rows.len().is_multiple_of(nodes) {
        return Err(Error::Precondition(format!("{} CSV rows do not fit {nodes} nodes", rows.len())));
    }
    let dim = rows.len() / nodes;
    let mut values = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let cols: Vec<&str> = row.split(',').collect();
        if cols.len() != 5 {
            return Err(Error::Precondition(format!("CSV row {} has {} columns", i + 2, cols.len())));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Precondition(format!("CSV row {}: {e}", i + 2)))
        };
        values.push(C64::new(parse(cols[3])?, parse(cols[4])?));
    }
    DiscMap::new(grid, dim, values)
}

pub fn probe_to_json(d: &ProbeDiagnostics) -> Result<String> {
    to_json_string(d)
}

pub fn probe_from_json(s: &str) -> Result<ProbeDiagnostics> {
    Ok(serde_json::from_str(s)?)
}

/// Columns `r,t,lambda,max_rho,contained`; failed cells leave the numbers empty.
pub fn probe_cells_csv(d: &ProbeDiagnostics) -> String {
    let opt = |x: Option<f64>| x.map(format_f64).unwrap_or_default();
    let mut out = String::from("r,t,lambda,max_rho,contained\n");
    for c in &d.cells {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            format_f64(c.r),
            format_f64(c.t),
            opt(c.lambda),
            opt(c.max_rho),
            c.contained
        ));
    }
    out
}
