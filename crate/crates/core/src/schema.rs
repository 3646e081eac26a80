//! Attribute metadata, datasets and similarity neighbourhoods.
//!
//! The neighbourhood of an input frees every protected attribute over its
//! whole domain and lets each non-sensitive attribute move by at most its
//! tolerance `epsilon` (zero means it must match exactly). Protected
//! attributes are always treated as the continuous interval `[lo, hi]` for
//! bounding, which over-approximates any discrete set of values.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const SCHEMA_VERSION: u32 = 1;
const DOMAIN_TOL: f64 = 1e-9;
pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttrKind {
    Protected,
    Nonsensitive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Integer,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attribute {
    pub name: String,
    pub kind: AttrKind,
    pub lo: f64,
    pub hi: f64,
    pub value_kind: ValueKind,
    pub epsilon: f64,
}

impl Attribute {
    pub fn new(name: impl Into<String>, kind: AttrKind, lo: f64, hi: f64, value_kind: ValueKind, epsilon: f64) -> Self {
        Self {
            name: name.into(),
            kind,
            lo,
            hi,
            value_kind,
            epsilon,
        }
    }

    pub fn protected(name: impl Into<String>, lo: f64, hi: f64, value_kind: ValueKind) -> Self {
        Self::new(name, AttrKind::Protected, lo, hi, value_kind, 0.0)
    }

    pub fn is_protected(&self) -> bool {
        self.kind == AttrKind::Protected
    }

    /// Integer grid `ceil(lo) ..= floor(hi)` clipped to the domain.
    fn integer_window(&self, lo: f64, hi: f64) -> (i64, i64) {
        let lo = lo.max(self.lo);
        let hi = hi.min(self.hi);
        ((lo - DOMAIN_TOL).ceil() as i64, (hi + DOMAIN_TOL).floor() as i64)
    }
}

/// Whether the training pipeline min-max scales inputs. Scaling is folded
/// back into the first layer, so models always consume raw schema units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scaling {
    #[default]
    None,
    MinMax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeSchema {
    attrs: Vec<Attribute>,
    pub scaling: Scaling,
}

impl AttributeSchema {
    pub fn new(attrs: Vec<Attribute>) -> Result<Self> {
        if attrs.is_empty() {
            return Err(Error::Input("schema has no attributes".into()));
        }
        for (j, a) in attrs.iter().enumerate() {
            if a.name.is_empty() || a.name.contains(',') || a.name.contains(char::is_whitespace) {
                return Err(Error::Input(format!("attribute {j}: invalid name {:?}", a.name)));
            }
            if !(a.lo.is_finite() && a.hi.is_finite()) || a.lo > a.hi {
                return Err(Error::Input(format!(
                    "attribute {}: need finite lo <= hi, got [{}, {}]",
                    a.name, a.lo, a.hi
                )));
            }
            if !(a.epsilon.is_finite() && a.epsilon >= 0.0) {
                return Err(Error::Input(format!(
                    "attribute {}: epsilon must be finite and >= 0",
                    a.name
                )));
            }
            if attrs[..j].iter().any(|b| b.name == a.name) {
                return Err(Error::Input(format!("duplicate attribute {}", a.name)));
            }
        }
        if !attrs.iter().any(Attribute::is_protected) {
            return Err(Error::Input("schema needs at least one protected attribute".into()));
        }
        Ok(Self {
            attrs,
            scaling: Scaling::None,
        })
    }

    pub fn with_scaling(mut self, scaling: Scaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attrs
    }

    pub fn dim(&self) -> usize {
        self.attrs.len()
    }

    pub fn protected_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| self.attrs[j].is_protected()).collect()
    }

    pub fn nonsensitive_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| !self.attrs[j].is_protected()).collect()
    }

    /// Copy of the schema with every non-sensitive tolerance replaced.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        let attrs = self
            .attrs
            .iter()
            .map(|a| {
                let mut a = a.clone();
                if !a.is_protected() {
                    a.epsilon = epsilon;
                }
                a
            })
            .collect();
        Ok(Self::new(attrs)?.with_scaling(self.scaling))
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::dim("input vs schema", self.dim(), x.len()));
        }
        for (a, &v) in self.attrs.iter().zip(x) {
            if !v.is_finite() || v < a.lo - DOMAIN_TOL || v > a.hi + DOMAIN_TOL {
                return Err(Error::Input(format!(
                    "attribute {} = {v} outside domain [{}, {}]",
                    a.name, a.lo, a.hi
                )));
            }
        }
        Ok(())
    }

    /// The similarity neighbourhood of `x` as an axis-aligned box.
    pub fn neighborhood(&self, x: &[f64]) -> Result<InputBox> {
        self.check_point(x)?;
        let (lower, upper) = self
            .attrs
            .iter()
            .zip(x)
            .map(|(a, &v)| match a.kind {
                AttrKind::Protected => (a.lo, a.hi),
                AttrKind::Nonsensitive => {
                    let v = v.clamp(a.lo, a.hi);
                    ((v - a.epsilon).max(a.lo), (v + a.epsilon).min(a.hi))
                }
            })
            .unzip();
        InputBox::new(lower, upper)
    }

    pub fn enumerate_neighborhood(&self, x: &[f64]) -> Result<Neighborhood> {
        self.enumerate_neighborhood_capped(x, DEFAULT_ENUMERATION_CAP)
    }

    /// All grid points of the neighbourhood, or [`Neighborhood::Infinite`] when
    /// some varying dimension is continuous or the grid exceeds `cap` points.
    pub fn enumerate_neighborhood_capped(&self, x: &[f64], cap: usize) -> Result<Neighborhood> {
        Ok(match self.grid(x, None, cap)? {
            Some(points) => Neighborhood::Finite(points),
            None => Neighborhood::Infinite,
        })
    }

    /// Like [`Self::enumerate_neighborhood_capped`], but continuous dimensions
    /// are replaced by `per_axis` evenly spaced values including both ends.
    /// `None` when the grid would exceed `cap` points.
    pub fn grid_neighborhood(&self, x: &[f64], per_axis: usize, cap: usize) -> Result<Option<Vec<Vec<f64>>>> {
        self.grid(x, Some(per_axis.max(2)), cap)
    }

    fn grid(&self, x: &[f64], continuous: Option<usize>, cap: usize) -> Result<Option<Vec<Vec<f64>>>> {
        let b = self.neighborhood(x)?;
        let mut axes: Vec<Vec<f64>> = Vec::with_capacity(self.dim());
        let mut count: usize = 1;
        for (j, a) in self.attrs.iter().enumerate() {
            let (lo, hi) = (b.lower[j], b.upper[j]);
            let axis = if lo == hi {
                vec![lo]
            } else if a.kind == AttrKind::Nonsensitive && a.epsilon == 0.0 {
                vec![x[j]]
            } else {
                match (a.value_kind, continuous) {
                    (ValueKind::Continuous, None) => return Ok(None),
                    (ValueKind::Continuous, Some(k)) => {
                        (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
                    }
                    (ValueKind::Integer, _) => {
                        let (first, last) = a.integer_window(lo, hi);
                        if first > last {
                            vec![x[j]]
                        } else {
                            let span = (last - first + 1) as usize;
                            if span > cap {
                                return Ok(None);
                            }
                            (first..=last).map(|v| v as f64).collect()
                        }
                    }
                }
            };
            count = count.saturating_mul(axis.len());
            if count > cap {
                return Ok(None);
            }
            axes.push(axis);
        }
        let mut points = Vec::with_capacity(count);
        let mut idx = vec![0usize; axes.len()];
        loop {
            points.push(idx.iter().zip(&axes).map(|(&i, ax)| ax[i]).collect());
            let mut k = axes.len();
            loop {
                if k == 0 {
                    return Ok(Some(points));
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < axes[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    /// Uniform draw from the neighbourhood of `x`, respecting integer domains.
    pub fn sample_neighbor<R: Rng>(&self, x: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let b = self.neighborhood(x)?;
        Ok(self
            .attrs
            .iter()
            .enumerate()
            .map(|(j, a)| {
                if a.kind == AttrKind::Nonsensitive && a.epsilon == 0.0 {
                    return x[j];
                }
                draw(a, b.lower[j], b.upper[j], x[j], rng)
            })
            .collect())
    }

    /// Uniform draw from the whole input domain.
    pub fn sample_input<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.attrs.iter().map(|a| draw(a, a.lo, a.hi, a.lo, rng)).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# ifrepair schema");
        let _ = writeln!(out, "version = {SCHEMA_VERSION}");
        let scaling = match self.scaling {
            Scaling::None => "none",
            Scaling::MinMax => "minmax",
        };
        let _ = writeln!(out, "scaling = {scaling}");
        let _ = writeln!(out, "# name, kind, lo, hi, integer|continuous, epsilon");
        for a in &self.attrs {
            let kind = match a.kind {
                AttrKind::Protected => "protected",
                AttrKind::Nonsensitive => "nonsensitive",
            };
            let vk = match a.value_kind {
                ValueKind::Integer => "integer",
                ValueKind::Continuous => "continuous",
            };
            let _ = writeln!(
                out,
                "attr = {}, {kind}, {}, {}, {vk}, {}",
                a.name, a.lo, a.hi, a.epsilon
            );
        }
        out
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let err = |line: usize, field: &str, message: String| Error::Parse {
            path: origin.to_string(),
            line,
            field: field.to_string(),
            message,
        };
        let mut version = None;
        let mut scaling = Scaling::None;
        let mut attrs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(err(lineno, line, "expected `key = value`".into()));
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "version" => {
                    if value != SCHEMA_VERSION.to_string() {
                        return Err(err(lineno, key, format!("unsupported version {value:?}")));
                    }
                    version = Some(());
                }
                "scaling" => {
                    scaling = match value {
                        "none" => Scaling::None,
                        "minmax" => Scaling::MinMax,
                        _ => return Err(err(lineno, key, format!("unknown scaling {value:?}"))),
                    }
                }
                "attr" => {
                    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                    if parts.len() != 6 {
                        return Err(err(
                            lineno,
                            key,
                            format!("expected 6 comma-separated entries, got {}", parts.len()),
                        ));
                    }
                    let kind = match parts[1] {
                        "protected" => AttrKind::Protected,
                        "nonsensitive" => AttrKind::Nonsensitive,
                        other => return Err(err(lineno, key, format!("unknown kind {other:?}"))),
                    };
                    let num = |s: &str, what: &str| {
                        s.parse::<f64>()
                            .map_err(|_| err(lineno, key, format!("bad {what} {s:?}")))
                    };
                    let value_kind = match parts[4] {
                        "integer" => ValueKind::Integer,
                        "continuous" => ValueKind::Continuous,
                        other => return Err(err(lineno, key, format!("unknown domain type {other:?}"))),
                    };
                    attrs.push(Attribute::new(
                        parts[0],
                        kind,
                        num(parts[2], "lo")?,
                        num(parts[3], "hi")?,
                        value_kind,
                        num(parts[5], "epsilon")?,
                    ));
                }
                _ => return Err(err(lineno, key, "unknown field".into())),
            }
        }
        if version.is_none() {
            return Err(err(0, "version", "missing".into()));
        }
        Ok(Self::new(attrs)
            .map_err(|e| err(0, "attr", e.to_string()))?
            .with_scaling(scaling))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }
}

fn draw<R: Rng>(a: &Attribute, lo: f64, hi: f64, fallback: f64, rng: &mut R) -> f64 {
    if lo == hi {
        return lo;
    }
    match a.value_kind {
        ValueKind::Continuous => rng.random_range(lo..=hi),
        ValueKind::Integer => {
            let (first, last) = a.integer_window(lo, hi);
            if first > last {
                fallback
            } else {
                rng.random_range(first..=last) as f64
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Neighborhood {
    Finite(Vec<Vec<f64>>),
    Infinite,
}

/// Axis-aligned input region `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl InputBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dim("box bounds", lower.len(), upper.len()));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite()) || l > u)
        {
            return Err(Error::Input("box needs finite lower <= upper".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn point(x: &[f64]) -> Self {
        Self {
            lower: x.to_vec(),
            upper: x.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
    }

    pub fn contains_box(&self, other: &InputBox) -> bool {
        other.dim() == self.dim()
            && (0..self.dim()).all(|j| self.lower[j] <= other.lower[j] && other.upper[j] <= self.upper[j])
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| if l == u { l } else { rng.random_range(l..=u) })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: u8,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub rows: Vec<Sample>,
}

impl Dataset {
    pub fn new(rows: Vec<Sample>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.x.clone()).collect()
    }

    pub fn validate(&self, schema: &AttributeSchema) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            schema
                .check_point(&row.x)
                .map_err(|e| Error::Input(format!("row {i}: {e}")))?;
            if row.y > 1 {
                return Err(Error::Input(format!("row {i}: label {} not in {{0,1}}", row.y)));
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, schema: &AttributeSchema, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let mut header: Vec<&str> = schema.attributes().iter().map(|a| a.name.as_str()).collect();
        header.push("label");
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec: Vec<String> = row.x.iter().map(|v| v.to_string()).collect();
            rec.push(row.y.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

pub fn load_dataset(csv_path: impl AsRef<Path>, schema: &AttributeSchema) -> Result<Dataset> {
    let csv_path = csv_path.as_ref();
    let file = std::fs::File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let origin = csv_path.display().to_string();
    read_dataset(file, schema, &origin)
}

pub fn read_dataset<R: std::io::Read>(reader: R, schema: &AttributeSchema, origin: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let expected: Vec<&str> = schema
        .attributes()
        .iter()
        .map(|a| a.name.as_str())
        .chain(std::iter::once("label"))
        .collect();
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::Parse {
            path: origin.to_string(),
            line: 1,
            field: "header".into(),
            message: format!("expected {expected:?}, got {got:?}"),
        });
    }
    let m = schema.dim();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |field: &str, message: String| Error::Parse {
            path: origin.to_string(),
            line,
            field: field.to_string(),
            message: format!("row {i}: {message}"),
        };
        let mut x = Vec::with_capacity(m);
        for (j, a) in schema.attributes().iter().enumerate() {
            let v: f64 = rec[j]
                .parse()
                .map_err(|_| bad(&a.name, format!("bad number {:?}", &rec[j])))?;
            if !v.is_finite() || v < a.lo - DOMAIN_TOL || v > a.hi + DOMAIN_TOL {
                return Err(bad(&a.name, format!("value {v} outside domain [{}, {}]", a.lo, a.hi)));
            }
            x.push(v);
        }
        let y = match &rec[m] {
            "0" => 0,
            "1" => 1,
            other => return Err(bad("label", format!("label {other:?} not in {{0,1}}"))),
        };
        rows.push(Sample { x, y });
    }
    Ok(Dataset { rows })
}

/// Repair set, calibration set and held-out test set.
#[derive(Debug, Clone, PartialEq)]
pub struct RepairSplit {
    pub repair: Dataset,
    pub calibration: Dataset,
    pub test: Dataset,
}

pub fn split_repair_sets(dataset: &Dataset, n_r: usize, n_c: usize, seed: u64) -> Result<RepairSplit> {
    if n_r + n_c > dataset.len() {
        return Err(Error::Input(format!(
            "need {n_r} repair + {n_c} calibration rows but dataset has {}",
            dataset.len()
        )));
    }
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = |ids: &[usize]| Dataset::new(ids.iter().map(|&i| dataset.rows[i].clone()).collect());
    Ok(RepairSplit {
        repair: take(&idx[..n_r]),
        calibration: take(&idx[n_r..n_r + n_c]),
        test: take(&idx[n_r + n_c..]),
    })
}
