use std::fmt::Write as _;
use std::io;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::flows::FrameField;
use crate::geometry::ImmersionSamples;
use crate::grid::Grid;

use super::config::Tolerances;

/// Floats as `{:.16e}`: 17 significant digits, round-trip exact.
pub struct Digits17<F>(pub F);

impl<F: Formatter> Formatter for Digits17<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T, pretty: bool) -> Result<String> {
    let mut buf = Vec::new();
    let res = if pretty {
        value.serialize(&mut serde_json::Serializer::with_formatter(&mut buf, Digits17(PrettyFormatter::new())))
    } else {
        value.serialize(&mut serde_json::Serializer::with_formatter(&mut buf, Digits17(CompactFormatter)))
    };
    res.map_err(|e| Error::Internal(format!("json: {e}")))?;
    String::from_utf8(buf).map_err(|e| Error::Internal(e.to_string()))
}

pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub const DUMP_FORMAT: &str = "loopflat-frame-dump";

/// Self-describing frame field container. Frames are row-major, `None`
/// at masked points.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameDump {
    pub format: String,
    pub version: u32,
    pub case: String,
    pub grid: Grid,
    pub lambdas: Vec<f64>,
    pub size: usize,
    pub layout: String,
    pub base_index: usize,
    pub valid: Vec<bool>,
    pub frames: Vec<Vec<Option<Vec<f64>>>>,
    pub tolerances: Tolerances,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl FrameDump {
    pub fn from_field(case: &str, field: &FrameField, tolerances: &Tolerances) -> Self {
        FrameDump {
            format: DUMP_FORMAT.into(),
            version: 1,
            case: case.into(),
            grid: field.grid.clone(),
            lambdas: field.lambdas.clone(),
            size: field.size(),
            layout: "row-major".into(),
            base_index: field.base_index,
            valid: field.valid.clone(),
            frames: field
                .frames
                .iter()
                .map(|fl| fl.iter().zip(&field.valid).map(|(f, &v)| v.then(|| row_major(f))).collect())
                .collect(),
            tolerances: tolerances.clone(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Parse("empty frame dump".into()));
        }
        let d: FrameDump = serde_json::from_str(text).map_err(|e| Error::Parse(format!("frame dump: {e}")))?;
        d.check()?;
        Ok(d)
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parse(m));
        if self.format != DUMP_FORMAT || self.version != 1 {
            return bad(format!("unknown dump format {} v{}", self.format, self.version));
        }
        if self.layout != "row-major" {
            return bad(format!("unsupported layout {}", self.layout));
        }
        let g = Grid::new(self.grid.dims, self.grid.half_width, self.grid.spacing).map_err(|e| Error::Parse(e.to_string()))?;
        if g != self.grid {
            return bad("grid fields are inconsistent".into());
        }
        let n = g.len();
        if self.valid.len() != n || self.base_index >= n || !self.valid[self.base_index] {
            return bad("mask does not match the grid or excludes the base point".into());
        }
        if self.lambdas.is_empty() || self.frames.len() != self.lambdas.len() {
            return bad("one frame list per lambda is required".into());
        }
        for fl in &self.frames {
            if fl.len() != n {
                return bad("frame list length differs from the grid size".into());
            }
            for (f, &v) in fl.iter().zip(&self.valid) {
                match f {
                    Some(x) if v && x.len() == self.size * self.size && x.iter().all(|e| e.is_finite()) => {}
                    None if !v => {}
                    _ => return bad("frame payload does not match the mask or size".into()),
                }
            }
        }
        self.tolerances.validate().map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_field(&self) -> FrameField {
        let s = self.size;
        FrameField {
            grid: self.grid.clone(),
            lambdas: self.lambdas.clone(),
            frames: self
                .frames
                .iter()
                .map(|fl| {
                    fl.iter()
                        .map(|f| f.as_ref().map_or_else(|| DMatrix::identity(s, s), |x| DMatrix::from_row_slice(s, s, x)))
                        .collect()
                })
                .collect(),
            valid: self.valid.clone(),
            base_index: self.base_index,
        }
    }
}

/// Grid indices, coordinates, then the point coordinates for each λ.
pub fn samples_csv(sets: &[ImmersionSamples]) -> String {
    let mut out = String::new();
    let Some(first) = sets.first() else { return out };
    let g = &first.grid;
    let mut head: Vec<String> = (0..g.dims).map(|a| format!("i{a}")).collect();
    head.extend((0..g.dims).map(|a| format!("x{a}")));
    for s in sets {
        let dim = s.points.first().map_or(0, |p| p.len());
        head.extend((0..dim).map(|j| format!("lambda_{}_p{j}", s.lambda)));
    }
    out.push_str(&head.join(","));
    out.push('\n');
    for i in (0..g.len()).filter(|&i| sets.iter().all(|s| s.valid[i])) {
        let mut row: Vec<String> = g.multi(i).iter().map(|m| m.to_string()).collect();
        row.extend(g.point(i).into_iter().map(fmt17));
        for s in sets {
            row.extend(s.points[i].iter().map(|&v| fmt17(v)));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Orthogonal projection R^N -> R^3 onto the top three principal
/// directions of the (uncentred) samples; each row's largest entry is made
/// positive. For N <= 3 the identity is padded with zero rows.
pub fn obj_projection(samples: &ImmersionSamples) -> DMatrix<f64> {
    let pts: Vec<&DVector<f64>> = samples.points.iter().zip(&samples.valid).filter(|(_, &v)| v).map(|(p, _)| p).collect();
    let n = pts.first().map_or(0, |p| p.len());
    if n <= 3 {
        return DMatrix::from_fn(3, n, |i, j| if i == j { 1.0 } else { 0.0 });
    }
    let m = DMatrix::from_fn(n, pts.len(), |i, j| pts[j][i]);
    let (u, _, _) = crate::linalg::svd_sorted(&m);
    let mut p = DMatrix::from_fn(3, n, |i, j| u[(j, i)]);
    for mut row in p.row_iter_mut() {
        let big = row.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
        if big < 0.0 {
            row.neg_mut();
        }
    }
    p
}

/// Triangulated mesh of a two-dimensional sample set.
pub fn obj_mesh(samples: &ImmersionSamples) -> Result<String> {
    let g = &samples.grid;
    if g.dims != 2 {
        return Err(Error::Parameter("OBJ export needs a two-dimensional domain".into()));
    }
    let p = obj_projection(samples);
    let mut out = String::new();
    let _ = writeln!(out, "# loopflat mesh: case {} lambda {}", samples.case, fmt17(samples.lambda));
    let _ = writeln!(out, "# projection R^{} -> R^3, rows:", p.ncols());
    for row in p.row_iter() {
        let r: Vec<String> = row.iter().map(|&v| fmt17(v)).collect();
        let _ = writeln!(out, "# {}", r.join(" "));
    }
    let mut vid = vec![0usize; g.len()];
    let mut next = 1;
    for i in (0..g.len()).filter(|&i| samples.valid[i]) {
        let q = &p * &samples.points[i];
        let _ = writeln!(out, "v {} {} {}", fmt17(q[0]), fmt17(q[1]), fmt17(q[2]));
        vid[i] = next;
        next += 1;
    }
    for i in 0..g.len() {
        let (Some(a), Some(c)) = (g.neighbor(i, 0, 1), g.neighbor(i, 1, 1)) else { continue };
        let Some(d) = g.neighbor(a, 1, 1) else { continue };
        if [i, a, c, d].iter().all(|&k| samples.valid[k]) {
            let _ = writeln!(out, "f {} {} {}", vid[i], vid[a], vid[d]);
            let _ = writeln!(out, "f {} {} {}", vid[i], vid[d], vid[c]);
        }
    }
    Ok(out)
}
