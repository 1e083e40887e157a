//! On-disk containers: a schema-versioned JSON metadata file next to flat
//! arrays stored as CSV or little-endian f64 binary.
//!
//! CSV cells print integral values plainly and everything else in shortest
//! round-trip exponent form, so both formats reload bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, RealField};
use crate::forward::BoundaryData;
use crate::geometry::{FrequencySet, Medium, Sphere, SurfaceMesh, Vec3, VoxelGrid};
use crate::imaging::ImageStack;
use crate::inverse::{FistaTrace, IterRecord};

pub const CONTAINER_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrayFormat {
    #[default]
    Csv,
    Bin,
}

impl ArrayFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Bin => "bin",
        }
    }
}

impl FromStr for ArrayFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "bin" => Ok(Self::Bin),
            other => Err(Error::InvalidArgument(format!(
                "unknown array format `{other}` (expected csv or bin)"
            ))),
        }
    }
}

/// A dense row-major table of f64 with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub data: Vec<f64>,
}

impl Table {
    pub fn new(columns: &[&str], data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len() % columns.len(), 0);
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.columns.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.columns.len();
        &self.data[r * c..(r + 1) * c]
    }
}

/// Pointer from a metadata file to one array file in the same directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayRef {
    pub file: String,
    pub format: ArrayFormat,
    pub rows: usize,
    pub columns: Vec<String>,
}

/// Formats one cell so that `parse::<f64>` returns the same bits.
pub fn format_f64(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn write_table(dir: &Path, file: &str, format: ArrayFormat, table: &Table) -> Result<ArrayRef> {
    let path = dir.join(file);
    let bytes = match format {
        ArrayFormat::Csv => {
            let mut s = table.columns.join(",");
            s.push('\n');
            for r in 0..table.rows() {
                for (i, v) in table.row(r).iter().enumerate() {
                    if i > 0 {
                        s.push(',');
                    }
                    let _ = write!(s, "{}", format_f64(*v));
                }
                s.push('\n');
            }
            s.into_bytes()
        }
        ArrayFormat::Bin => table.data.iter().flat_map(|v| v.to_le_bytes()).collect(),
    };
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(ArrayRef {
        file: file.to_string(),
        format,
        rows: table.rows(),
        columns: table.columns.clone(),
    })
}

pub fn read_table(dir: &Path, array: &ArrayRef) -> Result<Table> {
    let path = dir.join(&array.file);
    let ncol = array.columns.len();
    if ncol == 0 {
        return Err(Error::format(&path, "array has no columns"));
    }
    let data = match array.format {
        ArrayFormat::Csv => {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let mut lines = text.lines();
            let header = lines.next().ok_or_else(|| Error::format(&path, "empty file"))?;
            let cols: Vec<&str> = header.split(',').collect();
            if cols != array.columns {
                return Err(Error::format(&path, format!("header {cols:?} != {:?}", array.columns)));
            }
            let mut data = Vec::with_capacity(array.rows * ncol);
            for (i, line) in lines.enumerate() {
                let before = data.len();
                for cell in line.split(',') {
                    let v = cell
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| Error::format(&path, format!("row {}: `{cell}`: {e}", i + 1)))?;
                    data.push(v);
                }
                if data.len() - before != ncol {
                    return Err(Error::format(&path, format!("row {} has the wrong cell count", i + 1)));
                }
            }
            data
        }
        ArrayFormat::Bin => {
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if bytes.len() % 8 != 0 {
                return Err(Error::format(&path, "binary length is not a multiple of 8"));
            }
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect()
        }
    };
    if data.len() != array.rows * ncol {
        return Err(Error::format(
            &path,
            format!("expected {} rows of {ncol}, found {} values", array.rows, data.len()),
        ));
    }
    Ok(Table {
        columns: array.columns.clone(),
        data,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

fn check_header(path: &Path, kind: &str, expected: &str, version: u32) -> Result<()> {
    if version != CONTAINER_VERSION {
        return Err(Error::format(path, format!("unsupported schema_version {version}")));
    }
    if kind != expected {
        return Err(Error::format(path, format!("expected a `{expected}` container, found `{kind}`")));
    }
    Ok(())
}

fn parent(meta: &Path) -> &Path {
    meta.parent().unwrap_or_else(|| Path::new("."))
}

const VOXEL_COLS: [&str; 3] = ["i", "j", "k"];

fn voxel_table(grid: &VoxelGrid, names: &[&str], values: impl Fn(usize, &mut Vec<f64>)) -> Table {
    let mut cols: Vec<&str> = VOXEL_COLS.to_vec();
    cols.extend_from_slice(names);
    let mut data = Vec::with_capacity(grid.len() * cols.len());
    for v in 0..grid.len() {
        let [i, j, k] = grid.ijk(v);
        data.extend([i as f64, j as f64, k as f64]);
        values(v, &mut data);
    }
    Table::new(&cols, data)
}

/// Checks the voxel index columns and returns the remaining cells per row.
fn voxel_values(path: &Path, grid: &VoxelGrid, table: &Table) -> Result<Vec<f64>> {
    if table.rows() != grid.len() {
        return Err(Error::format(path, format!("{} rows for {} voxels", table.rows(), grid.len())));
    }
    let mut out = Vec::with_capacity(table.rows() * (table.columns.len() - 3));
    for v in 0..grid.len() {
        let row = table.row(v);
        let ijk = grid.ijk(v);
        if (0..3).any(|a| row[a] != ijk[a] as f64) {
            return Err(Error::format(path, format!("row {v} does not match voxel {ijk:?}")));
        }
        out.extend_from_slice(&row[3..]);
    }
    Ok(out)
}

const REAL_COLS: [&str; 3] = ["fx", "fy", "fz"];
const COMPLEX_COLS: [&str; 6] = ["re_x", "im_x", "re_y", "im_y", "re_z", "im_z"];

fn real_field_table(f: &RealField) -> Table {
    voxel_table(&f.grid, &REAL_COLS, |v, out| out.extend_from_slice(&f.data[3 * v..3 * v + 3]))
}

fn complex_field_table(f: &ComplexField) -> Table {
    voxel_table(&f.grid, &COMPLEX_COLS, |v, out| {
        for c in &f.data[3 * v..3 * v + 3] {
            out.extend([c.re, c.im]);
        }
    })
}

fn to_complex(values: &[f64]) -> Vec<Complex64> {
    values.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RealFieldMeta {
    schema_version: u32,
    kind: String,
    grid: VoxelGrid,
    data: ArrayRef,
}

/// Writes `<stem>.json` and `<stem>.field.<ext>`; returns the metadata path.
pub fn write_real_field(dir: &Path, stem: &str, field: &RealField, format: ArrayFormat) -> Result<PathBuf> {
    let data = write_table(dir, &format!("{stem}.field.{}", format.extension()), format, &real_field_table(field))?;
    let meta = RealFieldMeta {
        schema_version: CONTAINER_VERSION,
        kind: "real_field".into(),
        grid: field.grid,
        data,
    };
    let path = dir.join(format!("{stem}.json"));
    write_json(&path, &meta)?;
    Ok(path)
}

pub fn read_real_field(meta_path: &Path) -> Result<RealField> {
    let meta: RealFieldMeta = read_json(meta_path)?;
    check_header(meta_path, &meta.kind, "real_field", meta.schema_version)?;
    meta.grid.validate()?;
    let table = read_table(parent(meta_path), &meta.data)?;
    let values = voxel_values(meta_path, &meta.grid, &table)?;
    RealField::from_data(meta.grid, values)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BoundaryMeta {
    schema_version: u32,
    kind: String,
    medium: Medium,
    omegas: Vec<f64>,
    n_points: usize,
    sphere: Option<Sphere>,
    mesh: ArrayRef,
    values: ArrayRef,
}

const MESH_COLS: [&str; 7] = ["x", "y", "z", "nx", "ny", "nz", "weight"];
const DATA_COLS: [&str; 8] = ["point", "freq", "re_x", "im_x", "re_y", "im_y", "re_z", "im_z"];

/// Writes `<stem>.json`, `<stem>.mesh.<ext>` and `<stem>.values.<ext>`,
/// the latter with one row per (mesh point, frequency).
pub fn write_boundary_data(
    dir: &Path,
    stem: &str,
    data: &BoundaryData,
    medium: &Medium,
    format: ArrayFormat,
) -> Result<PathBuf> {
    let ext = format.extension();
    let m = &data.mesh;
    let mut mesh_rows = Vec::with_capacity(m.len() * 7);
    for i in 0..m.len() {
        mesh_rows.extend(m.points[i].iter().chain(m.normals[i].iter()).copied());
        mesh_rows.push(m.weights[i]);
    }
    let mesh = write_table(dir, &format!("{stem}.mesh.{ext}"), format, &Table::new(&MESH_COLS, mesh_rows))?;
    let mut rows = Vec::with_capacity(data.n_points() * data.n_freqs() * 8);
    for i in 0..data.n_points() {
        for n in 0..data.n_freqs() {
            rows.extend([i as f64, n as f64]);
            for c in data.entry(i, n) {
                rows.extend([c.re, c.im]);
            }
        }
    }
    let values = write_table(dir, &format!("{stem}.values.{ext}"), format, &Table::new(&DATA_COLS, rows))?;
    let meta = BoundaryMeta {
        schema_version: CONTAINER_VERSION,
        kind: "boundary_data".into(),
        medium: *medium,
        omegas: data.freqs.omegas().to_vec(),
        n_points: data.n_points(),
        sphere: m.sphere,
        mesh,
        values,
    };
    let path = dir.join(format!("{stem}.json"));
    write_json(&path, &meta)?;
    Ok(path)
}

/// Reads boundary data and the medium it was synthesized in.
pub fn read_boundary_data(meta_path: &Path) -> Result<(BoundaryData, Medium)> {
    let meta: BoundaryMeta = read_json(meta_path)?;
    check_header(meta_path, &meta.kind, "boundary_data", meta.schema_version)?;
    let dir = parent(meta_path);
    let mesh_table = read_table(dir, &meta.mesh)?;
    if mesh_table.rows() != meta.n_points {
        return Err(Error::format(meta_path, "mesh row count does not match n_points"));
    }
    let mut points = Vec::with_capacity(meta.n_points);
    let mut normals = Vec::with_capacity(meta.n_points);
    let mut weights = Vec::with_capacity(meta.n_points);
    for r in 0..mesh_table.rows() {
        let row = mesh_table.row(r);
        points.push(Vec3::new(row[0], row[1], row[2]));
        normals.push(Vec3::new(row[3], row[4], row[5]));
        weights.push(row[6]);
    }
    let mut mesh = SurfaceMesh::new(points, weights, normals)?;
    mesh.sphere = meta.sphere;
    let freqs = FrequencySet::new(meta.omegas)?;
    let table = read_table(dir, &meta.values)?;
    let nf = freqs.len();
    if table.rows() != meta.n_points * nf {
        return Err(Error::format(meta_path, "value row count does not match points x frequencies"));
    }
    let mut values = Vec::with_capacity(3 * table.rows());
    for r in 0..table.rows() {
        let row = table.row(r);
        if row[0] != (r / nf) as f64 || row[1] != (r % nf) as f64 {
            return Err(Error::format(meta_path, format!("value row {r} is out of order")));
        }
        values.extend(to_complex(&row[2..]));
    }
    Ok((BoundaryData::from_values(mesh, freqs, values)?, meta.medium))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StackMeta {
    schema_version: u32,
    kind: String,
    grid: VoxelGrid,
    omegas: Vec<f64>,
    images: Vec<ArrayRef>,
    broadband: Option<ArrayRef>,
}

/// Writes `<stem>.json`, one `<stem>.freqNNN.<ext>` per frequency and
/// `<stem>.broadband.<ext>` when present.
pub fn write_image_stack(dir: &Path, stem: &str, stack: &ImageStack, format: ArrayFormat) -> Result<PathBuf> {
    stack.validate()?;
    let ext = format.extension();
    let images = stack
        .images
        .iter()
        .enumerate()
        .map(|(n, img)| write_table(dir, &format!("{stem}.freq{n:03}.{ext}"), format, &complex_field_table(img)))
        .collect::<Result<Vec<_>>>()?;
    let broadband = stack
        .broadband
        .as_ref()
        .map(|b| write_table(dir, &format!("{stem}.broadband.{ext}"), format, &real_field_table(b)))
        .transpose()?;
    let meta = StackMeta {
        schema_version: CONTAINER_VERSION,
        kind: "image_stack".into(),
        grid: stack.grid,
        omegas: stack.omegas.clone(),
        images,
        broadband,
    };
    let path = dir.join(format!("{stem}.json"));
    write_json(&path, &meta)?;
    Ok(path)
}

pub fn read_image_stack(meta_path: &Path) -> Result<ImageStack> {
    let meta: StackMeta = read_json(meta_path)?;
    check_header(meta_path, &meta.kind, "image_stack", meta.schema_version)?;
    meta.grid.validate()?;
    let dir = parent(meta_path);
    let images = meta
        .images
        .iter()
        .map(|a| {
            let values = voxel_values(meta_path, &meta.grid, &read_table(dir, a)?)?;
            ComplexField::from_data(meta.grid, to_complex(&values))
        })
        .collect::<Result<Vec<_>>>()?;
    let broadband = meta
        .broadband
        .as_ref()
        .map(|a| {
            let values = voxel_values(meta_path, &meta.grid, &read_table(dir, a)?)?;
            RealField::from_data(meta.grid, values)
        })
        .transpose()?;
    let stack = ImageStack {
        grid: meta.grid,
        omegas: meta.omegas,
        images,
        broadband,
    };
    stack.validate()?;
    Ok(stack)
}

pub const TRACE_COLUMNS: [&str; 8] = ["k", "L", "M", "R", "gamma", "s", "i_k", "rel_change"];

/// Trace as CSV with columns `k, L, M, R, gamma, s, i_k, rel_change`.
pub fn write_trace(path: &Path, trace: &FistaTrace) -> Result<()> {
    let mut data = Vec::with_capacity(trace.records.len() * 8);
    for r in &trace.records {
        data.extend([
            r.k as f64,
            r.objective,
            r.fidelity,
            r.regularizer,
            r.gamma,
            r.s,
            r.backtracks as f64,
            r.rel_change,
        ]);
    }
    let dir = parent(path);
    let file = path
        .file_name()
        .and_then(|f| f.to_str())
        .ok_or_else(|| Error::format(path, "trace path has no file name"))?;
    write_table(dir, file, ArrayFormat::Csv, &Table::new(&TRACE_COLUMNS, data))?;
    Ok(())
}

/// Reads a trace CSV. The majorizer value is not stored and comes back NaN.
pub fn read_trace(path: &Path) -> Result<FistaTrace> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let rows = text.lines().count().saturating_sub(1);
    let file = path.file_name().and_then(|f| f.to_str()).unwrap_or_default();
    let array = ArrayRef {
        file: file.to_string(),
        format: ArrayFormat::Csv,
        rows,
        columns: TRACE_COLUMNS.iter().map(|c| c.to_string()).collect(),
    };
    let table = read_table(parent(path), &array)?;
    let records = (0..table.rows())
        .map(|r| {
            let v = table.row(r);
            IterRecord {
                k: v[0] as usize,
                objective: v[1],
                fidelity: v[2],
                regularizer: v[3],
                gamma: v[4],
                s: v[5],
                backtracks: v[6] as usize,
                rel_change: v[7],
                majorizer: f64::NAN,
            }
        })
        .collect();
    Ok(FistaTrace {
        records,
        converged: false,
    })
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_json(path, value)
}

pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    read_json(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_sphere_mesh;

    #[test]
    fn f64_cells_round_trip() {
        for v in [0.0, -0.0, 1.0, -3.0, 0.1, 1.0 / 3.0, 1e-300, 5e-324, f64::MAX, 1e15, 123456.789, -2.5e-7] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format_f64(3.0), "3");
    }

    #[test]
    fn table_round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let t = Table::new(&["a", "b"], vec![1.0, 0.1, -2.0, 1.0 / 7.0]);
        for f in [ArrayFormat::Csv, ArrayFormat::Bin] {
            let r = write_table(dir.path(), &format!("t.{}", f.extension()), f, &t).unwrap();
            assert_eq!(read_table(dir.path(), &r).unwrap(), t);
        }
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let g = VoxelGrid::new([0.0; 3], 1.0, [2, 1, 1]).unwrap();
        let p = write_real_field(dir.path(), "f", &RealField::zeros(g), ArrayFormat::Csv).unwrap();
        assert!(matches!(read_image_stack(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn boundary_rows_per_point_and_frequency() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = make_sphere_mesh([0.0; 3], 2.0, 4).unwrap();
        let freqs = FrequencySet::new(vec![1.0, 2.0]).unwrap();
        let d = BoundaryData::zeros(mesh, freqs);
        let p = write_boundary_data(dir.path(), "d", &d, &Medium::default(), ArrayFormat::Csv).unwrap();
        let text = fs::read_to_string(dir.path().join("d.values.csv")).unwrap();
        assert_eq!(text.lines().count(), 1 + 8);
        let (back, _) = read_boundary_data(&p).unwrap();
        assert_eq!(back, d);
    }
}
