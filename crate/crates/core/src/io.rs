//! On-disk formats: long-format tensor CSV, grid files, component CSVs,
//! JSON manifests, and the helpers the CLI subcommands are built from.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which is
//! lossless for `f64` round trips. Tensor CSVs are long format with header
//! `i,j,k,value` and 1-based indices; `k` references the grid file's line
//! order. Grid files hold one time value per line.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ftsvd::{Component, ComponentTrace, Decomposition, FitConfig, RankSelection};
use crate::function::RkhsFunction;
use crate::metrics::{EvalReport, TrajectoryBand};
use crate::rkhs::KernelSpec;
use crate::simulate::{GroundTruth, TruthComponent};
use crate::tensor::{Tensor3, TimeGrid};

/// Default size of the uniform plotting grid for sampled functions.
pub const DEFAULT_PLOT_GRID: usize = 512;

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("expected a number, got {s:?}"),
    })
}

fn parse_index(s: &str, line: usize, name: &str) -> Result<usize> {
    let v = s.trim().parse::<usize>().map_err(|_| Error::Parse {
        line,
        msg: format!("expected a positive integer for {name}, got {s:?}"),
    })?;
    if v == 0 {
        return Err(Error::Parse {
            line,
            msg: format!("{name} indices are 1-based, got 0"),
        });
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// Tensor CSV

pub fn write_tensor_csv<P: AsRef<Path>>(path: P, t: &Tensor3) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["i", "j", "k", "value"])?;
    let (p1, p2, n) = t.dims();
    for i in 0..p1 {
        for j in 0..p2 {
            for k in 0..n {
                w.write_record([
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    (k + 1).to_string(),
                    fmt_f64(t.get(i, j, k)),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

struct LongRecords {
    p1: usize,
    p2: usize,
    n: usize,
    cells: Vec<(usize, usize, usize, f64)>,
}

fn read_long_csv<P: AsRef<Path>>(path: P) -> Result<LongRecords> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let headers = r.headers()?.clone();
    let expected = ["i", "j", "k", "value"];
    if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header i,j,k,value, got {headers:?}"),
        });
    }
    let mut cells = Vec::new();
    let (mut p1, mut p2, mut n) = (0usize, 0usize, 0usize);
    for (idx, record) in r.records().enumerate() {
        let line = idx + 2;
        let record = record?;
        if record.len() != 4 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 4 fields, got {}", record.len()),
            });
        }
        let i = parse_index(&record[0], line, "i")?;
        let j = parse_index(&record[1], line, "j")?;
        let k = parse_index(&record[2], line, "k")?;
        let value = parse_f64(&record[3], line)?;
        if !value.is_finite() {
            return Err(Error::Parse {
                line,
                msg: format!("value {value} is not finite"),
            });
        }
        p1 = p1.max(i);
        p2 = p2.max(j);
        n = n.max(k);
        cells.push((i - 1, j - 1, k - 1, value));
    }
    if cells.is_empty() {
        return Err(Error::Data("tensor CSV holds no data rows".into()));
    }
    Ok(LongRecords { p1, p2, n, cells })
}

/// Reads a dense long-format tensor CSV; every cell must appear exactly
/// once.
pub fn read_tensor_csv<P: AsRef<Path>>(path: P) -> Result<Tensor3> {
    let rec = read_long_csv(path)?;
    let total = rec.p1 * rec.p2 * rec.n;
    if rec.cells.len() != total {
        return Err(Error::Data(format!(
            "tensor CSV has {} rows but a dense {}x{}x{} tensor needs {}",
            rec.cells.len(),
            rec.p1,
            rec.p2,
            rec.n,
            total
        )));
    }
    let mut data = vec![f64::NAN; total];
    let mut seen = vec![false; total];
    for (i, j, k, value) in rec.cells {
        let idx = (k * rec.p1 + i) * rec.p2 + j;
        if seen[idx] {
            return Err(Error::Data(format!(
                "duplicate cell (i={}, j={}, k={})",
                i + 1,
                j + 1,
                k + 1
            )));
        }
        seen[idx] = true;
        data[idx] = value;
    }
    Tensor3::new(rec.p1, rec.p2, rec.n, data)
}

/// Reads a long-format count CSV; absent cells default to zero counts, as
/// usual for sparse count tables. Dimensions come from the largest indices.
pub fn read_counts_csv<P: AsRef<Path>>(path: P) -> Result<Tensor3> {
    let rec = read_long_csv(path)?;
    let total = rec.p1 * rec.p2 * rec.n;
    let mut data = vec![0.0; total];
    let mut seen = vec![false; total];
    for (i, j, k, value) in rec.cells {
        let idx = (k * rec.p1 + i) * rec.p2 + j;
        if seen[idx] {
            return Err(Error::Data(format!(
                "duplicate cell (i={}, j={}, k={})",
                i + 1,
                j + 1,
                k + 1
            )));
        }
        seen[idx] = true;
        data[idx] = value;
    }
    Tensor3::new(rec.p1, rec.p2, rec.n, data)
}

// ---------------------------------------------------------------------------
// Grid files

pub fn write_grid<P: AsRef<Path>>(path: P, grid: &TimeGrid) -> Result<()> {
    let mut out = String::new();
    for &s in grid.points() {
        out.push_str(&fmt_f64(s));
        out.push('\n');
    }
    fs::write(path.as_ref(), out)?;
    Ok(())
}

pub fn read_grid<P: AsRef<Path>>(path: P) -> Result<TimeGrid> {
    let file = fs::File::open(path.as_ref())?;
    let mut points = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        points.push(parse_f64(trimmed, idx + 1)?);
    }
    TimeGrid::new(points)
}

/// Reads a tensor and its grid together. When the grid file is unsorted the
/// tensor's mode-3 slices are re-ordered to follow the sorted grid.
pub fn read_tensor_and_grid<P: AsRef<Path>, Q: AsRef<Path>>(
    tensor_path: P,
    grid_path: Q,
) -> Result<(Tensor3, TimeGrid)> {
    let tensor = read_tensor_csv(tensor_path)?;
    let grid = read_grid(grid_path)?;
    if grid.len() != tensor.n() {
        return Err(Error::DimensionMismatch(format!(
            "grid has {} points but the tensor has {} slices",
            grid.len(),
            tensor.n()
        )));
    }
    let tensor = if grid.input_was_sorted() {
        tensor
    } else {
        tensor.reorder_mode3(grid.permutation())?
    };
    Ok((tensor, grid))
}

// ---------------------------------------------------------------------------
// Functions

#[derive(Serialize, Deserialize)]
struct FunctionJson {
    grid: Vec<f64>,
    beta: Vec<f64>,
    spec: KernelSpec,
}

pub fn write_function_json<P: AsRef<Path>>(path: P, f: &RkhsFunction) -> Result<()> {
    let doc = FunctionJson {
        grid: f.grid().points().to_vec(),
        beta: f.beta().iter().copied().collect(),
        spec: f.spec().clone(),
    };
    fs::write(path.as_ref(), serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

pub fn read_function_json<P: AsRef<Path>>(path: P) -> Result<RkhsFunction> {
    let doc: FunctionJson = serde_json::from_str(&fs::read_to_string(path.as_ref())?)?;
    RkhsFunction::new(
        TimeGrid::new(doc.grid)?,
        DVector::from_vec(doc.beta),
        doc.spec,
    )
}

/// Uniform inclusive plotting grid on `[0, 1]`.
pub fn plot_grid(m: usize) -> Vec<f64> {
    assert!(m >= 2);
    (0..m).map(|i| i as f64 / (m - 1) as f64).collect()
}

/// Writes `t,value` samples of a function on the uniform plotting grid.
pub fn write_function_samples_csv<P: AsRef<Path>>(
    path: P,
    f: &RkhsFunction,
    plot_m: usize,
) -> Result<()> {
    let ts = plot_grid(plot_m);
    let values = f.evaluate(&ts)?;
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["t", "value"])?;
    for (t, v) in ts.iter().zip(values) {
        w.write_record([fmt_f64(*t), fmt_f64(v)])?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Vectors as index,value CSV

pub fn write_vector_csv<P: AsRef<Path>>(path: P, v: &DVector<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["index", "value"])?;
    for (idx, value) in v.iter().enumerate() {
        w.write_record([(idx + 1).to_string(), fmt_f64(*value)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vector_csv<P: AsRef<Path>>(path: P) -> Result<DVector<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let mut values = Vec::new();
    for (idx, record) in r.records().enumerate() {
        let line = idx + 2;
        let record = record?;
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 2 fields, got {}", record.len()),
            });
        }
        let index = parse_index(&record[0], line, "index")?;
        if index != values.len() + 1 {
            return Err(Error::Parse {
                line,
                msg: format!("indices must be consecutive from 1, got {index}"),
            });
        }
        values.push(parse_f64(&record[1], line)?);
    }
    if values.is_empty() {
        return Err(Error::Data("vector CSV holds no rows".into()));
    }
    Ok(DVector::from_vec(values))
}

// ---------------------------------------------------------------------------
// Decomposition directory

/// Summary half of the decomposition output; the vectors live in sibling
/// CSV files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionManifest {
    pub lambdas: Vec<f64>,
    pub config: FitConfig,
    pub residual_frob: f64,
    pub bic: Option<f64>,
    pub truncated: bool,
    /// Scale convention of the reported singular values.
    pub lambda_scale: String,
    pub p1: usize,
    pub p2: usize,
    pub n: usize,
}

fn component_path(dir: &Path, index: usize, suffix: &str) -> std::path::PathBuf {
    dir.join(format!("comp{:02}_{suffix}.csv", index + 1))
}

/// Writes `manifest.json`, `grid.csv`, per-component `a`/`b`/`beta`/`xi`
/// CSVs, and the iteration-trace CSV into `dir`.
pub fn write_decomposition<P: AsRef<Path>>(
    dir: P,
    dec: &Decomposition,
    cfg: &FitConfig,
    grid: &TimeGrid,
    dims: (usize, usize, usize),
    plot_m: usize,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let manifest = DecompositionManifest {
        lambdas: dec.lambdas(),
        config: cfg.clone(),
        residual_frob: dec.residual_frob,
        bic: dec.bic,
        truncated: dec.truncated,
        lambda_scale: "projection coefficient: contraction divided by ||xi_n||^2".into(),
        p1: dims.0,
        p2: dims.1,
        n: dims.2,
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    write_grid(dir.join("grid.csv"), grid)?;
    for (idx, comp) in dec.components.iter().enumerate() {
        write_vector_csv(component_path(dir, idx, "a"), &comp.a)?;
        write_vector_csv(component_path(dir, idx, "b"), &comp.b)?;
        write_vector_csv(component_path(dir, idx, "beta"), comp.xi.beta())?;
        write_function_samples_csv(component_path(dir, idx, "xi"), &comp.xi, plot_m)?;
    }
    write_trace_csv(dir.join("trace.csv"), &dec.trace)?;
    Ok(())
}

pub fn write_trace_csv<P: AsRef<Path>>(path: P, traces: &[ComponentTrace]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["component", "iter", "delta_a", "delta_b", "delta_xi"])?;
    for (c, trace) in traces.iter().enumerate() {
        for step in &trace.steps {
            w.write_record([
                (c + 1).to_string(),
                step.iter.to_string(),
                fmt_f64(step.delta_a),
                fmt_f64(step.delta_b),
                fmt_f64(step.delta_xi),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a decomposition directory back into components plus its manifest.
pub fn read_decomposition<P: AsRef<Path>>(
    dir: P,
) -> Result<(Vec<Component>, DecompositionManifest)> {
    let dir = dir.as_ref();
    let manifest: DecompositionManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let grid = read_grid(dir.join("grid.csv"))?;
    let mut components = Vec::with_capacity(manifest.lambdas.len());
    for (idx, &lambda) in manifest.lambdas.iter().enumerate() {
        let a = read_vector_csv(component_path(dir, idx, "a"))?;
        let b = read_vector_csv(component_path(dir, idx, "b"))?;
        let beta = read_vector_csv(component_path(dir, idx, "beta"))?;
        let xi = RkhsFunction::new(grid.clone(), beta, KernelSpec::bernoulli())?;
        components.push(Component { lambda, a, b, xi });
    }
    Ok((components, manifest))
}

// ---------------------------------------------------------------------------
// Ground truth

#[derive(Serialize, Deserialize)]
struct TruthComponentJson {
    lambda: f64,
    a: Vec<f64>,
    b: Vec<f64>,
    xi_coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TruthJson {
    p1: usize,
    p2: usize,
    n_basis: usize,
    components: Vec<TruthComponentJson>,
    remainder_coeffs: Vec<Vec<f64>>,
}

pub fn write_truth_json<P: AsRef<Path>>(path: P, truth: &GroundTruth) -> Result<()> {
    let doc = TruthJson {
        p1: truth.p1,
        p2: truth.p2,
        n_basis: truth.n_basis,
        components: truth
            .components
            .iter()
            .map(|c| TruthComponentJson {
                lambda: c.lambda,
                a: c.a.iter().copied().collect(),
                b: c.b.iter().copied().collect(),
                xi_coeffs: c.xi_coeffs.clone(),
            })
            .collect(),
        remainder_coeffs: truth.remainder_coeffs.clone(),
    };
    fs::write(path.as_ref(), serde_json::to_string(&doc)?)?;
    Ok(())
}

pub fn read_truth_json<P: AsRef<Path>>(path: P) -> Result<GroundTruth> {
    let doc: TruthJson = serde_json::from_str(&fs::read_to_string(path.as_ref())?)?;
    Ok(GroundTruth {
        p1: doc.p1,
        p2: doc.p2,
        n_basis: doc.n_basis,
        components: doc
            .components
            .into_iter()
            .map(|c| TruthComponent {
                lambda: c.lambda,
                a: DVector::from_vec(c.a),
                b: DVector::from_vec(c.b),
                xi_coeffs: c.xi_coeffs,
            })
            .collect(),
        remainder_coeffs: doc.remainder_coeffs,
    })
}

// ---------------------------------------------------------------------------
// Reports

pub fn write_eval_report_json<P: AsRef<Path>>(path: P, report: &EvalReport) -> Result<()> {
    fs::write(path.as_ref(), serde_json::to_string_pretty(report)?)?;
    Ok(())
}

pub fn read_eval_report_json<P: AsRef<Path>>(path: P) -> Result<EvalReport> {
    Ok(serde_json::from_str(&fs::read_to_string(path.as_ref())?)?)
}

/// Writes the `r,bic` sweep; a perfect-fit rank has an empty BIC field.
pub fn write_bic_csv<P: AsRef<Path>>(path: P, selection: &RankSelection) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["r", "bic"])?;
    for (r, bic) in &selection.bic {
        w.write_record([r.to_string(), bic.map(fmt_f64).unwrap_or_default()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_selection_json<P: AsRef<Path>>(path: P, selection: &RankSelection) -> Result<()> {
    fs::write(path.as_ref(), serde_json::to_string_pretty(selection)?)?;
    Ok(())
}

pub fn write_bands_csv<P: AsRef<Path>>(path: P, bands: &[TrajectoryBand]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["time_index", "group", "mean", "low", "high"])?;
    for band in bands {
        w.write_record([
            band.time_index.to_string(),
            band.group.clone(),
            fmt_f64(band.mean),
            fmt_f64(band.low),
            fmt_f64(band.high),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `i,group` labels, one per mode-1 unit, returned in index order.
pub fn read_labels_csv<P: AsRef<Path>>(path: P) -> Result<Vec<String>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let mut rows: Vec<(usize, String)> = Vec::new();
    for (idx, record) in r.records().enumerate() {
        let line = idx + 2;
        let record = record?;
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 2 fields, got {}", record.len()),
            });
        }
        let i = parse_index(&record[0], line, "i")?;
        rows.push((i, record[1].to_string()));
    }
    rows.sort_by_key(|(i, _)| *i);
    for (pos, (i, _)) in rows.iter().enumerate() {
        if *i != pos + 1 {
            return Err(Error::Data(format!(
                "labels must cover 1..=p1 exactly once; index {i} is out of place"
            )));
        }
    }
    Ok(rows.into_iter().map(|(_, g)| g).collect())
}

/// Convenience writer used by tests and the CLI for plain text files.
pub fn write_text<P: AsRef<Path>>(path: P, content: &str) -> Result<()> {
    let mut f = fs::File::create(path.as_ref())?;
    f.write_all(content.as_bytes())?;
    Ok(())
}
