//! File formats for tensor-backed models.
//!
//! * Matrices: Matrix Market coordinate format, real, with `general`,
//!   `symmetric`, or `skew-symmetric` storage as declared in the header.
//! * Polynomial tensors: plain text, one entry per line, 0-based indices,
//!   `i j k value` (quadratic) and `i j k l value` (cubic), `#` comments.
//! * Vectors: one value per line.
//! * A JSON manifest names the component files together with `n`, the spin
//!   speed, and the output DOFs.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::tensor::{build_tensor_model, CubicEntry, QuadEntry};
use crate::model::{OutputDof, SecondOrderModel};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelManifest {
    pub n: usize,
    pub spin_speed: f64,
    pub mass: String,
    #[serde(default)]
    pub damping: Option<String>,
    #[serde(default)]
    pub coriolis: Option<String>,
    pub stiffness: String,
    #[serde(default)]
    pub quadratic: Option<String>,
    #[serde(default)]
    pub cubic: Option<String>,
    #[serde(default)]
    pub load: Option<String>,
    #[serde(default)]
    pub centrifugal: Option<String>,
    #[serde(default)]
    pub output_dofs: Vec<OutputDof>,
}

fn load_err(path: &Path, line: Option<usize>, msg: impl Into<String>) -> Error {
    Error::Load {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MmSymmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

/// Read a Matrix Market coordinate file into a dense matrix.
pub fn read_matrix_market(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| load_err(path, None, e.to_string()))?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| load_err(path, Some(1), "empty file"))?;
    let header_lc = header.to_lowercase();
    if !header_lc.starts_with("%%matrixmarket") {
        return Err(load_err(path, Some(1), "missing %%MatrixMarket header"));
    }
    if !header_lc.contains("matrix")
        || !header_lc.contains("coordinate")
        || !header_lc.contains("real")
    {
        return Err(load_err(
            path,
            Some(1),
            format!("unsupported Matrix Market header: {header}"),
        ));
    }
    let symmetry = if header_lc.contains("skew-symmetric") {
        MmSymmetry::SkewSymmetric
    } else if header_lc.contains("symmetric") {
        MmSymmetry::Symmetric
    } else if header_lc.contains("general") {
        MmSymmetry::General
    } else {
        return Err(load_err(path, Some(1), "missing symmetry declaration"));
    };

    // Skip comments, read the size line.
    let mut size_line = None;
    for (idx, line) in lines.by_ref() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        size_line = Some((idx, t.to_string()));
        break;
    }
    let (size_idx, size_text) =
        size_line.ok_or_else(|| load_err(path, None, "missing size line"))?;
    let dims: Vec<usize> = size_text
        .split_whitespace()
        .map(|tok| tok.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| load_err(path, Some(size_idx + 1), format!("bad size line: {e}")))?;
    if dims.len() != 3 {
        return Err(load_err(
            path,
            Some(size_idx + 1),
            "size line must be `rows cols nnz`",
        ));
    }
    let (rows, cols, nnz) = (dims[0], dims[1], dims[2]);
    let mut m = DMatrix::zeros(rows, cols);
    let mut seen = 0usize;
    for (idx, line) in lines {
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = t.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(load_err(path, Some(idx + 1), "entry must be `i j value`"));
        }
        let i: usize = toks[0]
            .parse()
            .map_err(|e| load_err(path, Some(idx + 1), format!("bad row index: {e}")))?;
        let j: usize = toks[1]
            .parse()
            .map_err(|e| load_err(path, Some(idx + 1), format!("bad col index: {e}")))?;
        let v: f64 = toks[2]
            .parse()
            .map_err(|e| load_err(path, Some(idx + 1), format!("bad value: {e}")))?;
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(load_err(
                path,
                Some(idx + 1),
                format!("index ({i}, {j}) out of range for {rows}×{cols} (1-based)"),
            ));
        }
        let (i0, j0) = (i - 1, j - 1);
        m[(i0, j0)] += v;
        match symmetry {
            MmSymmetry::General => {}
            MmSymmetry::Symmetric => {
                if i0 != j0 {
                    m[(j0, i0)] += v;
                }
            }
            MmSymmetry::SkewSymmetric => {
                if i0 == j0 {
                    return Err(load_err(
                        path,
                        Some(idx + 1),
                        "skew-symmetric matrix cannot have diagonal entries",
                    ));
                }
                m[(j0, i0)] -= v;
            }
        }
        seen += 1;
    }
    if seen != nnz {
        return Err(load_err(
            path,
            None,
            format!("expected {nnz} entries, found {seen}"),
        ));
    }
    Ok(m)
}

/// Write a dense matrix in Matrix Market coordinate format.
pub fn write_matrix_market(path: &Path, m: &DMatrix<f64>, symmetry: &str) -> Result<()> {
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let keep = match symmetry {
                "symmetric" => i >= j,
                "skew-symmetric" => i > j,
                _ => true,
            };
            if keep && m[(i, j)] != 0.0 {
                entries.push((i + 1, j + 1, m[(i, j)]));
            }
        }
    }
    entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut out = String::new();
    out.push_str(&format!(
        "%%MatrixMarket matrix coordinate real {symmetry}\n"
    ));
    out.push_str(&format!("{} {} {}\n", m.nrows(), m.ncols(), entries.len()));
    for (i, j, v) in entries {
        out.push_str(&format!("{i} {j} {v:.17e}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a plain-text vector, one value per line.
pub fn read_vector(path: &Path, n: usize) -> Result<DVector<f64>> {
    let text = fs::read_to_string(path).map_err(|e| load_err(path, None, e.to_string()))?;
    let mut vals = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: f64 = t
            .parse()
            .map_err(|e| load_err(path, Some(idx + 1), format!("bad value: {e}")))?;
        vals.push(v);
    }
    if vals.len() != n {
        return Err(load_err(
            path,
            None,
            format!("expected {n} values, found {}", vals.len()),
        ));
    }
    Ok(DVector::from_vec(vals))
}

pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    let mut out = String::new();
    for x in v.iter() {
        out.push_str(&format!("{x:.17e}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

fn parse_indices_value(
    path: &Path,
    idx: usize,
    line: &str,
    count: usize,
) -> Result<(Vec<usize>, f64)> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() != count + 1 {
        return Err(load_err(
            path,
            Some(idx + 1),
            format!("expected {count} indices and a value"),
        ));
    }
    let mut ids = Vec::with_capacity(count);
    for tok in &toks[..count] {
        ids.push(
            tok.parse::<usize>()
                .map_err(|e| load_err(path, Some(idx + 1), format!("bad index `{tok}`: {e}")))?,
        );
    }
    let v: f64 = toks[count]
        .parse()
        .map_err(|e| load_err(path, Some(idx + 1), format!("bad value: {e}")))?;
    Ok((ids, v))
}

/// Read quadratic tensor entries (`i j k value`, 0-based).
pub fn read_quadratic(path: &Path, n: usize) -> Result<Vec<QuadEntry>> {
    let text = fs::read_to_string(path).map_err(|e| load_err(path, None, e.to_string()))?;
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (ids, v) = parse_indices_value(path, idx, t, 3)?;
        if ids.iter().any(|&x| x >= n) {
            return Err(load_err(
                path,
                Some(idx + 1),
                format!("index out of range (n = {n}): {t}"),
            ));
        }
        entries.push(QuadEntry {
            i: ids[0],
            j: ids[1],
            k: ids[2],
            value: v,
        });
    }
    Ok(entries)
}

/// Read cubic tensor entries (`i j k l value`, 0-based).
pub fn read_cubic(path: &Path, n: usize) -> Result<Vec<CubicEntry>> {
    let text = fs::read_to_string(path).map_err(|e| load_err(path, None, e.to_string()))?;
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (ids, v) = parse_indices_value(path, idx, t, 4)?;
        if ids.iter().any(|&x| x >= n) {
            return Err(load_err(
                path,
                Some(idx + 1),
                format!("index out of range (n = {n}): {t}"),
            ));
        }
        entries.push(CubicEntry {
            i: ids[0],
            j: ids[1],
            k: ids[2],
            l: ids[3],
            value: v,
        });
    }
    Ok(entries)
}

/// Load a tensor-backed model from a JSON manifest. Component paths are
/// resolved relative to the manifest location.
pub fn load_tensor_model(manifest_path: &Path) -> Result<SecondOrderModel> {
    let text = fs::read_to_string(manifest_path)
        .map_err(|e| load_err(manifest_path, None, e.to_string()))?;
    let manifest: ModelManifest = serde_json::from_str(&text)
        .map_err(|e| load_err(manifest_path, None, format!("bad manifest: {e}")))?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |rel: &str| -> PathBuf { base.join(rel) };
    let n = manifest.n;

    let mass = read_matrix_market(&resolve(&manifest.mass))?;
    let stiffness = read_matrix_market(&resolve(&manifest.stiffness))?;
    let damping = match &manifest.damping {
        Some(p) => read_matrix_market(&resolve(p))?,
        None => DMatrix::zeros(n, n),
    };
    let coriolis = match &manifest.coriolis {
        Some(p) => read_matrix_market(&resolve(p))?,
        None => DMatrix::zeros(n, n),
    };
    let quadratic = match &manifest.quadratic {
        Some(p) => read_quadratic(&resolve(p), n)?,
        None => Vec::new(),
    };
    let cubic = match &manifest.cubic {
        Some(p) => read_cubic(&resolve(p), n)?,
        None => Vec::new(),
    };
    let load = match &manifest.load {
        Some(p) => read_vector(&resolve(p), n)?,
        None => DVector::zeros(n),
    };
    let centrifugal = match &manifest.centrifugal {
        Some(p) => read_vector(&resolve(p), n)?,
        None => DVector::zeros(n),
    };

    // Skewness gate on G.
    let skew_viol = (&coriolis + coriolis.transpose()).norm();
    let g_norm = coriolis.norm();
    if g_norm > 0.0 && skew_viol / g_norm > 1e-12 {
        let gpath = manifest.coriolis.as_deref().unwrap_or("<none>");
        return Err(load_err(
            &resolve(gpath),
            None,
            format!(
                "Coriolis matrix is not skew-symmetric: ‖G+Gᵀ‖/‖G‖ = {:.3e}",
                skew_viol / g_norm
            ),
        ));
    }

    build_tensor_model(
        n,
        mass,
        damping,
        coriolis,
        manifest.spin_speed,
        stiffness,
        quadratic,
        cubic,
        load,
        centrifugal,
        manifest.output_dofs.clone(),
    )
}

/// Extract the polynomial tensors of any model by probing the black-box
/// force with basis-vector polarization, then write the manifest and all
/// component files into `dir`. `export_tensor_model` → [`load_tensor_model`]
/// reproduces the force up to extraction roundoff, closing the loop for
/// oracle round-trips.
pub fn export_tensor_model(model: &SecondOrderModel, dir: &Path) -> Result<PathBuf> {
    let n = model.n;
    if n > 200 {
        return Err(Error::InvalidSpec(format!(
            "tensor export probes O(n³) basis combinations; n = {n} exceeds the 200-DOF guard"
        )));
    }
    fs::create_dir_all(dir)?;

    let (stiffness, quadratic, cubic) = match &model.raw_tensors {
        Some(raw) => (
            raw.stiffness.clone(),
            raw.quadratic.clone(),
            raw.cubic.clone(),
        ),
        None => probe_tensors(model),
    };

    write_matrix_market(&dir.join("mass.mtx"), &model.mass, "symmetric")?;
    write_matrix_market(&dir.join("damping.mtx"), &model.damping, "general")?;
    write_matrix_market(&dir.join("coriolis.mtx"), &model.coriolis, "skew-symmetric")?;
    write_matrix_market(&dir.join("stiffness.mtx"), &stiffness, "general")?;
    write_vector(&dir.join("load.txt"), &model.load_pattern)?;
    write_vector(&dir.join("centrifugal.txt"), &model.centrifugal_load)?;

    let mut qtext = String::from("# i j k value\n");
    for e in &quadratic {
        qtext.push_str(&format!("{} {} {} {:.17e}\n", e.i, e.j, e.k, e.value));
    }
    fs::write(dir.join("quadratic.txt"), qtext)?;
    let mut ctext = String::from("# i j k l value\n");
    for e in &cubic {
        ctext.push_str(&format!(
            "{} {} {} {} {:.17e}\n",
            e.i, e.j, e.k, e.l, e.value
        ));
    }
    fs::write(dir.join("cubic.txt"), ctext)?;

    let manifest = ModelManifest {
        n,
        spin_speed: model.spin_speed,
        mass: "mass.mtx".into(),
        damping: Some("damping.mtx".into()),
        coriolis: Some("coriolis.mtx".into()),
        stiffness: "stiffness.mtx".into(),
        quadratic: Some("quadratic.txt".into()),
        cubic: Some("cubic.txt".into()),
        load: Some("load.txt".into()),
        centrifugal: Some("centrifugal.txt".into()),
        output_dofs: model.output_dofs.clone(),
    };
    let manifest_path = dir.join("model.json");
    let mut f = fs::File::create(&manifest_path)?;
    writeln!(f, "{}", serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest_path)
}

/// Basis-vector polarization of a degree-3 polynomial force into (K, Q, T),
/// with Q stored on j ≤ k and T on j ≤ k ≤ l (permutation multiplicity
/// folded into the value).
fn probe_tensors(model: &SecondOrderModel) -> (DMatrix<f64>, Vec<QuadEntry>, Vec<CubicEntry>) {
    let n = model.n;
    let force = model.internal.as_ref();
    let zeros = DVector::zeros(n);
    let stiffness = force
        .tangent(&zeros)
        .unwrap_or_else(|| crate::model::fd_jacobian(force, &zeros, 1e-7));

    // Probe step: the relative extraction noise scales like ε·‖K‖/(‖Q‖·h),
    // so probes larger than unit displacement sharpen the entries; values
    // rescale by h² / h³ afterwards (exact for polynomials).
    let h = 4.0;
    let unit = |j: usize| DVector::from_fn(n, |i, _| if i == j { h } else { 0.0 });
    let even = |x: &DVector<f64>| -> DVector<f64> {
        (force.eval(x) + force.eval(&(-x))) * (0.5 / (h * h))
    };
    let odd = |x: &DVector<f64>| -> DVector<f64> {
        ((force.eval(x) - force.eval(&(-x))) * 0.5 - &stiffness * x) / (h * h * h)
    };

    let mut quad_raw: Vec<QuadEntry> = Vec::new();
    let mut q_scale = 0.0_f64;
    let mut even_cache: Vec<DVector<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        even_cache.push(even(&unit(j)));
    }
    for j in 0..n {
        for k in j..n {
            let q_jk = if j == k {
                even_cache[j].clone()
            } else {
                (even(&(unit(j) + unit(k))) - &even_cache[j] - &even_cache[k]) * 0.5
            };
            let mult = if j == k { 1.0 } else { 2.0 };
            for i in 0..n {
                let v = q_jk[i] * mult;
                if v != 0.0 {
                    q_scale = q_scale.max(v.abs());
                    quad_raw.push(QuadEntry { i, j, k, value: v });
                }
            }
        }
    }

    let mut cubic_raw: Vec<CubicEntry> = Vec::new();
    let mut t_scale = 0.0_f64;
    let mut odd_cache: Vec<DVector<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        odd_cache.push(odd(&unit(j)));
    }
    for j in 0..n {
        for k in j..n {
            let odd_jk = if j == k {
                None
            } else {
                Some(odd(&(unit(j) + unit(k))))
            };
            for l in k..n {
                let t_jkl: DVector<f64> = if j == k && k == l {
                    odd_cache[j].clone()
                } else if j == k {
                    // T(a,a,b) = [T(a+b) − T(a−b) − 2 T(b)] / 6
                    (odd(&(unit(j) + unit(l))) - odd(&(unit(j) - unit(l))) - &odd_cache[l] * 2.0)
                        / 6.0
                } else if k == l {
                    // T(a,b,b) = [T(a+b) + T(a−b) − 2 T(a)] / 6
                    (odd(&(unit(j) + unit(k))) + odd(&(unit(j) - unit(k))) - &odd_cache[j] * 2.0)
                        / 6.0
                } else {
                    (odd(&(unit(j) + unit(k) + unit(l))) - odd_jk.as_ref().unwrap()
                        - odd(&(unit(j) + unit(l)))
                        - odd(&(unit(k) + unit(l)))
                        + &odd_cache[j]
                        + &odd_cache[k]
                        + &odd_cache[l])
                        / 6.0
                };
                let mult = if j == k && k == l {
                    1.0
                } else if j == k || k == l {
                    3.0
                } else {
                    6.0
                };
                for i in 0..n {
                    let v = t_jkl[i] * mult;
                    if v != 0.0 {
                        t_scale = t_scale.max(v.abs());
                        cubic_raw.push(CubicEntry {
                            i,
                            j,
                            k,
                            l,
                            value: v,
                        });
                    }
                }
            }
        }
    }

    let quadratic: Vec<QuadEntry> = quad_raw
        .into_iter()
        .filter(|e| e.value.abs() > 1e-12 * q_scale)
        .collect();
    let cubic: Vec<CubicEntry> = cubic_raw
        .into_iter()
        .filter(|e| e.value.abs() > 1e-12 * t_scale)
        .collect();
    (stiffness, quadratic, cubic)
}
