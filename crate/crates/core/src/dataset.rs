//! Multi-view dataset container, the directory-based on-disk format, column
//! normalization, and a seeded union-of-subspaces synthesizer.
//!
//! On disk a dataset is a directory holding `manifest.json`, one headerless
//! CSV per view (`d_i` rows × `n` columns, samples in columns), and an
//! optional `labels.csv` with one integer per line. Matrix entries are
//! rendered with shortest round-trip precision, so save → load reproduces
//! every value bit-exactly.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::prelude::*;
use ndarray_linalg::QR;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by dataset validation, I/O, and synthesis.
#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: invalid manifest")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{file}, line {line}: {message}")]
    Parse {
        file: PathBuf,
        line: usize,
        message: String,
    },
    #[error(
        "view file {file} is {got_rows} × {got_cols}, manifest declares {want_rows} × {want_cols}"
    )]
    ViewShape {
        file: PathBuf,
        want_rows: usize,
        want_cols: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("{file}, line {line}: label {value} outside 0..{k}")]
    LabelOutOfRange {
        file: PathBuf,
        line: usize,
        value: usize,
        k: usize,
    },
    #[error("manifest lists a labels file but no num_clusters")]
    MissingClusterCount,
    #[error("view {view} has a non-finite entry at ({row}, {col})")]
    NonFinite { view: usize, row: usize, col: usize },
    #[error("sample column {col} of view {view} is all zero")]
    ZeroColumn { view: usize, col: usize },
    #[error("cluster {cluster} is empty")]
    EmptyCluster { cluster: usize },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("infeasible synthesis spec: {0}")]
    Infeasible(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// `v` feature matrices (`d_i × n`, samples in columns) over the same `n`
/// samples, with optional ground-truth labels in `0..k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    name: String,
    views: Vec<Array2<f64>>,
    labels: Option<Vec<usize>>,
    k: Option<usize>,
}

impl MultiViewDataset {
    /// Validates and wraps the parts: consistent sample counts, at least as
    /// many samples as views, finite entries, labels in range with no empty
    /// cluster, and a cluster count not exceeding the sample count.
    pub fn new(
        name: impl Into<String>,
        views: Vec<Array2<f64>>,
        labels: Option<Vec<usize>>,
        k: Option<usize>,
    ) -> Result<Self, DatasetError> {
        if views.is_empty() {
            return Err(DatasetError::Invalid("dataset has no views".into()));
        }
        let n = views[0].ncols();
        if n == 0 {
            return Err(DatasetError::Invalid("dataset has no samples".into()));
        }
        for (i, x) in views.iter().enumerate() {
            if x.ncols() != n {
                return Err(DatasetError::Invalid(format!(
                    "view {i} has {} samples, view 0 has {n}",
                    x.ncols()
                )));
            }
            if x.nrows() == 0 {
                return Err(DatasetError::Invalid(format!("view {i} has no features")));
            }
            for ((row, col), &val) in x.indexed_iter() {
                if !val.is_finite() {
                    return Err(DatasetError::NonFinite { view: i, row, col });
                }
            }
        }
        if n < views.len() {
            return Err(DatasetError::Invalid(format!(
                "{n} samples over {} views is degenerate",
                views.len()
            )));
        }
        if let Some(k) = k {
            if k == 0 || k > n {
                return Err(DatasetError::Invalid(format!(
                    "cluster count {k} must be between 1 and the sample count {n}"
                )));
            }
        }
        if let Some(ref l) = labels {
            let k = k.ok_or(DatasetError::MissingClusterCount)?;
            if l.len() != n {
                return Err(DatasetError::Invalid(format!(
                    "{} labels for {n} samples",
                    l.len()
                )));
            }
            let mut seen = vec![false; k];
            for &label in l {
                if label >= k {
                    return Err(DatasetError::Invalid(format!(
                        "label {label} outside 0..{k}"
                    )));
                }
                seen[label] = true;
            }
            if let Some(cluster) = seen.iter().position(|s| !s) {
                return Err(DatasetError::EmptyCluster { cluster });
            }
        }
        Ok(Self {
            name: name.into(),
            views,
            labels,
            k,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn views(&self) -> &[Array2<f64>] {
        &self.views
    }

    pub fn view(&self, i: usize) -> &Array2<f64> {
        &self.views[i]
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn num_samples(&self) -> usize {
        self.views[0].ncols()
    }

    /// Per-view feature dimensions.
    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(|x| x.nrows()).collect()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn num_clusters(&self) -> Option<usize> {
        self.k
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    name: String,
    num_views: usize,
    num_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    num_clusters: Option<usize>,
    views: Vec<ManifestView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct ManifestView {
    file: String,
    dim: usize,
}

/// Writes a matrix as headerless CSV, one row per line, entries rendered
/// with shortest round-trip precision.
pub fn write_matrix_csv<W: Write>(mut out: W, m: &Array2<f64>) -> io::Result<()> {
    let mut line = String::new();
    for row in m.rows() {
        line.clear();
        for (j, x) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format!("{x}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn read_matrix_csv(
    path: &Path,
    want_rows: usize,
    want_cols: usize,
) -> Result<Array2<f64>, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut values = Vec::with_capacity(want_rows * want_cols);
    let mut rows = 0;
    for (idx, line) in text.lines().enumerate() {
        let mut cols = 0;
        for field in line.split(',') {
            let value: f64 = field.trim().parse().map_err(|_| DatasetError::Parse {
                file: path.to_path_buf(),
                line: idx + 1,
                message: format!("not a number: {:?}", field.trim()),
            })?;
            values.push(value);
            cols += 1;
        }
        if cols != want_cols {
            return Err(DatasetError::ViewShape {
                file: path.to_path_buf(),
                want_rows,
                want_cols,
                got_rows: idx + 1,
                got_cols: cols,
            });
        }
        rows += 1;
    }
    if rows != want_rows {
        return Err(DatasetError::ViewShape {
            file: path.to_path_buf(),
            want_rows,
            want_cols,
            got_rows: rows,
            got_cols: want_cols,
        });
    }
    Ok(Array2::from_shape_vec((want_rows, want_cols), values).expect("shape checked above"))
}

/// Saves the dataset as a directory: `manifest.json`, `view_<i>.csv` per
/// view, and `labels.csv` when ground truth is present.
pub fn save(dataset: &MultiViewDataset, dir: &Path) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut views = Vec::with_capacity(dataset.num_views());
    for (i, x) in dataset.views().iter().enumerate() {
        let file = format!("view_{i}.csv");
        let path = dir.join(&file);
        let out = fs::File::create(&path).map_err(io_err(&path))?;
        let mut out = BufWriter::new(out);
        write_matrix_csv(&mut out, x).map_err(io_err(&path))?;
        out.flush().map_err(io_err(&path))?;
        views.push(ManifestView {
            file,
            dim: x.nrows(),
        });
    }
    let labels_file = if let Some(labels) = dataset.labels() {
        let file = "labels.csv".to_string();
        let path = dir.join(&file);
        let out = fs::File::create(&path).map_err(io_err(&path))?;
        let mut out = BufWriter::new(out);
        for l in labels {
            writeln!(out, "{l}").map_err(io_err(&path))?;
        }
        out.flush().map_err(io_err(&path))?;
        Some(file)
    } else {
        None
    };
    let manifest = Manifest {
        name: dataset.name().to_string(),
        num_views: dataset.num_views(),
        num_samples: dataset.num_samples(),
        num_clusters: dataset.num_clusters(),
        views,
        labels: labels_file,
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(io_err(&path))
}

/// Loads a dataset directory, validating every file against the manifest.
pub fn load(dir: &Path) -> Result<MultiViewDataset, DatasetError> {
    let manifest_path = dir.join("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|source| DatasetError::Manifest {
            path: manifest_path.clone(),
            source,
        })?;
    if manifest.views.len() != manifest.num_views {
        return Err(DatasetError::Invalid(format!(
            "manifest declares {} views but lists {}",
            manifest.num_views,
            manifest.views.len()
        )));
    }
    let mut views = Vec::with_capacity(manifest.views.len());
    for entry in &manifest.views {
        let path = dir.join(&entry.file);
        views.push(read_matrix_csv(&path, entry.dim, manifest.num_samples)?);
    }
    let labels = match &manifest.labels {
        Some(file) => {
            let k = manifest
                .num_clusters
                .ok_or(DatasetError::MissingClusterCount)?;
            let path = dir.join(file);
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let mut labels = Vec::new();
            for (idx, line) in text.lines().enumerate() {
                let value: usize = line.trim().parse().map_err(|_| DatasetError::Parse {
                    file: path.clone(),
                    line: idx + 1,
                    message: format!("not a label: {:?}", line.trim()),
                })?;
                if value >= k {
                    return Err(DatasetError::LabelOutOfRange {
                        file: path.clone(),
                        line: idx + 1,
                        value,
                        k,
                    });
                }
                labels.push(value);
            }
            Some(labels)
        }
        None => None,
    };
    MultiViewDataset::new(manifest.name, views, labels, manifest.num_clusters)
}

/// Scales every sample column of every view to unit l2 norm.
pub fn normalize(dataset: &MultiViewDataset) -> Result<MultiViewDataset, DatasetError> {
    let mut views = dataset.views().to_vec();
    for (i, x) in views.iter_mut().enumerate() {
        for (col, mut column) in x.columns_mut().into_iter().enumerate() {
            let norm = column.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(DatasetError::ZeroColumn { view: i, col });
            }
            column.mapv_inplace(|v| v / norm);
        }
    }
    MultiViewDataset::new(
        dataset.name().to_string(),
        views,
        dataset.labels().map(<[usize]>::to_vec),
        dataset.num_clusters(),
    )
}

/// Synthesis parameters for a union-of-independent-subspaces dataset.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub views: usize,
    pub n: usize,
    pub k: usize,
    /// Dimension of each cluster's subspace.
    pub r: usize,
    /// Ambient feature dimension of each view.
    pub dims: Vec<usize>,
    /// Standard deviation of the additive Gaussian noise.
    pub sigma: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.views == 0 {
            return Err(DatasetError::Infeasible("need at least one view".into()));
        }
        if self.dims.len() != self.views {
            return Err(DatasetError::Infeasible(format!(
                "{} dims for {} views",
                self.dims.len(),
                self.views
            )));
        }
        if self.k == 0 || self.r == 0 {
            return Err(DatasetError::Infeasible(
                "cluster count and subspace dimension must be positive".into(),
            ));
        }
        let min_dim = *self.dims.iter().min().expect("dims nonempty");
        if self.r > min_dim {
            return Err(DatasetError::Infeasible(format!(
                "subspace dimension {} exceeds the smallest view dimension {min_dim}",
                self.r
            )));
        }
        if self.k * self.r > min_dim {
            return Err(DatasetError::Infeasible(format!(
                "{} clusters × dimension {} exceed the smallest view dimension \
                 {min_dim}; subspaces cannot be independent",
                self.k, self.r
            )));
        }
        if self.n < self.k * (self.r + 1) {
            return Err(DatasetError::Infeasible(format!(
                "{} samples cannot cover {} clusters with {} + 1 samples each",
                self.n, self.k, self.r
            )));
        }
        if self.n < self.views {
            return Err(DatasetError::Infeasible(format!(
                "{} samples over {} views is degenerate",
                self.n, self.views
            )));
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(DatasetError::Infeasible(format!(
                "noise level {} must be finite and nonnegative",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// RNG for one named stream of the synthesis seed. Streams partition the
/// generator so draws in one stream never shift another: stream 0 shuffles
/// labels, stream `1 + view·k + cluster` fills that basis, and stream
/// `1 + views·k + view` drives that view's coefficients and noise.
fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Generates a multi-view dataset whose samples live on a union of `k`
/// independent `r`-dimensional subspaces, drawn per view:
/// `x = B_{view,cluster}·a + sigma·eps` with orthonormal random bases and
/// standard normal `a`, `eps`. Labels are balanced, then shuffled. Noise is
/// drawn even at `sigma = 0` so datasets differing only in `sigma` share
/// their geometry.
pub fn synth(spec: &SynthSpec) -> Result<MultiViewDataset, DatasetError> {
    spec.validate()?;
    let mut labels: Vec<usize> = (0..spec.n).map(|j| j % spec.k).collect();
    labels.shuffle(&mut stream(spec.seed, 0));

    let views: Vec<Array2<f64>> = (0..spec.views)
        .map(|i| {
            let d = spec.dims[i];
            let bases: Vec<Array2<f64>> = (0..spec.k)
                .map(|c| {
                    let mut rng = stream(spec.seed, 1 + (i * spec.k + c) as u64);
                    let g: Array2<f64> =
                        Array2::from_shape_fn((d, spec.r), |_| rng.sample(StandardNormal));
                    let (q, _) = g.qr().expect("QR of a tall random matrix");
                    q
                })
                .collect();
            let mut rng = stream(spec.seed, 1 + (spec.views * spec.k + i) as u64);
            let mut x = Array2::zeros((d, spec.n));
            for (j, &label) in labels.iter().enumerate() {
                let a: Array1<f64> = Array1::from_shape_fn(spec.r, |_| rng.sample(StandardNormal));
                let eps: Array1<f64> = Array1::from_shape_fn(d, |_| rng.sample(StandardNormal));
                let mut col = bases[label].dot(&a);
                col.scaled_add(spec.sigma, &eps);
                x.column_mut(j).assign(&col);
            }
            x
        })
        .collect();

    MultiViewDataset::new(
        format!(
            "synth-v{}-n{}-k{}-r{}-sigma{}-seed{}",
            spec.views, spec.n, spec.k, spec.r, spec.sigma, spec.seed
        ),
        views,
        Some(labels),
        Some(spec.k),
    )
}
