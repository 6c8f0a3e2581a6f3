//! Synthetic data generators and dataset file I/O.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::links::PiecewiseLinearLink;
use crate::rng::Rng;
use crate::{Error, Link, Result};

/// Feature matrix (row-major) with labels in `[0, 1]` and the feature-norm
/// radius `L` the rows are guaranteed to respect.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<f64>,
    n: usize,
    d: usize,
    radius_l: f64,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<f64>, d: usize, radius_l: f64) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyInput("dataset needs at least one row"));
        }
        if d == 0 || features.len() != labels.len() * d {
            return Err(Error::LengthMismatch(format!(
                "feature buffer {} does not match n*d = {}*{}",
                features.len(),
                labels.len(),
                d
            )));
        }
        let n = labels.len();
        let tol = 1e-9;
        for (i, &y) in labels.iter().enumerate() {
            if !(0.0..=1.0).contains(&y) {
                return Err(Error::MalformedInstance(format!(
                    "label {y} at row {i} outside [0,1]"
                )));
            }
        }
        for i in 0..n {
            let norm = features[i * d..(i + 1) * d]
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt();
            if norm > radius_l + tol {
                return Err(Error::MalformedInstance(format!(
                    "row {i} norm {norm} exceeds radius {radius_l}"
                )));
            }
        }
        Ok(Dataset {
            features,
            labels,
            n,
            d,
            radius_l,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn radius_l(&self) -> f64 {
        self.radius_l
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Rows `[at, len)` split off as a second dataset.
    pub fn split_at(&self, at: usize) -> Result<(Dataset, Dataset)> {
        if at == 0 || at >= self.n {
            return Err(Error::InvalidConfig(format!(
                "split point {at} outside (0, {})",
                self.n
            )));
        }
        let head = Dataset {
            features: self.features[..at * self.d].to_vec(),
            labels: self.labels[..at].to_vec(),
            n: at,
            d: self.d,
            radius_l: self.radius_l,
        };
        let tail = Dataset {
            features: self.features[at * self.d..].to_vec(),
            labels: self.labels[at..].to_vec(),
            n: self.n - at,
            d: self.d,
            radius_l: self.radius_l,
        };
        Ok((head, tail))
    }
}

/// How realizable generators produce labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    /// `y = sigma(w* . x)` exactly (valid since labels live in `[0, 1]`)
    Expected,
    /// `y ~ Bernoulli(sigma(w* . x))`
    Bernoulli,
}

/// Features uniform on the sphere of radius `l`; labels from the single-index
/// model `(link, w_star)`.
pub fn gen_realizable(
    d: usize,
    n: usize,
    link: &Link,
    w_star: &[f64],
    seed: u64,
    mode: LabelMode,
    l: f64,
) -> Result<Dataset> {
    if d == 0 || n == 0 {
        return Err(Error::InvalidConfig("need d >= 1 and n >= 1".into()));
    }
    if w_star.len() != d {
        return Err(Error::LengthMismatch(format!(
            "w_star has dim {}, expected {d}",
            w_star.len()
        )));
    }
    if !w_star.iter().all(|x| x.is_finite()) || !(l > 0.0) {
        return Err(Error::InvalidConfig("non-finite w_star or radius".into()));
    }
    let mut rng = Rng::stream(seed, 1);
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let dir = rng.unit_vector(d);
        let score: f64 = dir.iter().zip(w_star).map(|(x, w)| x * w * l).sum();
        for x in &dir {
            features.push(x * l);
        }
        let p = link.eval(score);
        let y = match mode {
            LabelMode::Expected => p,
            LabelMode::Bernoulli => {
                if rng.next_f64() < p {
                    1.0
                } else {
                    0.0
                }
            }
        };
        labels.push(y);
    }
    Dataset::new(features, labels, d, l)
}

/// Mixture generators with no realizability guarantee. Presets: `flip10`
/// (logistic SIM with labels flipped at rate 0.1), `xor2d` (sign of the
/// coordinate product, d = 2 only), `heavytail` (radius mass near the
/// origin with occasional boundary points).
pub fn gen_agnostic(d: usize, n: usize, seed: u64, preset: &str, l: f64) -> Result<Dataset> {
    match preset {
        "flip10" => gen_flip(d, n, seed, 0.1, l),
        "xor2d" => {
            if d != 2 {
                return Err(Error::InvalidConfig(format!(
                    "xor2d requires d = 2, got {d}"
                )));
            }
            let mut rng = Rng::stream(seed, 2);
            let mut features = Vec::with_capacity(n * 2);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let x = ball_point(&mut rng, 2, l);
                labels.push(if x[0] * x[1] > 0.0 { 1.0 } else { 0.0 });
                features.extend_from_slice(&x);
            }
            Dataset::new(features, labels, 2, l)
        }
        "heavytail" => {
            let mut rng = Rng::stream(seed, 3);
            let link = PiecewiseLinearLink::logistic(l);
            let w = rng.unit_vector(d);
            let mut features = Vec::with_capacity(n * d);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let dir = rng.unit_vector(d);
                let radius = if rng.below(10) == 0 {
                    l
                } else {
                    l * rng.next_f64().powi(4)
                };
                let x: Vec<f64> = dir.iter().map(|v| v * radius).collect();
                let score: f64 = x.iter().zip(&w).map(|(xi, wi)| xi * wi).sum();
                labels.push(link.eval(score));
                features.extend_from_slice(&x);
            }
            Dataset::new(features, labels, d, l)
        }
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

/// Logistic SIM with labels flipped (`y <- 1 - y`) at the given rate;
/// features uniform in the ball so one-dimensional runs have full support.
pub fn gen_flip(d: usize, n: usize, seed: u64, rate: f64, l: f64) -> Result<Dataset> {
    gen_flip_mode(d, n, seed, rate, l, LabelMode::Expected)
}

/// Flip generator with an explicit label mode: `Expected` stores the flipped
/// conditional mean, `Bernoulli` draws a coin from it.
pub fn gen_flip_mode(
    d: usize,
    n: usize,
    seed: u64,
    rate: f64,
    l: f64,
    mode: LabelMode,
) -> Result<Dataset> {
    if d == 0 || n == 0 || !(0.0..=1.0).contains(&rate) || !(l > 0.0) {
        return Err(Error::InvalidConfig("bad flip generator parameters".into()));
    }
    let mut rng = Rng::stream(seed, 4);
    let link = PiecewiseLinearLink::logistic(l);
    let w = rng.unit_vector(d);
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x = ball_point(&mut rng, d, l);
        let score: f64 = x.iter().zip(&w).map(|(xi, wi)| xi * wi).sum();
        let p = link.eval(score);
        let mean = if rate > 0.0 && rng.next_f64() < rate {
            1.0 - p
        } else {
            p
        };
        let y = match mode {
            LabelMode::Expected => mean,
            LabelMode::Bernoulli => {
                if rng.next_f64() < mean {
                    1.0
                } else {
                    0.0
                }
            }
        };
        labels.push(y);
        features.extend_from_slice(&x);
    }
    Dataset::new(features, labels, d, l)
}

fn ball_point(rng: &mut Rng, d: usize, l: f64) -> Vec<f64> {
    let dir = rng.unit_vector(d);
    let radius = l * rng.next_f64().powf(1.0 / d as f64);
    dir.into_iter().map(|v| v * radius).collect()
}

/// Sidecar metadata written next to dataset CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    #[serde(rename = "L")]
    pub l: f64,
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    pub generator: String,
}

/// Writes `x1,...,xd,y` rows; the shortest-round-trip float formatting keeps
/// the file lossless.
pub fn save_dataset_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for j in 1..=dataset.dim() {
        let _ = write!(out, "x{j},");
    }
    out.push_str("y\n");
    for i in 0..dataset.len() {
        for x in dataset.row(i) {
            let _ = write!(out, "{x},");
        }
        let _ = writeln!(out, "{}", dataset.label(i));
    }
    std::fs::write(path, out).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load_dataset_csv(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.last() != Some(&"y") || cols.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: format!("header must be x1,...,xd,y; got '{header}'"),
        });
    }
    let d = cols.len() - 1;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut max_norm_sq = 0.0f64;
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 1 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected {} fields, got {}", d + 1, fields.len()),
            });
        }
        let mut norm_sq = 0.0;
        for f in &fields[..d] {
            let x: f64 = f.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("bad float '{f}'"),
            })?;
            norm_sq += x * x;
            features.push(x);
        }
        max_norm_sq = max_norm_sq.max(norm_sq);
        let y: f64 = fields[d].parse().map_err(|_| Error::Parse {
            line: idx + 1,
            message: format!("bad label '{}'", fields[d]),
        })?;
        labels.push(y);
    }
    if labels.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no data rows".into(),
        });
    }
    Dataset::new(features, labels, d, max_norm_sq.sqrt())
}

pub fn save_meta(meta: &DatasetMeta, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(meta).expect("serializable");
    std::fs::write(path, json).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load_meta(path: &Path) -> Result<DatasetMeta> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: 0,
        message: e.to_string(),
    })
}
