//! Omnigap estimation, comparator grids, and the certification layer that
//! turns trained predictors into measured omniprediction guarantees.

use crate::data::Dataset;
use crate::learners::MultiIndexModel;
use crate::links::PiecewiseLinearLink;
use crate::pav::StepPredictor;
use crate::rng::Rng;
use crate::{Error, Link, Result};

/// Finite family of comparator pairs `(sigma, w)` standing in for the
/// infinite test family.
#[derive(Debug, Clone)]
pub struct ComparatorGrid {
    pub links: Vec<Link>,
    pub weights: Vec<Vec<f64>>,
}

impl ComparatorGrid {
    pub fn pair_count(&self) -> usize {
        self.links.len() * self.weights.len()
    }
}

/// Pointwise predictors the evaluator can certify.
#[derive(Debug, Clone)]
pub enum PointPredictor {
    /// one-dimensional step function (uses the first coordinate)
    Step(StepPredictor<f64>),
    /// single-index head
    Head {
        link: Link,
        w: Vec<f64>,
    },
    Constant(f64),
}

impl PointPredictor {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            PointPredictor::Step(s) => s.eval(x[0]),
            PointPredictor::Head { link, w } => {
                link.eval(w.iter().zip(x).map(|(wi, xi)| wi * xi).sum())
            }
            PointPredictor::Constant(c) => *c,
        }
    }
}

/// Sample mean of `(p_i - y_i)(u_i - wx_i)` where `u_i = sigma^{-1}(p_i)`
/// is precomputed by the caller.
pub fn empirical_omnigap(
    pred_values: &[f64],
    unlink_values: &[f64],
    wx_values: &[f64],
    labels: &[f64],
) -> Result<f64> {
    let n = pred_values.len();
    if unlink_values.len() != n || wx_values.len() != n || labels.len() != n || n == 0 {
        return Err(Error::LengthMismatch(format!(
            "omnigap inputs must share a nonzero length, got {}/{}/{}/{}",
            n,
            unlink_values.len(),
            wx_values.len(),
            labels.len()
        )));
    }
    let mut acc = 0.0;
    for i in 0..n {
        acc += (pred_values[i] - labels[i]) * (unlink_values[i] - wx_values[i]);
    }
    Ok(acc / n as f64)
}

/// Exhaustive maximum of the empirical omnigap over the grid; ties break to
/// the first `(link, weight)` index pair.
pub fn max_omnigap(
    predictor: &PointPredictor,
    grid: &ComparatorGrid,
    data: &Dataset,
) -> Result<(f64, (usize, usize))> {
    if grid.links.is_empty() || grid.weights.is_empty() {
        return Err(Error::EmptyInput("comparator grid is empty"));
    }
    let n = data.len();
    let preds: Vec<f64> = (0..n).map(|i| predictor.predict(data.row(i))).collect();
    let wx: Vec<Vec<f64>> = grid
        .weights
        .iter()
        .map(|w| {
            (0..n)
                .map(|i| w.iter().zip(data.row(i)).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    let mut best = f64::NEG_INFINITY;
    let mut arg = (0, 0);
    for (k, link) in grid.links.iter().enumerate() {
        let unlink: Vec<f64> = preds.iter().map(|&p| link.invert(p)).collect();
        for (j, wxj) in wx.iter().enumerate() {
            let og = empirical_omnigap(&preds, &unlink, wxj, data.labels())?;
            if og > best {
                best = og;
                arg = (k, j);
            }
        }
    }
    Ok((best, arg))
}

/// `E_n[pl_sigma(p(x), y)] - E_n[ml_sigma(w . x, y)]`: the measured
/// omniprediction deficit of `predictor` against the comparator `(sigma, w)`.
pub fn omniprediction_gap(
    predictor: &PointPredictor,
    link: &Link,
    w: &[f64],
    data: &Dataset,
) -> f64 {
    let n = data.len() as f64;
    let mut pl = 0.0;
    let mut ml = 0.0;
    for i in 0..data.len() {
        let x = data.row(i);
        let y = data.label(i);
        pl += link.proper_loss(predictor.predict(x), y);
        let wx: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
        ml += link.matching_loss(wx, y);
    }
    (pl - ml) / n
}

/// Same deficit for a multi-index model evaluated through its loss-specific
/// unlinking action.
pub fn omniprediction_gap_model(
    model: &MultiIndexModel,
    link: &Link,
    w: &[f64],
    data: &Dataset,
) -> f64 {
    let n = data.len() as f64;
    let mut played = 0.0;
    let mut ml = 0.0;
    for i in 0..data.len() {
        let x = data.row(i);
        let y = data.label(i);
        played += link.matching_loss(model.predict_unlinked(x, link), y);
        let wx: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
        ml += link.matching_loss(wx, y);
    }
    (played - ml) / n
}

/// Average per-head empirical omnigap of a multi-index model against one
/// comparator pair; the quantity the training regret bounds control.
pub fn mean_head_omnigap(
    model: &MultiIndexModel,
    link: &Link,
    w: &[f64],
    data: &Dataset,
) -> Result<f64> {
    let n = data.len();
    let wx: Vec<f64> = (0..n)
        .map(|i| w.iter().zip(data.row(i)).map(|(a, b)| a * b).sum())
        .collect();
    let mut acc = 0.0;
    for (head_link, head_w) in model.heads() {
        let preds: Vec<f64> = (0..n)
            .map(|i| head_link.eval(head_w.iter().zip(data.row(i)).map(|(a, b)| a * b).sum()))
            .collect();
        let unlink: Vec<f64> = preds.iter().map(|&p| link.invert(p)).collect();
        acc += empirical_omnigap(&preds, &unlink, &wx, data.labels())?;
    }
    Ok(acc / model.head_count() as f64)
}

/// One grid entry of a certification sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub link_id: usize,
    pub weight_id: usize,
    pub omnigap: f64,
    pub pl_gap: f64,
}

/// Largest `pl_gap` row, ties broken by grid order.
pub fn sweep_max(rows: &[SweepRow]) -> Option<&SweepRow> {
    rows.iter()
        .reduce(|best, r| if r.pl_gap > best.pl_gap { r } else { best })
}

/// Full grid sweep for a multi-index model. Per pair, `omnigap` is the
/// average per-head empirical omnigap (the quantity the training regret
/// controls) and `pl_gap` is the measured omniprediction deficit of the
/// unlinked action. Head statistics are factored so the cost is
/// O(K n T + K J n) rather than O(K J n T).
pub fn sweep_model(
    model: &MultiIndexModel,
    grid: &ComparatorGrid,
    data: &Dataset,
) -> Result<Vec<SweepRow>> {
    if grid.links.is_empty() || grid.weights.is_empty() {
        return Err(Error::EmptyInput("comparator grid is empty"));
    }
    let n = data.len();
    let nf = n as f64;
    let t = model.head_count() as f64;
    let d = data.dim();

    // head outputs and residual-feature correlation (link-independent)
    let mut head_preds: Vec<Vec<f64>> = Vec::with_capacity(model.head_count());
    let mut resid_corr = vec![0.0; d];
    for (link, w) in model.heads() {
        let preds: Vec<f64> = (0..n)
            .map(|i| link.eval(w.iter().zip(data.row(i)).map(|(a, b)| a * b).sum()))
            .collect();
        for (i, &p) in preds.iter().enumerate() {
            let r = p - data.label(i);
            for (acc, xj) in resid_corr.iter_mut().zip(data.row(i)) {
                *acc += r * xj;
            }
        }
        head_preds.push(preds);
    }
    for acc in resid_corr.iter_mut() {
        *acc /= nf * t;
    }

    let wx: Vec<Vec<f64>> = grid
        .weights
        .iter()
        .map(|w| {
            (0..n)
                .map(|i| w.iter().zip(data.row(i)).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();

    let mut rows = Vec::with_capacity(grid.links.len() * grid.weights.len());
    for (k, link) in grid.links.iter().enumerate() {
        // per-link statistics: calibration part of the omnigap and the
        // played matching loss of the averaged action
        let mut calib = 0.0;
        let mut played = 0.0;
        for (i, &y) in data.labels().iter().enumerate() {
            let mut unlink_sum = 0.0;
            for preds in &head_preds {
                let u = link.invert(preds[i]);
                unlink_sum += u;
                calib += (preds[i] - y) * u;
            }
            played += link.matching_loss(unlink_sum / t, y);
        }
        calib /= nf * t;
        played /= nf;

        for (j, (w, wxj)) in grid.weights.iter().zip(&wx).enumerate() {
            let cross: f64 = resid_corr.iter().zip(w).map(|(a, b)| a * b).sum();
            let omnigap = calib - cross;
            let comp: f64 = (0..n)
                .map(|i| link.matching_loss(wxj[i], data.label(i)))
                .sum::<f64>()
                / nf;
            rows.push(SweepRow {
                link_id: k,
                weight_id: j,
                omnigap,
                pl_gap: played - comp,
            });
        }
    }
    Ok(rows)
}

/// Full grid sweep for a pointwise predictor: `omnigap` is the empirical
/// omnigap, `pl_gap` the proper-vs-matching loss deficit.
pub fn sweep_point(
    predictor: &PointPredictor,
    grid: &ComparatorGrid,
    data: &Dataset,
) -> Result<Vec<SweepRow>> {
    if grid.links.is_empty() || grid.weights.is_empty() {
        return Err(Error::EmptyInput("comparator grid is empty"));
    }
    let n = data.len();
    let nf = n as f64;
    let preds: Vec<f64> = (0..n).map(|i| predictor.predict(data.row(i))).collect();
    let mut resid_corr = vec![0.0; data.dim()];
    for (i, &p) in preds.iter().enumerate() {
        let r = p - data.label(i);
        for (acc, xj) in resid_corr.iter_mut().zip(data.row(i)) {
            *acc += r * xj;
        }
    }
    for acc in resid_corr.iter_mut() {
        *acc /= nf;
    }
    let wx: Vec<Vec<f64>> = grid
        .weights
        .iter()
        .map(|w| {
            (0..n)
                .map(|i| w.iter().zip(data.row(i)).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(grid.links.len() * grid.weights.len());
    for (k, link) in grid.links.iter().enumerate() {
        let mut calib = 0.0;
        let mut pl = 0.0;
        for (&p, &y) in preds.iter().zip(data.labels()) {
            let u = link.invert(p);
            calib += (p - y) * u;
            pl += link.matching_loss(u, y);
        }
        calib /= nf;
        pl /= nf;
        for (j, (w, wxj)) in grid.weights.iter().zip(&wx).enumerate() {
            let cross: f64 = resid_corr.iter().zip(w).map(|(a, b)| a * b).sum();
            let comp: f64 = (0..n)
                .map(|i| link.matching_loss(wxj[i], data.label(i)))
                .sum::<f64>()
                / nf;
            rows.push(SweepRow {
                link_id: k,
                weight_id: j,
                omnigap: calib - cross,
                pl_gap: pl - comp,
            });
        }
    }
    Ok(rows)
}

const DEFAULT_GRID_CAP: usize = 64;
const GRID_SEED: u64 = 0x9d1c_e5a7;

/// Monotone piecewise-linear links on the epsilon-grid: slopes 0 or `beta`
/// on intervals of width `eps/beta`, start values on multiples of `eps`.
/// Enumerates the full cover when it fits under the cap, otherwise samples
/// it with a fixed seed; the affine and logistic links are always included
/// when they satisfy the slope bound.
pub fn build_link_grid(beta: f64, lr: f64, resolution_eps: f64) -> Result<Vec<Link>> {
    build_link_grid_with(beta, lr, resolution_eps, DEFAULT_GRID_CAP, GRID_SEED)
}

pub fn build_link_grid_with(
    beta: f64,
    lr: f64,
    resolution_eps: f64,
    cap: usize,
    seed: u64,
) -> Result<Vec<Link>> {
    if !(resolution_eps > 0.0 && resolution_eps < 1.0) {
        return Err(Error::GridResolution(resolution_eps));
    }
    if !(beta > 0.0 && lr > 0.0) || cap == 0 {
        return Err(Error::InvalidConfig(
            "grid needs positive beta, lr, and cap".into(),
        ));
    }
    let eps = resolution_eps;
    let intervals = ((2.0 * beta * lr) / eps).ceil().max(1.0) as usize;
    let starts = (1.0 / eps).floor() as usize + 1;

    let mut grid: Vec<Link> = Vec::new();
    if 1.0 / (2.0 * lr) <= beta + 1e-12 {
        grid.push(PiecewiseLinearLink::affine(lr));
    }
    if 0.25 <= beta + 1e-12 {
        grid.push(PiecewiseLinearLink::logistic(lr));
    }

    let build = |v0: f64, bits: &[bool]| -> Option<Link> {
        let mut pts = vec![(-lr, v0.min(1.0))];
        let mut v = v0.min(1.0);
        for (k, &rise) in bits.iter().enumerate() {
            let t0 = -lr + (k as f64) * eps / beta;
            let t1 = (t0 + eps / beta).min(lr);
            if t1 <= t0 {
                break;
            }
            if rise {
                v = (v + beta * (t1 - t0)).min(1.0);
            }
            pts.push((t1, v));
        }
        if pts.last().unwrap().0 < lr {
            let last_v = pts.last().unwrap().1;
            pts.push((lr, last_v));
        }
        PiecewiseLinearLink::new(pts, lr, beta).ok()
    };

    let full_count = (starts as u128).saturating_mul(1u128 << intervals.min(100));
    if intervals <= 20 && full_count <= cap as u128 {
        for s in 0..starts {
            for pattern in 0..(1u64 << intervals) {
                let bits: Vec<bool> = (0..intervals).map(|k| pattern >> k & 1 == 1).collect();
                if let Some(link) = build(s as f64 * eps, &bits) {
                    grid.push(link);
                }
            }
        }
    } else {
        let mut rng = Rng::stream(seed, 7);
        while grid.len() < cap {
            let v0 = (rng.below(starts)) as f64 * eps;
            let bits: Vec<bool> = (0..intervals).map(|_| rng.below(2) == 1).collect();
            if let Some(link) = build(v0, &bits) {
                grid.push(link);
            }
        }
    }
    grid.truncate(cap.max(2));
    Ok(grid)
}

/// Comparator weights: a polar grid for `d <= 2`, seeded random directions
/// otherwise, each scaled over 8 radii; the zero vector is included.
pub fn build_weight_grid(d: usize, r: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    match d {
        1 => {
            dirs.push(vec![1.0]);
            dirs.push(vec![-1.0]);
        }
        2 => {
            for k in 0..64 {
                let th = std::f64::consts::TAU * k as f64 / 64.0;
                dirs.push(vec![th.cos(), th.sin()]);
            }
        }
        _ => {
            let mut rng = Rng::stream(seed, 8);
            for _ in 0..256 {
                dirs.push(rng.unit_vector(d));
            }
        }
    }
    let mut weights = vec![vec![0.0; d]];
    for dir in dirs {
        for k in 1..=8 {
            let scale = r * k as f64 / 8.0;
            weights.push(dir.iter().map(|x| x * scale).collect());
        }
    }
    weights
}

/// Measured values of the linear-predictor counterexample: the fixed
/// distribution has `x` uniform on `{0.3, 0.5}` with sigmoid conditional
/// means, `w* = 1`.
#[derive(Debug, Clone, Copy)]
pub struct CounterexampleReport {
    /// expected matching loss of the generating linear score
    pub ml_at_wstar: f64,
    /// minimum over the `w` grid of the linked predictor's proper loss
    pub min_pl_over_w: f64,
    pub gap: f64,
}

impl CounterexampleReport {
    pub fn passes(&self) -> bool {
        self.ml_at_wstar <= -0.02 && self.min_pl_over_w >= 0.01 && self.gap >= 0.03
    }
}

/// Evaluates the counterexample in closed form: matching loss
/// `ln(1 + e^t) - y t - ln 2`, proper loss `y ln(1/v) + (1-y) ln(1/(1-v))
/// - ln 2`, with a 10^4-point grid over the `w` for which both linked
/// predictions stay in `(0, 1)`.
pub fn counterexample_fixture() -> CounterexampleReport {
    let ln2 = std::f64::consts::LN_2;
    let sigmoid = |t: f64| 1.0 / (1.0 + (-t).exp());
    let xs: [f64; 2] = [0.3, 0.5];

    let ml_at_wstar = -ln2
        + xs.iter()
            .map(|&x| (1.0 + x.exp()).ln() - sigmoid(x) * x)
            .sum::<f64>()
            / 2.0;

    // linked predictions w*x must stay in (0,1): w in (0, 2)
    let grid_points = 10_000;
    let mut min_pl = f64::INFINITY;
    for k in 1..grid_points {
        let w = 2.0 * k as f64 / grid_points as f64;
        if xs.iter().any(|&x| w * x <= 0.0 || w * x >= 1.0) {
            continue;
        }
        let pl = -ln2
            + xs.iter()
                .map(|&x| {
                    let v = w * x;
                    let p = sigmoid(x);
                    p * (1.0 / v).ln() + (1.0 - p) * (1.0 / (1.0 - v)).ln()
                })
                .sum::<f64>()
                / 2.0;
        min_pl = min_pl.min(pl);
    }

    CounterexampleReport {
        ml_at_wstar,
        min_pl_over_w: min_pl,
        gap: min_pl - ml_at_wstar,
    }
}
