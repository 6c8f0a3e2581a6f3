//! Pool-Adjacent-Violators isotonic regression and the step-function
//! predictors it produces.

use serde::{Deserialize, Serialize};

use crate::{cast, Error, Result, Scalar};

/// A single training point for one-dimensional isotonic regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPoint1D<F> {
    pub x: F,
    pub y: F,
    pub weight: F,
}

impl<F: Scalar> WeightedPoint1D<F> {
    pub fn new(x: F, y: F, weight: F) -> Self {
        WeightedPoint1D { x, y, weight }
    }

    pub fn unit(x: F, y: F) -> Self {
        WeightedPoint1D {
            x,
            y,
            weight: F::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Inc,
    Dec,
}

/// Piecewise-constant predictor: `values[k]` on the half-open interval
/// `[thresholds[k-1], thresholds[k])`, extended by its end values beyond the
/// training range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPredictor<F> {
    pub direction: Direction,
    pub thresholds: Vec<F>,
    pub values: Vec<F>,
}

impl<F: Scalar> StepPredictor<F> {
    pub fn new(direction: Direction, thresholds: Vec<F>, values: Vec<F>) -> Result<Self> {
        if values.is_empty() || values.len() != thresholds.len() + 1 {
            return Err(Error::LengthMismatch(format!(
                "step predictor needs thresholds+1 values, got {} thresholds and {} values",
                thresholds.len(),
                values.len()
            )));
        }
        for w in thresholds.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::MalformedInstance(
                    "step predictor thresholds must strictly increase".into(),
                ));
            }
        }
        let tol = cast::<F>(1e-12);
        for w in values.windows(2) {
            let monotone = match direction {
                Direction::Inc => w[1] >= w[0] - tol,
                Direction::Dec => w[1] <= w[0] + tol,
            };
            if !monotone {
                return Err(Error::MalformedInstance(
                    "step predictor values violate declared direction".into(),
                ));
            }
        }
        Ok(StepPredictor {
            direction,
            thresholds,
            values,
        })
    }

    pub fn eval(&self, x: F) -> F {
        let idx = self.thresholds.partition_point(|&t| t <= x);
        self.values[idx]
    }

    /// Distinct predicted values, in evaluation order.
    pub fn distinct_values(&self) -> Vec<F> {
        let mut out: Vec<F> = Vec::new();
        for &v in &self.values {
            if out.last() != Some(&v) {
                out.push(v);
            }
        }
        out
    }
}

/// Sorts points by `x` and merges exact ties into one weighted point with the
/// weighted-mean label.
fn merge_ties<F: Scalar>(points: &[WeightedPoint1D<F>]) -> Result<Vec<WeightedPoint1D<F>>> {
    if points.is_empty() {
        return Err(Error::EmptyInput("pav needs at least one point"));
    }
    let mut pts = points.to_vec();
    for p in &pts {
        if !(p.weight > F::zero()) {
            return Err(Error::MalformedInstance("point weight must be > 0".into()));
        }
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(Error::MalformedInstance("non-finite point".into()));
        }
    }
    pts.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
    let mut merged: Vec<WeightedPoint1D<F>> = Vec::with_capacity(pts.len());
    for p in pts {
        match merged.last_mut() {
            Some(last) if last.x == p.x => {
                let w = last.weight + p.weight;
                last.y = (last.y * last.weight + p.y * p.weight) / w;
                last.weight = w;
            }
            _ => merged.push(p),
        }
    }
    Ok(merged)
}

struct Block<F> {
    sum_wy: F,
    sum_w: F,
    /// index of first point in the block
    start: usize,
}

/// Runs the merge rule on tie-merged, sorted points and returns the final
/// block partition as `(start, value)` pairs.
fn fit_blocks<F: Scalar>(pts: &[WeightedPoint1D<F>]) -> Vec<(usize, F)> {
    let mut stack: Vec<Block<F>> = Vec::with_capacity(pts.len());
    for (i, p) in pts.iter().enumerate() {
        let mut block = Block {
            sum_wy: p.y * p.weight,
            sum_w: p.weight,
            start: i,
        };
        while let Some(top) = stack.last() {
            let top_mean = top.sum_wy / top.sum_w;
            let new_mean = block.sum_wy / block.sum_w;
            if top_mean <= new_mean {
                break;
            }
            let top = stack.pop().unwrap();
            block = Block {
                sum_wy: top.sum_wy + block.sum_wy,
                sum_w: top.sum_w + block.sum_w,
                start: top.start,
            };
            // merged mean sits between the two block means it replaced
            let merged = block.sum_wy / block.sum_w;
            debug_assert!(merged <= top_mean + cast::<F>(1e-12));
            debug_assert!(merged >= new_mean - cast::<F>(1e-12));
        }
        stack.push(block);
    }
    stack
        .into_iter()
        .map(|b| {
            let v = (b.sum_wy / b.sum_w).max(F::zero()).min(F::one());
            (b.start, v)
        })
        .collect()
}

/// Weighted least-squares isotonic fit via the pool-adjacent-violators merge
/// rule, implemented with a stack of `(sum_wy, sum_w)` blocks. Equal `x`
/// values are pre-merged; runs in O(n) after the sort.
pub fn pav_fit<F: Scalar>(points: &[WeightedPoint1D<F>]) -> Result<StepPredictor<F>> {
    let pts = merge_ties(points)?;
    let blocks = fit_blocks(&pts);
    let mut thresholds = Vec::with_capacity(blocks.len().saturating_sub(1));
    let mut values = Vec::with_capacity(blocks.len());
    for (k, &(start, v)) in blocks.iter().enumerate() {
        if k > 0 {
            thresholds.push(pts[start].x);
        }
        values.push(v);
    }
    StepPredictor::new(Direction::Inc, thresholds, values)
}

/// PAV run twice: ascending `x` (non-decreasing fit) and with the ordering of
/// `x` reversed (non-increasing fit over the original axis).
pub fn pav_double_fit<F: Scalar>(
    points: &[WeightedPoint1D<F>],
) -> Result<(StepPredictor<F>, StepPredictor<F>)> {
    let p_plus = pav_fit(points)?;

    let mirrored: Vec<WeightedPoint1D<F>> = points
        .iter()
        .map(|p| WeightedPoint1D::new(-p.x, p.y, p.weight))
        .collect();
    let pts = merge_ties(&mirrored)?;
    let blocks = fit_blocks(&pts);
    let s = blocks.len();
    // Map blocks back to the original axis (reverse order, negate). The
    // threshold between adjacent original-axis blocks is the smallest
    // original x of the right block, i.e. minus the largest mirrored x of
    // the corresponding block.
    let mut thresholds = Vec::with_capacity(s.saturating_sub(1));
    let mut values = Vec::with_capacity(s);
    for j in (0..s).rev() {
        values.push(blocks[j].1);
        if j > 0 {
            // largest mirrored x in block j-1 is the point just before
            // block j starts
            thresholds.push(-pts[blocks[j].0 - 1].x);
        }
    }
    let p_minus = StepPredictor::new(Direction::Dec, thresholds, values)?;
    Ok((p_plus, p_minus))
}

/// Maximum calibration deviation `max_v |E[y | p(x)=v] - v|` over the
/// predictor's distinct values on the given points.
pub fn pav_calibration_report<F: Scalar>(
    predictor: &StepPredictor<F>,
    points: &[WeightedPoint1D<F>],
) -> F {
    let mut buckets: Vec<(F, F, F)> = Vec::new(); // (value, sum_wy, sum_w)
    for p in points {
        let v = predictor.eval(p.x);
        match buckets.iter_mut().find(|b| b.0 == v) {
            Some(b) => {
                b.1 = b.1 + p.y * p.weight;
                b.2 = b.2 + p.weight;
            }
            None => buckets.push((v, p.y * p.weight, p.weight)),
        }
    }
    let mut worst = F::zero();
    for (v, swy, sw) in buckets {
        let dev = (swy / sw - v).abs();
        if dev > worst {
            worst = dev;
        }
    }
    worst
}
