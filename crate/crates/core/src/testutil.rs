//! Shared helpers for unit tests.

use crate::links::PiecewiseLinearLink;
use crate::rng::Rng;

/// Random monotone piecewise-linear link with slopes in `[min_slope, beta]`.
pub(crate) fn random_link(
    rng: &mut Rng,
    lr: f64,
    beta: f64,
    min_slope: f64,
) -> PiecewiseLinearLink<f64> {
    let nseg = 1 + rng.below(8);
    let mut ts = vec![-lr, lr];
    for _ in 0..nseg - 1 {
        ts.push(rng.uniform(-lr * 0.98, lr * 0.98));
    }
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup_by(|a, b| (*a - *b).abs() < 1e-6 * lr);
    let mut vals = vec![0.0];
    for w in ts.windows(2) {
        let slope = rng.uniform(min_slope, beta);
        vals.push(vals.last().unwrap() + slope * (w[1] - w[0]));
    }
    let span = *vals.last().unwrap();
    if span > 1.0 {
        for v in vals.iter_mut() {
            *v /= span;
        }
    }
    let room = 1.0 - vals.last().unwrap();
    let v0 = rng.uniform(0.0, room.max(0.0));
    let pts: Vec<(f64, f64)> = ts.iter().zip(&vals).map(|(&t, &v)| (t, v + v0)).collect();
    PiecewiseLinearLink::new(pts, lr, beta).unwrap()
}
