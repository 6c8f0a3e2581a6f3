//! Monotone piecewise-linear link functions, their generalized inverses, and
//! the matching / proper losses they induce.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{cast, Error, Result, Scalar};

/// Monotone link `sigma: [-LR, LR] -> [0, 1]` stored as sorted breakpoints
/// with linear interpolation between them.
///
/// Invariants established at construction: breakpoint abscissae strictly
/// increase from `-LR` to `LR`, ordinates are non-decreasing in `[0, 1]`, and
/// every segment slope lies in `[0, beta + 1e-9]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearLink<F> {
    points: Vec<(F, F)>,
    lr: F,
    beta: F,
    /// cumulative integral of sigma from the left endpoint to each breakpoint
    cum: Vec<F>,
    /// integral of sigma from the left endpoint to 0
    cum_zero: F,
}

const SLOPE_TOL: f64 = 1e-9;

impl<F: Scalar> PiecewiseLinearLink<F> {
    /// Builds a link from breakpoints, validating all invariants.
    pub fn new(breakpoints: Vec<(F, F)>, lr: F, beta: F) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::MalformedLink(format!(
                "need at least 2 breakpoints, got {}",
                breakpoints.len()
            )));
        }
        if !(lr > F::zero()) || !(beta > F::zero()) {
            return Err(Error::MalformedLink(
                "domain radius and Lipschitz bound must be positive".into(),
            ));
        }
        let mut pts = breakpoints;
        let snap = cast::<F>(1e-9) * lr.max(F::one());
        let first_t = pts.first().unwrap().0;
        let last_t = pts.last().unwrap().0;
        if (first_t + lr).abs() > snap || (last_t - lr).abs() > snap {
            return Err(Error::MalformedLink(format!(
                "breakpoints must span [-LR, LR]; got [{}, {}] for LR={}",
                first_t, last_t, lr
            )));
        }
        pts.first_mut().unwrap().0 = -lr;
        pts.last_mut().unwrap().0 = lr;

        let tol = cast::<F>(SLOPE_TOL);
        for i in 0..pts.len() {
            let (t, v) = pts[i];
            if !t.is_finite() || !v.is_finite() {
                return Err(Error::MalformedLink("non-finite breakpoint".into()));
            }
            if v < -tol || v > F::one() + tol {
                return Err(Error::MalformedLink(format!("value {} outside [0,1]", v)));
            }
            pts[i].1 = v.max(F::zero()).min(F::one());
            if i > 0 {
                let (tp, vp) = pts[i - 1];
                if t <= tp {
                    return Err(Error::MalformedLink(
                        "breakpoint abscissae must strictly increase".into(),
                    ));
                }
                let slope = (pts[i].1 - vp) / (t - tp);
                if slope < -tol {
                    return Err(Error::MalformedLink(format!(
                        "decreasing segment with slope {}",
                        slope
                    )));
                }
                if slope > beta + tol {
                    return Err(Error::MalformedLink(format!(
                        "segment slope {} exceeds Lipschitz bound {}",
                        slope, beta
                    )));
                }
                if pts[i].1 < vp {
                    pts[i].1 = vp;
                }
            }
        }

        let mut link = PiecewiseLinearLink {
            points: pts,
            lr,
            beta,
            cum: Vec::new(),
            cum_zero: F::zero(),
        };
        link.rebuild_integral();
        Ok(link)
    }

    fn rebuild_integral(&mut self) {
        let half = cast::<F>(0.5);
        let mut cum = Vec::with_capacity(self.points.len());
        cum.push(F::zero());
        for i in 1..self.points.len() {
            let (t0, v0) = self.points[i - 1];
            let (t1, v1) = self.points[i];
            let area = (t1 - t0) * (v0 + v1) * half;
            let prev = cum[i - 1];
            cum.push(prev + area);
        }
        self.cum = cum;
        self.cum_zero = self.integral_from_left(F::zero());
    }

    /// Integral of sigma from -LR to `t` (t assumed within the domain).
    fn integral_from_left(&self, t: F) -> F {
        let half = cast::<F>(0.5);
        let j = self.segment_of(t);
        let (t0, v0) = self.points[j];
        let vt = self.eval(t);
        self.cum[j] + (t - t0) * (v0 + vt) * half
    }

    /// Index of the segment `[t_j, t_{j+1}]` containing `t` (clamped).
    fn segment_of(&self, t: F) -> usize {
        let n = self.points.len();
        // first breakpoint with abscissa > t
        let hi = self.points.partition_point(|&(ti, _)| ti <= t);
        hi.clamp(1, n - 1) - 1
    }

    pub fn lr(&self) -> F {
        self.lr
    }

    pub fn beta(&self) -> F {
        self.beta
    }

    pub fn breakpoints(&self) -> &[(F, F)] {
        &self.points
    }

    /// Evaluates the link at `t`; inputs outside `[-LR, LR]` are clamped.
    pub fn eval(&self, t: F) -> F {
        let t = t.max(-self.lr).min(self.lr);
        let j = self.segment_of(t);
        let (t0, v0) = self.points[j];
        let (t1, v1) = self.points[j + 1];
        if t1 == t0 {
            return v0;
        }
        let w = (t - t0) / (t1 - t0);
        v0 + w * (v1 - v0)
    }

    /// Generalized inverse. On flat stretches of the link it returns the
    /// midpoint of the preimage interval; values outside the link's range
    /// clamp to the corresponding domain endpoint.
    pub fn invert(&self, v: F) -> F {
        let vs_first = self.points.first().unwrap().1;
        let vs_last = self.points.last().unwrap().1;
        let v = v.max(vs_first).min(vs_last);

        // first breakpoint value >= v
        let lo_idx = self.points.partition_point(|&(_, vi)| vi < v);
        let t_lo = if self.points[lo_idx].1 == v {
            self.points[lo_idx].0
        } else {
            let (t0, v0) = self.points[lo_idx - 1];
            let (t1, v1) = self.points[lo_idx];
            t0 + (v - v0) * (t1 - t0) / (v1 - v0)
        };

        // last breakpoint value <= v
        let hi_idx = self.points.partition_point(|&(_, vi)| vi <= v) - 1;
        let t_hi = if self.points[hi_idx].1 == v {
            self.points[hi_idx].0
        } else {
            let (t0, v0) = self.points[hi_idx];
            let (t1, v1) = self.points[hi_idx + 1];
            t0 + (v - v0) * (t1 - t0) / (v1 - v0)
        };

        (t_lo + t_hi) * cast::<F>(0.5)
    }

    /// Matching loss `int_0^t (sigma(tau) - y) dtau`, evaluated in closed
    /// form from the piecewise-quadratic antiderivative. `t` is clamped to
    /// the domain.
    pub fn matching_loss(&self, t: F, y: F) -> F {
        let t = t.max(-self.lr).min(self.lr);
        self.integral_from_left(t) - self.cum_zero - y * t
    }

    /// Proper loss: matching loss at the generalized inverse of `v`.
    pub fn proper_loss(&self, v: F, y: F) -> F {
        self.matching_loss(self.invert(v), y)
    }

    /// Anti-Lipschitz smoothing `sigma'(t) = (1-2*alpha*LR)*sigma(t) +
    /// alpha*(t+LR)`. Accepts `alpha = 0` as a pass-through.
    pub fn smooth(&self, alpha: F) -> Result<Self> {
        if alpha == F::zero() {
            return Ok(self.clone());
        }
        let two = cast::<F>(2.0);
        let limit = (two * self.lr).recip();
        if !(alpha > F::zero()) || alpha >= limit {
            return Err(Error::AlphaOutOfRange {
                alpha: alpha.to_f64().unwrap_or(f64::NAN),
                lr: self.lr.to_f64().unwrap_or(f64::NAN),
            });
        }
        let shrink = F::one() - two * alpha * self.lr;
        let pts = self
            .points
            .iter()
            .map(|&(t, v)| (t, shrink * v + alpha * (t + self.lr)))
            .collect();
        let new_beta = alpha + shrink * self.beta;
        PiecewiseLinearLink::new(pts, self.lr, new_beta)
    }

    /// Affine link `t -> (t + LR) / (2 LR)`.
    pub fn affine(lr: F) -> Self {
        let beta = (cast::<F>(2.0) * lr).recip();
        PiecewiseLinearLink::new(vec![(-lr, F::zero()), (lr, F::one())], lr, beta)
            .expect("affine link is valid")
    }

    /// Logistic link sampled on 512 uniform breakpoints.
    pub fn logistic(lr: F) -> Self {
        const NODES: usize = 512;
        let mut pts = Vec::with_capacity(NODES);
        for i in 0..NODES {
            let w = cast::<F>(i as f64 / (NODES - 1) as f64);
            let t = -lr + cast::<F>(2.0) * lr * w;
            let v = (F::one() + (-t).exp()).recip();
            pts.push((t, v));
        }
        PiecewiseLinearLink::new(pts, lr, cast::<F>(0.25)).expect("logistic link is valid")
    }

    /// Clipped-ReLU link `t -> clamp(t, 0, 1)`.
    pub fn clipped_relu(lr: F) -> Self {
        let one = F::one();
        let mut pts = vec![(-lr, F::zero())];
        if lr > F::zero() {
            pts.push((F::zero(), F::zero()));
        }
        if lr <= one {
            pts.push((lr, lr.min(one)));
        } else {
            pts.push((one, one));
            pts.push((lr, one));
        }
        PiecewiseLinearLink::new(pts, lr, one).expect("clipped relu link is valid")
    }

    /// Constant link `t -> v`.
    pub fn constant(lr: F, v: F) -> Self {
        PiecewiseLinearLink::new(vec![(-lr, v), (lr, v)], lr, F::one())
            .expect("constant link is valid")
    }
}

#[derive(Serialize, Deserialize)]
struct LinkRepr<F> {
    lr: F,
    beta: F,
    breakpoints: Vec<(F, F)>,
}

impl<F: Scalar + Serialize> Serialize for PiecewiseLinearLink<F> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        LinkRepr {
            lr: self.lr,
            beta: self.beta,
            breakpoints: self.points.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de, F: Scalar + Deserialize<'de>> Deserialize<'de> for PiecewiseLinearLink<F> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = LinkRepr::<F>::deserialize(deserializer)?;
        PiecewiseLinearLink::new(repr.breakpoints, repr.lr, repr.beta)
            .map_err(|e| D::Error::custom(e.to_string()))
    }
}
