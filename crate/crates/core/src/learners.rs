//! Alternating isotonic-regression / projected-gradient learners and the
//! multi-index models they produce.

use serde::{Deserialize, Serialize};

use crate::bir::{solve_bir, Instance};
use crate::data::Dataset;
use crate::links::PiecewiseLinearLink;
use crate::rng::Rng;
use crate::{Error, Link, Result};

/// Hyperparameters shared by the training loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// iteration count
    pub t: usize,
    /// step size
    pub eta: f64,
    /// Lipschitz bound for the learned links
    pub beta: f64,
    /// weight radius
    pub r: f64,
    /// anti-Lipschitz smoothing applied to stored head links (0 = off)
    pub alpha_smooth: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self, lr: f64) -> Result<()> {
        if !(self.eta > 0.0) || !(self.beta > 0.0) || !(self.r > 0.0) {
            return Err(Error::InvalidConfig(
                "eta, beta, and r must be positive".into(),
            ));
        }
        if self.alpha_smooth < 0.0 || (self.alpha_smooth > 0.0 && self.alpha_smooth >= 0.5 / lr) {
            return Err(Error::InvalidConfig(format!(
                "alpha_smooth {} outside [0, 1/(2*LR)) for LR={lr}",
                self.alpha_smooth
            )));
        }
        Ok(())
    }

    /// Step size `1/(beta L^2)` from the realizable-case analysis.
    pub fn eta_realizable(beta: f64, l: f64) -> f64 {
        1.0 / (beta * l * l)
    }

    /// Step size `R/(L sqrt(T))` from the averaged-regret analysis.
    pub fn eta_averaged(r: f64, l: f64, t: usize) -> f64 {
        r / (l * (t.max(1) as f64).sqrt())
    }

    /// Step size `sqrt(2/(5T)) R/L` for the stochastic-stream variant.
    pub fn eta_stochastic(r: f64, l: f64, t: usize) -> f64 {
        (2.0 / (5.0 * t.max(1) as f64)).sqrt() * r / l
    }
}

/// Euclidean projection onto the ball of radius `r`.
pub fn project_ball(w: &[f64], r: f64) -> Vec<f64> {
    let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= r || norm == 0.0 {
        w.to_vec()
    } else {
        let s = r / norm;
        w.iter().map(|x| x * s).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(1/n) sum_i (sigma(w . x_i) - y_i) x_i`.
pub fn empirical_gradient(link: &Link, w: &[f64], data: &Dataset) -> Vec<f64> {
    let n = data.len() as f64;
    let mut g = vec![0.0; data.dim()];
    for i in 0..data.len() {
        let x = data.row(i);
        let resid = link.eval(dot(w, x)) - data.label(i);
        for (gj, xj) in g.iter_mut().zip(x) {
            *gj += resid * xj;
        }
    }
    for gj in g.iter_mut() {
        *gj /= n;
    }
    g
}

/// Empirical squared loss of the SIM `(link, w)` on the dataset.
pub fn empirical_sq_loss(link: &Link, w: &[f64], data: &Dataset) -> f64 {
    let n = data.len() as f64;
    (0..data.len())
        .map(|i| {
            let p = link.eval(dot(w, data.row(i)));
            (p - data.label(i)) * (p - data.label(i))
        })
        .sum::<f64>()
        / n
}

/// Best-response link for `w`: sorts the scores `z_i = w . x_i`, solves the
/// Lipschitz-bounded isotonic regression `a = 0`, `b_i = beta (z_{i+1} -
/// z_i)` (ties collapse through the zero-width edges), and interpolates the
/// fitted values, extended flat to the domain boundary `+-lr`.
pub fn approx_bir_oracle(w: &[f64], data: &Dataset, beta: f64, lr: f64) -> Result<Link> {
    if data.is_empty() {
        return Err(Error::EmptyInput("oracle needs a nonempty dataset"));
    }
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let scores: Vec<f64> = (0..n).map(|i| dot(w, data.row(i))).collect();
    order.sort_by(|&i, &j| scores[i].partial_cmp(&scores[j]).unwrap());
    let z: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
    let y: Vec<f64> = order.iter().map(|&i| data.label(i)).collect();
    let a = vec![0.0; n - 1];
    let b: Vec<f64> = z.windows(2).map(|p| beta * (p[1] - p[0])).collect();
    let v = solve_bir(&Instance::new(y, a, b)?)?.v;

    // collapse score gaps below float slope resolution (exact ties included);
    // the fitted values inside a merged cluster differ by at most
    // beta * merge_eps
    let merge_eps = 2.5e-7 * lr.max(1.0);
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(n + 2);
    for k in 0..n {
        let zk = z[k].max(-lr).min(lr);
        match pts.last_mut() {
            Some(last) if zk - last.0 < merge_eps => last.1 = last.1.max(v[k]),
            _ => pts.push((zk, v[k])),
        }
    }
    // pin each segment onto the exact slope cap so construction-time
    // validation cannot trip on rounding
    for k in 1..pts.len() {
        let (z_prev, v_prev) = pts[k - 1];
        let cap = v_prev + beta * (pts[k].0 - z_prev);
        pts[k].1 = pts[k].1.max(v_prev).min(cap).min(1.0);
    }
    if pts.first().unwrap().0 > -lr {
        pts.insert(0, (-lr, pts.first().unwrap().1));
    }
    if pts.last().unwrap().0 < lr {
        pts.push((lr, pts.last().unwrap().1));
    }
    if pts.len() == 1 {
        let v0 = pts[0].1;
        pts = vec![(-lr, v0), (lr, v0)];
    }
    PiecewiseLinearLink::new(pts, lr, beta)
}

/// One entry of the training trace.
#[derive(Debug, Clone)]
pub struct IsotronStep {
    pub link: Link,
    pub w: Vec<f64>,
    pub sq_loss: f64,
    pub grad_norm: f64,
}

/// Full iterate trace; `steps[t]` holds `(sigma_t, w_t)` for `t = 0..=T`.
#[derive(Debug, Clone)]
pub struct IsotronTrace {
    pub steps: Vec<IsotronStep>,
    pub radius_l: f64,
    pub radius_r: f64,
}

/// Full-batch alternating minimization: the best-response link from the
/// isotonic oracle, then one projected gradient step on the matching loss.
pub fn isotron_fit(data: &Dataset, config: &TrainConfig) -> Result<IsotronTrace> {
    let l = data.radius_l();
    let lr = l * config.r;
    config.validate(lr)?;
    let mut w = vec![0.0; data.dim()];
    let mut steps = Vec::with_capacity(config.t + 1);
    for t in 0..=config.t {
        let mut link = approx_bir_oracle(&w, data, config.beta, lr)?;
        if config.alpha_smooth > 0.0 {
            link = link.smooth(config.alpha_smooth)?;
        }
        let sq_loss = empirical_sq_loss(&link, &w, data);
        let grad = empirical_gradient(&link, &w, data);
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        steps.push(IsotronStep {
            link,
            w: w.clone(),
            sq_loss,
            grad_norm,
        });
        if t < config.t {
            let stepped: Vec<f64> = w
                .iter()
                .zip(&grad)
                .map(|(wi, gi)| wi - config.eta * gi)
                .collect();
            w = project_ball(&stepped, config.r);
        }
    }
    Ok(IsotronTrace {
        steps,
        radius_l: l,
        radius_r: config.r,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Head {
    link: Link,
    w: Vec<f64>,
}

/// Aggregate of single-index heads; predictions unlink each head through the
/// test loss's link and average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiIndexModel {
    #[serde(rename = "L")]
    radius_l: f64,
    #[serde(rename = "R")]
    radius_r: f64,
    heads: Vec<Head>,
}

impl MultiIndexModel {
    pub fn head_count(&self) -> usize {
        self.heads.len()
    }

    pub fn radius_l(&self) -> f64 {
        self.radius_l
    }

    pub fn radius_r(&self) -> f64 {
        self.radius_r
    }

    pub fn heads(&self) -> impl Iterator<Item = (&Link, &[f64])> {
        self.heads.iter().map(|h| (&h.link, h.w.as_slice()))
    }

    pub fn head(&self, t: usize) -> (&Link, &[f64]) {
        (&self.heads[t].link, &self.heads[t].w)
    }

    /// Raw head outputs `sigma_t(w_t . x)`.
    pub fn sufficient_statistics(&self, x: &[f64]) -> Vec<f64> {
        self.heads
            .iter()
            .map(|h| h.link.eval(dot(&h.w, x)))
            .collect()
    }

    /// Loss-specific action: the average of the test link's generalized
    /// inverse applied to each head output.
    pub fn predict_unlinked(&self, x: &[f64], test_link: &Link) -> f64 {
        let t = self.heads.len() as f64;
        self.heads
            .iter()
            .map(|h| test_link.invert(h.link.eval(dot(&h.w, x))))
            .sum::<f64>()
            / t
    }

    /// Proper randomized prediction: a uniformly random head's output.
    pub fn predict_randomized_proper(&self, x: &[f64], rng: &mut Rng) -> f64 {
        let h = &self.heads[rng.below(self.heads.len())];
        h.link.eval(dot(&h.w, x))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: MultiIndexModel = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: 0,
            message: e.to_string(),
        })?;
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.heads.is_empty() {
            return Err(Error::EmptyInput("model needs at least one head"));
        }
        let lr = self.radius_l * self.radius_r;
        let tol = 1e-9;
        let dim = self.heads[0].w.len();
        for (t, h) in self.heads.iter().enumerate() {
            if h.w.len() != dim {
                return Err(Error::LengthMismatch(format!(
                    "head {t} has dim {}, expected {dim}",
                    h.w.len()
                )));
            }
            let norm: f64 = h.w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > self.radius_r + tol {
                return Err(Error::InvalidConfig(format!(
                    "head {t} weight norm {norm} exceeds R = {}",
                    self.radius_r
                )));
            }
            if (h.link.lr() - lr).abs() > tol * lr.max(1.0) {
                return Err(Error::InvalidConfig(format!(
                    "head {t} link domain radius {} differs from L*R = {lr}",
                    h.link.lr()
                )));
            }
        }
        Ok(())
    }
}

/// Packages the first `T` trace iterates as a multi-index model.
pub fn ideal_omnitron_fit(data: &Dataset, config: &TrainConfig) -> Result<MultiIndexModel> {
    if config.t == 0 {
        return Err(Error::InvalidConfig("need at least one head".into()));
    }
    let trace = isotron_fit(data, config)?;
    Ok(MultiIndexModel {
        radius_l: trace.radius_l,
        radius_r: trace.radius_r,
        heads: trace
            .steps
            .into_iter()
            .take(config.t)
            .map(|s| Head {
                link: s.link,
                w: s.w,
            })
            .collect(),
    })
}

/// Stochastic variant: the oracle link is refit on the (reused) oracle set
/// every iteration, while the gradient step consumes one fresh sample from
/// the stream.
pub fn omnitron_fit(
    oracle_data: &Dataset,
    stream: &Dataset,
    config: &TrainConfig,
) -> Result<MultiIndexModel> {
    if config.t == 0 {
        return Err(Error::InvalidConfig("need at least one head".into()));
    }
    if stream.len() < config.t {
        return Err(Error::StreamExhausted {
            needed: config.t,
            got: stream.len(),
        });
    }
    if stream.dim() != oracle_data.dim() {
        return Err(Error::LengthMismatch(format!(
            "stream dim {} != oracle dim {}",
            stream.dim(),
            oracle_data.dim()
        )));
    }
    let l = oracle_data.radius_l().max(stream.radius_l());
    let lr = l * config.r;
    config.validate(lr)?;
    let mut w = vec![0.0; oracle_data.dim()];
    let mut heads = Vec::with_capacity(config.t);
    for t in 0..config.t {
        let mut link = approx_bir_oracle(&w, oracle_data, config.beta, lr)?;
        if config.alpha_smooth > 0.0 {
            link = link.smooth(config.alpha_smooth)?;
        }
        let x = stream.row(t);
        let resid = link.eval(dot(&w, x)) - stream.label(t);
        let stepped: Vec<f64> = w
            .iter()
            .zip(x)
            .map(|(wi, xi)| wi - config.eta * resid * xi)
            .collect();
        heads.push(Head { link, w: w.clone() });
        w = project_ball(&stepped, config.r);
    }
    Ok(MultiIndexModel {
        radius_l: l,
        radius_r: config.r,
        heads,
    })
}

/// The constant label-mean predictor; its omnigap against any constant
/// comparator is exactly zero.
pub fn mean_predictor(data: &Dataset) -> f64 {
    data.labels().iter().sum::<f64>() / data.len() as f64
}
