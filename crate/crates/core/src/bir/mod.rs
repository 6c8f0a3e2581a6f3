//! Exact bounded isotonic regression: least-squares fit under two-sided
//! successive-difference constraints and a `[0, 1]` box.
//!
//! The production solver (`solve_bir`) runs the dual dynamic program in
//! O(n log^2 n); `solve_bir_reference` is an exact primal solver kept as an
//! independent oracle for tests and benchmarks.

mod dp;
mod reference;

use crate::links::PiecewiseLinearLink;
use crate::{cast, Error, Result, Scalar};

/// Instance of the problem: targets `y` in `[0,1]^n` and per-edge gap bounds
/// `0 <= a_i <= b_i` on `v_{i+1} - v_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance<F> {
    pub y: Vec<F>,
    pub a: Vec<F>,
    pub b: Vec<F>,
}

impl<F: Scalar> Instance<F> {
    pub fn new(y: Vec<F>, a: Vec<F>, b: Vec<F>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::EmptyInput("bir instance needs at least one target"));
        }
        if a.len() + 1 != y.len() || b.len() + 1 != y.len() {
            return Err(Error::MalformedInstance(format!(
                "gap bound lengths {}/{} do not match n-1 = {}",
                a.len(),
                b.len(),
                y.len() - 1
            )));
        }
        for (i, &yi) in y.iter().enumerate() {
            if !yi.is_finite() || yi < F::zero() || yi > F::one() {
                return Err(Error::MalformedInstance(format!(
                    "target y[{i}] = {yi} outside [0,1]"
                )));
            }
        }
        for i in 0..a.len() {
            if !a[i].is_finite() || !b[i].is_finite() || a[i] < F::zero() || b[i] < a[i] {
                return Err(Error::MalformedInstance(format!(
                    "gap bounds at {i} must satisfy 0 <= a <= b, got a={} b={}",
                    a[i], b[i]
                )));
            }
        }
        Ok(Instance { y, a, b })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        // construction guarantees n >= 1
        self.y.is_empty()
    }

    /// Forward interval propagation of the reachable set; errors with the
    /// first conflicting position if no feasible vector exists.
    pub fn check_feasible(&self) -> Result<()> {
        let mut lo = F::zero();
        let mut hi = F::one();
        for i in 0..self.a.len() {
            lo = (lo + self.a[i]).max(F::zero());
            hi = (hi + self.b[i]).min(F::one());
            if lo > hi {
                return Err(Error::Infeasible { position: i + 1 });
            }
        }
        Ok(())
    }

    pub fn objective_of(&self, v: &[F]) -> F {
        v.iter()
            .zip(&self.y)
            .map(|(&vi, &yi)| (vi - yi) * (vi - yi))
            .fold(F::zero(), |acc, t| acc + t)
    }
}

/// Optimizer output: the fitted vector plus its squared loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<F> {
    pub v: Vec<F>,
    pub objective: F,
}

/// Coefficients of the dual problem (`c`, `d` per edge, `e` per node).
#[derive(Debug, Clone, PartialEq)]
pub struct DualCoefficients<F> {
    pub c: Vec<F>,
    pub d: Vec<F>,
    pub e: Vec<F>,
}

/// `c_i = 2(y_{i+1} - y_i) - (b_i + a_i)`, `d_i = b_i - a_i`, `e_i = 2y_i - 1`.
pub fn dualize<F: Scalar>(instance: &Instance<F>) -> Result<DualCoefficients<F>> {
    let n = instance.len();
    if n < 2 {
        return Err(Error::MalformedInstance(
            "dualization needs n >= 2; n = 1 is handled directly in solve".into(),
        ));
    }
    let two = cast::<F>(2.0);
    let y = &instance.y;
    let c = (0..n - 1)
        .map(|i| two * (y[i + 1] - y[i]) - (instance.b[i] + instance.a[i]))
        .collect();
    let d = (0..n - 1).map(|i| instance.b[i] - instance.a[i]).collect();
    let e = y.iter().map(|&yi| two * yi - F::one()).collect();
    Ok(DualCoefficients { c, d, e })
}

/// Closed-form n = 2 case: a convex 1-D minimization over the gap variable.
fn solve_two<F: Scalar>(instance: &Instance<F>) -> Vec<F> {
    let (y1, y2) = (instance.y[0], instance.y[1]);
    let (lo, hi) = (instance.a[0], instance.b[0].min(F::one()));
    let half = cast::<F>(0.5);
    let two = cast::<F>(2.0);

    // g(delta) = min over v1 in [0, 1-delta] of (v1-y1)^2 + (v1+delta-y2)^2;
    // evaluate at every regime stationary point and both boundaries
    let eval = |delta: F| {
        let v1 = ((y1 + y2 - delta) * half)
            .max(F::zero())
            .min(F::one() - delta);
        let cost = (v1 - y1) * (v1 - y1) + (v1 + delta - y2) * (v1 + delta - y2);
        (cost, v1)
    };
    let clamp = |x: F| x.max(lo).min(hi);
    let candidates = [
        hi,
        clamp(y2 - y1),
        clamp(y2),
        clamp(F::one() - y1),
        clamp(y1 + y2),
        clamp(two - y1 - y2),
    ];
    let mut best_delta = lo;
    let (mut best_cost, mut best_v1) = eval(lo);
    for &delta in &candidates {
        let (cost, v1) = eval(delta);
        if cost < best_cost {
            best_cost = cost;
            best_delta = delta;
            best_v1 = v1;
        }
    }
    vec![best_v1, best_v1 + best_delta]
}

/// Clamps the raw optimizer onto the exactly-feasible set; the adjustment is
/// within solver tolerance of a no-op.
fn polish<F: Scalar>(instance: &Instance<F>, v: &mut [F]) {
    let n = v.len();
    v[0] = v[0].max(F::zero()).min(F::one());
    for i in 1..n {
        let lo = (v[i - 1] + instance.a[i - 1]).max(F::zero());
        let hi = (v[i - 1] + instance.b[i - 1]).min(F::one());
        v[i] = v[i].max(lo).min(hi.max(lo));
    }
}

/// Re-solves the problem exactly on the active set read off from `v`:
/// edges whose gap sits within `tol` of a bound are frozen, each resulting
/// block is a 1-D quadratic solved by a clamped mean. Returns `None` when
/// the resulting vector is not feasible.
fn exact_block_polish<F: Scalar>(instance: &Instance<F>, v: &[F], tol: F) -> Option<Vec<F>> {
    let n = v.len();
    let mut out = vec![F::zero(); n];
    let mut start = 0usize;
    let mut offs: Vec<F> = Vec::with_capacity(n);
    while start < n {
        offs.clear();
        offs.push(F::zero());
        let mut end = start;
        while end + 1 < n {
            let gap = v[end + 1] - v[end];
            let (a, b) = (instance.a[end], instance.b[end]);
            let off = if gap <= a + tol {
                a
            } else if gap >= b - tol {
                b
            } else {
                break;
            };
            offs.push(*offs.last().unwrap() + off);
            end += 1;
        }
        // block value: clamped mean of the offset-corrected targets
        let mut sum = F::zero();
        let mut lo_need = F::zero();
        let mut hi_need = F::one();
        for (k, &off) in offs.iter().enumerate() {
            sum = sum + (instance.y[start + k] - off);
            lo_need = lo_need.max(-off);
            hi_need = hi_need.min(F::one() - off);
        }
        if lo_need > hi_need {
            return None;
        }
        let mu = (sum / cast::<F>(offs.len() as f64))
            .max(lo_need)
            .min(hi_need);
        for (k, &off) in offs.iter().enumerate() {
            out[start + k] = mu + off;
        }
        start = end + 1;
    }
    // feasibility of the reassembled vector
    let eps = cast::<F>(1e-12);
    for &o in out.iter().take(n) {
        if o < -eps || o > F::one() + eps {
            return None;
        }
    }
    for i in 0..n - 1 {
        let gap = out[i + 1] - out[i];
        if gap < instance.a[i] - eps || gap > instance.b[i] + eps {
            return None;
        }
    }
    Some(out)
}

/// Upper gaps beyond the box width are vacuous; capping them keeps the
/// solution set identical while keeping all dual magnitudes O(1).
fn cap_upper_gaps<F: Scalar>(instance: &Instance<F>) -> Instance<F> {
    let mut capped = instance.clone();
    for b in capped.b.iter_mut() {
        if *b > F::one() {
            *b = F::one();
        }
    }
    capped
}

/// Exact solver for the bounded isotonic regression problem.
pub fn solve_bir<F: Scalar>(instance: &Instance<F>) -> Result<Solution<F>> {
    instance.check_feasible()?;
    let instance = &cap_upper_gaps(instance);
    let n = instance.len();
    let mut v = match n {
        1 => vec![instance.y[0].max(F::zero()).min(F::one())],
        2 => solve_two(instance),
        _ => dp::solve_dual_dp(instance)?,
    };
    polish(instance, &mut v);
    if n >= 3 {
        // the dual pass is exact in real arithmetic, but with very large gap
        // bounds its float noise is linear in the bound magnitude; an exact
        // re-solve on the identified active set removes it
        let mut best_obj = instance.objective_of(&v);
        for tol_exp in [-5, -7, -9, -11] {
            let tol = cast::<F>(10f64.powi(tol_exp));
            if let Some(cand) = exact_block_polish(instance, &v, tol) {
                let obj = instance.objective_of(&cand);
                if obj < best_obj {
                    best_obj = obj;
                    v = cand;
                }
            }
        }
        polish(instance, &mut v);
    }
    Ok(Solution {
        objective: instance.objective_of(&v),
        v,
    })
}

/// Exact reference oracle (primal interval dynamic program), O(n^2) worst
/// case. `tol` is kept for interface stability; the solution is exact up to
/// float rounding, well below any practical `tol`.
pub fn solve_bir_reference<F: Scalar>(instance: &Instance<F>, _tol: F) -> Result<Solution<F>> {
    instance.check_feasible()?;
    let instance = &cap_upper_gaps(instance);
    let mut v = reference::solve_window_dp(&instance.y, &instance.a, &instance.b)?;
    polish(instance, &mut v);
    Ok(Solution {
        objective: instance.objective_of(&v),
        v,
    })
}

/// Optimality certificate for solutions of Lipschitz instances
/// (`a = 0`, `b_i = beta (z_{i+1} - z_i)`): the minimum over comparator
/// links of `sum_i (v_i - y_i)(z_i - sigma^{-1}(v_i))`, restricted to links
/// whose generalized inverse satisfies the slope condition
/// `v_{i+1} - v_i <= beta (f(v_{i+1}) - f(v_i))` on the solution values.
/// Returns `None` when no provided link qualifies.
pub fn check_bir_optimality_certificate<F: Scalar>(
    solution: &Solution<F>,
    y: &[F],
    z: &[F],
    beta: F,
    links: &[PiecewiseLinearLink<F>],
) -> Option<F> {
    let v = &solution.v;
    let n = v.len();
    let tol = cast::<F>(1e-12);
    let mut best: Option<F> = None;
    for link in links {
        let f: Vec<F> = v.iter().map(|&vi| link.invert(vi)).collect();
        let qualifies =
            (0..n.saturating_sub(1)).all(|i| v[i + 1] - v[i] <= beta * (f[i + 1] - f[i]) + tol);
        if !qualifies {
            continue;
        }
        let mut sum = F::zero();
        for i in 0..n {
            sum = sum + (v[i] - y[i]) * (z[i] - f[i]);
        }
        best = Some(match best {
            Some(b) if b <= sum => b,
            _ => sum,
        });
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    type Inst = Instance<f64>;

    fn inst(y: &[f64], a: &[f64], b: &[f64]) -> Inst {
        Instance::new(y.to_vec(), a.to_vec(), b.to_vec()).unwrap()
    }

    #[test]
    fn dualize_hand_example() {
        let d = dualize(&inst(&[0.2, 0.8], &[0.1], &[0.3])).unwrap();
        assert!((d.c[0] - 0.8).abs() < 1e-15);
        assert!((d.d[0] - 0.2).abs() < 1e-15);
        assert!((d.e[0] + 0.6).abs() < 1e-15);
        assert!((d.e[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn dualize_symmetric_midpoint() {
        let d = dualize(&inst(&[0.5, 0.5], &[0.0], &[0.0])).unwrap();
        assert_eq!(d.c, vec![0.0]);
        assert_eq!(d.d, vec![0.0]);
        assert_eq!(d.e, vec![0.0, 0.0]);
    }

    #[test]
    fn dual_invariants_on_random_instances() {
        let mut rng = Rng::new(8);
        for _ in 0..200 {
            let n = 2 + rng.below(40);
            let i = random_instance(&mut rng, n);
            let d = dualize(&i).unwrap();
            assert!(d.d.iter().all(|&x| x >= 0.0));
            assert!(d.e.iter().all(|&x| x.abs() <= 1.0));
        }
    }

    #[test]
    fn dualize_rejects_n1() {
        assert!(dualize(&inst(&[0.7], &[], &[])).is_err());
    }

    #[test]
    fn solve_trivial_cases() {
        // interior, already feasible
        let s = solve_bir(&inst(&[0.2, 0.5], &[0.0], &[1.0])).unwrap();
        assert!((s.v[0] - 0.2).abs() < 1e-12 && (s.v[1] - 0.5).abs() < 1e-12);
        // monotonicity forces pooling
        let s = solve_bir(&inst(&[1.0, 0.0], &[0.0], &[10.0])).unwrap();
        assert!((s.v[0] - 0.5).abs() < 1e-12 && (s.v[1] - 0.5).abs() < 1e-12);
        // capped gap splits the excess symmetrically
        let s = solve_bir(&inst(&[0.0, 1.0], &[0.0], &[0.4])).unwrap();
        assert!((s.v[0] - 0.3).abs() < 1e-12 && (s.v[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn solve_n1_clamps() {
        let s = solve_bir(&inst(&[0.7], &[], &[])).unwrap();
        assert_eq!(s.v, vec![0.7]);
        let r = solve_bir_reference(&inst(&[0.7], &[], &[]), 1e-9).unwrap();
        assert_eq!(r.v, vec![0.7]);
    }

    #[test]
    fn infeasible_detected() {
        let i = Instance::new(vec![0.1, 0.5, 0.9], vec![0.6, 0.6], vec![0.7, 0.7]).unwrap();
        match solve_bir(&i) {
            Err(Error::Infeasible { position }) => assert_eq!(position, 2),
            other => panic!("expected infeasibility, got {other:?}"),
        }
        assert!(solve_bir_reference(&i, 1e-9).is_err());
    }

    #[test]
    fn reference_agrees_with_closed_forms() {
        let s = solve_bir_reference(&inst(&[0.0, 1.0], &[0.0], &[0.4]), 1e-9).unwrap();
        assert!((s.v[0] - 0.3).abs() < 1e-9 && (s.v[1] - 0.7).abs() < 1e-9);
        let s = solve_bir_reference(&inst(&[1.0, 0.0], &[0.0], &[10.0]), 1e-9).unwrap();
        assert!((s.v[0] - 0.5).abs() < 1e-9);
    }

    pub(crate) fn random_instance(rng: &mut Rng, n: usize) -> Inst {
        let y: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let mut a = vec![0.0; n.saturating_sub(1)];
        let mut b = vec![0.0; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            match rng.below(10) {
                0 => {
                    b[i] = 1_000_000.0; // stand-in for +inf
                }
                1 => {
                    // two-sided window
                    a[i] = rng.uniform(0.0, 1.2 / n as f64);
                    b[i] = a[i] + rng.uniform(0.0, 2.0 / n as f64);
                }
                2 => {
                    // forced equality
                    a[i] = 0.0;
                    b[i] = 0.0;
                }
                _ => {
                    b[i] = rng.uniform(0.0, 2.0 / n as f64);
                }
            }
        }
        Instance::new(y, a, b).unwrap()
    }

    #[test]
    fn reference_kkt_spot_check() {
        // the reference output should not be improvable by any small
        // feasible perturbation
        let mut rng = Rng::new(55);
        for _ in 0..50 {
            let n = 1 + rng.below(12);
            let i = random_instance(&mut rng, n);
            let sol = match solve_bir_reference(&i, 1e-12) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let base = sol.objective;
            let h = 1e-6;
            for _ in 0..20 {
                let mut v2 = sol.v.clone();
                let j = rng.below(n);
                let delta = if rng.below(2) == 0 { h } else { -h };
                for item in v2.iter_mut().skip(j) {
                    *item += delta;
                }
                let feasible = v2.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x))
                    && (0..n - 1).all(|k| {
                        let d = v2[k + 1] - v2[k];
                        d >= i.a[k] - 1e-12 && d <= i.b[k] + 1e-12
                    });
                if feasible {
                    assert!(
                        i.objective_of(&v2) >= base - 1e-9,
                        "perturbation improved objective"
                    );
                }
            }
        }
    }

    #[test]
    fn solve_matches_reference_small_random() {
        let mut rng = Rng::new(314);
        for trial in 0..300 {
            let n = 1 + rng.below(24);
            let i = random_instance(&mut rng, n);
            if i.check_feasible().is_err() {
                continue;
            }
            let fast = solve_bir(&i).unwrap();
            let slow = solve_bir_reference(&i, 1e-12).unwrap();
            for k in 0..n {
                assert!(
                    (fast.v[k] - slow.v[k]).abs() < 1e-6,
                    "trial {trial} n={n} coord {k}: {} vs {}\ny={:?}\na={:?}\nb={:?}",
                    fast.v[k],
                    slow.v[k],
                    i.y,
                    i.a,
                    i.b
                );
            }
            assert!(fast.objective <= slow.objective + 1e-9);
        }
    }

    #[test]
    fn output_always_feasible() {
        let mut rng = Rng::new(2718);
        for _ in 0..200 {
            let n = 1 + rng.below(60);
            let i = random_instance(&mut rng, n);
            if let Ok(s) = solve_bir(&i) {
                assert!(s.v.iter().all(|&x| (-1e-9..=1.0 + 1e-9).contains(&x)));
                for k in 0..n - 1 {
                    let d = s.v[k + 1] - s.v[k];
                    assert!(d >= i.a[k] - 1e-9 && d <= i.b[k] + 1e-9);
                }
            }
        }
    }

    #[test]
    fn forced_rigid_chain() {
        // cumulative lower gaps consume the whole box: v is fully determined
        let i = inst(&[0.9, 0.1, 0.4], &[0.5, 0.5], &[0.5, 0.5]);
        let s = solve_bir(&i).unwrap();
        assert!((s.v[0] - 0.0).abs() < 1e-9);
        assert!((s.v[1] - 0.5).abs() < 1e-9);
        assert!((s.v[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn piece_growth_stays_linear() {
        // zero-vertex bookkeeping: the forward pass debug_asserts <= 2i+2
        // pieces; exercising a moderate instance under the test profile
        // (debug assertions on) is the check
        let mut rng = Rng::new(99);
        let i = random_instance(&mut rng, 500);
        let _ = solve_bir(&i).unwrap();
    }

    #[test]
    fn solver_is_generic_over_f32() {
        let i = Instance::<f32>::new(vec![0.0, 1.0], vec![0.0], vec![0.4]).unwrap();
        let s = solve_bir(&i).unwrap();
        assert!((s.v[0] - 0.3).abs() < 1e-5 && (s.v[1] - 0.7).abs() < 1e-5);
        let i = Instance::<f32>::new(vec![0.9, 0.1, 0.4], vec![0.0; 2], vec![1.0; 2]).unwrap();
        let s = solve_bir(&i).unwrap();
        let r = solve_bir_reference(&i, 1e-5).unwrap();
        for (a, b) in s.v.iter().zip(&r.v) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn certificate_constant_labels() {
        let n = 8;
        let z: Vec<f64> = (0..n)
            .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
            .collect();
        let beta = 1.0;
        let y = vec![0.5; n];
        let a = vec![0.0; n - 1];
        let b: Vec<f64> = z.windows(2).map(|w| beta * (w[1] - w[0])).collect();
        let i = Instance::new(y.clone(), a, b).unwrap();
        let sol = solve_bir(&i).unwrap();
        assert!(sol.v.iter().all(|&v| (v - 0.5).abs() < 1e-9));
        let links = vec![PiecewiseLinearLink::affine(1.0)];
        let cert = check_bir_optimality_certificate(&sol, &y, &z, beta, &links).unwrap();
        assert!(cert.abs() < 1e-9);
    }

    #[test]
    fn certificate_nonnegative_on_lipschitz_instances() {
        use crate::testutil::random_link;
        let mut rng = Rng::new(500);
        for _ in 0..100 {
            let nz = 2 + rng.below(19);
            let mut z: Vec<f64> = (0..nz).map(|_| rng.uniform(-1.0, 1.0)).collect();
            z.sort_by(|p, q| p.partial_cmp(q).unwrap());
            z.dedup_by(|p, q| (*p - *q).abs() < 1e-9);
            let n = z.len();
            if n < 2 {
                continue;
            }
            let beta = 1.0;
            let y: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
            let a = vec![0.0; n - 1];
            let b: Vec<f64> = z.windows(2).map(|w| beta * (w[1] - w[0])).collect();
            let i = Instance::new(y.clone(), a, b).unwrap();
            let sol = solve_bir(&i).unwrap();
            let links: Vec<_> = (0..50)
                .map(|_| random_link(&mut rng, 1.0, beta, 0.0))
                .collect();
            if let Some(cert) = check_bir_optimality_certificate(&sol, &y, &z, beta, &links) {
                assert!(cert >= -1e-6, "certificate {cert} < -1e-6");
            }
        }
    }
}
