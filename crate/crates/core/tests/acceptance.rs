//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (run with `--nocapture` to see them).

use std::time::Instant;

use omnipred::bir::{
    check_bir_optimality_certificate, solve_bir, solve_bir_reference, Instance, Solution,
};
use omnipred::data::{gen_flip, gen_flip_mode, gen_realizable, LabelMode};
use omnipred::evalgap::{
    build_link_grid, build_link_grid_with, build_weight_grid, counterexample_fixture,
    empirical_omnigap, omniprediction_gap, sweep_max, sweep_model, ComparatorGrid, PointPredictor,
};
use omnipred::learners::{
    approx_bir_oracle, ideal_omnitron_fit, isotron_fit, omnitron_fit, TrainConfig,
};
use omnipred::maintainer::{BirPartialMaintainer, LeafState, SemigroupElem};
use omnipred::pav::{pav_fit, StepPredictor, WeightedPoint1D};
use omnipred::rng::Rng;
use omnipred::segtree::{Applies, SegTree, Semigroup};
use omnipred::Link;

/// Random monotone piecewise-linear link with slopes in [min_slope, beta].
fn random_link(rng: &mut Rng, lr: f64, beta: f64, min_slope: f64) -> Link {
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
    Link::new(pts, lr, beta).unwrap()
}

/// Strictly increasing link spanning exactly [0, 1] (full range).
fn random_full_range_link(rng: &mut Rng, lr: f64, beta: f64) -> Link {
    loop {
        let nseg = 2 + rng.below(6);
        let mut ts = vec![-lr, lr];
        for _ in 0..nseg - 1 {
            ts.push(rng.uniform(-lr * 0.95, lr * 0.95));
        }
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ts.dedup_by(|a, b| (*a - *b).abs() < 1e-6 * lr);
        let mut vals = vec![0.0];
        for w in ts.windows(2) {
            vals.push(vals.last().unwrap() + rng.uniform(0.05, 1.0) * (w[1] - w[0]));
        }
        let span = *vals.last().unwrap();
        let scaled: Vec<f64> = vals.iter().map(|v| v / span).collect();
        let slope_ok = ts
            .windows(2)
            .zip(scaled.windows(2))
            .all(|(tw, vw)| (vw[1] - vw[0]) / (tw[1] - tw[0]) <= beta);
        if !slope_ok {
            continue;
        }
        let pts: Vec<(f64, f64)> = ts.iter().zip(&scaled).map(|(&t, &v)| (t, v)).collect();
        if let Ok(link) = Link::new(pts, lr, beta) {
            return link;
        }
    }
}

fn lipschitz_instance(rng: &mut Rng, z: &[f64], beta: f64) -> Instance<f64> {
    let n = z.len();
    let y: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
    let a = vec![0.0; n - 1];
    let b: Vec<f64> = z.windows(2).map(|w| beta * (w[1] - w[0])).collect();
    Instance::new(y, a, b).unwrap()
}

fn sorted_unique_scores(rng: &mut Rng, n: usize) -> Vec<f64> {
    let mut z: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
    z.sort_by(|a, b| a.partial_cmp(b).unwrap());
    z.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    z
}

#[test]
fn a1_bir_exactness() {
    let start = Instant::now();
    let mut rng = Rng::new(101);
    let mut worst_coord = 0.0f64;
    let mut worst_obj = 0.0f64;
    let mut solved = 0;
    while solved < 500 {
        let n = 1 + rng.below(60);
        let y: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let a = vec![0.0; n.saturating_sub(1)];
        let b: Vec<f64> = (0..n.saturating_sub(1))
            .map(|_| {
                if rng.below(8) == 0 {
                    1_000_000.0
                } else {
                    rng.uniform(0.0, 2.0 / n as f64)
                }
            })
            .collect();
        let inst = Instance::new(y, a, b).unwrap();
        let fast = solve_bir(&inst).unwrap();
        let slow = solve_bir_reference(&inst, 1e-12).unwrap();
        for k in 0..n {
            worst_coord = worst_coord.max((fast.v[k] - slow.v[k]).abs());
        }
        worst_obj = worst_obj.max((fast.objective - slow.objective).abs());
        solved += 1;
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(worst_coord <= 1e-6, "coordinate deviation {worst_coord}");
    assert!(worst_obj <= 1e-9, "objective deviation {worst_obj}");
    assert!(elapsed < 10.0, "runtime {elapsed}s exceeds 10s");
    println!(
        "A1 (BIR exactness): PASS (500 instances, worst coord {worst_coord:.2e}, worst obj {worst_obj:.2e}, {elapsed:.2}s)"
    );
}

#[test]
fn a2_bir_scaling() {
    let mut rng = Rng::new(202);
    let sizes = [1_000usize, 10_000, 100_000, 1_000_000];
    let mut normalized = Vec::new();
    let mut big_time = 0.0;
    for &n in &sizes {
        let y: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let a = vec![0.0; n - 1];
        let b: Vec<f64> = (0..n - 1)
            .map(|_| {
                if rng.below(10) == 0 {
                    1_000.0
                } else {
                    rng.uniform(0.0, 4.0 / n as f64)
                }
            })
            .collect();
        let inst = Instance::new(y, a, b).unwrap();
        let trials = if n <= 100_000 { 3 } else { 1 };
        let mut best = f64::INFINITY;
        for _ in 0..trials {
            let t0 = Instant::now();
            let _ = solve_bir(&inst).unwrap();
            best = best.min(t0.elapsed().as_secs_f64());
        }
        if n == 1_000_000 {
            big_time = best;
        }
        normalized.push(best / (n as f64 * (n as f64).log2().powi(2)));
    }
    for w in normalized.windows(2) {
        let ratio = (w[1] / w[0]).max(w[0] / w[1]);
        assert!(
            ratio <= 4.0,
            "normalized ratio {ratio} exceeds 4x: {normalized:?}"
        );
    }
    assert!(big_time < 30.0, "n=1e6 took {big_time}s");
    println!("A2 (BIR scaling): PASS (t/(n log2^2 n) = {normalized:?}, n=1e6 in {big_time:.2}s)");
}

#[test]
fn a3_pav_suite() {
    let mut rng = Rng::new(303);

    // PAV equals BIR with a = 0, b = 1e6
    let mut worst = 0.0f64;
    let mut worst_cal = 0.0f64;
    for _ in 0..200 {
        let n = 1 + rng.below(60);
        let pts: Vec<WeightedPoint1D<f64>> = (0..n)
            .map(|i| WeightedPoint1D::unit(i as f64, rng.next_f64()))
            .collect();
        let pred = pav_fit(&pts).unwrap();
        worst_cal = worst_cal.max(omnipred::pav::pav_calibration_report(&pred, &pts));
        let y: Vec<f64> = pts.iter().map(|p| p.y).collect();
        let a = vec![0.0; n - 1];
        let b = vec![1_000_000.0; n - 1];
        let sol = solve_bir(&Instance::new(y, a, b).unwrap()).unwrap();
        for (i, p) in pts.iter().enumerate() {
            worst = worst.max((pred.eval(p.x) - sol.v[i]).abs());
        }
    }
    assert!(worst <= 1e-8, "pav vs bir deviation {worst}");
    assert!(worst_cal <= 1e-12, "calibration deviation {worst_cal}");

    // empirical omnigap over a 100-pair monotone grid
    let pts: Vec<WeightedPoint1D<f64>> = (0..200)
        .map(|_| WeightedPoint1D::unit(rng.uniform(-1.0, 1.0), rng.next_f64()))
        .collect();
    let pred = pav_fit(&pts).unwrap();
    let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
    let preds: Vec<f64> = xs.iter().map(|&x| pred.eval(x)).collect();
    let step_link = |rng: &mut Rng| -> Link {
        // monotone staircase realized as a steep piecewise-linear link
        let levels = 2 + rng.below(4);
        let mut pts = vec![(-1.0, 0.0)];
        let mut v = rng.uniform(0.0, 0.3);
        pts[0].1 = v;
        let mut t = -1.0;
        for _ in 0..levels {
            let t_next = (t + rng.uniform(0.2, 0.7)).min(0.999);
            if t_next <= t {
                break;
            }
            pts.push((t_next, v));
            v = (v + rng.uniform(0.0, 0.4)).min(1.0);
            pts.push((t_next + 1e-6, v));
            t = t_next + 1e-6;
        }
        pts.push((1.0, v));
        Link::new(pts, 1.0, 1e7).unwrap()
    };
    let step_comparator = |rng: &mut Rng| -> Vec<f64> {
        let cut = rng.uniform(-0.9, 0.9);
        let lo = rng.uniform(-1.0, 0.0);
        let hi = lo + rng.uniform(0.0, 1.5);
        xs.iter().map(|&x| if x < cut { lo } else { hi }).collect()
    };
    let mut worst_og = f64::NEG_INFINITY;
    for _ in 0..10 {
        let link = step_link(&mut rng);
        let unlink: Vec<f64> = preds.iter().map(|&p| link.invert(p)).collect();
        for _ in 0..10 {
            let c = step_comparator(&mut rng);
            let og = empirical_omnigap(&preds, &unlink, &c, &ys).unwrap();
            worst_og = worst_og.max(og);
        }
    }
    assert!(worst_og <= 1e-9, "pav omnigap {worst_og}");

    // universal optimality: pav proper loss <= 1000 random monotone step
    // predictors, for 5 distinct proper losses
    let losses: Vec<Link> = vec![
        Link::affine(1.0),
        Link::logistic(1.0),
        random_full_range_link(&mut rng, 1.0, 1.0),
        random_full_range_link(&mut rng, 1.0, 1.0),
        random_full_range_link(&mut rng, 1.0, 1.0),
    ];
    let pav_losses: Vec<f64> = losses
        .iter()
        .map(|link| {
            preds
                .iter()
                .zip(&ys)
                .map(|(&p, &y)| link.proper_loss(p, y))
                .sum::<f64>()
                / ys.len() as f64
        })
        .collect();
    for trial in 0..1000 {
        // random monotone step predictor: random thresholds, sorted values
        let kcuts = rng.below(6);
        let mut cuts: Vec<f64> = (0..kcuts).map(|_| rng.uniform(-1.0, 1.0)).collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let mut vals: Vec<f64> = (0..cuts.len() + 1).map(|_| rng.next_f64()).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = StepPredictor::new(omnipred::pav::Direction::Inc, cuts, vals).unwrap();
        for (k, link) in losses.iter().enumerate() {
            let q_loss = xs
                .iter()
                .zip(&ys)
                .map(|(&x, &y)| link.proper_loss(q.eval(x), y))
                .sum::<f64>()
                / ys.len() as f64;
            assert!(
                pav_losses[k] <= q_loss + 1e-12,
                "loss {k} trial {trial}: pav {} > step {}",
                pav_losses[k],
                q_loss
            );
        }
    }
    println!(
        "A3 (PAV suite): PASS (vs BIR {worst:.2e}, calibration {worst_cal:.2e}, grid omnigap {worst_og:.2e}, universal optimality over 5 losses x 1000 predictors)"
    );
}

#[test]
fn a4_erm_omniprediction() {
    let start = Instant::now();
    let data = gen_flip(1, 2000, 404, 0.1, 1.0).unwrap();
    let t = 100;
    let config = TrainConfig {
        t,
        eta: TrainConfig::eta_averaged(1.0, 1.0, t),
        beta: 1.0,
        r: 1.0,
        alpha_smooth: 0.0,
        seed: 404,
    };
    let model = ideal_omnitron_fit(&data, &config).unwrap();
    let grid = ComparatorGrid {
        links: build_link_grid(1.0, 1.0, 0.025).unwrap(),
        weights: build_weight_grid(1, 1.0, 404),
    };
    let rows = sweep_model(&model, &grid, &data).unwrap();
    let worst = sweep_max(&rows).unwrap().pl_gap;
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        worst <= 0.1 + 0.05,
        "ERM omniprediction gap {worst} exceeds 0.15"
    );
    assert!(elapsed < 60.0, "runtime {elapsed}s exceeds 60s");
    println!(
        "A4 (ERM omniprediction): PASS (max grid pl-gap {worst:.4} <= 0.15 over {} pairs, {elapsed:.1}s)",
        rows.len()
    );
}

#[test]
fn a5_realizable_isotron() {
    let start = Instant::now();
    let mut rng = Rng::new(505);
    let link_star = random_link(&mut rng, 1.0, 1.0, 0.0);
    let mut w_star = rng.unit_vector(5);
    let scale = rng.uniform(0.5, 1.0);
    for w in w_star.iter_mut() {
        *w *= scale;
    }
    let data = gen_realizable(
        5,
        10_000,
        &link_star,
        &w_star,
        505,
        LabelMode::Expected,
        1.0,
    )
    .unwrap();
    let config = TrainConfig {
        t: 100,
        eta: TrainConfig::eta_realizable(1.0, 1.0),
        beta: 1.0,
        r: 1.0,
        alpha_smooth: 0.0,
        seed: 505,
    };
    let trace = isotron_fit(&data, &config).unwrap();
    // expected-mode labels make the generating SIM's squared loss zero, so
    // the excess is the raw empirical squared loss
    let best = trace
        .steps
        .iter()
        .map(|s| s.sq_loss)
        .fold(f64::INFINITY, f64::min);
    let elapsed = start.elapsed().as_secs_f64();
    assert!(best <= 0.01 + 1e-3, "excess squared loss {best}");
    assert!(elapsed < 120.0, "runtime {elapsed}s exceeds 120s");
    println!(
        "A5 (Realizable Isotron): PASS (min excess sq loss {best:.5} <= 0.011, {elapsed:.1}s)"
    );
}

#[test]
fn a6_finite_sample_trend() {
    let t = 200;
    let sizes = [500usize, 2000, 8000];
    let seeds = [1u64, 2, 3, 4, 5];
    // smooth the comparators into the anti-Lipschitz family so their
    // generalized inverses are single-valued; flat comparators would
    // otherwise impose a model-independent floor on the measured gap
    let links: Vec<Link> = build_link_grid_with(1.0, 1.0, 0.25, 16, 606)
        .unwrap()
        .into_iter()
        .map(|l| l.smooth(0.01).unwrap())
        .collect();
    let mut weights = vec![vec![0.0, 0.0, 0.0]];
    {
        let mut wrng = Rng::stream(606, 9);
        for _ in 0..32 {
            let dir = wrng.unit_vector(3);
            for k in 1..=4 {
                let s = k as f64 / 4.0;
                weights.push(dir.iter().map(|x| x * s).collect());
            }
        }
    }
    let mut medians = Vec::new();
    for &n_oracle in &sizes {
        let mut gaps = Vec::new();
        for &seed in &seeds {
            let pool = gen_flip_mode(3, 8000, seed, 0.1, 1.0, LabelMode::Bernoulli).unwrap();
            let (oracle_data, _) = if n_oracle < pool.len() {
                pool.split_at(n_oracle).unwrap()
            } else {
                (pool.clone(), pool.clone())
            };
            let stream = gen_flip_mode(3, t, seed + 100, 0.1, 1.0, LabelMode::Bernoulli).unwrap();
            let heldout =
                gen_flip_mode(3, 10_000, seed + 200, 0.1, 1.0, LabelMode::Bernoulli).unwrap();
            let config = TrainConfig {
                t,
                eta: TrainConfig::eta_stochastic(1.0, 1.0, t),
                beta: 1.0,
                r: 1.0,
                alpha_smooth: 0.0,
                seed,
            };
            let model = omnitron_fit(&oracle_data, &stream, &config).unwrap();
            let grid = ComparatorGrid {
                links: links.clone(),
                weights: weights.clone(),
            };
            let rows = sweep_model(&model, &grid, &heldout).unwrap();
            gaps.push(sweep_max(&rows).unwrap().pl_gap);
        }
        gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        medians.push(gaps[gaps.len() / 2]);
    }
    for w in medians.windows(2) {
        assert!(
            w[1] <= w[0] + 1e-12,
            "median held-out gap increased: {medians:?}"
        );
    }
    assert!(
        medians[2] <= 0.2,
        "median gap at n=8000 is {} > 0.2",
        medians[2]
    );
    println!("A6 (Finite-sample trend): PASS (median held-out gaps {medians:?} non-increasing, final <= 0.2)");
}

#[test]
fn a7_counterexample() {
    let rep = counterexample_fixture();
    assert!(rep.ml_at_wstar <= -0.02, "ml at w* {}", rep.ml_at_wstar);
    assert!(rep.min_pl_over_w >= 0.01, "min pl {}", rep.min_pl_over_w);
    assert!(rep.gap >= 0.03, "gap {}", rep.gap);
    println!(
        "A7 (Counterexample): PASS (ml {:.4} <= -0.02, min pl {:.4} >= 0.01, gap {:.4} >= 0.03)",
        rep.ml_at_wstar, rep.min_pl_over_w, rep.gap
    );
}

#[test]
fn a8_og_loss_chain() {
    let mut rng = Rng::new(808);
    let mut violations = 0usize;
    let mut max_slack = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let d = 1 + rng.below(3);
        let sigma = random_link(&mut rng, 1.0, 1.0, 0.02); // strictly increasing
        let head_link = random_link(&mut rng, 1.0, 1.0, 0.0);
        let head_w: Vec<f64> = rng
            .unit_vector(d)
            .into_iter()
            .map(|x| x * rng.next_f64())
            .collect();
        let w: Vec<f64> = rng
            .unit_vector(d)
            .into_iter()
            .map(|x| x * rng.next_f64())
            .collect();
        let n = 30 + rng.below(50);
        let data = gen_flip(d, n, rng.next_u64(), rng.next_f64() * 0.4, 1.0).unwrap();
        let predictor = PointPredictor::Head {
            link: head_link,
            w: head_w,
        };
        let preds: Vec<f64> = (0..data.len())
            .map(|i| predictor.predict(data.row(i)))
            .collect();
        let unlink: Vec<f64> = preds.iter().map(|&p| sigma.invert(p)).collect();
        let wx: Vec<f64> = (0..data.len())
            .map(|i| w.iter().zip(data.row(i)).map(|(a, b)| a * b).sum())
            .collect();
        let og = empirical_omnigap(&preds, &unlink, &wx, data.labels()).unwrap();
        let gap = omniprediction_gap(&predictor, &sigma, &w, &data);
        max_slack = max_slack.max(gap - og);
        if gap > og + 1e-8 {
            violations += 1;
        }
    }
    assert_eq!(violations, 0, "og_loss chain violated {violations} times");
    println!(
        "A8 (og_loss chain): PASS (1000 tuples, zero violations, max gap-omnigap {max_slack:.2e})"
    );
}

#[derive(Debug, Clone, PartialEq)]
struct Shift(i64);

impl Semigroup for Shift {
    fn identity() -> Self {
        Shift(0)
    }
    fn compose(g2: &Self, g1: &Self) -> Self {
        Shift(g2.0 + g1.0)
    }
    fn is_identity(&self) -> bool {
        self.0 == 0
    }
}

impl Applies<i64> for Shift {
    fn apply_to(&self, v: &i64) -> i64 {
        v + self.0
    }
}

#[test]
fn a9_data_structure_oracles() {
    // segment tree vs naive vec over 1e4 random operations
    let mut rng = Rng::new(909);
    let mut tree: SegTree<Shift, i64> = SegTree::new();
    let mut naive: Vec<i64> = Vec::new();
    for _ in 0..10_000 {
        match rng.below(5) {
            0 | 1 if naive.len() < 256 => {
                let j = rng.below(naive.len() + 1);
                let v = rng.next_u64() as i64 % 512;
                tree.insert(j, v);
                naive.insert(j, v);
            }
            2 if !naive.is_empty() => {
                let j = rng.below(naive.len());
                tree.delete(j);
                naive.remove(j);
            }
            3 if !naive.is_empty() => {
                let p = rng.below(naive.len());
                let q = rng.below(naive.len());
                let (l, r) = (p.min(q), p.max(q));
                let d = (rng.next_u64() % 17) as i64 - 8;
                tree.apply_range(&Shift(d), l, r);
                for item in naive[l..=r].iter_mut() {
                    *item += d;
                }
            }
            _ if !naive.is_empty() => {
                let j = rng.below(naive.len());
                assert_eq!(tree.get(j), naive[j]);
            }
            _ => {}
        }
    }
    assert_eq!(tree.collect(), naive);

    // maintainer vs eager store over 1e4 random operations
    let mut m = BirPartialMaintainer::<f64>::new();
    let mut eager: Vec<(f64, f64)> = Vec::new();
    let mut births: Vec<u64> = Vec::new();
    let mut max_dev = 0.0f64;
    for _ in 0..10_000 {
        match rng.below(6) {
            0 | 1 if eager.len() < 256 => {
                let j = rng.below(eager.len() + 1);
                let beta = rng.uniform(-5.0, 5.0);
                if rng.below(2) == 0 {
                    let mm = 1 + rng.below(m.tau() as usize) as u64;
                    let alpha = 1.0 / (2.0 * mm as f64);
                    m.insert_piece(j, alpha, beta).unwrap();
                    eager.insert(j, (alpha, beta));
                    births.insert(j, m.tau() + 1 - mm);
                } else {
                    m.insert_piece(j, 0.0, beta).unwrap();
                    eager.insert(j, (0.0, beta));
                    births.insert(j, 0);
                }
            }
            2 if !eager.is_empty() => {
                let j = rng.below(eager.len());
                m.delete_piece(j).unwrap();
                eager.remove(j);
                births.remove(j);
            }
            3 if !eager.is_empty() => {
                let p = rng.below(eager.len());
                let q = rng.below(eager.len());
                let (l, r) = (p.min(q), p.max(q));
                let d = rng.uniform(-2.0, 2.0);
                m.add(l, r, d).unwrap();
                for item in eager[l..=r].iter_mut() {
                    item.1 += d;
                }
            }
            4 => {
                m.update_all();
                for item in eager.iter_mut() {
                    let s = 2.0 * item.0 + 1.0;
                    item.0 /= s;
                    item.1 /= s;
                }
            }
            _ => {
                let max_k = births.iter().copied().max().unwrap_or(0);
                if m.tau() > 1 && m.tau() > max_k {
                    // exact update/inv round trip spot check
                    if !eager.is_empty() {
                        let j = rng.below(eager.len());
                        let before = m.query(j).unwrap();
                        m.update_all();
                        m.inv_update_all().unwrap();
                        let after = m.query(j).unwrap();
                        assert_eq!(before, after, "update/inv round trip not exact");
                    }
                    m.inv_update_all().unwrap();
                    for item in eager.iter_mut() {
                        let s = 1.0 - 2.0 * item.0;
                        item.0 /= s;
                        item.1 /= s;
                    }
                }
            }
        }
        if !eager.is_empty() {
            let j = rng.below(eager.len());
            let got = m.query(j).unwrap();
            max_dev = max_dev
                .max((got.alpha - eager[j].0).abs())
                .max((got.beta - eager[j].1).abs());
        }
    }
    assert!(max_dev <= 1e-8, "maintainer deviation {max_dev}");

    // semigroup laws: exact on integer-valued elements
    for _ in 0..100_000 {
        let r = |rng: &mut Rng| {
            SemigroupElem::new(
                1 + rng.below(30) as u64,
                rng.below(41) as f64 - 20.0,
                rng.below(41) as f64 - 20.0,
                rng.below(41) as f64 - 20.0,
            )
        };
        let (a, b, c) = (r(&mut rng), r(&mut rng), r(&mut rng));
        let id = SemigroupElem::<f64>::identity();
        assert_eq!(SemigroupElem::compose(&id, &a), a);
        assert_eq!(SemigroupElem::compose(&a, &id), a);
        let left = SemigroupElem::compose(&SemigroupElem::compose(&a, &b), &c);
        let right = SemigroupElem::compose(&a, &SemigroupElem::compose(&b, &c));
        assert_eq!(left, right, "associativity violated");
        let leaf = LeafState {
            k: 1 + rng.below(1) as u64,
            h: rng.below(21) as f64,
        };
        assert_eq!(
            SemigroupElem::compose(&a, &b).apply_to(&leaf),
            a.apply_to(&b.apply_to(&leaf)),
            "action compatibility violated"
        );
    }
    println!(
        "A9 (Data-structure oracles): PASS (segment tree + maintainer match naive over 1e4 ops, dev {max_dev:.2e}; semigroup laws exact on 1e5 triples)"
    );
}

#[test]
fn a10_certificate() {
    let mut rng = Rng::new(1010);
    let beta = 1.0;
    let mut worst = f64::INFINITY;
    let mut instances = 0;
    while instances < 100 {
        let nn = 2 + rng.below(40);
        let z = sorted_unique_scores(&mut rng, nn);
        if z.len() < 2 {
            continue;
        }
        let inst = lipschitz_instance(&mut rng, &z, beta);
        let sol = solve_bir(&inst).unwrap();
        let links: Vec<Link> = (0..50)
            .map(|_| random_link(&mut rng, 1.0, beta, 0.0))
            .collect();
        if let Some(cert) = check_bir_optimality_certificate(&sol, &inst.y, &z, beta, &links) {
            worst = worst.min(cert);
            assert!(cert >= -1e-6, "certificate {cert} < -1e-6");
        }
        instances += 1;
    }
    println!(
        "A10 (Certificate): PASS (100 instances x 50 links, min certificate {worst:.2e} >= -1e-6)"
    );
}

/// Also keep the oracle's own-sample contract pinned here: the learned link
/// satisfies the approximate-oracle inequality with eps = 0 on its sample.
#[test]
fn oracle_contract_on_own_sample() {
    let mut rng = Rng::new(42);
    let mut worst = f64::INFINITY;
    for _ in 0..50 {
        let d = 1 + rng.below(3);
        let data = gen_flip(d, 50 + rng.below(100), rng.next_u64(), 0.2, 1.0).unwrap();
        let w: Vec<f64> = rng.unit_vector(d);
        let beta = 1.0;
        let link = approx_bir_oracle(&w, &data, beta, 1.0).unwrap();
        let n = data.len();
        let mut order: Vec<usize> = (0..n).collect();
        let scores: Vec<f64> = (0..n)
            .map(|i| w.iter().zip(data.row(i)).map(|(a, b)| a * b).sum())
            .collect();
        order.sort_by(|&i, &j| scores[i].partial_cmp(&scores[j]).unwrap());
        let z: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
        let y: Vec<f64> = order.iter().map(|&i| data.label(i)).collect();
        let v: Vec<f64> = z.iter().map(|&zi| link.eval(zi)).collect();
        let sol = Solution { objective: 0.0, v };
        let comparators: Vec<Link> = (0..20)
            .map(|_| random_link(&mut rng, 1.0, beta, 0.0))
            .collect();
        if let Some(cert) = check_bir_optimality_certificate(&sol, &y, &z, beta, &comparators) {
            worst = worst.min(cert);
            assert!(cert >= -1e-6);
        }
    }
    println!("oracle contract: PASS (min certificate {worst:.2e})");
}
