//! Command-line harness: dataset generation, training, omnigap
//! certification, solver benchmarks, and reproduction checks.

mod svg;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use omnipred::bir::{solve_bir, solve_bir_reference, Instance};
use omnipred::data::{
    gen_agnostic, gen_realizable, load_dataset_csv, save_dataset_csv, save_meta, Dataset,
    DatasetMeta, LabelMode,
};
use omnipred::evalgap::{
    build_link_grid_with, build_weight_grid, counterexample_fixture, sweep_max, sweep_model,
    sweep_point, ComparatorGrid, PointPredictor, SweepRow,
};
use omnipred::learners::{
    empirical_sq_loss, ideal_omnitron_fit, isotron_fit, omnitron_fit, MultiIndexModel, TrainConfig,
};
use omnipred::links::PiecewiseLinearLink;
use omnipred::pav::{pav_fit, StepPredictor, WeightedPoint1D};
use omnipred::rng::Rng;
use omnipred::Link;

#[derive(Parser)]
#[command(
    name = "omnipred",
    version,
    about = "single-index omniprediction toolkit"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenModel {
    Realizable,
    Flip10,
    Xor2d,
    Heavytail,
}

#[derive(Clone, Copy, ValueEnum)]
enum Labels {
    Expected,
    Bernoulli,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Algo {
    Isotron,
    IdealOmnitron,
    Omnitron,
    Pav,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReproTarget {
    Counterexample,
    PavOmnigap,
    IsotronRealizable,
    ErmOmni,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset (CSV + JSON sidecar)
    Generate {
        #[arg(long, value_enum)]
        model: GenModel,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// feature radius L
        #[arg(long, default_value_t = 1.0)]
        l: f64,
        /// label mode for realizable data
        #[arg(long, value_enum, default_value_t = Labels::Expected)]
        labels: Labels,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a predictor and write model JSON plus a per-iteration trace
    Train {
        #[arg(long, value_enum)]
        algo: Algo,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 100)]
        t: usize,
        /// step size; defaults to the algorithm's analysis value
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 0.0)]
        alpha_smooth: f64,
        /// samples reserved for the gradient stream (omnitron only)
        #[arg(long)]
        stream_len: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep a comparator grid and report omnigap / pl-gap per pair
    EvalOmnigap {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        grid_eps: f64,
        #[arg(long, default_value_t = 64)]
        grid_cap: usize,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time the exact solver (and the reference oracle on small sizes)
    BenchBir {
        /// comma-separated instance sizes
        #[arg(long, default_value = "1000,10000,100000,1000000")]
        sizes: String,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run a pinned scenario and report measured vs required values
    Repro {
        #[arg(long, value_enum)]
        target: ReproTarget,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let io_like = e.chain().any(|c| {
                c.downcast_ref::<std::io::Error>().is_some()
                    || matches!(
                        c.downcast_ref::<omnipred::Error>(),
                        Some(omnipred::Error::Io { .. })
                    )
            });
            if io_like {
                ExitCode::from(3)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

/// Twelve significant digits, the fixed numeric print format.
fn sig12(x: f64) -> String {
    format!("{x:.11e}")
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn run(cmd: Cmd) -> anyhow::Result<ExitCode> {
    match cmd {
        Cmd::Generate {
            model,
            d,
            n,
            seed,
            l,
            labels,
            out,
        } => cmd_generate(model, d, n, seed, l, labels, &out),
        Cmd::Train {
            algo,
            data,
            t,
            eta,
            beta,
            r,
            alpha_smooth,
            stream_len,
            seed,
            out,
        } => cmd_train(
            algo,
            &data,
            t,
            eta,
            beta,
            r,
            alpha_smooth,
            stream_len,
            seed,
            &out,
        ),
        Cmd::EvalOmnigap {
            model,
            data,
            grid_eps,
            grid_cap,
            beta,
            r,
            seed,
            out,
        } => cmd_eval(&model, &data, grid_eps, grid_cap, beta, r, seed, &out),
        Cmd::BenchBir {
            sizes,
            trials,
            seed,
            out,
        } => cmd_bench_bir(&sizes, trials, seed, &out),
        Cmd::Repro { target } => cmd_repro(target),
    }
}

fn cmd_generate(
    model: GenModel,
    d: usize,
    n: usize,
    seed: u64,
    l: f64,
    labels: Labels,
    out: &Path,
) -> anyhow::Result<ExitCode> {
    let mode = match labels {
        Labels::Expected => LabelMode::Expected,
        Labels::Bernoulli => LabelMode::Bernoulli,
    };
    let (dataset, name) = match model {
        GenModel::Realizable => {
            let link = PiecewiseLinearLink::logistic(l);
            let w_star = Rng::stream(seed, 11).unit_vector(d);
            (
                gen_realizable(d, n, &link, &w_star, seed, mode, l)?,
                "realizable",
            )
        }
        GenModel::Flip10 => (gen_agnostic(d, n, seed, "flip10", l)?, "flip10"),
        GenModel::Xor2d => (gen_agnostic(d, n, seed, "xor2d", l)?, "xor2d"),
        GenModel::Heavytail => (gen_agnostic(d, n, seed, "heavytail", l)?, "heavytail"),
    };
    ensure_dir(out)?;
    let csv_path = out.join("data.csv");
    save_dataset_csv(&dataset, &csv_path)?;
    save_meta(
        &DatasetMeta {
            l,
            d,
            n,
            seed,
            generator: name.to_string(),
        },
        &out.join("data.json"),
    )?;
    println!("wrote {} rows to {}", dataset.len(), csv_path.display());
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    algo: Algo,
    data_path: &Path,
    t: usize,
    eta: Option<f64>,
    beta: f64,
    r: f64,
    alpha_smooth: f64,
    stream_len: Option<usize>,
    seed: u64,
    out: &Path,
) -> anyhow::Result<ExitCode> {
    let data = load_dataset_csv(data_path)?;
    let l = data.radius_l();
    ensure_dir(out)?;
    let model_path = out.join("model.json");
    let trace_path = out.join("trace.csv");
    let mut trace = String::from("t,sq_loss,grad_norm\n");

    match algo {
        Algo::Pav => {
            if data.dim() != 1 {
                bail!("pav requires one-dimensional data, got d = {}", data.dim());
            }
            let pts: Vec<WeightedPoint1D<f64>> = (0..data.len())
                .map(|i| WeightedPoint1D::unit(data.row(i)[0], data.label(i)))
                .collect();
            let pred = pav_fit(&pts)?;
            let sq: f64 = pts
                .iter()
                .map(|p| (pred.eval(p.x) - p.y).powi(2))
                .sum::<f64>()
                / pts.len() as f64;
            let _ = writeln!(trace, "0,{},{}", sig12(sq), sig12(0.0));
            write_file(&model_path, &serde_json::to_string(&pred)?)?;
        }
        Algo::Isotron | Algo::IdealOmnitron => {
            let config = TrainConfig {
                t,
                eta: eta.unwrap_or_else(|| {
                    if algo == Algo::Isotron {
                        TrainConfig::eta_realizable(beta, l)
                    } else {
                        TrainConfig::eta_averaged(r, l, t)
                    }
                }),
                beta,
                r,
                alpha_smooth,
                seed,
            };
            let full = isotron_fit(&data, &config)?;
            for (i, s) in full.steps.iter().enumerate() {
                let _ = writeln!(trace, "{i},{},{}", sig12(s.sq_loss), sig12(s.grad_norm));
            }
            let model = if algo == Algo::Isotron {
                // keep the best iterate as a single-head model
                let best = full
                    .steps
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.sq_loss.partial_cmp(&b.1.sq_loss).unwrap())
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                single_head_model(&full.steps[best].link, &full.steps[best].w, l, r)
            } else {
                ideal_omnitron_fit(&data, &config)?
            };
            write_file(&model_path, &model.to_json())?;
        }
        Algo::Omnitron => {
            let k = stream_len.unwrap_or(t);
            if data.len() <= k {
                bail!(
                    "need more than {k} rows to reserve a gradient stream, got {}",
                    data.len()
                );
            }
            let (oracle_data, stream) = data.split_at(data.len() - k)?;
            let config = TrainConfig {
                t,
                eta: eta.unwrap_or_else(|| TrainConfig::eta_stochastic(r, l, t)),
                beta,
                r,
                alpha_smooth,
                seed,
            };
            let model = omnitron_fit(&oracle_data, &stream, &config)?;
            for ti in 0..model.head_count() {
                let (link, w) = model.head(ti);
                let sq = empirical_sq_loss(link, w, &oracle_data);
                let x = stream.row(ti);
                let resid =
                    link.eval(w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()) - stream.label(ti);
                let gnorm = x.iter().map(|xi| (resid * xi).powi(2)).sum::<f64>().sqrt();
                let _ = writeln!(trace, "{ti},{},{}", sig12(sq), sig12(gnorm));
            }
            write_file(&model_path, &model.to_json())?;
        }
    }
    write_file(&trace_path, &trace)?;
    println!(
        "wrote {} and {}",
        model_path.display(),
        trace_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn single_head_model(link: &Link, w: &[f64], l: f64, r: f64) -> MultiIndexModel {
    let json = format!(
        "{{\"L\":{l},\"R\":{r},\"heads\":[{{\"link\":{},\"w\":{}}}]}}",
        serde_json::to_string(link).expect("serializable"),
        serde_json::to_string(w).expect("serializable"),
    );
    MultiIndexModel::from_json(&json).expect("valid model json")
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    model_path: &Path,
    data_path: &Path,
    grid_eps: f64,
    grid_cap: usize,
    beta: f64,
    r: f64,
    seed: u64,
    out: &Path,
) -> anyhow::Result<ExitCode> {
    let data = load_dataset_csv(data_path)?;
    let model_text = std::fs::read_to_string(model_path)
        .with_context(|| format!("reading {}", model_path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&model_text)?;

    let lr = data.radius_l() * r;
    let grid = ComparatorGrid {
        links: build_link_grid_with(beta, lr, grid_eps, grid_cap, seed)?,
        weights: build_weight_grid(data.dim(), r, seed),
    };

    let rows: Vec<SweepRow> = if value.get("heads").is_some() {
        let model = MultiIndexModel::from_json(&model_text)?;
        let (_, w0) = model.head(0);
        if w0.len() != data.dim() {
            bail!(
                "model dimension {} does not match data dimension {}",
                w0.len(),
                data.dim()
            );
        }
        sweep_model(&model, &grid, &data)?
    } else if value.get("direction").is_some() {
        if data.dim() != 1 {
            bail!("step predictor models need one-dimensional data");
        }
        let step: StepPredictor<f64> = serde_json::from_str(&model_text)?;
        sweep_point(&PointPredictor::Step(step), &grid, &data)?
    } else {
        bail!("unrecognized model JSON (expected multi-index or step predictor)");
    };

    ensure_dir(out)?;
    let mut csv = String::from("link_id,weight_id,omnigap,pl_gap\n");
    for row in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            row.link_id,
            row.weight_id,
            sig12(row.omnigap),
            sig12(row.pl_gap)
        );
    }
    write_file(&out.join("omnigap.csv"), &csv)?;

    let max_gap = sweep_max(&rows).ok_or_else(|| anyhow!("empty sweep"))?;
    let max_og = rows
        .iter()
        .reduce(|a, b| if b.omnigap > a.omnigap { b } else { a })
        .unwrap();
    let summary = serde_json::json!({
        "pairs": rows.len(),
        "grid_eps": grid_eps,
        "grid_cap": grid_cap,
        "max_omnigap": max_og.omnigap,
        "argmax_omnigap": {"link_id": max_og.link_id, "weight_id": max_og.weight_id},
        "max_pl_gap": max_gap.pl_gap,
        "argmax_pl_gap": {"link_id": max_gap.link_id, "weight_id": max_gap.weight_id},
    });
    write_file(
        &out.join("summary.json"),
        &serde_json::to_string_pretty(&summary)?,
    )?;
    println!(
        "max omnigap {} at ({}, {}); max pl-gap {} at ({}, {})",
        sig12(max_og.omnigap),
        max_og.link_id,
        max_og.weight_id,
        sig12(max_gap.pl_gap),
        max_gap.link_id,
        max_gap.weight_id
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench_bir(sizes: &str, trials: usize, seed: u64, out: &Path) -> anyhow::Result<ExitCode> {
    let sizes: Vec<usize> = sizes
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| anyhow!("bad size '{s}'")))
        .collect::<anyhow::Result<_>>()?;
    if sizes.is_empty() || trials == 0 {
        bail!("need at least one size and one trial");
    }
    let mut rng = Rng::stream(seed, 12);
    let mut csv = String::from("n,time_ms,algo,objective\n");
    let mut exact_pts = Vec::new();
    let mut ref_pts = Vec::new();
    for &n in &sizes {
        let y: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let a = vec![0.0; n.saturating_sub(1)];
        let b: Vec<f64> = (0..n.saturating_sub(1))
            .map(|_| {
                if rng.below(10) == 0 {
                    1_000.0
                } else {
                    rng.uniform(0.0, 4.0 / n as f64)
                }
            })
            .collect();
        let inst = Instance::new(y, a, b)?;
        let mut best = f64::INFINITY;
        let mut exact_obj = 0.0;
        for _ in 0..trials {
            let t0 = Instant::now();
            let sol = solve_bir(&inst)?;
            best = best.min(t0.elapsed().as_secs_f64() * 1e3);
            exact_obj = sol.objective;
        }
        let _ = writeln!(csv, "{n},{},exact,{}", sig12(best), sig12(exact_obj));
        exact_pts.push((n as f64, best));
        println!(
            "n={n:>8}  exact {best:>10.3} ms  objective {}",
            sig12(exact_obj)
        );
        if n <= 5000 {
            let mut best_ref = f64::INFINITY;
            let mut ref_obj = 0.0;
            for _ in 0..trials {
                let t0 = Instant::now();
                let sol = solve_bir_reference(&inst, 1e-9)?;
                best_ref = best_ref.min(t0.elapsed().as_secs_f64() * 1e3);
                ref_obj = sol.objective;
            }
            let _ = writeln!(csv, "{n},{},reference,{}", sig12(best_ref), sig12(ref_obj));
            ref_pts.push((n as f64, best_ref));
            println!(
                "n={n:>8}  reference {best_ref:>6.3} ms  objective {} (delta {})",
                sig12(ref_obj),
                sig12((exact_obj - ref_obj).abs())
            );
        }
    }
    ensure_dir(out)?;
    write_file(&out.join("bench.csv"), &csv)?;
    let mut series = vec![svg::Series {
        name: "exact",
        color: "#1f77b4",
        points: exact_pts,
    }];
    if !ref_pts.is_empty() {
        series.push(svg::Series {
            name: "reference",
            color: "#d62728",
            points: ref_pts,
        });
    }
    write_file(
        &out.join("bench.svg"),
        &svg::log_log_plot("bounded isotonic regression solve time", &series),
    )?;
    println!("wrote {}", out.join("bench.csv").display());
    Ok(ExitCode::SUCCESS)
}

fn check(name: &str, ok: bool, detail: String, failures: &mut usize) {
    if ok {
        println!("  PASS  {name}: {detail}");
    } else {
        println!("  FAIL  {name}: {detail}");
        *failures += 1;
    }
}

fn cmd_repro(target: ReproTarget) -> anyhow::Result<ExitCode> {
    let mut failures = 0usize;
    let name = match target {
        ReproTarget::Counterexample => "counterexample",
        ReproTarget::PavOmnigap => "pav-omnigap",
        ReproTarget::IsotronRealizable => "isotron-realizable",
        ReproTarget::ErmOmni => "erm-omni",
    };
    match target {
        ReproTarget::Counterexample => {
            let rep = counterexample_fixture();
            println!("counterexample: fixed distribution, sigmoid link, w* = 1");
            check(
                "matching loss at w*",
                rep.ml_at_wstar <= -0.02,
                format!("{} <= -0.02", sig12(rep.ml_at_wstar)),
                &mut failures,
            );
            check(
                "min proper loss over w",
                rep.min_pl_over_w >= 0.01,
                format!("{} >= 0.01", sig12(rep.min_pl_over_w)),
                &mut failures,
            );
            check(
                "gap",
                rep.gap >= 0.03,
                format!("{} >= 0.03", sig12(rep.gap)),
                &mut failures,
            );
        }
        ReproTarget::PavOmnigap => {
            let mut rng = Rng::stream(61, 13);
            let pts: Vec<WeightedPoint1D<f64>> = (0..400)
                .map(|_| WeightedPoint1D::unit(rng.uniform(-1.0, 1.0), rng.next_f64()))
                .collect();
            let pred = pav_fit(&pts)?;
            let features: Vec<f64> = pts.iter().map(|p| p.x).collect();
            let labels: Vec<f64> = pts.iter().map(|p| p.y).collect();
            let data = Dataset::new(features, labels, 1, 1.0)?;
            let weights: Vec<Vec<f64>> = build_weight_grid(1, 1.0, 61)
                .into_iter()
                .filter(|w| w[0] >= 0.0)
                .collect();
            let grid = ComparatorGrid {
                links: build_link_grid_with(1.0, 1.0, 0.1, 10, 61)?,
                weights,
            };
            let rows = sweep_point(&PointPredictor::Step(pred), &grid, &data)?;
            let max_og = rows
                .iter()
                .map(|r| r.omnigap)
                .fold(f64::NEG_INFINITY, f64::max);
            println!(
                "pav-omnigap: PAV fit vs non-decreasing comparator grid ({} pairs)",
                rows.len()
            );
            check(
                "max empirical omnigap",
                max_og <= 1e-9,
                format!("{} <= 1e-9", sig12(max_og)),
                &mut failures,
            );
        }
        ReproTarget::IsotronRealizable => {
            let mut rng = Rng::stream(73, 14);
            let link_star = PiecewiseLinearLink::clipped_relu(1.0);
            let w_star = rng.unit_vector(5);
            let data =
                gen_realizable(5, 10_000, &link_star, &w_star, 73, LabelMode::Expected, 1.0)?;
            let config = TrainConfig {
                t: 100,
                eta: TrainConfig::eta_realizable(1.0, 1.0),
                beta: 1.0,
                r: 1.0,
                alpha_smooth: 0.0,
                seed: 73,
            };
            let trace = isotron_fit(&data, &config)?;
            let best = trace
                .steps
                .iter()
                .map(|s| s.sq_loss)
                .fold(f64::INFINITY, f64::min);
            println!("isotron-realizable: d=5, n=10000, expected labels, T=100");
            check(
                "min excess squared loss",
                best <= 0.01 + 1e-3,
                format!("{} <= 0.011", sig12(best)),
                &mut failures,
            );
        }
        ReproTarget::ErmOmni => {
            let data = omnipred::data::gen_flip(1, 2000, 404, 0.1, 1.0)?;
            let t = 100;
            let config = TrainConfig {
                t,
                eta: TrainConfig::eta_averaged(1.0, 1.0, t),
                beta: 1.0,
                r: 1.0,
                alpha_smooth: 0.0,
                seed: 404,
            };
            let model = ideal_omnitron_fit(&data, &config)?;
            let grid = ComparatorGrid {
                links: build_link_grid_with(1.0, 1.0, 0.025, 64, 404)?,
                weights: build_weight_grid(1, 1.0, 404),
            };
            let rows = sweep_model(&model, &grid, &data)?;
            let worst = sweep_max(&rows).map(|r| r.pl_gap).unwrap_or(f64::INFINITY);
            println!("erm-omni: flip10 1-D ERM run, T=100, eta=R/(L sqrt(T))");
            check(
                "max grid pl-gap",
                worst <= 0.15,
                format!("{} <= 0.15", sig12(worst)),
                &mut failures,
            );
        }
    }
    if failures == 0 {
        println!("repro {name}: all assertions passed");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("repro {name}: {failures} assertion(s) failed");
        Ok(ExitCode::from(1))
    }
}
