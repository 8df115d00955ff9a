//! Acceptance suite: twelve criteria, one PASS/FAIL line each.
//!
//! Criteria 7 to 11 share one cache of simulated runs (five seeds of the
//! default 13140 h scenario, offset 0, one repeat). Each criterion's time is
//! the compute time of the runs it uses plus its own work, whether or not an
//! earlier criterion already paid for them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use aqcal::cli::{cmd_run, cmd_simulate, RunArgs, SimulateArgs};
use aqcal::dataset::{Flag, ModelKind};
use aqcal::experiment::{initial_model, run_cell_from, CellSpec, ExperimentConfig, InitialModel, LabeledStream, RunTrace, Strategy};
use aqcal::metrics::{compute_metrics, smooth_series};
use aqcal::models::{elm_fit, elm_refit, elm_update, ols_fit, snn_gradient, ElmConfig, Sample, SnnModel, SnnNet};
use aqcal::preprocess::{dbscan_outliers, DbscanParams, Standardizer, StandardizeDims};
use aqcal::schedule::{enumerate_grid, enumerate_grid_with, UpdateMode, PI_SET, TAU_SET};
use aqcal::simulate::{default_scenario, generate};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const SCENARIO_HOURS: usize = 13140;
const MONTH: i64 = 730 * 3600;

struct Outcome {
    pass: bool,
    detail: String,
    secs: f64,
    budget: f64,
}

fn line(id: usize, name: &str, o: &Outcome) -> String {
    let within = o.secs <= o.budget;
    let status = if o.pass && within { "PASS" } else { "FAIL" };
    let time = format!("{:.1}s of {:.0}s budget{}", o.secs, o.budget, if within { "" } else { " EXCEEDED" });
    format!("[{status}] {id:>2} {name}: {} ({time})", o.detail)
}

fn rel_inf(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

// ---------------------------------------------------------------- 1

fn ols_oracle() -> Outcome {
    let clock = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<[f64; 8]> = (0..200)
            .map(|_| std::array::from_fn(|k| rng.gen_range(-1.0..1.0) * (k + 1) as f64 * 10.0 + 50.0))
            .collect();
        let y: Vec<f64> = (0..200).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let got = ols_fit(&x, &y).expect("full-rank problem").weights;
        let a = DMatrix::from_fn(200, 9, |i, j| if j < 8 { x[i][j] } else { 1.0 });
        let pinv = (a.transpose() * &a).pseudo_inverse(1e-300).expect("svd converges");
        let oracle = pinv * a.transpose() * DVector::from_column_slice(&y);
        worst = worst.max(rel_inf(&got, oracle.as_slice()));
    }
    Outcome {
        pass: worst < 1e-8,
        detail: format!("max relative deviation {worst:.2e} over 20 problems (tol 1e-8)"),
        secs: clock.elapsed().as_secs_f64(),
        budget: 1.0,
    }
}

// ---------------------------------------------------------------- 2

fn labeled_samples(hours: usize, seed: u64) -> Vec<Sample> {
    let mut s = default_scenario(hours);
    s.seed = seed;
    LabeledStream::from_dataset(&generate(&s).expect("valid scenario").dataset).samples
}

fn rls_batch() -> Outcome {
    let clock = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let data = labeled_samples(700, 100 + seed);
        let data = &data[..600];
        let first = elm_fit(&data[..300], 25, seed, &ElmConfig::default()).expect("fit");
        let updated = elm_update(&first, &data[300..]).expect("update");
        let batch = elm_refit(&first, data).expect("batch fit");
        worst = worst.max(rel_inf(&updated.weights, &batch.weights));
    }
    Outcome {
        pass: worst < 1e-6,
        detail: format!("max relative weight deviation {worst:.2e} over 10 seeds (tol 1e-6)"),
        secs: clock.elapsed().as_secs_f64(),
        budget: 5.0,
    }
}

// ---------------------------------------------------------------- 3

fn gradient_check() -> Outcome {
    let clock = Instant::now();
    let batch = &labeled_samples(200, 31)[..60];
    let rows: Vec<[f64; 9]> = batch
        .iter()
        .map(|s| std::array::from_fn(|k| if k < 8 { s.x[k] } else { s.y }))
        .collect();
    let names = ["a", "b", "c", "d", "e", "f", "g", "h", "y"];
    let standardizer = Standardizer::fit(&rows, &names).expect("non-degenerate batch");
    let z: Vec<[f64; 8]> = rows
        .iter()
        .map(|r| std::array::from_fn(|k| standardizer.transform_dim(k, r[k])))
        .collect();
    let t: Vec<f64> = rows.iter().map(|r| standardizer.transform_dim(8, r[8])).collect();

    let mut worst = 0.0f64;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = SnnNet {
            hidden: 3,
            params: (0..SnnNet::n_params(3)).map(|_| rng.gen_range(-1.5..1.5)).collect(),
        };
        let (alpha, beta) = (rng.gen_range(0.01..2.0), rng.gen_range(0.1..5.0));
        let model = SnnModel {
            net: net.clone(),
            alpha,
            beta,
            standardizer: standardizer.clone(),
            seed,
        };
        let g = snn_gradient(&model, batch);
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let h = 1e-6;
        for k in 0..net.params.len() {
            let mut plus = net.clone();
            plus.params[k] += h;
            let mut minus = net.clone();
            minus.params[k] -= h;
            let fd = (plus.objective(&z, &t, alpha, beta) - minus.objective(&z, &t, alpha, beta)) / (2.0 * h);
            let denom = g[k].abs().max(fd.abs()).max(1e-6 * scale);
            worst = worst.max((g[k] - fd).abs() / denom);
        }
    }
    Outcome {
        pass: worst < 1e-5,
        detail: format!("max relative error {worst:.2e} on 10 random 8-3-1 nets (tol 1e-5)"),
        secs: clock.elapsed().as_secs_f64(),
        budget: 5.0,
    }
}

// ---------------------------------------------------------------- 4

fn naive_metrics(y: &[f64], p: &[f64], floor: f64) -> [f64; 5] {
    let n = y.len() as f64;
    let mut abs = 0.0;
    let mut sq = 0.0;
    let mut rel = 0.0;
    let mut n_rel = 0.0;
    let (mut lo, mut hi, mut mean) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for i in 0..y.len() {
        let e = p[i] - y[i];
        abs += e.abs();
        sq += e * e;
        if y[i] >= floor {
            rel += e.abs() / y[i];
            n_rel += 1.0;
        }
        lo = lo.min(y[i]);
        hi = hi.max(y[i]);
        mean += y[i];
    }
    mean /= n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mae = abs / n;
    let rmse = (sq / n).sqrt();
    [mae, mae / (hi - lo), rel / n_rel, rmse, rmse / var.sqrt()]
}

fn metrics_oracle() -> Outcome {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(2..400);
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..120.0)).collect();
        let p: Vec<f64> = y.iter().map(|v| v + rng.gen_range(-15.0..15.0)).collect();
        let got = compute_metrics(&y, &p, 1.0).expect("valid vectors").values();
        let want = naive_metrics(&y, &p, 1.0);
        for (g, w) in got.iter().zip(want) {
            worst = worst.max((g - w).abs() / w.abs().max(1.0));
        }
    }
    let mut hand = Vec::new();
    let ident = compute_metrics(&[5.0, 9.0, 30.0], &[5.0, 9.0, 30.0], 1.0).expect("identity");
    hand.push(ident.values() == [0.0; 5]);
    let pair = compute_metrics(&[10.0, 20.0], &[12.0, 16.0], 1.0).expect("pair");
    hand.push(pair.mae == 3.0 && pair.rmse == 10f64.sqrt() && pair.mre == 0.2 && pair.mane == 0.3);
    hand.push(smooth_series(&[4.5; 300], 96).expect("constant") == vec![4.5; 300]);
    let mut impulse = vec![0.0; 500];
    impulse[250] = 1.0;
    let s = smooth_series(&impulse, 96).expect("impulse");
    let plateau: Vec<usize> = (0..500).filter(|&i| s[i] != 0.0).collect();
    hand.push(plateau.len() == 97 && plateau.iter().all(|&i| s[i] == 1.0 / 97.0));
    let short: Vec<f64> = (0..40).map(|i| (i * i) as f64).collect();
    let mean = short.iter().sum::<f64>() / 40.0;
    hand.push(smooth_series(&short, 96).expect("short").iter().all(|v| (v - mean).abs() <= 1e-12 * mean));
    let hand_ok = hand.iter().filter(|h| **h).count();
    Outcome {
        pass: worst <= 1e-12 && hand_ok == hand.len(),
        detail: format!("max deviation {worst:.1e} on 100 vectors (tol 1e-12); hand cases {hand_ok}/{}", hand.len()),
        secs: clock.elapsed().as_secs_f64(),
        budget: 1.0,
    }
}

// ---------------------------------------------------------------- 5

fn grid_enumeration() -> Outcome {
    let clock = Instant::now();
    let mut brute = Vec::new();
    for t in TAU_SET {
        for p in PI_SET {
            if p < t {
                brute.push((t, p));
            }
        }
    }
    let strict = enumerate_grid();
    let loose = enumerate_grid_with(true);
    let extra: Vec<(usize, usize)> = loose.iter().filter(|c| !strict.contains(c)).copied().collect();
    let pass = strict == brute
        && strict.len() == 28
        && !strict.contains(&(12, 12))
        && extra == vec![(12, 12), (24, 24), (120, 120)]
        && loose.contains(&(120, 120));
    Outcome {
        pass,
        detail: format!("{} strict pairs (brute force {}), pi = tau adds {:?}", strict.len(), brute.len(), extra),
        secs: clock.elapsed().as_secs_f64(),
        budget: 1.0,
    }
}

// ---------------------------------------------------------------- 6

/// Textbook O(n²) DBSCAN; returns the noise set.
fn reference_noise(points: &[Vec<f64>], eps: f64, min_pts: usize) -> BTreeSet<usize> {
    let n = points.len();
    let near = |a: usize, b: usize| points[a].iter().zip(&points[b]).map(|(x, y)| (x - y).powi(2)).sum::<f64>() <= eps * eps;
    let neighbors: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).collect()).collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();
    let mut in_cluster = vec![false; n];
    for i in 0..n {
        if core[i] && !in_cluster[i] {
            let mut stack = vec![i];
            in_cluster[i] = true;
            while let Some(p) = stack.pop() {
                if !core[p] {
                    continue;
                }
                for &q in &neighbors[p] {
                    if !in_cluster[q] {
                        in_cluster[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
    }
    (0..n).filter(|&i| !in_cluster[i]).collect()
}

fn dbscan_equivalence() -> Outcome {
    let clock = Instant::now();
    let mut agree = 0;
    let mut flagged_total = 0;
    for k in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + k);
        let hours = rng.gen_range(150..=500);
        let mut s = default_scenario(hours + 40);
        s.seed = 600 + k;
        let mut d = generate(&s).expect("scenario").dataset;
        d.records.truncate(hours);
        for r in d.records.iter_mut() {
            if rng.gen_bool(0.03) {
                r.features.we_no2 += rng.gen_range(-40.0..40.0);
                r.ref_no2 = r.ref_no2.map(|y| y + rng.gen_range(0.0..60.0));
            }
        }
        let eps = [0.8, 1.0, 1.5][k as usize % 3];
        let min_pts = [5, 8, 12][k as usize % 3];
        let params = DbscanParams {
            eps,
            min_pts,
            space: StandardizeDims::FeaturesAndLabel,
        };
        let (out, _) = dbscan_outliers(&d, &params).expect("dbscan");
        let got: BTreeSet<usize> = (0..out.len()).filter(|&i| out.records[i].flags.contains(Flag::Outlier)).collect();

        let rows: Vec<Vec<f64>> = d
            .records
            .iter()
            .map(|r| {
                let mut v = r.features.to_array().to_vec();
                v.push(r.ref_no2.expect("simulated records are labeled"));
                v
            })
            .collect();
        let n = rows.len() as f64;
        let dims = rows[0].len();
        let mean: Vec<f64> = (0..dims).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let sd: Vec<f64> = (0..dims)
            .map(|j| (rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
            .collect();
        let z: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| (0..dims).map(|j| (r[j] - mean[j]) / sd[j]).collect())
            .collect();
        let want = reference_noise(&z, eps, min_pts);
        flagged_total += want.len();
        if got == want {
            agree += 1;
        }
    }
    Outcome {
        pass: agree == 20,
        detail: format!("{agree}/20 datasets identical to the O(n^2) reference ({flagged_total} outliers in total)"),
        secs: clock.elapsed().as_secs_f64(),
        budget: 10.0,
    }
}

// ---------------------------------------------------------------- shared runs

struct Seeded {
    stream: LabeledStream,
    cfg: ExperimentConfig,
    end: i64,
    inits: HashMap<ModelKind, (InitialModel, f64)>,
}

struct CachedRun {
    trace: RunTrace,
    mae: f64,
    secs: f64,
}

struct Lab {
    seeds: BTreeMap<u64, Seeded>,
    runs: HashMap<(u64, CellSpec, usize), CachedRun>,
}

impl Lab {
    fn new() -> (Lab, f64) {
        let clock = Instant::now();
        let mut seeds = BTreeMap::new();
        for seed in SEEDS {
            let mut s = default_scenario(SCENARIO_HOURS);
            s.seed = seed;
            let sim = generate(&s).expect("default scenario");
            let end = sim.truth.last().expect("non-empty").timestamp + 3600;
            let cfg = ExperimentConfig {
                offsets: vec![0],
                init_repeats: 1,
                master_seed: seed,
                ..ExperimentConfig::default()
            };
            seeds.insert(
                seed,
                Seeded {
                    stream: LabeledStream::from_dataset(&sim.dataset),
                    cfg,
                    end,
                    inits: HashMap::new(),
                },
            );
        }
        (
            Lab {
                seeds,
                runs: HashMap::new(),
            },
            clock.elapsed().as_secs_f64(),
        )
    }

    /// Runs (or recalls) one cell; `span` overrides the test span.
    fn run(&mut self, seed: u64, cell: CellSpec, span: Option<usize>) -> (&CachedRun, f64) {
        let s = self.seeds.get_mut(&seed).expect("known seed");
        let span = span.unwrap_or(s.cfg.test_span);
        let mut init_secs = 0.0;
        if !s.inits.contains_key(&cell.kind) {
            let clock = Instant::now();
            let m = initial_model(&s.stream, &s.cfg, cell.kind, 0, 0).expect("initial model");
            s.inits.insert(cell.kind, (m, clock.elapsed().as_secs_f64()));
        }
        let (init, init_cost) = &s.inits[&cell.kind];
        init_secs += init_cost;
        let key = (seed, cell, span);
        if !self.runs.contains_key(&key) {
            let cfg = ExperimentConfig {
                test_span: span,
                ..s.cfg.clone()
            };
            let clock = Instant::now();
            let trace = run_cell_from(&s.stream, &cfg, &cell, 0, 0, init).expect("cell run");
            let secs = clock.elapsed().as_secs_f64();
            trace.verify().expect("trace invariants");
            let mae = trace.metrics(&cfg.metrics).expect("metrics").mae;
            self.runs.insert(key, CachedRun { trace, mae, secs });
        }
        let r = &self.runs[&key];
        let cost = r.secs + init_secs;
        (r, cost)
    }

    fn mae(&mut self, cell: CellSpec, cost: &mut f64) -> f64 {
        let mut sum = 0.0;
        for seed in SEEDS {
            let (r, c) = self.run(seed, cell, None);
            sum += r.mae;
            *cost += c;
        }
        sum / SEEDS.len() as f64
    }
}

fn isnn(tau: usize, pi: usize, mode: UpdateMode) -> CellSpec {
    CellSpec {
        kind: ModelKind::Snn,
        strategy: Strategy::IncrementalRetrain,
        schedule: Some((tau, pi, mode)),
    }
}

// ---------------------------------------------------------------- 7

fn drift_degradation(lab: &mut Lab, setup: f64) -> Outcome {
    let mut cost = setup;
    let (mut first_sum, mut last_sum) = (0.0, 0.0);
    let mut ratios = Vec::new();
    for seed in SEEDS {
        let span = lab.seeds[&seed].stream.len() - lab.seeds[&seed].cfg.initial_window;
        let end = lab.seeds[&seed].end;
        let (r, c) = lab.run(seed, CellSpec::fixed(ModelKind::Snn), Some(span));
        cost += c;
        let pts = &r.trace.points;
        let start = pts[0].timestamp;
        let window_mae = |from: i64, to: i64| {
            let sel: Vec<f64> = pts
                .iter()
                .filter(|p| p.timestamp >= from && p.timestamp < to)
                .map(|p| (p.pred - p.truth).abs())
                .collect();
            sel.iter().sum::<f64>() / sel.len() as f64
        };
        let first = window_mae(start, start + MONTH);
        let last = window_mae(end - 3 * MONTH, end);
        first_sum += first;
        last_sum += last;
        ratios.push(last / first);
    }
    let ratio = last_sum / first_sum;
    Outcome {
        pass: ratio >= 1.25,
        detail: format!(
            "static SNN MAE final 3 months {:.2} vs first month {:.2} ppb, ratio {ratio:.2} (need >= 1.25; per seed {})",
            last_sum / 5.0,
            first_sum / 5.0,
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join("/")
        ),
        secs: cost,
        budget: 300.0,
    }
}

// ---------------------------------------------------------------- 8

fn adaptation_benefit(lab: &mut Lab) -> Outcome {
    let mut cost = 0.0;
    let s_snn = lab.mae(CellSpec::fixed(ModelKind::Snn), &mut cost);
    let a_snn = lab.mae(isnn(2, 1, UpdateMode::Regular), &mut cost);
    let s_elm = lab.mae(CellSpec::fixed(ModelKind::Elm), &mut cost);
    let a_elm = lab.mae(CellSpec::adaptive(ModelKind::Elm, 2, 1, UpdateMode::Regular), &mut cost);
    let g_snn = 1.0 - a_snn / s_snn;
    let g_elm = 1.0 - a_elm / s_elm;
    Outcome {
        pass: g_snn >= 0.35 && g_elm >= 0.25,
        detail: format!(
            "iSNN(2,1) {a_snn:.2} vs static {s_snn:.2} ppb: -{:.1}% (need 35%); aELM(2,1) {a_elm:.2} vs static {s_elm:.2}: -{:.1}% (need 25%)",
            100.0 * g_snn,
            100.0 * g_elm
        ),
        secs: cost,
        budget: 900.0,
    }
}

// ---------------------------------------------------------------- 9

fn ordering(lab: &mut Lab) -> Outcome {
    let mut cost = 0.0;
    let r = UpdateMode::Regular;
    let m21 = lab.mae(isnn(2, 1, r), &mut cost);
    let m720 = lab.mae(isnn(720, 168, r), &mut cost);
    let m24_12 = lab.mae(isnn(24, 12, r), &mut cost);
    let m24_1 = lab.mae(isnn(24, 1, r), &mut cost);
    let column: Vec<f64> = [1, 4, 12, 24, 120].iter().map(|&p| lab.mae(isnn(240, p, r), &mut cost)).collect();
    let inversions = column.windows(2).filter(|w| w[1] > w[0]).count();
    Outcome {
        pass: m21 < m720 && m24_12 < m24_1 && inversions <= 1,
        detail: format!(
            "(2,1) {m21:.2} < (720,168) {m720:.2}; (24,12) {m24_12:.2} < (24,1) {m24_1:.2}; tau=240 column {} with {inversions} inversion(s)",
            column.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(" ")
        ),
        secs: cost,
        budget: 1800.0,
    }
}

// ---------------------------------------------------------------- 10

fn regular_vs_opportunistic(lab: &mut Lab) -> Outcome {
    let mut cost = 0.0;
    let grid = enumerate_grid();
    let mut close = 0;
    let mut worst = (0.0f64, (0, 0));
    for &(tau, pi) in &grid {
        let reg = lab.mae(isnn(tau, pi, UpdateMode::Regular), &mut cost);
        let opp = lab.mae(isnn(tau, pi, UpdateMode::Opportunistic), &mut cost);
        let diff = (reg - opp).abs() / reg;
        if diff < 0.2 {
            close += 1;
        }
        if diff > worst.0 {
            worst = (diff, (tau, pi));
        }
    }
    let share = close as f64 / grid.len() as f64;
    Outcome {
        pass: share >= 0.8,
        detail: format!(
            "{close}/{} cells within 20% ({:.0}%, need 80%); largest gap {:.1}% at {:?}",
            grid.len(),
            100.0 * share,
            100.0 * worst.0,
            worst.1
        ),
        secs: cost,
        budget: 1800.0,
    }
}

// ---------------------------------------------------------------- 11

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn fixed_cost(lab: &mut Lab) -> Outcome {
    let clock = Instant::now();
    let mut early = Vec::new();
    let mut late = Vec::new();
    let mut rhos = Vec::new();
    for seed in SEEDS {
        let (r, _) = lab.run(seed, CellSpec::adaptive(ModelKind::Elm, 2, 1, UpdateMode::Regular), None);
        let a = &r.trace.adaptations;
        early.extend(a[..10].iter().map(|x| x.wall_secs));
        late.extend(a[a.len() - 10..].iter().map(|x| x.wall_secs));
        let (r, _) = lab.run(seed, isnn(2, 1, UpdateMode::Regular), None);
        let sizes: Vec<f64> = r.trace.adaptations.iter().map(|x| x.train_size as f64).collect();
        let times: Vec<f64> = r.trace.adaptations.iter().map(|x| x.wall_secs).collect();
        rhos.push(spearman(&sizes, &times));
    }
    let (m_early, m_late) = (median(early), median(late));
    let ratio = m_late / m_early;
    let min_rho = rhos.iter().copied().fold(f64::INFINITY, f64::min);
    Outcome {
        pass: ratio <= 2.0 && min_rho > 0.0,
        detail: format!(
            "aELM median update {:.1} us late vs {:.1} us early, ratio {ratio:.2} (need <= 2); iSNN size/time Spearman min {min_rho:.2} over seeds (need > 0)",
            m_late * 1e6,
            m_early * 1e6
        ),
        secs: clock.elapsed().as_secs_f64(),
        budget: 900.0,
    }
}

// ---------------------------------------------------------------- 12

fn run_args(out: &Path) -> RunArgs {
    RunArgs {
        data: None,
        config: None,
        manifest: None,
        out_dir: out.to_path_buf(),
        grid: None,
        mode: None,
        models: None,
        offsets: None,
        repeats: None,
        test_span: None,
        initial_window: None,
        seed: None,
        allow_pi_eq_tau: false,
        warm_start: false,
        eval_window: None,
        traces: false,
        workers: None,
    }
}

fn determinism() -> Outcome {
    let clock = Instant::now();
    let dir = tempfile::tempdir().expect("temp dir");
    let data = dir.path().join("data.csv");
    cmd_simulate(&SimulateArgs {
        scenario: None,
        duration: Some(2400),
        seed: Some(11),
        out: data.clone(),
        truth_out: None,
        scenario_out: None,
    })
    .expect("simulate");
    let first = RunArgs {
        data: Some(data),
        grid: Some("24:12,120:24,720:168".into()),
        mode: Some(aqcal::cli::ModeArg::Both),
        models: Some("snn,isnn,aelm,ilinear".into()),
        offsets: Some("0,168".into()),
        repeats: Some(2),
        test_span: Some(1200),
        initial_window: Some(336),
        seed: Some(99),
        traces: true,
        ..run_args(&dir.path().join("a"))
    };
    let a = cmd_run(&first).expect("first run");
    let manifest = dir.path().join("a").join("manifest.json");
    let rerun = |name: &str, workers: Option<usize>| {
        cmd_run(&RunArgs {
            manifest: Some(manifest.clone()),
            workers,
            ..run_args(&dir.path().join(name))
        })
        .expect("rerun from manifest")
    };
    let b = rerun("b", None);
    let c = rerun("c", Some(3));
    let read = |name: &str, file: &str| std::fs::read(dir.path().join(name).join(file)).expect("report file");
    let identical = ["report.csv", "report.json"]
        .iter()
        .all(|f| read("a", f) == read("b", f) && read("a", f) == read("c", f));
    let same_digest = a.manifest.report_sha256 == b.manifest.report_sha256 && b.manifest.report_sha256 == c.manifest.report_sha256;
    Outcome {
        pass: identical && same_digest,
        detail: format!(
            "3 executions ({} cells, workers default/default/3): reports byte-identical {identical}, digest {}",
            a.report.cells.len(),
            &a.manifest.report_sha256[..16]
        ),
        secs: clock.elapsed().as_secs_f64(),
        budget: 120.0,
    }
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters from the default harness are not supported here
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    println!("acceptance criteria");
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |id: usize, name: &'static str, o: Outcome| {
        println!("{}", line(id, name, &o));
        results.push((id, name, o));
    };
    report(1, "OLS oracle", ols_oracle());
    report(2, "RLS equals batch", rls_batch());
    report(3, "gradient check", gradient_check());
    report(4, "metrics oracle", metrics_oracle());
    report(5, "grid enumeration", grid_enumeration());
    report(6, "DBSCAN equivalence", dbscan_equivalence());
    let (mut lab, setup) = Lab::new();
    report(7, "drift degradation", drift_degradation(&mut lab, setup));
    report(8, "adaptation benefit", adaptation_benefit(&mut lab));
    report(9, "ordering reproduction", ordering(&mut lab));
    report(10, "regular vs opportunistic", regular_vs_opportunistic(&mut lab));
    report(11, "fixed-cost adaptation", fixed_cost(&mut lab));
    report(12, "determinism", determinism());
    let failed: Vec<usize> = results
        .iter()
        .filter(|(_, _, o)| !(o.pass && o.secs <= o.budget))
        .map(|(id, _, _)| *id)
        .collect();
    if failed.is_empty() {
        println!("all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
