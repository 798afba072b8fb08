//! End-to-end acceptance gate. Each criterion prints one `[PASS]` or `[FAIL]`
//! line; the process exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use circaphase::circular::{decode_phase, encode_phase, hours_to_phase, metrics_report};
use circaphase::cosinor::{fit_cosinor, omega};
use circaphase::data_model::Timestamp;
use circaphase::eval::{
    mann_whitney_u, mann_whitney_u_normal, prepare_cohort, report, CvConfig, EvalReport, Experiment,
};
use circaphase::features::{build_dataset, FeatureDataset, Modality, WindowConfig};
use circaphase::synth::{generate_cohort, SynthParams};
use circaphase::trees::{
    fit_model, fit_tree, ForestParams, HyperGrid, HyperParams, TreeConfig, TreeNode,
};
use circaphase::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn circ_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

// ---------------------------------------------------------------------------

fn cosinor_exactness() -> Outcome {
    let start = Instant::now();
    let w = omega::<f64>();
    let pts: Vec<(Timestamp, f64)> = (0..3 * 1440 / 5)
        .map(|i| {
            (
                Timestamp(5 * i),
                37.0 + 0.4 * (w * (5 * i) as f64 + 1.0).cos(),
            )
        })
        .collect();
    let fit = fit_cosinor(&pts).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let (dm, da, dp) = (
        (fit.mesor - 37.0).abs(),
        (fit.amplitude - 0.4).abs(),
        circ_dist(fit.acrophase, 1.0),
    );
    ensure(dm <= 1e-9 && da <= 1e-9 && dp <= 1e-9, || {
        format!("errors M {dm:e}, A {da:e}, phi {dp:e}")
    })?;
    ensure(secs < 1.0, || format!("took {secs:.3} s"))?;
    Ok(format!(
        "|dM| {dm:.1e}, |dA| {da:.1e}, |dphi| {dp:.1e} in {:.1} ms",
        secs * 1e3
    ))
}

fn circular_codec() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut worst_scaled = 0.0f64;
    let mut inexact_decimal = 0usize;
    let n = 1_000_000;
    for _ in 0..n {
        let theta = rng.random_range(0.0..TAU);
        let e = encode_phase(theta).unwrap();
        let back = decode_phase(e.y_sin, e.y_cos).unwrap();
        worst = worst.max(circ_dist(back, theta));
        // power-of-two scales leave the inputs exact, so the decode must be bit-identical
        for c in [2f64.powi(-20), 1.0, 2f64.powi(20)] {
            ensure(
                decode_phase(c * e.y_sin, c * e.y_cos).unwrap().to_bits() == back.to_bits(),
                || format!("scale {c} changed decode of {theta}"),
            )?;
        }
        // decimal scales round c·y before decoding, so only ulp-level agreement is possible
        for c in [1e-6, 1e6] {
            let d = decode_phase(c * e.y_sin, c * e.y_cos).unwrap();
            if d.to_bits() != back.to_bits() {
                inexact_decimal += 1;
                worst_scaled = worst_scaled.max(circ_dist(d, back));
            }
        }
    }
    ensure(worst <= 1e-12, || format!("round trip error {worst:e}"))?;
    ensure(worst_scaled <= 4.0 * f64::EPSILON * TAU, || {
        format!("scaled decode off by {worst_scaled:e}")
    })?;
    Ok(format!(
        "round trip max {worst:.1e} rad over {n}; scales 1, 2^-20, 2^20 bit-exact; \
         scales 1e-6, 1e6 differ in {inexact_decimal} of {} decodes by at most {worst_scaled:.1e} rad \
         (scaled inputs are themselves rounded)",
        2 * n
    ))
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 10_000;
    let pred: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
    let refs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
    let (mut s1, mut s2) = (0.0, 0.0);
    for (&p, &r) in pred.iter().zip(&refs) {
        let d = circ_dist(p, r);
        s1 += d;
        s2 += d * d;
    }
    let (o1, o2) = (s1 / n as f64, s2 / n as f64);
    let m = metrics_report(&pred, &refs).map_err(|e| e.to_string())?;
    ensure(
        (m.mean_abs_error - o1).abs() <= 1e-12 && (m.mean_sq_error - o2).abs() <= 1e-12,
        || {
            format!(
                "mean_abs_error {} vs {o1}, mean_sq_error {} vs {o2}",
                m.mean_abs_error, m.mean_sq_error
            )
        },
    )?;
    let wrap = metrics_report(&[hours_to_phase(23.5)], &[hours_to_phase(0.5)]).unwrap();
    ensure(wrap.cmae_hours == 1.0, || {
        format!("23.5 h vs 0.5 h gave {} h", wrap.cmae_hours)
    })?;
    Ok(format!(
        "mean |err| off by {:.1e}, mean err² off by {:.1e}; 23.5 h vs 0.5 h = 1 h",
        (m.mean_abs_error - o1).abs(),
        (m.mean_sq_error - o2).abs()
    ))
}

// ---------------------------------------------------------------------------

fn sse(rows: &[usize], y: &Matrix<f64>) -> f64 {
    let mut total = 0.0;
    for j in 0..y.n_cols() {
        let mean = rows.iter().map(|&r| y.get(r, j)).sum::<f64>() / rows.len() as f64;
        total += rows
            .iter()
            .map(|&r| (y.get(r, j) - mean).powi(2))
            .sum::<f64>();
    }
    total
}

/// Exhaustive best split of `rows`: every feature, every gap between distinct
/// values. Returns (sse, feature, left rows).
fn brute_split(
    rows: &[usize],
    x: &Matrix<f64>,
    y: &Matrix<f64>,
) -> Option<(f64, usize, BTreeSet<usize>)> {
    let mut best: Option<(f64, usize, BTreeSet<usize>)> = None;
    for f in 0..x.n_cols() {
        let values: BTreeSet<u64> = rows.iter().map(|&r| x.get(r, f).to_bits()).collect();
        let mut distinct: Vec<f64> = values.into_iter().map(f64::from_bits).collect();
        distinct.sort_by(f64::total_cmp);
        for &cut in &distinct[..distinct.len().saturating_sub(1)] {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x.get(i, f) <= cut);
            let s = sse(&l, y) + sse(&r, y);
            if best.as_ref().is_none_or(|b| s < b.0) {
                best = Some((s, f, l.into_iter().collect()));
            }
        }
    }
    best
}

fn check_node(
    nodes: &[TreeNode<f64>],
    i: usize,
    rows: Vec<usize>,
    depth: usize,
    max_depth: usize,
    x: &Matrix<f64>,
    y: &Matrix<f64>,
) -> Result<(), String> {
    let brute = if depth < max_depth {
        brute_split(&rows, x, y)
    } else {
        None
    };
    match (&nodes[i], brute) {
        (TreeNode::Leaf { .. }, None) => Ok(()),
        (TreeNode::Leaf { .. }, Some((s, ..))) if s == sse(&rows, y) => Ok(()),
        (TreeNode::Leaf { .. }, Some(_)) => Err(format!("node {i} is a leaf but a split exists")),
        (TreeNode::Split { .. }, None) => Err(format!("node {i} split where none is possible")),
        (
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            },
            Some((best_sse, best_f, best_left)),
        ) => {
            let (l, r): (Vec<usize>, Vec<usize>) = rows
                .iter()
                .partition(|&&k| x.get(k, *feature) <= *threshold);
            if l.is_empty() || r.is_empty() {
                return Err(format!("node {i} has an empty child"));
            }
            let got = sse(&l, y) + sse(&r, y);
            if got != best_sse {
                return Err(format!("node {i}: sse {got} vs brute force {best_sse}"));
            }
            if *feature == best_f && l.iter().copied().collect::<BTreeSet<_>>() != best_left {
                return Err(format!("node {i}: threshold in a different gap"));
            }
            check_node(nodes, *left, l, depth + 1, max_depth, x, y)?;
            check_node(nodes, *right, r, depth + 1, max_depth, x, y)
        }
    }
}

fn tree_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut splits = 0usize;
    for inst in 0..200 {
        let n = rng.random_range(2..=50);
        let p = rng.random_range(1..=3);
        let depth = rng.random_range(1..=2);
        let k = rng.random_range(1..=2);
        let coarse = inst % 2 == 0;
        let xs: Vec<f64> = (0..n * p)
            .map(|_| {
                if coarse {
                    rng.random_range(0..6) as f64
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        let ys: Vec<f64> = (0..n * k).map(|_| rng.random::<f64>()).collect();
        let (x, y) = (Matrix::new(xs, n, p), Matrix::new(ys, n, k));
        let cfg = TreeConfig {
            max_depth: Some(depth),
            min_samples_leaf: 1,
            max_features: None,
        };
        let tree = fit_tree(&x, &y, &cfg, &mut rng).map_err(|e| e.to_string())?;
        splits += tree
            .nodes()
            .iter()
            .filter(|n| matches!(n, TreeNode::Split { .. }))
            .count();
        check_node(tree.nodes(), 0, (0..n).collect(), 0, depth, &x, &y)
            .map_err(|e| format!("instance {inst}: {e}"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "200 instances, {splits} splits match exhaustive search in {secs:.2} s"
    ))
}

// ---------------------------------------------------------------------------

fn single_rf() -> HyperGrid {
    HyperGrid::single(HyperParams::Forest(ForestParams::default()))
}

struct SeedRun {
    seed: u64,
    exp: Experiment,
    m5_480: EvalReport,
    m5_30: EvalReport,
    m1_480: EvalReport,
    m3_480: EvalReport,
    secs: f64,
}

fn experiment(seed: u64) -> Experiment {
    let cohort = generate_cohort(&SynthParams {
        seed,
        ..SynthParams::default()
    })
    .expect("synthetic cohort");
    let prepared = prepare_cohort(
        cohort.into_iter().map(|(r, _)| r).collect(),
        &Default::default(),
    )
    .expect("prepare");
    Experiment::new(
        prepared,
        CvConfig {
            seed,
            ..CvConfig::default()
        },
    )
    .expect("fold plan")
}

fn run_seed(seed: u64) -> SeedRun {
    let start = Instant::now();
    let exp = experiment(seed);
    let g = single_rf();
    let m5_480 = exp.evaluate(&g, Modality::M5, 480).expect("M5/480");
    let secs = start.elapsed().as_secs_f64();
    let m5_30 = exp.evaluate(&g, Modality::M5, 30).expect("M5/30");
    let m1_480 = exp.evaluate(&g, Modality::M1, 480).expect("M1/480");
    let m3_480 = exp.evaluate(&g, Modality::M3, 480).expect("M3/480");
    SeedRun {
        seed,
        exp,
        m5_480,
        m5_30,
        m1_480,
        m3_480,
        secs,
    }
}

fn causality(exp: &Experiment) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let windows = [30, 60, 120, 240, 480, 1440];
    let mut compared = 0usize;
    for trial in 0..50 {
        let p = &exp.participants[rng.random_range(0..exp.participants.len())];
        let w = windows[rng.random_range(0..windows.len())];
        let m = Modality::ALL[rng.random_range(0..7)];
        let win = WindowConfig::new(w);
        let base = build_dataset(&p.processed, &p.reference, m, &win).map_err(|e| e.to_string())?;
        let cut = base.rows[rng.random_range(0..base.rows.len())]
            .end_time
            .offset(rng.random_range(0..10));

        let mut perturbed = p.processed.clone();
        for s in perturbed.channels.values_mut() {
            let mut values = s.values().to_vec();
            let mut valid = s.valid().to_vec();
            for i in 0..s.len() {
                if s.timestamp(i) > cut {
                    values[i] = rng.random_range(-50.0..50.0);
                    valid[i] = rng.random_bool(0.7);
                }
            }
            *s = s.with_data(values, valid);
        }
        let after = build_dataset(&perturbed, &p.reference, m, &win).map_err(|e| e.to_string())?;

        let early = |d: &FeatureDataset| -> FeatureDataset {
            FeatureDataset {
                rows: d
                    .rows
                    .iter()
                    .filter(|r| r.end_time <= cut)
                    .cloned()
                    .collect(),
                ..d.clone()
            }
        };
        let (a, b) = (early(&base), early(&after));
        ensure(a.rows.len() == b.rows.len(), || {
            format!("trial {trial}: row count changed")
        })?;
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            let same = ra.end_time == rb.end_time
                && ra
                    .features
                    .iter()
                    .zip(&rb.features)
                    .all(|(u, v)| u.to_bits() == v.to_bits());
            ensure(same, || {
                format!("trial {trial}: row at {} changed", ra.end_time)
            })?;
        }
        let hp = HyperParams::Forest(ForestParams {
            n_trees: 5,
            ..ForestParams::default()
        });
        let model = fit_model(
            &base.features(),
            &Matrix::from_rows(&base.targets(), 2),
            &hp,
            trial,
        )
        .map_err(|e| e.to_string())?;
        let (pa, pb) = (
            model.predict(&a.features()).unwrap(),
            model.predict(&b.features()).unwrap(),
        );
        ensure(
            pa.iter()
                .flatten()
                .zip(pb.iter().flatten())
                .all(|(u, v)| u.to_bits() == v.to_bits()),
            || format!("trial {trial}: predictions changed"),
        )?;
        compared += a.rows.len();
    }
    Ok(format!(
        "50 configurations, {compared} rows and predictions bit-identical"
    ))
}

fn end_to_end(runs: &[SeedRun]) -> Outcome {
    let mut parts = Vec::new();
    for r in runs {
        let c = r.m5_480.mean_cmae_hours;
        ensure(c <= 2.0, || format!("seed {}: CMAE {c:.3} h", r.seed))?;
        parts.push(format!(
            "seed {} {c:.3}±{:.3} h ({:.0} s)",
            r.seed, r.m5_480.sd_cmae_hours, r.secs
        ));
    }
    Ok(format!("RF/M5/480 CMAE: {}", parts.join(", ")))
}

fn window_trend(runs: &[SeedRun]) -> Outcome {
    let wins = runs
        .iter()
        .filter(|r| r.m5_480.mean_cmae_hours < r.m5_30.mean_cmae_hours)
        .count();
    let detail: Vec<String> = runs
        .iter()
        .map(|r| {
            format!(
                "seed {} W480 {:.3} vs W30 {:.3}",
                r.seed, r.m5_480.mean_cmae_hours, r.m5_30.mean_cmae_hours
            )
        })
        .collect();
    ensure(wins >= 2, || {
        format!("only {wins} of 3 seeds: {}", detail.join("; "))
    })?;
    Ok(format!("{wins} of 3 seeds: {}", detail.join("; ")))
}

fn modality_order(runs: &[SeedRun]) -> Outcome {
    let mut detail = Vec::new();
    for r in runs {
        let (m1, m3, m5) = (
            r.m1_480.mean_cmae_hours,
            r.m3_480.mean_cmae_hours,
            r.m5_480.mean_cmae_hours,
        );
        let line = format!("seed {} M1 {m1:.3}, M3 {m3:.3}, M5 {m5:.3}", r.seed);
        ensure(m1 < m3 && m5 <= m1 + 0.25, || line.clone())?;
        detail.push(line);
    }
    Ok(detail.join("; "))
}

fn report_bytes(r: &EvalReport) -> [String; 3] {
    [
        report::window_table_csv(std::slice::from_ref(r)),
        report::folds_csv(r),
        report::predictions_csv(r),
    ]
}

fn leakage_and_determinism(runs: &[SeedRun]) -> Outcome {
    let mut checked = 0;
    for r in runs {
        for rep in [&r.m5_480, &r.m5_30, &r.m1_480, &r.m3_480] {
            let plan = &r.exp.plan;
            for f in 0..plan.k {
                let test: BTreeSet<&str> = plan.test_ids(f).into_iter().collect();
                let train: BTreeSet<&str> = plan.train_ids(f).into_iter().collect();
                ensure(test.is_disjoint(&train), || {
                    format!("seed {} fold {f} overlaps", r.seed)
                })?;
                ensure(test.len() + train.len() == r.exp.participants.len(), || {
                    "fold misses participants".into()
                })?;
            }
            for p in &rep.predictions {
                ensure(plan.fold_of(&p.participant_id) == Some(p.fold), || {
                    format!("{} predicted in fold {}", p.participant_id, p.fold)
                })?;
            }
            checked += 1;
        }
    }
    let again = run_seed(runs[0].seed);
    for (a, b) in [
        (&runs[0].m5_480, &again.m5_480),
        (&runs[0].m1_480, &again.m1_480),
    ] {
        ensure(report_bytes(a) == report_bytes(b), || {
            format!(
                "{} W{} report differs on re-run",
                a.modality, a.window_minutes
            )
        })?;
    }
    Ok(format!(
        "{checked} CV runs disjoint by participant; re-run of seed {} byte-identical",
        runs[0].seed
    ))
}

// ---------------------------------------------------------------------------

/// Two-sided p by enumerating every relabelling of the pooled sample.
fn permutation_p(a: &[f64], b: &[f64]) -> (f64, f64) {
    let u_of = |x: &[f64], y: &[f64]| -> f64 {
        x.iter()
            .flat_map(|&xi| {
                y.iter().map(move |&yj| {
                    if xi > yj {
                        1.0
                    } else if xi == yj {
                        0.5
                    } else {
                        0.0
                    }
                })
            })
            .sum()
    };
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (n1, n) = (a.len(), pooled.len());
    let center = (a.len() * b.len()) as f64 / 2.0;
    let obs = (u_of(a, b) - center).abs();
    let (mut hit, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let (x, y): (Vec<f64>, Vec<f64>) = {
            let mut x = Vec::new();
            let mut y = Vec::new();
            for (i, &v) in pooled.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    x.push(v)
                } else {
                    y.push(v)
                }
            }
            (x, y)
        };
        total += 1;
        if (u_of(&x, &y) - center).abs() >= obs - 1e-9 {
            hit += 1;
        }
    }
    (u_of(a, b), hit as f64 / total as f64)
}

fn u_test_validity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    let mut worst_normal = 0.0f64;
    let mut cases = 0;
    for n1 in 1..=7usize {
        for n2 in 1..=7usize {
            for s in 0..100 {
                let draw = |rng: &mut ChaCha8Rng, shift: f64| -> f64 {
                    if s % 2 == 0 {
                        (rng.random_range(0..5) as f64) + shift.round()
                    } else {
                        rng.random::<f64>() + shift
                    }
                };
                let shift = if s % 3 == 0 { 1.0 } else { 0.0 };
                let a: Vec<f64> = (0..n1).map(|_| draw(&mut rng, shift)).collect();
                let b: Vec<f64> = (0..n2).map(|_| draw(&mut rng, 0.0)).collect();
                let (u, p) = permutation_p(&a, &b);
                let got = mann_whitney_u(&a, &b).map_err(|e| e.to_string())?;
                ensure(got.u_statistic == u, || {
                    format!("U {} vs {u} for {a:?} {b:?}", got.u_statistic)
                })?;
                worst = worst.max((got.p_value_two_sided - p).abs());
                if n1 >= 4 && n2 >= 4 {
                    let normal = mann_whitney_u_normal(&a, &b).map_err(|e| e.to_string())?;
                    worst_normal = worst_normal.max((normal.p_value_two_sided - p).abs());
                }
                cases += 1;
            }
            let same = vec![3.0; n1];
            let other = vec![3.0; n2];
            let t = mann_whitney_u(&same, &other).map_err(|e| e.to_string())?;
            ensure(t.u_statistic == (n1 * n2) as f64 / 2.0, || {
                format!("identical samples gave U {}", t.u_statistic)
            })?;
        }
    }
    ensure(worst <= 0.05, || format!("max |dp| {worst}"))?;
    Ok(format!(
        "{cases} cases, max |dp| {worst:.1e} vs enumeration (normal approximation alone, n1,n2 >= 4: {worst_normal:.3}); \
         identical samples give U = n1*n2/2"
    ))
}

// ---------------------------------------------------------------------------

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut run = |id: usize, name: &'static str, f: &dyn Fn() -> Outcome| {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or(e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("[{tag}] {id:>2} {name}: {detail}");
        results.push((id, name, outcome));
    };

    run(1, "cosinor exactness", &cosinor_exactness);
    run(2, "circular codec", &circular_codec);
    run(3, "metric oracle", &metric_oracle);
    run(4, "tree oracle", &tree_oracle);

    let runs: Vec<SeedRun> = [0, 1, 2].into_iter().map(run_seed).collect();
    run(5, "causality", &|| causality(&runs[0].exp));
    run(6, "end-to-end synthetic", &|| end_to_end(&runs));
    run(7, "window-length trend", &|| window_trend(&runs));
    run(8, "modality ordering", &|| modality_order(&runs));
    run(9, "no leakage and determinism", &|| {
        leakage_and_determinism(&runs)
    });
    run(10, "U-test validity", &u_test_validity);

    let failed = results.iter().filter(|r| r.2.is_err()).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
