//! Acceptance suite. Each criterion runs in isolation and prints one
//! PASS/FAIL line; the test fails if any criterion fails.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tower::ServiceExt;

use symrec::eval::{mer_error, topn_error, EquivalenceClasses, EvalCase};
use symrec::features::{baseline_features, optimized_features, total_dimension};
use symrec::gtw::gtw_distance;
use symrec::mlp::{ce_loss, gradients, init_model, objective, Activation, Layer, Loss, MlpModel, Regularization};
use symrec::pipeline::{parse_experiment, run_experiment, LabeledSet};
use symrec::preprocess::{
    scale_and_shift, space_evenly_per_stroke, Interpolation, PreprocessingQueue, PreprocessingStep, ShiftVariant,
};
use symrec::recording::{parse_recording, Hypothesis, Point, Recording, SymbolId, SymbolTable};
use symrec::service::{router, AppState, ServiceConfig};
use symrec::synth::synth_dataset;

const SAMPLE_RECORDING: &str = include_str!("../data/292927.json");

const TOY_EXPERIMENT: &str = "\
seed: 11
preprocessing:
  queue:
    - ScaleAndShift: {variant: I1}
    - SpaceEvenlyPerStroke: {number: 20, kind: linear}
features:
  features:
    - ConstantPointCoordinates: {strokes: 4, points_per_stroke: 20, fill_empty_with: 0, pen_down: false}
model:
  model: {type: mlp, topology: '160:32:5'}
  training: {epochs: 40, learning_rate: 0.1, momentum: 0.9, batch_size: 32}
";

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool")
        .install(f)
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-8 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Central differences of `objective` for every weight of every layer.
fn numeric_gradients(model: &MlpModel, x: &Array2<f64>, y: &Array2<f64>, h: f64) -> Vec<Array2<f64>> {
    let mut m = model.clone();
    let mut out = Vec::new();
    for l in 0..m.layers.len() {
        let mut g = Array2::zeros(m.layers[l].weights.raw_dim());
        for idx in ndarray::indices(m.layers[l].weights.raw_dim()) {
            let w = m.layers[l].weights[idx];
            m.layers[l].weights[idx] = w + h;
            let plus = objective(&m, x, y, Loss::CrossEntropy, Regularization::None);
            m.layers[l].weights[idx] = w - h;
            let minus = objective(&m, x, y, Loss::CrossEntropy, Regularization::None);
            m.layers[l].weights[idx] = w;
            g[idx] = (plus - minus) / (2.0 * h);
        }
        out.push(g);
    }
    out
}

fn gradient_oracle() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for topology in [vec![4, 3, 2], vec![6, 5, 5, 3]] {
        let classes = *topology.last().unwrap();
        for batch in 0..20 {
            let model = init_model(&topology, Activation::Sigmoid, SymbolTable::anonymous(classes), batch).unwrap();
            let rows = rng.gen_range(1..=8);
            let x = Array2::from_shape_fn((rows, topology[0]), |_| rng.gen_range(-1.0..1.0));
            let mut y = Array2::zeros((rows, classes));
            for r in 0..rows {
                y[[r, rng.gen_range(0..classes)]] = 1.0;
            }
            let analytic = gradients(&model, &x, &y, Loss::CrossEntropy, Regularization::None).unwrap();
            let numeric = numeric_gradients(&model, &x, &y, 1e-5);
            for (a, n) in analytic.iter().zip(&numeric) {
                for (&a, &n) in a.iter().zip(n) {
                    worst = worst.max(rel_err(a, n));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    if worst >= 1e-4 {
        return Err(format!("max relative error {worst:e}"));
    }
    if elapsed >= Duration::from_secs(10) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("max relative error {worst:.2e}"))
}

fn softmax_invariants() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.gen_range(2..12);
        let logits = Array2::from_shape_fn((1, n), |_| rng.gen_range(-30.0..30.0));
        let mut p = logits.clone();
        Activation::Softmax.apply(&mut p);
        let sum: f64 = p.sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(format!("softmax sums to {sum}"));
        }
        let shift = rng.gen_range(-500.0..500.0);
        let mut q = logits.mapv(|v| v + shift);
        Activation::Softmax.apply(&mut q);
        let argmax = |a: &Array2<f64>| {
            a.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
                .0
        };
        if argmax(&p) != argmax(&q) {
            return Err("argmax changed under a logit shift".into());
        }
    }
    let uniform = MlpModel::new(
        vec![Layer {
            weights: Array2::zeros((2, 2)),
            activation: Activation::Softmax,
        }],
        SymbolTable::anonymous(2),
    )
    .unwrap();
    let x = Array2::from_elem((1, 1), 0.7);
    let y = Array2::from_shape_vec((1, 2), vec![1.0, 0.0]).unwrap();
    let ce = ce_loss(&uniform, &x, &y);
    let want = 2.0 * 2f64.ln();
    if (ce - want).abs() > 1e-12 {
        return Err(format!("uniform 2-class CE {ce}, want {want}"));
    }
    Ok("sums, shift invariance, CE = 2 log 2".into())
}

fn toy_set(per_class: usize, seed: u64) -> LabeledSet {
    let (symbols, recordings) = synth_dataset(per_class, seed);
    LabeledSet { symbols, recordings }
}

fn toy_convergence() -> Result<String, String> {
    let config = parse_experiment(TOY_EXPERIMENT).map_err(|e| e.to_string())?;
    let set = toy_set(200, 3);
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let result = single_threaded(|| run_experiment(&config, &set, dir.path())).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let epochs = result.history.as_ref().map_or(0, |h| h.epochs_trained());
    let accuracy = 1.0 - result.report.top1;
    let summary = format!(
        "test TOP1 accuracy {:.1} % on {} recordings after {epochs} epochs in {elapsed:.1?}",
        accuracy * 100.0,
        result.report.count
    );
    if accuracy < 0.95 || epochs > 300 || elapsed >= Duration::from_secs(60) {
        return Err(summary);
    }
    Ok(summary)
}

fn extent(r: &Recording) -> [f64; 4] {
    let b = r.bounding_box();
    [b.x_min, b.x_max, b.y_min, b.y_max]
}

fn preprocessing_goldens() -> Result<String, String> {
    let pts = |v: &[(f64, f64, f64)]| v.iter().map(|&(x, y, t)| Point::new(x, y, t)).collect::<Vec<_>>();
    let rec = Recording::new(vec![pts(&[(10.0, 20.0, 100.0), (10.8, 21.0, 150.0), (10.4, 20.5, 175.0)])]).unwrap();
    for (variant, want) in [
        (ShiftVariant::I1, [-0.4, 0.4, 0.0, 1.0]),
        (ShiftVariant::I2, [0.0, 0.8, 0.0, 1.0]),
        (ShiftVariant::I3, [-0.4, 0.4, -0.5, 0.5]),
    ] {
        let got = extent(&scale_and_shift(&rec, variant));
        if got.iter().zip(&want).any(|(g, w)| (g - w).abs() > 1e-9) {
            return Err(format!("{variant:?}: {got:?}, want {want:?}"));
        }
    }
    let short = Recording::new(vec![
        pts(&[(0.0, 0.0, 0.0), (1.0, 2.0, 10.0), (3.0, 1.0, 20.0)]),
        pts(&[(5.0, 5.0, 30.0), (6.0, 5.0, 40.0), (7.0, 6.0, 50.0), (8.0, 8.0, 60.0), (9.0, 9.0, 70.0)]),
    ])
    .unwrap();
    let out = space_evenly_per_stroke(&short, 20, Interpolation::Cubic);
    if out.strokes[0] != short.strokes[0] || out.strokes[1].len() != 20 {
        return Err("short stroke was resampled".into());
    }
    let queue = PreprocessingQueue::new(vec![
        PreprocessingStep::WildPointFilter { threshold: 3.0 },
        PreprocessingStep::DotReduction { threshold: 5.0 },
    ])
    .unwrap();
    let warnings = queue.ordering_warnings();
    if !warnings.iter().any(|w| w.step_index == 0 && w.message.contains("DotReduction")) {
        return Err(format!("missing ordering warning: {warnings:?}"));
    }
    let reversed = PreprocessingQueue::new(vec![
        PreprocessingStep::DotReduction { threshold: 5.0 },
        PreprocessingStep::WildPointFilter { threshold: 3.0 },
    ])
    .unwrap();
    if !reversed.ordering_warnings().is_empty() {
        return Err("warning for the recommended order".into());
    }
    Ok("box targets, short-stroke pass-through, ordering warning".into())
}

/// Dynamic-programming DTW with squared Euclidean point distance.
fn dtw(a: &[Point], b: &[Point]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut d = vec![vec![f64::INFINITY; m + 1]; n + 1];
    d[0][0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let cost = a[i - 1].dist_sq(&b[j - 1]);
            d[i][j] = cost + d[i - 1][j].min(d[i][j - 1]).min(d[i - 1][j - 1]);
        }
    }
    d[n][m]
}

fn gtw_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let seq = |rng: &mut ChaCha8Rng| -> Vec<Point> {
        (0..rng.gen_range(1..=8))
            .map(|i| Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), i as f64))
            .collect()
    };
    let mut strict = 0;
    for _ in 0..1000 {
        let a = seq(&mut rng);
        let b = seq(&mut rng);
        let g = gtw_distance(&a, &b).map_err(|e| e.to_string())?;
        let opt = dtw(&a, &b);
        if g < opt - 1e-9 * opt.max(1.0) {
            return Err(format!("greedy {g} below optimal {opt}"));
        }
        if g > opt + 1e-9 {
            strict += 1;
        }
        let self_d = gtw_distance(&a, &a).map_err(|e| e.to_string())?;
        if self_d != 0.0 {
            return Err(format!("gtw(a, a) = {self_d}"));
        }
    }
    Ok(format!("1000 pairs, greedy above optimal on {strict}"))
}

fn error_lattice() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for round in 0..1000 {
        let n_symbols = rng.gen_range(2..15u32);
        let cases: Vec<EvalCase> = (0..rng.gen_range(1..40))
            .map(|_| {
                let mut ids: Vec<u32> = (0..n_symbols).collect();
                for i in (1..ids.len()).rev() {
                    ids.swap(i, rng.gen_range(0..=i));
                }
                let k = rng.gen_range(1..=n_symbols.min(10) as usize);
                let result = ids[..k]
                    .iter()
                    .enumerate()
                    .map(|(r, &id)| Hypothesis {
                        symbol: SymbolId(id),
                        probability: 1.0 / (r + 2) as f64,
                    })
                    .collect();
                (result, SymbolId(rng.gen_range(0..n_symbols)))
            })
            .collect();
        let pairs: Vec<(SymbolId, SymbolId)> = (0..rng.gen_range(0..6))
            .map(|_| (SymbolId(rng.gen_range(0..n_symbols)), SymbolId(rng.gen_range(0..n_symbols))))
            .collect();
        let classes = EquivalenceClasses::from_pairs(pairs);
        let (t1, t3, mer) = (topn_error(&cases, 1), topn_error(&cases, 3), mer_error(&cases, &classes));
        if !(t1 >= t3 && t3 >= mer) {
            return Err(format!("round {round}: TOP1 {t1} TOP3 {t3} MER {mer}"));
        }
        let singleton = mer_error(&cases, &EquivalenceClasses::singletons());
        if singleton != t3 {
            return Err(format!("round {round}: singleton MER {singleton} != TOP3 {t3}"));
        }
    }
    Ok("1000 result sets".into())
}

fn feature_dimensions() -> Result<String, String> {
    let (b, o) = (total_dimension(&baseline_features()), total_dimension(&optimized_features()));
    if (b, o) != (160, 167) {
        return Err(format!("baseline {b}, optimized {o}"));
    }
    Ok("baseline 160, optimized 167".into())
}

fn protocol_golden() -> Result<String, String> {
    let rec = parse_recording(SAMPLE_RECORDING).map_err(|e| e.to_string())?;
    if rec.strokes.len() != 2 || rec.point_count() != 145 {
        return Err(format!("{} strokes, {} points", rec.strokes.len(), rec.point_count()));
    }
    let config = parse_experiment(TOY_EXPERIMENT).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().unwrap();
    let recognizer = run_experiment(&config, &toy_set(8, 1), dir.path())
        .map_err(|e| e.to_string())?
        .recognizer;
    let app = router(Arc::new(AppState::with_recognizer(recognizer)), &ServiceConfig::default());
    let body = format!(r#"{{"recording": {SAMPLE_RECORDING}, "k": 10}}"#);
    let rt = tokio::runtime::Builder::new_current_thread().build().unwrap();
    let (status, bytes) = rt.block_on(async {
        let resp = app
            .oneshot(
                Request::post("/classify")
                    .header("content-type", "application/json")
                    .body(Body::from(body))
                    .unwrap(),
            )
            .await
            .unwrap();
        (resp.status(), resp.into_body().collect().await.unwrap().to_bytes())
    });
    if status != StatusCode::OK {
        return Err(format!("status {status}"));
    }
    let v: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
    validate_response(&v)?;
    let sample: serde_json::Value = serde_json::from_str(
        r#"[{"31":0.88842893496419},{"1":0.10999419040225},{"36":0.001499575497246},{"40":7.7299136313199e-5}]"#,
    )
    .unwrap();
    validate_response(&sample)?;
    Ok(format!("2 strokes / 145 points, {} hypotheses", v.as_array().unwrap().len()))
}

/// At most 10 single-entry objects keyed by integer strings, probabilities in
/// (0, 1], descending.
fn validate_response(v: &serde_json::Value) -> Result<(), String> {
    let list = v.as_array().ok_or("response is not a list")?;
    if list.is_empty() || list.len() > 10 {
        return Err(format!("{} entries", list.len()));
    }
    let mut last = f64::INFINITY;
    for entry in list {
        let obj = entry.as_object().ok_or("entry is not an object")?;
        if obj.len() != 1 {
            return Err(format!("entry with {} keys", obj.len()));
        }
        let (k, p) = obj.iter().next().unwrap();
        k.parse::<u64>().map_err(|_| format!("key {k:?} is not an integer id"))?;
        let p = p.as_f64().ok_or("probability is not a number")?;
        if !(p > 0.0 && p <= 1.0) || p > last {
            return Err(format!("probability {p} after {last}"));
        }
        last = p;
    }
    Ok(())
}

fn determinism() -> Result<String, String> {
    let config = parse_experiment(TOY_EXPERIMENT).map_err(|e| e.to_string())?;
    let set = toy_set(30, 9);
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        single_threaded(|| run_experiment(&config, &set, dir.path())).map_err(|e| e.to_string())?;
        let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
        Ok::<_, String>((read("model-0.json"), read("model-1.json")))
    };
    let (a0, a1) = run()?;
    let (b0, b1) = run()?;
    if a0 != b0 || a1 != b1 {
        return Err("model files differ between runs".into());
    }
    if a0 == a1 {
        return Err("training did not change the model".into());
    }
    Ok(format!("model-1.json identical ({} bytes)", a1.len()))
}

type Criterion = fn() -> Result<String, String>;

#[test]
fn acceptance() {
    let criteria: [(&str, Criterion); 9] = [
        ("gradient oracle", gradient_oracle),
        ("softmax/CE invariants", softmax_invariants),
        ("toy convergence", toy_convergence),
        ("preprocessing goldens", preprocessing_goldens),
        ("GTW oracle", gtw_oracle),
        ("error-measure lattice", error_lattice),
        ("feature dimensions", feature_dimensions),
        ("protocol golden", protocol_golden),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        // Written to the raw handle so the lines show without --nocapture.
        let _ = writeln!(
            std::io::stderr(),
            "acceptance {tag}: {name} ({:.1?}) {detail}",
            start.elapsed()
        );
        if outcome.is_err() {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
