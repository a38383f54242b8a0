//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::HashSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

use bteach_core::dataset::synth::{generate_synthetic_corpus, synthesize, to_corpus};
use bteach_core::dataset::SynthParams;
use bteach_core::model::{compute_features, PixelFeatures};
use bteach_core::pipeline::train_target_model;
use bteach_core::saliency::hot_colormap;
use bteach_core::study::export::COLUMNS;
use bteach_core::study::pairing::{matching_cost, pair_indices};
use bteach_core::study::{build_study_plan, Block, Export, StudyTarget};
use bteach_core::teaching::{accepts, learner_posterior, TeachingSet};
use bteach_core::training::{cross_entropy_loss, evaluate_accuracy, loss_gradient};
use bteach_core::{
    build_category_pools, image_prob, pixel_prob, select_teaching_set, Category, Corpus, ImageFeatures, Label,
    ProbMap, TeachingConfig, ThetaParams, TrainConfig, TrainItem, DEFAULT_CUTOFF,
};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

// ---- gradient ----

fn fd_gradient(items: &[TrainItem<'_>], theta: &ThetaParams, h: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (k, o) in out.iter_mut().enumerate() {
        let (mut up, mut dn) = (theta.to_array(), theta.to_array());
        up[k] += h;
        dn[k] -= h;
        let lu = cross_entropy_loss(items, &ThetaParams::from_array(up), 1e-7).unwrap();
        let ld = cross_entropy_loss(items, &ThetaParams::from_array(dn), 1e-7).unwrap();
        *o = (lu - ld) / (2.0 * h);
    }
    out
}

/// Same arg-max pixel under every ±h perturbation and no clamped item.
fn non_degenerate(feats: &[ImageFeatures], theta: &ThetaParams, h: f64) -> bool {
    feats.iter().all(|f| {
        let Some((base, p)) = f.argmax(theta) else { return false };
        (1e-4..=1.0 - 1e-4).contains(&p)
            && (0..8).all(|j| {
                let mut a = theta.to_array();
                a[j / 2] += if j % 2 == 0 { h } else { -h };
                f.argmax(&ThetaParams::from_array(a)).map(|(q, _)| q.pixel_index) == Some(base.pixel_index)
            })
    })
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut checked, mut worst, mut drawn) = (0, 0.0f64, 0);
    while checked < 100 {
        drawn += 1;
        let n_items = rng.random_range(2..=6);
        let feats: Vec<ImageFeatures> = (0..n_items)
            .map(|_| {
                let v = (0..16).map(|_| rng.random_range(0.0f32..1.0)).collect();
                ImageFeatures::from_map(&ProbMap::new(4, 4, v).unwrap())
            })
            .collect();
        let labels: Vec<Label> = (0..n_items)
            .map(|_| if rng.random_bool(0.5) { Label::Present } else { Label::Absent })
            .collect();
        let theta = ThetaParams::new(
            rng.random_range(0.5..12.0),
            rng.random_range(-2.0..8.0),
            rng.random_range(0.5..12.0),
            rng.random_range(-2.0..8.0),
        );
        if !non_degenerate(&feats, &theta, 10.0 * h) {
            continue;
        }
        let items: Vec<TrainItem<'_>> = feats.iter().zip(&labels).map(|(f, l)| TrainItem::new(f, *l)).collect();
        let g = loss_gradient(&items, &theta, 1e-7).unwrap();
        let n = fd_gradient(&items, &theta, h);
        let scale = g.iter().chain(&n).fold(0.0f64, |m, v| m.max(v.abs()));
        let err = g.iter().zip(&n).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let rel = if scale > 0.0 { err / scale } else { 0.0 };
        worst = worst.max(rel);
        check(rel < 1e-4, || format!("relative error {rel:e} at {theta:?}"))?;
        checked += 1;
    }
    let t = start.elapsed();
    check(t < Duration::from_secs(10), || format!("took {}", secs(t)))?;
    Ok(format!(
        "100 points ({drawn} drawn), max relative error {worst:.2e}, {}",
        secs(t)
    ))
}

// ---- model identities ----

fn model_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (w1, w2) = (rng.random_range(0.5..20.0), rng.random_range(0.5..20.0));
        let (x1, x2) = (rng.random_range(0.06..1.0), rng.random_range(0.01..1.0));
        let theta = ThetaParams::new(w1, w1 * x1, w2, w2 * x2);
        let p = pixel_prob(&PixelFeatures { pixel_index: 0, x1, x2 }, &theta);
        worst = worst.max((p - 0.25).abs());
    }
    check(worst < 1e-12, || format!("pixel_prob at thresholds off by {worst:e}"))?;

    for i in 0..1000 {
        let (w, h) = (rng.random_range(1..12), rng.random_range(1..12));
        let v: Vec<f32> = (0..w * h)
            .map(|_| match rng.random_range(0..4) {
                0 => 0.05,
                1 => rng.random_range(0.0..0.05),
                _ => rng.random_range(0.0..=1.0),
            })
            .collect();
        let map = ProbMap::new(w, h, v.clone()).unwrap();
        let theta = ThetaParams::new(
            rng.random_range(-15.0..15.0),
            rng.random_range(-8.0..8.0),
            rng.random_range(-15.0..15.0),
            rng.random_range(-8.0..8.0),
        );
        // Brute force straight from the definition.
        let n = (w * h) as f64;
        let admitted: Vec<f32> = v.iter().copied().filter(|&x| x > 0.05).collect();
        let brute = admitted
            .iter()
            .map(|&x| {
                let rank = admitted.iter().filter(|&&y| y <= x).count() as f64 / n;
                pixel_prob(&PixelFeatures { pixel_index: 0, x1: x as f64, x2: rank }, &theta)
            })
            .fold(0.0f64, f64::max);
        let got = image_prob(&map, &theta);
        check(got == brute, || format!("map {i}: image_prob {got} vs brute force {brute}"))?;
        check(compute_features(&map).len() == admitted.len(), || format!("map {i}: admission count"))?;
    }
    Ok(format!("threshold identity max error {worst:.1e}; 1000 maps exact"))
}

// ---- training ----

fn training_accuracy() -> Outcome {
    let start = Instant::now();
    let images = synthesize(&SynthParams {
        label_noise: 0.0,
        ..SynthParams::default()
    })
    .unwrap();
    let corpus = to_corpus(&images);
    let theta = train_target_model(&corpus, &TrainConfig::for_items(corpus.len()))
        .map_err(|e| e.to_string())?
        .theta;
    let items: Vec<TrainItem<'_>> = corpus
        .images()
        .iter()
        .zip(&images)
        .map(|(c, s)| TrainItem::new(&c.features, s.generator_label))
        .collect();
    let acc = evaluate_accuracy(&items, &theta, DEFAULT_CUTOFF).unwrap();
    let t = start.elapsed();
    check(acc >= 0.85, || format!("accuracy {acc}"))?;
    check(t < Duration::from_secs(60), || format!("took {}", secs(t)))?;
    Ok(format!("accuracy {acc:.3} on 200 64x64 maps, {}", secs(t)))
}

// ---- shared noisy corpus ----

struct Fixture {
    corpus: Corpus,
    theta: ThetaParams,
}

fn noisy_fixture() -> Fixture {
    let images = synthesize(&SynthParams::default()).unwrap();
    let mut corpus = to_corpus(&images);
    let theta = train_target_model(&corpus, &TrainConfig::for_items(corpus.len()))
        .unwrap()
        .theta;
    corpus.annotate(&theta);
    Fixture { corpus, theta }
}

/// First image of each category in id order.
fn category_targets(fx: &Fixture) -> Vec<(Category, String)> {
    Category::ALL
        .iter()
        .map(|&c| {
            let id = fx
                .corpus
                .images()
                .iter()
                .filter(|i| Category::of(i.model_label().unwrap(), i.ground_truth) == c)
                .map(|i| i.id.clone())
                .min()
                .expect("category present");
            (c, id)
        })
        .collect()
}

fn select(fx: &Fixture, id: &str, cfg: &TeachingConfig) -> Result<TeachingSet, String> {
    let target = fx.corpus.get(id).unwrap();
    let pools = build_category_pools(&fx.corpus, &fx.theta, Some(id)).map_err(|e| e.to_string())?;
    select_teaching_set(target, &pools, &fx.corpus, cfg, &TrainConfig::for_items(4)).map_err(|e| format!("{id}: {e}"))
}

fn verify_set(fx: &Fixture, id: &str, set: &TeachingSet, eps: f64) -> Result<(), String> {
    let target = fx.corpus.get(id).unwrap();
    let label = target.model_label().unwrap();
    let pools = build_category_pools(&fx.corpus, &fx.theta, Some(id)).unwrap();
    let again = learner_posterior(&set.examples, &fx.corpus, &target.features, &TrainConfig::for_items(4))
        .map_err(|e| e.to_string())?;
    check(accepts(label, again.learner_prob, eps), || {
        format!("{id}: re-evaluated learner probability {} fails epsilon", again.learner_prob)
    })?;
    for (c, ex) in set.examples.in_order() {
        check(ex != id, || format!("{id}: target among examples"))?;
        check(pools.pool(c).iter().any(|p| p == ex), || format!("{id}: {ex} not in {c} pool"))?;
    }
    Ok(())
}

fn teaching_soundness(fx: &Fixture) -> Outcome {
    let targets = category_targets(fx);
    let cfg = TeachingConfig::default();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let mut parts = Vec::new();
    for (c, id) in &targets {
        let set = pool.install(|| select(fx, id, &cfg))?;
        verify_set(fx, id, &set, cfg.epsilon)?;
        parts.push(format!("{c}:{id} {}/{}", set.acceptance_count, set.n_candidates));
    }
    let full = start.elapsed();
    check(full < Duration::from_secs(15 * 60), || format!("full run took {}", secs(full)))?;

    let ci = TeachingConfig {
        n_candidates: 1000,
        ..cfg
    };
    let start = Instant::now();
    for (_, id) in &targets {
        let set = select(fx, id, &ci)?;
        verify_set(fx, id, &set, ci.epsilon)?;
    }
    let quick = start.elapsed();
    check(quick < Duration::from_secs(120), || format!("1000-candidate run took {}", secs(quick)))?;
    Ok(format!(
        "{} (accepted/candidates); 10000 candidates single-threaded {}, 1000 candidates {}",
        parts.join(", "),
        secs(full),
        secs(quick)
    ))
}

// ---- determinism ----

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn study_targets(fx: &Fixture) -> Vec<StudyTarget> {
    fx.corpus
        .images()
        .iter()
        .map(|i| StudyTarget {
            id: i.id.clone(),
            ground_truth: i.ground_truth,
            ai_label: i.model_label().unwrap(),
            ai_prob: i.model_prob.unwrap(),
            map: i.map.clone(),
            bundle: Some(i.id.clone()),
        })
        .collect()
}

fn determinism(fx: &Fixture) -> Outcome {
    let cfg = TeachingConfig {
        n_candidates: 1000,
        seed: 31,
        ..TeachingConfig::default()
    };
    for (_, id) in category_targets(fx) {
        let a = select(fx, &id, &cfg)?;
        let b = select(fx, &id, &cfg)?;
        check(a == b && a.learner_prob.to_bits() == b.learner_prob.to_bits(), || {
            format!("{id}: teaching sets differ")
        })?;
    }

    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let params = SynthParams::default();
    generate_synthetic_corpus(&params, d1.path()).map_err(|e| e.to_string())?;
    generate_synthetic_corpus(&params, d2.path()).map_err(|e| e.to_string())?;
    let (f1, f2) = (dir_bytes(d1.path()), dir_bytes(d2.path()));
    check(f1.len() == 201 && f1 == f2, || "synthetic corpora differ".into())?;

    let targets = study_targets(fx);
    for seed in [0, 1, 99] {
        let a = build_study_plan(&targets, seed).map_err(|e| e.to_string())?;
        let b = build_study_plan(&targets, seed).map_err(|e| e.to_string())?;
        check(a == b, || format!("plans differ for seed {seed}"))?;
    }
    Ok("4 teaching sets, 201-file corpus and 3 study plans reproduced bit-identically".into())
}

// ---- bundle cardinality through the binary ----

fn bteach(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_bteach")).args(args).output().unwrap()
}

fn bundle_cardinality(fx: &Fixture) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let corpus_dir = root.join("corpus");
    let manifest = corpus_dir.join("manifest.json");
    let theta = root.join("theta.json");
    let out = bteach(&["gen-synth", "--out", &s(&corpus_dir)]);
    check(out.status.success(), || format!("gen-synth: {}", String::from_utf8_lossy(&out.stderr)))?;
    let out = bteach(&["train", "--manifest", &s(&manifest), "--out-theta", &s(&theta)]);
    check(out.status.success(), || format!("train: {}", String::from_utf8_lossy(&out.stderr)))?;

    let mut runs = 0;
    for (_, id) in category_targets(fx) {
        let b = root.join(format!("bundle-{id}"));
        let out = bteach(&[
            "explain", "--manifest", &s(&manifest), "--theta", &s(&theta), "--target-id", &id,
            "--candidates", "1000", "--seed", "3", "--out", &s(&b),
        ]);
        check(out.status.success(), || format!("explain {id}: {}", String::from_utf8_lossy(&out.stderr)))?;
        let names: Vec<String> = fs::read_dir(&b)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        let pngs = names.iter().filter(|n| n.ends_with(".png")).count();
        let jsons = names.iter().filter(|n| n.ends_with(".json")).count();
        check(pngs == 10 && jsons == 1 && names.len() == 11, || {
            format!("{id}: {pngs} PNGs, {jsons} JSON, {} files", names.len())
        })?;
        runs += 1;
    }

    let failed = root.join("unreachable");
    let out = bteach(&[
        "explain", "--manifest", &s(&manifest), "--theta", &s(&theta), "--target-id", "img0000",
        "--candidates", "10", "--epsilon", "1e-300", "--out", &s(&failed),
    ]);
    check(out.status.code() == Some(3), || format!("expected exit 3, got {:?}", out.status.code()))?;
    check(!failed.exists(), || "failed explain left files behind".into())?;
    Ok(format!("{runs} explain runs each wrote 10 PNGs + bundle.json; failed search exits 3 with no output"))
}

// ---- colormap ----

fn colormap() -> Outcome {
    check(hot_colormap(0.0) == Ok([0, 0, 0]), || "v=0".into())?;
    check(hot_colormap(1.0) == Ok([255, 255, 255]), || "v=1".into())?;
    let mut prev = [0u8; 3];
    for i in 0..=1000 {
        let c = hot_colormap(i as f64 / 1000.0).unwrap();
        check((0..3).all(|k| c[k] >= prev[k]), || format!("channel decreases at step {i}"))?;
        prev = c;
    }
    Ok("endpoints exact; all channels monotone over 1001 points".into())
}

// ---- protocol ----

/// Minimum matching cost by walking every permutation.
fn brute_force_min(d: &[Vec<f64>]) -> f64 {
    fn rec(d: &[Vec<f64>], perm: &mut Vec<usize>, k: usize, best: &mut f64) {
        let n = perm.len();
        if k == n {
            let c: f64 = perm.chunks(2).map(|p| d[p[0]][p[1]]).sum();
            *best = best.min(c);
            return;
        }
        for i in k..n {
            perm.swap(k, i);
            rec(d, perm, k + 1, best);
            perm.swap(k, i);
        }
    }
    let mut best = f64::INFINITY;
    rec(d, &mut (0..d.len()).collect(), 0, &mut best);
    best
}

fn protocol(fx: &Fixture) -> Outcome {
    let targets = study_targets(fx);
    for seed in 0..100 {
        let plan = build_study_plan(&targets, seed).map_err(|e| e.to_string())?;
        for b in [Block::Prediction, Block::CertExamples, Block::CertNoExamples] {
            let block = plan.block(b);
            check(block.len() == 8, || format!("seed {seed}: {b:?} has {}", block.len()))?;
            for c in Category::ALL {
                let n = block.iter().filter(|t| t.category == c).count();
                check(n == 2, || format!("seed {seed}: {b:?} has {n} {c}"))?;
            }
        }
        let cat = |id: &str| targets.iter().find(|t| t.id == id).unwrap().category();
        let with: HashSet<&str> = plan.cert_examples_block.iter().map(|t| t.target_id.as_str()).collect();
        let without: HashSet<&str> = plan.cert_no_examples_block.iter().map(|t| t.target_id.as_str()).collect();
        check(plan.pairs.len() == 8, || format!("seed {seed}: {} pairs", plan.pairs.len()))?;
        for (a, b) in &plan.pairs {
            check(cat(a) == cat(b), || format!("seed {seed}: pair {a}/{b} crosses categories"))?;
            check(with.contains(a.as_str()) && without.contains(b.as_str()), || {
                format!("seed {seed}: pair {a}/{b} not split across blocks")
            })?;
        }
    }

    let mut instances = 0;
    for n in [4usize, 6, 8] {
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed * 31 + n as u64);
            let maps: Vec<ProbMap> = (0..n)
                .map(|_| ProbMap::new(3, 3, (0..9).map(|_| rng.random::<f32>()).collect()).unwrap())
                .collect();
            let cands: Vec<(String, &ProbMap)> = maps.iter().enumerate().map(|(i, m)| (i.to_string(), m)).collect();
            let d: Vec<Vec<f64>> = maps
                .iter()
                .map(|a| maps.iter().map(|b| a.l1_distance(b).unwrap()).collect())
                .collect();
            let best = brute_force_min(&d);
            let got = matching_cost(&cands, &pair_indices(&cands).map_err(|e| e.to_string())?);
            check((got - best).abs() <= 1e-12 * best.max(1.0), || {
                format!("n={n} seed={seed}: {got} vs optimum {best}")
            })?;
            instances += 1;
        }
    }
    Ok(format!(
        "100 plans: 2 per category per block, 8 same-category split pairs; pairing optimal on {instances} instances"
    ))
}

// ---- service contract ----

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => req.header("content-type", "application/json").body(Body::from(v.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn participant(app: &axum::Router) -> Result<(String, usize), String> {
    let (s, b) = call(app, "POST", "/sessions", Some(json!({"seed": 12}))).await;
    check(s == StatusCode::CREATED, || format!("create: {s}"))?;
    let v: Value = serde_json::from_slice(&b).unwrap();
    let id = v["session_id"].as_str().unwrap().to_string();
    let mut completed = 0;
    for step in 0u64.. {
        let (s, b) = call(app, "GET", &format!("/sessions/{id}/trial"), None).await;
        check(s == StatusCode::OK, || format!("trial: {s}"))?;
        let v: Value = serde_json::from_slice(&b).unwrap();
        if v["done"] == true {
            break;
        }
        let t = v["trial_index"].clone();
        let r = 20 + (step * 37) % 60;
        let r = if r == 50 { 51 } else { r };
        let phase = v["phase"].as_str().unwrap().to_string();
        let body = match phase.as_str() {
            "diagnose" => json!({"phase": "diagnose", "trial_index": t, "diagnosis": r}),
            "predict" => json!({"phase": "predict", "trial_index": t, "prediction": r}),
            "certify" => json!({"phase": "certify", "trial_index": t, "certify": step % 2 == 0,
                                "agree_with_ai": true, "justifications": ["correct_answer", "other"],
                                "free_text": "clear apical line"}),
            p => json!({"phase": p, "trial_index": t}),
        };
        let (s, b) = call(app, "POST", &format!("/sessions/{id}/response"), Some(body)).await;
        check(s == StatusCode::OK, || format!("response: {s} {}", String::from_utf8_lossy(&b)))?;
        if matches!(phase.as_str(), "predict" | "certify") {
            completed += 1;
        }
    }
    Ok((id, completed))
}

fn service_contract(fx: &Fixture) -> Outcome {
    let bundles = tempfile::tempdir().unwrap();
    let sessions = tempfile::tempdir().unwrap();
    let cfg = TeachingConfig {
        n_candidates: 1000,
        ..TeachingConfig::default()
    };
    let materials = bteach_service::prepare_materials(&fx.corpus, &[], &fx.theta, bundles.path(), &cfg)
        .map_err(|e| e.to_string())?;
    let n_bundles = materials.bundles.len();
    let app = bteach_service::app(materials, sessions.path()).map_err(|e| e.to_string())?;
    let rt = tokio::runtime::Runtime::new().unwrap();
    let (id, completed, csv) = rt.block_on(async {
        let (id, completed) = participant(&app).await?;
        let (s, csv) = call(&app, "GET", "/export", None).await;
        check(s == StatusCode::OK, || format!("export: {s}"))?;
        Ok::<_, String>((id, completed, String::from_utf8(csv).unwrap()))
    })?;
    check(completed == 24, || format!("{completed} trials completed"))?;
    check(csv.lines().next() == Some(COLUMNS.join(",").as_str()), || "unexpected CSV header".into())?;
    let export = Export::from_csv(&csv).map_err(|e| format!("CSV does not parse: {e}"))?;
    let count = |p: &str| export.rows.iter().filter(|r| r.phase == p).count();
    let counts = (count("diagnose"), count("predict"), count("certify"));
    check(counts == (8, 8, 16) && export.rows.len() == 32, || format!("row counts {counts:?}"))?;
    for r in &export.rows {
        check(r.session_id == id, || "foreign session id".into())?;
        for v in [r.diagnosis, r.prediction].into_iter().flatten() {
            check(v <= 100 && v != 50, || format!("rating {v}"))?;
        }
        match r.phase.as_str() {
            "diagnose" => check(r.diagnosis.is_some() && r.block == "prediction", || "diagnose row".into())?,
            "predict" => check(
                r.prediction.is_some() && r.feedback_correct.is_some() && r.block == "prediction",
                || "predict row".into(),
            )?,
            _ => check(
                r.certify.is_some() && r.agree_with_ai.is_some() && r.justification_bits == Some(0b100001),
                || "certify row".into(),
            )?,
        }
    }
    Ok(format!("{n_bundles} bundles; 24 trials completed; export rows 8+8+16 with valid schema"))
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut run = |name: &'static str, f: &dyn Fn() -> Outcome| {
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match &r {
            Ok(m) => println!("PASS  {name}: {m}"),
            Err(m) => println!("FAIL  {name}: {m}"),
        }
        results.push((name, r));
    };

    run("gradient correctness", &gradient_correctness);
    run("model identities", &model_identities);
    run("training accuracy (noise-free synthetic corpus)", &training_accuracy);
    run("colormap", &colormap);
    let fx = noisy_fixture();
    run("teaching soundness", &|| teaching_soundness(&fx));
    run("determinism", &|| determinism(&fx));
    run("bundle cardinality", &|| bundle_cardinality(&fx));
    run("protocol invariants", &|| protocol(&fx));
    run("service contract", &|| service_contract(&fx));

    let failed = results.iter().filter(|(_, r)| r.is_err()).count();
    println!(
        "acceptance: {} passed, {failed} failed in {}",
        results.len() - failed,
        secs(started.elapsed())
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
