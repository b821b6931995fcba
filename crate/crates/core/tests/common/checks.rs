//! Criterion checks shared by the acceptance harness and the oracle tests.
//! Each returns `Ok(detail)` on success and `Err(detail)` on failure.

use std::path::Path;
use std::process::Command;

use rand::Rng;

use sagnn::eval::{accuracy, auc, confusion, f1};
use sagnn::graph::{build_graph, read_graph, write_edge_tsv, read_edge_tsv, write_graph};
use sagnn::model::{sagnn_forward_full, SagnnConfig, SagnnParams};
use sagnn::nn::{sigmoid, Activation, AggregatorKind, Matrix, ParamStore, Tape};
use sagnn::sampler::{exact_two_step_distribution, sample_all, sample_neighborhood, stream_id, NeighborhoodStatus, WalkConfig};
use sagnn::synth::SynthConfig;
use sagnn::weak_label::{extract_hashtags, label_and_clean, read_corpus, write_corpus};

use super::*;

pub type Check = Result<String, String>;

const AGGREGATORS: [AggregatorKind; 4] = [
    AggregatorKind::Mean,
    AggregatorKind::Max,
    AggregatorKind::Sum,
    AggregatorKind::WeightedSum,
];

fn segment_weights(offsets: &[usize], r: &mut ChaCha8Rng) -> Vec<f64> {
    let mut w = Vec::new();
    for s in offsets.windows(2) {
        let raw: Vec<f64> = (s[0]..s[1]).map(|_| r.gen_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        w.extend(raw.into_iter().map(|x| x / total));
    }
    w
}

/// Every differentiable op, then the full two-layer, width-4 model.
pub fn gradients(seeds: &[u64]) -> Check {
    let mut worst: Vec<(String, f64)> = Vec::new();
    let mut record = |name: &str, err: f64| match worst.iter_mut().find(|(n, _)| n == name) {
        Some(slot) => slot.1 = slot.1.max(err),
        None => worst.push((name.to_owned(), err)),
    };
    for &seed in seeds {
        let mut r = rng(seed);
        let mut store = ParamStore::default();
        let a = store.add("a", random_matrix(&mut r, 6, 3));
        let b = store.add("b", random_matrix(&mut r, 3, 5));
        let c = store.add("c", random_matrix(&mut r, 6, 3));
        let factors: Vec<f64> = (0..6).map(|_| r.gen_range(-2.0..2.0)).collect();
        let offsets = vec![0, 2, 5, 6];
        let weights = segment_weights(&offsets, &mut r);

        type Build<'a> = Box<dyn Fn(&mut Tape, &ParamStore) -> Var + 'a>;
        let unary = |op: fn(&mut Tape, Var) -> Var| -> Build {
            Box::new(move |t: &mut Tape, s: &ParamStore| {
                let x = t.param(s, a).unwrap();
                let y = op(t, x);
                scalarize(t, y, seed)
            })
        };
        let mut cases: Vec<(String, Build)> = vec![
            (
                "matmul".into(),
                Box::new(move |t: &mut Tape, s: &ParamStore| {
                    let (x, w) = (t.param(s, a).unwrap(), t.param(s, b).unwrap());
                    let y = t.matmul(x, w).unwrap();
                    scalarize(t, y, seed)
                }),
            ),
            (
                "add".into(),
                Box::new(move |t: &mut Tape, s: &ParamStore| {
                    let (x, z) = (t.param(s, a).unwrap(), t.param(s, c).unwrap());
                    let y = t.add(x, z).unwrap();
                    scalarize(t, y, seed)
                }),
            ),
            (
                "concat_cols".into(),
                Box::new(move |t: &mut Tape, s: &ParamStore| {
                    let (x, z) = (t.param(s, a).unwrap(), t.param(s, c).unwrap());
                    let y = t.concat_cols(x, z).unwrap();
                    scalarize(t, y, seed)
                }),
            ),
            ("relu".into(), unary(|t, x| t.relu(x).unwrap())),
            ("sigmoid".into(), unary(|t, x| t.sigmoid(x).unwrap())),
            ("row_l2_normalize".into(), unary(|t, x| t.row_l2_normalize(x).unwrap())),
            ("gather_rows".into(), unary(|t, x| t.gather_rows(x, vec![2, 0, 2, 5, 1]).unwrap())),
            (
                "scale_rows".into(),
                Box::new({
                    let factors = factors.clone();
                    move |t: &mut Tape, s: &ParamStore| {
                        let x = t.param(s, a).unwrap();
                        let y = t.scale_rows(x, factors.clone()).unwrap();
                        scalarize(t, y, seed)
                    }
                }),
            ),
        ];
        for kind in AGGREGATORS {
            let offsets = offsets.clone();
            let weights = weights.clone();
            cases.push((
                format!("aggregate_{kind:?}"),
                Box::new(move |t: &mut Tape, s: &ParamStore| {
                    let x = t.param(s, a).unwrap();
                    let y = t.aggregate(x, offsets.clone(), kind, weights.clone()).unwrap();
                    scalarize(t, y, seed)
                }),
            ));
        }
        for (name, build) in &cases {
            record(name, max_grad_error(&mut store, build.as_ref()));
        }

        // full model over fixed neighborhoods
        let graph = random_graph(seed, 16, 10, 20);
        let features = random_matrix(&mut r, graph.num_tweets(), 4);
        let labels: Vec<f64> = (0..graph.num_tweets()).map(|_| f64::from(r.gen_range(0..2u8))).collect();
        let walk = WalkConfig {
            num_walks: 30,
            top_k: 4,
            rng_seed: seed,
            exclude_self: true,
        };
        let neighborhoods = sample_all(&graph, &walk, 0).unwrap();
        for kind in AGGREGATORS {
            for aware in [true, false] {
                let cfg = SagnnConfig {
                    num_layers: 2,
                    hidden_dim: 4,
                    aggregator: kind,
                    edge_type_aware: aware,
                    activation: Activation::Relu,
                };
                let mut store = ParamStore::default();
                let params = SagnnParams::init(&mut store, &cfg, 4, &mut r);
                let w_o = store.add("head.w_o", random_matrix(&mut r, 4, 1));
                let build = |t: &mut Tape, s: &ParamStore| {
                    let outs = sagnn_forward_full(t, s, &params, &cfg, &features, &neighborhoods).unwrap();
                    let w = t.param(s, w_o).unwrap();
                    let logits = t.matmul(*outs.last().unwrap(), w).unwrap();
                    let probs = t.sigmoid(logits).unwrap();
                    t.bce_loss(probs, &labels).unwrap()
                };
                let name = format!("model_{kind:?}{}", if aware { "" } else { "_shared" });
                record(&name, max_grad_error(&mut store, &build));
            }
        }
    }
    let (name, err) = worst
        .iter()
        .cloned()
        .fold((String::new(), 0.0), |acc, (n, e)| if e > acc.1 { (n, e) } else { acc });
    let detail = format!("{} checks x {} seeds, max rel err {err:.2e} ({name})", worst.len(), seeds.len());
    if err <= 1e-4 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Library forward vs the loop-based reference on small random graphs.
pub fn algorithm_fidelity() -> Check {
    let mut max_diff: f64 = 0.0;
    let mut max_norm_dev: f64 = 0.0;
    let mut runs = 0;
    for seed in 0..3u64 {
        let graph = random_graph(100 + seed, 25, 20, 30);
        assert!(graph.num_tweets() + graph.num_users() <= 50);
        let mut r = rng(seed);
        let features = random_matrix(&mut r, graph.num_tweets(), 5);
        let walk = WalkConfig {
            num_walks: 25,
            top_k: 5,
            rng_seed: seed,
            exclude_self: true,
        };
        let neighborhoods = sample_all(&graph, &walk, 0).unwrap();
        for kind in AGGREGATORS {
            for aware in [true, false] {
                let cfg = SagnnConfig {
                    num_layers: 3,
                    hidden_dim: 6,
                    aggregator: kind,
                    edge_type_aware: aware,
                    activation: Activation::Relu,
                };
                let mut store = ParamStore::default();
                let params = SagnnParams::init(&mut store, &cfg, 5, &mut r);
                let mut tape = Tape::new();
                let outs = sagnn_forward_full(&mut tape, &store, &params, &cfg, &features, &neighborhoods).unwrap();
                let reference = reference_algorithm(&features, &neighborhoods, &store, 3, aware, kind);
                for (out, want) in outs.iter().zip(&reference) {
                    let got = tape.value(*out);
                    let want = Matrix::from_rows(want).unwrap();
                    max_diff = max_diff.max(got.max_abs_diff(&want));
                    for i in 0..got.rows() {
                        let n = got.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
                        // rows may be exactly zero when every pre-activation is negative
                        if n != 0.0 {
                            max_norm_dev = max_norm_dev.max((n - 1.0).abs());
                        }
                    }
                }
                runs += 1;
            }
        }
    }
    let detail = format!("{runs} configurations, max abs diff {max_diff:.2e}, max |norm-1| {max_norm_dev:.2e}");
    if max_diff <= 1e-10 && max_norm_dev <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Empirical neighbor frequencies vs the exact two-step law.
pub fn sampler_oracle() -> Check {
    let mut worst_tv: f64 = 0.0;
    let mut centers = 0;
    for g in 0..10u64 {
        let graph = random_graph(500 + g, 24, 16, 25);
        let cfg = WalkConfig {
            num_walks: 10_000,
            top_k: usize::MAX,
            rng_seed: g,
            exclude_self: true,
        };
        for c in 0..graph.num_tweets() as u32 {
            let exact = exact_two_step_distribution(&graph, c, true).unwrap();
            let nb = sample_neighborhood(&graph, c, &cfg, stream_id(0, 0, u64::from(c))).unwrap();
            if exact.is_empty() {
                if nb.status != NeighborhoodStatus::SelfFallback {
                    return Err(format!("graph {g} tweet {c}: expected self fallback, got {:?}", nb.status));
                }
                continue;
            }
            let total: f64 = nb.entries.iter().map(|e| f64::from(e.visit_count)).sum();
            let mut tv = 0.0;
            for (&t, &p) in &exact {
                let q = nb.entries.iter().find(|e| e.neighbor == t).map_or(0.0, |e| f64::from(e.visit_count) / total);
                tv += (p - q).abs();
            }
            tv += nb
                .entries
                .iter()
                .filter(|e| !exact.contains_key(&e.neighbor))
                .map(|e| f64::from(e.visit_count) / total)
                .sum::<f64>();
            worst_tv = worst_tv.max(tv / 2.0);
            centers += 1;
        }
    }
    let detail = format!("10 graphs, {centers} centers, max TV {worst_tv:.4}");
    if worst_tv <= 0.05 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Without cross-camp retweets, every sampled neighbor shares the center's label.
pub fn homophily() -> Check {
    let data = synth_dataset(&SynthConfig {
        num_users: 2600,
        mean_tweets_per_user: 2.0,
        retweet_rate: 1.5,
        flip: 0.0,
        feature_dim: 4,
        seed: 11,
        ..SynthConfig::default()
    });
    let neighborhoods = sample_all(&data.graph, &WalkConfig::default(), 0).unwrap();
    let mut pairs = 0usize;
    let mut mismatched = 0usize;
    for nb in &neighborhoods {
        for e in &nb.entries {
            pairs += 1;
            if data.labels[e.neighbor as usize] != data.labels[nb.center as usize] {
                mismatched += 1;
            }
        }
    }
    let detail = format!("{} tweets, {pairs} sampled pairs, {mismatched} cross-label", data.labels.len());
    if mismatched == 0 && pairs > 0 && data.labels.len() >= 5000 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// AUC against pair enumeration, F1/accuracy against hand counts, AUC rank invariance.
pub fn metrics() -> Check {
    let mut r = rng(9);
    let mut vectors = 0;
    for _ in 0..1000 {
        let n = r.gen_range(2..60);
        // coarse scores so ties occur often
        let scores: Vec<f64> = (0..n).map(|_| f64::from(r.gen_range(-20..20)) / 4.0).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| r.gen_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let got = auc(&scores, &labels).unwrap();
        let want = brute_force_auc(&scores, &labels);
        if got != want {
            return Err(format!("auc {got:?} vs enumeration {want:?} on {scores:?} / {labels:?}"));
        }
        let squashed: Vec<f64> = scores.iter().map(|&s| sigmoid(s)).collect();
        if auc(&squashed, &labels).unwrap() != got {
            return Err("auc changed under sigmoid".into());
        }
        let pred: Vec<u8> = (0..n).map(|_| r.gen_range(0..2)).collect();
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        let mut hits = 0.0;
        for (&p, &t) in pred.iter().zip(&labels) {
            match (p, t) {
                (1, 1) => tp += 1.0,
                (1, 0) => fp += 1.0,
                (0, 1) => fn_ += 1.0,
                _ => {}
            }
            if p == t {
                hits += 1.0;
            }
        }
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = tp / (tp + fn_);
        let want_f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let got_f1 = f1(&pred, &labels).unwrap();
        if (got_f1 - want_f1).abs() > 1e-12 || accuracy(&pred, &labels).unwrap() != hits / n as f64 {
            return Err(format!("f1/accuracy mismatch on {pred:?} / {labels:?}"));
        }
        let c = confusion(&pred, &labels).unwrap();
        if c.tp + c.fp + c.tn + c.fn_ != n {
            return Err("confusion does not partition".into());
        }
        vectors += 1;
    }
    Ok(format!("{vectors} random vectors: AUC exact, F1/accuracy exact, sigmoid-invariant"))
}

/// Labeling a planted corpus equals direct rule application; no stance tag survives.
pub fn pipeline() -> Check {
    let posts = planted_corpus(1000, 3);
    let lexicon = planted_lexicon();
    let (out, report) = label_and_clean(&posts, &lexicon).map_err(|e| e.to_string())?;
    let expected = expected_labeling(&posts, &lexicon);
    let got: BTreeMap<String, (u8, Vec<String>)> =
        out.iter().map(|p| (p.id.clone(), (p.label, p.retweeters.clone()))).collect();
    if got != expected {
        let missing = expected.keys().filter(|k| !got.contains_key(*k)).count();
        let extra = got.keys().filter(|k| !expected.contains_key(*k)).count();
        return Err(format!("labeling differs: {missing} missing, {extra} unexpected"));
    }
    let by_id: HashMap<&str, &RawPost> = posts.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut leaked = 0;
    for p in &out {
        let tags = scan_tags(&p.text);
        leaked += tags.iter().filter(|t| lexicon.contains(t)).count();
        let kept: Vec<String> = scan_tags(&by_id[p.id.as_str()].text)
            .into_iter()
            .filter(|t| !lexicon.contains(t))
            .collect();
        if tags != kept {
            return Err(format!("post {}: non-lexicon tags {kept:?} became {tags:?}", p.id));
        }
        if extract_hashtags(&p.text) != tags {
            return Err(format!("extractor disagrees with scanner on '{}'", p.text));
        }
    }
    if leaked > 0 {
        return Err(format!("{leaked} lexicon tags survived cleaning"));
    }
    Ok(format!(
        "1000 posts: {} labeled, {} mixed, {} untagged, {} retweets folded; 0 lexicon tags left",
        report.labeled, report.mixed_polarity, report.no_lexicon_tag, report.retweets_folded
    ))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_sagnn"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("sagnn {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn same_bytes(a: &Path, b: &Path) -> Result<(), String> {
    let x = std::fs::read(a).map_err(|e| format!("{}: {e}", a.display()))?;
    let y = std::fs::read(b).map_err(|e| format!("{}: {e}", b.display()))?;
    if x == y {
        Ok(())
    } else {
        Err(format!("{} and {} differ", a.display(), b.display()))
    }
}

/// Duplicate-seed trials, graph and corpus round trips are byte-identical.
pub fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name);
    let s = |path: &Path| path.to_str().unwrap().to_owned();

    run_cli(&[
        "synth", "--out", &s(&p("data")), "--num-users", "300", "--mean-tweets-per-user", "2",
        "--retweet-rate", "1.5", "--feature-dim", "8", "--seed", "5",
    ])?;
    run_cli(&[
        "trials", "--data", &s(&p("data")), "--seeds", "1,1", "--out", &s(&p("trials")), "--model", "sagnn",
        "--layers", "2", "--dim", "8", "--epochs", "2", "--batch-size", "64",
    ])?;
    same_bytes(&p("trials").join("seed_0.json"), &p("trials").join("seed_1.json"))?;

    // edge list -> graph file -> graph -> graph file
    let edges_path = p("data").join("edges.tsv");
    run_cli(&["build-graph", "--edges", &s(&edges_path), "--out", &s(&p("g1.sagg"))])?;
    run_cli(&["build-graph", "--edges", &s(&edges_path), "--out", &s(&p("g2.sagg"))])?;
    same_bytes(&p("g1.sagg"), &p("g2.sagg"))?;
    let bytes = std::fs::read(p("g1.sagg")).map_err(|e| e.to_string())?;
    let graph = read_graph(&bytes).map_err(|e| e.to_string())?;
    let mut again = Vec::new();
    write_graph(&graph, &mut again).map_err(|e| e.to_string())?;
    if again != bytes {
        return Err("graph file changed after load and save".into());
    }
    let mut tsv = Vec::new();
    write_edge_tsv(&mut tsv, &graph.edge_records()).map_err(|e| e.to_string())?;
    let rebuilt = build_graph(&read_edge_tsv(&tsv[..]).map_err(|e| e.to_string())?, true).map_err(|e| e.to_string())?;
    let mut third = Vec::new();
    write_graph(&rebuilt, &mut third).map_err(|e| e.to_string())?;
    if third != bytes {
        return Err("graph changed after an edge-list round trip".into());
    }

    // corpus -> JSONL -> corpus, and annotation twice
    let posts = planted_corpus(300, 8);
    let mut jsonl = Vec::new();
    write_corpus(&mut jsonl, &posts).map_err(|e| e.to_string())?;
    let back = read_corpus(&jsonl[..]).map_err(|e| e.to_string())?;
    let mut jsonl2 = Vec::new();
    write_corpus(&mut jsonl2, &back).map_err(|e| e.to_string())?;
    if back != posts || jsonl2 != jsonl {
        return Err("corpus changed after a JSONL round trip".into());
    }
    std::fs::write(p("corpus.jsonl"), &jsonl).map_err(|e| e.to_string())?;
    let mut lex = Vec::new();
    planted_lexicon().write_tsv(&mut lex).map_err(|e| e.to_string())?;
    std::fs::write(p("lexicon.tsv"), &lex).map_err(|e| e.to_string())?;
    for out in ["ann1", "ann2"] {
        run_cli(&[
            "annotate", "--corpus", &s(&p("corpus.jsonl")), "--lexicon", &s(&p("lexicon.tsv")), "--out",
            &s(&p(out)), "--feature-dim", "32",
        ])?;
    }
    let mut files = 0;
    for entry in std::fs::read_dir(p("ann1")).map_err(|e| e.to_string())? {
        let name = entry.map_err(|e| e.to_string())?.file_name();
        same_bytes(&p("ann1").join(&name), &p("ann2").join(&name))?;
        files += 1;
    }
    Ok(format!(
        "duplicate-seed reports identical; graph file, edge list and corpus round trips identical; {files} annotate outputs identical"
    ))
}
