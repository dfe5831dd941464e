//! Acceptance suite: one PASS/FAIL line per criterion, then a single
//! assertion that all of them passed.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use turnpilot::completeness::{
    self, objective, synthetic, CompletenessModel, TrainConfig, FEATURE_DIM,
};
use turnpilot::corpus::{truncate_words, QAExample};
use turnpilot::experiment::{self, RunDir, LIVE_TARGETS};
use turnpilot::providers::EmbedClient;
use turnpilot::semscore::{box_whisker, cosine_similarity, histogram, semscore, summarize};
use turnpilot::turnsim::{self, LatencyProfile, TurnInput, TurnPolicy, HUMAN_NORMS};

const SEED: u64 = 20_240_611;

fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    dot / (na.sqrt() * nb.sqrt())
}

fn criterion_1() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for _ in 0..100 {
        let dim = rng.random_range(1..=8);
        let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
        let got = cosine_similarity(&a, &b).unwrap();
        let want = oracle_cosine(&a, &b);
        assert!((got - want).abs() <= 1e-12, "cosine {got} vs oracle {want}");
        assert!((-1.0..=1.0).contains(&got));
        let own = cosine_similarity(&a, &a).unwrap();
        assert!((own - 1.0).abs() <= 1e-9 && (-1.0..=1.0).contains(&own));
    }
    let embedder = EmbedClient::deterministic();
    for text in [
        "who wrote hamlet",
        "the sky is blue",
        "A B C d e f",
        "mixed 123 tokens and tokens",
    ] {
        let s = semscore(text, text, &embedder).unwrap();
        assert!((s - 1.0).abs() <= 1e-9, "semscore(x, x) = {s}");
    }
}

fn oracle_type7(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = p / 100.0 * (v.len() as f64 - 1.0);
    let below = rank as usize;
    let frac = rank - below as f64;
    if below + 1 >= v.len() {
        v[below]
    } else {
        v[below] + frac * (v[below + 1] - v[below])
    }
}

fn criterion_2() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let values: Vec<f64> = (0..1000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ps = [1u32, 5, 10, 25, 50, 75, 90, 95, 99];
    let s = summarize(&values, &ps).unwrap();
    let n = values.len() as f64;
    let mut total = 0.0;
    for v in &values {
        total += v;
    }
    let mean = total / n;
    let mut ss = 0.0;
    for v in &values {
        ss += (v - mean) * (v - mean);
    }
    assert_eq!(s.n, 1000);
    assert_eq!(s.mean, mean);
    assert_eq!(s.sd, (ss / n).sqrt());
    assert_eq!(s.min, values.iter().copied().fold(f64::INFINITY, f64::min));
    assert_eq!(
        s.max,
        values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    );
    for p in ps {
        assert_eq!(s.percentiles[&p], oracle_type7(&values, p as f64), "p{p}");
    }

    let (lo, hi, k) = (-1.0, 1.0, 20);
    let h = histogram(&values, k, (lo, hi)).unwrap();
    assert_eq!(h.bins.len(), k);
    for (i, bin) in h.bins.iter().enumerate() {
        let last = i == k - 1;
        let count = values
            .iter()
            .filter(|&&v| v >= bin.bin_lo && (v < bin.bin_hi || (last && v <= bin.bin_hi)))
            .count();
        assert_eq!(bin.count, count, "bin {i}");
        assert_eq!(bin.bin_lo, if i == 0 { lo } else { h.bins[i - 1].bin_hi });
    }
    assert_eq!(h.bins[k - 1].bin_hi, hi);
    assert_eq!(
        h.bins.iter().map(|b| b.count).sum::<usize>() + h.below_range + h.above_range,
        values.len()
    );

    let b = box_whisker(&values).unwrap();
    let q1 = oracle_type7(&values, 25.0);
    let q3 = oracle_type7(&values, 75.0);
    assert_eq!(
        (b.q1, b.median, b.q3),
        (q1, oracle_type7(&values, 50.0), q3)
    );
    let iqr = q3 - q1;
    let inside: Vec<f64> = values
        .iter()
        .copied()
        .filter(|v| *v >= q1 - 1.5 * iqr && *v <= q3 + 1.5 * iqr)
        .collect();
    assert_eq!(
        b.whisker_low,
        inside.iter().copied().fold(f64::INFINITY, f64::min)
    );
    assert_eq!(
        b.whisker_high,
        inside.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    );
    assert_eq!(b.outliers.len(), values.len() - inside.len());
}

fn criterion_3() {
    let vocab = [
        "who", "what", "is", "the", "capital", "of", "france", "in", "1990", "river", "song", "won",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    for _ in 0..10_000 {
        let n = rng.random_range(1..=20);
        let words: Vec<&str> = (0..n)
            .map(|_| vocab[rng.random_range(0..vocab.len())])
            .collect();
        let q = words.join(" ");
        let k = rng.random_range(0..n);
        let t = truncate_words(&q, k).unwrap();
        assert_eq!(t.split_whitespace().count(), n - k);
        assert_eq!(t, words[..n - k].join(" "));
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n - a);
        let once = truncate_words(&q, a + b).unwrap();
        let twice = truncate_words(&truncate_words(&q, a).unwrap(), b).unwrap();
        assert_eq!(once, twice, "q={q:?} a={a} b={b}");
    }
}

fn criterion_4() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let r1 = common::fixture_pipeline(d1.path());
    let r2 = common::fixture_pipeline(d2.path());
    let digest = r1.digest().unwrap();
    assert_eq!(digest, r2.digest().unwrap());

    let responses = r2.responses().unwrap();
    let kept: Vec<_> = responses.iter().step_by(2).cloned().collect();
    let deleted = responses.len() - kept.len();
    r2.write("responses.jsonl", &kept).unwrap();
    let (summary, invocations) = common::generate(&r2);
    assert_eq!(summary.requested, deleted);
    assert_eq!(invocations, deleted);
    common::score_and_analyze(&r2);
    assert_eq!(r2.digest().unwrap(), digest);
}

fn assert_json_close(path: &str, got: &Value, want: &Value, tol: f64) {
    match (got, want) {
        (Value::Number(a), Value::Number(b)) => {
            let (a, b) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            assert!((a - b).abs() <= tol, "{path}: {a} vs {b}");
        }
        (Value::Object(a), Value::Object(b)) => {
            assert_eq!(
                a.keys().collect::<Vec<_>>(),
                b.keys().collect::<Vec<_>>(),
                "{path}: keys"
            );
            for (k, v) in a {
                assert_json_close(&format!("{path}.{k}"), v, &b[k], tol);
            }
        }
        (Value::Array(a), Value::Array(b)) => {
            assert_eq!(a.len(), b.len(), "{path}: length");
            for (i, (x, y)) in a.iter().zip(b).enumerate() {
                assert_json_close(&format!("{path}[{i}]"), x, y, tol);
            }
        }
        _ => assert_eq!(got, want, "{path}"),
    }
}

fn criterion_5() {
    let dir = tempfile::tempdir().unwrap();
    let run = common::fixture_pipeline(dir.path());
    let stats: Value = serde_json::to_value(run.stats().unwrap()).unwrap();
    let snapshot_path = common::fixture("expected_stats.json");
    if std::env::var_os("TURNPILOT_UPDATE_SNAPSHOT").is_some() {
        let doc = serde_json::json!({
            "live_targets": LIVE_TARGETS,
            "live_targets_note": "Reference-vs-res0 statistics and level-1 retained fraction expected from the \
                credentialed GPT-4 run over 1,000 NQ dev examples (tolerance per statistic; level-1 fraction \
                must exceed the minimum). That run needs network access and is not part of the offline suite; \
                see examples/live_reproduction.rs.",
            "stats": stats,
        });
        std::fs::write(
            &snapshot_path,
            serde_json::to_string_pretty(&doc).unwrap() + "\n",
        )
        .unwrap();
    }
    let snapshot: Value = serde_json::from_slice(&std::fs::read(&snapshot_path).unwrap()).unwrap();
    assert_json_close("stats", &stats, &snapshot["stats"], 1e-9);
    let t = &snapshot["live_targets"];
    for (key, want) in [
        ("mean", 0.68),
        ("sd", 0.16),
        ("min", 0.03),
        ("max", 0.97),
        ("p75", 0.81),
        ("tolerance", 0.05),
        ("level1_retained_fraction_min", 0.60),
    ] {
        assert_eq!(t[key].as_f64(), Some(want), "live_targets.{key}");
    }
}

fn criterion_6() {
    let turn = TurnInput::new("q", "how do i get from new york to boston", 60);
    let groq =
        turnsim::simulate_turn(&turn, &TurnPolicy::Serial, &LatencyProfile::paper_groq()).unwrap();
    let slow =
        turnsim::simulate_turn(&turn, &TurnPolicy::Serial, &LatencyProfile::paper_slow()).unwrap();
    assert!((groq.gap_ms - 1000.0).abs() <= 1.0, "groq {}", groq.gap_ms);
    assert!((slow.gap_ms - 1400.0).abs() <= 1.0, "slow {}", slow.gap_ms);
    for g in [groq.gap_ms, slow.gap_ms] {
        assert!((1000.0..=1500.0).contains(&g));
    }
    // "avatar sequel": 3 + 2 vowel groups; at 5 syllables/s the last two
    // words take exactly one second.
    let profile = LatencyProfile {
        speaking_rate_syll_per_s: 5.0,
        ..LatencyProfile::paper_groq()
    };
    let turn = TurnInput::new("q", "when is the avatar sequel", 60);
    let eager = turnsim::simulate_turn(&turn, &TurnPolicy::Eager { k: 2 }, &profile).unwrap();
    assert!(eager.gap_ms.abs() <= 1.0, "eager {}", eager.gap_ms);
    assert!(HUMAN_NORMS.in_window(eager.gap_ms));
}

fn oracle_syllables(word: &str) -> usize {
    let w = word.to_lowercase();
    if !w.chars().any(|c| c.is_alphabetic()) {
        return 0;
    }
    let runs = w
        .split(|c: char| !"aeiouy".contains(c))
        .filter(|s| !s.is_empty())
        .count();
    runs.max(1)
}

fn criterion_7() {
    let (corpus, _) =
        turnpilot::corpus::load_corpus(&common::fixture("nq_fixture.jsonl"), 1000, false).unwrap();
    let turns: Vec<TurnInput> = corpus
        .iter()
        .map(|e: &QAExample| TurnInput::new(&e.id, &e.question, 60))
        .collect();
    for name in turnsim::BUILTIN_PROFILES {
        if name == "paper-azure-asr" {
            continue;
        }
        let r = turnsim::run_policy(
            &turns,
            &TurnPolicy::Serial,
            &LatencyProfile::builtin(name).unwrap(),
            None,
        )
        .unwrap();
        assert_eq!(r.fraction_in_window, 0.0, "{name}");
        assert!(r.turns.iter().all(|t| t.gap_ms >= 1000.0));
    }
    let report = turnsim::run_policy(
        &turns,
        &TurnPolicy::Eager { k: 2 },
        &LatencyProfile::paper_groq(),
        None,
    )
    .unwrap();
    assert!(report.fraction_in_window > 0.0);
    let mut expected = Vec::new();
    let mut expected_failures = BTreeSet::new();
    for e in &corpus {
        let words: Vec<&str> = e.question.split_whitespace().collect();
        if words.len() <= 2 {
            expected_failures.insert(e.id.clone());
            continue;
        }
        let credit: usize = words[words.len() - 2..]
            .iter()
            .map(|w| oracle_syllables(w))
            .sum();
        expected.push((e.id.clone(), 650.0 + 250.0 + 100.0 - credit as f64 * 250.0));
    }
    assert_eq!(report.turns.len(), expected.len());
    for (t, (id, gap)) in report.turns.iter().zip(&expected) {
        assert_eq!(&t.example_id, id);
        assert!(
            (t.gap_ms - gap).abs() <= 1e-9,
            "{id}: {} vs {gap}",
            t.gap_ms
        );
    }
    let failures: BTreeSet<String> = report
        .failures
        .iter()
        .map(|f| f.example_id.clone())
        .collect();
    assert_eq!(failures, expected_failures);
    let in_window = expected
        .iter()
        .filter(|(_, g)| (-280.0..=758.0).contains(g))
        .count();
    assert_eq!(
        report.fraction_in_window,
        in_window as f64 / expected.len() as f64
    );
}

fn criterion_8() {
    let data = synthetic::separable(1000, SEED);
    let config = TrainConfig::default();
    let (train, held_out) = completeness::split(&data, 0.8, config.seed);
    let model = completeness::train(&train, &config).unwrap();
    let m = completeness::evaluate(&model, &held_out).unwrap();
    assert!(m.accuracy >= 0.95, "accuracy {}", m.accuracy);
    assert!(m.roc_auc.unwrap() >= 0.98, "auc {:?}", m.roc_auc);

    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 8);
    let mut weights = vec![0.0; FEATURE_DIM];
    for w in weights.iter_mut().take(synthetic::SYNTHETIC_DIM) {
        *w = rng.random_range(-1.0..1.0);
    }
    let bias = rng.random_range(-0.5..0.5);
    let l2 = 1e-2;
    let h = 1e-5;
    for _ in 0..10 {
        let inst = &data[rng.random_range(0..data.len())];
        let one = std::slice::from_ref(inst);
        let (_, grad, grad_b) = objective(&weights, bias, one, l2);
        let check = |analytic: f64, numeric: f64| {
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(
                rel <= 1e-4,
                "analytic {analytic} numeric {numeric} rel {rel}"
            );
        };
        for j in 0..synthetic::SYNTHETIC_DIM {
            let mut up = weights.clone();
            let mut down = weights.clone();
            up[j] += h;
            down[j] -= h;
            let numeric =
                (objective(&up, bias, one, l2).0 - objective(&down, bias, one, l2).0) / (2.0 * h);
            check(grad[j], numeric);
        }
        let numeric = (objective(&weights, bias + h, one, l2).0
            - objective(&weights, bias - h, one, l2).0)
            / (2.0 * h);
        check(grad_b, numeric);
    }

    let prefix_model =
        completeness::train(&synthetic::prefix_instances(400, SEED), &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    prefix_model.save(&path).unwrap();
    let loaded = CompletenessModel::load(&path).unwrap();
    for (prefix, _) in synthetic::prefixes(100, SEED + 1) {
        let a = completeness::predict(&prefix_model, &prefix).unwrap();
        let b = completeness::predict(&loaded, &prefix).unwrap();
        assert_eq!(a.to_bits(), b.to_bits(), "{prefix}");
    }
}

fn criterion_9() {
    let dir = tempfile::tempdir().unwrap();
    let run = common::fixture_pipeline(dir.path());
    let r = &run.stats().unwrap().retained;
    assert!(
        r[&1].count >= r[&2].count && r[&2].count >= r[&3].count,
        "{r:?}"
    );
    assert!(r[&1].count > 0);
}

fn turnpilot(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_turnpilot"));
    for (k, _) in std::env::vars() {
        if k.starts_with("TURNPILOT_") {
            cmd.env_remove(k);
        }
    }
    cmd.args(args).envs(envs.iter().copied()).output().unwrap()
}

fn assert_round_trip<T: serde::de::DeserializeOwned + serde::Serialize>(path: &Path) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut again = String::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let record: T = serde_json::from_str(line).unwrap();
        again.push_str(&serde_json::to_string(&record).unwrap());
        again.push('\n');
    }
    assert_eq!(again, text, "{} does not round-trip", path.display());
}

fn criterion_10() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("demo");
    let run_s = run.to_str().unwrap();
    let corpus = common::fixture("nq_fixture.jsonl");
    let recorded = common::fixture("recorded_responses.jsonl");
    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();

    type Check = fn(&Output);
    type Case<'a> = (Vec<&'a str>, Vec<(&'a str, &'a str)>, i32, Check);
    let no_check: Check = |_| {};
    let cases: Vec<Case> = vec![
        (
            vec![
                "ingest",
                "--run",
                run_s,
                "--input",
                corpus.to_str().unwrap(),
            ],
            vec![],
            0,
            no_check,
        ),
        (vec!["truncate", "--run", run_s], vec![], 0, no_check),
        (
            vec![
                "generate",
                "--run",
                run_s,
                "--recorded",
                recorded.to_str().unwrap(),
            ],
            vec![],
            0,
            no_check,
        ),
        (
            vec!["score", "--run", run_s, "--embedder", "deterministic"],
            vec![],
            0,
            no_check,
        ),
        (vec!["analyze", "--run", run_s], vec![], 0, no_check),
        (
            vec!["report", "--run", run_s, "--format", "csv"],
            vec![],
            0,
            no_check,
        ),
        (
            vec!["simulate", "--run", run_s, "--policy", "eager", "--k", "2"],
            vec![],
            0,
            no_check,
        ),
        (vec!["--version"], vec![], 0, |o| {
            assert_eq!(
                String::from_utf8_lossy(&o.stdout).trim(),
                turnpilot::BUILD_ID
            );
        }),
        (
            vec!["score", "--run", run_s, "--no-such-flag"],
            vec![],
            2,
            |o| {
                assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
            },
        ),
        (
            vec!["truncate", "--run", run_s, "--levels", "0,7"],
            vec![],
            2,
            no_check,
        ),
        (
            vec![
                "generate",
                "--run",
                run_s,
                "--provider",
                "remote",
                "--endpoint",
                "http://127.0.0.1:9",
            ],
            vec![],
            1,
            |o| assert!(String::from_utf8_lossy(&o.stderr).contains("TURNPILOT_CHAT_KEY")),
        ),
        (
            vec![
                "report",
                "--run",
                empty.to_str().unwrap(),
                "--format",
                "svg",
            ],
            vec![],
            1,
            no_check,
        ),
    ];
    assert_eq!(cases.len(), 12);

    // Stage outputs exist but hold no scores.
    std::fs::write(empty.join("scores.jsonl"), "").unwrap();
    std::fs::write(empty.join("labels.jsonl"), "").unwrap();

    for (i, (args, envs, code, check)) in cases.iter().enumerate() {
        if i == 11 {
            std::fs::copy(run.join("stats.json"), empty.join("stats.json")).unwrap();
        }
        let out = turnpilot(args, envs);
        assert_eq!(
            out.status.code(),
            Some(*code),
            "turnpilot {args:?}: stderr {}",
            String::from_utf8_lossy(&out.stderr)
        );
        check(&out);
    }

    for name in ["histogram.csv", "boxplots.csv", "retained.csv"] {
        let text = std::fs::read_to_string(run.join("figures").join(name)).unwrap();
        assert!(text.lines().count() >= 2, "{name}");
    }

    assert_round_trip::<turnpilot::corpus::VariantRecord>(&run.join("corpus.jsonl"));
    assert_round_trip::<turnpilot::corpus::VariantRecord>(&run.join("variants.jsonl"));
    assert_round_trip::<experiment::ResponseRecord>(&run.join("responses.jsonl"));
    assert_round_trip::<turnpilot::semscore::ScoreRecord>(&run.join("scores.jsonl"));
    assert_round_trip::<experiment::TruncationLabel>(&run.join("labels.jsonl"));
    let stats_text = std::fs::read_to_string(run.join("stats.json")).unwrap();
    let stats: experiment::StatsReport = serde_json::from_str(&stats_text).unwrap();
    assert_eq!(
        serde_json::to_string_pretty(&stats).unwrap() + "\n",
        stats_text
    );
    let rd = RunDir::new(&run);
    let manifest = rd.manifest().unwrap();
    assert_eq!(manifest.build_id, turnpilot::BUILD_ID);
    assert!(["ingest", "truncate", "generate", "score", "analyze"]
        .iter()
        .all(|s| manifest.stages.contains_key(*s)));
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn()); 10] = [
        (
            "cosine and semscore match an independent oracle",
            criterion_1,
        ),
        (
            "summary, histogram and box-whisker match brute force",
            criterion_2,
        ),
        ("truncation composition and word-count laws", criterion_3),
        ("end-to-end digest is stable and resumable", criterion_4),
        ("fixture stats match the committed snapshot", criterion_5),
        ("serial and eager gap arithmetic", criterion_6),
        (
            "human-window compliance against a per-turn oracle",
            criterion_7,
        ),
        (
            "classifier accuracy, gradient check and save/load",
            criterion_8,
        ),
        ("retained counts fall with truncation depth", criterion_9),
        ("CLI exit codes and lossless stage files", criterion_10),
    ];
    let mut results = BTreeMap::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let ok = catch_unwind(AssertUnwindSafe(f)).is_ok();
        // Written to the real stdout so the lines survive test capture.
        let verdict = if ok { "PASS" } else { "FAIL" };
        writeln!(
            std::io::stdout(),
            "criterion {:>2}: {verdict} {name}",
            i + 1
        )
        .unwrap();
        results.insert(i + 1, ok);
    }
    let failed: Vec<usize> = results
        .iter()
        .filter(|(_, ok)| !**ok)
        .map(|(i, _)| *i)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn live_target_checks_are_reported_not_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let run = common::fixture_pipeline(dir.path());
    let checks = experiment::check_live_targets(&run.stats().unwrap());
    assert_eq!(checks.len(), 6);
    assert!(checks.iter().all(|c| c.observed.is_finite()));
    // The offline fixture is not the live corpus; the checks only report.
    let names: Vec<&str> = checks.iter().map(|c| c.name).collect();
    assert_eq!(
        names,
        [
            "mean",
            "sd",
            "min",
            "max",
            "p75",
            "level1_retained_fraction"
        ]
    );
}
