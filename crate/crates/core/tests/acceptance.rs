//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, HashSet};
use std::ops::Range;
use std::time::{Duration, Instant};

use spanft::dict::{build_dictionary, count_ngrams_lines, CountConfig, NgramDictionary};
use spanft::encoder::{
    forward, grad_check, ContextualEmbeddings, EncoderParams, GradCheckDims, SpanLimits, Variant,
};
use spanft::frozen::{read_embeddings, write_embeddings, EmbeddingMatrix, ToyEncoderConfig};
use spanft::metrics::{
    classification_metrics, matthews_corr, mcnemar_exact, mcnemar_from_counts, pearson_corr,
};
use spanft::rng::SplitMix64;
use spanft::segment::{segment_greedy, sentences_from_lines, span_stats, WordSequence};
use spanft::synth::phrase_task;
use spanft::train::{prepare, train, Architecture, EmbeddingSource, Segmentation, TrainConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Box<dyn Fn() -> Status>);

enum Status {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, budget: Duration) -> Result<(), String> {
    check(elapsed <= budget, || {
        format!("took {elapsed:.1?}, budget {budget:?}")
    })
}

// ---------------------------------------------------------------- 1

const ORACLE_PUNCT: &[char] = &[
    ',', '.', '!', '?', ';', '"', '(', ')', '«', '»', '—', '…', '¿',
];

fn oracle_normalize(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in line.split_whitespace() {
        let mut cur = String::new();
        for ch in chunk.chars() {
            if ORACLE_PUNCT.contains(&ch) {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            } else {
                cur.extend(ch.to_lowercase());
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

fn oracle_counts(lines: &[String], max_n: usize) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for line in lines {
        let words = oracle_normalize(line);
        for n in 2..=max_n {
            for w in words.windows(n) {
                *counts.entry(w.join(" ")).or_insert(0) += 1;
            }
        }
    }
    counts
}

fn random_corpus(rng: &mut SplitMix64, max_bytes: usize) -> Vec<String> {
    const WORDS: &[&str] = &[
        "the",
        "The",
        "THE",
        "of",
        "new",
        "York",
        "city",
        "Ünïcode",
        "straße",
        "Ωmega",
        "été",
        "data",
        "a",
        "and",
        "river",
        "Bank",
        "x",
        "y",
        "z",
        "naïve",
    ];
    const SPACES: &[&str] = &[" ", " ", " ", "  ", "\t", "\u{2003}", "\u{3000}"];
    let lines = 200 + rng.below(3000) as usize;
    let vocab = 3 + rng.below(WORDS.len() as u64 - 2) as usize;
    let mut out = Vec::with_capacity(lines);
    let mut bytes = 0;
    for _ in 0..lines {
        let len = rng.below(25) as usize;
        let mut line = String::new();
        for i in 0..len {
            if i > 0 {
                line.push_str(SPACES[rng.below(SPACES.len() as u64) as usize]);
            }
            if rng.below(8) == 0 {
                line.push(ORACLE_PUNCT[rng.below(ORACLE_PUNCT.len() as u64) as usize]);
            }
            line.push_str(WORDS[rng.below(vocab as u64) as usize]);
            if rng.below(5) == 0 {
                line.push(ORACLE_PUNCT[rng.below(ORACLE_PUNCT.len() as u64) as usize]);
            }
        }
        bytes += line.len() + 1;
        if bytes > max_bytes {
            break;
        }
        out.push(line);
    }
    out
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(1001);
    let mut total_bytes = 0;
    let mut total_ngrams = 0;
    let corpora = 24;
    for c in 0..corpora {
        let lines = random_corpus(&mut rng, 1 << 20);
        total_bytes += lines.iter().map(|l| l.len() + 1).sum::<usize>();
        let max_n = 2 + rng.below(4) as usize;
        let mut config = CountConfig::new(max_n, 20 + rng.below(5000) as usize);
        config.threads = 1 + rng.below(4) as usize;
        let counts = count_ngrams_lines(&lines, &config).map_err(|e| format!("corpus {c}: {e}"))?;
        let oracle = oracle_counts(&lines, max_n);
        total_ngrams += oracle.len();
        let got = counts.into_map();
        if got != oracle {
            let diff = oracle
                .iter()
                .find(|(k, v)| got.get(*k) != Some(v))
                .map(|(k, v)| format!("{k:?}: oracle {v}, got {:?}", got.get(k)))
                .or_else(|| {
                    got.keys()
                        .find(|k| !oracle.contains_key(*k))
                        .map(|k| format!("extra key {k:?}"))
                });
            return Err(format!(
                "corpus {c} (max_n {max_n}): {}",
                diff.unwrap_or_default()
            ));
        }
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "{corpora} corpora, {:.1} MB, {total_ngrams} distinct n-grams, exact match in {:.1?}",
        total_bytes as f64 / 1e6,
        start.elapsed()
    ))
}

// ---------------------------------------------------------------- 2

const WIKITEXT_ENV: &str = "SPANFT_WIKITEXT103";

fn criterion_2() -> Status {
    let Some(path) = std::env::var_os(WIKITEXT_ENV) else {
        return Status::Skip(format!(
            "set {WIKITEXT_ENV} to the wikitext-103 training file to run"
        ));
    };
    let start = Instant::now();
    let run = || -> spanft::Result<usize> {
        let file = std::fs::File::open(&path)?;
        let mut config = CountConfig::new(5, 20_000_000);
        config.threads = std::thread::available_parallelism().map_or(1, |n| n.get());
        let mut counter = spanft::dict::NgramCounter::new(config)?;
        spanft::dict::feed_reader(std::io::BufReader::new(file), &mut counter)?;
        Ok(spanft::dict::build_dictionary_streaming(counter.finish()?, 10)?.size())
    };
    match run() {
        Ok(size) if size >= 400_000 => Status::Pass(format!(
            "{size} entries with n <= 5, count >= 10 in {:.1?}",
            start.elapsed()
        )),
        Ok(size) => Status::Fail(format!("only {size} entries")),
        Err(e) => Status::Fail(e.to_string()),
    }
}

// ---------------------------------------------------------------- 3

/// Scans every entry at every position; no hashing, no length bound.
fn oracle_segment(entries: &[Vec<String>], words: &[String]) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let best = entries
            .iter()
            .filter(|e| words[i..].starts_with(e))
            .map(Vec::len)
            .max()
            .unwrap_or(1);
        spans.push(i..i + best);
        i += best;
    }
    spans
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(3003);
    let vocab: Vec<String> = (0..6).map(|i| format!("w{i}")).collect();
    let pick = |rng: &mut SplitMix64| vocab[rng.below(vocab.len() as u64) as usize].clone();
    let mut multiword = 0;
    for case in 0..1000 {
        let max_n = 2 + rng.below(4) as usize;
        let mut entries: Vec<Vec<String>> = Vec::new();
        for _ in 0..rng.below(30) {
            let n = 2 + rng.below(max_n as u64 - 1) as usize;
            let e: Vec<String> = (0..n).map(|_| pick(&mut rng)).collect();
            if !entries.contains(&e) {
                entries.push(e);
            }
        }
        let dict =
            NgramDictionary::from_entries(max_n, 1, entries.iter().map(|e| (e.join(" "), 1u64)))
                .map_err(|e| e.to_string())?;
        let len = 1 + rng.below(30) as usize;
        let words: Vec<String> = (0..len).map(|_| pick(&mut rng)).collect();
        let seq =
            WordSequence::from_words(words.clone(), words.join(" ")).map_err(|e| e.to_string())?;
        let got = segment_greedy(&dict, &seq);
        let expected = oracle_segment(&entries, &words);
        check(got.spans() == expected.as_slice(), || {
            format!(
                "case {case}: {words:?} got {:?}, oracle {expected:?}",
                got.spans()
            )
        })?;
        let keys: HashSet<String> = entries.iter().map(|e| e.join(" ")).collect();
        let mut pos = 0;
        for s in got.spans() {
            check(s.start == pos && s.end > s.start, || {
                format!("case {case}: not contiguous at {s:?}")
            })?;
            if s.len() > 1 {
                multiword += 1;
                check(keys.contains(&words[s.clone()].join(" ")), || {
                    format!("case {case}: span {s:?} not in dictionary")
                })?;
            }
            pos = s.end;
        }
        check(pos == words.len(), || {
            format!("case {case}: partition does not cover the sentence")
        })?;
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "1000 pairs, {multiword} multiword spans, exact match in {:.1?}",
        start.elapsed()
    ))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut worst = (0.0f64, String::new());
    let mut configs = 0;
    let mut failures = Vec::new();
    for variant in Variant::SPAN_VARIANTS {
        for d in [2, 3, 5] {
            for r in [1, 2, 4] {
                for l in [1, 3, 5] {
                    let dims = GradCheckDims {
                        d,
                        r,
                        l,
                        k: 3,
                        variant,
                    };
                    let report = grad_check(dims, 42 + configs as u64, 1e-5, 1e-4)
                        .map_err(|e| e.to_string())?;
                    let label = format!("{variant} d={d} r={r} l={l} at {}", report.worst);
                    if report.max_rel_error > worst.0 {
                        worst = (report.max_rel_error, label.clone());
                    }
                    if report.max_rel_error.is_nan() || report.max_rel_error >= 1e-4 {
                        failures.push(format!("{label}: {:.3e}", report.max_rel_error));
                    }
                    configs += 1;
                }
            }
        }
    }
    check(failures.is_empty(), || {
        format!(
            "{} of {configs} configs failed: {}",
            failures.len(),
            failures.join("; ")
        )
    })?;
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!(
        "{configs} configs, max relative error {:.2e} ({}) in {:.1?}",
        worst.0,
        worst.1,
        start.elapsed()
    ))
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let mut rng = SplitMix64::new(5005);
    let variants = [
        Variant::CnnCnn,
        Variant::CnnMax,
        Variant::AttnMax,
        Variant::AttnAttn,
        Variant::TokenCnn,
    ];
    for case in 0..100 {
        let d = 1 + rng.below(6) as usize;
        let r = 1 + rng.below(6) as usize;
        let l = 1 + rng.below(6) as usize;
        let spans = 1 + rng.below(r as u64) as usize;
        let mut boundaries = Vec::new();
        let mut pos = 1;
        for _ in 0..spans {
            let len = 1 + rng.below(l as u64) as usize;
            boundaries.push(pos..pos + len);
            pos += len;
        }
        let data = (0..pos * d).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let t = ContextualEmbeddings::new(pos, d, data).map_err(|e| e.to_string())?;
        let params = EncoderParams::init(d, 3, 0.5, &mut rng);
        let variant = variants[case % variants.len()];
        let bigger = SpanLimits::new(r + 1 + rng.below(8) as usize, l + 1 + rng.below(8) as usize);
        let a = forward(&t, &boundaries, SpanLimits::new(r, l), &params, variant)
            .map_err(|e| e.to_string())?;
        let b = forward(&t, &boundaries, bigger, &params, variant).map_err(|e| e.to_string())?;
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        check(bits(a.0.as_slice()) == bits(b.0.as_slice()), || {
            format!("case {case} ({variant}, r={r} l={l} -> {bigger:?}): s* changed")
        })?;
    }
    Ok("100 cases over 5 variants, s* bit-identical".into())
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let task = phrase_task(2000, 0.2, 42);
    let source = EmbeddingSource::Toy(ToyEncoderConfig {
        d: 32,
        ..Default::default()
    });
    let seg = Segmentation::Greedy(&task.dictionary);
    let err = |e: spanft::Error| e.to_string();
    let train_set = prepare(&task.train, seg, &source, 0).map_err(err)?;
    let dev_set = prepare(&task.dev, seg, &source, task.train.len() as u64).map_err(err)?;
    let run = |architecture| {
        let config = TrainConfig {
            architecture,
            limits: SpanLimits::new(16, 8),
            epochs: 5,
            seed: 42,
            ..Default::default()
        };
        train(&train_set, Some(&dev_set), 2, &config).map_err(err)
    };
    let span = run(Architecture::Span(Variant::CnnCnn))?;
    let cls = run(Architecture::ClsOnly)?;
    let curve = |o: &spanft::train::TrainOutcome| {
        o.history
            .iter()
            .map(|e| format!("{:.3}", e.dev.map_or(f64::NAN, |m| m.accuracy)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let span_best = span.best_dev_accuracy().unwrap_or(0.0);
    let cls_best = cls.best_dev_accuracy().unwrap_or(0.0);
    check(span_best >= 0.95, || {
        format!(
            "cnn_cnn dev accuracy peaked at {span_best:.4} ({})",
            curve(&span)
        )
    })?;
    check(span_best - cls_best >= 0.10, || {
        format!("cnn_cnn {span_best:.4} vs cls_only {cls_best:.4}: gap below 10 points")
    })?;
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!(
        "cnn_cnn dev acc by epoch [{}], cls_only [{}], gap {:.1} points, {:.1?}",
        curve(&span),
        curve(&cls),
        100.0 * (span_best - cls_best),
        start.elapsed()
    ))
}

// ---------------------------------------------------------------- 7

/// Two-sided p from all `2^n` ways the discordant pairs could split.
fn brute_force_mcnemar(b: u64, c: u64) -> f64 {
    let n = (b + c) as u32;
    let k = b.min(c) as u32;
    let extreme = (0u64..1 << n).filter(|mask| mask.count_ones() <= k).count() as f64;
    (2.0 * extreme / (1u64 << n) as f64).min(1.0)
}

fn criterion_7() -> Outcome {
    let p = mcnemar_from_counts(10, 2).p_value;
    check((p - 0.038574).abs() <= 1e-4, || {
        format!("b=10 c=2 gave p={p}")
    })?;
    check((p - 158.0 / 4096.0).abs() <= 1e-15, || {
        format!("b=10 c=2 gave p={p}, not 158/4096")
    })?;
    let mut pairs = 0;
    for n in 0..=12u64 {
        for b in 0..=n {
            let c = n - b;
            let want = brute_force_mcnemar(b, c);
            let got = mcnemar_exact(b, c);
            check((got - want).abs() <= 1e-12, || {
                format!("b={b} c={c}: {got} vs brute force {want}")
            })?;
            check(mcnemar_from_counts(b, c).p_value == got, || {
                format!("b={b} c={c}: dispatch mismatch")
            })?;
            pairs += 1;
        }
    }
    Ok(format!(
        "p(10,2) = {p:.6}; {pairs} (b, c) pairs with b+c <= 12 match enumeration"
    ))
}

// ---------------------------------------------------------------- 8

const SAMPLE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample_1k.txt");

const CURVE_GOLDEN: &str = "dict_size\tavg_spans\tsentences
0\t10.627000\t1000
1000\t4.657000\t1000
3009\t3.811000\t1000
3009\t3.811000\t1000
";

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = spanft::cli::run(
        std::iter::once("spanft").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (
        code,
        String::from_utf8_lossy(&out).into_owned(),
        String::from_utf8_lossy(&err).into_owned(),
    )
}

fn criterion_8() -> Outcome {
    let text = std::fs::read_to_string(SAMPLE).map_err(|e| format!("{SAMPLE}: {e}"))?;
    let lines: Vec<&str> = text.lines().collect();
    check(lines.len() == 1000, || {
        format!("sample has {} lines", lines.len())
    })?;
    let counts =
        count_ngrams_lines(&lines, &CountConfig::new(5, 1_000_000)).map_err(|e| e.to_string())?;
    let dict = build_dictionary(&counts, 2).map_err(|e| e.to_string())?;
    let sentences = sentences_from_lines(&lines);
    let full = span_stats(&sentences, &dict).map_err(|e| e.to_string())?;
    let empty = span_stats(&sentences, &NgramDictionary::empty(5, 2)).map_err(|e| e.to_string())?;
    check(full.avg_spans() < empty.avg_spans(), || {
        format!(
            "full {} not below empty {}",
            full.avg_spans(),
            empty.avg_spans()
        )
    })?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dict_path = dir.path().join("sample.dict");
    dict.save(&dict_path).map_err(|e| e.to_string())?;
    let (code, report, err) = run_cli(&[
        "stats",
        "--dict",
        dict_path.to_str().unwrap(),
        "--in",
        SAMPLE,
        "--dict-sizes",
        "0,1000,10000,100000",
    ]);
    check(code == 0, || format!("stats exited {code}: {err}"))?;
    let mut rows = report.lines();
    check(
        rows.next() == Some("dict_size\tavg_spans\tsentences"),
        || "bad header".into(),
    )?;
    let parsed: Vec<(usize, f64, usize)> = rows
        .map(|r| {
            let f: Vec<&str> = r.split('\t').collect();
            match f.as_slice() {
                [a, b, c] => Ok((
                    a.parse().map_err(|_| format!("bad size in {r:?}"))?,
                    b.parse().map_err(|_| format!("bad average in {r:?}"))?,
                    c.parse().map_err(|_| format!("bad count in {r:?}"))?,
                )),
                _ => Err(format!("malformed row {r:?}")),
            }
        })
        .collect::<Result<_, _>>()?;
    check(parsed.len() == 4, || format!("{} rows", parsed.len()))?;
    check(parsed.windows(2).all(|w| w[0].0 <= w[1].0), || {
        "sizes not monotone".into()
    })?;
    check(parsed.windows(2).all(|w| w[0].1 >= w[1].1), || {
        "span counts rise with size".into()
    })?;
    check(report == CURVE_GOLDEN, || {
        format!("report differs from golden:\n{report}")
    })?;
    Ok(format!(
        "empty {:.3} -> full ({} entries) {:.3} spans/sentence; sweep matches golden",
        empty.avg_spans(),
        dict.size(),
        full.avg_spans()
    ))
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Outcome {
    let text = std::fs::read_to_string(SAMPLE).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = text.lines().collect();
    let counts =
        count_ngrams_lines(&lines, &CountConfig::new(5, 1_000_000)).map_err(|e| e.to_string())?;
    let dict = build_dictionary(&counts, 2).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = dir.path().join("a.dict");
    let b = dir.path().join("b.dict");
    dict.save(&a).map_err(|e| e.to_string())?;
    NgramDictionary::load(&a)
        .and_then(|d| d.save(&b))
        .map_err(|e| e.to_string())?;
    let (ba, bb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    check(ba == bb, || "dictionary bytes changed on roundtrip".into())?;

    let mut rng = SplitMix64::new(9009);
    let mats: Vec<EmbeddingMatrix> = (0..5)
        .map(|i| {
            let rows = 1 + i;
            let data: Vec<f32> = (0..rows * 7)
                .map(|j| match j % 11 {
                    0 => f32::MIN_POSITIVE / 4.0,
                    1 => -0.0,
                    _ => rng.uniform(-1e3, 1e3) as f32,
                })
                .collect();
            EmbeddingMatrix::new(rows, 7, data).unwrap()
        })
        .collect();
    let mut first = Vec::new();
    write_embeddings(&mut first, 7, &mats).map_err(|e| e.to_string())?;
    let (d, back) = read_embeddings(first.as_slice()).map_err(|e| e.to_string())?;
    let mut second = Vec::new();
    write_embeddings(&mut second, d, &back).map_err(|e| e.to_string())?;
    check(first == second, || {
        "embedding bytes changed on roundtrip".into()
    })?;

    let close = |got: f64, want: f64, what: &str| {
        check((got - want).abs() <= 1e-12, || format!("{what}: {got}"))
    };
    let y = [1, 0, 1, 1, 0, 0];
    let inv: Vec<usize> = y.iter().map(|v| 1 - v).collect();
    close(matthews_corr(&y, &y).unwrap(), 1.0, "MCC perfect")?;
    close(matthews_corr(&inv, &y).unwrap(), -1.0, "MCC inverted")?;
    close(
        matthews_corr(&[1, 0, 1, 0], &[1, 1, 0, 0]).unwrap(),
        0.0,
        "MCC balanced",
    )?;
    close(
        pearson_corr(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap(),
        0.5,
        "Pearson",
    )?;
    let f1 = classification_metrics(&[1, 1, 1, 0], &[1, 1, 0, 1])
        .unwrap()
        .f1
        .unwrap_or(f64::NAN);
    close(f1, 2.0 / 3.0, "F1")?;
    Ok(format!(
        "dictionary ({} bytes) and embeddings ({} bytes) byte-identical; metric goldens exact",
        ba.len(),
        first.len()
    ))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("1 counting oracle", Box::new(|| wrap(criterion_1()))),
        ("2 wikitext-103 dictionary size", Box::new(criterion_2)),
        ("3 segmenter oracle", Box::new(|| wrap(criterion_3()))),
        ("4 gradient check", Box::new(|| wrap(criterion_4()))),
        ("5 padding invariance", Box::new(|| wrap(criterion_5()))),
        ("6 toy phrase task", Box::new(|| wrap(criterion_6()))),
        ("7 mcnemar", Box::new(|| wrap(criterion_7()))),
        ("8 dictionary-size curve", Box::new(|| wrap(criterion_8()))),
        (
            "9 persistence and metric goldens",
            Box::new(|| wrap(criterion_9())),
        ),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Status::Pass(msg) => println!("PASS  criterion {name}: {msg}"),
            Status::Skip(msg) => println!("SKIP  criterion {name}: {msg}"),
            Status::Fail(msg) => {
                failed += 1;
                println!("FAIL  criterion {name}: {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn wrap(outcome: Outcome) -> Status {
    match outcome {
        Ok(msg) => Status::Pass(msg),
        Err(msg) => Status::Fail(msg),
    }
}
