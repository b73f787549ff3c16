use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lexpcfg::evaluation::{poisson_smooth, relative_entropy, Distribution};
use lexpcfg::grammar::parse_grammar;
use lexpcfg::lexicon::Frame;
use lexpcfg::parser::{parse, read_corpus};
use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lexpcfg")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthetic corpus and a trained model over the attachment grammar.
struct Fixture {
    dir: TempDir,
    grammar: PathBuf,
    corpus: PathBuf,
    model: PathBuf,
}

impl Fixture {
    fn new(sentences: usize) -> Self {
        let dir = TempDir::new().unwrap();
        let grammar = data("attach.gram");
        let corpus = dir.path().join("corpus.txt");
        let model = dir.path().join("model.txt");
        ok(&[
            "--seed", "5", "synth", "--grammar", s(&grammar), "--skew", "2",
            "--sentences", &sentences.to_string(), "--corpus-out", s(&corpus),
        ]);
        ok(&[
            "--seed", "1", "train", "--grammar", s(&grammar), "--corpus", s(&corpus),
            "--model", s(&model), "--telemetry", s(&dir.path().join("tel.tsv")),
        ]);
        Fixture { dir, grammar, corpus, model }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p
    }
}

#[test]
fn exit_codes_distinguish_usage_from_data_errors() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["compile", s(&data("attach.gram"))]).status.code(), Some(0));
    assert_eq!(run(&["compile"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["compile", "/nonexistent/g.gram"]).status.code(), Some(2));

    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "colour = red\n").unwrap();
    let out = run(&["--config", s(&cfg), "compile", s(&data("attach.gram"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(run(&["--workers", "0", "compile", s(&data("attach.gram"))]).status.code(), Some(1));
}

#[test]
fn compile_dump_round_trips() {
    let dir = TempDir::new().unwrap();
    let first = ok(&["compile", s(&data("attach.gram"))]);
    let p = dir.path().join("dump.gram");
    fs::write(&p, &first).unwrap();
    assert_eq!(ok(&["compile", s(&p)]), first);
}

#[test]
fn compile_reports_headless_rule_with_line() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("bad.gram");
    fs::write(&p, "start S;\nS -> NP VP';\nVP -> V NP;\nNP -> N';\n").unwrap();
    let out = run(&["compile", s(&p)]);
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn compile_emits_pair_states() {
    let dump = ok(&["compile", s(&data("chunks.gram")), "--emit-state-rules", "NC,PC,VFP"]);
    let mut pairs: Vec<&str> = dump
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| t.starts_with("ST_") && t.matches('_').count() == 2)
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    assert_eq!(pairs.len(), 3 * 3, "{pairs:?}");
}

fn telemetry_column(text: &str, name: &str) -> Vec<f64> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
    let col = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split('\t').nth(col).unwrap().parse().unwrap()).collect()
}

#[test]
fn classical_training_log_likelihood_is_monotone() {
    let f = Fixture::new(80);
    let tel = f.path("classical.tsv");
    ok(&[
        "train", "--grammar", s(&f.grammar), "--corpus", s(&f.corpus), "--model",
        s(&f.path("c.model")), "--classical", "6", "--telemetry", s(&tel),
    ]);
    let text = fs::read_to_string(&tel).unwrap();
    let ll = telemetry_column(&text, "log_likelihood");
    assert_eq!(ll.len(), 6);
    for w in ll.windows(2) {
        assert!(w[1] >= w[0] - 1e-9, "{ll:?}");
    }
    assert!(text.contains("# coverage\t100.0%"));
}

#[test]
fn training_is_deterministic_and_worker_independent() {
    let f = Fixture::new(120);
    let again = f.path("again.model");
    ok(&[
        "--seed", "1", "train", "--grammar", s(&f.grammar), "--corpus", s(&f.corpus),
        "--model", s(&again), "--telemetry", s(&f.path("t2.tsv")),
    ]);
    assert_eq!(fs::read(&f.model).unwrap(), fs::read(&again).unwrap());

    let four = f.path("four.model");
    ok(&[
        "--seed", "1", "--workers", "4", "train", "--grammar", s(&f.grammar), "--corpus",
        s(&f.corpus), "--model", s(&four), "--telemetry", s(&f.path("t4.tsv")),
    ]);
    let parse_with = |m: &Path| {
        ok(&["parse", "--grammar", s(&f.grammar), "--model", s(m), "--corpus", s(&f.corpus)])
    };
    assert_eq!(parse_with(&f.model), parse_with(&four));
}

#[test]
fn config_file_supplies_paths_and_seed() {
    let f = Fixture::new(60);
    let model = f.path("cfg.model");
    let cfg = f.write(
        "run.cfg",
        &format!(
            "grammar = {}\ncorpus = {}\nmodel = {}\nseed = 1\n",
            s(&f.grammar),
            s(&f.corpus),
            s(&model)
        ),
    );
    let tel = f.path("cfg.tsv");
    ok(&["--config", s(&cfg), "train", "--telemetry", s(&tel)]);
    let direct = f.path("direct.model");
    ok(&[
        "--seed", "1", "train", "--grammar", s(&f.grammar), "--corpus", s(&f.corpus),
        "--model", s(&direct), "--telemetry", s(&f.path("d.tsv")),
    ]);
    assert_eq!(fs::read(&model).unwrap(), fs::read(&direct).unwrap());
}

#[test]
fn parse_modes_agree_and_mark_failures() {
    let f = Fixture::new(100);
    let input = f.write(
        "in.txt",
        "dog/N sleep/V\ncat/N see/V dog/N in/P park/N\nin/P in/P\ndog/N give/V cat/N idea/N\n",
    );
    let args = |mode: &str| {
        ok(&[
            "parse", "--grammar", s(&f.grammar), "--model", s(&f.model), "--corpus", s(&input),
            "--mode", mode,
        ])
    };
    let vit = args("viterbi");
    let sm = args("summax");
    assert_eq!(vit, sm);
    let lines: Vec<&str> = vit.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("(S^sleep (NP^dog (N^dog)) (VFP^sleep (VFC^sleep (V^sleep))))\t"));
    assert_eq!(lines[2], "NOPARSE");
    assert_ne!(lines[1], "NOPARSE");
}

#[test]
fn forest_stats_match_enumeration() {
    let f = Fixture::new(60);
    let text = "dog/N sleep/V\ncat/N see/V dog/N in/P park/N\ndog/N put/V box/N on/P cat/N in/P park/N\n";
    let input = f.write("in.txt", text);
    let out = ok(&[
        "parse", "--grammar", s(&f.grammar), "--model", s(&f.model), "--corpus", s(&input),
        "--mode", "forest-stats",
    ]);
    let g = parse_grammar(&fs::read_to_string(&f.grammar).unwrap()).unwrap();
    let corpus = read_corpus(text).unwrap();
    let mut rows = out.lines();
    assert_eq!(rows.next().unwrap(), "tokens\titems\tand_nodes\tlex_items\ttrees");
    for (sent, row) in corpus.iter().zip(rows) {
        let fields: Vec<&str> = row.split('\t').collect();
        let trees = parse(sent, &g).unwrap().enumerate_trees(usize::MAX).len();
        assert_eq!(fields[0], sent.len().to_string());
        assert_eq!(fields[4], trees.to_string(), "{row}");
    }
    // see dog in park: PP under the verb or the object
    assert!(out.lines().nth(2).unwrap().ends_with("\t2"));
}

/// Frame distribution of one head as printed by `frames --word`.
fn word_frames(f: &Fixture, word: &str) -> Vec<(String, f64)> {
    let out = ok(&["frames", "--grammar", s(&f.grammar), "--model", s(&f.model), "--word", word]);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "frame\tprobability");
    lines
        .map(|l| {
            let (fr, p) = l.split_once('\t').unwrap();
            (fr.to_string(), p.parse().unwrap())
        })
        .collect()
}

#[test]
fn frames_word_mode_sums_to_one() {
    let f = Fixture::new(200);
    let rows = word_frames(&f, "give");
    assert_eq!(rows.len(), 4);
    let total: f64 = rows.iter().map(|r| r.1).sum();
    assert!((total - 1.0).abs() < 1e-5);
    for w in rows.windows(2) {
        assert!(w[0].1 >= w[1].1);
    }
    let out = run(&["frames", "--grammar", s(&f.grammar), "--model", s(&f.model), "--word", "zebra"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

const VERBS: [&str; 6] = ["give", "take", "see", "put", "sleep", "rely"];

fn report_rows(out: &str) -> BTreeMap<String, Vec<String>> {
    out.lines()
        .skip(1)
        .map(|l| {
            let cols: Vec<String> = l.split('\t').map(str::to_string).collect();
            (cols[0].clone(), cols)
        })
        .collect()
}

#[test]
fn frames_eval_recovers_gold_drawn_from_model() {
    let f = Fixture::new(300);
    let mut gold = String::new();
    for v in VERBS {
        let frames: Vec<String> = word_frames(&f, v)
            .into_iter()
            .filter(|(_, p)| *p >= 0.1)
            .map(|(fr, _)| fr)
            .collect();
        gold.push_str(&format!("{v} : {}\n", frames.join(", ")));
    }
    let gold = f.write("gold.txt", &gold);
    let words = f.write("words.txt", &VERBS.join("\n"));
    let out = ok(&[
        "frames", "--grammar", s(&f.grammar), "--model", s(&f.model), "--eval", "--gold",
        s(&gold), "--dev", s(&words), "--test", s(&words),
    ]);
    assert!(out.starts_with("frame\tcutoff\ttp\tfp\tfn\tprecision\trecall\n"));
    let total = &report_rows(&out)["total"];
    assert_eq!(total[5], "1.0000", "{out}");
    assert_eq!(total[6], "1.0000", "{out}");
}

#[test]
fn frames_eval_summary_arithmetic() {
    let f = Fixture::new(300);
    let gold = f.write(
        "gold.txt",
        "give : np, np pp\ntake : np\nsee : np, pp\nput : np pp\nsleep : intrans\nrely : pp, np\n",
    );
    let dev = f.write("dev.txt", "give\nsee\nsleep\n");
    let test = f.write("test.txt", "take\nput\nrely\n");
    let out = ok(&[
        "frames", "--grammar", s(&f.grammar), "--model", s(&f.model), "--eval", "--gold",
        s(&gold), "--dev", s(&dev), "--test", s(&test),
    ]);
    let rows = report_rows(&out);
    let count = |r: &Vec<String>, i: usize| r[i].parse::<f64>().unwrap();
    let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
    for (name, r) in &rows {
        if name != "total" {
            tp += count(r, 2);
            fp += count(r, 3);
            fn_ += count(r, 4);
        }
    }
    let total = &rows["total"];
    assert_eq!((count(total, 2), count(total, 3), count(total, 4)), (tp, fp, fn_));
    if tp + fp > 0.0 {
        assert!((count(total, 5) - tp / (tp + fp)).abs() < 5e-5);
    }
    assert!((count(total, 6) - tp / (tp + fn_)).abs() < 5e-5);
    // four frames in the grammar, each scored
    assert_eq!(rows.len(), 5, "{out}");
}

#[test]
fn frames_eval_split_is_seeded() {
    let f = Fixture::new(150);
    let gold = f.write("gold.txt", &VERBS.map(|v| format!("{v} : np")).join("\n"));
    let words = f.write("words.txt", &VERBS.join("\n"));
    let go = |seed: &str| {
        ok(&[
            "--seed", seed, "frames", "--grammar", s(&f.grammar), "--model", s(&f.model),
            "--eval", "--gold", s(&gold), "--words", s(&words),
        ])
    };
    assert_eq!(go("4"), go("4"));
}

#[test]
fn frames_eval_reads_mapped_dictionary() {
    let f = Fixture::new(150);
    let dict = f.write("dict.txt", "give : T1, D1\nsleep : I\ntake : T1 X9\n");
    let map = f.write("map.txt", "T1 -> np\nD1 -> np pp\nI -> intrans\nX9 -> DROP\n");
    let words = f.write("w.txt", "give\nsleep\ntake\n");
    let out = ok(&[
        "frames", "--grammar", s(&f.grammar), "--model", s(&f.model), "--eval", "--gold",
        s(&dict), "--map", s(&map), "--dev", s(&words), "--test", s(&words),
    ]);
    assert!(report_rows(&out).contains_key("total"));
}

/// Observed `allow` frames in imaginative prose.
const ALLOW_IMAG: [(&str, usize); 8] = [
    ("np vtop", 51),
    ("np", 21),
    ("np np", 13),
    ("np pp", 6),
    ("np part", 5),
    ("pp", 2),
    ("sbar", 1),
    ("intrans", 1),
];

fn sample_file(f: &Fixture, name: &str, counts: &[(&str, usize)]) -> PathBuf {
    let mut text = String::new();
    for (frame, n) in counts {
        for i in 0..*n {
            text.push_str(&format!("{frame}\tsentence {i}\n"));
        }
    }
    f.write(name, &text)
}

fn entropy_rows(out: &str) -> Vec<Vec<String>> {
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "head\tlabel\tH\tD_other\tD_model");
    lines.map(|l| l.split('\t').map(str::to_string).collect()).collect()
}

#[test]
fn entropy_of_identical_samples() {
    let f = Fixture::new(100);
    let a = sample_file(&f, "a.tsv", &ALLOW_IMAG);
    let b = sample_file(&f, "b.tsv", &ALLOW_IMAG);
    let out = ok(&[
        "entropy", "--grammar", s(&f.grammar), "--model", s(&f.model), "--word", "give",
        "--sample", &format!("imag={}", s(&a)), "--sample", &format!("copy={}", s(&b)),
    ]);
    let rows = entropy_rows(&out);
    assert_eq!(rows.len(), 2);
    for r in &rows {
        // printed entropy for this sample is 2.06
        let h: f64 = r[2].parse().unwrap();
        assert!((h - 2.06).abs() < 0.01, "{r:?}");
        // the smoothed other side differs from p only by the Poisson mix
        let d: f64 = r[3].parse().unwrap();
        assert!(d < 0.1, "{r:?}");
        assert!(r[4].parse::<f64>().unwrap() > 0.0);
    }
}

#[test]
fn entropy_without_mix_gives_zero_divergence_between_copies() {
    let f = Fixture::new(60);
    // frames the grammar can build, so the unsmoothed model covers them
    let counts = [("np", 7), ("np pp", 3), ("pp", 2), ("intrans", 1)];
    let a = sample_file(&f, "a.tsv", &counts);
    let b = sample_file(&f, "b.tsv", &counts);
    let out = ok(&[
        "entropy", "--grammar", s(&f.grammar), "--model", s(&f.model), "--word", "give",
        "--mix", "0", "--sample", &format!("x={}", s(&a)), "--sample", &format!("y={}", s(&b)),
    ]);
    for r in entropy_rows(&out) {
        assert_eq!(r[3], "0.000");
    }
}

#[test]
fn entropy_support_violation_is_a_data_error() {
    let f = Fixture::new(60);
    let a = sample_file(&f, "a.tsv", &[("np", 5)]);
    let b = sample_file(&f, "b.tsv", &[("pp", 5)]);
    let out = run(&[
        "entropy", "--grammar", s(&f.grammar), "--model", s(&f.model), "--word", "give",
        "--mix", "0", "--sample", &format!("x={}", s(&a)), "--sample", &format!("y={}", s(&b)),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zero under q"));
}

#[test]
fn poisson_mix_penalty_against_empirical_model() {
    // With q = (1 - m) p + m b, each term log2(p / q) is at most -log2(1 - m).
    let p = Distribution::empirical(ALLOW_IMAG.iter().map(|(fr, n)| (fr.parse::<Frame>().unwrap(), *n as f64))).unwrap();
    let alphabet: Vec<String> = ["np", "pp", "vtop", "part", "sbar"].map(String::from).to_vec();
    let q = poisson_smooth(&p, &alphabet, 0.05).unwrap();
    let d = relative_entropy(&p, &q).unwrap();
    let bound = -(0.95f64).log2();
    assert!(d > 0.0 && d <= bound + 1e-12, "{d} vs {bound}");
    assert!(d < 0.1);
}

#[test]
fn synth_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let g = data("chunks.gram");
    let gen = |seed: &str| ok(&["--seed", seed, "synth", "--grammar", s(&g), "--sentences", "30"]);
    assert_eq!(gen("9"), gen("9"));
    assert_ne!(gen("9"), gen("10"));
    let trees = dir.path().join("trees.txt");
    let corpus = ok(&["--seed", "9", "synth", "--grammar", s(&g), "--sentences", "30", "--trees-out", s(&trees)]);
    assert_eq!(corpus.lines().count(), 30);
    assert_eq!(fs::read_to_string(&trees).unwrap().lines().count(), 30);
}

#[test]
fn hundred_thousand_tokens_train_within_budget() {
    let dir = TempDir::new().unwrap();
    let g = data("attach.gram");
    let corpus = dir.path().join("big.txt");
    ok(&["--seed", "3", "synth", "--grammar", s(&g), "--sentences", "14000", "--corpus-out", s(&corpus)]);
    let tokens = fs::read_to_string(&corpus).unwrap().split_whitespace().count();
    assert!(tokens >= 100_000, "{tokens}");
    let start = std::time::Instant::now();
    ok(&[
        "train", "--grammar", s(&g), "--corpus", s(&corpus), "--model",
        s(&dir.path().join("m")), "--telemetry", s(&dir.path().join("t")),
    ]);
    let secs = start.elapsed().as_secs_f64();
    println!("100k-token training: {tokens} tokens in {secs:.1}s");
    assert!(secs < 120.0);
}
