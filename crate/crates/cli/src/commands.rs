use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use lexpcfg::decoding::{sum_max, viterbi};
use lexpcfg::estimation::{
    load_model, save_model, train_with_progress, DiscountSetting, LexPcfg, LexicalBackoff,
    SegmentReport, SmoothingConfig, TrainConfig,
};
use lexpcfg::evaluation::{
    format_entropy_rows, frame_counts, poisson_smooth, read_frame_samples, relative_entropy,
    Distribution, EntropyRow, PoissonSmoothed, ProbabilityModel, DEFAULT_POISSON_MIX,
};
use lexpcfg::grammar::{parse_grammar_builder, validate, HeadedGrammar};
use lexpcfg::lexicon::{
    apply_cutoffs, find_cutoffs, format_report, frame_distribution, frames_of, precision_recall,
    Frame, FrameMapping, GoldLexicon,
};
use lexpcfg::parser::{lexicalize_forest, parse_with, read_corpus_file, ParseOptions};
use lexpcfg::synthkit::{generate, random_model, GeneratorSpec};
use lexpcfg::{Cat, Word};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::{Cli, Command, CompileArgs, EntropyArgs, FramesArgs, ParseArgs, ParseMode, SynthArgs, TrainArgs};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn data<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Data(format!("{context}: {e}"))
}

struct Ctx {
    config: Config,
    seed: u64,
    workers: usize,
    verbose: bool,
}

impl Ctx {
    /// A path from the flag, else from the config file.
    fn path(&self, flag: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
        flag.clone()
            .or_else(|| self.config.raw(key).map(PathBuf::from))
            .ok_or_else(|| CliError::Usage(format!("missing --{key} (or `{key}` in the config file)")))
    }

    fn cat_name(&self, flag: &Option<String>) -> String {
        flag.clone()
            .or_else(|| self.config.raw("cat").map(str::to_string))
            .unwrap_or_else(|| "VFP".to_string())
    }

    fn parse_options(&self) -> Result<ParseOptions> {
        Ok(ParseOptions {
            open_lexicon: self.config.get("open_lexicon")?.unwrap_or(true),
            ..Default::default()
        })
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.global.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let seed = match cli.global.seed {
        Some(s) => s,
        None => config.get("seed")?.unwrap_or(0),
    };
    let workers = match cli.global.workers {
        Some(w) => w,
        None => config.get("workers")?.unwrap_or(1),
    };
    if workers == 0 {
        return Err(CliError::Usage("--workers must be positive".into()));
    }
    let ctx = Ctx { config, seed, workers, verbose: cli.global.verbose };
    match cli.command {
        Command::Compile(a) => compile(&ctx, a),
        Command::Train(a) => train_cmd(&ctx, a),
        Command::Parse(a) => parse_cmd(&ctx, a),
        Command::Frames(a) => frames(&ctx, a),
        Command::Entropy(a) => entropy_cmd(&ctx, a),
        Command::Synth(a) => synth(&ctx, a),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(data(path.display()))
}

fn write_out(path: &Option<PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(data(p.display())),
        None => match std::io::stdout().write_all(text.as_bytes()) {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            r => r.map_err(data("stdout")),
        },
    }
}

fn load_grammar(path: &Path) -> Result<Arc<HeadedGrammar>> {
    let text = read(path)?;
    let g = parse_grammar_builder(&text)
        .and_then(|b| b.build())
        .map_err(data(path.display()))?;
    Ok(Arc::new(g))
}

fn load_pair(ctx: &Ctx, grammar: &Option<PathBuf>, model: &Option<PathBuf>) -> Result<LexPcfg> {
    let g = load_grammar(&ctx.path(grammar, "grammar")?)?;
    let mp = ctx.path(model, "model")?;
    load_model(&mp, g).map_err(data(mp.display()))
}

fn lookup(g: &HeadedGrammar, name: &str) -> Result<Cat> {
    g.lookup(name)
        .filter(|&c| g.is_nonterminal(c))
        .ok_or_else(|| CliError::Usage(format!("`{name}` is not a nonterminal of the grammar")))
}

fn compile(_ctx: &Ctx, a: CompileArgs) -> Result<()> {
    let text = read(&a.grammar)?;
    let name = a.grammar.display().to_string();
    let g = parse_grammar_builder(&text)
        .and_then(|b| b.build_unchecked())
        .map_err(data(&name))?;
    let diagnostics = validate(&g);
    for d in &diagnostics {
        eprintln!("{name}: {d}");
    }
    if !diagnostics.is_empty() {
        return Err(CliError::Data(format!("{name}: {} diagnostic(s)", diagnostics.len())));
    }
    let g = if a.emit_state_rules.is_empty() {
        g
    } else {
        let phrasal: Vec<&str> = a.emit_state_rules.iter().map(|s| s.trim()).collect();
        g.with_state_rules(&phrasal).map_err(data(&name))?
    };
    eprintln!(
        "{name}: ok, {} categories, {} rules, {} words",
        g.num_categories(),
        g.rules().len(),
        g.lexicon().len()
    );
    write_out(&a.output, &g.to_dsl())
}

fn smoothing_config(c: &Config) -> Result<SmoothingConfig> {
    let mut s = SmoothingConfig::default();
    if let Some(b) = c.get_array::<4>("bucket_bounds")? {
        s.bucket_bounds = b;
    }
    if let Some(l) = c.get_array::<5>("lambda")? {
        s.lambda = l;
    }
    match c.raw("discount") {
        None | Some("estimate") => {}
        Some(_) => s.discount = DiscountSetting::Fixed(c.get("discount")?.unwrap()),
    }
    match c.raw("lexical_backoff") {
        None | Some("discount") => {}
        Some("interpolate") => s.lexical_backoff = LexicalBackoff::Interpolate,
        Some(other) => return Err(CliError::Usage(format!("unknown lexical_backoff `{other}`"))),
    }
    Ok(s)
}

fn train_config(ctx: &Ctx, a: &TrainArgs) -> Result<TrainConfig> {
    let c = &ctx.config;
    let mut cfg = match a.classical {
        Some(n) => TrainConfig::classical(n),
        None => {
            let mut t = TrainConfig { smoothing: smoothing_config(c)?, ..Default::default() };
            if let Some(v) = c.get("segment_size")? {
                t.segment_size = v;
            }
            if let Some(v) = c.get("passes")? {
                t.passes = v;
            }
            if let Some(v) = c.get("bootstrap")? {
                t.bootstrap = v;
            }
            if let Some(v) = c.get("heldout_fraction")? {
                t.heldout_fraction = v;
            }
            if let Some(v) = c.get("fit_lambda")? {
                t.fit_lambda = v;
            }
            if let Some(v) = c.get("epsilon")? {
                t.epsilon = v;
            }
            if let Some(v) = c.get("drop_threshold")? {
                t.drop_threshold = v;
            }
            t.segment_size = a.segment_size.unwrap_or(t.segment_size);
            t.passes = a.passes.unwrap_or(t.passes);
            t.heldout_fraction = a.heldout_fraction.unwrap_or(t.heldout_fraction);
            t.bootstrap &= !a.no_bootstrap;
            t.fit_lambda &= !a.no_fit_lambda;
            t
        }
    };
    cfg.seed = ctx.seed;
    cfg.workers = ctx.workers;
    cfg.parse = ctx.parse_options()?;
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

const TELEMETRY_HEADER: &str =
    "pass\tsegment\tsentences\tskipped\ttokens\tlog_likelihood\tskip_rate\tseconds\twords_per_second";

fn telemetry_line(r: &SegmentReport) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.4}\t{:.3}\t{:.1}",
        r.pass,
        r.segment,
        r.sentences,
        r.skipped,
        r.tokens,
        r.log_likelihood,
        r.skip_rate(),
        r.seconds,
        r.words_per_second()
    )
}

fn train_cmd(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let cfg = train_config(ctx, &a)?;
    let g = load_grammar(&ctx.path(&a.grammar, "grammar")?)?;
    let corpus_path = ctx.path(&a.corpus, "corpus")?;
    let model_path = ctx.path(&a.model, "model")?;
    let corpus = read_corpus_file(&corpus_path).map_err(data(corpus_path.display()))?;

    let mut log = vec![TELEMETRY_HEADER.to_string()];
    let to_stderr = a.telemetry.is_none();
    if to_stderr {
        eprintln!("{TELEMETRY_HEADER}");
    }
    let out = train_with_progress(&corpus, g, &cfg, &mut |r| {
        let line = telemetry_line(r);
        if to_stderr {
            eprintln!("{line}");
        }
        log.push(line);
    })
    .map_err(data(corpus_path.display()))?;

    let rep = &out.report;
    let coverage = 100.0 * (rep.training_sentences - rep.unparsed) as f64 / rep.training_sentences.max(1) as f64;
    let summary = [
        format!("# coverage\t{coverage:.1}%\t{} of {} training sentences parsed", rep.training_sentences - rep.unparsed, rep.training_sentences),
        format!("# heldout\t{}", rep.heldout_sentences),
        format!("# lambda\t{}", rep.lambda.iter().map(|l| format!("{l:.4}")).collect::<Vec<_>>().join(",")),
        format!("# discount\t{:.4}", rep.discount),
        format!(
            "# pass_log_likelihood\t{}",
            rep.pass_log_likelihood.iter().map(|l| format!("{l:.6}")).collect::<Vec<_>>().join(",")
        ),
    ];
    for s in &summary {
        if to_stderr || ctx.verbose {
            eprintln!("{s}");
        }
        log.push(s.clone());
    }
    if let Some(p) = &a.telemetry {
        fs::write(p, log.join("\n") + "\n").map_err(data(p.display()))?;
    }
    save_model(&out.model, &model_path).map_err(data(model_path.display()))
}

fn parse_cmd(ctx: &Ctx, a: ParseArgs) -> Result<()> {
    let m = load_pair(ctx, &a.grammar, &a.model)?;
    let g = m.grammar();
    let corpus_path = ctx.path(&a.corpus, "corpus")?;
    let corpus = read_corpus_file(&corpus_path).map_err(data(corpus_path.display()))?;
    let opts = ctx.parse_options()?;
    let mut out = String::new();
    if a.mode == ParseMode::ForestStats {
        out.push_str("tokens\titems\tand_nodes\tlex_items\ttrees\n");
    }
    let mut failed = 0;
    for s in &corpus {
        let forest = parse_with(s, g, opts).ok().map(lexicalize_forest);
        let line = match (a.mode, forest) {
            (_, None) => None,
            (ParseMode::ForestStats, Some(f)) => Some(format!(
                "{}\t{}\t{}\t{}\t{}",
                s.len(),
                f.forest().items().len(),
                f.forest().num_and_nodes(),
                f.items().len(),
                f.count_trees()
            )),
            (ParseMode::Viterbi, Some(f)) => viterbi(&f, g, &m).ok().map(|t| t.to_line(g)),
            (ParseMode::Summax, Some(f)) => sum_max(&f, g, &m).ok().map(|t| t.to_line(g)),
        };
        failed += usize::from(line.is_none());
        out.push_str(line.as_deref().unwrap_or("NOPARSE"));
        out.push('\n');
    }
    if ctx.verbose {
        eprintln!("# parsed {} of {} sentences", corpus.len() - failed, corpus.len());
    }
    write_out(&a.output, &out)
}

fn word_list(path: &Path) -> Result<Vec<Word>> {
    Ok(read(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(Word::new)
        .collect())
}

fn load_gold(path: &Path, map: &Option<PathBuf>) -> Result<GoldLexicon> {
    let text = read(path)?;
    match map {
        None => GoldLexicon::parse(&text).map_err(data(path.display())),
        Some(mp) => {
            let mapping = FrameMapping::parse(&read(mp)?).map_err(data(mp.display()))?;
            let (gold, unmapped) = mapping.map_dictionary(&text).map_err(data(path.display()))?;
            if !unmapped.is_empty() {
                eprintln!("warning: dropped unmapped dictionary codes: {}", unmapped.join(" "));
            }
            Ok(gold)
        }
    }
}

fn frames(ctx: &Ctx, a: FramesArgs) -> Result<()> {
    let m = load_pair(ctx, &a.grammar, &a.model)?;
    let g = m.grammar();
    let cat = lookup(g, &ctx.cat_name(&a.cat))?;
    let floor = match a.min_freq {
        Some(f) => f,
        None => ctx.config.get("min_freq")?.unwrap_or(1.0),
    };
    let warn_rare = |w: &Word| {
        let f = m.pair_frequency(w, cat);
        if f < floor {
            eprintln!("warning: `{w}` heads {} only {f:.2} times (floor {floor})", g.name(cat));
        }
    };

    if let Some(w) = &a.word {
        let w = Word::new(w);
        warn_rare(&w);
        let d = frame_distribution(&m, &w, cat);
        if d.backed_off {
            eprintln!("warning: no data for `{w}` heading {}; showing the unlexicalized distribution", g.name(cat));
        }
        let mut rows: Vec<(&Frame, f64)> = d.probs.iter().map(|(f, &p)| (f, p)).collect();
        rows.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(y.0)));
        let mut out = String::from("frame\tprobability\n");
        for (f, p) in rows {
            out.push_str(&format!("{f}\t{p:.6}\n"));
        }
        return write_out(&None, &out);
    }
    if !a.eval {
        return Err(CliError::Usage("frames needs --word or --eval".into()));
    }

    let gold_path = ctx.path(&a.gold, "gold")?;
    let map = a.map.clone().or_else(|| ctx.config.raw("map").map(PathBuf::from));
    let gold = load_gold(&gold_path, &map)?;
    let (dev, test) = match (&a.dev, &a.test, &a.words) {
        (Some(d), Some(t), _) => (word_list(d)?, word_list(t)?),
        (_, _, Some(wp)) => {
            let mut words = word_list(wp)?;
            words.shuffle(&mut ChaCha8Rng::seed_from_u64(ctx.seed));
            let test = words.split_off(words.len() / 2);
            (words, test)
        }
        _ => return Err(CliError::Usage("frames --eval needs --dev and --test, or --words".into())),
    };
    for w in dev.iter().chain(&test) {
        if !gold.contains(w) {
            eprintln!("warning: `{w}` is not in the gold lexicon and is not scored");
        }
        warn_rare(w);
    }
    let dists = |ws: &[Word]| -> BTreeMap<Word, _> {
        ws.iter().map(|w| (w.clone(), frame_distribution(&m, w, cat))).collect()
    };
    let dev_d = dists(&dev);
    let cutoffs = find_cutoffs(&dev_d, &gold);
    let mut proposed = BTreeMap::new();
    for (w, d) in dists(&test) {
        let (set, _) = apply_cutoffs(&d, &cutoffs);
        proposed.insert(w, set);
    }
    let grammar_frames: BTreeSet<Frame> = frames_of(g, cat).into_iter().collect();
    let inventory: BTreeSet<Frame> = grammar_frames.intersection(&gold.inventory()).cloned().collect();
    let report = precision_recall(&proposed, &gold, Some(&inventory)).map_err(|e| CliError::Data(e.to_string()))?;
    if ctx.verbose {
        eprintln!("# dev {} words, test {} words, {} scored", dev.len(), test.len(), report.words);
    }
    write_out(&None, &format_report(&report, &cutoffs))
}

/// The comparison side of a divergence; `--mix 0` leaves it unsmoothed.
enum Reference {
    Raw(Distribution<Frame>),
    Mixed(PoissonSmoothed),
}

impl Reference {
    fn new(q: Distribution<Frame>, alphabet: &[String], mix: f64) -> std::result::Result<Self, lexpcfg::evaluation::EvalError> {
        if mix == 0.0 {
            Ok(Reference::Raw(q))
        } else {
            poisson_smooth(&q, alphabet, mix).map(Reference::Mixed)
        }
    }
}

impl ProbabilityModel<Frame> for Reference {
    fn probability(&self, k: &Frame) -> f64 {
        match self {
            Reference::Raw(d) => d.prob(k),
            Reference::Mixed(m) => m.probability(k),
        }
    }
}

fn entropy_cmd(ctx: &Ctx, a: EntropyArgs) -> Result<()> {
    let m = load_pair(ctx, &a.grammar, &a.model)?;
    let g = m.grammar();
    let cat = lookup(g, &ctx.cat_name(&a.cat))?;
    let mix = match a.mix {
        Some(x) => x,
        None => ctx.config.get("mix")?.unwrap_or(DEFAULT_POISSON_MIX),
    };
    if !(0.0..1.0).contains(&mix) {
        return Err(CliError::Usage(format!("--mix must lie in [0, 1), got {mix}")));
    }
    let mut samples: Vec<(String, BTreeMap<Frame, f64>)> = Vec::new();
    for spec in &a.samples {
        let (label, path) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--sample expects LABEL=PATH, got `{spec}`")))?;
        let text = read(Path::new(path))?;
        let s = read_frame_samples(&text).map_err(data(path))?;
        samples.push((label.to_string(), frame_counts(&s)));
    }
    let mut alphabet: BTreeSet<String> = g.nonterminals().map(|c| g.name(c).to_lowercase()).collect();
    for (_, c) in &samples {
        alphabet.extend(c.keys().flat_map(|f| f.complements().iter().cloned()));
    }
    let alphabet: Vec<String> = alphabet.into_iter().collect();
    let eval_err = |label: &str| {
        let label = label.to_string();
        move |e: lexpcfg::evaluation::EvalError| CliError::Data(format!("{label}: {e}"))
    };

    let word = Word::new(&a.word);
    let fd = frame_distribution(&m, &word, cat);
    if fd.backed_off {
        eprintln!("warning: no data for `{word}` heading {}; comparing with the unlexicalized distribution", g.name(cat));
    }
    let model_q = Distribution::from_frames(&fd).map_err(eval_err("model"))?;
    let model_q = Reference::new(model_q, &alphabet, mix).map_err(eval_err("model"))?;

    let mut rows = Vec::new();
    for (i, (label, counts)) in samples.iter().enumerate() {
        let p = Distribution::empirical(counts.iter().map(|(f, &c)| (f.clone(), c))).map_err(eval_err(label))?;
        let mut other: BTreeMap<Frame, f64> = BTreeMap::new();
        for (j, (_, c)) in samples.iter().enumerate() {
            if j != i {
                for (f, &n) in c {
                    *other.entry(f.clone()).or_insert(0.0) += n;
                }
            }
        }
        let vs_other = if other.is_empty() {
            None
        } else {
            let q = Distribution::empirical(other).map_err(eval_err(label))?;
            let q = Reference::new(q, &alphabet, mix).map_err(eval_err(label))?;
            Some(relative_entropy(&p, &q).map_err(eval_err(label))?)
        };
        rows.push(EntropyRow {
            head: a.word.clone(),
            label: label.clone(),
            entropy: lexpcfg::evaluation::entropy(&p),
            vs_other,
            vs_model: Some(relative_entropy(&p, &model_q).map_err(eval_err(label))?),
        });
    }
    write_out(&None, &format_entropy_rows(&rows))
}

fn synth(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let g = load_grammar(&ctx.path(&a.grammar, "grammar")?)?;
    let model = match &a.model {
        Some(p) => load_model(p, g.clone()).map_err(data(p.display()))?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            random_model(g.clone(), &mut rng, a.skew, SmoothingConfig::frozen())
                .map_err(|e| CliError::Data(e.to_string()))?
        }
    };
    if let Some(p) = &a.model_out {
        save_model(&model, p).map_err(data(p.display()))?;
    }
    let spec = GeneratorSpec {
        sentences: a.sentences,
        max_depth: a.max_depth,
        seed: ctx.seed,
        all_tags: a.all_tags,
    };
    let corpus = generate(&model, &spec).map_err(|e| CliError::Data(e.to_string()))?;
    if ctx.verbose {
        eprintln!("# {} sentences, {} tokens, {} rejected derivations", corpus.sentences.len(), corpus.tokens(), corpus.rejected);
    }
    if let Some(p) = &a.trees_out {
        fs::write(p, corpus.trees_text(g.as_ref())).map_err(data(p.display()))?;
    }
    write_out(&a.corpus_out, &corpus.corpus_text())
}
