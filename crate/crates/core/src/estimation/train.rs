//! The training driver: a bootstrap pass under the unlexicalized backbone,
//! then incremental EM over contiguous corpus segments.
//!
//! Each segment keeps its own expected counts. After re-estimating a
//! segment's counts under the current model, its old counts are replaced
//! and the model is re-estimated from the pooled counts of all segments.

use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::inside_outside::inside_outside;
use super::smoothing::{fit_smoothing_weights, heldout_samples};
use super::{m_step, EstimationError, LexPcfg, MStepOptions, SmoothingConfig, Unlexicalized};
use crate::events::{EventCounts, EventWeights};
use crate::grammar::HeadedGrammar;
use crate::parser::{lexicalize_forest, parse_with, LexForest, ParseOptions, Sentence};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Target number of tokens per segment; segments end on sentence
    /// boundaries.
    pub segment_size: usize,
    /// Incremental passes over all segments after the bootstrap.
    pub passes: usize,
    pub bootstrap: bool,
    /// Fraction of sentences reserved for fitting the smoothing weights.
    pub heldout_fraction: f64,
    pub fit_lambda: bool,
    /// Pseudo-count of every backbone rule.
    pub epsilon: f64,
    /// Per-sentence expected counts at or below this are dropped.
    pub drop_threshold: f64,
    pub smoothing: SmoothingConfig,
    pub seed: u64,
    pub workers: usize,
    pub parse: ParseOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            segment_size: 100_000,
            passes: 1,
            bootstrap: true,
            heldout_fraction: 0.1,
            fit_lambda: true,
            epsilon: 0.5,
            drop_threshold: 1e-12,
            smoothing: SmoothingConfig::default(),
            seed: 0,
            workers: 1,
            parse: ParseOptions::default(),
        }
    }
}

impl TrainConfig {
    /// Ordinary EM: one segment, no smoothing, no bootstrap.
    pub fn classical(iterations: usize) -> Self {
        TrainConfig {
            segment_size: usize::MAX,
            passes: iterations,
            bootstrap: false,
            heldout_fraction: 0.0,
            fit_lambda: false,
            epsilon: 0.0,
            smoothing: SmoothingConfig::frozen(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        let bad = |m: String| Err(EstimationError::InvalidConfig(m));
        if self.segment_size == 0 {
            return bad("segment size must be at least 1".into());
        }
        if !(0.0..=0.5).contains(&self.heldout_fraction) {
            return bad(format!("held-out fraction {} outside [0, 0.5]", self.heldout_fraction));
        }
        if self.passes == 0 && !self.bootstrap {
            return bad("training needs a bootstrap or at least one pass".into());
        }
        if self.workers == 0 {
            return bad("at least one worker is required".into());
        }
        if !(self.epsilon >= 0.0) || !(self.drop_threshold >= 0.0) {
            return bad("floors and thresholds must be nonnegative".into());
        }
        self.smoothing.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentReport {
    /// 0 for the bootstrap pass.
    pub pass: usize,
    pub segment: usize,
    pub sentences: usize,
    pub skipped: usize,
    pub tokens: usize,
    /// Log-likelihood of the segment's parsed sentences before the update.
    pub log_likelihood: f64,
    pub seconds: f64,
}

impl SegmentReport {
    pub fn skip_rate(&self) -> f64 {
        if self.sentences == 0 {
            0.0
        } else {
            self.skipped as f64 / self.sentences as f64
        }
    }

    pub fn words_per_second(&self) -> f64 {
        if self.seconds > 0.0 {
            self.tokens as f64 / self.seconds
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub training_sentences: usize,
    pub heldout_sentences: usize,
    /// Training sentences without a parse.
    pub unparsed: usize,
    pub segments: Vec<SegmentReport>,
    /// Log-likelihood of all parsed training sentences at the start of
    /// each incremental pass.
    pub pass_log_likelihood: Vec<f64>,
    pub lambda: [f64; 5],
    pub discount: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: LexPcfg,
    pub report: TrainReport,
}

pub struct EStep {
    pub counts: EventCounts,
    pub log_likelihood: f64,
    /// Sentences whose probability was zero under the weights.
    pub failed: usize,
}

fn chunked<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if workers <= 1 || items.len() < 2 {
        return items.iter().map(f).collect();
    }
    let size = items.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(size)
            .map(|chunk| {
                let f = &f;
                scope.spawn(move || chunk.iter().map(f).collect::<Vec<R>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// Expected counts over the forests. Per-sentence results are merged in
/// sentence order, so the result does not depend on `workers`.
pub fn e_step<W: EventWeights + Sync>(
    forests: &[&LexForest],
    g: &HeadedGrammar,
    w: &W,
    workers: usize,
    drop_threshold: f64,
) -> EStep {
    let results = chunked(forests, workers, |f| inside_outside(f, g, w).ok());
    let mut out = EStep {
        counts: EventCounts::new(),
        log_likelihood: 0.0,
        failed: 0,
    };
    for r in results {
        match r {
            Some(mut sc) => {
                if drop_threshold > 1e-12 {
                    sc.counts.prune(drop_threshold);
                }
                out.counts.merge(&sc.counts);
                out.log_likelihood += sc.log_inside;
            }
            None => out.failed += 1,
        }
    }
    out
}

fn split_heldout(n: usize, fraction: f64, seed: u64) -> Vec<bool> {
    let mut held = vec![false; n];
    let k = ((n as f64) * fraction).round() as usize;
    let k = k.min(n.saturating_sub(1));
    if k == 0 {
        return held;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    for &i in &idx[..k] {
        held[i] = true;
    }
    held
}

fn segments(sentences: &[&Sentence], size: usize) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut begin = 0;
    let mut tokens = 0usize;
    for (i, s) in sentences.iter().enumerate() {
        tokens += s.len();
        if tokens >= size {
            out.push(begin..i + 1);
            begin = i + 1;
            tokens = 0;
        }
    }
    if begin < sentences.len() {
        out.push(begin..sentences.len());
    }
    out
}

fn sum_counts(parts: &[EventCounts]) -> EventCounts {
    let mut total = EventCounts::new();
    for p in parts {
        total.merge(p);
    }
    total
}

pub fn train(
    corpus: &[Sentence],
    grammar: Arc<HeadedGrammar>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, EstimationError> {
    train_with_progress(corpus, grammar, cfg, &mut |_| {})
}

/// Like [`train`], calling `progress` after every segment.
pub fn train_with_progress(
    corpus: &[Sentence],
    grammar: Arc<HeadedGrammar>,
    cfg: &TrainConfig,
    progress: &mut dyn FnMut(&SegmentReport),
) -> Result<TrainOutcome, EstimationError> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(EstimationError::EmptyCorpus);
    }
    let g = &*grammar;
    let held = split_heldout(corpus.len(), cfg.heldout_fraction, cfg.seed);
    let training: Vec<&Sentence> = corpus.iter().zip(&held).filter(|(_, &h)| !h).map(|(s, _)| s).collect();
    let heldout: Vec<&Sentence> = corpus.iter().zip(&held).filter(|(_, &h)| h).map(|(s, _)| s).collect();

    let parse_all = |ss: &[&Sentence]| -> Vec<Option<LexForest>> {
        chunked(ss, cfg.workers, |s| parse_with(s, g, cfg.parse).ok().map(lexicalize_forest))
    };
    let forests = parse_all(&training);
    let unparsed = forests.iter().filter(|f| f.is_none()).count();
    if unparsed == forests.len() {
        return Err(EstimationError::NoParsableSentences);
    }
    let heldout_forests: Vec<LexForest> = parse_all(&heldout).into_iter().flatten().collect();
    let heldout_refs: Vec<&LexForest> = heldout_forests.iter().collect();

    let ranges = segments(&training, cfg.segment_size);
    let seg_forests: Vec<Vec<&LexForest>> = ranges
        .iter()
        .map(|r| forests[r.clone()].iter().flatten().collect())
        .collect();
    let owned: Vec<Sentence> = training.iter().map(|s| (*s).clone()).collect();
    let mut smoothing = cfg.smoothing.clone();
    let mut model = LexPcfg::initial(grammar.clone(), &owned, smoothing.clone());
    let opts = MStepOptions { epsilon: cfg.epsilon };
    let mut stats: Vec<EventCounts> = vec![EventCounts::new(); ranges.len()];
    let mut report = TrainReport {
        training_sentences: training.len(),
        heldout_sentences: heldout.len(),
        unparsed,
        ..Default::default()
    };

    let mut run_segment = |pass: usize, k: usize, w: &dyn Fn(&[&LexForest]) -> EStep| -> (EStep, SegmentReport) {
        let t0 = Instant::now();
        let es = w(&seg_forests[k]);
        let r = ranges[k].clone();
        let sr = SegmentReport {
            pass,
            segment: k,
            sentences: r.len(),
            skipped: r.len() - seg_forests[k].len() + es.failed,
            tokens: training[r].iter().map(|s| s.len()).sum(),
            log_likelihood: es.log_likelihood,
            seconds: t0.elapsed().as_secs_f64(),
        };
        progress(&sr);
        (es, sr)
    };

    if cfg.bootstrap {
        let backbone = model.clone();
        let weights = Unlexicalized(&backbone);
        for k in 0..ranges.len() {
            let (es, sr) = run_segment(0, k, &|fs| e_step(fs, g, &weights, cfg.workers, cfg.drop_threshold));
            stats[k] = es.counts;
            report.segments.push(sr);
        }
        let total = sum_counts(&stats);
        if !total.is_empty() {
            model = m_step(&total, &model, &smoothing, opts)?;
        }
    }

    for pass in 1..=cfg.passes {
        let mut pass_ll = 0.0;
        for k in 0..ranges.len() {
            let current = model.clone();
            let (es, sr) = run_segment(pass, k, &|fs| e_step(fs, g, &current, cfg.workers, cfg.drop_threshold));
            pass_ll += es.log_likelihood;
            stats[k] = es.counts;
            report.segments.push(sr);
            let total = sum_counts(&stats);
            if !total.is_empty() {
                model = m_step(&total, &model, &smoothing, opts)?;
            }
        }
        report.pass_log_likelihood.push(pass_ll);
        if cfg.fit_lambda && !heldout_refs.is_empty() {
            let total = sum_counts(&stats);
            let held = e_step(&heldout_refs, g, &model, cfg.workers, cfg.drop_threshold);
            let samples = heldout_samples(&held.counts, &total, &model);
            smoothing.lambda = fit_smoothing_weights(&samples, &smoothing.lambda);
            model = m_step(&total, &model, &smoothing, opts)?;
        }
    }
    if cfg.passes == 0 && cfg.fit_lambda && !heldout_refs.is_empty() {
        let total = sum_counts(&stats);
        let held = e_step(&heldout_refs, g, &model, cfg.workers, cfg.drop_threshold);
        let samples = heldout_samples(&held.counts, &total, &model);
        smoothing.lambda = fit_smoothing_weights(&samples, &smoothing.lambda);
        model = m_step(&total, &model, &smoothing, opts)?;
    }
    report.lambda = smoothing.lambda;
    report.discount = model.discount();
    Ok(TrainOutcome { model, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;
    use crate::parser::read_corpus;

    fn grammar() -> Arc<HeadedGrammar> {
        Arc::new(
            parse_grammar(
                "start S;\nS -> NP VP';\nVP -> V' | V' NP | V' NP PP | V' PP;\nNP -> N' | N' PP;\nPP -> P' NP;\n\
                 dogs : N; cats : N; parks : N; chase : V; sleep : V; in : P;",
            )
            .unwrap(),
        )
    }

    fn corpus() -> Vec<Sentence> {
        read_corpus(
            "dogs/N chase/V cats/N\n\
             cats/N sleep/V\n\
             dogs/N chase/V cats/N in/P parks/N\n\
             cats/N sleep/V in/P parks/N\n\
             dogs/N sleep/V\n\
             cats/N chase/V dogs/N in/P parks/N\n\
             dogs/N dogs/N\n",
        )
        .unwrap()
    }

    #[test]
    fn segments_close_on_sentence_boundaries() {
        let c = corpus();
        let refs: Vec<&Sentence> = c.iter().collect();
        let r = segments(&refs, 5);
        assert_eq!(r, vec![0..2, 2..3, 3..5, 5..6, 6..7]);
        assert_eq!(segments(&refs, usize::MAX), vec![0..7]);
    }

    #[test]
    fn classical_em_never_decreases_likelihood() {
        let out = train(&corpus(), grammar(), &TrainConfig::classical(6)).unwrap();
        let ll = &out.report.pass_log_likelihood;
        assert_eq!(ll.len(), 6);
        for w in ll.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "{ll:?}");
        }
        assert_eq!(out.report.unparsed, 1);
    }

    #[test]
    fn incremental_training_reports_every_segment() {
        let cfg = TrainConfig {
            segment_size: 6,
            passes: 2,
            heldout_fraction: 0.0,
            ..Default::default()
        };
        let out = train(&corpus(), grammar(), &cfg).unwrap();
        let per_pass = out.report.segments.iter().filter(|s| s.pass == 1).count();
        assert!(per_pass >= 2);
        assert_eq!(out.report.segments.len(), per_pass * 3);
        out.model.check_normalization(1e-9).unwrap();
        let total_skipped: usize = out.report.segments.iter().filter(|s| s.pass == 1).map(|s| s.skipped).sum();
        assert_eq!(total_skipped, 1);
    }

    #[test]
    fn worker_count_does_not_change_the_model() {
        let base = TrainConfig {
            segment_size: 6,
            heldout_fraction: 0.3,
            seed: 3,
            ..Default::default()
        };
        let a = train(&corpus(), grammar(), &base).unwrap();
        let b = train(&corpus(), grammar(), &TrainConfig { workers: 3, ..base.clone() }).unwrap();
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn unparsable_corpus_is_an_error() {
        let c = read_corpus("dogs/N dogs/N\n").unwrap();
        assert!(matches!(
            train(&c, grammar(), &TrainConfig::default()),
            Err(EstimationError::NoParsableSentences)
        ));
        assert!(matches!(train(&[], grammar(), &TrainConfig::default()), Err(EstimationError::EmptyCorpus)));
    }
}
