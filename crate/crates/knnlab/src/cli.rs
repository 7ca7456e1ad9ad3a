//! Command-line orchestration of the pipeline.
//!
//! Six subcommands cover the full workflow: `synth` writes a synthetic
//! corpus, `resplit` partitions it, `build` turns the train split into a
//! datastore plus index, `eval` scores the test split, and `diagnose` /
//! `sweep` aggregate the results. Commands communicate only through files
//! in the output directory, and every run writes the fully resolved
//! configuration beside its outputs, so any artifact can be regenerated
//! byte-for-byte from the directory contents alone.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::baselm::{train_ngram_lm, ContextEncoder, EmbeddingTable};
use crate::config::PipelineConfig;
use crate::corpus::{
    count_ngrams, count_tokens, read_corpus_file, resplit, write_corpus_file, Corpus,
    FrequencyTable, NGramTable,
};
use crate::diagnostics::{
    categorize_tertiles, contamination_report, cv_report, emit_report, expected_prob_by_bin,
    gain_error_correlations, gain_vs_error, hit_rate_by_bin, pq_error_report, sweep,
    tertile_summary, write_gain_table, write_sweep_csv, DiagnosticsReport, FreqKey, FrequencyBins,
    SweepPoint,
};
use crate::error::{Error, Result};
use crate::knnlm::{
    build_datastore, eval_ppl, read_datastore_file, read_records_csv, write_datastore_file,
    write_records_csv, Datastore, EvalOutput, KnnConfig,
};
use crate::synth::{generate_zipf_corpus, ZipfCorpusConfig};
use crate::vindex::{
    read_index_file, write_index_file, FlatIndex, IvfPqConfig, IvfPqIndex, IvfSearcher,
    NeighborSearch,
};

pub const RESPLIT_SUMMARY_FILE: &str = "resplit_summary.txt";
pub const RARE_HISTOGRAM_FILE: &str = "rare_token_histogram.csv";
pub const EVAL_SUMMARY_FILE: &str = "eval_summary.txt";
pub const EXPECTED_PROB_FILE: &str = "expected_prob.csv";
pub const HIT_RATE_FILE: &str = "hit_rate.csv";
pub const CENTROID_CV_FILE: &str = "centroid_cv.csv";
pub const CONTAMINATION_FILE: &str = "contamination.csv";
pub const PQ_ERROR_FILE: &str = "pq_error.csv";
pub const EXPECTED_PROB_PRETRAIN_FILE: &str = "expected_prob_pretrain.csv";
pub const HIT_RATE_PRETRAIN_FILE: &str = "hit_rate_pretrain.csv";
pub const GAIN_VS_ERROR_FILE: &str = "gain_vs_error.csv";
pub const CORRELATIONS_FILE: &str = "correlations.csv";
pub const TERTILE_SUMMARY_FILE: &str = "tertile_summary.csv";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Header of the frequency-trend correlation summary.
pub const CORRELATIONS_HEADER: &str = "name,pearson,spearman,n";

#[derive(Parser, Debug)]
#[command(
    name = "knnlab",
    version,
    about = "Retrieval-augmented n-gram language modeling workbench"
)]
pub struct Cli {
    /// TOML configuration file; every setting has a default when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override every seed in the configuration with this value.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory; relative configured paths resolve against it.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Clone, Copy, Debug)]
pub enum Command {
    /// Generate a synthetic Zipf-distributed corpus.
    Synth,
    /// Split the corpus so rare n-grams concentrate in the eval splits.
    Resplit,
    /// Encode the train split into a datastore and build its index.
    Build,
    /// Score the test split with the base and interpolated models.
    Eval,
    /// Produce frequency-stratified reports from records and artifacts.
    Diagnose,
    /// Mean probabilities per frequency tertile over a (k, tau) grid.
    Sweep,
}

/// Parse the config, apply overrides, prepare the output directory, and
/// dispatch. Every command starts by writing the resolved configuration.
pub fn run(cli: &Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.override_seeds(seed);
    }
    std::fs::create_dir_all(&cli.out_dir)?;
    config.write_resolved(&cli.out_dir)?;
    let ctx = CmdContext { config, out_dir: cli.out_dir.clone() };
    match cli.command {
        Command::Synth => cmd_synth(&ctx),
        Command::Resplit => cmd_resplit(&ctx),
        Command::Build => cmd_build(&ctx),
        Command::Eval => cmd_eval(&ctx),
        Command::Diagnose => cmd_diagnose(&ctx),
        Command::Sweep => cmd_sweep(&ctx),
    }
}

struct CmdContext {
    config: PipelineConfig,
    out_dir: PathBuf,
}

impl CmdContext {
    /// Resolve a configured file name against the output directory
    /// (absolute names pass through unchanged).
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn read_corpus(&self, name: &str) -> Result<Corpus> {
        read_corpus_file(&self.path(name))
    }

    fn encoder(&self) -> Result<ContextEncoder> {
        let e = &self.config.encoder;
        ContextEncoder::new(e.dim, e.window, e.decay, e.seed)
    }

    fn knn_config(&self) -> KnnConfig {
        let k = &self.config.knn;
        KnnConfig {
            k: k.k,
            tau: k.tau,
            lambda: k.lambda,
            nprobe: k.nprobe,
            exact_rescore: k.exact_rescore,
        }
    }

    /// The corpus the base model trains on (defaults to the train split).
    fn read_lm_corpus(&self, train: &Corpus) -> Result<Corpus> {
        match &self.config.paths.lm_corpus {
            Some(name) => self.read_corpus(name),
            None => Ok(train.clone()),
        }
    }

    /// Load datastore + index and check they describe the same entries.
    fn read_artifacts(&self, vocab_size: u32) -> Result<(Datastore, IvfPqIndex)> {
        let ds = read_datastore_file(&self.path(&self.config.paths.datastore), vocab_size)?;
        let index = read_index_file(&self.path(&self.config.paths.index))?;
        if index.len() != ds.len() || index.dim() != ds.dim() {
            return Err(Error::Data(format!(
                "index ({} entries, dim {}) does not match datastore ({} entries, dim {})",
                index.len(),
                index.dim(),
                ds.len(),
                ds.dim()
            )));
        }
        Ok((ds, index))
    }
}

fn cmd_synth(ctx: &CmdContext) -> Result<()> {
    let s = &ctx.config.synth;
    let corpus = generate_zipf_corpus(&ZipfCorpusConfig {
        vocab_size: s.vocab_size,
        alpha: s.alpha,
        n_docs: s.n_docs,
        doc_len: s.doc_len,
        alpha_jitter: s.alpha_jitter,
        head_positions: s.head_positions,
        head_uniform_prob: s.head_uniform_prob,
        seed: s.seed,
    })?;
    let path = ctx.path(&ctx.config.paths.corpus);
    write_corpus_file(&path, &corpus)?;
    println!(
        "wrote {} ({} docs, {} tokens, vocab {})",
        path.display(),
        corpus.n_docs(),
        corpus.total_tokens(),
        corpus.vocab_size()
    );
    Ok(())
}

fn cmd_resplit(ctx: &CmdContext) -> Result<()> {
    let corpus = ctx.read_corpus(&ctx.config.paths.corpus)?;
    let r = &ctx.config.resplit;
    let split = resplit(&corpus, r.target_eval_tokens, r.seed)?;
    let paths = &ctx.config.paths;
    write_corpus_file(&ctx.path(&paths.train), &split.train)?;
    write_corpus_file(&ctx.path(&paths.valid), &split.valid)?;
    write_corpus_file(&ctx.path(&paths.test), &split.test)?;

    let train_freq = count_tokens(&split.train);
    let summary = split_summary(&split.train, &split.valid, &split.test, &train_freq, r)?;
    std::fs::write(ctx.path(RESPLIT_SUMMARY_FILE), &summary)?;
    write_rare_histogram(
        &ctx.path(RARE_HISTOGRAM_FILE),
        &split.train,
        &split.valid,
        &split.test,
        ctx.config.bins.per_decade,
    )?;
    println!(
        "split {} tokens into train={} valid={} test={}",
        corpus.total_tokens(),
        split.train.total_tokens(),
        split.valid.total_tokens(),
        split.test.total_tokens()
    );
    Ok(())
}

/// Fraction of a corpus's tokens whose type falls below `threshold`
/// occurrences in the train split.
pub fn rare_token_share(corpus: &Corpus, train_freq: &FrequencyTable, threshold: u64) -> f64 {
    let total = corpus.total_tokens();
    if total == 0 {
        return 0.0;
    }
    let rare: u64 = corpus
        .docs()
        .iter()
        .flatten()
        .filter(|&&t| train_freq.count(t) < threshold)
        .count() as u64;
    rare as f64 / total as f64
}

fn split_summary(
    train: &Corpus,
    valid: &Corpus,
    test: &Corpus,
    train_freq: &FrequencyTable,
    r: &crate::config::ResplitConfig,
) -> Result<String> {
    let mut out = String::new();
    for (name, c) in [("train", train), ("valid", valid), ("test", test)] {
        out.push_str(&format!("{name}_docs={}\n{name}_tokens={}\n", c.n_docs(), c.total_tokens()));
    }
    out.push_str(&format!("rare_threshold={}\n", r.rare_threshold));
    for (name, c) in [("valid", valid), ("test", test)] {
        out.push_str(&format!(
            "rare_share_{name}={}\n",
            rare_token_share(c, train_freq, r.rare_threshold)
        ));
    }
    Ok(out)
}

/// One row per train-frequency bin: how many token types land in it and
/// how many of the train/eval tokens they account for.
fn write_rare_histogram(
    path: &Path,
    train: &Corpus,
    valid: &Corpus,
    test: &Corpus,
    per_decade: u32,
) -> Result<()> {
    let train_freq = count_tokens(train);
    let valid_freq = count_tokens(valid);
    let test_freq = count_tokens(test);
    let max_count = train_freq.counts().iter().copied().max().unwrap_or(0);
    let bins = FrequencyBins::new(per_decade, max_count)?;
    let n = bins.n_bins();
    let (mut types, mut train_occ, mut eval_occ) = (vec![0u64; n], vec![0u64; n], vec![0u64; n]);
    for t in 0..train.vocab_size() {
        let b = bins.bin_of(train_freq.count(t));
        types[b] += 1;
        train_occ[b] += train_freq.count(t);
        eval_occ[b] += valid_freq.count(t) + test_freq.count(t);
    }
    let mut text = String::from("bin_lo,bin_hi,n_types,train_occurrences,eval_occurrences\n");
    for b in 0..n {
        let (lo, hi) = bins.bounds(b);
        text.push_str(&format!("{lo},{hi},{},{},{}\n", types[b], train_occ[b], eval_occ[b]));
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn cmd_build(ctx: &CmdContext) -> Result<()> {
    let train = ctx.read_corpus(&ctx.config.paths.train)?;
    let encoder = ctx.encoder()?;
    let ds = build_datastore(&train, &encoder);
    write_datastore_file(&ctx.path(&ctx.config.paths.datastore), &ds)?;
    let i = &ctx.config.index;
    let index = IvfPqIndex::build(
        ds.keys(),
        ds.values(),
        &IvfPqConfig {
            coarse_clusters: i.coarse_clusters,
            subspaces: i.subspaces,
            code_bits: i.code_bits,
            kmeans_iters: i.kmeans_iters,
            train_sample: i.train_sample,
            seed: i.seed,
        },
    )?;
    write_index_file(&ctx.path(&ctx.config.paths.index), &index)?;
    println!(
        "built datastore ({} entries, dim {}) and index ({} lists, {} subspaces)",
        ds.len(),
        ds.dim(),
        index.coarse_clusters(),
        index.subspaces()
    );
    Ok(())
}

fn cmd_eval(ctx: &CmdContext) -> Result<()> {
    let train = ctx.read_corpus(&ctx.config.paths.train)?;
    let test = ctx.read_corpus(&ctx.config.paths.test)?;
    if test.vocab_size() != train.vocab_size() {
        return Err(Error::Data(format!(
            "test vocabulary ({}) differs from train vocabulary ({})",
            test.vocab_size(),
            train.vocab_size()
        )));
    }
    let lm_corpus = ctx.read_lm_corpus(&train)?;
    let lm = train_ngram_lm(&lm_corpus, ctx.config.lm.order)?;
    let freq_datastore = count_tokens(&train);
    let freq_pretrain = count_tokens(&lm_corpus);
    let context_tables: Vec<NGramTable> =
        (1..=5).map(|n| count_ngrams(&train, n)).collect::<Result<_>>()?;
    let (ds, index) = ctx.read_artifacts(train.vocab_size())?;
    let encoder = ctx.encoder()?;
    if ds.dim() != encoder.dim() {
        return Err(Error::Data(format!(
            "datastore dim {} does not match configured encoder dim {}",
            ds.dim(),
            encoder.dim()
        )));
    }
    let table = EmbeddingTable::new(&encoder, train.vocab_size());
    let knn = ctx.knn_config();
    let output = with_searcher(ctx, &ds, &index, |searcher| {
        eval_ppl(&lm, searcher, &table, &knn, &test, &freq_datastore, &freq_pretrain, &context_tables)
    })?;

    write_records_csv(&ctx.path(&ctx.config.paths.records), &output.records)?;
    std::fs::write(ctx.path(EVAL_SUMMARY_FILE), eval_summary(ctx, &output))?;
    println!(
        "ppl_base={} ppl_knnlm={} over {} positions",
        output.ppl_base,
        output.ppl_knnlm,
        output.records.len()
    );
    Ok(())
}

/// Run `body` with the searcher the config asks for: exhaustive exact
/// search over stored keys, quantized inverted lists, or quantized with
/// exact re-ranking.
fn with_searcher<T>(
    ctx: &CmdContext,
    ds: &Datastore,
    index: &IvfPqIndex,
    body: impl FnOnce(&(dyn NeighborSearch + Sync)) -> Result<T>,
) -> Result<T> {
    let k = &ctx.config.knn;
    if k.exact_search {
        body(&FlatIndex::new(ds.keys(), ds.values()))
    } else if k.exact_rescore {
        body(&IvfSearcher::with_rescore(index, k.nprobe, ds.keys()))
    } else {
        body(&IvfSearcher::new(index, k.nprobe))
    }
}

fn searcher_name(ctx: &CmdContext) -> &'static str {
    let k = &ctx.config.knn;
    if k.exact_search {
        "exact"
    } else if k.exact_rescore {
        "ivfpq+rescore"
    } else {
        "ivfpq"
    }
}

fn eval_summary(ctx: &CmdContext, output: &EvalOutput) -> String {
    let k = &ctx.config.knn;
    format!(
        "ppl_base={}\nppl_knnlm={}\nn_positions={}\nk={}\ntau={}\nlambda={}\nnprobe={}\nsearcher={}\n",
        output.ppl_base,
        output.ppl_knnlm,
        output.records.len(),
        k.k,
        k.tau,
        k.lambda,
        k.nprobe,
        searcher_name(ctx)
    )
}

fn cmd_diagnose(ctx: &CmdContext) -> Result<()> {
    let records = read_records_csv(&ctx.path(&ctx.config.paths.records))?;
    let train = ctx.read_corpus(&ctx.config.paths.train)?;
    let freq_datastore = count_tokens(&train);
    let (ds, index) = ctx.read_artifacts(train.vocab_size())?;

    let max_count = freq_datastore
        .counts()
        .iter()
        .copied()
        .max()
        .unwrap_or(0)
        .max(records.iter().map(|r| r.freq_pretrain).max().unwrap_or(0));
    let bins = FrequencyBins::new(ctx.config.bins.per_decade, max_count)?;
    let vocab = train.vocab_size();

    let expected = expected_prob_by_bin(&records, &bins, FreqKey::Datastore);
    emit_report(&ctx.path(EXPECTED_PROB_FILE), &expected)?;
    let hits = hit_rate_by_bin(&records, &bins, FreqKey::Datastore);
    emit_report(&ctx.path(HIT_RATE_FILE), &hits)?;
    emit_report(
        &ctx.path(EXPECTED_PROB_PRETRAIN_FILE),
        &expected_prob_by_bin(&records, &bins, FreqKey::Pretrain),
    )?;
    emit_report(
        &ctx.path(HIT_RATE_PRETRAIN_FILE),
        &hit_rate_by_bin(&records, &bins, FreqKey::Pretrain),
    )?;

    let cv = cv_report(ds.keys(), ds.values(), vocab, &bins);
    emit_report(&ctx.path(CENTROID_CV_FILE), &cv)?;
    let d = &ctx.config.diagnose;
    let flat = FlatIndex::new(ds.keys(), ds.values());
    let contamination = contamination_report(&flat, vocab, &bins, d.contamination_sample, d.seed);
    emit_report(&ctx.path(CONTAMINATION_FILE), &contamination)?;

    let errors = index.reconstruction_errors(ds.keys());
    let (pq, type_errors) = pq_error_report(&errors, ds.values(), vocab, &bins);
    emit_report(&ctx.path(PQ_ERROR_FILE), &pq)?;

    let gain_table = gain_vs_error(&records, &type_errors);
    write_gain_table(&ctx.path(GAIN_VS_ERROR_FILE), &gain_table)?;
    write_correlations(ctx, &hits, &contamination, &cv, &pq, &gain_table)?;

    let tertiles = categorize_tertiles(&freq_datastore)?;
    let knn = &ctx.config.knn;
    let summary = tertile_summary(&records, &tertiles, knn.k, knn.tau);
    write_sweep_csv(&ctx.path(TERTILE_SUMMARY_FILE), &summary)?;

    println!(
        "diagnosed {} records over {} datastore entries into {} frequency bins",
        records.len(),
        ds.len(),
        bins.n_bins()
    );
    Ok(())
}

/// Spearman/Pearson of each stratified metric against bin frequency,
/// over bins that are populated enough, plus the per-type prediction-gain
/// vs quantization-error correlation.
fn write_correlations(
    ctx: &CmdContext,
    hits: &DiagnosticsReport,
    contamination: &DiagnosticsReport,
    cv: &DiagnosticsReport,
    pq: &DiagnosticsReport,
    gain_table: &crate::diagnostics::GainErrorTable,
) -> Result<()> {
    use crate::diagnostics::{correlate, CorrMethod};
    let min_obs = ctx.config.diagnose.min_bin_obs;
    let mut text = String::from(CORRELATIONS_HEADER);
    text.push('\n');
    let metrics: [(&str, &DiagnosticsReport, fn(&crate::diagnostics::BinRow) -> Option<f64>); 4] = [
        ("hit_rate", hits, |r| r.hit_rate),
        ("contamination", contamination, |r| r.contamination),
        ("centroid_cv", cv, |r| r.mean_cv),
        ("pq_error", pq, |r| r.mean_pq_error),
    ];
    for (name, report, metric) in metrics {
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for row in &report.rows {
            if row.n_obs >= min_obs {
                if let Some(v) = metric(row) {
                    x.push(row.bin_lo as f64);
                    y.push(v);
                }
            }
        }
        let (pearson, spearman) = if x.len() >= 2 {
            (correlate(&x, &y, CorrMethod::Pearson)?, correlate(&x, &y, CorrMethod::Spearman)?)
        } else {
            (None, None)
        };
        text.push_str(&correlation_row(name, pearson, spearman, x.len()));
    }
    let (pearson, spearman) = gain_error_correlations(gain_table);
    text.push_str(&correlation_row("gain_vs_error", pearson, spearman, gain_table.rows.len()));
    std::fs::write(ctx.path(CORRELATIONS_FILE), text)?;
    Ok(())
}

fn correlation_row(name: &str, pearson: Option<f64>, spearman: Option<f64>, n: usize) -> String {
    let cell = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    format!("{name},{},{},{n}\n", cell(pearson), cell(spearman))
}

fn cmd_sweep(ctx: &CmdContext) -> Result<()> {
    let s = &ctx.config.sweep;
    if s.ks.is_empty() || s.taus.is_empty() {
        return Err(Error::Config("sweep needs at least one k and one tau".into()));
    }
    let train = ctx.read_corpus(&ctx.config.paths.train)?;
    let test = ctx.read_corpus(&ctx.config.paths.test)?;
    let lm_corpus = ctx.read_lm_corpus(&train)?;
    let lm = train_ngram_lm(&lm_corpus, ctx.config.lm.order)?;
    let freq_datastore = count_tokens(&train);
    let tertiles = categorize_tertiles(&freq_datastore)?;
    let (ds, index) = ctx.read_artifacts(train.vocab_size())?;
    let encoder = ctx.encoder()?;
    let table = EmbeddingTable::new(&encoder, train.vocab_size());
    let points: Vec<SweepPoint> = s
        .ks
        .iter()
        .flat_map(|&k| s.taus.iter().map(move |&tau| SweepPoint { k, tau }))
        .collect();
    let rows = with_searcher(ctx, &ds, &index, |searcher| {
        sweep(&lm, searcher, &table, &points, &test, &tertiles)
    })?;
    write_sweep_csv(&ctx.path(SWEEP_FILE), &rows)?;
    println!("swept {} (k, tau) points into {} rows", points.len(), rows.len());
    Ok(())
}
