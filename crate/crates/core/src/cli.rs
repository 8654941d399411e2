//! Command-line front end: reproducible file-to-file pipelines over the
//! library. Every subcommand is a pure function of its input files and
//! flags; all randomness flows through an explicit seed.
//!
//! Exit codes: 0 success, 1 domain error (invalid data), 2 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::conllu::{coarsen_treebank, parse_treebank_named, serialize_treebank, Treebank};
use crate::gei::{evaluate_gei, GoldErrors};
use crate::noise::{
    load_unimorph, manifest_tsv, perturb_treebank, FeatureMapping, PerturbOptions,
};
use crate::rules::{
    agreement_candidates, assignment_candidates, extract_agreement_rules,
    extract_assignment_rules, load_rules, save_rules, ExtractionConfig, RuleSet,
};
use crate::scoring::{score_corpus, ReportMeta};
use crate::stats::{correlate_systems, SystemScoreTable};

#[derive(Parser)]
#[command(
    name = "morphoscore",
    version,
    about = "Extract morphosyntactic rules from dependency treebanks and score parsed text against them"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract agreement and assignment rules from a CoNLL-U treebank
    ExtractRules(ExtractArgs),
    /// Score a parsed corpus against a rule file
    Score(ScoreArgs),
    /// Synthesize a morphology-noised copy of a treebank
    Perturb(PerturbArgs),
    /// Evaluate grammar-error identification against gold error marks
    GeiEval(GeiArgs),
    /// Correlate metric scores with judgment scores across systems
    Correlate(CorrelateArgs),
}

#[derive(Args)]
struct ExtractArgs {
    /// Input treebank (CoNLL-U)
    treebank: PathBuf,
    /// Output rule file (JSON)
    #[arg(short, long)]
    output: PathBuf,
    /// Language label recorded in the rule file
    #[arg(long, default_value = "und")]
    language: String,
    /// Annotation schema label recorded in the rule file
    #[arg(long = "schema", default_value = "SUD")]
    schema_label: String,
    /// Minimum agreement fraction (strict) for agreement rules
    #[arg(long, default_value_t = 0.9)]
    agree_threshold: f64,
    /// Cumulative support coverage kept after agreement pruning
    #[arg(long, default_value_t = 0.8)]
    agree_coverage: f64,
    /// Minimum KL divergence (strict) for assignment rules
    #[arg(long, default_value_t = 0.9)]
    kl_threshold: f64,
    /// Minimum feature-bearing edge count for assignment rules
    #[arg(long, default_value_t = 100)]
    min_relation_count: u64,
    /// Minimum local probability mass for an allowed value
    #[arg(long, default_value_t = 0.05)]
    value_inclusion_threshold: f64,
    /// Strip deprel subtypes (`:...`, `@...`) before extraction
    #[arg(long)]
    coarse_deprels: bool,
    #[command(flatten)]
    jobs: Jobs,
}

#[derive(Args)]
struct ScoreArgs {
    /// Input corpus (CoNLL-U)
    treebank: PathBuf,
    /// Rule file produced by extract-rules
    #[arg(short, long)]
    rules: PathBuf,
    /// Write the full report as JSON
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the per-rule summary as TSV
    #[arg(long)]
    tsv: Option<PathBuf>,
    /// Write one TSV row per sentence (sent_id, score or NA)
    #[arg(long)]
    segments: Option<PathBuf>,
    /// Strip deprel subtypes (`:...`, `@...`) before scoring
    #[arg(long)]
    coarse_deprels: bool,
    #[command(flatten)]
    jobs: Jobs,
}

#[derive(Args)]
struct PerturbArgs {
    /// Input treebank (CoNLL-U)
    treebank: PathBuf,
    /// UniMorph-format inflection lexicon (TSV)
    #[arg(short, long)]
    lexicon: PathBuf,
    /// Feature mapping TSV (defaults to the built-in UD-UniMorph mapping)
    #[arg(long)]
    mapping: Option<PathBuf>,
    /// Output treebank (CoNLL-U)
    #[arg(short, long)]
    output: PathBuf,
    /// Write the alteration manifest as TSV
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep originals in the output, each followed by its altered copy
    #[arg(long)]
    concat: bool,
    /// Keep the original FEATS on altered tokens
    #[arg(long)]
    keep_gold_feats: bool,
    #[command(flatten)]
    jobs: Jobs,
}

#[derive(Args)]
struct GeiArgs {
    /// Input corpus (CoNLL-U)
    treebank: PathBuf,
    /// Rule file produced by extract-rules
    #[arg(short, long)]
    rules: PathBuf,
    /// Gold error marks as TSV (sent_id, token_id); defaults to
    /// GoldError=Yes MISC annotations in the corpus
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Write the report as JSON
    #[arg(long)]
    json: Option<PathBuf>,
    #[command(flatten)]
    jobs: Jobs,
}

#[derive(Args)]
struct CorrelateArgs {
    /// Score table TSV: system_id, metric_score, judgment_score
    table: PathBuf,
    /// Remove outlier systems by robust z-score before correlating
    #[arg(long)]
    remove_outliers: bool,
    /// Robust z-score cutoff for outlier removal
    #[arg(long, default_value_t = 2.5)]
    cutoff: f64,
    /// Write the report as JSON
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct Jobs {
    /// Worker threads for per-sentence work (output is identical for any
    /// value)
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

enum CliError {
    Usage(String),
    Domain(String),
}

impl From<crate::error::Error> for CliError {
    fn from(e: crate::error::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

pub fn run() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ExtractRules(args) => with_pool(args.jobs.jobs, || extract_rules_cmd(&args)),
        Command::Score(args) => with_pool(args.jobs.jobs, || score_cmd(&args)),
        Command::Perturb(args) => with_pool(args.jobs.jobs, || perturb_cmd(&args)),
        Command::GeiEval(args) => with_pool(args.jobs.jobs, || gei_eval_cmd(&args)),
        Command::Correlate(args) => correlate_cmd(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn with_pool<T>(jobs: usize, f: impl FnOnce() -> T + Send) -> T
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    pool.install(f)
}

fn read_input(path: &Path) -> CliResult<String> {
    if !path.is_file() {
        return Err(CliError::Usage(format!(
            "input file not found: {}",
            path.display()
        )));
    }
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Domain(format!("failed to read {}: {e}", path.display())))
}

fn write_output(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Domain(format!("failed to write {}: {e}", path.display())))
}

fn load_treebank(path: &Path, coarse: bool) -> CliResult<Treebank> {
    let text = read_input(path)?;
    let mut tb = parse_treebank_named(&text, &path.display().to_string())?;
    if coarse {
        coarsen_treebank(&mut tb);
    }
    Ok(tb)
}

fn load_rule_file(path: &Path) -> CliResult<(RuleSet, String)> {
    let text = read_input(path)?;
    let rs = load_rules(&text)?;
    Ok((rs, sha256_hex(text.as_bytes())))
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

fn extract_rules_cmd(args: &ExtractArgs) -> CliResult<()> {
    let cfg = ExtractionConfig {
        agree_threshold: args.agree_threshold,
        agree_coverage: args.agree_coverage,
        kl_threshold: args.kl_threshold,
        min_relation_count: args.min_relation_count,
        value_inclusion_threshold: args.value_inclusion_threshold,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let tb = load_treebank(&args.treebank, args.coarse_deprels)?;

    let agr_candidates = agreement_candidates(&tb);
    let asg_candidates = assignment_candidates(&tb);
    let agreement = extract_agreement_rules(&tb, &cfg);
    let assignment = extract_assignment_rules(&tb, &cfg);

    let candidate_support: u64 = agr_candidates
        .iter()
        .filter(|c| c.fraction() > cfg.agree_threshold)
        .map(|c| c.applicable)
        .sum();
    let kept_support: u64 = agreement.iter().map(|r| r.support).sum();

    let rs = RuleSet {
        language: args.language.clone(),
        schema: args.schema_label.clone(),
        agreement,
        assignment,
        config: cfg,
    };
    write_output(&args.output, &save_rules(&rs))?;

    let edge_count: usize = tb.sentences.iter().map(|s| s.tokens.len().saturating_sub(1)).sum();
    println!("language: {}", rs.language);
    println!("schema: {}", rs.schema);
    println!("sentences: {}", tb.len());
    println!("edges: {edge_count}");
    println!("agreement_patterns: {}", agr_candidates.len());
    println!("agreement_rules: {}", rs.agreement.len());
    if candidate_support > 0 {
        println!(
            "agreement_support_coverage: {:.6}",
            kept_support as f64 / candidate_support as f64
        );
    } else {
        println!("agreement_support_coverage: NA");
    }
    println!("assignment_patterns: {}", asg_candidates.len());
    println!("assignment_rules: {}", rs.assignment.len());
    println!("output: {}", args.output.display());
    Ok(())
}

fn score_cmd(args: &ScoreArgs) -> CliResult<()> {
    let (rs, rules_hash) = load_rule_file(&args.rules)?;
    let tb = load_treebank(&args.treebank, args.coarse_deprels)?;
    let report = score_corpus(&tb, &rs, args.segments.is_some());

    if report.rules_applied() == 0 && !rs.is_empty() {
        eprintln!(
            "warning: no rule matched the input; check that rule file and treebank use the same annotation schema"
        );
    }

    let meta = ReportMeta {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        rules_hash,
    };
    if let Some(path) = &args.json {
        write_output(path, &report.to_json(&meta))?;
    }
    if let Some(path) = &args.tsv {
        write_output(path, &report.summary_tsv())?;
    }
    if let Some(path) = &args.segments {
        write_output(path, &report.segments_tsv())?;
    }

    match report.corpus_score {
        Some(score) => println!("corpus_score: {score:.6}"),
        None => println!("corpus_score: NA"),
    }
    println!("rules_total: {}", rs.len());
    println!("rules_applied: {}", report.rules_applied());
    println!("instances_applicable: {}", report.total_applicable());
    println!("instances_satisfied: {}", report.total_satisfied());
    println!("sentences: {}", tb.len());
    println!("rules_hash: {}", meta.rules_hash);
    Ok(())
}

fn perturb_cmd(args: &PerturbArgs) -> CliResult<()> {
    let tb = load_treebank(&args.treebank, false)?;
    let lexicon = load_unimorph(&read_input(&args.lexicon)?)?;
    let mapping = match &args.mapping {
        Some(path) => FeatureMapping::parse(&read_input(path)?)?,
        None => FeatureMapping::default_mapping().clone(),
    };
    let opts = PerturbOptions {
        concat: args.concat,
        keep_gold_feats: args.keep_gold_feats,
    };
    let (out, report) = perturb_treebank(&tb, &lexicon, &mapping, args.seed, opts);
    write_output(&args.output, &serialize_treebank(&out))?;
    if let Some(path) = &args.manifest {
        write_output(path, &manifest_tsv(&report.records))?;
    }
    println!("sentences: {}", report.total_sentences);
    println!("altered: {}", report.altered_sentences);
    println!("coverage: {:.2}%", report.coverage_percent());
    println!("seed: {}", args.seed);
    println!("output: {}", args.output.display());
    Ok(())
}

fn gei_eval_cmd(args: &GeiArgs) -> CliResult<()> {
    let (rs, _) = load_rule_file(&args.rules)?;
    let tb = load_treebank(&args.treebank, false)?;
    let gold = match &args.gold {
        Some(path) => GoldErrors::from_tsv(&read_input(path)?)?,
        None => GoldErrors::from_misc(&tb),
    };
    gold.validate(&tb)?;
    let report = evaluate_gei(&tb, &gold, &rs);
    if let Some(path) = &args.json {
        write_output(path, &report.to_json())?;
    }
    println!("gold_marks: {}", gold.len());
    println!("tp: {}", report.tp);
    println!("fp: {}", report.fp);
    println!("fn: {}", report.false_negatives);
    match report.precision {
        Some(p) => println!("precision: {p:.6}"),
        None => println!("precision: NA"),
    }
    match report.recall {
        Some(r) => println!("recall: {r:.6}"),
        None => println!("recall: NA"),
    }
    Ok(())
}

fn correlate_cmd(args: &CorrelateArgs) -> CliResult<()> {
    let table = SystemScoreTable::from_tsv(&read_input(&args.table)?)?;
    if args.remove_outliers && crate::stats::robust_z_scores(&table).is_none() {
        if table.len() < 3 {
            eprintln!("warning: fewer than 3 systems; outlier removal skipped");
        } else {
            eprintln!("warning: zero judgment-score spread (MAD = 0); no outliers removed");
        }
    }
    let report = correlate_systems(&table, args.remove_outliers, args.cutoff);
    if let Some(path) = &args.json {
        write_output(path, &report.to_json())?;
    }
    println!("systems: {}", table.len());
    println!("removed: {}", report.n_removed);
    println!("used: {}", report.n_used);
    match report.r {
        Some(r) => println!("pearson_r: {r:.6}"),
        None => println!("pearson_r: NA"),
    }
    Ok(())
}
