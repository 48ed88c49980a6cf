//! `pronounflow` command line: `calibrate`, `evaluate` and `lexicon validate`.
//!
//! Exit codes: 0 ok, 2 I/O, 3 malformed input, 4 bad configuration.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use pronounflow::conllu::ParseError;
use pronounflow::evaluation::{
    load_gold_corpus, load_neopronoun_cases, run_neopronoun_suite, run_replication_detailed, CorpusError,
};
use pronounflow::fillmask::{RemoteConfig, DEFAULT_TOP_K};
use pronounflow::lexicon::{LexiconError, LexiconPaths};
use pronounflow::winventor::{IndicatorWeights, NO_MATCH_PENALTY};
use pronounflow::{
    parse_conllu, BaselineBackend, CalibrationReport, Document, FillMaskBackend, FixtureBackend, Lexicons,
    MatcherConfig, Mode, Pipeline, PipelineConfig, RemoteBackend, SkipReason,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 2;
pub const EXIT_FORMAT: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Format(String),
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => EXIT_IO,
            CliError::Format(_) => EXIT_FORMAT,
            CliError::Config(_) => EXIT_CONFIG,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Format(m) => write!(f, "format error: {m}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<LexiconError> for CliError {
    fn from(e: LexiconError) -> Self {
        match e {
            LexiconError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Format(e.to_string()),
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[derive(Parser, Debug)]
#[command(name = "pronounflow", version, about = "Pronoun calibration for dependency-parsed English")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Rewrite the pronouns of CoNLL-U sentences; one JSON report per line.
    Calibrate(CalibrateArgs),
    /// Replay a gold corpus through the pipeline and report statistics.
    Evaluate(EvaluateArgs),
    /// Lexicon maintenance.
    Lexicon {
        #[command(subcommand)]
        command: LexiconCommand,
    },
}

#[derive(Subcommand, Debug)]
pub enum LexiconCommand {
    /// Load every lexicon table and check it.
    Validate(LexiconArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    Remote,
    Baseline,
    Fixture,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Replication,
    Neopronoun,
}

#[derive(Args, Debug, Clone, Default)]
pub struct LexiconArgs {
    /// Noun and name genders, `lemma<TAB>gender`.
    #[arg(long, env = "PRONOUNFLOW_GENDER_LIST")]
    pub gender_list: Option<PathBuf>,
    /// Neopronoun paradigms, `surface<TAB>gender<TAB>case<TAB>number`.
    #[arg(long, env = "PRONOUNFLOW_NEOPRONOUNS")]
    pub neopronouns: Option<PathBuf>,
    #[arg(long, env = "PRONOUNFLOW_INDICATING_VERBS")]
    pub indicating_verbs: Option<PathBuf>,
    /// Person names and titles used to tag PERSON entities.
    #[arg(long, env = "PRONOUNFLOW_GAZETTEER")]
    pub gazetteer: Option<PathBuf>,
}

impl LexiconArgs {
    pub fn load(&self) -> Result<Lexicons, CliError> {
        let paths = LexiconPaths {
            gender_list: self.gender_list.as_deref(),
            neopronouns: self.neopronouns.as_deref(),
            indicating_verbs: self.indicating_verbs.as_deref(),
            gazetteer: self.gazetteer.as_deref(),
        };
        Ok(Lexicons::load(&paths)?)
    }
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long, default_value = "austere")]
    pub mode: Mode,
    /// Candidates requested per masked position.
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    pub top_k: usize,
    #[arg(long, value_enum, default_value = "baseline")]
    pub backend: BackendChoice,
    #[arg(long, env = "PRONOUNFLOW_BACKEND_URL")]
    pub backend_url: Option<String>,
    /// Fixture table for `--backend fixture`.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    #[command(flatten)]
    pub lexicons: LexiconArgs,
    /// `indicator=value` overrides for the antecedent indicators.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = NO_MATCH_PENALTY, allow_hyphen_values = true)]
    pub no_match_penalty: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub model_weight: f64,
    /// Rank by model score alone.
    #[arg(long)]
    pub model_only: bool,
    /// Include the full scoring trace in reports.
    #[arg(long)]
    pub explain: bool,
    #[arg(long, default_value_t = 1)]
    pub results_per_sentence: usize,
    /// Worker threads; 0 uses one per core.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Seconds before a remote request is abandoned.
    #[arg(long, default_value_t = 30)]
    pub timeout: u64,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Write reports here instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value = "replication")]
    pub suite: Suite,
    /// CoNLL-U parses of the corpus; defaults to the corpus path with a `.conllu` extension.
    #[arg(long)]
    pub parses: Option<PathBuf>,
    /// Write the JSON report here and print the table on standard output.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Per-sentence outcomes in the JSON report.
    #[arg(long)]
    pub per_sentence: bool,
    /// Corpus TSV: `text<TAB>gold,pronouns`, or `input<TAB>expected` for the neopronoun suite.
    pub corpus: PathBuf,
}

/// Validated settings; echoed into reports.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub top_k: usize,
    pub backend: BackendChoice,
    pub backend_url: Option<String>,
    pub fixtures: Option<PathBuf>,
    pub gender_list: Option<PathBuf>,
    pub neopronouns: Option<PathBuf>,
    pub indicating_verbs: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub weights: IndicatorWeights,
    pub no_match_penalty: f64,
    pub model_weight: f64,
    pub symbolic_first: bool,
    pub explain: bool,
    pub results_per_sentence: usize,
    pub workers: usize,
    pub timeout_secs: u64,
}

impl RunConfig {
    pub fn from_args(args: &RunArgs) -> Result<Self, CliError> {
        if args.top_k == 0 {
            return Err(CliError::Config("--top-k must be at least 1".into()));
        }
        if args.results_per_sentence == 0 {
            return Err(CliError::Config("--results-per-sentence must be at least 1".into()));
        }
        if !args.no_match_penalty.is_finite() || !args.model_weight.is_finite() || args.model_weight < 0.0 {
            return Err(CliError::Config("penalty and model weight must be finite, weight non-negative".into()));
        }
        match args.backend {
            BackendChoice::Remote if args.backend_url.is_none() => {
                return Err(CliError::Config("--backend remote needs --backend-url".into()))
            }
            BackendChoice::Fixture if args.fixtures.is_none() => {
                return Err(CliError::Config("--backend fixture needs --fixtures".into()))
            }
            _ => {}
        }
        let weights = match &args.weights {
            Some(p) => IndicatorWeights::parse(&read_file(p)?)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
            None => IndicatorWeights::default(),
        };
        Ok(RunConfig {
            mode: args.mode,
            top_k: args.top_k,
            backend: args.backend,
            backend_url: args.backend_url.clone(),
            fixtures: args.fixtures.clone(),
            gender_list: args.lexicons.gender_list.clone(),
            neopronouns: args.lexicons.neopronouns.clone(),
            indicating_verbs: args.lexicons.indicating_verbs.clone(),
            gazetteer: args.lexicons.gazetteer.clone(),
            weights,
            no_match_penalty: args.no_match_penalty,
            model_weight: args.model_weight,
            symbolic_first: !args.model_only,
            explain: args.explain,
            results_per_sentence: args.results_per_sentence,
            workers: args.workers,
            timeout_secs: args.timeout,
        })
    }

    fn lexicon_args(&self) -> LexiconArgs {
        LexiconArgs {
            gender_list: self.gender_list.clone(),
            neopronouns: self.neopronouns.clone(),
            indicating_verbs: self.indicating_verbs.clone(),
            gazetteer: self.gazetteer.clone(),
        }
    }

    /// Echo for report headers. Worker count is left out so reports do not
    /// depend on the machine.
    pub fn echo(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("object").remove("workers");
        v
    }

    fn backend(&self, lex: &Lexicons) -> Result<Arc<dyn FillMaskBackend>, CliError> {
        Ok(match self.backend {
            BackendChoice::Baseline => Arc::new(BaselineBackend::shipped(&lex.standard)),
            BackendChoice::Fixture => {
                let path = self.fixtures.as_ref().expect("checked in from_args");
                let fixture = FixtureBackend::from_json(&read_file(path)?)
                    .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
                Arc::new(fixture)
            }
            BackendChoice::Remote => {
                let mut rc = RemoteConfig::new(self.backend_url.as_deref().expect("checked in from_args"));
                rc.timeout = std::time::Duration::from_secs(self.timeout_secs.max(1));
                Arc::new(RemoteBackend::new(rc))
            }
        })
    }

    pub fn pipeline(&self) -> Result<Pipeline, CliError> {
        let lex = self.lexicon_args().load()?;
        let backend = self.backend(&lex)?;
        let config = PipelineConfig {
            mode: self.mode,
            matcher: MatcherConfig {
                no_match_penalty: self.no_match_penalty,
                model_weight: self.model_weight,
                symbolic_first: self.symbolic_first,
                top_k: self.top_k,
                results_per_sentence: self.results_per_sentence,
            },
            weights: self.weights.clone(),
        };
        Ok(Pipeline::new(Arc::new(lex), backend, config))
    }

    fn thread_pool(&self) -> Result<rayon::ThreadPool, CliError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))
    }
}

/// Reads a CoNLL-U file and tags PERSON names in sentences that carry no entity annotation.
pub fn load_document(path: &Path, lex: &Lexicons) -> Result<Document, CliError> {
    let text = read_file(path)?;
    let doc_id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut doc = parse_conllu(&doc_id, &text).map_err(|e| match e {
        ParseError::Io(e) => CliError::Io(format!("{}: {e}", path.display())),
        other => CliError::Format(format!("{}: {other}", path.display())),
    })?;
    lex.gazetteer.backfill(&mut doc);
    Ok(doc)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CalibrateSummary {
    pub processed: usize,
    pub rewritten: usize,
    pub no_pronouns: usize,
    pub rejected: usize,
    pub backend_failed: usize,
}

impl CalibrateSummary {
    fn add(&mut self, report: &CalibrationReport) {
        self.processed += 1;
        match report.skipped_reason {
            None => self.rewritten += 1,
            Some(SkipReason::NoPronouns) => self.no_pronouns += 1,
            Some(SkipReason::RejectedUnsupported) => self.rejected += 1,
            Some(SkipReason::BackendFailed) => self.backend_failed += 1,
        }
    }

    pub fn skipped(&self) -> usize {
        self.no_pronouns + self.backend_failed
    }
}

impl fmt::Display for CalibrateSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "processed {} sentence(s): {} calibrated, {} skipped (no-pronouns {}, backend-failed {}), {} rejected",
            self.processed,
            self.rewritten,
            self.skipped(),
            self.no_pronouns,
            self.backend_failed,
            self.rejected
        )
    }
}

fn io_err(e: io::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Calibrates every sentence of `inputs` and writes one JSON report per line.
/// All inputs are parsed before any report is written.
pub fn cmd_calibrate(inputs: &[PathBuf], config: &RunConfig, out: &mut dyn Write) -> Result<CalibrateSummary, CliError> {
    let pipeline = config.pipeline()?;
    let docs = inputs
        .iter()
        .map(|p| load_document(p, pipeline.lexicons()))
        .collect::<Result<Vec<_>, _>>()?;
    let pool = config.thread_pool()?;
    let mut summary = CalibrateSummary::default();
    for doc in &docs {
        let reports = pool.install(|| pipeline.calibrate_document(doc));
        for r in &reports {
            summary.add(r);
            serde_json::to_writer(&mut *out, &r.to_json(config.explain)).map_err(|e| CliError::Io(e.to_string()))?;
            out.write_all(b"\n").map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)?;
    Ok(summary)
}

fn corpus_err(path: &Path, e: CorpusError) -> CliError {
    CliError::Format(format!("{}: {e}", path.display()))
}

/// Runs an evaluation suite; returns the JSON report and a printable table.
pub fn cmd_evaluate(
    corpus: &Path,
    parses: Option<&Path>,
    suite: Suite,
    per_sentence: bool,
    config: &RunConfig,
) -> Result<(Value, String), CliError> {
    let pipeline = config.pipeline()?;
    let tsv = read_file(corpus)?;
    let parse_path = parses.map(Path::to_path_buf).unwrap_or_else(|| corpus.with_extension("conllu"));
    let doc = load_document(&parse_path, pipeline.lexicons())?;
    let pool = config.thread_pool()?;
    match suite {
        Suite::Replication => {
            let gold = load_gold_corpus(&tsv, &doc, pipeline.lexicons()).map_err(|e| corpus_err(corpus, e))?;
            let run = pool.install(|| run_replication_detailed(&gold, &pipeline));
            let r = &run.result;
            let mut report = json!({
                "suite": "replication",
                "config": config.echo(),
                "corpus": corpus.display().to_string(),
                "result": r,
            });
            if per_sentence {
                report["sentences"] = serde_json::to_value(&run.sentences).expect("outcomes serialize");
            }
            let rows = [
                ("sentences", r.total.to_string()),
                ("parsed", r.parsed.to_string()),
                ("rejected", r.rejected.to_string()),
                ("backend failures", r.failed.to_string()),
                ("hits", r.hits.to_string()),
                ("accuracy", format!("{:.4}", r.accuracy)),
                ("avg sentence length", format!("{:.2}", r.avg_sentence_length)),
                ("avg pronouns", format!("{:.2}", r.avg_pronouns)),
                ("winventor decisions", format!("{:.1}%", 100.0 * r.winventor_share)),
                ("model decisions", format!("{:.1}%", 100.0 * r.model_share)),
            ];
            let table = rows.iter().map(|(k, v)| format!("{k:<22}{v:>10}\n")).collect();
            Ok((report, table))
        }
        Suite::Neopronoun => {
            let cases = load_neopronoun_cases(&tsv, &doc).map_err(|e| corpus_err(corpus, e))?;
            let outcomes = pool.install(|| run_neopronoun_suite(&cases, &pipeline));
            let matched = outcomes.iter().filter(|o| o.matched).count();
            let report = json!({
                "suite": "neopronoun",
                "config": config.echo(),
                "corpus": corpus.display().to_string(),
                "total": outcomes.len(),
                "matched": matched,
                "cases": outcomes,
            });
            let mut table = String::new();
            for o in &outcomes {
                let mark = if o.matched { "ok  " } else { "FAIL" };
                table.push_str(&format!("{mark} {}  =>  {}\n", o.input, o.actual));
                if !o.matched {
                    table.push_str(&format!("     expected {}\n", o.expected));
                }
            }
            table.push_str(&format!("{matched}/{} rewrites match\n", outcomes.len()));
            Ok((report, table))
        }
    }
}

pub fn cmd_lexicon_validate(args: &LexiconArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let lex = args.load()?;
    for (k, v) in lex.summary() {
        writeln!(out, "{k}\t{v}").map_err(io_err)?;
    }
    writeln!(out, "lexicons ok").map_err(io_err)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Calibrate(args) => {
            let config = RunConfig::from_args(&args.run)?;
            writeln!(err, "config {}", config.echo()).map_err(io_err)?;
            let summary = match &args.output {
                Some(path) => {
                    let mut f = io::BufWriter::new(
                        fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
                    );
                    cmd_calibrate(&args.inputs, &config, &mut f)?
                }
                None => cmd_calibrate(&args.inputs, &config, out)?,
            };
            writeln!(err, "{summary}").map_err(io_err)
        }
        Command::Evaluate(args) => {
            let config = RunConfig::from_args(&args.run)?;
            let (report, table) =
                cmd_evaluate(&args.corpus, args.parses.as_deref(), args.suite, args.per_sentence, &config)?;
            match &args.report {
                Some(path) => {
                    fs::write(path, pretty(&report)).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                    out.write_all(table.as_bytes()).map_err(io_err)
                }
                None => {
                    out.write_all(pretty(&report).as_bytes()).map_err(io_err)?;
                    err.write_all(table.as_bytes()).map_err(io_err)
                }
            }
        }
        Command::Lexicon {
            command: LexiconCommand::Validate(args),
        } => cmd_lexicon_validate(&args, out),
    }
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "pronounflow: {e}");
            e.exit_code()
        }
    }
}
