//! Command-line front end. Every subcommand writes its reports into the
//! output directory and prints the primary report (or, with `--summary`, a
//! human-readable table) to standard output.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use memforecast::distribution::{default_tail_min, histogram, spike_mass, tail_fit};
use memforecast::eval::{compare_suites, correlation_matrix, predict};
use memforecast::fixture::{self, FixtureRow};
use memforecast::forecast::{equi_compute_frontier, predictor_grid, recommend};
use memforecast::report;
use memforecast::scorer::memorized_set;
use memforecast::sets::SetSummary;
use memforecast::store::{self, RecordReader};
use memforecast::synth::{self, GroundTruth, SynthConfig};
use memforecast::{
    validate_suite, CheckpointRef, Flops, MemorizedSet, PredictorGrid, ScoreParams, Suite,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ANALYSIS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable supplying the default output directory.
pub const OUT_DIR_ENV: &str = "MEMFORECAST_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "memforecast",
    version,
    about = "Measure and forecast memorization across model suites"
)]
struct Cli {
    /// Directory that receives every report file.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = ".")]
    out_dir: PathBuf,
    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Continuation length N a sequence must reproduce to count as memorized.
    #[arg(long, global = true)]
    threshold: Option<u8>,
    /// Print a human-readable table instead of the machine report.
    #[arg(long, global = true)]
    summary: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compare generated and true tokens into a match-record file.
    Score(ScoreArgs),
    /// Reduce match records to memorized-set files.
    Sets(SetsArgs),
    /// Phi correlation matrix between memorized sets.
    Correlate(CorrelateArgs),
    /// Precision and recall of one predictor against a target.
    Predict(PredictArgs),
    /// Precision/recall/compute grid of every predictor against a target.
    Grid(GridArgs),
    /// Best-recall predictor for each compute budget.
    Frontier(FrontierArgs),
    /// Recommend a predictor for one budget.
    Recommend(RecommendArgs),
    /// Score histogram and tail fit of one record file.
    Distribution(DistributionArgs),
    /// Memorized fractions of matching models in two suites.
    CompareSuites(CompareArgs),
    /// Generate a synthetic suite with planted ground truth.
    Synth(SynthArgs),
    /// Compare analytics on a synthetic suite with its planted truth.
    Check(CheckArgs),
    /// Check a suite manifest and its record files.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Token file.
    tokens: PathBuf,
    #[arg(long)]
    model: String,
    #[arg(long)]
    checkpoint: String,
    /// Output file name inside the output directory.
    #[arg(long)]
    output: Option<String>,
}

#[derive(Debug, Args)]
struct SetsArgs {
    /// Match-record files.
    records: Vec<PathBuf>,
    /// Write sets for every checkpoint of a suite instead.
    #[arg(long, conflicts_with = "records")]
    suite: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CorrelateArgs {
    /// Suite manifest with record files.
    #[arg(long)]
    suite: PathBuf,
    /// Checkpoints to correlate (default: every model's final checkpoint).
    #[arg(long = "ref", value_delimiter = ',')]
    refs: Vec<CheckpointRef>,
}

#[derive(Debug, Args)]
struct SourceArgs {
    /// Suite manifest with record files.
    #[arg(long, conflicts_with = "fixture")]
    suite: Option<PathBuf>,
    /// Published-table fixture: a built-in name (pythia, pythia-deduped,
    /// pythia-n64) or a fixture CSV path. Default when no suite is given: pythia.
    #[arg(long)]
    fixture: Option<String>,
    /// Target checkpoint (default: the largest model's final checkpoint).
    #[arg(long)]
    target: Option<CheckpointRef>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Predictor checkpoint, e.g. 1.4B@final.
    #[arg(long)]
    predictor: CheckpointRef,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[command(flatten)]
    source: SourceArgs,
}

#[derive(Debug, Args)]
struct FrontierArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Budgets in FLOPs (default: the cost of every grid row).
    #[arg(long, value_delimiter = ',')]
    budgets: Vec<Flops>,
}

#[derive(Debug, Args)]
struct RecommendArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Budget in FLOPs, e.g. 1.2e21.
    #[arg(long)]
    budget: Flops,
    /// Smallest acceptable recall; without it the best affordable predictor is chosen.
    #[arg(long)]
    min_recall: Option<f64>,
}

#[derive(Debug, Args)]
struct DistributionArgs {
    /// Match-record file.
    #[arg(long, conflicts_with_all = ["suite", "ckpt"])]
    records: Option<PathBuf>,
    /// Suite manifest; analyse the record file of --ref.
    #[arg(long, requires = "ckpt")]
    suite: Option<PathBuf>,
    /// Checkpoint of the suite to analyse.
    #[arg(long = "ref")]
    ckpt: Option<CheckpointRef>,
    /// First histogram bin of the fitted tail (default: N / 2).
    #[arg(long)]
    tail_min: Option<u8>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    suite_a: PathBuf,
    #[arg(long)]
    suite_b: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Generator configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Synthetic suite manifest.
    #[arg(long)]
    suite: PathBuf,
    /// Ground-truth sidecar (default: next to the manifest).
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Suite manifest to check.
    #[arg(long)]
    suite: PathBuf,
}

/// Analysis failure carrying its own report, so it is printed but still
/// yields the analysis exit code.
#[derive(Debug)]
struct Failed(String);

impl std::fmt::Display for Failed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Failed {}

struct Ctx {
    out_dir: PathBuf,
    threshold: Option<u8>,
    summary: bool,
}

impl Ctx {
    /// Writes `name` (a bare file name) into the output directory.
    fn write(&self, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
        let path = self.path(name)?;
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn path(&self, name: &str) -> anyhow::Result<PathBuf> {
        let p = Path::new(name);
        if p.components().count() != 1 || p.file_name().is_none() {
            bail!("output name {name:?} must be a plain file name");
        }
        fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating {}", self.out_dir.display()))?;
        Ok(self.out_dir.join(p))
    }

    fn params(&self, base: ScoreParams) -> anyhow::Result<ScoreParams> {
        Ok(match self.threshold {
            Some(n) => base.with_cont_len(n)?,
            None => base,
        })
    }

    fn emit(&self, machine: &str, human: impl FnOnce() -> String) {
        if self.summary {
            print!("{}", human());
        } else {
            print!("{machine}");
        }
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let ctx = Ctx {
        out_dir: cli.out_dir,
        threshold: cli.threshold,
        summary: cli.summary,
    };
    let result = match cli.threads {
        Some(0) => Err(anyhow!("--threads must be positive")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(anyhow::Error::from)
            .and_then(|pool| pool.install(|| dispatch(&ctx, cli.command))),
        None => dispatch(&ctx, cli.command),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            if e.downcast_ref::<Failed>().is_some() {
                eprintln!("{e}");
            } else {
                eprintln!("error: {e:#}");
            }
            EXIT_ANALYSIS
        }
    }
}

fn dispatch(ctx: &Ctx, cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Score(a) => score(ctx, a),
        Command::Sets(a) => sets(ctx, a),
        Command::Correlate(a) => correlate(ctx, a),
        Command::Predict(a) => predict_cmd(ctx, a),
        Command::Grid(a) => grid(ctx, a),
        Command::Frontier(a) => frontier(ctx, a),
        Command::Recommend(a) => recommend_cmd(ctx, a),
        Command::Distribution(a) => distribution(ctx, a),
        Command::CompareSuites(a) => compare(ctx, a),
        Command::Synth(a) => synth_cmd(ctx, a),
        Command::Check(a) => check(ctx, a),
        Command::Validate(a) => validate(ctx, a),
    }
}

fn file_stem(r: &CheckpointRef) -> String {
    let clean = |s: &str| {
        s.chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || ".-_".contains(c) {
                    c
                } else {
                    '_'
                }
            })
            .collect::<String>()
    };
    format!("{}__{}", clean(&r.model), clean(&r.checkpoint))
}

fn score(ctx: &Ctx, a: ScoreArgs) -> anyhow::Result<()> {
    let r = CheckpointRef::new(&a.model, &a.checkpoint);
    let name = a
        .output
        .unwrap_or_else(|| format!("{}.mrec", file_stem(&r)));
    let out = ctx.path(&name)?;
    let header = store::score_token_file(&a.tokens, &out, &a.model, &a.checkpoint)?;
    #[derive(Serialize)]
    struct Scored<'a> {
        records: u64,
        prompt_len: u8,
        cont_len: u8,
        output: &'a Path,
    }
    let report = report::to_json(&Scored {
        records: header.count,
        prompt_len: header.prompt_len,
        cont_len: header.cont_len,
        output: &out,
    })?;
    ctx.emit(&report, || {
        format!("scored {} records into {}\n", header.count, out.display())
    });
    Ok(())
}

/// Memorized set of a standalone record file, owned by the checkpoint its
/// header names.
fn set_from_records(path: &Path, threshold: Option<u8>) -> anyhow::Result<MemorizedSet> {
    let reader = RecordReader::open(path).with_context(|| path.display().to_string())?;
    let h = reader.header().clone();
    let params = ScoreParams::new(
        h.prompt_len,
        threshold.unwrap_or(ScoreParams::default().cont_len),
    )?;
    let set = memorized_set(reader, &params, None).with_context(|| path.display().to_string())?;
    Ok(set.with_owner(CheckpointRef::new(h.model, h.checkpoint)))
}

fn sets(ctx: &Ctx, a: SetsArgs) -> anyhow::Result<()> {
    let mut made = Vec::new();
    if let Some(path) = a.suite {
        let suite = Suite::load(&path)?;
        let params = ctx.params(suite.threshold_default)?;
        for (m, c) in suite.entries() {
            let r = CheckpointRef::new(&m.name, &c.label);
            made.push(store::load_memorized_set(&suite, &r, &params)?);
        }
    } else {
        if a.records.is_empty() {
            bail!("give record files or --suite");
        }
        for p in &a.records {
            made.push(set_from_records(p, ctx.threshold)?);
        }
    }
    let mut summaries = Vec::new();
    for set in &made {
        let owner = set
            .owner()
            .cloned()
            .unwrap_or_else(|| CheckpointRef::new("set", "0"));
        let name = format!("{}.n{}.mset", file_stem(&owner), set.threshold());
        store::write_memorized_set(ctx.path(&name)?, set)?;
        summaries.push((name, SetSummary::from(set)));
    }
    #[derive(Serialize)]
    struct Row {
        file: String,
        #[serde(flatten)]
        summary: SetSummary,
    }
    let rows: Vec<Row> = summaries
        .into_iter()
        .map(|(file, summary)| Row { file, summary })
        .collect();
    let json = report::to_json(&rows)?;
    ctx.write("sets.json", &json)?;
    ctx.emit(&json, || {
        rows.iter()
            .map(|r| {
                format!(
                    "{}: {} of {} memorized (N = {})\n",
                    r.summary.owner,
                    r.summary.memorized,
                    r.summary.universe_bound,
                    r.summary.threshold
                )
            })
            .collect()
    });
    Ok(())
}

fn correlate(ctx: &Ctx, a: CorrelateArgs) -> anyhow::Result<()> {
    let suite = Suite::load(&a.suite)?;
    let params = ctx.params(suite.threshold_default)?;
    let refs: Vec<CheckpointRef> = if a.refs.is_empty() {
        suite
            .models
            .iter()
            .map(|m| CheckpointRef::new(&m.name, "final"))
            .collect()
    } else {
        a.refs
    };
    let sets = refs
        .iter()
        .map(|r| store::load_memorized_set(&suite, r, &params))
        .collect::<memforecast::Result<Vec<_>>>()?;
    let m = correlation_matrix::<f64>(&sets)?;
    let csv = report::matrix_csv(&m)?;
    ctx.write("correlation.csv", &csv)?;
    ctx.write("correlation.json", &report::to_json(&m)?)?;
    ctx.emit(&csv, || report::matrix_summary(&m));
    Ok(())
}

enum Source {
    Suite(Suite),
    Fixture(Vec<FixtureRow>),
}

impl Source {
    fn load(a: &SourceArgs) -> anyhow::Result<Self> {
        Ok(match (&a.suite, &a.fixture) {
            (Some(p), _) => Source::Suite(Suite::load(p)?),
            (None, Some(f)) => Source::Fixture(fixture::load_fixture(f)?),
            (None, None) => Source::Fixture(fixture::load_fixture("pythia")?),
        })
    }

    fn default_target(&self) -> anyhow::Result<CheckpointRef> {
        match self {
            Source::Suite(s) => s
                .models
                .iter()
                .max_by_key(|m| m.params)
                .map(|m| CheckpointRef::new(&m.name, "final"))
                .ok_or_else(|| anyhow!("suite has no models")),
            Source::Fixture(rows) => fixture::fixture_targets(rows)
                .into_iter()
                .next()
                .ok_or_else(|| anyhow!("fixture has no rows")),
        }
    }

    fn target(&self, a: &SourceArgs) -> anyhow::Result<CheckpointRef> {
        match &a.target {
            Some(t) => Ok(t.clone()),
            None => self.default_target(),
        }
    }

    fn grid(&self, ctx: &Ctx, target: &CheckpointRef) -> anyhow::Result<PredictorGrid> {
        Ok(match self {
            Source::Suite(s) => predictor_grid(s, target, &ctx.params(s.threshold_default)?)?,
            Source::Fixture(rows) => fixture::fixture_grid(
                rows,
                target,
                ctx.threshold.unwrap_or(ScoreParams::default().cont_len),
            )?,
        })
    }
}

fn predict_cmd(ctx: &Ctx, a: PredictArgs) -> anyhow::Result<()> {
    let source = Source::load(&a.source)?;
    let target = source.target(&a.source)?;
    let (json, human) = match &source {
        Source::Suite(s) => {
            let params = ctx.params(s.threshold_default)?;
            let p = store::load_memorized_set(s, &a.predictor, &params)?;
            let t = store::load_memorized_set(s, &target, &params)?;
            let r = predict::<f64>(&p, &t)?;
            let human = prediction_line(&r.predictor, &r.target, r.precision, r.recall);
            (report::to_json(&r)?, human)
        }
        Source::Fixture(rows) => {
            let threshold = ctx.threshold.unwrap_or(ScoreParams::default().cont_len);
            let row = fixture::fixture_prediction::<f64>(rows, &a.predictor, &target, threshold)?;
            let target = fixture::resolve_ref(rows, &target)?;
            #[derive(Serialize)]
            struct FixturePrediction<'a> {
                predictor: String,
                target: String,
                threshold: u8,
                precision: Option<f64>,
                recall: Option<f64>,
                cost: &'a Flops,
            }
            let r = FixturePrediction {
                predictor: row.reference().to_string(),
                target: target.to_string(),
                threshold,
                precision: row.precision,
                recall: row.recall,
                cost: &row.cost,
            };
            let human = prediction_line(&r.predictor, &r.target, r.precision, r.recall);
            (report::to_json(&r)?, human)
        }
    };
    ctx.write("prediction.json", &json)?;
    ctx.emit(&json, || human);
    Ok(())
}

fn prediction_line(p: &str, t: &str, precision: Option<f64>, recall: Option<f64>) -> String {
    let f = |x: Option<f64>| x.map_or("---".to_string(), |v| format!("{v:.3}"));
    format!(
        "{p} predicting {t}: precision {}, recall {}\n",
        f(precision),
        f(recall)
    )
}

fn grid(ctx: &Ctx, a: GridArgs) -> anyhow::Result<()> {
    let source = Source::load(&a.source)?;
    let target = source.target(&a.source)?;
    let g = source.grid(ctx, &target)?;
    let csv = report::grid_csv(&g)?;
    ctx.write("grid.csv", &csv)?;
    ctx.write("grid.json", &report::to_json(&g)?)?;
    ctx.emit(&csv, || report::grid_summary(&g));
    for (r, why) in &g.skipped {
        eprintln!("warning: {r} omitted: {why}");
    }
    Ok(())
}

fn frontier(ctx: &Ctx, a: FrontierArgs) -> anyhow::Result<()> {
    let source = Source::load(&a.source)?;
    let target = source.target(&a.source)?;
    let g = source.grid(ctx, &target)?;
    let budgets: Vec<Flops> = if a.budgets.is_empty() {
        g.rows.iter().map(|r| r.cost).collect()
    } else {
        a.budgets
    };
    let f = equi_compute_frontier(&g.rows, &budgets)?;
    let csv = report::frontier_csv(&f)?;
    ctx.write("frontier.csv", &csv)?;
    ctx.write("frontier.json", &report::to_json(&f)?)?;
    ctx.emit(&csv, || report::frontier_summary(&f));
    Ok(())
}

fn recommend_cmd(ctx: &Ctx, a: RecommendArgs) -> anyhow::Result<()> {
    if let Some(m) = a.min_recall {
        if !(0.0..=1.0).contains(&m) {
            bail!("--min-recall {m} outside [0, 1]");
        }
    }
    let source = Source::load(&a.source)?;
    let target = source.target(&a.source)?;
    let g = source.grid(ctx, &target)?;
    let rec = recommend(a.budget, &g.rows, a.min_recall);
    let json = report::to_json(&rec)?;
    ctx.write("recommendation.json", &json)?;
    ctx.emit(&json, || match &rec {
        memforecast::forecast::Recommendation::Feasible { row, recall, .. } => format!(
            "feasible: {} (recall {recall:.3}, cost {} FLOPs)\n",
            row.reference(),
            report::format_float(row.cost.to_scalar())
        ),
        memforecast::forecast::Recommendation::Infeasible {
            reason, suggested, ..
        } => match suggested {
            Some(r) => format!(
                "infeasible: {reason}\nsmallest sufficient budget: {} FLOPs ({}, recall {:.3})\n",
                report::format_float(r.cost.to_scalar()),
                r.reference(),
                r.recall.unwrap_or(f64::NAN)
            ),
            None => format!("infeasible: {reason}\n"),
        },
    });
    Ok(())
}

fn distribution(ctx: &Ctx, a: DistributionArgs) -> anyhow::Result<()> {
    let (path, params) = match (&a.records, &a.suite, &a.ckpt) {
        (Some(p), _, _) => {
            let reader = RecordReader::open(p)?;
            let base =
                ScoreParams::new(reader.header().prompt_len, ScoreParams::default().cont_len)?;
            (p.clone(), ctx.params(base)?)
        }
        (None, Some(s), Some(r)) => {
            let suite = Suite::load(s)?;
            let (_, c) = suite.resolve(r)?;
            (suite.record_path(c), ctx.params(suite.threshold_default)?)
        }
        _ => bail!("give --records or --suite with --ref"),
    };
    let reader = RecordReader::open(&path).with_context(|| path.display().to_string())?;
    let h = histogram(reader, &params).with_context(|| path.display().to_string())?;
    let tail_min = a.tail_min.unwrap_or_else(|| default_tail_min(h.threshold));
    let spike = spike_mass::<f64>(&h)?;
    let csv = report::histogram_csv(&h)?;
    ctx.write("histogram.csv", &csv)?;
    #[derive(Serialize)]
    struct Dist<'a> {
        records: &'a Path,
        threshold: u8,
        total: u64,
        spike_mass: f64,
        tail_fit: Option<memforecast::TailFitReport>,
        tail_fit_error: Option<String>,
    }
    let (fit, fit_err) = match tail_fit::<f64>(&h, tail_min) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let d = Dist {
        records: &path,
        threshold: h.threshold,
        total: h.total,
        spike_mass: spike,
        tail_fit: fit,
        tail_fit_error: fit_err,
    };
    let json = report::to_json(&d)?;
    ctx.write("distribution.json", &json)?;
    ctx.emit(&json, || {
        let mut s = report::histogram_summary(&h);
        s.push_str(&format!("spike mass: {spike:.6}\n"));
        match &d.tail_fit {
            Some(f) => s.push_str(&format!(
                "tail {}..{}: preferred {:?}; exponential rate {:.4}, power-law exponent {:.4}\n",
                f.tail_min, f.threshold, f.preferred, f.exp_rate, f.pl_exponent
            )),
            None => s.push_str(&format!(
                "tail fit unavailable: {}\n",
                d.tail_fit_error.as_deref().unwrap_or("")
            )),
        }
        s
    });
    Ok(())
}

fn compare(ctx: &Ctx, a: CompareArgs) -> anyhow::Result<()> {
    let sa = Suite::load(&a.suite_a)?;
    let sb = Suite::load(&a.suite_b)?;
    let params = ctx.params(sa.threshold_default)?;
    let c = compare_suites::<f64>(&sa, &sb, &params)?;
    let csv = report::comparison_csv(&c)?;
    ctx.write("comparison.csv", &csv)?;
    ctx.write("comparison.json", &report::to_json(&c)?)?;
    ctx.emit(&csv, || {
        let mut s: String = c
            .rows
            .iter()
            .map(|r| {
                format!(
                    "{}: {:.6} -> {:.6} ({:+.6})\n",
                    r.label, r.fraction_a, r.fraction_b, r.delta
                )
            })
            .collect();
        for u in &c.unmatched {
            s.push_str(&format!("unmatched: {u}\n"));
        }
        s
    });
    Ok(())
}

fn synth_cmd(ctx: &Ctx, a: SynthArgs) -> anyhow::Result<()> {
    let text =
        fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let mut cfg: SynthConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", a.config.display()))?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    fs::create_dir_all(&ctx.out_dir)?;
    let g = synth::generate(&cfg, &ctx.out_dir)?;
    #[derive(Serialize)]
    struct Made<'a> {
        manifest: &'a Path,
        ground_truth: &'a Path,
        record_files: usize,
    }
    let json = report::to_json(&Made {
        manifest: &g.manifest,
        ground_truth: &g.sidecar,
        record_files: g.truth.sets.len(),
    })?;
    ctx.emit(&json, || {
        format!(
            "wrote {} record files; manifest {}\n",
            g.truth.sets.len(),
            g.manifest.display()
        )
    });
    Ok(())
}

fn check(ctx: &Ctx, a: CheckArgs) -> anyhow::Result<()> {
    let suite = Suite::load(&a.suite)?;
    let truth_path = a
        .truth
        .unwrap_or_else(|| suite.base_dir.join(synth::SIDECAR_FILE));
    let truth = GroundTruth::load(&truth_path)?;
    let r = synth::ground_truth_check(&suite, &truth)?;
    let json = report::to_json(&r)?;
    ctx.write("check.json", &json)?;
    ctx.emit(&json, || {
        let failed = r.failures().count();
        format!(
            "{} of {} checks passed\n",
            r.items.len() - failed,
            r.items.len()
        )
    });
    if !r.passed {
        let lines: Vec<String> = r
            .failures()
            .map(|i| {
                format!(
                    "FAIL {} {}: planted {}, observed {} ({})",
                    i.check, i.subject, i.planted, i.observed, i.tolerance
                )
            })
            .collect();
        return Err(Failed(lines.join("\n")).into());
    }
    Ok(())
}

fn validate(ctx: &Ctx, a: ValidateArgs) -> anyhow::Result<()> {
    let suite = Suite::load(&a.suite)?;
    let violations = validate_suite(&suite);
    let json = report::to_json(&violations)?;
    ctx.write("validation.json", &json)?;
    ctx.emit(&json, || {
        if violations.is_empty() {
            "suite is valid\n".to_string()
        } else {
            violations.iter().map(|v| format!("{v}\n")).collect()
        }
    });
    if !violations.is_empty() {
        let lines: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(Failed(lines.join("\n")).into());
    }
    Ok(())
}
