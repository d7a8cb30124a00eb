use clap::{Parser, Subcommand};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use tabgen::analysis::{
    bucket_metrics, cost_report, default_edges, emit_bucket_series, emit_cost_report,
    BucketProperty, InstanceProperties, ReportFormat,
};
use tabgen::benchmark::{load_benchmark, save_benchmark, Benchmark};
use tabgen::config::{file_hash, ClientKind, ConfigError, RunConfig};
use tabgen::curation::{
    filter_candidate, load_candidates, load_descriptions, package_instance, popularity,
    CurationConfig, FixturePageviews, LivePageviews, MonthRange, PageviewsClient,
};
use tabgen::gateway::{
    CachedClient, DiskCache, HttpClient, LlmClient, OracleClient, ScriptedClient, UsageLedger,
};
use tabgen::metrics::{aggregate, evaluate_instance, EvalOptions};
use tabgen::pipeline::{read_run, Method, Pipeline, RunSpec, Scenario};
use tabgen::prompts::TemplateSet;
use tabgen::report::{read_report_json, write_report_csv, write_report_json, EvaluationReport};
use tabgen::table::table_stats;

/// Errors split by exit code: usage/config problems exit 2, runtime failures
/// exit 1.
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(1),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Parser)]
#[command(name = "tabgen", version, about = "Generate tables from LLM parametric knowledge and evaluate them against gold tables")]
struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for all randomness (oracle corruption).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a generation method over the eval split of a benchmark.
    Generate {
        #[arg(long)]
        benchmark: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// full-table, row-by-row, or cell-by-cell.
        #[arg(long)]
        method: Option<String>,
        /// baseline, example-row, or oracle-keys.
        #[arg(long)]
        scenario: Option<String>,
        /// oracle, scripted, or http.
        #[arg(long)]
        client: Option<String>,
        /// Oracle corruption rate for non-key values.
        #[arg(long)]
        corruption: Option<f64>,
        /// Transcript JSON for the scripted client.
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[arg(long)]
        parallelism: Option<usize>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        /// Disable the response cache.
        #[arg(long)]
        no_cache: bool,
        /// Directory of template assets overriding the built-in ones.
        #[arg(long)]
        template_dir: Option<PathBuf>,
    },
    /// Score a run's generated tables against the gold benchmark.
    Evaluate {
        /// Run directory produced by `generate`.
        #[arg(long)]
        run: PathBuf,
        /// Gold benchmark; defaults to the path recorded in the run manifest.
        #[arg(long)]
        benchmark: Option<PathBuf>,
        /// Report path prefix; writes <prefix>.json and <prefix>.csv.
        #[arg(long)]
        report: PathBuf,
        /// Relative numeric tolerance override.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Count aligned key cells toward tau without re-matching them.
        #[arg(long)]
        tau_aligned_keys: bool,
    },
    /// Bucket per-table F1 by a table property and report prompting cost.
    Analyze {
        #[arg(long)]
        run: PathBuf,
        /// Evaluation report JSON from `evaluate`.
        #[arg(long)]
        report: PathBuf,
        /// num_cells, numeric_ratio, or popularity.
        #[arg(long)]
        property: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        benchmark: Option<PathBuf>,
    },
    /// Aggregate token costs across runs of the same benchmark.
    CostReport {
        /// Run directories (repeatable).
        #[arg(long, required = true)]
        run: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a benchmark file from candidate tables.
    Curate {
        #[arg(long)]
        candidates: PathBuf,
        /// CSV of (id, description).
        #[arg(long)]
        descriptions: PathBuf,
        /// Pageviews fixture JSON, or a live endpoint with --pageviews-url.
        #[arg(long)]
        pageviews: Option<PathBuf>,
        #[arg(long)]
        pageviews_url: Option<String>,
        /// Wiki project for the live endpoint.
        #[arg(long, default_value = "en.wikipedia")]
        project: String,
        /// Popularity window, YYYY-MM:YYYY-MM.
        #[arg(long)]
        window: String,
        #[arg(long)]
        out: PathBuf,
        /// Curation log path; defaults to <out dir>/curation_log.json.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        fill_threshold: Option<f64>,
        #[arg(long)]
        max_median_tokens: Option<f64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e: ConfigError| usage(e))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match cli.command {
        Command::Generate {
            benchmark,
            out,
            method,
            scenario,
            client,
            corruption,
            transcript,
            parallelism,
            cache_dir,
            no_cache,
            template_dir,
        } => {
            if let Some(p) = benchmark {
                config.benchmark = Some(p.display().to_string());
            }
            if let Some(p) = out {
                config.out_dir = Some(p.display().to_string());
            }
            if let Some(m) = method {
                config.method = Some(m);
            }
            if let Some(s) = scenario {
                config.scenario = Some(s);
            }
            if let Some(c) = client {
                config.client.kind = c.parse().map_err(usage)?;
            }
            if let Some(c) = corruption {
                config.client.corruption = c;
            }
            if let Some(t) = transcript {
                config.client.transcript = Some(t.display().to_string());
            }
            if let Some(p) = parallelism {
                config.parallelism = p;
            }
            if let Some(d) = cache_dir {
                config.cache_dir = Some(d.display().to_string());
            }
            if no_cache {
                config.cache = false;
            }
            if let Some(d) = template_dir {
                config.template_dir = Some(d.display().to_string());
            }
            cmd_generate(&config)
        }
        Command::Evaluate { run, benchmark, report, tolerance, tau_aligned_keys } => {
            if let Some(t) = tolerance {
                config.match_rule.numeric_rel_tolerance = t;
            }
            if tau_aligned_keys {
                config.evaluation.tau_fuzzy_keys = false;
            }
            cmd_evaluate(&config, &run, benchmark.as_deref(), &report)
        }
        Command::Analyze { run, report, property, out, benchmark } => {
            cmd_analyze(&run, &report, &property, &out, benchmark.as_deref())
        }
        Command::CostReport { run, out } => cmd_cost_report(&run, &out),
        Command::Curate {
            candidates,
            descriptions,
            pageviews,
            pageviews_url,
            project,
            window,
            out,
            log,
            fill_threshold,
            max_median_tokens,
        } => {
            let mut curation = CurationConfig::default();
            if let Some(f) = fill_threshold {
                curation.fill_threshold = f;
            }
            if let Some(m) = max_median_tokens {
                curation.max_median_tokens = m;
            }
            cmd_curate(CurateArgs {
                candidates,
                descriptions,
                pageviews,
                pageviews_url,
                project,
                window,
                out,
                log,
                curation,
            })
        }
    }
}

fn cmd_generate(config: &RunConfig) -> Result<(), CliError> {
    let benchmark_path = config
        .benchmark
        .clone()
        .ok_or_else(|| usage("no benchmark given (flag --benchmark or config `benchmark`)"))?;
    let out_dir = config
        .out_dir
        .clone()
        .ok_or_else(|| usage("no output directory given (flag --out or config `out_dir`)"))?;
    let method = Method::from_str(
        config.method.as_deref().ok_or_else(|| usage("no method given (flag --method)"))?,
    )
    .map_err(usage)?;
    let scenario = Scenario::from_str(config.scenario.as_deref().unwrap_or("baseline"))
        .map_err(usage)?;
    if scenario == Scenario::OracleKeys && method == Method::FullTable {
        return Err(usage("--scenario oracle-keys substitutes the keys prompt; it cannot run with --method full-table"));
    }

    let benchmark = load_benchmark(&benchmark_path).map_err(usage)?;
    let benchmark_hash = file_hash(&benchmark_path).map_err(runtime)?;

    let templates = match &config.template_dir {
        Some(dir) => TemplateSet::load_dir(dir, config.model_family.as_deref()).map_err(usage)?,
        None => TemplateSet::default(),
    };

    let inner: Box<dyn LlmClient> = match config.client.kind {
        ClientKind::Oracle => Box::new(OracleClient::for_benchmark(
            &benchmark,
            config.client.corruption,
            config.seed,
        )),
        ClientKind::Scripted => {
            let path = config
                .client
                .transcript
                .as_ref()
                .ok_or_else(|| usage("scripted client needs --transcript"))?;
            Box::new(ScriptedClient::from_json_file(path).map_err(usage)?)
        }
        ClientKind::Http => {
            if config.model.endpoint_url.is_empty() {
                return Err(usage("http client needs model.endpoint_url in the config"));
            }
            Box::new(HttpClient::new(config.model.clone()).map_err(usage)?)
        }
    };

    let out_path = PathBuf::from(&out_dir);
    std::fs::create_dir_all(&out_path).map_err(runtime)?;
    let client: Box<dyn LlmClient> = if config.cache {
        let cache_dir = config
            .cache_dir
            .clone()
            .unwrap_or_else(|| out_path.join("cache").display().to_string());
        let cache = DiskCache::new(cache_dir).map_err(runtime)?;
        let ledger = UsageLedger::open(out_path.join("usage_ledger.jsonl")).map_err(runtime)?;
        Box::new(CachedClient::new(inner, cache, Some(ledger)))
    } else {
        inner
    };

    let pipeline = Pipeline::new(templates, config.parallelism, config.evaluation.dedup_keys);
    let spec = RunSpec {
        method,
        scenario,
        benchmark_path,
        benchmark_hash,
        config_hash: config.config_hash(),
    };
    let manifest = pipeline
        .run_benchmark(&benchmark, client.as_ref(), &spec, &out_path)
        .map_err(runtime)?;
    println!(
        "generated {} instance(s) with {} ({}), {} prompt(s), {} input / {} output tokens",
        manifest.instances.len(),
        manifest.method,
        manifest.scenario,
        manifest.total_prompts,
        manifest.total_input_tokens,
        manifest.total_output_tokens,
    );
    if !manifest.failed_instances.is_empty() {
        println!("failed instances: {}", manifest.failed_instances.join(", "));
    }
    Ok(())
}

fn cmd_evaluate(
    config: &RunConfig,
    run_dir: &Path,
    benchmark_override: Option<&Path>,
    report_prefix: &Path,
) -> Result<(), CliError> {
    let (manifest, records) = read_run(run_dir).map_err(runtime)?;
    if records.is_empty() {
        return Err(runtime(format!("run {} holds no records to evaluate", run_dir.display())));
    }
    let benchmark_path: PathBuf = match benchmark_override {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(&manifest.benchmark_path),
    };
    let benchmark = load_benchmark(&benchmark_path).map_err(runtime)?;

    let options = EvalOptions {
        rule: config.match_rule.clone(),
        tau_fuzzy_keys: config.evaluation.tau_fuzzy_keys,
    };
    let mut per_table = BTreeMap::new();
    for record in &records {
        let instance = benchmark.get(&record.instance_id).ok_or_else(|| {
            runtime(format!(
                "missing gold instance {:?} in benchmark {}",
                record.instance_id,
                benchmark_path.display()
            ))
        })?;
        let exclude = match record.scenario {
            Scenario::ExampleRow => {
                Some(instance.table.gold_key_tuple(0).map_err(runtime)?)
            }
            _ => None,
        };
        let evaluation = evaluate_instance(
            &record.parsed_table,
            instance,
            &options,
            exclude.as_deref(),
        )
        .map_err(runtime)?;
        per_table.insert(record.instance_id.clone(), evaluation);
    }
    let evaluation = aggregate(per_table).map_err(runtime)?;
    println!(
        "macro keys R/P/F1: {:.3}/{:.3}/{:.3}  non-keys: {:.3}/{:.3}/{:.3}  overall: {:.3}/{:.3}/{:.3}",
        evaluation.macro_keys.recall,
        evaluation.macro_keys.precision,
        evaluation.macro_keys.f1,
        evaluation.macro_non_keys.recall,
        evaluation.macro_non_keys.precision,
        evaluation.macro_non_keys.f1,
        evaluation.macro_overall.recall,
        evaluation.macro_overall.precision,
        evaluation.macro_overall.f1,
    );
    let report = EvaluationReport { evaluation };
    if let Some(parent) = report_prefix.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(runtime)?;
        }
    }
    write_report_json(&report, &report_prefix.with_extension("json")).map_err(runtime)?;
    write_report_csv(&report, &report_prefix.with_extension("csv")).map_err(runtime)?;
    Ok(())
}

fn instance_properties(benchmark: &Benchmark) -> BTreeMap<String, InstanceProperties> {
    benchmark
        .instances
        .iter()
        .map(|inst| {
            let stats = table_stats(&inst.table, &inst.description);
            (
                inst.id.clone(),
                InstanceProperties {
                    num_cells: stats.num_cells as f64,
                    numeric_ratio: stats.numeric_ratio,
                    popularity: inst.popularity,
                },
            )
        })
        .collect()
}

fn cmd_analyze(
    run_dir: &Path,
    report_path: &Path,
    property: &str,
    out_dir: &Path,
    benchmark_override: Option<&Path>,
) -> Result<(), CliError> {
    let property: BucketProperty = property.parse().map_err(usage)?;
    let (manifest, records) = read_run(run_dir).map_err(runtime)?;
    let report = read_report_json(report_path).map_err(runtime)?;
    let benchmark_path: PathBuf = match benchmark_override {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(&manifest.benchmark_path),
    };
    let benchmark = load_benchmark(&benchmark_path).map_err(runtime)?;
    let properties = instance_properties(&benchmark);

    std::fs::create_dir_all(out_dir).map_err(runtime)?;
    let edges = default_edges(property);
    let series = bucket_metrics(&report.evaluation.per_table, &properties, property, &edges)
        .map_err(runtime)?;
    emit_bucket_series(&series, &out_dir.join(format!("{property}.csv")), ReportFormat::Csv)
        .map_err(runtime)?;
    emit_bucket_series(&series, &out_dir.join(format!("{property}.json")), ReportFormat::Json)
        .map_err(runtime)?;

    let costs = cost_report(&[(&manifest, records.as_slice())]).map_err(runtime)?;
    emit_cost_report(&costs, &out_dir.join("cost.csv"), ReportFormat::Csv).map_err(runtime)?;
    emit_cost_report(&costs, &out_dir.join("cost.json"), ReportFormat::Json).map_err(runtime)?;
    println!(
        "wrote {}/{{{property}.csv,{property}.json,cost.csv,cost.json}}",
        out_dir.display()
    );
    Ok(())
}

fn cmd_cost_report(run_dirs: &[PathBuf], out_dir: &Path) -> Result<(), CliError> {
    let mut runs = Vec::new();
    for dir in run_dirs {
        runs.push(read_run(dir).map_err(runtime)?);
    }
    let borrowed: Vec<_> = runs.iter().map(|(m, r)| (m, r.as_slice())).collect();
    let report = cost_report(&borrowed).map_err(runtime)?;
    std::fs::create_dir_all(out_dir).map_err(runtime)?;
    emit_cost_report(&report, &out_dir.join("cost.csv"), ReportFormat::Csv).map_err(runtime)?;
    emit_cost_report(&report, &out_dir.join("cost.json"), ReportFormat::Json).map_err(runtime)?;
    for m in &report.per_method {
        println!(
            "{}: {} request(s), {} input / {} output tokens{}",
            m.method,
            m.request_count,
            m.input_tokens,
            m.output_tokens,
            if m.provider_reported { "" } else { " (locally approximated)" },
        );
    }
    Ok(())
}

struct CurateArgs {
    candidates: PathBuf,
    descriptions: PathBuf,
    pageviews: Option<PathBuf>,
    pageviews_url: Option<String>,
    project: String,
    window: String,
    out: PathBuf,
    log: Option<PathBuf>,
    curation: CurationConfig,
}

#[derive(serde::Serialize)]
struct CurationLog {
    window: String,
    fill_threshold: f64,
    max_median_tokens: f64,
    accepted: Vec<AcceptedEntry>,
    rejected: Vec<RejectedEntry>,
}

#[derive(serde::Serialize)]
struct AcceptedEntry {
    id: String,
    popularity: f64,
    pruned_columns: Vec<String>,
}

#[derive(serde::Serialize)]
struct RejectedEntry {
    id: String,
    code: tabgen::curation::RejectionCode,
    detail: String,
}

fn cmd_curate(args: CurateArgs) -> Result<(), CliError> {
    let window = MonthRange::parse(&args.window).map_err(usage)?;
    let candidates = load_candidates(&args.candidates).map_err(usage)?;
    let descriptions = load_descriptions(&args.descriptions).map_err(usage)?;
    let client: Box<dyn PageviewsClient> = match (&args.pageviews, &args.pageviews_url) {
        (Some(path), None) => Box::new(FixturePageviews::from_file(path).map_err(usage)?),
        (None, Some(url)) => Box::new(LivePageviews::new(url, &args.project).map_err(usage)?),
        _ => return Err(usage("exactly one of --pageviews or --pageviews-url is required")),
    };

    let mut accepted_instances = Vec::new();
    let mut log = CurationLog {
        window: window.to_string(),
        fill_threshold: args.curation.fill_threshold,
        max_median_tokens: args.curation.max_median_tokens,
        accepted: Vec::new(),
        rejected: Vec::new(),
    };
    for candidate in &candidates {
        let reject = |code, detail: String| RejectedEntry { id: candidate.id.clone(), code, detail };
        let table = match filter_candidate(candidate, &args.curation) {
            Ok(table) => table,
            Err(reason) => {
                log.rejected.push(reject(reason.code, reason.detail));
                continue;
            }
        };
        let pop = match popularity(&candidate.source_page, client.as_ref(), &window) {
            Ok(p) => p,
            Err(e) => {
                log.rejected.push(reject(tabgen::curation::RejectionCode::Other, e.to_string()));
                continue;
            }
        };
        let description = match descriptions.get(&candidate.id) {
            Some(d) => d,
            None => {
                log.rejected.push(reject(
                    tabgen::curation::RejectionCode::Other,
                    "no description supplied".to_string(),
                ));
                continue;
            }
        };
        let pruned_columns: Vec<String> = candidate
            .table
            .columns()
            .iter()
            .filter(|c| table.column_index(&c.name).is_none())
            .map(|c| c.name.clone())
            .collect();
        match package_instance(
            table,
            description,
            pop,
            &candidate.id,
            candidate.split,
            Some(candidate.source_page.clone()),
        ) {
            Ok(instance) => {
                log.accepted.push(AcceptedEntry {
                    id: candidate.id.clone(),
                    popularity: pop,
                    pruned_columns,
                });
                accepted_instances.push(instance);
            }
            Err(e) => {
                log.rejected.push(reject(tabgen::curation::RejectionCode::Other, e.to_string()));
            }
        }
    }

    let benchmark = Benchmark { instances: accepted_instances };
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(runtime)?;
        }
    }
    save_benchmark(&benchmark, &args.out).map_err(runtime)?;
    // emitted file must survive its own validation
    load_benchmark(&args.out).map_err(runtime)?;

    let log_path = args.log.unwrap_or_else(|| {
        args.out.parent().unwrap_or(Path::new(".")).join("curation_log.json")
    });
    let mut text = serde_json::to_string_pretty(&log).expect("log serializes");
    text.push('\n');
    std::fs::write(&log_path, text).map_err(runtime)?;
    println!(
        "accepted {} candidate(s), rejected {}; benchmark at {}, log at {}",
        log.accepted.len(),
        log.rejected.len(),
        args.out.display(),
        log_path.display()
    );
    Ok(())
}
