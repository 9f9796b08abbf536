//! Batch front end for the policy mining pipeline. Every subcommand is
//! scriptable: inputs come from flags, files, and environment variables, and
//! identical offline invocations produce identical outputs.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (parse or mining),
//! 3 external-service error.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use polmine::compress::{compress_log, CompressError};
use polmine::datagen::{
    emit_dataset, generate_abac_logs, generate_abac_org, generate_dac_logs, generate_dac_org,
    AbacVariant, DacConfig, GenConfig, GenError, OutputFormat,
};
use polmine::eval::{emit_report, run_ablation, run_curve, DataModel, EvalError, ExperimentPlan, ReportFormat};
use polmine::miner::{mine_policy, MinerConfig, MinerError};
use polmine::model::{
    parse_policy_rules, serialize_policy, AbacRule, AttributeSchema, Entity, EvaluationReport,
    ModelError, Policy,
};
use polmine::nlgen::{
    build_codegen_prompt, build_summary_prompt, build_verification_prompt, check_fidelity,
    parse_sections, summarize_llm, summarize_template, FormatExamples, JargonMap,
    LlmEndpointConfig, NlgenError, SummaryReport,
};
use polmine::parse::{infer_format, load_dataset, FileKind, ParseError, ParseReport};

#[derive(Parser)]
#[command(name = "polmine", version, about = "Mine, evaluate, and explain access control policies from logs")]
struct Cli {
    /// Cap the worker thread pool (0 keeps the library default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset into a directory
    Generate(GenerateArgs),
    /// Infer formats and validate the three dataset files
    ParseCheck(DataArgs),
    /// Mine a policy from a dataset and print it with its metrics
    Mine(MineArgs),
    /// Collapse a log into unique weighted attribute-level records
    Compress(CompressArgs),
    /// Render a natural-language report for a mined policy
    Summarize(SummarizeArgs),
    /// Score a summary text against the policy it claims to describe
    Verify(VerifyArgs),
    /// Run experiment curves and write a metrics report
    Bench(BenchArgs),
    /// Write the pipeline prompt documents to files
    ExportPrompts(ExportPromptsArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Abac,
    Dac,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    U2o2,
    U3o2,
    U4o5,
}

impl VariantArg {
    fn to_variant(self) -> AbacVariant {
        match self {
            VariantArg::U2o2 => AbacVariant::U2O2,
            VariantArg::U3o2 => AbacVariant::U3O2,
            VariantArg::U4o5 => AbacVariant::U4O5,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Angle,
    Csv,
    Pipe,
}

impl FormatArg {
    fn to_format(self) -> OutputFormat {
        match self {
            FormatArg::Angle => OutputFormat::AngleKeyValue,
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Pipe => OutputFormat::PipeKeyValue,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormatArg {
    Csv,
    Json,
    Markdown,
}

impl ReportFormatArg {
    fn to_format(self) -> ReportFormat {
        match self {
            ReportFormatArg::Csv => ReportFormat::Csv,
            ReportFormatArg::Json => ReportFormat::Json,
            ReportFormatArg::Markdown => ReportFormat::Markdown,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Directory receiving users.txt, resources.txt, and logs.txt
    #[arg(long)]
    out: PathBuf,
    /// Schema variant (ABAC only)
    #[arg(long, value_enum, default_value = "u4o5")]
    variant: VariantArg,
    /// Number of log entries
    #[arg(long, default_value_t = 1000)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "angle")]
    format: FormatArg,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    users: PathBuf,
    #[arg(long)]
    resources: PathBuf,
    #[arg(long)]
    logs: PathBuf,
}

#[derive(Args)]
struct MineArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Write the mined rules in their canonical text form
    #[arg(long)]
    out_policy: Option<PathBuf>,
    /// Write rules and metrics as JSON
    #[arg(long)]
    out_json: Option<PathBuf>,
    /// TOML file overriding miner parameters
    #[arg(long)]
    miner_config: Option<PathBuf>,
}

#[derive(Args)]
struct CompressArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Write compressed records here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// File holding rules in their canonical text form
    #[arg(long)]
    policy: PathBuf,
    /// Use the deterministic template renderer instead of an LLM endpoint
    #[arg(long)]
    offline: bool,
    /// TOML endpoint description; the API key is read from the environment
    /// variable it names and never stored
    #[arg(long)]
    llm_config: Option<PathBuf>,
    /// TOML technical-to-business term mapping
    #[arg(long)]
    jargon: Option<PathBuf>,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    policy: PathBuf,
    #[arg(long)]
    summary: PathBuf,
    #[arg(long)]
    jargon: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML experiment plan; defaults to the standard size grid
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "abac")]
    model: ModelArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    report_format: ReportFormatArg,
    /// Emit the compression ablation table (JSON) instead of coverage curves
    #[arg(long)]
    ablation: bool,
}

#[derive(Args)]
struct ExportPromptsArgs {
    /// Directory receiving the prompt text files
    #[arg(long)]
    out: PathBuf,
    /// Miner source file quoted verbatim in the ingestion prompt
    #[arg(long)]
    miner_source: PathBuf,
    /// Dataset files supplying format examples; bundled samples when absent
    #[arg(long)]
    users: Option<PathBuf>,
    #[arg(long)]
    resources: Option<PathBuf>,
    #[arg(long)]
    logs: Option<PathBuf>,
    /// Policy file for the summary and verification prompts; bundled sample
    /// policy when absent
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Summary under review in the verification prompt; generated by the
    /// template renderer when absent
    #[arg(long)]
    summary: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Data(String),
    External(String),
}

macro_rules! data_error {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}

data_error!(ParseError, ModelError, MinerError, GenError, CompressError, EvalError, std::io::Error);

impl From<NlgenError> for CliError {
    fn from(e: NlgenError) -> Self {
        match e {
            NlgenError::MissingApiKey(_)
            | NlgenError::Transport { .. }
            | NlgenError::Http(_)
            | NlgenError::InvalidResponse(_)
            | NlgenError::StructurallyInvalid(_) => CliError::External(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.threads > 0 {
        // Ignore failure: the global pool can only be sized once per process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    let result = match cli.command {
        Command::Generate(args) => generate(args),
        Command::ParseCheck(args) => parse_check(args),
        Command::Mine(args) => mine(args),
        Command::Compress(args) => compress(args),
        Command::Summarize(args) => summarize(args),
        Command::Verify(args) => verify(args),
        Command::Bench(args) => bench(args),
        Command::ExportPrompts(args) => export_prompts(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::External(m)) => {
            eprintln!("external service error: {m}");
            ExitCode::from(3)
        }
    }
}

fn generate(args: GenerateArgs) -> Result<(), CliError> {
    let format = args.format.to_format();
    let (paths, ground_truth) = match args.model {
        ModelArg::Abac => {
            let config = GenConfig {
                variant: args.variant.to_variant(),
                log_size: args.size,
                rng_seed: args.seed,
                ..Default::default()
            };
            let org = generate_abac_org(&config)?;
            let logs = generate_abac_logs(&org, &config)?;
            let paths = emit_dataset(&args.out, &org.users, &org.resources, &logs, format)?;
            (paths, Some(serialize_policy(&org.ground_truth)))
        }
        ModelArg::Dac => {
            let config = DacConfig { log_size: args.size, rng_seed: args.seed, ..Default::default() };
            let org = generate_dac_org(&config);
            let logs = generate_dac_logs(&org, &config);
            (emit_dataset(&args.out, &org.users, &org.resources, &logs, format)?, None)
        }
    };
    if let Some(text) = ground_truth {
        fs::write(args.out.join("ground_truth.rules"), text)?;
        println!("wrote {}", args.out.join("ground_truth.rules").display());
    }
    for path in [paths.0, paths.1, paths.2] {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn first_lines(path: &Path, limit: usize) -> Result<Vec<String>, CliError> {
    Ok(fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .take(limit)
        .map(str::to_string)
        .collect())
}

fn print_parse_report(report: &ParseReport) {
    println!(
        "parsed {} records ({} comment lines, {} blank lines skipped)",
        report.parsed_count, report.skipped_comments, report.skipped_blank
    );
    for (line, message) in &report.warnings {
        eprintln!("warning: line {line}: {message}");
    }
}

fn parse_check(args: DataArgs) -> Result<(), CliError> {
    for (path, kind) in [
        (&args.users, FileKind::Users),
        (&args.resources, FileKind::Resources),
        (&args.logs, FileKind::Logs),
    ] {
        let spec = infer_format(&first_lines(path, 20)?, kind)?;
        println!("{}: {}", path.display(), spec.describe());
    }
    let (dataset, report) = load_dataset(&args.users, &args.resources, &args.logs, 20, None, None)?;
    print_parse_report(&report);
    println!(
        "{} users, {} resources, {} log entries",
        dataset.users.len(),
        dataset.resources.len(),
        dataset.logs.len()
    );
    Ok(())
}

/// Derives a schema from the attribute values observed on the entities.
fn schema_from_entities(
    users: &BTreeMap<String, Entity>,
    resources: &BTreeMap<String, Entity>,
) -> Result<AttributeSchema, CliError> {
    let observe = |entities: &BTreeMap<String, Entity>| {
        let mut domains: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for entity in entities.values() {
            for (name, value) in &entity.attributes {
                domains.entry(name.clone()).or_default().insert(value.clone());
            }
        }
        domains.into_iter().collect::<Vec<_>>()
    };
    AttributeSchema::new(observe(users), observe(resources)).map_err(CliError::from)
}

fn mine(args: MineArgs) -> Result<(), CliError> {
    let config: MinerConfig = match &args.miner_config {
        Some(path) => toml::from_str(&fs::read_to_string(path)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
        None => MinerConfig::default(),
    };
    let (dataset, report) =
        load_dataset(&args.data.users, &args.data.resources, &args.data.logs, 20, None, None)?;
    for (line, message) in &report.warnings {
        eprintln!("warning: line {line}: {message}");
    }
    let schema = schema_from_entities(&dataset.users, &dataset.resources)?;
    let (policy, metrics) = mine_policy(&dataset, &schema, &config)?;
    let text = serialize_policy(&policy);
    println!("{text}");
    print_metrics(&metrics);
    if let Some(path) = &args.out_policy {
        fs::write(path, &text)?;
    }
    if let Some(path) = &args.out_json {
        let body = serde_json::json!({ "rules": policy.rules, "report": metrics });
        fs::write(path, serde_json::to_string_pretty(&body).expect("report serializes"))?;
    }
    Ok(())
}

fn print_metrics(metrics: &EvaluationReport) {
    println!("Coverage: {:.2}%", metrics.coverage_percent);
    println!("Rules: {}", metrics.rule_count);
    println!("Total WSC: {}", metrics.total_wsc);
    println!("Over-permissions: {}", metrics.over_permissions);
    println!("Mining time: {:.3}s", metrics.mining_seconds);
}

fn compress(args: CompressArgs) -> Result<(), CliError> {
    let (dataset, report) =
        load_dataset(&args.data.users, &args.data.resources, &args.data.logs, 20, None, None)?;
    for (line, message) in &report.warnings {
        eprintln!("warning: line {line}: {message}");
    }
    let compressed = compress_log(&dataset.logs, &dataset.users, &dataset.resources)?;
    let text = compressed.to_text();
    match &args.out {
        Some(path) => fs::write(path, &text)?,
        None => print!("{text}"),
    }
    eprintln!(
        "{} records from {} entries (ratio {:.3})",
        compressed.records.len(),
        compressed.total_multiplicity(),
        compressed.compression_ratio()
    );
    Ok(())
}

/// Rebuilds a schema from the attribute values a rule set mentions. Rules
/// are self-describing enough for report rendering; direct construction
/// avoids rejecting attributes that appear only in constraints.
fn schema_from_rules(rules: &[AbacRule]) -> AttributeSchema {
    let mut user: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut resource: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for rule in rules {
        for (name, values) in &rule.user_expr {
            user.entry(name.clone()).or_default().extend(values.iter().cloned());
        }
        for (name, values) in &rule.resource_expr {
            resource.entry(name.clone()).or_default().extend(values.iter().cloned());
        }
        for (ua, ra) in &rule.constraints {
            user.entry(ua.clone()).or_default();
            resource.entry(ra.clone()).or_default();
        }
    }
    AttributeSchema {
        user_attributes: user.into_iter().collect(),
        resource_attributes: resource.into_iter().collect(),
    }
}

fn load_policy(path: &Path) -> Result<Policy, CliError> {
    let rules = parse_policy_rules(&fs::read_to_string(path)?)?;
    if rules.is_empty() {
        return Err(CliError::Data(format!("{}: no rules found", path.display())));
    }
    let schema = schema_from_rules(&rules);
    Ok(Policy { rules, schema })
}

fn load_jargon(path: Option<&PathBuf>) -> Result<JargonMap, CliError> {
    match path {
        Some(path) => toml::from_str(&fs::read_to_string(path)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display()))),
        None => Ok(JargonMap::default()),
    }
}

fn summarize(args: SummarizeArgs) -> Result<(), CliError> {
    let policy = load_policy(&args.policy)?;
    let jargon = load_jargon(args.jargon.as_ref())?;
    let report = if args.offline {
        summarize_template(&policy, &jargon)?
    } else {
        let path = args.llm_config.as_ref().ok_or_else(|| {
            CliError::Usage("pass --offline or point --llm-config at an endpoint file".into())
        })?;
        let endpoint: LlmEndpointConfig = toml::from_str(&fs::read_to_string(path)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        summarize_llm(&policy, &endpoint, &jargon)?
    };
    match &args.out {
        Some(path) => fs::write(path, &report.text)?,
        None => println!("{}", report.text),
    }
    let fidelity = check_fidelity(&policy, &report, &jargon);
    eprintln!("fidelity: {:.3}", fidelity.overall);
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<(), CliError> {
    let policy = load_policy(&args.policy)?;
    let jargon = load_jargon(args.jargon.as_ref())?;
    let text = fs::read_to_string(&args.summary)?;
    let report =
        SummaryReport { sections: parse_sections(&text), text, rule_trace: BTreeMap::new() };
    let fidelity = check_fidelity(&policy, &report, &jargon);
    for (i, score) in fidelity.per_rule.iter().enumerate() {
        println!("rule {}: {:.3}", i + 1, score);
    }
    println!("overall: {:.3}", fidelity.overall);
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), CliError> {
    let plan: ExperimentPlan = match &args.plan {
        Some(path) => toml::from_str(&fs::read_to_string(path)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
        None => ExperimentPlan::default(),
    };
    plan.validate()?;
    if args.ablation {
        let rows = run_ablation(&plan.log_sizes, plan.effective_seeds().first().copied().unwrap_or(0))?;
        fs::write(&args.out, serde_json::to_string_pretty(&rows).expect("rows serialize"))?;
        println!("wrote {} ablation rows to {}", rows.len(), args.out.display());
        return Ok(());
    }
    let model = match args.model {
        ModelArg::Abac => DataModel::Abac,
        ModelArg::Dac => DataModel::Dac,
    };
    let points = run_curve(&plan, model)?;
    emit_report(&points, args.report_format.to_format(), &args.out)?;
    println!("wrote {} curve points to {}", points.len(), args.out.display());
    Ok(())
}

fn export_prompts(args: ExportPromptsArgs) -> Result<(), CliError> {
    fs::create_dir_all(&args.out)?;
    let examples = FormatExamples {
        users: match &args.users {
            Some(path) => first_lines(path, 5)?,
            None => polmine::fixtures::sample_users_text().lines().map(str::to_string).collect(),
        },
        resources: match &args.resources {
            Some(path) => first_lines(path, 5)?,
            None => {
                polmine::fixtures::sample_resources_text().lines().map(str::to_string).collect()
            }
        },
        logs: match &args.logs {
            Some(path) => first_lines(path, 5)?,
            None => polmine::fixtures::sample_logs_text().lines().map(str::to_string).collect(),
        },
    };
    let miner_source = fs::read_to_string(&args.miner_source)?;
    let policy = match &args.policy {
        Some(path) => load_policy(path)?,
        None => polmine::fixtures::sample_policy(),
    };
    let jargon = JargonMap::default();
    let summary_text = match &args.summary {
        Some(path) => fs::read_to_string(path)?,
        None => summarize_template(&policy, &jargon)?.text,
    };
    let documents = [
        ("codegen_prompt.txt", build_codegen_prompt(&examples, &miner_source)?),
        ("summary_prompt.txt", build_summary_prompt(&policy, &jargon)?),
        ("verification_prompt.txt", build_verification_prompt(&policy, &summary_text)?),
    ];
    for (name, document) in documents {
        let path = args.out.join(name);
        fs::write(&path, document.render())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
