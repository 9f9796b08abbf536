//! Experiment runner: coverage and timing curves over generated datasets,
//! the compression ablation with published reference columns, and report
//! emission for external plotting.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compress::{compress_log, CompressError};
use crate::datagen::{
    generate_abac_logs, generate_abac_org, generate_dac_logs, generate_dac_org, AbacVariant,
    DacConfig, GenConfig, GenError,
};
use crate::miner::{mine_policy, MinerConfig, MinerError};
use crate::model::Dataset;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Miner(#[from] MinerError),
    #[error(transparent)]
    Compress(#[from] CompressError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataModel {
    Abac,
    Dac,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentPlan {
    /// Schema variants to sweep; ignored for DAC runs.
    pub variants: Vec<AbacVariant>,
    pub log_sizes: Vec<usize>,
    pub repetitions: usize,
    /// Explicit seeds; when empty, seeds 0..repetitions are used.
    pub seeds: Vec<u64>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            variants: vec![AbacVariant::U2O2, AbacVariant::U3O2, AbacVariant::U4O5],
            log_sizes: vec![100, 200, 400, 600, 800, 1000, 1500, 2000],
            repetitions: 5,
            seeds: Vec::new(),
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.repetitions < 1 {
            return Err(EvalError::InvalidPlan("repetitions must be at least 1".into()));
        }
        if self.log_sizes.is_empty() {
            return Err(EvalError::InvalidPlan("log_sizes must not be empty".into()));
        }
        if self.log_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EvalError::InvalidPlan(
                "log_sizes must be strictly ascending".into(),
            ));
        }
        Ok(())
    }

    pub fn effective_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            (0..self.repetitions as u64).collect()
        } else {
            self.seeds.clone()
        }
    }
}

/// One curve sample: metric means over the plan's seeds, with the coverage
/// envelope kept for error bars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub variant: String,
    pub log_size: usize,
    pub coverage_percent: f64,
    pub coverage_min: f64,
    pub coverage_max: f64,
    pub rule_count: f64,
    pub total_wsc: f64,
    pub mining_seconds: f64,
    /// Summed over repetitions; stays 0 at zero deny tolerance.
    pub over_permissions: usize,
    /// Per-seed failures; the run continues past them.
    pub errors: Vec<String>,
}

fn run_point(
    label: &str,
    model: DataModel,
    variant: AbacVariant,
    log_size: usize,
    seeds: &[u64],
    miner_config: &MinerConfig,
) -> CurvePoint {
    let mut point = CurvePoint {
        variant: label.to_string(),
        log_size,
        coverage_percent: 0.0,
        coverage_min: f64::INFINITY,
        coverage_max: f64::NEG_INFINITY,
        rule_count: 0.0,
        total_wsc: 0.0,
        mining_seconds: 0.0,
        over_permissions: 0,
        errors: Vec::new(),
    };
    let mut ok = 0usize;
    for &seed in seeds {
        let result = (|| -> Result<_, EvalError> {
            let (data, schema) = match model {
                DataModel::Abac => {
                    let config = GenConfig { variant, log_size, rng_seed: seed, ..Default::default() };
                    let org = generate_abac_org(&config)?;
                    let logs = generate_abac_logs(&org, &config)?;
                    (Dataset { users: org.users, resources: org.resources, logs }, org.schema)
                }
                DataModel::Dac => {
                    let config = DacConfig { log_size, rng_seed: seed, ..Default::default() };
                    let org = generate_dac_org(&config);
                    let logs = generate_dac_logs(&org, &config);
                    (Dataset { users: org.users, resources: org.resources, logs }, org.schema)
                }
            };
            Ok(mine_policy(&data, &schema, miner_config)?)
        })();
        match result {
            Ok((_, report)) => {
                ok += 1;
                point.coverage_percent += report.coverage_percent;
                point.coverage_min = point.coverage_min.min(report.coverage_percent);
                point.coverage_max = point.coverage_max.max(report.coverage_percent);
                point.rule_count += report.rule_count as f64;
                point.total_wsc += report.total_wsc as f64;
                point.mining_seconds += report.mining_seconds;
                point.over_permissions += report.over_permissions;
            }
            Err(e) => point.errors.push(format!("seed {seed}: {e}")),
        }
    }
    if ok > 0 {
        let n = ok as f64;
        point.coverage_percent /= n;
        point.rule_count /= n;
        point.total_wsc /= n;
        point.mining_seconds /= n;
    } else {
        point.coverage_min = 0.0;
        point.coverage_max = 0.0;
    }
    point
}

/// Generates, mines, and measures one dataset per (variant, size, seed).
/// Only mine_policy is timed. Per-seed failures are recorded on the point and
/// the sweep continues.
pub fn run_curve(plan: &ExperimentPlan, model: DataModel) -> Result<Vec<CurvePoint>, EvalError> {
    plan.validate()?;
    let seeds = plan.effective_seeds();
    let miner_config = MinerConfig::default();
    let mut points = Vec::new();
    match model {
        DataModel::Abac => {
            for &variant in &plan.variants {
                for &size in &plan.log_sizes {
                    points.push(run_point(
                        variant.label(),
                        model,
                        variant,
                        size,
                        &seeds,
                        &miner_config,
                    ));
                }
            }
        }
        DataModel::Dac => {
            for &size in &plan.log_sizes {
                points.push(run_point(
                    "DAC",
                    model,
                    AbacVariant::U4O5,
                    size,
                    &seeds,
                    &miner_config,
                ));
            }
        }
    }
    Ok(points)
}

/// Published reference measurement for one method at one log size. `None`
/// marks a timeout with no output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCell {
    pub rules: Option<u32>,
    pub seconds: Option<f64>,
}

/// Reference columns for the two LLM-only pipelines, used for report
/// juxtaposition only; this crate reproduces the hybrid column.
pub const ABLATION_REFERENCE: [(usize, ReferenceCell, ReferenceCell); 8] = [
    (400, ReferenceCell { rules: Some(13), seconds: Some(195.0) }, ReferenceCell { rules: Some(29), seconds: Some(228.0) }),
    (500, ReferenceCell { rules: Some(10), seconds: Some(86.0) }, ReferenceCell { rules: Some(16), seconds: Some(105.0) }),
    (600, ReferenceCell { rules: Some(12), seconds: Some(170.0) }, ReferenceCell { rules: Some(18), seconds: Some(190.0) }),
    (800, ReferenceCell { rules: Some(50), seconds: Some(440.0) }, ReferenceCell { rules: Some(20), seconds: Some(350.0) }),
    (1000, ReferenceCell { rules: Some(18), seconds: Some(243.0) }, ReferenceCell { rules: Some(15), seconds: Some(280.0) }),
    (2000, ReferenceCell { rules: Some(21), seconds: Some(421.0) }, ReferenceCell { rules: Some(18), seconds: Some(450.0) }),
    (5000, ReferenceCell { rules: None, seconds: Some(631.0) }, ReferenceCell { rules: Some(11), seconds: Some(531.0) }),
    (10000, ReferenceCell { rules: None, seconds: None }, ReferenceCell { rules: None, seconds: None }),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub log_size: usize,
    pub hybrid_rules: usize,
    pub hybrid_seconds: f64,
    pub hybrid_coverage: f64,
    /// Coverage mining the compressed-then-expanded log; equals
    /// hybrid_coverage when compression is lossless at the pattern level.
    pub compressed_coverage: f64,
    pub compression_ratio: f64,
    pub reference_pure_llm: ReferenceCell,
    pub reference_compressed_llm: ReferenceCell,
}

/// Reproduces the hybrid pipeline measurements across the published sizes and
/// pairs them with the static reference columns.
pub fn run_ablation(sizes: &[usize], seed: u64) -> Result<Vec<AblationRow>, EvalError> {
    let miner_config = MinerConfig::default();
    let mut rows = Vec::new();
    for &size in sizes {
        let config = GenConfig { log_size: size, rng_seed: seed, ..Default::default() };
        let org = generate_abac_org(&config)?;
        let logs = generate_abac_logs(&org, &config)?;
        let data = Dataset {
            users: org.users.clone(),
            resources: org.resources.clone(),
            logs: logs.clone(),
        };
        let (policy, report) = mine_policy(&data, &org.schema, &miner_config)?;
        let compressed = compress_log(&logs, &org.users, &org.resources)?;
        let expanded = compressed.expand();
        let (_, compressed_report) = mine_policy(&expanded, &org.schema, &miner_config)?;
        let (pure, comp) = ABLATION_REFERENCE
            .iter()
            .find(|(s, _, _)| *s == size)
            .map(|(_, p, c)| (*p, *c))
            .unwrap_or((
                ReferenceCell { rules: None, seconds: None },
                ReferenceCell { rules: None, seconds: None },
            ));
        rows.push(AblationRow {
            log_size: size,
            hybrid_rules: policy.rules.len(),
            hybrid_seconds: report.mining_seconds,
            hybrid_coverage: report.coverage_percent,
            compressed_coverage: compressed_report.coverage_percent,
            compression_ratio: compressed.compression_ratio(),
            reference_pure_llm: pure,
            reference_compressed_llm: comp,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

pub const CSV_HEADER: &str =
    "variant,log_size,coverage_percent,rule_count,total_wsc,mining_seconds,over_permissions";

pub fn render_report(points: &[CurvePoint], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for p in points {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    p.variant,
                    p.log_size,
                    p.coverage_percent,
                    p.rule_count,
                    p.total_wsc,
                    p.mining_seconds,
                    p.over_permissions
                );
            }
            out
        }
        ReportFormat::Json => {
            serde_json::to_string_pretty(points).expect("curve points serialize") + "\n"
        }
        ReportFormat::Markdown => {
            let mut out = String::from(
                "| variant | log_size | coverage_percent | rule_count | total_wsc | mining_seconds | over_permissions |\n\
                 |---|---|---|---|---|---|---|\n",
            );
            for p in points {
                let _ = writeln!(
                    out,
                    "| {} | {} | {:.2} | {:.1} | {:.1} | {:.3} | {} |",
                    p.variant,
                    p.log_size,
                    p.coverage_percent,
                    p.rule_count,
                    p.total_wsc,
                    p.mining_seconds,
                    p.over_permissions
                );
            }
            out
        }
    }
}

pub fn emit_report(
    points: &[CurvePoint],
    format: ReportFormat,
    path: &Path,
) -> Result<(), EvalError> {
    std::fs::write(path, render_report(points, format))
        .map_err(|source| EvalError::Io { path: path.to_path_buf(), source })
}
