//! Format inference and parsing for user, resource, and log files.
//!
//! Three textual surfaces are supported: angle-bracket wrapped `key:value`
//! pairs, comma-separated positional fields, and pipe-delimited positional
//! fields. The structure of a file is inferred from a handful of example
//! lines; parsing is tolerant of malformed data lines (warn and skip, never
//! abort).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Dataset, Decision, Entity, LogEntry};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("no usable example lines (need at least one non-comment, non-blank line)")]
    NoExamples,
    #[error("ambiguous format, candidates: {}", candidates.join(" vs "))]
    AmbiguousFormat { candidates: Vec<String> },
    #[error("conflicting examples on lines {lines:?}: {message}")]
    ConflictingExamples { lines: Vec<usize>, message: String },
    #[error("format does not fit {kind:?} files: {message}")]
    KindMismatch { kind: FileKind, message: String },
    #[error("{context}: {source}")]
    WithContext {
        context: String,
        #[source]
        source: Box<ParseError>,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FileKind {
    Users,
    Resources,
    Logs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldDelimiter {
    Space,
    Comma,
    Pipe,
}

impl FieldDelimiter {
    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self {
            FieldDelimiter::Space => line.split_whitespace().collect(),
            FieldDelimiter::Comma => line.split(',').map(str::trim).collect(),
            FieldDelimiter::Pipe => line.split('|').map(str::trim).collect(),
        }
    }

    fn contained_in(&self, line: &str) -> bool {
        match self {
            FieldDelimiter::Space => line.trim().contains(char::is_whitespace),
            FieldDelimiter::Comma => line.contains(','),
            FieldDelimiter::Pipe => line.contains('|'),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttributeStyle {
    KeyValueColon,
    Positional,
}

/// Inferred structure of one input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatSpec {
    pub wrapper: Option<(char, char)>,
    pub field_delimiter: FieldDelimiter,
    pub attribute_style: AttributeStyle,
    /// Field names after the id, in order. Required for Positional style.
    pub positional_order: Option<Vec<String>>,
    pub comment_prefix: String,
}

impl FormatSpec {
    pub fn describe(&self) -> String {
        format!(
            "wrapper={} delimiter={:?} style={:?}",
            match self.wrapper {
                Some((o, c)) => format!("{o}...{c}"),
                None => "none".into(),
            },
            self.field_delimiter,
            self.attribute_style
        )
    }
}

/// Line-accounting summary of one parse.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseReport {
    pub parsed_count: usize,
    pub skipped_comments: usize,
    pub skipped_blank: usize,
    pub warnings: Vec<(usize, String)>,
}

impl ParseReport {
    pub fn merge(&mut self, other: ParseReport) {
        self.parsed_count += other.parsed_count;
        self.skipped_comments += other.skipped_comments;
        self.skipped_blank += other.skipped_blank;
        self.warnings.extend(other.warnings);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedRecords {
    Entities(Vec<Entity>),
    Logs(Vec<LogEntry>),
}

const LOG_FIELDS: [&str; 5] = ["user", "resource", "operation", "timestamp", "decision"];

fn data_lines(lines: &[String], comment_prefix: &str) -> Vec<(usize, String)> {
    lines
        .iter()
        .enumerate()
        .filter_map(|(i, raw)| {
            let line = raw.trim_end_matches('\r').trim();
            if line.is_empty() || line.starts_with(comment_prefix) {
                None
            } else {
                Some((i + 1, line.to_string()))
            }
        })
        .collect()
}

fn unwrap_line<'a>(line: &'a str, wrapper: Option<(char, char)>) -> Option<&'a str> {
    match wrapper {
        None => Some(line),
        Some((open, close)) => {
            let line = line.trim();
            line.strip_prefix(open)?.strip_suffix(close).map(str::trim)
        }
    }
}

/// Infers the unique [`FormatSpec`] consistent with all example lines.
///
/// Detection order: wrapper characters (`<`...`>`), then delimiter by
/// majority presence (pipe before comma before space), then key:value style
/// iff every non-id token carries a colon. Logs are always positional.
pub fn infer_format(example_lines: &[String], file_kind: FileKind) -> Result<FormatSpec, ParseError> {
    let comment_prefix = "#".to_string();
    let data = data_lines(example_lines, &comment_prefix);
    if data.is_empty() {
        return Err(ParseError::NoExamples);
    }

    // Wrapper: all-or-nothing across examples.
    let wrapped: Vec<bool> =
        data.iter().map(|(_, l)| l.starts_with('<') && l.ends_with('>')).collect();
    let wrapper = if wrapped.iter().all(|w| *w) {
        Some(('<', '>'))
    } else if wrapped.iter().all(|w| !*w) {
        None
    } else {
        let lines = data
            .iter()
            .zip(&wrapped)
            .filter(|(_, w)| !**w)
            .map(|((n, _), _)| *n)
            .collect();
        return Err(ParseError::ConflictingExamples {
            lines,
            message: "some lines are <...> wrapped and some are not".into(),
        });
    };

    let inner: Vec<(usize, String)> = data
        .iter()
        .map(|(n, l)| (*n, unwrap_line(l, wrapper).unwrap_or(l).to_string()))
        .collect();

    // Delimiter: first of pipe, comma, space present in a majority of lines.
    let mut field_delimiter = None;
    for candidate in [FieldDelimiter::Pipe, FieldDelimiter::Comma, FieldDelimiter::Space] {
        let present = inner.iter().filter(|(_, l)| candidate.contained_in(l)).count();
        if 2 * present > inner.len() {
            field_delimiter = Some(candidate);
            break;
        }
    }
    let field_delimiter = field_delimiter.ok_or_else(|| ParseError::AmbiguousFormat {
        candidates: vec![
            "single-field lines under any delimiter".into(),
            "no delimiter evidence to choose pipe, comma, or space".into(),
        ],
    })?;

    // Lines that use a different delimiter than the chosen one conflict.
    let conflicting: Vec<usize> = inner
        .iter()
        .filter(|(_, l)| {
            !field_delimiter.contained_in(l)
                && [FieldDelimiter::Pipe, FieldDelimiter::Comma]
                    .iter()
                    .any(|d| *d != field_delimiter && d.contained_in(l))
        })
        .map(|(n, _)| *n)
        .collect();
    if !conflicting.is_empty() {
        return Err(ParseError::ConflictingExamples {
            lines: conflicting,
            message: format!("lines do not use the {field_delimiter:?} delimiter"),
        });
    }

    if file_kind == FileKind::Logs {
        let widths: Vec<usize> = inner.iter().map(|(_, l)| field_delimiter.split(l).len()).collect();
        if widths.iter().any(|w| *w != 4 && *w != 5) {
            return Err(ParseError::KindMismatch {
                kind: file_kind,
                message: "log lines must have 4 or 5 fields (user resource operation timestamp [decision])"
                    .into(),
            });
        }
        let n = widths.iter().copied().max().unwrap_or(5);
        return Ok(FormatSpec {
            wrapper,
            field_delimiter,
            attribute_style: AttributeStyle::Positional,
            positional_order: Some(LOG_FIELDS[..n].iter().map(|s| s.to_string()).collect()),
            comment_prefix,
        });
    }

    // Style must be consistent across all example lines.
    let styles: Vec<(usize, bool)> = inner
        .iter()
        .map(|(n, l)| {
            let tokens = field_delimiter.split(l);
            (*n, tokens.len() > 1 && tokens[1..].iter().all(|t| t.contains(':')))
        })
        .collect();
    let key_value = styles[0].1;
    let disagreeing: Vec<usize> =
        styles.iter().filter(|(_, kv)| *kv != key_value).map(|(n, _)| *n).collect();
    if !disagreeing.is_empty() {
        return Err(ParseError::ConflictingExamples {
            lines: disagreeing,
            message: "examples mix key:value and positional attribute styles".into(),
        });
    }

    if key_value {
        Ok(FormatSpec {
            wrapper,
            field_delimiter,
            attribute_style: AttributeStyle::KeyValueColon,
            positional_order: None,
            comment_prefix,
        })
    } else {
        let width = inner.iter().map(|(_, l)| field_delimiter.split(l).len()).max().unwrap_or(1);
        let order = (1..width).map(|i| format!("attr{i}")).collect();
        Ok(FormatSpec {
            wrapper,
            field_delimiter,
            attribute_style: AttributeStyle::Positional,
            positional_order: Some(order),
            comment_prefix,
        })
    }
}

fn parse_entity_line(
    inner: &str,
    spec: &FormatSpec,
    names: Option<&[String]>,
) -> Result<Entity, String> {
    let tokens = spec.field_delimiter.split(inner);
    if tokens.is_empty() || tokens[0].is_empty() {
        return Err("empty id field".into());
    }
    let id = tokens[0].to_string();
    let mut attributes = BTreeMap::new();
    match spec.attribute_style {
        AttributeStyle::KeyValueColon => {
            for token in &tokens[1..] {
                let (k, v) = token
                    .split_once(':')
                    .ok_or_else(|| format!("token {token:?} is not key:value"))?;
                if k.is_empty() || v.is_empty() {
                    return Err(format!("token {token:?} has an empty key or value"));
                }
                attributes.insert(k.to_string(), v.to_string());
            }
        }
        AttributeStyle::Positional => {
            let names = names.ok_or("positional style without field names")?;
            if tokens.len() - 1 != names.len() {
                return Err(format!(
                    "expected {} attribute fields, found {}",
                    names.len(),
                    tokens.len() - 1
                ));
            }
            for (name, value) in names.iter().zip(&tokens[1..]) {
                if value.is_empty() {
                    return Err(format!("empty value for {name:?}"));
                }
                attributes.insert(name.clone(), value.to_string());
            }
        }
    }
    Ok(Entity::new(id, attributes))
}

fn parse_log_line(inner: &str, spec: &FormatSpec) -> Result<LogEntry, String> {
    let tokens = spec.field_delimiter.split(inner);
    if tokens.len() != 4 && tokens.len() != 5 {
        return Err(format!("expected 4 or 5 fields, found {}", tokens.len()));
    }
    if tokens.iter().take(4).any(|t| t.is_empty()) {
        return Err("empty field".into());
    }
    // 4-field lines predate decision recording; default Allow.
    let decision = match tokens.get(4) {
        None => Decision::Allow,
        Some(raw) => Decision::parse(raw).ok_or_else(|| format!("bad decision {raw:?}"))?,
    };
    Ok(LogEntry {
        user_id: tokens[0].to_string(),
        resource_id: tokens[1].to_string(),
        operation: tokens[2].to_string(),
        timestamp: tokens[3].to_string(),
        decision,
    })
}

/// Parses a whole file under a spec. Malformed data lines produce warnings
/// and are skipped; a line in a different but inferable format is accepted
/// via per-line fallback inference.
pub fn parse_file(
    content: &str,
    spec: &FormatSpec,
    file_kind: FileKind,
    schema_order: Option<&[String]>,
) -> Result<(ParsedRecords, ParseReport), ParseError> {
    if file_kind == FileKind::Logs && spec.attribute_style == AttributeStyle::KeyValueColon {
        return Err(ParseError::KindMismatch {
            kind: file_kind,
            message: "log files are always positional".into(),
        });
    }
    let names: Option<Vec<String>> = match spec.attribute_style {
        AttributeStyle::Positional => {
            Some(schema_order.map(|s| s.to_vec()).or_else(|| spec.positional_order.clone()).ok_or(
                ParseError::KindMismatch {
                    kind: file_kind,
                    message: "positional spec without field names".into(),
                },
            )?)
        }
        AttributeStyle::KeyValueColon => None,
    };

    let mut report = ParseReport::default();
    let mut entities = Vec::new();
    let mut logs = Vec::new();
    for (i, raw) in content.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r').trim();
        if line.is_empty() {
            report.skipped_blank += 1;
            continue;
        }
        if line.starts_with(&spec.comment_prefix) {
            report.skipped_comments += 1;
            continue;
        }
        let attempt = unwrap_line(line, spec.wrapper)
            .ok_or_else(|| format!("line not wrapped in {:?}", spec.wrapper))
            .and_then(|inner| match file_kind {
                FileKind::Logs => parse_log_line(inner, spec).map(Record::Log),
                _ => parse_entity_line(inner, spec, names.as_deref()).map(Record::Entity),
            });
        let attempt = attempt.or_else(|primary_err| {
            // Mixed-style files: retry the line under its own inferred format.
            infer_format(&[line.to_string()], file_kind)
                .map_err(|_| primary_err.clone())
                .and_then(|line_spec| {
                    let inner = unwrap_line(line, line_spec.wrapper).ok_or(primary_err.clone())?;
                    match file_kind {
                        FileKind::Logs => {
                            parse_log_line(inner, &line_spec).map(Record::Log).map_err(|_| primary_err)
                        }
                        _ => {
                            // Positional fallback without caller-provided field
                            // names would invent attribute names; reject it.
                            if line_spec.attribute_style == AttributeStyle::Positional
                                && schema_order.is_none()
                            {
                                return Err(primary_err);
                            }
                            let fallback_names = schema_order.map(|s| s.to_vec());
                            parse_entity_line(inner, &line_spec, fallback_names.as_deref())
                                .map(Record::Entity)
                                .map_err(|_| primary_err)
                        }
                    }
                })
        });
        match attempt {
            Ok(Record::Entity(e)) => {
                entities.push(e);
                report.parsed_count += 1;
            }
            Ok(Record::Log(l)) => {
                logs.push(l);
                report.parsed_count += 1;
            }
            Err(message) => report.warnings.push((line_no, message)),
        }
    }

    let records = match file_kind {
        FileKind::Logs => ParsedRecords::Logs(logs),
        _ => ParsedRecords::Entities(entities),
    };
    Ok((records, report))
}

enum Record {
    Entity(Entity),
    Log(LogEntry),
}

fn with_context(context: impl Into<String>, source: ParseError) -> ParseError {
    ParseError::WithContext { context: context.into(), source: Box::new(source) }
}

fn read_file(path: &Path) -> Result<String, ParseError> {
    if !path.exists() {
        return Err(ParseError::MissingFile(path.to_path_buf()));
    }
    std::fs::read_to_string(path)
        .map_err(|source| ParseError::Io { path: path.to_path_buf(), source })
}

fn load_entities(
    path: &Path,
    kind: FileKind,
    examples_per_file: usize,
    schema_order: Option<&[String]>,
    report: &mut ParseReport,
) -> Result<BTreeMap<String, Entity>, ParseError> {
    let content = read_file(path)?;
    let examples = example_lines(&content, examples_per_file);
    let spec = infer_format(&examples, kind)
        .map_err(|e| with_context(format!("inferring format of {}", path.display()), e))?;
    let (records, file_report) = parse_file(&content, &spec, kind, schema_order)
        .map_err(|e| with_context(format!("parsing {}", path.display()), e))?;
    let mut map = BTreeMap::new();
    if let ParsedRecords::Entities(entities) = records {
        for entity in entities {
            // Last definition wins, log-append semantics.
            if map.insert(entity.id.clone(), entity.clone()).is_some() {
                report.warnings.push((0, format!("duplicate entity id {:?}, last definition wins", entity.id)));
            }
        }
    }
    report.merge(file_report);
    Ok(map)
}

fn example_lines(content: &str, examples_per_file: usize) -> Vec<String> {
    let lines: Vec<String> = content.lines().map(|l| l.to_string()).collect();
    if examples_per_file == 0 {
        return lines;
    }
    let mut taken = Vec::new();
    let mut data_seen = 0usize;
    for line in lines {
        let trimmed = line.trim();
        if !trimmed.is_empty() && !trimmed.starts_with('#') {
            data_seen += 1;
        }
        taken.push(line);
        if data_seen >= examples_per_file {
            break;
        }
    }
    taken
}

/// Loads the three dataset files, inferring each file's format independently.
pub fn load_dataset(
    user_path: &Path,
    resource_path: &Path,
    log_path: &Path,
    examples_per_file: usize,
    user_schema_order: Option<&[String]>,
    resource_schema_order: Option<&[String]>,
) -> Result<(Dataset, ParseReport), ParseError> {
    let mut report = ParseReport::default();
    let users =
        load_entities(user_path, FileKind::Users, examples_per_file, user_schema_order, &mut report)?;
    let resources = load_entities(
        resource_path,
        FileKind::Resources,
        examples_per_file,
        resource_schema_order,
        &mut report,
    )?;
    let content = read_file(log_path)?;
    let examples = example_lines(&content, examples_per_file);
    let spec = infer_format(&examples, FileKind::Logs)
        .map_err(|e| with_context(format!("inferring format of {}", log_path.display()), e))?;
    let (records, log_report) = parse_file(&content, &spec, FileKind::Logs, None)
        .map_err(|e| with_context(format!("parsing {}", log_path.display()), e))?;
    report.merge(log_report);
    let logs = match records {
        ParsedRecords::Logs(logs) => logs,
        ParsedRecords::Entities(_) => unreachable!("log kind yields log records"),
    };
    Ok((Dataset { users, resources, logs }, report))
}
