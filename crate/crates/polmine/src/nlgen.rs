//! Natural-language generation: structured prompt assembly for external LLM
//! use, a blocking chat-completion client, a deterministic template
//! summarizer, and a token-coverage fidelity checker.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{serialize_policy, Policy};

#[derive(Debug, Error)]
pub enum NlgenError {
    #[error("format examples must include at least one line per file kind")]
    EmptyExamples,
    #[error("miner source text must not be empty")]
    EmptyMinerSource,
    #[error("policy has no rules")]
    EmptyPolicy,
    #[error("summary text must not be empty")]
    EmptySummary,
    #[error("api key environment variable {0:?} is not set")]
    MissingApiKey(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: usize, message: String },
    #[error("endpoint returned HTTP {0}")]
    Http(u16),
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("response is not a structurally valid summary: {0}")]
    StructurallyInvalid(String),
}

// ---------------------------------------------------------------------------
// Prompt documents
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PromptKind {
    CodeGen,
    Summarization,
    Verification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptDocument {
    pub kind: PromptKind,
    /// Ordered (heading, body) sections.
    pub blocks: Vec<(String, String)>,
}

impl PromptDocument {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (heading, body) in &self.blocks {
            let _ = writeln!(out, "## {heading}\n\n{body}\n");
        }
        out
    }
}

pub const CODEGEN_HEADINGS: [&str; 7] = [
    "Block 1: Role & Context",
    "Block 2: Task Structure",
    "Block 3: Parsing Requirements",
    "Block 4: Format Examples",
    "Block 5: Orchestration Workflow",
    "Block 6: Algorithm Code",
    "Block 7: Output Instructions",
];

pub const SUMMARY_HEADINGS: [&str; 6] = [
    "Component 1: Role & Audience",
    "Component 2: Input Rules",
    "Component 3: Writing Guidelines",
    "Component 4: Report Structure",
    "Component 5: Semantic Mapping Guidelines",
    "Component 6: Example Output",
];

/// Example lines for the three input files, passed through verbatim into the
/// code-generation prompt.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FormatExamples {
    pub users: Vec<String>,
    pub resources: Vec<String>,
    pub logs: Vec<String>,
}

pub fn build_codegen_prompt(
    examples: &FormatExamples,
    miner_source_text: &str,
) -> Result<PromptDocument, NlgenError> {
    if examples.users.is_empty() || examples.resources.is_empty() || examples.logs.is_empty() {
        return Err(NlgenError::EmptyExamples);
    }
    if miner_source_text.trim().is_empty() {
        return Err(NlgenError::EmptyMinerSource);
    }
    let examples_body = format!(
        "User attribute file examples:\n{}\n\nResource attribute file examples:\n{}\n\nAccess log file examples:\n{}",
        examples.users.join("\n"),
        examples.resources.join("\n"),
        examples.logs.join("\n"),
    );
    let bodies = [
        "You are an expert Python developer working on a cybersecurity project. \
         You will write data ingestion code that integrates with an existing \
         ABACPolicyMiner class; its full source is provided below."
            .to_string(),
        "Create two separate functions: parse_data_file(path, file_kind), which reads \
         and interprets one data file, and main(), which runs the whole process from \
         start to finish."
            .to_string(),
        "Look at the examples and figure out the pattern yourself: field separators, \
         wrapper characters, and attribute structure. Handle problems gracefully: skip \
         lines starting with #, ignore blank lines, and print warning messages for \
         lines that do not match the expected pattern instead of crashing."
            .to_string(),
        examples_body,
        "main() must read the three data files and report missing-file errors, call \
         parse_data_file to convert raw text into structured data, create an \
         ABACPolicyMiner instance, run the mining process, and display the resulting \
         rules in a readable format."
            .to_string(),
        miner_source_text.to_string(),
        "Provide ONLY the complete, self-contained Python code for the parse_data_file \
         function, including necessary imports. Do not include any example usage or \
         explanations."
            .to_string(),
    ];
    Ok(PromptDocument {
        kind: PromptKind::CodeGen,
        blocks: CODEGEN_HEADINGS.iter().map(|h| h.to_string()).zip(bodies).collect(),
    })
}

pub fn build_summary_prompt(
    policy: &Policy,
    jargon: &JargonMap,
) -> Result<PromptDocument, NlgenError> {
    if policy.rules.is_empty() {
        return Err(NlgenError::EmptyPolicy);
    }
    let mut mapping_body = String::from(
        "Simplify and map technical system jargon to high-level business descriptors. \
         Few-shot examples: technical rules are transformed into organizational \
         policies; safe systems are described as protected assets.\nTerm mappings:\n",
    );
    for (technical, business) in &jargon.entries {
        let _ = writeln!(mapping_body, "- {technical} -> {business}");
    }
    let bodies = [
        "You are a Cybersecurity Analyst tasked with communicating complex security \
         policies to business leaders."
            .to_string(),
        serialize_policy(policy),
        "Write in a professional and authoritative tone. Explain business logic and \
         security principles rather than technical specifications, connecting access \
         controls to job functions and responsibilities."
            .to_string(),
        "Structure the report as: (i) an opening statement summarizing policy purpose \
         and principles, (ii) core access principles under clear headings such as \
         Role-based Access, Data Sensitivity, and Principle of Least Privilege, (iii) \
         cross-functional collaboration explanations showing secure data sharing \
         mechanisms, and (iv) a business impact conclusion emphasizing asset \
         protection and operational support."
            .to_string(),
        mapping_body,
        crate::fixtures::sample_summary_text().to_string(),
    ];
    Ok(PromptDocument {
        kind: PromptKind::Summarization,
        blocks: SUMMARY_HEADINGS.iter().map(|h| h.to_string()).zip(bodies).collect(),
    })
}

pub fn build_verification_prompt(
    policy: &Policy,
    summary_text: &str,
) -> Result<PromptDocument, NlgenError> {
    if policy.rules.is_empty() {
        return Err(NlgenError::EmptyPolicy);
    }
    if summary_text.trim().is_empty() {
        return Err(NlgenError::EmptySummary);
    }
    let blocks = vec![
        (
            "Verifier Role".to_string(),
            "You are explicitly instructed to function as a verifier of natural \
             language policy summaries against formal access control rules."
                .to_string(),
        ),
        ("Formal Rules".to_string(), serialize_policy(policy)),
        ("Summary Under Review".to_string(), summary_text.to_string()),
        (
            "Scoring Instructions".to_string(),
            "The summary above claims to describe the formal rules. Evaluate each of \
             those rules independently: for every rule, score from 0 to 100 how \
             accurately and comprehensively the summary captures its user conditions, \
             resource conditions, operations, and constraints. Report one score per \
             rule plus the mean of individual rule scores."
                .to_string(),
        ),
    ];
    Ok(PromptDocument { kind: PromptKind::Verification, blocks })
}

// ---------------------------------------------------------------------------
// Jargon map
// ---------------------------------------------------------------------------

/// Technical-to-business term mapping used by the summary prompt, the
/// template summarizer, and (in reverse) the fidelity checker. Editable data:
/// loads from TOML via serde.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JargonMap {
    pub entries: Vec<(String, String)>,
}

impl Default for JargonMap {
    fn default() -> Self {
        let pairs = [
            ("rule", "policy statement"),
            ("read", "view"),
            ("write", "modify"),
            ("sensitivity", "data classification"),
            ("designation", "role"),
        ];
        JargonMap {
            entries: pairs.iter().map(|(t, b)| (t.to_string(), b.to_string())).collect(),
        }
    }
}

impl JargonMap {
    pub fn business_term(&self, technical: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(t, _)| t.eq_ignore_ascii_case(technical))
            .map(|(_, b)| b.as_str())
    }
}

// ---------------------------------------------------------------------------
// Summary reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub text: String,
    /// Headings found in the text, in order. The synthetic "Opening" entry
    /// marks the leading paragraph before the first heading.
    pub sections: Vec<String>,
    /// Rule index (0-based) to byte spans of the text passages describing it.
    pub rule_trace: BTreeMap<usize, Vec<(usize, usize)>>,
}

/// Extracts section headings: `#`-prefixed lines, and short lines ending in
/// `:` (underline rulers are skipped). Text before the first heading counts
/// as the opening statement.
pub fn parse_sections(text: &str) -> Vec<String> {
    let mut sections = Vec::new();
    let mut seen_heading = false;
    let mut has_opening = false;
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.chars().all(|c| c == '-' || c == '=') {
            continue;
        }
        if let Some(h) = trimmed.strip_prefix('#') {
            sections.push(h.trim().trim_end_matches(':').to_string());
            seen_heading = true;
        } else if trimmed.ends_with(':') && trimmed.len() <= 60 {
            sections.push(trimmed.trim_end_matches(':').to_string());
            seen_heading = true;
        } else if !seen_heading && !has_opening {
            sections.insert(0, "Opening".to_string());
            has_opening = true;
        }
    }
    sections
}

fn validate_summary_structure(text: &str) -> Result<Vec<String>, NlgenError> {
    if text.trim().is_empty() {
        return Err(NlgenError::InvalidResponse("empty summary body".into()));
    }
    let sections = parse_sections(text);
    if sections.first().map(String::as_str) != Some("Opening") {
        return Err(NlgenError::StructurallyInvalid("missing opening statement".into()));
    }
    if sections.len() < 2 {
        return Err(NlgenError::StructurallyInvalid("no principle heading found".into()));
    }
    if !sections.iter().any(|s| s.to_lowercase().contains("conclusion")) {
        return Err(NlgenError::StructurallyInvalid("missing conclusion section".into()));
    }
    Ok(sections)
}

// ---------------------------------------------------------------------------
// Template summarizer
// ---------------------------------------------------------------------------

fn quoted_list(values: impl IntoIterator<Item = String>) -> String {
    let values: Vec<String> = values.into_iter().map(|v| format!("'{v}'")).collect();
    match values.len() {
        0 => String::new(),
        1 => values[0].clone(),
        _ => format!("{} or {}", values[..values.len() - 1].join(", "), values.last().unwrap()),
    }
}

fn business_op(op: &str, jargon: &JargonMap) -> String {
    match jargon.business_term(op) {
        Some(b) => format!("'{op}' ({b})"),
        None => format!("'{op}'"),
    }
}

/// Deterministic offline summarizer. Every attribute value, operation, and
/// constraint attribute of every rule is quoted verbatim in that rule's
/// paragraph, so the fidelity check scores 1.0 by construction.
pub fn summarize_template(policy: &Policy, jargon: &JargonMap) -> Result<SummaryReport, NlgenError> {
    if policy.rules.is_empty() {
        return Err(NlgenError::EmptyPolicy);
    }
    let mut text = String::from(
        "This document provides a high-level overview of the organization's access \
         control policy as mined from observed activity. Each policy statement below \
         describes one pattern of permitted access.\n\n#Core Access Principles\n",
    );
    let mut rule_trace: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    let any_constraints = policy.rules.iter().any(|r| !r.constraints.is_empty());
    for (i, rule) in policy.rules.iter().enumerate() {
        let mut paragraph = format!("* Policy Statement {}: ", i + 1);
        if rule.user_expr.is_empty() {
            paragraph.push_str("All users");
        } else {
            let conds: Vec<String> = rule
                .user_expr
                .iter()
                .map(|(name, values)| {
                    let label = jargon.business_term(name).unwrap_or(name.as_str());
                    format!("whose {label} ('{name}') is {}", quoted_list(values.iter().cloned()))
                })
                .collect();
            paragraph.push_str(&format!("Users {}", conds.join(" and ")));
        }
        let ops = rule.operations.iter().map(|o| business_op(o, jargon)).collect::<Vec<_>>();
        paragraph.push_str(&format!(" are permitted to {} ", ops.join(" and ")));
        if rule.resource_expr.is_empty() {
            paragraph.push_str("any resource");
        } else {
            let conds: Vec<String> = rule
                .resource_expr
                .iter()
                .map(|(name, values)| {
                    let label = jargon.business_term(name).unwrap_or(name.as_str());
                    format!("whose {label} ('{name}') is {}", quoted_list(values.iter().cloned()))
                })
                .collect();
            paragraph.push_str(&format!("resources {}", conds.join(" and ")));
        }
        for (ua, ra) in &rule.constraints {
            paragraph.push_str(&format!(
                ", provided the user's '{ua}' matches the resource's '{ra}'"
            ));
        }
        paragraph.push('.');
        let start = text.len() + 1;
        text.push('\n');
        text.push_str(&paragraph);
        text.push('\n');
        rule_trace.insert(i, vec![(start, start + paragraph.len())]);
    }
    if any_constraints {
        text.push_str(
            "\nCross-Functional Collaboration:\nSome statements tie a user attribute to a \
             matching resource attribute, which is how data is shared securely across \
             organizational boundaries while staying within each group's remit.\n",
        );
    }
    text.push_str(
        "\nConclusion:\n-----------\nTaken together these statements protect the \
         organization's information assets while supporting day-to-day operations, \
         granting each group only the access its responsibilities require.\n",
    );
    let sections = validate_summary_structure(&text).expect("template output is well-formed");
    Ok(SummaryReport { text, sections, rule_trace })
}

// ---------------------------------------------------------------------------
// Fidelity checking
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityScores {
    pub per_rule: Vec<f64>,
    /// Mean of the individual rule scores.
    pub overall: f64,
}

fn token_findable(token: &str, text_lower: &str, jargon: &JargonMap) -> bool {
    let present = |needle: &str| -> bool {
        let pattern = format!(r"\b{}\b", regex::escape(&needle.to_lowercase()));
        regex::Regex::new(&pattern).map(|re| re.is_match(text_lower)).unwrap_or(false)
    };
    if present(token) {
        return true;
    }
    jargon.business_term(token).map_or(false, present)
}

/// Per-rule token coverage: the fraction of a rule's attribute values,
/// operations, and constraint attribute names findable in the summary text,
/// counting a token as found when either it or its mapped business term
/// appears on a word boundary (case-insensitive).
pub fn check_fidelity(policy: &Policy, report: &SummaryReport, jargon: &JargonMap) -> FidelityScores {
    let text_lower = report.text.to_lowercase();
    let mut per_rule = Vec::with_capacity(policy.rules.len());
    for rule in &policy.rules {
        let mut tokens: Vec<&str> = Vec::new();
        for values in rule.user_expr.values().chain(rule.resource_expr.values()) {
            tokens.extend(values.iter().map(String::as_str));
        }
        tokens.extend(rule.operations.iter().map(String::as_str));
        for (ua, ra) in &rule.constraints {
            tokens.push(ua);
            tokens.push(ra);
        }
        if tokens.is_empty() {
            per_rule.push(1.0);
            continue;
        }
        let found = tokens.iter().filter(|t| token_findable(t, &text_lower, jargon)).count();
        per_rule.push(found as f64 / tokens.len() as f64);
    }
    let overall = if per_rule.is_empty() {
        1.0
    } else {
        per_rule.iter().sum::<f64>() / per_rule.len() as f64
    };
    FidelityScores { per_rule, overall }
}

// ---------------------------------------------------------------------------
// LLM endpoint
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmEndpointConfig {
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the api key. The key itself
    /// is read at call time and never stored, logged, or echoed in errors.
    pub api_key_env_var: String,
    pub timeout_seconds: u64,
    pub max_retries: usize,
}

impl Default for LlmEndpointConfig {
    fn default() -> Self {
        LlmEndpointConfig {
            base_url: "https://api.example.com/v1".to_string(),
            model_name: "summarizer-large".to_string(),
            api_key_env_var: "POLMINE_LLM_API_KEY".to_string(),
            timeout_seconds: 30,
            max_retries: 2,
        }
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: String,
}

/// Sends the summarization prompt to a chat-completion endpoint and validates
/// the response structure. Retries transport failures with linear backoff;
/// total blocking time stays under timeout_seconds * (max_retries + 1) plus
/// the short backoff sleeps.
pub fn summarize_llm(
    policy: &Policy,
    endpoint: &LlmEndpointConfig,
    jargon: &JargonMap,
) -> Result<SummaryReport, NlgenError> {
    let prompt = build_summary_prompt(policy, jargon)?;
    let api_key = std::env::var(&endpoint.api_key_env_var)
        .map_err(|_| NlgenError::MissingApiKey(endpoint.api_key_env_var.clone()))?;
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(endpoint.timeout_seconds))
        .build()
        .map_err(|e| NlgenError::Transport { attempts: 0, message: e.to_string() })?;
    let url = format!("{}/chat/completions", endpoint.base_url.trim_end_matches('/'));
    let rendered = prompt.render();
    let body = ChatRequest {
        model: &endpoint.model_name,
        messages: vec![ChatMessage { role: "user", content: &rendered }],
    };

    let attempts = endpoint.max_retries + 1;
    let mut last_transport = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            std::thread::sleep(Duration::from_millis(100 * attempt as u64));
        }
        log::debug!("summarization request to {url} (model {})", endpoint.model_name);
        let response = client.post(&url).bearer_auth(&api_key).json(&body).send();
        let response = match response {
            Ok(r) => r,
            Err(e) => {
                // reqwest errors can embed the URL but never the bearer token.
                last_transport = e.to_string();
                continue;
            }
        };
        let status = response.status();
        if !status.is_success() {
            return Err(NlgenError::Http(status.as_u16()));
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| NlgenError::InvalidResponse(format!("malformed response body: {e}")))?;
        let content = parsed
            .choices
            .first()
            .map(|c| c.message.content.clone())
            .ok_or_else(|| NlgenError::InvalidResponse("response carried no choices".into()))?;
        let sections = validate_summary_structure(&content)?;
        return Ok(SummaryReport { text: content, sections, rule_trace: BTreeMap::new() });
    }
    Err(NlgenError::Transport { attempts, message: last_transport })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    #[test]
    fn codegen_prompt_structure() {
        let examples = FormatExamples {
            users: vec!["<alice department:Finance designation:Manager>".into()],
            resources: vec!["<report.pdf type:Financial sensitivity:Low>".into()],
            logs: vec!["<alice report.pdf read 2024-10-15 Allow>".into()],
        };
        let doc = build_codegen_prompt(&examples, "class MinerStub: pass").unwrap();
        assert_eq!(doc.kind, PromptKind::CodeGen);
        assert_eq!(doc.blocks.len(), 7);
        for (block, expected) in doc.blocks.iter().zip(CODEGEN_HEADINGS) {
            assert_eq!(block.0, expected);
        }
        assert!(doc.blocks[3].1.contains("<alice department:Finance designation:Manager>"));
        assert!(doc.blocks[5].1.contains("class MinerStub"));
        assert!(doc.blocks[6].1.starts_with("Provide ONLY the complete, self-contained"));
    }

    #[test]
    fn codegen_prompt_rejects_empty_inputs() {
        let examples = FormatExamples {
            users: vec!["u".into()],
            resources: vec![],
            logs: vec!["l".into()],
        };
        assert!(matches!(
            build_codegen_prompt(&examples, "code"),
            Err(NlgenError::EmptyExamples)
        ));
        let full = FormatExamples {
            users: vec!["u".into()],
            resources: vec!["r".into()],
            logs: vec!["l".into()],
        };
        assert!(matches!(build_codegen_prompt(&full, "  \n"), Err(NlgenError::EmptyMinerSource)));
    }

    #[test]
    fn summary_prompt_structure() {
        let policy = fixtures::sample_policy();
        let doc = build_summary_prompt(&policy, &JargonMap::default()).unwrap();
        assert_eq!(doc.blocks.len(), 6);
        for (block, expected) in doc.blocks.iter().zip(SUMMARY_HEADINGS) {
            assert_eq!(block.0, expected);
        }
        assert!(doc.blocks[1].1.contains("WSC (Complexity): 10"));
        assert!(doc.blocks[4].1.contains("technical rules are transformed into organizational policies"));
        assert!(doc.blocks[4].1.contains("read -> view"));
    }

    #[test]
    fn summary_prompt_rejects_empty_policy_and_allows_one_rule() {
        let schema = fixtures::sample_schema();
        let empty = Policy { rules: vec![], schema: schema.clone() };
        assert!(matches!(
            build_summary_prompt(&empty, &JargonMap::default()),
            Err(NlgenError::EmptyPolicy)
        ));
        let one = Policy { rules: vec![fixtures::sample_policy().rules[0].clone()], schema };
        assert!(build_summary_prompt(&one, &JargonMap::default()).is_ok());
    }

    #[test]
    fn prompt_assembly_is_pure() {
        let policy = fixtures::sample_policy();
        let a = build_summary_prompt(&policy, &JargonMap::default()).unwrap();
        let b = build_summary_prompt(&policy, &JargonMap::default()).unwrap();
        assert_eq!(a.render(), b.render());
    }

    #[test]
    fn verification_prompt_carries_both_sides() {
        let policy = fixtures::sample_policy();
        let doc = build_verification_prompt(&policy, fixtures::sample_summary_text()).unwrap();
        assert_eq!(doc.kind, PromptKind::Verification);
        let rendered = doc.render();
        assert!(rendered.contains("WSC (Complexity): 10"));
        assert!(rendered.contains("Broad Read Access for Management"));
        assert!(rendered.contains("Evaluate each of those rules independently"));
    }

    #[test]
    fn sections_parse_from_reference_summary() {
        let sections = parse_sections(fixtures::sample_summary_text());
        assert_eq!(sections[0], "Opening");
        assert!(sections.contains(&"Access Principles".to_string()));
        assert!(sections.contains(&"Conclusion".to_string()));
    }

    #[test]
    fn template_summary_names_reference_values() {
        let policy = fixtures::sample_policy();
        let report = summarize_template(&policy, &JargonMap::default()).unwrap();
        for token in ["Manager", "System_Admin", "IT", "Sales", "read", "HR", "Financial"] {
            assert!(report.text.contains(token), "missing {token}");
        }
        assert!(report.sections.contains(&"Core Access Principles".to_string()));
        assert!(report.sections.iter().any(|s| s.contains("Conclusion")));
    }

    #[test]
    fn template_summary_traces_every_rule() {
        let policy = fixtures::random_policy(17, 29);
        let report = summarize_template(&policy, &JargonMap::default()).unwrap();
        assert_eq!(report.rule_trace.len(), 29);
        for (i, spans) in &report.rule_trace {
            let (start, end) = spans[0];
            let passage = &report.text[start..end];
            assert!(passage.starts_with(&format!("* Policy Statement {}", i + 1)));
        }
        let paragraphs =
            report.text.lines().filter(|l| l.starts_with("* Policy Statement")).count();
        assert_eq!(paragraphs, 29);
    }

    #[test]
    fn template_summary_mentions_constraints() {
        let mut policy = fixtures::sample_policy();
        policy.rules[0]
            .constraints
            .insert(("department".to_string(), "type".to_string()));
        let report = summarize_template(&policy, &JargonMap::default()).unwrap();
        assert!(report.text.contains("user's 'department' matches the resource's 'type'"));
        assert!(report.sections.iter().any(|s| s.contains("Cross-Functional Collaboration")));
    }

    #[test]
    fn template_fidelity_is_complete_across_random_policies() {
        let jargon = JargonMap::default();
        for seed in 0..20 {
            let rules = 1 + (seed as usize * 7) % 29;
            let policy = fixtures::random_policy(seed, rules);
            let report = summarize_template(&policy, &jargon).unwrap();
            let scores = check_fidelity(&policy, &report, &jargon);
            assert_eq!(scores.overall, 1.0, "seed {seed}");
            assert!(scores.per_rule.iter().all(|s| *s == 1.0));
        }
    }

    #[test]
    fn fidelity_on_reference_pair_is_high_but_incomplete() {
        // The reference summary never mentions 'Medium', so Rule 1 loses one
        // of its ten tokens and Rule 2 stays complete.
        let policy = fixtures::sample_policy();
        let report = SummaryReport {
            text: fixtures::sample_summary_text().to_string(),
            sections: parse_sections(fixtures::sample_summary_text()),
            rule_trace: BTreeMap::new(),
        };
        let scores = check_fidelity(&policy, &report, &JargonMap::default());
        assert!((scores.per_rule[0] - 0.9).abs() < 1e-12, "rule 1: {}", scores.per_rule[0]);
        assert_eq!(scores.per_rule[1], 1.0);
        assert!((scores.overall - 0.95).abs() < 1e-12);
    }

    #[test]
    fn fidelity_detects_omitted_values() {
        let policy = fixtures::sample_policy();
        let text = fixtures::sample_summary_text().replace("Sales", "Retail");
        let report = SummaryReport {
            text,
            sections: vec!["Opening".into(), "Conclusion".into()],
            rule_trace: BTreeMap::new(),
        };
        let scores = check_fidelity(&policy, &report, &JargonMap::default());
        assert!(scores.per_rule[0] < 1.0);
        assert!(scores.per_rule[1] < 1.0);
    }

    #[test]
    fn fidelity_uses_jargon_mapping() {
        let policy = Policy {
            rules: vec![crate::model::AbacRule {
                user_expr: BTreeMap::new(),
                resource_expr: BTreeMap::new(),
                operations: ["read".to_string()].into(),
                constraints: Default::default(),
            }],
            schema: fixtures::sample_schema(),
        };
        let report = SummaryReport {
            text: "Staff may view documents. Conclusion: all is well.".to_string(),
            sections: vec![],
            rule_trace: BTreeMap::new(),
        };
        let scores = check_fidelity(&policy, &report, &JargonMap::default());
        // 'read' is absent but its business term 'view' is present.
        assert_eq!(scores.per_rule[0], 1.0);
    }

    fn spawn_mock_server(status_line: &'static str, body: String) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            if let Ok((mut stream, _)) = listener.accept() {
                let mut buf = [0u8; 8192];
                let _ = stream.read(&mut buf);
                let response = format!(
                    "{status_line}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(response.as_bytes());
            }
        });
        format!("http://{addr}")
    }

    fn endpoint(base_url: String, retries: usize) -> LlmEndpointConfig {
        LlmEndpointConfig {
            base_url,
            model_name: "test-model".into(),
            api_key_env_var: "POLMINE_TEST_KEY".into(),
            timeout_seconds: 5,
            max_retries: retries,
        }
    }

    #[test]
    fn llm_mode_accepts_structurally_valid_response() {
        std::env::set_var("POLMINE_TEST_KEY", "test-secret");
        let reply = serde_json::json!({
            "choices": [{"message": {"content": fixtures::sample_summary_text()}}]
        });
        let url = spawn_mock_server("HTTP/1.1 200 OK", reply.to_string());
        let report = summarize_llm(&fixtures::sample_policy(), &endpoint(url, 0), &JargonMap::default())
            .unwrap();
        assert_eq!(report.sections[0], "Opening");
        assert!(report.sections.contains(&"Access Principles".to_string()));
        assert!(report.sections.contains(&"Conclusion".to_string()));
        assert!(!report.text.contains("test-secret"));
    }

    #[test]
    fn llm_mode_rejects_empty_content() {
        std::env::set_var("POLMINE_TEST_KEY", "test-secret");
        let reply = serde_json::json!({"choices": [{"message": {"content": ""}}]});
        let url = spawn_mock_server("HTTP/1.1 200 OK", reply.to_string());
        let err = summarize_llm(&fixtures::sample_policy(), &endpoint(url, 0), &JargonMap::default())
            .unwrap_err();
        assert!(matches!(err, NlgenError::InvalidResponse(_)), "{err}");
    }

    #[test]
    fn llm_mode_surfaces_http_errors() {
        std::env::set_var("POLMINE_TEST_KEY", "test-secret");
        let url = spawn_mock_server("HTTP/1.1 500 Internal Server Error", "{}".to_string());
        let err = summarize_llm(&fixtures::sample_policy(), &endpoint(url, 0), &JargonMap::default())
            .unwrap_err();
        assert!(matches!(err, NlgenError::Http(500)));
    }

    #[test]
    fn llm_mode_reports_transport_failure_after_retries() {
        std::env::set_var("POLMINE_TEST_KEY", "test-secret");
        // Bind then drop a listener to get a port nothing is listening on.
        let port = {
            let l = TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap().port()
        };
        let err = summarize_llm(
            &fixtures::sample_policy(),
            &endpoint(format!("http://127.0.0.1:{port}"), 1),
            &JargonMap::default(),
        )
        .unwrap_err();
        match err {
            NlgenError::Transport { attempts, message } => {
                assert_eq!(attempts, 2);
                assert!(!message.contains("test-secret"));
            }
            other => panic!("expected transport error, got {other}"),
        }
    }

    #[test]
    fn llm_mode_requires_api_key() {
        std::env::remove_var("POLMINE_ABSENT_KEY");
        let mut config = endpoint("http://127.0.0.1:1".into(), 0);
        config.api_key_env_var = "POLMINE_ABSENT_KEY".into();
        let err = summarize_llm(&fixtures::sample_policy(), &config, &JargonMap::default())
            .unwrap_err();
        assert!(matches!(err, NlgenError::MissingApiKey(_)));
    }

    #[test]
    fn jargon_map_round_trips_through_toml() {
        let map = JargonMap::default();
        let text = toml::to_string(&map).unwrap();
        let back: JargonMap = toml::from_str(&text).unwrap();
        assert_eq!(back, map);
    }
}
