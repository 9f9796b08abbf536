//! Domain types for entities, logs, rules, and policies, plus rule-matching
//! semantics, structural-complexity (WSC) computation, and coverage measurement.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid {kind}: {reason}")]
    Invalid { kind: &'static str, reason: String },
    #[error("rule text parse error at offset {offset}: {message}")]
    RuleParse { offset: usize, message: String },
}

/// Access decision recorded in a log entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Decision {
    Allow,
    Deny,
}

impl Decision {
    pub fn as_str(&self) -> &'static str {
        match self {
            Decision::Allow => "Allow",
            Decision::Deny => "Deny",
        }
    }

    pub fn parse(s: &str) -> Option<Decision> {
        match s {
            "Allow" | "allow" | "ALLOW" | "Permit" | "permit" => Some(Decision::Allow),
            "Deny" | "deny" | "DENY" => Some(Decision::Deny),
            _ => None,
        }
    }
}

/// Declares user and resource attribute names together with their finite
/// value domains. Declaration order is significant (positional formats and
/// tie-breaking both use it).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub user_attributes: Vec<(String, BTreeSet<String>)>,
    pub resource_attributes: Vec<(String, BTreeSet<String>)>,
}

/// Which side of an access an entity or attribute belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    User,
    Resource,
}

impl AttributeSchema {
    pub fn new(
        user_attributes: Vec<(String, BTreeSet<String>)>,
        resource_attributes: Vec<(String, BTreeSet<String>)>,
    ) -> Result<Self, ModelError> {
        for (label, attrs) in [("user", &user_attributes), ("resource", &resource_attributes)] {
            let mut seen = BTreeSet::new();
            for (name, domain) in attrs {
                if !seen.insert(name.clone()) {
                    return Err(ModelError::Invalid {
                        kind: "schema",
                        reason: format!("duplicate {label} attribute {name:?}"),
                    });
                }
                if domain.is_empty() {
                    return Err(ModelError::Invalid {
                        kind: "schema",
                        reason: format!("empty domain for {label} attribute {name:?}"),
                    });
                }
            }
        }
        Ok(AttributeSchema { user_attributes, resource_attributes })
    }

    pub fn side(&self, side: Side) -> &[(String, BTreeSet<String>)] {
        match side {
            Side::User => &self.user_attributes,
            Side::Resource => &self.resource_attributes,
        }
    }

    pub fn domain(&self, side: Side, name: &str) -> Option<&BTreeSet<String>> {
        self.side(side).iter().find(|(n, _)| n == name).map(|(_, d)| d)
    }

    pub fn attribute_names(&self, side: Side) -> Vec<&str> {
        self.side(side).iter().map(|(n, _)| n.as_str()).collect()
    }
}

/// A user or resource: identifier plus attribute-name to value map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub attributes: BTreeMap<String, String>,
}

impl Entity {
    pub fn new(id: impl Into<String>, attributes: BTreeMap<String, String>) -> Self {
        Entity { id: id.into(), attributes }
    }

    /// Checks membership of every attribute and value in the given schema side.
    pub fn validate(&self, schema: &AttributeSchema, side: Side) -> Result<(), ModelError> {
        if self.id.is_empty() {
            return Err(ModelError::Invalid { kind: "entity", reason: "empty id".into() });
        }
        for (name, value) in &self.attributes {
            let domain = schema.domain(side, name).ok_or_else(|| {
                ModelError::SchemaMismatch(format!(
                    "entity {:?} has unknown attribute {name:?}",
                    self.id
                ))
            })?;
            if !domain.contains(value) {
                return Err(ModelError::SchemaMismatch(format!(
                    "entity {:?}: value {value:?} not in domain of {name:?}",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// One audit record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub user_id: String,
    pub resource_id: String,
    pub operation: String,
    /// Opaque, lexically ordered. No temporal semantics.
    pub timestamp: String,
    pub decision: Decision,
}

/// An ABAC rule: attribute expressions for both sides, an operation set, and
/// user-resource attribute equality constraints. Attributes absent from an
/// expression are wildcards.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AbacRule {
    pub user_expr: BTreeMap<String, BTreeSet<String>>,
    pub resource_expr: BTreeMap<String, BTreeSet<String>>,
    pub operations: BTreeSet<String>,
    pub constraints: BTreeSet<(String, String)>,
}

/// Per-component WSC weights. All default to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WscWeights {
    pub user_value: u64,
    pub resource_value: u64,
    pub operation: u64,
    pub constraint: u64,
}

impl Default for WscWeights {
    fn default() -> Self {
        WscWeights { user_value: 1, resource_value: 1, operation: 1, constraint: 1 }
    }
}

impl AbacRule {
    pub fn validate(&self, schema: &AttributeSchema) -> Result<(), ModelError> {
        if self.operations.is_empty() {
            return Err(ModelError::Invalid { kind: "rule", reason: "empty operation set".into() });
        }
        for (side, expr) in
            [(Side::User, &self.user_expr), (Side::Resource, &self.resource_expr)]
        {
            for (name, values) in expr {
                if values.is_empty() {
                    return Err(ModelError::Invalid {
                        kind: "rule",
                        reason: format!("empty value set for attribute {name:?}"),
                    });
                }
                let domain = schema.domain(side, name).ok_or_else(|| {
                    ModelError::SchemaMismatch(format!("rule references unknown attribute {name:?}"))
                })?;
                if !values.is_subset(domain) {
                    return Err(ModelError::SchemaMismatch(format!(
                        "rule values for {name:?} not within schema domain"
                    )));
                }
            }
        }
        for (ua, ra) in &self.constraints {
            if schema.domain(Side::User, ua).is_none() {
                return Err(ModelError::SchemaMismatch(format!(
                    "constraint references unknown user attribute {ua:?}"
                )));
            }
            if schema.domain(Side::Resource, ra).is_none() {
                return Err(ModelError::SchemaMismatch(format!(
                    "constraint references unknown resource attribute {ra:?}"
                )));
            }
        }
        Ok(())
    }

    /// Collapses full-domain value sets to attribute absence (wildcard).
    pub fn canonicalize(&mut self, schema: &AttributeSchema) {
        self.user_expr.retain(|name, values| {
            schema.domain(Side::User, name).map_or(true, |d| values != d)
        });
        self.resource_expr.retain(|name, values| {
            schema.domain(Side::Resource, name).map_or(true, |d| values != d)
        });
    }

    pub fn user_side_wsc(&self) -> u64 {
        self.user_expr.values().map(|v| v.len() as u64).sum()
    }

    pub fn resource_side_wsc(&self) -> u64 {
        self.resource_expr.values().map(|v| v.len() as u64).sum()
    }
}

/// Weighted structural complexity of a rule with default weights (all 1).
pub fn wsc(rule: &AbacRule) -> u64 {
    wsc_weighted(rule, &WscWeights::default())
}

pub fn wsc_weighted(rule: &AbacRule, weights: &WscWeights) -> u64 {
    rule.user_side_wsc() * weights.user_value
        + rule.resource_side_wsc() * weights.resource_value
        + rule.operations.len() as u64 * weights.operation
        + rule.constraints.len() as u64 * weights.constraint
}

/// True iff the rule grants `operation` by `user` on `resource`.
pub fn rule_matches(
    rule: &AbacRule,
    user: &Entity,
    resource: &Entity,
    operation: &str,
) -> Result<bool, ModelError> {
    if !rule.operations.contains(operation) {
        return Ok(false);
    }
    for (expr, entity, label) in
        [(&rule.user_expr, user, "user"), (&rule.resource_expr, resource, "resource")]
    {
        for (name, values) in expr {
            let value = entity.attributes.get(name).ok_or_else(|| {
                ModelError::SchemaMismatch(format!(
                    "{label} entity {:?} missing attribute {name:?} referenced by rule",
                    entity.id
                ))
            })?;
            if !values.contains(value) {
                return Ok(false);
            }
        }
    }
    for (ua, ra) in &rule.constraints {
        let uv = user.attributes.get(ua).ok_or_else(|| {
            ModelError::SchemaMismatch(format!(
                "user entity {:?} missing constraint attribute {ua:?}",
                user.id
            ))
        })?;
        let rv = resource.attributes.get(ra).ok_or_else(|| {
            ModelError::SchemaMismatch(format!(
                "resource entity {:?} missing constraint attribute {ra:?}",
                resource.id
            ))
        })?;
        if uv != rv {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A fully resolved dataset: entity maps keyed by id, plus the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub users: BTreeMap<String, Entity>,
    pub resources: BTreeMap<String, Entity>,
    pub logs: Vec<LogEntry>,
}

/// An ordered rule set bound to a schema. Rule order is fixed by the miner
/// (descending coverage, then ascending WSC, then lexical serialization).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub rules: Vec<AbacRule>,
    pub schema: AttributeSchema,
}

pub fn policy_wsc(policy: &Policy) -> u64 {
    policy.rules.iter().map(wsc).sum()
}

/// Mining and evaluation metrics for a policy against a log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub coverage_percent: f64,
    pub rule_count: usize,
    pub total_wsc: u64,
    pub mining_seconds: f64,
    /// Number of Deny log entries matched by any rule.
    pub over_permissions: usize,
}

/// Per-entry problem found while evaluating coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageDiagnostic {
    pub entry_index: usize,
    pub message: String,
}

/// Measures Allow coverage and Deny over-permissions of a policy over a log.
///
/// Unresolvable ids become diagnostics; with `strict` off the affected entry
/// is excluded from the denominator, with `strict` on it counts as uncovered.
pub fn coverage(
    policy: &Policy,
    logs: &[LogEntry],
    users: &BTreeMap<String, Entity>,
    resources: &BTreeMap<String, Entity>,
    strict: bool,
) -> (EvaluationReport, Vec<CoverageDiagnostic>) {
    #[derive(Clone, Copy)]
    enum Outcome {
        CoveredAllow,
        UncoveredAllow,
        MatchedDeny,
        UnmatchedDeny,
        Bad,
    }

    let outcomes: Vec<(Outcome, Option<String>)> = logs
        .par_iter()
        .map(|entry| {
            let (user, resource) = match (users.get(&entry.user_id), resources.get(&entry.resource_id)) {
                (Some(u), Some(r)) => (u, r),
                (u, r) => {
                    let mut missing = Vec::new();
                    if u.is_none() {
                        missing.push(format!("user {:?}", entry.user_id));
                    }
                    if r.is_none() {
                        missing.push(format!("resource {:?}", entry.resource_id));
                    }
                    return (Outcome::Bad, Some(format!("unresolvable {}", missing.join(", "))));
                }
            };
            let mut matched = false;
            for rule in &policy.rules {
                match rule_matches(rule, user, resource, &entry.operation) {
                    Ok(true) => {
                        matched = true;
                        break;
                    }
                    Ok(false) => {}
                    Err(e) => return (Outcome::Bad, Some(e.to_string())),
                }
            }
            let outcome = match (entry.decision, matched) {
                (Decision::Allow, true) => Outcome::CoveredAllow,
                (Decision::Allow, false) => Outcome::UncoveredAllow,
                (Decision::Deny, true) => Outcome::MatchedDeny,
                (Decision::Deny, false) => Outcome::UnmatchedDeny,
            };
            (outcome, None)
        })
        .collect();

    let mut covered = 0usize;
    let mut allow_total = 0usize;
    let mut over_permissions = 0usize;
    let mut diagnostics = Vec::new();
    for (i, (outcome, message)) in outcomes.into_iter().enumerate() {
        match outcome {
            Outcome::CoveredAllow => {
                covered += 1;
                allow_total += 1;
            }
            Outcome::UncoveredAllow => allow_total += 1,
            Outcome::MatchedDeny => over_permissions += 1,
            Outcome::UnmatchedDeny => {}
            Outcome::Bad => {
                if strict && logs[i].decision == Decision::Allow {
                    allow_total += 1;
                }
                diagnostics.push(CoverageDiagnostic {
                    entry_index: i,
                    message: message.unwrap_or_default(),
                });
            }
        }
    }

    let coverage_percent = if allow_total == 0 {
        100.0
    } else {
        100.0 * covered as f64 / allow_total as f64
    };
    let report = EvaluationReport {
        coverage_percent,
        rule_count: policy.rules.len(),
        total_wsc: policy_wsc(policy),
        mining_seconds: 0.0,
        over_permissions,
    };
    (report, diagnostics)
}

// ---------------------------------------------------------------------------
// Canonical textual rule serialization
// ---------------------------------------------------------------------------

fn write_value_set(out: &mut String, values: &BTreeSet<String>) {
    out.push('{');
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "'{v}'");
    }
    out.push('}');
}

fn write_expr(out: &mut String, expr: &BTreeMap<String, BTreeSet<String>>) {
    out.push('{');
    for (i, (name, values)) in expr.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "'{name}': ");
        write_value_set(out, values);
    }
    out.push('}');
}

/// Serializes one rule in the canonical textual format, with sorted element
/// order throughout:
///
/// ```text
/// Rule 1: <User_Expr: {'department': {'Finance'}}, Resource_Expr: {'type': {'Financial'}}, Operations: {'read'}, Constraints: set()>
///   WSC (Complexity): 3
/// ```
pub fn serialize_rule(rule: &AbacRule, index: usize) -> String {
    let mut out = String::new();
    let _ = write!(out, "Rule {index}: <User_Expr: ");
    write_expr(&mut out, &rule.user_expr);
    out.push_str(", Resource_Expr: ");
    write_expr(&mut out, &rule.resource_expr);
    out.push_str(", Operations: ");
    write_value_set(&mut out, &rule.operations);
    out.push_str(", Constraints: ");
    if rule.constraints.is_empty() {
        out.push_str("set()");
    } else {
        out.push('{');
        for (i, (ua, ra)) in rule.constraints.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "('{ua}', '{ra}')");
        }
        out.push('}');
    }
    out.push('>');
    let _ = write!(out, "\n  WSC (Complexity): {}", wsc(rule));
    out
}

/// Serializes a whole policy: rules numbered from 1, blank line between rules.
pub fn serialize_policy(policy: &Policy) -> String {
    let mut out = String::new();
    for (i, rule) in policy.rules.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        out.push_str(&serialize_rule(rule, i + 1));
    }
    out.push('\n');
    out
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> ModelError {
        ModelError::RuleParse { offset: self.pos, message: message.into() }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        while self.rest().starts_with([' ', '\t']) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, token: &str) -> Result<(), ModelError> {
        if self.rest().starts_with(token) {
            self.pos += token.len();
            Ok(())
        } else {
            Err(self.err(format!("expected {token:?}")))
        }
    }

    fn try_eat(&mut self, token: &str) -> bool {
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn quoted(&mut self) -> Result<String, ModelError> {
        self.eat("'")?;
        let rest = self.rest();
        let end = rest.find('\'').ok_or_else(|| self.err("unterminated quoted string"))?;
        let s = rest[..end].to_string();
        self.pos += end + 1;
        Ok(s)
    }

    fn value_set(&mut self) -> Result<BTreeSet<String>, ModelError> {
        self.eat("{")?;
        let mut values = BTreeSet::new();
        loop {
            self.skip_ws();
            if self.try_eat("}") {
                break;
            }
            values.insert(self.quoted()?);
            self.skip_ws();
            if !self.try_eat(",") {
                self.eat("}")?;
                break;
            }
        }
        Ok(values)
    }

    fn expr(&mut self) -> Result<BTreeMap<String, BTreeSet<String>>, ModelError> {
        self.eat("{")?;
        let mut expr = BTreeMap::new();
        loop {
            self.skip_ws();
            if self.try_eat("}") {
                break;
            }
            let name = self.quoted()?;
            self.skip_ws();
            self.eat(":")?;
            self.skip_ws();
            let values = self.value_set()?;
            expr.insert(name, values);
            self.skip_ws();
            if !self.try_eat(",") {
                self.eat("}")?;
                break;
            }
        }
        Ok(expr)
    }

    fn constraints(&mut self) -> Result<BTreeSet<(String, String)>, ModelError> {
        if self.try_eat("set()") {
            return Ok(BTreeSet::new());
        }
        self.eat("{")?;
        let mut pairs = BTreeSet::new();
        loop {
            self.skip_ws();
            if self.try_eat("}") {
                break;
            }
            self.eat("(")?;
            let ua = self.quoted()?;
            self.skip_ws();
            self.eat(",")?;
            self.skip_ws();
            let ra = self.quoted()?;
            self.skip_ws();
            self.eat(")")?;
            pairs.insert((ua, ra));
            self.skip_ws();
            if !self.try_eat(",") {
                self.eat("}")?;
                break;
            }
        }
        Ok(pairs)
    }
}

/// Parses one rule from its textual serialization. The trailing
/// `WSC (Complexity):` line is optional; when present the stated value is
/// checked against the recomputed one.
pub fn parse_rule(text: &str) -> Result<AbacRule, ModelError> {
    let mut lines = text.lines();
    let head = lines.next().unwrap_or_default();
    let mut cur = Cursor { text: head, pos: 0 };
    cur.eat("Rule ")?;
    let digits = cur.rest().chars().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 {
        return Err(cur.err("expected rule number"));
    }
    cur.pos += digits;
    cur.eat(": <User_Expr: ")?;
    let user_expr = cur.expr()?;
    cur.eat(", Resource_Expr: ")?;
    let resource_expr = cur.expr()?;
    cur.eat(", Operations: ")?;
    let operations = cur.value_set()?;
    cur.eat(", Constraints: ")?;
    let constraints = cur.constraints()?;
    cur.eat(">")?;
    let rule = AbacRule { user_expr, resource_expr, operations, constraints };
    if let Some(line) = lines.next() {
        let line = line.trim();
        if let Some(stated) = line.strip_prefix("WSC (Complexity):") {
            let stated: u64 = stated.trim().parse().map_err(|_| ModelError::RuleParse {
                offset: 0,
                message: format!("bad WSC value in {line:?}"),
            })?;
            let actual = wsc(&rule);
            if stated != actual {
                return Err(ModelError::Invalid {
                    kind: "rule",
                    reason: format!("stated WSC {stated} does not match computed {actual}"),
                });
            }
        }
    }
    Ok(rule)
}

/// Parses a whole policy file in the canonical textual format. Blank lines and
/// `#` comments between rules are ignored.
pub fn parse_policy_rules(text: &str) -> Result<Vec<AbacRule>, ModelError> {
    let mut rules = Vec::new();
    let mut block = String::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.starts_with('#') {
            continue;
        }
        if trimmed.starts_with("Rule ") {
            if !block.is_empty() {
                rules.push(parse_rule(&block)?);
                block.clear();
            }
            block.push_str(trimmed);
        } else if !block.is_empty() && !trimmed.is_empty() {
            block.push('\n');
            block.push_str(trimmed);
        }
    }
    if !block.is_empty() {
        rules.push(parse_rule(&block)?);
    }
    Ok(rules)
}


#[cfg(test)]
mod property_tests {
    use super::*;
    use proptest::collection::{btree_map, btree_set};
    use proptest::prelude::*;

    fn token() -> impl Strategy<Value = String> {
        "[A-Za-z][A-Za-z0-9_.]{0,8}"
    }

    fn expr() -> impl Strategy<Value = BTreeMap<String, BTreeSet<String>>> {
        btree_map(token(), btree_set(token(), 1..4), 0..3)
    }

    fn rule() -> impl Strategy<Value = AbacRule> {
        (expr(), expr(), btree_set(token(), 1..3), btree_set((token(), token()), 0..3)).prop_map(
            |(user_expr, resource_expr, operations, constraints)| AbacRule {
                user_expr,
                resource_expr,
                operations,
                constraints,
            },
        )
    }

    proptest! {
        #[test]
        fn serialization_round_trips(rule in rule()) {
            let text = serialize_rule(&rule, 1);
            let parsed = parse_rule(&text).expect("own serialization parses");
            prop_assert_eq!(parsed, rule);
        }

        #[test]
        fn wsc_matches_naive_recount(rule in rule()) {
            let recount = rule.user_expr.values().map(BTreeSet::len).sum::<usize>()
                + rule.resource_expr.values().map(BTreeSet::len).sum::<usize>()
                + rule.operations.len()
                + rule.constraints.len();
            prop_assert_eq!(wsc(&rule), recount as u64);
        }
    }
}
