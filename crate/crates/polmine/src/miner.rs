//! Seed-generalization-refinement ABAC mining engine.
//!
//! Three departures from the classic seed-based scheme: a pattern index that
//! tracks user-side and resource-side value tuples in addition to full
//! user-resource correlations, side-normalized rule quality that averages the
//! two expression sides instead of summing them, and entropy-based attribute
//! ranking so that discriminative attributes drive generalization regardless
//! of their position in the schema.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    coverage, wsc, AbacRule, AttributeSchema, Dataset, Decision, Entity, EvaluationReport,
    LogEntry, ModelError, Policy, Side,
};

#[derive(Debug, Error)]
pub enum MinerError {
    #[error("log contains no Allow entries")]
    EmptyLog,
    #[error("unresolvable {side:?} id {id:?} in log entry {index}")]
    UnresolvableId { side: Side, id: String, index: usize },
    #[error("seed entry must be an Allow decision")]
    DenySeed,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QualitySideMode {
    /// Average the user-side and resource-side expression WSC.
    SideNormalized,
    /// Plain summed WSC.
    Summed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinerConfig {
    pub quality_side_mode: QualitySideMode,
    pub min_rule_coverage: usize,
    pub max_generalization_passes: usize,
    /// Maximum covered-Deny to covered-Allow ratio a rule may exhibit.
    pub deny_tolerance: f64,
    pub rng_seed: u64,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig {
            quality_side_mode: QualitySideMode::SideNormalized,
            min_rule_coverage: 1,
            max_generalization_passes: 8,
            deny_tolerance: 0.0,
            rng_seed: 0,
        }
    }
}

// ---------------------------------------------------------------------------
// Pattern index
// ---------------------------------------------------------------------------

/// Allow-frequency index over attribute-value tuples. Tuples list values in
/// sorted attribute-name order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PatternIndex {
    pub user_resource_patterns: BTreeMap<(Vec<String>, Vec<String>, String), usize>,
    pub user_side_patterns: BTreeMap<Vec<String>, usize>,
    pub resource_side_patterns: BTreeMap<Vec<String>, usize>,
}

fn attr_tuple(entity: &Entity) -> Vec<String> {
    entity.attributes.values().cloned().collect()
}

/// Counts Allow-entry frequencies of user-resource-operation patterns and of
/// each side's attribute tuple on its own.
pub fn build_pattern_index(
    logs: &[LogEntry],
    users: &BTreeMap<String, Entity>,
    resources: &BTreeMap<String, Entity>,
) -> Result<PatternIndex, MinerError> {
    let mut index = PatternIndex::default();
    for (i, entry) in logs.iter().enumerate() {
        if entry.decision != Decision::Allow {
            continue;
        }
        let user = users.get(&entry.user_id).ok_or_else(|| MinerError::UnresolvableId {
            side: Side::User,
            id: entry.user_id.clone(),
            index: i,
        })?;
        let resource =
            resources.get(&entry.resource_id).ok_or_else(|| MinerError::UnresolvableId {
                side: Side::Resource,
                id: entry.resource_id.clone(),
                index: i,
            })?;
        let ut = attr_tuple(user);
        let rt = attr_tuple(resource);
        *index
            .user_resource_patterns
            .entry((ut.clone(), rt.clone(), entry.operation.clone()))
            .or_insert(0) += 1;
        *index.user_side_patterns.entry(ut).or_insert(0) += 1;
        *index.resource_side_patterns.entry(rt).or_insert(0) += 1;
    }
    Ok(index)
}

// ---------------------------------------------------------------------------
// Attribute ranking
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAttribute {
    pub side: Side,
    pub name: String,
    pub information_gain: f64,
    /// 0 is most discriminative.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeRanking {
    pub attributes: Vec<RankedAttribute>,
    /// True when the log carried no Deny entries and the ranking fell back to
    /// ascending domain size.
    pub fallback: bool,
}

fn entropy_of_counts(allow: usize, deny: usize) -> f64 {
    let total = (allow + deny) as f64;
    if total == 0.0 {
        return 0.0;
    }
    let mut h = 0.0;
    for count in [allow, deny] {
        if count > 0 {
            let p = count as f64 / total;
            h -= p * p.log2();
        }
    }
    h
}

/// Ranks every schema attribute by information gain of the Allow/Deny label.
///
/// An all-Allow log carries zero gain everywhere; the ranking then falls back
/// to ascending domain size (smaller domains generalize faster).
pub fn rank_attributes(
    logs: &[LogEntry],
    users: &BTreeMap<String, Entity>,
    resources: &BTreeMap<String, Entity>,
    schema: &AttributeSchema,
) -> Result<AttributeRanking, MinerError> {
    let mut allow_total = 0usize;
    let mut deny_total = 0usize;
    // (side, attr index) -> value -> (allow, deny)
    let mut splits: Vec<Vec<BTreeMap<&str, (usize, usize)>>> = vec![
        vec![BTreeMap::new(); schema.user_attributes.len()],
        vec![BTreeMap::new(); schema.resource_attributes.len()],
    ];
    for (i, entry) in logs.iter().enumerate() {
        let user = users.get(&entry.user_id).ok_or_else(|| MinerError::UnresolvableId {
            side: Side::User,
            id: entry.user_id.clone(),
            index: i,
        })?;
        let resource =
            resources.get(&entry.resource_id).ok_or_else(|| MinerError::UnresolvableId {
                side: Side::Resource,
                id: entry.resource_id.clone(),
                index: i,
            })?;
        match entry.decision {
            Decision::Allow => allow_total += 1,
            Decision::Deny => deny_total += 1,
        }
        for (si, (entity, attrs)) in [
            (user, &schema.user_attributes),
            (resource, &schema.resource_attributes),
        ]
        .into_iter()
        .enumerate()
        {
            for (ai, (name, _)) in attrs.iter().enumerate() {
                if let Some(value) = entity.attributes.get(name) {
                    let slot = splits[si][ai].entry(value.as_str()).or_insert((0, 0));
                    match entry.decision {
                        Decision::Allow => slot.0 += 1,
                        Decision::Deny => slot.1 += 1,
                    }
                }
            }
        }
    }

    let total = (allow_total + deny_total) as f64;
    let label_entropy = entropy_of_counts(allow_total, deny_total);
    let mut ranked = Vec::new();
    for (si, (side, attrs)) in [
        (Side::User, &schema.user_attributes),
        (Side::Resource, &schema.resource_attributes),
    ]
    .into_iter()
    .enumerate()
    {
        for (ai, (name, domain)) in attrs.iter().enumerate() {
            let conditional: f64 = splits[si][ai]
                .values()
                .map(|(a, d)| ((a + d) as f64 / total.max(1.0)) * entropy_of_counts(*a, *d))
                .sum();
            let gain = (label_entropy - conditional).max(0.0);
            ranked.push((side, si, ai, name.clone(), domain.len(), gain));
        }
    }

    let fallback = deny_total == 0 || allow_total == 0;
    if fallback {
        log::warn!("log has no label split; attribute ranking falls back to domain size");
        ranked.sort_by(|a, b| a.4.cmp(&b.4).then_with(|| a.3.cmp(&b.3)));
    } else {
        // Descending gain; ties by schema declaration order, then lexically.
        ranked.sort_by(|a, b| {
            b.5.partial_cmp(&a.5)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.1.cmp(&b.1))
                .then_with(|| a.2.cmp(&b.2))
                .then_with(|| a.3.cmp(&b.3))
        });
    }

    let attributes = ranked
        .into_iter()
        .enumerate()
        .map(|(rank, (side, _, _, name, _, gain))| RankedAttribute {
            side,
            name,
            information_gain: if fallback { 0.0 } else { gain },
            rank,
        })
        .collect();
    Ok(AttributeRanking { attributes, fallback })
}

// ---------------------------------------------------------------------------
// Encoded working representation
// ---------------------------------------------------------------------------

struct Enc {
    user_names: Vec<String>,
    res_names: Vec<String>,
    user_domains: Vec<Vec<String>>,
    res_domains: Vec<Vec<String>>,
    ops: Vec<String>,
    entries: Vec<EncEntry>,
    allow: Vec<usize>,
    deny: Vec<usize>,
}

struct EncEntry {
    u: Vec<u32>,
    r: Vec<u32>,
    op: u32,
    /// eq[ua * res_names.len() + ra] holds user/resource value equality.
    eq: Vec<bool>,
    sort_key: (String, String, String, String),
}

#[derive(Clone, PartialEq, Eq)]
struct EncRule {
    user: Vec<Option<BTreeSet<u32>>>,
    res: Vec<Option<BTreeSet<u32>>>,
    ops: BTreeSet<u32>,
    constraints: BTreeSet<(usize, usize)>,
}

impl Enc {
    fn build(
        schema: &AttributeSchema,
        users: &BTreeMap<String, Entity>,
        resources: &BTreeMap<String, Entity>,
        logs: &[LogEntry],
    ) -> Result<Enc, MinerError> {
        let user_names: Vec<String> =
            schema.user_attributes.iter().map(|(n, _)| n.clone()).collect();
        let res_names: Vec<String> =
            schema.resource_attributes.iter().map(|(n, _)| n.clone()).collect();
        let user_domains: Vec<Vec<String>> = schema
            .user_attributes
            .iter()
            .map(|(_, d)| d.iter().cloned().collect())
            .collect();
        let res_domains: Vec<Vec<String>> = schema
            .resource_attributes
            .iter()
            .map(|(_, d)| d.iter().cloned().collect())
            .collect();
        let mut ops: Vec<String> = logs.iter().map(|e| e.operation.clone()).collect();
        ops.sort();
        ops.dedup();

        let op_index: HashMap<&str, u32> =
            ops.iter().enumerate().map(|(i, o)| (o.as_str(), i as u32)).collect();
        let index_of = |domain: &[String], value: &str| -> Option<u32> {
            domain.binary_search_by(|v| v.as_str().cmp(value)).ok().map(|i| i as u32)
        };

        let mut entries = Vec::with_capacity(logs.len());
        let mut allow = Vec::new();
        let mut deny = Vec::new();
        for (i, entry) in logs.iter().enumerate() {
            let user = users.get(&entry.user_id).ok_or_else(|| MinerError::UnresolvableId {
                side: Side::User,
                id: entry.user_id.clone(),
                index: i,
            })?;
            let resource =
                resources.get(&entry.resource_id).ok_or_else(|| MinerError::UnresolvableId {
                    side: Side::Resource,
                    id: entry.resource_id.clone(),
                    index: i,
                })?;
            let mut u = Vec::with_capacity(user_names.len());
            for (ai, name) in user_names.iter().enumerate() {
                let value = user.attributes.get(name).ok_or_else(|| {
                    ModelError::SchemaMismatch(format!(
                        "user {:?} missing attribute {name:?}",
                        user.id
                    ))
                })?;
                u.push(index_of(&user_domains[ai], value).ok_or_else(|| {
                    ModelError::SchemaMismatch(format!(
                        "user {:?}: value {value:?} outside domain of {name:?}",
                        user.id
                    ))
                })?);
            }
            let mut r = Vec::with_capacity(res_names.len());
            for (ai, name) in res_names.iter().enumerate() {
                let value = resource.attributes.get(name).ok_or_else(|| {
                    ModelError::SchemaMismatch(format!(
                        "resource {:?} missing attribute {name:?}",
                        resource.id
                    ))
                })?;
                r.push(index_of(&res_domains[ai], value).ok_or_else(|| {
                    ModelError::SchemaMismatch(format!(
                        "resource {:?}: value {value:?} outside domain of {name:?}",
                        resource.id
                    ))
                })?);
            }
            let mut eq = Vec::with_capacity(user_names.len() * res_names.len());
            for (ua, uname) in user_names.iter().enumerate() {
                let uv = &user_domains[ua][u[ua] as usize];
                for (ra, _) in res_names.iter().enumerate() {
                    let rv = &res_domains[ra][r[ra] as usize];
                    let _ = uname;
                    eq.push(uv == rv);
                }
            }
            let op = *op_index.get(entry.operation.as_str()).expect("op collected above");
            match entry.decision {
                Decision::Allow => allow.push(i),
                Decision::Deny => deny.push(i),
            }
            entries.push(EncEntry {
                u,
                r,
                op,
                eq,
                sort_key: (
                    entry.user_id.clone(),
                    entry.resource_id.clone(),
                    entry.operation.clone(),
                    entry.timestamp.clone(),
                ),
            });
        }
        Ok(Enc { user_names, res_names, user_domains, res_domains, ops, entries, allow, deny })
    }

    fn matches(&self, rule: &EncRule, entry: &EncEntry) -> bool {
        if !rule.ops.contains(&entry.op) {
            return false;
        }
        for (ai, values) in rule.user.iter().enumerate() {
            if let Some(values) = values {
                if !values.contains(&entry.u[ai]) {
                    return false;
                }
            }
        }
        for (ai, values) in rule.res.iter().enumerate() {
            if let Some(values) = values {
                if !values.contains(&entry.r[ai]) {
                    return false;
                }
            }
        }
        for (ua, ra) in &rule.constraints {
            if !entry.eq[ua * self.res_names.len() + ra] {
                return false;
            }
        }
        true
    }

    fn covered_allow(&self, rule: &EncRule) -> usize {
        self.allow.iter().filter(|&&i| self.matches(rule, &self.entries[i])).count()
    }

    fn covered_deny(&self, rule: &EncRule) -> usize {
        self.deny.iter().filter(|&&i| self.matches(rule, &self.entries[i])).count()
    }

    fn deny_ok(&self, rule: &EncRule, config: &MinerConfig) -> bool {
        let deny = self.covered_deny(rule);
        if deny == 0 {
            return true;
        }
        deny as f64 <= config.deny_tolerance * self.covered_allow(rule) as f64
    }

    fn seed_rule(&self, entry: &EncEntry) -> EncRule {
        let user = entry.u.iter().map(|v| Some(BTreeSet::from([*v]))).collect();
        let res = entry.r.iter().map(|v| Some(BTreeSet::from([*v]))).collect();
        let mut constraints = BTreeSet::new();
        for ua in 0..self.user_names.len() {
            for ra in 0..self.res_names.len() {
                if entry.eq[ua * self.res_names.len() + ra] {
                    constraints.insert((ua, ra));
                }
            }
        }
        EncRule { user, res, ops: BTreeSet::from([entry.op]), constraints }
    }

    fn decode(&self, rule: &EncRule, schema: &AttributeSchema) -> AbacRule {
        let mut user_expr = BTreeMap::new();
        for (ai, values) in rule.user.iter().enumerate() {
            if let Some(values) = values {
                user_expr.insert(
                    self.user_names[ai].clone(),
                    values.iter().map(|v| self.user_domains[ai][*v as usize].clone()).collect(),
                );
            }
        }
        let mut resource_expr = BTreeMap::new();
        for (ai, values) in rule.res.iter().enumerate() {
            if let Some(values) = values {
                resource_expr.insert(
                    self.res_names[ai].clone(),
                    values.iter().map(|v| self.res_domains[ai][*v as usize].clone()).collect(),
                );
            }
        }
        let mut rule = AbacRule {
            user_expr,
            resource_expr,
            operations: rule.ops.iter().map(|o| self.ops[*o as usize].clone()).collect(),
            constraints: rule
                .constraints
                .iter()
                .map(|(ua, ra)| (self.user_names[*ua].clone(), self.res_names[*ra].clone()))
                .collect(),
        };
        rule.canonicalize(schema);
        rule
    }

    fn encode_rule(&self, rule: &AbacRule) -> Result<EncRule, MinerError> {
        let mut user = vec![None; self.user_names.len()];
        for (name, values) in &rule.user_expr {
            let ai = self
                .user_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| ModelError::SchemaMismatch(format!("unknown user attribute {name:?}")))?;
            let mut set = BTreeSet::new();
            for v in values {
                let idx = self.user_domains[ai]
                    .binary_search_by(|d| d.as_str().cmp(v))
                    .map_err(|_| ModelError::SchemaMismatch(format!("value {v:?} outside domain")))?;
                set.insert(idx as u32);
            }
            user[ai] = Some(set);
        }
        let mut res = vec![None; self.res_names.len()];
        for (name, values) in &rule.resource_expr {
            let ai = self
                .res_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| ModelError::SchemaMismatch(format!("unknown resource attribute {name:?}")))?;
            let mut set = BTreeSet::new();
            for v in values {
                let idx = self.res_domains[ai]
                    .binary_search_by(|d| d.as_str().cmp(v))
                    .map_err(|_| ModelError::SchemaMismatch(format!("value {v:?} outside domain")))?;
                set.insert(idx as u32);
            }
            res[ai] = Some(set);
        }
        let mut ops = BTreeSet::new();
        for op in &rule.operations {
            if let Some(i) = self.ops.iter().position(|o| o == op) {
                ops.insert(i as u32);
            }
        }
        let mut constraints = BTreeSet::new();
        for (ua, ra) in &rule.constraints {
            let ua = self.user_names.iter().position(|n| n == ua).ok_or_else(|| {
                ModelError::SchemaMismatch(format!("unknown user attribute {ua:?}"))
            })?;
            let ra = self.res_names.iter().position(|n| n == ra).ok_or_else(|| {
                ModelError::SchemaMismatch(format!("unknown resource attribute {ra:?}"))
            })?;
            constraints.insert((ua, ra));
        }
        Ok(EncRule { user, res, ops, constraints })
    }

    fn complexity_norm(&self, rule: &EncRule, config: &MinerConfig) -> f64 {
        let user: usize = rule.user.iter().flatten().map(|s| s.len()).sum();
        let res: usize = rule.res.iter().flatten().map(|s| s.len()).sum();
        let rest = (rule.ops.len() + rule.constraints.len()) as f64;
        match config.quality_side_mode {
            QualitySideMode::SideNormalized => (user + res) as f64 / 2.0 + rest,
            QualitySideMode::Summed => (user + res) as f64 + rest,
        }
    }

    fn quality(&self, rule: &EncRule, config: &MinerConfig) -> f64 {
        self.covered_allow(rule) as f64 / self.complexity_norm(rule, config)
    }
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

/// Most-specific candidate rule for an Allow seed: singleton value sets for
/// every attribute, the seed's operation, and a constraint for every
/// user/resource attribute pair that carries equal values on the seed.
pub fn candidate_from_seed(
    seed: &LogEntry,
    users: &BTreeMap<String, Entity>,
    resources: &BTreeMap<String, Entity>,
) -> Result<AbacRule, MinerError> {
    if seed.decision != Decision::Allow {
        return Err(MinerError::DenySeed);
    }
    let user = users.get(&seed.user_id).ok_or_else(|| MinerError::UnresolvableId {
        side: Side::User,
        id: seed.user_id.clone(),
        index: 0,
    })?;
    let resource = resources.get(&seed.resource_id).ok_or_else(|| MinerError::UnresolvableId {
        side: Side::Resource,
        id: seed.resource_id.clone(),
        index: 0,
    })?;
    let user_expr = user
        .attributes
        .iter()
        .map(|(k, v)| (k.clone(), BTreeSet::from([v.clone()])))
        .collect();
    let resource_expr = resource
        .attributes
        .iter()
        .map(|(k, v)| (k.clone(), BTreeSet::from([v.clone()])))
        .collect();
    let mut constraints = BTreeSet::new();
    for (ua, uv) in &user.attributes {
        for (ra, rv) in &resource.attributes {
            if uv == rv {
                constraints.insert((ua.clone(), ra.clone()));
            }
        }
    }
    Ok(AbacRule {
        user_expr,
        resource_expr,
        operations: BTreeSet::from([seed.operation.clone()]),
        constraints,
    })
}

/// Quality of a rule: covered Allow entries divided by a complexity norm
/// (side-normalized by default). Higher is better.
pub fn rule_quality(rule: &AbacRule, covered_allow: usize, config: &MinerConfig) -> f64 {
    assert!(covered_allow >= 1, "rule_quality requires a rule covering at least one Allow entry");
    let user = rule.user_side_wsc() as f64;
    let res = rule.resource_side_wsc() as f64;
    let rest = (rule.operations.len() + rule.constraints.len()) as f64;
    let norm = match config.quality_side_mode {
        QualitySideMode::SideNormalized => (user + res) / 2.0 + rest,
        QualitySideMode::Summed => user + res + rest,
    };
    covered_allow as f64 / norm
}

/// One ranking position per attribute ordered most-discriminative-first;
/// generalization consumes it in reverse.
fn ranking_order(enc: &Enc, ranking: &AttributeRanking) -> Vec<(Side, usize)> {
    let mut order = Vec::new();
    for attr in ranking.attributes.iter().rev() {
        let idx = match attr.side {
            Side::User => enc.user_names.iter().position(|n| *n == attr.name),
            Side::Resource => enc.res_names.iter().position(|n| *n == attr.name),
        };
        if let Some(idx) = idx {
            order.push((attr.side, idx));
        }
    }
    order
}

fn generalize_enc(
    enc: &Enc,
    rule: &EncRule,
    uncovered: &[bool],
    order: &[(Side, usize)],
    config: &MinerConfig,
) -> EncRule {
    let mut current = rule.clone();
    let mut q = enc.quality(&current, config);
    for _ in 0..config.max_generalization_passes {
        let mut changed = false;
        for &(side, ai) in order {
            let constrained = match side {
                Side::User => current.user[ai].is_some(),
                Side::Resource => current.res[ai].is_some(),
            };
            if !constrained {
                continue;
            }
            // (a) widen with values seen in still-uncovered Allow entries that
            // match the rest of the rule.
            let mut rest = current.clone();
            match side {
                Side::User => rest.user[ai] = None,
                Side::Resource => rest.res[ai] = None,
            }
            let mut widened = match side {
                Side::User => current.user[ai].clone().unwrap(),
                Side::Resource => current.res[ai].clone().unwrap(),
            };
            let before = widened.len();
            for (slot, &i) in uncovered.iter().zip(&enc.allow) {
                if *slot && enc.matches(&rest, &enc.entries[i]) {
                    let value = match side {
                        Side::User => enc.entries[i].u[ai],
                        Side::Resource => enc.entries[i].r[ai],
                    };
                    widened.insert(value);
                }
            }
            if widened.len() > before {
                let mut candidate = current.clone();
                match side {
                    Side::User => candidate.user[ai] = Some(widened.clone()),
                    Side::Resource => candidate.res[ai] = Some(widened.clone()),
                }
                let cq = enc.quality(&candidate, config);
                if cq > q && enc.deny_ok(&candidate, config) {
                    current = candidate;
                    q = cq;
                    changed = true;
                } else {
                    // The full widened set spans several regions whose cross
                    // product covers Denies or dilutes quality. Retry value
                    // by value so widening reaches its Deny-free extent.
                    for value in widened {
                        let have = match side {
                            Side::User => current.user[ai].as_ref().unwrap(),
                            Side::Resource => current.res[ai].as_ref().unwrap(),
                        };
                        if have.contains(&value) {
                            continue;
                        }
                        let mut one = current.clone();
                        match side {
                            Side::User => {
                                one.user[ai].as_mut().unwrap().insert(value);
                            }
                            Side::Resource => {
                                one.res[ai].as_mut().unwrap().insert(value);
                            }
                        }
                        let oq = enc.quality(&one, config);
                        if oq > q && enc.deny_ok(&one, config) {
                            current = one;
                            q = oq;
                            changed = true;
                        }
                    }
                }
            }
            // (b) drop the attribute entirely.
            let cq = enc.quality(&rest, config);
            if cq > q && enc.deny_ok(&rest, config) {
                current = rest;
                q = cq;
                changed = true;
            }
        }
        // (c) widen the operation set with operations seen in uncovered Allow
        // entries matching the rest of the rule.
        {
            let mut widened_ops = current.ops.clone();
            for (slot, &i) in uncovered.iter().zip(&enc.allow) {
                if !*slot {
                    continue;
                }
                let op = enc.entries[i].op;
                if current.ops.contains(&op) {
                    continue;
                }
                let mut probe = current.clone();
                probe.ops.insert(op);
                if enc.matches(&probe, &enc.entries[i]) {
                    widened_ops.insert(op);
                }
            }
            if widened_ops.len() > current.ops.len() {
                let mut candidate = current.clone();
                candidate.ops = widened_ops;
                let cq = enc.quality(&candidate, config);
                if cq > q && enc.deny_ok(&candidate, config) {
                    current = candidate;
                    q = cq;
                    changed = true;
                }
            }
        }
        // (d) drop constraints.
        for constraint in current.constraints.clone() {
            let mut candidate = current.clone();
            candidate.constraints.remove(&constraint);
            let cq = enc.quality(&candidate, config);
            if cq > q && enc.deny_ok(&candidate, config) {
                current = candidate;
                q = cq;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    current
}

/// Generalizes a rule against a dataset: widens or drops attributes in
/// ascending information-gain order and drops constraints, accepting each
/// step iff quality strictly increases and no Deny entry beyond the tolerance
/// becomes covered.
pub fn generalize(
    rule: &AbacRule,
    dataset: &Dataset,
    schema: &AttributeSchema,
    ranking: &AttributeRanking,
    config: &MinerConfig,
) -> Result<AbacRule, MinerError> {
    let enc = Enc::build(schema, &dataset.users, &dataset.resources, &dataset.logs)?;
    let enc_rule = enc.encode_rule(rule)?;
    let uncovered = vec![true; enc.allow.len()];
    let order = ranking_order(&enc, ranking);
    let result = generalize_enc(&enc, &enc_rule, &uncovered, &order, config);
    Ok(enc.decode(&result, schema))
}

fn allow_cover_sets(enc: &Enc, rules: &[EncRule]) -> Vec<BTreeSet<usize>> {
    rules
        .iter()
        .map(|rule| {
            enc.allow
                .iter()
                .enumerate()
                .filter(|(_, &i)| enc.matches(rule, &enc.entries[i]))
                .map(|(slot, _)| slot)
                .collect()
        })
        .collect()
}

/// Element-wise union of two rules: value sets union (wildcard absorbs),
/// operation sets union, constraint sets intersect. The result matches a
/// superset of what either rule matches.
fn union_rule(a: &EncRule, b: &EncRule) -> EncRule {
    let join = |x: &Option<BTreeSet<u32>>, y: &Option<BTreeSet<u32>>| match (x, y) {
        (Some(x), Some(y)) => Some(x.union(y).copied().collect()),
        _ => None,
    };
    EncRule {
        user: a.user.iter().zip(&b.user).map(|(x, y)| join(x, y)).collect(),
        res: a.res.iter().zip(&b.res).map(|(x, y)| join(x, y)).collect(),
        ops: a.ops.union(&b.ops).copied().collect(),
        constraints: a.constraints.intersection(&b.constraints).copied().collect(),
    }
}

fn merge_pass(enc: &Enc, rules: &mut Vec<EncRule>, schema: &AttributeSchema, config: &MinerConfig) {
    // Repeatedly merge the best rule pair whose union stays within the Deny
    // tolerance and strictly lowers total WSC. Greedy and deterministic: the
    // largest WSC saving wins, ties by pair serialization.
    loop {
        let mut best: Option<(u64, String, usize, usize, EncRule)> = None;
        for i in 0..rules.len() {
            for j in (i + 1)..rules.len() {
                let merged = union_rule(&rules[i], &rules[j]);
                let merged_wsc = wsc(&enc.decode(&merged, schema));
                let pair_wsc =
                    wsc(&enc.decode(&rules[i], schema)) + wsc(&enc.decode(&rules[j], schema));
                if merged_wsc >= pair_wsc || !enc.deny_ok(&merged, config) {
                    continue;
                }
                let saving = pair_wsc - merged_wsc;
                let key = crate::model::serialize_rule(&enc.decode(&merged, schema), 0);
                let better = match &best {
                    None => true,
                    Some((s, k, _, _, _)) => saving > *s || (saving == *s && key < *k),
                };
                if better {
                    best = Some((saving, key, i, j, merged));
                }
            }
        }
        match best {
            Some((_, _, i, j, merged)) => {
                rules.remove(j);
                rules.remove(i);
                rules.push(merged);
            }
            None => break,
        }
    }
}

fn prune_enc(enc: &Enc, rules: &mut Vec<EncRule>, schema: &AttributeSchema) {
    loop {
        let covers = allow_cover_sets(enc, rules);
        // Deterministic removal order: fewest covered entries first, then
        // highest WSC, then lexical serialization.
        let mut order: Vec<usize> = (0..rules.len()).collect();
        order.sort_by_key(|&i| {
            let decoded = enc.decode(&rules[i], schema);
            (covers[i].len(), std::cmp::Reverse(wsc(&decoded)), crate::model::serialize_rule(&decoded, 0))
        });
        let mut removed = None;
        for &i in &order {
            let mut union: BTreeSet<usize> = BTreeSet::new();
            for (j, cover) in covers.iter().enumerate() {
                if j != i {
                    union.extend(cover);
                }
            }
            if covers[i].is_subset(&union) {
                removed = Some(i);
                break;
            }
        }
        match removed {
            Some(i) => {
                rules.remove(i);
            }
            None => break,
        }
    }
}

/// Removes rules whose covered Allow set is a subset of the union of the
/// remaining rules'. Idempotent.
pub fn redundancy_prune(policy: &Policy, dataset: &Dataset) -> Result<Policy, MinerError> {
    let enc = Enc::build(&policy.schema, &dataset.users, &dataset.resources, &dataset.logs)?;
    let mut rules: Vec<EncRule> = Vec::new();
    for rule in &policy.rules {
        let enc_rule = enc.encode_rule(rule)?;
        // Exact duplicates collapse immediately.
        if !rules.contains(&enc_rule) {
            rules.push(enc_rule);
        }
    }
    prune_enc(&enc, &mut rules, &policy.schema);
    let mut decoded: Vec<AbacRule> = rules.iter().map(|r| enc.decode(r, &policy.schema)).collect();
    let covers = allow_cover_sets(&enc, &rules);
    sort_rules(&mut decoded, &covers);
    Ok(Policy { rules: decoded, schema: policy.schema.clone() })
}

fn sort_rules(rules: &mut Vec<AbacRule>, covers: &[BTreeSet<usize>]) {
    let mut indexed: Vec<(usize, AbacRule)> = rules.drain(..).enumerate().collect();
    indexed.sort_by_key(|(i, rule)| {
        (
            std::cmp::Reverse(covers.get(*i).map_or(0, |c| c.len())),
            wsc(rule),
            crate::model::serialize_rule(rule, 0),
        )
    });
    *rules = indexed.into_iter().map(|(_, r)| r).collect();
}

/// Mines a policy from a dataset: frequency-ordered seeding, per-seed
/// generalization, single-attribute merging, and redundancy pruning.
pub fn mine_policy(
    dataset: &Dataset,
    schema: &AttributeSchema,
    config: &MinerConfig,
) -> Result<(Policy, EvaluationReport), MinerError> {
    let start = Instant::now();
    let enc = Enc::build(schema, &dataset.users, &dataset.resources, &dataset.logs)?;
    if enc.allow.is_empty() {
        return Err(MinerError::EmptyLog);
    }
    let ranking = rank_attributes(&dataset.logs, &dataset.users, &dataset.resources, schema)?;
    let order = ranking_order(&enc, &ranking);

    // Allow-frequency of each full pattern, for seed selection.
    let mut pattern_freq: HashMap<(Vec<u32>, Vec<u32>, u32), usize> = HashMap::new();
    for &i in &enc.allow {
        let e = &enc.entries[i];
        *pattern_freq.entry((e.u.clone(), e.r.clone(), e.op)).or_insert(0) += 1;
    }

    let mut uncovered = vec![true; enc.allow.len()];
    let mut blocked = vec![false; enc.allow.len()];
    let mut rules: Vec<EncRule> = Vec::new();
    loop {
        // Highest-frequency uncovered pattern seeds next; ties lexical.
        let seed_slot = uncovered
            .iter()
            .enumerate()
            .filter(|(slot, up)| **up && !blocked[*slot])
            .map(|(slot, _)| slot)
            .min_by(|&a, &b| {
                let (ea, eb) = (&enc.entries[enc.allow[a]], &enc.entries[enc.allow[b]]);
                let fa = pattern_freq[&(ea.u.clone(), ea.r.clone(), ea.op)];
                let fb = pattern_freq[&(eb.u.clone(), eb.r.clone(), eb.op)];
                fb.cmp(&fa).then_with(|| ea.sort_key.cmp(&eb.sort_key))
            });
        let Some(slot) = seed_slot else { break };
        let seed_entry = &enc.entries[enc.allow[slot]];
        let seed = enc.seed_rule(seed_entry);
        if !enc.deny_ok(&seed, config) {
            // The seed's exact pattern collides with a logged Deny; every
            // entry sharing the pattern is unminable.
            for (s, &i) in blocked.iter_mut().zip(&enc.allow).collect::<Vec<_>>() {
                if enc.entries[i].u == seed_entry.u
                    && enc.entries[i].r == seed_entry.r
                    && enc.entries[i].op == seed_entry.op
                {
                    *s = true;
                }
            }
            continue;
        }
        let rule = generalize_enc(&enc, &seed, &uncovered, &order, config);
        let newly_covered: Vec<usize> = enc
            .allow
            .iter()
            .enumerate()
            .filter(|(s, &i)| uncovered[*s] && enc.matches(&rule, &enc.entries[i]))
            .map(|(s, _)| s)
            .collect();
        if newly_covered.len() < config.min_rule_coverage {
            blocked[slot] = true;
            continue;
        }
        for s in newly_covered {
            uncovered[s] = false;
        }
        rules.push(rule);
    }

    // Refinement to a fixpoint: rules mined late saw a mostly-covered log and
    // stayed narrow. Re-generalizing against the full log lets each rule
    // widen to its full extent, after which duplicates collapse, unions of
    // overlapping pairs merge, and redundant rules prune away. Merged rules
    // can widen further, so the cycle repeats until the rule set stabilizes.
    let everything = vec![true; enc.allow.len()];
    loop {
        let mut refined: Vec<EncRule> = Vec::new();
        for rule in &rules {
            let wide = generalize_enc(&enc, rule, &everything, &order, config);
            if !refined.contains(&wide) {
                refined.push(wide);
            }
        }
        merge_pass(&enc, &mut refined, schema, config);
        prune_enc(&enc, &mut refined, schema);
        let stable = refined == rules;
        rules = refined;
        if stable {
            break;
        }
    }

    let covers = allow_cover_sets(&enc, &rules);
    let mut decoded: Vec<AbacRule> = rules.iter().map(|r| enc.decode(r, schema)).collect();
    sort_rules(&mut decoded, &covers);
    let policy = Policy { rules: decoded, schema: schema.clone() };

    let (mut report, _) =
        coverage(&policy, &dataset.logs, &dataset.users, &dataset.resources, false);
    report.mining_seconds = start.elapsed().as_secs_f64();
    Ok((policy, report))
}
