//! Synthetic dataset generators: an attribute-governed ABAC organization
//! whose logs follow a known ground-truth policy, and an ACL-governed DAC
//! organization whose per-object grants are only partially expressible in
//! attribute terms.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    parse_policy_rules, rule_matches, AttributeSchema, Decision, Entity, LogEntry, ModelError,
    Policy,
};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("generated organization admits no Allow decision; nothing to log")]
    Unsatisfiable,
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Model(#[from] ModelError),
}

const GROUND_TRUTH_TEXT: &str = include_str!("../data/ground_truth_abac.rules");

const DEPARTMENTS: [&str; 10] = [
    "Engineering", "Finance", "HR", "IT", "Legal", "Marketing", "Operations", "Research",
    "Sales", "Support",
];
const DESIGNATIONS: [&str; 8] = [
    "Analyst", "Contractor", "Director", "Engineer", "Generalist", "Intern", "Manager",
    "System_Admin",
];
const CLEARANCES: [&str; 3] = ["Internal", "Public", "Secret"];
const REGIONS: [&str; 3] = ["APAC", "EU", "NA"];
const RES_TYPES: [&str; 4] = ["Financial", "HR", "Operational", "Technical"];
const SENSITIVITIES: [&str; 3] = ["High", "Low", "Medium"];
const PROJECTS: [&str; 3] = ["Apollo", "Borealis", "Cygnus"];
const OWNER_DEPTS: [&str; 4] = ["Finance", "HR", "IT", "Sales"];
const OPERATIONS: [&str; 2] = ["read", "write"];

/// Schema width of the ABAC organization: user attributes x resource
/// attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbacVariant {
    /// department, designation x type, sensitivity
    U2O2,
    /// adds user clearance
    U3O2,
    /// full schema: adds user region; resource region, project, owner_dept
    U4O5,
}

impl AbacVariant {
    pub fn label(&self) -> &'static str {
        match self {
            AbacVariant::U2O2 => "U2O2",
            AbacVariant::U3O2 => "U3O2",
            AbacVariant::U4O5 => "U4O5",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub variant: AbacVariant,
    pub num_users: usize,
    pub num_resources: usize,
    pub log_size: usize,
    /// Probability that a ground-truth-denied access attempt is recorded.
    pub deny_sample_prob: f64,
    pub rng_seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            variant: AbacVariant::U4O5,
            num_users: 50,
            num_resources: 40,
            log_size: 1000,
            deny_sample_prob: 0.002,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Org {
    pub users: BTreeMap<String, Entity>,
    pub resources: BTreeMap<String, Entity>,
    pub schema: AttributeSchema,
    pub ground_truth: Policy,
}

fn set_of(values: &[&str]) -> std::collections::BTreeSet<String> {
    values.iter().map(|s| s.to_string()).collect()
}

pub fn abac_schema(variant: AbacVariant) -> AttributeSchema {
    let mut user = vec![
        ("department".to_string(), set_of(&DEPARTMENTS)),
        ("designation".to_string(), set_of(&DESIGNATIONS)),
    ];
    let mut resource = vec![
        ("sensitivity".to_string(), set_of(&SENSITIVITIES)),
        ("type".to_string(), set_of(&RES_TYPES)),
    ];
    if matches!(variant, AbacVariant::U3O2 | AbacVariant::U4O5) {
        user.push(("clearance".to_string(), set_of(&CLEARANCES)));
    }
    if matches!(variant, AbacVariant::U4O5) {
        user.push(("region".to_string(), set_of(&REGIONS)));
        resource.push(("owner_dept".to_string(), set_of(&OWNER_DEPTS)));
        resource.push(("project".to_string(), set_of(&PROJECTS)));
        resource.push(("region".to_string(), set_of(&REGIONS)));
    }
    AttributeSchema::new(user, resource).expect("variant schema is well-formed")
}

/// The authored ground-truth policy projected onto a variant: rules whose
/// referenced attributes all exist in the variant's schema.
pub fn ground_truth_policy(variant: AbacVariant) -> Policy {
    let schema = abac_schema(variant);
    let rules = parse_policy_rules(GROUND_TRUTH_TEXT).expect("bundled ground truth parses");
    let keep = |rule: &crate::model::AbacRule| {
        let user_ok = rule
            .user_expr
            .keys()
            .chain(rule.constraints.iter().map(|(ua, _)| ua))
            .all(|name| schema.user_attributes.iter().any(|(n, _)| n == name));
        let res_ok = rule
            .resource_expr
            .keys()
            .chain(rule.constraints.iter().map(|(_, ra)| ra))
            .all(|name| schema.resource_attributes.iter().any(|(n, _)| n == name));
        user_ok && res_ok
    };
    let rules = rules.into_iter().filter(keep).collect();
    Policy { rules, schema }
}

fn random_entity(
    id: String,
    attrs: &[(String, std::collections::BTreeSet<String>)],
    rng: &mut ChaCha8Rng,
) -> Entity {
    let attributes = attrs
        .iter()
        .map(|(name, domain)| {
            let values: Vec<&String> = domain.iter().collect();
            (name.clone(), values[rng.gen_range(0..values.len())].clone())
        })
        .collect();
    Entity::new(id, attributes)
}

pub fn generate_abac_org(config: &GenConfig) -> Result<Org, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let ground_truth = ground_truth_policy(config.variant);
    let schema = ground_truth.schema.clone();
    let mut users = BTreeMap::new();
    for i in 0..config.num_users {
        let id = format!("u{i:03}");
        users.insert(id.clone(), random_entity(id, &schema.user_attributes, &mut rng));
    }
    let mut resources = BTreeMap::new();
    for i in 0..config.num_resources {
        let id = format!("r{i:03}");
        resources.insert(id.clone(), random_entity(id, &schema.resource_attributes, &mut rng));
    }
    Ok(Org { users, resources, schema, ground_truth })
}

fn timestamp(k: usize) -> String {
    let secs = 8 * 3600 + k;
    format!("{:02}:{:02}:{:02}", (secs / 3600) % 24, (secs / 60) % 60, secs % 60)
}

/// Samples uniform access attempts and labels them with the ground truth.
/// Every granted attempt is logged; denied attempts are logged with
/// probability `deny_sample_prob`.
pub fn generate_abac_logs(org: &Org, config: &GenConfig) -> Result<Vec<LogEntry>, GenError> {
    // The seed stream is offset from org generation so that logs and org
    // stay independent draws of the same seed.
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed ^ 0x9e37_79b9_7f4a_7c15);
    let user_ids: Vec<&String> = org.users.keys().collect();
    let resource_ids: Vec<&String> = org.resources.keys().collect();

    // Precomputed decision table over the finite (user, resource, op) space.
    let mut table = vec![false; user_ids.len() * resource_ids.len() * OPERATIONS.len()];
    let mut any_allow = false;
    for (ui, uid) in user_ids.iter().enumerate() {
        for (ri, rid) in resource_ids.iter().enumerate() {
            for (oi, op) in OPERATIONS.iter().enumerate() {
                let allowed = org.ground_truth.rules.iter().try_fold(false, |acc, rule| {
                    Ok::<bool, ModelError>(
                        acc || rule_matches(rule, &org.users[*uid], &org.resources[*rid], op)?,
                    )
                })?;
                table[(ui * resource_ids.len() + ri) * OPERATIONS.len() + oi] = allowed;
                any_allow = any_allow || allowed;
            }
        }
    }
    if !any_allow {
        return Err(GenError::Unsatisfiable);
    }

    let mut logs = Vec::with_capacity(config.log_size);
    while logs.len() < config.log_size {
        let ui = rng.gen_range(0..user_ids.len());
        let ri = rng.gen_range(0..resource_ids.len());
        let oi = rng.gen_range(0..OPERATIONS.len());
        let allowed = table[(ui * resource_ids.len() + ri) * OPERATIONS.len() + oi];
        if !allowed && rng.gen::<f64>() >= config.deny_sample_prob {
            continue;
        }
        logs.push(LogEntry {
            user_id: user_ids[ui].clone(),
            resource_id: resource_ids[ri].clone(),
            operation: OPERATIONS[oi].to_string(),
            timestamp: timestamp(logs.len()),
            decision: if allowed { Decision::Allow } else { Decision::Deny },
        });
    }
    Ok(logs)
}

// ---------------------------------------------------------------------------
// DAC organization
// ---------------------------------------------------------------------------

const DAC_TYPES: [&str; 9] = [
    "Contract", "Dataset", "Design", "Invoice", "Memo", "Policy", "Report", "Source", "Spec",
];
const DAC_SENSITIVITIES: [&str; 4] = ["Internal", "Public", "Restricted", "Sensitive"];
const DAC_USERS: usize = 74;
const DAC_OBJECTS: usize = 60;
const DAC_ROLES: usize = 31;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DacConfig {
    pub log_size: usize,
    /// Fraction of log entries carrying an Allow decision; counts are exact.
    pub allow_ratio: f64,
    /// Fraction of Deny entries drawn as near-miss probes: a granted access
    /// on a Restricted object replayed by the grantee's attribute twin.
    pub probe_fraction: f64,
    /// One-off grants added to Restricted objects beyond their base ACLs.
    pub discretionary_grants: usize,
    pub rng_seed: u64,
}

impl Default for DacConfig {
    fn default() -> Self {
        DacConfig {
            log_size: 1000,
            allow_ratio: 0.9,
            probe_fraction: 0.6,
            discretionary_grants: 25,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DacOrg {
    pub users: BTreeMap<String, Entity>,
    pub resources: BTreeMap<String, Entity>,
    pub schema: AttributeSchema,
    /// object id -> operation -> granted user ids
    pub acl: BTreeMap<String, BTreeMap<String, std::collections::BTreeSet<String>>>,
}

impl DacOrg {
    pub fn granted(&self, user_id: &str, object_id: &str, op: &str) -> bool {
        self.acl
            .get(object_id)
            .and_then(|ops| ops.get(op))
            .map_or(false, |users| users.contains(user_id))
    }
}

fn dac_user_id(i: usize) -> String {
    format!("emp{i:02}")
}

/// Users come in attribute twins: emp(2k) and emp(2k+1) share department and
/// designation. Twins let identity-based ACL gaps survive at the attribute
/// level, which is what keeps DAC logs from being fully minable.
pub fn dac_twin_id(id: &str) -> Option<String> {
    let i: usize = id.strip_prefix("emp")?.parse().ok()?;
    if i >= DAC_USERS {
        return None;
    }
    Some(dac_user_id(if i % 2 == 0 { i + 1 } else { i - 1 }))
}

pub fn generate_dac_org(config: &DacConfig) -> DacOrg {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let roles: Vec<String> = (0..DAC_ROLES).map(|i| format!("role_{i:02}")).collect();
    let schema = AttributeSchema::new(
        vec![
            ("department".to_string(), set_of(&DEPARTMENTS)),
            ("designation".to_string(), roles.iter().map(|r| r.as_str().to_string()).collect()),
        ],
        vec![
            ("sensitivity".to_string(), set_of(&DAC_SENSITIVITIES)),
            ("type".to_string(), set_of(&DAC_TYPES)),
        ],
    )
    .expect("dac schema is well-formed");

    let mut users = BTreeMap::new();
    for i in 0..DAC_USERS {
        let pair = i / 2;
        let id = dac_user_id(i);
        let attributes = [
            ("department".to_string(), DEPARTMENTS[pair % DEPARTMENTS.len()].to_string()),
            ("designation".to_string(), roles[pair % DAC_ROLES].clone()),
        ]
        .into();
        users.insert(id.clone(), Entity::new(id, attributes));
    }

    let mut resources = BTreeMap::new();
    let mut acl: BTreeMap<String, BTreeMap<String, std::collections::BTreeSet<String>>> =
        BTreeMap::new();
    let user_ids: Vec<String> = users.keys().cloned().collect();
    let by_dept = |dept: &str| -> Vec<String> {
        users
            .values()
            .filter(|u| u.attributes["department"] == dept)
            .map(|u| u.id.clone())
            .collect()
    };
    for i in 0..DAC_OBJECTS {
        let id = format!("doc{i:02}");
        // Objects 0..19 are Restricted and carry hand-picked individual ACLs;
        // the rest rotate the remaining sensitivities and get group ACLs.
        let sensitivity = if i < 20 {
            "Restricted"
        } else {
            ["Internal", "Public", "Sensitive"][i % 3]
        };
        let attributes = [
            ("sensitivity".to_string(), sensitivity.to_string()),
            ("type".to_string(), DAC_TYPES[i % DAC_TYPES.len()].to_string()),
        ]
        .into();
        resources.insert(id.clone(), Entity::new(id.clone(), attributes));

        let mut ops: BTreeMap<String, std::collections::BTreeSet<String>> = BTreeMap::new();
        if i < 20 {
            // Individual grants: one to three users, never both twins.
            let count = 1 + rng.gen_range(0..3);
            let mut granted = std::collections::BTreeSet::new();
            while granted.len() < count {
                let candidate = user_ids[rng.gen_range(0..user_ids.len())].clone();
                if dac_twin_id(&candidate).map_or(true, |t| !granted.contains(&t)) {
                    granted.insert(candidate);
                }
            }
            let op = if rng.gen::<bool>() { "read" } else { "write" };
            ops.insert(op.to_string(), granted);
        } else if i < 40 {
            // Department-wide read access.
            let dept = DEPARTMENTS[i % DEPARTMENTS.len()];
            ops.insert("read".to_string(), by_dept(dept).into_iter().collect());
        } else if i < 50 {
            // Designation-wide read access.
            let role = &roles[rng.gen_range(0..DAC_ROLES)];
            let granted = users
                .values()
                .filter(|u| &u.attributes["designation"] == role)
                .map(|u| u.id.clone())
                .collect();
            ops.insert("read".to_string(), granted);
        } else {
            // Department members plus one or two individual outsiders, both ops.
            let dept = DEPARTMENTS[i % DEPARTMENTS.len()];
            let mut granted: std::collections::BTreeSet<String> =
                by_dept(dept).into_iter().collect();
            for _ in 0..(1 + rng.gen_range(0..2)) {
                granted.insert(user_ids[rng.gen_range(0..user_ids.len())].clone());
            }
            ops.insert("read".to_string(), granted.clone());
            ops.insert("write".to_string(), granted);
        }
        acl.insert(id, ops);
    }

    // Discretionary one-off grants on Restricted objects.
    for _ in 0..config.discretionary_grants {
        let obj = format!("doc{:02}", rng.gen_range(0..20));
        let user = user_ids[rng.gen_range(0..user_ids.len())].clone();
        let op = if rng.gen::<bool>() { "read" } else { "write" };
        acl.get_mut(&obj).unwrap().entry(op.to_string()).or_default().insert(user);
    }

    DacOrg { users, resources, schema, acl }
}

/// Generates a DAC access log with an exact Allow/Deny split. Deny entries
/// mix twin probes on Restricted objects with uniform rejected attempts.
pub fn generate_dac_logs(org: &DacOrg, config: &DacConfig) -> Vec<LogEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed ^ 0x5851_f42d_4c95_7f2d);
    let user_ids: Vec<&String> = org.users.keys().collect();
    let mut grants: Vec<(String, String, String)> = Vec::new();
    for (obj, ops) in &org.acl {
        for (op, granted) in ops {
            for user in granted {
                grants.push((user.clone(), obj.clone(), op.clone()));
            }
        }
    }
    assert!(!grants.is_empty());

    let n_allow = ((config.allow_ratio * config.log_size as f64).round() as usize)
        .min(config.log_size);
    let n_deny = config.log_size - n_allow;
    let n_probe = (config.probe_fraction * n_deny as f64).round() as usize;

    let mut entries: Vec<(String, String, String, Decision)> = Vec::new();
    for _ in 0..n_allow {
        let (u, o, op) = grants[rng.gen_range(0..grants.len())].clone();
        entries.push((u, o, op, Decision::Allow));
    }

    let restricted_allows: Vec<usize> = entries
        .iter()
        .enumerate()
        .filter(|(_, (_, o, _, _))| org.resources[o].attributes["sensitivity"] == "Restricted")
        .map(|(i, _)| i)
        .collect();
    let uniform_deny = |rng: &mut ChaCha8Rng| -> (String, String, String) {
        loop {
            let u = user_ids[rng.gen_range(0..user_ids.len())].clone();
            let o = format!("doc{:02}", rng.gen_range(0..DAC_OBJECTS));
            let op = if rng.gen::<bool>() { "read" } else { "write" };
            if !org.granted(&u, &o, op) {
                return (u, o, op.to_string());
            }
        }
    };
    for d in 0..n_deny {
        let probe = d < n_probe && !restricted_allows.is_empty();
        let mut placed = false;
        if probe {
            for _ in 0..32 {
                let src = restricted_allows[rng.gen_range(0..restricted_allows.len())];
                let (u, o, op, _) = entries[src].clone();
                let Some(twin) = dac_twin_id(&u) else { continue };
                if !org.granted(&twin, &o, &op) {
                    entries.push((twin, o, op, Decision::Deny));
                    placed = true;
                    break;
                }
            }
        }
        if !placed {
            let (u, o, op) = uniform_deny(&mut rng);
            entries.push((u, o, op, Decision::Deny));
        }
    }

    entries.shuffle(&mut rng);
    entries
        .into_iter()
        .enumerate()
        .map(|(k, (u, o, op, decision))| LogEntry {
            user_id: u,
            resource_id: o,
            operation: op,
            timestamp: timestamp(k),
            decision,
        })
        .collect()
}

// ---------------------------------------------------------------------------
// File emission
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputFormat {
    /// `<id key:value ...>` wrapped records, space separated.
    AngleKeyValue,
    /// Comma-separated positional records, attributes in sorted-name order.
    Csv,
    /// Pipe-separated `key:value` records.
    PipeKeyValue,
}

fn format_entity(entity: &Entity, format: OutputFormat) -> String {
    match format {
        OutputFormat::AngleKeyValue => {
            let attrs: Vec<String> =
                entity.attributes.iter().map(|(k, v)| format!("{k}:{v}")).collect();
            format!("<{} {}>", entity.id, attrs.join(" "))
        }
        OutputFormat::Csv => {
            let mut fields = vec![entity.id.clone()];
            fields.extend(entity.attributes.values().cloned());
            fields.join(",")
        }
        OutputFormat::PipeKeyValue => {
            let mut fields = vec![entity.id.clone()];
            fields.extend(entity.attributes.iter().map(|(k, v)| format!("{k}:{v}")));
            fields.join("|")
        }
    }
}

fn format_log(entry: &LogEntry, format: OutputFormat) -> String {
    let fields = [
        entry.user_id.as_str(),
        entry.resource_id.as_str(),
        entry.operation.as_str(),
        entry.timestamp.as_str(),
        entry.decision.as_str(),
    ];
    match format {
        OutputFormat::AngleKeyValue => format!("<{}>", fields.join(" ")),
        OutputFormat::Csv => fields.join(","),
        OutputFormat::PipeKeyValue => fields.join("|"),
    }
}

/// Writes `users.txt`, `resources.txt`, and `logs.txt` into `dir` and returns
/// their paths.
pub fn emit_dataset(
    dir: &Path,
    users: &BTreeMap<String, Entity>,
    resources: &BTreeMap<String, Entity>,
    logs: &[LogEntry],
    format: OutputFormat,
) -> Result<(PathBuf, PathBuf, PathBuf), GenError> {
    let io_err = |path: &Path, source| GenError::Io { path: path.to_path_buf(), source };
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let write_lines = |name: &str, lines: Vec<String>| -> Result<PathBuf, GenError> {
        let path = dir.join(name);
        let mut file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        for line in lines {
            writeln!(file, "{line}").map_err(|e| io_err(&path, e))?;
        }
        Ok(path)
    };
    let users_path =
        write_lines("users.txt", users.values().map(|u| format_entity(u, format)).collect())?;
    let resources_path = write_lines(
        "resources.txt",
        resources.values().map(|r| format_entity(r, format)).collect(),
    )?;
    let logs_path =
        write_lines("logs.txt", logs.iter().map(|e| format_log(e, format)).collect())?;
    Ok((users_path, resources_path, logs_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{wsc, Dataset};

    #[test]
    fn ground_truth_parses_and_validates() {
        for (variant, expected) in
            [(AbacVariant::U2O2, 6), (AbacVariant::U3O2, 9), (AbacVariant::U4O5, 12)]
        {
            let policy = ground_truth_policy(variant);
            assert_eq!(policy.rules.len(), expected, "{}", variant.label());
            for rule in &policy.rules {
                rule.validate(&policy.schema).unwrap();
            }
        }
    }

    #[test]
    fn ground_truth_wsc_spot_checks() {
        let policy = ground_truth_policy(AbacVariant::U4O5);
        // Constraint rule: 3 user values + 1 op + 1 constraint.
        let ownership = policy
            .rules
            .iter()
            .find(|r| r.constraints.contains(&("department".into(), "owner_dept".into())))
            .unwrap();
        assert_eq!(wsc(ownership), 5);
        let regional = policy
            .rules
            .iter()
            .find(|r| r.constraints.contains(&("region".into(), "region".into())))
            .unwrap();
        assert_eq!(wsc(regional), 4);
    }

    #[test]
    fn abac_org_shapes_follow_config() {
        let config = GenConfig { num_users: 12, num_resources: 7, ..Default::default() };
        let org = generate_abac_org(&config).unwrap();
        assert_eq!(org.users.len(), 12);
        assert_eq!(org.resources.len(), 7);
        for user in org.users.values() {
            user.validate(&org.schema, crate::model::Side::User).unwrap();
        }
        for resource in org.resources.values() {
            resource.validate(&org.schema, crate::model::Side::Resource).unwrap();
        }
    }

    #[test]
    fn abac_variant_narrows_entity_attributes() {
        let config = GenConfig { variant: AbacVariant::U2O2, ..Default::default() };
        let org = generate_abac_org(&config).unwrap();
        let user = org.users.values().next().unwrap();
        assert_eq!(user.attributes.len(), 2);
        let resource = org.resources.values().next().unwrap();
        assert_eq!(resource.attributes.len(), 2);
    }

    #[test]
    fn abac_log_labels_agree_with_ground_truth() {
        let config = GenConfig { log_size: 400, ..Default::default() };
        let org = generate_abac_org(&config).unwrap();
        let logs = generate_abac_logs(&org, &config).unwrap();
        assert_eq!(logs.len(), 400);
        for entry in &logs {
            let allowed = org
                .ground_truth
                .rules
                .iter()
                .any(|rule| {
                    rule_matches(
                        rule,
                        &org.users[&entry.user_id],
                        &org.resources[&entry.resource_id],
                        &entry.operation,
                    )
                    .unwrap()
                });
            assert_eq!(allowed, entry.decision == Decision::Allow);
        }
    }

    #[test]
    fn abac_deny_fraction_is_small_but_present() {
        let config = GenConfig { log_size: 2000, ..Default::default() };
        let org = generate_abac_org(&config).unwrap();
        let logs = generate_abac_logs(&org, &config).unwrap();
        let denies = logs.iter().filter(|e| e.decision == Decision::Deny).count();
        assert!(denies > 0, "expected some sampled Deny entries");
        assert!((denies as f64) < 0.05 * logs.len() as f64, "deny fraction too high: {denies}");
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let config = GenConfig { log_size: 150, rng_seed: 42, ..Default::default() };
        let a = generate_abac_logs(&generate_abac_org(&config).unwrap(), &config).unwrap();
        let b = generate_abac_logs(&generate_abac_org(&config).unwrap(), &config).unwrap();
        assert_eq!(a, b);
        let other = GenConfig { rng_seed: 43, ..config };
        let c = generate_abac_logs(&generate_abac_org(&other).unwrap(), &other).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn dac_org_has_twins_and_fixed_shape() {
        let org = generate_dac_org(&DacConfig::default());
        assert_eq!(org.users.len(), DAC_USERS);
        assert_eq!(org.resources.len(), DAC_OBJECTS);
        for user in org.users.values() {
            let twin = dac_twin_id(&user.id).unwrap();
            assert_ne!(twin, user.id);
            assert_eq!(org.users[&twin].attributes, user.attributes);
        }
    }

    #[test]
    fn dac_log_split_is_exact_and_label_correct() {
        let config = DacConfig { log_size: 1000, ..Default::default() };
        let org = generate_dac_org(&config);
        let logs = generate_dac_logs(&org, &config);
        assert_eq!(logs.len(), 1000);
        let allows = logs.iter().filter(|e| e.decision == Decision::Allow).count();
        assert_eq!(allows, 900);
        for entry in &logs {
            assert_eq!(
                org.granted(&entry.user_id, &entry.resource_id, &entry.operation),
                entry.decision == Decision::Allow,
            );
        }
    }

    #[test]
    fn dac_logs_resist_full_coverage() {
        let config = DacConfig { log_size: 1000, rng_seed: 1, ..Default::default() };
        let org = generate_dac_org(&config);
        let logs = generate_dac_logs(&org, &config);
        let data = Dataset { users: org.users.clone(), resources: org.resources.clone(), logs };
        let (_, report) =
            crate::miner::mine_policy(&data, &org.schema, &crate::miner::MinerConfig::default())
                .unwrap();
        assert!(report.coverage_percent < 100.0);
        assert!(report.coverage_percent > 60.0, "coverage collapsed: {}", report.coverage_percent);
        assert_eq!(report.over_permissions, 0);
    }

    #[test]
    fn emitted_dataset_round_trips_through_parser() {
        let config = GenConfig { log_size: 120, num_users: 10, num_resources: 8, ..Default::default() };
        let org = generate_abac_org(&config).unwrap();
        let logs = generate_abac_logs(&org, &config).unwrap();
        for format in [OutputFormat::AngleKeyValue, OutputFormat::Csv, OutputFormat::PipeKeyValue] {
            let dir = tempfile::tempdir().unwrap();
            let (u, r, l) =
                emit_dataset(dir.path(), &org.users, &org.resources, &logs, format).unwrap();
            let order: Vec<String> =
                org.users.values().next().unwrap().attributes.keys().cloned().collect();
            let res_order: Vec<String> =
                org.resources.values().next().unwrap().attributes.keys().cloned().collect();
            let (data, report) =
                crate::parse::load_dataset(&u, &r, &l, 20, Some(&order), Some(&res_order))
                    .unwrap();
            assert!(report.warnings.is_empty(), "{format:?}: {:?}", report.warnings);
            assert_eq!(data.users, org.users, "{format:?}");
            assert_eq!(data.resources, org.resources, "{format:?}");
            assert_eq!(data.logs, logs, "{format:?}");
        }
    }
}
