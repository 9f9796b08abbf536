//! A small hand-built sample organization used by tests, docs, and the CLI
//! smoke path: four users, five resources, six Allow log entries, and a
//! two-rule reference policy covering five of the six.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    AbacRule, AttributeSchema, Dataset, Decision, Entity, LogEntry, Policy,
};

fn set<const N: usize>(values: [&str; N]) -> BTreeSet<String> {
    values.iter().map(|s| s.to_string()).collect()
}

pub fn sample_schema() -> AttributeSchema {
    AttributeSchema::new(
        vec![
            ("department".into(), set(["Finance", "Sales", "IT", "HR"])),
            ("designation".into(), set(["Manager", "System_Admin", "Generalist"])),
        ],
        vec![
            ("type".into(), set(["Financial", "Operational", "HR"])),
            ("sensitivity".into(), set(["Low", "Medium", "High"])),
        ],
    )
    .expect("sample schema is well-formed")
}

fn entity(id: &str, pairs: &[(&str, &str)]) -> (String, Entity) {
    let attributes: BTreeMap<String, String> =
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    (id.to_string(), Entity::new(id, attributes))
}

pub fn sample_dataset() -> Dataset {
    let users: BTreeMap<String, Entity> = [
        entity("morgan_finance_1", &[("department", "Finance"), ("designation", "Manager")]),
        entity("taylor_sales_0", &[("department", "Sales"), ("designation", "Manager")]),
        entity("alex_it_1", &[("department", "IT"), ("designation", "System_Admin")]),
        entity("jordan_hr_0", &[("department", "HR"), ("designation", "Generalist")]),
    ]
    .into();
    let resources: BTreeMap<String, Entity> = [
        entity("financial_low_0.xlsx", &[("type", "Financial"), ("sensitivity", "Low")]),
        entity("financial_medium_0.xlsx", &[("type", "Financial"), ("sensitivity", "Medium")]),
        entity("financial_high_0.xlsx", &[("type", "Financial"), ("sensitivity", "High")]),
        entity("operational_low_0.csv", &[("type", "Operational"), ("sensitivity", "Low")]),
        entity("hr_medium_1.pdf", &[("type", "HR"), ("sensitivity", "Medium")]),
    ]
    .into();
    let raw = [
        ("alex_it_1", "hr_medium_1.pdf", "05:21:48"),
        ("jordan_hr_0", "operational_low_0.csv", "05:22:33"),
        ("taylor_sales_0", "operational_low_0.csv", "05:21:11"),
        ("morgan_finance_1", "financial_low_0.xlsx", "05:21:46"),
        ("taylor_sales_0", "financial_medium_0.xlsx", "05:26:05"),
        ("alex_it_1", "financial_high_0.xlsx", "05:24:43"),
    ];
    let logs = raw
        .iter()
        .map(|(u, r, t)| LogEntry {
            user_id: u.to_string(),
            resource_id: r.to_string(),
            operation: "read".into(),
            timestamp: t.to_string(),
            decision: Decision::Allow,
        })
        .collect();
    Dataset { users, resources, logs }
}

/// The two-rule reference policy for the sample dataset (WSC 10 and 8).
pub fn sample_policy() -> Policy {
    let rule1 = AbacRule {
        user_expr: [
            ("department".to_string(), set(["IT", "Sales"])),
            ("designation".to_string(), set(["Manager", "System_Admin"])),
        ]
        .into(),
        resource_expr: [
            ("sensitivity".to_string(), set(["High", "Medium", "Low"])),
            ("type".to_string(), set(["HR", "Financial"])),
        ]
        .into(),
        operations: set(["read"]),
        constraints: BTreeSet::new(),
    };
    let rule2 = AbacRule {
        user_expr: [
            ("department".to_string(), set(["HR", "Sales"])),
            ("designation".to_string(), set(["Manager", "Generalist"])),
        ]
        .into(),
        resource_expr: [
            ("sensitivity".to_string(), set(["Low"])),
            ("type".to_string(), set(["Operational", "Financial"])),
        ]
        .into(),
        operations: set(["read"]),
        constraints: BTreeSet::new(),
    };
    Policy { rules: vec![rule1, rule2], schema: sample_schema() }
}

/// A random permit policy over the sample schema: non-empty value subsets,
/// one or two operations, and an occasional cross-attribute constraint.
/// Deterministic in `seed`.
pub fn random_policy(seed: u64, rule_count: usize) -> Policy {
    let schema = sample_schema();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subset = |domain: &BTreeSet<String>, rng: &mut ChaCha8Rng| -> BTreeSet<String> {
        let values: Vec<&String> = domain.iter().collect();
        let size = 1 + rng.gen_range(0..values.len());
        let mut picked = BTreeSet::new();
        while picked.len() < size {
            picked.insert(values[rng.gen_range(0..values.len())].clone());
        }
        picked
    };
    let mut rules = Vec::with_capacity(rule_count);
    for _ in 0..rule_count {
        let mut user_expr = BTreeMap::new();
        for (name, domain) in &schema.user_attributes {
            if rng.gen::<f64>() < 0.8 {
                user_expr.insert(name.clone(), subset(domain, &mut rng));
            }
        }
        let mut resource_expr = BTreeMap::new();
        for (name, domain) in &schema.resource_attributes {
            if rng.gen::<f64>() < 0.8 {
                resource_expr.insert(name.clone(), subset(domain, &mut rng));
            }
        }
        let mut operations = BTreeSet::from(["read".to_string()]);
        if rng.gen::<bool>() {
            operations.insert("write".to_string());
        }
        let mut constraints = BTreeSet::new();
        if rng.gen::<f64>() < 0.2 {
            let ua = &schema.user_attributes[rng.gen_range(0..schema.user_attributes.len())].0;
            let ra =
                &schema.resource_attributes[rng.gen_range(0..schema.resource_attributes.len())].0;
            constraints.insert((ua.clone(), ra.clone()));
        }
        rules.push(AbacRule { user_expr, resource_expr, operations, constraints });
    }
    Policy { rules, schema }
}

/// The sample users file in angle-bracket key:value format.
pub fn sample_users_text() -> &'static str {
    "<morgan_finance_1 department:Finance designation:Manager>\n\
     <taylor_sales_0 department:Sales designation:Manager>\n\
     <alex_it_1 department:IT designation:System_Admin>\n\
     <jordan_hr_0 department:HR designation:Generalist>\n"
}

pub fn sample_resources_text() -> &'static str {
    "<financial_low_0.xlsx type:Financial sensitivity:Low>\n\
     <financial_medium_0.xlsx type:Financial sensitivity:Medium>\n\
     <financial_high_0.xlsx type:Financial sensitivity:High>\n\
     <operational_low_0.csv type:Operational sensitivity:Low>\n\
     <hr_medium_1.pdf type:HR sensitivity:Medium>\n"
}

pub fn sample_logs_text() -> &'static str {
    "<alex_it_1 hr_medium_1.pdf read 05:21:48 Allow>\n\
     <jordan_hr_0 operational_low_0.csv read 05:22:33 Allow>\n\
     <taylor_sales_0 operational_low_0.csv read 05:21:11 Allow>\n\
     <morgan_finance_1 financial_low_0.xlsx read 05:21:46 Allow>\n\
     <taylor_sales_0 financial_medium_0.xlsx read 05:26:05 Allow>\n\
     <alex_it_1 financial_high_0.xlsx read 05:24:43 Allow>\n"
}

/// An executive summary of the sample policy, in the style the summarizer
/// targets. Used to test section parsing and the fidelity checker against a
/// human-written text.
pub fn sample_summary_text() -> &'static str {
    "This document provides a high-level overview of our corporate Data Access Control Policy.\n\
     #Access Principles\n\
     * Broad Read Access for Management: A key pattern indicates that users with managerial roles \
     (such as 'Manager' or 'System_Admin') in the IT and Sales departments have broad 'read' access \
     to a wide range of sensitive data, including 'HR' and 'Financial' documents of all sensitivity levels.\n\
     \n\
     * Focused Access for HR and Sales Staff: Another significant rule grants employees in the HR and \
     Sales departments, including roles like 'Manager' and 'Generalist', 'read' access to low-sensitivity \
     'Operational' and 'Financial' data. This appears to correspond to standard operational duties.\n\
     \n\
     Conclusion:\n\
     -----------\n\
     The mined policy reflects a clear distinction between the broad oversight permissions granted to \
     management and the more focused, operational permissions granted to other staff. No complex \
     cross-attribute constraints were discovered in this rule set.\n"
}
