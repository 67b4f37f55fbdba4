//! Bundled golden assets: the prelude, the example contexts and policies,
//! scenario fixtures covering every policy branch, and the expected run
//! output for each case.

use crate::diag::Result;
use crate::kernel::Term;
use crate::loader::{load_contexts, LoadOptions, SourceFile};
use crate::runtime::{parse_scenario, run_policy};
use crate::syntax::{parse_term, tokenize};
use crate::{analyze, typing};

pub use crate::contexts::CORE1_SOURCE;

pub const THERMOSTAT_SOURCE: &str = include_str!("../../../corpus/thermostat.prism");
pub const SECURITY_SOURCE: &str = include_str!("../../../corpus/security.prism");
pub const ECOMMERCE_SOURCE: &str = include_str!("../../../corpus/ecommerce.prism");
pub const MEDICAL_SOURCE: &str = include_str!("../../../corpus/medical.prism");
pub const MEDICAL_PAPER_SOURCE: &str = include_str!("../../../corpus/medical_paper.prism");

#[derive(Debug, Clone, Copy)]
pub struct CorpusContext {
    pub file: &'static str,
    pub name: &'static str,
    pub source: &'static str,
}

/// The self-contained context files (the paper-exact medical variant needs
/// `--paper-exact` and is listed separately).
pub fn context_files() -> [CorpusContext; 5] {
    [
        CorpusContext {
            file: "core1.prism",
            name: "Core1",
            source: CORE1_SOURCE,
        },
        CorpusContext {
            file: "thermostat.prism",
            name: "ThermostatControl",
            source: THERMOSTAT_SOURCE,
        },
        CorpusContext {
            file: "security.prism",
            name: "HomeSecurity",
            source: SECURITY_SOURCE,
        },
        CorpusContext {
            file: "ecommerce.prism",
            name: "ECommerce",
            source: ECOMMERCE_SOURCE,
        },
        CorpusContext {
            file: "medical.prism",
            name: "MedicalAlert",
            source: MEDICAL_SOURCE,
        },
    ]
}

#[derive(Debug, Clone, Copy)]
pub struct GoldenCase {
    pub name: &'static str,
    pub context_file: &'static str,
    pub context_name: &'static str,
    /// Expression to run, as the CLI would receive it via `--expr`.
    pub expr: &'static str,
    /// The same policy invoked through named arguments (`--arg`), when the
    /// policy is a function.
    pub args: &'static [(&'static str, &'static str)],
    pub policy: &'static str,
    pub scenario_file: &'static str,
    pub scenario: &'static str,
    pub golden_file: &'static str,
    pub golden: &'static str,
    pub expected_action: &'static str,
    pub expected_calls: usize,
}

macro_rules! golden {
    ($name:literal, $ctx_file:literal, $ctx:literal, $expr:literal, $args:expr, $policy:literal,
     $scenario:literal, $action:literal, $calls:literal) => {
        GoldenCase {
            name: $name,
            context_file: $ctx_file,
            context_name: $ctx,
            expr: $expr,
            args: $args,
            policy: $policy,
            scenario_file: concat!("scenarios/", $scenario, ".json"),
            scenario: include_str!(concat!("../../../corpus/scenarios/", $scenario, ".json")),
            golden_file: concat!("golden/", $scenario, ".txt"),
            golden: include_str!(concat!("../../../corpus/golden/", $scenario, ".txt")),
            expected_action: $action,
            expected_calls: $calls,
        }
    };
}

pub fn golden_cases() -> Vec<GoldenCase> {
    vec![
        golden!(
            "thermostat hot",
            "thermostat.prism",
            "ThermostatControl",
            "policy",
            &[],
            "policy",
            "thermostat_hot",
            "lowerThermostat",
            2
        ),
        golden!(
            "thermostat cold",
            "thermostat.prism",
            "ThermostatControl",
            "policy",
            &[],
            "policy",
            "thermostat_cold",
            "raiseThermostat",
            4
        ),
        golden!(
            "thermostat mild",
            "thermostat.prism",
            "ThermostatControl",
            "policy",
            &[],
            "policy",
            "thermostat_mild",
            "maintainThermostat",
            4
        ),
        golden!(
            "security motion+door",
            "security.prism",
            "HomeSecurity",
            "policy",
            &[],
            "policy",
            "security_motion_door",
            "alertSecurity high",
            2
        ),
        golden!(
            "security motion only",
            "security.prism",
            "HomeSecurity",
            "policy",
            &[],
            "policy",
            "security_motion_only",
            "logEvent \"motion_detected\"",
            3
        ),
        golden!(
            "security door only",
            "security.prism",
            "HomeSecurity",
            "policy",
            &[],
            "policy",
            "security_door_only",
            "doNothing",
            2
        ),
        golden!(
            "security quiet",
            "security.prism",
            "HomeSecurity",
            "policy",
            &[],
            "policy",
            "security_quiet",
            "doNothing",
            2
        ),
        golden!(
            "ecommerce buy",
            "ecommerce.prism",
            "ECommerce",
            "recommendProduct alice deskLamp",
            &[("customer", "alice"), ("product", "deskLamp")],
            "recommendProduct",
            "ecommerce_buy",
            "recommend deskLamp",
            4
        ),
        golden!(
            "ecommerce out of stock",
            "ecommerce.prism",
            "ECommerce",
            "recommendProduct alice deskLamp",
            &[("customer", "alice"), ("product", "deskLamp")],
            "recommendProduct",
            "ecommerce_out_of_stock",
            "notifyOutOfStock",
            2
        ),
        golden!(
            "ecommerce pricey",
            "ecommerce.prism",
            "ECommerce",
            "recommendProduct alice deskLamp",
            &[("customer", "alice"), ("product", "deskLamp")],
            "recommendProduct",
            "ecommerce_pricey",
            "suggestAlt deskLamp",
            5
        ),
        golden!(
            "medical emergency",
            "medical.prism",
            "MedicalAlert",
            "monitorPatient patient1",
            &[("patient", "patient1")],
            "monitorPatient",
            "medical_emergency",
            "emergencyCall patient1 critical",
            2
        ),
        golden!(
            "medical nurse",
            "medical.prism",
            "MedicalAlert",
            "monitorPatient patient1",
            &[("patient", "patient1")],
            "monitorPatient",
            "medical_nurse",
            "notifyNurse patient1",
            6
        ),
        golden!(
            "medical normal",
            "medical.prism",
            "MedicalAlert",
            "monitorPatient patient1",
            &[("patient", "patient1")],
            "monitorPatient",
            "medical_normal",
            "logVitals patient1",
            6
        ),
    ]
}

#[derive(Debug, Clone, Copy)]
pub struct AnalyzerExpectation {
    pub context_file: &'static str,
    pub context_name: &'static str,
    pub policy: &'static str,
    pub sites: usize,
    pub rows: usize,
    pub reachable: usize,
}

pub fn analyzer_expectations() -> [AnalyzerExpectation; 4] {
    [
        AnalyzerExpectation {
            context_file: "thermostat.prism",
            context_name: "ThermostatControl",
            policy: "policy",
            sites: 2,
            rows: 4,
            reachable: 3,
        },
        AnalyzerExpectation {
            context_file: "security.prism",
            context_name: "HomeSecurity",
            policy: "policy",
            sites: 2,
            rows: 4,
            reachable: 3,
        },
        AnalyzerExpectation {
            context_file: "ecommerce.prism",
            context_name: "ECommerce",
            policy: "recommendProduct",
            sites: 2,
            rows: 4,
            reachable: 3,
        },
        AnalyzerExpectation {
            context_file: "medical.prism",
            context_name: "MedicalAlert",
            policy: "monitorPatient",
            sites: 3,
            rows: 8,
            reachable: 3,
        },
    ]
}

/// Categories the acceptance gate pins for the bundled policies.
pub fn expected_policy_categories() -> [(&'static str, &'static str, &'static str); 4] {
    [
        ("ThermostatControl", "policy", "Action"),
        ("HomeSecurity", "policy", "SecurityAction"),
        ("ECommerce", "recommendProduct", "Customer - Product - Recommendation"),
        ("MedicalAlert", "monitorPatient", "Patient - Response"),
    ]
}

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct CorpusReport {
    pub cases: Vec<CaseResult>,
}

impl CorpusReport {
    pub fn ok(&self) -> bool {
        self.cases.iter().all(|c| c.ok)
    }

    fn push(&mut self, name: impl Into<String>, outcome: Result<String>) {
        match outcome {
            Ok(detail) => self.cases.push(CaseResult {
                name: name.into(),
                ok: true,
                detail,
            }),
            Err(d) => self.cases.push(CaseResult {
                name: name.into(),
                ok: false,
                detail: d.rendered(),
            }),
        }
    }
}

fn env_for(file: &CorpusContext) -> Result<crate::contexts::ContextEnv> {
    let loaded = load_contexts(
        &[SourceFile::new(file.file, file.source)],
        &[],
        LoadOptions::default(),
    )?;
    Ok(loaded.env(file.name).expect("context present").clone())
}

/// Check + run + analyze every bundled case; any mismatch fails with a diff.
pub fn verify_corpus() -> CorpusReport {
    let mut report = CorpusReport::default();

    for ctx in context_files() {
        report.push(format!("check {}", ctx.file), {
            env_for(&ctx).map(|env| format!("{} declarations", env.own_decl_count))
        });
    }

    for (ctx_name, policy, expected) in expected_policy_categories() {
        let ctx = context_files()
            .into_iter()
            .find(|c| c.name == ctx_name)
            .unwrap();
        report.push(format!("category {ctx_name}.{policy}"), {
            env_for(&ctx).and_then(|env| {
                let def = env.definitions.get(policy).ok_or_else(|| {
                    crate::diag::Diag::new(
                        crate::diag::ErrorCode::NotFound,
                        format!("policy {policy} missing"),
                    )
                })?;
                let cat = def.category.clone().ok_or_else(|| {
                    crate::diag::Diag::new(
                        crate::diag::ErrorCode::CannotInfer,
                        format!("policy {policy} unconstrained"),
                    )
                })?;
                if cat.to_string() == expected {
                    Ok(cat.to_string())
                } else {
                    Err(crate::diag::Diag::new(
                        crate::diag::ErrorCode::ArgumentMismatch,
                        format!("expected {expected}, found {cat}"),
                    ))
                }
            })
        });
    }

    for case in golden_cases() {
        report.push(format!("run {}", case.name), run_case(&case));
    }

    for exp in analyzer_expectations() {
        let ctx = context_files()
            .into_iter()
            .find(|c| c.file == exp.context_file)
            .unwrap();
        report.push(format!("analyze {}::{}", exp.context_name, exp.policy), {
            env_for(&ctx).and_then(|env| {
                let reach = analyze::enumerate_reachable(
                    &env,
                    &Term::DefRef(exp.policy.into()),
                    analyze::DEFAULT_MAX_SITES,
                )?;
                let got = (reach.sites.len(), reach.rows.len(), reach.reachable.len());
                let want = (exp.sites, exp.rows, exp.reachable);
                if got == want {
                    Ok(format!(
                        "{} sites, {} rows, {} reachable",
                        got.0, got.1, got.2
                    ))
                } else {
                    Err(crate::diag::Diag::new(
                        crate::diag::ErrorCode::ArgumentMismatch,
                        format!("expected {want:?}, found {got:?}"),
                    ))
                }
            })
        });
    }

    report
}

fn run_case(case: &GoldenCase) -> Result<String> {
    let ctx = context_files()
        .into_iter()
        .find(|c| c.file == case.context_file)
        .unwrap();
    let env = env_for(&ctx)?;
    let scenario = parse_scenario(&env, case.scenario)?;
    let term = env.elaborate_term(&parse_term(&tokenize(case.expr)?)?)?;
    typing::infer(&env, &[], &term)?;
    let trace = run_policy(&env, &scenario, &term)?;
    let got_lines = trace.lines();
    let golden_lines: Vec<String> = case.golden.lines().map(|l| l.to_string()).collect();
    if got_lines != golden_lines {
        return Err(crate::diag::Diag::new(
            crate::diag::ErrorCode::ArgumentMismatch,
            format!(
                "golden mismatch for {}:\n  expected:\n    {}\n  got:\n    {}",
                case.golden_file,
                golden_lines.join("\n    "),
                got_lines.join("\n    ")
            ),
        ));
    }
    if trace.selected.to_string() != case.expected_action {
        return Err(crate::diag::Diag::new(
            crate::diag::ErrorCode::ArgumentMismatch,
            format!(
                "action mismatch: expected {}, got {}",
                case.expected_action, trace.selected
            ),
        ));
    }
    if trace.calls.len() != case.expected_calls {
        return Err(crate::diag::Diag::new(
            crate::diag::ErrorCode::ArgumentMismatch,
            format!(
                "trace length mismatch: expected {}, got {}",
                case.expected_calls,
                trace.calls.len()
            ),
        ));
    }
    Ok(format!("{} ({} calls)", trace.selected, trace.calls.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_corpus_passes() {
        let report = verify_corpus();
        for case in &report.cases {
            assert!(case.ok, "{}: {}", case.name, case.detail);
        }
        // 5 checks + 4 categories + 13 runs + 4 analyses
        assert_eq!(report.cases.len(), 26);
    }

    #[test]
    fn every_declared_action_is_reachable_in_some_golden_case() {
        let mut heads: Vec<String> = Vec::new();
        for case in golden_cases() {
            let action = case.expected_action.split_whitespace().next().unwrap();
            heads.push(action.to_string());
        }
        for expected in [
            "lowerThermostat",
            "raiseThermostat",
            "maintainThermostat",
            "alertSecurity",
            "logEvent",
            "doNothing",
            "recommend",
            "suggestAlt",
            "notifyOutOfStock",
            "emergencyCall",
            "notifyNurse",
            "logVitals",
        ] {
            assert!(heads.iter().any(|h| h == expected), "{expected} uncovered");
        }
    }
}
