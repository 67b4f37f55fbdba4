//! Symbolic policy analysis: collect boolean-valued external call sites,
//! enumerate their truth assignments, compute the reachable action set and
//! check safety implications.
//!
//! Sites are syntactic and assignments treat them as independent even when
//! their values are numerically correlated, so the reachable set is a sound
//! over-approximation.

use crate::contexts::ContextEnv;
use crate::diag::{Diag, ErrorCode, Result};
use crate::eval::{self, ExternalMode, Machine, DEFAULT_FUEL};
use crate::kernel::{self, Category, SpineArg, Term};
use crate::runtime::{extract_action, ActionRecord};
use crate::syntax::Name;
use crate::typing;

/// Default cap on enumerated sites (2^n rows).
pub const DEFAULT_MAX_SITES: usize = 20;

/// A syntactically distinct boolean-valued external call occurrence.
#[derive(Debug, Clone)]
pub struct PredicateSite {
    pub id: usize,
    /// Canonical printed form of the call as written.
    pub key: String,
    /// Normalized form used for alpha-deduplication.
    normal: Term,
}

#[derive(Debug, Clone)]
pub struct ReachRow {
    /// Truth value per site, indexed by site id.
    pub assignment: Vec<bool>,
    pub action: ActionRecord,
}

#[derive(Debug, Clone)]
pub struct ReachabilityReport {
    /// Binders stripped off a function policy; their variables appear
    /// symbolically in site keys and actions.
    pub binders: Vec<Name>,
    pub sites: Vec<PredicateSite>,
    pub rows: Vec<ReachRow>,
    pub reachable: Vec<ActionRecord>,
}

impl ReachabilityReport {
    /// Row assignment rendered as `TF...` in site order.
    pub fn assignment_str(assignment: &[bool]) -> String {
        assignment.iter().map(|b| if *b { 'T' } else { 'F' }).collect()
    }
}

/// Unfold a top-level definition reference and strip leading term binders.
fn open_policy(env: &ContextEnv, policy: &Term) -> (Vec<Name>, Term) {
    let mut binders = Vec::new();
    let mut t = policy.clone();
    for _ in 0..256 {
        match t {
            Term::DefRef(ref n) => match env.definitions.get(n) {
                Some(def) => t = def.term.clone(),
                None => break,
            },
            Term::TermAbs(x, body) => {
                binders.push(x);
                t = *body;
            }
            _ => break,
        }
    }
    (binders, t)
}

/// Is this term a fully-applied external call returning Bool?
fn predicate_spine(env: &ContextEnv, term: &Term) -> Option<()> {
    let (head, frames) = term.spine();
    let Term::ExternalRef(name) = head else {
        return None;
    };
    let (domains, codomain) = env.external_signature(name).ok()?;
    if frames.len() != domains.len() {
        return None;
    }
    if !frames.iter().all(|f| matches!(f, SpineArg::Term(_))) {
        return None;
    }
    let boolean = Category::Applied("Bool".into(), vec![]);
    typing::categories_equal(env, &codomain, &boolean).then_some(())
}

/// Collect predicate sites in first-occurrence order. Calls that are
/// alpha-equal after normalization share one site; non-Bool externals inside
/// a site's arguments fold into its key rather than becoming sites.
pub fn collect_predicate_sites(env: &ContextEnv, policy: &Term) -> Result<Vec<PredicateSite>> {
    let (_, body) = open_policy(env, policy);
    let mut sites = Vec::new();
    collect_sites_in(env, &body, &mut sites)?;
    Ok(sites)
}

fn collect_sites_in(
    env: &ContextEnv,
    term: &Term,
    sites: &mut Vec<PredicateSite>,
) -> Result<()> {
    if predicate_spine(env, term).is_some() {
        let normal = eval::normalize(env, term)?.into_term();
        if !sites.iter().any(|s| kernel::alpha_eq(&s.normal, &normal)) {
            sites.push(PredicateSite {
                id: sites.len(),
                key: term.to_string(),
                normal,
            });
        }
        return Ok(());
    }
    match term {
        Term::App(f, a) => {
            collect_sites_in(env, f, sites)?;
            collect_sites_in(env, a, sites)?;
        }
        Term::CatApp(f, _) => collect_sites_in(env, f, sites)?,
        Term::TermAbs(_, b) | Term::TypeAbs(_, b) => collect_sites_in(env, b, sites)?,
        _ => {}
    }
    Ok(())
}

fn substitute_sites(
    env: &ContextEnv,
    term: &Term,
    sites: &[PredicateSite],
    assignment: &[bool],
) -> Result<Term> {
    if predicate_spine(env, term).is_some() {
        let normal = eval::normalize(env, term)?.into_term();
        if let Some(site) = sites.iter().find(|s| kernel::alpha_eq(&s.normal, &normal)) {
            let name = if assignment[site.id] { "true" } else { "false" };
            return Ok(Term::DefRef(name.into()));
        }
    }
    Ok(match term {
        Term::App(f, a) => Term::app(
            substitute_sites(env, f, sites, assignment)?,
            substitute_sites(env, a, sites, assignment)?,
        ),
        Term::CatApp(f, c) => Term::cat_app(
            substitute_sites(env, f, sites, assignment)?,
            c.clone(),
        ),
        Term::TermAbs(x, b) => Term::TermAbs(
            x.clone(),
            Box::new(substitute_sites(env, b, sites, assignment)?),
        ),
        Term::TypeAbs(x, b) => Term::TypeAbs(
            x.clone(),
            Box::new(substitute_sites(env, b, sites, assignment)?),
        ),
        other => other.clone(),
    })
}

/// Enumerate all 2^n truth assignments of the policy's predicate sites.
/// Rows are ordered with `true` first, so row 0 is the all-true assignment.
pub fn enumerate_reachable(
    env: &ContextEnv,
    policy: &Term,
    max_sites: usize,
) -> Result<ReachabilityReport> {
    let (binders, body) = open_policy(env, policy);
    let mut sites = Vec::new();
    collect_sites_in(env, &body, &mut sites)?;
    let n = sites.len();
    if n > max_sites {
        return Err(Diag::new(
            ErrorCode::TooManySites,
            format!("policy has {n} predicate sites, bound is {max_sites}"),
        ));
    }
    let mut rows = Vec::with_capacity(1 << n);
    let mut reachable: Vec<ActionRecord> = Vec::new();
    for row_idx in 0..(1usize << n) {
        let assignment: Vec<bool> = (0..n).map(|j| (row_idx >> (n - 1 - j)) & 1 == 0).collect();
        let substituted = substitute_sites(env, &body, &sites, &assignment)?;
        let mut machine = Machine {
            env,
            fuel: DEFAULT_FUEL,
            mode: ExternalMode::Inert,
        };
        let head = machine.whnf(substituted)?;
        let action = extract_action(&mut machine, head, true)?;
        if !reachable.contains(&action) {
            reachable.push(action.clone());
        }
        rows.push(ReachRow { assignment, action });
    }
    Ok(ReachabilityReport {
        binders,
        sites,
        rows,
        reachable,
    })
}

/// An implication: whenever the selected action matches the pattern, the
/// listed site literals must hold.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyProperty {
    pub text: String,
    pub action_head: Name,
    pub action_args: Vec<String>,
    pub requires: Vec<(String, bool)>,
}

/// Parse `<action-head> [<atom>...] => <site-key>=true[, <site-key>=false...]`.
pub fn parse_property(text: &str) -> Result<SafetyProperty> {
    let malformed = |why: &str| {
        Diag::new(
            ErrorCode::UnexpectedToken,
            format!("malformed safety property: {why}"),
        )
    };
    let (lhs, rhs) = text
        .split_once("=>")
        .ok_or_else(|| malformed("missing `=>`"))?;
    let mut lhs_words = lhs.split_whitespace();
    let action_head = lhs_words
        .next()
        .ok_or_else(|| malformed("missing action head"))?
        .to_string();
    let action_args: Vec<String> = lhs_words.map(|w| w.to_string()).collect();
    let mut requires = Vec::new();
    for item in rhs.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let (key, value) = item
            .rsplit_once('=')
            .ok_or_else(|| malformed("literal must be `<site-key>=true|false`"))?;
        let value = match value.trim() {
            "true" => true,
            "false" => false,
            other => return Err(malformed(&format!("bad literal value `{other}`"))),
        };
        requires.push((key.trim().to_string(), value));
    }
    if requires.is_empty() {
        return Err(malformed("no required literals"));
    }
    Ok(SafetyProperty {
        text: text.trim().to_string(),
        action_head,
        action_args,
        requires,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Holds,
    /// Index of the first violating row in enumeration order.
    Counterexample(usize),
}

pub fn check_safety(report: &ReachabilityReport, prop: &SafetyProperty) -> Result<Verdict> {
    let mut site_indices = Vec::with_capacity(prop.requires.len());
    for (key, value) in &prop.requires {
        let site = report
            .sites
            .iter()
            .find(|s| &s.key == key)
            .ok_or_else(|| {
                Diag::new(
                    ErrorCode::UnknownSiteReference,
                    format!("no predicate site `{key}` in this policy"),
                )
            })?;
        site_indices.push((site.id, *value));
    }
    for (row_idx, row) in report.rows.iter().enumerate() {
        if !pattern_matches(&row.action, prop) {
            continue;
        }
        if site_indices
            .iter()
            .any(|(site, expected)| row.assignment[*site] != *expected)
        {
            return Ok(Verdict::Counterexample(row_idx));
        }
    }
    Ok(Verdict::Holds)
}

fn pattern_matches(action: &ActionRecord, prop: &SafetyProperty) -> bool {
    if action.head != prop.action_head || prop.action_args.len() > action.args.len() {
        return false;
    }
    prop.action_args
        .iter()
        .zip(action.args.iter())
        .all(|(pattern, arg)| pattern == &arg.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contexts::{core1, elaborate_context, ContextEnv};
    use crate::runtime::{run_policy, Scenario};
    use crate::syntax::{parse_context_file, parse_term, tokenize};
    use crate::value::HostValue;

    fn env_for(source: &str) -> ContextEnv {
        let parsed = parse_context_file(&tokenize(source).unwrap()).unwrap();
        elaborate_context(&parsed, &[core1()], &[]).unwrap()
    }

    fn policy() -> Term {
        Term::DefRef("policy".into())
    }

    #[test]
    fn thermostat_sites() {
        let env = env_for(crate::corpus::THERMOSTAT_SOURCE);
        let sites = collect_predicate_sites(&env, &policy()).unwrap();
        let keys: Vec<&str> = sites.iter().map(|s| s.key.as_str()).collect();
        assert_eq!(
            keys,
            [
                "gtTemp (tempSensor office celsius) (temp 23 celsius)",
                "ltTemp (tempSensor office celsius) (temp 20.5 celsius)",
            ]
        );
    }

    #[test]
    fn security_sites_deduplicate() {
        let env = env_for(crate::corpus::SECURITY_SOURCE);
        let sites = collect_predicate_sites(&env, &policy()).unwrap();
        let keys: Vec<&str> = sites.iter().map(|s| s.key.as_str()).collect();
        assert_eq!(keys, ["motionSensor living_room", "doorSensor front_door"]);
    }

    #[test]
    fn constant_policy_has_no_sites() {
        let env = env_for(crate::corpus::THERMOSTAT_SOURCE);
        let t = Term::ConstRef("maintainThermostat".into());
        assert!(collect_predicate_sites(&env, &t).unwrap().is_empty());
    }

    #[test]
    fn thermostat_reachability() {
        let env = env_for(crate::corpus::THERMOSTAT_SOURCE);
        let report = enumerate_reachable(&env, &policy(), DEFAULT_MAX_SITES).unwrap();
        assert_eq!(report.rows.len(), 4);
        let actions: Vec<String> = report.rows.iter().map(|r| r.action.to_string()).collect();
        assert_eq!(
            actions,
            [
                "lowerThermostat",
                "lowerThermostat",
                "raiseThermostat",
                "maintainThermostat"
            ]
        );
        assert_eq!(report.reachable.len(), 3);
    }

    #[test]
    fn medical_reachability() {
        let env = env_for(crate::corpus::MEDICAL_SOURCE);
        let report =
            enumerate_reachable(&env, &Term::DefRef("monitorPatient".into()), DEFAULT_MAX_SITES)
                .unwrap();
        assert_eq!(report.sites.len(), 3);
        assert_eq!(report.rows.len(), 8);
        let reachable: Vec<String> = report.reachable.iter().map(|a| a.to_string()).collect();
        assert_eq!(
            reachable,
            [
                "emergencyCall patient critical",
                "notifyNurse patient",
                "logVitals patient"
            ]
        );
    }

    #[test]
    fn ecommerce_reachability() {
        let env = env_for(crate::corpus::ECOMMERCE_SOURCE);
        let report = enumerate_reachable(
            &env,
            &Term::DefRef("recommendProduct".into()),
            DEFAULT_MAX_SITES,
        )
        .unwrap();
        assert_eq!(report.sites.len(), 2);
        assert_eq!(report.reachable.len(), 3);
        assert_eq!(report.binders, ["customer", "product"]);
    }

    #[test]
    fn safety_property_verdicts() {
        let env = env_for(crate::corpus::SECURITY_SOURCE);
        let report = enumerate_reachable(&env, &policy(), DEFAULT_MAX_SITES).unwrap();

        let holds = parse_property("alertSecurity high => doorSensor front_door=true").unwrap();
        assert_eq!(check_safety(&report, &holds).unwrap(), Verdict::Holds);

        let fails = parse_property("alertSecurity high => doorSensor front_door=false").unwrap();
        match check_safety(&report, &fails).unwrap() {
            Verdict::Counterexample(row) => {
                assert_eq!(report.rows[row].assignment, vec![true, true]);
            }
            Verdict::Holds => panic!("expected a counterexample"),
        }

        let vacuous = parse_property("doNothing high => doorSensor front_door=true").unwrap();
        assert_eq!(check_safety(&report, &vacuous).unwrap(), Verdict::Holds);

        let unknown = parse_property("alertSecurity high => fooBar=true").unwrap();
        let err = check_safety(&report, &unknown).unwrap_err();
        assert_eq!(err.code, ErrorCode::UnknownSiteReference);
    }

    #[test]
    fn analyzer_agrees_with_runtime_on_security() {
        let env = env_for(crate::corpus::SECURITY_SOURCE);
        let report = enumerate_reachable(&env, &policy(), DEFAULT_MAX_SITES).unwrap();
        let room = |n: &str| HostValue::Atom(n.into(), "Room".into());
        for row in &report.rows {
            let mut scenario = Scenario::empty("HomeSecurity");
            scenario.insert(
                "motionSensor",
                vec![room("living_room")],
                HostValue::Bool(row.assignment[0]),
            );
            scenario.insert(
                "doorSensor",
                vec![room("front_door")],
                HostValue::Bool(row.assignment[1]),
            );
            let trace = run_policy(&env, &scenario, &policy()).unwrap();
            assert_eq!(
                trace.selected.to_string(),
                row.action.to_string(),
                "assignment {:?}",
                row.assignment
            );
        }
    }

    #[test]
    fn reachable_set_over_approximates_scenario_runs() {
        // The two thermostat thresholds are numerically correlated; the
        // enumeration ignores that and must still cover every observed action.
        let env = env_for(crate::corpus::THERMOSTAT_SOURCE);
        let report = enumerate_reachable(&env, &policy(), DEFAULT_MAX_SITES).unwrap();
        let reachable: Vec<String> =
            report.reachable.iter().map(|a| a.to_string()).collect();
        for reading in ["25", "19", "21.5"] {
            let text = format!(
                r#"{{"context": "ThermostatControl", "responses": [
                    {{"external": "tempSensor", "args": [{{"atom": "office"}}, {{"atom": "celsius"}}],
                      "result": {{"pair": [{{"num": "{reading}"}}, {{"atom": "celsius"}}]}}}}]}}"#
            );
            let scenario = crate::runtime::parse_scenario(&env, &text).unwrap();
            let trace = run_policy(&env, &scenario, &policy()).unwrap();
            assert!(reachable.contains(&trace.selected.to_string()));
        }
    }

    #[test]
    fn site_bound_is_enforced() {
        let env = env_for(crate::corpus::MEDICAL_SOURCE);
        let err =
            enumerate_reachable(&env, &Term::DefRef("monitorPatient".into()), 2).unwrap_err();
        assert_eq!(err.code, ErrorCode::TooManySites);
    }

    #[test]
    fn term_policies_can_be_parsed_for_analysis() {
        let env = env_for(crate::corpus::THERMOSTAT_SOURCE);
        let t = env
            .elaborate_term(&parse_term(&tokenize("maintainThermostat").unwrap()).unwrap())
            .unwrap();
        let report = enumerate_reachable(&env, &t, DEFAULT_MAX_SITES).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.reachable[0].to_string(), "maintainThermostat");
    }
}
