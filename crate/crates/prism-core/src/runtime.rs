//! Policy execution against a scenario: external calls resolve to
//! scenario-supplied host results, comparison predicates are computed, and
//! the run produces the selected action plus an ordered trace.
//!
//! Action externals are recorded, never executed; the runtime's output is
//! the `ActionRecord`.

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::contexts::ContextEnv;
use crate::diag::{Diag, ErrorCode, Result};
use crate::eval::{ExternalMode, Machine, DEFAULT_FUEL};
use crate::kernel::{Category, SpineArg, Term};
use crate::syntax::Name;
use crate::value::{HostValue, ValueDoc};

/// A pure mapping from (external, arguments) to host results, used to mock
/// the environment deterministically.
#[derive(Debug, Clone, Default)]
pub struct Scenario {
    pub context: Name,
    pub description: Option<String>,
    responses: IndexMap<(Name, Vec<HostValue>), HostValue>,
}

impl Scenario {
    pub fn empty(context: impl Into<Name>) -> Scenario {
        Scenario {
            context: context.into(),
            description: None,
            responses: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, external: impl Into<Name>, args: Vec<HostValue>, result: HostValue) {
        self.responses.insert((external.into(), args), result);
    }

    pub fn lookup(&self, external: &str, args: &[HostValue]) -> Option<&HostValue> {
        self.responses.get(&(external.to_string(), args.to_vec()))
    }

    pub fn response_count(&self) -> usize {
        self.responses.len()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioDoc {
    context: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    #[serde(default)]
    responses: Vec<ResponseDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ResponseDoc {
    external: String,
    #[serde(default)]
    args: Vec<ValueDoc>,
    result: ValueDoc,
}

/// Parse and shape-check a scenario document against the context it names.
pub fn parse_scenario(env: &ContextEnv, text: &str) -> Result<Scenario> {
    let doc: ScenarioDoc = serde_json::from_str(text).map_err(|e| {
        Diag::new(ErrorCode::ScenarioParse, format!("bad scenario JSON: {e}"))
    })?;
    if doc.context != env.name {
        return Err(Diag::new(
            ErrorCode::ScenarioParse,
            format!(
                "scenario targets context {} but was loaded against {}",
                doc.context, env.name
            ),
        ));
    }
    let mut scenario = Scenario::empty(doc.context);
    scenario.description = doc.description;
    for response in &doc.responses {
        let (domains, codomain) = env.external_signature(&response.external)?;
        if response.args.len() != domains.len() {
            return Err(Diag::new(
                ErrorCode::ShapeMismatch,
                format!(
                    "external `{}` takes {} argument(s), scenario supplies {}",
                    response.external,
                    domains.len(),
                    response.args.len()
                ),
            ));
        }
        let args = response
            .args
            .iter()
            .zip(domains.iter())
            .map(|(doc, cat)| HostValue::from_doc(env, doc, cat))
            .collect::<Result<Vec<_>>>()?;
        let result = HostValue::from_doc(env, &response.result, &codomain)?;
        scenario.insert(response.external.clone(), args, result);
    }
    Ok(scenario)
}

pub fn load_scenario(env: &ContextEnv, path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Diag::new(
            ErrorCode::ScenarioParse,
            format!("cannot read {}: {e}", path.display()),
        )
    })?;
    parse_scenario(env, &text).map_err(|d| d.with_file(path.display().to_string()))
}

/// One resolved external invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalCall {
    pub external: Name,
    pub args: Vec<HostValue>,
    pub result: HostValue,
}

impl fmt::Display for ExternalCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.external)?;
        for (i, arg) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{arg}")?;
        }
        write!(f, ") -> {}", self.result)
    }
}

/// An action argument: decoded when closed, symbolic (pretty-printed) when
/// the analyzer runs a policy over free variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ActionArg {
    Value(HostValue),
    Symbolic(String),
}

impl fmt::Display for ActionArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionArg::Value(v) => write!(f, "{v}"),
            ActionArg::Symbolic(s) => f.write_str(s),
        }
    }
}

/// The selected action: a head whose category is a role extending `Tool`,
/// plus its arguments.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActionRecord {
    pub head: Name,
    pub args: Vec<ActionArg>,
}

impl fmt::Display for ActionRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.head)?;
        for arg in &self.args {
            write!(f, " {arg}")?;
        }
        Ok(())
    }
}

/// Ordered log of external invocations plus the selected action.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub calls: Vec<ExternalCall>,
    pub selected: ActionRecord,
}

impl Trace {
    /// The stable text rendering used by the CLI and the golden corpus.
    pub fn lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self.calls.iter().map(|c| format!("call: {c}")).collect();
        out.push(format!("action: {}", self.selected));
        out
    }
}

#[derive(Clone, Copy, Debug)]
enum BuiltinOp {
    Gt,
    Lt,
    Eq,
    Gte,
    Lte,
}

impl BuiltinOp {
    fn holds(self, ord: Ordering) -> bool {
        match self {
            BuiltinOp::Gt => ord == Ordering::Greater,
            BuiltinOp::Lt => ord == Ordering::Less,
            BuiltinOp::Eq => ord == Ordering::Equal,
            BuiltinOp::Gte => ord != Ordering::Less,
            BuiltinOp::Lte => ord != Ordering::Greater,
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum BuiltinShape {
    Number,
    UnitPair,
}

/// Comparison predicates are implemented by the runtime, not by scenarios:
/// plain numeric comparisons from the prelude, and the unit-tagged pair
/// comparisons of the bundled domains.
fn builtin(name: &str) -> Option<(BuiltinOp, BuiltinShape)> {
    match name {
        "gt" => Some((BuiltinOp::Gt, BuiltinShape::Number)),
        "lt" => Some((BuiltinOp::Lt, BuiltinShape::Number)),
        "eq" => Some((BuiltinOp::Eq, BuiltinShape::Number)),
        "gte" => Some((BuiltinOp::Gte, BuiltinShape::Number)),
        "lte" => Some((BuiltinOp::Lte, BuiltinShape::Number)),
        "gtTemp" => Some((BuiltinOp::Gt, BuiltinShape::UnitPair)),
        "ltTemp" => Some((BuiltinOp::Lt, BuiltinShape::UnitPair)),
        "gtVital" => Some((BuiltinOp::Gt, BuiltinShape::UnitPair)),
        _ => None,
    }
}

/// Compute a builtin or look the call up in the scenario.
pub(crate) fn resolve_call(
    _env: &ContextEnv,
    scenario: &Scenario,
    name: &str,
    args: &[HostValue],
) -> Result<HostValue> {
    if let Some((op, shape)) = builtin(name) {
        return compute_builtin(name, op, shape, args);
    }
    match scenario.lookup(name, args) {
        Some(result) => Ok(result.clone()),
        None => {
            let rendered: Vec<String> = args.iter().map(|a| a.to_string()).collect();
            Err(Diag::new(
                ErrorCode::UnboundExternalResult,
                format!("unbound external result: {name}({})", rendered.join(", ")),
            ))
        }
    }
}

fn compute_builtin(
    name: &str,
    op: BuiltinOp,
    shape: BuiltinShape,
    args: &[HostValue],
) -> Result<HostValue> {
    let bad_shape = || {
        Diag::new(
            ErrorCode::ShapeMismatch,
            format!("builtin `{name}` applied to unsupported arguments"),
        )
    };
    match shape {
        BuiltinShape::Number => match args {
            [HostValue::Num(a), HostValue::Num(b)] => Ok(HostValue::Bool(op.holds(a.cmp(b)))),
            _ => Err(bad_shape()),
        },
        BuiltinShape::UnitPair => match args {
            [HostValue::Pair(l1, r1), HostValue::Pair(l2, r2)] => {
                match (&**l1, &**r1, &**l2, &**r2) {
                    (
                        HostValue::Num(a),
                        HostValue::Atom(u1, _),
                        HostValue::Num(b),
                        HostValue::Atom(u2, _),
                    ) => {
                        if u1 != u2 {
                            return Err(Diag::new(
                                ErrorCode::UnitMismatch,
                                format!("unit mismatch: {u1} vs {u2}"),
                            ));
                        }
                        Ok(HostValue::Bool(op.holds(a.cmp(b))))
                    }
                    _ => Err(bad_shape()),
                }
            }
            _ => Err(bad_shape()),
        },
    }
}

/// Invoke one external directly: decode the argument terms, resolve, and
/// re-encode the result at the declared codomain.
pub fn invoke_external(
    env: &ContextEnv,
    scenario: &Scenario,
    name: &str,
    args: &[Term],
) -> Result<(Term, Vec<ExternalCall>)> {
    let (domains, codomain) = env.external_signature(name)?;
    if args.len() != domains.len() {
        return Err(Diag::new(
            ErrorCode::ShapeMismatch,
            format!(
                "external `{name}` takes {} argument(s), got {}",
                domains.len(),
                args.len()
            ),
        ));
    }
    let mut calls = Vec::new();
    let mut machine = Machine {
        env,
        fuel: DEFAULT_FUEL,
        mode: ExternalMode::Scenario {
            scenario,
            calls: &mut calls,
        },
    };
    let mut values = Vec::with_capacity(args.len());
    for (arg, domain) in args.iter().zip(domains.iter()) {
        values.push(machine.decode_term(arg, domain)?);
    }
    let result = resolve_call(env, scenario, name, &values)?;
    let encoded = crate::eval::encode_host(env, &result, &codomain)?;
    calls.push(ExternalCall {
        external: name.to_string(),
        args: values,
        result,
    });
    Ok((encoded, calls))
}

/// Run a policy term to an action, interleaving normalization with external
/// resolution. The policy must be closed and of an action-role category.
pub fn run_policy(env: &ContextEnv, scenario: &Scenario, policy: &Term) -> Result<Trace> {
    run_policy_with_fuel(env, scenario, policy, DEFAULT_FUEL)
}

pub fn run_policy_with_fuel(
    env: &ContextEnv,
    scenario: &Scenario,
    policy: &Term,
    fuel: u64,
) -> Result<Trace> {
    let mut calls = Vec::new();
    let selected = {
        let mut machine = Machine {
            env,
            fuel,
            mode: ExternalMode::Scenario {
                scenario,
                calls: &mut calls,
            },
        };
        let head = machine.whnf(policy.clone())?;
        extract_action(&mut machine, head, false)?
    };
    Ok(Trace { calls, selected })
}

/// Read an action record off a weak-head normal form. With `allow_symbolic`,
/// arguments that cannot be decoded (open terms during analysis) are kept in
/// pretty-printed form.
pub(crate) fn extract_action(
    machine: &mut Machine<'_, '_>,
    term: Term,
    allow_symbolic: bool,
) -> Result<ActionRecord> {
    let env = machine.env;
    let mut t = term;
    for _ in 0..64 {
        match &t {
            Term::DefRef(n) => match env.definitions.get(n) {
                Some(def) => {
                    let body = def.term.clone();
                    t = machine.whnf(body)?;
                }
                None => break,
            },
            _ => break,
        }
    }
    let not_action = |detail: String| Diag::new(ErrorCode::NotAnAction, detail);
    let (head, frames) = t.spine();
    let (head_name, mut cat) = match head {
        Term::ConstRef(n) => (n.clone(), env.constants[n].clone()),
        Term::ExternalRef(n) => (n.clone(), env.externals[n].clone()),
        other => {
            return Err(not_action(format!(
                "policy result `{other}` is not an action"
            )));
        }
    };
    let mut typed_args: Vec<(Term, Category)> = Vec::new();
    for frame in &frames {
        let expanded = env.expand_head(&cat)?;
        match frame {
            SpineArg::Term(arg) => {
                let Category::Arrow(domain, codomain) = expanded else {
                    return Err(not_action(format!(
                        "`{head_name}` is applied to more arguments than its category allows"
                    )));
                };
                typed_args.push(((*arg).clone(), *domain));
                cat = *codomain;
            }
            SpineArg::Cat(c) => {
                let Category::Forall(x, body) = expanded else {
                    return Err(not_action(format!(
                        "`{head_name}` is not category-polymorphic"
                    )));
                };
                cat = crate::kernel::subst_cat_in_cat(&body, &x, c);
            }
        }
    }
    if !env.is_action_category(&cat) {
        return Err(not_action(format!(
            "`{t}` has category {cat}, which is not a role of Tool"
        )));
    }
    let mut args = Vec::with_capacity(typed_args.len());
    for (arg, domain) in typed_args {
        match machine.decode_term(&arg, &domain) {
            Ok(v) => args.push(ActionArg::Value(v)),
            Err(e) if allow_symbolic && e.code == ErrorCode::NotDecodable => {
                args.push(ActionArg::Symbolic(arg.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ActionRecord {
        head: head_name,
        args,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contexts::{core1, elaborate_context};
    use crate::kernel;
    use crate::syntax::{parse_context_file, parse_term, tokenize};

    fn env_for(source: &str) -> ContextEnv {
        let parsed = parse_context_file(&tokenize(source).unwrap()).unwrap();
        elaborate_context(&parsed, &[core1()], &[]).unwrap()
    }

    fn term_in(env: &ContextEnv, src: &str) -> Term {
        env.elaborate_term(&parse_term(&tokenize(src).unwrap()).unwrap())
            .unwrap()
    }

    fn thermostat_scenario(env: &ContextEnv, celsius_reading: &str) -> Scenario {
        let text = format!(
            r#"{{"context": "ThermostatControl", "responses": [
                {{"external": "tempSensor", "args": [{{"atom": "office"}}, {{"atom": "celsius"}}],
                  "result": {{"pair": [{{"num": "{celsius_reading}"}}, {{"atom": "celsius"}}]}}}}
            ]}}"#
        );
        parse_scenario(env, &text).unwrap()
    }

    #[test]
    fn scenario_loading_and_errors() {
        let env = env_for(crate::corpus::THERMOSTAT_SOURCE);
        let s = thermostat_scenario(&env, "25");
        assert_eq!(s.response_count(), 1);

        let unknown = r#"{"context": "ThermostatControl", "responses": [
            {"external": "fooSensor", "args": [], "result": {"num": "1"}}]}"#;
        let err = parse_scenario(&env, unknown).unwrap_err();
        assert_eq!(err.code, ErrorCode::UnknownExternal);

        let bad_shape = r#"{"context": "ThermostatControl", "responses": [
            {"external": "tempSensor", "args": [{"atom": "office"}, {"atom": "celsius"}],
             "result": {"num": "25"}}]}"#;
        let err = parse_scenario(&env, bad_shape).unwrap_err();
        assert_eq!(err.code, ErrorCode::ShapeMismatch);
    }

    #[test]
    fn invoke_builtin_comparisons() {
        let env = env_for(crate::corpus::THERMOSTAT_SOURCE);
        let scenario = Scenario::empty("ThermostatControl");
        let gt_args = [
            term_in(&env, "temp 25 celsius"),
            term_in(&env, "temp 23 celsius"),
        ];
        let (result, calls) = invoke_external(&env, &scenario, "gtTemp", &gt_args).unwrap();
        assert!(kernel::alpha_eq(&result, &crate::eval::church_bool(true)));
        assert_eq!(calls.len(), 1);
        assert_eq!(calls[0].result, HostValue::Bool(true));

        let mixed = [
            term_in(&env, "temp 75 fahrenheit"),
            term_in(&env, "temp 23 celsius"),
        ];
        let err = invoke_external(&env, &scenario, "gtTemp", &mixed).unwrap_err();
        assert_eq!(err.code, ErrorCode::UnitMismatch);

        let eq_args = [term_in(&env, "2"), term_in(&env, "2")];
        let (result, _) = invoke_external(core1(), &scenario, "eq", &eq_args).unwrap();
        assert!(kernel::alpha_eq(&result, &crate::eval::church_bool(true)));
    }

    #[test]
    fn invoke_scenario_external_round_trips() {
        let env = env_for(crate::corpus::THERMOSTAT_SOURCE);
        let scenario = thermostat_scenario(&env, "25");
        let args = [term_in(&env, "office"), term_in(&env, "celsius")];
        let (result, _) = invoke_external(&env, &scenario, "tempSensor", &args).unwrap();
        let expected = crate::eval::normalize(&env, &term_in(&env, "temp 25 celsius"))
            .unwrap()
            .into_term();
        let got = crate::eval::normalize(&env, &result).unwrap().into_term();
        assert!(kernel::alpha_eq(&got, &expected));
    }

    #[test]
    fn thermostat_branches() {
        let env = env_for(crate::corpus::THERMOSTAT_SOURCE);
        let policy = Term::DefRef("policy".into());
        for (reading, action, calls) in [
            ("25", "lowerThermostat", 2),
            ("19", "raiseThermostat", 4),
            ("21.5", "maintainThermostat", 4),
        ] {
            let scenario = thermostat_scenario(&env, reading);
            let trace = run_policy(&env, &scenario, &policy).unwrap();
            assert_eq!(trace.selected.to_string(), action, "at {reading}");
            assert_eq!(trace.calls.len(), calls, "at {reading}");
        }
    }

    #[test]
    fn hot_run_never_demands_the_cold_branch() {
        let env = env_for(crate::corpus::THERMOSTAT_SOURCE);
        let scenario = thermostat_scenario(&env, "25");
        let trace = run_policy(&env, &scenario, &Term::DefRef("policy".into())).unwrap();
        assert!(trace.calls.iter().all(|c| c.external != "ltTemp"));
        assert_eq!(
            trace
                .calls
                .iter()
                .filter(|c| c.external == "tempSensor")
                .count(),
            1
        );
    }

    #[test]
    fn unbound_external_is_reported() {
        let env = env_for(crate::corpus::THERMOSTAT_SOURCE);
        let scenario = Scenario::empty("ThermostatControl");
        let err = run_policy(&env, &scenario, &Term::DefRef("policy".into())).unwrap_err();
        assert_eq!(err.code, ErrorCode::UnboundExternalResult);
        assert!(err
            .message
            .contains("unbound external result: tempSensor(office, celsius)"));
    }

    fn security_scenario(env: &ContextEnv, motion: bool, door: bool) -> Scenario {
        let mut s = Scenario::empty("HomeSecurity");
        let room = |n: &str| HostValue::Atom(n.into(), "Room".into());
        s.insert(
            "motionSensor",
            vec![room("living_room")],
            HostValue::Bool(motion),
        );
        s.insert("doorSensor", vec![room("front_door")], HostValue::Bool(door));
        let _ = env;
        s
    }

    #[test]
    fn security_truth_table() {
        let env = env_for(crate::corpus::SECURITY_SOURCE);
        let policy = Term::DefRef("policy".into());
        let expectations = [
            (true, true, "alertSecurity high"),
            (true, false, "logEvent \"motion_detected\""),
            (false, true, "doNothing"),
            (false, false, "doNothing"),
        ];
        for (motion, door, expected) in expectations {
            let scenario = security_scenario(&env, motion, door);
            let trace = run_policy(&env, &scenario, &policy).unwrap();
            assert_eq!(
                trace.selected.to_string(),
                expected,
                "motion={motion} door={door}"
            );
        }
    }

    #[test]
    fn traces_are_deterministic() {
        let env = env_for(crate::corpus::SECURITY_SOURCE);
        let policy = Term::DefRef("policy".into());
        let scenario = security_scenario(&env, true, false);
        let a = run_policy(&env, &scenario, &policy).unwrap();
        let b = run_policy(&env, &scenario, &policy).unwrap();
        assert_eq!(a.lines(), b.lines());
    }

    #[test]
    fn non_action_results_are_rejected() {
        let env = env_for(crate::corpus::THERMOSTAT_SOURCE);
        let scenario = Scenario::empty("ThermostatControl");
        let t = term_in(&env, "temp 23 celsius");
        let err = run_policy(&env, &scenario, &t).unwrap_err();
        assert_eq!(err.code, ErrorCode::NotAnAction);
    }
}
