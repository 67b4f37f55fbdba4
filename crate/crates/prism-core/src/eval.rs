//! Normal-order normalization of Church-encoded terms, and the bridge
//! between host values and normal forms.
//!
//! Reduction is leftmost-outermost: beta, category-beta (`(X | b)[C]`), and
//! lazy delta (definitions unfold only in demanded head positions), so the
//! untaken branch of a selector is never evaluated. The same machine powers
//! the pure evaluator and the scenario runtime; the runtime plugs in a mode
//! that resolves fully-applied data externals when reduction demands them.

use crate::contexts::ContextEnv;
use crate::diag::{Diag, ErrorCode, Result};
use crate::kernel::{self, Category, Term};
use crate::runtime::{ExternalCall, Scenario};

/// Step bound guarding nontermination.
pub const DEFAULT_FUEL: u64 = 100_000;

/// A term with no beta or bracket redex anywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalForm(Term);

impl NormalForm {
    pub fn term(&self) -> &Term {
        &self.0
    }

    pub fn into_term(self) -> Term {
        self.0
    }
}

impl std::fmt::Display for NormalForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

pub(crate) enum ExternalMode<'a> {
    /// Externals are inert neutrals (pure evaluation, analysis).
    Inert,
    /// Fully-applied data externals resolve against a scenario; every
    /// invocation is appended to `calls` in demand order.
    Scenario {
        scenario: &'a Scenario,
        calls: &'a mut Vec<ExternalCall>,
    },
}

pub(crate) struct Machine<'e, 'a> {
    pub env: &'e ContextEnv,
    pub fuel: u64,
    pub mode: ExternalMode<'a>,
}

enum Frame {
    App(Term),
    Cat(Category),
}

impl<'e, 'a> Machine<'e, 'a> {
    pub fn pure(env: &'e ContextEnv) -> Machine<'e, 'static> {
        Machine {
            env,
            fuel: DEFAULT_FUEL,
            mode: ExternalMode::Inert,
        }
    }

    fn spend(&mut self) -> Result<()> {
        if self.fuel == 0 {
            return Err(Diag::new(
                ErrorCode::FuelExhausted,
                "reduction exceeded the step bound",
            ));
        }
        self.fuel -= 1;
        Ok(())
    }

    /// Weak-head normal form. Externals in demanded positions are resolved
    /// when the mode allows it.
    pub fn whnf(&mut self, term: Term) -> Result<Term> {
        let mut head = term;
        let mut stack: Vec<Frame> = Vec::new();
        loop {
            head = match head {
                Term::App(f, a) => {
                    stack.push(Frame::App(*a));
                    *f
                }
                Term::CatApp(f, c) => {
                    stack.push(Frame::Cat(c));
                    *f
                }
                Term::TermAbs(x, body) => {
                    if matches!(stack.last(), Some(Frame::App(_))) {
                        let Some(Frame::App(arg)) = stack.pop() else {
                            unreachable!()
                        };
                        self.spend()?;
                        kernel::subst_term(&body, &x, &arg)
                    } else {
                        head = Term::TermAbs(x, body);
                        break;
                    }
                }
                Term::TypeAbs(x, body) => {
                    if matches!(stack.last(), Some(Frame::Cat(_))) {
                        let Some(Frame::Cat(cat)) = stack.pop() else {
                            unreachable!()
                        };
                        self.spend()?;
                        kernel::subst_cat_in_term(&body, &x, &cat)
                    } else {
                        head = Term::TypeAbs(x, body);
                        break;
                    }
                }
                Term::DefRef(name) => {
                    if stack.is_empty() {
                        // No demand on a bare definition name.
                        head = Term::DefRef(name);
                        break;
                    }
                    match self.env.definitions.get(&name) {
                        Some(def) => {
                            self.spend()?;
                            def.term.clone()
                        }
                        None => {
                            head = Term::DefRef(name);
                            break;
                        }
                    }
                }
                Term::ExternalRef(name) => match self.try_resolve_external(&name, &mut stack)? {
                    Some(next) => next,
                    None => {
                        head = Term::ExternalRef(name);
                        break;
                    }
                },
                other => {
                    head = other;
                    break;
                }
            };
        }
        let mut out = head;
        while let Some(frame) = stack.pop() {
            out = match frame {
                Frame::App(a) => Term::app(out, a),
                Frame::Cat(c) => Term::cat_app(out, c),
            };
        }
        Ok(out)
    }

    /// Full normal form: whnf, then recurse into abstraction bodies and the
    /// arguments of neutral spines.
    pub fn normalize_full(&mut self, term: Term) -> Result<Term> {
        let t = self.whnf(term)?;
        Ok(match t {
            Term::TermAbs(x, b) => Term::TermAbs(x, Box::new(self.normalize_full(*b)?)),
            Term::TypeAbs(x, b) => Term::TypeAbs(x, Box::new(self.normalize_full(*b)?)),
            Term::App(f, a) => Term::app(self.normalize_full(*f)?, self.normalize_full(*a)?),
            Term::CatApp(f, c) => Term::cat_app(self.normalize_full(*f)?, c),
            other => other,
        })
    }

    fn try_resolve_external(
        &mut self,
        name: &str,
        stack: &mut Vec<Frame>,
    ) -> Result<Option<Term>> {
        let scenario = match &self.mode {
            ExternalMode::Inert => return Ok(None),
            ExternalMode::Scenario { scenario, .. } => *scenario,
        };
        let (domains, codomain) = self.env.external_signature(name)?;
        // Role-typed externals denote actions: recorded, never executed.
        if self.env.is_action_category(&codomain) {
            return Ok(None);
        }
        let arity = domains.len();
        if stack.len() < arity {
            return Ok(None);
        }
        let frames = &stack[stack.len() - arity..];
        if !frames.iter().all(|f| matches!(f, Frame::App(_))) {
            return Ok(None);
        }
        let args: Vec<Term> = frames
            .iter()
            .rev()
            .map(|f| match f {
                Frame::App(t) => t.clone(),
                Frame::Cat(_) => unreachable!(),
            })
            .collect();
        // Arguments mentioning bound variables cannot be decoded; leave the
        // spine neutral (it is under an abstraction).
        if args
            .iter()
            .any(|a| !kernel::free_vars(a).terms.is_empty())
        {
            return Ok(None);
        }
        let mut values = Vec::with_capacity(arity);
        for (arg, domain) in args.iter().zip(domains.iter()) {
            values.push(self.decode_term(arg, domain)?);
        }
        let result = crate::runtime::resolve_call(self.env, scenario, name, &values)?;
        let encoded = encode_host(self.env, &result, &codomain)?;
        if let ExternalMode::Scenario { calls, .. } = &mut self.mode {
            calls.push(ExternalCall {
                external: name.to_string(),
                args: values,
                result,
            });
        }
        stack.truncate(stack.len() - arity);
        self.spend()?;
        Ok(Some(encoded))
    }

    /// Decode a closed term at an expected category, normalizing first.
    pub fn decode_term(
        &mut self,
        term: &Term,
        expected: &Category,
    ) -> Result<crate::value::HostValue> {
        use crate::value::HostValue;
        let mut t = self.normalize_full(term.clone())?;
        // Bare definition references stay folded under lazy delta; unfold
        // them for inspection.
        for _ in 0..64 {
            match &t {
                Term::DefRef(n) => match self.env.definitions.get(n) {
                    Some(def) => t = self.normalize_full(def.term.clone())?,
                    None => break,
                },
                _ => break,
            }
        }
        let not_decodable = |t: &Term| {
            Diag::new(
                ErrorCode::NotDecodable,
                format!("cannot decode `{t}` at category {expected}"),
            )
        };
        let shape = self.env.expand_deep(expected)?;
        if let Category::Base(base) = &shape {
            match base.as_str() {
                "Number" => {
                    return match t {
                        Term::Num(d) => Ok(HostValue::Num(d)),
                        other => Err(not_decodable(&other)),
                    };
                }
                "String" => {
                    return match t {
                        Term::Str(s) => Ok(HostValue::Text(s)),
                        other => Err(not_decodable(&other)),
                    };
                }
                _ => {}
            }
        }
        if self.env.is_bool_category(&shape) {
            for b in [true, false] {
                if kernel::alpha_eq(&t, &church_bool(b)) {
                    return Ok(HostValue::Bool(b));
                }
            }
            return Err(not_decodable(&t));
        }
        if let Some((left_cat, right_cat)) = self.env.as_pair_category(&shape) {
            // Apply the pair to a probe consumer and read the components off
            // the resulting neutral spine.
            let probed = Term::app(
                Term::cat_app(t.clone(), Category::base("_Probe")),
                Term::Var("_probe".into()),
            );
            let norm = self.normalize_full(probed)?;
            let (head, frames) = norm.spine();
            if matches!(head, Term::Var(n) if n == "_probe") && frames.len() == 2 {
                if let (kernel::SpineArg::Term(l), kernel::SpineArg::Term(r)) =
                    (frames[0], frames[1])
                {
                    return Ok(HostValue::pair(
                        self.decode_term(l, &left_cat)?,
                        self.decode_term(r, &right_cat)?,
                    ));
                }
            }
            return Err(not_decodable(&t));
        }
        match &shape {
            Category::Base(_) | Category::Role(_, _) => {
                let name = match &t {
                    Term::ConstRef(n) | Term::ExternalRef(n) => n.clone(),
                    other => return Err(not_decodable(other)),
                };
                let declared = self
                    .env
                    .atom_category(&name)
                    .ok_or_else(|| not_decodable(&t))?;
                if crate::typing::categories_equal(self.env, declared, expected)
                    || crate::typing::is_subtype(self.env, declared, expected)
                {
                    Ok(HostValue::Atom(name, declared.to_string()))
                } else {
                    Err(not_decodable(&t))
                }
            }
            _ => Err(Diag::new(
                ErrorCode::NotDecodable,
                format!("no decoder for category {expected}"),
            )),
        }
    }
}

/// Normalize under the default fuel bound with inert externals.
pub fn normalize(env: &ContextEnv, term: &Term) -> Result<NormalForm> {
    normalize_with_fuel(env, term, DEFAULT_FUEL)
}

pub fn normalize_with_fuel(env: &ContextEnv, term: &Term, fuel: u64) -> Result<NormalForm> {
    let mut machine = Machine {
        env,
        fuel,
        mode: ExternalMode::Inert,
    };
    Ok(NormalForm(machine.normalize_full(term.clone())?))
}

/// The canonical Church boolean terms.
pub fn church_bool(value: bool) -> Term {
    let selected = if value { "a" } else { "b" };
    Term::TypeAbs(
        "X".into(),
        Box::new(Term::TermAbs(
            "a".into(),
            Box::new(Term::TermAbs(
                "b".into(),
                Box::new(Term::Var(selected.into())),
            )),
        )),
    )
}

/// Encode a host value as a term of category `cat`.
pub fn encode_host(
    env: &ContextEnv,
    value: &crate::value::HostValue,
    cat: &Category,
) -> Result<Term> {
    use crate::value::HostValue;
    let mismatch = || {
        Diag::new(
            ErrorCode::ShapeMismatch,
            format!("value {value} is not representable at category {cat}"),
        )
    };
    match value {
        HostValue::Num(d) => {
            if base_is(env, cat, "Number") {
                Ok(Term::Num(*d))
            } else {
                Err(mismatch())
            }
        }
        HostValue::Text(s) => {
            if base_is(env, cat, "String") {
                Ok(Term::Str(s.clone()))
            } else {
                Err(mismatch())
            }
        }
        HostValue::Bool(b) => {
            if env.is_bool_category(cat) {
                Ok(church_bool(*b))
            } else {
                Err(mismatch())
            }
        }
        HostValue::Atom(name, _) => {
            let declared = env.atom_category(name).ok_or_else(mismatch)?;
            if !crate::typing::categories_equal(env, declared, cat)
                && !crate::typing::is_subtype(env, declared, cat)
            {
                return Err(mismatch());
            }
            if env.constants.contains_key(name) {
                Ok(Term::ConstRef(name.clone()))
            } else {
                Ok(Term::ExternalRef(name.clone()))
            }
        }
        HostValue::Pair(left, right) => {
            let (left_cat, right_cat) = env.as_pair_category(cat).ok_or_else(mismatch)?;
            let ctor = Term::cat_app(
                Term::cat_app(Term::DefRef("pair".into()), left_cat.clone()),
                right_cat.clone(),
            );
            Ok(Term::app(
                Term::app(ctor, encode_host(env, left, &left_cat)?),
                encode_host(env, right, &right_cat)?,
            ))
        }
    }
}

/// Decode a closed normal form of category `cat` back to a host value.
pub fn decode_host(
    env: &ContextEnv,
    nf: &NormalForm,
    cat: &Category,
) -> Result<crate::value::HostValue> {
    let mut machine = Machine::pure(env);
    machine.decode_term(nf.term(), cat)
}

fn base_is(env: &ContextEnv, cat: &Category, name: &str) -> bool {
    matches!(env.expand_head(cat), Ok(Category::Base(n)) if n == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contexts::{core1, elaborate_context};
    use crate::syntax::{parse_context_file, parse_term, tokenize};
    use crate::value::HostValue;

    fn thermostat() -> ContextEnv {
        let parsed =
            parse_context_file(&tokenize(crate::corpus::THERMOSTAT_SOURCE).unwrap()).unwrap();
        elaborate_context(&parsed, &[core1()], &[]).unwrap()
    }

    fn term_in(env: &ContextEnv, src: &str) -> Term {
        env.elaborate_term(&parse_term(&tokenize(src).unwrap()).unwrap())
            .unwrap()
    }

    fn norm(env: &ContextEnv, src: &str) -> Term {
        normalize(env, &term_in(env, src)).unwrap().into_term()
    }

    fn temperature(env: &ContextEnv) -> Category {
        env.expand_deep(&Category::Applied("Temperature".into(), vec![]))
            .unwrap()
    }

    #[test]
    fn boolean_combinators_normalize() {
        let env = core1();
        assert!(kernel::alpha_eq(
            &norm(env, "and true false"),
            &norm(env, "false")
        ));
        assert!(kernel::alpha_eq(&norm(env, "not false"), &norm(env, "true")));
        assert!(kernel::alpha_eq(
            &norm(env, "or false true"),
            &norm(env, "true")
        ));
    }

    #[test]
    fn exhaustive_truth_tables() {
        let env = core1();
        let boolean = Category::Applied("Bool".into(), vec![]);
        let lit = |b: bool| if b { "true" } else { "false" };
        for a in [true, false] {
            for b in [true, false] {
                for (op, expect) in [("and", a && b), ("or", a || b)] {
                    let t = norm(env, &format!("{op} {} {}", lit(a), lit(b)));
                    let v = decode_host(env, &NormalForm(t), &boolean).unwrap();
                    assert_eq!(v, HostValue::Bool(expect), "{op} {a} {b}");
                }
            }
            let t = norm(env, &format!("not {}", lit(a)));
            let v = decode_host(env, &NormalForm(t), &boolean).unwrap();
            assert_eq!(v, HostValue::Bool(!a), "not {a}");
        }
    }

    #[test]
    fn selector_picks_first_projection() {
        let env = thermostat();
        let t = norm(&env, "true[Action] lowerThermostat maintainThermostat");
        assert_eq!(t, Term::ExternalRef("lowerThermostat".into()));
        let t = norm(&env, "false[Action] lowerThermostat maintainThermostat");
        assert_eq!(t, Term::ConstRef("maintainThermostat".into()));
    }

    #[test]
    fn pair_beta_law_on_sample() {
        let env = thermostat();
        let lhs = norm(&env, "(pair[Number][Unit] 23 celsius)[Location] f");
        let rhs = norm(&env, "f 23 celsius");
        assert!(kernel::alpha_eq(&lhs, &rhs), "{lhs} vs {rhs}");
    }

    #[test]
    fn normalization_is_idempotent_on_samples() {
        let env = thermostat();
        for src in [
            "and true false",
            "temp 23 celsius",
            "X | a, b | a",
            "gtTemp (tempSensor office celsius) (temp 23 celsius)",
        ] {
            let once = norm(&env, src);
            let twice = normalize(&env, &once).unwrap().into_term();
            assert!(kernel::alpha_eq(&once, &twice), "{src}");
        }
    }

    #[test]
    fn encode_examples() {
        let env = thermostat();
        let temp_cat = temperature(&env);
        let v = HostValue::pair(
            HostValue::Num("23".parse().unwrap()),
            HostValue::Atom("celsius".into(), "Unit".into()),
        );
        let enc = encode_host(&env, &v, &temp_cat).unwrap();
        let enc_norm = normalize(&env, &enc).unwrap().into_term();
        assert!(kernel::alpha_eq(&enc_norm, &norm(&env, "temp 23 celsius")));

        let boolean = Category::Applied("Bool".into(), vec![]);
        let t = encode_host(&env, &HostValue::Bool(true), &boolean).unwrap();
        assert_eq!(t.to_string(), "X | a, b | a");

        let err = encode_host(&env, &HostValue::Num("5".parse().unwrap()), &temp_cat).unwrap_err();
        assert_eq!(err.code, ErrorCode::ShapeMismatch);
    }

    #[test]
    fn decode_examples() {
        let env = thermostat();
        let temp_cat = Category::Applied("Temperature".into(), vec![]);
        let nf = normalize(&env, &term_in(&env, "temp 23 celsius")).unwrap();
        let v = decode_host(&env, &nf, &temp_cat).unwrap();
        assert_eq!(
            v,
            HostValue::pair(
                HostValue::Num("23".parse().unwrap()),
                HostValue::Atom("celsius".into(), "Unit".into())
            )
        );

        let nf = normalize(&env, &term_in(&env, "false")).unwrap();
        let boolean = Category::Applied("Bool".into(), vec![]);
        assert_eq!(
            decode_host(&env, &nf, &boolean).unwrap(),
            HostValue::Bool(false)
        );

        let nf = normalize(&env, &term_in(&env, "tempSensor office celsius")).unwrap();
        let err = decode_host(&env, &nf, &temp_cat).unwrap_err();
        assert_eq!(err.code, ErrorCode::NotDecodable);
    }

    #[test]
    fn fuel_bound_reports_divergence() {
        // (x | x x) (x | x x) loops; the fuel bound must trip.
        let omega_half = Term::TermAbs(
            "x".into(),
            Box::new(Term::app(Term::Var("x".into()), Term::Var("x".into()))),
        );
        let omega = Term::app(omega_half.clone(), omega_half);
        let err = normalize_with_fuel(core1(), &omega, 1_000).unwrap_err();
        assert_eq!(err.code, ErrorCode::FuelExhausted);
    }
}
