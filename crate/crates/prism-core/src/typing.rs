//! Category checking with alias transparency, category-variable
//! instantiation and nominal role subtyping.
//!
//! Binders carry no annotations, so synthesis introduces metavariables for
//! them and solves by first-order unification against use sites. A
//! metavariable still unsolved when its enclosing category binder closes
//! defaults to that binder variable, which is what gives the bare Church
//! selectors their `X | X - X - X` shape. A definition whose category stays
//! underdetermined is deferred: it is unfolded and re-checked at each use.

use crate::contexts::ContextEnv;
use crate::diag::{Diag, ErrorCode, Result};
use crate::kernel::{self, Category, Term};
use crate::syntax::Name;

/// Ambient assumption for a free variable when inferring open terms.
#[derive(Debug, Clone)]
pub enum VarBinding {
    Term(Category),
    Category,
}

/// Principal category of `t` under `env` plus the given bindings.
pub fn infer(env: &ContextEnv, bindings: &[(Name, VarBinding)], t: &Term) -> Result<Category> {
    let mut checker = Checker::new(env);
    for (name, binding) in bindings {
        let entry = match binding {
            VarBinding::Term(cat) => Entry::Term(cat.clone()),
            VarBinding::Category => Entry::Category,
        };
        checker.scope.push((name.clone(), entry));
    }
    let cat = checker.infer_term(t)?;
    let cat = checker.resolve_deep(&cat);
    if contains_meta(&cat) {
        return Err(Diag::new(
            ErrorCode::CannotInfer,
            "polymorphic, unconstrained".to_string(),
        ));
    }
    Ok(cat)
}

/// Check `t` against an expected category.
pub fn check(env: &ContextEnv, t: &Term, expected: &Category) -> Result<()> {
    Checker::new(env).check_term(t, expected)
}

/// Structural equality after full alias expansion and alpha-renaming of
/// category variables.
pub fn categories_equal(env: &ContextEnv, a: &Category, b: &Category) -> bool {
    match (env.expand_deep(a), env.expand_deep(b)) {
        (Ok(ea), Ok(eb)) => kernel::alpha_eq_cat(&ea, &eb),
        _ => false,
    }
}

/// Reflexive-transitive closure of role edges on nominal categories;
/// arrows are invariant; aliases are expanded before comparison.
pub fn is_subtype(env: &ContextEnv, sub: &Category, sup: &Category) -> bool {
    if categories_equal(env, sub, sup) {
        return true;
    }
    if let Category::Role(name, _) = sub {
        if let Some(sup_name) = sup.nominal_name() {
            return env
                .role_ancestors(name)
                .iter()
                .any(|ancestor| *ancestor == sup_name);
        }
    }
    false
}

enum Entry {
    Term(Category),
    Category,
}

struct Checker<'e> {
    env: &'e ContextEnv,
    metas: Vec<Option<Category>>,
    scope: Vec<(Name, Entry)>,
}

impl<'e> Checker<'e> {
    fn new(env: &'e ContextEnv) -> Self {
        Checker {
            env,
            metas: Vec::new(),
            scope: Vec::new(),
        }
    }

    fn fresh_meta(&mut self) -> Category {
        self.metas.push(None);
        Category::Meta((self.metas.len() - 1) as u32)
    }

    /// Follow solved metas at the head.
    fn resolve(&self, cat: &Category) -> Category {
        let mut cur = cat.clone();
        while let Category::Meta(i) = cur {
            match &self.metas[i as usize] {
                Some(solution) => cur = solution.clone(),
                None => break,
            }
        }
        cur
    }

    fn resolve_deep(&self, cat: &Category) -> Category {
        let head = self.resolve(cat);
        match head {
            Category::Arrow(d, c) => {
                Category::arrow(self.resolve_deep(&d), self.resolve_deep(&c))
            }
            Category::Forall(x, b) => Category::Forall(x, Box::new(self.resolve_deep(&b))),
            Category::Applied(n, args) => {
                Category::Applied(n, args.iter().map(|a| self.resolve_deep(a)).collect())
            }
            other => other,
        }
    }

    fn occurs(&self, meta: u32, cat: &Category) -> bool {
        match self.resolve(cat) {
            Category::Meta(i) => i == meta,
            Category::Arrow(d, c) => self.occurs(meta, &d) || self.occurs(meta, &c),
            Category::Forall(_, b) => self.occurs(meta, &b),
            Category::Applied(_, args) => args.iter().any(|a| self.occurs(meta, a)),
            _ => false,
        }
    }

    fn unify(&mut self, a: &Category, b: &Category) -> bool {
        let a = self.resolve(a);
        let b = self.resolve(b);
        match (&a, &b) {
            (Category::Meta(i), Category::Meta(j)) if i == j => true,
            (Category::Meta(i), _) => {
                if self.occurs(*i, &b) {
                    return false;
                }
                self.metas[*i as usize] = Some(b);
                true
            }
            (_, Category::Meta(j)) => {
                if self.occurs(*j, &a) {
                    return false;
                }
                self.metas[*j as usize] = Some(a);
                true
            }
            (Category::Base(x), Category::Base(y)) => x == y,
            (Category::Var(x), Category::Var(y)) => x == y,
            (Category::Role(x, _), Category::Role(y, _)) => x == y,
            (Category::Arrow(d1, c1), Category::Arrow(d2, c2)) => {
                self.unify(d1, d2) && self.unify(c1, c2)
            }
            (Category::Forall(x, b1), Category::Forall(y, b2)) => {
                let renamed = kernel::subst_cat_in_cat(b2, y, &Category::Var(x.clone()));
                self.unify(b1, &renamed)
            }
            (Category::Applied(n1, a1), Category::Applied(n2, a2))
                if n1 == n2 && a1.len() == a2.len() =>
            {
                a1.iter().zip(a2.iter()).all(|(x, y)| {
                    let (x, y) = (x.clone(), y.clone());
                    self.unify(&x, &y)
                })
            }
            // Aliases are transparent: expand whichever side can make progress.
            (Category::Applied(_, _), _) => match self.env.expand_head(&a) {
                Ok(ea) if ea != a => self.unify(&ea, &b),
                _ => false,
            },
            (_, Category::Applied(_, _)) => match self.env.expand_head(&b) {
                Ok(eb) if eb != b => self.unify(&a, &eb),
                _ => false,
            },
            _ => false,
        }
    }

    fn lookup_scope(&self, name: &str) -> Option<&Entry> {
        self.scope
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, e)| e)
    }

    /// Body of a definition whose category is deferred to use sites.
    fn deferred_body(&self, t: &Term) -> Option<Term> {
        if let Term::DefRef(name) = t {
            if let Some(def) = self.env.definitions.get(name) {
                if def.category.is_none() {
                    return Some(def.term.clone());
                }
            }
        }
        None
    }

    fn infer_term(&mut self, t: &Term) -> Result<Category> {
        match t {
            Term::Var(name) => match self.lookup_scope(name) {
                Some(Entry::Term(cat)) => Ok(cat.clone()),
                Some(Entry::Category) => Err(Diag::new(
                    ErrorCode::CategoryAsTerm,
                    format!("category variable `{name}` used as a term"),
                )),
                None => Err(Diag::new(
                    ErrorCode::UnboundVariable,
                    format!("unbound variable `{name}`"),
                )),
            },
            Term::Num(_) => Ok(Category::base("Number")),
            Term::Str(_) => Ok(Category::base("String")),
            Term::ConstRef(name) => self
                .env
                .constants
                .get(name)
                .cloned()
                .ok_or_else(|| unbound(name)),
            Term::ExternalRef(name) => self
                .env
                .externals
                .get(name)
                .cloned()
                .ok_or_else(|| unbound(name)),
            Term::DefRef(name) => {
                let def = self
                    .env
                    .definitions
                    .get(name)
                    .ok_or_else(|| unbound(name))?;
                match &def.category {
                    Some(cat) => Ok(cat.clone()),
                    None => {
                        let body = def.term.clone();
                        self.infer_term(&body)
                    }
                }
            }
            Term::TermAbs(x, body) => {
                let domain = self.fresh_meta();
                self.scope.push((x.clone(), Entry::Term(domain.clone())));
                let codomain = self.infer_term(body);
                self.scope.pop();
                Ok(Category::arrow(self.resolve(&domain), codomain?))
            }
            Term::TypeAbs(x, body) => {
                let watermark = self.metas.len();
                self.scope.push((x.clone(), Entry::Category));
                let result = self.infer_term(body);
                self.scope.pop();
                let body_cat = result?;
                // Binders left unconstrained inside a category abstraction
                // default to the abstracted variable.
                for i in watermark..self.metas.len() {
                    if self.metas[i].is_none() {
                        self.metas[i] = Some(Category::Var(x.clone()));
                    }
                }
                Ok(Category::Forall(
                    x.clone(),
                    Box::new(self.resolve_deep(&body_cat)),
                ))
            }
            Term::App(fun, arg) => {
                if let Some(body) = self.deferred_body(fun) {
                    if let Term::TermAbs(x, abs_body) = body {
                        let reduced = kernel::subst_term(&abs_body, &x, arg);
                        return self.infer_term(&reduced);
                    }
                }
                let fun_cat = self.infer_term(fun)?;
                let (domain, codomain) = self.force_arrow(&fun_cat)?;
                self.check_term(arg, &domain)?;
                Ok(codomain)
            }
            Term::CatApp(head, cat) => {
                if let Some(body) = self.deferred_body(head) {
                    if let Term::TypeAbs(x, abs_body) = body {
                        let reduced = kernel::subst_cat_in_term(&abs_body, &x, cat);
                        return self.infer_term(&reduced);
                    }
                }
                let head_cat = self.infer_term(head)?;
                self.instantiate(&head_cat, cat)
            }
        }
    }

    fn force_arrow(&mut self, cat: &Category) -> Result<(Category, Category)> {
        let resolved = self.resolve(cat);
        if let Category::Meta(_) = resolved {
            let domain = self.fresh_meta();
            let codomain = self.fresh_meta();
            let arrow = Category::arrow(domain.clone(), codomain.clone());
            self.unify(&resolved, &arrow);
            return Ok((domain, codomain));
        }
        let expanded = self.env.expand_head(&resolved)?;
        match expanded {
            Category::Arrow(d, c) => Ok((*d, *c)),
            Category::Forall(_, _) => Err(Diag::new(
                ErrorCode::NotAFunction,
                format!("term of category {resolved} must be instantiated with `[...]` before application"),
            )),
            other => Err(Diag::new(
                ErrorCode::NotAFunction,
                format!("cannot apply a term of category {other}"),
            )),
        }
    }

    fn instantiate(&mut self, head_cat: &Category, arg: &Category) -> Result<Category> {
        let resolved = self.resolve(head_cat);
        if let Category::Meta(_) = resolved {
            return Err(Diag::new(
                ErrorCode::CannotInfer,
                "bracket applied to a term whose category is not yet determined",
            ));
        }
        let expanded = self.env.expand_head(&resolved)?;
        match expanded {
            Category::Forall(x, body) => Ok(kernel::subst_cat_in_cat(&body, &x, arg)),
            _ => Err(Diag::new(
                ErrorCode::NotPolymorphic,
                format!("bracket applied to non-polymorphic category {resolved}"),
            )),
        }
    }

    fn check_term(&mut self, t: &Term, expected: &Category) -> Result<()> {
        let expected_head = {
            let resolved = self.resolve(expected);
            match resolved {
                Category::Meta(_) => resolved,
                other => self.env.expand_head(&other)?,
            }
        };
        match (t, &expected_head) {
            (Term::TermAbs(x, body), Category::Arrow(domain, codomain)) => {
                self.scope
                    .push((x.clone(), Entry::Term((**domain).clone())));
                let result = self.check_term(body, codomain);
                self.scope.pop();
                result
            }
            (Term::TypeAbs(x, body), Category::Forall(y, inner)) => {
                let renamed = kernel::subst_cat_in_cat(inner, y, &Category::Var(x.clone()));
                self.scope.push((x.clone(), Entry::Category));
                let result = self.check_term(body, &renamed);
                self.scope.pop();
                result
            }
            _ => {
                let found = self.infer_term(t)?;
                self.subsume(&found, expected)
            }
        }
    }

    fn subsume(&mut self, found: &Category, expected: &Category) -> Result<()> {
        let found_r = self.resolve_deep(found);
        let expected_r = self.resolve_deep(expected);
        if contains_meta(&found_r) || contains_meta(&expected_r) {
            if self.unify(&found_r, &expected_r) {
                return Ok(());
            }
        } else if categories_equal(self.env, &found_r, &expected_r)
            || is_subtype(self.env, &found_r, &expected_r)
        {
            return Ok(());
        }
        Err(Diag::new(
            ErrorCode::ArgumentMismatch,
            format!("expected {expected_r}, found {found_r}"),
        ))
    }
}

fn contains_meta(cat: &Category) -> bool {
    match cat {
        Category::Meta(_) => true,
        Category::Arrow(d, c) => contains_meta(d) || contains_meta(c),
        Category::Forall(_, b) => contains_meta(b),
        Category::Applied(_, args) => args.iter().any(contains_meta),
        _ => false,
    }
}

fn unbound(name: &str) -> Diag {
    Diag::new(
        ErrorCode::UnboundVariable,
        format!("unbound reference `{name}`"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contexts::{core1, elaborate_context};
    use crate::syntax::{parse_context_file, parse_term, tokenize};

    fn thermostat() -> ContextEnv {
        let parsed =
            parse_context_file(&tokenize(crate::corpus::THERMOSTAT_SOURCE).unwrap()).unwrap();
        elaborate_context(&parsed, &[core1()], &[]).unwrap()
    }

    fn term_in(env: &ContextEnv, src: &str) -> Term {
        env.elaborate_term(&parse_term(&tokenize(src).unwrap()).unwrap())
            .unwrap()
    }

    fn infer_in(env: &ContextEnv, src: &str) -> Result<Category> {
        let t = term_in(env, src);
        infer(env, &[], &t)
    }

    #[test]
    fn true_has_category_bool() {
        let env = core1();
        let cat = infer_in(env, "true").unwrap();
        assert!(categories_equal(env, &cat, &Category::Applied("Bool".into(), vec![])));
        // And the expansion is the selector shape.
        let expanded = env.expand_deep(&cat).unwrap();
        assert_eq!(expanded.to_string(), "X | X - X - X");
    }

    #[test]
    fn temp_application_yields_temperature() {
        let env = thermostat();
        let cat = infer_in(&env, "temp 23 celsius").unwrap();
        let temperature = Category::Applied("Temperature".into(), vec![]);
        assert!(categories_equal(&env, &cat, &temperature));
        let pair = Category::Applied(
            "Pair".into(),
            vec![Category::base("Number"), Category::base("Unit")],
        );
        assert!(categories_equal(&env, &cat, &pair));
    }

    #[test]
    fn thermostat_policy_is_an_action() {
        let env = thermostat();
        let cat = infer_in(
            &env,
            "(gtTemp (tempSensor office celsius) (temp 23 celsius))[Action] \
             lowerThermostat \
             ((ltTemp (tempSensor office celsius) (temp 20.5 celsius))[Action] \
               raiseThermostat maintainThermostat)",
        )
        .unwrap();
        assert!(matches!(&cat, Category::Role(n, _) if n == "Action"));
        // The named definition in the corpus file agrees.
        let policy = env.definitions.get("policy").unwrap();
        assert!(matches!(
            policy.category.as_ref().unwrap(),
            Category::Role(n, _) if n == "Action"
        ));
    }

    #[test]
    fn branch_category_disagreement_is_reported() {
        let env = thermostat();
        let t = term_in(&env, "(gt 1 2)[Action] lowerThermostat 5");
        let err = infer(&env, &[], &t).unwrap_err();
        assert_eq!(err.code, ErrorCode::ArgumentMismatch);
        assert!(err.message.contains("Action"));
        assert!(err.message.contains("Number"));
    }

    #[test]
    fn subtyping_examples() {
        let env = thermostat();
        let action = Category::Role("Action".into(), "Tool".into());
        let tool = Category::Applied("Tool".into(), vec![]);
        assert!(is_subtype(&env, &action, &tool));
        assert!(!is_subtype(&env, &tool, &action));
    }

    #[test]
    fn category_equality_examples() {
        let env = thermostat();
        let temperature = Category::Applied("Temperature".into(), vec![]);
        let pair_nu = Category::Applied(
            "Pair".into(),
            vec![Category::base("Number"), Category::base("Unit")],
        );
        let pair_un = Category::Applied(
            "Pair".into(),
            vec![Category::base("Unit"), Category::base("Number")],
        );
        let boolean = Category::Applied("Bool".into(), vec![]);
        let pred_n = Category::Applied("Predicate".into(), vec![Category::base("Number")]);
        assert!(categories_equal(&env, &temperature, &pair_nu));
        assert!(!categories_equal(&env, &boolean, &pred_n));
        assert!(!categories_equal(&env, &pair_nu, &pair_un));
    }

    #[test]
    fn selector_rule_for_any_category() {
        let env = thermostat();
        for cond in ["true", "false", "gt 1 2"] {
            let cat = infer_in(
                &env,
                &format!("({cond})[Action] lowerThermostat maintainThermostat"),
            )
            .unwrap();
            assert!(matches!(&cat, Category::Role(n, _) if n == "Action"));
        }
    }

    #[test]
    fn deferred_definitions_check_at_use() {
        let src = "----context\ncontext D extends Core1\n\nidf := x | x\nuse1 := idf 5\n";
        let parsed = parse_context_file(&tokenize(src).unwrap()).unwrap();
        let env = elaborate_context(&parsed, &[core1()], &[]).unwrap();
        assert!(env.definitions["idf"].category.is_none());
        assert!(env.notes.iter().any(|n| n.contains("idf")));
        let use1 = env.definitions["use1"].category.as_ref().unwrap();
        assert!(categories_equal(&env, use1, &Category::base("Number")));
    }

    #[test]
    fn bare_church_normal_forms_infer_bool_shape() {
        let env = core1();
        let t = term_in(env, "X | a, b | a");
        let cat = infer(env, &[], &t).unwrap();
        assert!(categories_equal(env, &cat, &Category::Applied("Bool".into(), vec![])));
    }
}
