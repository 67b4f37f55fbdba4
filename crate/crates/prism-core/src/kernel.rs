//! Core term and category representation: binding-aware substitution,
//! alpha-equivalence and free variables.
//!
//! Surface multi-binder groups are curried into single-binder `TermAbs` /
//! `TypeAbs` nodes during elaboration. Term variables and category variables
//! live in separate namespaces.

use std::collections::BTreeSet;
use std::fmt;

use crate::decimal::Decimal;
use crate::diag::{Diag, ErrorCode};
use crate::syntax::{is_category_name, Name};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    /// A binder-bound term variable.
    Var(Name),
    TermAbs(Name, Box<Term>),
    TypeAbs(Name, Box<Term>),
    App(Box<Term>, Box<Term>),
    /// Bracket instantiation `t[C]`.
    CatApp(Box<Term>, Category),
    Num(Decimal),
    Str(String),
    /// A declared constant (`office`, `maintainThermostat`).
    ConstRef(Name),
    /// A declared external (`tempSensor`, `gt`).
    ExternalRef(Name),
    /// A named definition; unfolded lazily during normalization.
    DefRef(Name),
}

impl Term {
    pub fn app(fun: Term, arg: Term) -> Term {
        Term::App(Box::new(fun), Box::new(arg))
    }

    pub fn cat_app(fun: Term, cat: Category) -> Term {
        Term::CatApp(Box::new(fun), cat)
    }

    /// View an application chain as `(head, frames)` without consuming it.
    pub fn spine(&self) -> (&Term, Vec<SpineArg<'_>>) {
        let mut frames = Vec::new();
        let mut head = self;
        loop {
            match head {
                Term::App(f, a) => {
                    frames.push(SpineArg::Term(a));
                    head = f;
                }
                Term::CatApp(f, c) => {
                    frames.push(SpineArg::Cat(c));
                    head = f;
                }
                _ => break,
            }
        }
        frames.reverse();
        (head, frames)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum SpineArg<'a> {
    Term(&'a Term),
    Cat(&'a Category),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Category {
    /// A declared base category (`Number`, `Location`).
    Base(Name),
    /// A category variable bound by `Forall` or an alias parameter.
    Var(Name),
    Arrow(Box<Category>, Box<Category>),
    /// An alias or encoding applied to arguments; `Bool` is `Applied("Bool", [])`.
    Applied(Name, Vec<Category>),
    /// A nominal role category and its immediate parent (`Action` extends `Tool`).
    Role(Name, Name),
    /// The encoding quantifier `X | body`.
    Forall(Name, Box<Category>),
    /// Inference-internal placeholder; never stored in an environment.
    Meta(u32),
}

impl Category {
    pub fn arrow(dom: Category, cod: Category) -> Category {
        Category::Arrow(Box::new(dom), Box::new(cod))
    }

    pub fn base(name: &str) -> Category {
        Category::Base(name.to_string())
    }

    /// The name of a nominal (non-structural) category, if it has one.
    pub fn nominal_name(&self) -> Option<&Name> {
        match self {
            Category::Base(n) | Category::Role(n, _) | Category::Applied(n, _) => Some(n),
            _ => None,
        }
    }
}

/// Binder kinds follow the case rule: uppercase-initial names bind
/// categories, everything else binds terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindingKind {
    Term,
    Category,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub name: Name,
    pub kind: BindingKind,
}

impl Binding {
    pub fn of(name: impl Into<Name>) -> Binding {
        let name = name.into();
        let kind = if is_category_name(&name) {
            BindingKind::Category
        } else {
            BindingKind::Term
        };
        Binding { name, kind }
    }
}

/// Replacement payload for [`substitute`].
#[derive(Debug, Clone)]
pub enum Replacement {
    Term(Term),
    Category(Category),
}

/// Capture-avoiding substitution dispatching on binder kind.
pub fn substitute(body: &Term, binder: &Binding, replacement: &Replacement) -> Result<Term, Diag> {
    match (binder.kind, replacement) {
        (BindingKind::Term, Replacement::Term(s)) => Ok(subst_term(body, &binder.name, s)),
        (BindingKind::Category, Replacement::Category(c)) => {
            Ok(subst_cat_in_term(body, &binder.name, c))
        }
        _ => Err(Diag::new(
            ErrorCode::KindMismatch,
            format!(
                "replacement kind does not match binder `{}`",
                binder.name
            ),
        )),
    }
}

/// Pick a fresh variant of `base` not present in `avoid`: `a` becomes `a_1`,
/// `a_1` becomes `a_2`, and so on.
pub fn fresh_name(base: &str, avoid: &BTreeSet<Name>) -> Name {
    let stem = match base.rfind('_') {
        Some(i) if base[i + 1..].bytes().all(|b| b.is_ascii_digit()) && i + 1 < base.len() => {
            &base[..i]
        }
        _ => base,
    };
    for k in 1u64.. {
        let candidate = format!("{stem}_{k}");
        if !avoid.contains(&candidate) {
            return candidate;
        }
    }
    unreachable!()
}

/// `body[x := s]` on term variables.
pub fn subst_term(body: &Term, x: &str, s: &Term) -> Term {
    match body {
        Term::Var(n) if n == x => s.clone(),
        Term::Var(_)
        | Term::Num(_)
        | Term::Str(_)
        | Term::ConstRef(_)
        | Term::ExternalRef(_)
        | Term::DefRef(_) => body.clone(),
        Term::App(f, a) => Term::app(subst_term(f, x, s), subst_term(a, x, s)),
        Term::CatApp(f, c) => Term::cat_app(subst_term(f, x, s), c.clone()),
        Term::TypeAbs(v, b) => Term::TypeAbs(v.clone(), Box::new(subst_term(b, x, s))),
        Term::TermAbs(v, b) => {
            if v == x {
                return body.clone();
            }
            let fv_s = free_vars(s).terms;
            if fv_s.contains(v) {
                // Rename the binder away from the replacement's free variables.
                let mut avoid: BTreeSet<Name> = fv_s;
                avoid.extend(free_vars(b).terms);
                avoid.insert(x.to_string());
                let fresh = fresh_name(v, &avoid);
                let renamed = subst_term(b, v, &Term::Var(fresh.clone()));
                Term::TermAbs(fresh, Box::new(subst_term(&renamed, x, s)))
            } else {
                Term::TermAbs(v.clone(), Box::new(subst_term(b, x, s)))
            }
        }
    }
}

/// `body[X := c]` on category variables, descending into bracket categories.
pub fn subst_cat_in_term(body: &Term, x: &str, c: &Category) -> Term {
    match body {
        Term::Var(_)
        | Term::Num(_)
        | Term::Str(_)
        | Term::ConstRef(_)
        | Term::ExternalRef(_)
        | Term::DefRef(_) => body.clone(),
        Term::App(f, a) => Term::app(subst_cat_in_term(f, x, c), subst_cat_in_term(a, x, c)),
        Term::CatApp(f, cat) => {
            Term::cat_app(subst_cat_in_term(f, x, c), subst_cat_in_cat(cat, x, c))
        }
        Term::TermAbs(v, b) => Term::TermAbs(v.clone(), Box::new(subst_cat_in_term(b, x, c))),
        Term::TypeAbs(v, b) => {
            if v == x {
                return body.clone();
            }
            let fv_c = free_cat_vars(c);
            if fv_c.contains(v) {
                let mut avoid = fv_c;
                avoid.extend(free_vars(b).cats);
                avoid.insert(x.to_string());
                let fresh = fresh_name(v, &avoid);
                let renamed = subst_cat_in_term(b, v, &Category::Var(fresh.clone()));
                Term::TypeAbs(fresh, Box::new(subst_cat_in_term(&renamed, x, c)))
            } else {
                Term::TypeAbs(v.clone(), Box::new(subst_cat_in_term(b, x, c)))
            }
        }
    }
}

pub fn subst_cat_in_cat(cat: &Category, x: &str, c: &Category) -> Category {
    match cat {
        Category::Var(n) if n == x => c.clone(),
        Category::Var(_) | Category::Base(_) | Category::Role(_, _) | Category::Meta(_) => {
            cat.clone()
        }
        Category::Arrow(d, r) => {
            Category::arrow(subst_cat_in_cat(d, x, c), subst_cat_in_cat(r, x, c))
        }
        Category::Applied(n, args) => Category::Applied(
            n.clone(),
            args.iter().map(|a| subst_cat_in_cat(a, x, c)).collect(),
        ),
        Category::Forall(v, b) => {
            if v == x {
                return cat.clone();
            }
            let fv = free_cat_vars(c);
            if fv.contains(v) {
                let mut avoid = fv;
                avoid.extend(free_cat_vars(b));
                avoid.insert(x.to_string());
                let fresh = fresh_name(v, &avoid);
                let renamed = subst_cat_in_cat(b, v, &Category::Var(fresh.clone()));
                Category::Forall(fresh, Box::new(subst_cat_in_cat(&renamed, x, c)))
            } else {
                Category::Forall(v.clone(), Box::new(subst_cat_in_cat(b, x, c)))
            }
        }
    }
}

/// Term-level and category-level free variables, reported separately.
/// References into an environment (constants, externals, definitions) are
/// bound by that environment, not free.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FreeVars {
    pub terms: BTreeSet<Name>,
    pub cats: BTreeSet<Name>,
}

pub fn free_vars(term: &Term) -> FreeVars {
    let mut out = FreeVars::default();
    collect_free(term, &mut Vec::new(), &mut Vec::new(), &mut out);
    out
}

fn collect_free(
    term: &Term,
    term_scope: &mut Vec<Name>,
    cat_scope: &mut Vec<Name>,
    out: &mut FreeVars,
) {
    match term {
        Term::Var(n) => {
            if !term_scope.iter().any(|b| b == n) {
                out.terms.insert(n.clone());
            }
        }
        Term::Num(_) | Term::Str(_) | Term::ConstRef(_) | Term::ExternalRef(_) | Term::DefRef(_) => {}
        Term::App(f, a) => {
            collect_free(f, term_scope, cat_scope, out);
            collect_free(a, term_scope, cat_scope, out);
        }
        Term::CatApp(f, c) => {
            collect_free(f, term_scope, cat_scope, out);
            for v in free_cat_vars(c) {
                if !cat_scope.iter().any(|b| *b == v) {
                    out.cats.insert(v);
                }
            }
        }
        Term::TermAbs(v, b) => {
            term_scope.push(v.clone());
            collect_free(b, term_scope, cat_scope, out);
            term_scope.pop();
        }
        Term::TypeAbs(v, b) => {
            cat_scope.push(v.clone());
            collect_free(b, term_scope, cat_scope, out);
            cat_scope.pop();
        }
    }
}

pub fn free_cat_vars(cat: &Category) -> BTreeSet<Name> {
    fn go(cat: &Category, scope: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        match cat {
            Category::Var(n) => {
                if !scope.iter().any(|b| b == n) {
                    out.insert(n.clone());
                }
            }
            Category::Base(_) | Category::Role(_, _) | Category::Meta(_) => {}
            Category::Arrow(d, c) => {
                go(d, scope, out);
                go(c, scope, out);
            }
            Category::Applied(_, args) => {
                for a in args {
                    go(a, scope, out);
                }
            }
            Category::Forall(v, b) => {
                scope.push(v.clone());
                go(b, scope, out);
                scope.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    go(cat, &mut Vec::new(), &mut out);
    out
}

/// Alpha-equivalence: insensitive to bound names, sensitive to structure,
/// literals and categories (compared structurally here; use
/// `ContextEnv::alpha_eq` for alias-transparent comparison).
pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    alpha_eq_terms(a, b, &mut Vec::new(), &mut Vec::new())
}

fn alpha_eq_terms(
    a: &Term,
    b: &Term,
    terms: &mut Vec<(Name, Name)>,
    cats: &mut Vec<(Name, Name)>,
) -> bool {
    match (a, b) {
        (Term::Var(x), Term::Var(y)) => bound_eq(terms, x, y),
        (Term::Num(x), Term::Num(y)) => x == y,
        (Term::Str(x), Term::Str(y)) => x == y,
        (Term::ConstRef(x), Term::ConstRef(y))
        | (Term::ExternalRef(x), Term::ExternalRef(y))
        | (Term::DefRef(x), Term::DefRef(y)) => x == y,
        (Term::App(f1, a1), Term::App(f2, a2)) => {
            alpha_eq_terms(f1, f2, terms, cats) && alpha_eq_terms(a1, a2, terms, cats)
        }
        (Term::CatApp(f1, c1), Term::CatApp(f2, c2)) => {
            alpha_eq_terms(f1, f2, terms, cats) && alpha_eq_cats(c1, c2, cats)
        }
        (Term::TermAbs(x, b1), Term::TermAbs(y, b2)) => {
            terms.push((x.clone(), y.clone()));
            let r = alpha_eq_terms(b1, b2, terms, cats);
            terms.pop();
            r
        }
        (Term::TypeAbs(x, b1), Term::TypeAbs(y, b2)) => {
            cats.push((x.clone(), y.clone()));
            let r = alpha_eq_terms(b1, b2, terms, cats);
            cats.pop();
            r
        }
        _ => false,
    }
}

pub(crate) fn alpha_eq_cats(a: &Category, b: &Category, scope: &mut Vec<(Name, Name)>) -> bool {
    match (a, b) {
        (Category::Var(x), Category::Var(y)) => bound_eq(scope, x, y),
        (Category::Base(x), Category::Base(y)) => x == y,
        (Category::Role(x, _), Category::Role(y, _)) => x == y,
        (Category::Meta(x), Category::Meta(y)) => x == y,
        (Category::Arrow(d1, c1), Category::Arrow(d2, c2)) => {
            alpha_eq_cats(d1, d2, scope) && alpha_eq_cats(c1, c2, scope)
        }
        (Category::Applied(n1, a1), Category::Applied(n2, a2)) => {
            n1 == n2
                && a1.len() == a2.len()
                && a1
                    .iter()
                    .zip(a2.iter())
                    .all(|(x, y)| alpha_eq_cats(x, y, scope))
        }
        (Category::Forall(x, b1), Category::Forall(y, b2)) => {
            scope.push((x.clone(), y.clone()));
            let r = alpha_eq_cats(b1, b2, scope);
            scope.pop();
            r
        }
        _ => false,
    }
}

pub fn alpha_eq_cat(a: &Category, b: &Category) -> bool {
    alpha_eq_cats(a, b, &mut Vec::new())
}

fn bound_eq(scope: &[(Name, Name)], x: &str, y: &str) -> bool {
    for (l, r) in scope.iter().rev() {
        let hit_l = l == x;
        let hit_r = r == y;
        if hit_l || hit_r {
            return hit_l && hit_r;
        }
    }
    x == y
}

// ---- printing -------------------------------------------------------------

#[derive(Clone, Copy, PartialEq)]
enum Pos {
    Top,
    AppHead,
    AppArg,
    CatHead,
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_term(self, Pos::Top, f)
    }
}

fn write_term(t: &Term, pos: Pos, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::Var(n) | Term::ConstRef(n) | Term::ExternalRef(n) | Term::DefRef(n) => {
            f.write_str(n)
        }
        Term::Num(v) => write!(f, "{v}"),
        Term::Str(s) => f.write_str(&crate::syntax::pretty_escape(s)),
        Term::TermAbs(_, _) | Term::TypeAbs(_, _) => {
            let parens = pos != Pos::Top;
            if parens {
                f.write_str("(")?;
            }
            // Group maximal same-kind binder runs: `A, B | a, b | body`.
            let mut cur = t;
            loop {
                let (kind, first) = match cur {
                    Term::TermAbs(n, _) => (BindingKind::Term, n),
                    Term::TypeAbs(n, _) => (BindingKind::Category, n),
                    _ => break,
                };
                f.write_str(first)?;
                cur = match cur {
                    Term::TermAbs(_, b) | Term::TypeAbs(_, b) => b,
                    _ => unreachable!(),
                };
                loop {
                    let next = match (kind, cur) {
                        (BindingKind::Term, Term::TermAbs(n, b)) => Some((n, b)),
                        (BindingKind::Category, Term::TypeAbs(n, b)) => Some((n, b)),
                        _ => None,
                    };
                    match next {
                        Some((n, b)) => {
                            write!(f, ", {n}")?;
                            cur = b;
                        }
                        None => break,
                    }
                }
                f.write_str(" | ")?;
            }
            write_term(cur, Pos::Top, f)?;
            if parens {
                f.write_str(")")?;
            }
            Ok(())
        }
        Term::App(fun, arg) => {
            let parens = matches!(pos, Pos::AppArg | Pos::CatHead);
            if parens {
                f.write_str("(")?;
            }
            write_term(fun, Pos::AppHead, f)?;
            f.write_str(" ")?;
            write_term(arg, Pos::AppArg, f)?;
            if parens {
                f.write_str(")")?;
            }
            Ok(())
        }
        Term::CatApp(head, cat) => {
            write_term(head, Pos::CatHead, f)?;
            write!(f, "[{cat}]")
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_cat(self, CatPos::Top, f)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum CatPos {
    Top,
    ArrowDomain,
    ArrowCodomain,
}

fn write_cat(c: &Category, pos: CatPos, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match c {
        Category::Base(n) | Category::Var(n) | Category::Role(n, _) => f.write_str(n),
        Category::Meta(i) => write!(f, "?{i}"),
        Category::Applied(n, args) => {
            f.write_str(n)?;
            for a in args {
                f.write_str("[")?;
                write_cat(a, CatPos::Top, f)?;
                f.write_str("]")?;
            }
            Ok(())
        }
        Category::Arrow(d, r) => {
            let parens = pos == CatPos::ArrowDomain;
            if parens {
                f.write_str("(")?;
            }
            write_cat(d, CatPos::ArrowDomain, f)?;
            f.write_str(" - ")?;
            write_cat(r, CatPos::ArrowCodomain, f)?;
            if parens {
                f.write_str(")")?;
            }
            Ok(())
        }
        Category::Forall(x, b) => {
            let parens = pos != CatPos::Top;
            if parens {
                f.write_str("(")?;
            }
            write!(f, "{x} | ")?;
            write_cat(b, CatPos::Top, f)?;
            if parens {
                f.write_str(")")?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(n: &str) -> Term {
        Term::Var(n.to_string())
    }

    fn abs(n: &str, b: Term) -> Term {
        Term::TermAbs(n.to_string(), Box::new(b))
    }

    fn tabs(n: &str, b: Term) -> Term {
        Term::TypeAbs(n.to_string(), Box::new(b))
    }

    #[test]
    fn substitute_hit_and_miss() {
        let hit = subst_term(&var("a"), "a", &Term::ExternalRef("lowerThermostat".into()));
        assert_eq!(hit, Term::ExternalRef("lowerThermostat".into()));
        let miss = subst_term(&var("b"), "a", &var("t"));
        assert_eq!(miss, var("b"));
    }

    #[test]
    fn substitution_avoids_capture() {
        // (a | a b)[b := a]  ==>  a_1 | a_1 a
        let body = abs("a", Term::app(var("a"), var("b")));
        let out = subst_term(&body, "b", &var("a"));
        let expected = abs("a_1", Term::app(var("a_1"), var("a")));
        assert_eq!(out, expected);
        // The free-variable law holds on this instance.
        let fv = free_vars(&out).terms;
        assert!(fv.contains("a"));
        assert!(!fv.contains("b"));
    }

    #[test]
    fn kind_mismatch_is_reported() {
        let err = substitute(
            &var("a"),
            &Binding::of("X"),
            &Replacement::Term(var("b")),
        )
        .unwrap_err();
        assert_eq!(err.code, ErrorCode::KindMismatch);
    }

    #[test]
    fn alpha_equivalence_cases() {
        // true vs renamed true
        let t1 = tabs("X", abs("a", abs("b", var("a"))));
        let t2 = tabs("Y", abs("p", abs("q", var("p"))));
        assert!(alpha_eq(&t1, &t2));
        // true vs false
        let f1 = tabs("X", abs("a", abs("b", var("b"))));
        assert!(!alpha_eq(&t1, &f1));
        // distinct constants
        let a = Term::app(
            Term::app(Term::DefRef("temp".into()), Term::Num(Decimal::from_int(23))),
            Term::ConstRef("celsius".into()),
        );
        let b = Term::app(
            Term::app(Term::DefRef("temp".into()), Term::Num(Decimal::from_int(23))),
            Term::ConstRef("fahrenheit".into()),
        );
        assert!(!alpha_eq(&a, &b));
    }

    #[test]
    fn free_variable_sets() {
        let closed = tabs("X", abs("a", abs("b", var("a"))));
        assert!(free_vars(&closed).terms.is_empty());
        assert_eq!(
            free_vars(&var("x")).terms,
            BTreeSet::from(["x".to_string()])
        );
        // b1[Bool] b2 false, with `false` resolved as a definition reference.
        let t = Term::app(
            Term::app(
                Term::cat_app(var("b1"), Category::Applied("Bool".into(), vec![])),
                var("b2"),
            ),
            Term::DefRef("false".into()),
        );
        assert_eq!(
            free_vars(&t).terms,
            BTreeSet::from(["b1".to_string(), "b2".to_string()])
        );
    }

    #[test]
    fn fresh_names_are_monotone() {
        let avoid: BTreeSet<Name> = ["a_1".to_string(), "a_2".to_string()].into();
        assert_eq!(fresh_name("a", &avoid), "a_3");
        assert_eq!(fresh_name("a_1", &avoid), "a_3");
        assert_eq!(fresh_name("b", &avoid), "b_1");
    }

    #[test]
    fn display_binder_groups() {
        let pair_body = abs(
            "a",
            abs("b", tabs("X", abs("x", Term::app(Term::app(var("x"), var("a")), var("b"))))),
        );
        let pair = tabs("A", tabs("B", pair_body));
        assert_eq!(pair.to_string(), "A, B | a, b | X | x | x a b");
    }
}
