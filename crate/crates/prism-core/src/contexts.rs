//! Elaborated context environments: the built-in `Core1` prelude, `extends`
//! merging, name resolution, alias expansion and the role relation.

use std::collections::HashMap;
use std::sync::OnceLock;

use indexmap::IndexMap;

use crate::diag::{Diag, ErrorCode, Result, Span};
use crate::kernel::{self, Binding, BindingKind, Category, Term};
use crate::syntax::{self, CatExpr, DeclForm, Name, ParsedContext, SurfaceTerm};
use crate::typing;

/// Source of the built-in prelude; also shipped under `corpus/`.
pub const CORE1_SOURCE: &str = include_str!("../../../corpus/core1.prism");

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryInfo {
    /// `Some(parent)` for role declarations (`type Action extends Tool`).
    pub role_parent: Option<Name>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AliasDef {
    pub params: Vec<Name>,
    pub body: Category,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Definition {
    pub term: Term,
    /// `None` when inference was underdetermined; such definitions are
    /// checked at their use sites.
    pub category: Option<Category>,
}

/// A fully elaborated context. Parent entries are merged in, so lookups are
/// single probes; `provenance` remembers which context declared each name so
/// diamond inheritance of the same entry is not an error.
#[derive(Debug, Clone, Default)]
pub struct ContextEnv {
    pub name: Name,
    pub parents: Vec<Name>,
    pub categories: IndexMap<Name, CategoryInfo>,
    pub aliases: IndexMap<Name, AliasDef>,
    pub definitions: IndexMap<Name, Definition>,
    pub constants: IndexMap<Name, Category>,
    pub externals: IndexMap<Name, Category>,
    pub notes: Vec<String>,
    pub own_decl_count: usize,
    provenance: HashMap<Name, Name>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    Category,
    Alias,
    Definition,
    Constant,
    External,
}

#[derive(Debug, Clone)]
pub enum Symbol<'a> {
    Category(&'a CategoryInfo),
    Alias(&'a AliasDef),
    Definition(&'a Definition),
    Constant(&'a Category),
    External(&'a Category),
}

impl Symbol<'_> {
    pub fn kind(&self) -> SymbolKind {
        match self {
            Symbol::Category(_) => SymbolKind::Category,
            Symbol::Alias(_) => SymbolKind::Alias,
            Symbol::Definition(_) => SymbolKind::Definition,
            Symbol::Constant(_) => SymbolKind::Constant,
            Symbol::External(_) => SymbolKind::External,
        }
    }
}

impl ContextEnv {
    pub fn lookup(&self, name: &str) -> Result<Symbol<'_>> {
        if let Some(info) = self.categories.get(name) {
            return Ok(Symbol::Category(info));
        }
        if let Some(alias) = self.aliases.get(name) {
            return Ok(Symbol::Alias(alias));
        }
        if let Some(def) = self.definitions.get(name) {
            return Ok(Symbol::Definition(def));
        }
        if let Some(cat) = self.constants.get(name) {
            return Ok(Symbol::Constant(cat));
        }
        if let Some(cat) = self.externals.get(name) {
            return Ok(Symbol::External(cat));
        }
        Err(Diag::new(
            ErrorCode::NotFound,
            format!("`{name}` is not declared in context {}", self.name),
        ))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.lookup(name).is_ok()
    }

    /// Declared category of a constant or external atom.
    pub fn atom_category(&self, name: &str) -> Option<&Category> {
        self.constants.get(name).or_else(|| self.externals.get(name))
    }

    // ---- alias expansion ---------------------------------------------------

    /// Number of leading `Forall` binders once the alias body is expanded;
    /// brackets beyond the declared parameters peel these.
    pub fn alias_forall_len(&self, alias: &AliasDef) -> usize {
        let mut n = 0;
        let mut body = alias.body.clone();
        loop {
            match body {
                Category::Forall(_, inner) => {
                    n += 1;
                    body = *inner;
                }
                Category::Applied(_, _) => match self.expand_head_once(&body) {
                    Some(next) => body = next,
                    None => break,
                },
                _ => break,
            }
        }
        n
    }

    fn expand_head_once(&self, cat: &Category) -> Option<Category> {
        let Category::Applied(name, args) = cat else {
            return None;
        };
        let alias = self.aliases.get(name)?;
        let mut body = alias.body.clone();
        for (param, arg) in alias.params.iter().zip(args.iter()) {
            body = kernel::subst_cat_in_cat(&body, param, arg);
        }
        for arg in args.iter().skip(alias.params.len()) {
            // Peel a Forall binder, expanding intermediate aliases as needed.
            loop {
                match body {
                    Category::Forall(x, inner) => {
                        body = kernel::subst_cat_in_cat(&inner, &x, arg);
                        break;
                    }
                    Category::Applied(_, _) => match self.expand_head_once(&body) {
                        Some(next) => body = next,
                        None => return Some(body),
                    },
                    _ => return Some(body),
                }
            }
        }
        Some(body)
    }

    /// Expand alias applications at the head until a structural category shows.
    pub fn expand_head(&self, cat: &Category) -> Result<Category> {
        let mut cur = cat.clone();
        for _ in 0..64 {
            match self.expand_head_once(&cur) {
                Some(next) => cur = next,
                None => return Ok(cur),
            }
        }
        Err(Diag::new(
            ErrorCode::RecursiveAlias,
            format!("alias expansion of `{cat}` does not terminate"),
        ))
    }

    /// Fully expand all alias applications.
    pub fn expand_deep(&self, cat: &Category) -> Result<Category> {
        let head = self.expand_head(cat)?;
        Ok(match head {
            Category::Arrow(d, c) => {
                Category::arrow(self.expand_deep(&d)?, self.expand_deep(&c)?)
            }
            Category::Forall(x, b) => Category::Forall(x, Box::new(self.expand_deep(&b)?)),
            Category::Applied(n, args) => {
                // Head expansion stopped on an alias only if it was opaque;
                // still expand the arguments.
                let args = args
                    .iter()
                    .map(|a| self.expand_deep(a))
                    .collect::<Result<Vec<_>>>()?;
                Category::Applied(n, args)
            }
            other => other,
        })
    }

    /// Alpha-equivalence with categories compared after alias expansion.
    pub fn alpha_eq(&self, a: &Term, b: &Term) -> bool {
        kernel::alpha_eq(&self.expand_cats_in_term(a), &self.expand_cats_in_term(b))
    }

    fn expand_cats_in_term(&self, t: &Term) -> Term {
        match t {
            Term::CatApp(f, c) => Term::cat_app(
                self.expand_cats_in_term(f),
                self.expand_deep(c).unwrap_or_else(|_| c.clone()),
            ),
            Term::App(f, a) => {
                Term::app(self.expand_cats_in_term(f), self.expand_cats_in_term(a))
            }
            Term::TermAbs(x, b) => {
                Term::TermAbs(x.clone(), Box::new(self.expand_cats_in_term(b)))
            }
            Term::TypeAbs(x, b) => {
                Term::TypeAbs(x.clone(), Box::new(self.expand_cats_in_term(b)))
            }
            other => other.clone(),
        }
    }

    /// Domains and codomain of an external's arrow signature, with aliases
    /// expanded just enough to expose the arrows.
    pub fn external_signature(&self, name: &str) -> Result<(Vec<Category>, Category)> {
        let sig = self.externals.get(name).ok_or_else(|| {
            Diag::new(
                ErrorCode::UnknownExternal,
                format!("unknown external `{name}`"),
            )
        })?;
        let mut domains = Vec::new();
        let mut cur = self.expand_head(sig)?;
        while let Category::Arrow(dom, cod) = cur {
            domains.push(*dom);
            cur = self.expand_head(&cod)?;
        }
        // Keep the declared spelling of the codomain when it was nominal.
        if domains.is_empty() {
            return Ok((domains, sig.clone()));
        }
        Ok((domains, cur))
    }

    /// Component categories if `cat` expands to the pair encoding
    /// `X | (U - V - X) - X`.
    pub fn as_pair_category(&self, cat: &Category) -> Option<(Category, Category)> {
        let expanded = self.expand_deep(cat).ok()?;
        let Category::Forall(x, body) = expanded else {
            return None;
        };
        let Category::Arrow(consumer, result) = *body else {
            return None;
        };
        if !matches!(&*result, Category::Var(n) if *n == x) {
            return None;
        }
        let Category::Arrow(u, rest) = *consumer else {
            return None;
        };
        let Category::Arrow(v, tail) = *rest else {
            return None;
        };
        if !matches!(&*tail, Category::Var(n) if *n == x) {
            return None;
        }
        if kernel::free_cat_vars(&u).contains(&x) || kernel::free_cat_vars(&v).contains(&x) {
            return None;
        }
        Some((*u, *v))
    }

    /// Does `cat` expand to the boolean encoding `X | X - X - X`?
    pub fn is_bool_category(&self, cat: &Category) -> bool {
        let Ok(expanded) = self.expand_deep(cat) else {
            return false;
        };
        let Category::Forall(x, body) = expanded else {
            return false;
        };
        let var = |c: &Category| matches!(c, Category::Var(n) if *n == x);
        match *body {
            Category::Arrow(a, rest) => match (*rest).clone() {
                Category::Arrow(b, c) => var(&a) && var(&b) && var(&c),
                _ => false,
            },
            _ => false,
        }
    }

    // ---- roles ---------------------------------------------------------------

    pub fn role_parent(&self, name: &str) -> Option<&Name> {
        self.categories.get(name).and_then(|c| c.role_parent.as_ref())
    }

    /// Walk the role chain upward from `name`, yielding ancestor names.
    pub fn role_ancestors<'a>(&'a self, name: &'a str) -> Vec<&'a Name> {
        let mut out = Vec::new();
        let mut cur = name;
        while let Some(parent) = self.role_parent(cur) {
            out.push(parent);
            cur = parent;
        }
        out
    }

    /// Is this the category of something executable, i.e. a role refining `Tool`?
    pub fn is_action_category(&self, cat: &Category) -> bool {
        match cat {
            Category::Role(name, _) => self
                .role_ancestors(name)
                .iter()
                .any(|ancestor| *ancestor == "Tool"),
            _ => false,
        }
    }

    // ---- resolution ------------------------------------------------------------

    /// Resolve a surface category expression. `scope` holds bound category
    /// variables (alias parameters or binders).
    pub fn resolve_category(&self, expr: &CatExpr, scope: &[Name]) -> Result<Category> {
        self.resolve_category_with(expr, scope, &[])
    }

    fn resolve_category_with(
        &self,
        expr: &CatExpr,
        scope: &[Name],
        fallbacks: &[&ContextEnv],
    ) -> Result<Category> {
        match expr {
            CatExpr::Name(name, span) => self.resolve_cat_name(name, &[], *span, scope, fallbacks),
            CatExpr::Applied(name, args, span) => {
                let args = args
                    .iter()
                    .map(|a| self.resolve_category_with(a, scope, fallbacks))
                    .collect::<Result<Vec<_>>>()?;
                self.resolve_cat_name(name, &args, *span, scope, fallbacks)
            }
            CatExpr::Arrow(dom, cod) => Ok(Category::arrow(
                self.resolve_category_with(dom, scope, fallbacks)?,
                self.resolve_category_with(cod, scope, fallbacks)?,
            )),
            CatExpr::Abs(binder, body, _) => {
                let mut inner = scope.to_vec();
                inner.push(binder.clone());
                Ok(Category::Forall(
                    binder.clone(),
                    Box::new(self.resolve_category_with(body, &inner, fallbacks)?),
                ))
            }
        }
    }

    fn resolve_cat_name(
        &self,
        name: &str,
        args: &[Category],
        span: Span,
        scope: &[Name],
        fallbacks: &[&ContextEnv],
    ) -> Result<Category> {
        if scope.iter().any(|s| s == name) {
            if !args.is_empty() {
                return Err(Diag::at(
                    ErrorCode::AliasArity,
                    span,
                    format!("category variable `{name}` takes no arguments"),
                ));
            }
            return Ok(Category::Var(name.to_string()));
        }
        if let Some(alias) = self.aliases.get(name) {
            let min = alias.params.len();
            let max = min + self.alias_forall_len(alias);
            if args.len() < min || args.len() > max {
                return Err(Diag::at(
                    ErrorCode::AliasArity,
                    span,
                    format!(
                        "`{name}` expects {min}{} argument(s), found {}",
                        if max > min {
                            format!(" to {max}")
                        } else {
                            String::new()
                        },
                        args.len()
                    ),
                ));
            }
            return Ok(Category::Applied(name.to_string(), args.to_vec()));
        }
        if let Some(info) = self.categories.get(name) {
            if !args.is_empty() {
                return Err(Diag::at(
                    ErrorCode::AliasArity,
                    span,
                    format!("category `{name}` is not parameterized"),
                ));
            }
            return Ok(match &info.role_parent {
                Some(parent) => Category::Role(name.to_string(), parent.clone()),
                None => Category::Base(name.to_string()),
            });
        }
        for fb in fallbacks {
            if let Ok(cat) = fb.resolve_cat_name(name, args, span, scope, &[]) {
                return Ok(cat);
            }
        }
        Err(Diag::at(
            ErrorCode::UnresolvedReference,
            span,
            format!("unknown category `{name}`"),
        ))
    }

    /// Resolve a surface term against this environment, currying binder
    /// groups by the case rule.
    pub fn elaborate_term(&self, term: &SurfaceTerm) -> Result<Term> {
        self.elaborate_term_with(term, &mut Vec::new(), &[])
    }

    fn elaborate_term_with(
        &self,
        term: &SurfaceTerm,
        scope: &mut Vec<Binding>,
        fallbacks: &[&ContextEnv],
    ) -> Result<Term> {
        match term {
            SurfaceTerm::Var(name, span) => {
                if let Some(binding) = scope.iter().rev().find(|b| &b.name == name) {
                    return match binding.kind {
                        BindingKind::Term => Ok(Term::Var(name.clone())),
                        BindingKind::Category => Err(Diag::at(
                            ErrorCode::CategoryAsTerm,
                            *span,
                            format!("category variable `{name}` used as a term"),
                        )),
                    };
                }
                self.resolve_term_name(name, *span, fallbacks)
            }
            SurfaceTerm::Num(v, _) => Ok(Term::Num(*v)),
            SurfaceTerm::Str(s, _) => Ok(Term::Str(s.clone())),
            SurfaceTerm::App(f, a) => Ok(Term::app(
                self.elaborate_term_with(f, scope, fallbacks)?,
                self.elaborate_term_with(a, scope, fallbacks)?,
            )),
            SurfaceTerm::TypeApp(head, cat) => {
                let head = self.elaborate_term_with(head, scope, fallbacks)?;
                let cat_scope: Vec<Name> = scope
                    .iter()
                    .filter(|b| b.kind == BindingKind::Category)
                    .map(|b| b.name.clone())
                    .collect();
                let cat = self.resolve_category_with(cat, &cat_scope, fallbacks)?;
                Ok(Term::cat_app(head, cat))
            }
            SurfaceTerm::Abs(binders, body, _) => {
                let bindings: Vec<Binding> = binders.iter().map(Binding::of).collect();
                scope.extend(bindings.iter().cloned());
                let mut out = self.elaborate_term_with(body, scope, fallbacks)?;
                for binding in bindings.iter().rev() {
                    scope.pop();
                    out = match binding.kind {
                        BindingKind::Term => Term::TermAbs(binding.name.clone(), Box::new(out)),
                        BindingKind::Category => {
                            Term::TypeAbs(binding.name.clone(), Box::new(out))
                        }
                    };
                }
                Ok(out)
            }
        }
    }

    fn resolve_term_name(
        &self,
        name: &str,
        span: Span,
        fallbacks: &[&ContextEnv],
    ) -> Result<Term> {
        match self.lookup(name) {
            Ok(Symbol::Definition(_)) => Ok(Term::DefRef(name.to_string())),
            Ok(Symbol::Constant(_)) => Ok(Term::ConstRef(name.to_string())),
            Ok(Symbol::External(_)) => Ok(Term::ExternalRef(name.to_string())),
            Ok(Symbol::Category(_)) | Ok(Symbol::Alias(_)) => Err(Diag::at(
                ErrorCode::CategoryAsTerm,
                span,
                format!("category `{name}` used as a term"),
            )),
            Err(_) => {
                for fb in fallbacks {
                    if let Ok(t) = fb.resolve_term_name(name, span, &[]) {
                        return Ok(t);
                    }
                }
                Err(Diag::at(
                    ErrorCode::UnresolvedReference,
                    span,
                    format!("unknown name `{name}`"),
                ))
            }
        }
    }

    // ---- construction -----------------------------------------------------------

    fn declared_in(&self, name: &str) -> Option<&Name> {
        self.provenance.get(name)
    }

    fn insert_checked(
        &mut self,
        name: &Name,
        origin: &Name,
        span: Option<Span>,
    ) -> Result<()> {
        if let Some(existing) = self.declared_in(name) {
            if existing == origin {
                return Ok(());
            }
            let mut d = Diag::new(
                ErrorCode::DuplicateName,
                format!("`{name}` is already declared in context {existing}"),
            );
            d.span = span;
            return Err(d);
        }
        self.provenance.insert(name.clone(), origin.clone());
        Ok(())
    }
}

fn core1_seeds() -> HashMap<Name, Category> {
    let boolean = Category::Applied("Bool".into(), vec![]);
    let bin = Category::arrow(boolean.clone(), Category::arrow(boolean.clone(), boolean.clone()));
    let mut seeds = HashMap::new();
    seeds.insert("true".to_string(), boolean.clone());
    seeds.insert("false".to_string(), boolean.clone());
    seeds.insert("and".to_string(), bin.clone());
    seeds.insert("or".to_string(), bin);
    seeds.insert("not".to_string(), Category::arrow(boolean.clone(), boolean));
    seeds.insert(
        "pair".to_string(),
        Category::Forall(
            "A".into(),
            Box::new(Category::Forall(
                "B".into(),
                Box::new(Category::arrow(
                    Category::Var("A".into()),
                    Category::arrow(
                        Category::Var("B".into()),
                        Category::Applied(
                            "Pair".into(),
                            vec![Category::Var("A".into()), Category::Var("B".into())],
                        ),
                    ),
                )),
            )),
        ),
    );
    seeds
}

/// The built-in prelude. Parsed from the embedded source once; idempotent.
pub fn core1() -> &'static ContextEnv {
    static CORE1: OnceLock<ContextEnv> = OnceLock::new();
    CORE1.get_or_init(|| {
        let tokens = syntax::tokenize(CORE1_SOURCE).expect("prelude tokenizes");
        let parsed = syntax::parse_context_file(&tokens).expect("prelude parses");
        elaborate_context(&parsed, &[], &[]).expect("prelude elaborates")
    })
}

/// Elaborate a parsed context over already-elaborated parents. `fallbacks`
/// are consulted for names the parents do not provide (paper-exact mode);
/// symbols found there are imported transitively so the result is
/// self-contained.
pub fn elaborate_context(
    parsed: &ParsedContext,
    parents: &[&ContextEnv],
    fallbacks: &[&ContextEnv],
) -> Result<ContextEnv> {
    let name = parsed.header.name.clone();
    let seeds = if name == "Core1" {
        Some(core1_seeds())
    } else {
        None
    };

    let mut env = ContextEnv {
        name: name.clone(),
        parents: parsed.header.extends.clone(),
        ..ContextEnv::default()
    };
    env.own_decl_count = parsed.decls.len();

    for parent in parents {
        merge_parent(&mut env, parent, parsed.header.span)?;
    }

    for decl in &parsed.decls {
        let decl_name = decl.form.name().clone();
        env.insert_checked(&decl_name, &name, Some(decl.span))?;
        match &decl.form {
            DeclForm::Category {
                name: cat_name,
                parent,
            } => {
                if let Some(parent) = parent {
                    if !env.categories.contains_key(parent) && !env.aliases.contains_key(parent) {
                        return Err(Diag::at(
                            ErrorCode::UnresolvedReference,
                            decl.span,
                            format!("unknown parent category `{parent}`"),
                        ));
                    }
                    // Reject cycles through role edges.
                    let mut cur = parent.clone();
                    loop {
                        if cur == *cat_name {
                            return Err(Diag::at(
                                ErrorCode::RoleCycle,
                                decl.span,
                                format!("role cycle through `{cat_name}`"),
                            ));
                        }
                        match env.role_parent(&cur) {
                            Some(next) => cur = next.clone(),
                            None => break,
                        }
                    }
                }
                env.categories.insert(
                    cat_name.clone(),
                    CategoryInfo {
                        role_parent: parent.clone(),
                    },
                );
            }
            DeclForm::Alias {
                name: alias_name,
                params,
                body,
            } => {
                let body = env
                    .resolve_category_with(body, params, fallbacks)
                    .map_err(|d| d.with_span_default(decl.span))?;
                env.aliases.insert(
                    alias_name.clone(),
                    AliasDef {
                        params: params.clone(),
                        body: body.clone(),
                    },
                );
                import_category_names(&mut env, &body, fallbacks)?;
            }
            DeclForm::Const {
                name: const_name,
                category,
            } => {
                let cat = env
                    .resolve_category_with(category, &[], fallbacks)
                    .map_err(|d| d.with_span_default(decl.span))?;
                import_category_names(&mut env, &cat, fallbacks)?;
                env.constants.insert(const_name.clone(), cat);
            }
            DeclForm::External {
                name: ext_name,
                category,
            } => {
                let cat = env
                    .resolve_category_with(category, &[], fallbacks)
                    .map_err(|d| d.with_span_default(decl.span))?;
                import_category_names(&mut env, &cat, fallbacks)?;
                env.externals.insert(ext_name.clone(), cat);
            }
            DeclForm::Definition {
                name: def_name,
                body,
            } => {
                let term = env
                    .elaborate_term_with(body, &mut Vec::new(), fallbacks)
                    .map_err(|d| d.with_span_default(decl.span))?;
                import_term_names(&mut env, &term, fallbacks)?;
                let category = match seeds.as_ref().and_then(|s| s.get(def_name)) {
                    Some(expected) => {
                        typing::check(&env, &term, expected)
                            .map_err(|d| d.with_span_default(decl.span))?;
                        Some(expected.clone())
                    }
                    None => match typing::infer(&env, &[], &term) {
                        Ok(cat) => Some(cat),
                        Err(d) if d.code == ErrorCode::CannotInfer => {
                            env.notes
                                .push(format!("{def_name}: polymorphic, unconstrained"));
                            None
                        }
                        Err(d) => return Err(d.with_span_default(decl.span)),
                    },
                };
                env.definitions
                    .insert(def_name.clone(), Definition { term, category });
            }
        }
    }
    Ok(env)
}

fn merge_parent(env: &mut ContextEnv, parent: &ContextEnv, span: Span) -> Result<()> {
    for (name, info) in &parent.categories {
        let origin = parent.declared_in(name).unwrap_or(&parent.name).clone();
        env.insert_checked(name, &origin, Some(span))?;
        env.categories.entry(name.clone()).or_insert_with(|| info.clone());
    }
    for (name, alias) in &parent.aliases {
        let origin = parent.declared_in(name).unwrap_or(&parent.name).clone();
        env.insert_checked(name, &origin, Some(span))?;
        env.aliases.entry(name.clone()).or_insert_with(|| alias.clone());
    }
    for (name, def) in &parent.definitions {
        let origin = parent.declared_in(name).unwrap_or(&parent.name).clone();
        env.insert_checked(name, &origin, Some(span))?;
        env.definitions.entry(name.clone()).or_insert_with(|| def.clone());
    }
    for (name, cat) in &parent.constants {
        let origin = parent.declared_in(name).unwrap_or(&parent.name).clone();
        env.insert_checked(name, &origin, Some(span))?;
        env.constants.entry(name.clone()).or_insert_with(|| cat.clone());
    }
    for (name, cat) in &parent.externals {
        let origin = parent.declared_in(name).unwrap_or(&parent.name).clone();
        env.insert_checked(name, &origin, Some(span))?;
        env.externals.entry(name.clone()).or_insert_with(|| cat.clone());
    }
    Ok(())
}

/// Copy any categories/aliases referenced by `cat` but unknown here from the
/// fallback environments (cross-context import under paper-exact mode).
fn import_category_names(
    env: &mut ContextEnv,
    cat: &Category,
    fallbacks: &[&ContextEnv],
) -> Result<()> {
    if fallbacks.is_empty() {
        return Ok(());
    }
    let mut names = Vec::new();
    collect_category_names(cat, &mut names);
    for name in names {
        if env.contains(&name) {
            continue;
        }
        for fb in fallbacks {
            if let Some(alias) = fb.aliases.get(&name) {
                let origin = fb.declared_in(&name).unwrap_or(&fb.name).clone();
                env.insert_checked(&name, &origin, None)?;
                env.aliases.insert(name.clone(), alias.clone());
                import_category_names(env, &alias.body.clone(), fallbacks)?;
                break;
            }
            if let Some(info) = fb.categories.get(&name) {
                let origin = fb.declared_in(&name).unwrap_or(&fb.name).clone();
                env.insert_checked(&name, &origin, None)?;
                env.categories.insert(name.clone(), info.clone());
                break;
            }
        }
    }
    Ok(())
}

fn collect_category_names(cat: &Category, out: &mut Vec<Name>) {
    match cat {
        Category::Base(n) => out.push(n.clone()),
        Category::Role(n, p) => {
            out.push(n.clone());
            out.push(p.clone());
        }
        Category::Var(_) | Category::Meta(_) => {}
        Category::Arrow(d, c) => {
            collect_category_names(d, out);
            collect_category_names(c, out);
        }
        Category::Applied(n, args) => {
            out.push(n.clone());
            for a in args {
                collect_category_names(a, out);
            }
        }
        Category::Forall(_, b) => collect_category_names(b, out),
    }
}

/// Import externals/constants/definitions a term resolved through fallbacks.
fn import_term_names(env: &mut ContextEnv, term: &Term, fallbacks: &[&ContextEnv]) -> Result<()> {
    if fallbacks.is_empty() {
        return Ok(());
    }
    match term {
        Term::ExternalRef(n) => {
            if !env.contains(n) {
                for fb in fallbacks {
                    if let Some(cat) = fb.externals.get(n) {
                        let origin = fb.declared_in(n).unwrap_or(&fb.name).clone();
                        env.insert_checked(n, &origin, None)?;
                        env.externals.insert(n.clone(), cat.clone());
                        import_category_names(env, &cat.clone(), fallbacks)?;
                        break;
                    }
                }
            }
        }
        Term::ConstRef(n) => {
            if !env.contains(n) {
                for fb in fallbacks {
                    if let Some(cat) = fb.constants.get(n) {
                        let origin = fb.declared_in(n).unwrap_or(&fb.name).clone();
                        env.insert_checked(n, &origin, None)?;
                        env.constants.insert(n.clone(), cat.clone());
                        import_category_names(env, &cat.clone(), fallbacks)?;
                        break;
                    }
                }
            }
        }
        Term::DefRef(n) => {
            if !env.contains(n) {
                for fb in fallbacks {
                    if let Some(def) = fb.definitions.get(n) {
                        let origin = fb.declared_in(n).unwrap_or(&fb.name).clone();
                        env.insert_checked(n, &origin, None)?;
                        env.definitions.insert(n.clone(), def.clone());
                        let body = def.term.clone();
                        if let Some(cat) = def.category.clone() {
                            import_category_names(env, &cat, fallbacks)?;
                        }
                        import_term_names(env, &body, fallbacks)?;
                        break;
                    }
                }
            }
        }
        Term::App(f, a) => {
            import_term_names(env, f, fallbacks)?;
            import_term_names(env, a, fallbacks)?;
        }
        Term::CatApp(f, c) => {
            import_term_names(env, f, fallbacks)?;
            import_category_names(env, c, fallbacks)?;
        }
        Term::TermAbs(_, b) | Term::TypeAbs(_, b) => import_term_names(env, b, fallbacks)?,
        _ => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_context_file, tokenize};

    fn parse(src: &str) -> ParsedContext {
        parse_context_file(&tokenize(src).unwrap()).unwrap()
    }

    pub(crate) fn elaborate_over_core1(src: &str) -> Result<ContextEnv> {
        elaborate_context(&parse(src), &[core1()], &[])
    }

    #[test]
    fn core1_invariants() {
        let env = core1();
        let cats: Vec<&str> = env.categories.keys().map(|s| s.as_str()).collect();
        assert_eq!(
            cats,
            ["Number", "String", "Unit", "Schema", "JSON", "None", "UserPrompt"]
        );
        let aliases: Vec<&str> = env.aliases.keys().map(|s| s.as_str()).collect();
        assert_eq!(aliases, ["Bool", "List", "Predicate", "Tool", "Pair"]);
        let defs: Vec<&str> = env.definitions.keys().map(|s| s.as_str()).collect();
        assert_eq!(defs, ["true", "false", "and", "or", "not", "pair"]);
        let exts: Vec<&str> = env.externals.keys().map(|s| s.as_str()).collect();
        assert_eq!(exts, ["gt", "lt", "eq", "gte", "lte"]);
        for ext in ["gt", "lt", "eq", "gte", "lte"] {
            assert_eq!(
                env.externals[ext],
                Category::Applied("Predicate".into(), vec![Category::Base("Number".into())])
            );
        }
        assert_eq!(env.aliases["Pair"].params.len(), 2);
        assert_eq!(env.aliases["List"].params.len(), 1);
        // `and` keeps its defining term.
        let and = &env.definitions["and"];
        assert_eq!(and.term.to_string(), "b1, b2 | b1[Bool] b2 false");
    }

    #[test]
    fn core1_is_idempotent() {
        let a = core1();
        let b = core1();
        assert!(std::ptr::eq(a, b));
    }

    #[test]
    fn lookup_examples() {
        let thermostat = elaborate_over_core1(crate::corpus::THERMOSTAT_SOURCE).unwrap();
        assert!(matches!(
            thermostat.lookup("pair").unwrap(),
            Symbol::Definition(_)
        ));
        assert!(matches!(
            thermostat.lookup("maintainThermostat").unwrap(),
            Symbol::Constant(cat) if matches!(cat, Category::Role(n, _) if n == "Action")
        ));
        let err = core1().lookup("office").unwrap_err();
        assert_eq!(err.code, ErrorCode::NotFound);
    }

    #[test]
    fn thermostat_elaborates() {
        let env = elaborate_over_core1(crate::corpus::THERMOSTAT_SOURCE).unwrap();
        assert!(env.categories.contains_key("Location"));
        assert_eq!(env.role_parent("Action"), Some(&"Tool".to_string()));
        assert!(env.aliases.contains_key("Temperature"));
        for c in ["office", "kitchen", "bedroom", "celsius", "fahrenheit", "maintainThermostat"] {
            assert!(env.constants.contains_key(c), "missing constant {c}");
        }
        for e in ["tempSensor", "gtTemp", "ltTemp", "lowerThermostat", "raiseThermostat"] {
            assert!(env.externals.contains_key(e), "missing external {e}");
        }
        assert!(env.definitions.contains_key("temp"));
        assert!(env.definitions.contains_key("policy"));
    }

    #[test]
    fn security_roles() {
        let env = elaborate_over_core1(crate::corpus::SECURITY_SOURCE).unwrap();
        assert_eq!(env.role_parent("SecurityAction"), Some(&"Tool".to_string()));
        let do_nothing = &env.externals["doNothing"];
        assert!(matches!(do_nothing, Category::Role(n, _) if n == "SecurityAction"));
        assert!(env.is_action_category(do_nothing));
    }

    #[test]
    fn unresolved_reference() {
        let err =
            elaborate_over_core1("----context\ncontext B extends Core1\n\nfoo := bar\n").unwrap_err();
        assert_eq!(err.code, ErrorCode::UnresolvedReference);
        assert!(err.message.contains("bar"));
    }

    #[test]
    fn no_shadowing_across_extends() {
        let err = elaborate_over_core1(
            "----context\ncontext B extends Core1\n\ntype Number\n",
        )
        .unwrap_err();
        assert_eq!(err.code, ErrorCode::DuplicateName);
    }

    #[test]
    fn duplicate_within_context() {
        let err = elaborate_over_core1(
            "----context\ncontext B extends Core1\n\ntype Foo\nfoo := x | x\ntype Foo\n",
        )
        .unwrap_err();
        assert_eq!(err.code, ErrorCode::DuplicateName);
    }

    #[test]
    fn role_cycle_is_rejected() {
        let err = elaborate_over_core1(
            "----context\ncontext B extends Core1\n\ntype A extends B\ntype B extends A\n",
        )
        .unwrap_err();
        // `type A extends B` already fails: B undeclared.
        assert_eq!(err.code, ErrorCode::UnresolvedReference);
        let err = elaborate_over_core1(
            "----context\ncontext B extends Core1\n\ntype A extends A\n",
        )
        .unwrap_err();
        assert_eq!(err.code, ErrorCode::RoleCycle);
    }

    #[test]
    fn alias_expansion_terminates_and_agrees() {
        let thermostat = elaborate_over_core1(crate::corpus::THERMOSTAT_SOURCE).unwrap();
        let temperature = Category::Applied("Temperature".into(), vec![]);
        let expanded = thermostat.expand_deep(&temperature).unwrap();
        match &expanded {
            Category::Forall(_, body) => {
                assert!(matches!(**body, Category::Arrow(_, _)));
            }
            other => panic!("expected the pair encoding, got {other}"),
        }
        // Composite alias arity: Temperature ends in one residual Forall.
        let alias = thermostat.aliases.get("Temperature").unwrap();
        assert_eq!(thermostat.alias_forall_len(alias), 1);
    }

    #[test]
    fn extend_is_monotone() {
        let core = core1();
        let child = elaborate_over_core1(crate::corpus::SECURITY_SOURCE).unwrap();
        for name in core
            .categories
            .keys()
            .chain(core.aliases.keys())
            .chain(core.definitions.keys())
            .chain(core.constants.keys())
            .chain(core.externals.keys())
        {
            assert!(child.contains(name), "parent symbol {name} lost in child");
        }
    }

    #[test]
    fn multi_parent_diamond_is_allowed() {
        let a = elaborate_over_core1("----context\ncontext A extends Core1\n\ntype FooA\n").unwrap();
        let b = elaborate_over_core1("----context\ncontext B extends Core1\n\ntype FooB\n").unwrap();
        let parsed = parse("----context\ncontext C extends A, B\n\ntype FooC\n");
        let env = elaborate_context(&parsed, &[&a, &b], &[]).unwrap();
        assert!(env.categories.contains_key("FooA"));
        assert!(env.categories.contains_key("FooB"));
        assert!(env.categories.contains_key("Number"));
    }
}
