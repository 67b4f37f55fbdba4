//! Surface syntax: tokens, parse trees for context files and standalone
//! expressions, and the canonical printer.

mod lexer;
mod parser;
mod pretty;

pub use lexer::{tokenize, Keyword, Token, TokenKind};
pub use parser::{parse_context_file, parse_file, parse_term};
pub use pretty::{format_context, pretty_cat_expr, pretty_surface};

pub(crate) use pretty::escape as pretty_escape;

use crate::decimal::Decimal;
use crate::diag::Span;

pub type Name = String;

/// `context Name extends A, B` line of a block.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextHeader {
    pub name: Name,
    pub extends: Vec<Name>,
    pub span: Span,
}

/// One `----context` block.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedContext {
    pub header: ContextHeader,
    pub decls: Vec<SurfaceDecl>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceDecl {
    pub form: DeclForm,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeclForm {
    /// `type N`, `type N extends P`, or a bare `N` line.
    Category { name: Name, parent: Option<Name> },
    /// `N := <cat>`, `type N := <cat>`, `N P1 P2 := <cat>`.
    Alias {
        name: Name,
        params: Vec<Name>,
        body: CatExpr,
    },
    /// `n : <cat>`.
    Const { name: Name, category: CatExpr },
    /// `external n : <cat>`.
    External { name: Name, category: CatExpr },
    /// `n := <term>`.
    Definition { name: Name, body: SurfaceTerm },
}

impl DeclForm {
    pub fn name(&self) -> &Name {
        match self {
            DeclForm::Category { name, .. }
            | DeclForm::Alias { name, .. }
            | DeclForm::Const { name, .. }
            | DeclForm::External { name, .. }
            | DeclForm::Definition { name, .. } => name,
        }
    }
}

/// Terms as written. Abstractions keep their whole binder group; the binder
/// case rule (uppercase = category binder) is applied during elaboration.
#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceTerm {
    Var(Name, Span),
    Abs(Vec<Name>, Box<SurfaceTerm>, Span),
    App(Box<SurfaceTerm>, Box<SurfaceTerm>),
    /// `t[C]`; the category expression is kept uninterpreted here.
    TypeApp(Box<SurfaceTerm>, CatExpr),
    Num(Decimal, Span),
    Str(String, Span),
}

impl SurfaceTerm {
    pub fn span(&self) -> Span {
        match self {
            SurfaceTerm::Var(_, s)
            | SurfaceTerm::Abs(_, _, s)
            | SurfaceTerm::Num(_, s)
            | SurfaceTerm::Str(_, s) => *s,
            SurfaceTerm::App(f, _) => f.span(),
            SurfaceTerm::TypeApp(h, _) => h.span(),
        }
    }
}

/// Category expressions as written: names, right-associative `-` arrows,
/// bracket application `Pair[Number][Unit]`, and the binder form `X | ...`.
#[derive(Debug, Clone, PartialEq)]
pub enum CatExpr {
    Name(Name, Span),
    Arrow(Box<CatExpr>, Box<CatExpr>),
    Applied(Name, Vec<CatExpr>, Span),
    Abs(Name, Box<CatExpr>, Span),
}

impl CatExpr {
    pub fn span(&self) -> Span {
        match self {
            CatExpr::Name(_, s) | CatExpr::Applied(_, _, s) | CatExpr::Abs(_, _, s) => *s,
            CatExpr::Arrow(d, _) => d.span(),
        }
    }
}

/// Uppercase-initial identifiers name categories; everything else is a term.
pub fn is_category_name(name: &str) -> bool {
    name.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}
