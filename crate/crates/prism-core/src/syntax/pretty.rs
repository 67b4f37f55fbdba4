//! Canonical printing of surface syntax. Output reparses to an
//! alpha-equivalent tree with minimal parentheses.

use super::{CatExpr, DeclForm, ParsedContext, SurfaceTerm};

#[derive(Clone, Copy, PartialEq)]
enum TermPos {
    Top,
    AppHead,
    AppArg,
    CatHead,
}

pub fn pretty_surface(term: &SurfaceTerm) -> String {
    let mut out = String::new();
    write_term(term, TermPos::Top, &mut out);
    out
}

fn write_term(term: &SurfaceTerm, pos: TermPos, out: &mut String) {
    match term {
        SurfaceTerm::Var(name, _) => out.push_str(name),
        SurfaceTerm::Num(value, _) => out.push_str(&value.to_string()),
        SurfaceTerm::Str(text, _) => out.push_str(&escape(text)),
        SurfaceTerm::Abs(binders, body, _) => {
            let parens = pos != TermPos::Top;
            if parens {
                out.push('(');
            }
            out.push_str(&binders.join(", "));
            out.push_str(" | ");
            write_term(body, TermPos::Top, out);
            if parens {
                out.push(')');
            }
        }
        SurfaceTerm::App(fun, arg) => {
            let parens = matches!(pos, TermPos::AppArg | TermPos::CatHead);
            if parens {
                out.push('(');
            }
            write_term(fun, TermPos::AppHead, out);
            out.push(' ');
            write_term(arg, TermPos::AppArg, out);
            if parens {
                out.push(')');
            }
        }
        SurfaceTerm::TypeApp(head, cat) => {
            write_term(head, TermPos::CatHead, out);
            out.push('[');
            out.push_str(&pretty_cat_expr(cat));
            out.push(']');
        }
    }
}

pub(crate) fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            other => out.push(other),
        }
    }
    out.push('"');
    out
}

#[derive(Clone, Copy, PartialEq)]
enum CatPos {
    Top,
    ArrowDomain,
    ArrowCodomain,
}

pub fn pretty_cat_expr(cat: &CatExpr) -> String {
    let mut out = String::new();
    write_cat(cat, CatPos::Top, &mut out);
    out
}

fn write_cat(cat: &CatExpr, pos: CatPos, out: &mut String) {
    match cat {
        CatExpr::Name(name, _) => out.push_str(name),
        CatExpr::Applied(name, args, _) => {
            out.push_str(name);
            for arg in args {
                out.push('[');
                write_cat(arg, CatPos::Top, out);
                out.push(']');
            }
        }
        CatExpr::Arrow(dom, cod) => {
            let parens = pos == CatPos::ArrowDomain;
            if parens {
                out.push('(');
            }
            write_cat(dom, CatPos::ArrowDomain, out);
            out.push_str(" - ");
            write_cat(cod, CatPos::ArrowCodomain, out);
            if parens {
                out.push(')');
            }
        }
        CatExpr::Abs(binder, body, _) => {
            let parens = pos != CatPos::Top;
            if parens {
                out.push('(');
            }
            out.push_str(binder);
            out.push_str(" | ");
            write_cat(body, CatPos::Top, out);
            if parens {
                out.push(')');
            }
        }
    }
}

/// Canonical source form of a context block. Comments are not preserved
/// (the lexer strips them) and bare category names come out as `type N`.
pub fn format_context(ctx: &ParsedContext) -> String {
    let mut out = String::from("----context\ncontext ");
    out.push_str(&ctx.header.name);
    if !ctx.header.extends.is_empty() {
        out.push_str(" extends ");
        out.push_str(&ctx.header.extends.join(", "));
    }
    out.push('\n');
    if !ctx.decls.is_empty() {
        out.push('\n');
    }
    for decl in &ctx.decls {
        match &decl.form {
            DeclForm::Category { name, parent: None } => {
                out.push_str(&format!("type {name}\n"));
            }
            DeclForm::Category {
                name,
                parent: Some(parent),
            } => {
                out.push_str(&format!("type {name} extends {parent}\n"));
            }
            DeclForm::Alias { name, params, body } => {
                out.push_str("type ");
                out.push_str(name);
                for p in params {
                    out.push(' ');
                    out.push_str(p);
                }
                out.push_str(" := ");
                out.push_str(&pretty_cat_expr(body));
                out.push('\n');
            }
            DeclForm::Const { name, category } => {
                out.push_str(&format!("{name} : {}\n", pretty_cat_expr(category)));
            }
            DeclForm::External { name, category } => {
                out.push_str(&format!("external {name} : {}\n", pretty_cat_expr(category)));
            }
            DeclForm::Definition { name, body } => {
                out.push_str(&format!("{name} := {}\n", pretty_surface(body)));
            }
        }
    }
    out
}
