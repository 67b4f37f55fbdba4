//! Recursive-descent parser for context files and standalone expressions.
//!
//! Declarations start at the beginning of a line; a definition body keeps
//! consuming application arguments (which may span lines) until the next
//! token would begin a new declaration. Category expressions are
//! self-delimiting, so they need no such rule.

use super::lexer::{Keyword, Token, TokenKind};
use super::{CatExpr, ContextHeader, DeclForm, ParsedContext, SurfaceDecl, SurfaceTerm};
use crate::decimal::Decimal;
use crate::diag::{Diag, ErrorCode, Result, Span};

/// Parse a file that may hold several `----context` blocks.
pub fn parse_file(tokens: &[Token]) -> Result<Vec<ParsedContext>> {
    let mut p = Parser::new(tokens);
    let mut blocks = Vec::new();
    while !p.at_end() {
        blocks.push(p.parse_block()?);
    }
    if blocks.is_empty() {
        return Err(Diag::new(ErrorCode::MissingHeader, "empty context file"));
    }
    Ok(blocks)
}

/// Parse a file expected to hold exactly one `----context` block.
pub fn parse_context_file(tokens: &[Token]) -> Result<ParsedContext> {
    let blocks = parse_file(tokens)?;
    let mut it = blocks.into_iter();
    let first = it.next().unwrap();
    if let Some(extra) = it.next() {
        return Err(Diag::at(
            ErrorCode::UnexpectedToken,
            extra.header.span,
            "expected a single context block",
        ));
    }
    Ok(first)
}

/// Parse a standalone expression; the whole token stream must be consumed.
pub fn parse_term(tokens: &[Token]) -> Result<SurfaceTerm> {
    let mut p = Parser::new(tokens);
    p.stop_at_decls = false;
    let t = p.parse_abs()?;
    if let Some(tok) = p.peek() {
        return Err(Diag::at(
            ErrorCode::UnexpectedToken,
            tok.span,
            format!("unexpected `{}` after expression", tok.lexeme),
        ));
    }
    Ok(t)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    paren_depth: u32,
    stop_at_decls: bool,
}

impl<'a> Parser<'a> {
    fn new(tokens: &'a [Token]) -> Self {
        Parser {
            tokens,
            pos: 0,
            paren_depth: 0,
            stop_at_decls: true,
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<TokenKind> {
        self.peek().map(|t| t.kind)
    }

    fn nth_kind(&self, off: usize) -> Option<TokenKind> {
        self.tokens.get(self.pos + off).map(|t| t.kind)
    }

    fn bump(&mut self) -> &'a Token {
        let t = &self.tokens[self.pos];
        self.pos += 1;
        t
    }

    fn last_span(&self) -> Span {
        self.tokens
            .last()
            .map(|t| t.span)
            .unwrap_or(Span::new(1, 1))
    }

    fn unexpected(&self, expected: &str) -> Diag {
        match self.peek() {
            Some(tok) => Diag::at(
                ErrorCode::UnexpectedToken,
                tok.span,
                format!("expected {expected}, found `{}`", tok.lexeme),
            ),
            None => Diag::at(
                ErrorCode::UnexpectedToken,
                self.last_span(),
                format!("expected {expected}, found end of input"),
            ),
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, Span)> {
        match self.peek_kind() {
            Some(TokenKind::Ident) => {
                let t = self.bump();
                Ok((t.lexeme.clone(), t.span))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<&'a Token> {
        if self.peek_kind() == Some(kind) {
            Ok(self.bump())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn is_line_start(&self, i: usize) -> bool {
        match (self.tokens.get(i), i.checked_sub(1).and_then(|j| self.tokens.get(j))) {
            (Some(_), None) => true,
            (Some(cur), Some(prev)) => prev.span.line < cur.span.line,
            (None, _) => false,
        }
    }

    /// Would token `i` begin a new declaration? Used to delimit definition
    /// bodies, which are the only non-self-delimiting right-hand sides.
    fn is_decl_start(&self, i: usize) -> bool {
        let Some(tok) = self.tokens.get(i) else {
            return false;
        };
        if !self.is_line_start(i) {
            return false;
        }
        match tok.kind {
            TokenKind::Header => true,
            TokenKind::Keyword(Keyword::Type) | TokenKind::Keyword(Keyword::External) => true,
            TokenKind::Ident => {
                match self.tokens.get(i + 1) {
                    // Bare category name at end of input.
                    None => true,
                    Some(next) => {
                        if matches!(next.kind, TokenKind::Colon | TokenKind::Define) {
                            return true;
                        }
                        // Parameterized alias head: `Name P1 P2 :=` on one line.
                        let line = tok.span.line;
                        let mut j = i + 1;
                        while self
                            .tokens
                            .get(j)
                            .is_some_and(|t| t.kind == TokenKind::Ident && t.span.line == line)
                        {
                            j += 1;
                        }
                        if j > i + 1
                            && self
                                .tokens
                                .get(j)
                                .is_some_and(|t| t.kind == TokenKind::Define && t.span.line == line)
                        {
                            return true;
                        }
                        // Bare category name: alone on its line, and whatever
                        // follows starts a declaration itself.
                        next.span.line > line && self.is_decl_start(i + 1)
                    }
                }
            }
            _ => false,
        }
    }

    // ---- context blocks -------------------------------------------------

    fn parse_block(&mut self) -> Result<ParsedContext> {
        match self.peek_kind() {
            Some(TokenKind::Header) => {
                self.bump();
            }
            _ => {
                return Err(match self.peek() {
                    Some(t) => Diag::at(
                        ErrorCode::MissingHeader,
                        t.span,
                        "expected `----context` block header",
                    ),
                    None => Diag::new(ErrorCode::MissingHeader, "expected `----context` block header"),
                });
            }
        }
        self.expect(TokenKind::Keyword(Keyword::Context), "`context`")?;
        let (name, span) = self.expect_ident("a context name")?;
        let mut extends = Vec::new();
        if self.peek_kind() == Some(TokenKind::Keyword(Keyword::Extends)) {
            self.bump();
            loop {
                let (parent, _) = self.expect_ident("a parent context name")?;
                extends.push(parent);
                if self.peek_kind() == Some(TokenKind::Comma) {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        let mut decls = Vec::new();
        while !self.at_end() && self.peek_kind() != Some(TokenKind::Header) {
            if !self.is_line_start(self.pos) {
                return Err(self.unexpected("a declaration on a new line"));
            }
            decls.push(self.parse_decl()?);
        }
        Ok(ParsedContext {
            header: ContextHeader {
                name,
                extends,
                span,
            },
            decls,
        })
    }

    fn parse_decl(&mut self) -> Result<SurfaceDecl> {
        let span = self.peek().map(|t| t.span).unwrap_or_else(|| self.last_span());
        let form = match self.peek_kind() {
            Some(TokenKind::Keyword(Keyword::Type)) => {
                self.bump();
                let (name, name_span) = self.expect_ident("a category name")?;
                match self.peek_kind() {
                    Some(TokenKind::Keyword(Keyword::Extends)) => {
                        self.bump();
                        let (parent, _) = self.expect_ident("a parent category name")?;
                        DeclForm::Category {
                            name,
                            parent: Some(parent),
                        }
                    }
                    Some(TokenKind::Define) => {
                        self.bump();
                        let body = self.parse_cat_expr()?;
                        DeclForm::Alias {
                            name,
                            params: Vec::new(),
                            body,
                        }
                    }
                    Some(TokenKind::Ident)
                        if self.peek().unwrap().span.line == name_span.line =>
                    {
                        let params = self.parse_alias_params()?;
                        let body = self.parse_cat_expr()?;
                        DeclForm::Alias { name, params, body }
                    }
                    _ => DeclForm::Category { name, parent: None },
                }
            }
            Some(TokenKind::Keyword(Keyword::External)) => {
                self.bump();
                let (name, _) = self.expect_ident("an external name")?;
                self.expect(TokenKind::Colon, "`:`")?;
                let category = self.parse_cat_expr()?;
                DeclForm::External { name, category }
            }
            Some(TokenKind::Ident) => {
                let (name, name_span) = self.expect_ident("a name")?;
                match self.peek_kind() {
                    Some(TokenKind::Colon) => {
                        self.bump();
                        let category = self.parse_cat_expr()?;
                        DeclForm::Const { name, category }
                    }
                    Some(TokenKind::Define) => {
                        self.bump();
                        self.parse_define_rhs(name)?
                    }
                    Some(TokenKind::Ident)
                        if self.peek().unwrap().span.line == name_span.line =>
                    {
                        let params = self.parse_alias_params()?;
                        let body = self.parse_cat_expr()?;
                        DeclForm::Alias { name, params, body }
                    }
                    Some(_) if !self.is_line_start(self.pos) => {
                        return Err(self.unexpected("`:`, `:=` or end of line"));
                    }
                    _ => DeclForm::Category { name, parent: None },
                }
            }
            _ => return Err(self.unexpected("a declaration")),
        };
        Ok(SurfaceDecl { form, span })
    }

    fn parse_alias_params(&mut self) -> Result<Vec<String>> {
        let mut params = Vec::new();
        while self.peek_kind() == Some(TokenKind::Ident) {
            params.push(self.bump().lexeme.clone());
        }
        self.expect(TokenKind::Define, "`:=` after alias parameters")?;
        Ok(params)
    }

    /// `name := rhs` declares a category alias when the right-hand side is a
    /// pure category expression (uppercase names, arrows, brackets only) and
    /// a term definition otherwise.
    fn parse_define_rhs(&mut self, name: String) -> Result<DeclForm> {
        let save = self.pos;
        if let Ok(body) = self.parse_cat_expr() {
            let boundary = self.at_end()
                || self.peek_kind() == Some(TokenKind::Header)
                || self.is_decl_start(self.pos);
            if boundary && cat_expr_is_pure(&body) {
                return Ok(DeclForm::Alias {
                    name,
                    params: Vec::new(),
                    body,
                });
            }
        }
        self.pos = save;
        let body = self.parse_abs()?;
        Ok(DeclForm::Definition { name, body })
    }

    // ---- terms -----------------------------------------------------------

    fn parse_abs(&mut self) -> Result<SurfaceTerm> {
        if self.peek_kind() == Some(TokenKind::Pipe) {
            return Err(Diag::at(
                ErrorCode::DanglingPipe,
                self.peek().unwrap().span,
                "`|` without binders",
            ));
        }
        if self.peek_kind() == Some(TokenKind::Ident) {
            let save = self.pos;
            let first = self.bump();
            let span = first.span;
            let mut binders = vec![first.lexeme.clone()];
            let mut saw_comma = false;
            while self.peek_kind() == Some(TokenKind::Comma) {
                saw_comma = true;
                self.bump();
                let (b, bspan) = self.expect_ident("a binder name")?;
                if binders.contains(&b) {
                    return Err(Diag::at(
                        ErrorCode::DuplicateBinder,
                        bspan,
                        format!("duplicate binder `{b}`"),
                    ));
                }
                binders.push(b);
            }
            if self.peek_kind() == Some(TokenKind::Pipe) {
                self.bump();
                if self.at_end() {
                    return Err(self.unexpected("an abstraction body"));
                }
                let body = self.parse_abs()?;
                return Ok(SurfaceTerm::Abs(binders, Box::new(body), span));
            }
            if saw_comma {
                return Err(self.unexpected("`|` after binder list"));
            }
            self.pos = save;
        }
        self.parse_app()
    }

    fn parse_app(&mut self) -> Result<SurfaceTerm> {
        let mut t = self.parse_atom()?;
        loop {
            match self.peek_kind() {
                None
                | Some(TokenKind::RParen)
                | Some(TokenKind::RBracket)
                | Some(TokenKind::Pipe)
                | Some(TokenKind::Comma)
                | Some(TokenKind::Dash)
                | Some(TokenKind::Colon)
                | Some(TokenKind::Define)
                | Some(TokenKind::Header) => break,
                _ => {}
            }
            if self.stop_at_decls && self.paren_depth == 0 && self.is_decl_start(self.pos) {
                break;
            }
            let arg = self.parse_atom()?;
            t = SurfaceTerm::App(Box::new(t), Box::new(arg));
        }
        Ok(t)
    }

    fn parse_atom(&mut self) -> Result<SurfaceTerm> {
        let mut t = match self.peek_kind() {
            Some(TokenKind::Ident) => {
                let tok = self.bump();
                SurfaceTerm::Var(tok.lexeme.clone(), tok.span)
            }
            Some(TokenKind::Number) => {
                let tok = self.bump();
                let value: Decimal = tok
                    .lexeme
                    .parse()
                    .map_err(|_| Diag::at(ErrorCode::NumberTooLarge, tok.span, "bad numeral"))?;
                SurfaceTerm::Num(value, tok.span)
            }
            Some(TokenKind::Str) => {
                let tok = self.bump();
                SurfaceTerm::Str(unescape(&tok.lexeme), tok.span)
            }
            Some(TokenKind::LParen) => {
                self.bump();
                self.paren_depth += 1;
                let inner = self.parse_abs()?;
                self.paren_depth -= 1;
                self.expect(TokenKind::RParen, "`)`")?;
                inner
            }
            _ => return Err(self.unexpected("a term")),
        };
        while self.peek_kind() == Some(TokenKind::LBracket) {
            self.bump();
            let cat = self.parse_cat_expr()?;
            self.expect(TokenKind::RBracket, "`]`")?;
            t = SurfaceTerm::TypeApp(Box::new(t), cat);
        }
        Ok(t)
    }

    // ---- category expressions ---------------------------------------------

    fn parse_cat_expr(&mut self) -> Result<CatExpr> {
        if self.peek_kind() == Some(TokenKind::Ident)
            && self.nth_kind(1) == Some(TokenKind::Pipe)
        {
            let tok = self.bump();
            let (name, span) = (tok.lexeme.clone(), tok.span);
            self.bump(); // `|`
            let body = self.parse_cat_expr()?;
            return Ok(CatExpr::Abs(name, Box::new(body), span));
        }
        self.parse_cat_arrow()
    }

    fn parse_cat_arrow(&mut self) -> Result<CatExpr> {
        let lhs = self.parse_cat_atom()?;
        if self.peek_kind() == Some(TokenKind::Dash) {
            self.bump();
            let rhs = self.parse_cat_arrow()?;
            return Ok(CatExpr::Arrow(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn parse_cat_atom(&mut self) -> Result<CatExpr> {
        match self.peek_kind() {
            Some(TokenKind::Ident) => {
                let tok = self.bump();
                let (name, span) = (tok.lexeme.clone(), tok.span);
                let mut args = Vec::new();
                while self.peek_kind() == Some(TokenKind::LBracket) {
                    self.bump();
                    args.push(self.parse_cat_expr()?);
                    self.expect(TokenKind::RBracket, "`]`")?;
                }
                if args.is_empty() {
                    Ok(CatExpr::Name(name, span))
                } else {
                    Ok(CatExpr::Applied(name, args, span))
                }
            }
            Some(TokenKind::LParen) => {
                self.bump();
                let inner = self.parse_cat_expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(self.unexpected("a category")),
        }
    }
}

fn cat_expr_is_pure(c: &CatExpr) -> bool {
    match c {
        CatExpr::Name(n, _) => super::is_category_name(n),
        CatExpr::Arrow(d, c) => cat_expr_is_pure(d) && cat_expr_is_pure(c),
        CatExpr::Applied(n, args, _) => {
            super::is_category_name(n) && args.iter().all(cat_expr_is_pure)
        }
        CatExpr::Abs(b, body, _) => super::is_category_name(b) && cat_expr_is_pure(body),
    }
}

fn unescape(lexeme: &str) -> String {
    let inner = &lexeme[1..lexeme.len() - 1];
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some(other) => out.push(other),
                None => {}
            }
        } else {
            out.push(c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::lexer::tokenize;
    use super::*;

    fn term(src: &str) -> SurfaceTerm {
        parse_term(&tokenize(src).unwrap()).unwrap()
    }

    fn block(src: &str) -> ParsedContext {
        parse_context_file(&tokenize(src).unwrap()).unwrap()
    }

    #[test]
    fn abstraction_groups_nest_right() {
        let t = term("X | a, b | a");
        match t {
            SurfaceTerm::Abs(outer, body, _) => {
                assert_eq!(outer, ["X"]);
                match *body {
                    SurfaceTerm::Abs(inner, leaf, _) => {
                        assert_eq!(inner, ["a", "b"]);
                        assert!(matches!(*leaf, SurfaceTerm::Var(ref n, _) if n == "a"));
                    }
                    other => panic!("expected inner abs, got {other:?}"),
                }
            }
            other => panic!("expected abs, got {other:?}"),
        }
    }

    #[test]
    fn application_is_left_associative() {
        let t = term("f a b c");
        let SurfaceTerm::App(fab, c) = t else {
            panic!()
        };
        assert!(matches!(*c, SurfaceTerm::Var(ref n, _) if n == "c"));
        let SurfaceTerm::App(fa, b) = *fab else {
            panic!()
        };
        assert!(matches!(*b, SurfaceTerm::Var(ref n, _) if n == "b"));
        let SurfaceTerm::App(f, a) = *fa else { panic!() };
        assert!(matches!(*f, SurfaceTerm::Var(ref n, _) if n == "f"));
        assert!(matches!(*a, SurfaceTerm::Var(ref n, _) if n == "a"));
    }

    #[test]
    fn bracket_binds_tightest() {
        let t = term("b1[Bool] b2 false");
        let SurfaceTerm::App(head, fal) = t else {
            panic!()
        };
        assert!(matches!(*fal, SurfaceTerm::Var(ref n, _) if n == "false"));
        let SurfaceTerm::App(b1bool, b2) = *head else {
            panic!()
        };
        assert!(matches!(*b2, SurfaceTerm::Var(ref n, _) if n == "b2"));
        match *b1bool {
            SurfaceTerm::TypeApp(b1, CatExpr::Name(ref c, _)) => {
                assert!(matches!(*b1, SurfaceTerm::Var(ref n, _) if n == "b1"));
                assert_eq!(c, "Bool");
            }
            other => panic!("expected type application, got {other:?}"),
        }
    }

    #[test]
    fn dangling_pipe_and_binder_errors() {
        let err = parse_term(&tokenize("| a").unwrap()).unwrap_err();
        assert_eq!(err.code, ErrorCode::DanglingPipe);
        let err = parse_term(&tokenize("a, a | a").unwrap()).unwrap_err();
        assert_eq!(err.code, ErrorCode::DuplicateBinder);
        let err = parse_term(&tokenize("a, b c").unwrap()).unwrap_err();
        assert_eq!(err.code, ErrorCode::UnexpectedToken);
    }

    #[test]
    fn empty_context_block() {
        let ctx = block("----context\ncontext X extends Core1");
        assert_eq!(ctx.header.name, "X");
        assert_eq!(ctx.header.extends, ["Core1"]);
        assert!(ctx.decls.is_empty());
    }

    #[test]
    fn missing_header() {
        let err = parse_context_file(&tokenize("context X").unwrap()).unwrap_err();
        assert_eq!(err.code, ErrorCode::MissingHeader);
    }

    #[test]
    fn bare_category_names_and_aliases() {
        let ctx = block("----context\ncontext C\n\nNumber\nUnit\nBool := X | X - X - X\n");
        assert_eq!(ctx.decls.len(), 3);
        assert!(matches!(
            &ctx.decls[0].form,
            DeclForm::Category { name, parent: None } if name == "Number"
        ));
        assert!(matches!(
            &ctx.decls[2].form,
            DeclForm::Alias { name, params, .. } if name == "Bool" && params.is_empty()
        ));
    }

    #[test]
    fn define_rhs_disambiguation() {
        let ctx = block(concat!(
            "----context\ncontext C extends Core1\n\n",
            "Temperature := Pair[Number][Unit]\n",
            "temp := n, u | pair[Number][Unit] n u\n",
        ));
        assert!(matches!(&ctx.decls[0].form, DeclForm::Alias { .. }));
        assert!(matches!(&ctx.decls[1].form, DeclForm::Definition { .. }));
    }

    #[test]
    fn parameterized_alias_heads() {
        let ctx = block(concat!(
            "----context\ncontext C\n\n",
            "not := b | b[Bool] false true\n",
            "List T    := R | (T - R - R) - R - R\n",
            "Pair U V := X | (U - V - X) - X\n",
        ));
        assert_eq!(ctx.decls.len(), 3);
        assert!(matches!(&ctx.decls[0].form, DeclForm::Definition { .. }));
        assert!(
            matches!(&ctx.decls[1].form, DeclForm::Alias { name, params, .. } if name == "List" && params == &["T"])
        );
        assert!(
            matches!(&ctx.decls[2].form, DeclForm::Alias { name, params, .. } if name == "Pair" && params == &["U", "V"])
        );
    }

    #[test]
    fn multiline_definition_body_stops_at_next_decl() {
        let ctx = block(concat!(
            "----context\ncontext C\n\n",
            "policy :=\n",
            "  (f a)[Act]\n",
            "  doA\n",
            "  ((g b)[Act]\n",
            "    doB\n",
            "    doC)\n",
            "other : Act\n",
        ));
        assert_eq!(ctx.decls.len(), 2);
        assert!(matches!(&ctx.decls[0].form, DeclForm::Definition { name, .. } if name == "policy"));
        assert!(matches!(&ctx.decls[1].form, DeclForm::Const { name, .. } if name == "other"));
    }

    #[test]
    fn type_alias_form() {
        let ctx = block("----context\ncontext C extends Core1\n\ntype VitalSign := Pair[Number][Unit]\n");
        assert!(matches!(
            &ctx.decls[0].form,
            DeclForm::Alias { name, .. } if name == "VitalSign"
        ));
    }

    #[test]
    fn string_unescaping() {
        let t = term("f \"a\\nb\"");
        let SurfaceTerm::App(_, arg) = t else { panic!() };
        assert!(matches!(*arg, SurfaceTerm::Str(ref s, _) if s == "a\nb"));
    }
}
