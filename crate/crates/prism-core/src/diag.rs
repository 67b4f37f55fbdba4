//! Diagnostics: error kinds, codes and the `file:line:col: error[EXXX]: msg` rendering.

use std::fmt;

/// Source position, 1-based line and column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Stable error code families:
/// E00x lexer, E01x parser, E02x kernel, E03x contexts, E04x typing,
/// E05x eval, E06x runtime, E07x analyze.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCode {
    UnterminatedString,
    IllegalCharacter,
    NumberTooLarge,
    UnexpectedToken,
    MissingHeader,
    EmptyBinderList,
    DanglingPipe,
    DuplicateBinder,
    KindMismatch,
    DuplicateName,
    UnknownParentContext,
    UnresolvedReference,
    RecursiveAlias,
    RoleCycle,
    NotFound,
    AliasArity,
    CategoryAsTerm,
    ContextCycle,
    NotAFunction,
    ArgumentMismatch,
    NotPolymorphic,
    UnboundVariable,
    CannotInfer,
    FuelExhausted,
    ShapeMismatch,
    NotDecodable,
    ScenarioParse,
    UnknownExternal,
    UnboundExternalResult,
    UnitMismatch,
    NotAnAction,
    TooManySites,
    UnknownSiteReference,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        use ErrorCode::*;
        match self {
            UnterminatedString => "E001",
            IllegalCharacter => "E002",
            NumberTooLarge => "E003",
            UnexpectedToken => "E010",
            MissingHeader => "E011",
            EmptyBinderList => "E012",
            DanglingPipe => "E013",
            DuplicateBinder => "E014",
            KindMismatch => "E020",
            DuplicateName => "E030",
            UnknownParentContext => "E031",
            UnresolvedReference => "E032",
            RecursiveAlias => "E033",
            RoleCycle => "E034",
            NotFound => "E035",
            AliasArity => "E036",
            CategoryAsTerm => "E037",
            ContextCycle => "E038",
            NotAFunction => "E040",
            ArgumentMismatch => "E041",
            NotPolymorphic => "E042",
            UnboundVariable => "E043",
            CannotInfer => "E044",
            FuelExhausted => "E050",
            ShapeMismatch => "E051",
            NotDecodable => "E052",
            ScenarioParse => "E060",
            UnknownExternal => "E061",
            UnboundExternalResult => "E062",
            UnitMismatch => "E063",
            NotAnAction => "E064",
            TooManySites => "E070",
            UnknownSiteReference => "E071",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A positioned diagnostic. `file` is attached by whichever driver knows it.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct Diag {
    pub code: ErrorCode,
    pub message: String,
    pub span: Option<Span>,
    pub file: Option<String>,
}

impl Diag {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Diag {
            code,
            message: message.into(),
            span: None,
            file: None,
        }
    }

    pub fn at(code: ErrorCode, span: Span, message: impl Into<String>) -> Self {
        Diag {
            code,
            message: message.into(),
            span: Some(span),
            file: None,
        }
    }

    pub fn with_file(mut self, file: impl Into<String>) -> Self {
        if self.file.is_none() {
            self.file = Some(file.into());
        }
        self
    }

    /// Attach a span only if the diagnostic does not already carry one.
    pub fn with_span_default(mut self, span: Span) -> Self {
        if self.span.is_none() {
            self.span = Some(span);
        }
        self
    }

    /// `file:line:col: error[EXXX]: message`, dropping the prefix parts that
    /// are unknown.
    pub fn rendered(&self) -> String {
        let mut out = String::new();
        if let Some(file) = &self.file {
            out.push_str(file);
            out.push(':');
        }
        if let Some(span) = &self.span {
            out.push_str(&format!("{span}: "));
        } else if self.file.is_some() {
            out.push(' ');
        }
        out.push_str(&format!("error[{}]: {}", self.code, self.message));
        out
    }
}

impl fmt::Display for Diag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.rendered())
    }
}

pub type Result<T> = std::result::Result<T, Diag>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rendering_with_and_without_position() {
        let d = Diag::at(ErrorCode::UnexpectedToken, Span::new(3, 7), "expected `:=`")
            .with_file("demo.prism");
        assert_eq!(d.rendered(), "demo.prism:3:7: error[E010]: expected `:=`");

        let bare = Diag::new(ErrorCode::UnitMismatch, "celsius vs fahrenheit");
        assert_eq!(bare.rendered(), "error[E063]: celsius vs fahrenheit");
    }
}
