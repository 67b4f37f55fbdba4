//! Host values: the small data universe exchanged with scenarios, and its
//! JSON document encoding (numbers carried as strings to stay exact).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::contexts::ContextEnv;
use crate::decimal::Decimal;
use crate::diag::{Diag, ErrorCode, Result};
use crate::kernel::Category;
use crate::syntax::Name;
use crate::typing;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum HostValue {
    Num(Decimal),
    Text(String),
    /// A declared constant or external, together with its category's name.
    Atom(Name, Name),
    Bool(bool),
    Pair(Box<HostValue>, Box<HostValue>),
}

impl HostValue {
    pub fn pair(left: HostValue, right: HostValue) -> HostValue {
        HostValue::Pair(Box::new(left), Box::new(right))
    }
}

impl fmt::Display for HostValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HostValue::Num(d) => write!(f, "{d}"),
            HostValue::Text(s) => f.write_str(&crate::syntax::pretty_escape(s)),
            HostValue::Atom(name, _) => f.write_str(name),
            HostValue::Bool(b) => write!(f, "{b}"),
            HostValue::Pair(l, r) => write!(f, "({l}, {r})"),
        }
    }
}

/// The wire/file spelling of a value: `{"num": "23"}`, `{"str": ...}`,
/// `{"atom": ...}`, `{"bool": ...}` or `{"pair": [l, r]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueDoc {
    Num(String),
    Str(String),
    Atom(String),
    Bool(bool),
    Pair(Box<(ValueDoc, ValueDoc)>),
}

impl HostValue {
    pub fn to_doc(&self) -> ValueDoc {
        match self {
            HostValue::Num(d) => ValueDoc::Num(d.to_string()),
            HostValue::Text(s) => ValueDoc::Str(s.clone()),
            HostValue::Atom(name, _) => ValueDoc::Atom(name.clone()),
            HostValue::Bool(b) => ValueDoc::Bool(*b),
            HostValue::Pair(l, r) => ValueDoc::Pair(Box::new((l.to_doc(), r.to_doc()))),
        }
    }

    /// Shape-check a document against an expected category and resolve atoms.
    pub fn from_doc(env: &ContextEnv, doc: &ValueDoc, expected: &Category) -> Result<HostValue> {
        let mismatch = |what: &str| {
            Diag::new(
                ErrorCode::ShapeMismatch,
                format!("{what} does not fit category {expected}"),
            )
        };
        match doc {
            ValueDoc::Num(text) => {
                if !is_base(env, expected, "Number") {
                    return Err(mismatch(&format!("number `{text}`")));
                }
                let value: Decimal = text.parse().map_err(|_| {
                    Diag::new(
                        ErrorCode::ShapeMismatch,
                        format!("malformed decimal `{text}`"),
                    )
                })?;
                Ok(HostValue::Num(value))
            }
            ValueDoc::Str(text) => {
                if !is_base(env, expected, "String") {
                    return Err(mismatch("string"));
                }
                Ok(HostValue::Text(text.clone()))
            }
            ValueDoc::Bool(b) => {
                if !env.is_bool_category(expected) {
                    return Err(mismatch(&format!("boolean `{b}`")));
                }
                Ok(HostValue::Bool(*b))
            }
            ValueDoc::Atom(name) => {
                let declared = env
                    .atom_category(name)
                    .ok_or_else(|| mismatch(&format!("unknown atom `{name}`")))?;
                if !typing::categories_equal(env, declared, expected)
                    && !typing::is_subtype(env, declared, expected)
                {
                    return Err(mismatch(&format!("atom `{name}` of category {declared}")));
                }
                Ok(HostValue::Atom(name.clone(), declared.to_string()))
            }
            ValueDoc::Pair(parts) => {
                let Some((left_cat, right_cat)) = env.as_pair_category(expected) else {
                    return Err(mismatch("pair"));
                };
                let (l, r) = (&parts.0, &parts.1);
                Ok(HostValue::pair(
                    HostValue::from_doc(env, l, &left_cat)?,
                    HostValue::from_doc(env, r, &right_cat)?,
                ))
            }
        }
    }
}

fn is_base(env: &ContextEnv, cat: &Category, name: &str) -> bool {
    matches!(env.expand_head(cat), Ok(Category::Base(n)) if n == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doc_json_shapes() {
        let doc = ValueDoc::Pair(Box::new((
            ValueDoc::Num("25".into()),
            ValueDoc::Atom("celsius".into()),
        )));
        let text = serde_json::to_string(&doc).unwrap();
        assert_eq!(text, r#"{"pair":[{"num":"25"},{"atom":"celsius"}]}"#);
        let back: ValueDoc = serde_json::from_str(&text).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn display_forms() {
        let v = HostValue::pair(
            HostValue::Num("25".parse().unwrap()),
            HostValue::Atom("celsius".into(), "Unit".into()),
        );
        assert_eq!(v.to_string(), "(25, celsius)");
        assert_eq!(HostValue::Text("hi\"".into()).to_string(), "\"hi\\\"\"");
        assert_eq!(HostValue::Bool(true).to_string(), "true");
    }
}
