//! Assemble elaborated environments from `.prism` sources: parse blocks,
//! resolve `extends` across files (search-path sources are pulled in on
//! demand), and elaborate in dependency order.

use indexmap::IndexMap;

use crate::contexts::{self, elaborate_context, ContextEnv};
use crate::diag::{Diag, ErrorCode, Result};
use crate::syntax::{self, Name, ParsedContext};

#[derive(Debug, Clone)]
pub struct SourceFile {
    pub name: String,
    pub text: String,
}

impl SourceFile {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        SourceFile {
            name: name.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Accept the paper's own context texts: unresolved names may be
    /// imported from any other loaded context, and alias equality already
    /// makes structurally equal categories interchangeable.
    pub paper_exact: bool,
}

#[derive(Debug, Default)]
pub struct LoadedContexts {
    /// Every elaborated context, in elaboration order.
    pub envs: IndexMap<Name, ContextEnv>,
    /// Context names declared per primary file, in file order.
    pub primary: Vec<(String, Vec<Name>)>,
}

impl LoadedContexts {
    pub fn env(&self, name: &str) -> Option<&ContextEnv> {
        self.envs.get(name)
    }

    /// The single context of the first primary file, or the last one defined
    /// there when a file holds several blocks.
    pub fn default_env(&self) -> Option<&ContextEnv> {
        let (_, names) = self.primary.first()?;
        names.last().and_then(|n| self.envs.get(n))
    }
}

struct Pending {
    file: String,
    parsed: ParsedContext,
    primary: bool,
}

/// Parse and elaborate `primaries` (files named on the command line) with
/// `search` files (context-path) available to satisfy `extends` and, under
/// paper-exact mode, unresolved names.
pub fn load_contexts(
    primaries: &[SourceFile],
    search: &[SourceFile],
    opts: LoadOptions,
) -> Result<LoadedContexts> {
    let mut pending: IndexMap<Name, Pending> = IndexMap::new();
    let mut out = LoadedContexts::default();

    for file in primaries {
        let blocks = parse_source(file)?;
        let mut names = Vec::new();
        for parsed in blocks {
            let name = parsed.header.name.clone();
            if pending.contains_key(&name) {
                return Err(Diag::new(
                    ErrorCode::DuplicateName,
                    format!("context {name} is declared more than once"),
                )
                .with_file(file.name.clone()));
            }
            names.push(name.clone());
            pending.insert(
                name,
                Pending {
                    file: file.name.clone(),
                    parsed,
                    primary: true,
                },
            );
        }
        out.primary.push((file.name.clone(), names));
    }

    for file in search {
        let Ok(blocks) = parse_source(file) else {
            // Search-path files that fail to parse are skipped; they only
            // matter when something references them.
            continue;
        };
        for parsed in blocks {
            let name = parsed.header.name.clone();
            if name == "Core1" || pending.contains_key(&name) {
                continue;
            }
            pending.insert(
                name,
                Pending {
                    file: file.name.clone(),
                    parsed,
                    primary: false,
                },
            );
        }
    }

    // Under paper-exact every search-path context that elaborates becomes a
    // fallback; otherwise only contexts reachable via extends are built.
    let want: Vec<Name> = pending
        .iter()
        .filter(|(_, p)| p.primary || opts.paper_exact)
        .map(|(n, _)| n.clone())
        .collect();

    let mut in_progress: Vec<Name> = Vec::new();
    for name in &want {
        let required = pending[name].primary;
        if let Err(d) = elaborate_rec(name, &pending, &mut out.envs, &mut in_progress, opts) {
            if required {
                return Err(d);
            }
        }
    }
    Ok(out)
}

fn parse_source(file: &SourceFile) -> Result<Vec<ParsedContext>> {
    let tokens = syntax::tokenize(&file.text).map_err(|d| d.with_file(file.name.clone()))?;
    syntax::parse_file(&tokens).map_err(|d| d.with_file(file.name.clone()))
}

fn elaborate_rec(
    name: &str,
    pending: &IndexMap<Name, Pending>,
    envs: &mut IndexMap<Name, ContextEnv>,
    in_progress: &mut Vec<Name>,
    opts: LoadOptions,
) -> Result<()> {
    if envs.contains_key(name) {
        return Ok(());
    }
    if in_progress.iter().any(|n| n == name) {
        return Err(Diag::new(
            ErrorCode::ContextCycle,
            format!("context extends cycle through {name}"),
        ));
    }
    let Some(entry) = pending.get(name) else {
        if name == "Core1" {
            envs.insert("Core1".into(), contexts::core1().clone());
            return Ok(());
        }
        return Err(Diag::new(
            ErrorCode::UnknownParentContext,
            format!("unknown context `{name}`"),
        ));
    };

    in_progress.push(name.to_string());
    for parent in entry.parsed.header.extends.clone() {
        elaborate_rec(&parent, pending, envs, in_progress, opts)
            .map_err(|d| d.with_file(entry.file.clone()))?;
    }
    in_progress.pop();

    let parents: Vec<&ContextEnv> = entry
        .parsed
        .header
        .extends
        .iter()
        .map(|p| envs.get(p).expect("parent elaborated"))
        .collect();
    let fallbacks: Vec<&ContextEnv> = if opts.paper_exact {
        envs.values().filter(|e| e.name != name).collect()
    } else {
        Vec::new()
    };
    let env = elaborate_context(&entry.parsed, &parents, &fallbacks)
        .map_err(|d| d.with_file(entry.file.clone()))?;
    envs.insert(name.to_string(), env);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn src(name: &str, text: &str) -> SourceFile {
        SourceFile::new(name, text)
    }

    fn corpus_search() -> Vec<SourceFile> {
        corpus::context_files()
            .iter()
            .map(|c| src(c.file, c.source))
            .collect()
    }

    #[test]
    fn single_file_over_builtin_core1() {
        let loaded = load_contexts(
            &[src("thermostat.prism", corpus::THERMOSTAT_SOURCE)],
            &[],
            LoadOptions::default(),
        )
        .unwrap();
        assert!(loaded.env("ThermostatControl").is_some());
        assert_eq!(loaded.default_env().unwrap().name, "ThermostatControl");
    }

    #[test]
    fn core1_source_file_is_accepted() {
        let loaded = load_contexts(
            &[src("core1.prism", corpus::CORE1_SOURCE)],
            &[],
            LoadOptions::default(),
        )
        .unwrap();
        let env = loaded.env("Core1").unwrap();
        assert_eq!(env.definitions.len(), 6);
        assert!(env.notes.is_empty());
    }

    #[test]
    fn extends_resolution_through_search_path() {
        let child = "----context\ncontext Cozy extends ThermostatControl\n\ncozyPolicy := maintainThermostat\n";
        let loaded = load_contexts(
            &[src("cozy.prism", child)],
            &corpus_search(),
            LoadOptions::default(),
        )
        .unwrap();
        assert!(loaded.env("Cozy").is_some());
        assert!(loaded.env("ThermostatControl").is_some());
        // Unreferenced search contexts are not elaborated eagerly.
        assert!(loaded.env("HomeSecurity").is_none());
    }

    #[test]
    fn unknown_parent_reported() {
        let child = "----context\ncontext X extends Nowhere\n";
        let err = load_contexts(&[src("x.prism", child)], &[], LoadOptions::default())
            .unwrap_err();
        assert_eq!(err.code, ErrorCode::UnknownParentContext);
    }

    #[test]
    fn extends_cycle_reported() {
        let a = "----context\ncontext A extends B\n";
        let b = "----context\ncontext B extends A\n";
        let err = load_contexts(
            &[src("a.prism", a), src("b.prism", b)],
            &[],
            LoadOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err.code, ErrorCode::ContextCycle);
    }

    #[test]
    fn paper_exact_medical_imports_thermostat_predicates() {
        let strict = load_contexts(
            &[src("medical_paper.prism", corpus::MEDICAL_PAPER_SOURCE)],
            &corpus_search(),
            LoadOptions::default(),
        );
        let err = strict.unwrap_err();
        assert_eq!(err.code, ErrorCode::UnresolvedReference);
        assert!(err.message.contains("gtTemp"));

        let relaxed = load_contexts(
            &[src("medical_paper.prism", corpus::MEDICAL_PAPER_SOURCE)],
            &corpus_search(),
            LoadOptions { paper_exact: true },
        )
        .unwrap();
        let env = relaxed.env("MedicalAlert").unwrap();
        assert!(env.externals.contains_key("gtTemp"));
        let monitor = env.definitions.get("monitorPatient").unwrap();
        let cat = monitor.category.as_ref().unwrap();
        assert_eq!(cat.to_string(), "Patient - Response");
    }
}
