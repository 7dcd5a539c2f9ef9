//! Reading task files.
//!
//! A task directory holds `domain.pddl`, one `<agent>.problem.pddl` per agent
//! (agents are ordered by file name) and optionally `<agent>.shared.pddl`
//! next to a problem file.

mod ast;
mod ground;
mod parse;
mod sexpr;

use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use ast::{ActionSchema, Condition, DomainAst, EffectAst, ProblemAst, SharedDataDecl, SharedEntry, Term, Typed, VarSchema};
pub use ground::{agent_views, build_task, ground, var_label, GroundSpec, View};
pub use parse::{parse_domain, parse_problem, parse_shared};
pub use sexpr::{parse_all, parse_one, Pos, SExpr};

use crate::task::{MapTask, TaskError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseError {
    Syntax { pos: Pos, message: String },
    Semantic { pos: Pos, token: String, message: String },
}

impl ParseError {
    pub fn syntax(pos: Pos, message: &str) -> Self {
        ParseError::Syntax { pos, message: message.to_string() }
    }

    pub fn semantic(pos: Pos, token: &str, message: &str) -> Self {
        ParseError::Semantic { pos, token: token.to_string(), message: message.to_string() }
    }

    pub fn pos(&self) -> Pos {
        match self {
            ParseError::Syntax { pos, .. } | ParseError::Semantic { pos, .. } => *pos,
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Syntax { pos, message } => write!(f, "syntax error at {pos}: {message}"),
            ParseError::Semantic { pos, token, message } => write!(f, "error at {pos}: {message}: `{token}`"),
        }
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Error)]
pub enum FrontendError {
    #[error("{file}: {error}")]
    Parse { file: String, error: ParseError },
    #[error("{message}: `{token}`")]
    Semantic { token: String, message: String },
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("{path}: {error}")]
    Io { path: String, error: std::io::Error },
    #[error("{0}")]
    Layout(String),
}

/// Parsed contents of a task directory, before grounding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskFiles {
    pub domain: DomainAst,
    pub problems: Vec<ProblemAst>,
    pub shared: Vec<Option<SharedDataDecl>>,
    pub paths: Vec<PathBuf>,
}

impl TaskFiles {
    pub fn build(&self) -> Result<MapTask, FrontendError> {
        build_task(&self.domain, &self.problems, &self.shared)
    }
}

fn read(path: &Path) -> Result<String, FrontendError> {
    std::fs::read_to_string(path).map_err(|error| FrontendError::Io { path: path.display().to_string(), error })
}

fn at(path: &Path) -> impl Fn(ParseError) -> FrontendError + '_ {
    move |error| FrontendError::Parse { file: path.display().to_string(), error }
}

/// Parses a domain file and the given problem files; a `<stem>.shared.pddl`
/// beside `<stem>.problem.pddl` is picked up automatically.
pub fn parse_files(domain: &Path, problems: &[PathBuf]) -> Result<TaskFiles, FrontendError> {
    let d = parse_domain(&read(domain)?).map_err(at(domain))?;
    let mut files = TaskFiles { domain: d, problems: Vec::new(), shared: Vec::new(), paths: vec![domain.to_path_buf()] };
    for p in problems {
        files.problems.push(parse_problem(&read(p)?, &files.domain).map_err(at(p))?);
        files.paths.push(p.clone());
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let shared = name.strip_suffix(".problem.pddl").map(|stem| p.with_file_name(format!("{stem}.shared.pddl")));
        match shared.filter(|s| s.exists()) {
            Some(s) => {
                files.shared.push(Some(parse_shared(&read(&s)?, &files.domain).map_err(at(&s))?));
                files.paths.push(s);
            }
            None => files.shared.push(None),
        }
    }
    Ok(files)
}

/// Problem files of a task directory, sorted by name.
pub fn problem_paths(dir: &Path) -> Result<Vec<PathBuf>, FrontendError> {
    let entries = std::fs::read_dir(dir).map_err(|error| FrontendError::Io { path: dir.display().to_string(), error })?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(".problem.pddl")))
        .collect();
    out.sort();
    if out.is_empty() {
        return Err(FrontendError::Layout(format!("{}: no *.problem.pddl files", dir.display())));
    }
    Ok(out)
}

pub fn parse_dir(dir: &Path) -> Result<TaskFiles, FrontendError> {
    let domain = dir.join("domain.pddl");
    if !domain.exists() {
        return Err(FrontendError::Layout(format!("{}: missing domain.pddl", dir.display())));
    }
    parse_files(&domain, &problem_paths(dir)?)
}

/// Parses and grounds a task directory.
pub fn load_dir(dir: &Path) -> Result<MapTask, FrontendError> {
    parse_dir(dir)?.build()
}
