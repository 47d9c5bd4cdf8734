//! Compiler and concurrent runtime for a small first-order coinductive
//! logic programming language.
//!
//! Signature files declare coinductive data types, relations over them and
//! notational definitions. The pipeline parses and classifies a signature,
//! elaborates definitions into relations, checks modes and uniqueness (so
//! execution never backtracks), compiles every relation to a small process
//! language over write-once channels and runs it demand-driven up to a
//! configurable constructor depth.

use std::fmt;

use indexmap::IndexMap;

pub mod analysis;
pub mod cli;
pub mod compiler;
pub mod elaborator;
pub mod printer;
pub mod runtime;
pub mod syntax;

use analysis::{DecisionTree, ModeTable};
use compiler::ProgramIR;
use syntax::ClassifiedSignature;

/// Any error of the static pipeline. Messages start with `line:col:` so a
/// file name can be prefixed directly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    Parse(syntax::ParseError),
    Classify(syntax::ClassifyError),
    Elab(elaborator::ElabError),
    ModeDecl(analysis::ModeDeclError),
    Mode(analysis::ModeError),
    Uniqueness(analysis::UniquenessError),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parse(e) => e.fmt(f),
            Error::Classify(e) => e.fmt(f),
            Error::Elab(e) => e.fmt(f),
            Error::ModeDecl(e) => e.fmt(f),
            Error::Mode(e) => e.fmt(f),
            Error::Uniqueness(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for Error {}

impl From<syntax::ParseError> for Error {
    fn from(e: syntax::ParseError) -> Self {
        Error::Parse(e)
    }
}
impl From<syntax::ClassifyError> for Error {
    fn from(e: syntax::ClassifyError) -> Self {
        Error::Classify(e)
    }
}
impl From<elaborator::ElabError> for Error {
    fn from(e: elaborator::ElabError) -> Self {
        Error::Elab(e)
    }
}
impl From<analysis::ModeDeclError> for Error {
    fn from(e: analysis::ModeDeclError) -> Self {
        Error::ModeDecl(e)
    }
}
impl From<analysis::ModeError> for Error {
    fn from(e: analysis::ModeError) -> Self {
        Error::Mode(e)
    }
}
impl From<analysis::UniquenessError> for Error {
    fn from(e: analysis::UniquenessError) -> Self {
        Error::Uniqueness(e)
    }
}

/// Result of the full static pipeline.
#[derive(Debug, Clone)]
pub struct CompiledProgram {
    pub sig: ClassifiedSignature,
    pub modes: ModeTable,
    pub trees: IndexMap<String, DecisionTree>,
    pub ir: ProgramIR,
}

/// parse -> classify -> elaborate -> modes -> uniqueness -> compile.
pub fn compile_source(src: &str) -> Result<CompiledProgram, Error> {
    let sig = syntax::parse_signature(src)?;
    let sig = syntax::classify(sig)?;
    let sig = elaborator::elaborate_all(&sig)?;
    let modes = analysis::resolve_modes(&sig)?;
    analysis::check_modes(&sig, &modes)?;
    let trees = analysis::build_all_trees(&sig, &modes)?;
    let ir = compiler::compile_program(&sig, &modes, &trees);
    Ok(CompiledProgram { sig, modes, trees, ir })
}
