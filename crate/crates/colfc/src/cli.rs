//! Command-line front end.
//!
//! `colfc check` runs the static pipeline (parse, classify, elaborate, mode
//! and uniqueness checking) and `colfc run` additionally compiles and
//! executes the program's main relation. Exit codes: 0 success, 1 static
//! error, 2 usage error, 3 runtime error (the partial result is still
//! printed).

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::analysis::dump_tree;
use crate::compiler::emit_ir_text;
use crate::printer::{print_proof, print_term};
use crate::runtime::{run_main, Budget, RunOptions, SchedulerKind};
use crate::syntax::{print_signature, ArgMode};
use crate::{compile_source, CompiledProgram};

#[derive(Parser)]
#[command(name = "colfc", version, about = "Compiler and runtime for coinductive logic programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse, elaborate and statically check a signature file.
    Check {
        /// Signature file (.colf).
        file: PathBuf,
        /// Print the elaborated signature (definitions turned into relations).
        #[arg(long)]
        dump_elab: bool,
        /// Print the decision tree of one relation.
        #[arg(long, value_name = "RELATION")]
        dump_tree: Option<String>,
        /// Print the compiled process code.
        #[arg(long)]
        emit_ir: bool,
    },
    /// Check a file, then execute its main relation and print the result.
    Run {
        /// Signature file (.colf).
        file: PathBuf,
        /// Constructor depth demanded from the root output.
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
        depth: u32,
        /// Global instruction budget.
        #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
        steps: u64,
        /// Use a seeded random scheduler instead of the deterministic one.
        #[arg(long)]
        seed: Option<u64>,
        /// Record and print the partial proof object.
        #[arg(long)]
        proof: bool,
        /// Print the compiled process code before running.
        #[arg(long)]
        emit_ir: bool,
        /// Relation to execute.
        #[arg(long, default_value = "main", value_name = "RELATION")]
        main: String,
    },
}

fn load_and_compile(file: &PathBuf) -> Result<CompiledProgram, String> {
    let src = std::fs::read_to_string(file)
        .map_err(|e| format!("{}: {}", file.display(), e))?;
    compile_source(&src).map_err(|e| format!("{}:{}", file.display(), e))
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_entry<I>(argv: I) -> i32
where
    I: IntoIterator<Item = String>,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{}", e);
                    0
                }
                _ => {
                    eprint!("{}", e);
                    2
                }
            }
        }
    };
    match cli.cmd {
        Cmd::Check { file, dump_elab, dump_tree: tree_of, emit_ir } => {
            let prog = match load_and_compile(&file) {
                Ok(p) => p,
                Err(msg) => {
                    eprintln!("{}", msg);
                    return 1;
                }
            };
            if dump_elab {
                print!("{}", print_signature(&prog.sig.decls));
            }
            if let Some(rel) = tree_of {
                match prog.trees.get(&rel) {
                    Some(tree) => print!("{}", dump_tree(&rel, tree)),
                    None => {
                        eprintln!("{}: no relation named '{}'", file.display(), rel);
                        return 1;
                    }
                }
            }
            if emit_ir {
                print!("{}", emit_ir_text(&prog.ir));
            }
            0
        }
        Cmd::Run { file, depth, steps, seed, proof, emit_ir, main } => {
            let prog = match load_and_compile(&file) {
                Ok(p) => p,
                Err(msg) => {
                    eprintln!("{}", msg);
                    return 1;
                }
            };
            let runnable = prog
                .ir
                .procs
                .get(&main)
                .is_some_and(|p| p.params.len() == 1 && p.params[0].mode == ArgMode::Minus);
            if !runnable {
                eprintln!(
                    "{}: '{}' must be a relation with a single output argument and no inputs",
                    file.display(),
                    main
                );
                return 1;
            }
            if emit_ir {
                print!("{}", emit_ir_text(&prog.ir));
            }
            let opts = RunOptions {
                budget: Budget::new(depth, steps),
                record_proof: proof,
                scheduler: match seed {
                    Some(s) => SchedulerKind::Seeded(s),
                    None => SchedulerKind::Fifo,
                },
            };
            let outcome = run_main(&prog.ir, &main, &opts);
            println!("{}", print_term(&outcome.term));
            if let Some(p) = &outcome.proof {
                println!();
                println!("{}", print_proof(p));
            }
            if outcome.step_budget_exhausted {
                eprintln!(
                    "warning: step budget exhausted after {} steps; the result is partial",
                    outcome.steps_used
                );
            }
            match outcome.error {
                Some(e) => {
                    eprintln!("{}: {}", file.display(), e);
                    3
                }
                None => 0,
            }
        }
    }
}
