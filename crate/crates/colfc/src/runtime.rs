//! Demand-driven execution of process code over write-once cells.
//!
//! Every relation argument is a channel backed by a cell. A cell is written
//! at most once, by the single process registered as its producer, and read
//! by any number of processes; readers of an empty cell block until the one
//! write arrives. Processes run only while the cell they produce is demanded:
//! the root output carries the depth budget, a written constructor passes
//! demand minus one to its argument cells, and a blocked read demands a
//! single constructor layer of its target. Execution therefore quiesces by
//! itself on productive-but-infinite programs, leaving undemanded cells
//! empty; those print as `...`.
//!
//! Scheduling is a deterministic FIFO round-robin by default. A seeded
//! random scheduler exists for testing the claim that observable output is
//! schedule-independent.

use std::cell::RefCell;
use std::collections::VecDeque;
use std::fmt;
use std::rc::Rc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::compiler::{Instr, ProgramIR};
use crate::printer::PartialTerm;
use crate::syntax::ArgMode;

/// Execution limits: `depth` constructor layers demanded from the root and a
/// global cap on executed instructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub depth: u32,
    pub steps: u64,
}

impl Budget {
    pub fn new(depth: u32, steps: u64) -> Budget {
        assert!(depth >= 1, "depth budget must be at least 1");
        assert!(steps >= 1, "step budget must be at least 1");
        Budget { depth, steps }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget { depth: 5, steps: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerKind {
    /// Deterministic round-robin ready queue.
    Fifo,
    /// Uniform random choice among ready processes, for determinism tests.
    Seeded(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub budget: Budget,
    pub record_proof: bool,
    pub scheduler: SchedulerKind,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            budget: Budget::default(),
            record_proof: false,
            scheduler: SchedulerKind::Fifo,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuntimeError {
    /// A read observed a constructor with no matching branch.
    Stuck { relation: String, ctor: String },
    /// Second write to a cell; indicates an analysis bug, never expected on
    /// checked programs.
    DoubleWrite { relation: String },
    /// A forwarding chain closed on itself.
    ForwardCycle { relation: String },
}

impl fmt::Display for RuntimeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuntimeError::Stuck { relation, ctor } => write!(
                f,
                "StuckProcess: process '{}' read constructor '{}' with no matching branch",
                relation, ctor
            ),
            RuntimeError::DoubleWrite { relation } => {
                write!(f, "DoubleWrite: process '{}' wrote to an already-written cell", relation)
            }
            RuntimeError::ForwardCycle { relation } => {
                write!(f, "CycleDetected: forwarding cycle created by process '{}'", relation)
            }
        }
    }
}

impl std::error::Error for RuntimeError {}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Reachable written structure from the root, truncated at undemanded or
    /// unwritten cells.
    pub term: PartialTerm,
    /// Partial proof object, when recording was requested.
    pub proof: Option<PartialTerm>,
    pub steps_used: u64,
    /// The step budget ran out with runnable processes left; the partial
    /// result is still meaningful.
    pub step_budget_exhausted: bool,
    pub error: Option<RuntimeError>,
}

// ---------------------------------------------------------------------------
// Cells and processes
// ---------------------------------------------------------------------------

type CellId = usize;
type ProcId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
enum CellState {
    Empty,
    Written { ctor: String, args: Vec<CellId> },
    Fwd(CellId),
}

#[derive(Debug)]
struct Cell {
    state: CellState,
    /// Maximum depth demanded of this cell so far; > 0 lets the producer run.
    demand: u32,
    /// Processes blocked reading this (empty) cell.
    readers: Vec<ProcId>,
    /// Process whose output channel this cell is.
    producer: Option<ProcId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ProcState {
    /// Output not demanded yet; retained but never scheduled.
    Parked,
    Ready,
    Blocked,
    Done,
}

#[derive(Debug, Clone)]
enum ProofNode {
    Unknown,
    Rule { clause: String, children: Vec<ProofRef> },
}

type ProofRef = Rc<RefCell<ProofNode>>;

struct Process<'ir> {
    relation: String,
    instr: &'ir Instr,
    env: Vec<CellId>,
    output: CellId,
    state: ProcState,
    proof: Option<ProofRef>,
    pending_children: Vec<ProofRef>,
    next_child: usize,
}

struct Exec<'ir> {
    ir: &'ir ProgramIR,
    cells: Vec<Cell>,
    procs: Vec<Process<'ir>>,
    ready: VecDeque<ProcId>,
    steps_used: u64,
    budget: Budget,
    record_proof: bool,
    rng: Option<StdRng>,
    root: CellId,
    root_proof: Option<ProofRef>,
    exhausted: bool,
    error: Option<RuntimeError>,
}

const UNBOUND: CellId = usize::MAX;

impl<'ir> Exec<'ir> {
    fn new(ir: &'ir ProgramIR, main: &str, opts: &RunOptions) -> Exec<'ir> {
        let proc_ir = ir
            .procs
            .get(main)
            .unwrap_or_else(|| panic!("relation '{}' not found", main));
        assert!(
            proc_ir.params.len() == 1 && proc_ir.params[0].mode == ArgMode::Minus,
            "'{}' must take no inputs and produce one output",
            main
        );
        let mut exec = Exec {
            ir,
            cells: Vec::new(),
            procs: Vec::new(),
            ready: VecDeque::new(),
            steps_used: 0,
            budget: opts.budget,
            record_proof: opts.record_proof,
            rng: match opts.scheduler {
                SchedulerKind::Fifo => None,
                SchedulerKind::Seeded(seed) => Some(StdRng::seed_from_u64(seed)),
            },
            root: 0,
            root_proof: None,
            exhausted: false,
            error: None,
        };
        let root = exec.new_cell();
        exec.cells[root].demand = opts.budget.depth;
        exec.root = root;
        let proof = opts
            .record_proof
            .then(|| Rc::new(RefCell::new(ProofNode::Unknown)));
        exec.root_proof = proof.clone();
        exec.spawn(main, vec![root], proof);
        exec
    }

    fn new_cell(&mut self) -> CellId {
        self.cells.push(Cell {
            state: CellState::Empty,
            demand: 0,
            readers: Vec::new(),
            producer: None,
        });
        self.cells.len() - 1
    }

    /// Chase forwarding links to the representative cell.
    fn resolve(&self, mut c: CellId) -> Result<CellId, RuntimeError> {
        let mut hops = 0usize;
        while let CellState::Fwd(next) = self.cells[c].state {
            c = next;
            hops += 1;
            if hops > self.cells.len() {
                return Err(RuntimeError::ForwardCycle { relation: "<resolve>".into() });
            }
        }
        Ok(c)
    }

    /// Raise the demand on a cell (and through written structure) to at
    /// least `d`, waking parked producers.
    fn demand(&mut self, cell: CellId, d: u32) -> Result<(), RuntimeError> {
        let mut work = vec![(cell, d)];
        while let Some((c, d)) = work.pop() {
            if d == 0 {
                continue;
            }
            let c = self.resolve(c)?;
            if d <= self.cells[c].demand {
                continue;
            }
            self.cells[c].demand = d;
            match &self.cells[c].state {
                CellState::Empty => {
                    if let Some(p) = self.cells[c].producer {
                        if self.procs[p].state == ProcState::Parked {
                            self.procs[p].state = ProcState::Ready;
                            self.ready.push_back(p);
                        }
                    }
                }
                CellState::Written { args, .. } => {
                    for &a in args {
                        work.push((a, d - 1));
                    }
                }
                CellState::Fwd(_) => unreachable!("resolved"),
            }
        }
        Ok(())
    }

    fn spawn(&mut self, relation: &str, arg_cells: Vec<CellId>, proof: Option<ProofRef>) {
        let proc_ir = &self.ir.procs[relation];
        let output = arg_cells[proc_ir.output_param_index()];
        let mut env = vec![UNBOUND; proc_ir.slot_names.len()];
        for (param, cell) in proc_ir.params.iter().zip(&arg_cells) {
            env[param.slot] = *cell;
        }
        let pid = self.procs.len();
        self.procs.push(Process {
            relation: relation.to_string(),
            instr: &proc_ir.body,
            env,
            output,
            state: ProcState::Parked,
            proof,
            pending_children: Vec::new(),
            next_child: 0,
        });
        let out = self.resolve(output).expect("fresh outputs have no cycles");
        self.cells[out].producer = Some(pid);
        if self.cells[out].demand >= 1 {
            self.procs[pid].state = ProcState::Ready;
            self.ready.push_back(pid);
        }
    }

    fn write(&mut self, pid: ProcId, cell: CellId, ctor: &str, args: Vec<CellId>) -> Result<(), RuntimeError> {
        let c = self.resolve(cell)?;
        if self.cells[c].state != CellState::Empty {
            return Err(RuntimeError::DoubleWrite { relation: self.procs[pid].relation.clone() });
        }
        self.cells[c].state = CellState::Written { ctor: ctor.to_string(), args: args.clone() };
        let readers = std::mem::take(&mut self.cells[c].readers);
        for r in readers {
            if self.procs[r].state == ProcState::Blocked {
                self.procs[r].state = ProcState::Ready;
                self.ready.push_back(r);
            }
        }
        let d = self.cells[c].demand;
        if d >= 2 {
            for a in args {
                self.demand(a, d - 1)?;
            }
        }
        Ok(())
    }

    /// Execute one instruction of one process. Returns whether the process
    /// should be rescheduled.
    fn step(&mut self, pid: ProcId) -> Result<bool, RuntimeError> {
        match self.procs[pid].instr {
            Instr::Read { chan, branches } => {
                let cell = self.resolve(self.procs[pid].env[*chan])?;
                match &self.cells[cell].state {
                    CellState::Empty => {
                        self.cells[cell].readers.push(pid);
                        self.procs[pid].state = ProcState::Blocked;
                        self.demand(cell, 1)?;
                        Ok(false)
                    }
                    CellState::Written { ctor, args } => {
                        let ctor = ctor.clone();
                        let args = args.clone();
                        match branches.iter().find(|b| b.ctor == ctor) {
                            Some(branch) => {
                                debug_assert_eq!(branch.binds.len(), args.len());
                                for (slot, cell) in branch.binds.iter().zip(args) {
                                    self.procs[pid].env[*slot] = cell;
                                }
                                self.procs[pid].instr = &branch.body;
                                Ok(true)
                            }
                            None => Err(RuntimeError::Stuck {
                                relation: self.procs[pid].relation.clone(),
                                ctor,
                            }),
                        }
                    }
                    CellState::Fwd(_) => unreachable!("resolved"),
                }
            }
            Instr::Commit { tag, next } => {
                if self.record_proof {
                    let children: Vec<ProofRef> = (0..tag.premises)
                        .map(|_| Rc::new(RefCell::new(ProofNode::Unknown)))
                        .collect();
                    if let Some(slot) = &self.procs[pid].proof {
                        *slot.borrow_mut() = ProofNode::Rule {
                            clause: tag.clause.clone(),
                            children: children.clone(),
                        };
                    }
                    self.procs[pid].pending_children = children;
                    self.procs[pid].next_child = 0;
                }
                self.procs[pid].instr = next;
                Ok(true)
            }
            Instr::Alloc { chan, next } => {
                let cell = self.new_cell();
                self.procs[pid].env[*chan] = cell;
                self.procs[pid].instr = next;
                Ok(true)
            }
            Instr::Write { chan, ctor, args, next } => {
                let target = self.procs[pid].env[*chan];
                let arg_cells: Vec<CellId> = args.iter().map(|s| self.procs[pid].env[*s]).collect();
                self.write(pid, target, ctor, arg_cells)?;
                self.procs[pid].instr = next;
                Ok(true)
            }
            Instr::Spawn { relation, args, next } => {
                let arg_cells: Vec<CellId> = args.iter().map(|s| self.procs[pid].env[*s]).collect();
                let child_proof = if self.record_proof {
                    let i = self.procs[pid].next_child;
                    self.procs[pid].next_child += 1;
                    Some(self.procs[pid].pending_children[i].clone())
                } else {
                    None
                };
                let relation = relation.clone();
                self.procs[pid].instr = next;
                self.spawn(&relation, arg_cells, child_proof);
                Ok(true)
            }
            Instr::TailCall { relation, args } => {
                let arg_cells: Vec<CellId> = args.iter().map(|s| self.procs[pid].env[*s]).collect();
                let callee = &self.ir.procs[relation.as_str()];
                let output = arg_cells[callee.output_param_index()];
                let mut env = vec![UNBOUND; callee.slot_names.len()];
                for (param, cell) in callee.params.iter().zip(&arg_cells) {
                    env[param.slot] = *cell;
                }
                if self.record_proof {
                    let i = self.procs[pid].next_child;
                    debug_assert_eq!(i + 1, self.procs[pid].pending_children.len());
                    self.procs[pid].proof = Some(self.procs[pid].pending_children[i].clone());
                    self.procs[pid].pending_children = Vec::new();
                    self.procs[pid].next_child = 0;
                }
                self.procs[pid].relation = relation.clone();
                self.procs[pid].instr = &callee.body;
                self.procs[pid].env = env;
                self.procs[pid].output = output;
                let out = self.resolve(output)?;
                self.cells[out].producer = Some(pid);
                if self.cells[out].demand >= 1 {
                    Ok(true)
                } else {
                    self.procs[pid].state = ProcState::Parked;
                    Ok(false)
                }
            }
            Instr::Forward { dst, src } => {
                let d = self.resolve(self.procs[pid].env[*dst])?;
                let s = self.resolve(self.procs[pid].env[*src])?;
                if d == s {
                    return Err(RuntimeError::ForwardCycle {
                        relation: self.procs[pid].relation.clone(),
                    });
                }
                if self.cells[d].state != CellState::Empty {
                    return Err(RuntimeError::DoubleWrite {
                        relation: self.procs[pid].relation.clone(),
                    });
                }
                self.cells[d].state = CellState::Fwd(s);
                let readers = std::mem::take(&mut self.cells[d].readers);
                match &self.cells[s].state {
                    CellState::Empty => self.cells[s].readers.extend(readers),
                    _ => {
                        for r in readers {
                            if self.procs[r].state == ProcState::Blocked {
                                self.procs[r].state = ProcState::Ready;
                                self.ready.push_back(r);
                            }
                        }
                    }
                }
                let pending = self.cells[d].demand;
                self.demand(s, pending)?;
                self.procs[pid].state = ProcState::Done;
                Ok(false)
            }
            Instr::Halt => {
                self.procs[pid].state = ProcState::Done;
                Ok(false)
            }
        }
    }

    fn pick_next(&mut self) -> Option<ProcId> {
        match &mut self.rng {
            None => self.ready.pop_front(),
            Some(rng) => {
                if self.ready.is_empty() {
                    None
                } else {
                    let i = rng.gen_range(0..self.ready.len());
                    self.ready.remove(i)
                }
            }
        }
    }

    /// Schedule until quiescence, step exhaustion or a runtime error.
    fn run(&mut self) {
        loop {
            if self.steps_used >= self.budget.steps {
                self.exhausted = !self.ready.is_empty();
                return;
            }
            let Some(pid) = self.pick_next() else { return };
            self.steps_used += 1;
            match self.step(pid) {
                Ok(true) => self.ready.push_back(pid),
                Ok(false) => {}
                Err(e) => {
                    self.error = Some(e);
                    return;
                }
            }
        }
    }

    /// Written structure reachable from a cell, truncated at `depth` layers.
    fn extract_term(&self, cell: CellId, depth: u32) -> PartialTerm {
        if depth == 0 {
            return PartialTerm::Unresolved;
        }
        let Ok(c) = self.resolve(cell) else {
            return PartialTerm::Unresolved;
        };
        match &self.cells[c].state {
            CellState::Empty => PartialTerm::Unresolved,
            CellState::Written { ctor, args } => PartialTerm::Node(
                ctor.clone(),
                args.iter().map(|&a| self.extract_term(a, depth - 1)).collect(),
            ),
            CellState::Fwd(_) => unreachable!("resolved"),
        }
    }

    fn extract_proof(node: &ProofRef) -> PartialTerm {
        match &*node.borrow() {
            ProofNode::Unknown => PartialTerm::Unresolved,
            ProofNode::Rule { clause, children } => PartialTerm::Node(
                clause.clone(),
                children.iter().map(Exec::extract_proof).collect(),
            ),
        }
    }

    fn outcome(&self) -> RunOutcome {
        RunOutcome {
            term: self.extract_term(self.root, self.budget.depth),
            proof: self.root_proof.as_ref().map(Exec::extract_proof),
            steps_used: self.steps_used,
            step_budget_exhausted: self.exhausted,
            error: self.error.clone(),
        }
    }
}

/// Run `main` (a relation with a single output argument and no inputs) to
/// quiescence under the given budget and return the reachable partial term.
pub fn run_main(ir: &ProgramIR, main: &str, opts: &RunOptions) -> RunOutcome {
    let mut exec = Exec::new(ir, main, opts);
    exec.run();
    exec.outcome()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{build_all_trees, check_modes, resolve_modes};
    use crate::compiler::compile_program;
    use crate::elaborator::elaborate_all;
    use crate::printer::print_term;
    use crate::syntax::{classify, parse_signature};

    fn compile(src: &str) -> ProgramIR {
        let sig = classify(parse_signature(src).expect("parse")).expect("classify");
        let sig = elaborate_all(&sig).expect("elaborate");
        let modes = resolve_modes(&sig).expect("modes");
        check_modes(&sig, &modes).expect("mode check");
        let trees = build_all_trees(&sig, &modes).expect("uniqueness");
        compile_program(&sig, &modes, &trees)
    }

    fn run(src: &str, depth: u32) -> RunOutcome {
        let ir = compile(src);
        let opts = RunOptions {
            budget: Budget::new(depth, 1_000_000),
            ..RunOptions::default()
        };
        run_main(&ir, "main", &opts)
    }

    const ADD: &str = "
        conat: cotype. z: conat. s: conat -> conat.
        add: conat -> conat -> conat -> cotype.
        add_z : add z A A.
        add_s : add A B C -> add (s A) B (s C).
    ";

    fn unary(n: u32) -> String {
        let mut s = "z".to_string();
        for _ in 0..n {
            s = format!("(s {})", s);
        }
        s
    }

    fn decode(t: &PartialTerm) -> Option<u32> {
        match t {
            PartialTerm::Node(c, args) if c == "z" && args.is_empty() => Some(0),
            PartialTerm::Node(c, args) if c == "s" && args.len() == 1 => {
                decode(&args[0]).map(|n| n + 1)
            }
            _ => None,
        }
    }

    #[test]
    fn add_two_and_three_is_five() {
        let src = format!(
            "{ADD}
             main : conat -> cotype.
             main_def : add {} {} C -> main C.",
            unary(2),
            unary(3)
        );
        let out = run(&src, 32);
        assert!(out.error.is_none(), "error: {:?}", out.error);
        assert_eq!(decode(&out.term), Some(5));
    }

    #[test]
    fn forward_resolves_output_to_second_input() {
        // add z (s z): the z branch forwards the second input channel, so
        // the root resolves to the very cell holding `s z`.
        let src = format!(
            "{ADD}
             main : conat -> cotype.
             main_def : add z (s z) C -> main C."
        );
        let ir = compile(&src);
        let opts = RunOptions { budget: Budget::new(8, 10_000), ..RunOptions::default() };
        let mut exec = Exec::new(&ir, "main", &opts);
        exec.run();
        assert!(exec.error.is_none());
        assert!(matches!(exec.cells[exec.root].state, CellState::Fwd(_)));
        let resolved = exec.resolve(exec.root).unwrap();
        assert!(
            matches!(&exec.cells[resolved].state, CellState::Written { ctor, .. } if ctor == "s")
        );
        assert_eq!(decode(&exec.outcome().term), Some(1));
    }

    #[test]
    fn resolve_chases_forward_chains() {
        let ir = compile(ADD);
        let opts = RunOptions::default();
        // add is never spawned here; we only want an arena to poke at.
        let src_prog = format!("{ADD} main : conat -> cotype. main_def : main z.");
        let ir2 = compile(&src_prog);
        let _ = ir;
        let mut exec = Exec::new(&ir2, "main", &opts);
        let c0 = exec.new_cell();
        let c1 = exec.new_cell();
        let c2 = exec.new_cell();
        exec.cells[c1].state = CellState::Fwd(c0);
        exec.cells[c2].state = CellState::Fwd(c1);
        assert_eq!(exec.resolve(c2).unwrap(), c0);
        assert_eq!(exec.resolve(c0).unwrap(), c0);
        // A written cell resolves to itself.
        exec.cells[c0].state = CellState::Written { ctor: "z".into(), args: vec![] };
        assert_eq!(exec.resolve(c2).unwrap(), c0);
    }

    #[test]
    fn double_write_is_reported() {
        let src = format!("{ADD} main : conat -> cotype. main_def : main z.");
        let ir = compile(&src);
        let mut exec = Exec::new(&ir, "main", &RunOptions::default());
        let c = exec.new_cell();
        exec.write(0, c, "z", vec![]).unwrap();
        let e = exec.write(0, c, "z", vec![]).unwrap_err();
        assert!(matches!(e, RuntimeError::DoubleWrite { .. }));
    }

    #[test]
    fn depth_budget_truncates_infinite_streams() {
        let src = "
            conat: cotype. z: conat. s: conat -> conat.
            stream: cotype. cons: conat -> stream -> stream.
            up : conat -> stream = [N] cons N (up (s N)).
            main : stream = up z.
        ";
        let out = run(src, 5);
        assert!(out.error.is_none());
        assert!(!out.step_budget_exhausted);
        // Element i sits below i cons layers, so it resolves to 5 - i layers.
        assert_eq!(
            print_term(&out.term),
            "(cons z (cons (s z) (cons (s (s ...)) (cons (s ...) (cons ...)))))"
        );
    }

    #[test]
    fn repeat_omega_shows_decreasing_resolution() {
        let src = "
            conat: cotype. z: conat. s: conat -> conat.
            stream: cotype. cons: conat -> stream -> stream.
            repeat : conat -> stream = [N] cons N (repeat N).
            omega : conat = s omega.
            main : stream = repeat omega.
        ";
        let out = run(src, 5);
        assert!(out.error.is_none());
        assert_eq!(
            print_term(&out.term),
            "(cons (s (s (s (s ...)))) (cons (s (s (s ...))) (cons (s (s ...)) (cons (s ...) (cons ...)))))"
        );
    }

    #[test]
    fn step_budget_exhaustion_is_a_warning_with_partial_result() {
        let src = "
            conat: cotype. z: conat. s: conat -> conat.
            omega : conat = s omega.
            main : conat = omega.
        ";
        let ir = compile(src);
        let opts = RunOptions {
            budget: Budget::new(1000, 7),
            ..RunOptions::default()
        };
        let out = run_main(&ir, "main", &opts);
        assert!(out.step_budget_exhausted);
        assert!(out.error.is_none());
        assert_eq!(out.steps_used, 7);
    }

    #[test]
    fn stuck_process_reports_relation_and_constructor() {
        let src = "
            conat: cotype. z: conat. s: conat -> conat.
            p : conat -> conat -> cotype.
            p_z : p z z.
            main : conat -> cotype.
            main_def : p (s z) R -> main R.
        ";
        let out = run(src, 8);
        match out.error {
            Some(RuntimeError::Stuck { ref relation, ref ctor }) => {
                assert_eq!(relation, "p");
                assert_eq!(ctor, "s");
            }
            other => panic!("expected stuck process, got {other:?}"),
        }
        assert_eq!(out.term, PartialTerm::Unresolved);
    }

    #[test]
    fn never_written_demanded_cells_print_unresolved() {
        // q has no clauses: the spawned process halts without writing.
        let src = "
            conat: cotype. z: conat. s: conat -> conat.
            q : conat -> cotype.
            main : conat -> cotype.
            main_def : q R -> main R.
        ";
        let out = run(src, 4);
        assert!(out.error.is_none());
        assert_eq!(out.term, PartialTerm::Unresolved);
        assert_eq!(print_term(&out.term), "...");
    }

    #[test]
    fn undemanded_processes_never_run() {
        // omega feeds repeat, but repeat never inspects it; with depth 1
        // only the first cons layer is produced and omega never runs far.
        let src = "
            conat: cotype. z: conat. s: conat -> conat.
            stream: cotype. cons: conat -> stream -> stream.
            repeat : conat -> stream = [N] cons N (repeat N).
            omega : conat = s omega.
            main : stream = repeat omega.
        ";
        let out = run(src, 1);
        assert!(out.error.is_none());
        assert_eq!(print_term(&out.term), "(cons ...)");
        assert!(out.steps_used < 50, "took {} steps", out.steps_used);
    }

    #[test]
    fn proof_tree_for_up_is_a_right_spine_of_up_def() {
        let src = "
            conat: cotype. z: conat. s: conat -> conat.
            stream: cotype. cons: conat -> stream -> stream.
            up : conat -> stream = [N] cons N (up (s N)).
            main : stream = up z.
        ";
        let ir = compile(src);
        let opts = RunOptions {
            budget: Budget::new(5, 1_000_000),
            record_proof: true,
            ..RunOptions::default()
        };
        let out = run_main(&ir, "main", &opts);
        let proof = out.proof.expect("proof recorded");
        // main_def at the root, then one up_def per resolved cons cell.
        let mut spine = match &proof {
            PartialTerm::Node(c, args) if c == "main_def" => {
                assert_eq!(args.len(), 1);
                &args[0]
            }
            other => panic!("expected main_def root, got {other:?}"),
        };
        let mut count = 0;
        loop {
            match spine {
                PartialTerm::Node(c, args) if c == "up_def" => {
                    count += 1;
                    assert_eq!(args.len(), 1);
                    spine = &args[0];
                }
                PartialTerm::Unresolved => break,
                other => panic!("unexpected proof node {other:?}"),
            }
        }
        let cons_cells = {
            fn count_cons(t: &PartialTerm) -> usize {
                match t {
                    PartialTerm::Node(c, args) => {
                        let own = usize::from(c == "cons");
                        own + args.iter().map(count_cons).sum::<usize>()
                    }
                    PartialTerm::Unresolved => 0,
                }
            }
            count_cons(&out.term)
        };
        assert_eq!(count, cons_cells);
        assert_eq!(count, 5);
    }

    #[test]
    fn proof_for_one_plus_one_is_add_s_of_add_z() {
        let src = format!(
            "{ADD}
             main : conat -> cotype.
             main_def : add (s z) (s z) C -> main C."
        );
        let ir = compile(&src);
        let opts = RunOptions {
            budget: Budget::new(8, 100_000),
            record_proof: true,
            ..RunOptions::default()
        };
        let out = run_main(&ir, "main", &opts);
        assert!(out.error.is_none());
        assert_eq!(decode(&out.term), Some(2));
        let proof = out.proof.expect("proof recorded");
        assert_eq!(crate::printer::print_proof(&proof), "(main_def (add_s add_z))");
    }

    #[test]
    fn schedules_agree_on_output() {
        let src = "
            conat: cotype. z: conat. s: conat -> conat.
            stream: cotype. cons: conat -> stream -> stream.
            up : conat -> stream = [N] cons N (up (s N)).
            add: conat -> conat -> conat -> cotype.
            add_z : add z A A.
            add_s : add A B C -> add (s A) B (s C).
            add_stream: stream -> stream -> stream -> cotype.
            add_stream_def : add A B C -> add_stream R S T -> add_stream (cons A R) (cons B S) (cons C T).
            even : stream -> cotype.
            even_def : add_stream (up z) (up z) E -> even E.
            main : stream -> cotype.
            main_def : even E -> main E.
        ";
        let ir = compile(src);
        let fifo = run_main(
            &ir,
            "main",
            &RunOptions { budget: Budget::new(10, 1_000_000), ..RunOptions::default() },
        );
        assert!(fifo.error.is_none());
        for seed in 0..5 {
            let out = run_main(
                &ir,
                "main",
                &RunOptions {
                    budget: Budget::new(10, 1_000_000),
                    scheduler: SchedulerKind::Seeded(seed),
                    ..RunOptions::default()
                },
            );
            assert!(out.error.is_none());
            assert_eq!(print_term(&out.term), print_term(&fifo.term), "seed {seed}");
        }
    }

    #[test]
    fn depth_outputs_are_information_prefixes() {
        let src = "
            conat: cotype. z: conat. s: conat -> conat.
            stream: cotype. cons: conat -> stream -> stream.
            up : conat -> stream = [N] cons N (up (s N)).
            main : stream = up z.
        ";
        let ir = compile(src);
        let mut prev: Option<PartialTerm> = None;
        for depth in 1..=8 {
            let out = run_main(
                &ir,
                "main",
                &RunOptions { budget: Budget::new(depth, 1_000_000), ..RunOptions::default() },
            );
            assert!(out.error.is_none());
            if let Some(p) = prev {
                assert!(
                    p.is_information_prefix_of(&out.term),
                    "depth {} output is not a prefix of depth {}",
                    depth - 1,
                    depth
                );
            }
            prev = Some(out.term);
        }
    }
}
