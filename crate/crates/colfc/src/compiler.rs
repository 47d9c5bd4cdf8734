//! Translation of decision trees into process code.
//!
//! Each relation becomes one process definition over write-once channels,
//! built from six actions: read, write, forward, allocate, spawn and
//! continue (tail call). At a leaf the conclusion's output pattern is written
//! eagerly, outermost constructor first, before any premise process starts;
//! the last premise is continued into, the others are spawned.

use std::collections::HashSet;
use std::fmt::Write as _;

use indexmap::IndexMap;

use crate::analysis::{DecisionTree, ModeTable, Path};
use crate::syntax::{ArgMode, ClassifiedSignature, FamilyClass, Term};

pub type Slot = usize;

/// Clause name attached to a leaf's code; the runtime uses it to extend the
/// partial proof object when the process commits to that clause.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofTag {
    pub clause: String,
    pub premises: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadBranch {
    pub ctor: String,
    pub binds: Vec<Slot>,
    pub body: Instr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instr {
    Read { chan: Slot, branches: Vec<ReadBranch> },
    Commit { tag: ProofTag, next: Box<Instr> },
    Alloc { chan: Slot, next: Box<Instr> },
    Write { chan: Slot, ctor: String, args: Vec<Slot>, next: Box<Instr> },
    Spawn { relation: String, args: Vec<Slot>, next: Box<Instr> },
    Forward { dst: Slot, src: Slot },
    TailCall { relation: String, args: Vec<Slot> },
    Halt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub slot: Slot,
    pub mode: ArgMode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcIR {
    pub relation: String,
    pub params: Vec<Param>,
    pub output: Slot,
    /// Display name of every slot, for IR emission.
    pub slot_names: Vec<String>,
    pub body: Instr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramIR {
    pub procs: IndexMap<String, ProcIR>,
}

impl ProgramIR {
    pub fn minus_index(&self, relation: &str) -> usize {
        self.procs[relation].output_param_index()
    }
}

impl ProcIR {
    pub fn output_param_index(&self) -> usize {
        self.params
            .iter()
            .position(|p| p.mode == ArgMode::Minus)
            .expect("one output parameter")
    }
}

const INPUT_NAMES: [&str; 5] = ["X", "Y", "W", "V", "U"];

struct ProcBuilder<'a> {
    sig: &'a ClassifiedSignature,
    modes: &'a ModeTable,
    slot_names: Vec<String>,
    used_names: HashSet<String>,
    temp_counter: u32,
}

impl<'a> ProcBuilder<'a> {
    fn new_slot(&mut self, want: &str) -> Slot {
        let mut name = want.to_string();
        let mut n = 0u32;
        while self.used_names.contains(&name) {
            n += 1;
            name = format!("{}{}", want, n);
        }
        self.used_names.insert(name.clone());
        self.slot_names.push(name);
        self.slot_names.len() - 1
    }

    fn temp_slot(&mut self) -> Slot {
        loop {
            self.temp_counter += 1;
            let name = format!("T{}", self.temp_counter);
            if !self.used_names.contains(&name) {
                self.used_names.insert(name.clone());
                self.slot_names.push(name);
                return self.slot_names.len() - 1;
            }
        }
    }
}

/// Straight-line step; terminals are handled separately.
enum Step {
    Commit(ProofTag),
    Alloc(Slot),
    Write(Slot, String, Vec<Slot>),
    Spawn(String, Vec<Slot>),
}

fn chain(steps: Vec<Step>, terminal: Instr) -> Instr {
    steps.into_iter().rev().fold(terminal, |next, step| match step {
        Step::Commit(tag) => Instr::Commit { tag, next: Box::new(next) },
        Step::Alloc(chan) => Instr::Alloc { chan, next: Box::new(next) },
        Step::Write(chan, ctor, args) => Instr::Write { chan, ctor, args, next: Box::new(next) },
        Step::Spawn(relation, args) => Instr::Spawn { relation, args, next: Box::new(next) },
    })
}

/// First leaf binding for `path` anywhere below `tree`, used as the display
/// name of a read-bound channel.
fn find_bind_name<'t>(tree: &'t DecisionTree, path: &Path) -> Option<&'t str> {
    match tree {
        DecisionTree::Leaf { bindings, .. } => bindings
            .iter()
            .find(|(_, p)| p == path)
            .map(|(v, _)| v.as_str()),
        DecisionTree::Read { branches, .. } => {
            branches.iter().find_map(|(_, b)| find_bind_name(b, path))
        }
        DecisionTree::Empty => None,
    }
}

/// Compile one relation's decision tree into a process definition.
pub fn compile_relation(
    sig: &ClassifiedSignature,
    modes: &ModeTable,
    relation: &str,
    tree: &DecisionTree,
) -> ProcIR {
    let spec = &modes[relation];
    let mut b = ProcBuilder {
        sig,
        modes,
        slot_names: Vec::new(),
        used_names: HashSet::new(),
        temp_counter: 0,
    };
    let mut params = Vec::with_capacity(spec.modes.len());
    let mut input_no = 0usize;
    for mode in &spec.modes {
        let slot = match mode {
            ArgMode::Minus => b.new_slot("Z"),
            ArgMode::Plus => {
                let name = INPUT_NAMES
                    .get(input_no)
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| format!("X{}", input_no));
                input_no += 1;
                b.new_slot(&name)
            }
        };
        params.push(Param { slot, mode: *mode });
    }
    let output = params[spec.minus_index()].slot;
    let mut ctx: IndexMap<Path, Slot> = IndexMap::new();
    for (i, p) in params.iter().enumerate() {
        if p.mode == ArgMode::Plus {
            ctx.insert(Path(vec![i]), p.slot);
        }
    }
    let body = compile_tree(&mut b, tree, &ctx, output);
    ProcIR {
        relation: relation.to_string(),
        params,
        output,
        slot_names: b.slot_names,
        body,
    }
}

fn compile_tree(
    b: &mut ProcBuilder<'_>,
    tree: &DecisionTree,
    ctx: &IndexMap<Path, Slot>,
    output: Slot,
) -> Instr {
    match tree {
        DecisionTree::Empty => Instr::Halt,
        DecisionTree::Read { path, branches } => {
            let chan = ctx[path];
            let mut out = Vec::with_capacity(branches.len());
            for (ctor, sub) in branches {
                let arity = b.sig.constructors.get(ctor).map_or(0, |c| c.arg_types.len());
                let mut binds = Vec::with_capacity(arity);
                let mut bctx = ctx.clone();
                for i in 0..arity {
                    let child = path.child(i);
                    let slot = match find_bind_name(sub, &child) {
                        Some(name) => {
                            let name = name.to_string();
                            b.new_slot(&name)
                        }
                        None => b.temp_slot(),
                    };
                    binds.push(slot);
                    bctx.insert(child, slot);
                }
                let body = compile_tree(b, sub, &bctx, output);
                out.push(ReadBranch { ctor: ctor.clone(), binds, body });
            }
            Instr::Read { chan, branches: out }
        }
        DecisionTree::Leaf { clause, bindings } => compile_leaf(b, clause, bindings, ctx, output),
    }
}

/// Channel environment of one leaf: clause variable to slot.
type Env = IndexMap<String, Slot>;

fn compile_leaf(
    b: &mut ProcBuilder<'_>,
    clause_name: &str,
    bindings: &[(String, Path)],
    ctx: &IndexMap<Path, Slot>,
    output: Slot,
) -> Instr {
    let clause = b.sig.clauses[clause_name].clone();
    let cmodes = &b.modes[&clause.conclusion.rel];
    let out_term = clause.conclusion.args[cmodes.minus_index()].clone();

    let mut env: Env = IndexMap::new();
    for (var, path) in bindings {
        env.insert(var.clone(), ctx[path]);
    }

    let mut steps = vec![Step::Commit(ProofTag {
        clause: clause_name.to_string(),
        premises: clause.premises.len(),
    })];

    // Output channels of the premises. When the conclusion's output is a bare
    // premise-produced variable, that premise writes straight into our own
    // output channel; everything else gets a fresh cell.
    let premise_out_vars: Vec<String> = clause
        .premises
        .iter()
        .map(|p| match &p.args[b.modes[&p.rel].minus_index()] {
            Term::Var(v) => v.clone(),
            _ => unreachable!("mode check rejects non-variable premise outputs"),
        })
        .collect();
    let forward_src = match &out_term {
        Term::Var(v) if !premise_out_vars.contains(v) => Some(env[v]),
        _ => None,
    };
    for v in &premise_out_vars {
        if let Term::Var(out_v) = &out_term {
            if out_v == v {
                env.insert(v.clone(), output);
                continue;
            }
        }
        let slot = b.new_slot(v);
        steps.push(Step::Alloc(slot));
        env.insert(v.clone(), slot);
    }

    // Output pattern, written before any premise runs.
    if let Term::App(..) = &out_term {
        emit_write(b, &mut steps, &mut env, output, &out_term);
    }

    // Premise calls. Ground constructor arguments in input positions are
    // materialized into fresh cells first.
    let mut calls: Vec<(String, Vec<Slot>)> = Vec::with_capacity(clause.premises.len());
    for premise in &clause.premises {
        let mut args = Vec::with_capacity(premise.args.len());
        for arg in &premise.args {
            match arg {
                Term::Var(v) => args.push(env[v]),
                Term::App(..) => {
                    let slot = b.temp_slot();
                    steps.push(Step::Alloc(slot));
                    emit_write(b, &mut steps, &mut env, slot, arg);
                    args.push(slot);
                }
                Term::Lam(..) => unreachable!("no lambdas in clause arguments"),
            }
        }
        calls.push((premise.rel.clone(), args));
    }

    let terminal = if let Some(src) = forward_src {
        for (rel, args) in calls {
            steps.push(Step::Spawn(rel, args));
        }
        Instr::Forward { dst: output, src }
    } else if let Some((rel, args)) = calls.pop() {
        for (rel, args) in calls {
            steps.push(Step::Spawn(rel, args));
        }
        Instr::TailCall { relation: rel, args }
    } else {
        Instr::Halt
    };
    chain(steps, terminal)
}

/// Write a constructor term into `target`, outermost constructor first,
/// allocating a fresh cell for every nested constructor.
fn emit_write(b: &mut ProcBuilder<'_>, steps: &mut Vec<Step>, env: &mut Env, target: Slot, term: &Term) {
    let (ctor, args) = match term {
        Term::App(c, args) => (c.clone(), args),
        _ => unreachable!("emit_write is only called on applications"),
    };
    let mut arg_slots = Vec::with_capacity(args.len());
    let mut todo: Vec<(Slot, &Term)> = Vec::new();
    for a in args {
        match a {
            Term::Var(v) => arg_slots.push(env[v]),
            Term::App(..) => {
                let slot = b.temp_slot();
                steps.push(Step::Alloc(slot));
                arg_slots.push(slot);
                todo.push((slot, a));
            }
            Term::Lam(..) => unreachable!("no lambdas in clause arguments"),
        }
    }
    steps.push(Step::Write(target, ctor, arg_slots));
    for (slot, a) in todo {
        emit_write(b, steps, env, slot, a);
    }
}

/// Compile every relation of the signature.
pub fn compile_program(
    sig: &ClassifiedSignature,
    modes: &ModeTable,
    trees: &IndexMap<String, DecisionTree>,
) -> ProgramIR {
    let mut procs = IndexMap::new();
    for (name, fam) in &sig.families {
        if fam.class == FamilyClass::Relation {
            procs.insert(name.clone(), compile_relation(sig, modes, name, &trees[name]));
        }
    }
    ProgramIR { procs }
}

// ---------------------------------------------------------------------------
// Textual emission
// ---------------------------------------------------------------------------

pub const IR_HEADER: &str = "# colf-ir v1";

fn render_instr(p: &ProcIR, instr: &Instr, out: &mut String) {
    let name = |s: Slot| p.slot_names[s].as_str();
    match instr {
        Instr::Read { chan, branches } => {
            write!(out, "read {} {{ ", name(*chan)).unwrap();
            for (i, br) in branches.iter().enumerate() {
                if i > 0 {
                    out.push_str(" | ");
                }
                out.push_str(&br.ctor);
                if !br.binds.is_empty() {
                    let binds: Vec<&str> = br.binds.iter().map(|s| name(*s)).collect();
                    write!(out, "({})", binds.join(",")).unwrap();
                }
                out.push_str(" => ");
                render_instr(p, &br.body, out);
            }
            out.push_str(" }");
        }
        Instr::Commit { next, .. } => render_instr(p, next, out),
        Instr::Alloc { chan, next } => {
            write!(out, "alloc {}; ", name(*chan)).unwrap();
            render_instr(p, next, out);
        }
        Instr::Write { chan, ctor, args, next } => {
            if args.is_empty() {
                write!(out, "write {} {}; ", name(*chan), ctor).unwrap();
            } else {
                let args: Vec<&str> = args.iter().map(|s| name(*s)).collect();
                write!(out, "write {} {}({}); ", name(*chan), ctor, args.join(",")).unwrap();
            }
            render_instr(p, next, out);
        }
        Instr::Spawn { relation, args, next } => {
            let args: Vec<&str> = args.iter().map(|s| name(*s)).collect();
            write!(out, "spawn {}({}); ", relation, args.join(", ")).unwrap();
            render_instr(p, next, out);
        }
        Instr::Forward { dst, src } => {
            write!(out, "fwd {} {}", name(*dst), name(*src)).unwrap();
        }
        Instr::TailCall { relation, args } => {
            let args: Vec<&str> = args.iter().map(|s| name(*s)).collect();
            write!(out, "tail {}({})", relation, args.join(", ")).unwrap();
        }
        Instr::Halt => out.push_str("halt"),
    }
}

/// Deterministic line-oriented rendering: one process definition per
/// relation, sorted by relation name. An empty program renders as empty text.
pub fn emit_ir_text(ir: &ProgramIR) -> String {
    if ir.procs.is_empty() {
        return String::new();
    }
    let mut names: Vec<&String> = ir.procs.keys().collect();
    names.sort();
    let mut out = String::from(IR_HEADER);
    out.push('\n');
    for name in names {
        let p = &ir.procs[name];
        let params: Vec<String> = p
            .params
            .iter()
            .map(|param| format!("{}{}", param.mode, p.slot_names[param.slot]))
            .collect();
        write!(out, "proc {}({}): ", p.relation, params.join(", ")).unwrap();
        render_instr(p, &p.body, &mut out);
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Well-formedness validation
// ---------------------------------------------------------------------------

#[derive(Clone)]
struct PathState {
    bound: Vec<bool>,
    writable: Vec<bool>,
    written: Vec<bool>,
    output_written_at: Option<usize>,
    first_call_at: Option<usize>,
    committed: bool,
    index: usize,
}

/// Check the structural invariants of generated code: single static binding
/// of every channel before use, writes only to the output or allocated cells
/// and at most once per path, the output write preceding every spawn and
/// tail call, calls with matching arity, and exactly one commit per path
/// carrying each clause exactly once per relation.
pub fn validate_program(sig: &ClassifiedSignature, ir: &ProgramIR) -> Result<(), String> {
    for (name, p) in &ir.procs {
        let nslots = p.slot_names.len();
        let mut state = PathState {
            bound: vec![false; nslots],
            writable: vec![false; nslots],
            written: vec![false; nslots],
            output_written_at: None,
            first_call_at: None,
            committed: false,
            index: 0,
        };
        for param in &p.params {
            state.bound[param.slot] = true;
            if param.mode == ArgMode::Minus {
                state.writable[param.slot] = true;
            }
        }
        let mut tags: Vec<String> = Vec::new();
        validate_instr(name, p, ir, &p.body, state, &mut tags)?;
        let mut expected: Vec<&String> = sig.families[name].clauses.iter().collect();
        let mut got: Vec<&String> = tags.iter().collect();
        expected.sort();
        got.sort();
        if expected != got {
            return Err(format!(
                "proc {}: proof tags {:?} do not cover clauses {:?} exactly once",
                name, got, expected
            ));
        }
    }
    Ok(())
}

fn validate_instr(
    name: &str,
    p: &ProcIR,
    ir: &ProgramIR,
    instr: &Instr,
    mut st: PathState,
    tags: &mut Vec<String>,
) -> Result<(), String> {
    let fail = |msg: String| Err::<(), String>(format!("proc {}: {}", name, msg));
    st.index += 1;
    match instr {
        Instr::Read { chan, branches } => {
            if !st.bound[*chan] {
                return fail(format!("read from unbound channel slot {}", chan));
            }
            for br in branches {
                let mut bst = st.clone();
                for b in &br.binds {
                    if bst.bound[*b] {
                        return fail(format!("branch rebinds slot {}", b));
                    }
                    bst.bound[*b] = true;
                }
                validate_instr(name, p, ir, &br.body, bst, tags)?;
            }
            Ok(())
        }
        Instr::Commit { tag, next } => {
            if st.committed {
                return fail("two commits on one path".into());
            }
            st.committed = true;
            tags.push(tag.clause.clone());
            validate_instr(name, p, ir, next, st, tags)
        }
        Instr::Alloc { chan, next } => {
            if st.bound[*chan] {
                return fail(format!("alloc rebinds slot {}", chan));
            }
            st.bound[*chan] = true;
            st.writable[*chan] = true;
            validate_instr(name, p, ir, next, st, tags)
        }
        Instr::Write { chan, args, next, .. } => {
            if !st.bound[*chan] || !st.writable[*chan] {
                return fail(format!("write to non-writable slot {}", chan));
            }
            if st.written[*chan] {
                return fail(format!("second write to slot {} on one path", chan));
            }
            st.written[*chan] = true;
            if *chan == p.output {
                st.output_written_at = Some(st.index);
            }
            for a in args {
                if !st.bound[*a] {
                    return fail(format!("write argument uses unbound slot {}", a));
                }
            }
            validate_instr(name, p, ir, next, st, tags)
        }
        Instr::Spawn { relation, args, next } => {
            check_call(name, ir, relation, args, &st)?;
            if st.first_call_at.is_none() {
                st.first_call_at = Some(st.index);
            }
            validate_instr(name, p, ir, next, st, tags)
        }
        Instr::TailCall { relation, args } => {
            check_call(name, ir, relation, args, &st)?;
            if st.first_call_at.is_none() {
                st.first_call_at = Some(st.index);
            }
            finish_path(name, &st)
        }
        Instr::Forward { dst, src } => {
            if *dst != p.output {
                return fail("forward destination is not the process output".into());
            }
            if st.written[*dst] {
                return fail("forward of an already-written output".into());
            }
            if !st.bound[*src] {
                return fail(format!("forward from unbound slot {}", src));
            }
            finish_path(name, &st)
        }
        Instr::Halt => finish_path(name, &st),
    }
}

fn check_call(name: &str, ir: &ProgramIR, relation: &str, args: &[Slot], st: &PathState) -> Result<(), String> {
    let callee = ir
        .procs
        .get(relation)
        .ok_or_else(|| format!("proc {}: call to unknown relation '{}'", name, relation))?;
    if callee.params.len() != args.len() {
        return Err(format!(
            "proc {}: call to '{}' with {} arguments, expected {}",
            name,
            relation,
            args.len(),
            callee.params.len()
        ));
    }
    for a in args {
        if !st.bound[*a] {
            return Err(format!("proc {}: call argument uses unbound slot {}", name, a));
        }
    }
    Ok(())
}

fn finish_path(name: &str, st: &PathState) -> Result<(), String> {
    if let (Some(w), Some(c)) = (st.output_written_at, st.first_call_at) {
        if w > c {
            return Err(format!(
                "proc {}: output write at {} does not precede first spawn/tail at {}",
                name, w, c
            ));
        }
    }
    Ok(())
}
