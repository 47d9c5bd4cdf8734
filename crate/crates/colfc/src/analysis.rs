//! Mode checking and uniqueness checking.
//!
//! Mode checking enforces the single-producer discipline for shared clause
//! variables: every variable is written by exactly one party (an input
//! pattern of the conclusion, or the output argument of one premise) and may
//! be read by any number of others. Uniqueness checking builds one decision
//! tree per relation; all clauses must agree on the action taken at every
//! program point, so execution never backtracks.

use std::collections::HashMap;
use std::fmt;

use indexmap::IndexMap;

use crate::syntax::{ArgMode, ClassifiedSignature, Clause, FamilyClass, Span, Term};

/// Per-argument input/output polarity of a relation. Exactly one argument is
/// an output: each process sends along a single output channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeSpec {
    pub relation: String,
    pub modes: Vec<ArgMode>,
}

impl ModeSpec {
    pub fn minus_index(&self) -> usize {
        self.modes
            .iter()
            .position(|m| *m == ArgMode::Minus)
            .expect("mode spec has exactly one minus")
    }

    pub fn plus_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.modes
            .iter()
            .enumerate()
            .filter(|(_, m)| **m == ArgMode::Plus)
            .map(|(i, _)| i)
    }
}

pub type ModeTable = IndexMap<String, ModeSpec>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModeDeclError {
    NotARelation { relation: String, span: Span },
    ArityMismatch { relation: String, expected: usize, got: usize, span: Span },
    MinusCount { relation: String, count: usize, span: Span },
    Duplicate { relation: String, span: Span },
}

impl ModeDeclError {
    pub fn span(&self) -> Span {
        match self {
            ModeDeclError::NotARelation { span, .. }
            | ModeDeclError::ArityMismatch { span, .. }
            | ModeDeclError::MinusCount { span, .. }
            | ModeDeclError::Duplicate { span, .. } => *span,
        }
    }
}

impl fmt::Display for ModeDeclError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeDeclError::NotARelation { relation, span } => {
                write!(f, "{}: mode pragma for '{}', which is not a relation", span, relation)
            }
            ModeDeclError::ArityMismatch { relation, expected, got, span } => write!(
                f,
                "{}: mode pragma for '{}' has {} modes but the relation has arity {}",
                span, relation, got, expected
            ),
            ModeDeclError::MinusCount { relation, count, span } => write!(
                f,
                "{}: mode pragma for '{}' must have exactly one '-', found {}",
                span, relation, count
            ),
            ModeDeclError::Duplicate { relation, span } => {
                write!(f, "{}: duplicate mode pragma for '{}'", span, relation)
            }
        }
    }
}

impl std::error::Error for ModeDeclError {}

/// Assign a `ModeSpec` to every relation. A pragma wins when present; the
/// default is all inputs with the final argument as the output.
pub fn resolve_modes(sig: &ClassifiedSignature) -> Result<ModeTable, ModeDeclError> {
    let mut table: ModeTable = IndexMap::new();
    for (name, fam) in &sig.families {
        if fam.class == FamilyClass::Relation {
            let mut modes = vec![ArgMode::Plus; fam.index_types.len()];
            *modes.last_mut().expect("relations have arity >= 1") = ArgMode::Minus;
            table.insert(name.clone(), ModeSpec { relation: name.clone(), modes });
        }
    }
    let mut seen: HashMap<String, ()> = HashMap::new();
    for pragma in &sig.pragmas {
        let fam = match sig.families.get(&pragma.relation) {
            Some(f) if f.class == FamilyClass::Relation => f,
            _ => {
                return Err(ModeDeclError::NotARelation {
                    relation: pragma.relation.clone(),
                    span: pragma.span,
                })
            }
        };
        if seen.insert(pragma.relation.clone(), ()).is_some() {
            return Err(ModeDeclError::Duplicate {
                relation: pragma.relation.clone(),
                span: pragma.span,
            });
        }
        if pragma.modes.len() != fam.index_types.len() {
            return Err(ModeDeclError::ArityMismatch {
                relation: pragma.relation.clone(),
                expected: fam.index_types.len(),
                got: pragma.modes.len(),
                span: pragma.span,
            });
        }
        let minuses = pragma.modes.iter().filter(|m| **m == ArgMode::Minus).count();
        if minuses != 1 {
            return Err(ModeDeclError::MinusCount {
                relation: pragma.relation.clone(),
                count: minuses,
                span: pragma.span,
            });
        }
        table.insert(
            pragma.relation.clone(),
            ModeSpec { relation: pragma.relation.clone(), modes: pragma.modes.clone() },
        );
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModeError {
    TwoProducers { clause: String, var: String, span: Span },
    NoProducer { clause: String, var: String, span: Span },
    NonlinearInput { clause: String, var: String, span: Span },
    NonVariablePremiseOutput { clause: String, premise: String, span: Span },
}

impl ModeError {
    pub fn span(&self) -> Span {
        match self {
            ModeError::TwoProducers { span, .. }
            | ModeError::NoProducer { span, .. }
            | ModeError::NonlinearInput { span, .. }
            | ModeError::NonVariablePremiseOutput { span, .. } => *span,
        }
    }
}

impl fmt::Display for ModeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeError::TwoProducers { clause, var, span } => write!(
                f,
                "{}: TwoProducers: variable '{}' has more than one producer in clause '{}'",
                span, var, clause
            ),
            ModeError::NoProducer { clause, var, span } => write!(
                f,
                "{}: NoProducer: variable '{}' is consumed but never produced in clause '{}'",
                span, var, clause
            ),
            ModeError::NonlinearInput { clause, var, span } => write!(
                f,
                "{}: NonlinearInput: variable '{}' occurs twice in the input patterns of clause '{}'",
                span, var, clause
            ),
            ModeError::NonVariablePremiseOutput { clause, premise, span } => write!(
                f,
                "{}: NonVariablePremiseOutput: premise '{}' of clause '{}' must have a single variable in its output position",
                span, premise, clause
            ),
        }
    }
}

impl std::error::Error for ModeError {}

/// Verify the single-producer discipline for one clause:
/// (a) no variable has two producers, (b) every consumed variable has a
/// producer, (c) the conclusion's input patterns are jointly linear, and
/// (d) each premise's output argument is a single variable.
pub fn check_clause_modes(clause: &Clause, modes: &ModeTable) -> Result<(), ModeError> {
    let cmodes = &modes[&clause.conclusion.rel];

    // (d) premise outputs are bare variables; collect them as producers.
    let mut premise_outputs: Vec<String> = Vec::new();
    for p in &clause.premises {
        let pmodes = &modes[&p.rel];
        match &p.args[pmodes.minus_index()] {
            Term::Var(v) => premise_outputs.push(v.clone()),
            _ => {
                return Err(ModeError::NonVariablePremiseOutput {
                    clause: clause.name.clone(),
                    premise: crate::syntax::print_atom(p),
                    span: clause.span,
                })
            }
        }
    }

    // Occurrence lists, in first-occurrence order across the whole clause.
    let mut occurrence_order: Vec<String> = Vec::new();
    for p in &clause.premises {
        for a in &p.args {
            a.collect_vars(&mut occurrence_order);
        }
    }
    for a in &clause.conclusion.args {
        a.collect_vars(&mut occurrence_order);
    }

    // Conclusion input occurrences, with multiplicity for linearity.
    let mut conclusion_input_occurrences: Vec<String> = Vec::new();
    for i in cmodes.plus_indices() {
        let mut vars = Vec::new();
        clause.conclusion.args[i].collect_vars(&mut vars);
        // collect_vars dedupes within one argument; count duplicates inside a
        // single pattern as well by a raw walk.
        fn raw_vars(t: &Term, out: &mut Vec<String>) {
            match t {
                Term::Var(v) => out.push(v.clone()),
                Term::App(_, args) => args.iter().for_each(|a| raw_vars(a, out)),
                Term::Lam(_, b) => raw_vars(b, out),
            }
        }
        let mut raw = Vec::new();
        raw_vars(&clause.conclusion.args[i], &mut raw);
        conclusion_input_occurrences.extend(raw);
    }

    // Producer kinds per variable: at most one conclusion-input binding plus
    // one per premise output.
    let mut producers: HashMap<&str, usize> = HashMap::new();
    for v in conclusion_input_occurrences.iter() {
        producers.entry(v.as_str()).or_insert(0);
    }
    let conclusion_bound: Vec<&str> = {
        let mut seen = Vec::new();
        for v in conclusion_input_occurrences.iter() {
            if !seen.contains(&v.as_str()) {
                seen.push(v.as_str());
            }
        }
        seen
    };
    for v in &conclusion_bound {
        *producers.entry(v).or_insert(0) += 1;
    }
    for v in &premise_outputs {
        *producers.entry(v.as_str()).or_insert(0) += 1;
    }

    // (a) exactly one producer.
    for v in &occurrence_order {
        if producers.get(v.as_str()).copied().unwrap_or(0) > 1 {
            return Err(ModeError::TwoProducers {
                clause: clause.name.clone(),
                var: v.clone(),
                span: clause.span,
            });
        }
    }

    // (c) joint linearity of the conclusion's input patterns.
    for v in &occurrence_order {
        if conclusion_input_occurrences.iter().filter(|x| *x == v).count() > 1 {
            return Err(ModeError::NonlinearInput {
                clause: clause.name.clone(),
                var: v.clone(),
                span: clause.span,
            });
        }
    }

    // (b) every consumed variable has a producer.
    let mut consumed: Vec<String> = Vec::new();
    for p in &clause.premises {
        let pmodes = &modes[&p.rel];
        for i in pmodes.plus_indices() {
            p.args[i].collect_vars(&mut consumed);
        }
    }
    clause.conclusion.args[cmodes.minus_index()].collect_vars(&mut consumed);
    for v in &occurrence_order {
        if consumed.contains(v) && producers.get(v.as_str()).copied().unwrap_or(0) == 0 {
            return Err(ModeError::NoProducer {
                clause: clause.name.clone(),
                var: v.clone(),
                span: clause.span,
            });
        }
    }

    Ok(())
}

/// Run the mode check over every clause of every relation.
pub fn check_modes(sig: &ClassifiedSignature, modes: &ModeTable) -> Result<(), ModeError> {
    for clause in sig.clauses.values() {
        check_clause_modes(clause, modes)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Decision trees
// ---------------------------------------------------------------------------

/// Position of a subterm of the conclusion: the argument index followed by
/// constructor-argument indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(pub Vec<usize>);

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "arg {}", self.0[0])?;
        for p in &self.0[1..] {
            write!(f, ".{}", p)?;
        }
        Ok(())
    }
}

impl Path {
    pub fn child(&self, i: usize) -> Path {
        let mut v = self.0.clone();
        v.push(i);
        Path(v)
    }
}

/// Per-relation dispatch structure. Reads proceed over the input arguments
/// left to right, and within a pattern outside-in; all clauses must agree on
/// whether a position is read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecisionTree {
    Leaf {
        clause: String,
        /// Clause variable -> conclusion position supplying its channel.
        bindings: Vec<(String, Path)>,
    },
    Read {
        path: Path,
        branches: Vec<(String, DecisionTree)>,
    },
    /// Relation with no clauses: no action is ever possible.
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UniquenessError {
    ActionMismatch { relation: String, path: Path, span: Span },
    Overlap { relation: String, clause1: String, clause2: String, span: Span },
}

impl UniquenessError {
    pub fn span(&self) -> Span {
        match self {
            UniquenessError::ActionMismatch { span, .. } | UniquenessError::Overlap { span, .. } => {
                *span
            }
        }
    }
}

impl fmt::Display for UniquenessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UniquenessError::ActionMismatch { relation, path, span } => write!(
                f,
                "{}: ActionMismatch: clauses of '{}' disagree on the action at {} (variable vs constructor)",
                span, relation, path
            ),
            UniquenessError::Overlap { relation, clause1, clause2, span } => write!(
                f,
                "{}: Overlap: clauses '{}' and '{}' of '{}' cannot be distinguished by reading inputs",
                span, clause1, clause2, relation
            ),
        }
    }
}

impl std::error::Error for UniquenessError {}

struct Row {
    clause: String,
    patterns: HashMap<Path, Term>,
    bindings: Vec<(String, Path)>,
}

/// Build the decision tree for one relation.
pub fn build_decision_tree(
    sig: &ClassifiedSignature,
    relation: &str,
    modes: &ModeTable,
) -> Result<DecisionTree, UniquenessError> {
    let fam = sig.relation(relation).expect("relation exists");
    let spec = &modes[relation];
    if fam.clauses.is_empty() {
        return Ok(DecisionTree::Empty);
    }
    let rows: Vec<Row> = fam
        .clauses
        .iter()
        .map(|cname| {
            let clause = &sig.clauses[cname];
            let mut patterns = HashMap::new();
            for i in spec.plus_indices() {
                patterns.insert(Path(vec![i]), clause.conclusion.args[i].clone());
            }
            Row { clause: cname.clone(), patterns, bindings: Vec::new() }
        })
        .collect();
    let queue: Vec<Path> = spec.plus_indices().map(|i| Path(vec![i])).collect();
    build(sig, relation, fam.span, rows, queue)
}

fn build(
    sig: &ClassifiedSignature,
    relation: &str,
    span: Span,
    mut rows: Vec<Row>,
    mut queue: Vec<Path>,
) -> Result<DecisionTree, UniquenessError> {
    while let Some(path) = queue.first().cloned() {
        queue.remove(0);
        let all_vars = rows.iter().all(|r| matches!(r.patterns[&path], Term::Var(_)));
        let all_apps = rows.iter().all(|r| matches!(r.patterns[&path], Term::App(..)));
        if all_vars {
            for r in &mut rows {
                if let Some(Term::Var(v)) = r.patterns.remove(&path) {
                    r.bindings.push((v, path.clone()));
                }
            }
            continue;
        }
        if !all_apps {
            return Err(UniquenessError::ActionMismatch {
                relation: relation.to_string(),
                path,
                span,
            });
        }
        // Group rows by the constructor at this position, in constructor
        // declaration order.
        let mut groups: Vec<(String, Vec<Row>)> = Vec::new();
        for row in rows {
            let ctor = match &row.patterns[&path] {
                Term::App(h, _) => h.clone(),
                _ => unreachable!(),
            };
            match groups.iter_mut().find(|(c, _)| *c == ctor) {
                Some((_, rs)) => rs.push(row),
                None => groups.push((ctor, vec![row])),
            }
        }
        groups.sort_by_key(|(c, _)| sig.constructor_order(c));
        let mut branches = Vec::with_capacity(groups.len());
        for (ctor, mut grows) in groups {
            let arity = sig.constructors.get(&ctor).map_or(0, |c| c.arg_types.len());
            for row in &mut grows {
                let args = match row.patterns.remove(&path) {
                    Some(Term::App(_, args)) => args,
                    _ => unreachable!(),
                };
                debug_assert_eq!(args.len(), arity);
                for (i, a) in args.into_iter().enumerate() {
                    row.patterns.insert(path.child(i), a);
                }
            }
            let mut bqueue: Vec<Path> = (0..arity).map(|i| path.child(i)).collect();
            bqueue.extend(queue.iter().cloned());
            branches.push((ctor, build(sig, relation, span, grows, bqueue)?));
        }
        return Ok(DecisionTree::Read { path, branches });
    }
    match rows.len() {
        1 => {
            let row = rows.pop().unwrap();
            Ok(DecisionTree::Leaf { clause: row.clause, bindings: row.bindings })
        }
        0 => unreachable!("rows never become empty"),
        _ => Err(UniquenessError::Overlap {
            relation: relation.to_string(),
            clause1: rows[0].clause.clone(),
            clause2: rows[1].clause.clone(),
            span,
        }),
    }
}

/// Build decision trees for every relation.
pub fn build_all_trees(
    sig: &ClassifiedSignature,
    modes: &ModeTable,
) -> Result<IndexMap<String, DecisionTree>, UniquenessError> {
    let mut trees = IndexMap::new();
    for (name, fam) in &sig.families {
        if fam.class == FamilyClass::Relation {
            trees.insert(name.clone(), build_decision_tree(sig, name, modes)?);
        }
    }
    Ok(trees)
}

/// Indented textual rendering for `--dump-tree`.
pub fn dump_tree(relation: &str, tree: &DecisionTree) -> String {
    fn go(tree: &DecisionTree, indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent);
        match tree {
            DecisionTree::Leaf { clause, .. } => {
                out.push_str(&format!("{}leaf {}\n", pad, clause));
            }
            DecisionTree::Read { path, branches } => {
                out.push_str(&format!("{}read {}\n", pad, path));
                for (ctor, sub) in branches {
                    out.push_str(&format!("{}  case {}:\n", pad, ctor));
                    go(sub, indent + 2, out);
                }
            }
            DecisionTree::Empty => {
                out.push_str(&format!("{}no clauses\n", pad));
            }
        }
    }
    let mut out = format!("tree {}:\n", relation);
    go(tree, 1, &mut out);
    out
}

/// All leaf clause names of a tree, left to right.
pub fn leaf_clauses(tree: &DecisionTree) -> Vec<String> {
    fn go(t: &DecisionTree, out: &mut Vec<String>) {
        match t {
            DecisionTree::Leaf { clause, .. } => out.push(clause.clone()),
            DecisionTree::Read { branches, .. } => {
                for (_, b) in branches {
                    go(b, out);
                }
            }
            DecisionTree::Empty => {}
        }
    }
    let mut out = Vec::new();
    go(tree, &mut out);
    out
}
