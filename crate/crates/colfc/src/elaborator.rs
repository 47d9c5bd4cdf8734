//! Elaboration of notational definitions into relations.
//!
//! Every definition `f : t1 -> ... -> tk -> r = [X1 ... Xk] M` becomes a
//! relation `f : t1 -> ... -> tk -> r -> cotype` together with a single
//! defining clause `f_def : <premises> -> f X1 ... Xk M'`, where `M'` is the
//! body with every call of a defined constant replaced by a fresh variable
//! and a corresponding premise. Clause bodies that mention defined constants
//! are rewritten the same way.

use std::collections::HashSet;
use std::fmt;

use indexmap::IndexMap;

use crate::syntax::{
    classify, Atom, ClassifiedSignature, Clause, Declaration, FamilyDecl, Signature, Span, Term,
    TermConstDecl,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElabError {
    pub span: Span,
    pub message: String,
}

impl fmt::Display for ElabError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

impl std::error::Error for ElabError {}

/// Supply of clause variables that avoids a fixed set of used names.
pub struct FreshVars {
    used: HashSet<String>,
}

impl FreshVars {
    pub fn new(used: HashSet<String>) -> Self {
        FreshVars { used }
    }

    /// Fresh variable named after the defined constant being replaced:
    /// its first letter uppercased, with a numeric suffix on collision.
    pub fn fresh_for(&mut self, def_name: &str) -> String {
        let letter = def_name
            .chars()
            .next()
            .map(|c| c.to_ascii_uppercase())
            .unwrap_or('R');
        let mut candidate = letter.to_string();
        let mut n = 0u32;
        while self.used.contains(&candidate) {
            n += 1;
            candidate = format!("{}{}", letter, n);
        }
        self.used.insert(candidate.clone());
        candidate
    }
}

/// Maps a defined constant to its elaborated relation (same name, arity + 1).
type DefMap = IndexMap<String, usize>;

/// Replace every maximal subterm headed by a defined constant `d M1..Mm` with
/// a fresh variable `R`, appending a premise `d M1'..Mm' R`. Arguments are
/// flattened first, innermost-first and left to right, so generated premises
/// appear in dependency order. Constructor applications are left in place.
pub fn flatten(
    term: &Term,
    defs: &DefMap,
    fresh: &mut FreshVars,
    premises: &mut Vec<Atom>,
    span: Span,
) -> Result<Term, ElabError> {
    match term {
        Term::Var(_) => Ok(term.clone()),
        Term::Lam(..) => Err(ElabError {
            span,
            message: "lambda may only appear at the top level of a definition".into(),
        }),
        Term::App(h, args) => {
            let mut flat_args = Vec::with_capacity(args.len());
            for a in args {
                flat_args.push(flatten(a, defs, fresh, premises, span)?);
            }
            if defs.contains_key(h) {
                let r = fresh.fresh_for(h);
                flat_args.push(Term::Var(r.clone()));
                premises.push(Atom { rel: h.clone(), args: flat_args });
                Ok(Term::Var(r))
            } else {
                Ok(Term::App(h.clone(), flat_args))
            }
        }
    }
}

fn used_vars_of_clause(c: &Clause) -> HashSet<String> {
    let mut vars = Vec::new();
    for p in &c.premises {
        for a in &p.args {
            a.collect_vars(&mut vars);
        }
    }
    for a in &c.conclusion.args {
        a.collect_vars(&mut vars);
    }
    vars.into_iter().collect()
}

fn clause_to_decl(c: &Clause) -> Declaration {
    let mut components: Vec<Term> = c
        .premises
        .iter()
        .map(|p| Term::App(p.rel.clone(), p.args.clone()))
        .collect();
    components.push(Term::App(c.conclusion.rel.clone(), c.conclusion.args.clone()));
    Declaration::TermConst(TermConstDecl { name: c.name.clone(), components, span: c.span })
}

/// Head of a term that names a type family — illegal in a term position once
/// atoms have been peeled off.
fn check_no_family_heads(
    t: &Term,
    sig: &ClassifiedSignature,
    owner: &str,
    span: Span,
) -> Result<(), ElabError> {
    if let Term::App(h, args) = t {
        if sig.families.contains_key(h) {
            return Err(ElabError {
                span,
                message: format!(
                    "definition '{}' mentions type family '{}' directly (relations are not terms)",
                    owner, h
                ),
            });
        }
        for a in args {
            check_no_family_heads(a, sig, owner, span)?;
        }
    }
    Ok(())
}

/// Rewrite the whole signature so that it contains no notational definitions.
/// Definitions are processed in declaration order; each is replaced by its
/// relation and `_def` clause, and later clauses see the rewrite.
pub fn elaborate_all(sig: &ClassifiedSignature) -> Result<ClassifiedSignature, ElabError> {
    let mut defs: DefMap = IndexMap::new();
    let mut taken: HashSet<String> = sig
        .decls
        .iter()
        .filter_map(|d| d.name().map(str::to_owned))
        .collect();
    let mut decls: Vec<Declaration> = Vec::with_capacity(sig.decls.len());

    for decl in &sig.decls {
        match decl {
            Declaration::Family(_) | Declaration::Mode(_) => decls.push(decl.clone()),
            Declaration::TermConst(c) => {
                if let Some(clause) = sig.clauses.get(&c.name) {
                    let mut fresh = FreshVars::new(used_vars_of_clause(clause));
                    let mut premises: Vec<Atom> = Vec::new();
                    for p in &clause.premises {
                        let mut args = Vec::with_capacity(p.args.len());
                        let mut generated: Vec<Atom> = Vec::new();
                        for a in &p.args {
                            args.push(flatten(a, &defs, &mut fresh, &mut generated, c.span)?);
                        }
                        premises.extend(generated);
                        premises.push(Atom { rel: p.rel.clone(), args });
                    }
                    let mut tail: Vec<Atom> = Vec::new();
                    let conclusion_args = clause
                        .conclusion
                        .args
                        .iter()
                        .map(|a| flatten(a, &defs, &mut fresh, &mut tail, c.span))
                        .collect::<Result<Vec<_>, _>>()?;
                    premises.extend(tail);
                    let rewritten = Clause {
                        name: clause.name.clone(),
                        premises,
                        conclusion: Atom { rel: clause.conclusion.rel.clone(), args: conclusion_args },
                        span: clause.span,
                    };
                    decls.push(clause_to_decl(&rewritten));
                } else {
                    // Plain constructor.
                    decls.push(decl.clone());
                }
            }
            Declaration::Def(d) => {
                let info = &sig.defs[&d.name];
                check_no_family_heads(&info.body, sig, &d.name, d.span)?;

                let mut index_types = info.ty.args.clone();
                index_types.push(info.ty.target.clone());
                decls.push(Declaration::Family(FamilyDecl {
                    name: d.name.clone(),
                    index_types,
                    span: d.span,
                }));
                defs.insert(d.name.clone(), info.ty.args.len() + 1);

                let used: HashSet<String> = info.binders.iter().cloned().collect();
                let mut clause_name = format!("{}_def", d.name);
                let mut n = 0u32;
                while taken.contains(&clause_name) {
                    n += 1;
                    clause_name = format!("{}_def{}", d.name, n);
                }
                taken.insert(clause_name.clone());
                let mut fresh = FreshVars::new(used);
                let mut premises: Vec<Atom> = Vec::new();
                let flat_body = flatten(&info.body, &defs, &mut fresh, &mut premises, d.span)?;
                let mut conclusion_args: Vec<Term> =
                    info.binders.iter().map(|b| Term::Var(b.clone())).collect();
                conclusion_args.push(flat_body);
                let clause = Clause {
                    name: clause_name,
                    premises,
                    conclusion: Atom { rel: d.name.clone(), args: conclusion_args },
                    span: d.span,
                };
                decls.push(clause_to_decl(&clause));
            }
        }
    }

    classify(Signature { decls }).map_err(|e| ElabError {
        span: e.span,
        message: format!("internal error re-classifying elaborated signature: {}", e.message),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{alpha_normalize_clause, parse_signature, print_clause, print_signature};

    fn elab(src: &str) -> ClassifiedSignature {
        let sig = classify(parse_signature(src).expect("parse")).expect("classify");
        elaborate_all(&sig).expect("elaborate")
    }

    const STREAMS: &str = "
        conat: cotype. z: conat. s: conat -> conat.
        stream: cotype. cons: conat -> stream -> stream.
    ";

    /// Alpha-insensitive clause comparison through the printer.
    fn assert_clause(sig: &ClassifiedSignature, name: &str, expected: &str) {
        let actual = print_clause(&alpha_normalize_clause(&sig.clauses[name]));
        let exp_sig = {
            // Parse the expected clause in the context of the elaborated
            // signature, minus the clause under test.
            let mut decls: Vec<Declaration> = sig
                .decls
                .iter()
                .filter(|d| d.name() != Some(name))
                .cloned()
                .collect();
            let with = format!("{}\n{}", print_signature(&decls), expected);
            decls.clear();
            classify(parse_signature(&with).expect("expected clause parses")).expect("classify")
        };
        let expected_norm = print_clause(&alpha_normalize_clause(&exp_sig.clauses[name]));
        assert_eq!(actual, expected_norm);
    }

    #[test]
    fn elaborates_repeat_and_up() {
        let sig = elab(&format!(
            "{STREAMS}
             repeat : conat -> stream = [N] cons N (repeat N).
             up : conat -> stream = [N] cons N (up (s N))."
        ));
        assert!(sig.defs.is_empty());
        assert_eq!(sig.families["repeat"].index_types, vec!["conat", "stream"]);
        assert_clause(&sig, "repeat_def", "repeat_def : repeat N R -> repeat N (cons N R).");
        assert_clause(&sig, "up_def", "up_def : up (s N) U -> up N (cons N U).");
        // Cosmetic match with the hand-written relational form.
        assert_eq!(
            print_clause(&sig.clauses["repeat_def"]),
            "repeat_def : repeat N R -> repeat N (cons N R)."
        );
        assert_eq!(
            print_clause(&sig.clauses["up_def"]),
            "up_def : up (s N) U -> up N (cons N U)."
        );
    }

    #[test]
    fn elaborates_omega_and_main() {
        let sig = elab(&format!(
            "{STREAMS}
             repeat : conat -> stream = [N] cons N (repeat N).
             omega : conat = s omega.
             main : stream = repeat omega."
        ));
        assert_clause(&sig, "omega_def", "omega_def : omega O -> omega (s O).");
        assert_clause(&sig, "main_def", "main_def : omega O -> repeat O R -> main R.");
        assert_eq!(
            print_clause(&sig.clauses["main_def"]),
            "main_def : omega O -> repeat O R -> main R."
        );
    }

    #[test]
    fn elaborates_main_up_z() {
        let sig = elab(&format!(
            "{STREAMS}
             up : conat -> stream = [N] cons N (up (s N)).
             main : stream = up z."
        ));
        assert_clause(&sig, "main_def", "main_def : up z U -> main U.");
    }

    #[test]
    fn elaborates_constant_without_defined_calls() {
        let sig = elab("conat: cotype. z: conat. s: conat -> conat. one : conat = s z.");
        assert_eq!(sig.families["one"].index_types, vec!["conat"]);
        let c = &sig.clauses["one_def"];
        assert!(c.premises.is_empty());
        assert_eq!(print_clause(c), "one_def : one (s z).");
    }

    #[test]
    fn flatten_examples() {
        let mut defs: DefMap = IndexMap::new();
        defs.insert("repeat".into(), 2);
        defs.insert("omega".into(), 1);
        let span = Span { line: 1, col: 1 };

        // cons N (repeat N)  =>  cons N R with premise repeat N R
        let t = Term::App(
            "cons".into(),
            vec![
                Term::Var("N".into()),
                Term::App("repeat".into(), vec![Term::Var("N".into())]),
            ],
        );
        let mut fresh = FreshVars::new(["N".to_string()].into_iter().collect());
        let mut premises = Vec::new();
        let flat = flatten(&t, &defs, &mut fresh, &mut premises, span).unwrap();
        assert_eq!(
            flat,
            Term::App("cons".into(), vec![Term::Var("N".into()), Term::Var("R".into())])
        );
        assert_eq!(premises.len(), 1);
        assert_eq!(crate::syntax::print_atom(&premises[0]), "repeat N R");

        // repeat omega  =>  R with premises [omega O, repeat O R]
        let t = Term::App("repeat".into(), vec![Term::App("omega".into(), vec![])]);
        let mut fresh = FreshVars::new(HashSet::new());
        let mut premises = Vec::new();
        let flat = flatten(&t, &defs, &mut fresh, &mut premises, span).unwrap();
        assert_eq!(flat, Term::Var("R".into()));
        let printed: Vec<String> = premises.iter().map(crate::syntax::print_atom).collect();
        assert_eq!(printed, vec!["omega O", "repeat O R"]);

        // s z stays put
        let t = Term::App("s".into(), vec![Term::App("z".into(), vec![])]);
        let mut fresh = FreshVars::new(HashSet::new());
        let mut premises = Vec::new();
        let flat = flatten(&t, &defs, &mut fresh, &mut premises, span).unwrap();
        assert_eq!(flat, t);
        assert!(premises.is_empty());
    }

    #[test]
    fn rewrites_clause_bodies_through_flatten() {
        let sig = elab(&format!(
            "{STREAMS}
             up : conat -> stream = [N] cons N (up (s N)).
             add: conat -> conat -> conat -> cotype.
             add_z : add z A A.
             add_s : add A B C -> add (s A) B (s C).
             add_stream: stream -> stream -> stream -> cotype.
             add_stream_def : add A B C -> add_stream R S T -> add_stream (cons A R) (cons B S) (cons C T).
             even : stream -> cotype.
             even_def : add_stream (up z) (up z) E -> even E."
        ));
        assert_clause(
            &sig,
            "even_def",
            "even_def : up z U -> up z U1 -> add_stream U U1 E -> even E.",
        );
    }

    #[test]
    fn generated_variables_avoid_user_variables() {
        // The clause already uses U, so the generated variable becomes U1.
        let sig = elab(&format!(
            "{STREAMS}
             up : conat -> stream = [N] cons N (up (s N)).
             q : stream -> stream -> cotype.
             q_def : q (up z) U."
        ));
        let c = &sig.clauses["q_def"];
        assert_eq!(print_clause(c), "q_def : up z U1 -> q U1 U.");
    }

    #[test]
    fn elaboration_is_idempotent() {
        let src = format!(
            "{STREAMS}
             repeat : conat -> stream = [N] cons N (repeat N).
             omega : conat = s omega.
             main : stream = repeat omega."
        );
        let once = elab(&src);
        let twice = elaborate_all(&once).expect("second elaboration");
        assert_eq!(print_signature(&once.decls), print_signature(&twice.decls));
    }

    #[test]
    fn rejects_relation_family_in_def_body() {
        let src = "
            conat: cotype. z: conat. s: conat -> conat.
            add: conat -> conat -> conat -> cotype.
            add_z : add z A A.
            bad : conat = add z z z.
        ";
        let sig = classify(parse_signature(src).expect("parse")).expect("classify");
        let e = elaborate_all(&sig).unwrap_err();
        assert!(e.message.contains("relations are not terms"), "message: {}", e.message);
    }
}
