//! Rendering of partial terms and partial proof objects.
//!
//! Output uses the parenthesized textual form `(cons z (cons (s z) ...))`,
//! where `...` stands for a position that has not been computed. A maximal
//! run of trailing unresolved arguments collapses to a single `...`.

use std::fmt;

/// Snapshot of a cell graph (or proof tree): either a constructor applied to
/// sub-snapshots, or an unresolved position (empty, undemanded or truncated).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartialTerm {
    Unresolved,
    Node(String, Vec<PartialTerm>),
}

impl PartialTerm {
    pub fn node(name: &str, args: Vec<PartialTerm>) -> Self {
        PartialTerm::Node(name.to_string(), args)
    }

    /// Number of resolved constructor nodes.
    pub fn resolved_count(&self) -> usize {
        match self {
            PartialTerm::Unresolved => 0,
            PartialTerm::Node(_, args) => {
                1 + args.iter().map(|a| a.resolved_count()).sum::<usize>()
            }
        }
    }

    /// Information order: `self` is a prefix of `other` when they agree
    /// wherever both are resolved and everything resolved in `self` is also
    /// resolved in `other`.
    pub fn is_information_prefix_of(&self, other: &PartialTerm) -> bool {
        match (self, other) {
            (PartialTerm::Unresolved, _) => true,
            (PartialTerm::Node(..), PartialTerm::Unresolved) => false,
            (PartialTerm::Node(c1, args1), PartialTerm::Node(c2, args2)) => {
                c1 == c2
                    && args1.len() == args2.len()
                    && args1
                        .iter()
                        .zip(args2)
                        .all(|(a, b)| a.is_information_prefix_of(b))
            }
        }
    }
}

fn render(t: &PartialTerm, out: &mut String) {
    match t {
        PartialTerm::Unresolved => out.push_str("..."),
        PartialTerm::Node(name, args) if args.is_empty() => out.push_str(name),
        PartialTerm::Node(name, args) => {
            // Collapse the trailing run of unresolved arguments to one `...`.
            let mut shown = args.len();
            while shown > 0 && args[shown - 1] == PartialTerm::Unresolved {
                shown -= 1;
            }
            out.push('(');
            out.push_str(name);
            for a in &args[..shown] {
                out.push(' ');
                render(a, out);
            }
            if shown < args.len() {
                out.push_str(" ...");
            }
            out.push(')');
        }
    }
}

/// Single-line rendering of a partial term.
pub fn print_term(t: &PartialTerm) -> String {
    let mut out = String::new();
    render(t, &mut out);
    out
}

/// Partial proof objects print exactly like terms, with clause names as the
/// constructors and `...` for premises that were never committed.
pub fn print_proof(t: &PartialTerm) -> String {
    print_term(t)
}

impl fmt::Display for PartialTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_term(self))
    }
}

/// Parse the printed form back into a `PartialTerm`. Collapsed trailing
/// ellipses come back as a single `Unresolved` argument, so round-trips are
/// exact only up to the collapse rule.
pub fn parse_partial(src: &str) -> Result<PartialTerm, String> {
    #[derive(Debug, PartialEq)]
    enum Tok {
        LParen,
        RParen,
        Dots,
        Ident(String),
    }
    let mut toks = Vec::new();
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' => {
                chars.next();
                toks.push(Tok::LParen);
            }
            ')' => {
                chars.next();
                toks.push(Tok::RParen);
            }
            '.' => {
                for _ in 0..3 {
                    if chars.next() != Some('.') {
                        return Err("stray '.' in partial term".into());
                    }
                }
                toks.push(Tok::Dots);
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            c if c.is_ascii_alphanumeric() || c == '_' || c == '/' || c == '\'' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' || c == '/' || c == '\'' {
                        s.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                toks.push(Tok::Ident(s));
            }
            other => return Err(format!("unexpected character '{}' in partial term", other)),
        }
    }

    fn parse(toks: &[Tok], pos: &mut usize) -> Result<PartialTerm, String> {
        match toks.get(*pos) {
            Some(Tok::Dots) => {
                *pos += 1;
                Ok(PartialTerm::Unresolved)
            }
            Some(Tok::Ident(s)) => {
                *pos += 1;
                Ok(PartialTerm::Node(s.clone(), vec![]))
            }
            Some(Tok::LParen) => {
                *pos += 1;
                let name = match toks.get(*pos) {
                    Some(Tok::Ident(s)) => s.clone(),
                    _ => return Err("expected constructor name after '('".into()),
                };
                *pos += 1;
                let mut args = Vec::new();
                while toks.get(*pos) != Some(&Tok::RParen) {
                    if *pos >= toks.len() {
                        return Err("unclosed '(' in partial term".into());
                    }
                    args.push(parse(toks, pos)?);
                }
                *pos += 1;
                Ok(PartialTerm::Node(name, args))
            }
            Some(Tok::RParen) => Err("unexpected ')'".into()),
            None => Err("empty partial term".into()),
        }
    }

    let mut pos = 0;
    let t = parse(&toks, &mut pos)?;
    if pos != toks.len() {
        return Err("trailing input after partial term".into());
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u() -> PartialTerm {
        PartialTerm::Unresolved
    }
    fn z() -> PartialTerm {
        PartialTerm::node("z", vec![])
    }
    fn s(t: PartialTerm) -> PartialTerm {
        PartialTerm::node("s", vec![t])
    }
    fn cons(h: PartialTerm, t: PartialTerm) -> PartialTerm {
        PartialTerm::node("cons", vec![h, t])
    }

    #[test]
    fn prints_nullary_bare() {
        assert_eq!(print_term(&z()), "z");
    }

    #[test]
    fn prints_application_with_ellipsis() {
        assert_eq!(print_term(&cons(z(), u())), "(cons z ...)");
    }

    #[test]
    fn collapses_trailing_unresolved_run() {
        assert_eq!(print_term(&cons(u(), u())), "(cons ...)");
        // A non-trailing unresolved argument is kept in place.
        assert_eq!(print_term(&cons(u(), z())), "(cons ... z)");
    }

    #[test]
    fn prints_proofs_like_terms() {
        assert_eq!(print_proof(&PartialTerm::node("add_z", vec![])), "add_z");
        assert_eq!(
            print_proof(&PartialTerm::node(
                "add_s",
                vec![PartialTerm::node("add_z", vec![])]
            )),
            "(add_s add_z)"
        );
        assert_eq!(
            print_proof(&PartialTerm::node("up_def", vec![u()])),
            "(up_def ...)"
        );
    }

    #[test]
    fn parse_round_trips_modulo_collapse() {
        let t = cons(s(z()), cons(s(s(u())), u()));
        let printed = print_term(&t);
        assert_eq!(printed, "(cons (s z) (cons (s (s ...)) ...))");
        let back = parse_partial(&printed).unwrap();
        assert_eq!(print_term(&back), printed);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_partial("(cons z").is_err());
        assert!(parse_partial("(cons z))").is_err());
        assert!(parse_partial("..").is_err());
        assert!(parse_partial("").is_err());
    }

    #[test]
    fn information_prefix_examples() {
        assert!(u().is_information_prefix_of(&cons(z(), u())));
        assert!(cons(z(), u()).is_information_prefix_of(&cons(z(), cons(z(), u()))));
        assert!(!cons(z(), u()).is_information_prefix_of(&u()));
        assert!(!cons(z(), u()).is_information_prefix_of(&cons(s(u()), u())));
    }

    /// Enumerate all partial terms over z/s/cons/unresolved up to a depth and
    /// check the printer is injective up to the trailing-collapse rule.
    #[test]
    fn printing_is_injective_up_to_collapse() {
        fn enumerate(depth: usize) -> Vec<PartialTerm> {
            if depth == 0 {
                return vec![u(), z()];
            }
            let smaller = enumerate(depth - 1);
            let mut out = smaller.clone();
            for a in &smaller {
                out.push(s(a.clone()));
                for b in &smaller {
                    out.push(cons(a.clone(), b.clone()));
                }
            }
            out
        }
        fn canonical(t: &PartialTerm) -> PartialTerm {
            match t {
                PartialTerm::Unresolved => u(),
                PartialTerm::Node(c, args) => {
                    let mut args: Vec<PartialTerm> = args.iter().map(canonical).collect();
                    let mut stripped = false;
                    while args.last() == Some(&PartialTerm::Unresolved) {
                        args.pop();
                        stripped = true;
                    }
                    if stripped {
                        args.push(u());
                    }
                    PartialTerm::Node(c.clone(), args)
                }
            }
        }
        let all = enumerate(2);
        for a in &all {
            for b in &all {
                if print_term(a) == print_term(b) {
                    assert_eq!(
                        canonical(a),
                        canonical(b),
                        "{a:?} and {b:?} print identically but are not collapse-equivalent"
                    );
                }
            }
        }
    }
}
