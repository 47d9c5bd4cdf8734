//! Lexing, parsing and classification of signature files.
//!
//! A signature is an ordered list of declarations in Twelf-style concrete
//! syntax. Constants must be declared before use; the single exception is a
//! notational definition, which may refer to itself in its own body. `%` starts
//! a comment running to the end of the line, except for the `%mode` pragma.

use std::collections::HashMap;
use std::fmt;

use indexmap::IndexMap;

/// Source position, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// First-order applicative term. Uppercase-initial identifiers are variables,
/// everything else refers to a declared constant. `Lam` only appears at the
/// top level of a notational definition's right-hand side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Var(String),
    App(String, Vec<Term>),
    Lam(Vec<String>, Box<Term>),
}

impl Term {
    pub fn head(&self) -> Option<&str> {
        match self {
            Term::App(h, _) => Some(h),
            _ => None,
        }
    }

    /// Variables occurring in the term, in first-occurrence order.
    pub fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Term::Var(v) => {
                if !out.iter().any(|x| x == v) {
                    out.push(v.clone());
                }
            }
            Term::App(_, args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
            Term::Lam(_, body) => body.collect_vars(out),
        }
    }
}

/// Right-nested simple type `a1 -> ... -> an -> target` over base families.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleType {
    pub args: Vec<String>,
    pub target: String,
}

/// A relation applied to argument terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub rel: String,
    pub args: Vec<Term>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgMode {
    Plus,
    Minus,
}

impl fmt::Display for ArgMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgMode::Plus => write!(f, "+"),
            ArgMode::Minus => write!(f, "-"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyDecl {
    pub name: String,
    pub index_types: Vec<String>,
    pub span: Span,
}

/// A term-level constant declaration `name : C1 -> ... -> Cn.`; the components
/// are kept as parsed spines and split into constructor or clause by
/// [`classify`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermConstDecl {
    pub name: String,
    pub components: Vec<Term>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefDecl {
    pub name: String,
    pub ty: SimpleType,
    /// `Lam` when the definition has binders, a plain term otherwise.
    pub body: Term,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModePragma {
    pub relation: String,
    pub modes: Vec<ArgMode>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Declaration {
    Family(FamilyDecl),
    TermConst(TermConstDecl),
    Def(DefDecl),
    Mode(ModePragma),
}

impl Declaration {
    pub fn name(&self) -> Option<&str> {
        match self {
            Declaration::Family(d) => Some(&d.name),
            Declaration::TermConst(d) => Some(&d.name),
            Declaration::Def(d) => Some(&d.name),
            Declaration::Mode(_) => None,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            Declaration::Family(d) => d.span,
            Declaration::TermConst(d) => d.span,
            Declaration::Def(d) => d.span,
            Declaration::Mode(d) => d.span,
        }
    }
}

/// Parse output: resolved, arity-checked declarations in source order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub decls: Vec<Declaration>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub span: Span,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

impl std::error::Error for ParseError {}

fn err<T>(span: Span, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        span,
        message: message.into(),
    })
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Colon,
    Dot,
    Arrow,
    Equals,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Plus,
    Minus,
    ModeKw,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "'{}'", s),
            Tok::Colon => write!(f, "':'"),
            Tok::Dot => write!(f, "'.'"),
            Tok::Arrow => write!(f, "'->'"),
            Tok::Equals => write!(f, "'='"),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
            Tok::LBracket => write!(f, "'['"),
            Tok::RBracket => write!(f, "']'"),
            Tok::Plus => write!(f, "'+'"),
            Tok::Minus => write!(f, "'-'"),
            Tok::ModeKw => write!(f, "'%mode'"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Span,
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '/' || c == '\''
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut toks = Vec::new();
    let mut line: u32 = 1;
    let mut col: u32 = 1;
    let mut chars = src.chars().peekable();

    macro_rules! push {
        ($tok:expr, $span:expr) => {
            toks.push(Token { tok: $tok, span: $span })
        };
    }

    while let Some(&c) = chars.peek() {
        let span = Span { line, col };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '%' => {
                chars.next();
                col += 1;
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if is_ident_char(c) {
                        word.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                if word == "mode" {
                    push!(Tok::ModeKw, span);
                } else {
                    // Comment: skip to end of line.
                    for c in chars.by_ref() {
                        if c == '\n' {
                            line += 1;
                            col = 1;
                            break;
                        }
                    }
                }
            }
            ':' => {
                chars.next();
                col += 1;
                push!(Tok::Colon, span);
            }
            '.' => {
                chars.next();
                col += 1;
                push!(Tok::Dot, span);
            }
            '=' => {
                chars.next();
                col += 1;
                push!(Tok::Equals, span);
            }
            '(' => {
                chars.next();
                col += 1;
                push!(Tok::LParen, span);
            }
            ')' => {
                chars.next();
                col += 1;
                push!(Tok::RParen, span);
            }
            '[' => {
                chars.next();
                col += 1;
                push!(Tok::LBracket, span);
            }
            ']' => {
                chars.next();
                col += 1;
                push!(Tok::RBracket, span);
            }
            '+' => {
                chars.next();
                col += 1;
                push!(Tok::Plus, span);
            }
            '-' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'>') {
                    chars.next();
                    col += 1;
                    push!(Tok::Arrow, span);
                } else {
                    push!(Tok::Minus, span);
                }
            }
            c if is_ident_char(c) => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if is_ident_char(c) {
                        s.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                push!(Tok::Ident(s), span);
            }
            other => {
                return err(span, format!("unexpected character '{}'", other));
            }
        }
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

/// What a name refers to while parsing. Families carry their kind arity,
/// term-level constants their term arity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NameKind {
    Family { arity: usize },
    Constant { arity: usize },
    Definition { arity: usize },
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    names: HashMap<String, NameKind>,
    eof_span: Span,
}

fn is_variable_name(name: &str) -> bool {
    name.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_span(&self) -> Span {
        self.toks.get(self.pos).map_or(self.eof_span, |t| t.span)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<Span, ParseError> {
        match self.next() {
            Some(t) if t.tok == want => Ok(t.span),
            Some(t) => err(t.span, format!("expected {}, found {}", want, t.tok)),
            None => err(self.eof_span, format!("expected {}, found end of input", want)),
        }
    }

    fn expect_ident(&mut self) -> Result<(String, Span), ParseError> {
        match self.next() {
            Some(Token { tok: Tok::Ident(s), span }) => Ok((s, span)),
            Some(t) => err(t.span, format!("expected an identifier, found {}", t.tok)),
            None => err(self.eof_span, "expected an identifier, found end of input"),
        }
    }

    fn lookup(&self, name: &str, span: Span) -> Result<NameKind, ParseError> {
        match self.names.get(name) {
            Some(k) => Ok(*k),
            None => err(span, format!("unknown constant '{}'", name)),
        }
    }

    /// Parse one spine `head arg*`, stopping at `->`, `=`, `.`, `)` or `]`.
    /// Binders in scope are treated as bound variables regardless of case
    /// (they are required to be uppercase at binding time anyway).
    fn parse_spine(&mut self, binders: Option<&[String]>) -> Result<(Term, Span), ParseError> {
        let start = self.peek_span();
        let mut atoms = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Ident(_)) => {
                    let (name, span) = self.expect_ident()?;
                    atoms.push((self.atom_from_name(name, span, binders)?, span, true));
                }
                Some(Tok::LParen) => {
                    let open = self.expect(Tok::LParen)?;
                    let (t, _) = self.parse_spine(binders)?;
                    if self.peek().is_none() {
                        return err(open, "unclosed '('");
                    }
                    self.expect(Tok::RParen)?;
                    atoms.push((t, open, false));
                }
                _ => break,
            }
        }
        if atoms.is_empty() {
            return err(start, "expected a term");
        }
        let (head, head_span, head_is_name) = atoms.remove(0);
        let args: Vec<Term> = atoms.into_iter().map(|(t, _, _)| t).collect();
        if args.is_empty() {
            self.check_arity(&head, head_span, head_is_name)?;
            return Ok((head, head_span));
        }
        match head {
            Term::Var(v) => err(
                head_span,
                format!("variable '{}' cannot be applied to arguments (terms are first-order)", v),
            ),
            Term::Lam(..) => err(head_span, "a lambda cannot be applied here"),
            Term::App(h, existing) => {
                if !existing.is_empty() {
                    // `(f x) y` — partial application of a parenthesized spine.
                    return err(head_span, format!("'{}' is applied to too many arguments", h));
                }
                let t = Term::App(h, args);
                self.check_arity(&t, head_span, true)?;
                Ok((t, head_span))
            }
        }
    }

    /// A bare identifier as a term atom.
    fn atom_from_name(
        &self,
        name: String,
        span: Span,
        binders: Option<&[String]>,
    ) -> Result<Term, ParseError> {
        if let Some(bs) = binders {
            if bs.iter().any(|b| *b == name) {
                return Ok(Term::Var(name));
            }
            if is_variable_name(&name) {
                return err(span, format!("unbound variable '{}' in definition body", name));
            }
        } else if is_variable_name(&name) {
            return Ok(Term::Var(name));
        }
        if name == "cotype" || name == "type" {
            return err(span, format!("'{}' cannot appear inside a term", name));
        }
        self.lookup(&name, span)?;
        Ok(Term::App(name, Vec::new()))
    }

    /// Full-application check: a constant must be applied to exactly as many
    /// arguments as its declared arity.
    fn check_arity(&self, t: &Term, span: Span, _named: bool) -> Result<(), ParseError> {
        if let Term::App(h, args) = t {
            let arity = match self.lookup(h, span)? {
                NameKind::Family { arity } => arity,
                NameKind::Constant { arity } => arity,
                NameKind::Definition { arity } => arity,
            };
            if args.len() != arity {
                return err(
                    span,
                    format!(
                        "arity mismatch: '{}' expects {} argument{}, got {}",
                        h,
                        arity,
                        if arity == 1 { "" } else { "s" },
                        args.len()
                    ),
                );
            }
        }
        Ok(())
    }

    fn parse_pragma(&mut self, span: Span) -> Result<ModePragma, ParseError> {
        let (relation, rspan) = self.expect_ident()?;
        match self.lookup(&relation, rspan)? {
            NameKind::Family { .. } => {}
            _ => {
                return err(rspan, format!("'%mode' expects a type family, but '{}' is not one", relation))
            }
        }
        let mut modes = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.next();
                    modes.push(ArgMode::Plus);
                }
                Some(Tok::Minus) => {
                    self.next();
                    modes.push(ArgMode::Minus);
                }
                Some(Tok::Dot) => {
                    self.next();
                    break;
                }
                Some(t) => {
                    let s = self.peek_span();
                    return err(s, format!("expected '+', '-' or '.' in mode pragma, found {}", t));
                }
                None => return err(self.eof_span, "unterminated mode pragma"),
            }
        }
        Ok(ModePragma { relation, modes, span })
    }

    /// One component of a declaration's right-hand side: either the `cotype`
    /// kind marker or a term spine.
    fn parse_component(&mut self) -> Result<(Option<Term>, Span), ParseError> {
        if let Some(Tok::Ident(s)) = self.peek() {
            if s == "cotype" {
                let span = self.peek_span();
                self.next();
                return Ok((None, span));
            }
            if s == "type" {
                let span = self.peek_span();
                return err(
                    span,
                    "inductive 'type' declarations are not supported in this coinductive fragment; use 'cotype'",
                );
            }
        }
        let (t, span) = self.parse_spine(None)?;
        Ok((Some(t), span))
    }

    /// A component required to be a bare, already-declared family name.
    fn component_as_family(&self, comp: &Option<Term>, span: Span) -> Result<String, ParseError> {
        match comp {
            None => err(span, "'cotype' may only appear as the final component of a declaration"),
            Some(Term::App(h, args)) if args.is_empty() => match self.lookup(h, span)? {
                NameKind::Family { .. } => Ok(h.clone()),
                _ => err(span, format!("'{}' is not a type family", h)),
            },
            Some(Term::Var(v)) => err(span, format!("expected a type family, found variable '{}'", v)),
            Some(_) => err(span, "expected a bare type family name"),
        }
    }

    fn parse_def_body(&mut self) -> Result<Term, ParseError> {
        let mut binders: Vec<String> = Vec::new();
        let mut binder_spans: Vec<Span> = Vec::new();
        while self.peek() == Some(&Tok::LBracket) {
            self.expect(Tok::LBracket)?;
            let mut any = false;
            while let Some(Tok::Ident(_)) = self.peek() {
                let (name, span) = self.expect_ident()?;
                if !is_variable_name(&name) {
                    return err(span, format!("binder '{}' must start with an uppercase letter", name));
                }
                if binders.contains(&name) {
                    return err(span, format!("duplicate binder '{}'", name));
                }
                binders.push(name);
                binder_spans.push(span);
                any = true;
            }
            if !any {
                return err(self.peek_span(), "expected at least one binder inside '[ ]'");
            }
            self.expect(Tok::RBracket)?;
        }
        let (body, _) = self.parse_spine(Some(&binders))?;
        if binders.is_empty() {
            Ok(body)
        } else {
            Ok(Term::Lam(binders, Box::new(body)))
        }
    }

    fn parse_decl(&mut self) -> Result<Declaration, ParseError> {
        if self.peek() == Some(&Tok::ModeKw) {
            let span = self.peek_span();
            self.next();
            return Ok(Declaration::Mode(self.parse_pragma(span)?));
        }
        let (name, span) = self.expect_ident()?;
        if name == "type" || name == "cotype" {
            return err(span, format!("'{}' is a reserved keyword", name));
        }
        if is_variable_name(&name) {
            return err(
                span,
                format!("declaration name '{}' must not start with an uppercase letter (uppercase identifiers are variables)", name),
            );
        }
        if self.names.contains_key(&name) {
            return err(span, format!("duplicate name '{}'", name));
        }
        self.expect(Tok::Colon)?;

        let mut components: Vec<(Option<Term>, Span)> = Vec::new();
        loop {
            components.push(self.parse_component()?);
            match self.peek() {
                Some(Tok::Arrow) => {
                    self.next();
                }
                _ => break,
            }
        }

        match self.peek() {
            Some(Tok::Equals) => {
                // Notational definition.
                self.next();
                let (last, last_span) = components.last().cloned().unwrap();
                let arg_names: Vec<String> = components[..components.len() - 1]
                    .iter()
                    .map(|(comp, cspan)| self.component_as_family(comp, *cspan))
                    .collect::<Result<_, _>>()?;
                if last.is_none() {
                    return err(last_span, "a notational definition cannot have kind 'cotype'");
                }
                let target = self.component_as_family(&last, last_span)?;
                let ty = SimpleType { args: arg_names, target };
                // The definition sees itself while parsing its body.
                self.names.insert(
                    name.clone(),
                    NameKind::Definition { arity: ty.args.len() },
                );
                let body = self.parse_def_body()?;
                let nbinders = match &body {
                    Term::Lam(bs, _) => bs.len(),
                    _ => 0,
                };
                if nbinders != ty.args.len() {
                    return err(
                        span,
                        format!(
                            "definition '{}' has {} binder{} but its type has arity {}",
                            name,
                            nbinders,
                            if nbinders == 1 { "" } else { "s" },
                            ty.args.len()
                        ),
                    );
                }
                self.expect(Tok::Dot)?;
                Ok(Declaration::Def(DefDecl { name, ty, body, span }))
            }
            _ => {
                self.expect(Tok::Dot)?;
                let (last, last_span) = components.last().cloned().unwrap();
                if last.is_none() {
                    // Kind declaration: every earlier component is a family name.
                    let index_types: Vec<String> = components[..components.len() - 1]
                        .iter()
                        .map(|(c, s)| self.component_as_family(c, *s))
                        .collect::<Result<_, _>>()?;
                    self.names.insert(
                        name.clone(),
                        NameKind::Family { arity: index_types.len() },
                    );
                    Ok(Declaration::Family(FamilyDecl { name, index_types, span }))
                } else {
                    let mut terms = Vec::with_capacity(components.len());
                    for (c, cspan) in components {
                        match c {
                            Some(t) => terms.push(t),
                            None => {
                                return err(
                                    cspan,
                                    "'cotype' may only appear as the final component of a declaration",
                                )
                            }
                        }
                    }
                    match terms.last().unwrap() {
                        Term::Var(v) => {
                            return err(
                                last_span,
                                format!("the target of '{}' cannot be the variable '{}'", name, v),
                            )
                        }
                        Term::App(..) | Term::Lam(..) => {}
                    }
                    self.names.insert(
                        name.clone(),
                        NameKind::Constant { arity: terms.len() - 1 },
                    );
                    Ok(Declaration::TermConst(TermConstDecl { name, components: terms, span }))
                }
            }
        }
    }
}

/// Parse a signature file into resolved, arity-checked declarations.
pub fn parse_signature(src: &str) -> Result<Signature, ParseError> {
    let toks = lex(src)?;
    let eof_span = toks.last().map_or(Span { line: 1, col: 1 }, |t| t.span);
    let mut p = Parser { toks, pos: 0, names: HashMap::new(), eof_span };
    let mut decls = Vec::new();
    while p.peek().is_some() {
        decls.push(p.parse_decl()?);
    }
    Ok(Signature { decls })
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyClass {
    Data,
    Relation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyInfo {
    pub index_types: Vec<String>,
    pub class: FamilyClass,
    /// Constructor names, for data families, in declaration order.
    pub constructors: Vec<String>,
    /// Clause names, for relations, in declaration order.
    pub clauses: Vec<String>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstructorInfo {
    pub arg_types: Vec<String>,
    pub target: String,
    /// Declaration position in the signature, used as a canonical ordering.
    pub order: usize,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub name: String,
    pub premises: Vec<Atom>,
    pub conclusion: Atom,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefInfo {
    pub ty: SimpleType,
    pub binders: Vec<String>,
    /// Body with the binders stripped.
    pub body: Term,
    pub span: Span,
}

/// Signature with every family tagged data/relation, every term constant
/// split into constructor or clause, and notational definitions queued for
/// elaboration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifiedSignature {
    pub decls: Vec<Declaration>,
    pub families: IndexMap<String, FamilyInfo>,
    pub constructors: IndexMap<String, ConstructorInfo>,
    pub clauses: IndexMap<String, Clause>,
    pub defs: IndexMap<String, DefInfo>,
    pub pragmas: Vec<ModePragma>,
}

impl ClassifiedSignature {
    pub fn relation(&self, name: &str) -> Option<&FamilyInfo> {
        self.families.get(name).filter(|f| f.class == FamilyClass::Relation)
    }

    /// Arity (declaration order index) of a constructor, used to order
    /// decision-tree branches canonically.
    pub fn constructor_order(&self, name: &str) -> usize {
        self.constructors.get(name).map_or(usize::MAX, |c| c.order)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifyError {
    pub span: Span,
    pub message: String,
}

impl fmt::Display for ClassifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

impl std::error::Error for ClassifyError {}

fn cerr<T>(span: Span, message: impl Into<String>) -> Result<T, ClassifyError> {
    Err(ClassifyError { span, message: message.into() })
}

/// Check that a term is a data term: variables, constructors and defined
/// constants only — type families and clause constants cannot occur.
fn check_data_term(
    t: &Term,
    sig: &ClassifiedSignature,
    owner: &str,
    span: Span,
) -> Result<(), ClassifyError> {
    match t {
        Term::Var(_) => Ok(()),
        Term::Lam(..) => cerr(span, format!("lambda not allowed inside arguments of '{}'", owner)),
        Term::App(h, args) => {
            if sig.families.contains_key(h) {
                return cerr(
                    span,
                    format!("type family '{}' used in a term position in '{}'", h, owner),
                );
            }
            if sig.clauses.contains_key(h) {
                return cerr(
                    span,
                    format!("clause '{}' used in a term position in '{}'", h, owner),
                );
            }
            for a in args {
                check_data_term(a, sig, owner, span)?;
            }
            Ok(())
        }
    }
}

/// Tag every family as data or relation and every term constant as
/// constructor or clause. Deterministic and total on well-formed signatures.
pub fn classify(sig: Signature) -> Result<ClassifiedSignature, ClassifyError> {
    let mut out = ClassifiedSignature {
        decls: Vec::with_capacity(sig.decls.len()),
        families: IndexMap::new(),
        constructors: IndexMap::new(),
        clauses: IndexMap::new(),
        defs: IndexMap::new(),
        pragmas: Vec::new(),
    };
    for (order, decl) in sig.decls.into_iter().enumerate() {
        match &decl {
            Declaration::Family(f) => {
                let class = if f.index_types.is_empty() {
                    FamilyClass::Data
                } else {
                    FamilyClass::Relation
                };
                for ix in &f.index_types {
                    let info = out.families.get(ix).expect("index family resolved at parse");
                    if info.class != FamilyClass::Data {
                        return cerr(
                            f.span,
                            format!("index type '{}' of relation '{}' must be a data type", ix, f.name),
                        );
                    }
                }
                out.families.insert(
                    f.name.clone(),
                    FamilyInfo {
                        index_types: f.index_types.clone(),
                        class,
                        constructors: Vec::new(),
                        clauses: Vec::new(),
                        span: f.span,
                    },
                );
            }
            Declaration::TermConst(c) => {
                let (target, rest) = c.components.split_last().expect("nonempty components");
                let (thead, targs) = match target {
                    Term::App(h, args) => (h.clone(), args),
                    _ => unreachable!("target shape checked at parse"),
                };
                let tclass = match out.families.get(&thead) {
                    Some(info) => info.class,
                    None => {
                        return cerr(
                            c.span,
                            format!("target '{}' of '{}' is not a type family", thead, c.name),
                        )
                    }
                };
                match tclass {
                    FamilyClass::Data => {
                        debug_assert!(targs.is_empty());
                        let mut arg_types = Vec::with_capacity(rest.len());
                        for comp in rest {
                            match comp {
                                Term::App(h, args) if args.is_empty() => {
                                    match out.families.get(h) {
                                        Some(fi) if fi.class == FamilyClass::Data => {
                                            arg_types.push(h.clone());
                                        }
                                        Some(_) => {
                                            return cerr(
                                                c.span,
                                                format!(
                                                    "constructor '{}' mentions relation '{}' in an argument type",
                                                    c.name, h
                                                ),
                                            )
                                        }
                                        None => {
                                            return cerr(
                                                c.span,
                                                format!(
                                                    "argument '{}' of constructor '{}' is not a data type",
                                                    h, c.name
                                                ),
                                            )
                                        }
                                    }
                                }
                                Term::App(h, _) if out.families.get(h).is_some_and(|f| f.class == FamilyClass::Relation) => {
                                    return cerr(
                                        c.span,
                                        format!(
                                            "'{}' targets data type '{}' but has relation premise '{}'",
                                            c.name, thead, h
                                        ),
                                    )
                                }
                                _ => {
                                    return cerr(
                                        c.span,
                                        format!(
                                            "argument types of constructor '{}' must be bare data type names",
                                            c.name
                                        ),
                                    )
                                }
                            }
                        }
                        out.constructors.insert(
                            c.name.clone(),
                            ConstructorInfo {
                                arg_types,
                                target: thead.clone(),
                                order,
                                span: c.span,
                            },
                        );
                        out.families
                            .get_mut(&thead)
                            .unwrap()
                            .constructors
                            .push(c.name.clone());
                    }
                    FamilyClass::Relation => {
                        let conclusion = Atom { rel: thead.clone(), args: targs.clone() };
                        for a in &conclusion.args {
                            check_data_term(a, &out, &c.name, c.span)?;
                        }
                        let mut premises = Vec::with_capacity(rest.len());
                        for comp in rest {
                            match comp {
                                Term::App(h, args) => match out.families.get(h) {
                                    Some(fi) if fi.class == FamilyClass::Relation => {
                                        for a in args {
                                            check_data_term(a, &out, &c.name, c.span)?;
                                        }
                                        premises.push(Atom { rel: h.clone(), args: args.clone() });
                                    }
                                    _ => {
                                        return cerr(
                                            c.span,
                                            format!(
                                                "premise '{}' of clause '{}' is not a relation",
                                                h, c.name
                                            ),
                                        )
                                    }
                                },
                                Term::Var(v) => {
                                    return cerr(
                                        c.span,
                                        format!(
                                            "premise of clause '{}' cannot be the bare variable '{}'",
                                            c.name, v
                                        ),
                                    )
                                }
                                Term::Lam(..) => {
                                    return cerr(c.span, format!("lambda premise in clause '{}'", c.name))
                                }
                            }
                        }
                        out.clauses.insert(
                            c.name.clone(),
                            Clause {
                                name: c.name.clone(),
                                premises,
                                conclusion,
                                span: c.span,
                            },
                        );
                        out.families
                            .get_mut(&thead)
                            .unwrap()
                            .clauses
                            .push(c.name.clone());
                    }
                }
            }
            Declaration::Def(d) => {
                for ty in d.ty.args.iter().chain(std::iter::once(&d.ty.target)) {
                    let info = out.families.get(ty).expect("def type resolved at parse");
                    if info.class != FamilyClass::Data {
                        return cerr(
                            d.span,
                            format!("definition '{}' must have a data type, but '{}' is a relation", d.name, ty),
                        );
                    }
                }
                let (binders, body) = match &d.body {
                    Term::Lam(bs, b) => (bs.clone(), (**b).clone()),
                    other => (Vec::new(), other.clone()),
                };
                out.defs.insert(
                    d.name.clone(),
                    DefInfo { ty: d.ty.clone(), binders, body, span: d.span },
                );
            }
            Declaration::Mode(m) => {
                out.pragmas.push(m.clone());
            }
        }
        out.decls.push(decl);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Concrete-syntax printing
// ---------------------------------------------------------------------------

/// Print a term as a spine argument: applications with arguments get parens.
pub fn print_term_atom(t: &Term) -> String {
    match t {
        Term::Var(v) => v.clone(),
        Term::App(h, args) if args.is_empty() => h.clone(),
        Term::App(..) => format!("({})", print_term_spine(t)),
        Term::Lam(..) => print_term_spine(t),
    }
}

/// Print a term as a top-level spine, without outer parens.
pub fn print_term_spine(t: &Term) -> String {
    match t {
        Term::Var(v) => v.clone(),
        Term::App(h, args) => {
            let mut s = h.clone();
            for a in args {
                s.push(' ');
                s.push_str(&print_term_atom(a));
            }
            s
        }
        Term::Lam(binders, body) => {
            let mut s = String::new();
            for b in binders {
                s.push_str(&format!("[{}] ", b));
            }
            s.push_str(&print_term_spine(body));
            s
        }
    }
}

pub fn print_atom(a: &Atom) -> String {
    print_term_spine(&Term::App(a.rel.clone(), a.args.clone()))
}

pub fn print_declaration(d: &Declaration) -> String {
    match d {
        Declaration::Family(f) => {
            let mut s = format!("{} : ", f.name);
            for ix in &f.index_types {
                s.push_str(ix);
                s.push_str(" -> ");
            }
            s.push_str("cotype.");
            s
        }
        Declaration::TermConst(c) => {
            let comps: Vec<String> = c.components.iter().map(print_term_spine).collect();
            format!("{} : {}.", c.name, comps.join(" -> "))
        }
        Declaration::Def(d) => {
            let mut ty = String::new();
            for a in &d.ty.args {
                ty.push_str(a);
                ty.push_str(" -> ");
            }
            ty.push_str(&d.ty.target);
            format!("{} : {} = {}.", d.name, ty, print_term_spine(&d.body))
        }
        Declaration::Mode(m) => {
            let modes: Vec<String> = m.modes.iter().map(|m| m.to_string()).collect();
            format!("%mode {} {}.", m.relation, modes.join(" "))
        }
    }
}

pub fn print_signature(decls: &[Declaration]) -> String {
    let mut s = String::new();
    for d in decls {
        s.push_str(&print_declaration(d));
        s.push('\n');
    }
    s
}

/// Rename clause variables to `V0, V1, ...` in first-occurrence order
/// (premises left to right, then the conclusion), for alpha-insensitive
/// comparison.
pub fn alpha_normalize_clause(c: &Clause) -> Clause {
    let mut order: Vec<String> = Vec::new();
    for p in &c.premises {
        for a in &p.args {
            a.collect_vars(&mut order);
        }
    }
    for a in &c.conclusion.args {
        a.collect_vars(&mut order);
    }
    let map: HashMap<String, String> = order
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, format!("V{}", i)))
        .collect();
    fn rename(t: &Term, map: &HashMap<String, String>) -> Term {
        match t {
            Term::Var(v) => Term::Var(map[v].clone()),
            Term::App(h, args) => Term::App(h.clone(), args.iter().map(|a| rename(a, map)).collect()),
            Term::Lam(bs, b) => Term::Lam(bs.clone(), Box::new(rename(b, map))),
        }
    }
    Clause {
        name: c.name.clone(),
        premises: c
            .premises
            .iter()
            .map(|p| Atom { rel: p.rel.clone(), args: p.args.iter().map(|a| rename(a, &map)).collect() })
            .collect(),
        conclusion: Atom {
            rel: c.conclusion.rel.clone(),
            args: c.conclusion.args.iter().map(|a| rename(a, &map)).collect(),
        },
        span: c.span,
    }
}

/// Print a clause in concrete syntax (`name : P1 -> ... -> conclusion.`).
pub fn print_clause(c: &Clause) -> String {
    let mut comps: Vec<String> = c.premises.iter().map(print_atom).collect();
    comps.push(print_atom(&c.conclusion));
    format!("{} : {}.", c.name, comps.join(" -> "))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_ok(src: &str) -> Signature {
        parse_signature(src).expect("parse should succeed")
    }

    fn classify_ok(src: &str) -> ClassifiedSignature {
        classify(parse_ok(src)).expect("classify should succeed")
    }

    const CONAT: &str = "conat: cotype. z: conat. s: conat -> conat.";

    #[test]
    fn parses_simple_data_signature() {
        let sig = parse_ok(CONAT);
        assert_eq!(sig.decls.len(), 3);
        match &sig.decls[0] {
            Declaration::Family(f) => {
                assert_eq!(f.name, "conat");
                assert!(f.index_types.is_empty());
            }
            other => panic!("expected family, got {:?}", other),
        }
        match &sig.decls[2] {
            Declaration::TermConst(c) => {
                assert_eq!(c.name, "s");
                assert_eq!(c.components.len(), 2);
            }
            other => panic!("expected term constant, got {:?}", other),
        }
    }

    #[test]
    fn parses_empty_input() {
        assert!(parse_ok("").decls.is_empty());
        assert!(parse_ok("  % only a comment\n").decls.is_empty());
    }

    #[test]
    fn parses_add_clause() {
        let src = format!(
            "{CONAT} add: conat -> conat -> conat -> cotype. add_s : add A B C -> add (s A) B (s C)."
        );
        let sig = classify_ok(&src);
        let c = &sig.clauses["add_s"];
        assert_eq!(c.premises.len(), 1);
        assert_eq!(c.premises[0].rel, "add");
        assert_eq!(
            c.premises[0].args,
            vec![
                Term::Var("A".into()),
                Term::Var("B".into()),
                Term::Var("C".into())
            ]
        );
        assert_eq!(c.conclusion.rel, "add");
        assert_eq!(
            c.conclusion.args[0],
            Term::App("s".into(), vec![Term::Var("A".into())])
        );
    }

    #[test]
    fn rejects_type_keyword_with_hint() {
        let e = parse_signature("nat: type.").unwrap_err();
        assert!(e.message.contains("coinductive"), "message was: {}", e.message);
        assert_eq!(e.span.line, 1);
        assert_eq!(e.span.col, 6);
    }

    #[test]
    fn rejects_unknown_constant() {
        let e = parse_signature("z: conat.").unwrap_err();
        assert!(e.message.contains("unknown constant 'conat'"));
    }

    #[test]
    fn rejects_arity_mismatch() {
        let e = parse_signature(&format!("{CONAT} bad : conat = s.")).unwrap_err();
        assert!(e.message.contains("arity mismatch"), "message was: {}", e.message);
        let e = parse_signature(&format!("{CONAT} bad : conat = s z z.")).unwrap_err();
        assert!(e.message.contains("arity mismatch"));
    }

    #[test]
    fn rejects_duplicate_name() {
        let e = parse_signature("conat: cotype. conat: cotype.").unwrap_err();
        assert!(e.message.contains("duplicate name 'conat'"));
    }

    #[test]
    fn rejects_unbalanced_parens() {
        let e =
            parse_signature(&format!("{CONAT} one : conat = (s z.")).unwrap_err();
        assert!(
            e.message.contains("expected ')'") || e.message.contains("unclosed"),
            "message was: {}",
            e.message
        );
    }

    #[test]
    fn rejects_applied_variable() {
        let src = format!("{CONAT} p: conat -> cotype. c : p (X z).");
        let e = parse_signature(&src).unwrap_err();
        assert!(e.message.contains("cannot be applied"));
    }

    #[test]
    fn comments_and_slash_identifiers() {
        let src = "
            % stream signature
            conat: cotype. z: conat. s: conat -> conat.
            stream: cotype.
            cons: conat -> stream -> stream. % constructor
            integrate/aux : stream -> cotype.
        ";
        let sig = classify_ok(src);
        assert!(sig.families.contains_key("integrate/aux"));
    }

    #[test]
    fn multi_binder_sugar_forms_agree() {
        let base = "conat: cotype. z: conat. s: conat -> conat.
                    pair: cotype. mk: conat -> conat -> pair.";
        let a = classify_ok(&format!("{base} f : conat -> conat -> pair = [X] [Y] mk X Y."));
        let b = classify_ok(&format!("{base} f : conat -> conat -> pair = [X Y] mk X Y."));
        assert_eq!(a.defs["f"].binders, b.defs["f"].binders);
        assert_eq!(a.defs["f"].body, b.defs["f"].body);
    }

    #[test]
    fn def_may_reference_itself_but_not_later_names() {
        let ok = format!("{CONAT} stream: cotype. cons: conat -> stream -> stream. repeat : conat -> stream = [N] cons N (repeat N).");
        assert!(parse_signature(&ok).is_ok());
        let bad = format!("{CONAT} up : conat -> conat = [N] down N. down : conat -> conat = [N] up N.");
        let e = parse_signature(&bad).unwrap_err();
        assert!(e.message.contains("unknown constant 'down'"));
    }

    #[test]
    fn rejects_unbound_variable_in_def_body() {
        let e = parse_signature(&format!("{CONAT} one : conat = s N.")).unwrap_err();
        assert!(e.message.contains("unbound variable 'N'"));
    }

    #[test]
    fn rejects_binder_count_mismatch() {
        let e = parse_signature(&format!(
            "{CONAT} stream: cotype. cons: conat -> stream -> stream. f : conat -> stream = cons z (f z)."
        ))
        .unwrap_err();
        assert!(e.message.contains("binder"), "message was: {}", e.message);
    }

    #[test]
    fn classifies_data_and_constructors() {
        let sig = classify_ok(CONAT);
        assert_eq!(sig.families["conat"].class, FamilyClass::Data);
        assert_eq!(sig.families["conat"].constructors, vec!["z", "s"]);
        assert!(sig.constructors.contains_key("z"));
        assert!(sig.constructors.contains_key("s"));
        assert_eq!(sig.constructors["s"].arg_types, vec!["conat"]);
    }

    #[test]
    fn classifies_relations_and_clauses() {
        let src = format!(
            "{CONAT} add: conat -> conat -> conat -> cotype. add_z : add z A A. add_s : add A B C -> add (s A) B (s C)."
        );
        let sig = classify_ok(&src);
        assert_eq!(sig.families["add"].class, FamilyClass::Relation);
        assert_eq!(sig.families["add"].clauses, vec!["add_z", "add_s"]);
        assert!(sig.clauses["add_z"].premises.is_empty());
    }

    #[test]
    fn vacuous_data_family_is_legal() {
        let sig = classify_ok("stream: cotype.");
        assert_eq!(sig.families["stream"].class, FamilyClass::Data);
        assert!(sig.families["stream"].constructors.is_empty());
    }

    #[test]
    fn rejects_relation_premise_on_data_target() {
        let src = format!(
            "{CONAT} add: conat -> conat -> conat -> cotype. c : add A B C -> conat."
        );
        let e = classify(parse_ok(&src)).unwrap_err();
        assert!(e.message.contains("relation premise"), "message was: {}", e.message);
    }

    #[test]
    fn rejects_family_in_term_position() {
        let src = format!(
            "{CONAT} p: conat -> cotype. c : p (s conat)."
        );
        let e = classify(parse_ok(&src)).unwrap_err();
        assert!(e.message.contains("term position"), "message was: {}", e.message);
    }

    #[test]
    fn classification_is_deterministic() {
        let src = format!(
            "{CONAT} add: conat -> conat -> conat -> cotype. add_z : add z A A."
        );
        let a = classify_ok(&src);
        let b = classify_ok(&src);
        assert_eq!(a, b);
    }

    #[test]
    fn mode_pragma_parses() {
        let src = format!("{CONAT} add: conat -> conat -> conat -> cotype. %mode add + + -.");
        let sig = classify_ok(&src);
        assert_eq!(sig.pragmas.len(), 1);
        assert_eq!(sig.pragmas[0].relation, "add");
        assert_eq!(
            sig.pragmas[0].modes,
            vec![ArgMode::Plus, ArgMode::Plus, ArgMode::Minus]
        );
    }

    #[test]
    fn print_parse_round_trip_is_alpha_equivalent() {
        let src = format!(
            "{CONAT}
             stream: cotype. cons: conat -> stream -> stream.
             repeat : conat -> stream = [N] cons N (repeat N).
             add: conat -> conat -> conat -> cotype.
             %mode add + + -.
             add_z : add z A A.
             add_s : add A B C -> add (s A) B (s C)."
        );
        let sig1 = classify_ok(&src);
        let printed = print_signature(&sig1.decls);
        let sig2 = classify(parse_signature(&printed).expect("reparse")).expect("reclassify");
        assert_eq!(print_signature(&sig2.decls), printed);
        for (name, c1) in &sig1.clauses {
            let c2 = &sig2.clauses[name];
            assert_eq!(
                print_clause(&alpha_normalize_clause(c1)),
                print_clause(&alpha_normalize_clause(c2))
            );
        }
    }

    #[test]
    fn parsed_printed_ground_term_round_trips() {
        // A ground term printed by the runtime printer parses back through the
        // ordinary term grammar.
        let src = format!("{CONAT} two : conat = (s (s z)).");
        let sig = classify_ok(&src);
        assert_eq!(
            sig.defs["two"].body,
            Term::App("s".into(), vec![Term::App("s".into(), vec![Term::App("z".into(), vec![])])])
        );
    }
}
