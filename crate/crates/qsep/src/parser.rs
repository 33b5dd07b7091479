//! Concrete syntax.
//!
//! Terms:
//! ```text
//! term  := \x:TYPE. term
//!        | if term then term else term
//!        | let <x, y> = term in term
//!        | chain
//! chain := unary unary*                      (application, left-assoc)
//! unary := pi1 unary | pi2 unary | atom
//! atom  := x | q1 | true | false | meas | cnot | H | phase
//!        | <term, term> | (term)
//! ```
//!
//! Types: `bit`, `qbit`, `T * T` (right-assoc), `T -> T` (right-assoc,
//! weaker than `*`).
//!
//! Programs: an optional `qubits N;` header giving the register size,
//! followed by a term.
//!
//! Assertions:
//! ```text
//! assertion := or ('->' assertion)?          (right-assoc)
//! or        := and ('\/' and)*
//! and       := unary ('/\' unary)*
//! unary     := '!' unary
//!            | (forall|exists) x. assertion  (extends right)
//!            | atom
//! atom      := true | false | pure lterm
//!            | lterm '~' lterm | lterm '=' lterm
//!            | '{' assertion '}' lterm '.' lterm '=' x '{' assertion '}'
//!            | '(' assertion ')'
//! lterm     := pi1 lterm | pi2 lterm | x | q1 | true | false
//!            | '<' lterm ',' lterm '>'
//! ```
//!
//! `#` starts a comment that runs to the end of the line.

use crate::logic::{Assertion, LogicTerm};
use crate::syntax::{Prim, ProjSide, Term, Type};
use std::fmt;
use thiserror::Error;

/// A syntax error with its position (1-based line and column).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

/// A parsed program: the register size together with the term to run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    /// Number of qubits in the global register.
    pub qubits: usize,
    /// Whether the size was written in the source (`qubits N;`) or inferred
    /// from the largest qubit constant.
    pub declared: bool,
    pub term: Term,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    QubitConst(usize),
    Nat(usize),
    Backslash,
    Dot,
    Colon,
    Comma,
    Semi,
    LAngle,
    RAngle,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Eq,
    Star,
    Arrow,
    Tilde,
    Bang,
    AndTok,
    OrTok,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::QubitConst(i) => write!(f, "`q{i}`"),
            Tok::Nat(n) => write!(f, "`{n}`"),
            Tok::Backslash => f.write_str("`\\`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::LAngle => f.write_str("`<`"),
            Tok::RAngle => f.write_str("`>`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Tilde => f.write_str("`~`"),
            Tok::Bang => f.write_str("`!`"),
            Tok::AndTok => f.write_str("`/\\`"),
            Tok::OrTok => f.write_str("`\\/`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

const KEYWORDS: &[&str] = &[
    "if", "then", "else", "let", "in", "true", "false", "meas", "cnot", "H", "phase", "pi1",
    "pi2", "bit", "qbit", "pure", "forall", "exists", "qubits",
];

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut toks = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = src.chars().peekable();

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if let Some(c) = c {
                if c == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
            }
            c
        }};
    }

    loop {
        let (tline, tcol) = (line, col);
        let c = match chars.peek().copied() {
            Some(c) => c,
            None => break,
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump!();
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump!();
                }
            }
            '\\' => {
                bump!();
                if chars.peek() == Some(&'/') {
                    bump!();
                    toks.push(Spanned {
                        tok: Tok::OrTok,
                        line: tline,
                        col: tcol,
                    });
                } else {
                    toks.push(Spanned {
                        tok: Tok::Backslash,
                        line: tline,
                        col: tcol,
                    });
                }
            }
            '/' => {
                bump!();
                if chars.peek() == Some(&'\\') {
                    bump!();
                    toks.push(Spanned {
                        tok: Tok::AndTok,
                        line: tline,
                        col: tcol,
                    });
                } else {
                    return Err(ParseError {
                        line: tline,
                        col: tcol,
                        message: "expected `\\` after `/` (conjunction is written `/\\`)".into(),
                    });
                }
            }
            '-' => {
                bump!();
                if chars.peek() == Some(&'>') {
                    bump!();
                    toks.push(Spanned {
                        tok: Tok::Arrow,
                        line: tline,
                        col: tcol,
                    });
                } else {
                    return Err(ParseError {
                        line: tline,
                        col: tcol,
                        message: "expected `>` after `-` (arrow is written `->`)".into(),
                    });
                }
            }
            '0'..='9' => {
                let mut digits = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        digits.push(c);
                        bump!();
                    } else {
                        break;
                    }
                }
                let value: usize = digits.parse().map_err(|_| ParseError {
                    line: tline,
                    col: tcol,
                    message: format!("number `{digits}` is out of range"),
                })?;
                toks.push(Spanned {
                    tok: Tok::Nat(value),
                    line: tline,
                    col: tcol,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        word.push(c);
                        bump!();
                    } else {
                        break;
                    }
                }
                let qubit_digits = word
                    .strip_prefix('q')
                    .filter(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()));
                if let Some(digits) = qubit_digits {
                    let index: usize = digits.parse().map_err(|_| ParseError {
                        line: tline,
                        col: tcol,
                        message: format!("qubit index in `{word}` is out of range"),
                    })?;
                    if index == 0 {
                        return Err(ParseError {
                            line: tline,
                            col: tcol,
                            message: "qubit indices start at 1; `q0` is not a qubit".into(),
                        });
                    }
                    toks.push(Spanned {
                        tok: Tok::QubitConst(index),
                        line: tline,
                        col: tcol,
                    });
                } else {
                    toks.push(Spanned {
                        tok: Tok::Word(word),
                        line: tline,
                        col: tcol,
                    });
                }
            }
            _ => {
                let single = match c {
                    '.' => Tok::Dot,
                    ':' => Tok::Colon,
                    ',' => Tok::Comma,
                    ';' => Tok::Semi,
                    '<' => Tok::LAngle,
                    '>' => Tok::RAngle,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '=' => Tok::Eq,
                    '*' => Tok::Star,
                    '~' => Tok::Tilde,
                    '!' => Tok::Bang,
                    other => {
                        return Err(ParseError {
                            line: tline,
                            col: tcol,
                            message: format!("unexpected character `{other}`"),
                        })
                    }
                };
                bump!();
                toks.push(Spanned {
                    tok: single,
                    line: tline,
                    col: tcol,
                });
            }
        }
    }
    toks.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(toks)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        let i = (self.pos + 1).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn here(&self) -> (usize, usize) {
        let s = &self.toks[self.pos];
        (s.line, s.col)
    }

    fn advance(&mut self) -> Tok {
        let tok = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError {
            line,
            col,
            message: message.into(),
        }
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            Err(self.error(format!("expected {tok} {what}, found {}", self.peek())))
        }
    }

    fn expect_word(&mut self, word: &str, what: &str) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Word(w) if w == word => {
                self.advance();
                Ok(())
            }
            other => Err(self.error(format!("expected `{word}` {what}, found {other}"))),
        }
    }

    fn at_word(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Word(w) if w == word)
    }

    fn expect_ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Word(w) => {
                if KEYWORDS.contains(&w.as_str()) {
                    Err(self.error(format!("`{w}` is a reserved word and cannot name {what}")))
                } else {
                    self.advance();
                    Ok(w)
                }
            }
            other => Err(self.error(format!("expected a name for {what}, found {other}"))),
        }
    }

    fn expect_eof(&mut self) -> Result<(), ParseError> {
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            Err(self.error(format!("unexpected {} after complete input", self.peek())))
        }
    }

    // ---- types ----

    fn parse_type(&mut self) -> Result<Type, ParseError> {
        let left = self.parse_product_type()?;
        if matches!(self.peek(), Tok::Arrow) {
            self.advance();
            let right = self.parse_type()?;
            Ok(Type::arrow(left, right))
        } else {
            Ok(left)
        }
    }

    fn parse_product_type(&mut self) -> Result<Type, ParseError> {
        let left = self.parse_atom_type()?;
        if matches!(self.peek(), Tok::Star) {
            self.advance();
            let right = self.parse_product_type()?;
            Ok(Type::product(left, right))
        } else {
            Ok(left)
        }
    }

    fn parse_atom_type(&mut self) -> Result<Type, ParseError> {
        match self.peek().clone() {
            Tok::Word(w) if w == "bit" => {
                self.advance();
                Ok(Type::Bit)
            }
            Tok::Word(w) if w == "qbit" => {
                self.advance();
                Ok(Type::Qbit)
            }
            Tok::LParen => {
                self.advance();
                let ty = self.parse_type()?;
                self.expect(&Tok::RParen, "to close the type")?;
                Ok(ty)
            }
            other => Err(self.error(format!(
                "expected a type (`bit`, `qbit`, or a parenthesized type), found {other}"
            ))),
        }
    }

    // ---- terms ----

    fn parse_term(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            Tok::Backslash => {
                self.advance();
                let param = self.expect_ident("the parameter")?;
                self.expect(&Tok::Colon, "after the parameter name")?;
                let param_ty = self.parse_type()?;
                self.expect(&Tok::Dot, "after the parameter type")?;
                let body = self.parse_term()?;
                Ok(Term::lambda(param, param_ty, body))
            }
            Tok::Word(w) if w == "if" => {
                self.advance();
                let guard = self.parse_term()?;
                self.expect_word("then", "after the condition")?;
                let then_branch = self.parse_term()?;
                self.expect_word("else", "after the first branch")?;
                let else_branch = self.parse_term()?;
                Ok(Term::ite(guard, then_branch, else_branch))
            }
            Tok::Word(w) if w == "let" => {
                self.advance();
                self.expect(&Tok::LAngle, "after `let`")?;
                let left = self.expect_ident("the first component")?;
                self.expect(&Tok::Comma, "between the bound names")?;
                let right = self.expect_ident("the second component")?;
                self.expect(&Tok::RAngle, "to close the pattern")?;
                if left == right {
                    return Err(self.error(format!(
                        "pattern binds `{left}` twice; components need distinct names"
                    )));
                }
                self.expect(&Tok::Eq, "after the pattern")?;
                let bound = self.parse_term()?;
                self.expect_word("in", "after the bound pair")?;
                let body = self.parse_term()?;
                Ok(Term::let_pair(left, right, bound, body))
            }
            _ => self.parse_app_chain(),
        }
    }

    fn starts_unary(&self) -> bool {
        match self.peek() {
            Tok::QubitConst(_) | Tok::LAngle | Tok::LParen => true,
            Tok::Word(w) => !KEYWORDS.contains(&w.as_str()) || ATOM_KEYWORDS.contains(&w.as_str()),
            _ => false,
        }
    }

    fn parse_app_chain(&mut self) -> Result<Term, ParseError> {
        let mut term = self.parse_unary()?;
        while self.starts_unary() {
            let arg = self.parse_unary()?;
            term = Term::app(term, arg);
        }
        Ok(term)
    }

    fn parse_unary(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            Tok::Word(w) if w == "pi1" || w == "pi2" => {
                let side = if w == "pi1" {
                    ProjSide::Fst
                } else {
                    ProjSide::Snd
                };
                self.advance();
                let inner = self.parse_unary()?;
                Ok(Term::proj(side, inner))
            }
            _ => self.parse_atom_term(),
        }
    }

    fn parse_atom_term(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::QubitConst(i) => {
                self.advance();
                Ok(Term::QubitRef(i))
            }
            Tok::LAngle => {
                self.advance();
                let left = self.parse_term()?;
                self.expect(&Tok::Comma, "between the pair components")?;
                let right = self.parse_term()?;
                self.expect(&Tok::RAngle, "to close the pair")?;
                Ok(Term::pair(left, right))
            }
            Tok::LParen => {
                self.advance();
                let term = self.parse_term()?;
                self.expect(&Tok::RParen, "to close the grouping")?;
                Ok(term)
            }
            Tok::Word(w) => {
                match w.as_str() {
                    "true" => {
                        self.advance();
                        Ok(Term::BoolLit(true))
                    }
                    "false" => {
                        self.advance();
                        Ok(Term::BoolLit(false))
                    }
                    "meas" => {
                        self.advance();
                        Ok(Term::Const(Prim::Meas))
                    }
                    "cnot" => {
                        self.advance();
                        Ok(Term::Const(Prim::Cnot))
                    }
                    "H" => {
                        self.advance();
                        Ok(Term::Const(Prim::Hadamard))
                    }
                    "phase" => {
                        self.advance();
                        Ok(Term::Const(Prim::Phase))
                    }
                    _ if KEYWORDS.contains(&w.as_str()) => Err(self.error(format!(
                        "`{w}` is a reserved word and cannot be used as a variable"
                    ))),
                    _ => {
                        self.advance();
                        Ok(Term::Var(w))
                    }
                }
            }
            other => Err(self.error(format!("expected a term, found {other}"))),
        }
    }

    // ---- programs ----

    fn parse_program(&mut self) -> Result<Program, ParseError> {
        let mut declared = None;
        if self.at_word("qubits") {
            self.advance();
            let n = match self.peek().clone() {
                Tok::Nat(n) => {
                    self.advance();
                    n
                }
                other => {
                    return Err(self.error(format!(
                        "expected the register size after `qubits`, found {other}"
                    )))
                }
            };
            self.expect(&Tok::Semi, "after the register size")?;
            declared = Some(n);
        }
        let term = self.parse_term()?;
        self.expect_eof()?;
        let needed = term.max_qubit_index();
        let qubits = match declared {
            Some(n) => {
                if n < needed {
                    return Err(ParseError {
                        line: 1,
                        col: 1,
                        message: format!(
                            "program uses q{needed} but declares only {n} qubit(s)"
                        ),
                    });
                }
                n
            }
            None => needed,
        };
        Ok(Program {
            qubits,
            declared: declared.is_some(),
            term,
        })
    }

    // ---- logic terms ----

    fn parse_logic_term(&mut self) -> Result<LogicTerm, ParseError> {
        match self.peek().clone() {
            Tok::Word(w) if w == "pi1" || w == "pi2" => {
                let side = if w == "pi1" {
                    ProjSide::Fst
                } else {
                    ProjSide::Snd
                };
                self.advance();
                let inner = self.parse_logic_term()?;
                Ok(LogicTerm::proj(side, inner))
            }
            Tok::Word(w) if w == "true" => {
                self.advance();
                Ok(LogicTerm::Bool(true))
            }
            Tok::Word(w) if w == "false" => {
                self.advance();
                Ok(LogicTerm::Bool(false))
            }
            Tok::Word(_) => {
                let name = self.expect_ident("a value")?;
                Ok(LogicTerm::Anchor(name))
            }
            Tok::QubitConst(i) => {
                self.advance();
                Ok(LogicTerm::Qubit(i))
            }
            Tok::LAngle => {
                self.advance();
                let left = self.parse_logic_term()?;
                self.expect(&Tok::Comma, "between the pair components")?;
                let right = self.parse_logic_term()?;
                self.expect(&Tok::RAngle, "to close the pair")?;
                Ok(LogicTerm::pair(left, right))
            }
            other => Err(self.error(format!("expected a logic term, found {other}"))),
        }
    }

    // ---- assertions ----

    fn parse_assertion(&mut self) -> Result<Assertion, ParseError> {
        let left = self.parse_or()?;
        if matches!(self.peek(), Tok::Arrow) {
            self.advance();
            let right = self.parse_assertion()?;
            Ok(Assertion::implies(left, right))
        } else {
            Ok(left)
        }
    }

    fn parse_or(&mut self) -> Result<Assertion, ParseError> {
        let mut left = self.parse_and()?;
        while matches!(self.peek(), Tok::OrTok) {
            self.advance();
            let right = self.parse_and()?;
            left = Assertion::or(left, right);
        }
        Ok(left)
    }

    fn parse_and(&mut self) -> Result<Assertion, ParseError> {
        let mut left = self.parse_unary_assertion()?;
        while matches!(self.peek(), Tok::AndTok) {
            self.advance();
            let right = self.parse_unary_assertion()?;
            left = Assertion::and(left, right);
        }
        Ok(left)
    }

    fn parse_unary_assertion(&mut self) -> Result<Assertion, ParseError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.advance();
                let inner = self.parse_unary_assertion()?;
                Ok(Assertion::not(inner))
            }
            Tok::Word(w) if w == "forall" || w == "exists" => {
                self.advance();
                let name = self.expect_ident("the quantified variable")?;
                self.expect(&Tok::Dot, "after the quantified variable")?;
                let body = self.parse_assertion()?;
                if w == "forall" {
                    Ok(Assertion::forall(name, body))
                } else {
                    Ok(Assertion::exists(name, body))
                }
            }
            _ => self.parse_atom_assertion(),
        }
    }

    fn parse_atom_assertion(&mut self) -> Result<Assertion, ParseError> {
        match self.peek().clone() {
            Tok::Word(w) if w == "true" && !self.lterm_follows() => {
                self.advance();
                Ok(Assertion::True)
            }
            Tok::Word(w) if w == "false" && !self.lterm_follows() => {
                self.advance();
                Ok(Assertion::False)
            }
            Tok::Word(w) if w == "pure" => {
                self.advance();
                let e = self.parse_logic_term()?;
                Ok(Assertion::Pure(e))
            }
            Tok::LParen => {
                self.advance();
                let a = self.parse_assertion()?;
                self.expect(&Tok::RParen, "to close the grouping")?;
                Ok(a)
            }
            Tok::LBrace => {
                self.advance();
                let pre = self.parse_assertion()?;
                self.expect(&Tok::RBrace, "to close the precondition")?;
                let fun = self.parse_logic_term()?;
                self.expect(&Tok::Dot, "between the function and its argument")?;
                let arg = self.parse_logic_term()?;
                self.expect(&Tok::Eq, "before the result name")?;
                let result = self.expect_ident("the evaluation result")?;
                self.expect(&Tok::LBrace, "to open the postcondition")?;
                let post = self.parse_assertion()?;
                self.expect(&Tok::RBrace, "to close the postcondition")?;
                Ok(Assertion::Eval {
                    pre: Box::new(pre),
                    fun,
                    arg,
                    result,
                    post: Box::new(post),
                })
            }
            Tok::Word(_) | Tok::QubitConst(_) | Tok::LAngle => {
                let left = self.parse_logic_term()?;
                match self.peek() {
                    Tok::Tilde => {
                        self.advance();
                        let right = self.parse_logic_term()?;
                        Ok(Assertion::Entangled(left, right))
                    }
                    Tok::Eq => {
                        self.advance();
                        let right = self.parse_logic_term()?;
                        Ok(Assertion::Equal(left, right))
                    }
                    other => Err(self.error(format!(
                        "expected `~` or `=` after the logic term, found {other}"
                    ))),
                }
            }
            other => Err(self.error(format!("expected an assertion, found {other}"))),
        }
    }

    /// After `true`/`false` at an assertion atom: does a logic-term atom
    /// continue (making the literal part of an equality)?
    fn lterm_follows(&self) -> bool {
        matches!(self.peek2(), Tok::Tilde | Tok::Eq)
    }
}

/// Keywords that begin a term atom (and therefore may continue an
/// application chain).
const ATOM_KEYWORDS: &[&str] = &["true", "false", "meas", "cnot", "H", "phase", "pi1", "pi2"];

/// Parse a complete term.
pub fn parse_term(src: &str) -> Result<Term, ParseError> {
    let mut p = Parser::new(src)?;
    let t = p.parse_term()?;
    p.expect_eof()?;
    Ok(t)
}

/// Parse a complete type.
pub fn parse_type(src: &str) -> Result<Type, ParseError> {
    let mut p = Parser::new(src)?;
    let t = p.parse_type()?;
    p.expect_eof()?;
    Ok(t)
}

/// Parse a program file: optional `qubits N;` header, then a term.
pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let mut p = Parser::new(src)?;
    p.parse_program()
}

/// Parse a complete assertion.
pub fn parse_assertion(src: &str) -> Result<Assertion, ParseError> {
    let mut p = Parser::new(src)?;
    let a = p.parse_assertion()?;
    p.expect_eof()?;
    Ok(a)
}

/// Parse a complete logic term.
pub fn parse_logic_term(src: &str) -> Result<LogicTerm, ParseError> {
    let mut p = Parser::new(src)?;
    let t = p.parse_logic_term()?;
    p.expect_eof()?;
    Ok(t)
}
