//! Proof scripts and the derivation checker for entanglement triples.
//!
//! A proof script is a tree of rule applications loaded from JSON.  Every
//! node carries its full conclusion judgment `{pre} subject :anchor : type
//! {post}`, so checking is local: each rule is a syntactic schema relating
//! the conclusion to the premises, plus entailment side conditions on the
//! consequence rule.  The checker validates, at every node, that
//!
//! * the subject is a well-typed program consuming exactly the term
//!   variables in scope,
//! * the precondition mentions only names already in scope and the
//!   postcondition only those plus the anchor and the names carried
//!   forward from measurements inside the subject,
//! * the premises are the exact judgments the rule schema demands.
//!
//! Anchors name the value a program produces so the postcondition can talk
//! about it; a pair anchor names both components of a pair-typed result.

use crate::concrete::is_value;
use crate::logic::{entails, Assertion, AssertionContext, Entailment, LogicTerm};
use crate::parser::{parse_assertion, parse_term, parse_type, ParseError};
use crate::syntax::{Prim, ProjSide, Term, Type};
use crate::typecheck::{typecheck_in, TypingContext};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// The name(s) a judgment binds for the produced value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Anchor {
    Single(String),
    Pair(String, String),
}

impl Anchor {
    pub fn names(&self) -> Vec<&str> {
        match self {
            Anchor::Single(u) => vec![u],
            Anchor::Pair(u, v) => vec![u, v],
        }
    }

    /// The logical term standing for the anchored value.
    pub fn logic_term(&self) -> LogicTerm {
        match self {
            Anchor::Single(u) => LogicTerm::anchor(u.clone()),
            Anchor::Pair(u, v) => LogicTerm::pair(
                LogicTerm::anchor(u.clone()),
                LogicTerm::anchor(v.clone()),
            ),
        }
    }

    /// The typed names the anchor adds to the postcondition scope, given
    /// the judgment's stated type.  A pair anchor needs a pair type.
    fn bindings(&self, ty: &Type) -> Result<Vec<(String, Type)>, String> {
        match self {
            Anchor::Single(u) => Ok(vec![(u.clone(), ty.clone())]),
            Anchor::Pair(u, v) => match ty {
                Type::Product(a, b) => Ok(vec![
                    (u.clone(), (**a).clone()),
                    (v.clone(), (**b).clone()),
                ]),
                other => Err(format!(
                    "a pair anchor needs a pair type, but the judgment states `{other}`"
                )),
            },
        }
    }
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Anchor::Single(u) => write!(f, "{u}"),
            Anchor::Pair(u, v) => write!(f, "<{u}, {v}>"),
        }
    }
}

/// One triple: `{pre} subject :anchor : type {post}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Judgment {
    pub pre: Assertion,
    pub subject: Term,
    pub anchor: Anchor,
    pub ty: Type,
    pub post: Assertion,
}

impl fmt::Display for Judgment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{{{}}} {} :{} : {} {{{}}}",
            self.pre, self.subject, self.anchor, self.ty, self.post
        )
    }
}

/// The rules a proof script may apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Var,
    Qbit,
    Const,
    Phase,
    Had,
    Meas,
    CnotOne,
    CnotTwo,
    If,
    App,
    Abs,
    AbsPair,
    Cpl,
    Let1,
    Let2,
    LetPair,
    Log,
    Prom,
    ImpEl,
    EtEl,
    OrL,
    EtR,
    ExL,
    ForR,
}

const RULE_NAMES: &[(Rule, &str)] = &[
    (Rule::Var, "JDGVAR"),
    (Rule::Qbit, "JDGQBIT"),
    (Rule::Const, "JDGCONST"),
    (Rule::Phase, "JDGPHASE"),
    (Rule::Had, "JDGHAD"),
    (Rule::Meas, "JDGMEAS"),
    (Rule::CnotOne, "JDGCNOTONE"),
    (Rule::CnotTwo, "JDGCNOTTWO"),
    (Rule::If, "JDGIF"),
    (Rule::App, "JDGAPP"),
    (Rule::Abs, "JDGABS"),
    (Rule::AbsPair, "JDGABSPAIR"),
    (Rule::Cpl, "JDGCPL"),
    (Rule::Let1, "JDGLET1"),
    (Rule::Let2, "JDGLET2"),
    (Rule::LetPair, "JDGLETPAIR"),
    (Rule::Log, "JDGLOG"),
    (Rule::Prom, "JDGPROM"),
    (Rule::ImpEl, "JDGIMPEL"),
    (Rule::EtEl, "JDGETEL"),
    (Rule::OrL, "JDGOUL"),
    (Rule::EtR, "JDGETR"),
    (Rule::ExL, "JDGEXL"),
    (Rule::ForR, "JDGFORR"),
];

impl Rule {
    pub fn name(self) -> &'static str {
        RULE_NAMES
            .iter()
            .find(|(r, _)| *r == self)
            .expect("every rule is named")
            .1
    }

    pub fn from_name(name: &str) -> Option<Rule> {
        RULE_NAMES
            .iter()
            .find(|(_, n)| *n == name)
            .map(|(r, _)| *r)
    }

    /// How many premises the rule takes.
    pub fn arity(self) -> usize {
        match self {
            Rule::Var | Rule::Qbit | Rule::Const => 0,
            Rule::Phase
            | Rule::Had
            | Rule::Meas
            | Rule::CnotOne
            | Rule::CnotTwo
            | Rule::Abs
            | Rule::AbsPair
            | Rule::Let1
            | Rule::Let2
            | Rule::Log
            | Rule::Prom
            | Rule::ImpEl
            | Rule::EtEl
            | Rule::ExL
            | Rule::ForR => 1,
            Rule::App | Rule::Cpl | Rule::LetPair | Rule::OrL | Rule::EtR => 2,
            Rule::If => 3,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One node of a proof script.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofTree {
    pub rule: Rule,
    pub conclusion: Judgment,
    pub premises: Vec<ProofTree>,
    /// Entailment obligations `(premise, conclusion)`, stored only on
    /// consequence nodes.
    pub side: Vec<(Assertion, Assertion)>,
}

/// Errors loading a proof script from JSON.
#[derive(Debug, Error)]
pub enum ProofError {
    #[error("malformed proof script: {0}")]
    Json(String),
    #[error("unknown rule name `{name}` at {location}")]
    UnknownRule { location: String, name: String },
    #[error("cannot parse the {field} at {location}: {source}")]
    BadField {
        location: String,
        field: &'static str,
        source: ParseError,
    },
}

#[derive(Deserialize)]
struct RawTree {
    rule: String,
    conclusion: RawJudgment,
    #[serde(default)]
    premises: Vec<RawTree>,
    #[serde(default)]
    side: Vec<[String; 2]>,
}

#[derive(Deserialize)]
struct RawJudgment {
    pre: String,
    subject: String,
    anchor: RawAnchor,
    #[serde(rename = "type")]
    ty: String,
    post: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawAnchor {
    Single(String),
    Pair([String; 2]),
}

/// Loads a proof script from its JSON form.  Assertions, terms, and types
/// inside the script are written in the surface syntax and parsed here.
pub fn parse_proof_script(src: &str) -> Result<ProofTree, ProofError> {
    let raw: RawTree = serde_json::from_str(src).map_err(|e| ProofError::Json(e.to_string()))?;
    lower_tree(&raw, "root")
}

fn lower_tree(raw: &RawTree, location: &str) -> Result<ProofTree, ProofError> {
    let rule = Rule::from_name(&raw.rule).ok_or_else(|| ProofError::UnknownRule {
        location: location.to_string(),
        name: raw.rule.clone(),
    })?;
    let conclusion = lower_judgment(&raw.conclusion, location)?;
    let mut premises = Vec::with_capacity(raw.premises.len());
    for (i, p) in raw.premises.iter().enumerate() {
        premises.push(lower_tree(p, &format!("{location}.premises[{i}]"))?);
    }
    let mut side = Vec::with_capacity(raw.side.len());
    for [premise, conclusion] in &raw.side {
        side.push((
            parse_field(parse_assertion, premise, location, "side premise")?,
            parse_field(parse_assertion, conclusion, location, "side conclusion")?,
        ));
    }
    Ok(ProofTree {
        rule,
        conclusion,
        premises,
        side,
    })
}

fn lower_judgment(raw: &RawJudgment, location: &str) -> Result<Judgment, ProofError> {
    Ok(Judgment {
        pre: parse_field(parse_assertion, &raw.pre, location, "precondition")?,
        subject: parse_field(parse_term, &raw.subject, location, "subject")?,
        anchor: match &raw.anchor {
            RawAnchor::Single(u) => Anchor::Single(u.clone()),
            RawAnchor::Pair([u, v]) => Anchor::Pair(u.clone(), v.clone()),
        },
        ty: parse_field(parse_type, &raw.ty, location, "type")?,
        post: parse_field(parse_assertion, &raw.post, location, "postcondition")?,
    })
}

fn parse_field<T>(
    parse: impl Fn(&str) -> Result<T, ParseError>,
    src: &str,
    location: &str,
    field: &'static str,
) -> Result<T, ProofError> {
    parse(src).map_err(|source| ProofError::BadField {
        location: location.to_string(),
        field,
        source,
    })
}

/// The checker's verdict on a proof script.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accepted,
    Rejected { path: String, reason: String },
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Accepted => f.write_str("accepted"),
            Verdict::Rejected { path, reason } => write!(f, "rejected at {path}: {reason}"),
        }
    }
}

/// Names visible at a node: `names` is everything assertions may mention,
/// `term_vars` the subset the subject program consumes.
#[derive(Debug, Clone)]
struct Scope {
    names: BTreeMap<String, Type>,
    term_vars: BTreeMap<String, Type>,
}

/// Names a subtree carries forward for enclosing postconditions — the
/// anchors of measured values and of pair bindings keep describing those
/// values after the construct that introduced them.
type Exports = BTreeMap<String, Type>;

type Rejection = (String, String);

fn fail<T>(path: &str, reason: impl Into<String>) -> Result<T, Rejection> {
    Err((path.to_string(), reason.into()))
}

impl Scope {
    fn root() -> Scope {
        Scope {
            names: BTreeMap::new(),
            term_vars: BTreeMap::new(),
        }
    }

    /// Narrows the term variables to those a subterm actually mentions, so
    /// the exact-consumption typing discipline distributes over premises.
    fn narrowed_to(&self, subject: &Term) -> Scope {
        let fv = subject.free_vars();
        Scope {
            names: self.names.clone(),
            term_vars: self
                .term_vars
                .iter()
                .filter(|(name, _)| fv.contains(*name))
                .map(|(name, ty)| (name.clone(), ty.clone()))
                .collect(),
        }
    }

    /// Adds an assertion-only name.
    fn with_name(mut self, path: &str, name: &str, ty: Type) -> Result<Scope, Rejection> {
        if self.names.contains_key(name) {
            return fail(path, format!("name `{name}` is already in scope"));
        }
        self.names.insert(name.to_string(), ty);
        Ok(self)
    }

    /// Adds a term binder, visible to assertions as well.
    fn with_binder(mut self, path: &str, name: &str, ty: Type) -> Result<Scope, Rejection> {
        if self.names.contains_key(name) {
            return fail(path, format!("binder `{name}` shadows a name in scope"));
        }
        self.names.insert(name.to_string(), ty.clone());
        self.term_vars.insert(name.to_string(), ty);
        Ok(self)
    }

    fn with_exports(mut self, path: &str, exports: &Exports) -> Result<Scope, Rejection> {
        for (name, ty) in exports {
            if self.names.contains_key(name) {
                return fail(
                    path,
                    format!("carried-forward name `{name}` collides with a name in scope"),
                );
            }
            self.names.insert(name.clone(), ty.clone());
        }
        Ok(self)
    }
}

/// Checks a closed proof script.  Deterministic and total: every script is
/// either accepted or rejected with the path of the offending node.
pub fn check_judgment(tree: &ProofTree) -> Verdict {
    match check_node(&Scope::root(), tree, "root") {
        Ok(_) => Verdict::Accepted,
        Err((path, reason)) => Verdict::Rejected { path, reason },
    }
}

fn check_node(scope: &Scope, tree: &ProofTree, path: &str) -> Result<Exports, Rejection> {
    let j = &tree.conclusion;

    // Anchor components must be fresh and mutually distinct.
    let anchor_names = j.anchor.names();
    if let Anchor::Pair(u, v) = &j.anchor {
        if u == v {
            return fail(path, format!("pair anchor uses `{u}` for both components"));
        }
    }
    for name in &anchor_names {
        if scope.names.contains_key(*name) {
            return fail(
                path,
                format!("anchor `{name}` collides with a name already in scope"),
            );
        }
    }
    let anchor_bindings = j.anchor.bindings(&j.ty).map_err(|e| (path.to_string(), e))?;

    // The precondition speaks only about names already in scope.
    let pre_ctx = AssertionContext {
        names: scope.names.clone(),
    };
    if let Err(e) = crate::logic::typecheck_assertion(&pre_ctx, &j.pre) {
        return fail(path, format!("ill-typed precondition: {e}"));
    }

    // The subject must be a program of the stated type consuming exactly
    // the term variables in scope.
    let mut typing = TypingContext::new();
    for (name, ty) in &scope.term_vars {
        typing.bind(name.clone(), ty.clone());
    }
    match typecheck_in(&typing, &j.subject) {
        Ok(inferred) if inferred == j.ty => {}
        Ok(inferred) => {
            return fail(
                path,
                format!("the subject has type `{inferred}`, but the judgment states `{}`", j.ty),
            )
        }
        Err(e) => return fail(path, format!("ill-typed subject: {e}")),
    }

    if tree.premises.len() != tree.rule.arity() {
        return fail(
            path,
            format!(
                "rule {} expects {} premise(s), found {}",
                tree.rule,
                tree.rule.arity(),
                tree.premises.len()
            ),
        );
    }
    if tree.rule != Rule::Log && !tree.side.is_empty() {
        return fail(
            path,
            format!("rule {} carries side obligations, but only JDGLOG may", tree.rule),
        );
    }

    let exports = check_schema(scope, tree, path)?;

    // The postcondition may additionally mention the anchor and any names
    // the subject carries forward.
    let mut post_names = scope.names.clone();
    let added = exports
        .iter()
        .map(|(n, t)| (n.clone(), t.clone()))
        .chain(anchor_bindings.iter().cloned());
    for (name, ty) in added {
        if post_names.insert(name.clone(), ty).is_some() {
            return fail(
                path,
                format!("postcondition name `{name}` is bound twice at this node"),
            );
        }
    }
    let post_ctx = AssertionContext { names: post_names };
    if let Err(e) = crate::logic::typecheck_assertion(&post_ctx, &j.post) {
        return fail(path, format!("ill-typed postcondition: {e}"));
    }

    Ok(exports)
}

/// Applies the rule-specific schema, checking premises recursively, and
/// returns the names the node carries forward.
fn check_schema(scope: &Scope, tree: &ProofTree, path: &str) -> Result<Exports, Rejection> {
    let j = &tree.conclusion;
    match tree.rule {
        Rule::Var => {
            let Term::Var(x) = &j.subject else {
                return fail(path, "rule JDGVAR needs a variable subject");
            };
            let u = single_anchor(path, j, "JDGVAR")?;
            let expected = j.post.subst_name(u, &LogicTerm::anchor(x.clone()));
            if j.pre != expected {
                return fail(
                    path,
                    format!(
                        "JDGVAR needs the precondition to be the postcondition with `{x}` for `{u}`: expected `{expected}`, found `{}`",
                        j.pre
                    ),
                );
            }
            Ok(Exports::new())
        }

        Rule::Qbit => {
            let Term::QubitRef(i) = &j.subject else {
                return fail(path, "rule JDGQBIT needs a qubit-constant subject");
            };
            let u = single_anchor(path, j, "JDGQBIT")?;
            let expected = j.post.subst_name(u, &LogicTerm::Qubit(*i));
            if j.pre != expected {
                return fail(
                    path,
                    format!(
                        "JDGQBIT needs the precondition to be the postcondition with `q{i}` for `{u}`: expected `{expected}`, found `{}`",
                        j.pre
                    ),
                );
            }
            Ok(Exports::new())
        }

        Rule::Const => {
            if !matches!(j.subject, Term::BoolLit(_) | Term::Const(_)) {
                return fail(path, "rule JDGCONST needs a boolean or primitive subject");
            }
            if j.pre != j.post {
                return fail(
                    path,
                    "JDGCONST passes the precondition through unchanged, but pre and post differ",
                );
            }
            Ok(Exports::new())
        }

        Rule::Phase => {
            let operand = prim_operand(path, &j.subject, Prim::Phase)?;
            let p = &tree.premises[0];
            expect_subject(path, 0, &p.conclusion, operand)?;
            expect_anchor(path, 0, &p.conclusion, &j.anchor)?;
            expect_pre(path, 0, &p.conclusion, &j.pre)?;
            if p.conclusion.post != j.post {
                return fail(
                    path,
                    "JDGPHASE passes the postcondition through unchanged, but they differ",
                );
            }
            check_node(&scope.narrowed_to(operand), p, &child(path, 0))
        }

        Rule::Had => {
            let operand = prim_operand(path, &j.subject, Prim::Hadamard)?;
            let u = single_anchor(path, j, "JDGHAD")?;
            let p = &tree.premises[0];
            expect_subject(path, 0, &p.conclusion, operand)?;
            expect_anchor(path, 0, &p.conclusion, &j.anchor)?;
            expect_pre(path, 0, &p.conclusion, &j.pre)?;
            let expected = hadamard_post(&p.conclusion.post, u);
            if j.post != expected {
                return fail(
                    path,
                    format!(
                        "JDGHAD rewrites the postcondition to `{expected}`, found `{}`",
                        j.post
                    ),
                );
            }
            check_node(&scope.narrowed_to(operand), p, &child(path, 0))
        }

        Rule::Meas => {
            let operand = prim_operand(path, &j.subject, Prim::Meas)?;
            let v = single_anchor(path, j, "JDGMEAS")?;
            let p = &tree.premises[0];
            expect_subject(path, 0, &p.conclusion, operand)?;
            expect_pre(path, 0, &p.conclusion, &j.pre)?;
            let Anchor::Single(u) = &p.conclusion.anchor else {
                return fail(path, "the JDGMEAS premise must anchor the measured qubit");
            };
            if u == v {
                return fail(
                    path,
                    format!("measured-value anchor `{u}` collides with the outcome anchor"),
                );
            }
            let expected = measurement_post(&p.conclusion.post, u);
            if j.post != expected {
                return fail(
                    path,
                    format!(
                        "JDGMEAS deletes every conjunct mentioning `{u}` and adds its purity: expected `{expected}`, found `{}`",
                        j.post
                    ),
                );
            }
            let mut exports = check_node(&scope.narrowed_to(operand), p, &child(path, 0))?;
            exports.insert(u.clone(), Type::Qbit);
            Ok(exports)
        }

        Rule::CnotOne | Rule::CnotTwo => {
            let operand = prim_operand(path, &j.subject, Prim::Cnot)?;
            let Anchor::Pair(u, v) = &j.anchor else {
                return fail(path, "cnot rules need a pair anchor for the two qubits");
            };
            let p = &tree.premises[0];
            expect_subject(path, 0, &p.conclusion, operand)?;
            expect_anchor(path, 0, &p.conclusion, &j.anchor)?;
            expect_pre(path, 0, &p.conclusion, &j.pre)?;
            if tree.rule == Rule::CnotOne {
                let pure_u = Assertion::Pure(LogicTerm::anchor(u.clone()));
                if !p.conclusion.post.conjuncts().contains(&&pure_u) {
                    return fail(
                        path,
                        format!(
                            "JDGCNOTONE needs `pure {u}` among the conjuncts describing the control, found `{}`",
                            p.conclusion.post
                        ),
                    );
                }
                if j.post != p.conclusion.post {
                    return fail(
                        path,
                        "JDGCNOTONE passes the postcondition through unchanged (a pure control is untouched), but they differ",
                    );
                }
            } else {
                let expected = Assertion::and(
                    p.conclusion.post.clone(),
                    Assertion::Entangled(
                        LogicTerm::anchor(u.clone()),
                        LogicTerm::anchor(v.clone()),
                    ),
                );
                if j.post != expected {
                    return fail(
                        path,
                        format!(
                            "JDGCNOTTWO records the possible entanglement: expected `{expected}`, found `{}`",
                            j.post
                        ),
                    );
                }
            }
            check_node(&scope.narrowed_to(operand), p, &child(path, 0))
        }

        Rule::If => {
            let Term::If {
                guard,
                then_branch,
                else_branch,
            } = &j.subject
            else {
                return fail(path, "rule JDGIF needs a conditional subject");
            };
            let p1 = &tree.premises[0];
            let p2 = &tree.premises[1];
            let p3 = &tree.premises[2];
            expect_subject(path, 0, &p1.conclusion, guard)?;
            expect_pre(path, 0, &p1.conclusion, &j.pre)?;
            let Anchor::Single(b) = &p1.conclusion.anchor else {
                return fail(path, "the guard premise must anchor a single boolean");
            };
            let guard_exports = check_node(&scope.narrowed_to(guard), p1, &child(path, 0))?;
            let branch_scope = scope.clone().with_exports(path, &guard_exports)?;
            let mut exports = guard_exports;
            let branches: [(usize, &ProofTree, &Term, bool); 2] = [
                (1, p2, then_branch, true),
                (2, p3, else_branch, false),
            ];
            for (index, p, subject, outcome) in branches {
                expect_subject(path, index, &p.conclusion, subject)?;
                expect_anchor(path, index, &p.conclusion, &j.anchor)?;
                let expected_pre = p1
                    .conclusion
                    .post
                    .subst_name(b, &LogicTerm::Bool(outcome));
                if p.conclusion.pre != expected_pre {
                    return fail(
                        path,
                        format!(
                            "branch premise {index} must assume the guard outcome: expected `{expected_pre}`, found `{}`",
                            p.conclusion.pre
                        ),
                    );
                }
                if p.conclusion.post != j.post {
                    return fail(
                        path,
                        format!("branch premise {index} must establish the conclusion postcondition"),
                    );
                }
                let branch_exports =
                    check_node(&branch_scope.narrowed_to(subject), p, &child(path, index))?;
                merge_exports(path, &mut exports, branch_exports)?;
            }
            Ok(exports)
        }

        Rule::App => {
            let Term::App(fun, arg) = &j.subject else {
                return fail(path, "rule JDGAPP needs an application subject");
            };
            let u = single_anchor(path, j, "JDGAPP")?;
            let p1 = &tree.premises[0];
            let p2 = &tree.premises[1];
            expect_subject(path, 0, &p1.conclusion, fun)?;
            expect_pre(path, 0, &p1.conclusion, &j.pre)?;
            let Anchor::Single(m) = &p1.conclusion.anchor else {
                return fail(path, "the function premise must have a single anchor");
            };
            expect_subject(path, 1, &p2.conclusion, arg)?;
            expect_pre(path, 1, &p2.conclusion, &p1.conclusion.post)?;
            let Assertion::And(c1, atom) = &p2.conclusion.post else {
                return fail(
                    path,
                    "the argument premise must end in `C /\\ {C} f . a = x {C'}`",
                );
            };
            let Assertion::Eval {
                pre: epre,
                fun: efun,
                arg: earg,
                result,
                post: epost,
            } = atom.as_ref()
            else {
                return fail(
                    path,
                    "the right conjunct of the argument postcondition must be a triple atom",
                );
            };
            if **epre != **c1 {
                return fail(
                    path,
                    format!(
                        "the triple's internal precondition must restate the left conjunct `{c1}`, found `{epre}`"
                    ),
                );
            }
            if *efun != LogicTerm::anchor(m.clone()) {
                return fail(
                    path,
                    format!("the triple must apply the function anchor `{m}`, found `{efun}`"),
                );
            }
            let anchored = p2.conclusion.anchor.logic_term();
            let reflected = reflect_value(&p2.conclusion.subject);
            if *earg != anchored && reflected.as_ref() != Some(earg) {
                return fail(
                    path,
                    format!(
                        "the triple's argument must be the anchored value `{anchored}`, found `{earg}`"
                    ),
                );
            }
            if result != u {
                return fail(
                    path,
                    format!(
                        "the triple must bind the conclusion anchor `{u}`, found `{result}`"
                    ),
                );
            }
            if **epost != j.post {
                return fail(
                    path,
                    format!(
                        "the triple's postcondition must be the conclusion postcondition `{}`, found `{epost}`",
                        j.post
                    ),
                );
            }
            let mut exports = check_node(&scope.narrowed_to(fun), p1, &child(path, 0))?;
            let arg_scope = scope
                .clone()
                .with_exports(path, &exports)?
                .with_name(path, m, p1.conclusion.ty.clone())?
                .narrowed_to(arg);
            let arg_exports = check_node(&arg_scope, p2, &child(path, 1))?;
            merge_exports(path, &mut exports, arg_exports)?;
            exports.insert(m.clone(), p1.conclusion.ty.clone());
            for (name, ty) in p2
                .conclusion
                .anchor
                .bindings(&p2.conclusion.ty)
                .map_err(|e| (path.to_string(), e))?
            {
                exports.insert(name, ty);
            }
            Ok(exports)
        }

        Rule::Abs => {
            let Term::Lambda {
                param,
                param_ty,
                body,
            } = &j.subject
            else {
                return fail(path, "rule JDGABS needs an abstraction subject");
            };
            let u = single_anchor(path, j, "JDGABS")?;
            let Assertion::Forall(bound, inner) = &j.post else {
                return fail(
                    path,
                    "JDGABS concludes a universally quantified triple atom",
                );
            };
            if bound != param {
                return fail(
                    path,
                    format!(
                        "the quantifier must bind the abstraction's own parameter `{param}`, found `{bound}`"
                    ),
                );
            }
            let Assertion::Eval {
                pre: c0,
                fun,
                arg,
                result,
                post: cp,
            } = inner.as_ref()
            else {
                return fail(path, "JDGABS concludes a quantified triple atom");
            };
            if *fun != LogicTerm::anchor(u.clone()) {
                return fail(
                    path,
                    format!("the triple must apply the anchor `{u}`, found `{fun}`"),
                );
            }
            if *arg != LogicTerm::anchor(param.clone()) {
                return fail(
                    path,
                    format!(
                        "the triple's argument must be the parameter `{param}`, found `{arg}`"
                    ),
                );
            }
            if j.pre.free_names().contains(param) {
                return fail(
                    path,
                    format!("the parameter `{param}` must not occur in the precondition"),
                );
            }
            let p = &tree.premises[0];
            expect_subject(path, 0, &p.conclusion, body)?;
            let expected_pre = Assertion::and(j.pre.clone(), (**c0).clone());
            if p.conclusion.pre != expected_pre {
                return fail(
                    path,
                    format!(
                        "the body premise assumes the triple's precondition: expected `{expected_pre}`, found `{}`",
                        p.conclusion.pre
                    ),
                );
            }
            check_body_post(path, &p.conclusion, result, cp)?;
            let body_scope = scope
                .clone()
                .with_binder(path, param, param_ty.clone())?
                .narrowed_to(body);
            check_node(&body_scope, p, &child(path, 0))?;
            // Nothing escapes an abstraction: the body's measurements
            // happen per application, not when the value is formed.
            Ok(Exports::new())
        }

        Rule::AbsPair => {
            let Term::Lambda {
                param,
                param_ty,
                body,
            } = &j.subject
            else {
                return fail(path, "rule JDGABSPAIR needs an abstraction subject");
            };
            let Type::Product(sigma, tau) = param_ty else {
                return fail(
                    path,
                    "rule JDGABSPAIR needs a pair-typed abstraction parameter",
                );
            };
            let u = single_anchor(path, j, "JDGABSPAIR")?;
            let Assertion::Eval {
                pre: c0,
                fun,
                arg,
                result,
                post: cp,
            } = &j.post
            else {
                return fail(path, "JDGABSPAIR concludes a bare triple atom");
            };
            if *fun != LogicTerm::anchor(u.clone()) {
                return fail(
                    path,
                    format!("the triple must apply the anchor `{u}`, found `{fun}`"),
                );
            }
            let LogicTerm::Pair(a1, a2) = arg else {
                return fail(
                    path,
                    "the triple's argument must name the two components of the pair",
                );
            };
            let (LogicTerm::Anchor(y), LogicTerm::Anchor(z)) = (a1.as_ref(), a2.as_ref()) else {
                return fail(
                    path,
                    "the triple's argument components must be plain names",
                );
            };
            if y == z {
                return fail(path, format!("component names must differ, both are `{y}`"));
            }
            for (name, ty) in [(y, sigma.as_ref()), (z, tau.as_ref())] {
                match scope.names.get(name) {
                    Some(t) if t == ty => {}
                    Some(t) => {
                        return fail(
                            path,
                            format!(
                                "component `{name}` has type `{t}` in scope, but the parameter needs `{ty}`"
                            ),
                        )
                    }
                    None => {
                        return fail(
                            path,
                            format!("component `{name}` must already be quantified in scope"),
                        )
                    }
                }
                if scope.term_vars.contains_key(name) {
                    return fail(
                        path,
                        format!("component `{name}` is already a program variable"),
                    );
                }
                if j.pre.free_names().contains(name) {
                    return fail(
                        path,
                        format!("component `{name}` must not occur in the precondition"),
                    );
                }
            }
            let p = &tree.premises[0];
            let expected_body = body.subst(
                param,
                &Term::pair(Term::var(y.clone()), Term::var(z.clone())),
            );
            if p.conclusion.subject != expected_body {
                return fail(
                    path,
                    format!(
                        "the body premise must prove the body with `<{y}, {z}>` for `{param}`: expected `{expected_body}`, found `{}`",
                        p.conclusion.subject
                    ),
                );
            }
            let expected_pre = Assertion::and(j.pre.clone(), (**c0).clone());
            if p.conclusion.pre != expected_pre {
                return fail(
                    path,
                    format!(
                        "the body premise assumes the triple's precondition: expected `{expected_pre}`, found `{}`",
                        p.conclusion.pre
                    ),
                );
            }
            check_body_post(path, &p.conclusion, result, cp)?;
            let mut body_scope = scope.narrowed_to(&p.conclusion.subject);
            for (name, ty) in [(y, (**sigma).clone()), (z, (**tau).clone())] {
                // The components are already assertion names (bound by the
                // enclosing quantifiers); here they additionally become the
                // program variables the substituted body consumes.
                body_scope.term_vars.insert(name.clone(), ty);
            }
            check_node(&body_scope, p, &child(path, 0))?;
            // Nothing escapes an abstraction: the body's measurements
            // happen per application, not when the value is formed.
            Ok(Exports::new())
        }

        Rule::Cpl => {
            let Term::Pair(left, right) = &j.subject else {
                return fail(path, "rule JDGCPL needs a pair subject");
            };
            let Anchor::Pair(u, v) = &j.anchor else {
                return fail(path, "rule JDGCPL needs a pair anchor");
            };
            let p1 = &tree.premises[0];
            let p2 = &tree.premises[1];
            expect_subject(path, 0, &p1.conclusion, left)?;
            expect_pre(path, 0, &p1.conclusion, &j.pre)?;
            let Anchor::Single(m) = &p1.conclusion.anchor else {
                return fail(path, "the left premise must have a single anchor");
            };
            expect_subject(path, 1, &p2.conclusion, right)?;
            expect_pre(path, 1, &p2.conclusion, &p1.conclusion.post)?;
            let Anchor::Single(n) = &p2.conclusion.anchor else {
                return fail(path, "the right premise must have a single anchor");
            };
            let expected = p2
                .conclusion
                .post
                .subst_name(m, &LogicTerm::anchor(u.clone()))
                .subst_name(n, &LogicTerm::anchor(v.clone()));
            if j.post != expected {
                return fail(
                    path,
                    format!(
                        "JDGCPL renames the component anchors into the pair anchor: expected `{expected}`, found `{}`",
                        j.post
                    ),
                );
            }
            let mut exports = check_node(&scope.narrowed_to(left), p1, &child(path, 0))?;
            let right_scope = scope
                .clone()
                .with_exports(path, &exports)?
                .with_name(path, m, p1.conclusion.ty.clone())?
                .narrowed_to(right);
            let right_exports = check_node(&right_scope, p2, &child(path, 1))?;
            merge_exports(path, &mut exports, right_exports)?;
            Ok(exports)
        }

        Rule::Let1 | Rule::Let2 => {
            let side = if tree.rule == Rule::Let1 {
                ProjSide::Fst
            } else {
                ProjSide::Snd
            };
            let Term::Proj(found_side, inner) = &j.subject else {
                return fail(path, "projection rules need a projection subject");
            };
            if *found_side != side {
                return fail(
                    path,
                    format!(
                        "rule {} projects the {} component, but the subject projects the other",
                        tree.rule,
                        side.keyword()
                    ),
                );
            }
            let u = single_anchor(path, j, "the projection rules")?;
            let p = &tree.premises[0];
            expect_subject(path, 0, &p.conclusion, inner)?;
            expect_pre(path, 0, &p.conclusion, &j.pre)?;
            let Anchor::Single(m) = &p.conclusion.anchor else {
                return fail(path, "the pair premise must have a single anchor");
            };
            let expected = j.post.subst_name(
                u,
                &LogicTerm::proj(side, LogicTerm::anchor(m.clone())),
            );
            if p.conclusion.post != expected {
                return fail(
                    path,
                    format!(
                        "the premise postcondition must be the conclusion's with the projection for `{u}`: expected `{expected}`, found `{}`",
                        p.conclusion.post
                    ),
                );
            }
            check_node(&scope.narrowed_to(inner), p, &child(path, 0))
        }

        Rule::LetPair => {
            let Term::LetPair {
                left,
                right,
                bound,
                body,
            } = &j.subject
            else {
                return fail(path, "rule JDGLETPAIR needs a pair-binding subject");
            };
            let p1 = &tree.premises[0];
            let p2 = &tree.premises[1];
            expect_subject(path, 0, &p1.conclusion, bound)?;
            expect_pre(path, 0, &p1.conclusion, &j.pre)?;
            let Type::Product(sigma, tau) = &p1.conclusion.ty else {
                return fail(path, "the bound premise must have a pair type");
            };
            // Two accepted premise shapes: the bound pair may be anchored
            // directly at the binder names, or at one name the binding then
            // projects from.
            let expected_p2_pre = match &p1.conclusion.anchor {
                Anchor::Pair(a, b) if a == left && b == right => p1.conclusion.post.clone(),
                Anchor::Pair(a, b) => {
                    return fail(
                        path,
                        format!(
                            "a pair-anchored bound premise must use the binder names `{left}`, `{right}`, found `{a}`, `{b}`"
                        ),
                    )
                }
                Anchor::Single(p) => p1
                    .conclusion
                    .post
                    .subst_name(
                        left,
                        &LogicTerm::proj(ProjSide::Fst, LogicTerm::anchor(p.clone())),
                    )
                    .subst_name(
                        right,
                        &LogicTerm::proj(ProjSide::Snd, LogicTerm::anchor(p.clone())),
                    ),
            };
            expect_subject(path, 1, &p2.conclusion, body)?;
            if p2.conclusion.pre != expected_p2_pre {
                return fail(
                    path,
                    format!(
                        "the body premise must assume the bound premise's postcondition: expected `{expected_p2_pre}`, found `{}`",
                        p2.conclusion.pre
                    ),
                );
            }
            expect_anchor(path, 1, &p2.conclusion, &j.anchor)?;
            if p2.conclusion.post != j.post {
                return fail(
                    path,
                    "the body premise must establish the conclusion postcondition",
                );
            }
            let mut exports = check_node(&scope.narrowed_to(bound), p1, &child(path, 0))?;
            let mut body_scope = scope.clone().with_exports(path, &exports)?;
            if let Anchor::Single(p) = &p1.conclusion.anchor {
                body_scope = body_scope.with_name(path, p, p1.conclusion.ty.clone())?;
                exports.insert(p.clone(), p1.conclusion.ty.clone());
            }
            body_scope = body_scope
                .with_binder(path, left, (**sigma).clone())?
                .with_binder(path, right, (**tau).clone())?
                .narrowed_to(body);
            let body_exports = check_node(&body_scope, p2, &child(path, 1))?;
            merge_exports(path, &mut exports, body_exports)?;
            exports.insert(left.clone(), (**sigma).clone());
            exports.insert(right.clone(), (**tau).clone());
            Ok(exports)
        }

        Rule::Log => {
            let p = &tree.premises[0];
            expect_subject(path, 0, &p.conclusion, &j.subject)?;
            expect_anchor(path, 0, &p.conclusion, &j.anchor)?;
            if p.conclusion.ty != j.ty {
                return fail(path, "JDGLOG must not change the subject's type");
            }
            if tree.side.len() != 2 {
                return fail(
                    path,
                    format!(
                        "JDGLOG carries exactly two side obligations, found {}",
                        tree.side.len()
                    ),
                );
            }
            let expected_first = (j.pre.clone(), p.conclusion.pre.clone());
            let expected_second = (p.conclusion.post.clone(), j.post.clone());
            if tree.side[0] != expected_first {
                return fail(
                    path,
                    format!(
                        "the first side obligation must be `{} |- {}`",
                        expected_first.0, expected_first.1
                    ),
                );
            }
            if tree.side[1] != expected_second {
                return fail(
                    path,
                    format!(
                        "the second side obligation must be `{} |- {}`",
                        expected_second.0, expected_second.1
                    ),
                );
            }
            let exports = check_node(&scope.narrowed_to(&j.subject), p, &child(path, 0))?;
            // Discharge the obligations: strengthening of the precondition
            // in the ambient scope, weakening of the postcondition with the
            // anchor and carried-forward names visible.
            let pre_ctx = AssertionContext {
                names: scope.names.clone(),
            };
            discharge(path, "first", &pre_ctx, &tree.side[0].0, &tree.side[0].1)?;
            let mut post_names = scope.names.clone();
            post_names.extend(exports.clone());
            for (name, ty) in j
                .anchor
                .bindings(&j.ty)
                .map_err(|e| (path.to_string(), e))?
            {
                post_names.insert(name, ty);
            }
            let post_ctx = AssertionContext { names: post_names };
            discharge(path, "second", &post_ctx, &tree.side[1].0, &tree.side[1].1)?;
            Ok(exports)
        }

        Rule::Prom => {
            if !is_value(&j.subject) {
                return fail(path, "JDGPROM applies only to value subjects");
            }
            let p = &tree.premises[0];
            expect_subject(path, 0, &p.conclusion, &j.subject)?;
            expect_anchor(path, 0, &p.conclusion, &j.anchor)?;
            let Assertion::And(base, extra) = &j.pre else {
                return fail(
                    path,
                    "JDGPROM needs a conjunction precondition `C /\\ C0`",
                );
            };
            if **base != p.conclusion.pre {
                return fail(
                    path,
                    format!(
                        "the left conjunct of the precondition must be the premise's `{}`, found `{base}`",
                        p.conclusion.pre
                    ),
                );
            }
            let expected_post = Assertion::and(p.conclusion.post.clone(), (**extra).clone());
            if j.post != expected_post {
                return fail(
                    path,
                    format!(
                        "JDGPROM carries the extra conjunct through: expected `{expected_post}`, found `{}`",
                        j.post
                    ),
                );
            }
            check_node(&scope.narrowed_to(&j.subject), p, &child(path, 0))
        }

        Rule::ImpEl => {
            let p = &tree.premises[0];
            expect_subject(path, 0, &p.conclusion, &j.subject)?;
            expect_anchor(path, 0, &p.conclusion, &j.anchor)?;
            let Assertion::And(base, extra) = &p.conclusion.pre else {
                return fail(
                    path,
                    "the JDGIMPEL premise needs a conjunction precondition `C /\\ C0`",
                );
            };
            if **base != j.pre {
                return fail(
                    path,
                    format!(
                        "the left conjunct of the premise precondition must be the conclusion's `{}`, found `{base}`",
                        j.pre
                    ),
                );
            }
            let expected_post =
                Assertion::implies((**extra).clone(), p.conclusion.post.clone());
            if j.post != expected_post {
                return fail(
                    path,
                    format!(
                        "JDGIMPEL discharges the extra assumption into an implication: expected `{expected_post}`, found `{}`",
                        j.post
                    ),
                );
            }
            check_node(&scope.narrowed_to(&j.subject), p, &child(path, 0))
        }

        Rule::EtEl => {
            let p = &tree.premises[0];
            expect_subject(path, 0, &p.conclusion, &j.subject)?;
            expect_anchor(path, 0, &p.conclusion, &j.anchor)?;
            let Assertion::Implies(hyp, body) = &p.conclusion.post else {
                return fail(
                    path,
                    "the JDGETEL premise needs an implication postcondition",
                );
            };
            let expected_pre = Assertion::and(p.conclusion.pre.clone(), (**hyp).clone());
            if j.pre != expected_pre {
                return fail(
                    path,
                    format!(
                        "JDGETEL moves the hypothesis into the precondition: expected `{expected_pre}`, found `{}`",
                        j.pre
                    ),
                );
            }
            if j.post != **body {
                return fail(
                    path,
                    format!(
                        "the conclusion postcondition must be the implication body `{body}`, found `{}`",
                        j.post
                    ),
                );
            }
            check_node(&scope.narrowed_to(&j.subject), p, &child(path, 0))
        }

        Rule::OrL => {
            let p1 = &tree.premises[0];
            let p2 = &tree.premises[1];
            for (i, p) in [(0usize, p1), (1usize, p2)] {
                expect_subject(path, i, &p.conclusion, &j.subject)?;
                expect_anchor(path, i, &p.conclusion, &j.anchor)?;
                if p.conclusion.post != j.post {
                    return fail(
                        path,
                        format!("premise {i} must establish the conclusion postcondition"),
                    );
                }
            }
            let expected_pre =
                Assertion::or(p1.conclusion.pre.clone(), p2.conclusion.pre.clone());
            if j.pre != expected_pre {
                return fail(
                    path,
                    format!(
                        "JDGOUL concludes from the disjunction of the premises' preconditions: expected `{expected_pre}`, found `{}`",
                        j.pre
                    ),
                );
            }
            let mut exports = check_node(&scope.narrowed_to(&j.subject), p1, &child(path, 0))?;
            let second = check_node(&scope.narrowed_to(&j.subject), p2, &child(path, 1))?;
            merge_exports(path, &mut exports, second)?;
            Ok(exports)
        }

        Rule::EtR => {
            let p1 = &tree.premises[0];
            let p2 = &tree.premises[1];
            for (i, p) in [(0usize, p1), (1usize, p2)] {
                expect_subject(path, i, &p.conclusion, &j.subject)?;
                expect_anchor(path, i, &p.conclusion, &j.anchor)?;
                expect_pre(path, i, &p.conclusion, &j.pre)?;
            }
            let expected_post =
                Assertion::and(p1.conclusion.post.clone(), p2.conclusion.post.clone());
            if j.post != expected_post {
                return fail(
                    path,
                    format!(
                        "JDGETR concludes the conjunction of the premises' postconditions: expected `{expected_post}`, found `{}`",
                        j.post
                    ),
                );
            }
            let mut exports = check_node(&scope.narrowed_to(&j.subject), p1, &child(path, 0))?;
            let second = check_node(&scope.narrowed_to(&j.subject), p2, &child(path, 1))?;
            merge_exports(path, &mut exports, second)?;
            Ok(exports)
        }

        Rule::ExL => {
            let p = &tree.premises[0];
            expect_subject(path, 0, &p.conclusion, &j.subject)?;
            expect_anchor(path, 0, &p.conclusion, &j.anchor)?;
            let Assertion::Exists(x, inner) = &j.pre else {
                return fail(
                    path,
                    "JDGEXL concludes from an existentially quantified precondition",
                );
            };
            if p.conclusion.pre != **inner {
                return fail(
                    path,
                    format!(
                        "the premise precondition must be the quantifier body `{inner}`, found `{}`",
                        p.conclusion.pre
                    ),
                );
            }
            if p.conclusion.post != j.post {
                return fail(
                    path,
                    "the premise must establish the conclusion postcondition",
                );
            }
            if j.post.free_names().contains(x) {
                return fail(
                    path,
                    format!("the witness name `{x}` must not occur in the postcondition"),
                );
            }
            let premise_scope = scope
                .clone()
                .with_name(path, x, Type::Qbit)?
                .narrowed_to(&j.subject);
            check_node(&premise_scope, p, &child(path, 0))
        }

        Rule::ForR => {
            let p = &tree.premises[0];
            expect_subject(path, 0, &p.conclusion, &j.subject)?;
            expect_anchor(path, 0, &p.conclusion, &j.anchor)?;
            expect_pre(path, 0, &p.conclusion, &j.pre)?;
            let Assertion::Forall(x, inner) = &j.post else {
                return fail(
                    path,
                    "JDGFORR concludes a universally quantified postcondition",
                );
            };
            if p.conclusion.post != **inner {
                return fail(
                    path,
                    format!(
                        "the premise postcondition must be the quantifier body `{inner}`, found `{}`",
                        p.conclusion.post
                    ),
                );
            }
            if j.pre.free_names().contains(x) {
                return fail(
                    path,
                    format!("the generalized name `{x}` must not occur in the precondition"),
                );
            }
            let premise_scope = scope
                .clone()
                .with_name(path, x, Type::Qbit)?
                .narrowed_to(&j.subject);
            check_node(&premise_scope, p, &child(path, 0))
        }
    }
}

fn child(path: &str, index: usize) -> String {
    format!("{path}.premises[{index}]")
}

fn single_anchor<'a>(path: &str, j: &'a Judgment, rule: &str) -> Result<&'a String, Rejection> {
    match &j.anchor {
        Anchor::Single(u) => Ok(u),
        Anchor::Pair(..) => fail(path, format!("{rule} needs a single anchor")),
    }
}

fn prim_operand<'a>(path: &str, subject: &'a Term, prim: Prim) -> Result<&'a Term, Rejection> {
    let Term::App(fun, operand) = subject else {
        return fail(
            path,
            format!("this rule needs a `{}` application subject", prim.keyword()),
        );
    };
    if **fun != Term::Const(prim) {
        return fail(
            path,
            format!("this rule needs the `{}` primitive, found `{fun}`", prim.keyword()),
        );
    }
    Ok(operand)
}

fn expect_subject(
    path: &str,
    index: usize,
    premise: &Judgment,
    expected: &Term,
) -> Result<(), Rejection> {
    if premise.subject != *expected {
        return fail(
            path,
            format!(
                "premise {index} must be about `{expected}`, found `{}`",
                premise.subject
            ),
        );
    }
    Ok(())
}

fn expect_anchor(
    path: &str,
    index: usize,
    premise: &Judgment,
    expected: &Anchor,
) -> Result<(), Rejection> {
    if premise.anchor != *expected {
        return fail(
            path,
            format!(
                "premise {index} must use anchor `{expected}`, found `{}`",
                premise.anchor
            ),
        );
    }
    Ok(())
}

fn expect_pre(
    path: &str,
    index: usize,
    premise: &Judgment,
    expected: &Assertion,
) -> Result<(), Rejection> {
    if premise.pre != *expected {
        return fail(
            path,
            format!(
                "premise {index} must assume `{expected}`, found `{}`",
                premise.pre
            ),
        );
    }
    Ok(())
}

fn merge_exports(path: &str, into: &mut Exports, from: Exports) -> Result<(), Rejection> {
    for (name, ty) in from {
        match into.get(&name) {
            Some(existing) if *existing == ty => {}
            Some(existing) => {
                return fail(
                    path,
                    format!(
                        "carried-forward name `{name}` has conflicting types `{existing}` and `{ty}`"
                    ),
                )
            }
            None => {
                into.insert(name, ty);
            }
        }
    }
    Ok(())
}

/// The Hadamard postcondition transformation: the anchored qubit stops
/// being describable as pure.  A trailing purity conjunct flips in place;
/// otherwise the negation is appended.
fn hadamard_post(post: &Assertion, u: &str) -> Assertion {
    let pure_u = Assertion::Pure(LogicTerm::anchor(u.to_string()));
    match post {
        Assertion::And(rest, last) if **last == pure_u => {
            Assertion::and((**rest).clone(), Assertion::not(pure_u))
        }
        p if *p == pure_u => Assertion::not(pure_u),
        p => Assertion::and(p.clone(), Assertion::not(pure_u)),
    }
}

/// The measurement postcondition transformation: every conjunct mentioning
/// the measured value is deleted, and its purity is recorded.
fn measurement_post(post: &Assertion, u: &str) -> Assertion {
    let kept: Vec<Assertion> = post
        .conjuncts()
        .into_iter()
        .filter(|c| !c.free_names().contains(u))
        .cloned()
        .collect();
    let pure_u = Assertion::Pure(LogicTerm::anchor(u.to_string()));
    match kept.split_first() {
        None => pure_u,
        Some((first, rest)) => {
            let folded = rest
                .iter()
                .fold(first.clone(), |acc, c| Assertion::and(acc, c.clone()));
            Assertion::and(folded, pure_u)
        }
    }
}

/// An abstraction's body premise either anchors the triple's result name
/// directly, or — when the body is pair-valued and therefore can only be
/// concluded with a pair anchor — anchors its two components, in which case
/// the triple's postcondition must mention them as projections of the result.
fn check_body_post(
    path: &str,
    premise: &Judgment,
    result: &str,
    atom_post: &Assertion,
) -> Result<(), Rejection> {
    match &premise.anchor {
        Anchor::Single(r) if r == result => {
            if premise.post != *atom_post {
                return fail(
                    path,
                    "the body premise must establish the triple's postcondition",
                );
            }
            Ok(())
        }
        Anchor::Single(r) => fail(
            path,
            format!("the body premise must anchor the triple's result `{result}`, found `{r}`"),
        ),
        Anchor::Pair(r1, r2) => {
            let expected = premise
                .post
                .subst_name(
                    r1,
                    &LogicTerm::proj(ProjSide::Fst, LogicTerm::anchor(result.to_string())),
                )
                .subst_name(
                    r2,
                    &LogicTerm::proj(ProjSide::Snd, LogicTerm::anchor(result.to_string())),
                );
            if *atom_post != expected {
                return fail(
                    path,
                    format!(
                        "with a pair-anchored body the triple's postcondition views the \
                         components as projections of `{result}`: expected `{expected}`, \
                         found `{atom_post}`"
                    ),
                );
            }
            Ok(())
        }
    }
}

/// Value terms can stand for themselves inside triple atoms.
fn reflect_value(term: &Term) -> Option<LogicTerm> {
    match term {
        Term::QubitRef(i) => Some(LogicTerm::Qubit(*i)),
        Term::BoolLit(b) => Some(LogicTerm::Bool(*b)),
        Term::Pair(a, b) => Some(LogicTerm::pair(reflect_value(a)?, reflect_value(b)?)),
        _ => None,
    }
}

fn discharge(
    path: &str,
    which: &str,
    ctx: &AssertionContext,
    premise: &Assertion,
    conclusion: &Assertion,
) -> Result<(), Rejection> {
    // Names the obligation never mentions cannot affect its validity, but
    // they inflate the model space; decide over the relevant ones only.
    let mut free = premise.free_names();
    free.extend(conclusion.free_names());
    let ctx = AssertionContext {
        names: ctx
            .names
            .iter()
            .filter(|(name, _)| free.contains(*name))
            .map(|(name, ty)| (name.clone(), ty.clone()))
            .collect(),
    };
    match entails(&ctx, premise, conclusion) {
        Ok(Entailment::Valid) => Ok(()),
        Ok(Entailment::Invalid(counter)) => fail(
            path,
            format!(
                "the {which} side obligation `{premise} |- {conclusion}` does not hold; counter-model:\n{counter}"
            ),
        ),
        Err(e) => fail(
            path,
            format!("the {which} side obligation `{premise} |- {conclusion}` could not be decided: {e}"),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_src(src: &str) -> Verdict {
        let tree = parse_proof_script(src).expect("script parses");
        check_judgment(&tree)
    }

    #[test]
    fn rule_names_round_trip() {
        for (rule, name) in RULE_NAMES {
            assert_eq!(rule.name(), *name);
            assert_eq!(Rule::from_name(name), Some(*rule));
        }
        assert_eq!(Rule::from_name("JDGBOGUS"), None);
    }

    #[test]
    fn qubit_axiom_accepts_and_rejects() {
        let good = r#"{
            "rule": "JDGQBIT",
            "conclusion": {
                "pre": "pure q1",
                "subject": "q1",
                "anchor": "u",
                "type": "qbit",
                "post": "pure u"
            }
        }"#;
        assert_eq!(check_src(good), Verdict::Accepted);

        let bad = r#"{
            "rule": "JDGQBIT",
            "conclusion": {
                "pre": "pure q2",
                "subject": "q1",
                "anchor": "u",
                "type": "qbit",
                "post": "pure u"
            }
        }"#;
        match check_src(bad) {
            Verdict::Rejected { path, .. } => assert_eq!(path, "root"),
            Verdict::Accepted => panic!("mismatched axiom must be rejected"),
        }
    }

    #[test]
    fn constant_axiom_passes_the_precondition_through() {
        let good = r#"{
            "rule": "JDGCONST",
            "conclusion": {
                "pre": "q1 ~ q2",
                "subject": "true",
                "anchor": "u",
                "type": "bit",
                "post": "q1 ~ q2"
            }
        }"#;
        assert_eq!(check_src(good), Verdict::Accepted);
    }

    #[test]
    fn hadamard_flips_the_purity_conjunct() {
        let good = r#"{
            "rule": "JDGHAD",
            "conclusion": {
                "pre": "pure q1",
                "subject": "H q1",
                "anchor": "u",
                "type": "qbit",
                "post": "!pure u"
            },
            "premises": [{
                "rule": "JDGQBIT",
                "conclusion": {
                    "pre": "pure q1",
                    "subject": "q1",
                    "anchor": "u",
                    "type": "qbit",
                    "post": "pure u"
                }
            }]
        }"#;
        assert_eq!(check_src(good), Verdict::Accepted);
    }

    #[test]
    fn measurement_deletes_conjuncts_and_carries_the_anchor() {
        let good = r#"{
            "rule": "JDGMEAS",
            "conclusion": {
                "pre": "q1 ~ q2",
                "subject": "meas q1",
                "anchor": "v",
                "type": "bit",
                "post": "pure u"
            },
            "premises": [{
                "rule": "JDGQBIT",
                "conclusion": {
                    "pre": "q1 ~ q2",
                    "subject": "q1",
                    "anchor": "u",
                    "type": "qbit",
                    "post": "u ~ q2"
                }
            }]
        }"#;
        assert_eq!(check_src(good), Verdict::Accepted);
    }

    #[test]
    fn cnot_entangling_form_appends_the_relation() {
        let good = r#"{
            "rule": "JDGCNOTTWO",
            "conclusion": {
                "pre": "true",
                "subject": "cnot <q1, q2>",
                "anchor": ["u", "v"],
                "type": "qbit * qbit",
                "post": "true /\\ u ~ v"
            },
            "premises": [{
                "rule": "JDGCPL",
                "conclusion": {
                    "pre": "true",
                    "subject": "<q1, q2>",
                    "anchor": ["u", "v"],
                    "type": "qbit * qbit",
                    "post": "true"
                },
                "premises": [
                    {
                        "rule": "JDGQBIT",
                        "conclusion": {
                            "pre": "true",
                            "subject": "q1",
                            "anchor": "u",
                            "type": "qbit",
                            "post": "true"
                        }
                    },
                    {
                        "rule": "JDGQBIT",
                        "conclusion": {
                            "pre": "true",
                            "subject": "q2",
                            "anchor": "v",
                            "type": "qbit",
                            "post": "true"
                        }
                    }
                ]
            }]
        }"#;
        assert_eq!(check_src(good), Verdict::Accepted);
    }

    #[test]
    fn cnot_pure_control_form_requires_the_purity_conjunct() {
        let template = |post: &str, concl_post: &str| {
            format!(
                r#"{{
                "rule": "JDGCNOTONE",
                "conclusion": {{
                    "pre": "pure q1",
                    "subject": "cnot <q1, q2>",
                    "anchor": ["u", "v"],
                    "type": "qbit * qbit",
                    "post": "{concl_post}"
                }},
                "premises": [{{
                    "rule": "JDGCPL",
                    "conclusion": {{
                        "pre": "pure q1",
                        "subject": "<q1, q2>",
                        "anchor": ["u", "v"],
                        "type": "qbit * qbit",
                        "post": "{post}"
                    }},
                    "premises": [
                        {{
                            "rule": "JDGQBIT",
                            "conclusion": {{
                                "pre": "pure q1",
                                "subject": "q1",
                                "anchor": "u",
                                "type": "qbit",
                                "post": "pure u"
                            }}
                        }},
                        {{
                            "rule": "JDGQBIT",
                            "conclusion": {{
                                "pre": "pure u",
                                "subject": "q2",
                                "anchor": "v",
                                "type": "qbit",
                                "post": "pure u"
                            }}
                        }}
                    ]
                }}]
            }}"#
            )
        };
        assert_eq!(check_src(&template("pure u", "pure u")), Verdict::Accepted);
        match check_src(&template("true", "true")) {
            Verdict::Rejected { path, reason } => {
                assert_eq!(path, "root");
                assert!(reason.contains("pure u"), "reason: {reason}");
            }
            Verdict::Accepted => panic!("a missing purity conjunct must be rejected"),
        }
    }

    #[test]
    fn abstraction_wraps_the_body_triple() {
        let good = r#"{
            "rule": "JDGABS",
            "conclusion": {
                "pre": "true",
                "subject": "\\x:qbit. x",
                "anchor": "u",
                "type": "qbit -> qbit",
                "post": "forall x. {pure x} u . x = m {pure m}"
            },
            "premises": [{
                "rule": "JDGLOG",
                "conclusion": {
                    "pre": "true /\\ pure x",
                    "subject": "x",
                    "anchor": "m",
                    "type": "qbit",
                    "post": "pure m"
                },
                "side": [
                    ["true /\\ pure x", "pure x"],
                    ["pure m", "pure m"]
                ],
                "premises": [{
                    "rule": "JDGVAR",
                    "conclusion": {
                        "pre": "pure x",
                        "subject": "x",
                        "anchor": "m",
                        "type": "qbit",
                        "post": "pure m"
                    }
                }]
            }]
        }"#;
        assert_eq!(check_src(good), Verdict::Accepted);
    }

    #[test]
    fn promotion_requires_a_value_subject() {
        let bad = r#"{
            "rule": "JDGPROM",
            "conclusion": {
                "pre": "true /\\ pure q2",
                "subject": "meas q1",
                "anchor": "v",
                "type": "bit",
                "post": "pure u /\\ pure q2"
            },
            "premises": [{
                "rule": "JDGMEAS",
                "conclusion": {
                    "pre": "true",
                    "subject": "meas q1",
                    "anchor": "v",
                    "type": "bit",
                    "post": "pure u"
                },
                "premises": [{
                    "rule": "JDGQBIT",
                    "conclusion": {
                        "pre": "true",
                        "subject": "q1",
                        "anchor": "u",
                        "type": "qbit",
                        "post": "true"
                    }
                }]
            }]
        }"#;
        match check_src(bad) {
            Verdict::Rejected { reason, .. } => {
                assert!(reason.contains("value"), "reason: {reason}");
            }
            Verdict::Accepted => panic!("promotion of a non-value must be rejected"),
        }
    }

    #[test]
    fn arity_mismatches_are_rejected() {
        let bad = r#"{
            "rule": "JDGPHASE",
            "conclusion": {
                "pre": "true",
                "subject": "phase q1",
                "anchor": "u",
                "type": "qbit",
                "post": "true"
            }
        }"#;
        match check_src(bad) {
            Verdict::Rejected { reason, .. } => {
                assert!(reason.contains("premise"), "reason: {reason}");
            }
            Verdict::Accepted => panic!("missing premises must be rejected"),
        }
    }

    #[test]
    fn unknown_rules_fail_to_parse() {
        let bad = r#"{
            "rule": "JDGSWAP",
            "conclusion": {
                "pre": "true",
                "subject": "q1",
                "anchor": "u",
                "type": "qbit",
                "post": "true"
            }
        }"#;
        match parse_proof_script(bad) {
            Err(ProofError::UnknownRule { name, location }) => {
                assert_eq!(name, "JDGSWAP");
                assert_eq!(location, "root");
            }
            other => panic!("expected an unknown-rule error, got {other:?}"),
        }
    }

    #[test]
    fn side_obligations_only_on_the_consequence_rule() {
        let bad = r#"{
            "rule": "JDGQBIT",
            "conclusion": {
                "pre": "true",
                "subject": "q1",
                "anchor": "u",
                "type": "qbit",
                "post": "true"
            },
            "side": [["true", "true"]]
        }"#;
        match check_src(bad) {
            Verdict::Rejected { reason, .. } => {
                assert!(reason.contains("JDGLOG"), "reason: {reason}");
            }
            Verdict::Accepted => panic!("stray side obligations must be rejected"),
        }
    }

    #[test]
    fn consequence_discharges_its_obligations_or_rejects() {
        let template = |concl_post: &str, side_second: &str| {
            format!(
                r#"{{
                "rule": "JDGLOG",
                "conclusion": {{
                    "pre": "q1 ~ q2 /\\ pure q3",
                    "subject": "q1",
                    "anchor": "u",
                    "type": "qbit",
                    "post": "{concl_post}"
                }},
                "side": [
                    ["q1 ~ q2 /\\ pure q3", "q1 ~ q2"],
                    ["u ~ q2", "{side_second}"]
                ],
                "premises": [{{
                    "rule": "JDGQBIT",
                    "conclusion": {{
                        "pre": "q1 ~ q2",
                        "subject": "q1",
                        "anchor": "u",
                        "type": "qbit",
                        "post": "u ~ q2"
                    }}
                }}]
            }}"#
            )
        };
        assert_eq!(
            check_src(&template("q2 ~ u", "q2 ~ u")),
            Verdict::Accepted
        );
        match check_src(&template("pure u", "pure u")) {
            Verdict::Rejected { reason, .. } => {
                assert!(reason.contains("side obligation"), "reason: {reason}");
                assert!(reason.contains("counter-model"), "reason: {reason}");
            }
            Verdict::Accepted => panic!("an entangled qubit is not provably pure"),
        }
    }

    #[test]
    fn application_threads_the_triple_atom() {
        // {true /\ pure q1} (\x:qbit. x) q1 :r {pure r}: the abstraction
        // rule produces the quantified triple, promotion carries the purity
        // fact across the value, and the argument premise instantiates the
        // triple at the concrete qubit.
        let good = r#"{
            "rule": "JDGAPP",
            "conclusion": {
                "pre": "true /\\ pure q1",
                "subject": "(\\x:qbit. x) q1",
                "anchor": "r",
                "type": "qbit",
                "post": "pure r"
            },
            "premises": [
                {
                    "rule": "JDGPROM",
                    "conclusion": {
                        "pre": "true /\\ pure q1",
                        "subject": "\\x:qbit. x",
                        "anchor": "m",
                        "type": "qbit -> qbit",
                        "post": "(forall x. {pure x} m . x = r {pure r}) /\\ pure q1"
                    },
                    "premises": [{
                        "rule": "JDGABS",
                        "conclusion": {
                            "pre": "true",
                            "subject": "\\x:qbit. x",
                            "anchor": "m",
                            "type": "qbit -> qbit",
                            "post": "forall x. {pure x} m . x = r {pure r}"
                        },
                        "premises": [{
                            "rule": "JDGLOG",
                            "conclusion": {
                                "pre": "true /\\ pure x",
                                "subject": "x",
                                "anchor": "r",
                                "type": "qbit",
                                "post": "pure r"
                            },
                            "side": [
                                ["true /\\ pure x", "pure x"],
                                ["pure r", "pure r"]
                            ],
                            "premises": [{
                                "rule": "JDGVAR",
                                "conclusion": {
                                    "pre": "pure x",
                                    "subject": "x",
                                    "anchor": "r",
                                    "type": "qbit",
                                    "post": "pure r"
                                }
                            }]
                        }]
                    }]
                },
                {
                    "rule": "JDGLOG",
                    "conclusion": {
                        "pre": "(forall x. {pure x} m . x = r {pure r}) /\\ pure q1",
                        "subject": "q1",
                        "anchor": "n",
                        "type": "qbit",
                        "post": "pure q1 /\\ {pure q1} m . q1 = r {pure r}"
                    },
                    "side": [
                        ["(forall x. {pure x} m . x = r {pure r}) /\\ pure q1", "pure q1 /\\ {pure q1} m . q1 = r {pure r}"],
                        ["pure q1 /\\ {pure q1} m . q1 = r {pure r}", "pure q1 /\\ {pure q1} m . q1 = r {pure r}"]
                    ],
                    "premises": [{
                        "rule": "JDGQBIT",
                        "conclusion": {
                            "pre": "pure q1 /\\ {pure q1} m . q1 = r {pure r}",
                            "subject": "q1",
                            "anchor": "n",
                            "type": "qbit",
                            "post": "pure q1 /\\ {pure q1} m . q1 = r {pure r}"
                        }
                    }]
                }
            ]
        }"#;
        assert_eq!(check_src(good), Verdict::Accepted);
    }
}
