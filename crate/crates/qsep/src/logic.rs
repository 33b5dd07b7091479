//! Assertion language over abstract quantum states.
//!
//! Assertions talk about named values (anchors introduced by proof
//! judgments or quantifiers), qubits of the global register, and booleans.
//! The atoms are entanglement (`e1 ~ e2`), definiteness (`pure e`),
//! equality (`e1 = e2`), and function-evaluation formulas
//! (`{C} f . a = r {C'}`). Connectives are the usual classical ones plus
//! qubit-ranging quantifiers.

use crate::syntax::{ProjSide, Type};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// First-order terms of the assertion language.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LogicTerm {
    /// A named value: a judgment anchor or a quantified variable.
    Anchor(String),
    /// A qubit of the global register (1-based).
    Qubit(usize),
    /// A boolean literal.
    Bool(bool),
    /// A pair of terms.
    Pair(Box<LogicTerm>, Box<LogicTerm>),
    /// A projection.
    Proj(ProjSide, Box<LogicTerm>),
}

impl LogicTerm {
    pub fn anchor(name: impl Into<String>) -> LogicTerm {
        LogicTerm::Anchor(name.into())
    }

    pub fn pair(left: LogicTerm, right: LogicTerm) -> LogicTerm {
        LogicTerm::Pair(Box::new(left), Box::new(right))
    }

    pub fn proj(side: ProjSide, inner: LogicTerm) -> LogicTerm {
        LogicTerm::Proj(side, Box::new(inner))
    }

    /// Names occurring in the term.
    pub fn free_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names(&self, out: &mut BTreeSet<String>) {
        match self {
            LogicTerm::Anchor(x) => {
                out.insert(x.clone());
            }
            LogicTerm::Qubit(_) | LogicTerm::Bool(_) => {}
            LogicTerm::Pair(a, b) => {
                a.collect_names(out);
                b.collect_names(out);
            }
            LogicTerm::Proj(_, m) => m.collect_names(out),
        }
    }

    /// Replace every occurrence of the name by the given term.
    pub fn subst(&self, name: &str, replacement: &LogicTerm) -> LogicTerm {
        match self {
            LogicTerm::Anchor(x) if x == name => replacement.clone(),
            LogicTerm::Anchor(_) | LogicTerm::Qubit(_) | LogicTerm::Bool(_) => self.clone(),
            LogicTerm::Pair(a, b) => {
                LogicTerm::pair(a.subst(name, replacement), b.subst(name, replacement))
            }
            LogicTerm::Proj(side, m) => LogicTerm::proj(*side, m.subst(name, replacement)),
        }
    }

    /// Largest qubit index mentioned, or 0 if none occur.
    pub fn max_qubit_index(&self) -> usize {
        match self {
            LogicTerm::Anchor(_) | LogicTerm::Bool(_) => 0,
            LogicTerm::Qubit(i) => *i,
            LogicTerm::Pair(a, b) => a.max_qubit_index().max(b.max_qubit_index()),
            LogicTerm::Proj(_, m) => m.max_qubit_index(),
        }
    }
}

impl fmt::Display for LogicTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogicTerm::Anchor(x) => f.write_str(x),
            LogicTerm::Qubit(i) => write!(f, "q{i}"),
            LogicTerm::Bool(true) => f.write_str("true"),
            LogicTerm::Bool(false) => f.write_str("false"),
            LogicTerm::Pair(a, b) => write!(f, "<{a}, {b}>"),
            LogicTerm::Proj(side, m) => write!(f, "{} {m}", side.keyword()),
        }
    }
}

/// Assertions over abstract quantum states.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Assertion {
    True,
    False,
    /// The two qubit-valued terms are related by entanglement.
    Entangled(LogicTerm, LogicTerm),
    /// The qubit-valued term is definitely in a computational basis state.
    Pure(LogicTerm),
    /// Value equality.
    Equal(LogicTerm, LogicTerm),
    Not(Box<Assertion>),
    And(Box<Assertion>, Box<Assertion>),
    Or(Box<Assertion>, Box<Assertion>),
    Implies(Box<Assertion>, Box<Assertion>),
    /// Quantification over qubit values.
    Forall(String, Box<Assertion>),
    Exists(String, Box<Assertion>),
    /// `{pre} fun . arg = result {post}`: whenever `pre` holds, applying
    /// `fun` to `arg` terminates only in outcomes whose value, named
    /// `result`, satisfies `post`.
    Eval {
        pre: Box<Assertion>,
        fun: LogicTerm,
        arg: LogicTerm,
        result: String,
        post: Box<Assertion>,
    },
}

impl Assertion {
    pub fn not(a: Assertion) -> Assertion {
        Assertion::Not(Box::new(a))
    }

    pub fn and(a: Assertion, b: Assertion) -> Assertion {
        Assertion::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Assertion, b: Assertion) -> Assertion {
        Assertion::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Assertion, b: Assertion) -> Assertion {
        Assertion::Implies(Box::new(a), Box::new(b))
    }

    pub fn forall(x: impl Into<String>, body: Assertion) -> Assertion {
        Assertion::Forall(x.into(), Box::new(body))
    }

    pub fn exists(x: impl Into<String>, body: Assertion) -> Assertion {
        Assertion::Exists(x.into(), Box::new(body))
    }

    pub fn eval(
        pre: Assertion,
        fun: LogicTerm,
        arg: LogicTerm,
        result: impl Into<String>,
        post: Assertion,
    ) -> Assertion {
        Assertion::Eval {
            pre: Box::new(pre),
            fun,
            arg,
            result: result.into(),
            post: Box::new(post),
        }
    }

    /// Free names: anchor occurrences not bound by a quantifier or by the
    /// result name of an evaluation formula.
    pub fn free_names(&self) -> BTreeSet<String> {
        match self {
            Assertion::True | Assertion::False => BTreeSet::new(),
            Assertion::Entangled(a, b) | Assertion::Equal(a, b) => {
                let mut out = a.free_names();
                out.extend(b.free_names());
                out
            }
            Assertion::Pure(e) => e.free_names(),
            Assertion::Not(a) => a.free_names(),
            Assertion::And(a, b) | Assertion::Or(a, b) | Assertion::Implies(a, b) => {
                let mut out = a.free_names();
                out.extend(b.free_names());
                out
            }
            Assertion::Forall(x, body) | Assertion::Exists(x, body) => {
                let mut out = body.free_names();
                out.remove(x);
                out
            }
            Assertion::Eval {
                pre,
                fun,
                arg,
                result,
                post,
            } => {
                let mut out = pre.free_names();
                out.extend(fun.free_names());
                out.extend(arg.free_names());
                let mut post_names = post.free_names();
                post_names.remove(result);
                out.extend(post_names);
                out
            }
        }
    }

    /// Largest qubit index mentioned anywhere in the assertion.
    pub fn max_qubit_index(&self) -> usize {
        match self {
            Assertion::True | Assertion::False => 0,
            Assertion::Entangled(a, b) | Assertion::Equal(a, b) => {
                a.max_qubit_index().max(b.max_qubit_index())
            }
            Assertion::Pure(e) => e.max_qubit_index(),
            Assertion::Not(a) => a.max_qubit_index(),
            Assertion::And(a, b) | Assertion::Or(a, b) | Assertion::Implies(a, b) => {
                a.max_qubit_index().max(b.max_qubit_index())
            }
            Assertion::Forall(_, body) | Assertion::Exists(_, body) => body.max_qubit_index(),
            Assertion::Eval {
                pre,
                fun,
                arg,
                post,
                ..
            } => pre
                .max_qubit_index()
                .max(fun.max_qubit_index())
                .max(arg.max_qubit_index())
                .max(post.max_qubit_index()),
        }
    }

    /// Capture-avoiding substitution of a logic term for a free name.
    pub fn subst_name(&self, name: &str, replacement: &LogicTerm) -> Assertion {
        match self {
            Assertion::True | Assertion::False => self.clone(),
            Assertion::Entangled(a, b) => {
                Assertion::Entangled(a.subst(name, replacement), b.subst(name, replacement))
            }
            Assertion::Equal(a, b) => {
                Assertion::Equal(a.subst(name, replacement), b.subst(name, replacement))
            }
            Assertion::Pure(e) => Assertion::Pure(e.subst(name, replacement)),
            Assertion::Not(a) => Assertion::not(a.subst_name(name, replacement)),
            Assertion::And(a, b) => Assertion::and(
                a.subst_name(name, replacement),
                b.subst_name(name, replacement),
            ),
            Assertion::Or(a, b) => Assertion::or(
                a.subst_name(name, replacement),
                b.subst_name(name, replacement),
            ),
            Assertion::Implies(a, b) => Assertion::implies(
                a.subst_name(name, replacement),
                b.subst_name(name, replacement),
            ),
            Assertion::Forall(x, body) => {
                let (x, body) = rename_binder_if_needed(x, body, name, replacement);
                if x_binds(&x, name) {
                    Assertion::Forall(x, body)
                } else {
                    Assertion::forall(x, body.subst_name(name, replacement))
                }
            }
            Assertion::Exists(x, body) => {
                let (x, body) = rename_binder_if_needed(x, body, name, replacement);
                if x_binds(&x, name) {
                    Assertion::Exists(x, body)
                } else {
                    Assertion::exists(x, body.subst_name(name, replacement))
                }
            }
            Assertion::Eval {
                pre,
                fun,
                arg,
                result,
                post,
            } => {
                let new_pre = pre.subst_name(name, replacement);
                let new_fun = fun.subst(name, replacement);
                let new_arg = arg.subst(name, replacement);
                let (result, post) = rename_binder_if_needed(result, post, name, replacement);
                let new_post = if x_binds(&result, name) {
                    post
                } else {
                    Box::new(post.subst_name(name, replacement))
                };
                Assertion::Eval {
                    pre: Box::new(new_pre),
                    fun: new_fun,
                    arg: new_arg,
                    result,
                    post: new_post,
                }
            }
        }
    }

    /// Flatten a right-or-left nested conjunction into its conjuncts, in
    /// left-to-right order. Non-conjunctions yield themselves.
    pub fn conjuncts(&self) -> Vec<&Assertion> {
        let mut out = Vec::new();
        fn go<'a>(a: &'a Assertion, out: &mut Vec<&'a Assertion>) {
            match a {
                Assertion::And(l, r) => {
                    go(l, out);
                    go(r, out);
                }
                other => out.push(other),
            }
        }
        go(self, &mut out);
        out
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
        // Precedence: 0 = implication (right-assoc, lowest), 1 = disjunction,
        // 2 = conjunction, 3 = negation and atoms, 4 = operand of negation.
        match self {
            Assertion::True => f.write_str("true"),
            Assertion::False => f.write_str("false"),
            Assertion::Entangled(a, b) => {
                parenthesize(f, prec > 3, |f| write!(f, "{a} ~ {b}"))
            }
            Assertion::Pure(e) => parenthesize(f, prec > 3, |f| write!(f, "pure {e}")),
            Assertion::Equal(a, b) => parenthesize(f, prec > 3, |f| write!(f, "{a} = {b}")),
            Assertion::Not(a) => parenthesize(f, prec > 3, |f| {
                f.write_str("!")?;
                a.fmt_prec(f, 4)
            }),
            Assertion::And(a, b) => parenthesize(f, prec > 2, |f| {
                a.fmt_prec(f, 2)?;
                f.write_str(" /\\ ")?;
                b.fmt_prec(f, 3)
            }),
            Assertion::Or(a, b) => parenthesize(f, prec > 1, |f| {
                a.fmt_prec(f, 1)?;
                f.write_str(" \\/ ")?;
                b.fmt_prec(f, 2)
            }),
            Assertion::Implies(a, b) => parenthesize(f, prec > 0, |f| {
                a.fmt_prec(f, 1)?;
                f.write_str(" -> ")?;
                b.fmt_prec(f, 0)
            }),
            Assertion::Forall(x, body) => parenthesize(f, prec > 0, |f| {
                write!(f, "forall {x}. ")?;
                body.fmt_prec(f, 0)
            }),
            Assertion::Exists(x, body) => parenthesize(f, prec > 0, |f| {
                write!(f, "exists {x}. ")?;
                body.fmt_prec(f, 0)
            }),
            Assertion::Eval {
                pre,
                fun,
                arg,
                result,
                post,
            } => parenthesize(f, prec > 3, |f| {
                f.write_str("{")?;
                pre.fmt_prec(f, 0)?;
                write!(f, "}} {fun} . {arg} = {result} {{")?;
                post.fmt_prec(f, 0)?;
                f.write_str("}")
            }),
        }
    }
}

fn parenthesize(
    f: &mut fmt::Formatter<'_>,
    needed: bool,
    inner: impl FnOnce(&mut fmt::Formatter<'_>) -> fmt::Result,
) -> fmt::Result {
    if needed {
        f.write_str("(")?;
    }
    inner(f)?;
    if needed {
        f.write_str(")")?;
    }
    Ok(())
}

fn x_binds(binder: &str, name: &str) -> bool {
    binder == name
}

/// If substituting under the binder would capture a free name of the
/// replacement, rename the binder first. Returns the (possibly renamed)
/// binder and body.
fn rename_binder_if_needed(
    binder: &str,
    body: &Assertion,
    name: &str,
    replacement: &LogicTerm,
) -> (String, Box<Assertion>) {
    if binder != name
        && body.free_names().contains(name)
        && replacement.free_names().contains(binder)
    {
        let mut taken = body.free_names();
        taken.extend(replacement.free_names());
        taken.insert(name.to_string());
        let stem: String = binder.trim_end_matches(|c: char| c.is_ascii_digit()).into();
        let stem = if stem.is_empty() { "x".to_string() } else { stem };
        for i in 1.. {
            let candidate = format!("{stem}{i}");
            if !taken.contains(&candidate) && candidate != binder {
                let renamed = body.subst_name(binder, &LogicTerm::anchor(candidate.clone()));
                return (candidate, Box::new(renamed));
            }
        }
        unreachable!()
    }
    (binder.to_string(), Box::new(body.clone()))
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// Typing context for assertions: the names an assertion may mention, with
/// their types.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssertionContext {
    pub names: BTreeMap<String, Type>,
}

impl AssertionContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, ty: Type) -> Self {
        self.names.insert(name.into(), ty);
        self
    }
}

/// Reasons an assertion can be ill-formed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssertionTypeError {
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("projection applied to non-pair term `{0}` of type {1}")]
    ProjectNonPair(String, Type),
    #[error("entanglement atom requires qubit operands, got `{term}` of type {ty}")]
    EntangledNonQubit { term: String, ty: Type },
    #[error("purity atom requires a qubit operand, got `{term}` of type {ty}")]
    PureNonQubit { term: String, ty: Type },
    #[error("equality between incompatible types: `{left}` has type {left_ty}, `{right}` has type {right_ty}")]
    EqualTypeMismatch {
        left: String,
        left_ty: Type,
        right: String,
        right_ty: Type,
    },
    #[error("name `{0}` is already bound and may not be rebound")]
    Rebinding(String),
    #[error("evaluation formula requires a function, got `{term}` of type {ty}")]
    EvalNonFunction { term: String, ty: Type },
    #[error("evaluation formula argument `{arg}` has type {arg_ty}, expected {expected}")]
    EvalArgMismatch {
        arg: String,
        arg_ty: Type,
        expected: Type,
    },
}

/// Compute the type of a logic term under the context.
pub fn logic_term_type(
    ctx: &AssertionContext,
    term: &LogicTerm,
) -> Result<Type, AssertionTypeError> {
    match term {
        LogicTerm::Anchor(x) => ctx
            .names
            .get(x)
            .cloned()
            .ok_or_else(|| AssertionTypeError::UnknownName(x.clone())),
        LogicTerm::Qubit(_) => Ok(Type::Qbit),
        LogicTerm::Bool(_) => Ok(Type::Bit),
        LogicTerm::Pair(a, b) => Ok(Type::product(
            logic_term_type(ctx, a)?,
            logic_term_type(ctx, b)?,
        )),
        LogicTerm::Proj(side, m) => match logic_term_type(ctx, m)? {
            Type::Product(a, b) => Ok(match side {
                ProjSide::Fst => *a,
                ProjSide::Snd => *b,
            }),
            other => Err(AssertionTypeError::ProjectNonPair(m.to_string(), other)),
        },
    }
}

/// Check that an assertion is well-formed under the context.
pub fn typecheck_assertion(
    ctx: &AssertionContext,
    assertion: &Assertion,
) -> Result<(), AssertionTypeError> {
    match assertion {
        Assertion::True | Assertion::False => Ok(()),
        Assertion::Entangled(a, b) => {
            for term in [a, b] {
                let ty = logic_term_type(ctx, term)?;
                if ty != Type::Qbit {
                    return Err(AssertionTypeError::EntangledNonQubit {
                        term: term.to_string(),
                        ty,
                    });
                }
            }
            Ok(())
        }
        Assertion::Pure(e) => {
            let ty = logic_term_type(ctx, e)?;
            if ty != Type::Qbit {
                return Err(AssertionTypeError::PureNonQubit {
                    term: e.to_string(),
                    ty,
                });
            }
            Ok(())
        }
        Assertion::Equal(a, b) => {
            let ta = logic_term_type(ctx, a)?;
            let tb = logic_term_type(ctx, b)?;
            if ta != tb {
                return Err(AssertionTypeError::EqualTypeMismatch {
                    left: a.to_string(),
                    left_ty: ta,
                    right: b.to_string(),
                    right_ty: tb,
                });
            }
            Ok(())
        }
        Assertion::Not(a) => typecheck_assertion(ctx, a),
        Assertion::And(a, b) | Assertion::Or(a, b) | Assertion::Implies(a, b) => {
            typecheck_assertion(ctx, a)?;
            typecheck_assertion(ctx, b)
        }
        Assertion::Forall(x, body) | Assertion::Exists(x, body) => {
            if ctx.names.contains_key(x) {
                return Err(AssertionTypeError::Rebinding(x.clone()));
            }
            let inner = ctx.clone().with(x.clone(), Type::Qbit);
            typecheck_assertion(&inner, body)
        }
        Assertion::Eval {
            pre,
            fun,
            arg,
            result,
            post,
        } => {
            typecheck_assertion(ctx, pre)?;
            let fun_ty = logic_term_type(ctx, fun)?;
            let (dom, cod) = match fun_ty {
                Type::Arrow(a, b) => (*a, *b),
                other => {
                    return Err(AssertionTypeError::EvalNonFunction {
                        term: fun.to_string(),
                        ty: other,
                    })
                }
            };
            let arg_ty = logic_term_type(ctx, arg)?;
            if arg_ty != dom {
                return Err(AssertionTypeError::EvalArgMismatch {
                    arg: arg.to_string(),
                    arg_ty,
                    expected: dom,
                });
            }
            if ctx.names.contains_key(result) {
                return Err(AssertionTypeError::Rebinding(result.clone()));
            }
            let inner = ctx.clone().with(result.clone(), cod);
            typecheck_assertion(&inner, post)
        }
    }
}


// ---------------------------------------------------------------------------
// Abstract values and models
// ---------------------------------------------------------------------------

use crate::abstract_sem::{abstract_semantics, Aqs, DEFAULT_ABSTRACT_BUDGET};
use crate::concrete::RunError;
use crate::syntax::Term;
use std::collections::HashMap;

/// Largest register count `entails` will enumerate models over.
pub const ENTAILMENT_REGISTER_CAP: usize = 6;

/// Default limit on case splits performed while refuting an entailment.
pub const DEFAULT_ENTAILMENT_BRANCH_BUDGET: usize = 200_000;

/// A qubit-typed abstract value: either one of the machine registers, or a
/// hypothetical qubit that exists only for the sake of quantification.
///
/// A `Register` carries no cached facts: whether it is pure or entangled is
/// read off the *current* separability abstraction each time an atom is
/// evaluated, so a value bound before a program run still describes the
/// register afterwards.  A `Hypothetical` qubit instead carries its facts
/// with it: qubits with the same `class` are treated as entangled with each
/// other, and `base` records whether the qubit is in a basis state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QubitValue {
    /// Qubit register `q_i` of the machine under discussion.
    Register(usize),
    /// A qubit not tied to any register, introduced by a quantifier.
    Hypothetical { class: u32, base: bool },
}

impl fmt::Display for QubitValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QubitValue::Register(i) => write!(f, "q{i}"),
            QubitValue::Hypothetical { class, base } => {
                write!(f, "h{class}")?;
                if *base {
                    write!(f, "!")?;
                }
                Ok(())
            }
        }
    }
}

/// The result of interpreting a logical term in a model.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AbstractValue {
    Bit(bool),
    Qubit(QubitValue),
    Pair(Box<AbstractValue>, Box<AbstractValue>),
    /// A function value, kept as the program term that computes it.
    Closure(Term),
}

impl AbstractValue {
    pub fn pair(a: AbstractValue, b: AbstractValue) -> AbstractValue {
        AbstractValue::Pair(Box::new(a), Box::new(b))
    }

    /// Converts a closed value term of the object language into an abstract
    /// value.  Qubit constants become register values; abstractions and bare
    /// primitives become closures.  Non-value terms are rejected.
    pub fn of_value_term(term: &Term) -> Result<AbstractValue, LogicError> {
        match term {
            Term::BoolLit(b) => Ok(AbstractValue::Bit(*b)),
            Term::QubitRef(i) => Ok(AbstractValue::Qubit(QubitValue::Register(*i))),
            Term::Pair(a, b) => Ok(AbstractValue::pair(
                AbstractValue::of_value_term(a)?,
                AbstractValue::of_value_term(b)?,
            )),
            Term::Lambda { .. } | Term::Const(_) => Ok(AbstractValue::Closure(term.clone())),
            other => Err(LogicError::NotAValue(other.to_string())),
        }
    }

    /// The program term this value stands for, when one exists.  Hypothetical
    /// qubits have no program representation, so any value containing one
    /// yields `None`.
    pub fn representative(&self) -> Option<Term> {
        match self {
            AbstractValue::Bit(b) => Some(Term::BoolLit(*b)),
            AbstractValue::Qubit(QubitValue::Register(i)) => Some(Term::QubitRef(*i)),
            AbstractValue::Qubit(QubitValue::Hypothetical { .. }) => None,
            AbstractValue::Pair(a, b) => {
                Some(Term::pair(a.representative()?, b.representative()?))
            }
            AbstractValue::Closure(t) => Some(t.clone()),
        }
    }

    fn collect_hypothetical_classes(&self, out: &mut BTreeSet<u32>) {
        match self {
            AbstractValue::Qubit(QubitValue::Hypothetical { class, .. }) => {
                out.insert(*class);
            }
            AbstractValue::Pair(a, b) => {
                a.collect_hypothetical_classes(out);
                b.collect_hypothetical_classes(out);
            }
            AbstractValue::Bit(_) | AbstractValue::Qubit(_) | AbstractValue::Closure(_) => {}
        }
    }
}

impl fmt::Display for AbstractValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbstractValue::Bit(b) => write!(f, "{b}"),
            AbstractValue::Qubit(q) => write!(f, "{q}"),
            AbstractValue::Pair(a, b) => write!(f, "<{a}, {b}>"),
            AbstractValue::Closure(t) => write!(f, "{t}"),
        }
    }
}

/// Errors raised while interpreting terms, deciding satisfaction, or
/// searching for entailment counter-models.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LogicError {
    #[error("name `{0}` has no value in the model")]
    UnboundName(String),
    #[error("name `{0}` already has a value in the model")]
    NameCollision(String),
    #[error("cannot project from non-pair value `{0}`")]
    ProjectNonPair(String),
    #[error("term `{0}` is not a value")]
    NotAValue(String),
    #[error("`{0}` is not a function value that can be run")]
    NonExecutableFunction(String),
    #[error("atom applied to a value of the wrong shape: {0}")]
    ValueShape(String),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("entailment would need {0} registers, above the cap of {ENTAILMENT_REGISTER_CAP}")]
    RegisterCount(usize),
    #[error("entailment search exceeded its budget of {0} case splits")]
    BranchBudget(usize),
}

/// A model: a separability abstraction over a fixed register bank, together
/// with an interpretation of assertion names as abstract values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    pub aqs: Aqs,
    pub interp: BTreeMap<String, AbstractValue>,
}

impl Model {
    pub fn new(aqs: Aqs) -> Model {
        Model {
            aqs,
            interp: BTreeMap::new(),
        }
    }

    /// Extends the interpretation with one more name.  Names are bound at
    /// most once; a second binding is a collision, not an update.
    pub fn extend(&self, name: &str, value: AbstractValue) -> Result<Model, LogicError> {
        if self.interp.contains_key(name) {
            return Err(LogicError::NameCollision(name.to_string()));
        }
        let mut interp = self.interp.clone();
        interp.insert(name.to_string(), value);
        Ok(Model {
            aqs: self.aqs.clone(),
            interp,
        })
    }

    /// Same interpretation over a different separability abstraction.
    pub fn with_aqs(&self, aqs: Aqs) -> Model {
        Model {
            aqs,
            interp: self.interp.clone(),
        }
    }

    /// Interprets a logical term as an abstract value.
    pub fn interpret(&self, term: &LogicTerm) -> Result<AbstractValue, LogicError> {
        match term {
            LogicTerm::Anchor(name) => self
                .interp
                .get(name)
                .cloned()
                .ok_or_else(|| LogicError::UnboundName(name.clone())),
            LogicTerm::Qubit(i) => Ok(AbstractValue::Qubit(QubitValue::Register(*i))),
            LogicTerm::Bool(b) => Ok(AbstractValue::Bit(*b)),
            LogicTerm::Pair(a, b) => {
                Ok(AbstractValue::pair(self.interpret(a)?, self.interpret(b)?))
            }
            LogicTerm::Proj(side, inner) => match self.interpret(inner)? {
                AbstractValue::Pair(a, b) => Ok(match side {
                    ProjSide::Fst => *a,
                    ProjSide::Snd => *b,
                }),
                other => Err(LogicError::ProjectNonPair(other.to_string())),
            },
        }
    }

    /// Hypothetical classes already mentioned by the interpretation.
    fn hypothetical_classes(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        for value in self.interp.values() {
            value.collect_hypothetical_classes(&mut out);
        }
        out
    }

    fn qubit_of(&self, value: &AbstractValue) -> Result<QubitValue, LogicError> {
        match value {
            AbstractValue::Qubit(q) => Ok(*q),
            other => Err(LogicError::ValueShape(other.to_string())),
        }
    }

    /// Whether a qubit value denotes an unentangled (separable) qubit.
    fn qubit_pure(&self, q: QubitValue) -> bool {
        match q {
            QubitValue::Register(i) => self.aqs.is_pure(i),
            QubitValue::Hypothetical { base, .. } => base,
        }
    }

    /// Whether two qubit values may be entangled with each other.  Register
    /// values consult the current abstraction; hypothetical values are
    /// related exactly when they share a class.  A register and a
    /// hypothetical qubit are never related.
    fn qubits_related(&self, a: QubitValue, b: QubitValue) -> bool {
        match (a, b) {
            (QubitValue::Register(i), QubitValue::Register(j)) => self.aqs.related(i, j),
            (
                QubitValue::Hypothetical { class: ca, .. },
                QubitValue::Hypothetical { class: cb, .. },
            ) => ca == cb,
            _ => false,
        }
    }

    /// Identity of the entanglement class a qubit value belongs to, for the
    /// equality atom.  Two register values in the same block are the same
    /// qubit resource up to the abstraction; a register and a hypothetical
    /// qubit never are.
    fn qubit_class_id(&self, q: QubitValue) -> (u8, usize) {
        match q {
            QubitValue::Register(i) => match self.aqs.class_of(i) {
                Some(block) => (0, *block.iter().next().expect("blocks are non-empty")),
                None => (1, i),
            },
            QubitValue::Hypothetical { class, .. } => (2, class as usize),
        }
    }

    /// Value equality as the equality atom sees it: bits by value, pairs
    /// componentwise, closures up to renaming of bound variables, qubits by
    /// entanglement class and purity.
    fn values_equal(&self, a: &AbstractValue, b: &AbstractValue) -> bool {
        match (a, b) {
            (AbstractValue::Bit(x), AbstractValue::Bit(y)) => x == y,
            (AbstractValue::Pair(a1, a2), AbstractValue::Pair(b1, b2)) => {
                self.values_equal(a1, b1) && self.values_equal(a2, b2)
            }
            (AbstractValue::Closure(s), AbstractValue::Closure(t)) => s.alpha_eq(t),
            (AbstractValue::Qubit(x), AbstractValue::Qubit(y)) => {
                self.qubit_class_id(*x) == self.qubit_class_id(*y)
                    && self.qubit_pure(*x) == self.qubit_pure(*y)
            }
            _ => false,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.aqs)?;
        for (name, value) in &self.interp {
            write!(f, "\n{name} = {value}")?;
        }
        Ok(())
    }
}

/// Candidate values for a qubit quantifier in a given model, skipping the
/// registers in `bound` (outer quantifiers already hold them, and two
/// distinct bound variables never denote the same register).  Besides the
/// registers, the quantifier ranges over hypothetical qubits: one of each
/// class the model already mentions and one fresh class, each with the basis
/// flag both ways.
fn qubit_domain(model: &Model, bound: &BTreeSet<usize>) -> Vec<QubitValue> {
    let mut out = Vec::new();
    for i in 1..=model.aqs.qubits() {
        if !bound.contains(&i) {
            out.push(QubitValue::Register(i));
        }
    }
    let classes = model.hypothetical_classes();
    let fresh = classes.iter().next_back().map_or(0, |m| m + 1);
    for class in classes.into_iter().chain(std::iter::once(fresh)) {
        out.push(QubitValue::Hypothetical { class, base: false });
        out.push(QubitValue::Hypothetical { class, base: true });
    }
    out
}

// ---------------------------------------------------------------------------
// Satisfaction
// ---------------------------------------------------------------------------

/// Decides whether a model satisfies an assertion.
///
/// Triple atoms `{C} f arg = x {C'}` are decided by running the abstract
/// semantics: if the precondition holds, `f` must be interpreted by a
/// closure, the closure is applied to the program term representing the
/// argument, and every terminal configuration must satisfy the
/// postcondition with `x` bound to the resulting value.  Arguments that
/// involve hypothetical qubits have no program representation, so the atom
/// holds vacuously for them.
pub fn satisfies(model: &Model, assertion: &Assertion) -> Result<bool, LogicError> {
    let mut eval = Evaluator::new();
    eval.sat(model, assertion)
}

struct Evaluator {
    /// Registers held by enclosing quantifiers.
    bound_registers: BTreeSet<usize>,
    /// Cache of abstract runs, shared across the whole query.
    runs: HashMap<(Aqs, Term), BTreeSet<(Aqs, Term)>>,
}

impl Evaluator {
    fn new() -> Evaluator {
        Evaluator {
            bound_registers: BTreeSet::new(),
            runs: HashMap::new(),
        }
    }

    fn run(&mut self, aqs: &Aqs, term: &Term) -> Result<BTreeSet<(Aqs, Term)>, LogicError> {
        let key = (aqs.clone(), term.clone());
        if let Some(hit) = self.runs.get(&key) {
            return Ok(hit.clone());
        }
        let result = abstract_semantics(aqs.clone(), term.clone(), DEFAULT_ABSTRACT_BUDGET)?;
        self.runs.insert(key, result.clone());
        Ok(result)
    }

    fn sat(&mut self, model: &Model, assertion: &Assertion) -> Result<bool, LogicError> {
        match assertion {
            Assertion::True => Ok(true),
            Assertion::False => Ok(false),
            Assertion::Entangled(a, b) => {
                let qa = model.qubit_of(&model.interpret(a)?)?;
                let qb = model.qubit_of(&model.interpret(b)?)?;
                Ok(model.qubits_related(qa, qb))
            }
            Assertion::Pure(t) => {
                let q = model.qubit_of(&model.interpret(t)?)?;
                Ok(model.qubit_pure(q))
            }
            Assertion::Equal(a, b) => {
                let va = model.interpret(a)?;
                let vb = model.interpret(b)?;
                Ok(model.values_equal(&va, &vb))
            }
            Assertion::Not(inner) => Ok(!self.sat(model, inner)?),
            Assertion::And(a, b) => Ok(self.sat(model, a)? && self.sat(model, b)?),
            Assertion::Or(a, b) => Ok(self.sat(model, a)? || self.sat(model, b)?),
            Assertion::Implies(a, b) => Ok(!self.sat(model, a)? || self.sat(model, b)?),
            Assertion::Forall(x, body) => {
                for q in qubit_domain(model, &self.bound_registers) {
                    if !self.sat_instance(model, x, q, body)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Assertion::Exists(x, body) => {
                for q in qubit_domain(model, &self.bound_registers) {
                    if self.sat_instance(model, x, q, body)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Assertion::Eval {
                pre,
                fun,
                arg,
                result,
                post,
            } => self.sat_eval(model, pre, fun, arg, result, post),
        }
    }

    fn sat_instance(
        &mut self,
        model: &Model,
        x: &str,
        q: QubitValue,
        body: &Assertion,
    ) -> Result<bool, LogicError> {
        let extended = model.extend(x, AbstractValue::Qubit(q))?;
        let held = match q {
            QubitValue::Register(i) => {
                self.bound_registers.insert(i);
                Some(i)
            }
            QubitValue::Hypothetical { .. } => None,
        };
        let verdict = self.sat(&extended, body);
        if let Some(i) = held {
            self.bound_registers.remove(&i);
        }
        verdict
    }

    fn sat_eval(
        &mut self,
        model: &Model,
        pre: &Assertion,
        fun: &LogicTerm,
        arg: &LogicTerm,
        result: &str,
        post: &Assertion,
    ) -> Result<bool, LogicError> {
        if !self.sat(model, pre)? {
            return Ok(true);
        }
        let fun_value = model.interpret(fun)?;
        let AbstractValue::Closure(fun_term) = fun_value else {
            return Err(LogicError::NonExecutableFunction(fun.to_string()));
        };
        let arg_value = model.interpret(arg)?;
        let Some(arg_term) = arg_value.representative() else {
            return Ok(true);
        };
        let application = Term::app(fun_term, arg_term);
        for (aqs_after, value_term) in self.run(&model.aqs, &application)? {
            let value = AbstractValue::of_value_term(&value_term)?;
            let after = model.with_aqs(aqs_after).extend(result, value)?;
            if !self.sat(&after, post)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

// ---------------------------------------------------------------------------
// Entailment
// ---------------------------------------------------------------------------

/// Whether one assertion entails another over every model of bounded size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Entailment {
    Valid,
    Invalid(Box<CounterModel>),
}

impl Entailment {
    pub fn is_valid(&self) -> bool {
        matches!(self, Entailment::Valid)
    }
}

/// A model refuting an entailment: the premise holds and the conclusion
/// fails under the recorded truth values for the triple atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterModel {
    pub aqs: Aqs,
    pub interp: BTreeMap<String, AbstractValue>,
    /// Truth values chosen for triple atoms, keyed by a canonical rendering.
    pub atoms: BTreeMap<String, bool>,
}

impl fmt::Display for CounterModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.aqs)?;
        for (name, value) in &self.interp {
            write!(f, "\n{name} = {value}")?;
        }
        for (atom, truth) in &self.atoms {
            write!(f, "\n[{atom}] = {truth}")?;
        }
        Ok(())
    }
}

/// How many registers the model search for `entails` uses: enough for every
/// register the assertions mention directly, plus room for two fresh
/// registers per qubit slot a free name could be bound to, clamped to the
/// cap.
pub fn entailment_register_count(
    ctx: &AssertionContext,
    premise: &Assertion,
    conclusion: &Assertion,
) -> usize {
    let mentioned = premise.max_qubit_index().max(conclusion.max_qubit_index());
    let mut slots = 0;
    let mut free = premise.free_names();
    free.extend(conclusion.free_names());
    for name in free {
        if let Some(ty) = ctx.names.get(&name) {
            slots += qbit_slots(ty);
        }
    }
    mentioned.max(2 * slots).clamp(1, ENTAILMENT_REGISTER_CAP)
}

fn qbit_slots(ty: &Type) -> usize {
    match ty {
        Type::Qbit => 1,
        Type::Product(a, b) => qbit_slots(a) + qbit_slots(b),
        Type::Bit | Type::Arrow(..) => 0,
    }
}

/// Decides `premise |= conclusion` by searching for a counter-model over
/// all separability abstractions of an automatically chosen register count
/// and all interpretations of the free names.  Names whose type involves a
/// function are not given values; they stay opaque and may only appear
/// inside triple atoms, which are treated as uninterpreted propositions
/// identified up to renaming of bound names.
pub fn entails(
    ctx: &AssertionContext,
    premise: &Assertion,
    conclusion: &Assertion,
) -> Result<Entailment, LogicError> {
    entails_at(
        ctx,
        premise,
        conclusion,
        entailment_register_count(ctx, premise, conclusion),
    )
}

/// `entails` at an explicit register count.
pub fn entails_at(
    ctx: &AssertionContext,
    premise: &Assertion,
    conclusion: &Assertion,
    registers: usize,
) -> Result<Entailment, LogicError> {
    if registers == 0 || registers > ENTAILMENT_REGISTER_CAP {
        return Err(LogicError::RegisterCount(registers));
    }
    // Conjunction elimination is valid in every model: when each conjunct of
    // the conclusion already appears verbatim among the premise's conjuncts,
    // skip the model search entirely.
    let have: BTreeSet<&Assertion> = premise.conjuncts().into_iter().collect();
    if conclusion
        .conjuncts()
        .iter()
        .all(|c| matches!(c, Assertion::True) || have.contains(*c))
    {
        return Ok(Entailment::Valid);
    }
    let mut free = premise.free_names();
    free.extend(conclusion.free_names());
    let mut assignable: Vec<(String, Vec<AbstractValue>)> = Vec::new();
    for name in &free {
        let ty = ctx
            .names
            .get(name)
            .ok_or_else(|| LogicError::UnboundName(name.clone()))?;
        if let Some(choices) = enumerable_values(ty, registers) {
            assignable.push((name.clone(), choices));
        }
    }

    for aqs in Aqs::enumerate(registers) {
        let base = Model::new(aqs);
        let mut cursor = vec![0usize; assignable.len()];
        loop {
            let mut model = base.clone();
            for (slot, (name, choices)) in assignable.iter().enumerate() {
                model = model.extend(name, choices[cursor[slot]].clone())?;
            }
            if let Some(atoms) = refute_in_model(&model, premise, conclusion)? {
                return Ok(Entailment::Invalid(Box::new(CounterModel {
                    aqs: model.aqs,
                    interp: model.interp,
                    atoms,
                })));
            }
            // Advance the odometer over value assignments.
            let mut slot = 0;
            loop {
                if slot == assignable.len() {
                    break;
                }
                cursor[slot] += 1;
                if cursor[slot] < assignable[slot].1.len() {
                    break;
                }
                cursor[slot] = 0;
                slot += 1;
            }
            if slot == assignable.len() {
                break;
            }
        }
    }
    Ok(Entailment::Valid)
}

/// All values a name of the given type can take over `registers` qubit
/// registers, or `None` when the type involves a function and the name must
/// stay opaque.
fn enumerable_values(ty: &Type, registers: usize) -> Option<Vec<AbstractValue>> {
    match ty {
        Type::Bit => Some(vec![AbstractValue::Bit(false), AbstractValue::Bit(true)]),
        Type::Qbit => Some(
            (1..=registers)
                .map(|i| AbstractValue::Qubit(QubitValue::Register(i)))
                .collect(),
        ),
        Type::Product(a, b) => {
            let left = enumerable_values(a, registers)?;
            let right = enumerable_values(b, registers)?;
            let mut out = Vec::with_capacity(left.len() * right.len());
            for l in &left {
                for r in &right {
                    out.push(AbstractValue::pair(l.clone(), r.clone()));
                }
            }
            Some(out)
        }
        Type::Arrow(..) => None,
    }
}

// --- propositional core -----------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Prop {
    Const(bool),
    Var(usize),
    Not(Box<Prop>),
    And(Box<Prop>, Box<Prop>),
    Or(Box<Prop>, Box<Prop>),
}

impl Prop {
    fn not(p: Prop) -> Prop {
        match p {
            Prop::Const(b) => Prop::Const(!b),
            Prop::Not(inner) => *inner,
            other => Prop::Not(Box::new(other)),
        }
    }

    fn and(a: Prop, b: Prop) -> Prop {
        match (a, b) {
            (Prop::Const(false), _) | (_, Prop::Const(false)) => Prop::Const(false),
            (Prop::Const(true), other) | (other, Prop::Const(true)) => other,
            (a, b) => Prop::And(Box::new(a), Box::new(b)),
        }
    }

    fn or(a: Prop, b: Prop) -> Prop {
        match (a, b) {
            (Prop::Const(true), _) | (_, Prop::Const(true)) => Prop::Const(true),
            (Prop::Const(false), other) | (other, Prop::Const(false)) => other,
            (a, b) => Prop::Or(Box::new(a), Box::new(b)),
        }
    }

    /// Literals forced true or false along the conjunction spine.  Returns
    /// `None` if the spine forces a literal both ways (contradiction).
    fn forced(&self, out: &mut BTreeMap<usize, bool>) -> Option<()> {
        match self {
            Prop::Var(v) => {
                if out.insert(*v, true) == Some(false) {
                    return None;
                }
                Some(())
            }
            Prop::Not(inner) => {
                if let Prop::Var(v) = **inner {
                    if out.insert(v, false) == Some(true) {
                        return None;
                    }
                }
                Some(())
            }
            Prop::And(a, b) => {
                a.forced(out)?;
                b.forced(out)
            }
            _ => Some(()),
        }
    }

    /// Substitutes an assignment for variables and folds constants.
    fn apply(&self, assignment: &BTreeMap<usize, bool>) -> Prop {
        match self {
            Prop::Const(b) => Prop::Const(*b),
            Prop::Var(v) => match assignment.get(v) {
                Some(b) => Prop::Const(*b),
                None => Prop::Var(*v),
            },
            Prop::Not(inner) => Prop::not(inner.apply(assignment)),
            Prop::And(a, b) => Prop::and(a.apply(assignment), b.apply(assignment)),
            Prop::Or(a, b) => Prop::or(a.apply(assignment), b.apply(assignment)),
        }
    }

    fn first_var(&self) -> Option<usize> {
        match self {
            Prop::Const(_) => None,
            Prop::Var(v) => Some(*v),
            Prop::Not(inner) => inner.first_var(),
            Prop::And(a, b) | Prop::Or(a, b) => a.first_var().or_else(|| b.first_var()),
        }
    }
}

/// Searches for a satisfying assignment of `prop`, preferring unit
/// propagation along conjunction spines and falling back to case splits.
fn sat_search(
    prop: Prop,
    assignment: &mut BTreeMap<usize, bool>,
    budget: &mut usize,
) -> Result<Option<BTreeMap<usize, bool>>, LogicError> {
    let mut current = prop;
    loop {
        let mut units = BTreeMap::new();
        if current.forced(&mut units).is_none() {
            return Ok(None);
        }
        units.retain(|v, _| !assignment.contains_key(v));
        if units.is_empty() {
            break;
        }
        assignment.extend(units.iter().map(|(v, b)| (*v, *b)));
        current = current.apply(&units);
    }
    match current {
        Prop::Const(true) => Ok(Some(assignment.clone())),
        Prop::Const(false) => Ok(None),
        _ => {
            let var = current.first_var().expect("non-constant formula has a variable");
            for value in [true, false] {
                if *budget == 0 {
                    return Err(LogicError::BranchBudget(
                        DEFAULT_ENTAILMENT_BRANCH_BUDGET,
                    ));
                }
                *budget -= 1;
                let mut unit = BTreeMap::new();
                unit.insert(var, value);
                assignment.insert(var, value);
                let narrowed = current.apply(&unit);
                if let Some(found) = sat_search(narrowed, assignment, budget)? {
                    return Ok(Some(found));
                }
                assignment.remove(&var);
            }
            Ok(None)
        }
    }
}

/// Tries to refute `premise |= conclusion` in one model: compiles both
/// assertions to propositional formulas whose variables are the triple
/// atoms, then searches for truth values making the premise true and the
/// conclusion false.
fn refute_in_model(
    model: &Model,
    premise: &Assertion,
    conclusion: &Assertion,
) -> Result<Option<BTreeMap<String, bool>>, LogicError> {
    let mut compiler = Compiler::new();
    let p = compiler.compile(model, premise)?;
    let c = compiler.compile(model, conclusion)?;
    let formula = Prop::and(p, Prop::not(c));
    let mut assignment = BTreeMap::new();
    let mut budget = DEFAULT_ENTAILMENT_BRANCH_BUDGET;
    match sat_search(formula, &mut assignment, &mut budget)? {
        None => Ok(None),
        Some(found) => {
            let mut atoms = BTreeMap::new();
            for (var, truth) in found {
                atoms.insert(compiler.keys[var].clone(), truth);
            }
            Ok(Some(atoms))
        }
    }
}

/// Compiles assertions to propositional formulas in a fixed model.  All
/// atoms over values are decided immediately; quantifiers are expanded over
/// the same domain the satisfaction relation uses; triple atoms become
/// propositional variables keyed by a canonical rendering in which bound
/// names are numbered and interpreted names are replaced by their values,
/// so that atoms equal up to renaming share a variable.
struct Compiler {
    keys: Vec<String>,
    key_ids: BTreeMap<String, usize>,
    bound_registers: BTreeSet<usize>,
}

impl Compiler {
    fn new() -> Compiler {
        Compiler {
            keys: Vec::new(),
            key_ids: BTreeMap::new(),
            bound_registers: BTreeSet::new(),
        }
    }

    fn var_for(&mut self, key: String) -> usize {
        if let Some(id) = self.key_ids.get(&key) {
            return *id;
        }
        let id = self.keys.len();
        self.keys.push(key.clone());
        self.key_ids.insert(key, id);
        id
    }

    fn compile(&mut self, model: &Model, assertion: &Assertion) -> Result<Prop, LogicError> {
        match assertion {
            Assertion::True => Ok(Prop::Const(true)),
            Assertion::False => Ok(Prop::Const(false)),
            Assertion::Entangled(a, b) => {
                let qa = model.qubit_of(&model.interpret(a)?)?;
                let qb = model.qubit_of(&model.interpret(b)?)?;
                Ok(Prop::Const(model.qubits_related(qa, qb)))
            }
            Assertion::Pure(t) => {
                let q = model.qubit_of(&model.interpret(t)?)?;
                Ok(Prop::Const(model.qubit_pure(q)))
            }
            Assertion::Equal(a, b) => {
                let va = model.interpret(a)?;
                let vb = model.interpret(b)?;
                Ok(Prop::Const(model.values_equal(&va, &vb)))
            }
            Assertion::Not(inner) => Ok(Prop::not(self.compile(model, inner)?)),
            Assertion::And(a, b) => Ok(Prop::and(
                self.compile(model, a)?,
                self.compile(model, b)?,
            )),
            Assertion::Or(a, b) => Ok(Prop::or(
                self.compile(model, a)?,
                self.compile(model, b)?,
            )),
            Assertion::Implies(a, b) => {
                let pa = self.compile(model, a)?;
                let pb = self.compile(model, b)?;
                Ok(Prop::or(Prop::not(pa), pb))
            }
            Assertion::Forall(x, body) => {
                let mut acc = Prop::Const(true);
                for q in qubit_domain(model, &self.bound_registers) {
                    acc = Prop::and(acc, self.compile_instance(model, x, q, body)?);
                }
                Ok(acc)
            }
            Assertion::Exists(x, body) => {
                let mut acc = Prop::Const(false);
                for q in qubit_domain(model, &self.bound_registers) {
                    acc = Prop::or(acc, self.compile_instance(model, x, q, body)?);
                }
                Ok(acc)
            }
            Assertion::Eval {
                pre,
                fun,
                arg,
                result,
                post,
            } => {
                let key = atom_key(model, pre, fun, arg, result, post);
                Ok(Prop::Var(self.var_for(key)))
            }
        }
    }

    fn compile_instance(
        &mut self,
        model: &Model,
        x: &str,
        q: QubitValue,
        body: &Assertion,
    ) -> Result<Prop, LogicError> {
        let extended = model.extend(x, AbstractValue::Qubit(q))?;
        let held = match q {
            QubitValue::Register(i) => {
                self.bound_registers.insert(i);
                Some(i)
            }
            QubitValue::Hypothetical { .. } => None,
        };
        let compiled = self.compile(&extended, body);
        if let Some(i) = held {
            self.bound_registers.remove(&i);
        }
        compiled
    }
}

/// Canonical rendering of a triple atom in a model: bound names become
/// de-Bruijn-style indices, names with values are replaced by a rendering
/// of the value, and opaque names keep their spelling.  Two atoms that
/// differ only in bound-name spelling, or in which interpreted name denotes
/// a value, render identically.
fn atom_key(
    model: &Model,
    pre: &Assertion,
    fun: &LogicTerm,
    arg: &LogicTerm,
    result: &str,
    post: &Assertion,
) -> String {
    let mut ser = KeyWriter {
        model,
        binders: Vec::new(),
        out: String::new(),
    };
    ser.out.push_str("{");
    ser.assertion(pre);
    ser.out.push_str("} ");
    ser.term(fun);
    ser.out.push(' ');
    ser.term(arg);
    ser.out.push_str(" = ");
    ser.binders.push(result.to_string());
    ser.out.push_str("b0 {");
    ser.assertion(post);
    ser.binders.pop();
    ser.out.push('}');
    ser.out
}

struct KeyWriter<'a> {
    model: &'a Model,
    binders: Vec<String>,
    out: String,
}

impl KeyWriter<'_> {
    fn name(&mut self, name: &str) {
        if let Some(pos) = self.binders.iter().rposition(|b| b == name) {
            let index = self.binders.len() - 1 - pos;
            self.out.push_str(&format!("b{index}"));
        } else if let Some(value) = self.model.interp.get(name) {
            self.value(value);
        } else {
            self.out.push('?');
            self.out.push_str(name);
        }
    }

    fn value(&mut self, value: &AbstractValue) {
        match value {
            AbstractValue::Bit(b) => self.out.push_str(if *b { "#t" } else { "#f" }),
            AbstractValue::Qubit(QubitValue::Register(i)) => {
                self.out.push_str(&format!("R{i}"));
            }
            AbstractValue::Qubit(QubitValue::Hypothetical { class, base }) => {
                self.out.push_str(&format!("H{class}.{base}"));
            }
            AbstractValue::Pair(a, b) => {
                self.out.push('(');
                self.value(a);
                self.out.push(',');
                self.value(b);
                self.out.push(')');
            }
            AbstractValue::Closure(t) => {
                self.out.push_str(&format!("\\{t}"));
            }
        }
    }

    fn term(&mut self, term: &LogicTerm) {
        match term {
            LogicTerm::Anchor(name) => self.name(name),
            LogicTerm::Qubit(i) => self.out.push_str(&format!("R{i}")),
            LogicTerm::Bool(b) => self.out.push_str(if *b { "#t" } else { "#f" }),
            LogicTerm::Pair(a, b) => {
                self.out.push('(');
                self.term(a);
                self.out.push(',');
                self.term(b);
                self.out.push(')');
            }
            LogicTerm::Proj(side, inner) => {
                self.out.push_str(match side {
                    ProjSide::Fst => "fst ",
                    ProjSide::Snd => "snd ",
                });
                self.term(inner);
            }
        }
    }

    fn assertion(&mut self, assertion: &Assertion) {
        match assertion {
            Assertion::True => self.out.push('T'),
            Assertion::False => self.out.push('F'),
            Assertion::Entangled(a, b) => {
                self.out.push_str("~(");
                self.term(a);
                self.out.push(',');
                self.term(b);
                self.out.push(')');
            }
            Assertion::Pure(t) => {
                self.out.push_str("P(");
                self.term(t);
                self.out.push(')');
            }
            Assertion::Equal(a, b) => {
                self.out.push_str("=(");
                self.term(a);
                self.out.push(',');
                self.term(b);
                self.out.push(')');
            }
            Assertion::Not(inner) => {
                self.out.push_str("!(");
                self.assertion(inner);
                self.out.push(')');
            }
            Assertion::And(a, b) => {
                self.out.push_str("&(");
                self.assertion(a);
                self.out.push(',');
                self.assertion(b);
                self.out.push(')');
            }
            Assertion::Or(a, b) => {
                self.out.push_str("|(");
                self.assertion(a);
                self.out.push(',');
                self.assertion(b);
                self.out.push(')');
            }
            Assertion::Implies(a, b) => {
                self.out.push_str(">(");
                self.assertion(a);
                self.out.push(',');
                self.assertion(b);
                self.out.push(')');
            }
            Assertion::Forall(x, body) => {
                self.out.push_str("A.");
                self.binders.push(x.clone());
                self.assertion(body);
                self.binders.pop();
            }
            Assertion::Exists(x, body) => {
                self.out.push_str("E.");
                self.binders.push(x.clone());
                self.assertion(body);
                self.binders.pop();
            }
            Assertion::Eval {
                pre,
                fun,
                arg,
                result,
                post,
            } => {
                self.out.push_str("{");
                self.assertion(pre);
                self.out.push_str("} ");
                self.term(fun);
                self.out.push(' ');
                self.term(arg);
                self.out.push_str(" = ");
                self.binders.push(result.clone());
                self.out.push_str("b0 {");
                self.assertion(post);
                self.binders.pop();
                self.out.push('}');
            }
        }
    }
}
