//! Abstract syntax for the linear quantum lambda calculus: types, terms,
//! primitive operations, and the supporting machinery (free variables,
//! capture-avoiding substitution, alpha-equivalence, pretty-printing).

use std::collections::BTreeSet;
use std::fmt;

/// Built-in quantum operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Prim {
    /// Single-qubit measurement in the computational basis.
    Meas,
    /// Controlled-not over a pair of qubits (first component is the control).
    Cnot,
    /// Hadamard gate.
    Hadamard,
    /// Phase gate: diag(1, e^{i*pi/4}).
    Phase,
}

impl Prim {
    /// The type of the primitive as a function constant.
    pub fn ty(self) -> Type {
        match self {
            Prim::Meas => Type::arrow(Type::Qbit, Type::Bit),
            Prim::Cnot => Type::arrow(
                Type::product(Type::Qbit, Type::Qbit),
                Type::product(Type::Qbit, Type::Qbit),
            ),
            Prim::Hadamard => Type::arrow(Type::Qbit, Type::Qbit),
            Prim::Phase => Type::arrow(Type::Qbit, Type::Qbit),
        }
    }

    /// Keyword used in the concrete syntax.
    pub fn keyword(self) -> &'static str {
        match self {
            Prim::Meas => "meas",
            Prim::Cnot => "cnot",
            Prim::Hadamard => "H",
            Prim::Phase => "phase",
        }
    }
}

impl fmt::Display for Prim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Which component a projection extracts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProjSide {
    Fst,
    Snd,
}

impl ProjSide {
    pub fn keyword(self) -> &'static str {
        match self {
            ProjSide::Fst => "pi1",
            ProjSide::Snd => "pi2",
        }
    }
}

/// Types: booleans, qubits, functions, and pairs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Type {
    Bit,
    Qbit,
    Arrow(Box<Type>, Box<Type>),
    Product(Box<Type>, Box<Type>),
}

impl Type {
    pub fn arrow(from: Type, to: Type) -> Type {
        Type::Arrow(Box::new(from), Box::new(to))
    }

    pub fn product(left: Type, right: Type) -> Type {
        Type::Product(Box::new(left), Box::new(right))
    }

    /// Whether any qubit component occurs anywhere in the type. Types that
    /// contain qubits are subject to the linear usage discipline.
    pub fn contains_qbit(&self) -> bool {
        match self {
            Type::Bit => false,
            Type::Qbit => true,
            Type::Arrow(a, b) | Type::Product(a, b) => a.contains_qbit() || b.contains_qbit(),
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
        // Precedence: 0 = arrow (right-assoc), 1 = product (right-assoc), 2 = atom.
        match self {
            Type::Bit => f.write_str("bit"),
            Type::Qbit => f.write_str("qbit"),
            Type::Arrow(a, b) => {
                let needs_parens = prec > 0;
                if needs_parens {
                    f.write_str("(")?;
                }
                a.fmt_prec(f, 1)?;
                f.write_str(" -> ")?;
                b.fmt_prec(f, 0)?;
                if needs_parens {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Type::Product(a, b) => {
                let needs_parens = prec > 1;
                if needs_parens {
                    f.write_str("(")?;
                }
                a.fmt_prec(f, 2)?;
                f.write_str(" * ")?;
                b.fmt_prec(f, 1)?;
                if needs_parens {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// Terms of the calculus.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    /// A variable.
    Var(String),
    /// A named qubit of the global register, written `q1`, `q2`, ...
    /// Indices are 1-based.
    QubitRef(usize),
    /// Boolean literal.
    BoolLit(bool),
    /// Primitive operation used as a constant.
    Const(Prim),
    /// Lambda abstraction with an annotated parameter.
    Lambda {
        param: String,
        param_ty: Type,
        body: Box<Term>,
    },
    /// Application.
    App(Box<Term>, Box<Term>),
    /// Pair constructor.
    Pair(Box<Term>, Box<Term>),
    /// Projection out of a pair.
    Proj(ProjSide, Box<Term>),
    /// Conditional on a boolean guard.
    If {
        guard: Box<Term>,
        then_branch: Box<Term>,
        else_branch: Box<Term>,
    },
    /// Pair destructor binding both components at once.
    LetPair {
        left: String,
        right: String,
        bound: Box<Term>,
        body: Box<Term>,
    },
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn lambda(param: impl Into<String>, param_ty: Type, body: Term) -> Term {
        Term::Lambda {
            param: param.into(),
            param_ty,
            body: Box::new(body),
        }
    }

    pub fn app(fun: Term, arg: Term) -> Term {
        Term::App(Box::new(fun), Box::new(arg))
    }

    pub fn pair(left: Term, right: Term) -> Term {
        Term::Pair(Box::new(left), Box::new(right))
    }

    pub fn proj(side: ProjSide, inner: Term) -> Term {
        Term::Proj(side, Box::new(inner))
    }

    pub fn ite(guard: Term, then_branch: Term, else_branch: Term) -> Term {
        Term::If {
            guard: Box::new(guard),
            then_branch: Box::new(then_branch),
            else_branch: Box::new(else_branch),
        }
    }

    pub fn let_pair(
        left: impl Into<String>,
        right: impl Into<String>,
        bound: Term,
        body: Term,
    ) -> Term {
        Term::LetPair {
            left: left.into(),
            right: right.into(),
            bound: Box::new(bound),
            body: Box::new(body),
        }
    }

    /// Free term variables.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(x) => {
                if !bound.iter().any(|b| b == x) {
                    out.insert(x.clone());
                }
            }
            Term::QubitRef(_) | Term::BoolLit(_) | Term::Const(_) => {}
            Term::Lambda { param, body, .. } => {
                bound.push(param.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            Term::App(a, b) | Term::Pair(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Term::Proj(_, m) => m.collect_free(bound, out),
            Term::If {
                guard,
                then_branch,
                else_branch,
            } => {
                guard.collect_free(bound, out);
                then_branch.collect_free(bound, out);
                else_branch.collect_free(bound, out);
            }
            Term::LetPair {
                left,
                right,
                bound: b,
                body,
            } => {
                b.collect_free(bound, out);
                bound.push(left.clone());
                bound.push(right.clone());
                body.collect_free(bound, out);
                bound.pop();
                bound.pop();
            }
        }
    }

    /// All qubit constants occurring in the term.
    pub fn qubit_refs(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.walk(&mut |t| {
            if let Term::QubitRef(i) = t {
                out.insert(*i);
            }
        });
        out
    }

    /// Largest qubit index mentioned, or 0 if none occur.
    pub fn max_qubit_index(&self) -> usize {
        self.qubit_refs().into_iter().max().unwrap_or(0)
    }

    fn walk(&self, visit: &mut impl FnMut(&Term)) {
        visit(self);
        match self {
            Term::Var(_) | Term::QubitRef(_) | Term::BoolLit(_) | Term::Const(_) => {}
            Term::Lambda { body, .. } => body.walk(visit),
            Term::App(a, b) | Term::Pair(a, b) => {
                a.walk(visit);
                b.walk(visit);
            }
            Term::Proj(_, m) => m.walk(visit),
            Term::If {
                guard,
                then_branch,
                else_branch,
            } => {
                guard.walk(visit);
                then_branch.walk(visit);
                else_branch.walk(visit);
            }
            Term::LetPair { bound, body, .. } => {
                bound.walk(visit);
                body.walk(visit);
            }
        }
    }

    /// Capture-avoiding substitution of `replacement` for free occurrences of
    /// `name`. Binders that would capture free variables of the replacement
    /// are renamed first.
    pub fn subst(&self, name: &str, replacement: &Term) -> Term {
        match self {
            Term::Var(x) => {
                if x == name {
                    replacement.clone()
                } else {
                    self.clone()
                }
            }
            Term::QubitRef(_) | Term::BoolLit(_) | Term::Const(_) => self.clone(),
            Term::Lambda {
                param,
                param_ty,
                body,
            } => {
                if param == name {
                    self.clone()
                } else if replacement.free_vars().contains(param) && body.free_vars().contains(name)
                {
                    let fresh = fresh_name(param, &[body, replacement]);
                    let renamed = body.subst(param, &Term::Var(fresh.clone()));
                    Term::Lambda {
                        param: fresh,
                        param_ty: param_ty.clone(),
                        body: Box::new(renamed.subst(name, replacement)),
                    }
                } else {
                    Term::Lambda {
                        param: param.clone(),
                        param_ty: param_ty.clone(),
                        body: Box::new(body.subst(name, replacement)),
                    }
                }
            }
            Term::App(a, b) => Term::app(a.subst(name, replacement), b.subst(name, replacement)),
            Term::Pair(a, b) => Term::pair(a.subst(name, replacement), b.subst(name, replacement)),
            Term::Proj(side, m) => Term::proj(*side, m.subst(name, replacement)),
            Term::If {
                guard,
                then_branch,
                else_branch,
            } => Term::ite(
                guard.subst(name, replacement),
                then_branch.subst(name, replacement),
                else_branch.subst(name, replacement),
            ),
            Term::LetPair {
                left,
                right,
                bound,
                body,
            } => {
                let new_bound = bound.subst(name, replacement);
                if left == name || right == name {
                    return Term::LetPair {
                        left: left.clone(),
                        right: right.clone(),
                        bound: Box::new(new_bound),
                        body: body.clone(),
                    };
                }
                let body_mentions = body.free_vars().contains(name);
                if !body_mentions {
                    return Term::LetPair {
                        left: left.clone(),
                        right: right.clone(),
                        bound: Box::new(new_bound),
                        body: body.clone(),
                    };
                }
                let repl_free = replacement.free_vars();
                let mut left_name = left.clone();
                let mut right_name = right.clone();
                let mut new_body = body.as_ref().clone();
                if repl_free.contains(&left_name) {
                    let fresh = fresh_name(&left_name, &[&new_body, replacement]);
                    new_body = new_body.subst(&left_name, &Term::Var(fresh.clone()));
                    left_name = fresh;
                }
                if repl_free.contains(&right_name) {
                    let fresh = fresh_name(&right_name, &[&new_body, replacement]);
                    new_body = new_body.subst(&right_name, &Term::Var(fresh.clone()));
                    right_name = fresh;
                }
                Term::LetPair {
                    left: left_name,
                    right: right_name,
                    bound: Box::new(new_bound),
                    body: Box::new(new_body.subst(name, replacement)),
                }
            }
        }
    }

    /// Alpha-equivalence: equality up to consistent renaming of bound
    /// variables.
    pub fn alpha_eq(&self, other: &Term) -> bool {
        fn go(a: &Term, b: &Term, env: &mut Vec<(String, String)>) -> bool {
            match (a, b) {
                (Term::Var(x), Term::Var(y)) => {
                    // Innermost binding wins; both must resolve to the same slot.
                    for (xa, xb) in env.iter().rev() {
                        let hit_a = xa == x;
                        let hit_b = xb == y;
                        if hit_a || hit_b {
                            return hit_a && hit_b;
                        }
                    }
                    x == y
                }
                (Term::QubitRef(i), Term::QubitRef(j)) => i == j,
                (Term::BoolLit(p), Term::BoolLit(q)) => p == q,
                (Term::Const(p), Term::Const(q)) => p == q,
                (
                    Term::Lambda {
                        param: pa,
                        param_ty: ta,
                        body: ba,
                    },
                    Term::Lambda {
                        param: pb,
                        param_ty: tb,
                        body: bb,
                    },
                ) => {
                    if ta != tb {
                        return false;
                    }
                    env.push((pa.clone(), pb.clone()));
                    let ok = go(ba, bb, env);
                    env.pop();
                    ok
                }
                (Term::App(fa, aa), Term::App(fb, ab)) => go(fa, fb, env) && go(aa, ab, env),
                (Term::Pair(la, ra), Term::Pair(lb, rb)) => go(la, lb, env) && go(ra, rb, env),
                (Term::Proj(sa, ma), Term::Proj(sb, mb)) => sa == sb && go(ma, mb, env),
                (
                    Term::If {
                        guard: ga,
                        then_branch: ta,
                        else_branch: ea,
                    },
                    Term::If {
                        guard: gb,
                        then_branch: tb,
                        else_branch: eb,
                    },
                ) => go(ga, gb, env) && go(ta, tb, env) && go(ea, eb, env),
                (
                    Term::LetPair {
                        left: la,
                        right: ra,
                        bound: ba,
                        body: ma,
                    },
                    Term::LetPair {
                        left: lb,
                        right: rb,
                        bound: bb,
                        body: mb,
                    },
                ) => {
                    if !go(ba, bb, env) {
                        return false;
                    }
                    env.push((la.clone(), lb.clone()));
                    env.push((ra.clone(), rb.clone()));
                    let ok = go(ma, mb, env);
                    env.pop();
                    env.pop();
                    ok
                }
                _ => false,
            }
        }
        go(self, other, &mut Vec::new())
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
        // Precedence: 0 = full term (binders and `if`/`let` allowed bare),
        // 1 = application chain, 2 = atom.
        match self {
            Term::Var(x) => f.write_str(x),
            Term::QubitRef(i) => write!(f, "q{i}"),
            Term::BoolLit(true) => f.write_str("true"),
            Term::BoolLit(false) => f.write_str("false"),
            Term::Const(p) => write!(f, "{p}"),
            Term::Pair(a, b) => {
                f.write_str("<")?;
                a.fmt_prec(f, 0)?;
                f.write_str(", ")?;
                b.fmt_prec(f, 0)?;
                f.write_str(">")
            }
            Term::App(fun, arg) => {
                let needs_parens = prec > 1;
                if needs_parens {
                    f.write_str("(")?;
                }
                fun.fmt_prec(f, 1)?;
                f.write_str(" ")?;
                arg.fmt_prec(f, 2)?;
                if needs_parens {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Term::Proj(side, m) => {
                let needs_parens = prec > 1;
                if needs_parens {
                    f.write_str("(")?;
                }
                f.write_str(side.keyword())?;
                f.write_str(" ")?;
                m.fmt_prec(f, 2)?;
                if needs_parens {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Term::Lambda {
                param,
                param_ty,
                body,
            } => {
                let needs_parens = prec > 0;
                if needs_parens {
                    f.write_str("(")?;
                }
                write!(f, "\\{param}:{param_ty}. ")?;
                body.fmt_prec(f, 0)?;
                if needs_parens {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Term::If {
                guard,
                then_branch,
                else_branch,
            } => {
                let needs_parens = prec > 0;
                if needs_parens {
                    f.write_str("(")?;
                }
                f.write_str("if ")?;
                guard.fmt_prec(f, 0)?;
                f.write_str(" then ")?;
                then_branch.fmt_prec(f, 0)?;
                f.write_str(" else ")?;
                else_branch.fmt_prec(f, 0)?;
                if needs_parens {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Term::LetPair {
                left,
                right,
                bound,
                body,
            } => {
                let needs_parens = prec > 0;
                if needs_parens {
                    f.write_str("(")?;
                }
                write!(f, "let <{left}, {right}> = ")?;
                bound.fmt_prec(f, 0)?;
                f.write_str(" in ")?;
                body.fmt_prec(f, 0)?;
                if needs_parens {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// Pick a variable name based on `base` that is free in none of `avoid`.
fn fresh_name(base: &str, avoid: &[&Term]) -> String {
    let taken: BTreeSet<String> = avoid.iter().flat_map(|t| t.free_vars()).collect();
    let stem: String = base.trim_end_matches(|c: char| c.is_ascii_digit()).into();
    let stem = if stem.is_empty() { "x".to_string() } else { stem };
    for i in 1.. {
        let candidate = format!("{stem}{i}");
        if !taken.contains(&candidate) && candidate != base {
            return candidate;
        }
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type_display_respects_precedence() {
        let t = Type::arrow(
            Type::product(Type::Qbit, Type::Qbit),
            Type::product(Type::Qbit, Type::Qbit),
        );
        assert_eq!(t.to_string(), "qbit * qbit -> qbit * qbit");

        let nested = Type::arrow(Type::arrow(Type::Qbit, Type::Bit), Type::Bit);
        assert_eq!(nested.to_string(), "(qbit -> bit) -> bit");

        let left_product = Type::product(Type::product(Type::Qbit, Type::Qbit), Type::Bit);
        assert_eq!(left_product.to_string(), "(qbit * qbit) * bit");

        let right_product = Type::product(Type::Qbit, Type::product(Type::Qbit, Type::Bit));
        assert_eq!(right_product.to_string(), "qbit * qbit * bit");
    }

    #[test]
    fn contains_qbit_looks_through_structure() {
        assert!(!Type::Bit.contains_qbit());
        assert!(Type::Qbit.contains_qbit());
        assert!(Type::arrow(Type::Bit, Type::Qbit).contains_qbit());
        assert!(!Type::product(Type::Bit, Type::Bit).contains_qbit());
    }

    #[test]
    fn free_vars_respects_binders() {
        // \x:qbit. <x, y>
        let t = Term::lambda(
            "x",
            Type::Qbit,
            Term::pair(Term::var("x"), Term::var("y")),
        );
        let fv = t.free_vars();
        assert!(fv.contains("y"));
        assert!(!fv.contains("x"));

        // let <a, b> = p in <a, c>
        let t = Term::let_pair(
            "a",
            "b",
            Term::var("p"),
            Term::pair(Term::var("a"), Term::var("c")),
        );
        let fv = t.free_vars();
        assert_eq!(
            fv.into_iter().collect::<Vec<_>>(),
            vec!["c".to_string(), "p".to_string()]
        );
    }

    #[test]
    fn subst_avoids_capture() {
        // (\y:qbit. <x, y>)[x := y]  must rename the binder.
        let t = Term::lambda(
            "y",
            Type::Qbit,
            Term::pair(Term::var("x"), Term::var("y")),
        );
        let s = t.subst("x", &Term::var("y"));
        match &s {
            Term::Lambda { param, body, .. } => {
                assert_ne!(param, "y");
                match body.as_ref() {
                    Term::Pair(l, r) => {
                        assert_eq!(l.as_ref(), &Term::var("y"));
                        assert_eq!(r.as_ref(), &Term::var(param.clone()));
                    }
                    other => panic!("unexpected body {other:?}"),
                }
            }
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn subst_respects_let_pair_binders() {
        // (let <x, y> = p in <x, z>)[z := x]  must rename the bound x.
        let t = Term::let_pair(
            "x",
            "y",
            Term::var("p"),
            Term::pair(Term::var("x"), Term::var("z")),
        );
        let s = t.subst("z", &Term::var("x"));
        match &s {
            Term::LetPair { left, body, .. } => {
                assert_ne!(left, "x");
                match body.as_ref() {
                    Term::Pair(l, r) => {
                        assert_eq!(l.as_ref(), &Term::var(left.clone()));
                        assert_eq!(r.as_ref(), &Term::var("x"));
                    }
                    other => panic!("unexpected body {other:?}"),
                }
            }
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn alpha_eq_identifies_renamed_binders() {
        let a = Term::lambda("x", Type::Qbit, Term::var("x"));
        let b = Term::lambda("y", Type::Qbit, Term::var("y"));
        assert!(a.alpha_eq(&b));

        let c = Term::lambda("x", Type::Bit, Term::var("x"));
        assert!(!a.alpha_eq(&c), "annotation types must match");

        let free_a = Term::lambda("x", Type::Qbit, Term::var("z"));
        let free_b = Term::lambda("y", Type::Qbit, Term::var("w"));
        assert!(!free_a.alpha_eq(&free_b), "distinct free vars differ");
    }

    #[test]
    fn alpha_eq_tracks_shadowing() {
        // \x. \x. x   vs   \x. \y. x : not equivalent (inner binder differs).
        let a = Term::lambda(
            "x",
            Type::Qbit,
            Term::lambda("x", Type::Qbit, Term::var("x")),
        );
        let b = Term::lambda(
            "x",
            Type::Qbit,
            Term::lambda("y", Type::Qbit, Term::var("x")),
        );
        assert!(!a.alpha_eq(&b));

        // \x. \y. y   vs   \y. \y. y : equivalent.
        let c = Term::lambda(
            "x",
            Type::Qbit,
            Term::lambda("y", Type::Qbit, Term::var("y")),
        );
        let d = Term::lambda(
            "y",
            Type::Qbit,
            Term::lambda("y", Type::Qbit, Term::var("y")),
        );
        assert!(c.alpha_eq(&d));
    }

    #[test]
    fn term_display_matches_expected_layout() {
        let bell = Term::app(
            Term::Const(Prim::Cnot),
            Term::pair(
                Term::app(Term::Const(Prim::Hadamard), Term::QubitRef(1)),
                Term::QubitRef(2),
            ),
        );
        assert_eq!(bell.to_string(), "cnot <H q1, q2>");

        let nested_app = Term::app(
            Term::var("f"),
            Term::app(Term::var("g"), Term::var("x")),
        );
        assert_eq!(nested_app.to_string(), "f (g x)");

        let lam_in_app = Term::app(
            Term::lambda("x", Type::Qbit, Term::var("x")),
            Term::QubitRef(1),
        );
        assert_eq!(lam_in_app.to_string(), "(\\x:qbit. x) q1");

        let proj = Term::app(
            Term::var("f"),
            Term::proj(ProjSide::Fst, Term::var("p")),
        );
        assert_eq!(proj.to_string(), "f (pi1 p)");

        let proj_head = Term::app(Term::proj(ProjSide::Fst, Term::var("p")), Term::var("x"));
        assert_eq!(proj_head.to_string(), "pi1 p x");
    }

    #[test]
    fn qubit_refs_and_max_index() {
        let t = Term::pair(Term::QubitRef(3), Term::pair(Term::QubitRef(1), Term::var("x")));
        assert_eq!(t.qubit_refs().into_iter().collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(t.max_qubit_index(), 3);
        assert_eq!(Term::var("x").max_qubit_index(), 0);
    }
}
