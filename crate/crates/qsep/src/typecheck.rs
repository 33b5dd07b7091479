//! The linear type system.
//!
//! Variables whose type mentions `qbit` are linear: they must be used
//! exactly once. Other variables are unrestricted. Qubit constants
//! (`q1`, `q2`, ...) refer to the shared global register and are not
//! subject to linearity — `<q1, q1>` is well-typed.
//!
//! The two branches of an `if` must consume the same linear variables,
//! since only one of them runs. A projection may discard only a component
//! whose type is qubit-free; pairs with qubit components are consumed with
//! `let <x, y> = ... in ...` instead.

use crate::syntax::{Term, Type};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Ways a term can fail to type-check.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("variable `{0}` shadows an existing binding")]
    Shadowing(String),
    #[error("linear variable `{0}` is used more than once")]
    ReusedLinear(String),
    #[error("linear variable `{0}` is never used")]
    UnusedLinear(String),
    #[error("linear variable `{0}` is used in one branch of `if` but not the other")]
    BranchUsageMismatch(String),
    #[error("branches of `if` have different types: {0} and {1}")]
    BranchTypeMismatch(Type, Type),
    #[error("expected a function, got a value of type {0}")]
    NotAFunction(Type),
    #[error("function expects an argument of type {expected}, got {found}")]
    ArgMismatch { expected: Type, found: Type },
    #[error("`if` guard must have type bit, got {0}")]
    GuardNotBit(Type),
    #[error("projection applied to a value of non-pair type {0}")]
    ProjectNonPair(Type),
    #[error("pair pattern applied to a value of non-pair type {0}")]
    DestructNonPair(Type),
    #[error("projection discards a component of type {0}, which contains a qubit")]
    ProjDiscardsQbit(Type),
}

/// A typing context. Every binding carries its type; bindings whose type
/// mentions `qbit` are tracked as linear.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypingContext {
    types: BTreeMap<String, Type>,
}

impl TypingContext {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a binding; whether it is linear follows from the type.
    pub fn bind(&mut self, name: impl Into<String>, ty: Type) {
        self.types.insert(name.into(), ty);
    }

    pub fn with(mut self, name: impl Into<String>, ty: Type) -> Self {
        self.bind(name, ty);
        self
    }

    pub fn lookup(&self, name: &str) -> Option<&Type> {
        self.types.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.types.contains_key(name)
    }

    /// Names of the linear bindings.
    pub fn linear_names(&self) -> BTreeSet<String> {
        self.types
            .iter()
            .filter(|(_, ty)| ty.contains_qbit())
            .map(|(name, _)| name.clone())
            .collect()
    }
}

/// Infer the type of a term, also reporting which linear variables it
/// consumes. Linearity violations inside the term are rejected, but unused
/// linear context entries are not (callers that require exact consumption
/// check the returned set).
pub fn infer_with_usage(
    ctx: &TypingContext,
    term: &Term,
) -> Result<(Type, BTreeSet<String>), TypeError> {
    match term {
        Term::Var(x) => {
            let ty = ctx
                .lookup(x)
                .cloned()
                .ok_or_else(|| TypeError::Unbound(x.clone()))?;
            let mut used = BTreeSet::new();
            if ty.contains_qbit() {
                used.insert(x.clone());
            }
            Ok((ty, used))
        }
        Term::QubitRef(_) => Ok((Type::Qbit, BTreeSet::new())),
        Term::BoolLit(_) => Ok((Type::Bit, BTreeSet::new())),
        Term::Const(p) => Ok((p.ty(), BTreeSet::new())),
        Term::Lambda {
            param,
            param_ty,
            body,
        } => {
            if ctx.contains(param) {
                return Err(TypeError::Shadowing(param.clone()));
            }
            let inner = ctx.clone().with(param.clone(), param_ty.clone());
            let (body_ty, mut used) = infer_with_usage(&inner, body)?;
            if param_ty.contains_qbit() && !used.remove(param) {
                return Err(TypeError::UnusedLinear(param.clone()));
            }
            Ok((Type::arrow(param_ty.clone(), body_ty), used))
        }
        Term::App(fun, arg) => {
            let (fun_ty, used_fun) = infer_with_usage(ctx, fun)?;
            let (arg_ty, used_arg) = infer_with_usage(ctx, arg)?;
            let used = union_disjoint(used_fun, used_arg)?;
            match fun_ty {
                Type::Arrow(dom, cod) => {
                    if *dom != arg_ty {
                        Err(TypeError::ArgMismatch {
                            expected: *dom,
                            found: arg_ty,
                        })
                    } else {
                        Ok((*cod, used))
                    }
                }
                other => Err(TypeError::NotAFunction(other)),
            }
        }
        Term::Pair(left, right) => {
            let (lty, used_l) = infer_with_usage(ctx, left)?;
            let (rty, used_r) = infer_with_usage(ctx, right)?;
            let used = union_disjoint(used_l, used_r)?;
            Ok((Type::product(lty, rty), used))
        }
        Term::Proj(side, inner) => {
            let (ty, used) = infer_with_usage(ctx, inner)?;
            match ty {
                Type::Product(a, b) => {
                    let (kept, discarded) = match side {
                        crate::syntax::ProjSide::Fst => (*a, *b),
                        crate::syntax::ProjSide::Snd => (*b, *a),
                    };
                    if discarded.contains_qbit() {
                        Err(TypeError::ProjDiscardsQbit(discarded))
                    } else {
                        Ok((kept, used))
                    }
                }
                other => Err(TypeError::ProjectNonPair(other)),
            }
        }
        Term::If {
            guard,
            then_branch,
            else_branch,
        } => {
            let (guard_ty, used_guard) = infer_with_usage(ctx, guard)?;
            if guard_ty != Type::Bit {
                return Err(TypeError::GuardNotBit(guard_ty));
            }
            let (then_ty, used_then) = infer_with_usage(ctx, then_branch)?;
            let (else_ty, used_else) = infer_with_usage(ctx, else_branch)?;
            if then_ty != else_ty {
                return Err(TypeError::BranchTypeMismatch(then_ty, else_ty));
            }
            if let Some(diff) = used_then.symmetric_difference(&used_else).next() {
                return Err(TypeError::BranchUsageMismatch(diff.clone()));
            }
            let used = union_disjoint(used_guard, used_then)?;
            Ok((then_ty, used))
        }
        Term::LetPair {
            left,
            right,
            bound,
            body,
        } => {
            if ctx.contains(left) {
                return Err(TypeError::Shadowing(left.clone()));
            }
            if ctx.contains(right) || left == right {
                return Err(TypeError::Shadowing(right.clone()));
            }
            let (bound_ty, used_bound) = infer_with_usage(ctx, bound)?;
            let (lty, rty) = match bound_ty {
                Type::Product(a, b) => (*a, *b),
                other => return Err(TypeError::DestructNonPair(other)),
            };
            let inner = ctx
                .clone()
                .with(left.clone(), lty.clone())
                .with(right.clone(), rty.clone());
            let (body_ty, mut used_body) = infer_with_usage(&inner, body)?;
            if lty.contains_qbit() && !used_body.remove(left) {
                return Err(TypeError::UnusedLinear(left.clone()));
            }
            if rty.contains_qbit() && !used_body.remove(right) {
                return Err(TypeError::UnusedLinear(right.clone()));
            }
            let used = union_disjoint(used_bound, used_body)?;
            Ok((body_ty, used))
        }
    }
}

fn union_disjoint(
    mut a: BTreeSet<String>,
    b: BTreeSet<String>,
) -> Result<BTreeSet<String>, TypeError> {
    for name in b {
        if !a.insert(name.clone()) {
            return Err(TypeError::ReusedLinear(name));
        }
    }
    Ok(a)
}

/// Type-check a term under a context, requiring every linear binding of the
/// context to be consumed exactly once.
pub fn typecheck_in(ctx: &TypingContext, term: &Term) -> Result<Type, TypeError> {
    let (ty, used) = infer_with_usage(ctx, term)?;
    for name in ctx.linear_names() {
        if !used.contains(&name) {
            return Err(TypeError::UnusedLinear(name));
        }
    }
    Ok(ty)
}

/// Type-check a closed term.
pub fn typecheck(term: &Term) -> Result<Type, TypeError> {
    typecheck_in(&TypingContext::new(), term)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_term;

    fn check(src: &str) -> Result<Type, TypeError> {
        typecheck(&parse_term(src).expect("parse"))
    }

    #[test]
    fn bell_preparation_types() {
        assert_eq!(check("cnot <H q1, q2>").unwrap().to_string(), "qbit * qbit");
    }

    #[test]
    fn qubit_constants_are_not_linear() {
        assert_eq!(check("<q1, q1>").unwrap().to_string(), "qbit * qbit");
        assert_eq!(check("<meas q1, meas q1>").unwrap().to_string(), "bit * bit");
    }

    #[test]
    fn linear_variables_used_exactly_once() {
        assert!(matches!(
            check("\\x:qbit. <x, x>"),
            Err(TypeError::ReusedLinear(x)) if x == "x"
        ));
        assert!(matches!(
            check("\\x:qbit. true"),
            Err(TypeError::UnusedLinear(x)) if x == "x"
        ));
        assert_eq!(check("\\x:qbit. x").unwrap().to_string(), "qbit -> qbit");
    }

    #[test]
    fn nonlinear_variables_are_unrestricted() {
        assert_eq!(check("\\x:bit. <x, x>").unwrap().to_string(), "bit -> bit * bit");
        assert_eq!(check("\\x:bit. true").unwrap().to_string(), "bit -> bit");
    }

    #[test]
    fn function_types_with_qubits_are_linear() {
        // g : qbit -> bit mentions qbit, so g is linear.
        assert_eq!(
            check("\\g:qbit -> bit. g q1").unwrap().to_string(),
            "(qbit -> bit) -> bit"
        );
        assert!(matches!(
            check("\\g:qbit -> bit. <g q1, g q2>"),
            Err(TypeError::ReusedLinear(_))
        ));
        // Applying a primitive passed as an argument.
        assert_eq!(
            check("(\\g:qbit -> bit. g q1) meas").unwrap().to_string(),
            "bit"
        );
    }

    #[test]
    fn branches_must_consume_the_same_linear_variables() {
        assert!(matches!(
            check("\\x:qbit. \\y:qbit. if true then <x, y> else <y, x>"),
            Ok(_)
        ));
        assert!(matches!(
            check("\\x:qbit. \\y:qbit. if true then meas x else meas y"),
            Err(TypeError::BranchUsageMismatch(_))
        ));
    }

    #[test]
    fn branch_types_must_agree_and_guard_must_be_bit() {
        assert!(matches!(
            check("if meas q1 then true else q2"),
            Err(TypeError::BranchTypeMismatch(_, _))
        ));
        assert!(matches!(
            check("if q1 then true else false"),
            Err(TypeError::GuardNotBit(_))
        ));
        assert_eq!(
            check("if meas q1 then true else false").unwrap(),
            Type::Bit
        );
    }

    #[test]
    fn projections_cannot_discard_qubits() {
        assert!(matches!(
            check("pi1 <q1, q2>"),
            Err(TypeError::ProjDiscardsQbit(Type::Qbit))
        ));
        assert_eq!(check("pi1 <true, false>").unwrap(), Type::Bit);
        assert_eq!(check("pi2 <meas q1, q2>").unwrap(), Type::Qbit);
    }

    #[test]
    fn let_pair_consumes_qubit_components() {
        assert_eq!(
            check("let <a, b> = cnot <q1, q2> in <meas a, meas b>")
                .unwrap()
                .to_string(),
            "bit * bit"
        );
        assert!(matches!(
            check("let <a, b> = cnot <q1, q2> in meas a"),
            Err(TypeError::UnusedLinear(b)) if b == "b"
        ));
    }

    #[test]
    fn shadowing_is_rejected() {
        assert!(matches!(
            check("\\x:qbit. \\x:qbit. <x, x>"),
            Err(TypeError::Shadowing(_))
        ));
    }

    #[test]
    fn whole_example_program_types() {
        let src = "(\\w:qbit * qbit. let <c, d> = w in \
                   let <a, b> = cnot <c, d> in <meas a, meas b>) <q2, q3>";
        assert_eq!(check(src).unwrap().to_string(), "bit * bit");
    }

    #[test]
    fn exact_consumption_required_in_context() {
        let ctx = TypingContext::new().with("x", Type::Qbit);
        let term = parse_term("true").unwrap();
        assert!(matches!(
            typecheck_in(&ctx, &term),
            Err(TypeError::UnusedLinear(x)) if x == "x"
        ));
        let term = parse_term("meas x").unwrap();
        assert_eq!(typecheck_in(&ctx, &term).unwrap(), Type::Bit);
    }

    #[test]
    fn unbound_variables_are_reported() {
        assert!(matches!(check("meas z"), Err(TypeError::Unbound(z)) if z == "z"));
    }
}
