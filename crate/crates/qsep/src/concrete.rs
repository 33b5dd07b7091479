//! Call-by-value probabilistic small-step semantics over simulated quantum
//! states, with exhaustive probability-tree evaluation and single-path
//! sampling.
//!
//! Reduction order: in an application the argument reduces first, then the
//! function, then the call fires; pair components reduce left to right; a
//! conditional reduces its guard and then selects a branch; `let <x, y>`
//! substitutes both components once the bound pair is a value. Measurement
//! is the only probabilistic step: it branches on the outcomes reported by
//! the state vector, and the term reduces to the boolean matching the
//! collapsed state.

use crate::qstate::{QuantumState, StateError, Tolerances};
use crate::syntax::{Prim, Term};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Default per-path step budget for exhaustive and sampled runs. The
/// calculus is strongly normalizing, so the budget only guards against
/// pathological inputs.
pub const DEFAULT_MAX_STEPS: usize = 10_000;

/// A machine configuration: the quantum register together with the term
/// under reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineState {
    pub state: QuantumState,
    pub term: Term,
}

/// One probabilistic successor of a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepBranch {
    pub probability: f64,
    pub machine: MachineState,
}

/// A completed evaluation path: the probability of reaching it and the
/// final configuration (whose term is a value).
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub probability: f64,
    pub machine: MachineState,
}

/// Errors during evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("stuck term `{0}`; evaluation requires a well-typed closed term")]
    Stuck(Term),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("exceeded the step budget of {0}; the input is not normalizing as expected")]
    StepLimitExceeded(usize),
}

/// Whether a term is a value: a variable, boolean, qubit constant,
/// primitive, abstraction, pair of values, or a primitive applied to a bare
/// variable (an open application that can reduce no further).
pub fn is_value(term: &Term) -> bool {
    match term {
        Term::Var(_) | Term::QubitRef(_) | Term::BoolLit(_) | Term::Const(_) => true,
        Term::Lambda { .. } => true,
        Term::Pair(a, b) => is_value(a) && is_value(b),
        Term::App(fun, arg) => {
            matches!(fun.as_ref(), Term::Const(_)) && matches!(arg.as_ref(), Term::Var(_))
        }
        _ => false,
    }
}

/// All one-step successors of a configuration with their probabilities.
/// Values have no successors. Deterministic steps yield one branch with
/// probability 1; measurements yield one branch per outcome retained by the
/// state vector.
pub fn step(machine: &MachineState, tol: &Tolerances) -> Result<Vec<StepBranch>, RunError> {
    let branches = step_term(&machine.state, &machine.term, tol)?;
    Ok(branches
        .into_iter()
        .map(|(probability, state, term)| StepBranch {
            probability,
            machine: MachineState { state, term },
        })
        .collect())
}

type RawBranches = Vec<(f64, QuantumState, Term)>;

fn step_term(state: &QuantumState, term: &Term, tol: &Tolerances) -> Result<RawBranches, RunError> {
    if is_value(term) {
        return Ok(Vec::new());
    }
    match term {
        Term::App(fun, arg) => {
            if !is_value(arg) {
                return wrap(state, arg, tol, |arg| Term::app(fun.as_ref().clone(), arg));
            }
            if !is_value(fun) {
                return wrap(state, fun, tol, |fun| Term::app(fun, arg.as_ref().clone()));
            }
            apply_value(state, fun, arg, tol, term)
        }
        Term::Pair(left, right) => {
            if !is_value(left) {
                return wrap(state, left, tol, |left| {
                    Term::pair(left, right.as_ref().clone())
                });
            }
            wrap(state, right, tol, |right| {
                Term::pair(left.as_ref().clone(), right)
            })
        }
        Term::Proj(side, inner) => {
            if !is_value(inner) {
                let side = *side;
                return wrap(state, inner, tol, move |inner| Term::proj(side, inner));
            }
            match inner.as_ref() {
                Term::Pair(a, b) => {
                    let component = match side {
                        crate::syntax::ProjSide::Fst => a,
                        crate::syntax::ProjSide::Snd => b,
                    };
                    Ok(vec![(1.0, state.clone(), component.as_ref().clone())])
                }
                _ => Err(RunError::Stuck(term.clone())),
            }
        }
        Term::If {
            guard,
            then_branch,
            else_branch,
        } => match guard.as_ref() {
            Term::BoolLit(true) => Ok(vec![(1.0, state.clone(), then_branch.as_ref().clone())]),
            Term::BoolLit(false) => Ok(vec![(1.0, state.clone(), else_branch.as_ref().clone())]),
            g if !is_value(g) => {
                let (then_branch, else_branch) = (then_branch.clone(), else_branch.clone());
                wrap(state, guard, tol, move |guard| Term::If {
                    guard: Box::new(guard),
                    then_branch: then_branch.clone(),
                    else_branch: else_branch.clone(),
                })
            }
            _ => Err(RunError::Stuck(term.clone())),
        },
        Term::LetPair {
            left,
            right,
            bound,
            body,
        } => {
            if !is_value(bound) {
                let (left, right, body) = (left.clone(), right.clone(), body.clone());
                return wrap(state, bound, tol, move |bound| Term::LetPair {
                    left: left.clone(),
                    right: right.clone(),
                    bound: Box::new(bound),
                    body: body.clone(),
                });
            }
            match bound.as_ref() {
                Term::Pair(v1, v2) => Ok(vec![(
                    1.0,
                    state.clone(),
                    subst_both(body, left, v1, right, v2),
                )]),
                _ => Err(RunError::Stuck(term.clone())),
            }
        }
        // Values were handled above; variables, constants, and lambdas
        // cannot appear here.
        other => Err(RunError::Stuck(other.clone())),
    }
}

/// Reduce inside a congruence position and rebuild the surrounding term.
fn wrap(
    state: &QuantumState,
    inner: &Term,
    tol: &Tolerances,
    rebuild: impl Fn(Term) -> Term,
) -> Result<RawBranches, RunError> {
    let branches = step_term(state, inner, tol)?;
    if branches.is_empty() {
        // The inner term is a value; the caller should not have recursed.
        return Err(RunError::Stuck(inner.clone()));
    }
    Ok(branches
        .into_iter()
        .map(|(p, s, t)| (p, s, rebuild(t)))
        .collect())
}

/// Fire a call whose function and argument are both values.
fn apply_value(
    state: &QuantumState,
    fun: &Term,
    arg: &Term,
    tol: &Tolerances,
    whole: &Term,
) -> Result<RawBranches, RunError> {
    match fun {
        Term::Lambda { param, body, .. } => {
            Ok(vec![(1.0, state.clone(), body.subst(param, arg))])
        }
        Term::Const(prim) => match (prim, arg) {
            (Prim::Meas, Term::QubitRef(i)) => {
                let branches = state.measure(*i, tol)?;
                Ok(branches
                    .into_iter()
                    .map(|b| (b.probability, b.state, Term::BoolLit(b.outcome)))
                    .collect())
            }
            (Prim::Hadamard, Term::QubitRef(i)) => {
                let mut next = state.clone();
                next.apply_hadamard(*i)?;
                Ok(vec![(1.0, next, arg.clone())])
            }
            (Prim::Phase, Term::QubitRef(i)) => {
                let mut next = state.clone();
                next.apply_phase(*i)?;
                Ok(vec![(1.0, next, arg.clone())])
            }
            (Prim::Cnot, Term::Pair(a, b)) => match (a.as_ref(), b.as_ref()) {
                (Term::QubitRef(i), Term::QubitRef(j)) => {
                    let mut next = state.clone();
                    next.apply_cnot(*i, *j)?;
                    Ok(vec![(1.0, next, arg.clone())])
                }
                _ => Err(RunError::Stuck(whole.clone())),
            },
            _ => Err(RunError::Stuck(whole.clone())),
        },
        _ => Err(RunError::Stuck(whole.clone())),
    }
}

/// Simultaneous substitution of both pair components, avoiding capture of
/// the second binder by free variables of the first value.
pub(crate) fn subst_both(body: &Term, left: &str, v1: &Term, right: &str, v2: &Term) -> Term {
    if v1.free_vars().contains(right) {
        let mut taken = body.free_vars();
        taken.extend(v1.free_vars());
        taken.extend(v2.free_vars());
        taken.insert(left.to_string());
        let fresh = (1..)
            .map(|i| format!("{right}{i}"))
            .find(|c| !taken.contains(c) && c != right)
            .expect("fresh name");
        let body = body.subst(right, &Term::var(fresh.clone()));
        body.subst(left, v1).subst(&fresh, v2)
    } else {
        body.subst(left, v1).subst(right, v2)
    }
}

/// Exhaustively expand the probability tree of a configuration until every
/// path ends in a value. Leaves whose terms are identical and whose states
/// agree within the norm tolerance are merged, probabilities summed. The
/// result is sorted by the printed term, then by amplitudes.
pub fn run_exhaustive(
    initial: MachineState,
    tol: &Tolerances,
    max_steps: usize,
) -> Result<Vec<Leaf>, RunError> {
    let mut stack = vec![(1.0f64, initial, 0usize)];
    let mut leaves: Vec<Leaf> = Vec::new();
    while let Some((probability, machine, steps)) = stack.pop() {
        let branches = step(&machine, tol)?;
        if branches.is_empty() {
            merge_leaf(&mut leaves, probability, machine, tol);
            continue;
        }
        if steps >= max_steps {
            return Err(RunError::StepLimitExceeded(max_steps));
        }
        for branch in branches {
            stack.push((probability * branch.probability, branch.machine, steps + 1));
        }
    }
    leaves.sort_by(|a, b| {
        let ta = a.machine.term.to_string();
        let tb = b.machine.term.to_string();
        ta.cmp(&tb).then_with(|| {
            for (x, y) in a
                .machine
                .state
                .amplitudes()
                .iter()
                .zip(b.machine.state.amplitudes())
            {
                let ord = x
                    .re
                    .total_cmp(&y.re)
                    .then_with(|| x.im.total_cmp(&y.im));
                if ord != std::cmp::Ordering::Equal {
                    return ord;
                }
            }
            std::cmp::Ordering::Equal
        })
    });
    Ok(leaves)
}

fn merge_leaf(leaves: &mut Vec<Leaf>, probability: f64, machine: MachineState, tol: &Tolerances) {
    for leaf in leaves.iter_mut() {
        if leaf.machine.term == machine.term
            && leaf.machine.state.approx_eq(&machine.state, tol.norm)
        {
            leaf.probability += probability;
            return;
        }
    }
    leaves.push(Leaf {
        probability,
        machine,
    });
}

/// Follow a single evaluation path, resolving each measurement with the
/// seeded generator. Returns the probability of the sampled path and its
/// final configuration.
pub fn run_sampled(
    initial: MachineState,
    seed: u64,
    tol: &Tolerances,
    max_steps: usize,
) -> Result<(f64, MachineState), RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probability = 1.0f64;
    let mut machine = initial;
    for _ in 0..=max_steps {
        let branches = step(&machine, tol)?;
        if branches.is_empty() {
            return Ok((probability, machine));
        }
        let chosen = if branches.len() == 1 {
            branches.into_iter().next().unwrap()
        } else {
            let total: f64 = branches.iter().map(|b| b.probability).sum();
            let mut draw = rng.gen_range(0.0..total);
            let mut picked = None;
            for branch in branches {
                if draw < branch.probability {
                    picked = Some(branch);
                    break;
                }
                draw -= branch.probability;
                picked = Some(branch);
            }
            picked.expect("nonempty branches")
        };
        probability *= chosen.probability;
        machine = chosen.machine;
    }
    Err(RunError::StepLimitExceeded(max_steps))
}
