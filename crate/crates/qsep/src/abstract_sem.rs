//! Abstract quantum states and the abstract operational semantics.
//!
//! An abstract quantum state ([`Aqs`]) tracks, for a register of `n`
//! qubits, (1) a partition of some qubits into *blocks* — groups that may
//! be entangled with each other but are separable from everything outside
//! the block — and (2) a set of qubits known to be in a computational
//! basis state (*pure*). Qubits in no block and not pure are separable
//! from every other qubit but in an unknown single-qubit state.
//!
//! The abstract semantics mirrors the concrete one on functional steps and
//! updates the state soundly on quantum steps:
//!
//! - `phase q_i`: no change;
//! - `H q_i`: `q_i` is no longer known pure;
//! - `meas q_i`: `q_i` leaves its block and becomes pure; the outcome is
//!   both `true` and `false` nondeterministically;
//! - `cnot <q_i, q_j>`: if the control `q_i` is pure, no change; otherwise
//!   the blocks of `q_i` and `q_j` merge and both lose purity.
//!
//! Abstraction may overestimate entanglement (a merged block never
//! splits), but adequacy guarantees it never misses entanglement and never
//! wrongly claims purity.

use crate::concrete::{is_value, RunError};
use crate::qstate::{QuantumState, StateError, Tolerances};
use crate::syntax::{Prim, ProjSide, Term};
use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use thiserror::Error;

/// Budget on distinct configurations explored by [`abstract_semantics`].
pub const DEFAULT_ABSTRACT_BUDGET: usize = 100_000;

/// Errors from constructing or parsing abstract states.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AqsError {
    #[error("qubit q{qubit} is out of range for a register of {n} qubit(s)")]
    QubitOutOfRange { qubit: usize, n: usize },
    #[error("a block needs at least two qubits, got {0:?}")]
    BlockTooSmall(BTreeSet<usize>),
    #[error("qubit q{0} appears in more than one block")]
    OverlappingBlocks(usize),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// An abstract quantum state over a register of `n` qubits.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Aqs {
    n: usize,
    /// Disjoint groups of at least two qubits each; qubits in the same
    /// group may be entangled with each other.
    blocks: BTreeSet<BTreeSet<usize>>,
    /// Qubits known to be in a basis state.
    pure: BTreeSet<usize>,
}

impl Aqs {
    /// The least informative state: every qubit possibly entangled with
    /// every other, nothing known pure.
    pub fn top(n: usize) -> Aqs {
        let blocks = if n >= 2 {
            BTreeSet::from([(1..=n).collect::<BTreeSet<usize>>()])
        } else {
            BTreeSet::new()
        };
        Aqs {
            n,
            blocks,
            pure: BTreeSet::new(),
        }
    }

    /// The state matching a freshly initialized register: no entanglement,
    /// every qubit in a basis state.
    pub fn all_pure(n: usize) -> Aqs {
        Aqs {
            n,
            blocks: BTreeSet::new(),
            pure: (1..=n).collect(),
        }
    }

    /// Build from explicit parts. Blocks must be disjoint, of size at least
    /// two, and within range. A qubit may be listed both in a block and as
    /// pure: such states never arise from the abstract semantics, but they
    /// can be written down and queried for adequacy.
    pub fn from_parts(
        n: usize,
        blocks: impl IntoIterator<Item = BTreeSet<usize>>,
        pure: impl IntoIterator<Item = usize>,
    ) -> Result<Aqs, AqsError> {
        let mut seen = BTreeSet::new();
        let mut block_set = BTreeSet::new();
        for block in blocks {
            if block.len() < 2 {
                return Err(AqsError::BlockTooSmall(block));
            }
            for &q in &block {
                if q == 0 || q > n {
                    return Err(AqsError::QubitOutOfRange { qubit: q, n });
                }
                if !seen.insert(q) {
                    return Err(AqsError::OverlappingBlocks(q));
                }
            }
            block_set.insert(block);
        }
        let mut pure_set = BTreeSet::new();
        for q in pure {
            if q == 0 || q > n {
                return Err(AqsError::QubitOutOfRange { qubit: q, n });
            }
            pure_set.insert(q);
        }
        Ok(Aqs {
            n,
            blocks: block_set,
            pure: pure_set,
        })
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &BTreeSet<BTreeSet<usize>> {
        &self.blocks
    }

    pub fn pure_set(&self) -> &BTreeSet<usize> {
        &self.pure
    }

    /// The block containing a qubit, if any.
    pub fn class_of(&self, qubit: usize) -> Option<&BTreeSet<usize>> {
        self.blocks.iter().find(|b| b.contains(&qubit))
    }

    /// Whether a qubit is known to be in a basis state.
    pub fn is_pure(&self, qubit: usize) -> bool {
        self.pure.contains(&qubit)
    }

    /// Whether two qubits are related: in the same block (a qubit is
    /// related to itself exactly when it belongs to some block).
    pub fn related(&self, a: usize, b: usize) -> bool {
        match self.class_of(a) {
            Some(block) => block.contains(&b),
            None => false,
        }
    }

    /// Merge the blocks of two distinct qubits (creating or extending
    /// blocks as needed); both qubits lose purity.
    pub fn merge(&self, a: usize, b: usize) -> Aqs {
        assert_ne!(a, b, "cannot merge a qubit with itself");
        let mut merged: BTreeSet<usize> = BTreeSet::from([a, b]);
        let mut blocks: BTreeSet<BTreeSet<usize>> = BTreeSet::new();
        for block in &self.blocks {
            if block.contains(&a) || block.contains(&b) {
                merged.extend(block.iter().copied());
            } else {
                blocks.insert(block.clone());
            }
        }
        blocks.insert(merged);
        let mut pure = self.pure.clone();
        pure.remove(&a);
        pure.remove(&b);
        Aqs {
            n: self.n,
            blocks,
            pure,
        }
    }

    /// Remove a qubit from its block (dissolving the block if only one
    /// qubit would remain). Purity is unchanged.
    pub fn remove(&self, qubit: usize) -> Aqs {
        let mut blocks = BTreeSet::new();
        for block in &self.blocks {
            if block.contains(&qubit) {
                let rest: BTreeSet<usize> =
                    block.iter().copied().filter(|&q| q != qubit).collect();
                if rest.len() >= 2 {
                    blocks.insert(rest);
                }
            } else {
                blocks.insert(block.clone());
            }
        }
        Aqs {
            n: self.n,
            blocks,
            pure: self.pure.clone(),
        }
    }

    /// The update for measuring a qubit: it leaves its block and is known
    /// pure afterwards.
    pub fn measure_update(&self, qubit: usize) -> Aqs {
        let mut next = self.remove(qubit);
        next.pure.insert(qubit);
        next
    }

    /// The update for a Hadamard: the qubit is no longer known pure.
    pub fn hadamard_update(&self, qubit: usize) -> Aqs {
        let mut next = self.clone();
        next.pure.remove(&qubit);
        next
    }

    /// Adequacy with respect to a concrete state of the same register:
    /// every concretely entangled pair must be related here, and every
    /// qubit claimed pure must measure deterministically.
    pub fn adequate(&self, state: &QuantumState, tol: &Tolerances) -> Result<bool, StateError> {
        if state.qubits() != self.n {
            return Err(StateError::QubitOutOfRange {
                qubit: self.n.max(state.qubits()),
                n: self.n.min(state.qubits()),
            });
        }
        let concrete = state.entanglement_relation(tol)?;
        for a in 1..=self.n {
            for b in (a + 1)..=self.n {
                if !self.related(a, b) && concrete.related(a, b) {
                    return Ok(false);
                }
            }
        }
        for &q in &self.pure {
            if !state.qubit_is_base(q, tol)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// All abstract states over `n` qubits that satisfy the structural
    /// invariant (blocks disjoint from the pure set). For entailment: the
    /// model space.
    pub fn enumerate(n: usize) -> Vec<Aqs> {
        let qubits: Vec<usize> = (1..=n).collect();
        let mut out = Vec::new();
        for domain_bits in 0usize..(1 << n) {
            let domain: Vec<usize> = qubits
                .iter()
                .enumerate()
                .filter(|(i, _)| domain_bits >> i & 1 == 1)
                .map(|(_, &q)| q)
                .collect();
            let rest: Vec<usize> = qubits
                .iter()
                .copied()
                .filter(|q| !domain.contains(q))
                .collect();
            for partition in partitions_min_two(&domain) {
                for pure_bits in 0usize..(1 << rest.len()) {
                    let pure: BTreeSet<usize> = rest
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| pure_bits >> i & 1 == 1)
                        .map(|(_, &q)| q)
                        .collect();
                    out.push(Aqs {
                        n,
                        blocks: partition.iter().cloned().collect(),
                        pure,
                    });
                }
            }
        }
        out
    }

    /// Render in the text format: one `block:` line per block and a single
    /// `pure:` line when the pure set is nonempty.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for block in &self.blocks {
            out.push_str("block:");
            for q in block {
                out.push_str(&format!(" q{q}"));
            }
            out.push('\n');
        }
        if !self.pure.is_empty() {
            out.push_str("pure:");
            for q in &self.pure {
                out.push_str(&format!(" q{q}"));
            }
            out.push('\n');
        }
        out
    }

    /// Parse the text format: `block: q1 q2` and `pure: q3` lines, with
    /// `#` comments. Multiple `pure:` lines accumulate. The register size
    /// comes from the caller (the file does not carry it).
    pub fn parse(src: &str, n: usize) -> Result<Aqs, AqsError> {
        let mut blocks: Vec<BTreeSet<usize>> = Vec::new();
        let mut pure: Vec<usize> = Vec::new();
        for (lineno, raw) in src.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| AqsError::Malformed {
                line: lineno + 1,
                message,
            };
            let (kind, rest) = line
                .split_once(':')
                .ok_or_else(|| err("expected `block: ...` or `pure: ...`".into()))?;
            let mut qubits = Vec::new();
            for word in rest.split_whitespace() {
                let digits = word
                    .strip_prefix('q')
                    .filter(|d| !d.is_empty() && d.chars().all(|c| c.is_ascii_digit()))
                    .ok_or_else(|| err(format!("expected a qubit like `q1`, got `{word}`")))?;
                let q: usize = digits
                    .parse()
                    .map_err(|_| err(format!("qubit index in `{word}` is out of range")))?;
                if q == 0 {
                    return Err(err("qubit indices start at 1".into()));
                }
                qubits.push(q);
            }
            match kind.trim() {
                "block" => blocks.push(qubits.into_iter().collect()),
                "pure" => pure.extend(qubits),
                other => return Err(err(format!("unknown entry `{other}`"))),
            }
        }
        Aqs::from_parts(n, blocks, pure)
    }
}

impl fmt::Display for Aqs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.render().trim_end())
    }
}

/// Partitions of the given elements into parts of size at least two.
fn partitions_min_two(elems: &[usize]) -> Vec<Vec<BTreeSet<usize>>> {
    if elems.is_empty() {
        return vec![Vec::new()];
    }
    let first = elems[0];
    let rest = &elems[1..];
    let mut out = Vec::new();
    // Choose the part containing `first`: any subset of `rest` of size >= 1.
    for bits in 0usize..(1 << rest.len()) {
        let mut part = BTreeSet::from([first]);
        let mut remaining = Vec::new();
        for (i, &q) in rest.iter().enumerate() {
            if bits >> i & 1 == 1 {
                part.insert(q);
            } else {
                remaining.push(q);
            }
        }
        if part.len() < 2 {
            continue;
        }
        for mut sub in partitions_min_two(&remaining) {
            sub.push(part.clone());
            out.push(sub);
        }
    }
    out
}

/// A configuration of the abstract machine.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AbstractMachineState {
    pub aqs: Aqs,
    pub term: Term,
}

/// All one-step successors of an abstract configuration. Functional steps
/// mirror the concrete semantics; measurement branches on both outcomes.
pub fn abstract_step(machine: &AbstractMachineState) -> Result<Vec<AbstractMachineState>, RunError> {
    let successors = abstract_step_term(&machine.aqs, &machine.term)?;
    Ok(successors
        .into_iter()
        .map(|(aqs, term)| AbstractMachineState { aqs, term })
        .collect())
}

fn abstract_step_term(aqs: &Aqs, term: &Term) -> Result<Vec<(Aqs, Term)>, RunError> {
    if is_value(term) {
        return Ok(Vec::new());
    }
    match term {
        Term::App(fun, arg) => {
            if !is_value(arg) {
                return wrap(aqs, arg, |arg| Term::app(fun.as_ref().clone(), arg));
            }
            if !is_value(fun) {
                return wrap(aqs, fun, |fun| Term::app(fun, arg.as_ref().clone()));
            }
            apply_value(aqs, fun, arg, term)
        }
        Term::Pair(left, right) => {
            if !is_value(left) {
                return wrap(aqs, left, |left| Term::pair(left, right.as_ref().clone()));
            }
            wrap(aqs, right, |right| {
                Term::pair(left.as_ref().clone(), right)
            })
        }
        Term::Proj(side, inner) => {
            if !is_value(inner) {
                let side = *side;
                return wrap(aqs, inner, move |inner| Term::proj(side, inner));
            }
            match inner.as_ref() {
                Term::Pair(a, b) => {
                    let component = match side {
                        ProjSide::Fst => a,
                        ProjSide::Snd => b,
                    };
                    Ok(vec![(aqs.clone(), component.as_ref().clone())])
                }
                _ => Err(RunError::Stuck(term.clone())),
            }
        }
        Term::If {
            guard,
            then_branch,
            else_branch,
        } => match guard.as_ref() {
            Term::BoolLit(true) => Ok(vec![(aqs.clone(), then_branch.as_ref().clone())]),
            Term::BoolLit(false) => Ok(vec![(aqs.clone(), else_branch.as_ref().clone())]),
            g if !is_value(g) => {
                let (then_branch, else_branch) = (then_branch.clone(), else_branch.clone());
                wrap(aqs, guard, move |guard| Term::If {
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
                return wrap(aqs, bound, move |bound| Term::LetPair {
                    left: left.clone(),
                    right: right.clone(),
                    bound: Box::new(bound),
                    body: body.clone(),
                });
            }
            match bound.as_ref() {
                Term::Pair(v1, v2) => Ok(vec![(
                    aqs.clone(),
                    crate::concrete::subst_both(body, left, v1, right, v2),
                )]),
                _ => Err(RunError::Stuck(term.clone())),
            }
        }
        other => Err(RunError::Stuck(other.clone())),
    }
}

fn wrap(
    aqs: &Aqs,
    inner: &Term,
    rebuild: impl Fn(Term) -> Term,
) -> Result<Vec<(Aqs, Term)>, RunError> {
    let successors = abstract_step_term(aqs, inner)?;
    if successors.is_empty() {
        return Err(RunError::Stuck(inner.clone()));
    }
    Ok(successors
        .into_iter()
        .map(|(a, t)| (a, rebuild(t)))
        .collect())
}

fn apply_value(
    aqs: &Aqs,
    fun: &Term,
    arg: &Term,
    whole: &Term,
) -> Result<Vec<(Aqs, Term)>, RunError> {
    match fun {
        Term::Lambda { param, body, .. } => Ok(vec![(aqs.clone(), body.subst(param, arg))]),
        Term::Const(prim) => match (prim, arg) {
            (Prim::Meas, Term::QubitRef(i)) => {
                let next = aqs.measure_update(*i);
                Ok(vec![
                    (next.clone(), Term::BoolLit(false)),
                    (next, Term::BoolLit(true)),
                ])
            }
            (Prim::Hadamard, Term::QubitRef(i)) => {
                Ok(vec![(aqs.hadamard_update(*i), arg.clone())])
            }
            (Prim::Phase, Term::QubitRef(_)) => Ok(vec![(aqs.clone(), arg.clone())]),
            (Prim::Cnot, Term::Pair(a, b)) => match (a.as_ref(), b.as_ref()) {
                (Term::QubitRef(i), Term::QubitRef(j)) => {
                    if i == j {
                        return Err(RunError::State(StateError::CnotSameQubit(*i)));
                    }
                    let next = if aqs.is_pure(*i) {
                        aqs.clone()
                    } else {
                        aqs.merge(*i, *j)
                    };
                    Ok(vec![(next, arg.clone())])
                }
                _ => Err(RunError::Stuck(whole.clone())),
            },
            _ => Err(RunError::Stuck(whole.clone())),
        },
        _ => Err(RunError::Stuck(whole.clone())),
    }
}

/// The collecting semantics: every terminal `(AQS, value)` configuration
/// reachable from the input. Exploration deduplicates configurations; the
/// budget bounds the number of distinct configurations visited.
pub fn abstract_semantics(
    aqs: Aqs,
    term: Term,
    budget: usize,
) -> Result<BTreeSet<(Aqs, Term)>, RunError> {
    let initial = AbstractMachineState { aqs, term };
    let mut visited: BTreeSet<AbstractMachineState> = BTreeSet::new();
    let mut queue: VecDeque<AbstractMachineState> = VecDeque::new();
    let mut terminals: BTreeSet<(Aqs, Term)> = BTreeSet::new();
    visited.insert(initial.clone());
    queue.push_back(initial);
    while let Some(machine) = queue.pop_front() {
        let successors = abstract_step(&machine)?;
        if successors.is_empty() {
            terminals.insert((machine.aqs, machine.term));
            continue;
        }
        for succ in successors {
            if visited.contains(&succ) {
                continue;
            }
            if visited.len() >= budget {
                return Err(RunError::StepLimitExceeded(budget));
            }
            visited.insert(succ.clone());
            queue.push_back(succ);
        }
    }
    Ok(terminals)
}
