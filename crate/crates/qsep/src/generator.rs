//! Random well-typed program generation.
//!
//! Programs are built top-down against a goal type.  Qubit resources are
//! handled affinely: every register is handed out at most once, a `cnot`
//! always receives two distinct sources, and every qubit-typed binder is
//! consumed — by biased selection where possible and by a measuring
//! conditional wrapper otherwise.  Conditional branches draw registers
//! from a shared snapshot (only one branch runs) but never touch linear
//! variables, so both branches trivially use the same linear set.  The
//! result is a closed, well-typed program whose evaluation never aliases
//! the two `cnot` operands.

use crate::syntax::{Prim, Term, Type};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Parameters for one generated program.
#[derive(Debug, Clone)]
pub struct GenConfig {
    /// Number of registers available, `q1 ..= qN`.
    pub qubits: usize,
    /// Recursion depth bound; 0 forces a leaf.
    pub max_depth: usize,
    pub seed: u64,
}

/// A generated program together with its type.
#[derive(Debug, Clone)]
pub struct GeneratedProgram {
    pub term: Term,
    pub ty: Type,
}

/// Qubit sources available while generating: unclaimed registers and
/// not-yet-consumed qubit-typed variables.
#[derive(Debug, Clone)]
struct Resources {
    pool: Vec<usize>,
    linear: Vec<String>,
}

impl Resources {
    fn capacity(&self) -> usize {
        self.pool.len() + self.linear.len()
    }
}

/// How many qubit sources a value of the type holds.
fn qubit_slots(ty: &Type) -> usize {
    match ty {
        Type::Bit => 0,
        Type::Qbit => 1,
        Type::Arrow(..) => 0,
        Type::Product(a, b) => qubit_slots(a) + qubit_slots(b),
    }
}

pub fn generate_program(config: &GenConfig) -> GeneratedProgram {
    let mut gen = Generator {
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        next_var: 0,
    };
    let mut pool: Vec<usize> = (1..=config.qubits).collect();
    pool.shuffle(&mut gen.rng);
    let mut env = Resources {
        pool,
        linear: Vec::new(),
    };

    let mut goals = vec![Type::Bit, Type::product(Type::Bit, Type::Bit)];
    if env.capacity() >= 1 {
        goals.push(Type::Qbit);
        goals.push(Type::product(Type::Bit, Type::Qbit));
    }
    if env.capacity() >= 2 {
        goals.push(Type::product(Type::Qbit, Type::Qbit));
    }
    let ty = goals[gen.rng.gen_range(0..goals.len())].clone();
    let term = gen.term_of(&ty, config.max_depth, &mut env);
    GeneratedProgram { term, ty }
}

struct Generator {
    rng: ChaCha8Rng,
    next_var: usize,
}

impl Generator {
    fn fresh(&mut self) -> String {
        self.next_var += 1;
        format!("x{}", self.next_var)
    }

    /// Generates a term of the goal type.  Precondition: the environment
    /// holds at least `qubit_slots(goal)` qubit sources.
    fn term_of(&mut self, goal: &Type, depth: usize, env: &mut Resources) -> Term {
        debug_assert!(env.capacity() >= qubit_slots(goal));
        if depth == 0 {
            return self.leaf_of(goal, env);
        }

        // Candidate productions, filtered by available resources.
        #[derive(Clone, Copy)]
        enum Production {
            Leaf,
            Unary,       // H or phase around a qubit goal
            Measure,     // meas around a qubit source
            Cnot,        // cnot on a qubit pair goal
            PairSplit,   // componentwise pair
            Conditional, // if on a measured source
            Apply,       // application of a qubit-taking abstraction
            BindCnot,    // let <a, b> = cnot ... in ...
        }
        let mut options = vec![Production::Leaf];
        match goal {
            Type::Qbit => options.push(Production::Unary),
            Type::Bit if env.capacity() >= 1 => {
                options.push(Production::Measure);
                // Pending binders make measurement the natural consumer.
                if !env.linear.is_empty() {
                    options.push(Production::Measure);
                }
            }
            Type::Product(a, b)
                if matches!((a.as_ref(), b.as_ref()), (Type::Qbit, Type::Qbit)) =>
            {
                options.push(Production::Cnot)
            }
            _ => {}
        }
        if matches!(goal, Type::Product(..)) {
            options.push(Production::PairSplit);
        }
        // Branches may only use registers, so the pool alone must cover the
        // goal even after the guard consumes one source.
        if env.pool.len() >= qubit_slots(goal) + 1 {
            options.push(Production::Conditional);
        }
        if env.capacity() >= qubit_slots(goal).max(1) {
            options.push(Production::Apply);
        }
        if env.capacity() >= 2 {
            options.push(Production::BindCnot);
        }

        let choice = options[self.rng.gen_range(0..options.len())];
        match choice {
            Production::Leaf => self.leaf_of(goal, env),
            Production::Unary => {
                let prim = if self.rng.gen_bool(0.5) {
                    Prim::Hadamard
                } else {
                    Prim::Phase
                };
                let inner = self.term_of(&Type::Qbit, depth - 1, env);
                Term::app(Term::Const(prim), inner)
            }
            Production::Measure => {
                let inner = self.term_of(&Type::Qbit, depth - 1, env);
                Term::app(Term::Const(Prim::Meas), inner)
            }
            Production::Cnot => {
                // A deep subterm may consume extra sources, so reserve the
                // second operand as a leaf before recursing into the first.
                let right = self.leaf_of(&Type::Qbit, env);
                let left = self.term_of(&Type::Qbit, depth - 1, env);
                Term::app(Term::Const(Prim::Cnot), Term::pair(left, right))
            }
            Production::PairSplit => {
                let Type::Product(a, b) = goal else { unreachable!() };
                let right = self.leaf_of(b, env);
                let left = self.term_of(a, depth - 1, env);
                Term::pair(left, right)
            }
            Production::Conditional => self.conditional(goal, depth, env),
            Production::Apply => self.application(goal, depth, env),
            Production::BindCnot => self.bind_cnot(goal, depth, env),
        }
    }

    /// A minimal term of the goal type.
    fn leaf_of(&mut self, goal: &Type, env: &mut Resources) -> Term {
        match goal {
            // A leaf must consume exactly the goal's own qubit slots, or
            // sibling components lose their reserved sources.
            Type::Bit => Term::BoolLit(self.rng.gen_bool(0.5)),
            Type::Qbit => self.qubit_source(env),
            Type::Product(a, b) => {
                let left = self.leaf_of(a, env);
                let right = self.leaf_of(b, env);
                Term::pair(left, right)
            }
            Type::Arrow(..) => unreachable!("function-typed goals are never selected"),
        }
    }

    /// One qubit source: an unconsumed variable when available, otherwise a
    /// fresh register.
    fn qubit_source(&mut self, env: &mut Resources) -> Term {
        if !env.linear.is_empty() && (env.pool.is_empty() || self.rng.gen_bool(0.7)) {
            let v = self.take_linear(env).expect("nonempty");
            return Term::var(v);
        }
        let i = self.rng.gen_range(0..env.pool.len());
        Term::QubitRef(env.pool.swap_remove(i))
    }

    fn take_linear(&mut self, env: &mut Resources) -> Option<String> {
        if env.linear.is_empty() {
            return None;
        }
        let i = self.rng.gen_range(0..env.linear.len());
        Some(env.linear.swap_remove(i))
    }

    /// `if meas <source> then .. else ..`: the guard consumes one source,
    /// the branches share a register snapshot and no linear variables.
    fn conditional(&mut self, goal: &Type, depth: usize, env: &mut Resources) -> Term {
        let guard = Term::app(Term::Const(Prim::Meas), self.qubit_source(env));
        let mut then_env = Resources {
            pool: env.pool.clone(),
            linear: Vec::new(),
        };
        let mut else_env = Resources {
            pool: env.pool.clone(),
            linear: Vec::new(),
        };
        let then_branch = self.term_of(goal, depth - 1, &mut then_env);
        let else_branch = self.term_of(goal, depth - 1, &mut else_env);
        // Either branch may run, so only registers neither touched stay
        // available.
        env.pool
            .retain(|r| then_env.pool.contains(r) && else_env.pool.contains(r));
        Term::ite(guard, then_branch, else_branch)
    }

    /// `(\x:qbit. body) arg`: the argument claims a source first, then the
    /// body is generated with the binder as a fresh linear source.
    fn application(&mut self, goal: &Type, depth: usize, env: &mut Resources) -> Term {
        // When the goal needs two qubit sources, a deep argument could eat
        // the body's second one; a leaf argument consumes exactly one.
        let arg = if qubit_slots(goal) >= 2 {
            self.leaf_of(&Type::Qbit, env)
        } else {
            self.term_of(&Type::Qbit, depth - 1, env)
        };
        let param = self.fresh();
        env.linear.push(param.clone());
        let body = self.term_of(goal, depth - 1, env);
        let body = self.consume_if_leftover(body, &param, env);
        Term::app(Term::lambda(param, Type::Qbit, body), arg)
    }

    /// `let <a, b> = cnot <s, t> in body`: both components become linear
    /// sources for the body.
    fn bind_cnot(&mut self, goal: &Type, depth: usize, env: &mut Resources) -> Term {
        let left_src = self.qubit_source(env);
        let right_src = self.qubit_source(env);
        let bound = Term::app(Term::Const(Prim::Cnot), Term::pair(left_src, right_src));
        let left = self.fresh();
        let right = self.fresh();
        env.linear.push(left.clone());
        env.linear.push(right.clone());
        let body = self.term_of(goal, depth.saturating_sub(1), env);
        let body = self.consume_if_leftover(body, &right, env);
        let body = self.consume_if_leftover(body, &left, env);
        Term::LetPair {
            left,
            right,
            bound: Box::new(bound),
            body: Box::new(body),
        }
    }

    /// If the binder survived generation unconsumed, measure it in a guard
    /// whose branches are both the original body: the linear sets of the
    /// branches coincide and the result type is unchanged.
    fn consume_if_leftover(&mut self, body: Term, binder: &str, env: &mut Resources) -> Term {
        if let Some(pos) = env.linear.iter().position(|v| v == binder) {
            env.linear.remove(pos);
            let guard = Term::app(Term::Const(Prim::Meas), Term::var(binder));
            Term::ite(guard, body.clone(), body)
        } else {
            body
        }
    }
}
