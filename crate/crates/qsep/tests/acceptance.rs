//! Acceptance gate: one line per criterion, with wall-clock budgets where a
//! criterion carries one.  Exits non-zero if any criterion fails.

use num_complex::Complex64;
use qsep::abstract_sem::{abstract_semantics, Aqs, DEFAULT_ABSTRACT_BUDGET};
use qsep::concrete::{run_exhaustive, step, MachineState, DEFAULT_MAX_STEPS};
use qsep::generator::{generate_program, GenConfig};
use qsep::logic::{
    entails, entails_at, satisfies, Assertion, AssertionContext, Entailment, LogicTerm, Model,
};
use qsep::parser::{parse_assertion, parse_program};
use qsep::proof::{check_judgment, parse_proof_script, ProofError, Verdict};
use qsep::qstate::{QuantumState, Tolerances};
use qsep::syntax::{Prim, Term};
use qsep::typecheck::typecheck;
use serde_json::Value;
use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::exit;
use std::time::{Duration, Instant};

const PROB_EPS: f64 = 1e-9;
const SUM_EPS: f64 = 1e-6;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn corpus(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

fn main() {
    let criteria: [(&str, &str, Option<Duration>, fn() -> Result<(), String>); 7] = [
        (
            "A1",
            "abstraction adequacy against the dense oracle",
            Some(Duration::from_secs(1)),
            a1_adequacy,
        ),
        (
            "A2",
            "single-qubit measurement distribution",
            None,
            a2_measurement,
        ),
        (
            "A3",
            "entangled-pair pipeline: exhaustive run and oracle",
            None,
            a3_entangled_pair,
        ),
        (
            "A4",
            "worked example: proof scripts, abstract run, concrete run",
            Some(Duration::from_secs(5)),
            a4_worked_example,
        ),
        (
            "A5",
            "generated-program sweep: typing, reduction, adequacy",
            Some(Duration::from_secs(60)),
            a5_generated_sweep,
        ),
        (
            "A6",
            "entailment laws and counter-models",
            Some(Duration::from_secs(10)),
            a6_entailment,
        ),
        (
            "A7",
            "tampered proof scripts are rejected with a location",
            None,
            a7_mutations,
        ),
    ];

    let mut failures = 0;
    for (id, label, budget, check) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked (see stderr)".to_string()));
        let elapsed = started.elapsed();

        let outcome = match (outcome, budget) {
            (Ok(()), Some(limit)) if elapsed > limit => Err(format!(
                "took {:.2}s, over the {:.0}s budget",
                elapsed.as_secs_f64(),
                limit.as_secs_f64()
            )),
            (other, _) => other,
        };

        match outcome {
            Ok(()) => {
                println!("{id} {label} ... PASS ({:.2}s)", elapsed.as_secs_f64());
            }
            Err(reason) => {
                failures += 1;
                println!(
                    "{id} {label} ... FAIL ({:.2}s): {reason}",
                    elapsed.as_secs_f64()
                );
            }
        }
    }

    if failures > 0 {
        eprintln!("{failures} criterion(s) failed");
        exit(1);
    }
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------------------
// A1: adequacy of four abstractions for a register holding an entangled pair
// and one basis qubit.

fn a1_adequacy() -> Result<(), String> {
    // (|001> + |111>) / sqrt(2): qubits 1 and 2 entangled, qubit 3 fixed.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![Complex64::new(0.0, 0.0); 8];
    amps[1] = Complex64::new(s, 0.0);
    amps[7] = Complex64::new(s, 0.0);
    let state =
        QuantumState::from_amplitudes(3, amps, &tol()).map_err(|e| format!("state: {e}"))?;

    let cases: [(Aqs, bool, &str); 4] = [
        (
            Aqs::from_parts(3, [BTreeSet::from([1, 2])], [3]).unwrap(),
            true,
            "pair block {1,2} with 3 pure",
        ),
        (
            Aqs::from_parts(3, [BTreeSet::from([1, 2, 3])], []).unwrap(),
            true,
            "everything related",
        ),
        (
            Aqs::from_parts(3, [BTreeSet::from([1, 2])], [2, 3]).unwrap(),
            false,
            "pair block {1,2} with 2 and 3 claimed pure",
        ),
        (
            Aqs::from_parts(3, [], [3]).unwrap(),
            false,
            "no blocks with 3 pure",
        ),
    ];

    for (aqs, expected, label) in cases {
        let got = aqs
            .adequate(&state, &tol())
            .map_err(|e| format!("{label}: {e}"))?;
        ensure(
            got == expected,
            format!("{label}: adequate = {got}, expected {expected}"),
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// A2: measuring a qubit with amplitudes (2/3, sqrt(5)/3).

fn a2_measurement() -> Result<(), String> {
    let amps = vec![
        Complex64::new(2.0 / 3.0, 0.0),
        Complex64::new(5.0_f64.sqrt() / 3.0, 0.0),
    ];
    let state =
        QuantumState::from_amplitudes(1, amps, &tol()).map_err(|e| format!("state: {e}"))?;
    let branches = state.measure(1, &tol()).map_err(|e| format!("measure: {e}"))?;

    ensure(
        branches.len() == 2,
        format!("expected 2 branches, got {}", branches.len()),
    )?;
    ensure(!branches[0].outcome, "first branch must be the false outcome")?;
    ensure(branches[1].outcome, "second branch must be the true outcome")?;
    ensure(
        (branches[0].probability - 4.0 / 9.0).abs() <= PROB_EPS,
        format!("p(false) = {}, expected 4/9", branches[0].probability),
    )?;
    ensure(
        (branches[1].probability - 5.0 / 9.0).abs() <= PROB_EPS,
        format!("p(true) = {}, expected 5/9", branches[1].probability),
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// A3: the entangled-pair program measures to two perfectly correlated
// outcomes, and before measurement the oracle reports one two-qubit block.

fn a3_entangled_pair() -> Result<(), String> {
    let measured = parse_program(&corpus("bell_measured.lq")).map_err(|e| e.to_string())?;
    let leaves = run_exhaustive(
        MachineState {
            state: QuantumState::initial(measured.qubits).unwrap(),
            term: measured.term,
        },
        &tol(),
        DEFAULT_MAX_STEPS,
    )
    .map_err(|e| e.to_string())?;

    ensure(
        leaves.len() == 2,
        format!("expected exactly 2 leaves, got {}", leaves.len()),
    )?;
    let mut outcomes = BTreeSet::new();
    for leaf in &leaves {
        ensure(
            (leaf.probability - 0.5).abs() <= PROB_EPS,
            format!("leaf probability {}, expected 0.5", leaf.probability),
        )?;
        outcomes.insert(leaf.machine.term.clone());
    }
    let correlated = BTreeSet::from([
        Term::pair(Term::BoolLit(false), Term::BoolLit(false)),
        Term::pair(Term::BoolLit(true), Term::BoolLit(true)),
    ]);
    ensure(
        outcomes == correlated,
        "outcomes must be exactly <false, false> and <true, true>",
    )?;

    // The same circuit without the measurements: one terminal state whose
    // entanglement partition is the single block {1, 2}.
    let pair = parse_program(&corpus("bell.lq")).map_err(|e| e.to_string())?;
    let leaves = run_exhaustive(
        MachineState {
            state: QuantumState::initial(pair.qubits).unwrap(),
            term: pair.term,
        },
        &tol(),
        DEFAULT_MAX_STEPS,
    )
    .map_err(|e| e.to_string())?;
    ensure(
        leaves.len() == 1,
        "the unmeasured circuit is deterministic",
    )?;
    let partition = leaves[0]
        .machine
        .state
        .entanglement_relation(&tol())
        .map_err(|e| e.to_string())?;
    ensure(
        partition.blocks == vec![BTreeSet::from([1, 2])],
        format!("expected the single block {{1, 2}}, got {:?}", partition.blocks),
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// A4: the worked example end to end.

fn a4_worked_example() -> Result<(), String> {
    // (i) both shipped derivations are accepted.
    for name in ["example1_main.proof.json", "example1_applied.proof.json"] {
        let tree = parse_proof_script(&corpus(name)).map_err(|e| format!("{name}: {e}"))?;
        let verdict = check_judgment(&tree);
        ensure(verdict.is_accepted(), format!("{name}: {verdict}"))?;
    }

    // (ii) the abstract run from two pair blocks ends in exactly four
    // terminals, each relating qubits 1 and 4 with 2 and 3 pure.
    let program = parse_program(&corpus("example1.lq")).map_err(|e| e.to_string())?;
    let start = Aqs::from_parts(4, [BTreeSet::from([1, 2]), BTreeSet::from([3, 4])], []).unwrap();
    let terminals = abstract_semantics(start, program.term.clone(), DEFAULT_ABSTRACT_BUDGET)
        .map_err(|e| e.to_string())?;
    ensure(
        terminals.len() == 4,
        format!("expected 4 abstract terminals, got {}", terminals.len()),
    )?;
    for (aqs, term) in &terminals {
        ensure(
            aqs.related(1, 4),
            format!("terminal `{term}` does not relate qubits 1 and 4"),
        )?;
        ensure(
            aqs.is_pure(2) && aqs.is_pure(3),
            format!("terminal `{term}` does not leave qubits 2 and 3 pure"),
        )?;
    }

    // (iii) the concrete run from two entangled pairs has four equiprobable
    // leaves, each tracked by an adequate abstract terminal with its value.
    let mut state = QuantumState::initial(4).unwrap();
    state.apply_hadamard(1).unwrap();
    state.apply_cnot(1, 2).unwrap();
    state.apply_hadamard(3).unwrap();
    state.apply_cnot(3, 4).unwrap();

    let leaves = run_exhaustive(
        MachineState {
            state,
            term: program.term,
        },
        &tol(),
        DEFAULT_MAX_STEPS,
    )
    .map_err(|e| e.to_string())?;
    ensure(
        leaves.len() == 4,
        format!("expected 4 concrete leaves, got {}", leaves.len()),
    )?;
    for leaf in &leaves {
        ensure(
            (leaf.probability - 0.25).abs() <= PROB_EPS,
            format!("leaf probability {}, expected 0.25", leaf.probability),
        )?;
        let tracked = terminals.iter().any(|(aqs, term)| {
            *term == leaf.machine.term && aqs.adequate(&leaf.machine.state, &tol()).unwrap()
        });
        ensure(
            tracked,
            format!(
                "leaf `{}` has no adequate abstract terminal",
                leaf.machine.term
            ),
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// A5: a sweep of 200 generated programs.

fn term_depth(term: &Term) -> usize {
    1 + match term {
        Term::Var(_) | Term::QubitRef(_) | Term::BoolLit(_) | Term::Const(_) => 0,
        Term::Lambda { body, .. } => term_depth(body),
        Term::App(f, a) | Term::Pair(f, a) => term_depth(f).max(term_depth(a)),
        Term::Proj(_, inner) => term_depth(inner),
        Term::If {
            guard,
            then_branch,
            else_branch,
        } => term_depth(guard)
            .max(term_depth(then_branch))
            .max(term_depth(else_branch)),
        Term::LetPair { bound, body, .. } => term_depth(bound).max(term_depth(body)),
    }
}

fn collect_prims(term: &Term, out: &mut BTreeSet<Prim>) {
    match term {
        Term::Const(p) => {
            out.insert(*p);
        }
        Term::Var(_) | Term::QubitRef(_) | Term::BoolLit(_) => {}
        Term::Lambda { body, .. } => collect_prims(body, out),
        Term::App(f, a) | Term::Pair(f, a) => {
            collect_prims(f, out);
            collect_prims(a, out);
        }
        Term::Proj(_, inner) => collect_prims(inner, out),
        Term::If {
            guard,
            then_branch,
            else_branch,
        } => {
            collect_prims(guard, out);
            collect_prims(then_branch, out);
            collect_prims(else_branch, out);
        }
        Term::LetPair { bound, body, .. } => {
            collect_prims(bound, out);
            collect_prims(body, out);
        }
    }
}

fn a5_generated_sweep() -> Result<(), String> {
    let mut prims_seen = BTreeSet::new();

    for seed in 0..200u64 {
        let config = GenConfig {
            qubits: 1 + (seed % 4) as usize,
            max_depth: 4,
            seed,
        };
        let program = generate_program(&config);
        collect_prims(&program.term, &mut prims_seen);

        let depth = term_depth(&program.term);
        ensure(
            depth <= 12,
            format!("seed {seed}: depth {depth} exceeds 12: {}", program.term),
        )?;

        let ty = typecheck(&program.term).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(
            ty == program.ty,
            format!("seed {seed}: generator type disagrees with the checker"),
        )?;

        // Subject reduction: every reachable configuration keeps the type.
        let mut frontier = vec![MachineState {
            state: QuantumState::initial(config.qubits).unwrap(),
            term: program.term.clone(),
        }];
        while let Some(machine) = frontier.pop() {
            let branches = step(&machine, &tol()).map_err(|e| format!("seed {seed}: {e}"))?;
            for branch in branches {
                let after = typecheck(&branch.machine.term)
                    .map_err(|e| format!("seed {seed}: step produced an ill-typed term: {e}"))?;
                ensure(
                    after == ty,
                    format!(
                        "seed {seed}: type changed from `{ty}` to `{after}` at `{}`",
                        branch.machine.term
                    ),
                )?;
                frontier.push(branch.machine);
            }
        }

        // The exhaustive run is a probability distribution over leaves.
        let leaves = run_exhaustive(
            MachineState {
                state: QuantumState::initial(config.qubits).unwrap(),
                term: program.term.clone(),
            },
            &tol(),
            DEFAULT_MAX_STEPS,
        )
        .map_err(|e| format!("seed {seed}: {e}"))?;
        let total: f64 = leaves.iter().map(|l| l.probability).sum();
        ensure(
            (total - 1.0).abs() <= SUM_EPS,
            format!("seed {seed}: leaf probabilities sum to {total}"),
        )?;

        // Every concrete leaf is tracked by an adequate abstract terminal,
        // both from the coarsest abstraction and from the all-pure one.
        for start in [Aqs::top(config.qubits), Aqs::all_pure(config.qubits)] {
            let terminals =
                abstract_semantics(start, program.term.clone(), DEFAULT_ABSTRACT_BUDGET)
                    .map_err(|e| format!("seed {seed}: {e}"))?;
            for leaf in &leaves {
                let tracked = terminals.iter().any(|(aqs, term)| {
                    *term == leaf.machine.term
                        && aqs.adequate(&leaf.machine.state, &tol()).unwrap()
                });
                ensure(
                    tracked,
                    format!(
                        "seed {seed}: leaf `{}` has no adequate abstract terminal",
                        leaf.machine.term
                    ),
                )?;
            }
        }
    }

    let all = BTreeSet::from([Prim::Meas, Prim::Cnot, Prim::Hadamard, Prim::Phase]);
    ensure(
        prims_seen == all,
        format!("not every primitive was generated: saw {prims_seen:?}"),
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// A6: laws of the entailment checker.

fn a6_entailment() -> Result<(), String> {
    let ctx = AssertionContext::new();

    let transitivity =
        parse_assertion("forall x. forall y. forall z. (x ~ y /\\ y ~ z) -> x ~ z")
            .map_err(|e| e.to_string())?;
    ensure(
        entails_at(&ctx, &Assertion::True, &transitivity, 4)
            .map_err(|e| e.to_string())?
            .is_valid(),
        "the relation must be transitive",
    )?;

    let symmetry =
        parse_assertion("forall x. forall y. x ~ y -> y ~ x").map_err(|e| e.to_string())?;
    ensure(
        entails_at(&ctx, &Assertion::True, &symmetry, 4)
            .map_err(|e| e.to_string())?
            .is_valid(),
        "the relation must be symmetric",
    )?;

    // Entanglement with a partner never entails purity; the refutation must
    // come with a genuine counter-model.
    let premise = parse_assertion("q1 ~ q2").map_err(|e| e.to_string())?;
    let conclusion = parse_assertion("pure q1").map_err(|e| e.to_string())?;
    match entails(&ctx, &premise, &conclusion).map_err(|e| e.to_string())? {
        Entailment::Valid => return Err("`q1 ~ q2` must not entail `pure q1`".to_string()),
        Entailment::Invalid(counter) => {
            let model = Model {
                aqs: counter.aqs.clone(),
                interp: counter.interp.clone(),
            };
            ensure(
                satisfies(&model, &premise).map_err(|e| e.to_string())?,
                "the counter-model must satisfy the premise",
            )?;
            ensure(
                !satisfies(&model, &conclusion).map_err(|e| e.to_string())?,
                "the counter-model must violate the conclusion",
            )?;
        }
    }

    // Reflexivity over a corpus of fifty distinct assertions.
    let atom = |k: usize| -> Assertion {
        match k % 7 {
            0 => Assertion::Entangled(LogicTerm::Qubit(1), LogicTerm::Qubit(2)),
            1 => Assertion::Entangled(LogicTerm::Qubit(2), LogicTerm::Qubit(3)),
            2 => Assertion::Entangled(LogicTerm::Qubit(1), LogicTerm::Qubit(3)),
            3 => Assertion::Pure(LogicTerm::Qubit(1)),
            4 => Assertion::Pure(LogicTerm::Qubit(2)),
            5 => Assertion::Pure(LogicTerm::Qubit(3)),
            _ => Assertion::True,
        }
    };
    let mut corpus = BTreeSet::new();
    let mut i = 0;
    while corpus.len() < 50 {
        let a = atom(i);
        let b = atom(i / 7);
        corpus.insert(match i % 3 {
            0 => Assertion::and(a, b),
            1 => Assertion::or(a, Assertion::not(b)),
            _ => Assertion::implies(Assertion::and(a.clone(), b), a),
        });
        i += 1;
    }
    for assertion in &corpus {
        ensure(
            entails(&ctx, assertion, assertion)
                .map_err(|e| e.to_string())?
                .is_valid(),
            format!("entailment must be reflexive on `{assertion}`"),
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// A7: single-point mutations of shipped scripts must be rejected with a
// location.

/// Collects `(json_pointer, checker_location)` for every node of a script.
fn proof_nodes(value: &Value, pointer: String, location: String, out: &mut Vec<(String, String)>) {
    if value.get("rule").is_some() {
        out.push((pointer.clone(), location.clone()));
    }
    if let Some(premises) = value.get("premises").and_then(Value::as_array) {
        for (i, premise) in premises.iter().enumerate() {
            proof_nodes(
                premise,
                format!("{pointer}/premises/{i}"),
                format!("{location}.premises[{i}]"),
                out,
            );
        }
    }
}

fn expect_rejection(script: &str, what: &str) -> Result<(), String> {
    let tree = parse_proof_script(script).map_err(|e| format!("{what}: unexpected {e}"))?;
    match check_judgment(&tree) {
        Verdict::Accepted => Err(format!("{what}: the mutated script was accepted")),
        Verdict::Rejected { path, .. } => {
            ensure(
                path.starts_with("root"),
                format!("{what}: rejection path `{path}` does not name a node"),
            )
        }
    }
}

fn a7_mutations() -> Result<(), String> {
    // Renaming the rule at any node must yield a rejection with a path.
    // The applied script embeds the main derivation at
    // /premises/0/premises/0; those nodes are covered by the first walk.
    let scripts: [(&str, Option<&str>); 2] = [
        ("example1_main.proof.json", None),
        ("example1_applied.proof.json", Some("/premises/0/premises/0")),
    ];
    for (name, skip_prefix) in scripts {
        let source = corpus(name);
        let root: Value = serde_json::from_str(&source).map_err(|e| e.to_string())?;
        let mut nodes = Vec::new();
        proof_nodes(&root, String::new(), "root".to_string(), &mut nodes);
        ensure(!nodes.is_empty(), format!("{name}: no nodes found"))?;

        for (pointer, location) in &nodes {
            if let Some(prefix) = skip_prefix {
                if pointer.starts_with(prefix) {
                    continue;
                }
            }
            let mut mutated = root.clone();
            let node = mutated
                .pointer_mut(pointer)
                .ok_or_else(|| format!("{name}: bad pointer {pointer}"))?;
            let original = node["rule"].as_str().unwrap_or_default().to_string();
            let replacement = if original == "JDGVAR" { "JDGQBIT" } else { "JDGVAR" };
            node["rule"] = Value::String(replacement.to_string());

            let text = serde_json::to_string(&mutated).map_err(|e| e.to_string())?;
            expect_rejection(
                &text,
                &format!("{name}: {original} -> {replacement} at {location}"),
            )?;
        }
    }

    // An unknown rule name is reported with its location.
    let source = corpus("example1_main.proof.json");
    let mut root: Value = serde_json::from_str(&source).map_err(|e| e.to_string())?;
    root["rule"] = Value::String("JDGWOBBLE".to_string());
    let text = serde_json::to_string(&root).map_err(|e| e.to_string())?;
    match parse_proof_script(&text) {
        Err(ProofError::UnknownRule { location, name }) => {
            ensure(
                location == "root" && name == "JDGWOBBLE",
                format!("unknown rule reported as `{name}` at `{location}`"),
            )?;
        }
        Err(other) => return Err(format!("unexpected error: {other}")),
        Ok(_) => return Err("an unknown rule name was tolerated".to_string()),
    }

    // Deleting the control-purity conjunct from the pure-control gate script
    // is rejected at the root, with the exact verdict pinned.
    let source = corpus("cnotone.proof.json");
    let root: Value = serde_json::from_str(&source).map_err(|e| e.to_string())?;

    // Variant 1: only the conclusion's postcondition loses the conjunct.
    let mut weakened = root.clone();
    weakened["conclusion"]["post"] = Value::String("q3 ~ q4".to_string());
    let tree = parse_proof_script(&serde_json::to_string(&weakened).unwrap())
        .map_err(|e| e.to_string())?;
    let expected = Verdict::Rejected {
        path: "root".to_string(),
        reason: "JDGCNOTONE passes the postcondition through unchanged (a pure control is \
                 untouched), but they differ"
            .to_string(),
    };
    let got = check_judgment(&tree);
    ensure(
        got == expected,
        format!("conclusion-only deletion: got `{got}`, expected `{expected}`"),
    )?;

    // Variant 2: the premise's postcondition loses it too, so the purity
    // fact is gone entirely.
    let mut stripped = weakened;
    stripped["premises"][0]["conclusion"]["post"] = Value::String("q3 ~ q4".to_string());
    let tree = parse_proof_script(&serde_json::to_string(&stripped).unwrap())
        .map_err(|e| e.to_string())?;
    let expected = Verdict::Rejected {
        path: "root".to_string(),
        reason: "JDGCNOTONE needs `pure u` among the conjuncts describing the control, found \
                 `q3 ~ q4`"
            .to_string(),
    };
    let got = check_judgment(&tree);
    ensure(
        got == expected,
        format!("full deletion: got `{got}`, expected `{expected}`"),
    )?;

    Ok(())
}
