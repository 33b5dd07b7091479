//! Dense state-vector simulation of the global qubit register, plus the
//! measurement-based oracles used to validate the abstract semantics:
//! separability of a subset of qubits, the finest partition of the register
//! into unentangled groups, and detection of computational-basis qubits.
//!
//! Qubits are numbered from 1. Qubit 1 is the most significant bit of a
//! basis-state index, so for a register of `n` qubits the value of qubit
//! `i` in basis state `idx` is bit `n - i` of `idx`.

use num_complex::Complex64;
use std::collections::BTreeSet;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use thiserror::Error;

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 12;

/// Largest register the separability oracles accept. The oracles build
/// reduced density matrices over arbitrary subsets, which is exponentially
/// more expensive than plain simulation.
pub const ORACLE_MAX_QUBITS: usize = 8;

/// Numerical tolerances, pinned in one place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Allowed deviation of a state's squared norm from 1.
    pub norm: f64,
    /// Measurement branches with probability at or below this are dropped.
    pub prob: f64,
    /// Allowed deviation when deciding purity of a reduced state and
    /// definiteness of a qubit.
    pub purity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            norm: 1e-9,
            prob: 1e-12,
            purity: 1e-9,
        }
    }
}

/// Errors from constructing or operating on states.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("register of {0} qubits exceeds the supported maximum of {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("register of {0} qubits exceeds the oracle maximum of {ORACLE_MAX_QUBITS}")]
    TooLargeForOracle(usize),
    #[error("expected {expected} amplitudes for {qubits} qubit(s), got {got}")]
    WrongLength {
        qubits: usize,
        expected: usize,
        got: usize,
    },
    #[error("state is not normalized: squared norm is {0}")]
    NotNormalized(f64),
    #[error("qubit q{qubit} is out of range for a register of {n} qubit(s)")]
    QubitOutOfRange { qubit: usize, n: usize },
    #[error("controlled-not requires two distinct qubits, got q{0} twice")]
    CnotSameQubit(usize),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// A pure state of the global register.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n: usize,
    amps: Vec<Complex64>,
}

/// One outcome of measuring a qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureBranch {
    pub probability: f64,
    pub outcome: bool,
    pub state: QuantumState,
}

/// The finest partition of the register into groups that are mutually
/// unentangled. Two qubits are entangled exactly when they share a block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntanglementPartition {
    pub blocks: Vec<BTreeSet<usize>>,
}

impl EntanglementPartition {
    /// Whether two qubits belong to the same block.
    pub fn related(&self, a: usize, b: usize) -> bool {
        self.blocks
            .iter()
            .any(|block| block.contains(&a) && block.contains(&b))
    }

    /// Blocks of size at least two: the genuinely entangled groups.
    pub fn entangled_blocks(&self) -> Vec<&BTreeSet<usize>> {
        self.blocks.iter().filter(|b| b.len() >= 2).collect()
    }
}

impl fmt::Display for EntanglementPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for block in &self.blocks {
            if !first {
                f.write_str(" | ")?;
            }
            first = false;
            let mut first_q = true;
            for q in block {
                if !first_q {
                    f.write_str(" ")?;
                }
                first_q = false;
                write!(f, "q{q}")?;
            }
        }
        Ok(())
    }
}

impl QuantumState {
    /// The register with every qubit in state `|false>`.
    pub fn initial(n: usize) -> Result<QuantumState, StateError> {
        if n > MAX_QUBITS {
            return Err(StateError::TooManyQubits(n));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(QuantumState { n, amps })
    }

    /// Build a state from explicit amplitudes, checking the length and the
    /// normalization.
    pub fn from_amplitudes(
        n: usize,
        amps: Vec<Complex64>,
        tol: &Tolerances,
    ) -> Result<QuantumState, StateError> {
        if n > MAX_QUBITS {
            return Err(StateError::TooManyQubits(n));
        }
        if amps.len() != 1 << n {
            return Err(StateError::WrongLength {
                qubits: n,
                expected: 1 << n,
                got: amps.len(),
            });
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > tol.norm {
            return Err(StateError::NotNormalized(norm));
        }
        Ok(QuantumState { n, amps })
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Bit position (from the least significant end) of a qubit.
    fn bit_pos(&self, qubit: usize) -> Result<usize, StateError> {
        if qubit == 0 || qubit > self.n {
            return Err(StateError::QubitOutOfRange {
                qubit,
                n: self.n,
            });
        }
        Ok(self.n - qubit)
    }

    /// Value of a qubit in a given basis-state index.
    fn bit_of(&self, idx: usize, pos: usize) -> bool {
        (idx >> pos) & 1 == 1
    }

    /// Apply a Hadamard gate to a qubit.
    pub fn apply_hadamard(&mut self, qubit: usize) -> Result<(), StateError> {
        let pos = self.bit_pos(qubit)?;
        let mask = 1usize << pos;
        for idx in 0..self.amps.len() {
            if idx & mask == 0 {
                let lo = self.amps[idx];
                let hi = self.amps[idx | mask];
                self.amps[idx] = (lo + hi) * FRAC_1_SQRT_2;
                self.amps[idx | mask] = (lo - hi) * FRAC_1_SQRT_2;
            }
        }
        Ok(())
    }

    /// Apply the phase gate `diag(1, e^{i*pi/4})` to a qubit.
    pub fn apply_phase(&mut self, qubit: usize) -> Result<(), StateError> {
        let pos = self.bit_pos(qubit)?;
        let mask = 1usize << pos;
        let phase = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        for idx in 0..self.amps.len() {
            if idx & mask != 0 {
                self.amps[idx] *= phase;
            }
        }
        Ok(())
    }

    /// Apply a controlled-not gate.
    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<(), StateError> {
        if control == target {
            return Err(StateError::CnotSameQubit(control));
        }
        let cpos = self.bit_pos(control)?;
        let tpos = self.bit_pos(target)?;
        let cmask = 1usize << cpos;
        let tmask = 1usize << tpos;
        for idx in 0..self.amps.len() {
            if idx & cmask != 0 && idx & tmask == 0 {
                self.amps.swap(idx, idx | tmask);
            }
        }
        Ok(())
    }

    /// Probability that measuring the qubit yields `true`.
    pub fn probability_of_one(&self, qubit: usize) -> Result<f64, StateError> {
        let pos = self.bit_pos(qubit)?;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(idx, _)| self.bit_of(*idx, pos))
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Measure a qubit in the computational basis. Returns the outcomes with
    /// nonnegligible probability, `false` first, each with its collapsed,
    /// renormalized state.
    pub fn measure(
        &self,
        qubit: usize,
        tol: &Tolerances,
    ) -> Result<Vec<MeasureBranch>, StateError> {
        let pos = self.bit_pos(qubit)?;
        let mut branches = Vec::new();
        for outcome in [false, true] {
            let probability: f64 = self
                .amps
                .iter()
                .enumerate()
                .filter(|(idx, _)| self.bit_of(*idx, pos) == outcome)
                .map(|(_, a)| a.norm_sqr())
                .sum();
            if probability <= tol.prob {
                continue;
            }
            let scale = 1.0 / probability.sqrt();
            let amps = self
                .amps
                .iter()
                .enumerate()
                .map(|(idx, a)| {
                    if self.bit_of(idx, pos) == outcome {
                        a * scale
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            branches.push(MeasureBranch {
                probability,
                outcome,
                state: QuantumState { n: self.n, amps },
            });
        }
        Ok(branches)
    }

    /// Whether the state is a computational-basis vector (up to global
    /// phase): one basis state holds essentially all of the weight.
    pub fn is_base_state(&self, tol: &Tolerances) -> bool {
        self.amps
            .iter()
            .map(|a| a.norm_sqr())
            .fold(0.0, f64::max)
            >= 1.0 - tol.purity
    }

    /// Whether a single qubit is definitely `false` or definitely `true`:
    /// its measurement outcome has probability within tolerance of 0 or 1.
    /// Such a qubit is automatically unentangled from the rest.
    pub fn qubit_is_base(&self, qubit: usize, tol: &Tolerances) -> Result<bool, StateError> {
        let p = self.probability_of_one(qubit)?;
        Ok(p <= tol.purity || p >= 1.0 - tol.purity)
    }

    /// Purity of the reduced state of a subset of qubits: 1 exactly when the
    /// subset is unentangled from the rest of the register.
    pub fn reduced_purity(&self, subset: &BTreeSet<usize>) -> Result<f64, StateError> {
        if self.n > ORACLE_MAX_QUBITS {
            return Err(StateError::TooLargeForOracle(self.n));
        }
        let mut inside = Vec::new();
        for &q in subset {
            inside.push(self.bit_pos(q)?);
        }
        let outside: Vec<usize> = (0..self.n)
            .filter(|pos| !inside.contains(pos))
            .collect();
        let k = inside.len();
        let rows = 1usize << k;
        let cols = 1usize << outside.len();
        // Reshape the vector into a matrix indexed by (subset bits, rest bits).
        let mut matrix = vec![Complex64::new(0.0, 0.0); rows * cols];
        for (idx, amp) in self.amps.iter().enumerate() {
            let mut row = 0usize;
            for (bit, &pos) in inside.iter().enumerate() {
                if self.bit_of(idx, pos) {
                    row |= 1 << (k - 1 - bit);
                }
            }
            let mut col = 0usize;
            for (bit, &pos) in outside.iter().enumerate() {
                if self.bit_of(idx, pos) {
                    col |= 1 << (outside.len() - 1 - bit);
                }
            }
            matrix[row * cols + col] = *amp;
        }
        // purity = sum over (a, a') of |rho[a][a']|^2
        // with rho[a][a'] = sum over b of M[a][b] * conj(M[a'][b]).
        let mut purity = 0.0;
        for a in 0..rows {
            for a2 in 0..rows {
                let mut entry = Complex64::new(0.0, 0.0);
                for b in 0..cols {
                    entry += matrix[a * cols + b] * matrix[a2 * cols + b].conj();
                }
                purity += entry.norm_sqr();
            }
        }
        Ok(purity)
    }

    /// Whether a subset of qubits is unentangled from the rest.
    pub fn is_separable(
        &self,
        subset: &BTreeSet<usize>,
        tol: &Tolerances,
    ) -> Result<bool, StateError> {
        Ok(self.reduced_purity(subset)? >= 1.0 - tol.purity)
    }

    /// The finest partition of the register into mutually unentangled
    /// groups: repeatedly split off the smallest separable subset (smallest
    /// size first, ties broken lexicographically) of the remaining qubits.
    ///
    /// Splitting off a *smallest* separable subset first guarantees the
    /// result is the finest partition: a minimal separable subset cannot
    /// overlap another separable subset partially, so greedy extraction
    /// never merges groups that could be split.
    pub fn entanglement_relation(
        &self,
        tol: &Tolerances,
    ) -> Result<EntanglementPartition, StateError> {
        if self.n > ORACLE_MAX_QUBITS {
            return Err(StateError::TooLargeForOracle(self.n));
        }
        let mut remaining: Vec<usize> = (1..=self.n).collect();
        let mut blocks = Vec::new();
        while !remaining.is_empty() {
            let block = self.smallest_separable_subset(&remaining, tol)?;
            remaining.retain(|q| !block.contains(q));
            blocks.push(block);
        }
        blocks.sort_by_key(|b| b.iter().next().copied());
        Ok(EntanglementPartition { blocks })
    }

    fn smallest_separable_subset(
        &self,
        remaining: &[usize],
        tol: &Tolerances,
    ) -> Result<BTreeSet<usize>, StateError> {
        let m = remaining.len();
        // Enumerate nonempty subsets by size, then lexicographically by
        // members; the full remaining set is always separable (its
        // complement was already split off), so the loop terminates.
        for size in 1..=m {
            let mut best: Option<BTreeSet<usize>> = None;
            for bits in 1usize..(1 << m) {
                if (bits as u32).count_ones() as usize != size {
                    continue;
                }
                let subset: BTreeSet<usize> = remaining
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| bits >> j & 1 == 1)
                    .map(|(_, &q)| q)
                    .collect();
                if self.is_separable(&subset, tol)? {
                    let better = match &best {
                        None => true,
                        Some(b) => subset < *b,
                    };
                    if better {
                        best = Some(subset);
                    }
                }
            }
            if let Some(b) = best {
                return Ok(b);
            }
        }
        // Unreachable: the full set is separable by construction.
        Ok(remaining.iter().copied().collect())
    }

    /// Tensor product: `self`'s qubits keep their numbers, `other`'s are
    /// renumbered to follow them.
    pub fn tensor(&self, other: &QuantumState) -> Result<QuantumState, StateError> {
        let n = self.n + other.n;
        if n > MAX_QUBITS {
            return Err(StateError::TooManyQubits(n));
        }
        let mut amps = Vec::with_capacity(1 << n);
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(QuantumState { n, amps })
    }

    /// Whether two states are elementwise within `eps` of each other.
    pub fn approx_eq(&self, other: &QuantumState, eps: f64) -> bool {
        self.n == other.n
            && self
                .amps
                .iter()
                .zip(&other.amps)
                .all(|(a, b)| (a - b).norm() <= eps)
    }

    /// Squared norm of the state.
    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Render as a state file: a `qubits N` header, then one line per
    /// nonzero amplitude, `BITS: RE IM`, where the leftmost bit is qubit 1.
    /// Floats print in shortest round-trip form, so parsing the output
    /// reproduces the amplitudes exactly.
    pub fn render_state_file(&self) -> String {
        let mut out = format!("qubits {}\n", self.n);
        for (idx, amp) in self.amps.iter().enumerate() {
            if amp.re == 0.0 && amp.im == 0.0 {
                continue;
            }
            let bits: String = (0..self.n)
                .map(|i| {
                    if idx >> (self.n - 1 - i) & 1 == 1 {
                        '1'
                    } else {
                        '0'
                    }
                })
                .collect();
            let line = if self.n == 0 { String::new() } else { bits };
            out.push_str(&format!("{line}: {} {}\n", amp.re, amp.im));
        }
        out
    }

    /// Parse the state-file format produced by [`render_state_file`].
    /// Missing basis states have amplitude zero; `#` starts a comment.
    pub fn parse_state_file(src: &str, tol: &Tolerances) -> Result<QuantumState, StateError> {
        let mut n: Option<usize> = None;
        let mut amps: Vec<Complex64> = Vec::new();
        for (lineno, raw) in src.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| StateError::Malformed {
                line: lineno + 1,
                message,
            };
            if let Some(rest) = line.strip_prefix("qubits") {
                if n.is_some() {
                    return Err(err("duplicate `qubits` header".into()));
                }
                let count: usize = rest
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("bad qubit count `{}`", rest.trim())))?;
                if count > MAX_QUBITS {
                    return Err(StateError::TooManyQubits(count));
                }
                n = Some(count);
                amps = vec![Complex64::new(0.0, 0.0); 1 << count];
                continue;
            }
            let n = n.ok_or_else(|| err("expected a `qubits N` header first".into()))?;
            let (bits, rest) = line
                .split_once(':')
                .ok_or_else(|| err("expected `BITS: RE IM`".into()))?;
            let bits = bits.trim();
            if bits.len() != n || !bits.chars().all(|c| c == '0' || c == '1') {
                return Err(err(format!(
                    "basis label `{bits}` is not {n} binary digit(s)"
                )));
            }
            let idx = bits
                .chars()
                .fold(0usize, |acc, c| (acc << 1) | usize::from(c == '1'));
            let mut parts = rest.split_whitespace();
            let re: f64 = parts
                .next()
                .ok_or_else(|| err("missing real part".into()))?
                .parse()
                .map_err(|_| err("bad real part".into()))?;
            let im: f64 = parts
                .next()
                .ok_or_else(|| err("missing imaginary part".into()))?
                .parse()
                .map_err(|_| err("bad imaginary part".into()))?;
            if parts.next().is_some() {
                return Err(err("trailing input after the amplitude".into()));
            }
            amps[idx] = Complex64::new(re, im);
        }
        let n = n.ok_or(StateError::Malformed {
            line: 1,
            message: "missing `qubits N` header".into(),
        })?;
        QuantumState::from_amplitudes(n, amps, tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn bell() -> QuantumState {
        let mut s = QuantumState::initial(2).unwrap();
        s.apply_hadamard(1).unwrap();
        s.apply_cnot(1, 2).unwrap();
        s
    }

    #[test]
    fn hadamard_creates_uniform_superposition() {
        let mut s = QuantumState::initial(1).unwrap();
        s.apply_hadamard(1).unwrap();
        assert!((s.amplitudes()[0].re - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((s.amplitudes()[1].re - FRAC_1_SQRT_2).abs() < 1e-12);
        let branches = s.measure(1, &tol()).unwrap();
        assert_eq!(branches.len(), 2);
        assert!((branches[0].probability - 0.5).abs() < 1e-12);
        assert!(!branches[0].outcome);
        assert!((branches[1].probability - 0.5).abs() < 1e-12);
        assert!(branches[1].outcome);
    }

    #[test]
    fn bell_state_amplitudes_and_entanglement() {
        let s = bell();
        let a = s.amplitudes();
        assert!((a[0].re - FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(a[1], Complex64::new(0.0, 0.0));
        assert_eq!(a[2], Complex64::new(0.0, 0.0));
        assert!((a[3].re - FRAC_1_SQRT_2).abs() < 1e-12);

        let one = BTreeSet::from([1]);
        assert!((s.reduced_purity(&one).unwrap() - 0.5).abs() < 1e-12);
        assert!(!s.is_separable(&one, &tol()).unwrap());
        let both = BTreeSet::from([1, 2]);
        assert!(s.is_separable(&both, &tol()).unwrap());

        let rel = s.entanglement_relation(&tol()).unwrap();
        assert_eq!(rel.blocks, vec![BTreeSet::from([1, 2])]);
        assert!(rel.related(1, 2));
    }

    #[test]
    fn measuring_bell_collapses_both_qubits() {
        let s = bell();
        let branches = s.measure(1, &tol()).unwrap();
        assert_eq!(branches.len(), 2);
        for branch in &branches {
            assert!((branch.probability - 0.5).abs() < 1e-12);
            assert!(branch.state.is_base_state(&tol()));
            let p2 = branch.state.probability_of_one(2).unwrap();
            let expected = if branch.outcome { 1.0 } else { 0.0 };
            assert!((p2 - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn skewed_superposition_measures_with_exact_probabilities() {
        // (2/3)|00> + (sqrt(5)/3)|11>
        let amps = vec![
            Complex64::new(2.0 / 3.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(5f64.sqrt() / 3.0, 0.0),
        ];
        let s = QuantumState::from_amplitudes(2, amps, &tol()).unwrap();
        let branches = s.measure(1, &tol()).unwrap();
        assert_eq!(branches.len(), 2);
        assert!((branches[0].probability - 4.0 / 9.0).abs() < 1e-12);
        assert!((branches[1].probability - 5.0 / 9.0).abs() < 1e-12);
        assert!(!s.is_separable(&BTreeSet::from([2]), &tol()).unwrap());
    }

    #[test]
    fn deterministic_branches_are_dropped() {
        let s = QuantumState::initial(2).unwrap();
        let branches = s.measure(2, &tol()).unwrap();
        assert_eq!(branches.len(), 1);
        assert!(!branches[0].outcome);
        assert!((branches[0].probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ghz_state_is_one_block() {
        let mut s = QuantumState::initial(3).unwrap();
        s.apply_hadamard(1).unwrap();
        s.apply_cnot(1, 2).unwrap();
        s.apply_cnot(2, 3).unwrap();
        let rel = s.entanglement_relation(&tol()).unwrap();
        assert_eq!(rel.blocks, vec![BTreeSet::from([1, 2, 3])]);
    }

    #[test]
    fn product_states_split_into_singletons() {
        let mut s = QuantumState::initial(2).unwrap();
        s.apply_hadamard(1).unwrap();
        s.apply_hadamard(2).unwrap();
        let rel = s.entanglement_relation(&tol()).unwrap();
        assert_eq!(
            rel.blocks,
            vec![BTreeSet::from([1]), BTreeSet::from([2])]
        );
        assert!(!s.qubit_is_base(1, &tol()).unwrap());
        assert!(!s.qubit_is_base(2, &tol()).unwrap());
        assert!(!s.is_base_state(&tol()));
    }

    #[test]
    fn base_qubits_are_detected() {
        let mut s = QuantumState::initial(2).unwrap();
        s.apply_hadamard(1).unwrap();
        assert!(!s.qubit_is_base(1, &tol()).unwrap());
        assert!(s.qubit_is_base(2, &tol()).unwrap());
    }

    #[test]
    fn phase_gate_preserves_probabilities_but_not_amplitudes() {
        let mut s = QuantumState::initial(1).unwrap();
        s.apply_hadamard(1).unwrap();
        let before = s.clone();
        s.apply_phase(1).unwrap();
        assert!((s.probability_of_one(1).unwrap() - 0.5).abs() < 1e-12);
        assert!(!s.approx_eq(&before, 1e-6));
        let expected = Complex64::from_polar(FRAC_1_SQRT_2, std::f64::consts::FRAC_PI_4);
        assert!((s.amplitudes()[1] - expected).norm() < 1e-12);
    }

    #[test]
    fn cnot_respects_qubit_numbering() {
        // |01>: qubit 1 is false, qubit 2 is true.
        let amps = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ];
        let mut s = QuantumState::from_amplitudes(2, amps, &tol()).unwrap();
        // Control on qubit 2 (true), so qubit 1 flips: result |11>.
        s.apply_cnot(2, 1).unwrap();
        assert!((s.amplitudes()[3].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tensor_renumbers_the_second_register() {
        let one = {
            let mut amps = vec![Complex64::new(0.0, 0.0); 2];
            amps[1] = Complex64::new(1.0, 0.0);
            QuantumState::from_amplitudes(1, amps, &tol()).unwrap()
        };
        let s = bell().tensor(&one).unwrap();
        assert_eq!(s.qubits(), 3);
        // (|00> + |11>)/sqrt(2) tensor |1> = (|001> + |111>)/sqrt(2)
        assert!((s.amplitudes()[1].re - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((s.amplitudes()[7].re - FRAC_1_SQRT_2).abs() < 1e-12);
        let rel = s.entanglement_relation(&tol()).unwrap();
        assert_eq!(
            rel.blocks,
            vec![BTreeSet::from([1, 2]), BTreeSet::from([3])]
        );
        assert!(s.qubit_is_base(3, &tol()).unwrap());
        assert!(!s.qubit_is_base(1, &tol()).unwrap());
    }

    #[test]
    fn state_file_round_trips_exactly() {
        let mut s = bell();
        s.apply_phase(2).unwrap();
        let rendered = s.render_state_file();
        let parsed = QuantumState::parse_state_file(&rendered, &tol()).unwrap();
        assert_eq!(parsed, s);
    }

    #[test]
    fn state_file_parsing_reports_errors() {
        assert!(matches!(
            QuantumState::parse_state_file("00: 1 0", &tol()),
            Err(StateError::Malformed { .. })
        ));
        assert!(matches!(
            QuantumState::parse_state_file("qubits 2\n000: 1 0", &tol()),
            Err(StateError::Malformed { .. })
        ));
        assert!(matches!(
            QuantumState::parse_state_file("qubits 1\n0: 0.5 0", &tol()),
            Err(StateError::NotNormalized(_))
        ));
        let ok = QuantumState::parse_state_file(
            "# comment\nqubits 1\n1: 1 0 # the excited state\n",
            &tol(),
        )
        .unwrap();
        assert!((ok.amplitudes()[1].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn construction_is_validated() {
        assert!(matches!(
            QuantumState::initial(MAX_QUBITS + 1),
            Err(StateError::TooManyQubits(_))
        ));
        assert!(matches!(
            QuantumState::from_amplitudes(2, vec![Complex64::new(1.0, 0.0)], &tol()),
            Err(StateError::WrongLength { .. })
        ));
        let mut s = QuantumState::initial(2).unwrap();
        assert!(matches!(
            s.apply_cnot(1, 1),
            Err(StateError::CnotSameQubit(1))
        ));
        assert!(matches!(
            s.apply_hadamard(3),
            Err(StateError::QubitOutOfRange { qubit: 3, n: 2 })
        ));
        assert!(matches!(
            s.apply_hadamard(0),
            Err(StateError::QubitOutOfRange { qubit: 0, n: 2 })
        ));
    }
}
