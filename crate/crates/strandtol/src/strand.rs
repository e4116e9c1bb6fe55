//! The strand engine: propagates a joint symbolic Pauli-error distribution
//! through a list of fault locations, applies measurement-with-reveal frame
//! semantics, and records checkpoint error probabilities.
//!
//! The same location list drives a sampling simulator used as a validation
//! oracle; both share one set of conventions:
//!
//! * fresh errors act after the ideal gate they decorate;
//! * a measurement reads the checked component of the measured qubit, XORs in
//!   an independent Bernoulli flip, and reveals the resulting bit; the frame
//!   correction is applied on bit = 1 and the measured qubit is then dropped;
//! * waiting qubits accumulate no error.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pauli::{CliffordGate, PauliOp, PauliString, QubitId};
use crate::symbolic::{EvalError, Param, Poly};

/// Identifier for a recorded extraction bit awaiting a joint frame decision.
pub type BitId = u32;

/// Recorded bits live on virtual qubits above this offset.
const BIT_QUBIT_BASE: QubitId = 1 << 16;

fn bit_qubit(bit: BitId) -> QubitId {
    BIT_QUBIT_BASE + bit
}

/// Which Pauli component flips the classical bit of a measurement, or is
/// counted at a data output. `X` means the operator anticommutes with a
/// computational-basis measurement (X or Y); `Z` means Z or Y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckKind {
    X,
    Z,
}

impl CheckKind {
    pub fn hit(self, op: PauliOp) -> bool {
        match self {
            CheckKind::X => op.x_bit(),
            CheckKind::Z => op.z_bit(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::X => "X",
            CheckKind::Z => "Z",
        }
    }
}

/// Ideal one-qubit gates available at a fault location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OneQubitKind {
    Identity,
    H,
    P,
}

impl OneQubitKind {
    fn clifford(self, qubit: QubitId) -> Option<CliffordGate> {
        match self {
            OneQubitKind::Identity => None,
            OneQubitKind::H => Some(CliffordGate::H(qubit)),
            OneQubitKind::P => Some(CliffordGate::P(qubit)),
        }
    }
}

/// What to do with a revealed measurement bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FrameRule {
    /// Multiply these Paulis into the state whenever the bit reads 1.
    Apply(Vec<(QubitId, PauliOp)>),
    /// Store the bit for a later joint decision.
    Record(BitId),
}

/// JSON encodings for Pauli-keyed error maps (`"X"`, `"Y"`, `"Z"` and
/// `"IX"`..`"ZZ"` keys).
mod pauli_maps {
    use super::*;
    use serde::{Deserializer, Serializer};

    fn op_from(c: char) -> Option<PauliOp> {
        match c {
            'I' => Some(PauliOp::I),
            'X' => Some(PauliOp::X),
            'Y' => Some(PauliOp::Y),
            'Z' => Some(PauliOp::Z),
            _ => None,
        }
    }

    pub mod one {
        use super::*;

        pub fn serialize<S: Serializer>(map: &BTreeMap<PauliOp, Poly>, s: S) -> Result<S::Ok, S::Error> {
            let named: BTreeMap<String, &Poly> =
                map.iter().map(|(k, v)| (k.name().to_string(), v)).collect();
            serde::Serialize::serialize(&named, s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<PauliOp, Poly>, D::Error> {
            let named = BTreeMap::<String, Poly>::deserialize(d)?;
            named
                .into_iter()
                .map(|(k, v)| {
                    let mut chars = k.chars();
                    match (chars.next().and_then(op_from), chars.next()) {
                        (Some(op), None) if op != PauliOp::I => Ok((op, v)),
                        _ => Err(serde::de::Error::custom(format!("bad Pauli key `{k}`"))),
                    }
                })
                .collect()
        }
    }

    pub mod two {
        use super::*;

        pub fn serialize<S: Serializer>(
            map: &BTreeMap<(PauliOp, PauliOp), Poly>,
            s: S,
        ) -> Result<S::Ok, S::Error> {
            let named: BTreeMap<String, &Poly> = map
                .iter()
                .map(|((a, b), v)| (format!("{}{}", a, b), v))
                .collect();
            serde::Serialize::serialize(&named, s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> Result<BTreeMap<(PauliOp, PauliOp), Poly>, D::Error> {
            let named = BTreeMap::<String, Poly>::deserialize(d)?;
            named
                .into_iter()
                .map(|(k, v)| {
                    let mut chars = k.chars();
                    match (
                        chars.next().and_then(op_from),
                        chars.next().and_then(op_from),
                        chars.next(),
                    ) {
                        (Some(a), Some(b), None) if !(a == PauliOp::I && b == PauliOp::I) => {
                            Ok(((a, b), v))
                        }
                        _ => Err(serde::de::Error::custom(format!("bad Pauli pair `{k}`"))),
                    }
                })
                .collect()
        }
    }
}

/// One fault location of a strand circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Location {
    OneQubit {
        gate: OneQubitKind,
        qubit: QubitId,
        /// Fresh error distribution, keyed by non-identity Paulis.
        #[serde(with = "pauli_maps::one")]
        errors: BTreeMap<PauliOp, Poly>,
    },
    TwoQubit {
        control: QubitId,
        target: QubitId,
        /// Fresh error distribution over the fifteen non-identity pairs
        /// (control component, target component).
        #[serde(with = "pauli_maps::two")]
        errors: BTreeMap<(PauliOp, PauliOp), Poly>,
    },
    AncillaIntro {
        qubit: QubitId,
        #[serde(with = "pauli_maps::one")]
        dist: BTreeMap<PauliOp, Poly>,
    },
    MeasureReveal {
        qubit: QubitId,
        check: CheckKind,
        meas_error: Poly,
        frame: FrameRule,
        label: String,
        /// Initialization measurements establish the background error rate
        /// and are excluded from gadget analyses.
        #[serde(default)]
        init: bool,
    },
    /// Applies the targets when both recorded bits read 1, then discards the bits.
    AgreementFrame {
        bits: (BitId, BitId),
        targets: Vec<(QubitId, PauliOp)>,
    },
    /// Multiplies `from`'s current error into `to`. Bookkeeping device for
    /// teleportation: the transferred error cancels against the frame
    /// corrections derived from the Bell measurement bits.
    CopyError { from: QubitId, to: QubitId },
    DataOutput {
        qubit: QubitId,
        check: CheckKind,
        label: String,
    },
}

/// Ordered list of fault locations defining one strand of an encoded gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct StrandCircuit {
    pub locations: Vec<Location>,
}

#[derive(Debug, Error, PartialEq)]
pub enum StrandError {
    #[error("location {index}: qubit {qubit} is not active")]
    InactiveQubit { index: usize, qubit: QubitId },
    #[error("location {index}: qubit {qubit} is already active")]
    QubitCollision { index: usize, qubit: QubitId },
    #[error("location {index}: recorded bit {bit} not found")]
    UnknownBit { index: usize, bit: BitId },
    #[error("location {1}: {0}")]
    Eval(EvalError, usize),
}

/// Probability that the checked classical value at a location is flipped.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointRecord {
    pub label: String,
    pub check: CheckKind,
    pub init: bool,
    pub p: Poly,
}

/// Joint error distribution over the active strand qubits. The identity
/// string is implicit; its probability is one minus the stored mass.
#[derive(Debug, Clone)]
pub struct ErrorState {
    maxdeg: u32,
    terms: BTreeMap<PauliString, Poly>,
    active: BTreeSet<QubitId>,
}

impl ErrorState {
    pub fn new(maxdeg: u32) -> Self {
        ErrorState { maxdeg, terms: BTreeMap::new(), active: BTreeSet::new() }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PauliString, &Poly)> {
        self.terms.iter()
    }

    pub fn active(&self) -> &BTreeSet<QubitId> {
        &self.active
    }

    pub fn class_prob(&self, s: &PauliString) -> Poly {
        self.terms.get(s).cloned().unwrap_or_else(|| Poly::zero(self.maxdeg))
    }

    /// Total stored (non-identity) probability mass.
    pub fn stored_total(&self) -> Poly {
        self.terms
            .values()
            .fold(Poly::zero(self.maxdeg), |acc, p| acc.add(p))
    }

    pub fn identity_prob(&self) -> Poly {
        Poly::one(self.maxdeg).sub(&self.stored_total())
    }

    fn insert(&mut self, s: PauliString, p: Poly) {
        // identity mass stays implicit; zero polys are never stored
        if s.is_identity() || p.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(s) {
            Entry::Occupied(mut e) => {
                let merged = e.get().add(&p);
                if merged.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = merged;
                }
            }
            Entry::Vacant(e) => {
                e.insert(p);
            }
        }
    }

    fn conjugate_all(&mut self, gate: &CliffordGate) {
        let old = std::mem::take(&mut self.terms);
        for (s, p) in old {
            self.terms.insert(gate.conjugate(&s), p);
        }
    }

    /// Convolves a fresh error layer in. `branches` lists the non-identity
    /// alternatives; the identity branch carries the complementary mass.
    fn convolve(&mut self, branches: &[(PauliString, Poly)]) {
        let fresh_total = branches
            .iter()
            .fold(Poly::zero(self.maxdeg), |acc, (_, p)| acc.add(p));
        let fresh_id = Poly::one(self.maxdeg).sub(&fresh_total);
        let mut old: Vec<(PauliString, Poly)> = std::mem::take(&mut self.terms).into_iter().collect();
        let stored = old
            .iter()
            .fold(Poly::zero(self.maxdeg), |acc, (_, p)| acc.add(p));
        old.push((PauliString::identity(), Poly::one(self.maxdeg).sub(&stored)));
        for (s, q) in &old {
            // no fresh error
            self.insert(s.clone(), q.mul(&fresh_id));
            for (e, p) in branches {
                self.insert(s.mul(e), q.mul(p));
            }
        }
    }

    /// Tensor-extends the state by an independent single-qubit distribution.
    fn introduce(&mut self, qubit: QubitId, dist: &BTreeMap<PauliOp, Poly>) {
        let branches: Vec<(PauliString, Poly)> = dist
            .iter()
            .filter(|(op, _)| **op != PauliOp::I)
            .map(|(op, p)| (PauliString::single(qubit, *op), p.clone()))
            .collect();
        self.convolve(&branches);
        self.active.insert(qubit);
    }

    /// Measurement with reveal. Returns P(bit = 1) over the branched
    /// distribution; the measured qubit is traced out.
    fn measure(
        &mut self,
        qubit: QubitId,
        check: CheckKind,
        meas_error: &Poly,
        frame: &FrameRule,
    ) -> Poly {
        let flip = meas_error.clone();
        let keep = Poly::one(self.maxdeg).sub(&flip);
        let mut p_bit = Poly::zero(self.maxdeg);

        let mut old: Vec<(PauliString, Poly)> = std::mem::take(&mut self.terms).into_iter().collect();
        let stored = old
            .iter()
            .fold(Poly::zero(self.maxdeg), |acc, (_, p)| acc.add(p));
        old.push((PauliString::identity(), Poly::one(self.maxdeg).sub(&stored)));

        for (s, q) in old {
            let c = check.hit(s.get(qubit));
            for bit in [false, true] {
                // bit = c XOR f, so bit == c means the flip did not fire.
                let w = if bit == c { q.mul(&keep) } else { q.mul(&flip) };
                if w.is_zero() {
                    continue;
                }
                if bit {
                    p_bit = p_bit.add(&w);
                }
                let mut s2 = s.clone();
                s2.take(qubit);
                if bit {
                    match frame {
                        FrameRule::Apply(targets) => {
                            for (tq, top) in targets {
                                s2.mul_at(*tq, *top);
                            }
                        }
                        FrameRule::Record(bit_id) => {
                            s2.mul_at(bit_qubit(*bit_id), PauliOp::X);
                        }
                    }
                }
                self.insert(s2, w);
            }
        }
        self.active.remove(&qubit);
        if let FrameRule::Record(bit_id) = frame {
            self.active.insert(bit_qubit(*bit_id));
        }
        p_bit
    }

    fn agreement(&mut self, bits: (BitId, BitId), targets: &[(QubitId, PauliOp)]) {
        let (b1, b2) = (bit_qubit(bits.0), bit_qubit(bits.1));
        let old = std::mem::take(&mut self.terms);
        for (s, p) in old {
            let fire = s.get(b1) == PauliOp::X && s.get(b2) == PauliOp::X;
            let mut s2 = s;
            s2.take(b1);
            s2.take(b2);
            if fire {
                for (tq, top) in targets {
                    s2.mul_at(*tq, *top);
                }
            }
            self.insert(s2, p);
        }
        self.active.remove(&b1);
        self.active.remove(&b2);
    }

    fn copy_error(&mut self, from: QubitId, to: QubitId) {
        let old = std::mem::take(&mut self.terms);
        for (s, p) in old {
            let op = s.get(from);
            let mut s2 = s;
            s2.mul_at(to, op);
            self.insert(s2, p);
        }
    }

    /// Probability that `qubit` carries the checked component.
    pub fn component_prob(&self, qubit: QubitId, check: CheckKind) -> Poly {
        self.terms
            .iter()
            .filter(|(s, _)| check.hit(s.get(qubit)))
            .fold(Poly::zero(self.maxdeg), |acc, (_, p)| acc.add(p))
    }
}

/// Result of a symbolic run: one record per measurement, one per data output.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<CheckpointRecord>,
    pub outputs: Vec<CheckpointRecord>,
    pub final_state: ErrorState,
}

/// Folds an error state through every location of the circuit.
pub fn run(circuit: &StrandCircuit, maxdeg: u32) -> Result<RunOutcome, StrandError> {
    let mut state = ErrorState::new(maxdeg);
    let mut records = Vec::new();
    let mut outputs = Vec::new();

    for (index, loc) in circuit.locations.iter().enumerate() {
        match loc {
            Location::OneQubit { gate, qubit, errors } => {
                if !state.active.contains(qubit) {
                    return Err(StrandError::InactiveQubit { index, qubit: *qubit });
                }
                if let Some(g) = gate.clifford(*qubit) {
                    state.conjugate_all(&g);
                }
                let branches: Vec<_> = errors
                    .iter()
                    .filter(|(op, _)| **op != PauliOp::I)
                    .map(|(op, p)| (PauliString::single(*qubit, *op), p.clone()))
                    .collect();
                state.convolve(&branches);
            }
            Location::TwoQubit { control, target, errors } => {
                for q in [control, target] {
                    if !state.active.contains(q) {
                        return Err(StrandError::InactiveQubit { index, qubit: *q });
                    }
                }
                state.conjugate_all(&CliffordGate::cx(*control, *target));
                let branches: Vec<_> = errors
                    .iter()
                    .filter(|((a, b), _)| !(*a == PauliOp::I && *b == PauliOp::I))
                    .map(|((a, b), p)| {
                        (
                            PauliString::from_pairs([(*control, *a), (*target, *b)]),
                            p.clone(),
                        )
                    })
                    .collect();
                state.convolve(&branches);
            }
            Location::AncillaIntro { qubit, dist } => {
                if state.active.contains(qubit) {
                    return Err(StrandError::QubitCollision { index, qubit: *qubit });
                }
                state.introduce(*qubit, dist);
            }
            Location::MeasureReveal { qubit, check, meas_error, frame, label, init } => {
                if !state.active.contains(qubit) {
                    return Err(StrandError::InactiveQubit { index, qubit: *qubit });
                }
                let p = state.measure(*qubit, *check, meas_error, frame);
                records.push(CheckpointRecord {
                    label: label.clone(),
                    check: *check,
                    init: *init,
                    p,
                });
            }
            Location::AgreementFrame { bits, targets } => {
                for b in [bits.0, bits.1] {
                    if !state.active.contains(&bit_qubit(b)) {
                        return Err(StrandError::UnknownBit { index, bit: b });
                    }
                }
                state.agreement(*bits, targets);
            }
            Location::CopyError { from, to } => {
                for q in [from, to] {
                    if !state.active.contains(q) {
                        return Err(StrandError::InactiveQubit { index, qubit: *q });
                    }
                }
                state.copy_error(*from, *to);
            }
            Location::DataOutput { qubit, check, label } => {
                if !state.active.contains(qubit) {
                    return Err(StrandError::InactiveQubit { index, qubit: *qubit });
                }
                outputs.push(CheckpointRecord {
                    label: label.clone(),
                    check: *check,
                    init: false,
                    p: state.component_prob(*qubit, *check),
                });
            }
        }
    }
    Ok(RunOutcome { records, outputs, final_state: state })
}

/// Empirical rate of one checkpoint from the sampling simulator.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalRate {
    pub label: String,
    pub hits: u64,
    pub trials: u64,
    pub rate: f64,
    pub std_err: f64,
}

// Compiled form of a circuit for fast sampling: qubit ids are remapped to
// slots in a pair of bit masks.
struct Compiled {
    steps: Vec<Step>,
    n_counters: usize,
    labels: Vec<String>,
}

enum Step {
    Gate1(OneQubitKind, u32, Vec<(f64, bool, bool)>),
    Gate2(u32, u32, Vec<(f64, bool, bool, bool, bool)>),
    Intro(u32, Vec<(f64, bool, bool)>),
    Measure {
        slot: u32,
        check: CheckKind,
        pm: f64,
        frame: CompiledFrame,
        counter: usize,
    },
    Agreement { b1: u32, b2: u32, targets: Vec<(u32, bool, bool)> },
    Copy { from: u32, to: u32 },
    Output { slot: u32, check: CheckKind, counter: usize },
}

enum CompiledFrame {
    Apply(Vec<(u32, bool, bool)>),
    Record(u32),
}

fn slot_of(q: QubitId, slots: &mut BTreeMap<QubitId, u32>) -> u32 {
    let next = slots.len() as u32;
    *slots.entry(q).or_insert(next)
}

fn compile(
    circuit: &StrandCircuit,
    values: &dyn Fn(Param) -> Option<f64>,
) -> Result<Compiled, StrandError> {
    let mut slots: BTreeMap<QubitId, u32> = BTreeMap::new();
    let mut steps = Vec::new();
    let mut labels = Vec::new();

    let eval = |p: &Poly, index: usize| -> Result<f64, StrandError> {
        p.evaluate(values).map_err(|e| StrandError::Eval(e, index))
    };

    for (index, loc) in circuit.locations.iter().enumerate() {
        match loc {
            Location::OneQubit { gate, qubit, errors } => {
                let s = slot_of(*qubit, &mut slots);
                let mut cum = Vec::new();
                let mut acc = 0.0;
                for (op, p) in errors {
                    if *op == PauliOp::I {
                        continue;
                    }
                    acc += eval(p, index)?;
                    cum.push((acc, op.x_bit(), op.z_bit()));
                }
                steps.push(Step::Gate1(*gate, s, cum));
            }
            Location::TwoQubit { control, target, errors } => {
                let c = slot_of(*control, &mut slots);
                let t = slot_of(*target, &mut slots);
                let mut cum = Vec::new();
                let mut acc = 0.0;
                for ((a, b), p) in errors {
                    if *a == PauliOp::I && *b == PauliOp::I {
                        continue;
                    }
                    acc += eval(p, index)?;
                    cum.push((acc, a.x_bit(), a.z_bit(), b.x_bit(), b.z_bit()));
                }
                steps.push(Step::Gate2(c, t, cum));
            }
            Location::AncillaIntro { qubit, dist } => {
                let s = slot_of(*qubit, &mut slots);
                let mut cum = Vec::new();
                let mut acc = 0.0;
                for (op, p) in dist {
                    if *op == PauliOp::I {
                        continue;
                    }
                    acc += eval(p, index)?;
                    cum.push((acc, op.x_bit(), op.z_bit()));
                }
                steps.push(Step::Intro(s, cum));
            }
            Location::MeasureReveal { qubit, check, meas_error, frame, label, .. } => {
                let s = slot_of(*qubit, &mut slots);
                let frame = match frame {
                    FrameRule::Apply(ts) => CompiledFrame::Apply(
                        ts.iter()
                            .map(|(q, op)| (slot_of(*q, &mut slots), op.x_bit(), op.z_bit()))
                            .collect(),
                    ),
                    FrameRule::Record(bit) => CompiledFrame::Record(slot_of(bit_qubit(*bit), &mut slots)),
                };
                let counter = labels.len();
                labels.push(label.clone());
                steps.push(Step::Measure { slot: s, check: *check, pm: eval(meas_error, index)?, frame, counter });
            }
            Location::AgreementFrame { bits, targets } => {
                let b1 = slot_of(bit_qubit(bits.0), &mut slots);
                let b2 = slot_of(bit_qubit(bits.1), &mut slots);
                let targets = targets
                    .iter()
                    .map(|(q, op)| (slot_of(*q, &mut slots), op.x_bit(), op.z_bit()))
                    .collect();
                steps.push(Step::Agreement { b1, b2, targets });
            }
            Location::CopyError { from, to } => {
                let f = slot_of(*from, &mut slots);
                let t = slot_of(*to, &mut slots);
                steps.push(Step::Copy { from: f, to: t });
            }
            Location::DataOutput { qubit, check, label } => {
                let s = slot_of(*qubit, &mut slots);
                let counter = labels.len();
                labels.push(label.clone());
                steps.push(Step::Output { slot: s, check: *check, counter });
            }
        }
    }
    assert!(slots.len() <= 64, "sampler supports at most 64 distinct qubits");
    Ok(Compiled { n_counters: labels.len(), steps, labels })
}

fn run_chunk(compiled: &Compiled, trials: u64, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; compiled.n_counters];
    for _ in 0..trials {
        // x and z component masks over slots
        let mut x: u64 = 0;
        let mut z: u64 = 0;
        for step in &compiled.steps {
            match step {
                Step::Gate1(kind, s, cum) => {
                    let b = 1u64 << s;
                    match kind {
                        OneQubitKind::Identity => {}
                        OneQubitKind::H => {
                            let xs = x & b != 0;
                            let zs = z & b != 0;
                            if xs != zs {
                                x ^= b;
                                z ^= b;
                            }
                        }
                        OneQubitKind::P => {
                            if x & b != 0 {
                                z ^= b;
                            }
                        }
                    }
                    if !cum.is_empty() {
                        let u: f64 = rng.gen();
                        for (threshold, ex, ez) in cum {
                            if u < *threshold {
                                if *ex {
                                    x ^= b;
                                }
                                if *ez {
                                    z ^= b;
                                }
                                break;
                            }
                        }
                    }
                }
                Step::Gate2(c, t, cum) => {
                    let cb = 1u64 << c;
                    let tb = 1u64 << t;
                    if x & cb != 0 {
                        x ^= tb;
                    }
                    if z & tb != 0 {
                        z ^= cb;
                    }
                    if !cum.is_empty() {
                        let u: f64 = rng.gen();
                        for (threshold, ax, az, bx, bz) in cum {
                            if u < *threshold {
                                if *ax {
                                    x ^= cb;
                                }
                                if *az {
                                    z ^= cb;
                                }
                                if *bx {
                                    x ^= tb;
                                }
                                if *bz {
                                    z ^= tb;
                                }
                                break;
                            }
                        }
                    }
                }
                Step::Intro(s, cum) => {
                    let b = 1u64 << s;
                    x &= !b;
                    z &= !b;
                    if !cum.is_empty() {
                        let u: f64 = rng.gen();
                        for (threshold, ex, ez) in cum {
                            if u < *threshold {
                                if *ex {
                                    x ^= b;
                                }
                                if *ez {
                                    z ^= b;
                                }
                                break;
                            }
                        }
                    }
                }
                Step::Measure { slot, check, pm, frame, counter } => {
                    let b = 1u64 << slot;
                    let comp = match check {
                        CheckKind::X => x & b != 0,
                        CheckKind::Z => z & b != 0,
                    };
                    let flip = rng.gen::<f64>() < *pm;
                    let bit = comp ^ flip;
                    if bit {
                        counts[*counter] += 1;
                    }
                    x &= !b;
                    z &= !b;
                    match frame {
                        CompiledFrame::Apply(targets) => {
                            if bit {
                                for (ts, tx, tz) in targets {
                                    if *tx {
                                        x ^= 1u64 << ts;
                                    }
                                    if *tz {
                                        z ^= 1u64 << ts;
                                    }
                                }
                            }
                        }
                        CompiledFrame::Record(bslot) => {
                            if bit {
                                x ^= 1u64 << bslot;
                            }
                        }
                    }
                }
                Step::Agreement { b1, b2, targets } => {
                    let m1 = 1u64 << b1;
                    let m2 = 1u64 << b2;
                    let fire = (x & m1 != 0) && (x & m2 != 0);
                    x &= !(m1 | m2);
                    z &= !(m1 | m2);
                    if fire {
                        for (ts, tx, tz) in targets {
                            if *tx {
                                x ^= 1u64 << ts;
                            }
                            if *tz {
                                z ^= 1u64 << ts;
                            }
                        }
                    }
                }
                Step::Copy { from, to } => {
                    if x & (1u64 << from) != 0 {
                        x ^= 1u64 << to;
                    }
                    if z & (1u64 << from) != 0 {
                        z ^= 1u64 << to;
                    }
                }
                Step::Output { slot, check, counter } => {
                    let b = 1u64 << slot;
                    let comp = match check {
                        CheckKind::X => x & b != 0,
                        CheckKind::Z => z & b != 0,
                    };
                    if comp {
                        counts[*counter] += 1;
                    }
                }
            }
        }
    }
    counts
}

/// Samples concrete Pauli faults at every location and executes the same
/// reveal semantics on the sampled bits. Deterministic for a given seed:
/// trials are partitioned into fixed chunks with derived sub-seeds.
pub fn simulate(
    circuit: &StrandCircuit,
    values: &dyn Fn(Param) -> Option<f64>,
    trials: u64,
    seed: u64,
) -> Result<Vec<EmpiricalRate>, StrandError> {
    assert!(trials >= 1);
    let compiled = compile(circuit, values)?;

    const CHUNK: u64 = 1 << 16;
    let n_chunks = trials.div_ceil(CHUNK);
    let chunk_sizes: Vec<(u64, u64)> = (0..n_chunks)
        .map(|i| {
            let n = if i == n_chunks - 1 { trials - i * CHUNK } else { CHUNK };
            // sub-seed derivation keeps results independent of thread scheduling
            (n, seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i + 1))
        })
        .collect();

    let totals = chunk_sizes
        .par_iter()
        .map(|(n, s)| run_chunk(&compiled, *n, *s))
        .reduce(
            || vec![0u64; compiled.n_counters],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );

    Ok(compiled
        .labels
        .iter()
        .zip(totals)
        .map(|(label, hits)| {
            let rate = hits as f64 / trials as f64;
            let std_err = (rate * (1.0 - rate) / trials as f64).sqrt();
            EmpiricalRate { label: label.clone(), hits, trials, rate, std_err }
        })
        .collect())
}

/// Convenience: a one-qubit fresh-error map from bare parameters.
pub fn one_qubit_errors(maxdeg: u32) -> BTreeMap<PauliOp, Poly> {
    PauliOp::NONTRIVIAL
        .iter()
        .map(|&g| (g, Poly::param(Param::One(g), maxdeg)))
        .collect()
}

/// The fifteen-parameter fresh-error map of a two-qubit gate.
pub fn two_qubit_errors(maxdeg: u32) -> BTreeMap<(PauliOp, PauliOp), Poly> {
    let mut out = BTreeMap::new();
    for a in [PauliOp::I, PauliOp::X, PauliOp::Y, PauliOp::Z] {
        for b in [PauliOp::I, PauliOp::X, PauliOp::Y, PauliOp::Z] {
            if a != PauliOp::I || b != PauliOp::I {
                out.insert((a, b), Poly::param(Param::Two(a, b), maxdeg));
            }
        }
    }
    out
}

/// Ancilla distribution from the symbolic per-kind parameters.
pub fn ancilla_dist(kind: crate::procedures::AncillaKind, maxdeg: u32) -> BTreeMap<PauliOp, Poly> {
    use crate::procedures::AncillaKind;
    PauliOp::NONTRIVIAL
        .iter()
        .map(|&g| {
            let param = match kind {
                AncillaKind::A => Param::AncA(g),
                AncillaKind::B => Param::AncB(g),
            };
            (g, Poly::param(param, maxdeg))
        })
        .collect()
}

/// A measurement-error polynomial holding the bare `pM` parameter.
pub fn meas_error(maxdeg: u32) -> Poly {
    Poly::param(Param::Meas, maxdeg)
}

/// A zero-probability distribution (used by tests and user circuits).
pub fn no_errors() -> BTreeMap<PauliOp, Poly> {
    BTreeMap::new()
}
