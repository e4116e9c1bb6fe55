//! Pauli-string algebra and conjugation by Clifford gates, phases discarded.
//!
//! Errors are tracked as Pauli classes, not amplitudes, so every operation
//! here works modulo a global phase. A [`PauliString`] assigns a non-identity
//! Pauli to a subset of qubits; qubits not present are implicitly identity.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Qubit identifier, scoped to a single strand circuit.
pub type QubitId = u32;

/// Single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PauliOp {
    I,
    X,
    Y,
    Z,
}

impl PauliOp {
    /// The three non-identity operators, in canonical order.
    pub const NONTRIVIAL: [PauliOp; 3] = [PauliOp::X, PauliOp::Y, PauliOp::Z];

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => PauliOp::I,
            (true, false) => PauliOp::X,
            (true, true) => PauliOp::Y,
            (false, true) => PauliOp::Z,
        }
    }

    /// True when the operator has an X component (X or Y).
    pub fn x_bit(self) -> bool {
        matches!(self, PauliOp::X | PauliOp::Y)
    }

    /// True when the operator has a Z component (Z or Y).
    pub fn z_bit(self) -> bool {
        matches!(self, PauliOp::Z | PauliOp::Y)
    }

    /// Group product with the phase discarded; commutative under this convention.
    pub fn mul(self, other: PauliOp) -> PauliOp {
        PauliOp::from_bits(self.x_bit() ^ other.x_bit(), self.z_bit() ^ other.z_bit())
    }

    pub fn name(self) -> &'static str {
        match self {
            PauliOp::I => "I",
            PauliOp::X => "X",
            PauliOp::Y => "Y",
            PauliOp::Z => "Z",
        }
    }
}

impl fmt::Display for PauliOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Assignment of non-identity Paulis to qubits. Canonical form never stores
/// explicit identity entries, so equality is plain map equality.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PauliString(BTreeMap<QubitId, PauliOp>);

impl PauliString {
    pub fn identity() -> Self {
        PauliString(BTreeMap::new())
    }

    pub fn single(qubit: QubitId, op: PauliOp) -> Self {
        let mut s = PauliString::identity();
        s.set(qubit, op);
        s
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (QubitId, PauliOp)>) -> Self {
        let mut s = PauliString::identity();
        for (q, op) in pairs {
            s.set(q, op);
        }
        s
    }

    pub fn get(&self, qubit: QubitId) -> PauliOp {
        self.0.get(&qubit).copied().unwrap_or(PauliOp::I)
    }

    /// Overwrites the operator at `qubit`, keeping the no-identity invariant.
    pub fn set(&mut self, qubit: QubitId, op: PauliOp) {
        if op == PauliOp::I {
            self.0.remove(&qubit);
        } else {
            self.0.insert(qubit, op);
        }
    }

    /// Multiplies `op` into the operator at `qubit`.
    pub fn mul_at(&mut self, qubit: QubitId, op: PauliOp) {
        let cur = self.get(qubit);
        self.set(qubit, cur.mul(op));
    }

    /// Removes and returns the operator at `qubit`.
    pub fn take(&mut self, qubit: QubitId) -> PauliOp {
        self.0.remove(&qubit).unwrap_or(PauliOp::I)
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    pub fn weight(&self) -> usize {
        self.0.len()
    }

    pub fn support(&self) -> impl Iterator<Item = QubitId> + '_ {
        self.0.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (QubitId, PauliOp)> + '_ {
        self.0.iter().map(|(&q, &op)| (q, op))
    }

    /// Componentwise product with the phase discarded.
    pub fn mul(&self, other: &PauliString) -> PauliString {
        let mut out = self.clone();
        for (q, op) in other.iter() {
            out.mul_at(q, op);
        }
        out
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("I");
        }
        let mut first = true;
        for (q, op) in self.iter() {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{}{}", op, q)?;
            first = false;
        }
        Ok(())
    }
}

/// Clifford gates available on a strand. `Cx` is the only two-qubit gate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CliffordGate {
    H(QubitId),
    P(QubitId),
    Cx { control: QubitId, target: QubitId },
    PauliGate(PauliString),
}

impl CliffordGate {
    /// Controlled-X; `control` and `target` must differ.
    pub fn cx(control: QubitId, target: QubitId) -> Self {
        assert_ne!(control, target, "CX control and target must differ");
        CliffordGate::Cx { control, target }
    }

    /// Returns g·s·g† modulo phase. Qubits outside the gate's support pass through.
    pub fn conjugate(&self, s: &PauliString) -> PauliString {
        let mut out = s.clone();
        match self {
            CliffordGate::H(q) => {
                let op = out.take(*q);
                // X <-> Z, Y fixed.
                out.set(*q, PauliOp::from_bits(op.z_bit(), op.x_bit()));
            }
            CliffordGate::P(q) => {
                let op = out.take(*q);
                // X <-> Y, Z fixed.
                out.set(*q, PauliOp::from_bits(op.x_bit(), op.z_bit() ^ op.x_bit()));
            }
            CliffordGate::Cx { control, target } => {
                let c = out.take(*control);
                let t = out.take(*target);
                // X on the control spreads to the target, Z on the target to the control.
                out.set(*control, PauliOp::from_bits(c.x_bit(), c.z_bit() ^ t.z_bit()));
                out.set(*target, PauliOp::from_bits(t.x_bit() ^ c.x_bit(), t.z_bit()));
            }
            // Conjugation by a Pauli only changes the phase, which we discard.
            CliffordGate::PauliGate(_) => {}
        }
        out
    }
}

/// Left fold of [`CliffordGate::conjugate`] over a gate list.
pub fn conjugate_circuit(gates: &[CliffordGate], s: &PauliString) -> PauliString {
    gates.iter().fold(s.clone(), |acc, g| g.conjugate(&acc))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_ops() -> [PauliOp; 4] {
        [PauliOp::I, PauliOp::X, PauliOp::Y, PauliOp::Z]
    }

    /// Every Pauli string over `qubits` (4^n of them).
    fn all_strings(qubits: &[QubitId]) -> Vec<PauliString> {
        let mut out = vec![PauliString::identity()];
        for &q in qubits {
            let mut next = Vec::new();
            for s in &out {
                for op in all_ops() {
                    let mut t = s.clone();
                    t.set(q, op);
                    next.push(t);
                }
            }
            out = next;
        }
        out
    }

    fn gates_on(qubits: &[QubitId]) -> Vec<CliffordGate> {
        let mut gates = Vec::new();
        for &q in qubits {
            gates.push(CliffordGate::H(q));
            gates.push(CliffordGate::P(q));
        }
        for &c in qubits {
            for &t in qubits {
                if c != t {
                    gates.push(CliffordGate::cx(c, t));
                }
            }
        }
        for s in all_strings(qubits).into_iter().take(8) {
            gates.push(CliffordGate::PauliGate(s));
        }
        gates
    }

    #[test]
    fn pauli_products() {
        let x0 = PauliString::single(0, PauliOp::X);
        assert!(x0.mul(&x0).is_identity());
        let z0 = PauliString::single(0, PauliOp::Z);
        assert_eq!(x0.mul(&z0), PauliString::single(0, PauliOp::Y));
        let z1 = PauliString::single(1, PauliOp::Z);
        let joint = x0.mul(&z1);
        assert_eq!(joint.get(0), PauliOp::X);
        assert_eq!(joint.get(1), PauliOp::Z);
    }

    #[test]
    fn conjugation_basics() {
        let cx = CliffordGate::cx(0, 1);
        let got = cx.conjugate(&PauliString::single(0, PauliOp::X));
        assert_eq!(got, PauliString::from_pairs([(0, PauliOp::X), (1, PauliOp::X)]));

        let h = CliffordGate::H(0);
        assert_eq!(h.conjugate(&PauliString::single(0, PauliOp::X)), PauliString::single(0, PauliOp::Z));

        let p = CliffordGate::P(0);
        assert_eq!(p.conjugate(&PauliString::single(0, PauliOp::X)), PauliString::single(0, PauliOp::Y));

        let z1 = PauliString::single(1, PauliOp::Z);
        assert_eq!(
            cx.conjugate(&z1),
            PauliString::from_pairs([(0, PauliOp::Z), (1, PauliOp::Z)])
        );
    }

    #[test]
    fn four_qubit_propagation_example() {
        // Four-wire circuit mixing H, P, CX and mid-circuit Pauli gates.
        let gates = vec![
            CliffordGate::H(1),
            CliffordGate::cx(2, 3),
            CliffordGate::PauliGate(PauliString::single(4, PauliOp::Y)),
            CliffordGate::P(1),
            CliffordGate::PauliGate(PauliString::single(2, PauliOp::X)),
            CliffordGate::cx(4, 3),
            CliffordGate::cx(1, 2),
            CliffordGate::P(3),
            CliffordGate::H(4),
        ];
        let input = PauliString::from_pairs([(1, PauliOp::X), (2, PauliOp::Y), (3, PauliOp::Z)]);
        let expect = PauliString::from_pairs([
            (1, PauliOp::Z),
            (2, PauliOp::X),
            (3, PauliOp::X),
            (4, PauliOp::X),
        ]);
        assert_eq!(conjugate_circuit(&gates, &input), expect);
    }

    #[test]
    fn empty_circuit_is_identity() {
        let s = PauliString::from_pairs([(0, PauliOp::Y), (2, PauliOp::Z)]);
        assert_eq!(conjugate_circuit(&[], &s), s);
        let hh = [CliffordGate::H(0), CliffordGate::H(0)];
        assert_eq!(conjugate_circuit(&hh, &PauliString::single(0, PauliOp::X)), PauliString::single(0, PauliOp::X));
    }

    #[test]
    fn conjugation_is_self_inverse_mod_phase() {
        // H, P and CX all square to the identity as conjugation maps
        // (P has order four as a unitary but order two modulo phase).
        let qubits = [0, 1, 2];
        for g in gates_on(&qubits) {
            for s in all_strings(&qubits) {
                assert_eq!(g.conjugate(&g.conjugate(&s)), s, "gate {g:?} string {s}");
            }
        }
    }

    #[test]
    fn conjugation_distributes_over_product() {
        let qubits = [0, 1];
        for g in gates_on(&qubits) {
            for a in all_strings(&qubits) {
                for b in all_strings(&qubits) {
                    assert_eq!(
                        g.conjugate(&a.mul(&b)),
                        g.conjugate(&a).mul(&g.conjugate(&b)),
                        "gate {g:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn pauli_gate_conjugation_is_identity() {
        for s in all_strings(&[0, 1]) {
            for p in all_strings(&[0, 1]) {
                let g = CliffordGate::PauliGate(p);
                assert_eq!(g.conjugate(&s), s);
            }
        }
    }

    #[test]
    fn single_qubit_gates_preserve_support() {
        for s in all_strings(&[0, 1, 2]) {
            let support: Vec<_> = s.support().collect();
            for g in [CliffordGate::H(1), CliffordGate::P(1), CliffordGate::H(0), CliffordGate::P(2)] {
                let t = g.conjugate(&s);
                assert_eq!(t.support().collect::<Vec<_>>(), support);
            }
        }
    }
}
