//! Builders for the fault-tolerant procedures' strand circuits and the
//! per-gate analysis producing maximal single-strand error expressions.
//!
//! Conventions baked into the builders (calibrated against the reference
//! expressions; every one of these is load-bearing):
//!
//! * X-error extraction couples `CX(data → ancilla)` with an A-type ancilla
//!   measured in the computational basis; Z-error extraction couples
//!   `CX(ancilla → data)` with a B-type ancilla, a basis-change H (which
//!   carries its own one-qubit fault) and a computational measurement.
//! * Double extraction couples twice, records both bits, and flags a qubit
//!   only when the bits agree (AND rule), so single measurement or ancilla
//!   faults neither correct nor miscorrect.
//! * Each gadget starts with an initialization round of error correction
//!   whose measurement bits are excluded from the analysis.
//! * Telecorrection consumes a Bell pair with one coupled half and one
//!   surviving half; both the input error copy and the frame corrections
//!   land on the surviving half, which cancels the input error exactly.
//! * The teleported non-Clifford gates are treated as an ideal interface:
//!   the incoming strand ends at a measurement checkpoint (its X residual
//!   plus measurement error) and a fresh strand starts with the prepared
//!   ancilla's distribution. The interface coupling itself is not charged.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::pauli::{PauliOp, QubitId};
use crate::strand::{
    ancilla_dist, meas_error, no_errors, one_qubit_errors, run, two_qubit_errors, BitId, CheckKind,
    CheckpointRecord, FrameRule, Location, OneQubitKind, StrandCircuit, StrandError,
};
use crate::symbolic::{factor_common, Expr, Poly};

/// The three built-in fault-tolerant procedures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProcedureId {
    SteaneSingle,
    SteaneDouble,
    Knill,
}

impl ProcedureId {
    pub const ALL: [ProcedureId; 3] = [ProcedureId::SteaneSingle, ProcedureId::SteaneDouble, ProcedureId::Knill];

    pub fn name(self) -> &'static str {
        match self {
            ProcedureId::SteaneSingle => "steane-single",
            ProcedureId::SteaneDouble => "steane-double",
            ProcedureId::Knill => "knill",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "steane-single" | "single" => Some(ProcedureId::SteaneSingle),
            "steane-double" | "double" => Some(ProcedureId::SteaneDouble),
            "knill" => Some(ProcedureId::Knill),
            _ => None,
        }
    }
}

/// Encoded gates analyzed per procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EncodedGate {
    Idle,
    H,
    Cx,
    P,
    T,
}

impl EncodedGate {
    pub const ALL: [EncodedGate; 5] = [
        EncodedGate::Idle,
        EncodedGate::H,
        EncodedGate::Cx,
        EncodedGate::P,
        EncodedGate::T,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EncodedGate::Idle => "idle",
            EncodedGate::H => "h",
            EncodedGate::Cx => "cx",
            EncodedGate::P => "p",
            EncodedGate::T => "t",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "idle" | "none" => Some(EncodedGate::Idle),
            "h" => Some(EncodedGate::H),
            "cx" => Some(EncodedGate::Cx),
            "p" => Some(EncodedGate::P),
            "t" => Some(EncodedGate::T),
            _ => None,
        }
    }
}

/// All fifteen (procedure, gate) pairs.
pub fn all_pairs() -> Vec<(ProcedureId, EncodedGate)> {
    let mut out = Vec::new();
    for p in ProcedureId::ALL {
        for g in EncodedGate::ALL {
            out.push((p, g));
        }
    }
    out
}

/// Ancilla flavor. A-type goes where Z errors are the more disruptive kind,
/// B-type where X errors are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AncillaKind {
    A,
    B,
}

/// Ordering choice for a gadget build. `Standard` follows the reference
/// figures (the idle gadget already contains both correction orders);
/// `Mirrored` swaps the X and Z roles throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BuildVariant {
    #[default]
    Standard,
    Mirrored,
}

/// Residual error of a verified ancilla in terms of the two-qubit rates of
/// the gates used to check it: for each Pauli, the list of (control, target)
/// components whose rates sum into that entry.
pub fn ancilla_defaults(kind: AncillaKind) -> Vec<(PauliOp, Vec<(PauliOp, PauliOp)>)> {
    use PauliOp::{I, X, Y, Z};
    match kind {
        AncillaKind::A => vec![
            (X, vec![(X, Z), (X, I), (I, X), (X, X)]),
            (Y, vec![(I, Y), (X, Y)]),
            (Z, vec![(I, Z), (X, Z)]),
        ],
        AncillaKind::B => vec![
            (X, vec![(X, I), (X, Z)]),
            (Y, vec![(Y, I), (Y, Z)]),
            (Z, vec![(I, Z), (X, Z), (Z, I), (Z, Z)]),
        ],
    }
}

struct Builder {
    maxdeg: u32,
    locs: Vec<Location>,
    next_aux: QubitId,
    next_bit: BitId,
    mirror: bool,
}

impl Builder {
    fn new(maxdeg: u32, mirror: bool) -> Self {
        Builder { maxdeg, locs: Vec::new(), next_aux: 100, next_bit: 0, mirror }
    }

    fn kind(&self, k: AncillaKind) -> AncillaKind {
        match (self.mirror, k) {
            (false, k) => k,
            (true, AncillaKind::A) => AncillaKind::B,
            (true, AncillaKind::B) => AncillaKind::A,
        }
    }

    fn frame_op(&self, op: PauliOp) -> PauliOp {
        if self.mirror {
            match op {
                PauliOp::X => PauliOp::Z,
                PauliOp::Z => PauliOp::X,
                other => other,
            }
        } else {
            op
        }
    }

    fn aux(&mut self) -> QubitId {
        let q = self.next_aux;
        self.next_aux += 1;
        q
    }

    fn bit(&mut self) -> BitId {
        let b = self.next_bit;
        self.next_bit += 1;
        b
    }

    fn intro(&mut self, qubit: QubitId, kind: AncillaKind) {
        self.locs.push(Location::AncillaIntro { qubit, dist: ancilla_dist(kind, self.maxdeg) });
    }

    fn intro_clean(&mut self, qubit: QubitId) {
        self.locs.push(Location::AncillaIntro { qubit, dist: no_errors() });
    }

    fn cx(&mut self, control: QubitId, target: QubitId) {
        self.locs.push(Location::TwoQubit { control, target, errors: two_qubit_errors(self.maxdeg) });
    }

    fn h(&mut self, qubit: QubitId) {
        self.locs.push(Location::OneQubit {
            gate: OneQubitKind::H,
            qubit,
            errors: one_qubit_errors(self.maxdeg),
        });
    }

    fn measure(&mut self, qubit: QubitId, frame: FrameRule, label: String, init: bool) {
        self.locs.push(Location::MeasureReveal {
            qubit,
            check: CheckKind::X,
            meas_error: meas_error(self.maxdeg),
            frame,
            label,
            init,
        });
    }

    /// Single-coupling extraction. `x_kind = true` extracts X errors.
    fn extract_single(&mut self, data: QubitId, x_kind: bool, label: &str, init: bool) {
        let x_kind = x_kind ^ self.mirror;
        let a = self.aux();
        if x_kind {
            self.intro(a, AncillaKind::A);
            self.cx(data, a);
            self.measure(a, FrameRule::Apply(vec![(data, PauliOp::X)]), label.into(), init);
        } else {
            self.intro(a, AncillaKind::B);
            self.cx(a, data);
            self.h(a);
            self.measure(a, FrameRule::Apply(vec![(data, PauliOp::Z)]), label.into(), init);
        }
    }

    /// Double-coupling extraction: two couplings, two recorded bits, and a
    /// correction only on agreement.
    fn extract_double(&mut self, data: QubitId, x_kind: bool, label: &str, init: bool) {
        let x_kind = x_kind ^ self.mirror;
        let (a1, a2) = (self.aux(), self.aux());
        let (b1, b2) = (self.bit(), self.bit());
        if x_kind {
            self.intro(a1, AncillaKind::A);
            self.cx(data, a1);
            self.intro(a2, AncillaKind::A);
            self.cx(data, a2);
            self.measure(a1, FrameRule::Record(b1), format!("{label}:m1"), init);
            self.measure(a2, FrameRule::Record(b2), format!("{label}:m2"), init);
            self.locs.push(Location::AgreementFrame { bits: (b1, b2), targets: vec![(data, PauliOp::X)] });
        } else {
            self.intro(a1, AncillaKind::B);
            self.cx(a1, data);
            self.intro(a2, AncillaKind::B);
            self.cx(a2, data);
            self.h(a1);
            self.measure(a1, FrameRule::Record(b1), format!("{label}:m1"), init);
            self.h(a2);
            self.measure(a2, FrameRule::Record(b2), format!("{label}:m2"), init);
            self.locs.push(Location::AgreementFrame { bits: (b1, b2), targets: vec![(data, PauliOp::Z)] });
        }
    }

    fn extract(&mut self, double: bool, data: QubitId, x_kind: bool, label: &str, init: bool) {
        if double {
            self.extract_double(data, x_kind, label, init);
        } else {
            self.extract_single(data, x_kind, label, init);
        }
    }

    /// Telecorrection block. `a_form = true` is the variant measuring the
    /// data in the rotated basis (coupled half A-type); `a_form = false`
    /// measures the data directly (coupled half B-type). Returns the
    /// surviving half carrying the corrected state.
    fn knill_block(&mut self, data: QubitId, a_form: bool, out_kind: AncillaKind, prefix: &str) -> QubitId {
        let a_form = a_form ^ self.mirror;
        let coupled = self.aux();
        let out = self.aux();
        let name = if a_form { "ka" } else { "kb" };
        self.intro(coupled, if a_form { AncillaKind::A } else { AncillaKind::B });
        self.intro(out, out_kind);
        self.locs.push(Location::CopyError { from: data, to: out });
        if a_form {
            self.cx(data, coupled);
            self.h(data);
            self.measure(
                coupled,
                FrameRule::Apply(vec![(out, self.frame_op(PauliOp::X))]),
                format!("{prefix}:{name}:x"),
                false,
            );
            self.measure(
                data,
                FrameRule::Apply(vec![(out, self.frame_op(PauliOp::Z))]),
                format!("{prefix}:{name}:z"),
                false,
            );
        } else {
            self.cx(coupled, data);
            self.measure(
                data,
                FrameRule::Apply(vec![(out, self.frame_op(PauliOp::X))]),
                format!("{prefix}:{name}:x"),
                false,
            );
            self.h(coupled);
            self.measure(
                coupled,
                FrameRule::Apply(vec![(out, self.frame_op(PauliOp::Z))]),
                format!("{prefix}:{name}:z"),
                false,
            );
        }
        out
    }

    /// Ideal teleport interface: the strand ends at a measurement checkpoint;
    /// the revealed errors are absorbed by the conditional correction, so no
    /// frame lands anywhere.
    fn teleport_handoff(&mut self, data: QubitId, label: &str) {
        self.measure(data, FrameRule::Apply(vec![]), label.into(), false);
    }

    fn outputs(&mut self, qubit: QubitId, prefix: &str) {
        self.locs.push(Location::DataOutput {
            qubit,
            check: CheckKind::X,
            label: format!("{prefix}:out:x"),
        });
        self.locs.push(Location::DataOutput {
            qubit,
            check: CheckKind::Z,
            label: format!("{prefix}:out:z"),
        });
    }

    fn finish(self) -> StrandCircuit {
        StrandCircuit { locations: self.locs }
    }
}

fn build_steane(double: bool, gate: EncodedGate, maxdeg: u32, mirror: bool) -> StrandCircuit {
    let mut b = Builder::new(maxdeg, mirror);
    match gate {
        EncodedGate::Idle => {
            let d = 0;
            b.intro_clean(d);
            b.extract(double, d, false, "d:fz1", true);
            b.extract(double, d, true, "d:fx1", true);
            b.extract(double, d, true, "d:fx2", false);
            b.extract(double, d, false, "d:fz2", false);
            b.extract(double, d, false, "d:fz3", false);
            b.extract(double, d, true, "d:fx3", false);
            b.outputs(d, "d");
        }
        EncodedGate::H => {
            let d = 0;
            b.intro_clean(d);
            b.extract(double, d, false, "d:fz1", true);
            b.extract(double, d, true, "d:fx1", true);
            b.h(d);
            b.extract(double, d, true, "d:fx2", false);
            b.extract(double, d, false, "d:fz2", false);
            b.outputs(d, "d");
        }
        EncodedGate::Cx => {
            let (c, t) = (0, 1);
            b.intro_clean(c);
            b.intro_clean(t);
            b.extract(double, c, false, "c:fz1", true);
            b.extract(double, c, true, "c:fx1", true);
            b.extract(double, t, true, "t:fx1", true);
            b.extract(double, t, false, "t:fz1", true);
            if mirror {
                b.cx(t, c);
            } else {
                b.cx(c, t);
            }
            b.extract(double, c, false, "c:fz2", false);
            b.extract(double, c, true, "c:fx2", false);
            b.extract(double, t, true, "t:fx2", false);
            b.extract(double, t, false, "t:fz2", false);
            b.outputs(c, "c");
            b.outputs(t, "t");
        }
        EncodedGate::P | EncodedGate::T => {
            let d = 0;
            b.intro_clean(d);
            b.extract(double, d, true, "d:fx1", true);
            b.extract(double, d, false, "d:fz1", true);
            b.teleport_handoff(d, "d:tele");
            let o = b.aux();
            let theta_kind = b.kind(AncillaKind::B);
            b.intro(o, theta_kind);
            if double {
                b.extract_double(o, false, "o:fz2", false);
                b.extract_single(o, true, "o:fx3", false);
            } else {
                b.extract_single(o, false, "o:fz2", false);
            }
            b.outputs(o, "o");
        }
    }
    b.finish()
}

fn build_knill(gate: EncodedGate, maxdeg: u32, mirror: bool) -> StrandCircuit {
    let mut b = Builder::new(maxdeg, mirror);
    match gate {
        EncodedGate::Idle | EncodedGate::P | EncodedGate::T => {
            let d = 0;
            let in_kind = b.kind(AncillaKind::B);
            b.intro(d, in_kind);
            let o = b.knill_block(d, true, in_kind, "d");
            b.outputs(o, "d");
        }
        EncodedGate::H => {
            let d = 0;
            let in_kind = b.kind(AncillaKind::B);
            b.intro(d, in_kind);
            b.h(d);
            let o = b.knill_block(d, false, in_kind, "d");
            b.outputs(o, "d");
        }
        EncodedGate::Cx => {
            let (c, t) = (0, 1);
            let (kc, kt) = (b.kind(AncillaKind::B), b.kind(AncillaKind::A));
            b.intro(c, kc);
            b.intro(t, kt);
            if mirror {
                b.cx(t, c);
            } else {
                b.cx(c, t);
            }
            let oc = b.knill_block(c, true, kc, "c");
            let ot = b.knill_block(t, false, kt, "t");
            b.outputs(oc, "c");
            b.outputs(ot, "t");
        }
    }
    b.finish()
}

/// Builds the strand circuit for one gadget.
pub fn build(proc: ProcedureId, gate: EncodedGate, variant: BuildVariant) -> StrandCircuit {
    build_with_maxdeg(proc, gate, variant, crate::symbolic::DEFAULT_MAXDEG)
}

pub fn build_with_maxdeg(
    proc: ProcedureId,
    gate: EncodedGate,
    variant: BuildVariant,
    maxdeg: u32,
) -> StrandCircuit {
    let mirror = variant == BuildVariant::Mirrored;
    match proc {
        ProcedureId::SteaneSingle => build_steane(false, gate, maxdeg, mirror),
        ProcedureId::SteaneDouble => build_steane(true, gate, maxdeg, mirror),
        ProcedureId::Knill => build_knill(gate, maxdeg, mirror),
    }
}

/// How a gadget combines its checkpoint probabilities into one expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combine {
    Max,
    /// The H telecorrection may route the basis change through either Bell
    /// half, so its author picks the better alternative.
    Min,
}

pub fn combinator(proc: ProcedureId, gate: EncodedGate) -> Combine {
    match (proc, gate) {
        (ProcedureId::Knill, EncodedGate::H) => Combine::Min,
        _ => Combine::Max,
    }
}

/// Per-gate analysis: labeled checkpoint polynomials, data-output
/// probabilities, and the combined expression.
#[derive(Debug, Clone)]
pub struct GadgetAnalysis {
    pub procedure: ProcedureId,
    pub gate: EncodedGate,
    pub combine: Combine,
    /// Post-initialization measurement checkpoints.
    pub checkpoints: Vec<CheckpointRecord>,
    /// Data-output records (X and Z per strand).
    pub outputs: Vec<CheckpointRecord>,
    /// Combined expression over the full-degree checkpoint polynomials.
    pub expr: Expr,
}

impl GadgetAnalysis {
    /// First-order presentation: dominated alternatives removed and the
    /// shared mass factored out, `common + max(...)` style.
    pub fn table_expr(&self) -> Expr {
        let polys: Vec<Poly> = self.checkpoints.iter().map(|c| c.p.first_order()).collect();
        let kept = prune(polys, self.combine);
        if kept.len() == 1 {
            return Expr::poly(kept.into_iter().next().unwrap());
        }
        let (common, residuals) = factor_common(&kept);
        let children: Vec<Expr> = residuals.into_iter().map(Expr::poly).collect();
        let node = match self.combine {
            Combine::Max => Expr::max_of(children),
            Combine::Min => Expr::min_of(children),
        };
        if common.is_zero() {
            node
        } else {
            Expr::Sum(vec![Expr::poly(common), node])
        }
    }
}

/// Removes alternatives that can never decide the combinator: for a max,
/// polynomials dominated coefficientwise by another; dually for a min.
fn prune(polys: Vec<Poly>, combine: Combine) -> Vec<Poly> {
    let mut unique: Vec<Poly> = Vec::new();
    for p in polys {
        if !unique.contains(&p) {
            unique.push(p);
        }
    }
    let keep = |i: usize| {
        !unique.iter().enumerate().any(|(j, q)| {
            i != j
                && match combine {
                    Combine::Max => unique[i].dominated_by(q),
                    Combine::Min => q.dominated_by(&unique[i]),
                }
        })
    };
    (0..unique.len()).filter(|&i| keep(i)).map(|i| unique[i].clone()).collect()
}

/// Runs the gadget and combines its post-initialization checkpoints.
pub fn analyze(proc: ProcedureId, gate: EncodedGate, maxdeg: u32) -> Result<GadgetAnalysis, StrandError> {
    let circuit = build_with_maxdeg(proc, gate, BuildVariant::Standard, maxdeg);
    let out = run(&circuit, maxdeg)?;
    let checkpoints: Vec<CheckpointRecord> =
        out.records.into_iter().filter(|r| !r.init).collect();
    let combine = combinator(proc, gate);
    let children: Vec<Expr> = checkpoints.iter().map(|c| Expr::poly(c.p.clone())).collect();
    let expr = match combine {
        Combine::Max => Expr::max_of(children),
        Combine::Min => Expr::min_of(children),
    };
    Ok(GadgetAnalysis {
        procedure: proc,
        gate,
        combine,
        checkpoints,
        outputs: out.outputs,
        expr,
    })
}

/// Post-initialization checkpoint coefficients under a model: every syndrome
/// measurement bit plus the X and Z data outputs, as exact multiples of `p`.
pub fn checkpoint_coeffs(
    analysis: &GadgetAnalysis,
    model: &crate::models::ErrorModel,
) -> Vec<(String, BigRational)> {
    analysis
        .checkpoints
        .iter()
        .chain(analysis.outputs.iter())
        .map(|r| {
            let coeff = r
                .p
                .first_order()
                .substitute(model.assignment())
                .linear_coeff(crate::symbolic::Param::Scale);
            (r.label.clone(), coeff)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::symbolic::{Monomial, Param, DEFAULT_MAXDEG};
    use num_traits::{ToPrimitive, Zero};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::collections::BTreeMap;

    /// Builds a first-order Poly from `(coeff, name)` pairs.
    fn lin(terms: &[(i64, &str)]) -> Poly {
        let mut p = Poly::zero(DEFAULT_MAXDEG);
        for (c, name) in terms {
            let param = Param::from_name(name).unwrap_or_else(|| panic!("bad name {name}"));
            p = p.add(&Poly::param(param, DEFAULT_MAXDEG).scale(&BigRational::from_integer((*c).into())));
        }
        p
    }

    fn expect_row(front: &[(i64, &str)], alts: &[&[(i64, &str)]], min: bool) -> Expr {
        let children: Vec<Expr> = alts.iter().map(|a| Expr::poly(lin(a))).collect();
        let node = if min { Expr::min_of(children) } else { Expr::max_of(children) };
        let front = lin(front);
        if front.is_zero() {
            node
        } else {
            Expr::Sum(vec![Expr::poly(front), node])
        }
    }

    #[test]
    fn ancilla_default_combinations() {
        let a = ancilla_defaults(AncillaKind::A);
        assert_eq!(a[2].0, PauliOp::Z);
        assert_eq!(a[2].1, vec![(PauliOp::I, PauliOp::Z), (PauliOp::X, PauliOp::Z)]);
        let b = ancilla_defaults(AncillaKind::B);
        assert!(b[2].1.contains(&(PauliOp::Z, PauliOp::I)));
        // all two-qubit rates zero -> zero distribution (trivially: empty sums)
        for (_, combo) in ancilla_defaults(AncillaKind::A) {
            assert!(!combo.is_empty());
        }
    }

    #[test]
    fn idle_circuit_has_six_extractions() {
        let c = build(ProcedureId::SteaneSingle, EncodedGate::Idle, BuildVariant::Standard);
        let measures = c
            .locations
            .iter()
            .filter(|l| matches!(l, Location::MeasureReveal { .. }))
            .count();
        assert_eq!(measures, 6);
        let inits = c
            .locations
            .iter()
            .filter(|l| matches!(l, Location::MeasureReveal { init: true, .. }))
            .count();
        assert_eq!(inits, 2);
    }

    #[test]
    fn double_h_circuit_shape() {
        let c = build(ProcedureId::SteaneDouble, EncodedGate::H, BuildVariant::Standard);
        let measures = c
            .locations
            .iter()
            .filter(|l| matches!(l, Location::MeasureReveal { .. }))
            .count();
        assert_eq!(measures, 8); // four double extractions
        let h_gates = c
            .locations
            .iter()
            .filter(|l| matches!(l, Location::OneQubit { gate: OneQubitKind::H, .. }))
            .count();
        // one encoded H on the data plus one basis change per Z-side ancilla
        assert_eq!(h_gates, 1 + 4);
    }

    #[test]
    fn knill_cx_uses_two_blocks() {
        let c = build(ProcedureId::Knill, EncodedGate::Cx, BuildVariant::Standard);
        let copies = c
            .locations
            .iter()
            .filter(|l| matches!(l, Location::CopyError { .. }))
            .count();
        assert_eq!(copies, 2);
        let measures = c
            .locations
            .iter()
            .filter(|l| matches!(l, Location::MeasureReveal { .. }))
            .count();
        assert_eq!(measures, 4);
    }

    #[test]
    fn knill_idle_row_matches_reference() {
        let analysis = analyze(ProcedureId::Knill, EncodedGate::Idle, DEFAULT_MAXDEG).unwrap();
        let expect = expect_row(
            &[(1, "pAY"), (1, "pBY"), (1, "pM"), (1, "p2YX"), (1, "p2YY"), (1, "p2ZX"), (1, "p2ZY")],
            &[
                &[(1, "pAZ"), (1, "pBZ"), (1, "p1X"), (1, "p1Y"), (1, "p2YI"), (1, "p2YZ"), (1, "p2ZI"), (1, "p2ZZ")],
                &[(1, "pAX"), (1, "pBX"), (1, "p2IX"), (1, "p2IY"), (1, "p2XX"), (1, "p2XY")],
            ],
            false,
        );
        assert_eq!(analysis.table_expr().canonical_string(), expect.canonical_string());
    }

    #[test]
    fn knill_h_row_matches_reference_with_min() {
        let analysis = analyze(ProcedureId::Knill, EncodedGate::H, DEFAULT_MAXDEG).unwrap();
        let expect = expect_row(
            &[
                (1, "pBX"), (2, "pBY"), (1, "pBZ"), (1, "pM"), (1, "p1X"), (1, "p1Y"),
                (1, "p2YX"), (1, "p2YY"), (1, "p2ZX"), (1, "p2ZY"),
            ],
            &[
                &[(1, "p2IX"), (1, "p2IY"), (1, "p2XX"), (1, "p2XY")],
                &[(1, "p1Y"), (1, "p1Z"), (1, "p2YI"), (1, "p2YZ"), (1, "p2ZI"), (1, "p2ZZ")],
            ],
            true,
        );
        assert_eq!(analysis.table_expr().canonical_string(), expect.canonical_string());
    }

    #[test]
    fn single_steane_t_row_matches_reference() {
        let analysis = analyze(ProcedureId::SteaneSingle, EncodedGate::T, DEFAULT_MAXDEG).unwrap();
        let expect = expect_row(
            &[
                (1, "pBY"), (1, "pM"), (1, "p2YI"), (1, "p2YX"), (1, "p2YY"), (1, "p2YZ"),
                (1, "p2ZX"), (1, "p2ZY"),
            ],
            &[
                &[
                    (1, "pAX"), (1, "pAY"), (1, "pBX"), (2, "p2IX"), (2, "p2IY"), (1, "pM"),
                    (1, "p2XI"), (1, "p2XX"), (1, "p2XY"), (1, "p2XZ"), (1, "p2ZX"), (1, "p2ZY"),
                ],
                &[(1, "pBY"), (2, "pBZ"), (1, "p1X"), (1, "p1Y"), (1, "p2ZI"), (1, "p2ZZ")],
            ],
            false,
        );
        assert_eq!(analysis.table_expr().canonical_string(), expect.canonical_string());
    }

    #[test]
    fn single_steane_h_row_matches_reference() {
        let analysis = analyze(ProcedureId::SteaneSingle, EncodedGate::H, DEFAULT_MAXDEG).unwrap();
        let expect = expect_row(
            &[
                (1, "pAX"), (2, "pAY"), (1, "pAZ"), (1, "pBY"), (1, "pBZ"), (1, "p2IX"), (1, "p2IY"),
                (2, "pM"), (1, "p1X"), (1, "p2XZ"), (2, "p1Y"), (2, "p2YI"), (2, "p2YX"), (2, "p2YY"),
                (1, "p2YZ"), (2, "p2ZI"), (3, "p2ZX"), (2, "p2ZY"), (1, "p2ZZ"),
            ],
            &[
                &[(1, "p2XI"), (1, "p2YI"), (2, "p2YZ"), (1, "p1Z"), (1, "p2ZY"), (1, "p2ZZ")],
                &[(1, "p2IY"), (1, "p2IZ"), (1, "p1X"), (1, "p2XX"), (2, "p2XY"), (1, "p2YX")],
            ],
            false,
        );
        assert_eq!(analysis.table_expr().canonical_string(), expect.canonical_string());
    }

    #[test]
    fn double_steane_t_row_matches_reference() {
        let analysis = analyze(ProcedureId::SteaneDouble, EncodedGate::T, DEFAULT_MAXDEG).unwrap();
        let expect = expect_row(
            &[
                (2, "pBY"), (1, "p2IY"), (1, "pM"), (1, "p2XY"), (1, "p2YX"), (2, "p2YY"),
                (1, "p2ZX"), (2, "p2ZY"),
            ],
            &[
                &[
                    (2, "pBX"), (2, "p2IX"), (1, "p2IY"), (2, "p2XI"), (3, "p2XX"), (2, "p2XY"),
                    (2, "p2XZ"), (2, "p2YI"), (2, "p2YX"), (1, "p2YY"), (2, "p2YZ"), (1, "p2ZX"),
                ],
                &[
                    (2, "pBZ"), (1, "p2IZ"), (1, "p1X"), (1, "p2XZ"), (1, "p1Y"), (1, "p2YI"),
                    (2, "p2YZ"), (1, "p2ZI"), (2, "p2ZZ"),
                ],
                &[
                    (1, "pAX"), (1, "pAY"), (3, "pBX"), (1, "pBY"), (3, "p2IX"), (2, "p2IY"),
                    (3, "p2XX"), (2, "p2XY"), (2, "p2YX"), (1, "p2YY"), (2, "p2ZX"), (1, "p2ZY"),
                ],
            ],
            false,
        );
        assert_eq!(analysis.table_expr().canonical_string(), expect.canonical_string());
    }

    #[test]
    fn expr_equals_combinator_over_checkpoints() {
        let mut rng = StdRng::seed_from_u64(3);
        for (proc, gate) in all_pairs() {
            let analysis = analyze(proc, gate, DEFAULT_MAXDEG).unwrap();
            for _ in 0..100 {
                let assignment: BTreeMap<Param, f64> = Param::all_generic()
                    .into_iter()
                    .map(|p| (p, rng.gen_range(0.0..0.03)))
                    .collect();
                let vals = |p: Param| assignment.get(&p).copied().or(Some(0.0));
                let got = analysis.expr.evaluate(&vals).unwrap();
                let cps: Vec<f64> = analysis
                    .checkpoints
                    .iter()
                    .map(|c| c.p.evaluate(&vals).unwrap())
                    .collect();
                let want = match analysis.combine {
                    Combine::Max => cps.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    Combine::Min => cps.iter().cloned().fold(f64::INFINITY, f64::min),
                };
                assert!((got - want).abs() < 1e-12, "{proc:?} {gate:?}");
            }
        }
    }

    #[test]
    fn p_and_t_gadgets_agree() {
        for proc in ProcedureId::ALL {
            let p = analyze(proc, EncodedGate::P, DEFAULT_MAXDEG).unwrap();
            let t = analyze(proc, EncodedGate::T, DEFAULT_MAXDEG).unwrap();
            assert_eq!(
                p.table_expr().canonical_string(),
                t.table_expr().canonical_string(),
                "{proc:?}"
            );
        }
    }

    #[test]
    fn all_parameters_zero_gives_zero_expr() {
        for (proc, gate) in all_pairs() {
            let analysis = analyze(proc, gate, DEFAULT_MAXDEG).unwrap();
            let v = analysis.expr.evaluate(&|_| Some(0.0)).unwrap();
            assert_eq!(v, 0.0, "{proc:?} {gate:?}");
        }
    }

    /// Drops every monomial containing a machinery (gate/measurement) rate.
    fn ancilla_part(p: &Poly) -> Poly {
        Poly::from_terms(
            p.terms()
                .filter(|(m, _)| {
                    m.params().iter().all(|q| matches!(q, Param::AncA(_) | Param::AncB(_)))
                })
                .map(|(m, c)| (m.clone(), c.clone())),
            p.maxdeg(),
        )
    }

    #[test]
    fn telecorrection_output_is_surviving_half_distribution() {
        // With perfect gates and measurements, the corrected strand carries
        // exactly the surviving Bell half's distribution.
        for gate in [EncodedGate::Idle, EncodedGate::H] {
            let analysis = analyze(ProcedureId::Knill, gate, DEFAULT_MAXDEG).unwrap();
            let x_out = analysis.outputs.iter().find(|r| r.label.ends_with("out:x")).unwrap();
            let z_out = analysis.outputs.iter().find(|r| r.label.ends_with("out:z")).unwrap();
            let bx = Poly::param(Param::AncB(PauliOp::X), DEFAULT_MAXDEG);
            let by = Poly::param(Param::AncB(PauliOp::Y), DEFAULT_MAXDEG);
            let bz = Poly::param(Param::AncB(PauliOp::Z), DEFAULT_MAXDEG);
            assert_eq!(ancilla_part(&x_out.p), bx.add(&by), "{gate:?}");
            assert_eq!(ancilla_part(&z_out.p), bz.add(&by), "{gate:?}");
        }
    }

    #[test]
    fn double_extraction_suppresses_single_measurement_faults() {
        let analysis = analyze(ProcedureId::SteaneDouble, EncodedGate::Idle, DEFAULT_MAXDEG).unwrap();
        for out in &analysis.outputs {
            assert!(out.p.linear_coeff(Param::Meas).is_zero(), "{}", out.label);
            let mm = Monomial::from_params(vec![Param::Meas, Param::Meas]);
            assert!(!out.p.coeff(&mm).is_zero(), "{} should fail at second order", out.label);
        }
        // the single-coupling procedure transfers measurement errors directly
        let single = analyze(ProcedureId::SteaneSingle, EncodedGate::Idle, DEFAULT_MAXDEG).unwrap();
        let x_out = single.outputs.iter().find(|r| r.label.ends_with("out:x")).unwrap();
        assert!(!x_out.p.linear_coeff(Param::Meas).is_zero());
    }

    #[test]
    fn checkpoint_coefficients_for_double_cx() {
        let analysis = analyze(ProcedureId::SteaneDouble, EncodedGate::Cx, DEFAULT_MAXDEG).unwrap();
        let model = models::builtin(1).unwrap();
        let coeffs = checkpoint_coeffs(&analysis, &model);
        assert_eq!(coeffs.len(), 12);
        let values: Vec<f64> = coeffs.iter().map(|(_, c)| c.to_f64().unwrap()).collect();
        // syndrome checkpoints sit between 3p and 6p; outputs at 9p/4 and 3p/4
        assert!(values[..8].iter().all(|v| *v > 3.0 && *v < 6.2));
        let mut outs = values[8..].to_vec();
        outs.sort_by(f64::total_cmp);
        assert_eq!(outs, vec![0.75, 0.75, 2.25, 2.25]);
    }

    #[test]
    fn planted_single_faults_match_hand_propagation() {
        // Plant each possible fault with probability one in the single-coupling
        // X-extraction and check the engine against direct conjugation plus
        // reveal-and-correct logic.
        use crate::pauli::{conjugate_circuit, CliffordGate, PauliString};
        use crate::strand::{run, ErrorState};
        let maxdeg = 2;

        // fault sites: data input (3) + ancilla intro (3) + cx fresh (15) + meas flip
        for site in fault_sites() {
            let mut locs = Vec::new();
            // data with planted input error
            let mut data_dist = no_errors();
            if let FaultSite::DataInput(op) = site {
                data_dist.insert(op, Poly::one(maxdeg));
            }
            locs.push(Location::AncillaIntro { qubit: 0, dist: data_dist });
            let mut anc_dist = no_errors();
            if let FaultSite::AncIntro(op) = site {
                anc_dist.insert(op, Poly::one(maxdeg));
            }
            locs.push(Location::AncillaIntro { qubit: 1, dist: anc_dist });
            let mut cx_errors = BTreeMap::new();
            if let FaultSite::CxFresh(a, b) = site {
                cx_errors.insert((a, b), Poly::one(maxdeg));
            }
            locs.push(Location::TwoQubit { control: 0, target: 1, errors: cx_errors });
            let meas = if matches!(site, FaultSite::MeasFlip) { Poly::one(maxdeg) } else { Poly::zero(maxdeg) };
            locs.push(Location::MeasureReveal {
                qubit: 1,
                check: CheckKind::X,
                meas_error: meas,
                frame: FrameRule::Apply(vec![(0, PauliOp::X)]),
                label: "m".into(),
                init: false,
            });
            let out = run(&StrandCircuit { locations: locs }, maxdeg).unwrap();

            // hand propagation
            let mut planted = PauliString::identity();
            match site {
                FaultSite::DataInput(op) => planted.set(0, op),
                FaultSite::AncIntro(op) => planted.set(1, op),
                _ => {}
            }
            let mut propagated = conjugate_circuit(&[CliffordGate::cx(0, 1)], &planted);
            if let FaultSite::CxFresh(a, b) = site {
                propagated.mul_at(0, a);
                propagated.mul_at(1, b);
            }
            let mut bit = propagated.get(1).x_bit();
            if matches!(site, FaultSite::MeasFlip) {
                bit = !bit;
            }
            let mut expect = PauliString::identity();
            expect.set(0, propagated.get(0));
            if bit {
                expect.mul_at(0, PauliOp::X);
            }

            let check_state = |state: &ErrorState| {
                if expect.is_identity() {
                    assert!(state.terms().next().is_none(), "site {site:?}");
                } else {
                    let p = state.class_prob(&expect);
                    assert_eq!(p, Poly::one(maxdeg), "site {site:?} expect {expect}");
                }
            };
            check_state(&out.final_state);
        }
    }

    #[derive(Debug, Clone, Copy)]
    enum FaultSite {
        DataInput(PauliOp),
        AncIntro(PauliOp),
        CxFresh(PauliOp, PauliOp),
        MeasFlip,
    }

    fn fault_sites() -> Vec<FaultSite> {
        let mut v = Vec::new();
        for op in PauliOp::NONTRIVIAL {
            v.push(FaultSite::DataInput(op));
            v.push(FaultSite::AncIntro(op));
        }
        for a in [PauliOp::I, PauliOp::X, PauliOp::Y, PauliOp::Z] {
            for b in [PauliOp::I, PauliOp::X, PauliOp::Y, PauliOp::Z] {
                if a != PauliOp::I || b != PauliOp::I {
                    v.push(FaultSite::CxFresh(a, b));
                }
            }
        }
        v.push(FaultSite::MeasFlip);
        v
    }
}
