//! Reduced error models mapping the generic parameters to multiples of a
//! single scale `p`.
//!
//! Four built-in models are provided; user models load from a flat
//! `parameter: rational` text format with `#` comments.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::pauli::PauliOp;
use crate::procedures::{ancilla_defaults, AncillaKind};
use crate::symbolic::Param;

/// Assignment of each parameter to a nonnegative rational coefficient,
/// meaning `coefficient · p`. Unassigned parameters are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    name: String,
    assignment: BTreeMap<Param, BigRational>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown built-in model #{0}; valid ids are 1..=4")]
    UnknownBuiltin(u8),
    #[error("line {line}: unknown parameter `{name}`")]
    UnknownParameter { line: usize, name: String },
    #[error("line {line}: cannot parse `{text}` as a rational")]
    BadRational { line: usize, text: String },
    #[error("line {line}: negative coefficient for `{name}`")]
    NegativeCoefficient { line: usize, name: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn r(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

impl ErrorModel {
    pub fn new(name: impl Into<String>) -> Self {
        ErrorModel { name: name.into(), assignment: BTreeMap::new() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn assignment(&self) -> &BTreeMap<Param, BigRational> {
        &self.assignment
    }

    pub fn set(&mut self, p: Param, coeff: BigRational) {
        if coeff.is_zero() {
            self.assignment.remove(&p);
        } else {
            self.assignment.insert(p, coeff);
        }
    }

    pub fn coeff(&self, p: Param) -> BigRational {
        self.assignment.get(&p).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Numeric value of every generic parameter at scale `p`.
    pub fn values_at(&self, p: f64) -> impl Fn(Param) -> Option<f64> + '_ {
        move |param| match param {
            Param::Scale => Some(p),
            _ => Some(self.coeff(param).to_f64().unwrap_or(0.0) * p),
        }
    }

    /// Serializes to the flat text format accepted by [`load_str`].
    pub fn save_string(&self) -> String {
        let mut out = format!("# error model: {}\n", self.name);
        for (p, c) in &self.assignment {
            out.push_str(&format!("{}: {}\n", p.name(), c));
        }
        out
    }
}

/// Built-in reduced models #1..#4.
///
/// Ancilla coefficients are stored explicitly rather than re-derived from the
/// two-qubit rates, so each model is reproduced verbatim.
pub fn builtin(id: u8) -> Result<ErrorModel, ModelError> {
    let mut m = ErrorModel::new(format!("#{id}"));
    let ops = PauliOp::NONTRIVIAL;
    let two_qubit_all = || {
        let mut v = Vec::new();
        for a in [PauliOp::I, PauliOp::X, PauliOp::Y, PauliOp::Z] {
            for b in [PauliOp::I, PauliOp::X, PauliOp::Y, PauliOp::Z] {
                if a != PauliOp::I || b != PauliOp::I {
                    v.push((a, b));
                }
            }
        }
        v
    };
    match id {
        1 => {
            for g in ops {
                m.set(Param::One(g), r(1, 4));
            }
            for (a, b) in two_qubit_all() {
                m.set(Param::Two(a, b), r(1, 16));
            }
            m.set(Param::Meas, r(1, 2));
            m.set(Param::AncA(PauliOp::X), r(1, 4));
            m.set(Param::AncB(PauliOp::Z), r(1, 4));
            for p in [
                Param::AncA(PauliOp::Y),
                Param::AncA(PauliOp::Z),
                Param::AncB(PauliOp::X),
                Param::AncB(PauliOp::Y),
            ] {
                m.set(p, r(1, 8));
            }
        }
        2 => {
            for g in ops {
                m.set(Param::One(g), r(4, 15));
            }
            for (a, b) in two_qubit_all() {
                m.set(Param::Two(a, b), r(1, 15));
            }
            m.set(Param::Meas, r(4, 1));
            m.set(Param::AncA(PauliOp::X), r(4, 15));
            m.set(Param::AncB(PauliOp::Z), r(4, 15));
            for p in [
                Param::AncA(PauliOp::Y),
                Param::AncA(PauliOp::Z),
                Param::AncB(PauliOp::X),
                Param::AncB(PauliOp::Y),
            ] {
                m.set(p, r(2, 15));
            }
        }
        3 => {
            for (a, b) in two_qubit_all() {
                m.set(Param::Two(a, b), r(1, 15));
            }
            m.set(Param::AncA(PauliOp::X), r(4, 15));
            m.set(Param::AncB(PauliOp::Z), r(4, 15));
            for p in [
                Param::AncA(PauliOp::Y),
                Param::AncA(PauliOp::Z),
                Param::AncB(PauliOp::X),
                Param::AncB(PauliOp::Y),
            ] {
                m.set(p, r(2, 15));
            }
        }
        4 => {
            for (a, b) in [
                (PauliOp::I, PauliOp::X),
                (PauliOp::X, PauliOp::I),
                (PauliOp::I, PauliOp::Z),
                (PauliOp::Z, PauliOp::I),
            ] {
                m.set(Param::Two(a, b), r(1, 4));
            }
            m.set(Param::AncA(PauliOp::X), r(1, 2));
            m.set(Param::AncB(PauliOp::Z), r(1, 2));
            m.set(Param::AncA(PauliOp::Z), r(1, 4));
            m.set(Param::AncB(PauliOp::X), r(1, 4));
        }
        other => return Err(ModelError::UnknownBuiltin(other)),
    }
    Ok(m)
}

/// Parses the flat `parameter: rational` format. Empty input is the all-zero model.
pub fn load_str(text: &str, name: impl Into<String>) -> Result<ErrorModel, ModelError> {
    let mut m = ErrorModel::new(name);
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let stripped = raw.split('#').next().unwrap_or("").trim();
        if stripped.is_empty() {
            continue;
        }
        let (key, value) = stripped
            .split_once(':')
            .ok_or_else(|| ModelError::BadRational { line, text: stripped.to_string() })?;
        let key = key.trim();
        let param = Param::from_name(key).ok_or_else(|| ModelError::UnknownParameter {
            line,
            name: key.to_string(),
        })?;
        if param == Param::Scale {
            return Err(ModelError::UnknownParameter { line, name: key.to_string() });
        }
        let coeff = BigRational::from_str(value.trim()).map_err(|_| ModelError::BadRational {
            line,
            text: value.trim().to_string(),
        })?;
        if coeff.is_negative() {
            return Err(ModelError::NegativeCoefficient { line, name: key.to_string() });
        }
        m.set(param, coeff);
    }
    Ok(m)
}

pub fn load(path: &Path) -> Result<ErrorModel, ModelError> {
    let text = std::fs::read_to_string(path)?;
    load_str(&text, path.display().to_string())
}

/// Uniform depolarizing model: `one_q` split over the three one-qubit Paulis,
/// `two_q` over the fifteen two-qubit ones, `meas` on the measurement rate.
/// Ancilla entries are derived from the two-qubit rates via the verification
/// residual defaults.
pub fn depolarizing(one_q: BigRational, two_q: BigRational, meas: BigRational) -> ErrorModel {
    assert!(!one_q.is_negative() && !two_q.is_negative() && !meas.is_negative());
    let mut m = ErrorModel::new("depolarizing");
    for g in PauliOp::NONTRIVIAL {
        m.set(Param::One(g), &one_q / BigRational::from_integer(3.into()));
    }
    for a in [PauliOp::I, PauliOp::X, PauliOp::Y, PauliOp::Z] {
        for b in [PauliOp::I, PauliOp::X, PauliOp::Y, PauliOp::Z] {
            if a != PauliOp::I || b != PauliOp::I {
                m.set(Param::Two(a, b), &two_q / BigRational::from_integer(15.into()));
            }
        }
    }
    m.set(Param::Meas, meas);
    for kind in [AncillaKind::A, AncillaKind::B] {
        for (g, combo) in ancilla_defaults(kind) {
            let coeff: BigRational = combo
                .iter()
                .map(|(a, b)| m.coeff(Param::Two(*a, *b)))
                .fold(BigRational::zero(), |acc, c| acc + c);
            let param = match kind {
                AncillaKind::A => Param::AncA(g),
                AncillaKind::B => Param::AncB(g),
            };
            m.set(param, coeff);
        }
    }
    m
}
