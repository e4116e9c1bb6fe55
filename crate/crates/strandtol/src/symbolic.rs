//! Truncated multivariate polynomial arithmetic over named error parameters,
//! plus max/min expression nodes for order-dependent alternatives.
//!
//! Coefficients are exact rationals so that golden comparisons are unambiguous.
//! All arithmetic truncates at a configurable total degree (default 2); within
//! that truncation the ring laws hold exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::pauli::PauliOp;

/// Default truncation order for strand bookkeeping.
pub const DEFAULT_MAXDEG: u32 = 2;

/// A named error parameter.
///
/// The generic set has 25 members: three one-qubit rates, fifteen two-qubit
/// rates, the measurement rate, and three rates each for the two ancilla
/// kinds. `Scale` is the single parameter `p` produced by model substitution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Param {
    /// One-qubit gate error `p1Γ`, Γ ∈ {X,Y,Z}.
    One(PauliOp),
    /// Two-qubit gate error `p2ΛΞ`; Λ acts on the control, Ξ on the target.
    Two(PauliOp, PauliOp),
    /// Measurement error `pM`.
    Meas,
    /// A-type ancilla error `pAΓ`.
    AncA(PauliOp),
    /// B-type ancilla error `pBΓ`.
    AncB(PauliOp),
    /// The single scale `p` of a reduced error model.
    Scale,
}

impl Param {
    fn sort_key(self) -> (u8, u8, u8) {
        fn op_ix(op: PauliOp) -> u8 {
            match op {
                PauliOp::I => 0,
                PauliOp::X => 1,
                PauliOp::Y => 2,
                PauliOp::Z => 3,
            }
        }
        match self {
            Param::One(g) => (0, op_ix(g), 0),
            Param::Two(a, b) => (1, op_ix(a), op_ix(b)),
            Param::Meas => (2, 0, 0),
            Param::AncA(g) => (3, op_ix(g), 0),
            Param::AncB(g) => (4, op_ix(g), 0),
            Param::Scale => (5, 0, 0),
        }
    }

    pub fn name(self) -> String {
        match self {
            Param::One(g) => format!("p1{}", g),
            Param::Two(a, b) => format!("p2{}{}", a, b),
            Param::Meas => "pM".into(),
            Param::AncA(g) => format!("pA{}", g),
            Param::AncB(g) => format!("pB{}", g),
            Param::Scale => "p".into(),
        }
    }

    pub fn from_name(name: &str) -> Option<Param> {
        fn op(c: u8) -> Option<PauliOp> {
            match c {
                b'I' => Some(PauliOp::I),
                b'X' => Some(PauliOp::X),
                b'Y' => Some(PauliOp::Y),
                b'Z' => Some(PauliOp::Z),
                _ => None,
            }
        }
        let b = name.as_bytes();
        match b {
            b"p" => Some(Param::Scale),
            b"pM" => Some(Param::Meas),
            [b'p', b'1', g] => op(*g).filter(|o| *o != PauliOp::I).map(Param::One),
            [b'p', b'2', a, x] => {
                let (a, x) = (op(*a)?, op(*x)?);
                if a == PauliOp::I && x == PauliOp::I {
                    None
                } else {
                    Some(Param::Two(a, x))
                }
            }
            [b'p', b'A', g] => op(*g).filter(|o| *o != PauliOp::I).map(Param::AncA),
            [b'p', b'B', g] => op(*g).filter(|o| *o != PauliOp::I).map(Param::AncB),
            _ => None,
        }
    }

    /// The full generic parameter set (25 names, `Scale` excluded).
    pub fn all_generic() -> Vec<Param> {
        let mut out = Vec::with_capacity(25);
        for g in PauliOp::NONTRIVIAL {
            out.push(Param::One(g));
        }
        for a in [PauliOp::I, PauliOp::X, PauliOp::Y, PauliOp::Z] {
            for b in [PauliOp::I, PauliOp::X, PauliOp::Y, PauliOp::Z] {
                if a != PauliOp::I || b != PauliOp::I {
                    out.push(Param::Two(a, b));
                }
            }
        }
        out.push(Param::Meas);
        for g in PauliOp::NONTRIVIAL {
            out.push(Param::AncA(g));
        }
        for g in PauliOp::NONTRIVIAL {
            out.push(Param::AncB(g));
        }
        out
    }
}

impl PartialOrd for Param {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Param {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// A product of parameters; kept sorted. Degree-major ordering makes the
/// canonical rendering list first-order terms before cross terms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<Param>);

impl Monomial {
    pub fn unit() -> Self {
        Monomial(Vec::new())
    }

    pub fn single(p: Param) -> Self {
        Monomial(vec![p])
    }

    pub fn from_params(mut params: Vec<Param>) -> Self {
        params.sort();
        Monomial(params)
    }

    pub fn degree(&self) -> u32 {
        self.0.len() as u32
    }

    pub fn params(&self) -> &[Param] {
        &self.0
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        v.sort();
        Monomial(v)
    }

    /// Parameter names joined by `*`, e.g. `p1X*pM`.
    pub fn key(&self) -> String {
        if self.0.is_empty() {
            return "1".into();
        }
        self.0.iter().map(|p| p.name()).collect::<Vec<_>>().join("*")
    }

    pub fn parse_key(key: &str) -> Option<Monomial> {
        if key == "1" {
            return Some(Monomial::unit());
        }
        let mut params = Vec::new();
        for part in key.split('*') {
            params.push(Param::from_name(part)?);
        }
        Some(Monomial::from_params(params))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.0.len(), &self.0).cmp(&(other.0.len(), &other.0))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("unbound parameter {0}")]
    UnboundParameter(String),
}

/// Multivariate polynomial truncated at a total degree.
///
/// No zero coefficients and no monomials above `maxdeg` are ever stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly {
    maxdeg: u32,
    terms: BTreeMap<Monomial, BigRational>,
}

impl Poly {
    pub fn zero(maxdeg: u32) -> Self {
        Poly { maxdeg, terms: BTreeMap::new() }
    }

    pub fn one(maxdeg: u32) -> Self {
        Poly::constant(BigRational::one(), maxdeg)
    }

    pub fn constant(c: BigRational, maxdeg: u32) -> Self {
        let mut p = Poly::zero(maxdeg);
        if !c.is_zero() {
            p.terms.insert(Monomial::unit(), c);
        }
        p
    }

    pub fn param(param: Param, maxdeg: u32) -> Self {
        let mut p = Poly::zero(maxdeg);
        if maxdeg >= 1 {
            p.terms.insert(Monomial::single(param), BigRational::one());
        }
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, BigRational)>, maxdeg: u32) -> Self {
        let mut p = Poly::zero(maxdeg);
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn maxdeg(&self) -> u32 {
        self.maxdeg
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() || m.degree() > self.maxdeg {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
            Entry::Vacant(e) => {
                e.insert(c);
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        assert_eq!(self.maxdeg, other.maxdeg, "mismatched maxdegree");
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        assert_eq!(self.maxdeg, other.maxdeg, "mismatched maxdegree");
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    /// Distributed product; monomials above the truncation degree are dropped.
    pub fn mul(&self, other: &Poly) -> Poly {
        assert_eq!(self.maxdeg, other.maxdeg, "mismatched maxdegree");
        let mut out = Poly::zero(self.maxdeg);
        for (ma, ca) in self.terms() {
            for (mb, cb) in other.terms() {
                if ma.degree() + mb.degree() > self.maxdeg {
                    continue;
                }
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        let mut out = Poly::zero(self.maxdeg);
        for (m, v) in self.terms() {
            out.add_term(m.clone(), v * c);
        }
        out
    }

    /// Keeps terms of total degree ≤ 1.
    pub fn first_order(&self) -> Poly {
        let mut out = Poly::zero(self.maxdeg);
        for (m, c) in self.terms() {
            if m.degree() <= 1 {
                out.add_term(m.clone(), c.clone());
            }
        }
        out
    }

    /// Coefficient of a bare parameter in the first-order part.
    pub fn linear_coeff(&self, p: Param) -> BigRational {
        self.coeff(&Monomial::single(p))
    }

    /// Replaces each parameter by `coeff·p` per the assignment; unassigned
    /// parameters are zero. The result is a polynomial in `Scale` alone.
    pub fn substitute(&self, assign: &BTreeMap<Param, BigRational>) -> Poly {
        let mut out = Poly::zero(self.maxdeg);
        for (m, c) in self.terms() {
            let mut coeff = c.clone();
            let mut zero = false;
            for &param in m.params() {
                match assign.get(&param) {
                    Some(k) if !k.is_zero() => coeff = &coeff * k,
                    _ => {
                        zero = true;
                        break;
                    }
                }
            }
            if !zero {
                let scaled = Monomial::from_params(vec![Param::Scale; m.degree() as usize]);
                out.add_term(scaled, coeff);
            }
        }
        out
    }

    pub fn evaluate(&self, values: &dyn Fn(Param) -> Option<f64>) -> Result<f64, EvalError> {
        let mut total = 0.0;
        for (m, c) in self.terms() {
            let mut term = c.to_f64().unwrap_or(f64::NAN);
            for &p in m.params() {
                term *= values(p).ok_or_else(|| EvalError::UnboundParameter(p.name()))?;
            }
            total += term;
        }
        Ok(total)
    }

    /// Termwise minimum of coefficients; meaningful for polynomials with
    /// nonnegative coefficients (used to factor shared error mass out of
    /// max/min alternatives).
    pub fn termwise_min(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.maxdeg);
        for (m, c) in self.terms() {
            let oc = other.coeff(m);
            let min = if *c <= oc { c.clone() } else { oc };
            out.add_term(m.clone(), min);
        }
        out
    }

    /// True when every coefficient of `self` is ≤ the matching one in `other`.
    pub fn dominated_by(&self, other: &Poly) -> bool {
        self.terms().all(|(m, c)| *c <= other.coeff(m))
    }

    pub fn canonical_string(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let unit_coeff = mag.is_one();
            if m.degree() == 0 {
                out.push_str(&mag.to_string());
            } else if unit_coeff {
                out.push_str(&m.key());
            } else {
                out.push_str(&format!("{}*{}", mag, m.key()));
            }
        }
        out
    }

    /// Parses the exact output format of [`Poly::canonical_string`].
    pub fn parse_canonical(s: &str, maxdeg: u32) -> Option<Poly> {
        let mut out = Poly::zero(maxdeg);
        if s.trim() == "0" {
            return Some(out);
        }
        // Normalize to signed terms split on " + " / " - ".
        let mut rest = s.trim();
        let mut sign = BigRational::one();
        if let Some(stripped) = rest.strip_prefix('-') {
            sign = -sign;
            rest = stripped;
        }
        let mut pieces: Vec<(BigRational, &str)> = Vec::new();
        let mut current = rest;
        loop {
            let plus = current.find(" + ");
            let minus = current.find(" - ");
            let (idx, next_sign) = match (plus, minus) {
                (Some(p), Some(m)) if p < m => (Some(p), BigRational::one()),
                (Some(_), Some(m)) => (Some(m), -BigRational::one()),
                (Some(p), None) => (Some(p), BigRational::one()),
                (None, Some(m)) => (Some(m), -BigRational::one()),
                (None, None) => (None, BigRational::one()),
            };
            match idx {
                Some(i) => {
                    pieces.push((sign.clone(), &current[..i]));
                    sign = next_sign;
                    current = &current[i + 3..];
                }
                None => {
                    pieces.push((sign.clone(), current));
                    break;
                }
            }
        }
        for (sgn, piece) in pieces {
            let piece = piece.trim();
            let (coeff, key) = match piece.split_once('*') {
                Some((head, tail)) if BigRational::from_str(head).is_ok() => {
                    (BigRational::from_str(head).ok()?, tail.to_string())
                }
                _ => {
                    if let Ok(c) = BigRational::from_str(piece) {
                        (c, "1".to_string())
                    } else {
                        (BigRational::one(), piece.to_string())
                    }
                }
            };
            let m = Monomial::parse_key(&key)?;
            out.add_term(m, sgn * coeff);
        }
        Some(out)
    }

    pub fn to_json(&self) -> Value {
        let mut map = serde_json::Map::new();
        for (m, c) in self.terms() {
            map.insert(m.key(), Value::String(c.to_string()));
        }
        json!({ "poly": Value::Object(map) })
    }
}

// Serialized form: a map {monomial: "num/den"}. Deserialization also accepts
// a shorthand string (a parameter name, a rational literal, or a canonical
// polynomial rendering); the truncation degree defaults to two.
impl serde::Serialize for Poly {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(self.terms.len()))?;
        for (m, c) in &self.terms {
            map.serialize_entry(&m.key(), &c.to_string())?;
        }
        map.end()
    }
}

impl<'de> serde::Deserialize<'de> for Poly {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::Deserialize;
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Map(BTreeMap<String, String>),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Map(entries) => {
                let mut p = Poly::zero(DEFAULT_MAXDEG);
                for (k, v) in entries {
                    let m = Monomial::parse_key(&k)
                        .ok_or_else(|| serde::de::Error::custom(format!("bad monomial `{k}`")))?;
                    let c = BigRational::from_str(&v)
                        .map_err(|_| serde::de::Error::custom(format!("bad coefficient `{v}`")))?;
                    p.add_term(m, c);
                }
                Ok(p)
            }
            Repr::Text(s) => Poly::parse_canonical(&s, DEFAULT_MAXDEG)
                .ok_or_else(|| serde::de::Error::custom(format!("cannot parse polynomial `{s}`"))),
        }
    }
}

/// Expression tree over polynomials with max/min/sum combinators.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Poly(Poly),
    Sum(Vec<Expr>),
    Max(Vec<Expr>),
    Min(Vec<Expr>),
}

impl Expr {
    pub fn poly(p: Poly) -> Expr {
        Expr::Poly(p)
    }

    /// Max node; collapses singleton argument lists.
    pub fn max_of(mut children: Vec<Expr>) -> Expr {
        assert!(!children.is_empty(), "max of nothing");
        if children.len() == 1 {
            children.pop().unwrap()
        } else {
            Expr::Max(children)
        }
    }

    pub fn min_of(mut children: Vec<Expr>) -> Expr {
        assert!(!children.is_empty(), "min of nothing");
        if children.len() == 1 {
            children.pop().unwrap()
        } else {
            Expr::Min(children)
        }
    }

    pub fn evaluate(&self, values: &dyn Fn(Param) -> Option<f64>) -> Result<f64, EvalError> {
        match self {
            Expr::Poly(p) => p.evaluate(values),
            Expr::Sum(cs) => cs.iter().try_fold(0.0, |acc, c| Ok(acc + c.evaluate(values)?)),
            Expr::Max(cs) => {
                let mut best = f64::NEG_INFINITY;
                for c in cs {
                    best = best.max(c.evaluate(values)?);
                }
                Ok(best)
            }
            Expr::Min(cs) => {
                let mut best = f64::INFINITY;
                for c in cs {
                    best = best.min(c.evaluate(values)?);
                }
                Ok(best)
            }
        }
    }

    pub fn substitute(&self, assign: &BTreeMap<Param, BigRational>) -> Expr {
        self.map_polys(&|p| p.substitute(assign))
    }

    pub fn first_order(&self) -> Expr {
        self.map_polys(&|p| p.first_order())
    }

    fn map_polys(&self, f: &dyn Fn(&Poly) -> Poly) -> Expr {
        match self {
            Expr::Poly(p) => Expr::Poly(f(p)),
            Expr::Sum(cs) => Expr::Sum(cs.iter().map(|c| c.map_polys(f)).collect()),
            Expr::Max(cs) => Expr::Max(cs.iter().map(|c| c.map_polys(f)).collect()),
            Expr::Min(cs) => Expr::Min(cs.iter().map(|c| c.map_polys(f)).collect()),
        }
    }

    /// Deterministic rendering: max/min children sorted by their rendered form.
    pub fn canonical_string(&self) -> String {
        match self {
            Expr::Poly(p) => p.canonical_string(),
            Expr::Sum(cs) => {
                let parts: Vec<String> = cs.iter().map(|c| c.canonical_string()).collect();
                parts.join(" + ")
            }
            Expr::Max(cs) => {
                let mut parts: Vec<String> = cs.iter().map(|c| c.canonical_string()).collect();
                parts.sort();
                format!("max({})", parts.join(", "))
            }
            Expr::Min(cs) => {
                let mut parts: Vec<String> = cs.iter().map(|c| c.canonical_string()).collect();
                parts.sort();
                format!("min({})", parts.join(", "))
            }
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Expr::Poly(p) => p.to_json(),
            Expr::Sum(cs) => json!({ "sum": cs.iter().map(Expr::to_json).collect::<Vec<_>>() }),
            Expr::Max(cs) => json!({ "max": cs.iter().map(Expr::to_json).collect::<Vec<_>>() }),
            Expr::Min(cs) => json!({ "min": cs.iter().map(Expr::to_json).collect::<Vec<_>>() }),
        }
    }

    pub fn from_json(v: &Value, maxdeg: u32) -> Option<Expr> {
        let obj = v.as_object()?;
        if let Some(polys) = obj.get("poly") {
            let mut p = Poly::zero(maxdeg);
            for (k, c) in polys.as_object()? {
                let m = Monomial::parse_key(k)?;
                let c = BigRational::from_str(c.as_str()?).ok()?;
                p.add_term(m, c);
            }
            return Some(Expr::Poly(p));
        }
        for (key, ctor) in [
            ("sum", Expr::Sum as fn(Vec<Expr>) -> Expr),
            ("max", Expr::Max as fn(Vec<Expr>) -> Expr),
            ("min", Expr::Min as fn(Vec<Expr>) -> Expr),
        ] {
            if let Some(children) = obj.get(key) {
                let cs = children
                    .as_array()?
                    .iter()
                    .map(|c| Expr::from_json(c, maxdeg))
                    .collect::<Option<Vec<_>>>()?;
                return Some(ctor(cs));
            }
        }
        None
    }
}

/// Factors the termwise-shared part out of a set of alternatives, yielding
/// `(common, residuals)` with `alternative_i = common + residual_i`.
pub fn factor_common(alts: &[Poly]) -> (Poly, Vec<Poly>) {
    assert!(!alts.is_empty());
    let mut common = alts[0].clone();
    for p in &alts[1..] {
        common = common.termwise_min(p);
    }
    let residuals = alts.iter().map(|p| p.sub(&common)).collect();
    (common, residuals)
}
