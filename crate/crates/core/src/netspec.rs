//! Glass network definitions: boxes, focal points, exit directions and the
//! transparency conditions the rest of the pipeline relies on.
//!
//! Every variable has a single threshold, translated to zero, so a box is a
//! sign orthant and is named by a bitstring (`1` for `y_i > 0`). Bit order
//! follows variable order: the leftmost character is `y_1`.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{parse_q, q_to_f64, Q};

/// Largest supported number of variables (the truth table has `2^n` rows).
pub const MAX_VARIABLES: usize = 16;

/// A box `B_a`, stored as its bit pattern.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoxLabel {
    code: u32,
    dim: u8,
}

impl BoxLabel {
    pub fn new(code: u32, dim: usize) -> Self {
        debug_assert!(dim <= MAX_VARIABLES && (dim == 32 || code < (1u32 << dim)));
        Self { code, dim: dim as u8 }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t.is_empty() || t.len() > MAX_VARIABLES || !t.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(Error::MalformedBitstring(text.to_string()));
        }
        let code = t.bytes().fold(0u32, |acc, b| (acc << 1) | u32::from(b - b'0'));
        Ok(Self::new(code, t.len()))
    }

    pub fn code(self) -> u32 {
        self.code
    }

    pub fn dim(self) -> usize {
        self.dim as usize
    }

    /// `a_i` for the 0-based variable index `i`.
    pub fn bit(self, i: usize) -> bool {
        (self.code >> (self.dim() - 1 - i)) & 1 == 1
    }

    pub fn flip(self, i: usize) -> Self {
        Self::new(self.code ^ (1 << (self.dim() - 1 - i)), self.dim())
    }

    /// The single axis on which `self` and `other` differ, if they are adjacent.
    pub fn adjacent_axis(self, other: BoxLabel) -> Option<usize> {
        let diff = self.code ^ other.code;
        if self.dim != other.dim || diff.count_ones() != 1 {
            return None;
        }
        Some(self.dim() - 1 - diff.trailing_zeros() as usize)
    }

    pub fn all(dim: usize) -> impl Iterator<Item = BoxLabel> {
        (0..(1u32 << dim)).map(move |c| BoxLabel::new(c, dim))
    }
}

impl fmt::Display for BoxLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.dim() {
            f.write_str(if self.bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BoxLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// `f(a) = Γ(a) / λ`, componentwise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FocalPoint(pub Vec<Q>);

impl FocalPoint {
    pub fn coords(&self) -> &[Q] {
        &self.0
    }
}

/// Exit axes of a box, split by crossing direction.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OutDirections {
    /// Axes crossed upward (`y_i` goes from negative to positive).
    pub plus: Vec<usize>,
    /// Axes crossed downward.
    pub minus: Vec<usize>,
}

impl OutDirections {
    pub fn is_empty(&self) -> bool {
        self.plus.is_empty() && self.minus.is_empty()
    }

    /// All exit axes in ascending order.
    pub fn axes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.plus.iter().chain(&self.minus).copied().collect();
        v.sort_unstable();
        v
    }

    pub fn contains(&self, axis: usize) -> bool {
        self.plus.contains(&axis) || self.minus.contains(&axis)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkSpec {
    n: usize,
    lambda: Vec<Q>,
    /// Indexed by box code.
    gamma: Vec<Vec<Q>>,
}

impl NetworkSpec {
    pub fn new(lambda: Vec<Q>, gamma: Vec<Vec<Q>>) -> Result<Self> {
        let n = lambda.len();
        if n == 0 || n > MAX_VARIABLES {
            return Err(Error::SpecFormat(format!("n must be in 1..={MAX_VARIABLES}")));
        }
        if let Some(index) = lambda.iter().position(|l| !l.is_positive()) {
            return Err(Error::NonPositiveDecay { index });
        }
        if gamma.len() != 1 << n {
            return Err(Error::DimensionMismatch {
                context: "truth table rows".into(),
                expected: 1 << n,
                found: gamma.len(),
            });
        }
        if let Some(row) = gamma.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                context: "production vector".into(),
                expected: n,
                found: row.len(),
            });
        }
        Ok(Self { n, lambda, gamma })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> &[Q] {
        &self.lambda
    }

    pub fn gamma(&self, a: BoxLabel) -> &[Q] {
        &self.gamma[a.code() as usize]
    }

    pub fn boxes(&self) -> impl Iterator<Item = BoxLabel> {
        BoxLabel::all(self.n)
    }

    pub fn label(&self, code: u32) -> BoxLabel {
        BoxLabel::new(code, self.n)
    }

    pub fn focal_point(&self, a: BoxLabel) -> FocalPoint {
        FocalPoint(self.gamma(a).iter().zip(&self.lambda).map(|(g, l)| g / l).collect())
    }

    /// Exit axes: `i` is an exit iff the sign of `f_i(a)` disagrees with `a_i`.
    pub fn out_directions(&self, a: BoxLabel) -> OutDirections {
        let f = self.focal_point(a);
        let mut out = OutDirections::default();
        for (i, fi) in f.0.iter().enumerate() {
            if fi.is_positive() && !a.bit(i) {
                out.plus.push(i);
            } else if fi.is_negative() && a.bit(i) {
                out.minus.push(i);
            }
        }
        out
    }

    pub fn is_terminal(&self, a: BoxLabel) -> bool {
        self.out_directions(a).is_empty()
    }

    /// The common decay rate, if all rates are equal.
    pub fn uniform_decay(&self) -> Option<&Q> {
        let first = &self.lambda[0];
        self.lambda.iter().all(|l| l == first).then_some(first)
    }

    pub fn validate(&self) -> ConditionReport {
        let mut report = ConditionReport::default();
        for a in self.boxes() {
            let f = self.focal_point(a);
            for (i, fi) in f.0.iter().enumerate() {
                if fi.is_zero() {
                    report.focal_on_threshold.push(FocalViolation { label: a, axis: i });
                }
            }
        }
        // d_i(f(a)) - a_i, with d_i the side of the threshold the focal point is on.
        let drift = |a: BoxLabel, i: usize| -> Option<i8> {
            let fi = &self.focal_point(a).0[i];
            if fi.is_zero() {
                return None;
            }
            Some(i8::from(fi.is_positive()) - i8::from(a.bit(i)))
        };
        for a in self.boxes() {
            for i in 0..self.n {
                if a.bit(i) {
                    continue;
                }
                let b = a.flip(i);
                // a_i = 0, b_i = 1.
                let ok = match (drift(a, i), drift(b, i)) {
                    (Some(da), Some(db)) => {
                        da * db > 0 || (da == 0 && db < 0) || (db == 0 && da > 0)
                    }
                    _ => false,
                };
                if !ok {
                    report.opaque_walls.push(WallViolation { lower: a, upper: b, axis: i });
                }
            }
        }
        report.equal_decay = self.uniform_decay().is_some();
        report
    }

    /// Float copy of all focal points, indexed by box code.
    pub fn focal_table_f64(&self) -> Vec<Vec<f64>> {
        self.boxes()
            .map(|a| self.focal_point(a).0.iter().map(q_to_f64).collect())
            .collect()
    }

    pub fn to_document(&self) -> NetworkDocument {
        NetworkDocument {
            n: self.n,
            lambda: self.lambda.iter().map(ToString::to_string).collect(),
            gamma: Some(
                self.boxes()
                    .map(|a| (a.to_string(), self.gamma(a).iter().map(ToString::to_string).collect()))
                    .collect(),
            ),
            terms: None,
            offset: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("document serializes")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FocalViolation {
    #[serde(serialize_with = "ser_label")]
    pub label: BoxLabel,
    pub axis: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct WallViolation {
    #[serde(serialize_with = "ser_label")]
    pub lower: BoxLabel,
    #[serde(serialize_with = "ser_label")]
    pub upper: BoxLabel,
    pub axis: usize,
}

fn ser_label<S: serde::Serializer>(l: &BoxLabel, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&l.to_string())
}

/// Outcome of [`NetworkSpec::validate`]; failures are entries, not errors.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConditionReport {
    /// Focal coordinates lying on a threshold.
    pub focal_on_threshold: Vec<FocalViolation>,
    /// Black or white walls.
    pub opaque_walls: Vec<WallViolation>,
    /// All decay rates equal; required for the cone computations.
    pub equal_decay: bool,
}

impl ConditionReport {
    pub fn focal_points_ok(&self) -> bool {
        self.focal_on_threshold.is_empty()
    }

    pub fn walls_ok(&self) -> bool {
        self.opaque_walls.is_empty()
    }

    pub fn passes(&self) -> bool {
        self.focal_points_ok() && self.walls_ok()
    }
}

/// JSON form of a network.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub n: usize,
    pub lambda: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<BTreeMap<String, Vec<String>>>,
    /// Per variable, a signed sum of products of `Y<i>` / `Y<i>'` literals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<Vec<ProductTerm>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProductTerm {
    pub coeff: String,
    pub literals: Vec<String>,
}

fn parse_rational(text: &str) -> Result<Q> {
    parse_q(text).ok_or_else(|| Error::InvalidRational(text.to_string()))
}

/// `(variable, complemented)` for `Y3` or `Y3'` (1-based in the text).
fn parse_literal(text: &str, n: usize) -> Result<(usize, bool)> {
    let t = text.trim();
    let (body, complemented) = match t.strip_suffix('\'') {
        Some(b) => (b, true),
        None => (t, false),
    };
    let idx: usize = body
        .strip_prefix('Y')
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| Error::BadLiteral(text.to_string()))?;
    if idx == 0 || idx > n {
        return Err(Error::BadLiteral(text.to_string()));
    }
    Ok((idx - 1, complemented))
}

/// Coefficient and `(variable, complemented)` literals of one product term.
type ProductTermQ = (Q, Vec<(usize, bool)>);

pub fn parse_network(text: &str) -> Result<NetworkSpec> {
    let doc: NetworkDocument = serde_json::from_str(text)?;
    network_from_document(&doc)
}

pub fn network_from_document(doc: &NetworkDocument) -> Result<NetworkSpec> {
    let n = doc.n;
    if n == 0 || n > MAX_VARIABLES {
        return Err(Error::SpecFormat(format!("n must be in 1..={MAX_VARIABLES}")));
    }
    if doc.lambda.len() != n {
        return Err(Error::DimensionMismatch {
            context: "lambda".into(),
            expected: n,
            found: doc.lambda.len(),
        });
    }
    let lambda = doc.lambda.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>>>()?;

    let gamma = match (&doc.gamma, &doc.terms) {
        (Some(rows), None) => {
            let mut table: Vec<Option<Vec<Q>>> = vec![None; 1 << n];
            for (bits, values) in rows {
                let label = BoxLabel::parse(bits)?;
                if label.dim() != n {
                    return Err(Error::DimensionMismatch {
                        context: format!("box label {bits}"),
                        expected: n,
                        found: label.dim(),
                    });
                }
                if values.len() != n {
                    return Err(Error::DimensionMismatch {
                        context: format!("gamma row {bits}"),
                        expected: n,
                        found: values.len(),
                    });
                }
                table[label.code() as usize] =
                    Some(values.iter().map(|s| parse_rational(s)).collect::<Result<_>>()?);
            }
            table
                .into_iter()
                .enumerate()
                .map(|(code, row)| {
                    row.ok_or_else(|| Error::IncompleteTruthTable {
                        missing: BoxLabel::new(code as u32, n).to_string(),
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
        (None, Some(terms)) => expand_terms(n, terms, doc.offset.as_deref())?,
        (Some(_), Some(_)) => {
            return Err(Error::SpecFormat("give either gamma or terms, not both".into()))
        }
        (None, None) => return Err(Error::SpecFormat("missing gamma or terms".into())),
    };
    NetworkSpec::new(lambda, gamma)
}

fn expand_terms(n: usize, terms: &[Vec<ProductTerm>], offset: Option<&[String]>) -> Result<Vec<Vec<Q>>> {
    if terms.len() != n {
        return Err(Error::DimensionMismatch { context: "terms".into(), expected: n, found: terms.len() });
    }
    let offset = match offset {
        Some(o) if o.len() != n => {
            return Err(Error::DimensionMismatch { context: "offset".into(), expected: n, found: o.len() })
        }
        Some(o) => o.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>>>()?,
        None => vec![Q::zero(); n],
    };
    let parsed: Vec<Vec<ProductTermQ>> = terms
        .iter()
        .map(|var_terms| {
            var_terms
                .iter()
                .map(|t| {
                    let coeff = parse_rational(&t.coeff)?;
                    let lits = t.literals.iter().map(|l| parse_literal(l, n)).collect::<Result<_>>()?;
                    Ok((coeff, lits))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(BoxLabel::all(n)
        .map(|a| {
            (0..n)
                .map(|i| {
                    parsed[i].iter().fold(offset[i].clone(), |acc, (coeff, lits)| {
                        let on = lits.iter().all(|&(v, comp)| a.bit(v) != comp);
                        if on {
                            acc + coeff
                        } else {
                            acc
                        }
                    })
                })
                .collect()
        })
        .collect())
}

/// Single-variable network `Γ(0) = g0, Γ(1) = g1` with unit decay, handy in tests.
pub fn one_variable(g0: Q, g1: Q) -> NetworkSpec {
    NetworkSpec::new(vec![Q::one()], vec![vec![g0], vec![g1]]).expect("valid one-variable network")
}
