//! Exact polyhedral returning cones on a starting wall.
//!
//! Cones live in reduced wall coordinates: the starting-wall axis is dropped,
//! so a 4-variable network gives cones in `Q^3`. Every cone carries the wall's
//! orthant sign constraints implicitly; `constraints` holds only the others.

mod dd;
mod trap;

use num_traits::{Signed, Zero};
use serde::Serialize;

pub use dd::{double_description, Generators};
pub use trap::{
    parse_edge, parse_trap, sample_in_cone, search_trapping, transient_words, verify_trapping, CycleInput, TrapInput, TrappingDocument,
    TrappingReport, WordCone,
};

use crate::dynamics::{path_steps, FracLinMap, WallId};
use crate::error::{Error, Result};
use crate::graph::CycleWord;
use crate::netspec::{BoxLabel, NetworkSpec};
use crate::rational::{dot, drop_index, l1_normalize, primitive, q, q_to_f64, rank, QMatrix, Q};

/// A polyhedral cone `{y : orthant signs, R y ≥ 0}` with its extreme rays.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cone {
    wall: WallId,
    constraints: Vec<Vec<Q>>,
    rays: Vec<Vec<Q>>,
    full_dim: bool,
}

fn orthant_rows(wall: &WallId) -> Vec<Vec<Q>> {
    let signs = wall.orthant();
    let d = signs.len();
    signs
        .iter()
        .enumerate()
        .map(|(i, &s)| (0..d).map(|j| if i == j { q(i64::from(s)) } else { Q::zero() }).collect())
        .collect()
}

fn normalized_rays(g: &Generators) -> Vec<Vec<Q>> {
    let mut rays: Vec<Vec<Q>> = g.rays.iter().map(|r| l1_normalize(r)).collect();
    rays.sort();
    rays.dedup();
    rays
}

/// Primitive form of each row with zero rows, positive-multiple duplicates and
/// copies of orthant rows removed (first occurrence wins).
fn dedupe_rows(wall: &WallId, rows: &[Vec<Q>]) -> Vec<Vec<Q>> {
    let orthant = orthant_rows(wall);
    let mut out: Vec<Vec<Q>> = Vec::new();
    for r in rows {
        if r.iter().all(Zero::is_zero) {
            continue;
        }
        let p = primitive(r);
        if orthant.contains(&p) || out.contains(&p) {
            continue;
        }
        out.push(p);
    }
    out
}

fn generators(wall: &WallId, rows: &[Vec<Q>]) -> Generators {
    let mut all = orthant_rows(wall);
    all.extend(rows.iter().cloned());
    double_description(wall.orthant().len(), &all)
}

/// Removes duplicate and implied rows. A row is implied when every extreme
/// ray of the cone cut out by the remaining rows already satisfies it.
pub fn reduce_rows(rows: &[Vec<Q>], wall: &WallId) -> Vec<Vec<Q>> {
    let mut kept = dedupe_rows(wall, rows);
    let mut i = 0;
    while i < kept.len() {
        let others: Vec<Vec<Q>> =
            kept.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, r)| r.clone()).collect();
        let g = generators(wall, &others);
        let implied = g.lineality.is_empty() && g.rays.iter().all(|r| !dot(&kept[i], r).is_negative());
        if implied {
            kept.remove(i);
        } else {
            i += 1;
        }
    }
    kept
}

impl Cone {
    /// Builds the cone with a minimal constraint set.
    pub fn from_constraints(wall: WallId, rows: &[Vec<Q>]) -> Cone {
        let reduced = reduce_rows(rows, &wall);
        Self::assemble(wall, reduced)
    }

    /// Builds the cone keeping every distinct row; cheaper when only the
    /// rays or emptiness are needed.
    pub fn from_constraints_unreduced(wall: WallId, rows: &[Vec<Q>]) -> Cone {
        let rows = dedupe_rows(&wall, rows);
        Self::assemble(wall, rows)
    }

    fn assemble(wall: WallId, constraints: Vec<Vec<Q>>) -> Cone {
        let g = generators(&wall, &constraints);
        let full_dim = g.cone_dim() == wall.orthant().len();
        Cone { wall, constraints, rays: normalized_rays(&g), full_dim }
    }

    /// Cone generated by nonnegative combinations of `gens`, which must lie in
    /// the wall's orthant.
    pub fn from_generators(wall: WallId, gens: &[Vec<Q>]) -> Result<Cone> {
        let d = wall.orthant().len();
        if gens.iter().any(|g| g.len() != d) {
            return Err(Error::DimensionMismatch { context: "cone generators".into(), expected: d, found: 0 });
        }
        let orthant = orthant_rows(&wall);
        if gens.iter().any(|g| orthant.iter().any(|o| dot(o, g).is_negative())) {
            return Err(Error::InvalidArgument("generator outside the wall orthant".into()));
        }
        let dual = double_description(d, gens);
        let mut rows = dual.rays.clone();
        for l in &dual.lineality {
            rows.push(l.clone());
            rows.push(l.iter().map(|x| -x).collect());
        }
        Ok(Self::from_constraints(wall, &rows))
    }

    pub fn wall(&self) -> &WallId {
        &self.wall
    }

    pub fn dim(&self) -> usize {
        self.wall.orthant().len()
    }

    /// Non-orthant constraint rows.
    pub fn constraints(&self) -> &[Vec<Q>] {
        &self.constraints
    }

    /// Orthant rows followed by the other constraints.
    pub fn inequalities(&self) -> Vec<Vec<Q>> {
        let mut rows = orthant_rows(&self.wall);
        rows.extend(self.constraints.iter().cloned());
        rows
    }

    /// Extreme rays, unit L1 norm, sorted.
    pub fn rays(&self) -> &[Vec<Q>] {
        &self.rays
    }

    /// True when the cone has empty interior in the wall.
    pub fn is_empty(&self) -> bool {
        !self.full_dim
    }

    pub fn contains_ray(&self, r: &[Q]) -> bool {
        self.inequalities().iter().all(|row| !dot(row, r).is_negative())
    }

    /// `other ⊆ self`.
    pub fn contains(&self, other: &Cone) -> bool {
        let rows = self.inequalities();
        other.rays.iter().all(|r| rows.iter().all(|row| !dot(row, r).is_negative()))
    }

    pub fn intersect(&self, other: &Cone) -> Result<Cone> {
        if self.wall != other.wall {
            return Err(Error::WallMismatch);
        }
        let mut rows = self.constraints.clone();
        rows.extend(other.constraints.iter().cloned());
        Ok(Cone::from_constraints(self.wall, &rows))
    }

    /// Interior of `self ∩ other` is nonempty.
    pub fn overlaps(&self, other: &Cone) -> Result<bool> {
        if self.wall != other.wall {
            return Err(Error::WallMismatch);
        }
        let mut rows = self.constraints.clone();
        rows.extend(other.constraints.iter().cloned());
        Ok(has_interior(&self.wall, &rows))
    }

    /// Cross-section polygon in the plane `Σ|y_i| = 1`, vertices ordered by
    /// angle in the first two coordinates (three-dimensional cones).
    pub fn cross_section(&self) -> Vec<Vec<Q>> {
        let mut v = self.rays.clone();
        if v.is_empty() {
            return v;
        }
        let n = v.len() as f64;
        let cx = v.iter().map(|r| q_to_f64(&r[0])).sum::<f64>() / n;
        let cy = v.iter().map(|r| r.get(1).map_or(0.0, q_to_f64)).sum::<f64>() / n;
        v.sort_by(|a, b| {
            let ang = |r: &Vec<Q>| (r.get(1).map_or(0.0, q_to_f64) - cy).atan2(q_to_f64(&r[0]) - cx);
            ang(a).total_cmp(&ang(b))
        });
        v
    }

    pub fn to_document(&self) -> ConeDocument {
        let fmt = |rows: &[Vec<Q>]| -> Vec<Vec<String>> {
            rows.iter().map(|r| r.iter().map(ToString::to_string).collect()).collect()
        };
        ConeDocument {
            wall: self.wall.to_string(),
            pattern: self.wall.pattern(),
            ineqs: fmt(&self.inequalities()),
            constraints: fmt(&self.constraints),
            rays: fmt(&self.rays),
            empty: self.is_empty(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConeDocument {
    pub wall: String,
    pub pattern: String,
    pub ineqs: Vec<Vec<String>>,
    pub constraints: Vec<Vec<String>>,
    pub rays: Vec<Vec<String>>,
    pub empty: bool,
}

/// Nonempty interior of `{orthant, rows ≥ 0}` on `wall`.
pub fn has_interior(wall: &WallId, rows: &[Vec<Q>]) -> bool {
    generators(wall, rows).cone_dim() == wall.orthant().len()
}

/// Alternative-exit rows along the closed path of `word`: one row
/// `−(e_iᵀ / f_i) β^{(k)}…β^{(0)}` per step `k` and per exit `i` not taken,
/// with the starting axis column removed.
pub fn alt_exit_rows(spec: &NetworkSpec, word: &CycleWord) -> Result<QMatrix> {
    let (u, v) = word.starting_edge();
    let wall = WallId::between(u, v)?;
    alt_exit_rows_path(spec, &wall, &word.closed_path())
}

/// Same as [`alt_exit_rows`] for an explicit box path starting at `wall.to`.
pub fn alt_exit_rows_path(spec: &NetworkSpec, wall: &WallId, path: &[BoxLabel]) -> Result<QMatrix> {
    if path.first() != Some(&wall.to) {
        return Err(Error::InvalidArgument("path does not start at the wall".into()));
    }
    let steps = path_steps(spec, path)?;
    let n = spec.n();
    let mut product = QMatrix::identity(n);
    let mut rows = Vec::new();
    for step in &steps {
        product = step.map.b.mul(&product);
        let f = spec.focal_point(step.label).0;
        for i in spec.out_directions(step.label).axes() {
            if i == step.exit_axis {
                continue;
            }
            let scale = -(Q::from_integer(1.into()) / &f[i]);
            let row: Vec<Q> = product.row(i).iter().map(|x| x * &scale).collect();
            rows.push(drop_index(&row, wall.axis));
        }
    }
    if rows.is_empty() {
        return Ok(QMatrix::zeros(0, n - 1));
    }
    Ok(QMatrix::from_rows(rows))
}

/// Returning region of a cycle or concatenation, reduced.
pub fn returning_region(spec: &NetworkSpec, word: &CycleWord) -> Result<Cone> {
    let (u, v) = word.starting_edge();
    let wall = WallId::between(u, v)?;
    let rows = alt_exit_rows(spec, word)?;
    Ok(Cone::from_constraints(wall, &rows.to_rows()))
}

/// Image of `cone` under a reduced cycle map. The denominator `1 + ψ·y` must
/// stay positive on the whole cone, i.e. `ψ·r ≥ 0` on every ray.
pub fn map_cone(m: &FracLinMap, cone: &Cone) -> Result<Cone> {
    if m.dim() != cone.dim() {
        return Err(Error::DimensionMismatch { context: "map_cone".into(), expected: cone.dim(), found: m.dim() });
    }
    if cone.rays.iter().any(|r| dot(&m.psi, r).is_negative()) {
        return Err(Error::DenominatorSign);
    }
    let images: Vec<Vec<Q>> = cone.rays.iter().map(|r| m.apply_ray(r)).collect();
    Cone::from_generators(cone.wall, &images)
}

/// `target ⊆ ⋃ containers` up to sets with empty interior.
pub fn union_contains(containers: &[Cone], target: &Cone) -> Result<bool> {
    Ok(uncovered_piece(containers, target)?.is_none())
}

/// A full-dimensional piece of `target` outside every container, if any.
pub fn uncovered_piece(containers: &[Cone], target: &Cone) -> Result<Option<Cone>> {
    if containers.iter().any(|c| c.wall != target.wall) {
        return Err(Error::WallMismatch);
    }
    Ok(cover(containers, 0, target.wall, target.constraints.clone()))
}

fn cover(containers: &[Cone], idx: usize, wall: WallId, piece: Vec<Vec<Q>>) -> Option<Cone> {
    let g = generators(&wall, &piece);
    if g.cone_dim() < wall.orthant().len() {
        return None;
    }
    let Some(c) = containers.get(idx) else {
        return Some(Cone::from_constraints(wall, &piece));
    };
    let violated: Vec<&Vec<Q>> =
        c.constraints.iter().filter(|h| g.rays.iter().any(|r| dot(h, r).is_negative())).collect();
    if violated.is_empty() {
        return None;
    }
    let mut both = piece.clone();
    both.extend(c.constraints.iter().cloned());
    if !has_interior(&wall, &both) {
        return cover(containers, idx + 1, wall, piece);
    }
    // piece \ c = ⋃_t piece ∩ {h_1 ≥ 0, …, h_{t−1} ≥ 0, h_t ≤ 0}
    let mut prefix = piece;
    for h in violated {
        let mut part = prefix.clone();
        part.push(h.iter().map(|x| -x).collect());
        if let Some(w) = cover(containers, idx + 1, wall, part) {
            return Some(w);
        }
        prefix.push(h.clone());
    }
    None
}

/// Checks the double-description round trip: rays satisfy the rows and every
/// ray is extremal (tight on `d − 1` independent rows).
pub fn is_consistent(cone: &Cone) -> bool {
    let rows = cone.inequalities();
    let d = cone.dim();
    cone.rays.iter().all(|r| {
        let tight: Vec<&[Q]> = rows.iter().filter(|h| dot(h, r).is_zero()).map(Vec::as_slice).collect();
        rows.iter().all(|h| !dot(h, r).is_negative()) && rank(&tight) == d - 1
    })
}

/// Sign of the ray relative to each constraint, as floats (for sampling).
pub(crate) fn rows_f64(cone: &Cone) -> Vec<Vec<f64>> {
    cone.inequalities().iter().map(|r| r.iter().map(q_to_f64).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qf;

    fn wall3() -> WallId {
        WallId::between(BoxLabel::parse("1111").unwrap(), BoxLabel::parse("1110").unwrap()).unwrap()
    }

    fn rows(r: &[&[i64]]) -> Vec<Vec<Q>> {
        r.iter().map(|row| row.iter().map(|&x| q(x)).collect()).collect()
    }

    #[test]
    fn positive_multiples_collapse() {
        let w = wall3();
        let r = reduce_rows(&rows(&[&[1, -1, 0], &[2, -2, 0], &[1, -1, 0]]), &w);
        assert_eq!(r, rows(&[&[1, -1, 0]]));
        // 2 y1 ≥ 0 duplicates the orthant row y1 ≥ 0.
        assert!(reduce_rows(&rows(&[&[2, 0, 0]]), &w).is_empty());
    }

    #[test]
    fn orthant_cone_has_unit_rays() {
        let c = Cone::from_constraints(wall3(), &[]);
        assert_eq!(c.rays(), rows(&[&[0, 0, 1], &[0, 1, 0], &[1, 0, 0]]).as_slice());
        assert!(!c.is_empty());
        assert!(is_consistent(&c));
    }

    #[test]
    fn pinned_cone_is_empty() {
        let c = Cone::from_constraints(wall3(), &rows(&[&[-1, 0, 0], &[0, -1, 0], &[0, 0, -1]]));
        assert!(c.rays().is_empty());
        assert!(c.is_empty());
    }

    #[test]
    fn generators_round_trip() {
        let w = wall3();
        let c = Cone::from_constraints(w, &rows(&[&[1, -1, 0], &[0, 1, -1]]));
        let back = Cone::from_generators(w, c.rays()).unwrap();
        assert_eq!(back.rays(), c.rays());
        assert!(c.contains(&back) && back.contains(&c));
    }

    #[test]
    fn subtraction_finds_gaps() {
        let w = wall3();
        let whole = Cone::from_constraints(w, &[]);
        let lo = Cone::from_constraints(w, &rows(&[&[1, -1, 0]]));
        let hi = Cone::from_constraints(w, &rows(&[&[-1, 1, 0]]));
        assert!(union_contains(&[lo.clone(), hi.clone()], &whole).unwrap());
        let gap = uncovered_piece(std::slice::from_ref(&lo), &whole).unwrap().unwrap();
        assert!(!gap.is_empty());
        assert!(hi.contains(&gap));
        assert!(union_contains(std::slice::from_ref(&lo), &lo).unwrap());
    }

    #[test]
    fn identity_map_preserves_cone() {
        let w = wall3();
        let c = Cone::from_constraints(w, &rows(&[&[1, -1, 0]]));
        let id = FracLinMap { b: QMatrix::identity(3), psi: vec![Q::zero(); 3], exit_axis: 3, reduced: true };
        assert_eq!(map_cone(&id, &c).unwrap().rays(), c.rays());
        let bad = FracLinMap { psi: vec![qf(-1, 2), Q::zero(), Q::zero()], ..id };
        assert!(matches!(map_cone(&bad, &c), Err(Error::DenominatorSign)));
    }
}
