//! Wall-to-wall maps. Exact fractional-linear maps for the cone pipeline and
//! a floating-point stepper for long trajectories.

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::graph::CycleWord;
use crate::netspec::{BoxLabel, NetworkSpec};
use crate::rational::{dot, drop_index, QMatrix, Q};

/// The wall crossed when moving from box `from` to the adjacent box `to`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WallId {
    pub from: BoxLabel,
    pub to: BoxLabel,
    pub axis: usize,
    /// `true` when `y_axis` goes from negative to positive.
    pub upward: bool,
}

impl WallId {
    pub fn between(from: BoxLabel, to: BoxLabel) -> Result<Self> {
        let axis = from.adjacent_axis(to).ok_or_else(|| Error::NotAnEdge {
            from: from.to_string(),
            to: to.to_string(),
        })?;
        Ok(Self { from, to, axis, upward: to.bit(axis) })
    }

    /// Signs of the free coordinates on the wall, in reduced coordinates.
    pub fn orthant(&self) -> Vec<i8> {
        (0..self.to.dim())
            .filter(|&i| i != self.axis)
            .map(|i| if self.to.bit(i) { 1 } else { -1 })
            .collect()
    }

    /// Sign pattern such as `+++0`.
    pub fn pattern(&self) -> String {
        (0..self.to.dim())
            .map(|i| match (i == self.axis, self.to.bit(i)) {
                (true, _) => '0',
                (false, true) => '+',
                (false, false) => '-',
            })
            .collect()
    }
}

impl std::fmt::Display for WallId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}>{}", self.from, self.to)
    }
}

/// `y ↦ B y / (1 + ψ·y)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FracLinMap {
    pub b: QMatrix,
    pub psi: Vec<Q>,
    /// For a full map, the axis whose output coordinate vanishes; for a reduced
    /// cycle map, the starting-wall axis that was removed.
    pub exit_axis: usize,
    pub reduced: bool,
}

impl FracLinMap {
    pub fn identity(dim: usize, exit_axis: usize) -> Self {
        Self { b: QMatrix::identity(dim), psi: vec![Q::zero(); dim], exit_axis, reduced: false }
    }

    pub fn dim(&self) -> usize {
        self.psi.len()
    }

    pub fn denominator(&self, y: &[Q]) -> Q {
        Q::one() + dot(&self.psi, y)
    }

    /// Image of a point; `None` when the denominator is not positive.
    pub fn apply(&self, y: &[Q]) -> Option<Vec<Q>> {
        let d = self.denominator(y);
        if !d.is_positive() {
            return None;
        }
        Some(self.b.mul_vec(y).into_iter().map(|x| x / &d).collect())
    }

    /// Image of a ray direction (the denominator only rescales).
    pub fn apply_ray(&self, r: &[Q]) -> Vec<Q> {
        self.b.mul_vec(r)
    }

    /// Drops row and column `axis` (starting-wall coordinates).
    pub fn reduce(&self, axis: usize) -> FracLinMap {
        FracLinMap { b: self.b.minor(axis, axis), psi: drop_index(&self.psi, axis), exit_axis: axis, reduced: true }
    }
}

/// `β = I − f e_jᵀ / f_j`, `ψ = −e_j / f_j` for the exit `j` of box `a`.
pub fn local_map(spec: &NetworkSpec, a: BoxLabel, exit_axis: usize) -> Result<FracLinMap> {
    if spec.uniform_decay().is_none() {
        return Err(Error::UnequalDecay);
    }
    if exit_axis >= spec.n() || !spec.out_directions(a).contains(exit_axis) {
        return Err(Error::NotAnExit { label: a.to_string(), axis: exit_axis });
    }
    let f = spec.focal_point(a).0;
    let n = spec.n();
    let fj = f[exit_axis].clone();
    let mut b = QMatrix::identity(n);
    for (i, fi) in f.iter().enumerate() {
        b[(i, exit_axis)] -= fi / &fj;
    }
    let mut psi = vec![Q::zero(); n];
    psi[exit_axis] = -(Q::one() / &fj);
    Ok(FracLinMap { b, psi, exit_axis, reduced: false })
}

/// Composition with `maps[0]` applied first.
pub fn compose(maps: &[FracLinMap]) -> Result<FracLinMap> {
    let first = maps.first().ok_or(Error::EmptyComposition)?;
    let dim = first.dim();
    let mut b = QMatrix::identity(dim);
    let mut psi = vec![Q::zero(); dim];
    for m in maps {
        if m.dim() != dim {
            return Err(Error::DimensionMismatch { context: "map composition".into(), expected: dim, found: m.dim() });
        }
        // ψ ← ψ + βᵀ ψ_k with β the product of the maps applied so far
        for (p, add) in psi.iter_mut().zip(b.tr_mul_vec(&m.psi)) {
            *p += add;
        }
        b = m.b.mul(&b);
    }
    Ok(FracLinMap {
        b,
        psi,
        exit_axis: maps.last().expect("nonempty").exit_axis,
        reduced: first.reduced,
    })
}

/// One step of a box path: the box, its exit axis and local map.
#[derive(Clone, Debug)]
pub struct PathStep {
    pub label: BoxLabel,
    pub exit_axis: usize,
    pub map: FracLinMap,
}

/// Local maps along consecutive transitions `path[k] -> path[k+1]`.
pub fn path_steps(spec: &NetworkSpec, path: &[BoxLabel]) -> Result<Vec<PathStep>> {
    path.windows(2)
        .map(|w| {
            let wall = WallId::between(w[0], w[1])?;
            if !spec.out_directions(w[0]).contains(wall.axis) {
                return Err(Error::NotAnEdge { from: w[0].to_string(), to: w[1].to_string() });
            }
            Ok(PathStep { label: w[0], exit_axis: wall.axis, map: local_map(spec, w[0], wall.axis)? })
        })
        .collect()
}

/// Full `n`-dimensional return map of a closed word.
pub fn word_map_full(spec: &NetworkSpec, word: &CycleWord) -> Result<FracLinMap> {
    if word.is_empty() {
        return Err(Error::PathNotClosed);
    }
    let steps = path_steps(spec, &word.closed_path())?;
    compose(&steps.into_iter().map(|s| s.map).collect::<Vec<_>>())
}

/// Return map of a closed word on its starting wall, in reduced coordinates.
pub fn cycle_map(spec: &NetworkSpec, word: &CycleWord) -> Result<FracLinMap> {
    let (u, v) = word.starting_edge();
    let wall = WallId::between(u, v)?;
    Ok(word_map_full(spec, word)?.reduce(wall.axis))
}

/// Exact exit of box `a` from the homogeneous point `y` (equal decay only):
/// the winning axis and the unnormalised exit point `β y`.
pub fn step_exact(spec: &NetworkSpec, a: BoxLabel, y: &[Q], step: usize) -> Result<(usize, Vec<Q>)> {
    if spec.uniform_decay().is_none() {
        return Err(Error::UnequalDecay);
    }
    let exits = spec.out_directions(a).axes();
    if exits.is_empty() {
        return Err(Error::TerminalBox { label: a.to_string() });
    }
    let f = spec.focal_point(a).0;
    // e^{-τ_i} = f_i / (f_i - y_i); the first exit has the largest factor.
    let factor = |i: usize| &f[i] / (&f[i] - &y[i]);
    let mut best = exits[0];
    let mut tie = false;
    for &i in &exits[1..] {
        match factor(i).cmp(&factor(best)) {
            std::cmp::Ordering::Greater => {
                best = i;
                tie = false;
            }
            std::cmp::Ordering::Equal => tie = true,
            std::cmp::Ordering::Less => {}
        }
    }
    if tie {
        return Err(Error::CodimensionTwo { step });
    }
    let map = local_map(spec, a, best)?;
    Ok((best, map.apply_ray(y)))
}

/// `τ_i = (1/λ_i) ln((f_i − y_i) / f_i)` for the exit axis `i` of box `a`.
pub fn exit_time(spec: &NetworkSpec, a: BoxLabel, y0: &[f64], i: usize) -> Result<f64> {
    if !spec.out_directions(a).contains(i) {
        return Err(Error::NotAnExit { label: a.to_string(), axis: i });
    }
    let f = crate::rational::q_to_f64(&spec.focal_point(a).0[i]);
    let lambda = crate::rational::q_to_f64(&spec.lambda()[i]);
    Ok((((f - y0[i]) / f).ln() / lambda).max(0.0))
}

/// A point on a wall, heading into `wall.to`.
#[derive(Clone, Debug, PartialEq)]
pub struct WallPoint {
    pub wall: WallId,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// Box traversed at each step, starting with the box entered from the
    /// initial wall.
    pub symbols: Vec<BoxLabel>,
    /// Set when the run stopped early in a terminal box.
    pub terminal: Option<BoxLabel>,
    /// Point where the run stopped.
    pub end: WallPoint,
}

/// Relative tolerance for simultaneous exits.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Floating-point wall-to-wall stepper with precomputed focal points.
#[derive(Clone, Debug)]
pub struct Simulator {
    n: usize,
    focal: Vec<Vec<f64>>,
    lambda: Vec<f64>,
    exits: Vec<Vec<usize>>,
    renormalize: bool,
}

impl Simulator {
    pub fn new(spec: &NetworkSpec) -> Self {
        Self {
            n: spec.n(),
            focal: spec.focal_table_f64(),
            lambda: spec.lambda().iter().map(crate::rational::q_to_f64).collect(),
            exits: spec.boxes().map(|a| spec.out_directions(a).axes()).collect(),
            renormalize: spec.uniform_decay().is_some(),
        }
    }

    /// Crosses one wall out of `label`, updating `y` in place and returning the
    /// exit axis, or `None` for a terminal box.
    pub fn advance(&self, label: BoxLabel, y: &mut [f64], step: usize) -> Result<Option<usize>> {
        let code = label.code() as usize;
        let exits = &self.exits[code];
        if exits.is_empty() {
            return Ok(None);
        }
        let f = &self.focal[code];
        let mut best = usize::MAX;
        let mut best_tau = f64::INFINITY;
        let mut max_tau = 0.0f64;
        let mut taus = [0.0f64; crate::netspec::MAX_VARIABLES];
        for (k, &i) in exits.iter().enumerate() {
            let tau = (((f[i] - y[i]) / f[i]).ln() / self.lambda[i]).max(0.0);
            taus[k] = tau;
            max_tau = max_tau.max(tau);
            if tau < best_tau {
                best_tau = tau;
                best = i;
            }
        }
        let tol = TIE_TOLERANCE * max_tau;
        for (k, &i) in exits.iter().enumerate() {
            if i != best && (taus[k] - best_tau).abs() <= tol {
                return Err(Error::CodimensionTwo { step });
            }
        }
        let common = f[best] / (f[best] - y[best]);
        for i in 0..self.n {
            let decay = if self.renormalize { common } else { (-self.lambda[i] * best_tau).exp() };
            y[i] = f[i] + decay * (y[i] - f[i]);
        }
        y[best] = 0.0;
        if self.renormalize {
            let norm: f64 = y.iter().map(|v| v.abs()).sum();
            if norm > 0.0 {
                for v in y.iter_mut() {
                    *v /= norm;
                }
            }
        }
        Ok(Some(best))
    }

    /// Runs up to `steps` crossings, reporting each traversed box to `visit`.
    pub fn run(&self, start: &WallPoint, steps: usize, mut visit: impl FnMut(BoxLabel)) -> Result<(WallPoint, Option<BoxLabel>)> {
        let mut label = start.wall.to;
        let mut from = start.wall.from;
        let mut y = start.y.clone();
        for step in 0..steps {
            match self.advance(label, &mut y, step)? {
                None => {
                    let wall = WallId::between(from, label).unwrap_or(start.wall);
                    return Ok((WallPoint { wall, y }, Some(label)));
                }
                Some(axis) => {
                    visit(label);
                    from = label;
                    label = label.flip(axis);
                }
            }
        }
        let wall = WallId::between(from, label).unwrap_or(start.wall);
        Ok((WallPoint { wall, y }, None))
    }
}

/// Simulates `steps` wall crossings from `start`.
pub fn simulate(spec: &NetworkSpec, start: &WallPoint, steps: usize) -> Result<Trajectory> {
    let sim = Simulator::new(spec);
    let mut symbols = Vec::with_capacity(steps);
    let (end, terminal) = sim.run(start, steps, |b| symbols.push(b))?;
    Ok(Trajectory { symbols, terminal, end })
}
