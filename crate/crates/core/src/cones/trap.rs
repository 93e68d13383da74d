//! Trapping-region verification, transient words and sampling inside cones.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{map_cone, returning_region, rows_f64, uncovered_piece, Cone, ConeDocument};
use crate::dynamics::{cycle_map, FracLinMap, WallId, WallPoint};
use crate::error::{Error, Result};
use crate::graph::{CycleWord, TransitionGraph};
use crate::netspec::{BoxLabel, NetworkSpec};
use crate::rational::q_to_f64;

/// A length-`k` word over the cycle alphabet with its returning cone and the
/// image of that cone under the word's first cycle map.
#[derive(Clone, Debug)]
pub struct WordCone {
    pub word: Vec<usize>,
    pub cone: Cone,
    /// `M_{w_1}(ℛ_w)`; `None` when the cone is empty.
    pub image: Option<Cone>,
}

/// Indices of transient words among `entries`, all of the same length.
///
/// `u` precedes `w` when `u` without its first letter equals `w` without its
/// last. A nonempty word is transient when no surviving predecessor's image
/// meets its cone in a set with interior; removals are iterated to a fixpoint.
/// Empty words are never reported here.
pub fn transient_words(entries: &[WordCone]) -> Result<Vec<usize>> {
    let pairs: Vec<(usize, usize)> = (0..entries.len())
        .flat_map(|u| (0..entries.len()).map(move |w| (u, w)))
        .filter(|&(u, w)| {
            let (a, b) = (&entries[u], &entries[w]);
            a.image.is_some() && !b.cone.is_empty() && a.word[1..] == b.word[..b.word.len() - 1]
        })
        .collect();
    let overlaps: Vec<bool> = pairs
        .par_iter()
        .map(|&(u, w)| entries[u].image.as_ref().expect("filtered").overlaps(&entries[w].cone))
        .collect::<Result<_>>()?;
    let edges: Vec<(usize, usize)> =
        pairs.into_iter().zip(overlaps).filter(|(_, o)| *o).map(|(p, _)| p).collect();

    let mut alive: Vec<bool> = entries.iter().map(|e| !e.cone.is_empty()).collect();
    let mut transient = Vec::new();
    loop {
        let removed: Vec<usize> = (0..entries.len())
            .filter(|&w| alive[w] && !edges.iter().any(|&(u, v)| v == w && alive[u]))
            .collect();
        if removed.is_empty() {
            break;
        }
        for w in removed {
            alive[w] = false;
            transient.push(w);
        }
    }
    transient.sort_unstable();
    Ok(transient)
}

/// Result of checking that a set of first-return cycles forms a trapping region.
#[derive(Clone, Debug)]
pub struct TrappingReport {
    pub wall: WallId,
    pub cycles: Vec<CycleWord>,
    pub cones: Vec<Cone>,
    pub maps: Vec<FracLinMap>,
    /// Image of each nonempty cone under its own cycle map.
    pub images: Vec<Option<Cone>>,
    /// Indices of cycles with empty returning cones (`F_1`).
    pub empty: Vec<usize>,
    /// Indices of transient cycles (`Π_1`).
    pub transient: Vec<usize>,
    /// Cycles kept for the refined graphs.
    pub active: Vec<usize>,
    pub verified: bool,
    /// For each active cycle whose image escapes, a piece of the image outside
    /// every active cone.
    pub escapes: Vec<(usize, Cone)>,
}

impl TrappingReport {
    pub fn active_cycles(&self) -> Vec<&CycleWord> {
        self.active.iter().map(|&i| &self.cycles[i]).collect()
    }

    pub fn label_index(&self, label: &str) -> Result<usize> {
        self.cycles
            .iter()
            .position(|c| c.label == label)
            .ok_or_else(|| Error::UnknownCycleLabel(label.to_string()))
    }

    pub fn to_document(&self) -> TrappingDocument {
        let labels = |ix: &[usize]| ix.iter().map(|&i| self.cycles[i].label.clone()).collect();
        TrappingDocument {
            wall: self.wall.to_string(),
            verified: self.verified,
            cycles: self
                .cycles
                .iter()
                .enumerate()
                .map(|(i, c)| CycleEntry {
                    label: c.label.clone(),
                    boxes: c.boxes.iter().map(ToString::to_string).collect(),
                    cone: self.cones[i].to_document(),
                    image: self.images[i].as_ref().map(Cone::to_document),
                })
                .collect(),
            empty: labels(&self.empty),
            transient: labels(&self.transient),
            active: labels(&self.active),
            escapes: self
                .escapes
                .iter()
                .map(|(i, c)| (self.cycles[*i].label.clone(), c.to_document()))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CycleEntry {
    pub label: String,
    pub boxes: Vec<String>,
    pub cone: ConeDocument,
    pub image: Option<ConeDocument>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrappingDocument {
    pub wall: String,
    pub verified: bool,
    pub cycles: Vec<CycleEntry>,
    pub empty: Vec<String>,
    pub transient: Vec<String>,
    pub active: Vec<String>,
    pub escapes: Vec<(String, ConeDocument)>,
}

/// Starting edge and candidate cycles as read from a trap file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrapInput {
    pub edge: String,
    pub cycles: Vec<CycleInput>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CycleInput {
    pub label: String,
    pub boxes: Vec<String>,
}

/// Parses `FROM>TO`, e.g. `1111>1110`.
pub fn parse_edge(text: &str) -> Result<(BoxLabel, BoxLabel)> {
    let (from, to) = text
        .split_once('>')
        .ok_or_else(|| Error::InvalidArgument(format!("edge {text:?} is not of the form FROM>TO")))?;
    let edge = (BoxLabel::parse(from.trim())?, BoxLabel::parse(to.trim())?);
    WallId::between(edge.0, edge.1)?;
    Ok(edge)
}

impl CycleInput {
    pub fn to_word(&self) -> Result<CycleWord> {
        let boxes = self.boxes.iter().map(|b| BoxLabel::parse(b)).collect::<Result<_>>()?;
        Ok(CycleWord::new(self.label.clone(), boxes))
    }
}

impl TrapInput {
    /// Starting edge and cycles, each checked to be a closed path of `tg`
    /// through the edge.
    pub fn resolve(&self, tg: &TransitionGraph) -> Result<((BoxLabel, BoxLabel), Vec<CycleWord>)> {
        let edge = parse_edge(&self.edge)?;
        let cycles: Vec<CycleWord> = self.cycles.iter().map(CycleInput::to_word).collect::<Result<_>>()?;
        for c in &cycles {
            c.check(tg)?;
        }
        Ok((edge, cycles))
    }
}

pub fn parse_trap(text: &str) -> Result<TrapInput> {
    Ok(serde_json::from_str(text)?)
}

/// Classifies `cycles` into empty, transient and active, then checks that
/// every active image lies in the union of active cones.
pub fn verify_trapping(spec: &NetworkSpec, edge: (BoxLabel, BoxLabel), cycles: &[CycleWord]) -> Result<TrappingReport> {
    let wall = WallId::between(edge.0, edge.1)?;
    for c in cycles {
        if c.is_empty() || c.starting_edge() != edge {
            return Err(Error::InvalidArgument(format!("cycle {} does not use the starting edge {wall}", c.label)));
        }
    }
    let cones: Vec<Cone> = cycles.par_iter().map(|c| returning_region(spec, c)).collect::<Result<_>>()?;
    let maps: Vec<FracLinMap> = cycles.iter().map(|c| cycle_map(spec, c)).collect::<Result<_>>()?;
    let images: Vec<Option<Cone>> = cones
        .par_iter()
        .zip(&maps)
        .map(|(c, m)| if c.is_empty() { Ok(None) } else { map_cone(m, c).map(Some) })
        .collect::<Result<_>>()?;
    let empty: Vec<usize> = (0..cycles.len()).filter(|&i| cones[i].is_empty()).collect();

    let entries: Vec<WordCone> = (0..cycles.len())
        .map(|i| WordCone { word: vec![i], cone: cones[i].clone(), image: images[i].clone() })
        .collect();
    let transient = transient_words(&entries)?;
    let active: Vec<usize> =
        (0..cycles.len()).filter(|i| !empty.contains(i) && !transient.contains(i)).collect();

    let containers: Vec<Cone> = active.iter().map(|&i| cones[i].clone()).collect();
    let escapes: Vec<(usize, Cone)> = active
        .par_iter()
        .map(|&i| {
            let image = images[i].as_ref().expect("active cycles have images");
            Ok(uncovered_piece(&containers, image)?.map(|p| (i, p)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let verified = !active.is_empty() && escapes.is_empty();
    Ok(TrappingReport {
        wall,
        cycles: cycles.to_vec(),
        cones,
        maps,
        images,
        empty,
        transient,
        active,
        verified,
        escapes,
    })
}

/// Largest invariant subset of `candidates`: cycles whose images escape are
/// dropped and the rest re-verified until nothing escapes. Empty and transient
/// cycles are dropped along the way. The last report is returned whether or
/// not it verified.
pub fn search_trapping(
    spec: &NetworkSpec,
    edge: (BoxLabel, BoxLabel),
    candidates: &[CycleWord],
) -> Result<TrappingReport> {
    let mut report = verify_trapping(spec, edge, candidates)?;
    while !report.verified && !report.escapes.is_empty() {
        let keep: Vec<CycleWord> = report
            .active
            .iter()
            .filter(|i| !report.escapes.iter().any(|(j, _)| j == *i))
            .map(|&i| report.cycles[i].clone())
            .collect();
        if keep.is_empty() {
            break;
        }
        report = verify_trapping(spec, edge, &keep)?;
    }
    Ok(report)
}

/// Uniform sample from the cross-section `Σ|y_i| = 1` of a full-dimensional
/// cone, by rejection in the bounding box of its rays. The returned point is
/// strictly inside every constraint.
pub fn sample_in_cone<R: Rng + ?Sized>(cone: &Cone, rng: &mut R) -> Option<WallPoint> {
    if cone.is_empty() {
        return None;
    }
    let d = cone.dim();
    let wall = *cone.wall();
    let signs: Vec<f64> = wall.orthant().iter().map(|&s| f64::from(s)).collect();
    let rays: Vec<Vec<f64>> = cone.rays().iter().map(|r| r.iter().map(q_to_f64).collect()).collect();
    let lo: Vec<f64> = (0..d).map(|i| rays.iter().map(|r| r[i]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..d).map(|i| rays.iter().map(|r| r[i]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let rows = rows_f64(cone);
    let mut y = vec![0.0; d];
    for _ in 0..1_000_000 {
        let mut partial = 0.0;
        for i in 0..d - 1 {
            y[i] = if hi[i] > lo[i] { rng.random_range(lo[i]..hi[i]) } else { lo[i] };
            partial += signs[i] * y[i];
        }
        y[d - 1] = signs[d - 1] * (1.0 - partial);
        if y[d - 1] < lo[d - 1] || y[d - 1] > hi[d - 1] {
            continue;
        }
        if rows.iter().all(|r| r.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() > 0.0) {
            let mut full = y.clone();
            full.insert(wall.axis, 0.0);
            return Some(WallPoint { wall, y: full });
        }
    }
    None
}
