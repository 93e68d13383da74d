//! Refined transition graphs `TG_r` and `TG_r(k)`.
//!
//! Level 0 is the union of the active cycles' subgraphs. Level `k ≥ 1` gives
//! every admissible length-`k` cycle word its own copy of its first cycle,
//! joined by cross edges that shift the word by one letter.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::cones::{map_cone, transient_words, Cone, TrappingReport, WordCone};
use crate::error::{Error, Result};
use crate::graph::{cycle_union_graph, DiGraph};
use crate::netspec::BoxLabel;
use crate::rational::QMatrix;

/// A box tagged with the cycle word whose copy it belongs to (empty at level 0).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RefinedVertex {
    pub label: BoxLabel,
    pub word: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct RefinedGraph {
    pub level: usize,
    pub graph: DiGraph<RefinedVertex>,
    /// Admissible words, as indices into the trap's cycle list.
    pub words: Vec<Vec<usize>>,
    /// `|F_k|`: length-`k` words with empty returning cones.
    pub forbidden: usize,
    /// `|Π_k|`
    pub transient: usize,
    /// Words removed on request by [`Refiner::forbid`].
    pub excluded: usize,
    labels: Vec<String>,
}

impl RefinedGraph {
    pub fn entropy(&self) -> f64 {
        self.graph.entropy()
    }

    pub fn word_label(&self, word: &[usize]) -> String {
        word.iter().map(|&i| self.labels[i].as_str()).collect()
    }

    /// Vertex name such as `0100_AB`; plain bitstring at level 0.
    pub fn vertex_label(&self, v: &RefinedVertex) -> String {
        if v.word.is_empty() {
            v.label.to_string()
        } else {
            format!("{}_{}", v.label, self.word_label(&v.word))
        }
    }

    pub fn to_dot(&self) -> String {
        self.graph.to_dot(&format!("TG_r({})", self.level), |v| self.vertex_label(v))
    }

    pub fn summary(&self) -> LevelSummary {
        LevelSummary {
            k: self.level,
            entropy: self.entropy(),
            forbidden: self.forbidden,
            transient: self.transient,
            vertices: self.graph.vertex_count(),
            edges: self.graph.edge_count(),
            words: self.words.iter().map(|w| self.word_label(w)).collect(),
        }
    }

    pub fn to_document(&self) -> RefinedDocument {
        RefinedDocument {
            level: self.level,
            entropy: self.entropy(),
            forbidden: self.forbidden,
            transient: self.transient,
            words: self.words.iter().map(|w| self.word_label(w)).collect(),
            vertices: self.graph.vertices().iter().map(|v| self.vertex_label(v)).collect(),
            edges: self
                .graph
                .edges()
                .map(|(a, b)| (self.vertex_label(a), self.vertex_label(b)))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinedDocument {
    pub level: usize,
    pub entropy: f64,
    pub forbidden: usize,
    pub transient: usize,
    pub words: Vec<String>,
    pub vertices: Vec<String>,
    pub edges: Vec<(String, String)>,
}

/// One row of the bound sequence.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelSummary {
    pub k: usize,
    pub entropy: f64,
    pub forbidden: usize,
    pub transient: usize,
    pub vertices: usize,
    pub edges: usize,
    pub words: Vec<String>,
}

impl fmt::Display for LevelSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "k={} h={:.6} |F|={} |Pi|={} V={} E={}",
            self.k, self.entropy, self.forbidden, self.transient, self.vertices, self.edges
        )
    }
}

/// Nonempty word with its cone and the reduced matrix of its return map.
#[derive(Clone, Debug)]
struct WordData {
    word: Vec<usize>,
    cone: Cone,
    matrix: QMatrix,
}

/// Builds refinements level by level, caching every nonempty word cone.
///
/// Words are generated by extending nonempty words one cycle at a time, so a
/// word whose prefix already has an empty cone is never computed.
pub struct Refiner<'a> {
    trap: &'a TrappingReport,
    /// `levels[k-1]` holds the nonempty words of length `k`.
    levels: Vec<Vec<WordData>>,
}

impl<'a> Refiner<'a> {
    pub fn new(trap: &'a TrappingReport) -> Result<Self> {
        if !trap.verified {
            return Err(Error::UnverifiedTrap);
        }
        let first: Vec<WordData> = trap
            .active
            .iter()
            .map(|&i| WordData { word: vec![i], cone: trap.cones[i].clone(), matrix: trap.maps[i].b.clone() })
            .collect();
        Ok(Self { trap, levels: vec![first] })
    }

    pub fn trap(&self) -> &TrappingReport {
        self.trap
    }

    fn alphabet(&self) -> &[usize] {
        &self.trap.active
    }

    fn ensure_level(&mut self, k: usize) {
        while self.levels.len() < k {
            let prev = self.levels.last().expect("level 1 exists");
            let trap = self.trap;
            let alphabet = self.alphabet().to_vec();
            let candidates: Vec<(&WordData, usize)> =
                prev.iter().flat_map(|u| alphabet.iter().map(move |&c| (u, c))).collect();
            let next: Vec<WordData> = candidates
                .par_iter()
                .filter_map(|&(u, c)| {
                    // ℛ_{uc} = ℛ_u ∩ M_u^{-1}(ℛ_c)
                    let mut rows = u.cone.constraints().to_vec();
                    for r in trap.cones[c].constraints() {
                        rows.push(u.matrix.tr_mul_vec(r));
                    }
                    let cone = Cone::from_constraints(*u.cone.wall(), &rows);
                    if cone.is_empty() {
                        return None;
                    }
                    let mut word = u.word.clone();
                    word.push(c);
                    Some(WordData { word, cone, matrix: trap.maps[c].b.mul(&u.matrix) })
                })
                .collect();
            self.levels.push(next);
        }
    }

    /// Returning cone of a word, or `None` when it is empty.
    pub fn word_cone(&mut self, word: &[usize]) -> Option<Cone> {
        if word.is_empty() {
            return None;
        }
        self.ensure_level(word.len());
        self.levels[word.len() - 1].iter().find(|w| w.word == word).map(|w| w.cone.clone())
    }

    /// Nonempty words of length `k`.
    pub fn nonempty_words(&mut self, k: usize) -> Vec<Vec<usize>> {
        self.ensure_level(k);
        self.levels[k - 1].iter().map(|w| w.word.clone()).collect()
    }

    /// `TG_r` for `k = 0`, otherwise `TG_r(k)`.
    pub fn graph(&mut self, k: usize) -> Result<RefinedGraph> {
        self.forbid(k, &[])
    }

    /// `TG_r(k)` at level `max(k, longest extra word)` with every word that
    /// contains one of `extra` as a factor removed before transient pruning.
    pub fn forbid(&mut self, k: usize, extra: &[Vec<usize>]) -> Result<RefinedGraph> {
        let level = extra.iter().map(Vec::len).max().unwrap_or(0).max(k);
        if level == 0 {
            return Ok(build_tgr(self.trap));
        }
        self.ensure_level(level);
        let trap = self.trap;
        let total = self.alphabet().len().pow(level as u32);
        let nonempty = &self.levels[level - 1];
        let forbidden = total - nonempty.len();
        let contains_factor = |w: &[usize]| {
            extra.iter().any(|x| !x.is_empty() && w.windows(x.len()).any(|win| win == x.as_slice()))
        };
        let kept: Vec<&WordData> = nonempty.iter().filter(|w| !contains_factor(&w.word)).collect();
        let excluded = nonempty.len() - kept.len();
        let entries: Vec<WordCone> = kept
            .par_iter()
            .map(|w| {
                let image = map_cone(&trap.maps[w.word[0]], &w.cone)?;
                Ok(WordCone { word: w.word.clone(), cone: w.cone.clone(), image: Some(image) })
            })
            .collect::<Result<_>>()?;
        let transient = transient_words(&entries)?;
        let words: Vec<Vec<usize>> = entries
            .iter()
            .enumerate()
            .filter(|(i, _)| transient.binary_search(i).is_err())
            .map(|(_, e)| e.word.clone())
            .collect();
        Ok(assemble(trap, level, words, forbidden, transient.len(), excluded))
    }
}

fn labels(trap: &TrappingReport) -> Vec<String> {
    trap.cycles.iter().map(|c| c.label.clone()).collect()
}

fn assemble(
    trap: &TrappingReport,
    level: usize,
    mut words: Vec<Vec<usize>>,
    forbidden: usize,
    transient: usize,
    excluded: usize,
) -> RefinedGraph {
    words.sort();
    let mut graph = DiGraph::new();
    let (tail, head) = trap.cycles[trap.active[0]].starting_edge();
    for w in &words {
        let cycle = &trap.cycles[w[0]];
        for b in &cycle.boxes {
            graph.add_vertex(RefinedVertex { label: *b, word: w.clone() });
        }
        for e in cycle.closed_path().windows(2) {
            if (e[0], e[1]) == (tail, head) {
                continue;
            }
            graph.add_edge(
                RefinedVertex { label: e[0], word: w.clone() },
                RefinedVertex { label: e[1], word: w.clone() },
            );
        }
    }
    let mut by_prefix: HashMap<&[usize], Vec<&Vec<usize>>> = HashMap::new();
    for w in &words {
        by_prefix.entry(&w[..level - 1]).or_default().push(w);
    }
    for u in &words {
        if let Some(next) = by_prefix.get(&u[1..]) {
            for v in next {
                graph.add_edge(
                    RefinedVertex { label: tail, word: u.clone() },
                    RefinedVertex { label: head, word: (*v).clone() },
                );
            }
        }
    }
    RefinedGraph { level, graph, words, forbidden, transient, excluded, labels: labels(trap) }
}

/// `TG_r`: union of the active cycles' subgraphs.
pub fn build_tgr(trap: &TrappingReport) -> RefinedGraph {
    let tg = cycle_union_graph(trap.active_cycles());
    let mut graph = DiGraph::new();
    for v in tg.vertices() {
        graph.add_vertex(RefinedVertex { label: *v, word: Vec::new() });
    }
    for (a, b) in tg.edges() {
        graph.add_edge(
            RefinedVertex { label: *a, word: Vec::new() },
            RefinedVertex { label: *b, word: Vec::new() },
        );
    }
    RefinedGraph {
        level: 0,
        graph,
        words: trap.active.iter().map(|&i| vec![i]).collect(),
        forbidden: trap.empty.len(),
        transient: trap.transient.len(),
        excluded: 0,
        labels: labels(trap),
    }
}

pub fn build_tgr_k(trap: &TrappingReport, k: usize) -> Result<RefinedGraph> {
    Refiner::new(trap)?.graph(k)
}

/// Entropies of `TG_r(0) = TG_r` through `TG_r(k_max)`.
pub fn entropy_sequence(trap: &TrappingReport, k_max: usize) -> Result<Vec<LevelSummary>> {
    let mut refiner = Refiner::new(trap)?;
    (0..=k_max).map(|k| refiner.graph(k).map(|g| g.summary())).collect()
}

/// Splits text such as `BAAB` or `B,A,A,B` into cycle indices using the
/// trap's labels (longest label first).
pub fn parse_word(trap: &TrappingReport, text: &str) -> Result<Vec<usize>> {
    let mut labels: Vec<(usize, &str)> = trap.cycles.iter().enumerate().map(|(i, c)| (i, c.label.as_str())).collect();
    labels.sort_by_key(|(_, l)| std::cmp::Reverse(l.len()));
    let mut out = Vec::new();
    for part in text.split([',', '.', ' ']).filter(|p| !p.is_empty()) {
        let mut rest = part;
        while !rest.is_empty() {
            let (i, l) = labels
                .iter()
                .find(|(_, l)| !l.is_empty() && rest.starts_with(l))
                .ok_or_else(|| Error::UnknownCycleLabel(rest.to_string()))?;
            out.push(*i);
            rest = &rest[l.len()..];
        }
    }
    Ok(out)
}

/// What-if bound: the refinement of `g` rebuilt with `extra` words forbidden.
pub fn forbid_words(
    trap: &TrappingReport,
    g: &RefinedGraph,
    extra: &[&str],
) -> Result<RefinedGraph> {
    let words = extra.iter().map(|w| parse_word(trap, w)).collect::<Result<Vec<_>>>()?;
    Refiner::new(trap)?.forbid(g.level, &words)
}
