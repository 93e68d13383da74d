use std::fmt;
use std::fs;

use anyhow::{anyhow, bail, Context, Result};
use glass_entropy::cones::{
    parse_edge, parse_trap, returning_region, sample_in_cone, search_trapping, verify_trapping, CycleInput,
    TrappingReport,
};
use glass_entropy::dynamics::{cycle_map, simulate, FracLinMap};
use glass_entropy::estimate::{block_counts, default_fit_range, fit_entropy, FitResult};
use glass_entropy::graph::{build_tg, first_return_cycles, CycleWord, TransitionGraph};
use glass_entropy::netspec::{parse_network, BoxLabel, NetworkSpec};
use glass_entropy::rational::format_vec;
use glass_entropy::refine::{entropy_sequence, parse_word, LevelSummary, Refiner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{Command, Format, Options};
use crate::output::{emit, sha256_hex, Artifact, Provenance};

/// Failures with their own exit status.
#[derive(Debug)]
pub enum Failure {
    Spec(String),
    Unverified(String),
    Cone(String),
    Tie(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Spec(_) => 2,
            Failure::Unverified(_) => 3,
            Failure::Cone(_) => 4,
            Failure::Tie(_) => 5,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Spec(m) => write!(f, "invalid network: {m}"),
            Failure::Unverified(m) => write!(f, "trapping region not verified: {m}"),
            Failure::Cone(m) => write!(f, "cone computation failed: {m}"),
            Failure::Tie(m) => write!(f, "simulation aborted: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

fn cone_failure(e: glass_entropy::Error) -> anyhow::Error {
    match e {
        glass_entropy::Error::UnverifiedTrap => Failure::Unverified(e.to_string()).into(),
        other => Failure::Cone(other.to_string()).into(),
    }
}

fn sim_failure(e: glass_entropy::Error) -> anyhow::Error {
    match e {
        glass_entropy::Error::CodimensionTwo { .. } => Failure::Tie(e.to_string()).into(),
        other => other.into(),
    }
}

/// Where the trap cycles come from.
struct Candidates {
    edge: (BoxLabel, BoxLabel),
    cycles: Vec<CycleWord>,
    /// Cycles were named by the user rather than enumerated.
    explicit: bool,
}

pub struct Session {
    command: Command,
    opts: Options,
    prov: Provenance,
    spec: Option<NetworkSpec>,
}

impl Session {
    pub fn new(command: Command, opts: Options) -> Self {
        Session { command, prov: Provenance::new(command.name()), opts, spec: None }
    }

    pub fn run(mut self) -> Result<()> {
        match self.command {
            Command::Validate => self.validate(),
            Command::Tg => self.tg(),
            Command::Cycles => self.cycles(),
            Command::Cones => self.cones(),
            Command::Trap => self.trap_cmd(),
            Command::Refine => self.refine(),
            Command::Simulate => self.simulate(),
            Command::Blocks => self.blocks(),
            Command::Fit => self.fit(),
            Command::Report => self.report(),
        }
    }

    fn format(&self, allowed: &[Format]) -> Result<Format> {
        let f = self.opts.format.unwrap_or(allowed[0]);
        if !allowed.contains(&f) {
            bail!("{} does not support --format {:?}", self.command.name(), f);
        }
        Ok(f)
    }

    fn emit(&self, artifact: &Artifact) -> Result<()> {
        emit(artifact, &self.prov, self.opts.out.as_deref())
    }

    fn load_spec(&mut self) -> Result<NetworkSpec> {
        if let Some(s) = &self.spec {
            return Ok(s.clone());
        }
        let path = self.opts.spec.as_deref().ok_or_else(|| anyhow!("--spec is required"))?;
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.prov.spec_sha256 = Some(sha256_hex(&bytes));
        let text = String::from_utf8(bytes).map_err(|e| Failure::Spec(e.to_string()))?;
        let spec = parse_network(&text).map_err(|e| Failure::Spec(e.to_string()))?;
        self.spec = Some(spec.clone());
        Ok(spec)
    }

    /// The network, refused unless it meets the focal-point and wall conditions.
    fn valid_spec(&mut self) -> Result<NetworkSpec> {
        let spec = self.load_spec()?;
        let report = spec.validate();
        if !report.passes() {
            return Err(Failure::Spec(format!(
                "{} focal coordinates on thresholds, {} opaque walls",
                report.focal_on_threshold.len(),
                report.opaque_walls.len()
            ))
            .into());
        }
        Ok(spec)
    }

    fn candidates(&mut self, tg: &TransitionGraph) -> Result<Candidates> {
        let edge_flag = self.opts.edge.as_deref().map(parse_edge).transpose()?;
        let c = if let Some(path) = self.opts.trap.clone() {
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            self.prov.param("trap_sha256", sha256_hex(text.as_bytes()));
            let (edge, cycles) = parse_trap(&text)?.resolve(tg)?;
            if edge_flag.is_some_and(|e| e != edge) {
                bail!("--edge disagrees with the trap file");
            }
            Candidates { edge, cycles, explicit: true }
        } else {
            let edge = edge_flag.ok_or_else(|| anyhow!("--edge or --trap is required"))?;
            if !self.opts.cycle.is_empty() {
                let cycles = self
                    .opts
                    .cycle
                    .iter()
                    .map(|text| {
                        let word = parse_cycle_flag(text)?;
                        word.check(tg)?;
                        Ok(word)
                    })
                    .collect::<Result<Vec<_>>>()?;
                self.prov.param("cycles", self.opts.cycle.join(";"));
                Candidates { edge, cycles, explicit: true }
            } else {
                self.prov.param("max_cycle_len", self.opts.max_cycle_len);
                Candidates { edge, cycles: first_return_cycles(tg, edge, self.opts.max_cycle_len), explicit: false }
            }
        };
        if !tg.has_edge(&c.edge.0, &c.edge.1) {
            bail!("{}>{} is not an edge of the transition graph", c.edge.0, c.edge.1);
        }
        self.prov.param("edge", format!("{}>{}", c.edge.0, c.edge.1));
        Ok(c)
    }

    /// Named cycles are verified as given; enumerated ones are pruned to
    /// their largest invariant subset.
    fn trapping(&mut self, spec: &NetworkSpec) -> Result<(TrappingReport, Candidates)> {
        let tg = build_tg(spec);
        let c = self.candidates(&tg)?;
        let report = if c.explicit {
            verify_trapping(spec, c.edge, &c.cycles)
        } else {
            search_trapping(spec, c.edge, &c.cycles)
        }
        .map_err(cone_failure)?;
        Ok((report, c))
    }

    fn verified_trap(&mut self, spec: &NetworkSpec) -> Result<TrappingReport> {
        let (report, _) = self.trapping(spec)?;
        if !report.verified {
            return Err(Failure::Unverified(unverified_reason(&report)).into());
        }
        Ok(report)
    }

    fn validate(&mut self) -> Result<()> {
        self.format(&[Format::Json])?;
        let spec = self.load_spec()?;
        let report = spec.validate();
        let focal: Vec<Value> =
            spec.boxes().map(|a| json!({ "box": a.to_string(), "focal": format_vec(spec.focal_point(a).coords()) })).collect();
        self.emit(&Artifact::json(json!({
            "n": spec.n(),
            "passes": report.passes(),
            "conditions": report,
            "focal_points": focal,
        }))?)?;
        if !report.passes() {
            return Err(Failure::Spec("network fails the transparency conditions".into()).into());
        }
        Ok(())
    }

    fn tg(&mut self) -> Result<()> {
        let format = self.format(&[Format::Dot, Format::Json, Format::Csv])?;
        let spec = self.load_spec()?;
        let tg = build_tg(&spec);
        let entropy = tg.entropy();
        let edges: Vec<(String, String)> = tg.edges().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        let artifact = match format {
            Format::Dot => Artifact::Dot(format!("// entropy={entropy:.6}\n{}", tg.to_dot("TG", |b| b.to_string()))),
            Format::Csv => Artifact::Csv { header: vec!["from", "to"], rows: edges.into_iter().map(|(a, b)| vec![a, b]).collect() },
            _ => Artifact::json(json!({
                "vertices": tg.vertices().iter().map(ToString::to_string).collect::<Vec<_>>(),
                "edges": edges,
                "terminal": spec.boxes().filter(|&a| spec.is_terminal(a)).map(|a| a.to_string()).collect::<Vec<_>>(),
                "entropy": entropy,
            }))?,
        };
        self.emit(&artifact)
    }

    fn cycles(&mut self) -> Result<()> {
        let format = self.format(&[Format::Json, Format::Csv])?;
        let spec = self.load_spec()?;
        let tg = build_tg(&spec);
        let c = self.candidates(&tg)?;
        let artifact = match format {
            Format::Csv => Artifact::Csv {
                header: vec!["label", "length", "boxes"],
                rows: c.cycles.iter().map(|w| vec![w.label.clone(), w.len().to_string(), boxes(w).join(" ")]).collect(),
            },
            _ => Artifact::json(json!({
                "edge": format!("{}>{}", c.edge.0, c.edge.1),
                "count": c.cycles.len(),
                "cycles": c.cycles.iter().map(cycle_json).collect::<Vec<_>>(),
            }))?,
        };
        self.emit(&artifact)
    }

    fn cones(&mut self) -> Result<()> {
        self.format(&[Format::Json])?;
        let spec = self.valid_spec()?;
        let tg = build_tg(&spec);
        let c = self.candidates(&tg)?;
        let entries = c
            .cycles
            .iter()
            .map(|w| {
                let cone = returning_region(&spec, w).map_err(cone_failure)?;
                let map = cycle_map(&spec, w).map_err(cone_failure)?;
                let mut v = cycle_json(w);
                v["cone"] = serde_json::to_value(cone.to_document())?;
                v["map"] = map_json(&map);
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?;
        self.emit(&Artifact::json(json!({ "edge": format!("{}>{}", c.edge.0, c.edge.1), "cycles": entries }))?)
    }

    fn trap_cmd(&mut self) -> Result<()> {
        self.format(&[Format::Json])?;
        let spec = self.valid_spec()?;
        let (report, c) = self.trapping(&spec)?;
        self.emit(&Artifact::json(json!({
            "candidates": c.cycles.len(),
            "searched": !c.explicit,
            "maps": report.active.iter().map(|&i| (report.cycles[i].label.clone(), map_json(&report.maps[i]))).collect::<Vec<_>>(),
            "trap": report.to_document(),
        }))?)?;
        if !report.verified {
            return Err(Failure::Unverified(unverified_reason(&report)).into());
        }
        Ok(())
    }

    fn refine(&mut self) -> Result<()> {
        let format = self.format(&[Format::Json, Format::Csv, Format::Dot])?;
        let spec = self.valid_spec()?;
        let trap = self.verified_trap(&spec)?;
        let k = self.opts.k;
        self.prov.param("k", k);
        let levels = entropy_sequence(&trap, k).map_err(cone_failure)?;
        let mut refiner = Refiner::new(&trap).map_err(cone_failure)?;
        let forbidden = if self.opts.forbid.is_empty() {
            None
        } else {
            self.prov.param("forbid", self.opts.forbid.join(";"));
            let words = self.opts.forbid.iter().map(|w| parse_word(&trap, w)).collect::<glass_entropy::Result<Vec<_>>>()?;
            Some(refiner.forbid(k, &words).map_err(cone_failure)?)
        };
        let artifact = match format {
            Format::Dot => {
                let g = match forbidden {
                    Some(g) => g,
                    None => refiner.graph(k).map_err(cone_failure)?,
                };
                Artifact::Dot(format!("// entropy={:.6}\n{}", g.entropy(), g.to_dot()))
            }
            Format::Csv => {
                let mut rows: Vec<Vec<String>> = levels.iter().map(|s| level_row(&s.k.to_string(), s)).collect();
                if let Some(g) = &forbidden {
                    rows.push(level_row(&format!("{}-forbid", g.level), &g.summary()));
                }
                Artifact::Csv { header: vec!["k", "entropy", "vertices", "edges", "forbidden", "transient", "words"], rows }
            }
            _ => Artifact::json(json!({
                "cycles": trap.active_cycles().iter().map(|c| cycle_json(c)).collect::<Vec<_>>(),
                "levels": levels,
                "forbid": forbidden.map(|g| json!({ "words": self.opts.forbid, "summary": g.summary() })),
            }))?,
        };
        self.emit(&artifact)
    }

    /// Recorded symbols after the burn-in, from `--input` or a fresh run.
    fn symbols(&mut self) -> Result<Vec<BoxLabel>> {
        if let Some(path) = self.opts.input.clone() {
            let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            self.prov.param("input_sha256", sha256_hex(&bytes));
            return if path.extension().is_some_and(|e| e == "u16") {
                let n = self.load_spec()?.n();
                if bytes.len() % 2 != 0 {
                    bail!("{} has an odd number of bytes", path.display());
                }
                Ok(bytes.chunks_exact(2).map(|c| BoxLabel::new(u32::from(u16::from_le_bytes([c[0], c[1]])), n)).collect())
            } else {
                let text = String::from_utf8(bytes)?;
                text.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(|l| BoxLabel::parse(l).map_err(Into::into))
                    .collect()
            };
        }
        let spec = self.valid_spec()?;
        let trap = self.verified_trap(&spec)?;
        let idx = match &self.opts.start {
            Some(label) => trap.label_index(label)?,
            None => trap.active[0],
        };
        if !trap.active.contains(&idx) {
            bail!("cycle {} is not active in the trap", trap.cycles[idx].label);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed);
        let start = sample_in_cone(&trap.cones[idx], &mut rng)
            .ok_or_else(|| anyhow!("could not sample inside the cone of {}", trap.cycles[idx].label))?;
        self.prov.seed = Some(self.opts.seed);
        self.prov.param("start", &trap.cycles[idx].label);
        self.prov.param("steps", self.opts.steps);
        self.prov.param("burn_in", self.opts.burn_in);
        let burn_in = self.opts.burn_in;
        let traj = simulate(&spec, &start, burn_in + self.opts.steps).map_err(sim_failure)?;
        if let Some(t) = traj.terminal {
            eprintln!("glass-entropy: trajectory stopped in terminal box {t} after {} transitions", traj.symbols.len());
        }
        Ok(traj.symbols.into_iter().skip(burn_in).collect())
    }

    fn simulate(&mut self) -> Result<()> {
        let format = self.format(&[Format::Bits, Format::U16])?;
        let symbols = self.symbols()?;
        self.emit(&Artifact::Symbols { format, symbols })
    }

    fn counts(&mut self) -> Result<Vec<(usize, usize)>> {
        if let Some(path) = self.opts.counts.clone() {
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            self.prov.param("counts_sha256", sha256_hex(text.as_bytes()));
            return read_counts(&text).with_context(|| format!("parsing {}", path.display()));
        }
        let symbols = self.symbols()?;
        let (a, b) = self.opts.block_lengths();
        self.prov.param("block_range", format!("{a}:{b}"));
        Ok(block_counts(&symbols, a..=b)?)
    }

    fn blocks(&mut self) -> Result<()> {
        let format = self.format(&[Format::Csv, Format::Json])?;
        let counts = self.counts()?;
        let artifact = match format {
            Format::Json => Artifact::json(json!({ "counts": counts }))?,
            _ => Artifact::Csv {
                header: vec!["n", "count"],
                rows: counts.iter().map(|(n, c)| vec![n.to_string(), c.to_string()]).collect(),
            },
        };
        self.emit(&artifact)
    }

    fn fit(&mut self) -> Result<()> {
        let format = self.format(&[Format::Json, Format::Csv])?;
        let counts = self.counts()?;
        let lo = counts.iter().map(|c| c.0).min().ok_or_else(|| anyhow!("no block counts"))?;
        let hi = counts.iter().map(|c| c.0).max().unwrap_or(lo);
        let mut ranges = vec![("full", (lo, hi)), ("tail", default_fit_range(hi))];
        if let Some(r) = self.opts.fit_range {
            self.prov.param("fit_range", format!("{}:{}", r.0, r.1));
            ranges.push(("requested", r));
        }
        let fits: Vec<(&str, FitResult)> =
            ranges.into_iter().map(|(name, r)| Ok((name, fit_entropy(&counts, r)?))).collect::<Result<_>>()?;
        let artifact = match format {
            Format::Csv => Artifact::Csv {
                header: vec!["fit", "n_min", "n_max", "slope", "intercept", "residual", "points"],
                rows: fits
                    .iter()
                    .map(|(name, f)| {
                        vec![
                            name.to_string(),
                            f.n_range.0.to_string(),
                            f.n_range.1.to_string(),
                            f.slope.to_string(),
                            f.intercept.to_string(),
                            f.residual.to_string(),
                            f.points.to_string(),
                        ]
                    })
                    .collect(),
            },
            _ => Artifact::json(json!({
                "fits": fits.iter().map(|(name, f)| json!({ "fit": name, "result": f })).collect::<Vec<_>>(),
            }))?,
        };
        self.emit(&artifact)
    }

    fn report(&mut self) -> Result<()> {
        self.format(&[Format::Json])?;
        let mut stages = Vec::new();
        let mut entropies = serde_json::Map::new();
        let outcome = self.report_stages(&mut stages, &mut entropies);
        if let Err(e) = &outcome {
            stages.push(Stage { stage: "failed", result: json!({ "error": format!("{e:#}") }) });
        }
        self.prov.param("k", self.opts.k);
        self.emit(&Artifact::json(json!({
            "complete": outcome.is_ok(),
            "entropies": entropies,
            "stages": stages,
        }))?)?;
        outcome
    }

    fn report_stages(&mut self, stages: &mut Vec<Stage>, entropies: &mut serde_json::Map<String, Value>) -> Result<()> {
        let spec = self.load_spec()?;
        let conditions = spec.validate();
        stages.push(Stage::new("validate", json!({ "passes": conditions.passes(), "conditions": conditions })));
        if !conditions.passes() {
            return Err(Failure::Spec("network fails the transparency conditions".into()).into());
        }
        let tg = build_tg(&spec);
        entropies.insert("TG".into(), json!(tg.entropy()));
        stages.push(Stage::new("tg", json!({ "vertices": tg.vertex_count(), "edges": tg.edge_count(), "entropy": tg.entropy() })));
        let (trap, c) = self.trapping(&spec)?;
        stages.push(Stage::new("cycles", json!({ "candidates": c.cycles.len(), "searched": !c.explicit })));
        stages.push(Stage::new("trap", serde_json::to_value(trap.to_document())?));
        if !trap.verified {
            return Err(Failure::Unverified(unverified_reason(&trap)).into());
        }
        let levels: Vec<LevelSummary> = entropy_sequence(&trap, self.opts.k).map_err(cone_failure)?;
        for s in &levels {
            let name = if s.k == 0 { "TG_r".to_string() } else { format!("TG_r({})", s.k) };
            entropies.insert(name, json!(s.entropy));
        }
        stages.push(Stage::new("refine", serde_json::to_value(&levels)?));
        Ok(())
    }
}

#[derive(Serialize)]
struct Stage {
    stage: &'static str,
    result: Value,
}

impl Stage {
    fn new(stage: &'static str, result: Value) -> Self {
        Stage { stage, result }
    }
}

fn unverified_reason(report: &TrappingReport) -> String {
    if report.active.is_empty() {
        return "no active cycles".into();
    }
    let labels: Vec<&str> = report.escapes.iter().map(|(i, _)| report.cycles[*i].label.as_str()).collect();
    format!("images of {} escape the active cones", labels.join(", "))
}

/// `LABEL=b1,b2,...` with boxes separated by commas or spaces.
fn parse_cycle_flag(text: &str) -> Result<CycleWord> {
    let (label, rest) = text.split_once('=').ok_or_else(|| anyhow!("--cycle expects LABEL=BOXES, got {text:?}"))?;
    let boxes = rest.split([',', ' ']).filter(|s| !s.is_empty()).map(str::to_string).collect();
    Ok(CycleInput { label: label.trim().to_string(), boxes }.to_word()?)
}

fn read_counts(text: &str) -> Result<Vec<(usize, usize)>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#') && !l.starts_with("n,"))
        .map(|l| {
            let (n, c) = l.split_once(',').ok_or_else(|| anyhow!("expected n,count, got {l:?}"))?;
            Ok((n.trim().parse()?, c.trim().parse()?))
        })
        .collect()
}

fn boxes(w: &CycleWord) -> Vec<String> {
    w.boxes.iter().map(ToString::to_string).collect()
}

fn cycle_json(w: &CycleWord) -> Value {
    json!({ "label": w.label, "length": w.len(), "boxes": boxes(w) })
}

fn map_json(m: &FracLinMap) -> Value {
    json!({
        "b": m.b.to_rows().iter().map(|r| format_vec(r)).collect::<Vec<_>>(),
        "psi": format_vec(&m.psi),
    })
}

fn level_row(k: &str, s: &LevelSummary) -> Vec<String> {
    vec![
        k.to_string(),
        format!("{:.6}", s.entropy),
        s.vertices.to_string(),
        s.edges.to_string(),
        s.forbidden.to_string(),
        s.transient.to_string(),
        s.words.join(" "),
    ]
}
