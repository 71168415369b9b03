//! Scenario configuration files.
//!
//! A scenario is sectioned `key = value` text; `#` starts a comment. Numbers
//! may be written as fractions (`1/8`). Agents and edges are 1-indexed.
//!
//! ```text
//! [graph]
//! nodes = 4
//! edges = 1-2, 2-3, 3-4        # or: graph_file = path.graph
//! drop_probability = 0.5       # or: drops = 1-2: 0.5, 2-3: 0.1 ...
//!                              # or: drop_file = path.drops
//!
//! [gains]
//! epsilon = 1/8
//! alpha = 1/2
//! stages = 10
//! delay = 5
//! k_x = 1/2
//! k_r = 1/2
//!
//! [reference]
//! r0 = 1, 2, 3, 4              # one value, or one per agent
//! h = 1
//! phi = 0.01
//! psi = 1
//! profile = zero               # zero | geometric C GAMMA | ramp C UNTIL
//! profile.2 = geometric 1 0.5  # per-agent override
//! r_hat0 = 0                   # or: r_hat0_range = LOW, HIGH
//! p0 = 1
//! noise = on
//!
//! [agents]
//! x0 = 0                       # or: x0_range = LOW, HIGH
//! x_prediction_error = 0
//! r_prediction_error = 0
//!
//! [simulation]
//! horizon = 2000
//! runs = 200
//! seed = 0
//! mode = compensated           # or naive
//!
//! [output]
//! trajectory_runs = 1
//! trajectory_stages = last     # or all
//! ```
//!
//! Everything except the graph, `epsilon`, `alpha` and `r0` has a default.
//! [`Scenario::to_config_text`] renders the fully resolved scenario in the
//! same format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::analysis::{self, AnalysisReport};
use crate::controller::{ControlGains, InitialConditions, Mode, PredictorGains, World};
use crate::error::{Error, Result};
use crate::graph::{expected_laplacian, DropModel, Graph, WeightedLaplacian};
use crate::reference::{InputProfile, ReferenceParams};
use crate::rng::{stream, Purpose};

/// The paper's experiment: path of four agents, half the packets dropped.
pub const PAPER_SEC6: &str = include_str!("../configs/paper_sec6.cfg");

/// A per-agent initial value, fixed or drawn per run.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Fixed(Vec<f64>),
    Uniform { low: f64, high: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageSelection {
    Last,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub graph: Graph,
    pub drops: DropModel,
    pub gains: ControlGains,
    pub predictor: PredictorGains,
    pub references: Vec<ReferenceParams>,
    pub r0: Vec<f64>,
    pub r_hat0: InitSpec,
    pub p0: f64,
    pub noise: bool,
    /// Same value for every stage of an agent when fixed.
    pub x0: InitSpec,
    pub x_prediction_error: f64,
    pub r_prediction_error: f64,
    pub horizon: usize,
    pub runs: usize,
    pub seed: u64,
    pub mode: Mode,
    pub trajectory_runs: usize,
    pub trajectory_stages: StageSelection,
}

struct Entry {
    line: usize,
    value: String,
}

struct Sections {
    map: BTreeMap<String, BTreeMap<String, Entry>>,
    last_line: usize,
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("graph", &["nodes", "edges", "graph_file", "drop_probability", "drops", "drop_file"]),
    ("gains", &["epsilon", "alpha", "stages", "delay", "k_x", "k_r"]),
    (
        "reference",
        &["r0", "h", "phi", "psi", "profile", "r_hat0", "r_hat0_range", "p0", "noise"],
    ),
    ("agents", &["x0", "x0_range", "x_prediction_error", "r_prediction_error"]),
    ("simulation", &["horizon", "runs", "seed", "mode"]),
    ("output", &["trajectory_runs", "trajectory_stages"]),
];

fn parse_error(line: usize, field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        field: field.into(),
        message: message.into(),
    }
}

fn known_key(section: &str, key: &str) -> bool {
    let base = key.split_once('.').map_or(key, |(b, _)| b);
    SCHEMA
        .iter()
        .find(|(s, _)| *s == section)
        .is_some_and(|(_, keys)| {
            keys.contains(&key) || (section == "reference" && base == "profile" && key != base)
        })
}

fn split_sections(text: &str) -> Result<Sections> {
    let mut map: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();
    let mut current: Option<String> = None;
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            if !SCHEMA.iter().any(|(s, _)| *s == name) {
                return Err(parse_error(line, name, "unknown section"));
            }
            if map.contains_key(name) {
                return Err(parse_error(line, name, "section appears twice"));
            }
            map.insert(name.to_string(), BTreeMap::new());
            current = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(parse_error(line, content, "expected `key = value`"));
        };
        let key = key.trim();
        let Some(section) = current.as_ref() else {
            return Err(parse_error(line, key, "key outside of any section"));
        };
        let field = format!("{section}.{key}");
        if !known_key(section, key) {
            return Err(parse_error(line, field, "unknown key"));
        }
        let entries = map.get_mut(section).expect("section inserted above");
        if entries.contains_key(key) {
            return Err(parse_error(line, field, "key appears twice"));
        }
        entries.insert(
            key.to_string(),
            Entry {
                line,
                value: value.trim().to_string(),
            },
        );
    }
    if map.is_empty() {
        return Err(parse_error(last_line.max(1), "", "configuration is empty"));
    }
    Ok(Sections { map, last_line })
}

/// Decimal or `a/b` fraction.
pub fn parse_number(text: &str) -> Option<f64> {
    let text = text.trim();
    let value = match text.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?,
        None => text.parse::<f64>().ok()?,
    };
    value.is_finite().then_some(value)
}

/// `i-j` with 1-indexed endpoints.
fn parse_edge(text: &str) -> Option<(usize, usize)> {
    let (a, b) = text.split_once('-')?;
    let a: usize = a.trim().parse().ok()?;
    let b: usize = b.trim().parse().ok()?;
    (a >= 1 && b >= 1).then(|| (a - 1, b - 1))
}

/// Typed access to one section with field-and-line diagnostics.
struct Reader<'a> {
    section: &'static str,
    entries: Option<&'a BTreeMap<String, Entry>>,
    fallback_line: usize,
}

impl<'a> Reader<'a> {
    fn new(sections: &'a Sections, section: &'static str) -> Self {
        Self {
            section,
            entries: sections.map.get(section),
            fallback_line: sections.last_line,
        }
    }

    fn field(&self, key: &str) -> String {
        format!("{}.{key}", self.section)
    }

    fn get(&self, key: &str) -> Option<&'a Entry> {
        self.entries.and_then(|e| e.get(key))
    }

    fn require(&self, key: &str) -> Result<&'a Entry> {
        self.get(key)
            .ok_or_else(|| parse_error(self.fallback_line, self.field(key), "required field is missing"))
    }

    fn bad(&self, key: &str, entry: &Entry, what: &str) -> Error {
        parse_error(entry.line, self.field(key), format!("expected {what}, got `{}`", entry.value))
    }

    fn domain(&self, key: &str, entry: &Entry, err: Error) -> Error {
        match err {
            Error::Domain(msg) => Error::Domain(format!("{} (line {}): {msg}", self.field(key), entry.line)),
            other => other,
        }
    }

    fn number(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|e| parse_number(&e.value).ok_or_else(|| self.bad(key, e, "a number")))
            .transpose()
    }

    fn number_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.number(key)?.unwrap_or(default))
    }

    fn integer<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|e| e.value.parse::<T>().map_err(|_| self.bad(key, e, "a non-negative integer")))
            .transpose()
    }

    fn list(&self, key: &str, entry: &Entry) -> Result<Vec<f64>> {
        entry
            .value
            .split(',')
            .map(|s| parse_number(s).ok_or_else(|| self.bad(key, entry, "a comma-separated list of numbers")))
            .collect()
    }

    /// One value for everyone or one per agent.
    fn per_agent(&self, key: &str, entry: &Entry, n: usize) -> Result<Vec<f64>> {
        let values = self.list(key, entry)?;
        match values.len() {
            1 => Ok(vec![values[0]; n]),
            len if len == n => Ok(values),
            len => Err(parse_error(
                entry.line,
                self.field(key),
                format!("expected 1 or {n} values, got {len}"),
            )),
        }
    }

    fn range(&self, key: &str, entry: &Entry) -> Result<(f64, f64)> {
        match self.list(key, entry)?.as_slice() {
            &[low, high] if low < high => Ok((low, high)),
            _ => Err(self.bad(key, entry, "`LOW, HIGH` with LOW < HIGH")),
        }
    }

    fn init_spec(&self, fixed: &str, range: &str, n: usize, default: f64) -> Result<InitSpec> {
        match (self.get(fixed), self.get(range)) {
            (Some(_), Some(e)) => Err(parse_error(
                e.line,
                self.field(range),
                format!("conflicts with `{}`", self.field(fixed)),
            )),
            (Some(e), None) => Ok(InitSpec::Fixed(self.per_agent(fixed, e, n)?)),
            (None, Some(e)) => {
                let (low, high) = self.range(range, e)?;
                Ok(InitSpec::Uniform { low, high })
            }
            (None, None) => Ok(InitSpec::Fixed(vec![default; n])),
        }
    }

    fn profile(&self, key: &str, entry: &Entry) -> Result<InputProfile> {
        let words: Vec<&str> = entry.value.split_whitespace().collect();
        let num = |s: &str| parse_number(s).ok_or_else(|| self.bad(key, entry, "a profile"));
        let profile = match words.as_slice() {
            ["zero"] => InputProfile::Zero,
            ["geometric", c, gamma] => InputProfile::Geometric { c: num(c)?, gamma: num(gamma)? },
            ["ramp", c, until] => InputProfile::FiniteRamp {
                c: num(c)?,
                until: until.parse().map_err(|_| self.bad(key, entry, "an integer ramp length"))?,
            },
            _ => return Err(self.bad(key, entry, "`zero`, `geometric C GAMMA` or `ramp C UNTIL`")),
        };
        profile.validate().map_err(|e| self.domain(key, entry, e))?;
        Ok(profile)
    }
}

fn read_file(base: Option<&Path>, name: &str) -> Result<String> {
    let path = match base {
        Some(dir) => dir.join(name),
        None => name.into(),
    };
    Ok(std::fs::read_to_string(path)?)
}

impl Scenario {
    pub fn paper() -> Self {
        Self::parse(PAPER_SEC6).expect("bundled scenario parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_with_base(&text, path.parent())
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_base(text, None)
    }

    /// `base` resolves relative `graph_file` / `drop_file` paths.
    pub fn parse_with_base(text: &str, base: Option<&Path>) -> Result<Self> {
        let sections = split_sections(text)?;

        let g = Reader::new(&sections, "graph");
        let graph = match (g.get("graph_file"), g.get("nodes"), g.get("edges")) {
            (Some(file), None, None) => Graph::parse(&read_file(base, &file.value)?)?,
            (Some(file), _, _) => {
                return Err(parse_error(file.line, "graph.graph_file", "conflicts with `nodes` / `edges`"));
            }
            (None, _, _) => {
                let nodes_entry = g.require("nodes")?;
                let nodes: usize = g.integer("nodes")?.expect("present");
                let edges_entry = g.require("edges")?;
                let mut edges = Vec::new();
                if !edges_entry.value.trim().is_empty() {
                    for part in edges_entry.value.split(',') {
                        edges.push(parse_edge(part).ok_or_else(|| g.bad("edges", edges_entry, "edges like `1-2, 2-3`"))?);
                    }
                }
                Graph::new(nodes, edges).map_err(|e| match e {
                    Error::Graph(msg) => parse_error(nodes_entry.line.max(edges_entry.line), "graph.edges", msg),
                    other => other,
                })?
            }
        };
        let n = graph.node_count();

        let drop_keys = ["drop_probability", "drops", "drop_file"];
        let given: Vec<&str> = drop_keys.iter().copied().filter(|k| g.get(k).is_some()).collect();
        if given.len() > 1 {
            let e = g.get(given[1]).expect("present");
            return Err(parse_error(e.line, g.field(given[1]), format!("conflicts with `{}`", g.field(given[0]))));
        }
        let drops = match given.first().copied() {
            None => DropModel::uniform(&graph, 0.0)?,
            Some("drop_probability") => {
                let e = g.get("drop_probability").expect("present");
                let p = g.number("drop_probability")?.expect("present");
                DropModel::uniform(&graph, p).map_err(|err| g.domain("drop_probability", e, err))?
            }
            Some("drops") => {
                let e = g.get("drops").expect("present");
                let mut triples = Vec::new();
                for part in e.value.split(',') {
                    let parsed = part.split_once(':').and_then(|(edge, p)| Some((parse_edge(edge)?, parse_number(p)?)));
                    triples.push(parsed.ok_or_else(|| g.bad("drops", e, "entries like `1-2: 0.5`"))?);
                }
                DropModel::new(triples).map_err(|err| g.domain("drops", e, err))?
            }
            Some(_) => {
                let e = g.get("drop_file").expect("present");
                DropModel::parse(&read_file(base, &e.value)?, n).map_err(|err| g.domain("drop_file", e, err))?
            }
        };
        drops.aligned(&graph)?;

        let k = Reader::new(&sections, "gains");
        let positive = |r: &Reader, key: &str, v: f64| -> Result<f64> {
            if v > 0.0 {
                Ok(v)
            } else {
                let e = r.get(key).expect("present");
                Err(r.domain(key, e, Error::Domain(format!("must be positive, got {v}"))))
            }
        };
        let epsilon = k.require("epsilon").and_then(|_| k.number("epsilon"))?.expect("present");
        let epsilon = positive(&k, "epsilon", epsilon)?;
        let alpha = k.require("alpha").and_then(|_| k.number("alpha"))?.expect("present");
        let alpha = positive(&k, "alpha", alpha)?;
        let n_stages: usize = k.integer("stages")?.unwrap_or(1);
        if n_stages == 0 {
            return Err(parse_error(k.get("stages").expect("present").line, "gains.stages", "at least one stage"));
        }
        let gains = ControlGains {
            epsilon,
            alpha,
            n_stages,
            tau: k.integer("delay")?.unwrap_or(0),
        };
        let predictor = PredictorGains {
            k_x: k.number_or("k_x", 0.5)?,
            k_r: k.number_or("k_r", 0.5)?,
        };

        let r = Reader::new(&sections, "reference");
        let r0_entry = r.require("r0")?;
        let r0 = r.per_agent("r0", r0_entry, n)?;
        let vector = |key: &str, default: f64| -> Result<Vec<f64>> {
            match r.get(key) {
                Some(e) => r.per_agent(key, e, n),
                None => Ok(vec![default; n]),
            }
        };
        let h = vector("h", 1.0)?;
        let phi = vector("phi", 0.01)?;
        let psi = vector("psi", 1.0)?;
        let base_profile = match r.get("profile") {
            Some(e) => r.profile("profile", e)?,
            None => InputProfile::Zero,
        };
        let mut profiles = vec![base_profile; n];
        if let Some(entries) = sections.map.get("reference") {
            for (key, e) in entries.iter().filter(|(key, _)| key.starts_with("profile.")) {
                let idx: usize = key["profile.".len()..]
                    .parse()
                    .ok()
                    .filter(|&i| (1..=n).contains(&i))
                    .ok_or_else(|| parse_error(e.line, r.field(key), format!("agent index must be 1..={n}")))?;
                profiles[idx - 1] = r.profile(key, e)?;
            }
        }
        let mut references = Vec::with_capacity(n);
        for i in 0..n {
            let params = ReferenceParams::new(h[i], phi[i], psi[i], profiles[i]).map_err(|err| match err {
                Error::Domain(msg) => Error::Domain(format!("reference, agent {}: {msg}", i + 1)),
                other => other,
            })?;
            references.push(params);
        }
        let r_hat0 = r.init_spec("r_hat0", "r_hat0_range", n, 0.0)?;
        let p0 = r.number_or("p0", 1.0)?;
        if p0 < 0.0 {
            return Err(r.domain("p0", r.get("p0").expect("present"), Error::Domain(format!("must be non-negative, got {p0}"))));
        }
        let noise = match r.get("noise") {
            None => true,
            Some(e) => match e.value.as_str() {
                "on" | "true" => true,
                "off" | "false" => false,
                _ => return Err(r.bad("noise", e, "`on` or `off`")),
            },
        };

        let a = Reader::new(&sections, "agents");
        let x0 = a.init_spec("x0", "x0_range", n, 0.0)?;

        let s = Reader::new(&sections, "simulation");
        let mode = match s.get("mode") {
            None => Mode::Compensated,
            Some(e) => e.value.parse().map_err(|_| s.bad("mode", e, "`compensated` or `naive`"))?,
        };

        let o = Reader::new(&sections, "output");
        let trajectory_stages = match o.get("trajectory_stages") {
            None => StageSelection::Last,
            Some(e) => match e.value.as_str() {
                "last" => StageSelection::Last,
                "all" => StageSelection::All,
                _ => return Err(o.bad("trajectory_stages", e, "`last` or `all`")),
            },
        };

        Ok(Scenario {
            graph,
            drops,
            gains,
            predictor,
            references,
            r0,
            r_hat0,
            p0,
            noise,
            x0,
            x_prediction_error: a.number_or("x_prediction_error", 0.0)?,
            r_prediction_error: a.number_or("r_prediction_error", 0.0)?,
            horizon: s.integer("horizon")?.unwrap_or(2000),
            runs: s.integer("runs")?.unwrap_or(200),
            seed: s.integer("seed")?.unwrap_or(0),
            mode,
            trajectory_runs: o.integer("trajectory_runs")?.unwrap_or(1),
            trajectory_stages,
        })
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn expected_laplacian(&self) -> Result<WeightedLaplacian> {
        expected_laplacian(&self.graph, &self.drops)
    }

    /// `r*_i = lim E[r_i(k)] = r_i(0) + sum_k v_i(k)`.
    pub fn r_star(&self) -> Vec<f64> {
        self.r0
            .iter()
            .zip(&self.references)
            .map(|(r, p)| r + p.input.total())
            .collect()
    }

    pub fn analysis(&self) -> Result<AnalysisReport> {
        analysis::analyze(&self.expected_laplacian()?, &self.gains, &self.predictor, &self.r_star())
    }

    /// Stages written to the trajectory file, 0-indexed.
    pub fn recorded_stages(&self) -> Vec<usize> {
        match self.trajectory_stages {
            StageSelection::Last => vec![self.gains.n_stages - 1],
            StageSelection::All => (0..self.gains.n_stages).collect(),
        }
    }

    /// Initial conditions of run `run`; random parts come from the run's
    /// initialization streams.
    pub fn initial_conditions(&self, run: u32) -> InitialConditions {
        let n = self.node_count();
        let mut init = InitialConditions {
            x0: Vec::with_capacity(n),
            r0: self.r0.clone(),
            z0: Vec::with_capacity(n),
            r_hat0: Vec::with_capacity(n),
            p0: vec![self.p0; n],
            x_prediction_error: self.x_prediction_error,
            r_prediction_error: self.r_prediction_error,
        };
        for i in 0..n {
            let mut rng = stream(self.seed, run, Purpose::Init, i as u32);
            init.x0.push(match &self.x0 {
                InitSpec::Fixed(v) => vec![v[i]; self.gains.n_stages],
                &InitSpec::Uniform { low, high } => {
                    (0..self.gains.n_stages).map(|_| rng.random_range(low..high)).collect()
                }
            });
            init.r_hat0.push(match &self.r_hat0 {
                InitSpec::Fixed(v) => v[i],
                &InitSpec::Uniform { low, high } => rng.random_range(low..high),
            });
            let params = &self.references[i];
            let measurement_noise: f64 = if self.noise {
                params.psi.sqrt() * Distribution::<f64>::sample(&StandardNormal, &mut rng)
            } else {
                0.0
            };
            init.z0.push(params.h * self.r0[i] + measurement_noise);
        }
        init
    }

    pub fn world(&self, run: u32) -> Result<World> {
        World::new(
            self.graph.clone(),
            &self.drops,
            self.gains,
            self.predictor,
            self.references.clone(),
            &self.initial_conditions(run),
            self.noise,
        )
    }

    /// The resolved scenario in configuration syntax; parses back to an
    /// equal scenario.
    pub fn to_config_text(&self) -> String {
        fn join(v: &[f64]) -> String {
            v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
        }
        fn column(v: impl Iterator<Item = f64>) -> String {
            join(&v.collect::<Vec<_>>())
        }
        let edge = |&(i, j): &(usize, usize)| format!("{}-{}", i + 1, j + 1);
        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "[graph]");
        let _ = writeln!(w, "nodes = {}", self.node_count());
        let _ = writeln!(w, "edges = {}", self.graph.edges().iter().map(edge).collect::<Vec<_>>().join(", "));
        if self.graph.edge_count() > 0 {
            let drops: Vec<String> = self
                .drops
                .entries()
                .map(|(e, p)| format!("{}: {p}", edge(&e)))
                .collect();
            let _ = writeln!(w, "drops = {}", drops.join(", "));
        }
        let _ = writeln!(w, "\n[gains]");
        let _ = writeln!(w, "epsilon = {}", self.gains.epsilon);
        let _ = writeln!(w, "alpha = {}", self.gains.alpha);
        let _ = writeln!(w, "stages = {}", self.gains.n_stages);
        let _ = writeln!(w, "delay = {}", self.gains.tau);
        let _ = writeln!(w, "k_x = {}", self.predictor.k_x);
        let _ = writeln!(w, "k_r = {}", self.predictor.k_r);
        let _ = writeln!(w, "\n[reference]");
        let _ = writeln!(w, "r0 = {}", join(&self.r0));
        let _ = writeln!(w, "h = {}", column(self.references.iter().map(|p| p.h)));
        let _ = writeln!(w, "phi = {}", column(self.references.iter().map(|p| p.phi)));
        let _ = writeln!(w, "psi = {}", column(self.references.iter().map(|p| p.psi)));
        for (i, p) in self.references.iter().enumerate() {
            let _ = writeln!(w, "profile.{} = {}", i + 1, p.input);
        }
        match &self.r_hat0 {
            InitSpec::Fixed(v) => writeln!(w, "r_hat0 = {}", join(v)),
            InitSpec::Uniform { low, high } => writeln!(w, "r_hat0_range = {low}, {high}"),
        }
        .ok();
        let _ = writeln!(w, "p0 = {}", self.p0);
        let _ = writeln!(w, "noise = {}", if self.noise { "on" } else { "off" });
        let _ = writeln!(w, "\n[agents]");
        match &self.x0 {
            InitSpec::Fixed(v) => writeln!(w, "x0 = {}", join(v)),
            InitSpec::Uniform { low, high } => writeln!(w, "x0_range = {low}, {high}"),
        }
        .ok();
        let _ = writeln!(w, "x_prediction_error = {}", self.x_prediction_error);
        let _ = writeln!(w, "r_prediction_error = {}", self.r_prediction_error);
        let _ = writeln!(w, "\n[simulation]");
        let _ = writeln!(w, "horizon = {}", self.horizon);
        let _ = writeln!(w, "runs = {}", self.runs);
        let _ = writeln!(w, "seed = {}", self.seed);
        let _ = writeln!(w, "mode = {}", self.mode);
        let _ = writeln!(w, "\n[output]");
        let _ = writeln!(w, "trajectory_runs = {}", self.trajectory_runs);
        let _ = writeln!(
            w,
            "trajectory_stages = {}",
            match self.trajectory_stages {
                StageSelection::Last => "last",
                StageSelection::All => "all",
            }
        );
        out
    }
}
