//! Scenario files: topology, vehicle traces and request schedules.
//!
//! Topology grammar, one record per line (`#` starts a comment):
//!
//! ```text
//! node <id> <x> <y> <switch|ap|camera|server>
//! link <a> <b> <latency_ms>
//! param <name> <value>
//! ```
//!
//! Trace grammar:
//!
//! ```text
//! mark <vehicle> <t_seconds> <x> <y>
//! request <vehicle> <t_seconds> <camera>
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::EngineParams;
use crate::time::SimTime;
use crate::topology::{NodeId, Role, Topology, TopologyBuilder, TopologyError, Vec2};

#[derive(Debug, Clone, PartialEq)]
pub struct Mark {
    pub vehicle: NodeId,
    pub time: SimTime,
    pub position: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequestSpec {
    pub vehicle: NodeId,
    pub time: SimTime,
    pub camera: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: Topology,
    pub params: EngineParams,
    pub marks: Vec<Mark>,
    pub requests: Vec<RequestSpec>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<ScenarioError>,
    },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("{0}")]
    Invalid(String),
}

fn perr(line: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse {
        line,
        message: message.into(),
    }
}

fn valid_id(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct Fields<'a> {
    line: usize,
    it: std::str::SplitWhitespace<'a>,
}

impl<'a> Fields<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str, ScenarioError> {
        self.it.next().ok_or_else(|| perr(self.line, format!("missing {what}")))
    }

    fn id(&mut self, what: &str) -> Result<NodeId, ScenarioError> {
        let s = self.next(what)?;
        if !valid_id(s) {
            return Err(perr(
                self.line,
                format!("invalid {what} `{s}` (letters, digits and _ only)"),
            ));
        }
        Ok(NodeId::new(s))
    }

    fn num(&mut self, what: &str) -> Result<f64, ScenarioError> {
        let s = self.next(what)?;
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(perr(self.line, format!("invalid {what} `{s}`"))),
        }
    }

    fn non_negative(&mut self, what: &str) -> Result<f64, ScenarioError> {
        let v = self.num(what)?;
        if v < 0.0 {
            return Err(perr(self.line, format!("{what} must be non-negative, got {v}")));
        }
        Ok(v)
    }

    fn end(&mut self) -> Result<(), ScenarioError> {
        match self.it.next() {
            Some(extra) => Err(perr(self.line, format!("unexpected trailing field `{extra}`"))),
            None => Ok(()),
        }
    }
}

/// Meaningful lines with their 1-based numbers, comments stripped.
fn records(text: &str) -> impl Iterator<Item = (usize, Fields<'_>, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("");
        let mut it = body.split_whitespace();
        let kw = it.next()?;
        Some((i + 1, Fields { line: i + 1, it }, kw))
    })
}

fn set_param(
    params: &mut EngineParams,
    ap_range: &mut f64,
    name: &str,
    f: &mut Fields<'_>,
) -> Result<(), ScenarioError> {
    let line = f.line;
    match name {
        "ap_range" => *ap_range = f.num("ap_range")?,
        "period_ms" => params.period = SimTime::from_millis_f64(f.non_negative(name)?),
        "camera_phase_ms" => params.camera_phase = SimTime::from_millis_f64(f.non_negative(name)?),
        "controller_latency_ms" => params.controller_latency = SimTime::from_millis_f64(f.non_negative(name)?),
        "rewrite_cost_ms" => params.rewrite_cost = SimTime::from_millis_f64(f.non_negative(name)?),
        "wireless_latency_ms" => params.wireless_latency = SimTime::from_millis_f64(f.non_negative(name)?),
        "request_timeout_s" => params.request_timeout = SimTime::from_secs_f64(f.non_negative(name)?),
        "min_idle_timeout_s" => params.min_idle_timeout = SimTime::from_secs_f64(f.non_negative(name)?),
        "moment_s" => params.moment = SimTime::from_secs_f64(f.non_negative(name)?),
        "window_s" => params.window = SimTime::from_secs_f64(f.non_negative(name)?),
        "tail_moments" => {
            let s = f.next(name)?;
            params.tail_moments = s
                .parse()
                .map_err(|_| perr(line, format!("invalid tail_moments `{s}`")))?;
        }
        "heading_x" => params.default_heading.x = f.num(name)?,
        "heading_y" => params.default_heading.y = f.num(name)?,
        "capacity" => {
            let s = f.next(name)?;
            let c: usize = s.parse().map_err(|_| perr(line, format!("invalid capacity `{s}`")))?;
            params.capacity = Some(c);
        }
        other => return Err(perr(line, format!("unknown parameter `{other}`"))),
    }
    Ok(())
}

pub const DEFAULT_AP_RANGE: f64 = 50.0;

/// Parses a topology file into the graph and the engine parameters it sets.
pub fn parse_topology(text: &str) -> Result<(Topology, EngineParams), ScenarioError> {
    let mut params = EngineParams::default();
    let mut ap_range = DEFAULT_AP_RANGE;
    let mut b = TopologyBuilder::new(ap_range);
    let mut declared = BTreeSet::new();
    let mut linked = BTreeSet::new();
    for (line, mut f, kw) in records(text) {
        match kw {
            "node" => {
                let id = f.id("node id")?;
                let x = f.num("x")?;
                let y = f.num("y")?;
                let role_s = f.next("role")?;
                let role: Role = role_s.parse().map_err(|_| {
                    perr(
                        line,
                        format!("bad role `{role_s}` (expected switch, ap, camera or server)"),
                    )
                })?;
                f.end()?;
                if !declared.insert(id.clone()) {
                    return Err(perr(line, format!("duplicate node id `{id}`")));
                }
                b.node(id, x, y, role);
            }
            "link" => {
                let a = f.id("link endpoint")?;
                let c = f.id("link endpoint")?;
                let lat = f.non_negative("latency_ms")?;
                f.end()?;
                for end in [&a, &c] {
                    if !declared.contains(end) {
                        return Err(perr(line, format!("link references unknown node `{end}`")));
                    }
                }
                if a == c {
                    return Err(perr(line, format!("self-loop on `{a}`")));
                }
                let key = if a < c {
                    (a.clone(), c.clone())
                } else {
                    (c.clone(), a.clone())
                };
                if !linked.insert(key) {
                    return Err(perr(line, format!("duplicate link `{a}`-`{c}`")));
                }
                b.link(a, c, lat);
            }
            "param" => {
                let name = f.next("parameter name")?.to_string();
                set_param(&mut params, &mut ap_range, &name, &mut f)?;
                f.end()?;
            }
            other => return Err(perr(line, format!("unknown record `{other}`"))),
        }
    }
    b.ap_range(ap_range);
    let topo = b.build()?;
    params.validate().map_err(ScenarioError::Invalid)?;
    Ok((topo, params))
}

/// Parses a trace file. With a topology at hand, requests are checked
/// against it and errors keep their line numbers.
pub fn parse_trace(text: &str, topo: Option<&Topology>) -> Result<(Vec<Mark>, Vec<RequestSpec>), ScenarioError> {
    let mut marks = Vec::new();
    let mut requests = Vec::new();
    let mut last_time: BTreeMap<NodeId, SimTime> = BTreeMap::new();
    for (line, mut f, kw) in records(text) {
        match kw {
            "mark" => {
                let vehicle = f.id("vehicle id")?;
                let t = f.non_negative("time")?;
                let x = f.num("x")?;
                let y = f.num("y")?;
                f.end()?;
                let time = SimTime::from_secs_f64(t);
                if let Some(t) = topo {
                    if t.contains(&vehicle) {
                        return Err(perr(line, format!("vehicle id `{vehicle}` collides with a node id")));
                    }
                }
                if last_time.get(&vehicle).is_some_and(|&p| p > time) {
                    return Err(perr(line, format!("marks of `{vehicle}` go back in time")));
                }
                last_time.insert(vehicle.clone(), time);
                marks.push(Mark {
                    vehicle,
                    time,
                    position: Vec2::new(x, y),
                });
            }
            "request" => {
                let vehicle = f.id("vehicle id")?;
                let t = f.non_negative("time")?;
                let camera = f.id("camera id")?;
                f.end()?;
                if let Some(t) = topo {
                    match t.node(&camera) {
                        Ok(n) if n.role == Role::Camera => {}
                        Ok(_) => return Err(perr(line, format!("`{camera}` is not a camera"))),
                        Err(_) => return Err(perr(line, format!("unknown camera `{camera}`"))),
                    }
                }
                requests.push(RequestSpec {
                    vehicle,
                    time: SimTime::from_secs_f64(t),
                    camera,
                });
            }
            other => return Err(perr(line, format!("unknown record `{other}`"))),
        }
    }
    Ok((marks, requests))
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn in_file(path: &Path) -> impl FnOnce(ScenarioError) -> ScenarioError + '_ {
    move |e| ScenarioError::InFile {
        path: path.to_path_buf(),
        source: Box::new(e),
    }
}

fn fmt_secs(t: SimTime) -> String {
    format!("{}", t.as_secs_f64())
}

fn fmt_ms(t: SimTime) -> String {
    format!("{}", t.as_millis_f64())
}

impl Scenario {
    pub fn parse(topology: &str, trace: &str) -> Result<Scenario, ScenarioError> {
        let (topology, params) = parse_topology(topology)?;
        let (marks, requests) = parse_trace(trace, Some(&topology))?;
        let s = Scenario {
            topology,
            params,
            marks,
            requests,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn load(topology: &Path, trace: &Path) -> Result<Scenario, ScenarioError> {
        let (topo, params) = parse_topology(&read(topology)?).map_err(in_file(topology))?;
        let (marks, requests) = parse_trace(&read(trace)?, Some(&topo)).map_err(in_file(trace))?;
        let s = Scenario {
            topology: topo,
            params,
            marks,
            requests,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.params.validate().map_err(ScenarioError::Invalid)?;
        let mut last: BTreeMap<&NodeId, SimTime> = BTreeMap::new();
        for m in &self.marks {
            if self.topology.contains(&m.vehicle) {
                return Err(ScenarioError::Invalid(format!(
                    "vehicle id `{}` collides with a node id",
                    m.vehicle
                )));
            }
            if !m.position.is_finite() {
                return Err(ScenarioError::Invalid(format!(
                    "non-finite position for `{}`",
                    m.vehicle
                )));
            }
            if last.get(&m.vehicle).is_some_and(|&p| p > m.time) {
                return Err(ScenarioError::Invalid(format!(
                    "marks of `{}` go back in time",
                    m.vehicle
                )));
            }
            last.insert(&m.vehicle, m.time);
        }
        for r in &self.requests {
            match self.topology.node(&r.camera) {
                Ok(n) if n.role == Role::Camera => {}
                _ => {
                    return Err(ScenarioError::Invalid(format!(
                        "request names non-camera `{}`",
                        r.camera
                    )))
                }
            }
        }
        Ok(())
    }

    /// Marks that fall outside every AP's range.
    pub fn warnings(&self) -> Vec<String> {
        self.marks
            .iter()
            .filter(|m| self.topology.nearest_ap(m.position).is_none())
            .map(|m| {
                format!(
                    "mark of `{}` at t={}s is outside every AP range",
                    m.vehicle,
                    fmt_secs(m.time)
                )
            })
            .collect()
    }

    pub fn topology_text(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        for n in self.topology.nodes() {
            let _ = writeln!(s, "node {} {} {} {}", n.id, n.position.x, n.position.y, n.role);
        }
        for l in self.topology.links() {
            let _ = writeln!(s, "link {} {} {}", l.a, l.b, l.latency_ms);
        }
        let _ = writeln!(s, "param ap_range {}", self.topology.ap_range());
        let _ = writeln!(s, "param period_ms {}", fmt_ms(p.period));
        let _ = writeln!(s, "param camera_phase_ms {}", fmt_ms(p.camera_phase));
        let _ = writeln!(s, "param controller_latency_ms {}", fmt_ms(p.controller_latency));
        let _ = writeln!(s, "param rewrite_cost_ms {}", fmt_ms(p.rewrite_cost));
        let _ = writeln!(s, "param wireless_latency_ms {}", fmt_ms(p.wireless_latency));
        let _ = writeln!(s, "param request_timeout_s {}", fmt_secs(p.request_timeout));
        let _ = writeln!(s, "param min_idle_timeout_s {}", fmt_secs(p.min_idle_timeout));
        let _ = writeln!(s, "param moment_s {}", fmt_secs(p.moment));
        let _ = writeln!(s, "param window_s {}", fmt_secs(p.window));
        let _ = writeln!(s, "param tail_moments {}", p.tail_moments);
        let _ = writeln!(s, "param heading_x {}", p.default_heading.x);
        let _ = writeln!(s, "param heading_y {}", p.default_heading.y);
        if let Some(c) = p.capacity {
            let _ = writeln!(s, "param capacity {c}");
        }
        s
    }

    pub fn trace_text(&self) -> String {
        let mut s = String::new();
        for m in &self.marks {
            let _ = writeln!(
                s,
                "mark {} {} {} {}",
                m.vehicle,
                fmt_secs(m.time),
                m.position.x,
                m.position.y
            );
        }
        for r in &self.requests {
            let _ = writeln!(s, "request {} {} {}", r.vehicle, fmt_secs(r.time), r.camera);
        }
        s
    }

    /// Per-vehicle positions and headings at the moments they were seen.
    pub fn vehicle_plans(&self) -> VehiclePlans {
        let snapped = snap_to_moments(&self.marks, self.params.moment, self.params.window);
        let mut per_vehicle: BTreeMap<NodeId, Vec<(u64, Vec2)>> = BTreeMap::new();
        for m in &snapped.moments {
            for mark in &m.members {
                per_vehicle
                    .entry(mark.vehicle.clone())
                    .or_default()
                    .push((m.index, mark.position));
            }
        }
        let vehicles = per_vehicle
            .into_iter()
            .map(|(vehicle, seq)| {
                let positions: Vec<Vec2> = seq.iter().map(|&(_, p)| p).collect();
                let headings = derive_headings(&positions, self.params.default_heading);
                let steps = seq
                    .iter()
                    .zip(headings)
                    .map(|(&(moment, position), heading)| Step {
                        moment,
                        position,
                        heading,
                    })
                    .collect();
                VehiclePlan { vehicle, steps }
            })
            .collect();
        VehiclePlans {
            vehicles,
            discarded: snapped.discarded,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub moment: u64,
    pub position: Vec2,
    pub heading: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehiclePlan {
    pub vehicle: NodeId,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehiclePlans {
    pub vehicles: Vec<VehiclePlan>,
    pub discarded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Moment {
    pub index: u64,
    pub time: SimTime,
    pub members: Vec<Mark>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapped {
    pub moments: Vec<Moment>,
    pub discarded: usize,
}

/// Assigns each mark to the moment `k * interval` within `window`
/// (strictly). Per vehicle and moment the closest mark wins; an earlier
/// timestamp breaks ties.
pub fn snap_to_moments(marks: &[Mark], interval: SimTime, window: SimTime) -> Snapped {
    let iv = interval.as_micros().max(1);
    let mut best: BTreeMap<(u64, NodeId), (u64, &Mark)> = BTreeMap::new();
    for m in marks {
        let t = m.time.as_micros();
        let k = (t + iv / 2) / iv;
        let delta = t.abs_diff(k * iv);
        if delta >= window.as_micros() {
            continue;
        }
        let key = (k, m.vehicle.clone());
        let better = match best.get(&key) {
            None => true,
            Some(&(d, cur)) => {
                let rank = |d: u64, x: &Mark| (d, x.time, x.position.x.to_bits(), x.position.y.to_bits());
                rank(delta, m) < rank(d, cur)
            }
        };
        if better {
            best.insert(key, (delta, m));
        }
    }
    let discarded = marks.len() - best.len();
    let last = best.keys().map(|(k, _)| *k).max();
    let mut moments: Vec<Moment> = match last {
        Some(l) => (0..=l)
            .map(|index| Moment {
                index,
                time: interval * index,
                members: Vec::new(),
            })
            .collect(),
        None => Vec::new(),
    };
    for ((k, _), (_, m)) in best {
        moments[k as usize].members.push(m.clone());
    }
    Snapped { moments, discarded }
}

/// Heading at each position: toward the next one, normalized. The last
/// position and stationary steps keep the previous heading.
pub fn derive_headings(positions: &[Vec2], default: Vec2) -> Vec<Vec2> {
    let mut out = Vec::with_capacity(positions.len());
    let mut prev = default;
    for (i, p) in positions.iter().enumerate() {
        if let Some(next) = positions.get(i + 1) {
            if let Some(h) = (*next - *p).normalized() {
                prev = h;
            }
        }
        out.push(prev);
    }
    out
}

const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Equirectangular projection of (lon, lat) degrees to meters about the centroid.
pub fn project_equirectangular(points: &[(f64, f64)]) -> Vec<Vec2> {
    if points.is_empty() {
        return Vec::new();
    }
    let n = points.len() as f64;
    let lon0 = points.iter().map(|p| p.0).sum::<f64>() / n;
    let lat0 = points.iter().map(|p| p.1).sum::<f64>() / n;
    let c = lat0.to_radians().cos();
    points
        .iter()
        .map(|&(lon, lat)| {
            Vec2::new(
                EARTH_RADIUS_M * (lon - lon0).to_radians() * c,
                EARTH_RADIUS_M * (lat - lat0).to_radians(),
            )
        })
        .collect()
}

/// Knobs for [`random_scenario`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSpec {
    pub max_nodes: usize,
    pub max_cameras: usize,
    pub max_vehicles: usize,
    pub max_moments: u64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            max_nodes: 12,
            max_cameras: 3,
            max_vehicles: 6,
            max_moments: 6,
        }
    }
}

const GRID: f64 = 100.0;
const RANDOM_RANGE: f64 = 30.0;

fn short_params() -> EngineParams {
    EngineParams {
        moment: SimTime::from_secs(10),
        window: SimTime::from_secs(4),
        ..EngineParams::default()
    }
}

/// Random connected switch/AP graph on a grid plus camera leaves.
/// Returns the builder plus AP ids and camera ids.
fn random_graph(rng: &mut ChaCha8Rng, spec: &RandomSpec) -> (TopologyBuilder, Vec<(NodeId, Vec2)>, Vec<NodeId>) {
    let n = rng.gen_range(2..=spec.max_nodes.max(2));
    let mut b = TopologyBuilder::new(RANDOM_RANGE);
    let mut aps = Vec::new();
    let mut names = Vec::new();
    let mut cells: Vec<(i32, i32)> = (0..4).flat_map(|x| (0..4).map(move |y| (x, y))).collect();
    cells.shuffle(rng);
    for (i, &(cx, cy)) in cells.iter().take(n).enumerate() {
        let pos = Vec2::new(cx as f64 * GRID, cy as f64 * GRID);
        let ap = i == 0 || rng.gen_bool(0.6);
        let id = NodeId::new(format!("{}{}", if ap { "A" } else { "S" }, i));
        b.node(id.clone(), pos.x, pos.y, if ap { Role::Ap } else { Role::Switch });
        if ap {
            aps.push((id.clone(), pos));
        }
        names.push((id, pos));
    }
    let mut edges = BTreeSet::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        edges.insert((j, i));
    }
    for _ in 0..rng.gen_range(0..=n / 3) {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i != j {
            edges.insert((i.min(j), i.max(j)));
        }
    }
    for (i, j) in edges {
        let lat = rng.gen_range(1..=3) as f64;
        b.link(names[i].0.clone(), names[j].0.clone(), lat);
    }
    let ncam = rng.gen_range(1..=spec.max_cameras.max(1));
    let mut cams = Vec::new();
    for c in 0..ncam {
        let (host, pos) = names[rng.gen_range(0..n)].clone();
        let id = NodeId::new(format!("C{c}"));
        b.node(id.clone(), pos.x + 50.0, pos.y + 10.0 + 10.0 * c as f64, Role::Camera);
        b.link(id.clone(), host, 1.0);
        cams.push(id);
    }
    (b, aps, cams)
}

/// Small random scenario: up to `max_nodes` switches and APs on a grid with
/// non-overlapping coverage, camera leaves, and vehicles hopping between APs.
/// All times are whole seconds.
pub fn random_scenario(seed: u64, spec: &RandomSpec) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b, aps, cams) = random_graph(&mut rng, spec);
    let topology = b.build().expect("random topology is well-formed");
    let params = short_params();
    let moment_s = params.moment.as_micros() / 1_000_000;
    let mut marks = Vec::new();
    let mut requests = Vec::new();
    let nveh = rng.gen_range(1..=spec.max_vehicles.max(1));
    for v in 0..nveh {
        let id = NodeId::new(format!("V{v}"));
        let start = rng.gen_range(0..spec.max_moments.max(1));
        let stay = rng.gen_range(1..=spec.max_moments.max(1));
        for m in start..start + stay {
            let (_, mut pos) = aps[rng.gen_range(0..aps.len())].clone();
            if rng.gen_bool(0.1) {
                pos = Vec2::new(pos.x + GRID / 2.0, pos.y + GRID / 2.0);
            } else {
                pos = Vec2::new(
                    pos.x + rng.gen_range(-10..=10) as f64,
                    pos.y + rng.gen_range(-10..=10) as f64,
                );
            }
            let jitter = rng.gen_range(0..=3u64);
            marks.push(Mark {
                vehicle: id.clone(),
                time: SimTime::from_secs(m * moment_s + jitter),
                position: pos,
            });
        }
        let mut wanted = cams.clone();
        wanted.shuffle(&mut rng);
        let k = rng.gen_range(1..=wanted.len().min(2));
        for (i, c) in wanted.into_iter().take(k).enumerate() {
            let t = start * moment_s + i as u64 * rng.gen_range(0..=2u64);
            requests.push(RequestSpec {
                vehicle: id.clone(),
                time: SimTime::from_secs(t),
                camera: c,
            });
        }
    }
    Scenario {
        topology,
        params,
        marks,
        requests,
    }
}

/// Random partial-overlap 1-to-N scenario: one AP, several cameras at
/// random places, vehicles parked at that AP each subscribing to a subset.
pub fn random_one_to_n(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = RandomSpec {
        max_cameras: 5,
        ..RandomSpec::default()
    };
    let (b, aps, cams) = random_graph(&mut rng, &spec);
    let topology = b.build().expect("random topology is well-formed");
    let params = short_params();
    let moment_s = params.moment.as_micros() / 1_000_000;
    let (_, pos) = aps[rng.gen_range(0..aps.len())].clone();
    let mut marks = Vec::new();
    let mut requests = Vec::new();
    for v in 0..rng.gen_range(1..=3) {
        let id = NodeId::new(format!("V{v}"));
        let start = rng.gen_range(0..3u64);
        let stay = rng.gen_range(1..=4u64);
        for m in start..start + stay {
            marks.push(Mark {
                vehicle: id.clone(),
                time: SimTime::from_secs(m * moment_s),
                position: pos,
            });
        }
        for c in &cams {
            if rng.gen_bool(0.7) {
                requests.push(RequestSpec {
                    vehicle: id.clone(),
                    time: SimTime::from_secs(start * moment_s + rng.gen_range(0..=3u64)),
                    camera: c.clone(),
                });
            }
        }
    }
    Scenario {
        topology,
        params,
        marks,
        requests,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    const TOPO: &str = "\
# two nodes
node A 0 0 ap
node E 10 0 camera   # trailing comment
link A E 1
param ap_range 20
param capacity 8
";

    fn mark(v: &str, t: f64) -> Mark {
        Mark {
            vehicle: v.into(),
            time: SimTime::from_secs_f64(t),
            position: Vec2::new(t, 0.0),
        }
    }

    #[test]
    fn parses_minimal_files() {
        let s = Scenario::parse(TOPO, "mark V 0 1 1\nrequest V 0 E\n").unwrap();
        assert_eq!(s.topology.len(), 2);
        assert_eq!(s.topology.ap_range(), 20.0);
        assert_eq!(s.params.capacity, Some(8));
        assert_eq!(s.marks.len(), 1);
        assert_eq!(s.requests[0].camera.as_str(), "E");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_topology("node A 0 0 ap\n\nlink A B 1\n").unwrap_err();
        match e {
            ScenarioError::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("`B`"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_topology("node A 0 0 ap\nnode A 1 1 ap\n"),
            Err(ScenarioError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_topology("node A 0 0 tower\n"),
            Err(ScenarioError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_topology("param bogus 3\n"),
            Err(ScenarioError::Parse { line: 1, .. })
        ));
        let (t, _) = parse_topology(TOPO).unwrap();
        assert!(matches!(
            parse_trace("mark V 0 0 0\nrequest V 1 A\n", Some(&t)),
            Err(ScenarioError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_trace("mark V 5 0 0\nmark V 1 0 0\n", None),
            Err(ScenarioError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_trace("mark V x 0 0\n", None),
            Err(ScenarioError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn snapping_window_is_strict() {
        let iv = SimTime::from_secs(120);
        let w = SimTime::from_secs(30);
        let s = snap_to_moments(&[mark("V", 125.0)], iv, w);
        assert_eq!(s.moments[1].members.len(), 1);
        let s = snap_to_moments(&[mark("V", 155.0)], iv, w);
        assert_eq!((s.moments.len(), s.discarded), (0, 1));
        let s = snap_to_moments(&[mark("V", 150.0)], iv, w);
        assert_eq!(s.discarded, 1);
        let s = snap_to_moments(&[mark("V", 90.0)], iv, w);
        assert_eq!(s.discarded, 1);
        // closest wins, then earlier timestamp
        let s = snap_to_moments(&[mark("V", 110.0), mark("V", 125.0), mark("V", 130.0)], iv, w);
        assert_eq!(s.moments[1].members[0].time, SimTime::from_secs(125));
        assert_eq!(s.discarded, 2);
        let s = snap_to_moments(&[mark("V", 115.0), mark("V", 125.0)], iv, w);
        assert_eq!(s.moments[1].members[0].time, SimTime::from_secs(115));
    }

    #[test]
    fn headings() {
        let d = Vec2::new(1.0, 0.0);
        assert_eq!(
            derive_headings(&[Vec2::new(0.0, 0.0), Vec2::new(0.0, 100.0)], d),
            vec![Vec2::new(0.0, 1.0); 2]
        );
        assert_eq!(derive_headings(&[Vec2::new(3.0, 3.0)], d), vec![d]);
        let h = derive_headings(
            &[
                Vec2::new(0.0, 0.0),
                Vec2::new(0.0, 10.0),
                Vec2::new(0.0, 10.0),
                Vec2::new(10.0, 10.0),
            ],
            d,
        );
        assert_eq!(h[1], Vec2::new(0.0, 1.0));
        assert_eq!(h[2], Vec2::new(1.0, 0.0));
        assert_eq!(h[3], Vec2::new(1.0, 0.0));
        let h = derive_headings(&[Vec2::new(0.0, 0.0), Vec2::new(0.0, 0.0)], d);
        assert_eq!(h, vec![d, d]);
    }

    #[test]
    fn projection_matches_haversine_at_small_scale() {
        let pts = [(121.47, 31.23), (121.48, 31.23), (121.47, 31.24)];
        let xy = project_equirectangular(&pts);
        let hav = |a: (f64, f64), b: (f64, f64)| {
            let (la1, la2) = (a.1.to_radians(), b.1.to_radians());
            let dla = la2 - la1;
            let dlo = (b.0 - a.0).to_radians();
            let h = (dla / 2.0).sin().powi(2) + la1.cos() * la2.cos() * (dlo / 2.0).sin().powi(2);
            2.0 * EARTH_RADIUS_M * h.sqrt().asin()
        };
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let d = xy[i].distance(xy[j]);
            let truth = hav(pts[i], pts[j]);
            assert!((d - truth).abs() / truth < 1e-3, "{d} vs {truth}");
        }
        let cx: f64 = xy.iter().map(|p| p.x).sum();
        assert!(cx.abs() < 1e-6);
    }

    #[test]
    fn random_scenarios_are_valid_and_seeded() {
        for seed in 0..30 {
            let s = random_scenario(seed, &RandomSpec::default());
            s.validate().unwrap();
            assert!(s.topology.nodes().iter().filter(|n| n.role != Role::Camera).count() <= 12);
            assert_eq!(s, random_scenario(seed, &RandomSpec::default()));
            let o = random_one_to_n(seed);
            o.validate().unwrap();
        }
    }

    proptest! {
        #[test]
        fn round_trip(seed in 0u64..500) {
            let s = random_scenario(seed, &RandomSpec::default());
            let back = Scenario::parse(&s.topology_text(), &s.trace_text()).unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn snapping_ignores_input_order(
            times in proptest::collection::vec((0u8..3, 0u32..600_000), 0..20),
            rot in 0usize..20,
        ) {
            let marks: Vec<Mark> = times
                .iter()
                .map(|&(v, t)| Mark {
                    vehicle: NodeId::new(format!("V{v}")),
                    time: SimTime::from_millis(t as u64),
                    position: Vec2::new(t as f64, v as f64),
                })
                .collect();
            let iv = SimTime::from_secs(120);
            let w = SimTime::from_secs(30);
            let a = snap_to_moments(&marks, iv, w);
            let mut shuffled = marks.clone();
            if !shuffled.is_empty() {
                let r = rot % shuffled.len();
                shuffled.rotate_left(r);
                shuffled.reverse();
            }
            let b = snap_to_moments(&shuffled, iv, w);
            prop_assert_eq!(&a, &b);
            let assigned: usize = a.moments.iter().map(|m| m.members.len()).sum();
            prop_assert_eq!(assigned + a.discarded, marks.len());
            for m in &a.moments {
                let vs: BTreeSet<&NodeId> = m.members.iter().map(|x| &x.vehicle).collect();
                prop_assert_eq!(vs.len(), m.members.len());
                for x in &m.members {
                    prop_assert!(x.time.as_micros().abs_diff(m.time.as_micros()) < w.as_micros());
                }
            }
        }
    }
}
