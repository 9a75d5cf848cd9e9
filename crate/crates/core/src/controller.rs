//! Centralized control plane.
//!
//! The controller reacts to packet-ins from vehicle requests and emits an
//! [`InstallPlan`] under one of two strategies:
//!
//! * **Baseline**: source-driven forwarding. Each switch on a camera's
//!   distribution tree gets one `(camera, *)` rule whose outputs cover every
//!   attached vehicle; APs hand frames to vehicles by unicast.
//! * **Optimized**: destination-driven forwarding. Flows toward the same AP
//!   share one `(*, ap)` rule per switch; where a camera's stream has to fork,
//!   the branching switch rewrites the destination of one copy. The AP turns
//!   the stream into the camera's multicast group, rules are pre-installed at
//!   the next AP(s) along the vehicle's predicted path, and idle timeouts
//!   shrink geometrically with the hop distance from the camera.
//!
//! The controller keeps a mirror of every rule it knows to be installed. The
//! engine feeds it install confirmations and flow-removed notifications.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::flowtable::{apply_actions, Action, Address, FieldMatch, FlowTable, Header, MatchPattern, Rule, RuleTag};
use crate::pathfind::{predict_or_shortest, PathQuery, PredictedPath};
use crate::time::SimTime;
use crate::topology::{NodeId, NodeIx, Port, Role, Topology, TopologyError, Vec2};

pub const GENERIC_PRIORITY: u16 = 1;
pub const LAST_HOP_PRIORITY: u16 = 5;
pub const REWRITE_PRIORITY: u16 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    Baseline,
    Optimized,
}

impl Strategy {
    pub fn label(self) -> &'static str {
        match self {
            Strategy::Baseline => "baseline",
            Strategy::Optimized => "optimized",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Strategy::Baseline),
            "optimized" => Ok(Strategy::Optimized),
            other => Err(format!("unknown strategy `{other}` (expected baseline or optimized)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    /// Idle timeout in seconds at the camera itself.
    pub t_base: f64,
    /// Timeout decay factor per hop away from the camera.
    pub k: f64,
    /// How many APs beyond the current one to pre-install along the predicted path.
    pub preinstall_hops: usize,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            strategy: Strategy::Optimized,
            t_base: 80.0,
            k: 2.0,
            preinstall_hops: 1,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("t_base must be positive, got {0}")]
    TBase(f64),
    #[error("k must be greater than 1, got {0}")]
    K(f64),
}

impl StrategyConfig {
    pub fn with_strategy(strategy: Strategy) -> Self {
        StrategyConfig {
            strategy,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.t_base.is_finite() && self.t_base > 0.0) {
            return Err(ConfigError::TBase(self.t_base));
        }
        if !(self.k.is_finite() && self.k > 1.0) {
            return Err(ConfigError::K(self.k));
        }
        Ok(())
    }
}

/// Engine-side knobs the controller needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerParams {
    pub request_timeout: SimTime,
    /// Floor applied to every data-rule idle timeout.
    pub min_idle_timeout: SimTime,
    /// Heading assumed for vehicles that never reported one.
    pub default_heading: Vec2,
}

impl Default for ControllerParams {
    fn default() -> Self {
        ControllerParams {
            request_timeout: SimTime::from_secs(1),
            min_idle_timeout: SimTime::from_secs(1),
            default_heading: Vec2::new(0.0, 1.0),
        }
    }
}

/// Idle timeout in seconds: `t_base * k^(-hops(switch, camera_switch))`.
pub fn timeout_for(
    topo: &Topology,
    switch: &NodeId,
    camera_switch: &NodeId,
    cfg: &StrategyConfig,
) -> Result<f64, TopologyError> {
    let d = topo.hop_distance(switch, camera_switch)?;
    Ok(cfg.t_base * cfg.k.powi(-(d as i32)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequestRecord {
    pub vehicle: NodeId,
    pub camera: NodeId,
    pub ap: NodeId,
    pub time: SimTime,
    pub predicted_path: PredictedPath,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InstallPlan {
    pub rules: Vec<(NodeId, Rule)>,
}

impl InstallPlan {
    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn extend(&mut self, other: InstallPlan) {
        self.rules.extend(other.rules);
    }

    pub fn push(&mut self, node: &NodeId, rule: Rule) {
        self.rules.push((node.clone(), rule));
    }

    /// Every switch exists and every output port exists on its switch.
    pub fn validate(&self, topo: &Topology) -> Result<(), PlanError> {
        for (node, rule) in &self.rules {
            let ix = topo
                .index_of(node)
                .map_err(|_| PlanError::UnknownSwitch(node.clone()))?;
            for p in rule.output_ports() {
                if !topo.has_port(ix, p) {
                    return Err(PlanError::MissingPort(node.clone(), p));
                }
            }
        }
        Ok(())
    }

    /// Rules destined for one switch, in plan order.
    pub fn rules_at<'a>(&'a self, node: &'a NodeId) -> impl Iterator<Item = &'a Rule> + 'a {
        self.rules.iter().filter(move |(n, _)| n == node).map(|(_, r)| r)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("plan references unknown switch `{0}`")]
    UnknownSwitch(NodeId),
    #[error("switch `{0}` has no port {1}")]
    MissingPort(NodeId, Port),
    #[error("no link between `{0}` and `{1}`")]
    MissingLink(NodeId, NodeId),
    #[error("`{0}` is not an access point")]
    NotAp(NodeId),
    #[error("`{0}` is not a camera")]
    NotCamera(NodeId),
    #[error("empty path")]
    EmptyPath,
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("camera `{camera}` unreachable from `{from}`")]
    Unreachable { from: NodeId, camera: NodeId },
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// The controller's copy of every switch's flow table.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleView {
    tables: Vec<FlowTable>,
}

impl RuleView {
    pub fn new(topo: &Topology) -> Self {
        RuleView {
            tables: vec![FlowTable::new(None); topo.len()],
        }
    }

    pub fn table(&self, ix: NodeIx) -> &FlowTable {
        &self.tables[ix]
    }

    pub fn record(&mut self, ix: NodeIx, rule: Rule, now: SimTime) {
        // the mirror is unbounded; capacity is enforced by the real switch
        let _ = self.tables[ix].install(rule, now);
    }

    pub fn forget(&mut self, ix: NodeIx, rule: &Rule) {
        self.tables[ix].remove(&rule.pattern, rule.priority);
    }

    /// Applies a whole plan, as if every rule were accepted.
    pub fn apply(&mut self, topo: &Topology, plan: &InstallPlan, now: SimTime) -> Result<(), TopologyError> {
        for (node, rule) in &plan.rules {
            let ix = topo.index_of(node)?;
            self.record(ix, rule.clone(), now);
        }
        Ok(())
    }
}

/// Where a copy goes after leaving a switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NextHop {
    Node(NodeIx),
    Wireless,
}

/// How one camera stream is handled at one switch.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamHop {
    pub header: Header,
    pub rule: Option<Rule>,
    pub emissions: Vec<(NextHop, Header)>,
}

/// Follows a camera stream through the rule view, from the camera outward.
pub fn trace_stream(topo: &Topology, view: &RuleView, origin: NodeIx, header: &Header) -> BTreeMap<NodeIx, StreamHop> {
    let mut hops = BTreeMap::new();
    let mut queue = VecDeque::from([(origin, header.clone())]);
    let mut seen = HashSet::new();
    while let Some((n, h)) = queue.pop_front() {
        if !seen.insert((n, h.clone())) {
            continue;
        }
        let rule = view.table(n).peek(&h).cloned();
        let mut emissions = Vec::new();
        if let Some(r) = &rule {
            for e in apply_actions(r, &h).emissions {
                if e.port.is_wireless() {
                    emissions.push((NextHop::Wireless, e.header));
                } else if let Some((peer, _)) = topo.peer(n, e.port) {
                    queue.push_back((peer, e.header.clone()));
                    emissions.push((NextHop::Node(peer), e.header));
                }
            }
        }
        hops.entry(n).or_insert(StreamHop {
            header: h,
            rule,
            emissions,
        });
    }
    hops
}

/// Shared inputs of the plan builders.
#[derive(Debug, Clone, Copy)]
pub struct InstallContext<'a> {
    pub topo: &'a Topology,
    pub cfg: &'a StrategyConfig,
    pub params: &'a ControllerParams,
}

impl InstallContext<'_> {
    fn data_timeout(&self, node: NodeIx, camera: NodeIx) -> SimTime {
        let secs = match self.cfg.strategy {
            Strategy::Baseline => self.cfg.t_base,
            Strategy::Optimized => {
                let d = self.topo.hop_distance_ix(node, camera).unwrap_or(0);
                self.cfg.t_base * self.cfg.k.powi(-(d as i32))
            }
        };
        SimTime::from_secs_f64(secs).max(self.params.min_idle_timeout)
    }

    fn port(&self, from: NodeIx, to: NodeIx) -> Result<Port, PlanError> {
        self.topo
            .port_towards(from, to)
            .ok_or_else(|| PlanError::MissingLink(self.topo.node_at(from).id.clone(), self.topo.node_at(to).id.clone()))
    }

    fn ixs(&self, path: &[NodeId]) -> Result<Vec<NodeIx>, PlanError> {
        path.iter()
            .map(|n| self.topo.index_of(n).map_err(PlanError::from))
            .collect()
    }
}

/// Request-direction rules `(vehicle, camera)` from the vehicle's AP up to
/// (not including) the camera. Same shape under both strategies.
pub fn request_rules(
    ctx: &InstallContext<'_>,
    vehicle: &NodeId,
    camera: &NodeId,
    ap: &NodeId,
) -> Result<InstallPlan, PlanError> {
    let path = ctx.ixs(&ctx.topo.shortest_path(ap, camera)?)?;
    let h = Header::new(Address::Unicast(vehicle.clone()), Address::Unicast(camera.clone()));
    let mut plan = InstallPlan::default();
    for w in path.windows(2) {
        let rule = Rule::new(
            MatchPattern::exact(&h),
            GENERIC_PRIORITY,
            vec![Action::Output(ctx.port(w[0], w[1])?)],
            ctx.params.request_timeout,
            RuleTag::Request,
        );
        plan.push(&ctx.topo.node_at(w[0]).id, rule);
    }
    Ok(plan)
}

/// Source-driven installation: the union of canonical paths from the camera
/// to every attached AP, one `(camera, *)` rule per switch on that tree.
pub fn baseline_install(
    ctx: &InstallContext<'_>,
    camera: &NodeId,
    attachments: &BTreeMap<NodeId, NodeId>,
) -> Result<InstallPlan, PlanError> {
    let cam = ctx.topo.index_of(camera)?;
    let mut tree: BTreeMap<NodeIx, BTreeSet<Port>> = BTreeMap::new();
    for ap in attachments.values() {
        let ap_ix = ctx.topo.index_of(ap)?;
        if ctx.topo.node_at(ap_ix).role != Role::Ap {
            return Err(PlanError::NotAp(ap.clone()));
        }
        let path = ctx
            .topo
            .shortest_path_ix(cam, ap_ix)
            .ok_or_else(|| TopologyError::Unreachable(camera.clone(), ap.clone()))?;
        for w in path.windows(2) {
            tree.entry(w[0]).or_default().insert(ctx.port(w[0], w[1])?);
        }
        tree.entry(ap_ix).or_default().insert(Port::WIRELESS);
    }
    let src = Address::Unicast(camera.clone());
    let mut plan = InstallPlan::default();
    for (node, ports) in tree {
        let rule = Rule::new(
            MatchPattern::from_src(src.clone()),
            GENERIC_PRIORITY,
            ports.into_iter().map(Action::Output).collect(),
            ctx.data_timeout(node, cam),
            RuleTag::Data,
        );
        plan.push(&ctx.topo.node_at(node).id, rule);
    }
    Ok(plan)
}

/// Last-hop rule at an AP: turn the arriving stream into the camera's
/// multicast group on the wireless port.
pub fn last_hop_multicast(
    topo: &Topology,
    ap: &NodeId,
    camera: &NodeId,
    arriving: &Header,
    idle_timeout: SimTime,
) -> Result<Rule, PlanError> {
    if topo.node(ap)?.role != Role::Ap {
        return Err(PlanError::NotAp(ap.clone()));
    }
    if topo.node(camera)?.role != Role::Camera {
        return Err(PlanError::NotCamera(camera.clone()));
    }
    Ok(Rule::new(
        MatchPattern::exact(arriving),
        LAST_HOP_PRIORITY,
        vec![
            Action::SetDst(Address::Multicast(camera.clone())),
            Action::Output(Port::WIRELESS),
        ],
        idle_timeout,
        RuleTag::Data,
    ))
}

/// Destination-driven installation of one data flow from `camera` to the AP
/// at the end of `path`, merging with what the camera's stream already does.
///
/// `stream` is the header the camera emits. Walking the path: where the
/// stream already reaches the next hop nothing new is needed (the existing
/// rule is re-sent to refresh its idle timer); where it reaches the switch
/// but leaves elsewhere, that switch is a branch point and gets a rule that
/// keeps the old outputs, rewrites the destination and forwards toward the
/// new hop; where the stream does not arrive at all, a shared `(*, ap)` rule
/// is used. At the AP itself the new hop is the wireless multicast.
pub fn optimized_install(
    ctx: &InstallContext<'_>,
    camera: &NodeId,
    path: &[NodeId],
    existing: &RuleView,
    stream: &Header,
) -> Result<InstallPlan, PlanError> {
    let ixs = ctx.ixs(path)?;
    let (&cam, &ap) = match (ixs.first(), ixs.last()) {
        (Some(c), Some(a)) => (c, a),
        _ => return Err(PlanError::EmptyPath),
    };
    if ctx.topo.node_at(cam).id != *camera {
        return Err(PlanError::NotCamera(ctx.topo.node_at(cam).id.clone()));
    }
    if ctx.topo.node_at(ap).role != Role::Ap {
        return Err(PlanError::NotAp(ctx.topo.node_at(ap).id.clone()));
    }
    let src = Address::Unicast(camera.clone());
    let dest = Address::Unicast(ctx.topo.node_at(ap).id.clone());
    let group = Address::Multicast(camera.clone());

    let spread = trace_stream(ctx.topo, existing, cam, stream);
    let mut plan = InstallPlan::default();
    let mut incoming = stream.clone();

    for (i, &n) in ixs.iter().enumerate() {
        let node_id = &ctx.topo.node_at(n).id;
        let terminal = i + 1 == ixs.len();
        let (next, port) = if terminal {
            (NextHop::Wireless, Port::WIRELESS)
        } else {
            (NextHop::Node(ixs[i + 1]), ctx.port(n, ixs[i + 1])?)
        };
        let new_dst = if terminal { group.clone() } else { dest.clone() };
        let timeout = ctx.data_timeout(n, cam);

        let hop = spread.get(&n).filter(|h| h.header == incoming);
        match hop.and_then(|h| h.rule.as_ref().map(|r| (h, r))) {
            Some((hop, rule)) => {
                let already = hop
                    .emissions
                    .iter()
                    .find(|(nh, h)| *nh == next && (!terminal || h.dst == group));
                if let Some((_, out)) = already {
                    plan.push(node_id, rule.clone());
                    incoming = out.clone();
                    continue;
                }
                let mut actions = rule.actions.clone();
                actions.push(Action::SetDst(new_dst));
                actions.push(Action::Output(port));
                let branch = if rule.pattern.src == FieldMatch::Exact(src.clone()) {
                    Rule::new(
                        rule.pattern.clone(),
                        rule.priority,
                        actions,
                        rule.idle_timeout,
                        RuleTag::Data,
                    )
                } else {
                    Rule::new(
                        MatchPattern::exact(&incoming),
                        REWRITE_PRIORITY,
                        actions,
                        timeout,
                        RuleTag::Data,
                    )
                };
                plan.push(node_id, branch);
                incoming = Header::new(src.clone(), dest.clone());
            }
            None if terminal => {
                plan.push(
                    node_id,
                    last_hop_multicast(ctx.topo, node_id, camera, &incoming, timeout)?,
                );
            }
            None if incoming.dst == dest => {
                let rule = Rule::new(
                    MatchPattern::to_dst(dest.clone()),
                    GENERIC_PRIORITY,
                    vec![Action::Output(port)],
                    timeout,
                    RuleTag::Data,
                );
                plan.push(node_id, rule);
            }
            None => {
                // stream arrives addressed elsewhere with nothing to forward it
                let rule = Rule::new(
                    MatchPattern::exact(&incoming),
                    REWRITE_PRIORITY,
                    vec![Action::SetDst(dest.clone()), Action::Output(port)],
                    timeout,
                    RuleTag::Data,
                );
                plan.push(node_id, rule);
                incoming = Header::new(src.clone(), dest.clone());
            }
        }
    }
    Ok(plan)
}

/// Data-return installation for the requesting AP plus the next
/// `preinstall_hops` APs along the vehicle's predicted path.
pub fn preinstall_along_prediction(
    ctx: &InstallContext<'_>,
    rec: &RequestRecord,
    existing: &RuleView,
    stream: &Header,
    now: SimTime,
) -> Result<InstallPlan, PlanError> {
    let mut targets = vec![rec.ap.clone()];
    for n in rec.predicted_path.nodes().iter().skip(1) {
        if targets.len() > ctx.cfg.preinstall_hops {
            break;
        }
        if ctx.topo.node(n)?.role == Role::Ap && !targets.contains(n) {
            targets.push(n.clone());
        }
    }
    let mut scratch = existing.clone();
    let mut plan = InstallPlan::default();
    for ap in &targets {
        let path = ctx.topo.shortest_path(&rec.camera, ap)?;
        let part = optimized_install(ctx, &rec.camera, &path, &scratch, stream)?;
        scratch.apply(ctx.topo, &part, now)?;
        plan.extend(part);
    }
    Ok(plan)
}

/// Control plane of one simulation instance.
#[derive(Debug, Clone)]
pub struct Controller {
    topo: Arc<Topology>,
    cfg: StrategyConfig,
    params: ControllerParams,
    view: RuleView,
    headings: BTreeMap<NodeId, Vec2>,
    records: BTreeMap<(NodeId, NodeId), RequestRecord>,
    attachments: BTreeMap<NodeId, BTreeMap<NodeId, NodeId>>,
    streams: BTreeMap<NodeId, Header>,
}

impl Controller {
    pub fn new(topo: Arc<Topology>, cfg: StrategyConfig, params: ControllerParams) -> Self {
        let view = RuleView::new(&topo);
        Controller {
            topo,
            cfg,
            params,
            view,
            headings: BTreeMap::new(),
            records: BTreeMap::new(),
            attachments: BTreeMap::new(),
            streams: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &StrategyConfig {
        &self.cfg
    }

    pub fn view(&self) -> &RuleView {
        &self.view
    }

    pub fn records(&self) -> impl Iterator<Item = &RequestRecord> {
        self.records.values()
    }

    fn ctx(&self) -> InstallContext<'_> {
        InstallContext {
            topo: &self.topo,
            cfg: &self.cfg,
            params: &self.params,
        }
    }

    /// Vehicle status upload (direction of travel).
    pub fn report_heading(&mut self, vehicle: &NodeId, heading: Vec2) {
        if !heading.is_zero() {
            self.headings.insert(vehicle.clone(), heading);
        }
    }

    /// The switch accepted `rule`.
    pub fn installed(&mut self, node: NodeIx, rule: Rule, now: SimTime) {
        self.view.record(node, rule, now);
    }

    /// Flow-removed notification.
    pub fn removed(&mut self, node: NodeIx, rule: &Rule) {
        self.view.forget(node, rule);
    }

    /// Recognizes `(vehicle, camera)` requests; anything else is unknown.
    fn classify(&self, h: &Header) -> Option<(NodeId, NodeId)> {
        let (Address::Unicast(v), Address::Unicast(c)) = (&h.src, &h.dst) else {
            return None;
        };
        if self.topo.contains(v) {
            return None;
        }
        let cam = self.topo.node(c).ok()?;
        (cam.role == Role::Camera).then(|| (v.clone(), c.clone()))
    }

    pub fn handle_packet_in(&mut self, h: &Header, at: &NodeId, now: SimTime) -> Result<InstallPlan, ControllerError> {
        let Some((vehicle, camera)) = self.classify(h) else {
            return Ok(InstallPlan::default());
        };
        if self.topo.node(at)?.role != Role::Ap {
            return Ok(InstallPlan::default());
        }
        if self.topo.shortest_path(at, &camera).is_err() {
            return Err(ControllerError::Unreachable {
                from: at.clone(),
                camera,
            });
        }
        let heading = self
            .headings
            .get(&vehicle)
            .copied()
            .unwrap_or(self.params.default_heading);
        let predicted = predict_or_shortest(&PathQuery::new(at.clone(), camera.clone(), heading), &self.topo)?;
        let rec = RequestRecord {
            vehicle: vehicle.clone(),
            camera: camera.clone(),
            ap: at.clone(),
            time: now,
            predicted_path: predicted,
        };

        let mut plan = request_rules(&self.ctx(), &vehicle, &camera, at)?;
        match self.cfg.strategy {
            Strategy::Baseline => {
                self.attachments
                    .entry(camera.clone())
                    .or_default()
                    .insert(vehicle.clone(), at.clone());
                plan.extend(baseline_install(&self.ctx(), &camera, &self.attachments[&camera])?);
            }
            Strategy::Optimized => {
                let stream = self
                    .streams
                    .entry(camera.clone())
                    .or_insert_with(|| Header::new(Address::Unicast(camera.clone()), Address::Unicast(at.clone())))
                    .clone();
                plan.extend(preinstall_along_prediction(
                    &self.ctx(),
                    &rec,
                    &self.view,
                    &stream,
                    now,
                )?);
            }
        }
        self.records.insert((vehicle, camera), rec);
        Ok(plan)
    }

    /// Headers a camera puts on the wire for one emission.
    pub fn emission_headers<'a>(
        &self,
        camera: &NodeId,
        listeners: impl IntoIterator<Item = &'a NodeId>,
    ) -> Vec<Header> {
        let src = Address::Unicast(camera.clone());
        match self.cfg.strategy {
            Strategy::Baseline => listeners
                .into_iter()
                .map(|v| Header::new(src.clone(), Address::Unicast(v.clone())))
                .collect(),
            Strategy::Optimized => self.streams.get(camera).cloned().into_iter().collect(),
        }
    }

    /// The vehicle left the area; baseline trees are rebuilt without it.
    pub fn vehicle_departed(&mut self, vehicle: &NodeId) -> Result<InstallPlan, ControllerError> {
        self.records.retain(|(v, _), _| v != vehicle);
        self.headings.remove(vehicle);
        let mut plan = InstallPlan::default();
        if self.cfg.strategy == Strategy::Baseline {
            let cams: Vec<NodeId> = self
                .attachments
                .iter()
                .filter(|(_, a)| a.contains_key(vehicle))
                .map(|(c, _)| c.clone())
                .collect();
            for c in cams {
                let att = self.attachments.get_mut(&c).expect("present");
                att.remove(vehicle);
                if att.is_empty() {
                    self.attachments.remove(&c);
                } else {
                    plan.extend(baseline_install(&self.ctx(), &c, &self.attachments[&c])?);
                }
            }
        }
        Ok(plan)
    }

    /// The camera stopped sending; the next request starts a fresh stream.
    pub fn stream_stopped(&mut self, camera: &NodeId) {
        self.streams.remove(camera);
        self.attachments.remove(camera);
    }
}
