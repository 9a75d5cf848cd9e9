//! Discrete-event simulation of one strategy over one scenario.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};
use std::sync::Arc;

use thiserror::Error;

use crate::controller::{
    ConfigError, Controller, ControllerError, ControllerParams, InstallPlan, PlanError, Strategy, StrategyConfig,
};
use crate::flowtable::{apply_actions, Address, FlowTable, Header, InstallOutcome, RuleTag, TableError};
use crate::metrics::{DeliveryRecord, EventKind, MetricsReport, MomentSample, PayloadId, RuleSample};
use crate::scenario::Scenario;
use crate::time::SimTime;
use crate::topology::{NodeId, NodeIx, Role, Topology, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineParams {
    /// Camera emission period.
    pub period: SimTime,
    /// Offset of the emission grid from whole periods.
    pub camera_phase: SimTime,
    pub controller_latency: SimTime,
    /// Added to a copy for every destination rewrite before its output.
    pub rewrite_cost: SimTime,
    pub wireless_latency: SimTime,
    pub request_timeout: SimTime,
    pub min_idle_timeout: SimTime,
    pub moment: SimTime,
    pub window: SimTime,
    /// Extra moments simulated after the last departure.
    pub tail_moments: u64,
    pub default_heading: Vec2,
    pub capacity: Option<usize>,
}

impl Default for EngineParams {
    fn default() -> Self {
        EngineParams {
            period: SimTime::from_millis(100),
            camera_phase: SimTime::from_millis(50),
            controller_latency: SimTime::from_millis(5),
            rewrite_cost: SimTime::from_micros(10),
            wireless_latency: SimTime::ZERO,
            request_timeout: SimTime::from_secs(1),
            min_idle_timeout: SimTime::from_secs(1),
            moment: SimTime::from_secs(120),
            window: SimTime::from_secs(30),
            tail_moments: 1,
            default_heading: Vec2::new(0.0, 1.0),
            capacity: None,
        }
    }
}

impl EngineParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.period == SimTime::ZERO {
            return Err("period_ms must be positive".into());
        }
        if self.camera_phase >= self.period {
            return Err("camera_phase_ms must be below period_ms".into());
        }
        if self.moment == SimTime::ZERO {
            return Err("moment_s must be positive".into());
        }
        if self.window == SimTime::ZERO || self.window * 2 > self.moment {
            return Err("window_s must be positive and at most half of moment_s".into());
        }
        if !self.default_heading.is_finite() || self.default_heading.is_zero() {
            return Err("default heading must be a non-zero vector".into());
        }
        if self.capacity == Some(0) {
            return Err("capacity must be positive".into());
        }
        Ok(())
    }

    pub fn controller_params(&self) -> ControllerParams {
        ControllerParams {
            request_timeout: self.request_timeout,
            min_idle_timeout: self.min_idle_timeout,
            default_heading: self.default_heading,
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid strategy configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("invalid engine parameters: {0}")]
    Params(String),
    #[error("controller failure: {0}")]
    Controller(#[from] ControllerError),
    #[error("rejected install plan: {0}")]
    Plan(#[from] PlanError),
    #[error("rule rejected at `{0}`: {1}")]
    Install(NodeId, TableError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub id: NodeId,
    pub position: Vec2,
    pub heading: Vec2,
    pub present: bool,
    pub departed: bool,
    pub ap: Option<NodeIx>,
    /// Camera -> time of the vehicle's first request for it.
    pub subscriptions: BTreeMap<NodeId, SimTime>,
    deferred: Vec<NodeId>,
    received: HashSet<PayloadId>,
}

impl VehicleState {
    fn new(id: NodeId) -> Self {
        VehicleState {
            id,
            position: Vec2::default(),
            heading: Vec2::default(),
            present: false,
            departed: false,
            ap: None,
            subscriptions: BTreeMap::new(),
            deferred: Vec::new(),
            received: HashSet::new(),
        }
    }

    /// Whether a payload emitted at `emit` from `camera` is wanted.
    pub fn accepts(&self, camera: &NodeId, emit: SimTime) -> bool {
        self.present && self.subscriptions.get(camera).is_some_and(|&t| emit > t)
    }
}

/// Read-only snapshot handed to observers.
pub struct NetView<'a> {
    pub topology: &'a Topology,
    pub tables: &'a [FlowTable],
    pub vehicles: &'a [VehicleState],
    pub now: SimTime,
    pub strategy: Strategy,
}

pub trait Observer {
    /// A camera is about to put `headers` on the wire for `payload`.
    fn on_emit(&mut self, _view: &NetView<'_>, _payload: &PayloadId, _headers: &[Header]) {}
    /// A moment boundary was sampled.
    fn on_moment(&mut self, _view: &NetView<'_>, _moment: u64) {}
}

pub struct NoopObserver;

impl Observer for NoopObserver {}

#[derive(Debug, Clone)]
struct Packet {
    header: Header,
    payload: Option<(PayloadId, SimTime)>,
}

#[derive(Debug, Clone)]
enum Ev {
    MomentBoundary(u64),
    VehicleDepart(usize),
    VehicleMove {
        vehicle: usize,
        position: Vec2,
        heading: Vec2,
    },
    RequestEmit {
        vehicle: usize,
        camera: NodeId,
    },
    ControllerReply {
        node: NodeIx,
        header: Header,
    },
    PacketArrival {
        node: NodeIx,
        packet: Packet,
    },
    CameraTick(u64),
}

impl Ev {
    fn rank(&self) -> u8 {
        match self {
            Ev::MomentBoundary(_) => 0,
            Ev::VehicleDepart(_) => 1,
            Ev::VehicleMove { .. } => 2,
            Ev::RequestEmit { .. } => 3,
            Ev::ControllerReply { .. } => 4,
            Ev::PacketArrival { .. } => 5,
            Ev::CameraTick(_) => 6,
        }
    }
}

struct Queued {
    time: SimTime,
    rank: u8,
    seq: u64,
    ev: Ev,
}

impl Queued {
    fn key(&self) -> (SimTime, u8, u64) {
        (self.time, self.rank, self.seq)
    }
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Queued {}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap
        other.key().cmp(&self.key())
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Default)]
struct CameraState {
    open: bool,
    confirmed: BTreeSet<usize>,
}

struct Sim<'a> {
    topo: Arc<Topology>,
    params: EngineParams,
    strategy: Strategy,
    tables: Vec<FlowTable>,
    controller: Controller,
    vehicles: Vec<VehicleState>,
    vehicle_ix: BTreeMap<NodeId, usize>,
    cameras: BTreeMap<NodeIx, CameraState>,
    /// Last multicast frame per (AP, camera).
    heard: HashMap<(NodeIx, NodeIx), SimTime>,
    pending: HashMap<(NodeIx, Header), Vec<Packet>>,
    queue: BinaryHeap<Queued>,
    seq: u64,
    now: SimTime,
    horizon: SimTime,
    report: MetricsReport,
    observer: &'a mut dyn Observer,
}

pub fn run(scenario: &Scenario, cfg: &StrategyConfig) -> Result<MetricsReport, EngineError> {
    run_observed(scenario, cfg, &mut NoopObserver)
}

pub fn run_observed(
    scenario: &Scenario,
    cfg: &StrategyConfig,
    observer: &mut dyn Observer,
) -> Result<MetricsReport, EngineError> {
    cfg.validate()?;
    scenario.params.validate().map_err(EngineError::Params)?;
    let mut sim = Sim::new(scenario, cfg, observer);
    sim.schedule_scenario(scenario);
    while let Some(q) = sim.queue.pop() {
        sim.now = q.time;
        sim.report.counters.events_processed += 1;
        sim.dispatch(q.ev)?;
    }
    Ok(sim.report)
}

impl<'a> Sim<'a> {
    fn new(scenario: &Scenario, cfg: &StrategyConfig, observer: &'a mut dyn Observer) -> Self {
        let topo = Arc::new(scenario.topology.clone());
        let params = scenario.params;
        let tables = vec![FlowTable::new(params.capacity); topo.len()];
        let controller = Controller::new(topo.clone(), *cfg, params.controller_params());
        let cameras = (0..topo.len())
            .filter(|&i| topo.node_at(i).role == Role::Camera)
            .map(|i| (i, CameraState::default()))
            .collect();
        Sim {
            topo,
            params,
            strategy: cfg.strategy,
            tables,
            controller,
            vehicles: Vec::new(),
            vehicle_ix: BTreeMap::new(),
            cameras,
            heard: HashMap::new(),
            pending: HashMap::new(),
            queue: BinaryHeap::new(),
            seq: 0,
            now: SimTime::ZERO,
            horizon: SimTime::ZERO,
            report: MetricsReport::new(cfg.strategy),
            observer,
        }
    }

    fn schedule(&mut self, time: SimTime, ev: Ev) {
        self.seq += 1;
        self.queue.push(Queued {
            time,
            rank: ev.rank(),
            seq: self.seq,
            ev,
        });
    }

    fn schedule_scenario(&mut self, scenario: &Scenario) {
        let interval = self.params.moment;
        let plans = scenario.vehicle_plans();
        let mut last_moment = 0u64;
        for plan in &plans.vehicles {
            let ix = self.vehicles.len();
            self.vehicle_ix.insert(plan.vehicle.clone(), ix);
            self.vehicles.push(VehicleState::new(plan.vehicle.clone()));
            for step in &plan.steps {
                self.schedule(
                    interval * step.moment,
                    Ev::VehicleMove {
                        vehicle: ix,
                        position: step.position,
                        heading: step.heading,
                    },
                );
            }
            if let Some(last) = plan.steps.last() {
                self.schedule(interval * (last.moment + 1), Ev::VehicleDepart(ix));
                last_moment = last_moment.max(last.moment + 1);
            }
        }
        for r in &scenario.requests {
            if let Some(&ix) = self.vehicle_ix.get(&r.vehicle) {
                self.schedule(
                    r.time,
                    Ev::RequestEmit {
                        vehicle: ix,
                        camera: r.camera.clone(),
                    },
                );
            }
        }
        let horizon_moment = if plans.vehicles.is_empty() {
            0
        } else {
            last_moment + self.params.tail_moments
        };
        self.horizon = interval * horizon_moment;
        for m in 0..=horizon_moment {
            self.schedule(interval * m, Ev::MomentBoundary(m));
        }
        if self.params.camera_phase < self.horizon {
            self.schedule(self.params.camera_phase, Ev::CameraTick(0));
        }
    }

    fn dispatch(&mut self, ev: Ev) -> Result<(), EngineError> {
        match ev {
            Ev::MomentBoundary(m) => self.moment_boundary(m),
            Ev::VehicleDepart(v) => self.depart(v)?,
            Ev::VehicleMove {
                vehicle,
                position,
                heading,
            } => self.vehicle_move(vehicle, position, heading),
            Ev::RequestEmit { vehicle, camera } => self.request_emit(vehicle, camera),
            Ev::ControllerReply { node, header } => self.controller_reply(node, header)?,
            Ev::PacketArrival { node, packet } => self.process(node, packet, true),
            Ev::CameraTick(k) => self.camera_tick(k),
        }
        Ok(())
    }

    fn sweep(&mut self) {
        for ix in 0..self.tables.len() {
            for rule in self.tables[ix].expire_idle(self.now) {
                self.report.counters.expired += 1;
                self.controller.removed(ix, &rule);
                let detail = format!("{} {}", self.topo.node_at(ix).id, rule.pattern);
                self.report.log(self.now, EventKind::Expire, detail);
            }
        }
    }

    fn moment_boundary(&mut self, m: u64) {
        self.sweep();
        for (ix, table) in self.tables.iter().enumerate() {
            self.report.rule_counts.push(RuleSample {
                moment: m,
                switch: self.topo.node_at(ix).id.clone(),
                total: table.len(),
                data: table.count_tagged(RuleTag::Data),
            });
        }
        let present = self.vehicles.iter().filter(|v| v.present).count();
        let online = self.vehicles.iter().filter(|v| v.present && v.ap.is_some()).count();
        self.report.moments.push(MomentSample {
            moment: m,
            time: self.now,
            vehicles_present: present,
            vehicles_online: online,
            inserted_so_far: self.report.counters.inserted,
            expired_so_far: self.report.counters.expired,
        });
        let view = NetView {
            topology: &self.topo,
            tables: &self.tables,
            vehicles: &self.vehicles,
            now: self.now,
            strategy: self.strategy,
        };
        self.observer.on_moment(&view, m);
    }

    fn vehicle_move(&mut self, vix: usize, position: Vec2, heading: Vec2) {
        let ap = self.topo.nearest_ap(position);
        let v = &mut self.vehicles[vix];
        if v.departed {
            return;
        }
        let appearing = !v.present;
        v.position = position;
        v.heading = heading;
        v.present = true;
        let changed = appearing || v.ap != ap;
        v.ap = ap;
        let id = v.id.clone();
        self.controller.report_heading(&id, heading);
        if appearing {
            self.report.log(self.now, EventKind::Appear, id.as_str());
        } else if changed {
            let to = ap.map_or("none".to_string(), |a| self.topo.node_at(a).id.to_string());
            self.report.log(self.now, EventKind::Handoff, format!("{id} {to}"));
        }
        if changed && ap.is_some() {
            let cams: Vec<NodeId> = self.vehicles[vix].subscriptions.keys().cloned().collect();
            for c in cams {
                self.send_request(vix, &c);
            }
        }
        if appearing {
            let deferred = std::mem::take(&mut self.vehicles[vix].deferred);
            for c in deferred {
                self.subscribe(vix, c);
            }
        }
    }

    fn request_emit(&mut self, vix: usize, camera: NodeId) {
        let v = &mut self.vehicles[vix];
        if v.departed {
            return;
        }
        if !v.present {
            if !v.deferred.contains(&camera) {
                v.deferred.push(camera);
            }
            return;
        }
        self.subscribe(vix, camera);
    }

    fn subscribe(&mut self, vix: usize, camera: NodeId) {
        let now = self.now;
        let v = &mut self.vehicles[vix];
        v.subscriptions.entry(camera.clone()).or_insert(now);
        let detail = format!("{} {}", v.id, camera);
        self.report.log(now, EventKind::Request, detail);
        self.send_request(vix, &camera);
    }

    fn send_request(&mut self, vix: usize, camera: &NodeId) {
        let Some(ap) = self.vehicles[vix].ap else {
            return;
        };
        let Ok(cam) = self.topo.index_of(camera) else {
            return;
        };
        if self.strategy == Strategy::Optimized {
            let open = self.cameras.get(&cam).is_some_and(|c| c.open);
            let hears = self
                .heard
                .get(&(ap, cam))
                .is_some_and(|&t| self.now.saturating_sub(t) <= self.params.period);
            if open && hears {
                self.report.counters.local_joins += 1;
                if let Some(c) = self.cameras.get_mut(&cam) {
                    c.confirmed.insert(vix);
                }
                let detail = format!("{} {} {}", self.vehicles[vix].id, camera, self.topo.node_at(ap).id);
                self.report.log(self.now, EventKind::Join, detail);
                return;
            }
        }
        self.report.counters.requests_sent += 1;
        let header = Header::new(
            Address::Unicast(self.vehicles[vix].id.clone()),
            Address::Unicast(camera.clone()),
        );
        self.process(ap, Packet { header, payload: None }, true);
    }

    fn process(&mut self, node: NodeIx, packet: Packet, allow_packet_in: bool) {
        if packet.payload.is_none() && self.consume_request(node, &packet.header) {
            return;
        }
        let hit = self.tables[node].lookup(&packet.header, self.now).cloned();
        let Some(rule) = hit else {
            if allow_packet_in {
                self.packet_in(node, packet);
            } else {
                self.drop_packet(node, &packet.header);
            }
            return;
        };
        let out = apply_actions(&rule, &packet.header);
        if out.emissions.is_empty() {
            self.drop_packet(node, &packet.header);
        }
        for e in out.emissions {
            // a copy pays the rewrite cost once if this switch changed its header
            let modified = e.rewrites_before > 0 && e.header != packet.header;
            let at = if modified {
                self.now + self.params.rewrite_cost
            } else {
                self.now
            };
            if e.port.is_wireless() {
                self.wireless(
                    node,
                    &e.header,
                    packet.payload.as_ref(),
                    at + self.params.wireless_latency,
                );
            } else if let Some((peer, latency)) = self.topo.peer(node, e.port) {
                let next = Packet {
                    header: e.header,
                    payload: packet.payload.clone(),
                };
                self.schedule(
                    at + SimTime::from_millis_f64(latency),
                    Ev::PacketArrival {
                        node: peer,
                        packet: next,
                    },
                );
            } else {
                self.drop_packet(node, &e.header);
            }
        }
    }

    fn drop_packet(&mut self, node: NodeIx, header: &Header) {
        self.report.counters.drops += 1;
        let detail = format!("{} {}", self.topo.node_at(node).id, header);
        self.report.log(self.now, EventKind::Drop, detail);
    }

    /// A request reaching its camera opens (or joins) the stream.
    fn consume_request(&mut self, node: NodeIx, h: &Header) -> bool {
        let id = &self.topo.node_at(node).id;
        if h.dst != Address::Unicast(id.clone()) {
            return false;
        }
        let Some(state) = self.cameras.get_mut(&node) else {
            return false;
        };
        if let Some(&vix) = self.vehicle_ix.get(h.src.node()) {
            state.confirmed.insert(vix);
        }
        if !state.open {
            state.open = true;
            self.report.log(self.now, EventKind::StreamOpen, id.as_str());
        }
        true
    }

    fn packet_in(&mut self, node: NodeIx, packet: Packet) {
        let key = (node, packet.header.clone());
        if let Some(buf) = self.pending.get_mut(&key) {
            buf.push(packet);
            return;
        }
        self.report.counters.packet_ins += 1;
        self.report.packet_in_times.push(self.now);
        let detail = format!("{} {}", self.topo.node_at(node).id, packet.header);
        self.report.log(self.now, EventKind::PacketIn, detail);
        let header = packet.header.clone();
        self.pending.insert(key, vec![packet]);
        self.schedule(
            self.now + self.params.controller_latency,
            Ev::ControllerReply { node, header },
        );
    }

    fn controller_reply(&mut self, node: NodeIx, header: Header) -> Result<(), EngineError> {
        self.sweep();
        let at = self.topo.node_at(node).id.clone();
        match self.controller.handle_packet_in(&header, &at, self.now) {
            Ok(plan) => self.apply_plan(&plan)?,
            Err(ControllerError::Unreachable { from, camera }) => {
                self.report
                    .log(self.now, EventKind::Drop, format!("{camera} unreachable from {from}"));
            }
            Err(e) => return Err(e.into()),
        }
        for p in self.pending.remove(&(node, header)).unwrap_or_default() {
            self.process(node, p, false);
        }
        Ok(())
    }

    fn apply_plan(&mut self, plan: &InstallPlan) -> Result<(), EngineError> {
        plan.validate(&self.topo)?;
        for (node, rule) in &plan.rules {
            let ix = self.topo.index_of(node).map_err(PlanError::from)?;
            match self.tables[ix].install(rule.clone(), self.now) {
                Ok(InstallOutcome::Inserted) => {
                    self.report.counters.inserted += 1;
                    self.report.log(self.now, EventKind::Install, format!("{node} {rule}"));
                    self.controller.installed(ix, rule.clone(), self.now);
                }
                Ok(InstallOutcome::Replaced) => {
                    self.report.counters.replaced += 1;
                    self.controller.installed(ix, rule.clone(), self.now);
                }
                Err(TableError::TableFull { .. }) => {
                    self.report.counters.table_full_rejections += 1;
                    self.report
                        .log(self.now, EventKind::TableFull, format!("{node} {rule}"));
                }
                Err(e) => return Err(EngineError::Install(node.clone(), e)),
            }
        }
        Ok(())
    }

    fn wireless(&mut self, ap: NodeIx, h: &Header, payload: Option<&(PayloadId, SimTime)>, at: SimTime) {
        let Some((pid, emit)) = payload else {
            self.drop_packet(ap, h);
            return;
        };
        if let Address::Multicast(c) = &h.dst {
            if let Ok(cam) = self.topo.index_of(c) {
                self.heard.insert((ap, cam), self.now);
            }
        }
        let ap_id = self.topo.node_at(ap).id.clone();
        let origin = self.topo.node_at(ap).position;
        let range = self.topo.ap_range();
        let mut receivers = 0;
        for v in self.vehicles.iter_mut() {
            if !v.present || v.position.distance(origin) > range {
                continue;
            }
            let addressed = match &h.dst {
                Address::Multicast(c) => c == &pid.camera,
                Address::Unicast(x) => x == &v.id,
            };
            if !addressed || !v.accepts(&pid.camera, *emit) {
                continue;
            }
            receivers += 1;
            if v.received.insert(pid.clone()) {
                self.report.deliveries.push(DeliveryRecord {
                    payload: pid.clone(),
                    vehicle: v.id.clone(),
                    ap: ap_id.clone(),
                    emit_time: *emit,
                    receive_time: at,
                });
            } else {
                self.report.counters.duplicates += 1;
            }
        }
        if receivers == 0 {
            self.report.counters.losses += 1;
        }
    }

    fn depart(&mut self, vix: usize) -> Result<(), EngineError> {
        let v = &mut self.vehicles[vix];
        v.present = false;
        v.departed = true;
        v.ap = None;
        let id = v.id.clone();
        for c in self.cameras.values_mut() {
            c.confirmed.remove(&vix);
        }
        self.report.log(self.now, EventKind::Depart, id.as_str());
        let plan = self.controller.vehicle_departed(&id)?;
        self.apply_plan(&plan)
    }

    fn camera_tick(&mut self, k: u64) {
        self.sweep();
        let cams: Vec<NodeIx> = self.cameras.keys().copied().collect();
        for cam in cams {
            let cam_id = self.topo.node_at(cam).id.clone();
            let listeners: Vec<usize> = (0..self.vehicles.len())
                .filter(|&i| self.vehicles[i].present && self.vehicles[i].subscriptions.contains_key(&cam_id))
                .collect();
            let state = self.cameras.get_mut(&cam).expect("camera");
            if !state.open {
                continue;
            }
            if listeners.is_empty() {
                state.open = false;
                state.confirmed.clear();
                self.controller.stream_stopped(&cam_id);
                self.report.log(self.now, EventKind::StreamClose, cam_id.as_str());
                continue;
            }
            let targets: Vec<&NodeId> = listeners
                .iter()
                .filter(|i| state.confirmed.contains(i))
                .map(|&i| &self.vehicles[i].id)
                .collect();
            let headers = self.controller.emission_headers(&cam_id, targets);
            let payload = PayloadId { camera: cam_id, seq: k };
            let view = NetView {
                topology: &self.topo,
                tables: &self.tables,
                vehicles: &self.vehicles,
                now: self.now,
                strategy: self.strategy,
            };
            self.observer.on_emit(&view, &payload, &headers);
            self.report.counters.emissions += 1;
            for header in headers {
                let packet = Packet {
                    header,
                    payload: Some((payload.clone(), self.now)),
                };
                self.process(cam, packet, true);
            }
        }
        let next = self.now + self.params.period;
        if next < self.horizon {
            self.schedule(next, Ev::CameraTick(k + 1));
        }
    }
}
