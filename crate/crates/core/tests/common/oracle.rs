//! Brute-force propagation oracle.
//!
//! At every camera emission it snapshots all flow tables and expands each
//! emitted header breadth-first, following every output copy, with its own
//! matching and action interpretation. The vehicles that should receive the
//! payload are derived from the resulting wireless frames.

use std::collections::{BTreeSet, HashSet, VecDeque};

use sdvn::controller::StrategyConfig;
use sdvn::engine::{run_observed, NetView, Observer};
use sdvn::flowtable::{Action, Address, FieldMatch, Header, Rule};
use sdvn::metrics::{MetricsReport, PayloadId};
use sdvn::scenario::Scenario;
use sdvn::topology::{NodeId, NodeIx, Port};

#[derive(Default)]
pub struct PropagationOracle {
    pub expected: BTreeSet<(NodeId, PayloadId)>,
    pub frames: usize,
    pub ambiguous: Vec<String>,
}

fn field_ok(f: &FieldMatch, a: &Address) -> bool {
    match f {
        FieldMatch::Any => true,
        FieldMatch::Exact(x) => x == a,
    }
}

/// Highest-priority matching rule; two matches at the same top priority
/// are recorded as an ambiguity.
fn select<'a>(rules: &'a [Rule], h: &Header, ambiguous: &mut Vec<String>) -> Option<&'a Rule> {
    let matching: Vec<&Rule> = rules
        .iter()
        .filter(|r| field_ok(&r.pattern.src, &h.src) && field_ok(&r.pattern.dst, &h.dst))
        .collect();
    let top = matching.iter().map(|r| r.priority).max()?;
    let best: Vec<&&Rule> = matching.iter().filter(|r| r.priority == top).collect();
    if best.len() > 1 {
        ambiguous.push(format!("{h}: {} rules at priority {top}", best.len()));
    }
    best.first().map(|r| **r)
}

impl Observer for PropagationOracle {
    fn on_emit(&mut self, view: &NetView<'_>, payload: &PayloadId, headers: &[Header]) {
        let topo = view.topology;
        let origin = topo.index_of(&payload.camera).expect("camera in topology");
        let mut frames: Vec<(NodeIx, Header)> = Vec::new();
        for h in headers {
            let mut seen: HashSet<(NodeIx, Header)> = HashSet::new();
            let mut queue = VecDeque::from([(origin, h.clone())]);
            while let Some((n, h)) = queue.pop_front() {
                if !seen.insert((n, h.clone())) {
                    continue;
                }
                let Some(rule) = select(view.tables[n].rules(), &h, &mut self.ambiguous) else {
                    continue;
                };
                let mut work = h.clone();
                for a in &rule.actions {
                    match a {
                        Action::SetDst(d) => work.dst = d.clone(),
                        Action::Output(p) if *p == Port::WIRELESS => frames.push((n, work.clone())),
                        Action::Output(p) => {
                            let peer = topo
                                .neighbor_ixs(n)
                                .find(|&(_, port)| port == *p)
                                .map(|(peer, _)| peer)
                                .expect("output port has a link");
                            queue.push_back((peer, work.clone()));
                        }
                        Action::PacketIn | Action::Drop => {}
                    }
                }
            }
        }
        self.frames += frames.len();
        for (ap, h) in frames {
            let at = topo.node_at(ap).position;
            for v in view.vehicles {
                if !v.present {
                    continue;
                }
                let dx = v.position.x - at.x;
                let dy = v.position.y - at.y;
                if (dx * dx + dy * dy).sqrt() > topo.ap_range() {
                    continue;
                }
                let addressed = match &h.dst {
                    Address::Multicast(c) => *c == payload.camera,
                    Address::Unicast(x) => *x == v.id,
                };
                let subscribed = v.subscriptions.get(&payload.camera).is_some_and(|&t| t < view.now);
                if addressed && subscribed {
                    self.expected.insert((v.id.clone(), payload.clone()));
                }
            }
        }
    }
}

/// Runs the scenario under the oracle; Err describes the first mismatch.
pub fn run_checked(scenario: &Scenario, cfg: &StrategyConfig) -> Result<MetricsReport, String> {
    let mut oracle = PropagationOracle::default();
    let report = run_observed(scenario, cfg, &mut oracle).map_err(|e| e.to_string())?;
    if let Some(a) = oracle.ambiguous.first() {
        return Err(format!("ambiguous lookup: {a}"));
    }
    let actual: BTreeSet<(NodeId, PayloadId)> = report
        .deliveries
        .iter()
        .map(|d| (d.vehicle.clone(), d.payload.clone()))
        .collect();
    if actual.len() != report.deliveries.len() {
        return Err("a payload was delivered twice to one vehicle".into());
    }
    if let Some(x) = oracle.expected.symmetric_difference(&actual).next() {
        let side = if actual.contains(x) {
            "engine only"
        } else {
            "oracle only"
        };
        return Err(format!("{} {} ({side})", x.0, x.1));
    }
    Ok(report)
}
