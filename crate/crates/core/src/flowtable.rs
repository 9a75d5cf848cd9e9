//! OpenFlow-style flow tables over a two-field `(src, dst)` header.

use std::fmt;

use thiserror::Error;

use crate::time::SimTime;
use crate::topology::{NodeId, Port, Role, Topology, TopologyError};

/// Endpoint identifier. A camera's multicast address is derived from its
/// node id but lives in a separate kind, so it never equals any unicast
/// address.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Address {
    Unicast(NodeId),
    Multicast(NodeId),
}

impl Address {
    pub fn unicast(id: impl Into<NodeId>) -> Self {
        Address::Unicast(id.into())
    }

    pub fn is_multicast(&self) -> bool {
        matches!(self, Address::Multicast(_))
    }

    pub fn node(&self) -> &NodeId {
        match self {
            Address::Unicast(n) | Address::Multicast(n) => n,
        }
    }
}

impl fmt::Display for Address {
    /// `A` for unicast, `A'` for multicast.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Address::Unicast(n) => write!(f, "{n}"),
            Address::Multicast(n) => write!(f, "{n}'"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Header {
    pub src: Address,
    pub dst: Address,
}

impl Header {
    pub fn new(src: Address, dst: Address) -> Self {
        Header { src, dst }
    }
}

impl fmt::Display for Header {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}>{})", self.src, self.dst)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FieldMatch {
    Any,
    Exact(Address),
}

impl FieldMatch {
    fn matches(&self, a: &Address) -> bool {
        match self {
            FieldMatch::Any => true,
            FieldMatch::Exact(x) => x == a,
        }
    }
}

impl fmt::Display for FieldMatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldMatch::Any => f.write_str("*"),
            FieldMatch::Exact(a) => write!(f, "{a}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MatchPattern {
    pub src: FieldMatch,
    pub dst: FieldMatch,
}

impl MatchPattern {
    pub fn new(src: FieldMatch, dst: FieldMatch) -> Self {
        MatchPattern { src, dst }
    }

    /// `(*, dst)`
    pub fn to_dst(dst: Address) -> Self {
        MatchPattern::new(FieldMatch::Any, FieldMatch::Exact(dst))
    }

    /// `(src, *)`
    pub fn from_src(src: Address) -> Self {
        MatchPattern::new(FieldMatch::Exact(src), FieldMatch::Any)
    }

    pub fn exact(h: &Header) -> Self {
        MatchPattern::new(FieldMatch::Exact(h.src.clone()), FieldMatch::Exact(h.dst.clone()))
    }

    pub fn matches(&self, h: &Header) -> bool {
        self.src.matches(&h.src) && self.dst.matches(&h.dst)
    }
}

impl fmt::Display for MatchPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.src, self.dst)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Action {
    /// Emit a copy of the current working header on a port.
    Output(Port),
    /// Rewrite the working header's destination for every later output.
    SetDst(Address),
    PacketIn,
    Drop,
}

/// What a rule exists for; used to separate data-return rules from the
/// short-lived request-forwarding ones in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleTag {
    Data,
    Request,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub pattern: MatchPattern,
    pub priority: u16,
    pub actions: Vec<Action>,
    pub idle_timeout: SimTime,
    pub last_matched: SimTime,
    pub tag: RuleTag,
    seq: u64,
}

impl Rule {
    pub fn new(
        pattern: MatchPattern,
        priority: u16,
        actions: Vec<Action>,
        idle_timeout: SimTime,
        tag: RuleTag,
    ) -> Self {
        Rule {
            pattern,
            priority,
            actions,
            idle_timeout,
            last_matched: SimTime::ZERO,
            tag,
            seq: 0,
        }
    }

    /// Same match and priority, i.e. installing one replaces the other.
    pub fn same_key(&self, other: &Rule) -> bool {
        self.priority == other.priority && self.pattern == other.pattern
    }

    /// Wired output ports in action order.
    pub fn output_ports(&self) -> impl Iterator<Item = Port> + '_ {
        self.actions.iter().filter_map(|a| match a {
            Action::Output(p) => Some(*p),
            _ => None,
        })
    }

    pub fn is_idle(&self, now: SimTime) -> bool {
        now.saturating_sub(self.last_matched) >= self.idle_timeout
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} p{} [", self.pattern, self.priority)?;
        for (i, a) in self.actions.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match a {
                Action::Output(p) => write!(f, "out:{p}")?,
                Action::SetDst(d) => write!(f, "dst:{d}")?,
                Action::PacketIn => f.write_str("ctrl")?,
                Action::Drop => f.write_str("drop")?,
            }
        }
        f.write_str("]")
    }
}

/// One emitted copy: the port, the header it carries, and how many rewrites
/// were executed before it left (each costs processing time).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emission {
    pub port: Port,
    pub header: Header,
    pub rewrites_before: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActionOutcome {
    pub emissions: Vec<Emission>,
    pub packet_in: bool,
    pub dropped: bool,
}

/// Walks a rule's action list with a working copy of the header.
pub fn apply_actions(rule: &Rule, h: &Header) -> ActionOutcome {
    let mut working = h.clone();
    let mut out = ActionOutcome::default();
    let mut rewrites = 0;
    for a in &rule.actions {
        match a {
            Action::Output(p) => out.emissions.push(Emission {
                port: *p,
                header: working.clone(),
                rewrites_before: rewrites,
            }),
            Action::SetDst(d) => {
                working.dst = d.clone();
                rewrites += 1;
            }
            Action::PacketIn => out.packet_in = true,
            Action::Drop => {
                out.dropped = true;
                break;
            }
        }
    }
    out
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableError {
    #[error("flow table full ({capacity} entries)")]
    TableFull { capacity: usize },
    #[error("rule has no actions")]
    EmptyActions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstallOutcome {
    Inserted,
    Replaced,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowTable {
    entries: Vec<Rule>,
    capacity: Option<usize>,
    next_seq: u64,
}

impl FlowTable {
    pub fn new(capacity: Option<usize>) -> Self {
        FlowTable {
            entries: Vec::new(),
            capacity,
            next_seq: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn rules(&self) -> &[Rule] {
        &self.entries
    }

    pub fn count_tagged(&self, tag: RuleTag) -> usize {
        self.entries.iter().filter(|r| r.tag == tag).count()
    }

    fn best_index(&self, h: &Header) -> Option<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, r)| r.pattern.matches(h))
            .max_by_key(|(_, r)| (r.priority, r.seq))
            .map(|(i, _)| i)
    }

    /// Highest priority match, most recently installed first on ties.
    /// Refreshes the hit rule's idle timer.
    pub fn lookup(&mut self, h: &Header, now: SimTime) -> Option<&Rule> {
        let i = self.best_index(h)?;
        let r = &mut self.entries[i];
        r.last_matched = now;
        Some(r)
    }

    /// Same selection as [`lookup`](Self::lookup) without touching timers.
    pub fn peek(&self, h: &Header) -> Option<&Rule> {
        self.best_index(h).map(|i| &self.entries[i])
    }

    pub fn install(&mut self, mut rule: Rule, now: SimTime) -> Result<InstallOutcome, TableError> {
        if rule.actions.is_empty() {
            return Err(TableError::EmptyActions);
        }
        rule.last_matched = now;
        rule.seq = self.next_seq;
        self.next_seq += 1;
        if let Some(slot) = self.entries.iter_mut().find(|r| r.same_key(&rule)) {
            *slot = rule;
            return Ok(InstallOutcome::Replaced);
        }
        if let Some(cap) = self.capacity {
            if self.entries.len() >= cap {
                return Err(TableError::TableFull { capacity: cap });
            }
        }
        self.entries.push(rule);
        Ok(InstallOutcome::Inserted)
    }

    /// Removes an entry by key; returns it if present.
    pub fn remove(&mut self, pattern: &MatchPattern, priority: u16) -> Option<Rule> {
        let i = self
            .entries
            .iter()
            .position(|r| r.priority == priority && &r.pattern == pattern)?;
        Some(self.entries.remove(i))
    }

    /// Drops every rule idle for at least its timeout.
    pub fn expire_idle(&mut self, now: SimTime) -> Vec<Rule> {
        let (gone, kept) = std::mem::take(&mut self.entries)
            .into_iter()
            .partition(|r| r.is_idle(now));
        self.entries = kept;
        gone
    }

    /// Whether some rule turns traffic into `group` frames on the wireless port.
    pub fn multicasts(&self, group: &Address) -> bool {
        self.entries.iter().any(|r| {
            let mut dst: Option<&Address> = None;
            r.actions.iter().any(|a| match a {
                Action::SetDst(d) => {
                    dst = Some(d);
                    false
                }
                Action::Output(p) => p.is_wireless() && dst == Some(group),
                _ => false,
            })
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoleError {
    #[error("`{0}` is a {1}, not a camera")]
    NotCamera(NodeId, Role),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// Multicast group of a camera.
pub fn multicast_address_of(topo: &Topology, camera: &NodeId) -> Result<Address, RoleError> {
    let node = topo.node(camera)?;
    if node.role != Role::Camera {
        return Err(RoleError::NotCamera(camera.clone(), node.role));
    }
    Ok(Address::Multicast(camera.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::TopologyBuilder;
    use proptest::prelude::*;

    fn u(s: &str) -> Address {
        Address::unicast(s)
    }

    fn hdr(s: &str, d: &str) -> Header {
        Header::new(u(s), u(d))
    }

    fn fwd(pattern: MatchPattern, prio: u16, port: u16) -> Rule {
        Rule::new(
            pattern,
            prio,
            vec![Action::Output(Port(port))],
            SimTime::from_secs(10),
            RuleTag::Data,
        )
    }

    #[test]
    fn wildcard_src_hits() {
        let mut t = FlowTable::new(None);
        t.install(fwd(MatchPattern::to_dst(u("C")), 1, 1), SimTime::ZERO)
            .unwrap();
        let r = t.lookup(&hdr("A", "C"), SimTime::from_secs(1)).unwrap();
        assert_eq!(r.pattern, MatchPattern::to_dst(u("C")));
        assert!(t.lookup(&hdr("A", "D"), SimTime::ZERO).is_none());
    }

    #[test]
    fn exact_rule_shadows_generic() {
        let mut t = FlowTable::new(None);
        t.install(fwd(MatchPattern::exact(&hdr("S1", "D")), 10, 2), SimTime::ZERO)
            .unwrap();
        t.install(fwd(MatchPattern::to_dst(u("D")), 1, 1), SimTime::ZERO)
            .unwrap();
        assert_eq!(t.lookup(&hdr("S1", "D"), SimTime::ZERO).unwrap().priority, 10);
        assert_eq!(t.lookup(&hdr("S2", "D"), SimTime::ZERO).unwrap().priority, 1);
    }

    #[test]
    fn empty_table_misses() {
        let mut t = FlowTable::new(None);
        assert!(t.lookup(&hdr("A", "B"), SimTime::ZERO).is_none());
    }

    #[test]
    fn equal_priority_prefers_latest_install() {
        let mut t = FlowTable::new(None);
        t.install(fwd(MatchPattern::to_dst(u("D")), 1, 1), SimTime::ZERO)
            .unwrap();
        t.install(fwd(MatchPattern::from_src(u("S")), 1, 2), SimTime::ZERO)
            .unwrap();
        let r = t.peek(&hdr("S", "D")).unwrap();
        assert_eq!(r.output_ports().collect::<Vec<_>>(), vec![Port(2)]);
    }

    #[test]
    fn action_lists() {
        let h = hdr("A", "C");
        let r = fwd(MatchPattern::to_dst(u("C")), 1, 1);
        let out = apply_actions(&r, &h);
        assert_eq!(
            out.emissions,
            vec![Emission {
                port: Port(1),
                header: h.clone(),
                rewrites_before: 0
            }]
        );

        let branch = Rule::new(
            MatchPattern::exact(&h),
            10,
            vec![Action::Output(Port(1)), Action::SetDst(u("D")), Action::Output(Port(2))],
            SimTime::from_secs(1),
            RuleTag::Data,
        );
        let out = apply_actions(&branch, &h);
        let got: Vec<_> = out
            .emissions
            .iter()
            .map(|e| (e.port, e.header.clone(), e.rewrites_before))
            .collect();
        assert_eq!(got, vec![(Port(1), hdr("A", "C"), 0), (Port(2), hdr("A", "D"), 1)]);

        let last_hop = Rule::new(
            MatchPattern::exact(&hdr("E", "C")),
            5,
            vec![
                Action::SetDst(Address::Multicast("A".into())),
                Action::Output(Port::WIRELESS),
            ],
            SimTime::from_secs(1),
            RuleTag::Data,
        );
        let out = apply_actions(&last_hop, &hdr("E", "C"));
        assert_eq!(
            out.emissions[0].header,
            Header::new(u("E"), Address::Multicast("A".into()))
        );
        assert_eq!(out.emissions[0].port, Port::WIRELESS);
        assert!(FlowTable {
            entries: vec![last_hop],
            ..Default::default()
        }
        .multicasts(&Address::Multicast("A".into())));

        let punt = Rule::new(
            MatchPattern::to_dst(u("X")),
            1,
            vec![Action::PacketIn],
            SimTime::ZERO,
            RuleTag::Data,
        );
        assert!(apply_actions(&punt, &hdr("A", "X")).packet_in);
        let drop = Rule::new(
            MatchPattern::to_dst(u("X")),
            1,
            vec![Action::Drop, Action::Output(Port(1))],
            SimTime::ZERO,
            RuleTag::Data,
        );
        let out = apply_actions(&drop, &hdr("A", "X"));
        assert!(out.dropped && out.emissions.is_empty());
    }

    #[test]
    fn install_replace_and_capacity() {
        let mut t = FlowTable::new(Some(1));
        assert_eq!(
            t.install(fwd(MatchPattern::to_dst(u("D")), 1, 1), SimTime::ZERO),
            Ok(InstallOutcome::Inserted)
        );
        assert_eq!(t.len(), 1);
        assert_eq!(
            t.install(fwd(MatchPattern::to_dst(u("D")), 1, 7), SimTime::ZERO),
            Ok(InstallOutcome::Replaced)
        );
        assert_eq!(t.len(), 1);
        assert_eq!(t.rules()[0].actions, vec![Action::Output(Port(7))]);
        assert_eq!(
            t.install(fwd(MatchPattern::to_dst(u("E")), 1, 1), SimTime::ZERO),
            Err(TableError::TableFull { capacity: 1 })
        );
    }

    #[test]
    fn idle_expiry_boundary() {
        let mut t = FlowTable::new(None);
        t.install(fwd(MatchPattern::to_dst(u("D")), 1, 1), SimTime::ZERO)
            .unwrap();
        assert_eq!(t.expire_idle(SimTime::from_secs(10)).len(), 1);

        t.install(fwd(MatchPattern::to_dst(u("D")), 1, 1), SimTime::ZERO)
            .unwrap();
        t.lookup(&hdr("A", "D"), SimTime::from_secs(9));
        assert!(t.expire_idle(SimTime::from_secs(10)).is_empty());
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn multicast_addresses() {
        let topo = TopologyBuilder::new(1.0)
            .node("E", 0.0, 0.0, Role::Camera)
            .node("F", 1.0, 0.0, Role::Camera)
            .node("S", 2.0, 0.0, Role::Switch)
            .build()
            .unwrap();
        let e = multicast_address_of(&topo, &"E".into()).unwrap();
        assert!(e.is_multicast());
        assert_eq!(e.to_string(), "E'");
        assert_eq!(e, multicast_address_of(&topo, &"E".into()).unwrap());
        assert_ne!(e, multicast_address_of(&topo, &"F".into()).unwrap());
        assert_ne!(e, u("E"));
        assert!(matches!(
            multicast_address_of(&topo, &"S".into()),
            Err(RoleError::NotCamera(..))
        ));
    }

    fn arb_addr() -> impl Strategy<Value = Address> {
        (0u8..4, any::<bool>()).prop_map(|(i, m)| {
            let n = NodeId::new(format!("n{i}"));
            if m {
                Address::Multicast(n)
            } else {
                Address::Unicast(n)
            }
        })
    }

    fn arb_field() -> impl Strategy<Value = FieldMatch> {
        prop_oneof![Just(FieldMatch::Any), arb_addr().prop_map(FieldMatch::Exact)]
    }

    fn arb_action() -> impl Strategy<Value = Action> {
        prop_oneof![
            (0u16..4).prop_map(|p| Action::Output(Port(p))),
            arb_addr().prop_map(Action::SetDst),
        ]
    }

    fn arb_rule() -> impl Strategy<Value = Rule> {
        (
            arb_field(),
            arb_field(),
            0u16..12,
            prop::collection::vec(arb_action(), 1..5),
            1u64..20,
        )
            .prop_map(|(s, d, p, a, to)| {
                Rule::new(MatchPattern::new(s, d), p, a, SimTime::from_secs(to), RuleTag::Data)
            })
    }

    proptest! {
        #[test]
        fn table_properties(
            rules in prop::collection::vec((arb_rule(), 0u64..30), 0..12),
            src in arb_addr(), dst in arb_addr(),
            hits in prop::collection::vec(0u64..30, 0..5),
            now in 0u64..60,
        ) {
            let mut t = FlowTable::new(None);
            for (r, at) in &rules {
                t.install(r.clone(), SimTime::from_secs(*at)).unwrap();
            }
            let h = Header::new(src.clone(), dst.clone());
            // determinism
            let a = t.peek(&h).cloned();
            prop_assert_eq!(a.clone(), t.clone().peek(&h).cloned());
            if let Some(r) = &a {
                let out = apply_actions(r, &h);
                prop_assert!(out.emissions.len() <= r.output_ports().count());
                // no matching rule outranks the chosen one
                for other in t.rules() {
                    if other.pattern.matches(&h) {
                        prop_assert!(other.priority <= r.priority);
                    }
                }
            }
            for at in hits {
                t.lookup(&h, SimTime::from_secs(at));
            }
            let now = SimTime::from_secs(now);
            t.expire_idle(now);
            for r in t.rules() {
                prop_assert!(!r.is_idle(now));
            }
        }

        #[test]
        fn exact_src_shadows_wildcard(
            dst in arb_addr(), src in arb_addr(),
            low in 0u16..5, gap in 1u16..5,
            noise in prop::collection::vec(arb_rule(), 0..6),
        ) {
            let mut t = FlowTable::new(None);
            for r in noise.into_iter().filter(|r| r.priority < low) {
                t.install(r, SimTime::ZERO).unwrap();
            }
            let exact = Rule::new(
                MatchPattern::new(FieldMatch::Exact(src.clone()), FieldMatch::Exact(dst.clone())),
                low + gap, vec![Action::Output(Port(9))], SimTime::from_secs(1), RuleTag::Data,
            );
            let generic = Rule::new(MatchPattern::to_dst(dst.clone()), low, vec![Action::Output(Port(8))], SimTime::from_secs(1), RuleTag::Data);
            t.install(exact.clone(), SimTime::ZERO).unwrap();
            t.install(generic, SimTime::ZERO).unwrap();
            let got = t.peek(&Header::new(src, dst)).unwrap();
            prop_assert_eq!(&got.pattern, &exact.pattern);
        }
    }
}
