//! Run measurements and their CSV serialization.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::controller::Strategy;
use crate::time::SimTime;
use crate::topology::NodeId;

/// One camera emission: camera plus tick index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PayloadId {
    pub camera: NodeId,
    pub seq: u64,
}

impl fmt::Display for PayloadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.camera, self.seq)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryRecord {
    pub payload: PayloadId,
    pub vehicle: NodeId,
    /// AP whose frame carried the payload.
    pub ap: NodeId,
    pub emit_time: SimTime,
    pub receive_time: SimTime,
}

impl DeliveryRecord {
    pub fn delay(&self) -> SimTime {
        self.receive_time - self.emit_time
    }
}

/// Rule-table size of one switch at one moment boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSample {
    pub moment: u64,
    pub switch: NodeId,
    pub total: usize,
    /// Entries carrying camera data (request-direction entries excluded).
    pub data: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentSample {
    pub moment: u64,
    pub time: SimTime,
    pub vehicles_present: usize,
    /// Present vehicles associated with some AP.
    pub vehicles_online: usize,
    pub inserted_so_far: u64,
    pub expired_so_far: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub packet_ins: u64,
    pub losses: u64,
    pub table_full_rejections: u64,
    pub duplicates: u64,
    pub drops: u64,
    pub inserted: u64,
    pub replaced: u64,
    pub expired: u64,
    pub requests_sent: u64,
    pub local_joins: u64,
    pub emissions: u64,
    pub events_processed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    Appear,
    Depart,
    Handoff,
    Request,
    Join,
    PacketIn,
    Install,
    TableFull,
    Expire,
    StreamOpen,
    StreamClose,
    Drop,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::Appear => "appear",
            EventKind::Depart => "depart",
            EventKind::Handoff => "handoff",
            EventKind::Request => "request",
            EventKind::Join => "join",
            EventKind::PacketIn => "packet_in",
            EventKind::Install => "install",
            EventKind::TableFull => "table_full",
            EventKind::Expire => "expire",
            EventKind::StreamOpen => "stream_open",
            EventKind::StreamClose => "stream_close",
            EventKind::Drop => "drop",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub time: SimTime,
    pub kind: EventKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub strategy: Strategy,
    pub rule_counts: Vec<RuleSample>,
    pub moments: Vec<MomentSample>,
    pub deliveries: Vec<DeliveryRecord>,
    pub packet_in_times: Vec<SimTime>,
    pub counters: Counters,
    pub events: Vec<EventRecord>,
}

impl MetricsReport {
    pub fn new(strategy: Strategy) -> Self {
        MetricsReport {
            strategy,
            rule_counts: Vec::new(),
            moments: Vec::new(),
            deliveries: Vec::new(),
            packet_in_times: Vec::new(),
            counters: Counters::default(),
            events: Vec::new(),
        }
    }

    pub fn log(&mut self, time: SimTime, kind: EventKind, detail: impl Into<String>) {
        self.events.push(EventRecord {
            time,
            kind,
            detail: detail.into(),
        });
    }

    pub fn rule_sample(&self, moment: u64, switch: &NodeId) -> Option<&RuleSample> {
        self.rule_counts
            .iter()
            .find(|s| s.moment == moment && &s.switch == switch)
    }

    pub fn total_rules(&self, moment: u64) -> usize {
        self.rule_counts
            .iter()
            .filter(|s| s.moment == moment)
            .map(|s| s.total)
            .sum()
    }

    pub fn vehicles(&self) -> BTreeSet<&NodeId> {
        self.deliveries.iter().map(|d| &d.vehicle).collect()
    }

    /// Delivered payloads per vehicle.
    pub fn delivered(&self) -> BTreeMap<NodeId, BTreeSet<PayloadId>> {
        let mut out: BTreeMap<NodeId, BTreeSet<PayloadId>> = BTreeMap::new();
        for d in &self.deliveries {
            out.entry(d.vehicle.clone()).or_default().insert(d.payload.clone());
        }
        out
    }

    /// Mean delay in ms of one vehicle's deliveries. With several cameras
    /// the slowest connection counts.
    pub fn vehicle_delay(&self, vehicle: &NodeId) -> Option<f64> {
        let mut per_camera: BTreeMap<&NodeId, (u64, u64)> = BTreeMap::new();
        for d in self.deliveries.iter().filter(|d| &d.vehicle == vehicle) {
            let e = per_camera.entry(&d.payload.camera).or_default();
            e.0 += d.delay().as_micros();
            e.1 += 1;
        }
        per_camera
            .values()
            .map(|&(sum, n)| sum as f64 / n as f64 / 1_000.0)
            .reduce(f64::max)
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<(), ReportError> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|source| ReportError::Io { path, source })
}

pub fn rules_csv(reports: &[&MetricsReport]) -> String {
    let mut s = String::from("moment,switch,strategy,count\n");
    for r in reports {
        for row in &r.rule_counts {
            let _ = writeln!(s, "{},{},{},{}", row.moment, row.switch, r.strategy, row.total);
        }
    }
    s
}

pub fn delays_csv(reports: &[&MetricsReport]) -> String {
    let mut s = String::from("vehicle,strategy,delay_ms\n");
    for r in reports {
        for v in r.vehicles() {
            if let Some(d) = r.vehicle_delay(v) {
                let _ = writeln!(s, "{},{},{:.3}", v, r.strategy, d);
            }
        }
    }
    s
}

pub fn events_csv(reports: &[&MetricsReport]) -> String {
    let mut s = String::from("time,kind,detail\n");
    for r in reports {
        for e in &r.events {
            let _ = writeln!(
                s,
                "{},{},{} {}",
                e.time,
                e.kind.label(),
                r.strategy,
                e.detail.replace(',', ";")
            );
        }
    }
    s
}

pub fn summary(reports: &[&MetricsReport]) -> String {
    let mut s = String::new();
    for r in reports {
        let c = &r.counters;
        let _ = writeln!(s, "[{}]", r.strategy);
        let _ = writeln!(s, "deliveries: {}", r.deliveries.len());
        let _ = writeln!(s, "packet_ins: {}", c.packet_ins);
        let _ = writeln!(s, "requests_sent: {}", c.requests_sent);
        let _ = writeln!(s, "local_joins: {}", c.local_joins);
        let _ = writeln!(s, "losses: {}", c.losses);
        let _ = writeln!(s, "drops: {}", c.drops);
        let _ = writeln!(s, "duplicates: {}", c.duplicates);
        let _ = writeln!(s, "table_full_rejections: {}", c.table_full_rejections);
        let _ = writeln!(
            s,
            "rules inserted/replaced/expired: {}/{}/{}",
            c.inserted, c.replaced, c.expired
        );
        let _ = writeln!(s, "moments:");
        for m in &r.moments {
            let _ = writeln!(
                s,
                "  {} t={}s rules={} vehicles={} online={}",
                m.moment,
                m.time.as_secs_f64(),
                r.total_rules(m.moment),
                m.vehicles_present,
                m.vehicles_online
            );
        }
        let _ = writeln!(s);
    }
    if let [a, b] = reports {
        let _ = writeln!(s, "[comparison {} vs {}]", b.strategy, a.strategy);
        for m in &a.moments {
            let _ = writeln!(
                s,
                "moment {}: rules {} vs {}",
                m.moment,
                b.total_rules(m.moment),
                a.total_rules(m.moment)
            );
        }
        let vehicles: BTreeSet<&NodeId> = a.vehicles().union(&b.vehicles()).copied().collect();
        for v in vehicles {
            match (a.vehicle_delay(v), b.vehicle_delay(v)) {
                (Some(x), Some(y)) => {
                    let _ = writeln!(s, "delay {v}: {y:.3} vs {x:.3} ms (delta {:+.3})", y - x);
                }
                _ => {
                    let _ = writeln!(s, "delay {v}: n/a");
                }
            }
        }
    }
    s
}

/// Writes `rules.csv`, `delays.csv`, `events.csv` and `summary.txt` into `dir`.
pub fn write_report(reports: &[&MetricsReport], dir: &Path) -> Result<(), ReportError> {
    fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_file(dir, "rules.csv", &rules_csv(reports))?;
    write_file(dir, "delays.csv", &delays_csv(reports))?;
    write_file(dir, "events.csv", &events_csv(reports))?;
    write_file(dir, "summary.txt", &summary(reports))
}
