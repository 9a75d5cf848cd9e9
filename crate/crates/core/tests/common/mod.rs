#![allow(dead_code)]

pub mod oracle;

use std::fmt::Write as _;
use std::path::PathBuf;

use sdvn::controller::{Strategy, StrategyConfig};
use sdvn::scenario::Scenario;

pub const GOLDEN: [&str; 10] = [
    "one_to_one",
    "one_to_two",
    "two_to_one",
    "two_to_two",
    "handoff",
    "detour",
    "merge",
    "ap_line",
    "shared_chain",
    "grid",
];

pub fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

pub fn golden(name: &str) -> Scenario {
    let dir = scenarios_dir();
    Scenario::load(&dir.join(format!("{name}.topo")), &dir.join(format!("{name}.trace")))
        .unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn cfg(strategy: Strategy) -> StrategyConfig {
    StrategyConfig::with_strategy(strategy)
}

pub fn cfg_hops(strategy: Strategy, preinstall_hops: usize) -> StrategyConfig {
    StrategyConfig {
        preinstall_hops,
        ..StrategyConfig::with_strategy(strategy)
    }
}

pub fn switch_name(i: usize) -> String {
    format!("S{i}")
}

/// `cameras` cameras hanging off S1, chain S1..Sn, AP `A` after Sn, one
/// vehicle at A subscribing to every camera at t=0. Moments are 10 s apart.
pub fn chain_one_to_n(switches: usize, cameras: usize) -> Scenario {
    let mut t = String::new();
    for c in 0..cameras {
        let _ = writeln!(t, "node K{c} -100 {} camera", 10 * c);
        let _ = writeln!(t, "link K{c} S1 1");
    }
    let mut topo = String::new();
    for i in 1..=switches {
        let _ = writeln!(topo, "node S{i} {} 0 switch", 100 * (i - 1));
    }
    let _ = writeln!(topo, "node A {} 0 ap", 100 * switches);
    topo.push_str(&t);
    for i in 1..switches {
        let _ = writeln!(topo, "link S{i} S{} 1", i + 1);
    }
    let _ = writeln!(topo, "link S{switches} A 1");
    topo.push_str("param ap_range 30\nparam moment_s 10\nparam window_s 4\n");
    let mut trace = format!("mark V 0 {x} 0\nmark V 10 {x} 0\n", x = 100 * switches);
    for c in 0..cameras {
        let _ = writeln!(trace, "request V 0 K{c}");
    }
    Scenario::parse(&topo, &trace).unwrap()
}

/// Camera K at x=0, switches S1..Sn along the x axis, one AP `A{i}` below
/// each switch. A vehicle sits at each AP listed in `occupied` (1-based);
/// requests are issued in list order, one second apart. Moments are 10 s.
pub fn comb(switches: usize, occupied: &[usize]) -> Scenario {
    let mut topo = String::from("node K 0 0 camera\n");
    for i in 1..=switches {
        let _ = writeln!(topo, "node S{i} {} 0 switch", 100 * i);
        let _ = writeln!(topo, "node A{i} {} -50 ap", 100 * i);
    }
    topo.push_str("link K S1 1\n");
    for i in 1..=switches {
        let _ = writeln!(topo, "link S{i} A{i} 1");
        if i > 1 {
            let _ = writeln!(topo, "link S{} S{i} 1", i - 1);
        }
    }
    topo.push_str("param ap_range 30\nparam moment_s 10\nparam window_s 4\n");
    let mut trace = String::new();
    for (n, &i) in occupied.iter().enumerate() {
        let _ = writeln!(trace, "mark V{n} 0 {} -50", 100 * i);
        let _ = writeln!(trace, "mark V{n} 10 {} -50", 100 * i);
        let _ = writeln!(trace, "request V{n} {n} K");
    }
    Scenario::parse(&topo, &trace).unwrap()
}
