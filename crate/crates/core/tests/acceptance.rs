//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Heavy; build with optimizations (the workspace test profile does).

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use bmlrp::ascent::{select_connections, BuildOptions, ConnectTarget};
use bmlrp::experiments::{
    csv_body, curve_shape, degree_experiment, degree_rows, degrees_csv, stretch_csv, stretch_experiment,
    stretch_summary, sweep, ExperimentConfig, Measure,
};
use bmlrp::oracle::fixtures::*;
use bmlrp::oracle::{blind_tables, brute_g_out, disconnected_levels, reference_select_connections};
use bmlrp::propagation::{build_neighbor_graph, compute_g_out, NeighborGraph, PropagationOptions, Propagator};
use bmlrp::topology::{generate, GenConfig};
use bmlrp::{build_multilevel, route, LevelRef, Link, NodeId};
use common::*;
use rand::seq::IteratorRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIXTURE_BUDGET: Duration = Duration::from_secs(1);
const THEOREM_BUDGET: Duration = Duration::from_secs(120);
const EXPERIMENT_BUDGET: Duration = Duration::from_secs(30 * 60);
const THEOREM_INSTANCES: u64 = 300;
const G_OUT_GRAPHS: u64 = 200;
const SELECT_GRAPHS: u64 = 100;
const STALE_SEEDS: u64 = 50;
const PLATEAU_RANGE: (f64, f64) = (4.0, 9.0);
const MAX_DEGREE_AT_TENTH: f64 = 21.0;
const SLOPE_BOUND: f64 = 0.9;
const HALVING_TOLERANCE: f64 = 0.20;
const HALVING_MIN_MEMBERS: f64 = 64.0;
const SEEDS: usize = 10;
const SIZES: [usize; 5] = [256, 512, 1024, 2048, 4096];

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, budget: Duration) -> Result<(), String> {
    ensure(start.elapsed() <= budget, || format!("took {:.1?}, budget {budget:?}", start.elapsed()))
}

fn id(s: &str) -> NodeId {
    s.parse().unwrap()
}

fn c1_walkthrough() -> Outcome {
    let t0 = Instant::now();
    let c = converge(&f3());
    let g_out = |from: u64| compute_g_out(&build_neighbor_graph(&c.tables[&f3_id(from)], f3_id(0)), 0, 32).edges;
    let pairs = |p: &[(u64, u64)]| -> BTreeSet<Link> { p.iter().map(|&(a, b)| Link::new(f3_id(a), f3_id(b))).collect() };
    // 0-1-5-4, 0-1-5-6, 0-1-2-6 minus the recipient
    let want1 = pairs(&[(1, 5), (5, 4), (5, 6), (1, 2), (2, 6)]);
    ensure(g_out(1) == want1, || format!("1 -> 0 sent {:?}", g_out(1)))?;
    let want4 = pairs(&[(4, 5), (4, 8)]);
    ensure(g_out(4) == want4, || format!("4 -> 0 sent {:?}", g_out(4)))?;
    let t = &c.tables[&f3_id(0)];
    ensure(t.visible_edges() == pairs(&F3_TABLE_0), || "node 0 table edges differ".into())?;
    let nodes: BTreeSet<u64> = t.visible_nodes().into_iter().map(f3_label).collect();
    ensure(nodes == BTreeSet::from([0, 1, 2, 4, 5, 6, 8]), || format!("node 0 sees {nodes:?}"))?;
    within(t0, FIXTURE_BUDGET)?;
    Ok(format!("8 edges, 7 nodes, {} rounds, {:.1?}", c.stats.rounds, t0.elapsed()))
}

fn c2_grid_route() -> Outcome {
    let t0 = Instant::now();
    let m = f2_multilevel().map_err(|e| e.to_string())?;
    let r = route(&m, id("11100"), id("01000")).map_err(|e| e.to_string())?;
    let want: Vec<NodeId> = ["11100", "01100", "01010", "01000"].map(id).to_vec();
    ensure(r.logical_hops == want, || format!("logical hops {:?}", r.logical_hops))?;
    let last = r.segments.last().unwrap();
    ensure(last.level.depth() == 3 && last.path.contains(&id("01011")), || {
        format!("last segment {:?} at depth {}", last.path, last.level.depth())
    })?;
    ensure(bmlrp::router::is_physical_walk(&m, &r.physical_path), || "physical path broken".into())?;
    within(t0, FIXTURE_BUDGET)?;
    Ok(format!("11100 01100 01010 01000 via 01011, {} physical hops", r.hop_count))
}

fn c3_black_links() -> Outcome {
    let m = build_multilevel(&f4(), &f4_options()).map_err(|e| e.to_string())?;
    let black = m.level(LevelRef::new(1, 1).unwrap()).ok_or("no black level")?;
    let got: BTreeSet<Link> = black.links.keys().copied().collect();
    let want: BTreeSet<Link> = F4_BLACK_LINKS.iter().map(|&(a, b)| Link::new(f4_id(a), f4_id(b))).collect();
    ensure(got == want, || {
        let extra: Vec<_> = got.difference(&want).map(|l| (f4_label(l.lo()), f4_label(l.hi()))).collect();
        let missing: Vec<_> = want.difference(&got).map(|l| (f4_label(l.lo()), f4_label(l.hi()))).collect();
        format!("extra {extra:?}, missing {missing:?}")
    })?;
    Ok(format!("{} black links as listed", got.len()))
}

/// Deterministic connected geometric instances with 8-bit identifiers.
fn theorem_instances() -> impl Iterator<Item = bmlrp::PhysicalNetwork> {
    (0..THEOREM_INSTANCES).map(|k| {
        let nodes = 8 + (k as usize * 37) % 121;
        (0..)
            .map(|t| generate(&GenConfig { width_bits: 8, ..GenConfig::new(nodes, k * 1000 + t) }).unwrap())
            .find(|n| n.is_connected())
            .unwrap()
    })
}

fn c4_c5_theorems() -> (Outcome, Outcome) {
    let t0 = Instant::now();
    let (mut levels, mut disconnected, mut tables, mut blind) = (0, Vec::new(), 0, Vec::new());
    for (k, net) in theorem_instances().enumerate() {
        let m = match build_multilevel(&net, &BuildOptions::default()) {
            Ok(m) => m,
            Err(e) => {
                let msg = format!("instance {k}: {e}");
                return (Err(msg.clone()), Err(msg));
            }
        };
        levels += m.levels().len();
        tables += m.levels().values().map(|i| i.tables.len()).sum::<usize>();
        disconnected.extend(disconnected_levels(&m).into_iter().map(|l| (k, l)));
        blind.extend(blind_tables(&m).into_iter().map(|l| (k, l)));
    }
    let c4 = ensure(disconnected.is_empty(), || format!("{} disconnected, first {:?}", disconnected.len(), disconnected[0]))
        .and_then(|_| within(t0, THEOREM_BUDGET))
        .map(|_| format!("{THEOREM_INSTANCES} instances, {levels} level networks connected, {:.1?}", t0.elapsed()));
    let c5 = ensure(blind.is_empty(), || format!("{} blind tables, first {:?}", blind.len(), blind[0]))
        .map(|_| format!("{tables} tables all see the other color"));
    (c4, c5)
}

fn c6_oracles() -> Outcome {
    let mut g_out_checked = 0;
    let mut seed = 0;
    while g_out_checked < G_OUT_GRAPHS {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(3..=14);
        let net = random_graph(seed, n, 6, rng.gen_range(0.15..0.6));
        if net.len() < 2 {
            continue;
        }
        let a = net.ids().choose(&mut rng).unwrap();
        let Some(&b) = net.adjacency()[&a].iter().choose(&mut rng) else { continue };
        let level = rng.gen_range(0..3);
        let g = NeighborGraph::from_edges(a, b, net.links().iter().copied());
        let fast = compute_g_out(&g, level, 32);
        let (nodes, edges) = brute_g_out(a, b, g.edges(), level).map_err(|e| e.to_string())?;
        ensure(fast.edges == edges && fast.nodes == nodes, || format!("g_out differs on graph seed {seed}"))?;
        g_out_checked += 1;
    }
    let mut select_checked = 0;
    let mut tables = 0;
    while select_checked < SELECT_GRAPHS {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(3..=12);
        let net = random_graph(seed, n, 5, rng.gen_range(0.15..0.6));
        if net.len() < 2 {
            continue;
        }
        let c = converge(&net);
        for t in c.tables.values() {
            for target in [ConnectTarget::D, ConnectTarget::E2] {
                let opts = BuildOptions { connect_target: target, ..Default::default() };
                let fast: BTreeSet<NodeId> = select_connections(t, &opts).into_keys().collect();
                let slow = reference_select_connections(t, target).map_err(|e| e.to_string())?;
                ensure(fast == slow, || format!("selection differs at {} on graph seed {seed} ({target})", t.owner()))?;
            }
            tables += 1;
        }
        select_checked += 1;
    }
    Ok(format!("{g_out_checked} g_out graphs, {select_checked} selection graphs ({tables} tables, both targets)"))
}

fn c7_stale() -> Outcome {
    let mut removed_total = 0;
    for seed in 0..STALE_SEEDS {
        let net = geometric(96, 8, seed);
        let mut p = Propagator::new(root_level(&net), PropagationOptions::default());
        p.run().map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = (net.links().len() as f64 * 0.05).round().max(1.0) as usize;
        let removed: BTreeSet<Link> = net.links().iter().copied().choose_multiple(&mut rng, k).into_iter().collect();
        p.remove_links(&removed);
        p.run().map_err(|e| e.to_string())?;
        let live = &p.network().links;
        let stale: usize = p.tables().values().map(|t| t.stale_records(live).count()).sum();
        ensure(stale == 0, || format!("seed {seed}: {stale} stale records"))?;
        removed_total += k;
    }
    Ok(format!("{STALE_SEEDS} seeds, {removed_total} links removed, no stale records"))
}

fn c8_c9_experiments() -> (Outcome, Outcome) {
    let t0 = Instant::now();
    let cfg = ExperimentConfig { repetitions: SEEDS, seed: 1, ..Default::default() };
    let jobs: Vec<(usize, f64)> = SIZES.iter().map(|&n| (n, 0.0)).collect();
    let (plain, failed) = sweep(&cfg, &jobs, Measure { stretch: true, delivery: true });
    let (dense, failed_dense) = sweep(&cfg, &[(4096, 0.10)], Measure::default());
    let elapsed = t0.elapsed();
    if !failed.is_empty() || !failed_dense.is_empty() {
        let msg = format!("build failures: {:?}", failed.iter().chain(&failed_dense).collect::<Vec<_>>());
        return (Err(msg.clone()), Err(msg));
    }

    let big: Vec<_> = plain.iter().chain(&dense).filter(|m| m.nodes == 4096).cloned().collect();
    let rows = degree_rows(&big);
    let by_fraction = |f: f64| rows.iter().filter(|r| r.fraction == f).cloned().collect::<Vec<_>>();
    let c8 = (|| {
        let flat = curve_shape(&by_fraction(0.0)).ok_or("empty curve")?;
        let tenth = curve_shape(&by_fraction(0.10)).ok_or("empty curve")?;
        let curve: Vec<String> = by_fraction(0.0).iter().map(|r| format!("{:.2}", r.avg_degree)).collect();
        ensure(flat.plateau >= PLATEAU_RANGE.0 && flat.plateau <= PLATEAU_RANGE.1, || {
            format!("plateau {:.2} outside {PLATEAU_RANGE:?}; curve {}", flat.plateau, curve.join(" "))
        })?;
        ensure(flat.tail_non_increasing, || format!("tail rises; curve {}", curve.join(" ")))?;
        ensure(tenth.max_degree <= MAX_DEGREE_AT_TENTH, || format!("max degree {:.2} at 10%", tenth.max_degree))?;
        for r in &rows {
            let expect = 4096.0 / 2f64.powi(r.level as i32);
            if expect >= HALVING_MIN_MEMBERS && r.fraction == 0.0 {
                let members = big[0].members as f64 / 2f64.powi(r.level as i32);
                ensure((r.members - members).abs() <= HALVING_TOLERANCE * members, || {
                    format!("level {} averages {:.1} members, expected about {members:.1}", r.level, r.members)
                })?;
            }
        }
        within(t0, EXPERIMENT_BUDGET)?;
        Ok(format!(
            "plateau {:.2}, tail non-increasing over {} populated levels, max {:.2} at 10%; curve {}",
            flat.plateau,
            flat.populated,
            tenth.max_degree,
            curve.join(" ")
        ))
    })();

    let summary = stretch_summary(&plain);
    let c9 = (|| {
        let min = summary.sizes.iter().map(|s| s.min_stretch).fold(f64::INFINITY, f64::min);
        let route_failures: usize = summary.sizes.iter().map(|s| s.failures).sum();
        let delivery = plain.iter().filter_map(|m| m.delivery.clone());
        let (mut pairs, mut fails, mut loops) = (0, 0, 0);
        for d in delivery {
            pairs += d.pairs_tested;
            fails += d.failures;
            loops += d.loop_violations;
        }
        ensure(summary.slope <= SLOPE_BOUND, || format!("slope {:.3} > {SLOPE_BOUND}", summary.slope))?;
        ensure(min >= 1.0, || format!("stretch {min} below 1"))?;
        ensure(route_failures == 0 && fails == 0 && loops == 0, || {
            format!("{route_failures} sampled failures, {fails} delivery failures, {loops} loop violations")
        })?;
        let hops: Vec<String> = summary.sizes.iter().map(|s| format!("{}:{:.1}", s.nodes, s.mean_hops)).collect();
        Ok(format!("slope {:.3}, min stretch {min:.3}, {pairs} delivery pairs ok; hops {}", summary.slope, hops.join(" ")))
    })();
    eprintln!("experiments took {elapsed:.1?}");
    (c8, c9)
}

fn c10_determinism() -> Outcome {
    let cfg = ExperimentConfig {
        nodes: 512,
        fractions: vec![0.0, 0.10],
        sizes: vec![256, 512],
        repetitions: 2,
        stretch_samples: 500,
        seed: 5,
        ..Default::default()
    };
    let run = || -> Result<(String, String), String> {
        let d = degree_experiment(&cfg).map_err(|e| e.to_string())?;
        let (_, builds) = stretch_experiment(&cfg).map_err(|e| e.to_string())?;
        Ok((degrees_csv(&cfg, &d.rows).unwrap(), stretch_csv(&cfg, &builds).unwrap()))
    };
    let (d1, s1) = run()?;
    let (d2, s2) = run()?;
    ensure(csv_body(&d1) == csv_body(&d2), || "degrees.csv bodies differ".into())?;
    ensure(csv_body(&s1) == csv_body(&s2), || "stretch.csv bodies differ".into())?;
    ensure(d1 == d2 && s1 == s2, || "provenance lines differ".into())?;
    Ok(format!("{} + {} CSV bytes identical across runs", d1.len(), s1.len()))
}

fn main() {
    let _ = env_logger::builder().is_test(true).try_init();
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |n: u32| filter.is_empty() || filter.iter().any(|f| f == &n.to_string());

    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut record = |n, name, f: &dyn Fn() -> Outcome| {
        if wanted(n) {
            results.push((n, name, f()));
        }
    };
    record(1, "walkthrough propagation", &c1_walkthrough);
    record(2, "grid route", &c2_grid_route);
    record(3, "black-node links", &c3_black_links);
    if wanted(4) || wanted(5) {
        let (c4, c5) = c4_c5_theorems();
        results.push((4, "child networks connected", c4));
        results.push((5, "tables see the other color", c5));
    }
    let mut record = |n, name, f: &dyn Fn() -> Outcome| {
        if wanted(n) {
            results.push((n, name, f()));
        }
    };
    record(6, "oracle equivalence", &c6_oracles);
    record(7, "stale routes purged", &c7_stale);
    if wanted(8) || wanted(9) {
        let (c8, c9) = c8_c9_experiments();
        results.push((8, "degree curve", c8));
        results.push((9, "stretch growth and delivery", c9));
    }
    let mut record = |n, name, f: &dyn Fn() -> Outcome| {
        if wanted(n) {
            results.push((n, name, f()));
        }
    };
    record(10, "deterministic outputs", &c10_determinism);

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (n, name, out) in &results {
        match out {
            Ok(detail) => println!("PASS {n:>2} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {n:>2} {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
