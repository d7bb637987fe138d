//! Seeded sweeps: level degree curves, route stretch against network size,
//! and delivery checks, with CSV/JSON output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ascent::{build_multilevel, BuildOptions, ConnectTarget, MultiLevelNetwork};
use crate::error::{Error, Result};
use crate::idspace::{NodeId, DEFAULT_WIDTH};
use crate::router::{is_physical_walk, measure_stretch, route, sample_pairs, StretchReport};
use crate::topology::{
    default_radius, generate, restrict_largest_component, stream_rng, GenConfig, PhysicalNetwork, Stream, DEFAULT_SIDE,
};

pub const DEFAULT_FRACTIONS: [f64; 4] = [0.0, 0.01, 0.05, 0.10];
pub const DEFAULT_SIZES: [usize; 5] = [256, 512, 1024, 2048, 4096];
/// Networks up to this size are checked on every ordered pair.
pub const FULL_ENUMERATION_MAX: usize = 256;
pub const DELIVERY_SAMPLES: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub nodes: usize,
    pub width_bits: u8,
    pub side: f64,
    /// `None` picks the radius giving about 8 neighbours at each size.
    pub radius: Option<f64>,
    pub random_link_fraction: f64,
    pub levels_max: Option<u32>,
    pub extra_k: usize,
    pub connect_target: ConnectTarget,
    pub fractions: Vec<f64>,
    pub sizes: Vec<usize>,
    pub stretch_samples: usize,
    pub seed: u64,
    pub repetitions: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            nodes: 1024,
            width_bits: DEFAULT_WIDTH,
            side: DEFAULT_SIDE,
            radius: None,
            random_link_fraction: 0.0,
            levels_max: None,
            extra_k: 0,
            connect_target: ConnectTarget::default(),
            fractions: DEFAULT_FRACTIONS.to_vec(),
            sizes: DEFAULT_SIZES.to_vec(),
            stretch_samples: 2000,
            seed: 1,
            repetitions: 10,
        }
    }
}

impl ExperimentConfig {
    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.repetitions as u64).map(move |k| self.seed.wrapping_add(k))
    }

    pub fn gen_config(&self, nodes: usize, fraction: f64, seed: u64) -> GenConfig {
        GenConfig {
            nodes,
            width_bits: self.width_bits,
            side: self.side,
            radius: self.radius.unwrap_or_else(|| default_radius(nodes, self.side)),
            random_link_fraction: fraction,
            seed,
        }
    }

    pub fn build_options(&self, keep_tables: bool) -> BuildOptions {
        BuildOptions {
            connect_target: self.connect_target,
            extra_k: self.extra_k,
            max_depth: self.levels_max,
            keep_tables,
            ..Default::default()
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).fold(String::new(), |mut s, b| {
            write!(s, "{b:02x}").unwrap();
            s
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Largest connected piece of the generated network for one seed.
pub fn network_for(cfg: &ExperimentConfig, nodes: usize, fraction: f64, seed: u64) -> Result<PhysicalNetwork> {
    restrict_largest_component(&generate(&cfg.gen_config(nodes, fraction, seed))?)
}

/// Degree numbers for all level networks of one depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthDegree {
    pub depth: u32,
    /// Mean level link count over every member at this depth.
    pub avg_degree: f64,
    /// Mean size of the level networks at this depth.
    pub mean_members: f64,
    pub largest: usize,
}

pub fn degree_curve(net: &MultiLevelNetwork) -> Vec<DepthDegree> {
    let mut acc: BTreeMap<u32, (usize, usize, usize, usize)> = BTreeMap::new();
    for info in net.levels().values() {
        let e = acc.entry(info.level.depth()).or_default();
        e.0 += 2 * info.links.len();
        e.1 += info.members.len();
        e.2 += 1;
        e.3 = e.3.max(info.members.len());
    }
    acc.into_iter()
        .map(|(depth, (ends, members, nets, largest))| DepthDegree {
            depth,
            avg_degree: ends as f64 / members as f64,
            mean_members: members as f64 / nets as f64,
            largest,
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeliveryReport {
    pub pairs_tested: usize,
    pub failures: usize,
    pub loop_violations: usize,
}

/// One build's measurements; the build itself is dropped afterwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildMeasurement {
    pub nodes: usize,
    pub fraction: f64,
    pub seed: u64,
    /// Size of the component actually built.
    pub members: usize,
    pub curve: Vec<DepthDegree>,
    pub stretch: Option<StretchReport>,
    pub delivery: Option<DeliveryReport>,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct Measure {
    pub stretch: bool,
    pub delivery: bool,
}

pub fn measure_build(cfg: &ExperimentConfig, nodes: usize, fraction: f64, seed: u64, what: Measure) -> Result<BuildMeasurement> {
    let phys = network_for(cfg, nodes, fraction, seed)?;
    let net = build_multilevel(&phys, &cfg.build_options(what.stretch || what.delivery))?;
    Ok(BuildMeasurement {
        nodes,
        fraction,
        seed,
        members: phys.len(),
        curve: degree_curve(&net),
        stretch: what.stretch.then(|| measure_stretch(&net, cfg.stretch_samples, seed)),
        delivery: what.delivery.then(|| delivery_check(&net, seed, 0.0)),
    })
}

/// `(nodes, fraction, seed)` and the error.
pub type FailedBuild = ((usize, f64, u64), String);

/// Measures every `(nodes, fraction, seed)` job in parallel. Failed builds
/// come back separately; results are in job order.
pub fn sweep(
    cfg: &ExperimentConfig,
    jobs: &[(usize, f64)],
    what: Measure,
) -> (Vec<BuildMeasurement>, Vec<FailedBuild>) {
    let all: Vec<(usize, f64, u64)> =
        jobs.iter().flat_map(|&(n, f)| cfg.seeds().map(move |s| (n, f, s))).collect();
    let results: Vec<_> = all
        .par_iter()
        .map(|&(n, f, s)| {
            let r = measure_build(cfg, n, f, s, what);
            log::info!("built n={n} fraction={f} seed={s}: {}", if r.is_ok() { "ok" } else { "failed" });
            ((n, f, s), r)
        })
        .collect();
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (job, r) in results {
        match r {
            Ok(m) => ok.push(m),
            Err(e) => {
                log::warn!("build {job:?} failed: {e}");
                failed.push((job, e.to_string()));
            }
        }
    }
    (ok, failed)
}

/// Routes every ordered pair (small networks) or a fixed sample, optionally
/// after deleting a random fraction of every table's records.
pub fn delivery_check(net: &MultiLevelNetwork, seed: u64, fault_fraction: f64) -> DeliveryReport {
    let mut damaged;
    let net = if fault_fraction > 0.0 {
        damaged = net.clone();
        let mut rng = stream_rng(seed, Stream::Faults);
        for info in damaged.levels_mut().values_mut() {
            for t in info.tables.values_mut() {
                t.retain_records(|_| rng.gen::<f64>() >= fault_fraction);
            }
        }
        &damaged
    } else {
        net
    };
    let ids: Vec<NodeId> = net.physical().ids().collect();
    let k = if ids.len() <= FULL_ENUMERATION_MAX { usize::MAX } else { DELIVERY_SAMPLES };
    let mut rep = DeliveryReport::default();
    for (s, d) in sample_pairs(&ids, k, seed) {
        rep.pairs_tested += 1;
        match route(net, s, d) {
            Ok(r) => {
                let monotone = r.logical_hops.windows(2).all(|w| w[1].prefix_len(d) > w[0].prefix_len(d));
                let ends = r.physical_path.first() == Some(&s) && r.physical_path.last() == Some(&d);
                if !monotone || !ends || !is_physical_walk(net, &r.physical_path) {
                    rep.loop_violations += 1;
                }
            }
            Err(_) => rep.failures += 1,
        }
    }
    rep
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeRow {
    pub fraction: f64,
    pub level: u32,
    pub avg_degree: f64,
    pub members: f64,
}

/// Per fraction and depth, seed-averaged degree and level-network size.
/// Depths whose largest network is a singleton in every seed are left out.
pub fn degree_rows(measurements: &[BuildMeasurement]) -> Vec<DegreeRow> {
    let mut acc: BTreeMap<(u64, u32), (f64, f64, usize, usize)> = BTreeMap::new();
    for m in measurements {
        for d in &m.curve {
            let e = acc.entry((m.fraction.to_bits(), d.depth)).or_default();
            e.0 += d.avg_degree;
            e.1 += d.mean_members;
            e.2 += 1;
            e.3 = e.3.max(d.largest);
        }
    }
    let mut rows: Vec<DegreeRow> = acc
        .into_iter()
        .filter(|(_, v)| v.3 >= 2)
        .map(|((f, level), (deg, mem, n, _))| DegreeRow {
            fraction: f64::from_bits(f),
            level,
            avg_degree: deg / n as f64,
            members: mem / n as f64,
        })
        .collect();
    rows.sort_by(|a, b| a.fraction.total_cmp(&b.fraction).then(a.level.cmp(&b.level)));
    rows
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub rows: Vec<DegreeRow>,
    pub builds: usize,
    pub failed: Vec<String>,
}

pub fn degree_experiment(cfg: &ExperimentConfig) -> Result<DegreeReport> {
    let jobs: Vec<(usize, f64)> = cfg.fractions.iter().map(|&f| (cfg.nodes, f)).collect();
    let (ok, failed) = sweep(cfg, &jobs, Measure::default());
    check_failures(ok.len(), &failed)?;
    Ok(DegreeReport { rows: degree_rows(&ok), builds: ok.len(), failed: failed.into_iter().map(|(j, e)| format!("{j:?}: {e}")).collect() })
}

fn check_failures(ok: usize, failed: &[FailedBuild]) -> Result<()> {
    let total = ok + failed.len();
    if total > 0 && failed.len() * 20 >= total.max(1) && !failed.is_empty() {
        return Err(Error::Internal(format!("{} of {total} builds failed, first: {}", failed.len(), failed[0].1)));
    }
    Ok(())
}

/// Plateau and tail shape of one degree curve (fraction fixed).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveShape {
    /// Median degree over the depths whose networks average at least
    /// [`PLATEAU_MIN_MEMBERS`] members, physical level excluded.
    pub plateau: f64,
    pub max_degree: f64,
    /// Depths whose networks average at least [`POPULATED_MIN_MEMBERS`].
    pub populated: usize,
    /// Non-increasing over the last third of the populated depths.
    pub tail_non_increasing: bool,
}

pub const PLATEAU_MIN_MEMBERS: f64 = 16.0;
/// Below this the typical member is alone and its degree is noise.
pub const POPULATED_MIN_MEMBERS: f64 = 2.0;

pub fn curve_shape(rows: &[DegreeRow]) -> Option<CurveShape> {
    let mut body: Vec<f64> =
        rows.iter().filter(|r| r.level >= 1 && r.members >= PLATEAU_MIN_MEMBERS).map(|r| r.avg_degree).collect();
    if body.is_empty() {
        return None;
    }
    body.sort_by(f64::total_cmp);
    let plateau = if body.len() % 2 == 1 {
        body[body.len() / 2]
    } else {
        (body[body.len() / 2 - 1] + body[body.len() / 2]) / 2.0
    };
    let max_degree = rows.iter().filter(|r| r.level >= 1).map(|r| r.avg_degree).fold(0.0, f64::max);
    let populated: Vec<&DegreeRow> = rows.iter().filter(|r| r.members >= POPULATED_MIN_MEMBERS).collect();
    let tail = &populated[populated.len() - populated.len().div_ceil(3)..];
    let tail_non_increasing = tail.windows(2).all(|w| w[1].avg_degree <= w[0].avg_degree);
    Some(CurveShape { plateau, max_degree, populated: populated.len(), tail_non_increasing })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub nodes: usize,
    pub builds: usize,
    pub mean_hops: f64,
    pub mean_stretch: f64,
    pub median_stretch: f64,
    pub p95_stretch: f64,
    pub min_stretch: f64,
    pub failures: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StretchSweep {
    pub sizes: Vec<SizeRow>,
    /// Least-squares slope of ln(mean hops) against ln(N) over every build.
    pub slope: f64,
    pub failed: Vec<String>,
}

pub fn stretch_summary(measurements: &[BuildMeasurement]) -> StretchSweep {
    let mut by_size: BTreeMap<usize, Vec<&BuildMeasurement>> = BTreeMap::new();
    let mut points = Vec::new();
    for m in measurements {
        if let Some(s) = &m.stretch {
            by_size.entry(m.nodes).or_default().push(m);
            if s.mean_hops > 0.0 {
                points.push(((m.nodes as f64).ln(), s.mean_hops.ln()));
            }
        }
    }
    let sizes = by_size
        .into_iter()
        .map(|(nodes, ms)| {
            let reps: Vec<&StretchReport> = ms.iter().filter_map(|m| m.stretch.as_ref()).collect();
            let n = reps.len() as f64;
            let avg = |f: &dyn Fn(&StretchReport) -> f64| reps.iter().map(|r| f(r)).sum::<f64>() / n;
            SizeRow {
                nodes,
                builds: reps.len(),
                mean_hops: avg(&|r| r.mean_hops),
                mean_stretch: avg(&|r| r.mean),
                median_stretch: avg(&|r| r.median),
                p95_stretch: avg(&|r| r.p95),
                min_stretch: reps.iter().flat_map(|r| r.pairs.iter().map(|p| p.stretch)).fold(f64::INFINITY, f64::min),
                failures: reps.iter().map(|r| r.failures).sum(),
            }
        })
        .collect();
    StretchSweep { sizes, slope: least_squares_slope(&points), failed: Vec::new() }
}

pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return f64::NAN;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn stretch_experiment(cfg: &ExperimentConfig) -> Result<(StretchSweep, Vec<BuildMeasurement>)> {
    let jobs: Vec<(usize, f64)> = cfg.sizes.iter().map(|&n| (n, cfg.random_link_fraction)).collect();
    let (ok, failed) = sweep(cfg, &jobs, Measure { stretch: true, delivery: false });
    check_failures(ok.len(), &failed)?;
    let mut summary = stretch_summary(&ok);
    summary.failed = failed.into_iter().map(|(j, e)| format!("{j:?}: {e}")).collect();
    Ok((summary, ok))
}

fn provenance(cfg: &ExperimentConfig) -> String {
    format!(
        "# config_hash={} seed={} repetitions={}\n# config={}\n",
        cfg.hash(),
        cfg.seed,
        cfg.repetitions,
        serde_json::to_string(cfg).expect("config serializes")
    )
}

/// Splits off the `#` provenance lines, leaving the CSV body.
pub fn csv_body(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).fold(String::new(), |mut s, l| {
        s.push_str(l);
        s.push('\n');
        s
    })
}

pub fn degrees_csv(cfg: &ExperimentConfig, rows: &[DegreeRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["fraction", "level", "avg_degree", "members"])?;
    for r in rows {
        w.write_record([format!("{}", r.fraction), r.level.to_string(), format!("{:.6}", r.avg_degree), format!("{:.3}", r.members)])?;
    }
    Ok(provenance(cfg) + &finish(w)?)
}

pub fn stretch_csv(cfg: &ExperimentConfig, measurements: &[BuildMeasurement]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["pair_id", "src", "dst", "hops", "bfs", "stretch"])?;
    for m in measurements {
        let Some(s) = &m.stretch else { continue };
        for (k, p) in s.pairs.iter().enumerate() {
            w.write_record([
                format!("{}:{}:{}", m.nodes, m.seed, k),
                p.src.to_string(),
                p.dst.to_string(),
                p.hops.to_string(),
                p.bfs.to_string(),
                format!("{:.6}", p.stretch),
            ])?;
        }
    }
    Ok(provenance(cfg) + &finish(w)?)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// `summary.json` contents: the config, its hash and whatever was measured.
pub fn summary_json(cfg: &ExperimentConfig, body: serde_json::Value) -> Result<String> {
    let v = serde_json::json!({ "config_hash": cfg.hash(), "config": cfg, "results": body });
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}
