//! Scenario descriptions, seed sweeps and CSV reporting.

mod invariants;
mod presets;
mod verify;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use invariants::{
    check_cfa_non_increase, check_cs_rules, check_pit_aggregation, check_run_invariants, CfaCase, CsCase, CsOp,
    InvariantViolation, PitCase, RunCase,
};
pub use presets::{load_preset, parse_preset, preset_names, Preset, PRESETS};
pub use verify::{verify_presets, CriterionResult, VerifyReport, VERIFY_GROUPS};

use crate::analytics;
use crate::baseline::{self, BaselineConfig, BaselineError, DEFAULT_BEACON_INTERVAL_MS};
use crate::radio::{gen_grid, gen_line, MetricsLedger, RadioTopology, TopologyError};
use crate::sim::{self, ConsumerSchedule, FetchScenario, SimError, DEFAULT_CONSUMER_GAP_MS, DEFAULT_MAX_TIME_MS};
use crate::strategy::{Routing, StrategyConfig, DEFAULT_TEMP_FIB_MS};
use crate::wire::{Name, WireError};

pub const SAMPLE10: &str = include_str!("../../topologies/sample10.topo");
pub const SAMPLE20: &str = include_str!("../../topologies/sample20.topo");

/// Default number of seeds per configuration.
pub const DEFAULT_RUNS: u32 = 20;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("topology: {0}")]
    Topology(#[from] TopologyError),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stack {
    Ndn,
    Baseline,
}

impl fmt::Display for Stack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stack::Ndn => "ndn",
            Stack::Baseline => "baseline",
        })
    }
}

impl FromStr for Stack {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ndn" => Ok(Stack::Ndn),
            "baseline" => Ok(Stack::Baseline),
            other => Err(ExperimentError::Config(format!("unknown stack {other:?}"))),
        }
    }
}

/// Where a scenario's topology comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum TopologySource {
    /// Bundled `sample10` / `sample20`.
    Sample(String),
    Grid { rows: usize, cols: usize, p: f64 },
    Line { n: usize, p: f64 },
    File(PathBuf),
}

impl TopologySource {
    pub fn load(&self) -> Result<RadioTopology, ExperimentError> {
        Ok(match self {
            TopologySource::Sample(name) => match name.as_str() {
                "sample10" => RadioTopology::parse(SAMPLE10)?,
                "sample20" => RadioTopology::parse(SAMPLE20)?,
                other => return Err(ExperimentError::Config(format!("unknown sample topology {other:?}"))),
            },
            TopologySource::Grid { rows, cols, p } => gen_grid(*rows, *cols, *p)?,
            TopologySource::Line { n, p } => gen_line(*n, *p)?,
            TopologySource::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
                    path: path.clone(),
                    source,
                })?;
                RadioTopology::parse(&text)?
            }
        })
    }

    /// Generated topologies have known geometry, so models get the true hop count.
    pub fn is_generated(&self) -> bool {
        matches!(self, TopologySource::Grid { .. } | TopologySource::Line { .. })
    }
}

impl FromStr for TopologySource {
    type Err = ExperimentError;

    /// `sample10`, `sample20`, `grid:RxC[:p]`, `line:N[:p]`, or a file path.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ExperimentError::Config(format!("bad topology {s:?}"));
        let parse_p = |p: Option<&str>| -> Result<f64, ExperimentError> {
            p.map_or(Ok(1.0), |p| p.parse().map_err(|_| bad()))
        };
        if s == "sample10" || s == "sample20" {
            return Ok(TopologySource::Sample(s.to_string()));
        }
        if let Some(rest) = s.strip_prefix("grid:") {
            let mut parts = rest.split(':');
            let dims = parts.next().ok_or_else(bad)?;
            let (r, c) = dims.split_once('x').ok_or_else(bad)?;
            return Ok(TopologySource::Grid {
                rows: r.parse().map_err(|_| bad())?,
                cols: c.parse().map_err(|_| bad())?,
                p: parse_p(parts.next())?,
            });
        }
        if let Some(rest) = s.strip_prefix("line:") {
            let mut parts = rest.split(':');
            return Ok(TopologySource::Line {
                n: parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?,
                p: parse_p(parts.next())?,
            });
        }
        Ok(TopologySource::File(PathBuf::from(s)))
    }
}

fn default_content() -> String {
    "/riot/text".to_string()
}
fn default_chunks() -> usize {
    10
}
fn default_runs() -> u32 {
    DEFAULT_RUNS
}
fn default_seed() -> u64 {
    1
}
fn default_temp_fib() -> u64 {
    DEFAULT_TEMP_FIB_MS
}
fn default_beacon() -> u64 {
    DEFAULT_BEACON_INTERVAL_MS
}
fn default_gap() -> u64 {
    DEFAULT_CONSUMER_GAP_MS
}
fn default_max_time() -> u64 {
    DEFAULT_MAX_TIME_MS
}
fn default_stack() -> Stack {
    Stack::Ndn
}
fn default_routing() -> Routing {
    Routing::Ronr
}

/// One experiment configuration, as written in preset files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// See [`TopologySource`] for accepted forms.
    pub topology: String,
    #[serde(default = "default_stack")]
    pub stack: Stack,
    #[serde(default = "default_routing")]
    pub routing: Routing,
    #[serde(default)]
    pub cfa: bool,
    #[serde(default)]
    pub onpc: bool,
    #[serde(default)]
    pub cache_chunks: usize,
    #[serde(default = "default_temp_fib")]
    pub temp_fib_ms: u64,
    pub producer: String,
    pub consumers: Vec<String>,
    #[serde(default = "default_content")]
    pub content: String,
    #[serde(default = "default_chunks")]
    pub chunks: usize,
    #[serde(default = "default_runs")]
    pub runs: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Start all consumers at once instead of one after the other.
    #[serde(default)]
    pub together: bool,
    #[serde(default = "default_gap")]
    pub consumer_gap_ms: u64,
    #[serde(default = "default_max_time")]
    pub max_time_ms: u64,
    #[serde(default = "default_beacon")]
    pub beacon_interval_ms: u64,
    /// Tree root for the baseline stack; defaults to the producer.
    #[serde(default)]
    pub root: Option<String>,
}

impl Scenario {
    pub fn new(name: &str, topology: &str, producer: &str, consumers: &[&str]) -> Self {
        Scenario {
            name: name.to_string(),
            topology: topology.to_string(),
            stack: default_stack(),
            routing: default_routing(),
            cfa: false,
            onpc: false,
            cache_chunks: 0,
            temp_fib_ms: DEFAULT_TEMP_FIB_MS,
            producer: producer.to_string(),
            consumers: consumers.iter().map(|c| c.to_string()).collect(),
            content: default_content(),
            chunks: default_chunks(),
            runs: DEFAULT_RUNS,
            seed: 1,
            together: false,
            consumer_gap_ms: DEFAULT_CONSUMER_GAP_MS,
            max_time_ms: DEFAULT_MAX_TIME_MS,
            beacon_interval_ms: DEFAULT_BEACON_INTERVAL_MS,
            root: None,
        }
    }

    pub fn strategy(&self) -> StrategyConfig {
        StrategyConfig {
            routing: self.routing,
            cfa: self.cfa,
            onpc: self.onpc,
            cache_capacity: self.cache_chunks,
            temp_fib_lifetime_ms: self.temp_fib_ms,
        }
    }

    /// Loads the topology and checks the scenario against it.
    pub fn resolve(&self) -> Result<ResolvedScenario, ExperimentError> {
        let source: TopologySource = self.topology.parse()?;
        let topology = source.load()?;
        if self.runs == 0 {
            return Err(ExperimentError::Config(format!("{}: runs must be at least 1", self.name)));
        }
        let producer = topology.id(&self.producer)?;
        let consumers = self
            .consumers
            .iter()
            .map(|c| topology.id(c))
            .collect::<Result<Vec<_>, _>>()?;
        let dist = topology.hop_distances(producer);
        let back: Vec<_> = consumers.iter().map(|&c| topology.hops(c, producer)).collect();
        for (i, &c) in consumers.iter().enumerate() {
            let apart = dist[c.index()].into_iter().chain(back[i]).min();
            if apart.is_some_and(|h| h < 2) {
                return Err(ExperimentError::Config(format!(
                    "{}: consumer {} is less than 2 hops from producer {}",
                    self.name,
                    self.consumers[i],
                    self.producer
                )));
            }
        }
        let mut fetch = FetchScenario::new(self.strategy(), producer, consumers, Name::parse(&self.content)?, self.chunks);
        fetch.schedule = if self.together {
            ConsumerSchedule::Together
        } else {
            ConsumerSchedule::Sequential {
                gap_ms: self.consumer_gap_ms,
            }
        };
        fetch.max_time_ms = self.max_time_ms;
        fetch.validate(&topology)?;
        let root = self.root.as_deref().map(|r| topology.id(r)).transpose()?;
        let hops = if source.is_generated() {
            fetch.consumers.first().and_then(|&c| topology.hops(c, producer))
        } else {
            None
        };
        let lossless = topology.directed_edges().all(|(_, _, p)| p == 1.0);
        Ok(ResolvedScenario {
            scenario: self.clone(),
            topology,
            fetch,
            baseline: BaselineConfig {
                root,
                beacon_interval_ms: self.beacon_interval_ms,
            },
            hops,
            lossless,
        })
    }

    pub fn strategy_label(&self) -> String {
        match self.stack {
            Stack::Ndn => self.routing.to_string(),
            Stack::Baseline => "tree".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub scenario: Scenario,
    pub topology: RadioTopology,
    pub fetch: FetchScenario,
    pub baseline: BaselineConfig,
    /// True consumer-producer hop count, for generated topologies.
    pub hops: Option<usize>,
    pub lossless: bool,
}

impl ResolvedScenario {
    pub fn run_seed(&self, seed: u64) -> Result<MetricsLedger, ExperimentError> {
        Ok(match self.scenario.stack {
            Stack::Ndn => sim::run(&self.fetch, &self.topology, seed)?.ledger,
            Stack::Baseline => baseline::run_fetch_baseline(&self.fetch, &self.baseline, &self.topology, seed)?,
        })
    }

    /// Closed-form transmission count matching this configuration, if any.
    pub fn model_value(&self) -> Option<f64> {
        if self.scenario.stack != Stack::Ndn {
            return None;
        }
        let n = self.topology.len() as u64;
        let k = self.scenario.chunks as u64;
        let m = self.fetch.consumers.len() as u64;
        let h = self.hops.map(|h| h as u64);
        let value = match self.scenario.routing {
            Routing::Vif => analytics::vif_tx(n, k, h).map(|v| v * m as f64),
            Routing::Ronr if self.scenario.cache_chunks > 0 && m > 1 => analytics::cached_best_tx(n, k, m),
            Routing::Ronr => analytics::multi_nocache_tx(n, k, m, h),
        };
        value.ok()
    }
}

/// One CSV row: a single run, or the mean over all runs of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub scenario: String,
    pub stack: Stack,
    pub strategy: String,
    pub cfa: bool,
    pub onpc: bool,
    pub cache_chunks: usize,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    /// `None` for the mean row.
    pub seed: Option<u64>,
    pub tx_broadcast: Ratio<u64>,
    pub tx_unicast: Ratio<u64>,
    pub tx_total: Ratio<u64>,
    pub rx_total: Ratio<u64>,
    pub transfers_ok: Ratio<u64>,
    pub transfers_failed: Ratio<u64>,
    pub mean_chunk_latency_ms: Option<Ratio<u64>>,
    pub model_value: Option<f64>,
    pub deviation: Option<f64>,
    /// Transfers cut off by the time limit.
    pub timeouts: u64,
}

pub const CSV_HEADER: &str = "scenario,stack,strategy,cfa,onpc,cache_chunks,n,m,k,seed,tx_broadcast,tx_unicast,tx_total,rx_total,transfers_ok,transfers_failed,mean_chunk_latency_ms,model_value,deviation";

fn fmt_ratio(r: &Ratio<u64>, integer_ok: bool) -> String {
    if integer_ok && r.is_integer() {
        return r.to_integer().to_string();
    }
    // exact rounding half up to 3 decimals
    let scaled = (r * Ratio::from_integer(1000u64) * Ratio::from_integer(2u64) + Ratio::from_integer(1u64)).to_integer() / 2;
    format!("{}.{:03}", scaled / 1000, scaled % 1000)
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

impl Row {
    fn from_ledger(res: &ResolvedScenario, seed: u64, ledger: &MetricsLedger) -> Row {
        let model_value = res.model_value();
        let tx_total = ledger.tx_total();
        Row {
            seed: Some(seed),
            tx_broadcast: Ratio::from_integer(ledger.tx_broadcast()),
            tx_unicast: Ratio::from_integer(ledger.tx_unicast()),
            tx_total: Ratio::from_integer(tx_total),
            rx_total: Ratio::from_integer(ledger.rx_total()),
            transfers_ok: Ratio::from_integer(ledger.transfers_ok() as u64),
            transfers_failed: Ratio::from_integer(ledger.transfers_failed() as u64),
            mean_chunk_latency_ms: ledger.mean_chunk_latency(),
            model_value,
            deviation: model_value.map(|m| analytics::compare(tx_total as f64, m, None).deviation),
            timeouts: ledger.transfers.iter().filter(|t| t.timed_out).count() as u64,
            ..Row::blank(res)
        }
    }

    fn blank(res: &ResolvedScenario) -> Row {
        let s = &res.scenario;
        Row {
            scenario: s.name.clone(),
            stack: s.stack,
            strategy: s.strategy_label(),
            cfa: s.cfa,
            onpc: s.onpc,
            cache_chunks: s.cache_chunks,
            n: res.topology.len(),
            m: res.fetch.consumers.len(),
            k: s.chunks,
            seed: None,
            tx_broadcast: Ratio::from_integer(0),
            tx_unicast: Ratio::from_integer(0),
            tx_total: Ratio::from_integer(0),
            rx_total: Ratio::from_integer(0),
            transfers_ok: Ratio::from_integer(0),
            transfers_failed: Ratio::from_integer(0),
            mean_chunk_latency_ms: None,
            model_value: None,
            deviation: None,
            timeouts: 0,
        }
    }

    /// Arithmetic mean of `runs`, accumulated exactly.
    fn mean(res: &ResolvedScenario, runs: &[Row]) -> Row {
        let count = runs.len() as u64;
        let avg = |f: fn(&Row) -> Ratio<u64>| runs.iter().map(f).sum::<Ratio<u64>>() / count;
        let latencies: Vec<Ratio<u64>> = runs.iter().filter_map(|r| r.mean_chunk_latency_ms).collect();
        let model_value = res.model_value();
        let tx_total = avg(|r| r.tx_total);
        let tx_total_f = *tx_total.numer() as f64 / *tx_total.denom() as f64;
        Row {
            tx_broadcast: avg(|r| r.tx_broadcast),
            tx_unicast: avg(|r| r.tx_unicast),
            tx_total,
            rx_total: avg(|r| r.rx_total),
            transfers_ok: avg(|r| r.transfers_ok),
            transfers_failed: avg(|r| r.transfers_failed),
            mean_chunk_latency_ms: (!latencies.is_empty())
                .then(|| latencies.iter().sum::<Ratio<u64>>() / latencies.len() as u64),
            model_value,
            deviation: model_value.map(|m| analytics::compare(tx_total_f, m, None).deviation),
            timeouts: runs.iter().map(|r| r.timeouts).sum(),
            ..Row::blank(res)
        }
    }

    pub fn tx_total_f64(&self) -> f64 {
        ratio_f64(&self.tx_total)
    }

    pub fn to_csv(&self) -> String {
        let is_run = self.seed.is_some();
        let f = |r: &Ratio<u64>| fmt_ratio(r, is_run);
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.3}"));
        [
            self.scenario.clone(),
            self.stack.to_string(),
            self.strategy.clone(),
            on_off(self.cfa).to_string(),
            on_off(self.onpc).to_string(),
            self.cache_chunks.to_string(),
            self.n.to_string(),
            self.m.to_string(),
            self.k.to_string(),
            self.seed.map_or_else(|| "mean".to_string(), |s| s.to_string()),
            f(&self.tx_broadcast),
            f(&self.tx_unicast),
            f(&self.tx_total),
            f(&self.rx_total),
            f(&self.transfers_ok),
            f(&self.transfers_failed),
            self.mean_chunk_latency_ms
                .as_ref()
                .map_or_else(String::new, |r| fmt_ratio(r, false)),
            opt(self.model_value),
            opt(self.deviation),
        ]
        .join(",")
    }
}

pub fn ratio_f64(r: &Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    /// Per-seed rows, sorted by seed.
    pub runs: Vec<Row>,
    pub mean: Row,
    pub ledgers: Vec<MetricsLedger>,
}

impl ScenarioResult {
    pub fn to_csv_rows(&self) -> Vec<String> {
        self.runs.iter().chain([&self.mean]).map(Row::to_csv).collect()
    }
}

/// Runs every seed of `scenario` (in parallel) and aggregates.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioResult, ExperimentError> {
    let resolved = scenario.resolve()?;
    run_resolved(&resolved)
}

pub fn run_resolved(resolved: &ResolvedScenario) -> Result<ScenarioResult, ExperimentError> {
    let seeds: Vec<u64> = (0..u64::from(resolved.scenario.runs))
        .map(|i| resolved.scenario.seed + i)
        .collect();
    let ledgers = seeds
        .par_iter()
        .map(|&seed| resolved.run_seed(seed))
        .collect::<Result<Vec<_>, _>>()?;
    let runs: Vec<Row> = seeds
        .iter()
        .zip(&ledgers)
        .map(|(&seed, l)| Row::from_ledger(resolved, seed, l))
        .collect();
    let mean = Row::mean(resolved, &runs);
    Ok(ScenarioResult { runs, mean, ledgers })
}

/// Runs several scenarios and renders one CSV document.
pub fn run_to_csv(scenarios: &[Scenario]) -> Result<(String, Vec<ScenarioResult>), ExperimentError> {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let mut results = Vec::with_capacity(scenarios.len());
    for s in scenarios {
        let r = run_scenario(s)?;
        for line in r.to_csv_rows() {
            out.push_str(&line);
            out.push('\n');
        }
        results.push(r);
    }
    Ok((out, results))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topology_sources() {
        assert_eq!("sample10".parse::<TopologySource>().unwrap(), TopologySource::Sample("sample10".into()));
        assert_eq!(
            "grid:3x4:0.8".parse::<TopologySource>().unwrap(),
            TopologySource::Grid { rows: 3, cols: 4, p: 0.8 }
        );
        assert_eq!("line:6".parse::<TopologySource>().unwrap(), TopologySource::Line { n: 6, p: 1.0 });
        assert!("grid:3:0.8".parse::<TopologySource>().is_err());
        assert_eq!(
            "foo/bar.topo".parse::<TopologySource>().unwrap(),
            TopologySource::File(PathBuf::from("foo/bar.topo"))
        );
    }

    #[test]
    fn samples_load() {
        let t10 = TopologySource::Sample("sample10".into()).load().unwrap();
        assert_eq!(t10.len(), 10);
        assert_eq!(t10.hops(t10.id("t9-k38").unwrap(), t10.id("t9-155").unwrap()), Some(3));
        let t20 = TopologySource::Sample("sample20".into()).load().unwrap();
        assert_eq!(t20.len(), 20);
        let p = t20.id("t9-k36a").unwrap();
        for c in ["t9-149", "t9-148", "t9-150"] {
            assert_eq!(t20.hops(t20.id(c).unwrap(), p), Some(3));
        }
        baseline::converge(&t20, p).unwrap();
    }

    #[test]
    fn consumers_must_be_two_hops_away() {
        let s = Scenario::new("near", "line:4", "n1", &["n0"]);
        assert!(matches!(s.resolve(), Err(ExperimentError::Config(_))));
        let s = Scenario::new("far", "line:4", "n2", &["n0"]);
        assert_eq!(s.resolve().unwrap().hops, Some(2));
        let s = Scenario::new("ghost", "line:4", "n9", &["n0"]);
        assert!(matches!(s.resolve(), Err(ExperimentError::Topology(TopologyError::UnknownNode(_)))));
    }

    #[test]
    fn ratio_formatting() {
        assert_eq!(fmt_ratio(&Ratio::new(7, 2), false), "3.500");
        assert_eq!(fmt_ratio(&Ratio::new(2, 3), false), "0.667");
        assert_eq!(fmt_ratio(&Ratio::new(1, 3), false), "0.333");
        assert_eq!(fmt_ratio(&Ratio::from_integer(12), true), "12");
        assert_eq!(fmt_ratio(&Ratio::from_integer(12), false), "12.000");
        assert_eq!(fmt_ratio(&Ratio::new(1, 2000), false), "0.001");
    }

    #[test]
    fn rows_and_means() {
        let mut s = Scenario::new("t", "grid:3x3:0.8", "r2c2", &["r0c0"]);
        s.runs = 4;
        s.chunks = 5;
        let r = run_scenario(&s).unwrap();
        assert_eq!(r.runs.len(), 4);
        let sum: u64 = r.ledgers.iter().map(|l| l.tx_total()).sum();
        assert_eq!(r.mean.tx_total, Ratio::new(sum, 4));
        for row in r.runs.iter().chain([&r.mean]) {
            assert_eq!(row.tx_total, row.tx_broadcast + row.tx_unicast);
            assert_eq!(row.to_csv().split(',').count(), CSV_HEADER.split(',').count());
        }
        assert!(r.mean.to_csv().contains(",mean,"));
        assert_eq!(r.runs[0].seed, Some(1));
        assert_eq!(r.runs[3].seed, Some(4));
    }

    #[test]
    fn csv_is_reproducible() {
        let mut s = Scenario::new("t", "sample10", "t9-155", &["t9-k38"]);
        s.runs = 3;
        let (a, _) = run_to_csv(std::slice::from_ref(&s)).unwrap();
        let (b, _) = run_to_csv(&[s]).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with(CSV_HEADER));
    }
}
