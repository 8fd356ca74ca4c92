//! Checks the bundled presets against the expected protocol behavior.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::invariants::{
    check_cfa_non_increase, check_cs_rules, check_pit_aggregation, check_run_invariants, CfaCase, CsCase, CsOp,
    InvariantViolation, PitCase, RunCase,
};
use super::{load_preset, ratio_f64, run_scenario, ExperimentError, Row};
use crate::analytics::{multi_nocache_tx, ronr_tx, vif_tx};
use crate::strategy::Routing;
use crate::wire::{Data, Interest, Name, Packet, CHUNK_PAYLOAD_LEN, MAX_COMPONENT_LEN, MAX_NAME_LEN};

pub const VERIFY_GROUPS: &[&str] = &["formulas", "lines", "fig4", "fig5", "fig6", "invariants", "wire"];

/// Random cases per invariant family.
const INVARIANT_CASES: usize = 500;
const FORMULA_INPUTS: usize = 1_000;
const WIRE_PACKETS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub group: &'static str,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub results: Vec<CriterionResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for r in &self.results {
            let verdict = if r.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{verdict}  #{} {:<11} {:<34} {}", r.id, r.group, r.title, r.detail);
        }
        out
    }
}

/// Mean rows of preset scenarios, run at most once each.
#[derive(Default)]
struct Means {
    rows: HashMap<String, Row>,
}

impl Means {
    fn preset(&mut self, preset: &str) -> Result<(), ExperimentError> {
        for s in load_preset(preset)?.scenarios {
            if !self.rows.contains_key(&s.name) {
                let r = run_scenario(&s)?;
                self.rows.insert(s.name.clone(), r.mean);
            }
        }
        Ok(())
    }

    fn get(&self, name: &str) -> Result<&Row, ExperimentError> {
        self.rows
            .get(name)
            .ok_or_else(|| ExperimentError::Config(format!("preset scenario {name} missing")))
    }
}

fn result(id: u8, group: &'static str, title: &'static str, passed: bool, detail: String) -> CriterionResult {
    CriterionResult {
        id,
        group,
        title,
        passed,
        detail,
    }
}

fn formulas() -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut bad = None;
    for _ in 0..FORMULA_INPUTS {
        let n = rng.gen_range(2..=1_000u64);
        let k = rng.gen_range(1..=200u64);
        let h = rng.gen_bool(0.5).then(|| rng.gen_range(1..=60u64));
        let one = vif_tx(n, 1, h) == ronr_tx(n, 1, h);
        let multi = multi_nocache_tx(n, k, 1, h) == ronr_tx(n, k, h);
        if !(one && multi) {
            bad = Some((n, k, h));
            break;
        }
    }
    let detail = match bad {
        None => format!("{FORMULA_INPUTS} inputs, exact"),
        Some(input) => format!("mismatch at (n, k, h) = {input:?}"),
    };
    result(1, "formulas", "formula identities", bad.is_none(), detail)
}

fn lines(means: &mut Means) -> Result<CriterionResult, ExperimentError> {
    means.preset("lines")?;
    let preset = load_preset("lines")?;
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for s in &preset.scenarios {
        let row = means.get(&s.name)?;
        match row.deviation {
            Some(0.0) => {}
            Some(d) => {
                worst = worst.max(d.abs());
                failures.push(s.name.clone());
            }
            None => failures.push(format!("{} (no model)", s.name)),
        }
    }
    let detail = if failures.is_empty() {
        format!("{} line configurations, deviation 0", preset.scenarios.len())
    } else {
        format!("off model: {} (max |dev| {worst:.3})", failures.join(" "))
    };
    Ok(result(2, "lines", "simulator equals model on lines", failures.is_empty(), detail))
}

fn fig4(means: &mut Means) -> Result<CriterionResult, ExperimentError> {
    means.preset("fig4-vif")?;
    means.preset("fig4-ronr")?;
    let vif = means.get("fig4-vif-k10")?;
    let ronr = means.get("fig4-ronr-k10")?;
    let ratio = ronr.tx_total_f64() / vif.tx_total_f64();
    let bcast_limit = ratio_f64(&vif.tx_broadcast) / vif.k as f64 * 1.2;
    let bcast = ratio_f64(&ronr.tx_broadcast);
    let passed = ratio <= 0.6 && bcast <= bcast_limit;
    let detail = format!(
        "ronr/vif = {ratio:.3} (<= 0.6), ronr bcast {bcast:.2} <= {bcast_limit:.2}, all ok: {}",
        vif.transfers_failed == 0.into() && ronr.transfers_failed == 0.into()
    );
    Ok(result(3, "fig4", "reactive routing saving", passed, detail))
}

fn fig5_cache(means: &mut Means) -> Result<CriterionResult, ExperimentError> {
    means.preset("fig5")?;
    let cached = means.get("fig5-m3-cache20")?;
    let plain = means.get("fig5-m3-cache0")?;
    let ratio = cached.tx_total_f64() / plain.tx_total_f64();
    let bcast_dev = ratio_f64(&cached.tx_broadcast) / ratio_f64(&plain.tx_broadcast) - 1.0;
    let unicast_drop = cached.tx_unicast < plain.tx_unicast;
    let passed = ratio <= 0.7 && bcast_dev.abs() <= 0.15 && unicast_drop;
    let detail = format!(
        "cache/nocache = {ratio:.3} (<= 0.7), bcast {:+.1}%, ucast {:.1} -> {:.1}",
        bcast_dev * 100.0,
        ratio_f64(&plain.tx_unicast),
        ratio_f64(&cached.tx_unicast)
    );
    Ok(result(4, "fig5", "caching saving", passed, detail))
}

fn fig5_linear(means: &mut Means) -> Result<CriterionResult, ExperimentError> {
    means.preset("fig5")?;
    let one = means.get("fig5-m1-cache0")?.tx_total_f64();
    let mut passed = true;
    let mut parts = Vec::new();
    for m in [2u32, 3] {
        let v = means.get(&format!("fig5-m{m}-cache0"))?.tx_total_f64();
        let dev = v / (f64::from(m) * one) - 1.0;
        passed &= dev.abs() <= 0.2;
        parts.push(format!("m={m}: {:+.1}%", dev * 100.0));
    }
    Ok(result(5, "fig5", "linear scaling without cache", passed, parts.join(", ")))
}

fn fig6(means: &mut Means) -> Result<CriterionResult, ExperimentError> {
    means.preset("fig5")?;
    means.preset("fig6")?;
    let baseline = means.get("fig6-baseline-m3")?.tx_total_f64();
    let ndn = means.get("fig5-m3-cache20")?.tx_total_f64();
    let factor = baseline / ndn;
    Ok(result(
        6,
        "fig6",
        "tree baseline gap",
        factor >= 1.5,
        format!("baseline/ndn = {factor:.2} (>= 1.5)"),
    ))
}

fn random_run_case(rng: &mut ChaCha8Rng) -> RunCase {
    let rows = rng.gen_range(1..=4);
    let cols = rng.gen_range(2..=4);
    let n = rows * cols;
    let cache = [0, 0, 3, 20][rng.gen_range(0..4)];
    RunCase {
        rows,
        cols,
        p: [1.0, 0.9, 0.7, 0.5][rng.gen_range(0..4)],
        routing: if rng.gen_bool(0.5) { Routing::Vif } else { Routing::Ronr },
        cfa: rng.gen_bool(0.5),
        onpc: rng.gen_bool(0.5),
        cache,
        producer: rng.gen_range(0..n),
        consumers: (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(0..n)).collect(),
        chunks: rng.gen_range(0..=6),
        together: rng.gen_bool(0.5),
        seed: rng.gen(),
    }
}

fn random_node_cases(rng: &mut ChaCha8Rng) -> Result<(), InvariantViolation> {
    let pit = PitCase {
        routing: if rng.gen_bool(0.5) { Routing::Vif } else { Routing::Ronr },
        arrivals: (0..rng.gen_range(1..8)).map(|_| (rng.gen(), rng.gen_range(0..900))).collect(),
    };
    check_pit_aggregation(&pit)?;
    check_cfa_non_increase(&CfaCase {
        downstream: (0..rng.gen_range(1..6)).map(|_| rng.gen()).collect(),
    })?;
    let ops = (0..rng.gen_range(0..40))
        .map(|_| {
            let chunk = rng.gen_range(0..8);
            if rng.gen_bool(0.6) {
                CsOp::Insert {
                    chunk,
                    solicited: rng.gen_bool(0.5),
                }
            } else {
                CsOp::Lookup { chunk }
            }
        })
        .collect();
    check_cs_rules(&CsCase {
        capacity: rng.gen_range(0..5),
        ops,
    })
}

fn invariants() -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failure = None;
    for i in 0..INVARIANT_CASES {
        let case = random_run_case(&mut rng);
        let outcome = check_run_invariants(&case).and_then(|()| random_node_cases(&mut rng));
        if let Err(e) = outcome {
            failure = Some(format!("case {i}: {e}"));
            break;
        }
    }
    let passed = failure.is_none();
    let detail = failure.unwrap_or_else(|| {
        format!("{INVARIANT_CASES} random networks + {INVARIANT_CASES} node-level cases per family")
    });
    result(7, "invariants", "protocol invariant suite", passed, detail)
}

/// Random legal name with room left for a payload of at least `reserve` bytes.
pub(crate) fn random_name(rng: &mut ChaCha8Rng, max_len: usize) -> Name {
    loop {
        let parts = rng.gen_range(1..=4);
        let components: Vec<Vec<u8>> = (0..parts)
            .map(|_| {
                let len = rng.gen_range(1..=MAX_COMPONENT_LEN.min(12));
                (0..len)
                    .map(|_| loop {
                        let b: u8 = rng.gen();
                        if b != 0 && b != b'/' {
                            break b;
                        }
                    })
                    .collect()
            })
            .collect();
        if let Ok(name) = Name::from_components(components) {
            if name.encoded_len() <= max_len {
                return name;
            }
        }
    }
}

fn random_packet(rng: &mut ChaCha8Rng) -> Packet {
    let name = random_name(rng, MAX_NAME_LEN);
    if rng.gen_bool(0.5) {
        let mut i = Interest::new(name, rng.gen());
        i.flags = rng.gen();
        i.hop_count = rng.gen();
        i.hop_limit = rng.gen();
        Packet::Interest(i)
    } else {
        let len = rng.gen_range(0..=Data::max_payload(&name));
        let payload = (0..len).map(|_| rng.gen()).collect();
        let mut d = Data::new(name, payload);
        d.flags = rng.gen();
        d.hop_count = rng.gen();
        Packet::Data(d)
    }
}

fn wire() -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failure = None;
    for i in 0..WIRE_PACKETS {
        let pkt = random_packet(&mut rng);
        let ok = pkt
            .encode()
            .ok()
            .filter(|f| f.len() == pkt.encoded_len())
            .and_then(|f| Packet::decode(&f).ok())
            .is_some_and(|back| back == pkt);
        if !ok {
            failure = Some(format!("packet {i} did not round-trip: {pkt:?}"));
            break;
        }
    }
    let name = Name::parse("/riot/text/a").expect("static name");
    let data_len = Packet::Data(Data::new(name.clone(), vec![b'x'; CHUNK_PAYLOAD_LEN])).encode().map(|f| f.len());
    let interest_len = Packet::Interest(Interest::new(name, 1)).encode().map(|f| f.len());
    let sizes_ok = data_len == Ok(58) && interest_len == Ok(29);
    let passed = failure.is_none() && sizes_ok;
    let detail = failure.unwrap_or_else(|| {
        format!(
            "{WIRE_PACKETS} packets round-trip, data {} B, interest {} B",
            data_len.map_or(0, |l| l),
            interest_len.map_or(0, |l| l)
        )
    });
    result(8, "wire", "wire round-trip and sizes", passed, detail)
}

/// Runs every criterion in the selected groups (all groups when `only` is empty).
pub fn verify_presets(only: &[String]) -> Result<VerifyReport, ExperimentError> {
    if let Some(bad) = only.iter().find(|g| !VERIFY_GROUPS.contains(&g.as_str())) {
        return Err(ExperimentError::Config(format!(
            "unknown group {bad:?}; expected one of {}",
            VERIFY_GROUPS.join(", ")
        )));
    }
    let selected = |g: &str| only.is_empty() || only.iter().any(|o| o == g);
    let mut means = Means::default();
    let mut report = VerifyReport::default();
    if selected("formulas") {
        report.results.push(formulas());
    }
    if selected("lines") {
        report.results.push(lines(&mut means)?);
    }
    if selected("fig4") {
        report.results.push(fig4(&mut means)?);
    }
    if selected("fig5") {
        report.results.push(fig5_cache(&mut means)?);
        report.results.push(fig5_linear(&mut means)?);
    }
    if selected("fig6") {
        report.results.push(fig6(&mut means)?);
    }
    if selected("invariants") {
        report.results.push(invariants());
    }
    if selected("wire") {
        report.results.push(wire());
    }
    Ok(report)
}
