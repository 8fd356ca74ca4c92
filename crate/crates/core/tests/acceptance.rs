//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Built without the libtest harness so the lines always show in `cargo test`.

use ndniot::analytics::{multi_nocache_tx, ronr_tx, vif_tx};
use ndniot::experiments::{
    check_cfa_non_increase, check_cs_rules, check_pit_aggregation, check_run_invariants, load_preset, run_scenario,
    CfaCase, CsCase, CsOp, PitCase, Row, RunCase,
};
use ndniot::strategy::Routing;
use ndniot::wire::{Data, Interest, Name, Packet, CHUNK_PAYLOAD_LEN};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

fn report(id: u8, passed: bool, detail: &str) {
    assert!(passed, "criterion {id}: {detail}");
    println!("criterion {id}: PASS {detail}");
}

fn mean_row(preset: &str, scenario: &str) -> Row {
    let s = load_preset(preset)
        .unwrap()
        .scenarios
        .into_iter()
        .find(|s| s.name == scenario)
        .unwrap_or_else(|| panic!("{scenario} not in {preset}"));
    assert_eq!(s.runs, 20, "{scenario} should average 20 seeds");
    let r = run_scenario(&s).unwrap();
    assert!(r.ledgers.iter().all(|l| l.all_succeeded()), "{scenario}: failed transfers");
    r.mean
}

fn status<T, E>(r: &Result<T, E>) -> &'static str {
    if r.is_ok() {
        "ok"
    } else {
        "failed"
    }
}

fn cases(n: u32) -> Config {
    Config {
        failure_persistence: None,
        ..Config::with_cases(n)
    }
}

fn f(r: &num_rational::Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn criterion_1_formula_identities() {
    let mut runner = TestRunner::new(cases(1_000));
    let strategy = (2u64..5_000, 1u64..500, prop::option::of(1u64..100));
    let outcome = runner.run(&strategy, |(n, k, h)| {
        prop_assert_eq!(vif_tx(n, 1, h).unwrap(), ronr_tx(n, 1, h).unwrap());
        prop_assert_eq!(multi_nocache_tx(n, k, 1, h).unwrap(), ronr_tx(n, k, h).unwrap());
        Ok(())
    });
    report(1, outcome.is_ok(), &format!("1000 random inputs, zero tolerance: {}", status(&outcome)));
}

fn criterion_2_simulator_matches_model_on_lines() {
    let preset = load_preset("lines").unwrap();
    let mut checked = 0;
    for s in &preset.scenarios {
        let r = run_scenario(s).unwrap();
        let n = r.mean.n as u64;
        let k = r.mean.k as u64;
        let h = n - 1;
        // hand count: VIF floods every Interest across n - 1 forwarders and
        // returns Data over h hops; RONR floods once, then 2h per chunk
        let expected = match s.routing {
            Routing::Vif => k * ((n - 1) + h),
            Routing::Ronr => (n - 1) + h + (k - 1) * 2 * h,
        };
        let sim = r.mean.tx_total.to_integer();
        assert!(r.mean.tx_total.is_integer());
        assert_eq!(sim, expected, "{}", s.name);
        let model = match s.routing {
            Routing::Vif => vif_tx(n, k, Some(h)).unwrap(),
            Routing::Ronr => ronr_tx(n, k, Some(h)).unwrap(),
        };
        assert_eq!(sim as f64, model, "{}", s.name);
        assert_eq!(r.mean.deviation, Some(0.0), "{}", s.name);
        checked += 1;
    }
    assert_eq!(checked, 18);
    report(2, true, "n in {4,6,10} x k in {5,10,20} x {vif,ronr}: deviation 0");
}

fn criterion_3_reactive_routing_saving() {
    let vif = mean_row("fig4-vif", "fig4-vif-k10");
    let ronr = mean_row("fig4-ronr", "fig4-ronr-k10");
    let ratio = f(&ronr.tx_total) / f(&vif.tx_total);
    let bcast_limit = f(&vif.tx_broadcast) / 10.0 * 1.2;
    let passed = ratio <= 0.6 && f(&ronr.tx_broadcast) <= bcast_limit;
    report(
        3,
        passed,
        &format!(
            "sample10 k=10: ronr/vif tx = {ratio:.3} (<= 0.6); ronr bcast {:.2} <= {bcast_limit:.2}",
            f(&ronr.tx_broadcast)
        ),
    );
}

fn criterion_4_caching_saving() {
    let plain = mean_row("fig5", "fig5-m3-cache0");
    let cached = mean_row("fig5", "fig5-m3-cache20");
    let ratio = f(&cached.tx_total) / f(&plain.tx_total);
    let bcast_dev = f(&cached.tx_broadcast) / f(&plain.tx_broadcast) - 1.0;
    let passed = ratio <= 0.7 && bcast_dev.abs() <= 0.15 && cached.tx_unicast < plain.tx_unicast;
    report(
        4,
        passed,
        &format!(
            "sample20 m=3 k=20: cache/nocache tx = {ratio:.3} (<= 0.7); bcast {:+.1}% (within 15%); ucast {:.1} -> {:.1}",
            bcast_dev * 100.0,
            f(&plain.tx_unicast),
            f(&cached.tx_unicast)
        ),
    );
}

fn criterion_5_linear_scaling_without_cache() {
    let one = f(&mean_row("fig5", "fig5-m1-cache0").tx_total);
    let mut passed = true;
    let mut parts = Vec::new();
    for m in [2u32, 3] {
        let v = f(&mean_row("fig5", &format!("fig5-m{m}-cache0")).tx_total);
        let dev = v / (f64::from(m) * one) - 1.0;
        passed &= dev.abs() <= 0.2;
        parts.push(format!("m={m} {:+.1}%", dev * 100.0));
    }
    report(5, passed, &format!("sample20 no cache vs m x single consumer: {}", parts.join(", ")));
}

fn criterion_6_baseline_gap() {
    let baseline = mean_row("fig6", "fig6-baseline-m3");
    let ndn = mean_row("fig5", "fig5-m3-cache20");
    let factor = f(&baseline.tx_total) / f(&ndn.tx_total);
    report(6, factor >= 1.5, &format!("sample20 m=3 k=20: baseline/ndn-cached = {factor:.2} (>= 1.5)"));
}

fn run_case() -> impl Strategy<Value = RunCase> {
    (
        (1usize..=4, 2usize..=4, prop::sample::select(vec![1.0, 0.9, 0.7, 0.5])),
        (prop::bool::ANY, prop::bool::ANY, prop::bool::ANY, prop::sample::select(vec![0usize, 0, 3, 20])),
        (0usize..16, prop::collection::vec(0usize..16, 1..=3), 0usize..=6, prop::bool::ANY, any::<u64>()),
    )
        .prop_map(|((rows, cols, p), (vif, cfa, onpc, cache), (producer, consumers, chunks, together, seed))| RunCase {
            rows,
            cols,
            p,
            routing: if vif { Routing::Vif } else { Routing::Ronr },
            cfa,
            onpc,
            cache,
            producer,
            consumers,
            chunks,
            together,
            seed,
        })
}

fn cs_case() -> impl Strategy<Value = CsCase> {
    let op = prop_oneof![
        (0u8..8, prop::bool::ANY).prop_map(|(chunk, solicited)| CsOp::Insert { chunk, solicited }),
        (0u8..8).prop_map(|chunk| CsOp::Lookup { chunk }),
    ];
    (0usize..5, prop::collection::vec(op, 0..40)).prop_map(|(capacity, ops)| CsCase { capacity, ops })
}

fn criterion_7_protocol_invariants() {
    let count = 500;
    let mut runner = TestRunner::new(cases(count));
    // dedup, stop-and-go, determinism and conservation over whole networks
    let runs = runner.run(&run_case(), |case| {
        check_run_invariants(&case).map_err(|e| TestCaseError::fail(e.to_string()))
    });
    let pit = runner.run(
        &(prop::bool::ANY, prop::collection::vec((any::<u16>(), 0u64..900), 1..8)),
        |(vif, arrivals)| {
            let routing = if vif { Routing::Vif } else { Routing::Ronr };
            check_pit_aggregation(&PitCase { routing, arrivals }).map_err(|e| TestCaseError::fail(e.to_string()))
        },
    );
    let cfa = runner.run(&prop::collection::vec(any::<u16>(), 1..6), |downstream| {
        check_cfa_non_increase(&CfaCase { downstream }).map_err(|e| TestCaseError::fail(e.to_string()))
    });
    let cs = runner.run(&cs_case(), |case| check_cs_rules(&case).map_err(|e| TestCaseError::fail(e.to_string())));
    let passed = runs.is_ok() && pit.is_ok() && cfa.is_ok() && cs.is_ok();
    report(
        7,
        passed,
        &format!(
            "{count} cases each: networks {}, pit {}, cfa {}, cs {}",
            status(&runs),
            status(&pit),
            status(&cfa),
            status(&cs)
        ),
    );
}

fn name_strategy() -> impl Strategy<Value = Name> {
    let component = prop::collection::vec(any::<u8>().prop_filter("legal", |b| *b != 0 && *b != b'/'), 1..12);
    prop::collection::vec(component, 1..5).prop_filter_map("fits", |cs| Name::from_components(cs).ok())
}

fn packet_strategy() -> impl Strategy<Value = Packet> {
    let interest = (name_strategy(), any::<u32>(), any::<u8>(), any::<u8>(), any::<u8>()).prop_map(
        |(name, nonce, flags, hop_count, hop_limit)| {
            let mut i = Interest::new(name, nonce);
            i.flags = flags;
            i.hop_count = hop_count;
            i.hop_limit = hop_limit;
            Packet::Interest(i)
        },
    );
    let data = (name_strategy(), prop::collection::vec(any::<u8>(), 0..48), any::<u8>(), any::<u8>()).prop_map(
        |(name, mut payload, flags, hop_count)| {
            payload.truncate(Data::max_payload(&name));
            let mut d = Data::new(name, payload);
            d.flags = flags;
            d.hop_count = hop_count;
            Packet::Data(d)
        },
    );
    prop_oneof![interest, data]
}

fn criterion_8_wire_round_trip() {
    let mut runner = TestRunner::new(cases(10_000));
    let outcome = runner.run(&packet_strategy(), |pkt| {
        let frame = pkt.encode().unwrap();
        prop_assert!(frame.len() <= 64);
        prop_assert_eq!(Packet::decode(&frame).unwrap(), pkt);
        Ok(())
    });
    let name = Name::parse("/riot/text/a").unwrap();
    let data = Packet::Data(Data::new(name.clone(), vec![b'x'; CHUNK_PAYLOAD_LEN])).encode().unwrap();
    let interest = Packet::Interest(Interest::new(name, 7)).encode().unwrap();
    let passed = outcome.is_ok() && data.len() == 58 && interest.len() == 29;
    report(
        8,
        passed,
        &format!(
            "10000 random packets round-trip {}; data {} B (58), interest {} B (29)",
            status(&outcome),
            data.len(),
            interest.len()
        ),
    );
}

fn main() {
    let criteria: [(u8, fn()); 8] = [
        (1, criterion_1_formula_identities),
        (2, criterion_2_simulator_matches_model_on_lines),
        (3, criterion_3_reactive_routing_saving),
        (4, criterion_4_caching_saving),
        (5, criterion_5_linear_scaling_without_cache),
        (6, criterion_6_baseline_gap),
        (7, criterion_7_protocol_invariants),
        (8, criterion_8_wire_round_trip),
    ];
    let mut failed = Vec::new();
    for (id, check) in criteria {
        if std::panic::catch_unwind(check).is_err() {
            println!("criterion {id}: FAIL");
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
