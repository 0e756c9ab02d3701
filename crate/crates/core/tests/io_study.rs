use endo_robust::io::{InstanceFile, Instance};
use endo_robust::knapsack::{generate_knapsack_instance, KnapsackParams};
use endo_robust::preferences::PreferenceKind;
use endo_robust::robust::SolveOptions;
use endo_robust::spp::{example_three_regimes, generate_instance, Flavor, GeneratorKind, GeneratorParams};
use endo_robust::study::{
    epsilon_sweep, format_number, normalize, read_results, tradeoff, Attribute, StudyInstance, SweepConfig,
    TradeoffConfig,
};
use endo_robust::Error;
use proptest::prelude::*;

#[test]
fn spp_files_round_trip() {
    let inst = generate_instance(&GeneratorParams::new(GeneratorKind::BilevelBox, 8, 2, 3).with_box_dim(2)).unwrap();
    let file = InstanceFile::from_spp(&inst);
    let parsed = InstanceFile::parse(&file.to_json()).unwrap();
    assert_eq!(parsed, file);
    assert_eq!(parsed.digest(), file.digest());
    let Instance::Spp(back) = parsed.to_instance().unwrap() else { panic!("spp expected") };
    assert_eq!(back.arcs(), inst.arcs());
    assert_eq!(back.regimes(), inst.regimes());
}

#[test]
fn knapsack_files_round_trip() {
    let k = generate_knapsack_instance(&KnapsackParams { items: 5, budget: 2, capacity: 6.0, regimes: 2 }, 1).unwrap();
    let file = InstanceFile::from_knapsack(&k);
    let Instance::Knapsack(back) = InstanceFile::parse(&file.to_json()).unwrap().to_instance().unwrap() else {
        panic!("knapsack expected")
    };
    assert_eq!(back, k);
}

#[test]
fn digests_track_content() {
    let a = InstanceFile::from_spp(&example_three_regimes());
    let mut inst = generate_instance(&GeneratorParams::new(GeneratorKind::BilevelInterval, 6, 2, 0)).unwrap();
    let b = InstanceFile::from_spp(&inst);
    assert_ne!(a.digest(), b.digest());
    inst = generate_instance(&GeneratorParams::new(GeneratorKind::BilevelInterval, 6, 2, 0)).unwrap();
    assert_eq!(InstanceFile::from_spp(&inst).digest(), b.digest());
}

#[test]
fn parse_errors_carry_positions_and_fields() {
    let err = InstanceFile::parse("{\n  \"type\": \"spp\",\n  \"nodes\": \"x\"\n}").unwrap_err();
    let Error::InvalidInput(msg) = err else { panic!("invalid input expected") };
    assert!(msg.contains("line 3"), "{msg}");

    let mut json: serde_json::Value = serde_json::from_str(&InstanceFile::from_spp(&example_three_regimes()).to_json()).unwrap();
    json["extra"] = serde_json::json!(1);
    let err = InstanceFile::parse(&json.to_string()).unwrap_err();
    assert!(err.to_string().contains("extra"), "{err}");

    json.as_object_mut().unwrap().remove("extra");
    json["regimes"][1].as_object_mut().unwrap().remove("upper");
    let err = InstanceFile::parse(&json.to_string()).unwrap().to_instance().unwrap_err();
    assert!(err.to_string().contains("regimes[1].upper"), "{err}");

    json["type"] = serde_json::json!("lp");
    assert!(InstanceFile::parse(&json.to_string()).is_err());
}

proptest! {
    #[test]
    fn formatted_numbers_keep_twelve_digits(v in prop_oneof![-1e6..1e6f64, -1e-3..1e-3f64, -1e20..1e20f64]) {
        let s = format_number(v);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - v).abs() <= 1e-11 * v.abs().max(1e-300), "{} -> {}", v, s);
        prop_assert!(!s.contains('e') || v.abs() >= 1e15 || v.abs() < 1e-6);
    }
}

#[test]
fn formatting_examples() {
    assert_eq!(format_number(4.0), "4");
    assert_eq!(format_number(0.1), "0.1");
    assert_eq!(format_number(-2.5), "-2.5");
    assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
    assert_eq!(format_number(-0.0), "0");
}

#[test]
fn normalization_handles_flat_and_missing_values() {
    assert_eq!(normalize(&[Some(1.0), Some(3.0), None]), vec![Some(0.0), Some(1.0), None]);
    assert_eq!(normalize(&[Some(2.0), Some(2.0)]), vec![None, None]);
}

fn study(n: usize) -> Vec<StudyInstance<endo_robust::robust::EndogenousProblem>> {
    (0..n as u64)
        .map(|seed| {
            let inst = generate_instance(&GeneratorParams::new(GeneratorKind::EpsilonStudy, 12, 3, seed)).unwrap();
            let digest = InstanceFile::from_spp(&inst).digest();
            StudyInstance { id: format!("i{seed}"), digest, problem: inst.build_problem(Flavor::Interval).unwrap() }
        })
        .collect()
}

#[test]
fn sweep_csv_round_trips_and_repeats_exactly() {
    let instances = study(3);
    let mut cfg = SweepConfig::standard(SolveOptions::default());
    cfg.grid = vec![0.0, 0.05, 0.1];
    let a = epsilon_sweep(&instances, &cfg);
    let b = epsilon_sweep(&instances, &cfg);
    let (mut ba, mut bb) = (Vec::new(), Vec::new());
    a.write_rows(&mut ba).unwrap();
    b.write_rows(&mut bb).unwrap();
    assert_eq!(ba, bb);
    let (header, rows) = read_results(ba.as_slice()).unwrap();
    assert_eq!(header, a.header);
    let mut again = Vec::new();
    endo_robust::study::write_results(&mut again, &header, &rows).unwrap();
    assert_eq!(again, ba);
    assert_eq!(rows.len(), 3 * 3 * 3);
    assert!(rows.iter().all(|r| r.status == "ok" && r.time_seconds.is_none()));
}

#[test]
fn tradeoff_reports_extremes_and_solutions() {
    let instances = study(2);
    let cfg = TradeoffConfig {
        pair: (Attribute::WorstCase, Attribute::Preference(PreferenceKind::BestCase)),
        probes: 4,
        weights_seed: 5,
        include_extremes: true,
        record_times: false,
        options: SolveOptions::default(),
    };
    let r = tradeoff(&instances, &cfg).unwrap();
    assert_eq!(r.rows.len(), 8);
    assert_eq!(r.solutions.len(), 8);
    assert_eq!(r.rows[0].epsilon_or_alpha, "1|0");
    assert_eq!(r.rows[1].epsilon_or_alpha, "0|1");
    assert!(r.summary.trade_offs <= 2);
    assert!(r.summary.delta_1 >= 0.0 && r.summary.delta_2 >= 0.0);
    let same = TradeoffConfig { pair: (Attribute::WorstCase, Attribute::WorstCase), ..cfg };
    assert!(tradeoff(&instances, &same).is_err());
}
