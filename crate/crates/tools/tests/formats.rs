use std::io::BufReader;

use ensemble_cma::harness::run_once;
use ensemble_cma::problems::{generate_field, FieldParams, ProxyParams};
use ensemble_cma::seed::{self, tag};
use ensemble_cma::{OptimizerState, ProblemSpec, RunConfig};
use ensemble_cma_tools::{archive_io, campaign, config, field_io, state_io, trace_io};
use proptest::prelude::*;

fn small_config(text: &str) -> RunConfig {
    config::from_text(text, &[]).unwrap()
}

#[test]
fn versioned_proxy_defaults_match_the_code() {
    let text = include_str!("../defaults/npv_proxy_v1.conf");
    let c = config::from_text(text, &[]).unwrap();
    let expected = ProxyParams {
        seed: seed::derive(0, &[tag::PROBLEM]),
        ..ProxyParams::default()
    };
    assert_eq!(c.problem, ProblemSpec::NpvProxy(expected));
}

#[test]
fn trace_round_trip() {
    let cfg = small_config("budget=1500\nverify=every_generation\nruns=2\nseed=4");
    let (cfg, problem) = campaign::resolve(&cfg).unwrap();
    let outcomes = campaign::run_parallel(&cfg, problem.as_ref()).unwrap();
    for o in &outcomes {
        let mut buf = Vec::new();
        trace_io::write_trace(&mut buf, &cfg, &o.trace).unwrap();
        let file = trace_io::read_trace(BufReader::new(buf.as_slice())).unwrap();
        assert_eq!(file.config().unwrap(), cfg);
        let back = file.to_run_trace().unwrap();
        assert_eq!(back.rows, o.trace.rows);
        assert_eq!(back.best_estimated_point, o.trace.best_estimated_point);
        assert_eq!(back.best_verified_point, o.trace.best_verified_point);
        assert_eq!(
            (back.run_id, back.run_seed),
            (o.trace.run_id, o.trace.run_seed)
        );
        assert!(file.is_complete());
        // best_verified re-checked from the footer and the header's problem
        let p = file.config().unwrap().problem.build().unwrap();
        let pr = file.p_max_r().unwrap().unwrap();
        assert_eq!(
            p.ensemble_mean(&pr).unwrap(),
            back.final_best_verified().unwrap()
        );
    }
}

#[test]
fn incomplete_traces_say_so() {
    let cfg = small_config("budget=500");
    let (cfg, problem) = campaign::resolve(&cfg).unwrap();
    let mut o = run_once(&cfg, problem.as_ref(), 0).unwrap();
    o.trace.failure = Some("solver\ndiverged".into());
    let mut buf = Vec::new();
    trace_io::write_trace(&mut buf, &cfg, &o.trace).unwrap();
    let file = trace_io::read_trace(BufReader::new(buf.as_slice())).unwrap();
    assert!(!file.is_complete());
    assert_eq!(
        file.to_run_trace().unwrap().failure.as_deref(),
        Some("solver diverged")
    );
}

#[test]
fn malformed_traces_are_rejected() {
    for text in [
        "",
        "# format=ensemble-cma-trace/1\n",
        "# format=other\nrun_id,generation,cumulative_estimation_sims,cumulative_verification_sims,best_estimate,best_verified,sigma,neighbors_used_mean\n",
        "# format=ensemble-cma-trace/1\nrun_id,generation,cumulative_estimation_sims,cumulative_verification_sims,best_estimate,best_verified,sigma,neighbors_used_mean\n0,1,2\n",
    ] {
        assert!(trace_io::read_trace(BufReader::new(text.as_bytes())).is_err(), "{text:?}");
    }
}

#[test]
fn archive_round_trip() {
    let cfg = small_config("budget=900\nstrategy=neighborhood");
    let (cfg, problem) = campaign::resolve(&cfg).unwrap();
    let o = run_once(&cfg, problem.as_ref(), 0).unwrap();
    let mut buf = Vec::new();
    archive_io::write_archive(&mut buf, &o.archive).unwrap();
    let header = String::from_utf8(buf.clone()).unwrap();
    assert!(header.starts_with("record_id,generation,realization_id,value,coord_0,"));
    let back = archive_io::read_archive(buf.as_slice()).unwrap();
    assert_eq!(back, o.archive);
    assert_eq!(back.count_simulations(), o.trace.total_sims());
}

#[test]
fn archive_load_rejects_bad_columns() {
    assert!(archive_io::read_archive("id,generation\n".as_bytes()).is_err());
    assert!(archive_io::read_archive(
        "record_id,generation,realization_id,value,coord_1\n0,0,1,1.0,2.0\n".as_bytes()
    )
    .is_err());
    assert!(archive_io::read_archive(
        "record_id,generation,realization_id,value,coord_0\n0,0,0,1.0,2.0\n".as_bytes()
    )
    .is_err());
}

fn sphere(x: &[f64]) -> f64 {
    -x.iter().map(|v| v * v).sum::<f64>()
}

fn advance(s: &mut OptimizerState, generations: usize) {
    for _ in 0..generations {
        let pop = s.ask().unwrap();
        let fit: Vec<f64> = pop.iter().map(|x| sphere(x)).collect();
        s.tell(&pop, &fit, true).unwrap();
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn state_text_round_trip(seed_value in any::<u64>(), n in 1usize..8, lambda in 2usize..20, g in 0usize..30) {
        let mut s = OptimizerState::new(n, &vec![1.5; n], 0.8, lambda, seed_value).unwrap();
        advance(&mut s, g);
        let text = state_io::to_text(&s);
        let mut back = state_io::from_text(&text).unwrap();
        prop_assert_eq!(state_io::to_text(&back), text);
        prop_assert_eq!(back.snapshot(), s.snapshot());
        advance(&mut s, 3);
        advance(&mut back, 3);
        prop_assert_eq!(state_io::to_text(&back), state_io::to_text(&s));
    }
}

#[test]
fn identical_inputs_give_identical_state_text() {
    let run = || {
        let mut s = OptimizerState::new(12, &[3.0; 12], 2.0, 40, 31).unwrap();
        advance(&mut s, 80);
        state_io::to_text(&s)
    };
    assert_eq!(run(), run());
}

#[test]
fn state_text_rejects_damage() {
    let s = OptimizerState::new(2, &[0.0, 0.0], 1.0, 4, 1).unwrap();
    let text = state_io::to_text(&s);
    assert!(
        state_io::from_text(&text.replace("format=ensemble-cma-state/1", "format=v0")).is_err()
    );
    assert!(state_io::from_text(&text.replace("sigma=1.0", "")).is_err());
    assert!(state_io::from_text(&format!("{text}extra=1\n")).is_err());
    assert!(state_io::from_text(&text.replace("mean=0.0,0.0", "mean=0.0")).is_err());
}

#[test]
fn field_grid_export() {
    let params = FieldParams {
        nx: 5,
        ny: 3,
        correlation_cells: 1.0,
        ..FieldParams::default()
    };
    let f = generate_field(&params, 2, 1).unwrap();
    let mut buf = Vec::new();
    field_io::write_field(&mut buf, &f).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 3);
    for (iy, row) in rows.iter().enumerate() {
        let cells: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells.len(), 5);
        for (ix, v) in cells.iter().enumerate() {
            assert_eq!(*v, f.at(ix, iy));
        }
    }
    assert!(text.contains("# nx=5\n# ny=3\n"));
}
