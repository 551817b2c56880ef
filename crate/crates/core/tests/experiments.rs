use heisenberg_core::exec;
use heisenberg_core::experiments::{
    heat_kernel_table, norm_table, rho_table, run_hls, run_inequality_suite, run_morrey_boundedness, write_csv, Experiment, ExperimentConfig, Record,
};

fn small(exp: Experiment) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults_for(exp);
    cfg.functions.count = 4;
    cfg.balls.count = 16;
    cfg.inequalities.samples = 100;
    cfg.inequalities.annulus_samples = 500;
    cfg
}

fn csv(records: &[Record]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, records).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn tables_have_one_row_per_input() {
    let cfg = small(Experiment::HeatKernel);
    let heat = heat_kernel_table(&cfg).unwrap();
    assert!(heat.len() >= cfg.heat_kernel.times.len() * cfg.heat_kernel.points.len());
    assert!(heat.iter().all(|r| r.value.is_some_and(f64::is_finite)));

    let cfg = small(Experiment::Rho);
    let rho = rho_table(&cfg).unwrap();
    assert_eq!(rho.len(), cfg.rho.points.len());
    assert!(rho.iter().all(|r| r.value.is_some_and(|v| v > 0.0)));

    let cfg = small(Experiment::Norm);
    let norms = norm_table(&cfg).unwrap();
    assert_eq!(norms.len(), cfg.norm.spaces.len());
}

#[test]
fn csv_starts_with_a_versioned_header() {
    let text = csv(&rho_table(&small(Experiment::Rho)).unwrap());
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("schema,experiment,kind"), "{header}");
    let first = text.lines().nth(1).unwrap();
    assert!(first.starts_with("hmorrey-csv/1,rho,rho,"), "{first}");
    assert_eq!(csv(&[]).lines().count(), 1);
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let cfg = small(Experiment::Inequalities);
    let par = csv(&run_inequality_suite(&cfg).unwrap().records());
    exec::set_sequential(true);
    let seq = csv(&run_inequality_suite(&cfg).unwrap().records());
    let morrey_seq = csv(&run_morrey_boundedness(&small(Experiment::ThmMorrey)).unwrap().records());
    exec::set_sequential(false);
    let morrey_par = csv(&run_morrey_boundedness(&small(Experiment::ThmMorrey)).unwrap().records());
    assert_eq!(par, seq);
    assert_eq!(morrey_par, morrey_seq);
}

#[test]
fn ratios_are_finite_and_positive() {
    let report = run_morrey_boundedness(&small(Experiment::ThmMorrey)).unwrap();
    assert!(!report.rows.is_empty());
    assert!(report.rows.iter().all(|r| r.ratio.is_finite() && r.ratio > 0.0));
    assert!(report.max_ratio().is_finite());
}

#[test]
fn config_round_trips_through_json() {
    for exp in [Experiment::ThmMorrey, Experiment::Hls, Experiment::Norm, Experiment::Inequalities] {
        let mut cfg = small(exp);
        cfg.seed = 77;
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(exp, &text).unwrap(), cfg);
    }
    let partial = ExperimentConfig::from_json(
        Experiment::ThmMorrey,
        r#"{"balls": {"count": 5}, "norm": {"domain": {"center": [1, 2, 3], "radius": 2}}}"#,
    )
    .unwrap();
    assert_eq!(partial.balls.count, 5);
    assert_eq!(partial.balls.r_max, ExperimentConfig::default().balls.r_max);
    assert_eq!(partial.norm.domain.center.coords(), &[1.0, 2.0, 3.0]);
    assert!(ExperimentConfig::from_json(Experiment::ThmMorrey, r#"{"seeed": 1}"#).is_err());
    assert!(ExperimentConfig::from_json(Experiment::ThmMorrey, "[]").is_err());
}

#[test]
fn critical_hls_exponent_is_rejected() {
    // 1/q = 1/p − α/Q = 0 for α = 2, p = 2 on the first Heisenberg group.
    let mut cfg = small(Experiment::Hls);
    cfg.alpha = 2.0;
    cfg.p = 2.0;
    assert!(run_hls(&cfg).is_err());
    let mut cfg = small(Experiment::ThmMorrey);
    cfg.kappa = 0.9;
    assert!(run_morrey_boundedness(&cfg).is_err());
}
