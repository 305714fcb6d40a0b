use shelab::config::{Experiment, ExperimentConfig};
use shelab::harness::{run_experiment, Executor, Report};
use shelab::shape::Shape;

fn small(experiment: Experiment) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(experiment);
    c.seed = 21;
    c.replicas = 40;
    c.output_times = vec![0.02, 0.05];
    c.moments.times = vec![0.01, 0.02, 0.03, 0.04];
    c.noise.lambdas = vec![0.0, 0.5];
    c.model.eps_jump = 1e-2;
    c.gronwall.gammas = vec![0.3, 0.9];
    c.gronwall.cs = vec![2.0];
    c.gronwall.oracle_nodes = 200;
    c
}

const ALL: [Experiment; 7] = [
    Experiment::NoiseCheck,
    Experiment::SheMean,
    Experiment::PdeConvergence,
    Experiment::SamplerCheck,
    Experiment::DualityGap,
    Experiment::MomentsMartingale,
    Experiment::Gronwall,
];

#[test]
fn reports_round_trip_through_json() {
    let exec = Executor::new(2).unwrap();
    for e in ALL {
        let report = run_experiment(&small(e), &exec).unwrap();
        let text = serde_json::to_string(&report).unwrap();
        let back: Report = serde_json::from_str(&text).unwrap();
        assert_eq!(report, back, "{}", e.name());
        assert_eq!(text, serde_json::to_string(&back).unwrap());
        let table = report.table();
        assert!(table.rows.iter().all(|r| r.len() == table.columns.len()));
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let one = Executor::new(1).unwrap();
    let three = Executor::new(3).unwrap();
    for e in [Experiment::DualityGap, Experiment::SheMean, Experiment::SamplerCheck] {
        let c = small(e);
        assert_eq!(run_experiment(&c, &one).unwrap(), run_experiment(&c, &three).unwrap(), "{}", e.name());
    }
}

#[test]
fn seed_changes_results() {
    let exec = Executor::new(2).unwrap();
    let a = run_experiment(&small(Experiment::DualityGap), &exec).unwrap();
    let mut c = small(Experiment::DualityGap);
    c.seed += 1;
    let b = run_experiment(&c, &exec).unwrap();
    assert_ne!(a, b);
}

#[test]
fn gap_with_zero_psi_is_exactly_zero() {
    let mut c = small(Experiment::DualityGap);
    c.psi = Shape::Zero;
    let Report::DualityGap(r) = run_experiment(&c, &Executor::new(2).unwrap()).unwrap() else {
        panic!("wrong report kind");
    };
    for g in &r.reports {
        assert_eq!((g.y_side.estimate, g.z_side.estimate, g.gap), (1.0, 1.0, 0.0));
    }
}

#[test]
fn invalid_config_is_rejected_before_running() {
    let mut c = small(Experiment::SheMean);
    c.model.beta = 0.5;
    assert!(run_experiment(&c, &Executor::new(1).unwrap()).is_err());
}
