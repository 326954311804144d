use dbound::experiments::{optimize, OptimizeRequest};
use dbound::simkit::{Engine, ExperimentConfig};
use dbound_core::baselines::ProtocolId;
use dbound_core::noise::NoiseModel;
use dbound_core::scenario::Role;

#[test]
fn histograms_do_not_depend_on_worker_count() {
    let mut cfg = ExperimentConfig::new(ProtocolId::Ours, 20);
    cfg.p_f = 0.04;
    cfg.p_b = 0.01;
    let s = cfg.scenario(Role::Honest).unwrap();
    let one = Engine::new(1)
        .unwrap()
        .histograms(&s, 20, 9_000, 77)
        .unwrap();
    let many = Engine::new(8)
        .unwrap()
        .histograms(&s, 20, 9_000, 77)
        .unwrap();
    assert_eq!(one, many);
}

#[test]
fn optimizer_json_is_byte_identical() {
    let req = OptimizeRequest::new(
        ProtocolId::Ours,
        16,
        NoiseModel::new(0.02, 0.02).unwrap(),
        0.05,
        6_000,
        42,
    );
    let run =
        |w| serde_json::to_string(&optimize(&req, &Engine::new(w).unwrap()).unwrap()).unwrap();
    assert_eq!(run(1), run(8));
}

#[test]
fn different_seeds_differ() {
    let cfg = ExperimentConfig::new(ProtocolId::Hk, 12);
    let s = cfg.scenario(Role::Adversary(cfg.adversary)).unwrap();
    let e = Engine::new(2).unwrap();
    let a = e.count_accepted(&s, 0, 1, 20_000, 1).unwrap();
    let b = e.count_accepted(&s, 0, 1, 20_000, 2).unwrap();
    assert_ne!(a, b);
}
