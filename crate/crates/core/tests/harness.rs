use mtd_core::harness::{
    accuracy, generate_synthetic, load_features, make_plan, run_experiment, write_features, AdaptMethod, Dataset,
    Experiment,
};
use mtd_core::{Execution, SgdConfig, UpdateConfig, Variant};

fn desk() -> (Dataset, Dataset) {
    let data = generate_synthetic(10, 64, 600, 0.35, 7).unwrap();
    data.split_holdout(1.0 / 6.0, 7).unwrap()
}

fn pretrain_cfg() -> SgdConfig {
    SgdConfig::new(0.01, 1e-6, 20, 7).unwrap()
}

#[test]
fn calibrated_spread_gives_mid_accuracy() {
    let (train, eval) = desk();
    assert_eq!(train.len(), 5000);
    assert_eq!(eval.len(), 1000);
    let plan = make_plan(&train, 0.1, 10, 7).unwrap();
    let exp = Experiment::prepare(&train, &plan, &eval, pretrain_cfg(), Execution::default()).unwrap();
    let acc = exp.initial_accuracy().unwrap();
    assert!((0.7..=0.9).contains(&acc), "pretrained accuracy {acc}");
}

#[test]
fn small_epsilon_tracks_fine_tuning() {
    let (train, eval) = desk();
    let plan = make_plan(&train, 0.1, 10, 7).unwrap();
    let exp = Experiment::prepare(&train, &plan, &eval, pretrain_cfg(), Execution::default()).unwrap();
    let mtd = exp
        .run(&AdaptMethod::MoveToData(UpdateConfig::new(1e-4, Variant::Projected).unwrap()))
        .unwrap();
    let ft = exp.run(&AdaptMethod::FineTune(SgdConfig::fine_tune_default())).unwrap();
    assert!((mtd.final_accuracy() - ft.final_accuracy()).abs() <= 0.02);
}

#[test]
fn runs_are_deterministic_apart_from_timing() {
    let (train, eval) = desk();
    let plan = make_plan(&train, 0.1, 10, 3).unwrap();
    for method in [
        AdaptMethod::MoveToData(UpdateConfig::new(1e-3, Variant::Projected).unwrap()),
        AdaptMethod::FineTune(SgdConfig::fine_tune_default()),
    ] {
        let a = run_experiment(&train, &plan, pretrain_cfg(), &method, &eval).unwrap();
        let b = run_experiment(&train, &plan, pretrain_cfg(), &method, &eval).unwrap();
        assert_eq!(a.per_chunk_accuracy, b.per_chunk_accuracy);
        assert_eq!(a.per_chunk_mean_loss, b.per_chunk_mean_loss);
        assert_eq!(a.initial_accuracy, b.initial_accuracy);
    }
}

#[test]
fn timer_covers_only_adaptation() {
    let (train, eval) = desk();
    let plan = make_plan(&train, 0.1, 10, 7).unwrap();
    let exp = Experiment::prepare(&train, &plan, &eval, pretrain_cfg(), Execution::default()).unwrap();
    let mtd = exp
        .run(&AdaptMethod::MoveToData(UpdateConfig::new(1e-4, Variant::Projected).unwrap()))
        .unwrap();
    let noop = exp.run(&AdaptMethod::Identity).unwrap();
    assert_eq!(noop.per_chunk_accuracy, vec![noop.initial_accuracy; 10]);
    assert!(
        noop.wall_time_mean <= 0.05 * mtd.wall_time_mean,
        "identity {} vs mtd {}",
        noop.wall_time_mean,
        mtd.wall_time_mean
    );
}

#[test]
fn accuracy_is_pure_and_worker_independent() {
    let (train, eval) = desk();
    let plan = make_plan(&train, 0.1, 10, 7).unwrap();
    let exp = Experiment::prepare(&train, &plan, &eval, pretrain_cfg(), Execution::Sequential).unwrap();
    let model = exp.pretrained().clone();
    let seq = accuracy(&model, &train, Execution::Sequential).unwrap();
    let par = accuracy(&model, &train, Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    assert_eq!(&model, exp.pretrained());
}

#[test]
fn feature_file_round_trip_on_disk() {
    let (_, eval) = desk();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eval.feat");
    write_features(&eval, std::fs::File::create(&path).unwrap()).unwrap();
    let loaded = load_features(&path).unwrap();
    assert_eq!(loaded.samples(), eval.samples());
    assert_eq!((loaded.classes(), loaded.width()), (10, 64));
}
