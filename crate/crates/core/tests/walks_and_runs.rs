use agas_core::experiments::{self, ExperimentConfig, ExperimentKind, LatticeSpec};
use agas_core::graph::build_lattice_window;
use agas_core::walks::{loop_erased_walk, max_displacement_ratio, EmbeddedGraph, LatticeBox};
use agas_core::{rng, Beta};

#[test]
fn loop_erased_walk_is_self_avoiding_and_ends_on_target() {
    let g = build_lattice_window(2, 9, false).unwrap();
    let mut r = rng::from_seed(2);
    let target = [0usize, 8, 72, 80];
    for start in [40, 13, 66] {
        let path = loop_erased_walk(&g, start, &target, &mut r).unwrap();
        assert_eq!(path[0], start);
        assert!(target.contains(path.last().unwrap()));
        let mut seen = path.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), path.len());
    }
}

#[test]
fn implicit_box_and_materialised_window_agree_in_law() {
    // independent seeds, so agreement is only statistical
    let g = build_lattice_window(2, 41, false).unwrap();
    let e = EmbeddedGraph::new(&g).unwrap();
    let bx = LatticeBox::new(2, 41).unwrap();
    let a = max_displacement_ratio(&bx, bx.center(), 64, 4000, 1).unwrap();
    let b = max_displacement_ratio(&e, bx.center(), 64, 4000, 2).unwrap();
    assert!((a.mean - b.mean).abs() < 4.0 * (a.stderr + b.stderr), "{a:?} {b:?}");
}

#[test]
fn run_writes_csv_and_record() {
    let dir = std::env::temp_dir().join(format!("agas-run-{}", std::process::id()));
    let mut c = ExperimentConfig::new(ExperimentKind::TorusSweep, dir.join("sweep").to_string_lossy());
    c.lattice = Some(LatticeSpec { dim: 2, side: 6, torus: true });
    c.beta = vec![Beta::Finite(1.0), Beta::Infinite];
    c.samples = Some(16);
    c.sweeps = Some(20);
    let record = experiments::run(&c).unwrap();
    assert!(record.passed);
    let csv = std::fs::read_to_string(c.csv_path()).unwrap();
    assert!(csv.starts_with("beta,samples,r,largest_fraction_mean"));
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(c.meta_path()).unwrap()).unwrap();
    assert_eq!(meta["config"]["kind"], "torus-sweep");
    assert_eq!(meta["rng_algorithm"], rng::RNG_ALGORITHM);
    assert!(meta["wall_time"].as_f64().is_some());
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn oversized_oracle_request_is_a_resource_error() {
    let mut c = ExperimentConfig::new(ExperimentKind::ExactLaw, "unused");
    c.lattice = Some(LatticeSpec { dim: 2, side: 5, torus: false });
    c.beta = vec![Beta::Finite(1.0)];
    assert!(matches!(experiments::execute(&c), Err(agas_core::Error::ResourceLimit(_))));
}
