use hbsae::simulation::{generate_population, generate_responses, population_fgt, run_study, SimConfig};
use hbsae::Purpose;

fn small() -> SimConfig {
    SimConfig {
        replicates: 4,
        draws: 200,
        grid_size: 200,
        ..SimConfig::preset("smoke").unwrap()
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn study_is_independent_of_thread_count() {
    let config = small();
    let one = in_pool(1, || run_study(&config).unwrap());
    let three = in_pool(3, || run_study(&config).unwrap());
    assert_eq!(one, three);
    assert_eq!(one.replicates, 4);
    assert_eq!(one.indicators.len(), 2);
}

#[test]
fn seed_changes_the_study() {
    let a = run_study(&small()).unwrap();
    let b = run_study(&SimConfig { seed: 99, ..small() }).unwrap();
    assert_ne!(a, b);
}

#[test]
fn incidence_near_target() {
    for seed in [1, 2, 3] {
        let config = SimConfig {
            seed,
            ..SimConfig::preset("paper-s5-scaled").unwrap()
        };
        let root = config.root();
        let pop = generate_population(&config, &root.purpose(Purpose::Covariates)).unwrap();
        let ys = generate_responses(&config, &pop, &root.purpose(Purpose::Responses));
        let f0 = population_fgt(&ys, 0.0, config.poverty_line);
        assert!((0.12..0.20).contains(&f0), "seed {seed}: incidence {f0}");
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let mut c = small();
    c.sample_sizes[0] = 1000;
    assert!(run_study(&c).is_err());
    let c = SimConfig { replicates: 0, ..small() };
    assert!(run_study(&c).is_err());
}
