use mdplearn::benchmarks::{build_slot_machine, toy_model, SlotConfig, Variant};
use mdplearn::experiment::{SLOT_DATASET_SIZES, SLOT_GEOMETRIC_P};
use mdplearn::tracegen::{generate, sequence_rng, GenConfig};
use rand_distr::{Distribution, Geometric};

#[test]
fn inputs_are_uniform() {
    let m = toy_model();
    let d = generate(&m, &GenConfig::new(20_000, 0.1, 5)).unwrap();
    let mut counts = vec![0usize; m.inputs().len()];
    for s in &d.sequences {
        for &(a, _) in &s.steps {
            counts[a] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    for c in counts {
        let frac = c as f64 / total as f64;
        assert!((frac - 0.5).abs() < 0.01, "input share {frac}");
    }
}

#[test]
fn mean_length_matches_geometric_p() {
    let m = toy_model();
    for p in [0.05, 0.2, 0.5] {
        let d = generate(&m, &GenConfig::new(50_000, p, 9)).unwrap();
        let mean = d.num_steps() as f64 / d.len() as f64;
        assert!((mean - 1.0 / p).abs() < 0.03 / p, "p {p}: mean {mean}");
        assert!(d.sequences.iter().all(|s| !s.steps.is_empty()));
    }
}

#[test]
fn long_tail_is_sampled() {
    let g = Geometric::new(0.5).unwrap();
    let mut rng = sequence_rng(11, 0);
    let longest = (0..100_000).map(|_| 1 + g.sample(&mut rng)).max().unwrap();
    assert!(longest >= 14, "longest {longest}");
}

#[test]
fn generated_traces_have_positive_probability() {
    let m = toy_model();
    let d = generate(&m, &GenConfig::new(2_000, 0.1, 2)).unwrap();
    for s in &d.sequences {
        assert!(m.string_probability(s).unwrap() > 0.0);
    }
}

#[test]
fn slot_dataset_size() {
    let m = build_slot_machine(SlotConfig::new(4, Variant::Deterministic)).unwrap();
    let (_, n) = SLOT_DATASET_SIZES[0];
    let d = generate(&m, &GenConfig::new(n, SLOT_GEOMETRIC_P, 1)).unwrap();
    let symbols = d.num_symbols() as f64;
    assert!((symbols - 160_000.0).abs() <= 16_000.0, "symbols {symbols}");
}

#[test]
fn thread_count_does_not_change_output() {
    let m = toy_model();
    let cfg = GenConfig::new(3_000, 0.1, 42);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let single = pool.install(|| generate(&m, &cfg).unwrap());
    let default = generate(&m, &cfg).unwrap();
    assert_eq!(single, default);
    assert_eq!(single.to_text(), default.to_text());
}
