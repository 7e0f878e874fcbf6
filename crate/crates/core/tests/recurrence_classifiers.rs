use proptest::prelude::*;
use seqclass::classifiers::{esc_classify, ml_classify, vl_classify, ClassifierParams};
use seqclass::divergence::{kl_divergence_n, Method};
use seqclass::recurrence::{capped_measure, RecurrenceIndex, TrainingLayout};
use seqclass::seed;
use seqclass::sources::{Alphabet, MarkovSource, SourceModel};

fn brute_first(blocks: &[Vec<u8>], z: &[u8]) -> Option<usize> {
    let n = blocks[0].len();
    blocks.iter().enumerate().find_map(|(j, b)| {
        b.windows(z.len())
            .position(|w| w == z)
            .map(|i| j * n + i + 1)
    })
}

fn brute_match(blocks: &[Vec<u8>], z: &[u8], start: usize, l_max: usize) -> usize {
    let mut best = 0;
    for l in 1..=l_max.min(z.len() - start) {
        let p = &z[start..start + l];
        if blocks.iter().any(|b| b.windows(l).any(|w| w == p)) {
            best = l;
        } else {
            break;
        }
    }
    best
}

fn instance() -> impl Strategy<Value = (u8, Vec<Vec<u8>>, Vec<u8>)> {
    (2u8..=5, 1usize..=4, 1usize..=24).prop_flat_map(|(a, k, n)| {
        (
            Just(a),
            prop::collection::vec(prop::collection::vec(0..a, n), k),
            prop::collection::vec(0..a, 1..=10),
        )
    })
}

proptest! {
    #[test]
    fn index_matches_brute_force((a, blocks, z) in instance()) {
        let refs: Vec<&[u8]> = blocks.iter().map(|b| b.as_slice()).collect();
        let idx = RecurrenceIndex::new(Alphabet::new(a as usize).unwrap(), &refs).unwrap();
        prop_assert_eq!(idx.recurrence_time(&z), brute_first(&blocks, &z));
        for start in 0..z.len() {
            let l_max = z.len() - start;
            prop_assert_eq!(idx.match_length(&z, start, l_max), brute_match(&blocks, &z, start, l_max));
        }
        let cap = blocks[0].len();
        let m = idx.empirical_measure(&z, cap);
        prop_assert!(m >= 1.0 / cap as f64 && m <= 1.0);
    }

    #[test]
    fn more_blocks_never_shorten_matches((a, blocks, z) in instance()) {
        let refs: Vec<&[u8]> = blocks.iter().map(|b| b.as_slice()).collect();
        let alphabet = Alphabet::new(a as usize).unwrap();
        let first = RecurrenceIndex::new(alphabet, &refs[..1]).unwrap();
        let all = RecurrenceIndex::new(alphabet, &refs).unwrap();
        prop_assert!(all.match_length(&z, 0, z.len()) >= first.match_length(&z, 0, z.len()));
    }
}

#[test]
fn random_64_symbol_blocks_match_brute_force() {
    let mut rng = seed::rng(64);
    use rand::Rng;
    let blocks: Vec<Vec<u8>> = (0..3)
        .map(|_| (0..64).map(|_| rng.gen_range(0..2)).collect())
        .collect();
    let refs: Vec<&[u8]> = blocks.iter().map(|b| b.as_slice()).collect();
    let idx = RecurrenceIndex::new(Alphabet::BINARY, &refs).unwrap();
    for _ in 0..200 {
        let len = rng.gen_range(1..=10);
        let z: Vec<u8> = (0..len).map(|_| rng.gen_range(0..2)).collect();
        assert_eq!(idx.recurrence_time(&z), brute_first(&blocks, &z));
    }
}

#[test]
fn avg_match_length_matches_double_loop() {
    let src: SourceModel = MarkovSource::bernoulli(0.4).unwrap().into();
    let layout = TrainingLayout::new(3, 100, 5).unwrap();
    let x = src.sample(layout.n_bar(), 3);
    let (idx, z) = RecurrenceIndex::from_sequence(Alphabet::BINARY, x.as_slice(), layout).unwrap();
    let blocks: Vec<Vec<u8>> = (0..3)
        .map(|j| x.as_slice()[layout.block_range(j)].to_vec())
        .collect();
    let l_max = 9;
    let brute: usize = (0..z.len() - l_max)
        .map(|i| brute_match(&blocks, z, i, l_max))
        .sum();
    let expected = brute as f64 / (z.len() - l_max) as f64;
    assert_eq!(idx.avg_match_length(z, l_max).unwrap(), expected);
}

#[test]
fn large_alphabet_index() {
    let a = Alphabet::new(256).unwrap();
    let mut rng = seed::rng(9);
    use rand::Rng;
    let blocks: Vec<Vec<u8>> = (0..2)
        .map(|_| (0..300).map(|_| rng.gen_range(0..=20u8) * 12).collect())
        .collect();
    let refs: Vec<&[u8]> = blocks.iter().map(|b| b.as_slice()).collect();
    let idx = RecurrenceIndex::new(a, &refs).unwrap();
    for start in 0..280 {
        let z = &blocks[1][start..start + 3];
        assert_eq!(idx.recurrence_time(z), brute_first(&blocks, z));
    }
    assert_eq!(
        capped_measure(idx.recurrence_time(&[1, 2]), 300),
        1.0 / 300.0
    );
}

fn ber(p: f64) -> SourceModel {
    MarkovSource::bernoulli(p).unwrap().into()
}

#[test]
fn ml_statistic_mean_tracks_divergence() {
    let (p, q) = (ber(0.5), ber(0.2));
    let n = 16;
    let d = kl_divergence_n(&p, &q, n, Method::Exact).unwrap().value;
    let stats: Vec<f64> = (0..2000)
        .map(|t| {
            ml_classify(&p, &q, p.sample(n, t).as_slice(), 0.5)
                .unwrap()
                .statistic
        })
        .collect();
    let mean = stats.iter().sum::<f64>() / stats.len() as f64;
    let var = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (stats.len() - 1) as f64;
    let se = (var / stats.len() as f64).sqrt();
    assert!((mean - d).abs() < 3.0 * se, "{mean} vs {d}");
}

#[test]
fn ml_same_source_statistic_is_centered() {
    let p = ber(0.3);
    let stats: Vec<f64> = (0..1000)
        .map(|t| {
            ml_classify(&p, &p, p.sample(32, t).as_slice(), 0.5)
                .unwrap()
                .statistic
        })
        .collect();
    assert!(stats.iter().all(|&s| s == 0.0));
}

#[test]
fn ml_detects_separated_bernoulli_pair() {
    let (p, q) = (ber(0.5), ber(0.1));
    let delta = kl_divergence_n(&p, &q, 1, Method::Exact).unwrap().value;
    let hits = (0..1000)
        .filter(|&t| {
            ml_classify(&p, &q, p.sample(64, t).as_slice(), delta)
                .unwrap()
                .verdict
                == 1
        })
        .count();
    assert!(hits >= 950, "{hits}");
}

#[test]
fn esc_has_power_on_separated_pair() {
    // X ~ Ber(0.5), Y ~ Ber(0.05), K = 64, N = 1024, delta_crit = 0.5
    let (p, q) = (ber(0.5), ber(0.05));
    let params = ClassifierParams {
        delta_crit: 0.5,
        layout: TrainingLayout::new(64, 1024, 0).unwrap(),
        eps0: 0.25,
        delta_source: 0.05,
        rate: 0.5,
    };
    assert_eq!(params.esc_n(), 3);
    let trials = 200;
    let mut detect = 0;
    let mut false_alarm = 0;
    for t in 0..trials {
        let x = p.sample(params.n_bar(), seed::derive(1, &[t]));
        let y = q.sample(params.n_bar(), seed::derive(2, &[t]));
        let x2 = p.sample(params.n_bar(), seed::derive(3, &[t]));
        detect += esc_classify(&x, &y, &params).unwrap().verdict as usize;
        false_alarm += esc_classify(&x, &x2, &params).unwrap().verdict as usize;
    }
    // esc_n = 3 caps detection near 0.75 and short recurrence times make
    // the same-source statistic noisy
    assert!(detect as f64 / trials as f64 >= 0.6, "detect {detect}");
    assert!(
        detect as f64 >= 1.5 * false_alarm as f64,
        "detect {detect} false alarm {false_alarm}"
    );
}

#[test]
fn vl_separates_bernoulli_pair() {
    let (p, q) = (ber(0.5), ber(0.05));
    let params = ClassifierParams {
        delta_crit: 0.5,
        layout: TrainingLayout::new(8, 512, 0).unwrap(),
        eps0: 0.25,
        delta_source: 0.05,
        rate: 0.5,
    };
    for t in 0..20 {
        let x = p.sample(params.n_bar(), seed::derive(4, &[t]));
        let y = q.sample(params.n_bar(), seed::derive(5, &[t]));
        assert_eq!(vl_classify(&x, &y, &params).unwrap().verdict, 1);
    }
}
