use std::sync::Arc;

use ecosim::build_topology;
use ecosim::habitat::{sample_neighbor, HabitatNetwork};
use ecosim::model::{Agent, AgentId, Aggregation, AttributeSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn rewired_topologies_stay_connected_with_degree_four() {
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = build_topology(100, 4, 0.1, &mut rng).unwrap();
        assert!(net.is_connected(), "seed {seed}");
        let edges = net.weighted_edges().count();
        assert_eq!(edges as f64 / 100.0, 4.0, "seed {seed}");
        assert!(net.weights_normalized());
    }
}

fn frequency_of_first(weights: [f64; 2], draws: usize) -> f64 {
    let mut net = HabitatNetwork::from_links(3, &[(0, 1), (0, 2)]).unwrap();
    net.set_weights(0, &[(1, weights[0]), (2, weights[1])]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let hits = (0..draws)
        .filter(|_| sample_neighbor(net.habitat(0), &mut rng).unwrap() == 1)
        .count();
    hits as f64 / draws as f64
}

#[test]
fn neighbour_sampling_follows_weights() {
    assert!((frequency_of_first([0.5, 0.5], 1_000_000) - 0.5).abs() <= 0.01);
    assert!((frequency_of_first([0.9, 0.1], 1_000_000) - 0.9).abs() <= 0.01);
}

#[test]
fn migrations_split_by_weight() {
    let mut net = HabitatNetwork::from_links(3, &[(0, 1), (0, 2)]).unwrap();
    net.cache_capacity = 1;
    net.set_weights(0, &[(1, 6.0 / 11.0), (2, 5.0 / 11.0)]).unwrap();
    let app = Aggregation::new(vec![Arc::new(Agent::new(
        AgentId(0),
        AttributeSet::from_ids([1, 2]),
        0,
    ))]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 100_000;
    let to_b = (0..n)
        .filter(|_| {
            net.migrate_application(0, &app, AttributeSet::from_ids([1, 2]), &mut rng)
                .unwrap()
                == 1
        })
        .count();
    assert!((to_b as f64 / n as f64 - 6.0 / 11.0).abs() <= 0.01);
    for h in [1, 2] {
        assert!(net.habitat(h).has_description(&AttributeSet::from_ids([1, 2])));
        assert_eq!(net.habitat(h).pool().len(), 1);
    }
}
