//! Reference scenarios shared by the acceptance suite: an exhaustive
//! search oracle for small evolution instances and a three-habitat network
//! where one neighbour is useful and the other is not.

use ecosim::evolution::{run_evolution, EvolutionParams};
use ecosim::habitat::HabitatNetwork;
use ecosim::model::{half_unit_distance, Agent, AgentIdAllocator, AttributeSet, Request, Task};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_set<R: Rng>(rng: &mut R, ids: std::ops::Range<u16>, max: usize) -> AttributeSet {
    let n = rng.random_range(1..=max);
    let mut set = AttributeSet::new();
    while set.len() < n {
        set.insert(ecosim::model::Attribute(rng.random_range(ids.clone())));
    }
    set
}

/// Smallest distance over every aggregation of `pool` up to `cap` agents,
/// in half units.
pub fn exhaustive_optimum(request: &Request, pool: &[AttributeSet], cap: usize) -> u32 {
    let mut best = u32::MAX;
    let mut seq: Vec<usize> = Vec::new();
    fn walk(request: &Request, pool: &[AttributeSet], cap: usize, seq: &mut Vec<usize>, best: &mut u32) {
        if !seq.is_empty() {
            let d = half_unit_distance(&request.tasks, seq.iter().map(|&i| &pool[i]));
            *best = (*best).min(d);
        }
        if seq.len() == cap {
            return;
        }
        for i in 0..pool.len() {
            seq.push(i);
            walk(request, pool, cap, seq, best);
            seq.pop();
        }
    }
    walk(request, pool, cap, &mut seq, &mut best);
    best
}

/// One small random instance: GA distance and exhaustive optimum, both in
/// half units.
pub fn oracle_instance(seed: u64) -> (u32, u32) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool_len = rng.random_range(1..=8);
    let pool: Vec<AttributeSet> = (0..pool_len).map(|_| random_set(&mut rng, 0..10, 3)).collect();
    let len = rng.random_range(1..=3);
    let tasks = (0..len)
        .map(|_| {
            if rng.random_bool(0.6) {
                Task::new(pool[rng.random_range(0..pool_len)])
            } else {
                Task::new(random_set(&mut rng, 0..10, 3))
            }
        })
        .collect();
    let request = Request::new(tasks, 0, 0);

    let mut net = HabitatNetwork::from_links(2, &[(0, 1)]).unwrap();
    let mut ids = AgentIdAllocator::new();
    for d in &pool {
        net.habitat_mut(0).add_agent(Agent::new(ids.allocate(), *d, 0));
    }
    let result = run_evolution(
        net.habitat(0),
        &request,
        &EvolutionParams::default(),
        0.1,
        &mut rng,
    )
    .unwrap();
    let got = (result.best_distance * 2.0).round() as u32;
    (got, exhaustive_optimum(&request, &pool, 4))
}

const A: usize = 0;
const B: usize = 1;
const C: usize = 2;

/// Line B-A-C. A's users ask for what A's own agents provide and migrate
/// their applications; C's users ask for the same kind of service and can
/// only succeed with A's migrants; B's users ask for something nobody
/// offers. Returns `(weight A→C, weight A→B)` after `steps` steps.
pub fn hebbian_scenario(seed: u64, steps: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = HabitatNetwork::from_links(3, &[(A, B), (A, C)]).unwrap();
    let mut ids = AgentIdAllocator::new();
    let offered: Vec<AttributeSet> = (0..6).map(|_| random_set(&mut rng, 0..12, 3)).collect();
    for d in &offered {
        net.habitat_mut(A).add_agent(Agent::new(ids.allocate(), *d, A));
    }
    for h in [B, C] {
        for _ in 0..6 {
            let d = random_set(&mut rng, 30..42, 3);
            net.habitat_mut(h).add_agent(Agent::new(ids.allocate(), d, h));
        }
    }
    let params = EvolutionParams::default();
    let (eta, delta, threshold) = (0.1, 0.01, 0.1);
    let want_offered = |rng: &mut ChaCha8Rng| {
        let len = rng.random_range(1..=2);
        Request::new(
            (0..len)
                .map(|_| Task::new(offered[rng.random_range(0..offered.len())]))
                .collect(),
            0,
            0,
        )
    };
    for _ in 0..steps {
        let request = want_offered(&mut rng);
        let outcome = run_evolution(net.habitat(A), &request, &params, threshold, &mut rng).unwrap();
        if outcome.succeeded {
            net.cache_local(A, outcome.best.clone(), request.signature());
            net.migrate_application(A, &outcome.best, request.signature(), &mut rng)
                .unwrap();
        }

        let request = want_offered(&mut rng);
        let outcome = run_evolution(net.habitat(C), &request, &params, threshold, &mut rng).unwrap();
        if outcome.succeeded {
            net.cache_local(C, outcome.best.clone(), request.signature());
            net.reinforce_arrivals(C, &outcome.best, eta);
        }

        let request = Request::new(vec![Task::new(random_set(&mut rng, 60..72, 3))], 0, 0);
        let outcome = run_evolution(net.habitat(B), &request, &params, threshold, &mut rng).unwrap();
        if outcome.succeeded {
            net.reinforce_arrivals(B, &outcome.best, eta);
        }
        net.decay(delta);
    }
    (net.weight(A, C).unwrap(), net.weight(A, B).unwrap())
}
