//! The habitat graph: agent pools, application caches and weighted
//! connections that adapt to successful migrations.

use std::collections::{HashSet, VecDeque};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{EcoError, Result};
use crate::model::{Agent, Aggregation, AttributeSet, EdgeKey, HabitatId};

const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub target: HabitatId,
    pub weight: f64,
}

/// An application held in a habitat's cache, with the request signature it
/// was evolved for.
#[derive(Debug, Clone)]
pub struct CachedApplication {
    pub aggregation: Aggregation,
    pub signature: AttributeSet,
    /// `None` for applications evolved locally.
    pub arrival_edge: Option<EdgeKey>,
}

#[derive(Debug, Clone)]
pub struct Habitat {
    pub id: HabitatId,
    pool: Vec<Arc<Agent>>,
    descriptions: HashSet<AttributeSet>,
    cache: VecDeque<CachedApplication>,
    pub out_edges: Vec<Edge>,
}

impl Habitat {
    fn new(id: HabitatId) -> Self {
        Self {
            id,
            pool: Vec::new(),
            descriptions: HashSet::new(),
            cache: VecDeque::new(),
            out_edges: Vec::new(),
        }
    }

    pub fn pool(&self) -> &[Arc<Agent>] {
        &self.pool
    }

    /// Oldest entry first.
    pub fn cache(&self) -> impl DoubleEndedIterator<Item = &CachedApplication> + ExactSizeIterator {
        self.cache.iter()
    }

    pub fn has_description(&self, description: &AttributeSet) -> bool {
        self.descriptions.contains(description)
    }

    pub fn add_agent(&mut self, agent: Agent) -> Arc<Agent> {
        let agent = Arc::new(agent);
        self.descriptions.insert(agent.description);
        self.pool.push(Arc::clone(&agent));
        agent
    }

    /// Adds the agent unless one with the same description is present.
    pub fn add_agent_dedup(&mut self, agent: Agent) -> bool {
        if self.descriptions.contains(&agent.description) {
            return false;
        }
        self.add_agent(agent);
        true
    }

    fn push_cache(&mut self, entry: CachedApplication, capacity: usize) {
        if capacity == 0 {
            return;
        }
        while self.cache.len() >= capacity {
            self.cache.pop_front();
        }
        self.cache.push_back(entry);
    }

    pub fn weight_to(&self, target: HabitatId) -> Option<f64> {
        self.out_edges
            .iter()
            .find(|e| e.target == target)
            .map(|e| e.weight)
    }

    fn out_weight_sum(&self) -> f64 {
        self.out_edges.iter().map(|e| e.weight).sum()
    }
}

/// Draws the target of one out-edge with probability proportional to its
/// weight.
pub fn sample_neighbor<R: Rng + ?Sized>(habitat: &Habitat, rng: &mut R) -> Result<HabitatId> {
    let edges = &habitat.out_edges;
    if edges.is_empty() {
        return Err(EcoError::Structural(format!(
            "habitat {} has no outgoing connections",
            habitat.id
        )));
    }
    let total = habitat.out_weight_sum();
    let mut u = rng.random::<f64>() * total;
    for e in edges {
        if u < e.weight {
            return Ok(e.target);
        }
        u -= e.weight;
    }
    Ok(edges[edges.len() - 1].target)
}

#[derive(Debug, Clone)]
pub struct HabitatNetwork {
    pub habitats: Vec<Habitat>,
    pub cache_capacity: usize,
    skipped_reinforcements: u64,
}

impl HabitatNetwork {
    /// Builds a network from undirected links; every link becomes a pair of
    /// directed edges and each habitat starts with uniform out-weights.
    pub fn from_links(n: usize, links: &[(HabitatId, HabitatId)]) -> Result<Self> {
        let mut adjacency: Vec<Vec<HabitatId>> = vec![Vec::new(); n];
        for &(a, b) in links {
            if a >= n || b >= n {
                return Err(EcoError::Config(format!(
                    "link ({a}, {b}) names a missing habitat"
                )));
            }
            if a == b {
                return Err(EcoError::Config(format!("self-link at habitat {a}")));
            }
            if adjacency[a].contains(&b) {
                return Err(EcoError::Config(format!("duplicate link ({a}, {b})")));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        Ok(Self::from_adjacency(adjacency))
    }

    fn from_adjacency(mut adjacency: Vec<Vec<HabitatId>>) -> Self {
        let habitats = adjacency
            .iter_mut()
            .enumerate()
            .map(|(id, targets)| {
                targets.sort_unstable();
                let mut h = Habitat::new(id);
                let w = 1.0 / targets.len().max(1) as f64;
                h.out_edges = targets.iter().map(|&target| Edge { target, weight: w }).collect();
                h
            })
            .collect();
        Self {
            habitats,
            cache_capacity: 100,
            skipped_reinforcements: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.habitats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.habitats.is_empty()
    }

    pub fn habitat(&self, id: HabitatId) -> &Habitat {
        &self.habitats[id]
    }

    pub fn habitat_mut(&mut self, id: HabitatId) -> &mut Habitat {
        &mut self.habitats[id]
    }

    pub fn weight(&self, from: HabitatId, to: HabitatId) -> Option<f64> {
        self.habitats.get(from)?.weight_to(to)
    }

    /// Reinforcements dropped because their edge no longer exists.
    pub fn skipped_reinforcements(&self) -> u64 {
        self.skipped_reinforcements
    }

    /// `(source, target, weight)` for every directed edge, sources ascending.
    pub fn weighted_edges(&self) -> impl Iterator<Item = (HabitatId, HabitatId, f64)> + '_ {
        self.habitats
            .iter()
            .flat_map(|h| h.out_edges.iter().map(move |e| (h.id, e.target, e.weight)))
    }

    pub fn is_connected(&self) -> bool {
        if self.habitats.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(h) = stack.pop() {
            for e in &self.habitats[h].out_edges {
                if !seen[e.target] {
                    seen[e.target] = true;
                    stack.push(e.target);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Mean local clustering coefficient of the undirected graph.
    pub fn clustering_coefficient(&self) -> f64 {
        let neighbours: Vec<HashSet<HabitatId>> = self
            .habitats
            .iter()
            .map(|h| h.out_edges.iter().map(|e| e.target).collect())
            .collect();
        let total: f64 = neighbours
            .iter()
            .map(|ns| {
                let k = ns.len();
                if k < 2 {
                    return 0.0;
                }
                let ns: Vec<_> = ns.iter().copied().collect();
                let mut links = 0;
                for (i, &a) in ns.iter().enumerate() {
                    for &b in &ns[i + 1..] {
                        if neighbours[a].contains(&b) {
                            links += 1;
                        }
                    }
                }
                2.0 * links as f64 / (k * (k - 1)) as f64
            })
            .sum();
        total / self.len() as f64
    }

    /// Whether every habitat's out-weights are positive and sum to one.
    pub fn weights_normalized(&self) -> bool {
        self.habitats.iter().all(|h| {
            h.out_edges.iter().all(|e| e.weight > 0.0)
                && (h.out_edges.is_empty() || (h.out_weight_sum() - 1.0).abs() <= WEIGHT_TOLERANCE)
        })
    }

    fn debug_check(&self) {
        debug_assert!(self.weights_normalized(), "out-weights drifted from 1");
    }

    /// Caches a locally evolved application at `habitat`.
    pub fn cache_local(&mut self, habitat: HabitatId, aggregation: Aggregation, signature: AttributeSet) {
        let capacity = self.cache_capacity;
        self.habitats[habitat].push_cache(
            CachedApplication {
                aggregation,
                signature,
                arrival_edge: None,
            },
            capacity,
        );
    }

    /// Sends a copy of a successful application one hop from `from`.
    ///
    /// The destination caches the application and gains copies of any agent
    /// whose description it lacks; every copy records the traversed edge.
    pub fn migrate_application<R: Rng + ?Sized>(
        &mut self,
        from: HabitatId,
        aggregation: &Aggregation,
        signature: AttributeSet,
        rng: &mut R,
    ) -> Result<HabitatId> {
        let to = sample_neighbor(&self.habitats[from], rng)?;
        let edge = (from, to);
        let copies: Vec<Arc<Agent>> = aggregation
            .agents
            .iter()
            .map(|a| Arc::new(a.migrated(edge)))
            .collect();
        let capacity = self.cache_capacity;
        let dest = &mut self.habitats[to];
        for agent in &copies {
            if !dest.descriptions.contains(&agent.description) {
                dest.descriptions.insert(agent.description);
                dest.pool.push(Arc::clone(agent));
            }
        }
        dest.push_cache(
            CachedApplication {
                aggregation: Aggregation::new(copies),
                signature,
                arrival_edge: Some(edge),
            },
            capacity,
        );
        Ok(to)
    }

    /// Hebbian strengthening of `from → to`: add `eta`, then renormalize the
    /// source's out-weights. Returns false (and counts it) when the edge is
    /// missing.
    pub fn reinforce(&mut self, (from, to): EdgeKey, eta: f64) -> bool {
        let Some(habitat) = self.habitats.get_mut(from) else {
            self.skipped_reinforcements += 1;
            return false;
        };
        let Some(edge) = habitat.out_edges.iter_mut().find(|e| e.target == to) else {
            self.skipped_reinforcements += 1;
            return false;
        };
        edge.weight += eta;
        let total = habitat.out_weight_sum();
        for e in &mut habitat.out_edges {
            e.weight /= total;
        }
        self.debug_check();
        true
    }

    /// Reinforces the arrival edge of every distinct migrant in an
    /// application that succeeded at `here`. Returns how many edges were
    /// strengthened.
    pub fn reinforce_arrivals(&mut self, here: HabitatId, aggregation: &Aggregation, eta: f64) -> usize {
        let mut seen = HashSet::new();
        let mut count = 0;
        for agent in &aggregation.agents {
            if let Some(edge) = agent.arrival_edge {
                if edge.1 == here && seen.insert(agent.id) && self.reinforce(edge, eta) {
                    count += 1;
                }
            }
        }
        count
    }

    /// Relaxes every habitat's out-weights toward uniform:
    /// `w ← (1 − delta)·w + delta / degree`.
    pub fn decay(&mut self, delta: f64) {
        if delta == 0.0 {
            return;
        }
        for h in &mut self.habitats {
            let uniform = 1.0 / h.out_edges.len().max(1) as f64;
            for e in &mut h.out_edges {
                e.weight = (1.0 - delta) * e.weight + delta * uniform;
            }
            // fold rounding drift back in so repeated updates stay on the simplex
            let total = h.out_weight_sum();
            for e in &mut h.out_edges {
                e.weight /= total;
            }
        }
        self.debug_check();
    }

    /// Overwrites one habitat's out-weights; they are renormalized.
    pub fn set_weights(&mut self, from: HabitatId, weights: &[(HabitatId, f64)]) -> Result<()> {
        let habitat = &mut self.habitats[from];
        for &(to, w) in weights {
            if !(w > 0.0) {
                return Err(EcoError::InvalidInput(format!(
                    "weight {w} on {from}->{to} is not positive"
                )));
            }
            match habitat.out_edges.iter_mut().find(|e| e.target == to) {
                Some(e) => e.weight = w,
                None => return Err(EcoError::InvalidInput(format!("no edge {from}->{to}"))),
            }
        }
        let total = habitat.out_weight_sum();
        for e in &mut habitat.out_edges {
            e.weight /= total;
        }
        Ok(())
    }
}

/// Watts-Strogatz small world: a ring where each habitat links to its `k`
/// nearest neighbours, each link rewired with probability `rewire_p`.
/// Redraws until the result is connected.
pub fn build_topology<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    rewire_p: f64,
    rng: &mut R,
) -> Result<HabitatNetwork> {
    if k < 2 || !k.is_multiple_of(2) {
        return Err(EcoError::Config(format!(
            "base degree k must be even and >= 2 (got {k})"
        )));
    }
    if n <= k {
        return Err(EcoError::Config(format!(
            "habitat count n must exceed k (got n {n}, k {k})"
        )));
    }
    if !(0.0..=1.0).contains(&rewire_p) {
        return Err(EcoError::Config(format!(
            "rewire_p must lie in [0, 1] (got {rewire_p})"
        )));
    }
    const ATTEMPTS: usize = 1000;
    for _ in 0..ATTEMPTS {
        let net = HabitatNetwork::from_adjacency(watts_strogatz(n, k, rewire_p, rng));
        if net.is_connected() {
            net.debug_check();
            return Ok(net);
        }
    }
    Err(EcoError::Config(format!(
        "no connected topology for n {n}, k {k}, rewire_p {rewire_p} after {ATTEMPTS} draws"
    )))
}

fn watts_strogatz<R: Rng + ?Sized>(n: usize, k: usize, p: f64, rng: &mut R) -> Vec<Vec<HabitatId>> {
    let mut adj: Vec<HashSet<HabitatId>> = vec![HashSet::new(); n];
    for i in 0..n {
        for j in 1..=k / 2 {
            let t = (i + j) % n;
            adj[i].insert(t);
            adj[t].insert(i);
        }
    }
    for j in 1..=k / 2 {
        for i in 0..n {
            let t = (i + j) % n;
            if !adj[i].contains(&t) || !rng.random_bool(p) {
                continue;
            }
            if adj[i].len() >= n - 1 {
                continue;
            }
            let new_t = loop {
                let c = rng.random_range(0..n);
                if c != i && !adj[i].contains(&c) {
                    break c;
                }
            };
            adj[i].remove(&t);
            adj[t].remove(&i);
            adj[i].insert(new_t);
            adj[new_t].insert(i);
        }
    }
    adj.into_iter()
        .map(|s| s.into_iter().collect::<Vec<_>>())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AgentId, AttributeSet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn star(weights: &[f64]) -> HabitatNetwork {
        let links: Vec<_> = (1..=weights.len()).map(|t| (0, t)).collect();
        let mut net = HabitatNetwork::from_links(weights.len() + 1, &links).unwrap();
        let w: Vec<_> = weights.iter().enumerate().map(|(i, &w)| (i + 1, w)).collect();
        net.set_weights(0, &w).unwrap();
        net
    }

    fn app(sets: &[&[u16]]) -> Aggregation {
        Aggregation::new(
            sets.iter()
                .enumerate()
                .map(|(i, ids)| {
                    Arc::new(Agent::new(
                        AgentId(i as u64),
                        AttributeSet::from_ids(ids.iter().copied()),
                        0,
                    ))
                })
                .collect(),
        )
    }

    #[test]
    fn ring_without_rewiring() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = build_topology(4, 2, 0.0, &mut rng).unwrap();
        for h in &net.habitats {
            assert_eq!(h.out_edges.len(), 2);
            assert!(h.out_edges.iter().all(|e| e.weight == 0.5));
        }
        assert_eq!(net.weight(0, 1), Some(0.5));
        assert_eq!(net.weight(0, 3), Some(0.5));
        assert_eq!(net.weight(0, 2), None);
    }

    #[test]
    fn lattice_clustering_matches_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = build_topology(100, 4, 0.0, &mut rng).unwrap();
        assert!((net.clustering_coefficient() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn topology_parameter_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(build_topology(10, 3, 0.1, &mut rng).is_err());
        assert!(build_topology(4, 4, 0.1, &mut rng).is_err());
        assert!(build_topology(10, 0, 0.1, &mut rng).is_err());
        assert!(build_topology(10, 2, 1.5, &mut rng).is_err());
    }

    #[test]
    fn single_edge_always_sampled() {
        let net = HabitatNetwork::from_links(2, &[(0, 1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(sample_neighbor(net.habitat(0), &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn isolated_habitat_is_structural_error() {
        let net = HabitatNetwork::from_links(3, &[(0, 1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_neighbor(net.habitat(2), &mut rng),
            Err(EcoError::Structural(_))
        ));
    }

    #[test]
    fn reinforce_hand_arithmetic() {
        let mut net = star(&[0.5, 0.5]);
        assert!(net.reinforce((0, 1), 0.1));
        assert!((net.weight(0, 1).unwrap() - 0.6 / 1.1).abs() < 1e-12);
        assert!((net.weight(0, 2).unwrap() - 0.5 / 1.1).abs() < 1e-12);
        let once = net.weight(0, 1).unwrap();
        net.reinforce((0, 1), 0.1);
        assert!(net.weight(0, 1).unwrap() > once);
    }

    #[test]
    fn reinforce_single_edge_stays_one() {
        let mut net = HabitatNetwork::from_links(2, &[(0, 1)]).unwrap();
        net.reinforce((0, 1), 0.1);
        assert_eq!(net.weight(0, 1), Some(1.0));
    }

    #[test]
    fn reinforce_missing_edge_is_counted() {
        let mut net = star(&[0.5, 0.5]);
        assert!(!net.reinforce((1, 2), 0.1));
        assert!(!net.reinforce((7, 0), 0.1));
        assert_eq!(net.skipped_reinforcements(), 2);
    }

    #[test]
    fn decay_hand_arithmetic() {
        let mut net = star(&[1.0, 1e-300]);
        net.decay(0.5);
        assert!((net.weight(0, 1).unwrap() - 0.75).abs() < 1e-12);
        assert!((net.weight(0, 2).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn decay_fixed_points() {
        let mut net = star(&[0.5, 0.5]);
        net.decay(0.3);
        assert_eq!(net.weight(0, 1), Some(0.5));
        let mut net = star(&[0.9, 0.1]);
        net.decay(0.0);
        assert!((net.weight(0, 1).unwrap() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn migration_to_only_neighbour() {
        let mut net = HabitatNetwork::from_links(2, &[(0, 1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = app(&[&[1, 2], &[3]]);
        assert!(!net.habitat(1).has_description(&AttributeSet::from_ids([1, 2])));
        for _ in 0..5 {
            assert_eq!(
                net.migrate_application(0, &a, AttributeSet::new(), &mut rng)
                    .unwrap(),
                1
            );
        }
        let dest = net.habitat(1);
        assert!(dest.has_description(&AttributeSet::from_ids([1, 2])));
        // deduplicated by description
        assert_eq!(dest.pool().len(), 2);
        assert!(dest.pool().iter().all(|a| a.arrival_edge == Some((0, 1))));
        assert_eq!(dest.cache().len(), 5);
        assert!(dest.cache().all(|c| c.arrival_edge == Some((0, 1))));
        // the source keeps nothing extra
        assert!(net.habitat(0).pool().is_empty());
    }

    #[test]
    fn cache_evicts_oldest() {
        let mut net = HabitatNetwork::from_links(2, &[(0, 1)]).unwrap();
        net.cache_capacity = 3;
        for i in 0..5u16 {
            net.cache_local(0, app(&[&[i]]), AttributeSet::from_ids([i]));
        }
        let sigs: Vec<_> = net.habitat(0).cache().map(|c| c.signature).collect();
        assert_eq!(
            sigs,
            (2..5).map(|i| AttributeSet::from_ids([i])).collect::<Vec<_>>()
        );
    }
}
