//! Semantic data model: attributes, agents, requests and aggregations,
//! plus the distance that the evolutionary search minimises.
//!
//! Attribute sets are fixed-width bitsets so that distance evaluation is a
//! handful of popcounts per position.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Largest attribute space the bitset representation supports.
pub const MAX_ATTRIBUTES: usize = 256;

const WORDS: usize = MAX_ATTRIBUTES / 64;

pub type HabitatId = usize;

/// A directed habitat-to-habitat hop `(source, target)`.
pub type EdgeKey = (HabitatId, HabitatId);

/// One atomic unit of semantic description.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Attribute(pub u16);

impl Attribute {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A set of attributes over `[0, MAX_ATTRIBUTES)`.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AttributeSet {
    words: [u64; WORDS],
}

impl AttributeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics if an id is outside the supported attribute space.
    pub fn from_ids<I: IntoIterator<Item = u16>>(ids: I) -> Self {
        let mut set = Self::new();
        for id in ids {
            set.insert(Attribute(id));
        }
        set
    }

    /// Returns true if the attribute was not already present.
    pub fn insert(&mut self, attr: Attribute) -> bool {
        let i = attr.index();
        assert!(i < MAX_ATTRIBUTES, "attribute {i} out of range");
        let (w, b) = (i / 64, i % 64);
        let fresh = self.words[w] & (1 << b) == 0;
        self.words[w] |= 1 << b;
        fresh
    }

    pub fn contains(&self, attr: Attribute) -> bool {
        let i = attr.index();
        i < MAX_ATTRIBUTES && self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut out = *self;
        for (a, b) in out.words.iter_mut().zip(other.words.iter()) {
            *a |= b;
        }
        out
    }

    pub fn intersection_len(&self, other: &Self) -> usize {
        self.words
            .iter()
            .zip(other.words.iter())
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    /// `|self \ other|`
    pub fn difference_len(&self, other: &Self) -> usize {
        self.words
            .iter()
            .zip(other.words.iter())
            .map(|(a, b)| (a & !b).count_ones() as usize)
            .sum()
    }

    /// Ascending attribute ids.
    pub fn iter(&self) -> impl Iterator<Item = Attribute> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(Attribute((w * 64 + b) as u16))
            })
        })
    }

    /// Largest id present, if any.
    pub fn max_id(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .rev()
            .find(|(_, &w)| w != 0)
            .map(|(i, &w)| i * 64 + 63 - w.leading_zeros() as usize)
    }

    /// Applies an id relabeling; `map[i]` is the new id of attribute `i`.
    pub fn relabel(&self, map: &[u16]) -> Self {
        Self::from_ids(self.iter().map(|a| map[a.index()]))
    }
}

impl fmt::Debug for AttributeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|a| a.0)).finish()
    }
}

impl FromIterator<Attribute> for AttributeSet {
    fn from_iter<I: IntoIterator<Item = Attribute>>(iter: I) -> Self {
        let mut set = Self::new();
        for a in iter {
            set.insert(a);
        }
        set
    }
}

impl Serialize for AttributeSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter().map(|a| a.0))
    }
}

impl<'de> Deserialize<'de> for AttributeSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let ids = Vec::<u16>::deserialize(deserializer)?;
        if let Some(bad) = ids.iter().find(|&&i| i as usize >= MAX_ATTRIBUTES) {
            return Err(serde::de::Error::custom(format!(
                "attribute {bad} exceeds {MAX_ATTRIBUTES}"
            )));
        }
        Ok(Self::from_ids(ids))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId(pub u64);

/// Hands out run-unique agent ids.
#[derive(Debug, Default, Clone)]
pub struct AgentIdAllocator {
    next: u64,
}

impl AgentIdAllocator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn allocate(&mut self) -> AgentId {
        let id = AgentId(self.next);
        self.next += 1;
        id
    }

    pub fn issued(&self) -> u64 {
        self.next
    }
}

/// The digital representative of a service.
///
/// Copies of an agent share its id; `arrival_edge` records the hop that
/// brought this particular copy to the habitat holding it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agent {
    pub id: AgentId,
    pub description: AttributeSet,
    pub origin: HabitatId,
    pub arrival_edge: Option<EdgeKey>,
}

impl Agent {
    pub fn new(id: AgentId, description: AttributeSet, origin: HabitatId) -> Self {
        Self {
            id,
            description,
            origin,
            arrival_edge: None,
        }
    }

    /// A copy of this agent that has just crossed `edge`.
    pub fn migrated(&self, edge: EdgeKey) -> Self {
        Self {
            arrival_edge: Some(edge),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub attributes: AttributeSet,
}

impl Task {
    pub fn new(attributes: AttributeSet) -> Self {
        debug_assert!(!attributes.is_empty(), "tasks carry at least one attribute");
        Self { attributes }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub tasks: Vec<Task>,
    pub issuer: usize,
    pub habitat: HabitatId,
}

impl Request {
    pub fn new(tasks: Vec<Task>, issuer: usize, habitat: HabitatId) -> Self {
        debug_assert!(!tasks.is_empty(), "requests have at least one task");
        Self {
            tasks,
            issuer,
            habitat,
        }
    }

    /// Convenience constructor for tests and examples.
    pub fn from_sets(sets: &[&[u16]]) -> Self {
        let tasks = sets
            .iter()
            .map(|ids| Task::new(AttributeSet::from_ids(ids.iter().copied())))
            .collect();
        Self::new(tasks, 0, 0)
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Sum of task sizes.
    pub fn total_attributes(&self) -> usize {
        self.tasks.iter().map(|t| t.attributes.len()).sum()
    }

    /// Union of every attribute id mentioned by the request.
    pub fn signature(&self) -> AttributeSet {
        self.tasks
            .iter()
            .fold(AttributeSet::new(), |acc, t| acc.union(&t.attributes))
    }
}

/// An ordered composition of agents: a candidate application.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aggregation {
    pub agents: Vec<Arc<Agent>>,
}

impl Aggregation {
    pub fn new(agents: Vec<Arc<Agent>>) -> Self {
        Self { agents }
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn descriptions(&self) -> impl Iterator<Item = &AttributeSet> + '_ {
        self.agents.iter().map(|a| &a.description)
    }
}

/// Distance in half-units (twice the real distance), so ties compare
/// exactly.
pub fn half_unit_distance<'a, I>(tasks: &[Task], descriptions: I) -> u32
where
    I: IntoIterator<Item = &'a AttributeSet>,
{
    let mut total = 0usize;
    let mut matched = 0;
    for (i, desc) in descriptions.into_iter().enumerate() {
        match tasks.get(i) {
            Some(task) => {
                total += 2 * task.attributes.difference_len(desc) + desc.difference_len(&task.attributes);
            }
            None => total += desc.len(),
        }
        matched = i + 1;
    }
    total += tasks
        .iter()
        .skip(matched)
        .map(|t| 2 * t.attributes.len())
        .sum::<usize>();
    total as u32
}

/// Position-wise asymmetric distance between a request and an aggregation.
///
/// Missing task attributes cost 1, surplus agent attributes cost 0.5,
/// uncovered tasks cost their full size and surplus agents half theirs.
pub fn semantic_distance(request: &Request, aggregation: &Aggregation) -> f64 {
    half_unit_distance(&request.tasks, aggregation.descriptions()) as f64 / 2.0
}

/// Whether an application covers the request well enough to be used.
pub fn is_successful(request: &Request, aggregation: &Aggregation, threshold_fraction: f64) -> bool {
    distance_is_successful(
        semantic_distance(request, aggregation),
        request,
        threshold_fraction,
    )
}

pub(crate) fn distance_is_successful(distance: f64, request: &Request, threshold_fraction: f64) -> bool {
    distance <= threshold_fraction * request.total_attributes() as f64
}

pub fn aggregation_size(aggregation: &Aggregation) -> usize {
    aggregation.len()
}

pub fn agent_attribute_count(agent: &Agent) -> usize {
    agent.description.len()
}
