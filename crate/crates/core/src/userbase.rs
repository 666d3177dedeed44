//! User behaviour: distribution-driven request generation, community-biased
//! attribute choice and continuous service creation.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{EcoError, Result};
use crate::model::{
    Agent, AgentIdAllocator, Attribute, AttributeSet, HabitatId, Request, Task, MAX_ATTRIBUTES,
};
use crate::stats::normal_cdf;

/// Probability that a drawn attribute comes from the user's community pool
/// rather than the whole attribute space.
pub const COMMUNITY_BIAS: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistributionKind {
    Uniform,
    Gaussian,
    PowerLaw,
}

/// An integer distribution over `[lo, hi]`.
///
/// Gaussian specs default to `mu` at the midpoint and `sigma` of a sixth of
/// the range; power laws default to `alpha = 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    pub kind: DistributionKind,
    pub lo: i64,
    pub hi: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl DistributionSpec {
    pub fn uniform(lo: i64, hi: i64) -> Self {
        Self {
            kind: DistributionKind::Uniform,
            lo,
            hi,
            mu: None,
            sigma: None,
            alpha: None,
        }
    }

    pub fn gaussian(lo: i64, hi: i64) -> Self {
        Self {
            kind: DistributionKind::Gaussian,
            ..Self::uniform(lo, hi)
        }
    }

    pub fn power_law(lo: i64, hi: i64) -> Self {
        Self {
            kind: DistributionKind::PowerLaw,
            ..Self::uniform(lo, hi)
        }
    }

    pub fn mu(&self) -> f64 {
        self.mu.unwrap_or((self.lo + self.hi) as f64 / 2.0)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or((self.hi - self.lo) as f64 / 6.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(2.0)
    }

    pub fn bins(&self) -> usize {
        (self.hi - self.lo + 1).max(0) as usize
    }

    /// Every violated constraint, each message prefixed by `field`.
    pub fn diagnostics(&self, field: &str) -> Vec<String> {
        let mut out = Vec::new();
        if self.lo < 1 {
            out.push(format!("{field}.lo must be >= 1 (got {})", self.lo));
        }
        if self.hi < self.lo {
            out.push(format!(
                "{field}.hi must be >= {field}.lo (got hi {} < lo {})",
                self.hi, self.lo
            ));
        }
        match self.kind {
            DistributionKind::Gaussian => {
                let sigma = self.sigma();
                if !(sigma > 0.0) || !sigma.is_finite() {
                    out.push(format!("{field}.sigma must be > 0 (got {sigma})"));
                }
                if !self.mu().is_finite() {
                    out.push(format!("{field}.mu must be finite"));
                }
            }
            DistributionKind::PowerLaw => {
                let alpha = self.alpha();
                if !(alpha > 0.0) || !alpha.is_finite() {
                    out.push(format!("{field}.alpha must be > 0 (got {alpha})"));
                }
            }
            DistributionKind::Uniform => {}
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let diags = self.diagnostics("spec");
        if diags.is_empty() {
            Ok(())
        } else {
            Err(EcoError::Config(diags.join("; ")))
        }
    }

    /// Precomputes whatever the kind needs for repeated draws.
    pub fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        let inner = match self.kind {
            DistributionKind::Uniform => SamplerKind::Uniform,
            DistributionKind::Gaussian => SamplerKind::Gaussian(
                Normal::new(self.mu(), self.sigma())
                    .map_err(|e| EcoError::Config(format!("gaussian spec: {e}")))?,
            ),
            DistributionKind::PowerLaw => {
                let alpha = self.alpha();
                let weights = (self.lo..=self.hi).map(|v| (v as f64).powf(-alpha));
                SamplerKind::Table(
                    WeightedIndex::new(weights)
                        .map_err(|e| EcoError::Config(format!("power-law spec: {e}")))?,
                )
            }
        };
        Ok(Sampler {
            lo: self.lo,
            hi: self.hi,
            inner,
        })
    }
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Uniform,
    Gaussian(Normal<f64>),
    Table(WeightedIndex<f64>),
}

/// A compiled [`DistributionSpec`].
#[derive(Debug, Clone)]
pub struct Sampler {
    lo: i64,
    hi: i64,
    inner: SamplerKind,
}

impl Sampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        match &self.inner {
            SamplerKind::Uniform => rng.random_range(self.lo..=self.hi),
            SamplerKind::Gaussian(normal) => {
                let x: f64 = normal.sample(rng);
                // round half up, then clamp
                let v = (x + 0.5).floor();
                v.clamp(self.lo as f64, self.hi as f64) as i64
            }
            SamplerKind::Table(table) => self.lo + table.sample(rng) as i64,
        }
    }
}

/// One draw from `spec`. Prefer [`DistributionSpec::sampler`] in loops.
pub fn sample<R: Rng + ?Sized>(spec: &DistributionSpec, rng: &mut R) -> Result<i64> {
    Ok(spec.sampler()?.sample(rng))
}

/// Exact probability mass of each integer in `[lo, hi]`.
pub fn expected_probabilities(spec: &DistributionSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = spec.bins();
    let mut probs: Vec<f64> = match spec.kind {
        DistributionKind::Uniform => vec![1.0 / n as f64; n],
        DistributionKind::PowerLaw => {
            let alpha = spec.alpha();
            (spec.lo..=spec.hi).map(|v| (v as f64).powf(-alpha)).collect()
        }
        DistributionKind::Gaussian => {
            let (mu, sigma) = (spec.mu(), spec.sigma());
            // cdf at each interior bin edge; the outer bins absorb the tails
            let edge = |v: i64| normal_cdf((v as f64 + 0.5 - mu) / sigma);
            (spec.lo..=spec.hi)
                .map(|v| {
                    let upper = if v == spec.hi { 1.0 } else { edge(v) };
                    let lower = if v == spec.lo { 0.0 } else { edge(v - 1) };
                    upper - lower
                })
                .collect()
        }
    };
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(probs)
}

/// A cluster of users sharing a preferred slice of the attribute space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Community {
    pub id: usize,
    pub attribute_pool: Vec<Attribute>,
}

impl Community {
    pub fn new(id: usize, attributes: impl IntoIterator<Item = u16>) -> Self {
        let mut attribute_pool: Vec<Attribute> = attributes.into_iter().map(Attribute).collect();
        attribute_pool.sort();
        attribute_pool.dedup();
        Self { id, attribute_pool }
    }

    pub fn as_set(&self) -> AttributeSet {
        self.attribute_pool.iter().copied().collect()
    }
}

/// Draws `count` community pools of `pool_size` attributes each, such that
/// any two pools share fewer than half their attributes.
pub fn build_communities<R: Rng + ?Sized>(
    count: usize,
    pool_size: usize,
    attribute_space: usize,
    rng: &mut R,
) -> Result<Vec<Community>> {
    if count == 0 {
        return Err(EcoError::Config("communities must be >= 1".into()));
    }
    if pool_size == 0 || pool_size > attribute_space {
        return Err(EcoError::Config(format!(
            "community_pool_size must lie in [1, {attribute_space}] (got {pool_size})"
        )));
    }
    const ATTEMPTS: usize = 10_000;
    let mut out: Vec<Community> = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count {
        tries += 1;
        if tries > ATTEMPTS * count {
            return Err(EcoError::Config(format!(
                "could not draw {count} community pools of size {pool_size} from \
                 {attribute_space} attributes with pairwise overlap below 50%"
            )));
        }
        let ids = rand::seq::index::sample(rng, attribute_space, pool_size);
        let candidate = Community::new(out.len(), ids.iter().map(|i| i as u16));
        let set = candidate.as_set();
        if out
            .iter()
            .all(|c| 2 * c.as_set().intersection_len(&set) < pool_size)
        {
            out.push(candidate);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub habitat: HabitatId,
    pub community: usize,
    pub request_rate: f64,
    pub creation_rate: f64,
}

/// Draws `m` distinct attributes, each independently from the community
/// pool with probability [`COMMUNITY_BIAS`] and from the whole space
/// otherwise. Falls back to the whole space once the pool is used up.
pub fn draw_attributes<R: Rng + ?Sized>(
    community: &Community,
    m: usize,
    attribute_space: usize,
    rng: &mut R,
) -> Result<AttributeSet> {
    if m > attribute_space {
        return Err(EcoError::Config(format!(
            "cannot draw {m} distinct attributes from a space of {attribute_space}"
        )));
    }
    let mut set = AttributeSet::new();
    let mut remaining: Vec<Attribute> = community.attribute_pool.clone();
    while set.len() < m {
        if !remaining.is_empty() && rng.random_bool(COMMUNITY_BIAS) {
            let a = remaining.swap_remove(rng.random_range(0..remaining.len()));
            set.insert(a);
        } else {
            // rejection from the global space; at most m of A ids are taken
            loop {
                let a = Attribute(rng.random_range(0..attribute_space) as u16);
                if set.insert(a) {
                    if let Some(pos) = remaining.iter().position(|&r| r == a) {
                        remaining.swap_remove(pos);
                    }
                    break;
                }
            }
        }
    }
    Ok(set)
}

/// Request and service generation for one run, with the distributions
/// compiled once.
#[derive(Debug, Clone)]
pub struct RequestGenerator {
    length: Sampler,
    modularity: Sampler,
    attribute_space: usize,
}

impl RequestGenerator {
    pub fn new(
        length_spec: &DistributionSpec,
        modularity_spec: &DistributionSpec,
        attribute_space: usize,
    ) -> Result<Self> {
        if !(2..=MAX_ATTRIBUTES).contains(&attribute_space) {
            return Err(EcoError::Config(format!(
                "attribute_space must lie in [2, {MAX_ATTRIBUTES}] (got {attribute_space})"
            )));
        }
        if modularity_spec.hi > attribute_space as i64 {
            return Err(EcoError::Config(format!(
                "modularity_spec.hi ({}) exceeds attribute_space ({attribute_space})",
                modularity_spec.hi
            )));
        }
        Ok(Self {
            length: length_spec.sampler()?,
            modularity: modularity_spec.sampler()?,
            attribute_space,
        })
    }

    fn task<R: Rng + ?Sized>(&self, community: &Community, rng: &mut R) -> Result<Task> {
        let m = self.modularity.sample(rng) as usize;
        Ok(Task::new(draw_attributes(
            community,
            m,
            self.attribute_space,
            rng,
        )?))
    }

    pub fn generate_request<R: Rng + ?Sized>(
        &self,
        user: &UserProfile,
        community: &Community,
        rng: &mut R,
    ) -> Result<Request> {
        let len = self.length.sample(rng) as usize;
        let tasks = (0..len)
            .map(|_| self.task(community, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Request::new(tasks, user.habitat, user.habitat))
    }

    /// A fresh service shaped like one request task. The caller deposits it
    /// into the user's habitat pool.
    pub fn create_agent<R: Rng + ?Sized>(
        &self,
        user: &UserProfile,
        community: &Community,
        ids: &mut AgentIdAllocator,
        rng: &mut R,
    ) -> Result<Agent> {
        let task = self.task(community, rng)?;
        Ok(Agent::new(ids.allocate(), task.attributes, user.habitat))
    }
}

pub fn generate_request<R: Rng + ?Sized>(
    user: &UserProfile,
    community: &Community,
    attribute_space: usize,
    length_spec: &DistributionSpec,
    modularity_spec: &DistributionSpec,
    rng: &mut R,
) -> Result<Request> {
    RequestGenerator::new(length_spec, modularity_spec, attribute_space)?
        .generate_request(user, community, rng)
}

pub fn create_agent<R: Rng + ?Sized>(
    user: &UserProfile,
    community: &Community,
    attribute_space: usize,
    modularity_spec: &DistributionSpec,
    ids: &mut AgentIdAllocator,
    rng: &mut R,
) -> Result<Agent> {
    RequestGenerator::new(&DistributionSpec::uniform(1, 1), modularity_spec, attribute_space)?
        .create_agent(user, community, ids, rng)
}
