use ecosim::model::AgentIdAllocator;
use ecosim::userbase::{
    expected_probabilities, Community, DistributionKind, DistributionSpec, RequestGenerator, UserProfile,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn user() -> UserProfile {
    UserProfile {
        habitat: 0,
        community: 0,
        request_rate: 0.1,
        creation_rate: 0.05,
    }
}

#[test]
fn power_law_ratio_of_first_bins() {
    let spec = DistributionSpec::power_law(1, 8);
    let sampler = spec.sampler().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut counts = [0u64; 9];
    for _ in 0..1_000_000 {
        counts[sampler.sample(&mut rng) as usize] += 1;
    }
    let ratio = counts[1] as f64 / counts[2] as f64;
    assert!((ratio - 4.0).abs() <= 0.1, "ratio {ratio}");
}

#[test]
fn gaussian_mean() {
    let spec = DistributionSpec {
        mu: Some(10.0),
        sigma: Some(2.67),
        ..DistributionSpec::gaussian(2, 18)
    };
    let sampler = spec.sampler().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 1_000_000;
    let sum: i64 = (0..n).map(|_| sampler.sample(&mut rng)).sum();
    let mean = sum as f64 / n as f64;
    assert!((mean - 10.0).abs() <= 0.05, "mean {mean}");
}

#[test]
fn samples_stay_in_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for spec in [
        DistributionSpec::uniform(2, 18),
        DistributionSpec::gaussian(2, 12),
        DistributionSpec::power_law(1, 30),
        DistributionSpec {
            mu: Some(40.0),
            sigma: Some(0.5),
            ..DistributionSpec::gaussian(1, 5)
        },
    ] {
        let s = spec.sampler().unwrap();
        for _ in 0..1_000_000 {
            let v = s.sample(&mut rng);
            assert!((spec.lo..=spec.hi).contains(&v));
        }
    }
}

#[test]
fn community_attributes_dominate() {
    let community = Community::new(0, 0..10);
    let length = DistributionSpec::uniform(1, 3);
    let modularity = DistributionSpec::uniform(1, 4);
    let generator = RequestGenerator::new(&length, &modularity, 64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut inside, mut total) = (0usize, 0usize);
    for _ in 0..100_000 {
        let request = generator.generate_request(&user(), &community, &mut rng).unwrap();
        for task in &request.tasks {
            for a in task.attributes.iter() {
                total += 1;
                inside += (a.0 < 10) as usize;
            }
        }
    }
    assert!(inside as f64 / total as f64 >= 0.7);
}

fn chi_squared_p(counts: &[u64], spec: &DistributionSpec) -> f64 {
    let mut hist = ecosim::Histogram::new(spec.lo, spec.hi);
    for (i, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            hist.record(spec.lo + i as i64);
        }
    }
    ecosim::analyze(&hist, spec).unwrap().upper_p_value
}

#[test]
fn request_lengths_match_expected_mass() {
    let length = DistributionSpec::gaussian(2, 18);
    let generator = RequestGenerator::new(&length, &DistributionSpec::uniform(1, 2), 64).unwrap();
    let community = Community::new(0, 0..16);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut counts = vec![0u64; length.bins()];
    for _ in 0..100_000 {
        let r = generator.generate_request(&user(), &community, &mut rng).unwrap();
        counts[r.len() - 2] += 1;
    }
    let p = chi_squared_p(&counts, &length);
    assert!(p > 0.05, "p {p}");
}

#[test]
fn created_agent_sizes_match_expected_mass() {
    let modularity = DistributionSpec::power_law(2, 12);
    let generator = RequestGenerator::new(&DistributionSpec::uniform(1, 1), &modularity, 64).unwrap();
    let community = Community::new(0, 0..16);
    let mut ids = AgentIdAllocator::new();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut counts = vec![0u64; modularity.bins()];
    for _ in 0..100_000 {
        let agent = generator
            .create_agent(&user(), &community, &mut ids, &mut rng)
            .unwrap();
        counts[agent.description.len() - 2] += 1;
    }
    let p = chi_squared_p(&counts, &modularity);
    assert!(p > 0.05, "p {p}");
    assert_eq!(ids.issued(), 100_000);
}

#[test]
fn every_task_has_its_own_modularity() {
    let generator = RequestGenerator::new(
        &DistributionSpec::uniform(4, 4),
        &DistributionSpec::uniform(1, 6),
        64,
    )
    .unwrap();
    let community = Community::new(0, 0..16);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mixed = false;
    for _ in 0..1000 {
        let r = generator.generate_request(&user(), &community, &mut rng).unwrap();
        assert_eq!(r.len(), 4);
        let sizes: Vec<usize> = r.tasks.iter().map(|t| t.attributes.len()).collect();
        assert!(sizes.iter().all(|s| (1..=6).contains(s)));
        mixed |= sizes.iter().any(|&s| s != sizes[0]);
    }
    assert!(mixed);
}

#[test]
fn expected_mass_sums_to_one() {
    for kind in [
        DistributionKind::Uniform,
        DistributionKind::Gaussian,
        DistributionKind::PowerLaw,
    ] {
        for (lo, hi) in [(1, 2), (2, 18), (2, 12), (5, 60)] {
            let spec = DistributionSpec {
                kind,
                ..DistributionSpec::uniform(lo, hi)
            };
            let p = expected_probabilities(&spec).unwrap();
            assert_eq!(p.len(), spec.bins());
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}
