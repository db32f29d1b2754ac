use pitman_core::distribution::{exact_moment, length_pmf, psf_pmf};
use pitman_core::sampler::{
    chi_square_gof, crp_sample, k_histogram, mc_moments, sample_k, sample_k_many, RunningStats, SeedSpec,
};
use pitman_core::{Mode, PartitionCounts, PitmanParams};

fn params(n: u64, alpha: &str, theta: &str) -> PitmanParams {
    PitmanParams::parse(n, alpha, theta).unwrap()
}

fn exact_pmf(p: &PitmanParams) -> Vec<f64> {
    length_pmf(p, Mode::Exact).unwrap().iter().map(|v| v.to_f64()).collect()
}

/// `|freq - p| <= 4 sqrt(p (1 - p) / reps)`
fn within_4se(count: u64, reps: u64, p: f64) -> bool {
    let freq = count as f64 / reps as f64;
    (freq - p).abs() <= 4.0 * (p * (1.0 - p) / reps as f64).sqrt()
}

#[test]
fn one_customer_one_block() {
    let p = params(1, "1/2", "1");
    assert_eq!(sample_k(&p, &SeedSpec::new(1, 0)), 1);
    assert_eq!(crp_sample(&p, &SeedSpec::new(1, 0)).counts(), [1]);
}

#[test]
fn two_customers() {
    for (alpha, theta) in [("1/2", "1"), ("1/4", "-1/8"), ("3/4", "5")] {
        let p = params(2, alpha, theta);
        let reps = 100_000;
        let hist = k_histogram(&p, reps, &SeedSpec::new(5, 0));
        let (a, t) = (p.alpha_f64(), p.theta_f64());
        assert!(within_4se(hist[1], reps, (t + a) / (t + 1.0)), "{alpha}, {theta}: {hist:?}");
    }
}

#[test]
fn three_customers_cells() {
    let p = params(3, "1/2", "1/2");
    let reps = 100_000;
    let hist = k_histogram(&p, reps, &SeedSpec::new(9, 0));
    for (count, want) in hist.iter().zip([0.2, 0.4, 0.4]) {
        assert!(within_4se(*count, reps, want), "{hist:?}");
    }
}

#[test]
fn total_variation_at_ten() {
    let p = params(10, "1/2", "1");
    let reps = 1_000_000;
    let hist = k_histogram(&p, reps, &SeedSpec::new(77, 0));
    let tv: f64 = hist
        .iter()
        .zip(exact_pmf(&p))
        .map(|(&c, q)| (c as f64 / reps as f64 - q).abs())
        .sum::<f64>()
        / 2.0;
    assert!(tv <= 0.01, "{tv}");
}

#[test]
fn seating_process_matches_the_length_law() {
    // the full seating process, not the thinned length sampler
    for n in [5u64, 12] {
        let p = params(n, "1/3", "2");
        let reps = 50_000u64;
        let mut hist = vec![0u64; n as usize];
        for j in 0..reps {
            hist[crp_sample(&p, &SeedSpec::new(31, j)).length() as usize - 1] += 1;
        }
        let gof = chi_square_gof(&hist, &exact_pmf(&p)).unwrap();
        assert!(gof.passes(1e-3), "n = {n}: {gof:?}");
    }
}

#[test]
fn all_singletons_frequency() {
    let p = params(5, "1/2", "1");
    let singletons = PartitionCounts::new(vec![5, 0, 0, 0, 0]).unwrap();
    let want = psf_pmf(&singletons, &p, Mode::Exact).unwrap().to_f64();
    let reps = 100_000u64;
    let hits = (0..reps)
        .filter(|&j| crp_sample(&p, &SeedSpec::new(3, j)) == singletons)
        .count() as u64;
    assert!(within_4se(hits, reps, want), "{hits} vs {want}");
}

#[test]
fn chi_square_at_desk_scale() {
    for (j, n) in [5u64, 10, 20].into_iter().enumerate() {
        let p = params(n, "1/4", "1/2");
        let hist = k_histogram(&p, 1_000_000, &SeedSpec::new(2, j as u64));
        let gof = chi_square_gof(&hist, &exact_pmf(&p)).unwrap();
        assert!(gof.passes(1e-3), "n = {n}: {gof:?}");
    }
}

#[test]
fn monte_carlo_moments() {
    let p = params(3, "1/2", "1/2");
    let stats = mc_moments(&p, 1, 100_000, &SeedSpec::new(4, 0)).unwrap();
    assert!((stats.mean - 2.2).abs() <= 4.0 * stats.standard_error);
    let p = params(100, "1/2", "1");
    let stats = mc_moments(&p, 2, 100_000, &SeedSpec::new(4, 1)).unwrap();
    let exact = exact_moment(&p, 2, Mode::Exact).unwrap().to_f64();
    assert!((stats.mean - exact).abs() <= 4.0 * stats.standard_error);
    assert!((stats.standard_error - (stats.variance / stats.count as f64).sqrt()).abs() < 1e-15);
    assert_eq!(stats.moment_order, 2);
}

#[test]
fn degenerate_requests_are_rejected() {
    let p = params(3, "1/2", "1/2");
    assert!(mc_moments(&p, 0, 100, &SeedSpec::new(0, 0)).is_err());
    assert!(mc_moments(&p, 1, 1, &SeedSpec::new(0, 0)).is_err());
}

#[test]
fn replay_is_exact() {
    let p = params(200, "1/3", "3/2");
    let seed = SeedSpec::new(123, 4);
    assert_eq!(crp_sample(&p, &seed), crp_sample(&p, &seed));
    assert_eq!(sample_k_many(&p, 5000, &seed), sample_k_many(&p, 5000, &seed));
    assert_ne!(sample_k_many(&p, 5000, &seed), sample_k_many(&p, 5000, &SeedSpec::new(123, 5)));
}

#[test]
fn merged_streams_agree_with_one_stream() {
    let p = params(60, "1/2", "2");
    let draws = sample_k_many(&p, 40_000, &SeedSpec::new(8, 0));
    // merging per-chunk accumulators reproduces the pooled moments
    let mut pooled = RunningStats::default();
    draws.iter().for_each(|&k| pooled.push(k as f64));
    let mut merged = RunningStats::default();
    for chunk in draws.chunks(3000) {
        let mut part = RunningStats::default();
        chunk.iter().for_each(|&k| part.push(k as f64));
        merged.merge(&part);
    }
    let (a, b) = (pooled.finish(1).unwrap(), merged.finish(1).unwrap());
    assert!((a.mean - b.mean).abs() < 1e-12 * a.mean);
    assert!((a.variance - b.variance).abs() < 1e-9 * a.variance);
    // one long stream against many short ones
    let mut single = RunningStats::default();
    let mut rng = SeedSpec::new(8, 1).rng();
    for _ in 0..40_000 {
        single.push(pitman_core::sampler::sample_k_with(&p, &mut rng) as f64);
    }
    let c = single.finish(1).unwrap();
    let combined_se = (a.standard_error.powi(2) + c.standard_error.powi(2)).sqrt();
    assert!((a.mean - c.mean).abs() <= 4.0 * combined_se);
}
