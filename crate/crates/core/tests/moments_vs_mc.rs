use errmoments::{
    conditional_moment_matrix, mc, reduce_conditional, reduce_unconditional, unconditional_moment_matrix,
    FullModelSpec, McConfig, McEstimates, Mode, MomentMatrix, Sampler,
};

fn fig1(half: u32) -> FullModelSpec {
    FullModelSpec::equal_element_means(15, 0.1, 4.0, 0.01, 50.0, half, half, 0.5).unwrap()
}

fn max_gap(a: &MomentMatrix, e: &McEstimates) -> f64 {
    let mc = e.class.named().chain(e.mixture.named());
    a.entries().iter().zip(mc).map(|((_, x), (_, y))| (x - y.mean).abs()).fold(0.0, f64::max)
}

#[test]
fn conditional_moments_track_monte_carlo() {
    let mut gaps = Vec::new();
    for half in [20, 80] {
        let spec = fig1(half);
        let analytic = conditional_moment_matrix(&reduce_conditional(&spec).unwrap()).unwrap();
        let est = mc::run(&McConfig {
            mode: Mode::Conditional,
            t1: 20_000,
            t2: 1,
            seed: 3,
            spec,
            sampler: Sampler::SampleMeans,
        })
        .unwrap();
        let gap = max_gap(&analytic, &est);
        assert!(gap < 0.006, "n/2 = {half}: max gap {gap}");
        assert!((analytic.mixture.rms - est.mixture.rms.mean).abs() < 0.001);
        gaps.push(gap);
    }
    assert!(gaps[1] < gaps[0]);
}

#[test]
fn unconditional_moments_track_monte_carlo() {
    for half in [20, 80] {
        let spec = fig1(half);
        let analytic = unconditional_moment_matrix(&reduce_unconditional(&spec).unwrap()).unwrap();
        let est = mc::run(&McConfig {
            mode: Mode::Unconditional,
            t1: 300,
            t2: 300,
            seed: 3,
            spec,
            sampler: Sampler::SampleMeans,
        })
        .unwrap();
        let gap = max_gap(&analytic, &est);
        assert!(gap < 0.006, "n/2 = {half}: max gap {gap}");
        assert!((analytic.mixture.rms - est.mixture.rms.mean).abs() < 0.003);
        assert!(est.mixture.bias.mean.abs() < 3.0 * est.mixture.bias.stderr + 1e-4);
    }
}

#[test]
fn exact_estimator_mean_in_unconditional_mode() {
    // Averaged over the prior, the Bayesian estimator is unbiased for the true error exactly,
    // so the Monte Carlo bias must vanish within its standard error at any sample size.
    let spec = FullModelSpec::equal_element_means(6, 0.3, 2.0, 0.2, 5.0, 8, 8, 0.5).unwrap();
    let est =
        mc::run(&McConfig { mode: Mode::Unconditional, t1: 200, t2: 400, seed: 9, spec, sampler: Sampler::FullSample })
            .unwrap();
    let b = est.mixture.bias;
    assert!(b.mean.abs() < 3.5 * b.stderr, "bias {} +/- {}", b.mean, b.stderr);
}
