use errmoments::planner::{MIN_N, TABLE_PS, TABLE_TAUS_CONDITIONAL};
use errmoments::{kappa, min_n, plan_grid, Mode, PlanQuery, ScanRule};

fn query(mode: Mode, p: u32, tau: f64, rule: ScanRule) -> PlanQuery {
    PlanQuery { mode, p, beta: 1.0, tau, n_max: 10_000, rule }
}

#[test]
fn conditional_kappa_decreases_in_n() {
    for p in [2, 16, 128] {
        for beta in [0.5, 1.0, 4.0] {
            let ks: Vec<f64> = (40..=200).step_by(2).map(|n| kappa(n, p, beta, Mode::Conditional).unwrap()).collect();
            assert!(ks.windows(2).all(|w| w[1] < w[0]), "p = {p}, beta = {beta}");
        }
    }
}

#[test]
fn reference_conditional_block_within_one_step() {
    let want: [[u32; 7]; 6] = [
        [14, 22, 38, 70, 132, 256, 506],
        [18, 28, 48, 86, 164, 318, 626],
        [24, 36, 60, 110, 208, 404, 796],
        [32, 48, 80, 144, 272, 530, 1044],
        [44, 64, 108, 196, 372, 722, 1424],
        [62, 94, 158, 284, 538, 1044, 2056],
    ];
    let grid =
        plan_grid(Mode::Conditional, 1.0, &TABLE_TAUS_CONDITIONAL, &TABLE_PS, 10_000, ScanRule::default()).unwrap();
    for (cell, w) in grid.iter().zip(want.iter().flatten()) {
        let got = cell.n_min.unwrap();
        assert!(got.abs_diff(*w) <= 2, "tau {} p {}: {got} vs {w}", cell.tau, cell.p);
    }
}

#[test]
fn returned_size_meets_the_target_and_its_predecessor_does_not() {
    for mode in [Mode::Conditional, Mode::Unconditional] {
        for (p, tau) in [(4, 0.02), (32, 0.015), (8, 0.07)] {
            let r = min_n(&query(mode, p, tau, ScanRule::default())).unwrap();
            let n = r.n_min.unwrap();
            assert_eq!(r.kappa_at_n, Some(kappa(n, p, 1.0, mode).unwrap()));
            assert!(r.kappa_at_n.unwrap() < tau);
            if n > MIN_N {
                assert!(kappa(n - 2, p, 1.0, mode).unwrap() >= tau);
            }
        }
    }
}

#[test]
fn safe_rule_skips_the_small_sample_dip() {
    // For large p the unconditional RMS is tiny at the smallest n, rises, and falls again.
    let literal = min_n(&query(Mode::Unconditional, 128, 0.01, ScanRule::Literal)).unwrap();
    let safe = min_n(&query(Mode::Unconditional, 128, 0.01, ScanRule::default())).unwrap();
    assert_eq!(literal.n_min, Some(MIN_N));
    let n = safe.n_min.unwrap();
    assert!(n.abs_diff(628) <= 2, "{n}");
    let peak = safe.trace.iter().map(|&(_, k)| k).fold(0.0, f64::max);
    assert!(peak > 0.01);
    assert!(safe.trace.iter().filter(|&&(m, _)| m >= n).all(|&(_, k)| k < 0.01));
}

#[test]
fn ceiling_yields_none() {
    let r = min_n(&PlanQuery { n_max: 20, ..query(Mode::Conditional, 128, 0.05, ScanRule::Literal) }).unwrap();
    assert_eq!(r.n_min, None);
    assert_eq!(r.trace.last().unwrap().0, 20);
}

#[test]
fn invalid_queries_are_rejected() {
    assert!(min_n(&query(Mode::Conditional, 4, 0.0, ScanRule::Literal)).is_err());
    assert!(min_n(&query(Mode::Conditional, 0, 0.1, ScanRule::Literal)).is_err());
    assert!(min_n(&PlanQuery { n_max: 7, ..query(Mode::Conditional, 4, 0.1, ScanRule::Literal) }).is_err());
    assert!(min_n(&query(Mode::Conditional, 4, 0.1, ScanRule::Safe { horizon: 3 })).is_err());
    assert!(kappa(5, 4, 1.0, Mode::Conditional).is_err());
}
