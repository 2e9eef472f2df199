use qreg_core::functionals::quotient;
use qreg_core::learning::normalize;
use qreg_core::{
    certify, learn, power_iterate, random_init, CounterRng, HuberPolicy, LearnConfig, Mode, QuotientProblem, Shape, Signal,
};

fn random_signal(rng: &mut CounterRng, m: usize) -> Signal {
    Signal::from_vec(rng.gaussians(m)).unwrap()
}

fn problem(seed: u64) -> QuotientProblem {
    let mut rng = CounterRng::new(seed);
    let m = 12 + (seed % 9) as usize;
    let n = 2 + (seed % 4) as usize;
    if seed % 5 == 4 {
        let parts = vec![random_signal(&mut rng, m), random_signal(&mut rng, m)];
        QuotientProblem::infimal(parts, vec![random_signal(&mut rng, m)], Shape::vector(n)).unwrap()
    } else {
        let filters = 1 + (seed % 2) as usize;
        let pos = (0..2).map(|_| random_signal(&mut rng, m)).collect();
        let neg = (0..2).map(|_| random_signal(&mut rng, m)).collect();
        QuotientProblem::standard(pos, neg, filters, Shape::vector(n)).unwrap()
    }
}

#[test]
fn random_trajectories_certify() {
    let cfg = LearnConfig {
        outer_max: 30,
        ..LearnConfig::default()
    };
    for seed in 0..20 {
        let p = problem(seed);
        let init = random_init(p.kernel(), p.filters(), 1000 + seed).unwrap();
        let traj = power_iterate(&init, &p, &cfg).unwrap();
        let report = certify(&traj);
        assert!(report.passed(), "seed {seed}: {report:?}");
        assert!(
            report.decrease.checked > 0 && report.monotone.checked > 0,
            "seed {seed}: {report:?} {}",
            traj.records.len()
        );
        assert_eq!(report.gradient.checked, report.decrease.checked);
        for bank in traj.iterates() {
            assert!(bank.satisfies_constraints(), "seed {seed}: infeasible iterate");
        }
        if p.mode() == Mode::Standard {
            let mus: Vec<f64> = traj.records.iter().map(|r| r.mu).collect();
            assert!(
                mus.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-12),
                "seed {seed}: {mus:?}"
            );
        }
    }
}

#[test]
fn unsmoothed_trajectories_skip_the_gradient_check() {
    let cfg = LearnConfig {
        outer_max: 10,
        huber: HuberPolicy::Off,
        ..LearnConfig::default()
    };
    let p = problem(2);
    let init = random_init(p.kernel(), p.filters(), 7).unwrap();
    let report = certify(&power_iterate(&init, &p, &cfg).unwrap());
    assert!(report.passed());
    assert_eq!(report.gradient.checked, 0);
    assert!(report.decrease.checked > 0);
}

#[test]
fn learned_bank_is_no_worse_than_any_start() {
    let cfg = LearnConfig {
        restarts: 4,
        outer_max: 20,
        seed: 40,
        ..LearnConfig::default()
    };
    for seed in [0, 3, 4] {
        let p = problem(seed);
        let result = learn(&p, &cfg).unwrap();
        assert!(result.certification.passed());
        assert_eq!(result.certification.trajectories, 4);
        assert!((quotient(&p, &result.bank).unwrap().mu - result.mu).abs() <= 1e-12 * result.mu.max(1.0));
        for i in 0..4 {
            let start = normalize(&random_init(p.kernel(), p.filters(), 40 + i).unwrap(), p.mode()).unwrap();
            assert!(result.mu <= quotient(&p, &start).unwrap().mu + 1e-12);
        }
    }
}
