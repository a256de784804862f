use mfdl::rl::{
    bellman_backup_opt, bellman_backup_pi, policy_evaluate_exact, policy_iteration, sup_dist, value_iteration, Mdp,
    Policy,
};
use mfdl::rng;
use proptest::prelude::*;

fn random_values(seed: u64, n: usize, scale: f64) -> Vec<f64> {
    let mut g = rng::stream(seed, 3);
    (0..n).map(|_| scale * rng::normal(&mut g)).collect()
}

fn optimal_values(mdp: &Mdp) -> Vec<f64> {
    value_iteration(mdp, &vec![0.0; mdp.n_states], 1e-13, 100_000).unwrap().v
}

/// Pointwise maximum of `v^π` over all deterministic policies.
fn brute_force(mdp: &Mdp) -> Vec<f64> {
    let (s, a) = (mdp.n_states, mdp.n_actions);
    let mut best = vec![f64::NEG_INFINITY; s];
    for code in 0..a.pow(s as u32) {
        let actions: Vec<usize> = (0..s).map(|i| code / a.pow(i as u32) % a).collect();
        let v = policy_evaluate_exact(mdp, &Policy::deterministic(&actions, a)).unwrap();
        for (b, x) in best.iter_mut().zip(v) {
            *b = b.max(x);
        }
    }
    best
}

#[test]
fn backups_contract_in_sup_norm() {
    for seed in 0..100 {
        let mdp = Mdp::random(5, 3, 0.5 + 0.004 * seed as f64, seed).unwrap();
        let (v, w) = (random_values(seed, 5, 10.0), random_values(seed + 1000, 5, 10.0));
        let gap = sup_dist(&v, &w);
        let pi = Policy::random(5, 3, &mut rng::seeded(seed));
        let tp = sup_dist(&bellman_backup_pi(&mdp, &pi, &v).unwrap(), &bellman_backup_pi(&mdp, &pi, &w).unwrap());
        let to = sup_dist(&bellman_backup_opt(&mdp, &v).unwrap().0, &bellman_backup_opt(&mdp, &w).unwrap().0);
        assert!(tp <= mdp.gamma * gap * (1.0 + 1e-12), "seed {seed}: {tp} > γ·{gap}");
        assert!(to <= mdp.gamma * gap * (1.0 + 1e-12), "seed {seed}: {to} > γ·{gap}");
    }
}

#[test]
fn every_policy_is_dominated_by_optimum() {
    for seed in 0..100 {
        let mdp = Mdp::random(6, 3, 0.9, seed).unwrap();
        let star = optimal_values(&mdp);
        let pi = Policy::random(6, 3, &mut rng::seeded(seed + 7));
        let v = policy_evaluate_exact(&mdp, &pi).unwrap();
        assert!(v.iter().zip(&star).all(|(a, b)| *a <= b + 1e-9), "seed {seed}");
    }
}

#[test]
fn value_iteration_error_decays_geometrically() {
    for seed in 0..10 {
        let mdp = Mdp::random(8, 3, 0.8, seed).unwrap();
        let star = optimal_values(&mdp);
        let mut v = vec![0.0; 8];
        let mut logs = Vec::new();
        for _ in 0..40 {
            v = bellman_backup_opt(&mdp, &v).unwrap().0;
            let e = sup_dist(&v, &star);
            if e < 1e-11 {
                break;
            }
            logs.push(e.ln());
        }
        let n = logs.len() as f64;
        let mx = (n - 1.0) / 2.0;
        let my = logs.iter().sum::<f64>() / n;
        let cov: f64 = logs.iter().enumerate().map(|(k, y)| (k as f64 - mx) * (y - my)).sum();
        let var: f64 = (0..logs.len()).map(|k| (k as f64 - mx).powi(2)).sum();
        assert!(cov / var <= mdp.gamma.ln() + 0.02, "seed {seed}: slope {}", cov / var);
    }
}

#[test]
fn policy_iteration_matches_brute_force() {
    for seed in 0..20 {
        let mdp = Mdp::random(6, 3, 0.9, 100 + seed).unwrap();
        let pi = policy_iteration(&mdp).unwrap();
        assert!(sup_dist(&pi.v, &brute_force(&mdp)) <= 1e-8, "seed {seed}");
    }
}

#[test]
fn policy_iteration_on_gridworld_terminates_and_agrees() {
    let mdp = Mdp::gridworld(4, 0.9).unwrap();
    let pi = policy_iteration(&mdp).unwrap();
    let vi = value_iteration(&mdp, &[0.0; 16], 1e-12, 10_000).unwrap();
    assert!(pi.iterations < 20);
    assert!(sup_dist(&pi.v, &vi.v) < 1e-9);
    // each improvement weakly increases values
    for w in pi.history.windows(2) {
        assert!(w[0].iter().zip(&w[1]).all(|(a, b)| *a <= b + 1e-12));
    }
}

proptest! {
    #[test]
    fn optimal_backup_is_monotone(seed in 0u64..1000, bump in proptest::collection::vec(0.0f64..5.0, 4)) {
        let mdp = Mdp::random(4, 2, 0.7, seed).unwrap();
        let v = random_values(seed, 4, 3.0);
        let w: Vec<f64> = v.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let (tv, tw) = (bellman_backup_opt(&mdp, &v).unwrap().0, bellman_backup_opt(&mdp, &w).unwrap().0);
        prop_assert!(tv.iter().zip(&tw).all(|(a, b)| *a <= b + 1e-12));
    }

    #[test]
    fn fixed_point_of_policy_backup(seed in 0u64..1000) {
        let mdp = Mdp::random(5, 2, 0.85, seed).unwrap();
        let pi = Policy::random(5, 2, &mut rng::seeded(seed));
        let v = policy_evaluate_exact(&mdp, &pi).unwrap();
        prop_assert!(sup_dist(&bellman_backup_pi(&mdp, &pi, &v).unwrap(), &v) < 1e-10);
    }
}
