use nalgebra::{DMatrix, DVector};

use super::mdp::{argmax, Mdp, Policy};
use crate::error::{shape_check, Error, Result};

/// `(T^π v)(s) = Σ_a π(a|s) [r(s,a) + γ Σ_{s'} P(s'|s,a) v(s')]`.
pub fn bellman_backup_pi(mdp: &Mdp, policy: &Policy, v: &[f64]) -> Result<Vec<f64>> {
    policy.check_shape(mdp)?;
    shape_check("value table", mdp.n_states, v.len())?;
    Ok((0..mdp.n_states)
        .map(|s| {
            (0..mdp.n_actions)
                .filter(|&a| policy.pi[s][a] != 0.0)
                .map(|a| policy.pi[s][a] * mdp.q_from_v(s, a, v))
                .sum()
        })
        .collect())
}

/// `(T* v)(s) = max_a [r(s,a) + γ Σ P v]` with the maximizing actions
/// (lowest index on ties).
pub fn bellman_backup_opt(mdp: &Mdp, v: &[f64]) -> Result<(Vec<f64>, Vec<usize>)> {
    shape_check("value table", mdp.n_states, v.len())?;
    let mut out = Vec::with_capacity(mdp.n_states);
    let mut acts = Vec::with_capacity(mdp.n_states);
    for s in 0..mdp.n_states {
        let q: Vec<f64> = (0..mdp.n_actions).map(|a| mdp.q_from_v(s, a, v)).collect();
        let a = argmax(&q);
        out.push(q[a]);
        acts.push(a);
    }
    Ok((out, acts))
}

/// `v^π = (I − γP^π)⁻¹ r^π`.
pub fn policy_evaluate_exact(mdp: &Mdp, policy: &Policy) -> Result<Vec<f64>> {
    policy.check_shape(mdp)?;
    let n = mdp.n_states;
    let mut m = DMatrix::<f64>::identity(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for s in 0..n {
        for a in 0..mdp.n_actions {
            let w = policy.pi[s][a];
            if w == 0.0 {
                continue;
            }
            rhs[s] += w * mdp.r[s][a];
            for (t, &p) in mdp.p[s][a].iter().enumerate() {
                m[(s, t)] -= mdp.gamma * w * p;
            }
        }
    }
    let v = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("I − γP^π is singular; transition data is inconsistent".into()))?;
    Ok(v.iter().copied().collect())
}

/// Deterministic policy greedy with respect to `v`.
pub fn greedy_policy(mdp: &Mdp, v: &[f64]) -> Result<Policy> {
    let (_, acts) = bellman_backup_opt(mdp, v)?;
    Ok(Policy::deterministic(&acts, mdp.n_actions))
}

#[derive(Clone, Debug)]
pub struct PiOutcome {
    pub policy: Policy,
    pub v: Vec<f64>,
    pub iterations: usize,
    /// `v^{π_k}` for every evaluated policy.
    pub history: Vec<Vec<f64>>,
}

/// Policy iteration from the all-zeros-action policy; stops when the greedy
/// improvement reproduces the current policy.
pub fn policy_iteration(mdp: &Mdp) -> Result<PiOutcome> {
    mdp.validate()?;
    let mut policy = Policy::deterministic(&vec![0; mdp.n_states], mdp.n_actions);
    let mut history = Vec::new();
    // the number of deterministic policies bounds the sweep count
    let cap = (mdp.n_actions as f64).powi(mdp.n_states as i32).min(1e7) as usize + 1;
    for k in 1..=cap {
        let v = policy_evaluate_exact(mdp, &policy)?;
        history.push(v.clone());
        let next = greedy_policy(mdp, &v)?;
        if next == policy {
            return Ok(PiOutcome { policy, v, iterations: k, history });
        }
        policy = next;
    }
    Err(Error::Stagnation {
        outer: cap,
        detail: "policy iteration cycled".into(),
        last_iterate: history.pop().unwrap_or_default(),
    })
}

#[derive(Clone, Debug)]
pub struct ViOutcome {
    pub v: Vec<f64>,
    pub policy: Policy,
    pub iterations: usize,
    /// `‖v_{k+1} − v_k‖∞` per sweep.
    pub residuals: Vec<f64>,
}

/// Iterates `v ← T* v` from `v0` until `‖Δv‖∞ < tol`.
pub fn value_iteration(mdp: &Mdp, v0: &[f64], tol: f64, max_iter: usize) -> Result<ViOutcome> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
    }
    shape_check("initial values", mdp.n_states, v0.len())?;
    let mut v = v0.to_vec();
    let mut residuals = Vec::new();
    for k in 1..=max_iter {
        let (next, _) = bellman_backup_opt(mdp, &v)?;
        let delta = sup_dist(&next, &v);
        residuals.push(delta);
        v = next;
        if delta < tol {
            // greedy with respect to the returned table
            let policy = greedy_policy(mdp, &v)?;
            return Ok(ViOutcome { v, policy, iterations: k, residuals });
        }
    }
    Err(Error::Stagnation {
        outer: max_iter,
        detail: format!("value iteration residual {} above {tol}", residuals.last().copied().unwrap_or(f64::NAN)),
        last_iterate: v,
    })
}

pub fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
