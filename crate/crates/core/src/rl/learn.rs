use serde::{Deserialize, Serialize};

use super::mdp::{argmax, uniform_index, Episode, Mdp};
use crate::error::{shape_check, Error, Result};
use crate::rng::{self, Rng};

/// Learning-rate rule, indexed by the visit count `n` of the entry being
/// updated (`n = 0` on the first visit).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
#[derive(Default)]
pub enum Alpha {
    /// `1/(n + 1)`.
    #[default]
    Visits,
    Constant { alpha: f64 },
    /// `α₀ k₀/(k₀ + n)`: starts at `α₀` and decays harmonically.
    Harmonic { alpha0: f64, k0: f64 },
}


impl Alpha {
    pub fn at(self, n: usize) -> f64 {
        match self {
            Alpha::Visits => 1.0 / (n as f64 + 1.0),
            Alpha::Constant { alpha } => alpha,
            Alpha::Harmonic { alpha0, k0 } => alpha0 * k0 / (k0 + n as f64),
        }
    }
}

/// `λ`-return targets for every step of an episode, computed from the value
/// table `v`. Rewards past the end of the episode are zero, and bootstrapping
/// only happens from states reached inside the episode.
pub fn lambda_returns(ep: &Episode, v: &[f64], lambda: f64, gamma: f64) -> Vec<f64> {
    let n = ep.steps.len();
    let mut out = vec![0.0; n];
    // backward recursion G_t = r_t + γ[(1−λ) v(x_{t+1}) + λ G_{t+1}], G_T = 0
    let mut next_g = 0.0;
    for t in (0..n).rev() {
        let (_, _, r) = ep.steps[t];
        let boot = if t + 1 < n { v[ep.steps[t + 1].0] } else { 0.0 };
        let g = if t + 1 < n {
            r + gamma * ((1.0 - lambda) * boot + lambda * next_g)
        } else {
            r
        };
        out[t] = g;
        next_g = g;
    }
    out
}

/// Offline forward-view TD(λ): for each episode the λ-returns are computed
/// from the table at the start of the episode and all updates are applied
/// at its end. Step sizes follow `alpha` by per-state visit count.
pub fn td_lambda_evaluate(
    episodes: &[Episode],
    lambda: f64,
    gamma: f64,
    alpha: Alpha,
    v0: &[f64],
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Argument(format!("λ must lie in [0, 1], got {lambda}")));
    }
    let mut v = v0.to_vec();
    let mut visits = vec![0usize; v.len()];
    for ep in episodes {
        if let Some(&(s, _, _)) = ep.steps.iter().find(|(s, _, _)| *s >= v.len()) {
            return Err(Error::Shape(format!("episode visits state {s}, table has {}", v.len())));
        }
        let targets = lambda_returns(ep, &v, lambda, gamma);
        let mut delta = vec![0.0; v.len()];
        for (&(s, _, _), g) in ep.steps.iter().zip(targets) {
            delta[s] += alpha.at(visits[s]) * (g - v[s]);
            visits[s] += 1;
        }
        for (vs, d) in v.iter_mut().zip(delta) {
            *vs += d;
        }
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub epsilon: f64,
    pub alpha: Alpha,
    /// Total environment steps.
    pub steps: usize,
    /// Episode length cap.
    pub horizon: usize,
    /// Start state; `None` draws uniformly among non-absorbing states.
    pub start: Option<usize>,
    pub seed: u64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self { epsilon: 0.1, alpha: Alpha::Visits, steps: 50_000, horizon: 200, start: None, seed: 0 }
    }
}

impl LearnConfig {
    fn validate(&self, mdp: &Mdp) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Argument(format!("ε must lie in [0, 1], got {}", self.epsilon)));
        }
        if self.horizon == 0 {
            return Err(Error::Argument("episode horizon must be positive".into()));
        }
        if let Some(s) = self.start {
            if s >= mdp.n_states {
                return Err(Error::Argument(format!("start state {s} out of range")));
            }
        }
        Ok(())
    }
}

/// Tabular learner output with visit statistics.
#[derive(Clone, Debug)]
pub struct Learned {
    pub q: Vec<Vec<f64>>,
    pub visits: Vec<Vec<usize>>,
    pub episodes: usize,
}

impl Learned {
    pub fn greedy_actions(&self) -> Vec<usize> {
        self.q.iter().map(|row| argmax(row)).collect()
    }
}

fn epsilon_greedy(q: &[f64], eps: f64, g: &mut Rng) -> usize {
    if rng::uniform(g) < eps {
        uniform_index(q.len(), g)
    } else {
        argmax(q)
    }
}

fn start_state(mdp: &Mdp, cfg: &LearnConfig, g: &mut Rng) -> Result<usize> {
    if let Some(s) = cfg.start {
        return Ok(s);
    }
    let live: Vec<usize> = (0..mdp.n_states).filter(|&s| !mdp.is_absorbing(s)).collect();
    if live.is_empty() {
        return Err(Error::Precondition("every state is absorbing".into()));
    }
    Ok(live[uniform_index(live.len(), g)])
}

#[derive(Clone, Copy, PartialEq)]
enum Target {
    Sarsa,
    QLearning,
}

fn run(mdp: &Mdp, cfg: &LearnConfig, q0: Option<&[Vec<f64>]>, target: Target) -> Result<Learned> {
    mdp.validate()?;
    cfg.validate(mdp)?;
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let mut q = match q0 {
        Some(t) => {
            shape_check("Q table rows", ns, t.len())?;
            t.to_vec()
        }
        None => vec![vec![0.0; na]; ns],
    };
    let mut visits = vec![vec![0usize; na]; ns];
    let mut g = rng::seeded(cfg.seed);
    let mut taken = 0;
    let mut episodes = 0;
    while taken < cfg.steps {
        episodes += 1;
        let mut s = start_state(mdp, cfg, &mut g)?;
        let mut a = epsilon_greedy(&q[s], cfg.epsilon, &mut g);
        for _ in 0..cfg.horizon {
            if taken >= cfg.steps || mdp.is_absorbing(s) {
                break;
            }
            let r = mdp.r[s][a];
            let s2 = mdp.sample_next(s, a, &mut g);
            let a2 = epsilon_greedy(&q[s2], cfg.epsilon, &mut g);
            let boot = match target {
                Target::Sarsa => q[s2][a2],
                Target::QLearning => q[s2].iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            };
            let step = cfg.alpha.at(visits[s][a]);
            q[s][a] += step * (r + mdp.gamma * boot - q[s][a]);
            visits[s][a] += 1;
            taken += 1;
            s = s2;
            a = a2;
        }
    }
    Ok(Learned { q, visits, episodes })
}

/// On-policy SARSA with ε-greedy behaviour.
pub fn sarsa(mdp: &Mdp, cfg: &LearnConfig, q0: Option<&[Vec<f64>]>) -> Result<Learned> {
    run(mdp, cfg, q0, Target::Sarsa)
}

/// Off-policy Q-learning with ε-greedy behaviour.
pub fn q_learning(mdp: &Mdp, cfg: &LearnConfig, q0: Option<&[Vec<f64>]>) -> Result<Learned> {
    run(mdp, cfg, q0, Target::QLearning)
}
