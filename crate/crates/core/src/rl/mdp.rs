use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Finite discounted MDP. `p[s][a][s']` is the transition probability and
/// `r[s][a]` the expected one-step reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    #[serde(rename = "P")]
    pub p: Vec<Vec<Vec<f64>>>,
    pub r: Vec<Vec<f64>>,
}

impl Mdp {
    pub fn new(p: Vec<Vec<Vec<f64>>>, r: Vec<Vec<f64>>, gamma: f64) -> Result<Self> {
        let n_states = p.len();
        let n_actions = p.first().map_or(0, Vec::len);
        let m = Self { n_states, n_actions, gamma, p, r };
        m.validate()?;
        Ok(m)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let (s, a) = (self.n_states, self.n_actions);
        if s == 0 || a == 0 {
            return Err(Error::Argument("MDP needs at least one state and one action".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Argument(format!("discount must lie in (0, 1), got {}", self.gamma)));
        }
        if self.p.len() != s || self.r.len() != s {
            return Err(Error::Shape(format!("P and r need {s} state rows")));
        }
        for x in 0..s {
            if self.p[x].len() != a || self.r[x].len() != a {
                return Err(Error::Shape(format!("state {x}: expected {a} actions")));
            }
            for u in 0..a {
                let row = &self.p[x][u];
                if row.len() != s {
                    return Err(Error::Shape(format!("P[{x}][{u}] has {} entries, need {s}", row.len())));
                }
                if row.iter().any(|&q| !(q >= 0.0) || !q.is_finite()) {
                    return Err(Error::Domain(format!("P[{x}][{u}] has a negative or non-finite entry")));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Domain(format!("P[{x}][{u}] sums to {total}")));
                }
                if !self.r[x][u].is_finite() {
                    return Err(Error::Domain(format!("r[{x}][{u}] is not finite")));
                }
            }
        }
        Ok(())
    }

    /// Every action loops back with zero reward.
    pub fn is_absorbing(&self, s: usize) -> bool {
        (0..self.n_actions).all(|a| self.p[s][a][s] == 1.0 && self.r[s][a] == 0.0)
    }

    /// Random MDP with Dirichlet(1) transition rows and rewards in `[0, 1)`.
    pub fn random(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> Result<Self> {
        let mut g = rng::seeded(seed);
        let mut p = vec![vec![Vec::new(); n_actions]; n_states];
        let mut r = vec![vec![0.0; n_actions]; n_states];
        for s in 0..n_states {
            for a in 0..n_actions {
                let w: Vec<f64> = (0..n_states).map(|_| -(1.0 - rng::uniform(&mut g)).ln()).collect();
                let total: f64 = w.iter().sum();
                let mut row: Vec<f64> = w.iter().map(|v| v / total).collect();
                // put the rounding residue on the largest entry
                let resid = 1.0 - row.iter().sum::<f64>();
                let imax = argmax(&row);
                row[imax] += resid;
                p[s][a] = row;
                r[s][a] = rng::uniform(&mut g);
            }
        }
        Self::new(p, r, gamma)
    }

    /// `side × side` grid, actions up/right/down/left, deterministic moves
    /// (bumping a wall stays put), reward −1 per step and an absorbing goal
    /// in the bottom-right corner.
    pub fn gridworld(side: usize, gamma: f64) -> Result<Self> {
        let n = side * side;
        let goal = n - 1;
        let moves: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];
        let mut p = vec![vec![vec![0.0; n]; 4]; n];
        let mut r = vec![vec![-1.0; 4]; n];
        for s in 0..n {
            let (row, col) = ((s / side) as isize, (s % side) as isize);
            for (a, (dr, dc)) in moves.iter().enumerate() {
                let next = if s == goal {
                    r[s][a] = 0.0;
                    s
                } else {
                    let (nr, nc) = (row + dr, col + dc);
                    if (0..side as isize).contains(&nr) && (0..side as isize).contains(&nc) {
                        nr as usize * side + nc as usize
                    } else {
                        s
                    }
                };
                p[s][a][next] = 1.0;
            }
        }
        Self::new(p, r, gamma)
    }

    /// `r(s, a) + γ Σ_{s'} P(s'|s, a) v(s')`.
    pub fn q_from_v(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        self.r[s][a] + self.gamma * self.p[s][a].iter().zip(v).map(|(p, w)| p * w).sum::<f64>()
    }

    pub fn sample_next(&self, s: usize, a: usize, g: &mut Rng) -> usize {
        sample_index(&self.p[s][a], g)
    }
}

/// Index of the first maximal entry.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn sample_index(weights: &[f64], g: &mut Rng) -> usize {
    let u = rng::uniform(g);
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // rounding: fall back to the last index with positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Stochastic stationary policy `π(a|s)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub pi: Vec<Vec<f64>>,
}

impl Policy {
    pub fn new(pi: Vec<Vec<f64>>) -> Result<Self> {
        for (s, row) in pi.iter().enumerate() {
            let total: f64 = row.iter().sum();
            if row.iter().any(|&q| !(q >= 0.0)) || (total - 1.0).abs() > 1e-12 {
                return Err(Error::Domain(format!("policy row {s} is not a distribution")));
            }
        }
        Ok(Self { pi })
    }

    pub fn deterministic(actions: &[usize], n_actions: usize) -> Self {
        let pi = actions
            .iter()
            .map(|&a| {
                let mut row = vec![0.0; n_actions];
                row[a] = 1.0;
                row
            })
            .collect();
        Self { pi }
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self { pi: vec![vec![1.0 / n_actions as f64; n_actions]; n_states] }
    }

    /// Random policy with Dirichlet(1) rows.
    pub fn random(n_states: usize, n_actions: usize, g: &mut Rng) -> Self {
        let pi = (0..n_states)
            .map(|_| {
                let w: Vec<f64> = (0..n_actions).map(|_| -(1.0 - rng::uniform(g)).ln()).collect();
                let t: f64 = w.iter().sum();
                let mut row: Vec<f64> = w.iter().map(|x| x / t).collect();
                let resid = 1.0 - row.iter().sum::<f64>();
                row[0] += resid;
                row
            })
            .collect();
        Self { pi }
    }

    /// Action of a one-hot row (first maximal entry otherwise).
    pub fn actions(&self) -> Vec<usize> {
        self.pi.iter().map(|row| argmax(row)).collect()
    }

    pub fn sample(&self, s: usize, g: &mut Rng) -> usize {
        sample_index(&self.pi[s], g)
    }

    pub fn check_shape(&self, mdp: &Mdp) -> Result<()> {
        if self.pi.len() != mdp.n_states || self.pi.iter().any(|r| r.len() != mdp.n_actions) {
            return Err(Error::Shape(format!(
                "policy must be {}×{}",
                mdp.n_states, mdp.n_actions
            )));
        }
        Ok(())
    }
}

/// One trajectory: `(state, action, reward)` with the reward received after
/// taking the action.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Episode {
    pub steps: Vec<(usize, usize, f64)>,
}

/// Rolls out `policy` from `start` for at most `horizon` steps, stopping
/// early on entering an absorbing state.
pub fn sample_episode(mdp: &Mdp, policy: &Policy, start: usize, horizon: usize, g: &mut Rng) -> Episode {
    let mut steps = Vec::new();
    let mut s = start;
    for _ in 0..horizon {
        if mdp.is_absorbing(s) {
            break;
        }
        let a = policy.sample(s, g);
        steps.push((s, a, mdp.r[s][a]));
        s = mdp.sample_next(s, a, g);
    }
    Episode { steps }
}

/// Uniform draw from `0..n`.
pub(crate) fn uniform_index(n: usize, g: &mut Rng) -> usize {
    g.random_range(0..n)
}
