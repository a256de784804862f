//! Finite MDPs: Bellman operators, exact and iterative planners, and tabular
//! model-free learners. Argmax ties always go to the lowest action index.

mod learn;
mod mdp;
mod planning;

pub use learn::{lambda_returns, q_learning, sarsa, td_lambda_evaluate, Alpha, LearnConfig, Learned};
pub use mdp::{argmax, sample_episode, Episode, Mdp, Policy};
pub use planning::{
    bellman_backup_opt, bellman_backup_pi, greedy_policy, policy_evaluate_exact, policy_iteration,
    sup_dist, value_iteration, PiOutcome, ViOutcome,
};
