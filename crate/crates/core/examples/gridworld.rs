//! Value iteration, policy iteration and Q-learning on the 4×4 gridworld.

use mfdl::rl::{policy_iteration, q_learning, value_iteration, LearnConfig, Mdp};

fn show(actions: &[usize]) -> String {
    let arrows = ['↑', '→', '↓', '←'];
    actions
        .chunks(4)
        .map(|row| row.iter().map(|&a| arrows[a]).collect::<String>())
        .collect::<Vec<_>>()
        .join("\n")
}

fn main() -> mfdl::Result<()> {
    let mdp = Mdp::gridworld(4, 0.9)?;
    let vi = value_iteration(&mdp, &[0.0; 16], 1e-10, 10_000)?;
    let pi = policy_iteration(&mdp)?;
    let q = q_learning(&mdp, &LearnConfig::default(), None)?;
    println!("value iteration: {} sweeps\n{}\n", vi.iterations, show(&vi.policy.actions()));
    println!("policy iteration: {} improvements\n{}\n", pi.iterations, show(&pi.policy.actions()));
    println!("Q-learning: {} episodes\n{}", q.episodes, show(&q.greedy_actions()));
    Ok(())
}
