//! Runs the best-k UCB1 bandit against three noisy arms and prints how the
//! pulls were spread and how each arm's reward and UCB score ended up.

use autosteer::bandit::{ucb_score, BanditSettings, BanditState};
use rand::{Rng, SeedableRng};

fn main() -> autosteer::error::Result<()> {
    let means = [("a", 0.9), ("b", 0.7), ("c", 0.5)];
    let mut bandit = BanditState::new(means.iter().map(|(id, _)| *id), BanditSettings::default());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for _ in 0..300 {
        let id = bandit.select()?;
        let mean = means.iter().find(|(m, _)| *m == id).map(|(_, v)| *v).unwrap();
        bandit.record(&id, mean + rng.random_range(-0.05..0.05))?;
    }
    let s = bandit.settings;
    println!("{:<4} {:>6} {:>8} {:>8}", "arm", "pulls", "reward", "ucb");
    for arm in bandit.arms.values() {
        println!(
            "{:<4} {:>6} {:>8.4} {:>8.4}",
            arm.hyperpartition_id,
            arm.pulls(),
            bandit.reward_of(&arm.hyperpartition_id).unwrap_or(f64::NAN),
            ucb_score(arm, bandit.total, s.k, s.c)
        );
    }
    Ok(())
}
