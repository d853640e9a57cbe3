//! Multi-armed bandit over hyperpartitions.
//!
//! Each hyperpartition is an arm. Its reward is the mean of its best `k`
//! scores and the next arm is picked by UCB1 on that reward:
//!
//! ```text
//! ucb = reward_k + c * sqrt(2 * ln(total) / n)
//! ```
//!
//! Untried active arms always go first. Because only the top `k` scores enter
//! the reward, two arms whose best models look alike are pulled about equally
//! often no matter how different the rest of their score distributions are.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{ErrorCode, Rejection, Result};

/// Consecutive evaluation failures after which an arm is switched off.
pub const MAX_CONSECUTIVE_FAILURES: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BanditSettings {
    pub k: usize,
    pub c: f64,
}

impl Default for BanditSettings {
    fn default() -> Self {
        Self { k: 5, c: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub hyperpartition_id: String,
    pub scores: Vec<f64>,
    pub active: bool,
    pub failures: u32,
    pub consecutive_failures: u32,
    /// Set when repeated failures, not the user, switched the arm off.
    pub auto_deactivated: bool,
}

impl Arm {
    pub fn new(id: &str) -> Self {
        Self {
            hyperpartition_id: id.to_string(),
            scores: Vec::new(),
            active: true,
            failures: 0,
            consecutive_failures: 0,
            auto_deactivated: false,
        }
    }

    pub fn pulls(&self) -> usize {
        self.scores.len()
    }
}

/// Mean of the top `min(k, n)` scores; `None` for an untried arm.
pub fn reward(scores: &[f64], k: usize) -> Option<f64> {
    if scores.is_empty() {
        return None;
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let top = &sorted[..k.max(1).min(sorted.len())];
    Some(compensated_sum(top) / top.len() as f64)
}

/// Neumaier summation, so decimal scores such as 0.9 + 0.8 + 0.7 + 0.6 + 0.5
/// add up to 3.5 rather than drifting an ulp away.
fn compensated_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for &x in xs {
        let t = sum + x;
        carry += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + carry
}

/// UCB1 score; `+∞` for an untried arm.
pub fn ucb_score(arm: &Arm, total: usize, k: usize, c: f64) -> f64 {
    match reward(&arm.scores, k) {
        None => f64::INFINITY,
        Some(r) => {
            let n = arm.pulls() as f64;
            r + c * (2.0 * (total.max(1) as f64).ln() / n).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BanditState {
    pub arms: BTreeMap<String, Arm>,
    pub settings: BanditSettings,
    pub total: usize,
}

impl BanditState {
    pub fn new<I, S>(ids: I, settings: BanditSettings) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            arms: ids
                .into_iter()
                .map(|id| (id.as_ref().to_string(), Arm::new(id.as_ref())))
                .collect(),
            settings,
            total: 0,
        }
    }

    fn arm_mut(&mut self, id: &str) -> Result<&mut Arm> {
        self.arms
            .get_mut(id)
            .ok_or_else(|| Rejection::new(ErrorCode::UnknownTarget, format!("no arm {id}")))
    }

    pub fn ensure_arm(&mut self, id: &str) -> &mut Arm {
        self.arms.entry(id.to_string()).or_insert_with(|| Arm::new(id))
    }

    /// Active arm with the highest UCB; ties go to fewer pulls, then the smaller id.
    pub fn select(&self) -> Result<String> {
        let BanditSettings { k, c } = self.settings;
        self.arms
            .values()
            .filter(|a| a.active)
            .map(|a| (ucb_score(a, self.total, k, c), a))
            .max_by(|(sa, a), (sb, b)| {
                sa.total_cmp(sb)
                    .then(b.pulls().cmp(&a.pulls()))
                    .then(b.hyperpartition_id.cmp(&a.hyperpartition_id))
            })
            .map(|(_, a)| a.hyperpartition_id.clone())
            .ok_or_else(|| Rejection::new(ErrorCode::NoActiveArm, "no active arm to select"))
    }

    pub fn record(&mut self, id: &str, score: f64) -> Result<()> {
        let arm = self.arm_mut(id)?;
        arm.scores.push(score);
        arm.consecutive_failures = 0;
        self.total += 1;
        Ok(())
    }

    /// Counts a failed trial. Returns true when this failure switched the arm off.
    pub fn record_failure(&mut self, id: &str) -> Result<bool> {
        let arm = self.arm_mut(id)?;
        arm.failures += 1;
        arm.consecutive_failures += 1;
        if arm.active && arm.consecutive_failures >= MAX_CONSECUTIVE_FAILURES {
            arm.active = false;
            arm.auto_deactivated = true;
            return Ok(true);
        }
        Ok(false)
    }

    pub fn set_active(&mut self, id: &str, active: bool) -> Result<()> {
        let arm = self.arm_mut(id)?;
        arm.active = active;
        if active {
            arm.auto_deactivated = false;
            arm.consecutive_failures = 0;
        }
        Ok(())
    }

    pub fn reward_of(&self, id: &str) -> Option<f64> {
        self.arms.get(id).and_then(|a| reward(&a.scores, self.settings.k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn best_k_reward() {
        let r = reward(&[0.9, 0.8, 0.7, 0.6, 0.5, 0.4], 5).unwrap();
        // (0.9 + 0.8 + 0.7 + 0.6 + 0.5) / 5
        assert_eq!(r, 0.70);
        assert_eq!(reward(&[0.6], 5), Some(0.6));
        assert_eq!(reward(&[0.8; 7], 5), Some(0.8));
        assert_eq!(reward(&[], 5), None);
    }

    #[test]
    fn ucb_arithmetic() {
        let mut arm = Arm::new("a");
        arm.scores = vec![0.8; 4];
        let expected = 0.8 + (2.0 * 100f64.ln() / 4.0).sqrt();
        assert!((ucb_score(&arm, 100, 5, 1.0) - 2.317_427_129_385_146_5).abs() < 1e-12);
        assert_eq!(ucb_score(&arm, 100, 5, 1.0), expected);
        assert_eq!(ucb_score(&arm, 100, 5, 0.0), 0.8);
        assert_eq!(ucb_score(&Arm::new("b"), 100, 5, 1.0), f64::INFINITY);
    }

    #[test]
    fn untried_arms_by_id() {
        let state = BanditState::new(["b:x=1", "a:x=1"], BanditSettings::default());
        assert_eq!(state.select().unwrap(), "a:x=1");
        let single = BanditState::new(["only"], BanditSettings::default());
        assert_eq!(single.select().unwrap(), "only");
    }

    #[test]
    fn inactive_arms_never_selected() {
        let mut state = BanditState::new(["a", "b"], BanditSettings::default());
        state.set_active("a", false).unwrap();
        for _ in 0..5 {
            let id = state.select().unwrap();
            assert_eq!(id, "b");
            state.record(&id, 0.5).unwrap();
        }
        state.set_active("b", false).unwrap();
        assert_eq!(state.select().unwrap_err().code, ErrorCode::NoActiveArm);
    }

    #[test]
    fn reactivation_keeps_history() {
        let mut state = BanditState::new(["a", "b"], BanditSettings::default());
        for s in [0.4, 0.9, 0.6] {
            state.record("a", s).unwrap();
        }
        let before = state.reward_of("a");
        state.set_active("a", false).unwrap();
        state.set_active("a", true).unwrap();
        assert_eq!(state.reward_of("a"), before);
        assert_eq!(state.total, 3);
    }

    #[test]
    fn record_updates_top_k() {
        let mut state = BanditState::new(["a"], BanditSettings { k: 2, c: 1.0 });
        state.record("a", 0.5).unwrap();
        state.record("a", 0.6).unwrap();
        state.record("a", 0.9).unwrap();
        assert!((state.reward_of("a").unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(state.record("zzz", 0.1).unwrap_err().code, ErrorCode::UnknownTarget);
    }

    #[test]
    fn three_failures_deactivate() {
        let mut state = BanditState::new(["a", "b"], BanditSettings::default());
        assert!(!state.record_failure("a").unwrap());
        state.record("a", 0.5).unwrap();
        assert!(!state.record_failure("a").unwrap());
        assert!(!state.record_failure("a").unwrap());
        assert!(state.record_failure("a").unwrap());
        assert!(!state.arms["a"].active);
        assert_eq!(state.arms["a"].failures, 4);
        assert_eq!(state.select().unwrap(), "b");
    }

    proptest! {
        #[test]
        fn reward_permutation_invariant(mut scores in proptest::collection::vec(0.0f64..1.0, 1..30), k in 1usize..8) {
            let r = reward(&scores, k);
            scores.reverse();
            prop_assert_eq!(reward(&scores, k), r);
        }

        #[test]
        fn low_score_leaves_reward_unchanged(scores in proptest::collection::vec(0.0f64..1.0, 5..30), k in 1usize..5) {
            let mut sorted = scores.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let kth = sorted[k - 1];
            let mut more = scores.clone();
            more.push(kth * 0.5);
            prop_assert_eq!(reward(&more, k), reward(&scores, k));
        }

        #[test]
        fn zero_exploration_is_argmax(rewards in proptest::collection::btree_set(0u32..1000, 2..6)) {
            let rewards: Vec<f64> = rewards.into_iter().map(|r| r as f64 / 1000.0).collect();
            let ids: Vec<String> = (0..rewards.len()).map(|i| format!("arm{i}")).collect();
            let mut state = BanditState::new(&ids, BanditSettings { k: 5, c: 0.0 });
            for (id, r) in ids.iter().zip(&rewards) {
                state.record(id, *r).unwrap();
            }
            let best = rewards.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            prop_assert_eq!(state.select().unwrap(), ids[best].clone());
        }
    }
}
