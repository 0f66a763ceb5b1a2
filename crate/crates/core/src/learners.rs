//! Learning rules for both hierarchy levels.
//!
//! Subordinates run role-state Q-learning boosted by an optimistic
//! frequency-maximum term, then fold their supervisor's suggestions into the
//! action values and their exploration rate. Supervisors aggregate the round's
//! subordinate reports into the same kind of optimistic estimate, blend with
//! one imitated peer, and emit instructions: per-pair suggestion degrees plus
//! hard rules forbidding pairs whose normalized value falls below a threshold.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::games::Role;

/// Learner parameters shared by both levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerParams {
    /// Q-learning rate.
    pub alpha: f64,
    /// Initial exploration rate.
    pub epsilon0: f64,
    /// Imitation sharpness of the peer-blending sigmoid.
    pub beta: f64,
    /// Weight of suggestions on exploration-rate updates.
    pub gamma: f64,
    /// Weight of suggestions on subordinate action values.
    pub rho: f64,
    /// Weight of the optimistic frequency-maximum term.
    pub fmq_weight: f64,
    /// Normalized-value threshold below which a pair becomes a rule.
    pub rule_threshold: f64,
    /// Exploration clamp. The lower bound keeps residual exploration
    /// without capping converged payoffs.
    pub epsilon_min: f64,
    pub epsilon_max: f64,
    /// Residual exploration floor for agents whose own greedy action
    /// disagrees with their supervisor's top suggestion. Keeps dissenting
    /// agents sampling the recommended action so rival norm camps merge
    /// instead of freezing.
    pub epsilon_conflict_floor: f64,
}

impl Default for LearnerParams {
    fn default() -> Self {
        LearnerParams {
            alpha: 0.99,
            epsilon0: 0.93,
            beta: 0.1,
            gamma: 0.05,
            rho: 0.01,
            fmq_weight: 10.0,
            rule_threshold: -0.5,
            epsilon_min: 1e-3,
            epsilon_max: 0.99,
            epsilon_conflict_floor: 0.08,
        }
    }
}

pub const N_STATES: usize = Role::COUNT;

#[inline]
fn idx(n_actions: usize, state: Role, action: usize) -> usize {
    state.index() * n_actions + action
}

/// One interaction experience `(state, action, reward)` as reported upward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperienceReport {
    pub agent: usize,
    pub state: Role,
    pub action: usize,
    pub reward: f64,
}

/// Instructions issued by a supervisor for one round: a suggestion degree
/// for every state-action pair and the forbidden subset.
#[derive(Debug, Clone, PartialEq)]
pub struct InstructionSet {
    n_actions: usize,
    suggestions: Vec<f64>,
    forbidden: Vec<bool>,
}

impl InstructionSet {
    pub fn neutral(n_actions: usize) -> Self {
        InstructionSet {
            n_actions,
            suggestions: vec![0.0; N_STATES * n_actions],
            forbidden: vec![false; N_STATES * n_actions],
        }
    }

    #[inline]
    pub fn suggestion(&self, state: Role, action: usize) -> f64 {
        self.suggestions[idx(self.n_actions, state, action)]
    }

    #[inline]
    pub fn is_forbidden(&self, state: Role, action: usize) -> bool {
        self.forbidden[idx(self.n_actions, state, action)]
    }

    /// The rule set as explicit pairs.
    pub fn rules(&self) -> Vec<(Role, usize)> {
        let mut out = Vec::new();
        for state in [Role::Row, Role::Column] {
            for action in 0..self.n_actions {
                if self.is_forbidden(state, action) {
                    out.push((state, action));
                }
            }
        }
        out
    }
}

/// Bottom-level learner state: Q/FMQ/E tables over (role, action), lifetime
/// reward counters backing the optimistic term, and the exploration rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SubordinateState {
    n_actions: usize,
    q: Vec<f64>,
    fmq: Vec<f64>,
    e: Vec<f64>,
    r_max: Vec<f64>,
    obs_total: Vec<u64>,
    obs_at_max: Vec<u64>,
    pub epsilon: f64,
    /// Count of selections where every action was forbidden and the rule
    /// set had to be ignored.
    pub fail_open_selections: u64,
}

impl SubordinateState {
    pub fn new(n_actions: usize, params: &LearnerParams) -> Self {
        let len = N_STATES * n_actions;
        SubordinateState {
            n_actions,
            q: vec![0.0; len],
            fmq: vec![0.0; len],
            e: vec![0.0; len],
            r_max: vec![f64::NEG_INFINITY; len],
            obs_total: vec![0; len],
            obs_at_max: vec![0; len],
            epsilon: params.epsilon0,
            fail_open_selections: 0,
        }
    }

    #[inline]
    pub fn q(&self, state: Role, action: usize) -> f64 {
        self.q[idx(self.n_actions, state, action)]
    }

    #[inline]
    pub fn fmq(&self, state: Role, action: usize) -> f64 {
        self.fmq[idx(self.n_actions, state, action)]
    }

    #[inline]
    pub fn e(&self, state: Role, action: usize) -> f64 {
        self.e[idx(self.n_actions, state, action)]
    }

    pub fn r_max(&self, state: Role, action: usize) -> Option<f64> {
        let i = idx(self.n_actions, state, action);
        (self.obs_total[i] > 0).then(|| self.r_max[i])
    }

    /// Lifetime frequency of receiving the current maximum reward.
    pub fn freq(&self, state: Role, action: usize) -> f64 {
        let i = idx(self.n_actions, state, action);
        if self.obs_total[i] == 0 {
            0.0
        } else {
            self.obs_at_max[i] as f64 / self.obs_total[i] as f64
        }
    }

    pub fn total_observations(&self) -> u64 {
        self.obs_total.iter().sum()
    }

    /// Q update on one feedback, plus the lifetime max/frequency counters.
    /// A strictly higher reward restarts the at-max count.
    pub fn update_q(&mut self, state: Role, action: usize, reward: f64, params: &LearnerParams) {
        let i = idx(self.n_actions, state, action);
        self.q[i] = (1.0 - params.alpha) * self.q[i] + params.alpha * reward;
        self.obs_total[i] += 1;
        if reward > self.r_max[i] {
            self.r_max[i] = reward;
            self.obs_at_max[i] = 1;
        } else if reward == self.r_max[i] {
            self.obs_at_max[i] += 1;
        }
    }

    /// FMQ = Q + freq * r_max * C from lifetime counters; unobserved pairs
    /// stay at FMQ = Q.
    pub fn refresh_fmq(&mut self, params: &LearnerParams) {
        for i in 0..self.q.len() {
            self.fmq[i] = if self.obs_total[i] == 0 {
                self.q[i]
            } else {
                let freq = self.obs_at_max[i] as f64 / self.obs_total[i] as f64;
                self.q[i] + freq * self.r_max[i] * params.fmq_weight
            };
        }
    }

    /// E = FMQ * (1 + d * rho) for every pair.
    pub fn apply_suggestions(&mut self, instr: &InstructionSet, params: &LearnerParams) {
        for state in [Role::Row, Role::Column] {
            for action in 0..self.n_actions {
                let i = idx(self.n_actions, state, action);
                self.e[i] = self.fmq[i] * (1.0 + instr.suggestion(state, action) * params.rho);
            }
        }
    }

    /// E = FMQ, for agents without an enabled supervisor.
    pub fn set_e_from_fmq(&mut self) {
        self.e.copy_from_slice(&self.fmq);
    }

    /// Exploration-rate update from the suggestion on the last played pair,
    /// clamped to the configured band.
    pub fn update_exploration(
        &mut self,
        instr: &InstructionSet,
        last_state: Role,
        last_action: usize,
        params: &LearnerParams,
    ) {
        let d = instr.suggestion(last_state, last_action);
        self.epsilon =
            (self.epsilon * (1.0 - d * params.gamma)).clamp(params.epsilon_min, params.epsilon_max);
    }

    /// Rule-constrained epsilon-greedy selection over E-values.
    ///
    /// The greedy action (ties broken uniformly) is played with probability
    /// 1 - epsilon; each remaining non-forbidden action with probability
    /// epsilon / (|A| - |F| - 1). When every non-greedy action is forbidden
    /// the greedy action is played outright; when every action is forbidden
    /// the rule set is ignored for this selection and the event counted.
    pub fn select_action<R: Rng + ?Sized>(
        &mut self,
        role: Role,
        instr: Option<&InstructionSet>,
        rng: &mut R,
    ) -> usize {
        let allowed = self.allowed_actions(role, instr);
        let allowed = match allowed {
            Some(a) => a,
            None => {
                self.fail_open_selections += 1;
                (0..self.n_actions).collect()
            }
        };
        if allowed.len() == 1 {
            return allowed[0];
        }
        let greedy = self.greedy_among(role, &allowed, rng);
        if rng.random::<f64>() < 1.0 - self.epsilon {
            return greedy;
        }
        let others: Vec<usize> = allowed.iter().copied().filter(|&a| a != greedy).collect();
        others[rng.random_range(0..others.len())]
    }

    fn allowed_actions(&self, role: Role, instr: Option<&InstructionSet>) -> Option<Vec<usize>> {
        let allowed: Vec<usize> = (0..self.n_actions)
            .filter(|&a| instr.map_or(true, |i| !i.is_forbidden(role, a)))
            .collect();
        if allowed.is_empty() {
            None
        } else {
            Some(allowed)
        }
    }

    fn greedy_among<R: Rng + ?Sized>(&self, role: Role, allowed: &[usize], rng: &mut R) -> usize {
        let best = allowed
            .iter()
            .map(|&a| self.e(role, a))
            .fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<usize> = allowed
            .iter()
            .copied()
            .filter(|&a| self.e(role, a) == best)
            .collect();
        if tied.len() == 1 {
            tied[0]
        } else {
            tied[rng.random_range(0..tied.len())]
        }
    }

    /// The marginal selection distribution (tie-breaks averaged out), for
    /// tests and diagnostics.
    pub fn action_probabilities(&self, role: Role, instr: Option<&InstructionSet>) -> Vec<f64> {
        let mut probs = vec![0.0; self.n_actions];
        let Some(allowed) = self.allowed_actions(role, instr) else {
            // fail-open: uniform over the greedy/explore split with no rules
            return self.distribution_over(role, &(0..self.n_actions).collect::<Vec<_>>());
        };
        let dist = self.distribution_over(role, &allowed);
        for (a, p) in dist.into_iter().enumerate() {
            probs[a] = p;
        }
        probs
    }

    fn distribution_over(&self, role: Role, allowed: &[usize]) -> Vec<f64> {
        let mut probs = vec![0.0; self.n_actions];
        if allowed.len() == 1 {
            probs[allowed[0]] = 1.0;
            return probs;
        }
        let best = allowed
            .iter()
            .map(|&a| self.e(role, a))
            .fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<usize> = allowed
            .iter()
            .copied()
            .filter(|&a| self.e(role, a) == best)
            .collect();
        let n_others = (allowed.len() - 1) as f64;
        let explore_each = self.epsilon / n_others;
        for &a in allowed {
            let p_greedy_here = if tied.contains(&a) {
                1.0 / tied.len() as f64
            } else {
                0.0
            };
            probs[a] =
                p_greedy_here * (1.0 - self.epsilon) + (1.0 - p_greedy_here) * explore_each;
        }
        probs
    }
}

/// Supervisor learner state: Q/FMQ/E tables plus the current round's report
/// buffer. The frequency and max-reward statistics are recomputed from the
/// buffer alone each round; Q persists.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisorState {
    n_actions: usize,
    q: Vec<f64>,
    fmq: Vec<f64>,
    e: Vec<f64>,
    buffer: Vec<ExperienceReport>,
}

impl SupervisorState {
    pub fn new(n_actions: usize) -> Self {
        let len = N_STATES * n_actions;
        SupervisorState {
            n_actions,
            q: vec![0.0; len],
            fmq: vec![0.0; len],
            e: vec![0.0; len],
            buffer: Vec::new(),
        }
    }

    #[inline]
    pub fn q(&self, state: Role, action: usize) -> f64 {
        self.q[idx(self.n_actions, state, action)]
    }

    #[inline]
    pub fn fmq(&self, state: Role, action: usize) -> f64 {
        self.fmq[idx(self.n_actions, state, action)]
    }

    #[inline]
    pub fn e(&self, state: Role, action: usize) -> f64 {
        self.e[idx(self.n_actions, state, action)]
    }

    pub fn fmq_table(&self) -> &[f64] {
        &self.fmq
    }

    pub fn report_count(&self) -> usize {
        self.buffer.len()
    }

    pub fn push_report(&mut self, report: ExperienceReport) {
        self.buffer.push(report);
    }

    pub fn clear_reports(&mut self) {
        self.buffer.clear();
    }

    /// Applies the Q update once per buffered report, in ascending agent-id
    /// order (stable within an agent), pinning the round's processing order.
    pub fn update_q_from_reports(&mut self, params: &LearnerParams) {
        self.buffer.sort_by_key(|r| r.agent);
        for r in &self.buffer {
            let i = idx(self.n_actions, r.state, r.action);
            self.q[i] = (1.0 - params.alpha) * self.q[i] + params.alpha * r.reward;
        }
    }

    /// FMQ from this round's reports only: r_max is the round maximum per
    /// pair and freq the fraction of the pair's reports achieving it. Pairs
    /// without reports keep FMQ = Q.
    pub fn refresh_fmq(&mut self, params: &LearnerParams) {
        let len = N_STATES * self.n_actions;
        let mut round_max = vec![f64::NEG_INFINITY; len];
        let mut total = vec![0u32; len];
        for r in &self.buffer {
            let i = idx(self.n_actions, r.state, r.action);
            total[i] += 1;
            if r.reward > round_max[i] {
                round_max[i] = r.reward;
            }
        }
        let mut at_max = vec![0u32; len];
        for r in &self.buffer {
            let i = idx(self.n_actions, r.state, r.action);
            if r.reward == round_max[i] {
                at_max[i] += 1;
            }
        }
        for i in 0..len {
            self.fmq[i] = if total[i] == 0 {
                self.q[i]
            } else {
                let freq = at_max[i] as f64 / total[i] as f64;
                self.q[i] + freq * round_max[i] * params.fmq_weight
            };
        }
    }

    /// Blends one peer's FMQ table into the E-values with the proportional
    /// imitation sigmoid, computed per state-action pair.
    pub fn blend_from_peer(&mut self, peer_fmq: &[f64], params: &LearnerParams) {
        debug_assert_eq!(peer_fmq.len(), self.fmq.len());
        for i in 0..self.fmq.len() {
            let p = sigmoid(params.beta * (peer_fmq[i] - self.fmq[i]));
            self.e[i] = (1.0 - p) * self.fmq[i] + p * peer_fmq[i];
        }
    }

    /// E = own FMQ, for supervisors with no neighboring peers.
    pub fn e_from_own(&mut self) {
        self.e.copy_from_slice(&self.fmq);
    }

    /// Pins the E (and FMQ) table to +1 on the given action and -1
    /// elsewhere in both states, so instruction generation pushes
    /// subordinates toward that action. Used for fixed-strategy supervisors.
    pub fn set_synthetic_preference(&mut self, action: usize) {
        for state in [Role::Row, Role::Column] {
            for a in 0..self.n_actions {
                let i = idx(self.n_actions, state, a);
                let v = if a == action { 1.0 } else { -1.0 };
                self.fmq[i] = v;
                self.e[i] = v;
            }
        }
    }

    /// Normalizes E per state to zero mean and unit population standard
    /// deviation; the normalized values are the suggestion degrees and
    /// pairs below the rule threshold become rules. A zero spread yields
    /// all-neutral suggestions and no rules.
    pub fn generate_instructions(&self, params: &LearnerParams) -> InstructionSet {
        let mut instr = InstructionSet::neutral(self.n_actions);
        for state in [Role::Row, Role::Column] {
            let base = state.index() * self.n_actions;
            let values = &self.e[base..base + self.n_actions];
            let mean = values.iter().sum::<f64>() / self.n_actions as f64;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / self.n_actions as f64;
            let sigma = var.sqrt();
            if sigma <= 1e-12 * (1.0 + mean.abs()) {
                continue; // indistinguishable actions: neutral suggestions
            }
            for action in 0..self.n_actions {
                let normalized = (values[action] - mean) / sigma;
                instr.suggestions[base + action] = normalized;
                instr.forbidden[base + action] = normalized < params.rule_threshold;
            }
        }
        instr
    }
}

/// Proportional-imitation weight: probability of leaning toward the peer.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Weighted peer choice over a supervisor's neighbor list. Returns the
/// chosen group id; `None` when there are no neighbors.
pub fn pick_peer<R: Rng + ?Sized>(com: &[(usize, f64)], rng: &mut R) -> Option<usize> {
    if com.is_empty() {
        return None;
    }
    if com.len() == 1 {
        return Some(com[0].0);
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(group, weight) in com {
        acc += weight;
        if u < acc {
            return Some(group);
        }
    }
    Some(com.last().expect("nonempty").0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> LearnerParams {
        LearnerParams::default()
    }

    fn report(agent: usize, state: Role, action: usize, reward: f64) -> ExperienceReport {
        ExperienceReport { agent, state, action, reward }
    }

    const TOL: f64 = 1e-9;

    #[test]
    fn supervisor_q_update_worked_examples() {
        let p = params();
        let mut s = SupervisorState::new(6);
        s.push_report(report(0, Role::Row, 0, 10.0));
        s.update_q_from_reports(&p);
        assert!((s.q(Role::Row, 0) - 9.9).abs() < TOL);

        let mut s = SupervisorState::new(6);
        s.q[0] = 5.0;
        s.push_report(report(0, Role::Row, 0, 5.0));
        s.update_q_from_reports(&p);
        assert!((s.q(Role::Row, 0) - 5.0).abs() < TOL, "r = Q fixed point");

        // Two reports on the same pair, processed in agent order.
        let mut s = SupervisorState::new(6);
        s.push_report(report(1, Role::Row, 0, -30.0));
        s.push_report(report(0, Role::Row, 0, 10.0));
        s.update_q_from_reports(&p);
        assert!((s.q(Role::Row, 0) - (-29.601)).abs() < TOL);
    }

    #[test]
    fn supervisor_fmq_worked_examples() {
        let mut p = params();
        p.fmq_weight = 10.0;
        let mut s = SupervisorState::new(6);
        s.q[0] = 1.0;
        s.push_report(report(0, Role::Row, 0, 10.0));
        s.push_report(report(1, Role::Row, 0, -30.0));
        s.push_report(report(2, Role::Row, 0, 10.0));
        s.refresh_fmq(&p);
        assert!((s.fmq(Role::Row, 0) - (1.0 + (2.0 / 3.0) * 10.0 * 10.0)).abs() < TOL);

        let mut s = SupervisorState::new(6);
        s.push_report(report(0, Role::Row, 1, 7.0));
        s.refresh_fmq(&p);
        assert!((s.fmq(Role::Row, 1) - 70.0).abs() < TOL, "single report");
        // Pairs without reports keep FMQ = Q.
        assert_eq!(s.fmq(Role::Column, 5), s.q(Role::Column, 5));
    }

    #[test]
    fn imitation_worked_examples() {
        let p = params();
        let mut s = SupervisorState::new(2);
        s.fmq = vec![3.0; 4];
        let peer = vec![3.0; 4];
        s.blend_from_peer(&peer, &p);
        assert!((s.e(Role::Row, 0) - 3.0).abs() < TOL, "equal FMQs: E = FMQ");

        let mut s = SupervisorState::new(2);
        s.fmq = vec![0.0; 4];
        let peer = vec![10.0; 4];
        s.blend_from_peer(&peer, &p);
        let expected_p = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((s.e(Role::Row, 0) - expected_p * 10.0).abs() < TOL);

        let mut zero_beta = params();
        zero_beta.beta = 0.0;
        let mut s = SupervisorState::new(2);
        s.fmq = vec![-7.0, 4.0, 0.0, 1.0];
        let peer = vec![5.0, -2.0, 3.0, 1.0];
        s.blend_from_peer(&peer, &zero_beta);
        for i in 0..4 {
            assert!((s.e[i] - 0.5 * (s.fmq[i] + peer[i])).abs() < TOL, "beta = 0 averages");
        }
    }

    #[test]
    fn sigmoid_properties() {
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        let mut prev = 0.0;
        for i in -100..=100 {
            let v = sigmoid(i as f64 / 10.0);
            assert!(v > prev, "monotone");
            prev = v;
        }
    }

    #[test]
    fn instruction_generation_worked_examples() {
        let p = params();
        let mut s = SupervisorState::new(3);
        s.e = vec![1.0, 2.0, 3.0, 0.0, 0.0, 0.0];
        let instr = s.generate_instructions(&p);
        let sigma = (2.0f64 / 3.0).sqrt();
        assert!((instr.suggestion(Role::Row, 0) - (-1.0 / sigma)).abs() < TOL);
        assert!((instr.suggestion(Role::Row, 1) - 0.0).abs() < TOL);
        assert!((instr.suggestion(Role::Row, 2) - (1.0 / sigma)).abs() < TOL);
        assert!(instr.is_forbidden(Role::Row, 0), "-1.2247 < -0.5");
        assert!(!instr.is_forbidden(Role::Row, 1));
        assert!(!instr.is_forbidden(Role::Row, 2));
        // Column state had zero spread: neutral.
        for a in 0..3 {
            assert_eq!(instr.suggestion(Role::Column, a), 0.0);
            assert!(!instr.is_forbidden(Role::Column, a));
        }

        let mut s = SupervisorState::new(6);
        s.e = vec![10.0, 10.0, 10.0, 10.0, 10.0, -50.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let instr = s.generate_instructions(&p);
        let rules = instr.rules();
        assert_eq!(rules, vec![(Role::Row, 5)], "only the -50 action is ruled out");
        assert!((instr.suggestion(Role::Row, 5) + 5.0 / 500.0f64.sqrt() * 10.0).abs() < 1e-6);
        assert!(instr.suggestion(Role::Row, 0) > 0.4 && instr.suggestion(Role::Row, 0) < 0.5);
    }

    #[test]
    fn normalized_values_have_zero_mean_unit_std() {
        let p = params();
        let mut s = SupervisorState::new(5);
        s.e = vec![3.0, -1.0, 4.0, 1.0, -5.0, 9.0, 2.0, 6.0, 5.0, 3.0];
        let instr = s.generate_instructions(&p);
        for state in [Role::Row, Role::Column] {
            let vals: Vec<f64> = (0..5).map(|a| instr.suggestion(state, a)).collect();
            let mean = vals.iter().sum::<f64>() / 5.0;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 5.0;
            assert!(mean.abs() < TOL);
            assert!((var.sqrt() - 1.0).abs() < TOL);
        }
    }

    #[test]
    fn instruction_generation_is_shift_invariant() {
        let p = params();
        let mut s = SupervisorState::new(4);
        s.e = vec![2.0, -3.0, 7.0, 1.0, 0.5, 0.5, -2.0, 4.0];
        let base = s.generate_instructions(&p);
        let mut shifted = s.clone();
        for v in &mut shifted.e {
            *v += 123.25;
        }
        let other = shifted.generate_instructions(&p);
        for state in [Role::Row, Role::Column] {
            for a in 0..4 {
                assert!((base.suggestion(state, a) - other.suggestion(state, a)).abs() < 1e-9);
                assert_eq!(base.is_forbidden(state, a), other.is_forbidden(state, a));
            }
        }
    }

    #[test]
    fn subordinate_q_and_counters() {
        let p = params();
        let mut s = SubordinateState::new(6, &p);
        s.update_q(Role::Row, 0, 1.0, &p);
        assert!((s.q(Role::Row, 0) - 0.99).abs() < TOL);

        let mut s = SubordinateState::new(6, &p);
        s.update_q(Role::Row, 0, 10.0, &p);
        s.update_q(Role::Row, 0, 10.0, &p);
        s.update_q(Role::Row, 0, -30.0, &p);
        assert_eq!(s.r_max(Role::Row, 0), Some(10.0));
        assert!((s.freq(Role::Row, 0) - 2.0 / 3.0).abs() < TOL);

        // A new lifetime maximum restarts the at-max count.
        let mut s = SubordinateState::new(6, &p);
        s.update_q(Role::Row, 0, 7.0, &p);
        s.update_q(Role::Row, 0, 10.0, &p);
        assert_eq!(s.r_max(Role::Row, 0), Some(10.0));
        assert!((s.freq(Role::Row, 0) - 0.5).abs() < TOL);
    }

    #[test]
    fn subordinate_fmq_lifetime_vs_supervisor_round() {
        let p = params();
        // Lifetime view: rewards 10 then -30 on one pair -> freq 1/2 at max 10.
        let mut sub = SubordinateState::new(6, &p);
        sub.update_q(Role::Row, 0, 10.0, &p);
        sub.update_q(Role::Row, 0, -30.0, &p);
        sub.refresh_fmq(&p);
        assert!((sub.fmq(Role::Row, 0) - (sub.q(Role::Row, 0) + 0.5 * 10.0 * 10.0)).abs() < TOL);

        // Round view: a supervisor seeing only the second round's report has
        // freq 1 at the round maximum -30.
        let mut sup = SupervisorState::new(6);
        sup.push_report(report(0, Role::Row, 0, -30.0));
        sup.update_q_from_reports(&p);
        sup.refresh_fmq(&p);
        assert!((sup.fmq(Role::Row, 0) - (sup.q(Role::Row, 0) + 1.0 * (-30.0) * 10.0)).abs() < TOL);

        // Zero counters: FMQ = Q.
        let mut fresh = SubordinateState::new(6, &p);
        fresh.refresh_fmq(&p);
        assert_eq!(fresh.fmq(Role::Column, 3), fresh.q(Role::Column, 3));
    }

    #[test]
    fn suggestion_application_worked_examples() {
        let p = params();
        let mut s = SubordinateState::new(2, &p);
        s.fmq = vec![10.0, -10.0, 0.0, 0.0];
        let mut instr = InstructionSet::neutral(2);
        s.apply_suggestions(&instr, &p);
        assert_eq!(s.e(Role::Row, 0), 10.0, "neutral suggestion leaves E = FMQ");

        instr.suggestions[0] = 1.2247;
        instr.suggestions[1] = 1.0;
        s.apply_suggestions(&instr, &p);
        assert!((s.e(Role::Row, 0) - 10.0 * (1.0 + 0.012247)).abs() < 1e-6);
        assert!((s.e(Role::Row, 1) - (-10.1)).abs() < TOL, "suggestion amplifies negative value");
    }

    #[test]
    fn exploration_update_and_clamp() {
        let p = params();
        let mut s = SubordinateState::new(2, &p);
        let mut instr = InstructionSet::neutral(2);
        s.update_exploration(&instr, Role::Row, 0, &p);
        assert_eq!(s.epsilon, 0.93, "neutral suggestion leaves epsilon unchanged");

        instr.suggestions[0] = 2.0;
        s.update_exploration(&instr, Role::Row, 0, &p);
        assert!((s.epsilon - 0.837).abs() < TOL);

        let mut s = SubordinateState::new(2, &p);
        instr.suggestions[0] = -2.0;
        s.update_exploration(&instr, Role::Row, 0, &p);
        assert!((s.epsilon - 0.99).abs() < TOL, "0.93 * 1.1 clamps to the upper bound");

        let mut s = SubordinateState::new(2, &p);
        s.epsilon = p.epsilon_min;
        instr.suggestions[0] = 2.0;
        s.update_exploration(&instr, Role::Row, 0, &p);
        assert_eq!(s.epsilon, p.epsilon_min, "lower clamp");
    }

    #[test]
    fn selection_distribution_worked_example() {
        // |A| = 6, |F| = 2, epsilon = 0.6, unique greedy not forbidden.
        let p = params();
        let mut s = SubordinateState::new(6, &p);
        s.epsilon = 0.6;
        s.e[0] = 5.0; // greedy for Row
        let mut instr = InstructionSet::neutral(6);
        instr.forbidden[4] = true;
        instr.forbidden[5] = true;
        let probs = s.action_probabilities(Role::Row, Some(&instr));
        assert!((probs[0] - 0.4).abs() < TOL);
        for a in 1..4 {
            assert!((probs[a] - 0.2).abs() < TOL);
        }
        assert_eq!(probs[4], 0.0);
        assert_eq!(probs[5], 0.0);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < TOL);

        // epsilon = 0: always greedy.
        s.epsilon = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(s.select_action(Role::Row, Some(&instr), &mut rng), 0);
        }

        // All non-greedy actions forbidden: greedy with probability 1.
        let mut s = SubordinateState::new(3, &p);
        s.epsilon = 0.9;
        s.e[0] = 1.0;
        let mut instr = InstructionSet::neutral(3);
        instr.forbidden[1] = true;
        instr.forbidden[2] = true;
        let probs = s.action_probabilities(Role::Row, Some(&instr));
        assert_eq!(probs, vec![1.0, 0.0, 0.0]);
        for _ in 0..100 {
            assert_eq!(s.select_action(Role::Row, Some(&instr), &mut rng), 0);
        }
    }

    #[test]
    fn forbidden_actions_are_never_selected() {
        let p = params();
        let mut s = SubordinateState::new(6, &p);
        s.epsilon = 0.93;
        s.e[2] = 3.0;
        let mut instr = InstructionSet::neutral(6);
        instr.forbidden[1] = true;
        instr.forbidden[4] = true;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1_000_000 {
            let a = s.select_action(Role::Row, Some(&instr), &mut rng);
            debug_assert!(a != 1 && a != 4);
            if a == 1 || a == 4 {
                panic!("forbidden action selected");
            }
        }
        assert_eq!(s.fail_open_selections, 0);
    }

    #[test]
    fn all_forbidden_fails_open() {
        let p = params();
        let mut s = SubordinateState::new(3, &p);
        let mut instr = InstructionSet::neutral(3);
        for f in &mut instr.forbidden {
            *f = true;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = s.select_action(Role::Row, Some(&instr), &mut rng);
        assert!(a < 3);
        assert_eq!(s.fail_open_selections, 1);
        let probs = s.action_probabilities(Role::Row, Some(&instr));
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < TOL);
    }

    #[test]
    fn ablation_reduces_to_plain_epsilon_greedy() {
        // C = 0, rho = 0, gamma = 0, no rules: E must track Q exactly.
        let mut p = params();
        p.fmq_weight = 0.0;
        p.rho = 0.0;
        p.gamma = 0.0;
        let mut s = SubordinateState::new(4, &p);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let instr = InstructionSet::neutral(4);
        for step in 0..200 {
            let state = if step % 2 == 0 { Role::Row } else { Role::Column };
            let action = step % 4;
            let reward = ((step * 7) % 13) as f64 - 6.0;
            s.update_q(state, action, reward, &p);
            s.refresh_fmq(&p);
            s.apply_suggestions(&instr, &p);
            s.update_exploration(&instr, state, action, &p);
        }
        assert_eq!(s.epsilon, p.epsilon0);
        for state in [Role::Row, Role::Column] {
            for a in 0..4 {
                assert_eq!(s.e(state, a), s.q(state, a));
                assert_eq!(s.fmq(state, a), s.q(state, a));
            }
        }
        let _ = s.select_action(Role::Row, None, &mut rng);
    }

    #[test]
    fn peer_choice_is_weighted() {
        let com = vec![(2usize, 0.75), (5usize, 0.25)];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0u32; 2];
        for _ in 0..100_000 {
            match pick_peer(&com, &mut rng) {
                Some(2) => counts[0] += 1,
                Some(5) => counts[1] += 1,
                other => panic!("unexpected peer {other:?}"),
            }
        }
        let share = counts[0] as f64 / 100_000.0;
        assert!((share - 0.75).abs() < 0.01, "share {share}");
        assert_eq!(pick_peer(&[], &mut rng), None);
    }

    proptest! {
        #[test]
        fn selection_distribution_sums_to_one(
            n_actions in 2usize..8,
            epsilon in 0.0f64..=1.0,
            forbid_mask in 0u32..256,
            values in proptest::collection::vec(-50.0f64..50.0, 16),
        ) {
            let p = params();
            let mut s = SubordinateState::new(n_actions, &p);
            s.epsilon = epsilon;
            for i in 0..N_STATES * n_actions {
                s.e[i] = values[i % values.len()];
            }
            let mut instr = InstructionSet::neutral(n_actions);
            for a in 0..n_actions {
                instr.forbidden[a] = forbid_mask & (1 << a) != 0;
            }
            let probs = s.action_probabilities(Role::Row, Some(&instr));
            let total: f64 = probs.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            let any_allowed = (0..n_actions).any(|a| !instr.is_forbidden(Role::Row, a));
            if any_allowed {
                for a in 0..n_actions {
                    if instr.is_forbidden(Role::Row, a) {
                        prop_assert_eq!(probs[a], 0.0);
                    }
                }
            }
        }

        #[test]
        fn imitation_weight_is_monotone(x in -200.0f64..200.0, y in -200.0f64..200.0) {
            let beta = 0.1;
            if x < y {
                prop_assert!(sigmoid(beta * x) <= sigmoid(beta * y));
            }
        }
    }
}
