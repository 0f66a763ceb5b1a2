//! The round engine: pairing, role assignment, play, learning, reporting,
//! and instruction dissemination, plus fixed-strategy agents, disabled
//! supervisors, and isolated sub-populations.
//!
//! One [`World`] is one replica. Every source of randomness flows through a
//! single seeded stream owned by the world, so a simulation is a pure
//! function of its [`SimConfig`].

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::games::{Game, GameError, GameKind, JointAction, Role};
use crate::grouping::{self, Grouping, GroupingError, GroupingKind};
use crate::learners::{
    pick_peer, ExperienceReport, InstructionSet, LearnerParams, SubordinateState, SupervisorState,
};
use crate::metrics::{self, RunSummary};
use crate::topology::{
    centrality, CentralityMetric, Graph, TopologyError, TopologyKind, TopologyParams,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Grouping(#[from] GroupingError),
}

/// What an agent is: a learner running the full strategy, or a fixed agent
/// that always plays one action and never touches its value tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    Learner,
    Fixed(usize),
}

/// Hierarchy level targeted by fixed-agent placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Subordinate,
    Supervisor,
}

/// Placement heuristic for fixed agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlacementMetric {
    #[serde(rename = "random")]
    Random,
    #[serde(untagged)]
    Centrality(CentralityMetric),
}

impl std::fmt::Display for PlacementMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlacementMetric::Random => f.write_str("random"),
            PlacementMetric::Centrality(m) => write!(f, "{m}"),
        }
    }
}

/// When the fixed-agent schedule applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsertionTime {
    /// Before the given round index runs.
    Round(u32),
    /// This many rounds after convergence is first detected (late
    /// intervention). Must be at least 1.
    AfterConvergence(u32),
}

/// Fixed-strategy agent schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedSchedule {
    pub count: usize,
    pub action: usize,
    pub metric: PlacementMetric,
    pub level: Level,
    pub insertion: InsertionTime,
}

/// Which game to play: a builtin kind or a game file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct GameSpec {
    #[serde(default)]
    pub kind: Option<GameKind>,
    #[serde(default)]
    pub n_actions: Option<usize>,
    #[serde(default)]
    pub file: Option<PathBuf>,
}

impl GameSpec {
    pub fn builtin(kind: GameKind, n_actions: usize) -> Self {
        GameSpec {
            kind: Some(kind),
            n_actions: Some(n_actions),
            file: None,
        }
    }

    pub fn build(&self) -> Result<Game, EngineError> {
        match (&self.kind, &self.file) {
            (Some(kind), None) => {
                let n = self.n_actions.ok_or_else(|| {
                    EngineError::Config("game.n_actions required with game.kind".into())
                })?;
                Ok(Game::make_builtin(*kind, n)?)
            }
            (None, Some(path)) => Ok(Game::from_path(path)?),
            _ => Err(EngineError::Config(
                "game spec needs exactly one of kind or file".into(),
            )),
        }
    }
}

/// Network specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub kind: TopologyKind,
    pub n: usize,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_rewire")]
    pub rewire_prob: f64,
    #[serde(default)]
    pub edge_prob: Option<f64>,
}

fn default_degree() -> usize {
    6
}

fn default_rewire() -> f64 {
    0.1
}

impl TopologySpec {
    pub fn small_world(n: usize) -> Self {
        TopologySpec {
            kind: TopologyKind::SmallWorld,
            n,
            degree: 6,
            rewire_prob: 0.1,
            edge_prob: None,
        }
    }

    pub fn ring(n: usize, degree: usize) -> Self {
        TopologySpec {
            kind: TopologyKind::Ring,
            n,
            degree,
            rewire_prob: 0.0,
            edge_prob: None,
        }
    }

    fn params(&self) -> TopologyParams {
        TopologyParams {
            degree: self.degree,
            rewire_prob: self.rewire_prob,
            edge_prob: self.edge_prob,
        }
    }
}

/// How many supervisors to disable (drawn uniformly at run start).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisabledSupervisors {
    Count(usize),
    Fraction(f64),
}

impl Default for DisabledSupervisors {
    fn default() -> Self {
        DisabledSupervisors::Count(0)
    }
}

/// Two equal sub-populations with cross-population interaction probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsolationSpec {
    pub p_inter: f64,
}

/// Convergence criterion: a window of consecutive rounds in which one
/// optimal-norm joint action accounts for at least `threshold` of all
/// interactions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSpec {
    pub window: u32,
    pub threshold: f64,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        ConvergenceSpec {
            window: 10,
            threshold: 0.9,
        }
    }
}

/// Full specification of one replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub game: GameSpec,
    pub topology: TopologySpec,
    pub grouping: GroupingKind,
    pub params: LearnerParams,
    pub rounds: u32,
    pub seed: u64,
    pub convergence: ConvergenceSpec,
    pub fixed_agents: Option<FixedSchedule>,
    pub disabled_supervisors: DisabledSupervisors,
    pub isolation: Option<IsolationSpec>,
    /// Retain per-interaction records in the trace (tests and debugging).
    pub record_interactions: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            game: GameSpec::builtin(GameKind::Cghp, 6),
            topology: TopologySpec::small_world(100),
            grouping: GroupingKind::Degree,
            params: LearnerParams::default(),
            rounds: 2000,
            seed: 0,
            convergence: ConvergenceSpec::default(),
            fixed_agents: None,
            disabled_supervisors: DisabledSupervisors::default(),
            isolation: None,
            record_interactions: false,
        }
    }
}

impl SimConfig {
    pub fn new(kind: GameKind, n_actions: usize) -> Self {
        SimConfig {
            game: GameSpec::builtin(kind, n_actions),
            ..Default::default()
        }
    }

    /// Checks everything that can be checked before the first round runs.
    pub fn validate(&self) -> Result<(), EngineError> {
        let game = self.game.build()?;
        if self.convergence.window == 0 {
            return Err(EngineError::Config("convergence.window must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.convergence.threshold) {
            return Err(EngineError::Config(
                "convergence.threshold must lie in [0, 1]".into(),
            ));
        }
        if let Some(schedule) = &self.fixed_agents {
            if schedule.action >= game.n_actions() {
                return Err(EngineError::Config(format!(
                    "fixed action {} out of range for {} actions",
                    schedule.action,
                    game.n_actions()
                )));
            }
            match schedule.insertion {
                InsertionTime::Round(r) if r > self.rounds => {
                    return Err(EngineError::Config(format!(
                        "insertion round {r} exceeds total rounds {}",
                        self.rounds
                    )));
                }
                InsertionTime::AfterConvergence(0) => {
                    return Err(EngineError::Config(
                        "after_convergence offset must be >= 1".into(),
                    ));
                }
                _ => {}
            }
        }
        if let DisabledSupervisors::Fraction(f) = self.disabled_supervisors {
            if !(0.0..=1.0).contains(&f) {
                return Err(EngineError::Config(format!(
                    "disabled supervisor fraction {f} outside [0, 1]"
                )));
            }
        }
        if let Some(iso) = &self.isolation {
            if !(0.0..=1.0).contains(&iso.p_inter) {
                return Err(EngineError::Config(format!(
                    "isolation p_inter {} outside [0, 1]",
                    iso.p_inter
                )));
            }
        }
        Ok(())
    }
}

/// One interaction within a round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub initiator: usize,
    pub partner: usize,
    pub row_agent: usize,
    pub col_agent: usize,
    pub joint: JointAction,
    pub row_payoff: f64,
    pub col_payoff: f64,
}

/// Per-round outcome: interaction records (when enabled), the joint-action
/// histogram, and the average payoff per participant.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: u32,
    pub interactions: Vec<Interaction>,
    pub interaction_count: u32,
    pub avg_payoff: f64,
    /// Joint-action counts, row-major over `n_actions^2`.
    pub histogram: Vec<u32>,
    /// Isolation runs: per-population histograms and interaction counts.
    /// Cross-population interactions count toward both sides.
    pub population_histograms: Option<[(Vec<u32>, u32); 2]>,
}

impl RoundRecord {
    pub fn norm_share(&self, n_actions: usize, norm: JointAction) -> f64 {
        if self.interaction_count == 0 {
            return 0.0;
        }
        self.histogram[norm.0 * n_actions + norm.1] as f64 / self.interaction_count as f64
    }
}

struct Agent {
    kind: AgentKind,
    state: SubordinateState,
    last_exp: Option<(Role, usize)>,
}

struct SupervisorSlot {
    node: usize,
    enabled: bool,
    fixed: bool,
    state: SupervisorState,
    /// Enabled neighboring groups with renormalized weights.
    com: Vec<(usize, f64)>,
}

/// One replica's full mutable state.
pub struct World {
    game: Game,
    graph: Graph,
    grouping: Grouping,
    params: LearnerParams,
    agents: Vec<Agent>,
    supervisors: Vec<SupervisorSlot>,
    instructions: Vec<Option<InstructionSet>>,
    is_supervisor: Vec<bool>,
    rng: ChaCha8Rng,
    round: u32,
    isolation: Option<(usize, f64)>, // (boundary index, p_inter)
    record_interactions: bool,
    warnings: Vec<String>,
    probe_initiator_only: bool,
}

impl World {
    /// Builds the world: graph, grouping, hierarchy, and agent states.
    /// Fixed-agent schedules are applied by [`run_simulation`], not here.
    pub fn new(config: &SimConfig) -> Result<World, EngineError> {
        config.validate()?;
        let game = config.game.build()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut warnings = Vec::new();

        let (graph, grouping, isolation) = if let Some(iso) = &config.isolation {
            let (graph, grouping, mut w) = build_isolated(config, &mut rng)?;
            warnings.append(&mut w);
            (graph, grouping, Some((config.topology.n, iso.p_inter)))
        } else {
            let graph_seed = rng.random::<u64>();
            let graph = crate::topology::generate(
                config.topology.kind,
                config.topology.n,
                &config.topology.params(),
                graph_seed,
            )?;
            let grouping_seed = rng.random::<u64>();
            let (grouping, mut w) = grouping::build(&config.grouping, &graph, grouping_seed)?;
            warnings.append(&mut w);
            (graph, grouping, None)
        };

        let k = grouping.group_count();
        let disabled_count = match config.disabled_supervisors {
            DisabledSupervisors::Count(c) => {
                if c > k {
                    return Err(EngineError::Config(format!(
                        "cannot disable {c} of {k} supervisors"
                    )));
                }
                c
            }
            DisabledSupervisors::Fraction(f) => ((f * k as f64).round() as usize).min(k),
        };
        let mut disabled = vec![false; k];
        if disabled_count > 0 {
            let mut ids: Vec<usize> = (0..k).collect();
            ids.shuffle(&mut rng);
            for &g in ids.iter().take(disabled_count) {
                disabled[g] = true;
            }
        }

        let n = graph.n();
        let n_actions = game.n_actions();
        let agents = (0..n)
            .map(|_| Agent {
                kind: AgentKind::Learner,
                state: SubordinateState::new(n_actions, &config.params),
                last_exp: None,
            })
            .collect();

        let mut is_supervisor = vec![false; n];
        let supervisors = (0..k)
            .map(|g| {
                let node = grouping.supervisor_of_group(g);
                is_supervisor[node] = true;
                let com: Vec<(usize, f64)> = {
                    let raw: Vec<(usize, f64)> = grouping
                        .com(g)
                        .iter()
                        .copied()
                        .filter(|&(peer, _)| !disabled[peer])
                        .collect();
                    let total: f64 = raw.iter().map(|&(_, w)| w).sum();
                    if total > 0.0 {
                        raw.into_iter().map(|(p, w)| (p, w / total)).collect()
                    } else {
                        Vec::new()
                    }
                };
                SupervisorSlot {
                    node,
                    enabled: !disabled[g],
                    fixed: false,
                    state: SupervisorState::new(n_actions),
                    com,
                }
            })
            .collect();

        let probe_initiator_only = std::env::var("NORMSIM_PROBE_INIT_ONLY").is_ok();
        Ok(World {
            probe_initiator_only,
            instructions: vec![None; k],
            game,
            graph,
            grouping,
            params: config.params,
            agents,
            supervisors,
            is_supervisor,
            rng,
            round: 0,
            isolation,
            record_interactions: config.record_interactions,
            warnings,
        })
    }

    pub fn game(&self) -> &Game {
        &self.game
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn grouping(&self) -> &Grouping {
        &self.grouping
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn agent_kind(&self, node: usize) -> AgentKind {
        self.agents[node].kind
    }

    pub fn agent_state(&self, node: usize) -> &SubordinateState {
        &self.agents[node].state
    }

    pub fn is_supervisor_node(&self, node: usize) -> bool {
        self.is_supervisor[node]
    }

    pub fn supervisor_enabled(&self, group: usize) -> bool {
        self.supervisors[group].enabled
    }

    /// Converts the top `count` eligible agents under the placement metric
    /// into fixed-strategy agents playing `action`. Supervisor-level
    /// conversions also pin the group's instruction source to the action.
    pub fn place_fixed_agents(
        &mut self,
        count: usize,
        action: usize,
        metric: PlacementMetric,
        level: Level,
    ) -> Result<(), EngineError> {
        if action >= self.game.n_actions() {
            return Err(EngineError::Config(format!(
                "fixed action {action} out of range"
            )));
        }
        let eligible: Vec<usize> = match level {
            Level::Subordinate => (0..self.graph.n())
                .filter(|&v| !self.is_supervisor[v])
                .collect(),
            Level::Supervisor => self.supervisors.iter().map(|s| s.node).collect(),
        };
        if count > eligible.len() {
            return Err(EngineError::Config(format!(
                "cannot convert {count} agents: only {} eligible at the {level:?} level",
                eligible.len()
            )));
        }
        let chosen: Vec<usize> = match metric {
            PlacementMetric::Random => {
                let mut pool = eligible;
                pool.shuffle(&mut self.rng);
                pool.truncate(count);
                pool
            }
            PlacementMetric::Centrality(m) => {
                let scores = centrality(&self.graph, m)?.scores;
                let mut pool = eligible;
                pool.sort_by(|&a, &b| {
                    scores[b]
                        .partial_cmp(&scores[a])
                        .expect("centrality scores are finite")
                        .then(a.cmp(&b))
                });
                pool.truncate(count);
                pool
            }
        };
        for node in chosen {
            self.agents[node].kind = AgentKind::Fixed(action);
            if self.is_supervisor[node] {
                for slot in &mut self.supervisors {
                    if slot.node == node {
                        slot.fixed = true;
                        slot.state.set_synthetic_preference(action);
                    }
                }
            }
        }
        Ok(())
    }

    fn pick_partner(&mut self, node: usize) -> usize {
        if let Some((boundary, p_inter)) = self.isolation {
            if p_inter > 0.0 && self.rng.random::<f64>() < p_inter {
                // Uniform member of the other population.
                let other = self.graph.n() - boundary;
                return if node < boundary {
                    boundary + self.rng.random_range(0..other)
                } else {
                    self.rng.random_range(0..boundary)
                };
            }
        }
        let neighbors = self.graph.neighbors(node);
        neighbors[self.rng.random_range(0..neighbors.len())]
    }

    fn select_action_for(&mut self, node: usize, role: Role) -> usize {
        match self.agents[node].kind {
            AgentKind::Fixed(action) => action,
            AgentKind::Learner => {
                let group = self.grouping.group_of(node);
                let instr = self.instructions[group].as_ref();
                self.agents[node]
                    .state
                    .select_action(role, instr, &mut self.rng)
            }
        }
    }

    fn deliver_feedback(&mut self, node: usize, role: Role, action: usize, reward: f64) {
        let agent = &mut self.agents[node];
        agent.last_exp = Some((role, action));
        if agent.kind != AgentKind::Learner {
            return;
        }
        agent.state.update_q(role, action, reward, &self.params);
        let group = self.grouping.group_of(node);
        let slot = &mut self.supervisors[group];
        if slot.enabled && !slot.fixed {
            slot.state.push_report(ExperienceReport {
                agent: node,
                state: role,
                action,
                reward,
            });
        }
    }

    /// Runs one full round of the interaction protocol and returns its
    /// record. Every agent initiates exactly one interaction, so a round
    /// holds `n` interactions and an agent may take part in several.
    pub fn run_round(&mut self) -> RoundRecord {
        let n = self.graph.n();
        let n_actions = self.game.n_actions();
        for agent in &mut self.agents {
            agent.last_exp = None;
        }
        let mut record = RoundRecord {
            round: self.round,
            interactions: Vec::with_capacity(if self.record_interactions { n } else { 0 }),
            interaction_count: n as u32,
            avg_payoff: 0.0,
            histogram: vec![0; n_actions * n_actions],
            population_histograms: self.isolation.map(|_| {
                [
                    (vec![0; n_actions * n_actions], 0),
                    (vec![0; n_actions * n_actions], 0),
                ]
            }),
        };
        let mut payoff_total = 0.0;

        for initiator in 0..n {
            let partner = self.pick_partner(initiator);
            let initiator_is_row = self.rng.random::<bool>();
            let (initiator_role, partner_role) = if initiator_is_row {
                (Role::Row, Role::Column)
            } else {
                (Role::Column, Role::Row)
            };
            let initiator_action = self.select_action_for(initiator, initiator_role);
            let partner_action = self.select_action_for(partner, partner_role);
            let (row_agent, col_agent, row_action, col_action) = if initiator_is_row {
                (initiator, partner, initiator_action, partner_action)
            } else {
                (partner, initiator, partner_action, initiator_action)
            };
            let (row_payoff, col_payoff) =
                self.game.sample_payoff(row_action, col_action, &mut self.rng);

            let (initiator_payoff, partner_payoff) = if initiator_is_row {
                (row_payoff, col_payoff)
            } else {
                (col_payoff, row_payoff)
            };
            self.deliver_feedback(initiator, initiator_role, initiator_action, initiator_payoff);
            if !self.probe_initiator_only {
                self.deliver_feedback(partner, partner_role, partner_action, partner_payoff);
            }

            payoff_total += row_payoff + col_payoff;
            record.histogram[row_action * n_actions + col_action] += 1;
            if let (Some((boundary, _)), Some(pops)) =
                (self.isolation, record.population_histograms.as_mut())
            {
                let pi = usize::from(initiator >= boundary);
                let pj = usize::from(partner >= boundary);
                pops[pi].0[row_action * n_actions + col_action] += 1;
                pops[pi].1 += 1;
                if pj != pi {
                    pops[pj].0[row_action * n_actions + col_action] += 1;
                    pops[pj].1 += 1;
                }
            }
            if self.record_interactions {
                record.interactions.push(Interaction {
                    initiator,
                    partner,
                    row_agent,
                    col_agent,
                    joint: (row_action, col_action),
                    row_payoff,
                    col_payoff,
                });
            }
        }
        record.avg_payoff = payoff_total / (2.0 * n as f64);

        self.supervisor_phase();
        self.subordinate_phase();
        self.round += 1;
        record
    }

    /// Supervisor round: Q updates over the report buffer, the per-round
    /// optimistic refresh, one imitated peer, then instruction generation.
    /// All supervisors refresh before any imitates, so peer blending reads
    /// this round's values regardless of group order.
    fn supervisor_phase(&mut self) {
        let k = self.supervisors.len();
        for slot in &mut self.supervisors {
            if !slot.enabled || slot.fixed {
                slot.state.clear_reports();
                continue;
            }
            slot.state.update_q_from_reports(&self.params);
            slot.state.refresh_fmq(&self.params);
        }
        let fmq_snapshot: Vec<Vec<f64>> = self
            .supervisors
            .iter()
            .map(|s| s.state.fmq_table().to_vec())
            .collect();
        for g in 0..k {
            if !self.supervisors[g].enabled || self.supervisors[g].fixed {
                continue;
            }
            let peer = pick_peer(&self.supervisors[g].com, &mut self.rng);
            let slot = &mut self.supervisors[g];
            match peer {
                Some(peer_group) => slot
                    .state
                    .blend_from_peer(&fmq_snapshot[peer_group], &self.params),
                None => slot.state.e_from_own(),
            }
        }
        for g in 0..k {
            let slot = &mut self.supervisors[g];
            if !slot.enabled {
                continue;
            }
            self.instructions[g] = Some(slot.state.generate_instructions(&self.params));
            slot.state.clear_reports();
        }
    }

    /// Subordinate round: refresh the optimistic estimate, fold in the new
    /// instructions, and modulate exploration by the suggestion on the last
    /// pair played. Agents without an enabled supervisor learn from local
    /// information alone (their E-values track FMQ and exploration stays).
    fn subordinate_phase(&mut self) {
        for node in 0..self.agents.len() {
            if self.agents[node].kind != AgentKind::Learner {
                continue;
            }
            let group = self.grouping.group_of(node);
            let agent = &mut self.agents[node];
            agent.state.refresh_fmq(&self.params);
            match self.instructions[group].as_ref() {
                Some(instr) => {
                    agent.state.apply_suggestions(instr, &self.params);
                    if let Some((state, action)) = agent.last_exp {
                        agent
                            .state
                            .update_exploration(instr, state, action, &self.params);
                    }
                    // An agent still greedy on an action other than the
                    // supervisor's top pick keeps a residual exploration
                    // floor; without it, rival camps never resample the
                    // recommended action and the population freezes split.
                    if disagrees_with_top(&agent.state, instr, self.game.n_actions()) {
                        agent.state.epsilon =
                            agent.state.epsilon.max(self.params.epsilon_conflict_floor);
                    }
                }
                None => agent.state.set_e_from_fmq(),
            }
        }
    }
}

/// True when the agent's greedy action differs from the supervisor's most
/// recommended action in some role-state (given a non-flat suggestion).
fn disagrees_with_top(state: &SubordinateState, instr: &InstructionSet, n_actions: usize) -> bool {
    for role in [Role::Row, Role::Column] {
        let top = (0..n_actions)
            .max_by(|&a, &b| {
                instr
                    .suggestion(role, a)
                    .partial_cmp(&instr.suggestion(role, b))
                    .expect("suggestions are finite")
            })
            .expect("at least one action");
        if instr.suggestion(role, top) <= 0.0 {
            continue; // flat or negative suggestions carry no signal
        }
        let best = (0..n_actions)
            .map(|a| state.e(role, a))
            .fold(f64::NEG_INFINITY, f64::max);
        if state.e(role, top) < best {
            return true;
        }
    }
    false
}

/// Earliest round `r` such that one optimal-norm joint action accounts for
/// at least `threshold` of the interactions in every round of
/// `[r, r + window)`. Returns that round and the norm.
pub fn detect_convergence(
    trace: &[RoundRecord],
    game: &Game,
    window: u32,
    threshold: f64,
) -> Option<(u32, JointAction)> {
    let series: Vec<(&[u32], u32)> = trace
        .iter()
        .map(|r| (r.histogram.as_slice(), r.interaction_count))
        .collect();
    detect_in_series(&series, game, window, threshold).map(|(idx, norm)| (trace[idx].round, norm))
}

/// Shared detection over (histogram, interaction count) series. Returns the
/// series index where the qualifying window starts.
pub(crate) fn detect_in_series(
    series: &[(&[u32], u32)],
    game: &Game,
    window: u32,
    threshold: f64,
) -> Option<(usize, JointAction)> {
    let window = window as usize;
    if window == 0 || series.len() < window {
        return None;
    }
    let mut run_start = 0;
    let mut run: Option<JointAction> = None;
    for (i, &(hist, total)) in series.iter().enumerate() {
        let qual = qualifying_norm(hist, total, game, threshold);
        match (qual, run) {
            (Some(norm), Some(current)) if norm == current => {
                if i + 1 - run_start >= window {
                    return Some((run_start, current));
                }
            }
            (Some(norm), _) => {
                run = Some(norm);
                run_start = i;
                if window == 1 {
                    return Some((run_start, norm));
                }
            }
            (None, _) => {
                run = None;
            }
        }
    }
    None
}

fn qualifying_norm(hist: &[u32], total: u32, game: &Game, threshold: f64) -> Option<JointAction> {
    if total == 0 {
        return None;
    }
    let n = game.n_actions();
    let needed = threshold * total as f64 - 1e-9;
    game.optimal_norms()
        .iter()
        .copied()
        .max_by_key(|&(r, c)| hist[r * n + c])
        .filter(|&(r, c)| hist[r * n + c] as f64 >= needed)
}

/// The norm sustained over the final `window` entries of a series, if any.
fn final_norm_in_series(
    series: &[(&[u32], u32)],
    game: &Game,
    window: u32,
    threshold: f64,
) -> Option<JointAction> {
    let window = window as usize;
    if window == 0 || series.len() < window {
        return None;
    }
    let tail = &series[series.len() - window..];
    let first = qualifying_norm(tail[0].0, tail[0].1, game, threshold)?;
    tail.iter()
        .all(|&(h, t)| qualifying_norm(h, t, game, threshold) == Some(first))
        .then_some(first)
}

/// The norm sustained over the final window of a trace, if any.
pub fn final_norm(
    trace: &[RoundRecord],
    game: &Game,
    window: u32,
    threshold: f64,
) -> Option<JointAction> {
    let series: Vec<(&[u32], u32)> = trace
        .iter()
        .map(|r| (r.histogram.as_slice(), r.interaction_count))
        .collect();
    final_norm_in_series(&series, game, window, threshold)
}

/// Full simulation outcome: the round trace, the per-run summary, the round
/// at which the fixed schedule actually fired, and any build warnings.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub trace: Vec<RoundRecord>,
    pub summary: RunSummary,
    pub insertion_round: Option<u32>,
    pub warnings: Vec<String>,
}

/// Runs a configured replica to completion. Pure in the configuration:
/// identical configs (including seeds) give bit-identical outcomes.
pub fn run_simulation(config: &SimConfig) -> Result<SimOutcome, EngineError> {
    let mut world = World::new(config)?;
    let game = world.game.clone();
    let window = config.convergence.window;
    let threshold = config.convergence.threshold;

    let mut trace: Vec<RoundRecord> = Vec::with_capacity(config.rounds as usize);
    let mut scheduled: Option<u32> = match config.fixed_agents {
        Some(FixedSchedule { insertion: InsertionTime::Round(r), .. }) => Some(r),
        _ => None,
    };
    let mut insertion_round = None;
    // Rolling window of qualifying norms for online (late-intervention)
    // convergence detection.
    let mut recent: std::collections::VecDeque<Option<JointAction>> =
        std::collections::VecDeque::with_capacity(window as usize);

    for round in 0..config.rounds {
        if let (Some(schedule), Some(due)) = (&config.fixed_agents, scheduled) {
            if due == round && insertion_round.is_none() {
                world.place_fixed_agents(
                    schedule.count,
                    schedule.action,
                    schedule.metric,
                    schedule.level,
                )?;
                insertion_round = Some(round);
            }
        }
        let record = world.run_round();
        if let Some(FixedSchedule { insertion: InsertionTime::AfterConvergence(offset), .. }) =
            config.fixed_agents
        {
            if scheduled.is_none() {
                let qual =
                    qualifying_norm(&record.histogram, record.interaction_count, &game, threshold);
                if recent.len() == window as usize {
                    recent.pop_front();
                }
                recent.push_back(qual);
                let fired = recent.len() == window as usize
                    && recent.front().is_some_and(|q| q.is_some())
                    && recent.iter().all(|q| *q == recent[0]);
                if fired {
                    scheduled = Some(round + offset);
                }
            }
        }
        trace.push(record);
    }

    let summary = metrics::summarize(config.seed, &trace, &game, window, threshold);
    Ok(SimOutcome {
        trace,
        summary,
        insertion_round,
        warnings: world.warnings.clone(),
    })
}

/// Outcome of an isolated-sub-populations run: the shared trace plus each
/// population's convergence and final norm, measured over interactions
/// involving that population.
#[derive(Debug, Clone)]
pub struct IsolatedOutcome {
    pub outcome: SimOutcome,
    pub converged: [Option<(u32, JointAction)>; 2],
    pub final_norms: [Option<JointAction>; 2],
}

impl IsolatedOutcome {
    /// Both populations settled on norms that differ.
    pub fn divergent(&self) -> bool {
        matches!(
            (self.final_norms[0], self.final_norms[1]),
            (Some(a), Some(b)) if a != b
        )
    }
}

/// Runs a two-population config and reports per-population norm identities.
pub fn run_isolated(config: &SimConfig) -> Result<IsolatedOutcome, EngineError> {
    if config.isolation.is_none() {
        return Err(EngineError::Config(
            "run_isolated requires an isolation spec".into(),
        ));
    }
    let outcome = run_simulation(config)?;
    let game = config.game.build()?;
    let window = config.convergence.window;
    let threshold = config.convergence.threshold;
    let mut converged = [None, None];
    let mut final_norms = [None, None];
    for side in 0..2 {
        let series: Vec<(&[u32], u32)> = outcome
            .trace
            .iter()
            .map(|r| {
                let pops = r
                    .population_histograms
                    .as_ref()
                    .expect("isolation runs carry population histograms");
                (pops[side].0.as_slice(), pops[side].1)
            })
            .collect();
        converged[side] = detect_in_series(&series, &game, window, threshold)
            .map(|(idx, norm)| (outcome.trace[idx].round, norm));
        final_norms[side] = final_norm_in_series(&series, &game, window, threshold);
    }
    Ok(IsolatedOutcome {
        outcome,
        converged,
        final_norms,
    })
}

/// Builds the disjoint two-population graph and merged hierarchy for
/// isolation runs. Each population gets its own generated graph and its own
/// grouping; group ids of the second population are offset.
fn build_isolated(
    config: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Graph, Grouping, Vec<String>), EngineError> {
    let n = config.topology.n;
    let params = config.topology.params();
    let mut warnings = Vec::new();

    let seed_a = rng.random::<u64>();
    let graph_a = crate::topology::generate(config.topology.kind, n, &params, seed_a)?;
    let seed_b = rng.random::<u64>();
    let graph_b = crate::topology::generate(config.topology.kind, n, &params, seed_b)?;

    let mut edges: Vec<(usize, usize)> = graph_a.edges();
    edges.extend(graph_b.edges().into_iter().map(|(u, v)| (u + n, v + n)));
    let combined = Graph::from_edges(2 * n, &edges)
        .map_err(|e| EngineError::Config(format!("internal: combined graph invalid: {e}")))?;

    let seed_ga = rng.random::<u64>();
    let (grouping_a, mut wa) = grouping::build(&config.grouping, &graph_a, seed_ga)?;
    warnings.append(&mut wa);
    let seed_gb = rng.random::<u64>();
    let (grouping_b, mut wb) = grouping::build(&config.grouping, &graph_b, seed_gb)?;
    warnings.append(&mut wb);

    let mut groups: Vec<Vec<usize>> = grouping_a.groups().to_vec();
    let mut supervisors: Vec<usize> = grouping_a.supervisors().to_vec();
    for members in grouping_b.groups() {
        groups.push(members.iter().map(|&v| v + n).collect());
    }
    supervisors.extend(grouping_b.supervisors().iter().map(|&v| v + n));
    let merged = Grouping::new(&combined, groups, supervisors);
    Ok((combined, merged, warnings))
}
