//! Message-passing cyber layer.
//!
//! Agents exchange values with graph neighbors in synchronous rounds: every
//! agent emits, all messages are delivered, then every agent updates from its
//! own inbox. An agent's update reads nothing but its own fields and inbox.

use std::collections::BTreeSet;

use crate::consensus::{estimates_settled, local_rate};
use crate::error::{Error, Result};
use crate::finite_time::{
    find_defect, kernel_average_latest, mix, outgoing_share, rounds_for, sum_excluding_k,
    KernelSource, RankTest,
};
use crate::graph::CommGraph;
use crate::scalar::Real;
use crate::strategies::{
    follower_command, informed_command, InformedView, PowerCommand, Strategy, TransientMatchState,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Payload<T> {
    /// Capacity estimate `s_j`.
    Estimate(T),
    /// Finite-time iterates `(ḡ_j(m), g_j(m))` and the sender's share `p_·j`.
    FtValues { gbar: T, g: T, weight: T },
}

impl<T> Payload<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Estimate(_) => "estimate",
            Payload::FtValues { .. } => "ft_values",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundMessage<T> {
    pub round: u64,
    pub from: usize,
    pub to: usize,
    pub payload: Payload<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Consensus,
    FiniteTime,
}

/// What only the informed agent knows about the pending change.
#[derive(Clone, Copy, Debug, PartialEq)]
struct PrivateEvent<T> {
    delta: T,
    /// Total before the change.
    p_t: T,
    p_tilde_t: T,
}

/// Result of one agent's local rank analysis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FtOutcome<T> {
    pub m: usize,
    pub source: KernelSource,
    pub c_a: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentState<T> {
    id: usize,
    own_capacity: T,
    estimate: T,
    inbox: Vec<RoundMessage<T>>,
    /// Incident links `(j, a_ij)` sorted by `j`.
    links: Vec<(usize, T)>,
    event: Option<PrivateEvent<T>>,
    last_change: T,
    ft_gbar: Vec<T>,
    ft_g: Vec<T>,
    ft_outcome: Option<FtOutcome<T>>,
}

impl<T: Real> AgentState<T> {
    fn new(id: usize, own_capacity: T, estimate: T, links: Vec<(usize, T)>) -> Self {
        Self {
            id,
            own_capacity,
            estimate,
            inbox: Vec::new(),
            links,
            event: None,
            last_change: T::zero(),
            ft_gbar: Vec::new(),
            ft_g: Vec::new(),
            ft_outcome: None,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn own_capacity(&self) -> T {
        self.own_capacity
    }

    pub fn estimate(&self) -> T {
        self.estimate
    }

    pub fn inbox(&self) -> &[RoundMessage<T>] {
        &self.inbox
    }

    pub fn is_informed(&self) -> bool {
        self.event.is_some()
    }

    /// Updated total, visible only for the informed agent.
    pub fn p_tilde_t(&self) -> Option<T> {
        self.event.map(|e| e.p_tilde_t)
    }

    pub fn ft_outcome(&self) -> Option<FtOutcome<T>> {
        self.ft_outcome
    }

    fn share(&self) -> T {
        outgoing_share(self.links.len())
    }

    fn payload(&self, phase: Phase) -> Payload<T> {
        match phase {
            Phase::Consensus => Payload::Estimate(self.estimate),
            Phase::FiniteTime => Payload::FtValues {
                gbar: *self.ft_gbar.last().expect("finite-time run seeded"),
                g: *self.ft_g.last().expect("finite-time run seeded"),
                weight: self.share(),
            },
        }
    }

    fn link_weight(&self, j: usize) -> Result<T> {
        self.links
            .binary_search_by_key(&j, |&(n, _)| n)
            .map(|pos| self.links[pos].1)
            .map_err(|_| Error::LocalityViolation {
                from: j,
                to: self.id,
            })
    }

    fn consensus_update(&mut self, h: T, dt: T) -> Result<()> {
        let mut pairs = Vec::with_capacity(self.inbox.len());
        for msg in &self.inbox {
            let Payload::Estimate(s_j) = msg.payload else {
                return Err(Error::InvalidParameter(
                    "unexpected payload in consensus round".into(),
                ));
            };
            pairs.push((self.link_weight(msg.from)?, s_j));
        }
        let pin = self.event.map(|e| (h, e.p_tilde_t));
        let rate = local_rate(self.estimate, pairs, pin);
        let next = self.estimate + dt * rate;
        self.last_change = (next - self.estimate).abs();
        self.estimate = next;
        Ok(())
    }

    fn ft_update(&mut self) -> Result<()> {
        let mut terms = Vec::with_capacity(self.inbox.len() + 1);
        terms.push((
            self.id,
            self.share(),
            *self.ft_gbar.last().unwrap(),
            *self.ft_g.last().unwrap(),
        ));
        for msg in &self.inbox {
            let Payload::FtValues { gbar, g, weight } = msg.payload else {
                return Err(Error::InvalidParameter(
                    "unexpected payload in finite-time round".into(),
                ));
            };
            terms.push((msg.from, weight, gbar, g));
        }
        terms.sort_by_key(|t| t.0);
        self.ft_gbar.push(mix(terms.iter().map(|t| (t.1, t.2))));
        self.ft_g.push(mix(terms.iter().map(|t| (t.1, t.3))));
        Ok(())
    }

    fn ft_finish(&mut self, test: &RankTest<T>) -> Result<FtOutcome<T>> {
        let defect = find_defect(&self.ft_gbar, &self.ft_g, test)?;
        let c_a = kernel_average_latest(&self.ft_gbar, &self.ft_g, &defect)?;
        let outcome = FtOutcome {
            m: defect.m,
            source: defect.source,
            c_a,
        };
        self.ft_outcome = Some(outcome);
        Ok(outcome)
    }
}

/// Observed traffic: the set of `(sender, receiver)` pairs, plus the full
/// message list when recording is enabled.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MessageLog<T> {
    pairs: BTreeSet<(usize, usize)>,
    entries: Option<Vec<RoundMessage<T>>>,
}

impl<T: Copy> MessageLog<T> {
    pub fn recording() -> Self {
        Self {
            pairs: BTreeSet::new(),
            entries: Some(Vec::new()),
        }
    }

    fn push(&mut self, msg: RoundMessage<T>) {
        self.pairs.insert((msg.from, msg.to));
        if let Some(entries) = &mut self.entries {
            entries.push(msg);
        }
    }

    pub fn pairs(&self) -> &BTreeSet<(usize, usize)> {
        &self.pairs
    }

    pub fn entries(&self) -> Option<&[RoundMessage<T>]> {
        self.entries.as_deref()
    }

    /// Takes recorded messages, leaving recording enabled.
    pub fn drain(&mut self) -> Vec<RoundMessage<T>> {
        self.entries
            .as_mut()
            .map(std::mem::take)
            .unwrap_or_default()
    }
}

/// All agents plus the synchronous round machinery.
#[derive(Clone, Debug)]
pub struct Network<T> {
    graph: CommGraph<T>,
    agents: Vec<AgentState<T>>,
    h: T,
    dt: T,
    /// Total every agent agrees on once the last change has propagated.
    known_total: T,
    round: u64,
    rank_test: RankTest<T>,
    log: MessageLog<T>,
}

impl<T: Real> Network<T> {
    /// Starts with every estimate at the total capacity.
    pub fn new(graph: CommGraph<T>, capacities: &[T], h: T, dt: T) -> Result<Self> {
        if graph.n() < 2 {
            return Err(Error::Disconnected);
        }
        graph.require_connected()?;
        if capacities.len() != graph.n() {
            return Err(Error::DimensionMismatch {
                expected: graph.n(),
                found: capacities.len(),
            });
        }
        if !(h > T::zero()) {
            return Err(Error::NonPositiveGain);
        }
        if !(dt > T::zero()) {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        let p_t = capacities.iter().fold(T::zero(), |a, &c| a + c);
        let agents = (0..graph.n())
            .map(|i| {
                let links = graph
                    .neighbors(i)
                    .iter()
                    .map(|&j| (j, graph.weight(i, j)))
                    .collect();
                AgentState::new(i, capacities[i], p_t, links)
            })
            .collect();
        Ok(Self {
            graph,
            agents,
            h,
            dt,
            known_total: p_t,
            round: 0,
            rank_test: RankTest::default(),
            log: MessageLog::default(),
        })
    }

    pub fn with_rank_test(mut self, test: RankTest<T>) -> Self {
        self.rank_test = test;
        self
    }

    pub fn with_message_recording(mut self) -> Self {
        self.log = MessageLog::recording();
        self
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn graph(&self) -> &CommGraph<T> {
        &self.graph
    }

    pub fn agents(&self) -> &[AgentState<T>] {
        &self.agents
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn message_log(&self) -> &MessageLog<T> {
        &self.log
    }

    pub fn message_log_mut(&mut self) -> &mut MessageLog<T> {
        &mut self.log
    }

    pub fn estimates(&self) -> Vec<T> {
        self.agents.iter().map(|a| a.estimate).collect()
    }

    /// Total before the pending change (common knowledge).
    pub fn known_total(&self) -> T {
        self.known_total
    }

    pub fn informed_agent(&self) -> Option<usize> {
        self.agents.iter().position(|a| a.is_informed())
    }

    /// Puts a message into its receiver's inbox if the two are linked.
    pub fn deliver(&mut self, msg: RoundMessage<T>) -> Result<()> {
        if !self.graph.has_edge(msg.from, msg.to) {
            return Err(Error::LocalityViolation {
                from: msg.from,
                to: msg.to,
            });
        }
        self.log.push(msg);
        self.agents[msg.to].inbox.push(msg);
        Ok(())
    }

    /// Emit, deliver, update.
    pub fn run_round(&mut self, phase: Phase) -> Result<()> {
        let mut outgoing = Vec::new();
        for agent in &self.agents {
            let payload = agent.payload(phase);
            for &(j, _) in &agent.links {
                outgoing.push(RoundMessage {
                    round: self.round,
                    from: agent.id,
                    to: j,
                    payload,
                });
            }
        }
        for msg in outgoing {
            self.deliver(msg)?;
        }
        let (h, dt) = (self.h, self.dt);
        for agent in &mut self.agents {
            agent.inbox.sort_by_key(|m| m.from);
            match phase {
                Phase::Consensus => {
                    agent.consensus_update(h, dt)?;
                    agent.ft_outcome = None;
                }
                Phase::FiniteTime => agent.ft_update()?,
            }
            agent.inbox.clear();
        }
        self.round += 1;
        if phase == Phase::Consensus && self.agents.iter().any(|a| !a.estimate.is_finite()) {
            return Err(Error::NumericalDivergence {
                step: self.round - 1,
            });
        }
        Ok(())
    }

    /// Whether the estimates have stopped moving and agree.
    pub fn settled(&self, eps_rel: T) -> bool {
        let drift = self
            .agents
            .iter()
            .fold(T::zero(), |acc, a| acc.max(a.last_change));
        estimates_settled(&self.estimates(), drift, eps_rel)
    }

    /// Tells agent `k` its capacity changed by `delta`.
    ///
    /// A previous change is first committed to its agent's capacity; estimates
    /// are left where the consensus brought them.
    pub fn inject_capacity_event(&mut self, k: usize, delta: T, eps_rel: T) -> Result<()> {
        self.graph.check_index(k)?;
        if !self.settled(eps_rel) {
            return Err(Error::ConsensusInProgress);
        }
        let pending = self.agents[k].event.map_or(T::zero(), |e| e.delta);
        if !(self.agents[k].own_capacity + pending + delta > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "capacity of agent {} would not stay positive",
                k + 1
            )));
        }
        for agent in &mut self.agents {
            if let Some(e) = agent.event.take() {
                agent.own_capacity = agent.own_capacity + e.delta;
                self.known_total = e.p_tilde_t;
            }
        }
        let p_t = self.known_total;
        self.agents[k].event = Some(PrivateEvent {
            delta,
            p_t,
            p_tilde_t: p_t + delta,
        });
        Ok(())
    }

    /// Seeds `ḡ_i(0) = P_i,max / s_i`, runs `2N+1` rounds and lets each agent
    /// extract its average.
    pub fn run_finite_time(&mut self) -> Result<Vec<FtOutcome<T>>> {
        for agent in &mut self.agents {
            agent.ft_gbar.clear();
            agent.ft_g.clear();
            agent.ft_gbar.push(agent.own_capacity / agent.estimate);
            agent.ft_g.push(T::one());
        }
        for _ in 0..rounds_for(self.n()) {
            self.run_round(Phase::FiniteTime)?;
        }
        let test = self.rank_test;
        self.agents.iter_mut().map(|a| a.ft_finish(&test)).collect()
    }

    /// Each agent's command from its own information.
    ///
    /// Under transient match the informed agent needs a fresh finite-time
    /// average from [`Network::run_finite_time`].
    pub fn commands(
        &self,
        strategy: Strategy,
        p_l: T,
    ) -> Result<(PowerCommand<T>, Option<TransientMatchState<T>>)> {
        let floor = p_l.max(T::lit(1e-9) * self.known_total);
        let n = self.n();
        let mut state = None;
        let mut p = Vec::with_capacity(n);
        for agent in &self.agents {
            let cmd = match agent.event {
                None => follower_command(agent.id, p_l, agent.estimate, agent.own_capacity, floor)?,
                Some(e) => {
                    let view = InformedView {
                        agent: agent.id,
                        p_l,
                        s_k: agent.estimate,
                        p_k_max: agent.own_capacity,
                        delta: e.delta,
                        p_t: e.p_t,
                        floor,
                    };
                    let rest = match (strategy, agent.ft_outcome) {
                        (Strategy::TransientMatch, Some(o)) => Some(sum_excluding_k(
                            o.c_a,
                            n,
                            agent.own_capacity,
                            agent.estimate,
                        )?),
                        (Strategy::TransientMatch, None) => {
                            return Err(Error::InvalidParameter(
                                "finite-time average not available".into(),
                            ))
                        }
                        _ => None,
                    };
                    let (p_k, st) = informed_command(strategy, &view, rest)?;
                    state = st;
                    p_k
                }
            };
            p.push(cmd);
        }
        Ok((PowerCommand::from_powers(p, p_l), state))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::init_consensus;
    use crate::graph::reference_six_agent_graph;

    const CAPS: [f64; 6] = [600.0, 450.0, 300.0, 150.0, 750.0, 150.0];

    fn network() -> Network<f64> {
        Network::new(reference_six_agent_graph(), &CAPS, 10.0, 1e-3).unwrap()
    }

    #[test]
    fn rounds_match_centralized_steps() {
        let g = reference_six_agent_graph::<f64>();
        let mut net = network();
        net.inject_capacity_event(0, 300.0, 1e-6).unwrap();
        let mut central = init_consensus(2400.0, 6, 0, 300.0, 10.0, 1e-3).unwrap();
        for _ in 0..500 {
            net.run_round(Phase::Consensus).unwrap();
            central.advance(&g).unwrap();
            assert_eq!(net.estimates(), central.s);
        }
    }

    #[test]
    fn event_sets_private_total_only() {
        let mut net = network();
        net.inject_capacity_event(0, 300.0, 1e-6).unwrap();
        assert_eq!(net.agents()[0].p_tilde_t(), Some(2700.0));
        assert!(net.agents()[1..].iter().all(|a| a.p_tilde_t().is_none()));
        assert_eq!(net.estimates(), vec![2400.0; 6]);
    }

    #[test]
    fn event_during_transient_is_rejected() {
        let mut net = network();
        net.inject_capacity_event(0, 300.0, 1e-6).unwrap();
        net.run_round(Phase::Consensus).unwrap();
        assert_eq!(
            net.inject_capacity_event(0, -600.0, 1e-6),
            Err(Error::ConsensusInProgress)
        );
    }

    #[test]
    fn zero_delta_leaves_estimates() {
        let mut net = network();
        net.inject_capacity_event(3, 0.0, 1e-6).unwrap();
        for _ in 0..50 {
            net.run_round(Phase::Consensus).unwrap();
        }
        assert_eq!(net.estimates(), vec![2400.0; 6]);
    }

    #[test]
    fn finite_time_average_matches_mean() {
        let mut net = network();
        let out = net.run_finite_time().unwrap();
        for o in out {
            assert!((o.c_a - 1.0 / 6.0).abs() < 1e-12);
            assert!(o.m <= 6);
        }
        assert_eq!(net.round(), 13);
    }

    #[test]
    fn locality_violation() {
        let mut net = network();
        let msg = RoundMessage {
            round: 0,
            from: 0,
            to: 2,
            payload: Payload::Estimate(1.0),
        };
        assert_eq!(
            net.deliver(msg),
            Err(Error::LocalityViolation { from: 0, to: 2 })
        );
    }

    #[test]
    fn single_agent_rejected() {
        let g = CommGraph::<f64>::new(1, &[]).unwrap();
        assert_eq!(
            Network::new(g, &[1.0], 1.0, 1e-3).unwrap_err(),
            Error::Disconnected
        );
    }

    #[test]
    fn message_pairs_follow_edges() {
        let mut net = network().with_message_recording();
        net.inject_capacity_event(0, 300.0, 1e-6).unwrap();
        net.run_round(Phase::Consensus).unwrap();
        net.run_finite_time().unwrap();
        let g = reference_six_agent_graph::<f64>();
        assert_eq!(net.message_log().pairs().len(), 18);
        assert!(net
            .message_log()
            .pairs()
            .iter()
            .all(|&(i, j)| g.has_edge(i, j)));
        assert_eq!(net.message_log().entries().unwrap().len(), 18 * 14);
    }

    #[test]
    fn commands_pre_event() {
        let net = network();
        let (cmd, _) = net.commands(Strategy::Strategy1, 1600.0).unwrap();
        assert_eq!(cmd.p, vec![400.0, 300.0, 200.0, 100.0, 500.0, 100.0]);
    }

    #[test]
    fn transient_match_needs_fresh_average() {
        let mut net = network();
        net.inject_capacity_event(0, 300.0, 1e-6).unwrap();
        assert!(net.commands(Strategy::TransientMatch, 1600.0).is_err());
        net.run_finite_time().unwrap();
        let (cmd, st) = net.commands(Strategy::TransientMatch, 1600.0).unwrap();
        assert!(cmd.e.abs() < 1e-9);
        assert!((st.unwrap().p_k_max_prime - 600.0).abs() < 1e-9);
    }

    #[test]
    fn second_event_commits_first() {
        let mut net = network();
        net.inject_capacity_event(0, 300.0, 1e-6).unwrap();
        for _ in 0..20_000 {
            net.run_round(Phase::Consensus).unwrap();
        }
        net.inject_capacity_event(0, -600.0, 1e-6).unwrap();
        assert_eq!(net.agents()[0].own_capacity(), 900.0);
        assert_eq!(net.known_total(), 2700.0);
        assert_eq!(net.agents()[0].p_tilde_t(), Some(2100.0));
    }
}
