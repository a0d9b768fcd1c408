//! Scenario files, the outer simulation loop and telemetry output.
//!
//! A scenario is a line-oriented text file; `#` starts a comment. Agent
//! indices are 1-based.
//!
//! ```text
//! agents 6
//! edge 1 2 6            # i j weight
//! capacity 1 600        # i kW
//! load 0 1600           # t kW, piecewise constant from t
//! event 3 1 300         # t k delta
//! h 10
//! dt 1e-3
//! t_end 15
//! strategy transient_match
//! plant ideal           # or: plant first_order <tau> [loss], plant ideal [loss]
//! eps_rel 1e-6
//! eps_rank 1e-12        # optional
//! ```

use std::io::{self, Write};

use crate::agents::{FtOutcome, Network, Payload, RoundMessage};
use crate::consensus::check_step_stable;
use crate::error::{Error, Result};
use crate::finite_time::{KernelSource, RankTest};
use crate::graph::CommGraph;
use crate::plant::{deliver, PlantConfig, PlantMode};
use crate::spectral::{
    delta_bound_supremum, dominant_eigenvalue_sweep, euler_step_limit, verify_hurwitz,
    weyl_lower_bound, SpectralReport,
};
use crate::strategies::Strategy;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_EPS_REL: f64 = 1e-6;
pub const DEFAULT_H: f64 = 10.0;

/// Load breakpoint: `p_l` holds from `t` until the next breakpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoadStep {
    pub t: f64,
    pub p_l: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CapacityEvent {
    pub t: f64,
    /// Agent index, 0-based.
    pub k: usize,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub graph: CommGraph<f64>,
    pub capacities: Vec<f64>,
    pub load_profile: Vec<LoadStep>,
    pub events: Vec<CapacityEvent>,
    pub h: f64,
    pub dt: f64,
    pub t_end: f64,
    pub strategy: Strategy,
    pub plant: PlantConfig<f64>,
    pub eps_rel: f64,
    pub rank_test: RankTest<f64>,
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.capacities.len()
    }

    pub fn p_t(&self) -> f64 {
        self.capacities.iter().sum()
    }

    /// Index of the last outer step; records run from `w = 0` to this value.
    pub fn steps(&self) -> u64 {
        self.step_of(self.t_end)
    }

    pub fn step_of(&self, t: f64) -> u64 {
        (t / self.dt).round() as u64
    }

    pub fn load_at(&self, t: f64) -> f64 {
        self.load_at_step(self.step_of(t))
    }

    fn load_at_step(&self, w: u64) -> f64 {
        self.load_profile
            .iter()
            .take_while(|l| self.step_of(l.t) <= w)
            .last()
            .map_or(self.load_profile[0].p_l, |l| l.p_l)
    }

    /// Capacity change to agent `k` at time `t`, keeping the rest unchanged.
    pub fn with_event(mut self, t: f64, k: usize, delta: f64) -> Self {
        self.events.push(CapacityEvent { t, k, delta });
        self
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn number(line: usize, token: Option<&str>, what: &str) -> Result<f64> {
    let token = token.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    let v: f64 = token
        .parse()
        .map_err(|_| parse_err(line, format!("invalid {what} '{token}'")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{what} must be finite")));
    }
    Ok(v)
}

fn index(line: usize, token: Option<&str>, what: &str) -> Result<usize> {
    let token = token.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    let v: usize = token
        .parse()
        .map_err(|_| parse_err(line, format!("invalid {what} '{token}'")))?;
    if v == 0 {
        return Err(parse_err(line, format!("{what} is 1-based")));
    }
    Ok(v - 1)
}

fn set_once<V>(slot: &mut Option<V>, value: V, line: usize, key: &str) -> Result<()> {
    if slot.is_some() {
        return Err(parse_err(line, format!("'{key}' given twice")));
    }
    *slot = Some(value);
    Ok(())
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut agents: Option<(usize, usize)> = None;
    let mut edges: Vec<(usize, usize, usize, f64)> = Vec::new();
    let mut capacities: Vec<(usize, usize, f64)> = Vec::new();
    let mut loads: Vec<(usize, LoadStep)> = Vec::new();
    let mut events: Vec<(usize, CapacityEvent)> = Vec::new();
    let (mut h, mut dt, mut t_end, mut eps_rel, mut eps_rank) = (None, None, None, None, None);
    let mut strategy = None;
    let mut plant = None;

    for (no, raw) in text.lines().enumerate() {
        let line = no + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tok = content.split_whitespace();
        let Some(key) = tok.next() else { continue };
        match key {
            "agents" => {
                let n = number(line, tok.next(), "agent count")?;
                if n < 1.0 || n.fract() != 0.0 {
                    return Err(parse_err(line, "agent count must be a positive integer"));
                }
                set_once(&mut agents, (n as usize, line), line, key)?;
            }
            "edge" => {
                let i = index(line, tok.next(), "agent index")?;
                let j = index(line, tok.next(), "agent index")?;
                let w = number(line, tok.next(), "edge weight")?;
                edges.push((line, i, j, w));
            }
            "capacity" => {
                let i = index(line, tok.next(), "agent index")?;
                capacities.push((line, i, number(line, tok.next(), "capacity")?));
            }
            "load" => {
                let t = number(line, tok.next(), "time")?;
                loads.push((
                    line,
                    LoadStep {
                        t,
                        p_l: number(line, tok.next(), "load")?,
                    },
                ));
            }
            "event" => {
                let t = number(line, tok.next(), "time")?;
                let k = index(line, tok.next(), "agent index")?;
                events.push((
                    line,
                    CapacityEvent {
                        t,
                        k,
                        delta: number(line, tok.next(), "delta")?,
                    },
                ));
            }
            "h" => set_once(&mut h, number(line, tok.next(), "h")?, line, key)?,
            "dt" => set_once(&mut dt, number(line, tok.next(), "dt")?, line, key)?,
            "t_end" => set_once(&mut t_end, number(line, tok.next(), "t_end")?, line, key)?,
            "eps_rel" => set_once(
                &mut eps_rel,
                number(line, tok.next(), "eps_rel")?,
                line,
                key,
            )?,
            "eps_rank" => set_once(
                &mut eps_rank,
                number(line, tok.next(), "eps_rank")?,
                line,
                key,
            )?,
            "strategy" => {
                let name = tok
                    .next()
                    .ok_or_else(|| parse_err(line, "missing strategy name"))?;
                let s = name
                    .parse::<Strategy>()
                    .map_err(|e| parse_err(line, e.to_string()))?;
                set_once(&mut strategy, s, line, key)?;
            }
            "plant" => {
                let mode = match tok.next() {
                    Some("ideal") => PlantMode::Ideal,
                    Some("first_order") => PlantMode::FirstOrder {
                        tau: number(line, tok.next(), "tau")?,
                    },
                    Some(other) => {
                        return Err(parse_err(line, format!("unknown plant mode '{other}'")))
                    }
                    None => return Err(parse_err(line, "missing plant mode")),
                };
                let loss = match tok.next() {
                    Some(t) => number(line, Some(t), "loss fraction")?,
                    None => 0.0,
                };
                let cfg =
                    PlantConfig::new(mode, loss).map_err(|e| parse_err(line, e.to_string()))?;
                set_once(&mut plant, cfg, line, key)?;
            }
            other => return Err(parse_err(line, format!("unknown keyword '{other}'"))),
        }
        if let Some(extra) = tok.next() {
            return Err(parse_err(line, format!("unexpected token '{extra}'")));
        }
    }

    let (n, _) = agents.ok_or_else(|| parse_err(0, "missing 'agents'"))?;
    let check_agent = |line: usize, i: usize| {
        if i < n {
            Ok(())
        } else {
            Err(parse_err(
                line,
                format!("agent {} out of range (1..={n})", i + 1),
            ))
        }
    };

    let mut triples = Vec::with_capacity(edges.len());
    for &(line, i, j, w) in &edges {
        check_agent(line, i)?;
        check_agent(line, j)?;
        triples.push((i, j, w));
    }
    let graph = match CommGraph::new(n, &triples) {
        Ok(g) => g,
        Err(e) => {
            // find the offending line by rebuilding edge by edge
            let line = (1..=edges.len())
                .find(|&m| CommGraph::new(n, &triples[..m]).is_err())
                .map_or(0, |m| edges[m - 1].0);
            return Err(parse_err(line, e.to_string()));
        }
    };
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }

    let mut caps = vec![None; n];
    for &(line, i, c) in &capacities {
        check_agent(line, i)?;
        if !(c > 0.0) {
            return Err(parse_err(line, "capacity must be positive"));
        }
        if caps[i].replace(c).is_some() {
            return Err(parse_err(
                line,
                format!("capacity of agent {} given twice", i + 1),
            ));
        }
    }
    let capacities: Vec<f64> = caps
        .iter()
        .enumerate()
        .map(|(i, c)| {
            c.ok_or_else(|| parse_err(0, format!("missing capacity for agent {}", i + 1)))
        })
        .collect::<Result<_>>()?;

    let dt = dt.unwrap_or(DEFAULT_DT);
    if !(dt > 0.0) {
        return Err(parse_err(0, "dt must be positive"));
    }
    let t_end = t_end.ok_or_else(|| parse_err(0, "missing 't_end'"))?;
    if !(t_end > 0.0) {
        return Err(parse_err(0, "t_end must be positive"));
    }
    let h = h.unwrap_or(DEFAULT_H);
    if !(h > 0.0) {
        return Err(Error::NonPositiveGain);
    }
    let eps_rel = eps_rel.unwrap_or(DEFAULT_EPS_REL);
    if !(eps_rel > 0.0) {
        return Err(parse_err(0, "eps_rel must be positive"));
    }
    let mut rank_test = RankTest::default();
    if let Some(e) = eps_rank {
        if !(e > 0.0 && e < 1.0) {
            return Err(parse_err(0, "eps_rank must lie in (0, 1)"));
        }
        rank_test.eps_rank = e;
    }

    if loads.is_empty() {
        return Err(parse_err(0, "missing 'load'"));
    }
    if loads[0].1.t != 0.0 {
        return Err(parse_err(
            loads[0].0,
            "first load breakpoint must be at t = 0",
        ));
    }
    for pair in loads.windows(2) {
        if !(pair[1].1.t > pair[0].1.t) {
            return Err(parse_err(
                pair[1].0,
                "load breakpoints must be strictly increasing in time",
            ));
        }
    }
    for &(line, l) in &loads {
        if !(l.p_l > 0.0) {
            return Err(parse_err(line, "load must be positive"));
        }
    }

    let mut totals = vec![(0.0, capacities.iter().sum::<f64>())];
    let mut running = capacities.clone();
    for (idx, &(line, e)) in events.iter().enumerate() {
        check_agent(line, e.k)?;
        if !(e.t >= 0.0 && e.t < t_end) {
            return Err(parse_err(line, "event time must lie in [0, t_end)"));
        }
        if idx > 0 && !(e.t > events[idx - 1].1.t) {
            return Err(parse_err(
                line,
                "events must be strictly increasing in time",
            ));
        }
        if idx > 0 && (e.t / dt).round() == (events[idx - 1].1.t / dt).round() {
            return Err(parse_err(line, "two events fall on the same step"));
        }
        running[e.k] += e.delta;
        if !(running[e.k] > 0.0) {
            return Err(parse_err(
                line,
                format!("capacity of agent {} would not stay positive", e.k + 1),
            ));
        }
        totals.push((e.t, running.iter().sum()));
    }

    // every (load segment, capacity segment) overlap must have P_L < P_T
    for (li, &(_, l)) in loads.iter().enumerate() {
        let l_end = loads.get(li + 1).map_or(f64::INFINITY, |x| x.1.t);
        for (ti, &(t0, total)) in totals.iter().enumerate() {
            let t1 = totals.get(ti + 1).map_or(f64::INFINITY, |x| x.0);
            if t0 < l_end && l.t < t1 && l.p_l >= total {
                return Err(Error::LoadExceedsCapacity);
            }
        }
    }

    Ok(Scenario {
        graph,
        capacities,
        load_profile: loads.into_iter().map(|(_, l)| l).collect(),
        events: events.into_iter().map(|(_, e)| e).collect(),
        h,
        dt,
        t_end,
        strategy: strategy.unwrap_or(Strategy::TransientMatch),
        plant: plant.unwrap_or_default(),
        eps_rel,
        rank_test,
    })
}

/// One outer step of telemetry.
#[derive(Clone, Debug, PartialEq)]
pub struct TelemetryRecord {
    pub w: u64,
    pub t: f64,
    pub s: Vec<f64>,
    pub p_cmd: Vec<f64>,
    pub p_delivered: Vec<f64>,
    pub p_o: f64,
    pub p_l: f64,
    pub e: f64,
    /// `P_L / s_i`.
    pub r: Vec<f64>,
    /// Informed agent's finite-time average (transient match only).
    pub c_a: Option<f64>,
}

/// One agent's finite-time result at an outer step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FtRecord {
    pub w: u64,
    pub agent: usize,
    pub outcome: FtOutcome<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SimOptions {
    pub record_messages: bool,
    pub record_ft: bool,
}

/// Step-by-step simulation; yields one record per outer step.
pub struct Simulator<'a> {
    sc: &'a Scenario,
    net: Network<f64>,
    event_steps: Vec<u64>,
    next_event: usize,
    delivered: Option<Vec<f64>>,
    w: u64,
    steps: u64,
    done: bool,
    options: SimOptions,
    ft_rows: Vec<FtRecord>,
}

impl<'a> Simulator<'a> {
    pub fn new(sc: &'a Scenario, options: SimOptions) -> Result<Self> {
        sc.plant.check_step(sc.dt)?;
        check_step_stable(&sc.graph, None, sc.h, sc.dt)?;
        for e in &sc.events {
            check_step_stable(&sc.graph, Some(e.k), sc.h, sc.dt)?;
        }
        let mut net = Network::new(sc.graph.clone(), &sc.capacities, sc.h, sc.dt)?
            .with_rank_test(sc.rank_test);
        if options.record_messages {
            net = net.with_message_recording();
        }
        Ok(Self {
            sc,
            net,
            event_steps: sc.events.iter().map(|e| sc.step_of(e.t)).collect(),
            next_event: 0,
            delivered: None,
            w: 0,
            steps: sc.steps(),
            done: false,
            options,
            ft_rows: Vec::new(),
        })
    }

    pub fn network(&self) -> &Network<f64> {
        &self.net
    }

    /// Messages exchanged since the last call (empty unless recording).
    pub fn drain_messages(&mut self) -> Vec<RoundMessage<f64>> {
        self.net.message_log_mut().drain()
    }

    /// Finite-time results since the last call (empty unless recording).
    pub fn drain_ft(&mut self) -> Vec<FtRecord> {
        std::mem::take(&mut self.ft_rows)
    }

    fn apply_event(&mut self, e: CapacityEvent, p_l: f64) -> Result<()> {
        let known = self.net.known_total()
            + self.net.informed_agent().map_or(0.0, |k| {
                self.net.agents()[k].p_tilde_t().unwrap() - self.net.known_total()
            });
        match delta_bound_supremum(known, p_l, self.sc.n()) {
            Ok(sup) if e.delta.abs() < sup => {}
            Ok(sup) => log::warn!(
                "capacity change {} at agent {} exceeds {:.3}; estimates may cross the load",
                e.delta,
                e.k + 1,
                sup
            ),
            Err(_) => log::warn!(
                "capacity change {} at agent {}: load is not below the known total",
                e.delta,
                e.k + 1
            ),
        }
        self.net
            .inject_capacity_event(e.k, e.delta, self.sc.eps_rel)?;
        log::info!(
            "t={}: agent {} capacity changed by {}",
            e.t,
            e.k + 1,
            e.delta
        );
        Ok(())
    }

    fn advance(&mut self) -> Result<TelemetryRecord> {
        let sc = self.sc;
        let w = self.w;
        let t = w as f64 * sc.dt;
        let p_l = sc.load_at_step(w);
        while self.next_event < sc.events.len() && self.event_steps[self.next_event] == w {
            self.apply_event(sc.events[self.next_event], p_l)?;
            self.next_event += 1;
        }

        let mut c_a = None;
        if sc.strategy == Strategy::TransientMatch {
            if let Some(k) = self.net.informed_agent() {
                let outcomes = self.net.run_finite_time()?;
                c_a = Some(outcomes[k].c_a);
                if self.options.record_ft {
                    self.ft_rows.extend(
                        outcomes
                            .into_iter()
                            .enumerate()
                            .map(|(agent, outcome)| FtRecord { w, agent, outcome }),
                    );
                }
            }
        }
        let (cmd, _) = self.net.commands(sc.strategy, p_l)?;
        let prev = self
            .delivered
            .take()
            .unwrap_or_else(|| sc.plant.steady_state(&cmd.p));
        let p_delivered = deliver(&cmd, &sc.plant, &prev, sc.dt)?;
        let s = self.net.estimates();
        if w < self.steps {
            self.net
                .run_round(crate::agents::Phase::Consensus)
                .map_err(|e| match e {
                    Error::NumericalDivergence { .. } => Error::NumericalDivergence { step: w },
                    other => other,
                })?;
        }
        let p_o: f64 = p_delivered.iter().sum();
        self.delivered = Some(p_delivered.clone());
        Ok(TelemetryRecord {
            w,
            t,
            r: s.iter().map(|&x| p_l / x).collect(),
            s,
            p_cmd: cmd.p,
            p_delivered,
            p_o,
            p_l,
            e: p_o - p_l,
            c_a,
        })
    }
}

impl Iterator for Simulator<'_> {
    type Item = Result<TelemetryRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done || self.w > self.steps {
            return None;
        }
        let out = self.advance();
        self.w += 1;
        if out.is_err() {
            self.done = true;
        }
        Some(out)
    }
}

/// Runs a scenario to completion.
pub fn run(sc: &Scenario) -> Result<Vec<TelemetryRecord>> {
    Simulator::new(sc, SimOptions::default())?.collect()
}

/// Streams telemetry as CSV: header, then one row per record.
pub struct TelemetryWriter<W: Write> {
    sink: W,
    n: usize,
}

impl<W: Write> TelemetryWriter<W> {
    pub fn new(mut sink: W, n: usize) -> io::Result<Self> {
        let mut header = vec!["t".to_string()];
        for prefix in ["s", "p_cmd", "p_del"] {
            header.extend((1..=n).map(|i| format!("{prefix}_{i}")));
        }
        header.extend(["p_o", "p_l", "e"].map(String::from));
        header.extend((1..=n).map(|i| format!("r_{i}")));
        header.push("c_a".into());
        writeln!(sink, "{}", header.join(","))?;
        Ok(Self { sink, n })
    }

    pub fn write(&mut self, rec: &TelemetryRecord) -> io::Result<()> {
        debug_assert_eq!(rec.s.len(), self.n);
        let mut fields = Vec::with_capacity(4 * self.n + 5);
        fields.push(fmt_num(rec.t));
        for v in [&rec.s, &rec.p_cmd, &rec.p_delivered] {
            fields.extend(v.iter().map(|&x| fmt_num(x)));
        }
        fields.extend([rec.p_o, rec.p_l, rec.e].map(fmt_num));
        fields.extend(rec.r.iter().map(|&x| fmt_num(x)));
        fields.push(rec.c_a.map(fmt_num).unwrap_or_default());
        writeln!(self.sink, "{}", fields.join(","))
    }

    pub fn into_inner(self) -> W {
        self.sink
    }
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `records` for an `n`-agent scenario.
pub fn write_csv<'r, W: Write>(
    n: usize,
    records: impl IntoIterator<Item = &'r TelemetryRecord>,
    sink: W,
) -> io::Result<()> {
    let mut writer = TelemetryWriter::new(sink, n)?;
    for rec in records {
        writer.write(rec)?;
    }
    writer.sink.flush()
}

pub const MESSAGE_HEADER: &str = "round,sender,receiver,kind,value";

/// Message rows with 1-based agent labels; finite-time payloads span three rows.
pub fn write_messages<W: Write>(messages: &[RoundMessage<f64>], sink: &mut W) -> io::Result<()> {
    for m in messages {
        let (from, to) = (m.from + 1, m.to + 1);
        match m.payload {
            Payload::Estimate(s) => {
                writeln!(sink, "{},{from},{to},estimate,{}", m.round, fmt_num(s))?
            }
            Payload::FtValues { gbar, g, weight } => {
                writeln!(sink, "{},{from},{to},ft_gbar,{}", m.round, fmt_num(gbar))?;
                writeln!(sink, "{},{from},{to},ft_g,{}", m.round, fmt_num(g))?;
                writeln!(
                    sink,
                    "{},{from},{to},ft_weight,{}",
                    m.round,
                    fmt_num(weight)
                )?;
            }
        }
    }
    Ok(())
}

pub const FT_HEADER: &str = "step,agent,order,kernel,c_a";

pub fn write_ft<W: Write>(rows: &[FtRecord], sink: &mut W) -> io::Result<()> {
    for r in rows {
        let kernel = match r.outcome.source {
            KernelSource::Ratio => "gbar",
            KernelSource::Mass => "g",
        };
        writeln!(
            sink,
            "{},{},{},{kernel},{}",
            r.w,
            r.agent + 1,
            r.outcome.m,
            fmt_num(r.outcome.c_a)
        )?;
    }
    Ok(())
}

/// Gains used for the dominant-eigenvalue sweep in [`analyze`].
pub const SWEEP_GAINS: [f64; 10] = [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisReport {
    /// Agent whose pinning is analyzed (first event's agent, else the first agent).
    pub k: usize,
    pub h: f64,
    pub hurwitz: bool,
    pub spectrum: SpectralReport<f64>,
    pub weyl_bound: f64,
    pub euler_limit: f64,
    /// Largest admissible `|δ|` at the initial load, if the load is below capacity.
    pub delta_sup: Option<f64>,
    pub sweep: Vec<(f64, f64)>,
}

pub fn analyze(sc: &Scenario) -> Result<AnalysisReport> {
    let k = sc.events.first().map_or(0, |e| e.k);
    let (hurwitz, spectrum) = verify_hurwitz(&sc.graph, k, sc.h)?;
    let weyl_bound = weyl_lower_bound(&sc.graph)?;
    let euler_limit = euler_step_limit(&sc.graph, Some(k), sc.h)?;
    let delta_sup = delta_bound_supremum(sc.p_t(), sc.load_profile[0].p_l, sc.n()).ok();
    let dominant = dominant_eigenvalue_sweep(&sc.graph, k, &SWEEP_GAINS)?;
    Ok(AnalysisReport {
        k,
        h: sc.h,
        hurwitz,
        spectrum,
        weyl_bound,
        euler_limit,
        delta_sup,
        sweep: SWEEP_GAINS.iter().copied().zip(dominant).collect(),
    })
}

/// CSV with columns `quantity,index,value`.
pub fn write_analysis<W: Write>(report: &AnalysisReport, sink: &mut W) -> io::Result<()> {
    writeln!(sink, "quantity,index,value")?;
    writeln!(sink, "pinned_agent,,{}", report.k + 1)?;
    writeln!(sink, "h,,{}", fmt_num(report.h))?;
    writeln!(sink, "hurwitz,,{}", report.hurwitz)?;
    for (i, v) in report.spectrum.eigenvalues.iter().enumerate() {
        writeln!(sink, "eigenvalue,{},{}", i + 1, fmt_num(*v))?;
    }
    writeln!(sink, "dominant,,{}", fmt_num(report.spectrum.dominant))?;
    writeln!(sink, "weyl_bound,,{}", fmt_num(report.weyl_bound))?;
    writeln!(sink, "euler_dt_limit,,{}", fmt_num(report.euler_limit))?;
    if let Some(d) = report.delta_sup {
        writeln!(sink, "delta_sup,,{}", fmt_num(d))?;
    }
    for (h, d) in &report.sweep {
        writeln!(sink, "sweep,{},{}", fmt_num(*h), fmt_num(*d))?;
    }
    Ok(())
}

/// The six-agent reference study shipped with the crate.
pub const PAPER_6DG: &str = include_str!("../scenarios/paper_6dg.scn");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenario_parses() {
        let sc = parse_scenario(PAPER_6DG).unwrap();
        assert_eq!(sc.p_t(), 2400.0);
        assert_eq!(sc.load_at(0.0), 1600.0);
        assert_eq!(sc.h, 10.0);
        assert_eq!(
            sc.events,
            vec![
                CapacityEvent {
                    t: 3.0,
                    k: 0,
                    delta: 300.0
                },
                CapacityEvent {
                    t: 9.0,
                    k: 0,
                    delta: -600.0
                }
            ]
        );
        assert_eq!(sc.strategy, Strategy::TransientMatch);
        assert_eq!(sc.steps(), 15_000);
    }

    fn minimal(extra: &str) -> String {
        format!("agents 2\nedge 1 2 1\ncapacity 1 10\ncapacity 2 10\nload 0 5\nt_end 1\n{extra}")
    }

    #[test]
    fn defaults() {
        let sc = parse_scenario(&minimal("")).unwrap();
        assert_eq!(sc.dt, DEFAULT_DT);
        assert_eq!(sc.eps_rel, DEFAULT_EPS_REL);
        assert_eq!(sc.h, DEFAULT_H);
        assert_eq!(sc.plant, PlantConfig::default());
        assert!(sc.events.is_empty());
    }

    #[test]
    fn parse_errors_carry_lines() {
        let e = parse_scenario(&minimal("event 0.5 7 1")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 7, .. }), "{e:?}");
        let e = parse_scenario(&minimal("bogus 1")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 7, .. }));
        let e = parse_scenario(&minimal("h abc")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 7, .. }));
        let e = parse_scenario(&minimal("plant first_order")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 7, .. }));
        let e = parse_scenario(&minimal("h 1\nh 2")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 8, .. }));
    }

    #[test]
    fn semantic_errors() {
        let split =
            "agents 3\nedge 1 2 1\ncapacity 1 1\ncapacity 2 1\ncapacity 3 1\nload 0 1\nt_end 1\n";
        assert_eq!(parse_scenario(split).unwrap_err(), Error::Disconnected);
        let heavy = minimal("load 0.5 25");
        assert_eq!(
            parse_scenario(&heavy).unwrap_err(),
            Error::LoadExceedsCapacity
        );
        let shrink = minimal("load 0.2 12\nevent 0.5 1 -9");
        assert_eq!(
            parse_scenario(&shrink).unwrap_err(),
            Error::LoadExceedsCapacity
        );
        assert!(parse_scenario(&minimal("event 0.5 1 1\nevent 0.4 2 1")).is_err());
        assert!(parse_scenario(&minimal("event 2 1 1")).is_err());
    }

    #[test]
    fn load_profile_lookup() {
        let sc = parse_scenario(&minimal("load 0.5 7")).unwrap();
        assert_eq!(sc.load_at(0.499), 5.0);
        assert_eq!(sc.load_at(0.5), 7.0);
        assert_eq!(sc.load_at(1.0), 7.0);
    }

    #[test]
    fn no_events_is_steady() {
        let sc = parse_scenario(&minimal("")).unwrap();
        let recs = run(&sc).unwrap();
        assert_eq!(recs.len(), 1001);
        for r in &recs {
            assert_eq!(r.p_cmd, vec![2.5, 2.5]);
            assert_eq!(r.e, 0.0);
            assert!(r.c_a.is_none());
        }
    }

    #[test]
    fn csv_shapes() {
        let mut buf = Vec::new();
        write_csv(2, &[], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(
            text.trim(),
            "t,s_1,s_2,p_cmd_1,p_cmd_2,p_del_1,p_del_2,p_o,p_l,e,r_1,r_2,c_a"
        );

        let sc = parse_scenario(&minimal("")).unwrap();
        let recs = run(&sc).unwrap();
        let mut buf = Vec::new();
        write_csv(2, &recs[..1], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().nth(1).unwrap().ends_with(','));
    }

    #[test]
    fn analysis_report() {
        let sc = parse_scenario(PAPER_6DG).unwrap();
        let report = analyze(&sc).unwrap();
        assert!(report.hurwitz);
        assert!(report.spectrum.dominant < 0.0);
        assert!(report.weyl_bound <= report.spectrum.dominant);
        assert!(report.sweep.windows(2).all(|p| p[1].1 < p[0].1));
        let mut out = Vec::new();
        write_analysis(&report, &mut out).unwrap();
        assert!(String::from_utf8(out)
            .unwrap()
            .starts_with("quantity,index,value\n"));
    }
}
