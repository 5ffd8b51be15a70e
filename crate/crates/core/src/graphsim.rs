//! Gillespie simulation of the eight network processes on an explicit
//! simple graph.
//!
//! Event clocks are chosen so that the large-`N` limit reproduces the
//! master equation term by term:
//!
//! | process | total rate |
//! |---|---|
//! | random rewiring | `ω_r · 2E` |
//! | preferential rewiring | `ω_p · 2E` |
//! | deletion of links | `l_d · E` |
//! | random addition of links | `l_r · N` |
//! | preferential addition of links | `l_p · N` |
//! | deletion of nodes | `n_d · 2E` |
//! | random addition of nodes | `n_r · N` |
//! | preferential addition of nodes | `n_p · N` |
//!
//! A degree-proportional node is drawn exactly by picking a uniform edge and
//! then one of its endpoints.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characteristics::InitialCondition;
use crate::degree_ode::TruncatedDistribution;
use crate::error::{Error, Result};
use crate::model::ProcessRates;

/// Attempts per placement before the event is skipped.
pub const MAX_RESAMPLES: usize = 100;

/// Undirected simple graph on nodes `0..N` with an edge list for uniform
/// edge sampling.
#[derive(Debug, Clone, Default)]
pub struct Network {
    edges: Vec<[usize; 2]>,
    /// Ids into `edges` of the edges touching each node.
    incident: Vec<Vec<usize>>,
    /// Events abandoned after `MAX_RESAMPLES` illegal placements.
    pub skipped: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Process {
    RandomRewiring,
    PreferentialRewiring,
    LinkDeletion,
    RandomLinkAddition,
    PreferentialLinkAddition,
    NodeDeletion,
    RandomNodeAddition,
    PreferentialNodeAddition,
}

impl Process {
    pub const ALL: [Process; 8] = [
        Process::RandomRewiring,
        Process::PreferentialRewiring,
        Process::LinkDeletion,
        Process::RandomLinkAddition,
        Process::PreferentialLinkAddition,
        Process::NodeDeletion,
        Process::RandomNodeAddition,
        Process::PreferentialNodeAddition,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Fired {
        process: Process,
        elapsed: f64,
    },
    /// No process can fire.
    Absorbed,
}

impl Network {
    pub fn empty(n: usize) -> Self {
        Self {
            edges: Vec::new(),
            incident: vec![Vec::new(); n],
            skipped: 0,
        }
    }

    /// Adds the listed edges, rejecting loops and duplicates.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut net = Self::empty(n);
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) refers to a missing node"
                )));
            }
            if !net.try_add_edge(u, v) {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) is a loop or duplicate"
                )));
            }
        }
        Ok(net)
    }

    pub fn complete(n: usize) -> Self {
        let mut net = Self::empty(n);
        for u in 0..n {
            for v in u + 1..n {
                net.try_add_edge(u, v);
            }
        }
        net
    }

    pub fn node_count(&self) -> usize {
        self.incident.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, u: usize) -> usize {
        self.incident[u].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.incident.iter().map(Vec::len).collect()
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.incident[u].iter().map(move |&e| {
            let [a, b] = self.edges[e];
            if a == u {
                b
            } else {
                a
            }
        })
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let (small, other) = if self.degree(u) <= self.degree(v) {
            (u, v)
        } else {
            (v, u)
        };
        self.neighbors(small).any(|w| w == other)
    }

    /// Adds `{u, v}` unless it is a loop or already present.
    pub fn try_add_edge(&mut self, u: usize, v: usize) -> bool {
        if u == v || self.has_edge(u, v) {
            return false;
        }
        let id = self.edges.len();
        self.edges.push([u, v]);
        self.incident[u].push(id);
        self.incident[v].push(id);
        true
    }

    fn remove_edge_id(&mut self, id: usize) {
        let [u, v] = self.edges[id];
        for w in [u, v] {
            let pos = self.incident[w]
                .iter()
                .position(|&e| e == id)
                .expect("incidence");
            self.incident[w].swap_remove(pos);
        }
        let last = self.edges.len() - 1;
        if id != last {
            let [a, b] = self.edges[last];
            for w in [a, b] {
                let pos = self.incident[w]
                    .iter()
                    .position(|&e| e == last)
                    .expect("incidence");
                self.incident[w][pos] = id;
            }
        }
        self.edges.swap_remove(id);
    }

    /// Removes node `u` and its edges; the last node takes label `u`.
    pub fn remove_node(&mut self, u: usize) {
        while let Some(&e) = self.incident[u].last() {
            self.remove_edge_id(e);
        }
        let last = self.node_count() - 1;
        if u != last {
            for &e in &self.incident[last] {
                for end in self.edges[e].iter_mut() {
                    if *end == last {
                        *end = u;
                    }
                }
            }
        }
        self.incident.swap_remove(u);
    }

    pub fn add_node(&mut self) -> usize {
        self.incident.push(Vec::new());
        self.incident.len() - 1
    }

    /// Checks the simple-graph and incidence invariants.
    pub fn check(&self) -> std::result::Result<(), String> {
        let n = self.node_count();
        let mut seen = std::collections::HashSet::new();
        for (id, &[u, v]) in self.edges.iter().enumerate() {
            if u >= n || v >= n {
                return Err(format!("edge {id} has a missing endpoint"));
            }
            if u == v {
                return Err(format!("self-loop at {u}"));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(format!("duplicate edge ({u}, {v})"));
            }
            if !self.incident[u].contains(&id) || !self.incident[v].contains(&id) {
                return Err(format!("edge {id} missing from incidence lists"));
            }
        }
        let total: usize = self.incident.iter().map(Vec::len).sum();
        if total != 2 * self.edges.len() {
            return Err(format!(
                "degree sum {total} != 2E = {}",
                2 * self.edges.len()
            ));
        }
        Ok(())
    }

    fn uniform_node<R: Rng>(&self, rng: &mut R) -> usize {
        rng.gen_range(0..self.node_count())
    }

    /// Node drawn with probability proportional to its degree; needs `E > 0`.
    fn preferential_node<R: Rng>(&self, rng: &mut R) -> usize {
        let [a, b] = self.edges[rng.gen_range(0..self.edges.len())];
        if rng.gen::<bool>() {
            a
        } else {
            b
        }
    }

    /// Total rate of each process in the current state.
    pub fn process_rates(&self, rates: &ProcessRates) -> [f64; 8] {
        let n = self.node_count() as f64;
        let e = self.edge_count() as f64;
        let m = rates.m as usize;
        let node_ok = self.node_count() >= m.max(1);
        let pref_node_ok = node_ok && (m == 0 || self.edge_count() > 0);
        let pair_ok = self.node_count() >= 2;
        [
            rates.omega_r * 2.0 * e,
            rates.omega_p * 2.0 * e,
            rates.l_d * e,
            if pair_ok { rates.l_r * n } else { 0.0 },
            if pair_ok && e > 0.0 {
                rates.l_p * n
            } else {
                0.0
            },
            rates.n_d * 2.0 * e,
            if node_ok { rates.n_r * n } else { 0.0 },
            if pref_node_ok { rates.n_p * n } else { 0.0 },
        ]
    }

    /// One Gillespie event.
    pub fn step<R: Rng>(&mut self, rates: &ProcessRates, rng: &mut R) -> StepOutcome {
        let total: f64 = self.process_rates(rates).iter().sum();
        if !(total > 0.0) {
            return StepOutcome::Absorbed;
        }
        let elapsed = -(1.0 - rng.gen::<f64>()).ln() / total;
        let process = self.fire(rates, rng);
        StepOutcome::Fired { process, elapsed }
    }

    /// Chooses a process in proportion to its rate and applies it; needs a
    /// positive total rate.
    pub fn fire<R: Rng>(&mut self, rates: &ProcessRates, rng: &mut R) -> Process {
        let r = self.process_rates(rates);
        let total: f64 = r.iter().sum();
        let mut pick = rng.gen::<f64>() * total;
        let mut process = Process::ALL[7];
        for (i, &ri) in r.iter().enumerate() {
            if ri > 0.0 && pick < ri {
                process = Process::ALL[i];
                break;
            }
            pick -= ri;
        }
        self.apply(process, rates.m as usize, rng);
        process
    }

    /// Mutates the graph as `process` prescribes.
    pub fn apply<R: Rng>(&mut self, process: Process, m: usize, rng: &mut R) {
        match process {
            Process::RandomRewiring | Process::PreferentialRewiring => {
                let id = rng.gen_range(0..self.edges.len());
                let [a, b] = self.edges[id];
                let keep = if rng.gen::<bool>() { a } else { b };
                let preferential = process == Process::PreferentialRewiring;
                let target = (0..MAX_RESAMPLES).find_map(|_| {
                    let w = if preferential {
                        self.preferential_node(rng)
                    } else {
                        self.uniform_node(rng)
                    };
                    (w != keep && !self.has_edge(keep, w)).then_some(w)
                });
                match target {
                    Some(w) => {
                        self.remove_edge_id(id);
                        self.try_add_edge(keep, w);
                    }
                    None => self.skipped += 1,
                }
            }
            Process::LinkDeletion => {
                let id = rng.gen_range(0..self.edges.len());
                self.remove_edge_id(id);
            }
            Process::RandomLinkAddition | Process::PreferentialLinkAddition => {
                let preferential = process == Process::PreferentialLinkAddition;
                let placed = (0..MAX_RESAMPLES).any(|_| {
                    let (u, v) = if preferential {
                        (self.preferential_node(rng), self.preferential_node(rng))
                    } else {
                        (self.uniform_node(rng), self.uniform_node(rng))
                    };
                    self.try_add_edge(u, v)
                });
                if !placed {
                    self.skipped += 1;
                }
            }
            Process::NodeDeletion => {
                let u = self.uniform_node(rng);
                self.remove_node(u);
            }
            Process::RandomNodeAddition | Process::PreferentialNodeAddition => {
                let preferential = process == Process::PreferentialNodeAddition;
                let mut chosen: Vec<usize> = Vec::with_capacity(m);
                let mut attempts = 0;
                while chosen.len() < m && attempts < MAX_RESAMPLES * m.max(1) {
                    attempts += 1;
                    let w = if preferential {
                        self.preferential_node(rng)
                    } else {
                        self.uniform_node(rng)
                    };
                    if !chosen.contains(&w) {
                        chosen.push(w);
                    }
                }
                if chosen.len() < m {
                    self.skipped += 1;
                    return;
                }
                let u = self.add_node();
                for w in chosen {
                    self.try_add_edge(u, w);
                }
            }
        }
    }
}

/// Fractions of nodes by degree, zero-padded to at least `k_max`.
pub fn empirical_distribution(net: &Network, k_max: usize) -> TruncatedDistribution {
    let degrees = net.degrees();
    let top = degrees.iter().copied().max().unwrap_or(0).max(k_max);
    let mut p = vec![0.0; top + 1];
    let n = net.node_count();
    for d in degrees {
        p[d] += 1.0;
    }
    if n > 0 {
        p.iter_mut().for_each(|v| *v /= n as f64);
    }
    TruncatedDistribution { p, t: 0.0 }
}

/// Integer counts summing to `n`, proportional to `weights`
/// (largest-remainder rounding).
pub fn largest_remainder(weights: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|v| v.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Starting graph of a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialGraph {
    /// Configuration model for the degree distribution of `h`; loops and
    /// duplicate pairs are discarded.
    Configuration,
    /// `G(N, M)` with `M = round(N · mean_degree / 2)`.
    ErdosRenyi {
        mean_degree: f64,
    },
    Empty,
}

pub fn configuration_model<R: Rng>(degrees: &[usize], rng: &mut R) -> Network {
    let mut stubs: Vec<usize> = degrees
        .iter()
        .enumerate()
        .flat_map(|(u, &d)| std::iter::repeat_n(u, d))
        .collect();
    // Fisher–Yates
    for i in (1..stubs.len()).rev() {
        let j = rng.gen_range(0..=i);
        stubs.swap(i, j);
    }
    let mut net = Network::empty(degrees.len());
    for pair in stubs.chunks_exact(2) {
        net.try_add_edge(pair[0], pair[1]);
    }
    net
}

pub fn erdos_renyi<R: Rng>(n: usize, mean_degree: f64, rng: &mut R) -> Network {
    let mut net = Network::empty(n);
    if n < 2 {
        return net;
    }
    let max_edges = n * (n - 1) / 2;
    let target = ((n as f64 * mean_degree / 2.0).round() as usize).min(max_edges);
    while net.edge_count() < target {
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        net.try_add_edge(u, v);
    }
    net
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub rates: ProcessRates,
    pub nodes: usize,
    pub replicas: usize,
    pub seed: u64,
    pub sample_times: Vec<f64>,
    /// Minimum length of the recorded distributions.
    pub k_max: usize,
    pub initial: InitialGraph,
    /// Degree distribution used by `InitialGraph::Configuration`.
    pub degree_law: Option<InitialCondition>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        if self.nodes < self.rates.m as usize + 1 {
            return Err(Error::Validation(format!(
                "need at least m + 1 = {} nodes, got {}",
                self.rates.m + 1,
                self.nodes
            )));
        }
        if self.replicas == 0 {
            return Err(Error::Validation("need at least one replica".into()));
        }
        if self
            .sample_times
            .iter()
            .any(|t| !(t.is_finite() && *t >= 0.0))
            || self.sample_times.windows(2).any(|w| !(w[0] < w[1]))
        {
            return Err(Error::Validation(
                "sample times must be nonnegative and increasing".into(),
            ));
        }
        if matches!(self.initial, InitialGraph::Configuration) && self.degree_law.is_none() {
            return Err(Error::Validation(
                "configuration start needs a degree distribution".into(),
            ));
        }
        Ok(())
    }

    fn initial_network<R: Rng>(&self, rng: &mut R) -> Network {
        match &self.initial {
            InitialGraph::Configuration => {
                let h = self.degree_law.as_ref().expect("validated");
                let k_cap = self.k_max.max(self.nodes.min(4096));
                let counts = largest_remainder(&h.coefficients(k_cap), self.nodes);
                let mut degrees: Vec<usize> = counts
                    .iter()
                    .enumerate()
                    .flat_map(|(k, &c)| std::iter::repeat_n(k, c))
                    .collect();
                if degrees.iter().sum::<usize>() % 2 == 1 {
                    // an odd stub is dropped from the largest-degree node
                    if let Some(d) = degrees.iter_mut().max() {
                        *d -= 1;
                    }
                }
                configuration_model(&degrees, rng)
            }
            InitialGraph::ErdosRenyi { mean_degree } => erdos_renyi(self.nodes, *mean_degree, rng),
            InitialGraph::Empty => Network::empty(self.nodes),
        }
    }
}

/// Samples of one replica.
#[derive(Debug, Clone)]
pub struct Replica {
    pub samples: Vec<TruncatedDistribution>,
    pub events: u64,
    pub skipped: u64,
    /// Time at which no process could fire, if that happened.
    pub absorbed_at: Option<f64>,
}

/// Runs one replica with its own generator.
pub fn run_replica(config: &SimConfig, seed: u64) -> Replica {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = config.initial_network(&mut rng);
    let mut samples = Vec::with_capacity(config.sample_times.len());
    let mut t = 0.0;
    let mut events = 0;
    let mut absorbed_at = None;
    for &ts in &config.sample_times {
        while absorbed_at.is_none() {
            let r: f64 = net.process_rates(&config.rates).iter().sum();
            if !(r > 0.0) {
                absorbed_at = Some(t);
                break;
            }
            let wait = -(1.0 - rng.gen::<f64>()).ln() / r;
            if t + wait > ts {
                // memoryless: the overshooting wait is redrawn from ts on
                t = ts;
                break;
            }
            t += wait;
            net.fire(&config.rates, &mut rng);
            events += 1;
        }
        let mut d = empirical_distribution(&net, config.k_max);
        d.t = ts;
        samples.push(d);
    }
    Replica {
        samples,
        events,
        skipped: net.skipped,
        absorbed_at,
    }
}

/// Ensemble mean and standard error of the degree distribution.
#[derive(Debug, Clone)]
pub struct EnsembleSeries {
    pub times: Vec<f64>,
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub replicas: usize,
    pub events: u64,
    pub skipped: u64,
    /// Replicas that reached an absorbing state.
    pub absorbed: usize,
}

/// Runs `config.replicas` independent replicas in parallel; replica `r`
/// uses seed `seed + r`.
pub fn run(config: &SimConfig) -> Result<EnsembleSeries> {
    config.validate()?;
    let reps: Vec<Replica> = (0..config.replicas)
        .into_par_iter()
        .map(|r| run_replica(config, config.seed.wrapping_add(r as u64)))
        .collect();
    let nt = config.sample_times.len();
    let mut mean = Vec::with_capacity(nt);
    let mut stderr = Vec::with_capacity(nt);
    let n = reps.len() as f64;
    for i in 0..nt {
        let len = reps.iter().map(|r| r.samples[i].p.len()).max().unwrap_or(1);
        let at = |r: &Replica, k: usize| r.samples[i].p.get(k).copied().unwrap_or(0.0);
        let mu: Vec<f64> = (0..len)
            .map(|k| reps.iter().map(|r| at(r, k)).sum::<f64>() / n)
            .collect();
        let se: Vec<f64> = (0..len)
            .map(|k| {
                if reps.len() < 2 {
                    return 0.0;
                }
                let var = reps.iter().map(|r| (at(r, k) - mu[k]).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            })
            .collect();
        mean.push(mu);
        stderr.push(se);
    }
    Ok(EnsembleSeries {
        times: config.sample_times.clone(),
        mean,
        stderr,
        replicas: reps.len(),
        events: reps.iter().map(|r| r.events).sum(),
        skipped: reps.iter().map(|r| r.skipped).sum(),
        absorbed: reps.iter().filter(|r| r.absorbed_at.is_some()).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets::mixed;

    fn star(n: usize) -> Network {
        let edges: Vec<(usize, usize)> = (1..n).map(|v| (0, v)).collect();
        Network::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn distributions_of_small_graphs() {
        let k4 = empirical_distribution(&Network::complete(4), 3);
        assert_eq!(k4.p, vec![0.0, 0.0, 0.0, 1.0]);
        let empty = empirical_distribution(&Network::empty(5), 2);
        assert_eq!(empty.p, vec![1.0, 0.0, 0.0]);
        let s = empirical_distribution(&star(5), 4);
        assert_eq!(s.p, vec![0.0, 0.8, 0.0, 0.0, 0.2]);
    }

    #[test]
    fn edge_accounting_per_process() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for process in Process::ALL {
            let mut net = erdos_renyi(60, 4.0, &mut rng);
            let (n0, e0) = (net.node_count(), net.edge_count());
            let deg_sum_before: usize = net.degrees().iter().sum();
            assert_eq!(deg_sum_before, 2 * e0);
            net.apply(process, 3, &mut rng);
            net.check().unwrap();
            let (n1, e1) = (net.node_count(), net.edge_count());
            match process {
                Process::RandomRewiring | Process::PreferentialRewiring => assert_eq!(e1, e0),
                Process::LinkDeletion => assert_eq!(e1, e0 - 1),
                Process::RandomLinkAddition | Process::PreferentialLinkAddition => {
                    assert_eq!(e1, e0 + 1)
                }
                Process::NodeDeletion => {
                    assert_eq!(n1, n0 - 1);
                    assert!(e1 <= e0);
                }
                Process::RandomNodeAddition | Process::PreferentialNodeAddition => {
                    assert_eq!(n1, n0 + 1);
                    assert_eq!(e1, e0 + 3);
                    assert_eq!(net.degree(n1 - 1), 3);
                }
            }
        }
    }

    #[test]
    fn node_removal_relabels() {
        let mut net = star(5);
        net.remove_node(0);
        assert_eq!(net.node_count(), 4);
        assert_eq!(net.edge_count(), 0);
        let mut net = star(5);
        net.remove_node(2);
        net.check().unwrap();
        assert_eq!(net.degree(0), 3);
        assert_eq!(net.edge_count(), 3);
    }

    #[test]
    fn zero_rates_absorb() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = star(4);
        assert_eq!(
            net.step(&ProcessRates::default(), &mut rng),
            StepOutcome::Absorbed
        );
    }

    #[test]
    fn largest_remainder_sums() {
        let c = largest_remainder(&[0.5, 0.25, 0.25], 7);
        assert_eq!(c.iter().sum::<usize>(), 7);
        assert_eq!(c, vec![3, 2, 2]);
    }

    #[test]
    fn seeded_runs_repeat() {
        let cfg = SimConfig {
            rates: mixed(),
            nodes: 200,
            replicas: 3,
            seed: 11,
            sample_times: vec![0.0, 0.05, 0.1],
            k_max: 10,
            initial: InitialGraph::ErdosRenyi { mean_degree: 2.0 },
            degree_law: None,
        };
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.events, b.events);
    }
}
