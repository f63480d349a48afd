use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PolicyConfig, PolicyError};
use crate::harness::{Direction, EmulatedChannel, EmulatedSpec, DEFAULT_DATA_SIZE};
use crate::time::{from_secs, secs, Nanos};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Pause,
    Resume,
}

impl Action {
    fn index(self) -> usize {
        match self {
            Action::Pause => 0,
            Action::Resume => 1,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Pause => "pause",
            Action::Resume => "resume",
        })
    }
}

/// Per-step cost `1 - exp(-age)`, in `[0, 1)`. Past about 37 s the exact
/// value rounds to 1, so it is held at the largest double below 1.
pub fn age_cost(age_s: f64) -> f64 {
    (-(-age_s).exp_m1()).min(1.0 - f64::EPSILON / 2.0)
}

/// Tabular Q-learning over geometrically spaced age bins. Values are
/// expected costs, so the greedy action is the one with the smaller Q.
#[derive(Debug, Clone)]
pub struct QAgent {
    edges: Vec<f64>,
    q: Vec<[f64; 2]>,
    visits: Vec<[u64; 2]>,
    pub epsilon: f64,
    pub epsilon_decay: f64,
    pub gamma: f64,
    pub lr: f64,
    rng: ChaCha8Rng,
}

impl QAgent {
    /// `bins` bins spanning 1 ms to 100 s; ages outside fall into the
    /// first or last bin.
    pub fn new(cfg: &PolicyConfig, seed: u64) -> Result<Self, PolicyError> {
        cfg.validate()?;
        Ok(Self::with_bins(cfg.bins, 1e-3, 100.0, cfg, seed))
    }

    fn with_bins(bins: usize, lo: f64, hi: f64, cfg: &PolicyConfig, seed: u64) -> Self {
        let ratio = (hi / lo).powf(1.0 / bins as f64);
        let edges = (0..=bins).map(|k| lo * ratio.powi(k as i32)).collect();
        Self {
            edges,
            q: vec![[0.0; 2]; bins],
            visits: vec![[0; 2]; bins],
            epsilon: cfg.epsilon0,
            epsilon_decay: cfg.epsilon_decay,
            gamma: cfg.gamma,
            lr: cfg.lr,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn bins(&self) -> usize {
        self.q.len()
    }

    pub fn bin(&self, age_s: f64) -> usize {
        let k = self.edges.partition_point(|&e| e <= age_s);
        k.saturating_sub(1).min(self.q.len() - 1)
    }

    /// Lower and upper age of bin `b`.
    pub fn bin_range(&self, b: usize) -> (f64, f64) {
        (self.edges[b], self.edges[b + 1])
    }

    pub fn q(&self, age_s: f64, a: Action) -> f64 {
        self.q[self.bin(age_s)][a.index()]
    }

    pub fn q_bin(&self, b: usize) -> [f64; 2] {
        self.q[b]
    }

    pub fn visits_bin(&self, b: usize) -> [u64; 2] {
        self.visits[b]
    }

    /// Cheaper action in the bin of `age_s`; ties go to resume.
    pub fn greedy(&self, age_s: f64) -> Action {
        let [p, r] = self.q[self.bin(age_s)];
        if p < r {
            Action::Pause
        } else {
            Action::Resume
        }
    }

    pub fn end_episode(&mut self) {
        self.epsilon *= self.epsilon_decay;
    }
}

/// One temporal-difference update of `Q(s, a)` toward the cost of the
/// state reached plus the discounted best value there, or toward the cost
/// alone when `s_next` is terminal. Returns the target used.
pub fn q_step(agent: &mut QAgent, s: f64, a: Action, s_next: f64, done: bool) -> f64 {
    let c = age_cost(s_next);
    let target = if done {
        c
    } else {
        let [p, r] = agent.q[agent.bin(s_next)];
        c + agent.gamma * p.min(r)
    };
    let b = agent.bin(s);
    let q = &mut agent.q[b][a.index()];
    *q += agent.lr * (target - *q);
    agent.visits[b][a.index()] += 1;
    target
}

/// Epsilon-greedy choice.
pub fn q_act(agent: &mut QAgent, s: f64) -> Action {
    if agent.epsilon > 0.0 && agent.rng.random::<f64>() < agent.epsilon {
        if agent.rng.random::<bool>() {
            Action::Resume
        } else {
            Action::Pause
        }
    } else {
        agent.greedy(s)
    }
}

#[derive(Debug, Clone)]
pub struct QReport {
    pub iterations: usize,
    pub episodes: usize,
    pub final_epsilon: f64,
    /// `(bin low, bin high, Q(pause), Q(resume), resume updates)` for every
    /// bin whose resume value was updated at least `min_visits` times.
    pub steady_bins: Vec<(f64, f64, f64, f64, u64)>,
    /// Q(resume) of the bin the agent most often starts from, after each
    /// iteration.
    pub resume_trace: Vec<f64>,
    /// Actions taken over the last tenth of training.
    pub tail_actions: Vec<Action>,
}

impl QReport {
    pub fn greedy_always_resume(&self) -> bool {
        self.steady_bins.iter().all(|b| b.3 <= b.2)
    }
}

/// Pause/resume environment on an emulated path. The state is the age at
/// the responder. Resuming sends a fresh sample whose delivery ends the
/// episode with the age equal to its transit time; pausing lets the age
/// grow by `step_s`. A lost sample counts as a pause.
pub fn train_q(
    agent: &mut QAgent,
    spec: &EmulatedSpec,
    step_s: f64,
    iterations: usize,
    min_visits: u64,
) -> Result<QReport, PolicyError> {
    const MAX_EPISODE_STEPS: usize = 500;
    if !(step_s > 0.0 && step_s.is_finite()) {
        return Err(PolicyError::Config(format!(
            "step must be positive, got {step_s}"
        )));
    }
    let step: Nanos = from_secs(step_s);
    let mut ch = EmulatedChannel::new(spec)?;
    let mut now: Nanos = 0;
    let mut newest: Nanos = 0;
    let mut episodes = 0;
    let mut resume_trace = Vec::with_capacity(iterations);
    let mut tail_actions = Vec::new();
    let mut start_bins = vec![0u64; agent.bins()];

    // first delivery fixes the starting age of an episode
    let deliver = |ch: &mut EmulatedChannel, now: &mut Nanos, newest: &mut Nanos| -> bool {
        let gen = *now;
        match ch.transit(Direction::Forward, gen, DEFAULT_DATA_SIZE) {
            Some(at) => {
                *now = at;
                *newest = gen;
                true
            }
            None => {
                *now += step;
                false
            }
        }
    };
    while !deliver(&mut ch, &mut now, &mut newest) {}

    let mut it = 0;
    while it < iterations {
        let mut s = secs(now - newest);
        start_bins[agent.bin(s)] += 1;
        for k in 0..MAX_EPISODE_STEPS {
            if it == iterations {
                break;
            }
            let a = q_act(agent, s);
            let delivered = a == Action::Resume && deliver(&mut ch, &mut now, &mut newest);
            if !delivered && a == Action::Pause {
                now += step;
            }
            let s_next = secs(now - newest);
            q_step(agent, s, a, s_next, delivered);
            it += 1;
            if it * 10 > iterations * 9 {
                tail_actions.push(a);
            }
            let home = start_bins
                .iter()
                .enumerate()
                .max_by_key(|(_, &n)| n)
                .map_or(0, |(b, _)| b);
            resume_trace.push(agent.q_bin(home)[Action::Resume.index()]);
            s = s_next;
            if delivered || k + 1 == MAX_EPISODE_STEPS {
                break;
            }
        }
        episodes += 1;
        agent.end_episode();
    }

    let steady_bins = (0..agent.bins())
        .filter(|&b| agent.visits[b][Action::Resume.index()] >= min_visits)
        .map(|b| {
            let (lo, hi) = agent.bin_range(b);
            let [p, r] = agent.q[b];
            (lo, hi, p, r, agent.visits[b][Action::Resume.index()])
        })
        .collect();
    Ok(QReport {
        iterations: it,
        episodes,
        final_epsilon: agent.epsilon,
        steady_bins,
        resume_trace,
        tail_actions,
    })
}
