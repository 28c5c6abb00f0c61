//! Single-server discrete-event simulation with deadlines.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution as _, Exp};
use serde::{Deserialize, Serialize};
use tailsim_core::{Distribution, Stream};

use super::QueueError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Earliest deadline first, preempt-resume.
    Edf,
    Fcfs,
    /// Random order of service.
    Ros,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Edf => "edf",
            Self::Fcfs => "fcfs",
            Self::Ros => "ros",
        })
    }
}

impl FromStr for Policy {
    type Err = QueueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "edf" => Ok(Self::Edf),
            "fcfs" | "fifo" => Ok(Self::Fcfs),
            "ros" => Ok(Self::Ros),
            other => Err(QueueError::Config(format!("unknown policy `{other}` (edf, fcfs, ros)"))),
        }
    }
}

/// Renewal arrivals and services given by their inter-event laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QueueConfig {
    pub interarrival: Distribution,
    pub service: Distribution,
    pub deadline: Distribution,
    pub policy: Policy,
}

impl QueueConfig {
    pub fn new(interarrival: Distribution, service: Distribution, deadline: Distribution, policy: Policy) -> Result<Self, QueueError> {
        let c = Self { interarrival, service, deadline, policy };
        c.validate()?;
        Ok(c)
    }

    /// M/M/1 with unit service rate and arrival rate `rho`.
    pub fn mm1(rho: f64, deadline: Distribution, policy: Policy) -> Result<Self, QueueError> {
        let arr = Distribution::exponential(rho).map_err(|e| QueueError::Config(e.to_string()))?;
        Self::new(arr, Distribution::exponential(1.0).expect("unit rate"), deadline, policy)
    }

    pub fn validate(&self) -> Result<(), QueueError> {
        for (name, d) in [("interarrival", &self.interarrival), ("service", &self.service), ("deadline", &self.deadline)] {
            if d.support_bounds().0 < 0.0 {
                return Err(QueueError::Config(format!("{name} law {d} must be nonnegative")));
            }
        }
        for (name, d) in [("interarrival", &self.interarrival), ("service", &self.service)] {
            let m = d.mean();
            if !(m > 0.0 && m.is_finite()) {
                return Err(QueueError::Config(format!("{name} law {d} needs a finite positive mean")));
            }
        }
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        1.0 / self.interarrival.mean()
    }

    pub fn mu(&self) -> f64 {
        1.0 / self.service.mean()
    }

    pub fn rho(&self) -> f64 {
        self.lambda() / self.mu()
    }

    /// `ρ < 1`. Unstable runs are legal; callers report this as a warning.
    pub fn is_stable(&self) -> bool {
        self.rho() < 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaskRecord {
    pub id: u64,
    pub arrival: f64,
    /// Relative deadline `D`.
    pub deadline: f64,
    pub service: f64,
    /// First time the task entered service.
    pub start: f64,
    pub finish: f64,
    /// Time spent in the system without being served.
    pub wait: f64,
    pub late: bool,
}

impl TaskRecord {
    pub fn absolute_deadline(&self) -> f64 {
        self.arrival + self.deadline
    }

    pub fn lead_time(&self, t: f64) -> f64 {
        self.absolute_deadline() - t
    }
}

/// Lead times of all waiting tasks (the one in service excluded) at an
/// inspection instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeadTimeProfile {
    pub time: f64,
    pub q: usize,
    /// Sorted ascending; `len() == q`.
    pub lead_times: Vec<f64>,
}

impl LeadTimeProfile {
    pub fn cdf(&self, x: f64) -> f64 {
        if self.q == 0 {
            return 0.0;
        }
        self.lead_times.partition_point(|&l| l <= x) as f64 / self.q as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunOptions {
    pub horizon: f64,
    /// Statistics and snapshots start here.
    pub warmup: f64,
    /// Rate of the Poisson inspection clock; zero disables snapshots.
    pub inspection_rate: f64,
    /// Inclusive window on `Q` for keeping a snapshot.
    pub q_window: Option<(usize, usize)>,
    pub record_tasks: bool,
    /// Verify the EDF choice by a full scan at every service start.
    pub check_invariants: bool,
}

impl RunOptions {
    pub fn new(horizon: f64) -> Self {
        Self { horizon, warmup: 0.0, inspection_rate: 0.0, q_window: None, record_tasks: false, check_invariants: false }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct QueueMetrics {
    pub arrivals: u64,
    pub departures: u64,
    /// Time average of the number waiting, over `[warmup, horizon]`.
    pub mean_q: f64,
    /// Mean wait of tasks that arrived after warmup and departed.
    pub mean_w: f64,
    pub mean_sojourn: f64,
    pub late_count: u64,
    pub late_fraction: f64,
    /// Arrivals per unit time after warmup.
    pub observed_lambda: f64,
    pub busy_time: f64,
    /// Completed service plus work done on the task still in service.
    pub work_done: f64,
    pub preemptions: u64,
    pub edf_violations: u64,
}

impl QueueMetrics {
    /// `|⟨Q⟩ - λ⟨W⟩| / ⟨Q⟩` with the observed arrival rate.
    pub fn little_error(&self) -> f64 {
        (self.mean_q - self.observed_lambda * self.mean_w).abs() / self.mean_q
    }
}

#[derive(Debug, Clone)]
pub struct DesRun {
    pub metrics: QueueMetrics,
    pub tasks: Vec<TaskRecord>,
    pub snapshots: Vec<LeadTimeProfile>,
    /// Time spent at each waiting-queue length after warmup.
    pub q_occupancy: Vec<f64>,
    pub stable: bool,
}

impl DesRun {
    pub fn waits(&self) -> Vec<f64> {
        self.tasks.iter().map(|t| t.wait).collect()
    }
}

/// One task's exogenous data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JobSpec {
    pub arrival: f64,
    pub service: f64,
    pub deadline: f64,
}

#[derive(Debug, Clone, Copy)]
struct Active {
    id: u64,
    arrival: f64,
    deadline: f64,
    service: f64,
    remaining: f64,
    start: Option<f64>,
}

impl Active {
    fn due(&self) -> f64 {
        self.arrival + self.deadline
    }
}

/// Heap key: earliest absolute deadline, ties by arrival order.
struct ByDeadline(Active);

impl PartialEq for ByDeadline {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for ByDeadline {}
impl PartialOrd for ByDeadline {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for ByDeadline {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.due().total_cmp(&other.0.due()).then(self.0.id.cmp(&other.0.id))
    }
}

enum Waiting {
    Edf(BinaryHeap<Reverse<ByDeadline>>),
    Fifo(VecDeque<Active>),
    Random(Vec<Active>),
}

impl Waiting {
    fn new(policy: Policy) -> Self {
        match policy {
            Policy::Edf => Self::Edf(BinaryHeap::new()),
            Policy::Fcfs => Self::Fifo(VecDeque::new()),
            Policy::Ros => Self::Random(Vec::new()),
        }
    }

    fn len(&self) -> usize {
        match self {
            Self::Edf(h) => h.len(),
            Self::Fifo(q) => q.len(),
            Self::Random(v) => v.len(),
        }
    }

    fn push(&mut self, job: Active) {
        match self {
            Self::Edf(h) => h.push(Reverse(ByDeadline(job))),
            Self::Fifo(q) => q.push_back(job),
            Self::Random(v) => v.push(job),
        }
    }

    fn pop<R: Rng>(&mut self, rng: &mut R) -> Option<Active> {
        match self {
            Self::Edf(h) => h.pop().map(|Reverse(ByDeadline(j))| j),
            Self::Fifo(q) => q.pop_front(),
            Self::Random(v) if v.is_empty() => None,
            Self::Random(v) => {
                let i = rng.random_range(0..v.len());
                Some(v.swap_remove(i))
            }
        }
    }

    fn for_each(&self, mut f: impl FnMut(&Active)) {
        match self {
            Self::Edf(h) => h.iter().for_each(|Reverse(ByDeadline(j))| f(j)),
            Self::Fifo(q) => q.iter().for_each(f),
            Self::Random(v) => v.iter().for_each(f),
        }
    }
}

/// Runs the queue from empty with jobs drawn from named substreams of
/// `stream`, so that different policies under one seed see identical
/// arrival, service and deadline sequences.
pub fn run_des(config: &QueueConfig, options: &RunOptions, stream: Stream) -> Result<DesRun, QueueError> {
    config.validate()?;
    let mut arr_rng = stream.named("arrival").rng();
    let mut svc_rng = stream.named("service").rng();
    let mut ddl_rng = stream.named("deadline").rng();
    let mut t = 0.0;
    let jobs = std::iter::from_fn(move || {
        t += config.interarrival.sample(&mut arr_rng);
        Some(JobSpec { arrival: t, service: config.service.sample(&mut svc_rng), deadline: config.deadline.sample(&mut ddl_rng) })
    });
    let mut run = simulate(jobs, config.policy, options, stream)?;
    run.stable = config.is_stable();
    Ok(run)
}

/// Event loop over an explicit job sequence with nondecreasing arrivals.
pub fn simulate(jobs: impl IntoIterator<Item = JobSpec>, policy: Policy, options: &RunOptions, stream: Stream) -> Result<DesRun, QueueError> {
    if !(options.horizon > 0.0) || !(options.warmup >= 0.0) || options.warmup >= options.horizon {
        return Err(QueueError::Config(format!("need 0 <= warmup < horizon, got {} and {}", options.warmup, options.horizon)));
    }
    let mut ros_rng = stream.named("ros").rng();
    let mut insp_rng = stream.named("inspection").rng();
    let inspection = (options.inspection_rate > 0.0).then(|| Exp::new(options.inspection_rate).map_err(|e| QueueError::Config(e.to_string()))).transpose()?;

    let mut jobs = jobs.into_iter().peekable();
    let mut next_id = 0u64;
    let mut waiting = Waiting::new(policy);
    let mut server: Option<Active> = None;
    let mut next_inspection = inspection.map_or(f64::INFINITY, |e| e.sample(&mut insp_rng));

    let mut m = QueueMetrics::default();
    let mut tasks = Vec::new();
    let mut snapshots = Vec::new();
    let mut occupancy: Vec<f64> = Vec::new();
    let mut q_area = 0.0;
    let mut arrivals_after_warmup = 0u64;
    let (mut w_sum, mut soj_sum, mut w_count) = (0.0, 0.0, 0u64);
    let mut completed_work = 0.0;
    let mut now = 0.0;

    let start_service = |job: Active, at: f64, waiting: &Waiting, m: &mut QueueMetrics| -> Active {
        if options.check_invariants && policy == Policy::Edf {
            let mut earlier = false;
            waiting.for_each(|w| earlier |= ByDeadline(*w) < ByDeadline(job));
            m.edf_violations += u64::from(earlier);
        }
        Active { start: job.start.or(Some(at)), ..job }
    };

    loop {
        let t_dep = server.map_or(f64::INFINITY, |j| now + j.remaining);
        let t_arr = jobs.peek().map_or(f64::INFINITY, |j| j.arrival);
        if let Some(j) = jobs.peek() {
            if j.arrival < now {
                return Err(QueueError::Config(format!("job arrivals must be nondecreasing ({} after {now})", j.arrival)));
            }
        }
        let t_next = t_dep.min(t_arr).min(next_inspection);
        let until = t_next.min(options.horizon);
        // Accumulate over [now, until] restricted to the post-warmup span.
        let lo = now.max(options.warmup);
        if until > lo {
            let q = waiting.len();
            q_area += q as f64 * (until - lo);
            if occupancy.len() <= q {
                occupancy.resize(q + 1, 0.0);
            }
            occupancy[q] += until - lo;
        }
        if let Some(j) = server.as_mut() {
            m.busy_time += until - now;
            if until < t_dep {
                j.remaining -= until - now;
            }
        }
        now = until;
        if t_next > options.horizon {
            break;
        }

        if t_dep <= t_arr && t_dep <= next_inspection {
            let done = server.take().expect("departure without a task in service");
            completed_work += done.service;
            let finish = now;
            let wait = finish - done.arrival - done.service;
            let late = finish > done.due();
            m.departures += 1;
            if done.arrival >= options.warmup {
                w_sum += wait;
                soj_sum += finish - done.arrival;
                w_count += 1;
                m.late_count += u64::from(late);
            }
            if options.record_tasks {
                tasks.push(TaskRecord {
                    id: done.id,
                    arrival: done.arrival,
                    deadline: done.deadline,
                    service: done.service,
                    start: done.start.expect("served task has a start"),
                    finish,
                    wait,
                    late,
                });
            }
            if let Some(next) = waiting.pop(&mut ros_rng) {
                server = Some(start_service(next, now, &waiting, &mut m));
            }
        } else if t_arr <= next_inspection {
            let spec = jobs.next().expect("peeked arrival");
            let job = Active { id: next_id, arrival: spec.arrival, deadline: spec.deadline, service: spec.service, remaining: spec.service, start: None };
            next_id += 1;
            m.arrivals += 1;
            if spec.arrival >= options.warmup {
                arrivals_after_warmup += 1;
            }
            match server {
                None => server = Some(start_service(job, now, &waiting, &mut m)),
                Some(cur) if policy == Policy::Edf && ByDeadline(job) < ByDeadline(cur) => {
                    m.preemptions += 1;
                    waiting.push(cur);
                    server = Some(start_service(job, now, &waiting, &mut m));
                }
                Some(_) => waiting.push(job),
            }
        } else {
            let q = waiting.len();
            let in_window = options.q_window.is_none_or(|(lo, hi)| (lo..=hi).contains(&q));
            if now >= options.warmup && in_window {
                let mut lead_times = Vec::with_capacity(q);
                waiting.for_each(|j| lead_times.push(j.due() - now));
                lead_times.sort_by(f64::total_cmp);
                snapshots.push(LeadTimeProfile { time: now, q, lead_times });
            }
            next_inspection = now + inspection.expect("inspection clock is running").sample(&mut insp_rng);
        }
    }

    let span = options.horizon - options.warmup;
    m.mean_q = q_area / span;
    m.mean_w = w_sum / w_count.max(1) as f64;
    m.mean_sojourn = soj_sum / w_count.max(1) as f64;
    m.late_fraction = m.late_count as f64 / w_count.max(1) as f64;
    m.observed_lambda = arrivals_after_warmup as f64 / span;
    m.work_done = completed_work + server.map_or(0.0, |j| j.service - j.remaining);
    Ok(DesRun { metrics: m, tasks, snapshots, q_occupancy: occupancy, stable: true })
}
