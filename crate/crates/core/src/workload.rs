//! Trace libraries, request generation, and WCET profiling.
//!
//! A trace library captures what the inference side would produce: per
//! request, the confidence and correctness at every exit, plus the shared
//! per-stage worst-case execution times. The workload layer turns a library
//! into a request stream — K closed-loop clients by default, or open-loop
//! Poisson arrivals.
//!
//! Trace file format (line-oriented UTF-8):
//!   header  `#stages=<n> classes=<c> wcet=<w1,...,wn>`
//!   record  `conf1,ok1;conf2,ok2;...`   (one per line, ok ∈ {0,1})

use std::fmt::Write as _;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::{Job, JobId, StageProfile};

/// Shared metadata for every record in a library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub num_stages: usize,
    pub num_classes: usize,
    pub stage_wcet: Vec<f64>,
}

/// One request's realized exits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub conf: Vec<f64>,
    pub ok: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLibrary {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

impl TraceLibrary {
    pub fn new(header: TraceHeader, records: Vec<TraceRecord>) -> Result<Self> {
        let lib = Self { header, records };
        lib.validate()?;
        Ok(lib)
    }

    fn validate(&self) -> Result<()> {
        let h = &self.header;
        if h.num_stages == 0 || h.num_classes == 0 {
            return Err(Error::Validation("stages and classes must be positive".into()));
        }
        if h.stage_wcet.len() != h.num_stages {
            return Err(Error::Validation(format!(
                "header lists {} wcet values for {} stages",
                h.stage_wcet.len(),
                h.num_stages
            )));
        }
        if h.stage_wcet.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Validation("stage wcet values must be > 0".into()));
        }
        for (i, r) in self.records.iter().enumerate() {
            if r.conf.len() != h.num_stages || r.ok.len() != h.num_stages {
                return Err(Error::Validation(format!(
                    "record {i} does not have {} stages",
                    h.num_stages
                )));
            }
            if r.conf.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(Error::Validation(format!("record {i} confidence outside [0,1]")));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header_line) = lines
            .next()
            .ok_or_else(|| Error::TraceParse { line: 1, msg: "empty trace".into() })?;
        let header = parse_header(header_line).map_err(|msg| Error::TraceParse { line: 1, msg })?;
        let mut records = Vec::new();
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let rec = parse_record(line, header.num_stages)
                .map_err(|msg| Error::TraceParse { line: idx + 1, msg })?;
            records.push(rec);
        }
        Self::new(header, records)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "#stages={} classes={} wcet={}\n",
            self.header.num_stages,
            self.header.num_classes,
            self.header
                .stage_wcet
                .iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join(",")
        ));
        for r in &self.records {
            let mut line = String::new();
            for (i, (c, ok)) in r.conf.iter().zip(&r.ok).enumerate() {
                if i > 0 {
                    line.push(';');
                }
                let _ = write!(line, "{},{}", c, u8::from(*ok));
            }
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

fn parse_header(line: &str) -> std::result::Result<TraceHeader, String> {
    let line = line
        .strip_prefix('#')
        .ok_or_else(|| "header must start with '#'".to_string())?;
    let mut stages = None;
    let mut classes = None;
    let mut wcet = None;
    for field in line.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| format!("malformed header field '{field}'"))?;
        match key {
            "stages" => stages = Some(value.parse::<usize>().map_err(|e| e.to_string())?),
            "classes" => classes = Some(value.parse::<usize>().map_err(|e| e.to_string())?),
            "wcet" => {
                wcet = Some(
                    value
                        .split(',')
                        .map(|v| v.parse::<f64>().map_err(|e| e.to_string()))
                        .collect::<std::result::Result<Vec<f64>, String>>()?,
                )
            }
            other => return Err(format!("unknown header key '{other}'")),
        }
    }
    Ok(TraceHeader {
        num_stages: stages.ok_or("header missing 'stages'")?,
        num_classes: classes.ok_or("header missing 'classes'")?,
        stage_wcet: wcet.ok_or("header missing 'wcet'")?,
    })
}

fn parse_record(line: &str, num_stages: usize) -> std::result::Result<TraceRecord, String> {
    let mut conf = Vec::with_capacity(num_stages);
    let mut ok = Vec::with_capacity(num_stages);
    for part in line.split(';') {
        let (c, o) = part
            .split_once(',')
            .ok_or_else(|| format!("malformed stage entry '{part}'"))?;
        conf.push(c.trim().parse::<f64>().map_err(|e| e.to_string())?);
        ok.push(match o.trim() {
            "0" => false,
            "1" => true,
            other => return Err(format!("correct flag must be 0 or 1, got '{other}'")),
        });
    }
    if conf.len() != num_stages {
        return Err(format!("expected {num_stages} stages, got {}", conf.len()));
    }
    Ok(TraceRecord { conf, ok })
}

/// Confidence-curve family for synthetic libraries: each record draws a
/// difficulty (easy/hard base confidence) and saturates toward 1 with a
/// per-record decay factor; correctness is coupled comonotonically so a
/// record, once correct at some exit, stays correct at deeper ones whenever
/// its confidence keeps growing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    /// Fraction of easy records.
    pub easy_frac: f64,
    /// First-exit confidence range for easy records.
    pub easy_base: (f64, f64),
    /// First-exit confidence range for hard records.
    pub hard_base: (f64, f64),
    /// Per-stage error decay factor range (lower = faster saturation).
    pub decay: (f64, f64),
    /// Fraction of hard records that are stuck: extra depth barely helps.
    pub stuck_frac: f64,
    /// Decay range for stuck records (near 1 = flat confidence).
    pub stuck_decay: (f64, f64),
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            easy_frac: 0.5,
            easy_base: (0.8, 0.95),
            hard_base: (0.2, 0.45),
            decay: (0.4, 0.6),
            stuck_frac: 0.3,
            stuck_decay: (0.85, 0.98),
        }
    }
}

/// Generate a synthetic trace library with `num_records` records.
pub fn synth_library(
    num_stages: usize,
    num_classes: usize,
    num_records: usize,
    stage_wcet: &[f64],
    params: &SynthParams,
    seed: u64,
) -> Result<TraceLibrary> {
    if stage_wcet.len() != num_stages {
        return Err(Error::Validation(format!(
            "need {num_stages} wcet values, got {}",
            stage_wcet.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(num_records);
    for _ in 0..num_records {
        let easy = rng.random_bool(params.easy_frac.clamp(0.0, 1.0));
        let (lo, hi) = if easy { params.easy_base } else { params.hard_base };
        let c1 = rng.random_range(lo..=hi);
        let stuck = !easy && rng.random_bool(params.stuck_frac.clamp(0.0, 1.0));
        let (glo, ghi) = if stuck { params.stuck_decay } else { params.decay };
        let g = rng.random_range(glo..=ghi);
        // conf_l = 1 − (1 − c1)·g^(l−1): non-decreasing, saturating.
        let conf: Vec<f64> = (0..num_stages)
            .map(|l| 1.0 - (1.0 - c1) * g.powi(l as i32))
            .collect();
        // One latent draw per record keeps correctness monotone in depth.
        let u: f64 = rng.random_range(0.0..1.0);
        let ok: Vec<bool> = conf.iter().map(|&c| u <= c).collect();
        records.push(TraceRecord { conf, ok });
    }
    TraceLibrary::new(
        TraceHeader { num_stages, num_classes, stage_wcet: stage_wcet.to_vec() },
        records,
    )
}

/// How clients issue requests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ArrivalMode {
    /// Each of K clients keeps exactly one request outstanding.
    ClosedLoop,
    /// Open-loop Poisson arrivals at `rate` requests/second.
    Poisson { rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    /// Concurrent clients (closed loop) — K.
    pub clients: usize,
    /// Relative deadline bounds: rel ~ Uniform[d_min, d_max].
    pub d_min: f64,
    pub d_max: f64,
    /// Total requests to issue across all clients.
    pub count: u64,
    /// Mandatory depth stamped on every job.
    pub mandatory: usize,
    pub arrivals: ArrivalMode,
    pub seed: u64,
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        if self.clients == 0 {
            return Err(Error::Validation("clients must be >= 1".into()));
        }
        if !(self.d_min > 0.0) || self.d_min > self.d_max {
            return Err(Error::Validation(format!(
                "deadline bounds must satisfy 0 < d_min <= d_max, got [{}, {}]",
                self.d_min, self.d_max
            )));
        }
        if self.mandatory == 0 {
            return Err(Error::Validation("mandatory depth must be >= 1".into()));
        }
        if let ArrivalMode::Poisson { rate } = self.arrivals {
            if !(rate > 0.0) {
                return Err(Error::Validation("poisson rate must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Deterministic request source. Records are drawn uniformly without
/// replacement (reshuffling once the pool is exhausted); deadlines are drawn
/// per request. All randomness comes from `WorkloadSpec::seed`.
pub struct Workload {
    spec: WorkloadSpec,
    library: TraceLibrary,
    rng: ChaCha8Rng,
    pool: Vec<usize>,
    pool_pos: usize,
    issued: u64,
    next_id: u64,
}

impl Workload {
    pub fn new(spec: WorkloadSpec, library: TraceLibrary) -> Result<Self> {
        spec.validate()?;
        if library.records.is_empty() {
            return Err(Error::Validation("trace library has no records".into()));
        }
        let mut w = Self {
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            pool: (0..library.records.len()).collect(),
            pool_pos: 0,
            issued: 0,
            next_id: 0,
            spec,
            library,
        };
        w.pool.shuffle(&mut w.rng);
        Ok(w)
    }

    pub fn spec(&self) -> &WorkloadSpec {
        &self.spec
    }

    pub fn num_classes(&self) -> usize {
        self.library.header.num_classes
    }

    fn draw_job(&mut self, arrival: f64) -> Job {
        if self.pool_pos == self.pool.len() {
            self.pool.shuffle(&mut self.rng);
            self.pool_pos = 0;
        }
        let rec_idx = self.pool[self.pool_pos];
        self.pool_pos += 1;
        let rel = self.rng.random_range(self.spec.d_min..=self.spec.d_max);
        let rec = &self.library.records[rec_idx];
        let stages: Vec<StageProfile> = self
            .library
            .header
            .stage_wcet
            .iter()
            .zip(rec.conf.iter().zip(&rec.ok))
            .map(|(&w, (&c, &ok))| StageProfile { wcet: w, confidence: c, correct: ok })
            .collect();
        let id = JobId(self.next_id);
        self.next_id += 1;
        self.issued += 1;
        let mandatory = self.spec.mandatory.min(stages.len());
        Job { id, arrival, rel_deadline: rel, stages, mandatory }
    }

    /// Requests outstanding at t=0: one per client (closed loop) or the
    /// whole precomputed arrival schedule (Poisson).
    pub fn initial(&mut self) -> Vec<Job> {
        match self.spec.arrivals {
            ArrivalMode::ClosedLoop => {
                let k = (self.spec.clients as u64).min(self.spec.count);
                (0..k).map(|_| self.draw_job(0.0)).collect()
            }
            ArrivalMode::Poisson { rate } => {
                let mut t = 0.0;
                let mut jobs = Vec::new();
                while self.issued < self.spec.count {
                    // Inverse-CDF exponential gap.
                    let u: f64 = self.rng.random_range(f64::MIN_POSITIVE..1.0);
                    t += -u.ln() / rate;
                    jobs.push(self.draw_job(t));
                }
                jobs
            }
        }
    }

    /// Closed loop: the next request for a client whose previous one just
    /// returned. None once the request budget is exhausted (or in open loop).
    pub fn on_return(&mut self, now: f64) -> Option<Job> {
        match self.spec.arrivals {
            ArrivalMode::ClosedLoop if self.issued < self.spec.count => {
                Some(self.draw_job(now))
            }
            _ => None,
        }
    }
}

/// WCET estimation method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WcetMethod {
    /// Upper bound of the two-sided 99% normal CI on the mean.
    NormalCi99,
    /// Empirical quantile (nearest rank), e.g. 0.99.
    Percentile(f64),
}

const Z_995: f64 = 2.576;

/// Per-stage WCET from timing samples: mean + z·sd/√n, or an empirical
/// percentile.
pub fn profile_wcet(samples: &[Vec<f64>], method: WcetMethod) -> Result<Vec<f64>> {
    samples
        .iter()
        .enumerate()
        .map(|(i, xs)| {
            if xs.len() < 2 {
                return Err(Error::Validation(format!(
                    "stage {i}: need at least 2 samples, got {}",
                    xs.len()
                )));
            }
            match method {
                WcetMethod::NormalCi99 => {
                    let n = xs.len() as f64;
                    let mean = xs.iter().sum::<f64>() / n;
                    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
                    Ok(mean + Z_995 * (var.sqrt() / n.sqrt()))
                }
                WcetMethod::Percentile(p) => {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::Validation(format!("percentile {p} outside [0,1]")));
                    }
                    let mut sorted = xs.clone();
                    sorted.sort_by(f64::total_cmp);
                    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
                    Ok(sorted[rank - 1])
                }
            }
        })
        .collect()
}
