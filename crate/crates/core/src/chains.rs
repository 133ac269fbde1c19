//! Multi-chain runs with deterministic per-chain randomness.
//!
//! Each chain owns a key derived from the run seed by repeated splitting,
//! and transition `t` of a chain uses `chain_key.fold_in(t)`. Nothing a chain
//! computes depends on thread scheduling, so sequential and parallel runs
//! produce identical results.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adapt::{find_reasonable_step_size, AdaptAction, AdaptRecord, AdaptationTrace, WarmupAdapter};
use crate::error::{Error, Result};
use crate::integrator::MassMatrix;
use crate::model::TargetModel;
use crate::rng::RngKey;
use crate::sampler::{initial_point, nuts_transition, refresh_momentum, SamplerConfig, TransitionStats};

/// Environment variable capping the worker threads of a parallel run.
pub const THREADS_ENV: &str = "TURNSTILE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainMode {
    Sequential,
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub num_chains: usize,
    pub num_warmup: usize,
    pub num_samples: usize,
    pub mode: ChainMode,
    pub seed: u64,
    /// Starting sampler settings; warmup adapts the step size and mass.
    pub sampler: SamplerConfig,
    /// Target mean accept statistic for step-size adaptation.
    pub target_accept: f64,
    /// Half-width of the uniform box initial positions are drawn from.
    pub init_radius: f64,
}

impl RunConfig {
    pub fn new(dim: usize) -> Self {
        RunConfig {
            num_chains: 4,
            num_warmup: 1000,
            num_samples: 1000,
            mode: ChainMode::Sequential,
            seed: 0,
            sampler: SamplerConfig::new(dim),
            target_accept: 0.8,
            init_radius: 2.0,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.num_chains == 0 {
            return Err(Error::InvalidConfig("need at least one chain".into()));
        }
        if self.num_samples == 0 {
            return Err(Error::InvalidConfig("need at least one sample".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidConfig("target accept must be in (0, 1)".into()));
        }
        self.sampler.validate(dim)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainResult {
    pub chain: usize,
    /// `num_samples` rows of length `dim`.
    pub samples: Vec<Vec<f64>>,
    pub stats: Vec<TransitionStats>,
    pub adaptation: AdaptationTrace,
    pub step_size: f64,
    pub inv_mass: Vec<f64>,
    pub total_leapfrogs: u64,
    /// Leapfrog calls made during the sampling phase only.
    pub sampling_leapfrogs: u64,
    pub wall_nanos: u64,
    pub sampling_nanos: u64,
}

impl ChainResult {
    pub fn divergences(&self) -> usize {
        self.stats.iter().filter(|s| s.diverged).count()
    }

    pub fn mean_accept(&self) -> f64 {
        self.stats.iter().map(|s| s.accept_stat).sum::<f64>() / self.stats.len() as f64
    }
}

/// One key per chain, derived by splitting the seed key.
pub fn chain_keys(seed: u64, num_chains: usize) -> Vec<RngKey> {
    let mut rest = RngKey::from_seed(seed);
    (0..num_chains)
        .map(|_| {
            let (key, next) = rest.split();
            rest = next;
            key
        })
        .collect()
}

pub fn run<M: TargetModel + ?Sized>(config: &RunConfig, model: &M) -> Result<Vec<ChainResult>> {
    config.validate(model.dim())?;
    let keys = chain_keys(config.seed, config.num_chains);
    match config.mode {
        ChainMode::Sequential => keys
            .iter()
            .enumerate()
            .map(|(i, k)| run_chain(i, config, model, k))
            .collect(),
        ChainMode::Parallel => {
            let workers = thread_cap().unwrap_or(keys.len()).clamp(1, keys.len());
            let mut results: Vec<Option<Result<ChainResult>>> = (0..keys.len()).map(|_| None).collect();
            std::thread::scope(|scope| {
                let handles: Vec<_> = (0..workers)
                    .map(|w| {
                        let keys = &keys;
                        scope.spawn(move || {
                            (w..keys.len())
                                .step_by(workers)
                                .map(|i| (i, run_chain(i, config, model, &keys[i])))
                                .collect::<Vec<_>>()
                        })
                    })
                    .collect();
                for h in handles {
                    for (i, r) in h.join().expect("chain thread panicked") {
                        results[i] = Some(r);
                    }
                }
            });
            results.into_iter().map(|r| r.expect("every chain ran")).collect()
        }
    }
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok()
}

/// Warmup followed by sampling for a single chain.
pub fn run_chain<M: TargetModel + ?Sized>(
    chain: usize,
    config: &RunConfig,
    model: &M,
    key: &RngKey,
) -> Result<ChainResult> {
    let started = Instant::now();
    let dim = model.dim();
    let (init_key, transition_key) = key.split();
    let mut rng = init_key.stream();
    let start: Vec<f64> = (0..dim)
        .map(|_| rng.random_range(-config.init_radius..=config.init_radius))
        .collect();
    let mut z = initial_point(model, start);
    let mut sampler = config.sampler.clone();
    let mut trace = AdaptationTrace::default();
    let mut total_leapfrogs = 0u64;

    if config.num_warmup > 0 {
        // Step-size searches run from the current point with a fresh
        // momentum, one key per search.
        let mut searches = 0u64;
        let mut search = |z: &crate::PhasePoint, mass: &MassMatrix, from: f64| {
            searches += 1;
            let probe = refresh_momentum(z, mass, &init_key.fold_in(searches));
            find_reasonable_step_size(&probe, mass, model, from)
        };
        sampler.step_size = search(&z, &sampler.mass, 1.0);
        let mut adapter = WarmupAdapter::new(config.num_warmup, dim, sampler.step_size, config.target_accept);
        for t in 0..config.num_warmup {
            sampler.step_size = adapter.step_size();
            let (next, stats) = nuts_transition(&z, &sampler, model, &transition_key.fold_in(t as u64));
            total_leapfrogs += stats.leapfrog_calls;
            z = next;
            trace.iterations.push(AdaptRecord {
                iteration: t,
                step_size: sampler.step_size,
                accept_stat: stats.accept_stat,
            });
            if let AdaptAction::NewMass(inv) = adapter.observe(&z.position, stats.accept_stat)? {
                sampler.mass = MassMatrix::from_inv_diag(inv.clone())?;
                trace.mass_updates.push(inv);
                let eps = search(&z, &sampler.mass, adapter.step_size());
                adapter.restart(eps);
            }
        }
        sampler.step_size = adapter.final_step_size();
    }

    let sampling_started = Instant::now();
    let mut samples = Vec::with_capacity(config.num_samples);
    let mut stats = Vec::with_capacity(config.num_samples);
    let mut sampling_leapfrogs = 0u64;
    for s in 0..config.num_samples {
        let t = (config.num_warmup + s) as u64;
        let (next, st) = nuts_transition(&z, &sampler, model, &transition_key.fold_in(t));
        sampling_leapfrogs += st.leapfrog_calls;
        z = next;
        samples.push(z.position.clone());
        stats.push(st);
    }
    total_leapfrogs += sampling_leapfrogs;

    Ok(ChainResult {
        chain,
        samples,
        stats,
        adaptation: trace,
        step_size: sampler.step_size,
        inv_mass: sampler.mass.inv_diag().to_vec(),
        total_leapfrogs,
        sampling_leapfrogs,
        wall_nanos: started.elapsed().as_nanos() as u64,
        sampling_nanos: sampling_started.elapsed().as_nanos() as u64,
    })
}
