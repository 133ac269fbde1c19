//! Warmup adaptation: dual averaging of the step size and a windowed
//! Welford estimate of the diagonal inverse mass matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{hamiltonian, leapfrog, MassMatrix, PhasePoint};
use crate::model::TargetModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualAveragingState {
    pub mu: f64,
    pub log_eps: f64,
    pub log_eps_bar: f64,
    pub h_bar: f64,
    pub t: u64,
    pub gamma: f64,
    pub t0: f64,
    pub kappa: f64,
    pub delta: f64,
}

impl DualAveragingState {
    /// Fresh state shrinking toward `log(10 * initial_step)`.
    pub fn new(initial_step: f64, delta: f64) -> Self {
        DualAveragingState {
            mu: (10.0 * initial_step).ln(),
            log_eps: initial_step.ln(),
            log_eps_bar: 0.0,
            h_bar: 0.0,
            t: 0,
            gamma: 0.05,
            t0: 10.0,
            kappa: 0.75,
            delta,
        }
    }

    pub fn step_size(&self) -> f64 {
        self.log_eps.exp()
    }

    /// Averaged step size, the value installed once adaptation ends.
    pub fn final_step_size(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

pub fn da_update(state: &DualAveragingState, accept_stat: f64) -> Result<DualAveragingState> {
    if !(0.0..=1.0).contains(&accept_stat) {
        return Err(Error::AcceptStatOutOfRange(accept_stat));
    }
    let mut s = *state;
    s.t += 1;
    let t = s.t as f64;
    let w = 1.0 / (t + s.t0);
    s.h_bar = (1.0 - w) * s.h_bar + w * (s.delta - accept_stat);
    s.log_eps = s.mu - t.sqrt() / s.gamma * s.h_bar;
    let eta = t.powf(-s.kappa);
    s.log_eps_bar = eta * s.log_eps + (1.0 - eta) * s.log_eps_bar;
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfordState {
    pub count: u64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl WelfordState {
    pub fn new(dim: usize) -> Self {
        WelfordState {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }
}

pub fn welford_update(state: &mut WelfordState, sample: &[f64]) {
    assert_eq!(sample.len(), state.mean.len(), "sample dimension mismatch");
    state.count += 1;
    let n = state.count as f64;
    for ((mean, m2), x) in state.mean.iter_mut().zip(state.m2.iter_mut()).zip(sample) {
        let delta = x - *mean;
        *mean += delta / n;
        *m2 += delta * (x - *mean);
    }
}

/// Unbiased sample variance per coordinate.
pub fn welford_variance(state: &WelfordState) -> Result<Vec<f64>> {
    if state.count < 2 {
        return Err(Error::InsufficientDraws(format!(
            "variance needs at least 2 samples, have {}",
            state.count
        )));
    }
    let denom = (state.count - 1) as f64;
    Ok(state.m2.iter().map(|m| m / denom).collect())
}

/// Variance shrunk toward `1e-3` with weight `5 / (n + 5)`, suitable for
/// installing as an inverse mass diagonal.
pub fn regularized_variance(state: &WelfordState) -> Result<Vec<f64>> {
    let n = state.count as f64;
    Ok(welford_variance(state)?
        .into_iter()
        .map(|v| (n / (n + 5.0)) * v + 1e-3 * (5.0 / (n + 5.0)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    /// Step size only.
    Initial,
    /// Step size plus variance accumulation; the mass matrix is updated at
    /// the end of the window.
    Window,
    /// Step size only, with the final mass matrix.
    Terminal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarmupPhase {
    pub kind: PhaseKind,
    pub length: usize,
}

const BASE_WINDOW: usize = 25;

/// Partition of `num_warmup` iterations into an initial buffer (15%),
/// doubling variance windows (75%) and a terminal buffer (10%).
///
/// Windows start at 25 iterations and double, each capped at 40% of the
/// windowed span (but never below 25). The last window is cut to the
/// remaining span; a remainder shorter than 25 is merged into the window
/// before it.
pub fn warmup_schedule(num_warmup: usize) -> Result<Vec<WarmupPhase>> {
    if num_warmup < 20 {
        return Err(Error::InvalidConfig(format!(
            "warmup schedule needs at least 20 iterations, got {num_warmup}"
        )));
    }
    let initial = num_warmup * 15 / 100;
    let terminal = num_warmup / 10;
    let span = num_warmup - initial - terminal;
    let cap = (span * 2 / 5).max(BASE_WINDOW);

    let mut windows: Vec<usize> = Vec::new();
    let mut remaining = span;
    let mut size = BASE_WINDOW;
    while remaining > 0 {
        let w = size.min(cap).min(remaining);
        if w < BASE_WINDOW && !windows.is_empty() {
            *windows.last_mut().unwrap() += w;
        } else {
            windows.push(w);
        }
        remaining -= w;
        size *= 2;
    }

    let mut phases = vec![WarmupPhase {
        kind: PhaseKind::Initial,
        length: initial,
    }];
    phases.extend(windows.into_iter().map(|length| WarmupPhase {
        kind: PhaseKind::Window,
        length,
    }));
    phases.push(WarmupPhase {
        kind: PhaseKind::Terminal,
        length: terminal,
    });
    Ok(phases)
}

/// Step size at which one leapfrog step from `z` has acceptance near 0.5:
/// start from `initial`, then double or halve until the acceptance crosses
/// 0.5.
pub fn find_reasonable_step_size<M: TargetModel + ?Sized>(
    z: &PhasePoint,
    mass: &MassMatrix,
    model: &M,
    initial: f64,
) -> f64 {
    let h0 = hamiltonian(z, mass);
    let log_accept = |eps: f64| {
        let next = leapfrog(z, eps, mass, model);
        let delta = h0 - hamiltonian(&next, mass);
        if delta.is_nan() {
            f64::NEG_INFINITY
        } else {
            delta
        }
    };
    let threshold = 0.5f64.ln();
    let mut eps = initial;
    let increase = log_accept(eps) > threshold;
    for _ in 0..100 {
        if increase {
            if log_accept(eps * 2.0) <= threshold {
                break;
            }
            eps *= 2.0;
        } else {
            eps *= 0.5;
            if log_accept(eps) > threshold {
                break;
            }
        }
    }
    eps
}

/// One recorded warmup iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptRecord {
    pub iteration: usize,
    pub step_size: f64,
    pub accept_stat: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdaptationTrace {
    pub iterations: Vec<AdaptRecord>,
    /// Inverse mass diagonal installed at the end of each variance window.
    pub mass_updates: Vec<Vec<f64>>,
}

impl AdaptationTrace {
    pub fn mean_accept(&self) -> f64 {
        if self.iterations.is_empty() {
            return f64::NAN;
        }
        self.iterations.iter().map(|r| r.accept_stat).sum::<f64>() / self.iterations.len() as f64
    }
}

/// Per-iteration adaptation driver over a warmup schedule.
#[derive(Debug, Clone)]
pub struct WarmupAdapter {
    phases: Vec<WarmupPhase>,
    phase: usize,
    within: usize,
    da: DualAveragingState,
    welford: WelfordState,
    delta: f64,
}

/// What the chain should do after an adaptation step.
#[derive(Debug, Clone, PartialEq)]
pub enum AdaptAction {
    Continue,
    /// Install this inverse mass and restart step-size search from the
    /// current point.
    NewMass(Vec<f64>),
}

impl WarmupAdapter {
    /// `num_warmup` below 20 adapts the step size only.
    pub fn new(num_warmup: usize, dim: usize, initial_step: f64, delta: f64) -> Self {
        let phases = warmup_schedule(num_warmup).unwrap_or_else(|_| {
            vec![WarmupPhase {
                kind: PhaseKind::Initial,
                length: num_warmup,
            }]
        });
        let mut adapter = WarmupAdapter {
            phases,
            phase: 0,
            within: 0,
            da: DualAveragingState::new(initial_step, delta),
            welford: WelfordState::new(dim),
            delta,
        };
        adapter.skip_empty_phases();
        adapter
    }

    fn skip_empty_phases(&mut self) {
        while self.phase < self.phases.len() && self.phases[self.phase].length == 0 {
            self.phase += 1;
        }
    }

    pub fn step_size(&self) -> f64 {
        self.da.step_size()
    }

    pub fn final_step_size(&self) -> f64 {
        self.da.final_step_size()
    }

    pub fn restart(&mut self, step_size: f64) {
        self.da = DualAveragingState::new(step_size, self.delta);
    }

    /// Feed one warmup draw and its accept statistic.
    pub fn observe(&mut self, position: &[f64], accept_stat: f64) -> Result<AdaptAction> {
        self.da = da_update(&self.da, accept_stat)?;
        let Some(current) = self.phases.get(self.phase).copied() else {
            return Ok(AdaptAction::Continue);
        };
        if current.kind == PhaseKind::Window {
            welford_update(&mut self.welford, position);
        }
        self.within += 1;
        if self.within < current.length {
            return Ok(AdaptAction::Continue);
        }
        self.within = 0;
        self.phase += 1;
        self.skip_empty_phases();
        if current.kind == PhaseKind::Window && self.welford.count >= 2 {
            let var = regularized_variance(&self.welford)?;
            // A trailing remainder window, shorter than the one before it,
            // keeps accumulating on top of that window's draws.
            let next_is_remainder = matches!(
                self.phases.get(self.phase),
                Some(next) if next.kind == PhaseKind::Window && next.length < current.length
            );
            if !next_is_remainder {
                self.welford = WelfordState::new(var.len());
            }
            return Ok(AdaptAction::NewMass(var));
        }
        Ok(AdaptAction::Continue)
    }
}
