//! Poisson spiking simulation for a grid module: empirical Fisher traces via
//! the score, phase aggregation, and a maximum-likelihood decoder against the
//! Cramér–Rao bound.
//!
//! A module is an ensemble of `N` shifted grid cells with tuning curves
//! `Omega_j(x) = theta_{L + y_j + x}(alpha)` and `n` independent Poisson
//! neurons per phase. The Fisher information matrix of the module is
//! `J(x) = n sum_j grad Omega_j grad Omega_j^T / Omega_j`, with trace
//! `n sum_j |grad Omega_j|^2 / Omega_j = 4 n sum_j Q(y_j + x)`.
//!
//! Trials are independent and draw from counter-based substreams keyed by
//! trial index, so parallel execution is deterministic.

use crate::lattice::Lattice;
use crate::rng::CounterRng;
use crate::theta::{ThetaEvaluator, ThetaParams};
use crate::{Error, Result};
use nalgebra::{SMatrix, SVector};
use rayon::prelude::*;

/// Substream index reserved for drawing the module's phases; trials use
/// their trial index, so they never collide with it.
const PHASE_STREAM: u64 = u64::MAX;

/// A grid module: lattice, spatial phases, neurons per phase, and the seed
/// that fixes every sample stream.
#[derive(Debug, Clone)]
pub struct ModuleConfig<const D: usize> {
    pub lattice: Lattice<D>,
    pub phases: Vec<SVector<f64, D>>,
    pub neurons_per_phase: usize,
    pub theta: ThetaParams,
    pub seed: u64,
}

impl<const D: usize> ModuleConfig<D> {
    pub fn new(
        lattice: Lattice<D>,
        phases: Vec<SVector<f64, D>>,
        neurons_per_phase: usize,
        theta: ThetaParams,
        seed: u64,
    ) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::domain("module needs at least one phase"));
        }
        if neurons_per_phase == 0 {
            return Err(Error::domain("module needs at least one neuron per phase"));
        }
        Ok(ModuleConfig {
            lattice,
            phases,
            neurons_per_phase,
            theta,
            seed,
        })
    }

    /// Phases drawn i.i.d. uniformly from the ball `B_R`, from the reserved
    /// phase substream of `seed`.
    pub fn with_uniform_phases(
        lattice: Lattice<D>,
        n_phases: usize,
        field_radius: f64,
        neurons_per_phase: usize,
        theta: ThetaParams,
        seed: u64,
    ) -> Result<Self> {
        if !(field_radius > 0.0) {
            return Err(Error::domain("field radius must be positive"));
        }
        let mut rng = CounterRng::substream(seed, PHASE_STREAM);
        let phases = (0..n_phases)
            .map(|_| rng.uniform_in_ball::<D>(field_radius))
            .collect();
        Self::new(lattice, phases, neurons_per_phase, theta, seed)
    }

    pub fn n_phases(&self) -> usize {
        self.phases.len()
    }
}

/// Spike counts of one trial: `counts[j * n + i]` is neuron `i` of phase `j`.
#[derive(Debug, Clone)]
pub struct SpikeSample<const D: usize> {
    pub counts: Vec<u32>,
    pub position: SVector<f64, D>,
}

/// Mean spike count of phase `j` at position `x`.
pub fn tuning_curve<const D: usize>(
    cfg: &ModuleConfig<D>,
    j: usize,
    x: &SVector<f64, D>,
) -> Result<f64> {
    let y = cfg.phases[j] + x;
    Ok(crate::theta::theta_translated(&cfg.lattice, &y, &cfg.theta)?.value)
}

/// Per-phase tuning values and gradients at `x`, computed once.
fn module_rates<const D: usize>(
    cfg: &ModuleConfig<D>,
    x: &SVector<f64, D>,
) -> Result<(Vec<f64>, Vec<SVector<f64, D>>)> {
    let eval = ThetaEvaluator::new(&cfg.lattice, &cfg.theta)?;
    let mut rates = Vec::with_capacity(cfg.n_phases());
    let mut grads = Vec::with_capacity(cfg.n_phases());
    for y in &cfg.phases {
        let t = eval.eval(&(y + x));
        rates.push(t.value);
        grads.push(t.gradient);
    }
    Ok((rates, grads))
}

/// Independent Poisson spike counts for `trials` trials at position `x`;
/// trial `t` draws from substream `t`, so a fixed seed yields byte-identical
/// count matrices regardless of scheduling.
pub fn sample_spikes<'a, const D: usize>(
    cfg: &'a ModuleConfig<D>,
    x: &SVector<f64, D>,
    trials: usize,
) -> Result<impl Iterator<Item = SpikeSample<D>> + 'a> {
    if trials == 0 {
        return Err(Error::domain("trials must be >= 1"));
    }
    let (rates, _) = module_rates(cfg, x)?;
    let n = cfg.neurons_per_phase;
    let x = *x;
    Ok((0..trials).map(move |t| {
        let mut rng = CounterRng::substream(cfg.seed, t as u64);
        let mut counts = Vec::with_capacity(rates.len() * n);
        for &rate in &rates {
            for _ in 0..n {
                counts.push(rng.poisson(rate) as u32);
            }
        }
        SpikeSample {
            counts,
            position: x,
        }
    }))
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct TraceEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub trials: usize,
}

/// Monte-Carlo estimate of `Tr J(x)` via the score: per trial,
/// `score = sum_j (K_j / Omega_j - n) grad Omega_j` with `K_j` the summed
/// counts of phase `j`; the estimate is the mean of `|score|^2`.
pub fn empirical_fisher_trace<const D: usize>(
    cfg: &ModuleConfig<D>,
    x: &SVector<f64, D>,
    trials: usize,
) -> Result<TraceEstimate> {
    if trials < 1000 {
        return Err(Error::domain("trace estimation needs at least 1e3 trials"));
    }
    let (rates, grads) = module_rates(cfg, x)?;
    let n = cfg.neurons_per_phase;
    let sq: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = CounterRng::substream(cfg.seed, t as u64);
            let mut score = SVector::<f64, D>::zeros();
            for (rate, grad) in rates.iter().zip(&grads) {
                let mut k_sum = 0u64;
                for _ in 0..n {
                    k_sum += rng.poisson(*rate);
                }
                score += grad * (k_sum as f64 / rate - n as f64);
            }
            score.norm_squared()
        })
        .collect();
    let mean = sq.iter().sum::<f64>() / trials as f64;
    let var = sq.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (trials as f64 - 1.0);
    Ok(TraceEstimate {
        mean,
        standard_error: (var / trials as f64).sqrt(),
        trials,
    })
}

/// Empirical mean of the score vector itself (zero for regular models);
/// returned with the standard error of its norm.
pub fn empirical_score_mean<const D: usize>(
    cfg: &ModuleConfig<D>,
    x: &SVector<f64, D>,
    trials: usize,
) -> Result<(SVector<f64, D>, f64)> {
    let (rates, grads) = module_rates(cfg, x)?;
    let n = cfg.neurons_per_phase;
    let scores: Vec<SVector<f64, D>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = CounterRng::substream(cfg.seed, t as u64);
            let mut score = SVector::<f64, D>::zeros();
            for (rate, grad) in rates.iter().zip(&grads) {
                let mut k_sum = 0u64;
                for _ in 0..n {
                    k_sum += rng.poisson(*rate);
                }
                score += grad * (k_sum as f64 / rate - n as f64);
            }
            score
        })
        .collect();
    let mean = scores.iter().sum::<SVector<f64, D>>() / trials as f64;
    // Per-component variance bound for the SE of the mean norm.
    let var = scores
        .iter()
        .map(|s| (s - mean).norm_squared())
        .sum::<f64>()
        / (trials as f64 - 1.0);
    Ok((mean, (var / trials as f64).sqrt()))
}

/// Analytic `Tr J(x) = n sum_j |grad Omega_j|^2 / Omega_j`; exactly linear
/// in `n`.
pub fn analytic_fisher_trace<const D: usize>(
    cfg: &ModuleConfig<D>,
    x: &SVector<f64, D>,
) -> Result<f64> {
    let (rates, grads) = module_rates(cfg, x)?;
    Ok(cfg.neurons_per_phase as f64
        * rates
            .iter()
            .zip(&grads)
            .map(|(r, g)| g.norm_squared() / r)
            .sum::<f64>())
}

/// Analytic Fisher matrix `J(x) = n sum_j grad Omega_j grad Omega_j^T / Omega_j`.
pub fn fisher_matrix<const D: usize>(
    cfg: &ModuleConfig<D>,
    x: &SVector<f64, D>,
) -> Result<SMatrix<f64, D, D>> {
    let (rates, grads) = module_rates(cfg, x)?;
    let mut j = SMatrix::<f64, D, D>::zeros();
    for (r, g) in rates.iter().zip(&grads) {
        j += g * g.transpose() / *r;
    }
    Ok(j * cfg.neurons_per_phase as f64)
}

/// Mean per-phase Fisher density `(1/N) sum_j Q(y_j)`, i.e. `Tr J(0)` per
/// neuron and phase in the `Q = |grad theta|^2 / (4 theta)` normalization.
/// As the number of i.i.d. phases grows this converges to the normalized
/// functional `F / mu(B_R)`.
pub fn aggregate_phases<const D: usize>(cfg: &ModuleConfig<D>) -> Result<f64> {
    let eval = ThetaEvaluator::new(&cfg.lattice, &cfg.theta)?;
    let sum: f64 = cfg.phases.iter().map(|y| eval.q(y)).sum();
    Ok(sum / cfg.n_phases() as f64)
}

/// Decoder output: empirical mean squared error and the Cramér–Rao value
/// `Tr(J(x)^{-1})`.
#[derive(Debug, Clone, Copy)]
pub struct DecodeReport {
    pub mse: f64,
    pub crlb: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct DecodeOptions {
    /// Half-width of the search window around the true position.
    pub window_half_width: f64,
    /// Grid nodes per axis inside the window.
    pub nodes_per_axis: usize,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            window_half_width: 0.25,
            nodes_per_axis: 101,
        }
    }
}

/// Maximum-likelihood position decoding on a discretized window around the
/// true position, with one quadratic-interpolation refinement per axis.
/// Planar (2D) modules only; the grid decoder is quadratic in the window
/// resolution.
pub fn ml_decode(
    cfg: &ModuleConfig<2>,
    true_x: &SVector<f64, 2>,
    trials: usize,
    opts: &DecodeOptions,
) -> Result<DecodeReport> {
    if trials == 0 {
        return Err(Error::domain("trials must be >= 1"));
    }
    if opts.nodes_per_axis < 3 || !(opts.window_half_width > 0.0) {
        return Err(Error::domain("decode window needs >= 3 nodes per axis"));
    }
    let j = fisher_matrix(cfg, true_x)?;
    let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
    let trace = j[(0, 0)] + j[(1, 1)];
    // Unidentifiable either way: no information at all (trace at the
    // roundoff floor) or rank deficiency along some direction.
    if !(trace > 1e-6) || !(det > 1e-12 * trace * trace) {
        return Err(Error::SingularFisher);
    }
    let crlb = trace / det;

    let (rates, _) = module_rates(cfg, true_x)?;
    let n = cfg.neurons_per_phase;
    let ng = opts.nodes_per_axis;
    let step = 2.0 * opts.window_half_width / (ng - 1) as f64;
    let grid_coord =
        |k: usize, axis: usize| true_x[axis] - opts.window_half_width + step * k as f64;

    // Precompute log Omega_j and sum_j Omega_j on the candidate grid.
    let eval = ThetaEvaluator::new(&cfg.lattice, &cfg.theta)?;
    let nph = cfg.n_phases();
    let tables: Vec<(Vec<f64>, f64)> = (0..ng * ng)
        .into_par_iter()
        .map(|c| {
            let g = SVector::<f64, 2>::new(grid_coord(c / ng, 0), grid_coord(c % ng, 1));
            let mut ln_rates = Vec::with_capacity(nph);
            let mut total = 0.0;
            for y in &cfg.phases {
                let v = eval.eval(&(y + g)).value;
                ln_rates.push(v.ln());
                total += v;
            }
            (ln_rates, total)
        })
        .collect();

    let sq_errors: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = CounterRng::substream(cfg.seed, t as u64);
            let counts: Vec<f64> = rates
                .iter()
                .map(|&rate| {
                    let mut k_sum = 0u64;
                    for _ in 0..n {
                        k_sum += rng.poisson(rate);
                    }
                    k_sum as f64
                })
                .collect();
            // Log-likelihood over the grid (k! terms drop out of the argmax).
            let mut best = f64::NEG_INFINITY;
            let mut best_c = 0usize;
            let mut loglik = vec![0.0; ng * ng];
            for (c, (ln_rates, total)) in tables.iter().enumerate() {
                let mut ll = -(n as f64) * total;
                for (k, lr) in counts.iter().zip(ln_rates) {
                    ll += k * lr;
                }
                loglik[c] = ll;
                if ll > best {
                    best = ll;
                    best_c = c;
                }
            }
            let (ci, cj) = (best_c / ng, best_c % ng);
            let mut xhat = SVector::<f64, 2>::new(grid_coord(ci, 0), grid_coord(cj, 1));
            // Quadratic vertex refinement along each axis (interior nodes).
            if ci > 0 && ci + 1 < ng {
                let (lm, l0, lp) = (
                    loglik[(ci - 1) * ng + cj],
                    loglik[ci * ng + cj],
                    loglik[(ci + 1) * ng + cj],
                );
                xhat[0] += quad_vertex(lm, l0, lp) * step;
            }
            if cj > 0 && cj + 1 < ng {
                let (lm, l0, lp) = (
                    loglik[ci * ng + cj - 1],
                    loglik[ci * ng + cj],
                    loglik[ci * ng + cj + 1],
                );
                xhat[1] += quad_vertex(lm, l0, lp) * step;
            }
            (xhat - true_x).norm_squared()
        })
        .collect();
    let mse = sq_errors.iter().sum::<f64>() / trials as f64;
    Ok(DecodeReport { mse, crlb, trials })
}

/// Offset (in grid-step units, clamped to half a cell) of the parabola
/// vertex through equally spaced samples `(lm, l0, lp)`.
fn quad_vertex(lm: f64, l0: f64, lp: f64) -> f64 {
    let denom = lm - 2.0 * l0 + lp;
    if denom >= 0.0 {
        return 0.0;
    }
    (0.5 * (lm - lp) / denom).clamp(-0.5, 0.5)
}
