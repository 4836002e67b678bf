//! Firing-field measures and the Fisher functional
//! `F(L) = integral_{B_R} |grad theta|^2 / (4 theta) d mu(y)`.
//!
//! Measures are not normalized to probability by default; a `normalize` flag
//! divides by `mu(B_R)` for convenience. Quadrature node evaluations are
//! independent and run data-parallel with a deterministic reduction order.

use crate::lattice::Lattice;
use crate::quadrature::{ball_rule, disk_rule, QuadSpec, Quadrature};
use crate::theta::{truncation_radius, ThetaEvaluator, ThetaParams};
use crate::{Error, Result};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Radial density of the measure on `B_R`.
#[derive(Clone)]
pub enum Density {
    /// Lebesgue measure on the ball.
    Uniform,
    /// `d mu = rho(|y|^2) dy` for a radial kernel `rho`.
    Radial(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::Uniform => write!(f, "Uniform"),
            Density::Radial(_) => write!(f, "Radial(..)"),
        }
    }
}

/// The measure `mu` on its support `Sigma = B_R`.
#[derive(Debug, Clone)]
pub struct FiringField<const D: usize> {
    pub radius: f64,
    pub density: Density,
    pub normalize: bool,
}

impl<const D: usize> FiringField<D> {
    pub fn uniform(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::domain("firing-field radius must be positive"));
        }
        Ok(FiringField {
            radius,
            density: Density::Uniform,
            normalize: false,
        })
    }

    pub fn radial(radius: f64, rho: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Result<Self> {
        let mut f = Self::uniform(radius)?;
        f.density = Density::Radial(rho);
        Ok(f)
    }

    /// Sample completely monotone kernel `rho(r^2) = exp(-r^2)` on `B_R`.
    pub fn gaussian_kernel(radius: f64) -> Result<Self> {
        Self::radial(radius, Arc::new(|r2: f64| (-r2).exp()))
    }

    pub fn with_normalize(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }
}

impl FiringField<2> {
    pub fn quadrature(&self, spec: &QuadSpec) -> Result<Quadrature<2>> {
        let mut q = disk_rule(self.radius, spec)?;
        if let Density::Radial(rho) = &self.density {
            q.apply_radial_density(rho.as_ref())?;
        }
        Ok(q)
    }
}

impl FiringField<3> {
    pub fn quadrature(&self, spec: &QuadSpec) -> Result<Quadrature<3>> {
        let mut q = ball_rule(self.radius, spec)?;
        if let Density::Radial(rho) = &self.density {
            q.apply_radial_density(rho.as_ref())?;
        }
        Ok(q)
    }
}

/// The rescaled field `mu_lambda`, the image of the base measure under
/// `y -> lambda y` (support `lambda B_R`, mass preserved).
#[derive(Debug, Clone)]
pub struct ScaledField<const D: usize> {
    pub base: FiringField<D>,
    pub lambda: f64,
}

impl<const D: usize> ScaledField<D> {
    pub fn new(base: FiringField<D>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::domain("lambda must be positive"));
        }
        Ok(ScaledField { base, lambda })
    }
}

fn chunked_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    // Fixed chunk boundaries and an in-order reduction keep the result
    // independent of the thread schedule.
    const CHUNK: usize = 512;
    let partials: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(n);
            let mut s = 0.0;
            for i in lo..hi {
                s += f(i);
            }
            s
        })
        .collect();
    partials.iter().sum()
}

/// Quadrature approximation of `F(L) = integral Q(y) d mu(y)`; nonnegative.
pub fn fisher_functional<const D: usize>(
    lattice: &Lattice<D>,
    field: &FiringField<D>,
    p: &ThetaParams,
    quad: &Quadrature<D>,
) -> Result<f64> {
    if quad.is_empty() {
        return Err(Error::domain("empty quadrature rule"));
    }
    let eval = ThetaEvaluator::new(lattice, p)?;
    let total = chunked_sum(quad.len(), |i| quad.weights[i] * eval.q(&quad.nodes[i]));
    if !total.is_finite() {
        return Err(Error::Evaluation("non-finite Fisher functional".into()));
    }
    Ok(if field.normalize {
        total / quad.total_weight()
    } else {
        total
    })
}

/// Left side of the scaling identity, evaluated directly on the scaled
/// lattice `lambda L` and the scaled field: equals
/// `lambda^{-2} F^{lambda^2 alpha}(L)` for the base field.
pub fn fisher_scaled<const D: usize>(
    lattice: &Lattice<D>,
    field: &ScaledField<D>,
    p: &ThetaParams,
    quad: &Quadrature<D>,
) -> Result<f64> {
    let scaled_lattice = lattice.scale(field.lambda)?;
    let scaled_quad = quad.scaled(field.lambda);
    fisher_functional(&scaled_lattice, &field.base, p, &scaled_quad)
}

/// Quadrature value of the averaged (soft) theta function
/// `integral theta_{L+y}(alpha) d mu(y)`.
pub fn avg_theta<const D: usize>(
    lattice: &Lattice<D>,
    field: &FiringField<D>,
    p: &ThetaParams,
    quad: &Quadrature<D>,
) -> Result<f64> {
    if quad.is_empty() {
        return Err(Error::domain("empty quadrature rule"));
    }
    let eval = ThetaEvaluator::new(lattice, p)?;
    let total = chunked_sum(quad.len(), |i| {
        quad.weights[i] * eval.eval(&quad.nodes[i]).value
    });
    Ok(if field.normalize {
        total / quad.total_weight()
    } else {
        total
    })
}

/// Dual-space form of [`avg_theta`]:
/// `alpha^{-d/2} sum_{q in L*} exp(-pi |q|^2 / alpha) mu_hat(q)` with the
/// Fourier transform `mu_hat(q) = integral cos(2 pi q.y) d mu(y)` computed by
/// the same quadrature. Independent oracle for the direct average.
pub fn avg_theta_dual<const D: usize>(
    lattice: &Lattice<D>,
    field: &FiringField<D>,
    p: &ThetaParams,
    quad: &Quadrature<D>,
) -> Result<f64> {
    let dual = lattice.dual();
    let pd = p.with_alpha(1.0 / p.alpha)?;
    let rcut = truncation_radius(&dual, &pd)?;
    let mut sum = 0.0;
    for q in dual.points_within(rcut) {
        let mu_hat = chunked_sum(quad.len(), |i| {
            quad.weights[i] * (2.0 * PI * q.dot(&quad.nodes[i])).cos()
        });
        sum += (-PI * q.norm_squared() / p.alpha).exp() * mu_hat;
    }
    sum *= p.alpha.powf(-(D as f64) / 2.0) / lattice.covolume();
    Ok(if field.normalize {
        sum / quad.total_weight()
    } else {
        sum
    })
}

/// `F / (4 pi^2 alpha^2 integral theta d mu)`, the ratio between the Fisher
/// functional and the averaged theta function scaled as in the alternative
/// formula. Exactly equal to the theta-weighted mean of `|E[w]|^2 / 4` over
/// the field, so it tends to zero (not one) as alpha shrinks: the discrete
/// Gaussian mean dies off like `exp(-pi |q_1|^2 / alpha) / alpha`.
pub fn small_alpha_ratio<const D: usize>(
    lattice: &Lattice<D>,
    field: &FiringField<D>,
    p: &ThetaParams,
    quad: &Quadrature<D>,
) -> Result<f64> {
    let f = fisher_functional(lattice, field, p, quad)?;
    let t = avg_theta(lattice, field, p, quad)?;
    Ok(f / (4.0 * PI * PI * p.alpha * p.alpha * t))
}
