//! Gauss–Legendre product rules on the disk and ball.
//!
//! Disk: Gauss–Legendre in `r` (weighted by `r`) times a uniform angular grid
//! (trapezoidal rule, spectrally accurate for periodic integrands). Ball:
//! Gauss–Legendre in `r` (weighted by `r^2`) and in `cos(polar)` times a
//! uniform azimuth grid. Weights are Lebesgue weights of the uniform measure
//! on `B_R`; radial densities multiply in at construction.

use crate::{Error, Result};
use nalgebra::SVector;
use std::f64::consts::PI;

/// Nodes and weights of the roots of the Legendre polynomial `P_n` on
/// `[-1, 1]`, by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess.
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-15 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                x -= p / d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Node counts for the product rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSpec {
    /// Radial Gauss–Legendre nodes (default 64).
    pub radial: usize,
    /// Angular nodes in 2D / azimuthal nodes in 3D.
    pub angular: usize,
    /// Polar Gauss–Legendre nodes in 3D.
    pub polar: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec {
            radial: 64,
            angular: 128,
            polar: 32,
        }
    }
}

impl QuadSpec {
    /// Default 3D rule: Gauss–Legendre(polar) x uniform(azimuth) = (32, 64).
    pub fn default_3d() -> Self {
        QuadSpec {
            radial: 64,
            angular: 64,
            polar: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radial == 0 || self.angular == 0 || self.polar == 0 {
            return Err(Error::domain("quadrature node counts must be positive"));
        }
        Ok(())
    }
}

/// A concrete rule: nodes in `R^D` with positive weights.
#[derive(Debug, Clone)]
pub struct Quadrature<const D: usize> {
    pub nodes: Vec<SVector<f64, D>>,
    pub weights: Vec<f64>,
}

impl<const D: usize> Quadrature<D> {
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest node norm; theta truncation radii are sized against it.
    pub fn max_node_norm(&self) -> f64 {
        self.nodes.iter().map(|y| y.norm()).fold(0.0, f64::max)
    }

    /// Multiplies each weight by `density(|y|^2)`.
    pub fn apply_radial_density(&mut self, density: &dyn Fn(f64) -> f64) -> Result<()> {
        for (w, y) in self.weights.iter_mut().zip(&self.nodes) {
            let rho = density(y.norm_squared());
            if !(rho >= 0.0) || !rho.is_finite() {
                return Err(Error::domain("radial density must be nonnegative and finite"));
            }
            *w *= rho;
        }
        Ok(())
    }

    /// The rule for the rescaled field: nodes scaled by `lambda`, weights
    /// unchanged (image measure of the base field under `y -> lambda y`).
    pub fn scaled(&self, lambda: f64) -> Quadrature<D> {
        Quadrature {
            nodes: self.nodes.iter().map(|y| y * lambda).collect(),
            weights: self.weights.clone(),
        }
    }
}

/// Disk rule on `B_R` (Lebesgue weights, unnormalized).
pub fn disk_rule(radius: f64, spec: &QuadSpec) -> Result<Quadrature<2>> {
    spec.validate()?;
    if !(radius > 0.0) {
        return Err(Error::domain("ball radius must be positive"));
    }
    let (gx, gw) = gauss_legendre(spec.radial);
    let na = spec.angular;
    let wa = 2.0 * PI / na as f64;
    let mut nodes = Vec::with_capacity(spec.radial * na);
    let mut weights = Vec::with_capacity(spec.radial * na);
    for (x, w) in gx.iter().zip(&gw) {
        let r = 0.5 * radius * (x + 1.0);
        let wr = 0.5 * radius * w * r;
        for j in 0..na {
            let t = 2.0 * PI * j as f64 / na as f64;
            nodes.push(SVector::<f64, 2>::new(r * t.cos(), r * t.sin()));
            weights.push(wr * wa);
        }
    }
    Ok(Quadrature { nodes, weights })
}

/// Ball rule on `B_R` (Lebesgue weights, unnormalized).
pub fn ball_rule(radius: f64, spec: &QuadSpec) -> Result<Quadrature<3>> {
    spec.validate()?;
    if !(radius > 0.0) {
        return Err(Error::domain("ball radius must be positive"));
    }
    let (gx, gw) = gauss_legendre(spec.radial);
    let (cx, cw) = gauss_legendre(spec.polar);
    let na = spec.angular;
    let wa = 2.0 * PI / na as f64;
    let mut nodes = Vec::with_capacity(spec.radial * spec.polar * na);
    let mut weights = Vec::with_capacity(nodes.capacity());
    for (x, w) in gx.iter().zip(&gw) {
        let r = 0.5 * radius * (x + 1.0);
        let wr = 0.5 * radius * w * r * r;
        for (c, wc) in cx.iter().zip(&cw) {
            let s = (1.0 - c * c).sqrt();
            for j in 0..na {
                let t = 2.0 * PI * j as f64 / na as f64;
                nodes.push(SVector::<f64, 3>::new(r * s * t.cos(), r * s * t.sin(), r * c));
                weights.push(wr * wc * wa);
            }
        }
    }
    Ok(Quadrature { nodes, weights })
}
