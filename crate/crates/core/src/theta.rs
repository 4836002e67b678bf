//! Truncated translated lattice theta sums and the per-point Fisher density.
//!
//! The translated theta function is `theta_{L+y}(alpha) = sum_{p in L}
//! exp(-pi alpha |p+y|^2)`. Sums are truncated at a radius `R_cut` chosen so
//! that a crude lattice-point-count bound `N_d(R) exp(-pi alpha R^2)` falls
//! below `tail_epsilon`; points with `|p+y| <= R_cut` are enumerated over an
//! integer bounding box. Gradients are analytic (term-wise), never finite
//! differences; finite differences are reserved for tests and for
//! parameter-space derivatives.

use crate::lattice::{Lattice, LatticeParams2D};
use crate::{Error, Result};
use nalgebra::{SMatrix, SVector};
use std::f64::consts::PI;

/// Gaussian parameter and truncation policy for lattice sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaParams {
    /// Gaussian parameter `alpha > 0`.
    pub alpha: f64,
    /// Target absolute tail bound for truncation.
    pub tail_epsilon: f64,
    /// Cap on the truncation radius.
    pub max_shell_radius: f64,
}

impl ThetaParams {
    pub const DEFAULT_TAIL_EPSILON: f64 = 1e-14;
    pub const DEFAULT_MAX_SHELL_RADIUS: f64 = 40.0;

    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
        }
        Ok(ThetaParams {
            alpha,
            tail_epsilon: Self::DEFAULT_TAIL_EPSILON,
            max_shell_radius: Self::DEFAULT_MAX_SHELL_RADIUS,
        })
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let mut p = Self::new(alpha)?;
        p.tail_epsilon = self.tail_epsilon;
        p.max_shell_radius = self.max_shell_radius;
        Ok(p)
    }

    pub fn with_tail_epsilon(mut self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::domain("tail_epsilon must lie in (0, 1)"));
        }
        self.tail_epsilon = eps;
        Ok(self)
    }

    pub fn with_max_shell_radius(mut self, cap: f64) -> Result<Self> {
        if !(cap > 0.0) {
            return Err(Error::domain("max_shell_radius must be positive"));
        }
        self.max_shell_radius = cap;
        Ok(self)
    }
}

/// Value, analytic gradient and truncation radius of one theta evaluation.
#[derive(Debug, Clone, Copy)]
pub struct ThetaValue<const D: usize> {
    /// `sum_{|p+y| <= R_cut} exp(-pi alpha |p+y|^2)`.
    pub value: f64,
    /// `grad_y theta = -2 pi alpha sum (p+y) exp(-pi alpha |p+y|^2)`.
    pub gradient: SVector<f64, D>,
    pub truncation_radius: f64,
}

/// Reusable evaluator: truncation radius and inverse-basis data are computed
/// once per `(lattice, params)` pair and shared across many translation
/// points. Pure and `Sync`; safe for data-parallel evaluation.
#[derive(Debug, Clone)]
pub struct ThetaEvaluator<const D: usize> {
    basis: SMatrix<f64, D, D>,
    binv: SMatrix<f64, D, D>,
    row_norms: [f64; 3],
    alpha: f64,
    rcut: f64,
    rcut2: f64,
}

impl<const D: usize> ThetaEvaluator<D> {
    pub fn new(lattice: &Lattice<D>, p: &ThetaParams) -> Result<Self> {
        let rcut = truncation_radius(lattice, p)?;
        let binv = lattice.basis_inverse();
        let mut row_norms = [0.0; 3];
        for i in 0..D {
            row_norms[i] = binv.row(i).norm();
        }
        Ok(ThetaEvaluator {
            basis: *lattice.basis(),
            binv,
            row_norms,
            alpha: p.alpha,
            rcut,
            rcut2: rcut * rcut,
        })
    }

    pub fn truncation_radius(&self) -> f64 {
        self.rcut
    }

    /// Theta value and analytic gradient at translation `y`.
    pub fn eval(&self, y: &SVector<f64, D>) -> ThetaValue<D> {
        let center = -(self.binv * y);
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for i in 0..D {
            let s = self.row_norms[i] * self.rcut;
            lo[i] = (center[i] - s).floor() as i64 - 1;
            hi[i] = (center[i] + s).ceil() as i64 + 1;
        }
        let mpa = -PI * self.alpha;
        let mut sum = 0.0;
        let mut acc = SVector::<f64, D>::zeros();
        let mut idx = lo;
        'outer: loop {
            let mut n = SVector::<f64, D>::zeros();
            for i in 0..D {
                n[i] = idx[i] as f64;
            }
            let v = self.basis * n + y;
            let r2 = v.norm_squared();
            if r2 <= self.rcut2 {
                let w = (mpa * r2).exp();
                sum += w;
                acc += v * w;
            }
            for i in 0..D {
                idx[i] += 1;
                if idx[i] <= hi[i] {
                    continue 'outer;
                }
                idx[i] = lo[i];
            }
            break;
        }
        ThetaValue {
            value: sum,
            gradient: acc * (2.0 * mpa),
            truncation_radius: self.rcut,
        }
    }

    /// `Q(y) = |grad theta|^2 / (4 theta)`, which equals `|grad sqrt(theta)|^2`.
    pub fn q(&self, y: &SVector<f64, D>) -> f64 {
        let t = self.eval(y);
        t.gradient.norm_squared() / (4.0 * t.value)
    }
}

/// Smallest radius `R` with `N_d(R) exp(-pi alpha R^2) <= tail_epsilon`,
/// where `N_d(R) = c_d (R + diam_cell)^d / covolume` bounds the number of
/// lattice points in the ball of radius `R`.
pub fn truncation_radius<const D: usize>(lattice: &Lattice<D>, p: &ThetaParams) -> Result<f64> {
    let covol = lattice.covolume();
    let diam = lattice.cell_diameter_bound();
    let cd = if D == 2 { PI } else { 4.0 * PI / 3.0 };
    let count = |r: f64| (cd * (r + diam).powi(D as i32) / covol).max(1.0);
    let bound = |r: f64| count(r) * (-PI * p.alpha * r * r).exp();
    let mut r: f64 = 1.0;
    for _ in 0..60 {
        let rn = ((count(r) / p.tail_epsilon).ln() / (PI * p.alpha)).max(0.0).sqrt();
        if (rn - r).abs() <= 1e-12 {
            r = rn;
            break;
        }
        r = rn;
    }
    while bound(r) > p.tail_epsilon && r <= p.max_shell_radius {
        r += 0.01;
    }
    if r > p.max_shell_radius {
        return Err(Error::Truncation {
            required: r,
            cap: p.max_shell_radius,
        });
    }
    Ok(r)
}

/// Translated theta sum with analytic gradient.
pub fn theta_translated<const D: usize>(
    lattice: &Lattice<D>,
    y: &SVector<f64, D>,
    p: &ThetaParams,
) -> Result<ThetaValue<D>> {
    Ok(ThetaEvaluator::new(lattice, p)?.eval(y))
}

/// Per-point Fisher density `Q(y) = |grad theta|^2 / (4 theta)`; computed
/// from one theta evaluation, never by differentiating the square root.
pub fn q_value<const D: usize>(
    lattice: &Lattice<D>,
    y: &SVector<f64, D>,
    p: &ThetaParams,
) -> Result<f64> {
    let t = theta_translated(lattice, y, p)?;
    Ok(t.gradient.norm_squared() / (4.0 * t.value))
}

/// Expectation of the discrete Gaussian on `L + y`:
/// `E[w] = (1/theta) sum (p+y) exp(-pi alpha |p+y|^2) = -grad theta / (2 pi alpha theta)`.
pub fn discrete_gaussian_mean<const D: usize>(
    lattice: &Lattice<D>,
    y: &SVector<f64, D>,
    p: &ThetaParams,
) -> Result<SVector<f64, D>> {
    let t = theta_translated(lattice, y, p)?;
    Ok(-t.gradient / (2.0 * PI * p.alpha * t.value))
}

/// Relative Poisson-summation discrepancy
/// `|theta_L(alpha) - alpha^(-d/2) theta_{L*}(1/alpha)| / theta_L(alpha)`;
/// a correctness oracle, expected at or below 1e-10.
pub fn theta_dual_check<const D: usize>(lattice: &Lattice<D>, p: &ThetaParams) -> Result<f64> {
    let zero = SVector::<f64, D>::zeros();
    let direct = theta_translated(lattice, &zero, p)?.value;
    let dual_side = p.alpha.powf(-(D as f64) / 2.0)
        * theta_translated(&lattice.dual(), &zero, &p.with_alpha(1.0 / p.alpha)?)?.value;
    Ok((direct - dual_side).abs() / direct)
}

/// Dual-form evaluation of the translated theta sum,
/// `alpha^(-d/2) sum_{q in L*} exp(-pi |q|^2 / alpha) cos(2 pi q . y)`.
/// Equals `theta_{L+y}(alpha)` by Poisson summation and equals
/// `alpha^(-d/2) u_L(y, 1/(4 pi alpha))` for the lattice heat kernel `u_L`;
/// used as an independent oracle for the direct sum.
pub fn theta_translated_dual<const D: usize>(
    lattice: &Lattice<D>,
    y: &SVector<f64, D>,
    p: &ThetaParams,
) -> Result<f64> {
    let dual = lattice.dual();
    let pd = p.with_alpha(1.0 / p.alpha)?;
    let rcut = truncation_radius(&dual, &pd)?;
    let mut sum = 0.0;
    for q in dual.points_within(rcut) {
        sum += (-PI * q.norm_squared() / p.alpha).exp() * (2.0 * PI * q.dot(y)).cos();
    }
    Ok(sum * p.alpha.powf(-(D as f64) / 2.0) / lattice.covolume())
}

/// Central finite-difference gradient of `(x, y) -> Q_{L(x,y)}(y_point)` over
/// the 2D chart, step `h` in each coordinate.
pub fn q_gradient_wrt_params(
    params: &LatticeParams2D,
    y_point: &SVector<f64, 2>,
    p: &ThetaParams,
    h: f64,
) -> Result<SVector<f64, 2>> {
    if !(h > 0.0) {
        return Err(Error::domain("finite-difference step must be positive"));
    }
    if params.y - h <= 0.0 {
        return Err(Error::domain("step reaches the y <= 0 boundary of the chart"));
    }
    let q_at = |x: f64, y: f64| -> Result<f64> {
        let lat = LatticeParams2D::new(x, y)?.to_lattice();
        q_value(&lat, y_point, p)
    };
    let gx = (q_at(params.x + h, params.y)? - q_at(params.x - h, params.y)?) / (2.0 * h);
    let gy = (q_at(params.x, params.y + h)? - q_at(params.x, params.y - h)?) / (2.0 * h);
    Ok(SVector::<f64, 2>::new(gx, gy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{a2, d3, z2, LatticeParams2D};

    const ALPHA_PAPER: f64 = 10.0 / PI;

    fn params(alpha: f64) -> ThetaParams {
        ThetaParams::new(alpha).unwrap()
    }

    /// Direct-summation oracle over |p| <= 6 for Z^2 at y = 0.
    fn z2_theta_oracle(alpha: f64) -> f64 {
        let mut s = 0.0;
        for m in -6i32..=6 {
            for n in -6i32..=6 {
                let r2 = (m * m + n * n) as f64;
                if r2 <= 36.0 {
                    s += (-PI * alpha * r2).exp();
                }
            }
        }
        s
    }

    #[test]
    fn theta_z2_origin_matches_direct_summation() {
        let t = theta_translated(&z2(), &SVector::zeros(), &params(ALPHA_PAPER)).unwrap();
        let oracle = z2_theta_oracle(ALPHA_PAPER);
        assert!((t.value - oracle).abs() <= 1e-13, "{} vs {}", t.value, oracle);
        // 1 + 4 e^{-10} + 4 e^{-20} + ...
        assert!((t.value - 1.000181607963650).abs() <= 1e-12);
        assert!(t.gradient.norm() <= 1e-15);
        assert!(t.value > 0.0);
    }

    #[test]
    fn gradient_vanishes_at_half_cell_points() {
        let p = params(ALPHA_PAPER);
        let t = theta_translated(&z2(), &SVector::<f64, 2>::new(0.5, 0.5), &p).unwrap();
        assert!(t.gradient.norm() <= 1e-15);
        let q = q_value(&z2(), &SVector::<f64, 2>::new(0.5, 0.0), &p).unwrap();
        assert!(q <= 1e-20);
    }

    #[test]
    fn q_vanishes_at_a2_barycenter() {
        let lat = a2();
        let b: SVector<f64, 2> = (lat.basis().column(0) + lat.basis().column(1)) / 3.0;
        let q = q_value(&lat, &b, &params(ALPHA_PAPER)).unwrap();
        assert!(q <= 1e-20, "Q at barycenter = {q}");
    }

    #[test]
    fn q_is_nonnegative_and_zero_at_origin() {
        for alpha in [0.7, ALPHA_PAPER] {
            let p = params(alpha);
            assert!(q_value(&a2(), &SVector::zeros(), &p).unwrap() <= 1e-20);
            let q = q_value(&a2(), &SVector::<f64, 2>::new(0.11, 0.07), &p).unwrap();
            assert!(q >= 0.0);
        }
    }

    #[test]
    fn diagonal_symmetry_of_z2() {
        let p = params(ALPHA_PAPER);
        let t = theta_translated(&z2(), &SVector::<f64, 2>::new(0.1, 0.1), &p).unwrap();
        assert!((t.gradient[0] - t.gradient[1]).abs() <= 1e-14);
        let e = discrete_gaussian_mean(&z2(), &SVector::<f64, 2>::new(0.1, 0.1), &p).unwrap();
        assert!((e[0] - e[1]).abs() <= 1e-14);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let lat = LatticeParams2D::new(0.23, 1.07).unwrap().to_lattice();
        let y0 = SVector::<f64, 2>::new(0.13, -0.21);
        let h = 1e-5;
        for alpha in [2.0 / PI, ALPHA_PAPER] {
            let p = params(alpha);
            let t = theta_translated(&lat, &y0, &p).unwrap();
            for i in 0..2 {
                let mut e = SVector::<f64, 2>::zeros();
                e[i] = h;
                let fp = theta_translated(&lat, &(y0 + e), &p).unwrap().value;
                let fm = theta_translated(&lat, &(y0 - e), &p).unwrap().value;
                let fd = (fp - fm) / (2.0 * h);
                let rel = (fd - t.gradient[i]).abs() / t.gradient[i].abs();
                assert!(rel <= 1e-6, "component {i} at alpha {alpha}: rel {rel:.2e}");
            }
        }
    }

    #[test]
    fn lattice_periodicity() {
        let lat = a2();
        let p = params(ALPHA_PAPER);
        let y = SVector::<f64, 2>::new(0.07, 0.19);
        let shift: SVector<f64, 2> = lat.basis().column(0) + lat.basis().column(1) * 2.0;
        let a = theta_translated(&lat, &y, &p).unwrap().value;
        let b = theta_translated(&lat, &(y + shift), &p).unwrap().value;
        assert!((a - b).abs() / a <= 1e-12);
    }

    #[test]
    fn poisson_summation_discrepancy_is_small() {
        // Z^2 at alpha = 1 is a fixed point of the dual identity.
        let d = theta_dual_check(&z2(), &params(1.0)).unwrap();
        assert!(d <= 1e-12);
        let d = theta_dual_check(&a2(), &params(ALPHA_PAPER)).unwrap();
        assert!(d <= 1e-10);
        let d = theta_dual_check(&d3(), &params(2.0)).unwrap();
        assert!(d <= 1e-10);
    }

    #[test]
    fn heat_kernel_dual_form_matches_direct_sum() {
        let p = params(1.0);
        let y = SVector::<f64, 2>::new(0.2, 0.1);
        let direct = theta_translated(&a2(), &y, &p).unwrap().value;
        let dual = theta_translated_dual(&a2(), &y, &p).unwrap();
        assert!((direct - dual).abs() / direct <= 1e-12);
        // Rescaling identity: theta * alpha^(d/2) equals the dual-form sum at
        // heat time 1/(4 pi alpha).
        let p2 = params(0.6);
        let direct = theta_translated(&a2(), &y, &p2).unwrap().value * p2.alpha.powf(1.0);
        let dual = theta_translated_dual(&a2(), &y, &p2).unwrap() * p2.alpha.powf(1.0);
        assert!((direct - dual).abs() / direct <= 1e-12);
    }

    #[test]
    fn alt_formula_identity() {
        // |grad theta|^2 / (4 theta) = pi^2 alpha^2 theta |E[w]|^2.
        let lat = a2();
        for (alpha, y) in [(0.8, [0.21, -0.05]), (ALPHA_PAPER, [0.1, 0.17])] {
            let p = params(alpha);
            let y = SVector::<f64, 2>::new(y[0], y[1]);
            let q = q_value(&lat, &y, &p).unwrap();
            let t = theta_translated(&lat, &y, &p).unwrap().value;
            let e = discrete_gaussian_mean(&lat, &y, &p).unwrap();
            let rhs = PI * PI * alpha * alpha * t * e.norm_squared();
            assert!((q - rhs).abs() / q <= 1e-12, "alpha {alpha}: {q} vs {rhs}");
        }
    }

    #[test]
    fn truncation_cap_is_enforced() {
        let p = ThetaParams::new(1e-4).unwrap();
        match theta_translated(&z2(), &SVector::zeros(), &p) {
            Err(Error::Truncation { required, cap }) => {
                assert!(required > cap);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
        // alpha = 2/pi stays well within the default cap.
        let r = truncation_radius(&z2(), &params(2.0 / PI)).unwrap();
        assert!(r < 5.0, "R_cut at alpha=2/pi is {r}");
    }

    #[test]
    fn value_bounds_largest_term() {
        let p = params(ALPHA_PAPER);
        let y = SVector::<f64, 2>::new(0.31, 0.12);
        let t = theta_translated(&z2(), &y, &p).unwrap();
        // Largest single term is the nearest coset point.
        let nearest = (-PI * p.alpha * 0.31f64.hypot(0.12).powi(2)).exp();
        assert!(t.value >= nearest);
    }

    #[test]
    fn chart_gradient_of_q_symmetries_at_a2() {
        let p = params(ALPHA_PAPER);
        let a2p = LatticeParams2D::new(0.5, 3f64.sqrt() / 2.0).unwrap();
        // y on the vertical mirror axis: d/dx vanishes by reflection symmetry.
        let g = q_gradient_wrt_params(&a2p, &SVector::<f64, 2>::new(0.0, 0.2), &p, 1e-3).unwrap();
        assert!(g[0].abs() <= 1e-9, "d/dx = {}", g[0]);
        // theta = 0 direction: the gradient vector is nonzero (A2 is almost
        // never a critical point of the integrand).
        let g = q_gradient_wrt_params(&a2p, &SVector::<f64, 2>::new(0.2, 0.0), &p, 1e-3).unwrap();
        assert!(g.norm() > 0.05, "|grad| = {}", g.norm());
    }

    #[test]
    fn chart_gradient_profile_has_pi_over_3_period() {
        let p = params(ALPHA_PAPER);
        let a2p = LatticeParams2D::new(0.5, 3f64.sqrt() / 2.0).unwrap();
        let r = 0.3;
        let prof: Vec<f64> = (0..12)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 12.0;
                let y = SVector::<f64, 2>::new(r * t.cos(), r * t.sin());
                q_gradient_wrt_params(&a2p, &y, &p, 1e-3)
                    .unwrap()
                    .norm_squared()
            })
            .collect();
        let max = prof.iter().fold(0.0f64, |a, b| a.max(*b));
        for k in 0..12 {
            let dev = (prof[k] - prof[(k + 2) % 12]).abs() / max;
            assert!(dev <= 1e-3, "k={k}: dev {dev:.2e}");
        }
    }

    #[test]
    fn chart_gradient_rejects_bad_steps() {
        let p = params(1.0);
        let a2p = LatticeParams2D::new(0.5, 3f64.sqrt() / 2.0).unwrap();
        assert!(q_gradient_wrt_params(&a2p, &SVector::zeros(), &p, 0.0).is_err());
        let near_edge = LatticeParams2D::new(0.0, 5e-4).unwrap();
        assert!(q_gradient_wrt_params(&near_edge, &SVector::zeros(), &p, 1e-3).is_err());
    }

    #[test]
    fn theta_params_validation() {
        assert!(ThetaParams::new(0.0).is_err());
        assert!(ThetaParams::new(-1.0).is_err());
        assert!(ThetaParams::new(1.0).unwrap().with_tail_epsilon(2.0).is_err());
        assert!(ThetaParams::new(1.0).unwrap().with_max_shell_radius(0.0).is_err());
    }
}
