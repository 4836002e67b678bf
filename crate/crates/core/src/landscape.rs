//! Moduli-space scans, parameter sweeps, local refinement, finite-difference
//! Hessians and volume-stationarity checks.
//!
//! All parameter-space derivatives use central finite differences; defaults
//! are `h = 1e-3` for gradients and `h = 3e-3` for Hessians. Grid nodes,
//! sweep values and stencil points are independent work items evaluated in
//! parallel with a deterministic reduction order.

use crate::fisher::{fisher_functional, FiringField};
use crate::lattice::{LatticeParams2D, LatticeParams3D, NamedLattice};
use crate::quadrature::{QuadSpec, Quadrature};
use crate::theta::ThetaParams;
use crate::{Error, Result};
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Default central-difference step for chart gradients.
pub const GRAD_STEP_DEFAULT: f64 = 1e-3;
/// Default central-difference step for chart Hessians, fixed after a
/// step-halving consistency check.
pub const HESS_STEP_DEFAULT: f64 = 3e-3;

/// Eigenvalues below this fraction of the largest magnitude are treated as
/// zero when classifying critical points (finite-difference noise floor).
pub const CLASSIFY_REL_TOL: f64 = 1e-7;

/// Firing field of either dimension, for dynamic dispatch.
#[derive(Debug, Clone)]
pub enum FieldNd {
    Two(FiringField<2>),
    Three(FiringField<3>),
}

impl FieldNd {
    pub fn dim(&self) -> usize {
        match self {
            FieldNd::Two(_) => 2,
            FieldNd::Three(_) => 3,
        }
    }

    pub fn radius(&self) -> f64 {
        match self {
            FieldNd::Two(f) => f.radius,
            FieldNd::Three(f) => f.radius,
        }
    }
}

/// Chart point of either dimension.
#[derive(Debug, Clone)]
pub enum ChartPoint {
    P2(LatticeParams2D),
    P3(LatticeParams3D),
}

impl ChartPoint {
    pub fn dim(&self) -> usize {
        match self {
            ChartPoint::P2(_) => 2,
            ChartPoint::P3(_) => 3,
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        match self {
            ChartPoint::P2(p) => vec![p.x, p.y],
            ChartPoint::P3(p) => p.as_array().to_vec(),
        }
    }

    pub fn for_named(name: NamedLattice) -> ChartPoint {
        let c = name.chart_point();
        match name.dim() {
            2 => ChartPoint::P2(LatticeParams2D::new(c[0], c[1]).expect("valid chart point")),
            _ => ChartPoint::P3(
                LatticeParams3D::new(c[0], c[1], c[2], c[3], c[4]).expect("valid chart point"),
            ),
        }
    }
}

/// F as a function of 2D chart coordinates against a prebuilt rule.
fn f_params2(
    coords: &[f64],
    field: &FiringField<2>,
    p: &ThetaParams,
    quad: &Quadrature<2>,
) -> Result<f64> {
    let lat = LatticeParams2D::new(coords[0], coords[1])?.to_lattice();
    fisher_functional(&lat, field, p, quad)
}

fn f_params3(
    coords: &[f64],
    field: &FiringField<3>,
    p: &ThetaParams,
    quad: &Quadrature<3>,
) -> Result<f64> {
    let lat =
        LatticeParams3D::new(coords[0], coords[1], coords[2], coords[3], coords[4])?.to_lattice();
    fisher_functional(&lat, field, p, quad)
}

/// Rectangular scan window over the 2D chart, masked to the fundamental
/// domain `D2`.
#[derive(Debug, Clone)]
pub struct ScanGrid2D {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl ScanGrid2D {
    /// `nx` nodes on `x in [0, 1/2]`, `ny` nodes on `y in [y_min, y_max]`.
    /// The default window elsewhere is 33 x 33 over `y in [0.8, 1.4]`.
    pub fn new(nx: usize, ny: usize, y_min: f64, y_max: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::domain("scan grid needs at least 2 nodes per axis"));
        }
        if !(y_min > 0.0 && y_max > y_min) {
            return Err(Error::domain("scan grid needs 0 < y_min < y_max"));
        }
        let xs = (0..nx).map(|i| 0.5 * i as f64 / (nx - 1) as f64).collect();
        let ys = (0..ny)
            .map(|j| y_min + (y_max - y_min) * j as f64 / (ny - 1) as f64)
            .collect();
        Ok(ScanGrid2D { xs, ys })
    }

    pub fn in_domain(x: f64, y: f64) -> bool {
        LatticeParams2D::new(x, y).map_or(false, |p| p.in_fundamental_domain())
    }
}

/// One extremal grid node.
#[derive(Debug, Clone, Copy)]
pub struct ScanPoint {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

/// Full scan table plus argmax/argmin metadata. `values` is row-major over
/// `(ix, iy)` with `NaN` at masked nodes.
#[derive(Debug, Clone)]
pub struct ScanResult {
    pub grid: ScanGrid2D,
    pub values: Vec<f64>,
    pub argmax: ScanPoint,
    pub argmin: ScanPoint,
}

impl ScanResult {
    pub fn value_at(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix * self.grid.ys.len() + iy]
    }
}

/// Evaluate F at each in-domain grid node.
pub fn scan_2d(
    field: &FiringField<2>,
    p: &ThetaParams,
    grid: &ScanGrid2D,
    spec: &QuadSpec,
) -> Result<ScanResult> {
    let quad = field.quadrature(spec)?;
    let ny = grid.ys.len();
    let cells: Vec<(usize, usize)> = (0..grid.xs.len())
        .flat_map(|ix| (0..ny).map(move |iy| (ix, iy)))
        .collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(ix, iy)| {
            let (x, y) = (grid.xs[ix], grid.ys[iy]);
            if ScanGrid2D::in_domain(x, y) {
                f_params2(&[x, y], field, p, &quad)
            } else {
                Ok(f64::NAN)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut argmax: Option<ScanPoint> = None;
    let mut argmin: Option<ScanPoint> = None;
    for (k, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        let pt = ScanPoint {
            x: grid.xs[k / ny],
            y: grid.ys[k % ny],
            value: v,
        };
        if argmax.as_ref().map_or(true, |m| v > m.value) {
            argmax = Some(pt);
        }
        if argmin.as_ref().map_or(true, |m| v < m.value) {
            argmin = Some(pt);
        }
    }
    let argmax = argmax.ok_or_else(|| Error::domain("scan grid is empty after masking"))?;
    let argmin = argmin.expect("argmin exists whenever argmax does");
    Ok(ScanResult {
        grid: grid.clone(),
        values,
        argmax,
        argmin,
    })
}

/// Options for [`refine_local`].
#[derive(Debug, Clone, Copy)]
pub struct RefineOptions {
    pub max_sweeps: usize,
    pub tol: f64,
    pub y_min: f64,
    /// Upper cap on y; an ascent pinned here reports `converged = false`
    /// (boundary growth, not a critical point).
    pub y_max: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            max_sweeps: 40,
            tol: 1e-9,
            y_min: 0.55,
            y_max: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RefineOutcome {
    pub params: LatticeParams2D,
    pub value: f64,
    pub converged: bool,
}

/// Derivative-free coordinate-wise ascent (bracketing plus golden section).
/// The refined point never loses value: `F(refined) >= F(start) - 1e-12`.
pub fn refine_local(
    start: &LatticeParams2D,
    field: &FiringField<2>,
    p: &ThetaParams,
    spec: &QuadSpec,
    opts: &RefineOptions,
) -> Result<RefineOutcome> {
    let quad = field.quadrature(spec)?;
    let f = |x: f64, y: f64| f_params2(&[x, y], field, p, &quad);
    let mut cur = [
        start.x.clamp(0.0, 0.5),
        start.y.clamp(opts.y_min, opts.y_max),
    ];
    let mut fcur = f(cur[0], cur[1])?;
    let mut converged = false;
    for _ in 0..opts.max_sweeps {
        let prev = cur;
        for axis in 0..2 {
            let (lo, hi) = if axis == 0 {
                (0.0, 0.5)
            } else {
                (opts.y_min, opts.y_max)
            };
            let line = |t: f64| {
                if axis == 0 {
                    f(t, cur[1])
                } else {
                    f(cur[0], t)
                }
            };
            let (t, ft) = line_maximum(&line, cur[axis], lo, hi, opts.tol)?;
            if ft > fcur {
                cur[axis] = t;
                fcur = ft;
            }
        }
        let moved = (cur[0] - prev[0]).abs().max((cur[1] - prev[1]).abs());
        if moved <= opts.tol * 10.0 {
            converged = true;
            break;
        }
    }
    // Pinned at a y cap: the ascent is still climbing toward a degenerate
    // shape (the chart maps y < 1 onto the same lattices as 1/y).
    if cur[1] >= opts.y_max - 1e-6 || cur[1] <= opts.y_min + 1e-6 {
        converged = false;
    }
    Ok(RefineOutcome {
        params: LatticeParams2D::new(cur[0], cur[1])?,
        value: fcur,
        converged,
    })
}

/// Maximize a 1D slice: bracket by expanding steps from `t0`, then golden
/// section. Returns the best point seen.
fn line_maximum(
    f: &dyn Fn(f64) -> Result<f64>,
    t0: f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let mut h = (hi - lo) * 0.02;
    let f0 = f(t0)?;
    let mut a = t0;
    let mut b;
    let mut fb;
    let tp = (t0 + h).min(hi);
    let tm = (t0 - h).max(lo);
    let (fp, fm) = (f(tp)?, f(tm)?);
    if fp >= f0 && fp >= fm {
        b = tp;
        fb = fp;
    } else if fm >= f0 {
        b = tm;
        fb = fm;
        h = -h;
    } else {
        // t0 already sits between downhill neighbours.
        let (t, ft) = golden_section(f, tm, tp, tol)?;
        return Ok(if ft >= f0 { (t, ft) } else { (t0, f0) });
    }
    let mut c;
    let fc;
    loop {
        h *= 2.0;
        let t = (b + h).clamp(lo, hi);
        if t == b {
            return Ok((b, fb));
        }
        let ft = f(t)?;
        c = t;
        if ft < fb {
            fc = ft;
            break;
        }
        a = b;
        b = c;
        fb = ft;
        if c == lo || c == hi {
            return Ok((c, ft));
        }
    }
    let _ = fc;
    let (left, right) = if a <= c { (a, c) } else { (c, a) };
    let (t, ft) = golden_section(f, left, right, tol)?;
    Ok(if ft >= fb { (t, ft) } else { (b, fb) })
}

fn golden_section(
    f: &dyn Fn(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - (b - a) * INV_PHI;
    let mut d = a + (b - a) * INV_PHI;
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..80 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * INV_PHI;
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * INV_PHI;
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

/// Swept parameter of a [`SweepRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Radius,
    Alpha,
    Lambda,
    DegenerateT,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::Radius => "R",
            SweepParameter::Alpha => "alpha",
            SweepParameter::Lambda => "lambda",
            SweepParameter::DegenerateT => "t",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub f: Vec<f64>,
}

/// Tabulated functional values over a parameter grid.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub parameter: SweepParameter,
    pub lattice_names: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepRecord {
    fn validate(self) -> Result<Self> {
        for w in self.rows.windows(2) {
            if w[1].value <= w[0].value {
                return Err(Error::domain("sweep values must be strictly ascending"));
            }
        }
        if self.rows.iter().any(|r| r.f.iter().any(|v| !v.is_finite())) {
            return Err(Error::Evaluation("non-finite sweep value".into()));
        }
        Ok(self)
    }

    /// `F(first) - F(second)` per row, when at least two lattices are swept.
    pub fn difference_column(&self) -> Option<Vec<f64>> {
        (self.lattice_names.len() >= 2)
            .then(|| self.rows.iter().map(|r| r.f[0] - r.f[1]).collect())
    }
}

/// F for each lattice at each ball radius; with the default A2/Z2 pair the
/// difference column is `F(A2) - F(Z2)`.
pub fn sweep_radius(
    lattices: &[(String, crate::lattice::Lattice<2>)],
    r_values: &[f64],
    p: &ThetaParams,
    spec: &QuadSpec,
) -> Result<SweepRecord> {
    if r_values.iter().any(|r| *r <= 0.0) {
        return Err(Error::domain("radii must be positive"));
    }
    let rows = r_values
        .par_iter()
        .map(|&r| {
            let field = FiringField::<2>::uniform(r)?;
            let quad = field.quadrature(spec)?;
            let f = lattices
                .iter()
                .map(|(_, l)| fisher_functional(l, &field, p, &quad))
                .collect::<Result<Vec<f64>>>()?;
            Ok(SweepRow { value: r, f })
        })
        .collect::<Result<Vec<_>>>()?;
    SweepRecord {
        parameter: SweepParameter::Radius,
        lattice_names: lattices.iter().map(|(n, _)| n.clone()).collect(),
        rows,
    }
    .validate()
}

/// F per lattice per alpha at fixed ball radius.
pub fn sweep_alpha(
    lattices: &[(String, crate::lattice::Lattice<2>)],
    alphas: &[f64],
    radius: f64,
    p: &ThetaParams,
    spec: &QuadSpec,
) -> Result<SweepRecord> {
    let field = FiringField::<2>::uniform(radius)?;
    let quad = field.quadrature(spec)?;
    let rows = alphas
        .par_iter()
        .map(|&alpha| {
            let pa = p.with_alpha(alpha)?;
            let f = lattices
                .iter()
                .map(|(_, l)| fisher_functional(l, &field, &pa, &quad))
                .collect::<Result<Vec<f64>>>()?;
            Ok(SweepRow { value: alpha, f })
        })
        .collect::<Result<Vec<_>>>()?;
    SweepRecord {
        parameter: SweepParameter::Alpha,
        lattice_names: lattices.iter().map(|(n, _)| n.clone()).collect(),
        rows,
    }
    .validate()
}

/// F for D3, D3* and Z3 at the given alpha and radius (single row).
pub fn compare_3d(field: &FiringField<3>, p: &ThetaParams, spec: &QuadSpec) -> Result<SweepRecord> {
    let quad = field.quadrature(spec)?;
    let lattices = [
        ("D3".to_string(), crate::lattice::d3()),
        ("D3star".to_string(), crate::lattice::d3_star()),
        ("Z3".to_string(), crate::lattice::z3()),
    ];
    let f = lattices
        .iter()
        .map(|(_, l)| fisher_functional(l, field, p, &quad))
        .collect::<Result<Vec<f64>>>()?;
    SweepRecord {
        parameter: SweepParameter::Alpha,
        lattice_names: lattices.iter().map(|(n, _)| n.clone()).collect(),
        rows: vec![SweepRow { value: p.alpha, f }],
    }
    .validate()
}

/// Sign classification of a finite-difference Hessian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    LocalMax,
    LocalMin,
    Saddle,
    Degenerate,
}

impl Classification {
    pub fn name(&self) -> &'static str {
        match self {
            Classification::LocalMax => "LocalMax",
            Classification::LocalMin => "LocalMin",
            Classification::Saddle => "Saddle",
            Classification::Degenerate => "Degenerate",
        }
    }

    /// Classify by eigenvalue signs; eigenvalues within
    /// `CLASSIFY_REL_TOL * max|eig|` of zero mark the point degenerate.
    pub fn from_eigenvalues(eigs: &[f64]) -> Classification {
        let max_abs = eigs.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        let tol = CLASSIFY_REL_TOL * max_abs;
        if max_abs == 0.0 || eigs.iter().any(|e| e.abs() < tol) {
            return Classification::Degenerate;
        }
        let pos = eigs.iter().filter(|e| **e > 0.0).count();
        match pos {
            0 => Classification::LocalMax,
            n if n == eigs.len() => Classification::LocalMin,
            _ => Classification::Saddle,
        }
    }
}

/// Symmetric finite-difference Hessian of F over the chart, eigen-decomposed
/// and sign-classified. A local maximizer of F has all Hessian eigenvalues
/// negative.
#[derive(Debug, Clone)]
pub struct HessianReport {
    pub point: Vec<f64>,
    pub matrix: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub classification: Classification,
    /// `||H - H^T||_max / ||H||_max` before symmetrization (the cross
    /// stencil is symmetric by construction, so this is roundoff only).
    pub asymmetry: f64,
    pub step: f64,
}

fn fd_hessian(f: &dyn Fn(&[f64]) -> Result<f64>, x0: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let n = x0.len();
    let mut hess = DMatrix::<f64>::zeros(n, n);
    let f0 = f(x0)?;
    if !f0.is_finite() {
        return Err(Error::Evaluation("non-finite F at stencil center".into()));
    }
    let shifted = |deltas: &[(usize, f64)]| -> Result<f64> {
        let mut x = x0.to_vec();
        for &(i, d) in deltas {
            x[i] += d;
        }
        let v = f(&x)?;
        if !v.is_finite() {
            return Err(Error::Evaluation("non-finite F at stencil point".into()));
        }
        Ok(v)
    };
    for i in 0..n {
        let fp = shifted(&[(i, h)])?;
        let fm = shifted(&[(i, -h)])?;
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let fpp = shifted(&[(i, h), (j, h)])?;
            let fpm = shifted(&[(i, h), (j, -h)])?;
            let fmp = shifted(&[(i, -h), (j, h)])?;
            let fmm = shifted(&[(i, -h), (j, -h)])?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(hess)
}

fn fd_gradient(f: &dyn Fn(&[f64]) -> Result<f64>, x0: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut g = vec![0.0; x0.len()];
    for i in 0..x0.len() {
        let mut xp = x0.to_vec();
        let mut xm = x0.to_vec();
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(&xp)? - f(&xm)?) / (2.0 * h);
    }
    Ok(g)
}

fn hessian_report(f: &dyn Fn(&[f64]) -> Result<f64>, x0: &[f64], h: f64) -> Result<HessianReport> {
    if !(h > 0.0) {
        return Err(Error::domain("Hessian step must be positive"));
    }
    let matrix = fd_hessian(f, x0, h)?;
    let max_abs = matrix.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let asym = matrix
        .iter()
        .zip(matrix.transpose().iter())
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    let sym = (&matrix + matrix.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = sym
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eigenvalues.sort_by(f64::total_cmp);
    let classification = Classification::from_eigenvalues(&eigenvalues);
    Ok(HessianReport {
        point: x0.to_vec(),
        matrix: sym,
        eigenvalues,
        classification,
        asymmetry: if max_abs > 0.0 { asym / max_abs } else { 0.0 },
        step: h,
    })
}

/// Hessian of F over the 2- or 5-parameter chart at `point`; the field
/// dimension must match the chart dimension.
pub fn hessian_at(
    point: &ChartPoint,
    field: &FieldNd,
    p: &ThetaParams,
    spec: &QuadSpec,
    h: f64,
) -> Result<HessianReport> {
    match (point, field) {
        (ChartPoint::P2(pt), FieldNd::Two(field)) => {
            let quad = field.quadrature(spec)?;
            hessian_report(&|c: &[f64]| f_params2(c, field, p, &quad), &[pt.x, pt.y], h)
        }
        (ChartPoint::P3(pt), FieldNd::Three(field)) => {
            let quad = field.quadrature(spec)?;
            hessian_report(&|c: &[f64]| f_params3(c, field, p, &quad), &pt.as_array(), h)
        }
        _ => Err(Error::domain(
            "chart point and firing field dimensions do not match",
        )),
    }
}

/// Chart gradient of F at one scale.
#[derive(Debug, Clone)]
pub struct StationarityRow {
    pub lambda: f64,
    pub gradient: Vec<f64>,
    pub max_abs: f64,
}

#[derive(Debug, Clone)]
pub struct StationarityReport {
    pub lattice: String,
    pub point: Vec<f64>,
    pub rows: Vec<StationarityRow>,
    pub max_abs: f64,
}

/// Finite-difference chart gradient of F at a named lattice for each scale
/// lambda, evaluated at `alpha * lambda^2` via the scaling identity.
/// Volume-stationary lattices (all layers strongly eutactic) have vanishing
/// gradients at every scale.
pub fn volume_stationarity_check(
    name: NamedLattice,
    field: &FieldNd,
    p: &ThetaParams,
    spec: &QuadSpec,
    lambdas: &[f64],
    h: f64,
) -> Result<StationarityReport> {
    let point = ChartPoint::for_named(name);
    stationarity_at(name.name(), &point, field, p, spec, lambdas, h)
}

/// Same check at an arbitrary chart point (control lattices).
pub fn stationarity_at(
    label: &str,
    point: &ChartPoint,
    field: &FieldNd,
    p: &ThetaParams,
    spec: &QuadSpec,
    lambdas: &[f64],
    h: f64,
) -> Result<StationarityReport> {
    if !(h > 0.0) {
        return Err(Error::domain("gradient step must be positive"));
    }
    if lambdas.iter().any(|l| *l <= 0.0) {
        return Err(Error::domain("lambdas must be positive"));
    }
    let x0 = point.coords();
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let pa = p.with_alpha(p.alpha * lambda * lambda)?;
        let gradient = match (point, field) {
            (ChartPoint::P2(_), FieldNd::Two(field)) => {
                let quad = field.quadrature(spec)?;
                fd_gradient(&|c: &[f64]| f_params2(c, field, &pa, &quad), &x0, h)?
            }
            (ChartPoint::P3(_), FieldNd::Three(field)) => {
                let quad = field.quadrature(spec)?;
                fd_gradient(&|c: &[f64]| f_params3(c, field, &pa, &quad), &x0, h)?
            }
            _ => {
                return Err(Error::domain(
                    "chart point and firing field dimensions do not match",
                ))
            }
        };
        let max_abs = gradient.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        rows.push(StationarityRow {
            lambda,
            gradient,
            max_abs,
        });
    }
    let max_abs = rows.iter().fold(0.0f64, |a, r| a.max(r.max_abs));
    Ok(StationarityReport {
        lattice: label.to_string(),
        point: x0,
        rows,
        max_abs,
    })
}

/// F along the degenerate orthorhombic family `L_t = chart(0, t)` with the
/// reference value F(A2) as a second column; exhibits boundary growth where
/// no maximizer exists.
pub fn degenerate_family_probe(
    field: &FiringField<2>,
    p: &ThetaParams,
    t_values: &[f64],
    spec: &QuadSpec,
) -> Result<SweepRecord> {
    if t_values.iter().any(|t| *t < 1.0) {
        return Err(Error::domain("degenerate family requires t >= 1"));
    }
    let quad = field.quadrature(spec)?;
    let f_a2 = fisher_functional(&crate::lattice::a2(), field, p, &quad)?;
    let rows = t_values
        .par_iter()
        .map(|&t| {
            let lat = LatticeParams2D::new(0.0, t)?.to_lattice();
            let f_t = fisher_functional(&lat, field, p, &quad)?;
            Ok(SweepRow {
                value: t,
                f: vec![f_t, f_a2],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SweepRecord {
        parameter: SweepParameter::DegenerateT,
        lattice_names: vec!["L_t".to_string(), "A2".to_string()],
        rows,
    }
    .validate()
}

/// Locate a sign change of `g` on `[lo, hi]` by bisection to `+-tol`;
/// requires opposite signs at the ends.
pub fn bisect_sign_change(
    g: &dyn Fn(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    let mut glo = g(lo)?;
    let ghi = g(hi)?;
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    if glo.signum() == ghi.signum() {
        return Err(Error::Evaluation(format!(
            "no sign change on [{lo}, {hi}]: g(lo)={glo:.3e}, g(hi)={ghi:.3e}"
        )));
    }
    while hi - lo > 2.0 * tol {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid)?;
        if gm == 0.0 {
            return Ok(mid);
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{a2, z2};
    use std::f64::consts::PI;

    const ALPHA_PAPER: f64 = 10.0 / PI;

    // Coarse rules keep unit tests fast; the integrands are converged well
    // below the asserted tolerances already at these node counts.
    fn fast() -> QuadSpec {
        QuadSpec {
            radial: 32,
            angular: 64,
            polar: 16,
        }
    }

    fn p(alpha: f64) -> ThetaParams {
        ThetaParams::new(alpha).unwrap()
    }

    #[test]
    fn scan_finds_triangular_maximizer() {
        let field = FiringField::<2>::uniform(0.5).unwrap();
        let grid = ScanGrid2D::new(26, 26, 0.8, 1.4).unwrap();
        let scan = scan_2d(&field, &p(ALPHA_PAPER), &grid, &fast()).unwrap();
        let cell = (0.5 / 25.0, 0.6 / 25.0);
        assert!((scan.argmax.x - 0.5).abs() <= cell.0 + 1e-12);
        assert!((scan.argmax.y - 3f64.sqrt() / 2.0).abs() <= cell.1 + 1e-12);
        assert!(scan.values.iter().any(|v| v.is_nan()));
        assert!(scan.argmax.value > scan.argmin.value);
    }

    #[test]
    fn scan_small_alpha_has_triangular_minimizer_and_boundary_max() {
        let field = FiringField::<2>::uniform(0.1).unwrap();
        let grid = ScanGrid2D::new(21, 21, 0.8, 1.4).unwrap();
        let scan = scan_2d(&field, &p(2.0 / PI), &grid, &fast()).unwrap();
        let cell = (0.5 / 20.0, 0.6 / 20.0);
        assert!((scan.argmin.x - 0.5).abs() <= cell.0 + 1e-12);
        assert!((scan.argmin.y - 3f64.sqrt() / 2.0).abs() <= cell.1 + 1e-12);
        // No interior maximizer: the max sits on the window boundary.
        let on_boundary = scan.argmax.y >= 1.4 - 1e-12
            || scan.argmax.y <= 0.8 + 1e-12
            || scan.argmax.x >= 0.5 - 1e-12
            || scan.argmax.x <= 1e-12;
        assert!(on_boundary, "argmax at ({}, {})", scan.argmax.x, scan.argmax.y);
    }

    #[test]
    fn scan_rejects_empty_masked_grid() {
        let field = FiringField::<2>::uniform(0.3).unwrap();
        let grid = ScanGrid2D::new(5, 5, 0.05, 0.4).unwrap();
        assert!(scan_2d(&field, &p(1.0), &grid, &fast()).is_err());
    }

    #[test]
    fn rectangular_line_symmetry() {
        // F(0, y) equals F from the basis-permuted parametrization (0, 1/y):
        // the same lattice up to rotation.
        let field = FiringField::<2>::uniform(0.3).unwrap();
        let quad = field.quadrature(&fast()).unwrap();
        let pp = p(ALPHA_PAPER);
        let f1 = f_params2(&[0.0, 1.3], &field, &pp, &quad).unwrap();
        let f2 = f_params2(&[0.0, 1.0 / 1.3], &field, &pp, &quad).unwrap();
        assert!((f1 - f2).abs() / f1 <= 1e-8);
    }

    #[test]
    fn refine_polishes_scan_argmax_to_a2() {
        let field = FiringField::<2>::uniform(0.5).unwrap();
        let start = LatticeParams2D::new(0.48, 0.88).unwrap();
        let out = refine_local(
            &start,
            &field,
            &p(ALPHA_PAPER),
            &fast(),
            &RefineOptions::default(),
        )
        .unwrap();
        assert!(out.converged);
        assert!((out.params.x - 0.5).abs() <= 1e-3, "x = {}", out.params.x);
        assert!(
            (out.params.y - 3f64.sqrt() / 2.0).abs() <= 1e-3,
            "y = {}",
            out.params.y
        );
    }

    #[test]
    fn refine_is_stable_at_the_maximizer() {
        let field = FiringField::<2>::uniform(0.5).unwrap();
        let a2p = LatticeParams2D::new(0.5, 3f64.sqrt() / 2.0).unwrap();
        let pp = p(ALPHA_PAPER);
        let quad = field.quadrature(&fast()).unwrap();
        let f_start = f_params2(&[a2p.x, a2p.y], &field, &pp, &quad).unwrap();
        let out = refine_local(&a2p, &field, &pp, &fast(), &RefineOptions::default()).unwrap();
        assert!((out.params.x - a2p.x).abs() <= 1e-6);
        assert!((out.params.y - a2p.y).abs() <= 1e-6);
        assert!(out.value >= f_start - 1e-12);
    }

    #[test]
    fn refine_detects_boundary_growth() {
        let field = FiringField::<2>::uniform(0.1).unwrap();
        let start = LatticeParams2D::new(0.1, 1.0).unwrap();
        let out = refine_local(
            &start,
            &field,
            &p(2.0 / PI),
            &fast(),
            &RefineOptions::default(),
        )
        .unwrap();
        assert!(!out.converged, "ended at ({}, {})", out.params.x, out.params.y);
        // Either cap is a degenerate direction (y and 1/y are the same
        // rectangular lattice up to rotation).
        assert!(out.params.y >= 3.9 || out.params.y <= 0.56, "y = {}", out.params.y);
    }

    #[test]
    fn sweep_radius_difference_column() {
        let lats = vec![("A2".to_string(), a2()), ("Z2".to_string(), z2())];
        let rs = [0.1, 0.3, 0.5];
        let rec = sweep_radius(&lats, &rs, &p(ALPHA_PAPER), &fast()).unwrap();
        let diff = rec.difference_column().unwrap();
        assert!(diff.iter().all(|d| *d > 0.0), "{diff:?}");
        assert!(sweep_radius(&lats, &[0.3, 0.1], &p(1.0), &fast()).is_err());
    }

    #[test]
    fn sweep_radius_difference_is_continuous() {
        let lats = vec![("A2".to_string(), a2()), ("Z2".to_string(), z2())];
        let rs: Vec<f64> = (0..11).map(|i| 0.50 + 0.01 * i as f64).collect();
        let rec = sweep_radius(&lats, &rs, &p(ALPHA_PAPER), &fast()).unwrap();
        let d = rec.difference_column().unwrap();
        let floor = 1e-9 * d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 1..d.len() - 1 {
            let secant = 0.5 * (d[i + 1] - d[i - 1]).abs();
            assert!(
                (d[i + 1] - d[i]).abs() < 5.0 * (secant + floor),
                "jump at {}",
                rs[i]
            );
        }
    }

    #[test]
    fn sweep_alpha_ordering_at_experimental_radius() {
        let lats = vec![("A2".to_string(), a2()), ("Z2".to_string(), z2())];
        let rec = sweep_alpha(&lats, &[1.3, 3.0, 5.0], 0.16, &p(1.0), &fast()).unwrap();
        for row in &rec.rows {
            assert!(row.f[0] > row.f[1], "alpha = {}", row.value);
        }
    }

    #[test]
    fn compare_3d_ordering_at_reference_alpha() {
        let field = FiringField::<3>::uniform(0.3).unwrap();
        let rec = compare_3d(&field, &p(ALPHA_PAPER), &fast()).unwrap();
        let f = &rec.rows[0].f;
        assert!(f[0] > f[1] && f[1] > f[2], "{f:?}");
    }

    #[test]
    fn pointwise_q_ordering_inside_small_balls() {
        // Q_D3(y) > Q_D3*(y) > Q_Z3(y) for every sampled y in B_0.1.
        use crate::rng::CounterRng;
        use crate::theta::q_value;
        let pp = p(ALPHA_PAPER);
        let (fcc, bcc, sc) = (crate::lattice::d3(), crate::lattice::d3_star(), crate::lattice::z3());
        let mut rng = CounterRng::new(7);
        for _ in 0..100 {
            let y: nalgebra::SVector<f64, 3> = rng.uniform_in_ball(0.1);
            let (qf, qb, qs) = (
                q_value(&fcc, &y, &pp).unwrap(),
                q_value(&bcc, &y, &pp).unwrap(),
                q_value(&sc, &y, &pp).unwrap(),
            );
            assert!(qf > qb && qb > qs, "at {y:?}: {qf} {qb} {qs}");
        }
    }

    #[test]
    fn scan_argmax_is_stable_under_refinement() {
        // Doubling the grid resolution moves the argmax by at most one
        // coarse cell.
        let field = FiringField::<2>::uniform(0.5).unwrap();
        let coarse = ScanGrid2D::new(17, 17, 0.8, 1.4).unwrap();
        let fine = ScanGrid2D::new(33, 33, 0.8, 1.4).unwrap();
        let a = scan_2d(&field, &p(ALPHA_PAPER), &coarse, &fast()).unwrap();
        let b = scan_2d(&field, &p(ALPHA_PAPER), &fine, &fast()).unwrap();
        assert!((a.argmax.x - b.argmax.x).abs() <= 0.5 / 16.0 + 1e-12);
        assert!((a.argmax.y - b.argmax.y).abs() <= 0.6 / 16.0 + 1e-12);
    }

    #[test]
    fn degenerate_family_regimes_at_reference_alpha() {
        let pp = p(ALPHA_PAPER);
        // Large field: the square lattice already beats A2 and the family
        // grows from the start.
        let field = FiringField::<2>::uniform(0.6).unwrap();
        let rec = degenerate_family_probe(&field, &pp, &[1.0, 8.0, 16.0], &fast()).unwrap();
        assert!(rec.rows[0].f[0] > rec.rows[0].f[1]);
        // Moderate field: A2 beats the family up to t = 9, but the boundary
        // growth of F along degenerate shapes overtakes from t = 10 (there
        // is no strict global maximizer at any alpha).
        let field = FiringField::<2>::uniform(0.3).unwrap();
        let ts: Vec<f64> = (1..=16).map(|t| t as f64).collect();
        let rec = degenerate_family_probe(&field, &pp, &ts, &fast()).unwrap();
        for row in &rec.rows {
            let expect_exceed = row.value >= 10.0;
            assert_eq!(
                row.f[0] > row.f[1],
                expect_exceed,
                "t = {}: F = {} vs {}",
                row.value,
                row.f[0],
                row.f[1]
            );
        }
    }

    #[test]
    fn square_lattice_dominates_beyond_the_crossover() {
        let lats = vec![("A2".to_string(), a2()), ("Z2".to_string(), z2())];
        let rec = sweep_radius(&lats, &[0.59, 0.65, 0.7], &p(ALPHA_PAPER), &fast()).unwrap();
        for d in rec.difference_column().unwrap() {
            assert!(d < 0.0, "{d}");
        }
    }

    #[test]
    fn classification_rules() {
        assert_eq!(
            Classification::from_eigenvalues(&[-2.0, -1.0]),
            Classification::LocalMax
        );
        assert_eq!(
            Classification::from_eigenvalues(&[0.5, 2.0]),
            Classification::LocalMin
        );
        assert_eq!(
            Classification::from_eigenvalues(&[-1.0, 3.0]),
            Classification::Saddle
        );
        assert_eq!(
            Classification::from_eigenvalues(&[1e-12, 1.0]),
            Classification::Degenerate
        );
    }

    #[test]
    fn hessian_classifies_a2_extrema() {
        let a2pt = ChartPoint::for_named(NamedLattice::A2);
        let field = FieldNd::Two(FiringField::<2>::uniform(0.5).unwrap());
        let rep = hessian_at(&a2pt, &field, &p(ALPHA_PAPER), &fast(), HESS_STEP_DEFAULT).unwrap();
        assert_eq!(rep.classification, Classification::LocalMax);
        assert!(rep.asymmetry <= 1e-6);
        // Small alpha and small field: A2 becomes a local minimizer.
        let field = FieldNd::Two(FiringField::<2>::uniform(0.1).unwrap());
        let rep = hessian_at(&a2pt, &field, &p(2.0 / PI), &fast(), HESS_STEP_DEFAULT).unwrap();
        assert_eq!(rep.classification, Classification::LocalMin);
    }

    #[test]
    fn hessian_classification_is_step_invariant() {
        let a2pt = ChartPoint::for_named(NamedLattice::A2);
        let field = FieldNd::Two(FiringField::<2>::uniform(0.5).unwrap());
        for h in [1e-3, 5e-4, 2.5e-4] {
            let rep = hessian_at(&a2pt, &field, &p(ALPHA_PAPER), &fast(), h).unwrap();
            assert_eq!(rep.classification, Classification::LocalMax, "h = {h}");
        }
    }

    #[test]
    fn hessian_rejects_dimension_mismatch() {
        let a2pt = ChartPoint::for_named(NamedLattice::A2);
        let field = FieldNd::Three(FiringField::<3>::uniform(0.3).unwrap());
        assert!(hessian_at(&a2pt, &field, &p(1.0), &fast(), 1e-3).is_err());
    }

    #[test]
    fn stationary_lattices_have_flat_chart_gradients() {
        let field2 = FieldNd::Two(FiringField::<2>::uniform(0.3).unwrap());
        for name in [NamedLattice::A2, NamedLattice::Z2] {
            let rep = volume_stationarity_check(
                name,
                &field2,
                &p(ALPHA_PAPER),
                &fast(),
                &[0.7, 1.0, 1.5],
                GRAD_STEP_DEFAULT,
            )
            .unwrap();
            assert!(rep.max_abs <= 1e-5, "{name:?}: {}", rep.max_abs);
        }
    }

    #[test]
    fn rectangular_lattice_is_not_stationary() {
        let field2 = FieldNd::Two(FiringField::<2>::uniform(0.3).unwrap());
        let pt = ChartPoint::P2(LatticeParams2D::new(0.0, 1.3).unwrap());
        let rep = stationarity_at(
            "rect",
            &pt,
            &field2,
            &p(ALPHA_PAPER),
            &fast(),
            &[1.0],
            GRAD_STEP_DEFAULT,
        )
        .unwrap();
        assert!(rep.max_abs > 1e-3, "max grad = {}", rep.max_abs);
    }

    #[test]
    fn stationarity_gradient_scales_quadratically_in_step() {
        // Richardson consistency at a stationary lattice: the FD gradient is
        // O(h^2), so doubling the step enlarges it by about 4.
        let field2 = FieldNd::Two(FiringField::<2>::uniform(0.3).unwrap());
        let g = |h: f64| {
            volume_stationarity_check(
                NamedLattice::A2,
                &field2,
                &p(ALPHA_PAPER),
                &fast(),
                &[1.0],
                h,
            )
            .unwrap()
            .rows[0]
                .gradient[1]
                .abs()
        };
        let (g1, g2) = (g(1e-3), g(2e-3));
        let ratio = g2 / g1;
        assert!((2.0..=8.0).contains(&ratio), "ratio = {ratio} ({g1} vs {g2})");
    }

    #[test]
    fn degenerate_family_exhibits_boundary_growth() {
        let field = FiringField::<2>::uniform(0.1).unwrap();
        let rec =
            degenerate_family_probe(&field, &p(2.0 / PI), &[1.0, 2.0, 4.0, 8.0, 16.0], &fast())
                .unwrap();
        assert!(rec.rows.iter().any(|r| r.f[0] > r.f[1]));
        assert!(degenerate_family_probe(&field, &p(1.0), &[0.5], &fast()).is_err());
    }

    #[test]
    fn bisection_locates_the_radius_crossover() {
        let lats = vec![("A2".to_string(), a2()), ("Z2".to_string(), z2())];
        let pp = p(ALPHA_PAPER);
        let g = |r: f64| {
            let rec = sweep_radius(&lats, &[r], &pp, &fast())?;
            Ok(rec.rows[0].f[0] - rec.rows[0].f[1])
        };
        let r = bisect_sign_change(&g, 0.5, 0.7, 0.002).unwrap();
        assert!((0.57..0.59).contains(&r), "crossover at {r}");
    }
}
