//! Lattice construction, fundamental-domain charts, duals, shells and
//! strong-eutaxy checks.
//!
//! A lattice is stored as a `D x D` basis matrix whose columns are the basis
//! vectors. Unit-covolume lattices in dimension 2 are parametrized by the
//! chart `(x, y) -> Z(1/sqrt(y), 0) + Z(x/sqrt(y), sqrt(y))`, with fundamental
//! domain `D2 = {0 <= x <= 1/2, y > 0, x^2 + y^2 >= 1}`; in dimension 3 by the
//! five-parameter chart below (no fundamental-domain membership is checked in
//! 3D).

use crate::{Error, Result};
use nalgebra::{SMatrix, SVector};

/// Determinants below this are treated as rank deficiency.
const DET_FLOOR: f64 = 1e-12;

/// Absolute tolerance for grouping lattice vectors into shells by norm.
pub const SHELL_NORM_TOL: f64 = 1e-9;

/// Slack applied to the `x^2 + y^2 >= 1` fundamental-domain test so that
/// boundary points such as A2 at (1/2, sqrt(3)/2) are not rejected by
/// floating-point rounding.
const D2_BOUNDARY_SLACK: f64 = 1e-12;

/// Determinant by closed form; only dimensions 2 and 3 are instantiated.
pub(crate) fn det_small<const D: usize>(m: &SMatrix<f64, D, D>) -> f64 {
    match D {
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        _ => panic!("unsupported dimension {D}"),
    }
}

/// Inverse by adjugate; caller guarantees a nonzero determinant.
pub(crate) fn inverse_small<const D: usize>(m: &SMatrix<f64, D, D>) -> SMatrix<f64, D, D> {
    let det = det_small(m);
    let mut out = SMatrix::<f64, D, D>::zeros();
    match D {
        1 => out[(0, 0)] = 1.0 / det,
        2 => {
            out[(0, 0)] = m[(1, 1)] / det;
            out[(0, 1)] = -m[(0, 1)] / det;
            out[(1, 0)] = -m[(1, 0)] / det;
            out[(1, 1)] = m[(0, 0)] / det;
        }
        3 => {
            // Cyclic index pairs absorb the cofactor signs.
            for i in 0..3 {
                for j in 0..3 {
                    let (a, b) = ((i + 1) % 3, (i + 2) % 3);
                    let (c, e) = ((j + 1) % 3, (j + 2) % 3);
                    out[(j, i)] = (m[(a, c)] * m[(b, e)] - m[(a, e)] * m[(b, c)]) / det;
                }
            }
        }
        _ => panic!("unsupported dimension {D}"),
    }
    out
}

/// Full-rank lattice in dimension `D` with cached covolume.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice<const D: usize> {
    basis: SMatrix<f64, D, D>,
    covolume: f64,
}

impl<const D: usize> Lattice<D> {
    /// Builds a lattice from basis columns; fails on rank deficiency.
    pub fn new(basis: SMatrix<f64, D, D>) -> Result<Self> {
        let det = det_small(&basis).abs();
        if !det.is_finite() || det <= DET_FLOOR {
            return Err(Error::domain(format!(
                "lattice basis is rank deficient (|det| = {det:.3e})"
            )));
        }
        Ok(Lattice {
            basis,
            covolume: det,
        })
    }

    pub fn dim(&self) -> usize {
        D
    }

    /// Basis matrix; columns are the basis vectors.
    pub fn basis(&self) -> &SMatrix<f64, D, D> {
        &self.basis
    }

    pub fn covolume(&self) -> f64 {
        self.covolume
    }

    /// Dual lattice `L* = {q : q.p in Z for all p in L}`, whose basis is the
    /// inverse transpose of this basis. `covolume(L*) = 1/covolume(L)`.
    pub fn dual(&self) -> Lattice<D> {
        Lattice {
            basis: inverse_small(&self.basis).transpose(),
            covolume: 1.0 / self.covolume,
        }
    }

    /// Inverse of the basis matrix.
    pub fn basis_inverse(&self) -> SMatrix<f64, D, D> {
        inverse_small(&self.basis)
    }

    /// The lattice `lambda L`.
    pub fn scale(&self, lambda: f64) -> Result<Lattice<D>> {
        if lambda <= 0.0 || !lambda.is_finite() {
            return Err(Error::domain("scale factor must be positive"));
        }
        Ok(Lattice {
            basis: self.basis * lambda,
            covolume: self.covolume * lambda.powi(D as i32),
        })
    }

    /// Sum of basis-vector norms; upper bound for the fundamental-cell
    /// diameter used in truncation estimates.
    pub fn cell_diameter_bound(&self) -> f64 {
        (0..D).map(|i| self.basis.column(i).norm()).sum()
    }

    /// All lattice points `p = B n` with `|p| <= radius`, enumerated over the
    /// integer bounding box derived from the rows of `B^{-1}`.
    pub fn points_within(&self, radius: f64) -> Vec<SVector<f64, D>> {
        let binv = self.basis_inverse();
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for i in 0..D {
            let s = binv.row(i).norm() * radius;
            lo[i] = (-s).floor() as i64 - 1;
            hi[i] = s.ceil() as i64 + 1;
        }
        let r2 = radius * radius + SHELL_NORM_TOL;
        let mut out = Vec::new();
        let mut idx = lo;
        'outer: loop {
            let mut n = SVector::<f64, D>::zeros();
            for i in 0..D {
                n[i] = idx[i] as f64;
            }
            let p = self.basis * n;
            if p.norm_squared() <= r2 {
                out.push(p);
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
        out
    }

    /// The first `count` shells (distinct nonzero vector norms, grouped at
    /// absolute tolerance [`SHELL_NORM_TOL`]), radii strictly increasing.
    pub fn shells(&self, count: usize) -> Result<Vec<Shell<D>>> {
        if count == 0 {
            return Err(Error::domain("shell count must be >= 1"));
        }
        // Grow the search radius until `count` distinct norms are present.
        let mut radius = 2.0 * self.basis.column(0).norm().max(1.0);
        loop {
            let mut pts: Vec<(f64, SVector<f64, D>)> = self
                .points_within(radius)
                .into_iter()
                .filter_map(|p| {
                    let n = p.norm();
                    (n > SHELL_NORM_TOL).then_some((n, p))
                })
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut shells: Vec<Shell<D>> = Vec::new();
            for (n, p) in pts {
                match shells.last_mut() {
                    Some(s) if (n - s.radius).abs() <= SHELL_NORM_TOL => s.vectors.push(p),
                    _ => shells.push(Shell {
                        radius: n,
                        vectors: vec![p],
                    }),
                }
            }
            // Only shells strictly inside the search ball are complete.
            let complete = shells
                .iter()
                .take_while(|s| s.radius < radius - 2.0 * SHELL_NORM_TOL)
                .count();
            if complete >= count {
                shells.truncate(count);
                return Ok(shells);
            }
            radius *= 1.5;
        }
    }

    /// All shells with radius at most `max_radius`.
    pub fn shells_up_to(&self, max_radius: f64) -> Vec<Shell<D>> {
        let mut pts: Vec<(f64, SVector<f64, D>)> = self
            .points_within(max_radius)
            .into_iter()
            .filter_map(|p| {
                let n = p.norm();
                (n > SHELL_NORM_TOL && n <= max_radius + SHELL_NORM_TOL).then_some((n, p))
            })
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut shells: Vec<Shell<D>> = Vec::new();
        for (n, p) in pts {
            match shells.last_mut() {
                Some(s) if (n - s.radius).abs() <= SHELL_NORM_TOL => s.vectors.push(p),
                _ => shells.push(Shell {
                    radius: n,
                    vectors: vec![p],
                }),
            }
        }
        shells
    }

    /// Decides lattice equality as point sets: every basis vector of each
    /// lattice must have integer coordinates (within `tol`) in the other's
    /// basis. Entrywise basis comparison would be wrong; unimodular
    /// equivalence is the correct notion.
    pub fn same_point_set(&self, other: &Lattice<D>, tol: f64) -> bool {
        let integral = |a: &Lattice<D>, b: &Lattice<D>| -> bool {
            let coords = b.basis_inverse() * a.basis;
            coords.iter().all(|c| (c - c.round()).abs() <= tol)
        };
        integral(self, other) && integral(other, self)
    }
}

/// A layer `m = {p in L : |p| = radius}`; vectors come in +/- pairs.
#[derive(Debug, Clone)]
pub struct Shell<const D: usize> {
    pub radius: f64,
    pub vectors: Vec<SVector<f64, D>>,
}

impl<const D: usize> Shell<D> {
    /// Number of vectors in the layer (always even, `2k`).
    pub fn count(&self) -> usize {
        self.vectors.len()
    }
}

/// Strong eutaxy: `sum_p (p.x)^2/|p|^2 = (2k/d) |x|^2` for all `x`,
/// equivalently `M = sum_p p p^T / |p|^2` equals `(2k/d) I`. Returns true
/// iff the max-norm deviation of `M` from that multiple of the identity is
/// at most `tol`.
pub fn is_strongly_eutactic<const D: usize>(shell: &Shell<D>, tol: f64) -> bool {
    eutaxy_deviation(shell) <= tol
}

/// Max-norm deviation `||M - (2k/d) I||_max` used by [`is_strongly_eutactic`].
pub fn eutaxy_deviation<const D: usize>(shell: &Shell<D>) -> f64 {
    assert!(!shell.vectors.is_empty(), "shell must be nonempty");
    let mut m = SMatrix::<f64, D, D>::zeros();
    for p in &shell.vectors {
        m += p * p.transpose() / p.norm_squared();
    }
    let target = shell.vectors.len() as f64 / D as f64;
    let mut dev: f64 = 0.0;
    for i in 0..D {
        for j in 0..D {
            let t = if i == j { target } else { 0.0 };
            dev = dev.max((m[(i, j)] - t).abs());
        }
    }
    dev
}

/// Fundamental-domain coordinates for unit-covolume 2D lattices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeParams2D {
    pub x: f64,
    pub y: f64,
}

impl LatticeParams2D {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(y > 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(Error::domain(format!(
                "invalid 2D lattice parameters (x={x}, y={y}); y must be positive"
            )));
        }
        Ok(LatticeParams2D { x, y })
    }

    /// Membership in `D2 = {0 <= x <= 1/2, x^2 + y^2 >= 1}`. Points outside
    /// are legal chart inputs; scans are responsible for domain restriction.
    pub fn in_fundamental_domain(&self) -> bool {
        (0.0..=0.5).contains(&self.x) && self.x * self.x + self.y * self.y >= 1.0 - D2_BOUNDARY_SLACK
    }

    /// The unit-covolume lattice `Z(1/sqrt(y), 0) + Z(x/sqrt(y), sqrt(y))`.
    pub fn to_lattice(&self) -> Lattice<2> {
        let sy = self.y.sqrt();
        let basis = SMatrix::<f64, 2, 2>::from_columns(&[
            SVector::<f64, 2>::new(1.0 / sy, 0.0),
            SVector::<f64, 2>::new(self.x / sy, sy),
        ]);
        Lattice::new(basis).expect("chart basis is full rank for y > 0")
    }
}

/// Five-parameter chart for unit-covolume 3D lattices. Membership in a 3D
/// fundamental domain is not checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeParams3D {
    pub u: f64,
    pub v: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl LatticeParams3D {
    pub fn new(u: f64, v: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        if !(u > 0.0) || !(v > 0.0) || ![x, y, z].iter().all(|t| t.is_finite()) {
            return Err(Error::domain(format!(
                "invalid 3D lattice parameters (u={u}, v={v}); u and v must be positive"
            )));
        }
        Ok(LatticeParams3D { u, v, x, y, z })
    }

    /// `2^(1/6) [ Z(1/sqrt(u),0,0) + Z(x/sqrt(u), v/sqrt(u), 0)
    ///          + Z(y/sqrt(u), v z/sqrt(u), u/(v sqrt(2))) ]`.
    pub fn to_lattice(&self) -> Lattice<3> {
        let c = 2f64.powf(1.0 / 6.0);
        let su = self.u.sqrt();
        let basis = SMatrix::<f64, 3, 3>::from_columns(&[
            SVector::<f64, 3>::new(c / su, 0.0, 0.0),
            SVector::<f64, 3>::new(c * self.x / su, c * self.v / su, 0.0),
            SVector::<f64, 3>::new(
                c * self.y / su,
                c * self.v * self.z / su,
                c * self.u / (self.v * 2f64.sqrt()),
            ),
        ]);
        Lattice::new(basis).expect("chart basis is full rank for u, v > 0")
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.u, self.v, self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 5]) -> Result<Self> {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }
}

/// Construct the unit-covolume lattice for 2D chart coordinates.
pub fn lattice_from_params2d(p: &LatticeParams2D) -> Lattice<2> {
    p.to_lattice()
}

/// Construct the unit-covolume lattice for 3D chart coordinates.
pub fn lattice_from_params3d(p: &LatticeParams3D) -> Lattice<3> {
    p.to_lattice()
}

/// The five reference lattices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedLattice {
    /// Triangular: `sqrt(2/sqrt(3)) [ Z(1,0) + Z(1/2, sqrt(3)/2) ]`.
    A2,
    /// Square.
    Z2,
    /// Simple cubic.
    Z3,
    /// Face-centred cubic: `2^(-1/3) [ Z(1,0,1) + Z(0,1,1) + Z(1,1,0) ]`.
    D3,
    /// Body-centred cubic: `2^(1/3) [ Z(1,0,0) + Z(0,1,0) + Z(1/2,1/2,1/2) ]`.
    D3Star,
}

impl NamedLattice {
    pub const ALL: [NamedLattice; 5] = [
        NamedLattice::A2,
        NamedLattice::Z2,
        NamedLattice::Z3,
        NamedLattice::D3,
        NamedLattice::D3Star,
    ];

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "a2" => Ok(NamedLattice::A2),
            "z2" => Ok(NamedLattice::Z2),
            "z3" => Ok(NamedLattice::Z3),
            "d3" => Ok(NamedLattice::D3),
            "d3star" | "d3*" => Ok(NamedLattice::D3Star),
            other => Err(Error::domain(format!(
                "unknown lattice '{other}' (expected A2, Z2, Z3, D3 or D3star)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NamedLattice::A2 => "A2",
            NamedLattice::Z2 => "Z2",
            NamedLattice::Z3 => "Z3",
            NamedLattice::D3 => "D3",
            NamedLattice::D3Star => "D3star",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            NamedLattice::A2 | NamedLattice::Z2 => 2,
            _ => 3,
        }
    }

    /// Chart coordinates representing this lattice (up to isometry for D3,
    /// whose chart point is the FCC lattice rotated by 45 degrees about the
    /// z axis).
    pub fn chart_point(&self) -> Vec<f64> {
        match self {
            NamedLattice::A2 => vec![0.5, 3f64.sqrt() / 2.0],
            NamedLattice::Z2 => vec![0.0, 1.0],
            NamedLattice::Z3 => vec![2f64.powf(1.0 / 3.0), 1.0, 0.0, 0.0, 0.0],
            NamedLattice::D3 => vec![1.0, 1.0, 0.0, 0.5, 0.5],
            NamedLattice::D3Star => vec![2f64.powf(-1.0 / 3.0), 1.0, 0.0, 0.5, 0.5],
        }
    }
}

/// Unit-covolume lattice of either dimension, for dynamic dispatch at the
/// CLI boundary.
#[derive(Debug, Clone)]
pub enum LatticeNd {
    Two(Lattice<2>),
    Three(Lattice<3>),
}

impl LatticeNd {
    pub fn dim(&self) -> usize {
        match self {
            LatticeNd::Two(_) => 2,
            LatticeNd::Three(_) => 3,
        }
    }
}

/// The unit-covolume lattice exactly as defined for each name.
pub fn named_lattice(name: NamedLattice) -> LatticeNd {
    match name {
        NamedLattice::A2 => LatticeNd::Two(a2()),
        NamedLattice::Z2 => LatticeNd::Two(z2()),
        NamedLattice::Z3 => LatticeNd::Three(z3()),
        NamedLattice::D3 => LatticeNd::Three(d3()),
        NamedLattice::D3Star => LatticeNd::Three(d3_star()),
    }
}

pub fn a2() -> Lattice<2> {
    let s = (2.0 / 3f64.sqrt()).sqrt();
    Lattice::new(SMatrix::<f64, 2, 2>::from_columns(&[
        SVector::<f64, 2>::new(s, 0.0),
        SVector::<f64, 2>::new(s * 0.5, s * 3f64.sqrt() / 2.0),
    ]))
    .expect("A2 basis")
}

pub fn z2() -> Lattice<2> {
    Lattice::new(SMatrix::<f64, 2, 2>::identity()).expect("Z2 basis")
}

pub fn z3() -> Lattice<3> {
    Lattice::new(SMatrix::<f64, 3, 3>::identity()).expect("Z3 basis")
}

pub fn d3() -> Lattice<3> {
    let c = 2f64.powf(-1.0 / 3.0);
    Lattice::new(SMatrix::<f64, 3, 3>::from_columns(&[
        SVector::<f64, 3>::new(c, 0.0, c),
        SVector::<f64, 3>::new(0.0, c, c),
        SVector::<f64, 3>::new(c, c, 0.0),
    ]))
    .expect("D3 basis")
}

pub fn d3_star() -> Lattice<3> {
    let c = 2f64.powf(1.0 / 3.0);
    Lattice::new(SMatrix::<f64, 3, 3>::from_columns(&[
        SVector::<f64, 3>::new(c, 0.0, 0.0),
        SVector::<f64, 3>::new(0.0, c, 0.0),
        SVector::<f64, 3>::new(c * 0.5, c * 0.5, c * 0.5),
    ]))
    .expect("D3* basis")
}

#[cfg(test)]
mod tests {
    use super::*;

    const A2_FIRST_NORM: f64 = 1.074569931823542; // sqrt(2/sqrt(3))

    #[test]
    fn named_lattices_have_unit_covolume() {
        for name in NamedLattice::ALL {
            let cov = match named_lattice(name) {
                LatticeNd::Two(l) => l.covolume(),
                LatticeNd::Three(l) => l.covolume(),
            };
            assert!((cov - 1.0).abs() <= 1e-12, "{name:?}: covolume {cov}");
        }
    }

    #[test]
    fn chart_2d_reproduces_square_and_triangular() {
        let z = LatticeParams2D::new(0.0, 1.0).unwrap().to_lattice();
        let z2 = z2();
        for i in 0..2 {
            for j in 0..2 {
                assert!((z.basis()[(i, j)] - z2.basis()[(i, j)]).abs() <= 1e-12);
            }
        }
        let a = LatticeParams2D::new(0.5, 3f64.sqrt() / 2.0)
            .unwrap()
            .to_lattice();
        assert!((a.covolume() - 1.0).abs() <= 1e-12);
        let shell = &a.shells(1).unwrap()[0];
        assert!((shell.radius - A2_FIRST_NORM).abs() <= 1e-12);
        assert!(a.same_point_set(&a2(), 1e-9));
    }

    #[test]
    fn chart_2d_substitution_example() {
        let l = LatticeParams2D::new(0.0, 4.0).unwrap().to_lattice();
        assert!((l.basis()[(0, 0)] - 0.5).abs() <= 1e-12);
        assert!((l.basis()[(1, 1)] - 2.0).abs() <= 1e-12);
        assert!((l.covolume() - 1.0).abs() <= 1e-12);
        let d = l.dual();
        assert!((d.basis()[(0, 0)] - 2.0).abs() <= 1e-12);
        assert!((d.basis()[(1, 1)] - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn chart_2d_rejects_nonpositive_y() {
        assert!(LatticeParams2D::new(0.1, 0.0).is_err());
        assert!(LatticeParams2D::new(0.1, -1.0).is_err());
    }

    #[test]
    fn chart_3d_reproduces_cubic_and_centred_lattices() {
        let l = LatticeParams3D::new(2f64.powf(1.0 / 3.0), 1.0, 0.0, 0.0, 0.0)
            .unwrap()
            .to_lattice();
        let z = z3();
        for i in 0..3 {
            for j in 0..3 {
                assert!((l.basis()[(i, j)] - z.basis()[(i, j)]).abs() <= 1e-12);
            }
        }
        // FCC chart point: shortest vector norm matches 2^(-1/3) (1,0,1).
        let fcc = LatticeParams3D::new(1.0, 1.0, 0.0, 0.5, 0.5)
            .unwrap()
            .to_lattice();
        assert!((fcc.covolume() - 1.0).abs() <= 1e-12);
        let shell = &fcc.shells(1).unwrap()[0];
        let expect = 2f64.powf(-1.0 / 3.0) * 2f64.sqrt();
        assert!((shell.radius - expect).abs() <= 1e-12);
        // BCC chart point is exactly D3*, and its dual is D3 as a point set.
        let bcc = LatticeParams3D::new(2f64.powf(-1.0 / 3.0), 1.0, 0.0, 0.5, 0.5)
            .unwrap()
            .to_lattice();
        assert!(bcc.same_point_set(&d3_star(), 1e-9));
        assert!(bcc.dual().same_point_set(&d3(), 1e-9));
    }

    #[test]
    fn chart_3d_rejects_nonpositive_u_or_v() {
        assert!(LatticeParams3D::new(0.0, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(LatticeParams3D::new(1.0, -0.5, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn dual_relationships() {
        assert!(z2().dual().same_point_set(&z2(), 1e-9));
        assert!(d3().dual().same_point_set(&d3_star(), 1e-9));
        assert!(d3_star().dual().same_point_set(&d3(), 1e-9));
        // D3 and D3* are dual but not unimodular: not the same point set.
        assert!(!d3().same_point_set(&d3_star(), 1e-9));
        let cov = d3().dual().covolume();
        assert!((cov - 1.0 / d3().covolume()).abs() <= 1e-12);
    }

    #[test]
    fn dual_of_dual_is_original_point_set() {
        let lattices = [
            a2(),
            z2(),
            LatticeParams2D::new(0.23, 1.17).unwrap().to_lattice(),
        ];
        for l in &lattices {
            let dd = l.dual().dual();
            assert!(dd.same_point_set(l, 1e-9));
            // Point-set check on shells up to radius 3.
            let s1 = l.shells_up_to(3.0);
            let s2 = dd.shells_up_to(3.0);
            assert_eq!(
                s1.iter().map(Shell::count).collect::<Vec<_>>(),
                s2.iter().map(Shell::count).collect::<Vec<_>>()
            );
            for (a, b) in s1.iter().zip(&s2) {
                assert!((a.radius - b.radius).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn shell_counts_and_radii() {
        let s = z2().shells(2).unwrap();
        assert_eq!(s[0].count(), 4);
        assert!((s[0].radius - 1.0).abs() <= 1e-12);
        assert_eq!(s[1].count(), 4);
        assert!((s[1].radius - 2f64.sqrt()).abs() <= 1e-12);

        let s = a2().shells(1).unwrap();
        assert_eq!(s[0].count(), 6);
        assert!((s[0].radius - A2_FIRST_NORM).abs() <= 1e-12);

        let s = z3().shells(1).unwrap();
        assert_eq!(s[0].count(), 6);
        assert!((s[0].radius - 1.0).abs() <= 1e-12);

        let s = d3().shells(1).unwrap();
        assert_eq!(s[0].count(), 12);

        // BCC nearest neighbours.
        let s = d3_star().shells(1).unwrap();
        assert_eq!(s[0].count(), 8);
        assert!((s[0].radius - 2f64.powf(1.0 / 3.0) * 3f64.sqrt() / 2.0).abs() <= 1e-12);
    }

    #[test]
    fn shells_are_plus_minus_symmetric() {
        for l in [
            LatticeParams2D::new(0.31, 1.21).unwrap().to_lattice(),
            a2(),
        ] {
            for shell in l.shells(4).unwrap() {
                assert_eq!(shell.count() % 2, 0);
                for p in &shell.vectors {
                    let has_neg = shell.vectors.iter().any(|q| (q + p).norm() <= 1e-9);
                    assert!(has_neg, "missing -p for {p:?}");
                }
                for p in &shell.vectors {
                    assert!((p.norm() - shell.radius).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn strong_eutaxy_of_reference_lattices() {
        // First shell of Z2: M = diag(2, 2) = (4/2) I.
        let s = z2().shells(1).unwrap();
        assert!(is_strongly_eutactic(&s[0], 1e-9));
        // First shell of A2: M = 3 I over the 6 shell vectors.
        let s = a2().shells(1).unwrap();
        assert!(eutaxy_deviation(&s[0]) <= 1e-12);
        // All shells up to radius 3 of the five reference lattices.
        let check2 = |l: &Lattice<2>| {
            let shells = l.shells_up_to(3.0);
            assert!(!shells.is_empty());
            shells
                .iter()
                .for_each(|s| assert!(is_strongly_eutactic(s, 1e-9)));
        };
        let check3 = |l: &Lattice<3>| {
            let shells = l.shells_up_to(3.0);
            assert!(!shells.is_empty());
            shells
                .iter()
                .for_each(|s| assert!(is_strongly_eutactic(s, 1e-9)));
        };
        check2(&a2());
        check2(&z2());
        check3(&z3());
        check3(&d3());
        check3(&d3_star());
    }

    #[test]
    fn rectangular_lattice_is_not_eutactic() {
        let l = LatticeParams2D::new(0.0, 1.3).unwrap().to_lattice();
        let s = l.shells(1).unwrap();
        // First shell is the +-shorter axis pair: M = diag(2, 0).
        assert_eq!(s[0].count(), 2);
        assert!(!is_strongly_eutactic(&s[0], 1e-9));
        assert!((eutaxy_deviation(&s[0]) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn fundamental_domain_membership() {
        assert!(LatticeParams2D::new(0.5, 3f64.sqrt() / 2.0)
            .unwrap()
            .in_fundamental_domain());
        assert!(LatticeParams2D::new(0.0, 1.0).unwrap().in_fundamental_domain());
        assert!(!LatticeParams2D::new(0.1, 0.9).unwrap().in_fundamental_domain());
        assert!(!LatticeParams2D::new(0.7, 1.2).unwrap().in_fundamental_domain());
        // Outside D2 is allowed, only flagged.
        assert!(LatticeParams2D::new(0.1, 0.9).is_ok());
    }

    #[test]
    fn full_rank_is_required() {
        let b = SMatrix::<f64, 2, 2>::from_columns(&[
            SVector::<f64, 2>::new(1.0, 0.0),
            SVector::<f64, 2>::new(2.0, 0.0),
        ]);
        assert!(Lattice::new(b).is_err());
    }
}
