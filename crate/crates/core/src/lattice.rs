//! Unimodular lattices given by a basis, integer coordinates, ball
//! enumeration, coset reduction, dual lattices and denominators of rational
//! dual points.

use nalgebra::DMatrix;
use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{map_tasks, Execution};

/// Tolerance on `|det(basis)| = 1`.
pub const UNIMODULAR_TOLERANCE: f64 = 1e-9;

/// Relative slack on ball boundaries, so that exact integer norms on the
/// boundary land on the documented side.
const BOUNDARY_SLACK: f64 = 1e-12;

const MAX_SCAN_TASKS: i128 = 256;

/// A lattice point in coordinates of the lattice basis.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticePoint(pub Vec<i128>);

impl LatticePoint {
    pub fn new(coords: Vec<i128>) -> Self {
        Self(coords)
    }

    pub fn origin(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn coords(&self) -> &[i128] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn add(&self, other: &LatticePoint) -> LatticePoint {
        LatticePoint(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &LatticePoint) -> LatticePoint {
        LatticePoint(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> LatticePoint {
        LatticePoint(self.0.iter().map(|a| -a).collect())
    }
}

impl From<Vec<i128>> for LatticePoint {
    fn from(v: Vec<i128>) -> Self {
        Self(v)
    }
}

/// Whether a ball includes its boundary sphere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BallKind {
    /// `|x - c| < r`; used for densities and patches.
    Open,
    /// `|x - c| <= r`; used for hole inradii.
    Closed,
}

impl BallKind {
    pub fn contains(self, dist_sq: f64, radius: f64) -> bool {
        let r2 = radius * radius;
        match self {
            BallKind::Open => dist_sq < r2 * (1.0 - BOUNDARY_SLACK),
            BallKind::Closed => dist_sq <= r2 * (1.0 + BOUNDARY_SLACK),
        }
    }
}

/// A unimodular lattice in R^n. Basis vectors are the columns of `basis`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    basis: DMatrix<f64>,
    gram: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    min_norm: f64,
}

/// JSON description `{"n": int, "basis": [[...], ...]}`; each inner array
/// is one basis vector. A missing basis means the identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_norm: Option<f64>,
}

impl Lattice {
    /// The integer lattice Z^n.
    pub fn integer(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        Self::from_matrix(DMatrix::identity(n, n))
    }

    /// Builds a lattice from its basis vectors.
    pub fn from_vectors(vectors: &[Vec<f64>]) -> Result<Self> {
        let n = vectors.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty basis".into()));
        }
        for v in vectors {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| vectors[j][i]))
    }

    /// `basis` has the basis vectors as columns.
    pub fn from_matrix(basis: DMatrix<f64>) -> Result<Self> {
        if !basis.is_square() {
            return Err(Error::DimensionMismatch {
                expected: basis.nrows(),
                got: basis.ncols(),
            });
        }
        let det = basis.determinant();
        if !det.is_finite() || det.abs() < 1e-300 {
            return Err(Error::SingularBasis);
        }
        if (det.abs() - 1.0).abs() > UNIMODULAR_TOLERANCE {
            return Err(Error::NotUnimodular { det: det.abs() });
        }
        let gram = basis.transpose() * &basis;
        let gram_inv = gram.clone().try_inverse().ok_or(Error::SingularBasis)?;
        let mut lat = Self {
            basis,
            gram,
            gram_inv,
            min_norm: 0.0,
        };
        lat.min_norm = lat.compute_min_norm();
        Ok(lat)
    }

    pub fn from_spec(spec: &LatticeSpec) -> Result<Self> {
        let lat = match &spec.basis {
            None => Self::integer(spec.n)?,
            Some(vectors) => {
                if vectors.len() != spec.n {
                    return Err(Error::DimensionMismatch {
                        expected: spec.n,
                        got: vectors.len(),
                    });
                }
                Self::from_vectors(vectors)?
            }
        };
        match spec.min_norm {
            Some(m) => lat.with_min_norm(m),
            None => Ok(lat),
        }
    }

    pub fn to_spec(&self) -> LatticeSpec {
        let n = self.dimension();
        let identity = self.basis == DMatrix::identity(n, n);
        LatticeSpec {
            n,
            basis: (!identity).then(|| self.basis_vectors()),
            min_norm: None,
        }
    }

    /// Overrides the shortest-vector length with a caller-supplied lower
    /// bound. It may not exceed the computed value.
    pub fn with_min_norm(mut self, min_norm: f64) -> Result<Self> {
        if !(min_norm > 0.0) || min_norm > self.min_norm * (1.0 + 1e-9) {
            return Err(Error::InvalidArgument(format!(
                "min_norm {min_norm} must lie in (0, {}]",
                self.min_norm
            )));
        }
        self.min_norm = min_norm;
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn basis_vectors(&self) -> Vec<Vec<f64>> {
        (0..self.dimension())
            .map(|j| self.basis.column(j).iter().copied().collect())
            .collect()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Length of the shortest nonzero vector (exact for n <= 4, a certified
    /// lower bound otherwise).
    pub fn min_norm(&self) -> f64 {
        self.min_norm
    }

    pub fn determinant(&self) -> f64 {
        self.basis.determinant()
    }

    /// Squared Euclidean length of the point with integer coordinates `z`.
    #[allow(clippy::needless_range_loop)]
    pub fn norm_sq(&self, z: &[i128]) -> f64 {
        let n = self.dimension();
        let mut acc = 0.0;
        for i in 0..n {
            let zi = z[i] as f64;
            acc += self.gram[(i, i)] * zi * zi;
            for j in i + 1..n {
                acc += 2.0 * self.gram[(i, j)] * zi * z[j] as f64;
            }
        }
        acc
    }

    fn norm_sq_real(&self, z: &[f64]) -> f64 {
        let n = self.dimension();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += self.gram[(i, j)] * z[i] * z[j];
            }
        }
        acc
    }

    pub fn norm(&self, z: &[i128]) -> f64 {
        self.norm_sq(z).sqrt()
    }

    pub fn to_ambient(&self, z: &[i128]) -> Vec<f64> {
        let v = nalgebra::DVector::from_iterator(z.len(), z.iter().map(|&c| c as f64));
        (&self.basis * v).iter().copied().collect()
    }

    /// Real coordinates of an ambient vector.
    pub fn to_coordinates(&self, x: &[f64]) -> Vec<f64> {
        let inv = self
            .basis
            .clone()
            .try_inverse()
            .expect("unimodular basis is invertible");
        let v = nalgebra::DVector::from_column_slice(x);
        (inv * v).iter().copied().collect()
    }

    /// Half-widths of the coordinate box containing the ball of `radius`:
    /// `|z_i| <= radius * sqrt((G^-1)_ii)`.
    pub fn coordinate_extent(&self, radius: f64) -> Vec<f64> {
        (0..self.dimension())
            .map(|i| radius * self.gram_inv[(i, i)].sqrt())
            .collect()
    }

    /// Largest absolute coordinate of any point in the ball of `radius`.
    pub fn coordinate_bound(&self, radius: f64) -> u64 {
        self.coordinate_extent(radius)
            .into_iter()
            .fold(0.0f64, f64::max)
            .ceil() as u64
    }

    fn compute_min_norm(&self) -> f64 {
        let n = self.dimension();
        let shortest_basis = (0..n)
            .map(|j| self.gram[(j, j)].sqrt())
            .fold(f64::INFINITY, f64::min);
        if n > 4 {
            let eig = self.gram.clone().symmetric_eigen();
            let lambda_min = eig
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            return lambda_min.max(0.0).sqrt().min(shortest_basis);
        }
        let mut best = shortest_basis * shortest_basis;
        let origin = vec![0.0; n];
        for_each_in_box(self, shortest_basis, &origin, |z| {
            if z.iter().any(|&c| c != 0) {
                let q = self.norm_sq(z);
                if q < best {
                    best = q;
                }
            }
        });
        best.sqrt()
    }
}

/// Visits every integer vector in the coordinate box of the ball of
/// `radius` around the real coordinate vector `center`, in lexicographic
/// order.
fn for_each_in_box<F: FnMut(&[i128])>(lat: &Lattice, radius: f64, center: &[f64], mut f: F) {
    let extent = lat.coordinate_extent(radius);
    let lo: Vec<i128> = center
        .iter()
        .zip(&extent)
        .map(|(c, e)| (c - e).floor() as i128)
        .collect();
    let hi: Vec<i128> = center
        .iter()
        .zip(&extent)
        .map(|(c, e)| (c + e).ceil() as i128)
        .collect();
    walk_box(&lo, &hi, &mut f);
}

fn walk_box<F: FnMut(&[i128])>(lo: &[i128], hi: &[i128], f: &mut F) {
    let n = lo.len();
    let mut z = lo.to_vec();
    if lo.iter().zip(hi).any(|(a, b)| a > b) {
        return;
    }
    loop {
        f(&z);
        let mut i = n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if z[i] < hi[i] {
                z[i] += 1;
                break;
            }
            z[i] = lo[i];
        }
    }
}

/// A ball of lattice points, scanned in fixed slabs of the first coordinate.
///
/// Slab boundaries depend only on the ball, never on the thread count, so
/// per-slab results merged in order are reproducible.
#[derive(Clone, Debug)]
pub(crate) struct BallScan<'a> {
    lat: &'a Lattice,
    radius: f64,
    kind: BallKind,
    center: Vec<f64>,
    lo: Vec<i128>,
    hi: Vec<i128>,
}

impl<'a> BallScan<'a> {
    /// Ball around a real coordinate vector.
    pub(crate) fn new(lat: &'a Lattice, radius: f64, kind: BallKind, center: Vec<f64>) -> Self {
        let extent = lat.coordinate_extent(radius.max(0.0));
        let lo = center
            .iter()
            .zip(&extent)
            .map(|(c, e)| (c - e).floor() as i128)
            .collect();
        let hi = center
            .iter()
            .zip(&extent)
            .map(|(c, e)| (c + e).ceil() as i128)
            .collect();
        Self {
            lat,
            radius,
            kind,
            center,
            lo,
            hi,
        }
    }

    pub(crate) fn origin(lat: &'a Lattice, radius: f64, kind: BallKind) -> Self {
        Self::new(lat, radius, kind, vec![0.0; lat.dimension()])
    }

    fn slabs(&self) -> Vec<(i128, i128)> {
        let (a, b) = (self.lo[0], self.hi[0]);
        if a > b {
            return Vec::new();
        }
        let len = b - a + 1;
        let tasks = len.min(MAX_SCAN_TASKS);
        (0..tasks)
            .map(|t| (a + len * t / tasks, a + len * (t + 1) / tasks - 1))
            .collect()
    }

    fn visit_slab<T, V>(&self, slab: (i128, i128), acc: &mut T, visit: &V)
    where
        V: Fn(&mut T, &[i128]),
    {
        let mut lo = self.lo.clone();
        let mut hi = self.hi.clone();
        lo[0] = slab.0;
        hi[0] = slab.1;
        let mut diff = vec![0.0; self.center.len()];
        walk_box(&lo, &hi, &mut |z: &[i128]| {
            for (d, (&zi, &ci)) in diff.iter_mut().zip(z.iter().zip(&self.center)) {
                *d = zi as f64 - ci;
            }
            if self
                .kind
                .contains(self.lat.norm_sq_real(&diff), self.radius)
            {
                visit(acc, z);
            }
        });
    }

    /// Folds every point of the ball into one accumulator per slab; the
    /// accumulators come back in slab order.
    pub(crate) fn fold<T, M, V>(&self, exec: Execution, make: M, visit: V) -> Vec<T>
    where
        T: Send,
        M: Fn() -> T + Sync + Send,
        V: Fn(&mut T, &[i128]) + Sync + Send,
    {
        let slabs = self.slabs();
        map_tasks(exec, slabs.len(), |i| {
            let mut acc = make();
            self.visit_slab(slabs[i], &mut acc, &visit);
            acc
        })
    }

    pub(crate) fn points(&self, exec: Execution) -> Vec<LatticePoint> {
        self.fold(exec, Vec::new, |acc: &mut Vec<LatticePoint>, z| {
            acc.push(LatticePoint(z.to_vec()))
        })
        .into_iter()
        .flatten()
        .collect()
    }
}

/// Lattice points within `radius` of the ambient point `center`, in
/// lexicographic order of coordinates.
pub fn points_in_ball(
    lat: &Lattice,
    radius: f64,
    center: &[f64],
    kind: BallKind,
) -> Result<Vec<LatticePoint>> {
    if center.len() != lat.dimension() {
        return Err(Error::DimensionMismatch {
            expected: lat.dimension(),
            got: center.len(),
        });
    }
    if !(radius >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "radius {radius} must be >= 0"
        )));
    }
    let coords = lat.to_coordinates(center);
    Ok(BallScan::new(lat, radius, kind, coords).points(Execution::Sequential))
}

/// Lattice points within `radius` of the origin.
pub fn points_in_origin_ball(lat: &Lattice, radius: f64, kind: BallKind) -> Vec<LatticePoint> {
    BallScan::origin(lat, radius.max(0.0), kind).points(Execution::Sequential)
}

/// Componentwise residue in `[0, m)`; equal residues iff same coset of `m Lambda`.
pub fn reduce_mod(p: &LatticePoint, m: u128) -> Result<Vec<i128>> {
    if m == 0 {
        return Err(Error::InvalidArgument("modulus must be positive".into()));
    }
    let m = i128::try_from(m).map_err(|_| Error::Budget {
        required_bits: 128,
        available_bits: 127,
    })?;
    Ok(p.0.iter().map(|c| c.rem_euclid(m)).collect())
}

/// The reciprocal lattice, basis `(B^T)^-1`.
pub fn dual_lattice(lat: &Lattice) -> Result<Lattice> {
    let inv_t = lat
        .basis
        .transpose()
        .try_inverse()
        .ok_or(Error::SingularBasis)?;
    Lattice::from_matrix(inv_t)
}

/// A point of `Q Lambda^*` in dual-basis coordinates together with its
/// denominator.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "FractionRepr", try_from = "FractionRepr")]
pub struct DualPoint {
    coords: Vec<Ratio<i128>>,
    denominator: u128,
}

impl DualPoint {
    pub fn new(coords: Vec<Ratio<i128>>) -> Self {
        let denominator = denominator(&coords);
        Self {
            coords,
            denominator,
        }
    }

    /// `numerators / q`, reduced.
    pub fn from_fraction(numerators: &[i128], q: i128) -> Self {
        Self::new(numerators.iter().map(|&a| Ratio::new(a, q)).collect())
    }

    pub fn coords(&self) -> &[Ratio<i128>] {
        &self.coords
    }

    pub fn denominator(&self) -> u128 {
        self.denominator
    }

    /// Integer numerators over the common denominator.
    pub fn numerators(&self) -> Vec<i128> {
        let q = self.denominator as i128;
        self.coords
            .iter()
            .map(|c| c.numer() * (q / c.denom()))
            .collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coords
            .iter()
            .map(|c| *c.numer() as f64 / *c.denom() as f64)
            .collect()
    }

    /// Position in the ambient space, `B^* y`.
    pub fn to_ambient(&self, dual: &Lattice) -> Vec<f64> {
        let v = nalgebra::DVector::from_vec(self.to_f64());
        (dual.basis() * v).iter().copied().collect()
    }
}

/// Wire form of a dual point: common-denominator numerators.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct FractionRepr {
    numerators: Vec<i128>,
    denominator: i128,
}

impl From<DualPoint> for FractionRepr {
    fn from(y: DualPoint) -> Self {
        Self {
            numerators: y.numerators(),
            denominator: y.denominator as i128,
        }
    }
}

impl TryFrom<FractionRepr> for DualPoint {
    type Error = Error;

    fn try_from(r: FractionRepr) -> Result<Self> {
        if r.denominator <= 0 {
            return Err(Error::InvalidArgument(format!(
                "denominator {} must be positive",
                r.denominator
            )));
        }
        Ok(Self::from_fraction(&r.numerators, r.denominator))
    }
}

/// Least `m >= 1` with `m y` integral in dual coordinates: the lcm of the
/// reduced denominators.
pub fn denominator(y: &[Ratio<i128>]) -> u128 {
    y.iter()
        .fold(1u128, |acc, c| acc.lcm(&c.denom().unsigned_abs()))
}

/// Volume of the unit ball in R^n.
pub fn unit_ball_volume(n: usize) -> f64 {
    let pi = std::f64::consts::PI;
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * pi / n as f64,
    }
}

/// `v_n R^n`.
pub fn ball_volume(n: usize, radius: f64) -> f64 {
    unit_ball_volume(n) * radius.powi(n as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn z2() -> Lattice {
        Lattice::integer(2).unwrap()
    }

    fn pts(v: &[[i128; 2]]) -> Vec<LatticePoint> {
        let mut out: Vec<LatticePoint> = v.iter().map(|p| LatticePoint(p.to_vec())).collect();
        out.sort();
        out
    }

    #[test]
    fn small_balls_in_z2() {
        let lat = z2();
        let got = points_in_ball(&lat, 1.1, &[0.0, 0.0], BallKind::Open).unwrap();
        assert_eq!(got, pts(&[[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1]]));
        let got = points_in_ball(&lat, 0.5, &[0.0, 0.0], BallKind::Open).unwrap();
        assert_eq!(got, pts(&[[0, 0]]));
        assert!(points_in_ball(&lat, 0.0, &[0.3, 0.3], BallKind::Open)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn radius_ten_matches_brute_force() {
        let lat = z2();
        let open = (-10..=10i32)
            .flat_map(|x| (-10..=10).map(move |y| x * x + y * y))
            .filter(|&q| q < 100)
            .count();
        let closed = (-10..=10i32)
            .flat_map(|x| (-10..=10).map(move |y| x * x + y * y))
            .filter(|&q| q <= 100)
            .count();
        assert_eq!((open, closed), (305, 317));
        assert_eq!(
            points_in_ball(&lat, 10.0, &[0.0, 0.0], BallKind::Open)
                .unwrap()
                .len(),
            open
        );
        assert_eq!(
            points_in_ball(&lat, 10.0, &[0.0, 0.0], BallKind::Closed)
                .unwrap()
                .len(),
            closed
        );
    }

    #[test]
    fn enumeration_is_lexicographic_and_centered() {
        let lat = z2();
        let got = points_in_ball(&lat, 1.2, &[3.0, -2.0], BallKind::Closed).unwrap();
        assert_eq!(got, pts(&[[3, -2], [2, -2], [4, -2], [3, -1], [3, -3]]));
        let mut sorted = got.clone();
        sorted.sort();
        assert_eq!(got, sorted);
    }

    #[test]
    fn skewed_basis_enumeration_matches_brute_force() {
        let lat = Lattice::from_vectors(&[vec![1.0, 0.0], vec![3.0, 1.0]]).unwrap();
        let r = 4.3;
        let got = points_in_origin_ball(&lat, r, BallKind::Open);
        let mut brute = Vec::new();
        for a in -40..=40i128 {
            for b in -40..=40i128 {
                let x = a as f64 + 3.0 * b as f64;
                let y = b as f64;
                if x * x + y * y < r * r {
                    brute.push(LatticePoint(vec![a, b]));
                }
            }
        }
        assert_eq!(got, brute);
    }

    #[test]
    fn unit_density_at_radius_fifty() {
        let lat = z2();
        let count = points_in_origin_ball(&lat, 50.0, BallKind::Open).len() as f64;
        let ratio = count / ball_volume(2, 50.0);
        assert!((ratio - 1.0).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn parallel_and_sequential_scans_agree() {
        let lat = Lattice::integer(3).unwrap();
        let scan = BallScan::origin(&lat, 7.5, BallKind::Open);
        assert_eq!(
            scan.points(Execution::Sequential),
            scan.points(Execution::Parallel)
        );
    }

    #[test]
    fn reduce_mod_examples() {
        assert_eq!(
            reduce_mod(&LatticePoint(vec![5, -3]), 4).unwrap(),
            vec![1, 1]
        );
        assert_eq!(
            reduce_mod(&LatticePoint(vec![0, 0]), 7).unwrap(),
            vec![0, 0]
        );
        assert_eq!(
            reduce_mod(&LatticePoint(vec![9, -9]), 9).unwrap(),
            vec![0, 0]
        );
        assert!(reduce_mod(&LatticePoint(vec![1]), 0).is_err());
    }

    #[test]
    fn reduce_mod_partitions_points() {
        let points = points_in_origin_ball(&z2(), 6.0, BallKind::Open);
        let mut classes = std::collections::BTreeMap::<Vec<i128>, usize>::new();
        for p in &points {
            *classes.entry(reduce_mod(p, 3).unwrap()).or_default() += 1;
        }
        assert_eq!(classes.values().sum::<usize>(), points.len());
        assert_eq!(classes.len(), 9);
    }

    #[test]
    fn dual_examples() {
        let lat = z2();
        assert_eq!(dual_lattice(&lat).unwrap().basis(), lat.basis());
        let lat =
            Lattice::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])).unwrap();
        let dual = dual_lattice(&lat).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 1.0]);
        assert!((dual.basis() - expected).abs().max() < 1e-12);
    }

    #[test]
    fn unimodularity_is_enforced() {
        assert!(matches!(
            Lattice::from_vectors(&[vec![2.0, 0.0], vec![0.0, 1.0]]),
            Err(Error::NotUnimodular { .. })
        ));
        assert_eq!(
            Lattice::from_vectors(&[vec![1.0, 1.0], vec![1.0, 1.0]]),
            Err(Error::SingularBasis)
        );
    }

    #[test]
    fn min_norm_examples() {
        assert!((z2().min_norm() - 1.0).abs() < 1e-12);
        // basis (1,0),(5,1): shortest vector still (1,0)
        let lat = Lattice::from_vectors(&[vec![1.0, 0.0], vec![5.0, 1.0]]).unwrap();
        assert!((lat.min_norm() - 1.0).abs() < 1e-12);
        // hexagonal-like unimodular: (a,0),(a/2, a*sqrt3/2) with a^2 sqrt3/2 = 1
        let a = (2.0 / 3f64.sqrt()).sqrt();
        let hex =
            Lattice::from_vectors(&[vec![a, 0.0], vec![a / 2.0, a * 3f64.sqrt() / 2.0]]).unwrap();
        assert!((hex.min_norm() - a).abs() < 1e-12);
        let lat5 = Lattice::integer(5).unwrap();
        assert!((lat5.min_norm() - 1.0).abs() < 1e-9);
        assert!(z2().with_min_norm(2.0).is_err());
        assert_eq!(z2().with_min_norm(0.5).unwrap().min_norm(), 0.5);
    }

    #[test]
    fn denominator_examples() {
        let r = |a, b| Ratio::new(a, b);
        assert_eq!(denominator(&[r(1, 2), r(0, 1)]), 2);
        assert_eq!(denominator(&[r(3, 4), r(1, 2)]), 4);
        assert_eq!(denominator(&[r(0, 1), r(0, 1)]), 1);
        assert_eq!(denominator(&[r(2, 4), r(6, 3)]), 2);
        let y = DualPoint::from_fraction(&[3, 2], 6);
        assert_eq!(y.denominator(), 6);
        assert_eq!(y.numerators(), vec![3, 2]);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec: LatticeSpec =
            serde_json::from_str(r#"{"n": 2, "basis": [[1, 0], [1, 1]]}"#).unwrap();
        let lat = Lattice::from_spec(&spec).unwrap();
        assert_eq!(lat.to_spec(), spec);
        let spec: LatticeSpec = serde_json::from_str(r#"{"n": 3}"#).unwrap();
        assert_eq!(
            Lattice::from_spec(&spec).unwrap(),
            Lattice::integer(3).unwrap()
        );
    }

    #[test]
    fn ball_volumes() {
        let pi = std::f64::consts::PI;
        assert!((unit_ball_volume(2) - pi).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * pi / 3.0).abs() < 1e-15);
        assert_eq!(unit_ball_volume(1), 2.0);
    }

    fn unimodular_integer_matrix() -> impl Strategy<Value = DMatrix<f64>> {
        // product of elementary shears, entries kept small
        proptest::collection::vec((0usize..2, -3i32..=3), 1..5).prop_map(|ops| {
            let mut m = DMatrix::<f64>::identity(2, 2);
            for (which, c) in ops {
                let mut e = DMatrix::<f64>::identity(2, 2);
                if which == 0 {
                    e[(0, 1)] = c as f64;
                } else {
                    e[(1, 0)] = c as f64;
                }
                m *= e;
            }
            m
        })
    }

    proptest! {
        #[test]
        fn dual_of_dual_is_identity(basis in unimodular_integer_matrix()) {
            let lat = Lattice::from_matrix(basis.clone()).unwrap();
            let back = dual_lattice(&dual_lattice(&lat).unwrap()).unwrap();
            prop_assert!((back.basis() - basis).abs().max() < 1e-9);
        }

        #[test]
        fn denominator_is_least_integral_multiplier(a in -30i128..30, b in -30i128..30, q in 1i128..40) {
            let y = [Ratio::new(a, q), Ratio::new(b, q)];
            let den = denominator(&y);
            let integral = |m: u128| y.iter().all(|c| (*c * Ratio::from_integer(m as i128)).is_integer());
            prop_assert!(integral(den));
            for m in 1..den {
                prop_assert!(!integral(m));
            }
        }
    }
}
