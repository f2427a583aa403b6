//! The k-free points `V(Lambda, k)`: membership, window generation,
//! density, constructive holes and admissibility.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::arithmetic::{
    bit_length, coord_gcd, crt_solve, first_primes, is_kfree_integer, zeta, CrtSystem, KFreeSieve,
};
use crate::error::{Error, Result};
use crate::lattice::{
    ball_volume, points_in_origin_ball, reduce_mod, BallKind, BallScan, Lattice, LatticePoint,
};
use crate::par::Execution;

/// Largest table the membership sieve will allocate.
const SIEVE_CAP: u64 = 50_000_000;

/// Dimension and power of `V(Lambda, k)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct KFreeParams {
    n: usize,
    k: u32,
}

#[derive(Deserialize)]
struct RawParams {
    n: usize,
    k: u32,
}

impl TryFrom<RawParams> for KFreeParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        KFreeParams::new(raw.n, raw.k)
    }
}

impl KFreeParams {
    pub fn new(n: usize, k: u32) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::InvalidArgument("n and k must be at least 1".into()));
        }
        if n == 1 && k == 1 {
            return Err(Error::TrivialCase);
        }
        Ok(Self { n, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// `n k`, the zeta argument of the density.
    pub fn exponent(&self) -> u32 {
        self.n as u32 * self.k
    }

    /// `1 / zeta(n k)`.
    pub fn density(&self) -> f64 {
        zeta(self.exponent())
            .expect("n k >= 2 by construction")
            .reciprocal()
    }

    pub(crate) fn check_lattice(&self, lat: &Lattice) -> Result<()> {
        if lat.dimension() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: lat.dimension(),
            });
        }
        Ok(())
    }
}

/// A finite set of lattice points seen through a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    points: Vec<LatticePoint>,
    #[serde(default)]
    window_radius: Option<f64>,
}

impl Configuration {
    /// Sorts and deduplicates `points`.
    pub fn new(mut points: Vec<LatticePoint>, window_radius: Option<f64>) -> Self {
        points.sort();
        points.dedup();
        Self {
            points,
            window_radius,
        }
    }

    pub fn empty(window_radius: Option<f64>) -> Self {
        Self::new(Vec::new(), window_radius)
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn window_radius(&self) -> Option<f64> {
        self.window_radius
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        self.points.binary_search(p).is_ok()
    }

    /// Checks dimensions and that every point lies strictly inside the window.
    pub fn validate(&self, lat: &Lattice) -> Result<()> {
        for p in &self.points {
            if p.dimension() != lat.dimension() {
                return Err(Error::DimensionMismatch {
                    expected: lat.dimension(),
                    got: p.dimension(),
                });
            }
            if let Some(r) = self.window_radius {
                if !BallKind::Open.contains(lat.norm_sq(p.coords()), r) {
                    return Err(Error::InvalidArgument(format!(
                        "point {:?} lies outside the window of radius {r}",
                        p.coords()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn translate(&self, t: &LatticePoint) -> Configuration {
        Configuration {
            points: self.points.iter().map(|p| p.add(t)).collect(),
            window_radius: None,
        }
    }
}

/// Membership test for `V`, backed by a sieve over the gcd range.
#[derive(Clone, Debug)]
pub(crate) struct Membership {
    k: u32,
    sieve: Option<KFreeSieve>,
}

impl Membership {
    /// Covers exact lookups for gcds up to `max_coord`.
    pub(crate) fn new(params: &KFreeParams, max_coord: u64) -> Self {
        let sieve = if params.k() >= 2 && max_coord <= SIEVE_CAP {
            KFreeSieve::new(max_coord.max(1), params.k()).ok()
        } else {
            None
        };
        Self {
            k: params.k(),
            sieve,
        }
    }

    pub(crate) fn contains(&self, coords: &[i128]) -> bool {
        let g = coord_gcd(coords);
        if g == 0 {
            return false;
        }
        if self.k == 1 {
            return g == 1;
        }
        if let Some(v) = self.sieve.as_ref().and_then(|s| s.get(g)) {
            return v;
        }
        is_kfree_integer(g, self.k).expect("g > 0 and k > 0")
    }
}

/// `true` iff the coordinate gcd is nonzero and k-free. The origin is never in `V`.
pub fn is_kfree_point(t: &LatticePoint, params: &KFreeParams) -> bool {
    let g = coord_gcd(t.coords());
    g != 0 && is_kfree_integer(g, params.k()).expect("g > 0 and k > 0")
}

/// `V ∩ B_R(0)` (open ball), lexicographic order.
pub fn generate(params: &KFreeParams, lat: &Lattice, radius: f64) -> Result<Configuration> {
    generate_with(params, lat, radius, Execution::default())
}

pub fn generate_with(
    params: &KFreeParams,
    lat: &Lattice,
    radius: f64,
    exec: Execution,
) -> Result<Configuration> {
    params.check_lattice(lat)?;
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "radius {radius} must be > 0"
        )));
    }
    let member = Membership::new(params, lat.coordinate_bound(radius));
    let points = BallScan::origin(lat, radius, BallKind::Open)
        .fold(exec, Vec::new, |acc: &mut Vec<LatticePoint>, z| {
            if member.contains(z) {
                acc.push(LatticePoint(z.to_vec()));
            }
        })
        .into_iter()
        .flatten()
        .collect();
    Ok(Configuration {
        points,
        window_radius: Some(radius),
    })
}

/// `|V ∩ B_R(0)|`.
pub fn count_in_ball(
    params: &KFreeParams,
    lat: &Lattice,
    radius: f64,
    exec: Execution,
) -> Result<u64> {
    params.check_lattice(lat)?;
    let member = Membership::new(params, lat.coordinate_bound(radius));
    Ok(BallScan::origin(lat, radius, BallKind::Open)
        .fold(
            exec,
            || 0u64,
            |acc, z| {
                if member.contains(z) {
                    *acc += 1;
                }
            },
        )
        .into_iter()
        .sum())
}

/// `|V ∩ B_R(0)| / (v_n R^n)`, which tends to `1/zeta(n k)`.
pub fn density_estimate(params: &KFreeParams, lat: &Lattice, radius: f64) -> Result<f64> {
    density_estimate_with(params, lat, radius, Execution::default())
}

pub fn density_estimate_with(
    params: &KFreeParams,
    lat: &Lattice,
    radius: f64,
    exec: Execution,
) -> Result<f64> {
    if !(radius >= 10.0) {
        return Err(Error::InvalidArgument(format!(
            "density radius {radius} must be at least 10"
        )));
    }
    let count = count_in_ball(params, lat, radius, exec)?;
    Ok(count as f64 / ball_volume(params.n(), radius))
}

/// One offset of a hole and the prime whose k-th power kills it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoleAssignment {
    pub offset: LatticePoint,
    pub prime: u64,
}

/// Witness that `center + m^k Lambda` consists of centres of holes of
/// inradius at least `radius`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoleCertificate {
    pub center: LatticePoint,
    /// Product of the assigned primes; the coset modulus is `modulus^k`.
    pub modulus: u128,
    pub radius: f64,
    pub assignment: Vec<HoleAssignment>,
}

impl HoleCertificate {
    /// `modulus^k`, if it fits.
    pub fn coset_modulus(&self, k: u32) -> Option<u128> {
        self.modulus.checked_pow(k)
    }
}

/// CRT construction: the sorted `offsets` receive the smallest primes in
/// increasing order, and the centre solves `c = -u (mod p_u^k)`.
pub fn hole_for_offsets(
    params: &KFreeParams,
    mut offsets: Vec<LatticePoint>,
    radius: f64,
) -> Result<HoleCertificate> {
    offsets.sort();
    offsets.dedup();
    if offsets.is_empty() {
        return Err(Error::InvalidArgument("no offsets to cover".into()));
    }
    let n = params.n();
    if let Some(bad) = offsets.iter().find(|u| u.dimension() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: bad.dimension(),
        });
    }
    let primes = first_primes(offsets.len());
    let bits: f64 = primes
        .iter()
        .map(|&p| params.k() as f64 * (p as f64).log2())
        .sum();
    if bits >= 126.0 {
        return Err(Error::Budget {
            required_bits: bits.ceil() as u32 + 1,
            available_bits: 126,
        });
    }
    let mut residues = Vec::with_capacity(offsets.len());
    for (u, &p) in offsets.iter().zip(&primes) {
        let pk = (p as u128).pow(params.k());
        residues.push((pk, u.coords().iter().map(|c| -c).collect()));
    }
    let center = crt_solve(&CrtSystem::new(residues)?)?;
    let modulus = primes.iter().map(|&p| p as u128).product();
    Ok(HoleCertificate {
        center: LatticePoint(center),
        modulus,
        radius,
        assignment: offsets
            .into_iter()
            .zip(primes)
            .map(|(offset, prime)| HoleAssignment { offset, prime })
            .collect(),
    })
}

/// Hole of inradius `r`: every lattice point in the closed ball of radius
/// `r` around the returned centre has a coordinate gcd divisible by some `p^k`.
pub fn find_hole(params: &KFreeParams, lat: &Lattice, r: f64) -> Result<HoleCertificate> {
    params.check_lattice(lat)?;
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "hole radius {r} must be > 0"
        )));
    }
    let offsets = points_in_origin_ball(lat, r, BallKind::Closed);
    hole_for_offsets(params, offsets, r)
}

fn assignment_divides(center: &LatticePoint, a: &HoleAssignment, k: u32) -> bool {
    let Some(pk) = (a.prime as u128).checked_pow(k) else {
        return false;
    };
    let Ok(pk) = i128::try_from(pk) else {
        return false;
    };
    center
        .add(&a.offset)
        .coords()
        .iter()
        .all(|c| c.rem_euclid(pk) == 0)
}

/// Distinct primes whose product is the modulus, every offset of the right dimension, and
/// `p_u^k | center + u` for each assignment.
pub(crate) fn certificate_arithmetic_ok(cert: &HoleCertificate, params: &KFreeParams) -> bool {
    if cert.center.dimension() != params.n() || !(cert.radius >= 0.0) {
        return false;
    }
    let primes: HashSet<u64> = cert.assignment.iter().map(|a| a.prime).collect();
    if primes.len() != cert.assignment.len() || primes.iter().any(|&p| !is_prime(p)) {
        return false;
    }
    let product = primes
        .iter()
        .try_fold(1u128, |acc, &p| acc.checked_mul(p as u128));
    if product != Some(cert.modulus) {
        return false;
    }
    cert.assignment.iter().all(|a| {
        a.offset.dimension() == params.n() && assignment_divides(&cert.center, a, params.k())
    })
}

/// Checks the certificate: distinct primes, one assignment per offset of the
/// closed `r`-ball, each divisibility, and a direct scan that no point of
/// `V` lies within `r` of the centre.
pub fn verify_hole(cert: &HoleCertificate, params: &KFreeParams, lat: &Lattice) -> bool {
    if params.check_lattice(lat).is_err() || !certificate_arithmetic_ok(cert, params) {
        return false;
    }
    let covered: BTreeSet<&LatticePoint> = cert.assignment.iter().map(|a| &a.offset).collect();
    let ball = points_in_origin_ball(lat, cert.radius, BallKind::Closed);
    if !ball.iter().all(|u| covered.contains(u)) {
        return false;
    }
    ball.iter()
        .all(|u| !is_kfree_point(&cert.center.add(u), params))
}

fn is_prime(p: u64) -> bool {
    p >= 2
        && (2..)
            .take_while(|d: &u64| d * d <= p)
            .all(|d| !p.is_multiple_of(d))
}

/// Brute-force search for a hole centre of inradius `r` nearest to the
/// origin, scanning the closed ball of `search_radius` by increasing norm.
/// Desk scale only (n <= 2).
pub fn smallest_hole_center(
    params: &KFreeParams,
    lat: &Lattice,
    r: f64,
    search_radius: f64,
) -> Result<Option<LatticePoint>> {
    params.check_lattice(lat)?;
    if params.n() > 2 {
        return Err(Error::InvalidArgument(
            "minimal hole search is limited to n <= 2".into(),
        ));
    }
    let offsets = points_in_origin_ball(lat, r, BallKind::Closed);
    let mut candidates = points_in_origin_ball(lat, search_radius, BallKind::Closed);
    candidates.sort_by(|a, b| {
        lat.norm_sq(a.coords())
            .total_cmp(&lat.norm_sq(b.coords()))
            .then_with(|| a.cmp(b))
    });
    let member = Membership::new(params, lat.coordinate_bound(search_radius + r));
    Ok(candidates
        .into_iter()
        .find(|c| offsets.iter().all(|u| !member.contains(c.add(u).coords()))))
}

/// `true` iff no prime `p` has all `p^{nk}` cosets of `p^k Lambda`
/// represented. Only primes with `p^{nk} <= |cfg|` can fail (pigeonhole).
pub fn is_admissible(cfg: &Configuration, params: &KFreeParams) -> bool {
    let size = cfg.len() as u128;
    if size == 0 {
        return true;
    }
    let s = params.exponent();
    let mut p: u64 = 2;
    loop {
        let Some(classes) = (p as u128).checked_pow(s) else {
            return true;
        };
        if classes > size {
            return true;
        }
        if is_prime(p) {
            let pk = (p as u128).pow(params.k());
            let residues: HashSet<Vec<i128>> = cfg
                .points()
                .iter()
                .map(|x| reduce_mod(x, pk).expect("pk > 0"))
                .collect();
            if residues.len() as u128 == classes {
                return false;
            }
        }
        p += 1;
    }
}

/// Required bits for a hole of `offsets` sites, for budget reporting.
pub fn hole_bits(params: &KFreeParams, offsets: usize) -> u32 {
    let primes = first_primes(offsets);
    primes
        .iter()
        .map(|&p| bit_length((p as u128).pow(params.k())))
        .sum()
}
