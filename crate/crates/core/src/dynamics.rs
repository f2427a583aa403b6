//! Finite-window checks on the hull: the configuration metric, proximality
//! witnesses, orbit evidence for topological ergodicity and genericity.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kfree::{
    certificate_arithmetic_ok, hole_for_offsets, is_admissible, is_kfree_point, Configuration,
    HoleCertificate, KFreeParams,
};
use crate::lattice::{points_in_origin_ball, BallKind, BallScan, Lattice, LatticePoint};
use crate::par::Execution;
use crate::patches::{
    census, frequency_empirical, patch_at, realize_patch, FrequencyEngine, Patch,
};

/// `d(X, Y) = min(1, 1/delta)`, `delta` the smallest norm where the two
/// configurations differ. When they agree on the whole known window only an
/// upper bound is available.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum ConfigDistance {
    Exact(f64),
    /// Agree on the window; the distance is at most this.
    AgreeOnWindow(f64),
}

impl ConfigDistance {
    pub fn value(self) -> f64 {
        match self {
            Self::Exact(d) | Self::AgreeOnWindow(d) => d,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Self::Exact(_))
    }
}

/// Distance of two windowed configurations. A configuration without a
/// window radius is taken as known everywhere.
pub fn config_distance(lat: &Lattice, x: &Configuration, y: &Configuration) -> ConfigDistance {
    let known = match (x.window_radius(), y.window_radius()) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => f64::INFINITY,
    };
    let xs: BTreeSet<&LatticePoint> = x.points().iter().collect();
    let ys: BTreeSet<&LatticePoint> = y.points().iter().collect();
    let delta = xs
        .symmetric_difference(&ys)
        .map(|p| lat.norm(p.coords()))
        .filter(|&r| r < known)
        .fold(f64::INFINITY, f64::min);
    if delta.is_finite() {
        ConfigDistance::Exact((1.0 / delta).min(1.0))
    } else if known.is_finite() {
        ConfigDistance::AgreeOnWindow((1.0 / known).min(1.0))
    } else {
        ConfigDistance::Exact(0.0)
    }
}

/// For the pair `X = V`, `Y = V + s`: a translate `t` with
/// `(V + t) ∩ B_rho(0) = (V + s + t) ∩ B_rho(0) = ∅`, so
/// `d(X + t, Y + t) <= 1/rho`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProximalityWitness {
    pub s: LatticePoint,
    pub t: LatticePoint,
    pub rho: f64,
    /// CRT certificate over `U = B(0) ∪ (B(0) - s)` (closed rho-balls)
    /// with centre `-t`.
    pub certificate: HoleCertificate,
}

impl ProximalityWitness {
    pub fn distance_bound(&self) -> f64 {
        (1.0 / self.rho).min(1.0)
    }
}

fn joint_offsets(lat: &Lattice, s: &LatticePoint, rho: f64) -> Vec<LatticePoint> {
    let ball = points_in_origin_ball(lat, rho, BallKind::Closed);
    let mut u: Vec<LatticePoint> = ball.iter().map(|b| b.sub(s)).collect();
    u.extend(ball);
    u.sort();
    u.dedup();
    u
}

pub fn proximality_witness(
    s: &LatticePoint,
    rho: f64,
    params: &KFreeParams,
    lat: &Lattice,
) -> Result<ProximalityWitness> {
    params.check_lattice(lat)?;
    if s.dimension() != params.n() {
        return Err(Error::DimensionMismatch {
            expected: params.n(),
            got: s.dimension(),
        });
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("rho {rho} must be > 0")));
    }
    let certificate = hole_for_offsets(params, joint_offsets(lat, s, rho), rho)?;
    Ok(ProximalityWitness {
        s: s.clone(),
        t: certificate.center.neg(),
        rho,
        certificate,
    })
}

/// Re-checks the certificate arithmetic and then, independently of it,
/// scans both translated sets on the closed rho-ball.
pub fn verify_proximality(w: &ProximalityWitness, params: &KFreeParams, lat: &Lattice) -> bool {
    if params.check_lattice(lat).is_err()
        || w.s.dimension() != params.n()
        || w.t.dimension() != params.n()
        || !(w.rho > 0.0)
        || w.certificate.center != w.t.neg()
        || !certificate_arithmetic_ok(&w.certificate, params)
    {
        return false;
    }
    let covered: BTreeSet<&LatticePoint> =
        w.certificate.assignment.iter().map(|a| &a.offset).collect();
    if !joint_offsets(lat, &w.s, w.rho)
        .iter()
        .all(|u| covered.contains(u))
    {
        return false;
    }
    // x in V + t lies in the ball iff x - t = u - t for some u in the ball
    let ball = points_in_origin_ball(lat, w.rho, BallKind::Closed);
    ball.iter().all(|u| {
        !is_kfree_point(&u.sub(&w.t), params) && !is_kfree_point(&u.sub(&w.t).sub(&w.s), params)
    })
}

/// Orbit evidence that the cylinders of two patches meet along translates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityEvidence {
    /// A translate where `V` shows the first patch.
    pub anchor: LatticePoint,
    /// Density of `t` in the scan ball with `P ∪ (Q + t)` consistent and
    /// admissible, i.e. `C_P ∩ (C_Q + t)` nonempty in the hull.
    pub overlap_density: f64,
    /// Density of `t` with the patch of `V` at `anchor + t` equal to `Q`;
    /// each such `t` is witnessed by `V - anchor` itself.
    pub orbit_density: f64,
    /// Empirical frequency of `Q` over the same scan ball.
    pub q_frequency: f64,
}

impl ErgodicityEvidence {
    pub fn is_positive(&self) -> bool {
        self.overlap_density > 0.0 && self.orbit_density > 0.0
    }
}

/// Whether a hull element has patch `p` at the origin and `q` at `t`.
fn cylinders_meet(
    p: &Patch,
    q: &Patch,
    t: &LatticePoint,
    lat: &Lattice,
    params: &KFreeParams,
) -> bool {
    let shifted: BTreeSet<LatticePoint> = q.points().iter().map(|x| x.add(t)).collect();
    let ps: BTreeSet<&LatticePoint> = p.points().iter().collect();
    // agreement on the overlap of the two windows
    for x in &ps {
        if lat.norm(x.sub(t).coords()) < q.rho() && !shifted.contains(*x) {
            return false;
        }
    }
    for x in &shifted {
        if lat.norm(x.coords()) < p.rho() && !ps.contains(x) {
            return false;
        }
    }
    let union: Vec<LatticePoint> = ps.into_iter().cloned().chain(shifted).collect();
    is_admissible(&Configuration::new(union, None), params)
}

pub fn ergodicity_evidence(
    p: &Patch,
    q: &Patch,
    params: &KFreeParams,
    lat: &Lattice,
    scan: f64,
) -> Result<ErgodicityEvidence> {
    params.check_lattice(lat)?;
    let anchor = realize_patch(p, params, lat, scan)?.ok_or_else(|| {
        Error::InvalidArgument(format!("first patch does not occur within radius {scan}"))
    })?;
    let scanner = BallScan::origin(lat, scan, BallKind::Open);
    let counts = scanner.fold(
        Execution::default(),
        || (0u64, 0u64),
        |acc: &mut (u64, u64), t| {
            let t = LatticePoint(t.to_vec());
            if cylinders_meet(p, q, &t, lat, params) {
                acc.0 += 1;
            }
            let seen = patch_at(params, lat, &anchor.add(&t), q.rho()).expect("checked lattice");
            if seen.points() == q.points() {
                acc.1 += 1;
            }
        },
    );
    let (overlap, orbit) = counts
        .into_iter()
        .fold((0, 0), |(a, b), (x, y)| (a + x, b + y));
    let volume = crate::lattice::ball_volume(params.n(), scan);
    let c = census(params, lat, q.rho(), scan)?;
    Ok(ErgodicityEvidence {
        anchor,
        overlap_density: overlap as f64 / volume,
        orbit_density: orbit as f64 / volume,
        q_frequency: frequency_empirical(&c, q)?,
    })
}

/// Orbit average of a cylinder indicator against its measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenericityCheck {
    pub orbit_average: f64,
    pub nu_value: f64,
    pub nu_error: f64,
    pub gap: f64,
}

pub fn genericity_check(
    patch: &Patch,
    params: &KFreeParams,
    lat: &Lattice,
    radius: f64,
) -> Result<GenericityCheck> {
    let c = census(params, lat, patch.rho(), radius)?;
    let orbit_average = frequency_empirical(&c, patch)?;
    let nu = FrequencyEngine::new(params, lat, patch.rho())?.evaluate(patch, 1e-10)?;
    Ok(GenericityCheck {
        orbit_average,
        nu_value: nu.value,
        nu_error: nu.truncation_error,
        gap: (orbit_average - nu.value).abs(),
    })
}

/// `(V + t) ∩ B_radius(0)` as a windowed configuration.
pub fn window_of_translate(
    params: &KFreeParams,
    lat: &Lattice,
    t: &LatticePoint,
    radius: f64,
) -> Result<Configuration> {
    params.check_lattice(lat)?;
    let points = points_in_origin_ball(lat, radius, BallKind::Open)
        .into_iter()
        .filter(|u| is_kfree_point(&u.sub(t), params))
        .collect();
    Ok(Configuration::new(points, Some(radius)))
}
