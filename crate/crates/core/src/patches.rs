//! rho-patches of `V`: extraction, census, empirical frequencies, the exact
//! inclusion-exclusion frequency with certified prime-product truncation,
//! entropy estimates and the total-mass check of the frequency measure.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::arithmetic::{sieve_primes, EulerTail};
use crate::error::{Error, Result};
use crate::kfree::{is_admissible, is_kfree_point, Configuration, KFreeParams, Membership};
use crate::lattice::{
    ball_volume, points_in_origin_ball, reduce_mod, BallKind, BallScan, Lattice, LatticePoint,
};
use crate::par::{map_tasks, CompensatedSum, Execution};

/// Most free sites (window points outside the patch) the subset sum accepts.
pub const SUBSET_SITE_BUDGET: usize = 22;

/// Most window sites for a full-partition sum (3^sites subset terms).
pub const PARTITION_SITE_BUDGET: usize = 14;

const MAX_PRIME_CUTOFF: u64 = 1 << 20;

/// Top-level include/exclude decisions expanded into separate tasks.
const SPLIT_DEPTH: usize = 6;

/// The window `Lambda ∩ B_rho(0)` in lexicographic order.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    rho: f64,
    offsets: Vec<LatticePoint>,
}

impl Window {
    pub fn new(lat: &Lattice, rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::InvalidArgument(format!("rho {rho} must be > 0")));
        }
        Ok(Self {
            rho,
            offsets: points_in_origin_ball(lat, rho, BallKind::Open),
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn offsets(&self) -> &[LatticePoint] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn index_of(&self, p: &LatticePoint) -> Option<usize> {
        self.offsets.binary_search(p).ok()
    }

    fn mask_words(&self) -> usize {
        self.offsets.len().div_ceil(64).max(1)
    }

    /// Membership bitmask of `(V - t) ∩ B_rho(0)` over the window.
    fn mask_at(&self, member: &Membership, t: &[i128], buf: &mut Vec<i128>, mask: &mut [u64]) {
        mask.iter_mut().for_each(|w| *w = 0);
        for (i, u) in self.offsets.iter().enumerate() {
            buf.clear();
            buf.extend(t.iter().zip(u.coords()).map(|(a, b)| a + b));
            if member.contains(buf) {
                mask[i / 64] |= 1 << (i % 64);
            }
        }
    }

    fn points_of_mask(&self, mask: &[u64]) -> Vec<LatticePoint> {
        self.offsets
            .iter()
            .enumerate()
            .filter(|(i, _)| mask[i / 64] >> (i % 64) & 1 == 1)
            .map(|(_, p)| p.clone())
            .collect()
    }

    fn mask_of_points(&self, points: &[LatticePoint]) -> Result<Vec<u64>> {
        let mut mask = vec![0u64; self.mask_words()];
        for p in points {
            let i = self.index_of(p).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "patch point {:?} is outside the window of radius {}",
                    p.coords(),
                    self.rho
                ))
            })?;
            mask[i / 64] |= 1 << (i % 64);
        }
        Ok(mask)
    }
}

/// A rho-patch `(V - t) ∩ B_rho(0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    points: Configuration,
    rho: f64,
}

impl Patch {
    pub fn new(points: Vec<LatticePoint>, rho: f64) -> Self {
        Self {
            points: Configuration::new(points, Some(rho)),
            rho,
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn points(&self) -> &[LatticePoint] {
        self.points.points()
    }

    pub fn configuration(&self) -> &Configuration {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn same_rho(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(1.0)
}

/// The patch of `V` at `t`, translated to the origin.
pub fn patch_at(params: &KFreeParams, lat: &Lattice, t: &LatticePoint, rho: f64) -> Result<Patch> {
    params.check_lattice(lat)?;
    if t.dimension() != params.n() {
        return Err(Error::DimensionMismatch {
            expected: params.n(),
            got: t.dimension(),
        });
    }
    let window = Window::new(lat, rho)?;
    let points = window
        .offsets()
        .iter()
        .filter(|u| is_kfree_point(&t.add(u), params))
        .cloned()
        .collect();
    Ok(Patch::new(points, rho))
}

/// One distinct patch and how often it was seen.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusEntry {
    pub points: Vec<LatticePoint>,
    pub count: u64,
}

/// The patches seen at every `t ∈ Lambda ∩ B_scan(0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchCensus {
    pub rho: f64,
    pub scan_radius: f64,
    pub dimension: usize,
    pub translates: u64,
    /// Sorted by the canonical encoding (sorted coordinate tuples).
    pub patches: Vec<CensusEntry>,
}

impl PatchCensus {
    /// `N(rho)` as observed.
    pub fn distinct(&self) -> usize {
        self.patches.len()
    }

    pub fn count_of(&self, patch: &Patch) -> u64 {
        self.patches
            .binary_search_by(|e| e.points.as_slice().cmp(patch.points()))
            .map(|i| self.patches[i].count)
            .unwrap_or(0)
    }

    pub fn iter_patches(&self) -> impl Iterator<Item = Patch> + '_ {
        self.patches
            .iter()
            .map(|e| Patch::new(e.points.clone(), self.rho))
    }

    /// `v_n R^n` for the scan ball.
    pub fn volume(&self) -> f64 {
        ball_volume(self.dimension, self.scan_radius)
    }
}

pub fn census(
    params: &KFreeParams,
    lat: &Lattice,
    rho: f64,
    scan_radius: f64,
) -> Result<PatchCensus> {
    census_with(params, lat, rho, scan_radius, Execution::default())
}

pub fn census_with(
    params: &KFreeParams,
    lat: &Lattice,
    rho: f64,
    scan_radius: f64,
    exec: Execution,
) -> Result<PatchCensus> {
    params.check_lattice(lat)?;
    if !(scan_radius >= rho) {
        return Err(Error::InvalidArgument(format!(
            "scan radius {scan_radius} must be at least rho = {rho}"
        )));
    }
    let window = Window::new(lat, rho)?;
    let member = Membership::new(params, lat.coordinate_bound(scan_radius + rho));
    let words = window.mask_words();
    let slabs = BallScan::origin(lat, scan_radius, BallKind::Open).fold(
        exec,
        || {
            (
                HashMap::<Vec<u64>, u64>::new(),
                vec![0u64; words],
                Vec::new(),
            )
        },
        |(counts, mask, buf), t| {
            window.mask_at(&member, t, buf, mask);
            match counts.get_mut(mask.as_slice()) {
                Some(c) => *c += 1,
                None => {
                    counts.insert(mask.clone(), 1);
                }
            }
        },
    );
    let mut merged: HashMap<Vec<u64>, u64> = HashMap::new();
    for (counts, _, _) in slabs {
        for (k, v) in counts {
            *merged.entry(k).or_default() += v;
        }
    }
    let translates = merged.values().sum();
    let sorted: BTreeMap<Vec<LatticePoint>, u64> = merged
        .into_iter()
        .map(|(mask, count)| (window.points_of_mask(&mask), count))
        .collect();
    Ok(PatchCensus {
        rho,
        scan_radius,
        dimension: params.n(),
        translates,
        patches: sorted
            .into_iter()
            .map(|(points, count)| CensusEntry { points, count })
            .collect(),
    })
}

/// Occurrences of `patch` per unit volume of the scan ball.
pub fn frequency_empirical(census: &PatchCensus, patch: &Patch) -> Result<f64> {
    if !same_rho(census.rho, patch.rho()) {
        return Err(Error::InvalidArgument(format!(
            "patch radius {} differs from census radius {}",
            patch.rho(),
            census.rho
        )));
    }
    Ok(census.count_of(patch) as f64 / census.volume())
}

/// Exact frequency with its certified error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyResult {
    pub value: f64,
    pub truncation_error: f64,
    /// Primes up to this value enter exactly; the rest through the tail bracket.
    pub prime_cutoff: u64,
    /// Nonzero subset terms summed.
    pub term_count: u64,
}

impl FrequencyResult {
    pub fn lower(&self) -> f64 {
        self.value - self.truncation_error
    }

    pub fn upper(&self) -> f64 {
        self.value + self.truncation_error
    }
}

/// A prime whose `p^k`-cosets can merge window points, tracked per coset.
#[derive(Clone, Debug)]
struct CosetPrime {
    /// `p^{nk}` as a float, the number of cosets.
    classes: f64,
    /// Same, saturated, for the admissibility test.
    classes_int: u64,
    class_of: Vec<u32>,
    class_count: usize,
}

/// Per-site-count sums of `(-1)^|F| E(S)` and `|E(S)|`, where `E` is the
/// product over coset-tracked primes.
#[derive(Clone, Debug)]
struct SubsetSums {
    signed: Vec<f64>,
    unsigned: Vec<f64>,
    terms: u64,
}

struct Walker<'a> {
    primes: &'a [CosetPrime],
    free: &'a [usize],
    hits: Vec<Vec<u32>>,
    distinct: Vec<u64>,
    size: usize,
    signed: Vec<CompensatedSum>,
    unsigned: Vec<CompensatedSum>,
    terms: u64,
}

impl<'a> Walker<'a> {
    fn new(primes: &'a [CosetPrime], free: &'a [usize], window_len: usize) -> Self {
        Self {
            primes,
            free,
            hits: primes.iter().map(|p| vec![0; p.class_count]).collect(),
            distinct: vec![0; primes.len()],
            size: 0,
            signed: vec![CompensatedSum::new(); window_len + 1],
            unsigned: vec![CompensatedSum::new(); window_len + 1],
            terms: 0,
        }
    }

    /// Adds a site; returns whether the set is still admissible.
    fn add(&mut self, site: usize) -> bool {
        let mut ok = true;
        for (i, p) in self.primes.iter().enumerate() {
            let c = p.class_of[site] as usize;
            if self.hits[i][c] == 0 {
                self.distinct[i] += 1;
            }
            self.hits[i][c] += 1;
            ok &= self.distinct[i] < p.classes_int;
        }
        self.size += 1;
        ok
    }

    fn remove(&mut self, site: usize) {
        for (i, p) in self.primes.iter().enumerate() {
            let c = p.class_of[site] as usize;
            self.hits[i][c] -= 1;
            if self.hits[i][c] == 0 {
                self.distinct[i] -= 1;
            }
        }
        self.size -= 1;
    }

    fn record(&mut self, odd: bool) {
        let e: f64 = self
            .primes
            .iter()
            .zip(&self.distinct)
            .map(|(p, &d)| 1.0 - d as f64 / p.classes)
            .product();
        self.signed[self.size].add(if odd { -e } else { e });
        self.unsigned[self.size].add(e);
        self.terms += 1;
    }

    /// Visits every admissible extension by sites `free[from..]`. Supersets
    /// of an inadmissible set are inadmissible, so those subtrees are cut.
    fn walk(&mut self, from: usize, odd: bool) {
        self.record(odd);
        for j in from..self.free.len() {
            let site = self.free[j];
            if self.add(site) {
                self.walk(j + 1, !odd);
            }
            self.remove(site);
        }
    }

    fn finish(self) -> SubsetSums {
        SubsetSums {
            signed: self.signed.iter().map(CompensatedSum::value).collect(),
            unsigned: self.unsigned.iter().map(CompensatedSum::value).collect(),
            terms: self.terms,
        }
    }
}

/// Prime-product factors for a given cutoff: `F(m)` multiplies every
/// collision-free prime (exactly up to the cutoff, bracketed beyond it),
/// `H(m)` is the half-width of that bracket.
#[derive(Clone, Debug)]
struct CutoffTables {
    cutoff: u64,
    factor: Vec<f64>,
    half_width: Vec<f64>,
    exact_factors: usize,
}

/// Evaluates exact patch frequencies over one window.
///
/// `nu(P) = sum_{F ⊆ W \ P} (-1)^|F| prod_p (1 - |(P ∪ F) / p^k Lambda| / p^{nk})`.
/// Primes whose `p^k Lambda` can identify two window points (`p^k min_norm < 2 rho`)
/// are tracked coset by coset; for every other prime the coset count is just
/// `|P ∪ F|`, so their joint contribution depends only on the set size.
#[derive(Clone, Debug)]
pub struct FrequencyEngine {
    params: KFreeParams,
    window: Window,
    coset_primes: Vec<CosetPrime>,
    coset_prime_values: Vec<u64>,
    exec: Execution,
}

impl FrequencyEngine {
    pub fn new(params: &KFreeParams, lat: &Lattice, rho: f64) -> Result<Self> {
        Self::with_execution(params, lat, rho, Execution::default())
    }

    pub fn with_execution(
        params: &KFreeParams,
        lat: &Lattice,
        rho: f64,
        exec: Execution,
    ) -> Result<Self> {
        params.check_lattice(lat)?;
        let window = Window::new(lat, rho)?;
        let k = params.k();
        // p^k * min_norm < 2 rho
        let reach = 2.0 * rho / lat.min_norm();
        let limit = reach.powf(1.0 / k as f64).ceil() as u64 + 1;
        let mut coset_primes = Vec::new();
        let mut coset_prime_values = Vec::new();
        if limit >= 2 {
            for p in sieve_primes(limit)?.iter() {
                let pk = (p as u128).pow(k);
                if pk as f64 * lat.min_norm() >= 2.0 * rho {
                    continue;
                }
                let mut ids: HashMap<Vec<i128>, u32> = HashMap::new();
                let class_of: Vec<u32> = window
                    .offsets()
                    .iter()
                    .map(|u| {
                        let next = ids.len() as u32;
                        *ids.entry(reduce_mod(u, pk).expect("pk > 0"))
                            .or_insert(next)
                    })
                    .collect();
                if ids.len() == window.len() {
                    continue;
                }
                let s = params.exponent();
                coset_primes.push(CosetPrime {
                    classes: (p as f64).powi(s as i32),
                    classes_int: (p as u128)
                        .checked_pow(s)
                        .map_or(u64::MAX, |v| v.min(u64::MAX as u128) as u64),
                    class_count: ids.len(),
                    class_of,
                });
                coset_prime_values.push(p);
            }
        }
        Ok(Self {
            params: *params,
            window,
            coset_primes,
            coset_prime_values,
            exec,
        })
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    /// Primes tracked coset by coset.
    pub fn coset_primes(&self) -> &[u64] {
        &self.coset_prime_values
    }

    fn initial_cutoff(&self) -> u64 {
        let s = self.params.exponent() as f64;
        let sites = self.window.len().max(1) as f64;
        let needed = (2.0 * sites).powf(1.0 / s).ceil() as u64;
        let largest = self.coset_prime_values.last().copied().unwrap_or(2);
        needed.max(largest).max(50)
    }

    fn tables(&self, cutoff: u64) -> Result<CutoffTables> {
        let s = self.params.exponent();
        let sites = self.window.len();
        let tail = EulerTail::new(s, cutoff, sites as u64)?;
        let head_primes: Vec<f64> = sieve_primes(cutoff)?
            .iter()
            .filter(|p| !self.coset_prime_values.contains(p))
            .map(|p| (p as f64).powi(s as i32))
            .collect();
        let mut factor = Vec::with_capacity(sites + 1);
        let mut half_width = Vec::with_capacity(sites + 1);
        for m in 0..=sites {
            let head: f64 = head_primes.iter().map(|ps| 1.0 - m as f64 / ps).product();
            let t = tail.product_tail(m as u64)?;
            factor.push(head * t.mid());
            half_width.push(head * t.half_width());
        }
        Ok(CutoffTables {
            cutoff,
            factor,
            half_width,
            exact_factors: head_primes.len() + self.coset_primes.len(),
        })
    }

    fn subset_sums(&self, base: &[usize], free: &[usize]) -> SubsetSums {
        let sites = self.window.len();
        let depth = free.len().min(SPLIT_DEPTH);
        let (head, rest) = free.split_at(depth);
        let parts = map_tasks(self.exec, 1 << depth, |mask| {
            let mut walker = Walker::new(&self.coset_primes, rest, sites);
            let mut ok = true;
            for &site in base {
                ok &= walker.add(site);
            }
            for (bit, &site) in head.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    ok &= walker.add(site);
                }
            }
            if ok {
                walker.walk(0, (mask as u32).count_ones() % 2 == 1);
            }
            walker.finish()
        });
        let mut signed = vec![CompensatedSum::new(); sites + 1];
        let mut unsigned = vec![CompensatedSum::new(); sites + 1];
        let mut terms = 0;
        for part in parts {
            for m in 0..=sites {
                signed[m].add(part.signed[m]);
                unsigned[m].add(part.unsigned[m]);
            }
            terms += part.terms;
        }
        SubsetSums {
            signed: signed.iter().map(CompensatedSum::value).collect(),
            unsigned: unsigned.iter().map(CompensatedSum::value).collect(),
            terms,
        }
    }

    fn combine(&self, sums: &SubsetSums, tables: &CutoffTables) -> (f64, f64, f64) {
        let mut value = CompensatedSum::new();
        let mut truncation = 0.0;
        let mut magnitude = 0.0;
        for m in 0..sums.signed.len() {
            value.add(tables.factor[m] * sums.signed[m]);
            truncation += tables.half_width[m] * sums.unsigned[m];
            magnitude += tables.factor[m] * sums.unsigned[m];
        }
        let depth = (sums.terms.max(2) as f64).log2();
        let rounding = f64::EPSILON * (tables.exact_factors as f64 + depth + 8.0) * magnitude;
        (value.value(), truncation * (1.0 + 1e-12), rounding)
    }

    /// Exact frequency of `patch`, refining the prime cutoff until the
    /// certified error is at most `tolerance` (or no refinement can help).
    pub fn evaluate(&self, patch: &Patch, tolerance: f64) -> Result<FrequencyResult> {
        if !same_rho(patch.rho(), self.window.rho()) {
            return Err(Error::InvalidArgument(format!(
                "patch radius {} differs from engine radius {}",
                patch.rho(),
                self.window.rho()
            )));
        }
        let mask = self.window.mask_of_points(patch.points())?;
        let in_patch = |i: usize| mask[i / 64] >> (i % 64) & 1 == 1;
        let base: Vec<usize> = (0..self.window.len()).filter(|&i| in_patch(i)).collect();
        let free: Vec<usize> = (0..self.window.len()).filter(|&i| !in_patch(i)).collect();
        if free.len() > SUBSET_SITE_BUDGET {
            return Err(Error::WindowBudget {
                size: free.len(),
                limit: SUBSET_SITE_BUDGET,
            });
        }
        let sums = self.subset_sums(&base, &free);
        let mut cutoff = self.initial_cutoff();
        loop {
            let tables = self.tables(cutoff)?;
            let (value, truncation, rounding) = self.combine(&sums, &tables);
            let error = truncation + rounding;
            if error <= tolerance || rounding >= tolerance || cutoff >= MAX_PRIME_CUTOFF {
                return Ok(FrequencyResult {
                    value,
                    truncation_error: error,
                    prime_cutoff: tables.cutoff,
                    term_count: sums.terms,
                });
            }
            cutoff *= 4;
        }
    }
}

/// Exact frequency of one patch.
pub fn frequency_exact(
    patch: &Patch,
    params: &KFreeParams,
    lat: &Lattice,
    tolerance: f64,
) -> Result<FrequencyResult> {
    FrequencyEngine::new(params, lat, patch.rho())?.evaluate(patch, tolerance)
}

/// Patch-counting entropy estimates at one radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub rho: f64,
    pub scan_radius: f64,
    /// `N(rho)` seen in the census.
    pub distinct_patches: usize,
    /// `log2 N(rho) / (v_n rho^n)`.
    pub empirical: f64,
    /// `|V ∩ B_rho(0)| / (v_n rho^n)`; every subset of this window is a
    /// patch of some hull element.
    pub interpolation_lower: f64,
    /// `|Lambda ∩ B_rho(0)| / (v_n rho^n)`, from `N(rho) <= 2^|window|`.
    pub ceiling: f64,
    /// `1 / zeta(n k)`.
    pub limit: f64,
}

pub fn entropy_estimate(
    params: &KFreeParams,
    lat: &Lattice,
    rho: f64,
    scan_radius: f64,
) -> Result<EntropyEstimate> {
    let c = census(params, lat, rho, scan_radius)?;
    let volume = ball_volume(params.n(), rho);
    let window = Window::new(lat, rho)?;
    let in_v = window
        .offsets()
        .iter()
        .filter(|u| is_kfree_point(u, params))
        .count();
    Ok(EntropyEstimate {
        rho,
        scan_radius,
        distinct_patches: c.distinct(),
        empirical: (c.distinct() as f64).log2() / volume,
        interpolation_lower: in_v as f64 / volume,
        ceiling: window.len() as f64 / volume,
        limit: params.density(),
    })
}

/// Total exact mass over the complete patch partition of one window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureConsistency {
    pub rho: f64,
    pub window_sites: usize,
    /// Admissible subsets of the window, i.e. candidate patches.
    pub admissible_patches: usize,
    pub total: f64,
    /// Sum of the per-patch certified errors.
    pub truncation_error: f64,
}

/// Sums `nu(P)` over every admissible subset `P` of `Lambda ∩ B_rho(0)`.
/// Inadmissible subsets have frequency 0, so this is the full partition.
pub fn measure_consistency(
    params: &KFreeParams,
    lat: &Lattice,
    rho: f64,
    tolerance: f64,
) -> Result<MeasureConsistency> {
    let engine = FrequencyEngine::with_execution(params, lat, rho, Execution::Sequential)?;
    let sites = engine.window().len();
    if sites > PARTITION_SITE_BUDGET {
        return Err(Error::WindowBudget {
            size: sites,
            limit: PARTITION_SITE_BUDGET,
        });
    }
    let offsets = engine.window().offsets().to_vec();
    let results = map_tasks(Execution::default(), 1 << sites, |mask| {
        let points: Vec<LatticePoint> = offsets
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, p)| p.clone())
            .collect();
        let patch = Patch::new(points, rho);
        if !is_admissible(patch.configuration(), params) {
            return Ok(None);
        }
        engine.evaluate(&patch, tolerance).map(Some)
    });
    let mut total = CompensatedSum::new();
    let mut error = 0.0;
    let mut admissible = 0;
    for r in results {
        if let Some(f) = r? {
            total.add(f.value);
            error += f.truncation_error;
            admissible += 1;
        }
    }
    Ok(MeasureConsistency {
        rho,
        window_sites: sites,
        admissible_patches: admissible,
        total: total.value(),
        truncation_error: error,
    })
}

/// First `t` (lexicographic) in the open ball of `search_radius` whose patch
/// of `V` is `patch`.
pub fn realize_patch(
    patch: &Patch,
    params: &KFreeParams,
    lat: &Lattice,
    search_radius: f64,
) -> Result<Option<LatticePoint>> {
    params.check_lattice(lat)?;
    let window = Window::new(lat, patch.rho())?;
    let target = window.mask_of_points(patch.points())?;
    let member = Membership::new(params, lat.coordinate_bound(search_radius + patch.rho()));
    let words = window.mask_words();
    let found = BallScan::origin(lat, search_radius, BallKind::Open).fold(
        Execution::default(),
        || (None::<LatticePoint>, vec![0u64; words], Vec::new()),
        |(hit, mask, buf), t| {
            if hit.is_some() {
                return;
            }
            window.mask_at(&member, t, buf, mask);
            if *mask == target {
                *hit = Some(LatticePoint(t.to_vec()));
            }
        },
    );
    Ok(found.into_iter().find_map(|(hit, _, _)| hit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kfree::generate;

    fn z(n: usize) -> Lattice {
        Lattice::integer(n).unwrap()
    }

    fn p(c: &[i128]) -> LatticePoint {
        LatticePoint(c.to_vec())
    }

    fn visible() -> KFreeParams {
        KFreeParams::new(2, 1).unwrap()
    }

    fn squarefree() -> KFreeParams {
        KFreeParams::new(1, 2).unwrap()
    }

    const INV_ZETA2: f64 = 0.607_927_101_854_026_6;

    #[test]
    fn patch_at_examples() {
        let got = patch_at(&visible(), &z(2), &p(&[1, 0]), 1.1).unwrap();
        assert_eq!(got.points(), &[p(&[0, -1]), p(&[0, 0]), p(&[0, 1])]);
        let got = patch_at(&squarefree(), &z(1), &p(&[0]), 1.5).unwrap();
        assert_eq!(got.points(), &[p(&[-1]), p(&[1])]);
    }

    #[test]
    fn hole_centres_carry_empty_patches() {
        let cert = crate::kfree::find_hole(&visible(), &z(2), 1.1).unwrap();
        let got = patch_at(&visible(), &z(2), &cert.center, 1.1).unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn single_site_census() {
        let c = census(&visible(), &z(2), 0.5, 50.0).unwrap();
        assert_eq!(c.distinct(), 2);
        assert_eq!(c.patches[0].points, Vec::<LatticePoint>::new());
        assert_eq!(c.patches[1].points, vec![p(&[0, 0])]);
        assert_eq!(c.translates, c.patches.iter().map(|e| e.count).sum::<u64>());
    }

    #[test]
    fn census_respects_window_bound_and_execution() {
        let a = census_with(&visible(), &z(2), 1.1, 60.0, Execution::Sequential).unwrap();
        let b = census_with(&visible(), &z(2), 1.1, 60.0, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(a.distinct() >= 2 && a.distinct() <= 32);
        for patch in a.iter_patches() {
            assert!(is_admissible(patch.configuration(), &visible()));
        }
    }

    #[test]
    fn census_count_matches_direct_patch_scan() {
        let c = census(&squarefree(), &z(1), 1.5, 200.0).unwrap();
        let mut direct: BTreeMap<Vec<LatticePoint>, u64> = BTreeMap::new();
        for t in -199..=199 {
            let patch = patch_at(&squarefree(), &z(1), &p(&[t]), 1.5).unwrap();
            *direct.entry(patch.points().to_vec()).or_default() += 1;
        }
        let got: BTreeMap<_, _> = c
            .patches
            .iter()
            .map(|e| (e.points.clone(), e.count))
            .collect();
        assert_eq!(got, direct);
    }

    #[test]
    fn single_site_frequencies() {
        let lat = z(2);
        let one = Patch::new(vec![p(&[0, 0])], 0.5);
        let f = frequency_exact(&one, &visible(), &lat, 1e-12).unwrap();
        assert!(
            (f.value - INV_ZETA2).abs() <= f.truncation_error + 1e-15,
            "{f:?}"
        );
        assert!(f.truncation_error <= 1e-12);
        let empty = Patch::new(vec![], 0.5);
        let f = frequency_exact(&empty, &visible(), &lat, 1e-12).unwrap();
        assert!((f.value - (1.0 - INV_ZETA2)).abs() <= f.truncation_error + 1e-15);
        assert_eq!(f.term_count, 2);
    }

    /// Inclusion-exclusion by brute force: direct product over primes up to
    /// 10^5 for every subset, no coset bookkeeping shortcuts.
    fn brute_frequency(patch: &Patch, params: &KFreeParams, lat: &Lattice) -> f64 {
        let window = Window::new(lat, patch.rho()).unwrap();
        let free: Vec<&LatticePoint> = window
            .offsets()
            .iter()
            .filter(|u| !patch.points().contains(u))
            .collect();
        let primes = sieve_primes(100_000).unwrap();
        let s = params.exponent() as i32;
        let mut total = 0.0;
        for mask in 0u32..(1 << free.len()) {
            let mut set: Vec<LatticePoint> = patch.points().to_vec();
            for (i, u) in free.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    set.push((*u).clone());
                }
            }
            let mut prod = 1.0;
            for q in primes.iter() {
                let pk = (q as u128).pow(params.k());
                let classes: std::collections::HashSet<Vec<i128>> =
                    set.iter().map(|x| reduce_mod(x, pk).unwrap()).collect();
                prod *= 1.0 - classes.len() as f64 / (q as f64).powi(s);
            }
            total += if mask.count_ones() % 2 == 1 {
                -prod
            } else {
                prod
            };
        }
        total
    }

    #[test]
    fn exact_frequency_matches_brute_force_inclusion_exclusion() {
        let lat = z(2);
        for pts in [
            vec![],
            vec![p(&[0, 0])],
            vec![p(&[-1, 0]), p(&[0, 1])],
            vec![p(&[0, -1]), p(&[0, 0]), p(&[0, 1])],
        ] {
            let patch = Patch::new(pts, 1.1);
            let f = frequency_exact(&patch, &visible(), &lat, 1e-10).unwrap();
            let b = brute_frequency(&patch, &visible(), &lat);
            // brute force truncates at 10^5: error below 5 * 1e-5 / ln(1e5)
            assert!(
                (f.value - b).abs() < 2e-5,
                "{:?}: {} vs {}",
                patch.points(),
                f.value,
                b
            );
        }
        let lat = z(1);
        let patch = Patch::new(vec![p(&[-1]), p(&[1])], 1.5);
        let f = frequency_exact(&patch, &squarefree(), &lat, 1e-10).unwrap();
        let b = brute_frequency(&patch, &squarefree(), &lat);
        assert!((f.value - b).abs() < 2e-5);
    }

    #[test]
    fn inadmissible_patch_has_zero_frequency() {
        // {-1, 0, 1} together with 2 would be needed for mod 4; use Z^2 mod 2 instead
        let lat = z(2);
        let full = Patch::new(vec![p(&[0, 0]), p(&[1, 0]), p(&[0, 1]), p(&[1, 1])], 1.5);
        let f = frequency_exact(&full, &visible(), &lat, 1e-10).unwrap();
        assert_eq!(f.value, 0.0);
        assert_eq!(f.term_count, 0);
    }

    #[test]
    fn patch_outside_window_is_rejected() {
        let bad = Patch::new(vec![p(&[2, 0])], 1.1);
        assert!(frequency_exact(&bad, &visible(), &z(2), 1e-9).is_err());
    }

    #[test]
    fn window_budget_is_enforced() {
        // the open radius-3 window in Z^2 has 25 sites
        let patch = Patch::new(vec![], 3.0);
        assert_eq!(
            frequency_exact(&patch, &visible(), &z(2), 1e-9),
            Err(Error::WindowBudget {
                size: 25,
                limit: SUBSET_SITE_BUDGET
            })
        );
    }

    #[test]
    fn census_patches_have_positive_frequency() {
        let lat = z(2);
        let c = census(&visible(), &lat, 1.1, 80.0).unwrap();
        let engine = FrequencyEngine::new(&visible(), &lat, 1.1).unwrap();
        assert_eq!(engine.coset_primes(), &[2]);
        for patch in c.iter_patches() {
            let f = engine.evaluate(&patch, 1e-10).unwrap();
            assert!(f.lower() > 0.0, "{:?} {f:?}", patch.points());
        }
    }

    #[test]
    fn full_partition_sums_to_one() {
        let m = measure_consistency(&visible(), &z(2), 0.5, 1e-12).unwrap();
        assert_eq!(m.admissible_patches, 2);
        assert!((m.total - 1.0).abs() < 1e-12);
        let m = measure_consistency(&visible(), &z(2), 1.1, 1e-10).unwrap();
        assert!((m.total - 1.0).abs() < 1e-9, "{m:?}");
        let m = measure_consistency(&squarefree(), &z(1), 1.5, 1e-10).unwrap();
        assert!((m.total - 1.0).abs() < 1e-9, "{m:?}");
    }

    #[test]
    fn exact_agrees_with_empirical_at_small_scan() {
        let lat = z(1);
        let c = census(&squarefree(), &lat, 1.5, 20_000.0).unwrap();
        let engine = FrequencyEngine::new(&squarefree(), &lat, 1.5).unwrap();
        for patch in c.iter_patches() {
            let f = engine.evaluate(&patch, 1e-10).unwrap();
            let e = frequency_empirical(&c, &patch).unwrap();
            assert!(
                (f.value - e).abs() < 0.01,
                "{:?}: {} vs {}",
                patch.points(),
                f.value,
                e
            );
        }
    }

    #[test]
    fn entropy_bounds() {
        let e = entropy_estimate(&visible(), &z(2), 2.0, 200.0).unwrap();
        assert!(e.empirical <= e.ceiling);
        assert!(e.interpolation_lower <= e.ceiling);
        assert!((e.limit - INV_ZETA2).abs() < 1e-14);
    }

    #[test]
    fn census_monotone_in_rho() {
        let lat = z(2);
        let mut prev = 0;
        for rho in [0.5, 1.1, 1.5, 2.1] {
            let n = census(&visible(), &lat, rho, 60.0).unwrap().distinct();
            assert!(n >= prev);
            prev = n;
        }
    }

    #[test]
    fn realize_finds_a_translate() {
        let lat = z(1);
        let target = Patch::new(vec![p(&[-1]), p(&[1])], 1.5);
        let t = realize_patch(&target, &squarefree(), &lat, 100.0)
            .unwrap()
            .unwrap();
        assert_eq!(patch_at(&squarefree(), &lat, &t, 1.5).unwrap(), target);
        let v = generate(&squarefree(), &lat, 3.0).unwrap();
        assert!(v.contains(&p(&[1])));
    }

    #[test]
    fn restrictions_of_census_patches_are_census_patches() {
        let lat = z(2);
        let big = census(&visible(), &lat, 2.1, 80.0).unwrap();
        let small = census(&visible(), &lat, 1.1, 80.0).unwrap();
        for e in &big.patches {
            let restricted: Vec<LatticePoint> = e
                .points
                .iter()
                .filter(|x| lat.norm(x.coords()) < 1.1)
                .cloned()
                .collect();
            assert!(small.count_of(&Patch::new(restricted, 1.1)) > 0);
        }
    }

    #[test]
    fn single_site_census_frequencies() {
        let c = census(&visible(), &z(2), 0.5, 300.0).unwrap();
        let one = frequency_empirical(&c, &Patch::new(vec![p(&[0, 0])], 0.5)).unwrap();
        let none = frequency_empirical(&c, &Patch::new(vec![], 0.5)).unwrap();
        assert!((one - INV_ZETA2).abs() < 0.01);
        assert!((none - (1.0 - INV_ZETA2)).abs() < 0.01);
        let total: f64 = c
            .iter_patches()
            .map(|q| frequency_empirical(&c, &q).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 0.01);
        let absent = Patch::new(vec![p(&[0, 0])], 0.7);
        assert!(frequency_empirical(&c, &absent).is_err());
    }
}
