//! Pure-point diffraction of `V`: closed-form intensities, exact enumeration
//! of the spectrum over denominators, and finite-volume Fourier-Bohr sums.

use num_complex::Complex64;
use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::arithmetic::{is_kfree_integer, prime_divisors, sieve_primes};
use crate::error::{Error, Result};
use crate::kfree::{KFreeParams, Membership};
use crate::lattice::{ball_volume, BallKind, BallScan, DualPoint, Lattice};
use crate::par::{CompensatedSum, Execution};

/// Most spectrum points a single enumeration may produce.
pub const SPECTRUM_POINT_BUDGET: usize = 20_000_000;

/// Largest denominator accepted by the residue-histogram Fourier sum.
pub const AMPLITUDE_DENOMINATOR_LIMIT: u128 = 1 << 24;

/// `I(q) = (1/zeta(nk) * prod_{p | q} 1/(p^{nk} - 1))^2`, for `(k+1)`-free `q`.
pub fn intensity(q: u64, params: &KFreeParams) -> Result<f64> {
    if q == 0 {
        return Err(Error::ZeroArgument);
    }
    if !is_kfree_integer(q as u128, params.k() + 1)? {
        return Err(Error::NotInSpectrum {
            q,
            power: params.k() + 1,
        });
    }
    let s = params.exponent() as i32;
    let amplitude = prime_divisors(q)
        .into_iter()
        .fold(params.density(), |a, p| a / ((p as f64).powi(s) - 1.0));
    Ok(amplitude * amplitude)
}

/// Intensity at a dual point, zero off the support.
pub fn intensity_at(y: &DualPoint, params: &KFreeParams) -> Result<f64> {
    let q = u64::try_from(y.denominator())
        .map_err(|_| Error::InvalidArgument("denominator exceeds 64 bits".into()))?;
    match intensity(q, params) {
        Err(Error::NotInSpectrum { .. }) => Ok(0.0),
        other => other,
    }
}

/// Every `(k+1)`-free `q` with `I(q) >= threshold * I(1)`, i.e.
/// `prod_{p | q} (p^{nk} - 1) <= threshold^{-1/2}`, ascending.
pub fn qualifying_denominators(params: &KFreeParams, threshold: f64) -> Result<Vec<u64>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold {threshold} must lie in (0, 1]"
        )));
    }
    let bound = threshold.powf(-0.5) * (1.0 + 1e-12);
    let s = params.exponent() as i32;
    let k = params.k();
    // the largest usable prime satisfies p^s - 1 <= bound
    let largest = ((bound + 1.0).powf(1.0 / s as f64)).floor() as u64 + 1;
    let primes: Vec<u64> = if largest >= 2 {
        sieve_primes(largest)?
            .iter()
            .filter(|&p| (p as f64).powi(s) - 1.0 <= bound)
            .collect()
    } else {
        Vec::new()
    };
    let factors: Vec<f64> = primes.iter().map(|&p| (p as f64).powi(s) - 1.0).collect();
    let mut out = Vec::new();
    extend_denominators(&primes, &factors, 0, 1, 1.0, bound, k, &mut out);
    out.sort_unstable();
    Ok(out)
}

/// Depth-first over square-free prime supports; each prime may enter with
/// exponent 1..=k, all with the same factor `p^{nk} - 1`.
#[allow(clippy::too_many_arguments)]
fn extend_denominators(
    primes: &[u64],
    factors: &[f64],
    from: usize,
    q: u64,
    weight: f64,
    bound: f64,
    k: u32,
    out: &mut Vec<u64>,
) {
    out.push(q);
    for i in from..primes.len() {
        let w = weight * factors[i];
        if w > bound {
            // factors increase with p
            break;
        }
        let mut next = q;
        for _ in 0..k {
            match next.checked_mul(primes[i]) {
                Some(v) => next = v,
                None => break,
            }
            extend_denominators(primes, factors, i + 1, next, w, bound, k, out);
        }
    }
}

/// A point of the Fourier-Bohr spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub y: DualPoint,
    pub q: u64,
    pub intensity: f64,
}

/// Closed box in dual coordinates with a relative intensity floor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumWindow {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Keep points with `I(y) / I(0) >= threshold`.
    pub threshold: f64,
}

impl SpectrumWindow {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, threshold: f64) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite())
        {
            return Err(Error::InvalidArgument(
                "box needs finite lower <= upper".into(),
            ));
        }
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "threshold {threshold} must lie in (0, 1]"
            )));
        }
        Ok(Self {
            lower,
            upper,
            threshold,
        })
    }

    /// The plotted window: `[0, 2]^2` at `10^-6`.
    pub fn figure() -> Self {
        Self::new(vec![0.0, 0.0], vec![2.0, 2.0], 1e-6).expect("valid window")
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    /// Numerators `a` with `a / q` in `[lower, upper]` on one axis.
    fn numerator_range(&self, axis: usize, q: u64) -> (i128, i128) {
        let slack = 1e-12;
        let qf = q as f64;
        let mut lo = (self.lower[axis] * qf).floor() as i128 - 1;
        let mut hi = (self.upper[axis] * qf).ceil() as i128 + 1;
        while (lo as f64) / qf < self.lower[axis] - slack {
            lo += 1;
        }
        while (hi as f64) / qf > self.upper[axis] + slack {
            hi -= 1;
        }
        (lo, hi)
    }
}

/// All spectrum points in the window: for each qualifying `q`, every
/// fraction with exact denominator `q` in the box. Sorted by intensity
/// (descending), then coordinates.
pub fn enumerate_spectrum(
    window: &SpectrumWindow,
    params: &KFreeParams,
    lat: &Lattice,
) -> Result<Vec<SpectrumPoint>> {
    params.check_lattice(lat)?;
    if window.dimension() != params.n() {
        return Err(Error::DimensionMismatch {
            expected: params.n(),
            got: window.dimension(),
        });
    }
    let n = params.n();
    let mut out = Vec::new();
    for q in qualifying_denominators(params, window.threshold)? {
        let ranges: Vec<(i128, i128)> = (0..n).map(|i| window.numerator_range(i, q)).collect();
        let size: f64 = ranges
            .iter()
            .map(|(a, b)| (b - a + 1).max(0) as f64)
            .product();
        if out.len() as f64 + size > SPECTRUM_POINT_BUDGET as f64 {
            return Err(Error::WindowBudget {
                size: (out.len() as f64 + size).min(usize::MAX as f64) as usize,
                limit: SPECTRUM_POINT_BUDGET,
            });
        }
        if ranges.iter().any(|(a, b)| a > b) {
            continue;
        }
        let value = intensity(q, params)?;
        let mut a: Vec<i128> = ranges.iter().map(|r| r.0).collect();
        'odometer: loop {
            let g = a.iter().fold(q as i128, |g, &x| g.gcd(&x));
            if g == 1 {
                out.push(SpectrumPoint {
                    y: DualPoint::from_fraction(&a, q as i128),
                    q,
                    intensity: value,
                });
            }
            for i in (0..n).rev() {
                if a[i] < ranges[i].1 {
                    a[i] += 1;
                    continue 'odometer;
                }
                a[i] = ranges[i].0;
            }
            break;
        }
    }
    out.sort_by(|x, y| {
        y.intensity
            .total_cmp(&x.intensity)
            .then_with(|| x.y.coords().cmp(y.y.coords()))
    });
    Ok(out)
}

/// `a_R(y) = (1 / (v_n R^n)) sum_{x in V ∩ B_R(0)} exp(-2 pi i y.x)`.
///
/// `y` is in dual coordinates, so `y.x = sum y_i z_i` for lattice
/// coordinates `z`. The phase depends only on `sum a_i z_i mod q`, so the
/// sum is taken exactly as a residue histogram and evaluated once.
pub fn empirical_amplitude(
    y: &DualPoint,
    params: &KFreeParams,
    lat: &Lattice,
    radius: f64,
) -> Result<Complex64> {
    empirical_amplitude_with(y, params, lat, radius, Execution::default())
}

pub fn empirical_amplitude_with(
    y: &DualPoint,
    params: &KFreeParams,
    lat: &Lattice,
    radius: f64,
    exec: Execution,
) -> Result<Complex64> {
    params.check_lattice(lat)?;
    if y.coords().len() != params.n() {
        return Err(Error::DimensionMismatch {
            expected: params.n(),
            got: y.coords().len(),
        });
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "radius {radius} must be > 0"
        )));
    }
    let q = y.denominator();
    if q > AMPLITUDE_DENOMINATOR_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "denominator {q} exceeds {AMPLITUDE_DENOMINATOR_LIMIT}"
        )));
    }
    let qi = q as i128;
    let numerators = y.numerators();
    let member = Membership::new(params, lat.coordinate_bound(radius));
    let slabs = BallScan::origin(lat, radius, BallKind::Open).fold(
        exec,
        || vec![0u64; q as usize],
        |hist: &mut Vec<u64>, z| {
            if member.contains(z) {
                let r = z.iter().zip(&numerators).fold(0i128, |acc, (a, b)| {
                    (acc + (a % qi) * (b % qi)).rem_euclid(qi)
                });
                hist[r as usize] += 1;
            }
        },
    );
    let mut hist = vec![0u64; q as usize];
    for slab in slabs {
        for (h, c) in hist.iter_mut().zip(slab) {
            *h += c;
        }
    }
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for (r, &count) in hist.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let phase = -2.0 * std::f64::consts::PI * r as f64 / q as f64;
        re.add(count as f64 * phase.cos());
        im.add(count as f64 * phase.sin());
    }
    let volume = ball_volume(params.n(), radius);
    Ok(Complex64::new(re.value() / volume, im.value() / volume))
}

/// One plot row: `y`, its denominator, `I(y)` and `I(y) / I(0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub y: Vec<f64>,
    pub q: u64,
    pub intensity: f64,
    pub ratio: f64,
}

pub fn figure2_dataset(
    params: &KFreeParams,
    lat: &Lattice,
    window: &SpectrumWindow,
) -> Result<Vec<SpectrumRow>> {
    let base = intensity(1, params)?;
    Ok(enumerate_spectrum(window, params, lat)?
        .into_iter()
        .map(|sp| SpectrumRow {
            y: sp.y.to_f64(),
            q: sp.q,
            intensity: sp.intensity,
            ratio: sp.intensity / base,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::is_kfree_integer;
    use num_rational::Ratio;
    use std::collections::BTreeSet;

    fn z(n: usize) -> Lattice {
        Lattice::integer(n).unwrap()
    }

    fn visible() -> KFreeParams {
        KFreeParams::new(2, 1).unwrap()
    }

    const INV_ZETA2: f64 = 0.607_927_101_854_026_6;

    #[test]
    fn closed_form_values() {
        let v = visible();
        let i1 = intensity(1, &v).unwrap();
        assert!((i1 - INV_ZETA2 * INV_ZETA2).abs() < 1e-15);
        let i2 = intensity(2, &v).unwrap();
        assert!((i2 / i1 - 1.0 / 9.0).abs() < 1e-15);
        let pi4 = std::f64::consts::PI.powi(4);
        assert!((i2 - 4.0 / pi4).abs() < 1e-15);
        assert_eq!(
            intensity(4, &v),
            Err(Error::NotInSpectrum { q: 4, power: 2 })
        );
        assert_eq!(intensity(0, &v), Err(Error::ZeroArgument));
        // k = 2: 4 is cube-free, and 4 and 2 share the factor 2^{nk} - 1
        let cube = KFreeParams::new(2, 2).unwrap();
        assert_eq!(intensity(4, &cube).unwrap(), intensity(2, &cube).unwrap());
        assert!(intensity(8, &cube).is_err());
    }

    /// Brute force: all (k+1)-free q up to a generous bound, tested directly.
    fn brute_denominators(params: &KFreeParams, threshold: f64, limit: u64) -> Vec<u64> {
        let i1 = intensity(1, params).unwrap();
        (1..=limit)
            .filter(|&q| is_kfree_integer(q as u128, params.k() + 1).unwrap())
            .filter(|&q| intensity(q, params).unwrap() >= threshold * i1 * (1.0 - 1e-12))
            .collect()
    }

    #[test]
    fn denominators_match_brute_force() {
        let v = visible();
        let got = qualifying_denominators(&v, 1e-6).unwrap();
        assert_eq!(got, brute_denominators(&v, 1e-6, 5000));
        assert_eq!(
            got,
            vec![1, 2, 3, 5, 6, 7, 10, 11, 13, 14, 15, 17, 19, 21, 22, 23, 26, 29, 30, 31, 33, 34]
        );
        assert_eq!(qualifying_denominators(&v, 1.0).unwrap(), vec![1]);
        let sq = KFreeParams::new(1, 2).unwrap();
        assert_eq!(
            qualifying_denominators(&sq, 1e-4).unwrap(),
            brute_denominators(&sq, 1e-4, 5000)
        );
        let z3 = KFreeParams::new(3, 1).unwrap();
        assert_eq!(
            qualifying_denominators(&z3, 1e-8).unwrap(),
            brute_denominators(&z3, 1e-8, 5000)
        );
    }

    #[test]
    fn threshold_one_gives_integer_points() {
        let w = SpectrumWindow::new(vec![0.0, 0.0], vec![2.0, 2.0], 1.0).unwrap();
        let pts = enumerate_spectrum(&w, &visible(), &z(2)).unwrap();
        assert_eq!(pts.len(), 9);
        assert!(pts.iter().all(|p| p.q == 1));
    }

    #[test]
    fn enumeration_matches_fraction_scan() {
        let v = visible();
        let w = SpectrumWindow::new(vec![0.0, 0.0], vec![2.0, 2.0], 1e-6).unwrap();
        let got: BTreeSet<Vec<Ratio<i128>>> = enumerate_spectrum(&w, &v, &z(2))
            .unwrap()
            .into_iter()
            .map(|p| p.y.coords().to_vec())
            .collect();
        let allowed: BTreeSet<u64> = brute_denominators(&v, 1e-6, 40).into_iter().collect();
        let mut expected = BTreeSet::new();
        for q in 1..=40i128 {
            for a in 0..=2 * q {
                for b in 0..=2 * q {
                    let y = vec![Ratio::new(a, q), Ratio::new(b, q)];
                    let den = y.iter().fold(1i128, |l, r| l.lcm(r.denom()));
                    if den == q && allowed.contains(&(q as u64)) {
                        expected.insert(y);
                    }
                }
            }
        }
        assert_eq!(got, expected);
    }

    #[test]
    fn spectrum_is_sorted_and_depends_only_on_q() {
        let pts = enumerate_spectrum(&SpectrumWindow::figure(), &visible(), &z(2)).unwrap();
        assert_eq!(pts[0].q, 1);
        for w in pts.windows(2) {
            assert!(w[0].intensity >= w[1].intensity);
            if w[0].q == w[1].q {
                assert_eq!(w[0].intensity, w[1].intensity);
                assert!(w[0].y.coords() < w[1].y.coords());
            }
        }
        for p in &pts {
            assert_eq!(p.y.denominator() as u64, p.q);
            assert!(is_kfree_integer(p.q as u128, 2).unwrap());
        }
    }

    #[test]
    fn unit_box_sums_are_translation_invariant() {
        let v = visible();
        let mut sums = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                // half-open unit box [i, i+1) x [j, j+1)
                let w = SpectrumWindow::new(
                    vec![i as f64, j as f64],
                    vec![i as f64 + 1.0, j as f64 + 1.0],
                    1e-6,
                )
                .unwrap();
                let s: f64 = enumerate_spectrum(&w, &v, &z(2))
                    .unwrap()
                    .iter()
                    .filter(|p| {
                        p.y.to_f64()
                            .iter()
                            .zip([i, j])
                            .all(|(c, o)| *c < (o + 1) as f64)
                    })
                    .map(|p| p.intensity)
                    .sum();
                sums.push(s);
            }
        }
        for s in &sums {
            assert!((s - sums[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn empirical_amplitudes() {
        let v = visible();
        let lat = z(2);
        let a0 =
            empirical_amplitude(&DualPoint::from_fraction(&[0, 0], 1), &v, &lat, 200.0).unwrap();
        assert!((a0.re - INV_ZETA2).abs() < 0.01 && a0.im.abs() < 1e-12);
        let half = DualPoint::from_fraction(&[1, 1], 2);
        let a = empirical_amplitude(&half, &v, &lat, 200.0).unwrap();
        let i2 = intensity(2, &v).unwrap();
        assert!((a.norm_sqr() - i2).abs() < 0.1 * i2);
        let quarter = DualPoint::from_fraction(&[1, 0], 4);
        assert!(
            empirical_amplitude(&quarter, &v, &lat, 200.0)
                .unwrap()
                .norm_sqr()
                < 0.003
        );
    }

    #[test]
    fn amplitude_is_execution_independent() {
        let y = DualPoint::from_fraction(&[1, 2], 3);
        let a =
            empirical_amplitude_with(&y, &visible(), &z(2), 120.0, Execution::Sequential).unwrap();
        let b =
            empirical_amplitude_with(&y, &visible(), &z(2), 120.0, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn figure_rows() {
        let rows = figure2_dataset(&visible(), &z(2), &SpectrumWindow::figure()).unwrap();
        assert_eq!(rows[0].ratio, 1.0);
        let r = rows.iter().find(|r| r.y == vec![1.0, 0.5]).unwrap();
        assert_eq!(r.q, 2);
        assert!((r.ratio - 1.0 / 9.0).abs() < 1e-15);
        assert!(rows.iter().all(|r| r.ratio >= 1e-6 * (1.0 - 1e-12)));
    }
}
