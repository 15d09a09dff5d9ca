//! Shifted-average predictions for defect runs, deviation metrics, front
//! velocities and the beating detector.
//!
//! Per-site results are full-length vectors indexed by site; entries whose
//! shifted partner falls off the chain are `NaN`.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::observables::{keys, central_pair, Sample, TrajectoryRecord};

fn shifted(p: &[f64], j: usize, d: isize) -> Option<f64> {
    let k = j as isize + d;
    (k >= 0 && (k as usize) < p.len()).then(|| p[k as usize])
}

/// `(p_j + p_{j+d}) / 2` on the clean profile at `time`.
pub fn superposed_profile(clean: &TrajectoryRecord, d: isize, time: f64) -> Result<Vec<f64>> {
    let p = clean.sample_at(time)?.get(keys::SZ_PROFILE)?;
    Ok(shift_average(p, d))
}

/// Shifted average of an arbitrary per-site series.
pub fn shift_average(p: &[f64], d: isize) -> Vec<f64> {
    (0..p.len()).map(|j| shifted(p, j, d).map_or(f64::NAN, |q| 0.5 * (p[j] + q))).collect()
}

/// `(p_j + 2 p_{j+1} + p_{j+2}) / 4` on the clean profile at `time`.
pub fn two_hole_profile(clean: &TrajectoryRecord, time: f64) -> Result<Vec<f64>> {
    let p = clean.sample_at(time)?.get(keys::SZ_PROFILE)?;
    Ok(Kernel::for_shifts(&[1, 1]).apply(p))
}

/// Weights on shifted copies of a clean profile. Each defect with shift
/// `d` convolves the kernel with `(delta_0 + delta_d) / 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel(Vec<(usize, f64)>);

impl Kernel {
    pub fn identity() -> Self {
        Kernel(vec![(0, 1.0)])
    }

    pub fn shift(d: usize) -> Self {
        Self::for_shifts(&[d])
    }

    pub fn for_shifts(shifts: &[usize]) -> Self {
        let mut w = vec![1.0];
        for &d in shifts {
            let mut next = vec![0.0; w.len() + d];
            for (o, x) in w.iter().enumerate() {
                next[o] += 0.5 * x;
                next[o + d] += 0.5 * x;
            }
            w = next;
        }
        Kernel(w.into_iter().enumerate().filter(|(_, x)| *x != 0.0).collect())
    }

    pub fn weights(&self) -> &[(usize, f64)] {
        &self.0
    }

    pub fn reach(&self) -> usize {
        self.0.iter().map(|p| p.0).max().unwrap_or(0)
    }

    /// `sum_o w_o p_{j+o}`; `NaN` where `j + o` leaves the chain.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        (0..p.len())
            .map(|j| {
                if j + self.reach() >= p.len() {
                    return f64::NAN;
                }
                self.0.iter().map(|&(o, w)| w * p[j + o]).sum()
            })
            .collect()
    }
}

/// Sign of the product term in the shifted `S^z S^z` prediction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZetaForm {
    /// Averaged products minus the product of averaged magnetizations, so
    /// that `d = 0` returns the connected correlator.
    #[default]
    Connected,
    /// Plus sign on the product term.
    PlusProduct,
}

fn raw_product(s: &Sample, prefix: &str, d: usize, dx: usize) -> Result<f64> {
    if d > 2 {
        return Err(Error::InsufficientData(format!("products are stored for shifts up to 2, not {d}")));
    }
    let key = format!("{prefix}_d{d}");
    let v = s
        .at(&key, dx)
        .map_err(|_| Error::InsufficientData(format!("`{key}` has no entry for dx = {dx} at t = {}", s.time)))?;
    if v.is_nan() {
        return Err(Error::InsufficientData(format!("`{key}` undefined for dx = {dx}")));
    }
    Ok(v)
}

fn kernel_zeta(s: &Sample, kernel: &Kernel, dx: usize, form: ZetaForm) -> Result<f64> {
    let sz = s.get(keys::SZ_PROFILE)?;
    let (i, j) = central_pair(sz.len(), dx)?;
    if j + kernel.reach() > sz.len() {
        return Err(Error::InsufficientData(format!("site {} outside the chain", j + kernel.reach())));
    }
    let (mut p, mut mi, mut mj) = (0.0, 0.0, 0.0);
    for &(o, w) in kernel.weights() {
        p += w * raw_product(s, "szsz", o, dx)?;
        mi += w * sz[i - 1 + o];
        mj += w * sz[j - 1 + o];
    }
    Ok(match form {
        ZetaForm::Connected => p - mi * mj,
        ZetaForm::PlusProduct => p + mi * mj,
    })
}

fn kernel_chi(s: &Sample, kernel: &Kernel, dx: usize) -> Result<f64> {
    let mut acc = 0.0;
    for &(o, w) in kernel.weights() {
        acc += w * raw_product(s, "sxsx", o, dx)?;
    }
    Ok(acc)
}

/// Prediction for `zeta` from the clean run's raw products and magnetizations.
pub fn superposed_zeta(clean: &TrajectoryRecord, d: usize, dx: usize, time: f64, form: ZetaForm) -> Result<f64> {
    kernel_zeta(clean.sample_at(time)?, &Kernel::shift(d), dx, form)
}

/// Prediction for `chi`: average of the unshifted and shifted `S^x S^x` products.
pub fn superposed_chi(clean: &TrajectoryRecord, d: usize, dx: usize, time: f64) -> Result<f64> {
    kernel_chi(clean.sample_at(time)?, &Kernel::shift(d), dx)
}

/// Predicted observables of a defect run derived from a clean record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperpositionPrediction {
    pub kernel: Kernel,
    pub time: f64,
    /// `sz_profile`, `zeta` and `chi` keyed as in the trajectory record.
    pub values: BTreeMap<String, Vec<f64>>,
}

impl SuperpositionPrediction {
    /// Predictions wherever the clean record holds the needed data; correlator
    /// entries without data are `NaN`.
    pub fn from_clean(clean: &TrajectoryRecord, kernel: &Kernel, time: f64, form: ZetaForm) -> Result<Self> {
        let s = clean.sample_at(time)?;
        let mut values = BTreeMap::new();
        let prof = kernel.apply(s.get(keys::SZ_PROFILE)?);
        let half = prof.len() / 2;
        values.insert(keys::SZ_PROFILE.to_string(), prof);
        let zeta = (1..=half).map(|dx| kernel_zeta(s, kernel, dx, form).unwrap_or(f64::NAN)).collect();
        let chi = (1..=half).map(|dx| kernel_chi(s, kernel, dx).unwrap_or(f64::NAN)).collect();
        values.insert(keys::ZETA.to_string(), zeta);
        values.insert(keys::CHI.to_string(), chi);
        Ok(SuperpositionPrediction { kernel: kernel.clone(), time, values })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Sup,
    L2,
}

/// Norm of `a - b` over the 1-based inclusive `region`.
pub fn deviation(a: &[f64], b: &[f64], region: RangeInclusive<usize>, norm: Norm) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("series lengths differ: {} vs {}", a.len(), b.len())));
    }
    if *region.start() == 0 || *region.end() > a.len() || region.is_empty() {
        return Err(Error::Shape(format!("region {region:?} outside 1..={}", a.len())));
    }
    let mut acc: f64 = 0.0;
    for k in region {
        let (x, y) = (a[k - 1], b[k - 1]);
        if x.is_nan() || y.is_nan() {
            return Err(Error::InsufficientData(format!("entry {k} undefined")));
        }
        let e = (x - y).abs();
        match norm {
            Norm::Sup => acc = acc.max(e),
            Norm::L2 => acc += e * e,
        }
    }
    Ok(match norm {
        Norm::Sup => acc,
        Norm::L2 => acc.sqrt(),
    })
}

/// RMS of the third difference `(p_j - 3 p_{j+1} + 3 p_{j+2} - p_{j+3}) / 8`
/// over all four-site windows of `region` (1-based, inclusive). A pure
/// alternation of amplitude `a` gives `a`; polynomials up to second order
/// give zero.
pub fn beating_amplitude(profile: &[f64], region: RangeInclusive<usize>) -> Result<f64> {
    let (lo, hi) = (*region.start(), *region.end());
    if lo == 0 || hi > profile.len() || hi < lo + 3 {
        return Err(Error::Shape(format!("region {lo}..={hi} must hold at least four sites of 1..={}", profile.len())));
    }
    let mut acc = 0.0;
    let mut n = 0;
    for j in lo - 1..=hi - 4 {
        let c = (profile[j] - 3.0 * profile[j + 1] + 3.0 * profile[j + 2] - profile[j + 3]) / 8.0;
        if c.is_nan() {
            continue;
        }
        acc += c * c;
        n += 1;
    }
    if n == 0 {
        return Err(Error::InsufficientData("no defined entries in region".into()));
    }
    Ok((acc / n as f64).sqrt())
}

/// Fractional position (1-based) where the profile drops through zero,
/// choosing the crossing closest to the chain center.
pub fn zero_crossing(profile: &[f64]) -> Result<f64> {
    let center = (profile.len() as f64 + 1.0) / 2.0;
    let mut best: Option<f64> = None;
    for j in 0..profile.len().saturating_sub(1) {
        let (a, b) = (profile[j], profile[j + 1]);
        if a > 0.0 && b <= 0.0 {
            let x = (j + 1) as f64 + a / (a - b);
            if best.is_none_or(|y| (x - center).abs() < (y - center).abs()) {
                best = Some(x);
            }
        }
    }
    best.ok_or_else(|| Error::Tracking("profile never crosses zero from above".into()))
}

/// Leftward displacement of the defect profile's zero crossing relative to
/// the clean one.
pub fn profile_shift(defect: &[f64], clean: &[f64]) -> Result<f64> {
    Ok(zero_crossing(clean)? - zero_crossing(defect)?)
}

/// Time after which the right-moving part of a hole released at `j_h` has
/// passed a wall at `j_wall`: `(j_wall - j_h) / (2 t) + margin`.
pub fn after_transit_time(j_wall: f64, j_h: f64, hopping: f64, margin: f64) -> f64 {
    (j_wall - j_h) / (2.0 * hopping) + margin
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
}

/// What to follow in [`front_velocity`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tracer", rename_all = "kebab-case")]
pub enum Tracer {
    /// Outermost local maximum of the hole density `1 - n_j` in `direction`,
    /// refined by a parabola through the neighbours.
    HoleDensityPeak { direction: Direction, threshold: f64 },
    /// Outermost position in `direction` where the spin deficit
    /// `1/2 - <S^z_j>` exceeds `level`, linearly interpolated.
    MagnetizationCrossing { direction: Direction, level: f64 },
}

impl Tracer {
    pub fn hole_peak(direction: Direction) -> Self {
        Tracer::HoleDensityPeak { direction, threshold: 0.2 }
    }

    pub fn crossing(direction: Direction) -> Self {
        Tracer::MagnetizationCrossing { direction, level: 0.02 }
    }

    /// Tracer position (1-based, fractional) in one sample.
    pub fn position(&self, s: &Sample) -> Result<f64> {
        match *self {
            Tracer::HoleDensityPeak { direction, threshold } => {
                let n = s.get(keys::DENSITY)?;
                let h: Vec<f64> = n.iter().map(|x| 1.0 - x).collect();
                let max = h.iter().cloned().fold(f64::MIN, f64::max);
                if !(max > 1e-6) {
                    return Err(Error::Tracking(format!("no hole density at t = {}", s.time)));
                }
                let is_peak = |j: usize| {
                    let l = if j == 0 { f64::MIN } else { h[j - 1] };
                    let r = if j + 1 == h.len() { f64::MIN } else { h[j + 1] };
                    h[j] >= threshold * max && h[j] >= l && h[j] > r || h[j] >= threshold * max && h[j] > l && h[j] >= r
                };
                let mut idx: Vec<usize> = (0..h.len()).filter(|&j| is_peak(j)).collect();
                if direction == Direction::Left {
                    idx.reverse();
                }
                let j = *idx
                    .last()
                    .ok_or_else(|| Error::Tracking(format!("no hole-density peak at t = {}", s.time)))?;
                let mut x = j as f64;
                if j > 0 && j + 1 < h.len() {
                    let den = h[j - 1] - 2.0 * h[j] + h[j + 1];
                    if den < 0.0 {
                        x += 0.5 * (h[j - 1] - h[j + 1]) / den;
                    }
                }
                Ok(x + 1.0)
            }
            Tracer::MagnetizationCrossing { direction, level } => {
                let sz = s.get(keys::SZ_PROFILE)?;
                let def: Vec<f64> = sz.iter().map(|x| 0.5 - x).collect();
                let n = def.len();
                let order: Vec<usize> = match direction {
                    Direction::Left => (0..n).collect(),
                    Direction::Right => (0..n).rev().collect(),
                };
                for w in order.windows(2) {
                    let (a, b) = (def[w[0]], def[w[1]]);
                    if a < level && b >= level {
                        let f = (level - a) / (b - a);
                        return Ok(w[0] as f64 + f * (w[1] as f64 - w[0] as f64) + 1.0);
                    }
                }
                Err(Error::Tracking(format!("spin deficit never reaches {level} at t = {}", s.time)))
            }
        }
    }
}

/// Least-squares fit of tracer position against time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityFit {
    /// Signed velocity along the chain (sites per unit time).
    pub velocity: f64,
    pub intercept: f64,
    pub points: usize,
    /// Distance covered between the first and last fitted positions.
    pub displacement: f64,
}

/// Velocity of `tracer` over samples with `window.0 <= t <= window.1`. The
/// tracer must cover at least five sites.
pub fn front_velocity(traj: &TrajectoryRecord, tracer: &Tracer, window: (f64, f64)) -> Result<VelocityFit> {
    let mut pts = Vec::new();
    for s in &traj.samples {
        if s.time >= window.0 - 1e-9 && s.time <= window.1 + 1e-9 {
            pts.push((s.time, tracer.position(s)?));
        }
    }
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!("{} samples in the fit window", pts.len())));
    }
    let displacement = (pts.last().unwrap().1 - pts[0].1).abs();
    if displacement < 5.0 {
        return Err(Error::InsufficientData(format!("tracer moved only {displacement:.2} sites")));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mx = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let stx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mx)).sum();
    if stt == 0.0 {
        return param("fit window holds a single time");
    }
    let velocity = stx / stt;
    Ok(VelocityFit { velocity, intercept: mx - velocity * mt, points: pts.len(), displacement })
}

/// One row of a defect/prediction/clean comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub time: f64,
    pub index: usize,
    pub defect: f64,
    pub prediction: f64,
    pub clean: f64,
    pub deviation: f64,
}

/// Compares `key` of a defect run with its shifted-average prediction at
/// every time both records share.
pub fn comparison_table(
    defect: &TrajectoryRecord,
    clean: &TrajectoryRecord,
    kernel: &Kernel,
    key: &str,
    form: ZetaForm,
) -> Result<Vec<ComparisonRow>> {
    if defect.metadata.length != clean.metadata.length {
        return param("defect and clean runs have different chain lengths");
    }
    let mut rows = Vec::new();
    for s in &defect.samples {
        let Ok(c) = clean.sample_at(s.time) else { continue };
        let pred = SuperpositionPrediction::from_clean(clean, kernel, s.time, form)?;
        let p = pred
            .values
            .get(key)
            .ok_or_else(|| Error::Lookup(format!("no prediction for `{key}`")))?;
        let dv = s.get(key)?;
        let cv = c.get(key)?;
        for (k, ((&x, &y), &z)) in dv.iter().zip(p).zip(cv).enumerate() {
            if y.is_nan() || x.is_nan() {
                continue;
            }
            rows.push(ComparisonRow { time: s.time, index: k + 1, defect: x, prediction: y, clean: z, deviation: x - y });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::RunMetadata;

    fn record(samples: Vec<(f64, Vec<(&str, Vec<f64>)>)>, length: usize) -> TrajectoryRecord {
        let mut r = TrajectoryRecord::new(RunMetadata { length, ..Default::default() });
        for (t, kv) in samples {
            let values = kv.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
            r.push(Sample { time: t, values }).unwrap();
        }
        r
    }

    fn wall(l: usize) -> Vec<f64> {
        (0..l).map(|j| if j < l / 2 { 0.5 } else { -0.5 }).collect()
    }

    #[test]
    fn superposition_of_a_sharp_wall() {
        let r = record(vec![(0.0, vec![("sz_profile", wall(8))])], 8);
        assert_eq!(superposed_profile(&r, 0, 0.0).unwrap(), wall(8));
        let p = superposed_profile(&r, 1, 0.0).unwrap();
        assert_eq!(p[0], 0.5);
        assert_eq!(p[3], 0.0);
        assert!(p[7].is_nan());
        assert!(matches!(superposed_profile(&r, 1, 0.3), Err(Error::Lookup(_))));
    }

    #[test]
    fn shift_symmetry_and_two_hole_kernel() {
        let p: Vec<f64> = (0..12).map(|j| (0.7 * j as f64).sin() * 0.5).collect();
        let plus = shift_average(&p, 2);
        let minus = shift_average(&p, -2);
        for j in 0..10 {
            assert_eq!(plus[j], minus[j + 2]);
        }
        let r = record(vec![(1.0, vec![("sz_profile", p.clone())])], 12);
        let two = two_hole_profile(&r, 1.0).unwrap();
        let twice = shift_average(&shift_average(&p, 1), 1);
        let k = Kernel::for_shifts(&[1, 1]);
        assert_eq!(k.weights(), &[(0, 0.25), (1, 0.5), (2, 0.25)]);
        let via_kernel = k.apply(&p);
        for j in 0..10 {
            assert!((two[j] - twice[j]).abs() < 1e-15);
            assert_eq!(two[j], via_kernel[j]);
        }
        assert!(via_kernel[10].is_nan());
        let flat = record(vec![(0.0, vec![("sz_profile", vec![0.3; 6])])], 6);
        assert!(two_hole_profile(&flat, 0.0).unwrap()[..4].iter().all(|&x| x == 0.3));
    }

    fn product_record(l: usize, sz: Vec<f64>) -> TrajectoryRecord {
        let mut kv = vec![("sz_profile", sz.clone())];
        let mut prods = Vec::new();
        for d in 0..3 {
            let v: Vec<f64> = (1..=l / 2)
                .map_while(|dx| {
                    let (i, j) = central_pair(l, dx).unwrap();
                    (j + d <= l).then(|| sz[i + d - 1] * sz[j + d - 1])
                })
                .collect();
            prods.push(v);
        }
        for (d, v) in prods.into_iter().enumerate() {
            kv.push((["szsz_d0", "szsz_d1", "szsz_d2"][d], v.clone()));
            kv.push((["sxsx_d0", "sxsx_d1", "sxsx_d2"][d], vec![0.0; v.len()]));
        }
        record(vec![(0.0, kv)], l)
    }

    #[test]
    fn zeta_prediction_on_product_states() {
        let r = product_record(12, wall(12));
        // far from the wall on opposite sides
        assert_eq!(superposed_zeta(&r, 1, 4, 0.0, ZetaForm::Connected).unwrap(), 0.0);
        assert_eq!(superposed_zeta(&r, 1, 4, 0.0, ZetaForm::PlusProduct).unwrap(), -0.5);
        assert_eq!(superposed_chi(&r, 2, 3, 0.0).unwrap(), 0.0);
        assert!(matches!(superposed_zeta(&r, 3, 1, 0.0, ZetaForm::Connected), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn zeta_prediction_at_zero_shift_is_connected() {
        let l = 10;
        let sz: Vec<f64> = (0..l).map(|j| 0.4 * (1.3 * j as f64).cos()).collect();
        let mut r = product_record(l, sz.clone());
        // add a connected part to the raw products
        let extra = [0.01, -0.02, 0.03, 0.0, 0.05];
        let v = r.samples[0].values.get_mut("szsz_d0").unwrap();
        for (x, e) in v.iter_mut().zip(extra) {
            *x += e;
        }
        for dx in 1..=5 {
            let z = superposed_zeta(&r, 0, dx, 0.0, ZetaForm::Connected).unwrap();
            assert!((z - extra[dx - 1]).abs() < 1e-15);
        }
    }

    #[test]
    fn deviation_norms() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(deviation(&a, &a, 1..=3, Norm::Sup).unwrap(), 0.0);
        let b = [1.5, 2.5, 3.5];
        assert_eq!(deviation(&a, &b, 1..=3, Norm::Sup).unwrap(), 0.5);
        assert_eq!(deviation(&[1.0, 0.0], &[0.0, 1.0], 1..=2, Norm::L2).unwrap(), 2f64.sqrt());
        assert!(matches!(deviation(&a, &[1.0], 1..=1, Norm::Sup), Err(Error::Shape(_))));
        assert!(matches!(deviation(&a, &b, 0..=2, Norm::Sup), Err(Error::Shape(_))));
    }

    #[test]
    fn beating_detector() {
        assert_eq!(beating_amplitude(&[0.2; 8], 1..=8).unwrap(), 0.0);
        let alt: Vec<f64> = (0..8).map(|j| if j % 2 == 0 { 0.3 } else { -0.3 }).collect();
        assert!((beating_amplitude(&alt, 1..=8).unwrap() - 0.3).abs() < 1e-15);
        assert!((beating_amplitude(&alt, 3..=6).unwrap() - 0.3).abs() < 1e-15);
        let quad: Vec<f64> = (0..8).map(|j| 0.1 * j as f64 + 0.02 * (j * j) as f64).collect();
        assert!(beating_amplitude(&quad, 1..=8).unwrap() < 1e-15);
        // a one-site average removes the alternation
        let avg = shift_average(&alt, 1);
        assert!(beating_amplitude(&avg, 1..=7).unwrap() < 1e-15);
        assert!(beating_amplitude(&alt, 2..=4).is_err());
    }

    #[test]
    fn zero_crossing_and_shift() {
        let clean = wall(10);
        assert!((zero_crossing(&clean).unwrap() - 5.5).abs() < 1e-15);
        let mut shifted = vec![0.5; 10];
        for x in shifted.iter_mut().skip(4) {
            *x = -0.5;
        }
        assert!((profile_shift(&shifted, &clean).unwrap() - 1.0).abs() < 1e-15);
        assert!(zero_crossing(&[0.5; 4]).is_err());
    }

    #[test]
    fn ballistic_front_velocity() {
        // hole density of a free particle released at site 5 of 41: |J_{j-5}(2t)|^2
        let l = 41;
        let mut samples = Vec::new();
        for k in 0..=12 {
            let t = 0.5 * k as f64;
            let n: Vec<f64> = (0..l).map(|j| 1.0 - bessel_j((j as i32) - 4, 2.0 * t).powi(2)).collect();
            samples.push((t, vec![("density", n)]));
        }
        let r = record(samples, l);
        let fit = front_velocity(&r, &Tracer::hole_peak(Direction::Right), (2.0, 6.0)).unwrap();
        assert!((fit.velocity - 2.0).abs() < 0.2, "{}", fit.velocity);
        assert!(front_velocity(&r, &Tracer::hole_peak(Direction::Right), (0.0, 0.5)).is_err());
    }

    /// Integer-order Bessel function by its integral representation.
    fn bessel_j(n: i32, x: f64) -> f64 {
        let m = 2000;
        let h = std::f64::consts::PI / m as f64;
        let f = |t: f64| (n as f64 * t - x * t.sin()).cos();
        let mut s = f(0.0) + f(std::f64::consts::PI);
        for i in 1..m {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        s * h / 3.0 / std::f64::consts::PI
    }

    #[test]
    fn comparison_rows_cover_shared_times() {
        let clean = record(vec![(0.0, vec![("sz_profile", wall(6))]), (1.0, vec![("sz_profile", wall(6))])], 6);
        let defect = record(vec![(1.0, vec![("sz_profile", wall(6))])], 6);
        let rows = comparison_table(&defect, &clean, &Kernel::shift(1), "sz_profile", ZetaForm::Connected).unwrap();
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[2].prediction, 0.0);
        assert_eq!(rows[2].deviation, 0.5);
    }
}
