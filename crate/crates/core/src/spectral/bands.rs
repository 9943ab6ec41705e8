use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Floquet,
    GammaScan,
    MFunction,
}

/// Sorted, disjoint closed intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandSet {
    bands: Vec<(f64, f64)>,
    provenance: Provenance,
}

impl BandSet {
    /// Sort and merge overlapping or touching intervals.
    pub fn new(mut bands: Vec<(f64, f64)>, provenance: Provenance) -> Result<Self> {
        if bands.iter().any(|&(a, b)| !a.is_finite() || !b.is_finite() || b < a) {
            return Err(Error::Precondition("band endpoints must be finite with lo <= hi".into()));
        }
        bands.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(bands.len());
        for (a, b) in bands {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        Ok(Self { bands: out, provenance })
    }

    pub fn empty(provenance: Provenance) -> Self {
        Self { bands: Vec::new(), provenance }
    }

    pub fn bands(&self) -> &[(f64, f64)] {
        &self.bands
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    /// Lebesgue measure.
    pub fn measure(&self) -> f64 {
        self.bands.iter().map(|(a, b)| b - a).sum()
    }

    pub fn contains(&self, e: f64) -> bool {
        let k = self.bands.partition_point(|b| b.1 < e);
        k < self.bands.len() && self.bands[k].0 <= e
    }

    pub fn intersection(&self, other: &Self) -> Vec<(f64, f64)> {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < self.bands.len() && j < other.bands.len() {
            let (a0, a1) = self.bands[i];
            let (b0, b1) = other.bands[j];
            let (lo, hi) = (a0.max(b0), a1.min(b1));
            if lo <= hi {
                out.push((lo, hi));
            }
            if a1 < b1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        out
    }

    pub fn intersection_measure(&self, other: &Self) -> f64 {
        self.intersection(other).iter().map(|(a, b)| b - a).sum()
    }

    pub fn symmetric_difference_measure(&self, other: &Self) -> f64 {
        (self.measure() + other.measure() - 2.0 * self.intersection_measure(other)).max(0.0)
    }

    /// Distance from `e` to the set; infinite for the empty set.
    pub fn distance_to(&self, e: f64) -> f64 {
        let k = self.bands.partition_point(|b| b.1 < e);
        let mut d = f64::INFINITY;
        if k < self.bands.len() {
            d = d.min((self.bands[k].0 - e).max(0.0));
        }
        if k > 0 {
            d = d.min(e - self.bands[k - 1].1);
        }
        d
    }

    /// Hausdorff distance between the two closed sets.
    pub fn hausdorff_distance(&self, other: &Self) -> f64 {
        if self.is_empty() && other.is_empty() {
            return 0.0;
        }
        let one_way = |p: &Self, q: &Self| {
            // The farthest point of a band from q lies at an endpoint or at
            // the midpoint of a gap of q inside the band.
            let mut worst: f64 = 0.0;
            for &(a, b) in &p.bands {
                worst = worst.max(q.distance_to(a)).max(q.distance_to(b));
                for w in q.bands.windows(2) {
                    let mid = 0.5 * (w[0].1 + w[1].0);
                    if mid > a && mid < b {
                        worst = worst.max(q.distance_to(mid));
                    }
                }
            }
            worst
        };
        one_way(self, other).max(one_way(other, self))
    }

    /// Number of boxes `[lo + kε, lo + (k+1)ε)` meeting the set.
    pub fn box_count(&self, eps: f64) -> usize {
        let Some(&(lo, _)) = self.bands.first() else {
            return 0;
        };
        let mut count = 0;
        let mut last: Option<i64> = None;
        for &(a, b) in &self.bands {
            let k0 = ((a - lo) / eps).floor() as i64;
            let k1 = ((b - lo) / eps).floor() as i64;
            let start = match last {
                Some(l) if l >= k0 => l + 1,
                _ => k0,
            };
            if k1 >= start {
                count += (k1 - start + 1) as usize;
            }
            last = Some(last.map_or(k1, |l| l.max(k1)));
        }
        count
    }

    /// Least-squares slope of `ln N(ε)` against `ln(1/ε)`.
    pub fn box_dimension(&self, scales: &[f64]) -> Option<f64> {
        let pts: Vec<(f64, f64)> = scales
            .iter()
            .filter_map(|&e| {
                let n = self.box_count(e);
                (n > 0).then(|| ((1.0 / e).ln(), (n as f64).ln()))
            })
            .collect();
        slope(&pts)
    }
}

/// Least-squares slope; `None` with fewer than two distinct abscissae.
pub(crate) fn slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(b: &[(f64, f64)]) -> BandSet {
        BandSet::new(b.to_vec(), Provenance::Floquet).unwrap()
    }

    #[test]
    fn merges_and_measures() {
        let s = set(&[(3.0, 4.0), (0.0, 1.0), (0.5, 2.0), (2.0, 2.5)]);
        assert_eq!(s.bands(), &[(0.0, 2.5), (3.0, 4.0)]);
        assert_eq!(s.measure(), 3.5);
        assert!(s.contains(2.5) && !s.contains(2.7) && s.contains(3.0));
        assert!(BandSet::new(vec![(1.0, 0.0)], Provenance::Floquet).is_err());
    }

    #[test]
    fn set_operations() {
        let a = set(&[(0.0, 2.0), (3.0, 5.0)]);
        let b = set(&[(1.0, 4.0)]);
        assert_eq!(a.intersection_measure(&b), 2.0);
        assert_eq!(a.symmetric_difference_measure(&b), 3.0);
        assert_eq!(a.hausdorff_distance(&a), 0.0);
        let c = set(&[(0.0, 2.1), (3.0, 4.9)]);
        assert!((a.hausdorff_distance(&c) - 0.1).abs() < 1e-12);
        // A gap inside a band of the other set counts at its midpoint.
        let d = set(&[(0.0, 5.0)]);
        assert!((a.hausdorff_distance(&d) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn middle_thirds_box_dimension() {
        let mut bands = vec![(0.0, 1.0)];
        for _ in 0..9 {
            bands = bands
                .iter()
                .flat_map(|&(a, b)| {
                    let t = (b - a) / 3.0;
                    [(a, a + t), (b - t, b)]
                })
                .collect();
        }
        let s = set(&bands);
        // Boxes offset by half a cell to avoid counting touching endpoints.
        let scales: Vec<f64> = (1..=6).map(|k| 3f64.powi(-k) * 1.0001).collect();
        let d = s.box_dimension(&scales).unwrap();
        assert!((d - 2f64.ln() / 3f64.ln()).abs() < 0.05, "{d}");
        assert!((set(&[(0.0, 1.0)]).box_dimension(&scales).unwrap() - 1.0).abs() < 0.02);
    }

    proptest! {
        #[test]
        fn symmetric_difference_is_a_metric(
            a in prop::collection::vec((0.0f64..10.0, 0.0f64..1.0), 0..6),
            b in prop::collection::vec((0.0f64..10.0, 0.0f64..1.0), 0..6),
        ) {
            let a = set(&a.iter().map(|&(x, w)| (x, x + w)).collect::<Vec<_>>());
            let b = set(&b.iter().map(|&(x, w)| (x, x + w)).collect::<Vec<_>>());
            let d = a.symmetric_difference_measure(&b);
            prop_assert!(d >= 0.0);
            prop_assert!((d - b.symmetric_difference_measure(&a)).abs() < 1e-12);
            prop_assert!(a.intersection_measure(&b) <= a.measure().min(b.measure()) + 1e-12);
            prop_assert!(a.symmetric_difference_measure(&a) < 1e-12);
        }
    }
}
