//! Sorting-based neighbor index (L2 only).
//!
//! Points are keyed by their signed projection onto the first principal
//! direction of the indexed set. Since the direction has unit length,
//! `|key(x) - key(y)| <= |x - y|_2`, so a query only needs exact distance
//! checks for entries whose key lies within `epsilon` of its own key. That
//! window is found by binary search.

use crate::model::{Counters, MetricSpec, Norm, StoredPoint};
use crate::periodic::StaticIndex;
use crate::scalar::Scalar;

const POWER_ITERATIONS: usize = 1000;
const POWER_TOLERANCE: f64 = 1e-8;

/// Unit vector along which the mean-centred `points` vary most.
///
/// Power iteration on the covariance matrix, started from the normalised
/// all-ones vector. The sign is fixed so that the first non-zero component is
/// positive. When the points have no spread (including a single point) the
/// first basis vector is returned.
pub fn principal_direction<T: Scalar>(points: &[&[T]]) -> Vec<T> {
    assert!(!points.is_empty(), "principal direction of an empty set");
    let d = points[0].len();
    if d == 0 {
        return Vec::new();
    }
    let mean = mean(points);
    let cov = covariance(points, &mean);

    let basis = |k: usize| {
        let mut e = vec![T::zero(); d];
        e[k] = T::one();
        e
    };
    let start = vec![T::one() / T::of(d as f64).sqrt(); d];
    let mut v = match normalized(mat_vec(&cov, &start)) {
        Some(v) => v,
        None => {
            // the all-ones start is orthogonal to every direction of spread
            let k = (0..d)
                .max_by(|&a, &b| cov[a][a].partial_cmp(&cov[b][b]).expect("finite"))
                .expect("d > 0");
            match normalized(mat_vec(&cov, &basis(k))) {
                Some(v) => v,
                None => return basis(0),
            }
        }
    };
    let tol = T::of(POWER_TOLERANCE);
    for _ in 0..POWER_ITERATIONS {
        let Some(next) = normalized(mat_vec(&cov, &v)) else {
            break;
        };
        let change = next
            .iter()
            .zip(&v)
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
            .sqrt();
        v = next;
        if change <= tol {
            break;
        }
    }
    if let Some(first) = v.iter().copied().find(|x| *x != T::zero()) {
        if first < T::zero() {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    v
}

fn mean<T: Scalar>(points: &[&[T]]) -> Vec<T> {
    let d = points[0].len();
    let n = T::of(points.len() as f64);
    let mut m = vec![T::zero(); d];
    for p in points {
        for (acc, &x) in m.iter_mut().zip(p.iter()) {
            *acc = *acc + x;
        }
    }
    m.iter_mut().for_each(|x| *x = *x / n);
    m
}

fn covariance<T: Scalar>(points: &[&[T]], mean: &[T]) -> Vec<Vec<T>> {
    let d = mean.len();
    let mut c = vec![vec![T::zero(); d]; d];
    let mut centred = vec![T::zero(); d];
    for p in points {
        for k in 0..d {
            centred[k] = p[k] - mean[k];
        }
        for i in 0..d {
            for j in i..d {
                c[i][j] = c[i][j] + centred[i] * centred[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            c[i][j] = c[j][i];
        }
    }
    c
}

fn mat_vec<T: Scalar>(m: &[Vec<T>], v: &[T]) -> Vec<T> {
    m.iter()
        .map(|row| row.iter().zip(v).fold(T::zero(), |acc, (&a, &b)| acc + a * b))
        .collect()
}

fn normalized<T: Scalar>(mut v: Vec<T>) -> Option<Vec<T>> {
    let norm = v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
    if !(norm > T::zero()) || !norm.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x = *x / norm);
    Some(v)
}

#[derive(Clone, Debug)]
pub struct SnnIndex<T> {
    mean: Vec<T>,
    direction: Vec<T>,
    // ascending by (key, id)
    keys: Vec<T>,
    points: Vec<StoredPoint<T>>,
    max_abs_key: T,
}

impl<T: Scalar> SnnIndex<T> {
    pub fn build(points: Vec<StoredPoint<T>>) -> Self {
        if points.is_empty() {
            return SnnIndex {
                mean: Vec::new(),
                direction: Vec::new(),
                keys: Vec::new(),
                points,
                max_abs_key: T::zero(),
            };
        }
        let coords: Vec<&[T]> = points.iter().map(|p| &p.coords[..]).collect();
        let mean = mean(&coords);
        let direction = principal_direction(&coords);
        let mut keyed: Vec<(T, StoredPoint<T>)> = points
            .into_iter()
            .map(|p| (project(&mean, &direction, &p.coords), p))
            .collect();
        keyed.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .expect("finite keys")
                .then(a.1.id.cmp(&b.1.id))
        });
        let max_abs_key = keyed.iter().fold(T::zero(), |m, (k, _)| m.max(k.abs()));
        let (keys, points) = keyed.into_iter().unzip();
        SnnIndex {
            mean,
            direction,
            keys,
            points,
            max_abs_key,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn direction(&self) -> &[T] {
        &self.direction
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn keys(&self) -> &[T] {
        &self.keys
    }

    pub fn entries(&self) -> impl Iterator<Item = (T, &StoredPoint<T>)> {
        self.keys.iter().copied().zip(&self.points)
    }

    /// Projection of `coords` onto the index direction, relative to the mean.
    pub fn key(&self, coords: &[T]) -> T {
        project(&self.mean, &self.direction, coords)
    }

    /// Index range of entries whose key may be within `epsilon` of `key`.
    pub fn window(&self, key: T, epsilon: T) -> std::ops::Range<usize> {
        // rounding slack around the mathematically safe window
        let slack = T::of(64.0) * T::epsilon() * (key.abs() + epsilon + self.max_abs_key);
        let lo = key - epsilon - slack;
        let hi = key + epsilon + slack;
        let start = self.keys.partition_point(|&k| k < lo);
        let end = self.keys.partition_point(|&k| k <= hi);
        start..end.max(start)
    }

    /// Witnesses of `query` among the stored points, ascending.
    pub fn query(
        &self,
        query: &StoredPoint<T>,
        metric: &MetricSpec<T>,
        counters: &mut Counters,
    ) -> Vec<u64> {
        debug_assert_eq!(metric.norm, Norm::L2, "sorted index supports L2 only");
        if self.points.is_empty() {
            return Vec::new();
        }
        let window = self.window(self.key(&query.coords), metric.epsilon);
        let mut out = Vec::new();
        for p in &self.points[window] {
            counters.comparisons += 1;
            if metric.is_witness(p, query) {
                out.push(p.id);
            }
        }
        out.sort_unstable();
        out
    }
}

fn project<T: Scalar>(mean: &[T], direction: &[T], coords: &[T]) -> T {
    coords
        .iter()
        .zip(mean)
        .zip(direction)
        .fold(T::zero(), |acc, ((&x, &m), &v)| acc + (x - m) * v)
}

impl<T: Scalar> StaticIndex<T> for SnnIndex<T> {
    type Params = ();

    fn build(points: Vec<StoredPoint<T>>, _: &()) -> Self {
        SnnIndex::build(points)
    }

    fn query(
        &self,
        query: &StoredPoint<T>,
        metric: &MetricSpec<T>,
        counters: &mut Counters,
    ) -> Vec<u64> {
        SnnIndex::query(self, query, metric, counters)
    }

    fn into_points(self) -> Vec<StoredPoint<T>> {
        self.points
    }

    fn len(&self) -> usize {
        self.points.len()
    }

    fn node_count(&self) -> usize {
        self.keys.len()
    }

    fn name() -> &'static str {
        "snn"
    }

    fn supports(norm: Norm) -> bool {
        norm == Norm::L2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Label;

    fn pt(id: u64, coords: &[f64]) -> StoredPoint<f64> {
        StoredPoint {
            id,
            label: Label(id % 2),
            coords: coords.into(),
            cats: Box::new([]),
        }
    }

    #[test]
    fn direction_of_axis_aligned_line() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 0.0]).collect();
        let refs: Vec<&[f64]> = pts.iter().map(|p| &p[..]).collect();
        let v = principal_direction(&refs);
        assert!((v[0] - 1.0).abs() < 1e-12 && v[1].abs() < 1e-12);
    }

    #[test]
    fn degenerate_sets_use_first_basis_vector() {
        let one = [0.3, 0.7, 0.1];
        assert_eq!(principal_direction(&[&one[..]]), vec![1.0, 0.0, 0.0]);
        let same = vec![&one[..]; 5];
        assert_eq!(principal_direction(&same), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn start_vector_orthogonal_to_spread() {
        // spread only along (1, -1), which the all-ones start cannot see
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, -(i as f64)]).collect();
        let refs: Vec<&[f64]> = pts.iter().map(|p| &p[..]).collect();
        let v = principal_direction(&refs);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[0] - h).abs() < 1e-12 && (v[1] + h).abs() < 1e-12, "{v:?}");
    }

    #[test]
    fn collinear_keys_are_signed_positions() {
        // points on the line through (1, 1) with direction (3, 4) / 5
        let ts = [-2.0, -0.5, 0.0, 1.0, 3.5];
        let pts: Vec<_> = ts
            .iter()
            .enumerate()
            .map(|(i, t)| pt(i as u64, &[1.0 + 0.6 * t, 1.0 + 0.8 * t]))
            .collect();
        let idx = SnnIndex::build(pts);
        let mean_t = ts.iter().sum::<f64>() / ts.len() as f64;
        for (key, p) in idx.entries() {
            let t = ts[p.id as usize] - mean_t;
            assert!((key.abs() - t.abs()).abs() < 1e-12);
            assert!((key - t).abs() < 1e-12 || (key + t).abs() < 1e-12);
        }
        assert!(idx.keys().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn far_query_does_no_exact_checks() {
        let pts: Vec<_> = (0..100).map(|i| pt(i, &[i as f64 / 100.0, 0.0])).collect();
        let idx = SnnIndex::build(pts);
        let m = MetricSpec::with_epsilon(Norm::L2, 0.05).unwrap();
        let mut c = Counters::default();
        assert!(idx.query(&pt(1000, &[50.0, 0.0]), &m, &mut c).is_empty());
        assert_eq!(c.comparisons, 0);
    }

    #[test]
    fn empty_index() {
        let idx = SnnIndex::<f64>::build(vec![]);
        let m = MetricSpec::with_epsilon(Norm::L2, 0.05).unwrap();
        let mut c = Counters::default();
        assert!(idx.query(&pt(0, &[0.0]), &m, &mut c).is_empty());
    }
}
