//! Distances and divergences between summary vectors or raw sample sets.
//!
//! All estimators except [`kl_knn`] are symmetric in their arguments.

use crate::error::{Result, SbiError};
use crate::summaries::SummaryVec;

/// `n` points in `R^q`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    data: Vec<f64>,
    dim: usize,
}

impl SampleSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map(Vec::len).ok_or(SbiError::Empty("sample set"))?;
        if dim == 0 {
            return Err(SbiError::InvalidParameter("points must have positive dimension".into()));
        }
        let mut data = Vec::with_capacity(points.len() * dim);
        for p in &points {
            if p.len() != dim {
                return Err(SbiError::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            data.extend_from_slice(p);
        }
        Self::from_flat(data, dim)
    }

    /// Scalar observations treated as i.i.d. draws.
    pub fn scalar(values: Vec<f64>) -> Result<Self> {
        Self::from_flat(values, 1)
    }

    fn from_flat(data: Vec<f64>, dim: usize) -> Result<Self> {
        if data.is_empty() {
            return Err(SbiError::Empty("sample set"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(SbiError::InvalidParameter("samples must be finite".into()));
        }
        Ok(Self { data, dim })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    fn values_1d(&self) -> Result<&[f64]> {
        if self.dim != 1 {
            return Err(SbiError::DimensionMismatch {
                expected: 1,
                got: self.dim,
            });
        }
        Ok(&self.data)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelFamily {
    Gaussian,
}

/// Gaussian kernel `k(x, y) = exp(-|x - y|^2 / (2 h^2))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(SbiError::InvalidParameter(format!(
                "kernel bandwidth must be positive, got {bandwidth}"
            )));
        }
        Ok(Self {
            family: KernelFamily::Gaussian,
            bandwidth,
        })
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian => {
                let d2 = sq_dist(a, b);
                (-d2 / (2.0 * self.bandwidth * self.bandwidth)).exp()
            }
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn euclidean(a: &SummaryVec, b: &SummaryVec) -> Result<f64> {
    euclidean_slices(a.as_slice(), b.as_slice())
}

pub fn euclidean_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(SbiError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(sq_dist(a, b).sqrt())
}

fn check_same_dim(x: &SampleSet, y: &SampleSet) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(SbiError::DimensionMismatch {
            expected: x.dim(),
            got: y.dim(),
        });
    }
    Ok(())
}

/// Unbiased U-statistic estimate of the squared MMD. Can be negative.
pub fn mmd2_unbiased(x: &SampleSet, y: &SampleSet, kernel: &KernelSpec) -> Result<f64> {
    check_same_dim(x, y)?;
    for s in [x, y] {
        if s.len() < 2 {
            return Err(SbiError::TooFewSamples {
                needed: 2,
                got: s.len(),
            });
        }
    }
    let within = |s: &SampleSet| {
        let n = s.len();
        let mut acc = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                acc += kernel.eval(s.point(i), s.point(j));
            }
        }
        2.0 * acc / (n as f64 * (n as f64 - 1.0))
    };
    let mut cross = 0.0;
    for a in x.points() {
        for b in y.points() {
            cross += kernel.eval(a, b);
        }
    }
    let (m, n) = (x.len() as f64, y.len() as f64);
    Ok(within(x) + within(y) - 2.0 * cross / (m * n))
}

/// Median pairwise Euclidean distance, or 1.0 when that median is zero.
pub fn median_heuristic_bandwidth(z: &SampleSet) -> f64 {
    let n = z.len();
    let mut d = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            d.push(sq_dist(z.point(i), z.point(j)).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let k = d.len();
    let med = if k % 2 == 1 {
        d[k / 2]
    } else {
        0.5 * (d[k / 2 - 1] + d[k / 2])
    };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

/// Pools two sample sets of equal dimension.
pub fn pooled(x: &SampleSet, y: &SampleSet) -> Result<SampleSet> {
    check_same_dim(x, y)?;
    let mut data = x.data.clone();
    data.extend_from_slice(&y.data);
    SampleSet::from_flat(data, x.dim)
}

/// Distance from `q` to its k-th nearest neighbour in sorted `s`. When
/// `skip_self` is set, one copy of `q` itself is excluded.
fn kth_nn_sorted(s: &[f64], q: f64, k: usize, skip_self: bool) -> f64 {
    let mut right = s.partition_point(|&v| v < q);
    let mut left = right; // candidates are s[..left] and s[right..]
    let mut skipped = !skip_self;
    let mut found = 0;
    let mut dist = 0.0;
    while found < k {
        let dl = if left > 0 { q - s[left - 1] } else { f64::INFINITY };
        let dr = if right < s.len() { s[right] - q } else { f64::INFINITY };
        if dr <= dl {
            dist = dr;
            right += 1;
        } else {
            dist = dl;
            left -= 1;
        }
        if !skipped && dist == 0.0 {
            skipped = true;
            continue;
        }
        found += 1;
    }
    dist
}

fn kth_nn_brute(s: &SampleSet, q: &[f64], k: usize, skip: Option<usize>) -> f64 {
    let mut best = vec![f64::INFINITY; k];
    for (j, p) in s.points().enumerate() {
        if Some(j) == skip {
            continue;
        }
        let d = sq_dist(p, q);
        if d < best[k - 1] {
            let pos = best.partition_point(|&b| b <= d);
            best.insert(pos, d);
            best.pop();
        }
    }
    best[k - 1].sqrt()
}

/// k-nearest-neighbour estimate of `KL(P_x || P_y)`:
/// `(q/n) sum_i log(nu_k(i) / rho_k(i)) + log(m / (n - 1))`, where `rho_k` is
/// the k-NN radius of `x_i` within `x` and `nu_k` its k-NN radius into `y`.
/// Not symmetric.
pub fn kl_knn(x: &SampleSet, y: &SampleSet, k: usize) -> Result<f64> {
    check_same_dim(x, y)?;
    if k == 0 {
        return Err(SbiError::InvalidParameter("k must be at least 1".into()));
    }
    let (n, m) = (x.len(), y.len());
    if n <= k {
        return Err(SbiError::TooFewSamples { needed: k + 1, got: n });
    }
    if m < k {
        return Err(SbiError::TooFewSamples { needed: k, got: m });
    }
    let radii: Vec<(f64, f64)> = if x.dim() == 1 {
        let mut xs = x.data.clone();
        let mut ys = y.data.clone();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        x.data
            .iter()
            .map(|&q| (kth_nn_sorted(&xs, q, k, true), kth_nn_sorted(&ys, q, k, false)))
            .collect()
    } else {
        x.points()
            .enumerate()
            .map(|(i, q)| (kth_nn_brute(x, q, k, Some(i)), kth_nn_brute(y, q, k, None)))
            .collect()
    };
    let mut acc = 0.0;
    for (i, (rho, nu)) in radii.into_iter().enumerate() {
        if rho == 0.0 || nu == 0.0 {
            return Err(SbiError::ZeroRadius { index: i });
        }
        acc += (nu / rho).ln();
    }
    Ok(x.dim() as f64 * acc / n as f64 + (m as f64 / (n as f64 - 1.0)).ln())
}

/// Order-1 Wasserstein distance between two empirical measures on the line,
/// integrating `|F^-1(u) - G^-1(u)|` exactly over the merged quantile breakpoints.
pub fn wasserstein_1d(x: &SampleSet, y: &SampleSet) -> Result<f64> {
    let mut a = x.values_1d()?.to_vec();
    let mut b = y.values_1d()?.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a.len() == b.len() {
        let n = a.len() as f64;
        return Ok(a.iter().zip(&b).map(|(p, q)| (p - q).abs()).sum::<f64>() / n);
    }
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut u = 0.0;
    let mut total = 0.0;
    while i < n && j < m {
        // next breakpoint of either quantile function, compared exactly as (i+1)/n vs (j+1)/m
        let lhs = (i + 1) * m;
        let rhs = (j + 1) * n;
        let next = if lhs <= rhs {
            (i + 1) as f64 / n as f64
        } else {
            (j + 1) as f64 / m as f64
        };
        total += (next - u) * (a[i] - b[j]).abs();
        u = next;
        if lhs <= rhs {
            i += 1;
        }
        if rhs <= lhs {
            j += 1;
        }
    }
    Ok(total)
}

/// Two-sample Cramer-von Mises criterion
/// `nm/(n+m)^2 * sum_{z in pooled} (F_n(z) - G_m(z))^2`.
pub fn cvm(x: &SampleSet, y: &SampleSet) -> Result<f64> {
    let mut a = x.values_1d()?.to_vec();
    let mut b = y.values_1d()?.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut acc = 0.0;
    while i < a.len() || j < b.len() {
        let z = match (a.get(i), b.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        let (i0, j0) = (i, j);
        while i < a.len() && a[i] <= z {
            i += 1;
        }
        while j < b.len() && b[j] <= z {
            j += 1;
        }
        let diff = i as f64 / n - j as f64 / m;
        // every pooled point tied at z sees the same ECDF values
        acc += ((i - i0) + (j - j0)) as f64 * diff * diff;
    }
    Ok(n * m / ((n + m) * (n + m)) * acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn sv(v: &[f64]) -> SummaryVec {
        SummaryVec::new(v.to_vec()).unwrap()
    }

    fn normals(seed: u64, n: usize, mean: f64, sd: f64) -> SampleSet {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        SampleSet::scalar((0..n).map(|_| mean + sd * rng.sample::<f64, _>(StandardNormal)).collect()).unwrap()
    }

    #[test]
    fn euclidean_examples() {
        assert_eq!(euclidean(&sv(&[1.0, 0.0]), &sv(&[1.0, 0.0])).unwrap(), 0.0);
        assert!((euclidean(&sv(&[1.0, 0.0]), &sv(&[0.000702, 0.0])).unwrap() - 0.999298).abs() < 1e-12);
        assert_eq!(euclidean(&sv(&[3.0, 4.0]), &sv(&[0.0, 0.0])).unwrap(), 5.0);
        assert!(euclidean(&sv(&[1.0]), &sv(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn mmd_far_apart_sets() {
        let eps = 1e-6;
        let x = SampleSet::scalar(vec![0.0, eps]).unwrap();
        let y = SampleSet::scalar(vec![100.0, 100.0 + eps]).unwrap();
        let k = KernelSpec::gaussian(1.0).unwrap();
        // each within-term is k(0, eps) ~ 1, the cross term underflows to 0
        let expected = 2.0 * (-eps * eps / 2.0f64).exp();
        assert!((mmd2_unbiased(&x, &y, &k).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn mmd_hand_evaluated() {
        let x = SampleSet::scalar(vec![0.0, 1.0]).unwrap();
        let k = KernelSpec::gaussian(1.0).unwrap();
        let v = mmd2_unbiased(&x, &x, &k).unwrap();
        let e = (-0.5f64).exp();
        assert!((v - (e - 1.0)).abs() < 1e-14);
        assert!((v + 0.3935).abs() < 1e-4);
    }

    #[test]
    fn mmd_needs_two_points() {
        let x = SampleSet::scalar(vec![0.0]).unwrap();
        let y = SampleSet::scalar(vec![0.0, 1.0]).unwrap();
        let k = KernelSpec::gaussian(1.0).unwrap();
        assert!(mmd2_unbiased(&x, &y, &k).is_err());
        assert!(KernelSpec::gaussian(0.0).is_err());
    }

    #[test]
    fn mmd_unbiased_at_null() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let vals: Vec<f64> = (0..1000)
            .map(|r| mmd2_unbiased(&normals(2 * r, 50, 0.0, 1.0), &normals(2 * r + 1, 50, 0.0, 1.0), &k).unwrap())
            .collect();
        let m = crate::stats::mean(&vals);
        let se = crate::stats::std_dev(&vals) / (vals.len() as f64).sqrt();
        assert!(m.abs() < 4.0 * se, "{m} ± {se}");
    }

    #[test]
    fn median_heuristic_examples() {
        let s = |v: &[f64]| SampleSet::scalar(v.to_vec()).unwrap();
        assert_eq!(median_heuristic_bandwidth(&s(&[0.0, 1.0])), 1.0);
        assert_eq!(median_heuristic_bandwidth(&s(&[0.0, 0.0, 0.0])), 1.0);
        assert_eq!(median_heuristic_bandwidth(&s(&[0.0, 1.0, 3.0])), 2.0);
    }

    #[test]
    fn kl_gaussian_oracles() {
        let n = 5000;
        let base = normals(1, n, 0.0, 1.0);
        let same = kl_knn(&base, &normals(2, n, 0.0, 1.0), 1).unwrap();
        assert!(same.abs() < 0.05, "{same}");
        let shifted = kl_knn(&base, &normals(3, n, 1.0, 1.0), 1).unwrap();
        assert!((shifted - 0.5).abs() < 0.1, "{shifted}");
        let wide = kl_knn(&base, &normals(4, n, 0.0, 2.0), 1).unwrap();
        let exact = 2f64.ln() + 1.0 / 8.0 - 0.5;
        assert!((wide - exact).abs() < 0.1, "{wide} vs {exact}");
    }

    #[test]
    fn kl_is_asymmetric() {
        let a = normals(5, 2000, 0.0, 1.0);
        let b = normals(6, 2000, 1.0, 2.0);
        let ab = kl_knn(&a, &b, 1).unwrap();
        let ba = kl_knn(&b, &a, 1).unwrap();
        assert!((ab - ba).abs() > 0.1, "{ab} vs {ba}");
    }

    #[test]
    fn kl_duplicates_error() {
        let x = SampleSet::scalar(vec![0.0, 0.0, 1.0]).unwrap();
        let y = SampleSet::scalar(vec![0.5, 2.0]).unwrap();
        assert!(matches!(kl_knn(&x, &y, 1), Err(SbiError::ZeroRadius { .. })));
    }

    #[test]
    fn kl_1d_fast_path_matches_brute_force() {
        let x = normals(7, 300, 0.0, 1.0);
        let y = normals(8, 250, 0.3, 1.5);
        for k in [1, 3] {
            let fast = kl_knn(&x, &y, k).unwrap();
            let n = x.len();
            let brute: f64 = (0..n)
                .map(|i| (kth_nn_brute(&y, x.point(i), k, None) / kth_nn_brute(&x, x.point(i), k, Some(i))).ln())
                .sum::<f64>()
                / n as f64
                + (y.len() as f64 / (n as f64 - 1.0)).ln();
            assert!((fast - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn kl_multivariate_same_distribution() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut pts = |n: usize| {
            SampleSet::new(
                (0..n)
                    .map(|_| vec![rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)])
                    .collect(),
            )
            .unwrap()
        };
        let (a, b) = (pts(2000), pts(2000));
        assert!(kl_knn(&a, &b, 1).unwrap().abs() < 0.1);
    }

    #[test]
    fn wasserstein_examples() {
        let x = normals(10, 500, 0.0, 1.0);
        assert_eq!(wasserstein_1d(&x, &x).unwrap(), 0.0);
        let shifted = SampleSet::scalar(x.points().map(|p| p[0] + 0.7).collect()).unwrap();
        assert!((wasserstein_1d(&x, &shifted).unwrap() - 0.7).abs() < 1e-12);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let u1 = SampleSet::scalar((0..n).map(|_| rng.random::<f64>()).collect()).unwrap();
        let u2 = SampleSet::scalar((0..n).map(|_| 2.0 * rng.random::<f64>()).collect()).unwrap();
        assert!((wasserstein_1d(&u1, &u2).unwrap() - 0.5).abs() < 0.02);
    }

    #[test]
    fn wasserstein_unequal_sizes() {
        let a = SampleSet::scalar(vec![0.0, 1.0]).unwrap();
        let b = SampleSet::scalar(vec![0.0, 0.5, 1.0]).unwrap();
        // F^-1: 0 on (0,1/2], 1 on (1/2,1]; G^-1: 0, 0.5, 1 on thirds
        let expected = (1.0 / 6.0) * 0.5 + (1.0 / 6.0) * 0.5;
        assert!((wasserstein_1d(&a, &b).unwrap() - expected).abs() < 1e-12);
        assert!(wasserstein_1d(&a, &SampleSet::new(vec![vec![1.0, 2.0]]).unwrap()).is_err());
    }

    #[test]
    fn cvm_examples() {
        let x = normals(12, 400, 0.0, 1.0);
        assert!(cvm(&x, &x).unwrap() <= 1e-15);
        let shift = |c: f64| SampleSet::scalar(x.points().map(|p| p[0] + c).collect()).unwrap();
        let y = normals(13, 300, 0.0, 1.0);
        let ladder: Vec<f64> = [0.2, 0.6, 1.2].iter().map(|&c| cvm(&y, &shift(c)).unwrap()).collect();
        assert!(ladder[0] < ladder[1] && ladder[1] < ladder[2], "{ladder:?}");

        let t = |s: &SampleSet| SampleSet::scalar(s.points().map(|p| p[0].exp() * 3.0 + 1.0).collect()).unwrap();
        assert!((cvm(&x, &y).unwrap() - cvm(&t(&x), &t(&y)).unwrap()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn symmetric_discrepancies(
            a in prop::collection::vec(-5.0f64..5.0, 2..30),
            b in prop::collection::vec(-5.0f64..5.0, 2..30),
        ) {
            let x = SampleSet::scalar(a).unwrap();
            let y = SampleSet::scalar(b).unwrap();
            let k = KernelSpec::gaussian(1.3).unwrap();
            prop_assert!((mmd2_unbiased(&x, &y, &k).unwrap() - mmd2_unbiased(&y, &x, &k).unwrap()).abs() < 1e-12);
            prop_assert!((wasserstein_1d(&x, &y).unwrap() - wasserstein_1d(&y, &x).unwrap()).abs() < 1e-12);
            prop_assert!((cvm(&x, &y).unwrap() - cvm(&y, &x).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn mmd_permutation_invariant(
            a in prop::collection::vec(-5.0f64..5.0, 3..20),
            b in prop::collection::vec(-5.0f64..5.0, 3..20),
            rot in 0usize..20,
        ) {
            let k = KernelSpec::gaussian(0.8).unwrap();
            let base = mmd2_unbiased(&SampleSet::scalar(a.clone()).unwrap(), &SampleSet::scalar(b.clone()).unwrap(), &k).unwrap();
            let mut a2 = a.clone();
            a2.rotate_left(rot % a.len());
            a2.reverse();
            let mut b2 = b.clone();
            b2.rotate_right(rot % b.len());
            let permuted = mmd2_unbiased(&SampleSet::scalar(a2).unwrap(), &SampleSet::scalar(b2).unwrap(), &k).unwrap();
            prop_assert!((base - permuted).abs() < 1e-12);
        }

        #[test]
        fn euclidean_triangle_inequality(
            a in prop::collection::vec(-10.0f64..10.0, 3),
            b in prop::collection::vec(-10.0f64..10.0, 3),
            c in prop::collection::vec(-10.0f64..10.0, 3),
        ) {
            let (a, b, c) = (sv(&a), sv(&b), sv(&c));
            let ab = euclidean(&a, &b).unwrap();
            let bc = euclidean(&b, &c).unwrap();
            let ac = euclidean(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}
