//! Point-cloud statistics: centroid, population covariance, closed-form
//! eigen-decomposition for 2×2 and 3×3 symmetric matrices, and the Gaussian
//! ellipse used to draw annotation clouds.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Points of a common dimension (2 or 3), in millimetres.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new<I, P>(points: I) -> Result<Self>
    where
        I: IntoIterator<Item = P>,
        P: AsRef<[f64]>,
    {
        let mut dim = None;
        let mut coords = Vec::new();
        for p in points {
            let p = p.as_ref();
            let d = *dim.get_or_insert(p.len());
            if p.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData("non-finite point coordinate".into()));
            }
            coords.extend_from_slice(p);
        }
        let dim = dim.ok_or(Error::Empty("point cloud"))?;
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        Ok(PointCloud { dim, coords })
    }

    pub fn from_xy(points: impl IntoIterator<Item = [f64; 2]>) -> Result<Self> {
        Self::new(points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn mean(&self) -> Vec<f64> {
        centroid(self.points(), self.dim)
    }

    /// Euclidean distance of every point to the centroid.
    pub fn deviations(&self) -> Vec<f64> {
        let mean = self.mean();
        self.points()
            .map(|p| p.iter().zip(&mean).map(|(a, m)| (a - m).powi(2)).sum::<f64>().sqrt())
            .collect()
    }

    /// Applies `f` to every point, keeping dimension.
    pub fn map(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<PointCloud> {
        PointCloud::new(self.points().map(&mut f))
    }
}

/// Componentwise mean of `dim`-dimensional points.
///
/// Accumulates offsets from the first point, so identical points give their
/// exact coordinate back and large absolute offsets do not cost precision.
pub fn centroid<'a>(points: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Vec<f64> {
    let mut points = points.into_iter();
    let Some(first) = points.next() else {
        return vec![f64::NAN; dim];
    };
    let mut sum = vec![0.0; dim];
    let mut n = 1usize;
    for p in points {
        for ((s, v), o) in sum.iter_mut().zip(p).zip(first) {
            *s += v - o;
        }
        n += 1;
    }
    first.iter().zip(&sum).map(|(o, s)| o + s / n as f64).collect()
}

/// Mean, population covariance and sorted eigenpairs of a cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSummary {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Descending, clamped at zero.
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[i]` is the unit eigenvector for `eigenvalues[i]`.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl CovarianceSummary {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("dim >= 2")
    }
}

/// Computes `(1/P)(L - L̄)ᵀ(L - L̄)` and its eigen-decomposition.
#[allow(clippy::needless_range_loop)]
pub fn summarize(cloud: &PointCloud) -> Result<CovarianceSummary> {
    let n = cloud.dim();
    let p = cloud.len() as f64;
    let mean = cloud.mean();
    let mut cov = vec![vec![0.0; n]; n];
    for pt in cloud.points() {
        for i in 0..n {
            let di = pt[i] - mean[i];
            for j in i..n {
                cov[i][j] += di * (pt[j] - mean[j]);
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            cov[i][j] /= p;
            cov[j][i] = cov[i][j];
        }
    }

    let (mut eigenvalues, eigenvectors) = match n {
        2 => {
            let (vals, vecs) = eigen_symmetric_2([[cov[0][0], cov[0][1]], [cov[1][0], cov[1][1]]]);
            (vals.to_vec(), vecs.iter().map(|v| v.to_vec()).collect::<Vec<_>>())
        }
        3 => {
            let m = [
                [cov[0][0], cov[0][1], cov[0][2]],
                [cov[1][0], cov[1][1], cov[1][2]],
                [cov[2][0], cov[2][1], cov[2][2]],
            ];
            let (vals, vecs) = eigen_symmetric_3(m);
            (vals.to_vec(), vecs.iter().map(|v| v.to_vec()).collect())
        }
        d => return Err(Error::UnsupportedDimension(d)),
    };

    let tol = 1e-12 * eigenvalues[0].abs().max(1.0);
    for v in &mut eigenvalues {
        if *v < -tol {
            return Err(Error::Consistency(format!("covariance eigenvalue {v} is negative")));
        }
        *v = v.max(0.0);
    }
    Ok(CovarianceSummary {
        mean,
        covariance: cov,
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenpairs of a symmetric 2×2 matrix via the closed-form quadratic, sorted descending.
pub fn eigen_symmetric_2(m: [[f64; 2]; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    let (a, b, c) = (m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]);
    let half_sum = 0.5 * (a + c);
    let half_diff = 0.5 * (a - c);
    let radius = half_diff.hypot(b);
    let (l1, l2) = (half_sum + radius, half_sum - radius);

    let v1 = if b == 0.0 {
        if a >= c {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        }
    } else {
        // Two candidate rows of the adjugate; take the better conditioned.
        let p = [l1 - c, b];
        let q = [b, l1 - a];
        let pick = if p[0].hypot(p[1]) >= q[0].hypot(q[1]) { p } else { q };
        let norm = pick[0].hypot(pick[1]);
        [pick[0] / norm, pick[1] / norm]
    };
    ([l1, l2], [v1, [-v1[1], v1[0]]])
}

/// Eigenpairs of a symmetric 3×3 matrix, sorted descending.
///
/// Eigenvalues use the trigonometric solution of the characteristic cubic.
/// Vectors: the best-separated eigenvalue's vector comes from a cross product
/// of rows of `A - λI`; the other two from the 2×2 problem on its orthogonal
/// complement, which stays stable when those two eigenvalues coincide.
pub fn eigen_symmetric_3(m: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let a = symmetrize(m);
    let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
    if off == 0.0 {
        let mut pairs: Vec<(f64, [f64; 3])> = (0..3)
            .map(|i| {
                let mut e = [0.0; 3];
                e[i] = 1.0;
                (a[i][i], e)
            })
            .collect();
        pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
        return (
            [pairs[0].0, pairs[1].0, pairs[2].0],
            [pairs[0].1, pairs[1].1, pairs[2].1],
        );
    }

    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * off;
    let p = (p2 / 6.0).sqrt();
    let mut b = a;
    for (i, row) in b.iter_mut().enumerate() {
        row[i] -= q;
        for v in row.iter_mut() {
            *v /= p;
        }
    }
    let r = (det3(&b) / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let l1 = q + 2.0 * p * phi.cos();
    let l3 = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    let l2 = 3.0 * q - l1 - l3;

    let distinct = if l1 - l2 >= l2 - l3 { l1 } else { l3 };
    let scale = p.max(q.abs()).max(f64::MIN_POSITIVE);
    let Some(w) = null_vector(&a, distinct, scale) else {
        // Numerically a multiple of the identity.
        return ([l1, l2, l3], [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    };
    let (u, v) = complement_basis(w);
    let au = mat_vec(&a, u);
    let av = mat_vec(&a, v);
    let sub = [[dot(u, au), dot(u, av)], [dot(v, au), dot(v, av)]];
    let (sub_vals, sub_vecs) = eigen_symmetric_2(sub);
    let lift = |c: [f64; 2]| {
        let x = [
            c[0] * u[0] + c[1] * v[0],
            c[0] * u[1] + c[1] * v[1],
            c[0] * u[2] + c[1] * v[2],
        ];
        normalize(x).unwrap_or(x)
    };
    // The trigonometric roots lose precision near repeated eigenvalues, so the
    // reported values come from the Rayleigh quotient and the 2x2 sub-problem.
    let mut pairs = [
        (dot(w, mat_vec(&a, w)), w),
        (sub_vals[0], lift(sub_vecs[0])),
        (sub_vals[1], lift(sub_vecs[1])),
    ];
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    (
        [pairs[0].0, pairs[1].0, pairs[2].0],
        [pairs[0].1, pairs[1].1, pairs[2].1],
    )
}

fn symmetrize(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut a = m;
    for i in 0..3 {
        for j in (i + 1)..3 {
            let s = 0.5 * (m[i][j] + m[j][i]);
            a[i][j] = s;
            a[j][i] = s;
        }
    }
    a
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

fn normalize(v: [f64; 3]) -> Option<[f64; 3]> {
    let n = dot(v, v).sqrt();
    (n > 0.0).then(|| [v[0] / n, v[1] / n, v[2] / n])
}

/// Unit vector spanning the null space of `a - λI`, when that space is one-dimensional.
fn null_vector(a: &[[f64; 3]; 3], lambda: f64, scale: f64) -> Option<[f64; 3]> {
    let mut rows = *a;
    for (i, row) in rows.iter_mut().enumerate() {
        row[i] -= lambda;
    }
    let candidates = [
        cross(rows[0], rows[1]),
        cross(rows[0], rows[2]),
        cross(rows[1], rows[2]),
    ];
    let best = candidates
        .into_iter()
        .max_by(|x, y| dot(*x, *x).total_cmp(&dot(*y, *y)))
        .expect("three candidates");
    if dot(best, best).sqrt() <= 1e-14 * scale * scale {
        return None;
    }
    normalize(best)
}

fn complement_basis(w: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let u = if w[0].abs() > w[1].abs() {
        let n = w[0].hypot(w[2]);
        [-w[2] / n, 0.0, w[0] / n]
    } else {
        let n = w[1].hypot(w[2]);
        [0.0, w[2] / n, -w[1] / n]
    };
    (u, cross(w, u))
}

/// A covariance ellipse scaled to `k_sigma` standard deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: [f64; 2],
    /// Major then minor semi-axis, mm.
    pub semi_axes: [f64; 2],
    /// Unit directions of the major and minor axes.
    pub axes: [[f64; 2]; 2],
}

impl Ellipse {
    /// Major-axis direction in radians, folded into (-π/2, π/2].
    pub fn orientation(&self) -> f64 {
        let [x, y] = self.axes[0];
        let mut theta = y.atan2(x);
        if theta > PI / 2.0 {
            theta -= PI;
        } else if theta <= -PI / 2.0 {
            theta += PI;
        }
        theta
    }

    pub fn is_degenerate(&self) -> bool {
        self.semi_axes[1] == 0.0
    }
}

pub fn ellipse_params(summary: &CovarianceSummary, k_sigma: f64) -> Result<Ellipse> {
    if summary.dim() != 2 {
        return Err(Error::UnsupportedDimension(summary.dim()));
    }
    if !(k_sigma.is_finite() && k_sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "k_sigma must be positive, got {k_sigma}"
        )));
    }
    let ev = &summary.eigenvectors;
    Ok(Ellipse {
        center: [summary.mean[0], summary.mean[1]],
        semi_axes: [
            k_sigma * summary.eigenvalues[0].sqrt(),
            k_sigma * summary.eigenvalues[1].sqrt(),
        ],
        axes: [[ev[0][0], ev[0][1]], [ev[1][0], ev[1][1]]],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_pair_summary() {
        let cloud = PointCloud::from_xy([[1.0, 0.0], [-1.0, 0.0]]).unwrap();
        let s = summarize(&cloud).unwrap();
        assert_eq!(s.mean, vec![0.0, 0.0]);
        assert_eq!(s.covariance, vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(s.eigenvalues, vec![1.0, 0.0]);
    }

    #[test]
    fn single_point_has_zero_covariance() {
        let s = summarize(&PointCloud::from_xy([[5.0, 5.0]]).unwrap()).unwrap();
        assert_eq!(s.eigenvalues, vec![0.0, 0.0]);
        assert!(s.covariance.iter().flatten().all(|v| *v == 0.0));
        let e = ellipse_params(&s, 2.0).unwrap();
        assert_eq!(e.semi_axes, [0.0, 0.0]);
    }

    #[test]
    fn ellipse_axes_scale_with_sqrt_eigenvalues() {
        let s = CovarianceSummary {
            mean: vec![0.0, 0.0],
            covariance: vec![vec![4.0, 0.0], vec![0.0, 1.0]],
            eigenvalues: vec![4.0, 1.0],
            eigenvectors: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        assert_eq!(ellipse_params(&s, 2.0).unwrap().semi_axes, [4.0, 2.0]);
        assert!(ellipse_params(&s, 0.0).is_err());
    }

    #[test]
    fn ellipse_rejects_3d() {
        let cloud = PointCloud::new([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]]).unwrap();
        let s = summarize(&cloud).unwrap();
        assert!(matches!(ellipse_params(&s, 1.0), Err(Error::UnsupportedDimension(3))));
    }

    #[test]
    fn cloud_construction_errors() {
        assert!(matches!(PointCloud::from_xy([]), Err(Error::Empty(_))));
        assert!(matches!(
            PointCloud::new([vec![0.0, 0.0], vec![1.0, 2.0, 3.0]]),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
        assert!(matches!(
            PointCloud::new([vec![1.0]]),
            Err(Error::UnsupportedDimension(1))
        ));
    }

    #[test]
    fn eigen3_handles_repeated_eigenvalues() {
        // diag(5, 2, 2) rotated about z.
        let (c, s) = (0.6f64, 0.8f64);
        let m = [
            [5.0 * c * c + 2.0 * s * s, 3.0 * c * s, 0.0],
            [3.0 * c * s, 5.0 * s * s + 2.0 * c * c, 0.0],
            [0.0, 0.0, 2.0],
        ];
        let (vals, vecs) = eigen_symmetric_3(m);
        assert!((vals[0] - 5.0).abs() < 1e-12);
        assert!((vals[1] - 2.0).abs() < 1e-12 && (vals[2] - 2.0).abs() < 1e-12);
        for (i, v) in vecs.iter().enumerate() {
            let av = mat_vec(&m, *v);
            for k in 0..3 {
                assert!((av[k] - vals[i] * v[k]).abs() < 1e-12);
            }
        }
        assert!(dot(vecs[1], vecs[2]).abs() < 1e-12);
    }

    #[test]
    fn eigen3_multiple_of_identity() {
        let (vals, vecs) = eigen_symmetric_3([[3.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 3.0]]);
        assert_eq!(vals, [3.0, 3.0, 3.0]);
        assert_eq!(vecs[0], [1.0, 0.0, 0.0]);
    }

    #[test]
    fn collinear_cloud_is_degenerate() {
        let cloud = PointCloud::from_xy([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).unwrap();
        let s = summarize(&cloud).unwrap();
        let e = ellipse_params(&s, 2.0).unwrap();
        assert!(s.eigenvalues[1] < 1e-15);
        assert!((e.orientation() - PI / 4.0).abs() < 1e-12);
    }
}
