//! Fixed-capacity vectors and small symmetric matrices.
//!
//! States in dimension `d <= 3` store padded `[f64; 3]` components; entries at
//! index `>= d` are kept at exactly `0.0`, so norms and dot products can loop
//! over all three lanes unconditionally.

/// Spatial vector padded to three components.
pub type Vec3 = [f64; 3];

pub const ZERO3: Vec3 = [0.0, 0.0, 0.0];

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Vec3, c: f64) -> Vec3 {
    [c * a[0], c * a[1], c * a[2]]
}

#[inline]
pub fn axpy(y: Vec3, c: f64, x: Vec3) -> Vec3 {
    [y[0] + c * x[0], y[1] + c * x[1], y[2] + c * x[2]]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm_sq(a: Vec3) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    norm_sq(a).sqrt()
}

#[inline]
pub fn is_finite(a: Vec3) -> bool {
    a[0].is_finite() && a[1].is_finite() && a[2].is_finite()
}

/// Symmetric `d x d` matrix stored padded to 3x3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat {
    pub dim: usize,
    pub a: [[f64; 3]; 3],
}

impl SymMat {
    pub fn new(dim: usize, entries: &[Vec<f64>]) -> Option<Self> {
        if !(1..=3).contains(&dim) || entries.len() != dim {
            return None;
        }
        let mut a = [[0.0; 3]; 3];
        for (i, row) in entries.iter().enumerate() {
            if row.len() != dim {
                return None;
            }
            for (j, &v) in row.iter().enumerate() {
                a[i][j] = v;
            }
        }
        for i in 0..dim {
            for j in 0..i {
                if (a[i][j] - a[j][i]).abs() > 1e-12 * (1.0 + a[i][j].abs()) {
                    return None;
                }
                // store an exactly symmetric copy
                a[j][i] = a[i][j];
            }
        }
        Some(SymMat { dim, a })
    }

    pub fn identity(dim: usize) -> Self {
        let mut a = [[0.0; 3]; 3];
        for (i, row) in a.iter_mut().enumerate().take(dim) {
            row[i] = 1.0;
        }
        SymMat { dim, a }
    }

    pub fn diag(dim: usize, d: &[f64]) -> Self {
        let mut a = [[0.0; 3]; 3];
        for i in 0..dim {
            a[i][i] = d[i];
        }
        SymMat { dim, a }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = *self;
        for row in out.a.iter_mut() {
            for v in row.iter_mut() {
                *v *= c;
            }
        }
        out
    }

    #[inline]
    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let mut out = ZERO3;
        for i in 0..self.dim {
            let mut s = 0.0;
            for j in 0..self.dim {
                s += self.a[i][j] * v[j];
            }
            out[i] = s;
        }
        out
    }

    #[inline]
    pub fn quad_form(&self, w: Vec3) -> f64 {
        dot(w, self.mul_vec(w))
    }

    /// Extremal eigenvalues by cyclic Jacobi rotations.
    pub fn eigen_range(&self) -> (f64, f64) {
        let d = self.dim;
        let mut m = self.a;
        for _ in 0..64 {
            let mut off = 0.0;
            for i in 0..d {
                for j in (i + 1)..d {
                    off += m[i][j] * m[i][j];
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..d {
                for q in (p + 1)..d {
                    if m[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = 0.5 * (m[q][q] - m[p][p]) / m[p][q];
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..d {
                        let (mkp, mkq) = (m[k][p], m[k][q]);
                        m[k][p] = c * mkp - s * mkq;
                        m[k][q] = s * mkp + c * mkq;
                    }
                    for k in 0..d {
                        let (mpk, mqk) = (m[p][k], m[q][k]);
                        m[p][k] = c * mpk - s * mqk;
                        m[q][k] = s * mpk + c * mqk;
                    }
                }
            }
        }
        let mut lo = m[0][0];
        let mut hi = m[0][0];
        for i in 1..d {
            lo = lo.min(m[i][i]);
            hi = hi.max(m[i][i]);
        }
        (lo, hi)
    }

    pub fn is_spd(&self) -> bool {
        let finite = self.a.iter().all(|r| r.iter().all(|v| v.is_finite()));
        finite && self.eigen_range().0 > 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_range_diag_and_rotated() {
        let m = SymMat::diag(2, &[1.0, 2.0]);
        let (lo, hi) = m.eigen_range();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 2.0).abs() < 1e-12);

        // [[2,1],[1,2]] has eigenvalues 1 and 3
        let m = SymMat::new(2, &[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let (lo, hi) = m.eigen_range();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);

        let m = SymMat::new(
            3,
            &[
                vec![2.0, 1.0, 0.0],
                vec![1.0, 2.0, 1.0],
                vec![0.0, 1.0, 2.0],
            ],
        )
        .unwrap();
        let (lo, hi) = m.eigen_range();
        let r2 = std::f64::consts::SQRT_2;
        assert!((lo - (2.0 - r2)).abs() < 1e-12);
        assert!((hi - (2.0 + r2)).abs() < 1e-12);
    }

    #[test]
    fn spd_rejects_indefinite() {
        let m = SymMat::new(2, &[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(!m.is_spd());
        assert!(SymMat::identity(3).is_spd());
    }

    #[test]
    fn asymmetric_entries_rejected() {
        assert!(SymMat::new(2, &[vec![1.0, 0.5], vec![0.2, 1.0]]).is_none());
    }
}
