//! Fixed-size helpers for the three-dimensional decision space.

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: &Vec3, k: f64) -> Vec3 {
    [a[0] * k, a[1] * k, a[2] * k]
}

/// Hadamard product.
#[inline]
pub fn hadamard(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] * b[0], a[1] * b[1], a[2] * b[2]]
}

#[inline]
pub fn is_finite(a: &Vec3) -> bool {
    a.iter().all(|v| v.is_finite())
}

pub fn mat_scale(m: &Mat3, k: f64) -> Mat3 {
    let mut out = *m;
    out.iter_mut().flatten().for_each(|v| *v *= k);
    out
}

pub fn mat_add(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = *a;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] += b[i][j];
        }
    }
    out
}

pub fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

/// Frobenius norm of `m - mᵀ`.
pub fn asymmetry(m: &Mat3) -> f64 {
    let mut acc = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let d = m[i][j] - m[j][i];
            acc += d * d;
        }
    }
    acc.sqrt()
}

pub fn symmetrize(m: &Mat3) -> Mat3 {
    let mut out = *m;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = 0.5 * (m[i][j] + m[j][i]);
        }
    }
    out
}

/// Eigenvalues of a symmetric 3×3 matrix in ascending order.
///
/// Trigonometric solution of the characteristic cubic; the input is assumed
/// symmetric (only the upper triangle is read).
pub fn symmetric_eigenvalues(m: &Mat3) -> Vec3 {
    let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    if p1 == 0.0 {
        let mut d = [m[0][0], m[1][1], m[2][2]];
        d.sort_by(|a, b| a.total_cmp(b));
        return d;
    }
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    // B = (m - qI) / p
    let b = |i: usize, j: usize| {
        let v = if i == j { m[i][j] - q } else { m[i.min(j)][i.max(j)] };
        v / p
    };
    let det_b = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(1, 2))
        - b(0, 1) * (b(0, 1) * b(2, 2) - b(1, 2) * b(0, 2))
        + b(0, 2) * (b(0, 1) * b(1, 2) - b(1, 1) * b(0, 2));
    let r = (det_b / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let largest = q + 2.0 * p * phi.cos();
    let smallest = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let middle = 3.0 * q - largest - smallest;
    [smallest, middle, largest]
}

/// Spectral norm of a symmetric matrix.
pub fn symmetric_spectral_norm(m: &Mat3) -> f64 {
    let e = symmetric_eigenvalues(m);
    e[0].abs().max(e[2].abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_and_known_spectrum() {
        let d = [[3.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 2.0]];
        assert_eq!(symmetric_eigenvalues(&d), [-1.0, 2.0, 3.0]);
        // [[2,1,0],[1,2,0],[0,0,5]] has eigenvalues 1, 3, 5.
        let m = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 5.0]];
        let e = symmetric_eigenvalues(&m);
        for (a, b) in e.iter().zip([1.0, 3.0, 5.0]) {
            assert!((a - b).abs() < 1e-12, "{e:?}");
        }
        assert!((symmetric_spectral_norm(&m) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn symmetrize_removes_asymmetry() {
        let m = [[1.0, 2.0, 0.0], [0.0, 1.0, 0.0], [4.0, 0.0, 1.0]];
        assert!((asymmetry(&m) - 40f64.sqrt()).abs() < 1e-12);
        assert_eq!(asymmetry(&symmetrize(&m)), 0.0);
    }
}
