//! Fixed-size 2D/3D linear algebra for the registration problems.

pub type Vec2 = [f64; 2];
pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY3: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn rotate2(theta: f64, p: Vec2) -> Vec2 {
    let (s, c) = theta.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

pub fn rot_x(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

pub fn rot_y(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

pub fn rot_z(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

/// Intrinsic Z-Y-X: `R = Rz(α)·Ry(β)·Rx(γ)`.
pub fn euler_zyx(alpha: f64, beta: f64, gamma: f64) -> Mat3 {
    mat_mul(&mat_mul(&rot_z(alpha), &rot_y(beta)), &rot_x(gamma))
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

pub fn mat_vec(a: &Mat3, v: &Vec3) -> Vec3 {
    [0, 1, 2].map(|i| a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2])
}

pub fn det(a: &Mat3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Frobenius norm of `RᵀR − I`.
pub fn orthogonality_defect(r: &Mat3) -> f64 {
    let rtr = mat_mul(&transpose(r), r);
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let d = rtr[i][j] - IDENTITY3[i][j];
            s += d * d;
        }
    }
    s.sqrt()
}

pub fn rotate_cloud(r: &Mat3, cloud: &[Vec3]) -> Vec<Vec3> {
    cloud.iter().map(|p| mat_vec(r, p)).collect()
}

pub fn centroid<const D: usize>(pts: &[[f64; D]]) -> [f64; D] {
    let mut c = [0.0; D];
    for p in pts {
        for d in 0..D {
            c[d] += p[d];
        }
    }
    let n = pts.len().max(1) as f64;
    c.map(|v| v / n)
}

/// Largest coordinate range over all axes.
pub fn max_extent<const D: usize>(pts: &[[f64; D]]) -> f64 {
    (0..D)
        .map(|d| {
            let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p[d]), hi.max(p[d]))
            });
            if pts.is_empty() {
                0.0
            } else {
                hi - lo
            }
        })
        .fold(0.0, f64::max)
}

/// Centers at the centroid and scales the largest coordinate range to 1.
pub fn normalize_extent<const D: usize>(pts: &mut [[f64; D]]) {
    let c = centroid(pts);
    let e = max_extent(pts);
    let s = if e > 0.0 { 1.0 / e } else { 1.0 };
    for p in pts.iter_mut() {
        for d in 0..D {
            p[d] = (p[d] - c[d]) * s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euler_is_rotation() {
        let r = euler_zyx(0.3, -0.2, 0.1);
        assert!(orthogonality_defect(&r) < 1e-12);
        assert!((det(&r) - 1.0).abs() < 1e-12);
        assert_eq!(euler_zyx(0.0, 0.0, 0.0), IDENTITY3);
    }

    #[test]
    fn normalization() {
        let mut pts = vec![[0.0, 0.0], [4.0, 1.0], [2.0, 3.0]];
        normalize_extent(&mut pts);
        assert!((max_extent(&pts) - 1.0).abs() < 1e-12);
        let c = centroid(&pts);
        assert!(c[0].abs() < 1e-12 && c[1].abs() < 1e-12);
    }

    #[test]
    fn rotate2_quarter_turn() {
        let p = rotate2(std::f64::consts::FRAC_PI_2, [1.0, 0.0]);
        assert!(p[0].abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
    }
}
