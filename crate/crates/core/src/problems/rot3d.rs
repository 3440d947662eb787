//! 3D rotation estimation: three Euler angles as 5-bit bins each.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde_json::json;

use super::dataset::ProblemInstance;
use super::geometry::{centroid, euler_zyx, mat_mul, normalize_extent, rot_x, rot_y, rot_z, rotate_cloud, transpose, Mat3, Vec3};
use super::pointcloud::Pair3;
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

pub const ROT3D: &str = "rot3d";
pub const EULER_BITS: usize = 5;
pub const EULER_BINS: usize = 1 << EULER_BITS;
pub const FEATURE_LEN: usize = 9;
/// Half-ranges of α, β, γ: angles lie in `[−h, h]`.
pub const EULER_HALF_RANGE: [f64; 3] = [PI / 9.0, PI / 18.0, PI / 9.0];

pub fn bin_width(axis: usize) -> f64 {
    2.0 * EULER_HALF_RANGE[axis] / EULER_BINS as f64
}

/// Floor binning over `[−h, h]`, clamped; zero lands in bin 16.
pub fn euler_bin(axis: usize, angle: f64) -> usize {
    let h = EULER_HALF_RANGE[axis];
    (((angle + h) / bin_width(axis)).floor().max(0.0) as usize).min(EULER_BINS - 1)
}

pub fn bin_center(axis: usize, bin: usize) -> f64 {
    -EULER_HALF_RANGE[axis] + (bin as f64 + 0.5) * bin_width(axis)
}

pub fn encode_euler_angle(axis: usize, angle: f64) -> BitString {
    BitString::from_index(euler_bin(axis, angle) as u64, EULER_BITS)
}

pub fn decode_euler_angle(axis: usize, bits: &BitString) -> Result<f64> {
    if bits.len() != EULER_BITS {
        return Err(Error::Dimension {
            what: "Euler angle bitstring",
            expected: EULER_BITS,
            got: bits.len(),
        });
    }
    Ok(bin_center(axis, bits.to_index() as usize))
}

pub fn encode_euler(angles: [f64; 3]) -> BitString {
    let parts = [0, 1, 2].map(|a| encode_euler_angle(a, angles[a]));
    BitString::concat(&[&parts[0], &parts[1], &parts[2]])
}

/// `(α, β, γ)` from 15 bits split 5/5/5.
pub fn decode_euler(bits: &BitString) -> Result<[f64; 3]> {
    if bits.len() != 3 * EULER_BITS {
        return Err(Error::Dimension {
            what: "Euler bitstring",
            expected: 3 * EULER_BITS,
            got: bits.len(),
        });
    }
    let mut out = [0.0; 3];
    for (a, v) in out.iter_mut().enumerate() {
        *v = decode_euler_angle(a, &bits.slice(a * EULER_BITS..(a + 1) * EULER_BITS))?;
    }
    Ok(out)
}

/// Mean-centered cross-covariance `(1/N)·Σ (s − s̄)(t − t̄)ᵀ` over the matches.
pub fn cross_covariance(pair: &Pair3) -> Result<Mat3> {
    let pts = pair.matched_points()?;
    if pts.is_empty() {
        return Err(Error::InvalidParam("no matched points".into()));
    }
    let src: Vec<Vec3> = pts.iter().map(|p| p.0).collect();
    let tgt: Vec<Vec3> = pts.iter().map(|p| p.1).collect();
    let (sm, tm) = (centroid(&src), centroid(&tgt));
    let n = pts.len() as f64;
    let mut c = [[0.0; 3]; 3];
    for (s, t) in src.iter().zip(&tgt) {
        for a in 0..3 {
            for b in 0..3 {
                c[a][b] += (s[a] - sm[a]) * (t[b] - tm[b]) / n;
            }
        }
    }
    Ok(c)
}

pub fn rot3d_features(pair: &Pair3) -> Result<Vec<f64>> {
    Ok(cross_covariance(pair)?.concat())
}

/// Full 15-bit instance; the pair travels in `meta` for staged inference.
pub fn rot3d_encode(pair: &Pair3, angles: [f64; 3]) -> Result<ProblemInstance> {
    Ok(ProblemInstance::new(
        ROT3D,
        rot3d_features(pair)?,
        encode_euler(angles),
        json!({ "angles": angles, "pair": pair }),
    ))
}

/// Training instance for one stage: angles before `stage` are zeroed and the
/// target holds only that stage's 5 bits.
pub fn rot3d_stage_instance(source: &[Vec3], angles: [f64; 3], stage: usize) -> Result<ProblemInstance> {
    if stage > 2 {
        return Err(Error::InvalidParam(format!("stage {stage} outside 0..3")));
    }
    let mut a = angles;
    a[..stage].iter_mut().for_each(|v| *v = 0.0);
    let target = rotate_cloud(&euler_zyx(a[0], a[1], a[2]), source);
    let pair = Pair3::matched(source.to_vec(), target)?;
    Ok(ProblemInstance::new(
        ROT3D,
        rot3d_features(&pair)?,
        encode_euler_angle(stage, a[stage]),
        json!({ "angles": a, "stage": stage }),
    ))
}

pub fn sample_angles(r: &mut Rng) -> [f64; 3] {
    EULER_HALF_RANGE.map(|h| r.gen_range(-h..=h))
}

/// Clouds are drawn uniformly from `clouds`; instance `i` uses child seed `i`.
/// `stage = None` yields full 15-bit instances.
pub fn gen_rot3d_set(clouds: &[Vec<Vec3>], count: usize, stage: Option<usize>, seed: u64) -> Result<Vec<ProblemInstance>> {
    if clouds.is_empty() {
        return Err(Error::InvalidParam("no clouds to sample from".into()));
    }
    (0..count as u64)
        .map(|i| {
            let mut r = rng::from_seed(rng::child_seed(seed, i));
            let cloud = &clouds[r.gen_range(0..clouds.len())];
            let angles = sample_angles(&mut r);
            match stage {
                Some(s) => rot3d_stage_instance(cloud, angles, s),
                None => {
                    let target = rotate_cloud(&euler_zyx(angles[0], angles[1], angles[2]), cloud);
                    rot3d_encode(&Pair3::matched(cloud.clone(), target)?, angles)
                }
            }
        })
        .collect()
}

pub fn instance_angles(inst: &ProblemInstance) -> Result<[f64; 3]> {
    inst.meta_field("angles")
}

pub fn instance_pair(inst: &ProblemInstance) -> Result<Pair3> {
    inst.meta_field("pair")
}

#[derive(Clone, Debug, PartialEq)]
pub struct StagedEstimate {
    pub angles: [f64; 3],
    pub rotation: Mat3,
}

/// Sequential per-angle inference. `predict(stage, p)` returns the stage's
/// 5-bit bin. After each stage the estimated rotation is undone on the target,
/// so later stages see a pair with the earlier angles removed.
pub fn three_stage_infer<F>(mut predict: F, pair: &Pair3) -> Result<StagedEstimate>
where
    F: FnMut(usize, &[f64]) -> Result<BitString>,
{
    let mut current = pair.clone();
    let mut angles = [0.0; 3];
    let axes: [fn(f64) -> Mat3; 3] = [rot_z, rot_y, rot_x];
    for stage in 0..3 {
        let p = rot3d_features(&current)?;
        angles[stage] = decode_euler_angle(stage, &predict(stage, &p)?)?;
        let undo = transpose(&axes[stage](angles[stage]));
        current.target = rotate_cloud(&undo, &current.target);
    }
    Ok(StagedEstimate {
        angles,
        rotation: mat_mul(&mat_mul(&rot_z(angles[0]), &rot_y(angles[1])), &rot_x(angles[2])),
    })
}

pub const DEFAULT_CLOUD_POINTS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CloudKind {
    Blob,
    Box,
    Ellipsoid,
}


fn gaussian(r: &mut Rng) -> f64 {
    let u: f64 = r.gen_range(f64::EPSILON..1.0);
    let v: f64 = r.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos()
}

/// One anisotropic cloud in canonical pose (principal axes along x, y, z in
/// random order), centered, unit extent.
pub fn gen_cloud3d(kind: CloudKind, points: usize, r: &mut Rng) -> Vec<Vec3> {
    let mut axes = [1.0, r.gen_range(0.45..0.8), r.gen_range(0.15..0.4)];
    axes.shuffle(r);
    let mut pts: Vec<Vec3> = (0..points)
        .map(|_| match kind {
            CloudKind::Blob => [0, 1, 2].map(|a| axes[a] * gaussian(r)),
            CloudKind::Box => [0, 1, 2].map(|a| axes[a] * r.gen_range(-0.5..0.5)),
            CloudKind::Ellipsoid => {
                let d = [gaussian(r), gaussian(r), gaussian(r)];
                let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt().max(f64::EPSILON);
                [0, 1, 2].map(|a| axes[a] * d[a] / n)
            }
        })
        .collect();
    normalize_extent(&mut pts);
    pts
}

pub fn gen_clouds3d_with(count: usize, points: usize, seed: u64) -> Vec<Vec<Vec3>> {
    let mut r = rng::substream(seed, rng::stream::DATA);
    let kinds = [CloudKind::Blob, CloudKind::Box, CloudKind::Ellipsoid];
    (0..count)
        .map(|i| gen_cloud3d(kinds[i % 3], points, &mut r))
        .collect()
}

pub fn gen_clouds3d(count: usize, seed: u64) -> Vec<Vec<Vec3>> {
    gen_clouds3d_with(count, DEFAULT_CLOUD_POINTS, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::geometry::{det, max_extent, orthogonality_defect};

    #[test]
    fn bins() {
        assert!((bin_width(0).to_degrees() - 1.25).abs() < 1e-12);
        assert!((bin_width(1).to_degrees() - 0.625).abs() < 1e-12);
        for a in 0..3 {
            assert_eq!(euler_bin(a, 0.0), 16);
            for b in 0..EULER_BINS {
                assert_eq!(euler_bin(a, bin_center(a, b)), b);
            }
        }
        let bits = encode_euler([0.0; 3]);
        assert_eq!(bits.to_string(), "100001000010000");
        let d = decode_euler(&bits).unwrap();
        for a in 0..3 {
            assert!(d[a].abs() <= 0.5 * bin_width(a) + 1e-15);
        }
    }

    #[test]
    fn identical_clouds_give_auto_covariance() {
        let cloud = gen_clouds3d(1, 3).remove(0);
        let inst = rot3d_encode(&Pair3::matched(cloud.clone(), cloud).unwrap(), [0.0; 3]).unwrap();
        assert_eq!(inst.p.len(), 9);
        for a in 0..3 {
            for b in 0..3 {
                assert!((inst.p[3 * a + b] - inst.p[3 * b + a]).abs() < 1e-15);
            }
        }
        assert_eq!(instance_pair(&inst).unwrap().source.len(), DEFAULT_CLOUD_POINTS);
    }

    #[test]
    fn clouds_are_seeded_and_unit_extent() {
        let a = gen_clouds3d(6, 4);
        assert_eq!(a, gen_clouds3d(6, 4));
        for c in &a {
            assert!((max_extent(c) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn staged_inference_with_oracle_nets() {
        let cloud = gen_clouds3d(1, 8).remove(0);
        let alpha = bin_center(0, 23);
        let target = rotate_cloud(&rot_z(alpha), &cloud);
        let pair = Pair3::matched(cloud, target).unwrap();
        let mut seen = Vec::new();
        let est = three_stage_infer(
            |stage, p| {
                seen.push(p.to_vec());
                Ok(if stage == 0 {
                    encode_euler_angle(0, alpha)
                } else {
                    encode_euler_angle(stage, 0.0)
                })
            },
            &pair,
        )
        .unwrap();
        for p in &seen[1..2] {
            for a in 0..3 {
                for b in 0..3 {
                    assert!((p[3 * a + b] - p[3 * b + a]).abs() < 1e-12);
                }
            }
        }
        assert!((est.angles[0] - alpha).abs() < 1e-15);
        assert!(orthogonality_defect(&est.rotation) < 1e-9);
        assert!((det(&est.rotation) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn stage_instances_zero_earlier_angles() {
        let cloud = gen_clouds3d(1, 2).remove(0);
        let inst = rot3d_stage_instance(&cloud, [0.2, 0.1, -0.3], 2).unwrap();
        assert_eq!(instance_angles(&inst).unwrap(), [0.0, 0.0, -0.3]);
        assert_eq!(inst.x_hat, encode_euler_angle(2, -0.3));
        assert!(rot3d_stage_instance(&cloud, [0.0; 3], 3).is_err());
    }
}
