//! 2D point-set registration: the rotation angle in `[0, π/3]` as a 9-bit bin.

use std::f64::consts::{PI, TAU};

use rand::Rng as _;
use serde_json::json;

use super::dataset::ProblemInstance;
use super::geometry::{centroid, max_extent, normalize_extent, rotate2, Vec2};
use super::pointcloud::{add_uniform_noise2d, Pair2};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

pub const PSR2D: &str = "psr2d";
pub const ANGLE_BITS: usize = 9;
pub const ANGLE_BINS: usize = 1 << ANGLE_BITS;
pub const ANGLE_RANGE: f64 = PI / 3.0;
pub const BIN_WIDTH: f64 = ANGLE_RANGE / ANGLE_BINS as f64;
pub const NEIGHBOURS: usize = 3;
pub const FEATURE_LEN: usize = 8;

/// Floor binning, clamped into `[0, 511]`.
pub fn angle_bin(theta: f64) -> usize {
    ((theta / BIN_WIDTH).floor().max(0.0) as usize).min(ANGLE_BINS - 1)
}

pub fn encode_angle2d(theta: f64) -> BitString {
    BitString::from_index(angle_bin(theta) as u64, ANGLE_BITS)
}

/// Center of the encoded bin.
pub fn decode_angle2d(bits: &BitString) -> Result<f64> {
    if bits.len() != ANGLE_BITS {
        return Err(Error::Dimension {
            what: "angle bitstring",
            expected: ANGLE_BITS,
            got: bits.len(),
        });
    }
    Ok((bits.to_index() as f64 + 0.5) * BIN_WIDTH)
}

fn sq_dist(a: Vec2, b: Vec2) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Indices of the `k` nearest target points; ties toward lower index.
fn nearest(p: Vec2, target: &[Vec2], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..target.len()).collect();
    idx.sort_by(|&a, &b| {
        sq_dist(p, target[a])
            .total_cmp(&sq_dist(p, target[b]))
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

/// Cross-covariance `C` and target second moment `T` over the putative
/// matches (each source point to its 3 nearest target points), both
/// row-major and normalized by the match count: `[C₀₀ C₀₁ C₁₀ C₁₁ T₀₀ T₀₁ T₁₀ T₁₁]`.
pub fn psr2d_features(pair: &Pair2) -> Result<Vec<f64>> {
    if pair.target.len() < NEIGHBOURS {
        return Err(Error::InvalidParam(format!(
            "need at least {NEIGHBOURS} target points, got {}",
            pair.target.len()
        )));
    }
    if pair.source.is_empty() {
        return Err(Error::InvalidParam("empty source cloud".into()));
    }
    let matches: Vec<(Vec2, Vec2)> = pair
        .source
        .iter()
        .flat_map(|&s| nearest(s, &pair.target, NEIGHBOURS).into_iter().map(move |j| (s, j)))
        .map(|(s, j)| (s, pair.target[j]))
        .collect();
    let m = matches.len() as f64;
    let mut sm = [0.0; 2];
    let mut tm = [0.0; 2];
    for (s, t) in &matches {
        for d in 0..2 {
            sm[d] += s[d] / m;
            tm[d] += t[d] / m;
        }
    }
    let mut f = [0.0; FEATURE_LEN];
    for (s, t) in &matches {
        let ds = [s[0] - sm[0], s[1] - sm[1]];
        let dt = [t[0] - tm[0], t[1] - tm[1]];
        for a in 0..2 {
            for b in 0..2 {
                f[2 * a + b] += ds[a] * dt[b] / m;
                f[4 + 2 * a + b] += dt[a] * dt[b] / m;
            }
        }
    }
    Ok(f.to_vec())
}

/// Instance for a pair whose target is the source rotated by `theta`.
pub fn psr2d_encode(pair: &Pair2, theta: f64) -> Result<ProblemInstance> {
    if !(0.0..=ANGLE_RANGE).contains(&theta) {
        return Err(Error::InvalidParam(format!("angle {theta} outside [0, π/3]")));
    }
    Ok(ProblemInstance::new(
        PSR2D,
        psr2d_features(pair)?,
        encode_angle2d(theta),
        json!({ "theta": theta }),
    ))
}

/// Smooth closed outline `r(t) = 1 + Σ aₘ cos(m·t + φₘ)`, `m = 1..=4`.
#[derive(Clone, Debug, PartialEq)]
pub struct Contour {
    pub amplitudes: [f64; 4],
    pub phases: [f64; 4],
}

pub const MIN_OUTLINE_POINTS: usize = 64;

impl Contour {
    /// The second harmonic is kept large so that every outline has a clear
    /// principal axis.
    pub fn random(r: &mut Rng) -> Self {
        let amplitudes = [
            r.gen_range(0.0..0.1),
            r.gen_range(0.3..0.45),
            r.gen_range(0.0..0.12),
            r.gen_range(0.0..0.06),
        ];
        let phases = [0; 4].map(|_| r.gen_range(0.0..TAU));
        Contour { amplitudes, phases }
    }

    pub fn radius(&self, t: f64) -> f64 {
        1.0 + self
            .amplitudes
            .iter()
            .zip(&self.phases)
            .enumerate()
            .map(|(m, (a, p))| a * ((m + 1) as f64 * t + p).cos())
            .sum::<f64>()
    }

    /// `count` points at parameters `2π(j + offset)/count`.
    pub fn sample(&self, count: usize, offset: f64) -> Vec<Vec2> {
        (0..count)
            .map(|j| {
                let t = TAU * (j as f64 + offset) / count as f64;
                let r = self.radius(t);
                [r * t.cos(), r * t.sin()]
            })
            .collect()
    }

    /// Outline normalized to unit extent around its centroid.
    pub fn outline(&self, count: usize) -> Vec<Vec2> {
        let mut pts = self.sample(count.max(MIN_OUTLINE_POINTS), 0.0);
        normalize_extent(&mut pts);
        pts
    }
}

pub fn gen_contours(count: usize, seed: u64) -> Vec<Contour> {
    let mut r = rng::substream(seed, rng::stream::DATA);
    (0..count).map(|_| Contour::random(&mut r)).collect()
}

/// Unit-extent closed outlines of [`MIN_OUTLINE_POINTS`] points.
pub fn gen_shapes2d(count: usize, seed: u64) -> Vec<Vec<Vec2>> {
    gen_contours(count, seed)
        .iter()
        .map(|c| c.outline(MIN_OUTLINE_POINTS))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Psr2dSampling {
    pub points: usize,
    pub noise_pct: f64,
}

impl Default for Psr2dSampling {
    fn default() -> Self {
        Psr2dSampling {
            points: MIN_OUTLINE_POINTS,
            noise_pct: 0.0,
        }
    }
}

/// One registration pair from `shape`: both outlines are copies of the
/// canonical shape rotated by at most π/3. The template sits at a random base
/// angle in `[0, π/3 − theta]`; the reference is resampled at shifted curve
/// parameters and rotated a further `theta`.
pub fn psr2d_pair(shape: &Contour, theta: f64, sampling: Psr2dSampling, r: &mut Rng) -> Result<Pair2> {
    let base = r.gen_range(0.0..=(ANGLE_RANGE - theta).max(0.0));
    let offset = r.gen_range(0.0..1.0);
    let raw = shape.sample(sampling.points, 0.0);
    let centre = centroid(&raw);
    let extent = max_extent(&raw);
    let scale = if extent > 0.0 { 1.0 / extent } else { 1.0 };
    let place = |p: Vec2, angle: f64| rotate2(angle, [(p[0] - centre[0]) * scale, (p[1] - centre[1]) * scale]);
    let template: Vec<Vec2> = raw.iter().map(|&p| place(p, base)).collect();
    let mut reference: Vec<Vec2> = shape
        .sample(sampling.points, offset)
        .into_iter()
        .map(|p| place(p, base + theta))
        .collect();
    if sampling.noise_pct > 0.0 {
        reference = add_uniform_noise2d(&reference, sampling.noise_pct, r.gen())?;
    }
    Ok(Pair2::unmatched(template, reference))
}

/// `count` instances with true angles uniform over `[lo, hi]`.
pub fn gen_psr2d_set(
    shapes: &[Contour],
    count: usize,
    angles: (f64, f64),
    sampling: Psr2dSampling,
    seed: u64,
) -> Result<Vec<ProblemInstance>> {
    if shapes.is_empty() {
        return Err(Error::InvalidParam("no shapes to sample from".into()));
    }
    (0..count as u64)
        .map(|i| {
            let mut r = rng::from_seed(rng::child_seed(seed, i));
            let shape = &shapes[r.gen_range(0..shapes.len())];
            let theta = r.gen_range(angles.0..=angles.1);
            let pair = psr2d_pair(shape, theta, sampling, &mut r)?;
            psr2d_encode(&pair, theta)
        })
        .collect()
}

pub fn instance_angle(inst: &ProblemInstance) -> Result<f64> {
    inst.meta_field("theta")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_decoding() {
        let zero = BitString::zeros(9);
        assert!((decode_angle2d(&zero).unwrap() - 0.5 * (PI / 3.0) / 512.0).abs() < 1e-15);
        let last = decode_angle2d(&BitString::ones(9)).unwrap();
        assert!((last - (PI / 3.0 - 0.5 * BIN_WIDTH)).abs() < 1e-15);
        for i in 0..ANGLE_BINS as u64 {
            let b = BitString::from_index(i, 9);
            assert_eq!(encode_angle2d(decode_angle2d(&b).unwrap()), b);
        }
        assert!(decode_angle2d(&BitString::zeros(8)).is_err());
        assert!(BIN_WIDTH.to_degrees() / 2.0 <= 0.09766);
    }

    #[test]
    fn identical_clouds_give_symmetric_psd_cross_covariance() {
        let cloud: Vec<Vec2> = (0..64)
            .map(|j| {
                let t = TAU * j as f64 / 64.0;
                [t.cos(), 0.5 * t.sin()]
            })
            .collect();
        let inst = psr2d_encode(&Pair2::unmatched(cloud.clone(), cloud), 0.0).unwrap();
        assert_eq!(inst.p.len(), FEATURE_LEN);
        assert_eq!(inst.x_hat, BitString::zeros(9));
        let c = &inst.p[..4];
        assert!((c[1] - c[2]).abs() < 1e-12);
        let tr = c[0] + c[3];
        let det = c[0] * c[3] - c[1] * c[2];
        assert!(tr >= 0.0 && det >= -1e-15);
    }

    #[test]
    fn rotated_round_trip_within_half_bin() {
        let shapes = gen_contours(4, 1);
        let mut r = rng::from_seed(2);
        for i in 0..50 {
            let theta = ANGLE_RANGE * i as f64 / 50.0;
            let pair = psr2d_pair(&shapes[i % 4], theta, Psr2dSampling::default(), &mut r).unwrap();
            let inst = psr2d_encode(&pair, theta).unwrap();
            assert_eq!(inst.p.len(), 8);
            assert!((decode_angle2d(&inst.x_hat).unwrap() - theta).abs() <= 0.5 * BIN_WIDTH + 1e-12);
        }
    }

    #[test]
    fn few_targets_rejected() {
        let pair = Pair2::unmatched(vec![[0.0, 0.0]], vec![[0.0, 0.0], [1.0, 0.0]]);
        assert!(psr2d_features(&pair).is_err());
    }

    #[test]
    fn shapes_deterministic_closed_unit_extent() {
        let a = gen_shapes2d(5, 9);
        assert_eq!(a, gen_shapes2d(5, 9));
        for s in &a {
            assert!(s.len() >= MIN_OUTLINE_POINTS);
            let step = (sq_dist(s[0], s[1])).sqrt();
            let gap = sq_dist(s[0], s[s.len() - 1]).sqrt();
            assert!(gap < 3.0 * step);
            assert!((max_extent(s) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn set_generation_is_seeded() {
        let shapes = gen_contours(3, 4);
        let a = gen_psr2d_set(&shapes, 5, (0.0, ANGLE_RANGE), Psr2dSampling::default(), 8).unwrap();
        assert_eq!(a, gen_psr2d_set(&shapes, 5, (0.0, ANGLE_RANGE), Psr2dSampling::default(), 8).unwrap());
        assert!(a.iter().all(|i| instance_angle(i).unwrap() <= ANGLE_RANGE));
    }
}
