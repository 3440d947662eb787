//! Point-cloud pairs, corruption protocols, and plain-text point files.

use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::geometry::max_extent;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// `matches[i]` is the target index paired with source point `i`; `None`
/// means no correspondences are known.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloudPair<const D: usize> {
    #[serde(with = "points")]
    pub source: Vec<[f64; D]>,
    #[serde(with = "points")]
    pub target: Vec<[f64; D]>,
    #[serde(default)]
    pub matches: Option<Vec<usize>>,
}

pub type Pair2 = PointCloudPair<2>;
pub type Pair3 = PointCloudPair<3>;

mod points {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer, const D: usize>(v: &[[f64; D]], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|p| p.to_vec()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, De: Deserializer<'de>, const D: usize>(d: De) -> Result<Vec<[f64; D]>, De::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        rows.into_iter()
            .map(|r| {
                <[f64; D]>::try_from(r.as_slice())
                    .map_err(|_| serde::de::Error::custom(format!("expected {D} coordinates, got {}", r.len())))
            })
            .collect()
    }
}

impl<const D: usize> PointCloudPair<D> {
    /// A pair whose points correspond index by index.
    pub fn matched(source: Vec<[f64; D]>, target: Vec<[f64; D]>) -> Result<Self> {
        if source.len() != target.len() {
            return Err(Error::Dimension {
                what: "matched cloud size",
                expected: source.len(),
                got: target.len(),
            });
        }
        let matches = Some((0..source.len()).collect());
        Ok(PointCloudPair {
            source,
            target,
            matches,
        })
    }

    pub fn unmatched(source: Vec<[f64; D]>, target: Vec<[f64; D]>) -> Self {
        PointCloudPair {
            source,
            target,
            matches: None,
        }
    }

    /// `(source, target)` point pairs under the known correspondences.
    pub fn matched_points(&self) -> Result<Vec<([f64; D], [f64; D])>> {
        let m = self
            .matches
            .as_ref()
            .ok_or_else(|| Error::InvalidParam("pair has no correspondences".into()))?;
        if m.len() != self.source.len() {
            return Err(Error::Dimension {
                what: "correspondence list",
                expected: self.source.len(),
                got: m.len(),
            });
        }
        m.iter()
            .zip(&self.source)
            .map(|(&j, &s)| {
                self.target
                    .get(j)
                    .map(|&t| (s, t))
                    .ok_or_else(|| Error::InvalidParam(format!("match index {j} out of range")))
            })
            .collect()
    }
}

/// Uniform permutation of `0..m` with no fixed points (identity for `m < 2`).
fn derangement(m: usize, r: &mut Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..m).collect();
    if m < 2 {
        return p;
    }
    loop {
        p.shuffle(r);
        if p.iter().enumerate().all(|(i, &v)| i != v) {
            return p;
        }
    }
}

/// Picks `⌈fraction·N⌉` correspondences uniformly and shuffles their targets
/// among themselves so that none keeps its own.
pub fn corrupt_matches<const D: usize>(pair: &PointCloudPair<D>, fraction: f64, seed: u64) -> Result<PointCloudPair<D>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidParam(format!("fraction {fraction} outside [0, 1]")));
    }
    let mut out = pair.clone();
    let n = pair.source.len();
    let mut matches = pair.matches.clone().unwrap_or_else(|| (0..n).collect());
    let m = ((fraction * n as f64).ceil() as usize).min(n);
    let mut r = rng::from_seed(seed);
    let mut chosen = index::sample(&mut r, n, m).into_vec();
    chosen.sort_unstable();
    let targets: Vec<usize> = chosen.iter().map(|&i| matches[i]).collect();
    for (&i, &d) in chosen.iter().zip(&derangement(m, &mut r)) {
        matches[i] = targets[d];
    }
    out.matches = Some(matches);
    Ok(out)
}

/// Adds per-coordinate offsets drawn from `U(−a, a)`, `a = pct/100 · extent`.
pub fn add_uniform_noise<const D: usize>(cloud: &[[f64; D]], pct: f64, seed: u64) -> Result<Vec<[f64; D]>> {
    if !(pct >= 0.0 && pct.is_finite()) {
        return Err(Error::InvalidParam(format!("noise percentage {pct} must be >= 0")));
    }
    let a = pct / 100.0 * max_extent(cloud);
    if a == 0.0 {
        return Ok(cloud.to_vec());
    }
    let mut r = rng::from_seed(seed);
    Ok(cloud
        .iter()
        .map(|p| p.map(|v| v + r.gen_range(-a..=a)))
        .collect())
}

pub fn add_uniform_noise2d(cloud: &[[f64; 2]], pct: f64, seed: u64) -> Result<Vec<[f64; 2]>> {
    add_uniform_noise(cloud, pct, seed)
}

/// Whitespace- or comma-separated coordinates, one point per line; `#`
/// starts a comment.
pub fn parse_points<const D: usize>(text: &str) -> Result<Vec<[f64; D]>> {
    let mut pts = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", no + 1)))?;
        let p = <[f64; D]>::try_from(vals.as_slice())
            .map_err(|_| Error::Parse(format!("line {}: expected {D} coordinates, got {}", no + 1, vals.len())))?;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("line {}: non-finite coordinate", no + 1)));
        }
        pts.push(p);
    }
    Ok(pts)
}

pub fn load_points<const D: usize>(path: &Path) -> Result<Vec<[f64; D]>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_points(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid3(n: usize) -> Vec<[f64; 3]> {
        (0..n).map(|i| [i as f64, (i * i % 7) as f64, 0.5 * i as f64]).collect()
    }

    #[test]
    fn corruption_extremes() {
        let pair = Pair3::matched(grid3(20), grid3(20)).unwrap();
        assert_eq!(corrupt_matches(&pair, 0.0, 1).unwrap(), pair);
        let all = corrupt_matches(&pair, 1.0, 1).unwrap();
        let m = all.matches.unwrap();
        assert!(m.iter().enumerate().all(|(i, &j)| i != j));
        let mut sorted = m.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..20).collect::<Vec<_>>());
        assert!(corrupt_matches(&pair, 1.5, 1).is_err());
    }

    #[test]
    fn corruption_touches_exact_count() {
        let pair = Pair3::matched(grid3(50), grid3(50)).unwrap();
        for (f, want) in [(0.2, 10), (0.01, 1), (0.05, 3)] {
            let c = corrupt_matches(&pair, f, 9).unwrap();
            let moved = c.matches.unwrap().iter().enumerate().filter(|(i, &j)| *i != j).count();
            assert_eq!(moved, if want == 1 { 0 } else { want });
        }
    }

    #[test]
    fn noise_bounds() {
        let cloud: Vec<[f64; 2]> = (0..200).map(|i| [(i % 10) as f64 / 9.0, (i / 10) as f64 / 19.0]).collect();
        assert_eq!(add_uniform_noise2d(&cloud, 0.0, 3).unwrap(), cloud);
        let noisy = add_uniform_noise2d(&cloud, 20.0, 3).unwrap();
        let mut max_off = 0.0f64;
        for (a, b) in cloud.iter().zip(&noisy) {
            for d in 0..2 {
                max_off = max_off.max((a[d] - b[d]).abs());
            }
        }
        assert!(max_off <= 0.2 && max_off > 0.15);
        assert!(add_uniform_noise2d(&cloud, -1.0, 3).is_err());
    }

    #[test]
    fn point_files() {
        let p: Vec<[f64; 3]> = parse_points("# header\n1 2 3\n4,5,6\n\n").unwrap();
        assert_eq!(p, vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
        assert!(parse_points::<3>("1 2").is_err());
        assert!(parse_points::<2>("1 x").is_err());
    }

    #[test]
    fn pair_serde() {
        let pair = Pair3::matched(grid3(3), grid3(3)).unwrap();
        let s = serde_json::to_string(&pair).unwrap();
        assert_eq!(serde_json::from_str::<Pair3>(&s).unwrap(), pair);
        assert!(serde_json::from_str::<Pair3>(r#"{"source":[[1,2]],"target":[[1,2,3]]}"#).is_err());
    }
}
