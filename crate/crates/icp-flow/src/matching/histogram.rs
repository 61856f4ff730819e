//! Translation voting over all pairwise point differences.
//!
//! The dominant bin of the difference histogram is the translation that best
//! overlaps the two clusters, which makes a far more reliable ICP seed than
//! centroid subtraction when the visible extents of an object differ
//! between scans.

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cap on the number of pairwise difference votes; above this the clusters
/// are uniformly subsampled (seeded) before voting.
pub const VOTE_CAP: usize = 2_000_000;

const SUBSAMPLE_SEED: u64 = 0x1c9f_70e5;

/// 3D integer-count grid over translation space, with symmetric per-axis
/// coverage of [−τ, +τ] in equally spaced bins.
#[derive(Debug, Clone)]
pub struct TranslationHistogram {
    counts: Vec<u32>,
    dims: [usize; 3],
    ranges: [f64; 3],
    bin_size: f64,
    total: u64,
}

impl TranslationHistogram {
    pub fn new(ranges: [f64; 3], bin_size: f64) -> Self {
        assert!(bin_size > 0.0, "bin size must be positive");
        assert!(ranges.iter().all(|r| *r >= 0.0), "ranges must be non-negative");
        let dims = [
            bins_for(ranges[0], bin_size),
            bins_for(ranges[1], bin_size),
            bins_for(ranges[2], bin_size),
        ];
        Self {
            counts: vec![0; dims[0] * dims[1] * dims[2]],
            dims,
            ranges,
            bin_size,
            total: 0,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn total_votes(&self) -> u64 {
        self.total
    }

    /// Casts a vote; out-of-range vectors are discarded (returns false).
    pub fn vote(&mut self, v: &Vector3<f64>) -> bool {
        let mut idx = [0usize; 3];
        for d in 0..3 {
            if v[d].abs() > self.ranges[d] {
                return false;
            }
            let i = ((v[d] + self.ranges[d]) / self.bin_size).round() as isize;
            idx[d] = i.clamp(0, self.dims[d] as isize - 1) as usize;
        }
        let flat = self.flatten(idx);
        self.counts[flat] += 1;
        self.total += 1;
        true
    }

    /// Bin with the most votes; ties broken by lowest flattened (x-major)
    /// index. `None` when no vote landed.
    pub fn argmax(&self) -> Option<[usize; 3]> {
        if self.total == 0 {
            return None;
        }
        let mut best = 0usize;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        Some(self.unflatten(best))
    }

    /// Center of a bin in translation space.
    pub fn bin_center(&self, idx: [usize; 3]) -> Vector3<f64> {
        Vector3::new(
            -self.ranges[0] + idx[0] as f64 * self.bin_size,
            -self.ranges[1] + idx[1] as f64 * self.bin_size,
            -self.ranges[2] + idx[2] as f64 * self.bin_size,
        )
    }

    fn flatten(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.dims[1] + idx[1]) * self.dims[2] + idx[2]
    }

    fn unflatten(&self, flat: usize) -> [usize; 3] {
        let z = flat % self.dims[2];
        let rest = flat / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], z]
    }
}

fn bins_for(range: f64, bin_size: f64) -> usize {
    (2.0 * range / bin_size).ceil() as usize + 1
}

/// Votes over all pairwise differences src_i − dst_j, discards vectors
/// outside [−τ, +τ] per axis, and returns the center of the winning bin
/// negated so the result maps src toward dst. Returns zero when every vote
/// falls out of range.
///
/// When the pair count exceeds [`VOTE_CAP`] both clusters are uniformly
/// subsampled (deterministic seed) to bound the broadcast.
pub fn histogram_init(
    src: &[Point3<f64>],
    dst: &[Point3<f64>],
    ranges: [f64; 3],
    bin_size: f64,
) -> Vector3<f64> {
    assert!(!src.is_empty() && !dst.is_empty(), "clusters must be non-empty");
    let mut hist = TranslationHistogram::new(ranges, bin_size);

    let (src_sub, dst_sub);
    let (src, dst) = if src.len().saturating_mul(dst.len()) > VOTE_CAP {
        let scale = (VOTE_CAP as f64 / (src.len() as f64 * dst.len() as f64)).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(SUBSAMPLE_SEED);
        src_sub = subsample(src, scale, &mut rng);
        dst_sub = subsample(dst, scale, &mut rng);
        (src_sub.as_slice(), dst_sub.as_slice())
    } else {
        (src, dst)
    };

    for s in src {
        for d in dst {
            hist.vote(&(s - d));
        }
    }

    match hist.argmax() {
        Some(idx) => -hist.bin_center(idx),
        None => Vector3::zeros(),
    }
}

/// Uniform sample without replacement keeping original order; size is
/// `ceil(len * scale)`, at least 1.
fn subsample(points: &[Point3<f64>], scale: f64, rng: &mut impl Rng) -> Vec<Point3<f64>> {
    let target = ((points.len() as f64 * scale).ceil() as usize).clamp(1, points.len());
    let mut indices: Vec<usize> = (0..points.len()).collect();
    for i in 0..target {
        let j = rng.random_range(i..indices.len());
        indices.swap(i, j);
    }
    let mut chosen = indices[..target].to_vec();
    chosen.sort_unstable();
    chosen.iter().map(|&i| points[i]).collect()
}
