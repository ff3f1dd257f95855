//! Dominant colours by k-means over HSV pixels.
//!
//! Hue is embedded on the unit circle, so a point is `(cos h, sin h, s, v)`.
//! Pixels are sorted before sampling and seeding, which makes the result a
//! function of the pixel multiset and the seed only.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{rgb_to_hsv, PixelGrid};

pub const DOMINANT_COLORS: usize = 5;
pub const KMEANS_MAX_ITER: usize = 50;
pub const KMEANS_TOLERANCE: f64 = 1e-6;
pub const KMEANS_SAMPLE_LIMIT: usize = 10_000;

type Point = [f64; 4];

fn embed([r, g, b]: [u8; 3]) -> Point {
    let hsv = rgb_to_hsv(r, g, b);
    let rad = hsv.h.to_radians();
    [rad.cos(), rad.sin(), hsv.s, hsv.v]
}

fn dist2(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &Point, centers: &[Point]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = dist2(p, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn hue_degrees(c: &Point) -> f64 {
    if c[0].abs() < 1e-12 && c[1].abs() < 1e-12 {
        return 0.0;
    }
    let h = c[1].atan2(c[0]).to_degrees().rem_euclid(360.0);
    if h >= 360.0 {
        0.0
    } else {
        h
    }
}

fn farthest_point_seeds(points: &[Point], k: usize) -> Vec<Point> {
    let mut centers = vec![points[0]];
    let mut min_d: Vec<f64> = points.iter().map(|p| dist2(p, &points[0])).collect();
    while centers.len() < k {
        let (idx, &d) = min_d
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |acc, (i, d)| if *d > *acc.1 { (i, d) } else { acc });
        if d <= 1e-12 {
            break;
        }
        let c = points[idx];
        for (m, p) in min_d.iter_mut().zip(points) {
            *m = m.min(dist2(p, &c));
        }
        centers.push(c);
    }
    centers
}

/// Returns `3 * k` values: `k` cluster centres as `(h / 360, s, v)` ordered by
/// descending population, ties by ascending hue. When the image has fewer
/// than `k` distinct colours the largest cluster is repeated to fill the slots.
pub fn dominant_colors(img: &PixelGrid, k: usize, seed: u64) -> Vec<f64> {
    assert!(k > 0, "k must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut sorted: Vec<[u8; 3]> = img.pixels().to_vec();
    sorted.sort_unstable();
    let mut points: Vec<Point> = if sorted.len() > KMEANS_SAMPLE_LIMIT {
        let mut idx = sample(&mut rng, sorted.len(), KMEANS_SAMPLE_LIMIT).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| embed(sorted[i])).collect()
    } else {
        sorted.iter().copied().map(embed).collect()
    };
    points.shuffle(&mut rng);

    let mut centers = farthest_point_seeds(&points, k);
    let mut assignment = vec![0usize; points.len()];
    for _ in 0..KMEANS_MAX_ITER {
        for (a, p) in assignment.iter_mut().zip(&points) {
            *a = nearest(p, &centers);
        }
        let mut sums = vec![[0.0; 4]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (a, p) in assignment.iter().zip(&points) {
            counts[*a] += 1;
            for d in 0..4 {
                sums[*a][d] += p[d];
            }
        }
        let mut shift: f64 = 0.0;
        for (c, (sum, n)) in centers.iter_mut().zip(sums.iter().zip(&counts)) {
            if *n == 0 {
                continue;
            }
            let next = sum.map(|x| x / *n as f64);
            shift = shift.max(dist2(c, &next).sqrt());
            *c = next;
        }
        if shift < KMEANS_TOLERANCE {
            break;
        }
    }
    for (a, p) in assignment.iter_mut().zip(&points) {
        *a = nearest(p, &centers);
    }

    let mut counts = vec![0usize; centers.len()];
    for a in &assignment {
        counts[*a] += 1;
    }
    let mut clusters: Vec<(usize, [f64; 3])> = centers
        .iter()
        .zip(&counts)
        .filter(|(_, n)| **n > 0)
        .map(|(c, n)| (*n, [hue_degrees(c) / 360.0, c[2], c[3]]))
        .collect();
    clusters.sort_by(|a, b| b.0.cmp(&a.0).then(a.1[0].total_cmp(&b.1[0])));

    let mut out = Vec::with_capacity(3 * k);
    for i in 0..k {
        let (_, c) = clusters.get(i).unwrap_or(&clusters[0]);
        out.extend_from_slice(c);
    }
    out
}
