use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::attribution::AttributionMatrix;
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 100;
const CENTER_SHIFT_TOL: f64 = 1e-8;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = dist2(point, center);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

/// Seeded k-means++ initialization.
fn init_centers(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    chosen = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            chosen.expect("positive total has a positive entry")
        } else {
            rng.random_range(0..points.len())
        };
        centers.push(points[pick].clone());
        let newest = centers.last().unwrap();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, newest));
        }
    }
    centers
}

/// k-means on SHAP rows. Labels are renumbered in order of first
/// appearance, so sample 0 is always in cluster 0.
pub fn supervised_cluster(attr: &AttributionMatrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    let points = &attr.values;
    let n = points.len();
    if k == 0 {
        return Err(Error::invalid("cluster count must be at least 1"));
    }
    if k > n {
        return Err(Error::invalid(format!("{k} clusters requested for {n} samples")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = init_centers(points, k, &mut rng);
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
    let dims = attr.n_features();
    for _ in 0..MAX_ITERATIONS {
        let mut sums = vec![vec![0.0; dims]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let updated: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            shift = shift.max(dist2(&updated, &centers[c]).sqrt());
            centers[c] = updated;
        }
        labels = points.iter().map(|p| nearest(p, &centers)).collect();
        if shift < CENTER_SHIFT_TOL {
            break;
        }
    }
    let mut remap = vec![usize::MAX; k];
    let mut next = 0;
    for l in &mut labels {
        if remap[*l] == usize::MAX {
            remap[*l] = next;
            next += 1;
        }
        *l = remap[*l];
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn attr(values: Vec<Vec<f64>>) -> AttributionMatrix {
        let m = values[0].len();
        AttributionMatrix {
            values,
            base_value: 0.0,
            feature_names: (0..m).map(|i| format!("f{i}")).collect(),
        }
    }

    #[test]
    fn one_cluster() {
        let a = attr((0..10).map(|i| vec![i as f64, 1.0]).collect());
        assert_eq!(supervised_cluster(&a, 1, 3).unwrap(), vec![0; 10]);
    }

    #[test]
    fn n_clusters_are_singletons() {
        let a = attr((0..8).map(|i| vec![(i * i) as f64, -(i as f64)]).collect());
        let mut labels = supervised_cluster(&a, 8, 5).unwrap();
        labels.sort_unstable();
        assert_eq!(labels, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn too_many_clusters() {
        let a = attr(vec![vec![0.0], vec![1.0]]);
        assert!(supervised_cluster(&a, 3, 0).is_err());
        assert!(supervised_cluster(&a, 0, 0).is_err());
    }

    #[test]
    fn opposite_depth_effects_separate() {
        // population A pays for depth, population B benefits from it
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let noise = Normal::new(0.0, 0.08).unwrap();
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for i in 0..120 {
            let group = i % 2;
            let depth = if group == 0 { -0.5 } else { 0.5 };
            rows.push(vec![
                depth + noise.sample(&mut rng),
                0.1 * noise.sample(&mut rng),
                0.2 + noise.sample(&mut rng),
            ]);
            truth.push(group);
        }
        let labels = supervised_cluster(&attr(rows), 2, 7).unwrap();
        let agree = labels.iter().zip(&truth).filter(|(a, b)| a == b).count();
        let agreement = agree.max(labels.len() - agree) as f64 / labels.len() as f64;
        assert!(agreement >= 0.95, "agreement {agreement}");
    }

    #[test]
    fn deterministic_for_seed() {
        let a = attr((0..30).map(|i| vec![((i * 37) % 11) as f64, (i % 4) as f64]).collect());
        assert_eq!(supervised_cluster(&a, 3, 9).unwrap(), supervised_cluster(&a, 3, 9).unwrap());
    }
}
