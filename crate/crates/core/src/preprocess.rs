//! Feature standardization and density-based outlier removal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, Flag, FEATURE_NAMES};

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("dimension `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("eps must be positive and finite, got {0}")]
    BadEps(f64),
    #[error("min_pts must be at least 1")]
    BadMinPts,
    #[error("dimension mismatch: standardizer has {expected} dims, row has {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Which columns a [`Standardizer`] covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StandardizeDims {
    /// The eight sensor features.
    Features,
    /// The eight features followed by the NO₂ label.
    FeaturesAndLabel,
}

/// Per-dimension z-scoring with sample mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fits on rows of equal length; `names` labels the columns for error messages.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R], names: &[&str]) -> Result<Self, PreprocessError> {
        let dims = names.len();
        if rows.len() < 2 {
            return Err(PreprocessError::TooFewRecords {
                needed: 2,
                got: rows.len(),
            });
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dims];
        for r in rows {
            let r = r.as_ref();
            if r.len() != dims {
                return Err(PreprocessError::DimensionMismatch {
                    expected: dims,
                    got: r.len(),
                });
            }
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dims];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut std = Vec::with_capacity(dims);
        for (k, s) in var.into_iter().enumerate() {
            let sd = (s / (n - 1.0)).sqrt();
            if !(sd > 0.0 && sd.is_finite()) {
                return Err(PreprocessError::ZeroVariance(names[k].to_string()));
            }
            std.push(sd);
        }
        Ok(Standardizer {
            names: names.iter().map(|s| s.to_string()).collect(),
            mean,
            std,
        })
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    /// Standardizes the leading `row.len()` dimensions.
    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn inverse(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(z, (m, s))| z * s + m)
            .collect()
    }

    /// Standardizes a single value of dimension `k`.
    pub fn transform_dim(&self, k: usize, v: f64) -> f64 {
        (v - self.mean[k]) / self.std[k]
    }

    pub fn inverse_dim(&self, k: usize, z: f64) -> f64 {
        z * self.std[k] + self.mean[k]
    }
}

fn joint_names() -> Vec<&'static str> {
    let mut names = FEATURE_NAMES.to_vec();
    names.push("ref_no2");
    names
}

fn rows_for(d: &Dataset, dims: StandardizeDims) -> Vec<(usize, Vec<f64>)> {
    d.records
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.flags.contains(Flag::Outlier))
        .filter_map(|(i, r)| {
            let mut row = r.features.to_array().to_vec();
            match dims {
                StandardizeDims::Features => Some((i, row)),
                StandardizeDims::FeaturesAndLabel => r.ref_no2.map(|y| {
                    row.push(y);
                    (i, row)
                }),
            }
        })
        .collect()
}

/// Fits a standardizer on the non-outlier records of `d` (labeled ones only for the joint form).
pub fn fit_standardizer(d: &Dataset, dims: StandardizeDims) -> Result<Standardizer, PreprocessError> {
    let rows: Vec<Vec<f64>> = rows_for(d, dims).into_iter().map(|(_, r)| r).collect();
    match dims {
        StandardizeDims::Features => Standardizer::fit(&rows, &FEATURE_NAMES),
        StandardizeDims::FeaturesAndLabel => Standardizer::fit(&rows, &joint_names()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    /// Neighborhood radius in standardized units.
    pub eps: f64,
    /// Neighbors (the point itself included) needed for a core point.
    pub min_pts: usize,
    pub space: StandardizeDims,
}

impl Default for DbscanParams {
    fn default() -> Self {
        DbscanParams {
            eps: 1.0,
            min_pts: 8,
            space: StandardizeDims::FeaturesAndLabel,
        }
    }
}

impl DbscanParams {
    fn check(&self) -> Result<(), PreprocessError> {
        if !(self.eps > 0.0) || self.eps.is_nan() {
            return Err(PreprocessError::BadEps(self.eps));
        }
        if self.min_pts == 0 {
            return Err(PreprocessError::BadMinPts);
        }
        Ok(())
    }
}

/// Cluster assignment of one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointLabel {
    Noise,
    Cluster(usize),
}

/// DBSCAN over arbitrary points with the Euclidean metric.
///
/// Clusters are grown from core points in index order; a border point joins
/// the first cluster that reaches it. Region queries prune on the first
/// coordinate after sorting, so only points within `eps` along that axis are
/// compared in full.
pub fn dbscan<R: AsRef<[f64]> + Sync>(points: &[R], eps: f64, min_pts: usize) -> Vec<PointLabel> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a].as_ref()[0].total_cmp(&points[b].as_ref()[0]));
    let keys: Vec<f64> = order.iter().map(|&i| points[i].as_ref()[0]).collect();
    let eps2 = eps * eps;

    let neighbors: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = points[i].as_ref();
            let lo = keys.partition_point(|&k| k < p[0] - eps);
            let hi = keys.partition_point(|&k| k <= p[0] + eps);
            let mut out: Vec<usize> = order[lo..hi]
                .iter()
                .copied()
                .filter(|&j| {
                    let q = points[j].as_ref();
                    let mut d2 = 0.0;
                    for (a, b) in p.iter().zip(q) {
                        d2 += (a - b) * (a - b);
                    }
                    d2 <= eps2
                })
                .collect();
            out.sort_unstable();
            out
        })
        .collect();

    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();
    let mut labels = vec![PointLabel::Noise; n];
    let mut assigned = vec![false; n];
    let mut cluster = 0;
    for seed in 0..n {
        if assigned[seed] || !core[seed] {
            continue;
        }
        assigned[seed] = true;
        labels[seed] = PointLabel::Cluster(cluster);
        let mut frontier = vec![seed];
        while let Some(p) = frontier.pop() {
            for &q in &neighbors[p] {
                if !assigned[q] {
                    assigned[q] = true;
                    labels[q] = PointLabel::Cluster(cluster);
                    if core[q] {
                        frontier.push(q);
                    }
                }
            }
        }
        cluster += 1;
    }
    labels
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DbscanSummary {
    pub points: usize,
    pub clusters: usize,
    pub flagged: usize,
}

/// Flags DBSCAN noise points as [`Flag::Outlier`]; record count and order are preserved.
///
/// In the joint space only labeled records take part; unlabeled records are
/// left untouched.
pub fn dbscan_outliers(d: &Dataset, p: &DbscanParams) -> Result<(Dataset, DbscanSummary), PreprocessError> {
    p.check()?;
    let rows = rows_for(d, p.space);
    if rows.len() < p.min_pts {
        return Err(PreprocessError::TooFewRecords {
            needed: p.min_pts,
            got: rows.len(),
        });
    }
    let raw: Vec<&Vec<f64>> = rows.iter().map(|(_, r)| r).collect();
    let names = match p.space {
        StandardizeDims::Features => FEATURE_NAMES.to_vec(),
        StandardizeDims::FeaturesAndLabel => joint_names(),
    };
    let st = Standardizer::fit(&raw, &names)?;
    let points: Vec<Vec<f64>> = raw.iter().map(|r| st.transform(r)).collect();
    let labels = dbscan(&points, p.eps, p.min_pts);

    let mut out = d.clone();
    let mut flagged = 0;
    let mut clusters = 0;
    for ((idx, _), label) in rows.iter().zip(&labels) {
        match label {
            PointLabel::Noise => {
                out.records[*idx].flags.insert(Flag::Outlier);
                flagged += 1;
            }
            PointLabel::Cluster(c) => clusters = clusters.max(c + 1),
        }
    }
    out.meta.params.push(("dbscan_eps".into(), p.eps.to_string()));
    out.meta.params.push(("dbscan_min_pts".into(), p.min_pts.to_string()));
    Ok((
        out,
        DbscanSummary {
            points: rows.len(),
            clusters,
            flagged,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureVector, HourlyRecord, HOUR};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Textbook DBSCAN with brute-force neighborhoods; returns the noise set.
    fn reference_noise(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<bool> {
        let n = points.len();
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let nb: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&j| dist(&points[i], &points[j]) <= eps).collect())
            .collect();
        let mut visited = vec![false; n];
        let mut in_cluster = vec![false; n];
        for i in 0..n {
            if visited[i] {
                continue;
            }
            visited[i] = true;
            if nb[i].len() < min_pts {
                continue;
            }
            in_cluster[i] = true;
            let mut queue: Vec<usize> = nb[i].clone();
            let mut k = 0;
            while k < queue.len() {
                let q = queue[k];
                k += 1;
                if !visited[q] {
                    visited[q] = true;
                    if nb[q].len() >= min_pts {
                        queue.extend(nb[q].iter().copied());
                    }
                }
                in_cluster[q] = true;
            }
        }
        in_cluster.iter().map(|c| !c).collect()
    }

    fn noise_of(labels: &[PointLabel]) -> Vec<bool> {
        labels.iter().map(|l| *l == PointLabel::Noise).collect()
    }

    #[test]
    fn standardizer_two_values() {
        let st = Standardizer::fit(&[[1.0], [3.0]], &["x"]).unwrap();
        assert_eq!(st.mean, vec![2.0]);
        assert!((st.std[0] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn standardizer_rejects_constant_column() {
        let err = Standardizer::fit(&[[1.0, 5.0], [3.0, 5.0], [4.0, 5.0]], &["a", "b"]).unwrap_err();
        assert_eq!(err, PreprocessError::ZeroVariance("b".into()));
    }

    #[test]
    fn standardizer_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<[f64; 4]> = (0..50).map(|_| [rng.gen(), rng.gen::<f64>() * 100.0, -rng.gen::<f64>(), rng.gen()]).collect();
        let st = Standardizer::fit(&rows, &["a", "b", "c", "d"]).unwrap();
        for r in &rows {
            let back = st.inverse(&st.transform(r));
            for (x, y) in back.iter().zip(r) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    fn blobs(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let mut pts = Vec::new();
        for centre in [[0.0, 0.0], [10.0, 10.0]] {
            for _ in 0..40 {
                pts.push(vec![centre[0] + rng.gen_range(-0.5..0.5), centre[1] + rng.gen_range(-0.5..0.5)]);
            }
        }
        pts.push(vec![30.0, -20.0]);
        pts
    }

    #[test]
    fn isolated_point_is_the_only_noise() {
        let pts = blobs(&mut ChaCha8Rng::seed_from_u64(1));
        let labels = dbscan(&pts, 1.0, 4);
        let noise = noise_of(&labels);
        assert_eq!(noise, reference_noise(&pts, 1.0, 4));
        assert_eq!(noise.iter().filter(|n| **n).count(), 1);
        assert!(noise[80]);
        assert_ne!(labels[0], labels[40]);
    }

    #[test]
    fn huge_eps_and_min_pts_one_flag_nothing() {
        let pts = blobs(&mut ChaCha8Rng::seed_from_u64(2));
        assert!(noise_of(&dbscan(&pts, 1e9, 4)).iter().all(|n| !n));
        assert!(noise_of(&dbscan(&pts, 1e-6, 1)).iter().all(|n| !n));
    }

    fn labeled_dataset(points: &[Vec<f64>]) -> Dataset {
        let records = points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let f = [p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7]];
                let mut r = HourlyRecord::new(i as i64 * HOUR, FeatureVector::from_array(f));
                r.ref_no2 = Some(p[8]);
                r
            })
            .collect();
        Dataset::new(records, "test")
    }

    fn random_points(seed: u64, n: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let c = if rng.gen_bool(0.5) { 0.0 } else { 3.0 };
                (0..9).map(|_| c + rng.gen_range(-1.0..1.0) * if rng.gen_bool(0.05) { 6.0 } else { 1.0 }).collect()
            })
            .collect()
    }

    #[test]
    fn dataset_wrapper_matches_reference_and_preserves_count() {
        let pts = random_points(9, 300);
        let d = labeled_dataset(&pts);
        let params = DbscanParams { eps: 1.2, min_pts: 5, space: StandardizeDims::FeaturesAndLabel };
        let (out, summary) = dbscan_outliers(&d, &params).unwrap();
        assert_eq!(out.len(), d.len());
        let st = Standardizer::fit(&pts, &joint_names()).unwrap();
        let z: Vec<Vec<f64>> = pts.iter().map(|p| st.transform(p)).collect();
        let expected = reference_noise(&z, 1.2, 5);
        let got: Vec<bool> = out.records.iter().map(|r| r.flags.contains(Flag::Outlier)).collect();
        assert_eq!(got, expected);
        assert_eq!(summary.flagged, expected.iter().filter(|x| **x).count());
    }

    #[test]
    fn too_few_records() {
        let d = labeled_dataset(&random_points(1, 5));
        let err = dbscan_outliers(&d, &DbscanParams::default()).unwrap_err();
        assert_eq!(err, PreprocessError::TooFewRecords { needed: 8, got: 5 });
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn noise_set_independent_of_order(seed in any::<u64>(), n in 10usize..120) {
            let pts = random_points(seed, n);
            let mut perm: Vec<usize> = (0..n).collect();
            use rand::seq::SliceRandom;
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(1)));
            let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
            let a = noise_of(&dbscan(&pts, 1.5, 4));
            let b = noise_of(&dbscan(&shuffled, 1.5, 4));
            for (k, &i) in perm.iter().enumerate() {
                prop_assert_eq!(a[i], b[k]);
            }
        }

        #[test]
        fn fewer_flags_at_larger_eps(seed in any::<u64>(), n in 10usize..120, e1 in 0.2f64..2.0, de in 0.01f64..2.0) {
            let pts = random_points(seed, n);
            let count = |eps| noise_of(&dbscan(&pts, eps, 5)).iter().filter(|x| **x).count();
            prop_assert!(count(e1) >= count(e1 + de));
        }

        #[test]
        fn matches_brute_force(seed in any::<u64>(), n in 1usize..150, eps in 0.3f64..3.0, min_pts in 1usize..10) {
            let pts = random_points(seed, n);
            prop_assert_eq!(noise_of(&dbscan(&pts, eps, min_pts)), reference_noise(&pts, eps, min_pts));
        }
    }
}
