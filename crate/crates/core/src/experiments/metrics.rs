//! Cluster quality of a latent table against known labels.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterMetrics {
    /// Leave-one-out k-NN accuracy.
    pub knn_accuracy: f64,
    /// Smallest distance between class centroids over the mean within-class
    /// RMS distance. `None` when undefined (one class, or zero spread).
    pub separation_ratio: Option<f64>,
    pub single_class: bool,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check(points: &[Vec<f64>], labels: &[usize]) -> Result<()> {
    if points.len() != labels.len() {
        return Err(Error::Shape {
            op: "cluster metrics",
            lhs: vec![points.len()],
            rhs: vec![labels.len()],
        });
    }
    if points.is_empty() {
        return Err(Error::contract("cluster metrics need at least one point"));
    }
    Ok(())
}

/// Indices of the `k` nearest neighbours of `i`, excluding `i`. Equal
/// distances are broken by index.
pub fn nearest(points: &[Vec<f64>], i: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, p)| (dist2(&points[i], p), j))
        .collect();
    let k = k.min(d.len());
    if k == 0 {
        return Vec::new();
    }
    d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.truncate(k);
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().map(|(_, j)| j).collect()
}

/// Leave-one-out k-NN accuracy. Vote ties go to the class whose member
/// ranks nearest. A single point is trivially correct.
pub fn knn_accuracy(points: &[Vec<f64>], labels: &[usize], k: usize) -> Result<f64> {
    check(points, labels)?;
    let classes = labels.iter().max().unwrap() + 1;
    let mut correct = 0usize;
    for i in 0..points.len() {
        let nn = nearest(points, i, k);
        if nn.is_empty() {
            correct += 1;
            continue;
        }
        let mut votes = vec![0usize; classes];
        for &j in &nn {
            votes[labels[j]] += 1;
        }
        let best = *votes.iter().max().unwrap();
        let winner = nn.iter().map(|&j| labels[j]).find(|&c| votes[c] == best).unwrap();
        if winner == labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / points.len() as f64)
}

pub fn centroid_separation_ratio(points: &[Vec<f64>], labels: &[usize]) -> Result<Option<f64>> {
    check(points, labels)?;
    let dim = points[0].len();
    let classes = labels.iter().max().unwrap() + 1;
    let mut sums = vec![vec![0.0; dim]; classes];
    let mut counts = vec![0usize; classes];
    for (p, &c) in points.iter().zip(labels) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(p) {
            *s += v;
        }
    }
    let present: Vec<usize> = (0..classes).filter(|&c| counts[c] > 0).collect();
    if present.len() < 2 {
        return Ok(None);
    }
    let centroids: Vec<Vec<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| s.iter().map(|v| v / n.max(1) as f64).collect())
        .collect();
    let mut sq = vec![0.0; classes];
    for (p, &c) in points.iter().zip(labels) {
        sq[c] += dist2(p, &centroids[c]);
    }
    let within = present.iter().map(|&c| (sq[c] / counts[c] as f64).sqrt()).sum::<f64>() / present.len() as f64;
    let mut between = f64::INFINITY;
    for (a, &ca) in present.iter().enumerate() {
        for &cb in &present[a + 1..] {
            between = between.min(dist2(&centroids[ca], &centroids[cb]).sqrt());
        }
    }
    Ok((within > 0.0).then(|| between / within))
}

pub fn cluster_metrics(points: &[Vec<f64>], labels: &[usize]) -> Result<ClusterMetrics> {
    check(points, labels)?;
    let single_class = labels.iter().all(|&l| l == labels[0]);
    let knn_accuracy = if single_class {
        1.0
    } else {
        knn_accuracy(points, labels, 5)?
    };
    Ok(ClusterMetrics {
        knn_accuracy,
        separation_ratio: centroid_separation_ratio(points, labels)?,
        single_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn clouds(n: usize, sep: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut r = rng::stream(1, "data");
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let pts = labels
            .iter()
            .map(|&c| vec![c as f64 * sep + r.random_range(-0.5..0.5), r.random_range(-0.5..0.5)])
            .collect();
        (pts, labels)
    }

    #[test]
    fn separated_clouds() {
        let (p, l) = clouds(200, 100.0);
        let m = cluster_metrics(&p, &l).unwrap();
        assert_eq!(m.knn_accuracy, 1.0);
        assert!(m.separation_ratio.unwrap() > 50.0);
    }

    #[test]
    fn shuffled_labels_are_at_chance() {
        let (p, mut l) = clouds(2000, 100.0);
        l.shuffle(&mut rng::stream(2, "shuffle"));
        let acc = knn_accuracy(&p, &l, 5).unwrap();
        assert!((acc - 0.5).abs() < 0.05, "{acc}");
    }

    #[test]
    fn identical_points_are_uninformative() {
        let p = vec![vec![0.0, 0.0]; 100];
        let l: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let acc = knn_accuracy(&p, &l, 5).unwrap();
        assert!((acc - 0.5).abs() <= 0.1, "{acc}");
        assert_eq!(centroid_separation_ratio(&p, &l).unwrap(), None);
    }

    #[test]
    fn single_class_is_flagged() {
        let m = cluster_metrics(&[vec![0.0], vec![1.0]], &[0, 0]).unwrap();
        assert!(m.single_class);
        assert_eq!(m.knn_accuracy, 1.0);
        assert_eq!(m.separation_ratio, None);
    }
}
