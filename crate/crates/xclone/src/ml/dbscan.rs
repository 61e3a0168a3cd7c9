//! DBSCAN over cosine distance.
//!
//! Used by the benchmark builder to group problems whose descriptions look
//! alike, so that "hard" negative pairs can be drawn from far-away groups.

use super::similarity::cosine_distance;
use super::{check_finite, MlError};
use std::collections::VecDeque;

/// Density-based clustering with the classic DBSCAN semantics:
///
/// * a point is a *core* point when at least `min_pts` points (itself
///   included) lie within `eps` cosine distance;
/// * clusters grow from core points by density-reachability;
/// * non-core points inside a cluster's reach are *border* points and get
///   the id of the first cluster that claims them (clusters are grown in
///   ascending scan order, so ids are deterministic);
/// * everything else is noise (`None`).
///
/// Returns one `Option<cluster id>` per input point, ids numbered from 0 in
/// order of cluster creation.
pub fn dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Result<Vec<Option<usize>>, MlError> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(MlError::InvalidParameter(format!("eps must be > 0, got {eps}")));
    }
    if min_pts < 2 {
        return Err(MlError::InvalidParameter(format!("min_pts must be ≥ 2, got {min_pts}")));
    }
    for p in points {
        check_finite(p)?;
    }
    // Pairwise distances up front: cosine errors (zero vectors, mixed
    // dimensions) surface before any clustering state exists.
    let n = points.len();
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = cosine_distance(&points[i], &points[j])?;
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let neighbours = |i: usize| -> Vec<usize> {
        (0..n).filter(|&j| dist[i * n + j] <= eps).collect()
    };

    #[derive(Clone, Copy, PartialEq)]
    enum State {
        Unvisited,
        Noise,
        Cluster(usize),
    }
    let mut state = vec![State::Unvisited; n];
    let mut next_cluster = 0;
    for i in 0..n {
        if state[i] != State::Unvisited {
            continue;
        }
        let seed_neighbours = neighbours(i);
        if seed_neighbours.len() < min_pts {
            state[i] = State::Noise;
            continue;
        }
        let cluster = next_cluster;
        next_cluster += 1;
        state[i] = State::Cluster(cluster);
        let mut queue: VecDeque<usize> = seed_neighbours.into_iter().filter(|&j| j != i).collect();
        while let Some(j) = queue.pop_front() {
            if state[j] == State::Noise {
                state[j] = State::Cluster(cluster); // border point, first claim wins
                continue;
            }
            if state[j] != State::Unvisited {
                continue;
            }
            state[j] = State::Cluster(cluster);
            let jn = neighbours(j);
            if jn.len() >= min_pts {
                queue.extend(jn);
            }
        }
    }
    Ok(state
        .into_iter()
        .map(|s| match s {
            State::Cluster(c) => Some(c),
            State::Noise => None,
            State::Unvisited => unreachable!("all points visited"),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_close_one_far() {
        // Two nearly parallel unit vectors and one orthogonal straggler.
        let points = vec![
            vec![1.0, 0.0],
            vec![0.999, 0.0447],
            vec![0.0, 1.0],
        ];
        let labels = dbscan(&points, 0.3, 2).unwrap();
        assert_eq!(labels, vec![Some(0), Some(0), None]);
    }

    #[test]
    fn identical_points_form_one_cluster() {
        let points = vec![vec![1.0, 1.0]; 4];
        let labels = dbscan(&points, 0.1, 2).unwrap();
        assert_eq!(labels, vec![Some(0); 4]);
    }

    #[test]
    fn rejects_bad_parameters_and_zero_vectors() {
        let points = vec![vec![1.0], vec![1.0]];
        assert!(dbscan(&points, 0.0, 2).is_err());
        assert!(dbscan(&points, 0.5, 1).is_err());
        assert!(matches!(
            dbscan(&[vec![0.0, 0.0], vec![1.0, 0.0]], 0.5, 2),
            Err(MlError::ZeroVector)
        ));
    }
}
