//! Density-based clustering of 2-D points.
//!
//! A point is a core point when at least `min_pts` points (itself included)
//! lie within `eps`. Clusters are the connected components of core points
//! under the `eps` neighbourhood relation, numbered by their smallest core
//! index. A border point joins the cluster of its nearest core neighbour;
//! equidistant candidates are resolved by the lexicographically smallest
//! core coordinate, so the resulting partition does not depend on input
//! order.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClusterLabel {
    Cluster(usize),
    Noise,
}

impl ClusterLabel {
    pub fn cluster(self) -> Option<usize> {
        match self {
            ClusterLabel::Cluster(c) => Some(c),
            ClusterLabel::Noise => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DbscanError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

struct Grid {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl Grid {
    fn new(points: &[Point], cell: f64) -> Self {
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key_of(*p, cell)).or_default().push(i);
        }
        Grid { cell, cells }
    }

    fn key_of(p: Point, cell: f64) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }

    fn neighbours(&self, points: &[Point], i: usize, eps2: f64) -> Vec<usize> {
        let (cx, cy) = Self::key_of(points[i], self.cell);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = self.cells.get(&(cx + dx, cy + dy)) {
                    out.extend(bucket.iter().copied().filter(|&j| points[i].dist2(points[j]) <= eps2));
                }
            }
        }
        out.sort_unstable();
        out
    }
}

pub fn dbscan(points: &[Point], eps: f64, min_pts: usize) -> Result<Vec<ClusterLabel>, DbscanError> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(DbscanError::InvalidParam(format!("eps must be positive, got {eps}")));
    }
    if min_pts < 1 {
        return Err(DbscanError::InvalidParam("min_pts must be at least 1".into()));
    }
    if let Some(i) = points.iter().position(|p| !p.is_finite()) {
        return Err(DbscanError::InvalidParam(format!("point {i} has a non-finite coordinate")));
    }

    let eps2 = eps * eps;
    // slightly oversized cells keep every eps-neighbour in the 3x3 block despite rounding
    let grid = Grid::new(points, eps * (1.0 + 1e-9));
    let neighbours: Vec<Vec<usize>> = (0..points.len()).map(|i| grid.neighbours(points, i, eps2)).collect();
    let core: Vec<bool> = neighbours.iter().map(|n| n.len() >= min_pts).collect();

    let mut labels = vec![ClusterLabel::Noise; points.len()];
    let mut assigned = vec![false; points.len()];
    let mut next = 0;
    for start in 0..points.len() {
        if !core[start] || assigned[start] {
            continue;
        }
        let id = next;
        next += 1;
        assigned[start] = true;
        labels[start] = ClusterLabel::Cluster(id);
        let mut queue = vec![start];
        while let Some(i) = queue.pop() {
            for &j in &neighbours[i] {
                if core[j] && !assigned[j] {
                    assigned[j] = true;
                    labels[j] = ClusterLabel::Cluster(id);
                    queue.push(j);
                }
            }
        }
    }

    for i in 0..points.len() {
        if core[i] {
            continue;
        }
        let nearest = neighbours[i].iter().copied().filter(|&j| core[j]).min_by(|&a, &b| nearer_core(points, i, a, b));
        if let Some(j) = nearest {
            labels[i] = labels[j];
        }
    }
    Ok(labels)
}

fn nearer_core(points: &[Point], from: usize, a: usize, b: usize) -> Ordering {
    let (pa, pb) = (points[a], points[b]);
    points[from].dist2(pa).total_cmp(&points[from].dist2(pb)).then(pa.x.total_cmp(&pb.x)).then(pa.y.total_cmp(&pb.y))
}

/// Centroid of every cluster, indexed by cluster id.
pub fn centroids(points: &[Point], labels: &[ClusterLabel]) -> Vec<Point> {
    let count = labels.iter().filter_map(|l| l.cluster()).max().map_or(0, |m| m + 1);
    let mut sums = vec![(0.0, 0.0, 0usize); count];
    for (p, l) in points.iter().zip(labels) {
        if let Some(c) = l.cluster() {
            sums[c].0 += p.x;
            sums[c].1 += p.y;
            sums[c].2 += 1;
        }
    }
    sums.into_iter().map(|(x, y, n)| Point::new(x / n as f64, y / n as f64)).collect()
}
