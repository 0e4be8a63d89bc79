use meddm_core::flowgraph::{dbscan, ClusterLabel, Point};
use meddm_testkit::{dbscan_reference, partition, random_points};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn labels(points: &[Point], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    dbscan(points, eps, min_pts).unwrap().into_iter().map(ClusterLabel::cluster).collect()
}

proptest! {
    #[test]
    fn matches_reference(seed in any::<u64>(), n in 0usize..120, eps in 0.5f64..12.0, min_pts in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = random_points(&mut rng, n, 60.0);
        prop_assert_eq!(labels(&points, eps, min_pts), dbscan_reference(&points, eps, min_pts));
    }

    #[test]
    fn partition_ignores_input_order(seed in any::<u64>(), n in 1usize..80, eps in 1.0f64..10.0, min_pts in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = random_points(&mut rng, n, 40.0);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let shuffled: Vec<Point> = order.iter().map(|&i| points[i]).collect();
        let a = labels(&points, eps, min_pts);
        let b = labels(&shuffled, eps, min_pts);
        // map b back to original indices
        let mut back = vec![None; n];
        for (pos, &orig) in order.iter().enumerate() {
            back[orig] = b[pos];
        }
        prop_assert_eq!(partition(&a), partition(&back));
    }
}

#[test]
fn two_blobs_and_noise() {
    let mut pts: Vec<Point> = (0..5).map(|i| Point::new(i as f64, 0.0)).collect();
    pts.extend((0..5).map(|i| Point::new(100.0 + i as f64, 0.0)));
    pts.push(Point::new(50.0, 50.0));
    let got = labels(&pts, 1.5, 3);
    assert_eq!(got[..5], [Some(0); 5]);
    assert_eq!(got[5..10], [Some(1); 5]);
    assert_eq!(got[10], None);
}

#[test]
fn rejects_bad_parameters() {
    let pts = [Point::new(0.0, 0.0)];
    assert!(dbscan(&pts, 0.0, 2).is_err());
    assert!(dbscan(&pts, f64::NAN, 2).is_err());
    assert!(dbscan(&pts, 1.0, 0).is_err());
    assert!(dbscan(&[Point::new(f64::INFINITY, 0.0)], 1.0, 1).is_err());
    assert_eq!(dbscan(&[], 1.0, 1).unwrap(), vec![]);
}
