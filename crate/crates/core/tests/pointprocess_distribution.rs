mod common;

use cogperc::pointprocess::{displace_uniform_disk, sample_poisson_count, sample_primary_field};
use cogperc::{
    sample_poisson_points, sample_secondary_network, BoxRegion, Point2D, SeededRng,
    SimulationParams,
};
use common::{ks_critical, ks_statistic};
use rand::Rng;
use std::f64::consts::PI;

#[test]
fn nearest_neighbour_distance_is_rayleigh() {
    let lambda = 700.0;
    let region = BoxRegion::centered_square(2.0).unwrap();
    let params = SimulationParams {
        secondary_density: lambda,
        ..SimulationParams::reference(0.0, 0.0)
    };
    let net = sample_secondary_network(&params, &region, &SeededRng::new(3));
    let inner = region.shrunk(0.3).unwrap();
    let mut rng = SeededRng::new(4).rng();
    let mut d = Vec::new();
    for _ in 0..2000 {
        let q = inner.point_at(rng.random(), rng.random());
        let nn = net.nearest(&q).unwrap();
        d.push(q.distance(&net.points()[nn as usize]));
    }
    let ks = ks_statistic(&d, |r| 1.0 - (-lambda * PI * r * r).exp());
    assert!(ks < ks_critical(d.len()), "KS {ks}");
}

#[test]
fn disk_displacement_radius_and_angle() {
    let mut rng = SeededRng::new(11).rng();
    let big_r = 0.05;
    let (mut radii, mut angles) = (Vec::new(), Vec::new());
    for _ in 0..5000 {
        let p = displace_uniform_disk(&Point2D::ORIGIN, big_r, &mut rng);
        radii.push(p.x.hypot(p.y));
        angles.push(p.y.atan2(p.x));
    }
    assert!(radii.iter().all(|&r| r <= big_r));
    let ks_r = ks_statistic(&radii, |r| (r / big_r).powi(2));
    let ks_a = ks_statistic(&angles, |a| (a + PI) / (2.0 * PI));
    assert!(ks_r < ks_critical(5000), "radius KS {ks_r}");
    assert!(ks_a < ks_critical(5000), "angle KS {ks_a}");
}

#[test]
fn independent_thinning_stays_poisson() {
    let region = BoxRegion::centered_square(0.5).unwrap();
    let (lambda, keep) = (200.0, 0.3);
    let mut counts = Vec::new();
    for i in 0..2000 {
        let mut rng = SeededRng::new(5).derive("thin", i).rng();
        let pts = sample_poisson_points(lambda, &region, &mut rng);
        counts.push(pts.iter().filter(|_| rng.random::<f64>() < keep).count() as f64);
    }
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let target = lambda * keep * region.area();
    assert!(
        (mean - target).abs() < 0.03 * target,
        "mean {mean} vs {target}"
    );
    assert!(
        (0.9..1.1).contains(&(var / mean)),
        "dispersion {}",
        var / mean
    );
}

#[test]
fn counts_in_disjoint_boxes_uncorrelated() {
    let region = BoxRegion::centered_square(1.0).unwrap();
    let left = BoxRegion::new(-1.0, 0.0, -1.0, 1.0).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for i in 0..2000 {
        let mut rng = SeededRng::new(6).derive("split", i).rng();
        let pts = sample_poisson_points(50.0, &region, &mut rng);
        let l = pts.iter().filter(|p| p.x < 0.0 && left.contains(p)).count() as f64;
        a.push(l);
        b.push(pts.len() as f64 - l);
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / (n - 1.0);
    let corr = cov / (ma.sqrt() * mb.sqrt());
    assert!(corr.abs() < 0.1, "correlation {corr}");
}

#[test]
fn receiver_counts_match_transmitter_density() {
    let params = SimulationParams::reference(50.0, 0.0);
    let region = BoxRegion::centered_square(1.0).unwrap();
    let sub = BoxRegion::new(-0.4, 0.4, -0.3, 0.5).unwrap();
    let counts: Vec<f64> = (0..2000)
        .map(|t| {
            let f = sample_primary_field(
                params.primary_density,
                &params,
                &region,
                t,
                &SeededRng::new(8),
            );
            f.rx_points().iter().filter(|p| sub.contains(p)).count() as f64
        })
        .collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let target = 50.0 * sub.area();
    assert!(
        (mean - target).abs() < 0.02 * target,
        "mean {mean} vs {target}"
    );
    assert!((0.9..=1.1).contains(&(var / mean)));
}

#[test]
fn large_mean_counts() {
    let mut rng = SeededRng::new(9).rng();
    let xs: Vec<f64> = (0..4000)
        .map(|_| sample_poisson_count(400.0, &mut rng) as f64)
        .collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((mean - 400.0).abs() < 2.0);
    assert!((var / 400.0 - 1.0).abs() < 0.1);
}

#[test]
fn scaling_maps_points_exactly() {
    let s = 2.0;
    let p = SimulationParams::reference(0.0, 0.0);
    let q = p.rescaled(s);
    let region = BoxRegion::centered_square(1.0).unwrap();
    let a = sample_secondary_network(&p, &region, &SeededRng::new(21));
    let b = sample_secondary_network(&q, &region.scaled(s).unwrap(), &SeededRng::new(21));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.points().iter().zip(b.points()) {
        assert!((x.x * s - y.x).abs() < 1e-12 && (x.y * s - y.y).abs() < 1e-12);
    }
}
