use cnnprobe::embed::tsne::{
    initial_layout, joint_affinities, kl_divergence, kl_gradient, tsne, TsneConfig,
};
use cnnprobe::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn cloud(n: usize, dim: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

/// Two Gaussian blobs with centers `gap` apart; returns points and labels.
fn two_clusters(per: usize, dim: usize, sigma: f32, gap: f32, seed: u64) -> (Vec<Vec<f32>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0f32, sigma).unwrap();
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for label in 0..2 {
        for _ in 0..per {
            let mut p: Vec<f32> = (0..dim).map(|_| noise.sample(&mut rng)).collect();
            p[0] += gap * label as f32;
            points.push(p);
            labels.push(label);
        }
    }
    (points, labels)
}

/// Splits points into two groups by cutting the longest edge of the
/// Euclidean minimum spanning tree (single linkage, two clusters).
fn single_linkage_two(y: &[[f64; 2]]) -> Vec<usize> {
    let n = y.len();
    let d = |a: usize, b: usize| ((y[a][0] - y[b][0]).powi(2) + (y[a][1] - y[b][1]).powi(2)).sqrt();
    let mut in_tree = vec![false; n];
    let mut best = vec![(f64::INFINITY, 0usize); n];
    let mut edges = Vec::new();
    in_tree[0] = true;
    for (j, b) in best.iter_mut().enumerate().skip(1) {
        *b = (d(0, j), 0);
    }
    for _ in 1..n {
        let next = (0..n)
            .filter(|&j| !in_tree[j])
            .min_by(|&a, &b| best[a].0.total_cmp(&best[b].0))
            .unwrap();
        in_tree[next] = true;
        edges.push((best[next].0, best[next].1, next));
        for j in 0..n {
            if !in_tree[j] && d(next, j) < best[j].0 {
                best[j] = (d(next, j), next);
            }
        }
    }
    let cut = edges
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .unwrap()
        .0;
    let mut label: Vec<usize> = (0..n).collect();
    fn find(l: &mut [usize], i: usize) -> usize {
        if l[i] != i {
            let r = find(l, l[i]);
            l[i] = r;
        }
        l[i]
    }
    for (k, &(_, a, b)) in edges.iter().enumerate() {
        if k != cut {
            let (ra, rb) = (find(&mut label, a), find(&mut label, b));
            label[ra] = rb;
        }
    }
    let root0 = find(&mut label, 0);
    (0..n).map(|i| usize::from(find(&mut label, i) != root0)).collect()
}

#[test]
fn gradient_matches_central_differences() {
    let data = cloud(20, 6, 1);
    let aff = joint_affinities(&data, 5.0).unwrap();
    let h = 1e-6;
    for iterate in 0..10u64 {
        let y = initial_layout(20, 1.0, 100 + iterate);
        let analytic = kl_gradient(&aff.p, &y, 1.0);
        let (mut err, mut norm) = (0.0f64, 0.0f64);
        for i in 0..y.len() {
            for d in 0..2 {
                let mut plus = y.clone();
                let mut minus = y.clone();
                plus[i][d] += h;
                minus[i][d] -= h;
                let fd = (kl_divergence(&aff.p, &plus) - kl_divergence(&aff.p, &minus)) / (2.0 * h);
                err += (fd - analytic[i][d]).powi(2);
                norm += fd * fd;
            }
        }
        assert!(err.sqrt() <= 1e-4 * norm.sqrt(), "iterate {}: {} vs {}", iterate, err.sqrt(), norm.sqrt());
    }
}

#[test]
fn conditional_perplexities_hit_target() {
    for (n, perplexity) in [(40, 5.0), (60, 10.0), (100, 30.0)] {
        let aff = joint_affinities(&cloud(n, 8, n as u64), perplexity).unwrap();
        for achieved in &aff.achieved_perplexity {
            assert!((achieved.log2() - f64::log2(perplexity)).abs() < 1e-3, "{} vs {}", achieved, perplexity);
        }
    }
}

#[test]
fn two_clusters_are_recovered() {
    let (points, labels) = two_clusters(20, 5, 0.1, 10.0, 3);
    let config = TsneConfig {
        perplexity: 10.0,
        ..TsneConfig::default()
    };
    let result = tsne(&points, &config).unwrap();
    let found = single_linkage_two(&result.embedding);
    let agree = found.iter().zip(&labels).filter(|(a, b)| a == b).count();
    let misassigned = agree.min(labels.len() - agree);
    assert_eq!(misassigned, 0);
}

#[test]
fn duplicates_embed_next_to_each_other() {
    let mut points = cloud(30, 6, 9);
    for i in 0..5 {
        points.push(points[i].clone());
    }
    let config = TsneConfig {
        perplexity: 5.0,
        ..TsneConfig::default()
    };
    let y = tsne(&points, &config).unwrap().embedding;
    let d = |a: usize, b: usize| (y[a][0] - y[b][0]).powi(2) + (y[a][1] - y[b][1]).powi(2);
    for i in 0..5 {
        let twin = 30 + i;
        let nearest = (0..y.len())
            .filter(|&j| j != twin)
            .min_by(|&a, &b| d(twin, a).total_cmp(&d(twin, b)))
            .unwrap();
        assert_eq!(nearest, i);
    }
}

#[test]
fn kl_decreases_after_exaggeration() {
    let config = TsneConfig {
        perplexity: 8.0,
        iterations: 500,
        ..TsneConfig::default()
    };
    let result = tsne(&cloud(50, 10, 2), &config).unwrap();
    let trace = &result.kl_trace;
    assert_eq!(trace.len(), 10);
    assert!(trace.last().unwrap().1 < trace[2].1);
}

#[test]
fn infeasible_perplexity_names_required_count() {
    let err = tsne(&cloud(3, 4, 0), &TsneConfig::default()).unwrap_err();
    assert!(matches!(err, Error::InfeasiblePerplexity { required: 92, points: 3, .. }));
    assert!(err.to_string().contains("92"));
}
