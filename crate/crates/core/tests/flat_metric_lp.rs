//! The network simplex against a generic LP solve of the same flow problem.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ks_core::flat_metric::FlatMetric;

fn stencil(d: usize) -> Vec<Vec<i64>> {
    let r: i64 = if d == 2 { 2 } else { 1 };
    let mut out = Vec::new();
    let mut o = vec![-r; d];
    loop {
        let first = o.iter().find(|&&x| x != 0).copied();
        let max = o.iter().map(|x| x.abs()).max().unwrap();
        let sum_sq: i64 = o.iter().map(|x| x * x).sum();
        // 16 neighbours in 2D: |o|_inf = 1 or knight moves
        let keep = first.is_some_and(|f| f > 0) && (max == 1 || (d == 2 && sum_sq == 5));
        if keep {
            out.push(o.clone());
        }
        let mut k = 0;
        while k < d {
            o[k] += 1;
            if o[k] <= r {
                break;
            }
            o[k] = -r;
            k += 1;
        }
        if k == d {
            return out;
        }
    }
}

fn lp_distance(d: usize, side: usize, cell: f64, a: &[f64], b: &[f64]) -> f64 {
    let cells = side.pow(d as u32);
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let mut flow_terms: Vec<Vec<(microlp::Variable, f64)>> = vec![Vec::new(); cells + 1];
    let arc = |p: &mut Problem, from: usize, to: usize, cost: f64, terms: &mut Vec<Vec<(microlp::Variable, f64)>>| {
        let v = p.add_var(cost, (0.0, f64::INFINITY));
        terms[from].push((v, 1.0));
        terms[to].push((v, -1.0));
    };
    let offsets = stencil(d);
    for flat in 0..cells {
        let mut idx = vec![0i64; d];
        let mut rem = flat;
        for k in (0..d).rev() {
            idx[k] = (rem % side) as i64;
            rem /= side;
        }
        for o in &offsets {
            let mut other = 0usize;
            let mut inside = true;
            for k in 0..d {
                let j = idx[k] + o[k];
                if j < 0 || j >= side as i64 {
                    inside = false;
                    break;
                }
                other = other * side + j as usize;
            }
            if inside {
                let len = cell * (o.iter().map(|&x| (x * x) as f64).sum::<f64>()).sqrt();
                arc(&mut p, flat, other, len, &mut flow_terms);
                arc(&mut p, other, flat, len, &mut flow_terms);
            }
        }
        arc(&mut p, flat, cells, 1.0, &mut flow_terms);
        arc(&mut p, cells, flat, 1.0, &mut flow_terms);
    }
    let net: f64 = a.iter().zip(b).map(|(x, y)| x - y).sum();
    for (node, terms) in flow_terms.into_iter().enumerate() {
        let supply = if node < cells { a[node] - b[node] } else { -net };
        p.add_constraint(terms, ComparisonOp::Eq, supply);
    }
    p.solve().unwrap().objective()
}

fn random_masses(rng: &mut ChaCha8Rng, cells: usize, total: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..cells).map(|_| if rng.random_bool(0.4) { rng.random::<f64>() } else { 0.0 }).collect();
    let s: f64 = v.iter().sum::<f64>().max(1e-12);
    v.iter_mut().for_each(|x| *x *= total / s);
    v
}

#[test]
fn matches_lp_in_two_dimensions() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (side, cell) in [(4usize, 0.5), (5, 0.3), (6, 0.15)] {
        let fm = FlatMetric::new(2, side, cell).unwrap();
        for _ in 0..4 {
            let (ta, tb) = (rng.random_range(0.5..1.5), rng.random_range(0.5..1.5));
            let a = random_masses(&mut rng, side * side, ta);
            let b = random_masses(&mut rng, side * side, tb);
            let ours = fm.distance(&a, &b).unwrap();
            let lp = lp_distance(2, side, cell, &a, &b);
            assert!((ours.value - lp).abs() <= 1e-8 * (1.0 + lp), "side {side}: {} vs {lp}", ours.value);
            assert!(ours.gap.abs() <= 1e-8 * (1.0 + lp));
        }
    }
}

#[test]
fn matches_lp_in_three_dimensions() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let (side, cell) = (3usize, 0.4);
    let fm = FlatMetric::new(3, side, cell).unwrap();
    for _ in 0..4 {
        let a = random_masses(&mut rng, 27, 1.0);
        let b = random_masses(&mut rng, 27, 0.7);
        let ours = fm.distance(&a, &b).unwrap().value;
        let lp = lp_distance(3, side, cell, &a, &b);
        assert!((ours - lp).abs() <= 1e-8 * (1.0 + lp), "{ours} vs {lp}");
    }
}

#[test]
fn stencil_sizes() {
    assert_eq!(stencil(2).len(), 8);
    assert_eq!(stencil(3).len(), 13);
}
