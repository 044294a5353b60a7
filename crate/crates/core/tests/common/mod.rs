#![allow(dead_code)]

//! Independent reference implementations used as test oracles.

use pel::geometry::{Point, Polygon};
use rand::Rng;

/// Andrew's monotone chain; returns CCW hull without collinear points.
pub fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

pub fn shoelace(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum::<f64>()
        .abs()
        / 2.0
}

/// Half-plane test against every CCW edge.
pub fn inside_convex(pts: &[(f64, f64)], x: f64, y: f64) -> bool {
    let n = pts.len();
    (0..n).all(|i| {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0) >= 0.0
    })
}

pub fn coords(p: &Polygon) -> Vec<(f64, f64)> {
    p.vertices().iter().map(|v| (v.x, v.y)).collect()
}

/// Convex polygon from the hull of 3..=max_pts random points in a box of
/// side `size` around `center`; retries until the hull is non-degenerate.
pub fn random_convex(rng: &mut impl Rng, center: (f64, f64), size: f64, max_pts: usize) -> Polygon {
    loop {
        let n = rng.random_range(3..=max_pts);
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                (
                    center.0 + rng.random_range(-size / 2.0..size / 2.0),
                    center.1 + rng.random_range(-size / 2.0..size / 2.0),
                )
            })
            .collect();
        let hull = convex_hull(pts);
        if hull.len() >= 3 && shoelace(&hull) > 1e-3 * size * size {
            if let Ok(p) = Polygon::new(hull.iter().map(|&(x, y)| Point::new(x, y)).collect()) {
                return p;
            }
        }
    }
}

/// A pair that overlaps often but not always.
pub fn random_pair(rng: &mut impl Rng) -> (Polygon, Polygon) {
    let sa = rng.random_range(1.0..4.0);
    let a = random_convex(rng, (0.0, 0.0), sa, 8);
    let c = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    let sb = rng.random_range(1.0..4.0);
    let b = random_convex(rng, c, sb, 8);
    (a, b)
}

/// Monte-Carlo IoU: the intersection area is estimated by uniform samples
/// in the overlap of the two bounding boxes; the polygon areas are exact.
pub fn mc_iou(a: &Polygon, b: &Polygon, samples: usize, rng: &mut impl Rng) -> f64 {
    let (pa, pb) = (coords(a), coords(b));
    let bx = |p: &[(f64, f64)]| {
        p.iter().fold((f64::MAX, f64::MAX, f64::MIN, f64::MIN), |m, &(x, y)| (m.0.min(x), m.1.min(y), m.2.max(x), m.3.max(y)))
    };
    let (ba, bb) = (bx(&pa), bx(&pb));
    let (x0, y0, x1, y1) = (ba.0.max(bb.0), ba.1.max(bb.1), ba.2.min(bb.2), ba.3.min(bb.3));
    if x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    let mut hits = 0usize;
    for _ in 0..samples {
        let x = rng.random_range(x0..x1);
        let y = rng.random_range(y0..y1);
        if inside_convex(&pa, x, y) && inside_convex(&pb, x, y) {
            hits += 1;
        }
    }
    let inter = hits as f64 / samples as f64 * (x1 - x0) * (y1 - y0);
    inter / (shoelace(&pa) + shoelace(&pb) - inter)
}

/// The labeling rule written out directly: a model is positive when its
/// score equals the maximum and the maximum is positive.
pub fn label_rule(f: &[f64]) -> Vec<u8> {
    let mut best = f64::NEG_INFINITY;
    for &v in f {
        if v > best {
            best = v;
        }
    }
    f.iter().map(|&v| u8::from(best > 0.0 && (best - v).abs() <= 1e-9)).collect()
}

pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
    Polygon::from_coords(&[[x0, y0], [x1, y0], [x1, y1], [x0, y1]]).unwrap()
}

/// Largest relative disagreement between backprop and central differences
/// over every parameter, for one random (net, batch, targets, betas)
/// instance on a `dims` MLP. Relative error uses `max(|a|, |n|, 1e-6)` as
/// the denominator so that vanishing gradients compare absolutely.
pub fn gradient_check(seed: u64, dims: &[usize], batch: usize) -> f64 {
    use pel::selector::train::batch_loss_with;
    use pel::selector::SelectorNet;
    use rand::SeedableRng;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut net = SelectorNet::init(dims, &mut rng).unwrap();
    for b in net.params_mut() {
        // Perturb biases and weights alike so no unit sits exactly at a kink.
        *b += rng.random_range(-0.1..0.1);
    }
    let (d, k) = (dims[0], *dims.last().unwrap());
    let xs: Vec<Vec<f64>> = (0..batch).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let ts: Vec<Vec<u8>> = (0..batch).map(|_| (0..k).map(|_| u8::from(rng.random_bool(0.4))).collect()).collect();
    let betas: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..0.95)).collect();
    let xr: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let tr: Vec<&[u8]> = ts.iter().map(Vec::as_slice).collect();
    let all = |l: &[f64]| (0..l.len()).collect::<Vec<_>>();
    let loss_at = |n: &SelectorNet| batch_loss_with(n, &xr, &tr, &betas, all).unwrap().loss;

    let analytic: Vec<f64> = batch_loss_with(&net, &xr, &tr, &betas, all).unwrap().grad.params().copied().collect();
    // Hidden-unit signs; a step that flips one crosses a kink of the loss.
    let pattern = |n: &SelectorNet| -> Vec<bool> {
        xs.iter()
            .flat_map(|x| {
                let c = n.forward_cached(x).unwrap();
                let pre = c.pre_activations();
                pre[..pre.len() - 1].iter().flatten().map(|&z| z > 0.0).collect::<Vec<_>>()
            })
            .collect()
    };
    let base = pattern(&net);
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = *net.params().nth(i).unwrap();
        let mut h = 3e-5;
        let (up, down) = loop {
            *net.params_mut().nth(i).unwrap() = orig + h;
            let (up, pu) = (loss_at(&net), pattern(&net));
            *net.params_mut().nth(i).unwrap() = orig - h;
            let (down, pd) = (loss_at(&net), pattern(&net));
            *net.params_mut().nth(i).unwrap() = orig;
            if (pu == base && pd == base) || h < 1e-9 {
                break (up, down);
            }
            h /= 10.0;
        };
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
    }
    worst
}
