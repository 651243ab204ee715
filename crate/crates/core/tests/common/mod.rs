//! Reference implementations the library is checked against. Each one is
//! the plainest possible reading of its definition.
#![allow(dead_code)]

use echokit::knnseg::DistanceMetric;

/// Pair counts by visiting every pixel and every candidate partner.
pub fn naive_glcm(q: &[u8], w: usize, h: usize, m: usize, dx: i32, dy: i32, symmetric: bool) -> Vec<u64> {
    let mut counts = vec![0u64; m * m];
    for y in 0..h as i32 {
        for x in 0..w as i32 {
            let (x2, y2) = (x + dx, y + dy);
            if x2 < 0 || y2 < 0 || x2 >= w as i32 || y2 >= h as i32 {
                continue;
            }
            let a = q[(y * w as i32 + x) as usize] as usize;
            let b = q[(y2 * w as i32 + x2) as usize] as usize;
            counts[a * m + b] += 1;
            if symmetric {
                counts[b * m + a] += 1;
            }
        }
    }
    counts
}

/// (contrast, homogeneity, entropy normalized by log2(m²), local homogeneity).
pub fn oracle_features(probs: &[f64], m: usize) -> [f64; 4] {
    let mut out = [0.0; 4];
    for i in 0..m {
        for j in 0..m {
            let p = probs[i * m + j];
            let d = i as f64 - j as f64;
            out[0] += d * d * p;
            out[1] += p * p;
            if p > 0.0 {
                out[2] -= p * p.log2();
            }
            out[3] += p / (1.0 + d * d);
        }
    }
    out[2] /= ((m * m) as f64).log2();
    out
}

pub fn oracle_distance(a: &[f64], b: &[f64], metric: DistanceMetric) -> f64 {
    match metric {
        DistanceMetric::Euclidean => {
            let mut s = 0.0;
            for i in 0..a.len() {
                s += (a[i] - b[i]) * (a[i] - b[i]);
            }
            s.sqrt()
        }
        DistanceMetric::Minkowski(p) => {
            let mut s = 0.0;
            for i in 0..a.len() {
                s += (a[i] - b[i]).abs().powf(p);
            }
            s.powf(1.0 / p)
        }
        DistanceMetric::ChiSquare => {
            let mut s = 0.0;
            for i in 0..a.len() {
                s += (a[i] - b[i]) * (a[i] - b[i]) / (a[i] + b[i] + 1e-12);
            }
            s
        }
        DistanceMetric::Cosine => {
            if a == b {
                return 0.0;
            }
            let mut dot = 0.0;
            let mut na = 0.0;
            let mut nb = 0.0;
            for i in 0..a.len() {
                dot += a[i] * b[i];
                na += a[i] * a[i];
                nb += b[i] * b[i];
            }
            if na == 0.0 || nb == 0.0 {
                1.0
            } else {
                (1.0 - dot / (na.sqrt() * nb.sqrt())).max(0.0)
            }
        }
    }
}

/// Full scan, full sort, plain vote. Ties: lower index wins a distance tie;
/// a vote tie goes to the smaller mean distance, then the smaller class.
pub fn oracle_knn(train: &[(Vec<f64>, u8)], query: &[f64], k: usize, metric: DistanceMetric) -> u8 {
    let dim = query.len();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for (f, _) in train {
        for d in 0..dim {
            lo[d] = lo[d].min(f[d]);
            hi[d] = hi[d].max(f[d]);
        }
    }
    let scale = |v: &[f64]| -> Vec<f64> {
        (0..dim).map(|d| if hi[d] > lo[d] { ((v[d] - lo[d]) / (hi[d] - lo[d])).clamp(0.0, 1.0) } else { 0.0 }).collect()
    };
    let q = scale(query);
    let mut all: Vec<(f64, usize)> =
        train.iter().enumerate().map(|(i, (f, _))| (oracle_distance(&q, &scale(f), metric), i)).collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let classes = train.iter().map(|t| t.1).max().unwrap() as usize + 1;
    let mut votes = vec![0usize; classes];
    let mut sums = vec![0.0; classes];
    for &(d, i) in &all[..k] {
        votes[train[i].1 as usize] += 1;
        sums[train[i].1 as usize] += d;
    }
    let mut ranked: Vec<usize> = (0..classes).filter(|&c| votes[c] > 0).collect();
    ranked.sort_by(|&a, &b| {
        votes[b]
            .cmp(&votes[a])
            .then((sums[a] / votes[a] as f64).partial_cmp(&(sums[b] / votes[b] as f64)).unwrap())
            .then(a.cmp(&b))
    });
    ranked[0] as u8
}

/// `Γ(k + v) / (Γ(v) Γ(k + 1))` through log-gamma.
pub fn gamma_coefficient(v: f64, k: usize) -> f64 {
    use statrs::function::gamma::ln_gamma;
    (ln_gamma(k as f64 + v) - ln_gamma(v) - ln_gamma(k as f64 + 1.0)).exp()
}

pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs().max(f64::MIN_POSITIVE)).fold(0.0, f64::max)
}
