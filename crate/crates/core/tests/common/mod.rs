//! Brute-force reference implementations used by the integration tests.
//! Each one follows the textbook definition directly and shares no code
//! path with the library routine it checks.

#![allow(dead_code)]

use corneal_core::curvefit::Point2;
use corneal_core::hmm::HmmParams;
use corneal_core::imgprep::ScalarGrid;
use corneal_core::Label;
use rand::Rng;
use std::collections::BTreeMap;

/// Least-squares line by Cramer's rule on the 2×2 normal equations.
pub fn line_oracle(p: &[Point2]) -> (f64, f64) {
    let n = p.len() as f64;
    let sx: f64 = p.iter().map(|q| q.x).sum();
    let sy: f64 = p.iter().map(|q| q.y).sum();
    let sxx: f64 = p.iter().map(|q| q.x * q.x).sum();
    let sxy: f64 = p.iter().map(|q| q.x * q.y).sum();
    let det = n * sxx - sx * sx;
    let a = (n * sxy - sx * sy) / det;
    let b = (sxx * sy - sx * sxy) / det;
    (a, b)
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Least-squares quadratic `(a, b, c)` by Cramer's rule on the 3×3 normal
/// equations.
pub fn quad_oracle(p: &[Point2]) -> (f64, f64, f64) {
    let s = |k: i32| p.iter().map(|q| q.x.powi(k)).sum::<f64>();
    let t = |k: i32| p.iter().map(|q| q.x.powi(k) * q.y).sum::<f64>();
    let m = [[s(4), s(3), s(2)], [s(3), s(2), s(1)], [s(2), s(1), s(0)]];
    let r = [t(2), t(1), t(0)];
    let d = det3(m);
    let col = |j: usize| {
        let mut mm = m;
        for i in 0..3 {
            mm[i][j] = r[i];
        }
        det3(mm) / d
    };
    (col(0), col(1), col(2))
}

pub fn residual_oracle(f: impl Fn(f64) -> f64, p: &[Point2]) -> f64 {
    let mut acc = 0.0;
    for q in p {
        let e = q.y - f(q.x);
        acc += e * e;
    }
    acc
}

/// Naive O(N²)-per-output 2-D DFT energies `|X(u, v)|²`, row-major over
/// `(u, v)` with `u` the row frequency.
pub fn naive_dft_energy(g: &ScalarGrid, subtract_mean: bool) -> Vec<f64> {
    let (w, h) = (g.width(), g.height());
    let mean = if subtract_mean {
        g.values().iter().sum::<f64>() / (w * h) as f64
    } else {
        0.0
    };
    let mut out = vec![0.0; w * h];
    for u in 0..h {
        for v in 0..w {
            let (mut re, mut im) = (0.0, 0.0);
            for y in 0..h {
                for x in 0..w {
                    let phase = -2.0
                        * std::f64::consts::PI
                        * ((u * y) as f64 / h as f64 + (v * x) as f64 / w as f64);
                    let val = g.get(x, y) - mean;
                    re += val * phase.cos();
                    im += val * phase.sin();
                }
            }
            out[u * w + v] = re * re + im * im;
        }
    }
    out
}

/// Pearson correlation of the left half against the mirrored right half,
/// two-pass, collecting the halves into explicit vectors first.
pub fn mirror_pearson_oracle(g: &ScalarGrid) -> f64 {
    let half = g.width() / 2;
    let mut left = Vec::new();
    let mut right = Vec::new();
    for y in 0..g.height() {
        for j in 0..half {
            left.push(g.get(j, y));
            right.push(g.get(g.width() - 1 - j, y));
        }
    }
    let n = left.len() as f64;
    let ml = left.iter().sum::<f64>() / n;
    let mr = right.iter().sum::<f64>() / n;
    let cov: f64 = left.iter().zip(&right).map(|(a, b)| (a - ml) * (b - mr)).sum();
    let vl: f64 = left.iter().map(|a| (a - ml).powi(2)).sum();
    let vr: f64 = right.iter().map(|b| (b - mr).powi(2)).sum();
    if vl == 0.0 || vr == 0.0 {
        0.0
    } else {
        cov / (vl * vr).sqrt()
    }
}

/// Enumerates every state path. Returns `(Σ_paths P, best path, best log P)`.
/// The path score is accumulated left to right in log space and ties keep
/// the first path in lexicographic order.
pub fn hmm_enumerate(m: &HmmParams, obs: &[usize]) -> (f64, Vec<usize>, f64) {
    let n = m.n_states;
    let t_len = obs.len();
    let total_paths = n.pow(t_len as u32);
    let mut total = 0.0;
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    let mut path = vec![0usize; t_len];
    for code in 0..total_paths {
        let mut c = code;
        for t in (0..t_len).rev() {
            path[t] = c % n;
            c /= n;
        }
        let mut p = m.pi[path[0]] * m.b[path[0]][obs[0]];
        let mut lp = m.pi[path[0]].ln() + m.b[path[0]][obs[0]].ln();
        for t in 1..t_len {
            p *= m.a[path[t - 1]][path[t]] * m.b[path[t]][obs[t]];
            lp = lp + m.a[path[t - 1]][path[t]].ln() + m.b[path[t]][obs[t]].ln();
        }
        total += p;
        if lp > best.1 {
            best = (path.clone(), lp);
        }
    }
    (total, best.0, best.1)
}

pub fn path_log_score(m: &HmmParams, obs: &[usize], path: &[usize]) -> f64 {
    let mut lp = m.pi[path[0]].ln() + m.b[path[0]][obs[0]].ln();
    for t in 1..obs.len() {
        lp = lp + m.a[path[t - 1]][path[t]].ln() + m.b[path[t]][obs[t]].ln();
    }
    lp
}

/// Random dense model whose entries are all strictly positive.
pub fn random_model<R: Rng>(n: usize, m: usize, rng: &mut R) -> HmmParams {
    HmmParams::random(n, m, rng)
}

/// Reference KNN decision: standardise with two-pass population statistics
/// (dropping constant dimensions), fully sort all distances with index
/// tie-break and apply the vote/threshold rules. Returns `None` on reject.
pub fn knn_oracle(
    train: &[(Vec<f64>, Label)],
    query: &[f64],
    k: usize,
    reject_distance: Option<f64>,
) -> Option<Label> {
    let d = query.len();
    let n = train.len() as f64;
    let mut kept = Vec::new();
    for j in 0..d {
        let mean = train.iter().map(|(x, _)| x[j]).sum::<f64>() / n;
        let var = train.iter().map(|(x, _)| (x[j] - mean).powi(2)).sum::<f64>() / n;
        if var > 0.0 {
            kept.push((j, mean, var.sqrt()));
        }
    }
    let z = |x: &[f64]| -> Vec<f64> { kept.iter().map(|&(j, m, s)| (x[j] - m) / s).collect() };
    let q = z(query);
    let mut all: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, (x, _))| {
            let zx = z(x);
            (zx.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i)
        })
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let nearest = &all[..k];
    if let Some(r) = reject_distance {
        if nearest[k - 1].0.sqrt() > r {
            return None;
        }
    }
    let mut votes: BTreeMap<Label, usize> = BTreeMap::new();
    for &(_, i) in nearest {
        *votes.entry(train[i].1).or_default() += 1;
    }
    let top = *votes.values().max().unwrap();
    let leaders: Vec<_> = votes.iter().filter(|(_, &v)| v == top).collect();
    if leaders.len() == 1 {
        Some(*leaders[0].0)
    } else {
        None
    }
}
