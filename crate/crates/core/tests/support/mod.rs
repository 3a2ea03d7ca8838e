//! Independent reference computations used by the integration tests and the
//! acceptance suite. Nothing here calls the library's decompositions; the
//! library is only used for types and seeded random draws.
#![allow(dead_code)]

use aircomp_core::linalg::ComplexMatrix;
use aircomp_core::random::complex_gaussian;
use num_complex::Complex64;
use rand::Rng;

pub type C64 = Complex64;

/// Modified Gram–Schmidt, run twice for stability.
pub fn gram_schmidt(m: &ComplexMatrix) -> ComplexMatrix {
    let mut q = m.clone();
    for _ in 0..2 {
        for j in 0..q.ncols() {
            for i in 0..j {
                let qi = q.column(i).into_owned();
                let proj = qi.dotc(&q.column(j));
                let mut cj = q.column_mut(j);
                cj -= qi * proj;
            }
            let n = q.column(j).norm();
            q.column_mut(j).unscale_mut(n);
        }
    }
    q
}

pub fn random_stiefel<R: Rng>(rng: &mut R, n: usize, m: usize) -> ComplexMatrix {
    gram_schmidt(&complex_gaussian(rng, n, m, 1.0))
}

/// `Σ_k ‖A^H H_k B_k − I‖_F² + σ² ‖A‖_F²`, entry by entry. Returns `(misalignment, total)`.
pub fn mse_by_loops(a: &ComplexMatrix, hs: &[ComplexMatrix], bs: &[ComplexMatrix], sigma2: f64) -> (f64, f64) {
    let (nr, l) = a.shape();
    let mut mis = 0.0;
    for (h, b) in hs.iter().zip(bs) {
        let nt = h.ncols();
        for i in 0..l {
            for j in 0..l {
                let mut acc = C64::new(0.0, 0.0);
                for r in 0..nr {
                    for t in 0..nt {
                        acc += a[(r, i)].conj() * h[(r, t)] * b[(t, j)];
                    }
                }
                if i == j {
                    acc -= 1.0;
                }
                mis += acc.norm_sqr();
            }
        }
    }
    let noise: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>() * sigma2;
    (mis, mis + noise)
}

/// `N_t × L` transmit matrix with power drawn uniformly in `(0, P0]`.
pub fn random_feasible_transmit<R: Rng>(rng: &mut R, nt: usize, l: usize, p0: f64) -> ComplexMatrix {
    let b = complex_gaussian(rng, nt, l, 1.0);
    let target = p0 * rng.random_range(1e-3..=1.0);
    let n = b.norm_squared();
    b.scale((target / n).sqrt())
}

fn trace_objective(g: &ComplexMatrix, f: &ComplexMatrix) -> f64 {
    (f.adjoint() * g * f).trace().re
}

/// Best `tr(F^H G F)` over `draws` random orthonormal `F`, then refined by
/// accept-if-better orthonormal perturbations of shrinking size.
pub fn centroid_search<R: Rng>(rng: &mut R, g: &ComplexMatrix, l: usize, draws: usize) -> f64 {
    let n = g.nrows();
    let mut best_f = random_stiefel(rng, n, l);
    let mut best = trace_objective(g, &best_f);
    for _ in 1..draws {
        let f = random_stiefel(rng, n, l);
        let v = trace_objective(g, &f);
        if v > best {
            best = v;
            best_f = f;
        }
    }
    let mut step = 0.3;
    while step > 1e-9 {
        let mut improved = false;
        for _ in 0..60 {
            let cand = gram_schmidt(&(&best_f + complex_gaussian(rng, n, l, step * step)));
            let v = trace_objective(g, &cand);
            if v > best {
                best = v;
                best_f = cand;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

/// Cosines of principal angles by deflated alternating projections: find
/// unit `u ∈ X`, `v ∈ Y` maximizing `|u^H v|`, then repeat inside the
/// orthogonal complements of the pairs already found.
pub fn principal_cosines_by_projection<R: Rng>(rng: &mut R, x: &ComplexMatrix, y: &ComplexMatrix) -> Vec<f64> {
    let m = x.ncols().min(y.ncols());
    let mut us: Vec<nalgebra::DVector<C64>> = Vec::new();
    let mut vs: Vec<nalgebra::DVector<C64>> = Vec::new();
    let project = |basis: &ComplexMatrix, found: &[nalgebra::DVector<C64>], w: &nalgebra::DVector<C64>| {
        let mut p = basis * (basis.adjoint() * w);
        for f in found {
            let c = f.dotc(&p);
            p -= f * c;
        }
        let n = p.norm();
        p.unscale(n)
    };
    let mut out = Vec::new();
    for _ in 0..m {
        let mut u = project(x, &us, &complex_gaussian(rng, x.nrows(), 1, 1.0).column(0).into_owned());
        let mut v = project(y, &vs, &u);
        let mut last = -1.0;
        for _ in 0..200_000 {
            v = project(y, &vs, &u);
            u = project(x, &us, &v);
            let c = u.dotc(&v).norm();
            if (c - last).abs() < 1e-16 {
                break;
            }
            last = c;
        }
        out.push(u.dotc(&v).norm().min(1.0));
        us.push(u);
        vs.push(v);
    }
    out
}

/// Minimum `‖w‖²` subject to `|a_k^H w|² ≥ 1` for unit-target channels in
/// `C^3`, by a grid over directions followed by local refinement.
///
/// Directions `d = (cos α, sin α cos β e^{iφ1}, sin α sin β e^{iφ2})` cover
/// the unit sphere of `C^3` modulo a global phase; the required power for
/// direction `d` is `1 / min_k |a_k^H d|²`.
pub fn multicast_grid_oracle(channels: &[nalgebra::DVector<C64>], grid: usize) -> f64 {
    use std::f64::consts::{FRAC_PI_2, TAU};
    assert!(channels.iter().all(|h| h.len() == 3));
    let power = |p: [f64; 4]| {
        let [a, b, f1, f2] = p;
        let d = [
            C64::new(a.cos(), 0.0),
            C64::from_polar(a.sin() * b.cos(), f1),
            C64::from_polar(a.sin() * b.sin(), f2),
        ];
        let weakest = channels
            .iter()
            .map(|h| (0..3).map(|i| h[i].conj() * d[i]).sum::<C64>().norm_sqr())
            .fold(f64::INFINITY, f64::min);
        1.0 / weakest
    };
    let ang = |i: usize, n: usize, span: f64| span * i as f64 / (n - 1) as f64;
    let phases = 2 * grid;
    let mut points: Vec<(f64, [f64; 4])> = Vec::with_capacity(grid * grid * phases * phases);
    for i in 0..grid {
        for j in 0..grid {
            for p in 0..phases {
                for q in 0..phases {
                    let x = [
                        ang(i, grid, FRAC_PI_2),
                        ang(j, grid, FRAC_PI_2),
                        TAU * p as f64 / phases as f64,
                        TAU * q as f64 / phases as f64,
                    ];
                    points.push((power(x), x));
                }
            }
        }
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    // The objective is a pointwise max, so coordinate moves alone stall on
    // its ridges; search along random directions from the best grid points.
    let mut rng = aircomp_core::random::stream_rng(0x0AC1E, 0);
    let mut best = f64::INFINITY;
    for &(start, x0) in points.iter().take(20) {
        let (mut val, mut x) = (start, x0);
        let mut step = FRAC_PI_2 / grid as f64;
        while step > 1e-12 {
            let mut improved = false;
            for _ in 0..40 {
                let dir: [f64; 4] = std::array::from_fn(|_| rng.sample::<f64, _>(rand_distr::StandardNormal));
                let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
                let y: [f64; 4] = std::array::from_fn(|c| x[c] + step * dir[c] / norm);
                let v = power(y);
                if v < val {
                    val = v;
                    x = y;
                    improved = true;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best = best.min(val);
    }
    best
}

/// Relative-error helper.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
