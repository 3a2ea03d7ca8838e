//! Single-group multicast beamforming
//! `min ‖w‖²  s.t.  |h_k^H w|² ≥ γ_k σ_k²`,
//! which has the same form as the single-antenna AirComp receive problem.
//!
//! Two solvers: the one-shot weighted centroid (principal eigenvector of
//! `Σ h̃_k h̃_k^H`, then scaled to feasibility) and semidefinite relaxation
//! solved by ADMM followed by Gaussian randomization.

use std::io::{BufRead, Write};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{herm_eig, psd_project, real, trace_re, ComplexMatrix};
use crate::random::{cn, stream_rng};

pub type ComplexVector = DVector<Complex64>;

#[derive(Debug, Clone, PartialEq)]
pub struct MulticastInstance {
    channels: Vec<ComplexVector>,
    targets: Vec<f64>,
    noise: Vec<f64>,
}

impl MulticastInstance {
    pub fn new(channels: Vec<ComplexVector>, targets: Vec<f64>, noise: Vec<f64>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidInput("instance needs at least one receiver".into()));
        }
        if targets.len() != channels.len() || noise.len() != channels.len() {
            return Err(Error::Dimension(format!(
                "{} channels, {} SNR targets, {} noise variances",
                channels.len(),
                targets.len(),
                noise.len()
            )));
        }
        let n = channels[0].len();
        if n == 0 {
            return Err(Error::Dimension("channels have length zero".into()));
        }
        for (k, h) in channels.iter().enumerate() {
            if h.len() != n {
                return Err(Error::Dimension(format!(
                    "channel {k} has length {}, expected {n}",
                    h.len()
                )));
            }
            if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidInput(format!("channel {k} has non-finite entries")));
            }
            if !(targets[k] > 0.0 && targets[k].is_finite() && noise[k] > 0.0 && noise[k].is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "receiver {k}: target {} and noise variance {} must be positive and finite",
                    targets[k], noise[k]
                )));
            }
        }
        Ok(Self {
            channels,
            targets,
            noise,
        })
    }

    /// Instance with `γ_k σ_k² = 1` for every receiver.
    pub fn unit(channels: Vec<ComplexVector>) -> Result<Self> {
        let k = channels.len();
        Self::new(channels, vec![1.0; k], vec![1.0; k])
    }

    pub fn k(&self) -> usize {
        self.channels.len()
    }

    pub fn n(&self) -> usize {
        self.channels[0].len()
    }

    pub fn channels(&self) -> &[ComplexVector] {
        &self.channels
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn noise(&self) -> &[f64] {
        &self.noise
    }

    /// `h̃_k = h_k / sqrt(γ_k σ_k²)`, turning every constraint into `|h̃_k^H w|² ≥ 1`.
    pub fn normalized_channels(&self) -> Vec<ComplexVector> {
        self.channels
            .iter()
            .zip(self.targets.iter().zip(&self.noise))
            .map(|(h, (g, s))| h.unscale((g * s).sqrt()))
            .collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            channels: self.channels.iter().map(|h| h.scale(c)).collect(),
            ..self.clone()
        }
    }

    /// `min_k |h_k^H w|² / (γ_k σ_k²)`; at least 1 for a feasible `w`.
    pub fn margin(&self, w: &ComplexVector) -> f64 {
        self.normalized_channels()
            .iter()
            .map(|a| a.dotc(w).norm_sqr())
            .fold(f64::INFINITY, f64::min)
    }

    /// Header `k,re_0,im_0,…,gamma,sigma2`, then one row per receiver.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = String::from("k");
        for i in 0..self.n() {
            header.push_str(&format!(",re_{i},im_{i}"));
        }
        writeln!(w, "{header},gamma,sigma2")?;
        for (k, h) in self.channels.iter().enumerate() {
            let mut line = k.to_string();
            for z in h.iter() {
                line.push_str(&format!(",{:e},{:e}", z.re, z.im));
            }
            writeln!(w, "{line},{:e},{:e}", self.targets[k], self.noise[k])?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty multicast fixture".into()))?
            .map_err(|e| Error::Format(e.to_string()))?;
        let columns = header.trim().split(',').count();
        if columns < 5 || (columns - 3) % 2 != 0 || !header.starts_with("k,") {
            return Err(Error::Format(format!("bad multicast header `{header}`")));
        }
        let n = (columns - 3) / 2;
        let (mut channels, mut targets, mut noise) = (Vec::new(), Vec::new(), Vec::new());
        for (row, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Format(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != columns {
                return Err(Error::Format(format!(
                    "row {row}: {} fields, expected {columns}",
                    fields.len()
                )));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("row {row}: `{s}`: {e}")))
            };
            let h: Vec<Complex64> = (0..n)
                .map(|i| Ok(Complex64::new(num(fields[1 + 2 * i])?, num(fields[2 + 2 * i])?)))
                .collect::<Result<_>>()?;
            channels.push(ComplexVector::from_vec(h));
            targets.push(num(fields[columns - 2])?);
            noise.push(num(fields[columns - 1])?);
        }
        Self::new(channels, targets, noise)
    }
}

/// The single-antenna AirComp problem as a multicast instance (`γ_k σ_k² = 1`).
pub fn duality_instance(cs: &ChannelSet) -> Result<MulticastInstance> {
    if cs.nt() != 1 {
        return Err(Error::Dimension(format!(
            "the multicast form needs single-antenna sensors, got N_t = {}",
            cs.nt()
        )));
    }
    MulticastInstance::unit(cs.channels().iter().map(|h| h.column(0).into_owned()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MulticastSolver {
    Centroid,
    Sdr,
}

impl MulticastSolver {
    pub fn tag(self) -> &'static str {
        match self {
            MulticastSolver::Centroid => "centroid",
            MulticastSolver::Sdr => "sdr",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MulticastSolution {
    pub w: ComplexVector,
    pub power: f64,
    pub margin: f64,
    pub solver: MulticastSolver,
    pub wall_time: Duration,
    /// `tr(W)` of the relaxed SDP (SDR only).
    pub relaxation: Option<f64>,
}

/// Scales `d` so that the weakest normalized constraint is met with equality.
fn scale_to_feasible(normalized: &[ComplexVector], d: &ComplexVector) -> Option<ComplexVector> {
    let weakest = normalized
        .iter()
        .map(|a| a.dotc(d).norm_sqr())
        .fold(f64::INFINITY, f64::min);
    (weakest > 1e-300 && weakest.is_finite()).then(|| d.unscale(weakest.sqrt()))
}

fn gram_of(vs: &[ComplexVector]) -> ComplexMatrix {
    let n = vs[0].len();
    let mut g = ComplexMatrix::zeros(n, n);
    for v in vs {
        g.gerc(real(1.0), v, v, real(1.0));
    }
    g
}

/// Makes the first component with modulus above `1e-12·‖v‖` real-positive.
fn normalize_phase(v: &mut ComplexVector) {
    let scale = v.norm();
    if let Some(z) = v.iter().copied().find(|z| z.norm() > 1e-12 * scale) {
        let p = z.conj() / z.norm();
        for x in v.iter_mut() {
            *x *= p;
        }
    }
}

/// One-shot centroid solution: principal eigenvector of `Σ h̃_k h̃_k^H`.
///
/// When the leading eigenvalue is tied, the sum of the phase-normalized
/// `h̃_k` projected onto the tied eigenspace is used as the direction.
pub fn solve_centroid_multicast(inst: &MulticastInstance) -> Result<MulticastSolution> {
    let start = Instant::now();
    let normalized = inst.normalized_channels();
    if normalized.iter().all(|a| a.norm() == 0.0) {
        return Err(Error::DegenerateInstance("all channels are zero".into()));
    }
    let g = gram_of(&normalized);
    let eig = herm_eig(&g)?;
    let mut tied = 1;
    while tied < eig.eigenvalues.len() && eig.near_ties.contains(&(tied - 1)) {
        tied += 1;
    }
    let mut direction = eig.eigenvectors.column(0).into_owned();
    if tied > 1 {
        let basis = eig.eigenvectors.columns(0, tied);
        let mut pooled = ComplexVector::zeros(inst.n());
        for a in &normalized {
            let mut a = a.clone();
            normalize_phase(&mut a);
            pooled += a;
        }
        let projected = &basis * (basis.adjoint() * pooled);
        if projected.norm() > 1e-12 {
            direction = projected.normalize();
        }
    }
    let w = scale_to_feasible(&normalized, &direction)
        .ok_or_else(|| Error::DegenerateInstance("centroid direction is orthogonal to a receiver channel".into()))?;
    let wall_time = start.elapsed();
    Ok(MulticastSolution {
        power: w.norm_squared(),
        margin: inst.margin(&w),
        w,
        solver: MulticastSolver::Centroid,
        wall_time,
        relaxation: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdrConfig {
    pub max_iter: usize,
    /// Stop when both primal and dual residuals fall below this.
    pub tol: f64,
    /// Initial ADMM penalty.
    pub rho: f64,
    pub randomizations: usize,
    pub seed: u64,
}

impl Default for SdrConfig {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            tol: 1e-7,
            rho: 1.0,
            randomizations: 200,
            seed: 0,
        }
    }
}

/// Final ADMM iterate for the relaxed problem.
#[derive(Debug, Clone)]
pub struct SdpState {
    /// PSD iterate.
    pub w: ComplexMatrix,
    /// Scaled dual of the consensus constraint `X = W`.
    pub dual: ComplexMatrix,
    /// Slack `s_k = h̃_k^H X h̃_k ≥ 1` and its scaled dual.
    pub slack: Vec<f64>,
    pub slack_dual: Vec<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub rho: f64,
}

impl SdpState {
    pub fn relaxation(&self) -> f64 {
        trace_re(&self.w)
    }
}

const BALANCE_RATIO: f64 = 10.0;
const BALANCE_FACTOR: f64 = 2.0;
const BALANCE_EVERY: usize = 20;

/// `a^H X a` for every `a`.
fn apply_constraints(normalized: &[ComplexVector], x: &ComplexMatrix) -> Vec<f64> {
    normalized.iter().map(|a| a.dotc(&(x * a)).re).collect()
}

/// `Σ y_k a_k a_k^H`.
fn adjoint_constraints(normalized: &[ComplexVector], y: &[f64]) -> ComplexMatrix {
    let n = normalized[0].len();
    let mut m = ComplexMatrix::zeros(n, n);
    for (a, &c) in normalized.iter().zip(y) {
        m.gerc(real(c), a, a, real(1.0));
    }
    m
}

/// ADMM on `min tr(X)  s.t.  h̃_k^H X h̃_k ≥ 1, X ⪰ 0`.
///
/// Splitting: `X` free, `W` PSD, slack `s ≥ 1`, with consensus `X = W` and
/// `A(X) = s`. The `X`-update is a linear solve with `I + A*A`, reduced to a
/// `K × K` system `(I + [|h̃_j^H h̃_k|²])` that does not depend on the penalty.
/// The penalty is adapted by residual balancing.
pub fn admm_relaxation(inst: &MulticastInstance, cfg: &SdrConfig) -> Result<SdpState> {
    if !(cfg.rho > 0.0 && cfg.tol > 0.0) || cfg.max_iter == 0 {
        return Err(Error::InvalidInput(format!("bad ADMM configuration {cfg:?}")));
    }
    let mut a = inst.normalized_channels();
    if a.iter().any(|v| v.norm() == 0.0) {
        return Err(Error::DegenerateInstance("a receiver has an all-zero channel".into()));
    }
    // Solve for W' = c·W with channels scaled to unit mean squared norm; this
    // keeps the residual tolerance independent of the channel scale.
    let c = a.iter().map(|v| v.norm_squared()).sum::<f64>() / a.len() as f64;
    for v in a.iter_mut() {
        v.unscale_mut(c.sqrt());
    }
    let n = inst.n();
    let k = inst.k();
    let mut system = DMatrix::<f64>::identity(k, k);
    for i in 0..k {
        for j in 0..k {
            system[(i, j)] += a[i].dotc(&a[j]).norm_sqr();
        }
    }
    let chol = system
        .cholesky()
        .ok_or_else(|| Error::DegenerateInstance("constraint system is not positive definite".into()))?;

    let eye = ComplexMatrix::identity(n, n);
    let mut rho = cfg.rho;
    let mut w = ComplexMatrix::zeros(n, n);
    let mut u = ComplexMatrix::zeros(n, n);
    let mut s = vec![1.0; k];
    let mut v = vec![0.0; k];
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);

    for iter in 1..=cfg.max_iter {
        // X-update
        let target: Vec<f64> = s.iter().zip(&v).map(|(s, v)| s - v).collect();
        let rhs = &w - &u + adjoint_constraints(&a, &target) - eye.scale(1.0 / rho);
        let coeffs = chol.solve(&DVector::from_vec(apply_constraints(&a, &rhs)));
        let mut x = rhs - adjoint_constraints(&a, coeffs.as_slice());
        x = (&x + x.adjoint()).scale(0.5);

        // W- and s-updates
        let w_old = std::mem::replace(&mut w, psd_project(&(&x + &u))?);
        let ax = apply_constraints(&a, &x);
        let s_old = std::mem::replace(&mut s, ax.iter().zip(&v).map(|(ax, v)| (ax + v).max(1.0)).collect());

        // dual updates
        u += &x - &w;
        for i in 0..k {
            v[i] += ax[i] - s[i];
        }

        let consensus = (&x - &w).norm_squared();
        let slack_gap: f64 = ax.iter().zip(&s).map(|(a, s)| (a - s).powi(2)).sum();
        primal = (consensus + slack_gap).sqrt();
        let ds: Vec<f64> = s.iter().zip(&s_old).map(|(a, b)| a - b).collect();
        dual = rho * (&w - &w_old + adjoint_constraints(&a, &ds)).norm();

        if primal < cfg.tol && dual < cfg.tol {
            return Ok(SdpState {
                w: w.unscale(c),
                dual: u.scale(rho),
                slack: s,
                slack_dual: v.iter().map(|x| x * rho).collect(),
                primal_residual: primal,
                dual_residual: dual,
                iterations: iter,
                rho,
            });
        }

        if iter % BALANCE_EVERY != 0 {
            continue;
        }
        if primal > BALANCE_RATIO * dual {
            rho *= BALANCE_FACTOR;
            u.unscale_mut(BALANCE_FACTOR);
            v.iter_mut().for_each(|x| *x /= BALANCE_FACTOR);
        } else if dual > BALANCE_RATIO * primal {
            rho /= BALANCE_FACTOR;
            u.scale_mut(BALANCE_FACTOR);
            v.iter_mut().for_each(|x| *x *= BALANCE_FACTOR);
        }
    }
    Err(Error::Convergence {
        iterations: cfg.max_iter,
        primal,
        dual,
    })
}

/// SDR: relaxed SDP by ADMM, then Gaussian randomization `ξ = V Λ^{1/2} r`
/// with `r ~ CN(0, I)`, each draw scaled to feasibility. The principal
/// eigenvector of `W` is included as a candidate. The cheapest feasible
/// candidate is returned.
pub fn solve_sdr(inst: &MulticastInstance, cfg: &SdrConfig) -> Result<MulticastSolution> {
    let start = Instant::now();
    let state = admm_relaxation(inst, cfg)?;
    let normalized = inst.normalized_channels();
    let eig = herm_eig(&state.w)?;
    let n = inst.n();
    let factor = ComplexMatrix::from_fn(n, n, |i, j| {
        eig.eigenvectors[(i, j)] * eig.eigenvalues[j].max(0.0).sqrt()
    });

    let mut best = scale_to_feasible(&normalized, &eig.eigenvectors.column(0).into_owned());
    let mut best_power = best.as_ref().map_or(f64::INFINITY, |w| w.norm_squared());
    let mut rng = stream_rng(cfg.seed, 0x5D2);
    let mut r = ComplexVector::zeros(n);
    for _ in 0..cfg.randomizations {
        for z in r.iter_mut() {
            *z = cn(&mut rng, 1.0);
        }
        if let Some(w) = scale_to_feasible(&normalized, &(&factor * &r)) {
            let p = w.norm_squared();
            if p < best_power {
                best_power = p;
                best = Some(w);
            }
        }
    }
    let w = best.ok_or_else(|| Error::DegenerateInstance("no randomization draw was feasible".into()))?;
    let wall_time = start.elapsed();
    Ok(MulticastSolution {
        power: best_power,
        margin: inst.margin(&w),
        w,
        solver: MulticastSolver::Sdr,
        wall_time,
        relaxation: Some(state.relaxation()),
    })
}

#[derive(Debug, Clone)]
pub struct SolverComparison {
    pub centroid: MulticastSolution,
    pub sdr: MulticastSolution,
    pub relaxation: f64,
    /// `power_centroid / power_sdr`.
    pub power_ratio: f64,
    /// `min(power_centroid, power_sdr) − tr(W)`.
    pub relaxation_gap: f64,
    /// `time_sdr / time_centroid`.
    pub time_ratio: f64,
}

pub fn compare_solvers(inst: &MulticastInstance, cfg: &SdrConfig) -> Result<SolverComparison> {
    let centroid = solve_centroid_multicast(inst)?;
    let sdr = solve_sdr(inst, cfg)?;
    let relaxation = sdr.relaxation.unwrap_or(f64::NAN);
    Ok(SolverComparison {
        power_ratio: centroid.power / sdr.power,
        relaxation_gap: centroid.power.min(sdr.power) - relaxation,
        time_ratio: sdr.wall_time.as_secs_f64() / centroid.wall_time.as_secs_f64().max(1e-9),
        relaxation,
        centroid,
        sdr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::complex_gaussian;

    fn e(n: usize, i: usize) -> ComplexVector {
        let mut v = ComplexVector::zeros(n);
        v[i] = real(1.0);
        v
    }

    fn random_instance(seed: u64, n: usize, k: usize) -> MulticastInstance {
        let mut rng = stream_rng(seed, 0);
        MulticastInstance::unit(
            (0..k)
                .map(|_| complex_gaussian(&mut rng, n, 1, 1.0).column(0).into_owned())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn duality_instance_shapes() {
        let cs = ChannelSet::new(vec![ComplexMatrix::from_element(3, 1, real(1.0))]).unwrap();
        let inst = duality_instance(&cs).unwrap();
        assert_eq!(inst.k(), 1);
        assert!(inst.targets().iter().zip(inst.noise()).all(|(g, s)| g * s == 1.0));
        let cs = ChannelSet::new(vec![ComplexMatrix::identity(3, 2)]).unwrap();
        assert!(matches!(duality_instance(&cs), Err(Error::Dimension(_))));
    }

    #[test]
    fn centroid_single_receiver() {
        let inst = MulticastInstance::unit(vec![e(3, 0)]).unwrap();
        let sol = solve_centroid_multicast(&inst).unwrap();
        assert!((sol.power - 1.0).abs() < 1e-12);
        assert!((&sol.w - e(3, 0)).norm() < 1e-12);
    }

    #[test]
    fn centroid_two_orthonormal_receivers() {
        let inst = MulticastInstance::unit(vec![e(3, 0), e(3, 1)]).unwrap();
        let sol = solve_centroid_multicast(&inst).unwrap();
        assert!((sol.power - 2.0).abs() < 1e-9);
        assert!(sol.margin >= 1.0 - 1e-9);
    }

    #[test]
    fn centroid_rejects_zero_channels() {
        let inst = MulticastInstance::unit(vec![ComplexVector::zeros(2)]).unwrap();
        assert!(matches!(
            solve_centroid_multicast(&inst),
            Err(Error::DegenerateInstance(_))
        ));
    }

    #[test]
    fn sdr_single_receiver_is_exact() {
        let inst = MulticastInstance::unit(vec![e(3, 0)]).unwrap();
        let sol = solve_sdr(&inst, &SdrConfig::default()).unwrap();
        assert!((sol.relaxation.unwrap() - 1.0).abs() < 1e-6);
        assert!((sol.power - 1.0).abs() < 1e-6);
        assert!((sol.w[0].norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn relaxation_lower_bounds_both_solvers() {
        for seed in 0..5 {
            let inst = random_instance(seed, 6, 10);
            let c = compare_solvers(&inst, &SdrConfig::default()).unwrap();
            assert!(c.centroid.margin >= 1.0 - 1e-9 && c.sdr.margin >= 1.0 - 1e-9);
            assert!(c.relaxation <= c.centroid.power.min(c.sdr.power) + 1e-6);
        }
    }

    #[test]
    fn homogeneity() {
        let inst = random_instance(11, 4, 6);
        let cfg = SdrConfig::default();
        let a = compare_solvers(&inst, &cfg).unwrap();
        let b = compare_solvers(&inst.scaled(2.0), &cfg).unwrap();
        assert!((b.centroid.power * 4.0 / a.centroid.power - 1.0).abs() < 1e-9);
        assert!((b.sdr.power * 4.0 / a.sdr.power - 1.0).abs() < 1e-4);
    }

    #[test]
    fn general_targets_are_prescaled() {
        let inst = MulticastInstance::new(vec![e(2, 0)], vec![4.0], vec![0.5]).unwrap();
        let sol = solve_centroid_multicast(&inst).unwrap();
        assert!((sol.power - 2.0).abs() < 1e-12);
        assert!((sol.margin - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fixture_round_trip() {
        let inst = MulticastInstance::new(
            vec![
                ComplexVector::from_vec(vec![Complex64::new(0.5, -1.25), Complex64::new(3.0, 1e-17)]),
                e(2, 1),
            ],
            vec![2.0, 1.0],
            vec![0.1, 1.0],
        )
        .unwrap();
        let mut buf = Vec::new();
        inst.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("k,re_0,im_0,re_1,im_1,gamma,sigma2\n"));
        assert_eq!(MulticastInstance::read_csv(&buf[..]).unwrap(), inst);
        assert!(MulticastInstance::read_csv(&b"k,re_0\n"[..]).is_err());
    }
}
