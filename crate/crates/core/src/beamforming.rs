//! Multi-function AirComp beamforming.
//!
//! The receive beamformer is `A = √η·F` with `F^H F = I`. Given `F`, the
//! zero-forcing transmit beamformers `B_k = (A^H H_k)^H (A^H H_k H_k^H A)^{-1}`
//! null the misalignment term of the MSE, and the denoising factor
//! `η = max_k (1/P0)·tr((F^H H_k H_k^H F)^{-1})` is the smallest value that
//! keeps every sensor within its power budget. `F` itself is either the
//! weighted Grassmannian centroid (top-`L` eigenvectors of the effective CSI)
//! or one of two baselines built from the sum channel.

use std::fmt;

use num_complex::Complex64;

use crate::channel::{channel_eigenspace, effective_csi, sum_channel, ChannelSet, EffectiveCsi};
use crate::error::{Error, Result};
use crate::grassmann::{dist_p2, Subspace};
use crate::linalg::{
    compact_svd, min_eigenvalue, principal_subspace, real, trace_re, ComplexMatrix, HermitianSolver, PrincipalSubspace,
    DEFAULT_RANK_TOL,
};
use crate::random::{cn, mix_seed, stream_rng};

/// How the normalized receive beamformer was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReceiveMethod {
    Centroid,
    AntennaSelection,
    Eigenmode,
}

impl ReceiveMethod {
    pub const ALL: [ReceiveMethod; 3] = [
        ReceiveMethod::Centroid,
        ReceiveMethod::AntennaSelection,
        ReceiveMethod::Eigenmode,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ReceiveMethod::Centroid => "centroid",
            ReceiveMethod::AntennaSelection => "antenna-selection",
            ReceiveMethod::Eigenmode => "eigenmode",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.tag() == tag)
    }
}

impl fmt::Display for ReceiveMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone)]
pub struct ReceiveBeamformer {
    /// `N_r × L`, orthonormal columns.
    pub f: ComplexMatrix,
    /// Denoising factor.
    pub eta: f64,
    pub method: ReceiveMethod,
}

impl ReceiveBeamformer {
    /// `A = √η·F`.
    pub fn a(&self) -> ComplexMatrix {
        self.f.scale(self.eta.sqrt())
    }

    pub fn l(&self) -> usize {
        self.f.ncols()
    }
}

#[derive(Debug, Clone)]
pub struct TransmitBeamformerSet {
    /// One `N_t × L` matrix per sensor.
    pub beamformers: Vec<ComplexMatrix>,
    pub power_budget: f64,
}

impl TransmitBeamformerSet {
    /// `‖B_k‖_F²` for every sensor.
    pub fn powers(&self) -> Vec<f64> {
        self.beamformers.iter().map(|b| b.norm_squared()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct AircompDesign {
    pub receive: ReceiveBeamformer,
    pub transmit: TransmitBeamformerSet,
    pub noise_variance: f64,
    /// Set when the receive subspace came from a tied eigenvalue pair
    /// (`λ_L ≈ λ_{L+1}`); any basis of the tied space attains the same objective.
    pub degenerate: bool,
}

impl AircompDesign {
    /// `max_k ‖A^H H_k B_k − I‖_max`, zero for an exact zero-forcing design.
    pub fn zf_residual(&self, cs: &ChannelSet) -> f64 {
        let a = self.receive.a();
        let eye = ComplexMatrix::identity(self.receive.l(), self.receive.l());
        cs.channels()
            .iter()
            .zip(&self.transmit.beamformers)
            .map(|(h, b)| (a.adjoint() * h * b - &eye).camax())
            .fold(0.0, f64::max)
    }
}

/// Zero-forcing transmit beamformer for receive matrix `A` and channel `H`.
pub fn zf_transmit(a: &ComplexMatrix, h: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.nrows() != h.nrows() {
        return Err(Error::Dimension(format!(
            "receive beamformer has {} rows, channel has {}",
            a.nrows(),
            h.nrows()
        )));
    }
    let equalized = a.adjoint() * h;
    let gram = &equalized * equalized.adjoint();
    let solver = HermitianSolver::new(&gram)?;
    Ok(solver.solve(&equalized).adjoint())
}

/// The weighted Grassmannian centroid: the `L` principal eigenvectors of `G`.
pub fn centroid_receive(csi: &EffectiveCsi, l: usize) -> Result<PrincipalSubspace> {
    principal_subspace(&csi.g, l)
}

/// Per-sensor feedback value `(1/P0)·tr((F^H H H^H F)^{-1})`.
pub fn feedback_value(f: &ComplexMatrix, h: &ComplexMatrix, p0: f64) -> Result<f64> {
    if f.nrows() != h.nrows() {
        return Err(Error::Dimension(format!(
            "beamformer has {} rows, channel has {}",
            f.nrows(),
            h.nrows()
        )));
    }
    if !(p0 > 0.0) {
        return Err(Error::InvalidInput(format!("power budget {p0} must be positive")));
    }
    let equalized = f.adjoint() * h;
    let gram = &equalized * equalized.adjoint();
    let solver = HermitianSolver::new(&gram).map_err(|e| match e {
        Error::NonInvertible { condition, .. } => Error::DegenerateChannel {
            sensor: 0,
            reason: format!("equalized Gram matrix is singular (condition {condition:e})"),
        },
        other => other,
    })?;
    Ok(solver.inverse_trace() / p0)
}

/// `η* = max_k` of the feedback values.
pub fn denoising_factor(f: &ComplexMatrix, cs: &ChannelSet, p0: f64) -> Result<f64> {
    let mut eta = f64::NEG_INFINITY;
    for (k, h) in cs.channels().iter().enumerate() {
        eta = eta.max(feedback_value(f, h, p0).map_err(|e| e.at_sensor(k))?);
    }
    Ok(eta)
}

/// Completes a design around a given normalized receive beamformer.
pub fn design_with_receiver(
    cs: &ChannelSet,
    f: ComplexMatrix,
    method: ReceiveMethod,
    p0: f64,
    noise_variance: f64,
) -> Result<AircompDesign> {
    if !(noise_variance >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "noise variance {noise_variance} is negative"
        )));
    }
    let eta = denoising_factor(&f, cs, p0)?;
    let receive = ReceiveBeamformer { f, eta, method };
    let a = receive.a();
    let beamformers = cs
        .channels()
        .iter()
        .enumerate()
        .map(|(k, h)| zf_transmit(&a, h).map_err(|e| e.at_sensor(k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(AircompDesign {
        receive,
        transmit: TransmitBeamformerSet {
            beamformers,
            power_budget: p0,
        },
        noise_variance,
        degenerate: false,
    })
}

fn check_streams(cs: &ChannelSet, l: usize) -> Result<()> {
    let limit = cs.nt().min(cs.nr());
    if l == 0 || l > limit {
        return Err(Error::Dimension(format!(
            "L={l} functions need 1 <= L <= min(N_t, N_r) = {limit}"
        )));
    }
    Ok(())
}

/// Centroid receive beamformer, closed-form denoising factor and ZF transmit beamformers.
pub fn design_full(cs: &ChannelSet, l: usize, p0: f64, noise_variance: f64) -> Result<AircompDesign> {
    check_streams(cs, l)?;
    let csi = effective_csi(cs, l)?;
    let centroid = centroid_receive(&csi, l)?;
    let degenerate = centroid.is_degenerate();
    let mut design = design_with_receiver(cs, centroid.basis, ReceiveMethod::Centroid, p0, noise_variance)?;
    design.degenerate = degenerate;
    Ok(design)
}

/// Design with the receive beamformer chosen by `method`.
pub fn design(cs: &ChannelSet, l: usize, method: ReceiveMethod, p0: f64, noise_variance: f64) -> Result<AircompDesign> {
    match method {
        ReceiveMethod::Centroid => design_full(cs, l, p0, noise_variance),
        ReceiveMethod::AntennaSelection => {
            check_streams(cs, l)?;
            let f = baseline_antenna_selection(cs, l)?;
            design_with_receiver(cs, f, method, p0, noise_variance)
        }
        ReceiveMethod::Eigenmode => {
            check_streams(cs, l)?;
            let f = baseline_eigenmode(cs, l)?;
            design_with_receiver(cs, f, method, p0, noise_variance)
        }
    }
}

/// Selects the `L` receive antennas whose rows of `H_sum` have the largest
/// norms (lowest index wins ties). Columns are in ascending antenna order.
pub fn baseline_antenna_selection(cs: &ChannelSet, l: usize) -> Result<ComplexMatrix> {
    if l == 0 || l > cs.nr() {
        return Err(Error::Dimension(format!("cannot select {l} of {} antennas", cs.nr())));
    }
    let hsum = sum_channel(cs);
    let norms: Vec<f64> = (0..hsum.nrows()).map(|i| hsum.row(i).norm()).collect();
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let mut picked = order[..l].to_vec();
    picked.sort_unstable();
    let mut f = ComplexMatrix::zeros(cs.nr(), l);
    for (j, &i) in picked.iter().enumerate() {
        f[(i, j)] = real(1.0);
    }
    Ok(f)
}

/// The `L` dominant left singular vectors of `H_sum`.
pub fn baseline_eigenmode(cs: &ChannelSet, l: usize) -> Result<ComplexMatrix> {
    let hsum = sum_channel(cs);
    if l == 0 || l > hsum.nrows().min(hsum.ncols()) {
        return Err(Error::Dimension(format!(
            "L={l} exceeds the dimensions of the {}x{} sum channel",
            hsum.nrows(),
            hsum.ncols()
        )));
    }
    let svd = compact_svd(&hsum, DEFAULT_RANK_TOL)?;
    if svd.rank < l {
        return Err(Error::DegenerateSumChannel(format!("rank {} below L={l}", svd.rank)));
    }
    Ok(svd.u.columns(0, l).into_owned())
}

/// `σ_n²·η·L`: the MSE once zero forcing removes the misalignment term.
pub fn mse_analytic(design: &AircompDesign) -> f64 {
    design.noise_variance * design.receive.eta * design.receive.l() as f64
}

/// Direct evaluation of
/// `Σ_k tr((A^H H_k B_k − I)(A^H H_k B_k − I)^H) + σ_n² tr(A^H A)`.
/// Returns `(misalignment term, total)`.
pub fn mse_direct(
    a: &ComplexMatrix,
    beamformers: &[ComplexMatrix],
    cs: &ChannelSet,
    noise_variance: f64,
) -> (f64, f64) {
    let l = a.ncols();
    let eye = ComplexMatrix::identity(l, l);
    let misalignment: f64 = cs
        .channels()
        .iter()
        .zip(beamformers)
        .map(|(h, b)| {
            let d = a.adjoint() * h * b - &eye;
            trace_re(&(&d * d.adjoint()))
        })
        .sum();
    let noise = noise_variance * trace_re(&(a.adjoint() * a));
    (misalignment, misalignment + noise)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseReport {
    pub analytic: f64,
    pub empirical: f64,
    pub standard_error: f64,
    pub trials: usize,
}

const MC_BLOCK: usize = 4096;

/// Monte-Carlo MSE: unit-variance `CN(0, I)` symbols and `CN(0, σ_n² I)`
/// noise pushed through `ŝ = A^H Σ_k H_k B_k s_k + A^H n`.
///
/// Trials are drawn in blocks of 4096, block `b` from stream `b` of a seed
/// derived from `seed`.
pub fn mse_monte_carlo(design: &AircompDesign, cs: &ChannelSet, trials: usize, seed: u64) -> Result<MseReport> {
    if trials == 0 {
        return Err(Error::InvalidInput("Monte-Carlo needs at least one trial".into()));
    }
    if cs.k() != design.transmit.beamformers.len() {
        return Err(Error::Dimension(format!(
            "design has {} transmit beamformers for {} sensors",
            design.transmit.beamformers.len(),
            cs.k()
        )));
    }
    let a = design.receive.a();
    let ah = a.adjoint();
    let l = design.receive.l();
    let nr = cs.nr();
    let effective: Vec<ComplexMatrix> = cs
        .channels()
        .iter()
        .zip(&design.transmit.beamformers)
        .map(|(h, b)| &ah * h * b)
        .collect();
    let sigma2 = design.noise_variance;
    let base = mix_seed(seed, 0x4D43);

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut s_hat = nalgebra::DVector::<Complex64>::zeros(l);
    let mut s_sum = nalgebra::DVector::<Complex64>::zeros(l);
    let mut s_k = nalgebra::DVector::<Complex64>::zeros(l);
    let mut noise = nalgebra::DVector::<Complex64>::zeros(nr);
    let mut done = 0;
    let mut block = 0u64;
    while done < trials {
        let mut rng = stream_rng(base, block);
        let n = MC_BLOCK.min(trials - done);
        for _ in 0..n {
            s_hat.fill(real(0.0));
            s_sum.fill(real(0.0));
            for m in &effective {
                for z in s_k.iter_mut() {
                    *z = cn(&mut rng, 1.0);
                }
                s_hat.gemv(real(1.0), m, &s_k, real(1.0));
                s_sum += &s_k;
            }
            for z in noise.iter_mut() {
                *z = cn(&mut rng, sigma2);
            }
            s_hat.gemv(real(1.0), &ah, &noise, real(1.0));
            let err = (&s_hat - &s_sum).norm_squared();
            sum += err;
            sum_sq += err * err;
        }
        done += n;
        block += 1;
    }
    let t = trials as f64;
    let mean = sum / t;
    let standard_error = if trials > 1 {
        ((sum_sq - t * mean * mean).max(0.0) / (t - 1.0) / t).sqrt()
    } else {
        0.0
    };
    Ok(MseReport {
        analytic: mse_analytic(design),
        empirical: mean,
        standard_error,
        trials,
    })
}

/// Both sides of `tr((F^H H H^H F)^{-1}) ≤ L / (σ_L²·λ_min(U^H F F^H U))`.
/// A side is `+∞` when its inner matrix is singular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceBoundGap {
    pub lhs: f64,
    pub rhs: f64,
}

impl TraceBoundGap {
    pub fn is_degenerate(&self) -> bool {
        self.lhs.is_infinite() || self.rhs.is_infinite()
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol
    }
}

/// Evaluates the trace bound for `F` (`N_r × L`) and one channel, using the
/// channel's `L` dominant singular triplets.
pub fn trace_bound_gap(f: &ComplexMatrix, h: &ComplexMatrix) -> Result<TraceBoundGap> {
    let l = f.ncols();
    let eig = channel_eigenspace(h, l)?;
    let equalized = f.adjoint() * h;
    let gram = &equalized * equalized.adjoint();
    let lhs = match HermitianSolver::new(&gram) {
        Ok(s) => s.inverse_trace(),
        Err(Error::NonInvertible { .. }) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let cross = eig.u.adjoint() * f;
    let align = min_eigenvalue(&(&cross * cross.adjoint()))?;
    let rhs = if align > 1e-14 {
        l as f64 / (eig.weight() * align)
    } else {
        f64::INFINITY
    };
    Ok(TraceBoundGap { lhs, rhs })
}

/// The three expressions around the min-max objective
/// `max_k σ_{k,L}²·(d_P2²(U_k, F) − 1)`, with `c = Σ_k σ_{k,L}²`:
/// `lower = (1/K)Σ σ²d² − c/K`, `middle` = the objective, `upper = Σ σ²d² − c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveBounds {
    pub lower: f64,
    pub middle: f64,
    pub upper: f64,
}

pub fn objective_bounds(f: &ComplexMatrix, cs: &ChannelSet, l: usize) -> Result<ObjectiveBounds> {
    let fs = Subspace::new(f.clone())?;
    if fs.dim() != l {
        return Err(Error::Dimension(format!("F has {} columns, expected L={l}", fs.dim())));
    }
    let csi = effective_csi(cs, l)?;
    let k = cs.k() as f64;
    let mut weighted = 0.0;
    let mut c = 0.0;
    let mut middle = f64::NEG_INFINITY;
    for (w, u) in csi.weights.iter().zip(&csi.bases) {
        let d = dist_p2(u, &fs)?;
        let d2 = d * d;
        weighted += w * d2;
        c += w;
        middle = middle.max(w * (d2 - 1.0));
    }
    Ok(ObjectiveBounds {
        lower: weighted / k - c / k,
        middle,
        upper: weighted - c,
    })
}
