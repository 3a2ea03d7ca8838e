//! Acquiring the receive beamformer at the access point over the air.
//!
//! Phase one: every sensor sends `X_k = σ_{k,L}²·V_k Σ_k^{-1} U_k^H` through
//! its reciprocal channel; the superposition `Y = Σ H_k X_k` equals the
//! effective CSI `G`, whose principal eigenvectors are the centroid `F`.
//!
//! Phase two: the denoising factor is the maximum of the per-sensor feedback
//! values. Over `M` rounds each sensor one-hot encodes its quantized value on
//! `N_t` parallel channels; the largest occupied index of the summed signal
//! locates the maximum, and the quantization range shrinks by `N_t` per round.

use std::io::Write;

use rand::Rng;

use crate::beamforming::{denoising_factor, design_full, feedback_value};
use crate::channel::{channel_eigenspace, ChannelSet};
use crate::error::{Error, Result};
use crate::grassmann::{dist_pf, Subspace};
use crate::linalg::{
    hermitian_defect, is_hermitian, principal_subspace, ComplexMatrix, PrincipalSubspace, HERMITIAN_TOL,
};
use crate::random::complex_gaussian;

/// `X = σ_L²·V Σ^{-1} U^H` from the `L` dominant singular triplets of `h`,
/// so that `h·X = σ_L²·U U^H`.
pub fn build_feedback_signal(h: &ComplexMatrix, l: usize) -> Result<ComplexMatrix> {
    let eig = channel_eigenspace(h, l)?;
    let w = eig.weight();
    let mut vs = eig.v.clone();
    for (j, s) in eig.singular_values.iter().enumerate() {
        vs.column_mut(j).unscale_mut(*s);
    }
    Ok((vs * eig.u.adjoint()).scale(w))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackSignalSet {
    /// One `N_t × N_r` matrix per sensor.
    pub signals: Vec<ComplexMatrix>,
}

impl FeedbackSignalSet {
    pub fn build(cs: &ChannelSet, l: usize) -> Result<Self> {
        let signals = cs
            .channels()
            .iter()
            .enumerate()
            .map(|(k, h)| build_feedback_signal(h, l).map_err(|e| e.at_sensor(k)))
            .collect::<Result<_>>()?;
        Ok(Self { signals })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            signals: self.signals.iter().map(|x| x.scale(c)).collect(),
        }
    }
}

fn check_signal_shapes(signals: &FeedbackSignalSet, cs: &ChannelSet) -> Result<()> {
    if signals.signals.len() != cs.k() {
        return Err(Error::Dimension(format!(
            "{} feedback signals for {} sensors",
            signals.signals.len(),
            cs.k()
        )));
    }
    for (k, x) in signals.signals.iter().enumerate() {
        if x.shape() != (cs.nt(), cs.nr()) {
            return Err(Error::Dimension(format!(
                "signal {k} is {}x{}, expected {}x{}",
                x.nrows(),
                x.ncols(),
                cs.nt(),
                cs.nr()
            )));
        }
    }
    Ok(())
}

/// Noiseless superposition `Y = Σ H_k X_k`.
pub fn aggregate_feedback(signals: &FeedbackSignalSet, cs: &ChannelSet) -> Result<ComplexMatrix> {
    check_signal_shapes(signals, cs)?;
    let mut y = ComplexMatrix::zeros(cs.nr(), cs.nr());
    for (h, x) in cs.channels().iter().zip(&signals.signals) {
        y += h * x;
    }
    Ok(y)
}

/// Superposition with additive `CN(0, variance)` receiver noise on every entry.
pub fn aggregate_feedback_noisy<R: Rng + ?Sized>(
    signals: &FeedbackSignalSet,
    cs: &ChannelSet,
    variance: f64,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    let y = aggregate_feedback(signals, cs)?;
    Ok(y + complex_gaussian(rng, cs.nr(), cs.nr(), variance))
}

/// `F = [U_Y]_{:, 1:L}`. A received matrix that is not Hermitian cannot be a
/// superposition of the designed signals and is rejected.
pub fn recover_beamformer(y: &ComplexMatrix, l: usize) -> Result<PrincipalSubspace> {
    if !y.is_square() {
        return Err(Error::ProtocolCorruption(format!(
            "aggregate is {}x{}, not square",
            y.nrows(),
            y.ncols()
        )));
    }
    if !is_hermitian(y, HERMITIAN_TOL) {
        let defect = hermitian_defect(y);
        return Err(Error::ProtocolCorruption(format!(
            "aggregate is not Hermitian (defect {defect:e})"
        )));
    }
    principal_subspace(y, l)
}

/// `η_k = (1/P0)·tr((F^H H_k H_k^H F)^{-1})`, the value sensor `k` feeds back.
pub fn local_feedback_value(f: &ComplexMatrix, h: &ComplexMatrix, p0: f64) -> Result<f64> {
    feedback_value(f, h, p0)
}

/// Uniform midpoint codebook `q_m = lo + (m − ½)Δ`, `m = 1..=n`, `Δ = (hi − lo)/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerCodebook {
    pub lo: f64,
    pub hi: f64,
    pub levels: usize,
}

impl QuantizerCodebook {
    pub fn new(lo: f64, hi: f64, levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidInput(format!(
                "codebook needs at least 2 levels, got {levels}"
            )));
        }
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidInput(format!("bad quantization range [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi, levels })
    }

    pub fn delta(&self) -> f64 {
        (self.hi - self.lo) / self.levels as f64
    }

    /// Codeword `m` (1-based).
    pub fn value(&self, m: usize) -> f64 {
        self.lo + (m as f64 - 0.5) * self.delta()
    }

    pub fn values(&self) -> Vec<f64> {
        (1..=self.levels).map(|m| self.value(m)).collect()
    }

    /// Index of the nearest codeword; a value exactly between two codewords
    /// goes to the lower one. Values outside the range map to the end codewords.
    pub fn quantize(&self, x: f64) -> usize {
        let t = ((x - self.lo) / self.delta()).ceil();
        (t.max(1.0) as usize).min(self.levels)
    }

    /// The cell `[q_m − Δ/2, q_m + Δ/2]` of codeword `m`.
    pub fn cell(&self, m: usize) -> (f64, f64) {
        let d = self.delta();
        (self.lo + (m - 1) as f64 * d, self.lo + m as f64 * d)
    }
}

/// Length-`n` vector with a single 1 at 1-based position `m`.
pub fn one_hot(m: usize, n: usize) -> Vec<u32> {
    let mut e = vec![0; n];
    e[m - 1] = 1;
    e
}

/// One round of the maximum-tracking protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub lo: f64,
    pub hi: f64,
    /// Codebook index chosen by every sensor (1-based).
    pub indices: Vec<usize>,
    /// Sum of the one-hot vectors; entries above 1 are collisions.
    pub mac_sum: Vec<u32>,
    /// Largest index with a nonzero MAC entry.
    pub l_max: usize,
}

#[derive(Debug, Clone)]
pub struct DenoisingFeedbackState {
    values: Vec<f64>,
    clamped: Vec<usize>,
    levels: usize,
    initial: (f64, f64),
    codebook: QuantizerCodebook,
    transcript: Vec<RoundRecord>,
}

impl DenoisingFeedbackState {
    /// Values outside `[lo, hi]` are clamped into it; their sensors are listed in [`Self::clamped`].
    pub fn new(values: &[f64], levels: usize, lo: f64, hi: f64) -> Result<Self> {
        let codebook = QuantizerCodebook::new(lo, hi, levels)?;
        if values.is_empty() {
            return Err(Error::InvalidInput("no feedback values".into()));
        }
        let mut clamped = Vec::new();
        let mut kept = Vec::with_capacity(values.len());
        for (k, &v) in values.iter().enumerate() {
            if v.is_nan() {
                return Err(Error::InvalidInput(format!("feedback value of sensor {k} is NaN")));
            }
            if v < lo || v > hi {
                clamped.push(k);
            }
            kept.push(v.clamp(lo, hi));
        }
        Ok(Self {
            values: kept,
            clamped,
            levels,
            initial: (lo, hi),
            codebook,
            transcript: Vec::new(),
        })
    }

    pub fn round(&self) -> usize {
        self.transcript.len()
    }

    /// Current quantization range.
    pub fn range(&self) -> (f64, f64) {
        (self.codebook.lo, self.codebook.hi)
    }

    pub fn codebook(&self) -> &QuantizerCodebook {
        &self.codebook
    }

    pub fn clamped(&self) -> &[usize] {
        &self.clamped
    }

    /// Clamped values as quantized by the sensors.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn transcript(&self) -> &[RoundRecord] {
        &self.transcript
    }

    /// Quantize, superpose the one-hot vectors, locate `ℓ_max` and refine the range to its cell.
    pub fn step(&mut self) -> &RoundRecord {
        let cb = self.codebook;
        let indices: Vec<usize> = self.values.iter().map(|&v| cb.quantize(v)).collect();
        let mut mac_sum = vec![0u32; self.levels];
        for &m in &indices {
            for (acc, e) in mac_sum.iter_mut().zip(one_hot(m, self.levels)) {
                *acc += e;
            }
        }
        let l_max = mac_sum.iter().rposition(|&c| c > 0).expect("at least one sensor") + 1;
        let (lo, hi) = cb.cell(l_max);
        self.codebook = QuantizerCodebook { lo, hi, ..cb };
        self.transcript.push(RoundRecord {
            round: self.transcript.len() + 1,
            lo: cb.lo,
            hi: cb.hi,
            indices,
            mac_sum,
            l_max,
        });
        self.transcript.last().expect("just pushed")
    }

    /// The codeword selected in the last round (center of the current range).
    pub fn estimate(&self) -> Option<f64> {
        self.transcript
            .last()
            .map(|_| 0.5 * (self.codebook.lo + self.codebook.hi))
    }

    /// `(hi − lo)/2 · N_t^{−n}` after `n` rounds.
    pub fn error_bound(&self) -> f64 {
        rounds_error_bound(self.initial.0, self.initial.1, self.levels, self.round())
    }

    /// See [`write_transcript_rows`].
    pub fn write_transcript_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_transcript_rows(w, &self.transcript)
    }
}

/// `round,lo,hi,indices,mac_sum,l_max`; list fields are `;`-separated.
pub fn write_transcript_rows<W: Write>(mut w: W, transcript: &[RoundRecord]) -> std::io::Result<()> {
    writeln!(w, "round,lo,hi,indices,mac_sum,l_max")?;
    for r in transcript {
        let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(";");
        writeln!(
            w,
            "{},{:e},{:e},{},{},{}",
            r.round,
            r.lo,
            r.hi,
            join(&mut r.indices.iter().map(|x| x.to_string())),
            join(&mut r.mac_sum.iter().map(|x| x.to_string())),
            r.l_max
        )?;
    }
    Ok(())
}

fn rounds_error_bound(lo: f64, hi: f64, levels: usize, rounds: usize) -> f64 {
    (hi - lo) / 2.0 * (levels as f64).powi(-(rounds as i32))
}

#[derive(Debug, Clone)]
pub struct DenoisingOutcome {
    pub estimate: f64,
    /// Maximum of the clamped values.
    pub true_max: f64,
    pub rounds: usize,
    pub bound: f64,
    pub clamped: Vec<usize>,
    pub state: DenoisingFeedbackState,
}

/// Runs `rounds` rounds of the maximum-tracking protocol over `levels` parallel channels.
pub fn run_denoising_feedback(
    values: &[f64],
    levels: usize,
    lo: f64,
    hi: f64,
    rounds: usize,
) -> Result<DenoisingOutcome> {
    if rounds == 0 {
        return Err(Error::InvalidInput("the protocol needs at least one round".into()));
    }
    let mut state = DenoisingFeedbackState::new(values, levels, lo, hi)?;
    for _ in 0..rounds {
        state.step();
    }
    let true_max = state.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DenoisingOutcome {
        estimate: state.estimate().expect("rounds >= 1"),
        true_max,
        rounds,
        bound: state.error_bound(),
        clamped: state.clamped().to_vec(),
        state,
    })
}

/// Fewest rounds with `(hi − lo)/2 · N_t^{−M} ≤ ε_max`, never below one.
pub fn required_rounds(eps_max: f64, levels: usize, lo: f64, hi: f64) -> Result<usize> {
    if !(eps_max > 0.0) || levels < 2 || !(lo < hi) {
        return Err(Error::InvalidInput(format!(
            "need eps > 0, N_t >= 2, lo < hi; got eps={eps_max}, N_t={levels}, [{lo}, {hi}]"
        )));
    }
    let x = ((hi - lo).log2() - (2.0 * eps_max).log2()) / (levels as f64).log2();
    Ok(((x - 1e-9).ceil().max(1.0)) as usize)
}

/// `(N_r + M, K·N_t)`: slots used by over-the-air feedback and by orthogonal per-sensor feedback.
pub fn overhead_compare(k: usize, nt: usize, nr: usize, m: usize) -> (usize, usize) {
    (nr + m, k * nt)
}

#[derive(Debug, Clone)]
pub struct FeedbackReport {
    pub eta_estimate: f64,
    pub eta_exact: f64,
    pub rounds: usize,
    pub bound: f64,
    pub slots_aircomp: usize,
    pub slots_conventional: usize,
    /// Projection F-distance between the recovered and the directly computed beamformer.
    pub subspace_distance: f64,
    /// `‖Y − G‖_F / ‖G‖_F`.
    pub aggregate_error: f64,
    pub clamped: Vec<usize>,
    pub transcript: Vec<RoundRecord>,
}

impl FeedbackReport {
    pub fn eta_error(&self) -> f64 {
        (self.eta_estimate - self.eta_exact).abs()
    }
}

/// Both feedback phases against a directly computed design. Feedback values
/// use the recovered beamformer and `levels = N_t` parallel channels.
pub fn run_feedback_protocol(
    cs: &ChannelSet,
    l: usize,
    p0: f64,
    lo: f64,
    hi: f64,
    rounds: usize,
) -> Result<FeedbackReport> {
    let direct = design_full(cs, l, p0, 0.0)?;
    let signals = FeedbackSignalSet::build(cs, l)?;
    let y = aggregate_feedback(&signals, cs)?;
    let g = crate::channel::effective_csi(cs, l)?.g;
    let aggregate_error = (&y - &g).norm() / g.norm();
    let recovered = recover_beamformer(&y, l)?;
    let subspace_distance = dist_pf(
        &Subspace::new(recovered.basis.clone())?,
        &Subspace::new(direct.receive.f)?,
    )?;

    let values = cs
        .channels()
        .iter()
        .enumerate()
        .map(|(k, h)| local_feedback_value(&recovered.basis, h, p0).map_err(|e| e.at_sensor(k)))
        .collect::<Result<Vec<_>>>()?;
    let eta_exact = denoising_factor(&recovered.basis, cs, p0)?;
    let outcome = run_denoising_feedback(&values, cs.nt(), lo, hi, rounds)?;
    let (slots_aircomp, slots_conventional) = overhead_compare(cs.k(), cs.nt(), cs.nr(), rounds);
    Ok(FeedbackReport {
        eta_estimate: outcome.estimate,
        eta_exact,
        rounds,
        bound: outcome.bound,
        slots_aircomp,
        slots_conventional,
        subspace_distance,
        aggregate_error,
        clamped: outcome.clamped,
        transcript: outcome.state.transcript().to_vec(),
    })
}
