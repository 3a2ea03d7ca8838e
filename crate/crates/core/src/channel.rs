//! Seeded Rician MIMO channel sets and the effective-CSI matrix
//! `G = Σ_k σ_{k,L}² U_k U_k^H`.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grassmann::Subspace;
use crate::linalg::{compact_svd, ensure_finite, from_row_major, ComplexMatrix, DEFAULT_RANK_TOL};
use crate::random::{cn, stream_rng};

/// Entry distribution `μ + CN(0, σ_h²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicianParams {
    pub mean: Complex64,
    pub variance: f64,
}

impl RicianParams {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        Self::with_complex_mean(Complex64::new(mean, 0.0), variance)
    }

    pub fn with_complex_mean(mean: Complex64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() || !mean.re.is_finite() || !mean.im.is_finite() {
            return Err(Error::InvalidInput(format!(
                "Rician parameters need a finite mean and positive variance, got μ={mean}, σ²={variance}"
            )));
        }
        Ok(Self { mean, variance })
    }
}

impl Default for RicianParams {
    fn default() -> Self {
        Self {
            mean: Complex64::new(1.0, 0.0),
            variance: 1.0,
        }
    }
}

/// The `K` per-sensor channels `H_k ∈ C^{N_r × N_t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    channels: Vec<ComplexMatrix>,
}

impl ChannelSet {
    pub fn new(channels: Vec<ComplexMatrix>) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::Dimension("a channel set needs at least one sensor".into()))?;
        let shape = first.shape();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::Dimension("empty channel matrix".into()));
        }
        for (k, h) in channels.iter().enumerate() {
            if h.shape() != shape {
                return Err(Error::Dimension(format!(
                    "sensor {k} has a {}x{} channel, expected {}x{}",
                    h.nrows(),
                    h.ncols(),
                    shape.0,
                    shape.1
                )));
            }
            ensure_finite(h)?;
        }
        Ok(Self { channels })
    }

    /// Number of sensors `K`.
    pub fn k(&self) -> usize {
        self.channels.len()
    }

    /// Sensor antennas `N_t`.
    pub fn nt(&self) -> usize {
        self.channels[0].ncols()
    }

    /// Access-point antennas `N_r`.
    pub fn nr(&self) -> usize {
        self.channels[0].nrows()
    }

    pub fn channels(&self) -> &[ComplexMatrix] {
        &self.channels
    }

    pub fn get(&self, k: usize) -> &ComplexMatrix {
        &self.channels[k]
    }

    /// Every channel multiplied by `c`.
    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            channels: self.channels.iter().map(|h| h * c).collect(),
        }
    }

    /// Writes the CSV fixture: a `k,n_t,n_r` header, one dimension line, then
    /// one line per channel row holding `re,im` pairs (sensor-major, row-major).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,n_t,n_r")?;
        writeln!(w, "{},{},{}", self.k(), self.nt(), self.nr())?;
        for h in &self.channels {
            for i in 0..h.nrows() {
                let line: Vec<String> = (0..h.ncols())
                    .flat_map(|j| [h[(i, j)].re.to_string(), h[(i, j)].im.to_string()])
                    .collect();
                writeln!(w, "{}", line.join(","))?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().map(|l| l.map_err(|e| Error::Format(e.to_string())));
        let header = lines.next().ok_or_else(|| Error::Format("missing header".into()))??;
        if header.trim() != "k,n_t,n_r" {
            return Err(Error::Format(format!("unexpected header {header:?}")));
        }
        let dims_line = lines
            .next()
            .ok_or_else(|| Error::Format("missing dimensions".into()))??;
        let dims: Vec<usize> = dims_line
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|e| Error::Format(e.to_string())))
            .collect::<Result<_>>()?;
        let [k, nt, nr] = dims[..] else {
            return Err(Error::Format(format!("bad dimension line {dims_line:?}")));
        };
        let mut channels = Vec::with_capacity(k);
        for _ in 0..k {
            let mut entries = Vec::with_capacity(nr * nt);
            for _ in 0..nr {
                let line = lines
                    .next()
                    .ok_or_else(|| Error::Format("truncated fixture".into()))??;
                let vals: Vec<f64> = line
                    .split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Format(e.to_string())))
                    .collect::<Result<_>>()?;
                if vals.len() != 2 * nt {
                    return Err(Error::Format(format!(
                        "row has {} values, expected {}",
                        vals.len(),
                        2 * nt
                    )));
                }
                entries.extend(vals.chunks(2).map(|p| Complex64::new(p[0], p[1])));
            }
            channels.push(from_row_major(nr, nt, &entries)?);
        }
        Self::new(channels)
    }

    /// Binary fixture: little-endian `u64` K, N_t, N_r, then `f64` re/im pairs
    /// in the same order as the CSV form.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for d in [self.k(), self.nt(), self.nr()] {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for h in &self.channels {
            for i in 0..h.nrows() {
                for j in 0..h.ncols() {
                    w.write_all(&h[(i, j)].re.to_le_bytes())?;
                    w.write_all(&h[(i, j)].im.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_binary(bytes: &[u8]) -> Result<Self> {
        let mut chunks = bytes.chunks_exact(8);
        let mut next = || -> Result<[u8; 8]> {
            chunks
                .next()
                .map(|c| c.try_into().expect("chunk of 8"))
                .ok_or_else(|| Error::Format("truncated binary fixture".into()))
        };
        let k = u64::from_le_bytes(next()?) as usize;
        let nt = u64::from_le_bytes(next()?) as usize;
        let nr = u64::from_le_bytes(next()?) as usize;
        if bytes.len() != 24 + 16 * k * nt * nr {
            return Err(Error::Format("binary fixture length does not match its header".into()));
        }
        let mut channels = Vec::with_capacity(k);
        for _ in 0..k {
            let mut entries = Vec::with_capacity(nr * nt);
            for _ in 0..nr * nt {
                let re = f64::from_le_bytes(next()?);
                let im = f64::from_le_bytes(next()?);
                entries.push(Complex64::new(re, im));
            }
            channels.push(from_row_major(nr, nt, &entries)?);
        }
        Self::new(channels)
    }
}

/// Draws `K` i.i.d. Rician channels. Sensor `k` uses stream `k` of the seed,
/// so its channel does not depend on `K`.
pub fn generate_channels(params: RicianParams, k: usize, nt: usize, nr: usize, seed: u64) -> Result<ChannelSet> {
    if k == 0 || nt == 0 || nr == 0 {
        return Err(Error::Dimension(format!("K={k}, N_t={nt}, N_r={nr} must be positive")));
    }
    let channels = (0..k)
        .map(|sensor| {
            let mut rng = stream_rng(seed, sensor as u64);
            let entries: Vec<Complex64> = (0..nr * nt)
                .map(|_| params.mean + cn(&mut rng, params.variance))
                .collect();
            ComplexMatrix::from_row_slice(nr, nt, &entries)
        })
        .collect();
    ChannelSet::new(channels)
}

/// `H_sum = Σ_k H_k`.
pub fn sum_channel(cs: &ChannelSet) -> ComplexMatrix {
    let mut acc = ComplexMatrix::zeros(cs.nr(), cs.nt());
    for h in cs.channels() {
        acc += h;
    }
    acc
}

/// The `L` dominant singular triplets of one channel.
#[derive(Debug, Clone)]
pub struct ChannelEigenspace {
    /// `N_r × L`.
    pub u: ComplexMatrix,
    /// `σ_1 ≥ … ≥ σ_L > 0`.
    pub singular_values: Vec<f64>,
    /// `N_t × L`.
    pub v: ComplexMatrix,
}

impl ChannelEigenspace {
    /// `σ_L²`, the smallest retained squared singular value.
    pub fn weight(&self) -> f64 {
        let s = *self.singular_values.last().expect("L >= 1");
        s * s
    }
}

/// Truncates the compact SVD of `h` to `L` triplets. Fails (sensor index 0,
/// re-tagged by callers) when fewer than `L` singular values are usable.
pub fn channel_eigenspace(h: &ComplexMatrix, l: usize) -> Result<ChannelEigenspace> {
    if l == 0 || l > h.nrows().min(h.ncols()) {
        return Err(Error::Dimension(format!(
            "L={l} exceeds min(N_r, N_t) = {}",
            h.nrows().min(h.ncols())
        )));
    }
    let svd = compact_svd(h, DEFAULT_RANK_TOL)?;
    if svd.rank < l {
        return Err(Error::DegenerateChannel {
            sensor: 0,
            reason: format!("rank {} below L={l}", svd.rank),
        });
    }
    Ok(ChannelEigenspace {
        u: svd.u.columns(0, l).into_owned(),
        singular_values: svd.singular_values[..l].to_vec(),
        v: svd.v.columns(0, l).into_owned(),
    })
}

/// The effective CSI `G` together with the weights and subspaces it is built from.
#[derive(Debug, Clone)]
pub struct EffectiveCsi {
    /// `N_r × N_r`, Hermitian PSD.
    pub g: ComplexMatrix,
    pub weights: Vec<f64>,
    pub bases: Vec<Subspace>,
}

pub fn effective_csi(cs: &ChannelSet, l: usize) -> Result<EffectiveCsi> {
    let mut g = ComplexMatrix::zeros(cs.nr(), cs.nr());
    let mut weights = Vec::with_capacity(cs.k());
    let mut bases = Vec::with_capacity(cs.k());
    for (k, h) in cs.channels().iter().enumerate() {
        let eig = channel_eigenspace(h, l).map_err(|e| e.at_sensor(k))?;
        let w = eig.weight();
        g += (&eig.u * eig.u.adjoint()).scale(w);
        weights.push(w);
        bases.push(Subspace::new(eig.u).map_err(|e| e.at_sensor(k))?);
    }
    // Each term is Hermitian up to rounding; remove the rounding.
    let g = (&g + g.adjoint()).scale(0.5);
    Ok(EffectiveCsi { g, weights, bases })
}
