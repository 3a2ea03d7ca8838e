//! Seeded random sources.
//!
//! All randomness comes from ChaCha8 (a counter-based generator). A 64-bit
//! seed selects the key; independent streams (one per sensor, per Monte-Carlo
//! block, per randomization batch) are selected with `set_stream`, so a stream
//! reproduces independently of how many other streams are drawn.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{normalize_column_phases, ComplexMatrix};

/// Generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer; derives child seeds such as `(base seed, draw index)`.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Circularly-symmetric complex Gaussian with `E|z|² = variance`.
pub fn cn<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Matrix of i.i.d. `CN(0, variance)` entries, filled row-major.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, variance: f64) -> ComplexMatrix {
    let entries: Vec<Complex64> = (0..rows * cols).map(|_| cn(rng, variance)).collect();
    ComplexMatrix::from_row_slice(rows, cols, &entries)
}

/// Haar-distributed `n × m` matrix with orthonormal columns.
pub fn random_orthonormal<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> ComplexMatrix {
    assert!(m <= n, "cannot fit {m} orthonormal columns in dimension {n}");
    let g = complex_gaussian(rng, n, m, 1.0);
    let qr = g.qr();
    let (q, r) = qr.unpack();
    // Fix the phase ambiguity of the QR factor so the distribution is Haar.
    let mut q = q.columns(0, m).into_owned();
    for j in 0..m {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for z in q.column_mut(j).iter_mut() {
            *z *= phase;
        }
    }
    q
}

/// Haar-distributed `n × n` unitary matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    random_orthonormal(rng, n, n)
}

/// Orthonormal basis of the column span of `m` (via QR), phase-normalized.
pub fn orthonormalize(m: &ComplexMatrix) -> ComplexMatrix {
    let (q, _) = m.clone().qr().unpack();
    let mut q = q.columns(0, m.ncols().min(m.nrows())).into_owned();
    normalize_column_phases(&mut q);
    q
}
