//! Nomographic functions `h(d_1, …, d_K) = f(Σ_k g_k(d_k))` and the sensing
//! pipeline around the AirComp link: preprocess at each sensor, superpose
//! over the air, postprocess at the access point.

use std::fmt;
use std::io::BufRead;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::beamforming::AircompDesign;
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::random::{cn, stream_rng};

#[derive(Debug, Clone, PartialEq)]
pub enum NomographicFunction {
    /// `(1/K) Σ d_k`
    ArithmeticMean,
    /// `Σ ω_k d_k`
    WeightedSum { weights: Vec<f64> },
    /// `(Π d_k)^{1/K}`, `d_k > 0`
    GeometricMean,
    /// `Σ ω_k d_k^{β_k}`; `d_k > 0` whenever `β_k` is not an integer
    Polynomial { weights: Vec<f64>, exponents: Vec<f64> },
    /// `sqrt(Σ d_k²)`
    EuclideanNorm,
}

impl NomographicFunction {
    pub fn name(&self) -> &'static str {
        match self {
            NomographicFunction::ArithmeticMean => "arithmetic-mean",
            NomographicFunction::WeightedSum { .. } => "weighted-sum",
            NomographicFunction::GeometricMean => "geometric-mean",
            NomographicFunction::Polynomial { .. } => "polynomial",
            NomographicFunction::EuclideanNorm => "euclidean-norm",
        }
    }

    /// Parses `name[:params]`. `weighted-sum:ω` and `polynomial:β[:ω]` take
    /// `;`-separated lists, either one value per sensor or a single value
    /// shared by all `k` sensors. Missing weights default to 1.
    pub fn parse(tag: &str, k: usize) -> Result<Self> {
        let mut parts = tag.trim().split(':');
        let name = parts.next().unwrap_or_default();
        let mut list = |what: &str| -> Result<Option<Vec<f64>>> {
            let Some(field) = parts.next() else { return Ok(None) };
            let v = field
                .split(';')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Format(format!("{what} `{x}` in `{tag}`: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            match v.len() {
                1 => Ok(Some(vec![v[0]; k])),
                n if n == k => Ok(Some(v)),
                n => Err(Error::Format(format!("`{tag}` lists {n} {what}s for {k} sensors"))),
            }
        };
        let f = match name {
            "arithmetic-mean" => NomographicFunction::ArithmeticMean,
            "geometric-mean" => NomographicFunction::GeometricMean,
            "euclidean-norm" => NomographicFunction::EuclideanNorm,
            "weighted-sum" => NomographicFunction::WeightedSum {
                weights: list("weight")?.unwrap_or_else(|| vec![1.0; k]),
            },
            "polynomial" => {
                let exponents = list("exponent")?
                    .ok_or_else(|| Error::Format(format!("`{tag}` needs exponents, e.g. polynomial:2")))?;
                let weights = list("weight")?.unwrap_or_else(|| vec![1.0; k]);
                NomographicFunction::Polynomial { weights, exponents }
            }
            other => return Err(Error::Format(format!("unknown function `{other}`"))),
        };
        if parts.next().is_some() {
            return Err(Error::Format(format!("too many parameters in `{tag}`")));
        }
        Ok(f)
    }

    fn check_sensors(&self, k: usize) -> Result<()> {
        let lens: &[usize] = match self {
            NomographicFunction::WeightedSum { weights } => &[weights.len()],
            NomographicFunction::Polynomial { weights, exponents } => &[weights.len(), exponents.len()],
            _ => &[],
        };
        if lens.iter().any(|&n| n != k) {
            return Err(Error::Dimension(format!(
                "{} is parameterized for {lens:?} sensors, data has {k}",
                self.name()
            )));
        }
        Ok(())
    }

    fn domain_error(&self, sensor: usize, value: f64) -> Error {
        Error::Domain {
            sensor,
            function: self.name().to_string(),
            value,
        }
    }

    /// Preprocessing `g_k(d)` of sensor `k` among `sensors`.
    pub fn pre(&self, k: usize, d: f64, sensors: usize) -> Result<f64> {
        if !d.is_finite() {
            return Err(self.domain_error(k, d));
        }
        Ok(match self {
            NomographicFunction::ArithmeticMean => d / sensors as f64,
            NomographicFunction::WeightedSum { weights } => weights[k] * d,
            NomographicFunction::GeometricMean => {
                if d <= 0.0 {
                    return Err(self.domain_error(k, d));
                }
                d.ln()
            }
            NomographicFunction::Polynomial { weights, exponents } => {
                let beta = exponents[k];
                if beta.fract() == 0.0 && beta.abs() < i32::MAX as f64 {
                    if d == 0.0 && beta < 0.0 {
                        return Err(self.domain_error(k, d));
                    }
                    weights[k] * d.powi(beta as i32)
                } else {
                    if d <= 0.0 {
                        return Err(self.domain_error(k, d));
                    }
                    weights[k] * d.powf(beta)
                }
            }
            NomographicFunction::EuclideanNorm => d * d,
        })
    }

    /// Postprocessing `f(y)`.
    pub fn post(&self, y: f64, sensors: usize) -> f64 {
        match self {
            NomographicFunction::GeometricMean => (y / sensors as f64).exp(),
            NomographicFunction::EuclideanNorm => y.max(0.0).sqrt(),
            _ => y,
        }
    }

    /// Direct evaluation `h(d_1, …, d_K)`.
    pub fn direct(&self, d: &[f64]) -> Result<f64> {
        self.check_sensors(d.len())?;
        for (k, &x) in d.iter().enumerate() {
            self.pre(k, x, d.len())?;
        }
        let k = d.len() as f64;
        Ok(match self {
            NomographicFunction::ArithmeticMean => d.iter().sum::<f64>() / k,
            NomographicFunction::WeightedSum { weights } => d.iter().zip(weights).map(|(x, w)| w * x).sum(),
            NomographicFunction::GeometricMean => d.iter().product::<f64>().powf(1.0 / k),
            NomographicFunction::Polynomial { weights, exponents } => d
                .iter()
                .zip(weights.iter().zip(exponents))
                .map(|(x, (w, b))| w * x.powf(*b))
                .sum(),
            NomographicFunction::EuclideanNorm => d.iter().map(|x| x * x).sum::<f64>().sqrt(),
        })
    }
}

impl fmt::Display for NomographicFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Affine map `s = (g − offset)/scale` applied to every preprocessed value of one function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub offset: f64,
    pub scale: f64,
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization {
        offset: 0.0,
        scale: 1.0,
    };

    pub fn new(offset: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite() && offset.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "normalization offset {offset}, scale {scale}"
            )));
        }
        Ok(Self { offset, scale })
    }

    pub fn apply(&self, g: f64) -> f64 {
        (g - self.offset) / self.scale
    }

    /// Recovers `Σ_k g_k` from the sum of `k` normalized symbols.
    pub fn invert_sum(&self, s: f64, k: usize) -> f64 {
        self.scale * s + k as f64 * self.offset
    }
}

impl Default for Normalization {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// `K × L` measurements with one normalization per function.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorData {
    pub d: DMatrix<f64>,
    pub normalization: Vec<Normalization>,
}

impl SensorData {
    pub fn new(d: DMatrix<f64>) -> Result<Self> {
        if d.nrows() == 0 || d.ncols() == 0 {
            return Err(Error::Dimension("sensor data is empty".into()));
        }
        if d.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("sensor data has non-finite entries".into()));
        }
        let l = d.ncols();
        Ok(Self {
            d,
            normalization: vec![Normalization::IDENTITY; l],
        })
    }

    pub fn k(&self) -> usize {
        self.d.nrows()
    }

    pub fn l(&self) -> usize {
        self.d.ncols()
    }

    pub fn column(&self, l: usize) -> Vec<f64> {
        self.d.column(l).iter().copied().collect()
    }

    /// Sets each function's normalization to the empirical mean and standard
    /// deviation of its preprocessed values, so the transmitted symbols are
    /// standardized. A constant column keeps scale 1.
    pub fn standardize(&mut self, funcs: &[NomographicFunction]) -> Result<()> {
        check_funcs(self, funcs)?;
        let k = self.k();
        for (l, f) in funcs.iter().enumerate() {
            let g = (0..k)
                .map(|i| f.pre(i, self.d[(i, l)], k))
                .collect::<Result<Vec<_>>>()?;
            let mean = g.iter().sum::<f64>() / k as f64;
            let var = g.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / k as f64;
            let sd = var.sqrt();
            self.normalization[l] = Normalization::new(mean, if sd > 1e-300 { sd } else { 1.0 })?;
        }
        Ok(())
    }

    /// CSV with a header of function tags (see [`NomographicFunction::parse`])
    /// and one row of `L` measurements per sensor.
    pub fn read_csv<R: BufRead>(r: R) -> Result<(Self, Vec<NomographicFunction>)> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty sensor data file".into()))?
            .map_err(|e| Error::Format(e.to_string()))?;
        let tags: Vec<String> = header.trim().split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Format(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .trim()
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Format(format!("row {i}: `{x}`: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != tags.len() {
                return Err(Error::Format(format!(
                    "row {i} has {} values for {} functions",
                    row.len(),
                    tags.len()
                )));
            }
            rows.push(row);
        }
        let k = rows.len();
        let funcs = tags
            .iter()
            .map(|t| NomographicFunction::parse(t, k))
            .collect::<Result<Vec<_>>>()?;
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Ok((Self::new(DMatrix::from_row_slice(k, tags.len(), &flat))?, funcs))
    }
}

fn check_funcs(data: &SensorData, funcs: &[NomographicFunction]) -> Result<()> {
    if funcs.len() != data.l() {
        return Err(Error::Dimension(format!(
            "{} functions for {} data columns",
            funcs.len(),
            data.l()
        )));
    }
    funcs.iter().try_for_each(|f| f.check_sensors(data.k()))
}

/// Per-function computed and exact values.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionResult {
    pub computed: Vec<f64>,
    pub exact: Vec<f64>,
}

impl FunctionResult {
    pub fn abs_error(&self) -> Vec<f64> {
        self.computed
            .iter()
            .zip(&self.exact)
            .map(|(c, e)| (c - e).abs())
            .collect()
    }

    /// `|ĥ − h| / |h|`, or the absolute error when `h = 0`.
    pub fn rel_error(&self) -> Vec<f64> {
        self.computed
            .iter()
            .zip(&self.exact)
            .map(|(c, e)| {
                if *e == 0.0 {
                    (c - e).abs()
                } else {
                    (c - e).abs() / e.abs()
                }
            })
            .collect()
    }
}

/// Symbol vectors `s_k = [(g_{k1}(d_{k1}) − o_1)/c_1, …]`, one per sensor.
pub fn preprocess(data: &SensorData, funcs: &[NomographicFunction]) -> Result<Vec<DVector<f64>>> {
    check_funcs(data, funcs)?;
    let k = data.k();
    (0..k)
        .map(|i| {
            funcs
                .iter()
                .enumerate()
                .map(|(l, f)| Ok(data.normalization[l].apply(f.pre(i, data.d[(i, l)], k)?)))
                .collect::<Result<Vec<_>>>()
                .map(DVector::from_vec)
        })
        .collect()
}

/// Undoes the normalization of the received sums and applies each `f`.
pub fn postprocess(s_hat: &[f64], funcs: &[NomographicFunction], data: &SensorData) -> Result<FunctionResult> {
    check_funcs(data, funcs)?;
    if s_hat.len() != funcs.len() {
        return Err(Error::Dimension(format!(
            "{} received values for {} functions",
            s_hat.len(),
            funcs.len()
        )));
    }
    let k = data.k();
    let computed = funcs
        .iter()
        .zip(s_hat)
        .zip(&data.normalization)
        .map(|((f, &s), n)| f.post(n.invert_sum(s, k), k))
        .collect();
    let exact = funcs
        .iter()
        .enumerate()
        .map(|(l, f)| f.direct(&data.column(l)))
        .collect::<Result<_>>()?;
    Ok(FunctionResult { computed, exact })
}

/// Sends the preprocessed symbols (real parts of complex symbols) through
/// `ŝ = A^H Σ_k H_k B_k s_k + A^H n`, `n ~ CN(0, σ_n² I)`, and postprocesses
/// the real part of `ŝ`.
pub fn end_to_end(
    data: &SensorData,
    funcs: &[NomographicFunction],
    design: &AircompDesign,
    cs: &ChannelSet,
    noise_variance: f64,
    seed: u64,
) -> Result<FunctionResult> {
    if design.receive.l() != funcs.len() {
        return Err(Error::Dimension(format!(
            "design carries {} streams for {} functions",
            design.receive.l(),
            funcs.len()
        )));
    }
    if data.k() != cs.k() || design.transmit.beamformers.len() != cs.k() {
        return Err(Error::Dimension(format!(
            "{} sensors of data for {} channels",
            data.k(),
            cs.k()
        )));
    }
    let symbols = preprocess(data, funcs)?;
    let ah = design.receive.a().adjoint();
    let mut received = DVector::<Complex64>::zeros(cs.nr());
    for ((h, b), s) in cs.channels().iter().zip(&design.transmit.beamformers).zip(&symbols) {
        let x = b * s.map(|v| Complex64::new(v, 0.0));
        received += h * x;
    }
    let mut rng = stream_rng(seed, 0);
    for z in received.iter_mut() {
        *z += cn(&mut rng, noise_variance);
    }
    let s_hat: Vec<f64> = (ah * received).iter().map(|z| z.re).collect();
    postprocess(&s_hat, funcs, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::design_full;
    use crate::channel::{generate_channels, RicianParams};
    use crate::linalg::ComplexMatrix;

    fn data(rows: &[&[f64]]) -> SensorData {
        let k = rows.len();
        let l = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        SensorData::new(DMatrix::from_row_slice(k, l, &flat)).unwrap()
    }

    #[test]
    fn table_entries() {
        let f = NomographicFunction::GeometricMean;
        assert!((f.pre(0, std::f64::consts::E, 3).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(f.post(6.0, 3), 2f64.exp());
        assert_eq!(NomographicFunction::ArithmeticMean.pre(0, 6.0, 3).unwrap(), 2.0);

        let d = data(&[&[3.0, 1.0], &[4.0, 2.0], &[0.0, 3.0]]);
        let funcs = [NomographicFunction::EuclideanNorm, NomographicFunction::ArithmeticMean];
        let sums: Vec<f64> = preprocess(&d, &funcs)
            .unwrap()
            .iter()
            .fold(DVector::zeros(2), |acc, s| acc + s)
            .iter()
            .copied()
            .collect();
        let r = postprocess(&sums, &funcs, &d).unwrap();
        assert!((r.computed[0] - 5.0).abs() < 1e-15);
        assert!((r.computed[1] - 2.0).abs() < 1e-15);
        assert!(r.abs_error().iter().all(|&e| e < 1e-15));
    }

    #[test]
    fn domain_errors_name_sensor_and_function() {
        let d = data(&[&[1.0], &[-2.0]]);
        match preprocess(&d, &[NomographicFunction::GeometricMean]) {
            Err(Error::Domain {
                sensor,
                function,
                value,
            }) => {
                assert_eq!((sensor, function.as_str(), value), (1, "geometric-mean", -2.0));
            }
            other => panic!("{other:?}"),
        }
        let poly = NomographicFunction::Polynomial {
            weights: vec![1.0, 1.0],
            exponents: vec![2.0, 0.5],
        };
        assert!(matches!(
            preprocess(&d, &[poly.clone()]),
            Err(Error::Domain { sensor: 1, .. })
        ));
        let ok = data(&[&[-1.5], &[2.0]]);
        let poly_int = NomographicFunction::Polynomial {
            weights: vec![1.0, 2.0],
            exponents: vec![3.0, 2.0],
        };
        assert!(preprocess(&ok, &[poly_int]).is_ok());
    }

    #[test]
    fn parse_tags() {
        assert_eq!(
            NomographicFunction::parse("arithmetic-mean", 3).unwrap(),
            NomographicFunction::ArithmeticMean
        );
        assert_eq!(
            NomographicFunction::parse("polynomial:2.5", 2).unwrap(),
            NomographicFunction::Polynomial {
                weights: vec![1.0, 1.0],
                exponents: vec![2.5, 2.5]
            }
        );
        assert_eq!(
            NomographicFunction::parse("weighted-sum:1;2;3", 3).unwrap(),
            NomographicFunction::WeightedSum {
                weights: vec![1.0, 2.0, 3.0]
            }
        );
        assert!(NomographicFunction::parse("weighted-sum:1;2", 3).is_err());
        assert!(NomographicFunction::parse("median", 3).is_err());
        assert!(NomographicFunction::parse("polynomial", 3).is_err());
    }

    #[test]
    fn csv_ingest() {
        let text = "arithmetic-mean,polynomial:2:0.5\n1,2\n3,4\n";
        let (d, funcs) = SensorData::read_csv(text.as_bytes()).unwrap();
        assert_eq!((d.k(), d.l()), (2, 2));
        assert_eq!(funcs[1].direct(&d.column(1)).unwrap(), 0.5 * 4.0 + 0.5 * 16.0);
        assert!(SensorData::read_csv("arithmetic-mean\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn normalization_round_trip() {
        let mut d = data(&[&[1.0, 2.0], &[5.0, 3.0], &[9.0, 7.0]]);
        let funcs = [NomographicFunction::EuclideanNorm, NomographicFunction::GeometricMean];
        d.standardize(&funcs).unwrap();
        let s = preprocess(&d, &funcs).unwrap();
        for l in 0..2 {
            let col: Vec<f64> = s.iter().map(|v| v[l]).collect();
            let mean = col.iter().sum::<f64>() / 3.0;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0;
            assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        }
        let sums: Vec<f64> = (0..2).map(|l| s.iter().map(|v| v[l]).sum()).collect();
        let r = postprocess(&sums, &funcs, &d).unwrap();
        assert!(r.rel_error().iter().all(|&e| e < 1e-12));
    }

    #[test]
    fn single_sensor_identity_channel_pipeline() {
        let cs = ChannelSet::new(vec![ComplexMatrix::identity(2, 2)]).unwrap();
        let design = design_full(&cs, 2, 1.0, 0.0).unwrap();
        let d = data(&[&[4.0, 9.0]]);
        let funcs = [NomographicFunction::GeometricMean, NomographicFunction::EuclideanNorm];
        let r = end_to_end(&d, &funcs, &design, &cs, 0.0, 1).unwrap();
        assert!(r.rel_error().iter().all(|&e| e < 1e-12));
        assert!((r.computed[0] - 4.0).abs() < 1e-12 && (r.computed[1] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_pipeline_through_a_design() {
        let cs = generate_channels(RicianParams::default(), 5, 5, 8, 30).unwrap();
        let design = design_full(&cs, 5, 1.0, 0.0).unwrap();
        let mut d = data(&[
            &[1.0, 2.0, 0.5, 1.5, -1.0],
            &[2.0, 3.0, 1.5, 2.5, 2.0],
            &[3.0, 1.0, 2.5, 0.7, 0.5],
            &[4.0, 5.0, 3.5, 1.1, -3.0],
            &[5.0, 4.0, 4.5, 2.2, 4.0],
        ]);
        let funcs = [
            NomographicFunction::ArithmeticMean,
            NomographicFunction::WeightedSum {
                weights: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            },
            NomographicFunction::GeometricMean,
            NomographicFunction::Polynomial {
                weights: vec![1.0; 5],
                exponents: vec![2.5; 5],
            },
            NomographicFunction::EuclideanNorm,
        ];
        d.standardize(&funcs).unwrap();
        let r = end_to_end(&d, &funcs, &design, &cs, 0.0, 1).unwrap();
        assert!(r.rel_error().iter().all(|&e| e < 1e-9), "{:?}", r.rel_error());
    }
}
