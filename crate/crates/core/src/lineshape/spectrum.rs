//! Measured ODMR spectra, CSV input and dip detection.

use std::collections::BTreeMap;
use std::io::Read;
use std::ops::Range;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

const MIN_POINTS: usize = 8;
const SMOOTHING_HALF_WIDTH: usize = 2;
/// Runs of sub-threshold points closer than this are one dip.
const MERGE_GAP: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Spectrum {
    pub freqs_mhz: Vec<f64>,
    pub signal: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
    /// `key = value` pairs from `#` comment lines.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

impl Spectrum {
    pub fn new(freqs_mhz: Vec<f64>, signal: Vec<f64>, sigma: Option<Vec<f64>>) -> Result<Self> {
        if freqs_mhz.len() != signal.len() {
            return Err(Error::InvalidSpectrum(format!(
                "{} frequencies but {} signal values",
                freqs_mhz.len(),
                signal.len()
            )));
        }
        if freqs_mhz.len() < MIN_POINTS {
            return Err(Error::InvalidSpectrum(format!("need at least {MIN_POINTS} points, got {}", freqs_mhz.len())));
        }
        if freqs_mhz.iter().chain(&signal).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpectrum("non-finite value".into()));
        }
        if freqs_mhz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpectrum("frequencies must be strictly increasing".into()));
        }
        if let Some(s) = &sigma {
            if s.len() != signal.len() {
                return Err(Error::InvalidSpectrum("sigma column length mismatch".into()));
            }
            if s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidSpectrum("sigma values must be positive".into()));
            }
        }
        Ok(Self { freqs_mhz, signal, sigma, metadata: BTreeMap::new() })
    }

    pub fn len(&self) -> usize {
        self.freqs_mhz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs_mhz.is_empty()
    }

    /// Reads `frequency_mhz,signal[,sigma]` CSV; `#` lines are comments and
    /// may carry `key = value` metadata.
    pub fn from_csv_reader<R: Read>(mut reader: R) -> Result<Self> {
        let mut text = String::new();
        reader
            .read_to_string(&mut text)
            .map_err(|e| Error::InvalidSpectrum(format!("read failed: {e}")))?;

        let mut metadata = BTreeMap::new();
        for line in text.lines() {
            if let Some(comment) = line.trim_start().strip_prefix('#') {
                if let Some((k, v)) = comment.split_once('=').or_else(|| comment.split_once(':')) {
                    metadata.insert(k.trim().to_string(), v.trim().to_string());
                }
            }
        }

        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (fi, si) = match (col("frequency_mhz"), col("signal")) {
            (Some(f), Some(s)) => (f, s),
            _ => {
                return Err(Error::InvalidSpectrum(
                    "header must contain frequency_mhz and signal columns".into(),
                ))
            }
        };
        let sig_i = col("sigma");

        let (mut f, mut s, mut e) = (Vec::new(), Vec::new(), Vec::new());
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                let field = rec.get(i).ok_or_else(|| Error::InvalidSpectrum(format!("row {}: missing column", row + 2)))?;
                field
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidSpectrum(format!("row {}: cannot parse '{field}'", row + 2)))
            };
            f.push(parse(fi)?);
            s.push(parse(si)?);
            if let Some(i) = sig_i {
                e.push(parse(i)?);
            }
        }
        let mut spec = Self::new(f, s, sig_i.map(|_| e))?;
        spec.metadata = metadata;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::InvalidSpectrum(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(if self.sigma.is_some() { "frequency_mhz,signal,sigma\n" } else { "frequency_mhz,signal\n" });
        for i in 0..self.len() {
            out.push_str(&format!("{},{}", self.freqs_mhz[i], self.signal[i]));
            if let Some(s) = &self.sigma {
                out.push_str(&format!(",{}", s[i]));
            }
            out.push('\n');
        }
        out
    }

    /// Sub-spectrum over an index range.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        let mut s = Self::new(
            self.freqs_mhz[range.clone()].to_vec(),
            self.signal[range.clone()].to_vec(),
            self.sigma.as_ref().map(|s| s[range].to_vec()),
        )?;
        s.metadata = self.metadata.clone();
        Ok(s)
    }

    /// Index windows around each detected dip, in frequency order.
    ///
    /// The signal is smoothed with a 5-point moving average. Points more
    /// than three median absolute deviations below the median form runs,
    /// and each run is one dip. Window edges sit halfway between
    /// neighbouring dip minima.
    pub fn detect_dips(&self) -> Vec<Range<usize>> {
        let n = self.len();
        let smooth = moving_average(&self.signal, SMOOTHING_HALF_WIDTH);
        let med = median(&smooth);
        let mad = median(&smooth.iter().map(|v| (v - med).abs()).collect::<Vec<_>>());
        let lowest = smooth.iter().copied().fold(f64::INFINITY, f64::min);
        // noiseless data has no spread; fall back to a fraction of the depth
        let threshold = med - (3.0 * mad).max(0.05 * (med - lowest));
        if !(med - lowest > 0.0) {
            return Vec::new();
        }

        let mut runs: Vec<Range<usize>> = Vec::new();
        let mut i = 0;
        while i < n {
            if smooth[i] < threshold {
                let start = i;
                while i < n && smooth[i] < threshold {
                    i += 1;
                }
                match runs.last_mut() {
                    Some(last) if start - last.end < MERGE_GAP => last.end = i,
                    _ => runs.push(start..i),
                }
            } else {
                i += 1;
            }
        }

        let centers: Vec<usize> = runs
            .iter()
            .map(|r| r.clone().min_by(|&a, &b| smooth[a].total_cmp(&smooth[b])).unwrap_or(r.start))
            .collect();
        let mut windows = Vec::with_capacity(centers.len());
        for (k, &c) in centers.iter().enumerate() {
            let lo = if k == 0 { 0 } else { (centers[k - 1] + c) / 2 + 1 };
            let hi = if k + 1 == centers.len() { n } else { (c + centers[k + 1]) / 2 + 1 };
            windows.push(lo..hi);
        }
        windows
    }
}

pub(crate) fn moving_average(v: &[f64], half: usize) -> Vec<f64> {
    (0..v.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(v.len());
            v[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

pub(crate) fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
