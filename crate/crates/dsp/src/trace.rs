use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniformly sampled scalar signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalTrace {
    pub samples: Vec<f64>,
    /// Sampling rate in Hz.
    pub fs: f64,
}

impl SignalTrace {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::invalid(
                "signal trace",
                format!("sampling rate {fs} must be positive"),
            ));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "signal trace",
                format!("non-finite sample at index {i}"),
            ));
        }
        Ok(Self { samples, fs })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    /// Samples `[start, end)` as a new trace.
    pub fn slice(&self, start: usize, end: usize) -> SignalTrace {
        SignalTrace {
            samples: self.samples[start..end].to_vec(),
            fs: self.fs,
        }
    }

    /// Reads `t_s,value` rows. The rate is taken from the first two
    /// timestamps and every later step must agree within 1%.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "t_s" || &headers[1] != "value" {
            return Err(Error::invalid(
                "trace csv",
                format!("expected header `t_s,value`, got {headers:?}"),
            ));
        }
        let mut t = Vec::new();
        let mut v = Vec::new();
        for row in rdr.deserialize() {
            let (ts, val): (f64, f64) = row?;
            t.push(ts);
            v.push(val);
        }
        let fs = rate_from_timestamps(&t)?;
        Self::new(v, fs)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t_s", "value"])?;
        for (i, v) in self.samples.iter().enumerate() {
            w.serialize((i as f64 / self.fs, v))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn rate_from_timestamps(t: &[f64]) -> Result<f64> {
    if t.len() < 2 {
        return Err(Error::TooShort {
            op: "csv timestamps",
            need: 2,
            got: t.len(),
        });
    }
    let dt = t[1] - t[0];
    if !(dt > 0.0) {
        return Err(Error::invalid("csv timestamps", "timestamps must increase"));
    }
    for w in t.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 0.01 * dt {
            return Err(Error::invalid(
                "csv timestamps",
                format!("non-uniform step at t = {}", w[0]),
            ));
        }
    }
    Ok(1.0 / dt)
}

/// A pass band in Hz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub lo: f64,
    pub hi: f64,
}

impl BandSpec {
    pub const PULSE: BandSpec = BandSpec { lo: 0.75, hi: 2.5 };
    pub const RESP: BandSpec = BandSpec { lo: 0.08, hi: 0.5 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::invalid(
                "band",
                format!("need 0 < lo < hi, got ({lo}, {hi})"),
            ));
        }
        Ok(Self { lo, hi })
    }

    pub fn check(&self, fs: f64) -> Result<()> {
        Self::new(self.lo, self.hi)?;
        if self.hi >= fs / 2.0 {
            return Err(Error::invalid(
                "band",
                format!(
                    "upper edge {} Hz is not below Nyquist {} Hz",
                    self.hi,
                    fs / 2.0
                ),
            ));
        }
        Ok(())
    }
}

/// What a trace measures; selects bands and SNR ranges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    Pulse,
    Resp,
}

impl SignalKind {
    pub fn band(self) -> BandSpec {
        match self {
            SignalKind::Pulse => BandSpec::PULSE,
            SignalKind::Resp => BandSpec::RESP,
        }
    }

    /// Rate range (per minute) summed over by the SNR.
    pub fn snr_range(self) -> (f64, f64) {
        match self {
            SignalKind::Pulse => (30.0, 240.0),
            SignalKind::Resp => (5.0, 30.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let tr = SignalTrace::new(vec![0.5, -1.25, 3.0, 0.0], 30.0).unwrap();
        tr.write_csv(&p).unwrap();
        let back = SignalTrace::read_csv(&p).unwrap();
        assert_eq!(back.samples, tr.samples);
        assert!((back.fs - 30.0).abs() < 1e-9);
    }

    #[test]
    fn validation() {
        assert!(SignalTrace::new(vec![1.0], 0.0).is_err());
        assert!(SignalTrace::new(vec![f64::NAN], 30.0).is_err());
        assert!(BandSpec::new(0.5, 0.4).is_err());
        assert!(BandSpec::PULSE.check(4.0).is_err());
        BandSpec::PULSE.check(30.0).unwrap();
    }
}
