//! User-supplied `φ` and `β` samples with monotone cubic interpolation.

use std::path::Path;

use crate::error::{Error, Result};

/// Piecewise cubic Hermite interpolant with Fritsch-Butland slopes. Each
/// piece is monotone between its end values, so positive data stay positive.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidNonlinearity(format!(
                "{} abscissae but {} values",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::InvalidNonlinearity(
                "a tabulation needs at least two samples".into(),
            ));
        }
        if x[0] < 0.0 {
            return Err(Error::InvalidNonlinearity(format!(
                "sample points must be nonnegative, first is {}",
                x[0]
            )));
        }
        if let Some(w) = x.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidNonlinearity(format!(
                "sample points must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if let Some(v) = y.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidNonlinearity(format!(
                "tabulated values must be positive and finite, found {v}"
            )));
        }
        let m = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let secant: Vec<f64> = (0..m - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut slopes = vec![0.0; m];
        slopes[0] = secant[0];
        slopes[m - 1] = secant[m - 2];
        for k in 1..m - 1 {
            let (a, b) = (secant[k - 1], secant[k]);
            if a * b > 0.0 {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                slopes[k] = (w1 + w2) / (w1 / a + w2 / b);
            }
        }
        // Endpoint slopes must not overshoot the first/last secant by more than 3x.
        for (k, s) in [(0usize, 0usize), (m - 1, m - 2)] {
            if slopes[k] * secant[s] <= 0.0 {
                slopes[k] = 0.0;
            } else if slopes[k].abs() > 3.0 * secant[s].abs() {
                slopes[k] = 3.0 * secant[s];
            }
        }
        Ok(MonotoneCubic { x, y, slopes })
    }

    pub fn last_abscissa(&self) -> f64 {
        *self.x.last().unwrap()
    }

    /// Evaluates at `s`; below the first sample the first value is held.
    pub fn eval(&self, s: f64) -> f64 {
        if s <= self.x[0] {
            return self.y[0];
        }
        let m = self.x.len();
        if s >= self.x[m - 1] {
            return self.y[m - 1];
        }
        let k = self.x.partition_point(|&xi| xi <= s) - 1;
        let h = self.x[k + 1] - self.x[k];
        let t = (s - self.x[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[k]
            + h10 * h * self.slopes[k]
            + h01 * self.y[k + 1]
            + h11 * h * self.slopes[k + 1]
    }
}

/// Samples of `φ` and `β` on their own grids.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulation {
    pub(crate) phi: MonotoneCubic,
    pub(crate) beta: MonotoneCubic,
}

impl Tabulation {
    pub fn new(phi: MonotoneCubic, beta: MonotoneCubic) -> Self {
        Tabulation { phi, beta }
    }

    /// Largest `s` covered by both tables.
    pub fn coverage(&self) -> f64 {
        self.phi.last_abscissa().min(self.beta.last_abscissa())
    }

    /// Parses `s,phi` and `s,beta` CSV text. A non-numeric first line is
    /// treated as a header.
    pub fn from_csv(phi_csv: &str, beta_csv: &str) -> Result<Self> {
        let (xp, yp) = parse_two_columns(phi_csv, "phi table")?;
        let (xb, yb) = parse_two_columns(beta_csv, "beta table")?;
        Ok(Tabulation {
            phi: MonotoneCubic::new(xp, yp)?,
            beta: MonotoneCubic::new(xb, yb)?,
        })
    }

    pub fn from_files(phi_path: &Path, beta_path: &Path) -> Result<Self> {
        let phi = std::fs::read_to_string(phi_path).map_err(|e| Error::io(phi_path, e))?;
        let beta = std::fs::read_to_string(beta_path).map_err(|e| Error::io(beta_path, e))?;
        Self::from_csv(&phi, &beta)
    }
}

fn parse_two_columns(text: &str, context: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let (a, b) = match (cols.next(), cols.next(), cols.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(Error::Parse {
                    context: context.into(),
                    message: format!("line {}: expected two columns", lineno + 1),
                })
            }
        };
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(y)) => {
                xs.push(x);
                ys.push(y);
            }
            _ if xs.is_empty() && lineno == 0 => continue,
            _ => {
                return Err(Error::Parse {
                    context: context.into(),
                    message: format!("line {}: not a number pair: {line}", lineno + 1),
                })
            }
        }
    }
    Ok((xs, ys))
}
