use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::DynamicsError;

/// One logged iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub iter: usize,
    /// Generated samples (first coordinate of each) used in this iteration.
    pub fakes: Vec<f64>,
    /// Batch-mean input-gradient norm of the discriminator on reals.
    pub norm_real: f64,
    pub norm_fake: f64,
    /// Unblended gap `(norm_real - norm_fake)^2`.
    pub gap: f64,
    pub d_loss: f64,
    pub g_loss: f64,
    pub d_real_mean: f64,
    pub d_fake_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub iteration: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub records: Vec<TrajectoryRecord>,
    pub diverged: Option<Divergence>,
}

impl TrajectoryLog {
    pub fn last(&self) -> Option<&TrajectoryRecord> {
        self.records.last()
    }

    /// Renders the log as CSV with columns
    /// `iter, fake_0.., norm_R, norm_F, R, L_D, L_G, D_real_mean, D_fake_mean`.
    pub fn to_csv(&self) -> String {
        let n_fakes = self.records.first().map_or(2, |r| r.fakes.len());
        let mut out = String::from("iter");
        for i in 0..n_fakes {
            let _ = write!(out, ",fake_{i}");
        }
        out.push_str(",norm_R,norm_F,R,L_D,L_G,D_real_mean,D_fake_mean\n");
        for r in &self.records {
            let _ = write!(out, "{}", r.iter);
            for f in &r.fakes {
                let _ = write!(out, ",{f}");
            }
            let _ = writeln!(
                out,
                ",{},{},{},{},{},{},{}",
                r.norm_real, r.norm_fake, r.gap, r.d_loss, r.g_loss, r.d_real_mean, r.d_fake_mean
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, DynamicsError> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| DynamicsError::Format("empty trajectory csv".into()))?
            .split(',')
            .collect();
        let n_fakes = header.iter().filter(|h| h.starts_with("fake_")).count();
        if header.len() != n_fakes + 8 || header[0] != "iter" {
            return Err(DynamicsError::Format(format!("unexpected header {header:?}")));
        }
        let mut records = Vec::new();
        for (ln, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != header.len() {
                return Err(DynamicsError::Format(format!("row {}: {} columns", ln + 1, cols.len())));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| DynamicsError::Format(format!("row {}: `{s}`: {e}", ln + 1)))
            };
            let iter = cols[0]
                .parse::<usize>()
                .map_err(|e| DynamicsError::Format(format!("row {}: {e}", ln + 1)))?;
            let fakes = cols[1..=n_fakes].iter().map(|s| num(s)).collect::<Result<_, _>>()?;
            let rest: Vec<f64> = cols[n_fakes + 1..].iter().map(|s| num(s)).collect::<Result<_, _>>()?;
            records.push(TrajectoryRecord {
                iter,
                fakes,
                norm_real: rest[0],
                norm_fake: rest[1],
                gap: rest[2],
                d_loss: rest[3],
                g_loss: rest[4],
                d_real_mean: rest[5],
                d_fake_mean: rest[6],
            });
        }
        Ok(Self {
            records,
            diverged: None,
        })
    }
}
