use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub mean_difference: f64,
    pub n_pairs: usize,
    /// Differences had zero variance with a nonzero mean; `t` is infinite
    /// and `p` is set to 0.
    pub degenerate: bool,
}

/// Two-sided paired t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::invalid("paired_t_test", "samples must have equal length"));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::invalid("paired_t_test", "need at least two pairs"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("paired_t_test"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let df = n - 1;
    let base = TTestResult {
        t_statistic: 0.0,
        degrees_of_freedom: df,
        p_value: 1.0,
        mean_difference: mean,
        n_pairs: n,
        degenerate: false,
    };
    if var == 0.0 {
        if mean == 0.0 {
            return Ok(base);
        }
        return Ok(TTestResult {
            t_statistic: mean.signum() * f64::INFINITY,
            p_value: 0.0,
            degenerate: true,
            ..base
        });
    }
    let t = mean / (var.sqrt() / nf.sqrt());
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::invalid("paired_t_test", e.to_string()))?;
    let p = (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0);
    Ok(TTestResult {
        t_statistic: t,
        p_value: p,
        ..base
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockAggregate {
    /// Per-block values; `None` where the block is missing.
    pub blocks: Vec<Option<f64>>,
    /// Mean over the present blocks.
    pub mean: f64,
}

impl BlockAggregate {
    pub fn present(&self) -> Vec<bool> {
        self.blocks.iter().map(Option::is_some).collect()
    }
}

/// Cross-block mean over the blocks that are present.
pub fn aggregate_blocks(blocks: &[Option<f64>]) -> Result<BlockAggregate> {
    let present: Vec<f64> = blocks.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::Empty("training blocks"));
    }
    Ok(BlockAggregate {
        blocks: blocks.to_vec(),
        mean: present.iter().sum::<f64>() / present.len() as f64,
    })
}
