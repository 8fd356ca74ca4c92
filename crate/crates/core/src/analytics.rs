//! Closed-form transmission counts for flooding and reactive routing.
//!
//! Every model takes an optional true hop count `h`; without it the average
//! path length is approximated by `sqrt(n)`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("network needs at least 2 nodes, got {0}")]
    TooFewNodes(u64),
    #[error("model needs at least 1 chunk")]
    NoChunks,
    #[error("model needs at least 1 consumer")]
    NoConsumers,
    #[error("hop count must be at least 1")]
    ZeroHops,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelInput {
    pub n: u64,
    pub k: u64,
    pub m: u64,
    pub h: Option<u64>,
}

impl ModelInput {
    pub fn new(n: u64, k: u64, m: u64, h: Option<u64>) -> Result<Self, DomainError> {
        if n < 2 {
            return Err(DomainError::TooFewNodes(n));
        }
        if m < 1 {
            return Err(DomainError::NoConsumers);
        }
        if h == Some(0) {
            return Err(DomainError::ZeroHops);
        }
        Ok(ModelInput { n, k, m, h })
    }

    /// Path length: `h` when known, else `sqrt(n)`.
    pub fn path_len(&self) -> f64 {
        self.h.map_or((self.n as f64).sqrt(), |h| h as f64)
    }
}

/// Flooding every Interest: `k * ((n - 1) + p)`.
pub fn vif_tx(n: u64, k: u64, h: Option<u64>) -> Result<f64, DomainError> {
    let input = ModelInput::new(n, k, 1, h)?;
    Ok(k as f64 * ((n - 1) as f64 + input.path_len()))
}

/// One flood, then unicast: `(n - 1) + 2 (k - 1/2) p`.
pub fn ronr_tx(n: u64, k: u64, h: Option<u64>) -> Result<f64, DomainError> {
    let input = ModelInput::new(n, k, 1, h)?;
    if k < 1 {
        return Err(DomainError::NoChunks);
    }
    Ok((n - 1) as f64 + 2.0 * (k as f64 - 0.5) * input.path_len())
}

/// `m` independent consumers without caching.
pub fn multi_nocache_tx(n: u64, k: u64, m: u64, h: Option<u64>) -> Result<f64, DomainError> {
    ModelInput::new(n, k, m, h)?;
    Ok(m as f64 * ronr_tx(n, k, h)?)
}

/// Best case with caching, evaluated as published:
/// `2 (k - 1/2) (sqrt(n) + n - 1) + n + m - 2`.
///
/// For realistic parameters this exceeds [`multi_nocache_tx`]; reports flag it.
pub fn cached_best_tx(n: u64, k: u64, m: u64) -> Result<f64, DomainError> {
    ModelInput::new(n, k, m, None)?;
    if k < 1 {
        return Err(DomainError::NoChunks);
    }
    let n_f = n as f64;
    Ok(2.0 * (k as f64 - 0.5) * (n_f.sqrt() + n_f - 1.0) + n_f + m as f64 - 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub model_value: f64,
    pub sim_value: f64,
    /// `(sim - model) / model`, or `sim - model` when the model is 0.
    pub deviation: f64,
    /// `None` when no tolerance applies (lossy runs are report-only).
    pub passed: Option<bool>,
}

/// Compares a simulated count with a model value. `tolerance` bounds the
/// absolute relative deviation; pass `None` for report-only rows.
pub fn compare(sim_value: f64, model_value: f64, tolerance: Option<f64>) -> Comparison {
    let diff = sim_value - model_value;
    let deviation = if model_value == 0.0 { diff } else { diff / model_value };
    Comparison {
        model_value,
        sim_value,
        deviation,
        passed: tolerance.map(|tol| deviation.abs() <= tol),
    }
}
