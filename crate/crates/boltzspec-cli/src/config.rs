//! Run configuration: defaults, JSON loading and validation.

use boltzspec::basis::BasisSpec;
use boltzspec::weighted::k_star;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub dimension: usize,
    pub degree: usize,
    /// Per-dimension order of the velocity quadrature; 0 selects degree + 4.
    pub quad_order: usize,
    /// Polynomial weight exponent k of the E(k) space.
    pub weight_k: f64,
    /// Decay exponent p of the E(k) trial functions; 0 selects the smallest
    /// admissible value.
    pub weight_p: u32,
    /// Trial degree of the E(k) discretization; 0 selects degree + 2.
    pub poly_degree: usize,
    /// Boundary between the small- and large-frequency regimes.
    pub r0: f64,
    /// Hydrodynamic separation threshold a; 0 selects half the measured
    /// spectral gap (capped by the surrogate margin when one is computed).
    pub a: f64,
    pub contour_nodes: usize,
    /// Surrogate splitting cutoff radius and mollification width.
    pub r_cut: f64,
    pub delta: f64,
    pub seed: u64,
    pub threads: usize,
    pub cache_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            dimension: 3,
            degree: 6,
            quad_order: 0,
            weight_k: 6.0,
            weight_p: 0,
            poly_degree: 0,
            r0: 0.3,
            a: 0.0,
            contour_nodes: 64,
            r_cut: 6.0,
            delta: 0.5,
            seed: 0,
            threads: 1,
            cache_dir: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<RunConfig, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| format!("invalid config: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.dimension != 2 && self.dimension != 3 {
            return Err(format!("dimension must be 2 or 3, got {}", self.dimension));
        }
        if self.degree < 2 {
            return Err(format!("degree must be at least 2, got {}", self.degree));
        }
        if self.weight_k <= k_star() {
            return Err(format!(
                "weight k = {} must exceed k_* = {:.6}",
                self.weight_k,
                k_star()
            ));
        }
        if self.r0 <= 0.0 {
            return Err("r0 must be positive".into());
        }
        if self.a < 0.0 {
            return Err("a must be nonnegative (0 selects the default)".into());
        }
        if self.contour_nodes < 16 {
            return Err("contour_nodes must be at least 16".into());
        }
        if self.r_cut <= 0.0 || self.delta <= 0.0 {
            return Err("r_cut and delta must be positive".into());
        }
        Ok(())
    }

    pub fn effective_quad_order(&self) -> usize {
        if self.quad_order == 0 {
            self.degree + 4
        } else {
            self.quad_order
        }
    }

    pub fn effective_poly_degree(&self) -> usize {
        if self.poly_degree == 0 {
            self.degree + 2
        } else {
            self.poly_degree
        }
    }

    pub fn gaussian_spec(&self) -> BasisSpec {
        BasisSpec::gaussian(self.dimension, self.degree)
    }

    pub fn polynomial_spec(&self) -> BasisSpec {
        let n = self.effective_poly_degree();
        let p = if self.weight_p == 0 {
            BasisSpec::required_p(self.dimension, n, self.weight_k)
        } else {
            self.weight_p
        };
        BasisSpec::polynomial(self.dimension, n, self.weight_k, p)
    }

    /// Validates that the requested frequency has the configured dimension.
    pub fn check_xi(&self, xi: &[f64]) -> Result<(), String> {
        if xi.len() != self.dimension {
            return Err(format!(
                "frequency has {} components but the configured dimension is {}",
                xi.len(),
                self.dimension
            ));
        }
        Ok(())
    }
}

/// Parses "a,b,c" into a vector.
pub fn parse_vector(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad number {p:?}: {e}")))
        .collect()
}

/// Parses "lo:hi:steps" into a uniform grid.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid {s:?} is not of the form lo:hi:steps"));
    }
    let lo: f64 = parts[0].parse().map_err(|e| format!("bad grid start: {e}"))?;
    let hi: f64 = parts[1].parse().map_err(|e| format!("bad grid end: {e}"))?;
    let steps: usize = parts[2].parse().map_err(|e| format!("bad step count: {e}"))?;
    if steps < 1 || hi < lo {
        return Err("grid needs hi >= lo and at least one step".into());
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect())
}
