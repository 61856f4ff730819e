//! Pipeline configuration and defaults.

use crate::error::{Error, Result};
use crate::matching::{IcpParams, InitMode, MatchParams};

/// How clusters are associated after ICP scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssociationMode {
    /// Per-row argmin on distance; target reuse permitted.
    Argmin,
    /// One-to-one minimum-cost assignment.
    Hungarian,
}

/// All tunables of the estimation pipeline. Defaults follow the values the
/// pipeline was designed around; every field is exposed as a CLI flag.
#[derive(Debug, Clone, Copy)]
pub struct PipelineConfig {
    /// Ground removal: keep points with z above this (meters).
    pub z_threshold: f64,
    /// Density clustering neighborhood radius (meters).
    pub eps: f64,
    /// Neighbors (self included) required for a core point.
    pub min_samples: usize,
    /// Fused clusters smaller than this are noise.
    pub min_cluster_size: usize,
    /// Keep at most this many clusters, largest first.
    pub max_clusters: usize,
    /// Translation histogram bin edge length (meters).
    pub bin_size: f64,
    /// Fallback scan time difference when timestamps are absent (seconds).
    pub dt: f64,
    /// Fastest motion considered (m/s); search ranges τx = τy = cap · Δt.
    pub speed_cap: f64,
    /// Vertical translation search range (meters).
    pub tau_z: f64,
    /// Correspondence inlier threshold (meters).
    pub tau_inlier: f64,
    /// Association rejection threshold on mean distance d (meters).
    pub tau_d: f64,
    /// Association rejection threshold on inlier ratio r.
    pub tau_r: f64,
    /// ICP iteration cap.
    pub max_iters: usize,
    /// ICP convergence tolerance on RMS improvement (meters).
    pub convergence_tol: f64,
    pub association: AssociationMode,
    pub init: InitMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            z_threshold: 0.3,
            eps: 0.75,
            min_samples: 5,
            min_cluster_size: 20,
            max_clusters: 200,
            bin_size: 0.1,
            dt: 0.1,
            speed_cap: 33.3,
            tau_z: 0.1,
            tau_inlier: 0.1,
            tau_d: 0.2,
            tau_r: 0.2,
            max_iters: 100,
            convergence_tol: 1e-4,
            association: AssociationMode::Argmin,
            init: InitMode::Histogram,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("z-threshold", self.z_threshold),
            ("eps", self.eps),
            ("bin-size", self.bin_size),
            ("dt", self.dt),
            ("speed-cap", self.speed_cap),
            ("tau-z", self.tau_z),
            ("tau-inlier", self.tau_inlier),
            ("tau-d", self.tau_d),
            ("tau-r", self.tau_r),
            ("convergence-tol", self.convergence_tol),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if self.min_samples == 0 {
            return Err(Error::InvalidConfig("min-samples must be at least 1".into()));
        }
        if self.min_cluster_size == 0 {
            return Err(Error::InvalidConfig(
                "min-cluster-size must be at least 1".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max-iters must be at least 1".into()));
        }
        Ok(())
    }

    /// Horizontal search range for a given scan gap: speed_cap · Δt.
    pub fn tau_xy(&self, dt: f64) -> f64 {
        self.speed_cap * dt
    }

    pub fn match_params(&self, dt: f64) -> MatchParams {
        MatchParams {
            tau_x: self.tau_xy(dt),
            tau_y: self.tau_xy(dt),
            tau_z: self.tau_z,
            bin_size: self.bin_size,
            init: self.init,
            icp: IcpParams {
                max_iters: self.max_iters,
                convergence_tol: self.convergence_tol,
                tau_inlier: self.tau_inlier,
            },
        }
    }

    /// The fully resolved configuration as stable `key=value` lines.
    pub fn dump(&self) -> String {
        let association = match self.association {
            AssociationMode::Argmin => "argmin",
            AssociationMode::Hungarian => "hungarian",
        };
        let init = match self.init {
            InitMode::Histogram => "histogram",
            InitMode::Centroid => "centroid",
            InitMode::None => "none",
        };
        format!(
            "z_threshold={}\neps={}\nmin_samples={}\nmin_cluster_size={}\nmax_clusters={}\n\
             bin_size={}\ndt={}\nspeed_cap={}\ntau_z={}\ntau_inlier={}\ntau_d={}\ntau_r={}\n\
             max_iters={}\nconvergence_tol={}\nassociation={}\ninit={}\n",
            self.z_threshold,
            self.eps,
            self.min_samples,
            self.min_cluster_size,
            self.max_clusters,
            self.bin_size,
            self.dt,
            self.speed_cap,
            self.tau_z,
            self.tau_inlier,
            self.tau_d,
            self.tau_r,
            self.max_iters,
            self.convergence_tol,
            association,
            init,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn search_range_scales_linearly_with_dt() {
        let cfg = PipelineConfig::default();
        assert!((cfg.tau_xy(0.1) - 3.33).abs() < 1e-12);
        assert!((cfg.tau_xy(0.4) - 13.32).abs() < 1e-12);
    }

    #[test]
    fn invalid_values_are_rejected() {
        let mut cfg = PipelineConfig::default();
        cfg.eps = 0.0;
        assert!(cfg.validate().is_err());

        let mut cfg = PipelineConfig::default();
        cfg.tau_d = f64::NAN;
        assert!(cfg.validate().is_err());

        let mut cfg = PipelineConfig::default();
        cfg.min_cluster_size = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn dump_is_stable() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.dump(), cfg.dump());
        assert!(cfg.dump().contains("tau_d=0.2"));
        assert!(cfg.dump().contains("association=argmin"));
    }
}
