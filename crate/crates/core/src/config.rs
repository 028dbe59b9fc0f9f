//! Simulation configuration: every table parameter plus the model knobs,
//! loadable from a flat `key = value` file with CLI overrides on top.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelWeights;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}`: cannot parse `{value}`")]
    BadValue { key: String, value: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Maximum velocity, m/s.
    pub v_max: f64,
    /// Same-lane safety gap, m.
    pub d_safe: f64,
    /// Intersection separation distance (L1 sum of distances to center), m.
    pub s_dist: f64,
    /// Discretization step, s.
    pub dt: f64,
    /// Random step size L of the spawner.
    pub rand_step: u64,
    /// Horizon steps N.
    pub horizon: usize,
    /// Control region radius R, m.
    pub radius: f64,
    /// Simulation duration T, s.
    pub duration: f64,
    pub seed: u64,
    /// Lane-frame start coordinate (agents spawn here), m.
    pub lane_start: f64,
    /// Lane-frame end coordinate (trajectory logging stops here), m.
    pub lane_end: f64,
    /// Control input bounds, m/s^2.
    pub u_min: f64,
    pub u_max: f64,
    pub weights: ModelWeights,
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    pub max_nodes: u64,
    /// Per-tick solver time limit, s (none by default).
    pub time_limit: Option<f64>,
    /// Relative branch-and-bound gap: nodes within `mip_gap * |incumbent|`
    /// of the incumbent are pruned. Zero solves to exact optimality.
    pub mip_gap: f64,
    /// One crossing-order binary per pair instead of per-step sign binaries.
    pub fixed_crossing_order: bool,
    /// Platoon clustering threshold, s; default 2 * d_safe / v_max.
    pub headway_threshold: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            v_max: 15.0,
            d_safe: 3.0,
            s_dist: 4.0,
            dt: 0.1,
            rand_step: 3,
            horizon: 60,
            radius: 120.0,
            duration: 150.0,
            seed: 20,
            lane_start: -200.0,
            lane_end: 200.0,
            // Braking must be strong enough that a vehicle entering the
            // smallest control region (R=25) at v_max can stop behind a
            // queue that is itself held s_dist short of the center. The
            // entry stopping floor is -R + 1.5 + v_max^2/(2|u_min|); at
            // |u_min|=10 that is -13.25, leaving room for a queue head at
            // -s_dist plus two followers at d_safe spacing. Weaker braking
            // makes yields (and queueing) at R=25 structurally infeasible.
            u_min: -10.0,
            u_max: 3.0,
            weights: ModelWeights::default(),
            feasibility_tol: 1e-6,
            integrality_tol: 1e-5,
            max_nodes: 1_000_000,
            time_limit: None,
            mip_gap: 1e-6,
            fixed_crossing_order: false,
            headway_threshold: None,
        }
    }
}

impl SimConfig {
    pub fn n_ticks(&self) -> u64 {
        (self.duration / self.dt).round() as u64
    }

    /// Terminal target: just past the exit, at full speed.
    pub fn terminal_target(&self) -> (f64, f64) {
        (2.0 * self.radius * 1.2, self.v_max)
    }

    pub fn position_bound(&self) -> f64 {
        2.0 * self.radius + 50.0
    }

    pub fn headway_threshold_or_default(&self) -> f64 {
        self.headway_threshold.unwrap_or(2.0 * self.d_safe / self.v_max)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positives = [
            ("v_max", self.v_max),
            ("d_safe", self.d_safe),
            ("s_dist", self.s_dist),
            ("dt", self.dt),
            ("radius", self.radius),
            ("duration", self.duration),
            ("feasibility_tol", self.feasibility_tol),
            ("integrality_tol", self.integrality_tol),
            ("big_m", self.weights.big_m),
        ];
        for (name, v) in positives {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ConfigError::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.horizon < 2 {
            return Err(ConfigError::Invalid(format!("horizon must be >= 2, got {}", self.horizon)));
        }
        if self.rand_step < 1 {
            return Err(ConfigError::Invalid("rand_step must be >= 1".into()));
        }
        if self.lane_start >= 0.0 || self.lane_end <= 0.0 {
            return Err(ConfigError::Invalid(
                "lane_start must be negative and lane_end positive".into(),
            ));
        }
        if self.radius >= -self.lane_start {
            return Err(ConfigError::Invalid(format!(
                "radius {} must be smaller than |lane_start| {}",
                self.radius, -self.lane_start
            )));
        }
        if self.u_min >= self.u_max {
            return Err(ConfigError::Invalid(format!(
                "u_min {} must be below u_max {}",
                self.u_min, self.u_max
            )));
        }
        if self.u_max <= 0.0 {
            return Err(ConfigError::Invalid("u_max must be positive".into()));
        }
        let w = &self.weights;
        if w.qo.iter().chain(w.po.iter()).any(|&x| x < 0.0) || w.lambda_v < 0.0 {
            return Err(ConfigError::Invalid("weights must be non-negative".into()));
        }
        if !(self.mip_gap >= 0.0) {
            return Err(ConfigError::Invalid("mip_gap must be >= 0".into()));
        }
        if let Some(h) = self.headway_threshold {
            if h < 0.0 {
                return Err(ConfigError::Invalid("headway_threshold must be >= 0".into()));
            }
        }
        Ok(())
    }

    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value.trim().parse().map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: value.to_string(),
            })
        }
        match key {
            "v_max" => self.v_max = parse(key, value)?,
            "d_safe" => self.d_safe = parse(key, value)?,
            "s_dist" => self.s_dist = parse(key, value)?,
            "dt" => self.dt = parse(key, value)?,
            "rand_step" => self.rand_step = parse(key, value)?,
            "horizon" => self.horizon = parse(key, value)?,
            "radius" => self.radius = parse(key, value)?,
            "duration" => self.duration = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "lane_start" => self.lane_start = parse(key, value)?,
            "lane_end" => self.lane_end = parse(key, value)?,
            "u_min" => self.u_min = parse(key, value)?,
            "u_max" => self.u_max = parse(key, value)?,
            "qo_pos" => self.weights.qo[0] = parse(key, value)?,
            "qo_vel" => self.weights.qo[1] = parse(key, value)?,
            "po_pos" => self.weights.po[0] = parse(key, value)?,
            "po_vel" => self.weights.po[1] = parse(key, value)?,
            "lambda_v" => self.weights.lambda_v = parse(key, value)?,
            "big_m" => self.weights.big_m = parse(key, value)?,
            "feasibility_tol" => self.feasibility_tol = parse(key, value)?,
            "integrality_tol" => self.integrality_tol = parse(key, value)?,
            "max_nodes" => self.max_nodes = parse(key, value)?,
            "time_limit" => self.time_limit = Some(parse(key, value)?),
            "mip_gap" => self.mip_gap = parse(key, value)?,
            "fixed_crossing_order" => self.fixed_crossing_order = parse(key, value)?,
            "headway_threshold" => self.headway_threshold = Some(parse(key, value)?),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Parse a flat key=value config text (# starts a comment).
    pub fn from_str_config(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = SimConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Malformed { line: lineno + 1, text: raw.to_string() });
            };
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        Ok(Self::from_str_config(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SimConfig::default().validate().unwrap();
    }

    #[test]
    fn parse_and_override() {
        let cfg = SimConfig::from_str_config(
            "radius = 90 # early management\ns_dist=7\nseed = 99\nfixed_crossing_order = true\n",
        )
        .unwrap();
        assert_eq!(cfg.radius, 90.0);
        assert_eq!(cfg.s_dist, 7.0);
        assert_eq!(cfg.seed, 99);
        assert!(cfg.fixed_crossing_order);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = SimConfig::from_str_config("no_such_knob = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey(k) if k == "no_such_knob"));
    }

    #[test]
    fn invalid_radius_rejected() {
        let mut cfg = SimConfig::default();
        cfg.radius = 250.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn default_headway_threshold() {
        let cfg = SimConfig::default();
        assert!((cfg.headway_threshold_or_default() - 0.4).abs() < 1e-12);
    }
}
