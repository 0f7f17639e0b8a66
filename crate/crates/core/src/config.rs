//! Pipeline configuration, named profiles and the key-value config file.
//!
//! The file format is TOML with one key per [`PipelineConfig`] field. An
//! optional `profile = "kitti" | "katwijk"` key selects the base values that
//! the remaining keys override.

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::map::ClassId;

/// Size of a "most recent objects" window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Recent(usize),
    Unbounded,
}

impl Window {
    pub fn limit(self) -> usize {
        match self {
            Window::Recent(n) => n,
            Window::Unbounded => usize::MAX,
        }
    }

    fn doubled(self) -> Self {
        match self {
            Window::Recent(n) => Window::Recent(n.saturating_mul(2)),
            Window::Unbounded => Window::Unbounded,
        }
    }
}

impl Serialize for Window {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Window::Recent(n) => s.serialize_u64(*n as u64),
            Window::Unbounded => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Window {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Count(u64),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::Count(n) => Ok(Window::Recent(n as usize)),
            Repr::Word(w) if matches!(w.as_str(), "inf" | "all" | "unbounded") => {
                Ok(Window::Unbounded)
            }
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "expected a count or \"inf\", got `{w}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Kitti,
    Katwijk,
}

impl std::str::FromStr for Profile {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "kitti" => Ok(Profile::Kitti),
            "katwijk" => Ok(Profile::Katwijk),
            other => Err(ConfigError::UnknownProfile(other.to_string())),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("unknown profile `{0}`")]
    UnknownProfile(String),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Pairwise distance-consistency tolerance (m).
    pub epsilon: f64,
    /// Minimum inlier associations for global localization.
    pub tau_in: usize,
    /// RMSE acceptance threshold at zero distance traveled (m).
    pub tau_rmse_base: f64,
    /// Threshold growth per meter traveled.
    pub tau_rmse_growth: f64,
    /// Relative RMSE band, `0 < alpha < 1`.
    pub alpha: f64,
    /// Minimum RMSE change for a guided relocalization (m).
    pub delta: f64,
    /// Registration window.
    pub r: Window,
    /// Evaluation window for guided RMSE comparison.
    pub r_prime: Window,
    /// Number of reference submaps used during global search.
    pub k: usize,
    pub submap_overlap_fraction: f64,
    pub fusion_radius: f64,
    pub translation_similarity_base: f64,
    /// Degrees.
    pub rotation_similarity_base: f64,
    /// Meters of allowed translation change per meter traveled since the last accept.
    pub translation_similarity_growth: f64,
    /// Degrees of allowed rotation change per meter traveled since the last accept.
    pub rotation_similarity_growth: f64,
    /// Margin around the mapped vehicle window when restricting the reference map (m).
    pub restrict_margin: f64,
    /// Classes used for RMSE scoring; all classes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rmse_class_filter: Option<Vec<ClassId>>,
    /// Steps between registration attempts.
    pub registration_period: usize,
    /// Per-solve clique search time budget in milliseconds; unlimited when
    /// absent. A budget makes results depend on machine speed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clique_budget_ms: Option<u64>,
    /// Run submap registrations and graph construction on the rayon pool.
    pub parallel: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::kitti()
    }
}

impl PipelineConfig {
    /// Urban profile: dense parking-space/sign maps.
    pub fn kitti() -> Self {
        Self {
            epsilon: 2.5,
            tau_in: 12,
            tau_rmse_base: 6.0,
            tau_rmse_growth: 2.0 / 500.0,
            alpha: 0.1,
            delta: 0.25,
            r: Window::Recent(75),
            r_prime: Window::Recent(150),
            k: 4,
            submap_overlap_fraction: 0.0,
            fusion_radius: 1.0,
            translation_similarity_base: 10.0,
            rotation_similarity_base: 10.0,
            translation_similarity_growth: 0.01,
            rotation_similarity_growth: 0.01,
            restrict_margin: 50.0,
            rmse_class_filter: None,
            registration_period: 5,
            clique_budget_ms: None,
            parallel: true,
        }
    }

    /// Unstructured profile: sparse rock maps, no window restriction.
    pub fn katwijk() -> Self {
        Self {
            epsilon: 1.5,
            tau_in: 8,
            tau_rmse_base: 2.0,
            r: Window::Unbounded,
            r_prime: Window::Unbounded,
            ..Self::kitti()
        }
    }

    pub fn profile(profile: Profile) -> Self {
        match profile {
            Profile::Kitti => Self::kitti(),
            Profile::Katwijk => Self::katwijk(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError::Invalid(msg.to_string()));
        let finite = [
            self.epsilon,
            self.tau_rmse_base,
            self.tau_rmse_growth,
            self.alpha,
            self.delta,
            self.submap_overlap_fraction,
            self.fusion_radius,
            self.translation_similarity_base,
            self.rotation_similarity_base,
            self.translation_similarity_growth,
            self.rotation_similarity_growth,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("numeric parameters must be finite");
        }
        if self.epsilon <= 0.0 {
            return bad("epsilon must be > 0");
        }
        if self.tau_in < 3 {
            return bad("tau_in must be >= 3");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if self.r.limit() < self.tau_in {
            return bad("r must be >= tau_in");
        }
        if self.r_prime.limit() < self.r.limit() {
            return bad("r_prime must be >= r");
        }
        if self.k == 0 {
            return bad("k must be >= 1");
        }
        if !(0.0..1.0).contains(&self.submap_overlap_fraction) {
            return bad("submap_overlap_fraction must lie in [0, 1)");
        }
        if self.tau_rmse_base < 0.0 || self.tau_rmse_growth < 0.0 || self.delta < 0.0 {
            return bad("RMSE thresholds must be nonnegative");
        }
        if self.fusion_radius < 0.0 || self.restrict_margin < 0.0 {
            return bad("radii and margins must be nonnegative");
        }
        if self.registration_period == 0 {
            return bad("registration_period must be >= 1");
        }
        Ok(())
    }

    /// Parses a config document. `profile` overrides any `profile` key inside
    /// the document.
    pub fn from_toml_str(text: &str, profile: Option<Profile>) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let in_file = match table.remove("profile") {
            Some(toml::Value::String(s)) => Some(s.parse::<Profile>()?),
            Some(other) => {
                return Err(ConfigError::Parse(format!(
                    "profile must be a string, got {other}"
                )))
            }
            None => None,
        };
        let base = Self::profile(profile.or(in_file).unwrap_or(Profile::Kitti));
        let mut merged = toml::Table::try_from(&base)
            .map_err(|e| ConfigError::Parse(e.to_string()))?;
        let r_given = table.contains_key("r");
        let r_prime_given = table.contains_key("r_prime");
        merged.extend(table);
        let mut cfg: PipelineConfig = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        if r_given && !r_prime_given {
            cfg.r_prime = cfg.r.doubled();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, profile: Option<Profile>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, profile)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        PipelineConfig::kitti().validate().unwrap();
        PipelineConfig::katwijk().validate().unwrap();
        assert_eq!(PipelineConfig::kitti().r_prime, Window::Recent(150));
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut c = PipelineConfig::kitti();
        c.alpha = 1.0;
        assert!(c.validate().is_err());
        let mut c = PipelineConfig::kitti();
        c.tau_in = 2;
        assert!(c.validate().is_err());
        let mut c = PipelineConfig::kitti();
        c.r_prime = Window::Recent(10);
        assert!(c.validate().is_err());
        let mut c = PipelineConfig::kitti();
        c.epsilon = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn file_overrides_profile() {
        let cfg = PipelineConfig::from_toml_str("profile = \"katwijk\"\ntau_in = 6\n", None).unwrap();
        assert_eq!(cfg.tau_in, 6);
        assert_eq!(cfg.epsilon, 1.5);
        assert_eq!(cfg.r, Window::Unbounded);

        let cfg = PipelineConfig::from_toml_str("r = 40", None).unwrap();
        assert_eq!(cfg.r_prime, Window::Recent(80));

        let cfg =
            PipelineConfig::from_toml_str("profile = \"katwijk\"", Some(Profile::Kitti)).unwrap();
        assert_eq!(cfg.epsilon, 2.5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(PipelineConfig::from_toml_str("epsilom = 2.0", None).is_err());
        assert!(PipelineConfig::from_toml_str("profile = \"mars\"", None).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = PipelineConfig::katwijk();
        cfg.rmse_class_filter = Some(vec![ClassId(0)]);
        let back = PipelineConfig::from_toml_str(&cfg.to_toml_string(), None).unwrap();
        assert_eq!(cfg, back);
    }
}
