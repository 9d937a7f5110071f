//! Experiment configuration: TOML sections with fixed keys, defaults for
//! everything except the fading block, and resolution into library types.

use serde::{Deserialize, Serialize};

use leocov::coverage::KappaRule;
use leocov::geometry::{density_for_mean_visible, to_ring, RingGeometry, SphereGeometry, DEFAULT_EARTH_RADIUS_KM};
use leocov::interference::RadioParams;
use leocov::montecarlo::{SampleMode, DEFAULT_BIN_HALF_WIDTH};
use leocov::special::FadingParams;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub geometry: GeometryBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fading: Option<FadingBlock>,
    #[serde(default)]
    pub radio: RadioBlock,
    #[serde(default)]
    pub network: NetworkBlock,
    #[serde(default)]
    pub run: RunBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryBlock {
    pub earth_radius_km: f64,
    /// Orbit altitude `R_S - R_E`.
    pub altitude_km: f64,
    /// Height of the visibility plane above the ground station, `h_E`.
    pub visibility_altitude_km: f64,
}

impl Default for GeometryBlock {
    fn default() -> Self {
        Self {
            earth_radius_km: DEFAULT_EARTH_RADIUS_KM,
            altitude_km: 500.0,
            visibility_altitude_km: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadingBlock {
    pub m: u32,
    pub b: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioBlock {
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
    pub g0_dbi: f64,
    /// Omitted means a receive array matched to the transmitter, `G0 + 10 log10(N_t)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grx_main_dbi: Option<f64>,
    pub carrier_hz: f64,
    pub gbar: f64,
    pub alpha: f64,
}

impl Default for RadioBlock {
    fn default() -> Self {
        let r = RadioParams::default();
        Self {
            tx_power_dbm: r.tx_power_dbm,
            noise_psd_dbm_hz: r.noise_psd_dbm_hz,
            bandwidth_hz: r.bandwidth_hz,
            g0_dbi: r.g0_dbi,
            grx_main_dbi: r.grx_main_dbi,
            carrier_hz: r.carrier_hz,
            gbar: r.gbar,
            alpha: r.alpha,
        }
    }
}

/// A single value or a list of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkBlock {
    /// Mean number of visible satellites, `lambda |A|`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_visible: Option<f64>,
    /// Satellites per km^2 of the orbital shell; alternative to `mean_visible`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_per_km2: Option<f64>,
    pub n_t: OneOrMany<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<OneOrMany<u32>>,
    /// Inclusive cluster-size window for the optimal-K sweep.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_range: Option<[u32; 2]>,
}

impl Default for NetworkBlock {
    fn default() -> Self {
        Self {
            mean_visible: None,
            density_per_km2: None,
            n_t: OneOrMany::One(8),
            k: None,
            k_range: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerChoice {
    Ring,
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunBlock {
    pub gamma_db: Vec<f64>,
    pub delta: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub mode: SamplerChoice,
    /// `"alzer"`, `"unit"`, or a blend weight in `[0, 1]` (1 is Alzer).
    pub kappa: KappaChoice,
    /// Slack added to the MC half-width when judging agreement.
    pub allowance: f64,
    pub bin_half_width: f64,
}

impl Default for RunBlock {
    fn default() -> Self {
        Self {
            gamma_db: (0..7).map(|i| -10.0 + 5.0 * i as f64).collect(),
            delta: Vec::new(),
            trials: 100_000,
            seed: 1,
            mode: SamplerChoice::Ring,
            kappa: KappaChoice::Named("alzer".into()),
            allowance: 0.015,
            bin_half_width: DEFAULT_BIN_HALF_WIDTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaChoice {
    Named(String),
    Blend(f64),
}

impl KappaChoice {
    pub fn parse(s: &str) -> Self {
        match s.parse::<f64>() {
            Ok(t) => KappaChoice::Blend(t),
            Err(_) => KappaChoice::Named(s.to_string()),
        }
    }

    pub fn rule(&self) -> Result<KappaRule, CliError> {
        let rule = match self {
            KappaChoice::Named(n) if n == "alzer" => KappaRule::Alzer,
            KappaChoice::Named(n) if n == "unit" => KappaRule::Unit,
            KappaChoice::Named(n) => {
                return Err(CliError::config(format!(
                    "run.kappa: expected \"alzer\", \"unit\" or a number in [0, 1], got {n:?}"
                )))
            }
            KappaChoice::Blend(t) => KappaRule::Blend(*t),
        };
        rule.validate().map_err(|e| CliError::config(format!("run.kappa: {e}")))?;
        Ok(rule)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(format!("config: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical TOML with every default filled in.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    pub fn sphere(&self) -> Result<SphereGeometry, CliError> {
        let g = &self.geometry;
        SphereGeometry::new(g.earth_radius_km, g.earth_radius_km + g.altitude_km, g.visibility_altitude_km)
            .map_err(|e| CliError::config(format!("geometry: {e}")))
    }

    pub fn fading(&self) -> Result<FadingParams, CliError> {
        let f = self
            .fading
            .as_ref()
            .ok_or_else(|| CliError::config("missing [fading] block: m, b and omega are required"))?;
        FadingParams::new(f.m, f.b, f.omega).map_err(|e| CliError::config(format!("fading: {e}")))
    }

    pub fn radio(&self) -> Result<RadioParams, CliError> {
        let r = &self.radio;
        if let Some(g) = r.grx_main_dbi {
            if !g.is_finite() {
                return Err(CliError::config("radio.grx_main_dbi: must be finite"));
            }
        }
        for (name, v) in [
            ("radio.tx_power_dbm", r.tx_power_dbm),
            ("radio.noise_psd_dbm_hz", r.noise_psd_dbm_hz),
            ("radio.g0_dbi", r.g0_dbi),
        ] {
            if !v.is_finite() {
                return Err(CliError::config(format!("{name}: must be finite")));
            }
        }
        let radio = RadioParams {
            tx_power_dbm: r.tx_power_dbm,
            noise_psd_dbm_hz: r.noise_psd_dbm_hz,
            bandwidth_hz: r.bandwidth_hz,
            g0_dbi: r.g0_dbi,
            grx_main_dbi: r.grx_main_dbi,
            carrier_hz: r.carrier_hz,
            gbar: r.gbar,
            alpha: r.alpha,
        };
        // a budget with one antenna and no coordination exercises every check
        radio.budget(1, 1).map_err(|e| CliError::config(format!("radio: {e}")))?;
        Ok(radio)
    }

    /// Shell density `lambda` from either `mean_visible` or `density_per_km2`.
    pub fn density(&self) -> Result<f64, CliError> {
        let n = &self.network;
        match (n.mean_visible, n.density_per_km2) {
            (Some(_), Some(_)) => Err(CliError::config(
                "network: give either mean_visible or density_per_km2, not both",
            )),
            (Some(mu), None) => {
                if !(mu > 0.0 && mu.is_finite()) {
                    return Err(CliError::config(format!("network.mean_visible: must be positive, got {mu}")));
                }
                Ok(density_for_mean_visible(&self.sphere()?, mu))
            }
            (None, Some(l)) => {
                if !(l > 0.0 && l.is_finite()) {
                    return Err(CliError::config(format!("network.density_per_km2: must be positive, got {l}")));
                }
                Ok(l)
            }
            (None, None) => Err(CliError::config("network.mean_visible: required (or network.density_per_km2)")),
        }
    }

    pub fn ring(&self) -> Result<(f64, RingGeometry), CliError> {
        let lambda = self.density()?;
        let ring = to_ring(&self.sphere()?, lambda).map_err(|e| CliError::config(format!("network: {e}")))?;
        Ok((lambda, ring))
    }

    pub fn n_t_list(&self) -> Result<Vec<u32>, CliError> {
        let v = self.network.n_t.to_vec();
        if v.is_empty() || v.contains(&0) {
            return Err(CliError::config("network.n_t: need one or more positive antenna counts"));
        }
        Ok(v)
    }

    /// The single antenna count used by coverage-type commands.
    pub fn n_t(&self) -> Result<u32, CliError> {
        match self.n_t_list()?.as_slice() {
            [n] => Ok(*n),
            _ => Err(CliError::config("network.n_t: this command takes a single value")),
        }
    }

    pub fn k_list(&self) -> Result<Vec<u32>, CliError> {
        let v = self
            .network
            .k
            .as_ref()
            .ok_or_else(|| CliError::config("network.k: required for this command"))?
            .to_vec();
        if v.is_empty() || v.contains(&0) {
            return Err(CliError::config("network.k: need one or more positive cluster sizes"));
        }
        Ok(v)
    }

    pub fn k(&self) -> Result<u32, CliError> {
        match self.k_list()?.as_slice() {
            [k] => Ok(*k),
            _ => Err(CliError::config("network.k: this command takes a single value")),
        }
    }

    pub fn gammas_db(&self) -> Result<Vec<f64>, CliError> {
        let g = &self.run.gamma_db;
        if g.is_empty() || g.iter().any(|x| !x.is_finite()) {
            return Err(CliError::config("run.gamma_db: need a non-empty list of finite values"));
        }
        Ok(g.clone())
    }

    pub fn sample_mode(&self) -> SampleMode {
        match self.run.mode {
            SamplerChoice::Ring => SampleMode::Ring,
            SamplerChoice::Sphere => SampleMode::Sphere,
        }
    }
}
