//! Optional TOML config file and its merge with flags and environment.
//!
//! Precedence: command-line flags, then the config file, then environment
//! variables, then built-in defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use atlas_core::gateway::{ProviderConfig, ProviderKind};
use atlas_core::reduce::{Metric, ReducerParams};

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub provider: Option<String>,
    pub seed: Option<u64>,
    pub port: Option<u16>,
    pub host: Option<String>,
    pub artifacts: Option<PathBuf>,
    #[serde(default)]
    pub gateway: GatewaySection,
    #[serde(default)]
    pub reducer: ReducerSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewaySection {
    pub endpoint: Option<String>,
    pub embed_model: Option<String>,
    pub chat_model: Option<String>,
    pub max_concurrency: Option<usize>,
    pub retry_limit: Option<u32>,
    pub dimension: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducerSection {
    pub n_neighbors: Option<usize>,
    pub min_dist: Option<f64>,
    pub spread: Option<f64>,
    pub n_epochs: Option<usize>,
    pub negative_sample_rate: Option<usize>,
    pub metric: Option<String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Provider settings. The provider kind comes only from the flag or the
    /// config file, never from `LL_PROVIDER`, so a stray environment
    /// variable cannot switch a run to the paid remote API.
    pub fn provider(&self, flag: Option<&str>) -> Result<ProviderConfig, CliError> {
        let env = ProviderConfig::mock().with_env_settings(|k| std::env::var(k).ok());
        let kind: ProviderKind = flag
            .or(self.provider.as_deref())
            .unwrap_or("mock")
            .parse()
            .map_err(|e| CliError::Usage(format!("{e}")))?;
        let g = &self.gateway;
        let mut cfg = ProviderConfig {
            kind,
            endpoint: g.endpoint.clone().or(env.endpoint),
            api_key: env.api_key,
            embed_model: g.embed_model.clone().unwrap_or(env.embed_model),
            chat_model: g.chat_model.clone().unwrap_or(env.chat_model),
            max_concurrency: g.max_concurrency.unwrap_or(env.max_concurrency),
            retry_limit: g.retry_limit.unwrap_or(env.retry_limit),
            dimension: g.dimension.unwrap_or(env.dimension),
            retry_base: env.retry_base,
        };
        if kind == ProviderKind::Remote && cfg.endpoint.is_none() {
            cfg.endpoint = Some(atlas_core::gateway::DEFAULT_ENDPOINT.to_string());
        }
        if kind == ProviderKind::Mock {
            cfg.retry_base = std::time::Duration::ZERO;
        }
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn reducer(&self, seed_flag: Option<u64>) -> Result<ReducerParams, CliError> {
        let r = &self.reducer;
        let d = ReducerParams::default();
        let metric = match &r.metric {
            Some(m) => m.parse::<Metric>().map_err(|e| CliError::Usage(e.to_string()))?,
            None => d.metric,
        };
        Ok(ReducerParams {
            n_neighbors: r.n_neighbors.unwrap_or(d.n_neighbors),
            min_dist: r.min_dist.unwrap_or(d.min_dist),
            spread: r.spread.unwrap_or(d.spread),
            n_epochs: r.n_epochs.or(d.n_epochs),
            negative_sample_rate: r.negative_sample_rate.unwrap_or(d.negative_sample_rate),
            metric,
            seed: seed_flag.or(self.seed).unwrap_or(d.seed),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_file() {
        let cfg: FileConfig = toml::from_str(
            r#"
            provider = "mock"
            seed = 7
            port = 9000
            [gateway]
            max_concurrency = 2
            [reducer]
            n_neighbors = 5
            metric = "euclidean"
            "#,
        )
        .unwrap();
        let r = cfg.reducer(None).unwrap();
        assert_eq!((r.seed, r.n_neighbors, r.metric), (7, 5, Metric::Euclidean));
        assert_eq!(cfg.reducer(Some(1)).unwrap().seed, 1);
        assert_eq!(cfg.provider(None).unwrap().max_concurrency, 2);
        assert_eq!(cfg.port, Some(9000));
    }

    #[test]
    fn flag_beats_file() {
        let cfg = FileConfig {
            provider: Some("remote".into()),
            ..FileConfig::default()
        };
        assert_eq!(cfg.provider(Some("mock")).unwrap().kind, ProviderKind::Mock);
        // Remote is selected, then rejected for lack of an api key.
        let err = cfg.provider(None).unwrap_err();
        assert!(err.to_string().contains("api key"), "{err}");
    }

    #[test]
    fn defaults_to_mock() {
        assert_eq!(FileConfig::default().provider(None).unwrap().kind, ProviderKind::Mock);
    }

    #[test]
    fn rejects_unknown_keys_and_values() {
        assert!(toml::from_str::<FileConfig>("colour = 1").is_err());
        assert!(FileConfig::default().provider(Some("carrier-pigeon")).is_err());
        let bad_metric = FileConfig {
            reducer: ReducerSection {
                metric: Some("manhattan".into()),
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(bad_metric.reducer(None).is_err());
    }
}
