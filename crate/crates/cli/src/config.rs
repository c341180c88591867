//! Run configuration: command-line flags over environment variables over
//! an optional TOML file. Clap resolves the first two; the file fills in
//! whatever is still unset.

use std::path::{Path, PathBuf};

use btprop_core::construction::ConstructionConfig;
use btprop_core::prompts::PromptVariant;
use btprop_core::providers::DEFAULT_KEY_ENV;
use clap::{Args, ValueEnum};
use serde::Deserialize;

use crate::error::CliError;

/// Backend name of the live provider, which replay assumes by default.
pub const DEFAULT_REPLAY_BACKEND: &str = "openai-compatible";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    OpenaiCompatible,
    Replay,
    /// Canned answers from a JSON script; for demos and fixture generation.
    Scripted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Gpt,
    Llama,
}

impl From<VariantArg> for PromptVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Gpt => PromptVariant::Gpt,
            VariantArg::Llama => PromptVariant::Llama,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ProviderArgs {
    #[arg(long, value_enum, env = "BTPROP_PROVIDER")]
    pub provider: Option<ProviderKind>,
    #[arg(long, env = "BTPROP_BASE_URL")]
    pub base_url: Option<String>,
    #[arg(long, env = "BTPROP_MODEL")]
    pub model: Option<String>,
    /// Environment variable holding the bearer token.
    #[arg(long, env = "BTPROP_KEY_ENV")]
    pub key_env: Option<String>,
    /// Recorded fixtures for the replay provider.
    #[arg(long, env = "BTPROP_FIXTURES")]
    pub fixtures: Option<PathBuf>,
    /// Backend name the fixtures were recorded under.
    #[arg(long, env = "BTPROP_REPLAY_BACKEND")]
    pub replay_backend: Option<String>,
    /// Script file for the scripted provider.
    #[arg(long, env = "BTPROP_SCRIPT")]
    pub script: Option<PathBuf>,
    /// Response cache (and recorder) for the live provider.
    #[arg(long, env = "BTPROP_CACHE")]
    pub cache: Option<PathBuf>,
    /// Remote NLI endpoint; prompt-based NLI over the chat model otherwise.
    #[arg(long, env = "BTPROP_NLI_URL")]
    pub nli_url: Option<String>,
    /// Directory of `<template>.txt` prompt overrides.
    #[arg(long, env = "BTPROP_PROMPTS")]
    pub prompts: Option<PathBuf>,
    #[arg(long, value_enum, env = "BTPROP_PROMPT_VARIANT")]
    pub prompt_variant: Option<VariantArg>,
    #[arg(long, env = "BTPROP_MAX_DEPTH")]
    pub max_depth: Option<u32>,
    #[arg(long, env = "BTPROP_PARALLELISM")]
    pub parallelism: Option<usize>,
    /// Forwarded to the backend for sampled calls.
    #[arg(long, env = "BTPROP_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct InferenceArgs {
    /// Emission table file; the built-in default table otherwise.
    #[arg(long, env = "BTPROP_EMISSION")]
    pub emission: Option<PathBuf>,
    #[arg(long, env = "BTPROP_PT")]
    pub pt: Option<f64>,
    #[arg(long, env = "BTPROP_PRIOR")]
    pub prior: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    provider: FileProvider,
    construction: Option<ConstructionConfig>,
    inference: FileInference,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileProvider {
    kind: Option<ProviderKind>,
    base_url: Option<String>,
    model: Option<String>,
    key_env: Option<String>,
    fixtures: Option<PathBuf>,
    replay_backend: Option<String>,
    script: Option<PathBuf>,
    cache: Option<PathBuf>,
    nli_url: Option<String>,
    prompts: Option<PathBuf>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileInference {
    emission: Option<PathBuf>,
    p_t: Option<f64>,
    prior: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ProviderSettings {
    pub kind: ProviderKind,
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub key_env: String,
    pub fixtures: Option<PathBuf>,
    pub replay_backend: String,
    pub script: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub nli_url: Option<String>,
    pub prompts: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct InferenceSettings {
    pub emission: Option<PathBuf>,
    pub p_t: f64,
    pub prior: f64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub provider: ProviderSettings,
    pub construction: ConstructionConfig,
    pub inference: InferenceSettings,
}

fn load_file(path: Option<&Path>) -> Result<(FileConfig, PathBuf), CliError> {
    let Some(path) = path else {
        return Ok((FileConfig::default(), PathBuf::new()));
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: FileConfig =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((file, base))
}

/// Paths in the config file are relative to the file itself.
fn rebase(base: &Path, path: Option<PathBuf>) -> Option<PathBuf> {
    path.map(|p| if p.is_absolute() { p } else { base.join(p) })
}

impl RunConfig {
    pub fn resolve(
        config: Option<&Path>,
        provider: &ProviderArgs,
        inference: &InferenceArgs,
    ) -> Result<Self, CliError> {
        let (file, base) = load_file(config)?;
        let fp = file.provider;
        let settings = ProviderSettings {
            kind: provider
                .provider
                .or(fp.kind)
                .unwrap_or(ProviderKind::OpenaiCompatible),
            base_url: provider.base_url.clone().or(fp.base_url),
            model: provider.model.clone().or(fp.model),
            key_env: provider
                .key_env
                .clone()
                .or(fp.key_env)
                .unwrap_or_else(|| DEFAULT_KEY_ENV.to_owned()),
            fixtures: provider.fixtures.clone().or(rebase(&base, fp.fixtures)),
            replay_backend: provider
                .replay_backend
                .clone()
                .or(fp.replay_backend)
                .unwrap_or_else(|| DEFAULT_REPLAY_BACKEND.to_owned()),
            script: provider.script.clone().or(rebase(&base, fp.script)),
            cache: provider.cache.clone().or(rebase(&base, fp.cache)),
            nli_url: provider.nli_url.clone().or(fp.nli_url),
            prompts: provider.prompts.clone().or(rebase(&base, fp.prompts)),
            seed: provider.seed.or(fp.seed),
        };

        let mut construction = file.construction.unwrap_or_default();
        if let Some(d) = provider.max_depth {
            construction.max_depth = d;
        }
        if let Some(p) = provider.parallelism {
            construction.parallelism = p;
        }
        if let Some(v) = provider.prompt_variant {
            construction.prompt_variant = v.into();
        }

        let fi = file.inference;
        let inference = InferenceSettings {
            emission: inference.emission.clone().or(rebase(&base, fi.emission)),
            p_t: inference.pt.or(fi.p_t).unwrap_or(0.5),
            prior: inference.prior.or(fi.prior).unwrap_or(0.5),
        };
        Ok(Self {
            provider: settings,
            construction,
            inference,
        })
    }
}
