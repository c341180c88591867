use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use btprop_core::construction::TreeBuilder;
use btprop_core::estimation::{estimate_emission, LabeledScore};
use btprop_core::evaluation::{evaluate, load_dataset, parse_predictions, predictions_to_jsonl};
use btprop_core::hmt::{
    brute_force_posterior, posterior_root, EmissionTable, TransitionParams, MAX_ORACLE_NODES,
};
use btprop_core::io::write_atomic;
use btprop_core::pipeline::Detector;
use btprop_core::prompts::PromptCatalog;
use btprop_core::providers::{
    CachedProvider, FixtureStore, LlmProvider, NliProvider, OpenAiCompatible, OpenAiConfig,
    PromptNli, ProviderIdentity, RemoteNli, ReplayProvider, ScriptedProvider, ScriptedWorld,
};
use btprop_core::tree::{BeliefTree, Statement};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{InferenceArgs, ProviderArgs, ProviderKind, RunConfig};
use crate::error::CliError;
use crate::{Cli, Command};

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Construct {
            input,
            out_dir,
            provider,
        } => {
            let cfg = RunConfig::resolve(config, &provider, &InferenceArgs::default())?;
            construct(&cfg, &input, &out_dir)
        }
        Command::Infer {
            trees,
            out,
            inference,
        } => {
            let cfg = RunConfig::resolve(config, &ProviderArgs::default(), &inference)?;
            infer(&cfg, &trees, out.as_deref())
        }
        Command::Detect {
            dataset,
            out,
            report,
            keep_trees,
            decontextualize,
            provider,
            inference,
        } => {
            let cfg = RunConfig::resolve(config, &provider, &inference)?;
            detect(
                &cfg,
                &dataset,
                &out,
                report.as_deref(),
                keep_trees,
                decontextualize,
            )
        }
        Command::EstimateEmission {
            input,
            out,
            smoothing,
            correction_true,
            correction_false,
        } => estimate(
            &input,
            out.as_deref(),
            smoothing,
            correction_true,
            correction_false,
        ),
        Command::Evaluate {
            predictions,
            dataset,
            out,
        } => {
            let text = read(&predictions)?;
            let predictions = parse_predictions(&text)?;
            let records = load_dataset(&dataset)?;
            emit(out.as_deref(), &evaluate(&predictions, &records)?.to_json())
        }
        Command::OracleCheck {
            trees,
            tolerance,
            inference,
        } => {
            let cfg = RunConfig::resolve(config, &ProviderArgs::default(), &inference)?;
            oracle_check(&cfg, &trees, tolerance)
        }
        Command::ExportDot { tree, out } => emit(out.as_deref(), &load_tree(&tree)?.to_dot()),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, text.as_bytes()).map_err(|e| CliError::io(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_tree(path: &Path) -> Result<BeliefTree, CliError> {
    BeliefTree::from_canonical_str(&read(path)?).map_err(|source| CliError::TreeParse {
        path: path.display().to_string(),
        source,
    })
}

/// Record ids become file names, so they are restricted to a safe alphabet.
fn tree_file_name(id: &str) -> Result<String, CliError> {
    let safe = !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if !safe {
        return Err(CliError::Config(format!(
            "record id {id:?} cannot be used as a file name"
        )));
    }
    Ok(format!("{id}.tree.json"))
}

fn emission_table(cfg: &RunConfig) -> Result<EmissionTable, CliError> {
    match &cfg.inference.emission {
        Some(path) => EmissionTable::load(path).map_err(|source| CliError::Inference {
            path: path.display().to_string(),
            source,
        }),
        None => Ok(EmissionTable::default()),
    }
}

fn transition(cfg: &RunConfig) -> Result<TransitionParams, CliError> {
    TransitionParams::from_p_t(cfg.inference.p_t).map_err(|source| CliError::Inference {
        path: "--pt".into(),
        source,
    })
}

fn cached<P: LlmProvider + 'static>(provider: P, cache: Option<&Path>) -> Arc<dyn LlmProvider> {
    match cache {
        Some(dir) => Arc::new(CachedProvider::new(provider, FixtureStore::new(dir))),
        None => Arc::new(provider),
    }
}

fn builder(cfg: &RunConfig) -> Result<TreeBuilder, CliError> {
    let settings = &cfg.provider;
    let model = settings.model.clone().ok_or_else(|| {
        CliError::Config("a model id is required (--model, BTPROP_MODEL or provider.model)".into())
    })?;
    let llm: Arc<dyn LlmProvider> =
        match settings.kind {
            ProviderKind::Replay => {
                let dir = settings.fixtures.clone().ok_or_else(|| {
                    CliError::Config("the replay provider needs --fixtures".into())
                })?;
                if !dir.is_dir() {
                    return Err(CliError::io(&dir, "fixture directory does not exist"));
                }
                Arc::new(ReplayProvider::new(
                    FixtureStore::new(dir),
                    ProviderIdentity::new(settings.replay_backend.clone(), model),
                ))
            }
            ProviderKind::OpenaiCompatible => {
                let base_url = settings.base_url.clone().ok_or_else(|| {
                    CliError::Config("the openai-compatible provider needs --base-url".into())
                })?;
                let mut config = OpenAiConfig::new(base_url, model);
                config.key_env = settings.key_env.clone();
                config.seed = settings.seed;
                cached(OpenAiCompatible::new(config)?, settings.cache.as_deref())
            }
            ProviderKind::Scripted => {
                let path = settings.script.as_deref().ok_or_else(|| {
                    CliError::Config("the scripted provider needs --script".into())
                })?;
                let world =
                    ScriptedWorld::from_json(&read(path)?).map_err(|e| CliError::io(path, e))?;
                cached(
                    ScriptedProvider::new(world, ProviderIdentity::new("scripted", model)),
                    settings.cache.as_deref(),
                )
            }
        };
    let catalog = Arc::new(match &settings.prompts {
        Some(dir) => PromptCatalog::load_dir(dir)?,
        None => PromptCatalog::builtin(),
    });
    let nli: Arc<dyn NliProvider> = match &settings.nli_url {
        Some(url) => Arc::new(RemoteNli::new(url.clone(), Duration::from_secs(60))?),
        None => Arc::new(PromptNli::new(Arc::clone(&llm), Arc::clone(&catalog))),
    };
    Ok(TreeBuilder::new(
        llm,
        nli,
        catalog,
        cfg.construction.clone(),
    )?)
}

#[derive(Deserialize)]
struct StatementLine {
    id: String,
    statement: String,
}

fn construct(cfg: &RunConfig, input: &Path, out_dir: &Path) -> Result<(), CliError> {
    let text = read(input)?;
    let mut lines = Vec::new();
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let parsed: StatementLine = serde_json::from_str(line)
            .map_err(|e| CliError::Config(format!("{}:{}: {e}", input.display(), i + 1)))?;
        tree_file_name(&parsed.id)?;
        lines.push(parsed);
    }
    let builder = builder(cfg)?;
    let trees: Vec<Result<BeliefTree, CliError>> = builder.install(|| {
        lines
            .par_iter()
            .map(|l| {
                builder
                    .build(Statement::with_source(&l.statement, &l.id))
                    .map_err(CliError::from)
            })
            .collect()
    });
    for (line, tree) in lines.iter().zip(trees) {
        write(
            &out_dir.join(tree_file_name(&line.id)?),
            &tree?.to_canonical_string(),
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct InferRecord<'a> {
    tree: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    source_id: Option<&'a str>,
    posterior_true: f64,
    detection_score: f64,
    log_beta_true: f64,
    log_beta_false: f64,
}

fn infer(cfg: &RunConfig, paths: &[PathBuf], out: Option<&Path>) -> Result<(), CliError> {
    let table = emission_table(cfg)?;
    let params = transition(cfg)?;
    let mut output = String::new();
    for path in paths {
        let tree = load_tree(path)?;
        let result =
            posterior_root(&tree, &table, &params, cfg.inference.prior).map_err(|source| {
                CliError::Inference {
                    path: path.display().to_string(),
                    source,
                }
            })?;
        let root = result.per_node_beta[&tree.root_id()];
        let record = InferRecord {
            tree: path.display().to_string(),
            source_id: tree.root().statement.source_id.as_deref(),
            posterior_true: result.posterior_true,
            detection_score: 1.0 - result.posterior_true,
            log_beta_true: root.log_true,
            log_beta_false: root.log_false,
        };
        output.push_str(&serde_json::to_string(&record).expect("record serializes"));
        output.push('\n');
    }
    emit(out, &output)
}

fn detect(
    cfg: &RunConfig,
    dataset: &Path,
    out: &Path,
    report: Option<&Path>,
    keep_trees: bool,
    decontextualize: bool,
) -> Result<(), CliError> {
    let records = load_dataset(dataset)?;
    if keep_trees {
        for record in &records {
            tree_file_name(&record.id)?;
        }
    }
    let table = emission_table(cfg)?;
    let builder = builder(cfg)?;
    let detector = Detector {
        builder: &builder,
        table: &table,
        transition: transition(cfg)?,
        prior_true: cfg.inference.prior,
        decontextualize,
    };
    let detections = detector.detect_all(&records)?;
    let predictions: Vec<_> = detections.iter().map(|d| d.prediction.clone()).collect();
    if keep_trees {
        let dir = out.parent().unwrap_or(Path::new(".")).join("trees");
        for (record, detection) in records.iter().zip(&detections) {
            write(
                &dir.join(tree_file_name(&record.id)?),
                &detection.tree.to_canonical_string(),
            )?;
        }
    }
    write(out, &predictions_to_jsonl(&predictions))?;
    if let Some(path) = report {
        write(path, &evaluate(&predictions, &records)?.to_json())?;
    }
    Ok(())
}

fn estimate(
    input: &Path,
    out: Option<&Path>,
    smoothing: f64,
    correction_true: Option<f64>,
    correction_false: Option<f64>,
) -> Result<(), CliError> {
    let text = read(input)?;
    let mut data = Vec::new();
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let item: LabeledScore = serde_json::from_str(line)
            .map_err(|e| CliError::Config(format!("{}:{}: {e}", input.display(), i + 1)))?;
        data.push(item);
    }
    let mut table = estimate_emission(&data, &btprop_core::hmt::DEFAULT_BIN_EDGES, smoothing)?;
    if correction_true.is_some() || correction_false.is_some() {
        table = EmissionTable::new(
            table.bin_edges().to_vec(),
            table.p_true().to_vec(),
            table.p_false().to_vec(),
            correction_true.unwrap_or(table.correction_true()),
            correction_false.unwrap_or(table.correction_false()),
        )
        .map_err(|e| CliError::Estimation(e.into()))?;
    }
    emit(out, &table.to_json())
}

fn oracle_check(cfg: &RunConfig, paths: &[PathBuf], tolerance: f64) -> Result<(), CliError> {
    let table = emission_table(cfg)?;
    let params = transition(cfg)?;
    let mut max_deviation: f64 = 0.0;
    let mut checked = 0usize;
    let mut skipped = Vec::new();
    for path in paths {
        let tree = load_tree(path)?;
        if tree.len() > MAX_ORACLE_NODES {
            skipped.push(path.display().to_string());
            continue;
        }
        let inference = |source| CliError::Inference {
            path: path.display().to_string(),
            source,
        };
        let bp = posterior_root(&tree, &table, &params, cfg.inference.prior).map_err(inference)?;
        let oracle = brute_force_posterior(&tree, &table, &params, cfg.inference.prior)
            .map_err(inference)?;
        max_deviation = max_deviation.max((bp.posterior_true - oracle).abs());
        checked += 1;
    }
    let summary = json!({
        "trees": paths.len(),
        "checked": checked,
        "skipped": skipped,
        "max_deviation": max_deviation,
        "tolerance": tolerance,
    });
    println!("{summary}");
    if max_deviation > tolerance {
        return Err(CliError::OracleDeviation {
            max_deviation,
            tolerance,
        });
    }
    Ok(())
}
