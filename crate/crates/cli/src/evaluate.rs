//! `evaluate`: run the two-turn protocol over a prompt set.
//!
//! The responder is either a live chat-completions endpoint or a scripted
//! policy (for tests and offline work). The trial log is appended as
//! results arrive and rewritten in prompt order on completion, so an
//! interrupted run can be resumed by re-running the same command — already
//! completed trials are loaded from the log and skipped.

use crate::manifest::{sha256_file, write_atomic, RunManifest};
use crate::settings::Resolver;
use crate::CliError;
use clap::Args;
use neuroprobe::dataio::{read_jsonl, PromptRecord};
use neuroprobe::protocol::{
    run_evaluation, EndpointConfig, EvalRunConfig, Responder, ScriptedResponder,
};
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Args)]
pub struct EvaluateArgs {
    /// Identifier stamped on every trial and on the summary.
    #[arg(long)]
    pub model_id: String,

    /// Prompt set (JSONL, one record per line).
    #[arg(long)]
    pub prompts: PathBuf,

    /// Chat-completions base URL for a live run.
    #[arg(long, conflicts_with = "scripted")]
    pub endpoint: Option<String>,

    /// Scripted policy: "all-agree", "all-resist", "capitulate-at:<level>",
    /// or a path to a policy JSON file.
    #[arg(long)]
    pub scripted: Option<String>,

    /// Output directory (trial log, summary, manifest).
    #[arg(long)]
    pub out: PathBuf,

    /// Maximum trials in flight at once (capped by --threads).
    #[arg(long)]
    pub concurrency: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Name of the env var holding the endpoint bearer token.
    #[arg(long)]
    pub auth_env: Option<String>,

    /// Directory of image files referenced by the prompts; omitted means
    /// image references are sent as inline placeholders.
    #[arg(long)]
    pub image_root: Option<PathBuf>,
}

fn build_responder(
    args: &EvaluateArgs,
    resolver: &Resolver,
) -> Result<(Box<dyn Responder>, Option<EndpointConfig>), CliError> {
    match (&args.endpoint, &args.scripted) {
        (Some(url), None) => {
            let mut endpoint = EndpointConfig::new(url.clone());
            endpoint.auth_env = Some(resolver.string_value(
                "auth_env",
                args.auth_env.as_deref(),
                "EVAL_API_KEY",
            )?);
            endpoint.image_root = args.image_root.clone();
            let responder =
                neuroprobe::protocol::RemoteChatResponder::new(&endpoint, &args.model_id)?;
            Ok((Box::new(responder), Some(endpoint)))
        }
        (None, Some(policy)) => Ok((Box::new(scripted_from(policy)?), None)),
        _ => Err(CliError::InvalidConfig {
            what: "exactly one of --endpoint or --scripted is required".into(),
        }),
    }
}

fn scripted_from(policy: &str) -> Result<ScriptedResponder, CliError> {
    match policy {
        "all-agree" => Ok(ScriptedResponder::all_agree()),
        "all-resist" => Ok(ScriptedResponder::all_resist()),
        other => {
            if let Some(level) = other.strip_prefix("capitulate-at:") {
                let level: u8 = level.parse().map_err(|_| CliError::InvalidConfig {
                    what: format!("capitulate-at level must be 1..=10, got {level:?}"),
                })?;
                if !(1..=10).contains(&level) {
                    return Err(CliError::InvalidConfig {
                        what: format!("capitulate-at level must be 1..=10, got {level}"),
                    });
                }
                return Ok(ScriptedResponder::capitulate_at_level(level));
            }
            let path = PathBuf::from(other);
            let json = std::fs::read_to_string(&path).map_err(|source| CliError::Io {
                path,
                source,
            })?;
            Ok(ScriptedResponder::from_policy_json(&json)?)
        }
    }
}

pub fn run(args: &EvaluateArgs, resolver: &Resolver, threads: usize) -> Result<(), CliError> {
    let seed = resolver.u64_value("seed", args.seed, 0)?;
    let concurrency = resolver
        .usize_value("concurrency", args.concurrency, 4)?
        .min(threads)
        .max(1);

    let prompts: Vec<PromptRecord> = read_jsonl(&args.prompts)?;
    let (responder, endpoint) = build_responder(args, resolver)?;

    std::fs::create_dir_all(&args.out).map_err(|source| CliError::Io {
        path: args.out.clone(),
        source,
    })?;
    let config = EvalRunConfig {
        model_id: args.model_id.clone(),
        prompt_dataset_path: Some(args.prompts.clone()),
        endpoint,
        seed,
        out_path: args.out.join("trials.jsonl"),
        concurrency,
    };
    let (outcomes, summary) = run_evaluation(&config, &prompts, responder.as_ref())?;

    let mut bytes = serde_json::to_vec_pretty(&summary)?;
    bytes.push(b'\n');
    write_atomic(&args.out.join("summary.json"), &bytes)?;

    let config_json = serde_json::json!({
        "command": "evaluate",
        "model_id": args.model_id,
        "seed": seed,
        "concurrency": concurrency,
        "endpoint": args.endpoint,
        "scripted": args.scripted,
    });
    RunManifest::new(
        &config_json,
        BTreeMap::from([("run".to_string(), seed)]),
        BTreeMap::from([(
            args.prompts.display().to_string(),
            sha256_file(&args.prompts)?,
        )]),
        vec!["trials.jsonl".into(), "summary.json".into()],
    )
    .write(&args.out)?;

    println!(
        "{}: {} trials ({} unclear, {} errors), turn-1 rate {:.4}, final rate {:.4} -> {}",
        summary.model_id,
        outcomes.len(),
        summary.n_unclear,
        summary.n_errors,
        summary.turn1_rate,
        summary.final_rate,
        args.out.display()
    );
    Ok(())
}
