//! `gen-prompts`: write a deterministic synthetic prompt set — every
//! image crossed with all five claim categories and all ten difficulty
//! levels, seeded so the same arguments always produce the same file.

use crate::manifest::RunManifest;
use crate::settings::Resolver;
use crate::CliError;
use clap::Args;
use neuroprobe::dataio::write_jsonl;
use neuroprobe::protocol::generate_fixture_prompts;
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Args)]
pub struct GenPromptsArgs {
    /// Number of synthetic images; yields images x 50 prompts.
    #[arg(long)]
    pub images: usize,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Output JSONL path (a sibling manifest is written next to it).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &GenPromptsArgs, resolver: &Resolver) -> Result<(), CliError> {
    if args.images == 0 {
        return Err(CliError::InvalidConfig {
            what: "--images must be at least 1".into(),
        });
    }
    let seed = resolver.u64_value("seed", args.seed, 0)?;
    let prompts = generate_fixture_prompts(args.images, seed);
    write_jsonl(&args.out, prompts.iter())?;

    let config = serde_json::json!({
        "command": "gen-prompts",
        "images": args.images,
        "seed": seed,
    });
    RunManifest::new(
        &config,
        BTreeMap::from([("prompts".to_string(), seed)]),
        BTreeMap::new(),
        vec![args
            .out
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()],
    )
    .write_for_file(&args.out)?;

    println!("{} prompts -> {}", prompts.len(), args.out.display());
    Ok(())
}
