//! `parse`: one-off response classification for debugging — the same
//! cascade the evaluation harness applies to model replies.

use crate::CliError;
use clap::Args;
use neuroprobe::parser::{parse_response, parse_with_context};
use std::io::Read;

#[derive(Args)]
pub struct ParseArgs {
    /// Response text to classify; omit to read it from stdin.
    #[arg(long)]
    pub text: Option<String>,

    /// The prompt the response answered, enabling the echoed-prompt guard.
    #[arg(long)]
    pub prompt: Option<String>,
}

pub fn run(args: &ParseArgs) -> Result<(), CliError> {
    let text = match &args.text {
        Some(t) => t.clone(),
        None => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(|source| CliError::Io {
                    path: "<stdin>".into(),
                    source,
                })?;
            buf
        }
    };
    let verdict = match &args.prompt {
        Some(prompt) => parse_with_context(&text, prompt),
        None => parse_response(&text),
    };
    println!("{}", serde_json::to_string_pretty(&verdict)?);
    Ok(())
}
