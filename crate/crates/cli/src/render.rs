//! `render`: SVG files from dataset splits or evaluation outputs.

use std::path::PathBuf;

use clap::Args;
use compose_core::env::Example;
use compose_core::rect::{RectConfig, RectState, RegionGoal};
use compose_core::svg::{rect_svg, tangram_svg};
use compose_core::tangram::{TangramGoal, TangramState};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{load, write_resolved, EnvKind};
use crate::error::{CliError, CliResult};

#[derive(Args, Debug)]
pub struct RenderArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// A dataset split file (rect) or a `final_states.json` from eval.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    env: Option<EnvKind>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Render at most this many items.
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderConfig {
    pub input: Option<PathBuf>,
    pub env: EnvKind,
    pub out: PathBuf,
    pub limit: Option<usize>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig { input: None, env: EnvKind::Rect, out: PathBuf::from("renders"), limit: None }
    }
}

fn rect_items(v: Value) -> CliResult<Vec<(RectState, RegionGoal)>> {
    if let Ok(cs) = serde_json::from_value::<Vec<RectConfig>>(v.clone()) {
        return cs.iter().map(|c| Ok(c.example().map(|e| (e.state, e.goal))?)).collect();
    }
    let ex: Vec<Example<RectState, RegionGoal>> = serde_json::from_value(v)
        .map_err(|e| CliError::Data(format!("input is neither rect configs nor rect states: {e}")))?;
    Ok(ex.into_iter().map(|e| (e.state, e.goal)).collect())
}

pub fn render(args: RenderArgs) -> CliResult<()> {
    let mut cfg: RenderConfig = load(args.config.as_deref())?;
    cfg.input = args.input.or(cfg.input);
    cfg.env = args.env.unwrap_or(cfg.env);
    cfg.out = args.out.unwrap_or(cfg.out);
    cfg.limit = args.limit.or(cfg.limit);
    let input = cfg.input.clone().ok_or_else(|| CliError::Usage("--input is required".into()))?;
    let text = std::fs::read_to_string(&input).map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?;
    let svgs: Vec<String> = match cfg.env {
        EnvKind::Rect => rect_items(value)?.iter().map(|(s, g)| rect_svg(s, Some(g))).collect(),
        EnvKind::Tangram => {
            let ex: Vec<Example<TangramState, TangramGoal>> = serde_json::from_value(value)
                .map_err(|e| CliError::Data(format!("input is not a list of tangram states: {e}")))?;
            ex.iter().map(|e| tangram_svg(&e.state)).collect::<Result<_, _>>()?
        }
    };
    let n = cfg.limit.unwrap_or(usize::MAX).min(svgs.len());
    std::fs::create_dir_all(&cfg.out)?;
    for (i, svg) in svgs.iter().take(n).enumerate() {
        std::fs::write(cfg.out.join(format!("{i:04}.svg")), svg)?;
    }
    write_resolved(&cfg.out, "render_config.json", &cfg)?;
    println!("rendered {n} SVG files into {}", cfg.out.display());
    Ok(())
}
