use std::path::Path;

use lvfeeder::synthgen::{generate_scenario, write_dataset, ScenarioConfig};

use crate::error::Result;
use crate::manifest::RunManifest;

/// Generates a synthetic dataset with ground truth into `out`.
pub fn run_generate(cfg: &ScenarioConfig, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let mut manifest = RunManifest::new("generate", cfg)?;
    manifest.seeds.insert("master".into(), cfg.seed);
    let scenario = manifest.time("generate", || generate_scenario(cfg))?;
    let written = manifest.time("write", || write_dataset(out, &scenario))?;
    manifest.finish(out, &written)
}
