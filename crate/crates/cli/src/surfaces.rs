use std::process::ExitCode;

use anyhow::Context;
use splineaug::surface::{sample_specs, script_stem};

use crate::{CmdResult, GlobalArgs, OrExit, SurfacesArgs};

pub fn run(global: &GlobalArgs, args: &SurfacesArgs) -> CmdResult {
    let config = global.load_config()?;
    let specs = sample_specs(args.family, args.count, args.seed, &config.surface_catalog.ranges).usage()?;
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create {}", args.out_dir.display()))
        .env()?;
    for (index, spec) in specs.iter().enumerate() {
        let stem = script_stem(args.family, args.seed, index);
        let script = args.out_dir.join(format!("{stem}.py"));
        let sidecar = args.out_dir.join(format!("{stem}.json"));
        let meta = serde_json::json!({
            "family": args.family.name(),
            "seed": args.seed,
            "index": index,
            "script": script.file_name().and_then(|n| n.to_str()),
            "params": spec.params.to_map(),
        });
        std::fs::write(&script, &spec.script_text)
            .and_then(|_| std::fs::write(&sidecar, serde_json::to_string_pretty(&meta).expect("json") + "\n"))
            .with_context(|| format!("cannot write {}", script.display()))
            .env()?;
        println!("{}", script.display());
    }
    Ok(ExitCode::SUCCESS)
}
