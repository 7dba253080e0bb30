//! Runs a manifest stage by stage. Each stage is an ordinary command whose
//! flags come from its `args` table; inputs are wired as follows:
//!
//! - `selfplay`, `tutor`: one upstream stage supplies both networks; stored
//!   model ids go to `--white` or `--black` by their colour.
//! - `compare` (two inputs) and `tournament`: each upstream stage becomes a
//!   player named after it.
//!
//! A stage's run id is `<manifest name>-<stage name>` and, unless its args
//! set one, its seed is derived from the manifest seed and the stage name.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use rlgame::seed::{derive_seed, label_key};
use rlgame::store::{ExperimentStore, ManifestInput, RunManifest};
use rlgame::Color;

use crate::args;
use crate::config::push_flag;
use crate::CliError;

const COMMANDS: &[&str] = &["init-model", "selfplay", "tutor", "compare", "tournament"];

/// Copies the model pair of an upstream stage into `dir/<name>/`.
fn stage_player(dir: &Path, name: &str, models: &Path) -> Result<PathBuf, CliError> {
    let target = dir.join(name);
    fs::create_dir_all(&target).map_err(|e| CliError::Io(format!("{}: {e}", target.display())))?;
    for file in ["white.model", "black.model"] {
        let src = models.join(file);
        fs::copy(&src, target.join(file)).map_err(|e| CliError::Io(format!("{}: {e}", src.display())))?;
    }
    Ok(target)
}

pub fn run(m: &args::Manifest) -> Result<(), CliError> {
    let text = fs::read_to_string(&m.file).map_err(|e| CliError::Io(format!("{}: {e}", m.file.display())))?;
    let manifest = RunManifest::parse(&text).map_err(|e| CliError::Usage(e.to_string()))?;
    let store = ExperimentStore::open(m.runs_dir.join("store"))?;
    let order = manifest
        .validate(|id| store.has_model(id))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let base_seed = m.seed.or(manifest.seed).unwrap_or(0);
    let name = m
        .file
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("manifest")
        .to_string();

    // Directory holding the white/black model pair each finished stage produced.
    let mut produced: HashMap<String, Option<PathBuf>> = HashMap::new();
    for i in order {
        let stage = &manifest.stages[i];
        if !COMMANDS.contains(&stage.command.as_str()) {
            return Err(CliError::Usage(format!(
                "stage {}: unknown command `{}` (expected one of {})",
                stage.name,
                stage.command,
                COMMANDS.join(", ")
            )));
        }
        let run_id = stage
            .args
            .get("run_id")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .unwrap_or_else(|| format!("{name}-{}", stage.name));
        let run_dir = m.runs_dir.join(&run_id);

        let mut argv: Vec<OsString> = vec!["rlgame".into(), stage.command.clone().into()];
        for (key, value) in &stage.args {
            if key != "run_id" {
                push_flag(&mut argv, key, value)?;
            }
        }
        if !stage.args.contains_key("seed") {
            let seed = derive_seed(base_seed, &[label_key(&stage.name)]);
            argv.extend(["--seed".into(), seed.to_string().into()]);
        }
        argv.extend([
            "--runs-dir".into(),
            m.runs_dir.clone().into_os_string(),
            "--run-id".into(),
            run_id.clone().into(),
        ]);

        let upstream = |input: &str| -> Result<PathBuf, CliError> {
            produced
                .get(input)
                .cloned()
                .flatten()
                .ok_or_else(|| CliError::Usage(format!("stage {}: stage {input} produced no model pair", stage.name)))
        };
        let inputs = manifest.inputs_of(stage);
        match stage.command.as_str() {
            "selfplay" | "tutor" => {
                for input in &inputs {
                    match input {
                        ManifestInput::Stage(s) => {
                            let dir = upstream(s)?;
                            argv.extend(["--white".into(), dir.join("white.model").into_os_string()]);
                            argv.extend(["--black".into(), dir.join("black.model").into_os_string()]);
                        }
                        ManifestInput::Model(id) => {
                            let color = store.get_model(id)?.net.color;
                            let flag = if color == Color::White { "--white" } else { "--black" };
                            argv.extend([flag.into(), (*id).into()]);
                        }
                    }
                }
            }
            "compare" | "tournament" => {
                let entrants = run_dir.join("entrants");
                let mut players = Vec::new();
                for input in &inputs {
                    match input {
                        ManifestInput::Stage(s) => players.push(stage_player(&entrants, s, &upstream(s)?)?),
                        ManifestInput::Model(id) => {
                            return Err(CliError::Usage(format!(
                                "stage {}: players must come from stages, not the single model {id}",
                                stage.name
                            )))
                        }
                    }
                }
                if stage.command == "compare" {
                    if players.len() != 2 {
                        return Err(CliError::Usage(format!("stage {}: compare needs exactly 2 inputs", stage.name)));
                    }
                    argv.extend(["--x".into(), players[0].clone().into_os_string()]);
                    argv.extend(["--y".into(), players[1].clone().into_os_string()]);
                } else {
                    argv.extend(["--entrants".into(), entrants.into_os_string()]);
                }
            }
            _ if !inputs.is_empty() => {
                return Err(CliError::Usage(format!("stage {}: {} takes no inputs", stage.name, stage.command)));
            }
            _ => {}
        }

        println!("== stage {} ({})", stage.name, stage.command);
        let cli = crate::parse(argv).map_err(|e| CliError::Usage(format!("stage {}: {e}", stage.name)))?;
        crate::dispatch(&cli.command)?;

        let models = match &cli.command {
            args::Command::Tournament(t) if t.mode != rlgame::tournament::TournamentMode::Roundrobin => {
                Some(run_dir.join("champion"))
            }
            args::Command::Compare(_) | args::Command::Tournament(_) => None,
            _ => Some(run_dir),
        };
        produced.insert(stage.name.clone(), models);
    }
    Ok(())
}
