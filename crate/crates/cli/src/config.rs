//! Run configuration: a TOML or JSON file whose values are overridden by
//! command line flags. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use superlearner::{library, Error, LearnerSpec, LossSpec, MetaSolver, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Simulation,
    FullSimulation,
    Benchmark,
}

impl Preset {
    pub fn library(self) -> Vec<LearnerSpec> {
        match self {
            Preset::Simulation => library::simulation_library(),
            Preset::FullSimulation => library::full_simulation_library(),
            Preset::Benchmark => library::benchmark_library(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub sim_ids: Option<Vec<u8>>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub reps: Option<usize>,
    pub train_sizes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub manifest: Option<PathBuf>,
    pub reference: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub library: Option<Vec<LearnerSpec>>,
    pub preset: Option<Preset>,
    pub v_folds: Option<usize>,
    pub seed: Option<u64>,
    pub loss: Option<LossSpec>,
    pub meta: Option<MetaSolver>,
    pub threads: Option<usize>,
    pub data: Option<PathBuf>,
    pub target: Option<String>,
    pub drop_columns: Option<Vec<String>>,
    pub id_column: Option<String>,
    pub model: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub svg: Option<bool>,
    pub sim: Option<SimSection>,
    pub bench: Option<BenchSection>,
}

impl RunConfig {
    /// Parse by extension: `.json` as JSON, anything else as TOML. Relative
    /// paths inside the file resolve against the file's directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut cfg: RunConfig = if is_json {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {}", path.display(), one_line(&e.to_string()))))?
        };
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(q) = p {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        fix(&mut cfg.data);
        fix(&mut cfg.model);
        fix(&mut cfg.output_dir);
        if let Some(b) = &mut cfg.bench {
            fix(&mut b.manifest);
        }
        Ok(cfg)
    }

    pub fn library(&self) -> Result<Vec<LearnerSpec>> {
        match (&self.library, self.preset) {
            (Some(_), Some(_)) => Err(Error::Config("set either 'library' or 'preset', not both".into())),
            (Some(lib), None) => Ok(lib.clone()),
            (None, Some(p)) => Ok(p.library()),
            (None, None) => Ok(library::simulation_library()),
        }
    }

    pub fn require<'a, T>(value: &'a Option<T>, key: &str) -> Result<&'a T> {
        value.as_ref().ok_or_else(|| Error::Config(format!("missing required setting '{key}'")))
    }
}

pub fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("c.toml");
        std::fs::write(
            &t,
            "seed = 7\nv_folds = 5\ndata = \"train.csv\"\nmeta = \"nnls_normalize\"\n\n[[library]]\nlabel = \"ols\"\nkind = \"ols\"\n",
        )
        .unwrap();
        let j = dir.path().join("c.json");
        std::fs::write(
            &j,
            r#"{"seed":7,"v_folds":5,"data":"train.csv","meta":"nnls_normalize","library":[{"label":"ols","kind":"ols"}]}"#,
        )
        .unwrap();
        let a = RunConfig::load(&t).unwrap();
        assert_eq!(a, RunConfig::load(&j).unwrap());
        assert_eq!(a.data.unwrap(), dir.path().join("train.csv"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("c.toml");
        std::fs::write(&t, "seeds = 7\n").unwrap();
        assert!(matches!(RunConfig::load(&t), Err(Error::Config(_))));
        std::fs::write(&t, "[sim]\nrep = 3\n").unwrap();
        assert!(matches!(RunConfig::load(&t), Err(Error::Config(_))));
    }

    #[test]
    fn library_and_preset_conflict() {
        let cfg = RunConfig { library: Some(vec![]), preset: Some(Preset::Benchmark), ..Default::default() };
        assert!(cfg.library().is_err());
        assert_eq!(RunConfig::default().library().unwrap(), library::simulation_library());
    }
}
