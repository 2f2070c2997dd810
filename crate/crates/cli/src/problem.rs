//! Problem files: strict JSON in, effective configuration out.

use serde::{Deserialize, Serialize};
use subfrac_core::fk::{
    BaseProcess, FkProblem, InitialCondition, PotentialSpec, ProcessModel, Representation, Sigma,
    DEFAULT_GRID_STEPS,
};
use subfrac_core::kernels::{make_kernel, KernelSpec};
use subfrac_core::sampling::{BernsteinSpec, TimeChangeLaw};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub kernel: KernelSpec,
    #[serde(default)]
    pub law: LawSection,
    #[serde(default)]
    pub process: ProcessSection,
    #[serde(default)]
    pub potential: PotentialSection,
    #[serde(default)]
    pub u0: U0Section,
    pub eval_points: Vec<EvalPoint>,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalPoint {
    pub t: f64,
    pub x: f64,
}

/// The time-change law always comes from the kernel; only the passage resolution is tunable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSection {
    #[serde(default = "default_passage_steps")]
    pub passage_steps: usize,
}

fn default_passage_steps() -> usize {
    1 << 14
}

impl Default for LawSection {
    fn default() -> Self {
        Self {
            passage_steps: default_passage_steps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSection {
    #[serde(default)]
    pub base: BaseSection,
    #[serde(default = "identity")]
    pub subordination: BernsteinSpec,
}

fn identity() -> BernsteinSpec {
    BernsteinSpec::Identity
}

impl Default for ProcessSection {
    fn default() -> Self {
        Self {
            base: BaseSection::default(),
            subordination: identity(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseSection {
    BrownianDrift { w: f64 },
    StableLevy { delta: f64 },
    DossSussmann { sigma: SigmaSection, w: f64 },
}

impl Default for BaseSection {
    fn default() -> Self {
        BaseSection::BrownianDrift { w: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaSection {
    Constant {
        value: f64,
    },
    /// `offset + amplitude·sin x`
    Sine {
        offset: f64,
        amplitude: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSection {
    #[default]
    Zero,
    Constant {
        c: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum U0Section {
    Gaussian {
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        sd: f64,
        #[serde(default = "one")]
        mass: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for U0Section {
    fn default() -> Self {
        U0Section::Gaussian {
            mean: 0.0,
            sd: 1.0,
            mass: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_grid_steps")]
    pub grid_steps: usize,
    #[serde(default = "path_based")]
    pub representation: Representation,
    #[serde(default)]
    pub shared_paths: bool,
}

fn default_paths() -> usize {
    100_000
}

fn default_grid_steps() -> usize {
    DEFAULT_GRID_STEPS
}

fn path_based() -> Representation {
    Representation::PathBased
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            paths: default_paths(),
            seed: 0,
            grid_steps: default_grid_steps(),
            representation: path_based(),
            shared_paths: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub path: Option<String>,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("problem file: {e}")))
    }

    /// The configuration after defaults and command-line overrides, as one line of JSON.
    pub fn effective_json(&self) -> String {
        serde_json::to_string(self).expect("problem files serialize")
    }

    pub fn build(&self) -> Result<FkProblem, CliError> {
        let kernel = make_kernel(&self.kernel)?;
        let base = match &self.process.base {
            BaseSection::BrownianDrift { w } => BaseProcess::BrownianDrift { w: *w },
            BaseSection::StableLevy { delta } => BaseProcess::StableLevy { delta: *delta },
            BaseSection::DossSussmann { sigma, w } => BaseProcess::DossSussmann {
                sigma: match sigma {
                    SigmaSection::Constant { value } => Sigma::Constant(*value),
                    SigmaSection::Sine { offset, amplitude } => Sigma::Sine {
                        offset: *offset,
                        amplitude: *amplitude,
                    },
                },
                w: *w,
            },
        };
        let process = ProcessModel::new(base, self.process.subordination.clone())?;
        let potential = match self.potential {
            PotentialSection::Zero => PotentialSpec::Zero,
            PotentialSection::Constant { c } => PotentialSpec::Constant { c },
        };
        let U0Section::Gaussian { mean, sd, mass } = self.u0;
        let u0 = InitialCondition::Gaussian { mean, sd, mass };
        if self.eval_points.is_empty() {
            return Err(CliError::Input("eval_points must not be empty".into()));
        }
        if self.law.passage_steps == 0 {
            return Err(CliError::Input("law.passage_steps must be ≥ 1".into()));
        }
        let points = self.eval_points.iter().map(|p| (p.t, p.x)).collect();
        let mut p = FkProblem::new(kernel, process, potential, u0, points)?
            .with_representation(self.mc.representation)
            .with_grid_steps(self.mc.grid_steps)
            .with_shared_paths(self.mc.shared_paths);
        if let TimeChangeLaw::InverseSubordinator { steps, .. } = &mut p.law {
            *steps = self.law.passage_steps;
        }
        p.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        r#"{"kernel":{"family":"ggbm","alpha":0.8,"beta":0.6},"eval_points":[{"t":1,"x":0}]}"#;

    #[test]
    fn defaults_are_materialized() {
        let p = ProblemFile::parse(MINIMAL).unwrap();
        let echo = p.effective_json();
        for key in [
            "\"paths\":100000",
            "\"grid_steps\":256",
            "\"passage_steps\":16384",
            "\"kind\":\"brownian_drift\"",
            "\"form\":\"identity\"",
        ] {
            assert!(echo.contains(key), "{key} missing from {echo}");
        }
        assert_eq!(ProblemFile::parse(&echo).unwrap(), p);
        assert!(p.build().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("\"eval_points\"", "\"extra\":1,\"eval_points\"");
        assert!(matches!(ProblemFile::parse(&bad), Err(CliError::Input(_))));
        let bad = MINIMAL.replace("\"x\":0", "\"x\":0,\"y\":1");
        assert!(ProblemFile::parse(&bad).is_err());
    }
}
