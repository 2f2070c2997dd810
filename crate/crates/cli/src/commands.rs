use std::path::Path;

use clap::{Args, Subcommand};
use subfrac_core::fk::BaseProcess;
use subfrac_core::fk::{self, InitialCondition, PotentialSpec, ProcessModel};
use subfrac_core::kernels::{make_kernel, Kernel, KernelSpec};
use subfrac_core::oracle::{semigroup_quadrature, spectral_solution, SpectralGrid, Symbol};
use subfrac_core::phi::{phi_closed, PhiEvaluator, VolterraSolver};
use subfrac_core::sampling::BernsteinSpec;
use subfrac_core::sampling::{
    sample_a_stable_mixing, sample_fbm_path, sample_script_a, sample_stable_subordinator,
    sample_time_change, MixingLaw, PathGrid, SeedSpec, TimeChangeLaw,
};
use subfrac_core::specfun::{
    appell_f3, mittag_leffler, multinomial_ml, mwright_cdf, mwright_density, prabhakar, MLParams,
    MultinomialMLParams,
};
use subfrac_core::validate::{run_matrix, Budget, Check, Status, CRITERIA};

use crate::output::{num, Table};
use crate::problem::ProblemFile;
use crate::{Cli, CliError, Command};

#[derive(Debug, Args)]
pub struct PhiArgs {
    /// `family:p1,p2,...` (ggbm, msm, fractional_power, conv_power_sum, conv_multinomial_ml) or JSON.
    #[arg(long)]
    pub kernel: String,
    /// Times as `start:stop:count`, a comma list or one value.
    #[arg(long)]
    pub t: String,
    /// Decay rates λ ≥ 0; the table holds Φ(t, -λ).
    #[arg(long)]
    pub lambda: String,
}

#[derive(Debug, Subcommand)]
pub enum SampleCmd {
    /// η_t of the γ-stable subordinator.
    Stable {
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
    /// The mixing variable A_β.
    Mixing {
        #[arg(long)]
        beta: f64,
    },
    /// 𝒜 = A_β^{1/γ} η₁.
    ScriptA {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        beta: f64,
    },
    /// A(t) of the law attached to a kernel.
    TimeChange {
        #[arg(long)]
        kernel: String,
        #[arg(long)]
        t: f64,
    },
    /// Paths of fractional Brownian motion on a uniform grid.
    Fbm {
        #[arg(long)]
        hurst: f64,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 256)]
        steps: usize,
    },
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Print the criterion ids and titles without running anything.
    #[arg(long)]
    pub list: bool,
    /// Comma-separated criterion ids (default: all).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u32>,
    /// Check a problem file against the deterministic oracles instead of the built-in matrix.
    #[arg(long)]
    pub problem: Option<std::path::PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SpecfunCmd {
    /// E_β(x)
    Ml {
        #[arg(long)]
        beta: f64,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
    },
    /// E^{q3}_{q1,q2}(x)
    Prabhakar {
        #[arg(long)]
        q1: f64,
        #[arg(long)]
        q2: f64,
        #[arg(long)]
        q3: f64,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
    },
    /// E_{(α₁..αm),β}(z₁..zm)
    MultinomialMl {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        alphas: Vec<f64>,
        #[arg(long)]
        beta: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        z: Vec<f64>,
    },
    /// M_β(z), or its CDF with --cdf.
    Mwright {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        z: f64,
        #[arg(long)]
        cdf: bool,
    },
    /// F3(α, α', β, β'; γ; x, y)
    F3 {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        alpha_p: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        #[arg(long, allow_hyphen_values = true)]
        b_p: f64,
        #[arg(long, allow_hyphen_values = true)]
        g: f64,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
    },
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Phi(a) => cmd_phi(cli, a),
        Command::Sample(s) => cmd_sample(cli, s),
        Command::Solve { problem } => cmd_solve(cli, problem),
        Command::Validate(a) => cmd_validate(cli, a),
        Command::Specfun(s) => cmd_specfun(cli, s),
    }
}

fn parse_f64s(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("not a number: '{v}'")))
        })
        .collect()
}

/// `start:stop:count` (inclusive), a comma list, or one number.
pub fn parse_range(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [a, b, n] => {
            let (a, b) = (parse_f64s(a)?[0], parse_f64s(b)?[0]);
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| CliError::Input(format!("bad count in range '{s}'")))?;
            if n == 0 || !(a.is_finite() && b.is_finite()) {
                return Err(CliError::Input(format!(
                    "range '{s}' needs finite ends and count ≥ 1"
                )));
            }
            if n == 1 {
                return Ok(vec![a]);
            }
            Ok((0..n)
                .map(|i| {
                    if i == n - 1 {
                        b
                    } else {
                        a + (b - a) * i as f64 / (n - 1) as f64
                    }
                })
                .collect())
        }
        [_] => parse_f64s(s),
        _ => Err(CliError::Input(format!(
            "range '{s}' must be start:stop:count"
        ))),
    }
}

pub fn parse_kernel(s: &str) -> Result<KernelSpec, CliError> {
    if s.trim_start().starts_with('{') {
        return serde_json::from_str(s).map_err(|e| CliError::Input(format!("kernel: {e}")));
    }
    let (name, args) = s.split_once(':').unwrap_or((s, ""));
    let p = if args.is_empty() {
        Vec::new()
    } else {
        parse_f64s(args)?
    };
    let need = |n: usize| -> Result<(), CliError> {
        if p.len() != n {
            return Err(CliError::Input(format!(
                "kernel '{name}' takes {n} parameters, got {}",
                p.len()
            )));
        }
        Ok(())
    };
    // conv kernels: β followed by (β_j, b_j) pairs
    let conv = |p: &[f64]| -> Result<(f64, Vec<f64>, Vec<f64>), CliError> {
        if p.is_empty() || p.len() % 2 != 1 {
            return Err(CliError::Input(format!(
                "kernel '{name}' takes β followed by (β_j, b_j) pairs"
            )));
        }
        let (betas, bs) = p[1..].chunks(2).map(|c| (c[0], c[1])).unzip();
        Ok((p[0], betas, bs))
    };
    match name {
        "ggbm" => {
            need(2)?;
            Ok(KernelSpec::Ggbm {
                alpha: p[0],
                beta: p[1],
            })
        }
        "msm" => {
            need(4)?;
            Ok(KernelSpec::Msm {
                a: p[0],
                b: p[1],
                mu: p[2],
                nu: p[3],
            })
        }
        "fractional_power" | "fp" => {
            need(1)?;
            Ok(KernelSpec::FractionalPower { beta: p[0] })
        }
        "conv_power_sum" => {
            let (beta, betas, bs) = conv(&p)?;
            Ok(KernelSpec::ConvPowerSum { beta, betas, bs })
        }
        "conv_multinomial_ml" => {
            let (beta, betas, bs) = conv(&p)?;
            Ok(KernelSpec::ConvMultinomialMl { beta, betas, bs })
        }
        _ => Err(CliError::Input(format!("unknown kernel family '{name}'"))),
    }
}

fn cmd_phi(cli: &Cli, a: &PhiArgs) -> Result<(), CliError> {
    let spec = parse_kernel(&a.kernel)?;
    let kernel = make_kernel(&spec)?;
    let ts = parse_range(&a.t)?;
    let lams = parse_range(&a.lambda)?;
    if ts.iter().any(|t| !(*t >= 0.0)) || lams.iter().any(|l| !(*l >= 0.0)) {
        return Err(CliError::Input("t and λ must be ≥ 0".into()));
    }
    let tol = cli.tol.unwrap_or(1e-5);
    let t_max = ts.iter().cloned().fold(0.0, f64::max);
    let series = PhiEvaluator::series(&kernel, t_max.max(1e-3))?;
    let mut positive: Vec<f64> = ts.iter().cloned().filter(|t| *t > 0.0).collect();
    positive.sort_by(f64::total_cmp);
    positive.dedup();
    let volterra = if positive.is_empty() {
        None
    } else {
        Some(VolterraSolver::new(
            &kernel,
            VolterraSolver::graded_grid(t_max, 1024, &positive),
        )?)
    };
    let config = serde_json::json!({ "command": "phi", "kernel": spec, "t": ts, "lambda": lams, "tol": tol }).to_string();
    let mut table = Table::new(
        None,
        &config,
        &[
            "t",
            "lambda",
            "series",
            "closed",
            "volterra",
            "max_discrepancy",
        ],
    );
    let mut worst: f64 = 0.0;
    for &lam in &lams {
        let v = volterra.as_ref().map(|s| s.solve(-lam));
        for &t in &ts {
            let s = match series.eval(t, -lam) {
                Ok(v) => Some(v),
                Err(subfrac_core::Error::OutsideConvergenceDomain(_))
                | Err(subfrac_core::Error::TruncationBudget(_)) => None,
                Err(e) => return Err(e.into()),
            };
            let c = match phi_closed(&kernel, t, -lam) {
                Ok(v) => Some(v),
                Err(subfrac_core::Error::NoClosedForm(_)) => None,
                Err(e) => return Err(e.into()),
            };
            let vt = match (&v, &volterra) {
                _ if t == 0.0 => Some(1.0),
                (Some(v), Some(s)) => Some(v[s.index_of(t).expect("requested node")]),
                _ => None,
            };
            let vals: Vec<f64> = [s, c, vt].into_iter().flatten().collect();
            let mut d: f64 = 0.0;
            for i in 0..vals.len() {
                for j in i + 1..vals.len() {
                    d = d.max((vals[i] - vals[j]).abs());
                }
            }
            worst = worst.max(d);
            let cell = |x: Option<f64>| x.map(num).unwrap_or_default();
            table.push(vec![num(t), num(lam), cell(s), cell(c), cell(vt), num(d)]);
        }
    }
    table.write(cli.out.as_deref())?;
    if worst > tol {
        return Err(CliError::Failed(format!(
            "largest discrepancy {worst:.3e} exceeds --tol {tol:.1e}"
        )));
    }
    Ok(())
}

fn cmd_sample(cli: &Cli, s: &SampleCmd) -> Result<(), CliError> {
    let seed = cli.seed.unwrap_or(0);
    let config = serde_json::json!({ "command": "sample", "args": format!("{s:?}") }).to_string();
    if let SampleCmd::Fbm {
        hurst,
        horizon,
        steps,
    } = s
    {
        let n = cli.paths.unwrap_or(1);
        let grid = PathGrid::new(*horizon, *steps)?;
        let nodes = grid.nodes();
        let mut table = Table::new(Some(seed), &config, &["path", "t", "value"]);
        for i in 0..n {
            let path = sample_fbm_path(*hurst, &grid, SeedSpec::new(seed, i as u64))?;
            for (t, v) in nodes.iter().zip(path) {
                table.push(vec![i.to_string(), num(*t), num(v)]);
            }
        }
        return table.write(cli.out.as_deref());
    }
    let n = cli.paths.unwrap_or(1000);
    let law = match s {
        SampleCmd::TimeChange { kernel, t } => Some(TimeChangeLaw::for_kernel(
            &make_kernel(&parse_kernel(kernel)?)?,
            t.max(1.0),
        )?),
        _ => None,
    };
    let mut table = Table::new(Some(seed), &config, &["draw", "value"]);
    for i in 0..n {
        let sd = SeedSpec::new(seed, i as u64);
        let v = match s {
            SampleCmd::Stable { gamma, t } => sample_stable_subordinator(*gamma, *t, sd)?,
            SampleCmd::Mixing { beta } => sample_a_stable_mixing(*beta, sd)?,
            SampleCmd::ScriptA { gamma, beta } => {
                sample_script_a(*gamma, &MixingLaw::Stable { beta: *beta }, sd)?
            }
            SampleCmd::TimeChange { t, .. } => {
                sample_time_change(law.as_ref().expect("built above"), *t, sd)?
            }
            SampleCmd::Fbm { .. } => unreachable!("handled above"),
        };
        table.push(vec![i.to_string(), num(v)]);
    }
    table.write(cli.out.as_deref())
}

fn read_problem(cli: &Cli, path: &Path) -> Result<ProblemFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut p = ProblemFile::parse(&text)?;
    if let Some(s) = cli.seed {
        p.mc.seed = s;
    }
    if let Some(n) = cli.paths {
        p.mc.paths = n;
    }
    Ok(p)
}

fn out_path(cli: &Cli, p: &ProblemFile) -> Option<std::path::PathBuf> {
    cli.out
        .clone()
        .or_else(|| p.output.path.as_ref().map(Into::into))
}

fn cmd_solve(cli: &Cli, path: &Path) -> Result<(), CliError> {
    let file = read_problem(cli, path)?;
    let problem = file.build()?;
    for w in problem.warnings() {
        eprintln!("subfrac: warning: {w}");
    }
    let est = fk::solve(&problem, file.mc.paths, file.mc.seed)?;
    let mut table = Table::new(
        Some(file.mc.seed),
        &file.effective_json(),
        &[
            "t",
            "x",
            "mean",
            "stderr",
            "n_paths",
            "form",
            "grid_change",
            "grid_change_stderr",
            "grid_passed",
        ],
    );
    for e in est {
        let (gc, gs, gp) = match &e.grid {
            Some(g) => (num(g.change), num(g.change_stderr), g.passed.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        table.push(vec![
            num(e.t),
            num(e.x),
            num(e.mean),
            num(e.stderr),
            e.n_paths.to_string(),
            e.form,
            gc,
            gs,
            gp,
        ]);
    }
    table.write(out_path(cli, &file).as_deref())
}

fn check_rows(table: &mut Table, checks: &[Check]) {
    for c in checks {
        table.push(c.csv_fields().to_vec());
    }
}

fn cmd_validate(cli: &Cli, a: &ValidateArgs) -> Result<(), CliError> {
    if a.list {
        for (id, title) in CRITERIA {
            println!("{id}\t{title}");
        }
        return Ok(());
    }
    if let Some(p) = &a.problem {
        return validate_problem(cli, p);
    }
    let ids: Vec<u32> = if a.only.is_empty() {
        CRITERIA.iter().map(|c| c.0).collect()
    } else {
        a.only.clone()
    };
    if let Some(bad) = ids.iter().find(|id| !CRITERIA.iter().any(|c| c.0 == **id)) {
        return Err(CliError::Input(format!("no criterion {bad}; see --list")));
    }
    let d = Budget::default();
    let budget = Budget {
        paths: cli.paths.unwrap_or(d.paths),
        seed: cli.seed.unwrap_or(d.seed),
    };
    if budget.paths < 2 {
        return Err(CliError::Input("--paths must be ≥ 2".into()));
    }
    let config =
        serde_json::json!({ "command": "validate", "criteria": ids, "budget": budget }).to_string();
    let mut table = Table::new(Some(budget.seed), &config, &Check::CSV_HEADER);
    let mut failed = Vec::new();
    for r in run_matrix(&ids, &budget) {
        eprintln!("{}", r.summary());
        for c in r.checks.iter().filter(|c| c.status == Status::Fail) {
            eprintln!(
                "    fail: {}: deviation {:.3e} > bound {:.3e}",
                c.case, c.deviation, c.bound
            );
        }
        if !r.passed {
            failed.push(r.id);
        }
        check_rows(&mut table, &r.checks);
    }
    table.write(cli.out.as_deref())?;
    if !failed.is_empty() {
        return Err(CliError::Failed(format!("criteria failed: {failed:?}")));
    }
    Ok(())
}

// the deterministic oracle for a problem, when one applies
fn oracle_for(
    kernel: &Kernel,
    process: &ProcessModel,
    potential: &PotentialSpec,
    u0: &InitialCondition,
    t: f64,
    x: f64,
) -> Option<f64> {
    let c = match potential {
        PotentialSpec::Zero => 0.0,
        PotentialSpec::Constant { c } => *c,
        PotentialSpec::Callable { .. } => return None,
    };
    if let Ok(v) = semigroup_quadrature(kernel, u0, process, c, t, x) {
        return Some(v);
    }
    // symbol -(ξ²/2)^g: Brownian motion run at a g-stable clock
    if c != 0.0 {
        return None;
    }
    let clock = match &process.base {
        BaseProcess::BrownianDrift { w } if *w == 0.0 => 1.0,
        BaseProcess::StableLevy { delta } => delta / 2.0,
        _ => return None,
    };
    let symbol = match &process.subordination {
        BernsteinSpec::Identity if clock < 1.0 => Symbol::FracLaplacian { gamma: clock },
        BernsteinSpec::StablePower { gamma } => Symbol::FracLaplacian {
            gamma: gamma * clock,
        },
        _ => return None,
    };
    let grid = SpectralGrid::for_u0(u0, 4096).ok()?;
    spectral_solution(kernel, u0, symbol, t, x, grid).ok()
}

fn validate_problem(cli: &Cli, path: &Path) -> Result<(), CliError> {
    let file = read_problem(cli, path)?;
    let problem = file.build()?;
    let est = fk::solve(&problem, file.mc.paths, file.mc.seed)?;
    let mut table = Table::new(
        Some(file.mc.seed),
        &file.effective_json(),
        &Check::CSV_HEADER,
    );
    let mut failed = 0;
    let mut checked = 0;
    for e in &est {
        let Some(o) = oracle_for(
            &problem.kernel,
            &problem.process,
            &problem.potential,
            &problem.u0,
            e.t,
            e.x,
        ) else {
            continue;
        };
        checked += 1;
        let dev = (e.mean - o).abs();
        let bound = 3.0 * e.stderr;
        let pass = dev <= bound || (e.stderr == 0.0 && dev <= 1e-12);
        if !pass {
            failed += 1;
        }
        table.push(vec![
            "0".into(),
            format!("problem (t,x)=({},{})", e.t, e.x),
            num(e.mean),
            num(o),
            num(e.stderr),
            "sigma".into(),
            num(dev),
            num(bound),
            if pass { "pass" } else { "fail" }.into(),
        ]);
    }
    table.write(out_path(cli, &file).as_deref())?;
    if checked == 0 {
        return Err(CliError::Scope(
            "no deterministic oracle applies to this problem".into(),
        ));
    }
    eprintln!(
        "problem check: {} of {checked} points within 3 stderr of the oracle",
        checked - failed
    );
    if failed > 0 {
        return Err(CliError::Failed(format!(
            "{failed} points outside 3 stderr"
        )));
    }
    Ok(())
}

fn cmd_specfun(cli: &Cli, s: &SpecfunCmd) -> Result<(), CliError> {
    let (name, args, v) = match s {
        SpecfunCmd::Ml { beta, x } => (
            "mittag_leffler",
            format!("beta={beta} x={x}"),
            mittag_leffler(*beta, *x)?,
        ),
        SpecfunCmd::Prabhakar { q1, q2, q3, x } => (
            "prabhakar",
            format!("q1={q1} q2={q2} q3={q3} x={x}"),
            prabhakar(MLParams::new(*q1, *q2, *q3)?, *x)?,
        ),
        SpecfunCmd::MultinomialMl { alphas, beta, z } => {
            if alphas.len() != z.len() {
                return Err(CliError::Input("alphas and z need the same length".into()));
            }
            let p = MultinomialMLParams::new(alphas.clone(), *beta)?;
            (
                "multinomial_ml",
                format!("alphas={alphas:?} beta={beta} z={z:?}"),
                multinomial_ml(&p, z)?,
            )
        }
        SpecfunCmd::Mwright { beta, z, cdf } => {
            if *cdf {
                (
                    "mwright_cdf",
                    format!("beta={beta} z={z}"),
                    mwright_cdf(*beta, *z)?,
                )
            } else {
                (
                    "mwright_density",
                    format!("beta={beta} z={z}"),
                    mwright_density(*beta, *z)?,
                )
            }
        }
        SpecfunCmd::F3 {
            alpha,
            alpha_p,
            b,
            b_p,
            g,
            x,
            y,
        } => (
            "appell_f3",
            format!("alpha={alpha} alpha_p={alpha_p} b={b} b_p={b_p} g={g} x={x} y={y}"),
            appell_f3(*alpha, *alpha_p, *b, *b_p, *g, *x, *y)?,
        ),
    };
    let config =
        serde_json::json!({ "command": "specfun", "function": name, "args": args }).to_string();
    let mut table = Table::new(None, &config, &["function", "args", "value"]);
    table.push(vec![name.into(), args, format!("{v:.17e}")]);
    table.write(cli.out.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0:1:11").unwrap().len(), 11);
        assert_eq!(parse_range("0:1:11").unwrap()[10], 1.0);
        assert_eq!(parse_range("0.5").unwrap(), vec![0.5]);
        assert_eq!(parse_range("0.1,0.2").unwrap(), vec![0.1, 0.2]);
        assert!(parse_range("0:1").is_err());
        assert!(parse_range("0:1:0").is_err());
    }

    #[test]
    fn kernel_strings() {
        assert_eq!(
            parse_kernel("ggbm:0.8,0.6").unwrap(),
            KernelSpec::Ggbm {
                alpha: 0.8,
                beta: 0.6
            }
        );
        assert_eq!(
            parse_kernel("conv_power_sum:0.8,0.4,0.5").unwrap(),
            KernelSpec::ConvPowerSum {
                beta: 0.8,
                betas: vec![0.4],
                bs: vec![0.5]
            }
        );
        assert!(parse_kernel("ggbm:0.8").is_err());
        assert!(parse_kernel("nope:1").is_err());
        assert!(parse_kernel(r#"{"family":"fractional_power","beta":0.5}"#).is_ok());
    }
}
