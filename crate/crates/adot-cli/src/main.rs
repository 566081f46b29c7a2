//! `adot`: adapted optimal transport on scenario trees.
//!
//! Exit codes: 0 success, 1 invalid input / infeasible / not polar,
//! 2 numerical failure.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use adot_core::barycenter::{causal_barycenter, verify_barycenter_dual};
use adot_core::bicausal::{dual_from_value, solve_bicausal};
use adot_core::error::SolveError;
use adot_core::hedging::{check_na, extract_strategy, superhedge_price, verify_superhedge};
use adot_core::polar::{polar_certificate, polar_max};
use adot_core::solver::{extract_dual, solve_adapted_lp};
use adot_core::{Coupling, CostFunction, FilteredProcess, Mode};

use adot_cli::formats;
use adot_cli::instances;
use adot_cli::report::RunReport;

#[derive(Parser)]
#[command(name = "adot", version, about = "Adapted optimal transport on scenario trees")]
struct Cli {
    /// Tolerance for derived-quantity gates.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,
    /// Thread cap for the DP layer (accepted for interface stability;
    /// the current engine is single-threaded).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ModeArg {
    Plain,
    Causal,
    Anticausal,
    Bicausal,
    Multicausal,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Plain => Mode::Plain,
            ModeArg::Causal => Mode::Causal,
            ModeArg::Anticausal => Mode::Anticausal,
            ModeArg::Bicausal => Mode::Bicausal,
            ModeArg::Multicausal => Mode::Multicausal,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a process file, or a coupling file against a mode.
    Validate {
        #[arg(long)]
        process: Option<PathBuf>,
        #[arg(long)]
        coupling: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "plain")]
        mode: ModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge duplicate branches into the canonical minimal tree.
    Canonicalize {
        #[arg(long)]
        process: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Solve an adapted transport problem between marginal processes.
    Solve {
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, num_args = 2.., required = true)]
        marginals: Vec<PathBuf>,
        #[arg(long)]
        cost: PathBuf,
        /// Include the structured dual in the report.
        #[arg(long)]
        dual: bool,
        /// Include the optimal coupling in the report.
        #[arg(long)]
        coupling: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Robust superhedging: price, worst-case model, strategy.
    Hedge {
        #[arg(long, num_args = 2.., required = true)]
        marginals: Vec<PathBuf>,
        #[arg(long)]
        payoff: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Causal barycenter over a fixed candidate support.
    Barycenter {
        #[arg(long, num_args = 1.., required = true)]
        marginals: Vec<PathBuf>,
        /// One cost file per marginal.
        #[arg(long, num_args = 1.., required = true)]
        costs: Vec<PathBuf>,
        #[arg(long)]
        support: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximal event mass over a constraint class; certificate when polar.
    Polar {
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, num_args = 2.., required = true)]
        marginals: Vec<PathBuf>,
        #[arg(long)]
        event: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded consistency checks (`ADOT_SEED` fixes the instances).
    Selftest {
        /// Number of random instances.
        #[arg(long, default_value_t = 25)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    };
    std::process::exit(code);
}

/// Exit code for a solver error: numerical trouble is 2, bad input 1.
fn solve_exit_code(e: &SolveError) -> i32 {
    match e {
        SolveError::NumericalFailure(_) | SolveError::DualVerificationFailed(_) => 2,
        _ => 1,
    }
}

fn load_marginals(paths: &[PathBuf], report: &mut RunReport) -> Result<Vec<FilteredProcess>> {
    let mut out = Vec::new();
    for p in paths {
        report.digest_input(p)?;
        out.push(formats::load_process(p)?);
    }
    Ok(out)
}

fn coupling_payload(pi: &Coupling, marginal_paths: &[PathBuf]) -> serde_json::Value {
    let refs = marginal_paths.iter().map(|p| p.display().to_string()).collect();
    serde_json::to_value(formats::coupling_to_file(pi, refs)).expect("serializable")
}

/// Dual potential dump keyed by node ids.
fn dual_payload(
    dual: &adot_core::DualPotential,
    marginals: &[&FilteredProcess],
) -> serde_json::Value {
    let initial: Vec<BTreeMap<String, f64>> = dual
        .initial
        .iter()
        .enumerate()
        .map(|(i, table)| {
            table
                .iter()
                .map(|(&node, &v)| (marginals[i].node(node).id.clone(), v))
                .collect()
        })
        .collect();
    let path_potential = dual.path_potential.as_ref().map(|(i, table)| {
        let m = marginals[*i];
        let by_id: BTreeMap<String, f64> = table
            .iter()
            .enumerate()
            .map(|(l, &v)| (m.node(m.prefix_node(l, m.horizon())).id.clone(), v))
            .collect();
        (i, by_id)
    });
    let compensators: Vec<serde_json::Value> = dual
        .compensators
        .iter()
        .map(|(k, &v)| {
            serde_json::json!({
                "marginal": k.marginal,
                "t": k.t,
                "node": marginals[k.marginal].node(k.own_node).id.clone(),
                "others": k
                    .others
                    .iter()
                    .enumerate()
                    .map(|(pos, &n)| {
                        let j = if pos < k.marginal { pos } else { pos + 1 };
                        marginals[j].node(n).id.clone()
                    })
                    .collect::<Vec<_>>(),
                "value": v,
            })
        })
        .collect();
    serde_json::json!({
        "initial": initial,
        "path_potential": path_potential,
        "compensators": compensators,
    })
}

fn run(cli: Cli) -> Result<i32> {
    let start = Instant::now();
    match cli.command {
        Command::Validate { process, coupling, mode, out } => {
            let mut report = RunReport::new("validate".into());
            if let Some(path) = &process {
                report.digest_input(path)?;
                let p = formats::load_process(path)?;
                report.values.insert("leaf_count".into(), p.leaf_count() as f64);
                report
                    .values
                    .insert("reconstruction_error".into(), p.reconstruction_error());
            }
            if let Some(path) = &coupling {
                report.digest_input(path)?;
                let pi = formats::load_coupling(path)?;
                let check = pi.check(mode.into());
                report.values.insert("worst_violation".into(), check.worst_violation);
                report.values.insert("ok".into(), if check.ok { 1.0 } else { 0.0 });
                if !check.ok {
                    report.status = 1;
                    if let Some(w) = check.witness {
                        report
                            .payloads
                            .insert("witness".into(), serde_json::Value::String(w));
                    }
                }
            }
            if process.is_none() && coupling.is_none() {
                bail!("nothing to validate: pass --process and/or --coupling");
            }
            report.diagnostics.wall_time_ms = start.elapsed().as_millis() as u64;
            report.write(out.as_deref())?;
            Ok(report.status)
        }

        Command::Canonicalize { process, out, report: report_path } => {
            let mut report = RunReport::new("canonicalize".into());
            report.digest_input(&process)?;
            let p = formats::load_process(&process)?;
            let canon = p.canonicalize();
            formats::save_process(&canon, &out)?;
            report
                .values
                .insert("node_count_before".into(), p.node_count() as f64);
            report
                .values
                .insert("node_count_after".into(), canon.node_count() as f64);
            // adapted distance to the original certifies losslessness
            let aw = solve_bicausal(&p, &canon, &CostFunction::LpSum { p: 1 })
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            report.values.insert("aw_to_original".into(), aw.value);
            report.diagnostics.lp_iterations = aw.lp_iterations as u64;
            if aw.value.abs() > cli.tol {
                report.status = 2;
            }
            report.diagnostics.wall_time_ms = start.elapsed().as_millis() as u64;
            report.write(report_path.as_deref())?;
            Ok(report.status)
        }

        Command::Solve { mode, marginals, cost, dual, coupling, out } => {
            let mut report = RunReport::new(format!("solve --mode {mode:?}").to_lowercase());
            let procs = load_marginals(&marginals, &mut report)?;
            let refs: Vec<&FilteredProcess> = procs.iter().collect();
            report.digest_input(&cost)?;
            let c = formats::load_cost(&cost, &refs)?;
            let mode: Mode = mode.into();

            let outcome = if mode == Mode::Bicausal {
                solve_bicausal(&procs[0], &procs[1], &c).and_then(|sol| {
                    let d = dual_from_value(&procs[0], &procs[1], &c, &sol)?;
                    Ok((sol.value, sol.coupling.clone(), d, sol.lp_iterations))
                })
            } else {
                solve_adapted_lp(&refs, &c, mode).and_then(|sol| {
                    let d = extract_dual(&refs, &c, &sol)?;
                    Ok((sol.value, sol.coupling.clone(), d, sol.lp.iterations))
                })
            };
            let (value, plan, dual_pot, iterations) = match outcome {
                Ok(x) => x,
                Err(e) => {
                    eprintln!("error: {e}");
                    return Ok(solve_exit_code(&e));
                }
            };
            report.values.insert("value".into(), value);
            report.diagnostics.lp_iterations = iterations as u64;
            report.diagnostics.duality_gap = Some((dual_pot.value(&refs) - value).abs());
            let check = plan.check(mode);
            report.diagnostics.max_constraint_residual = Some(check.worst_violation);
            if coupling {
                report
                    .payloads
                    .insert("coupling".into(), coupling_payload(&plan, &marginals));
            }
            if dual {
                report
                    .payloads
                    .insert("dual".into(), dual_payload(&dual_pot, &refs));
            }
            report.diagnostics.wall_time_ms = start.elapsed().as_millis() as u64;
            report.write(out.as_deref())?;
            Ok(0)
        }

        Command::Hedge { marginals, payoff, out } => {
            let mut report = RunReport::new("hedge".into());
            let procs = load_marginals(&marginals, &mut report)?;
            let refs: Vec<&FilteredProcess> = procs.iter().collect();
            report.digest_input(&payoff)?;
            let xi = formats::load_payoff(&payoff, &refs)?;

            let res = match superhedge_price(&refs, &xi) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return Ok(match e {
                        adot_core::error::HedgeError::Solve(ref s) => solve_exit_code(s),
                        _ => 1,
                    });
                }
            };
            let dual = match extract_dual(
                &refs,
                &CostFunction::Table(
                    xi.entries.iter().map(|(k, v)| (k.clone(), -v)).collect(),
                ),
                &res.solution,
            ) {
                Ok(d) => d,
                Err(e) => {
                    eprintln!("error: {e}");
                    return Ok(solve_exit_code(&e));
                }
            };
            let strategy = match extract_strategy(&refs, &xi, &dual) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return Ok(1);
                }
            };
            let check = verify_superhedge(&refs, &strategy, &xi, Some(&res.worst_case_model));

            report.values.insert("price".into(), res.price);
            report
                .values
                .insert("worst_domination_violation".into(), check.worst_domination_violation);
            let na = check_na(&res.worst_case_model)
                .map(|r| if r.ok { 1.0 } else { 0.0 })
                .unwrap_or(0.0);
            report.values.insert("worst_case_model_na".into(), na);
            report.diagnostics.lp_iterations = res.solution.lp.iterations as u64;
            report.diagnostics.duality_gap = Some((strategy.p0 - res.price).abs());
            report.diagnostics.max_constraint_residual =
                Some(res.worst_case_model.check(Mode::Multicausal).worst_violation);
            report.payloads.insert(
                "worst_case_model".into(),
                coupling_payload(&res.worst_case_model, &marginals),
            );
            let deltas: Vec<BTreeMap<String, Vec<f64>>> = strategy
                .deltas
                .iter()
                .map(|layer| {
                    layer
                        .iter()
                        .map(|(prefix, holdings)| {
                            let key = if prefix.is_empty() {
                                "root".to_string()
                            } else {
                                prefix
                                    .iter()
                                    .zip(refs.iter())
                                    .map(|(&node, m)| m.node(node).id.clone())
                                    .collect::<Vec<_>>()
                                    .join(",")
                            };
                            (key, holdings.clone())
                        })
                        .collect()
                })
                .collect();
            report.payloads.insert(
                "strategy".into(),
                serde_json::json!({ "p0": strategy.p0, "deltas": deltas }),
            );
            if !check.domination_ok || check.equality_ok == Some(false) {
                report.status = 2;
            }
            report.diagnostics.wall_time_ms = start.elapsed().as_millis() as u64;
            report.write(out.as_deref())?;
            Ok(report.status)
        }

        Command::Barycenter { marginals, costs, support, out } => {
            let mut report = RunReport::new("barycenter".into());
            let procs = load_marginals(&marginals, &mut report)?;
            let refs: Vec<&FilteredProcess> = procs.iter().collect();
            if costs.len() != procs.len() {
                bail!("{} cost files for {} marginals", costs.len(), procs.len());
            }
            let mut cost_fns = Vec::new();
            for (path, m) in costs.iter().zip(refs.iter()) {
                report.digest_input(path)?;
                cost_fns.push(formats::load_cost(path, &[m])?);
            }
            report.digest_input(&support)?;
            let cand = formats::load_candidates(&support)?;

            let sol = match causal_barycenter(&refs, &cost_fns, &cand) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return Ok(match e {
                        adot_core::error::BarycenterError::Solve(ref s) => solve_exit_code(s),
                        _ => 1,
                    });
                }
            };
            let check =
                verify_barycenter_dual(&sol.dual, &refs, &cost_fns, &cand, Some(sol.value));
            report.values.insert("value".into(), sol.value);
            report.diagnostics.lp_iterations = sol.lp_iterations;
            report.diagnostics.duality_gap = check.gap;
            report.diagnostics.max_constraint_residual = Some(check.worst_feasibility);
            let nu: BTreeMap<String, f64> = cand
                .ids
                .iter()
                .zip(sol.nu.iter())
                .filter(|(_, &w)| w > 1e-12)
                .map(|(id, &w)| (id.clone(), w))
                .collect();
            report
                .payloads
                .insert("nu".into(), serde_json::to_value(nu).expect("serializable"));
            report.diagnostics.wall_time_ms = start.elapsed().as_millis() as u64;
            report.write(out.as_deref())?;
            Ok(0)
        }

        Command::Polar { mode, marginals, event, out } => {
            let mut report = RunReport::new(format!("polar --mode {mode:?}").to_lowercase());
            let procs = load_marginals(&marginals, &mut report)?;
            let refs: Vec<&FilteredProcess> = procs.iter().collect();
            report.digest_input(&event)?;
            let ev = formats::load_event(&event, &refs)?;
            let mode: Mode = mode.into();

            let max_mass = match polar_max(&ev, &refs, mode) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("error: {e}");
                    return Ok(solve_exit_code(&e));
                }
            };
            report.values.insert("max_mass".into(), max_mass);
            if max_mass <= cli.tol.max(1e-9) {
                match polar_certificate(&ev, &refs, mode) {
                    Ok(cert) => {
                        let slices: Vec<serde_json::Value> = cert
                            .slices
                            .iter()
                            .map(|(key, members)| {
                                let m = refs[key.marginal];
                                serde_json::json!({
                                    "marginal": key.marginal,
                                    "t": key.t,
                                    "parent": key.own_parent.map(|n| m.node(n).id.clone()),
                                    "others": key
                                        .others
                                        .iter()
                                        .enumerate()
                                        .map(|(pos, &n)| {
                                            let j = if pos < key.marginal { pos } else { pos + 1 };
                                            refs[j].node(n).id.clone()
                                        })
                                        .collect::<Vec<_>>(),
                                    "nodes": members
                                        .iter()
                                        .map(|&n| m.node(n).id.clone())
                                        .collect::<Vec<_>>(),
                                })
                            })
                            .collect();
                        report.payloads.insert(
                            "certificate".into(),
                            serde_json::json!({
                                "prefix_free_marginals": cert.prefix_free_marginals,
                                "slices": slices,
                            }),
                        );
                        report.values.insert("polar".into(), 1.0);
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        return Ok(2);
                    }
                }
            } else {
                report.values.insert("polar".into(), 0.0);
                report.status = 1;
            }
            report.diagnostics.wall_time_ms = start.elapsed().as_millis() as u64;
            report.write(out.as_deref())?;
            Ok(report.status)
        }

        Command::Selftest { count, out } => {
            let seed = std::env::var("ADOT_SEED")
                .ok()
                .and_then(|s| s.parse::<u64>().ok())
                .unwrap_or(0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut report = RunReport::new(format!("selftest --count {count}"));
            let mut worst_gap = 0.0f64;
            let mut worst_chain = 0.0f64;
            for k in 0..count {
                use rand::Rng;
                let horizon = rng.gen_range(1..=3usize);
                let dim = rng.gen_range(1..=2usize);
                let x = instances::random_tree(&mut rng, horizon, 3, dim);
                let y = instances::random_tree(&mut rng, horizon, 3, dim);
                let p = if rng.gen_bool(0.5) { 1 } else { 2 };
                let c = CostFunction::LpSum { p };
                let dp = solve_bicausal(&x, &y, &c)
                    .map_err(|e| anyhow::anyhow!("instance {k}: {e}"))?;
                let lp = solve_adapted_lp(&[&x, &y], &c, Mode::Bicausal)
                    .map_err(|e| anyhow::anyhow!("instance {k}: {e}"))?;
                worst_gap = worst_gap.max((dp.value - lp.value).abs());
                let causal = solve_adapted_lp(&[&x, &y], &c, Mode::Causal)
                    .map_err(|e| anyhow::anyhow!("instance {k}: {e}"))?;
                let product = Coupling::product(&[&x, &y])
                    .expected_cost(&c)
                    .map_err(|e| anyhow::anyhow!("instance {k}: {e}"))?;
                worst_chain = worst_chain
                    .max(causal.value - lp.value)
                    .max(lp.value - product);
            }
            report.values.insert("instances".into(), count as f64);
            report.values.insert("worst_dp_lp_gap".into(), worst_gap);
            report.values.insert("worst_chain_violation".into(), worst_chain);
            report.values.insert("seed".into(), seed as f64);
            if worst_gap > cli.tol || worst_chain > 1e-9 {
                report.status = 2;
            }
            report.diagnostics.wall_time_ms = start.elapsed().as_millis() as u64;
            report.write(out.as_deref())?;
            Ok(report.status)
        }
    }
}
