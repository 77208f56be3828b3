use std::path::PathBuf;

use anyhow::{Context, Result};
use fihde_core::fraccalc::GridFunction;
use fihde_core::monotone::BracketReport;
use fihde_core::problem::check_all;
use fihde_core::scenario::Scenario;
use fihde_core::solver::{default_initial, solve_fihie};
use fihde_core::{iterate_extremal, verify_lower_upper, verify_mixed_pair, Error};
use serde_json::{json, Value};

use crate::files::{out_dir, Table, Writer};
use crate::{Command, Common, RoleArg, Status};

struct Ctx {
    sc: Scenario,
    out: Writer,
    quiet: bool,
}

impl Ctx {
    fn load(c: &Common) -> Result<Self> {
        let mut sc = Scenario::load(&c.scenario)?;
        if let Some(n) = c.n {
            sc.solver.n = n;
        }
        if let Some(tol) = c.tol {
            sc.solver.tol = tol;
        }
        if let (Some(kind), Some(b)) = (c.kind, sc.bracket.as_mut()) {
            b.kind = kind.into();
        }
        if sc.solver.n < 2 {
            return Err(Error::Config("--n must be at least 2".into()).into());
        }
        sc.solver_config().validate()?;
        let out = Writer::new(out_dir(c.out.as_deref(), &sc), &sc.name)?;
        Ok(Self {
            sc,
            out,
            quiet: c.quiet,
        })
    }

    fn header(&self, command: &str) -> Value {
        json!({
            "schema": 1,
            "command": command,
            "scenario": self.sc.name,
            "scenario_hash": self.sc.hash(),
            "n": self.sc.solver.n,
        })
    }

    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn wrote(&self, path: PathBuf) {
        self.say(format!("wrote {}", path.display()));
    }
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

pub fn run(cmd: Command) -> Result<Status> {
    match cmd {
        Command::Solve(c) => solve(&Ctx::load(&c)?),
        Command::Bracket(c) => bracket(&Ctx::load(&c)?),
        Command::Verify {
            common,
            candidate,
            role,
        } => verify(&Ctx::load(&common)?, &candidate, role),
        Command::Hypotheses(c) => hypotheses(&Ctx::load(&c)?),
        Command::Convergence { common, grids } => convergence(&Ctx::load(&common)?, &grids),
    }
}

fn solve(ctx: &Ctx) -> Result<Status> {
    let p = ctx.sc.problem()?;
    let cfg = ctx.sc.solver_config();
    let (v, rep) = solve_fihie(&p, &cfg, &default_initial(&p, ctx.sc.solver.n)?)?;
    let rows: Vec<Vec<f64>> = v.grid().nodes().zip(v.values()).map(|(s, &x)| vec![s, x]).collect();
    ctx.wrote(ctx.out.csv("solution.csv", &["s", "v"], &rows)?);
    let report = merge(
        ctx.header("solve"),
        json!({ "solver": cfg, "report": rep }),
    );
    ctx.wrote(ctx.out.json("solve.json", &report)?);
    if rep.converged {
        ctx.say(format!(
            "converged in {} iterations, residual {:e}",
            rep.outer_iters, rep.final_residual
        ));
        Ok(Status::Ok)
    } else {
        eprintln!(
            "error: no convergence after {} iterations (residual {:e})",
            rep.outer_iters, rep.final_residual
        );
        Ok(Status::NoConvergence)
    }
}

fn iterate_rows(rep: &BracketReport, thin: usize) -> (Vec<String>, Vec<Vec<f64>>) {
    let last = rep.iterates.len().saturating_sub(1);
    let kept: Vec<_> = rep
        .iterates
        .iter()
        .enumerate()
        .filter(|(k, _)| k % thin == 0 || *k == last)
        .map(|(_, it)| it)
        .collect();
    let mut columns = vec!["s".to_string()];
    columns.extend(kept.iter().map(|(t, _, _)| format!("sigma_{t}")));
    columns.extend(kept.iter().map(|(t, _, _)| format!("rho_{t}")));
    let grid = *rep.sigma.grid();
    let rows = grid
        .nodes()
        .enumerate()
        .map(|(i, s)| {
            let mut row = vec![s];
            row.extend(kept.iter().map(|(_, sg, _)| sg.values()[i]));
            row.extend(kept.iter().map(|(_, _, rh)| rh.values()[i]));
            row
        })
        .collect();
    (columns, rows)
}

fn bracket(ctx: &Ctx) -> Result<Status> {
    let sc = &ctx.sc;
    let b = sc.bracket.as_ref().ok_or_else(|| Error::Config("scenario has no [bracket] section".into()))?;
    let p = sc.problem()?;
    let grid = sc.grid()?;
    let (sigma0, rho0) = sc.bracket_pair(grid)?.expect("bracket section present");
    let cfg = sc.monotone_config().expect("bracket section present");
    let kind = b.kind;
    let header = merge(ctx.header("bracket"), json!({ "kind": kind }));

    let pre = verify_mixed_pair(&p, &sigma0, &rho0, kind, &cfg.verify)?;
    if !pre.passes && cfg.enforce_precondition {
        let report = merge(header, json!({ "status": "precondition_failed", "precondition": pre }));
        ctx.wrote(ctx.out.json("bracket.json", &report)?);
        eprintln!("error: initial pair is not a mixed pair: {}", pre.summary());
        return Ok(Status::Failed);
    }

    let rep = match iterate_extremal(&p, &sigma0, &rho0, kind, &sc.solver_config(), &cfg) {
        Ok(rep) => rep,
        Err(Error::Ordering {
            t,
            node,
            relation,
            magnitude,
        }) => {
            let witness = json!({
                "t": t, "node": node, "s": grid.node(node), "relation": relation, "magnitude": magnitude,
            });
            let report = merge(header, json!({ "status": "ordering_violation", "violation": witness }));
            ctx.wrote(ctx.out.json("bracket.json", &report)?);
            eprintln!("error: ordering violated at step {t}, s = {}: {relation} off by {magnitude:e}", grid.node(node));
            return Ok(Status::Ordering);
        }
        Err(e) => return Err(e.into()),
    };

    let (columns, rows) = iterate_rows(&rep, b.thin);
    let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
    ctx.wrote(ctx.out.csv("iterates.csv", &columns, &rows)?);
    let status = if !rep.violations.is_empty() {
        Status::Ordering
    } else if !rep.converged {
        Status::NoConvergence
    } else {
        Status::Ok
    };
    let label = match status {
        Status::Ordering => "ordering_violation",
        Status::NoConvergence => "not_converged",
        _ => "converged",
    };
    let report = merge(header, json!({ "status": label, "report": rep.summary() }));
    ctx.wrote(ctx.out.json("bracket.json", &report)?);
    match status {
        Status::Ordering => {
            let v = &rep.violations[0];
            eprintln!(
                "error: {} ordering violation(s); first at step {}, s = {}: {}",
                rep.violations.len(),
                v.t,
                v.s,
                v.relation
            );
        }
        Status::NoConvergence => eprintln!("error: width {:e} after {} steps", rep.final_width(), rep.steps),
        _ => ctx.say(format!("{} steps, final width {:e}", rep.steps, rep.final_width())),
    }
    Ok(status)
}

fn verify(ctx: &Ctx, candidate: &std::path::Path, role: RoleArg) -> Result<Status> {
    let sc = &ctx.sc;
    let p = sc.problem()?;
    let grid = sc.grid()?;
    let table = Table::read(candidate)?;
    table.check_grid(&grid)?;
    let curve = |name: &str| -> Result<GridFunction> {
        Ok(GridFunction::new(grid, table.column(name)?, p.interp())?)
    };
    let cfg = sc.verify_config();
    let (passes, body) = match role.single() {
        Some(r) => {
            let rep = verify_lower_upper(&p, &curve("v")?, r, &cfg)?;
            (rep.passes, json!({ "role": r, "report": rep }))
        }
        None => {
            let rep = verify_mixed_pair(&p, &curve("sigma")?, &curve("rho")?, sc.kind(), &cfg)?;
            (rep.passes, json!({ "role": "mixed", "kind": sc.kind(), "report": rep }))
        }
    };
    let report = merge(ctx.header("verify"), merge(json!({ "passes": passes }), body));
    ctx.wrote(ctx.out.json("verify.json", &report)?);
    if passes {
        ctx.say("candidate passes");
        Ok(Status::Ok)
    } else {
        eprintln!("error: candidate fails the {} inequalities", format!("{role:?}").to_lowercase());
        Ok(Status::Failed)
    }
}

fn hypotheses(ctx: &Ctx) -> Result<Status> {
    let sc = &ctx.sc;
    let p = sc.problem()?;
    let pair = sc.bracket_pair(sc.grid()?)?;
    let cfg = sc.verify_config();
    let bracket = pair.as_ref().map(|(s, r)| (s, r, sc.kind(), &cfg));
    let rep = check_all(&p, &sc.sampling_box(), bracket)?;
    let report = merge(
        ctx.header("hypotheses"),
        serde_json::to_value(&rep).context("serializing the hypothesis report")?,
    );
    ctx.wrote(ctx.out.json("hypotheses.json", &report)?);
    for c in &rep.checks {
        let line = format!(
            "{:<10} {}  worst {:e} at s = {}, v = {}, z = {}, w = {}",
            c.name,
            if c.holds { "holds" } else { "FAILS" },
            c.worst_violation,
            c.witness.s,
            c.witness.v,
            c.witness.z,
            c.witness.w
        );
        if c.holds {
            ctx.say(line);
        } else {
            eprintln!("{line}");
        }
    }
    Ok(if rep.all_hold { Status::Ok } else { Status::Failed })
}

struct GridRun {
    n: usize,
    outcome: Result<(GridFunction, fihde_core::SolveReport), String>,
}

fn convergence(ctx: &Ctx, grids: &[usize]) -> Result<Status> {
    if grids.len() < 2 || grids.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("--grids needs at least two increasing sizes".into()).into());
    }
    let p = ctx.sc.problem()?;
    let cfg = ctx.sc.solver_config();
    let runs: Vec<GridRun> = std::thread::scope(|scope| {
        let handles: Vec<_> = grids
            .iter()
            .map(|&n| {
                let (p, cfg) = (&p, &cfg);
                scope.spawn(move || GridRun {
                    n,
                    outcome: default_initial(p, n)
                        .and_then(|init| solve_fihie(p, cfg, &init))
                        .map_err(|e| e.to_string()),
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("solver thread")).collect()
    });

    // Sup difference between consecutive grids, taken on the coarser nodes.
    let mut diffs = vec![f64::NAN; runs.len()];
    for k in 0..runs.len() - 1 {
        if let (Ok((a, ra)), Ok((b, rb))) = (&runs[k].outcome, &runs[k + 1].outcome) {
            if ra.converged && rb.converged {
                let mut d = 0.0_f64;
                for (s, x) in a.grid().nodes().zip(a.values()) {
                    d = d.max((x - b.interpolate(s)?).abs());
                }
                diffs[k] = d;
            }
        }
    }
    let mut orders = vec![f64::NAN; runs.len()];
    for k in 1..runs.len() {
        let ratio = runs[k].n as f64 / runs[k - 1].n as f64;
        orders[k] = (diffs[k - 1] / diffs[k]).ln() / ratio.ln();
    }

    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for (k, run) in runs.iter().enumerate() {
        let (converged, iters, residual, error) = match &run.outcome {
            Ok((_, r)) => (r.converged, r.outer_iters as f64, r.final_residual, None),
            Err(e) => (false, f64::NAN, f64::NAN, Some(e.clone())),
        };
        rows.push(vec![run.n as f64, f64::from(u8::from(converged)), iters, residual, diffs[k], orders[k]]);
        entries.push(json!({
            "n": run.n, "converged": converged, "outer_iters": iters, "final_residual": residual,
            "diff_to_next": diffs[k], "order": orders[k], "error": error,
        }));
    }
    let finite: Vec<(usize, f64)> = diffs.iter().copied().enumerate().filter(|(_, d)| d.is_finite() && *d > 0.0).collect();
    let overall = match (finite.first(), finite.last()) {
        (Some(&(i, a)), Some(&(j, b))) if j > i => (a / b).ln() / (runs[j].n as f64 / runs[i].n as f64).ln(),
        _ => f64::NAN,
    };

    ctx.wrote(ctx.out.csv(
        "convergence.csv",
        &["n", "converged", "outer_iters", "final_residual", "diff_to_next", "order"],
        &rows,
    )?);
    let report = merge(
        ctx.header("convergence"),
        json!({ "grids": grids, "rows": entries, "overall_order": overall }),
    );
    ctx.wrote(ctx.out.json("convergence.json", &report)?);
    for (run, row) in runs.iter().zip(&rows) {
        match &run.outcome {
            Err(e) => eprintln!("n = {:>6}  failed: {e}", run.n),
            Ok(_) => ctx.say(format!("n = {:>6}  diff_to_next {:e}  order {:.3}", run.n, row[4], row[5])),
        }
    }
    ctx.say(format!("overall order {overall:.3}"));
    if runs.iter().all(|r| matches!(&r.outcome, Ok((_, rep)) if rep.converged)) {
        Ok(Status::Ok)
    } else {
        eprintln!("error: at least one grid failed to converge");
        Ok(Status::NoConvergence)
    }
}
