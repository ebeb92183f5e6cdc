use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use qsvt_core::backend::{BackendContext, BackendRegistry};
use qsvt_core::matkit::solve_dense;
use qsvt_core::maxwell::{initial_condition, run_csv, run_with, snapshot_csv, MaxwellConfig, Metric, RunRecord};
use qsvt_core::pade::build_pade_system;
use qsvt_core::phasekit::{
    self, eval_p_real, load_schedule, poly_l2_error, sample_points, save_schedule, PhaseSchedule, TrainConfig,
};
use qsvt_core::qsvt_op::block_encode;
use qsvt_core::{CMatrix, CVector, Error, Result};
use serde_json::json;

use crate::config::{Common, RunConfig};
use crate::{CompareCmd, EvalCmd, MaxwellCmd, SolveCmd, TrainCmd};

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn write_meta(dir: &Path, name: &str, meta: serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(&meta).expect("json values serialize");
    write(dir, name, &(text + "\n"))?;
    Ok(())
}

fn train_meta(tc: &TrainConfig) -> serde_json::Value {
    json!({
        "d_even": tc.d_even,
        "d_odd": tc.d_odd,
        "iters": tc.iters,
        "lr": tc.lr,
        "kappa": tc.kappa,
        "s": tc.s,
        "samples": tc.samples,
        "seed": tc.seed,
        "init": format!("{:?}", tc.init),
    })
}

/// Load the schedule named in the settings, or train one from them.
fn obtain_schedule(rc: &RunConfig) -> Result<PhaseSchedule> {
    match &rc.schedule {
        Some(p) => load_schedule(p),
        None => phasekit::train_phases(&rc.train),
    }
}

fn train_and_save(rc: &RunConfig) -> Result<PhaseSchedule> {
    let sched = phasekit::train_phases(&rc.train)?;
    prepare_out(&rc.out)?;
    save_schedule(&sched, rc.out.join("schedule.json"))?;
    let mut trace = String::from("iteration,loss\n");
    for (i, l) in sched.loss_trace.iter().enumerate() {
        let _ = writeln!(trace, "{i},{l:.16e}");
    }
    write(&rc.out, "loss_trace.csv", &trace)?;
    Ok(sched)
}

pub fn train_phases(common: &Common, cmd: &TrainCmd) -> Result<()> {
    let rc = RunConfig::resolve(common, &cmd.train, None)?;
    let sched = train_and_save(&rc)?;
    let err = poly_l2_error(&sched, rc.train.samples)?;
    write_meta(
        &rc.out,
        "train_meta.json",
        json!({ "command": "train-phases", "train": train_meta(&rc.train), "final_loss": sched.final_loss, "rel_l2_error": err }),
    )?;
    println!(
        "degree {} ({} + {}), seed {}: final loss {:.6e}, relative L2 error {:.6}",
        sched.degree(),
        sched.d_even,
        sched.d_odd,
        rc.seed,
        sched.final_loss,
        err
    );
    println!("wrote {}", rc.out.join("schedule.json").display());
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn eval_poly(common: &Common, cmd: &EvalCmd) -> Result<()> {
    let rc = RunConfig::resolve(common, &cmd.train, cmd.schedule.as_deref())?;
    prepare_out(&rc.out)?;
    if let Some(degrees) = &cmd.degrees {
        return eval_batch(&rc, degrees, cmd.seeds.as_deref().unwrap_or(&[rc.seed]));
    }
    if cmd.points < 2 {
        return Err(Error::InvalidArgument("need at least 2 points".into()));
    }
    let sched = obtain_schedule(&rc)?;
    let mut csv = String::from("x,qsvt,target\n");
    for x in sample_points(sched.kappa, cmd.points) {
        let _ = writeln!(csv, "{x:.16e},{:.16e},{:.16e}", eval_p_real(&sched, x)?, sched.target(x));
    }
    write(&rc.out, "poly.csv", &csv)?;
    let err = poly_l2_error(&sched, rc.train.samples)?;
    write_meta(
        &rc.out,
        "eval_meta.json",
        json!({
            "command": "eval-poly",
            "schedule": rc.schedule.as_ref().map(|p| p.display().to_string()),
            "seed": sched.seed,
            "degree": sched.degree(),
            "rel_l2_error": err,
        }),
    )?;
    println!("degree {} seed {}: relative L2 error {:.6}", sched.degree(), sched.seed, err);
    Ok(())
}

fn eval_batch(rc: &RunConfig, degrees: &[usize], seeds: &[u64]) -> Result<()> {
    let mut csv = String::from("degree,seed,rel_l2_error,final_loss\n");
    let mut medians = Vec::new();
    for &d in degrees {
        let mut errs = Vec::new();
        for &seed in seeds {
            let base = TrainConfig::with_degree(d)?;
            let tc = TrainConfig { seed, d_even: base.d_even, d_odd: base.d_odd, ..rc.train.clone() };
            let sched = phasekit::train_phases(&tc)?;
            let err = poly_l2_error(&sched, tc.samples)?;
            let _ = writeln!(csv, "{d},{seed},{err:.16e},{:.16e}", sched.final_loss);
            errs.push(err);
        }
        medians.push(median(errs));
    }
    write(&rc.out, "poly_errors.csv", &csv)?;
    for (d, m) in degrees.iter().zip(&medians) {
        println!("degree {d}: median relative L2 error {m:.6} over seeds {seeds:?}");
    }
    let ordered = medians.windows(2).all(|w| w[1] <= w[0]);
    println!("medians non-increasing with degree: {ordered}");
    write_meta(
        &rc.out,
        "eval_meta.json",
        json!({ "command": "eval-poly", "degrees": degrees, "seeds": seeds, "medians": medians, "non_increasing": ordered }),
    )
}

fn read_numbers(path: &Path) -> Result<Vec<Vec<f64>>> {
    let bad = |msg: String| Error::InvalidArgument(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| bad(format!("`{f}` is not a number"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn read_matrix(path: &Path) -> Result<CMatrix> {
    let rows = read_numbers(path)?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument(format!("{}: matrix must be square and nonempty", path.display())));
    }
    CMatrix::from_real(n, n, &rows.concat())
}

fn read_vector(path: &Path) -> Result<CVector> {
    Ok(CVector::from_real(&read_numbers(path)?.concat()))
}

pub fn solve_linear(common: &Common, cmd: &SolveCmd) -> Result<()> {
    let rc = RunConfig::resolve(common, &cmd.train, cmd.schedule.as_deref())?;
    let a = read_matrix(&cmd.matrix)?;
    let b = read_vector(&cmd.rhs)?;
    if b.len() != a.rows() {
        return Err(Error::InvalidArgument(format!(
            "rhs has {} entries for a {}x{} matrix",
            b.len(),
            a.rows(),
            a.rows()
        )));
    }
    if b.norm() == 0.0 {
        return Err(Error::InvalidArgument("rhs is zero".into()));
    }
    let sched = obtain_schedule(&rc)?;
    let encoding = Arc::new(block_encode(&a, sched.kappa)?);
    let ctx = BackendContext { encoding, schedule: Some(Arc::new(sched)) };
    let backend = BackendRegistry::with_defaults().build(&rc.backend, &ctx)?;
    let x = backend.solve(&b)?;
    let reference = solve_dense(&a, &b)?;
    let residual = a.matvec(&x)?.sub(&b).norm() / b.norm();
    let rel_err = x.sub(&reference).norm() / reference.norm();

    prepare_out(&rc.out)?;
    let mut csv = String::from("index,x,x_classical\n");
    for (i, (xi, ci)) in x.iter().zip(reference.iter()).enumerate() {
        let _ = writeln!(csv, "{i},{:.16e},{:.16e}", xi.re, ci.re);
    }
    write(&rc.out, "solution.csv", &csv)?;
    write_meta(
        &rc.out,
        "solve_meta.json",
        json!({
            "command": "solve-linear",
            "backend": backend.name(),
            "seed": ctx.schedule.as_ref().map(|s| s.seed),
            "n": a.rows(),
            "residual": residual,
            "rel_error_vs_classical": rel_err,
        }),
    )?;
    println!("backend {}: residual {residual:.6e}, relative error vs classical {rel_err:.6e}", backend.name());
    Ok(())
}

fn uses_schedule(backend: &str) -> bool {
    !matches!(backend, "exact" | "classical")
}

fn maxwell_config(rc: &RunConfig, cmd: &MaxwellCmd) -> MaxwellConfig {
    let mut cfg = rc.maxwell.clone();
    cfg.n = cmd.n.unwrap_or(cfg.n);
    cfg.dt = cmd.dt.unwrap_or(cfg.dt);
    cfg.t_final = cmd.t_final.unwrap_or(cfg.t_final);
    cfg.eps = cmd.eps.unwrap_or(cfg.eps);
    cfg.mu = cmd.mu.unwrap_or(cfg.mu);
    cfg.snapshot_every = cmd.snapshot_every.or(cfg.snapshot_every);
    if cmd.raw_metric {
        cfg.metric = Metric::Raw;
    }
    cfg.schedule_path = None;
    cfg
}

fn write_run(out: &Path, rec: &RunRecord) -> Result<()> {
    write(out, &format!("maxwell_n{}.csv", rec.n), &run_csv(rec))?;
    for snap in &rec.snapshots {
        write(out, &format!("snapshot_n{}_step{:04}.csv", rec.n, snap.step), &snapshot_csv(snap))?;
    }
    Ok(())
}

fn warn_unstable(rec: &RunRecord) {
    if rec.courant > 2.0 {
        eprintln!(
            "warning: n = {}: dt * max|k'| = {:.3} exceeds 2; the Euler update amplifies the fastest grid modes",
            rec.n, rec.courant
        );
    }
}

pub fn run_maxwell(common: &Common, cmd: &MaxwellCmd) -> Result<()> {
    let rc = RunConfig::resolve(common, &cmd.train, cmd.schedule.as_deref())?;
    let cfg = maxwell_config(&rc, cmd);
    cfg.validate()?;
    prepare_out(&rc.out)?;
    let schedule = if uses_schedule(&cfg.backend) {
        let s = obtain_schedule(&rc)?;
        if rc.schedule.is_none() {
            save_schedule(&s, rc.out.join("schedule.json"))?;
        }
        Some(Arc::new(s))
    } else {
        None
    };
    let registry = BackendRegistry::with_defaults();

    let grids = cmd.grid_sweep.clone().unwrap_or_else(|| vec![cfg.n]);
    let configs: Vec<MaxwellConfig> = grids.iter().map(|&n| MaxwellConfig { n, ..cfg.clone() }).collect();
    for c in &configs {
        c.validate()?;
    }
    let records: Vec<Result<RunRecord>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| {
                let (schedule, registry) = (schedule.clone(), &registry);
                scope.spawn(move || run_with(c, schedule, registry))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
    });
    let records = records.into_iter().collect::<Result<Vec<_>>>()?;

    for rec in &records {
        write_run(&rc.out, rec)?;
        warn_unstable(rec);
        println!(
            "n = {}: {} steps, final L2 relative error {:.6e}, final fidelity {:.6}",
            rec.n,
            rec.steps(),
            rec.final_error(),
            rec.final_fidelity()
        );
    }
    if cmd.grid_sweep.is_some() {
        let mut csv = String::from("n,final_l2_rel_err,final_fidelity,error_slope,courant\n");
        for r in &records {
            let _ = writeln!(
                csv,
                "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.n,
                r.final_error(),
                r.final_fidelity(),
                r.error_slope(),
                r.courant
            );
        }
        write(&rc.out, "grid_sweep.csv", &csv)?;
    }
    write_meta(
        &rc.out,
        "maxwell_meta.json",
        json!({
            "command": "run-maxwell",
            "backend": cfg.backend,
            "seed": schedule.as_ref().map(|s| s.seed),
            "schedule": rc.schedule.as_ref().map(|p| p.display().to_string()),
            "dt": cfg.dt,
            "t_final": cfg.t_final,
            "eps": cfg.eps,
            "mu": cfg.mu,
            "grids": grids,
            "final_fidelity": records.iter().map(RunRecord::final_fidelity).collect::<Vec<_>>(),
            "final_l2_rel_err": records.iter().map(RunRecord::final_error).collect::<Vec<_>>(),
        }),
    )
}

pub fn compare_backends(common: &Common, cmd: &CompareCmd) -> Result<()> {
    let rc = RunConfig::resolve(common, &cmd.train, cmd.schedule.as_deref())?;
    let sys = build_pade_system(cmd.n)?;
    let sched = Arc::new(obtain_schedule(&rc)?);
    let ctx = BackendContext { encoding: Arc::new(block_encode(&sys.a, sched.kappa)?), schedule: Some(sched.clone()) };
    let registry = BackendRegistry::with_defaults();
    let names: Vec<String> =
        cmd.backends.clone().unwrap_or_else(|| registry.names().into_iter().map(String::from).collect());

    // derivative operand of the initial pulse
    let b = sys.apply_rhs(&initial_condition(cmd.n)?.ex)?;
    let reference = registry.build("classical", &ctx)?.solve(&b)?;
    let operator = registry.build("operator", &ctx)?.solve(&b)?;

    prepare_out(&rc.out)?;
    let mut csv = String::from("backend,rel_err_vs_classical,max_abs_diff_vs_operator\n");
    for name in &names {
        let x = registry.build(name, &ctx)?.solve(&b)?;
        let rel = x.sub(&reference).norm() / reference.norm();
        let diff = x.max_abs_diff(&operator);
        let _ = writeln!(csv, "{name},{rel:.16e},{diff:.16e}");
        println!("{name:>12}: relative error vs classical {rel:.6e}, max deviation from operator {diff:.3e}");
    }
    write(&rc.out, "compare_backends.csv", &csv)?;
    write_meta(
        &rc.out,
        "compare_meta.json",
        json!({ "command": "compare-backends", "n": cmd.n, "seed": sched.seed, "backends": names }),
    )
}
