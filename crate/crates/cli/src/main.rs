use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use outflow_core::audit::{energy_identity_refinement, equivalence_sampling, forcing_scaling, hardy_family, supersonic_scan, transform_order};
use outflow_core::config::{reference_document, RunConfig};
use outflow_core::diagnostics::{fit_decay_rate, EnergyReport};
use outflow_core::error::ErrorClass;
use outflow_core::gas::{check_supersonic, f1_matrix, mach_number};
use outflow_core::profile::{endstate_jacobian, solve_profile};
use outflow_core::snapshot::write_snapshot;
use outflow_core::steady::{march_to_steady, multidirectional_audit, stationary_residual};
use outflow_core::{BoundaryShape, Dim, Error, FlattenedGrid, Problem, SteadyConfig};

/// Version of every JSON document and CSV layout written by this tool.
const OUTPUT_SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "outflow", version, about = "Supersonic outflow over a perturbed half-space: profiles, time marching, audits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML); defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` of the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random fixtures; overrides `seed` of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the planar profile: profile.csv and profile.json.
    Profile,
    /// Evolve the perturbed background: snapshots, diagnostics.csv, summary.json.
    Evolve,
    /// March to a stationary state: stationary.bin/.hdr and certificate.json.
    Steady,
    /// Run the property audits: verify.json; exit code 2 if any audit fails.
    Verify,
    /// Write the config reference, the resolved config and a setup summary.
    Report,
}

/// Failure carrying the error and extra JSON fields.
struct Failure {
    error: Error,
    extra: Value,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Self { error, extra: json!({}) }
    }
}

type CmdResult = Result<(), Failure>;

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 1,
        ErrorClass::Domain => 2,
        ErrorClass::Runtime => 3,
    }
}

fn error_json(f: &Failure) -> Value {
    let mut v = json!({
        "schema_version": OUTPUT_SCHEMA_VERSION,
        "kind": f.error.kind(),
        "message": f.error.to_string(),
    });
    if let (Value::Object(m), Value::Object(extra)) = (&mut v, &f.extra) {
        m.extend(extra.clone());
    }
    v
}

fn write_json(path: &Path, v: &Value) -> Result<(), Error> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let loaded = match &cli.config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    };
    let mut cfg = match loaded {
        Ok(c) => c,
        Err(e) => return fail(None, Failure::from(e)),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    if let Err(e) = fs::create_dir_all(&out) {
        return fail(None, Failure::from(Error::from(e)));
    }
    let result = match cli.command {
        Command::Profile => profile(&cfg, &out),
        Command::Evolve => evolve(&cfg, &out),
        Command::Steady => steady(&cfg, &out),
        Command::Verify => verify(&cfg, &out),
        Command::Report => report(&cfg, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(Some(&out), f),
    }
}

fn fail(out: Option<&Path>, f: Failure) -> ExitCode {
    let v = error_json(&f);
    eprintln!("{}", serde_json::to_string(&v).expect("json"));
    if let Some(dir) = out {
        let _ = write_json(&dir.join("error.json"), &v);
    }
    ExitCode::from(exit_code(f.error.class()))
}

fn profile(cfg: &RunConfig, out: &Path) -> CmdResult {
    let p = solve_profile(&cfg.boundary, &cfg.far_field, &cfg.gas, &cfg.profile)?;
    fs::write(out.join("profile.csv"), p.to_csv()).map_err(Error::from)?;
    let lin = endstate_jacobian(&cfg.far_field, &cfg.gas);
    let v = json!({
        "schema_version": OUTPUT_SCHEMA_VERSION,
        "command": "profile",
        "mach": mach_number(&cfg.far_field, &cfg.gas),
        "delta_tilde": p.delta_tilde,
        "length": p.length(),
        "samples": p.len(),
        "mass_flux_residual": p.mass_flux_residual(),
        "fit_present": p.alpha_fit.is_some(),
        "alpha_fit": p.alpha_fit,
        "fit_r2": p.fit_r2,
        "fit_window": [0.5 * cfg.profile.length, 0.9 * cfg.profile.length],
        "slowest_linear_rate": lin.slowest_rate(),
        "eigenvalues": lin.eigenvalues.iter().map(|e| [e.re, e.im]).collect::<Vec<_>>(),
    });
    write_json(&out.join("profile.json"), &v)?;
    Ok(())
}

fn setup(cfg: &RunConfig) -> Result<(Problem, f64), Error> {
    let bg = cfg.background()?;
    let beta = cfg.resolved_beta(&bg)?;
    Ok((Problem::new(bg, cfg.solver.convection), beta))
}

fn evolve(cfg: &RunConfig, out: &Path) -> CmdResult {
    let (p, beta) = setup(cfg)?;
    let s0 = cfg.initial_state(&p.background)?;
    let mut scfg = cfg.solver;
    scfg.beta = beta;
    if scfg.diagnostics_every.is_none() && scfg.t_end > 0.0 {
        scfg.diagnostics_every = Some(scfg.t_end / 100.0);
    }
    let snap_dir = out.join("snapshots");
    fs::create_dir_all(&snap_dir).map_err(Error::from)?;
    let traj = match p.evolve(s0, &scfg) {
        Ok(t) => t,
        Err(b) => {
            let (bin, _) = write_snapshot(&out.join("last_good"), &b.last_good, p.grid())?;
            return Err(Failure {
                error: b.error,
                extra: json!({ "last_snapshot": bin.display().to_string(), "last_good_t": b.last_good.t }),
            });
        }
    };
    let mut paths = Vec::new();
    for (k, s) in traj.snapshots.iter().enumerate() {
        let (bin, _) = write_snapshot(&snap_dir.join(format!("snap_{k:05}")), s, p.grid())?;
        paths.push(bin.display().to_string());
    }
    let mut csv = String::from(EnergyReport::CSV_HEADER);
    csv.push('\n');
    for r in &traj.reports {
        csv += &r.csv_row();
        csv.push('\n');
    }
    fs::write(out.join("diagnostics.csv"), csv).map_err(Error::from)?;
    let ts: Vec<f64> = traj.reports.iter().map(|r| r.t).collect();
    let wn: Vec<f64> = traj.reports.iter().map(|r| r.weighted_norm).collect();
    let fit = fit_decay_rate(&ts, &wn, cfg.diagnostics.window).ok();
    let v = json!({
        "schema_version": OUTPUT_SCHEMA_VERSION,
        "command": "evolve",
        "t_end": traj.final_state.t,
        "steps": traj.steps,
        "beta": beta,
        "diagnostics_rows": traj.reports.len(),
        "snapshots": paths,
        "weighted_norm_fit": fit,
        "fit_window": cfg.diagnostics.window,
    });
    write_json(&out.join("summary.json"), &v)?;
    Ok(())
}

fn steady(cfg: &RunConfig, out: &Path) -> CmdResult {
    let (p, beta) = setup(cfg)?;
    let s0 = cfg.initial_state(&p.background)?;
    let sc = SteadyConfig { beta, ..cfg.steady };
    let r = march_to_steady(&p, s0, &cfg.solver, &sc)?;
    let (bin, _) = write_snapshot(&out.join("stationary"), &r.state, p.grid())?;
    let res = stationary_residual(&p, &r.state)?;
    let audit = multidirectional_audit(&r.state, p.grid());
    let phi_sq = r.perturbation_norm_sq(beta, p.grid())?;
    let delta = p.background.delta;
    let shift_fit = r.shift_fit(0, 0.0).ok();
    let v = json!({
        "schema_version": OUTPUT_SCHEMA_VERSION,
        "command": "steady",
        "converged": r.converged,
        "t": r.state.t,
        "steps": r.steps,
        "steady_tol": cfg.solver.steady_tol,
        "final_rate": r.final_rate(),
        "last_step_rate": r.last_step_rate,
        "snapshot": bin.display().to_string(),
        "residuals": {
            "second_order_max": res.second_order_max,
            "fourth_order_l2": res.fourth_order_l2,
            "fourth_order_columns": res.fourth_order_columns,
            "mass_interior": res.mass_interior,
            "mass_boundary": res.mass_boundary,
            "mass_balance_mismatch": res.mass_balance_mismatch(),
        },
        "beta": beta,
        "perturbation_weighted_norm_sq": phi_sq,
        "delta": delta,
        "norm_sq_over_delta": if delta > 0.0 { Some(phi_sq / delta) } else { None },
        "shift_series": r.shift_series,
        "shift_fit": shift_fit,
        "multidirectional_audit": audit,
        "history": r.history,
    });
    write_json(&out.join("certificate.json"), &v)?;
    r.require_converged()?;
    Ok(())
}

fn audit_entry(name: &str, pass: bool, data: Value) -> Value {
    json!({ "name": name, "pass": pass, "data": data })
}

fn verify(cfg: &RunConfig, out: &Path) -> CmdResult {
    let (g, ff) = (&cfg.gas, &cfg.far_field);
    let mut audits = Vec::new();

    let rows = supersonic_scan(g, ff.rho_plus, ff.theta_plus, &[0.5, 0.9, 0.99, 1.01, 1.5, 2.0])?;
    let ok = rows
        .iter()
        .all(|r| r.sign_matches && (r.determinant - r.determinant_closed_form).abs() <= 1e-12 * r.determinant.abs().max(1.0));
    audits.push(audit_entry("f1_scan", ok, to_value(&rows)));

    let grid = cfg.grid()?;
    let data = cfg.boundary_data()?;
    let fs_ = forcing_scaling(g, ff, &data, &grid, &cfg.profile)?;
    let tiny = fs_.strong.norm <= 1e-12 && fs_.weak.norm <= 1e-12;
    let ok = tiny || (fs_.ratio_of_ratios <= 2.0 && fs_.ratio_of_ratios >= 0.5);
    audits.push(audit_entry("forcing_h1", ok, to_value(&fs_)));

    let bg = cfg.background()?;
    let alpha = bg.alpha_fit.unwrap_or_else(|| endstate_jacobian(ff, g).slowest_rate());
    let hardy = hardy_family(alpha, &grid)?;
    let worst = hardy.iter().map(|(_, r)| r.ratio).fold(0.0, f64::max);
    let ok = hardy.iter().all(|(_, r)| !r.flagged);
    audits.push(audit_entry("hardy", ok, json!({ "alpha": alpha, "max_ratio": worst, "fields": to_value(&hardy) })));

    let shape = match cfg.dim()? {
        Dim::Two if !grid.shape.is_flat() => grid.shape.clone(),
        _ => BoundaryShape::sine(cfg.grid.period, 0.1),
    };
    let order = transform_order(&shape, 41, 32, 4.0)?;
    let flat = FlattenedGrid::new(BoundaryShape::flat_2d(cfg.grid.period), 41, 32, 4.0)?;
    let f = flat.sample(|a, b| a.sin() * (6.0 * b).cos() + a * b);
    let bitwise = flat.hat_gradient(&f)? == flat.plain_gradient(&f)? && flat.hat_laplacian(&f)? == flat.plain_laplacian(&f)?;
    let ok = bitwise && order.iter().all(|r| r.ratio >= 3.2 && r.ratio <= 4.8);
    audits.push(audit_entry("transform_order", ok, json!({ "flat_bitwise": bitwise, "rows": to_value(&order) })));

    let ident = energy_identity_refinement(g, ff, cfg.boundary, 101, cfg.grid.length, 2.0, 0.05, 1e-3)?;
    audits.push(audit_entry("energy_identity", ident.ratio >= 1.6, to_value(&ident)));

    let small = FlattenedGrid::one_d(41, cfg.grid.length)?;
    let bg1 = outflow_core::BackgroundState::build(
        g,
        ff,
        &outflow_core::BoundaryData::reference(cfg.boundary, Dim::One),
        &small,
        &cfg.profile,
        cfg.thresholds,
    )?;
    let eq = equivalence_sampling(&bg1, 10_000, 0.1, cfg.seed)?;
    let ok = eq.min_ratio > 0.0 && eq.max_ratio.is_finite();
    audits.push(audit_entry("energy_equivalence", ok, to_value(&eq)));

    let all = audits.iter().all(|a| a["pass"] == json!(true));
    let v = json!({
        "schema_version": OUTPUT_SCHEMA_VERSION,
        "command": "verify",
        "all_pass": all,
        "audits": audits,
    });
    write_json(&out.join("verify.json"), &v)?;
    if all {
        Ok(())
    } else {
        Err(Failure::from(Error::Invariant("one or more audits failed; see verify.json".into())))
    }
}

fn report(cfg: &RunConfig, out: &Path) -> CmdResult {
    fs::write(out.join("config_reference.toml"), reference_document()).map_err(Error::from)?;
    fs::write(out.join("resolved_config.toml"), cfg.to_toml()).map_err(Error::from)?;
    let bg = cfg.background()?;
    let beta = cfg.resolved_beta(&bg)?;
    let p = Problem::new(bg, cfg.solver.convection);
    let s0 = cfg.initial_state(&p.background)?;
    let (dt, stages) = p.next_dt(&s0, &cfg.solver)?;
    let g = p.grid();
    let v = json!({
        "schema_version": OUTPUT_SCHEMA_VERSION,
        "command": "report",
        "mach": mach_number(&cfg.far_field, &cfg.gas),
        "verdict": check_supersonic(&cfg.far_field, &cfg.gas),
        "f1_min_eigenvalue": outflow_core::audit::min_eigenvalue(&f1_matrix(&cfg.far_field, &cfg.gas)),
        "delta_tilde": p.background.delta_tilde,
        "delta": p.background.delta,
        "alpha_fit": p.background.alpha_fit,
        "beta": beta,
        "grid": { "dim": g.d(), "n1": g.n1, "n2": g.n2, "h1": g.h1, "h2": g.h2, "length": g.length, "period": g.shape.period },
        "initial_dt": dt,
        "rkc_stages": if cfg.solver.scheme == outflow_core::solver::TimeScheme::Rkc2 { Some(stages) } else { None },
    });
    write_json(&out.join("report.json"), &v)?;
    Ok(())
}
