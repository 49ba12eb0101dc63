use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use blowup_lab::experiments::{
    emit_outputs, fit_report, fit_reports_by_p, read_sweep_csv, summarize, sweep,
    write_monitor_csv, SweepConfig, DEFAULT_SLACK, SAMPLE_INTERVAL,
};
use blowup_lab::functionals::DEFAULT_TOLERANCE;
use blowup_lab::pde_solver::{
    cfl_dt, init_state, physical_field_u, run_from, sized_grid, threshold_for, RunConfig,
    DEFAULT_THRESHOLD_FACTOR,
};
use blowup_lab::potentials::verify_h_asymptotics;
use blowup_lab::riccati::{h_blowup_time, h_closed_form, RiccatiParams};
use blowup_lab::test_function::solve_phi;
use blowup_lab::{FieldState, ModelParams, Result, SpatialGrid};

#[derive(Parser)]
#[command(
    name = "blowup-lab",
    version,
    about = "Blow-up experiments for a damped wave equation on a Schwarzschild background"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print empirical bounds of the two asymptotic ratios of h.
    CheckAsymptotics {
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [1.5, 1.75, 2.0])]
        p: Vec<f64>,
        #[arg(long, default_value_t = -60.0, allow_hyphen_values = true)]
        s_min: f64,
        #[arg(long, default_value_t = 1e4)]
        s_max: f64,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
    /// Tabulate the test function as CSV.
    Phi {
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
        /// Growth rate; defaults to 1/(2M).
        #[arg(long)]
        growth: Option<f64>,
        #[arg(long, default_value_t = -60.0, allow_hyphen_values = true)]
        s_min: f64,
        #[arg(long, default_value_t = 60.0)]
        s_max: f64,
        #[arg(long, default_value_t = 0.05)]
        ds: f64,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one Cauchy problem to blow-up or the time horizon.
    Solve(SolveArgs),
    /// Tabulate the comparison solution H and its blow-up time.
    Riccati {
        #[arg(long)]
        p: f64,
        /// Data functional per unit amplitude.
        #[arg(long)]
        n: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        /// Number of table rows before the blow-up time.
        #[arg(long, default_value_t = 20)]
        rows: usize,
    },
    /// Lifespan sweep over a list of amplitudes.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        mass: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        radius: Option<f64>,
        /// Comma separated, decreasing.
        #[arg(long)]
        epsilons: Option<String>,
        #[arg(long)]
        ds: Option<f64>,
        #[arg(long)]
        cfl: Option<f64>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        tmax: Option<f64>,
        #[arg(long)]
        outdir: Option<PathBuf>,
    },
    /// Fit lifespans from a sweep.csv.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SLACK)]
        slack: f64,
        /// Where to write fit.json; next to the input when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long, default_value_t = 0.05)]
    ds: f64,
    #[arg(long, default_value_t = 0.9)]
    cfl: f64,
    #[arg(long, default_value_t = 100.0)]
    tmax: f64,
    /// Relative to max |v_t(0)|.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_FACTOR)]
    threshold: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Times at which to write field snapshots.
    #[arg(long, value_delimiter = ',')]
    snapshot: Vec<f64>,
    /// Allow 1 < p < 3/2.
    #[arg(long)]
    exploratory: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::CheckAsymptotics {
            mass,
            p,
            s_min,
            s_max,
            samples,
        } => {
            println!(
                "{:>6} {:>14} {:>14} {:>14} {:>14}",
                "p", "far_lower", "far_upper", "near_lower", "near_upper"
            );
            for p in p {
                let b = verify_h_asymptotics(mass, p, s_min, s_max, samples)?;
                println!(
                    "{:>6} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}",
                    p, b.far.lower, b.far.upper, b.near.lower, b.near.upper
                );
            }
            Ok(true)
        }
        Command::Phi {
            mass,
            growth,
            s_min,
            s_max,
            ds,
            out,
        } => {
            let n = ((s_max - s_min) / ds).round() as usize + 1;
            let grid = SpatialGrid::build_raw(mass, 2.0, s_min, s_max, n)?;
            let table = solve_phi(&grid, growth.unwrap_or(0.5 / mass))?;
            let residual = table.relative_residuals();
            let mut text = String::from("s,phi,dphi,residual,scaled\n");
            for i in 0..table.len() {
                let phi = table.phi(i);
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    table.s(i),
                    phi,
                    table.dphi(i),
                    residual[i] * phi,
                    table.scaled(i)
                ));
            }
            match out {
                Some(path) => fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(true)
        }
        Command::Solve(args) => solve(&args),
        Command::Riccati {
            p,
            n,
            eps,
            c,
            radius,
            rows,
        } => {
            let rp = RiccatiParams::new(p, n, eps, c, radius)?;
            let t_h = h_blowup_time(&rp);
            println!("t,H");
            let rows = rows.max(1);
            for k in 0..rows {
                // cluster rows towards the singularity
                let t = t_h * (1.0 - (1.0 - k as f64 / rows as f64).powi(2));
                println!("{},{}", t, h_closed_form(&rp, t)?);
            }
            println!("# blow-up time {t_h}");
            Ok(true)
        }
        Command::Sweep {
            config,
            mass,
            p,
            radius,
            epsilons,
            ds,
            cfl,
            threshold,
            tmax,
            outdir,
        } => {
            let mut cfg = match &config {
                Some(path) => SweepConfig::from_file(path)?,
                None => SweepConfig::default(),
            };
            let overrides = [
                ("mass", mass.map(|v| v.to_string())),
                ("p", p.map(|v| v.to_string())),
                ("radius", radius.map(|v| v.to_string())),
                ("epsilons", epsilons),
                ("ds", ds.map(|v| v.to_string())),
                ("cfl", cfl.map(|v| v.to_string())),
                ("threshold", threshold.map(|v| v.to_string())),
                ("tmax", tmax.map(|v| v.to_string())),
                ("outdir", outdir.map(|v| v.display().to_string())),
            ];
            for (key, value) in overrides {
                if let Some(v) = value {
                    cfg.set(key, &v)?;
                }
            }
            run_sweep(&cfg)
        }
        Command::Fit { input, slack, out } => {
            let records = read_sweep_csv(&input)?;
            let reports = fit_reports_by_p(&records, slack)?;
            let json = serde_json::to_string_pretty(&reports)?;
            let path =
                out.unwrap_or_else(|| input.parent().unwrap_or(Path::new(".")).join("fit.json"));
            fs::write(&path, json + "\n")?;
            for report in &reports {
                print!(
                    "p = {}: {:?} slope {:.4} intercept {:.4} r2 {:.5} (n = {})",
                    report.p,
                    report.fit.model,
                    report.fit.slope,
                    report.fit.intercept,
                    report.fit.r_squared,
                    report.fit.n_points
                );
                match report.target_slope {
                    Some(target) => println!(", target slope {target:.4}"),
                    None => println!(),
                }
            }
            Ok(reports.iter().all(|r| r.upper_bound.passed))
        }
    }
}

fn solve(args: &SolveArgs) -> Result<bool> {
    let params = if args.exploratory {
        ModelParams::exploratory(args.mass, args.p, args.eps, args.radius)?
    } else {
        ModelParams::new(args.mass, args.p, args.eps, args.radius)?
    };
    let grid = sized_grid(&params, args.tmax, args.ds)?;
    let table = solve_phi(&grid, params.growth_rate())?;
    let dt = cfl_dt(&grid, args.cfl)?;
    let state = init_state(&params, &grid, args.tmax)?;
    let config = RunConfig {
        threshold: threshold_for(&state, args.threshold),
        t_max: args.tmax,
        dt,
        sample_interval: SAMPLE_INTERVAL,
    };
    fs::create_dir_all(&args.out)?;

    let mut pending: Vec<f64> = args.snapshot.clone();
    pending.sort_by(f64::total_cmp);
    let mut snapshot_error = None;
    let out = run_from(&params, &grid, &table, state, &config, |st| {
        while let Some(&t) = pending.first() {
            if st.t + 0.5 * dt < t {
                break;
            }
            pending.remove(0);
            if let Err(e) = write_snapshot(&args.out, t, st, &grid) {
                snapshot_error.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = snapshot_error {
        return Err(e);
    }

    let summary = summarize(
        &params,
        out.record,
        out.samples,
        args.tmax,
        DEFAULT_TOLERANCE,
    )?;
    fs::write(
        args.out.join("lifespan.json"),
        serde_json::to_string_pretty(&summary.record)? + "\n",
    )?;
    write_monitor_csv(&args.out.join("monitor.csv"), &summary.samples, params.mass)?;
    fs::write(
        args.out.join("verification.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    println!(
        "{} at t = {:.6} (dt = {:.4e}, threshold = {:.4e})",
        summary.record.status.as_str(),
        summary.record.t_num,
        summary.record.dt,
        summary.record.threshold
    );
    report_checks(&summary);
    Ok(summary.passed())
}

fn write_snapshot(dir: &Path, t: f64, st: &FieldState, grid: &SpatialGrid) -> Result<()> {
    let u = physical_field_u(st, grid);
    let mut text = String::from("s,v,vt,u\n");
    for i in 0..grid.n {
        text.push_str(&format!(
            "{},{},{},{}\n",
            grid.s(i),
            st.v[i],
            st.vt[i],
            u[i]
        ));
    }
    fs::write(dir.join(format!("field_t{t}.csv")), text)?;
    Ok(())
}

fn report_checks(summary: &blowup_lab::experiments::RunSummary) {
    for c in &summary.inequalities.checks {
        println!(
            "  {:<34} {} (worst margin {:.3e} at t = {:.3})",
            c.name,
            if c.passed { "ok" } else { "VIOLATED" },
            c.worst_margin,
            c.worst_t
        );
    }
    if let Some(c) = &summary.comparison {
        println!(
            "  {:<34} {} (C = {:.4e}, T_H = {:.4}, margin {:.3e})",
            "comparison",
            if c.passed { "ok" } else { "VIOLATED" },
            c.c,
            c.h_blowup_time,
            c.min_margin
        );
    }
}

fn run_sweep(cfg: &SweepConfig) -> Result<bool> {
    let outcome = sweep(cfg)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    fs::create_dir_all(&cfg.out_dir)?;
    for (k, run) in outcome.runs.iter().enumerate() {
        write_monitor_csv(
            &cfg.out_dir.join(format!("monitor_{k:02}.csv")),
            &run.samples,
            cfg.mass,
        )?;
        let shift = run
            .threshold_shift()
            .map(|x| format!(", {:.2}% after the 1e3 level", 100.0 * x))
            .unwrap_or_default();
        println!(
            "eps = {:<10} {} at t = {:.4}{shift}",
            run.record.epsilon,
            run.record.status.as_str(),
            run.record.t_num
        );
        report_checks(run);
    }
    let records = outcome.records();
    let fits = match fit_report(&records, DEFAULT_SLACK) {
        Ok(f) => vec![f],
        Err(e) => {
            eprintln!("warning: no fit: {e}");
            Vec::new()
        }
    };
    emit_outputs(&records, &fits, &cfg.out_dir)?;
    fs::write(
        cfg.out_dir.join("verification.json"),
        serde_json::to_string_pretty(&outcome)? + "\n",
    )?;
    for f in &fits {
        println!(
            "fit {:?}: slope {:.4}, r2 {:.5}, upper bound {}",
            f.fit.model,
            f.fit.slope,
            f.fit.r_squared,
            if f.upper_bound.passed {
                "ok"
            } else {
                "VIOLATED"
            }
        );
    }
    Ok(outcome.verified() && fits.iter().all(|f| f.upper_bound.passed))
}
