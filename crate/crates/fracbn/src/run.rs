//! Command dispatch and artifact writing.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use fracbn_core::extension::{extend_column, extension_energy, neumann_trace, nodal_regions, ExtensionField, ExtensionGrid, ExtensionOptions, PoissonKernel};
use fracbn_core::lab::{
    bubble_fit, energy_limits_check, origin_check, record_of, rescale_positive, sweep_lambda, sweep_s, sweep_trends, zero_structure_check, SweepRecord,
};
use fracbn_core::profile::{sobolev_constant, theory_mu, SobolevOptions};
use fracbn_core::solver::{level_of, make_initial, minimize, multistart_inits, pick_best, sign_changes, sobolev_lambda, Levels, NodalSolution, SolverOptions};
use fracbn_core::{assemble_forms, ConstantsTable, FormMatrices, Params, RadialFn, RadialGrid};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Command, RunConfig};
use crate::error::{Result, RunError};
use crate::output::{self, EnergyJson, Manifest, SStepRow, SweepRow, TrendJson};

/// Forms, S_s and the bubble mass for one (n, s, R).
pub struct Setup {
    pub params: Params,
    pub forms: FormMatrices,
    pub s_sobolev: f64,
    pub bubble_mass: f64,
}

pub fn setup(params: &Params, elements: usize, gamma_inner: f64, gamma_outer: f64) -> fracbn_core::Result<Setup> {
    let base = params.with_lambda(0.0);
    let (forms, sob) = rayon::join(
        || {
            let grid = Arc::new(RadialGrid::build(&base, elements, gamma_inner, gamma_outer)?);
            assemble_forms(&grid, &base)
        },
        || sobolev_constant(&base, &SobolevOptions::default()),
    );
    let sob = sob?;
    Ok(Setup {
        params: base,
        forms: forms?,
        s_sobolev: sob.s_sobolev,
        bubble_mass: sob.bubble_mass,
    })
}

/// Multistart with the starts solved in parallel.
pub fn par_multistart(params: &Params, forms: &FormMatrices, opts: &SolverOptions) -> Result<NodalSolution> {
    let inits = multistart_inits(params, forms, opts.seed)?;
    let runs: Vec<_> = inits.par_iter().map(|u| minimize(params, forms, u, opts)).collect();
    Ok(pick_best(runs)?)
}

/// Extension with the r columns filled in parallel.
pub fn par_extend(u: &RadialFn, grid: ExtensionGrid, params: &Params) -> Result<ExtensionField> {
    let kernel = PoissonKernel::new(params.n, params.s)?;
    let columns: Vec<Vec<f64>> = grid
        .r_nodes
        .par_iter()
        .map(|&r| extend_column(&kernel, u, r, &grid.y_nodes))
        .collect();
    Ok(ExtensionField::from_columns(grid, columns, *params, u.clone())?)
}

/// Default extension options with the lowest y level pulled inside the
/// half-maximum radius of |u|.
pub fn extension_options_for(u: &RadialFn) -> ExtensionOptions {
    let sup = u.sup_norm();
    let half = u
        .grid
        .nodes()
        .iter()
        .zip(&u.values)
        .find(|(_, v)| v.abs() < 0.5 * sup)
        .map(|(r, _)| *r)
        .unwrap_or(u.grid.radius());
    let defaults = ExtensionOptions::default();
    ExtensionOptions {
        y_min: defaults.y_min.min(0.05 * half),
        ..defaults
    }
}

pub fn solver_options(cfg: &RunConfig) -> SolverOptions {
    SolverOptions {
        tol: cfg.tol,
        max_iters: cfg.max_iters,
        newton_switch: cfg.newton_switch,
        seed: cfg.seed,
        restarts: cfg.restarts,
        ..SolverOptions::default()
    }
}

struct Session<'a> {
    cfg: &'a RunConfig,
    times: Vec<(String, f64)>,
    outputs: Vec<PathBuf>,
}

impl Session<'_> {
    fn timed<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.times.push((name.to_string(), t.elapsed().as_secs_f64()));
        out
    }

    fn path(&mut self, file: &str) -> PathBuf {
        let p = self.cfg.out_dir.join(file);
        self.outputs.push(p.clone());
        p
    }

    fn params(&self) -> Result<Params> {
        Ok(Params::new(self.cfg.n, self.cfg.s, self.cfg.radius, 0.0)?)
    }

    fn setup(&mut self, params: &Params) -> Result<Setup> {
        let cfg = self.cfg;
        let st = self.timed("assembly", || setup(params, cfg.elements, cfg.gamma_inner, cfg.gamma_outer))?;
        if cfg.dump_matrices {
            let (ps, pm) = (self.path("stiffness.csv"), self.path("mass.csv"));
            output::write_matrix(&ps, &st.forms, "stiffness")?;
            output::write_matrix(&pm, &st.forms, "mass")?;
        }
        Ok(st)
    }
}

/// Runs one command; the manifest is written whatever happens.
pub fn run(cfg: &RunConfig) -> Manifest {
    let mut session = Session {
        cfg,
        times: Vec::new(),
        outputs: Vec::new(),
    };
    let result = output::ensure_dir(&cfg.out_dir).and_then(|_| {
        cfg.validate()?;
        dispatch(&mut session)
    });
    let mut manifest = Manifest {
        command: cfg.command.name().into(),
        config: Some(cfg.clone()),
        wall_times: session.times,
        outputs: session.outputs,
        ..Manifest::default()
    };
    match result {
        Ok(()) => manifest.status = "ok".into(),
        Err(e) => {
            manifest.status = e.kind().into();
            manifest.exit_code = e.exit_code();
            manifest.message = Some(e.to_string());
        }
    }
    write_manifest(&cfg.out_dir, &mut manifest);
    manifest
}

/// Best effort: a manifest that cannot be written is reported on stderr.
pub fn write_manifest(dir: &Path, manifest: &mut Manifest) {
    let path = dir.join("manifest.json");
    manifest.outputs.push(path.clone());
    let res = output::ensure_dir(dir).and_then(|_| output::write_json(&path, manifest));
    if let Err(e) = res {
        eprintln!("could not write manifest: {e}");
    }
}

fn dispatch(s: &mut Session) -> Result<()> {
    match s.cfg.command {
        Command::Constants => constants(s),
        Command::Solve => solve(s),
        Command::SweepLambda => sweep_lambda_cmd(s),
        Command::SweepS => sweep_s_cmd(s),
        Command::Extend => extend_cmd(s),
        Command::Report => report_cmd(s),
    }
}

#[derive(Serialize)]
struct ConstantsJson {
    n: u32,
    s: f64,
    c_ns: f64,
    d_s: f64,
    p_ns: f64,
    k_strauss: Option<f64>,
    omega_n: f64,
    s_sobolev: f64,
    bubble_energy: f64,
    bubble_mass: f64,
    theory_mu: f64,
}

fn constants(s: &mut Session) -> Result<()> {
    let params = s.params()?;
    let sob = s.timed("sobolev", || sobolev_constant(&params, &SobolevOptions::default()))?;
    let t = ConstantsTable::new(params.n, params.s, sob.s_sobolev)?;
    let out = ConstantsJson {
        n: t.n,
        s: t.s,
        c_ns: t.c_ns,
        d_s: t.d_s,
        p_ns: t.p_ns,
        k_strauss: t.k_strauss,
        omega_n: t.omega_n,
        s_sobolev: t.s_sobolev,
        bubble_energy: t.bubble_energy(),
        bubble_mass: sob.bubble_mass,
        theory_mu: theory_mu(&params, sob.s_sobolev, sob.bubble_mass),
    };
    // A closed pipe on stdout is not an error for the report file.
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&out)?);
    let p = s.path("report.json");
    output::write_json(&p, &out)
}

#[derive(Serialize)]
struct Window {
    c_n: f64,
    bubble: f64,
    lower: f64,
    upper: f64,
    inside: Option<bool>,
}

#[derive(Serialize)]
struct SolveJson {
    n: u32,
    s: f64,
    radius: f64,
    lambda: f64,
    lambda_frac: f64,
    lambda1: f64,
    s_sobolev: f64,
    energy: EnergyJson,
    sign_count: usize,
    nodes: Vec<f64>,
    residual: f64,
    iterations: usize,
    converged: bool,
    window: Window,
    strauss_ratio: Option<f64>,
    warnings: Vec<String>,
}

fn solve_at(s: &mut Session, st: &Setup) -> Result<(Params, NodalSolution, Levels)> {
    let cfg = s.cfg;
    let params = st.params.with_lambda(cfg.lambda_frac * st.forms.lambda1);
    let sl = s.timed("sobolev_lambda", || sobolev_lambda(&params, &st.forms, 1e-13, 20_000))?;
    let levels = Levels {
        c_n: level_of(&params, sl.value),
        bubble: level_of(&params, st.s_sobolev),
    };
    let opts = SolverOptions {
        levels: Some(levels),
        ..solver_options(cfg)
    };
    let sol = s.timed("solve", || {
        if cfg.multistart {
            par_multistart(&params, &st.forms, &opts)
        } else {
            let init = make_initial(cfg.init, &params, &st.forms)?;
            Ok(minimize(&params, &st.forms, &init, &opts)?)
        }
    })?;
    Ok((params, sol, levels))
}

fn solve_json(params: &Params, st: &Setup, sol: &NodalSolution, levels: Levels, frac: f64) -> SolveJson {
    SolveJson {
        n: params.n,
        s: params.s,
        radius: params.radius,
        lambda: params.lambda,
        lambda_frac: frac,
        lambda1: st.forms.lambda1,
        s_sobolev: st.s_sobolev,
        energy: (&sol.report).into(),
        sign_count: sol.nodes.len(),
        nodes: sol.nodes.clone(),
        residual: sol.residual_norm,
        iterations: sol.iterations,
        converged: sol.converged,
        window: Window {
            c_n: levels.c_n,
            bubble: levels.bubble,
            lower: 2.0 * levels.c_n,
            upper: levels.c_n + levels.bubble,
            inside: sol.window_ok,
        },
        strauss_ratio: sol.strauss_ratio,
        warnings: sol.warnings.clone(),
    }
}

fn check_converged(sol: &NodalSolution) -> Result<()> {
    if sol.converged {
        Ok(())
    } else {
        Err(RunError::NonConvergence(format!(
            "residual {:e} after {} iterations",
            sol.residual_norm, sol.iterations
        )))
    }
}

fn solve(s: &mut Session) -> Result<()> {
    let params = s.params()?;
    let st = s.setup(&params)?;
    let (params, sol, levels) = solve_at(s, &st)?;
    let p = s.path("solution.csv");
    output::write_solution(&p, &sol.u)?;
    let p = s.path("report.json");
    output::write_json(&p, &solve_json(&params, &st, &sol, levels, s.cfg.lambda_frac))?;
    check_converged(&sol)
}

#[derive(Serialize)]
struct FitJson {
    lambda_frac: f64,
    mu_hat: f64,
    theory_mu: f64,
    sup_error: f64,
    truncated: bool,
    converged: bool,
}

#[derive(Serialize)]
struct ZeroJson {
    lambda_frac: f64,
    ok: bool,
    stray: Vec<f64>,
    origin_value: f64,
}

#[derive(Serialize)]
struct OriginJson {
    values: Vec<f64>,
    min_abs: f64,
    max_abs: f64,
    decaying: bool,
    nonvanishing: Option<bool>,
    proxy_half_of_max: Option<bool>,
}

#[derive(Serialize)]
struct SweepJson {
    trends: Vec<TrendJson>,
    energy_limits: Vec<TrendJson>,
    energy_target: f64,
    origin: Option<OriginJson>,
    bubble_fits: Vec<FitJson>,
    fit_error_trend: Option<TrendJson>,
    zero_structure: Vec<ZeroJson>,
    max_sign_count: usize,
    all_converged: bool,
}

fn summarize(records: &[SweepRecord], params: &Params, s_sobolev: f64) -> SweepJson {
    let limits = energy_limits_check(records, params, s_sobolev);
    let origin = (params.s > 0.5).then(|| {
        let o = origin_check(records);
        OriginJson {
            values: o.values,
            min_abs: o.min_abs,
            max_abs: o.max_abs,
            decaying: o.decaying,
            nonvanishing: o.nonvanishing,
            proxy_half_of_max: o.proxy,
        }
    });
    SweepJson {
        trends: sweep_trends(records).iter().map(Into::into).collect(),
        energy_limits: limits.checks.iter().map(Into::into).collect(),
        energy_target: limits.target,
        origin,
        bubble_fits: Vec::new(),
        fit_error_trend: None,
        zero_structure: Vec::new(),
        max_sign_count: records.iter().filter(|r| r.converged).map(|r| r.sign_count).max().unwrap_or(0),
        all_converged: records.iter().all(|r| r.converged),
    }
}

fn sweep_lambda_cmd(s: &mut Session) -> Result<()> {
    let cfg = s.cfg;
    let params = s.params()?;
    let st = s.setup(&params)?;
    let opts = solver_options(cfg);
    let points = s.timed("sweep", || {
        sweep_lambda(&st.params, &st.forms, &cfg.lambda_fracs, &opts, Some(st.s_sobolev), None)
    })?;
    let records: Vec<SweepRecord> = points.iter().map(|p| p.record.clone()).collect();
    let rows: Vec<SweepRow> = records.iter().map(Into::into).collect();
    let p = s.path("sweep.csv");
    output::write_rows(&p, &rows)?;

    let mut summary = summarize(&records, &st.params, st.s_sobolev);
    let extent = 20.0 * theory_mu(&st.params, st.s_sobolev, st.bubble_mass);
    let mut errors = Vec::new();
    for pt in &points {
        let Some(sol) = &pt.solution else { continue };
        let params = st.params.with_lambda(pt.record.lambda);
        if pt.record.sign_count == 1 && pt.record.converged {
            let fit = rescale_positive(&pt.record, &sol.u, &params, extent, 401)
                .and_then(|r| bubble_fit(&r, &params, st.s_sobolev, st.bubble_mass).map(|f| (r.truncated, f)));
            if let Ok((truncated, f)) = fit {
                errors.push(f.sup_error);
                summary.bubble_fits.push(FitJson {
                    lambda_frac: pt.record.lambda_frac,
                    mu_hat: f.mu_hat,
                    theory_mu: f.theory_mu,
                    sup_error: f.sup_error,
                    truncated,
                    converged: f.converged,
                });
            }
        }
        let z = zero_structure_check(&sol.u, params.s, opts.zero_tol);
        summary.zero_structure.push(ZeroJson {
            lambda_frac: pt.record.lambda_frac,
            ok: z.ok,
            stray: z.stray,
            origin_value: z.origin_value,
        });
    }
    let fit_trend = fracbn_core::lab::trend("bubble_fit_sup_error", errors, fracbn_core::lab::Direction::Decreasing);
    summary.fit_error_trend = Some((&fit_trend).into());
    let p = s.path("report.json");
    output::write_json(&p, &summary)?;
    if summary.all_converged {
        Ok(())
    } else {
        Err(RunError::NonConvergence("at least one sweep point did not converge".into()))
    }
}

#[derive(Serialize)]
struct SSweepJson {
    steps: Vec<SStepRow>,
    last_sign_count: Option<usize>,
    any_jump: bool,
}

fn sweep_s_cmd(s: &mut Session) -> Result<()> {
    let cfg = s.cfg;
    let params = s.params()?;
    let setups: Vec<fracbn_core::Result<Setup>> = s.timed("assembly", || {
        cfg.s_list
            .par_iter()
            .map(|&order| setup(&params.with_s(order), cfg.elements, cfg.gamma_inner, cfg.gamma_outer))
            .collect()
    });
    let mut pending = setups.into_iter();
    let opts = solver_options(cfg);
    let steps = s.timed("sweep", || {
        sweep_s(&params, &cfg.s_list, cfg.lambda_frac, &opts, |_| {
            let st = pending.next().expect("one setup per s")?;
            Ok((st.forms, st.s_sobolev))
        })
    })?;
    let rows: Vec<SStepRow> = steps.iter().map(Into::into).collect();
    let p = s.path("sweep.csv");
    output::write_rows(&p, &rows)?;
    let summary = SSweepJson {
        last_sign_count: steps.last().filter(|x| x.converged).map(|x| x.sign_count),
        any_jump: steps.iter().any(|x| x.jump),
        steps: rows,
    };
    let p = s.path("report.json");
    output::write_json(&p, &summary)?;
    if steps.iter().all(|x| x.converged) {
        Ok(())
    } else {
        Err(RunError::NonConvergence("at least one s step did not converge".into()))
    }
}

#[derive(Serialize)]
struct Cell {
    r: f64,
    y: f64,
    w: f64,
}

#[derive(Serialize)]
struct TraceRow {
    r: f64,
    trace: f64,
    rhs: f64,
    low_confidence: bool,
}

#[derive(Serialize)]
struct ExtendJson {
    solve: SolveJson,
    extension_energy: f64,
    strip: f64,
    remainder: f64,
    gagliardo: f64,
    relative_gap: f64,
    nodal_regions: usize,
    nodal_regions_refined: usize,
    regions_agree: bool,
    trace_points: usize,
    trace_low_confidence: usize,
    trace_max_relative_deviation: f64,
}

fn extend_cmd(s: &mut Session) -> Result<()> {
    let params = s.params()?;
    let st = s.setup(&params)?;
    let (params, sol, levels) = solve_at(s, &st)?;
    check_converged(&sol)?;
    let grid = ExtensionGrid::build(&st.forms.grid, &extension_options_for(&sol.u))?;
    let refined = grid.refined();
    let field = s.timed("extend", || par_extend(&sol.u, grid, &params))?;
    let fine = s.timed("extend_refined", || par_extend(&sol.u, refined, &params))?;
    let energy = extension_energy(&field)?;
    let trace = s.timed("trace", || neumann_trace(&field))?;
    let q = params.crit_exp();
    let (_, nodes) = sign_changes(&sol.u, 1e-10);
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut trace_rows = Vec::with_capacity(trace.radii.len());
    for (k, &r) in trace.radii.iter().enumerate() {
        let u = sol.u.eval(r);
        let rhs = params.lambda * u + u.abs().powf(q - 2.0) * u;
        trace_rows.push(TraceRow {
            r,
            trace: trace.values[k],
            rhs,
            low_confidence: trace.low_confidence[k],
        });
        let near_node = nodes.iter().any(|z| (z - r).abs() < 0.05 * params.radius);
        if near_node || r < 0.1 * params.radius || r > 0.9 * params.radius || trace.low_confidence[k] {
            continue;
        }
        if rhs.abs() > 0.0 {
            worst = worst.max((trace.values[k] - rhs).abs() / rhs.abs());
            count += 1;
        }
    }
    let p = s.path("trace.csv");
    output::write_rows(&p, &trace_rows)?;
    let rows: Vec<Cell> = field
        .grid
        .r_nodes
        .iter()
        .enumerate()
        .flat_map(|(i, &r)| field.grid.y_nodes.iter().enumerate().map(move |(j, &y)| (i, j, r, y)))
        .map(|(i, j, r, y)| Cell { r, y, w: field.at(i, j) })
        .collect();
    let p = s.path("extension.csv");
    output::write_rows(&p, &rows)?;
    let p = s.path("solution.csv");
    output::write_solution(&p, &sol.u)?;
    let gag = st.forms.gagliardo_norm(&sol.u);
    let c1 = nodal_regions(&field, field.default_zero_tol());
    let c2 = nodal_regions(&fine, fine.default_zero_tol());
    let out = ExtendJson {
        solve: solve_json(&params, &st, &sol, levels, s.cfg.lambda_frac),
        extension_energy: energy.value,
        strip: energy.strip,
        remainder: energy.remainder,
        gagliardo: gag,
        relative_gap: (energy.total() - gag) / gag,
        nodal_regions: c1,
        nodal_regions_refined: c2,
        regions_agree: c1 == c2,
        trace_points: count,
        trace_low_confidence: trace.low_confidence.iter().filter(|b| **b).count(),
        trace_max_relative_deviation: worst,
    };
    let p = s.path("report.json");
    output::write_json(&p, &out)
}

fn report_cmd(s: &mut Session) -> Result<()> {
    let params = s.params()?;
    let src = s.cfg.out_dir.join("sweep.csv");
    if !src.exists() {
        return Err(RunError::Validation(format!("{} not found; run sweep-lambda first", src.display())));
    }
    let rows = output::read_sweep(&src)?;
    let records: Vec<SweepRecord> = rows.iter().map(Into::into).collect();
    let sob = sobolev_constant(&params, &SobolevOptions::default())?;
    let summary = summarize(&records, &params, sob.s_sobolev);
    let p = s.path("report.json");
    output::write_json(&p, &summary)
}

/// Record extraction for callers that solve on their own.
pub fn record(sol: &NodalSolution, params: &Params, frac: f64) -> SweepRecord {
    record_of(sol, params, frac, SolverOptions::default().zero_tol)
}
