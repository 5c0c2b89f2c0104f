//! Experiment execution: dispatch a validated config, write CSV ledgers
//! and plot data, and record a manifest echoing every resolved parameter.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rand_distr::{Distribution, Uniform};
use serde::Serialize;

use stoheat_core::analysis::{threshold_scan, FieldSampler, Lattice1d};
use stoheat_core::detmap::{apriori_check, lipschitz_estimate, solve_m_with, MSolverConfig};
use stoheat_core::drift::YosidaApprox;
use stoheat_core::grid::{FieldRole, GridSpec, SpaceTimeField, WeightParams};
use stoheat_core::kernel::HeatSemigroup;
use stoheat_core::noise::{covariance_estimate, dalang_integral, NoiseSynth};
use stoheat_core::par::{replica_map, replica_rng, with_workers};
use stoheat_core::stochastic::{
    find_contracting_horizon, ito_isometry_quadrature, mild_residual, moment_bound_estimate,
    picard_assumption_warnings, picard_solve_on_path, point_variance_estimate, PicardParams,
};

use crate::accept;
use crate::config::{ExperimentKind, ResolvedExperiment};

#[derive(Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    /// For full-acceptance runs: whether every criterion passed.
    pub all_pass: Option<bool>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    version: &'a str,
    kind: &'a str,
    seed: u64,
    workers: usize,
    wall_time_s: f64,
    config: &'a crate::config::ExperimentConfig,
}

fn write_rows(dir: &Path, name: &str, header: &str, rows: &[String]) -> Result<()> {
    let path = dir.join(name);
    let mut f = fs::File::create(&path).with_context(|| format!("creating {path:?}"))?;
    writeln!(f, "{header}")?;
    for row in rows {
        writeln!(f, "{row}")?;
    }
    Ok(())
}

/// Execute the experiment, honoring an explicit worker count. Partial
/// outputs are retained on failure and the manifest records the error.
pub fn run_experiment(
    resolved: &ResolvedExperiment,
    workers: Option<usize>,
    out_dir: &Path,
) -> Result<RunOutput> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {out_dir:?}"))?;
    let started = Instant::now();
    let effective_workers = workers.unwrap_or_else(|| {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    });
    let result = match workers {
        Some(w) => with_workers(w, || dispatch(resolved, out_dir)),
        None => dispatch(resolved, out_dir),
    };
    let wall = started.elapsed().as_secs_f64();
    let (status, error, all_pass) = match &result {
        Ok(all_pass) => ("ok", None, *all_pass),
        Err(e) => ("failed", Some(format!("{e:#}")), None),
    };
    let manifest = Manifest {
        status,
        error,
        version: env!("CARGO_PKG_VERSION"),
        kind: resolved.config.kind.as_str(),
        seed: resolved.config.seed,
        workers: effective_workers,
        wall_time_s: wall,
        config: &resolved.config,
    };
    fs::write(out_dir.join("manifest.toml"), toml::to_string_pretty(&manifest)?)?;
    result.map(|_| RunOutput { dir: out_dir.to_owned(), all_pass })
}

fn dispatch(resolved: &ResolvedExperiment, dir: &Path) -> Result<Option<bool>> {
    match resolved.config.kind {
        ExperimentKind::DeterministicMap => run_deterministic_map(resolved, dir).map(|_| None),
        ExperimentKind::Yosida => run_yosida(resolved, dir).map(|_| None),
        ExperimentKind::NoiseValidate => run_noise_validate(resolved, dir).map(|_| None),
        ExperimentKind::StochConv => run_stoch_conv(resolved, dir).map(|_| None),
        ExperimentKind::Picard => run_picard(resolved, dir).map(|_| None),
        ExperimentKind::Kolmogorov => run_kolmogorov(resolved, dir).map(|_| None),
        ExperimentKind::FullAcceptance => run_full_acceptance(resolved, dir).map(Some),
    }
}

fn smoothed_input(
    grid: GridSpec,
    semigroup: &HeatSemigroup,
    scale: f64,
    seed: u64,
    stream: u64,
) -> SpaceTimeField {
    let mut rng = replica_rng(seed, stream);
    let dist = Uniform::new_inclusive(-scale, scale).unwrap();
    let nodes = grid.node_count();
    let rough_a: Vec<f64> = (0..nodes).map(|_| dist.sample(&mut rng)).collect();
    let rough_b: Vec<f64> = (0..nodes).map(|_| dist.sample(&mut rng)).collect();
    let a = semigroup.apply(&rough_a, 0.05).unwrap();
    let b = semigroup.apply(&rough_b, 0.05).unwrap();
    let mut field = SpaceTimeField::zero(grid, FieldRole::Input);
    for k in 0..=grid.steps() {
        let frac = grid.time_value(k) / grid.horizon();
        let slice = field.slice_mut(k);
        for i in 0..nodes {
            slice[i] = a[i] + frac * (b[i] - a[i]);
        }
    }
    field
}

fn run_deterministic_map(r: &ResolvedExperiment, dir: &Path) -> Result<()> {
    let grid = r.grid;
    let seed = r.config.seed;
    let theta = r.config.weights.theta;
    let semigroup = HeatSemigroup::new(grid);
    let cfg = MSolverConfig::implicit(r.drift.clone(), grid.dt())?;
    let weights: Vec<WeightParams> = r
        .centers
        .iter()
        .map(|&c| WeightParams::new(theta, c, &grid))
        .collect::<std::result::Result<_, _>>()?;

    struct PairRow {
        ratios: Vec<(usize, f64)>,
        max_ratio: f64,
        spread: f64,
        apriori: (f64, f64, bool),
    }
    let pairs: Vec<PairRow> = replica_map(r.config.replicas, |i| {
        let z1 = smoothed_input(grid, &semigroup, 1.0, seed, 2 * i as u64);
        let z2 = smoothed_input(grid, &semigroup, 1.0, seed, 2 * i as u64 + 1);
        let rep = lipschitz_estimate(&z1, &z2, &cfg, &weights).expect("distinct random pair");
        let u1 = solve_m_with(&z1, &cfg, &semigroup).expect("solve");
        let ap = apriori_check(&z1, &u1, &r.drift, grid.horizon());
        PairRow {
            ratios: rep.per_center.iter().enumerate().map(|(c, cr)| (c, cr.ratio)).collect(),
            max_ratio: rep.max_ratio,
            spread: rep.spread,
            apriori: (ap.lhs, ap.rhs, ap.pass),
        }
    });

    let mut ratio_rows = Vec::new();
    let mut summary_rows = Vec::new();
    let mut apriori_rows = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        for (c, ratio) in &p.ratios {
            ratio_rows.push(format!("{i},{c},{ratio}"));
        }
        summary_rows.push(format!("{i},{},{}", p.max_ratio, p.spread));
        apriori_rows.push(format!("{i},{},{},{}", p.apriori.0, p.apriori.1, p.apriori.2));
    }
    write_rows(dir, "lipschitz.csv", "pair,center,ratio", &ratio_rows)?;
    write_rows(dir, "lipschitz_summary.csv", "pair,max_ratio,spread", &summary_rows)?;
    write_rows(dir, "apriori.csv", "pair,lhs,rhs,pass", &apriori_rows)?;
    write_rows(
        dir,
        "plot_ratio_vs_pair.csv",
        "pair,max_ratio",
        &pairs.iter().enumerate().map(|(i, p)| format!("{i},{}", p.max_ratio)).collect::<Vec<_>>(),
    )?;
    Ok(())
}

fn run_yosida(r: &ResolvedExperiment, dir: &Path) -> Result<()> {
    let seed = r.config.seed;
    let drift = &r.drift;
    let mut rng = replica_rng(seed, 0);
    let dist = Uniform::new_inclusive(-5.0f64, 5.0).unwrap();
    let mut samples: Vec<f64> = (0..10_000).map(|_| dist.sample(&mut rng)).collect();
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut rows = Vec::new();
    let mut pointwise = Vec::new();
    for &n in &[1u32, 10, 100] {
        let y = YosidaApprox::new(drift.clone(), n)?;
        let phi_n: Vec<f64> = samples.iter().map(|&u| y.phi_n(u).unwrap()).collect();
        let mut lip = f64::NEG_INFINITY;
        for w in samples.windows(2).zip(phi_n.windows(2)) {
            let (us, ps) = w;
            lip = lip.max((ps[1] - ps[0]).abs() - 2.0 * n as f64 * (us[1] - us[0]).abs());
        }
        let mono =
            phi_n.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        let dom = samples
            .iter()
            .zip(&phi_n)
            .map(|(&u, &pn)| pn.abs() - drift.phi(u).abs())
            .fold(f64::NEG_INFINITY, f64::max);
        rows.push(format!("{n},{lip},{mono},{dom}"));
        for j in 0..20 {
            let u = -4.75 + 0.5 * j as f64;
            let err = (y.phi_n(u).unwrap() - drift.phi(u)).abs();
            pointwise.push(format!("{u},{n},{err}"));
        }
    }
    write_rows(
        dir,
        "yosida.csv",
        "n,lipschitz_2n_excess,monotone_increase,domination_excess",
        &rows,
    )?;
    write_rows(dir, "yosida_pointwise.csv", "u,n,error", &pointwise)?;
    Ok(())
}

fn run_noise_validate(r: &ResolvedExperiment, dir: &Path) -> Result<()> {
    let grid = r.grid;
    let seed = r.config.seed;
    let synth = NoiseSynth::new(r.noise, grid);
    let dt = grid.dt();
    let draws = r.config.replicas.max(100);
    let samples: Vec<_> = replica_map(draws, |i| {
        let mut rng = replica_rng(seed, i as u64);
        synth.increment(dt, &mut rng)
    });
    let max_lag = grid.points_per_dim() / 8; // r <= L/4
    let lags: Vec<usize> = (0..8).map(|k| max_lag * k / 7).collect();
    let rows = covariance_estimate(&r.noise, &samples, &lags)?;
    let cov_rows: Vec<String> = rows
        .iter()
        .map(|c| {
            let z = (c.empirical - c.target).abs() / c.std_error;
            format!(
                "{},{},{},{},{},{},{z}",
                c.lag, c.lag_distance, c.empirical, c.std_error, c.target, c.target_lattice
            )
        })
        .collect();
    write_rows(
        dir,
        "covariance.csv",
        "lag,distance,empirical,std_error,target,target_lattice,z_score",
        &cov_rows,
    )?;
    write_rows(
        dir,
        "plot_cov_vs_lag.csv",
        "distance,empirical,target",
        &rows.iter().map(|c| format!("{},{},{}", c.lag_distance, c.empirical, c.target)).collect::<Vec<_>>(),
    )?;

    let mut dalang_rows = Vec::new();
    for k in 1..=9u32 {
        let eta = k as f64 / 10.0;
        let rep = dalang_integral(&r.noise, eta, 100.0)?;
        dalang_rows.push(format!("{eta},{},{}", rep.value, rep.finite));
    }
    write_rows(dir, "dalang.csv", "eta,integral_to_cutoff,finite", &dalang_rows)?;

    if r.config.dump_fields {
        // The sampled path from stream 0 as one field: slice k+1 holds
        // increment k.
        let mut rng = replica_rng(seed, 0);
        let mut values = vec![0.0; grid.node_count()];
        for _ in 0..grid.steps() {
            values.extend_from_slice(&synth.increment(dt, &mut rng).values);
        }
        let field = SpaceTimeField::from_values(grid, FieldRole::NoiseIncrement, values)
            .map_err(|e| anyhow::anyhow!(e.to_string()))?;
        let f = fs::File::create(dir.join("increments.shf"))?;
        stoheat_core::field_io::write_field(f, &field)?;
    }
    Ok(())
}

fn run_stoch_conv(r: &ResolvedExperiment, dir: &Path) -> Result<()> {
    let grid = r.grid;
    let seed = r.config.seed;
    let p = r.config.weights.p;
    let theta = r.config.weights.theta;
    let replicas = r.config.replicas.max(30);
    let quarter = grid.with_horizon(grid.horizon() / 4.0, (grid.steps() / 4).max(1))?;

    let mut moment_rows = Vec::new();
    // Deterministic coefficient field: sigma evaluated on the zero field.
    let coeff = r.sigma.eval(0.0);
    for g in [quarter, grid] {
        let sigma_field = SpaceTimeField::from_fn(g, FieldRole::Generic, |_, _| coeff);
        let report = moment_bound_estimate(
            &r.noise,
            g,
            &sigma_field,
            p,
            theta,
            &r.centers,
            replicas,
            seed,
        )?;
        moment_rows.push(format!(
            "{},{p},{theta},{},{},{}",
            g.horizon(),
            report.estimate.value,
            report.estimate.std_error,
            report.empirical_constant
        ));
        for w in &report.hypothesis_warnings {
            eprintln!("warning: {w}");
        }
    }
    write_rows(dir, "moments.csv", "horizon,p,theta,value,std_error,constant", &moment_rows)?;
    write_rows(
        dir,
        "plot_moment_vs_T.csv",
        "horizon,value",
        &moment_rows
            .iter()
            .map(|row| {
                let cols: Vec<&str> = row.split(',').collect();
                format!("{},{}", cols[0], cols[3])
            })
            .collect::<Vec<_>>(),
    )?;

    let one = SpaceTimeField::from_fn(grid, FieldRole::Generic, |_, _| 1.0);
    let (var, se) = point_variance_estimate(&r.noise, grid, &one, replicas, seed ^ 0x55)?;
    let quad = ito_isometry_quadrature(grid.horizon(), 50_000);
    write_rows(
        dir,
        "point_variance.csv",
        "variance,std_error,isometry_quadrature",
        &[format!("{var},{se},{quad}")],
    )?;
    Ok(())
}

fn run_picard(r: &ResolvedExperiment, dir: &Path) -> Result<()> {
    let grid = r.grid;
    let seed = r.config.seed;
    let semigroup = HeatSemigroup::new(grid);
    let params = PicardParams {
        p: r.config.weights.p,
        theta: r.config.weights.theta,
        tol: r.config.tol,
        max_iter: r.config.max_iter,
        centers: r.centers.clone(),
        scheme: stoheat_core::detmap::DriftScheme::ImplicitResolvent,
    };
    let warnings =
        picard_assumption_warnings(&r.drift, &r.noise, grid.dim(), params.p, params.theta);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let synth = NoiseSynth::new(r.noise, grid);

    struct PathOut {
        converged: bool,
        iterations: usize,
        deltas: Vec<f64>,
        ratios: Vec<f64>,
        residual: f64,
    }
    let outs: Vec<PathOut> = replica_map(r.config.replicas, |i| {
        let mut rng = replica_rng(seed, i as u64);
        let path = synth.path(&mut rng);
        let u0: Vec<f64> = {
            let mut init_rng = replica_rng(seed ^ 0xbeef, i as u64);
            let dist = Uniform::new_inclusive(-0.5f64, 0.5).unwrap();
            let rough: Vec<f64> =
                (0..grid.node_count()).map(|_| dist.sample(&mut init_rng)).collect();
            semigroup.apply(&rough, 0.05).unwrap()
        };
        match picard_solve_on_path(
            &u0,
            &r.drift,
            &r.sigma,
            grid,
            &path,
            &params,
            None,
            warnings.clone(),
        ) {
            Ok(sol) => {
                let residual = mild_residual(
                    &sol.solution,
                    &u0,
                    &r.drift,
                    &r.sigma,
                    &path,
                    params.theta,
                    &params.centers,
                )
                .unwrap_or(f64::NAN);
                PathOut {
                    converged: sol.state.converged,
                    iterations: sol.state.iterations,
                    deltas: sol.state.deltas,
                    ratios: sol.state.ratios,
                    residual,
                }
            }
            Err(stoheat_core::stochastic::StochasticError::NonContraction { state }) => PathOut {
                converged: false,
                iterations: state.iterations,
                deltas: state.deltas,
                ratios: state.ratios,
                residual: f64::NAN,
            },
            Err(e) => panic!("picard replica failed: {e}"),
        }
    });

    let mut path_rows = Vec::new();
    let mut iter_rows = Vec::new();
    for (i, o) in outs.iter().enumerate() {
        let final_delta = o.deltas.last().copied().unwrap_or(0.0);
        path_rows.push(format!(
            "{i},{},{},{final_delta},{}",
            o.converged, o.iterations, o.residual
        ));
        for (k, d) in o.deltas.iter().enumerate() {
            let ratio =
                if k >= 1 { o.ratios.get(k - 1).map(|r| r.to_string()) } else { None };
            iter_rows.push(format!("{i},{},{d},{}", k + 1, ratio.unwrap_or_default()));
        }
    }
    write_rows(
        dir,
        "picard_paths.csv",
        "replica,converged,iterations,final_delta,residual",
        &path_rows,
    )?;
    write_rows(dir, "picard_iters.csv", "replica,iteration,delta,ratio", &iter_rows)?;

    // Mean contraction ratio per iteration index, for plotting.
    let max_iters = outs.iter().map(|o| o.ratios.len()).max().unwrap_or(0);
    let mut plot_rows = Vec::new();
    for k in 0..max_iters {
        let vals: Vec<f64> = outs.iter().filter_map(|o| o.ratios.get(k).copied()).collect();
        if !vals.is_empty() {
            plot_rows.push(format!(
                "{},{}",
                k + 2,
                vals.iter().sum::<f64>() / vals.len() as f64
            ));
        }
    }
    write_rows(dir, "plot_contraction.csv", "iteration,mean_ratio", &plot_rows)?;

    // Working-horizon search, one path per trial.
    let u0 = vec![0.0; grid.node_count()];
    let search = find_contracting_horizon(
        &u0,
        &r.drift,
        &r.sigma,
        &r.noise,
        grid,
        params.p,
        params.theta,
        grid.horizon(),
        seed ^ 0x7071,
    )?;
    let mut search_rows: Vec<String> = search
        .trials
        .iter()
        .enumerate()
        .map(|(i, (t, ok))| format!("{i},{t},{ok}"))
        .collect();
    search_rows.push(format!(
        "found,{},true",
        search.horizon.map(|h| h.to_string()).unwrap_or_else(|| "none".into())
    ));
    write_rows(dir, "horizon_search.csv", "trial,horizon,contracted", &search_rows)?;

    if r.config.dump_fields {
        let mut rng = replica_rng(seed, 0);
        let path = synth.path(&mut rng);
        let u0: Vec<f64> = {
            let mut init_rng = replica_rng(seed ^ 0xbeef, 0);
            let dist = Uniform::new_inclusive(-0.5f64, 0.5).unwrap();
            let rough: Vec<f64> =
                (0..grid.node_count()).map(|_| dist.sample(&mut init_rng)).collect();
            semigroup.apply(&rough, 0.05).unwrap()
        };
        let sol = picard_solve_on_path(
            &u0,
            &r.drift,
            &r.sigma,
            grid,
            &path,
            &params,
            None,
            Vec::new(),
        )?;
        let f = fs::File::create(dir.join("solution_replica0.shf"))?;
        stoheat_core::field_io::write_field(f, &sol.solution)?;
    }
    Ok(())
}

fn run_kolmogorov(r: &ResolvedExperiment, dir: &Path) -> Result<()> {
    let seed = r.config.seed;
    let lat = Lattice1d::new(r.grid.half_width(), r.grid.points_per_dim())
        .map_err(|e| anyhow::anyhow!(e.to_string()))?;
    let sampler = match r.config.kolmogorov.sampler.as_str() {
        "brownian" => FieldSampler::Brownian,
        _ => FieldSampler::Stationary {
            gamma: r.config.kolmogorov.gamma.unwrap_or(0.5),
            corr_len: r.config.kolmogorov.corr_len.unwrap_or(1.0),
        },
    };
    let centers: Vec<f64> = r.centers.iter().map(|c| c[0]).collect();
    let rows = threshold_scan(
        &sampler,
        &lat,
        r.config.weights.p,
        &r.config.kolmogorov.thetas,
        &centers,
        r.config.replicas.max(30),
        seed,
    )
    .map_err(|e| anyhow::anyhow!(e.to_string()))?;
    let threshold = sampler.theta_threshold(r.config.weights.p);
    let csv_rows: Vec<String> = rows
        .iter()
        .map(|row| {
            format!(
                "{},{},{},{},{},{threshold}",
                row.theta, row.estimate, row.estimate_doubled, row.rel_change, row.stable
            )
        })
        .collect();
    write_rows(
        dir,
        "kolmogorov_scan.csv",
        "theta,estimate,estimate_doubled,rel_change,stable,analytic_threshold",
        &csv_rows,
    )?;
    write_rows(
        dir,
        "plot_estimate_vs_theta.csv",
        "theta,estimate",
        &rows.iter().map(|row| format!("{},{}", row.theta, row.estimate)).collect::<Vec<_>>(),
    )?;
    Ok(())
}

fn run_full_acceptance(r: &ResolvedExperiment, dir: &Path) -> Result<bool> {
    let outcomes = accept::run_all(r.config.seed);
    fs::write(dir.join("acceptance.csv"), accept::outcomes_csv(&outcomes))?;
    for line in accept::summary_lines(&outcomes) {
        println!("{line}");
    }
    Ok(outcomes.iter().all(|o| o.pass))
}

/// Resolve where a run writes: explicit flag, then config, then the
/// `STOHEAT_OUT` environment base, then `./runs`.
pub fn resolve_out_dir(
    cli_out: Option<PathBuf>,
    cfg_out: Option<PathBuf>,
    kind: ExperimentKind,
    seed: u64,
) -> PathBuf {
    if let Some(d) = cli_out {
        return d;
    }
    if let Some(d) = cfg_out {
        return d;
    }
    let base = std::env::var_os("STOHEAT_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    base.join(format!("{}-seed{}", kind.as_str(), seed))
}

/// Validate that a directory looks like a finished run.
pub fn assert_run_dir(dir: &Path) -> Result<()> {
    if !dir.join("manifest.toml").exists() {
        bail!("no ledgers found in {dir:?} (missing manifest.toml)");
    }
    Ok(())
}
