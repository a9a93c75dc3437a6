use std::io::Write;
use std::path::{Path, PathBuf};

use twedge::experiments::{
    ladder, run_locallaw, run_power, run_rigidity, run_size, run_table1, run_universality, simulate,
    ExperimentConfig, SpectrumSource, TableResult,
};
use twedge::model::{BuiltinSigma, ComplexPoint, ModelSpec, PhiBounds, PopulationSpectrum, RadiusLaw};
use twedge::mp_law::{edge_params, validate_conditions, EdgeParams, MARGIN_WARNING};
use twedge::tw_reference::{
    cache_file_name, goe_percentiles, onatski_critical, tw1_probabilities, tw1_table, CalibrationCache,
    CalibrationResult, CalibrationSpec, GoeSampling, StatisticKind,
};

use crate::args::*;
use crate::config::ConfigFile;
use crate::error::CliError;

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Per-subcommand defaults for the desk and heavy profiles.
struct Defaults {
    dim: usize,
    reps: usize,
    heavy_reps: usize,
}

impl Defaults {
    fn reps(&self, profile: Profile) -> usize {
        match profile {
            Profile::Desk => self.reps,
            Profile::Heavy => self.heavy_reps,
        }
    }
}

fn calibration_defaults(profile: Profile) -> (usize, usize) {
    match profile {
        Profile::Desk => (500, 10_000),
        Profile::Heavy => (3000, 30_000),
    }
}

fn load_config(model: &ModelArgs) -> CliResult<ConfigFile> {
    match &model.config {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::default()),
    }
}

/// Where the spectrum comes from and a short name for labels.
fn spectrum_source(model: &ModelArgs, cfg: &ConfigFile) -> CliResult<(SpectrumSource, String)> {
    let from_path = |p: &Path| -> CliResult<(SpectrumSource, String)> {
        let s = PopulationSpectrum::from_file(p).map_err(|e| usage(format!("{}: {e}", e.name())))?;
        let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "file".into());
        Ok((SpectrumSource::Fixed(s), name))
    };
    if let Some(name) = &model.builtin {
        let b: BuiltinSigma = name.parse().map_err(|e: twedge::Error| usage(format!("{}: {e}", e.name())))?;
        return Ok((SpectrumSource::Builtin(b), b.to_string()));
    }
    if let Some(p) = &model.spectrum_file {
        return from_path(p);
    }
    if let Some(spec) = &cfg.spectrum {
        if let Ok(b) = spec.parse::<BuiltinSigma>() {
            return Ok((SpectrumSource::Builtin(b), b.to_string()));
        }
        let p = PathBuf::from(spec);
        let p = match (&cfg.base, p.is_relative()) {
            (Some(base), true) => base.join(p),
            _ => p,
        };
        return from_path(&p);
    }
    Err(usage("no spectrum given: use --builtin, --spectrum-file or `spectrum` in --config"))
}

/// `(M, N)` from flags, config and defaults. An explicit φ fills in a
/// missing dimension and must agree with explicit `M` and `N`.
fn dimensions(model: &ModelArgs, cfg: &ConfigFile, default_n: usize) -> CliResult<(usize, usize)> {
    let m = model.m.or(cfg.m);
    let n = model.n.or(cfg.n);
    let phi = model.phi.or(cfg.phi);
    if let Some(p) = phi {
        if !(p > 0.0) || !p.is_finite() {
            return Err(usage(format!("phi must be positive, got {p}")));
        }
    }
    let round = |x: f64| x.round().max(1.0) as usize;
    let (m, n) = match (m, n, phi) {
        (Some(m), Some(n), Some(p)) => {
            if ((m as f64 / n as f64) - p).abs() > 1e-9 * p {
                return Err(usage(format!("phi = {p} disagrees with M/N = {m}/{n}")));
            }
            (m, n)
        }
        (Some(m), Some(n), None) => (m, n),
        (Some(m), None, Some(p)) => (m, round(m as f64 / p)),
        (None, Some(n), Some(p)) => (round(p * n as f64), n),
        (None, None, Some(p)) => (round(p * default_n as f64), default_n),
        (Some(m), None, None) => (m, m),
        (None, Some(n), None) => (n, n),
        (None, None, None) => (default_n, default_n),
    };
    Ok((m, n))
}

fn radius(model: &ModelArgs, cfg: &ConfigFile) -> CliResult<RadiusLaw> {
    match model.radius.as_ref().or(cfg.radius.as_ref()) {
        Some(r) => r.parse().map_err(|e: twedge::Error| usage(format!("{}: {e}", e.name()))),
        None => Ok(RadiusLaw::ChiGaussian),
    }
}

fn seed(run: &RunArgs, cfg: &ConfigFile) -> CliResult<u64> {
    run.seed
        .or(cfg.seed)
        .ok_or_else(|| usage("--seed is required: every random computation must be reproducible"))
}

/// A validated experiment configuration.
fn experiment(model: &ModelArgs, run: &RunArgs, defaults: &Defaults) -> CliResult<ExperimentConfig> {
    let cfg = load_config(model)?;
    let (source, name) = spectrum_source(model, &cfg)?;
    let (m, n) = dimensions(model, &cfg, defaults.dim)?;
    let law = radius(model, &cfg)?;
    let seed = seed(run, &cfg)?;
    let reps = run.reps.or(cfg.reps).unwrap_or(defaults.reps(run.profile));
    if reps == 0 {
        return Err(usage("--reps must be >= 1"));
    }
    let workers = run.workers.or(cfg.workers).unwrap_or(1);
    let spectrum = source
        .resolve(m, m as f64 / n as f64)
        .map_err(|e| usage(format!("{}: {e}", e.name())))?;
    let spec = ModelSpec::new(m, n, spectrum, law.clone()).map_err(|e| usage(format!("{}: {e}", e.name())))?;
    Ok(ExperimentConfig::new(spec, reps, seed)?
        .with_label(format!("{name}/{law}/{m}x{n}"))
        .with_workers(workers))
}

fn print(text: &str) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn emit_table(table: &TableResult, output: &OutputArgs) -> CliResult<()> {
    if let Some(dir) = &output.output {
        let (csv, json) = table.write(dir)?;
        eprintln!("wrote {} and {}", csv.display(), json.display());
    }
    print(&if output.json { table.to_json() } else { table.to_csv() })
}

fn edge(args: &EdgeArgs) -> CliResult<()> {
    let cfg = load_config(&args.model)?;
    let (source, _) = spectrum_source(&args.model, &cfg)?;
    let m = args.model.m.or(cfg.m);
    let n = args.model.n.or(cfg.n);
    let phi = match (args.model.phi.or(cfg.phi), m, n) {
        (Some(p), _, _) => p,
        (None, Some(m), Some(n)) => m as f64 / n as f64,
        _ => return Err(usage("edge needs --phi, or both --M and --N")),
    };
    if !(phi > 0.0) || !phi.is_finite() {
        return Err(usage(format!("phi must be positive, got {phi}")));
    }
    let spectrum = match (&source, m) {
        (SpectrumSource::Builtin(BuiltinSigma::Identity), _) => source.resolve(2, phi),
        (SpectrumSource::Builtin(b), None) => return Err(usage(format!("builtin `{b}` depends on M: pass --M"))),
        (_, Some(m)) => source.resolve(m, phi),
        (SpectrumSource::Fixed(s), None) => Ok(s.clone()),
    }
    .map_err(|e| usage(format!("{}: {e}", e.name())))?;
    let report = validate_conditions(&spectrum, phi, PhiBounds::default());
    if !report.phi_ok {
        eprintln!("warning: phi = {phi} outside the supported range");
    }
    let e = edge_params(&spectrum, phi)?;
    if e.condition_margin <= MARGIN_WARNING {
        eprintln!("warning: condition margin {} is within {MARGIN_WARNING} of zero", e.condition_margin);
    }
    if args.output.json {
        let doc = serde_json::json!({
            "phi": phi,
            "c": e.c,
            "lambda_plus": e.lambda_plus,
            "gamma": e.gamma,
            "condition_margin": e.condition_margin,
        });
        print(&serde_json::to_string_pretty(&doc).expect("edge serializes"))
    } else {
        print(&format!(
            "phi={phi}\nc={}\nlambda_plus={}\ngamma={}\ncondition_margin={}",
            e.c, e.lambda_plus, e.gamma, e.condition_margin
        ))
    }
}

fn read_edge(path: &Path) -> CliResult<EdgeParams> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{} is not an edge JSON document: {e}", path.display())))
}

fn simulate_cmd(args: &SimulateArgs) -> CliResult<()> {
    let defaults = Defaults {
        dim: 200,
        reps: 2000,
        heavy_reps: 10_000,
    };
    let edge = args.edge_from.as_deref().map(read_edge).transpose()?;
    let cfg = experiment(&args.model, &args.run, &defaults)?;
    let sim = simulate(&cfg, edge)?;
    let csv = sim.to_csv();
    if let Some(dir) = &args.output.output {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("simulate_seed{}.csv", cfg.master_seed));
        std::fs::write(&path, &csv)?;
        eprintln!("wrote {}", path.display());
    }
    if args.output.json {
        print(&serde_json::to_string_pretty(&sim).expect("simulation serializes"))
    } else {
        print(&csv)
    }
}

fn table1(args: &Table1Args) -> CliResult<()> {
    let defaults = Defaults {
        dim: 200,
        reps: 2000,
        heavy_reps: 10_000,
    };
    let cfg = experiment(&args.model, &args.run, &defaults)?;
    emit_table(&run_table1(&cfg)?, &args.output)
}

fn calibration_spec(run: &RunArgs, cal: &CalibrationArgs, seed: u64) -> CalibrationSpec {
    let (dim, reps) = calibration_defaults(run.profile);
    CalibrationSpec::new(cal.calib_dim.unwrap_or(dim), cal.calib_reps.unwrap_or(reps), cal.calib_seed.unwrap_or(seed))
        .sampling(if cal.dense { GoeSampling::Dense } else { GoeSampling::Tridiagonal })
        .workers(run.workers.unwrap_or(1))
}

fn cached_onatski(cache: &CacheArgs, spec: &CalibrationSpec) -> CliResult<CalibrationResult> {
    let dir = cache.cache_dir.as_ref().ok_or_else(|| {
        twedge::Error::MissingCalibration("no cache directory: set --cache-dir or TWEDGE_CACHE".into())
    })?;
    CalibrationCache::new(dir)
        .get(StatisticKind::OnatskiRatio, spec)?
        .ok_or_else(|| {
            twedge::Error::MissingCalibration(format!(
                "{} not found in {}; run calibrate-onatski first",
                cache_file_name(StatisticKind::OnatskiRatio, spec),
                dir.display()
            ))
            .into()
        })
}

fn alpha_value(flag: Option<f64>, model: &ModelArgs) -> CliResult<f64> {
    let alpha = flag.or(load_config(model)?.alpha).unwrap_or(0.05);
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(usage(format!("--alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(alpha)
}

fn test_size(args: &TestSizeArgs) -> CliResult<()> {
    let defaults = Defaults {
        dim: 100,
        reps: 2000,
        heavy_reps: 10_000,
    };
    let alpha = alpha_value(args.alpha, &args.model)?;
    let cfg = experiment(&args.model, &args.run, &defaults)?;
    let cal = cached_onatski(&args.cache, &calibration_spec(&args.run, &args.calibration, cfg.master_seed))?;
    emit_table(&run_size(&cfg, &cal, alpha)?, &args.output)
}

fn test_power(args: &TestPowerArgs) -> CliResult<()> {
    let defaults = Defaults {
        dim: 100,
        reps: 1000,
        heavy_reps: 10_000,
    };
    let alpha = alpha_value(args.alpha, &args.model)?;
    if let Some(nu) = args.nu.iter().find(|v| !(**v >= 0.0)) {
        return Err(usage(format!("--nu values must be >= 0, got {nu}")));
    }
    let cfg = experiment(&args.model, &args.run, &defaults)?;
    let cal = cached_onatski(&args.cache, &calibration_spec(&args.run, &args.calibration, cfg.master_seed))?;
    emit_table(&run_power(&cfg, &cal, alpha, &args.nu)?, &args.output)
}

fn goe_spec(run: &RunArgs, dim: Option<usize>, dense: bool) -> CliResult<CalibrationSpec> {
    let seed = run.seed.ok_or_else(|| usage("--seed is required: every random computation must be reproducible"))?;
    let (d, reps) = calibration_defaults(run.profile);
    Ok(CalibrationSpec::new(dim.unwrap_or(d), run.reps.unwrap_or(reps), seed)
        .sampling(if dense { GoeSampling::Dense } else { GoeSampling::Tridiagonal })
        .workers(run.workers.unwrap_or(1)))
}

fn emit_calibration(cal: &CalibrationResult, kind: StatisticKind, spec: &CalibrationSpec, cache: &CacheArgs, output: &OutputArgs) -> CliResult<()> {
    let name = cache_file_name(kind, spec);
    for dir in [&cache.cache_dir, &output.output].into_iter().flatten() {
        let path = dir.join(&name);
        cal.save(&path)?;
        eprintln!("wrote {}", path.display());
    }
    if output.json {
        return print(&cal.to_json());
    }
    let mut text = String::from("probability,value\n");
    for (p, v) in &cal.percentile_estimates {
        text.push_str(&format!("{p},{v}\n"));
    }
    print(&text)
}

fn calibrate_tw(args: &CalibrateArgs) -> CliResult<()> {
    let spec = goe_spec(&args.run, args.dim, args.dense)?;
    let probs = if args.probs.is_empty() { tw1_probabilities() } else { args.probs.clone() };
    if let Some(p) = probs.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(usage(format!("--probs values must lie in (0, 1), got {p}")));
    }
    let cal = goe_percentiles(&spec, &probs)?;
    let table = tw1_table();
    for (p, v) in &cal.percentile_estimates {
        if let Some((x, _)) = table.points.iter().find(|(_, q)| (q - p).abs() < 1e-12) {
            eprintln!("p={p}: GOE {v:.4}, TW1 table {x}");
        }
    }
    emit_calibration(&cal, StatisticKind::TwEdge, &spec, &args.cache, &args.output)
}

fn calibrate_onatski(args: &CalibrateOnatskiArgs) -> CliResult<()> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(usage(format!("--alpha must lie in (0, 1), got {}", args.alpha)));
    }
    let spec = goe_spec(&args.run, args.dim, args.dense)?;
    let cal = onatski_critical(&spec, args.alpha)?;
    if cal.discarded > 0 {
        eprintln!("warning: {} replicates discarded for a degenerate gap", cal.discarded);
    }
    emit_calibration(&cal, StatisticKind::OnatskiRatio, &spec, &args.cache, &args.output)
}

fn locallaw(args: &LocalLawArgs) -> CliResult<()> {
    let defaults = Defaults {
        dim: 400,
        reps: 200,
        heavy_reps: 1000,
    };
    if let Some(eta) = args.eta.iter().find(|v| !(**v > 0.0)) {
        return Err(usage(format!("--eta values must be positive, got {eta}")));
    }
    let cfg = experiment(&args.model, &args.run, &defaults)?;
    let lp = cfg.edge()?.lambda_plus;
    let mut grid = Vec::new();
    for &off in &args.energy_offset {
        for &eta in &args.eta {
            grid.push(ComplexPoint::new(lp + off, eta).map_err(|e| usage(e.to_string()))?);
        }
    }
    emit_table(&run_locallaw(&cfg, &grid)?, &args.output)
}

fn rigidity(args: &RigidityArgs) -> CliResult<()> {
    let cfg = load_config(&args.model)?;
    let (source, _) = spectrum_source(&args.model, &cfg)?;
    if args.ladder.len() < 3 {
        return Err(usage("--ladder needs at least 3 sizes"));
    }
    let phi = args.model.phi.or(cfg.phi).unwrap_or(1.0);
    if args.model.m.is_some() || args.model.n.is_some() {
        return Err(usage("rigidity takes sizes from --ladder and --phi, not --M/--N"));
    }
    let law = radius(&args.model, &cfg)?;
    let seed = seed(&args.run, &cfg)?;
    let reps = args.run.reps.or(cfg.reps).unwrap_or(match args.run.profile {
        Profile::Desk => 500,
        Profile::Heavy => 2000,
    });
    let workers = args.run.workers.or(cfg.workers).unwrap_or(1);
    let rungs = ladder(&source, phi, &law, &args.ladder, reps, seed)
        .map_err(|e| usage(format!("{}: {e}", e.name())))?
        .into_iter()
        .map(|c| c.with_workers(workers))
        .collect::<Vec<_>>();
    emit_table(&run_rigidity(&rungs)?, &args.output)
}

fn universality(args: &UniversalityArgs) -> CliResult<()> {
    let defaults = Defaults {
        dim: 200,
        reps: 2000,
        heavy_reps: 10_000,
    };
    let a = experiment(&args.model, &args.run, &defaults)?;
    let law_b: RadiusLaw = args
        .radius_b
        .parse()
        .map_err(|e: twedge::Error| usage(format!("{}: {e}", e.name())))?;
    let seed_b = args.seed_b.unwrap_or(a.master_seed.wrapping_add(1));
    let model_b = ModelSpec::new(a.model.m, a.model.n, a.model.spectrum.clone(), law_b.clone())
        .map_err(|e| usage(format!("{}: {e}", e.name())))?;
    let name = a.label.split('/').next().unwrap_or("model").to_string();
    let b = ExperimentConfig::new(model_b, a.reps, seed_b)?
        .with_label(format!("{name}/{law_b}/{}x{}", a.model.m, a.model.n))
        .with_workers(a.workers);
    emit_table(&run_universality(&a, &b)?, &args.output)
}

pub fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Edge(a) => edge(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Table1(a) => table1(a),
        Command::TestSize(a) => test_size(a),
        Command::TestPower(a) => test_power(a),
        Command::CalibrateTw(a) => calibrate_tw(a),
        Command::CalibrateOnatski(a) => calibrate_onatski(a),
        Command::Locallaw(a) => locallaw(a),
        Command::Rigidity(a) => rigidity(a),
        Command::Universality(a) => universality(a),
    }
}
