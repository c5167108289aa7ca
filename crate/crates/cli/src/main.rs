#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use qwm::ancilla::{
    coherence_error_bound, flag_states, Coupling, GaussianWavepacket, Sign, SmearGrid, HBAR,
};
use qwm::chip::{
    analyze_image, exact_distribution, jarzynski_sweep, simulate_run, ExperimentConfig, SweepMode,
    SweepTable,
};
use qwm::io::{
    read_image, write_density, write_image, write_run_result, write_sweep, write_work_distribution,
};
use qwm::quantum::{
    pseudo_thermal_state, random_unitary, rf_unitary, HamiltonianPair, QuantumState, Spectrum,
};
use qwm::work::{
    delta_f_from_partition, manifold_fit, povm_elements, tpm_distribution, ManifoldOptions,
};
use qwm::{smeared_density, QwmError};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "qwm",
    version,
    about = "Quantum work meter: exact work statistics and atom-chip simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment config; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct Grid {
    /// Comma-separated βE values.
    #[arg(long = "beta-e", value_delimiter = ',', default_values_t = [0.58, 1.11, 1.75])]
    beta_e: Vec<f64>,

    /// Comma-separated RF pulse areas (rad).
    #[arg(long = "rf-areas", value_delimiter = ',', default_values_t = default_areas())]
    rf_areas: Vec<f64>,

    /// Repetitions per (βE, area).
    #[arg(long, default_value_t = 3)]
    reps: usize,
}

fn default_areas() -> Vec<f64> {
    (0..10).map(|k| 0.2 + 0.3 * k as f64).collect()
}

#[derive(Subcommand)]
enum Command {
    /// Exact two-point-measurement work distribution.
    ExactDist {
        /// RF areas to evaluate; the config area when omitted.
        #[arg(long = "rf-areas", value_delimiter = ',')]
        rf_areas: Vec<f64>,
    },
    /// Completeness, positivity and probability checks of the work POVM.
    PovmCheck {
        /// Additional Haar-random instances to check.
        #[arg(long, default_value_t = 0)]
        random: usize,
        /// Dimension of the random instances.
        #[arg(long, default_value_t = 3)]
        dim: usize,
    },
    /// Ancilla outcome density and coherence bound.
    Smear {
        /// Dimensionless coupling λσ/ħ (energies in units of E).
        #[arg(long, default_value_t = 40.0)]
        coupling: f64,
        /// Grid points.
        #[arg(long, default_value_t = 4097)]
        points: usize,
    },
    /// One simulated shot; writes the cloud image.
    Simulate,
    /// Fits clouds in an image and infers P(w).
    Analyze {
        #[arg(long)]
        image: PathBuf,
    },
    /// G = −ln⟨e^{−βw}⟩ over RF areas and temperatures.
    Sweep {
        #[command(flatten)]
        grid: Grid,
        /// Use exact P(w) instead of the imaging pipeline.
        #[arg(long)]
        exact: bool,
    },
    /// Principal-component fit of the probability vectors of a sweep.
    Manifold {
        #[command(flatten)]
        grid: Grid,
        #[arg(long)]
        exact: bool,
    },
    /// βΔF from partition functions, next to the Jarzynski estimate.
    Deltaf {
        #[command(flatten)]
        grid: Grid,
        /// Estimate the Jarzynski column with the simulated pipeline.
        #[arg(long)]
        simulate: bool,
    },
}

fn f(x: f64) -> String {
    format!("{x:.11e}")
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn physics(
    cfg: &ExperimentConfig,
    area: f64,
) -> Result<(HamiltonianPair, QuantumState, qwm::DrivingUnitary)> {
    let pair = HamiltonianPair::two_level(cfg.energy_ratio)?;
    let rho = pseudo_thermal_state(
        cfg.beta_e,
        &pair.initial,
        cfg.coherent_preparation.then_some(0.0),
    )?;
    let u = rf_unitary(area, cfg.rf_phase)?;
    Ok((pair, rho, u))
}

fn exact_dist(cfg: &ExperimentConfig, out: &Path, areas: &[f64]) -> Result<()> {
    let areas = if areas.is_empty() {
        vec![cfg.rf_area]
    } else {
        areas.to_vec()
    };
    let pair = HamiltonianPair::two_level(cfg.energy_ratio)?;
    let pf = delta_f_from_partition(&pair, cfg.beta_e)?;
    let mut w = create(out, "work_distribution.csv")?;
    for (k, area) in areas.iter().enumerate() {
        let run = ExperimentConfig {
            rf_area: *area,
            ..cfg.clone()
        };
        let dist = exact_distribution(&run)?;
        let mut buf = Vec::new();
        write_work_distribution(&mut buf, &format!("rf:{}", f(*area)), &dist, Some(pf))?;
        let text = String::from_utf8(buf)?;
        // one header for the whole file
        let body = if k == 0 {
            text.as_str()
        } else {
            text.split_once('\n').map_or("", |x| x.1)
        };
        std::io::Write::write_all(&mut w, body.as_bytes())?;
    }
    println!(
        "βΔF = {pf:.6} at βE = {}; {} driving(s) written",
        cfg.beta_e,
        areas.len()
    );
    Ok(())
}

fn povm_check(cfg: &ExperimentConfig, out: &Path, random: usize, dim: usize) -> Result<()> {
    let mut report = String::new();
    let mut check = |label: &str,
                     pair: &HamiltonianPair,
                     rho: &QuantumState,
                     u: &qwm::DrivingUnitary|
     -> Result<()> {
        let povm = povm_elements(pair, u)?;
        let dist = tpm_distribution(rho, pair, u)?;
        let prob = povm
            .elements()
            .iter()
            .zip(povm.probabilities(rho))
            .map(|(((n, m), _), p)| {
                (dist.get(*n, *m).map_or(f64::NAN, |e| e.probability) - p).abs()
            })
            .fold(0.0, f64::max);
        writeln!(
            report,
            "{label}: completeness {:.3e}, min eigenvalue {:.3e}, max |Tr(rho A) - P| {:.3e}",
            povm.completeness_residual(),
            povm.min_eigenvalue(),
            prob
        )?;
        Ok(())
    };
    let pair = HamiltonianPair::two_level(cfg.energy_ratio)?;
    let rho = pseudo_thermal_state(cfg.beta_e, &pair.initial, None)?;
    check(
        "config",
        &pair,
        &rho,
        &rf_unitary(cfg.rf_area, cfg.rf_phase)?,
    )?;
    if random > 0 && dim < 2 {
        return Err(QwmError::Config(format!("--dim must be at least 2, got {dim}")).into());
    }
    for k in 0..random as u64 {
        let energies: Vec<f64> = (0..dim)
            .map(|i| i as f64 + 0.1 * ((k + i as u64) % 7) as f64)
            .collect();
        let fin: Vec<f64> = energies.iter().map(|e| cfg.energy_ratio * e).collect();
        let basis = random_unitary(dim, cfg.seed.wrapping_add(2 * k + 1))?;
        let pair = HamiltonianPair::new(
            Spectrum::diagonal(&energies)?,
            Spectrum::diagonal(&fin)?.rotated(basis.matrix()),
        )?;
        let rho = pseudo_thermal_state(cfg.beta_e, &pair.initial, None)?;
        check(
            &format!("random {k}"),
            &pair,
            &rho,
            &random_unitary(dim, cfg.seed.wrapping_add(2 * k))?,
        )?;
    }
    fs::write(out.join("povm_check.txt"), &report)?;
    print!("{report}");
    Ok(())
}

fn smear(cfg: &ExperimentConfig, out: &Path, coupling: f64, points: usize) -> Result<()> {
    if !(coupling > 0.0) {
        return Err(
            QwmError::Config(format!("--coupling must be positive, got {coupling}")).into(),
        );
    }
    let (pair, rho, u) = physics(cfg, cfg.rf_area)?;
    let lambda = coupling * HBAR / cfg.sigma;
    let packet = GaussianWavepacket::new(0.0, 0.0, cfg.sigma, cfg.mass)?;
    let dist = tpm_distribution(&rho, &pair, &u)?;
    let flags = flag_states(&dist, &packet, Coupling::new(lambda, Sign::Positive)?);
    let outcome = smeared_density(
        &flags,
        true,
        &rho,
        &pair,
        &u,
        SmearGrid { points, span: 8.0 },
    )?;
    write_density(create(out, "smeared_density.csv")?, &outcome)?;

    let mut works = dist.works();
    works.sort_by(f64::total_cmp);
    let gap = works
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let mut report = String::new();
    writeln!(report, "coupling lambda*sigma/hbar = {coupling}")?;
    writeln!(
        report,
        "separation = {:.3} momentum widths",
        lambda * gap / packet.momentum_spread()
    )?;
    writeln!(report, "integral = {:.12}", outcome.integral)?;
    writeln!(report, "coherence gap = {:.6e}", outcome.coherence_gap())?;
    writeln!(
        report,
        "bound = {:.6e}",
        coherence_error_bound(&rho, &pair, &u, lambda, cfg.sigma)?
    )?;
    writeln!(report, "n,m,w,P,window_mass")?;
    for e in dist.entries() {
        let mass = outcome.window_mass(lambda * e.work, 0.5 * lambda * gap);
        writeln!(
            report,
            "{},{},{},{},{}",
            e.n,
            e.m,
            f(e.work),
            f(e.probability),
            f(mass)
        )?;
    }
    fs::write(out.join("smear_report.txt"), &report)?;
    print!("{report}");
    Ok(())
}

fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let image = simulate_run(cfg)?;
    write_image(create(out, "image.csv")?, &image)?;
    println!(
        "{} bins, {} atoms detected",
        image.counts.len(),
        image.total
    );
    if image.overlap_warning {
        eprintln!("warning: clouds overlap beyond the separability threshold");
    }
    Ok(())
}

fn analyze(cfg: &ExperimentConfig, out: &Path, image: &Path) -> Result<()> {
    let file =
        File::open(image).map_err(|e| QwmError::Config(format!("{}: {e}", image.display())))?;
    let img = read_image(file)?;
    let result = analyze_image(&img, cfg)?;
    write_run_result(create(out, "run_result.csv")?, &result)?;
    for c in &result.clouds {
        println!(
            "(n={}, m={}) w/E = {:+.4}  P = {:.4}",
            c.n, c.m, c.work, c.fraction
        );
    }
    for d in &result.diagnostics {
        eprintln!("note: {d}");
    }
    Ok(())
}

fn run_sweep(cfg: &ExperimentConfig, grid: &Grid, exact: bool) -> Result<SweepTable> {
    let mode = if exact {
        SweepMode::Exact
    } else {
        SweepMode::Simulated
    };
    Ok(jarzynski_sweep(
        cfg,
        &grid.rf_areas,
        &grid.beta_e,
        grid.reps,
        mode,
    )?)
}

fn sweep(cfg: &ExperimentConfig, out: &Path, grid: &Grid, exact: bool) -> Result<()> {
    let table = run_sweep(cfg, grid, exact)?;
    write_sweep(create(out, "sweep.csv")?, &table, (2, 2))?;
    for s in &table.summaries {
        println!(
            "βE={} area={:.3} G={:.5} ± {:.5}",
            s.beta_e, s.rf_area, s.mean, s.sem
        );
    }
    Ok(())
}

fn manifold(cfg: &ExperimentConfig, out: &Path, grid: &Grid, exact: bool) -> Result<()> {
    let table = run_sweep(cfg, grid, exact)?;
    let mut points = create(out, "manifold_points.csv")?;
    let mut csv = String::from("beta_E,rf_area,rep,P_0_0,P_0_1,P_1_0\n");
    for r in table.rows.iter().filter(|r| r.g.is_some()) {
        let p: Vec<String> = r.probability_vector.iter().map(|x| f(*x)).collect();
        writeln!(
            csv,
            "{},{},{},{}",
            f(r.beta_e),
            f(r.rf_area),
            r.rep,
            p.join(",")
        )?;
    }
    std::io::Write::write_all(&mut points, csv.as_bytes())?;

    let mut report = String::new();
    for &beta in &grid.beta_e {
        let run = ExperimentConfig {
            beta_e: beta,
            ..cfg.clone()
        };
        let dists: Vec<_> = table
            .rows
            .iter()
            .filter(|r| r.beta_e == beta && r.g.is_some())
            .map(|r| {
                let run = ExperimentConfig {
                    rf_area: r.rf_area,
                    seed: r.seed,
                    ..run.clone()
                };
                if exact {
                    exact_distribution(&run)
                } else {
                    simulate_run(&run)
                        .and_then(|img| analyze_image(&img, &run))
                        .map(|r| r.distribution)
                }
            })
            .collect::<qwm::Result<_>>()?;
        let options = if exact {
            ManifoldOptions::default()
        } else {
            ManifoldOptions::empirical(1, 0.05)
        };
        let fit = manifold_fit(&dists, beta, &options)?;
        writeln!(
            report,
            "beta_E {beta}: dimension {} (expected {}), max residual {:.3e}, constraint violation {:.3e}, beta_delta_f {:.6}",
            fit.dimension, fit.expected_dimension, fit.max_residual, fit.constraint_violation, fit.delta_f_estimate
        )?;
        writeln!(
            report,
            "  singular values {:?}",
            fit.singular_values
                .iter()
                .map(|s| format!("{s:.3e}"))
                .collect::<Vec<_>>()
        )?;
    }
    fs::write(out.join("manifold_report.txt"), &report)?;
    print!("{report}");
    Ok(())
}

fn deltaf(cfg: &ExperimentConfig, out: &Path, grid: &Grid, simulate: bool) -> Result<()> {
    let table = run_sweep(cfg, grid, !simulate)?;
    let mut csv = String::from("beta_E,JI,JI_sem,PF,runs\n");
    println!("{:>8} {:>18} {:>10}", "βE", "βΔF (JI)", "βΔF (PF)");
    for b in &table.betas {
        writeln!(
            csv,
            "{},{},{},{},{}",
            f(b.beta_e),
            f(b.ji_mean),
            f(b.ji_sem),
            f(b.pf),
            b.used
        )?;
        println!(
            "{:>8} {:>9.3} ± {:<6.3} {:>10.3}",
            b.beta_e, b.ji_mean, b.ji_sem, b.pf
        );
    }
    fs::write(out.join("delta_f.csv"), csv)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    fs::create_dir_all(&cli.out)
        .map_err(|e| QwmError::Config(format!("cannot create {}: {e}", cli.out.display())))?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::ExactDist { rf_areas } => exact_dist(&cfg, out, rf_areas),
        Command::PovmCheck { random, dim } => povm_check(&cfg, out, *random, *dim),
        Command::Smear { coupling, points } => smear(&cfg, out, *coupling, *points),
        Command::Simulate => simulate(&cfg, out),
        Command::Analyze { image } => analyze(&cfg, out, image),
        Command::Sweep { grid, exact } => sweep(&cfg, out, grid, *exact),
        Command::Manifold { grid, exact } => manifold(&cfg, out, grid, *exact),
        Command::Deltaf { grid, simulate } => deltaf(&cfg, out, grid, *simulate),
    }
}

fn is_config_error(err: &anyhow::Error) -> bool {
    err.chain()
        .filter_map(|e| e.downcast_ref::<QwmError>())
        .any(QwmError::is_config_error)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if is_config_error(&err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            let path = cli.out.join("diagnostic.txt");
            let text = format!("{err:#}\n\n{err:?}\n");
            if fs::create_dir_all(&cli.out)
                .and_then(|_| fs::write(&path, text))
                .is_ok()
            {
                eprintln!("diagnostics written to {}", path.display());
            }
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
