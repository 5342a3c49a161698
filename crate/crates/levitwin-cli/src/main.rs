//! Command-line front end: configuration ingestion, subcommand dispatch,
//! sweep orchestration, and CSV emission.
//!
//! Exit codes: 0 success, 1 physics failure (unstable trap, no solution,
//! non-physical state), 2 configuration error (bad file, unknown key, bad
//! value).

mod config;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use levitwin::entanglement::{conditional_negativity, optimize_damping};
use levitwin::equilibrium;
use levitwin::gaussian::StateKind;
use levitwin::params::Mode;
use levitwin::spectra::{
    electron_demo, sql_resonant, Channel, ElectronGeometry, ModeSpectrum, SpectrumRow,
    SpectrumTable,
};
use levitwin::trajectory::{
    discrete_stationary_moments, ensemble_moments, max_step, simulate_trajectory, SimulationInput,
};
use levitwin::{DerivedParams, Error, Result};

use config::{RunConfig, Scale, Selection, SweepParameter};

#[derive(Parser)]
#[command(
    name = "levitwin",
    about = "Sensing limits and entanglement of two Coulomb-coupled, feedback-cooled levitated nanoparticles",
    version
)]
struct Cli {
    /// Path to a key=value run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file for CSV/report data (default: standard output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed override for stochastic commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread count for sweeps and ensembles (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print derived parameters and the re-parseable effective configuration.
    Derive,
    /// Analyse the charged-pair equilibrium (compensation field, stability).
    Equilibrium,
    /// Emit detection-noise power spectral densities on a frequency grid.
    Psd,
    /// Resonant standard-quantum-limit report per mode.
    Sql,
    /// Sweep stationary logarithmic negativity over one reduced parameter.
    Negativity,
    /// Integrate stochastic trajectories and compare moments to closed forms.
    Simulate,
    /// Signal-to-noise report for detecting an oscillating single charge.
    DemoElectron,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::InvalidConfig(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("--threads: {e}")))?;
    }
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::InvalidConfig(format!("cannot read {}: {e}", path.display()))
            })?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let output = match &cli.command {
        Command::Derive => cmd_derive(&config)?,
        Command::Equilibrium => cmd_equilibrium(&config)?,
        Command::Psd => cmd_psd(&config)?,
        Command::Sql => cmd_sql(&config)?,
        Command::Negativity => cmd_negativity(&config)?,
        Command::Simulate => cmd_simulate(&config)?,
        Command::DemoElectron => cmd_demo_electron(&config)?,
    };
    match &cli.out {
        Some(path) => std::fs::write(path, output)
            .map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", path.display()))),
        None => {
            std::io::stdout()
                .write_all(output.as_bytes())
                .map_err(|e| Error::InvalidConfig(format!("stdout: {e}")))
        }
    }
}

/// Derived-parameter table (as comments) plus the effective configuration;
/// the whole output re-parses as a configuration file.
fn cmd_derive(config: &RunConfig) -> Result<String> {
    config.physical.validate()?;
    let d = DerivedParams::from_config(&config.physical)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut out = String::from("# derived parameters\n");
    let rows = [
        ("omega0_over_2pi_hz", d.omega0 / two_pi),
        ("gamma_sc_over_2pi_hz", d.gamma_sc / two_pi),
        ("coupling_g_over_2pi_hz", d.coupling / two_pi),
        ("g_over_omega0", d.coupling / d.omega0),
        ("omega_plus_over_2pi_hz", d.omega_plus / two_pi),
        ("omega_minus_over_2pi_hz", d.omega_minus / two_pi),
        ("heating_rate_over_2pi_hz", d.heating_rate / two_pi),
        ("eta_eff", d.eta_eff),
        ("mass_kg", d.mass),
        ("l_squared_m2", d.l_squared),
        ("gas_diffusion_kg2_m2_s3", d.gas_diffusion),
    ];
    for (name, value) in rows {
        writeln!(out, "# {name} = {value:e}").unwrap();
    }
    // Resolved feedback filters (0-valued keys mean "default").
    for mode in Mode::BOTH {
        let filter = config.filter(&d, mode)?;
        writeln!(
            out,
            "# filter_{}: gamma_rad_s = {:e}, Omega_rad_s = {:e}, shape_w_rad_s = {:e}",
            mode.label(),
            filter.gamma,
            filter.bandwidth(),
            filter.shape_omega
        )
        .unwrap();
    }
    out.push_str(&config.echo());
    Ok(out)
}

fn cmd_equilibrium(config: &RunConfig) -> Result<String> {
    config.physical.validate()?;
    let d = DerivedParams::from_config(&config.physical)?;
    let eq = equilibrium::analyze(&config.physical, &d)?;
    let mut out = String::from(
        "compensation_field_v_m,displacement_m,recoil_scale,\
         omega_y_plus_rad_s,omega_y_minus_rad_s,stable_x,stable_y\n",
    );
    writeln!(
        out,
        "{:e},{},{:e},{:e},{:e},{},{}",
        eq.compensation_field,
        eq.displacement
            .map(|x| format!("{x:e}"))
            .unwrap_or_else(|| "nan".to_string()),
        eq.recoil_scale,
        eq.omega_y_plus,
        eq.omega_y_minus,
        eq.stable_x,
        eq.stable_y
    )
    .unwrap();
    Ok(out)
}

fn cmd_psd(config: &RunConfig) -> Result<String> {
    config.physical.validate()?;
    let d = DerivedParams::from_config(&config.physical)?;
    let modes: &[Mode] = match config.psd_mode {
        Selection::One(0) => &[Mode::Plus],
        Selection::One(_) => &[Mode::Minus],
        Selection::Both => &Mode::BOTH,
    };
    let channels: &[Channel] = match config.psd_channel {
        Selection::One(0) => &[Channel::InLoop],
        Selection::One(_) => &[Channel::OutLoop],
        Selection::Both => &Channel::BOTH,
    };
    let mut table = SpectrumTable::default();
    // Empty grid (no points, or an empty range) emits a header-only CSV.
    if config.psd_points > 0 && config.psd_resolved_range(&d).is_some() {
        let (lo, hi) = config.psd_resolved_range(&d).unwrap();
        for &mode in modes {
            let filter = config.filter(&d, mode)?;
            let spectrum = ModeSpectrum::from_derived(&d, mode, filter);
            let grid = levitwin::spectra::frequency_grid(
                lo,
                hi,
                d.mode_frequency(mode),
                filter.gamma,
                config.psd_points,
            );
            for &channel in channels {
                for &omega in &grid {
                    table.rows.push(SpectrumRow {
                        omega_rad_s: omega,
                        mode,
                        channel,
                        value_si: spectrum.noise_psd(omega, channel)?,
                    });
                }
            }
        }
    }
    Ok(table.to_csv())
}

impl RunConfig {
    /// PSD grid range, defaulting to [omega0/10, 10 omega_minus]; `None`
    /// when the configured range is empty.
    fn psd_resolved_range(&self, d: &DerivedParams) -> Option<(f64, f64)> {
        let (mut lo, mut hi) = (self.psd_omega_min, self.psd_omega_max);
        if lo <= 0.0 && hi <= 0.0 {
            lo = d.omega0 / 10.0;
            hi = 10.0 * d.omega_minus;
        }
        (lo > 0.0 && hi > lo).then_some((lo, hi))
    }
}

fn cmd_sql(config: &RunConfig) -> Result<String> {
    config.physical.validate()?;
    let d = DerivedParams::from_config(&config.physical)?;
    let mut out = String::from(
        "mode,gamma_s_rad_s,noise_floor_n2_s,optimal_l_squared_m2,\
         closed_form_floor_n2_s,closed_form_l_squared_m2,optimal_gamma_sc_rad_s\n",
    );
    for mode in Mode::BOTH {
        let gamma_s = config.gamma(&d, mode);
        let report = sql_resonant(&d, mode, gamma_s, d.eta_in, d.eta_out)?;
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e}",
            mode.label(),
            gamma_s,
            report.noise_floor,
            report.optimal_l_squared,
            report.closed_form_floor,
            report.closed_form_l_squared,
            report.optimal_gamma_sc
        )
        .unwrap();
    }
    Ok(out)
}

fn cmd_negativity(config: &RunConfig) -> Result<String> {
    if config.sweep_points == 0 {
        return Err(Error::InvalidConfig("sweep_points must be >= 1".to_string()));
    }
    if config.sweep_scale == Scale::Log && !(config.sweep_min > 0.0) {
        return Err(Error::InvalidConfig(
            "log sweep requires sweep_min > 0".to_string(),
        ));
    }
    let values: Vec<f64> = (0..config.sweep_points)
        .map(|i| {
            let f = if config.sweep_points == 1 {
                0.0
            } else {
                i as f64 / (config.sweep_points - 1) as f64
            };
            match config.sweep_scale {
                Scale::Linear => config.sweep_min + f * (config.sweep_max - config.sweep_min),
                Scale::Log => {
                    (config.sweep_min.ln() + f * (config.sweep_max / config.sweep_min).ln()).exp()
                }
            }
        })
        .collect();
    // Each grid point yields a conditional and an optimised unconditional
    // row; points run in parallel and are merged in grid order.
    let rows: Vec<Result<String>> = values
        .par_iter()
        .map(|&value| {
            let (mut eta, mut gamma_ratio, mut g_ratio) = (
                config.eta_eff,
                config.gamma_sc_over_omega0,
                config.g_over_omega0,
            );
            match config.sweep_parameter {
                SweepParameter::GOverOmega0 => g_ratio = value,
                SweepParameter::EtaEff => eta = value,
                SweepParameter::GammaScOverOmega0 => gamma_ratio = value,
            }
            let d = DerivedParams::reduced(eta, gamma_ratio, g_ratio)?;
            let mut out = String::new();
            let conditional = conditional_negativity(&d)?;
            let (_, _, unconditional) = optimize_damping(&d, d.omega0, d.omega0)?;
            for result in [conditional, unconditional] {
                let kind = match result.kind {
                    StateKind::Conditional => "conditional",
                    StateKind::Unconditional => "unconditional",
                };
                writeln!(
                    out,
                    "{value:e},{eta:e},{gamma_ratio:e},{g_ratio:e},{:e},{:e},{:e},{:e},{},{kind}",
                    result.gamma_plus / d.omega0,
                    result.gamma_minus / d.omega0,
                    result.e_n,
                    result.duan_value,
                    result.duan_violated,
                )
                .unwrap();
            }
            Ok(out)
        })
        .collect();
    let mut out = String::from(
        "sweep_value,eta_eff,gamma_sc_over_omega0,g_over_omega0,\
         gamma_plus_over_omega0,gamma_minus_over_omega0,e_n,duan_value,duan_violated,kind\n",
    );
    for row in rows {
        out.push_str(&row?);
    }
    Ok(out)
}

fn cmd_simulate(config: &RunConfig) -> Result<String> {
    config.physical.validate()?;
    let d = DerivedParams::from_config(&config.physical)?;
    let filter_plus = config.filter(&d, Mode::Plus)?;
    let filter_minus = config.filter(&d, Mode::Minus)?;
    let gamma_min = filter_plus.gamma.min(filter_minus.gamma);
    let burn_in = if config.burn_in_s > 0.0 {
        config.burn_in_s
    } else {
        10.0 / gamma_min
    };
    let mut input = SimulationInput {
        derived: d,
        filter_plus,
        filter_minus,
        force_plus: levitwin::spectra::ForceSpec::None,
        force_minus: levitwin::spectra::ForceSpec::None,
        seed: config.seed,
        trajectory_index: 0,
        duration: 0.0,
        dt: 0.0,
        disable_noise: false,
    };
    input.dt = if config.dt_s > 0.0 {
        config.dt_s
    } else {
        0.95 * max_step(&input)
    };
    input.duration = if config.duration_s > 0.0 {
        config.duration_s
    } else {
        burn_in + 20.0 / gamma_min
    };
    let record = simulate_trajectory(&input)?;
    let mut out = record.to_csv(config.record_stride);
    if config.n_traj >= 2 {
        eprintln!(
            "running {} trajectories of {} steps each...",
            config.n_traj,
            record.len()
        );
        let moments = ensemble_moments(&input, config.n_traj, burn_in, 1)?;
        let conditional =
            levitwin::gaussian::conditional_covariance_dimensionless(&input.derived);
        out.push_str(
            "# ensemble comparison: moment,monte_carlo,exact,deviation_sigmas\n",
        );
        for (mode, offset) in [(Mode::Plus, 0usize), (Mode::Minus, 2usize)] {
            let target = discrete_stationary_moments(&input, mode)?;
            let (x2, p2, xp) = match mode {
                Mode::Plus => (moments.x2_plus, moments.p2_plus, moments.xp_plus),
                Mode::Minus => (moments.x2_minus, moments.p2_minus, moments.xp_minus),
            };
            let rows = [
                ("X2", x2, conditional.cov[(offset, offset)], target[0]),
                ("XP", xp, conditional.cov[(offset, offset + 1)], target[1]),
                ("P2", p2, conditional.cov[(offset + 1, offset + 1)], target[2]),
            ];
            for (label, estimate, cond, spread) in rows {
                let total = estimate.mean + cond;
                let exact = spread + cond;
                writeln!(
                    out,
                    "# {}_{label},{total:e},{exact:e},{:.2}",
                    mode.label(),
                    (total - exact).abs() / estimate.std_error
                )
                .unwrap();
            }
        }
    }
    Ok(out)
}

fn cmd_demo_electron(config: &RunConfig) -> Result<String> {
    config.physical.validate()?;
    let d = DerivedParams::from_config(&config.physical)?;
    let geometry = ElectronGeometry {
        distance: config.electron_distance,
        angle: config.electron_angle,
        amplitude: config.electron_amplitude,
        quality: config.electron_quality,
    };
    let filter_minus = config.filter(&d, Mode::Minus)?;
    let report = electron_demo(&config.physical, &d, &geometry, filter_minus)?;
    let mut out = String::from("force_amplitude_n,snr\n");
    writeln!(out, "{:e},{:e}", report.force_amplitude, report.snr).unwrap();
    Ok(out)
}
