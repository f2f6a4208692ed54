//! `uclab`: experiment runner for the observability-constant laboratory.
//!
//! Exit codes: 0 pass/complete, 1 inequality failure, 2 hypothesis violation,
//! 3 numerically inconclusive.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use uclab_cli::config::{
    CertClass, CommandSpec, ExperimentConfig, GhostCheck, ObserveTarget, PhiSpec, SequenceParams,
    SystemParams,
};
use uclab_core::geometry::BoundaryCondition;

#[derive(Parser)]
#[command(name = "uclab", version, about = "Scale-free unique-continuation laboratory")]
struct Cli {
    /// Load the full experiment configuration from a JSON file (subcommand
    /// flags are then not needed; --seed/--threads/--out still apply).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed for every randomized ingredient.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for sweep rows (values never depend on this).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Write the result (JSON record, or CSV for sweeps) here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Include wall-clock timings in the record (breaks bitwise comparability).
    #[arg(long, global = true, default_value_t = false)]
    timings: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Clone)]
struct SystemArgs {
    /// Spatial dimension (1 or 2).
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Cube side length.
    #[arg(long = "L", default_value_t = 1.0)]
    l: f64,
    /// Boundary condition: dirichlet | neumann | periodic.
    #[arg(long, default_value = "dirichlet")]
    bc: String,
    /// Potential: 0 | const:<c> | cos:<k>=<a>,... | cells:<K>:<v,...> | randcells:<K>:<a>.
    #[arg(long, default_value = "0")]
    potential: String,
    /// Galerkin truncation: retain modes with λ_y ≤ lambda-max.
    #[arg(long = "lambda-max", default_value_t = 1000.0)]
    lambda_max: f64,
}

impl SystemArgs {
    fn into_params(self) -> anyhow::Result<SystemParams> {
        let bc = match self.bc.as_str() {
            "dirichlet" => BoundaryCondition::Dirichlet,
            "neumann" => BoundaryCondition::Neumann,
            "periodic" => BoundaryCondition::Periodic,
            other => anyhow::bail!("unknown boundary condition: {other}"),
        };
        Ok(SystemParams { d: self.d, l: self.l, bc, potential: self.potential, lambda_max: self.lambda_max })
    }
}

#[derive(Args, Clone)]
struct SequenceArgs {
    /// Cell size of the equidistributed arrangement.
    #[arg(long = "G", default_value_t = 1.0)]
    g: f64,
    /// Ball radius δ ∈ (0, G/2).
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Ball placement: centered | random.
    #[arg(long, default_value = "centered")]
    placement: String,
}

impl SequenceArgs {
    fn into_params(self) -> SequenceParams {
        SequenceParams { g: self.g, delta: self.delta, placement: self.placement }
    }
}

fn parse_phi(s: &str) -> anyhow::Result<PhiSpec> {
    if s == "random" {
        return Ok(PhiSpec::Random);
    }
    if let Some(k) = s.strip_prefix("mode:") {
        return Ok(PhiSpec::Mode { k: k.parse()? });
    }
    if let Some(r) = s.strip_prefix("decay:") {
        return Ok(PhiSpec::Decay { rate: r.parse()? });
    }
    anyhow::bail!("phi must be 'mode:<k>', 'random', or 'decay:<rate>', got {s}")
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Diagonalize H_L and report the spectrum with its sandwich margins.
    Spectrum {
        #[command(flatten)]
        system: SystemArgs,
    },
    /// Minimal decay-class constant of a function.
    Certify {
        #[command(flatten)]
        system: SystemArgs,
        /// Decay class: A (coefficient), B (spectral projector), poly.
        #[arg(long)]
        class: String,
        #[arg(long)]
        kappa: f64,
        /// Function: mode:<k> | random | decay:<rate>.
        #[arg(long, default_value = "random")]
        phi: String,
    },
    /// Evaluate every closed-form constant of the pipeline.
    Constants {
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long = "G", default_value_t = 1.0)]
        g: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 50.0)]
        kappa: f64,
        /// ln D_A (log domain; D_A = e^{ln-da}).
        #[arg(long = "ln-da", default_value_t = 0.0)]
        ln_d_a: f64,
        /// ln D_B.
        #[arg(long = "ln-db", default_value_t = 0.0)]
        ln_d_b: f64,
        #[arg(long = "v-inf", default_value_t = 0.0)]
        v_inf: f64,
        #[arg(long = "v-plus", default_value_t = 0.0)]
        v_plus: f64,
        #[arg(long = "v-minus", default_value_t = 0.0)]
        v_minus: f64,
        /// Dimensional exponent N_A (free parameter; reported with results).
        #[arg(long = "NA", default_value_t = 1.0)]
        n_a: f64,
        /// Dimensional exponent N_B.
        #[arg(long = "NB", default_value_t = 1.0)]
        n_b: f64,
    },
    /// Sharp observability constants over W_δ(L).
    Observe {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        sequence: SequenceArgs,
        /// Sharp constant over span(ψ_1..ψ_n).
        #[arg(long, conflicts_with_all = ["class", "kappa", "ln_d"])]
        subspace: Option<usize>,
        /// Weighted decay class variant: A | B.
        #[arg(long)]
        class: Option<String>,
        #[arg(long)]
        kappa: Option<f64>,
        /// ln D of the class.
        #[arg(long = "ln-d")]
        ln_d: Option<f64>,
        /// Dimensional exponent N for the formula constant.
        #[arg(long = "N", default_value_t = 1.0)]
        n_exponent: f64,
        /// Class truncation (defaults to every retained mode).
        #[arg(long = "n-trunc")]
        n_trunc: Option<usize>,
    },
    /// One observe experiment per value of a swept parameter; CSV output.
    Sweep {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        sequence: SequenceArgs,
        #[arg(long)]
        subspace: Option<usize>,
        #[arg(long)]
        class: Option<String>,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long = "ln-d")]
        ln_d: Option<f64>,
        #[arg(long = "N", default_value_t = 1.0)]
        n_exponent: f64,
        #[arg(long = "n-trunc")]
        n_trunc: Option<usize>,
        /// Which parameter to sweep: delta | L | kappa | ln_d.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        /// Fit the dimensional exponent from the rows (delta sweeps).
        #[arg(long, default_value_t = false)]
        fit: bool,
    },
    /// Ghost-dimension checks: the two-sided H¹ bound or the interpolation
    /// measurement.
    Ghost {
        #[command(flatten)]
        system: SystemArgs,
        /// two-sided | interpolation
        #[arg(long)]
        check: String,
        /// Ghost-time half-width for the two-sided check.
        #[arg(long = "T", default_value_t = 1.0)]
        t: f64,
        /// Mode truncation of F_n.
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value = "random")]
        phi: String,
        #[command(flatten)]
        sequence: SequenceArgs,
        /// Quasi-MC points for the lens-region norms.
        #[arg(long = "qmc-points", default_value_t = 1_000_000)]
        qmc_points: usize,
    },
    /// Smooth-bump counterexample: polynomial decay without observability.
    Counterexample {
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long = "L", default_value_t = 1.0)]
        l: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long = "radius-fraction", default_value_t = 0.9)]
        radius_fraction: f64,
        #[arg(long = "lambda-max", default_value_t = 25000.0)]
        lambda_max: f64,
    },
    /// Seeded verification battery across every module.
    Verify {
        /// Smaller battery sizes.
        #[arg(long, default_value_t = false)]
        quick: bool,
    },
}

fn command_to_spec(cmd: Command) -> anyhow::Result<CommandSpec> {
    Ok(match cmd {
        Command::Spectrum { system } => CommandSpec::Spectrum { system: system.into_params()? },
        Command::Certify { system, class, kappa, phi } => {
            let class = match class.as_str() {
                "A" | "a" => CertClass::A,
                "B" | "b" => CertClass::B,
                "poly" => CertClass::Poly,
                other => anyhow::bail!("class must be A, B, or poly, got {other}"),
            };
            CommandSpec::Certify {
                system: system.into_params()?,
                class,
                kappa,
                phi: parse_phi(&phi)?,
            }
        }
        Command::Constants { d, g, delta, kappa, ln_d_a, ln_d_b, v_inf, v_plus, v_minus, n_a, n_b } => {
            CommandSpec::Constants { d, g, delta, kappa, ln_d_a, ln_d_b, v_inf, v_plus, v_minus, n_a, n_b }
        }
        Command::Observe { system, sequence, subspace, class, kappa, ln_d, n_exponent, n_trunc } => {
            let system = system.into_params()?;
            let target = observe_target(subspace, class, kappa, ln_d, n_exponent, n_trunc, &system)?;
            CommandSpec::Observe { system, sequence: sequence.into_params(), target }
        }
        Command::Sweep {
            system,
            sequence,
            subspace,
            class,
            kappa,
            ln_d,
            n_exponent,
            n_trunc,
            param,
            values,
            fit,
        } => {
            let system = system.into_params()?;
            let target = observe_target(subspace, class, kappa, ln_d, n_exponent, n_trunc, &system)?;
            CommandSpec::Sweep { system, sequence: sequence.into_params(), target, param, values, fit }
        }
        Command::Ghost { system, check, t, n, phi, sequence, qmc_points } => {
            let check = match check.as_str() {
                "two-sided" => GhostCheck::TwoSided { t },
                "interpolation" => {
                    GhostCheck::Interpolation { sequence: sequence.into_params(), qmc_points }
                }
                other => anyhow::bail!("check must be 'two-sided' or 'interpolation', got {other}"),
            };
            CommandSpec::Ghost { system: system.into_params()?, phi: parse_phi(&phi)?, n, check }
        }
        Command::Counterexample { d, l, delta, kappa, radius_fraction, lambda_max } => {
            CommandSpec::Counterexample { d, l, delta, kappa, radius_fraction, lambda_max }
        }
        Command::Verify { quick } => CommandSpec::Verify { quick },
    })
}

fn observe_target(
    subspace: Option<usize>,
    class: Option<String>,
    kappa: Option<f64>,
    ln_d: Option<f64>,
    n_exponent: f64,
    n_trunc: Option<usize>,
    _system: &SystemParams,
) -> anyhow::Result<ObserveTarget> {
    match (subspace, class) {
        (Some(n), None) => Ok(ObserveTarget::Subspace { n }),
        (None, Some(variant)) => Ok(ObserveTarget::Class {
            variant,
            kappa: kappa.ok_or_else(|| anyhow::anyhow!("--kappa required with --class"))?,
            ln_d: ln_d.ok_or_else(|| anyhow::anyhow!("--ln-d required with --class"))?,
            n_exponent,
            n_trunc: n_trunc.unwrap_or(usize::MAX),
        }),
        (None, None) => anyhow::bail!("choose --subspace N or --class {{A,B}}"),
        (Some(_), Some(_)) => anyhow::bail!("--subspace and --class are mutually exclusive"),
    }
}

fn main() {
    let cli = Cli::parse();
    let config = if let Some(path) = &cli.config {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read config {}: {e}", path.display());
                std::process::exit(2);
            }
        };
        match serde_json::from_str::<ExperimentConfig>(&text) {
            Ok(mut cfg) => {
                cfg.seed = cli.seed;
                cfg
            }
            Err(e) => {
                eprintln!("error: bad config file: {e}");
                std::process::exit(2);
            }
        }
    } else {
        let Some(cmd) = cli.command.clone() else {
            eprintln!("error: provide a subcommand or --config FILE (see --help)");
            std::process::exit(2);
        };
        match command_to_spec(cmd) {
            Ok(command) => ExperimentConfig { command, seed: cli.seed },
            Err(e) => {
                eprintln!("error: {e}");
                std::process::exit(2);
            }
        }
    };

    let record = uclab_cli::run(&config, cli.threads, cli.timings);

    let is_sweep = matches!(config.command, CommandSpec::Sweep { .. });
    let rendered = if is_sweep {
        // sweeps emit their CSV; the JSON record remains available via --timings debugging
        record.results["csv"].as_str().map(|s| s.to_string()).unwrap_or_else(|| {
            serde_json::to_string_pretty(&record).expect("record serialization")
        })
    } else {
        serde_json::to_string_pretty(&record).expect("record serialization")
    };

    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, rendered.as_bytes()) {
                eprintln!("error: cannot write {}: {e}", path.display());
                std::process::exit(2);
            }
            if is_sweep {
                // the record itself still goes to stdout for provenance
                println!("{}", serde_json::to_string_pretty(&record).expect("record serialization"));
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{}", rendered.trim_end_matches('\n'));
        }
    }
    if let Some(err) = &record.error {
        eprintln!("error: {err}");
    }
    std::process::exit(record.status.exit_code());
}
