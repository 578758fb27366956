use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use flux_coupling::circuit::potential_landscape;
use flux_coupling::spectrum::convergence_scan;
use flux_coupling::sweep::{parse_config, read_csv, run_sweep, write_csv, SweepConfig};
use flux_coupling::{Error, Result};

#[derive(Parser)]
#[command(name = "flux-coupling", version, about = "Effective two-qubit Hamiltonians for coupled flux qubits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sweep and write the coefficient table.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `sweep.output`; the table goes to stdout when neither is set.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long = "nmax")]
        n_max: Option<usize>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Energies in units of qubit 1's E_C.
        #[arg(long)]
        dimensionless: bool,
    },
    /// Lowest coupled energies for a list of charge cutoffs.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "nmax-list", value_delimiter = ',', required = true)]
        n_max_list: Vec<usize>,
        /// Sweep value at which the circuit is built (default: the first one).
        #[arg(long)]
        value: Option<f64>,
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Potential energy of qubit 1 on a phase grid.
    Landscape {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 201)]
        grid: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Log-log slopes of |J_xx|, |J_yy|, |J_zz| from a sweep table.
    Scaling {
        #[arg(long)]
        input: PathBuf,
        /// `lo,hi`
        #[arg(long, value_parser = parse_window)]
        window: (f64, f64),
    },
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    Ok((num(lo)?, num(hi)?))
}

fn load(path: &PathBuf) -> Result<SweepConfig> {
    let text = fs::read_to_string(path)?;
    parse_config(&text)
}

fn sink(output: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match output {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate {
            config,
            output,
            n_max,
            threads,
            dimensionless,
        } => {
            let mut cfg = load(&config)?;
            if let Some(n) = n_max {
                cfg.n_max = n;
            }
            if output.is_some() {
                cfg.output = output;
            }
            cfg.dimensionless |= dimensionless;
            eprintln!("# resolved configuration\n{}", cfg.to_toml());
            let out = run_sweep(&cfg, threads)?;
            if cfg.output.is_none() {
                write_csv(io::stdout().lock(), &out.rows)?;
            }
            for f in &out.failures {
                eprintln!("warning: {} = {}: {}", cfg.variable, f.sweep_value, f.message);
            }
            let hybridized = out
                .rows
                .iter()
                .filter(|r| r.status == flux_coupling::sweep::RowStatus::Hybridized)
                .count();
            eprintln!(
                "{} points: {} ok, {hybridized} hybridized, {} failed",
                out.rows.len(),
                out.rows.len() - hybridized - out.failures.len(),
                out.failures.len()
            );
            Ok(out.failures.is_empty())
        }
        Command::Converge {
            config,
            n_max_list,
            value,
            k,
            output,
        } => {
            let cfg = load(&config)?;
            let v = value.unwrap_or(cfg.values[0]);
            let spec = cfg.variable.apply(&cfg.circuit, v);
            spec.validate()?;
            let table = convergence_scan(&spec, &n_max_list, k)?;
            table.write_csv(sink(output.as_ref())?)?;
            Ok(true)
        }
        Command::Landscape { config, grid, output } => {
            let cfg = load(&config)?;
            let land = potential_landscape(&cfg.circuit.qubit1, grid)?;
            for (p1, p2, u) in land.local_minima() {
                eprintln!("minimum at phi1 = {p1:.6}, phi2 = {p2:.6}: U = {u:.6} GHz");
            }
            land.write_csv(sink(output.as_ref())?)?;
            Ok(true)
        }
        Command::Scaling { input, window } => {
            let rows = read_csv(fs::File::open(&input)?)?;
            let rep = flux_coupling::sweep::scaling_report(&rows, window)?;
            println!("coefficient,slope,intercept,residual,points");
            for (name, f) in [("jxx", rep.xx), ("jyy", rep.yy), ("jzz", rep.zz)] {
                println!("{name},{:.6},{:.6},{:.3e},{}", f.slope, f.intercept, f.residual, f.points);
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::ConfigParse { .. } | Error::ConfigField { .. } = e {
                return ExitCode::from(3);
            }
            ExitCode::FAILURE
        }
    }
}
