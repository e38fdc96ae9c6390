use std::path::PathBuf;
use std::process::exit;

use clap::{Parser, Subcommand, ValueEnum};

use spicelet::cli;
use spicelet::mna::IntegrationMethod;
use spicelet::netlist::parse_value;

#[derive(Parser)]
#[command(name = "spicelet", version, about = "SPICE-subset circuit simulator")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    /// Trapezoidal integration (second order).
    Tr,
    /// Backward Euler (first order, heavily damped).
    Be,
}

#[derive(Subcommand)]
enum Command {
    /// Run every analysis directive of a deck; .PRINT cards emit CSV files.
    Run {
        deck: PathBuf,
        /// Directory for CSV outputs (default: current directory).
        #[arg(short, long)]
        out_dir: Option<PathBuf>,
        /// Transient integration method.
        #[arg(long, value_enum, default_value = "tr")]
        method: Method,
    },
    /// Parse a deck and run the design-rule checks only.
    Check { deck: PathBuf },
    /// Generate a resistor-lattice deck.
    Lattice {
        rows: usize,
        cols: usize,
        /// Link resistance; engineering suffixes are accepted (e.g. 4.7k).
        r: String,
        /// Tie every boundary node to ground through one extra link.
        #[arg(long)]
        grounded: bool,
        /// Write the deck here instead of standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Assemble the linear DC system and dump matrix, rhs and legend.
    Matrix {
        deck: PathBuf,
        /// Emit a single HTML table instead of tab-separated text.
        #[arg(long)]
        html: bool,
        /// Write the dump here instead of standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the Thevenin equivalent seen between two nodes.
    Thevenin {
        deck: PathBuf,
        node_a: String,
        node_b: String,
    },
}

fn main() {
    let args = Args::parse();
    match args.command {
        Command::Run {
            deck,
            out_dir,
            method,
        } => {
            let flags = cli::RunFlags {
                out_dir,
                method: match method {
                    Method::Tr => IntegrationMethod::Trapezoidal,
                    Method::Be => IntegrationMethod::BackwardEuler,
                },
            };
            let report = cli::run_deck(&deck, &flags);
            for line in report.lines() {
                println!("{line}");
            }
            println!("elapsed: {:?}", report.wall);
            exit(report.exit_code);
        }
        Command::Check { deck } => {
            let (code, lines) = cli::check_deck(&deck);
            for line in lines {
                println!("{line}");
            }
            exit(code);
        }
        Command::Lattice {
            rows,
            cols,
            r,
            grounded,
            output,
        } => {
            let r_link = match parse_value(&r) {
                Ok(v) if v > 0.0 => v,
                Ok(_) => {
                    eprintln!("link resistance must be positive");
                    exit(2);
                }
                Err(e) => {
                    eprintln!("{e}");
                    exit(2);
                }
            };
            let text = cli::lattice_deck(rows, cols, r_link, grounded);
            emit(output, text);
        }
        Command::Matrix { deck, html, output } => match cli::matrix_dump(&deck, html) {
            Ok(text) => emit(output, text),
            Err((code, msg)) => {
                eprintln!("{msg}");
                exit(code);
            }
        },
        Command::Thevenin {
            deck,
            node_a,
            node_b,
        } => match cli::thevenin_lines(&deck, &node_a, &node_b) {
            Ok(lines) => {
                for line in lines {
                    println!("{line}");
                }
            }
            Err((code, msg)) => {
                eprintln!("{msg}");
                exit(code);
            }
        },
    }
}

fn emit(output: Option<PathBuf>, text: String) {
    match output {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, text) {
                eprintln!("cannot write {}: {e}", path.display());
                exit(2);
            }
        }
        None => print!("{text}"),
    }
}
