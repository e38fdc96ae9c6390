//! spicelet — a small SPICE-subset analog circuit simulator.
//!
//! The pipeline mirrors how such a tool is naturally built up:
//!
//! 1. [`netlist`] parses a line-oriented deck (see `DECK_FORMAT.md`) into
//!    elements, model cards and analysis directives, and can re-emit a
//!    canonical deck.
//! 2. [`topology`] maps node names to unknown indices and runs design-rule
//!    checks; every analysis refuses to start on a violating deck.
//! 3. [`linalg`] is a dense LU solver with partial pivoting, generic over
//!    real and complex scalars.
//! 4. [`devices`] evaluates the Shockley diode, the square-law MOSFET and
//!    time-domain source waveforms, with analytic linearizations.
//! 5. [`mna`] assembles modified-nodal-analysis systems: resistive DC,
//!    companion-model transient steps and complex AC.
//! 6. [`analysis`] drives the solvers: operating point (Newton with junction
//!    limiting, gmin and source stepping), DC sweep, transient, AC sweep and
//!    Thevenin port extraction.
//! 7. [`lattice`] generates rectangular resistor-lattice decks and solves the
//!    equivalent finite-difference Poisson problem as an independent oracle.
//! 8. [`cli`] runs whole decks in batch and writes CSV/HTML outputs; the
//!    `spicelet` binary is a thin wrapper over it.
//!
//! The `examples/` directory has one runnable program per major capability
//! and doubles as the user guide; the decks under `decks/` are the built-in
//! circuit corpus exposed through [`corpus`].

pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod devices;
pub mod lattice;
pub mod linalg;
pub mod mna;
pub mod netlist;
pub mod topology;

pub use analysis::{AnalysisError, NewtonOptions};
pub use netlist::{parse_netlist, write_netlist, Netlist};
