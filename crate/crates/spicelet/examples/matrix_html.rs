//! Dump the assembled conductance matrix of the divider deck as the HTML
//! table the `matrix --html` subcommand produces.
//!
//!     cargo run --example matrix_html > divider_matrix.html

use spicelet::cli::matrix_dump;
use spicelet::corpus;

fn main() {
    let html = matrix_dump(&corpus::deck_path("divider3.cir"), true).unwrap();
    print!("{html}");
}
