//! Regenerates `fixtures/`: `cargo run -p edoc-eas --example gen_fixtures [DIR]`.

use std::path::PathBuf;

use edoc_core::sig::keystore::DEFAULT_ITERATIONS;
use edoc_eas::fixtures::{fixture_dir, write_fixtures};
use edoc_eas::FixturePki;

fn main() -> std::io::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(fixture_dir);
    write_fixtures(&dir, &FixturePki::generate(), DEFAULT_ITERATIONS)?;
    println!("fixtures written to {}", dir.display());
    Ok(())
}
