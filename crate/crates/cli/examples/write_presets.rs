// Regenerates the shipped preset files from the built-in definitions.
use cali_cli::config::RunConfig;

fn main() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets");
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("mild.json"), RunConfig::mild_preset().to_pretty_json()).unwrap();
    std::fs::write(dir.join("hard.json"), RunConfig::hard_preset().to_pretty_json()).unwrap();
    println!("presets written to {}", dir.display());
}
