//! A declarative run as the binary performs it, from a JSON config.

use quillen::cli::{execute, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::from_json(
        r#"{
            "command": "flow",
            "torus": {"tau_re": 0.0, "tau_im": 1.0, "N": 16},
            "seed": 11,
            "field_source": {"random": {"max_frequency": 2, "amplitude": 0.2}},
            "flow": {"kind": "ricci_potential", "t_end": 1.0, "record_interval": 0.05,
                     "det_times": [0.0, 0.01, 0.02], "det_resolution": 16}
        }"#,
    )?;
    let first = execute(&cfg)?;
    let second = execute(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&first.summary["summary"])?);
    let same = first.artifacts == second.artifacts;
    println!("artifacts: {:?}; reproducible: {same}", first.artifacts.iter().map(|a| &a.name).collect::<Vec<_>>());
    Ok(())
}
