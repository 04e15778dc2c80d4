//! JSON schemas of the documents written by each subcommand.

pub const COMMANDS: [&str; 9] = [
    "cep",
    "lra",
    "sra",
    "mct",
    "diag-marginal",
    "diag-pithist",
    "fs",
    "simulate",
    "power",
];

pub fn schema_for(command: &str) -> Option<&'static str> {
    Some(match command {
        "cep" => include_str!("../schemas/cep.json"),
        "lra" => include_str!("../schemas/lra.json"),
        "sra" => include_str!("../schemas/sra.json"),
        "mct" => include_str!("../schemas/mct.json"),
        "diag-marginal" => include_str!("../schemas/diag-marginal.json"),
        "diag-pithist" => include_str!("../schemas/diag-pithist.json"),
        "fs" => include_str!("../schemas/fs.json"),
        "simulate" => include_str!("../schemas/simulate.json"),
        "power" => include_str!("../schemas/power.json"),
        _ => return None,
    })
}
