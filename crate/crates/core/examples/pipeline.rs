//! Runs every CLI stage on a small synthetic corpus in a scratch
//! directory and prints the resulting metrics.

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let root = dir.path();
    let config = root.join("config.json");
    std::fs::write(
        &config,
        r#"{"synth": {"n_tracks": 400}, "autoencoder": {"fit": {"max_epochs": 30}},
           "phase1": {"max_epochs": 30}, "phase2": {"fit": {"lr": 0.001, "max_epochs": 20}}}"#,
    )
    .expect("write config");
    let stages = [
        "synth", "clean", "split", "ctd-extract", "ae-train", "compress", "train-phase1", "train-phase2", "evaluate", "gate-report",
    ];
    for stage in stages {
        let code = gamenet::cli::run(["gamenet", "--config", config.to_str().unwrap(), "--workspace", root.to_str().unwrap(), stage]);
        if code != 0 {
            eprintln!("{stage} failed with exit code {code}");
            std::process::exit(code);
        }
    }
    println!("{}", std::fs::read_to_string(root.join("out/metrics.json")).expect("metrics"));
    println!("{}", std::fs::read_to_string(root.join("out/gate_report.json")).expect("gate report"));
}
