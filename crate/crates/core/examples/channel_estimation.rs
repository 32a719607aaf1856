//! Pilot-based estimate of the 2D dot-product channel against the analytic
//! truth for one baseline drop, written as magnitude/phase text dumps.
//!
//! Pass an output directory as the first argument (default: a temp dir).

use otfdm::chest::read_channel_dump;
use otfdm::sim::{emit_channel_snapshot, CampaignConfig};

fn main() -> otfdm::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("otfdm_snapshot"));
    for kmh in [0.0, 200.0, 500.0] {
        let cfg = CampaignConfig {
            max_speeds_kmh: vec![kmh],
            ..Default::default()
        };
        let r = emit_channel_snapshot(&cfg, 1, &dir.join(format!("{kmh}kmh")))?;
        println!("{kmh:>5} km/h: NMSE {:.2} dB, {}x{} merged grid", r.nmse_db, r.rows, r.cols);
    }

    // Rows mN+n, columns k. Print a few rows of the 500 km/h case.
    let read = |name: &str| std::fs::read_to_string(dir.join("500kmh").join(name)).expect("snapshot written above");
    let truth = read_channel_dump(&read("truth_mag.txt"), &read("truth_phase.txt"), 512, 8)?;
    let est = read_channel_dump(&read("estimate_mag.txt"), &read("estimate_phase.txt"), 512, 8)?;
    println!("|H| at 500 km/h, first sub-symbol rows of subcarriers 0..4, replicas k = 0, 4, 7:");
    for q in (0..32).step_by(8) {
        let row = |g: &otfdm::grid::ComplexGrid| [0, 4, 7].map(|k| format!("{:.3}", g[(q, k)].norm())).join(" ");
        println!("  row {q:>3}: truth {}   estimate {}", row(&truth), row(&est));
    }
    println!("dumps in {}", dir.display());
    Ok(())
}
