//! A short paired BLER campaign of OFDM against OTFDM over maximum speed.
//! The full baseline run is `otfdm-sim --config configs/baseline.toml`.

use otfdm::sim::{CampaignConfig, Simulator};
use otfdm::waveform::Waveform;

fn main() -> otfdm::Result<()> {
    let drops = std::env::args().nth(1).map_or(40, |s| s.parse().expect("drop count"));
    let cfg = CampaignConfig {
        drops,
        max_speeds_kmh: vec![0.0, 200.0, 500.0],
        waveforms: vec![Waveform::OfdmLarge, Waveform::OfdmShort, Waveform::Otfdm],
        timing: true,
        ..Default::default()
    };
    let sim = Simulator::new(cfg)?;
    println!("{} codewords per frame, {} drops per point", sim.blocks_per_frame(), drops);
    print!("{}", sim.run_campaign()?.to_csv());
    Ok(())
}
