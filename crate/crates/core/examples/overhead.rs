//! Pilot overhead at baseline scale: delay and Doppler budgets of the OTFDM
//! layout against the channel, over a range of speeds and delay spreads.

use otfdm::channel::{doppler_shift, kmh_to_mps};
use otfdm::chest::{build_pilot_layout, overhead_report, ChannelBounds};
use otfdm::grid::FrameConfig;

fn main() -> otfdm::Result<()> {
    let cfg = FrameConfig::baseline();
    let layout = build_pilot_layout(4, 8, 6.0, &cfg, 7)?;
    println!(
        "M={} N={} lambda={} W={}: {} pilot subcarriers, data capacity {} of {} REs",
        cfg.m(),
        cfg.n(),
        layout.lambda(),
        layout.w(),
        layout.pilot_subcarriers().len(),
        layout.capacity(),
        cfg.m() * cfg.n()
    );
    println!(
        "{:>8} {:>6} {:>8} {:>8} {:>8} {:>8} {:>9}",
        "rms ns", "km/h", "delay", "budget", "doppler", "budget", "feasible"
    );
    for (rms_ns, kmh) in [(300.0, 120.0), (1000.0, 500.0), (1000.0, 2500.0), (3000.0, 500.0)] {
        let bounds = ChannelBounds {
            max_tau: rms_ns * 1e-9,
            max_abs_nu: doppler_shift(cfg.f_c(), kmh_to_mps(kmh)),
        };
        let r = overhead_report(&layout, bounds, &cfg)?;
        println!(
            "{rms_ns:>8} {kmh:>6} {:>8.1} {:>8} {:>8.2} {:>8} {:>9}",
            r.required_delay, r.delay_budget_samples, r.required_doppler, r.doppler_budget_slots, r.feasible
        );
    }
    Ok(())
}
