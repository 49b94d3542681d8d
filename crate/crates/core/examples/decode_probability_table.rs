// Prints the decode-probability table for the bundled channel parameters:
// per-transmission values and the 3-frame msg3 retransmission window.
use rachsim_core::channel::{decode_probability, Direction};
use rachsim_core::presets;

fn main() {
    let params = presets::calibrated_channel();
    let sites = presets::field_sites();
    for site in &sites {
        println!(
            "== {} (d={} m, obs={} dB, sat={})",
            site.name, site.distance_m, site.obstruction_db, site.saturation_factor
        );
        print!("  msg2 (DL):");
        for l in 1..=14u8 {
            print!(" {l}:{:.3}", decode_probability(&params, site, l, Direction::Downlink));
        }
        println!();
        print!("  msg3 (UL):");
        for l in 2..=14u8 {
            print!(" {l}:{:.3}", decode_probability(&params, site, l, Direction::Uplink));
        }
        println!();
        print!("  msg3 win3:");
        for l in 2..=14u8 {
            let p = decode_probability(&params, site, l, Direction::Uplink);
            print!(" {l}:{:.3}", 1.0 - (1.0 - p).powi(3));
        }
        println!();
    }
}
