//! Frozen parameters and MACs of every encoder slice, and the cost proxy of a
//! logistic-regression grid on 25k training utterances.

use greenspoof::budget::{cost_report, mac_breakdown, slice_params, EncoderConfig, SliceSpec};
use greenspoof::classifiers::Algorithm;
use greenspoof::selection::GridSpec;

fn main() -> greenspoof::Result<()> {
    let cfg = EncoderConfig::base();
    let seconds = 3.5;
    let full = mac_breakdown(&cfg, SliceSpec::new(12, &cfg)?, seconds)?.total;

    println!("{seconds} s of 16 kHz audio");
    println!(
        "{:>3} {:>14} {:>9} {:>11}",
        "k", "params", "GMACs", "vs full"
    );
    for k in 0..=12 {
        let slice = SliceSpec::new(k, &cfg)?;
        let m = mac_breakdown(&cfg, slice, seconds)?;
        println!(
            "{k:>3} {:>14} {:>9.3} {:>10.1}%",
            slice_params(&cfg, slice),
            m.total / 1e9,
            100.0 * m.total / full
        );
    }

    let grid = GridSpec::table1(Algorithm::LogReg);
    for k in [2, 12] {
        let report = cost_report(
            &grid,
            25_380,
            SliceSpec::new(k, &cfg)?,
            &cfg,
            seconds,
            Some(769),
        )?;
        println!("\n{}", report.to_json());
    }
    Ok(())
}
