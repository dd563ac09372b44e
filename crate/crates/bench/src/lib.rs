//! Shared fixtures for the benchmarks.

use diffvar::experiments::{draw_toy, ToyConfig, ToyDraw};
use diffvar::rng::seeded;
use diffvar::signal::SAMPLE_RATE;
use diffvar::Waveform;

/// One second of a two-tone signal at the native sample rate.
pub fn tone_second() -> Waveform {
    let sr = SAMPLE_RATE as f64;
    let samples = (0..SAMPLE_RATE as usize)
        .map(|n| {
            let t = n as f64 / sr;
            (std::f64::consts::TAU * 440.0 * t).sin()
                + 0.3 * (std::f64::consts::TAU * 1250.0 * t).sin()
        })
        .collect();
    Waveform::new(samples).expect("finite samples")
}

/// A default-sized toy draw.
pub fn toy_draw(seed: u64) -> (ToyConfig, ToyDraw) {
    let cfg = ToyConfig::default();
    let draw = draw_toy(&cfg, &mut seeded(seed)).expect("valid default toy");
    (cfg, draw)
}
