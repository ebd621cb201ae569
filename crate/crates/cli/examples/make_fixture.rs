//! Regenerates `tests/fixtures/`: half a second of a 100 Hz pulse train in
//! white noise at 40 dB SNR, with a constant f0 track.
//!
//! cargo run -p ifsnr-cli --example make_fixture

use std::fs::File;
use std::path::Path;

use ifsnr::calibration::{add_noise_at_snr, pulse_train, TestSignalSpec};
use ifsnr::io::{write_f0_track, write_wav, Audio};
use ifsnr::speech::F0Track;

fn main() -> ifsnr::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    std::fs::create_dir_all(&dir)?;
    let spec = TestSignalSpec { duration: 0.5, rng_seed: 40, ..TestSignalSpec::default() };
    let noisy = add_noise_at_snr(&pulse_train(&spec), 40.0, spec.rng_seed)?;
    let audio = Audio {
        samples: noisy.iter().map(|v| 0.5 * v).collect(),
        sample_rate: spec.sample_rate,
    };
    write_wav(dir.join("pulse_100hz_40db.wav"), &audio)?;
    let track = F0Track::constant(spec.f0, spec.duration, 0.005)?;
    write_f0_track(File::create(dir.join("pulse_100hz_40db.f0.csv"))?, &track)?;
    Ok(())
}
