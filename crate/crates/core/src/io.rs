//! WAV and f0-track file access.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::speech::F0Track;

/// Mono samples scaled to [-1, 1) and their sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
}

/// Reads a mono WAV file: 16- or 24-bit integer PCM, or 32-bit float.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Audio> {
    let reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::InvalidInput(format!(
            "expected mono audio, got {} channels",
            spec.channels
        )));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (hound::SampleFormat::Int, bits @ (16 | 24)) => {
            let scale = f64::from(1u32 << (bits - 1));
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / scale))
                .collect::<std::result::Result<_, _>>()?
        }
        (fmt, bits) => {
            return Err(Error::InvalidInput(format!(
                "unsupported WAV encoding: {bits}-bit {fmt:?}"
            )))
        }
    };
    Ok(Audio {
        samples,
        sample_rate: f64::from(spec.sample_rate),
    })
}

/// Writes mono 32-bit float WAV.
pub fn write_wav(path: impl AsRef<Path>, audio: &Audio) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate.round() as u32,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for &s in &audio.samples {
        w.write_sample(s as f32)?;
    }
    w.finalize()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct TrackRow {
    time_s: f64,
    f0_hz: f64,
    #[serde(deserialize_with = "flexible_bool")]
    voiced: bool,
}

fn flexible_bool<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    let s = String::deserialize(d)?;
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "t" => Ok(true),
        "0" | "false" | "no" | "f" => Ok(false),
        other => Err(serde::de::Error::custom(format!("bad voiced flag {other:?}"))),
    }
}

/// Parses an f0 track with header `time_s,f0_hz,voiced`. Lines starting
/// with `#` are ignored.
pub fn read_f0_track(reader: impl Read) -> Result<F0Track> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["time_s", "f0_hz", "voiced"] {
        return Err(Error::InvalidInput(format!(
            "f0 track header must be time_s,f0_hz,voiced, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut times = Vec::new();
    let mut f0 = Vec::new();
    let mut voiced = Vec::new();
    for row in rdr.deserialize::<TrackRow>() {
        let row = row.map_err(csv_error)?;
        times.push(row.time_s);
        f0.push(row.f0_hz);
        voiced.push(row.voiced);
    }
    F0Track::new(times, f0, voiced)
}

pub fn read_f0_track_file(path: impl AsRef<Path>) -> Result<F0Track> {
    read_f0_track(std::fs::File::open(path)?)
}

pub fn write_f0_track(mut writer: impl Write, track: &F0Track) -> Result<()> {
    writeln!(writer, "time_s,f0_hz,voiced")?;
    for i in 0..track.times.len() {
        writeln!(
            writer,
            "{},{},{}",
            track.times[i],
            track.f0[i],
            u8::from(track.voiced[i])
        )?;
    }
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidInput(format!("f0 track: {e}"))
}
