//! Output files carry a schema string and the effective configuration.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use serde_json::{Map, Value};

pub const SCHEMA_WINDOW_INFO: &str = "ifsnr.window-info/1";
pub const SCHEMA_WINDOW_CURVES: &str = "ifsnr.window-curves/1";
pub const SCHEMA_CALIBRATION: &str = "ifsnr.calibration/1";
pub const SCHEMA_SIMULATION: &str = "ifsnr.simulation-cdf/1";
pub const SCHEMA_SUMMARY: &str = "ifsnr.simulation-summary/1";
pub const SCHEMA_SNR_MAP: &str = "ifsnr.snr-map/1";
pub const SCHEMA_IFGRAM: &str = "ifsnr.ifgram/1";

/// Buffered writer to `path`, or stdout when absent.
pub fn open(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn csv_header(w: &mut dyn Write, schema: &str, config: &Value, columns: &[&str]) -> io::Result<()> {
    writeln!(w, "# schema: {schema}")?;
    writeln!(w, "# config: {config}")?;
    writeln!(w, "{}", columns.join(","))
}

/// JSON document with `schema` and `config` ahead of the body's fields.
pub fn json_document(schema: &str, config: &Value, body: Map<String, Value>) -> Value {
    let mut doc = Map::new();
    doc.insert("schema".into(), Value::String(schema.into()));
    doc.insert("config".into(), config.clone());
    doc.extend(body);
    Value::Object(doc)
}

pub fn write_json(w: &mut dyn Write, doc: &Value) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut *w, doc)?;
    writeln!(w)?;
    Ok(())
}
