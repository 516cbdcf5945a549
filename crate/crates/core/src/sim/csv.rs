use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::ber::BerRecord;
use super::config::ReceiverType;
use crate::error::{Error, Result};
use crate::filters::FilterKind;

pub const CSV_HEADER: &str = "detector,stage,receiver,snr_db,trials,bit_errors,ber,ci_low,ci_high,nonconv";

/// 17 significant digits, enough to round-trip any `f64`.
pub(crate) fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_csv<W: Write>(records: &[BerRecord], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.detector.label(),
            r.stage,
            r.receiver.label(),
            fmt_f64(r.snr_db),
            r.trials,
            r.bit_errors,
            fmt_f64(r.ber),
            fmt_f64(r.ci_low),
            fmt_f64(r.ci_high),
            r.nonconv
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[BerRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_csv(records, BufWriter::new(file))
}

pub fn parse_csv(text: &str) -> Result<Vec<BerRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(Error::Config {
                line: 1,
                msg: "missing BER CSV header".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Config { line: idx + 1, msg };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 10 {
            return Err(err(format!("expected 10 fields, got {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number `{s}`")));
        let int = |s: &str| s.parse::<u64>().map_err(|_| err(format!("bad integer `{s}`")));
        out.push(BerRecord {
            detector: FilterKind::from_label(f[0]).ok_or_else(|| err(format!("unknown detector `{}`", f[0])))?,
            stage: int(f[1])? as usize,
            receiver: f[2].parse::<ReceiverType>().map_err(|e| err(e.to_string()))?,
            snr_db: num(f[3])?,
            trials: int(f[4])?,
            bit_errors: int(f[5])?,
            ber: num(f[6])?,
            ci_low: num(f[7])?,
            ci_high: num(f[8])?,
            nonconv: int(f[9])?,
        });
    }
    Ok(out)
}
