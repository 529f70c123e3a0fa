//! Iteration traces as CSV: one row per iteration, floats at 17 significant
//! digits, LF line endings.

use std::fs;
use std::path::Path;

use crate::error::{DeconvError, Result};
use crate::metrics::IterationTrace;

pub const TRACE_HEADER: &str = "n,alpha,rel_err,ftr,residual_rms,wall_ms";

fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn format_trace(traces: &[IterationTrace]) -> String {
    let mut out = String::with_capacity(32 + traces.len() * 140);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for t in traces {
        let fields = [t.alpha_n, t.rel_err, t.ftr, t.residual_rms, t.wall_ms].map(format_float);
        out.push_str(&t.n.to_string());
        for f in fields {
            out.push(',');
            out.push_str(&f);
        }
        out.push('\n');
    }
    out
}

pub fn parse_trace(text: &str) -> Result<Vec<IterationTrace>> {
    let bad = |m: String| DeconvError::format("<trace>", m);
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TRACE_HEADER => {}
        other => return Err(bad(format!("unexpected header {other:?}"))),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 6 {
                return Err(bad(format!("row {}: expected 6 columns, got {}", i + 1, cols.len())));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| bad(format!("row {}: invalid number `{s}`", i + 1)))
            };
            Ok(IterationTrace {
                n: cols[0]
                    .parse()
                    .map_err(|_| bad(format!("row {}: invalid n `{}`", i + 1, cols[0])))?,
                alpha_n: num(cols[1])?,
                rel_err: num(cols[2])?,
                ftr: num(cols[3])?,
                residual_rms: num(cols[4])?,
                wall_ms: num(cols[5])?,
            })
        })
        .collect()
}

pub fn write_trace(traces: &[IterationTrace], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_trace(traces)).map_err(|source| DeconvError::Write {
        path: path.into(),
        source,
    })
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<IterationTrace>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DeconvError::Read {
        path: path.into(),
        source,
    })?;
    parse_trace(&text).map_err(|e| DeconvError::format(path, e.to_string()))
}
