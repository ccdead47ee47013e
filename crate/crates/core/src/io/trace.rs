use std::io::Write;

use crate::trace::TraceEvent;

/// Fractional digits of trace reals.
pub const TRACE_PRECISION: usize = 9;

/// Environment variable that may widen the trace precision.
pub const PRECISION_ENV: &str = "DCNET_TRACE_PRECISION";

/// The precision in effect: the environment may raise it, never lower it.
pub fn trace_precision() -> usize {
    std::env::var(PRECISION_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .map_or(TRACE_PRECISION, |p| p.clamp(TRACE_PRECISION, 17))
}

/// Fixed-point formatting with round-half-even on the exact binary value;
/// negative zero prints as zero.
pub fn format_real(v: f64, precision: usize) -> String {
    let s = format!("{v:.precision$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.chars().all(|c| c == '0' || c == '.') => rest.to_owned(),
        _ => s,
    }
}

pub fn format_event(e: &TraceEvent, precision: usize) -> String {
    format!(
        "step={} event={} src={} dst={} value={} result={}",
        e.step,
        e.event,
        e.src,
        e.dst,
        format_real(e.value, precision),
        format_real(e.result, precision)
    )
}

pub fn format_trace(events: &[TraceEvent], precision: usize) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&format_event(e, precision));
        out.push('\n');
    }
    out
}

pub fn emit_trace(events: &[TraceEvent], mut sink: impl Write) -> std::io::Result<()> {
    sink.write_all(format_trace(events, trace_precision()).as_bytes())
}
