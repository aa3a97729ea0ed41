//! Per-round CSV output.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::engine::RoundTrace;
use crate::error::Result;

pub const TRACE_HEADER: &str =
    "round,participants,test_accuracy,train_loss,eps_c_round,eps_c_total,eps_local_max,delta_c_round";

/// Formats like C's `%.9g`.
pub fn fmt_g9(x: f64) -> String {
    fmt_g(x, 9)
}

/// Formats like C's `%.{precision}g`.
pub fn fmt_g(x: f64, precision: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let p = precision.max(1);
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= p as i32 {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn trace_row(t: &RoundTrace) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        t.round,
        t.participants.len(),
        fmt_g9(t.test_accuracy),
        fmt_g9(t.train_loss),
        fmt_g9(t.eps_central_round),
        fmt_g9(t.eps_central_total),
        fmt_g9(t.eps_local_max),
        fmt_g9(t.delta_central_round),
    )
}

pub fn trace_csv(traces: &[RoundTrace]) -> String {
    let mut out = String::with_capacity(64 * (traces.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for t in traces {
        out.push_str(&trace_row(t));
        out.push('\n');
    }
    out
}

/// Writes through a sibling temporary file and renames, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_trace_csv(path: &Path, traces: &[RoundTrace]) -> Result<()> {
    write_atomic(path, &trace_csv(traces))
}
