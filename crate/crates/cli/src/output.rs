//! Trace CSV and solution JSON writers.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use saddle_core::StepRecord;

pub const TRACE_HEADER: &str = "step,mu,eta,grad_norm,L_lower,L_mid,L_upper,halvings,accepted";

/// One row per record; `step` is renumbered from 0 so that concatenated
/// stages read as one run.
pub fn write_trace(path: &Path, records: &[StepRecord<f64>]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_trace_to(&mut w, records)?;
    w.flush()
}

pub fn write_trace_to(w: &mut impl Write, records: &[StepRecord<f64>]) -> io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for (i, r) in records.iter().enumerate() {
        writeln!(
            w,
            "{i},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
            r.mu,
            r.eta,
            r.grad_norm,
            r.l_lower,
            r.l_mid,
            r.l_upper,
            r.halvings,
            u8::from(r.accepted)
        )?;
    }
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()
}
