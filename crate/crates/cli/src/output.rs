//! Trajectory tables as CSV or JSON lines.

use std::io::{self, Write};

use quasicontrol::TrajectoryLogF64;
use serde_json::{Map, Value};

use crate::config::Format;

pub fn header(n: usize, m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("q{i}")));
    h.extend((1..=n).map(|i| format!("y{i}")));
    h.extend((1..=m).map(|i| format!("ydot{i}")));
    h.extend((1..=n).map(|i| format!("p{i}")));
    h.extend((m + 1..=n).map(|i| format!("ptilde{i}")));
    h.push("H".into());
    h.push("max_phi".into());
    h.extend((1..=m).map(|i| format!("u{i}")));
    h
}

fn row(log: &TrajectoryLogF64, k: usize) -> Vec<f64> {
    let w = &log.states[k];
    let mut r = vec![log.times[k]];
    r.extend(&w.q);
    r.extend(&w.y);
    r.extend(&w.ydot_a);
    r.extend(&w.p);
    r.extend(&w.ptilde_alpha);
    r.push(log.hamiltonian[k]);
    r.push(log.constraint_residual[k]);
    r.extend(&log.controls[k]);
    r
}

/// Writes the header (CSV only) and every recorded row.
pub fn write_log(out: &mut dyn Write, log: &TrajectoryLogF64, n: usize, m: usize, format: Format) -> io::Result<()> {
    let names = header(n, m);
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(&names)?;
            for k in 0..log.len() {
                // 17 significant digits: a bit-faithful round trip for f64.
                w.write_record(row(log, k).iter().map(|v| format!("{v:.16e}")))?;
            }
            w.flush()
        }
        Format::Jsonl => {
            for k in 0..log.len() {
                let obj: Map<String, Value> =
                    names.iter().cloned().zip(row(log, k).into_iter().map(json_number)).collect();
                serde_json::to_writer(&mut *out, &obj)?;
                out.write_all(b"\n")?;
            }
            out.flush()
        }
    }
}

/// JSON has no NaN or infinity; those become strings.
fn json_number(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or_else(|| Value::String(v.to_string()), Value::Number)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        assert_eq!(
            header(3, 2),
            ["t", "q1", "q2", "q3", "y1", "y2", "y3", "ydot1", "ydot2", "p1", "p2", "p3", "ptilde3", "H", "max_phi", "u1", "u2"]
        );
    }

    #[test]
    fn floats_round_trip_through_text() {
        for v in [0.1_f64, 1.0 / 3.0, -2.718281828459045e-300, 6.02214076e23] {
            let s = format!("{v:.16e}");
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
