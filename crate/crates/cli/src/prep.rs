//! Preparation-circuit files: a `QUBITS n` header, then one gate per line as
//! `KIND t0,t1 [@angle]`. Only fixed angles are allowed.

use fsvff::statevector::{Angle, Circuit, Gate, GateKind};
use fsvff::{Error, Result};

pub fn parse_prep_circuit(text: &str) -> Result<Circuit<f64>> {
    let mut circuit: Option<Circuit<f64>> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse(format!("line {}: {msg}", lineno + 1));
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] == "QUBITS" {
            if circuit.is_some() {
                return Err(err("repeated QUBITS header".into()));
            }
            let n: usize = fields.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| err("bad QUBITS".into()))?;
            circuit = Some(Circuit::new(n));
            continue;
        }
        let c = circuit.as_mut().ok_or_else(|| err("gate before QUBITS header".into()))?;
        let kind: GateKind = fields[0].parse().map_err(|e: Error| err(e.to_string()))?;
        let targets = fields
            .get(1)
            .ok_or_else(|| err("missing targets".into()))?
            .split(',')
            .map(|t| t.parse::<usize>().map_err(|_| err(format!("bad target {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let angle = match fields.get(2) {
            Some(a) => {
                let v: f64 = a
                    .strip_prefix('@')
                    .and_then(|s| s.parse().ok())
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| err(format!("bad angle {a:?}, expected @value")))?;
                Some(Angle::Fixed(v))
            }
            None => None,
        };
        let gate = Gate::new(kind, targets, angle).map_err(|e| err(e.to_string()))?;
        c.push(gate).map_err(|e| err(e.to_string()))?;
    }
    circuit.ok_or_else(|| Error::Parse("missing QUBITS header".into()))
}
