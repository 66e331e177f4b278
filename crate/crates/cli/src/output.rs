use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

pub const SCHEMA_VERSION: &str = "1.0.0";
const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug)]
pub enum CliError {
    Param(String),
    Io(String),
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Param(_) => 2,
            CliError::Io(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Param(m) => write!(f, "invalid parameters: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Invariant(m) => write!(f, "internal invariant violated: {m}"),
        }
    }
}

/// Rounds `x` to 12 significant digits; integers pass through unchanged.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses")
}

fn round_all(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let r = round_sig(n.as_f64().expect("f64 number"));
            *v = serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_all),
        Value::Object(map) => map.values_mut().for_each(round_all),
        _ => {}
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("result types serialize to JSON")
}

/// Prints the envelope to stdout. `seed` is set exactly for stochastic commands.
pub fn emit(command: &str, params: &impl Serialize, seed: Option<u64>, result: &impl Serialize) -> Result<(), CliError> {
    let mut envelope = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "params": to_value(params),
        "result": to_value(result),
    });
    if let Some(seed) = seed {
        envelope["seed"] = json!(seed);
    }
    round_all(&mut envelope);
    let text = serde_json::to_string_pretty(&envelope).expect("JSON values serialize");
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| CliError::Io(format!("stdout: {e}")))
}

/// CSV sink: a file, or stdout when no path is given.
pub struct Table {
    writer: csv::Writer<Box<dyn Write>>,
    target: String,
}

impl Table {
    pub fn create(path: Option<&Path>, header: &[&str]) -> Result<Self, CliError> {
        let (sink, target): (Box<dyn Write>, String) = match path {
            Some(p) => {
                let f = std::fs::File::create(p)
                    .map_err(|e| CliError::Io(format!("creating {}: {e}", p.display())))?;
                (Box::new(std::io::BufWriter::new(f)), p.display().to_string())
            }
            None => (Box::new(std::io::stdout()), "stdout".into()),
        };
        let mut t = Self {
            writer: csv::Writer::from_writer(sink),
            target,
        };
        t.row(header.iter().map(|s| s.to_string()))?;
        Ok(t)
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .map_err(|e| CliError::Io(format!("{}: {e}", self.target)))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer
            .flush()
            .map_err(|e| CliError::Io(format!("{}: {e}", self.target)))
    }
}

/// A CSV cell for a float, 12 significant digits.
pub fn num(x: f64) -> String {
    let r = round_sig(x);
    if r.fract() == 0.0 && r.abs() < 1e15 {
        format!("{r:.1}")
    } else {
        format!("{r}")
    }
}
