//! Report assembly and byte-stable JSON printing.

use std::io;

use haantjes_core::report::Check;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Map, Value};

/// Pretty printer whose floats always carry 17 significant digits.
struct FixedFloats<'a>(PrettyFormatter<'a>);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.0.$name(w $(, $arg)*)
            }
        )*
    };
}

impl Formatter for FixedFloats<'_> {
    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }

    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{}", format_float(value))
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

/// `d.dddddddddddddddde±x`; finite values only.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_json_string(v: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats(PrettyFormatter::with_indent(b"  ")));
    v.serialize(&mut ser).expect("in-memory serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// Run context shared by every check of one invocation.
pub struct Context {
    pub command: String,
    pub model_sha256: String,
    pub seed: u64,
    pub samples: usize,
}

pub struct Report {
    ctx: Context,
    checks: Vec<Check>,
    outputs: Map<String, Value>,
}

impl Report {
    pub fn new(ctx: Context) -> Self {
        Report { ctx, checks: Vec::new(), outputs: Map::new() }
    }

    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn extend(&mut self, r: haantjes_core::VerificationReport) {
        self.checks.extend(r.checks);
    }

    pub fn output(&mut self, key: &str, v: Value) {
        self.outputs.insert(key.to_string(), v);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_value(&self) -> Value {
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|c| {
                let mut v = serde_json::to_value(c).expect("checks serialize");
                v.as_object_mut().expect("object").insert("seed".into(), json!(self.ctx.seed));
                v
            })
            .collect();
        json!({
            "tool": "haantjes-kit",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.ctx.command,
            "model_sha256": self.ctx.model_sha256,
            "seed": self.ctx.seed,
            "samples": self.ctx.samples,
            "passed": self.passed(),
            "checks": checks,
            "outputs": Value::Object(self.outputs.clone()),
        })
    }

    /// One line per check for stderr.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let mark = if c.passed { "PASS" } else { "FAIL" };
            s.push_str(&format!("{mark} {:<28} max {:.3e} (tol {:.1e})\n", c.name, c.max_residual, c.tolerance));
            for n in &c.notes {
                s.push_str(&format!("     {n}\n"));
            }
        }
        let total = self.checks.len();
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        s.push_str(&format!("{}: {} of {total} checks passed\n", self.ctx.command, total - failed));
        s
    }
}
