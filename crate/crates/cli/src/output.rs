use serde::Serialize;
use serde_json::Value;
use std::fmt::Write as _;

pub const SCHEMA: &str = "covsel-report/1";

/// Everything a subcommand produced, before formatting.
pub struct Outcome {
    pub config: Value,
    pub results: Value,
    pub table: String,
    /// Seed used by a randomized command, and whether it was generated.
    pub seed: Option<(u64, bool)>,
    pub warnings: Vec<String>,
    /// Pre-rendered graph in the requested text format.
    pub graph_text: Option<String>,
}

impl Outcome {
    pub fn new(config: impl Serialize, results: impl Serialize, table: String) -> Self {
        Outcome {
            config: to_value(config),
            results: to_value(results),
            table,
            seed: None,
            warnings: Vec::new(),
            graph_text: None,
        }
    }
}

pub fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("report values are serializable")
}

#[derive(Serialize)]
struct Report<'a> {
    schema: &'static str,
    command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    config: &'a Value,
    results: &'a Value,
    warnings: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    timing_seconds: Option<f64>,
}

/// Command line as typed, with `--seed` appended when it was generated.
pub fn command_echo(args: &[String], seed: Option<(u64, bool)>) -> String {
    let mut parts: Vec<String> = args.iter().map(|a| shell_quote(a)).collect();
    if let Some((s, true)) = seed {
        parts.push("--seed".into());
        parts.push(s.to_string());
    }
    parts.join(" ")
}

fn shell_quote(a: &str) -> String {
    if !a.is_empty() && a.chars().all(|c| c.is_ascii_alphanumeric() || "-_./,=:+".contains(c)) {
        a.to_string()
    } else {
        format!("'{}'", a.replace('\'', "'\\''"))
    }
}

pub fn json_report(out: &Outcome, args: &[String], timing: Option<f64>) -> String {
    let report = Report {
        schema: SCHEMA,
        command: command_echo(args, out.seed),
        seed: out.seed.map(|s| s.0),
        config: &out.config,
        results: &out.results,
        warnings: &out.warnings,
        timing_seconds: timing,
    };
    let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
    s.push('\n');
    s
}

pub fn table_report(out: &Outcome, args: &[String], timing: Option<f64>) -> String {
    let mut s = String::new();
    if let Some((seed, generated)) = out.seed {
        let _ = writeln!(s, "# seed {seed}{}", if generated { " (generated)" } else { "" });
        if generated {
            let _ = writeln!(s, "# rerun: {}", command_echo(args, out.seed));
        }
    }
    for w in &out.warnings {
        let _ = writeln!(s, "# warning: {w}");
    }
    s.push_str(&out.table);
    if let Some(t) = timing {
        let _ = writeln!(s, "# elapsed {t:.3} s");
    }
    s
}

/// Six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        format!("{:.*}", (5 - mag).max(0) as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

/// Left-aligned text columns.
pub fn render(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut s = String::new();
    let line = |s: &mut String, cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}", w = *w))
            .collect();
        let _ = writeln!(s, "{}", parts.join("  ").trim_end());
    };
    line(&mut s, header.to_vec());
    for r in rows {
        line(&mut s, r.iter().map(String::as_str).collect());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_digits() {
        assert_eq!(sig6(0.0123456789), "0.0123457");
        assert_eq!(sig6(1.0), "1.00000");
        assert_eq!(sig6(5.025168e-8), "5.02517e-8");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1234567.0), "1.23457e6");
    }

    #[test]
    fn echo_appends_generated_seed() {
        let args: Vec<String> = ["covsel", "fnfp", "--n", "10"].iter().map(|s| s.to_string()).collect();
        assert_eq!(command_echo(&args, Some((7, true))), "covsel fnfp --n 10 --seed 7");
        assert_eq!(command_echo(&args, Some((7, false))), "covsel fnfp --n 10");
    }
}
