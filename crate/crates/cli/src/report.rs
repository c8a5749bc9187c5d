//! `key: value` reports, written to report.txt and echoed on standard output.

use crate::experiment::{EXIT_CONFIG, EXIT_INVARIANT, EXIT_IO, EXIT_OK, EXIT_SOLVER};
use std::fmt::Display;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

pub fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

pub fn status_name(code: i32) -> &'static str {
    match code {
        EXIT_OK => "ok",
        EXIT_IO => "io_error",
        EXIT_CONFIG => "config_error",
        EXIT_SOLVER => "solver_failure",
        EXIT_INVARIANT => "invariant_violation",
        _ => "unknown",
    }
}

impl Report {
    pub fn new() -> Report {
        Report::default()
    }

    pub fn push(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    /// Puts `status` and `exit_code` first, replacing earlier ones.
    pub fn insert_status(&mut self, code: i32) {
        self.entries.retain(|(k, _)| k != "status" && k != "exit_code");
        self.entries
            .insert(0, ("exit_code".to_string(), code.to_string()));
        self.entries
            .insert(0, ("status".to_string(), status_name(code).to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        // values never span lines, so the file stays one entry per line
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}: {}\n", v.replace('\n', " ")))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_comes_first_and_is_replaced() {
        let mut r = Report::new();
        r.push("steps", 3);
        r.insert_status(EXIT_SOLVER);
        r.insert_status(EXIT_OK);
        assert_eq!(r.render(), "status: ok\nexit_code: 0\nsteps: 3\n");
        assert_eq!(r.get("steps"), Some("3"));
    }

    #[test]
    fn multiline_values_are_flattened() {
        let mut r = Report::new();
        r.push("error", "a\nb");
        assert_eq!(r.render(), "error: a b\n");
    }
}
