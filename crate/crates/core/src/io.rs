//! Text formats: coefficient dumps, potential files, residual histories,
//! series dumps and `key=value` summaries.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{KamError, Result};
use crate::field::{Grid, SpectralField};
use crate::lindstedt::PerturbativeSeries;
use crate::model::{Potential, PotentialMode};
use crate::solver::{KamTrace, StepReport};

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn bad(line: usize, msg: impl Into<String>) -> KamError {
    KamError::InvalidInput(format!("line {line}: {}", msg.into()))
}

/// Modes of `grid` in lexicographic order.
fn lex_modes(grid: Grid) -> Vec<Vec<i64>> {
    let mut modes: Vec<Vec<i64>> = (0..grid.len()).map(|i| grid.mode(i)).collect();
    modes.sort();
    modes
}

pub fn write_field_dump(field: &SpectralField) -> String {
    let grid = field.grid();
    let mut out = format!("# dim={} grid={}\n", grid.dim, grid.size);
    for k in lex_modes(grid) {
        let z = field.coefficient(&k);
        for ki in &k {
            let _ = write!(out, "{ki} ");
        }
        let _ = writeln!(out, "{} {}", num(z.re), num(z.im));
    }
    out
}

fn parse_header(line: &str, keys: &[&str]) -> Option<Vec<usize>> {
    let rest = line.strip_prefix('#')?.trim();
    let mut vals = Vec::new();
    let parts: Vec<&str> = rest.split_whitespace().collect();
    if parts.len() != keys.len() {
        return None;
    }
    for (part, key) in parts.iter().zip(keys) {
        let (k, v) = part.split_once('=')?;
        if k != *key {
            return None;
        }
        vals.push(v.parse().ok()?);
    }
    Some(vals)
}

/// Parses lines `k_1 .. k_n re im` into mode/amplitude pairs.
fn parse_mode_lines<'a>(
    lines: impl Iterator<Item = (usize, &'a str)>,
    n: usize,
) -> Result<Vec<(Vec<i64>, Complex64)>> {
    let mut out = Vec::new();
    for (no, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != n + 2 {
            return Err(bad(no, format!("expected {} columns, got {}", n + 2, parts.len())));
        }
        let k = parts[..n]
            .iter()
            .map(|p| p.parse::<i64>().map_err(|e| bad(no, e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let re: f64 = parts[n].parse().map_err(|_| bad(no, "bad real part"))?;
        let im: f64 = parts[n + 1].parse().map_err(|_| bad(no, "bad imaginary part"))?;
        out.push((k, Complex64::new(re, im)));
    }
    Ok(out)
}

pub fn parse_field_dump(text: &str) -> Result<SpectralField> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, head) = lines.next().ok_or_else(|| bad(1, "empty dump"))?;
    let hv = parse_header(head, &["dim", "grid"]).ok_or_else(|| bad(1, "expected '# dim=<n> grid=<N>'"))?;
    let grid = Grid::new(hv[0], hv[1])?;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (k, z) in parse_mode_lines(lines, grid.dim)? {
        let i = grid
            .mode_index(&k)
            .ok_or_else(|| KamError::InvalidInput(format!("mode {k:?} not on grid")))?;
        coeffs[i] = z;
    }
    SpectralField::from_coefficients(grid, coeffs)
}

pub fn write_potential(p: &Potential) -> String {
    let mut out = format!("# d={}\n", p.dim_total());
    for m in p.modes() {
        for j in &m.j {
            let _ = write!(out, "{j} ");
        }
        let _ = writeln!(out, "{} {}", num(m.amp.re), num(m.amp.im));
    }
    out
}

/// Reads a potential file. Modes whose mirror is absent get the conjugate
/// amplitude.
pub fn parse_potential(text: &str) -> Result<Potential> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, head) = lines.next().ok_or_else(|| bad(1, "empty potential file"))?;
    let d = parse_header(head, &["d"]).ok_or_else(|| bad(1, "expected '# d=<d>'"))?[0];
    let modes = parse_mode_lines(lines, d)?
        .into_iter()
        .map(|(j, amp)| PotentialMode { j, amp })
        .collect();
    Potential::new(d, modes)
}

pub const HISTORY_HEADER: &str = "iter,res_e,res_f,sigma,lambda,norm_v,branch,tail_frac";

fn history_row(r: &StepReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        r.iteration,
        num(r.res_e_after),
        num(r.res_f_after),
        num(r.sigma),
        num(r.lambda),
        num(r.norm_v),
        r.branch_label(),
        num(r.tail_fraction)
    )
}

/// Row 0 holds the initial guess; row `n` the state after step `n`.
pub fn write_history(
    initial_res_e: f64,
    initial_res_f: f64,
    initial_sigma: f64,
    initial_lambda: f64,
    initial_norm_v: f64,
    history: &[StepReport],
) -> String {
    let mut out = format!("{HISTORY_HEADER}\n");
    let _ = writeln!(
        out,
        "0,{},{},{},{},{},-,{}",
        num(initial_res_e),
        num(initial_res_f),
        num(initial_sigma),
        num(initial_lambda),
        num(initial_norm_v),
        num(0.0)
    );
    for r in history {
        out.push_str(&history_row(r));
        out.push('\n');
    }
    out
}

pub fn write_trace_history(trace: &KamTrace, guess_sigma: f64, guess_lambda: f64, guess_norm_v: f64) -> String {
    write_history(
        trace.initial_res_e,
        trace.initial_res_f,
        guess_sigma,
        guess_lambda,
        guess_norm_v,
        &trace.history,
    )
}

pub fn write_series_dump(series: &PerturbativeSeries) -> String {
    let mut out = String::new();
    for n in 0..=series.order() {
        let _ = writeln!(out, "# order={n}");
        out.push_str("# field=v\n");
        out.push_str(&write_field_dump(&series.v_coeffs[n]));
        out.push_str("# field=c\n");
        out.push_str(&write_field_dump(&series.c_coeffs[n]));
        let _ = writeln!(
            out,
            "sigma_n={} lambda_n={}",
            num(series.sigma_coeffs[n]),
            num(series.lambda_coeffs[n])
        );
    }
    out
}

/// Ordered `key=value` lines.
#[derive(Clone, Debug, Default)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn text(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn number(&mut self, key: &str, value: f64) -> &mut Self {
        self.text(key, num(value))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| bad(i + 1, "expected key=value"))?;
            s.text(k, v);
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn field_dump_round_trip() {
        let g = Grid::new(2, 8).unwrap();
        let f = SpectralField::from_fn(g, |p| 0.1 + (2.0 * PI * (p[0] + p[1])).sin() + 0.3 * (4.0 * PI * p[1]).cos());
        let text = write_field_dump(&f);
        assert!(text.starts_with("# dim=2 grid=8\n"));
        assert_eq!(text.lines().count(), 65);
        assert!(text.lines().nth(1).unwrap().starts_with("-4 -4 "));
        let back = parse_field_dump(&text).unwrap();
        assert!(back.distance(&f).unwrap() < 1e-15);
    }

    #[test]
    fn field_dump_rejects_bad_header() {
        assert!(parse_field_dump("# grid=8\n").is_err());
        assert!(parse_field_dump("# dim=1 grid=6\n").is_err());
        assert!(parse_field_dump("# dim=1 grid=8\n0 1.0\n").is_err());
    }

    #[test]
    fn potential_round_trip_and_closure() {
        let p = parse_potential("# d=2\n1 0 0.025 0\n1 1 0.0 0.01\n").unwrap();
        assert_eq!(p.modes().len(), 4);
        let again = parse_potential(&write_potential(&p)).unwrap();
        assert_eq!(again, p);
    }

    #[test]
    fn summary_round_trip() {
        let mut s = Summary::new();
        s.text("status", "converged").number("sigma", -5.0e-5).text("iterations", 4);
        let text = s.render();
        assert!(text.contains("sigma=-5.0000000000000002e-5\n"));
        let back = Summary::parse(&text).unwrap();
        assert_eq!(back.get("iterations"), Some("4"));
    }

    #[test]
    fn history_header_and_rows() {
        let csv = write_history(1.0, 2.0, 0.0, 0.0, 0.0, &[]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(HISTORY_HEADER));
        assert!(lines.next().unwrap().starts_with("0,1.0000000000000000e0,2.0000000000000000e0"));
    }
}
