//! Plain-text preference matrices and run traces.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use oneclass_core::{PreferenceMatrix, RunTrace};

/// Header `N M K delta nu pf`, then `N` rows of `M` probabilities, then one
/// row of `N` type indices. Values are written in shortest round-trip form.
pub fn preference_matrix_to_string(pm: &PreferenceMatrix) -> String {
    let mut out = format!(
        "{} {} {} {} {} {}\n",
        pm.n_users(),
        pm.n_items(),
        pm.n_types(),
        pm.delta(),
        pm.nu(),
        pm.pf()
    );
    for u in 0..pm.n_users() {
        let row: Vec<String> = pm.row(u).iter().map(|p| p.to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    let types: Vec<String> = pm.type_of().iter().map(|t| t.to_string()).collect();
    out.push_str(&types.join(" "));
    out.push('\n');
    out
}

pub fn write_preference_matrix(pm: &PreferenceMatrix, path: &Path) -> Result<()> {
    fs::write(path, preference_matrix_to_string(pm)).with_context(|| format!("writing {}", path.display()))
}

pub fn parse_preference_matrix(text: &str) -> Result<PreferenceMatrix> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().context("empty matrix file")?;
    let h: Vec<&str> = header.split_whitespace().collect();
    ensure!(h.len() == 6, "header must be `N M K delta nu pf`, got `{header}`");
    let n: usize = h[0].parse().context("N")?;
    let m: usize = h[1].parse().context("M")?;
    let k: usize = h[2].parse().context("K")?;
    let delta: f64 = h[3].parse().context("delta")?;
    let nu: f64 = h[4].parse().context("nu")?;
    let pf: f64 = h[5].parse().context("pf")?;

    let mut probs = Vec::with_capacity(n * m);
    for u in 0..n {
        let (line, row) = lines.next().with_context(|| format!("missing row for user {u}"))?;
        let before = probs.len();
        for tok in row.split_whitespace() {
            probs.push(tok.parse::<f64>().with_context(|| format!("line {}: bad value `{tok}`", line + 1))?);
        }
        ensure!(probs.len() - before == m, "line {}: expected {m} values, got {}", line + 1, probs.len() - before);
    }
    let (line, types) = lines.next().context("missing type row")?;
    let type_of: Vec<usize> = types
        .split_whitespace()
        .map(|t| t.parse().with_context(|| format!("line {}: bad type `{t}`", line + 1)))
        .collect::<Result<_>>()?;
    ensure!(type_of.len() == n, "type row has {} entries, expected {n}", type_of.len());
    if let Some((line, _)) = lines.next() {
        bail!("line {}: trailing content after the type row", line + 1);
    }
    Ok(PreferenceMatrix::from_parts(m, k, probs, type_of, delta, nu, pf)?)
}

pub fn read_preference_matrix(path: &Path) -> Result<PreferenceMatrix> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_preference_matrix(&text).with_context(|| format!("in {}", path.display()))
}

/// CSV with columns `t,step_type,user,item,response`, one row per
/// non-exhausted user and step.
pub fn write_trace<W: Write>(trace: &RunTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "step_type", "user", "item", "response"])?;
    for (t, step, user, item, response) in trace.records() {
        w.write_record([t.to_string(), step.name().to_string(), user.to_string(), item.to_string(), response.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(trace: &RunTrace, path: &Path) -> Result<()> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_trace(trace, BufWriter::new(f))
}

/// One parsed trace row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRow {
    pub t: usize,
    pub step_type: String,
    pub user: usize,
    pub item: usize,
    pub response: i8,
}

pub fn read_trace(text: &str) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        ensure!(rec.len() == 5, "trace row with {} fields", rec.len());
        rows.push(TraceRow {
            t: rec[0].parse()?,
            step_type: rec[1].to_string(),
            user: rec[2].parse()?,
            item: rec[3].parse()?,
            response: rec[4].parse()?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use oneclass_core::model::generate_model;
    use oneclass_core::{usercf, AlgoParams, Environment, FeedbackMode, ModelParams};

    #[test]
    fn matrix_round_trip() {
        let pm = generate_model(&ModelParams::new(9, 12, 3, 0.2, 0.4, 0.7), 5).unwrap();
        let text = preference_matrix_to_string(&pm);
        let back = parse_preference_matrix(&text).unwrap();
        assert_eq!(back, pm);
        assert_eq!(preference_matrix_to_string(&back), text);
        assert!(text.starts_with("9 12 3 0.2 0.4 0.7\n"));
    }

    #[test]
    fn matrix_errors_name_the_line() {
        let bad = "2 2 1 0.3 0.5 1\n0.9 0.1\n0.9 x\n0 0\n";
        let err = format!("{:#}", parse_preference_matrix(bad).unwrap_err());
        assert!(err.contains("line 3"), "{err}");
        assert!(parse_preference_matrix("2 2 1 0.3 0.5 1\n0.9 0.1\n0.9 0.1\n0\n").is_err());
        assert!(parse_preference_matrix("2 2 1 0.3 0.5 1\n0.9 0.1\n0.9 0.5\n0 0\n").is_err());
    }

    #[test]
    fn trace_rows_match_records() {
        let pm = generate_model(&ModelParams::new(6, 10, 2, 0.3, 0.3, 1.0), 1).unwrap();
        let env = Environment::synthetic(pm, 1.0, FeedbackMode::OneClass, 2).unwrap();
        let trace = usercf::run(&env, &AlgoParams::new(0.5, 0.5, 4, 2), 12, 3).unwrap();
        let mut buf = Vec::new();
        write_trace(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,step_type,user,item,response\n0,preference,0,"));
        let rows = read_trace(&text).unwrap();
        let expected: Vec<_> = trace.records().collect();
        assert_eq!(rows.len(), expected.len());
        for (row, (t, step, u, i, r)) in rows.iter().zip(expected) {
            assert_eq!((row.t, row.step_type.as_str(), row.user, row.item, row.response), (t, step.name(), u, i, r));
        }
    }
}
