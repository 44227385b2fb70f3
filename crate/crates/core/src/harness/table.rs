//! Small CSV tables with `# key=value` metadata lines on top.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn csv_err(e: csv::Error) -> Error {
    let pos = e.position().map(|p| p.byte() as usize).unwrap_or(0);
    Error::Parse { pos, msg: e.to_string() }
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), ..Default::default() }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Dimension(format!("{} fields for {} columns", row.len(), self.columns.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn get(&self, row: usize, name: &str) -> Option<&str> {
        Some(self.rows.get(row)?[self.column(name)?].as_str())
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Header and rows only, without metadata.
    pub fn body(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in std::iter::once(&self.columns).chain(&self.rows) {
            w.write_record(r).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("writing to memory")).expect("fields are utf-8")
    }

    pub fn to_csv(&self) -> String {
        let mut s: String = self.meta.iter().map(|(k, v)| format!("# {k}={v}\n")).collect();
        s.push_str(&self.body());
        s
    }

    pub fn parse(text: &str) -> Result<Table> {
        let mut t = Table::default();
        let mut offset = 0;
        for line in text.lines() {
            let Some(m) = line.strip_prefix('#') else { break };
            let (k, v) = m.trim().split_once('=').unwrap_or((m.trim(), ""));
            t.meta.push((k.to_string(), v.to_string()));
            offset += line.len() + 1;
        }
        let mut r = csv::ReaderBuilder::new().from_reader(text[offset.min(text.len())..].as_bytes());
        t.columns = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
        if t.columns.is_empty() {
            return Err(Error::Parse { pos: offset, msg: "no header row".into() });
        }
        for rec in r.records() {
            t.rows.push(rec.map_err(csv_err)?.iter().map(String::from).collect());
        }
        Ok(t)
    }

    /// Mean of every numeric column over rows sharing the `keys` columns,
    /// in first-appearance order. Non-numeric columns and `seed` are dropped.
    pub fn mean_by(&self, keys: &[&str]) -> Result<Table> {
        let key_idx: Vec<usize> = keys
            .iter()
            .map(|k| self.column(k).ok_or_else(|| Error::Invalid(format!("no column `{k}`"))))
            .collect::<Result<_>>()?;
        let numeric: Vec<usize> = (0..self.columns.len())
            .filter(|&c| !key_idx.contains(&c) && self.columns[c] != "seed")
            .filter(|&c| !self.rows.is_empty() && self.rows.iter().all(|r| r[c].parse::<f64>().is_ok()))
            .collect();
        let mut groups: BTreeMap<usize, (Vec<String>, Vec<f64>, usize)> = BTreeMap::new();
        let mut first: BTreeMap<Vec<String>, usize> = BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            let key: Vec<String> = key_idx.iter().map(|&c| r[c].clone()).collect();
            let g = *first.entry(key.clone()).or_insert(i);
            let e = groups.entry(g).or_insert_with(|| (key, vec![0.0; numeric.len()], 0));
            for (s, &c) in e.1.iter_mut().zip(&numeric) {
                *s += r[c].parse::<f64>().expect("checked numeric");
            }
            e.2 += 1;
        }
        let mut cols: Vec<&str> = keys.to_vec();
        cols.extend(numeric.iter().map(|&c| self.columns[c].as_str()));
        cols.push("runs");
        let mut out = Table::new(&cols);
        out.meta = self.meta.clone();
        for (key, sums, count) in groups.into_values() {
            let mut row = key;
            row.extend(sums.iter().map(|s| fmt_f64(s / count as f64)));
            row.push(count.to_string());
            out.push(row)?;
        }
        Ok(out)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            writeln!(s, "- {k}: {v}").unwrap();
        }
        if !self.meta.is_empty() {
            s.push('\n');
        }
        writeln!(s, "| {} |", self.columns.join(" | ")).unwrap();
        writeln!(s, "|{}", "---|".repeat(self.columns.len())).unwrap();
        for r in &self.rows {
            writeln!(s, "| {} |", r.join(" | ")).unwrap();
        }
        s
    }
}

/// Fixed-precision float formatting shared by every table.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() && x == x.trunc() && x.abs() < 1e15 {
        format!("{x:.0}")
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x.abs() < 1e-3 {
        format!("{x:.3e}")
    } else {
        format!("{x:.6}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_with_quotes() {
        let mut t = Table::new(&["a", "b"]).meta("seed", 3);
        t.push(vec!["1".into(), "x, \"y\"".into()]).unwrap();
        t.push(vec!["2".into(), "".into()]).unwrap();
        let back = Table::parse(&t.to_csv()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.meta_value("seed"), Some("3"));
        assert!(t.push(vec!["3".into()]).is_err());
        assert!(matches!(Table::parse("a,b\n1\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn means_group_in_order() {
        let mut t = Table::new(&["depth", "seed", "acc", "note"]);
        for (d, s, a) in [("2", "0", "1.0"), ("3", "0", "0.5"), ("2", "1", "0.5")] {
            t.push(vec![d.into(), s.into(), a.into(), "x".into()]).unwrap();
        }
        let m = t.mean_by(&["depth"]).unwrap();
        assert_eq!(m.columns, vec!["depth", "acc", "runs"]);
        assert_eq!(m.rows[0], vec!["2", "0.750000", "2"]);
        assert_eq!(m.rows[1], vec!["3", "0.500000", "1"]);
    }

    #[test]
    fn float_format() {
        assert_eq!(fmt_f64(3.0), "3");
        assert_eq!(fmt_f64(0.25), "0.250000");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(1.4e-6), "1.400e-6");
    }
}
