//! Text formats for alignments, rates, pair sets, reports and matrices.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::binning::{BinAssignment, BinningParams};
use crate::clustering::{PairSet, Provenance, SparsityCertificate};
use crate::distance::{DistanceError, DistortedMetric};
use crate::model::{Alignment, ModelError};
use crate::pipeline::PipelineReport;

#[derive(Debug, Error, PartialEq)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown leaf label {0:?}")]
    UnknownLabel(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Pairs(#[from] crate::clustering::ClusteringError),
}

pub type Result<T> = std::result::Result<T, FormatError>;

fn parse_err<T>(line: usize, message: impl Into<String>) -> Result<T> {
    Err(FormatError::Parse {
        line,
        message: message.into(),
    })
}

/// Non-empty lines with their 1-based numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Header `k n r`, then one line of `n` states per site.
pub fn write_alignment(a: &Alignment) -> String {
    let mut out = format!("{} {} {}\n", a.k(), a.n(), a.r());
    let mut row = String::new();
    for site in 0..a.k() {
        row.clear();
        for leaf in 0..a.n() {
            if leaf > 0 {
                row.push(' ');
            }
            write!(row, "{}", a.state(leaf, site)).unwrap();
        }
        out.push_str(&row);
        out.push('\n');
    }
    out
}

pub fn parse_alignment(text: &str) -> Result<Alignment> {
    let mut it = lines(text);
    let Some((hl, header)) = it.next() else {
        return parse_err(1, "empty alignment file");
    };
    let dims: Vec<usize> = match header.split_whitespace().map(str::parse).collect() {
        Ok(v) => v,
        Err(_) => return parse_err(hl, "header must be three integers `k n r`"),
    };
    let [k, n, r] = dims[..] else {
        return parse_err(hl, "header must be three integers `k n r`");
    };
    if r > 255 {
        return parse_err(hl, format!("alphabet size {r} exceeds 255"));
    }
    let mut data = vec![0u8; k * n];
    let mut site = 0;
    for (ln, line) in it {
        if site == k {
            return parse_err(ln, format!("more than {k} site lines"));
        }
        let mut count = 0;
        for tok in line.split_whitespace() {
            if count == n {
                return parse_err(ln, format!("more than {n} states"));
            }
            let x: usize = match tok.parse() {
                Ok(x) => x,
                Err(_) => return parse_err(ln, format!("bad state {tok:?}")),
            };
            if x >= r {
                return parse_err(ln, format!("state {x} outside 0..{r}"));
            }
            data[count * k + site] = x as u8;
            count += 1;
        }
        if count != n {
            return parse_err(ln, format!("expected {n} states, found {count}"));
        }
        site += 1;
    }
    if site != k {
        return parse_err(0, format!("expected {k} site lines, found {site}"));
    }
    Ok(Alignment::from_leaf_major(k, n, r, data)?)
}

/// One rate per line.
pub fn write_lambdas(lambdas: &[f64]) -> String {
    lambdas.iter().map(|x| format!("{x}\n")).collect()
}

pub fn parse_lambdas(text: &str) -> Result<Vec<f64>> {
    lines(text)
        .map(|(ln, l)| match l.parse::<f64>() {
            Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
            _ => parse_err(ln, format!("expected a positive number, found {l:?}")),
        })
        .collect()
}

/// `label_a label_b` per line.
pub fn write_pairs(pairs: &PairSet, labels: &[String]) -> String {
    pairs
        .pairs()
        .iter()
        .map(|&(a, b)| format!("{} {}\n", labels[a], labels[b]))
        .collect()
}

pub fn parse_pairs(text: &str, labels: &[String], provenance: Provenance) -> Result<PairSet> {
    let index = |s: &str| {
        labels
            .iter()
            .position(|l| l == s)
            .ok_or_else(|| FormatError::UnknownLabel(s.to_string()))
    };
    let mut pairs = Vec::new();
    for (ln, line) in lines(text) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let [a, b] = toks[..] else {
            return parse_err(ln, "expected two labels");
        };
        pairs.push((index(a)?, index(b)?));
    }
    Ok(PairSet::new(pairs, provenance)?)
}

/// Ordered `key=value` lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues(pub Vec<(String, String)>);

impl KeyValues {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

fn check_value(x: Option<bool>) -> &'static str {
    match x {
        Some(true) => "pass",
        Some(false) => "fail",
        None => "not_run",
    }
}

pub fn certificate_report(c: &SparsityCertificate) -> KeyValues {
    let mut kv = KeyValues::default();
    kv.push("gamma_s", c.gamma_s);
    kv.push("n", c.n);
    kv.push("pairs", c.size);
    kv.push("path_disjoint", check_value(c.path_disjoint));
    kv.push("size", check_value(c.size_ok));
    kv.push("distance_bounds", check_value(c.distance_ok));
    kv.push("complete", c.is_complete());
    kv
}

pub fn binning_report(bp: &BinningParams) -> KeyValues {
    let mut kv = KeyValues::default();
    kv.push("lambda_lo", bp.lambda_lo);
    kv.push("lambda_hi", bp.lambda_hi);
    kv.push("chi", bp.chi);
    kv.push("u_lo", bp.u_lo);
    kv.push("u_hi", bp.u_hi);
    kv.push("gamma_u", bp.gamma_u);
    kv.push("delta_u", bp.delta_u);
    kv.push("n_bins", bp.n_bins);
    kv.push("n", bp.n);
    kv
}

/// `site,U_value[,hidden_lambda]`; sites are 0-based.
pub fn statistics_csv(u: &[f64], hidden: Option<&[f64]>) -> String {
    let mut out = String::from(if hidden.is_some() {
        "site,U_value,hidden_lambda\n"
    } else {
        "site,U_value\n"
    });
    for (i, x) in u.iter().enumerate() {
        match hidden {
            Some(h) => writeln!(out, "{i},{x},{}", h[i]).unwrap(),
            None => writeln!(out, "{i},{x}").unwrap(),
        }
    }
    out
}

/// `bin_index,lower_edge,upper_edge,count,is_abundant`. Bin 0 collects the
/// out-of-range sites and has empty edges.
pub fn bins_csv(ba: &BinAssignment, bp: &BinningParams, abundant: Option<usize>) -> String {
    let mut out = String::from("bin_index,lower_edge,upper_edge,count,is_abundant\n");
    for (j, bin) in ba.bins.iter().enumerate() {
        let flag = abundant == Some(j);
        if j == 0 {
            writeln!(out, "0,,,{},{flag}", bin.len()).unwrap();
        } else {
            writeln!(
                out,
                "{j},{},{},{},{flag}",
                bp.lower_edge(j),
                bp.upper_edge(j),
                bin.len()
            )
            .unwrap();
        }
    }
    out
}

/// Structured report: a `[section]` header per stage followed by
/// `key=value` lines. Stages that did not run are listed as skipped.
pub fn render_pipeline_report(r: &PipelineReport) -> String {
    let mut out = String::new();
    let mut section = |name: &str, kv: &KeyValues| {
        writeln!(out, "[{name}]").unwrap();
        out.push_str(&kv.render());
        out.push('\n');
    };
    let mut kv = KeyValues::default();
    kv.push("n", r.n);
    kv.push("k", r.k);
    kv.push("holds", r.assumption.holds);
    kv.push("phi_inv_6g", r.assumption.phi_inv_6g);
    kv.push("m", r.assumption.m);
    section("assumption", &kv);

    let mut kv = KeyValues::default();
    kv.push("omega", r.thresholds.omega);
    kv.push("omega_plus", r.thresholds.omega_plus);
    kv.push("omega_minus", r.thresholds.omega_minus);
    kv.push("eta", r.thresholds.eta);
    kv.push("close_pairs", r.close_pair_count);
    kv.push("sparse_pairs", r.pairs.len());
    section("clustering", &kv);
    section("certificate", &certificate_report(&r.certificate));

    match &r.tree {
        None => {
            let mut kv = KeyValues::default();
            kv.push("status", "skipped");
            kv.push("reason", "stats_only");
            section("binning", &kv);
            section("distances", &kv);
            section("reconstruction", &kv);
        }
        Some(t) => {
            let mut kv = binning_report(&t.binning);
            kv.push("out_of_range_sites", t.assignment.bins[0].len());
            kv.push("abundance_threshold", t.assignment.threshold);
            kv.push("abundant_bin", t.abundant_bin);
            section("binning", &kv);
            let mut kv = KeyValues::default();
            kv.push("k_star", t.dhat.k_star);
            kv.push("finite_entries", t.dhat.finite_entries().len());
            section("distances", &kv);
            let mut kv = KeyValues::default();
            kv.push("trust_cap", t.reconstruction.trust_cap);
            kv.push("tau", t.reconstruction.tau);
            kv.push("witness_count", t.reconstruction.witness_count);
            kv.push("newick", t.topology.to_newick());
            section("reconstruction", &kv);
        }
    }
    if let Some(o) = &r.oracle {
        let mut kv = KeyValues::default();
        if let Some(rf) = o.rf {
            kv.push("rf", rf);
        }
        for (key, value) in certificate_report(&o.certificate).0 {
            kv.push(&format!("certificate_{key}"), value);
        }
        if let Some(l) = o.lambda_star {
            kv.push("lambda_star", l);
        }
        if let Some(d) = &o.distortion {
            kv.push("distortion_tau", d.tau);
            kv.push("distortion_psi", d.psi);
            kv.push("distortion_short_pairs", d.short_pairs);
            kv.push("distortion_violations", d.violations.len());
            kv.push("distortion_pass", d.passes());
        }
        section("truth", &kv);
    }
    out
}

/// Wall-clock seconds per stage. Kept out of the main report so that
/// reruns reproduce it byte for byte.
pub fn timing_report(r: &PipelineReport) -> KeyValues {
    let mut kv = KeyValues::default();
    for (stage, t) in &r.timings {
        kv.push(&format!("{stage}_seconds"), t.as_secs_f64());
    }
    kv
}

/// Square PHYLIP-style matrix: `n`, then `label d_1 .. d_n` per row, with
/// `inf` for censored entries.
pub fn write_distance_matrix(d: &DistortedMetric) -> String {
    let n = d.n();
    let mut out = format!("{n}\n");
    for u in 0..n {
        out.push_str(&d.labels()[u]);
        for v in 0..n {
            let x = d.get(u, v);
            if x.is_infinite() {
                out.push_str(" inf");
            } else {
                write!(out, " {x}").unwrap();
            }
        }
        out.push('\n');
    }
    out
}

pub fn parse_distance_matrix(text: &str) -> Result<DistortedMetric> {
    let mut it = lines(text);
    let Some((hl, header)) = it.next() else {
        return parse_err(1, "empty matrix file");
    };
    let n: usize = match header.parse() {
        Ok(n) => n,
        Err(_) => return parse_err(hl, "first line must be the leaf count"),
    };
    let mut labels = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * n);
    for (ln, line) in it {
        if labels.len() == n {
            return parse_err(ln, format!("more than {n} rows"));
        }
        let mut toks = line.split_whitespace();
        labels.push(toks.next().unwrap_or_default().to_string());
        let mut count = 0;
        for tok in toks {
            let x = match tok {
                "inf" | "+inf" | "Inf" => f64::INFINITY,
                _ => match tok.parse::<f64>() {
                    Ok(x) if x >= 0.0 => x,
                    _ => return parse_err(ln, format!("bad distance {tok:?}")),
                },
            };
            data.push(x);
            count += 1;
        }
        if count != n {
            return parse_err(ln, format!("expected {n} distances, found {count}"));
        }
    }
    if labels.len() != n {
        return parse_err(0, format!("expected {n} rows, found {}", labels.len()));
    }
    Ok(DistortedMetric::from_row_major(n, data, Some(labels))?)
}

/// `key = value` per line, `#` starts a comment. Later keys override
/// earlier ones.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return parse_err(i + 1, format!("expected `key = value`, found {line:?}"));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return parse_err(i + 1, "empty key");
        }
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SymMatrix;

    #[test]
    fn alignment_text() {
        let a = Alignment::from_sites(3, 4, &[vec![0, 1, 2], vec![3, 3, 0]]).unwrap();
        let text = write_alignment(&a);
        assert_eq!(text, "2 3 4\n0 1 2\n3 3 0\n");
        assert_eq!(parse_alignment(&text).unwrap(), a);
    }

    #[test]
    fn alignment_errors() {
        assert!(parse_alignment("").is_err());
        assert!(parse_alignment("2 3\n").is_err());
        assert!(matches!(
            parse_alignment("1 2 2\n0 2\n"),
            Err(FormatError::Parse { line: 2, .. })
        ));
        assert!(parse_alignment("2 2 2\n0 1\n").is_err());
        assert!(parse_alignment("1 2 2\n0 1 1\n").is_err());
        assert!(parse_alignment("1 2 2\n0 1\n1 1\n").is_err());
    }

    #[test]
    fn lambda_text() {
        assert_eq!(parse_lambdas(&write_lambdas(&[0.5, 1.5])).unwrap(), vec![0.5, 1.5]);
        assert!(parse_lambdas("0.5\n-1\n").is_err());
    }

    #[test]
    fn pair_text() {
        let labels: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let p = PairSet::new(vec![(0, 1), (2, 3)], Provenance::Oracle).unwrap();
        let text = write_pairs(&p, &labels);
        assert_eq!(text, "a b\nc d\n");
        assert_eq!(parse_pairs(&text, &labels, Provenance::Oracle).unwrap(), p);
        assert_eq!(
            parse_pairs("a z\n", &labels, Provenance::Oracle),
            Err(FormatError::UnknownLabel("z".into()))
        );
    }

    #[test]
    fn matrix_text() {
        let m = SymMatrix::from_fn(3, |i, j| {
            if i == j {
                0.0
            } else if i + j == 3 {
                f64::INFINITY
            } else {
                0.25
            }
        });
        let d = DistortedMetric::new(m, Some(vec!["x".into(), "y".into(), "z".into()])).unwrap();
        let text = write_distance_matrix(&d);
        assert_eq!(text, "3\nx 0 0.25 0.25\ny 0.25 0 inf\nz 0.25 inf 0\n");
        assert_eq!(parse_distance_matrix(&text).unwrap(), d);
        assert!(parse_distance_matrix("2\na 0 1\nb 2 0\n").is_err());
        assert!(parse_distance_matrix("2\na 0 1\n").is_err());
    }

    #[test]
    fn config_text() {
        let c = parse_config("# run\nk = 200 # sites\n\nrates=gamma:2\nk=300\n").unwrap();
        assert_eq!(c["k"], "300");
        assert_eq!(c["rates"], "gamma:2");
        assert!(matches!(parse_config("a\n"), Err(FormatError::Parse { line: 1, .. })));
    }

    #[test]
    fn statistics_text() {
        assert_eq!(statistics_csv(&[0.5], None), "site,U_value\n0,0.5\n");
        assert_eq!(
            statistics_csv(&[0.5], Some(&[1.5])),
            "site,U_value,hidden_lambda\n0,0.5,1.5\n"
        );
    }
}
