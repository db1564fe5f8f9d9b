//! Graph and input-output matrix ingestion, solution and sweep output.
//!
//! All files are UTF-8 CSV. Floats are written with 17 significant digits
//! (shortest `%g`-style form) so that reading them back is exact.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::waterfill::{ProtectionSolution, Regime, SweepRow};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: node index {index} out of range for {n} nodes")]
    IndexOutOfRange { line: u64, index: i64, n: usize },
    #[error("line {line}: duplicate edge {src} -> {dst}")]
    DuplicateEdge { line: u64, src: usize, dst: usize },
    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged { line: u64, expected: usize, found: usize },
    #[error("entry ({row}, {col}) = {value} is negative or not finite")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("row {row} sums to zero and cannot be normalized")]
    ZeroRow { row: usize },
    #[error("input is empty")]
    Empty,
    #[error("sweep budgets must be strictly increasing (row {row})")]
    NonMonotoneSweep { row: usize },
    #[error("expected {expected} labels, found {found}")]
    LabelCount { expected: usize, found: usize },
    #[error("expected {expected} entries, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One weighted edge `src -> dst`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

/// A validated edge list. Undirected graphs store each edge once.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub n: usize,
    pub edges: Vec<Edge>,
    pub labels: Option<Vec<String>>,
    pub directed: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EdgeListOptions {
    pub directed: bool,
    pub one_based: bool,
    /// Node count; defaults to the largest index plus one.
    pub n: Option<usize>,
}

impl GraphInput {
    /// Dense weighted adjacency. Undirected edges are mirrored.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            a[(e.src, e.dst)] = e.weight;
            if !self.directed {
                a[(e.dst, e.src)] = e.weight;
            }
        }
        a
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, IoError> {
        if labels.len() != self.n {
            return Err(IoError::LabelCount { expected: self.n, found: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input)
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_f64(field: &str, line: u64) -> Result<f64, IoError> {
    field.parse::<f64>().map_err(|e| IoError::Parse {
        line,
        message: format!("{field:?}: {e}"),
    })
}

/// Reads `src,dst[,weight]` records (optional `src,dst,weight` header,
/// weight defaults to 1).
pub fn read_edge_list<R: Read>(input: R, opts: EdgeListOptions) -> Result<GraphInput, IoError> {
    let mut raw: Vec<(u64, i64, i64, f64)> = Vec::new();
    for (k, record) in reader(input).records().enumerate() {
        let record = record?;
        let line = line_of(&record);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if k == 0 && record.get(0) == Some("src") {
            let header: Vec<&str> = record.iter().collect();
            if header != ["src", "dst"] && header != ["src", "dst", "weight"] {
                return Err(IoError::Parse { line, message: format!("unexpected header {header:?}") });
            }
            continue;
        }
        if !(2..=3).contains(&record.len()) {
            return Err(IoError::Ragged { line, expected: 3, found: record.len() });
        }
        let index = |s: &str| {
            s.parse::<i64>().map_err(|e| IoError::Parse { line, message: format!("{s:?}: {e}") })
        };
        let offset = i64::from(opts.one_based);
        let src = index(&record[0])? - offset;
        let dst = index(&record[1])? - offset;
        let weight = match record.get(2) {
            Some(w) if !w.is_empty() => parse_f64(w, line)?,
            _ => 1.0,
        };
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(IoError::Parse { line, message: format!("invalid weight {weight}") });
        }
        raw.push((line, src, dst, weight));
    }

    let n = match opts.n {
        Some(n) => n,
        None => raw.iter().map(|r| r.1.max(r.2) + 1).max().unwrap_or(0).max(0) as usize,
    };
    let mut seen = HashSet::new();
    let mut edges = Vec::with_capacity(raw.len());
    for (line, src, dst, weight) in raw {
        for index in [src, dst] {
            if index < 0 || index as usize >= n {
                return Err(IoError::IndexOutOfRange { line, index: index + i64::from(opts.one_based), n });
            }
        }
        let (src, dst) = (src as usize, dst as usize);
        let key = if opts.directed { (src, dst) } else { (src.min(dst), src.max(dst)) };
        if !seen.insert(key) {
            return Err(IoError::DuplicateEdge { line, src, dst });
        }
        edges.push(Edge { src, dst, weight });
    }
    if n == 0 {
        return Err(IoError::Empty);
    }
    Ok(GraphInput { n, edges, labels: None, directed: opts.directed })
}

/// Reads a headerless `n x n` grid of nonnegative reals, unnormalized.
pub fn read_io_matrix<R: Read>(input: R) -> Result<DMatrix<f64>, IoError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader(input).records() {
        let record = record?;
        let line = line_of(&record);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if let Some(first) = rows.first() {
            if record.len() != first.len() {
                return Err(IoError::Ragged { line, expected: first.len(), found: record.len() });
            }
        }
        let row = record.iter().map(|f| parse_f64(f, line)).collect::<Result<Vec<_>, _>>()?;
        for (col, &value) in row.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(IoError::NegativeEntry { row: rows.len(), col, value });
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(IoError::Empty);
    }
    if rows[0].len() != n {
        return Err(IoError::NotSquare { rows: n, cols: rows[0].len() });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// `P_ij = A_ij / Σ_k A_ik`.
pub fn normalize_rows(a: &DMatrix<f64>) -> Result<DMatrix<f64>, IoError> {
    let mut p = a.clone();
    for (row, mut r) in p.row_iter_mut().enumerate() {
        if let Some((col, &value)) = r.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(IoError::NegativeEntry { row, col, value });
        }
        let sum = r.sum();
        if sum <= 0.0 {
            return Err(IoError::ZeroRow { row });
        }
        if sum != 1.0 {
            r.unscale_mut(sum);
        }
    }
    Ok(p)
}

/// Reads reals separated by commas and/or newlines (vectors such as `ρ`).
pub fn read_vector<R: Read>(input: R) -> Result<Vec<f64>, IoError> {
    let mut out = Vec::new();
    for record in reader(input).records() {
        let record = record?;
        let line = line_of(&record);
        for field in record.iter().filter(|f| !f.is_empty()) {
            out.push(parse_f64(field, line)?);
        }
    }
    if out.is_empty() {
        return Err(IoError::Empty);
    }
    Ok(out)
}

/// One label per line.
pub fn read_labels<R: Read>(mut input: R) -> Result<Vec<String>, IoError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    Ok(text.lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect())
}

/// Nodes with zero centrality, split off before solving.
///
/// Such nodes need no protection (`q_i = 1`), which still costs one unit of
/// squared budget each.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroInfluenceFilter {
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
    pub n: usize,
}

impl ZeroInfluenceFilter {
    pub fn new(values: &[f64]) -> Self {
        let (kept, dropped) = (0..values.len()).partition(|&i| values[i] > 0.0);
        Self { kept, dropped, n: values.len() }
    }

    pub fn kept_values(&self, values: &[f64]) -> Vec<f64> {
        self.kept.iter().map(|&i| values[i]).collect()
    }

    /// Budget left for the kept nodes: `sqrt(C² - #dropped)`.
    pub fn reduced_budget(&self, budget: f64) -> f64 {
        (budget * budget - self.dropped.len() as f64).max(0.0).sqrt()
    }

    /// Protection over all nodes, with ones on the dropped nodes.
    pub fn expand(&self, q_kept: &[f64]) -> Vec<f64> {
        let mut q = vec![1.0; self.n];
        for (&i, &v) in self.kept.iter().zip(q_kept) {
            q[i] = v;
        }
        q
    }
}

/// Formats like C's `%.17g`.
pub fn format_g17(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let trim = |s: String| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-5..17).contains(&exp) {
        let body = if exp >= 0 {
            let split = exp as usize + 1;
            format!("{}.{}", &digits[..split], &digits[split..])
        } else {
            format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
        };
        format!("{sign}{}", trim(body))
    } else {
        let body = trim(format!("{}.{}", &digits[..1], &digits[1..]));
        format!("{sign}{body}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

fn node_labels(n: usize, labels: Option<&[String]>) -> Result<Vec<String>, IoError> {
    match labels {
        Some(l) if l.len() != n => Err(IoError::LabelCount { expected: n, found: l.len() }),
        Some(l) => Ok(l.to_vec()),
        None => Ok((0..n).map(|i| i.to_string()).collect()),
    }
}

/// Serializes a solution with per-node centralities and protections, both
/// in node order. Missing labels default to node indices.
pub fn write_solution<W: Write>(
    mut out: W,
    sol: &ProtectionSolution,
    centrality: &[f64],
    labels: Option<&[String]>,
    format: OutputFormat,
) -> Result<(), IoError> {
    let n = centrality.len();
    if sol.q_star.len() != n {
        return Err(IoError::DimensionMismatch { expected: n, found: sol.q_star.len() });
    }
    let labels = node_labels(n, labels)?;
    match format {
        OutputFormat::Json => {
            let mut s = String::new();
            s.push_str("{\n");
            let _ = writeln!(s, "  \"budget\": {},", format_g17(sol.budget));
            let _ = writeln!(s, "  \"lambda_star\": {},", format_g17(sol.lambda_star));
            let _ = writeln!(s, "  \"k_active\": {},", sol.k_active);
            let _ = writeln!(s, "  \"regime\": {},", json_string(sol.regime.as_str()));
            let _ = writeln!(
                s,
                "  \"thresholds\": {{\"low\": {}, \"high\": {}}},",
                format_g17(sol.thresholds.low),
                format_g17(sol.thresholds.high)
            );
            s.push_str("  \"per_node\": [\n");
            for i in 0..n {
                let _ = write!(
                    s,
                    "    {{\"index\": {}, \"label\": {}, \"centrality\": {}, \"q\": {}}}",
                    i,
                    json_string(&labels[i]),
                    format_g17(centrality[i]),
                    format_g17(sol.q_star[i])
                );
                s.push_str(if i + 1 < n { ",\n" } else { "\n" });
            }
            s.push_str("  ]\n}\n");
            out.write_all(s.as_bytes())?;
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["index", "label", "centrality", "q"])?;
            for i in 0..n {
                w.write_record([
                    i.to_string(),
                    labels[i].clone(),
                    format_g17(centrality[i]),
                    format_g17(sol.q_star[i]),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Header of the sweep table.
pub const SWEEP_HEADER: [&str; 6] = ["C", "lambda_opt", "lambda_diff", "ratio", "k_active", "regime"];

fn check_sweep(rows: &[SweepRow]) -> Result<(), IoError> {
    if rows.is_empty() {
        return Err(IoError::Empty);
    }
    if let Some(k) = rows.windows(2).position(|w| !(w[1].budget > w[0].budget)) {
        return Err(IoError::NonMonotoneSweep { row: k + 1 });
    }
    Ok(())
}

pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<(), IoError> {
    check_sweep(rows)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            format_g17(r.budget),
            format_g17(r.lambda_opt),
            format_g17(r.lambda_diff),
            format_g17(r.ratio()),
            r.k_active.to_string(),
            r.regime.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-node protection as a function of the budget: `C,<label_0>,...`.
pub fn write_trajectories<W: Write>(
    out: W,
    rows: &[SweepRow],
    labels: Option<&[String]>,
) -> Result<(), IoError> {
    check_sweep(rows)?;
    let n = rows[0].q_star.len();
    let labels = node_labels(n, labels)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["C".to_string()];
    header.extend(labels.iter().map(|l| format!("q_{l}")));
    w.write_record(&header)?;
    for r in rows {
        let mut record = vec![format_g17(r.budget)];
        record.extend(r.q_star.iter().map(|&q| format_g17(q)));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// A row read back from a sweep table.
#[derive(Debug, Clone, PartialEq, serde::Deserialize)]
pub struct SweepRecord {
    #[serde(rename = "C")]
    pub budget: f64,
    pub lambda_opt: f64,
    pub lambda_diff: f64,
    pub ratio: f64,
    pub k_active: usize,
    pub regime: String,
}

impl SweepRecord {
    pub fn regime(&self) -> Option<Regime> {
        self.regime.parse().ok()
    }
}

pub fn read_sweep<R: Read>(input: R) -> Result<Vec<SweepRecord>, IoError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != SWEEP_HEADER {
        return Err(IoError::Parse { line: 1, message: format!("unexpected header {header:?}") });
    }
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// A row read back from a CSV solution.
#[derive(Debug, Clone, PartialEq, serde::Deserialize)]
pub struct SolutionRecord {
    pub index: usize,
    pub label: String,
    pub centrality: f64,
    pub q: f64,
}

pub fn read_solution_csv<R: Read>(input: R) -> Result<Vec<SolutionRecord>, IoError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| IoError::Io(e.error))?;
    Ok(())
}
