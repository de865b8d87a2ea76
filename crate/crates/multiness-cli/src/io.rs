//! Text-file formats: the multiplex edge list, dense matrix files, latent
//! position tables, and the JSON run report.
//!
//! # Multiplex file
//!
//! ```text
//! MULTINESS v1
//! n 50
//! m 3
//! selfloops 0
//! k i j w
//! ...
//! ```
//!
//! Layer and node indices are 1-based. Each data line carries one
//! undirected pair: `w` is a decimal weight, or `NA` to mark the pair
//! unobserved in that layer. Pairs absent from the file are weight 0 and
//! observed, so the format is sparse-friendly. On write each pair appears
//! once with `i < j` (`i = j` only when self-loops are on); on read either
//! order is accepted, and repeating a pair is an error when the weights
//! disagree. Blank lines are ignored.
//!
//! # Dense matrix file
//!
//! The node count on the first line, then `n` rows of `n` values.
//!
//! # Latent position table
//!
//! A `# signature p=<p> q=<q>` header, then one comma-separated row of
//! coordinates per node — assortative columns first, then disassortative,
//! each ordered by decreasing eigenvalue magnitude.
//!
//! All floating-point output uses 17 significant digits, which
//! round-trips `f64` exactly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use multiness::linalg::DEFAULT_RANK_TOL;
use multiness::{LatentDecomposition, LowRank, MultiplexNetwork, ObservationMask, SymMatrix};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Formats one float at full round-trip precision.
pub(crate) fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))
}

fn write_string(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content)
        .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Multiplex edge-list format
// ---------------------------------------------------------------------------

/// Parses a multiplex network file. See the module docs for the format.
pub fn read_multiplex(path: &Path) -> Result<MultiplexNetwork, CliError> {
    let text = read_to_string(path)?;
    parse_multiplex(&text)
        .map_err(|msg| CliError::Validation(format!("{}: {msg}", path.display())))
}

fn parse_multiplex(text: &str) -> Result<MultiplexNetwork, String> {
    let mut lines = text.lines().enumerate();
    let mut header = |what: &str| -> Result<(usize, &str), String> {
        for (idx, raw) in lines.by_ref() {
            if !raw.trim().is_empty() {
                return Ok((idx + 1, raw.trim()));
            }
        }
        Err(format!("missing {what} line"))
    };

    let (no, magic) = header("'MULTINESS v1' header")?;
    if magic != "MULTINESS v1" {
        return Err(format!("line {no}: expected header 'MULTINESS v1'"));
    }
    let (no, nline) = header("'n <count>'")?;
    let n = parse_header_count(nline, "n", no)?;
    if n < 2 {
        return Err(format!("line {no}: need at least 2 nodes, got {n}"));
    }
    let (no, mline) = header("'m <count>'")?;
    let m = parse_header_count(mline, "m", no)?;
    if m < 1 {
        return Err(format!("line {no}: need at least 1 layer, got {m}"));
    }
    let (no, sline) = header("'selfloops <0|1>'")?;
    let self_loops = match sline.split_whitespace().collect::<Vec<_>>()[..] {
        ["selfloops", "0"] => false,
        ["selfloops", "1"] => true,
        _ => return Err(format!("line {no}: expected 'selfloops <0|1>', got '{sline}'")),
    };

    // First weight seen per (layer, pair), with its line number; `None`
    // weight means NA. Bitwise weight comparison detects conflicts.
    let mut seen: HashMap<(usize, usize, usize), (usize, Option<u64>)> =
        HashMap::with_capacity(256);
    for (idx, raw) in lines {
        let no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(format!(
                "line {no}: expected 'k i j w', got {} fields",
                fields.len()
            ));
        }
        let k = parse_index(fields[0], "layer", m, no)?;
        let i = parse_index(fields[1], "node", n, no)?;
        let j = parse_index(fields[2], "node", n, no)?;
        if i == j && !self_loops {
            return Err(format!(
                "line {no}: self-loop ({i},{i}) but the header says selfloops 0"
            ));
        }
        let w: Option<f64> = if fields[3] == "NA" {
            None
        } else {
            Some(fields[3].parse().map_err(|_| {
                format!(
                    "line {no}: weight '{}' is neither a number nor NA",
                    fields[3]
                )
            })?)
        };
        if let Some(w) = w {
            if !w.is_finite() {
                return Err(format!("line {no}: weight {w} is not finite"));
            }
        }
        let key = (k - 1, i.min(j) - 1, i.max(j) - 1);
        let bits = w.map(f64::to_bits);
        if let Some(&(first_no, first_bits)) = seen.get(&key) {
            if first_bits != bits {
                return Err(format!(
                    "lines {first_no} and {no}: conflicting weights for layer {k} pair ({},{}): {} vs {}",
                    i.min(j),
                    i.max(j),
                    describe_weight(first_bits),
                    describe_weight(bits)
                ));
            }
            continue;
        }
        seen.insert(key, (no, bits));
    }

    let mut layers: Vec<SymMatrix> = (0..m).map(|_| SymMatrix::zeros(n)).collect();
    let mut mask = ObservationMask::full(n, m, self_loops);
    for (&(k, i, j), &(_, bits)) in &seen {
        match bits {
            Some(b) => layers[k].set(i, j, f64::from_bits(b)),
            None => mask.hide(k, i, j),
        }
    }
    MultiplexNetwork::with_mask(layers, mask, self_loops).map_err(|e| e.to_string())
}

fn describe_weight(bits: Option<u64>) -> String {
    match bits {
        Some(b) => fmt_float(f64::from_bits(b)),
        None => "NA".into(),
    }
}

fn parse_header_count(line: &str, key: &str, no: usize) -> Result<usize, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() == 2 && fields[0] == key {
        if let Ok(v) = fields[1].parse() {
            return Ok(v);
        }
    }
    Err(format!("line {no}: expected '{key} <count>', got '{line}'"))
}

fn parse_index(tok: &str, what: &str, limit: usize, no: usize) -> Result<usize, String> {
    let v: usize = tok
        .parse()
        .map_err(|_| format!("line {no}: {what} index '{tok}' is not an integer"))?;
    if v < 1 || v > limit {
        return Err(format!("line {no}: {what} {v} out of range 1..={limit}"));
    }
    Ok(v)
}

/// Writes a multiplex network file. Observed zero weights are omitted
/// (they are the default on read); unobserved pairs are written as `NA`.
pub fn write_multiplex(path: &Path, net: &MultiplexNetwork) -> Result<(), CliError> {
    let n = net.n();
    let m = net.m();
    let mask = net.mask();
    let mut out = String::with_capacity(64 + 16 * n * n * m / 2);
    let _ = writeln!(out, "MULTINESS v1");
    let _ = writeln!(out, "n {n}");
    let _ = writeln!(out, "m {m}");
    let _ = writeln!(out, "selfloops {}", if net.self_loops() { 1 } else { 0 });
    for k in 0..m {
        let a = net.layer(k);
        for i in 0..n {
            let j0 = if net.self_loops() { i } else { i + 1 };
            for j in j0..n {
                if !mask.is_observed(k, i, j) {
                    let _ = writeln!(out, "{} {} {} NA", k + 1, i + 1, j + 1);
                    continue;
                }
                let w = a[(i, j)];
                // Positive zero is the implicit default; everything else
                // (including -0.0, to keep round-trips bitwise) is spelled
                // out.
                if w != 0.0 || w.is_sign_negative() {
                    let _ = writeln!(out, "{} {} {} {}", k + 1, i + 1, j + 1, fmt_float(w));
                }
            }
        }
    }
    write_string(path, &out)
}

// ---------------------------------------------------------------------------
// Dense matrix format
// ---------------------------------------------------------------------------

/// Reads a dense symmetric matrix file (`n`, then `n` rows of `n` values;
/// tiny asymmetries are averaged away on ingestion).
pub fn read_matrix(path: &Path) -> Result<SymMatrix, CliError> {
    let text = read_to_string(path)?;
    let mut toks = text.split_whitespace();
    let bad = |msg: String| CliError::Validation(format!("{}: {msg}", path.display()));
    let n: usize = toks
        .next()
        .ok_or_else(|| bad("empty matrix file".into()))?
        .parse()
        .map_err(|_| bad("first token must be the node count".into()))?;
    let mut vals = Vec::with_capacity(n * n);
    for tok in toks.by_ref() {
        let v: f64 = tok
            .parse()
            .map_err(|_| bad(format!("'{tok}' is not a number")))?;
        vals.push(v);
        if vals.len() > n * n {
            break;
        }
    }
    if vals.len() != n * n {
        return Err(bad(format!(
            "expected {} entries after the size, found {}",
            n * n,
            vals.len()
        )));
    }
    let raw = nalgebra_matrix(n, &vals);
    SymMatrix::from_dense(raw).map_err(|e| bad(e.to_string()))
}

/// Builds a dense row-major matrix without naming the backing linear
/// algebra types in this crate's dependency list.
fn nalgebra_matrix(n: usize, row_major: &[f64]) -> multiness::nalgebra::DMatrix<f64> {
    multiness::nalgebra::DMatrix::from_row_slice(n, n, row_major)
}

/// Writes a dense symmetric matrix file.
pub fn write_matrix(path: &Path, m: &SymMatrix) -> Result<(), CliError> {
    let n = m.n();
    let mut out = String::with_capacity(8 + 25 * n * n);
    let _ = writeln!(out, "{n}");
    for i in 0..n {
        for j in 0..n {
            if j > 0 {
                out.push(' ');
            }
            out.push_str(&fmt_float(m[(i, j)]));
        }
        out.push('\n');
    }
    write_string(path, &out)
}

// ---------------------------------------------------------------------------
// Latent position tables
// ---------------------------------------------------------------------------

/// Writes the latent positions of one low-rank component: eigenvectors
/// scaled by `|eigenvalue|^{1/2}`, assortative columns first.
pub fn write_positions(path: &Path, low: &LowRank) -> Result<(), CliError> {
    let sig = low.signature();
    let eig = low.eigen();
    let mut order: Vec<usize> = (0..eig.dim()).filter(|&t| eig.values()[t] > 0.0).collect();
    order.extend((0..eig.dim()).filter(|&t| eig.values()[t] < 0.0));
    let mut out = String::new();
    let _ = writeln!(out, "# signature p={} q={}", sig.p, sig.q);
    for i in 0..low.n() {
        let row: Vec<String> = order
            .iter()
            .map(|&t| fmt_float(eig.values()[t].abs().sqrt() * eig.vectors()[(i, t)]))
            .collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    write_string(path, &out)
}

// ---------------------------------------------------------------------------
// Run report
// ---------------------------------------------------------------------------

/// Estimated ranks: the common component and one entry per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RanksReport {
    pub d1: usize,
    pub d2: Vec<usize>,
}

/// Crate versions stamped into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Versions {
    pub format: String,
    pub multiness: String,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            format: "v1".into(),
            multiness: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

/// Wall-clock timings in seconds; omitted under `--no-timing` so that
/// fixed-seed runs produce byte-identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timings {
    pub fit_seconds: f64,
    pub total_seconds: f64,
}

/// The machine-readable summary of an estimation run. Field order is the
/// serialization order and is part of the format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    /// `"gaussian"` or `"bernoulli"`.
    pub family: String,
    /// Penalty level on the common component.
    pub lambda: f64,
    /// Per-layer penalty multipliers.
    pub alphas: Vec<f64>,
    /// The sharpness that generated `lambda`; `null` when the level was
    /// given explicitly.
    pub delta: Option<f64>,
    pub ranks: RanksReport,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub seed: u64,
    pub versions: Versions,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings: Option<Timings>,
}

/// Pretty JSON formatter (two-space indent) whose floats carry the same
/// 17-significant-digit form as every other text output.
struct JsonFormatter {
    depth: usize,
    has_value: bool,
}

impl JsonFormatter {
    fn new() -> Self {
        Self { depth: 0, has_value: false }
    }

    fn newline_indent<W: ?Sized + std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(b"\n")?;
        for _ in 0..self.depth {
            w.write_all(b"  ")?;
        }
        Ok(())
    }
}

impl serde_json::ser::Formatter for JsonFormatter {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.depth += 1;
        self.has_value = false;
        w.write_all(b"[")
    }

    fn end_array<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.depth -= 1;
        if self.has_value {
            self.newline_indent(w)?;
        }
        w.write_all(b"]")
    }

    fn begin_array_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        if !first {
            w.write_all(b",")?;
        }
        self.newline_indent(w)
    }

    fn end_array_value<W: ?Sized + std::io::Write>(&mut self, _w: &mut W) -> std::io::Result<()> {
        self.has_value = true;
        Ok(())
    }

    fn begin_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.depth += 1;
        self.has_value = false;
        w.write_all(b"{")
    }

    fn end_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.depth -= 1;
        if self.has_value {
            self.newline_indent(w)?;
        }
        w.write_all(b"}")
    }

    fn begin_object_key<W: ?Sized + std::io::Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        if !first {
            w.write_all(b",")?;
        }
        self.newline_indent(w)
    }

    fn begin_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        w.write_all(b": ")
    }

    fn end_object_value<W: ?Sized + std::io::Write>(&mut self, _w: &mut W) -> std::io::Result<()> {
        self.has_value = true;
        Ok(())
    }
}

/// Serializes a report with a trailing newline.
pub fn report_to_json(report: &RunReport) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, JsonFormatter::new());
    report
        .serialize(&mut ser)
        .expect("report serialization cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("report JSON is UTF-8")
}

/// Reads and strictly validates a report file: unknown keys are errors.
pub fn read_report(path: &Path) -> Result<RunReport, CliError> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Whole-decomposition persistence
// ---------------------------------------------------------------------------

/// Writes `F.mat`, `G_1.mat…G_m.mat`, `V.csv`, `U_1.csv…U_m.csv`, and
/// `report.json` into `dir` (created if absent).
pub fn write_decomposition(
    dir: &Path,
    dec: &LatentDecomposition,
    report: &RunReport,
) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", dir.display())))?;
    write_matrix(&dir.join("F.mat"), dec.common().dense())?;
    write_positions(&dir.join("V.csv"), dec.common())?;
    for (k, g) in dec.individuals().iter().enumerate() {
        write_matrix(&dir.join(format!("G_{}.mat", k + 1)), g.dense())?;
        write_positions(&dir.join(format!("U_{}.csv", k + 1)), g)?;
    }
    write_string(&dir.join("report.json"), &report_to_json(report))
}

/// Reads `F.mat` and the contiguous `G_1.mat…G_m.mat` series back into a
/// decomposition (ranks re-read at the default reporting tolerance).
pub fn read_decomposition(dir: &Path) -> Result<LatentDecomposition, CliError> {
    let f = read_matrix(&dir.join("F.mat"))?;
    let mut gs = Vec::new();
    loop {
        let path = dir.join(format!("G_{}.mat", gs.len() + 1));
        if !path.exists() {
            break;
        }
        gs.push(read_matrix(&path)?);
    }
    if gs.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: no G_1.mat found next to F.mat",
            dir.display()
        )));
    }
    let common = LowRank::from_dense(&f, DEFAULT_RANK_TOL);
    let individual = gs
        .iter()
        .map(|g| LowRank::from_dense(g, DEFAULT_RANK_TOL))
        .collect();
    LatentDecomposition::new(common, individual).map_err(CliError::from)
}
