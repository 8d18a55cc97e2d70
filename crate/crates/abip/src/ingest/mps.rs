//! MPS reading and writing.
//!
//! The reader accepts both the classic fixed-column layout and
//! whitespace-delimited free format. Tokens never contain spaces (true
//! for the entire NETLIB corpus), so both layouts tokenize identically;
//! layout only matters for one ambiguity, the optional set-name field in
//! RHS/RANGES/BOUNDS. That is resolved positionally when the line
//! follows fixed-column discipline (a set name can only start in the
//! name field, before column 14) and by token parity otherwise.
//!
//! Constraint senses fold into equality form at parse time: a `G` row
//! `a'x >= b` becomes `a'x - s = b` with `s >= 0`, an `L` row gains `+s`,
//! and a RANGES entry tightens the slack's upper bound instead of adding
//! a second row. Slack columns are appended after all structural columns
//! in row order.

use std::collections::HashMap;

use super::IngestError;
use crate::lp_model::GeneralLp;
use crate::sparse::Csc;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Preamble,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Eq,
    Le,
    Ge,
}

#[derive(Clone, Copy)]
enum RowRef {
    Objective,
    /// an extra free (N) row beyond the first: declared but unused
    Ignored,
    Constraint(usize),
}

struct RowInfo {
    kind: RowKind,
    rhs: f64,
    range: Option<f64>,
}

fn tokens_with_offsets(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    out
}

fn parse_value(tok: &str, line: usize) -> Result<f64, IngestError> {
    tok.parse::<f64>()
        .map_err(|_| IngestError::at(line, format!("cannot parse number `{tok}`")))
}

/// True when the data line's payload starts at or beyond the third
/// fixed-format field, meaning the set-name field was left blank.
fn set_name_field_blank(first_offset: usize) -> bool {
    first_offset >= 14
}

/// Parses MPS text into an equality-form problem with variable bounds.
pub fn parse_mps(text: &str) -> Result<GeneralLp, IngestError> {
    let mut section = Section::Preamble;
    let mut maximize = false;

    let mut row_refs: HashMap<String, RowRef> = HashMap::new();
    let mut rows: Vec<RowInfo> = Vec::new();
    let mut objective_seen = false;

    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut cost: Vec<f64> = Vec::new();
    let mut lower: Vec<f64> = Vec::new();
    let mut upper: Vec<f64> = Vec::new();
    let mut explicit_lower: Vec<bool> = Vec::new();
    let mut trips: Vec<(usize, usize, f64)> = Vec::new();
    let mut offset = 0.0f64;

    for (line0, raw) in text.lines().enumerate() {
        let line = line0 + 1;
        if raw.starts_with('*') || raw.trim().is_empty() {
            continue;
        }
        let header = !raw.starts_with(' ') && !raw.starts_with('\t');
        let toks = tokens_with_offsets(raw);
        if header {
            let word = toks[0].1.to_ascii_uppercase();
            if word == "ENDATA" {
                break;
            }
            section = match word.as_str() {
                "NAME" => Section::Preamble,
                "OBJSENSE" => {
                    if let Some(&(_, sense)) = toks.get(1) {
                        maximize = parse_objsense(sense, line)?;
                        Section::Preamble
                    } else {
                        Section::ObjSense
                    }
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                other => {
                    return Err(IngestError::at(line, format!("unknown section `{other}`")))
                }
            };
            continue;
        }

        match section {
            Section::Preamble => {
                return Err(IngestError::at(line, "data before any section header"));
            }
            Section::ObjSense => {
                maximize = parse_objsense(toks[0].1, line)?;
            }
            Section::Rows => {
                if toks.len() != 2 {
                    return Err(IngestError::at(line, "expected `<type> <name>`"));
                }
                let name = toks[1].1;
                if row_refs.contains_key(name) {
                    return Err(IngestError::at(line, format!("duplicate row `{name}`")));
                }
                let kind = toks[0].1.to_ascii_uppercase();
                let r = match kind.as_str() {
                    "N" => {
                        if objective_seen {
                            log::warn!("line {line}: extra free row `{name}` ignored");
                            RowRef::Ignored
                        } else {
                            objective_seen = true;
                            RowRef::Objective
                        }
                    }
                    "E" | "L" | "G" => {
                        let kind = match kind.as_str() {
                            "E" => RowKind::Eq,
                            "L" => RowKind::Le,
                            _ => RowKind::Ge,
                        };
                        rows.push(RowInfo { kind, rhs: 0.0, range: None });
                        RowRef::Constraint(rows.len() - 1)
                    }
                    other => {
                        return Err(IngestError::at(line, format!("unknown row type `{other}`")))
                    }
                };
                row_refs.insert(name.to_string(), r);
            }
            Section::Columns => {
                if toks.iter().any(|&(_, t)| t.trim_matches('\'') == "MARKER") {
                    return Err(IngestError::at(
                        line,
                        "integer markers are not supported (continuous LP only)",
                    ));
                }
                if toks.len() < 3 || toks.len() % 2 == 0 {
                    return Err(IngestError::at(
                        line,
                        "expected `<column> (<row> <value>)+`",
                    ));
                }
                let col_name = toks[0].1;
                let c = *col_index.entry(col_name.to_string()).or_insert_with(|| {
                    cost.push(0.0);
                    lower.push(0.0);
                    upper.push(f64::INFINITY);
                    explicit_lower.push(false);
                    cost.len() - 1
                });
                for pair in toks[1..].chunks(2) {
                    let row_name = pair[0].1;
                    let val = parse_value(pair[1].1, line)?;
                    match row_refs.get(row_name) {
                        Some(RowRef::Objective) => cost[c] += val,
                        Some(RowRef::Ignored) => {}
                        Some(RowRef::Constraint(i)) => trips.push((*i, c, val)),
                        None => {
                            return Err(IngestError::at(
                                line,
                                format!("entry references undeclared row `{row_name}`"),
                            ))
                        }
                    }
                }
            }
            Section::Rhs | Section::Ranges => {
                let skip_set = if set_name_field_blank(toks[0].0) {
                    false
                } else {
                    toks.len() % 2 == 1
                };
                let data = if skip_set { &toks[1..] } else { &toks[..] };
                if data.is_empty() || data.len() % 2 != 0 {
                    return Err(IngestError::at(line, "expected `(<row> <value>)+`"));
                }
                for pair in data.chunks(2) {
                    let row_name = pair[0].1;
                    let val = parse_value(pair[1].1, line)?;
                    match row_refs.get(row_name) {
                        Some(RowRef::Objective) => {
                            if section == Section::Rhs {
                                // the conventional objective constant
                                offset = -val;
                            } else {
                                return Err(IngestError::at(
                                    line,
                                    "a range on the objective row has no meaning",
                                ));
                            }
                        }
                        Some(RowRef::Ignored) => {}
                        Some(RowRef::Constraint(i)) => {
                            if section == Section::Rhs {
                                rows[*i].rhs = val;
                            } else {
                                rows[*i].range = Some(val);
                            }
                        }
                        None => {
                            return Err(IngestError::at(
                                line,
                                format!("entry references undeclared row `{row_name}`"),
                            ))
                        }
                    }
                }
            }
            Section::Bounds => {
                let kind = toks[0].1.to_ascii_uppercase();
                let valued = matches!(kind.as_str(), "UP" | "LO" | "FX");
                if matches!(kind.as_str(), "BV" | "LI" | "UI") {
                    return Err(IngestError::at(
                        line,
                        format!("integer bound type `{kind}` is not supported"),
                    ));
                }
                if !valued && !matches!(kind.as_str(), "FR" | "MI" | "PL") {
                    return Err(IngestError::at(line, format!("unknown bound type `{kind}`")));
                }
                if toks.len() < 2 {
                    return Err(IngestError::at(line, "bound line is missing a column name"));
                }
                let has_set = if set_name_field_blank(toks[1].0) {
                    false
                } else if valued {
                    toks.len() >= 4
                } else {
                    toks.len() >= 3
                };
                let rest = if has_set { &toks[2..] } else { &toks[1..] };
                if rest.is_empty() {
                    return Err(IngestError::at(line, "bound line is missing a column name"));
                }
                let col_name = rest[0].1;
                let Some(&c) = col_index.get(col_name) else {
                    return Err(IngestError::at(
                        line,
                        format!("bound references undeclared column `{col_name}`"),
                    ));
                };
                let value = if valued {
                    let Some(v) = rest.get(1) else {
                        return Err(IngestError::at(
                            line,
                            format!("bound type `{kind}` requires a value"),
                        ));
                    };
                    Some(parse_value(v.1, line)?)
                } else {
                    None
                };
                match kind.as_str() {
                    "UP" => {
                        let v = value.unwrap();
                        upper[c] = v;
                        // classic convention: a negative upper bound with
                        // no stated lower bound frees the lower side
                        if v < 0.0 && !explicit_lower[c] {
                            lower[c] = f64::NEG_INFINITY;
                        }
                    }
                    "LO" => {
                        lower[c] = value.unwrap();
                        explicit_lower[c] = true;
                    }
                    "FX" => {
                        let v = value.unwrap();
                        lower[c] = v;
                        upper[c] = v;
                        explicit_lower[c] = true;
                    }
                    "FR" => {
                        lower[c] = f64::NEG_INFINITY;
                        upper[c] = f64::INFINITY;
                        explicit_lower[c] = true;
                    }
                    "MI" => {
                        lower[c] = f64::NEG_INFINITY;
                        explicit_lower[c] = true;
                    }
                    "PL" => {
                        upper[c] = f64::INFINITY;
                    }
                    _ => unreachable!(),
                }
            }
        }
    }

    if !objective_seen {
        return Err(IngestError::Invalid("no objective (N) row declared".into()));
    }
    if col_index.is_empty() {
        return Err(IngestError::Invalid("no columns declared".into()));
    }

    // fold senses and ranges into equality rows plus bounded slacks
    let n_structural = cost.len();
    let mut b = vec![0.0; rows.len()];
    for (i, row) in rows.iter().enumerate() {
        let (lo, hi) = row_interval(row);
        if lo == hi {
            b[i] = lo;
            continue;
        }
        let slack = cost.len();
        cost.push(0.0);
        explicit_lower.push(true);
        if hi.is_finite() {
            // a'x + s = hi, 0 <= s <= hi - lo
            trips.push((i, slack, 1.0));
            b[i] = hi;
            lower.push(0.0);
            upper.push(hi - lo); // infinite when lo = -inf
        } else {
            // a'x - s = lo, s >= 0
            trips.push((i, slack, -1.0));
            b[i] = lo;
            lower.push(0.0);
            upper.push(f64::INFINITY);
        }
    }
    let _ = n_structural;

    let a = Csc::from_triplets(rows.len(), cost.len(), &trips);
    let mut lp = GeneralLp::new(a, b, cost, lower, upper);
    lp.offset = offset;
    if maximize {
        for cj in lp.c.iter_mut() {
            *cj = -*cj;
        }
        lp.offset = -lp.offset;
        lp.maximize = true;
    }
    Ok(lp)
}

fn parse_objsense(tok: &str, line: usize) -> Result<bool, IngestError> {
    match tok.to_ascii_uppercase().as_str() {
        "MAX" | "MAXIMIZE" => Ok(true),
        "MIN" | "MINIMIZE" => Ok(false),
        other => Err(IngestError::at(line, format!("unknown objective sense `{other}`"))),
    }
}

/// The feasible interval `lo <= a'x <= hi` a row describes once its
/// sense, right-hand side, and optional range are combined.
fn row_interval(row: &RowInfo) -> (f64, f64) {
    let b = row.rhs;
    let (mut lo, mut hi) = match row.kind {
        RowKind::Eq => (b, b),
        RowKind::Le => (f64::NEG_INFINITY, b),
        RowKind::Ge => (b, f64::INFINITY),
    };
    if let Some(r) = row.range {
        match row.kind {
            RowKind::Eq => {
                if r >= 0.0 {
                    hi = b + r;
                } else {
                    lo = b + r;
                }
            }
            RowKind::Le => lo = b - r.abs(),
            RowKind::Ge => hi = b + r.abs(),
        }
    }
    (lo, hi)
}

/// Writes an equality-form problem as free-format MPS. Rows are named
/// `R0..`, columns `C0..`, the objective `OBJ`; shortest-round-trip
/// number formatting makes parse -> write -> parse the identity.
pub fn write_mps(lp: &GeneralLp, name: &str) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(out, "NAME {name}");
    // undo the internal minimize-storage for a faithful file
    let sign = if lp.maximize { -1.0 } else { 1.0 };
    if lp.maximize {
        let _ = writeln!(out, "OBJSENSE\n    MAX");
    }
    let _ = writeln!(out, "ROWS\n N  OBJ");
    for i in 0..lp.nrows() {
        let _ = writeln!(out, " E  R{i}");
    }
    let _ = writeln!(out, "COLUMNS");
    for j in 0..lp.ncols() {
        let cj = sign * lp.c[j];
        let (rows, vals) = lp.a.col(j);
        if cj != 0.0 || rows.is_empty() {
            // a zero cost entry keeps otherwise-empty columns declared
            let _ = writeln!(out, "    C{j}  OBJ  {cj}");
        }
        for (i, v) in rows.iter().zip(vals) {
            let _ = writeln!(out, "    C{j}  R{i}  {v}");
        }
    }
    let _ = writeln!(out, "RHS");
    let obj_rhs = -sign * lp.offset;
    if obj_rhs != 0.0 {
        let _ = writeln!(out, "    RHS  OBJ  {obj_rhs}");
    }
    for (i, bi) in lp.b.iter().enumerate() {
        if *bi != 0.0 {
            let _ = writeln!(out, "    RHS  R{i}  {bi}");
        }
    }
    let _ = writeln!(out, "BOUNDS");
    for j in 0..lp.ncols() {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        if lo == 0.0 && hi == f64::INFINITY {
            continue;
        }
        if lo == hi {
            let _ = writeln!(out, " FX BND  C{j}  {lo}");
            continue;
        }
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            let _ = writeln!(out, " FR BND  C{j}");
            continue;
        }
        if lo == f64::NEG_INFINITY {
            let _ = writeln!(out, " MI BND  C{j}");
        } else if lo != 0.0 {
            let _ = writeln!(out, " LO BND  C{j}  {lo}");
        }
        if hi != f64::INFINITY {
            let _ = writeln!(out, " UP BND  C{j}  {hi}");
        }
    }
    out.push_str("ENDATA\n");
    out
}
