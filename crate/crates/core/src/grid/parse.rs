use std::collections::{BTreeMap, HashSet};

use log::warn;
use num_complex::Complex64;
use thiserror::Error;

use super::{Branch, Bus, BusId, BusKind, GenCost, Generator, Load, PowerNetwork};

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("case text is empty")]
    Empty,
    #[error("line {line}: {message}")]
    MalformedRow { line: usize, message: String },
    #[error("missing required field mpc.{0}")]
    Missing(&'static str),
    #[error("baseMVA must be positive and finite, got {0}")]
    InvalidBaseMva(f64),
    #[error("line {line}: unsupported {what}")]
    Unsupported { line: usize, what: String },
    #[error("matrix mpc.{0} is never closed")]
    Unterminated(String),
}

const BUS_COLS: usize = 13;
const GEN_COLS: usize = 10;
const BRANCH_COLS: usize = 11;

/// A numeric row together with the line it started on.
#[derive(Debug, Clone)]
struct Row {
    line: usize,
    values: Vec<f64>,
}

#[derive(Debug, Default)]
struct RawCase {
    name: Option<String>,
    scalars: BTreeMap<String, (usize, String)>,
    matrices: BTreeMap<String, Vec<Row>>,
}

enum State {
    Idle,
    Matrix { name: String, rows: Vec<Row>, current: Option<Row> },
    Cell,
}

/// Parses MATPOWER case text into a per-unit [`PowerNetwork`].
pub fn parse_case(text: &str) -> Result<PowerNetwork, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let raw = tokenize(text)?;
    build(raw)
}

fn strip_comment(line: &str) -> &str {
    let mut in_str = false;
    for (i, c) in line.char_indices() {
        match c {
            '\'' | '"' => in_str = !in_str,
            '%' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_number(tok: &str) -> Option<f64> {
    match tok {
        "Inf" | "inf" | "+Inf" => Some(f64::INFINITY),
        "-Inf" | "-inf" => Some(f64::NEG_INFINITY),
        _ => tok.parse::<f64>().ok(),
    }
}

fn tokenize(text: &str) -> Result<RawCase, ParseError> {
    let mut raw = RawCase::default();
    let mut state = State::Idle;

    for (idx, full_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(full_line);
        let mut rest: &str = line;

        loop {
            match &mut state {
                State::Idle => {
                    let t = rest.trim();
                    if t.is_empty() {
                        break;
                    }
                    if let Some(sig) = t.strip_prefix("function") {
                        if let Some((_, name)) = sig.split_once('=') {
                            raw.name = Some(name.trim().trim_end_matches(';').to_string());
                        }
                        break;
                    }
                    let Some(assign) = t.strip_prefix("mpc.") else { break };
                    let Some((field, value)) = assign.split_once('=') else {
                        return Err(ParseError::MalformedRow {
                            line: line_no,
                            message: format!("expected assignment in `{t}`"),
                        });
                    };
                    let field = field.trim().to_string();
                    let value = value.trim_start();
                    if let Some(body) = value.strip_prefix('[') {
                        state = State::Matrix { name: field, rows: Vec::new(), current: None };
                        rest = body;
                        continue;
                    } else if value.starts_with('{') {
                        if value.contains('}') {
                            break;
                        }
                        state = State::Cell;
                        break;
                    } else {
                        let v = value.trim_end().trim_end_matches(';').trim().to_string();
                        raw.scalars.insert(field, (line_no, v));
                        break;
                    }
                }
                State::Cell => {
                    if rest.contains('}') {
                        state = State::Idle;
                    }
                    break;
                }
                State::Matrix { name, rows, current } => {
                    let mut closed_at = None;
                    let mut token = String::new();
                    let flush_token = |token: &mut String, current: &mut Option<Row>| {
                        if token.is_empty() {
                            return Ok(());
                        }
                        let v = parse_number(token).ok_or_else(|| ParseError::MalformedRow {
                            line: line_no,
                            message: format!("invalid number `{token}` in mpc.{name}"),
                        })?;
                        current
                            .get_or_insert_with(|| Row { line: line_no, values: Vec::new() })
                            .values
                            .push(v);
                        token.clear();
                        Ok(())
                    };
                    for (i, c) in rest.char_indices() {
                        match c {
                            ' ' | '\t' | ',' | '\r' => flush_token(&mut token, current)?,
                            ';' => {
                                flush_token(&mut token, current)?;
                                if let Some(r) = current.take() {
                                    rows.push(r);
                                }
                            }
                            ']' => {
                                flush_token(&mut token, current)?;
                                closed_at = Some(i);
                                break;
                            }
                            _ => token.push(c),
                        }
                    }
                    if closed_at.is_none() {
                        flush_token(&mut token, current)?;
                    }
                    // a newline also terminates a row
                    if let Some(r) = current.take() {
                        rows.push(r);
                    }
                    if closed_at.is_some() {
                        let State::Matrix { name, rows, .. } = std::mem::replace(&mut state, State::Idle)
                        else {
                            unreachable!()
                        };
                        raw.matrices.insert(name, rows);
                    }
                    break;
                }
            }
        }
    }
    if let State::Matrix { name, .. } = state {
        return Err(ParseError::Unterminated(name));
    }
    Ok(raw)
}

fn check_width(rows: &[Row], min: usize, what: &str) -> Result<(), ParseError> {
    for r in rows {
        if r.values.len() < min {
            return Err(ParseError::MalformedRow {
                line: r.line,
                message: format!("{what} row has {} columns, expected at least {min}", r.values.len()),
            });
        }
    }
    Ok(())
}

fn bus_id(v: f64, line: usize) -> Result<BusId, ParseError> {
    if v.fract() != 0.0 || v < 1.0 || v > u32::MAX as f64 {
        return Err(ParseError::MalformedRow { line, message: format!("invalid bus number {v}") });
    }
    Ok(BusId(v as u32))
}

fn angle_limit(deg: f64, is_max: bool) -> Option<f64> {
    // zero or |angle| >= 360 degrees means unconstrained
    let unbounded = deg == 0.0 || (is_max && deg >= 360.0) || (!is_max && deg <= -360.0);
    (!unbounded).then(|| deg.to_radians())
}

fn build(raw: RawCase) -> Result<PowerNetwork, ParseError> {
    let (base_line, base_text) = raw.scalars.get("baseMVA").ok_or(ParseError::Missing("baseMVA"))?;
    let base_mva = parse_number(base_text).ok_or_else(|| ParseError::MalformedRow {
        line: *base_line,
        message: format!("invalid baseMVA `{base_text}`"),
    })?;
    if !(base_mva.is_finite() && base_mva > 0.0) {
        return Err(ParseError::InvalidBaseMva(base_mva));
    }

    let bus_rows = raw.matrices.get("bus").ok_or(ParseError::Missing("bus"))?;
    let gen_rows = raw.matrices.get("gen").ok_or(ParseError::Missing("gen"))?;
    let branch_rows = raw.matrices.get("branch").ok_or(ParseError::Missing("branch"))?;
    let cost_rows = raw.matrices.get("gencost").ok_or(ParseError::Missing("gencost"))?;
    check_width(bus_rows, BUS_COLS, "bus")?;
    check_width(gen_rows, GEN_COLS, "gen")?;
    check_width(branch_rows, BRANCH_COLS, "branch")?;
    check_width(cost_rows, 4, "gencost")?;

    let mut buses = Vec::with_capacity(bus_rows.len());
    let mut loads = Vec::with_capacity(bus_rows.len());
    let mut isolated = HashSet::new();
    let mut references = Vec::new();
    for r in bus_rows {
        let v = &r.values;
        let id = bus_id(v[0], r.line)?;
        let kind = match v[1] as i64 {
            1 => BusKind::Pq,
            2 => BusKind::Pv,
            3 => BusKind::Reference,
            4 => {
                isolated.insert(id);
                continue;
            }
            other => {
                return Err(ParseError::MalformedRow { line: r.line, message: format!("unknown bus type {other}") })
            }
        };
        if kind == BusKind::Reference {
            references.push(id);
        }
        buses.push(Bus {
            id,
            kind,
            vmin: v[12],
            vmax: v[11],
            shunt: Complex64::new(v[4], v[5]) / base_mva,
            base_kv: v[9],
        });
        loads.push(Load { p: v[2] / base_mva, q: v[3] / base_mva });
    }
    if !isolated.is_empty() {
        warn!("dropping {} isolated bus(es)", isolated.len());
    }

    if cost_rows.len() < gen_rows.len() {
        return Err(ParseError::MalformedRow {
            line: cost_rows.last().map_or(gen_rows[0].line, |r| r.line),
            message: format!("gencost has {} rows for {} generators", cost_rows.len(), gen_rows.len()),
        });
    }

    let mut generators = Vec::new();
    let mut warned_quadratic = false;
    for (g, c) in gen_rows.iter().zip(cost_rows) {
        let v = &g.values;
        let cost = parse_cost(c, base_mva)?;
        let bus = bus_id(v[0], g.line)?;
        if v[7] <= 0.0 || isolated.contains(&bus) {
            continue;
        }
        if cost.quadratic != 0.0 && !warned_quadratic {
            warn!("quadratic generator costs present; linear formulations use the linear coefficient only");
            warned_quadratic = true;
        }
        generators.push(Generator {
            bus,
            pmin: v[9] / base_mva,
            pmax: v[8] / base_mva,
            qmin: v[4] / base_mva,
            qmax: v[3] / base_mva,
            cost,
        });
    }

    let mut branches = Vec::new();
    for r in branch_rows {
        let v = &r.values;
        let from = bus_id(v[0], r.line)?;
        let to = bus_id(v[1], r.line)?;
        if v[10] <= 0.0 {
            continue;
        }
        if isolated.contains(&from) || isolated.contains(&to) {
            warn!("line {}: dropping in-service branch attached to an isolated bus", r.line);
            continue;
        }
        let (rr, xx, bc) = (v[2], v[3], v[4]);
        let charging = Complex64::new(0.0, bc / 2.0);
        branches.push(Branch {
            from,
            to,
            r: rr,
            x: xx,
            admittance: Complex64::new(1.0, 0.0) / Complex64::new(rr, xx),
            charging_from: charging,
            charging_to: charging,
            rate: (v[5] != 0.0).then(|| v[5] / base_mva),
            angle_min: v.get(11).and_then(|&a| angle_limit(a, false)),
            angle_max: v.get(12).and_then(|&a| angle_limit(a, true)),
            tap: if v[8] == 0.0 { 1.0 } else { v[8] },
            shift: v[9].to_radians(),
        });
    }

    let name = raw
        .name
        .or_else(|| raw.scalars.get("name").map(|(_, s)| s.trim_matches('\'').to_string()))
        .unwrap_or_else(|| "case".to_string());

    Ok(PowerNetwork {
        name,
        base_mva,
        buses,
        branches,
        generators,
        loads,
        slack_bus: (references.len() == 1).then(|| references[0]),
    })
}

fn parse_cost(row: &Row, base_mva: f64) -> Result<GenCost, ParseError> {
    let v = &row.values;
    match v[0] as i64 {
        2 => {}
        1 => {
            return Err(ParseError::Unsupported { line: row.line, what: "piecewise-linear gencost".into() });
        }
        m => return Err(ParseError::MalformedRow { line: row.line, message: format!("unknown cost model {m}") }),
    }
    let n = v[3];
    if n.fract() != 0.0 || n < 0.0 {
        return Err(ParseError::MalformedRow { line: row.line, message: format!("invalid coefficient count {n}") });
    }
    let n = n as usize;
    if v.len() < 4 + n {
        return Err(ParseError::MalformedRow {
            line: row.line,
            message: format!("gencost row declares {n} coefficients but has {}", v.len() - 4),
        });
    }
    // coefficients are listed highest order first
    let coeffs: Vec<f64> = v[4..4 + n].iter().rev().copied().collect();
    if coeffs.iter().skip(3).any(|&c| c != 0.0) {
        return Err(ParseError::Unsupported { line: row.line, what: "cost polynomial of degree > 2".into() });
    }
    let at = |k: usize| coeffs.get(k).copied().unwrap_or(0.0);
    Ok(GenCost { constant: at(0), linear: at(1) * base_mva, quadratic: at(2) * base_mva * base_mva })
}
