//! Fixed-format MPS export and a reader for the same subset.
//!
//! Names are replaced by positional identifiers (`C0000001`, `R0000001`) so
//! every field fits the classic eight-character columns. Coefficients are
//! written with twelve significant digits.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::model::{LinearModel, Relation, VarId, VarKind};
use super::LpError;

fn col_name(j: usize) -> String {
    format!("C{:07}", j + 1)
}

fn row_name(i: usize) -> String {
    format!("R{:07}", i + 1)
}

fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e12 {
        return format!("{}", v as i64);
    }
    let s = format!("{v:.11e}");
    let (mant, exp) = s.split_once('e').unwrap_or((&s, "0"));
    let mant = mant.trim_end_matches('0').trim_end_matches('.');
    let exp: i32 = exp.parse().unwrap_or(0);
    if (-4..12).contains(&exp) {
        let plain = format!("{:.*}", (11 - exp).max(0) as usize, v);
        let plain = if plain.contains('.') {
            plain
                .trim_end_matches('0')
                .trim_end_matches('.')
                .to_string()
        } else {
            plain
        };
        if plain.len() <= 18 {
            return plain;
        }
    }
    format!("{mant}e{exp}")
}

fn entry(out: &mut String, a: &str, b: &str, v: f64) {
    let _ = writeln!(out, "    {a:<8}  {b:<8}  {:>12}", fmt_num(v));
}

/// Write `model` as fixed MPS. Lazy rows are written as ordinary rows.
pub fn export_mps(model: &LinearModel) -> String {
    let mut out = String::new();
    let name: String = model
        .name
        .chars()
        .filter(|c| !c.is_whitespace())
        .take(8)
        .collect();
    let _ = writeln!(
        out,
        "NAME          {}",
        if name.is_empty() { "MODEL" } else { &name }
    );
    out.push_str("OBJSENSE\n    MAX\n");
    out.push_str("ROWS\n N  OBJ\n");
    for (i, c) in model.constraints.iter().enumerate() {
        let t = match c.relation {
            Relation::Le => "L",
            Relation::Ge => "G",
            Relation::Eq => "E",
        };
        let _ = writeln!(out, " {t}  {}", row_name(i));
    }

    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.num_vars()];
    for (i, c) in model.constraints.iter().enumerate() {
        for &(v, a) in &c.coeffs {
            by_col[v.0].push((i, a));
        }
    }
    let mut obj = vec![0.0; model.num_vars()];
    for &(v, a) in &model.objective {
        obj[v.0] += a;
    }

    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0;
    for (j, var) in model.variables.iter().enumerate() {
        let is_int = var.kind == VarKind::Binary;
        if is_int != in_int {
            let kind = if is_int { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(out, "    M{marker:07}  'MARKER'                 {kind}");
            marker += 1;
            in_int = is_int;
        }
        let c = col_name(j);
        if obj[j] != 0.0 {
            entry(&mut out, &c, "OBJ", obj[j]);
        }
        for &(i, a) in &by_col[j] {
            entry(&mut out, &c, &row_name(i), a);
        }
        if obj[j] == 0.0 && by_col[j].is_empty() {
            entry(&mut out, &c, "OBJ", 0.0);
        }
    }
    if in_int {
        let _ = writeln!(out, "    M{marker:07}  'MARKER'                 'INTEND'");
    }

    out.push_str("RHS\n");
    for (i, c) in model.constraints.iter().enumerate() {
        if c.rhs != 0.0 {
            entry(&mut out, "RHS", &row_name(i), c.rhs);
        }
    }

    out.push_str("BOUNDS\n");
    for (j, v) in model.variables.iter().enumerate() {
        let c = col_name(j);
        if v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0 {
            let _ = writeln!(out, " BV BND       {c}");
            continue;
        }
        if v.lower == v.upper {
            let _ = writeln!(out, " FX BND       {c:<8}  {:>12}", fmt_num(v.lower));
            continue;
        }
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " FR BND       {c}");
            continue;
        }
        if v.lower == f64::NEG_INFINITY {
            let _ = writeln!(out, " MI BND       {c}");
        } else if v.lower != 0.0 {
            let _ = writeln!(out, " LO BND       {c:<8}  {:>12}", fmt_num(v.lower));
        }
        if v.upper != f64::INFINITY {
            let _ = writeln!(out, " UP BND       {c:<8}  {:>12}", fmt_num(v.upper));
        }
    }
    out.push_str("ENDATA\n");
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Bounds,
}

/// Read an MPS model in the subset produced by [`export_mps`]
/// (no RANGES section). Minimization models are negated into maximization.
pub fn parse_mps(text: &str) -> Result<LinearModel, LpError> {
    let mut model = LinearModel::new("");
    let mut section = Section::None;
    let mut maximize = false;
    let mut obj_row: Option<String> = None;
    let mut rows: HashMap<String, usize> = HashMap::new();
    let mut row_terms: Vec<Vec<(VarId, f64)>> = Vec::new();
    let mut row_meta: Vec<(String, Relation, f64)> = Vec::new();
    let mut cols: HashMap<String, usize> = HashMap::new();
    let mut objective: Vec<(VarId, f64)> = Vec::new();
    let mut in_int = false;
    let mut bounded: Vec<bool> = Vec::new();

    let err = |line: usize, message: String| LpError::MpsParse { line, message };
    let num = |line: usize, s: &str| -> Result<f64, LpError> {
        s.parse::<f64>()
            .map_err(|_| err(line, format!("bad number '{s}'")))
    };

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let tok: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') {
            section = match tok[0] {
                "NAME" => {
                    model.name = tok.get(1).unwrap_or(&"").to_string();
                    Section::None
                }
                "OBJSENSE" => {
                    if let Some(s) = tok.get(1) {
                        maximize = *s == "MAX" || *s == "MAXIMIZE";
                    }
                    Section::ObjSense
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => break,
                other => return Err(err(line, format!("unsupported section {other}"))),
            };
            continue;
        }
        match section {
            Section::None => return Err(err(line, "data outside a section".into())),
            Section::ObjSense => maximize = tok[0] == "MAX" || tok[0] == "MAXIMIZE",
            Section::Rows => {
                if tok.len() < 2 {
                    return Err(err(line, "row entry needs a type and a name".into()));
                }
                let rel = match tok[0] {
                    "N" => {
                        if obj_row.is_none() {
                            obj_row = Some(tok[1].to_string());
                        }
                        continue;
                    }
                    "L" => Relation::Le,
                    "G" => Relation::Ge,
                    "E" => Relation::Eq,
                    t => return Err(err(line, format!("unknown row type {t}"))),
                };
                rows.insert(tok[1].to_string(), row_meta.len());
                row_meta.push((tok[1].to_string(), rel, 0.0));
                row_terms.push(Vec::new());
            }
            Section::Columns => {
                if tok.len() >= 3 && tok[1] == "'MARKER'" {
                    in_int = tok[2] == "'INTORG'";
                    continue;
                }
                if tok.len() < 3 || tok.len() % 2 == 0 {
                    return Err(err(line, "column entry needs name/value pairs".into()));
                }
                let j = *cols.entry(tok[0].to_string()).or_insert_with(|| {
                    let kind = if in_int {
                        VarKind::Binary
                    } else {
                        VarKind::Continuous
                    };
                    let upper = if in_int { 1.0 } else { f64::INFINITY };
                    bounded.push(false);
                    model.add_var(tok[0], 0.0, upper, kind).0
                });
                for pair in tok[1..].chunks(2) {
                    let a = num(line, pair[1])?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        objective.push((VarId(j), a));
                    } else {
                        let &i = rows
                            .get(pair[0])
                            .ok_or_else(|| err(line, format!("unknown row {}", pair[0])))?;
                        row_terms[i].push((VarId(j), a));
                    }
                }
            }
            Section::Rhs => {
                let pairs = if tok.len() % 2 == 1 {
                    &tok[1..]
                } else {
                    &tok[..]
                };
                for pair in pairs.chunks(2) {
                    if pair.len() < 2 {
                        return Err(err(line, "rhs entry needs name/value pairs".into()));
                    }
                    if Some(pair[0]) == obj_row.as_deref() {
                        continue;
                    }
                    let &i = rows
                        .get(pair[0])
                        .ok_or_else(|| err(line, format!("unknown row {}", pair[0])))?;
                    row_meta[i].2 = num(line, pair[1])?;
                }
            }
            Section::Bounds => {
                if tok.len() < 3 {
                    return Err(err(line, "bound entry too short".into()));
                }
                let &j = cols
                    .get(tok[2])
                    .ok_or_else(|| err(line, format!("unknown column {}", tok[2])))?;
                let v = &mut model.variables[j];
                let value = || {
                    tok.get(3)
                        .ok_or_else(|| err(line, "missing bound value".into()))
                        .and_then(|s| num(line, s))
                };
                match tok[0] {
                    "UP" => {
                        v.upper = value()?;
                        if v.kind == VarKind::Binary && !bounded[j] {
                            v.kind = VarKind::Continuous;
                        }
                    }
                    "LO" => v.lower = value()?,
                    "FX" => {
                        let x = value()?;
                        v.lower = x;
                        v.upper = x;
                    }
                    "FR" => {
                        v.lower = f64::NEG_INFINITY;
                        v.upper = f64::INFINITY;
                    }
                    "MI" => v.lower = f64::NEG_INFINITY,
                    "PL" => v.upper = f64::INFINITY,
                    "BV" => {
                        v.kind = VarKind::Binary;
                        v.lower = 0.0;
                        v.upper = 1.0;
                    }
                    t => return Err(err(line, format!("unsupported bound type {t}"))),
                }
                bounded[j] = true;
            }
        }
    }

    for ((name, rel, rhs), terms) in row_meta.into_iter().zip(row_terms) {
        model.add_constraint(name, terms, rel, rhs);
    }
    if !maximize {
        for t in &mut objective {
            t.1 = -t.1;
        }
    }
    model.set_objective(objective);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::solve_milp;

    fn sample() -> LinearModel {
        let mut m = LinearModel::new("sample");
        let x = m.add_continuous("x", 0.0, f64::INFINITY);
        let y = m.add_continuous("y", -1.0, 2.5);
        let b = m.add_binary("b");
        let f = m.add_continuous("f", f64::NEG_INFINITY, f64::INFINITY);
        m.add_constraint(
            "c1",
            vec![(x, 1.0), (y, 0.1234567890123), (b, 3.0)],
            Relation::Le,
            4.0,
        );
        m.add_constraint("c2", vec![(x, 1.0), (f, -1.0)], Relation::Eq, 0.0);
        m.add_lazy_constraint("c3", vec![(y, 1.0), (b, 1.0)], Relation::Ge, -0.5);
        m.set_objective(vec![(x, 1.0), (y, 2.0), (b, 0.5)]);
        m
    }

    #[test]
    fn round_trip_preserves_structure() {
        let m = sample();
        let text = export_mps(&m);
        assert!(text.contains("'INTORG'"));
        assert!(text.contains(" BV BND"));
        let back = parse_mps(&text).unwrap();
        assert_eq!(back.num_vars(), m.num_vars());
        assert_eq!(back.num_constraints(), m.num_constraints());
        for (a, b) in m.variables.iter().zip(&back.variables) {
            assert_eq!(a.kind, b.kind);
            assert_eq!(a.lower, b.lower);
            assert_eq!(a.upper, b.upper);
        }
        for (a, b) in m.constraints.iter().zip(&back.constraints) {
            assert_eq!(a.relation, b.relation);
            assert_eq!(a.rhs, b.rhs);
            assert_eq!(a.coeffs.len(), b.coeffs.len());
            for (p, q) in a.coeffs.iter().zip(&b.coeffs) {
                assert_eq!(p.0, q.0);
                assert!((p.1 - q.1).abs() <= 1e-11 * p.1.abs());
            }
        }
        let s1 = solve_milp(&m, 1e-9, 1000).unwrap();
        let s2 = solve_milp(&back, 1e-9, 1000).unwrap();
        assert!((s1.objective - s2.objective).abs() < 1e-9);
    }

    #[test]
    fn numbers_keep_twelve_digits() {
        assert_eq!(fmt_num(3.0), "3");
        assert_eq!(fmt_num(-0.5), "-0.5");
        let v = 0.1234567890123456;
        assert!((fmt_num(v).parse::<f64>().unwrap() - v).abs() < 1e-12);
        let tiny = 1.234567890123e-9;
        assert!((fmt_num(tiny).parse::<f64>().unwrap() / tiny - 1.0).abs() < 1e-11);
    }

    #[test]
    fn unknown_row_is_an_error() {
        let text = "NAME x\nROWS\n N OBJ\nCOLUMNS\n    C1 R9 1\nENDATA\n";
        assert!(matches!(
            parse_mps(text),
            Err(LpError::MpsParse { line: 5, .. })
        ));
    }
}
