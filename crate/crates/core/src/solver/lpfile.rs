//! CPLEX LP text format.
//!
//! The writer prints every coefficient with 17 significant digits so a
//! re-parse reproduces the exact bit patterns. The reader accepts the subset
//! of the format the writer produces plus common spelling variants, which is
//! enough for round-trip tests and hand-written fixtures.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::problem::{Problem, Sense, VarKind};
use crate::error::{Error, Result};

const WRAP: usize = 200;

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.16e}")
    }
}

fn write_terms(out: &mut String, problem: &Problem, coeffs: &[(usize, f64)], line_len: &mut usize) {
    if coeffs.is_empty() {
        // An empty expression is not valid; a zero term keeps the row well formed.
        let _ = write!(out, " 0 {}", problem.vars.first().map_or("x", |v| v.name.as_str()));
        return;
    }
    for &(j, a) in coeffs {
        let sign = if a.is_sign_negative() { '-' } else { '+' };
        let term = format!(" {sign} {} {}", num(a.abs()), problem.vars[j].name);
        if *line_len + term.len() > WRAP {
            out.push_str("\n   ");
            *line_len = 3;
        }
        *line_len += term.len();
        out.push_str(&term);
    }
}

pub fn write_lp(problem: &Problem) -> Result<String> {
    problem.validate()?;
    for v in &problem.vars {
        if !valid_name(&v.name) {
            return Err(Error::Solver(format!(
                "variable name {:?} is not valid in LP files",
                v.name
            )));
        }
    }
    let mut out = String::new();
    out.push_str("\\ written by ifrepair\nMinimize\n obj:");
    let mut len = 5;
    write_terms(&mut out, problem, &problem.objective, &mut len);
    if problem.objective_offset != 0.0 {
        let c = problem.objective_offset;
        let sign = if c < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {}", num(c.abs()));
    }
    out.push_str("\nSubject To\n");
    for (r, con) in problem.cons.iter().enumerate() {
        let label = if valid_name(&con.name) {
            con.name.clone()
        } else {
            format!("R{r}")
        };
        let _ = write!(out, " {label}:");
        let mut len = label.len() + 2;
        write_terms(&mut out, problem, &con.coeffs, &mut len);
        let op = match con.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", num(con.rhs));
    }
    out.push_str("Bounds\n");
    for v in &problem.vars {
        if v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0 {
            continue;
        }
        let (l, u) = (v.lower, v.upper);
        if l == 0.0 && u == f64::INFINITY && !l.is_sign_negative() {
            continue;
        }
        if l == f64::NEG_INFINITY && u == f64::INFINITY {
            let _ = writeln!(out, " {} free", v.name);
        } else if l == u {
            let _ = writeln!(out, " {} = {}", v.name, num(l));
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", num(l), v.name, num(u));
        }
    }
    let binaries = problem.binaries();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for j in binaries {
            let _ = writeln!(out, " {}", problem.vars[j].name);
        }
    }
    out.push_str("End\n");
    Ok(out)
}

pub fn export_lp_file(problem: &Problem, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = write_lp(problem)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_lp_file(path: impl AsRef<Path>) -> Result<Problem> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lp(&text, &path.display().to_string())
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    let Some(first) = chars.next() else {
        return false;
    };
    if first.is_ascii_digit() || first == '.' {
        return false;
    }
    // A leading `e` followed by a digit reads as an exponent.
    if matches!(first, 'e' | 'E') && chars.clone().next().is_some_and(|c| c.is_ascii_digit()) {
        return false;
    }
    name.len() <= 255 && name.chars().all(name_char)
}

fn name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "_!\"#$%&()/,.;?@'`{}|~".contains(c)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Colon,
    Op(Sense),
    Plus,
    Minus,
}

fn lex(line: &str) -> std::result::Result<Vec<Tok>, String> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == ':' {
            out.push(Tok::Colon);
            i += 1;
        } else if c == '+' {
            out.push(Tok::Plus);
            i += 1;
        } else if c == '-' {
            out.push(Tok::Minus);
            i += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let mut j = i + 1;
            if j < chars.len() && matches!(chars[j], '<' | '>' | '=') {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            let sense = match s.as_str() {
                "<=" | "=<" | "<" => Sense::Le,
                ">=" | "=>" | ">" => Sense::Ge,
                "=" | "==" => Sense::Eq,
                _ => return Err(format!("unknown operator {s:?}")),
            };
            out.push(Tok::Op(sense));
            i = j;
        } else if c.is_ascii_digit() || c == '.' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                j += 1;
            }
            if j < chars.len() && matches!(chars[j], 'e' | 'E') {
                let mut k = j + 1;
                if k < chars.len() && matches!(chars[k], '+' | '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            let s: String = chars[i..j].iter().collect();
            let v = s.parse::<f64>().map_err(|_| format!("bad number {s:?}"))?;
            out.push(Tok::Num(v));
            i = j;
        } else if name_char(c) {
            let mut j = i;
            while j < chars.len() && name_char(chars[j]) {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            match s.to_ascii_lowercase().as_str() {
                "inf" | "infinity" => out.push(Tok::Num(f64::INFINITY)),
                _ => out.push(Tok::Name(s)),
            }
            i = j;
        } else {
            return Err(format!("unexpected character {c:?}"));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    End,
}

fn section_of(line: &str) -> Option<Section> {
    let l = line.trim().to_ascii_lowercase();
    let l = l.split_whitespace().collect::<Vec<_>>().join(" ");
    Some(match l.as_str() {
        "minimize" | "minimise" | "minimum" | "min" => Section::Objective,
        "subject to" | "such that" | "st" | "s.t." | "st." => Section::Constraints,
        "bounds" | "bound" => Section::Bounds,
        "binaries" | "binary" | "bin" => Section::Binaries,
        "end" => Section::End,
        _ => return None,
    })
}

struct Reader<'a> {
    origin: &'a str,
    problem: Problem,
    index: HashMap<String, usize>,
}

impl Reader<'_> {
    fn err(&self, line: usize, field: &str, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.origin.to_string(),
            line,
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn var(&mut self, name: &str) -> usize {
        if let Some(&j) = self.index.get(name) {
            return j;
        }
        let j = self.problem.add_continuous(name, 0.0, f64::INFINITY);
        self.index.insert(name.to_string(), j);
        j
    }

    /// Parse `[label:] terms` from `toks[*pos..]`, stopping at an operator or
    /// the end. Returns label, coefficients and any constant term.
    fn expr(&mut self, toks: &[(Tok, usize)], pos: &mut usize) -> Result<(Option<String>, Vec<(usize, f64)>, f64)> {
        let mut label = None;
        if let (Some((Tok::Name(n), _)), Some((Tok::Colon, _))) = (toks.get(*pos), toks.get(*pos + 1)) {
            label = Some(n.clone());
            *pos += 2;
        }
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        let mut constant = 0.0;
        loop {
            let mut sign = 1.0;
            let mut saw_sign = false;
            while let Some((t, _)) = toks.get(*pos) {
                match t {
                    Tok::Plus => saw_sign = true,
                    Tok::Minus => {
                        sign = -sign;
                        saw_sign = true;
                    }
                    _ => break,
                }
                *pos += 1;
            }
            match toks.get(*pos) {
                Some((Tok::Num(v), line)) => {
                    let v = *v;
                    let line = *line;
                    *pos += 1;
                    match toks.get(*pos) {
                        Some((Tok::Name(n), _)) if !matches!(toks.get(*pos + 1), Some((Tok::Colon, _))) => {
                            let n = n.clone();
                            *pos += 1;
                            let j = self.var(&n);
                            coeffs.push((j, sign * v));
                        }
                        _ => {
                            if !saw_sign && !coeffs.is_empty() {
                                return Err(self.err(line, "expression", "missing operator between terms"));
                            }
                            constant += sign * v;
                        }
                    }
                }
                Some((Tok::Name(n), _)) if !matches!(toks.get(*pos + 1), Some((Tok::Colon, _))) => {
                    if !saw_sign && (!coeffs.is_empty() || constant != 0.0) {
                        break;
                    }
                    let n = n.clone();
                    *pos += 1;
                    let j = self.var(&n);
                    coeffs.push((j, sign));
                }
                _ => {
                    if saw_sign {
                        let line = toks.get(*pos).or(toks.last()).map_or(0, |t| t.1);
                        return Err(self.err(line, "expression", "dangling sign"));
                    }
                    break;
                }
            }
        }
        Ok((label, coeffs, constant))
    }

    fn signed_number(&self, toks: &[(Tok, usize)], pos: &mut usize, field: &str) -> Result<f64> {
        let mut sign = 1.0;
        while let Some((t, _)) = toks.get(*pos) {
            match t {
                Tok::Plus => {}
                Tok::Minus => sign = -sign,
                _ => break,
            }
            *pos += 1;
        }
        match toks.get(*pos) {
            Some((Tok::Num(v), _)) => {
                *pos += 1;
                Ok(sign * v)
            }
            other => {
                let line = other.or(toks.last()).map_or(0, |t| t.1);
                Err(self.err(line, field, "expected a number"))
            }
        }
    }

    fn bound_line(&mut self, toks: &[Tok], line: usize) -> Result<()> {
        let toks: Vec<(Tok, usize)> = toks.iter().cloned().map(|t| (t, line)).collect();
        // `x free`
        if let [(Tok::Name(n), _), (Tok::Name(f), _)] = toks.as_slice() {
            if f.eq_ignore_ascii_case("free") {
                let j = self.var(n);
                self.problem.vars[j].lower = f64::NEG_INFINITY;
                self.problem.vars[j].upper = f64::INFINITY;
                return Ok(());
            }
        }
        let mut pos = 0;
        let name_at = |pos: usize| match toks.get(pos) {
            Some((Tok::Name(n), _)) => Some(n.clone()),
            _ => None,
        };
        if let Some(n) = name_at(0) {
            // `x op v`
            pos += 1;
            let Some((Tok::Op(op), _)) = toks.get(pos).cloned() else {
                return Err(self.err(line, &n, "expected a comparison"));
            };
            pos += 1;
            let v = self.signed_number(&toks, &mut pos, &n)?;
            let j = self.var(&n);
            let var = &mut self.problem.vars[j];
            match op {
                Sense::Le => var.upper = v,
                Sense::Ge => var.lower = v,
                Sense::Eq => {
                    var.lower = v;
                    var.upper = v;
                }
            }
        } else {
            // `l op x [op u]`
            let l = self.signed_number(&toks, &mut pos, "bound")?;
            let Some((Tok::Op(op1), _)) = toks.get(pos).cloned() else {
                return Err(self.err(line, "bound", "expected a comparison"));
            };
            pos += 1;
            let Some(n) = name_at(pos) else {
                return Err(self.err(line, "bound", "expected a variable name"));
            };
            pos += 1;
            let j = self.var(&n);
            match op1 {
                Sense::Le => self.problem.vars[j].lower = l,
                Sense::Ge => self.problem.vars[j].upper = l,
                Sense::Eq => {
                    self.problem.vars[j].lower = l;
                    self.problem.vars[j].upper = l;
                }
            }
            if let Some((Tok::Op(op2), _)) = toks.get(pos).cloned() {
                pos += 1;
                let u = self.signed_number(&toks, &mut pos, &n)?;
                match op2 {
                    Sense::Le => self.problem.vars[j].upper = u,
                    Sense::Ge => self.problem.vars[j].lower = u,
                    Sense::Eq => return Err(self.err(line, &n, "unexpected `=` in a double bound")),
                }
            }
        }
        if pos != toks.len() {
            return Err(self.err(line, "bound", "trailing tokens"));
        }
        Ok(())
    }
}

/// Parse CPLEX LP text. Variables are numbered by first appearance.
pub fn parse_lp(text: &str, origin: &str) -> Result<Problem> {
    let mut rd = Reader {
        origin,
        problem: Problem::new(),
        index: HashMap::new(),
    };
    let mut section = Section::None;
    let mut objective_toks: Vec<(Tok, usize)> = Vec::new();
    let mut constraint_toks: Vec<(Tok, usize)> = Vec::new();
    let mut binary_names: Vec<(String, usize)> = Vec::new();
    let mut bound_lines: Vec<(Vec<Tok>, usize)> = Vec::new();
    let mut saw_objective = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('\\').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if let Some(s) = section_of(line) {
            if s == Section::Objective {
                saw_objective = true;
            }
            section = s;
            continue;
        }
        let lower = line.trim().to_ascii_lowercase();
        if ["maximize", "maximise", "max", "maximum"].contains(&lower.as_str()) {
            return Err(rd.err(line_no, "objective", "only minimisation is supported"));
        }
        if ["general", "generals", "gen", "semi-continuous", "semis", "semi", "sos"].contains(&lower.as_str()) {
            return Err(rd.err(line_no, "section", format!("unsupported section {lower:?}")));
        }
        let toks = lex(line).map_err(|m| rd.err(line_no, "token", m))?;
        match section {
            Section::None => return Err(rd.err(line_no, "section", "content before any section")),
            Section::End => return Err(rd.err(line_no, "section", "content after End")),
            Section::Objective => objective_toks.extend(toks.into_iter().map(|t| (t, line_no))),
            Section::Constraints => constraint_toks.extend(toks.into_iter().map(|t| (t, line_no))),
            Section::Bounds => bound_lines.push((toks, line_no)),
            Section::Binaries => {
                for t in toks {
                    match t {
                        Tok::Name(n) => binary_names.push((n, line_no)),
                        other => return Err(rd.err(line_no, "binaries", format!("unexpected {other:?}"))),
                    }
                }
            }
        }
    }
    if !saw_objective {
        return Err(rd.err(0, "objective", "missing Minimize section"));
    }
    let mut pos = 0;
    let (_, obj, constant) = rd.expr(&objective_toks, &mut pos)?;
    if pos != objective_toks.len() {
        return Err(rd.err(objective_toks[pos].1, "objective", "unexpected token"));
    }
    rd.problem.objective = merge(obj);
    rd.problem.objective_offset = constant;
    let mut pos = 0;
    while pos < constraint_toks.len() {
        let line = constraint_toks[pos].1;
        let (label, coeffs, constant) = rd.expr(&constraint_toks, &mut pos)?;
        let Some((Tok::Op(sense), _)) = constraint_toks.get(pos).cloned() else {
            return Err(rd.err(line, label.as_deref().unwrap_or("constraint"), "expected a comparison"));
        };
        pos += 1;
        let rhs = rd.signed_number(&constraint_toks, &mut pos, label.as_deref().unwrap_or("rhs"))?;
        let name = label.unwrap_or_else(|| format!("R{}", rd.problem.cons.len()));
        rd.problem.add_con(name, merge(coeffs), sense, rhs - constant);
    }
    for (toks, line) in &bound_lines {
        rd.bound_line(toks, *line)?;
    }
    for (n, _) in &binary_names {
        let j = rd.var(n);
        let v = &mut rd.problem.vars[j];
        v.kind = VarKind::Binary;
        v.lower = v.lower.max(0.0);
        v.upper = v.upper.min(1.0);
    }
    Ok(rd.problem)
}

fn merge(coeffs: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
    for (j, a) in coeffs {
        match out.iter_mut().find(|(k, _)| *k == j) {
            Some((_, b)) => *b += a,
            None => out.push((j, a)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Problem {
        let mut p = Problem::new();
        let x = p.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY);
        let y = p.add_continuous("y", -2.5, 0.1);
        let z = p.add_binary("Z_0");
        let e = p.add_continuous("eta_0_1", 0.0, f64::INFINITY);
        let f = p.add_continuous("fixed", 3.0, 3.0);
        p.add_con("c0", vec![(x, 1.0 / 3.0), (y, -2.0), (z, 1e4)], Sense::Le, -1e-6);
        p.add_con("c1", vec![(e, 1.0), (x, -0.1)], Sense::Eq, 0.0);
        p.add_con("c2", vec![(f, 1.0), (y, 1.0)], Sense::Ge, -7.25);
        p.set_objective(vec![(x, 0.7), (e, 1.0), (z, -1.0)]);
        p
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = sample();
        let text = write_lp(&p).unwrap();
        let q = parse_lp(&text, "mem").unwrap();
        // Variables appear in the objective first, so map by name.
        for v in &p.vars {
            let j = q.var_index(&v.name).expect("variable survives");
            let w = &q.vars[j];
            assert_eq!(
                (w.kind, w.lower.to_bits(), w.upper.to_bits()),
                (v.kind, v.lower.to_bits(), v.upper.to_bits()),
                "{}",
                v.name
            );
        }
        assert_eq!(p.cons.len(), q.cons.len());
        for (a, b) in p.cons.iter().zip(&q.cons) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.sense, b.sense);
            assert_eq!(a.rhs.to_bits(), b.rhs.to_bits());
            for &(j, c) in &a.coeffs {
                let k = q.var_index(&p.vars[j].name).unwrap();
                let got = b.coeffs.iter().find(|t| t.0 == k).unwrap().1;
                assert_eq!(got.to_bits(), c.to_bits());
            }
        }
    }

    #[test]
    fn one_variable_round_trip() {
        let mut p = Problem::new();
        let x = p.add_continuous("x", 0.0, f64::INFINITY);
        p.add_con("c", vec![(x, 1.0)], Sense::Ge, 3.0);
        p.set_objective(vec![(x, 1.0)]);
        let q = parse_lp(&write_lp(&p).unwrap(), "mem").unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn binaries_listed_once() {
        let text = write_lp(&sample()).unwrap();
        let section = text.split("Binaries\n").nth(1).unwrap();
        let names: Vec<&str> = section.lines().map(str::trim).take_while(|l| *l != "End").collect();
        assert_eq!(names, vec!["Z_0"]);
        assert_eq!(text.matches("Binaries").count(), 1);
    }

    #[test]
    fn hand_written_variants() {
        let text = "\\ comment\nMINIMIZE\n obj: x + 2y - z\nsubject to\n c1: x + y >= 1\n -z + x <= -0.5\nbounds\n x <= 4\n -1 <= z <= inf\n y free\nbinary\n b\nend\n";
        let p = parse_lp(text, "h").unwrap();
        assert_eq!(p.vars.len(), 4);
        assert_eq!(p.cons[1].name, "R1");
        assert_eq!(p.cons[1].rhs, -0.5);
        let z = p.var_index("z").unwrap();
        assert_eq!((p.vars[z].lower, p.vars[z].upper), (-1.0, f64::INFINITY));
        assert_eq!(p.vars[p.var_index("b").unwrap()].kind, VarKind::Binary);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "Minimize\n obj: x\nSubject To\n c: x + >= 1\nEnd\n";
        match parse_lp(text, "bad.lp") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_lp("Maximize\n obj: x\nEnd\n", "m").is_err());
    }
}
