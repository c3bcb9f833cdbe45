//! FCIDUMP reader and writer.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use super::IntegralSet;
use crate::error::{QbeError, Result};
use crate::linalg::Tensor4;

#[derive(Debug, Clone, PartialEq)]
pub struct Fcidump {
    pub ints: IntegralSet,
    pub n_elec: usize,
    pub ms2: i32,
}

pub fn fcidump_write_string(ints: &IntegralSet, n_elec: usize, ms2: i32) -> String {
    let n = ints.n_orb();
    let mut out = String::new();
    let orbsym = vec!["1"; n].join(",");
    let _ = writeln!(out, " &FCI NORB={n},NELEC={n_elec},MS2={ms2},");
    let _ = writeln!(out, "  ORBSYM={orbsym},");
    let _ = writeln!(out, "  ISYM=1,");
    let _ = writeln!(out, " &END");
    for i in 0..n {
        for j in 0..=i {
            for k in 0..=i {
                let lmax = if k == i { j } else { k };
                for l in 0..=lmax {
                    let v = ints.v.get(i, j, k, l);
                    if v != 0.0 {
                        let _ = writeln!(out, "{v:.17e} {} {} {} {}", i + 1, j + 1, k + 1, l + 1);
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..=i {
            let v = ints.h[(i, j)];
            if v != 0.0 {
                let _ = writeln!(out, "{v:.17e} {} {} 0 0", i + 1, j + 1);
            }
        }
    }
    let _ = writeln!(out, "{:.17e} 0 0 0 0", ints.e_nuc);
    out
}

pub fn fcidump_write(ints: &IntegralSet, n_elec: usize, ms2: i32, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, fcidump_write_string(ints, n_elec, ms2))?;
    Ok(())
}

pub fn fcidump_read(path: impl AsRef<Path>) -> Result<Fcidump> {
    let text = std::fs::read_to_string(path)?;
    fcidump_read_str(&text)
}

fn parse_err<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(QbeError::Parse { line, msg: msg.into() })
}

/// Reads an integer-valued header key such as `NORB`.
fn header_value(header: &str, key: &str, line: usize) -> Result<Option<i64>> {
    let upper = header.to_ascii_uppercase();
    let mut search = 0;
    while let Some(pos) = upper[search..].find(key) {
        let start = search + pos;
        let prev_ok = start == 0 || !upper.as_bytes()[start - 1].is_ascii_alphanumeric();
        let rest = upper[start + key.len()..].trim_start();
        if prev_ok {
            if let Some(rest) = rest.strip_prefix('=') {
                let tok: String =
                    rest.trim_start().chars().take_while(|c| c.is_ascii_digit() || *c == '-' || *c == '+').collect();
                return match tok.parse::<i64>() {
                    Ok(v) => Ok(Some(v)),
                    Err(_) => parse_err(line, format!("header key {key} has non-integer value")),
                };
            }
        }
        search = start + key.len();
    }
    Ok(None)
}

pub fn fcidump_read_str(text: &str) -> Result<Fcidump> {
    let mut header = String::new();
    let mut body_start = None;
    let mut header_line = 1;
    for (idx, line) in text.lines().enumerate() {
        header.push_str(line);
        header.push(' ');
        let t = line.trim();
        let up = t.to_ascii_uppercase();
        if up.contains("&END") || t == "/" || up.ends_with('/') {
            body_start = Some(idx + 1);
            break;
        }
        if idx == 0 && !up.starts_with("&FCI") {
            return parse_err(1, "header must start with &FCI");
        }
        header_line = idx + 1;
    }
    let Some(body_start) = body_start else {
        return parse_err(header_line, "unterminated header (expected &END or /)");
    };
    let norb =
        header_value(&header, "NORB", 1)?.ok_or_else(|| QbeError::Parse { line: 1, msg: "missing NORB".into() })?;
    let nelec =
        header_value(&header, "NELEC", 1)?.ok_or_else(|| QbeError::Parse { line: 1, msg: "missing NELEC".into() })?;
    let ms2 = header_value(&header, "MS2", 1)?.unwrap_or(0);
    if norb <= 0 || nelec < 0 {
        return parse_err(1, "NORB must be positive and NELEC non-negative");
    }
    let n = norb as usize;

    let mut h = DMatrix::zeros(n, n);
    let mut v = Tensor4::zeros(n);
    let mut e_nuc = 0.0;
    for (idx, line) in text.lines().enumerate().skip(body_start) {
        let lineno = idx + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 5 {
            return parse_err(lineno, format!("expected 5 fields, found {}", toks.len()));
        }
        let val: f64 = match toks[0].replace(['D', 'd'], "e").parse() {
            Ok(x) => x,
            Err(_) => return parse_err(lineno, format!("non-numeric value `{}`", toks[0])),
        };
        let mut ix = [0usize; 4];
        for (slot, tok) in ix.iter_mut().zip(&toks[1..]) {
            *slot = match tok.parse::<usize>() {
                Ok(x) if x <= n => x,
                Ok(x) => return parse_err(lineno, format!("index {x} exceeds NORB={n}")),
                Err(_) => return parse_err(lineno, format!("non-integer index `{tok}`")),
            };
        }
        match ix {
            [0, 0, 0, 0] => e_nuc = val,
            [_, 0, 0, 0] => {} // orbital energy
            [i, j, 0, 0] if i > 0 && j > 0 => {
                h[(i - 1, j - 1)] = val;
                h[(j - 1, i - 1)] = val;
            }
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                v.set_sym(i - 1, j - 1, k - 1, l - 1, val);
            }
            _ => return parse_err(lineno, "malformed index pattern"),
        }
    }
    Ok(Fcidump { ints: IntegralSet::new(h, v, e_nuc)?, n_elec: nelec as usize, ms2: ms2 as i32 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_orbital_without_eri_roundtrips() {
        let ints = IntegralSet::new(DMatrix::from_element(1, 1, -0.5), Tensor4::zeros(1), 0.0).unwrap();
        let text = fcidump_write_string(&ints, 1, 1);
        let back = fcidump_read_str(&text).unwrap();
        assert_eq!(back.ints, ints);
        assert_eq!((back.n_elec, back.ms2), (1, 1));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = " &FCI NORB=2,NELEC=2,MS2=0,\n &END\n 0.5 1 1 1 1\n abc 1 1 0 0\n";
        match fcidump_read_str(bad) {
            Err(QbeError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let oob = " &FCI NORB=2,NELEC=2,MS2=0,\n &END\n 0.5 3 1 1 1\n";
        assert!(matches!(fcidump_read_str(oob), Err(QbeError::Parse { line: 3, .. })));
        assert!(matches!(fcidump_read_str("NORB=2\n/\n"), Err(QbeError::Parse { line: 1, .. })));
        assert!(matches!(fcidump_read_str(" &FCI NELEC=2,\n &END\n"), Err(QbeError::Parse { .. })));
    }

    #[test]
    fn fortran_exponent_and_slash_terminator() {
        let text = " &FCI NORB=1,NELEC=2,MS2=0\n /\n 0.5D+00 1 1 1 1\n -1.25D0 1 1 0 0\n 0.1 0 0 0 0\n";
        let f = fcidump_read_str(text).unwrap();
        assert_eq!(f.ints.v.get(0, 0, 0, 0), 0.5);
        assert_eq!(f.ints.h[(0, 0)], -1.25);
        assert_eq!(f.ints.e_nuc, 0.1);
    }
}
