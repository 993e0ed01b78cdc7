//! Export of a built program in CPLEX LP text format, for cross-checking
//! against external solvers. Cone rows are written as quadratic rows.

use crate::model::{ConeForm, MathProgram, Sense};
use std::fmt::Write;

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

fn term(out: &mut String, first: &mut bool, coeff: f64, name: &str) {
    if coeff == 0.0 {
        return;
    }
    if *first {
        if coeff < 0.0 {
            out.push_str("- ");
        }
        *first = false;
    } else if coeff < 0.0 {
        out.push_str(" - ");
    } else {
        out.push_str(" + ");
    }
    let a = coeff.abs();
    if (a - 1.0).abs() < 1e-15 {
        out.push_str(name);
    } else {
        let _ = write!(out, "{a} {name}");
    }
}

/// Renders the program as LP-format text.
pub fn to_lp_format(prog: &MathProgram) -> String {
    let names: Vec<String> = prog.vars.iter().map(|v| sanitize(&v.name)).collect();
    let mut s = String::new();
    s.push_str("\\ generated by gtnep export-lp\nMinimize\n obj: ");
    let mut first = true;
    for &(v, c) in &prog.objective {
        term(&mut s, &mut first, c, &names[v.0]);
    }
    if first {
        s.push('0');
    }
    s.push_str("\nSubject To\n");
    for (k, row) in prog.lin.iter().enumerate() {
        let _ = write!(s, " {}_{}: ", sanitize(&row.tag.to_string()), k);
        let mut first = true;
        for &(v, c) in &row.coeffs {
            term(&mut s, &mut first, c, &names[v.0]);
        }
        if first {
            s.push('0');
        }
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        let _ = writeln!(s, " {op} {}", row.rhs);
    }
    for (k, cone) in prog.cones.iter().enumerate() {
        match cone.form {
            ConeForm::Plain { gamma, phi, w } => {
                let _ = writeln!(
                    s,
                    " cone_{k}: [ {w} {p} ^2 ] - {g} <= 0",
                    p = names[phi.0],
                    g = names[gamma.0]
                );
            }
            ConeForm::Perspective { z, gamma, phi, w } => {
                let _ = writeln!(
                    s,
                    " cone_{k}: [ {w} {p} ^2 - {zn} * {g} ] <= 0",
                    p = names[phi.0],
                    zn = names[z.0],
                    g = names[gamma.0]
                );
            }
        }
    }
    s.push_str("Bounds\n");
    for (i, v) in prog.vars.iter().enumerate() {
        let (lo, hi) = v.domain.bounds();
        if v.domain.is_binary() {
            continue;
        }
        let name = &names[i];
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => {
                let _ = writeln!(s, " {lo} <= {name} <= {hi}");
            }
            (true, false) => {
                let _ = writeln!(s, " {name} >= {lo}");
            }
            (false, true) => {
                let _ = writeln!(s, " -inf <= {name} <= {hi}");
            }
            (false, false) => {
                let _ = writeln!(s, " {name} free");
            }
        }
    }
    s.push_str("Binaries\n");
    for (i, v) in prog.vars.iter().enumerate() {
        if v.domain.is_binary() {
            let _ = writeln!(s, " {}", names[i]);
        }
    }
    s.push_str("End\n");
    s
}
