//! Fixed-column MPS export, for cross-checking against external solvers.

use std::fmt::Write;

use super::{LinearProgram, Relation, Sense};

fn num(v: f64) -> String {
    let s = format!("{v}");
    if s.len() <= 12 {
        s
    } else {
        format!("{v:.6e}")
    }
}

/// Fields start at columns 2, 5, 15, 25, 40 and 50.
fn line(out: &mut String, code: &str, a: &str, b: &str, v: f64) {
    let _ = writeln!(out, " {code:<2} {a:<8}  {b:<8}  {:>12}", num(v));
}

pub(super) fn write(lp: &LinearProgram, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {name}");
    let flip = if lp.sense == Sense::Maximize {
        let _ = writeln!(
            out,
            "* maximization written as minimization of the negated objective"
        );
        -1.0
    } else {
        1.0
    };
    let col = |j: usize| format!("X{:07}", j + 1);
    let row = |i: usize| format!("R{:07}", i + 1);

    out.push_str("ROWS\n N  COST\n");
    for (i, r) in lp.rows.iter().enumerate() {
        let t = match r.relation {
            Relation::Le => "L",
            Relation::Ge => "G",
            Relation::Eq => "E",
        };
        let _ = writeln!(out, " {t}  {}", row(i));
    }

    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0;
    for j in 0..lp.num_vars() {
        if lp.integer[j] != in_int {
            let kind = if lp.integer[j] {
                "'INTORG'"
            } else {
                "'INTEND'"
            };
            let _ = writeln!(
                out,
                "    MARKER{:<4}          'MARKER'                 {kind}",
                marker
            );
            marker += 1;
            in_int = lp.integer[j];
        }
        let c = lp.objective[j] * flip;
        if c != 0.0 {
            line(&mut out, "", &col(j), "COST", c);
        }
        for (i, r) in lp.rows.iter().enumerate() {
            if r.coeffs[j] != 0.0 {
                line(&mut out, "", &col(j), &row(i), r.coeffs[j]);
            }
        }
    }
    if in_int {
        let _ = writeln!(
            out,
            "    MARKER{:<4}          'MARKER'                 'INTEND'",
            marker
        );
    }

    out.push_str("RHS\n");
    for (i, r) in lp.rows.iter().enumerate() {
        if r.rhs != 0.0 {
            line(&mut out, "", "RHS", &row(i), r.rhs);
        }
    }

    out.push_str("BOUNDS\n");
    for (j, &(l, u)) in lp.bounds.iter().enumerate() {
        let name = col(j);
        match (l.is_finite(), u.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " FR BND       {name}");
            }
            (true, true) if l == u => line(&mut out, "FX", "BND", &name, l),
            (lf, uf) => {
                if !lf {
                    let _ = writeln!(out, " MI BND       {name}");
                } else if l != 0.0 {
                    line(&mut out, "LO", "BND", &name, l);
                }
                if uf {
                    line(&mut out, "UP", "BND", &name, u);
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}
