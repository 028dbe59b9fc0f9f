//! Plain-text problem dump for cross-checking with external tools.
//!
//! Grammar (one item per line, fixed-point coefficients with 9 decimals):
//!
//! ```text
//! Maximize | Minimize
//!  obj: <term>*
//! Subject To
//!  c<i>: <term>* <= | >= | = <rhs>
//! Bounds
//!  <lower> <= x<j> <= <upper>        (inf / -inf for unbounded sides)
//! Binaries
//!  x<j>*                             (section omitted when empty)
//! End
//! ```
//!
//! `<term>` is `+<coef> x<j>` or `-<coef> x<j>`; variables are named by
//! their ordinal.

use std::io::{self, Write};

use crate::problem::{MilpProblem, ObjSense, Sense, VarKind};

pub fn write_lp<W: Write>(problem: &MilpProblem, w: &mut W) -> io::Result<()> {
    match problem.obj_sense {
        ObjSense::Maximize => writeln!(w, "Maximize")?,
        ObjSense::Minimize => writeln!(w, "Minimize")?,
    }
    write!(w, " obj:")?;
    write_terms(w, &problem.objective)?;
    writeln!(w)?;
    writeln!(w, "Subject To")?;
    for (i, c) in problem.constraints.iter().enumerate() {
        write!(w, " c{i}:")?;
        write_terms(w, &c.terms)?;
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        writeln!(w, " {op} {:.9}", c.rhs)?;
    }
    writeln!(w, "Bounds")?;
    for (j, v) in problem.variables.iter().enumerate() {
        writeln!(w, " {} <= x{j} <= {}", bound_str(v.lower), bound_str(v.upper))?;
    }
    let binaries: Vec<usize> = problem
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(j, _)| j)
        .collect();
    if !binaries.is_empty() {
        writeln!(w, "Binaries")?;
        write!(w, " ")?;
        for (k, j) in binaries.iter().enumerate() {
            if k > 0 {
                write!(w, " ")?;
            }
            write!(w, "x{j}")?;
        }
        writeln!(w)?;
    }
    writeln!(w, "End")
}

fn bound_str(b: f64) -> String {
    if b == f64::INFINITY {
        "inf".to_string()
    } else if b == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{b:.9}")
    }
}

fn write_terms<W: Write>(w: &mut W, terms: &[(usize, f64)]) -> io::Result<()> {
    for &(j, c) in terms {
        if c >= 0.0 {
            write!(w, " +{c:.9} x{j}")?;
        } else {
            write!(w, " -{:.9} x{j}", -c)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{LinearConstraint, VariableDef};

    #[test]
    fn dump_layout() {
        let mut p = MilpProblem::new(ObjSense::Maximize);
        let x = p.add_var(VariableDef::continuous(0.0, f64::INFINITY));
        let z = p.add_var(VariableDef::binary());
        p.add_constraint(LinearConstraint::new(vec![(x, 1.0), (z, -2.5)], Sense::Le, 4.0));
        p.objective = vec![(x, 3.0)];
        let mut buf = Vec::new();
        write_lp(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("Maximize\n obj: +3.000000000 x0\n"));
        assert!(text.contains(" c0: +1.000000000 x0 -2.500000000 x1 <= 4.000000000\n"));
        assert!(text.contains("Bounds\n 0.000000000 <= x0 <= inf\n"));
        assert!(text.contains("Binaries\n x1\n"));
        assert!(text.ends_with("End\n"));
    }
}
