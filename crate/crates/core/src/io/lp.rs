//! CPLEX LP text for a fitting model.

use std::fmt::Write as _;

use crate::formulation::{LinearModel, ModelDescription, VarType};

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn term(out: &mut String, first: bool, coef: f64, name: &str) {
    let sign = if coef < 0.0 {
        "-"
    } else if first {
        ""
    } else {
        "+"
    };
    let mag = coef.abs();
    let sep = if first && sign.is_empty() { "" } else { " " };
    if mag == 1.0 {
        let _ = write!(out, " {sign}{sep}{name}");
    } else {
        let _ = write!(out, " {sign}{sep}{} {name}", num(mag));
    }
}

/// Objective, rows, bounds and integrality in LP format.
pub fn write_lp(model: &ModelDescription) -> String {
    lp_text(&model.model)
}

pub fn lp_text(lp: &LinearModel) -> String {
    let mut out = String::from("\\ piecewise affine fitting model\nMinimize\n obj:");
    let mut first = true;
    for v in lp.vars.iter().filter(|v| v.cost != 0.0) {
        term(&mut out, first, v.cost, &v.name);
        first = false;
    }
    if first {
        out.push_str(" 0");
    }
    out.push_str("\nSubject To\n");
    for c in &lp.constraints {
        let mut body = String::new();
        for (k, &(col, coef)) in c.terms.iter().enumerate() {
            term(&mut body, k == 0, coef, &lp.vars[col].name);
        }
        if body.is_empty() {
            body.push_str(" 0");
        }
        if c.lower == c.upper {
            let _ = writeln!(out, " {}:{body} = {}", c.name, num(c.lower));
        } else {
            if c.lower.is_finite() {
                let suffix = if c.upper.is_finite() { "_lo" } else { "" };
                let _ = writeln!(out, " {}{suffix}:{body} >= {}", c.name, num(c.lower));
            }
            if c.upper.is_finite() {
                let suffix = if c.lower.is_finite() { "_hi" } else { "" };
                let _ = writeln!(out, " {}{suffix}:{body} <= {}", c.name, num(c.upper));
            }
        }
    }
    out.push_str("Bounds\n");
    for v in lp.vars.iter().filter(|v| v.var_type == VarType::Continuous) {
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {} free", v.name);
            }
            (true, true) => {
                let _ = writeln!(out, " {} <= {} <= {}", num(v.lower), v.name, num(v.upper));
            }
            (true, false) if v.lower == 0.0 => {}
            (true, false) => {
                let _ = writeln!(out, " {} >= {}", v.name, num(v.lower));
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {} <= {}", v.name, num(v.upper));
            }
        }
    }
    let bins: Vec<&str> = lp.vars.iter().filter(|v| v.var_type == VarType::Binary).map(|v| v.name.as_str()).collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for chunk in bins.chunks(8) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}
