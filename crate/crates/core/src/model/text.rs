//! Line-oriented text format for [`ConicModel`].
//!
//! ```text
//! CONIC 1
//! DIMS <n> <p> <q>
//! OBJ
//! <n values>
//! EQ_MATRIX DENSE            (p rows of n values)
//! EQ_MATRIX COO <nnz>        (nnz lines "row col value", 0-based)
//! EQ_RHS
//! <p values>
//! CONE_MATRIX DENSE | COO <nnz>
//! CONE_RHS
//! <q values>
//! CONES <K>
//! CONE <tag> <primal|dual> <params>
//! ...
//! END
//! ```
//!
//! Cone parameters: `nonneg d`, `psd side`, `linf d`, `l2 d`, `sqr d`,
//! `gpower r s α_1..α_r`, `power d α_1..α_d`, `geomean d`, `log d`,
//! `lmi d side` followed by `d` blocks `MAT side side` + rows, and
//! `wsosdual points r` followed by `r` blocks `MAT points s_l` + rows.
//! Values are written with 17 significant digits so that a round trip is
//! exact. `#` starts a comment.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::{build_model, ConicModel, ModelError};
use crate::cones::{ConeDescriptor, ConeKind};

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_values(out: &mut String, vals: impl IntoIterator<Item = f64>) {
    let mut first = true;
    let mut count = 0;
    for v in vals {
        if !first {
            out.push(if count % 8 == 0 { '\n' } else { ' ' });
        }
        out.push_str(&num(v));
        first = false;
        count += 1;
    }
    out.push('\n');
}

fn write_matrix(out: &mut String, header: &str, m: &DMatrix<f64>) {
    let nnz = m.iter().filter(|x| **x != 0.0).count();
    if m.nrows() > 0 && m.ncols() > 0 && 2 * nnz < m.len() {
        let _ = writeln!(out, "{header} COO {nnz}");
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    let _ = writeln!(out, "{i} {j} {}", num(m[(i, j)]));
                }
            }
        }
    } else {
        let _ = writeln!(out, "{header} DENSE");
        write_rows(out, m);
    }
}

fn write_rows(out: &mut String, m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| num(*v)).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

fn cone_line(cone: &ConeDescriptor) -> String {
    let side = if cone.use_dual() { "dual" } else { "primal" };
    let params = match cone.kind() {
        ConeKind::Nonneg { dim }
        | ConeKind::LinfEpi { dim }
        | ConeKind::L2Epi { dim }
        | ConeKind::SqrEpi { dim }
        | ConeKind::GeoMean { dim }
        | ConeKind::LogPersp { dim } => dim.to_string(),
        ConeKind::PsdSvec { side } => side.to_string(),
        ConeKind::GenPower { alpha, dim_w } => {
            let a: Vec<String> = alpha.iter().map(|x| num(*x)).collect();
            format!("{} {} {}", alpha.len(), dim_w, a.join(" "))
        }
        ConeKind::PowerMean { alpha } => {
            let a: Vec<String> = alpha.iter().map(|x| num(*x)).collect();
            format!("{} {}", alpha.len(), a.join(" "))
        }
        ConeKind::Lmi { mats } => format!("{} {}", mats.len(), mats[0].nrows()),
        ConeKind::WsosDualScalar { points, mats } => format!("{} {}", points, mats.len()),
    };
    format!("CONE {} {} {}", cone.tag(), side, params)
}

/// Writes `model` in the text format.
pub fn serialize(model: &ConicModel) -> String {
    let mut out = String::new();
    out.push_str("CONIC 1\n");
    let _ = writeln!(out, "DIMS {} {} {}", model.n(), model.p(), model.q());
    out.push_str("OBJ\n");
    write_values(&mut out, model.c().iter().copied());
    write_matrix(&mut out, "EQ_MATRIX", model.a());
    out.push_str("EQ_RHS\n");
    write_values(&mut out, model.b().iter().copied());
    write_matrix(&mut out, "CONE_MATRIX", model.g());
    out.push_str("CONE_RHS\n");
    write_values(&mut out, model.h().iter().copied());
    let _ = writeln!(out, "CONES {}", model.cones().len());
    for cone in model.cones() {
        out.push_str(&cone_line(cone));
        out.push('\n');
        match cone.kind() {
            ConeKind::Lmi { mats } | ConeKind::WsosDualScalar { mats, .. } => {
                for m in mats {
                    let _ = writeln!(out, "MAT {} {}", m.nrows(), m.ncols());
                    write_rows(&mut out, m);
                }
            }
            _ => {}
        }
    }
    out.push_str("END\n");
    out
}

struct Tokens<'a> {
    toks: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut toks = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("");
            toks.extend(line.split_whitespace().map(|t| (i + 1, t)));
        }
        Tokens { toks, pos: 0 }
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos).or(self.toks.last()).map_or(0, |t| t.0)
    }

    fn err(&self, msg: impl Into<String>) -> ModelError {
        ModelError::Parse { line: self.line(), msg: msg.into() }
    }

    fn next(&mut self, what: &str) -> Result<&'a str, ModelError> {
        let t = self.toks.get(self.pos).ok_or_else(|| self.err(format!("unexpected end of input, expected {what}")))?;
        self.pos += 1;
        Ok(t.1)
    }

    fn expect(&mut self, kw: &str) -> Result<(), ModelError> {
        let line = self.line();
        let t = self.next(kw)?;
        if t == kw {
            Ok(())
        } else {
            Err(ModelError::Parse { line, msg: format!("expected `{kw}`, found `{t}`") })
        }
    }

    fn usize(&mut self, what: &str) -> Result<usize, ModelError> {
        let line = self.line();
        let t = self.next(what)?;
        t.parse().map_err(|_| ModelError::Parse { line, msg: format!("invalid {what} `{t}`") })
    }

    fn f64(&mut self, what: &str) -> Result<f64, ModelError> {
        let line = self.line();
        let t = self.next(what)?;
        match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(ModelError::Parse { line, msg: format!("invalid {what} `{t}`") }),
        }
    }

    fn values(&mut self, k: usize, what: &str) -> Result<Vec<f64>, ModelError> {
        (0..k).map(|_| self.f64(what)).collect()
    }

    fn dense(&mut self, rows: usize, cols: usize, what: &str) -> Result<DMatrix<f64>, ModelError> {
        let v = self.values(rows * cols, what)?;
        Ok(DMatrix::from_row_slice(rows, cols, &v))
    }

    fn matrix(&mut self, header: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>, ModelError> {
        self.expect(header)?;
        let line = self.line();
        match self.next("matrix encoding")? {
            "DENSE" => self.dense(rows, cols, "matrix entry"),
            "COO" => {
                let nnz = self.usize("nonzero count")?;
                let mut m = DMatrix::zeros(rows, cols);
                for _ in 0..nnz {
                    let line = self.line();
                    let i = self.usize("row index")?;
                    let j = self.usize("column index")?;
                    let v = self.f64("matrix entry")?;
                    if i >= rows || j >= cols {
                        return Err(ModelError::Parse {
                            line,
                            msg: format!("{header} entry ({i}, {j}) outside {rows}×{cols}"),
                        });
                    }
                    m[(i, j)] = v;
                }
                Ok(m)
            }
            other => Err(ModelError::Parse { line, msg: format!("unknown matrix encoding `{other}`") }),
        }
    }

    fn mat_block(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>, ModelError> {
        self.expect("MAT")?;
        let line = self.line();
        let (r, c) = (self.usize("MAT rows")?, self.usize("MAT cols")?);
        if (r, c) != (rows, cols) {
            return Err(ModelError::Parse { line, msg: format!("MAT block is {r}×{c}, expected {rows}×{cols}") });
        }
        self.dense(r, c, "MAT entry")
    }

    fn mat_block_rows(&mut self, rows: usize) -> Result<DMatrix<f64>, ModelError> {
        self.expect("MAT")?;
        let line = self.line();
        let (r, c) = (self.usize("MAT rows")?, self.usize("MAT cols")?);
        if r != rows {
            return Err(ModelError::Parse { line, msg: format!("MAT block has {r} rows, expected {rows}") });
        }
        self.dense(r, c, "MAT entry")
    }

    fn cone(&mut self) -> Result<ConeDescriptor, ModelError> {
        self.expect("CONE")?;
        let line = self.line();
        let tag = self.next("cone tag")?;
        let side_line = self.line();
        let dual = match self.next("primal|dual")? {
            "primal" => false,
            "dual" => true,
            other => {
                return Err(ModelError::Parse { line: side_line, msg: format!("expected primal or dual, found `{other}`") })
            }
        };
        let wrap = |r: Result<ConeDescriptor, crate::cones::ConeError>| {
            r.map_err(|e| ModelError::Parse { line, msg: format!("cone `{tag}`: {e}") })
        };
        let cone = match tag {
            "nonneg" => wrap(ConeDescriptor::nonneg(self.usize("dimension")?))?,
            "psd" => wrap(ConeDescriptor::psd(self.usize("side")?))?,
            "linf" => wrap(ConeDescriptor::linf(self.usize("dimension")?))?,
            "l2" => wrap(ConeDescriptor::l2(self.usize("dimension")?))?,
            "sqr" => wrap(ConeDescriptor::sqr(self.usize("dimension")?))?,
            "geomean" => wrap(ConeDescriptor::geo_mean(self.usize("dimension")?))?,
            "log" => wrap(ConeDescriptor::log_persp(self.usize("dimension")?))?,
            "gpower" => {
                let r = self.usize("exponent count")?;
                let s = self.usize("dimension")?;
                let alpha = self.values(r, "exponent")?;
                wrap(ConeDescriptor::gen_power(alpha, s))?
            }
            "power" => {
                let d = self.usize("exponent count")?;
                let alpha = self.values(d, "exponent")?;
                wrap(ConeDescriptor::power_mean(alpha))?
            }
            "lmi" => {
                let d = self.usize("matrix count")?;
                let side = self.usize("side")?;
                let mats = (0..d).map(|_| self.mat_block(side, side)).collect::<Result<Vec<_>, _>>()?;
                wrap(ConeDescriptor::lmi(mats))?
            }
            "wsosdual" => {
                let points = self.usize("point count")?;
                let r = self.usize("matrix count")?;
                let mats = (0..r).map(|_| self.mat_block_rows(points)).collect::<Result<Vec<_>, _>>()?;
                wrap(ConeDescriptor::wsos_dual(mats))?
            }
            other => return Err(ModelError::Parse { line, msg: format!("unknown cone tag `{other}`") }),
        };
        Ok(cone.with_dual(dual))
    }
}

/// Parses the text format.
pub fn deserialize(text: &str) -> Result<ConicModel, ModelError> {
    let mut t = Tokens::new(text);
    t.expect("CONIC")?;
    let line = t.line();
    let version = t.usize("format version")?;
    if version != 1 {
        return Err(ModelError::Parse { line, msg: format!("unsupported format version {version}") });
    }
    t.expect("DIMS")?;
    let n = t.usize("n")?;
    let p = t.usize("p")?;
    let q = t.usize("q")?;
    t.expect("OBJ")?;
    let c = t.values(n, "objective entry")?;
    let a = t.matrix("EQ_MATRIX", p, n)?;
    t.expect("EQ_RHS")?;
    let b = t.values(p, "equality rhs entry")?;
    let g = t.matrix("CONE_MATRIX", q, n)?;
    t.expect("CONE_RHS")?;
    let h = t.values(q, "cone rhs entry")?;
    t.expect("CONES")?;
    let k = t.usize("cone count")?;
    let cones = (0..k).map(|_| t.cone()).collect::<Result<Vec<_>, _>>()?;
    t.expect("END")?;
    if t.pos < t.toks.len() {
        return Err(t.err(format!("trailing input `{}`", t.toks[t.pos].1)));
    }
    let line = t.line();
    build_model(
        DVector::from_vec(c),
        a,
        DVector::from_vec(b),
        g,
        DVector::from_vec(h),
        cones,
    )
    .map_err(|e| match e {
        ModelError::Parse { .. } => e,
        other => ModelError::Parse { line, msg: other.to_string() },
    })
}
