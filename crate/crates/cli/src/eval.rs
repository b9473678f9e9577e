use bdshift_core::algebra::{BilateralElement, Coefficient, Graded, UnilateralElement};
use bdshift_core::profinite::LocallyConstantFunction;
use bdshift_core::sequences::EPSequence;
use bdshift_core::Scalar;
use clap::ValueEnum;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::parse::{format_bilateral, format_unilateral, parse_with, Expr};
use crate::workspace::Workspace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Side {
    Unilateral,
    Bilateral,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Unilateral => "unilateral",
            Side::Bilateral => "bilateral",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Element {
    Uni(UnilateralElement),
    Bi(BilateralElement),
}

impl Element {
    pub fn side(&self) -> Side {
        match self {
            Element::Uni(_) => Side::Unilateral,
            Element::Bi(_) => Side::Bilateral,
        }
    }

    pub fn format(&self) -> String {
        match self {
            Element::Uni(a) => format_unilateral(a),
            Element::Bi(b) => format_bilateral(b),
        }
    }

    pub fn to_json(&self) -> Value {
        let (elem, compact) = match self {
            Element::Uni(a) => (serde_json::to_value(a).expect("serializable"), Value::Bool(a.is_compact())),
            Element::Bi(b) => (serde_json::to_value(b).expect("serializable"), Value::Null),
        };
        let mut v = json!({ "side": self.side().name(), "normal_form": self.format(), "element": elem });
        if !compact.is_null() {
            v["compact"] = compact;
        }
        v
    }

    pub fn unilateral(self) -> Result<UnilateralElement, CliError> {
        match self {
            Element::Uni(a) => Ok(a),
            Element::Bi(_) => Err(side_mismatch("a unilateral element is required here")),
        }
    }

    pub fn bilateral(self) -> Result<BilateralElement, CliError> {
        match self {
            Element::Bi(b) => Ok(b),
            Element::Uni(_) => Err(side_mismatch("a bilateral element is required here")),
        }
    }
}

fn side_mismatch(msg: &str) -> CliError {
    CliError::Parse(format!("side mismatch: {msg}"))
}

trait Atoms<C: Coefficient> {
    fn generator(&self, e: &Expr) -> Result<Graded<C>, CliError>;
    fn scalar(&self, s: &Scalar) -> Graded<C>;
    fn named(&self, name: &str) -> Result<C, CliError>;
    fn literal(&self, correction: &std::collections::BTreeMap<u64, Scalar>, table: &[Scalar]) -> Result<C, CliError>;
}

struct UniAtoms<'a>(&'a Workspace);
struct BiAtoms<'a>(&'a Workspace);

impl Atoms<EPSequence> for UniAtoms<'_> {
    fn generator(&self, e: &Expr) -> Result<UnilateralElement, CliError> {
        match e {
            Expr::U => Ok(UnilateralElement::u()),
            Expr::Us => Ok(UnilateralElement::us()),
            _ => Err(side_mismatch("V and Vi are bilateral generators")),
        }
    }

    fn scalar(&self, s: &Scalar) -> UnilateralElement {
        UnilateralElement::scalar(s.clone())
    }

    fn named(&self, name: &str) -> Result<EPSequence, CliError> {
        self.0.sequence(name).ok_or_else(|| CliError::Parse(format!("unknown name `{name}`")))
    }

    fn literal(&self, correction: &std::collections::BTreeMap<u64, Scalar>, table: &[Scalar]) -> Result<EPSequence, CliError> {
        Ok(EPSequence::new(correction.clone(), table.to_vec()))
    }
}

impl Atoms<LocallyConstantFunction> for BiAtoms<'_> {
    fn generator(&self, e: &Expr) -> Result<BilateralElement, CliError> {
        match e {
            Expr::V => Ok(BilateralElement::v()),
            Expr::Vi => Ok(BilateralElement::vi()),
            _ => Err(side_mismatch("U and Us are unilateral generators")),
        }
    }

    fn scalar(&self, s: &Scalar) -> BilateralElement {
        BilateralElement::scalar(s.clone())
    }

    fn named(&self, name: &str) -> Result<LocallyConstantFunction, CliError> {
        self.0.function(name).unwrap_or_else(|| Err(CliError::Parse(format!("unknown name `{name}`"))))
    }

    fn literal(
        &self,
        correction: &std::collections::BTreeMap<u64, Scalar>,
        table: &[Scalar],
    ) -> Result<LocallyConstantFunction, CliError> {
        if !correction.is_empty() {
            return Err(CliError::Domain("bilateral coefficients carry no finite correction".into()));
        }
        Ok(LocallyConstantFunction::new(table.to_vec()))
    }
}

fn eval_graded<C: Coefficient, A: Atoms<C>>(e: &Expr, atoms: &A) -> Result<Graded<C>, CliError> {
    let rec = |x: &Expr| eval_graded(x, atoms);
    Ok(match e {
        Expr::Scalar(s) => atoms.scalar(s),
        Expr::Id => Graded::identity(),
        Expr::U | Expr::Us | Expr::V | Expr::Vi => atoms.generator(e)?,
        Expr::DiagName(name, _) => Graded::diag(atoms.named(name)?),
        Expr::DiagLit { correction, table } => Graded::diag(atoms.literal(correction, table)?),
        Expr::Add(a, b) => rec(a)?.add(&rec(b)?),
        Expr::Sub(a, b) => rec(a)?.sub(&rec(b)?),
        Expr::Mul(a, b) => rec(a)?.multiply(&rec(b)?),
        Expr::Neg(a) => rec(a)?.neg(),
        Expr::Pow(a, k) => rec(a)?.pow(*k),
        Expr::Comm(a, b) => rec(a)?.commutator(&rec(b)?),
        Expr::Adj(a) => rec(a)?.adjoint(),
    })
}

/// Evaluates on the requested side, or on the side implied by the generators used.
pub fn eval(e: &Expr, ws: &Workspace, side: Option<Side>) -> Result<Element, CliError> {
    let side = side.unwrap_or(if e.mentions_v() { Side::Bilateral } else { Side::Unilateral });
    match side {
        Side::Unilateral => {
            let a = eval_graded(e, &UniAtoms(ws))?;
            a.check_divides(&ws.big_n)?;
            Ok(Element::Uni(a))
        }
        Side::Bilateral => {
            let b = eval_graded(e, &BiAtoms(ws))?;
            b.check_divides(&ws.big_n)?;
            Ok(Element::Bi(b))
        }
    }
}

pub fn parse_and_eval(text: &str, ws: &Workspace, side: Option<Side>) -> Result<Element, CliError> {
    let e = parse_with(text, &|n| ws.knows(n))?;
    eval(&e, ws, side)
}
