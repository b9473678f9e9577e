use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use bdshift_core::algebra::{matrix_units, mult_defect, to_matrix_form};
use bdshift_core::derivations::{
    classify, d_f_build, d_f_images, extract_f, fejer_mean, fejer_weight, fourier_component, fourier_of_image,
    quotient_derivation, regime,
};
use bdshift_core::gns::{
    build_d, check_covariance, check_implementation, expectation, parametrix_report, tau0, tau_haar, theta_grid,
    GNSVector0, GNSVectorHaar, GnsState, ImplementationCase, ImplementationData,
};
use bdshift_core::numerics::{
    dump_csv, largest_singular_value, norm_lower, quotient_norm_estimate, truncate_bilateral, truncate_bilateral_exact,
    truncate_unilateral_exact, ExactMatrix,
};
use bdshift_core::profinite::SupernaturalNumber;
use clap::ValueEnum;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::eval::{parse_and_eval, Element, Side};
use crate::parse::format_unilateral;
use crate::workspace::Workspace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Normalize,
    Mul,
    Comm,
    Derive,
    Fourier,
    Fejer,
    Classify,
    ExtractF,
    DfBuild,
    Toeplitz,
    Defect,
    MatrixForm,
    Units,
    GnsRep,
    GnsD,
    Covcheck,
    Parametrix,
    Truncate,
    Normest,
    Qnorm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StateArg {
    Tau0,
    Haar,
}

impl From<StateArg> for GnsState {
    fn from(s: StateArg) -> Self {
        match s {
            StateArg::Tau0 => GnsState::Tau0,
            StateArg::Haar => GnsState::Haar,
        }
    }
}

/// Everything a command may read besides the workspace.
#[derive(Clone, Debug, Default)]
pub struct Args {
    pub n: Option<i64>,
    pub m: Option<usize>,
    pub name: Option<String>,
    pub psi: Option<String>,
    pub side: Option<Side>,
    pub state: Option<StateArg>,
    pub out: Option<PathBuf>,
    pub exprs: Vec<String>,
}

/// JSON for stdout plus an optional CSV matrix for `--out`.
pub struct Output {
    pub json: Value,
    pub csv: Option<String>,
}

impl Output {
    fn json(json: Value) -> Self {
        Output { json, csv: None }
    }

    pub fn write_out(&self, path: &PathBuf) -> Result<(), CliError> {
        let body = match &self.csv {
            Some(csv) => csv.clone(),
            None => serde_json::to_string_pretty(&self.json).expect("serializable") + "\n",
        };
        fs::write(path, body).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
    }
}

fn to_json<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable")
}

impl Args {
    fn exprs(&self, count: usize) -> Result<&[String], CliError> {
        if self.exprs.len() != count {
            return Err(CliError::Usage(format!("expected {count} expression(s), got {}", self.exprs.len())));
        }
        Ok(&self.exprs)
    }

    fn optional_expr(&self) -> Result<Option<&str>, CliError> {
        match self.exprs.len() {
            0 => Ok(None),
            1 => Ok(Some(&self.exprs[0])),
            k => Err(CliError::Usage(format!("expected at most one expression, got {k}"))),
        }
    }

    fn name(&self) -> Result<&str, CliError> {
        self.name.as_deref().ok_or_else(|| CliError::Usage("--name is required".into()))
    }

    fn n(&self) -> Result<i64, CliError> {
        self.n.ok_or_else(|| CliError::Usage("--n is required".into()))
    }

    fn m(&self, default: usize) -> usize {
        self.m.unwrap_or(default)
    }
}

fn element(text: &str, ws: &Workspace, side: Option<Side>) -> Result<Element, CliError> {
    parse_and_eval(text, ws, side)
}

fn pair(args: &Args, ws: &Workspace) -> Result<(Element, Element), CliError> {
    let e = args.exprs(2)?;
    let x = element(&e[0], ws, args.side)?;
    let y = element(&e[1], ws, Some(args.side.unwrap_or(x.side())))?;
    Ok((x, y))
}

fn binary(args: &Args, ws: &Workspace, op: &str) -> Result<Output, CliError> {
    let (x, y) = pair(args, ws)?;
    let r = match (&x, &y) {
        (Element::Uni(a), Element::Uni(b)) if op == "mul" => Element::Uni(a.multiply(b)),
        (Element::Uni(a), Element::Uni(b)) => Element::Uni(a.commutator(b)),
        (Element::Bi(a), Element::Bi(b)) if op == "mul" => Element::Bi(a.multiply(b)),
        (Element::Bi(a), Element::Bi(b)) => Element::Bi(a.commutator(b)),
        _ => unreachable!("both operands are evaluated on one side"),
    };
    Ok(Output::json(json!({ "lhs": x.format(), "rhs": y.format(), "result": r.to_json() })))
}

fn unilateral_input(args: &Args, ws: &Workspace) -> Result<Element, CliError> {
    let e = args.exprs(1)?;
    element(&e[0], ws, Some(Side::Unilateral))
}

fn bilateral_input(args: &Args, ws: &Workspace) -> Result<bdshift_core::algebra::BilateralElement, CliError> {
    let e = args.exprs(1)?;
    element(&e[0], ws, Some(Side::Bilateral))?.bilateral()
}

fn case_name(case: &ImplementationCase) -> &'static str {
    match case {
        ImplementationCase::Bounded { .. } => "bounded",
        ImplementationCase::InfiniteZero { .. } => "infinite_zero",
        ImplementationCase::FiniteDivisible { .. } => "finite_divisible",
    }
}

/// Component `n` of the quotient of the named derivation, with optional `psi`.
fn implementation(args: &Args, ws: &Workspace) -> Result<ImplementationData, CliError> {
    let d = ws.derivation(args.name()?)?;
    let n = args.n()?;
    let delta = quotient_derivation(d)?;
    let mut data = ImplementationData::from_covariant(&delta.component(n))?;
    if let Some(psi) = &args.psi {
        let f = ws.function(psi).unwrap_or_else(|| Err(CliError::Parse(format!("unknown function `{psi}`"))))?;
        data = data.with_psi(f)?;
    }
    Ok(data)
}

fn exact_entries(m: &ExactMatrix) -> Value {
    let mut entries = Vec::new();
    for i in 0..m.rows() {
        for (j, v) in m.row(i) {
            entries.push(json!([i, j, v]));
        }
    }
    Value::Array(entries)
}

fn units_json(big_n: &SupernaturalNumber) -> Result<Value, CliError> {
    let units = matrix_units(big_n)?;
    let text: Vec<Vec<String>> =
        units.iter().map(|row| row.iter().map(crate::parse::format_bilateral).collect()).collect();
    Ok(json!({ "N": big_n, "units": text }))
}

pub fn run(cmd: Command, args: &Args, ws: &Workspace) -> Result<Output, CliError> {
    match cmd {
        Command::Normalize => {
            let e = args.exprs(1)?;
            Ok(Output::json(element(&e[0], ws, args.side)?.to_json()))
        }
        Command::Mul => binary(args, ws, "mul"),
        Command::Comm => binary(args, ws, "comm"),
        Command::Derive => {
            let name = args.name()?;
            let d = ws.derivation(name)?;
            let a = unilateral_input(args, ws)?;
            let image = d.apply(&a.clone().unilateral()?)?;
            Ok(Output::json(json!({ "derivation": name, "input": a.format(), "result": Element::Uni(image).to_json() })))
        }
        Command::Fourier => {
            let d = ws.derivation(args.name()?)?;
            let n = args.n()?;
            let comp = fourier_component(d, n);
            let mut out = json!({ "n": n, "regime": regime(n, &ws.big_n), "component": to_json(&comp) });
            if let Some(text) = args.optional_expr()? {
                let a = element(text, ws, Some(Side::Unilateral))?.unilateral()?;
                let image = fourier_of_image(d, &a, n)?;
                out["matches_component"] = Value::Bool(image == comp.apply(&a)?);
                out["image"] = Element::Uni(image).to_json();
            }
            Ok(Output::json(out))
        }
        Command::Fejer => {
            let d = ws.derivation(args.name()?)?;
            let m = args.m(8) as u64;
            let mean = fejer_mean(d, m);
            let weights: BTreeMap<String, Value> =
                d.components().keys().map(|n| (n.to_string(), to_json(&fejer_weight(*n, m)))).collect();
            let mut out = json!({ "M": m, "weights": weights, "derivation": to_json(&mean) });
            if let Some(text) = args.optional_expr()? {
                let a = element(text, ws, Some(Side::Unilateral))?.unilateral()?;
                out["image"] = Element::Uni(mean.apply(&a)?).to_json();
            }
            Ok(Output::json(out))
        }
        Command::Classify => {
            let d = ws.derivation(args.name()?)?;
            let comp = fourier_component(d, args.n()?);
            let c = classify(&comp)?;
            let mut out = to_json(&c);
            out["n"] = json!(comp.n);
            out["reassembles"] = Value::Bool(c.reassemble() == comp);
            Ok(Output::json(out))
        }
        Command::ExtractF => {
            let d = ws.derivation(args.name()?)?;
            Ok(Output::json(json!({ "f": to_json(&extract_f(d)?) })))
        }
        Command::DfBuild => {
            let f = ws.laurent_function(args.name()?)?;
            let d = d_f_build(f, &ws.big_n)?;
            let img = d_f_images(f, &ws.big_n)?;
            Ok(Output::json(json!({
                "derivation": to_json(&d),
                "d_U": format_unilateral(&img.d_u),
                "d_Us": format_unilateral(&img.d_us),
            })))
        }
        Command::Toeplitz => {
            let b = bilateral_input(args, ws)?;
            Ok(Output::json(json!({ "input": Element::Bi(b.clone()).format(), "result": Element::Uni(b.toeplitz()).to_json() })))
        }
        Command::Defect => {
            let e = args.exprs(2)?;
            let x = element(&e[0], ws, Some(Side::Bilateral))?.bilateral()?;
            let y = element(&e[1], ws, Some(Side::Bilateral))?.bilateral()?;
            Ok(Output::json(json!({ "result": Element::Uni(mult_defect(&x, &y)).to_json() })))
        }
        Command::MatrixForm => {
            let b = bilateral_input(args, ws)?;
            Ok(Output::json(json!({ "N": ws.big_n, "matrix_form": to_json(&to_matrix_form(&b, &ws.big_n)?) })))
        }
        Command::Units => Ok(Output::json(units_json(&ws.big_n)?)),
        Command::GnsRep => {
            let b = bilateral_input(args, ws)?;
            let needed = b.terms().values().fold(1u64, |acc, f| num_integer::lcm(acc, f.period()));
            let level = match (ws.big_n.value(), &ws.chain) {
                (Some(v), _) => v,
                (None, Some(chain)) => chain.levels().iter().copied().find(|j| j % needed == 0).unwrap_or(needed),
                (None, None) => needed,
            };
            let v0 = GNSVector0::of_element(&b);
            let vh = GNSVectorHaar::of_element(&b, level)?;
            let haar: Vec<Value> = vh.coords().iter().map(|((m, x), v)| json!([m, x, v])).collect();
            let zero: BTreeMap<String, Value> = v0.coords().iter().map(|(l, v)| (l.to_string(), to_json(v))).collect();
            Ok(Output::json(json!({
                "tau0": tau0(&b),
                "tau_haar": tau_haar(&b),
                "expectation": to_json(&expectation(&b)),
                "vector0": zero,
                "level": level,
                "vector_haar": haar,
            })))
        }
        Command::GnsD => {
            let data = implementation(args, ws)?;
            let state: GnsState = args.state.unwrap_or(StateArg::Tau0).into();
            let mat = build_d(state, &data, args.m(16))?;
            let nonzeros: usize = (0..mat.dim()).map(|i| mat.exact.row(i).len()).sum();
            let json = json!({
                "state": state,
                "n": data.n,
                "case": case_name(&data.case),
                "window": mat.window,
                "level": mat.level,
                "dim": mat.dim(),
                "nonzeros": nonzeros,
                "predicate": data.predicate(state),
                "entries": exact_entries(&mat.exact),
            });
            let csv = args.out.as_ref().map(|_| dump_csv(&mat.dense()));
            Ok(Output { json, csv })
        }
        Command::Covcheck => {
            let data = implementation(args, ws)?;
            let state: GnsState = args.state.unwrap_or(StateArg::Tau0).into();
            let mat = build_d(state, &data, args.m(16))?;
            let grid = theta_grid(16);
            let residual = check_covariance(&mat.dense(), &mat.coordinates(), data.n, &grid);
            let mut out = json!({ "state": state, "n": data.n, "window": mat.window, "level": mat.level, "grid": grid.len(), "residual": residual });
            if let Some(text) = args.optional_expr()? {
                let b = element(text, ws, Some(Side::Bilateral))?.bilateral()?;
                let single = data.derivation()?;
                out["implementation"] = to_json(&check_implementation(state, &mat, &single, &b)?);
            }
            Ok(Output::json(out))
        }
        Command::Parametrix => {
            let data = implementation(args, ws)?;
            let state: GnsState = args.state.unwrap_or(StateArg::Tau0).into();
            let m = args.m(64);
            let report = parametrix_report(state, &data, &[m, 2 * m, 4 * m]);
            let mut out = to_json(&report);
            out["agrees"] = Value::Bool(report.agrees());
            Ok(Output::json(out))
        }
        Command::Truncate => {
            let e = args.exprs(1)?;
            let m = args.m(16);
            let x = element(&e[0], ws, args.side)?;
            let mat = match &x {
                Element::Uni(a) => truncate_unilateral_exact(a, m),
                Element::Bi(b) => truncate_bilateral_exact(b, m),
            };
            let json = json!({
                "side": x.side().name(),
                "M": m,
                "rows": mat.rows(),
                "cols": mat.cols(),
                "entries": exact_entries(&mat),
            });
            let csv = args.out.as_ref().map(|_| dump_csv(&mat.to_dense()));
            Ok(Output { json, csv })
        }
        Command::Normest => {
            let e = args.exprs(1)?;
            let m = args.m(64);
            let x = element(&e[0], ws, args.side)?;
            let est = match &x {
                Element::Uni(a) => norm_lower(a, m)?,
                Element::Bi(b) => largest_singular_value(&truncate_bilateral(b, m))?,
            };
            Ok(Output::json(json!({ "side": x.side().name(), "M": m, "norm_lower": est })))
        }
        Command::Qnorm => {
            let e = args.exprs(1)?;
            let b = match element(&e[0], ws, args.side)? {
                Element::Uni(a) => a.quotient(),
                Element::Bi(b) => b,
            };
            let report = quotient_norm_estimate(&b, &ws.big_n, args.m(64))?;
            Ok(Output::json(json!({ "grid": args.m(64), "report": to_json(&report) })))
        }
    }
}
