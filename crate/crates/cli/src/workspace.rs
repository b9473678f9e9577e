//! JSON workspace: `N`, an optional divisor chain and named data.
//!
//! ```json
//! {
//!   "N": "2^inf*3",
//!   "chain": [1, 2, 6, 12],
//!   "sequences": { "a": { "correction": {"0": [1,1,0,1]}, "period": 2, "table": [...] } },
//!   "functions": { "b": { "period": 2, "values": [...] } },
//!   "derivations": { "d": { "components": { "1": { "linear": ..., "period": 1, "table": [...] } } } },
//!   "laurent": { "f": { "1": [1,1,0,1] } }
//! }
//! ```
//! `N` may be an integer, a product string like `"2^inf*3"`, or `{"factors": {...}}`.
//! Derivations inherit `N` from the workspace unless they carry their own.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use bdshift_core::derivations::{DerivationSum, LaurentFunction};
use bdshift_core::profinite::{DivisorChain, Exponent, LocallyConstantFunction, SupernaturalNumber};
use bdshift_core::sequences::EPSequence;
use serde::Deserialize;
use serde_json::Value;

use crate::error::CliError;

#[derive(Clone, Debug)]
pub struct Workspace {
    pub big_n: SupernaturalNumber,
    pub chain: Option<DivisorChain>,
    pub sequences: BTreeMap<String, EPSequence>,
    pub functions: BTreeMap<String, LocallyConstantFunction>,
    pub derivations: BTreeMap<String, DerivationSum>,
    pub laurent: BTreeMap<String, LaurentFunction>,
}

impl Default for Workspace {
    fn default() -> Self {
        Workspace {
            big_n: SupernaturalNumber::one(),
            chain: None,
            sequences: BTreeMap::new(),
            functions: BTreeMap::new(),
            derivations: BTreeMap::new(),
            laurent: BTreeMap::new(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    #[serde(rename = "N", default)]
    big_n: Option<Value>,
    #[serde(default)]
    chain: Option<Vec<u64>>,
    #[serde(default)]
    sequences: BTreeMap<String, EPSequence>,
    #[serde(default)]
    functions: BTreeMap<String, LocallyConstantFunction>,
    #[serde(default)]
    derivations: BTreeMap<String, Value>,
    #[serde(default)]
    laurent: BTreeMap<String, LaurentFunction>,
}

/// `"2^inf*3^2*5"`, `"6"` or `"1"`.
pub fn parse_supernatural(text: &str) -> Result<SupernaturalNumber, CliError> {
    let bad = || CliError::Domain(format!("invalid supernatural number `{text}`"));
    let mut factors: BTreeMap<u64, Exponent> = BTreeMap::new();
    let mut put = |p: u64, e: Exponent| {
        let merged = match (factors.get(&p), e) {
            (Some(Exponent::Finite(a)), Exponent::Finite(b)) => Exponent::Finite(a + b),
            (_, e) if factors.get(&p).is_none() => e,
            _ => Exponent::Infinite,
        };
        factors.insert(p, merged);
    };
    for part in text.split('*').map(str::trim) {
        let (base, exp) = match part.split_once('^') {
            Some((b, e)) => (b.trim(), Some(e.trim())),
            None => (part, None),
        };
        let base: u64 = base.parse().map_err(|_| bad())?;
        match exp {
            None => {
                for (p, k) in bdshift_core::profinite::factorize(base) {
                    put(p, Exponent::Finite(k));
                }
            }
            Some("inf") | Some("infinity") => put(base, Exponent::Infinite),
            Some(e) => {
                let k: u32 = e.parse().map_err(|_| bad())?;
                for (p, j) in bdshift_core::profinite::factorize(base) {
                    put(p, Exponent::Finite(j * k));
                }
            }
        }
    }
    Ok(SupernaturalNumber::from_factors(factors)?)
}

fn supernatural_from_json(v: &Value) -> Result<SupernaturalNumber, CliError> {
    match v {
        Value::Number(n) => {
            let k = n.as_u64().filter(|k| *k > 0).ok_or_else(|| CliError::Domain(format!("N must be a positive integer, got {n}")))?;
            Ok(SupernaturalNumber::finite(k))
        }
        Value::String(s) => parse_supernatural(s),
        other => serde_json::from_value(other.clone()).map_err(|e| CliError::Domain(format!("invalid N: {e}"))),
    }
}

impl Workspace {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let raw: Raw = serde_json::from_str(text).map_err(|e| CliError::Parse(format!("workspace: {e}")))?;
        let big_n = match &raw.big_n {
            Some(v) => supernatural_from_json(v)?,
            None => SupernaturalNumber::one(),
        };
        let chain = raw.chain.map(|levels| DivisorChain::new(levels, &big_n)).transpose()?;
        let mut derivations = BTreeMap::new();
        for (name, mut v) in raw.derivations {
            if let Value::Object(map) = &mut v {
                map.entry("N").or_insert_with(|| serde_json::to_value(&big_n).expect("serializable"));
            }
            let d: DerivationSum =
                serde_json::from_value(v).map_err(|e| CliError::Domain(format!("derivation `{name}`: {e}")))?;
            if d.big_n() != &big_n {
                return Err(CliError::Domain(format!("derivation `{name}` is over N = {}, workspace has N = {big_n}", d.big_n())));
            }
            derivations.insert(name, d);
        }
        for (name, a) in &raw.sequences {
            a.check_divides(&big_n).map_err(|e| CliError::Domain(format!("sequence `{name}`: {e}")))?;
        }
        for (name, f) in &raw.functions {
            f.check_divides(&big_n).map_err(|e| CliError::Domain(format!("function `{name}`: {e}")))?;
        }
        Ok(Workspace { big_n, chain, sequences: raw.sequences, functions: raw.functions, derivations, laurent: raw.laurent })
    }

    pub fn knows(&self, name: &str) -> bool {
        self.sequences.contains_key(name) || self.functions.contains_key(name)
    }

    pub fn sequence(&self, name: &str) -> Option<EPSequence> {
        self.sequences
            .get(name)
            .cloned()
            .or_else(|| self.functions.get(name).map(EPSequence::from_lcf))
    }

    /// Functions first, then sequences without finite correction.
    pub fn function(&self, name: &str) -> Option<Result<LocallyConstantFunction, CliError>> {
        if let Some(f) = self.functions.get(name) {
            return Some(Ok(f.clone()));
        }
        self.sequences.get(name).map(|a| {
            if a.correction().is_empty() {
                Ok(a.periodic_part())
            } else {
                Err(CliError::Domain(format!("sequence `{name}` has a finite correction and is not bilateral")))
            }
        })
    }

    pub fn derivation(&self, name: &str) -> Result<&DerivationSum, CliError> {
        self.derivations.get(name).ok_or_else(|| CliError::Parse(format!("unknown derivation `{name}`")))
    }

    pub fn laurent_function(&self, name: &str) -> Result<&LaurentFunction, CliError> {
        self.laurent.get(name).ok_or_else(|| CliError::Parse(format!("unknown Laurent function `{name}`")))
    }
}
