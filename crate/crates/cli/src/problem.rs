//! TOML problem files.

use std::path::PathBuf;
use std::time::Duration;

use odeinv_core::hp::HybridProgram;
use odeinv_core::invariant::DischargeConfig;
use odeinv_core::semialg::{to_normal_form, Formula, NormalForm};
use odeinv_core::syntax::{parse_formula, parse_ode, parse_polynomial, parse_program};
use odeinv_core::{OdeSystem, Polynomial, VarTable};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub vars: Vec<String>,
    pub ode: Option<String>,
    /// Evolution domain formula; `true` when absent.
    pub domain: Option<String>,
    #[serde(default)]
    pub candidates: Vec<String>,
    pub polynomial: Option<String>,
    /// Several polynomials, for vectorial Darboux search.
    #[serde(default)]
    pub polynomials: Vec<String>,
    pub program: Option<String>,
    /// Algebraic postcondition for `hp-reduce`.
    pub post: Option<String>,
    #[serde(default)]
    pub options: Options,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    pub degree_bound: Option<u32>,
    pub rank_cap: Option<usize>,
    pub solver: Option<PathBuf>,
    /// Seconds.
    pub solver_timeout: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

pub fn parse_problem(text: &str) -> Result<ProblemFile, CliError> {
    toml::from_str(text).map_err(|e| CliError::Input(format!("problem file: {}", e.message())))
}

/// A problem file with its text fields parsed against the declared
/// variables.
#[derive(Debug)]
pub struct Problem {
    pub file: ProblemFile,
    pub vars: VarTable,
}

fn field<T>(name: &str, r: Result<T, odeinv_core::ParseError>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Input(format!("`{name}`: {e}")))
}

impl Problem {
    pub fn new(file: ProblemFile) -> Result<Self, CliError> {
        let vars = VarTable::from_names(file.vars.iter().map(String::as_str)).map_err(CliError::Input)?;
        Ok(Self { file, vars })
    }

    pub fn ode(&self) -> Result<OdeSystem, CliError> {
        let src = self.file.ode.as_deref().ok_or_else(|| CliError::Input("missing `ode`".into()))?;
        field("ode", parse_ode(src, &self.vars))
    }

    pub fn polynomial(&self) -> Result<Polynomial, CliError> {
        let src = self
            .file
            .polynomial
            .as_deref()
            .ok_or_else(|| CliError::Input("missing `polynomial`".into()))?;
        field("polynomial", parse_polynomial(src, &self.vars))
    }

    pub fn polynomials(&self) -> Result<Vec<Polynomial>, CliError> {
        self.file
            .polynomials
            .iter()
            .map(|s| field("polynomials", parse_polynomial(s, &self.vars)))
            .collect()
    }

    pub fn domain_formula(&self) -> Result<Formula, CliError> {
        match &self.file.domain {
            None => Ok(Formula::True),
            Some(src) => field("domain", parse_formula(src, &self.vars)),
        }
    }

    pub fn domain(&self) -> Result<NormalForm, CliError> {
        normal_form("domain", &self.domain_formula()?)
    }

    /// The domain as a single `r != 0`, as algebraic checks require.
    pub fn domain_disequation(&self) -> Result<Option<Polynomial>, CliError> {
        match self.domain_formula()? {
            Formula::True => Ok(None),
            Formula::Atom(a) if a.rel == odeinv_core::Rel::Ne => Ok(Some(a.poly)),
            _ => Err(CliError::Input("algebraic checks need a domain of the form `r != 0`".into())),
        }
    }

    pub fn candidates(&self) -> Result<Vec<(String, NormalForm)>, CliError> {
        if self.file.candidates.is_empty() {
            return Err(CliError::Input("missing `candidates`".into()));
        }
        self.file
            .candidates
            .iter()
            .map(|src| {
                let f = field("candidates", parse_formula(src, &self.vars))?;
                Ok((src.clone(), normal_form("candidates", &f)?))
            })
            .collect()
    }

    pub fn program(&self) -> Result<HybridProgram, CliError> {
        let src = self
            .file
            .program
            .as_deref()
            .ok_or_else(|| CliError::Input("missing `program`".into()))?;
        field("program", parse_program(src, &self.vars))
    }

    pub fn post(&self) -> Result<Formula, CliError> {
        match (&self.file.post, &self.file.polynomial) {
            (Some(src), _) => field("post", parse_formula(src, &self.vars)),
            (None, Some(_)) => Ok(Formula::atom(self.polynomial()?, odeinv_core::Rel::Eq)),
            (None, None) => Err(CliError::Input("missing `post`".into())),
        }
    }

    pub fn discharge_config(&self) -> Result<DischargeConfig, CliError> {
        let o = &self.file.options;
        let mut c = DischargeConfig::default();
        if let Some(n) = o.samples {
            c.samples = n;
        }
        if let Some(s) = o.seed {
            c.seed = s;
        }
        if let Some(cap) = o.rank_cap {
            c.rank_cap = cap;
        }
        c.solver = o.solver.clone();
        if let Some(t) = o.solver_timeout {
            c.solver_timeout = Duration::try_from_secs_f64(t)
                .map_err(|_| CliError::Input(format!("invalid solver_timeout {t}")))?;
        }
        Ok(c)
    }
}

fn normal_form(name: &str, f: &Formula) -> Result<NormalForm, CliError> {
    to_normal_form(f).map_err(|e| CliError::Input(format!("`{name}`: {e}")))
}
