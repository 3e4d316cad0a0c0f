//! Polynomial ODE systems, Lie derivatives and differential ghosts.

use crate::poly::{PolyError, PolyMatrix, Polynomial, VarId, VarTable};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OdeError {
    #[error("ODE system needs at least one variable")]
    Empty,
    #[error("{vars} variables but {rhs} right-hand sides")]
    Arity { vars: usize, rhs: usize },
    #[error("variable `{0}` has two equations")]
    DuplicateVariable(String),
    #[error("variable index {0} is not in the table")]
    UnknownVariable(VarId),
    #[error("ghost variable `{0}` already exists")]
    NameCollision(String),
    #[error("ghost coefficients must not mention ghost variables")]
    GhostNotLinear,
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// `x' = f(x)` over an ordered subset of a variable table. Table variables
/// without an equation are constant parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OdeSystem {
    table: VarTable,
    vars: Vec<VarId>,
    rhs: Vec<Polynomial>,
}

impl OdeSystem {
    pub fn new(table: VarTable, vars: Vec<VarId>, rhs: Vec<Polynomial>) -> Result<Self, OdeError> {
        if vars.is_empty() {
            return Err(OdeError::Empty);
        }
        if vars.len() != rhs.len() {
            return Err(OdeError::Arity {
                vars: vars.len(),
                rhs: rhs.len(),
            });
        }
        for (k, &v) in vars.iter().enumerate() {
            if v >= table.len() {
                return Err(OdeError::UnknownVariable(v));
            }
            if vars[..k].contains(&v) {
                return Err(OdeError::DuplicateVariable(table.name(v).to_string()));
            }
        }
        if let Some(w) = rhs.iter().map(Polynomial::width).max() {
            if w > table.len() {
                return Err(OdeError::UnknownVariable(w - 1));
            }
        }
        Ok(Self { table, vars, rhs })
    }

    /// Convenience: every table variable evolves, in table order.
    pub fn from_rhs(table: VarTable, rhs: Vec<Polynomial>) -> Result<Self, OdeError> {
        let vars = (0..rhs.len()).collect();
        Self::new(table, vars, rhs)
    }

    pub fn table(&self) -> &VarTable {
        &self.table
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn rhs(&self) -> &[Polynomial] {
        &self.rhs
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    /// Right-hand side for `x`, if `x` evolves.
    pub fn rhs_of(&self, x: VarId) -> Option<&Polynomial> {
        self.vars.iter().position(|&v| v == x).map(|k| &self.rhs[k])
    }

    /// `L p = Σ ∂p/∂x_i · f_i`.
    pub fn lie_derivative(&self, p: &Polynomial) -> Polynomial {
        let mut acc = Polynomial::zero();
        for (&x, f) in self.vars.iter().zip(&self.rhs) {
            if !p.mentions(x) {
                continue;
            }
            acc = &acc + &(&p.partial_derivative(x) * f);
        }
        acc
    }

    /// `L^i p`, with `L^0 p = p`.
    pub fn higher_lie(&self, p: &Polynomial, i: usize) -> Polynomial {
        (0..i).fold(p.clone(), |q, _| self.lie_derivative(&q))
    }

    /// `[p, L p, ..., L^(n-1) p]`.
    pub fn lie_chain(&self, p: &Polynomial, n: usize) -> Vec<Polynomial> {
        let mut out = Vec::with_capacity(n);
        let mut q = p.clone();
        for k in 0..n {
            if k > 0 {
                q = self.lie_derivative(&q);
            }
            out.push(q.clone());
        }
        out
    }

    /// The time-reversed system `x' = -f(x)`.
    pub fn reverse(&self) -> Self {
        Self {
            table: self.table.clone(),
            vars: self.vars.clone(),
            rhs: self.rhs.iter().map(|f| -f).collect(),
        }
    }

    /// Appends `y' = a(x) y + b(x)` for fresh ghosts `y`.
    pub fn extend_with_ghosts(&self, g: &GhostSpec) -> Result<Self, OdeError> {
        let m = g.new_vars.len();
        if g.a.rows() != m || g.a.cols() != m || g.b.len() != m {
            return Err(PolyError::Dimension(format!(
                "ghost block for {m} variables has a {}x{} matrix and {} offsets",
                g.a.rows(),
                g.a.cols(),
                g.b.len()
            ))
            .into());
        }
        let old = self.table.len();
        let mut table = self.table.clone();
        for (k, name) in g.new_vars.iter().enumerate() {
            if table.lookup(name).is_some() || g.new_vars[..k].contains(name) {
                return Err(OdeError::NameCollision(name.clone()));
            }
            table.push(name.clone());
        }
        if g.a.entries().iter().chain(&g.b).any(|p| p.width() > old) {
            return Err(OdeError::GhostNotLinear);
        }
        let ghosts: Vec<Polynomial> = (old..old + m).map(Polynomial::var).collect();
        let lin = g.a.apply(&ghosts)?;
        let mut vars = self.vars.clone();
        let mut rhs = self.rhs.clone();
        for (k, (ay, b)) in lin.into_iter().zip(&g.b).enumerate() {
            vars.push(old + k);
            rhs.push(&ay + b);
        }
        Ok(Self { table, vars, rhs })
    }

    /// Picks `count` ghost names of the form `_gh<k>` not present in the table.
    pub fn fresh_ghost_names(&self, count: usize) -> Vec<String> {
        let mut out = Vec::with_capacity(count);
        let mut k = 0;
        while out.len() < count {
            let name = format!("_gh{k}");
            if self.table.lookup(&name).is_none() {
                out.push(name);
            }
            k += 1;
        }
        out
    }
}

/// Differential ghost block `y' = a(x) y + b(x)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GhostSpec {
    pub new_vars: Vec<String>,
    pub a: PolyMatrix,
    pub b: Vec<Polynomial>,
}

impl GhostSpec {
    /// Matrix ghost `Y' = -Y G` for an `m×m` matrix `G`, with `Y` flattened
    /// row-major into `names` (length `m²`).
    pub fn matrix_counterweight(g: &PolyMatrix, names: Vec<String>) -> Result<Self, PolyError> {
        if !g.is_square() {
            return Err(PolyError::Dimension(format!(
                "{}x{} cofactor matrix is not square",
                g.rows(),
                g.cols()
            )));
        }
        let m = g.rows();
        if names.len() != m * m {
            return Err(PolyError::Dimension(format!(
                "{} ghost names for a {m}x{m} matrix",
                names.len()
            )));
        }
        // Y'_{ij} = -Σ_k Y_{ik} G_{kj}
        let n = m * m;
        let mut a = PolyMatrix::zeros(n, n);
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    a.set(i * m + j, i * m + k, -g.get(k, j));
                }
            }
        }
        Ok(Self {
            new_vars: names,
            a,
            b: vec![Polynomial::zero(); n],
        })
    }
}

/// Checks `L(det Y) = -trace(G) det Y` along `x' = f(x), Y' = -Y G`.
///
/// This is a theorem for every square `G`; a `false` result means the
/// arithmetic is broken.
pub fn liouville_check(g: &PolyMatrix, sys: &OdeSystem) -> Result<bool, OdeError> {
    if !g.is_square() {
        return Err(PolyError::Dimension(format!("{}x{} matrix is not square", g.rows(), g.cols())).into());
    }
    let m = g.rows();
    let names = sys.fresh_ghost_names(m * m);
    let ghost = GhostSpec::matrix_counterweight(g, names)?;
    let base = sys.table().len();
    let ext = sys.extend_with_ghosts(&ghost)?;
    let y = PolyMatrix::new(m, m, (base..base + m * m).map(Polynomial::var).collect())?;
    let det = y.determinant()?;
    let lhs = ext.lie_derivative(&det);
    let residual = &lhs + &(&g.trace()? * &det);
    Ok(residual.is_zero())
}
