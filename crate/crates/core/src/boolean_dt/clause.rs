use std::fmt;

use crate::bits::Bits;
use crate::error::Result;

/// A variable or its negation.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub var: u16,
    pub positive: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Literal {
            var: var as u16,
            positive: true,
        }
    }

    pub fn neg(var: usize) -> Self {
        Literal {
            var: var as u16,
            positive: false,
        }
    }

    pub fn new(var: usize, positive: bool) -> Self {
        Literal {
            var: var as u16,
            positive,
        }
    }

    #[inline]
    pub fn var(&self) -> usize {
        self.var as usize
    }

    #[inline]
    pub fn eval(&self, x: &Bits) -> bool {
        x.get(self.var()) == self.positive
    }

    pub fn negated(self) -> Self {
        Literal {
            var: self.var,
            positive: !self.positive,
        }
    }
}

impl fmt::Debug for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "x{}", self.var)
        } else {
            write!(f, "!x{}", self.var)
        }
    }
}

/// An ordered tuple of literals, read as their conjunction.
///
/// Root-prefix paths keep their traversal order; pools store the canonical
/// (sorted, deduplicated) form so that permuted paths coincide.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Clause {
    lits: Vec<Literal>,
}

impl Clause {
    pub fn empty() -> Self {
        Clause { lits: Vec::new() }
    }

    pub fn new(lits: Vec<Literal>) -> Self {
        Clause { lits }
    }

    pub fn literals(&self) -> &[Literal] {
        &self.lits
    }

    pub fn len(&self) -> usize {
        self.lits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lits.is_empty()
    }

    pub fn contains_var(&self, var: usize) -> bool {
        self.lits.iter().any(|l| l.var() == var)
    }

    pub fn max_var(&self) -> Option<usize> {
        self.lits.iter().map(|l| l.var()).max()
    }

    /// True when every variable appears at most once.
    pub fn is_non_degenerate(&self) -> bool {
        let mut vars: Vec<u16> = self.lits.iter().map(|l| l.var).collect();
        vars.sort_unstable();
        vars.windows(2).all(|w| w[0] != w[1])
    }

    /// True when some variable appears in both polarities.
    pub fn is_contradictory(&self) -> bool {
        self.lits.iter().any(|a| {
            self.lits
                .iter()
                .any(|b| a.var == b.var && a.positive != b.positive)
        })
    }

    /// Sorted by variable, duplicates removed.
    pub fn canonical(&self) -> Clause {
        let mut lits = self.lits.clone();
        lits.sort_unstable();
        lits.dedup();
        Clause { lits }
    }

    /// Canonical form of `self ∪ {lit}`.
    pub fn extended(&self, lit: Literal) -> Clause {
        let mut lits = self.lits.clone();
        lits.push(lit);
        Clause { lits }.canonical()
    }

    pub fn with(&self, lit: Literal) -> Clause {
        let mut lits = self.lits.clone();
        lits.push(lit);
        Clause { lits }
    }

    /// Conjunction of the literals; the empty clause is true.
    pub fn eval_checked(&self, x: &Bits) -> Result<bool> {
        for l in &self.lits {
            if x.get_checked(l.var())? != l.positive {
                return Ok(false);
            }
        }
        Ok(true)
    }

    #[inline]
    pub fn eval(&self, x: &Bits) -> bool {
        self.lits.iter().all(|l| l.eval(x))
    }

    /// Keeps only the literals accepted by `keep`.
    pub fn filtered(&self, keep: impl Fn(&Literal) -> bool) -> Clause {
        Clause {
            lits: self.lits.iter().copied().filter(|l| keep(l)).collect(),
        }
    }
}

impl FromIterator<Literal> for Clause {
    fn from_iter<I: IntoIterator<Item = Literal>>(iter: I) -> Self {
        Clause {
            lits: iter.into_iter().collect(),
        }
    }
}

impl fmt::Debug for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, l) in self.lits.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{l:?}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Checked clause evaluation on a `d`-bit input.
pub fn eval_clause(c: &Clause, x: &Bits) -> Result<bool> {
    c.eval_checked(x)
}
