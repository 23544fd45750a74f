//! Butcher tableaux and symplecticity conditions for partitioned Runge–Kutta
//! methods acting on a product of symplectic spaces.
//!
//! A [`PartitionedScheme`] lists one entry per factor of the product. A factor
//! integrated by a plain Runge–Kutta method is symplectic when
//! `b_i b_j = b_i a_ij + b_j a_ji`; a factor split into Darboux coordinates
//! `(q, p)` with tableaux `(a, b)` and `(â, b̂)` needs
//! `b̂_i b_j = b̂_i a_ij + b_j â_ji` together with `b = b̂`. Across factors all
//! weight vectors must agree. Every check runs in exact rational arithmetic.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Coefficient = BigRational;

fn ratio(num: i64, den: i64) -> Coefficient {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses an integer, a fraction `p/q` or a finite decimal `1.25` as an exact rational.
pub fn parse_coefficient(text: &str) -> Option<Coefficient> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num = BigInt::from_str(num.trim()).ok()?;
        let den = BigInt::from_str(den.trim()).ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(BigRational::new(num, den));
    }
    if let Some((int, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let negative = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches(['-', '+']), frac);
        let mut value = BigRational::new(BigInt::from_str(&digits).ok()?, BigInt::from(10).pow(frac.len() as u32));
        if negative {
            value = -value;
        }
        return Some(value);
    }
    BigInt::from_str(text).ok().map(BigRational::from_integer)
}

/// An `s`-stage Runge–Kutta tableau with exact coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    a: Vec<Vec<Coefficient>>,
    b: Vec<Coefficient>,
}

impl ButcherTableau {
    pub fn new(a: Vec<Vec<Coefficient>>, b: Vec<Coefficient>) -> Result<Self> {
        let s = b.len();
        if s == 0 {
            return Err(Error::Dimension("tableau needs at least one stage".into()));
        }
        if a.len() != s || a.iter().any(|row| row.len() != s) {
            return Err(Error::Dimension(format!("a must be {s}×{s} to match {s} weights")));
        }
        Ok(Self { a, b })
    }

    /// Builds a tableau from `(numerator, denominator)` pairs.
    pub fn from_ratios(a: &[&[(i64, i64)]], b: &[(i64, i64)]) -> Result<Self> {
        Self::new(
            a.iter()
                .map(|row| row.iter().map(|&(n, d)| ratio(n, d)).collect())
                .collect(),
            b.iter().map(|&(n, d)| ratio(n, d)).collect(),
        )
    }

    /// One-stage implicit midpoint rule.
    pub fn implicit_midpoint() -> Self {
        Self::from_ratios(&[&[(1, 2)]], &[(1, 1)]).unwrap()
    }

    /// Implicit midpoint written as a reducible two-stage method.
    pub fn reducible_midpoint() -> Self {
        Self::from_ratios(&[&[(1, 4), (1, 4)], &[(1, 4), (1, 4)]], &[(1, 2), (1, 2)]).unwrap()
    }

    pub fn explicit_euler() -> Self {
        Self::from_ratios(&[&[(0, 1)]], &[(1, 1)]).unwrap()
    }

    /// Position tableau of Störmer–Verlet (trapezoidal, Lobatto IIIA).
    pub fn verlet_position() -> Self {
        Self::from_ratios(&[&[(0, 1), (0, 1)], &[(1, 2), (1, 2)]], &[(1, 2), (1, 2)]).unwrap()
    }

    /// Momentum tableau of Störmer–Verlet (Lobatto IIIB).
    pub fn verlet_momentum() -> Self {
        Self::from_ratios(&[&[(1, 2), (0, 1)], &[(1, 2), (0, 1)]], &[(1, 2), (1, 2)]).unwrap()
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &[Vec<Coefficient>] {
        &self.a
    }

    pub fn b(&self) -> &[Coefficient] {
        &self.b
    }

    pub fn a_mut(&mut self, i: usize, j: usize) -> &mut Coefficient {
        &mut self.a[i][j]
    }

    pub fn b_mut(&mut self, i: usize) -> &mut Coefficient {
        &mut self.b[i]
    }

    fn to_f64(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let f = |c: &Coefficient| c.to_f64().unwrap_or(f64::NAN);
        (
            self.a.iter().map(|row| row.iter().map(f).collect()).collect(),
            self.b.iter().map(f).collect(),
        )
    }
}

/// One factor of a partitioned scheme.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemeComponent {
    /// A factor integrated by one Runge–Kutta method.
    Single(ButcherTableau),
    /// A factor in Darboux coordinates: `q` uses `(a, b)`, `p` uses `(â, b̂)`.
    Pair { q: ButcherTableau, p: ButcherTableau },
}

impl SchemeComponent {
    fn tableaux(&self) -> Vec<&ButcherTableau> {
        match self {
            SchemeComponent::Single(t) => vec![t],
            SchemeComponent::Pair { q, p } => vec![q, p],
        }
    }

    fn weights(&self) -> &[Coefficient] {
        match self {
            SchemeComponent::Single(t) => t.b(),
            SchemeComponent::Pair { q, .. } => q.b(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedScheme {
    pub components: Vec<SchemeComponent>,
}

impl PartitionedScheme {
    pub fn new(components: Vec<SchemeComponent>) -> Self {
        Self { components }
    }

    /// Reducible two-stage midpoint for the spins, Störmer–Verlet for the lattice.
    pub fn production() -> Self {
        Self::new(vec![
            SchemeComponent::Single(ButcherTableau::reducible_midpoint()),
            SchemeComponent::Pair {
                q: ButcherTableau::verlet_position(),
                p: ButcherTableau::verlet_momentum(),
            },
        ])
    }
}

/// A single violated coefficient condition. Indices are zero-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// `b_i b_j ≠ b_i a_ij + b_j a_ji` in a single-tableau component.
    Symplectic { component: usize, i: usize, j: usize },
    /// `b̂_i b_j ≠ b̂_i a_ij + b_j â_ji` in a pair component.
    PairCoupling { component: usize, i: usize, j: usize },
    /// `b_i ≠ b̂_i` in a pair component.
    PairWeights { component: usize, i: usize },
    /// `b_i` of this component differs from the first component's.
    SharedWeights { component: usize, i: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::Symplectic { component, i, j } => {
                write!(f, "component {}: b_i b_j = b_i a_ij + b_j a_ji fails at ({}, {})", component + 1, i + 1, j + 1)
            }
            Violation::PairCoupling { component, i, j } => write!(
                f,
                "component {}: bhat_i b_j = bhat_i a_ij + b_j ahat_ji fails at ({}, {})",
                component + 1,
                i + 1,
                j + 1
            ),
            Violation::PairWeights { component, i } => {
                write!(f, "component {}: b_i = bhat_i fails at i = {}", component + 1, i + 1)
            }
            Violation::SharedWeights { component, i } => {
                write!(f, "component {}: weight b_{} differs from component 1", component + 1, i + 1)
            }
        }
    }
}

/// Outcome of a coefficient check.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Verdict {
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn rk_violations(component: usize, t: &ButcherTableau) -> Vec<Violation> {
    let (a, b) = (t.a(), t.b());
    let s = t.stages();
    let mut out = Vec::new();
    for i in 0..s {
        for j in 0..s {
            if &b[i] * &b[j] != &b[i] * &a[i][j] + &b[j] * &a[j][i] {
                out.push(Violation::Symplectic { component, i, j });
            }
        }
    }
    out
}

fn pair_violations(component: usize, q: &ButcherTableau, p: &ButcherTableau) -> Result<Vec<Violation>> {
    if q.stages() != p.stages() {
        return Err(Error::StageMismatch {
            expected: q.stages(),
            found: p.stages(),
        });
    }
    let (a, b) = (q.a(), q.b());
    let (ahat, bhat) = (p.a(), p.b());
    let s = q.stages();
    let mut out = Vec::new();
    for i in 0..s {
        for j in 0..s {
            if &bhat[i] * &b[j] != &bhat[i] * &a[i][j] + &b[j] * &ahat[j][i] {
                out.push(Violation::PairCoupling { component, i, j });
            }
        }
    }
    for i in 0..s {
        if b[i] != bhat[i] {
            out.push(Violation::PairWeights { component, i });
        }
    }
    Ok(out)
}

/// Checks `b_i b_j = b_i a_ij + b_j a_ji` for every `(i, j)`.
pub fn check_rk_symplectic(t: &ButcherTableau) -> Verdict {
    Verdict {
        violations: rk_violations(0, t),
    }
}

/// Checks both conditions for a position/momentum tableau pair.
pub fn check_partitioned_pair(q: &ButcherTableau, p: &ButcherTableau) -> Result<Verdict> {
    Ok(Verdict {
        violations: pair_violations(0, q, p)?,
    })
}

/// Runs every per-component check plus equality of weights across components.
pub fn check_scheme(scheme: &PartitionedScheme) -> Result<Verdict> {
    let Some(first) = scheme.components.first() else {
        return Ok(Verdict::default());
    };
    let stages = first.tableaux()[0].stages();
    for component in &scheme.components {
        for t in component.tableaux() {
            if t.stages() != stages {
                return Err(Error::StageMismatch {
                    expected: stages,
                    found: t.stages(),
                });
            }
        }
    }
    let mut violations = Vec::new();
    for (k, component) in scheme.components.iter().enumerate() {
        match component {
            SchemeComponent::Single(t) => violations.extend(rk_violations(k, t)),
            SchemeComponent::Pair { q, p } => violations.extend(pair_violations(k, q, p)?),
        }
    }
    let reference = first.weights();
    for (k, component) in scheme.components.iter().enumerate().skip(1) {
        for (i, (b, b0)) in component.weights().iter().zip(reference).enumerate() {
            if b != b0 {
                violations.push(Violation::SharedWeights { component: k, i });
            }
        }
    }
    Ok(Verdict { violations })
}

/// Reads a scheme description.
///
/// ```text
/// # comments start with '#'
/// component rk
/// a 1/4 1/4
/// a 1/4 1/4
/// b 1/2 1/2
///
/// component prk
/// a 0 0
/// a 1/2 1/2
/// b 1/2 1/2
/// ahat 1/2 0
/// ahat 1/2 0
/// bhat 1/2 1/2
/// ```
///
/// `a`/`ahat` lines are matrix rows in order. Coefficients may be integers,
/// fractions or finite decimals.
pub fn parse_scheme(text: &str) -> Result<PartitionedScheme> {
    struct Block {
        line: usize,
        pair: bool,
        a: Vec<Vec<Coefficient>>,
        b: Option<Vec<Coefficient>>,
        ahat: Vec<Vec<Coefficient>>,
        bhat: Option<Vec<Coefficient>>,
    }

    fn finish(block: Block) -> Result<SchemeComponent> {
        let err = |message: String| Error::Parse {
            line: block.line,
            message,
        };
        let tableau = |a: Vec<Vec<Coefficient>>, b: Option<Vec<Coefficient>>, name: &str| {
            let b = b.ok_or_else(|| err(format!("component is missing its '{name}' weights")))?;
            ButcherTableau::new(a, b).map_err(|e| err(e.to_string()))
        };
        if block.pair {
            let q = tableau(block.a, block.b, "b")?;
            let p = tableau(block.ahat, block.bhat, "bhat")?;
            Ok(SchemeComponent::Pair { q, p })
        } else {
            if !block.ahat.is_empty() || block.bhat.is_some() {
                return Err(err("'ahat'/'bhat' rows are only allowed in 'prk' components".into()));
            }
            Ok(SchemeComponent::Single(tableau(block.a, block.b, "b")?))
        }
    }

    let mut components = Vec::new();
    let mut current: Option<Block> = None;
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let keyword = tokens.next().unwrap_or_default();
        let err = |message: String| Error::Parse { line, message };
        if keyword == "component" {
            let pair = match tokens.next() {
                Some("rk") => false,
                Some("prk") => true,
                other => return Err(err(format!("expected 'rk' or 'prk' after 'component', found {other:?}"))),
            };
            if let Some(extra) = tokens.next() {
                return Err(err(format!("unexpected token '{extra}'")));
            }
            if let Some(block) = current.take() {
                components.push(finish(block)?);
            }
            current = Some(Block {
                line,
                pair,
                a: vec![],
                b: None,
                ahat: vec![],
                bhat: None,
            });
            continue;
        }
        let block = current
            .as_mut()
            .ok_or_else(|| err(format!("'{keyword}' before any 'component' header")))?;
        let values = tokens
            .map(|t| parse_coefficient(t).ok_or_else(|| err(format!("invalid coefficient '{t}'"))))
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(err(format!("'{keyword}' row has no coefficients")));
        }
        match keyword {
            "a" => block.a.push(values),
            "ahat" if block.pair => block.ahat.push(values),
            "b" | "bhat" => {
                let slot = if keyword == "b" { &mut block.b } else { &mut block.bhat };
                if keyword == "bhat" && !block.pair {
                    return Err(err("'bhat' is only allowed in 'prk' components".into()));
                }
                if slot.is_some() {
                    return Err(err(format!("duplicate '{keyword}' row")));
                }
                *slot = Some(values);
            }
            "ahat" => return Err(err("'ahat' is only allowed in 'prk' components".into())),
            other => return Err(err(format!("unknown keyword '{other}'"))),
        }
    }
    match current {
        Some(block) => components.push(finish(block)?),
        None => {
            return Err(Error::Parse {
                line: text.lines().count().max(1),
                message: "no components defined".into(),
            })
        }
    }
    Ok(PartitionedScheme { components })
}

/// Settings of the random linear-Hamiltonian ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantTest {
    pub trials: usize,
    pub step: f64,
    pub seed: u64,
    /// Multiplies the random Hamiltonian; zero gives the trivial vector field.
    pub hamiltonian_scale: f64,
}

impl Default for InvariantTest {
    fn default() -> Self {
        Self {
            trials: 100,
            step: 0.1,
            seed: 20_180_501,
            hamiltonian_scale: 1.0,
        }
    }
}

/// One coordinate block with its own tableau.
struct Block {
    offset: usize,
    len: usize,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

fn canonical(d: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * d, 2 * d);
    for k in 0..d {
        omega[(k, d + k)] = 1.0;
        omega[(d + k, k)] = -1.0;
    }
    omega
}

/// Integrates random linear Hamiltonian systems on a product of symplectic
/// spaces with the generic multi-component method and returns the largest
/// one-step change of a quadratic invariant `Σ_k ω_k(u_k, v_k)`.
///
/// Each single-tableau factor is `ℝ⁴` with a random nondegenerate skew
/// structure `J_k` and flow `ẏ = J_k⁻¹ ∂H/∂y`; each pair factor is
/// `T*ℝ²` with the canonical structure. `H = ½ yᵀSy` couples all factors
/// through a random symmetric `S`. The invariant is the symplectic form
/// evaluated on two solutions `u`, `v`, which the exact flow conserves.
///
/// This is a dense reference runner and is not meant for production use.
pub fn empirical_invariant_test(scheme: &PartitionedScheme, test: &InvariantTest) -> Result<f64> {
    check_scheme(scheme)?;
    let stages = match scheme.components.first() {
        Some(c) => c.tableaux()[0].stages(),
        None => return Ok(0.0),
    };
    let mut blocks = Vec::new();
    let mut dim = 0;
    for component in &scheme.components {
        for t in component.tableaux() {
            let len = match component {
                SchemeComponent::Single(_) => 4,
                SchemeComponent::Pair { .. } => 2,
            };
            let (a, b) = t.to_f64();
            blocks.push(Block { offset: dim, len, a, b });
            dim += len;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(test.seed);
    fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }
    let mut worst: f64 = 0.0;
    for _ in 0..test.trials {
        // structure matrix Ω (invariant form) and K = Ω⁻¹ (flow ẏ = K S y)
        let mut omega = DMatrix::zeros(dim, dim);
        let mut offset = 0;
        for component in &scheme.components {
            let block = match component {
                SchemeComponent::Single(_) => {
                    let basis = DMatrix::identity(4, 4) + uniform(&mut rng, 4, 4) * 0.3;
                    basis.transpose() * canonical(2) * basis
                }
                SchemeComponent::Pair { .. } => -canonical(2),
            };
            let n = block.nrows();
            omega.view_mut((offset, offset), (n, n)).copy_from(&block);
            offset += n;
        }
        let inverse = omega
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("degenerate random structure matrix".into()))?;
        let r = uniform(&mut rng, dim, dim);
        let s = (&r + r.transpose()) * (0.5 * test.hamiltonian_scale);
        let field = inverse * s;

        let u = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let v = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let before = u.dot(&(&omega * &v));
        let u1 = prk_step(&field, &blocks, stages, &u, test.step)?;
        let v1 = prk_step(&field, &blocks, stages, &v, test.step)?;
        let after = u1.dot(&(&omega * &v1));
        worst = worst.max((after - before).abs());
    }
    Ok(worst)
}

fn prk_step(field: &DMatrix<f64>, blocks: &[Block], stages: usize, y: &DVector<f64>, h: f64) -> Result<DVector<f64>> {
    const TOLERANCE: f64 = 1e-15;
    const MAX_ITERATIONS: usize = 1000;
    let mut stage_values = vec![y.clone(); stages];
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let slopes: Vec<DVector<f64>> = stage_values.iter().map(|st| field * st).collect();
        let mut next = vec![y.clone(); stages];
        for block in blocks {
            for (i, stage) in next.iter_mut().enumerate() {
                for (j, slope) in slopes.iter().enumerate() {
                    let c = h * block.a[i][j];
                    if c != 0.0 {
                        let mut rows = stage.rows_mut(block.offset, block.len);
                        rows.axpy(c, &slope.rows(block.offset, block.len), 1.0);
                    }
                }
            }
        }
        residual = next
            .iter()
            .zip(&stage_values)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max);
        stage_values = next;
        if residual <= TOLERANCE * y.amax().max(1.0) {
            let slopes: Vec<DVector<f64>> = stage_values.iter().map(|st| field * st).collect();
            let mut out = y.clone();
            for block in blocks {
                for (i, slope) in slopes.iter().enumerate() {
                    let mut rows = out.rows_mut(block.offset, block.len);
                    rows.axpy(h * block.b[i], &slope.rows(block.offset, block.len), 1.0);
                }
            }
            return Ok(out);
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual,
    })
}

impl fmt::Display for ButcherTableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.a {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        let cells: Vec<String> = self.b.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", cells.join(" "))
    }
}
