//! Reverse-mode automatic differentiation on a flat, append-only tape.
//!
//! Every recorded node is a scalar. A node stores its value and a run of
//! `(parent, local partial)` edges, so a backward pass is a single reverse
//! sweep over the node list accumulating adjoints. Leaves can be grouped
//! under a name (for example `"delta.t"` or `"beta"`) and read back from
//! [`Gradients::group`] after the pass.
//!
//! ```
//! use skewscan_core::autodiff::Tape;
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(3.0);
//! let y = tape.mul(x, x);
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.wrt(x), 6.0);
//! ```

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{arg_err, num_err, Result};
use crate::math;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Primitive that produced a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Leaf,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    /// Affine combination `c + Σ kᵢ xᵢ` with constant weights.
    Linear,
    /// One output row of a 3x3 matrix-vector product.
    MatVec3,
    /// One output entry of a 3x3 matrix-matrix product.
    MatMul3,
    Dot,
    Sum,
    Sigmoid,
    Tanh,
    Exp,
    Log,
    Softplus,
    Sqrt,
    Power,
    Abs,
    /// Clamp whose gradient passes straight through.
    ClampPass,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    op: Op,
    value: f64,
    edges: (u32, u32),
    poisoned: bool,
}

/// A named, contiguous run of leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGroup {
    pub name: String,
    pub leaves: Range<u32>,
}

/// Append-only record of a scalar computation.
///
/// A tape is confined to one thread; independent tapes may run in parallel.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
    edges: Vec<(u32, f64)>,
    groups: Vec<ParamGroup>,
    first_error: Option<(u32, &'static str)>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Drops all nodes but keeps the allocations.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.edges.clear();
        self.groups.clear();
        self.first_error = None;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn value(&self, v: Var) -> f64 {
        self.nodes[v.index()].value
    }

    pub fn op(&self, v: Var) -> Op {
        self.nodes[v.index()].op
    }

    /// First node that recorded a numeric domain error, if any.
    pub fn first_error(&self) -> Option<(Var, &'static str)> {
        self.first_error.map(|(i, why)| (Var(i), why))
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    #[inline]
    fn push(&mut self, op: Op, value: f64, edges: &[(Var, f64)]) -> Var {
        let start = self.edges.len() as u32;
        let mut poisoned = false;
        for &(p, d) in edges {
            poisoned |= self.nodes[p.index()].poisoned;
            self.edges.push((p.0, d));
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            op,
            value,
            edges: (start, self.edges.len() as u32),
            poisoned,
        });
        Var(id)
    }

    fn push_error(&mut self, op: Op, edges: &[(Var, f64)], why: &'static str) -> Var {
        let v = self.push(op, f64::NAN, edges);
        self.nodes[v.index()].poisoned = true;
        if self.first_error.is_none() {
            self.first_error = Some((v.0, why));
        }
        v
    }

    /// Records a primitive by tag. Binary tags read `inputs[0]` and
    /// `inputs[1]`; unary tags read `inputs[0]`; `Sum` reads all of them.
    /// `Power` takes its exponent from `param`, `ClampPass` clamps to
    /// `[-param, param]`. Returns the new node's handle.
    pub fn record(&mut self, op: Op, inputs: &[Var], param: f64) -> Result<Var> {
        let need = match op {
            Op::Leaf | Op::Const => 0,
            Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Min | Op::Max => 2,
            Op::Sum | Op::Linear | Op::MatVec3 | Op::MatMul3 | Op::Dot => usize::MAX,
            _ => 1,
        };
        if need != usize::MAX && inputs.len() != need {
            return Err(arg_err!("{:?} takes {need} inputs, got {}", op, inputs.len()));
        }
        let a = inputs.first().copied();
        let b = inputs.get(1).copied();
        Ok(match op {
            Op::Leaf => self.leaf(param),
            Op::Const => self.constant(param),
            Op::Add => self.add(a.unwrap(), b.unwrap()),
            Op::Sub => self.sub(a.unwrap(), b.unwrap()),
            Op::Mul => self.mul(a.unwrap(), b.unwrap()),
            Op::Div => self.div(a.unwrap(), b.unwrap()),
            Op::Min => self.min(a.unwrap(), b.unwrap()),
            Op::Max => self.max(a.unwrap(), b.unwrap()),
            Op::Neg => self.neg(a.unwrap()),
            Op::Sigmoid => self.sigmoid(a.unwrap()),
            Op::Tanh => self.tanh(a.unwrap()),
            Op::Exp => self.exp(a.unwrap()),
            Op::Log => self.log(a.unwrap()),
            Op::Softplus => self.softplus(a.unwrap()),
            Op::Sqrt => self.sqrt(a.unwrap()),
            Op::Abs => self.abs(a.unwrap()),
            Op::Power => self.powf(a.unwrap(), param),
            Op::ClampPass => self.clamp_pass(a.unwrap(), -param, param),
            Op::Sum => self.sum(inputs),
            Op::Linear | Op::MatVec3 | Op::MatMul3 | Op::Dot => {
                if !inputs.len().is_multiple_of(2) {
                    return Err(arg_err!("{:?} takes paired inputs", op));
                }
                let (xs, ys) = inputs.split_at(inputs.len() / 2);
                self.dot(xs, ys)
            }
        })
    }

    pub fn leaf(&mut self, value: f64) -> Var {
        self.push(Op::Leaf, value, &[])
    }

    /// Appends a named group of leaves and returns their handles.
    pub fn param_group(&mut self, name: &str, values: &[f64]) -> Vec<Var> {
        let start = self.nodes.len() as u32;
        let vars: Vec<Var> = values.iter().map(|&v| self.leaf(v)).collect();
        self.groups.push(ParamGroup {
            name: name.into(),
            leaves: start..self.nodes.len() as u32,
        });
        vars
    }

    pub fn constant(&mut self, value: f64) -> Var {
        self.push(Op::Const, value, &[])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(Op::Add, v, &[(a, 1.0), (b, 1.0)])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(Op::Sub, v, &[(a, 1.0), (b, -1.0)])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        self.push(Op::Mul, va * vb, &[(a, vb), (b, va)])
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        if vb == 0.0 {
            return self.push_error(Op::Div, &[(a, f64::NAN), (b, f64::NAN)], "division by zero");
        }
        self.push(Op::Div, va / vb, &[(a, 1.0 / vb), (b, -va / (vb * vb))])
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let v = -self.value(a);
        self.push(Op::Neg, v, &[(a, -1.0)])
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        self.linear(c, &[(a, 1.0)])
    }

    pub fn mul_const(&mut self, a: Var, c: f64) -> Var {
        self.linear(0.0, &[(a, c)])
    }

    /// `offset + Σ kᵢ xᵢ` with constant weights `kᵢ`.
    pub fn linear(&mut self, offset: f64, terms: &[(Var, f64)]) -> Var {
        let mut v = offset;
        for &(x, k) in terms {
            v += k * self.value(x);
        }
        self.push(Op::Linear, v, terms)
    }

    pub fn sum(&mut self, xs: &[Var]) -> Var {
        let mut v = 0.0;
        for &x in xs {
            v += self.value(x);
        }
        let start = self.edges.len() as u32;
        let mut poisoned = false;
        for &x in xs {
            poisoned |= self.nodes[x.index()].poisoned;
            self.edges.push((x.0, 1.0));
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            op: Op::Sum,
            value: v,
            edges: (start, self.edges.len() as u32),
            poisoned,
        });
        Var(id)
    }

    /// `Σ xᵢ yᵢ` with both operands on the tape.
    pub fn dot(&mut self, xs: &[Var], ys: &[Var]) -> Var {
        debug_assert_eq!(xs.len(), ys.len());
        let mut v = 0.0;
        let mut edges = Vec::with_capacity(2 * xs.len());
        for (&x, &y) in xs.iter().zip(ys) {
            let (vx, vy) = (self.value(x), self.value(y));
            v += vx * vy;
            edges.push((x, vy));
            edges.push((y, vx));
        }
        self.push(Op::Dot, v, &edges)
    }

    /// `M v` for a 3x3 matrix and a 3-vector, both on the tape.
    pub fn matvec3(&mut self, m: &[[Var; 3]; 3], v: &[Var; 3]) -> [Var; 3] {
        core::array::from_fn(|i| {
            let mut val = 0.0;
            let mut edges = [(v[0], 0.0); 6];
            for j in 0..3 {
                let (mij, vj) = (self.value(m[i][j]), self.value(v[j]));
                val += mij * vj;
                edges[2 * j] = (m[i][j], vj);
                edges[2 * j + 1] = (v[j], mij);
            }
            self.push(Op::MatVec3, val, &edges)
        })
    }

    /// `A B` for 3x3 matrices on the tape.
    pub fn matmul3(&mut self, a: &[[Var; 3]; 3], b: &[[Var; 3]; 3]) -> [[Var; 3]; 3] {
        core::array::from_fn(|i| {
            core::array::from_fn(|j| {
                let mut val = 0.0;
                let mut edges = [(a[0][0], 0.0); 6];
                for k in 0..3 {
                    let (aik, bkj) = (self.value(a[i][k]), self.value(b[k][j]));
                    val += aik * bkj;
                    edges[2 * k] = (a[i][k], bkj);
                    edges[2 * k + 1] = (b[k][j], aik);
                }
                self.push(Op::MatMul3, val, &edges)
            })
        })
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let s = math::sigmoid(self.value(a));
        self.push(Op::Sigmoid, s, &[(a, s * (1.0 - s))])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = math::tanh(self.value(a));
        self.push(Op::Tanh, t, &[(a, 1.0 - t * t)])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let e = math::exp(self.value(a));
        self.push(Op::Exp, e, &[(a, e)])
    }

    pub fn log(&mut self, a: Var) -> Var {
        let x = self.value(a);
        if !(x > 0.0) {
            return self.push_error(Op::Log, &[(a, f64::NAN)], "log of non-positive value");
        }
        self.push(Op::Log, math::ln(x), &[(a, 1.0 / x)])
    }

    /// `ln(1 + eˣ)`.
    pub fn softplus(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.push(Op::Softplus, math::softplus(x), &[(a, math::sigmoid(x))])
    }

    /// Square root. The derivative at exactly 0 is taken as 0.
    pub fn sqrt(&mut self, a: Var) -> Var {
        let x = self.value(a);
        if x < 0.0 {
            return self.push_error(Op::Sqrt, &[(a, f64::NAN)], "sqrt of negative value");
        }
        let r = math::sqrt(x);
        let d = if r > 0.0 { 0.5 / r } else { 0.0 };
        self.push(Op::Sqrt, r, &[(a, d)])
    }

    /// `x^p` for `x >= 0` (any `p`) or integral `p`.
    pub fn powf(&mut self, a: Var, p: f64) -> Var {
        let x = self.value(a);
        let v = math::powf(x, p);
        if !v.is_finite() {
            return self.push_error(Op::Power, &[(a, f64::NAN)], "power out of domain");
        }
        let d = if p == 0.0 {
            0.0
        } else if x == 0.0 {
            if p > 1.0 {
                0.0
            } else if p == 1.0 {
                1.0
            } else {
                0.0
            }
        } else {
            p * math::powf(x, p - 1.0)
        };
        self.push(Op::Power, v, &[(a, d)])
    }

    /// `|x|`, with subgradient 0 at 0.
    pub fn abs(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let d = if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.push(Op::Abs, libm::fabs(x), &[(a, d)])
    }

    /// Clamps the value to `[lo, hi]`; the gradient passes through unchanged.
    pub fn clamp_pass(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let x = self.value(a).clamp(lo, hi);
        self.push(Op::ClampPass, x, &[(a, 1.0)])
    }

    /// Minimum; ties go to `a`.
    pub fn min(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        if va <= vb {
            self.push(Op::Min, va, &[(a, 1.0)])
        } else {
            self.push(Op::Min, vb, &[(b, 1.0)])
        }
    }

    /// Maximum; ties go to `a`.
    pub fn max(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        if va >= vb {
            self.push(Op::Max, va, &[(a, 1.0)])
        } else {
            self.push(Op::Max, vb, &[(b, 1.0)])
        }
    }

    /// Reverse accumulation from `loss`.
    ///
    /// Fails when the loss depends on a node that recorded a domain error
    /// or when any adjoint becomes non-finite.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let n = self.nodes.len();
        if loss.index() >= n {
            return Err(arg_err!("loss node {} is not on this tape", loss.0));
        }
        let mut adj = alloc::vec![0.0f64; loss.index() + 1];
        let mut reached = alloc::vec![false; loss.index() + 1];
        adj[loss.index()] = 1.0;
        reached[loss.index()] = true;
        for i in (0..=loss.index()).rev() {
            if !reached[i] {
                continue;
            }
            let node = &self.nodes[i];
            if node.poisoned && node.op != Op::Leaf && node.op != Op::Const {
                let why = self
                    .first_error
                    .filter(|(e, _)| *e as usize <= i)
                    .map(|(_, w)| w)
                    .unwrap_or("numeric error");
                return Err(num_err!("loss depends on node {i} ({:?}): {why}", node.op));
            }
            let g = adj[i];
            for &(p, d) in &self.edges[node.edges.0 as usize..node.edges.1 as usize] {
                adj[p as usize] += g * d;
                reached[p as usize] = true;
            }
        }
        adj.resize(n, 0.0);
        if let Some(i) = adj.iter().position(|g| !g.is_finite()) {
            return Err(num_err!("non-finite adjoint at node {i}"));
        }
        Ok(Gradients { adjoints: adj, groups: self.groups.clone() })
    }
}

/// Adjoints of every node after a backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    adjoints: Vec<f64>,
    groups: Vec<ParamGroup>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> f64 {
        self.adjoints[v.index()]
    }

    /// Gradients of a named leaf group, in creation order.
    pub fn group(&self, name: &str) -> Option<&[f64]> {
        self.groups
            .iter()
            .find(|g| g.name == name)
            .map(|g| &self.adjoints[g.leaves.start as usize..g.leaves.end as usize])
    }
}

/// Attack gradients gathered from the leaf groups `"delta.t"`,
/// `"delta.r"` and `"beta"`. Missing groups read as zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradientSet {
    /// Per step: `∂/∂t̃` (3 entries) then `∂/∂R̃` row-major (9 entries).
    pub d_delta: Vec<[f64; 12]>,
    /// `∂/∂β`, rows are powers of `s`.
    pub d_beta: [[f64; 3]; 4],
}

impl GradientSet {
    pub fn from_gradients(g: &Gradients) -> Self {
        let t = g.group("delta.t").unwrap_or(&[]);
        let r = g.group("delta.r").unwrap_or(&[]);
        let steps = (t.len() / 3).max(r.len() / 9);
        let d_delta = (0..steps)
            .map(|n| {
                let mut row = [0.0; 12];
                if let Some(c) = t.get(n * 3..n * 3 + 3) {
                    row[..3].copy_from_slice(c);
                }
                if let Some(c) = r.get(n * 9..n * 9 + 9) {
                    row[3..].copy_from_slice(c);
                }
                row
            })
            .collect();
        let mut d_beta = [[0.0; 3]; 4];
        if let Some(b) = g.group("beta") {
            for (i, v) in b.iter().take(12).enumerate() {
                d_beta[i / 3][i % 3] = *v;
            }
        }
        Self { d_delta, d_beta }
    }
}

/// Relative precision assumed for a function value built from many summed
/// terms; slopes below `RESOLUTION · |f| / h` cannot be resolved by the
/// difference quotient.
pub const RESOLUTION: f64 = 1e-12;

/// Outcome of [`grad_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// Largest `|analytic - central| / (|central| + 1e-12)` over checked coordinates.
    pub max_rel_error: f64,
    /// Coordinate with the largest error.
    pub worst: Option<usize>,
    /// Coordinates compared.
    pub checked: usize,
    /// Coordinates skipped because one-sided differences disagree (a kink
    /// lies within `h`).
    pub excluded: Vec<usize>,
    /// Coordinates skipped because both the analytic and the central slope
    /// lie below the rounding floor of the difference quotient.
    pub unresolved: Vec<usize>,
}

/// Compares tape gradients of `f` at `x` against central differences.
///
/// `f` builds its scalar output on the given tape from leaf handles for
/// `x`. Only the coordinates listed in `coords` are checked (all of them
/// when `coords` is `None`).
pub fn grad_check<F>(f: F, x: &[f64], h: f64, coords: Option<&[usize]>) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let eval = |tape: &mut Tape, at: &[f64]| -> Result<f64> {
        tape.clear();
        let vars = tape.param_group("x", at);
        let out = f(tape, &vars)?;
        let v = tape.value(out);
        if !v.is_finite() {
            return Err(num_err!("function value is not finite"));
        }
        Ok(v)
    };

    tape.clear();
    let vars = tape.param_group("x", x);
    let out = f(&mut tape, &vars)?;
    let f0 = tape.value(out);
    if !f0.is_finite() {
        return Err(num_err!("function value is not finite"));
    }
    let grads = tape.backward(out)?;
    let analytic: Vec<f64> = vars.iter().map(|&v| grads.wrt(v)).collect();

    let all: Vec<usize>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..x.len()).collect();
            &all
        }
    };

    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        excluded: Vec::new(),
        unresolved: Vec::new(),
    };
    let mut probe = x.to_vec();
    for &i in coords {
        if i >= x.len() {
            return Err(arg_err!("coordinate {i} out of range"));
        }
        probe[i] = x[i] + h;
        let fp = eval(&mut tape, &probe)?;
        probe[i] = x[i] - h;
        let fm = eval(&mut tape, &probe)?;
        probe[i] = x[i];

        let fwd = (fp - f0) / h;
        let bwd = (f0 - fm) / h;
        let central = (fp - fm) / (2.0 * h);
        let spread = libm::fabs(fwd - bwd);
        // Smooth functions give one-sided slopes that differ by O(h f'');
        // a kink inside [x-h, x+h] gives an O(1) jump.
        if spread > 1e-2 * (libm::fabs(fwd) + libm::fabs(bwd)) + 1e-6 {
            report.excluded.push(i);
            continue;
        }
        let floor = RESOLUTION * libm::fabs(f0).max(libm::fabs(fp)).max(libm::fabs(fm)) / h;
        if libm::fabs(central) < floor && libm::fabs(analytic[i]) < floor {
            report.unresolved.push(i);
            continue;
        }
        let rel = libm::fabs(analytic[i] - central) / (libm::fabs(central) + 1e-12);
        report.checked += 1;
        if report.worst.is_none() || rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst = Some(i);
        }
    }
    Ok(report)
}
