use alloc::vec::Vec;
use core::cell::RefCell;

use crate::error::{Error, Result};

/// Kind of an elementary operation recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Input,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Sin,
    Cos,
    Atan2,
    Sqrt,
    Powf,
    Exp,
    Ln,
    Abs,
    PosPart,
    /// Weighted sum of an arbitrary number of operands.
    Dot,
}

#[derive(Default)]
struct Nodes {
    kinds: Vec<OpKind>,
    // Operands of node `i` live in `args[offsets[i]..offsets[i + 1]]`.
    offsets: Vec<u32>,
    args: Vec<u32>,
    partials: Vec<f64>,
    inputs: Vec<u32>,
    error: Option<(OpKind, usize)>,
}

/// Append-only record of elementary operations for reverse-mode
/// differentiation.
///
/// Every node only references operands with smaller indices, so a single
/// reverse pass in index order propagates adjoints correctly.
pub struct Tape {
    nodes: RefCell<Nodes>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        let nodes = Nodes {
            offsets: alloc::vec![0],
            ..Nodes::default()
        };
        Self {
            nodes: RefCell::new(nodes),
        }
    }

    /// Registers a new independent variable.
    pub fn input(&self, value: f64) -> Var<'_> {
        let index = {
            let mut n = self.nodes.borrow_mut();
            let index = n.kinds.len() as u32;
            n.kinds.push(OpKind::Input);
            let end = n.args.len() as u32;
            n.offsets.push(end);
            n.inputs.push(index);
            index
        };
        Var {
            tape: Some(self),
            index,
            value,
        }
    }

    /// Registers one input per value.
    pub fn inputs(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.input(v)).collect()
    }

    /// Number of recorded nodes (inputs included).
    pub fn len(&self) -> usize {
        self.nodes.borrow().kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_count(&self) -> usize {
        self.nodes.borrow().inputs.len()
    }

    /// Operand indices of node `index`.
    pub fn operands(&self, index: usize) -> Vec<u32> {
        let n = self.nodes.borrow();
        let (s, e) = (n.offsets[index] as usize, n.offsets[index + 1] as usize);
        n.args[s..e].to_vec()
    }

    pub fn kind(&self, index: usize) -> OpKind {
        self.nodes.borrow().kinds[index]
    }

    /// First domain violation recorded on this tape, if any.
    pub fn error(&self) -> Option<Error> {
        self.nodes
            .borrow()
            .error
            .map(|(op, node)| Error::Domain { op, node })
    }

    pub(crate) fn push(&self, kind: OpKind, operands: &[(u32, f64)], value: f64) -> u32 {
        let mut n = self.nodes.borrow_mut();
        let index = n.kinds.len() as u32;
        n.kinds.push(kind);
        for &(a, p) in operands {
            debug_assert!(a < index);
            n.args.push(a);
            n.partials.push(p);
        }
        let end = n.args.len() as u32;
        n.offsets.push(end);
        if n.error.is_none() && !value.is_finite() {
            n.error = Some((kind, index as usize));
        }
        index
    }

    pub(crate) fn flag(&self, kind: OpKind) {
        let mut n = self.nodes.borrow_mut();
        if n.error.is_none() {
            let at = n.kinds.len();
            n.error = Some((kind, at));
        }
    }

    /// Reverse sweep from `output`, writing `d output / d input_j` into
    /// `grad[j]` for every registered input. `adjoint` is scratch space and is
    /// resized as needed.
    pub fn backward_into(&self, output: Var<'_>, adjoint: &mut Vec<f64>, grad: &mut [f64]) {
        let n = self.nodes.borrow();
        debug_assert_eq!(grad.len(), n.inputs.len());
        grad.iter_mut().for_each(|g| *g = 0.0);
        if output.tape.is_none() {
            return;
        }
        let top = output.index as usize;
        if adjoint.len() < top + 1 {
            adjoint.resize(top + 1, 0.0);
        }
        adjoint[..=top].iter_mut().for_each(|a| *a = 0.0);
        adjoint[top] = 1.0;
        for i in (0..=top).rev() {
            let a = adjoint[i];
            if a == 0.0 {
                continue;
            }
            let (s, e) = (n.offsets[i] as usize, n.offsets[i + 1] as usize);
            for k in s..e {
                adjoint[n.args[k] as usize] += a * n.partials[k];
            }
        }
        for (g, &idx) in grad.iter_mut().zip(n.inputs.iter()) {
            if (idx as usize) <= top {
                *g = adjoint[idx as usize];
            }
        }
    }

    /// Adjoint of `output` with respect to every registered input.
    pub fn backward(&self, output: Var<'_>) -> Vec<f64> {
        let mut grad = alloc::vec![0.0; self.input_count()];
        let mut scratch = Vec::new();
        self.backward_into(output, &mut scratch, &mut grad);
        grad
    }
}

/// A real value together with its node handle on the owning tape.
///
/// Constants carry no tape and record nothing when combined with each
/// other.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    pub(crate) tape: Option<&'t Tape>,
    pub(crate) index: u32,
    pub(crate) value: f64,
}

impl core::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self.tape {
            Some(_) => write!(f, "Var(#{}: {})", self.index, self.value),
            None => write!(f, "Var(const {})", self.value),
        }
    }
}

impl<'t> Var<'t> {
    pub fn constant(value: f64) -> Self {
        Self {
            tape: None,
            index: 0,
            value,
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Node index on the owning tape, `None` for constants.
    pub fn node(&self) -> Option<usize> {
        self.tape.map(|_| self.index as usize)
    }

    pub(crate) fn unary(self, kind: OpKind, value: f64, partial: f64) -> Self {
        match self.tape {
            None => Self::constant(value),
            Some(t) => Self {
                tape: Some(t),
                index: t.push(kind, &[(self.index, partial)], value),
                value,
            },
        }
    }

    pub(crate) fn binary(self, other: Self, kind: OpKind, value: f64, da: f64, db: f64) -> Self {
        let tape = match (self.tape, other.tape) {
            (None, None) => return Self::constant(value),
            (Some(a), Some(b)) => {
                debug_assert!(core::ptr::eq(a, b), "vars from different tapes");
                a
            }
            (Some(a), None) | (None, Some(a)) => a,
        };
        let mut ops = [(0u32, 0.0f64); 2];
        let mut k = 0;
        if self.tape.is_some() {
            ops[k] = (self.index, da);
            k += 1;
        }
        if other.tape.is_some() {
            ops[k] = (other.index, db);
            k += 1;
        }
        Self {
            tape: Some(tape),
            index: tape.push(kind, &ops[..k], value),
            value,
        }
    }

    /// Marks a domain violation on the owning tape and returns a NaN-valued
    /// constant.
    pub(crate) fn violate(kind: OpKind, tapes: &[Option<&'t Tape>]) -> Self {
        if let Some(t) = tapes.iter().flatten().next() {
            t.flag(kind);
        }
        Self::constant(f64::NAN)
    }
}

/// Records `f` once at `point` and extracts the dense Jacobian by one reverse
/// sweep per output. Returns the output values as well.
pub fn jacobian_with_values<F>(f: F, point: &[f64]) -> Result<(Vec<f64>, crate::linalg::Mat)>
where
    F: for<'t> FnOnce(&[Var<'t>]) -> Result<Vec<Var<'t>>>,
{
    let tape = Tape::new();
    let inputs = tape.inputs(point);
    let outputs = f(&inputs)?;
    if let Some(e) = tape.error() {
        return Err(e);
    }
    let rows = outputs.len();
    let cols = point.len();
    let mut jac = crate::linalg::Mat::zeros(rows, cols);
    let mut scratch = Vec::new();
    for (i, out) in outputs.iter().enumerate() {
        tape.backward_into(*out, &mut scratch, jac.row_mut(i));
    }
    let values = outputs.iter().map(|v| v.value).collect();
    Ok((values, jac))
}

/// Dense Jacobian of `f` at `point`; see [`jacobian_with_values`].
pub fn jacobian<F>(f: F, point: &[f64]) -> Result<crate::linalg::Mat>
where
    F: for<'t> FnOnce(&[Var<'t>]) -> Result<Vec<Var<'t>>>,
{
    jacobian_with_values(f, point).map(|(_, j)| j)
}
