//! Dense float64 tensors with reverse-mode automatic differentiation.
//!
//! All tensors live in a [`Tape`] arena and are addressed by [`TensorId`].
//! Every operation records enough on the tape to replay the chain rule in
//! reverse insertion order, which makes backward deterministic: the same
//! seeded program produces bit-identical forward and backward values.
//!
//! The op set is small but closed over everything the graph layers need:
//! matmul, broadcasted arithmetic, pointwise nonlinearities, concat/slice,
//! axis reductions, row gather, and segment reductions keyed by an integer
//! index vector. Two fused ops (`gru_gates`, `segment_reduce`) collapse the
//! hottest composite patterns into single tape nodes.

mod backward;
pub mod check;
mod kernels;
mod ops;

use std::rc::Rc;

pub use ops::{ReduceKind, ScalerColumn};

/// Index of a tensor in its tape's arena.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(pub(crate) u32);

impl TensorId {
    #[inline]
    pub(crate) fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("empty segment {segment} in {op}")]
    EmptySegment { op: &'static str, segment: usize },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("backward on a tensor detached from the gradient graph")]
    DetachedTensor,
    #[error("repeated backward without resetting gradients")]
    RepeatedBackward,
    #[error("degree must be >= 1, got 0")]
    ZeroDegree,
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// How the right operand of a binary op lines up with the left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Bcast {
    /// Identical shapes.
    Same,
    /// Right operand has a single element.
    Scalar,
    /// Right operand's shape is a suffix of the left's (e.g. a row bias
    /// added to every row of a matrix); it is tiled over the leading dims.
    Suffix,
}

/// Auxiliary state saved by `segment_reduce` for its backward pass.
#[derive(Debug, Default)]
pub(crate) struct SegReduceSaved {
    /// Per-segment mean, `[n_seg * channels]`. Present whenever any kind
    /// needs it (mean/std/moment).
    mean: Vec<f64>,
    /// Unscaled aggregator outputs, `[n_seg * kinds * channels]`.
    raw: Vec<f64>,
    /// Argmax/argmin row indices for max/min kinds, one block of
    /// `n_seg * channels` per extremal kind, in kind order.
    arg: Vec<u32>,
    /// For each moment kind in order: E[(x-mean)^(k-1)], `[n_seg * channels]`.
    moment_prev: Vec<f64>,
    /// For each softmax/softmin kind in order: the per-row weights,
    /// `[rows * channels]`.
    soft_w: Vec<f64>,
}

#[derive(Debug)]
pub(crate) enum Op {
    Leaf,
    Matmul { a: TensorId, b: TensorId, m: usize, k: usize, n: usize },
    Add { a: TensorId, b: TensorId, bcast: Bcast },
    Sub { a: TensorId, b: TensorId, bcast: Bcast },
    Mul { a: TensorId, b: TensorId, bcast: Bcast },
    Div { a: TensorId, b: TensorId, bcast: Bcast },
    Scale { a: TensorId, c: f64 },
    AddScalar { a: TensorId },
    Relu { a: TensorId },
    LeakyRelu { a: TensorId, slope: f64 },
    Sigmoid { a: TensorId },
    Tanh { a: TensorId },
    Exp { a: TensorId },
    Log { a: TensorId },
    Sqrt { a: TensorId },
    SignedPow { a: TensorId, p: f64, eps: f64 },
    ConcatCols { parts: Vec<TensorId> },
    SliceCols { a: TensorId, start: usize },
    SliceRows { a: TensorId, start: usize },
    SumAll { a: TensorId },
    SumAxis { a: TensorId, axis: usize },
    MeanAxis { a: TensorId, axis: usize },
    Gather { a: TensorId, idx: Rc<Vec<u32>> },
    SegmentSum { a: TensorId, seg: Rc<Vec<u32>> },
    SegmentMean { a: TensorId, seg: Rc<Vec<u32>> },
    SegmentMax { a: TensorId, seg: Rc<Vec<u32>>, arg: Vec<u32> },
    SegmentMin { a: TensorId, seg: Rc<Vec<u32>>, arg: Vec<u32> },
    MulColumn { a: TensorId, col: TensorId },
    GruGates { gx: TensorId, gh: TensorId, h: TensorId, gates: Vec<f64> },
    SegmentReduce {
        values: TensorId,
        seg: Rc<Vec<u32>>,
        kinds: Vec<ReduceKind>,
        scalers: Vec<ScalerColumn>,
        saved: SegReduceSaved,
    },
}

#[derive(Debug)]
pub(crate) struct Node {
    pub(crate) data: Vec<f64>,
    pub(crate) shape: Vec<usize>,
    pub(crate) requires_grad: bool,
    pub(crate) grad: Option<Vec<f64>>,
    pub(crate) op: Op,
}

/// Arena of tensors plus the recorded program that produced them.
///
/// One tape is one single-threaded unit of work; distinct tapes are
/// independent and may live on distinct threads.
pub struct Tape {
    pub(crate) nodes: Vec<Node>,
    grad_enabled: bool,
    backward_run: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), grad_enabled: true, backward_run: false }
    }

    /// A tape that records nothing: forward values only. Used for
    /// evaluation passes where gradients are never needed.
    pub fn inference() -> Self {
        Tape { nodes: Vec::new(), grad_enabled: false, backward_run: false }
    }

    pub fn grad_enabled(&self) -> bool {
        self.grad_enabled
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Insert a leaf tensor. Rejects non-finite values.
    pub fn leaf(&mut self, data: Vec<f64>, shape: &[usize], requires_grad: bool) -> Result<TensorId> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(TensorError::ShapeMismatch {
                op: "leaf",
                detail: format!("shape {:?} implies {} elements, data has {}", shape, numel, data.len()),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(TensorError::NonFinite("leaf"));
        }
        Ok(self.push(data, shape.to_vec(), requires_grad && self.grad_enabled, Op::Leaf))
    }

    /// Insert a constant (no gradient) leaf.
    pub fn constant(&mut self, data: Vec<f64>, shape: &[usize]) -> Result<TensorId> {
        self.leaf(data, shape, false)
    }

    pub fn scalar(&mut self, v: f64) -> Result<TensorId> {
        self.leaf(vec![v], &[1], false)
    }

    pub fn zeros(&mut self, shape: &[usize], requires_grad: bool) -> TensorId {
        let numel: usize = shape.iter().product();
        self.push(vec![0.0; numel], shape.to_vec(), requires_grad && self.grad_enabled, Op::Leaf)
    }

    pub(crate) fn push(&mut self, data: Vec<f64>, shape: Vec<usize>, requires_grad: bool, op: Op) -> TensorId {
        let id = TensorId(self.nodes.len() as u32);
        // In inference mode or for non-grad results the producing op is not
        // kept; backward never visits such nodes.
        let op = if requires_grad { op } else { Op::Leaf };
        self.nodes.push(Node { data, shape, requires_grad, grad: None, op });
        id
    }

    pub fn data(&self, id: TensorId) -> &[f64] {
        &self.nodes[id.idx()].data
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.nodes[id.idx()].shape
    }

    pub fn numel(&self, id: TensorId) -> usize {
        self.nodes[id.idx()].data.len()
    }

    pub fn requires_grad(&self, id: TensorId) -> bool {
        self.nodes[id.idx()].requires_grad
    }

    /// Gradient buffer of `id`, if backward has reached it.
    pub fn grad(&self, id: TensorId) -> Option<&[f64]> {
        self.nodes[id.idx()].grad.as_deref()
    }

    /// Checked error if any stored value of `id` is NaN or infinite.
    pub fn check_finite(&self, id: TensorId, context: &'static str) -> Result<()> {
        if self.nodes[id.idx()].data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(TensorError::NonFinite(context))
        }
    }

    /// Drop all gradient buffers and re-arm backward.
    pub fn clear_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
        self.backward_run = false;
    }

    /// Reverse-mode sweep from a scalar loss. Gradients accumulate
    /// additively into each `requires_grad` tensor's buffer; calling this
    /// twice without [`Tape::clear_grads`] is an error.
    pub fn backward(&mut self, loss: TensorId) -> Result<()> {
        if self.backward_run {
            return Err(TensorError::RepeatedBackward);
        }
        if self.numel(loss) != 1 {
            return Err(TensorError::NonScalarLoss(self.shape(loss).to_vec()));
        }
        if !self.requires_grad(loss) {
            return Err(TensorError::DetachedTensor);
        }
        if !self.data(loss)[0].is_finite() {
            return Err(TensorError::NonFinite("backward loss"));
        }
        self.backward_run = true;
        self.nodes[loss.idx()].grad = Some(vec![1.0]);
        for i in (0..=loss.idx()).rev() {
            if self.nodes[i].grad.is_none() || !self.nodes[i].requires_grad {
                continue;
            }
            self.backprop_node(i);
        }
        Ok(())
    }

    pub(crate) fn ensure_grad(&mut self, id: TensorId) -> &mut [f64] {
        let idx = id.idx();
        if self.nodes[idx].grad.is_none() {
            let n = self.nodes[idx].data.len();
            self.nodes[idx].grad = Some(vec![0.0; n]);
        }
        self.nodes[idx].grad.as_deref_mut().unwrap()
    }
}
