use std::cell::RefCell;

use crate::dtype::Scalar;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Index of a recorded value on a [`Tape`].
pub type NodeId = usize;

/// Computes gradients w.r.t. each parent given the gradient w.r.t. the
/// node's output. Captures whatever forward values it needs (cheap, storage
/// is shared). Must return one tensor per parent, in parent order.
type BackwardFn<S> = Box<dyn Fn(&Tensor<S>) -> Vec<Tensor<S>>>;

struct Node<S: Scalar> {
    value: Tensor<S>,
    parents: Vec<NodeId>,
    backward: Option<BackwardFn<S>>,
    needs_grad: bool,
}

/// Wengert list for reverse-mode differentiation. Ops append nodes during
/// the forward pass; `backward` replays them in reverse. Creation order is
/// topological by construction (an op can only reference existing nodes).
///
/// A tape is single-threaded; one training computation per tape.
pub struct Tape<S: Scalar> {
    nodes: RefCell<Vec<Node<S>>>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape { nodes: RefCell::new(Vec::new()) }
    }

    /// Record an input value. Only leaves with `requires_grad` (and values
    /// derived from them) receive gradients.
    pub fn leaf(&self, value: Tensor<S>, requires_grad: bool) -> NodeId {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, parents: Vec::new(), backward: None, needs_grad: requires_grad });
        nodes.len() - 1
    }

    pub fn constant(&self, value: Tensor<S>) -> NodeId {
        self.leaf(value, false)
    }

    /// Record an op application. When no parent needs gradients the backward
    /// closure is dropped so eval-mode forwards carry no overhead beyond
    /// node bookkeeping.
    pub fn push(
        &self,
        value: Tensor<S>,
        parents: Vec<NodeId>,
        backward: impl FnOnce() -> BackwardFn<S>,
    ) -> NodeId {
        let mut nodes = self.nodes.borrow_mut();
        let needs_grad = parents.iter().any(|&p| nodes[p].needs_grad);
        let backward = if needs_grad { Some(backward()) } else { None };
        nodes.push(Node { value, parents, backward, needs_grad });
        nodes.len() - 1
    }

    pub fn value(&self, id: NodeId) -> Tensor<S> {
        self.nodes.borrow()[id].value.clone()
    }

    pub fn shape(&self, id: NodeId) -> Vec<usize> {
        self.nodes.borrow()[id].value.shape().to_vec()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    /// Reverse sweep from a scalar root. Returns per-node gradients; nodes
    /// unreachable from the root (or not requiring grad) have none.
    pub fn backward(&self, root: NodeId) -> Result<Gradients<S>> {
        let nodes = self.nodes.borrow();
        let root_node = &nodes[root];
        if root_node.value.numel() != 1 {
            return Err(Error::shape(
                "backward",
                format!("root must be scalar, got shape {:?}", root_node.value.shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor<S>>> = vec![None; nodes.len()];
        grads[root] = Some(Tensor::full(root_node.value.shape(), S::one()));
        for id in (0..=root).rev() {
            let node = &nodes[id];
            if !node.needs_grad {
                grads[id] = None;
                continue;
            }
            let Some(gout) = grads[id].clone() else { continue };
            let Some(back) = node.backward.as_ref() else { continue };
            let parent_grads = back(&gout);
            debug_assert_eq!(parent_grads.len(), node.parents.len());
            for (&pid, pg) in node.parents.iter().zip(parent_grads) {
                if !nodes[pid].needs_grad {
                    continue;
                }
                debug_assert_eq!(pg.shape(), nodes[pid].value.shape());
                match &mut grads[pid] {
                    Some(acc) => acc.axpy(S::one(), &pg)?,
                    slot => *slot = Some(pg),
                }
            }
        }
        Ok(Gradients { by_node: grads })
    }
}

/// Result of a reverse sweep, indexed by the node ids of the same tape.
pub struct Gradients<S: Scalar> {
    by_node: Vec<Option<Tensor<S>>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn get(&self, id: NodeId) -> Option<&Tensor<S>> {
        self.by_node.get(id).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, id: NodeId) -> Option<Tensor<S>> {
        self.by_node.get_mut(id).and_then(|g| g.take())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops;

    #[test]
    fn backward_requires_scalar_root() {
        let tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::zeros(&[3]), true);
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn constant_paths_get_no_gradient() {
        let tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::full(&[2], 3.0), true);
        let c = tape.constant(Tensor::full(&[2], 5.0));
        let y = ops::mul(&tape, x, c).unwrap();
        let s = ops::sum_all(&tape, y).unwrap();
        let grads = tape.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[5.0, 5.0]);
        assert!(grads.get(c).is_none());
    }

    #[test]
    fn fan_out_accumulates_gradients() {
        // f(x) = sum(x*x) + sum(x) -> df/dx = 2x + 1
        let tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::new(vec![2], vec![1.0, -2.0]).unwrap(), true);
        let sq = ops::mul(&tape, x, x).unwrap();
        let a = ops::sum_all(&tape, sq).unwrap();
        let b = ops::sum_all(&tape, x).unwrap();
        let s = ops::add(&tape, a, b).unwrap();
        let grads = tape.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[3.0, -3.0]);
    }
}
