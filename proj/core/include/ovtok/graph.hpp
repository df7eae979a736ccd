#pragma once

#include <functional>
#include <vector>

#include "ovtok/tensor.hpp"

namespace ovtok {

/// Reverse-mode autograd tape. Ops append an entry in execution order;
/// backward() replays the tape in reverse, so the reverse order is a valid
/// topological order by construction. All data is Tensor<double>; matrices
/// are [rows x cols], vectors are [1 x n] rows.
///
/// Backward closures write raw gradient arithmetic (no second-order tape).
class Graph {
 public:
  /// Registers a leaf. Leaves with requires_grad accumulate gradients but
  /// have no backward entry of their own.
  TensorPtr leaf(Tensor value, bool requires_grad = false);
  TensorPtr leaf(TensorPtr value);

  // -- elementwise & linear algebra ------------------------------------
  TensorPtr matmul(TensorPtr a, TensorPtr b);
  /// A [m x k] times B^T where B is [n x k]; result [m x n].
  TensorPtr matmul_nt(TensorPtr a, TensorPtr b);
  TensorPtr add(TensorPtr a, TensorPtr b);
  /// Broadcast-add a row vector [1 x n] to every row of a [m x n].
  TensorPtr add_rowvec(TensorPtr a, TensorPtr bias);
  TensorPtr sub(TensorPtr a, TensorPtr b);
  TensorPtr mul(TensorPtr a, TensorPtr b);
  TensorPtr scale(TensorPtr a, double c);

  // -- nonlinearities ----------------------------------------------------
  TensorPtr gelu(TensorPtr a);
  TensorPtr tanh(TensorPtr a);
  TensorPtr sigmoid(TensorPtr a);

  /// Softmax along the given axis (negative counts from the back).
  TensorPtr softmax(TensorPtr a, int axis = -1);
  /// Row-wise softmax over a [L x L] score matrix where row i only sees
  /// columns j <= i. Masked entries are exactly zero.
  TensorPtr causal_softmax(TensorPtr scores);

  // -- shape plumbing ----------------------------------------------------
  TensorPtr slice_rows(TensorPtr a, int r0, int r1);
  TensorPtr slice_cols(TensorPtr a, int c0, int c1);
  TensorPtr concat_rows(const std::vector<TensorPtr>& parts);
  TensorPtr concat_cols(const std::vector<TensorPtr>& parts);
  /// Mean over rows: [k x n] -> [1 x n].
  TensorPtr mean_rows(TensorPtr a);
  /// Sum of all entries -> [1 x 1].
  TensorPtr sum_all(TensorPtr a);
  /// Gather rows of table [V x d] at the given indices -> [n x d].
  TensorPtr embedding_rows(TensorPtr table, const std::vector<int>& ids);

  /// Per-row layer norm over the last axis with learnable gain/bias [1 x n].
  TensorPtr layer_norm(TensorPtr a, TensorPtr gain, TensorPtr bias, double eps = 1e-5);

  /// Mean cross entropy of logits [L x V] against integer targets, skipping
  /// positions whose mask entry is false. Returns [1 x 1].
  TensorPtr cross_entropy(TensorPtr logits, const std::vector<int>& targets,
                          const std::vector<bool>& mask);

  /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse.
  void backward(TensorPtr loss);

  std::size_t tape_size() const { return tape_.size(); }

 private:
  struct Entry {
    TensorPtr out;
    std::function<void()> back;
  };

  TensorPtr record(Tensor value, bool grad_needed, std::function<void()> back);
  static bool needs_grad(const TensorPtr& t) { return t->requires_grad; }

  std::vector<Entry> tape_;
};

}  // namespace ovtok
