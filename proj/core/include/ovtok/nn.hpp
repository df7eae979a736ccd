#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ovtok/graph.hpp"

namespace ovtok {

/// Named parameter list, the unit of checkpointing and freezing.
using NamedParams = std::vector<std::pair<std::string, TensorPtr>>;

inline std::vector<TensorPtr> values_of(const NamedParams& named) {
  std::vector<TensorPtr> out;
  out.reserve(named.size());
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

/// Uniform init scaled by 1/sqrt(fan_in), deterministic given the Rng state.
TensorPtr init_param(std::vector<int> dims, int fan_in, Rng& rng);
TensorPtr zeros_param(std::vector<int> dims);
TensorPtr ones_param(std::vector<int> dims);

struct Linear {
  TensorPtr weight;  // [in x out]
  TensorPtr bias;    // [1 x out]

  static Linear init(int in, int out, Rng& rng);
  TensorPtr forward(Graph& g, TensorPtr x) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

/// Two-layer perceptron: fc1 -> GELU -> fc2.
struct Mlp {
  Linear fc1;
  Linear fc2;

  static Mlp init(int in, int hidden, int out, Rng& rng);
  TensorPtr forward(Graph& g, TensorPtr x) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct AttentionResult {
  TensorPtr output;  // [L x d]
  Tensor weights;    // [heads x L x L], forward values only
};

/// Scaled dot-product attention over pre-projected Q/K/V of width d split
/// into `heads`. Causal masking zeroes strictly-future weights exactly.
AttentionResult multihead_attention(Graph& g, TensorPtr q, TensorPtr k, TensorPtr v, int heads,
                                    bool causal);

/// Stacked LSTM parameters; gate column order is input, forget, cell, output.
struct LstmParams {
  struct Layer {
    TensorPtr wx;  // [in x 4H]
    TensorPtr wh;  // [H x 4H]
    TensorPtr b;   // [1 x 4H]
  };
  std::vector<Layer> layers;
  int hidden = 0;

  static LstmParams init(int input, int hidden, int num_layers, Rng& rng);
  void collect(const std::string& prefix, NamedParams& out) const;
};

/// Runs the LSTM recurrence with zero initial state over seq [k x in];
/// returns all top-layer hidden states [k x H]. Throws on k == 0 input.
TensorPtr lstm_forward(Graph& g, TensorPtr seq, const LstmParams& p);

/// Pre-norm transformer block: x += attn(LN1(x)); x += ffn(LN2(x)).
struct TransformerBlock {
  TensorPtr ln1_gain, ln1_bias, ln2_gain, ln2_bias;
  Linear wq, wk, wv, wo;
  Linear ff1, ff2;
  int heads = 1;

  struct Out {
    TensorPtr x;
    Tensor attn;  // [heads x L x L]
  };

  static TransformerBlock init(int dim, int heads, int ff_hidden, Rng& rng);
  Out forward(Graph& g, TensorPtr x, bool causal) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

}  // namespace ovtok
