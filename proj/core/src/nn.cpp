#include "ovtok/nn.hpp"

#include <cmath>

namespace ovtok {

TensorPtr init_param(std::vector<int> dims, int fan_in, Rng& rng) {
  auto t = make_tensor(std::move(dims));
  const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t->data) v = rng.uniform(-a, a);
  t->requires_grad = true;
  return t;
}

TensorPtr zeros_param(std::vector<int> dims) {
  auto t = make_tensor(std::move(dims));
  t->requires_grad = true;
  return t;
}

TensorPtr ones_param(std::vector<int> dims) {
  auto t = make_tensor(std::move(dims), 1.0);
  t->requires_grad = true;
  return t;
}

Linear Linear::init(int in, int out, Rng& rng) {
  Linear l;
  l.weight = init_param({in, out}, in, rng);
  l.bias = zeros_param({1, out});
  return l;
}

TensorPtr Linear::forward(Graph& g, TensorPtr x) const {
  return g.add_rowvec(g.matmul(x, weight), bias);
}

void Linear::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

Mlp Mlp::init(int in, int hidden, int out, Rng& rng) {
  Mlp m;
  m.fc1 = Linear::init(in, hidden, rng);
  m.fc2 = Linear::init(hidden, out, rng);
  return m;
}

TensorPtr Mlp::forward(Graph& g, TensorPtr x) const {
  return fc2.forward(g, g.gelu(fc1.forward(g, x)));
}

void Mlp::collect(const std::string& prefix, NamedParams& out) const {
  fc1.collect(prefix + ".fc1", out);
  fc2.collect(prefix + ".fc2", out);
}

AttentionResult multihead_attention(Graph& g, TensorPtr q, TensorPtr k, TensorPtr v, int heads,
                                    bool causal) {
  if (q->rank() != 2 || !q->same_shape(*k) || !q->same_shape(*v))
    throw std::invalid_argument("multihead_attention: Q/K/V must share [L x d]");
  const int L = q->rows(), d = q->cols();
  if (heads < 1 || d % heads != 0)
    throw std::invalid_argument("multihead_attention: d must be divisible by heads");
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor weights({heads, L, L});
  std::vector<TensorPtr> head_outputs;
  head_outputs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    auto qh = g.slice_cols(q, h * dh, (h + 1) * dh);
    auto kh = g.slice_cols(k, h * dh, (h + 1) * dh);
    auto vh = g.slice_cols(v, h * dh, (h + 1) * dh);
    auto scores = g.scale(g.matmul_nt(qh, kh), scale);
    auto w = causal ? g.causal_softmax(scores) : g.softmax(scores, -1);
    std::copy(w->data.begin(), w->data.end(),
              weights.data.begin() + static_cast<std::ptrdiff_t>(h) * L * L);
    head_outputs.push_back(g.matmul(w, vh));
  }
  AttentionResult res;
  res.output = g.concat_cols(head_outputs);
  res.weights = std::move(weights);
  return res;
}

LstmParams LstmParams::init(int input, int hidden, int num_layers, Rng& rng) {
  LstmParams p;
  p.hidden = hidden;
  int in = input;
  for (int l = 0; l < num_layers; ++l) {
    Layer layer;
    layer.wx = init_param({in, 4 * hidden}, in, rng);
    layer.wh = init_param({hidden, 4 * hidden}, hidden, rng);
    layer.b = zeros_param({1, 4 * hidden});
    p.layers.push_back(layer);
    in = hidden;
  }
  return p;
}

void LstmParams::collect(const std::string& prefix, NamedParams& out) const {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string base = prefix + ".l" + std::to_string(l);
    out.emplace_back(base + ".wx", layers[l].wx);
    out.emplace_back(base + ".wh", layers[l].wh);
    out.emplace_back(base + ".b", layers[l].b);
  }
}

TensorPtr lstm_forward(Graph& g, TensorPtr seq, const LstmParams& p) {
  if (seq->rank() != 2 || seq->rows() < 1)
    throw std::invalid_argument("lstm_forward: empty sequence");
  const int k = seq->rows();
  const int H = p.hidden;

  TensorPtr layer_in = seq;
  for (const auto& layer : p.layers) {
    TensorPtr h = g.leaf(Tensor({1, H}));
    TensorPtr c = g.leaf(Tensor({1, H}));
    std::vector<TensorPtr> hs;
    hs.reserve(static_cast<std::size_t>(k));
    for (int t = 0; t < k; ++t) {
      auto xt = g.slice_rows(layer_in, t, t + 1);
      auto z = g.add_rowvec(g.add(g.matmul(xt, layer.wx), g.matmul(h, layer.wh)), layer.b);
      auto gate_i = g.sigmoid(g.slice_cols(z, 0, H));
      auto gate_f = g.sigmoid(g.slice_cols(z, H, 2 * H));
      auto gate_g = g.tanh(g.slice_cols(z, 2 * H, 3 * H));
      auto gate_o = g.sigmoid(g.slice_cols(z, 3 * H, 4 * H));
      c = g.add(g.mul(gate_f, c), g.mul(gate_i, gate_g));
      h = g.mul(gate_o, g.tanh(c));
      hs.push_back(h);
    }
    layer_in = g.concat_rows(hs);
  }
  return layer_in;
}

TransformerBlock TransformerBlock::init(int dim, int heads, int ff_hidden, Rng& rng) {
  TransformerBlock b;
  b.heads = heads;
  b.ln1_gain = ones_param({1, dim});
  b.ln1_bias = zeros_param({1, dim});
  b.ln2_gain = ones_param({1, dim});
  b.ln2_bias = zeros_param({1, dim});
  b.wq = Linear::init(dim, dim, rng);
  b.wk = Linear::init(dim, dim, rng);
  b.wv = Linear::init(dim, dim, rng);
  b.wo = Linear::init(dim, dim, rng);
  b.ff1 = Linear::init(dim, ff_hidden, rng);
  b.ff2 = Linear::init(ff_hidden, dim, rng);
  return b;
}

TransformerBlock::Out TransformerBlock::forward(Graph& g, TensorPtr x, bool causal) const {
  auto normed = g.layer_norm(x, ln1_gain, ln1_bias);
  auto attn = multihead_attention(g, wq.forward(g, normed), wk.forward(g, normed),
                                  wv.forward(g, normed), heads, causal);
  auto after_attn = g.add(x, wo.forward(g, attn.output));
  auto normed2 = g.layer_norm(after_attn, ln2_gain, ln2_bias);
  auto ffn = ff2.forward(g, g.gelu(ff1.forward(g, normed2)));
  Out out;
  out.x = g.add(after_attn, ffn);
  out.attn = std::move(attn.weights);
  return out;
}

void TransformerBlock::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".ln1.gain", ln1_gain);
  out.emplace_back(prefix + ".ln1.bias", ln1_bias);
  out.emplace_back(prefix + ".ln2.gain", ln2_gain);
  out.emplace_back(prefix + ".ln2.bias", ln2_bias);
  wq.collect(prefix + ".wq", out);
  wk.collect(prefix + ".wk", out);
  wv.collect(prefix + ".wv", out);
  wo.collect(prefix + ".wo", out);
  ff1.collect(prefix + ".ff1", out);
  ff2.collect(prefix + ".ff2", out);
}

}  // namespace ovtok
