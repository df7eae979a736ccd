#include "ovtok/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ovtok {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440084436210485;
constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;

void check_finite(const Tensor& t, const char* op) {
  for (double v : t.data) {
    if (!std::isfinite(v)) {
      throw std::runtime_error(std::string(op) + ": non-finite value produced");
    }
  }
}

void require_same_shape(const TensorPtr& a, const TensorPtr& b, const char* op) {
  if (!a->same_shape(*b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a->dims) +
                                " vs " + shape_string(b->dims));
}

}  // namespace

std::string shape_string(const std::vector<int>& dims) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << "x";
    os << dims[i];
  }
  os << "]";
  return os.str();
}

bool all_finite(const Tensor& t) {
  for (double v : t.data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::uint64_t fnv1a64(const void* bytes, std::size_t n, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<int> uniform_indices(int length, int count) {
  if (length < 1) throw std::invalid_argument("uniform_indices: empty range");
  if (count < 1) throw std::invalid_argument("uniform_indices: count < 1");
  std::vector<int> out(static_cast<std::size_t>(count));
  if (count == 1) {
    out[0] = 0;
    return out;
  }
  if (length < count) {
    for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = std::min(i, length - 1);
    return out;
  }
  for (int i = 0; i < count; ++i) {
    double x = static_cast<double>(i) * (length - 1) / (count - 1);
    out[static_cast<std::size_t>(i)] = static_cast<int>(std::ceil(x - 0.5));  // round half down
  }
  return out;
}

TensorPtr Graph::leaf(Tensor value, bool requires_grad) {
  auto t = std::make_shared<Tensor>(std::move(value));
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr Graph::leaf(TensorPtr value) { return value; }

TensorPtr Graph::record(Tensor value, bool grad_needed, std::function<void()> back) {
  auto out = std::make_shared<Tensor>(std::move(value));
  out->requires_grad = grad_needed;
  if (grad_needed) tape_.push_back(Entry{out, std::move(back)});
  return out;
}

void Graph::backward(TensorPtr loss) {
  if (loss->size() != 1) throw std::invalid_argument("backward: loss must be scalar");
  loss->ensure_grad();
  loss->grad[0] = 1.0;
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
    if (it->out->grad.empty()) continue;  // node not on the path to the loss
    it->back();
  }
}

TensorPtr Graph::matmul(TensorPtr a, TensorPtr b) {
  if (a->rank() != 2 || b->rank() != 2 || a->cols() != b->rows())
    throw std::invalid_argument("matmul: incompatible shapes " + shape_string(a->dims) + " " +
                                shape_string(b->dims));
  const int m = a->rows(), k = a->cols(), n = b->cols();
  Tensor value({m, n});
  for (int i = 0; i < m; ++i) {
    const double* arow = &a->data[static_cast<std::size_t>(i) * k];
    double* crow = &value.data[static_cast<std::size_t>(i) * n];
    for (int kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      const double* brow = &b->data[static_cast<std::size_t>(kk) * n];
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  check_finite(value, "matmul");
  const bool g = a->requires_grad || b->requires_grad;
  auto out = std::make_shared<Tensor>(std::move(value));
  out->requires_grad = g;
  if (g) {
    tape_.push_back(Entry{out, [a, b, out, m, k, n]() {
      const double* go = out->grad.data();
      if (a->requires_grad) {
        a->ensure_grad();
        for (int i = 0; i < m; ++i) {
          const double* grow = &go[static_cast<std::size_t>(i) * n];
          double* darow = &a->grad[static_cast<std::size_t>(i) * k];
          for (int kk = 0; kk < k; ++kk) {
            const double* brow = &b->data[static_cast<std::size_t>(kk) * n];
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
            darow[kk] += s;
          }
        }
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (int i = 0; i < m; ++i) {
          const double* arow = &a->data[static_cast<std::size_t>(i) * k];
          const double* grow = &go[static_cast<std::size_t>(i) * n];
          for (int kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            double* dbrow = &b->grad[static_cast<std::size_t>(kk) * n];
            for (int j = 0; j < n; ++j) dbrow[j] += av * grow[j];
          }
        }
      }
    }});
  }
  return out;
}

TensorPtr Graph::matmul_nt(TensorPtr a, TensorPtr b) {
  if (a->rank() != 2 || b->rank() != 2 || a->cols() != b->cols())
    throw std::invalid_argument("matmul_nt: incompatible shapes " + shape_string(a->dims) + " " +
                                shape_string(b->dims));
  const int m = a->rows(), k = a->cols(), n = b->rows();
  Tensor value({m, n});
  for (int i = 0; i < m; ++i) {
    const double* arow = &a->data[static_cast<std::size_t>(i) * k];
    for (int j = 0; j < n; ++j) {
      const double* brow = &b->data[static_cast<std::size_t>(j) * k];
      double s = 0.0;
      for (int kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
      value.data[static_cast<std::size_t>(i) * n + j] = s;
    }
  }
  check_finite(value, "matmul_nt");
  const bool g = a->requires_grad || b->requires_grad;
  auto out = std::make_shared<Tensor>(std::move(value));
  out->requires_grad = g;
  if (g) {
    tape_.push_back(Entry{out, [a, b, out, m, k, n]() {
      const double* go = out->grad.data();
      if (a->requires_grad) {
        a->ensure_grad();  // dA = G * B
        for (int i = 0; i < m; ++i) {
          const double* grow = &go[static_cast<std::size_t>(i) * n];
          double* darow = &a->grad[static_cast<std::size_t>(i) * k];
          for (int j = 0; j < n; ++j) {
            const double gv = grow[j];
            const double* brow = &b->data[static_cast<std::size_t>(j) * k];
            for (int kk = 0; kk < k; ++kk) darow[kk] += gv * brow[kk];
          }
        }
      }
      if (b->requires_grad) {
        b->ensure_grad();  // dB = G^T * A
        for (int i = 0; i < m; ++i) {
          const double* grow = &go[static_cast<std::size_t>(i) * n];
          const double* arow = &a->data[static_cast<std::size_t>(i) * k];
          for (int j = 0; j < n; ++j) {
            const double gv = grow[j];
            double* dbrow = &b->grad[static_cast<std::size_t>(j) * k];
            for (int kk = 0; kk < k; ++kk) dbrow[kk] += gv * arow[kk];
          }
        }
      }
    }});
  }
  return out;
}

TensorPtr Graph::add(TensorPtr a, TensorPtr b) {
  require_same_shape(a, b, "add");
  Tensor value(a->dims);
  for (std::size_t i = 0; i < value.size(); ++i) value.data[i] = a->data[i] + b->data[i];
  check_finite(value, "add");
  const bool g = a->requires_grad || b->requires_grad;
  auto out = std::make_shared<Tensor>(std::move(value));
  out->requires_grad = g;
  if (g) {
    tape_.push_back(Entry{out, [a, b, out]() {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < out->grad.size(); ++i) b->grad[i] += out->grad[i];
      }
    }});
  }
  return out;
}

TensorPtr Graph::add_rowvec(TensorPtr a, TensorPtr bias) {
  if (a->rank() != 2 || bias->rank() != 2 || bias->rows() != 1 || bias->cols() != a->cols())
    throw std::invalid_argument("add_rowvec: bias must be [1 x cols(a)]");
  const int m = a->rows(), n = a->cols();
  Tensor value({m, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      value.at2(i, j) = a->at2(i, j) + bias->data[static_cast<std::size_t>(j)];
  check_finite(value, "add_rowvec");
  const bool g = a->requires_grad || bias->requires_grad;
  auto out = std::make_shared<Tensor>(std::move(value));
  out->requires_grad = g;
  if (g) {
    tape_.push_back(Entry{out, [a, bias, out, m, n]() {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
      }
      if (bias->requires_grad) {
        bias->ensure_grad();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j)
            bias->grad[static_cast<std::size_t>(j)] += out->grad[static_cast<std::size_t>(i) * n + j];
      }
    }});
  }
  return out;
}

TensorPtr Graph::sub(TensorPtr a, TensorPtr b) {
  require_same_shape(a, b, "sub");
  Tensor value(a->dims);
  for (std::size_t i = 0; i < value.size(); ++i) value.data[i] = a->data[i] - b->data[i];
  check_finite(value, "sub");
  const bool g = a->requires_grad || b->requires_grad;
  auto out = std::make_shared<Tensor>(std::move(value));
  out->requires_grad = g;
  if (g) {
    tape_.push_back(Entry{out, [a, b, out]() {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < out->grad.size(); ++i) b->grad[i] -= out->grad[i];
      }
    }});
  }
  return out;
}

TensorPtr Graph::mul(TensorPtr a, TensorPtr b) {
  require_same_shape(a, b, "mul");
  Tensor value(a->dims);
  for (std::size_t i = 0; i < value.size(); ++i) value.data[i] = a->data[i] * b->data[i];
  check_finite(value, "mul");
  const bool g = a->requires_grad || b->requires_grad;
  auto out = std::make_shared<Tensor>(std::move(value));
  out->requires_grad = g;
  if (g) {
    tape_.push_back(Entry{out, [a, b, out]() {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i] * b->data[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < out->grad.size(); ++i) b->grad[i] += out->grad[i] * a->data[i];
      }
    }});
  }
  return out;
}

TensorPtr Graph::scale(TensorPtr a, double c) {
  Tensor value(a->dims);
  for (std::size_t i = 0; i < value.size(); ++i) value.data[i] = a->data[i] * c;
  check_finite(value, "scale");
  const bool g = a->requires_grad;
  auto out = std::make_shared<Tensor>(std::move(value));
  out->requires_grad = g;
  if (g) {
    tape_.push_back(Entry{out, [a, out, c]() {
      a->ensure_grad();
      for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i] * c;
    }});
  }
  return out;
}

TensorPtr Graph::gelu(TensorPtr a) {
  Tensor value(a->dims);
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double x = a->data[i];
    value.data[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  }
  check_finite(value, "gelu");
  const bool g = a->requires_grad;
  auto out = std::make_shared<Tensor>(std::move(value));
  out->requires_grad = g;
  if (g) {
    tape_.push_back(Entry{out, [a, out]() {
      a->ensure_grad();
      for (std::size_t i = 0; i < out->grad.size(); ++i) {
        const double x = a->data[i];
        const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
        a->grad[i] += out->grad[i] * (cdf + x * pdf);
      }
    }});
  }
  return out;
}

TensorPtr Graph::tanh(TensorPtr a) {
  Tensor value(a->dims);
  for (std::size_t i = 0; i < value.size(); ++i) value.data[i] = std::tanh(a->data[i]);
  const bool g = a->requires_grad;
  auto out = std::make_shared<Tensor>(std::move(value));
  out->requires_grad = g;
  if (g) {
    tape_.push_back(Entry{out, [a, out]() {
      a->ensure_grad();
      for (std::size_t i = 0; i < out->grad.size(); ++i) {
        const double y = out->data[i];
        a->grad[i] += out->grad[i] * (1.0 - y * y);
      }
    }});
  }
  return out;
}

TensorPtr Graph::sigmoid(TensorPtr a) {
  Tensor value(a->dims);
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double x = a->data[i];
    value.data[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  const bool g = a->requires_grad;
  auto out = std::make_shared<Tensor>(std::move(value));
  out->requires_grad = g;
  if (g) {
    tape_.push_back(Entry{out, [a, out]() {
      a->ensure_grad();
      for (std::size_t i = 0; i < out->grad.size(); ++i) {
        const double y = out->data[i];
        a->grad[i] += out->grad[i] * y * (1.0 - y);
      }
    }});
  }
  return out;
}

TensorPtr Graph::softmax(TensorPtr a, int axis) {
  const int r = a->rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw std::invalid_argument("softmax: axis out of range");
  const int n = a->dims[static_cast<std::size_t>(axis)];
  std::size_t inner = 1, outer = 1;
  for (int i = axis + 1; i < r; ++i) inner *= static_cast<std::size_t>(a->dims[static_cast<std::size_t>(i)]);
  for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(a->dims[static_cast<std::size_t>(i)]);

  Tensor value(a->dims);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = a->data[base];
      for (int j = 1; j < n; ++j) mx = std::max(mx, a->data[base + static_cast<std::size_t>(j) * inner]);
      double sum = 0.0;
      for (int j = 0; j < n; ++j) {
        const double e = std::exp(a->data[base + static_cast<std::size_t>(j) * inner] - mx);
        value.data[base + static_cast<std::size_t>(j) * inner] = e;
        sum += e;
      }
      for (int j = 0; j < n; ++j) value.data[base + static_cast<std::size_t>(j) * inner] /= sum;
    }
  }
  check_finite(value, "softmax");
  const bool g = a->requires_grad;
  auto out = std::make_shared<Tensor>(std::move(value));
  out->requires_grad = g;
  if (g) {
    tape_.push_back(Entry{out, [a, out, n, inner, outer]() {
      a->ensure_grad();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t base = o * n * inner + in;
          double dot = 0.0;
          for (int j = 0; j < n; ++j) {
            const std::size_t idx = base + static_cast<std::size_t>(j) * inner;
            dot += out->grad[idx] * out->data[idx];
          }
          for (int j = 0; j < n; ++j) {
            const std::size_t idx = base + static_cast<std::size_t>(j) * inner;
            a->grad[idx] += out->data[idx] * (out->grad[idx] - dot);
          }
        }
      }
    }});
  }
  return out;
}

TensorPtr Graph::causal_softmax(TensorPtr scores) {
  if (scores->rank() != 2 || scores->rows() != scores->cols())
    throw std::invalid_argument("causal_softmax: expects square [L x L] scores");
  const int L = scores->rows();
  Tensor value({L, L});
  for (int i = 0; i < L; ++i) {
    double mx = scores->at2(i, 0);
    for (int j = 1; j <= i; ++j) mx = std::max(mx, scores->at2(i, j));
    double sum = 0.0;
    for (int j = 0; j <= i; ++j) {
      const double e = std::exp(scores->at2(i, j) - mx);
      value.at2(i, j) = e;
      sum += e;
    }
    for (int j = 0; j <= i; ++j) value.at2(i, j) /= sum;
    // j > i stays exactly zero
  }
  check_finite(value, "causal_softmax");
  const bool g = scores->requires_grad;
  auto out = std::make_shared<Tensor>(std::move(value));
  out->requires_grad = g;
  if (g) {
    tape_.push_back(Entry{out, [scores, out, L]() {
      scores->ensure_grad();
      for (int i = 0; i < L; ++i) {
        double dot = 0.0;
        for (int j = 0; j <= i; ++j) dot += out->grad[static_cast<std::size_t>(i) * L + j] * out->at2(i, j);
        for (int j = 0; j <= i; ++j) {
          const std::size_t idx = static_cast<std::size_t>(i) * L + j;
          scores->grad[idx] += out->data[idx] * (out->grad[idx] - dot);
        }
      }
    }});
  }
  return out;
}

TensorPtr Graph::slice_rows(TensorPtr a, int r0, int r1) {
  if (a->rank() != 2 || r0 < 0 || r1 > a->rows() || r0 >= r1)
    throw std::invalid_argument("slice_rows: bad range");
  const int n = a->cols(), m = r1 - r0;
  Tensor value({m, n});
  std::copy(a->data.begin() + static_cast<std::ptrdiff_t>(r0) * n,
            a->data.begin() + static_cast<std::ptrdiff_t>(r1) * n, value.data.begin());
  const bool g = a->requires_grad;
  auto out = std::make_shared<Tensor>(std::move(value));
  out->requires_grad = g;
  if (g) {
    tape_.push_back(Entry{out, [a, out, r0, n]() {
      a->ensure_grad();
      for (std::size_t i = 0; i < out->grad.size(); ++i)
        a->grad[static_cast<std::size_t>(r0) * n + i] += out->grad[i];
    }});
  }
  return out;
}

TensorPtr Graph::slice_cols(TensorPtr a, int c0, int c1) {
  if (a->rank() != 2 || c0 < 0 || c1 > a->cols() || c0 >= c1)
    throw std::invalid_argument("slice_cols: bad range");
  const int m = a->rows(), n = a->cols(), w = c1 - c0;
  Tensor value({m, w});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < w; ++j) value.at2(i, j) = a->at2(i, c0 + j);
  const bool g = a->requires_grad;
  auto out = std::make_shared<Tensor>(std::move(value));
  out->requires_grad = g;
  if (g) {
    tape_.push_back(Entry{out, [a, out, c0, m, n, w]() {
      a->ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < w; ++j)
          a->grad[static_cast<std::size_t>(i) * n + c0 + j] += out->grad[static_cast<std::size_t>(i) * w + j];
    }});
  }
  return out;
}

TensorPtr Graph::concat_rows(const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
  const int n = parts[0]->cols();
  int m = 0;
  for (const auto& p : parts) {
    if (p->rank() != 2 || p->cols() != n)
      throw std::invalid_argument("concat_rows: column mismatch");
    m += p->rows();
  }
  Tensor value({m, n});
  std::size_t off = 0;
  bool g = false;
  for (const auto& p : parts) {
    std::copy(p->data.begin(), p->data.end(), value.data.begin() + static_cast<std::ptrdiff_t>(off));
    off += p->size();
    g = g || p->requires_grad;
  }
  auto out = std::make_shared<Tensor>(std::move(value));
  out->requires_grad = g;
  if (g) {
    tape_.push_back(Entry{out, [parts, out]() {
      std::size_t off = 0;
      for (const auto& p : parts) {
        if (p->requires_grad) {
          p->ensure_grad();
          for (std::size_t i = 0; i < p->size(); ++i) p->grad[i] += out->grad[off + i];
        }
        off += p->size();
      }
    }});
  }
  return out;
}

TensorPtr Graph::concat_cols(const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  const int m = parts[0]->rows();
  int n = 0;
  for (const auto& p : parts) {
    if (p->rank() != 2 || p->rows() != m) throw std::invalid_argument("concat_cols: row mismatch");
    n += p->cols();
  }
  Tensor value({m, n});
  bool g = false;
  int c0 = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < p->cols(); ++j) value.at2(i, c0 + j) = p->at2(i, j);
    c0 += p->cols();
    g = g || p->requires_grad;
  }
  auto out = std::make_shared<Tensor>(std::move(value));
  out->requires_grad = g;
  if (g) {
    tape_.push_back(Entry{out, [parts, out, m, n]() {
      int c0 = 0;
      for (const auto& p : parts) {
        const int w = p->cols();
        if (p->requires_grad) {
          p->ensure_grad();
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < w; ++j)
              p->grad[static_cast<std::size_t>(i) * w + j] += out->grad[static_cast<std::size_t>(i) * n + c0 + j];
        }
        c0 += w;
      }
    }});
  }
  return out;
}

TensorPtr Graph::mean_rows(TensorPtr a) {
  if (a->rank() != 2) throw std::invalid_argument("mean_rows: expects matrix");
  const int k = a->rows(), n = a->cols();
  Tensor value({1, n});
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < n; ++j) value.data[static_cast<std::size_t>(j)] += a->at2(i, j);
  for (int j = 0; j < n; ++j) value.data[static_cast<std::size_t>(j)] /= k;
  const bool g = a->requires_grad;
  auto out = std::make_shared<Tensor>(std::move(value));
  out->requires_grad = g;
  if (g) {
    tape_.push_back(Entry{out, [a, out, k, n]() {
      a->ensure_grad();
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < n; ++j)
          a->grad[static_cast<std::size_t>(i) * n + j] += out->grad[static_cast<std::size_t>(j)] / k;
    }});
  }
  return out;
}

TensorPtr Graph::sum_all(TensorPtr a) {
  Tensor value({1, 1});
  for (double v : a->data) value.data[0] += v;
  const bool g = a->requires_grad;
  auto out = std::make_shared<Tensor>(std::move(value));
  out->requires_grad = g;
  if (g) {
    tape_.push_back(Entry{out, [a, out]() {
      a->ensure_grad();
      for (std::size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += out->grad[0];
    }});
  }
  return out;
}

TensorPtr Graph::embedding_rows(TensorPtr table, const std::vector<int>& ids) {
  if (table->rank() != 2) throw std::invalid_argument("embedding_rows: table must be matrix");
  const int V = table->rows(), d = table->cols();
  for (int id : ids)
    if (id < 0 || id >= V) throw std::out_of_range("embedding_rows: id out of range");
  const int n = static_cast<int>(ids.size());
  if (n == 0) throw std::invalid_argument("embedding_rows: empty id list");
  Tensor value({n, d});
  for (int i = 0; i < n; ++i)
    std::copy(table->data.begin() + static_cast<std::ptrdiff_t>(ids[static_cast<std::size_t>(i)]) * d,
              table->data.begin() + static_cast<std::ptrdiff_t>(ids[static_cast<std::size_t>(i)] + 1) * d,
              value.data.begin() + static_cast<std::ptrdiff_t>(i) * d);
  const bool g = table->requires_grad;
  auto out = std::make_shared<Tensor>(std::move(value));
  out->requires_grad = g;
  if (g) {
    tape_.push_back(Entry{out, [table, out, ids, d, n]() {
      table->ensure_grad();
      for (int i = 0; i < n; ++i) {
        double* trow = &table->grad[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)]) * d];
        const double* grow = &out->grad[static_cast<std::size_t>(i) * d];
        for (int j = 0; j < d; ++j) trow[j] += grow[j];
      }
    }});
  }
  return out;
}

TensorPtr Graph::layer_norm(TensorPtr a, TensorPtr gain, TensorPtr bias, double eps) {
  if (a->rank() != 2) throw std::invalid_argument("layer_norm: expects matrix");
  const int m = a->rows(), n = a->cols();
  if (gain->size() != static_cast<std::size_t>(n) || bias->size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("layer_norm: gain/bias must have row width");
  Tensor value({m, n});
  auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(m) * n);
  auto istd = std::make_shared<std::vector<double>>(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    double mu = 0.0;
    for (int j = 0; j < n; ++j) mu += a->at2(i, j);
    mu /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      const double dv = a->at2(i, j) - mu;
      var += dv * dv;
    }
    var /= n;
    const double is = 1.0 / std::sqrt(var + eps);
    (*istd)[static_cast<std::size_t>(i)] = is;
    for (int j = 0; j < n; ++j) {
      const double xh = (a->at2(i, j) - mu) * is;
      (*xhat)[static_cast<std::size_t>(i) * n + j] = xh;
      value.at2(i, j) = gain->data[static_cast<std::size_t>(j)] * xh + bias->data[static_cast<std::size_t>(j)];
    }
  }
  check_finite(value, "layer_norm");
  const bool g = a->requires_grad || gain->requires_grad || bias->requires_grad;
  auto out = std::make_shared<Tensor>(std::move(value));
  out->requires_grad = g;
  if (g) {
    tape_.push_back(Entry{out, [a, gain, bias, out, xhat, istd, m, n]() {
      for (int i = 0; i < m; ++i) {
        const double* grow = &out->grad[static_cast<std::size_t>(i) * n];
        const double* xh = &(*xhat)[static_cast<std::size_t>(i) * n];
        if (gain->requires_grad) {
          gain->ensure_grad();
          for (int j = 0; j < n; ++j) gain->grad[static_cast<std::size_t>(j)] += grow[j] * xh[j];
        }
        if (bias->requires_grad) {
          bias->ensure_grad();
          for (int j = 0; j < n; ++j) bias->grad[static_cast<std::size_t>(j)] += grow[j];
        }
        if (a->requires_grad) {
          a->ensure_grad();
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          for (int j = 0; j < n; ++j) {
            const double dxh = grow[j] * gain->data[static_cast<std::size_t>(j)];
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xh[j];
          }
          mean_dxhat /= n;
          mean_dxhat_xhat /= n;
          const double is = (*istd)[static_cast<std::size_t>(i)];
          for (int j = 0; j < n; ++j) {
            const double dxh = grow[j] * gain->data[static_cast<std::size_t>(j)];
            a->grad[static_cast<std::size_t>(i) * n + j] += is * (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat);
          }
        }
      }
    }});
  }
  return out;
}

TensorPtr Graph::cross_entropy(TensorPtr logits, const std::vector<int>& targets,
                               const std::vector<bool>& mask) {
  if (logits->rank() != 2) throw std::invalid_argument("cross_entropy: logits must be matrix");
  const int L = logits->rows(), V = logits->cols();
  if (static_cast<int>(targets.size()) != L || static_cast<int>(mask.size()) != L)
    throw std::invalid_argument("cross_entropy: targets/mask length mismatch");
  int count = 0;
  for (int i = 0; i < L; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    if (targets[static_cast<std::size_t>(i)] < 0 || targets[static_cast<std::size_t>(i)] >= V)
      throw std::out_of_range("cross_entropy: target out of range");
    ++count;
  }
  Tensor value({1, 1});
  auto probs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(L) * V);
  double total = 0.0;
  for (int i = 0; i < L; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    const double* row = &logits->data[static_cast<std::size_t>(i) * V];
    double mx = row[0];
    for (int j = 1; j < V; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < V; ++j) sum += std::exp(row[j] - mx);
    const double lse = mx + std::log(sum);
    total += lse - row[targets[static_cast<std::size_t>(i)]];
    for (int j = 0; j < V; ++j)
      (*probs)[static_cast<std::size_t>(i) * V + j] = std::exp(row[j] - lse);
  }
  value.data[0] = count > 0 ? total / count : 0.0;
  check_finite(value, "cross_entropy");
  const bool g = logits->requires_grad && count > 0;
  auto out = std::make_shared<Tensor>(std::move(value));
  out->requires_grad = g;
  if (g) {
    tape_.push_back(Entry{out, [logits, out, probs, targets, mask, L, V, count]() {
      logits->ensure_grad();
      const double go = out->grad[0] / count;
      for (int i = 0; i < L; ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        double* grow = &logits->grad[static_cast<std::size_t>(i) * V];
        const double* prow = &(*probs)[static_cast<std::size_t>(i) * V];
        for (int j = 0; j < V; ++j) grow[j] += go * prow[j];
        grow[targets[static_cast<std::size_t>(i)]] -= go;
      }
    }});
  }
  return out;
}

}  // namespace ovtok
