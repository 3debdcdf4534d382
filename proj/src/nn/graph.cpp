#include "slubench/nn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "slubench/errors.hpp"
#include "slubench/nn/kernels.hpp"

namespace slubench::nn {

const Matrix& Tensor::value() const {
  if (!graph_) throw ContractError("Tensor: empty handle");
  return graph_->value(id_);
}

Matrix Tensor::grad() const {
  if (!graph_) throw ContractError("Tensor: empty handle");
  if (graph_->has_grad(id_)) return graph_->grad_mut(id_);
  return Matrix(rows(), cols());
}

double Tensor::item() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ContractError("Tensor::item on " + shape_string(v));
  return v.data[0];
}

Tensor Graph::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Tensor(this, nodes_.size() - 1);
}

Tensor Graph::param(const ParamStore& store, const std::string& name) {
  if (auto it = param_nodes_.find(name); it != param_nodes_.end()) return Tensor(this, it->second);
  Node n;
  n.borrowed = &store.at(name).value;
  n.needs_grad = true;
  n.param_name = name;
  nodes_.push_back(std::move(n));
  param_nodes_[name] = nodes_.size() - 1;
  return Tensor(this, nodes_.size() - 1);
}

Tensor Graph::record(Matrix value, std::vector<std::size_t> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (std::size_t in : inputs) n.needs_grad = n.needs_grad || nodes_[in].needs_grad;
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Tensor(this, nodes_.size() - 1);
}

const Matrix& Graph::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.borrowed ? *n.borrowed : n.value;
}

Matrix& Graph::grad_mut(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.data.empty()) {
    const Matrix& v = value(id);
    n.grad = Matrix(v.rows, v.cols);
  }
  return n.grad;
}

void Graph::backward(Tensor loss) {
  if (loss.graph() != this) throw ContractError("backward: tensor belongs to another graph");
  if (value(loss.id()).size() != 1) throw ContractError("backward: loss must be 1x1");
  for (auto& n : nodes_) n.grad = Matrix();
  grad_mut(loss.id()).data[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.data.empty()) n.backward(*this, i);
  }
}

std::map<std::string, Matrix> Graph::param_grads() const {
  std::map<std::string, Matrix> out;
  for (const auto& [name, id] : param_nodes_) {
    const Node& n = nodes_[id];
    out[name] = n.grad.data.empty() ? Matrix(n.borrowed->rows, n.borrowed->cols) : n.grad;
  }
  return out;
}

void Graph::accumulate_param_grads(ParamStore& store, double scale) const {
  for (const auto& [name, id] : param_nodes_) {
    const Node& n = nodes_[id];
    if (n.grad.data.empty()) continue;
    Parameter& p = store.at(name);
    if (p.grad.data.empty()) p.grad = Matrix(p.value.rows, p.value.cols);
    kernels::axpy(scale, n.grad, p.grad);
  }
}

namespace {

Graph& graph_of(std::initializer_list<Tensor> ts, const char* op) {
  Graph* g = nullptr;
  for (const Tensor& t : ts) {
    if (!t.valid()) throw ContractError(std::string(op) + ": empty tensor handle");
    if (g && t.graph() != g) throw ContractError(std::string(op) + ": tensors from different graphs");
    g = t.graph();
  }
  return *g;
}

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw ContractError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

template <typename F, typename D>
Tensor unary(Tensor x, const char* op, F f, D dfdy) {
  Graph& g = graph_of({x}, op);
  const Matrix& xv = x.value();
  Matrix y(xv.rows, xv.cols);
  for (std::size_t i = 0; i < xv.size(); ++i) y.data[i] = f(xv.data[i]);
  std::size_t xi = x.id();
  return g.record(std::move(y), {xi}, [xi, dfdy](Graph& g, std::size_t self) {
    if (!g.needs_grad(xi)) return;
    const Matrix& yv = g.value(self);
    const Matrix& xv = g.value(xi);
    const Matrix& dy = g.grad_mut(self);
    Matrix& dx = g.grad_mut(xi);
    for (std::size_t i = 0; i < dy.size(); ++i) dx.data[i] += dy.data[i] * dfdy(xv.data[i], yv.data[i]);
  });
}

}  // namespace

Tensor matmul(Tensor a, Tensor b) {
  Graph& g = graph_of({a, b}, "matmul");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols != bv.rows) shape_error("matmul", av, bv);
  Matrix c(av.rows, bv.cols);
  kernels::gemm(av, false, bv, false, c, false);
  std::size_t ai = a.id(), bi = b.id();
  return g.record(std::move(c), {ai, bi}, [ai, bi](Graph& g, std::size_t self) {
    const Matrix& dc = g.grad_mut(self);
    if (g.needs_grad(ai)) kernels::gemm(dc, false, g.value(bi), true, g.grad_mut(ai), true);
    if (g.needs_grad(bi)) kernels::gemm(g.value(ai), true, dc, false, g.grad_mut(bi), true);
  });
}

Tensor add(Tensor a, Tensor b) {
  Graph& g = graph_of({a, b}, "add");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  bool broadcast = !av.same_shape(bv);
  if (broadcast && !(bv.rows == 1 && bv.cols == av.cols)) shape_error("add", av, bv);
  Matrix c = av;
  for (std::size_t r = 0; r < c.rows; ++r)
    for (std::size_t k = 0; k < c.cols; ++k) c(r, k) += broadcast ? bv(0, k) : bv(r, k);
  std::size_t ai = a.id(), bi = b.id();
  return g.record(std::move(c), {ai, bi}, [ai, bi, broadcast](Graph& g, std::size_t self) {
    const Matrix& dc = g.grad_mut(self);
    if (g.needs_grad(ai)) kernels::axpy(1.0, dc, g.grad_mut(ai));
    if (!g.needs_grad(bi)) return;
    Matrix& db = g.grad_mut(bi);
    if (!broadcast) {
      kernels::axpy(1.0, dc, db);
    } else {
      for (std::size_t r = 0; r < dc.rows; ++r)
        for (std::size_t k = 0; k < dc.cols; ++k) db(0, k) += dc(r, k);
    }
  });
}

Tensor sub(Tensor a, Tensor b) {
  Graph& g = graph_of({a, b}, "sub");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (!av.same_shape(bv)) shape_error("sub", av, bv);
  Matrix c = av;
  for (std::size_t i = 0; i < c.size(); ++i) c.data[i] -= bv.data[i];
  std::size_t ai = a.id(), bi = b.id();
  return g.record(std::move(c), {ai, bi}, [ai, bi](Graph& g, std::size_t self) {
    const Matrix& dc = g.grad_mut(self);
    if (g.needs_grad(ai)) kernels::axpy(1.0, dc, g.grad_mut(ai));
    if (g.needs_grad(bi)) kernels::axpy(-1.0, dc, g.grad_mut(bi));
  });
}

Tensor mul(Tensor a, Tensor b) {
  Graph& g = graph_of({a, b}, "mul");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (!av.same_shape(bv)) shape_error("mul", av, bv);
  Matrix c = av;
  for (std::size_t i = 0; i < c.size(); ++i) c.data[i] *= bv.data[i];
  std::size_t ai = a.id(), bi = b.id();
  return g.record(std::move(c), {ai, bi}, [ai, bi](Graph& g, std::size_t self) {
    const Matrix& dc = g.grad_mut(self);
    if (g.needs_grad(ai)) {
      const Matrix& bv = g.value(bi);
      Matrix& da = g.grad_mut(ai);
      for (std::size_t i = 0; i < dc.size(); ++i) da.data[i] += dc.data[i] * bv.data[i];
    }
    if (g.needs_grad(bi)) {
      const Matrix& av = g.value(ai);
      Matrix& db = g.grad_mut(bi);
      for (std::size_t i = 0; i < dc.size(); ++i) db.data[i] += dc.data[i] * av.data[i];
    }
  });
}

Tensor scale(Tensor a, double factor) {
  return unary(
      a, "scale", [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor rowwise_scale(Tensor x, Tensor s) {
  Graph& g = graph_of({x, s}, "rowwise_scale");
  const Matrix& xv = x.value();
  const Matrix& sv = s.value();
  if (sv.rows != xv.rows || sv.cols != 1) shape_error("rowwise_scale", xv, sv);
  Matrix y = xv;
  for (std::size_t r = 0; r < y.rows; ++r)
    for (std::size_t k = 0; k < y.cols; ++k) y(r, k) *= sv(r, 0);
  std::size_t xi = x.id(), si = s.id();
  return g.record(std::move(y), {xi, si}, [xi, si](Graph& g, std::size_t self) {
    const Matrix& dy = g.grad_mut(self);
    const Matrix& xv = g.value(xi);
    const Matrix& sv = g.value(si);
    if (g.needs_grad(xi)) {
      Matrix& dx = g.grad_mut(xi);
      for (std::size_t r = 0; r < dy.rows; ++r)
        for (std::size_t k = 0; k < dy.cols; ++k) dx(r, k) += dy(r, k) * sv(r, 0);
    }
    if (g.needs_grad(si)) {
      Matrix& ds = g.grad_mut(si);
      for (std::size_t r = 0; r < dy.rows; ++r)
        for (std::size_t k = 0; k < dy.cols; ++k) ds(r, 0) += dy(r, k) * xv(r, k);
    }
  });
}

Tensor tanh(Tensor x) {
  return unary(
      x, "tanh", [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(Tensor x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(Tensor x) {
  return unary(
      x, "relu", [](double v) { return v > 0 ? v : 0.0; },
      [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor softmax_rows(Tensor x, const Matrix* mask) {
  Graph& g = graph_of({x}, "softmax_rows");
  const Matrix& xv = x.value();
  if (mask && !mask->same_shape(xv)) shape_error("softmax_rows mask", xv, *mask);
  Matrix y(xv.rows, xv.cols);
  for (std::size_t r = 0; r < xv.rows; ++r) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < xv.cols; ++k)
      if (!mask || (*mask)(r, k) != 0.0) m = std::max(m, xv(r, k));
    if (m == -std::numeric_limits<double>::infinity()) continue;
    double z = 0.0;
    for (std::size_t k = 0; k < xv.cols; ++k) {
      if (mask && (*mask)(r, k) == 0.0) continue;
      y(r, k) = std::exp(xv(r, k) - m);
      z += y(r, k);
    }
    for (std::size_t k = 0; k < xv.cols; ++k) y(r, k) /= z;
  }
  std::size_t xi = x.id();
  return g.record(std::move(y), {xi}, [xi](Graph& g, std::size_t self) {
    if (!g.needs_grad(xi)) return;
    const Matrix& yv = g.value(self);
    const Matrix& dy = g.grad_mut(self);
    Matrix& dx = g.grad_mut(xi);
    for (std::size_t r = 0; r < yv.rows; ++r) {
      double dot = 0.0;
      for (std::size_t k = 0; k < yv.cols; ++k) dot += dy(r, k) * yv(r, k);
      for (std::size_t k = 0; k < yv.cols; ++k) dx(r, k) += yv(r, k) * (dy(r, k) - dot);
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  Graph& g = graph_of({parts.front()}, "concat_cols");
  std::size_t rows = parts.front().rows(), cols = 0;
  std::vector<std::size_t> ids, offsets;
  for (const Tensor& t : parts) {
    graph_of({parts.front(), t}, "concat_cols");
    if (t.rows() != rows) shape_error("concat_cols", parts.front().value(), t.value());
    ids.push_back(t.id());
    offsets.push_back(cols);
    cols += t.cols();
  }
  Matrix y(rows, cols);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Matrix& v = parts[p].value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t k = 0; k < v.cols; ++k) y(r, offsets[p] + k) = v(r, k);
  }
  return g.record(std::move(y), ids, [ids, offsets](Graph& g, std::size_t self) {
    const Matrix& dy = g.grad_mut(self);
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (!g.needs_grad(ids[p])) continue;
      Matrix& dx = g.grad_mut(ids[p]);
      for (std::size_t r = 0; r < dx.rows; ++r)
        for (std::size_t k = 0; k < dx.cols; ++k) dx(r, k) += dy(r, offsets[p] + k);
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  Graph& g = graph_of({parts.front()}, "concat_rows");
  std::size_t cols = parts.front().cols(), rows = 0;
  std::vector<std::size_t> ids, offsets;
  for (const Tensor& t : parts) {
    graph_of({parts.front(), t}, "concat_rows");
    if (t.cols() != cols) shape_error("concat_rows", parts.front().value(), t.value());
    ids.push_back(t.id());
    offsets.push_back(rows);
    rows += t.rows();
  }
  Matrix y(rows, cols);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Matrix& v = parts[p].value();
    std::copy(v.data.begin(), v.data.end(), y.data.begin() + static_cast<std::ptrdiff_t>(offsets[p] * cols));
  }
  return g.record(std::move(y), ids, [ids, offsets](Graph& g, std::size_t self) {
    const Matrix& dy = g.grad_mut(self);
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (!g.needs_grad(ids[p])) continue;
      Matrix& dx = g.grad_mut(ids[p]);
      const double* src = dy.data.data() + offsets[p] * dy.cols;
      for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += src[i];
    }
  });
}

Tensor slice_rows(Tensor x, std::size_t begin, std::size_t end) {
  Graph& g = graph_of({x}, "slice_rows");
  const Matrix& xv = x.value();
  if (begin > end || end > xv.rows)
    throw ContractError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                        ") out of " + shape_string(xv));
  Matrix y(end - begin, xv.cols);
  std::copy(xv.data.begin() + static_cast<std::ptrdiff_t>(begin * xv.cols),
            xv.data.begin() + static_cast<std::ptrdiff_t>(end * xv.cols), y.data.begin());
  std::size_t xi = x.id();
  return g.record(std::move(y), {xi}, [xi, begin](Graph& g, std::size_t self) {
    if (!g.needs_grad(xi)) return;
    const Matrix& dy = g.grad_mut(self);
    Matrix& dx = g.grad_mut(xi);
    double* dst = dx.data.data() + begin * dx.cols;
    for (std::size_t i = 0; i < dy.size(); ++i) dst[i] += dy.data[i];
  });
}

Tensor slice_cols(Tensor x, std::size_t begin, std::size_t end) {
  Graph& g = graph_of({x}, "slice_cols");
  const Matrix& xv = x.value();
  if (begin > end || end > xv.cols)
    throw ContractError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                        ") out of " + shape_string(xv));
  Matrix y(xv.rows, end - begin);
  for (std::size_t r = 0; r < xv.rows; ++r)
    for (std::size_t k = begin; k < end; ++k) y(r, k - begin) = xv(r, k);
  std::size_t xi = x.id();
  return g.record(std::move(y), {xi}, [xi, begin](Graph& g, std::size_t self) {
    if (!g.needs_grad(xi)) return;
    const Matrix& dy = g.grad_mut(self);
    Matrix& dx = g.grad_mut(xi);
    for (std::size_t r = 0; r < dy.rows; ++r)
      for (std::size_t k = 0; k < dy.cols; ++k) dx(r, begin + k) += dy(r, k);
  });
}

Tensor transpose(Tensor x) {
  Graph& g = graph_of({x}, "transpose");
  const Matrix& xv = x.value();
  Matrix y(xv.cols, xv.rows);
  for (std::size_t r = 0; r < xv.rows; ++r)
    for (std::size_t k = 0; k < xv.cols; ++k) y(k, r) = xv(r, k);
  std::size_t xi = x.id();
  return g.record(std::move(y), {xi}, [xi](Graph& g, std::size_t self) {
    if (!g.needs_grad(xi)) return;
    const Matrix& dy = g.grad_mut(self);
    Matrix& dx = g.grad_mut(xi);
    for (std::size_t r = 0; r < dx.rows; ++r)
      for (std::size_t k = 0; k < dx.cols; ++k) dx(r, k) += dy(k, r);
  });
}

Tensor layer_norm(Tensor x, Tensor gain, Tensor bias, double eps) {
  Graph& g = graph_of({x, gain, bias}, "layer_norm");
  const Matrix& xv = x.value();
  const Matrix& gv = gain.value();
  const Matrix& bv = bias.value();
  if (gv.rows != 1 || gv.cols != xv.cols) shape_error("layer_norm gain", xv, gv);
  if (bv.rows != 1 || bv.cols != xv.cols) shape_error("layer_norm bias", xv, bv);
  const std::size_t d = xv.cols;
  Matrix xhat(xv.rows, d), y(xv.rows, d);
  std::vector<double> inv(xv.rows);
  for (std::size_t r = 0; r < xv.rows; ++r) {
    double mean = 0.0;
    for (std::size_t k = 0; k < d; ++k) mean += xv(r, k);
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t k = 0; k < d; ++k) var += (xv(r, k) - mean) * (xv(r, k) - mean);
    var /= static_cast<double>(d);
    inv[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t k = 0; k < d; ++k) {
      xhat(r, k) = (xv(r, k) - mean) * inv[r];
      y(r, k) = xhat(r, k) * gv(0, k) + bv(0, k);
    }
  }
  std::size_t xi = x.id(), gi = gain.id(), bi = bias.id();
  return g.record(std::move(y), {xi, gi, bi},
                  [xi, gi, bi, xhat = std::move(xhat), inv = std::move(inv)](Graph& g, std::size_t self) {
                    const Matrix& dy = g.grad_mut(self);
                    const Matrix& gv = g.value(gi);
                    const std::size_t d = dy.cols;
                    if (g.needs_grad(gi)) {
                      Matrix& dg = g.grad_mut(gi);
                      for (std::size_t r = 0; r < dy.rows; ++r)
                        for (std::size_t k = 0; k < d; ++k) dg(0, k) += dy(r, k) * xhat(r, k);
                    }
                    if (g.needs_grad(bi)) {
                      Matrix& db = g.grad_mut(bi);
                      for (std::size_t r = 0; r < dy.rows; ++r)
                        for (std::size_t k = 0; k < d; ++k) db(0, k) += dy(r, k);
                    }
                    if (!g.needs_grad(xi)) return;
                    Matrix& dx = g.grad_mut(xi);
                    for (std::size_t r = 0; r < dy.rows; ++r) {
                      double sum = 0.0, sum_xhat = 0.0;
                      for (std::size_t k = 0; k < d; ++k) {
                        double dxh = dy(r, k) * gv(0, k);
                        sum += dxh;
                        sum_xhat += dxh * xhat(r, k);
                      }
                      for (std::size_t k = 0; k < d; ++k) {
                        double dxh = dy(r, k) * gv(0, k);
                        dx(r, k) += inv[r] / static_cast<double>(d) *
                                    (static_cast<double>(d) * dxh - sum - xhat(r, k) * sum_xhat);
                      }
                    }
                  });
}

Tensor embedding_gather(Tensor table, const std::vector<std::size_t>& indices) {
  std::vector<Mixture> mix;
  mix.reserve(indices.size());
  for (std::size_t i : indices) mix.push_back({{i, 1.0}});
  return embedding_mix(table, mix);
}

Tensor embedding_mix(Tensor table, const std::vector<Mixture>& mixtures) {
  Graph& g = graph_of({table}, "embedding_mix");
  const Matrix& tv = table.value();
  Matrix y(mixtures.size(), tv.cols);
  for (std::size_t r = 0; r < mixtures.size(); ++r) {
    for (const auto& [idx, w] : mixtures[r]) {
      if (idx >= tv.rows)
        throw ContractError("embedding: index " + std::to_string(idx) + " out of table " + shape_string(tv));
      for (std::size_t k = 0; k < tv.cols; ++k) y(r, k) += w * tv(idx, k);
    }
  }
  std::size_t ti = table.id();
  return g.record(std::move(y), {ti}, [ti, mixtures](Graph& g, std::size_t self) {
    if (!g.needs_grad(ti)) return;
    const Matrix& dy = g.grad_mut(self);
    Matrix& dt = g.grad_mut(ti);
    for (std::size_t r = 0; r < mixtures.size(); ++r)
      for (const auto& [idx, w] : mixtures[r])
        for (std::size_t k = 0; k < dy.cols; ++k) dt(idx, k) += w * dy(r, k);
  });
}

Tensor cross_entropy(Tensor logits, const std::vector<std::size_t>& targets) {
  Graph& g = graph_of({logits}, "cross_entropy");
  const Matrix& z = logits.value();
  if (targets.size() != z.rows)
    throw ContractError("cross_entropy: " + std::to_string(targets.size()) + " targets for " + shape_string(z));
  Matrix probs(z.rows, z.cols);
  double loss = 0.0;
  for (std::size_t r = 0; r < z.rows; ++r) {
    if (targets[r] >= z.cols) throw ContractError("cross_entropy: target out of range");
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < z.cols; ++k) m = std::max(m, z(r, k));
    double s = 0.0;
    for (std::size_t k = 0; k < z.cols; ++k) {
      probs(r, k) = std::exp(z(r, k) - m);
      s += probs(r, k);
    }
    for (std::size_t k = 0; k < z.cols; ++k) probs(r, k) /= s;
    loss += m + std::log(s) - z(r, targets[r]);
  }
  const double n = static_cast<double>(z.rows);
  std::size_t zi = logits.id();
  return g.record(Matrix(1, 1, {loss / n}), {zi},
                  [zi, targets, n, probs = std::move(probs)](Graph& g, std::size_t self) {
                    if (!g.needs_grad(zi)) return;
                    double up = g.grad_mut(self).data[0];
                    Matrix& dz = g.grad_mut(zi);
                    for (std::size_t r = 0; r < probs.rows; ++r)
                      for (std::size_t k = 0; k < probs.cols; ++k)
                        dz(r, k) += up * (probs(r, k) - (k == targets[r] ? 1.0 : 0.0)) / n;
                  });
}

Tensor mean_rows(Tensor x) {
  Graph& g = graph_of({x}, "mean_rows");
  const Matrix& xv = x.value();
  if (xv.rows == 0) throw ContractError("mean_rows: no rows");
  Matrix y(1, xv.cols);
  for (std::size_t r = 0; r < xv.rows; ++r)
    for (std::size_t k = 0; k < xv.cols; ++k) y(0, k) += xv(r, k);
  for (auto& v : y.data) v /= static_cast<double>(xv.rows);
  std::size_t xi = x.id();
  return g.record(std::move(y), {xi}, [xi](Graph& g, std::size_t self) {
    if (!g.needs_grad(xi)) return;
    const Matrix& dy = g.grad_mut(self);
    Matrix& dx = g.grad_mut(xi);
    const double inv = 1.0 / static_cast<double>(dx.rows);
    for (std::size_t r = 0; r < dx.rows; ++r)
      for (std::size_t k = 0; k < dx.cols; ++k) dx(r, k) += dy(0, k) * inv;
  });
}

Tensor repeat_rows(Tensor x, std::size_t n) {
  Graph& g = graph_of({x}, "repeat_rows");
  const Matrix& xv = x.value();
  if (xv.rows != 1) throw ContractError("repeat_rows: expects a single row, got " + shape_string(xv));
  Matrix y(n, xv.cols);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < xv.cols; ++k) y(r, k) = xv(0, k);
  std::size_t xi = x.id();
  return g.record(std::move(y), {xi}, [xi](Graph& g, std::size_t self) {
    if (!g.needs_grad(xi)) return;
    const Matrix& dy = g.grad_mut(self);
    Matrix& dx = g.grad_mut(xi);
    for (std::size_t r = 0; r < dy.rows; ++r)
      for (std::size_t k = 0; k < dy.cols; ++k) dx(0, k) += dy(r, k);
  });
}

Tensor sum_all(Tensor x) {
  Graph& g = graph_of({x}, "sum_all");
  double s = 0.0;
  for (double v : x.value().data) s += v;
  std::size_t xi = x.id();
  return g.record(Matrix(1, 1, {s}), {xi}, [xi](Graph& g, std::size_t self) {
    if (!g.needs_grad(xi)) return;
    double up = g.grad_mut(self).data[0];
    Matrix& dx = g.grad_mut(xi);
    for (auto& v : dx.data) v += up;
  });
}

}  // namespace slubench::nn
