#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "slubench/nn/matrix.hpp"
#include "slubench/nn/params.hpp"

namespace slubench::nn {

class Graph;

// Handle to a value recorded on a Graph. Copies refer to the same node.
class Tensor {
 public:
  Tensor() = default;

  const Matrix& value() const;
  // Gradient of the last backward() target; zeros if none reached this node.
  Matrix grad() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
  double item() const;

  Graph* graph() const { return graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Tensor(Graph* g, std::size_t id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Tape of one forward computation. Nodes are appended in evaluation order,
// which backward() replays in reverse. A Graph is single-threaded; run
// independent graphs concurrently over a shared read-only ParamStore.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Tensor constant(Matrix value);
  // Leaf bound to a stored parameter. The value is borrowed, so the store
  // must outlive the graph and stay unmodified while it is in use. Repeated
  // calls with the same name return the same node.
  Tensor param(const ParamStore& store, const std::string& name);

  // Seeds d(loss)/d(loss) = 1 and propagates. loss must be 1x1.
  void backward(Tensor loss);

  // Parameter gradients from the last backward(), keyed by name.
  std::map<std::string, Matrix> param_grads() const;
  void accumulate_param_grads(ParamStore& store, double scale = 1.0) const;

  // Op-implementation interface.
  Tensor record(Matrix value, std::vector<std::size_t> inputs, BackwardFn backward);
  const Matrix& value(std::size_t id) const;
  Matrix& grad_mut(std::size_t id);
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.data.empty(); }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    const Matrix* borrowed = nullptr;
    Matrix grad;
    bool needs_grad = false;
    BackwardFn backward;
    std::string param_name;
  };
  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> param_nodes_;
};

// --- primitive ops ---------------------------------------------------------
// Shape mismatches throw ContractError naming the op and the shapes.

Tensor matmul(Tensor a, Tensor b);
// Elementwise sum; b may also be a 1 x cols row broadcast over a's rows.
Tensor add(Tensor a, Tensor b);
Tensor sub(Tensor a, Tensor b);
Tensor mul(Tensor a, Tensor b);  // elementwise
Tensor scale(Tensor a, double factor);
// Row i of x multiplied by s(i, 0); s is rows x 1.
Tensor rowwise_scale(Tensor x, Tensor s);
Tensor tanh(Tensor x);
Tensor sigmoid(Tensor x);
Tensor relu(Tensor x);
// Row softmax. With a mask (same shape, nonzero = keep) masked entries get
// weight exactly 0; a fully masked row yields zeros.
Tensor softmax_rows(Tensor x, const Matrix* mask = nullptr);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(Tensor x, std::size_t begin, std::size_t end);
Tensor slice_cols(Tensor x, std::size_t begin, std::size_t end);
Tensor transpose(Tensor x);
// Per-row normalization with gain and bias rows (1 x cols).
Tensor layer_norm(Tensor x, Tensor gain, Tensor bias, double eps = 1e-5);
// Rows of a table picked by index.
Tensor embedding_gather(Tensor table, const std::vector<std::size_t>& indices);
// Row i = sum_k weight_k * table[index_k] over mixture i.
using Mixture = std::vector<std::pair<std::size_t, double>>;
Tensor embedding_mix(Tensor table, const std::vector<Mixture>& mixtures);
// Mean over rows of -log softmax(logits)[target]; returns 1x1.
Tensor cross_entropy(Tensor logits, const std::vector<std::size_t>& targets);

Tensor mean_rows(Tensor x);                 // 1 x cols
Tensor repeat_rows(Tensor x, std::size_t n);  // x is 1 x cols
Tensor sum_all(Tensor x);                   // 1 x 1

}  // namespace slubench::nn
