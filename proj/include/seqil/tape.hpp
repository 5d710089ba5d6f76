#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "seqil/tensor.hpp"

namespace seqil::ad {

using Ref = long;

// Named trainable array. Gradients accumulate here when a graph that
// references the parameter is differentiated.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string name_, Tensor value_)
      : name(std::move(name_)), value(std::move(value_)) {
    grad = Tensor::zeros(value.shape);
  }

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

// Reverse-mode tape. Nodes are appended in evaluation order; backward()
// sweeps them once in reverse, which is a valid topological order by
// construction. A graph is single-use: build, read values, differentiate.
class Graph {
 public:
  Ref constant(Tensor v);
  Ref scalar(double v) { return constant(Tensor::scalar(v)); }
  Ref param(Parameter& p);

  Ref add(Ref a, Ref b);
  Ref add_rowvec(Ref m, Ref v);
  Ref sub(Ref a, Ref b);
  Ref mul(Ref a, Ref b);
  Ref scale(Ref a, double s);
  Ref neg(Ref a) { return scale(a, -1.0); }
  Ref matmul(Ref a, Ref b);
  Ref matmul_nt(Ref a, Ref b);
  Ref gather_rows(Ref m, std::vector<long> row_ids);
  Ref pick(Ref m, std::vector<long> col_ids);
  Ref slice(Ref v, long lo, long len);
  Ref concat(const std::vector<Ref>& parts);
  Ref reshape(Ref x, std::vector<long> new_shape);
  Ref rowsum(Ref m);
  Ref sum(Ref x);
  Ref mean(Ref x);
  Ref square(Ref x);
  Ref relu(Ref x);
  Ref tanh_(Ref x);
  Ref exp_(Ref x);
  Ref softplus(Ref x);
  Ref log_softmax_rows(Ref m);
  Ref logsumexp_rows(Ref m);
  Ref softmax_rows(Ref m);

  // Both references are into the node arena: adding any node may
  // invalidate them, so copy when reading interleaves with building.
  const Tensor& val(Ref r) const { return node(r).value; }
  const Tensor& grad(Ref r) const { return node(r).grad; }

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every node
  // and every registered Parameter. The loss must be scalar. Single use.
  void backward(Ref loss);

  long size() const { return static_cast<long>(nodes_.size()); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Graph&)> back;
    Parameter* sink = nullptr;
  };

  std::vector<Node> nodes_;
  bool differentiated_ = false;

  Node& node(Ref r);
  const Node& node(Ref r) const;
  Ref push(Tensor value, std::function<void(Graph&)> back);
  void check_same_shape(const char* op, Ref a, Ref b) const;
  [[noreturn]] void fail(const std::string& msg) const;
};

}  // namespace seqil::ad
