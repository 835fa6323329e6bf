// Reverse-mode automatic differentiation over Eigen double matrices.
//
// A Graph is a tape: every operation appends a node holding its value and a
// closure that routes the incoming gradient to its parents. Creation order is
// a valid topological order, so backward() is a single reverse sweep. Graphs
// are cheap, single-threaded objects built per forward pass; parameters are
// referenced (not copied) through leaf nodes.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <functional>
#include <vector>

#include "lipnovo/rng.hpp"

namespace lipnovo::ad {

class Graph;

class Var {
public:
  Var() = default;
  const Eigen::MatrixXd& value() const;
  // Gradient accumulated by backward(); empty matrix if the node was never
  // reached or does not require gradients.
  const Eigen::MatrixXd& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool valid() const { return g_ != nullptr; }

private:
  friend class Graph;
  Var(Graph* g, int idx) : g_(g), idx_(idx) {}
  Graph* g_ = nullptr;
  int idx_ = -1;
};

class Graph {
public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf referencing external storage; the matrix must outlive the graph.
  Var leaf(const Eigen::MatrixXd* value, bool requires_grad);
  Var constant(Eigen::MatrixXd value);

  Var matmul(Var a, Var b);     // A * B
  Var matmul_nt(Var a, Var b);  // A * B^T
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  Var add_rowvec(Var a, Var row);  // broadcast a 1 x C row over all rows
  Var hadamard(Var a, Var b);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var log(Var a);
  Var clamp(Var a, double lo, double hi);
  // Row-wise softmax. `allowed`, when given, marks entries that participate;
  // disallowed entries are exactly zero in the output (and get zero gradient).
  Var softmax_rows(Var a, const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>*
                              allowed = nullptr);
  Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-5);
  Var concat_rows(Var a, Var b);
  Var concat_cols(const std::vector<Var>& parts);
  Var slice_rows(Var a, int start, int count);
  Var slice_cols(Var a, int start, int count);
  Var gather_rows(Var a, std::vector<int> indices);
  Var sum_squares(Var a);               // 1x1
  Var sum_all(Var a);                   // 1x1
  Var mean_all(Var a);                  // 1x1
  // Mean over rows of label-smoothed cross entropy between row logits and
  // target class ids. Smoothing mass eps is spread over all classes.
  Var cross_entropy_rows(Var logits, std::vector<int> targets, double label_smoothing);
  // Inverted dropout; identity when p == 0.
  Var dropout(Var a, double p, Rng& rng);
  // Value passthrough that blocks gradient flow.
  Var detach(Var a);

  // Accumulates gradients of `root` (must be 1x1) through the tape.
  void backward(Var root);

  int size() const { return static_cast<int>(nodes_.size()); }

private:
  friend class Var;
  struct Node {
    Eigen::MatrixXd storage;
    const Eigen::MatrixXd* value = nullptr;
    Eigen::MatrixXd grad;
    bool requires_grad = false;
    std::function<void(Graph&)> backward;
  };

  Node& node(int idx) { return nodes_[idx]; }
  const Node& node(int idx) const { return nodes_[idx]; }
  Var make(Eigen::MatrixXd value, bool requires_grad, std::function<void(Graph&)> fn);
  void accum(int idx, const Eigen::MatrixXd& g);

  std::deque<Node> nodes_;
};

}  // namespace lipnovo::ad
