#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace lq::ad {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Trainable tensor. grad accumulates across backward passes until cleared;
// m and v are optimizer moments.
struct Param {
  std::string name;
  Mat value;
  Mat grad;
  Mat m;
  Mat v;
};

struct Var {
  int id = -1;
};

// Ragged index lists: entries [offsets[i], offsets[i+1]) belong to row i.
struct Csr {
  std::vector<int> offsets{0};
  std::vector<int> indices;

  int rows() const { return static_cast<int>(offsets.size()) - 1; }
  void push_row(std::span<const int> row) {
    indices.insert(indices.end(), row.begin(), row.end());
    offsets.push_back(static_cast<int>(indices.size()));
  }
};

// Reverse-mode tape. Nodes are appended in evaluation order; backward() walks
// them once in reverse and adds parameter gradients into Param::grad. A graph
// built with grad disabled keeps values only.
class Graph {
 public:
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var param(Param& p);
  Var constant(Mat m);
  const Mat& value(Var v) const { return nodes_.at(v.id).value; }
  double scalar(Var v) const { return value(v)(0, 0); }
  // Gradient of a node after backward(); empty when it did not receive one.
  const Mat& grad(Var v) const { return nodes_.at(v.id).grad; }

  // Seeds d(loss)/d(loss) = 1 on a 1x1 node. Throws std::logic_error when the
  // graph was already consumed or built without gradients.
  void backward(Var loss);

  Var matmul(Var a, Var b);
  Var linear(Var x, Var w, Var b);  // x w + 1 b^T, b is 1 x out
  Var add(Var a, Var b);
  Var scale(Var a, double s);
  Var add_constant(Var a, const Mat& c);
  Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
  Var gelu(Var x);
  Var sigmoid(Var x);
  // Multi-head scaled dot-product attention of every q row over all k/v rows.
  // No keys gives zero rows.
  Var attention(Var q, Var k, Var v, int heads);
  // Row i attends over {its own key/value row} plus table rows lists[i].
  Var ragged_attention(Var q, Var k_self, Var v_self, Var k_tab, Var v_tab, const Csr& lists,
                       int heads);
  // Mean binary cross-entropy of probabilities p (n x 1), clamped to
  // [1e-7, 1 - 1e-7]. Zero for n = 0.
  Var bce(Var p, std::span<const double> labels);
  // mean_f w_f |pred_f - target_f|^2. Zero for n = 0.
  Var weighted_mse(Var pred, const Mat& target, std::span<const double> w);
  Var lincomb(Var a, double wa, Var b, double wb);  // 1x1 nodes

  size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void()> back;
    Param* param = nullptr;
    bool needs_grad = false;
  };

  Var push(Mat value, bool needs_grad);
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }
  void accumulate(Var v, const Mat& g);
  void check_live() const;

  std::vector<Node> nodes_;
  bool grad_enabled_;
  bool consumed_ = false;
};

}  // namespace lq::ad
