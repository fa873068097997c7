#pragma once

#include <Eigen/Core>
#include <deque>
#include <functional>
#include <random>
#include <vector>

namespace plcr::ad {

using Mat = Eigen::MatrixXd;

class Tape;

// Handle into a tape node. Cheap to copy; owns nothing.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  const Mat& value() const;
  const Mat& grad() const;
};

// Reverse-mode tape over dense matrices. A fresh tape is built per forward
// pass (or per batch); parameters enter as grad-requiring leaves, frozen
// tensors as constants. Constants act as stop-gradients: backward never
// writes into them, so their grad buffers stay identically zero.
class Tape {
 public:
  bool training = false;         // enables dropout
  std::mt19937_64* rng = nullptr;  // required when training && dropout > 0

  Var leaf(const Mat& value, bool requires_grad);
  Var constant(Mat value) { return leaf(std::move(value), false); }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  Var hadamard(Var a, Var b);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add_rowwise(Var a, Var bias);  // bias is 1 x C, broadcast over rows
  Var relu(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var softmax_rows(Var a);
  Var layer_norm_rows(Var a, Var gain, Var bias, double eps = 1e-8);
  Var add_constant(Var a, Mat c);
  Var dropout(Var a, double rate);
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var a, int start, int n);
  Var stack_rows(const std::vector<Var>& rows);
  Var repeat_row(Var a, int n);  // a is 1 x C
  Var row(Var a, int r);
  Var sum(Var a);        // 1 x 1
  Var mean(Var a);       // 1 x 1
  Var rowwise_sum(Var a);  // R x 1
  Var gather_rows(Var table, std::vector<int> idx);
  // logits is N x B (one column per example); returns 1 x 1 mean of
  // -log softmax(column)[label].
  Var cross_entropy_cols(Var logits, std::vector<int> labels);

  void zero_grad();
  void backward(Var v);                   // seeds with ones
  void backward(Var v, const Mat& seed);

  const Mat& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].val; }
  const Mat& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }
  bool requires_grad(Var v) const {
    return nodes_[static_cast<std::size_t>(v.id)].requires_grad;
  }

 private:
  struct Node {
    Mat val;
    Mat grad;
    bool requires_grad = false;
    std::function<void()> back;  // null for leaves / all-constant subtrees
  };

  Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
  Var make(Mat val, bool requires_grad, std::function<void()> back);

  std::deque<Node> nodes_;
};

inline const Mat& Var::value() const { return tape->value(*this); }
inline const Mat& Var::grad() const { return tape->grad(*this); }

}  // namespace plcr::ad
