#include "plcr/autodiff.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace plcr::ad {

Var Tape::make(Mat val, bool requires_grad, std::function<void()> back) {
  Node n;
  n.grad = Mat::Zero(val.rows(), val.cols());
  n.val = std::move(val);
  n.requires_grad = requires_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(const Mat& value, bool requires_grad) {
  return make(value, requires_grad, nullptr);
}

Var Tape::add(Var a, Var b) {
  bool rg = requires_grad(a) || requires_grad(b);
  Var out = make(a.value() + b.value(), rg, nullptr);
  if (rg)
    node(out).back = [this, a, b, out] {
      if (requires_grad(a)) node(a).grad += out.grad();
      if (requires_grad(b)) node(b).grad += out.grad();
    };
  return out;
}

Var Tape::sub(Var a, Var b) {
  bool rg = requires_grad(a) || requires_grad(b);
  Var out = make(a.value() - b.value(), rg, nullptr);
  if (rg)
    node(out).back = [this, a, b, out] {
      if (requires_grad(a)) node(a).grad += out.grad();
      if (requires_grad(b)) node(b).grad -= out.grad();
    };
  return out;
}

Var Tape::scale(Var a, double s) {
  bool rg = requires_grad(a);
  Var out = make(a.value() * s, rg, nullptr);
  if (rg)
    node(out).back = [this, a, out, s] { node(a).grad += s * out.grad(); };
  return out;
}

Var Tape::hadamard(Var a, Var b) {
  bool rg = requires_grad(a) || requires_grad(b);
  Var out = make(a.value().cwiseProduct(b.value()), rg, nullptr);
  if (rg)
    node(out).back = [this, a, b, out] {
      if (requires_grad(a)) node(a).grad += out.grad().cwiseProduct(b.value());
      if (requires_grad(b)) node(b).grad += out.grad().cwiseProduct(a.value());
    };
  return out;
}

Var Tape::matmul(Var a, Var b) {
  bool rg = requires_grad(a) || requires_grad(b);
  Var out = make(a.value() * b.value(), rg, nullptr);
  if (rg)
    node(out).back = [this, a, b, out] {
      if (requires_grad(a)) node(a).grad += out.grad() * b.value().transpose();
      if (requires_grad(b)) node(b).grad += a.value().transpose() * out.grad();
    };
  return out;
}

Var Tape::transpose(Var a) {
  bool rg = requires_grad(a);
  Var out = make(a.value().transpose(), rg, nullptr);
  if (rg)
    node(out).back = [this, a, out] { node(a).grad += out.grad().transpose(); };
  return out;
}

Var Tape::add_rowwise(Var a, Var bias) {
  assert(bias.value().rows() == 1 && bias.value().cols() == a.value().cols());
  bool rg = requires_grad(a) || requires_grad(bias);
  Mat v = a.value();
  v.rowwise() += bias.value().row(0);
  Var out = make(std::move(v), rg, nullptr);
  if (rg)
    node(out).back = [this, a, bias, out] {
      if (requires_grad(a)) node(a).grad += out.grad();
      if (requires_grad(bias))
        node(bias).grad.row(0) += out.grad().colwise().sum();
    };
  return out;
}

Var Tape::relu(Var a) {
  bool rg = requires_grad(a);
  Var out = make(a.value().cwiseMax(0.0), rg, nullptr);
  if (rg)
    node(out).back = [this, a, out] {
      node(a).grad +=
          out.grad().cwiseProduct((a.value().array() > 0.0).cast<double>().matrix());
    };
  return out;
}

Var Tape::sigmoid(Var a) {
  bool rg = requires_grad(a);
  Mat y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  Var out = make(std::move(y), rg, nullptr);
  if (rg)
    node(out).back = [this, a, out] {
      auto y_ = out.value().array();
      node(a).grad += (out.grad().array() * y_ * (1.0 - y_)).matrix();
    };
  return out;
}

Var Tape::softplus(Var a) {
  bool rg = requires_grad(a);
  Mat y = (a.value().array().max(0.0) +
           (-a.value().array().abs()).exp().log1p())
              .matrix();
  Var out = make(std::move(y), rg, nullptr);
  if (rg)
    node(out).back = [this, a, out] {
      Mat s = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
      node(a).grad += out.grad().cwiseProduct(s);
    };
  return out;
}

Var Tape::softmax_rows(Var a) {
  bool rg = requires_grad(a);
  Mat y = a.value();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    double m = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  Var out = make(std::move(y), rg, nullptr);
  if (rg)
    node(out).back = [this, a, out] {
      const Mat& y_ = out.value();
      const Mat& dy = out.grad();
      for (Eigen::Index r = 0; r < y_.rows(); ++r) {
        double inner = dy.row(r).dot(y_.row(r));
        node(a).grad.row(r) +=
            (dy.row(r).array() - inner).matrix().cwiseProduct(y_.row(r));
      }
    };
  return out;
}

Var Tape::layer_norm_rows(Var a, Var gain, Var bias, double eps) {
  assert(gain.value().rows() == 1 && gain.value().cols() == a.value().cols());
  bool rg = requires_grad(a) || requires_grad(gain) || requires_grad(bias);
  const Mat& x = a.value();
  Eigen::Index rows = x.rows(), cols = x.cols();
  Mat xhat(rows, cols);
  Eigen::VectorXd inv_std(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    double mu = x.row(r).mean();
    double var = (x.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mu) * inv_std(r);
  }
  Mat y = xhat;
  for (Eigen::Index r = 0; r < rows; ++r)
    y.row(r) = y.row(r).cwiseProduct(gain.value().row(0)) + bias.value().row(0);
  Var out = make(std::move(y), rg, nullptr);
  if (rg)
    node(out).back = [this, a, gain, bias, out, xhat, inv_std] {
      const Mat& dy = out.grad();
      Eigen::Index cols_ = xhat.cols();
      if (requires_grad(gain))
        node(gain).grad.row(0) += dy.cwiseProduct(xhat).colwise().sum();
      if (requires_grad(bias)) node(bias).grad.row(0) += dy.colwise().sum();
      if (requires_grad(a)) {
        for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
          Eigen::RowVectorXd g =
              dy.row(r).cwiseProduct(gain.value().row(0));  // d/dxhat
          double mg = g.mean();
          double mgx = g.cwiseProduct(xhat.row(r)).mean();
          node(a).grad.row(r) +=
              inv_std(r) * (g.array() - mg -
                            xhat.row(r).array() * mgx)
                               .matrix();
          (void)cols_;
        }
      }
    };
  return out;
}

Var Tape::add_constant(Var a, Mat c) {
  bool rg = requires_grad(a);
  Var out = make(a.value() + c, rg, nullptr);
  if (rg)
    node(out).back = [this, a, out] { node(a).grad += out.grad(); };
  return out;
}

Var Tape::dropout(Var a, double rate) {
  if (!training || rate <= 0.0) return a;
  if (rate >= 1.0) throw std::invalid_argument("dropout rate must be < 1");
  if (rng == nullptr)
    throw std::logic_error("dropout in training mode needs a tape rng");
  std::bernoulli_distribution keep(1.0 - rate);
  Mat mask(a.value().rows(), a.value().cols());
  for (Eigen::Index r = 0; r < mask.rows(); ++r)
    for (Eigen::Index c = 0; c < mask.cols(); ++c)
      mask(r, c) = keep(*rng) ? 1.0 / (1.0 - rate) : 0.0;
  bool rg = requires_grad(a);
  Var out = make(a.value().cwiseProduct(mask), rg, nullptr);
  if (rg)
    node(out).back = [this, a, out, mask] {
      node(a).grad += out.grad().cwiseProduct(mask);
    };
  return out;
}

Var Tape::concat_cols(Var a, Var b) {
  assert(a.value().rows() == b.value().rows());
  bool rg = requires_grad(a) || requires_grad(b);
  Mat v(a.value().rows(), a.value().cols() + b.value().cols());
  v << a.value(), b.value();
  Var out = make(std::move(v), rg, nullptr);
  if (rg)
    node(out).back = [this, a, b, out] {
      Eigen::Index ca = a.value().cols();
      if (requires_grad(a))
        node(a).grad += out.grad().leftCols(ca);
      if (requires_grad(b))
        node(b).grad += out.grad().rightCols(out.grad().cols() - ca);
    };
  return out;
}

Var Tape::slice_cols(Var a, int start, int n) {
  bool rg = requires_grad(a);
  Var out = make(a.value().middleCols(start, n), rg, nullptr);
  if (rg)
    node(out).back = [this, a, out, start, n] {
      node(a).grad.middleCols(start, n) += out.grad();
    };
  return out;
}

Var Tape::stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: empty input");
  Eigen::Index cols = rows[0].value().cols();
  Eigen::Index total = 0;
  bool rg = false;
  for (const Var& r : rows) {
    assert(r.value().cols() == cols);
    total += r.value().rows();
    rg = rg || requires_grad(r);
  }
  Mat v(total, cols);
  Eigen::Index off = 0;
  for (const Var& r : rows) {
    v.middleRows(off, r.value().rows()) = r.value();
    off += r.value().rows();
  }
  Var out = make(std::move(v), rg, nullptr);
  if (rg) {
    std::vector<Var> parents = rows;
    node(out).back = [this, parents, out] {
      Eigen::Index off_ = 0;
      for (const Var& r : parents) {
        Eigen::Index n = r.value().rows();
        if (requires_grad(r))
          node(r).grad += out.grad().middleRows(off_, n);
        off_ += n;
      }
    };
  }
  return out;
}

Var Tape::repeat_row(Var a, int n) {
  assert(a.value().rows() == 1);
  bool rg = requires_grad(a);
  Var out = make(a.value().replicate(n, 1), rg, nullptr);
  if (rg)
    node(out).back = [this, a, out] {
      node(a).grad.row(0) += out.grad().colwise().sum();
    };
  return out;
}

Var Tape::row(Var a, int r) {
  bool rg = requires_grad(a);
  Var out = make(a.value().row(r), rg, nullptr);
  if (rg)
    node(out).back = [this, a, out, r] { node(a).grad.row(r) += out.grad(); };
  return out;
}

Var Tape::sum(Var a) {
  bool rg = requires_grad(a);
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  Var out = make(std::move(v), rg, nullptr);
  if (rg)
    node(out).back = [this, a, out] {
      node(a).grad.array() += out.grad()(0, 0);
    };
  return out;
}

Var Tape::mean(Var a) {
  bool rg = requires_grad(a);
  Mat v(1, 1);
  v(0, 0) = a.value().mean();
  Var out = make(std::move(v), rg, nullptr);
  if (rg)
    node(out).back = [this, a, out] {
      node(a).grad.array() +=
          out.grad()(0, 0) / static_cast<double>(a.value().size());
    };
  return out;
}

Var Tape::rowwise_sum(Var a) {
  bool rg = requires_grad(a);
  Mat v = a.value().rowwise().sum();
  Var out = make(std::move(v), rg, nullptr);
  if (rg)
    node(out).back = [this, a, out] {
      node(a).grad.colwise() += out.grad().col(0);
    };
  return out;
}

Var Tape::gather_rows(Var table, std::vector<int> idx) {
  bool rg = requires_grad(table);
  Mat v(static_cast<Eigen::Index>(idx.size()), table.value().cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= table.value().rows())
      throw std::out_of_range("gather_rows: index out of range");
    v.row(static_cast<Eigen::Index>(i)) = table.value().row(idx[i]);
  }
  Var out = make(std::move(v), rg, nullptr);
  if (rg)
    node(out).back = [this, table, out, idx = std::move(idx)] {
      for (std::size_t i = 0; i < idx.size(); ++i)
        node(table).grad.row(idx[i]) +=
            out.grad().row(static_cast<Eigen::Index>(i));
    };
  return out;
}

Var Tape::cross_entropy_cols(Var logits, std::vector<int> labels) {
  const Mat& x = logits.value();
  if (static_cast<Eigen::Index>(labels.size()) != x.cols())
    throw std::invalid_argument("cross_entropy_cols: label/column mismatch");
  Mat p = x;
  double loss = 0.0;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    double m = p.col(c).maxCoeff();
    p.col(c) = (p.col(c).array() - m).exp();
    p.col(c) /= p.col(c).sum();
    int y = labels[static_cast<std::size_t>(c)];
    if (y < 0 || y >= x.rows())
      throw std::out_of_range("cross_entropy_cols: label out of range");
    loss -= std::log(p(y, c));
  }
  loss /= static_cast<double>(x.cols());
  bool rg = requires_grad(logits);
  Mat v(1, 1);
  v(0, 0) = loss;
  Var out = make(std::move(v), rg, nullptr);
  if (rg)
    node(out).back = [this, logits, out, p, labels = std::move(labels)] {
      double s = out.grad()(0, 0) / static_cast<double>(p.cols());
      Mat d = p;
      for (Eigen::Index c = 0; c < d.cols(); ++c)
        d(labels[static_cast<std::size_t>(c)], c) -= 1.0;
      node(logits).grad += s * d;
    };
  return out;
}

void Tape::zero_grad() {
  for (auto& n : nodes_) n.grad.setZero();
}

void Tape::backward(Var v) {
  backward(v, Mat::Ones(v.value().rows(), v.value().cols()));
}

void Tape::backward(Var v, const Mat& seed) {
  node(v).grad += seed;
  for (int i = v.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.back) n.back();
  }
}

}  // namespace plcr::ad
