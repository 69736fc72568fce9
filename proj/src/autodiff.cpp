#include "lq/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace lq::ad {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kProbClamp = 1e-7;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

// Row-wise softmax in place.
void softmax_rows(Mat& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    auto row = s.row(i);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

}  // namespace

Var Graph::push(Mat value, bool needs_grad) {
  check_live();
  Node n;
  n.value = std::move(value);
  n.needs_grad = grad_enabled_ && needs_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Graph::check_live() const {
  if (consumed_) throw std::logic_error("graph already consumed by backward()");
}

void Graph::accumulate(Var v, const Mat& g) {
  Node& n = nodes_[v.id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) n.grad = g;
  else n.grad += g;
}

Var Graph::param(Param& p) {
  Var v = push(p.value, true);
  nodes_[v.id].param = &p;
  return v;
}

Var Graph::constant(Mat m) { return push(std::move(m), false); }

void Graph::backward(Var loss) {
  check_live();
  if (!grad_enabled_) throw std::logic_error("backward() on a graph built without gradients");
  require(value(loss).size() == 1, "backward: loss must be 1x1");
  nodes_[loss.id].grad = Mat::Ones(1, 1);
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.back) n.back();
    if (n.param) {
      if (n.param->grad.size() == 0) n.param->grad = Mat::Zero(n.value.rows(), n.value.cols());
      n.param->grad += n.grad;
    }
  }
  consumed_ = true;
  nodes_.clear();
  nodes_.shrink_to_fit();
}

Var Graph::matmul(Var a, Var b) {
  require(value(a).cols() == value(b).rows(), "matmul: shape mismatch");
  Var out = push(value(a) * value(b), needs(a) || needs(b));
  if (needs(out)) {
    nodes_[out.id].back = [this, a, b, out] {
      const Mat& g = nodes_[out.id].grad;
      if (needs(a)) accumulate(a, g * value(b).transpose());
      if (needs(b)) accumulate(b, value(a).transpose() * g);
    };
  }
  return out;
}

Var Graph::linear(Var x, Var w, Var b) {
  require(value(x).cols() == value(w).rows(), "linear: shape mismatch");
  require(value(b).rows() == 1 && value(b).cols() == value(w).cols(), "linear: bias shape");
  Mat y = value(x) * value(w);
  y.rowwise() += value(b).row(0);
  Var out = push(std::move(y), needs(x) || needs(w) || needs(b));
  if (needs(out)) {
    nodes_[out.id].back = [this, x, w, b, out] {
      const Mat& g = nodes_[out.id].grad;
      if (needs(x)) accumulate(x, g * value(w).transpose());
      if (needs(w)) accumulate(w, value(x).transpose() * g);
      if (needs(b)) accumulate(b, g.colwise().sum());
    };
  }
  return out;
}

Var Graph::add(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(),
          "add: shape mismatch");
  Var out = push(value(a) + value(b), needs(a) || needs(b));
  if (needs(out)) {
    nodes_[out.id].back = [this, a, b, out] {
      accumulate(a, nodes_[out.id].grad);
      accumulate(b, nodes_[out.id].grad);
    };
  }
  return out;
}

Var Graph::scale(Var a, double s) {
  Var out = push(value(a) * s, needs(a));
  if (needs(out)) {
    nodes_[out.id].back = [this, a, s, out] { accumulate(a, nodes_[out.id].grad * s); };
  }
  return out;
}

Var Graph::add_constant(Var a, const Mat& c) {
  require(value(a).rows() == c.rows() && value(a).cols() == c.cols(), "add_constant: shape");
  Var out = push(value(a) + c, needs(a));
  if (needs(out)) {
    nodes_[out.id].back = [this, a, out] { accumulate(a, nodes_[out.id].grad); };
  }
  return out;
}

Var Graph::layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Mat& xv = value(x);
  const Eigen::Index n = xv.rows(), d = xv.cols();
  require(value(gamma).cols() == d && value(beta).cols() == d, "layer_norm: shape");
  Mat xhat(n, d);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = xv.row(i).mean();
    const double var = (xv.row(i).array() - mu).square().mean();
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (xv.row(i).array() - mu) * inv_std[i];
  }
  Mat y = xhat.array().rowwise() * value(gamma).row(0).array();
  y.rowwise() += value(beta).row(0);
  Var out = push(std::move(y), needs(x) || needs(gamma) || needs(beta));
  if (needs(out)) {
    nodes_[out.id].back = [this, x, gamma, beta, out, xhat = std::move(xhat),
                           inv_std = std::move(inv_std)] {
      const Mat& g = nodes_[out.id].grad;
      if (needs(gamma)) accumulate(gamma, (g.array() * xhat.array()).colwise().sum().matrix());
      if (needs(beta)) accumulate(beta, g.colwise().sum());
      if (needs(x)) {
        const Mat dxhat = g.array().rowwise() * value(gamma).row(0).array();
        Mat dx(g.rows(), g.cols());
        for (Eigen::Index i = 0; i < g.rows(); ++i) {
          const double m1 = dxhat.row(i).mean();
          const double m2 = dxhat.row(i).dot(xhat.row(i)) / static_cast<double>(g.cols());
          dx.row(i) = (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2) * inv_std[i];
        }
        accumulate(x, dx);
      }
    };
  }
  return out;
}

Var Graph::gelu(Var x) {
  const Mat& xv = value(x);
  Mat y = xv.unaryExpr([](double t) { return 0.5 * t * (1.0 + std::erf(t * kInvSqrt2)); });
  Var out = push(std::move(y), needs(x));
  if (needs(out)) {
    nodes_[out.id].back = [this, x, out] {
      const Mat d = value(x).unaryExpr([](double t) {
        return 0.5 * (1.0 + std::erf(t * kInvSqrt2)) + t * kInvSqrt2Pi * std::exp(-0.5 * t * t);
      });
      accumulate(x, nodes_[out.id].grad.cwiseProduct(d));
    };
  }
  return out;
}

Var Graph::sigmoid(Var x) {
  Mat y = value(x).unaryExpr([](double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
  });
  Var out = push(std::move(y), needs(x));
  if (needs(out)) {
    nodes_[out.id].back = [this, x, out] {
      const Mat& p = value(out);
      accumulate(x, nodes_[out.id].grad.cwiseProduct(p.cwiseProduct((1.0 - p.array()).matrix())));
    };
  }
  return out;
}

Var Graph::attention(Var q, Var k, Var v, int heads) {
  const Mat& qv = value(q);
  const Mat& kv = value(k);
  const Mat& vv = value(v);
  const Eigen::Index n = qv.rows(), m = kv.rows(), w = qv.cols();
  require(heads > 0 && w % heads == 0, "attention: width not divisible by heads");
  require(kv.cols() == w && vv.cols() == w && vv.rows() == m, "attention: shape mismatch");
  const Eigen::Index d = w / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(d));
  Mat o = Mat::Zero(n, w);
  const bool track = grad_enabled_ && (needs(q) || needs(k) || needs(v));
  std::vector<Mat> probs;
  if (m > 0) {
    // Contiguous per-head copies keep the products on the fast GEMM path.
    Mat qh, kh, vh, s, oh;
    for (int h = 0; h < heads; ++h) {
      qh = qv.middleCols(h * d, d) * sc;
      kh = kv.middleCols(h * d, d);
      vh = vv.middleCols(h * d, d);
      s.noalias() = qh * kh.transpose();
      softmax_rows(s);
      oh.noalias() = s * vh;
      o.middleCols(h * d, d) = oh;
      if (track) probs.push_back(std::move(s));
    }
  }
  Var out = push(std::move(o), needs(q) || needs(k) || needs(v));
  if (needs(out) && m > 0) {
    nodes_[out.id].back = [this, q, k, v, out, heads, d, sc, probs = std::move(probs)] {
      const Mat& g = nodes_[out.id].grad;
      const Mat& qv = value(q);
      const Mat& kv = value(k);
      const Mat& vv = value(v);
      Mat dq(qv.rows(), qv.cols()), dk(kv.rows(), kv.cols()), dv(vv.rows(), vv.cols());
      Mat go, qh, kh, vh, dp, ds, tmp;
      for (int h = 0; h < heads; ++h) {
        const Mat& p = probs[h];
        go = g.middleCols(h * d, d);
        qh = qv.middleCols(h * d, d);
        kh = kv.middleCols(h * d, d);
        vh = vv.middleCols(h * d, d);
        tmp.noalias() = p.transpose() * go;
        dv.middleCols(h * d, d) = tmp;
        dp.noalias() = go * vh.transpose();
        const Eigen::VectorXd rs = dp.cwiseProduct(p).rowwise().sum();
        dp.colwise() -= rs;
        ds = p.cwiseProduct(dp);
        ds *= sc;
        tmp.noalias() = ds * kh;
        dq.middleCols(h * d, d) = tmp;
        tmp.noalias() = ds.transpose() * qh;
        dk.middleCols(h * d, d) = tmp;
      }
      accumulate(q, dq);
      accumulate(k, dk);
      accumulate(v, dv);
    };
  }
  return out;
}

Var Graph::ragged_attention(Var q, Var k_self, Var v_self, Var k_tab, Var v_tab, const Csr& lists,
                            int heads) {
  const Mat& qv = value(q);
  const Eigen::Index n = qv.rows(), w = qv.cols();
  require(heads > 0 && w % heads == 0, "ragged_attention: width not divisible by heads");
  require(lists.rows() == n, "ragged_attention: list count mismatch");
  require(value(k_self).rows() == n && value(v_self).rows() == n, "ragged_attention: self rows");
  require(value(k_tab).rows() == value(v_tab).rows(), "ragged_attention: table rows");
  for (int idx : lists.indices) {
    require(idx >= 0 && idx < value(k_tab).rows(), "ragged_attention: index out of range");
  }
  const int d = static_cast<int>(w / heads);
  const double sc = 1.0 / std::sqrt(static_cast<double>(d));
  const bool any = needs(q) || needs(k_self) || needs(v_self) || needs(k_tab) || needs(v_tab);
  const bool track = grad_enabled_ && any;

  // Per head, per row: probabilities for [self, list...], stored contiguously.
  const size_t stride = lists.indices.size() + static_cast<size_t>(n);
  std::vector<double> probs(track ? stride * heads : 0);
  Mat o = Mat::Zero(n, w);
  std::vector<double> s;
  {
    const Mat& ks = value(k_self);
    const Mat& vs = value(v_self);
    const Mat& kt = value(k_tab);
    const Mat& vt = value(v_tab);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int b = lists.offsets[i], e = lists.offsets[i + 1];
      const int cnt = e - b + 1;
      s.resize(cnt);
      for (int h = 0; h < heads; ++h) {
        const auto qi = qv.row(i).segment(h * d, d);
        s[0] = qi.dot(ks.row(i).segment(h * d, d)) * sc;
        for (int j = b; j < e; ++j) s[j - b + 1] = qi.dot(kt.row(lists.indices[j]).segment(h * d, d)) * sc;
        const double mx = *std::max_element(s.begin(), s.end());
        double z = 0.0;
        for (double& x : s) z += (x = std::exp(x - mx));
        for (double& x : s) x /= z;
        auto oi = o.row(i).segment(h * d, d);
        oi = s[0] * vs.row(i).segment(h * d, d);
        for (int j = b; j < e; ++j) oi += s[j - b + 1] * vt.row(lists.indices[j]).segment(h * d, d);
        if (track) {
          double* dst = probs.data() + h * stride + b + i;
          std::copy(s.begin(), s.end(), dst);
        }
      }
    }
  }
  Var out = push(std::move(o), any);
  if (needs(out)) {
    nodes_[out.id].back = [this, q, k_self, v_self, k_tab, v_tab, out, heads, d, sc, stride,
                           probs = std::move(probs), lists = lists] {
      const Mat& g = nodes_[out.id].grad;
      const Mat& qv = value(q);
      const Mat& ks = value(k_self);
      const Mat& vs = value(v_self);
      const Mat& kt = value(k_tab);
      const Mat& vt = value(v_tab);
      Mat dq = Mat::Zero(qv.rows(), qv.cols());
      Mat dks = Mat::Zero(ks.rows(), ks.cols());
      Mat dvs = Mat::Zero(vs.rows(), vs.cols());
      Mat dkt = Mat::Zero(kt.rows(), kt.cols());
      Mat dvt = Mat::Zero(vt.rows(), vt.cols());
      std::vector<double> dp;
      for (Eigen::Index i = 0; i < qv.rows(); ++i) {
        const int b = lists.offsets[i], e = lists.offsets[i + 1];
        const int cnt = e - b + 1;
        dp.resize(cnt);
        for (int h = 0; h < heads; ++h) {
          const double* p = probs.data() + h * stride + b + i;
          const auto gi = g.row(i).segment(h * d, d);
          const auto qi = qv.row(i).segment(h * d, d);
          dp[0] = gi.dot(vs.row(i).segment(h * d, d));
          dvs.row(i).segment(h * d, d) += p[0] * gi;
          for (int j = b; j < e; ++j) {
            const int t = lists.indices[j];
            dp[j - b + 1] = gi.dot(vt.row(t).segment(h * d, d));
            dvt.row(t).segment(h * d, d) += p[j - b + 1] * gi;
          }
          double mean = 0.0;
          for (int c = 0; c < cnt; ++c) mean += p[c] * dp[c];
          auto dqi = dq.row(i).segment(h * d, d);
          const double ds0 = p[0] * (dp[0] - mean) * sc;
          dqi += ds0 * ks.row(i).segment(h * d, d);
          dks.row(i).segment(h * d, d) += ds0 * qi;
          for (int j = b; j < e; ++j) {
            const int t = lists.indices[j];
            const double dsj = p[j - b + 1] * (dp[j - b + 1] - mean) * sc;
            dqi += dsj * kt.row(t).segment(h * d, d);
            dkt.row(t).segment(h * d, d) += dsj * qi;
          }
        }
      }
      accumulate(q, dq);
      accumulate(k_self, dks);
      accumulate(v_self, dvs);
      accumulate(k_tab, dkt);
      accumulate(v_tab, dvt);
    };
  }
  return out;
}

Var Graph::bce(Var p, std::span<const double> labels) {
  const Mat& pv = value(p);
  require(pv.cols() == 1 && pv.rows() == static_cast<Eigen::Index>(labels.size()), "bce: shape");
  const Eigen::Index n = pv.rows();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double c = std::clamp(pv(i, 0), kProbClamp, 1.0 - kProbClamp);
    loss -= labels[i] * std::log(c) + (1.0 - labels[i]) * std::log(1.0 - c);
  }
  if (n > 0) loss /= static_cast<double>(n);
  Var out = push(Mat::Constant(1, 1, loss), needs(p));
  if (needs(out) && n > 0) {
    std::vector<double> y(labels.begin(), labels.end());
    nodes_[out.id].back = [this, p, out, y = std::move(y)] {
      const Mat& pv = value(p);
      const double g = nodes_[out.id].grad(0, 0) / static_cast<double>(pv.rows());
      Mat dp = Mat::Zero(pv.rows(), 1);
      for (Eigen::Index i = 0; i < pv.rows(); ++i) {
        const double x = pv(i, 0);
        if (x < kProbClamp || x > 1.0 - kProbClamp) continue;
        dp(i, 0) = g * (-y[i] / x + (1.0 - y[i]) / (1.0 - x));
      }
      accumulate(p, dp);
    };
  }
  return out;
}

Var Graph::weighted_mse(Var pred, const Mat& target, std::span<const double> w) {
  const Mat& pv = value(pred);
  require(pv.rows() == target.rows() && pv.cols() == target.cols(), "weighted_mse: shape");
  require(static_cast<Eigen::Index>(w.size()) == pv.rows(), "weighted_mse: weight count");
  const Eigen::Index n = pv.rows();
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), n);
  const Mat diff = pv - target;
  const double loss = n > 0 ? wv.dot(diff.rowwise().squaredNorm()) / static_cast<double>(n) : 0.0;
  Var out = push(Mat::Constant(1, 1, loss), needs(pred));
  if (needs(out) && n > 0) {
    Eigen::VectorXd wc = wv;
    nodes_[out.id].back = [this, pred, out, diff, wc = std::move(wc)] {
      const double g = 2.0 * nodes_[out.id].grad(0, 0) / static_cast<double>(diff.rows());
      Mat d = diff.array().colwise() * wc.array();
      accumulate(pred, d * g);
    };
  }
  return out;
}

Var Graph::lincomb(Var a, double wa, Var b, double wb) {
  require(value(a).size() == 1 && value(b).size() == 1, "lincomb: operands must be 1x1");
  Var out = push(Mat::Constant(1, 1, wa * scalar(a) + wb * scalar(b)), needs(a) || needs(b));
  if (needs(out)) {
    nodes_[out.id].back = [this, a, b, wa, wb, out] {
      const double g = nodes_[out.id].grad(0, 0);
      accumulate(a, Mat::Constant(1, 1, g * wa));
      accumulate(b, Mat::Constant(1, 1, g * wb));
    };
  }
  return out;
}

}  // namespace lq::ad
