#include "fragq/nn.hpp"

#include <cmath>
#include <numbers>

namespace fragq::nn {

void MacTally::add(const std::string& layer, std::int64_t macs) {
  auto it = index_.find(layer);
  if (it == index_.end()) {
    index_.emplace(layer, entries_.size());
    entries_.emplace_back(layer, macs);
  } else {
    entries_[it->second].second += macs;
  }
}

std::int64_t MacTally::total() const {
  std::int64_t s = 0;
  for (const auto& e : entries_) s += e.second;
  return s;
}

Linear::Linear(const std::string& name, int in_features, int out_features, bool bias)
    : name(name), has_bias(bias) {
  weight.name = name + ".weight";
  weight.value = Mat::Zero(in_features, out_features);
  weight.decay = true;
  weight.zero_grad();
  if (has_bias) {
    this->bias.name = name + ".bias";
    this->bias.value = Mat::Zero(1, out_features);
    this->bias.zero_grad();
  }
}

Mat Linear::forward(const Mat& x, MacTally* t) const {
  tally(t, name, static_cast<std::int64_t>(x.rows()) * in_features() * out_features());
  Mat y = x * weight.value;
  if (has_bias) y.rowwise() += bias.value.row(0);
  return y;
}

Mat Linear::backward(const Mat& x, const Mat& dy) {
  weight.grad.noalias() += x.transpose() * dy;
  if (has_bias) bias.grad.row(0) += dy.colwise().sum();
  return dy * weight.value.transpose();
}

void Linear::collect(std::vector<Param*>& out) {
  out.push_back(&weight);
  if (has_bias) out.push_back(&bias);
}

LayerNorm::LayerNorm(const std::string& name, int dim) : name_(name) {
  gamma.name = name + ".gamma";
  gamma.value = Mat::Ones(1, dim);
  gamma.zero_grad();
  beta.name = name + ".beta";
  beta.value = Mat::Zero(1, dim);
  beta.zero_grad();
}

Mat LayerNorm::forward(const Mat& x, Cache* cache, MacTally* t) const {
  constexpr double kEps = 1e-5;
  tally(t, name_, static_cast<std::int64_t>(x.rows()) * x.cols());
  const Eigen::Index n = x.rows(), d = x.cols();
  Mat xhat(n, d);
  Vec rstd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    rstd(i) = 1.0 / std::sqrt(var + kEps);
    xhat.row(i) = (x.row(i).array() - mu) * rstd(i);
  }
  Mat y = (xhat.array().rowwise() * gamma.value.row(0).array()).matrix();
  y.rowwise() += beta.value.row(0);
  if (cache != nullptr) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

Mat LayerNorm::backward(const Mat& dy, const Cache& cache) {
  gamma.grad.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  beta.grad.row(0) += dy.colwise().sum();
  const Mat dxhat = (dy.array().rowwise() * gamma.value.row(0).array()).matrix();
  const double d = static_cast<double>(dy.cols());
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double m1 = dxhat.row(i).sum() / d;
    const double m2 = dxhat.row(i).dot(cache.xhat.row(i)) / d;
    dx.row(i) = cache.rstd(i) * (dxhat.row(i).array() - m1 - cache.xhat.row(i).array() * m2);
  }
  return dx;
}

void LayerNorm::collect(std::vector<Param*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

Mat gelu(const Mat& x) {
  return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2)); });
}

Mat gelu_backward(const Mat& x, const Mat& dy) {
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  Mat d = x.unaryExpr([inv_sqrt_2pi](double v) {
    const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2));
    return cdf + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
  });
  return (d.array() * dy.array()).matrix();
}

void fill_truncated_normal(Mat& m, double std, Rng& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double z = rng.normal();
    while (std::abs(z) > 2.0) z = rng.normal();
    m.data()[i] = std * z;
  }
}

AdamW::AdamW(std::vector<Param*> params, Options options) : params_(std::move(params)), opt_(options) {
  for (const Param* p : params_) {
    m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamW::step(double lr) {
  ++step_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(step_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Param& p = *params_[k];
    if (p.decay && opt_.weight_decay > 0) p.value *= (1.0 - lr * opt_.weight_decay);
    m_[k] = opt_.beta1 * m_[k] + (1 - opt_.beta1) * p.grad;
    v_[k] = opt_.beta2 * v_[k] + (1 - opt_.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= lr * (m_[k].array() / bc1) / ((v_[k].array() / bc2).sqrt() + opt_.eps);
  }
}

}  // namespace fragq::nn
