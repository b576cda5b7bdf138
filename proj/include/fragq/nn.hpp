#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fragq/rng.hpp"

namespace fragq::nn {

// Token-major activations: one row per token, one column per channel.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

struct Param {
  std::string name;
  Mat value;
  Mat grad;
  bool decay = false;  // subject to weight decay

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

// Per-layer multiply-accumulate counter, filled by an instrumented forward
// pass. Entries keep first-insertion order.
class MacTally {
 public:
  void add(const std::string& layer, std::int64_t macs);
  const std::vector<std::pair<std::string, std::int64_t>>& entries() const { return entries_; }
  std::int64_t total() const;

 private:
  std::vector<std::pair<std::string, std::int64_t>> entries_;
  std::map<std::string, std::size_t> index_;
};

inline void tally(MacTally* t, const std::string& layer, std::int64_t macs) {
  if (t != nullptr) t->add(layer, macs);
}

// y = x W + b, W stored (in, out).
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in_features, int out_features, bool bias = true);

  Mat forward(const Mat& x, MacTally* t = nullptr) const;
  // Accumulates dW, db from the forward input x; returns dx.
  Mat backward(const Mat& x, const Mat& dy);
  void collect(std::vector<Param*>& out);

  int in_features() const { return static_cast<int>(weight.value.rows()); }
  int out_features() const { return static_cast<int>(weight.value.cols()); }

  std::string name;
  Param weight;
  Param bias;
  bool has_bias = true;
};

// Row-wise layer normalization, eps = 1e-5.
class LayerNorm {
 public:
  struct Cache {
    Mat xhat;
    Vec rstd;
  };

  LayerNorm() = default;
  LayerNorm(const std::string& name, int dim);

  Mat forward(const Mat& x, Cache* cache, MacTally* t = nullptr) const;
  Mat backward(const Mat& dy, const Cache& cache);
  void collect(std::vector<Param*>& out);

  Param gamma;
  Param beta;
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

// Exact (erf) GELU.
Mat gelu(const Mat& x);
Mat gelu_backward(const Mat& x, const Mat& dy);

// Normal(0, std) truncated to [-2 std, 2 std] by resampling.
void fill_truncated_normal(Mat& m, double std, Rng& rng);

// Decoupled weight decay Adam. Decay applies only to params with decay=true.
class AdamW {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.05;
  };

  AdamW(std::vector<Param*> params, Options options);
  void step(double lr);
  std::int64_t steps() const { return step_; }

 private:
  std::vector<Param*> params_;
  Options opt_;
  std::vector<Mat> m_, v_;
  std::int64_t step_ = 0;
};

}  // namespace fragq::nn
