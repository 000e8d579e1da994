#pragma once

// Small fully-connected networks with hand-written backprop, and RMSProp.

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nlrl/logic.hpp"

namespace nlrl {

class DimensionError : public Error {
 public:
  using Error::Error;
};

// ReLU hidden layers, linear output. Parameters live in one flat vector laid
// out layer by layer as (W row-major [out x in], b).
class Mlp {
 public:
  struct Cache {
    std::vector<std::vector<double>> activations;  // input, hidden..., output
  };

  Mlp() = default;

  explicit Mlp(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw DimensionError("an MLP needs at least input and output sizes");
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(total);
      total += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
    }
    params_.assign(total, 0.0);
  }

  // Uniform Glorot weights, zero biases.
  void init_glorot(std::mt19937_64& rng) {
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const std::size_t in = sizes_[l], out = sizes_[l + 1];
      const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      double* w = params_.data() + offsets_[l];
      for (std::size_t i = 0; i < in * out; ++i) w[i] = dist(rng);
      for (std::size_t i = 0; i < out; ++i) w[in * out + i] = 0.0;
    }
  }

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  std::vector<double> forward(std::span<const double> x, Cache* cache = nullptr) const {
    if (x.size() != input_size())
      throw DimensionError("MLP input has " + std::to_string(x.size()) + " features, expected " +
                           std::to_string(input_size()));
    std::vector<double> a(x.begin(), x.end());
    if (cache) {
      cache->activations.clear();
      cache->activations.push_back(a);
    }
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const std::size_t in = sizes_[l], out = sizes_[l + 1];
      const double* w = params_.data() + offsets_[l];
      const double* b = w + in * out;
      std::vector<double> z(out);
      for (std::size_t o = 0; o < out; ++o) {
        double s = b[o];
        const double* row = w + o * in;
        for (std::size_t i = 0; i < in; ++i) s += row[i] * a[i];
        z[o] = (l + 2 < sizes_.size()) ? std::max(0.0, s) : s;
      }
      a = std::move(z);
      if (cache) cache->activations.push_back(a);
    }
    return a;
  }

  // Accumulates dL/dparams into `grad` given dL/doutput.
  void backward(const Cache& cache, std::span<const double> grad_output, std::span<double> grad) const {
    if (grad_output.size() != output_size()) throw DimensionError("MLP output gradient has wrong size");
    if (grad.size() != params_.size()) throw DimensionError("MLP parameter gradient has wrong size");
    std::vector<double> delta(grad_output.begin(), grad_output.end());
    for (std::size_t l = sizes_.size() - 1; l-- > 0;) {
      const std::size_t in = sizes_[l], out = sizes_[l + 1];
      const double* w = params_.data() + offsets_[l];
      double* gw = grad.data() + offsets_[l];
      double* gb = gw + in * out;
      const auto& a_in = cache.activations[l];
      for (std::size_t o = 0; o < out; ++o) {
        if (delta[o] == 0.0) continue;
        gb[o] += delta[o];
        double* grow = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) grow[i] += delta[o] * a_in[i];
      }
      if (l == 0) break;
      std::vector<double> prev(in, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        if (delta[o] == 0.0) continue;
        const double* row = w + o * in;
        for (std::size_t i = 0; i < in; ++i) prev[i] += row[i] * delta[o];
      }
      // ReLU derivative at the previous layer's output.
      for (std::size_t i = 0; i < in; ++i)
        if (a_in[i] <= 0.0) prev[i] = 0.0;
      delta = std::move(prev);
    }
  }

  void save(std::ostream& out, std::string_view name) const {
    out << "nlrl-mlp v1 " << name << '\n' << "sizes";
    for (auto s : sizes_) out << ' ' << s;
    out << '\n';
    out.precision(17);
    for (std::size_t i = 0; i < params_.size(); ++i) out << (i ? " " : "") << params_[i];
    out << '\n';
  }

  static Mlp load(std::istream& in, std::string_view expected_name) {
    std::string magic, version, name;
    if (!(in >> magic >> version >> name) || magic != "nlrl-mlp" || version != "v1")
      throw Error("not an nlrl-mlp v1 block");
    if (name != expected_name) throw Error("expected network '" + std::string(expected_name) + "', found '" + name + "'");
    std::string line, word;
    in >> std::ws;
    std::getline(in, line);
    std::istringstream sizes_in(line);
    sizes_in >> word;
    if (word != "sizes") throw Error("missing sizes line in network block");
    std::vector<std::size_t> sizes;
    std::size_t s;
    while (sizes_in >> s) sizes.push_back(s);
    Mlp net(sizes);
    for (double& p : net.params_)
      if (!(in >> p)) throw Error("truncated network parameters");
    return net;
  }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

// Masked softmax over selected output units.
inline std::vector<double> masked_softmax(std::span<const double> logits, std::span<const std::size_t> units) {
  std::vector<double> p(units.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (auto u : units) mx = std::max(mx, logits[u]);
  double sum = 0.0;
  for (std::size_t i = 0; i < units.size(); ++i) {
    p[i] = std::exp(logits[units[i]] - mx);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return p;
}

struct RmsPropConfig {
  double learning_rate = 0.001;
  double decay = 0.9;
  double epsilon = 1e-8;
};

class RmsProp {
 public:
  RmsProp() = default;
  RmsProp(std::size_t n, RmsPropConfig config) : config_(config), accum_(n, 0.0) {}

  const RmsPropConfig& config() const { return config_; }
  std::span<const double> accumulators() const { return accum_; }

  // Descends along `grad`.
  void step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != accum_.size() || grad.size() != accum_.size())
      throw DimensionError("RMSProp parameter/gradient size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grad[i];
      accum_[i] = config_.decay * accum_[i] + (1.0 - config_.decay) * g * g;
      params[i] -= config_.learning_rate * g / (std::sqrt(accum_[i]) + config_.epsilon);
    }
  }

 private:
  RmsPropConfig config_;
  std::vector<double> accum_;
};

}  // namespace nlrl
