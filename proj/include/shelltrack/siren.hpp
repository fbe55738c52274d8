// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "shelltrack/error.hpp"
#include "shelltrack/rng.hpp"
#include "shelltrack/tape.hpp"

namespace shelltrack {

// Sine-activated MLP. Every sine layer computes sin(omega * (W x + b)); the
// final layer is linear. The same parameter vector is evaluated with plain
// doubles, Taylor carriers (spatial jets), or tape variables.

struct SirenConfig {
  int hidden_layers = 5;
  int width = 256;
  double omega = 30.0;
  int input_dim = 2;
  int output_dim = 3;
  std::uint64_t seed = 0;
  /// Init scale of the final linear layer (small values start the field
  /// near zero output).
  double output_scale = 1.0;

  void validate() const {
    if (hidden_layers < 1 || width < 1 || !(omega > 0.0) || input_dim < 1 || output_dim < 1)
      throw ValidationError("SirenConfig: hidden_layers >= 1, width >= 1, omega > 0 required");
  }

  std::size_t param_count() const {
    std::size_t n = static_cast<std::size_t>(width) * input_dim + width;
    for (int l = 1; l < hidden_layers; ++l) n += static_cast<std::size_t>(width) * width + width;
    n += static_cast<std::size_t>(output_dim) * width + output_dim;
    return n;
  }
};

struct SirenNet {
  SirenConfig cfg;
  std::vector<double> params;
};

/// Deterministic initialization: first layer entries uniform in
/// +-1/input_dim, deeper layers uniform in +-sqrt(6/width)/omega, final
/// layer additionally scaled by cfg.output_scale.
inline SirenNet siren_init(const SirenConfig& cfg) {
  cfg.validate();
  SirenNet net{cfg, {}};
  net.params.reserve(cfg.param_count());
  Rng rng(cfg.seed);
  auto fill = [&](std::size_t count, double bound) {
    for (std::size_t i = 0; i < count; ++i) net.params.push_back(rng.uniform(-bound, bound));
  };
  const double first = 1.0 / cfg.input_dim;
  const double deeper = std::sqrt(6.0 / cfg.width) / cfg.omega;
  fill(static_cast<std::size_t>(cfg.width) * cfg.input_dim + cfg.width, first);
  for (int l = 1; l < cfg.hidden_layers; ++l)
    fill(static_cast<std::size_t>(cfg.width) * cfg.width + cfg.width, deeper);
  fill(static_cast<std::size_t>(cfg.output_dim) * cfg.width + cfg.output_dim,
       deeper * cfg.output_scale);
  return net;
}

/// Generic forward pass; S is double, Tay<K>, or a tape variable.
template <class S>
void siren_eval(const SirenNet& net, std::span<const S> in, std::span<S> out) {
  const SirenConfig& c = net.cfg;
  const double* w = net.params.data();
  std::vector<S> x(in.begin(), in.end());
  std::vector<S> y;
  int fan_in = c.input_dim;
  for (int l = 0; l < c.hidden_layers; ++l) {
    y.assign(c.width, S(0.0));
    for (int o = 0; o < c.width; ++o) {
      S acc(0.0);
      for (int i = 0; i < fan_in; ++i) acc += x[i] * w[o * fan_in + i];
      acc += S(w[c.width * fan_in + o]);
      using std::sin;
      y[o] = sin(acc * c.omega);
    }
    w += c.width * fan_in + c.width;
    x.swap(y);
    fan_in = c.width;
  }
  for (int o = 0; o < c.output_dim; ++o) {
    S acc(0.0);
    for (int i = 0; i < fan_in; ++i) acc += x[i] * w[o * fan_in + i];
    acc += S(w[c.output_dim * fan_in + o]);
    out[o] = acc;
  }
}

/// Forward pass keeping activations for the hand-rolled backward.
struct SirenTrace {
  std::vector<std::vector<double>> layer_in;  // input to each linear layer
  std::vector<std::vector<double>> pre;       // pre-activation of sine layers
};

inline void siren_forward_trace(const SirenNet& net, std::span<const double> in,
                                std::span<double> out, SirenTrace& tr) {
  const SirenConfig& c = net.cfg;
  const double* w = net.params.data();
  tr.layer_in.assign(c.hidden_layers + 1, {});
  tr.pre.assign(c.hidden_layers, {});
  std::vector<double> x(in.begin(), in.end());
  int fan_in = c.input_dim;
  for (int l = 0; l < c.hidden_layers; ++l) {
    tr.layer_in[l] = x;
    tr.pre[l].assign(c.width, 0.0);
    std::vector<double> y(c.width);
    for (int o = 0; o < c.width; ++o) {
      double acc = w[c.width * fan_in + o];
      for (int i = 0; i < fan_in; ++i) acc += x[i] * w[o * fan_in + i];
      tr.pre[l][o] = c.omega * acc;
      y[o] = std::sin(c.omega * acc);
    }
    w += c.width * fan_in + c.width;
    x.swap(y);
    fan_in = c.width;
  }
  tr.layer_in[c.hidden_layers] = x;
  for (int o = 0; o < c.output_dim; ++o) {
    double acc = w[c.output_dim * fan_in + o];
    for (int i = 0; i < fan_in; ++i) acc += x[i] * w[o * fan_in + i];
    out[o] = acc;
  }
}

/// Accumulate d(loss)/d(params) into grad (same layout as params) given
/// d(loss)/d(output). Gradients add onto the buffer, enabling batching.
inline void siren_backward(const SirenNet& net, const SirenTrace& tr,
                           std::span<const double> dout, std::span<double> grad) {
  const SirenConfig& c = net.cfg;
  // Offsets of each layer's weight block.
  std::vector<std::size_t> ofs;
  std::size_t p = 0;
  int fan_in = c.input_dim;
  for (int l = 0; l < c.hidden_layers; ++l) {
    ofs.push_back(p);
    p += static_cast<std::size_t>(c.width) * fan_in + c.width;
    fan_in = c.width;
  }
  ofs.push_back(p);

  // Final linear layer.
  const std::vector<double>& xin = tr.layer_in[c.hidden_layers];
  std::vector<double> dx(c.width, 0.0);
  {
    const double* w = net.params.data() + ofs[c.hidden_layers];
    double* g = grad.data() + ofs[c.hidden_layers];
    for (int o = 0; o < c.output_dim; ++o) {
      const double d = dout[o];
      for (int i = 0; i < c.width; ++i) {
        g[o * c.width + i] += d * xin[i];
        dx[i] += d * w[o * c.width + i];
      }
      g[c.output_dim * c.width + o] += d;
    }
  }

  // Sine layers, last to first.
  for (int l = c.hidden_layers - 1; l >= 0; --l) {
    const int fin = l == 0 ? c.input_dim : c.width;
    const std::vector<double>& x = tr.layer_in[l];
    const double* w = net.params.data() + ofs[l];
    double* g = grad.data() + ofs[l];
    std::vector<double> dprev(fin, 0.0);
    for (int o = 0; o < c.width; ++o) {
      const double dz = dx[o] * std::cos(tr.pre[l][o]) * c.omega;
      for (int i = 0; i < fin; ++i) {
        g[o * fin + i] += dz * x[i];
        dprev[i] += dz * w[o * fin + i];
      }
      g[c.width * fin + o] += dz;
    }
    dx.swap(dprev);
  }
}

/// Forward pass on a tape whose leaves are the network parameters
/// (registered in params order as the tape's first leaves).
template <class R>
void siren_eval_tape(const SirenNet& net, Tape<R>& tape, std::span<const TVar<R>> weight_vars,
                     std::span<const TVar<R>> in, std::span<TVar<R>> out) {
  const SirenConfig& c = net.cfg;
  if (weight_vars.size() != net.params.size())
    throw ValidationError("siren_eval_tape: leaf count mismatch");
  std::size_t p = 0;
  std::vector<TVar<R>> x(in.begin(), in.end());
  std::vector<TVar<R>> y;
  int fan_in = c.input_dim;
  for (int l = 0; l < c.hidden_layers; ++l) {
    y.assign(c.width, TVar<R>{});
    for (int o = 0; o < c.width; ++o) {
      auto pre = tape.dot_product(weight_vars.data() + p + o * fan_in, x.data(), fan_in) +
                 weight_vars[p + static_cast<std::size_t>(c.width) * fan_in + o];
      y[o] = sin(pre * c.omega);
    }
    p += static_cast<std::size_t>(c.width) * fan_in + c.width;
    x.swap(y);
    fan_in = c.width;
  }
  for (int o = 0; o < c.output_dim; ++o)
    out[o] = tape.dot_product(weight_vars.data() + p + o * fan_in, x.data(), fan_in) +
             weight_vars[p + static_cast<std::size_t>(c.output_dim) * fan_in + o];
}

// -- flat binary container --------------------------------------------------

namespace detail {

template <class T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("unexpected end of field container");
  return v;
}

}  // namespace detail

inline void siren_save(std::ostream& os, const SirenNet& net) {
  detail::write_pod(os, std::int32_t{net.cfg.hidden_layers});
  detail::write_pod(os, std::int32_t{net.cfg.width});
  detail::write_pod(os, net.cfg.omega);
  detail::write_pod(os, std::int32_t{net.cfg.input_dim});
  detail::write_pod(os, std::int32_t{net.cfg.output_dim});
  detail::write_pod(os, net.cfg.seed);
  detail::write_pod(os, net.cfg.output_scale);
  detail::write_pod(os, std::uint64_t{net.params.size()});
  os.write(reinterpret_cast<const char*>(net.params.data()),
           static_cast<std::streamsize>(net.params.size() * sizeof(double)));
}

inline SirenNet siren_load(std::istream& is) {
  SirenNet net;
  net.cfg.hidden_layers = detail::read_pod<std::int32_t>(is);
  net.cfg.width = detail::read_pod<std::int32_t>(is);
  net.cfg.omega = detail::read_pod<double>(is);
  net.cfg.input_dim = detail::read_pod<std::int32_t>(is);
  net.cfg.output_dim = detail::read_pod<std::int32_t>(is);
  net.cfg.seed = detail::read_pod<std::uint64_t>(is);
  net.cfg.output_scale = detail::read_pod<double>(is);
  const auto n = detail::read_pod<std::uint64_t>(is);
  if (n != net.cfg.param_count()) throw IoError("field container: parameter count mismatch");
  net.params.resize(n);
  is.read(reinterpret_cast<char*>(net.params.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw IoError("field container: truncated parameter block");
  return net;
}

}  // namespace shelltrack
