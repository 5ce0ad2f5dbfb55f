#include "platoon/mlp.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace platoon {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "?";
}

std::optional<Activation> parse_activation(std::string_view name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity") return Activation::Identity;
  return std::nullopt;
}

Eigen::Index Mlp::input_dim() const {
  return layers.empty() ? 0 : layers.front().weights.cols();
}

Eigen::Index Mlp::output_dim() const {
  return layers.empty() ? 0 : layers.back().weights.rows();
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) {
    n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  }
  return n;
}

void validate(const Mlp& net) {
  if (net.layers.empty()) throw std::invalid_argument("mlp: no layers");
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    if (l.weights.rows() != l.bias.size() || l.weights.rows() == 0 ||
        l.weights.cols() == 0) {
      throw std::invalid_argument("mlp: layer " + std::to_string(i) +
                                  " has inconsistent shape");
    }
    if (i > 0 && l.weights.cols() != net.layers[i - 1].weights.rows()) {
      throw std::invalid_argument("mlp: layer " + std::to_string(i) +
                                  " does not chain with its predecessor");
    }
    if (!l.weights.allFinite() || !l.bias.allFinite()) {
      throw std::invalid_argument("mlp: layer " + std::to_string(i) +
                                  " has non-finite parameters");
    }
  }
}

namespace {

void activate(Eigen::MatrixXd& z, Activation a) {
  switch (a) {
    case Activation::Relu: z = z.cwiseMax(0.0); break;
    case Activation::Tanh: z = z.array().tanh().matrix(); break;
    case Activation::Identity: break;
  }
}

// Multiplies `delta` in place by the activation derivative, expressed in
// terms of the layer's post-activation output.
void apply_derivative(Eigen::MatrixXd& delta, const Eigen::MatrixXd& out,
                      Activation a) {
  switch (a) {
    case Activation::Relu:
      delta = (out.array() > 0.0).select(delta, 0.0);
      break;
    case Activation::Tanh:
      delta.array() *= 1.0 - out.array().square();
      break;
    case Activation::Identity: break;
  }
}

}  // namespace

Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& input,
                        ForwardCache* cache) {
  if (input.rows() != net.input_dim()) {
    throw std::invalid_argument("mlp forward: input has " +
                                std::to_string(input.rows()) +
                                " rows, network expects " +
                                std::to_string(net.input_dim()));
  }
  if (cache) {
    cache->outputs.resize(net.layers.size() + 1);
    cache->outputs[0] = input;
  }
  Eigen::MatrixXd z = input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    Eigen::MatrixXd next = l.weights * z;
    next.colwise() += l.bias;
    activate(next, l.activation);
    z = std::move(next);
    if (cache) cache->outputs[i + 1] = z;
  }
  return z;
}

std::vector<double> forward(const Mlp& net, std::span<const double> input) {
  const Eigen::MatrixXd x = Eigen::Map<const Eigen::MatrixXd>(
      input.data(), static_cast<Eigen::Index>(input.size()), 1);
  const Eigen::MatrixXd y = forward(net, x);
  return {y.data(), y.data() + y.size()};
}

Gradients backward(const Mlp& net, const ForwardCache& cache,
                   const Eigen::MatrixXd& upstream, bool parameters) {
  const std::size_t n = net.layers.size();
  if (cache.outputs.size() != n + 1) {
    throw std::invalid_argument("mlp backward: cache does not match network");
  }
  const Eigen::MatrixXd& out = cache.outputs.back();
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols()) {
    throw std::invalid_argument("mlp backward: upstream gradient shape mismatch");
  }
  Gradients g;
  if (parameters) {
    g.weights.resize(n);
    g.biases.resize(n);
  }
  Eigen::MatrixXd delta = upstream;
  for (std::size_t k = n; k-- > 0;) {
    const auto& l = net.layers[k];
    apply_derivative(delta, cache.outputs[k + 1], l.activation);
    if (parameters) {
      g.weights[k].noalias() = delta * cache.outputs[k].transpose();
      g.biases[k] = delta.rowwise().sum();
    }
    Eigen::MatrixXd prev = l.weights.transpose() * delta;
    delta = std::move(prev);
  }
  g.input = std::move(delta);
  return g;
}

AdamState make_adam_state(const Mlp& net, double learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  for (const auto& l : net.layers) {
    s.m_weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
    s.v_weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
    s.m_biases.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    s.v_biases.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  return s;
}

namespace {

template <typename Param, typename Moment>
void adam_update(Param& p, const Param& g, Moment& m, Moment& v,
                 const AdamState& s, double c1, double c2) {
  m = s.beta1 * m + (1.0 - s.beta1) * g;
  v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseAbs2();
  p.array() -= s.learning_rate * (m.array() / c1) /
               ((v.array() / c2).sqrt() + s.epsilon);
}

}  // namespace

void adam_step(Mlp& net, const Gradients& grads, AdamState& opt) {
  const std::size_t n = net.layers.size();
  if (grads.weights.size() != n || grads.biases.size() != n ||
      opt.m_weights.size() != n) {
    throw std::invalid_argument("adam_step: gradient/optimizer shape mismatch");
  }
  ++opt.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  for (std::size_t k = 0; k < n; ++k) {
    auto& l = net.layers[k];
    if (grads.weights[k].rows() != l.weights.rows() ||
        grads.weights[k].cols() != l.weights.cols() ||
        grads.biases[k].size() != l.bias.size()) {
      throw std::invalid_argument("adam_step: layer shape mismatch");
    }
    adam_update(l.weights, grads.weights[k], opt.m_weights[k], opt.v_weights[k],
                opt, c1, c2);
    adam_update(l.bias, grads.biases[k], opt.m_biases[k], opt.v_biases[k], opt,
                c1, c2);
  }
}

Mlp init_mlp(std::span<const int> dims, std::span<const Activation> activations,
             std::uint64_t seed, std::optional<double> final_halfwidth) {
  if (dims.size() < 2 || activations.size() != dims.size() - 1) {
    throw std::invalid_argument(
        "init_mlp: need at least two dims and one activation per layer");
  }
  for (int d : dims) {
    if (d < 1) throw std::invalid_argument("init_mlp: dims must be >= 1");
  }
  std::mt19937_64 rng(seed);
  Mlp net;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const int in = dims[k];
    const int out = dims[k + 1];
    const bool last = k + 2 == dims.size();
    const double h = (last && final_halfwidth) ? *final_halfwidth
                                               : 1.0 / std::sqrt(double(in));
    std::uniform_real_distribution<double> dist(-h, h);
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out),
                     activations[k]};
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) layer.weights(r, c) = dist(rng);
    }
    net.layers.push_back(std::move(layer));
  }
  return net;
}

namespace {

void write_number(std::ostream& os, double x) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, x,
                           std::chars_format::general, 17);
  os.write(buf, res.ptr - buf);
}

double read_number(std::istream& is) {
  std::string tok;
  if (!(is >> tok)) throw std::runtime_error("load_mlp: truncated file");
  double x = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw std::runtime_error("load_mlp: bad number '" + tok + "'");
  }
  return x;
}

}  // namespace

void save_mlp(std::ostream& os, const Mlp& net) {
  os << "mlp v1 " << net.layers.size() << '\n';
  for (const auto& l : net.layers) {
    os << l.weights.rows() << ' ' << l.weights.cols() << ' '
       << to_string(l.activation) << '\n';
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) {
        if (c) os << ' ';
        write_number(os, l.weights(r, c));
      }
      os << '\n';
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
      if (r) os << ' ';
      write_number(os, l.bias(r));
    }
    os << '\n';
  }
}

Mlp load_mlp(std::istream& is) {
  std::string magic, version;
  std::size_t count = 0;
  if (!(is >> magic >> version >> count) || magic != "mlp" || version != "v1") {
    throw std::runtime_error("load_mlp: missing 'mlp v1' header");
  }
  Mlp net;
  for (std::size_t k = 0; k < count; ++k) {
    Eigen::Index rows = 0, cols = 0;
    std::string act;
    if (!(is >> rows >> cols >> act) || rows < 1 || cols < 1) {
      throw std::runtime_error("load_mlp: bad layer header");
    }
    const auto a = parse_activation(act);
    if (!a) throw std::runtime_error("load_mlp: unknown activation " + act);
    DenseLayer l{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows), *a};
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) l.weights(r, c) = read_number(is);
    }
    for (Eigen::Index r = 0; r < rows; ++r) l.bias(r) = read_number(is);
    net.layers.push_back(std::move(l));
  }
  validate(net);
  return net;
}

void save_mlp(const std::filesystem::path& path, const Mlp& net) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  save_mlp(os, net);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

Mlp load_mlp(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return load_mlp(is);
}

}  // namespace platoon
