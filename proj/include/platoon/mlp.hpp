// Fully-connected networks with exact reverse-mode gradients and an Adam
// optimizer. Batches are column-major: one sample per column.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace platoon {

enum class Activation { Relu, Tanh, Identity };

std::string_view to_string(Activation a);
std::optional<Activation> parse_activation(std::string_view name);

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
  Activation activation = Activation::Identity;
};

struct Mlp {
  std::vector<DenseLayer> layers;

  Eigen::Index input_dim() const;
  Eigen::Index output_dim() const;
  std::size_t parameter_count() const;
};

/// Post-activation outputs of every layer; outputs[0] is the input batch.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> outputs;
};

/// Gradient of a scalar loss with respect to every parameter and the input.
struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Eigen::MatrixXd input;
};

/// Throws std::invalid_argument when layer dimensions do not chain or a
/// parameter is non-finite.
void validate(const Mlp& net);

/// Runs the batch `input` (input_dim x batch). Fills `cache` when given.
Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& input,
                        ForwardCache* cache = nullptr);

/// Single-sample convenience wrapper.
std::vector<double> forward(const Mlp& net, std::span<const double> input);

/// Backpropagates `upstream` = dLoss/dOutput (output_dim x batch). Parameter
/// gradients are summed over the batch. With `parameters == false` only the
/// input gradient is produced.
Gradients backward(const Mlp& net, const ForwardCache& cache,
                   const Eigen::MatrixXd& upstream, bool parameters = true);

struct AdamState {
  std::vector<Eigen::MatrixXd> m_weights, v_weights;
  std::vector<Eigen::VectorXd> m_biases, v_biases;
  std::int64_t step = 0;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState make_adam_state(const Mlp& net, double learning_rate);

/// Gradient-descent step with bias-corrected moment estimates.
void adam_step(Mlp& net, const Gradients& grads, AdamState& opt);

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero. When
/// `final_halfwidth` is set, the last layer's weights use that half-width
/// instead.
Mlp init_mlp(std::span<const int> dims, std::span<const Activation> activations,
             std::uint64_t seed,
             std::optional<double> final_halfwidth = std::nullopt);

// Text persistence: "mlp v1 <layers>", then per layer "<out> <in> <act>",
// the weight rows, and the bias row; values printed with 17 significant
// digits so a load reproduces the network bit for bit.
void save_mlp(std::ostream& os, const Mlp& net);
Mlp load_mlp(std::istream& is);
void save_mlp(const std::filesystem::path& path, const Mlp& net);
Mlp load_mlp(const std::filesystem::path& path);

}  // namespace platoon
