#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace txmorph {

/// Three fully connected layers, ReLU on the two hidden layers, linear output.
struct MlpParams {
    std::array<Eigen::MatrixXd, 3> weights;  // (d_in x h1), (h1 x h2), (h2 x d_out)
    std::array<Eigen::VectorXd, 3> biases;
    std::array<int, 4> dims = {256, 512, 1024, 768};
};

struct ForwardCache {
    Eigen::MatrixXd input;
    std::array<Eigen::MatrixXd, 2> pre_activations;  // hidden layers, before ReLU
    std::array<Eigen::MatrixXd, 2> activations;      // after ReLU
};

struct MlpGradients {
    std::array<Eigen::MatrixXd, 3> weights;
    std::array<Eigen::VectorXd, 3> biases;
    Eigen::MatrixXd input;  // dX
};

struct AdamState {
    std::array<Eigen::MatrixXd, 3> m_weights;
    std::array<Eigen::VectorXd, 3> m_biases;
    std::array<Eigen::MatrixXd, 3> v_weights;
    std::array<Eigen::VectorXd, 3> v_biases;
    std::int64_t step = 0;
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
MlpParams init_params(const std::array<int, 4>& dims, std::uint64_t seed);

Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixXd& X,
                        ForwardCache* cache = nullptr);

MlpGradients backward(const MlpParams& params, const ForwardCache& cache,
                      const Eigen::MatrixXd& dH);

AdamState init_adam(const MlpParams& params, double lr);

/// Standard Adam update with bias correction. Returns new params; `state`
/// moments and step counter are advanced in place.
MlpParams adam_step(const MlpParams& params, const MlpGradients& grads, AdamState& state);

/// Flat binary file with a JSON header (dims, layer offsets); bit-exact round-trip.
void save_params(const MlpParams& params, const std::string& path, std::uint64_t seed = 0);
MlpParams load_params(const std::string& path);

}  // namespace txmorph
