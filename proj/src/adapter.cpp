#include "txmorph/adapter.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "txmorph/errors.hpp"
#include "txmorph/rng.hpp"

namespace txmorph {

namespace {

void check_dims(const std::array<int, 4>& dims) {
    for (int d : dims) {
        if (d <= 0) throw validation_error("ConfigInvalid", "adapter dims must be positive");
    }
}

}  // namespace

MlpParams init_params(const std::array<int, 4>& dims, std::uint64_t seed) {
    check_dims(dims);
    MlpParams params;
    params.dims = dims;
    auto rng = CounterRng::derive({seed, 0x6d6c70ULL});
    for (int layer = 0; layer < 3; ++layer) {
        const int fan_in = dims[layer];
        const int fan_out = dims[layer + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Eigen::MatrixXd& w = params.weights[layer];
        w.resize(fan_in, fan_out);
        for (int r = 0; r < fan_in; ++r) {
            for (int c = 0; c < fan_out; ++c) {
                w(r, c) = bound * (2.0 * rng.uniform01() - 1.0);
            }
        }
        params.biases[layer] = Eigen::VectorXd::Zero(fan_out);
    }
    return params;
}

Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixXd& X,
                        ForwardCache* cache) {
    if (X.cols() != params.dims[0]) {
        throw validation_error("DimensionMismatch",
                               "input has " + std::to_string(X.cols()) +
                                   " columns, adapter expects " +
                                   std::to_string(params.dims[0]));
    }
    Eigen::MatrixXd z1 =
        (X * params.weights[0]).rowwise() + params.biases[0].transpose();
    Eigen::MatrixXd a1 = z1.cwiseMax(0.0);
    Eigen::MatrixXd z2 =
        (a1 * params.weights[1]).rowwise() + params.biases[1].transpose();
    Eigen::MatrixXd a2 = z2.cwiseMax(0.0);
    Eigen::MatrixXd out =
        (a2 * params.weights[2]).rowwise() + params.biases[2].transpose();
    if (cache) {
        cache->input = X;
        cache->pre_activations = {std::move(z1), std::move(z2)};
        cache->activations = {std::move(a1), std::move(a2)};
    }
    return out;
}

MlpGradients backward(const MlpParams& params, const ForwardCache& cache,
                      const Eigen::MatrixXd& dH) {
    if (dH.rows() != cache.input.rows() || dH.cols() != params.dims[3]) {
        throw validation_error("ShapeMismatch", "upstream gradient shape");
    }
    MlpGradients g;
    g.weights[2] = cache.activations[1].transpose() * dH;
    g.biases[2] = dH.colwise().sum();
    Eigen::MatrixXd da2 = dH * params.weights[2].transpose();
    // ReLU subgradient at 0 is 0
    Eigen::MatrixXd dz2 =
        da2.array() * (cache.pre_activations[1].array() > 0.0).cast<double>();
    g.weights[1] = cache.activations[0].transpose() * dz2;
    g.biases[1] = dz2.colwise().sum();
    Eigen::MatrixXd da1 = dz2 * params.weights[1].transpose();
    Eigen::MatrixXd dz1 =
        da1.array() * (cache.pre_activations[0].array() > 0.0).cast<double>();
    g.weights[0] = cache.input.transpose() * dz1;
    g.biases[0] = dz1.colwise().sum();
    g.input = dz1 * params.weights[0].transpose();
    return g;
}

AdamState init_adam(const MlpParams& params, double lr) {
    AdamState state;
    state.lr = lr;
    for (int i = 0; i < 3; ++i) {
        state.m_weights[i] = Eigen::MatrixXd::Zero(params.weights[i].rows(),
                                                   params.weights[i].cols());
        state.v_weights[i] = state.m_weights[i];
        state.m_biases[i] = Eigen::VectorXd::Zero(params.biases[i].size());
        state.v_biases[i] = state.m_biases[i];
    }
    return state;
}

MlpParams adam_step(const MlpParams& params, const MlpGradients& grads, AdamState& state) {
    for (int i = 0; i < 3; ++i) {
        if (grads.weights[i].rows() != params.weights[i].rows() ||
            grads.weights[i].cols() != params.weights[i].cols() ||
            grads.biases[i].size() != params.biases[i].size()) {
            throw validation_error("ShapeMismatch", "gradient shapes");
        }
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    MlpParams out = params;
    auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = (state.beta2 * v.array() + (1.0 - state.beta2) * g.array().square()).matrix();
        p = (p.array() -
             state.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.eps))
                .matrix();
    };
    for (int i = 0; i < 3; ++i) {
        update(out.weights[i], state.m_weights[i], state.v_weights[i], grads.weights[i]);
        update(out.biases[i], state.m_biases[i], state.v_biases[i], grads.biases[i]);
    }
    return out;
}

namespace {
constexpr char kMagic[4] = {'T', 'X', 'M', 'P'};
}

void save_params(const MlpParams& params, const std::string& path, std::uint64_t seed) {
    nlohmann::json header;
    header["dims"] = params.dims;
    header["seed"] = seed;
    header["precision"] = "float64";
    std::vector<std::size_t> offsets;
    std::size_t offset = 0;
    for (int i = 0; i < 3; ++i) {
        offsets.push_back(offset);
        offset += static_cast<std::size_t>(params.weights[i].size()) * sizeof(double);
        offsets.push_back(offset);
        offset += static_cast<std::size_t>(params.biases[i].size()) * sizeof(double);
    }
    header["layer_offsets"] = offsets;
    const std::string htext = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("FileWriteFailed", path);
    out.write(kMagic, 4);
    const std::uint32_t hlen = static_cast<std::uint32_t>(htext.size());
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    for (int i = 0; i < 3; ++i) {
        out.write(reinterpret_cast<const char*>(params.weights[i].data()),
                  static_cast<std::streamsize>(params.weights[i].size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(params.biases[i].data()),
                  static_cast<std::streamsize>(params.biases[i].size() * sizeof(double)));
    }
}

MlpParams load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("FileNotFound", path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw io_error("BadParamsFile", path + ": bad magic");
    }
    std::uint32_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string htext(hlen, '\0');
    in.read(htext.data(), hlen);
    if (!in) throw io_error("BadParamsFile", path + ": truncated header");
    nlohmann::json header = nlohmann::json::parse(htext);
    MlpParams params;
    auto dims = header.at("dims").get<std::vector<int>>();
    if (dims.size() != 4) throw io_error("BadParamsFile", "dims must have 4 entries");
    std::copy(dims.begin(), dims.end(), params.dims.begin());
    check_dims(params.dims);
    for (int i = 0; i < 3; ++i) {
        params.weights[i].resize(params.dims[i], params.dims[i + 1]);
        in.read(reinterpret_cast<char*>(params.weights[i].data()),
                static_cast<std::streamsize>(params.weights[i].size() * sizeof(double)));
        params.biases[i].resize(params.dims[i + 1]);
        in.read(reinterpret_cast<char*>(params.biases[i].data()),
                static_cast<std::streamsize>(params.biases[i].size() * sizeof(double)));
    }
    if (!in) throw io_error("BadParamsFile", path + ": truncated payload");
    return params;
}

}  // namespace txmorph
