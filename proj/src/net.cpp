#include "espark/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace espark {

namespace {

Eigen::Index mlp_size(int in, int hidden, int out) {
    return static_cast<Eigen::Index>(hidden) * in + hidden + hidden * hidden + hidden +
           static_cast<Eigen::Index>(out) * hidden + out;
}

}  // namespace

PolicyParams::PolicyParams(int obs_dim, int action_count, int hidden)
    : obs_dim_(obs_dim), action_count_(action_count), hidden_(hidden) {
    if (obs_dim < 1 || action_count < 1 || hidden < 1)
        throw std::invalid_argument("network dimensions must be positive");
    flat_ = Eigen::VectorXd::Zero(mlp_size(obs_dim, hidden, action_count) +
                                  mlp_size(obs_dim, hidden, 1));
}

PolicyParams::Block PolicyParams::block(int which, int layer, bool is_bias) const {
    const int out_dim = which == 0 ? action_count_ : 1;
    Eigen::Index offset = which == 0 ? 0 : mlp_size(obs_dim_, hidden_, action_count_);
    const int dims[3][2] = {{hidden_, obs_dim_}, {hidden_, hidden_}, {out_dim, hidden_}};
    for (int l = 0; l < 3; ++l) {
        const Eigen::Index rows = dims[l][0];
        const Eigen::Index cols = dims[l][1];
        if (l == layer && !is_bias) return {offset, rows, cols};
        offset += rows * cols;
        if (l == layer) return {offset, rows, 1};
        offset += rows;
    }
    throw std::invalid_argument("layer index out of range");
}

Eigen::Map<Eigen::MatrixXd> PolicyParams::weight(int which, int layer) {
    const Block b = block(which, layer, false);
    return {flat_.data() + b.offset, b.rows, b.cols};
}

Eigen::Map<const Eigen::MatrixXd> PolicyParams::weight(int which, int layer) const {
    const Block b = block(which, layer, false);
    return {flat_.data() + b.offset, b.rows, b.cols};
}

Eigen::Map<Eigen::VectorXd> PolicyParams::bias(int which, int layer) {
    const Block b = block(which, layer, true);
    return {flat_.data() + b.offset, b.rows};
}

Eigen::Map<const Eigen::VectorXd> PolicyParams::bias(int which, int layer) const {
    const Block b = block(which, layer, true);
    return {flat_.data() + b.offset, b.rows};
}

PolicyParams PolicyParams::xavier_init(int obs_dim, int action_count, SeededRng& rng,
                                       int hidden) {
    PolicyParams params(obs_dim, action_count, hidden);
    for (int which = 0; which < 2; ++which) {
        for (int layer = 0; layer < 3; ++layer) {
            auto w = params.weight(which, layer);
            const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-limit, limit);
            // biases stay zero
        }
    }
    return params;
}

void mlp_forward(const PolicyParams& params, int which, const Eigen::MatrixXd& features,
                 ForwardPass& pass) {
    const auto w1 = params.weight(which, 0);
    const auto w2 = params.weight(which, 1);
    const auto w3 = params.weight(which, 2);
    const auto b1 = params.bias(which, 0);
    const auto b2 = params.bias(which, 1);
    const auto b3 = params.bias(which, 2);
    pass.h1 = ((w1 * features).colwise() + b1).array().tanh().matrix();
    pass.h2 = ((w2 * pass.h1).colwise() + b2).array().tanh().matrix();
    pass.out = (w3 * pass.h2).colwise() + b3;
}

std::pair<ActionDistribution, double> forward(const PolicyParams& params,
                                              const Eigen::VectorXd& features) {
    if (features.size() != params.obs_dim())
        throw std::invalid_argument("feature vector size does not match the network");
    ForwardPass actor;
    mlp_forward(params, 0, features, actor);
    if (!actor.out.allFinite()) throw std::domain_error("non-finite actor activation");
    ForwardPass critic;
    mlp_forward(params, 1, features, critic);
    if (!critic.out.allFinite()) throw std::domain_error("non-finite critic activation");
    std::vector<double> logits(actor.out.data(), actor.out.data() + actor.out.rows());
    return {ActionDistribution::from_logits(logits), critic.out(0, 0)};
}

namespace {

constexpr char kMagic[8] = {'E', 'S', 'P', 'K', 'P', 'O', 'L', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error("truncated checkpoint file");
    return value;
}

}  // namespace

void save_params(const std::string& path, const PolicyParams& params,
                 std::uint64_t config_hash) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(out, 1);
    write_pod<std::uint64_t>(out, config_hash);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.obs_dim()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.action_count()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.hidden()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(params.size()));
    out.write(reinterpret_cast<const char*>(params.flat().data()),
              static_cast<std::streamsize>(params.size() * sizeof(double)));
    if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

PolicyParams load_params(const std::string& path, std::uint64_t expected_config_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a policy checkpoint: " + path);
    const auto version = read_pod<std::uint32_t>(in);
    if (version != 1) throw std::runtime_error("unsupported checkpoint version");
    const auto config_hash = read_pod<std::uint64_t>(in);
    if (expected_config_hash != 0 && config_hash != expected_config_hash)
        throw std::runtime_error("checkpoint config hash mismatch: " + path);
    const auto obs_dim = read_pod<std::uint32_t>(in);
    const auto action_count = read_pod<std::uint32_t>(in);
    const auto hidden = read_pod<std::uint32_t>(in);
    const auto count = read_pod<std::uint64_t>(in);
    PolicyParams params(static_cast<int>(obs_dim), static_cast<int>(action_count),
                        static_cast<int>(hidden));
    if (count != static_cast<std::uint64_t>(params.size()))
        throw std::runtime_error("checkpoint parameter count mismatch: " + path);
    in.read(reinterpret_cast<char*>(params.flat().data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw std::runtime_error("truncated checkpoint file: " + path);
    return params;
}

}  // namespace espark
