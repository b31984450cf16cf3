#pragma once

// From-scratch feed-forward classifier: ReLU hidden layers, softmax
// output, categorical cross-entropy, inverted dropout and mini-batch
// backpropagation with adaptive moment estimation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sovrate/core.hpp"
#include "sovrate/dataset.hpp"

namespace sovrate {

inline std::vector<double> relu(std::span<const double> z) {
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::max(0.0, z[i]);
    return out;
}

/// Softmax with max-subtraction so large logits cannot overflow.
inline std::vector<double> softmax(std::span<const double> z) {
    if (z.empty()) throw std::invalid_argument("softmax of empty vector");
    const double zmax = *std::max_element(z.begin(), z.end());
    std::vector<double> out(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(z[i] - zmax);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

inline constexpr double kLogFloor = 1e-12;  // probability floor inside ln

/// Summed categorical cross-entropy over a batch of probability rows and
/// matching one-hot label rows.
inline double cross_entropy(const Matrix& p_hat, const Matrix& y_onehot) {
    if (p_hat.rows() != y_onehot.rows() || p_hat.cols() != y_onehot.cols())
        throw std::invalid_argument("cross_entropy shape mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < p_hat.rows(); ++i)
        for (std::size_t j = 0; j < p_hat.cols(); ++j)
            if (y_onehot(i, j) != 0.0)
                loss -= y_onehot(i, j) * std::log(std::max(p_hat(i, j), kLogFloor));
    return loss;
}

/// Convenience overload on 1-based integer labels.
inline double cross_entropy(const Matrix& p_hat, const std::vector<int>& y) {
    if (p_hat.rows() != y.size()) throw std::invalid_argument("cross_entropy length mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < p_hat.rows(); ++i)
        loss -= std::log(std::max(p_hat(i, static_cast<std::size_t>(y[i] - 1)), kLogFloor));
    return loss;
}

/// 1-based argmax with ties broken toward the lower class.
inline int argmax_class(std::span<const double> p) {
    int best = 1;
    for (std::size_t j = 1; j < p.size(); ++j)
        if (p[j] > p[static_cast<std::size_t>(best - 1)]) best = static_cast<int>(j) + 1;
    return best;
}

struct MlpConfig {
    int hidden_layers = 1;
    int neurons = 256;
    double dropout = 0.1;
    int epochs = 400;
    int batch_size = 8;
    double step_size = 1e-3;
    std::uint64_t seed = 0;

    void validate() const {
        if (hidden_layers < 1) throw std::invalid_argument("hidden_layers must be >= 1");
        if (neurons < 1) throw std::invalid_argument("neurons must be >= 1");
        if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0,1)");
        if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
        if (step_size <= 0.0) throw std::invalid_argument("step_size must be > 0");
    }
};

/// Fully connected network of arbitrary layer sizes. weights(l) maps the
/// activations of layer l (size layer_sizes[l]) to the pre-activations of
/// layer l+1; biases(l) matches the destination layer.
class MlpNetwork {
public:
    MlpNetwork() = default;

    /// Fan-based uniform weight init (limit sqrt(6/(fan_in+fan_out))),
    /// zero biases.
    MlpNetwork(std::vector<int> layer_sizes, std::mt19937_64& rng) : sizes_(std::move(layer_sizes)) {
        if (sizes_.size() < 2) throw std::invalid_argument("network needs at least input and output layer");
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            const auto fan_in = static_cast<std::size_t>(sizes_[l]);
            const auto fan_out = static_cast<std::size_t>(sizes_[l + 1]);
            Matrix w(fan_out, fan_in);
            const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            std::uniform_real_distribution<double> dist(-limit, limit);
            for (std::size_t i = 0; i < w.rows(); ++i)
                for (std::size_t j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
            w_.push_back(std::move(w));
            b_.emplace_back(fan_out, 0.0);
        }
    }

    MlpNetwork(std::vector<int> layer_sizes, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        *this = MlpNetwork(std::move(layer_sizes), rng);
    }

    static MlpNetwork from_weights(std::vector<Matrix> w, std::vector<std::vector<double>> b) {
        if (w.empty() || w.size() != b.size()) throw std::invalid_argument("weight/bias layer mismatch");
        MlpNetwork net;
        net.sizes_.push_back(static_cast<int>(w.front().cols()));
        for (std::size_t l = 0; l < w.size(); ++l) {
            if (w[l].rows() != b[l].size() ||
                w[l].cols() != static_cast<std::size_t>(net.sizes_.back()))
                throw std::invalid_argument("layer shapes do not chain");
            net.sizes_.push_back(static_cast<int>(w[l].rows()));
        }
        net.w_ = std::move(w);
        net.b_ = std::move(b);
        return net;
    }

    const std::vector<int>& layer_sizes() const { return sizes_; }
    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    std::size_t weighted_layers() const { return w_.size(); }

    Matrix& weights(std::size_t l) { return w_[l]; }
    const Matrix& weights(std::size_t l) const { return w_[l]; }
    std::vector<double>& biases(std::size_t l) { return b_[l]; }
    const std::vector<double>& biases(std::size_t l) const { return b_[l]; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < w_.size(); ++l) n += w_[l].rows() * w_[l].cols() + b_[l].size();
        return n;
    }

    /// Inference-mode forward pass: no dropout, no rescaling.
    std::vector<double> forward(std::span<const double> x) const {
        return forward_masked(x, nullptr, nullptr);
    }

    int predict_class(std::span<const double> x) const {
        const auto p = forward(x);
        return argmax_class(p);
    }

    /// Training-mode forward pass. masks, when non-null, holds one factor
    /// per hidden unit per hidden layer (0 for dropped, 1/(1-rate) for
    /// kept). cache, when non-null, receives pre-activations and
    /// activations for the backward pass.
    struct Cache {
        std::vector<std::vector<double>> a;  // a[0] = input, a.back() = softmax output
        std::vector<std::vector<double>> z;  // z[l] = pre-activation of layer l+1
    };

    std::vector<double> forward_masked(std::span<const double> x,
                                       const std::vector<std::vector<double>>* masks,
                                       Cache* cache) const {
        if (x.size() != static_cast<std::size_t>(sizes_.front()))
            throw std::invalid_argument("input width " + std::to_string(x.size()) + " does not match network input " +
                                        std::to_string(sizes_.front()));
        std::vector<double> a(x.begin(), x.end());
        if (cache) {
            cache->a.assign(1, a);
            cache->z.clear();
        }
        for (std::size_t l = 0; l < w_.size(); ++l) {
            const Matrix& w = w_[l];
            std::vector<double> z(b_[l]);
            for (std::size_t i = 0; i < w.rows(); ++i) {
                const double* wr = w.data() + i * w.cols();
                double acc = 0.0;
                for (std::size_t j = 0; j < w.cols(); ++j) acc += wr[j] * a[j];
                z[i] += acc;
            }
            if (cache) cache->z.push_back(z);
            if (l + 1 < w_.size()) {
                for (double& v : z) v = std::max(0.0, v);
                if (masks) {
                    const auto& m = (*masks)[l];
                    for (std::size_t i = 0; i < z.size(); ++i) z[i] *= m[i];
                }
                a = std::move(z);
            } else {
                a = softmax(z);
            }
            if (cache) cache->a.push_back(a);
        }
        return a;
    }

private:
    std::vector<int> sizes_;
    std::vector<Matrix> w_;
    std::vector<std::vector<double>> b_;
};

struct MlpGradients {
    std::vector<Matrix> w;
    std::vector<std::vector<double>> b;

    explicit MlpGradients(const MlpNetwork& net) {
        for (std::size_t l = 0; l < net.weighted_layers(); ++l) {
            w.emplace_back(net.weights(l).rows(), net.weights(l).cols());
            b.emplace_back(net.biases(l).size(), 0.0);
        }
    }
};

namespace detail {

/// Accumulates the gradient of one sample's cross-entropy into grads.
/// Softmax and cross-entropy are fused: output-layer delta = p - y.
inline void accumulate_sample_gradient(const MlpNetwork& net, std::span<const double> x, int label,
                                       const std::vector<std::vector<double>>* masks,
                                       MlpGradients& grads) {
    MlpNetwork::Cache cache;
    const auto p = net.forward_masked(x, masks, &cache);

    const std::size_t layers = net.weighted_layers();
    std::vector<double> delta = p;
    delta[static_cast<std::size_t>(label - 1)] -= 1.0;

    for (std::size_t l = layers; l-- > 0;) {
        const auto& a_prev = cache.a[l];
        Matrix& gw = grads.w[l];
        for (std::size_t i = 0; i < gw.rows(); ++i) {
            double* gr = gw.data() + i * gw.cols();
            const double di = delta[i];
            for (std::size_t j = 0; j < gw.cols(); ++j) gr[j] += di * a_prev[j];
            grads.b[l][i] += di;
        }
        if (l == 0) break;
        const Matrix& w = net.weights(l);
        std::vector<double> prev(w.cols(), 0.0);
        for (std::size_t i = 0; i < w.rows(); ++i) {
            const double* wr = w.data() + i * w.cols();
            const double di = delta[i];
            for (std::size_t j = 0; j < w.cols(); ++j) prev[j] += wr[j] * di;
        }
        const auto& z_prev = cache.z[l - 1];
        for (std::size_t j = 0; j < prev.size(); ++j) {
            if (z_prev[j] <= 0.0) prev[j] = 0.0;
            else if (masks) prev[j] *= (*masks)[l - 1][j];
        }
        delta = std::move(prev);
    }
}

}  // namespace detail

/// Exact analytic gradient of the summed cross-entropy over the batch
/// with respect to every weight and bias. Dropout masks, when given,
/// are per sample (outer vector), per hidden layer (inner).
inline MlpGradients gradients(const MlpNetwork& net, const Matrix& x, const std::vector<int>& y,
                              const std::vector<std::vector<std::vector<double>>>* sample_masks = nullptr) {
    if (x.rows() == 0) throw std::invalid_argument("gradients of empty batch");
    if (x.rows() != y.size()) throw std::invalid_argument("gradients batch length mismatch");
    MlpGradients grads(net);
    for (std::size_t s = 0; s < x.rows(); ++s) {
        const auto* masks = sample_masks ? &(*sample_masks)[s] : nullptr;
        detail::accumulate_sample_gradient(net, x.row(s), y[s], masks, grads);
    }
    return grads;
}

namespace detail {

/// Adaptive moment estimation with the usual bias correction.
class AdamState {
public:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEpsilon = 1e-7;

    explicit AdamState(const MlpNetwork& net) : m_(net), v_(net) {}

    void apply(MlpNetwork& net, const MlpGradients& g, double step_size, double scale) {
        ++t_;
        const double corr1 = 1.0 - std::pow(kBeta1, t_);
        const double corr2 = 1.0 - std::pow(kBeta2, t_);
        for (std::size_t l = 0; l < net.weighted_layers(); ++l) {
            update_block(net.weights(l).data(), g.w[l].data(), m_.w[l].data(), v_.w[l].data(),
                         g.w[l].rows() * g.w[l].cols(), step_size, scale, corr1, corr2);
            update_block(net.biases(l).data(), g.b[l].data(), m_.b[l].data(), v_.b[l].data(),
                         g.b[l].size(), step_size, scale, corr1, corr2);
        }
    }

private:
    static void update_block(double* param, const double* grad, double* m, double* v, std::size_t n,
                             double step, double scale, double corr1, double corr2) {
        for (std::size_t i = 0; i < n; ++i) {
            const double g = grad[i] * scale;
            m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
            v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
            const double mhat = m[i] / corr1;
            const double vhat = v[i] / corr2;
            param[i] -= step * mhat / (std::sqrt(vhat) + kEpsilon);
        }
    }

    MlpGradients m_;
    MlpGradients v_;
    long t_ = 0;
};

inline std::vector<std::vector<double>> draw_dropout_masks(const MlpNetwork& net, double rate,
                                                           std::mt19937_64& rng) {
    std::vector<std::vector<double>> masks;
    const double keep_scale = 1.0 / (1.0 - rate);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t l = 0; l + 1 < net.weighted_layers(); ++l) {
        std::vector<double> m(net.biases(l).size());
        for (double& f : m) f = unif(rng) < rate ? 0.0 : keep_scale;
        masks.push_back(std::move(m));
    }
    return masks;
}

}  // namespace detail

/// Mini-batch training of a generic network on labels 1..m. The batch
/// gradient is averaged before the optimizer step. Deterministic given
/// the rng state.
inline void train_network(MlpNetwork& net, const Matrix& x, const std::vector<int>& y, int epochs,
                          int batch_size, double step_size, double dropout, std::mt19937_64& rng) {
    if (x.rows() == 0) throw std::invalid_argument("training set is empty");
    if (x.rows() != y.size()) throw std::invalid_argument("training labels length mismatch");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");

    detail::AdamState adam(net);
    std::vector<std::size_t> order(x.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
            MlpGradients grads(net);
            for (std::size_t s = start; s < end; ++s) {
                std::vector<std::vector<double>> masks;
                if (dropout > 0.0) masks = detail::draw_dropout_masks(net, dropout, rng);
                detail::accumulate_sample_gradient(net, x.row(order[s]), y[order[s]],
                                                   dropout > 0.0 ? &masks : nullptr, grads);
            }
            adam.apply(net, grads, step_size, 1.0 / static_cast<double>(end - start));
        }
    }
}

/// Rating-pipeline model: a 9 -> hidden -> 17 network together with the
/// standardizer fitted on its training rows.
class MlpModel {
public:
    MlpModel() = default;
    MlpModel(MlpConfig config, Standardizer standardizer, MlpNetwork net)
        : config_(config), standardizer_(std::move(standardizer)), net_(std::move(net)) {}

    const MlpConfig& config() const { return config_; }
    const Standardizer& standardizer() const { return standardizer_; }
    const MlpNetwork& network() const { return net_; }

    std::vector<double> probabilities(std::span<const double> raw_x) const {
        return net_.forward(standardizer_.apply(raw_x));
    }

    int predict(std::span<const double> raw_x) const { return argmax_class(probabilities(raw_x)); }

    /// Probability-weighted numeric rating, the scalar the explanations
    /// attribute (in notches).
    double expected_rating(std::span<const double> raw_x) const {
        const auto p = probabilities(raw_x);
        double e = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) e += static_cast<double>(j + 1) * p[j];
        return e;
    }

    void save(const std::string& path) const;
    static MlpModel load(const std::string& path);

private:
    MlpConfig config_;
    Standardizer standardizer_;
    MlpNetwork net_;
};

inline MlpModel train_mlp(const MlpConfig& config, const Dataset& train) {
    config.validate();
    if (train.empty()) throw std::invalid_argument("training set is empty");

    const Standardizer standardizer = Standardizer::fit(train);
    const Dataset std_train = standardizer.apply(train);
    const Matrix x = to_matrix(std_train);
    const std::vector<int> y = labels(std_train);

    std::vector<int> sizes{kFeatureCount};
    for (int l = 0; l < config.hidden_layers; ++l) sizes.push_back(config.neurons);
    sizes.push_back(kNumClasses);

    std::mt19937_64 rng(config.seed);
    MlpNetwork net(sizes, rng);
    train_network(net, x, y, config.epochs, config.batch_size, config.step_size, config.dropout, rng);
    return MlpModel(config, standardizer, std::move(net));
}

// ---------------------------------------------------------------------------
// Persistence: self-describing flat text file; parameters as decimal text
// with enough digits to round-trip doubles exactly.

inline void MlpModel::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "sovrate-mlp 1\n";
    out << "schema " << schema_hash() << "\n";
    out << "config " << config_.hidden_layers << " " << config_.neurons << " "
        << fmt_double(config_.dropout) << " " << config_.epochs << " " << config_.batch_size << " "
        << fmt_double(config_.step_size) << " " << config_.seed << "\n";
    out << "standardizer";
    for (double v : standardizer_.means()) out << " " << fmt_double(v);
    for (double v : standardizer_.stds()) out << " " << fmt_double(v);
    out << "\n";
    out << "layers " << net_.layer_sizes().size();
    for (int s : net_.layer_sizes()) out << " " << s;
    out << "\n";
    for (std::size_t l = 0; l < net_.weighted_layers(); ++l) {
        const Matrix& w = net_.weights(l);
        out << "W" << l << " " << w.rows() << " " << w.cols() << "\n";
        for (std::size_t i = 0; i < w.rows(); ++i) {
            for (std::size_t j = 0; j < w.cols(); ++j) out << (j ? " " : "") << fmt_double(w(i, j));
            out << "\n";
        }
        out << "b" << l << " " << net_.biases(l).size() << "\n";
        for (std::size_t i = 0; i < net_.biases(l).size(); ++i)
            out << (i ? " " : "") << fmt_double(net_.biases(l)[i]);
        out << "\n";
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

inline MlpModel MlpModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string tag;
    int version = 0;
    in >> tag >> version;
    if (tag != "sovrate-mlp" || version != 1) throw ParseError("not a sovrate-mlp v1 file");

    std::uint64_t hash = 0;
    in >> tag >> hash;
    if (tag != "schema" || hash != schema_hash()) throw ParseError("schema mismatch in model file");

    MlpConfig config;
    in >> tag >> config.hidden_layers >> config.neurons >> config.dropout >> config.epochs >>
        config.batch_size >> config.step_size >> config.seed;
    if (tag != "config") throw ParseError("missing config in model file");

    in >> tag;
    if (tag != "standardizer") throw ParseError("missing standardizer in model file");
    std::vector<double> means(kFeatureCount), stds(kFeatureCount);
    for (double& v : means) in >> v;
    for (double& v : stds) in >> v;

    std::size_t nlayers = 0;
    in >> tag >> nlayers;
    if (tag != "layers") throw ParseError("missing layer sizes in model file");
    std::vector<int> sizes(nlayers);
    for (int& s : sizes) in >> s;

    std::vector<Matrix> w;
    std::vector<std::vector<double>> b;
    for (std::size_t l = 0; l + 1 < nlayers; ++l) {
        std::size_t rows = 0, cols = 0;
        in >> tag >> rows >> cols;
        Matrix m(rows, cols);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) in >> m(i, j);
        w.push_back(std::move(m));
        std::size_t bn = 0;
        in >> tag >> bn;
        std::vector<double> bias(bn);
        for (double& v : bias) in >> v;
        b.push_back(std::move(bias));
    }
    if (!in) throw ParseError("truncated model file");

    return MlpModel(config, Standardizer::from_moments(std::move(means), std::move(stds)),
                    MlpNetwork::from_weights(std::move(w), std::move(b)));
}

}  // namespace sovrate
