#pragma once

// Replicated random k-fold cross-validation, notch accuracy tables and
// paired model comparison.
//
// Seed derivation is fixed so adding replications never perturbs earlier
// ones: replication r folds with mix_seed(master_seed, r); the model for
// fold f of replication r trains with mix_seed(mix_seed(master_seed, r),
// 1 + f).

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "sovrate/cart.hpp"
#include "sovrate/core.hpp"
#include "sovrate/dataset.hpp"
#include "sovrate/mlp.hpp"
#include "sovrate/ordlogit.hpp"

namespace sovrate {

struct NotchTable {
    // percentages of predictions by signed deviation (predicted - actual)
    double below2 = 0, below1 = 0, exact = 0, above1 = 0, above2 = 0;
    double within1 = 0, within2 = 0;
    double mae = 0;
};

inline NotchTable notch_table(std::span<const int> predicted, std::span<const int> actual) {
    if (predicted.size() != actual.size() || predicted.empty())
        throw std::invalid_argument("notch_table requires equal non-empty prediction/actual vectors");
    const double n = static_cast<double>(predicted.size());
    NotchTable t;
    long w1 = 0, w2 = 0;
    double abs_sum = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const int d = predicted[i] - actual[i];
        abs_sum += std::abs(d);
        switch (d) {
            case -2: t.below2 += 1; break;
            case -1: t.below1 += 1; break;
            case 0: t.exact += 1; break;
            case 1: t.above1 += 1; break;
            case 2: t.above2 += 1; break;
            default: break;
        }
        if (std::abs(d) <= 1) ++w1;
        if (std::abs(d) <= 2) ++w2;
    }
    const double scale = 100.0 / n;
    t.below2 *= scale;
    t.below1 *= scale;
    t.exact *= scale;
    t.above1 *= scale;
    t.above2 *= scale;
    t.within1 = static_cast<double>(w1) * scale;
    t.within2 = static_cast<double>(w2) * scale;
    t.mae = abs_sum / n;
    return t;
}

/// Trains on a dataset and returns a predictor over raw feature vectors.
/// The per-fold seed keeps stochastic models deterministic.
using TrainFn = std::function<std::function<int(std::span<const double>)>(const Dataset&, std::uint64_t)>;

struct ModelSpec {
    std::string name;
    TrainFn train;
};

inline ModelSpec mlp_model_spec(MlpConfig base = {}) {
    return {"MLP", [base](const Dataset& train, std::uint64_t seed) {
                MlpConfig cfg = base;
                cfg.seed = seed;
                auto model = std::make_shared<MlpModel>(train_mlp(cfg, train));
                return [model](std::span<const double> x) { return model->predict(x); };
            }};
}

inline ModelSpec cart_model_spec(CartConfig config = {}) {
    return {"CART", [config](const Dataset& train, std::uint64_t) {
                auto model = std::make_shared<CartModel>(grow_cart(train, config));
                return [model](std::span<const double> x) { return model->predict(x); };
            }};
}

inline ModelSpec ol_model_spec(std::vector<int> included = default_ol_features(),
                               OrdLogitOptions options = {}) {
    return {"OL", [included, options](const Dataset& train, std::uint64_t) {
                auto fitted = fit_ordered_logit(train, included, options);
                auto model = std::make_shared<OrderedLogitModel>(std::move(fitted.first));
                return [model](std::span<const double> x) {
                    return predict(*model, ol_features(*model, x));
                };
            }};
}

/// Always predicts the same class; an oracle-friendly dummy.
inline ModelSpec constant_model_spec(int klass) {
    return {"CONST", [klass](const Dataset&, std::uint64_t) {
                return [klass](std::span<const double>) { return klass; };
            }};
}

struct CvResult {
    std::string model;
    int k = 0;
    int replications = 0;
    std::uint64_t master_seed = 0;
    std::size_t n = 0;
    std::vector<NotchTable> per_rep;
    std::vector<double> per_rep_accuracy;  // exact % per replication
    NotchTable aggregate;                  // arithmetic mean of per_rep
};

namespace detail {

inline NotchTable mean_table(const std::vector<NotchTable>& tables) {
    NotchTable m;
    const double n = static_cast<double>(tables.size());
    for (const auto& t : tables) {
        m.below2 += t.below2;
        m.below1 += t.below1;
        m.exact += t.exact;
        m.above1 += t.above1;
        m.above2 += t.above2;
        m.within1 += t.within1;
        m.within2 += t.within2;
        m.mae += t.mae;
    }
    m.below2 /= n; m.below1 /= n; m.exact /= n; m.above1 /= n; m.above2 /= n;
    m.within1 /= n; m.within2 /= n; m.mae /= n;
    return m;
}

/// Runs fn(job) for job in 0..count-1 on up to `jobs` threads. Results
/// must be written to pre-sized slots, so the reduction order does not
/// depend on scheduling.
inline void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
    const int workers = std::max(1, jobs == 0 ? static_cast<int>(std::thread::hardware_concurrency()) : jobs);
    if (workers == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int w = 0; w < std::min<std::size_t>(static_cast<std::size_t>(workers), count); ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Per replication: a fresh fold assignment, one model per fold trained
/// on the other k-1 folds, and the pooled out-of-sample predictions of
/// all n rows scored as one notch table.
inline CvResult cross_validate(const ModelSpec& spec, const Dataset& data, int k, int replications,
                               std::uint64_t master_seed, int jobs = 1) {
    if (replications < 1) throw std::invalid_argument("replications must be >= 1");
    if (k < 2) throw std::invalid_argument("k must be >= 2");
    const std::size_t n = data.size();
    const std::vector<int> actual = labels(data);

    CvResult result;
    result.model = spec.name;
    result.k = k;
    result.replications = replications;
    result.master_seed = master_seed;
    result.n = n;

    // One job per (replication, fold); predictions land in per-rep slots.
    std::vector<FoldAssignment> folds;
    folds.reserve(static_cast<std::size_t>(replications));
    for (int r = 0; r < replications; ++r)
        folds.push_back(make_folds(n, k, mix_seed(master_seed, static_cast<std::uint64_t>(r))));

    std::vector<std::vector<int>> predicted(static_cast<std::size_t>(replications),
                                            std::vector<int>(n, 0));
    detail::parallel_for(static_cast<std::size_t>(replications) * static_cast<std::size_t>(k), jobs,
                         [&](std::size_t job) {
                             const int r = static_cast<int>(job / static_cast<std::size_t>(k));
                             const int f = static_cast<int>(job % static_cast<std::size_t>(k));
                             const auto& fa = folds[static_cast<std::size_t>(r)];
                             const Dataset train = subset(data, fa.complement_rows(f));
                             const std::uint64_t seed =
                                 mix_seed(mix_seed(master_seed, static_cast<std::uint64_t>(r)),
                                          1 + static_cast<std::uint64_t>(f));
                             auto predictor = spec.train(train, seed);
                             for (std::size_t i : fa.fold_rows(f))
                                 predicted[static_cast<std::size_t>(r)][i] =
                                     predictor(data.rows[i].features);
                         });

    for (int r = 0; r < replications; ++r) {
        const NotchTable t = notch_table(predicted[static_cast<std::size_t>(r)], actual);
        result.per_rep.push_back(t);
        result.per_rep_accuracy.push_back(t.exact);
    }
    result.aggregate = detail::mean_table(result.per_rep);
    return result;
}

// ---------------------------------------------------------------------------
// Paired comparison

namespace detail {

/// Regularized incomplete beta I_x(a,b) via the Lentz continued fraction.
inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(1.0 - x);
    auto cf = [](double a_, double b_, double x_) {
        const double tiny = 1e-30;
        double c = 1.0, d = 1.0 - (a_ + b_) * x_ / (a_ + 1.0);
        if (std::abs(d) < tiny) d = tiny;
        d = 1.0 / d;
        double h = d;
        for (int m = 1; m <= 300; ++m) {
            const double m2 = 2.0 * m;
            double aa = m * (b_ - m) * x_ / ((a_ + m2 - 1.0) * (a_ + m2));
            d = 1.0 + aa * d;
            if (std::abs(d) < tiny) d = tiny;
            c = 1.0 + aa / c;
            if (std::abs(c) < tiny) c = tiny;
            d = 1.0 / d;
            h *= d * c;
            aa = -(a_ + m) * (a_ + b_ + m) * x_ / ((a_ + m2) * (a_ + m2 + 1.0));
            d = 1.0 + aa * d;
            if (std::abs(d) < tiny) d = tiny;
            c = 1.0 + aa / c;
            if (std::abs(c) < tiny) c = tiny;
            d = 1.0 / d;
            const double del = d * c;
            h *= del;
            if (std::abs(del - 1.0) < 1e-14) break;
        }
        return h;
    };
    if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(ln_front) * cf(a, b, x) / a;
    return 1.0 - std::exp(ln_front) * cf(b, a, 1.0 - x) / b;
}

inline double student_t_two_sided_p(double t, double df) {
    return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

}  // namespace detail

struct ComparisonResult {
    double mean_difference = 0.0;  // mean accuracy of a minus mean accuracy of b
    double t_stat = 0.0;
    double p_value = 1.0;
    bool significant_at_99 = false;
    bool degenerate_variance = false;
};

/// Paired two-sided t-test on the per-replication accuracy differences.
/// Both results must come from the same dataset, k and master seed.
inline ComparisonResult compare_models(const CvResult& a, const CvResult& b) {
    if (a.replications != b.replications || a.k != b.k || a.master_seed != b.master_seed ||
        a.n != b.n)
        throw std::invalid_argument("paired comparison requires an identical evaluation design");
    const std::size_t r = a.per_rep_accuracy.size();
    if (r < 2) throw std::invalid_argument("paired comparison needs at least 2 replications");

    ComparisonResult out;
    std::vector<double> diff(r);
    for (std::size_t i = 0; i < r; ++i) diff[i] = a.per_rep_accuracy[i] - b.per_rep_accuracy[i];
    double mean = 0.0;
    for (double v : diff) mean += v;
    mean /= static_cast<double>(r);
    double ss = 0.0;
    for (double v : diff) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(r - 1));

    out.mean_difference = mean;
    if (sd == 0.0) {
        if (mean == 0.0) {
            out.t_stat = 0.0;
            out.p_value = 1.0;
        } else {
            out.t_stat = mean > 0 ? std::numeric_limits<double>::infinity()
                                  : -std::numeric_limits<double>::infinity();
            out.p_value = 0.0;
            out.degenerate_variance = true;
        }
    } else {
        out.t_stat = mean / (sd / std::sqrt(static_cast<double>(r)));
        out.p_value = detail::student_t_two_sided_p(out.t_stat, static_cast<double>(r - 1));
    }
    out.significant_at_99 = out.p_value < 0.01;
    return out;
}

}  // namespace sovrate
