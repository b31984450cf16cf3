#pragma once

// Pooled ordered logit: latent score x'beta with logistic noise, cut into
// ordered classes by strictly increasing thresholds. Fitted by maximum
// likelihood (gradient ascent with Armijo backtracking); standard errors
// from the inverse observed information.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sovrate/core.hpp"
#include "sovrate/dataset.hpp"

namespace sovrate {

/// Standard logistic CDF, stable for large |u|.
inline double logistic_cdf(double u) {
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

inline double logistic_pdf(double u) {
    const double c = logistic_cdf(u);
    return c * (1.0 - c);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

struct OrdLogitOptions {
    int max_iterations = 10000;
    double gradient_tolerance = 1e-6;  // infinity norm
};

/// Fitted model. The intercept is fixed at 0 for identifiability; the
/// thresholds absorb it.
struct OrderedLogitModel {
    std::vector<double> beta;        // one coefficient per model column
    std::vector<double> thresholds;  // m-1 values, strictly increasing
    int num_classes = 0;
    std::vector<int> included;       // schema indices when fitted on a Dataset

    double latent(std::span<const double> x) const {
        if (x.size() != beta.size()) throw std::invalid_argument("feature width does not match model");
        double s = 0.0;
        for (std::size_t j = 0; j < beta.size(); ++j) s += beta[j] * x[j];
        return s;
    }
};

/// P(class j) as differences of the logistic CDF between consecutive
/// thresholds; tau_0 = -inf, tau_m = +inf.
inline std::vector<double> class_probabilities(const OrderedLogitModel& model,
                                               std::span<const double> x) {
    const double eta = model.latent(x);
    std::vector<double> p(static_cast<std::size_t>(model.num_classes));
    double prev = 0.0;
    for (int j = 0; j < model.num_classes; ++j) {
        const double cur = j + 1 < model.num_classes
                               ? logistic_cdf(model.thresholds[static_cast<std::size_t>(j)] - eta)
                               : 1.0;
        p[static_cast<std::size_t>(j)] = cur - prev;
        prev = cur;
    }
    return p;
}

inline int predict(const OrderedLogitModel& model, std::span<const double> x) {
    const auto p = class_probabilities(model, x);
    int best = 1;
    for (std::size_t j = 1; j < p.size(); ++j)
        if (p[j] > p[static_cast<std::size_t>(best - 1)]) best = static_cast<int>(j) + 1;
    return best;
}

inline double log_likelihood(const OrderedLogitModel& model, const Matrix& x,
                             const std::vector<int>& y) {
    if (x.rows() != y.size()) throw std::invalid_argument("log_likelihood length mismatch");
    double ll = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double eta = model.latent(x.row(i));
        const int yi = y[i];
        const double hi = yi < model.num_classes
                              ? logistic_cdf(model.thresholds[static_cast<std::size_t>(yi - 1)] - eta)
                              : 1.0;
        const double lo =
            yi > 1 ? logistic_cdf(model.thresholds[static_cast<std::size_t>(yi - 2)] - eta) : 0.0;
        ll += std::log(std::max(hi - lo, 1e-12));
    }
    return ll;
}

struct OrdLogitGradient {
    std::vector<double> beta;
    std::vector<double> tau;
};

/// Analytic gradient of log_likelihood with respect to (beta, tau).
inline OrdLogitGradient log_likelihood_gradient(const OrderedLogitModel& model, const Matrix& x,
                                                const std::vector<int>& y) {
    OrdLogitGradient g;
    g.beta.assign(model.beta.size(), 0.0);
    g.tau.assign(model.thresholds.size(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double eta = model.latent(x.row(i));
        const int yi = y[i];
        const bool has_hi = yi < model.num_classes;
        const bool has_lo = yi > 1;
        const double a = has_hi ? model.thresholds[static_cast<std::size_t>(yi - 1)] - eta : 0.0;
        const double b = has_lo ? model.thresholds[static_cast<std::size_t>(yi - 2)] - eta : 0.0;
        const double hi = has_hi ? logistic_cdf(a) : 1.0;
        const double lo = has_lo ? logistic_cdf(b) : 0.0;
        const double p = std::max(hi - lo, 1e-12);
        const double la = has_hi ? logistic_pdf(a) : 0.0;
        const double lb = has_lo ? logistic_pdf(b) : 0.0;
        const double deta = (lb - la) / p;
        for (std::size_t j = 0; j < g.beta.size(); ++j) g.beta[j] += deta * x(i, j);
        if (has_hi) g.tau[static_cast<std::size_t>(yi - 1)] += la / p;
        if (has_lo) g.tau[static_cast<std::size_t>(yi - 2)] -= lb / p;
    }
    return g;
}

struct FitRow {
    std::string name;
    double estimate = 0.0;
    double std_error = 0.0;
    double p_value = 0.0;
};

struct FitReport {
    std::vector<FitRow> coefficients;  // one per model column
    double log_lik = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> ll_history;  // log-likelihood after each accepted step
};

namespace detail {

/// In-place Gauss-Jordan inverse; returns false on a (near) singular
/// matrix.
inline bool invert_matrix(Matrix& a) {
    const std::size_t n = a.rows();
    Matrix inv(n, n);
    for (std::size_t i = 0; i < n; ++i) inv(i, i) = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
        if (std::abs(a(pivot, col)) < 1e-12) return false;
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) {
                std::swap(a(pivot, c), a(col, c));
                std::swap(inv(pivot, c), inv(col, c));
            }
        }
        const double d = a(col, col);
        for (std::size_t c = 0; c < n; ++c) {
            a(col, c) /= d;
            inv(col, c) /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a(r, col);
            if (f == 0.0) continue;
            for (std::size_t c = 0; c < n; ++c) {
                a(r, c) -= f * a(col, c);
                inv(r, c) -= f * inv(col, c);
            }
        }
    }
    a = std::move(inv);
    return true;
}

inline double normal_two_sided_p(double zstat) {
    return std::erfc(std::abs(zstat) / std::sqrt(2.0));
}

/// Threshold reparameterization: tau_1 = t_1, tau_j = tau_{j-1} + exp(t_j)
/// keeps the thresholds strictly increasing for any unconstrained t.
inline std::vector<double> tau_from_t(const std::vector<double>& t) {
    std::vector<double> tau(t.size());
    if (t.empty()) return tau;
    tau[0] = t[0];
    for (std::size_t j = 1; j < t.size(); ++j) tau[j] = tau[j - 1] + std::exp(t[j]);
    return tau;
}

inline std::vector<double> t_from_tau(const std::vector<double>& tau) {
    std::vector<double> t(tau.size());
    if (tau.empty()) return t;
    t[0] = tau[0];
    for (std::size_t j = 1; j < tau.size(); ++j) t[j] = std::log(tau[j] - tau[j - 1]);
    return t;
}

}  // namespace detail

/// Maximum-likelihood fit on raw feature columns with labels in
/// 1..num_classes. Standardizes internally (fit is equivariant, so the
/// returned coefficients are in raw units either way) and reports
/// raw-unit standard errors and two-sided normal p-values.
inline std::pair<OrderedLogitModel, FitReport> fit_ordered_logit(const Matrix& x,
                                                                 const std::vector<int>& y,
                                                                 int num_classes,
                                                                 const OrdLogitOptions& options = {}) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    const auto m = static_cast<std::size_t>(num_classes);
    if (n == 0) throw std::invalid_argument("ordered logit fit on empty data");
    if (y.size() != n) throw std::invalid_argument("labels length mismatch");
    for (int yi : y)
        if (yi < 1 || yi > num_classes) throw std::invalid_argument("label outside 1..num_classes");
    {
        std::vector<int> seen(m, 0);
        for (int yi : y) seen[static_cast<std::size_t>(yi - 1)] = 1;
        if (std::accumulate(seen.begin(), seen.end(), 0) < 2)
            throw std::invalid_argument("degenerate fit: fewer than 2 distinct classes");
    }

    // Column standardization (population sd). Constant columns pass
    // through with scale 1 / shift 0.
    std::vector<double> mu(d, 0.0), sd(d, 1.0);
    Matrix z(n, d);
    for (std::size_t j = 0; j < d; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += x(i, j);
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) ss += (x(i, j) - mean) * (x(i, j) - mean);
        const double s = std::sqrt(ss / static_cast<double>(n));
        mu[j] = s > 0.0 ? mean : 0.0;
        sd[j] = s > 0.0 ? s : 1.0;
        for (std::size_t i = 0; i < n; ++i) z(i, j) = (x(i, j) - mu[j]) / sd[j];
    }

    // Initialization: beta = 0, thresholds at logistic quantiles of the
    // empirical cumulative class frequencies.
    OrderedLogitModel work;
    work.num_classes = num_classes;
    work.beta.assign(d, 0.0);
    {
        std::vector<double> cum(m, 0.0);
        for (int yi : y) cum[static_cast<std::size_t>(yi - 1)] += 1.0;
        double acc = 0.0;
        std::vector<double> tau;
        for (std::size_t j = 0; j + 1 < m; ++j) {
            acc += cum[j];
            double frac = acc / static_cast<double>(n);
            frac = std::min(std::max(frac, 1e-4), 1.0 - 1e-4);
            double v = logit(frac);
            if (!tau.empty() && v <= tau.back()) v = tau.back() + 1e-6;
            tau.push_back(v);
        }
        work.thresholds = tau;
    }

    std::vector<double> t = detail::t_from_tau(work.thresholds);
    double ll = log_likelihood(work, z, y);

    // Gradient in (beta, t) space via the chain rule through the
    // threshold reparameterization.
    auto full_gradient = [&](const OrderedLogitModel& mdl) {
        OrdLogitGradient g = log_likelihood_gradient(mdl, z, y);
        std::vector<double> gt(g.tau.size(), 0.0);
        double suffix = 0.0;
        for (std::size_t j = g.tau.size(); j-- > 0;) {
            suffix += g.tau[j];
            gt[j] = j == 0 ? suffix : suffix * std::exp(t[j]);
        }
        std::vector<double> grad = g.beta;
        grad.insert(grad.end(), gt.begin(), gt.end());
        return grad;
    };

    FitReport report;
    report.ll_history.push_back(ll);
    double step = 1.0;
    int iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        const std::vector<double> grad = full_gradient(work);
        double gmax = 0.0, gnorm2 = 0.0;
        for (double g : grad) {
            gmax = std::max(gmax, std::abs(g));
            gnorm2 += g * g;
        }
        if (gmax < options.gradient_tolerance) {
            report.converged = true;
            break;
        }

        // Armijo backtracking on the ascent direction = gradient.
        bool accepted = false;
        for (int shrink = 0; shrink < 60; ++shrink) {
            OrderedLogitModel trial = work;
            std::vector<double> t_trial = t;
            for (std::size_t j = 0; j < d; ++j) trial.beta[j] = work.beta[j] + step * grad[j];
            for (std::size_t j = 0; j < t.size(); ++j) t_trial[j] = t[j] + step * grad[d + j];
            trial.thresholds = detail::tau_from_t(t_trial);
            const double ll_trial = log_likelihood(trial, z, y);
            if (ll_trial > ll + 1e-4 * step * gnorm2) {
                work = std::move(trial);
                t = std::move(t_trial);
                ll = ll_trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;       // no ascent step found at machine precision
        report.ll_history.push_back(ll);
        step = std::min(step * 2.0, 1e3);
    }
    report.iterations = iter;
    report.log_lik = ll;

    // Observed information in (beta, tau) space by central differences of
    // the analytic gradient.
    const std::size_t np = d + m - 1;
    Matrix hess(np, np, 0.0);
    {
        auto grad_at = [&](const OrderedLogitModel& mdl) {
            OrdLogitGradient g = log_likelihood_gradient(mdl, z, y);
            std::vector<double> out = g.beta;
            out.insert(out.end(), g.tau.begin(), g.tau.end());
            return out;
        };
        for (std::size_t j = 0; j < np; ++j) {
            OrderedLogitModel hi = work, lo = work;
            const double base = j < d ? work.beta[j] : work.thresholds[j - d];
            const double eps = 1e-5 * std::max(1.0, std::abs(base));
            if (j < d) {
                hi.beta[j] = base + eps;
                lo.beta[j] = base - eps;
            } else {
                hi.thresholds[j - d] = base + eps;
                lo.thresholds[j - d] = base - eps;
            }
            const auto gh = grad_at(hi);
            const auto gl = grad_at(lo);
            for (std::size_t i = 0; i < np; ++i) hess(i, j) = (gh[i] - gl[i]) / (2.0 * eps);
        }
        for (std::size_t i = 0; i < np; ++i)  // symmetrize
            for (std::size_t j = i + 1; j < np; ++j) {
                const double v = 0.5 * (hess(i, j) + hess(j, i));
                hess(i, j) = hess(j, i) = v;
            }
    }
    Matrix info = hess;
    for (std::size_t i = 0; i < np; ++i)
        for (std::size_t j = 0; j < np; ++j) info(i, j) = -info(i, j);
    const bool invertible = detail::invert_matrix(info);

    // Back-transform to raw units: beta_raw = beta_std / sd, and the
    // thresholds absorb the centering shift.
    OrderedLogitModel model;
    model.num_classes = num_classes;
    model.beta.resize(d);
    double shift = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        model.beta[j] = work.beta[j] / sd[j];
        shift += work.beta[j] * mu[j] / sd[j];
    }
    model.thresholds = work.thresholds;
    for (double& tau : model.thresholds) tau += shift;

    report.coefficients.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        FitRow& row = report.coefficients[j];
        row.name = "x" + std::to_string(j);
        row.estimate = model.beta[j];
        const double se_std = invertible && info(j, j) > 0.0 ? std::sqrt(info(j, j))
                                                             : std::numeric_limits<double>::quiet_NaN();
        row.std_error = se_std / sd[j];
        row.p_value = std::isnan(row.std_error)
                          ? std::numeric_limits<double>::quiet_NaN()
                          : detail::normal_two_sided_p(work.beta[j] / se_std);
    }
    return {std::move(model), std::move(report)};
}

inline std::vector<int> default_ol_features() {
    std::vector<int> included;
    for (int j = 0; j < kFeatureCount; ++j)
        if (kFeatureSchema[j].name != "gov_debt") included.push_back(j);
    return included;
}

/// Dataset-level fit over a subset of schema features (by default all
/// except gov_debt, which does not help out-of-sample accuracy).
inline std::pair<OrderedLogitModel, FitReport> fit_ordered_logit(
    const Dataset& data, std::vector<int> included = default_ol_features(),
    const OrdLogitOptions& options = {}) {
    if (data.empty()) throw std::invalid_argument("ordered logit fit on empty dataset");
    if (included.empty()) throw std::invalid_argument("ordered logit needs at least one feature");
    Matrix x(data.size(), included.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        for (std::size_t j = 0; j < included.size(); ++j)
            x(i, j) = data.rows[i].features[static_cast<std::size_t>(included[j])];
    auto [model, report] = fit_ordered_logit(x, labels(data), kNumClasses, options);
    model.included = included;
    for (std::size_t j = 0; j < included.size(); ++j)
        report.coefficients[j].name = kFeatureSchema[static_cast<std::size_t>(included[j])].name;
    return {std::move(model), std::move(report)};
}

/// Extracts the model's included columns from a raw 9-feature vector.
inline std::vector<double> ol_features(const OrderedLogitModel& model, std::span<const double> raw_x) {
    std::vector<double> out;
    out.reserve(model.included.size());
    for (int j : model.included) out.push_back(raw_x[static_cast<std::size_t>(j)]);
    return out;
}

}  // namespace sovrate
