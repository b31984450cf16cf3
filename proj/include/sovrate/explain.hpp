#pragma once

// Exact Shapley additive explanations for any scalar prediction function
// over the feature vector, by full enumeration of the 2^d coalitions.
// Missing features are marginalized interventionally: a coalition's value
// is the average model output over the background rows with the
// coalition's features overwritten by the explained point.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sovrate/core.hpp"
#include "sovrate/dataset.hpp"

namespace sovrate {

struct ExplainTarget {
    std::function<double(std::span<const double>)> f;  // pure scalar prediction
    std::string label;
};

class BackgroundSet {
public:
    explicit BackgroundSet(Matrix rows) : rows_(std::move(rows)) {
        if (rows_.rows() == 0) throw std::invalid_argument("background set is empty");
    }

    /// Up to max_rows rows sampled without replacement, seed-deterministic.
    static BackgroundSet sample(const Dataset& d, std::size_t max_rows, std::uint64_t seed) {
        if (d.empty()) throw std::invalid_argument("background set is empty");
        std::vector<std::size_t> idx(d.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        if (d.size() > max_rows) {
            std::mt19937_64 rng(seed);
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(max_rows);
            std::sort(idx.begin(), idx.end());
        }
        Matrix rows(idx.size(), kFeatureCount);
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (int j = 0; j < kFeatureCount; ++j) rows(i, j) = d.rows[idx[i]].features[j];
        return BackgroundSet(std::move(rows));
    }

    std::size_t size() const { return rows_.rows(); }
    std::size_t width() const { return rows_.cols(); }
    std::span<const double> row(std::size_t i) const { return rows_.row(i); }

private:
    Matrix rows_;
};

namespace detail {

inline double coalition_value_mask(const ExplainTarget& target, std::span<const double> x,
                                   const BackgroundSet& background, std::uint32_t mask,
                                   std::vector<double>& buffer) {
    double sum = 0.0;
    for (std::size_t r = 0; r < background.size(); ++r) {
        const auto b = background.row(r);
        for (std::size_t j = 0; j < x.size(); ++j)
            buffer[j] = (mask >> j) & 1u ? x[j] : b[j];
        sum += target.f(buffer);
    }
    return sum / static_cast<double>(background.size());
}

}  // namespace detail

/// E[f | features in S fixed to x's values], interventional form: average
/// of f over the background with the S-features overwritten by x.
inline double coalition_value(const ExplainTarget& target, std::span<const double> x,
                              const BackgroundSet& background, const std::vector<int>& subset) {
    if (background.width() != x.size())
        throw std::invalid_argument("background width does not match the explained point");
    std::uint32_t mask = 0;
    for (int j : subset) {
        if (j < 0 || static_cast<std::size_t>(j) >= x.size())
            throw std::invalid_argument("coalition feature index out of range");
        mask |= 1u << j;
    }
    std::vector<double> buffer(x.size());
    return detail::coalition_value_mask(target, x, background, mask, buffer);
}

struct ShapExplanation {
    double phi0 = 0.0;            // baseline: mean prediction over the background
    std::vector<double> phi;      // per-feature contribution, in prediction units
    std::vector<double> x;        // the explained feature vector
    double fx = 0.0;              // model output at x
};

/// Exact Shapley values: for each feature i, the classic subset-weighted
/// sum of marginal contributions over all coalitions excluding i. All
/// 2^d coalition values are evaluated once and shared across features,
/// so local accuracy phi0 + sum(phi) = f(x) holds by construction.
inline ShapExplanation shapley(const ExplainTarget& target, std::span<const double> x,
                               const BackgroundSet& background) {
    const std::size_t d = x.size();
    if (d == 0 || d > 20) throw std::invalid_argument("shapley supports 1..20 features");
    if (background.width() != d)
        throw std::invalid_argument("background width does not match the explained point");

    const std::uint32_t full = (1u << d) - 1u;
    std::vector<double> value(static_cast<std::size_t>(full) + 1);
    std::vector<double> buffer(d);
    for (std::uint32_t mask = 0; mask <= full; ++mask)
        value[mask] = detail::coalition_value_mask(target, x, background, mask, buffer);

    // weight(s) = s! (d-1-s)! / d!  for a coalition of size s not
    // containing the feature in question.
    std::vector<double> weight(d);
    for (std::size_t s = 0; s < d; ++s) {
        double w = 1.0 / static_cast<double>(d);  // 1 / (d * C(d-1, s))
        for (std::size_t t = 1; t <= s; ++t)
            w *= static_cast<double>(t) / static_cast<double>(d - t);
        weight[s] = w;
    }

    ShapExplanation ex;
    ex.phi0 = value[0];
    ex.fx = value[full];
    ex.x.assign(x.begin(), x.end());
    ex.phi.assign(d, 0.0);
    for (std::uint32_t mask = 0; mask <= full; ++mask) {
        const auto s = static_cast<std::size_t>(std::popcount(mask));
        for (std::size_t i = 0; i < d; ++i) {
            if ((mask >> i) & 1u) continue;
            ex.phi[i] += weight[s] * (value[mask | (1u << i)] - value[mask]);
        }
    }
    return ex;
}

struct ImportanceEntry {
    int feature = 0;
    double mean_abs_phi = 0.0;
};

/// Features sorted by mean |phi| descending; ties by feature index.
inline std::vector<ImportanceEntry> importance_ranking(std::span<const ShapExplanation> explanations) {
    if (explanations.empty()) throw std::invalid_argument("importance_ranking of empty list");
    const std::size_t d = explanations.front().phi.size();
    std::vector<ImportanceEntry> out(d);
    for (std::size_t j = 0; j < d; ++j) out[j].feature = static_cast<int>(j);
    for (const auto& ex : explanations) {
        if (ex.phi.size() != d) throw std::invalid_argument("explanations have mixed widths");
        for (std::size_t j = 0; j < d; ++j) out[j].mean_abs_phi += std::abs(ex.phi[j]);
    }
    for (auto& e : out) e.mean_abs_phi /= static_cast<double>(explanations.size());
    std::stable_sort(out.begin(), out.end(), [](const ImportanceEntry& a, const ImportanceEntry& b) {
        if (a.mean_abs_phi != b.mean_abs_phi) return a.mean_abs_phi > b.mean_abs_phi;
        return a.feature < b.feature;
    });
    return out;
}

namespace detail {

/// Mean 0-based rank of v among values (ties averaged), scaled to [0,1];
/// 0.5 when there is only one value.
inline double rank_percentile(double v, const std::vector<double>& values) {
    if (values.size() < 2) return 0.5;
    std::size_t less = 0, equal = 0;
    for (double w : values) {
        if (w < v) ++less;
        else if (w == v) ++equal;
    }
    const double mean_rank = static_cast<double>(less) + 0.5 * static_cast<double>(equal - 1);
    return mean_rank / static_cast<double>(values.size() - 1);
}

inline std::string beeswarm_color(double percentile) {
    // low -> blue, high -> red
    const int r = static_cast<int>(std::lround(58.0 + percentile * (179.0 - 58.0)));
    const int g = static_cast<int>(std::lround(76.0 + percentile * (30.0 - 76.0)));
    const int b = static_cast<int>(std::lround(192.0 + percentile * (60.0 - 192.0)));
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

}  // namespace detail

/// Writes (a) a tidy CSV of the explanations and (b) a static SVG
/// beeswarm: one row per feature ordered by importance, x = phi, point
/// color low->blue / high->red by within-feature percentile of the raw
/// value, vertical jitter deterministic in the seed.
inline void beeswarm_export(const std::vector<ShapExplanation>& explanations,
                            const std::string& csv_path, const std::string& svg_path,
                            std::uint64_t seed,
                            std::vector<std::string> feature_names = {}) {
    if (explanations.empty()) throw std::invalid_argument("beeswarm_export of empty list");
    const std::size_t d = explanations.front().phi.size();
    if (feature_names.empty()) {
        if (d == kFeatureCount)
            for (const auto& f : kFeatureSchema) feature_names.emplace_back(f.name);
        else
            for (std::size_t j = 0; j < d; ++j) feature_names.push_back("f" + std::to_string(j));
    }
    if (feature_names.size() != d) throw std::invalid_argument("feature name count mismatch");

    std::vector<std::vector<double>> raw(d);
    for (const auto& ex : explanations)
        for (std::size_t j = 0; j < d; ++j) raw[j].push_back(ex.x[j]);

    {
        std::ofstream csv(csv_path);
        if (!csv) throw IoError("cannot write '" + csv_path + "'");
        csv << "feature,phi,raw_value,color_percentile,instance_id\n";
        for (std::size_t i = 0; i < explanations.size(); ++i) {
            const auto& ex = explanations[i];
            for (std::size_t j = 0; j < d; ++j) {
                csv << feature_names[j] << "," << fmt_double(ex.phi[j]) << ","
                    << fmt_double(ex.x[j]) << ","
                    << fmt_double(detail::rank_percentile(ex.x[j], raw[j]), 6) << "," << i << "\n";
            }
        }
        if (!csv) throw IoError("failed writing '" + csv_path + "'");
    }

    const auto ranking = importance_ranking(explanations);

    double phi_min = 0.0, phi_max = 0.0;
    for (const auto& ex : explanations)
        for (double p : ex.phi) {
            phi_min = std::min(phi_min, p);
            phi_max = std::max(phi_max, p);
        }
    if (phi_max - phi_min < 1e-9) phi_max = phi_min + 1.0;

    const double row_h = 42.0, left = 170.0, plot_w = 600.0, top = 36.0;
    const double height = top + row_h * static_cast<double>(d) + 40.0;
    const double width = left + plot_w + 40.0;
    auto x_of = [&](double phi) { return left + (phi - phi_min) / (phi_max - phi_min) * plot_w; };

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-row_h * 0.32, row_h * 0.32);

    std::ofstream svg(svg_path);
    if (!svg) throw IoError("cannot write '" + svg_path + "'");
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt_fixed(width, 0)
        << "\" height=\"" << fmt_fixed(height, 0) << "\">\n";
    svg << "<text x=\"" << fmt_fixed(left, 1) << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
        << "impact on predicted rating (notches)</text>\n";
    svg << "<line x1=\"" << fmt_fixed(x_of(0.0), 2) << "\" y1=\"" << fmt_fixed(top, 1) << "\" x2=\""
        << fmt_fixed(x_of(0.0), 2) << "\" y2=\"" << fmt_fixed(top + row_h * static_cast<double>(d), 1)
        << "\" stroke=\"#999999\" stroke-width=\"1\"/>\n";

    for (std::size_t r = 0; r < d; ++r) {
        const auto j = static_cast<std::size_t>(ranking[r].feature);
        const double cy = top + row_h * (static_cast<double>(r) + 0.5);
        svg << "<text x=\"8\" y=\"" << fmt_fixed(cy + 4.0, 1)
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << feature_names[j] << "</text>\n";
        for (const auto& ex : explanations) {
            const double pct = detail::rank_percentile(ex.x[j], raw[j]);
            svg << "<circle cx=\"" << fmt_fixed(x_of(ex.phi[j]), 2) << "\" cy=\""
                << fmt_fixed(cy + jitter(rng), 2) << "\" r=\"2.5\" fill=\""
                << detail::beeswarm_color(pct) << "\" fill-opacity=\"0.8\"/>\n";
        }
    }

    for (double tick : {phi_min, 0.0, phi_max}) {
        svg << "<text x=\"" << fmt_fixed(x_of(tick), 2) << "\" y=\"" << fmt_fixed(height - 14.0, 1)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
            << fmt_fixed(tick, 2) << "</text>\n";
    }
    svg << "</svg>\n";
    if (!svg) throw IoError("failed writing '" + svg_path + "'");
}

}  // namespace sovrate
