#pragma once

// Synthetic panel generator. Stands in for the proprietary rating panel
// in tests and demos: rows come in country blocks of up to 19 years
// whose features drift slowly around a per-country profile (rating
// panels are persistent), feature marginals roughly match the real
// data's ranges, and the latent creditworthiness score is a known
// function of the features so model behaviour can be checked against
// ground truth.
//
// Scenario::Linear scores each feature with its economically expected
// sign. Scenario::Nonlinear removes the linear current-account term in
// favour of |current_account| (good when far from the median in either
// direction) and adds a regulatory-quality x GDP-per-capita interaction,
// which linear-index models cannot represent.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <vector>

#include "sovrate/dataset.hpp"

namespace sovrate {

enum class Scenario { Linear, Nonlinear };

inline Scenario scenario_from_string(const std::string& s) {
    if (s == "linear") return Scenario::Linear;
    if (s == "nonlinear") return Scenario::Nonlinear;
    throw std::invalid_argument("unknown scenario '" + s + "' (expected linear|nonlinear)");
}

inline Dataset synthesize_dataset(std::size_t n, std::uint64_t seed, Scenario scenario) {
    if (n < 50) throw std::invalid_argument("synthesize_dataset requires n >= 50");

    constexpr std::size_t kYearsPerCountry = 19;
    constexpr double kYearJitter = 0.10;  // within-country drift, in profile sd units
    constexpr double kScoreNoise = 0.05;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto clamp = [](double v, double lo, double hi) { return std::min(std::max(v, lo), hi); };

    Matrix x(n, kFeatureCount);
    std::vector<double> profile(kFeatureCount, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (i % kYearsPerCountry == 0)
            for (double& p : profile) p = gauss(rng);
        double u[kFeatureCount];
        for (int f = 0; f < kFeatureCount; ++f) u[f] = profile[static_cast<std::size_t>(f)] + kYearJitter * gauss(rng);
        x(i, 0) = 3.2 + 3.4 * u[0];                          // gdp_growth
        x(i, 1) = -1.0 + std::exp(1.3 + 1.0 * u[1]);         // inflation
        x(i, 2) = std::max(0.5, 7.9 + 4.6 * u[2]);           // unemployment
        x(i, 3) = 15.0 * u[3];                               // current_account
        x(i, 4) = -1.9 + 4.2 * u[4];                         // gov_balance
        x(i, 5) = std::max(0.0, 55.0 + 33.8 * u[5]);         // gov_debt
        x(i, 6) = clamp(0.3 + 0.9 * u[6], -2.5, 2.5);        // political_stability
        x(i, 7) = clamp(0.7 + 0.8 * u[7], -2.5, 2.5);        // regulatory_quality
        x(i, 8) = std::exp(2.6 + 1.0 * u[8]);                // gdp_per_capita (1000$)
    }

    // Column z-scores so the score weights are on a common scale.
    Matrix z = x;
    for (int j = 0; j < kFeatureCount; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += z(i, j);
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) ss += (z(i, j) - mean) * (z(i, j) - mean);
        const double sd = std::sqrt(ss / static_cast<double>(n));
        for (std::size_t i = 0; i < n; ++i) z(i, j) = sd > 0.0 ? (z(i, j) - mean) / sd : 0.0;
    }

    // gdp_growth, inflation, unemployment, current_account, gov_balance,
    // gov_debt, political_stability, regulatory_quality, gdp_per_capita
    constexpr double kLinearWeights[kFeatureCount] = {0.3, -0.3, -0.6, 0.4, 0.3, -0.5, 0.4, 1.0, 0.8};

    std::vector<double> score(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < kFeatureCount; ++j) {
            if (scenario == Scenario::Nonlinear && j == 3) continue;
            s += kLinearWeights[j] * z(i, j);
        }
        if (scenario == Scenario::Nonlinear) {
            s += 1.0 * std::abs(z(i, 3));
            s += 0.8 * z(i, 7) * z(i, 8);
        }
        s += kScoreNoise * gauss(rng);
        score[i] = s;
    }

    // Quantile binning into the 17 classes: rank r (0-based) maps to
    // class 1 + floor(r*17/n), so class sizes differ by at most one.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
    std::vector<int> klass(n, 0);
    for (std::size_t r = 0; r < n; ++r)
        klass[order[r]] = 1 + static_cast<int>(r * static_cast<std::size_t>(kNumClasses) / n);

    Dataset d;
    d.rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Observation obs;
        char name[32];
        std::snprintf(name, sizeof name, "SYN%04zu", i / kYearsPerCountry);
        obs.country = name;
        obs.year = 2001 + static_cast<int>(i % kYearsPerCountry);
        obs.features.assign(x.row(i).begin(), x.row(i).end());
        obs.rating = rating_from_numeric(klass[i]);
        d.rows.push_back(std::move(obs));
    }
    return d;
}

}  // namespace sovrate
