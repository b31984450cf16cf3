#pragma once

// Shared fixtures for the test suites.

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "sovrate/dataset.hpp"

namespace testutil {

/// Fresh scratch directory under the system temp dir, removed on
/// destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("sovrate_test_" + tag + "_" + std::to_string(counter.fetch_add(1)) + "_" +
                 std::to_string(::getpid()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    std::string str() const { return path_.string(); }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Dataset with the given feature columns; ratings cycle through the
/// provided labels.
inline sovrate::Dataset dataset_from_columns(const std::vector<std::vector<double>>& columns,
                                             const std::vector<int>& label_cycle = {9}) {
    sovrate::Dataset d;
    const std::size_t n = columns.front().size();
    for (std::size_t i = 0; i < n; ++i) {
        sovrate::Observation obs;
        obs.country = "T" + std::to_string(i);
        obs.year = 2001 + static_cast<int>(i % 19);
        obs.features.assign(sovrate::kFeatureCount, 0.0);
        for (std::size_t j = 0; j < columns.size() && j < sovrate::kFeatureCount; ++j)
            obs.features[j] = columns[j][i];
        obs.rating = sovrate::rating_from_numeric(label_cycle[i % label_cycle.size()]);
        d.rows.push_back(std::move(obs));
    }
    return d;
}

struct OrdLogitSample {
    sovrate::Matrix x;
    std::vector<int> y;
    std::vector<double> thresholds;
};

/// Draws data from a known ordered-logit: standard normal features,
/// logistic noise via inverse CDF, thresholds at the realized latent
/// quantiles so every class is populated.
inline OrdLogitSample ordered_logit_sample(std::size_t n, const std::vector<double>& beta,
                                           int num_classes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(1e-12, 1.0 - 1e-12);

    OrdLogitSample out;
    out.x = sovrate::Matrix(n, beta.size());
    std::vector<double> latent(n);
    for (std::size_t i = 0; i < n; ++i) {
        double eta = 0.0;
        for (std::size_t j = 0; j < beta.size(); ++j) {
            out.x(i, j) = gauss(rng);
            eta += beta[j] * out.x(i, j);
        }
        const double u = unif(rng);
        latent[i] = eta + std::log(u / (1.0 - u));
    }
    std::vector<double> sorted = latent;
    std::sort(sorted.begin(), sorted.end());
    for (int j = 1; j < num_classes; ++j)
        out.thresholds.push_back(
            sorted[static_cast<std::size_t>(j) * n / static_cast<std::size_t>(num_classes)]);
    out.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        int k = 1;
        for (double tau : out.thresholds)
            if (latent[i] >= tau) ++k;
        out.y[i] = k;
    }
    return out;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace testutil
