#pragma once

// Country-year panel handling: CSV ingestion with strict validation,
// descriptive statistics, feature standardization and fold assignment
// for cross-validation.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sovrate/core.hpp"
#include "sovrate/rating.hpp"
#include "sovrate/schema.hpp"

namespace sovrate {

struct Observation {
    std::string country;
    int year = 0;
    std::vector<double> features;  // kFeatureCount values in schema order
    Rating rating;
};

struct Dataset {
    std::vector<Observation> rows;

    std::size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }
};

/// Feature block of the dataset as an n x 9 matrix.
inline Matrix to_matrix(const Dataset& d) {
    Matrix x(d.size(), kFeatureCount);
    for (std::size_t i = 0; i < d.size(); ++i) {
        for (int j = 0; j < kFeatureCount; ++j) x(i, j) = d.rows[i].features[j];
    }
    return x;
}

inline std::vector<int> labels(const Dataset& d) {
    std::vector<int> y;
    y.reserve(d.size());
    for (const auto& row : d.rows) y.push_back(row.rating.numeric());
    return y;
}

inline Dataset subset(const Dataset& d, const std::vector<std::size_t>& idx) {
    Dataset out;
    out.rows.reserve(idx.size());
    for (std::size_t i : idx) out.rows.push_back(d.rows[i]);
    return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t");
    if (b == std::string::npos) return {};
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& field, const char* column, long line) {
    const std::string t = trim(field);
    if (t.empty()) throw MissingValueError(column, line);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size())
        throw ParseError(std::string("bad number '") + t + "' in column '" + column + "'", line);
    return v;
}

inline int parse_int(const std::string& field, const char* column, long line) {
    const std::string t = trim(field);
    if (t.empty()) throw MissingValueError(column, line);
    int v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size())
        throw ParseError(std::string("bad integer '") + t + "' in column '" + column + "'", line);
    return v;
}

}  // namespace detail

inline std::string csv_header() {
    std::string h = "country,year";
    for (const auto& f : kFeatureSchema) h += "," + std::string(f.name);
    h += ",rating";
    return h;
}

/// Loads the panel CSV. Rows with gaps or malformed values are rejected
/// with the offending line number; the header must match csv_header().
inline Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty file", 1);
    {
        auto fields = detail::split_csv_line(line);
        auto expected = detail::split_csv_line(csv_header());
        if (fields != expected)
            throw ParseError("header mismatch, expected '" + csv_header() + "'", 1);
    }

    Dataset d;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (fields.size() != 2 + kFeatureCount + 1)
            throw ParseError("expected " + std::to_string(2 + kFeatureCount + 1) + " fields, got " +
                                 std::to_string(fields.size()),
                             lineno);
        Observation obs;
        obs.country = detail::trim(fields[0]);
        if (obs.country.empty()) throw MissingValueError("country", lineno);
        obs.year = detail::parse_int(fields[1], "year", lineno);
        obs.features.resize(kFeatureCount);
        for (int j = 0; j < kFeatureCount; ++j)
            obs.features[j] = detail::parse_double(fields[2 + j], kFeatureSchema[j].name.data(), lineno);
        const std::string sym = detail::trim(fields[2 + kFeatureCount]);
        if (sym.empty()) throw MissingValueError("rating", lineno);
        obs.rating = rating_from_symbol(sym);
        d.rows.push_back(std::move(obs));
    }
    if (d.empty()) throw ParseError("no rows");
    return d;
}

/// Writes a dataset in the load_dataset() format. Class 1 is written as
/// its representative agency symbol "Caa1" so the file stays loadable.
inline void save_dataset(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << csv_header() << "\n";
    for (const auto& row : d.rows) {
        out << row.country << "," << row.year;
        for (double v : row.features) out << "," << fmt_double(v);
        const int num = row.rating.numeric();
        out << "," << (num == 1 ? "Caa1" : canonical_symbol(num)) << "\n";
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Descriptive statistics

struct StatsRow {
    std::string feature;
    double median = 0, mean = 0, std = 0, p1 = 0, p99 = 0;
};

struct StatsTable {
    std::vector<StatsRow> rows;  // one per feature, schema order
};

/// Percentile by linear interpolation between closest ranks (the
/// "inclusive" rule): rank = p/100 * (n-1) over the sorted values.
inline double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("percentile of empty vector");
    std::sort(values.begin(), values.end());
    const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(rank);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = rank - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

/// Median, mean, sample standard deviation and 1%/99% percentiles per
/// feature. The percentile rule is the one documented on percentile().
inline StatsTable descriptive_stats(const Dataset& d) {
    if (d.empty()) throw std::invalid_argument("descriptive_stats of empty dataset");
    StatsTable table;
    const std::size_t n = d.size();
    for (int j = 0; j < kFeatureCount; ++j) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = d.rows[i].features[j];
        StatsRow row;
        row.feature = kFeatureSchema[j].name;
        row.mean = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(n);
        double ss = 0.0;
        for (double v : col) ss += (v - row.mean) * (v - row.mean);
        row.std = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
        row.median = percentile(col, 50.0);
        row.p1 = percentile(col, 1.0);
        row.p99 = percentile(col, 99.0);
        table.rows.push_back(std::move(row));
    }
    return table;
}

// ---------------------------------------------------------------------------
// Standardization

/// Per-feature shift/scale learned from a training subset. Uses the
/// population standard deviation (n denominator). Constant features pass
/// through unchanged.
class Standardizer {
public:
    Standardizer() = default;

    static Standardizer fit(const Dataset& d, const std::vector<std::size_t>& rows) {
        if (rows.empty()) throw std::invalid_argument("standardizer fit on empty subset");
        Standardizer s;
        s.mean_.assign(kFeatureCount, 0.0);
        s.std_.assign(kFeatureCount, 0.0);
        const double n = static_cast<double>(rows.size());
        for (int j = 0; j < kFeatureCount; ++j) {
            double sum = 0.0;
            for (std::size_t i : rows) sum += d.rows[i].features[j];
            const double mean = sum / n;
            double ss = 0.0;
            for (std::size_t i : rows) {
                const double dv = d.rows[i].features[j] - mean;
                ss += dv * dv;
            }
            s.mean_[j] = mean;
            s.std_[j] = std::sqrt(ss / n);
        }
        return s;
    }

    static Standardizer fit(const Dataset& d) {
        std::vector<std::size_t> all(d.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        return fit(d, all);
    }

    /// Identity standardizer (all features pass through).
    static Standardizer identity() {
        Standardizer s;
        s.mean_.assign(kFeatureCount, 0.0);
        s.std_.assign(kFeatureCount, 0.0);
        return s;
    }

    static Standardizer from_moments(std::vector<double> means, std::vector<double> stds) {
        if (means.size() != kFeatureCount || stds.size() != kFeatureCount)
            throw std::invalid_argument("standardizer moments must have one entry per feature");
        Standardizer s;
        s.mean_ = std::move(means);
        s.std_ = std::move(stds);
        return s;
    }

    void apply(std::span<const double> in, std::span<double> out) const {
        for (int j = 0; j < kFeatureCount; ++j)
            out[j] = std_[j] > 0.0 ? (in[j] - mean_[j]) / std_[j] : in[j];
    }

    std::vector<double> apply(std::span<const double> in) const {
        std::vector<double> out(kFeatureCount);
        apply(in, out);
        return out;
    }

    Dataset apply(const Dataset& d) const {
        Dataset out = d;
        for (auto& row : out.rows) {
            std::vector<double> t(kFeatureCount);
            apply(row.features, t);
            row.features = std::move(t);
        }
        return out;
    }

    const std::vector<double>& means() const { return mean_; }
    const std::vector<double>& stds() const { return std_; }

    bool fitted() const { return !mean_.empty(); }

private:
    std::vector<double> mean_;
    std::vector<double> std_;  // population sd; 0 marks a constant feature
};

// ---------------------------------------------------------------------------
// Fold assignment

struct FoldAssignment {
    int k = 0;
    std::vector<int> fold_of;  // per-row fold index in 0..k-1
    std::uint64_t seed = 0;

    std::vector<std::size_t> fold_rows(int fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            if (fold_of[i] == fold) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> complement_rows(int fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            if (fold_of[i] != fold) out.push_back(i);
        return out;
    }
};

/// Random partition into k folds whose sizes differ by at most one.
/// Deterministic in the seed.
inline FoldAssignment make_folds(std::size_t n, int k, std::uint64_t seed) {
    if (k < 2 || static_cast<std::size_t>(k) > n)
        throw std::invalid_argument("make_folds requires 2 <= k <= n");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    FoldAssignment fa;
    fa.k = k;
    fa.seed = seed;
    fa.fold_of.assign(n, 0);
    const std::size_t base = n / static_cast<std::size_t>(k);
    const std::size_t extra = n % static_cast<std::size_t>(k);  // first `extra` folds get one more
    std::size_t pos = 0;
    for (int f = 0; f < k; ++f) {
        const std::size_t size = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
        for (std::size_t j = 0; j < size; ++j) fa.fold_of[order[pos++]] = f;
    }
    return fa;
}

}  // namespace sovrate
