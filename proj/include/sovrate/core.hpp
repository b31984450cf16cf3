#pragma once

// Shared building blocks: error types, a small row-major matrix,
// deterministic seed derivation and locale-independent number formatting.

#include <cstdint>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sovrate {

/// Base class for failures caused by bad input data (files, symbols,
/// malformed rows). The CLI maps these to exit code 3.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnknownSymbolError : public DataError {
public:
    explicit UnknownSymbolError(const std::string& symbol)
        : DataError("unknown Moody's rating symbol: '" + symbol + "'") {}
};

class ParseError : public DataError {
public:
    ParseError(const std::string& what, long line)
        : DataError("parse error at line " + std::to_string(line) + ": " + what) {}
    explicit ParseError(const std::string& what) : DataError("parse error: " + what) {}
};

class MissingValueError : public DataError {
public:
    MissingValueError(const std::string& column, long line)
        : DataError("missing value in column '" + column + "' at line " + std::to_string(line)) {}
};

class IoError : public DataError {
public:
    explicit IoError(const std::string& what) : DataError("io error: " + what) {}
};

/// Dense row-major matrix of doubles. Rows are contiguous.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double value = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, value) {}

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// splitmix64 step; the standard 64-bit finalizer-style mixer.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic derivation of a child seed from (master, stream).
/// Fixed for the life of the file formats: adding streams never
/// perturbs the seeds of earlier ones.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ (stream + 0x9e3779b97f4a7c15ULL));
}

/// Shortest round-trip-safe decimal form of a double ("C" locale,
/// unaffected by the global locale).
inline std::string fmt_double(double v, int precision = 17) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    return buf;
}

inline std::string fmt_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

}  // namespace sovrate
