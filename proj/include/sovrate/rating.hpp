#pragma once

// Moody's rating categories and their numeric conversion. The 21 agency
// symbols collapse to 17 numeric classes: Aaa = 17 down to B3 = 2, with
// Caa1, Caa2, Caa3, Ca and C merged into a single bottom class
// "C_combined" = 1 because those grades are rare.

#include <array>
#include <string>
#include <string_view>
#include <utility>

#include "sovrate/core.hpp"

namespace sovrate {

inline constexpr int kNumClasses = 17;

inline constexpr std::array<std::pair<std::string_view, int>, 21> kRatingConversion = {{
    {"Aaa", 17}, {"Aa1", 16}, {"Aa2", 15}, {"Aa3", 14},
    {"A1", 13},  {"A2", 12},  {"A3", 11},
    {"Baa1", 10}, {"Baa2", 9}, {"Baa3", 8},
    {"Ba1", 7},  {"Ba2", 6},  {"Ba3", 5},
    {"B1", 4},   {"B2", 3},   {"B3", 2},
    {"Caa1", 1}, {"Caa2", 1}, {"Caa3", 1}, {"Ca", 1}, {"C", 1},
}};

/// A rating as given by the agency (symbol) together with its numeric
/// class in 1..17.
class Rating {
public:
    Rating() = default;
    Rating(std::string symbol, int numeric) : symbol_(std::move(symbol)), numeric_(numeric) {}

    const std::string& symbol() const { return symbol_; }
    int numeric() const { return numeric_; }

    friend bool operator==(const Rating&, const Rating&) = default;

private:
    std::string symbol_;
    int numeric_ = 0;
};

/// Case-exact lookup in the 21-entry conversion table.
inline Rating rating_from_symbol(std::string_view symbol) {
    for (const auto& [sym, num] : kRatingConversion) {
        if (sym == symbol) return Rating(std::string(symbol), num);
    }
    throw UnknownSymbolError(std::string(symbol));
}

/// Canonical symbol for a numeric class. Exact inverse of the table for
/// 2..17; class 1 canonicalizes to the merged label "C_combined".
inline std::string canonical_symbol(int numeric) {
    if (numeric < 1 || numeric > kNumClasses)
        throw std::invalid_argument("numeric rating out of range 1..17: " + std::to_string(numeric));
    if (numeric == 1) return "C_combined";
    for (const auto& [sym, num] : kRatingConversion) {
        if (num == numeric) return std::string(sym);
    }
    return {};  // unreachable
}

inline Rating rating_from_numeric(int numeric) {
    return Rating(canonical_symbol(numeric), numeric);
}

}  // namespace sovrate
