#pragma once

// The fixed nine-feature schema of the country-year panel. Feature order
// is shared by every model, explanation and file format in the project.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sovrate {

inline constexpr int kFeatureCount = 9;

struct FeatureInfo {
    std::string_view name;
    std::string_view unit;
    int expected_sign;  // +1 or -1, the sign economic theory expects
};

inline constexpr std::array<FeatureInfo, kFeatureCount> kFeatureSchema = {{
    {"gdp_growth", "%", +1},
    {"inflation", "%", -1},
    {"unemployment", "%", -1},
    {"current_account", "% of GDP", +1},
    {"gov_balance", "% of GDP", +1},
    {"gov_debt", "% of GDP", -1},
    {"political_stability", "index", +1},
    {"regulatory_quality", "index", +1},
    {"gdp_per_capita", "1000$", +1},
}};

inline int feature_index(std::string_view name) {
    for (int i = 0; i < kFeatureCount; ++i) {
        if (kFeatureSchema[i].name == name) return i;
    }
    throw std::invalid_argument("unknown feature name: " + std::string(name));
}

/// FNV-1a hash over the ordered feature names; stored in model files so a
/// loaded model can detect a schema mismatch.
inline std::uint64_t schema_hash() {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& f : kFeatureSchema) {
        for (char c : f.name) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        h ^= static_cast<unsigned char>(',');
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace sovrate
