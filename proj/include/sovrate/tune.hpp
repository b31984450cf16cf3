#pragma once

// Grid searches over model hyperparameters. Every cell of a grid is
// evaluated with the same protocol and master seed, so the fold splits
// are paired across cells and cell differences are not fold noise.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sovrate/evaluate.hpp"

namespace sovrate {

struct CvProtocol {
    int k = 10;
    int replications = 5;
    std::uint64_t master_seed = 1;
    int jobs = 1;
};

struct GridCell {
    std::vector<double> axis_values;  // aligned with GridResult::axis_names
    double mean_accuracy = 0.0;       // mean exact % across replications
    double std_accuracy = 0.0;        // sample std across replications
};

struct GridResult {
    std::vector<std::string> axis_names;
    std::vector<GridCell> cells;

    const GridCell& best_by_accuracy() const {
        if (cells.empty()) throw std::invalid_argument("empty grid result");
        const GridCell* best = &cells.front();
        for (const auto& c : cells)
            if (c.mean_accuracy > best->mean_accuracy) best = &c;
        return *best;
    }
};

struct SelectionRule {
    enum Kind { MaxAccuracy, Parsimony } kind = MaxAccuracy;
    double delta = 0.5;  // accuracy points a simpler cell may give up

    static SelectionRule max_accuracy() { return {MaxAccuracy, 0.0}; }
    static SelectionRule parsimony(double delta) { return {Parsimony, delta}; }
};

/// MaxAccuracy picks the cell with the top mean (complexity breaks
/// ties); Parsimony(delta) picks the least complex cell whose mean is
/// within delta of the best. Complexity compares the axis values
/// lexicographically in their declared order, smaller = simpler.
inline const GridCell& select_best(const GridResult& result, SelectionRule rule) {
    if (result.cells.empty()) throw std::invalid_argument("empty grid result");
    const double best_mean = result.best_by_accuracy().mean_accuracy;
    const double threshold =
        rule.kind == SelectionRule::MaxAccuracy ? best_mean : best_mean - rule.delta;
    const GridCell* chosen = nullptr;
    for (const auto& c : result.cells) {
        if (c.mean_accuracy < threshold) continue;
        if (!chosen || c.axis_values < chosen->axis_values) chosen = &c;
    }
    return *chosen;
}

// ---------------------------------------------------------------------------
// Cell enumerations (pure; the runners evaluate exactly these).

inline const std::vector<int>& mlp_grid_layers() {
    static const std::vector<int> v{1, 2, 3};
    return v;
}
inline const std::vector<int>& mlp_grid_neurons() {
    static const std::vector<int> v{8, 16, 32, 64, 128, 256, 512};
    return v;
}
inline const std::vector<double>& mlp_grid_dropouts() {
    static const std::vector<double> v{0.0, 0.1, 0.2};
    return v;
}
inline const std::vector<int>& mlp_grid_epochs() {
    static const std::vector<int> v{20, 50, 100, 200, 400, 800};
    return v;
}
inline const std::vector<int>& mlp_grid_batches() {
    static const std::vector<int> v{4, 8, 16, 32};
    return v;
}

/// (layers, neurons, dropout): 3 x 7 x 3 = 63 cells.
inline std::vector<std::vector<double>> mlp_structure_cells() {
    std::vector<std::vector<double>> cells;
    for (int l : mlp_grid_layers())
        for (int n : mlp_grid_neurons())
            for (double d : mlp_grid_dropouts())
                cells.push_back({static_cast<double>(l), static_cast<double>(n), d});
    return cells;
}

/// (epochs, batch): 6 x 4 = 24 cells.
inline std::vector<std::vector<double>> mlp_estimation_cells() {
    std::vector<std::vector<double>> cells;
    for (int e : mlp_grid_epochs())
        for (int b : mlp_grid_batches())
            cells.push_back({static_cast<double>(e), static_cast<double>(b)});
    return cells;
}

/// (max_depth, min_samples_split, min_impurity_decrease):
/// 11 x 4 x 21 = 924 restricted cells plus the unrestricted baseline,
/// encoded as max_depth = -1.
inline std::vector<std::vector<double>> cart_restriction_cells() {
    std::vector<std::vector<double>> cells;
    cells.push_back({-1.0, 2.0, 0.0});  // baseline
    for (int depth = 10; depth <= 20; ++depth)
        for (int mss = 2; mss <= 5; ++mss)
            for (int step = 0; step <= 20; ++step)
                cells.push_back({static_cast<double>(depth), static_cast<double>(mss),
                                 static_cast<double>(step) * 0.00001});
    return cells;
}

namespace detail {

inline void accuracy_moments(const CvResult& cv, GridCell& cell) {
    const auto r = static_cast<double>(cv.per_rep_accuracy.size());
    double mean = 0.0;
    for (double a : cv.per_rep_accuracy) mean += a;
    mean /= r;
    double ss = 0.0;
    for (double a : cv.per_rep_accuracy) ss += (a - mean) * (a - mean);
    cell.mean_accuracy = mean;
    cell.std_accuracy = r > 1 ? std::sqrt(ss / (r - 1.0)) : 0.0;
}

}  // namespace detail

/// Structure search: hidden layers x neurons x dropout, estimated with a
/// fixed batch size and epoch count (defaults follow the selected
/// estimation setup; override only to scale tests down).
inline GridResult mlp_structure_grid(const Dataset& data, const CvProtocol& protocol,
                                     int epochs = 400, int batch_size = 8) {
    GridResult result;
    result.axis_names = {"hidden_layers", "neurons", "dropout"};
    for (const auto& axis : mlp_structure_cells()) {
        MlpConfig cfg;
        cfg.hidden_layers = static_cast<int>(axis[0]);
        cfg.neurons = static_cast<int>(axis[1]);
        cfg.dropout = axis[2];
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        GridCell cell;
        cell.axis_values = axis;
        detail::accuracy_moments(cross_validate(mlp_model_spec(cfg), data, protocol.k,
                                                protocol.replications, protocol.master_seed,
                                                protocol.jobs),
                                 cell);
        result.cells.push_back(std::move(cell));
    }
    return result;
}

/// Estimation search: epochs x batch size at a fixed structure.
inline GridResult mlp_estimation_grid(const Dataset& data, const CvProtocol& protocol,
                                      int hidden_layers = 1, int neurons = 256,
                                      double dropout = 0.1) {
    GridResult result;
    result.axis_names = {"epochs", "batch_size"};
    for (const auto& axis : mlp_estimation_cells()) {
        MlpConfig cfg;
        cfg.hidden_layers = hidden_layers;
        cfg.neurons = neurons;
        cfg.dropout = dropout;
        cfg.epochs = static_cast<int>(axis[0]);
        cfg.batch_size = static_cast<int>(axis[1]);
        GridCell cell;
        cell.axis_values = axis;
        detail::accuracy_moments(cross_validate(mlp_model_spec(cfg), data, protocol.k,
                                                protocol.replications, protocol.master_seed,
                                                protocol.jobs),
                                 cell);
        result.cells.push_back(std::move(cell));
    }
    return result;
}

/// Growth-restriction search over max depth, minimum samples for a split
/// and minimum impurity decrease, plus the unrestricted baseline.
inline GridResult cart_restriction_grid(const Dataset& data, const CvProtocol& protocol) {
    GridResult result;
    result.axis_names = {"max_depth", "min_samples_split", "min_impurity_decrease"};
    for (const auto& axis : cart_restriction_cells()) {
        CartConfig cfg;
        cfg.max_depth = static_cast<int>(axis[0]);
        cfg.min_samples_split = static_cast<int>(axis[1]);
        cfg.min_impurity_decrease = axis[2];
        GridCell cell;
        cell.axis_values = axis;
        detail::accuracy_moments(cross_validate(cart_model_spec(cfg), data, protocol.k,
                                                protocol.replications, protocol.master_seed,
                                                protocol.jobs),
                                 cell);
        result.cells.push_back(std::move(cell));
    }
    return result;
}

/// Cross-validated accuracy per pruning strength. Each fold's tree is
/// grown once and pruned at every alpha.
inline GridResult cart_alpha_sweep(const Dataset& data, const std::vector<double>& alphas,
                                   const CvProtocol& protocol) {
    if (alphas.empty()) throw std::invalid_argument("alpha sweep needs at least one alpha");
    bool has_zero = false;
    for (double a : alphas) {
        if (a < 0.0) throw std::invalid_argument("alphas must be >= 0");
        if (a == 0.0) has_zero = true;
    }
    if (!has_zero) throw std::invalid_argument("alpha sweep must include 0");

    const std::size_t n = data.size();
    const std::vector<int> actual = labels(data);
    const int k = protocol.k;
    if (k < 2) throw std::invalid_argument("k must be >= 2");

    // predicted[alpha][rep][row]
    std::vector<std::vector<std::vector<int>>> predicted(
        alphas.size(), std::vector<std::vector<int>>(
                           static_cast<std::size_t>(protocol.replications), std::vector<int>(n, 0)));

    std::vector<FoldAssignment> folds;
    for (int r = 0; r < protocol.replications; ++r)
        folds.push_back(make_folds(n, k, mix_seed(protocol.master_seed, static_cast<std::uint64_t>(r))));

    detail::parallel_for(
        static_cast<std::size_t>(protocol.replications) * static_cast<std::size_t>(k), protocol.jobs,
        [&](std::size_t job) {
            const auto r = job / static_cast<std::size_t>(k);
            const int f = static_cast<int>(job % static_cast<std::size_t>(k));
            const auto& fa = folds[r];
            const Dataset train = subset(data, fa.complement_rows(f));
            const CartModel grown = grow_cart(train);
            const auto test_rows = fa.fold_rows(f);
            for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
                const CartModel pruned = alphas[ai] == 0.0 ? grown : prune(grown, alphas[ai]);
                for (std::size_t i : test_rows)
                    predicted[ai][r][i] = pruned.predict(data.rows[i].features);
            }
        });

    GridResult result;
    result.axis_names = {"ccp_alpha"};
    for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
        CvResult cv;
        for (int r = 0; r < protocol.replications; ++r) {
            const NotchTable t = notch_table(predicted[ai][static_cast<std::size_t>(r)], actual);
            cv.per_rep.push_back(t);
            cv.per_rep_accuracy.push_back(t.exact);
        }
        GridCell cell;
        cell.axis_values = {alphas[ai]};
        detail::accuracy_moments(cv, cell);
        result.cells.push_back(std::move(cell));
    }
    return result;
}

}  // namespace sovrate
