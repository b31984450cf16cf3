#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "reference_data.hpp"
#include "sovrate/synth.hpp"
#include "sovrate/tune.hpp"

using namespace sovrate;

TEST_CASE("grid cell enumerations have the documented sizes") {
    CHECK(mlp_structure_cells().size() == 63);
    CHECK(mlp_estimation_cells().size() == 24);
    CHECK(cart_restriction_cells().size() == 925);
}

TEST_CASE("selection rules") {
    SECTION("single cell wins under either rule") {
        GridResult g;
        g.axis_names = {"a"};
        g.cells.push_back({{1.0}, 50.0, 1.0});
        CHECK(select_best(g, SelectionRule::max_accuracy()).axis_values == std::vector<double>{1.0});
        CHECK(select_best(g, SelectionRule::parsimony(0.5)).axis_values == std::vector<double>{1.0});
    }
    SECTION("parsimony trades accuracy for simplicity within delta") {
        const GridResult g = testutil::reference_structure_grid();
        const GridCell& best = g.best_by_accuracy();
        CHECK(best.axis_values == std::vector<double>{2, 256, 0.2});
        CHECK(best.mean_accuracy == Catch::Approx(70.0));
        const GridCell& chosen = select_best(g, SelectionRule::parsimony(0.5));
        CHECK(chosen.axis_values == std::vector<double>{1, 256, 0.1});
        CHECK(chosen.mean_accuracy == Catch::Approx(69.7));
    }
    SECTION("parsimony(0) agrees with max accuracy when the maximum is unique") {
        const GridResult g = testutil::reference_structure_grid();
        CHECK(select_best(g, SelectionRule::parsimony(0.0)).axis_values ==
              select_best(g, SelectionRule::max_accuracy()).axis_values);
    }
}

TEST_CASE("structure grid produces non-degenerate accuracies at desk scale") {
    const Dataset d = synthesize_dataset(100, 31, Scenario::Linear);
    const CvProtocol protocol{2, 1, 5, 2};
    const GridResult g = mlp_structure_grid(d, protocol, /*epochs=*/4, /*batch_size=*/16);
    REQUIRE(g.cells.size() == 63);
    bool varies = false;
    for (const auto& cell : g.cells) varies = varies || cell.mean_accuracy != g.cells[0].mean_accuracy;
    CHECK(varies);
}

TEST_CASE("estimation grid punishes few epochs with large batches") {
    const Dataset d = synthesize_dataset(150, 33, Scenario::Nonlinear);
    const CvProtocol protocol{2, 1, 9, 2};
    const GridResult g = mlp_estimation_grid(d, protocol, 1, 8, 0.1);
    REQUIRE(g.cells.size() == 24);
    double low_cell = 0.0, best = 0.0;
    for (const auto& cell : g.cells) {
        if (cell.axis_values == std::vector<double>{20, 32}) low_cell = cell.mean_accuracy;
        best = std::max(best, cell.mean_accuracy);
    }
    CHECK(low_cell < best);
}

TEST_CASE("cart restriction grid includes an exactly reproducible baseline") {
    const Dataset d = synthesize_dataset(120, 35, Scenario::Nonlinear);
    const CvProtocol protocol{3, 1, 4, 2};
    const GridResult g = cart_restriction_grid(d, protocol);
    REQUIRE(g.cells.size() == 925);

    const GridCell* baseline = nullptr;
    const GridCell* inactive = nullptr;  // restrictions present but not binding
    for (const auto& cell : g.cells) {
        if (cell.axis_values == std::vector<double>{-1, 2, 0}) baseline = &cell;
        if (cell.axis_values == std::vector<double>{20, 2, 0}) inactive = &cell;
    }
    REQUIRE(baseline != nullptr);
    REQUIRE(inactive != nullptr);
    // a depth cap of 20 never binds on 120 rows, so the cells coincide
    CHECK(inactive->mean_accuracy == baseline->mean_accuracy);
}

TEST_CASE("alpha sweep endpoints") {
    const Dataset d = synthesize_dataset(150, 37, Scenario::Nonlinear);
    const CvProtocol protocol{3, 2, 21, 2};
    const GridResult sweep = cart_alpha_sweep(d, {0.0, 1e9}, protocol);
    REQUIRE(sweep.cells.size() == 2);

    // alpha = 0 must equal the unrestricted baseline exactly
    const CvResult baseline = cross_validate(cart_model_spec(), d, protocol.k,
                                             protocol.replications, protocol.master_seed);
    double mean = 0.0;
    for (double a : baseline.per_rep_accuracy) mean += a;
    mean /= static_cast<double>(baseline.per_rep_accuracy.size());
    CHECK(sweep.cells[0].mean_accuracy == mean);

    // a huge alpha prunes to the root; with balanced synthetic classes the
    // root-only accuracy stays near 100/17 percent
    CHECK(sweep.cells[1].mean_accuracy < 15.0);
}

TEST_CASE("alpha sweep validates input") {
    const Dataset d = synthesize_dataset(60, 39, Scenario::Linear);
    const CvProtocol protocol{2, 1, 1, 1};
    CHECK_THROWS_AS(cart_alpha_sweep(d, {}, protocol), std::invalid_argument);
    CHECK_THROWS_AS(cart_alpha_sweep(d, {0.1, 0.2}, protocol), std::invalid_argument);
    CHECK_THROWS_AS(cart_alpha_sweep(d, {0.0, -0.1}, protocol), std::invalid_argument);
}

TEST_CASE("pruned predictions change only at the tree's breakpoints") {
    // grow one tree, find its weakest-link critical alphas independently,
    // and check the pruned tree is constant between them
    const Dataset d = synthesize_dataset(80, 41, Scenario::Nonlinear);
    const CartModel tree = grow_cart(d);

    // iterative weakest-link: repeatedly collapse the internal node with
    // the smallest (sse(node) - sum of leaf sses) / (leaves - 1)
    struct Sub {
        double sse = 0.0;
        int leaves = 0;
    };
    auto node_sse = [&](const CartNode& n) {
        double total = 0.0, sum = 0.0;
        for (std::size_t c = 0; c < n.counts.size(); ++c) {
            total += n.counts[c];
            sum += static_cast<double>(c + 1) * n.counts[c];
        }
        const double mean = sum / total;
        double sse = 0.0;
        for (std::size_t c = 0; c < n.counts.size(); ++c) {
            const double dv = static_cast<double>(c + 1) - mean;
            sse += n.counts[c] * dv * dv;
        }
        return sse;
    };
    std::vector<double> breakpoints;
    std::vector<bool> collapsed(tree.nodes().size(), false);
    auto subtree = [&](auto&& self, int i) -> Sub {
        const CartNode& n = tree.nodes()[static_cast<std::size_t>(i)];
        if (n.is_leaf() || collapsed[static_cast<std::size_t>(i)])
            return {node_sse(n), 1};
        const Sub l = self(self, n.left), r = self(self, n.right);
        return {l.sse + r.sse, l.leaves + r.leaves};
    };
    for (;;) {
        double best_g = std::numeric_limits<double>::infinity();
        int best_node = -1;
        for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
            if (tree.nodes()[i].is_leaf() || collapsed[i]) continue;
            const Sub s = subtree(subtree, static_cast<int>(i));
            if (s.leaves < 2) continue;
            const double g = (node_sse(tree.nodes()[i]) - s.sse) / (s.leaves - 1);
            if (g < best_g) {
                best_g = g;
                best_node = static_cast<int>(i);
            }
        }
        if (best_node < 0) break;
        // collapsing a node hides its descendants
        auto mark = [&](auto&& self, int i) -> void {
            collapsed[static_cast<std::size_t>(i)] = true;
            const CartNode& n = tree.nodes()[static_cast<std::size_t>(i)];
            if (!n.is_leaf()) {
                self(self, n.left);
                self(self, n.right);
            }
        };
        mark(mark, best_node);
        breakpoints.push_back(best_g);
    }
    REQUIRE(!breakpoints.empty());
    std::sort(breakpoints.begin(), breakpoints.end());

    // probe strictly inside each interval: the pruned tree cannot change
    double lo = 0.0;
    for (std::size_t b = 0; b <= breakpoints.size(); ++b) {
        const double hi =
            b < breakpoints.size() ? breakpoints[b] : breakpoints.back() * 2.0 + 1.0;
        if (hi <= lo + 1e-12) {
            lo = hi;
            continue;
        }
        const double p1 = lo + 0.25 * (hi - lo);
        const double p2 = lo + 0.75 * (hi - lo);
        CHECK(prune(tree, p1).dump() == prune(tree, p2).dump());
        lo = hi;
    }
}
