#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "cart_oracles.hpp"
#include "helpers.hpp"
#include "sovrate/cart.hpp"

using namespace sovrate;
using testutil::SmallData;

TEST_CASE("gini impurity") {
    CHECK(gini_impurity(std::vector<int>{5, 0, 0}) == 0.0);
    CHECK(gini_impurity(std::vector<int>{3, 3}) == Catch::Approx(0.5).margin(1e-15));
    CHECK(gini_impurity(std::vector<int>{2, 1, 1}) == Catch::Approx(0.625).margin(1e-15));
    CHECK_THROWS_AS(gini_impurity(std::vector<int>{0, 0}), std::invalid_argument);
}

TEST_CASE("split gini is the size-weighted branch average") {
    CHECK(split_gini(std::vector<int>{4, 0}, std::vector<int>{0, 6}) == 0.0);
    // identical branch distributions collapse to the single-node value
    const std::vector<int> d{2, 2, 4};
    CHECK(split_gini(d, d) == Catch::Approx(gini_impurity(d)).margin(1e-15));
    CHECK(split_gini(std::vector<int>{4, 0}, std::vector<int>{1, 3}) ==
          Catch::Approx(0.1875).margin(1e-15));
    CHECK_THROWS_AS(split_gini(std::vector<int>{0, 0}, std::vector<int>{1, 0}),
                    std::invalid_argument);
}

TEST_CASE("gini stays in [0, 1 - 1/m]") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const int m = 2 + static_cast<int>(rng() % 16);
        std::vector<int> counts(static_cast<std::size_t>(m));
        bool any = false;
        for (int& c : counts) {
            c = static_cast<int>(rng() % 7);
            any = any || c > 0;
        }
        if (!any) counts[0] = 1;
        const double g = gini_impurity(counts);
        CHECK(g >= 0.0);
        CHECK(g <= 1.0 - 1.0 / static_cast<double>(m) + 1e-12);
    }
}

TEST_CASE("best_split agrees with the exhaustive oracle") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 40; ++trial) {
        const SmallData d = testutil::random_small_dataset(rng);
        std::vector<std::size_t> rows(d.x.rows());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        const auto ours = best_split(d.x, d.y, d.classes);
        const auto oracle = testutil::oracle_best_split(d.x, d.y, rows, d.classes);
        REQUIRE(ours.has_value() == oracle.has_value());
        if (ours) {
            CHECK(ours->feature == oracle->feature);
            CHECK(ours->threshold == Catch::Approx(oracle->threshold).margin(1e-12));
            CHECK(ours->decrease == Catch::Approx(oracle->decrease).margin(1e-12));
        }
    }
}

TEST_CASE("grown trees match the oracle at every node") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 15; ++trial) {
        const SmallData d = testutil::random_small_dataset(rng);
        const CartModel model = grow_cart(d.x, d.y, d.classes);
        CHECK(testutil::tree_matches_split_oracle(model, d.x, d.y, d.classes));
    }
}

TEST_CASE("best_split edge behaviour") {
    SECTION("pure nodes do not split") {
        Matrix x(4, 1);
        for (std::size_t i = 0; i < 4; ++i) x(i, 0) = static_cast<double>(i);
        CHECK_FALSE(best_split(x, std::vector<int>{2, 2, 2, 2}, 4).has_value());
    }
    SECTION("duplicated features tie toward index 0") {
        Matrix x(4, 2);
        for (std::size_t i = 0; i < 4; ++i) x(i, 0) = x(i, 1) = static_cast<double>(i);
        const auto split = best_split(x, std::vector<int>{1, 1, 2, 2}, 2);
        REQUIRE(split.has_value());
        CHECK(split->feature == 0);
    }
    SECTION("min_samples_split blocks small nodes") {
        Matrix x(3, 1);
        x(0, 0) = 0; x(1, 0) = 1; x(2, 0) = 2;
        CartConfig cfg;
        cfg.min_samples_split = 4;
        CHECK_FALSE(best_split(x, std::vector<int>{1, 2, 1}, 2, cfg).has_value());
    }
}

TEST_CASE("growth") {
    SECTION("a single separating threshold gives a depth-1 tree") {
        Matrix x(6, 2);
        const std::vector<int> y{1, 1, 1, 3, 3, 3};
        for (std::size_t i = 0; i < 6; ++i) {
            x(i, 0) = i < 3 ? -1.0 + static_cast<double>(i) * 0.1 : 5.0 + static_cast<double>(i);
            x(i, 1) = static_cast<double>(i % 2);
        }
        const CartModel model = grow_cart(x, y, 3);
        CHECK(model.depth() == 1);
        for (std::size_t i = 0; i < 6; ++i) CHECK(model.predict(x.row(i)) == y[i]);
    }
    SECTION("distinct feature vectors reach 100% training accuracy") {
        std::mt19937_64 rng(8);
        const SmallData d = testutil::random_small_dataset(rng, 5, 40);
        const CartModel model = grow_cart(d.x, d.y, d.classes);
        int correct = 0;
        for (std::size_t i = 0; i < d.x.rows(); ++i)
            correct += model.predict(d.x.row(i)) == d.y[i];
        CHECK(correct == static_cast<int>(d.x.rows()));  // draws have distinct values a.s.
    }
    SECTION("max_depth 0 gives a single majority leaf") {
        Matrix x(5, 1);
        for (std::size_t i = 0; i < 5; ++i) x(i, 0) = static_cast<double>(i);
        CartConfig cfg;
        cfg.max_depth = 0;
        const CartModel model = grow_cart(x, std::vector<int>{1, 2, 2, 2, 3}, 3, cfg);
        CHECK(model.nodes().size() == 1);
        CHECK(model.leaf_count() == 1);
        for (std::size_t i = 0; i < 5; ++i) CHECK(model.predict(x.row(i)) == 2);
    }
    SECTION("empty training set is rejected") {
        CHECK_THROWS_AS(grow_cart(Matrix{}, std::vector<int>{}, 2), std::invalid_argument);
    }
}

TEST_CASE("prediction routing") {
    // one split at threshold 1.5: left leaf predicts 1, right predicts 2
    Matrix x(4, 1);
    x(0, 0) = 1.0; x(1, 0) = 1.0; x(2, 0) = 2.0; x(3, 0) = 2.0;
    const CartModel model = grow_cart(x, std::vector<int>{1, 1, 2, 2}, 2);
    REQUIRE(model.depth() == 1);
    const double threshold = model.root().threshold;
    CHECK(model.predict(std::vector<double>{threshold}) == 1);  // boundary goes left
    CHECK(model.predict(std::vector<double>{threshold + 1e-9}) == 2);
}

TEST_CASE("leaf ties break toward the lower class") {
    CHECK(CartModel::majority_class(std::vector<int>{0, 3, 0, 3}) == 2);
    CHECK(CartModel::majority_class(std::vector<int>{1, 0, 0, 1}) == 1);
}

TEST_CASE("pruning") {
    std::mt19937_64 rng(31);
    SECTION("alpha 0 is the identity, node for node") {
        for (int trial = 0; trial < 20; ++trial) {
            const SmallData d = testutil::random_small_dataset(rng);
            const CartModel model = grow_cart(d.x, d.y, d.classes);
            const CartModel pruned = prune(model, 0.0);
            CHECK(pruned.dump() == model.dump());
        }
    }
    SECTION("huge alpha collapses to the root") {
        const SmallData d = testutil::random_small_dataset(rng);
        const CartModel model = grow_cart(d.x, d.y, d.classes);
        const CartModel pruned = prune(model, 1e9);
        CHECK(pruned.nodes().size() == 1);
        CHECK(pruned.leaf_count() == 1);
    }
    SECTION("matches brute-force enumeration on small trees") {
        int tested = 0;
        while (tested < 15) {
            const SmallData d = testutil::random_small_dataset(rng, 5, 14, 2, 3);
            const CartModel model = grow_cart(d.x, d.y, d.classes);
            if (model.nodes().size() > 15) continue;
            ++tested;
            for (double alpha : {0.0, 0.05, 0.2, 0.7, 1.5, 4.0, 1e9}) {
                const auto best = testutil::oracle_best_pruned(model, d.x, d.y, alpha);
                CHECK(testutil::flat_dump(prune(model, alpha)) == best.dump);
            }
        }
    }
}

TEST_CASE("dump and parse round-trip") {
    std::mt19937_64 rng(53);
    const SmallData d = testutil::random_small_dataset(rng, 5, 30);
    const CartModel model = grow_cart(d.x, d.y, d.classes);
    std::istringstream in(model.dump());
    const CartModel back = CartModel::parse(in);
    CHECK(back.dump() == model.dump());
    for (std::size_t i = 0; i < d.x.rows(); ++i)
        CHECK(back.predict(d.x.row(i)) == model.predict(d.x.row(i)));
}
