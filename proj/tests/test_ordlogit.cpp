#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "sovrate/ordlogit.hpp"
#include "sovrate/synth.hpp"

using namespace sovrate;

namespace {

OrderedLogitModel uniform_17_model() {
    OrderedLogitModel m;
    m.num_classes = 17;
    m.beta = {0.0};
    for (int j = 1; j < 17; ++j) m.thresholds.push_back(logit(j / 17.0));
    return m;
}

OrderedLogitModel random_model(std::mt19937_64& rng, std::size_t d, int m) {
    OrderedLogitModel model;
    model.num_classes = m;
    std::uniform_real_distribution<double> bd(-2, 2), gap(0.1, 1.0);
    for (std::size_t j = 0; j < d; ++j) model.beta.push_back(bd(rng));
    double tau = bd(rng);
    for (int j = 1; j < m; ++j) {
        model.thresholds.push_back(tau);
        tau += gap(rng);
    }
    return model;
}

}  // namespace

TEST_CASE("class probabilities telescope to a distribution") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> xd(-4, 4);
    for (int trial = 0; trial < 30; ++trial) {
        const auto model = random_model(rng, 3, 2 + static_cast<int>(rng() % 15));
        std::vector<double> x{xd(rng), xd(rng), xd(rng)};
        const auto p = class_probabilities(model, x);
        double sum = 0.0;
        for (double v : p) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("zero coefficients with quantile thresholds give uniform classes") {
    const auto model = uniform_17_model();
    const auto p = class_probabilities(model, std::vector<double>{0.0});
    for (double v : p) CHECK(v == Catch::Approx(1.0 / 17).margin(1e-12));
}

TEST_CASE("raising a positively weighted feature shifts mass upward") {
    OrderedLogitModel model;
    model.num_classes = 5;
    model.beta = {1.0};
    model.thresholds = {logit(0.2), logit(0.4), logit(0.6), logit(0.8)};
    double prev_mean = -1.0;
    std::vector<double> prev_cum;
    for (double x = -3.0; x <= 3.0; x += 0.25) {
        const auto p = class_probabilities(model, std::vector<double>{x});
        // first-order stochastic dominance implies a rising mean class
        double mean = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) mean += static_cast<double>(j + 1) * p[j];
        CHECK(mean > prev_mean);
        prev_mean = mean;
        // cumulative probabilities must all fall as x rises
        std::vector<double> cum(p.size());
        double acc = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) cum[j] = acc += p[j];
        if (!prev_cum.empty())
            for (std::size_t j = 0; j + 1 < cum.size(); ++j) CHECK(cum[j] <= prev_cum[j] + 1e-12);
        prev_cum = cum;
    }
}

TEST_CASE("log likelihood of the uniform model") {
    const auto model = uniform_17_model();
    const std::size_t n = 40;
    Matrix x(n, 1);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = 1 + static_cast<int>(i % 17);
    CHECK(log_likelihood(model, x, y) ==
          Catch::Approx(static_cast<double>(n) * std::log(1.0 / 17.0)).margin(1e-9));
}

TEST_CASE("log likelihood adds per duplicated row") {
    std::mt19937_64 rng(6);
    const auto model = random_model(rng, 2, 6);
    Matrix x1(1, 2);
    x1(0, 0) = 0.4;
    x1(0, 1) = -1.2;
    Matrix x3(3, 2);
    for (std::size_t i = 0; i < 3; ++i) {
        x3(i, 0) = i < 2 ? 0.4 : -0.3;
        x3(i, 1) = i < 2 ? -1.2 : 0.9;
    }
    Matrix x2(1, 2);
    x2(0, 0) = -0.3;
    x2(0, 1) = 0.9;
    const double single = log_likelihood(model, x1, {3});
    const double other = log_likelihood(model, x2, {5});
    CHECK(log_likelihood(model, x3, {3, 3, 5}) == Catch::Approx(2 * single + other).margin(1e-10));
}

TEST_CASE("analytic likelihood gradient matches finite differences") {
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> xd(-2, 2);
    for (int trial = 0; trial < 8; ++trial) {
        const std::size_t d = 1 + rng() % 3;
        const int m = 3 + static_cast<int>(rng() % 4);
        auto model = random_model(rng, d, m);
        const std::size_t n = 12;
        Matrix x(n, d);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) x(i, j) = xd(rng);
            y[i] = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(m));
        }
        const OrdLogitGradient g = log_likelihood_gradient(model, x, y);
        const double eps = 1e-6;
        for (std::size_t j = 0; j < d; ++j) {
            auto hi = model, lo = model;
            hi.beta[j] += eps;
            lo.beta[j] -= eps;
            const double fd = (log_likelihood(hi, x, y) - log_likelihood(lo, x, y)) / (2 * eps);
            CHECK(std::abs(g.beta[j] - fd) / std::max({std::abs(fd), std::abs(g.beta[j]), 1e-6}) <
                  1e-5);
        }
        for (std::size_t j = 0; j + 1 < static_cast<std::size_t>(m); ++j) {
            auto hi = model, lo = model;
            hi.thresholds[j] += eps;
            lo.thresholds[j] -= eps;
            const double fd = (log_likelihood(hi, x, y) - log_likelihood(lo, x, y)) / (2 * eps);
            CHECK(std::abs(g.tau[j] - fd) / std::max({std::abs(fd), std::abs(g.tau[j]), 1e-6}) < 1e-5);
        }
    }
}

TEST_CASE("fit recovers a known model") {
    const std::vector<double> beta{1.4, -0.8, 0.6};
    const auto sample = testutil::ordered_logit_sample(4000, beta, 5, 99);
    const auto [model, report] = fit_ordered_logit(sample.x, sample.y, 5);
    for (std::size_t j = 0; j < beta.size(); ++j)
        CHECK(model.beta[j] == Catch::Approx(beta[j]).epsilon(0.15));
    CHECK(report.log_lik > -std::numeric_limits<double>::infinity());
    CHECK(std::is_sorted(model.thresholds.begin(), model.thresholds.end()));
    for (const auto& row : report.coefficients) {
        CHECK(row.std_error > 0.0);
        CHECK(row.p_value >= 0.0);
        CHECK(row.p_value <= 1.0);
    }
    // strong true effects should be flagged as significant
    CHECK(report.coefficients[0].p_value < 0.01);
}

TEST_CASE("likelihood never decreases across iterations") {
    const auto sample = testutil::ordered_logit_sample(800, {0.9, -0.5}, 4, 7);
    const auto [model, report] = fit_ordered_logit(sample.x, sample.y, 4);
    REQUIRE(report.ll_history.size() > 1);
    for (std::size_t i = 1; i < report.ll_history.size(); ++i)
        CHECK(report.ll_history[i] >= report.ll_history[i - 1] - 1e-9);
}

TEST_CASE("row order does not matter") {
    const auto sample = testutil::ordered_logit_sample(500, {1.0, -0.7}, 4, 21);
    const auto [a, ra] = fit_ordered_logit(sample.x, sample.y, 4);

    std::vector<std::size_t> perm(sample.x.rows());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(2);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix xp(sample.x.rows(), sample.x.cols());
    std::vector<int> yp(sample.y.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        for (std::size_t j = 0; j < sample.x.cols(); ++j) xp(i, j) = sample.x(perm[i], j);
        yp[i] = sample.y[perm[i]];
    }
    const auto [b, rb] = fit_ordered_logit(xp, yp, 4);
    for (std::size_t j = 0; j < a.beta.size(); ++j)
        CHECK(a.beta[j] == Catch::Approx(b.beta[j]).margin(1e-8));
}

TEST_CASE("degenerate single-class data is rejected") {
    Matrix x(10, 1);
    for (std::size_t i = 0; i < 10; ++i) x(i, 0) = static_cast<double>(i);
    CHECK_THROWS_AS(fit_ordered_logit(x, std::vector<int>(10, 3), 5), std::invalid_argument);
}

TEST_CASE("prediction saturates far from the thresholds") {
    OrderedLogitModel model;
    model.num_classes = 17;
    model.beta = {1.0};
    for (int j = 1; j < 17; ++j) model.thresholds.push_back(static_cast<double>(j - 8));
    CHECK(predict(model, std::vector<double>{100.0}) == 17);
    CHECK(predict(model, std::vector<double>{-100.0}) == 1);
    // the near-uniform model predicts its modal interval (uniformity is
    // only exact up to CDF rounding, so the tie rule rarely engages)
    const auto u = uniform_17_model();
    const auto p = class_probabilities(u, std::vector<double>{0.0});
    const int modal = predict(u, std::vector<double>{0.0});
    for (double v : p)
        CHECK(p[static_cast<std::size_t>(modal - 1)] >= v);
}

TEST_CASE("fitted signs on the linear scenario match the expected directions") {
    const Dataset d = synthesize_dataset(1500, 5, Scenario::Linear);
    const auto [model, report] = fit_ordered_logit(d);
    int rq = -1, unemp = -1;
    for (std::size_t j = 0; j < model.included.size(); ++j) {
        if (kFeatureSchema[static_cast<std::size_t>(model.included[j])].name == "regulatory_quality")
            rq = static_cast<int>(j);
        if (kFeatureSchema[static_cast<std::size_t>(model.included[j])].name == "unemployment")
            unemp = static_cast<int>(j);
    }
    REQUIRE(rq >= 0);
    REQUIRE(unemp >= 0);
    CHECK(model.beta[static_cast<std::size_t>(rq)] > 0.0);
    CHECK(model.beta[static_cast<std::size_t>(unemp)] < 0.0);
    CHECK(report.coefficients[static_cast<std::size_t>(rq)].name == "regulatory_quality");
}

TEST_CASE("monotone response to a positive coefficient") {
    const auto sample = testutil::ordered_logit_sample(600, {1.2, 0.4}, 5, 31);
    const auto [model, report] = fit_ordered_logit(sample.x, sample.y, 5);
    REQUIRE(model.beta[0] > 0.0);
    int prev = 1;
    for (double x0 = -4.0; x0 <= 4.0; x0 += 0.1) {
        const int cls = predict(model, std::vector<double>{x0, 0.3});
        CHECK(cls >= prev);
        prev = cls;
    }
}
