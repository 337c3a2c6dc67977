#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "audits.hpp"
#include "e2efs/baselines.hpp"

using namespace e2efs;

namespace {

Dataset two_class(const std::vector<std::vector<double>>& rows, const Labels& y) {
    Dataset d;
    d.class_count = 2;
    d.X = Matrix(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) d.X(i, j) = rows[i][j];
    d.y = y;
    return d;
}

} // namespace

TEST_CASE("FeatureRanking ordering") {
    const auto r = FeatureRanking::from_scores({0.5, 2.0, 0.5, -1.0});
    CHECK(r.order == std::vector<std::size_t>{1, 0, 2, 3});
    CHECK(r.top(2) == std::vector<std::size_t>{0, 1});
    CHECK_THROWS(FeatureRanking::from_scores({NAN}));
}

TEST_CASE("equal_frequency_bins matches the counting definition") {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> v(1 + rng() % 40);
        for (double& x : v) x = static_cast<double>(rng() % 7);   // many ties
        const std::size_t bins = 2 + rng() % 9;
        const auto got = equal_frequency_bins(v, bins);
        CHECK(got == oracle::count_below_bins(v, bins));
    }
}

TEST_CASE("MIM: independence and perfect dependence") {
    std::mt19937_64 rng(2);
    Dataset d;
    d.class_count = 2;
    const std::size_t n = 10000;
    d.X = Matrix(n, 2);
    d.y.resize(n);
    std::normal_distribution<double> norm(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        d.y[i] = static_cast<int>(i % 2);
        d.X(i, 0) = norm(rng);
        d.X(i, 1) = d.y[i];
    }
    const auto r = mim_rank(d);
    CHECK(std::fabs(r.scores[0]) <= 0.01);
    CHECK(std::fabs(r.scores[1] - std::log(2.0)) <= 0.01);
}

TEST_CASE("baseline oracles") {
    for (const auto& r : {audit::mim_oracle(200, 3), audit::fisher_oracle(200, 4), audit::relieff_oracle(100, 5)}) {
        INFO(r.detail);
        CHECK(r.ok);
    }
}

TEST_CASE("Fisher: hand values") {
    // class 0 at 0 +- 0.1, class 1 at 1 +- 0.1: between 0.25 per sample, within 0.01.
    const auto d = two_class({{-0.1, 3}, {0.1, 3}, {0.9, 3}, {1.1, 3}}, {0, 0, 1, 1});
    const auto r = fisher_rank(d);
    CHECK(r.scores[0] == doctest::Approx(25.0));
    CHECK(r.scores[1] == 0.0);

    // Constant within class but different across classes: max finite score x 10.
    const auto e = two_class({{-0.1, 5}, {0.1, 5}, {0.9, 7}, {1.1, 7}}, {0, 0, 1, 1});
    const auto re = fisher_rank(e);
    CHECK(re.scores[1] == doctest::Approx(250.0));
    CHECK(re.order[0] == 1);

    CHECK_THROWS(fisher_rank(two_class({{0}, {1}, {2}}, {0, 0, 1})));
}

TEST_CASE("ReliefF: constant feature and discriminative axis") {
    const auto d = two_class({{0, 0.3, 4}, {0.1, 0.9, 4}, {1, 0.2, 4}, {1.1, 0.8, 4}}, {0, 0, 1, 1});
    const auto r = relieff_rank(d, {1, 0, 0});
    CHECK(r.scores[2] == 0.0);
    CHECK(r.scores[0] > r.scores[1]);
    CHECK_THROWS(relieff_rank(d, {2, 0, 0}));   // classes of 2 cannot supply 2 neighbours
}

TEST_CASE("rankers are equivariant under column permutation") {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 20; ++t) {
        const Dataset d = audit::small_dataset(rng, 30, 7, 2, 11, false);
        std::vector<std::size_t> perm(7);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        const Dataset p = d.select_columns(perm);
        const FeatureRanking a[] = {mim_rank(d), fisher_rank(d), relieff_rank(d)};
        const FeatureRanking b[] = {mim_rank(p), fisher_rank(p), relieff_rank(p)};
        for (int m = 0; m < 3; ++m)
            for (std::size_t j = 0; j < 7; ++j)
                CHECK(b[m].scores[j] == doctest::Approx(a[m].scores[perm[j]]).epsilon(1e-12));
    }
}

TEST_CASE("Fisher affine invariance and MIM monotone invariance") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.5, 3.0);
    for (int t = 0; t < 20; ++t) {
        const Dataset d = audit::small_dataset(rng, 40, 5, 3, 4, false);
        Dataset affine = d, mono = d;
        for (std::size_t j = 0; j < 5; ++j) {
            const double a = (j % 2 ? -1.0 : 1.0) * u(rng), b = 10.0 * u(rng);
            for (std::size_t i = 0; i < 40; ++i) {
                affine.X(i, j) = a * d.X(i, j) + b;
                mono.X(i, j) = std::exp(d.X(i, j)) + std::pow(d.X(i, j), 3);
            }
        }
        const auto f0 = fisher_rank(d), f1 = fisher_rank(affine);
        const auto m0 = mim_rank(d), m1 = mim_rank(mono);
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(oracle::rel_error(f0.scores[j], f1.scores[j], 1e-12) <= 1e-9);
            CHECK(m0.scores[j] == m1.scores[j]);
        }
    }
}

TEST_CASE("rankers put informative features above the noise median") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto syn = make_synthetic({2000, 10, 90, 0.0, seed});
        const FeatureRanking ranks[] = {mim_rank(syn.data), fisher_rank(syn.data), relieff_rank(syn.data)};
        for (const auto& r : ranks) {
            std::vector<double> noise;
            for (std::size_t j = 0; j < 100; ++j)
                if (!std::binary_search(syn.informative.begin(), syn.informative.end(), j))
                    noise.push_back(r.scores[j]);
            std::nth_element(noise.begin(), noise.begin() + 45, noise.end());
            const double median = noise[45];
            for (auto j : syn.informative) CHECK(r.scores[j] > median);
        }
    }
}

TEST_CASE("random ranking is seeded") {
    const auto syn = make_synthetic({50, 2, 8, 0.0, 1});
    CHECK(random_rank(syn.data, 3).order == random_rank(syn.data, 3).order);
    CHECK(random_rank(syn.data, 3).order != random_rank(syn.data, 4).order);
}
