#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"

#include "burnscan/errors.hpp"
#include "burnscan/features.hpp"
#include "burnscan/forest.hpp"

using namespace burnscan;

namespace {

/// f0 carries the label (if informative), f1..f4 are noise.
TrainingData make_data(std::size_t n, bool informative, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    TrainingData d;
    d.features = {"f0", "f1", "f2", "f3", "f4"};
    d.n_rows = n;
    for (std::size_t r = 0; r < n; ++r) {
        const std::uint8_t y = rng() % 2;
        d.y.push_back(y);
        d.x.push_back(informative ? (y ? 3.0 : -3.0) + 0.3 * nd(rng) : nd(rng));
        for (int j = 1; j < 5; ++j) d.x.push_back(nd(rng));
    }
    return d;
}

int walk(const Tree& tree, std::span<const double> row, const std::vector<double>& medians) {
    std::size_t i = 0;
    while (tree.nodes[i].feature >= 0) {
        const auto f = static_cast<std::size_t>(tree.nodes[i].feature);
        const double v = std::isnan(row[f]) ? medians[f] : row[f];
        i = static_cast<std::size_t>(v <= tree.nodes[i].threshold ? tree.nodes[i].left : tree.nodes[i].right);
    }
    return tree.nodes[i].p_burn > 0.5 ? 1 : 0;
}

ForestParams small(std::size_t trees = 60) {
    ForestParams p;
    p.n_trees = trees;
    p.min_leaf = 2;
    p.seed = 42;
    p.n_threads = 1;
    return p;
}

}  // namespace

TEST_CASE("forest separates an informative feature") {
    const auto model = train_forest(make_data(400, true, 1), small());
    REQUIRE(model.oob_accuracy);
    CHECK(*model.oob_accuracy >= 0.99);
    CHECK(model.ranked_features().front() == "f0");
    double total = 0.0;
    for (double v : model.importance()) total += v;
    CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("forest on permuted labels scores near chance") {
    const auto model = train_forest(make_data(600, false, 2), small(100));
    REQUIRE(model.oob_accuracy);
    CHECK(*model.oob_accuracy >= 0.4);
    CHECK(*model.oob_accuracy <= 0.6);
}

TEST_CASE("forest training is deterministic across thread counts") {
    const auto data = make_data(300, true, 3);
    auto p = small(40);
    const auto a = train_forest(data, p);
    p.n_threads = 3;
    const auto b = train_forest(data, p);
    CHECK(a.importance() == b.importance());
    REQUIRE(a.trees().size() == b.trees().size());
    for (std::size_t t = 0; t < a.trees().size(); ++t) CHECK(a.trees()[t].nodes.size() == b.trees()[t].nodes.size());
    p.seed = 43;
    CHECK(train_forest(data, p).importance() != a.importance());
}

TEST_CASE("votes and scores match a tree walk") {
    auto data = make_data(300, true, 4);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t r = 0; r < data.n_rows; r += 7) data.x[r * 5 + (r % 5)] = nan;
    const auto model = train_forest(data, small(30));
    CHECK(model.medians() == column_medians(data));
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd(0.0, 2.0);
    for (int k = 0; k < 200; ++k) {
        std::vector<double> row(5);
        for (auto& v : row) v = nd(rng);
        if (k % 3 == 0) row[static_cast<std::size_t>(k % 5)] = nan;
        int votes = 0;
        for (std::size_t t = 0; t < model.n_trees(); ++t) {
            const int v = walk(model.trees()[t], row, model.medians());
            CHECK(model.tree_vote(t, row) == v);
            votes += v;
        }
        CHECK(model.predict_score(row) == doctest::Approx(static_cast<double>(votes) / model.n_trees()));
    }
}

TEST_CASE("column medians") {
    TrainingData d;
    d.features = {"a", "b"};
    d.n_rows = 4;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    d.x = {1, nan, 5, nan, 2, nan, 100, nan};
    d.y = {0, 1, 0, 1};
    const auto m = column_medians(d);
    CHECK(m[0] == 3.5);
    CHECK(m[1] == 0.0);
}

TEST_CASE("model save and load round trip") {
    fixtures::TempDir dir("forest");
    const auto model = train_forest(make_data(200, true, 6), small(20));
    model.save(dir.path() / "model.txt");
    const auto back = ForestModel::load(dir.path() / "model.txt");
    CHECK(back.features() == model.features());
    CHECK(back.importance() == model.importance());
    CHECK(back.medians() == model.medians());
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd(0.0, 2.0);
    for (int k = 0; k < 100; ++k) {
        std::vector<double> row(5);
        for (auto& v : row) v = nd(rng);
        CHECK(back.predict_score(row) == model.predict_score(row));
    }
    model.write_importance_csv(dir.path() / "importance.csv");
    CHECK(fixtures::read_file(dir.path() / "importance.csv").rfind("feature,gini_importance\n", 0) == 0);

    std::ofstream(dir.path() / "bad.txt") << "not a model\n";
    CHECK_THROWS_AS(ForestModel::load(dir.path() / "bad.txt"), FormatError);
}

TEST_CASE("forest error paths") {
    auto d = make_data(50, true, 9);
    std::fill(d.y.begin(), d.y.end(), std::uint8_t{0});
    CHECK_THROWS_AS(train_forest(d, small(5)), DegenerateModelError);

    const auto model = train_forest(make_data(100, true, 10), small(5));
    FeatureTable table({"f0", "f1", "f2"}, {"p"});
    const std::vector<double> v{1, 2, 3};
    table.add_row({}, v);
    try {
        (void)model.predict_table(table);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("f3") != std::string::npos);
    }

    FeatureTable full({"f4", "f3", "f2", "f1", "f0"}, {"p"});
    const std::vector<double> rev{0.1, 0.2, 0.3, 0.4, 3.0};
    full.add_row({}, rev);
    const std::vector<double> ordered{3.0, 0.4, 0.3, 0.2, 0.1};
    CHECK(model.predict_table(full).at(0) == model.predict_score(ordered));
}
