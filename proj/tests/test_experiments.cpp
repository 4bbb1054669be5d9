#include <doctest.h>

#include <cmath>
#include <json.hpp>

#include "support.hpp"
#include "treelearn/experiments.hpp"

using namespace treelearn;

namespace {

DimensionTree pair_tree10() {
    std::vector<Subset> s{{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, {0, 1, 2, 3}, {4, 5, 6, 7, 8, 9}, {4, 5, 6, 7}};
    for (std::size_t k = 0; k < 10; k += 2) s.push_back({k, k + 1});
    for (std::size_t k = 0; k < 10; ++k) s.push_back({k});
    return DimensionTree::from_subsets(10, s);
}

ExperimentSpec tiny_spec() {
    auto spec = default_spec(FunctionId::ii);
    spec.n_train = 200;
    spec.n_test = 100;
    spec.trials = 2;
    spec.seed = 5;
    spec.adapt.max_iterations = 3;
    spec.adapt.tree_trials = 5;
    return spec;
}

}  // namespace

TEST_CASE("function names, dimensions and degrees") {
    for (auto f : {FunctionId::i, FunctionId::ii, FunctionId::iii, FunctionId::iv, FunctionId::v})
        CHECK(parse_function(function_name(f)) == f);
    CHECK_THROWS(parse_function("vi"));
    CHECK(function_dimension(FunctionId::i) == 6);
    CHECK(function_dimension(FunctionId::iv) == 16);
    CHECK(function_degree(FunctionId::i) == 10);
    CHECK(function_degree(FunctionId::v) == 8);
    CHECK(default_spec(FunctionId::iii).adapt.degree == 10);
}

TEST_CASE("function values at the origin and at a corner") {
    const std::vector<double> z6(6, 0.0), z8(8, 0.0), z10(10, 0.0), z16(16, 0.0);
    CHECK(test_function(FunctionId::i, z6) == doctest::Approx(0.01).epsilon(1e-15));
    CHECK(test_function(FunctionId::ii, z10) == 5.0);
    CHECK(test_function(FunctionId::iii, z10) == doctest::Approx(std::log(26.0)).epsilon(1e-15));
    CHECK(test_function(FunctionId::iv, z16) == 15.0);
    const double h0 = 4.0 / 9.0;
    const double h1 = (2.0 + h0 * h0) * (2.0 + h0 * h0) / 9.0;
    const double h2 = (2.0 + h1 * h1) * (2.0 + h1 * h1) / 9.0;
    CHECK(test_function(FunctionId::v, z8) == doctest::Approx(h2).epsilon(1e-15));
    CHECK(h2 == doctest::Approx(0.581614).epsilon(1e-6));

    // All ones: g(1,1) = 4.
    const std::vector<double> o10(10, 1.0), o6(6, 1.0);
    CHECK(test_function(FunctionId::ii, o10) == 20.0);
    CHECK(test_function(FunctionId::i, o6) == doctest::Approx(1.0 / 196.0).epsilon(1e-15));
    CHECK_THROWS(test_function(FunctionId::ii, z6));
}

TEST_CASE("optimal tree predicates") {
    CHECK(*is_optimal_tree(FunctionId::ii, pair_tree10()));
    CHECK(*is_optimal_tree(FunctionId::iii, pair_tree10()));
    CHECK_FALSE(*is_optimal_tree(FunctionId::ii, DimensionTree::build(TreeKind::linear, 10)));
    CHECK(*is_optimal_tree(FunctionId::v, DimensionTree::build(TreeKind::balanced, 8)));
    CHECK_FALSE(*is_optimal_tree(FunctionId::v, DimensionTree::build(TreeKind::linear, 8)));
    CHECK_FALSE(is_optimal_tree(FunctionId::iv, DimensionTree::build(TreeKind::balanced, 16)).has_value());
    const auto t1 = DimensionTree::from_subsets(
        6, {{0, 1, 2, 3, 4, 5}, {0, 2, 3, 4}, {0, 2}, {3, 4}, {1, 5}, {0}, {1}, {2}, {3}, {4}, {5}});
    CHECK(*is_optimal_tree(FunctionId::i, t1));
    CHECK_FALSE(*is_optimal_tree(FunctionId::i, DimensionTree::build(TreeKind::balanced, 6)));
}

TEST_CASE("sampled data has the requested shape and noise level") {
    auto spec = default_spec(FunctionId::ii);
    spec.n_train = 500;
    spec.n_test = 20000;
    spec.noise = 0.1;
    auto rng = make_rng(9);
    const auto data = sample_data(spec, rng);
    CHECK(data.train.inputs.rows() == 500);
    CHECK(data.train.inputs.cols() == 10);
    CHECK(data.train.validation.size() == 100);
    CHECK(data.train.inputs.minCoeff() >= -1.0);
    CHECK(data.train.inputs.maxCoeff() <= 1.0);
    const Vector noise = data.test.y - data.test_clean;
    const double var = noise.squaredNorm() / static_cast<double>(noise.size());
    CHECK(var == doctest::Approx(0.01).epsilon(0.05));
    CHECK(std::abs(noise.mean()) < 0.005);
    CHECK((data.test_clean - test_function(FunctionId::ii, data.test.x)).norm() == 0.0);

    auto again = make_rng(9);
    const auto same = sample_data(spec, again);
    CHECK(same.train.outputs == data.train.outputs);
    CHECK(same.train.validation == data.train.validation);
}

TEST_CASE("spec JSON round trips") {
    auto spec = tiny_spec();
    spec.noise = 0.01;
    spec.tree = TreeKind::linear;
    spec.permute_leaves = false;
    spec.adapt.theta_star = 0.5;
    spec.adapt.als.max_sweeps = 7;
    const auto text = spec_json(spec);
    const auto back = parse_spec(text);
    CHECK(spec_json(back) == text);
    CHECK(back.function == FunctionId::ii);
    CHECK(back.noise == 0.01);
    CHECK(back.tree == TreeKind::linear);
    CHECK(back.adapt.als.max_sweeps == 7);

    // Omitted keys take the function defaults.
    const auto partial = parse_spec(R"({"function": "v", "trials": 3})");
    CHECK(partial.function == FunctionId::v);
    CHECK(partial.trials == 3);
    CHECK(partial.adapt.degree == 8);
    CHECK_THROWS(parse_spec(R"({"function": "v", "n_train": 1})"));
    CHECK_THROWS(parse_spec("not json"));
}

TEST_CASE("experiment reports are reproducible") {
    const auto spec = tiny_spec();
    const auto a = report_json(run_experiment(spec));
    const auto b = report_json(run_experiment(spec));
    CHECK(a == b);
    const auto doc = nlohmann::json::parse(a);
    CHECK(doc["format"] == "treelearn-report");
    CHECK(doc["trials"].size() == 2);
    CHECK(doc["trials"][0]["iterations"].size() <= 3);

    const auto single = run_trial(spec, 1);
    const auto doc_trial = doc["trials"][1];
    CHECK(doc_trial["final_tree"] == single.final_tree);
    CHECK(doc_trial["test_error"].get<double>() == single.test_error);
}
