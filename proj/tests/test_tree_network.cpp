#include <doctest.h>

#include "format_checks.hpp"
#include "support.hpp"
#include "treelearn/kernels.hpp"
#include "treelearn/tree_network.hpp"

using namespace treelearn;

namespace {

struct Fixture {
    Rng rng = make_rng(21);
    DimensionTree tree;
    std::vector<FeatureBasis> bases;
    TreeTensorNetwork net;

    explicit Fixture(std::size_t d = 5, std::uint64_t stream = 0) {
        rng = make_rng(21, stream);
        tree = testing::random_binary_tree(d, rng);
        bases = testing::random_bases(d, 3, rng);
        net = TreeTensorNetwork::random(tree, bases, testing::random_admissible_ranks(tree, bases, 3, rng), rng);
    }
};

// Value at x from the full coefficient tensor and the feature vectors.
double from_full(const FullTensor& c, const std::vector<FeatureBasis>& bases, const Vector& x) {
    double s = 0.0;
    std::vector<std::vector<double>> phi;
    for (std::size_t k = 0; k < bases.size(); ++k) phi.push_back(basis_eval(bases[k], x[static_cast<Eigen::Index>(k)], bases[k].degree));
    const auto& shape = c.shape();
    for (std::size_t f = 0; f < c.size(); ++f) {
        double w = c[f];
        std::size_t rest = f;
        for (std::size_t k = shape.size(); k-- > 0;) {
            w *= phi[k][rest % shape[k]];
            rest /= shape[k];
        }
        s += w;
    }
    return s;
}

}  // namespace

TEST_CASE("batched, pointwise and full-tensor evaluation agree") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        Fixture f(5, s);
        const Matrix xs = testing::uniform_points(300, 5, f.rng);
        const Vector batch = evaluate(f.net, xs);
        const Vector point = kernels::evaluate_pointwise(f.net, xs, kernels::Exec::serial);
        CHECK(testing::relative_gap(point, batch) < 1e-12);
        const auto full = assemble_full(f.net);
        for (Eigen::Index i = 0; i < 10; ++i)
            CHECK(from_full(full, f.bases, xs.row(i).transpose()) == doctest::Approx(batch[i]).epsilon(1e-10));
    }
}

TEST_CASE("serial and parallel kernels are bitwise identical") {
    Fixture f(6, 3);
    const Matrix xs = testing::uniform_points(1000, 6, f.rng);
    const Vector a = kernels::evaluate_batch(f.net, xs, kernels::Exec::serial);
    const Vector b = kernels::evaluate_batch(f.net, xs, kernels::Exec::parallel);
    CHECK(a == b);
    const auto va = kernels::node_function_values(f.net, xs, kernels::Exec::serial);
    const auto vb = kernels::node_function_values(f.net, xs, kernels::Exec::parallel);
    for (NodeId n = 0; n < f.tree.size(); ++n) {
        CHECK(va.up[n] == vb.up[n]);
        CHECK(va.down[n] == vb.down[n]);
    }
}

TEST_CASE("orthogonalization gives orthonormal node functions") {
    Fixture f(6, 1);
    const auto o = orthogonalize(f.net);
    CHECK(o.orth_state() == OrthState::all);
    for (NodeId a = 0; a < o.tree().size(); ++a) {
        if (o.tree().is_root(a)) continue;
        const Matrix c = o.core(a).last_mode_view();
        const Matrix g = c.transpose() * c;
        CHECK((g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(o.orthonormal(a));
    }
    // Monte Carlo Gram of the u^a values approaches the identity.
    const Matrix xs = testing::uniform_points(20000, 6, f.rng);
    const auto vals = kernels::node_function_values(o, xs, kernels::Exec::parallel);
    for (NodeId a = 0; a < o.tree().size(); ++a) {
        if (o.tree().is_root(a)) continue;
        const Matrix g = vals.up[a].transpose() * vals.up[a] / 20000.0;
        CHECK((g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff() < 0.1);
    }
}

TEST_CASE("alpha-orthogonalization also makes the complementary functions orthonormal") {
    Fixture f(5, 2);
    const Matrix xs = testing::uniform_points(20000, 5, f.rng);
    for (NodeId a = 0; a < f.tree.size(); ++a) {
        if (f.tree.is_root(a)) continue;
        const auto v = alpha_orthogonalize(f.net, a);
        CHECK(v.orth_state() == OrthState::node);
        CHECK(v.orth_node() == a);
        const auto vals = kernels::node_function_values(v, xs, kernels::Exec::parallel);
        const Matrix g = vals.down[a].transpose() * vals.down[a] / 20000.0;
        CHECK((g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff() < 0.1);
        // Parseval at the center: the core carries the whole norm.
        CHECK(v.core(a).norm() == doctest::Approx(norm(f.net)).epsilon(1e-10));
    }
}

TEST_CASE("add, scale and norm follow the full tensors") {
    Fixture f(4, 4);
    auto rng = make_rng(99);
    const auto g = TreeTensorNetwork::random(f.tree, f.bases, testing::random_admissible_ranks(f.tree, f.bases, 2, rng), rng);
    const auto s = add(f.net, scale(g, -2.5));
    const auto fa = assemble_full(f.net), fb = assemble_full(g), fs = assemble_full(s);
    for (std::size_t i = 0; i < fs.size(); ++i) CHECK(fs[i] == doctest::Approx(fa[i] - 2.5 * fb[i]).epsilon(1e-10));
    CHECK(norm(s) == doctest::Approx(fs.norm()).epsilon(1e-10));
    for (NodeId a = 0; a < f.tree.size(); ++a)
        if (!f.tree.is_root(a)) CHECK(s.rank(a) == f.net.rank(a) + g.rank(a));
}

TEST_CASE("truncation to ranks and to precision") {
    Fixture f(5, 5);
    const auto spectrum = singular_spectrum(f.net);
    RankMap target = f.net.ranks();
    for (NodeId a = 0; a < f.tree.size(); ++a)
        if (!f.tree.is_root(a) && target[a] > 1) --target[a];
    if (is_admissible(f.tree, target, f.net.leaf_dims()).admissible) {
        const auto t = truncate(f.net, target);
        CHECK(t.ranks() == target);
    }
    const auto same = truncate(f.net, 0.0);
    CHECK(testing::relative_gap(Eigen::Map<const Vector>(assemble_full(same).data().data(), static_cast<Eigen::Index>(assemble_full(same).size())),
                                Eigen::Map<const Vector>(assemble_full(f.net).data().data(), static_cast<Eigen::Index>(assemble_full(f.net).size()))) < 1e-12);
    const auto crude = truncate(f.net, 0.999);
    CHECK(crude.complexity() <= f.net.complexity());
    (void)spectrum;
}

TEST_CASE("exact rank one tensors truncate to rank one") {
    auto rng = make_rng(7);
    const auto tree = DimensionTree::build(TreeKind::balanced, 4);
    const std::vector<FeatureBasis> bases(4, FeatureBasis{BasisFamily::legendre, 3});
    const auto one = TreeTensorNetwork::random(tree, bases, RankMap(tree.size(), 1), rng);
    const auto twice = add(one, one);
    const auto back = truncate(twice, 1e-12);
    CHECK(back.ranks() == RankMap(tree.size(), 1));
    CHECK(norm(back) == doctest::Approx(2.0 * norm(one)).epsilon(1e-12));
}

TEST_CASE("permuting representation keeps the function") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        Fixture f(6, 10 + s);
        const Matrix xs = testing::uniform_points(400, 6, f.rng);
        const Vector ref = evaluate(f.net, xs);
        const auto move = draw_move(f.tree, f.net.ranks(), f.rng, {});
        const auto moved = permute_representation(f.net, move, 0.0);
        moved.check();
        CHECK(moved.tree().same_subsets(permute_topology(f.tree, move)));
        CHECK(testing::relative_gap(evaluate(moved, xs), ref) < 1e-10);
        CHECK(is_admissible(moved.tree(), moved.ranks(), moved.leaf_dims()).admissible);
    }
}

TEST_CASE("rank-one functions keep rank one after any permutation") {
    auto rng = make_rng(8);
    const auto tree = DimensionTree::build(TreeKind::balanced, 6);
    const std::vector<FeatureBasis> bases(6, FeatureBasis{BasisFamily::legendre, 2});
    auto v = TreeTensorNetwork::random(tree, bases, RankMap(tree.size(), 1), rng);
    for (int k = 0; k < 10; ++k) {
        v = permute_representation(v, draw_move(v.tree(), v.ranks(), rng, {}), 1e-12);
        CHECK(v.ranks() == RankMap(v.tree().size(), 1));
    }
}

TEST_CASE("merged tensors over the size cap are rejected") {
    Fixture f(6, 30);
    const auto move = draw_move(f.tree, f.net.ranks(), f.rng, {});
    const auto cost = static_cast<std::size_t>(move_cost(f.tree, f.net.ranks(), move));
    CHECK_THROWS_AS(permute_representation(f.net, move, 0.0, cost - 1), InfeasibleMove);
    CHECK_NOTHROW(permute_representation(f.net, move, 0.0, cost));
}

TEST_CASE("network documents round trip") {
    Fixture f(5, 40);
    const auto text = f.net.serialize();
    const auto back = TreeTensorNetwork::parse(text);
    CHECK(back.serialize() == text);
    const Matrix xs = testing::uniform_points(50, 5, f.rng);
    CHECK(testing::relative_gap(evaluate(back, xs), evaluate(f.net, xs)) < 1e-14);
    const auto o = orthogonalize(f.net);
    CHECK(TreeTensorNetwork::parse(o.serialize()).orth_state() == OrthState::all);
    CHECK_THROWS(TreeTensorNetwork::parse("{}"));
}

TEST_CASE("constant network and complexity") {
    const auto tree = DimensionTree::build(TreeKind::linear, 3);
    const std::vector<FeatureBasis> bases(3, FeatureBasis{BasisFamily::legendre, 4});
    const auto c = TreeTensorNetwork::constant(tree, bases, 2.5);
    Rng rng = make_rng(1);
    const Matrix xs = testing::uniform_points(20, 3, rng);
    CHECK((evaluate(c, xs).array() - 2.5).abs().maxCoeff() < 1e-14);
    CHECK(c.complexity() == storage_complexity(tree, c.ranks(), c.leaf_dims()));
    CHECK(c.complexity() == 3 * 5 + 1 + 1);
}

TEST_CASE("format algebra on a small random batch") {
    const auto r = testing::check_format_algebra(15, 5);
    CHECK(r.gauge < 1e-10);
    CHECK(r.parseval < 1e-10);
    CHECK(r.truncation <= 1.0 + 1e-9);
}

TEST_CASE("oracles on a small random batch") {
    const auto r = testing::check_oracles(10, 6);
    CHECK(r.spectra < 1e-10);
    CHECK(r.loo < 1e-10);
    CHECK(r.roundtrip);
}

TEST_CASE("permutations leave admissible ranks") {
    auto rng = make_rng(59);
    for (double eps : {0.0, 0.05}) {
        for (int trial = 0; trial < 30; ++trial) {
            const auto tree = testing::random_binary_tree(6, rng);
            const auto bases = testing::random_bases(6, 3, rng);
            auto v = TreeTensorNetwork::random(tree, bases, testing::random_admissible_ranks(tree, bases, 4, rng), rng);
            const Matrix xs = testing::uniform_points(2000, 6, rng);
            const Vector ref = evaluate(v, xs);
            for (int k = 0; k < 4; ++k) {
                v = permute_representation(v, draw_move(v.tree(), v.ranks(), rng, {}), eps);
                CHECK(is_admissible(v.tree(), v.ranks(), v.leaf_dims()).admissible);
            }
            // Each move loses at most eps times the norm; sampled, with slack.
            CHECK(testing::relative_gap(evaluate(v, xs), ref) <= 6.0 * eps + 1e-10);
        }
    }
}
