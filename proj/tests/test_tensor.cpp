#include <doctest.h>

#include <numeric>

#include "support.hpp"
#include "treelearn/tensor.hpp"

using namespace treelearn;

namespace {

FullTensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
    std::normal_distribution<double> g;
    FullTensor t(shape);
    for (auto& v : t.data()) v = g(rng);
    return t;
}

// Multi-index of a flat row-major offset.
std::vector<std::size_t> unravel(std::size_t flat, const std::vector<std::size_t>& shape) {
    std::vector<std::size_t> idx(shape.size());
    for (std::size_t k = shape.size(); k-- > 0;) {
        idx[k] = flat % shape[k];
        flat /= shape[k];
    }
    return idx;
}

}  // namespace

TEST_CASE("matricize places every entry by explicit index arithmetic") {
    auto rng = make_rng(1);
    const std::vector<std::size_t> shape{2, 3, 4, 2};
    const auto t = random_tensor(shape, rng);
    const std::vector<std::size_t> rows{2, 0};
    const Matrix m = matricize(t, rows);
    CHECK(m.rows() == 8);
    CHECK(m.cols() == 6);
    for (std::size_t f = 0; f < t.size(); ++f) {
        const auto i = unravel(f, shape);
        const auto r = i[2] * 2 + i[0];
        const auto c = i[1] * 2 + i[3];
        CHECK(m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) == t[f]);
    }
}

TEST_CASE("matricize and unmatricize round trip exactly") {
    auto rng = make_rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<std::size_t> ext(1, 4), ord(1, 5);
        std::vector<std::size_t> shape(ord(rng));
        for (auto& s : shape) s = ext(rng);
        const auto t = random_tensor(shape, rng);
        std::vector<std::size_t> modes(shape.size());
        std::iota(modes.begin(), modes.end(), 0);
        std::shuffle(modes.begin(), modes.end(), rng);
        std::uniform_int_distribution<std::size_t> cut(0, shape.size());
        modes.resize(cut(rng));
        const Matrix m = matricize(t, modes);
        CHECK(unmatricize(m, shape, modes) == t);
    }
}

TEST_CASE("mode_multiply matches a direct sum") {
    auto rng = make_rng(3);
    const std::vector<std::size_t> shape{3, 2, 4};
    const auto t = random_tensor(shape, rng);
    Matrix m = Matrix::Random(5, 2);
    const auto out = mode_multiply(t, 1, m);
    REQUIRE(out.shape() == std::vector<std::size_t>{3, 5, 4});
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 5; ++j)
            for (std::size_t k = 0; k < 4; ++k) {
                double s = 0.0;
                for (std::size_t e = 0; e < 2; ++e) s += m(j, e) * t[(i * 2 + e) * 4 + k];
                const std::size_t idx[] = {i, j, k};
                CHECK(out.at(idx) == doctest::Approx(s).epsilon(1e-14));
            }
}

TEST_CASE("permute_modes moves input mode perm[j] to position j") {
    auto rng = make_rng(4);
    const std::vector<std::size_t> shape{2, 3, 4};
    const auto t = random_tensor(shape, rng);
    const std::vector<std::size_t> perm{2, 0, 1};
    const auto p = permute_modes(t, perm);
    REQUIRE(p.shape() == std::vector<std::size_t>{4, 2, 3});
    for (std::size_t f = 0; f < t.size(); ++f) {
        const auto i = unravel(f, shape);
        const std::size_t j[] = {i[2], i[0], i[1]};
        CHECK(p.at(j) == t[f]);
    }
    const std::vector<std::size_t> inv{1, 2, 0};
    CHECK(permute_modes(p, inv) == t);
}

TEST_CASE("tail_rank keeps the smallest rank meeting the tail bound") {
    Vector s(4);
    s << 4.0, 2.0, 1.0, 0.0;
    CHECK(tail_rank(s, 0.0) == 3);
    CHECK(tail_rank(s, 1.0) == 1);
    // Tail after rank 1 is sqrt(5)/sqrt(21) ~ 0.488.
    CHECK(tail_rank(s, 0.49) == 1);
    CHECK(tail_rank(s, 0.48) == 2);
    CHECK(tail_rank(Vector::Zero(3), 0.1) == 1);
}

TEST_CASE("truncated_svd reconstructs within the requested tail") {
    auto rng = make_rng(5);
    Matrix a = Matrix::Random(7, 5);
    const auto full = truncated_svd(a, std::nullopt, 0.0);
    CHECK(full.retained_rank == 5);
    CHECK((full.left * full.singular_values.head(5).asDiagonal() * full.right.transpose() - a).norm() <
          1e-12 * a.norm());
    for (double tol : {0.5, 0.1, 1e-3}) {
        const auto t = truncated_svd(a, std::nullopt, tol);
        const auto r = static_cast<Eigen::Index>(t.retained_rank);
        const Matrix approx = t.left.leftCols(r) * t.singular_values.head(r).asDiagonal() * t.right.leftCols(r).transpose();
        CHECK((approx - a).norm() <= tol * a.norm() * (1 + 1e-12));
    }
    const auto capped = truncated_svd(a, 2, 0.0);
    CHECK(capped.retained_rank == 2);
    Matrix bad = a;
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(truncated_svd(bad, std::nullopt, 0.0), std::domain_error);
}
