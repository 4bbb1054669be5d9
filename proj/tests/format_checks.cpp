#include "format_checks.hpp"

#include <chrono>
#include <numeric>

#include "support.hpp"
#include "treelearn/learning.hpp"

namespace treelearn::testing {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

TreeTensorNetwork random_network(std::size_t d_max, std::size_t r_max, std::size_t p_max, Rng& rng) {
    std::uniform_int_distribution<std::size_t> dd(3, d_max);
    const auto d = dd(rng);
    const auto tree = random_binary_tree(d, rng);
    const auto bases = random_bases(d, p_max, rng);
    const auto ranks = random_admissible_ranks(tree, bases, r_max, rng);
    return TreeTensorNetwork::random(tree, bases, ranks, rng);
}

Vector full_vector(const TreeTensorNetwork& v) {
    const auto f = assemble_full(v);
    return Eigen::Map<const Vector>(f.data().data(), static_cast<Eigen::Index>(f.size()));
}

}  // namespace

FormatReport check_format_algebra(std::size_t networks, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    FormatReport rep;
    for (std::size_t k = 0; k < networks; ++k) {
        auto rng = make_rng(seed, k);
        const auto u = random_network(6, 4, 4, rng);
        const Matrix xs = uniform_points(1000, u.tree().dimension(), rng);
        const Vector ref = evaluate(u, xs);
        auto gap = [&](const TreeTensorNetwork& w) { rep.gauge = std::max(rep.gauge, relative_gap(evaluate(w, xs), ref)); };

        const auto o = orthogonalize(u);
        gap(o);
        std::uniform_int_distribution<NodeId> pick(0, u.tree().size() - 1);
        gap(alpha_orthogonalize(u, pick(rng)));
        gap(truncate(u, 0.0));
        const auto moved = permute_representation(u, draw_move(u.tree(), u.ranks(), rng, {}), 0.0);
        gap(moved);

        // Parseval at every node: the norm is carried by each spectrum.
        const double n2 = full_vector(u).squaredNorm();
        for (const auto& s : singular_spectrum(u))
            rep.parseval = std::max(rep.parseval, std::abs(s.squaredNorm() - n2) / n2);

        const Vector full = full_vector(u);
        for (double eps : {1e-1, 1e-3, 1e-6}) {
            const auto t = truncate(u, eps);
            rep.truncation = std::max(rep.truncation, (full_vector(t) - full).norm() / (eps * full.norm()));
        }
        ++rep.networks;
    }
    rep.seconds = seconds_since(t0);
    return rep;
}

OracleReport check_oracles(std::size_t cases, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    OracleReport rep;
    for (std::size_t k = 0; k < cases; ++k) {
        auto rng = make_rng(seed, k);

        // Node singular values against SVDs of the full coefficient tensor.
        const auto u = random_network(5, 4, 3, rng);
        const auto full = assemble_full(u);
        const auto spectrum = singular_spectrum(u);
        const double scale = full.norm();
        for (NodeId a = 0; a < u.tree().size(); ++a) {
            if (u.tree().is_root(a)) {
                rep.spectra = std::max(rep.spectra, std::abs(spectrum[a][0] - scale) / scale);
                continue;
            }
            const Matrix m = matricize(full, u.tree().dims(a));
            const Vector s = Eigen::JacobiSVD<Matrix>(m).singularValues();
            for (Eigen::Index i = 0; i < s.size(); ++i) {
                const double mine = i < spectrum[a].size() ? spectrum[a][i] : 0.0;
                rep.spectra = std::max(rep.spectra, std::abs(mine - s[i]) / scale);
            }
        }

        // Leave-one-out risk against explicit refits.
        std::uniform_int_distribution<Eigen::Index> nn(12, 40), mm(1, 10);
        const auto n = nn(rng);
        const auto m = std::min<Eigen::Index>(mm(rng), n - 2);
        const Matrix a = Matrix::Random(n, m);
        const Vector y = Vector::Random(n);
        const auto fit = solve_least_squares(a, y);
        double refit = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            Matrix ai(n - 1, m);
            Vector yi(n - 1);
            for (Eigen::Index j = 0, r = 0; j < n; ++j) {
                if (j == i) continue;
                ai.row(r) = a.row(j);
                yi[r++] = y[j];
            }
            const Vector c = ai.colPivHouseholderQr().solve(yi);
            const double e = y[i] - a.row(i).dot(c);
            refit += e * e;
        }
        refit /= static_cast<double>(n);
        rep.loo = std::max(rep.loo, std::abs(fit.loo - refit) / refit);
        rep.loo = std::max(rep.loo, std::abs(loo_risk(a, y, fit.coefficients) - refit) / refit);

        // Matricization round trips on every mode subset.
        const auto& shape = full.shape();
        const std::size_t order = shape.size();
        for (std::uint32_t mask = 0; mask < (1u << order); ++mask) {
            std::vector<std::size_t> rows;
            for (std::size_t j = 0; j < order; ++j)
                if (mask & (1u << j)) rows.push_back(j);
            if (unmatricize(matricize(full, rows), shape, rows) != full) rep.roundtrip = false;
        }
    }
    rep.seconds = seconds_since(t0);
    return rep;
}

}  // namespace treelearn::testing
