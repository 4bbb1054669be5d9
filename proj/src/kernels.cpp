#include "treelearn/kernels.hpp"

#include <algorithm>
#include <stdexcept>

namespace treelearn::kernels {

namespace {

std::size_t block_count(std::size_t n) { return (n + block_rows - 1) / block_rows; }

template <class F>
void for_blocks(std::size_t n, Exec exec, F&& f) {
    const auto nb = static_cast<std::ptrdiff_t>(block_count(n));
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t b = 0; b < nb; ++b) {
            const auto lo = static_cast<std::size_t>(b) * block_rows;
            f(lo, std::min(n, lo + block_rows));
        }
    } else {
        for (std::ptrdiff_t b = 0; b < nb; ++b) {
            const auto lo = static_cast<std::size_t>(b) * block_rows;
            f(lo, std::min(n, lo + block_rows));
        }
    }
}

}  // namespace

RowMatrix basis_matrix(const FeatureBasis& b, const Matrix& xs, std::size_t dim, Exec exec) {
    if (dim >= static_cast<std::size_t>(xs.cols())) throw std::invalid_argument("point dimension mismatch");
    const auto n = static_cast<std::size_t>(xs.rows());
    RowMatrix out(xs.rows(), static_cast<Eigen::Index>(b.size()));
    for_blocks(n, exec, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t k = lo; k < hi; ++k) {
            const auto row = static_cast<Eigen::Index>(k);
            basis_eval(b, xs(row, static_cast<Eigen::Index>(dim)), b.degree,
                       std::span<double>(out.row(row).data(), b.size()));
        }
    });
    return out;
}

RowMatrix rowwise_kron(const std::vector<const RowMatrix*>& factors, Exec exec) {
    if (factors.empty()) throw std::invalid_argument("rowwise_kron needs at least one factor");
    const Eigen::Index n = factors[0]->rows();
    Eigen::Index cols = 1;
    for (const auto* f : factors) {
        if (f->rows() != n) throw std::invalid_argument("rowwise_kron row count mismatch");
        cols *= f->cols();
    }
    RowMatrix out(n, cols);
    for_blocks(static_cast<std::size_t>(n), exec, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t k = lo; k < hi; ++k) {
            const auto row = static_cast<Eigen::Index>(k);
            double* dst = out.row(row).data();
            const auto& first = *factors[0];
            Eigen::Index len = first.cols();
            std::copy_n(first.row(row).data(), len, dst);
            for (std::size_t f = 1; f < factors.size(); ++f) {
                const auto& fac = *factors[f];
                const Eigen::Index w = fac.cols();
                const double* src = fac.row(row).data();
                // Expand in place from the back so earlier entries stay readable.
                for (Eigen::Index i = len; i-- > 0;) {
                    const double v = dst[i];
                    for (Eigen::Index j = w; j-- > 0;) dst[i * w + j] = v * src[j];
                }
                len *= w;
            }
        }
    });
    return out;
}

RowMatrix block_product(const RowMatrix& k, const Matrix& c, Exec exec) {
    if (k.cols() != c.rows()) throw std::invalid_argument("block_product inner dimension mismatch");
    RowMatrix out(k.rows(), c.cols());
    for_blocks(static_cast<std::size_t>(k.rows()), exec, [&](std::size_t lo, std::size_t hi) {
        const auto l = static_cast<Eigen::Index>(lo);
        const auto h = static_cast<Eigen::Index>(hi - lo);
        out.middleRows(l, h).noalias() = k.middleRows(l, h) * c;
    });
    return out;
}

std::vector<RowMatrix> basis_matrices(const TreeTensorNetwork& net, const Matrix& xs, Exec exec) {
    const std::size_t d = net.tree().dimension();
    if (static_cast<std::size_t>(xs.cols()) != d)
        throw std::invalid_argument("points have " + std::to_string(xs.cols()) + " coordinates, expected " +
                                    std::to_string(d));
    std::vector<RowMatrix> out(d);
    for (std::size_t nu = 0; nu < d; ++nu) out[nu] = basis_matrix(net.bases()[nu], xs, nu, exec);
    return out;
}

std::vector<RowMatrix> upward_values(const TreeTensorNetwork& net, const std::vector<RowMatrix>& basis,
                                     Exec exec) {
    const auto& tree = net.tree();
    std::vector<RowMatrix> up(tree.size());
    for (auto a : tree.by_decreasing_level()) {
        const Matrix cmat = net.core(a).last_mode_view();
        if (tree.is_leaf(a)) {
            up[a] = block_product(basis[tree.dims(a)[0]], cmat, exec);
        } else {
            std::vector<const RowMatrix*> f;
            for (auto c : tree.children(a)) f.push_back(&up[c]);
            up[a] = block_product(rowwise_kron(f, exec), cmat, exec);
        }
    }
    return up;
}

RowMatrix child_down_values(const TreeTensorNetwork& net, NodeId beta, const std::vector<RowMatrix>& up,
                            const RowMatrix& parent_down, Exec exec) {
    const auto& tree = net.tree();
    const NodeId gamma = tree.parent(beta);
    const std::size_t slot = tree.child_position(beta);
    std::vector<const RowMatrix*> f;
    for (auto c : tree.children(gamma))
        if (c != beta) f.push_back(&up[c]);
    f.push_back(&parent_down);
    const std::size_t row_mode[] = {slot};
    const Matrix cperm = matricize(net.core(gamma), row_mode).transpose();
    return block_product(rowwise_kron(f, exec), cperm, exec);
}

NodeFunctionValues node_function_values(const TreeTensorNetwork& net, const Matrix& xs, Exec exec) {
    const auto& tree = net.tree();
    NodeFunctionValues v;
    v.up = upward_values(net, basis_matrices(net, xs, exec), exec);
    v.down.resize(tree.size());
    v.down[tree.root()] = RowMatrix::Ones(xs.rows(), 1);
    auto order = tree.by_decreasing_level();
    std::reverse(order.begin(), order.end());
    for (auto a : order)
        if (!tree.is_root(a)) v.down[a] = child_down_values(net, a, v.up, v.down[tree.parent(a)], exec);
    return v;
}

Vector evaluate_batch(const TreeTensorNetwork& net, const Matrix& xs, Exec exec) {
    const auto up = upward_values(net, basis_matrices(net, xs, exec), exec);
    return up[net.tree().root()].col(0);
}

Vector evaluate_pointwise(const TreeTensorNetwork& net, const Matrix& xs, Exec exec) {
    const auto& tree = net.tree();
    if (static_cast<std::size_t>(xs.cols()) != tree.dimension())
        throw std::invalid_argument("point dimension mismatch");
    const auto order = tree.by_decreasing_level();
    std::vector<Matrix> cmat(tree.size());
    for (NodeId a = 0; a < tree.size(); ++a) cmat[a] = net.core(a).last_mode_view();
    Vector out(xs.rows());
    for_blocks(static_cast<std::size_t>(xs.rows()), exec, [&](std::size_t lo, std::size_t hi) {
        std::vector<Vector> val(tree.size());
        std::vector<double> phi;
        Vector kron, next;
        for (std::size_t k = lo; k < hi; ++k) {
            const auto row = static_cast<Eigen::Index>(k);
            for (auto a : order) {
                if (tree.is_leaf(a)) {
                    const std::size_t nu = tree.dims(a)[0];
                    phi = basis_eval(net.bases()[nu], xs(row, static_cast<Eigen::Index>(nu)), net.bases()[nu].degree);
                    val[a] = cmat[a].transpose() * Eigen::Map<const Vector>(phi.data(), static_cast<Eigen::Index>(phi.size()));
                    continue;
                }
                const auto& ch = tree.children(a);
                kron = val[ch[0]];
                for (std::size_t c = 1; c < ch.size(); ++c) {
                    const Vector& v = val[ch[c]];
                    next.resize(kron.size() * v.size());
                    for (Eigen::Index i = 0; i < kron.size(); ++i) next.segment(i * v.size(), v.size()) = kron[i] * v;
                    kron.swap(next);
                }
                val[a] = cmat[a].transpose() * kron;
            }
            out[row] = val[tree.root()][0];
        }
    });
    return out;
}

}  // namespace treelearn::kernels
