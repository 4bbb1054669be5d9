#include "treelearn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace treelearn {

std::size_t shape_product(std::span<const std::size_t> shape) {
    std::size_t p = 1;
    for (auto e : shape) p *= e;
    return p;
}

FullTensor::FullTensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    for (auto e : shape_)
        if (e == 0) throw std::invalid_argument("tensor extents must be positive");
    data_.assign(shape_product(shape_), 0.0);
}

FullTensor::FullTensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    for (auto e : shape_)
        if (e == 0) throw std::invalid_argument("tensor extents must be positive");
    if (shape_product(shape_) != data_.size())
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape");
}

std::vector<std::size_t> FullTensor::strides() const {
    std::vector<std::size_t> s(shape_.size(), 1);
    for (std::size_t k = shape_.size(); k-- > 1;) s[k - 1] = s[k] * shape_[k];
    return s;
}

std::size_t FullTensor::offset(std::span<const std::size_t> index) const {
    if (index.size() != shape_.size()) throw std::invalid_argument("index order mismatch");
    std::size_t off = 0;
    for (std::size_t k = 0; k < shape_.size(); ++k) {
        if (index[k] >= shape_[k]) throw std::out_of_range("tensor index out of range");
        off = off * shape_[k] + index[k];
    }
    return off;
}

double& FullTensor::at(std::span<const std::size_t> index) { return data_[offset(index)]; }
double FullTensor::at(std::span<const std::size_t> index) const { return data_[offset(index)]; }

double FullTensor::norm() const {
    return Eigen::Map<const Vector>(data_.data(), static_cast<Eigen::Index>(data_.size())).norm();
}

Eigen::Map<RowMatrix> FullTensor::last_mode_view() {
    const auto cols = static_cast<Eigen::Index>(shape_.back());
    return {data_.data(), static_cast<Eigen::Index>(data_.size()) / cols, cols};
}

Eigen::Map<const RowMatrix> FullTensor::last_mode_view() const {
    const auto cols = static_cast<Eigen::Index>(shape_.back());
    return {data_.data(), static_cast<Eigen::Index>(data_.size()) / cols, cols};
}

namespace {

struct SplitStrides {
    std::vector<std::size_t> row_stride;  // per tensor mode, 0 if a column mode
    std::vector<std::size_t> col_stride;
    std::size_t rows = 1, cols = 1;
};

SplitStrides split_strides(std::span<const std::size_t> shape,
                           std::span<const std::size_t> row_modes) {
    const std::size_t n = shape.size();
    std::vector<bool> is_row(n, false);
    for (auto m : row_modes) {
        if (m >= n) throw std::out_of_range("matricization mode out of range");
        if (is_row[m]) throw std::invalid_argument("duplicate matricization mode");
        is_row[m] = true;
    }
    SplitStrides s;
    s.row_stride.assign(n, 0);
    s.col_stride.assign(n, 0);
    for (std::size_t k = row_modes.size(); k-- > 0;) {
        s.row_stride[row_modes[k]] = s.rows;
        s.rows *= shape[row_modes[k]];
    }
    for (std::size_t k = n; k-- > 0;) {
        if (is_row[k]) continue;
        s.col_stride[k] = s.cols;
        s.cols *= shape[k];
    }
    return s;
}

// Calls f(linear offset, row, col) for every entry in storage order.
template <class F>
void for_each_split(std::span<const std::size_t> shape, const SplitStrides& s, F&& f) {
    const std::size_t n = shape.size();
    std::vector<std::size_t> idx(n, 0);
    std::size_t row = 0, col = 0;
    const std::size_t total = shape_product(shape);
    for (std::size_t off = 0; off < total; ++off) {
        f(off, row, col);
        for (std::size_t k = n; k-- > 0;) {
            ++idx[k];
            row += s.row_stride[k];
            col += s.col_stride[k];
            if (idx[k] < shape[k]) break;
            row -= s.row_stride[k] * shape[k];
            col -= s.col_stride[k] * shape[k];
            idx[k] = 0;
        }
    }
}

}  // namespace

Matrix matricize(const FullTensor& t, std::span<const std::size_t> row_modes) {
    const auto s = split_strides(t.shape(), row_modes);
    Matrix m(s.rows, s.cols);
    for_each_split(t.shape(), s, [&](std::size_t off, std::size_t r, std::size_t c) {
        m(r, c) = t[off];
    });
    return m;
}

FullTensor unmatricize(const Matrix& m, std::span<const std::size_t> shape,
                       std::span<const std::size_t> row_modes) {
    const auto s = split_strides(shape, row_modes);
    if (static_cast<std::size_t>(m.rows()) != s.rows || static_cast<std::size_t>(m.cols()) != s.cols)
        throw std::invalid_argument("matrix size does not match target shape");
    FullTensor t({shape.begin(), shape.end()});
    for_each_split(shape, s, [&](std::size_t off, std::size_t r, std::size_t c) {
        t[off] = m(r, c);
    });
    return t;
}

FullTensor mode_multiply(const FullTensor& t, std::size_t mode, const Matrix& m) {
    if (mode >= t.order()) throw std::out_of_range("mode_multiply: mode out of range");
    const std::size_t e = t.extent(mode);
    if (static_cast<std::size_t>(m.cols()) != e)
        throw std::invalid_argument("mode_multiply: matrix columns " + std::to_string(m.cols()) +
                                    " do not match extent " + std::to_string(e));
    std::size_t lead = 1, trail = 1;
    for (std::size_t k = 0; k < mode; ++k) lead *= t.extent(k);
    for (std::size_t k = mode + 1; k < t.order(); ++k) trail *= t.extent(k);
    auto shape = t.shape();
    shape[mode] = static_cast<std::size_t>(m.rows());
    FullTensor out(shape);
    const auto ei = static_cast<Eigen::Index>(e);
    const auto ti = static_cast<Eigen::Index>(trail);
    for (std::size_t l = 0; l < lead; ++l) {
        Eigen::Map<const RowMatrix> in(t.data().data() + l * e * trail, ei, ti);
        Eigen::Map<RowMatrix> res(out.data().data() + l * shape[mode] * trail, m.rows(), ti);
        res.noalias() = m * in;
    }
    return out;
}

FullTensor permute_modes(const FullTensor& t, std::span<const std::size_t> perm) {
    const std::size_t n = t.order();
    if (perm.size() != n) throw std::invalid_argument("permutation length mismatch");
    std::vector<std::size_t> shape(n);
    std::vector<bool> seen(n, false);
    for (std::size_t j = 0; j < n; ++j) {
        if (perm[j] >= n || seen[perm[j]]) throw std::invalid_argument("invalid mode permutation");
        seen[perm[j]] = true;
        shape[j] = t.extent(perm[j]);
    }
    FullTensor out(shape);
    const auto in_strides = t.strides();
    std::vector<std::size_t> idx(n, 0);
    std::size_t src = 0;
    for (std::size_t off = 0; off < out.size(); ++off) {
        out[off] = t[src];
        for (std::size_t k = n; k-- > 0;) {
            ++idx[k];
            src += in_strides[perm[k]];
            if (idx[k] < shape[k]) break;
            src -= in_strides[perm[k]] * shape[k];
            idx[k] = 0;
        }
    }
    return out;
}

std::size_t tail_rank(const Vector& sv, double rel_tail_tol) {
    const auto n = static_cast<std::size_t>(sv.size());
    if (n == 0) return 0;
    const double total = sv.squaredNorm();
    if (total == 0.0) return 1;
    const double budget = rel_tail_tol * rel_tail_tol * total;
    double tail = 0.0;
    std::size_t r = n;
    // Grow the discarded tail from the smallest value while it fits the budget.
    while (r > 1) {
        const double next = tail + sv[static_cast<Eigen::Index>(r - 1)] * sv[static_cast<Eigen::Index>(r - 1)];
        if (next > budget) break;
        tail = next;
        --r;
    }
    return r;
}

SvdResult truncated_svd(const Matrix& m, std::optional<std::size_t> max_rank, double rel_tail_tol) {
    if (!m.allFinite()) throw std::domain_error("truncated_svd: non-finite entries");
    if (rel_tail_tol < 0.0 || rel_tail_tol > 1.0)
        throw std::invalid_argument("truncated_svd: tolerance must lie in [0,1]");
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    SvdResult res;
    res.singular_values = svd.singularValues();
    std::size_t r = tail_rank(res.singular_values, rel_tail_tol);
    if (max_rank) r = std::min(r, std::max<std::size_t>(*max_rank, 1));
    res.retained_rank = r;
    const auto ri = static_cast<Eigen::Index>(r);
    res.left = svd.matrixU().leftCols(ri);
    res.right = svd.matrixV().leftCols(ri);
    for (Eigen::Index j = 0; j < ri; ++j) {
        Eigen::Index lead = 0;
        while (lead < res.right.rows() && std::abs(res.right(lead, j)) < 1e-14) ++lead;
        if (lead < res.right.rows() && res.right(lead, j) < 0) {
            res.right.col(j) *= -1.0;
            res.left.col(j) *= -1.0;
        }
    }
    return res;
}

}  // namespace treelearn
