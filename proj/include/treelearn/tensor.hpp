#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace treelearn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense tensor stored row-major: the last mode varies fastest.
class FullTensor {
public:
    FullTensor() = default;
    explicit FullTensor(std::vector<std::size_t> shape);
    FullTensor(std::vector<std::size_t> shape, std::vector<double> data);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t order() const { return shape_.size(); }
    std::size_t extent(std::size_t mode) const { return shape_.at(mode); }
    std::size_t size() const { return data_.size(); }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::span<const std::size_t> index);
    double at(std::span<const std::size_t> index) const;

    std::vector<std::size_t> strides() const;
    double norm() const;

    // (prod of leading extents) x (last extent) view of the data.
    Eigen::Map<RowMatrix> last_mode_view();
    Eigen::Map<const RowMatrix> last_mode_view() const;

    bool operator==(const FullTensor&) const = default;

private:
    std::size_t offset(std::span<const std::size_t> index) const;

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::size_t shape_product(std::span<const std::size_t> shape);

// Rows enumerate row_modes in the given order, columns the remaining modes in
// increasing order; both row-major.
Matrix matricize(const FullTensor& t, std::span<const std::size_t> row_modes);
FullTensor unmatricize(const Matrix& m, std::span<const std::size_t> shape,
                       std::span<const std::size_t> row_modes);

// result(.., i, ..) = sum_e m(i, e) t(.., e, ..)
FullTensor mode_multiply(const FullTensor& t, std::size_t mode, const Matrix& m);

// Result mode j is input mode perm[j].
FullTensor permute_modes(const FullTensor& t, std::span<const std::size_t> perm);

struct SvdResult {
    Matrix left;
    Vector singular_values;  // all of them, nonincreasing
    Matrix right;
    std::size_t retained_rank = 0;
};

// Minimal r >= 1 with sum_{i>r} s_i^2 <= tol^2 sum_i s_i^2.
std::size_t tail_rank(const Vector& singular_values, double rel_tail_tol);

SvdResult truncated_svd(const Matrix& m, std::optional<std::size_t> max_rank,
                        double rel_tail_tol);

}  // namespace treelearn
