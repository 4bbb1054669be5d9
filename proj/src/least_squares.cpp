#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "treelearn/learning.hpp"

namespace treelearn {

namespace {

constexpr double leverage_one = 1e-12;
constexpr double rank_tol = 1e-11;
constexpr double gram_pivot_ratio = 1e-2;

double loo_from(const Vector& residual, const Vector& leverage, bool& flagged) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < residual.size(); ++i) {
        if (leverage[i] >= 1.0 - leverage_one) {
            flagged = true;
            return std::numeric_limits<double>::infinity();
        }
        const double e = residual[i] / (1.0 - leverage[i]);
        s += e * e;
    }
    return s / static_cast<double>(residual.size());
}

// Leading r columns of Q for a = Q R, as a R^-1; the leverages only need
// row norms, which this keeps accurate for the designs that pass the rank test.
Matrix thin_q(const Matrix& a, const Matrix& r) {
    const auto k = r.cols();
    return r.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(a.leftCols(k));
}

struct SubFit {
    Vector c;
    double empirical = 0.0, loo = 0.0, corrected = 0.0;
    bool flagged = false;
};

void finish(SubFit& f, const Vector& residual, const Vector& leverage, std::size_t m, double trace_term) {
    const auto n = static_cast<std::size_t>(residual.size());
    f.empirical = residual.squaredNorm() / static_cast<double>(n);
    f.loo = loo_from(residual, leverage, f.flagged);
    if (m >= n) {
        f.corrected = f.loo;
        f.flagged = true;
    } else {
        f.corrected = f.loo * correction_factor(m, n, trace_term);
    }
}

// Column-pivoted QR fit with a ridge fallback; used when the design is rank
// deficient or the patterns are not prefixes.
SubFit fit_general(const Matrix& a, const Vector& y) {
    SubFit f;
    const auto n = a.rows();
    const auto m = a.cols();
    if (m == 0) {
        f.c = Vector();
        finish(f, y, Vector::Zero(n), 0, 0.0);
        return f;
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(a);
    qr.setThreshold(rank_tol);
    const auto r = qr.rank();
    if (r > 0) {
        f.c = qr.solve(y);
        if (f.c.allFinite()) {
            const Matrix r11 = qr.matrixR().topLeftCorner(r, r).triangularView<Eigen::Upper>();
            const Matrix q = thin_q(a * qr.colsPermutation(), r11);
            const Matrix rinv = r11.triangularView<Eigen::Upper>().solve(Matrix::Identity(r, r));
            finish(f, y - a * f.c, q.rowwise().squaredNorm(), static_cast<std::size_t>(r), rinv.squaredNorm());
            f.flagged = f.flagged || r < m;
            return f;
        }
    }
    // Ridge fallback.
    const Matrix g = a.transpose() * a;
    const double lambda = std::max(1e-12 * g.trace() / static_cast<double>(m), std::numeric_limits<double>::min());
    const Matrix reg = g + lambda * Matrix::Identity(m, m);
    Eigen::LDLT<Matrix> ldlt(reg);
    f.c = ldlt.solve(a.transpose() * y);
    const Matrix hinv_at = ldlt.solve(a.transpose());
    Vector h(n);
    for (Eigen::Index i = 0; i < n; ++i) h[i] = a.row(i).dot(hinv_at.col(i));
    finish(f, y - a * f.c, h, static_cast<std::size_t>(m), ldlt.solve(Matrix::Identity(m, m)).trace());
    f.flagged = true;
    return f;
}

}  // namespace

double correction_factor(std::size_t m, std::size_t n, double trace_term) {
    if (m == 0) return 1.0;
    const double nd = static_cast<double>(n);
    return (1.0 + trace_term) / (1.0 - static_cast<double>(m) / nd);
}

PatternFit solve_least_squares(const Matrix& a, const Vector& y) {
    PatternSequence full(1);
    for (Eigen::Index j = 0; j < a.cols(); ++j) full[0].push_back(static_cast<std::size_t>(j));
    return solve_with_pattern_selection(a, y, full);
}

PatternFit solve_normal_equations(const Matrix& a, const Vector& y) {
    if (a.rows() == 0 || a.rows() != y.size()) throw std::invalid_argument("design and targets disagree in size");
    const auto m = a.cols();
    if (m > 0 && m < a.rows()) {
        Matrix g = Matrix::Zero(m, m);
        g.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
        const Eigen::LLT<Matrix> llt(g);
        if (llt.info() == Eigen::Success) {
            const Vector l = llt.matrixL().toDenseMatrix().diagonal();
            // Pivots bound the conditioning from below; anything far from
            // orthonormal goes through QR instead.
            if (l.minCoeff() > gram_pivot_ratio * l.maxCoeff()) {
                PatternFit out;
                out.coefficients = llt.solve(a.transpose() * y);
                out.empirical = (y - a * out.coefficients).squaredNorm() / static_cast<double>(a.rows());
                out.loo = out.corrected_loo = std::numeric_limits<double>::quiet_NaN();
                return out;
            }
        }
    }
    return solve_least_squares(a, y);
}

PatternFit solve_with_pattern_selection(const Matrix& a, const Vector& y, const PatternSequence& patterns) {
    if (patterns.empty()) throw std::invalid_argument("at least one pattern is required");
    if (a.rows() == 0 || a.rows() != y.size()) throw std::invalid_argument("design and targets disagree in size");
    const auto m = static_cast<std::size_t>(a.cols());
    for (const auto& p : patterns)
        for (auto j : p)
            if (j >= m) throw std::invalid_argument("pattern index out of range");

    std::vector<SubFit> fits(patterns.size());
    bool done = false;
    if (is_prefix_sequence(patterns)) {
        std::size_t kmax = 0;
        for (const auto& p : patterns) kmax = std::max(kmax, p.size());
        const auto k = static_cast<Eigen::Index>(kmax);
        const Matrix ak = a.leftCols(k);
        Eigen::HouseholderQR<Matrix> qr(ak);
        const Matrix r = qr.matrixQR().topLeftCorner(std::min(k, a.rows()), k).triangularView<Eigen::Upper>();
        const Vector diag = r.diagonal().cwiseAbs();
        const bool full_rank = k > 0 && k <= a.rows() && diag.minCoeff() > rank_tol * diag.maxCoeff();
        if (full_rank) {
            // One factorization serves every prefix: leading blocks of Q and R.
            const Matrix q = thin_q(ak, r);
            const Vector qty = (qr.householderQ().transpose() * y).head(k);
            const Matrix rinv = r.triangularView<Eigen::Upper>().solve(Matrix::Identity(k, k));
            Vector lev = Vector::Zero(a.rows());
            double trace = 0.0;
            Eigen::Index done_cols = 0;
            std::vector<std::size_t> order(patterns.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t x, std::size_t z) { return patterns[x].size() < patterns[z].size(); });
            for (auto i : order) {
                const auto ki = static_cast<Eigen::Index>(patterns[i].size());
                for (; done_cols < ki; ++done_cols) {
                    lev += q.col(done_cols).cwiseAbs2();
                    trace += rinv.col(done_cols).squaredNorm();
                }
                auto& f = fits[i];
                f.c = r.topLeftCorner(ki, ki).triangularView<Eigen::Upper>().solve(qty.head(ki));
                finish(f, y - a.leftCols(ki) * f.c, lev, static_cast<std::size_t>(ki), trace);
            }
            done = true;
        }
    }
    if (!done) {
        for (std::size_t i = 0; i < patterns.size(); ++i) {
            Matrix sub(a.rows(), static_cast<Eigen::Index>(patterns[i].size()));
            for (std::size_t j = 0; j < patterns[i].size(); ++j)
                sub.col(static_cast<Eigen::Index>(j)) = a.col(static_cast<Eigen::Index>(patterns[i][j]));
            fits[i] = fit_general(sub, y);
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < fits.size(); ++i) {
        const bool smaller = patterns[i].size() < patterns[best].size();
        if (fits[i].corrected < fits[best].corrected ||
            (fits[i].corrected == fits[best].corrected && smaller))
            best = i;
    }
    PatternFit out;
    out.pattern = best;
    out.coefficients = Vector::Zero(static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < patterns[best].size(); ++j)
        out.coefficients[static_cast<Eigen::Index>(patterns[best][j])] = fits[best].c[static_cast<Eigen::Index>(j)];
    out.empirical = fits[best].empirical;
    out.loo = fits[best].loo;
    out.corrected_loo = fits[best].corrected;
    out.flagged = fits[best].flagged;
    return out;
}

namespace {

Vector leverages(const Matrix& a, Eigen::Index& rank) {
    Eigen::ColPivHouseholderQR<Matrix> qr(a);
    qr.setThreshold(rank_tol);
    rank = qr.rank();
    const Matrix r11 = qr.matrixR().topLeftCorner(rank, rank).triangularView<Eigen::Upper>();
    const Matrix q = thin_q(a * qr.colsPermutation(), r11);
    return q.rowwise().squaredNorm();
}

}  // namespace

double loo_risk(const Matrix& a, const Vector& y, const Vector& coefficients) {
    if (a.rows() != y.size() || a.cols() != coefficients.size()) throw std::invalid_argument("size mismatch");
    Eigen::Index rank = 0;
    const Vector h = leverages(a, rank);
    bool flagged = false;
    return loo_from(y - a * coefficients, h, flagged);
}

double corrected_loo_risk(const Matrix& a, const Vector& y, const Vector& coefficients, const Matrix* feature_gram) {
    const double loo = loo_risk(a, y, coefficients);
    const auto n = static_cast<std::size_t>(a.rows());
    const auto m = static_cast<std::size_t>(a.cols());
    if (m == 0) return loo;
    if (m >= n) return loo;
    const Matrix ata = a.transpose() * a;
    Eigen::LDLT<Matrix> ldlt(ata);
    const Matrix gbar = feature_gram ? *feature_gram : Matrix::Identity(a.cols(), a.cols());
    // trace(G^-1 Gbar)/n with G = A^T A / n equals trace((A^T A)^-1 Gbar).
    const double trace_term = ldlt.solve(gbar).trace();
    return loo * correction_factor(m, n, trace_term);
}

SampleRisk risks(const Vector& predictions, const Vector& targets) {
    if (targets.size() == 0 || predictions.size() != targets.size())
        throw std::invalid_argument("risks needs matching nonempty vectors");
    SampleRisk r;
    const double sq = (targets - predictions).squaredNorm();
    r.empirical = sq / static_cast<double>(targets.size());
    const double ref = targets.squaredNorm();
    if (ref == 0.0) {
        r.relative_error = std::sqrt(r.empirical);
        r.flagged = true;
    } else {
        r.relative_error = std::sqrt(sq / ref);
    }
    return r;
}

SampleRisk risks(const TreeTensorNetwork& v, const Sample& s) { return risks(evaluate(v, s.x), s.y); }

}  // namespace treelearn
