#pragma once

#include "isorient/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>

namespace isorient {

struct Triplet {
    Index row;
    Index col;
    double value;
};

using ColIndex = std::int32_t;

// Compressed sparse row matrix. Coordinates are unique per row and sorted by
// column; entries with magnitude below kDropTolerance are never stored.
class SparseMatrix {
public:
    static constexpr double kDropTolerance = 1e-14;

    SparseMatrix() = default;
    SparseMatrix(Index rows, Index cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {
        if (rows < 0 || cols < 0 || rows > std::numeric_limits<ColIndex>::max() ||
            cols > std::numeric_limits<ColIndex>::max())
            throw NumericalError("sparse matrix dimensions exceed the index range");
    }

    // Duplicate coordinates are summed. The merge is a sort on (row, col, value)
    // so the result is independent of triplet arrival order.
    static SparseMatrix from_triplets(Index rows, Index cols, std::vector<Triplet> triplets) {
        for (const auto& t : triplets) {
            if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
                throw NumericalError("sparse triplet out of range (" + std::to_string(t.row) + ", " +
                                     std::to_string(t.col) + ")");
        }
        std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
            if (a.row != b.row) return a.row < b.row;
            if (a.col != b.col) return a.col < b.col;
            return a.value < b.value;
        });
        SparseMatrix m(rows, cols);
        m.col_idx_.reserve(triplets.size());
        m.values_.reserve(triplets.size());
        std::size_t i = 0;
        while (i < triplets.size()) {
            std::size_t j = i;
            double sum = 0.0;
            while (j < triplets.size() && triplets[j].row == triplets[i].row &&
                   triplets[j].col == triplets[i].col) {
                sum += triplets[j].value;
                ++j;
            }
            if (std::abs(sum) >= kDropTolerance) {
                m.col_idx_.push_back(static_cast<ColIndex>(triplets[i].col));
                m.values_.push_back(sum);
                ++m.row_ptr_[static_cast<std::size_t>(triplets[i].row) + 1];
            }
            i = j;
        }
        std::partial_sum(m.row_ptr_.begin(), m.row_ptr_.end(), m.row_ptr_.begin());
        return m;
    }

    // Rows given already sorted and deduplicated; used by the assemblers that
    // build one row at a time.
    static SparseMatrix from_rows(Index rows, Index cols,
                                  std::vector<std::vector<std::pair<Index, double>>> row_entries) {
        SparseMatrix m(rows, cols);
        std::size_t total = 0;
        for (Index r = 0; r < rows; ++r) {
            auto& re = row_entries[static_cast<std::size_t>(r)];
            std::sort(re.begin(), re.end(), [](auto& a, auto& b) { return a.first < b.first; });
            total += re.size();
        }
        m.col_idx_.reserve(total);
        m.values_.reserve(total);
        for (Index r = 0; r < rows; ++r) {
            const auto& re = row_entries[static_cast<std::size_t>(r)];
            std::size_t i = 0;
            while (i < re.size()) {
                std::size_t j = i;
                double sum = 0.0;
                while (j < re.size() && re[j].first == re[i].first) sum += re[j++].second;
                if (re[i].first < 0 || re[i].first >= cols)
                    throw NumericalError("sparse column out of range");
                if (std::abs(sum) >= kDropTolerance) {
                    m.col_idx_.push_back(static_cast<ColIndex>(re[i].first));
                    m.values_.push_back(sum);
                }
                i = j;
            }
            m.row_ptr_[static_cast<std::size_t>(r) + 1] = static_cast<Index>(m.col_idx_.size());
        }
        return m;
    }

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    std::size_t nnz() const { return values_.size(); }

    std::span<const ColIndex> row_cols(Index r) const {
        auto b = static_cast<std::size_t>(row_ptr_[static_cast<std::size_t>(r)]);
        auto e = static_cast<std::size_t>(row_ptr_[static_cast<std::size_t>(r) + 1]);
        return {col_idx_.data() + b, e - b};
    }
    std::span<const double> row_values(Index r) const {
        auto b = static_cast<std::size_t>(row_ptr_[static_cast<std::size_t>(r)]);
        auto e = static_cast<std::size_t>(row_ptr_[static_cast<std::size_t>(r) + 1]);
        return {values_.data() + b, e - b};
    }

    double coeff(Index r, Index c) const {
        auto cols = row_cols(r);
        auto it = std::lower_bound(cols.begin(), cols.end(), static_cast<ColIndex>(c));
        if (it == cols.end() || *it != c) return 0.0;
        return row_values(r)[static_cast<std::size_t>(it - cols.begin())];
    }

    // y = this * x
    void multiply(std::span<const double> x, std::span<double> y) const {
        if (static_cast<Index>(x.size()) != cols_ || static_cast<Index>(y.size()) != rows_)
            throw NumericalError("sparse multiply dimension mismatch");
#pragma omp parallel for schedule(dynamic, 256)
        for (Index r = 0; r < rows_; ++r) {
            double s = 0.0;
            const auto b = row_ptr_[static_cast<std::size_t>(r)];
            const auto e = row_ptr_[static_cast<std::size_t>(r) + 1];
            for (Index k = b; k < e; ++k)
                s += values_[static_cast<std::size_t>(k)] *
                     x[static_cast<std::size_t>(col_idx_[static_cast<std::size_t>(k)])];
            y[static_cast<std::size_t>(r)] = s;
        }
    }

    std::vector<double> operator*(std::span<const double> x) const {
        std::vector<double> y(static_cast<std::size_t>(rows_));
        multiply(x, y);
        return y;
    }

    SparseMatrix transpose() const {
        SparseMatrix t(cols_, rows_);
        for (ColIndex c : col_idx_) ++t.row_ptr_[static_cast<std::size_t>(c) + 1];
        std::partial_sum(t.row_ptr_.begin(), t.row_ptr_.end(), t.row_ptr_.begin());
        t.col_idx_.resize(col_idx_.size());
        t.values_.resize(values_.size());
        std::vector<Index> fill(t.row_ptr_.begin(), t.row_ptr_.end() - 1);
        for (Index r = 0; r < rows_; ++r) {
            auto cols = row_cols(r);
            auto vals = row_values(r);
            for (std::size_t k = 0; k < cols.size(); ++k) {
                auto pos = static_cast<std::size_t>(fill[static_cast<std::size_t>(cols[k])]++);
                t.col_idx_[pos] = static_cast<ColIndex>(r);
                t.values_[pos] = vals[k];
            }
        }
        return t;
    }

    // Keep a subset of rows and columns; maps give the new index or -1 to drop.
    SparseMatrix reduce(std::span<const Index> row_map, Index new_rows, std::span<const Index> col_map,
                        Index new_cols) const {
        SparseMatrix m(new_rows, new_cols);
        std::vector<Index> old_of_new(static_cast<std::size_t>(new_rows), -1);
        for (Index r = 0; r < rows_; ++r)
            if (row_map[static_cast<std::size_t>(r)] >= 0)
                old_of_new[static_cast<std::size_t>(row_map[static_cast<std::size_t>(r)])] = r;
        for (Index nr = 0; nr < new_rows; ++nr) {
            Index r = old_of_new[static_cast<std::size_t>(nr)];
            if (r >= 0) {
                auto cols = row_cols(r);
                auto vals = row_values(r);
                for (std::size_t k = 0; k < cols.size(); ++k) {
                    Index nc = col_map[static_cast<std::size_t>(cols[k])];
                    if (nc < 0) continue;
                    m.col_idx_.push_back(static_cast<ColIndex>(nc));
                    m.values_.push_back(vals[k]);
                }
            }
            m.row_ptr_[static_cast<std::size_t>(nr) + 1] = static_cast<Index>(m.col_idx_.size());
        }
        return m;
    }

    // Coordinate text dump, one `row col value` line per stored entry.
    void dump(std::ostream& os) const {
        os.precision(17);
        for (Index r = 0; r < rows_; ++r) {
            auto cols = row_cols(r);
            auto vals = row_values(r);
            for (std::size_t k = 0; k < cols.size(); ++k) os << r << ' ' << cols[k] << ' ' << vals[k] << '\n';
        }
    }

private:
    Index rows_ = 0;
    Index cols_ = 0;
    std::vector<Index> row_ptr_{0};
    std::vector<ColIndex> col_idx_;
    std::vector<double> values_;
};

// Row-wise (Gustavson) sparse product; each output row is accumulated in a
// dense scratch and emitted in column order, so the result is deterministic.
inline SparseMatrix multiply(const SparseMatrix& a, const SparseMatrix& b) {
    if (a.cols() != b.rows()) throw NumericalError("sparse product dimension mismatch");
    std::vector<std::vector<std::pair<Index, double>>> rows(static_cast<std::size_t>(a.rows()));
#pragma omp parallel
    {
        std::vector<double> acc(static_cast<std::size_t>(b.cols()), 0.0);
        std::vector<char> used(static_cast<std::size_t>(b.cols()), 0);
        std::vector<Index> touched;
#pragma omp for schedule(dynamic, 64)
        for (Index r = 0; r < a.rows(); ++r) {
            touched.clear();
            auto ac = a.row_cols(r);
            auto av = a.row_values(r);
            for (std::size_t k = 0; k < ac.size(); ++k) {
                auto bc = b.row_cols(ac[k]);
                auto bv = b.row_values(ac[k]);
                for (std::size_t l = 0; l < bc.size(); ++l) {
                    auto c = static_cast<std::size_t>(bc[l]);
                    if (!used[c]) {
                        used[c] = 1;
                        touched.push_back(bc[l]);
                    }
                    acc[c] += av[k] * bv[l];
                }
            }
            std::sort(touched.begin(), touched.end());
            auto& out = rows[static_cast<std::size_t>(r)];
            out.reserve(touched.size());
            for (Index c : touched) {
                out.emplace_back(c, acc[static_cast<std::size_t>(c)]);
                acc[static_cast<std::size_t>(c)] = 0.0;
                used[static_cast<std::size_t>(c)] = 0;
            }
        }
    }
    return SparseMatrix::from_rows(a.rows(), b.cols(), std::move(rows));
}

}  // namespace isorient
