#include "kz/int_matrix.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <ostream>
#include <stdexcept>

namespace kz {

using boost::multiprecision::cpp_int;

IntMatrix::IntMatrix(std::initializer_list<std::initializer_list<std::int64_t>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0)
{
    data_.reserve(rows_ * cols_);
    for (const auto& row : rows) {
        if (row.size() != cols_) throw std::invalid_argument("IntMatrix: ragged initializer");
        data_.insert(data_.end(), row.begin(), row.end());
    }
}

IntMatrix IntMatrix::identity(std::size_t n)
{
    IntMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1;
    return m;
}

IntMatrix IntMatrix::transpose() const
{
    IntMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

std::int64_t IntMatrix::max_abs() const
{
    std::int64_t m = 0;
    for (auto v : data_) m = std::max(m, v < 0 ? -v : v);
    return m;
}

IntMatrix operator*(const IntMatrix& a, const IntMatrix& b)
{
    if (a.cols() != b.rows()) throw std::invalid_argument("IntMatrix: shape mismatch");
    IntMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            __int128 acc = 0;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                __int128 term = static_cast<__int128>(a(i, k)) * b(k, j);
                acc += term;
            }
            if (acc > INT64_MAX || acc < INT64_MIN) throw std::overflow_error("IntMatrix: product overflow");
            out(i, j) = static_cast<std::int64_t>(acc);
        }
    }
    return out;
}

namespace {

// Bareiss elimination; returns (rank, determinant-if-square).
std::pair<std::size_t, cpp_int> bareiss(const IntMatrix& m)
{
    const std::size_t rows = m.rows();
    const std::size_t cols = m.cols();
    std::vector<std::vector<cpp_int>> a(rows, std::vector<cpp_int>(cols));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) a[r][c] = m(r, c);

    cpp_int prev = 1;
    int sign = 1;
    std::size_t rank = 0;
    for (std::size_t c = 0; c < cols && rank < rows; ++c) {
        std::size_t pivot = rank;
        while (pivot < rows && a[pivot][c] == 0) ++pivot;
        if (pivot == rows) continue;
        if (pivot != rank) {
            std::swap(a[pivot], a[rank]);
            sign = -sign;
        }
        for (std::size_t r = rank + 1; r < rows; ++r) {
            for (std::size_t k = c + 1; k < cols; ++k)
                a[r][k] = (a[r][k] * a[rank][c] - a[r][c] * a[rank][k]) / prev;
            a[r][c] = 0;
        }
        prev = a[rank][c];
        ++rank;
    }
    cpp_int det = 0;
    if (rows == cols && rank == rows) det = rows == 0 ? cpp_int(1) : cpp_int(sign * a[rows - 1][cols - 1]);
    return {rank, det};
}

}  // namespace

std::int64_t determinant(const IntMatrix& m)
{
    if (m.rows() != m.cols()) throw std::invalid_argument("determinant: matrix not square");
    auto [r, det] = bareiss(m);
    (void)r;
    if (det > INT64_MAX || det < INT64_MIN) throw std::overflow_error("determinant: does not fit int64");
    return static_cast<std::int64_t>(det);
}

std::size_t rank(const IntMatrix& m) { return bareiss(m).first; }

std::ostream& operator<<(std::ostream& os, const IntMatrix& m)
{
    os << '[';
    for (std::size_t r = 0; r < m.rows(); ++r) {
        os << (r ? " [" : "[");
        for (std::size_t c = 0; c < m.cols(); ++c) os << (c ? "," : "") << m(r, c);
        os << ']';
    }
    return os << ']';
}

}  // namespace kz
