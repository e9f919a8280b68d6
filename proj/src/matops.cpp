#include "ibprox/matops.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ibprox/errors.hpp"

namespace ibprox {

Tensor3 Tensor3::from_mode1(Matrix mode1, Index i, Index j, Index k) {
    if (i < 0 || j < 0 || k < 0 || mode1.rows() != i || mode1.cols() != j * k) {
        throw DimensionError("tensor mode-1 unfolding has shape " + std::to_string(mode1.rows()) +
                             "x" + std::to_string(mode1.cols()) + ", expected " + std::to_string(i) +
                             "x" + std::to_string(j * k));
    }
    Tensor3 t;
    t.i_ = i;
    t.j_ = j;
    t.k_ = k;
    t.mode1_ = std::move(mode1);
    return t;
}

Matrix khatri_rao(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("khatri_rao: column counts differ (" + std::to_string(a.cols()) +
                             " vs " + std::to_string(b.cols()) + ")");
    }
    Matrix out(a.rows() * b.rows(), a.cols());
    for (Index c = 0; c < a.cols(); ++c) {
        for (Index i = 0; i < a.rows(); ++i) {
            out.block(i * b.rows(), c, b.rows(), 1) = a(i, c) * b.col(c);
        }
    }
    return out;
}

Matrix mode_unfold(const Tensor3& t, int mode) {
    const Index i = t.dim(0), j = t.dim(1), k = t.dim(2);
    switch (mode) {
        case 1:
            return t.mode1();
        case 2: {
            // column index pairs (i, k) with i fastest
            Matrix out(j, i * k);
            for (Index kk = 0; kk < k; ++kk)
                for (Index jj = 0; jj < j; ++jj)
                    for (Index ii = 0; ii < i; ++ii) out(jj, kk * i + ii) = t(ii, jj, kk);
            return out;
        }
        case 3: {
            // column index pairs (i, j) with i fastest
            Matrix out(k, i * j);
            for (Index kk = 0; kk < k; ++kk)
                for (Index jj = 0; jj < j; ++jj)
                    for (Index ii = 0; ii < i; ++ii) out(kk, jj * i + ii) = t(ii, jj, kk);
            return out;
        }
        default:
            throw DimensionError("mode_unfold: mode must be 1, 2 or 3, got " + std::to_string(mode));
    }
}

Tensor3 mode_fold(const Matrix& m, int mode, const std::array<Index, 3>& dims) {
    const Index i = dims[0], j = dims[1], k = dims[2];
    switch (mode) {
        case 1:
            return Tensor3::from_mode1(m, i, j, k);
        case 2: {
            if (m.rows() != j || m.cols() != i * k)
                throw DimensionError("mode_fold: matrix shape inconsistent with dims for mode 2");
            Tensor3 t(i, j, k);
            for (Index kk = 0; kk < k; ++kk)
                for (Index jj = 0; jj < j; ++jj)
                    for (Index ii = 0; ii < i; ++ii) t(ii, jj, kk) = m(jj, kk * i + ii);
            return t;
        }
        case 3: {
            if (m.rows() != k || m.cols() != i * j)
                throw DimensionError("mode_fold: matrix shape inconsistent with dims for mode 3");
            Tensor3 t(i, j, k);
            for (Index kk = 0; kk < k; ++kk)
                for (Index jj = 0; jj < j; ++jj)
                    for (Index ii = 0; ii < i; ++ii) t(ii, jj, kk) = m(kk, jj * i + ii);
            return t;
        }
        default:
            throw DimensionError("mode_fold: mode must be 1, 2 or 3, got " + std::to_string(mode));
    }
}

PowerIterResult operator_norm_psd(const Matrix& m, double tol, int max_iter) {
    if (m.rows() != m.cols()) {
        throw DimensionError("operator_norm_psd: matrix is " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()) + ", expected square");
    }
    const Index n = m.rows();
    PowerIterResult res;
    if (n == 0) {
        res.converged = true;
        return res;
    }
    Vector v = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
    double estimate = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        Vector w = m * v;
        res.iterations = it;
        const double norm_w = w.norm();
        if (norm_w == 0.0) {
            res.value = 0.0;
            res.converged = true;
            return res;
        }
        const double next = v.dot(w);  // Rayleigh quotient, v is unit-norm
        v = w / norm_w;
        if (std::abs(next - estimate) <= tol * std::max(1.0, std::abs(next))) {
            res.value = std::max(0.0, next);
            res.converged = true;
            return res;
        }
        estimate = next;
    }
    res.value = std::max(0.0, estimate);
    res.converged = false;
    return res;
}

Matrix nonneg_project(Matrix m) {
    return m.cwiseMax(0.0);
}

double frobenius_norm(const Matrix& m) {
    return m.norm();
}

double frobenius_norm(const Tensor3& t) {
    return t.mode1().norm();
}

Matrix random_uniform_matrix(Index rows, Index cols, Rng& rng) {
    Matrix m(rows, cols);
    for (Index c = 0; c < cols; ++c)
        for (Index r = 0; r < rows; ++r) m(r, c) = rng.uniform01();
    return m;
}

std::string format_g17(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

void write_matrix(std::ostream& out, const Matrix& m) {
    out << m.rows() << ' ' << m.cols() << '\n';
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            if (c) out << ' ';
            out << format_g17(m(r, c));
        }
        out << '\n';
    }
}

Matrix read_matrix(std::istream& in) {
    Index rows = -1, cols = -1;
    if (!(in >> rows >> cols) || rows < 0 || cols < 0) {
        throw IoError("matrix file: bad header, expected \"rows cols\"");
    }
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) {
            double v;
            if (!(in >> v)) {
                throw IoError("matrix file: truncated at entry (" + std::to_string(r) + "," +
                              std::to_string(c) + ")");
            }
            if (!std::isfinite(v)) {
                throw IoError("matrix file: non-finite entry at (" + std::to_string(r) + "," +
                              std::to_string(c) + ")");
            }
            m(r, c) = v;
        }
    }
    return m;
}

void save_matrix(const std::string& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_matrix(out, m);
    if (!out) throw IoError("write failed: " + path);
}

Matrix load_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return read_matrix(in);
}

void write_tensor(std::ostream& out, const Tensor3& t) {
    out << t.dim(0) << ' ' << t.dim(1) << ' ' << t.dim(2) << '\n';
    write_matrix(out, t.mode1());
}

Tensor3 read_tensor(std::istream& in) {
    Index i = -1, j = -1, k = -1;
    if (!(in >> i >> j >> k) || i < 0 || j < 0 || k < 0) {
        throw IoError("tensor file: bad header, expected \"I J K\"");
    }
    Matrix m = read_matrix(in);
    if (m.rows() != i || m.cols() != j * k) {
        throw IoError("tensor file: unfolding shape does not match header dims");
    }
    return Tensor3::from_mode1(std::move(m), i, j, k);
}

void save_tensor(const std::string& path, const Tensor3& t) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_tensor(out, t);
    if (!out) throw IoError("write failed: " + path);
}

Tensor3 load_tensor(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return read_tensor(in);
}

}  // namespace ibprox
