#include "tenfact/tensor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <tuple>

#include <fmt/format.h>

#include "tenfact/error.hpp"

namespace tenfact {

namespace {

void check_mode(int mode) {
    if (mode < 1 || mode > 3) throw InvalidArgument(fmt::format("invalid mode {} (expected 1, 2 or 3)", mode));
}

/// Row counts the (P, Q) arguments of an MTTKRP must have for `mode`.
std::pair<Index, Index> mttkrp_operand_rows(Dims d, int mode) {
    switch (mode) {
        case 1: return {d.d2, d.d3};
        case 2: return {d.d1, d.d3};
        default: return {d.d1, d.d2};
    }
}

void check_mttkrp_args(Dims d, int mode, const Matrix& P, const Matrix& Q) {
    check_mode(mode);
    const auto [rp, rq] = mttkrp_operand_rows(d, mode);
    if (P.rows() != rp || Q.rows() != rq || P.cols() != Q.cols()) {
        throw InvalidArgument(fmt::format("mttkrp mode {}: operands {}x{} and {}x{} do not match tensor {}x{}x{}",
                                          mode, P.rows(), P.cols(), Q.rows(), Q.cols(), d.d1, d.d2, d.d3));
    }
}

void check_vectors(Dims d, const Vector& a, const Vector& b, const Vector& c) {
    if (a.size() != d.d1 || b.size() != d.d2 || c.size() != d.d3) {
        throw InvalidArgument(fmt::format("contract3: vector lengths ({}, {}, {}) do not match tensor {}x{}x{}",
                                          a.size(), b.size(), c.size(), d.d1, d.d2, d.d3));
    }
}

void check_model_dims(Dims d, const CpModel& m) {
    if (m.dims() != d) {
        throw InvalidArgument(fmt::format("model dims {}x{}x{} do not match tensor {}x{}x{}", m.dims().d1,
                                          m.dims().d2, m.dims().d3, d.d1, d.d2, d.d3));
    }
}

void check_dims(Dims d) {
    if (d.d1 <= 0 || d.d2 <= 0 || d.d3 <= 0) {
        throw InvalidArgument(fmt::format("tensor dimensions must be positive, got {}x{}x{}", d.d1, d.d2, d.d3));
    }
}

/// Frontal reconstruction of slice i as a d3 x d2 column-major block, which
/// shares its memory layout with the row-major tensor slice.
Matrix reconstruct_slice(const CpModel& m, Index i) {
    const Vector scale = m.weights.cwiseProduct(m.A.row(i).transpose());
    return m.C * scale.asDiagonal() * m.B.transpose();
}

}  // namespace

Index Dims::operator[](int mode) const {
    check_mode(mode);
    return mode == 1 ? d1 : (mode == 2 ? d2 : d3);
}

// ---------------------------------------------------------------- CpModel

const Matrix& CpModel::factor(int mode) const {
    check_mode(mode);
    return mode == 1 ? A : (mode == 2 ? B : C);
}

void CpModel::validate(double tol) const {
    const Index k = rank();
    if (A.cols() != k || B.cols() != k || C.cols() != k) {
        throw InvalidArgument(fmt::format("CP model: {} weights but factor column counts {}, {}, {}", k, A.cols(),
                                          B.cols(), C.cols()));
    }
    if (!weights.allFinite() || !A.allFinite() || !B.allFinite() || !C.allFinite()) {
        throw InvalidArgument("CP model contains non-finite values");
    }
    for (const Matrix* f : {&A, &B, &C}) {
        for (Index r = 0; r < k; ++r) {
            const double n = f->col(r).norm();
            if (std::abs(n - 1.0) > tol) {
                throw InvalidArgument(fmt::format("CP model column {} has norm {} (expected 1)", r, n));
            }
        }
    }
}

void CpModel::canonicalize() {
    for (Index r = 0; r < rank(); ++r) {
        if (weights[r] < 0.0) {
            weights[r] = -weights[r];
            C.col(r) *= -1.0;
        }
        for (Index i = 0; i < A.rows(); ++i) {
            if (A(i, r) != 0.0) {
                if (A(i, r) < 0.0) {
                    A.col(r) *= -1.0;
                    B.col(r) *= -1.0;
                }
                break;
            }
        }
    }
}

CpModel CpModel::from_factors(const Vector& weights, Matrix A, Matrix B, Matrix C) {
    CpModel m{weights, std::move(A), std::move(B), std::move(C)};
    const Index k = m.weights.size();
    if (m.A.cols() != k || m.B.cols() != k || m.C.cols() != k) {
        throw InvalidArgument("from_factors: column counts differ from the number of weights");
    }
    for (Index r = 0; r < k; ++r) {
        double scale = m.weights[r];
        bool degenerate = false;
        for (Matrix* f : {&m.A, &m.B, &m.C}) {
            const double n = f->col(r).norm();
            if (n == 0.0 || !std::isfinite(n)) {
                degenerate = true;
            } else {
                f->col(r) /= n;
                scale *= n;
            }
        }
        if (degenerate) {
            scale = 0.0;
            for (Matrix* f : {&m.A, &m.B, &m.C}) {
                if (f->col(r).norm() == 0.0 || !f->col(r).allFinite()) {
                    f->col(r).setZero();
                    f->col(r)[0] = 1.0;
                }
            }
        }
        m.weights[r] = scale;
    }
    return m;
}

CpModel CpModel::zeros(Dims dims, Index k) {
    CpModel m;
    m.weights = Vector::Zero(k);
    m.A = Matrix::Zero(dims.d1, k);
    m.B = Matrix::Zero(dims.d2, k);
    m.C = Matrix::Zero(dims.d3, k);
    if (k > 0) {
        m.A.row(0).setOnes();
        m.B.row(0).setOnes();
        m.C.row(0).setOnes();
    }
    return m;
}

// ---------------------------------------------------------------- DenseTensor3

DenseTensor3::DenseTensor3(Dims dims) : dims_(dims), data_(static_cast<std::size_t>(dims.size()), 0.0) {
    check_dims(dims);
}

DenseTensor3::DenseTensor3(Dims dims, std::vector<double> data) : dims_(dims), data_(std::move(data)) {
    check_dims(dims);
    if (static_cast<Index>(data_.size()) != dims.size()) {
        throw InvalidArgument(
            fmt::format("dense tensor: {} values supplied for {}x{}x{}", data_.size(), dims.d1, dims.d2, dims.d3));
    }
    if (!std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); })) {
        throw InvalidArgument("dense tensor contains non-finite values");
    }
}

DenseTensor3 DenseTensor3::from_function(Dims dims, const std::function<double(Index, Index, Index)>& f) {
    check_dims(dims);
    std::vector<double> data(static_cast<std::size_t>(dims.size()));
    std::size_t n = 0;
    for (Index i = 0; i < dims.d1; ++i)
        for (Index j = 0; j < dims.d2; ++j)
            for (Index k = 0; k < dims.d3; ++k) data[n++] = f(i, j, k);
    return DenseTensor3(dims, std::move(data));
}

DenseTensor3::RowMajorMap DenseTensor3::as_matrix() const {
    return RowMajorMap(data_.data(), dims_.d1 * dims_.d2, dims_.d3);
}

Matrix DenseTensor3::mttkrp(int mode, const Matrix& P, const Matrix& Q) const {
    check_mttkrp_args(dims_, mode, P, Q);
    const Index k = P.cols();
    const auto M = as_matrix();
    if (mode == 3) {
        // rows of khatri_rao(A, B) are indexed i*d2 + j, the row order of M.
        return M.transpose() * khatri_rao(P, Q);
    }
    const Matrix W = M * Q;  // (d1*d2) x k, row i*d2 + j
    Matrix out(mode == 1 ? dims_.d1 : dims_.d2, k);
    for (Index r = 0; r < k; ++r) {
        Eigen::Map<const Matrix> Wr(W.col(r).data(), dims_.d2, dims_.d1);
        if (mode == 1) {
            out.col(r).noalias() = Wr.transpose() * P.col(r);
        } else {
            out.col(r).noalias() = Wr * P.col(r);
        }
    }
    return out;
}

double DenseTensor3::contract3(const Vector& a, const Vector& b, const Vector& c) const {
    check_vectors(dims_, a, b, c);
    const Vector w = as_matrix() * c;
    Eigen::Map<const Matrix> W(w.data(), dims_.d2, dims_.d1);
    return a.dot(W.transpose() * b);
}

Matrix DenseTensor3::contract_mode3(const Vector& v) const {
    if (v.size() != dims_.d3) {
        throw InvalidArgument(fmt::format("contract_mode3: vector length {} != d3 = {}", v.size(), dims_.d3));
    }
    const Vector w = as_matrix() * v;
    return Eigen::Map<const Matrix>(w.data(), dims_.d2, dims_.d1).transpose();
}

double DenseTensor3::frobenius_norm() const {
    return Eigen::Map<const Vector>(data_.data(), static_cast<Index>(data_.size())).norm();
}

double DenseTensor3::residual_norm(const CpModel& model) const {
    check_model_dims(dims_, model);
    const Index slice = dims_.d2 * dims_.d3;
    double acc = 0.0;
    for (Index i = 0; i < dims_.d1; ++i) {
        Eigen::Map<const Matrix> S(data_.data() + i * slice, dims_.d3, dims_.d2);
        acc += (S - reconstruct_slice(model, i)).squaredNorm();
    }
    return std::sqrt(acc);
}

// ---------------------------------------------------------------- SparseTensor3

SparseTensor3::SparseTensor3(Dims dims, std::vector<Entry> entries) : dims_(dims) {
    check_dims(dims);
    for (const auto& e : entries) {
        if (e.i < 0 || e.i >= dims.d1 || e.j < 0 || e.j >= dims.d2 || e.k < 0 || e.k >= dims.d3) {
            throw InvalidArgument(
                fmt::format("sparse entry ({}, {}, {}) out of range {}x{}x{}", e.i, e.j, e.k, dims.d1, dims.d2, dims.d3));
        }
        if (!std::isfinite(e.value)) throw InvalidArgument("sparse tensor contains non-finite values");
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
        return std::tie(x.i, x.j, x.k) < std::tie(y.i, y.j, y.k);
    });
    entries_.reserve(entries.size());
    for (const auto& e : entries) {
        if (!entries_.empty() && entries_.back().i == e.i && entries_.back().j == e.j && entries_.back().k == e.k) {
            entries_.back().value += e.value;
        } else {
            entries_.push_back(e);
        }
    }
    std::erase_if(entries_, [](const Entry& e) { return e.value == 0.0; });
}

double SparseTensor3::at(Index i, Index j, Index k) const {
    const Entry key{i, j, k, 0.0};
    auto it = std::lower_bound(entries_.begin(), entries_.end(), key, [](const Entry& x, const Entry& y) {
        return std::tie(x.i, x.j, x.k) < std::tie(y.i, y.j, y.k);
    });
    if (it != entries_.end() && it->i == i && it->j == j && it->k == k) return it->value;
    return 0.0;
}

Matrix SparseTensor3::mttkrp(int mode, const Matrix& P, const Matrix& Q) const {
    check_mttkrp_args(dims_, mode, P, Q);
    // Transposed copies make each factor row a contiguous column.
    const Matrix Pt = P.transpose();
    const Matrix Qt = Q.transpose();
    Matrix out = Matrix::Zero(P.cols(), dims_[mode]);
    for (const auto& e : entries_) {
        switch (mode) {
            case 1: out.col(e.i) += e.value * Pt.col(e.j).cwiseProduct(Qt.col(e.k)); break;
            case 2: out.col(e.j) += e.value * Pt.col(e.i).cwiseProduct(Qt.col(e.k)); break;
            default: out.col(e.k) += e.value * Pt.col(e.i).cwiseProduct(Qt.col(e.j)); break;
        }
    }
    return out.transpose();
}

double SparseTensor3::contract3(const Vector& a, const Vector& b, const Vector& c) const {
    check_vectors(dims_, a, b, c);
    double acc = 0.0;
    for (const auto& e : entries_) acc += e.value * a[e.i] * b[e.j] * c[e.k];
    return acc;
}

Matrix SparseTensor3::contract_mode3(const Vector& v) const {
    if (v.size() != dims_.d3) {
        throw InvalidArgument(fmt::format("contract_mode3: vector length {} != d3 = {}", v.size(), dims_.d3));
    }
    Matrix out = Matrix::Zero(dims_.d1, dims_.d2);
    for (const auto& e : entries_) out(e.i, e.j) += e.value * v[e.k];
    return out;
}

double SparseTensor3::frobenius_norm() const {
    double acc = 0.0;
    for (const auto& e : entries_) acc += e.value * e.value;
    return std::sqrt(acc);
}

double SparseTensor3::residual_norm(const CpModel& model) const {
    check_model_dims(dims_, model);
    // ||T||^2 - 2<T, M> + ||M||^2 without materializing M.
    const Matrix At = model.A.transpose();
    const Matrix Bt = model.B.transpose();
    const Matrix Ct = model.C.transpose();
    double inner = 0.0;
    double tnorm2 = 0.0;
    for (const auto& e : entries_) {
        inner += e.value * (model.weights.array() * At.col(e.i).array() * Bt.col(e.j).array() * Ct.col(e.k).array()).sum();
        tnorm2 += e.value * e.value;
    }
    const Matrix G = (model.A.transpose() * model.A).cwiseProduct(model.B.transpose() * model.B)
                         .cwiseProduct(model.C.transpose() * model.C);
    const double mnorm2 = model.weights.dot(G * model.weights);
    return std::sqrt(std::max(0.0, tnorm2 - 2.0 * inner + mnorm2));
}

// ---------------------------------------------------------------- symmetric sparse

namespace {

using Coord = std::array<Index, 3>;

/// Distinct permutations of a coordinate; returns how many were written.
int permutations(const SparseTensor3::Entry& e, std::array<Coord, 6>& out) {
    Coord c{e.i, e.j, e.k};
    std::sort(c.begin(), c.end());
    int n = 0;
    do {
        out[static_cast<std::size_t>(n++)] = c;
    } while (std::next_permutation(c.begin(), c.end()));
    return n;
}

}  // namespace

SymmetricSparseTensor3::SymmetricSparseTensor3(Index d, std::vector<Entry> entries) : d_(d) {
    // d = 0 is allowed here: an empty corpus yields an empty tensor.
    if (d < 0) throw InvalidArgument(fmt::format("symmetric tensor dimension must be non-negative, got {}", d));
    if (entries.empty()) return;
    for (auto& e : entries) {
        if (e.i < 0 || e.i >= d || e.j < 0 || e.j >= d || e.k < 0 || e.k >= d) {
            throw InvalidArgument(fmt::format("symmetric entry ({}, {}, {}) out of range {}", e.i, e.j, e.k, d));
        }
        if (!std::isfinite(e.value)) throw InvalidArgument("symmetric tensor contains non-finite values");
        Coord c{e.i, e.j, e.k};
        std::sort(c.begin(), c.end());
        e.i = c[0];
        e.j = c[1];
        e.k = c[2];
    }
    // Reuse the COO canonicalization (sort, merge, drop zeros).
    const SparseTensor3 merged({d, d, d}, std::move(entries));
    entries_.assign(merged.entries().begin(), merged.entries().end());
}

std::size_t SymmetricSparseTensor3::logical_nnz() const {
    std::array<Coord, 6> perms;
    std::size_t n = 0;
    for (const auto& e : entries_) n += static_cast<std::size_t>(permutations(e, perms));
    return n;
}

double SymmetricSparseTensor3::at(Index i, Index j, Index k) const {
    Coord c{i, j, k};
    std::sort(c.begin(), c.end());
    const Entry key{c[0], c[1], c[2], 0.0};
    auto it = std::lower_bound(entries_.begin(), entries_.end(), key, [](const Entry& x, const Entry& y) {
        return std::tie(x.i, x.j, x.k) < std::tie(y.i, y.j, y.k);
    });
    if (it != entries_.end() && it->i == key.i && it->j == key.j && it->k == key.k) return it->value;
    return 0.0;
}

SparseTensor3 SymmetricSparseTensor3::expand() const {
    std::vector<Entry> out;
    out.reserve(logical_nnz());
    std::array<Coord, 6> perms;
    for (const auto& e : entries_) {
        const int n = permutations(e, perms);
        for (int p = 0; p < n; ++p) out.push_back({perms[p][0], perms[p][1], perms[p][2], e.value});
    }
    return SparseTensor3(dims(), std::move(out));
}

Matrix SymmetricSparseTensor3::mttkrp(int mode, const Matrix& P, const Matrix& Q) const {
    check_mttkrp_args(dims(), mode, P, Q);
    const Matrix Pt = P.transpose();
    const Matrix Qt = Q.transpose();
    // Output, P and Q coordinate slots for this mode.
    const int o = mode - 1;
    const int a = mode == 1 ? 1 : 0;
    const int b = mode == 3 ? 1 : 2;
    Matrix out = Matrix::Zero(P.cols(), d_);
    std::array<Coord, 6> perms;
    for (const auto& e : entries_) {
        const int n = permutations(e, perms);
        for (int p = 0; p < n; ++p) {
            const Coord& c = perms[p];
            out.col(c[o]) += e.value * Pt.col(c[a]).cwiseProduct(Qt.col(c[b]));
        }
    }
    return out.transpose();
}

double SymmetricSparseTensor3::contract3(const Vector& a, const Vector& b, const Vector& c) const {
    check_vectors(dims(), a, b, c);
    std::array<Coord, 6> perms;
    double acc = 0.0;
    for (const auto& e : entries_) {
        const int n = permutations(e, perms);
        for (int p = 0; p < n; ++p) acc += e.value * a[perms[p][0]] * b[perms[p][1]] * c[perms[p][2]];
    }
    return acc;
}

Matrix SymmetricSparseTensor3::contract_mode3(const Vector& v) const {
    if (v.size() != d_) {
        throw InvalidArgument(fmt::format("contract_mode3: vector length {} != d3 = {}", v.size(), d_));
    }
    Matrix out = Matrix::Zero(d_, d_);
    std::array<Coord, 6> perms;
    for (const auto& e : entries_) {
        const int n = permutations(e, perms);
        for (int p = 0; p < n; ++p) out(perms[p][0], perms[p][1]) += e.value * v[perms[p][2]];
    }
    return out;
}

double SymmetricSparseTensor3::frobenius_norm() const {
    std::array<Coord, 6> perms;
    double acc = 0.0;
    for (const auto& e : entries_) acc += permutations(e, perms) * e.value * e.value;
    return std::sqrt(acc);
}

double SymmetricSparseTensor3::residual_norm(const CpModel& model) const {
    check_model_dims(dims(), model);
    const Matrix At = model.A.transpose();
    const Matrix Bt = model.B.transpose();
    const Matrix Ct = model.C.transpose();
    std::array<Coord, 6> perms;
    double inner = 0.0;
    double tnorm2 = 0.0;
    for (const auto& e : entries_) {
        const int n = permutations(e, perms);
        for (int p = 0; p < n; ++p) {
            const Coord& c = perms[p];
            inner += e.value *
                     (model.weights.array() * At.col(c[0]).array() * Bt.col(c[1]).array() * Ct.col(c[2]).array()).sum();
        }
        tnorm2 += n * e.value * e.value;
    }
    const Matrix G = (model.A.transpose() * model.A).cwiseProduct(model.B.transpose() * model.B)
                         .cwiseProduct(model.C.transpose() * model.C);
    const double mnorm2 = model.weights.dot(G * model.weights);
    return std::sqrt(std::max(0.0, tnorm2 - 2.0 * inner + mnorm2));
}

// ---------------------------------------------------------------- free functions

DenseTensor3 densify(const SparseTensor3& s) {
    const Dims d = s.dims();
    std::vector<double> data(static_cast<std::size_t>(d.size()), 0.0);
    for (const auto& e : s.entries()) data[static_cast<std::size_t>((e.i * d.d2 + e.j) * d.d3 + e.k)] = e.value;
    return DenseTensor3(d, std::move(data));
}

DenseTensor3 to_dense(const Tensor3& t) {
    if (const auto* d = dynamic_cast<const DenseTensor3*>(&t)) return *d;
    if (const auto* s = dynamic_cast<const SparseTensor3*>(&t)) return densify(*s);
    if (const auto* y = dynamic_cast<const SymmetricSparseTensor3*>(&t)) return densify(y->expand());
    throw InvalidArgument("to_dense: unsupported tensor type");
}

SparseTensor3 sparsify(const DenseTensor3& t) {
    const Dims d = t.dims();
    std::vector<SparseTensor3::Entry> entries;
    for (Index i = 0; i < d.d1; ++i)
        for (Index j = 0; j < d.d2; ++j)
            for (Index k = 0; k < d.d3; ++k)
                if (const double v = t(i, j, k); v != 0.0) entries.push_back({i, j, k, v});
    return SparseTensor3(d, std::move(entries));
}

namespace {

std::pair<Index, Index> unfold_index(Dims d, int mode, Index i, Index j, Index k) {
    switch (mode) {
        case 1: return {i, j + k * d.d2};
        case 2: return {j, i + k * d.d1};
        default: return {k, i + j * d.d1};
    }
}

}  // namespace

Matrix matricize(const DenseTensor3& t, int mode) {
    check_mode(mode);
    const Dims d = t.dims();
    Matrix out(d[mode], d.size() / d[mode]);
    for (Index i = 0; i < d.d1; ++i)
        for (Index j = 0; j < d.d2; ++j)
            for (Index k = 0; k < d.d3; ++k) {
                const auto [row, col] = unfold_index(d, mode, i, j, k);
                out(row, col) = t(i, j, k);
            }
    return out;
}

SparseMatrix matricize(const SparseTensor3& t, int mode) {
    check_mode(mode);
    const Dims d = t.dims();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(t.nnz());
    for (const auto& e : t.entries()) {
        const auto [row, col] = unfold_index(d, mode, e.i, e.j, e.k);
        trips.emplace_back(static_cast<int>(row), static_cast<int>(col), e.value);
    }
    SparseMatrix out(d[mode], d.size() / d[mode]);
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

Matrix khatri_rao(const Matrix& A, const Matrix& B) {
    if (A.cols() != B.cols()) {
        throw InvalidArgument(fmt::format("khatri_rao: column counts {} and {} differ", A.cols(), B.cols()));
    }
    const Index ra = A.rows();
    const Index rb = B.rows();
    Matrix out(ra * rb, A.cols());
    for (Index r = 0; r < A.cols(); ++r) {
        for (Index ia = 0; ia < ra; ++ia) out.col(r).segment(ia * rb, rb) = A(ia, r) * B.col(r);
    }
    return out;
}

double contract3(const Tensor3& t, const Vector& a, const Vector& b, const Vector& c) {
    return t.contract3(a, b, c);
}

Matrix contract_mode3(const Tensor3& t, const Vector& v) { return t.contract_mode3(v); }

DenseTensor3 cp_reconstruct(const CpModel& model) {
    const Dims d = model.dims();
    std::vector<double> data(static_cast<std::size_t>(d.size()), 0.0);
    const Index slice = d.d2 * d.d3;
    if (model.rank() > 0) {
        for (Index i = 0; i < d.d1; ++i) {
            Eigen::Map<Matrix>(data.data() + i * slice, d.d3, d.d2) = reconstruct_slice(model, i);
        }
    }
    return DenseTensor3(d, std::move(data));
}

double residual_ratio(const Tensor3& t, const CpModel& model) {
    const double tn = t.frobenius_norm();
    const double rn = t.residual_norm(model);
    if (tn == 0.0) return rn == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return rn / tn;
}

double incoherence(const FactorMatrix& A) {
    for (Index r = 0; r < A.cols(); ++r) {
        const double n = A.col(r).norm();
        if (std::abs(n - 1.0) > 1e-9) {
            throw InvalidArgument(fmt::format("incoherence: column {} has norm {} (expected unit norm)", r, n));
        }
    }
    if (A.cols() < 2) return 0.0;
    Matrix G = (A.transpose() * A).cwiseAbs();
    G.diagonal().setZero();
    return G.maxCoeff();
}

}  // namespace tenfact
