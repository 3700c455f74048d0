#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace tenfact {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// d x k factor matrix. Unit-norm columns are only required inside CpModel.
using FactorMatrix = Matrix;

struct Dims {
    Index d1 = 0;
    Index d2 = 0;
    Index d3 = 0;

    /// 1-based mode lookup.
    Index operator[](int mode) const;
    Index size() const { return d1 * d2 * d3; }
    friend bool operator==(const Dims&, const Dims&) = default;
};

/// Sum_r w_r A_r (x) B_r (x) C_r with unit-norm factor columns.
struct CpModel {
    Vector weights;
    Matrix A;
    Matrix B;
    Matrix C;

    Index rank() const { return weights.size(); }
    Dims dims() const { return {A.rows(), B.rows(), C.rows()}; }
    const Matrix& factor(int mode) const;

    /// Throws InvalidArgument unless shapes agree, entries are finite and
    /// every column has norm 1 +- tol.
    void validate(double tol = 1e-12) const;

    /// Flips signs so every weight is non-negative and the first nonzero
    /// entry of each A column is positive. The represented tensor is unchanged.
    void canonicalize();

    /// Normalizes raw factor columns, folding their norms into the weights.
    /// Zero columns get weight 0 and a unit e_1 placeholder column.
    static CpModel from_factors(const Vector& weights, Matrix A, Matrix B, Matrix C);

    static CpModel zeros(Dims dims, Index k);
};

/// Read-only third-order tensor. Implementations are immutable and safe to
/// share across threads.
class Tensor3 {
public:
    virtual ~Tensor3() = default;

    virtual Dims dims() const = 0;

    /// T_(mode) (Q (.) P), where (P, Q) are the factors of the two remaining
    /// modes in increasing mode order: (B, C), (A, C) or (A, B).
    virtual Matrix mttkrp(int mode, const Matrix& P, const Matrix& Q) const = 0;

    /// T(a, b, c) = sum_ijk T_ijk a_i b_j c_k.
    virtual double contract3(const Vector& a, const Vector& b, const Vector& c) const = 0;

    /// M_ij = sum_k T_ijk v_k.
    virtual Matrix contract_mode3(const Vector& v) const = 0;

    virtual double frobenius_norm() const = 0;

    /// ||T - reconstruct(model)||_F.
    virtual double residual_norm(const CpModel& model) const = 0;

    virtual bool is_sparse() const = 0;
};

/// Dense d1 x d2 x d3 tensor, row-major: index(i,j,k) = i*d2*d3 + j*d3 + k.
class DenseTensor3 final : public Tensor3 {
public:
    DenseTensor3() = default;
    explicit DenseTensor3(Dims dims);
    DenseTensor3(Dims dims, std::vector<double> data);

    static DenseTensor3 from_function(Dims dims, const std::function<double(Index, Index, Index)>& f);

    Dims dims() const override { return dims_; }
    double operator()(Index i, Index j, Index k) const {
        return data_[static_cast<std::size_t>((i * dims_.d2 + j) * dims_.d3 + k)];
    }
    std::span<const double> data() const { return data_; }

    Matrix mttkrp(int mode, const Matrix& P, const Matrix& Q) const override;
    double contract3(const Vector& a, const Vector& b, const Vector& c) const override;
    Matrix contract_mode3(const Vector& v) const override;
    double frobenius_norm() const override;
    double residual_norm(const CpModel& model) const override;
    bool is_sparse() const override { return false; }

private:
    using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    RowMajorMap as_matrix() const;  // (d1*d2) x d3

    Dims dims_;
    std::vector<double> data_;
};

/// Coordinate-format tensor: sorted by (i,j,k), no duplicates, no stored zeros.
class SparseTensor3 final : public Tensor3 {
public:
    struct Entry {
        Index i;
        Index j;
        Index k;
        double value;
    };

    SparseTensor3() = default;
    explicit SparseTensor3(Dims dims) : dims_(dims) {}
    /// Duplicates are summed; entries that sum to zero are dropped.
    SparseTensor3(Dims dims, std::vector<Entry> entries);

    Dims dims() const override { return dims_; }
    std::span<const Entry> entries() const { return entries_; }
    std::size_t nnz() const { return entries_.size(); }

    /// Stored value or 0.
    double at(Index i, Index j, Index k) const;

    Matrix mttkrp(int mode, const Matrix& P, const Matrix& Q) const override;
    double contract3(const Vector& a, const Vector& b, const Vector& c) const override;
    Matrix contract_mode3(const Vector& v) const override;
    double frobenius_norm() const override;
    double residual_norm(const CpModel& model) const override;
    bool is_sparse() const override { return true; }

private:
    Dims dims_;
    std::vector<Entry> entries_;
};

/// Fully symmetric d x d x d tensor stored once per sorted triple (i <= j <= k).
/// Every permutation of a stored coordinate carries the same value; all
/// kernels expand permutations on the fly.
class SymmetricSparseTensor3 final : public Tensor3 {
public:
    using Entry = SparseTensor3::Entry;

    SymmetricSparseTensor3() = default;
    explicit SymmetricSparseTensor3(Index d) : d_(d) {}
    /// Coordinates are sorted into canonical order, duplicates summed, zeros dropped.
    SymmetricSparseTensor3(Index d, std::vector<Entry> entries);

    Dims dims() const override { return {d_, d_, d_}; }
    std::span<const Entry> entries() const { return entries_; }
    /// Stored (canonical) entries.
    std::size_t nnz() const { return entries_.size(); }
    /// Nonzeros of the expanded tensor.
    std::size_t logical_nnz() const;
    double at(Index i, Index j, Index k) const;
    /// Every permutation written out.
    SparseTensor3 expand() const;

    Matrix mttkrp(int mode, const Matrix& P, const Matrix& Q) const override;
    double contract3(const Vector& a, const Vector& b, const Vector& c) const override;
    Matrix contract_mode3(const Vector& v) const override;
    double frobenius_norm() const override;
    double residual_norm(const CpModel& model) const override;
    bool is_sparse() const override { return true; }

private:
    Index d_ = 0;
    std::vector<Entry> entries_;
};

/// Dense copy of any Tensor3.
DenseTensor3 to_dense(const Tensor3& t);

DenseTensor3 densify(const SparseTensor3& s);
SparseTensor3 sparsify(const DenseTensor3& t);

/// Mode-n unfolding. Column of entry (i,j,k): mode 1 -> j + k*d2,
/// mode 2 -> i + k*d1, mode 3 -> i + j*d1. With this ordering
/// T_(1) = A diag(w) khatri_rao(C, B)^T holds for CP tensors.
Matrix matricize(const DenseTensor3& t, int mode);
SparseMatrix matricize(const SparseTensor3& t, int mode);

/// Column r is a_r (x) b_r flattened with the row index of A varying slowest:
/// row = ia * rows(B) + ib.
Matrix khatri_rao(const Matrix& A, const Matrix& B);

double contract3(const Tensor3& t, const Vector& a, const Vector& b, const Vector& c);
Matrix contract_mode3(const Tensor3& t, const Vector& v);

DenseTensor3 cp_reconstruct(const CpModel& model);

/// ||T - M||_F / ||T||_F. Returns 0 when both vanish and +infinity when only
/// the tensor vanishes.
double residual_ratio(const Tensor3& t, const CpModel& model);

/// max_{i != j} |A_i^T A_j| over unit-norm columns (0 for a single column).
double incoherence(const FactorMatrix& A);

}  // namespace tenfact
