#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <new>
#include <stdexcept>
#include <vector>

namespace rotdiff {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Fixed 64-byte alignment for tensor storage. Eigen's product kernels peel
/// loops based on runtime pointer alignment, so with plain malloc the
/// floating-point summation order (and hence the low bit) can depend on
/// where the heap happened to place a buffer. Pinning every buffer to one
/// alignment makes repeated evaluation bit-identical, which the determinism
/// guarantees rely on.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::size_t kAlign = 64;

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(kAlign)));
  }
  void deallocate(T* p, std::size_t) noexcept {
    ::operator delete(p, std::align_val_t(kAlign));
  }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const {
    return true;
  }
  template <class U>
  bool operator!=(const AlignedAllocator<U>&) const {
    return false;
  }
};

/// Dense row-major 2-D array of doubles: the single value type flowing
/// through the network stack. 64-bit floats keep central-difference gradient
/// checks meaningful.
class Tensor2 {
 public:
  Tensor2() = default;

  Tensor2(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("Tensor2: negative dims");
    data_.assign(static_cast<size_t>(rows) * cols, 0.0);
  }

  static Tensor2 zeros(int rows, int cols) { return Tensor2(rows, cols); }

  static Tensor2 from_rows(std::initializer_list<std::initializer_list<double>> rows);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return data_.empty(); }
  size_t size() const { return data_.size(); }

  double& at(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  Eigen::Map<RowMat> map() { return Eigen::Map<RowMat>(data_.data(), rows_, cols_); }
  Eigen::Map<const RowMat> map() const {
    return Eigen::Map<const RowMat>(data_.data(), rows_, cols_);
  }

  bool same_shape(const Tensor2& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  /// Row <-> 3x3 helpers for the flattened-rotation convention used across
  /// the stack: row-major (r00 r01 r02 r10 ... r22).
  void set_row9(int row, const Eigen::Matrix3d& m) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) at(row, 3 * i + j) = m(i, j);
  }
  Eigen::Matrix3d row9(int row) const {
    Eigen::Matrix3d m;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = at(row, 3 * i + j);
    return m;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double, AlignedAllocator<double>> data_;
};

inline Tensor2 Tensor2::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r == 0 ? 0 : static_cast<int>(rows.begin()->size());
  Tensor2 t(r, c);
  int i = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c) throw std::invalid_argument("Tensor2: ragged rows");
    int j = 0;
    for (double x : row) t.at(i, j++) = x;
    ++i;
  }
  return t;
}

}  // namespace rotdiff
