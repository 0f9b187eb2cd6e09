#ifndef CQR_TYPES_HPP
#define CQR_TYPES_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cqr {

/// Row-major feature matrix: one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
/// A single feature vector, borrowed from a Matrix row or a standalone RowVectorXd.
using Row = Eigen::Ref<const Eigen::RowVectorXd>;

enum class ErrorCode {
  invalid_argument,
  empty_sample,
  singular_system,
  diverged,
  zero_scale,
  quantile_crossing,
  file_not_found,
  target_column_missing,
  no_usable_rows,
  unwritable_path,
  parse_error,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Feature matrix and response with a consistent row count.
struct Dataset {
  Matrix X;
  Vector y;

  Dataset() = default;
  Dataset(Matrix features, Vector response) : X(std::move(features)), y(std::move(response)) {
    if (X.rows() != y.size())
      throw Error(ErrorCode::invalid_argument, "feature/response row count mismatch");
  }

  std::size_t rows() const { return static_cast<std::size_t>(y.size()); }
  std::size_t cols() const { return static_cast<std::size_t>(X.cols()); }

  Dataset subset(std::span<const std::size_t> idx) const {
    Matrix sx(static_cast<Eigen::Index>(idx.size()), X.cols());
    Vector sy(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(idx[i]);
      sx.row(static_cast<Eigen::Index>(i)) = X.row(r);
      sy(static_cast<Eigen::Index>(i)) = y(r);
    }
    return Dataset(std::move(sx), std::move(sy));
  }
};

/// SplitMix64 finaliser; used to derive independent child seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (counter + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace cqr

#endif  // CQR_TYPES_HPP
