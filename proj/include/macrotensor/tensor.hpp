#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace macrotensor {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// Observation mask, true = observed.
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct Dims {
    std::size_t I = 0;
    std::size_t J = 0;
    std::size_t K = 0;

    std::size_t size() const { return I * J * K; }
    std::size_t slice() const { return J * K; }
    friend bool operator==(const Dims&, const Dims&) = default;
};

/// Dense I x J x K array with an explicit observation mask.
///
/// Storage is a single buffer with i outermost and, inside a slice, j fastest:
/// offset(i, j, k) = i*J*K + k*J + j. Row i of the buffer is therefore row i
/// of the mode-1 unfolding. Unobserved cells hold NaN and are never read by
/// arithmetic code, which always branches on the mask.
class Tensor3 {
public:
    Tensor3() = default;
    /// All cells observed and zero.
    explicit Tensor3(Dims dims);
    /// Throws std::invalid_argument on size mismatch or a zero dimension.
    Tensor3(Dims dims, std::vector<double> values, std::vector<std::uint8_t> mask);

    const Dims& dims() const { return dims_; }
    std::size_t size() const { return values_.size(); }

    std::size_t offset(std::size_t i, std::size_t j, std::size_t k) const {
        return i * dims_.J * dims_.K + k * dims_.J + j;
    }

    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return values_[offset(i, j, k)];
    }
    bool observed(std::size_t i, std::size_t j, std::size_t k) const {
        return mask_[offset(i, j, k)] != 0;
    }
    bool observed_at(std::size_t off) const { return mask_[off] != 0; }
    double value_at(std::size_t off) const { return values_[off]; }

    void set(std::size_t i, std::size_t j, std::size_t k, double v);
    void set_missing(std::size_t i, std::size_t j, std::size_t k);
    void set_at(std::size_t off, double v);
    void set_missing_at(std::size_t off);

    std::size_t count_observed() const;
    bool complete() const { return count_observed() == size(); }

    const std::vector<double>& values() const { return values_; }
    const std::vector<std::uint8_t>& mask() const { return mask_; }

    friend bool operator==(const Tensor3& a, const Tensor3& b);

    static constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

private:
    Dims dims_{};
    std::vector<double> values_;
    std::vector<std::uint8_t> mask_;
};

/// Fitted trilinear model. Columns of B and C have unit norm and their
/// largest-magnitude element positive; scale and sign live in A.
struct CpModel {
    Matrix A;
    Matrix B;
    Matrix C;

    std::size_t rank() const { return static_cast<std::size_t>(B.cols()); }
};

/// Rescales the columns of B and C to the CpModel convention, pushing the
/// scale into A. The reconstruction A (C kr B)' is unchanged.
void normalize(CpModel& model);

}  // namespace macrotensor
