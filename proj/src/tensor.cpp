#include "macrotensor/tensor.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace macrotensor {

Tensor3::Tensor3(Dims dims)
    : dims_(dims), values_(dims.size(), 0.0), mask_(dims.size(), 1) {
    if (dims.I == 0 || dims.J == 0 || dims.K == 0) {
        throw std::invalid_argument("Tensor3: dimensions must be positive");
    }
}

Tensor3::Tensor3(Dims dims, std::vector<double> values, std::vector<std::uint8_t> mask)
    : dims_(dims), values_(std::move(values)), mask_(std::move(mask)) {
    if (dims.I == 0 || dims.J == 0 || dims.K == 0) {
        throw std::invalid_argument("Tensor3: dimensions must be positive");
    }
    if (values_.size() != dims.size() || mask_.size() != dims.size()) {
        throw std::invalid_argument("Tensor3: expected " + std::to_string(dims.size()) +
                                    " values and mask entries");
    }
    for (std::size_t n = 0; n < values_.size(); ++n) {
        if (mask_[n] == 0) {
            values_[n] = kMissing;
        } else {
            mask_[n] = 1;
        }
    }
}

void Tensor3::set(std::size_t i, std::size_t j, std::size_t k, double v) {
    set_at(offset(i, j, k), v);
}

void Tensor3::set_missing(std::size_t i, std::size_t j, std::size_t k) {
    set_missing_at(offset(i, j, k));
}

void Tensor3::set_at(std::size_t off, double v) {
    values_[off] = v;
    mask_[off] = 1;
}

void Tensor3::set_missing_at(std::size_t off) {
    values_[off] = kMissing;
    mask_[off] = 0;
}

std::size_t Tensor3::count_observed() const {
    std::size_t n = 0;
    for (auto m : mask_) n += m;
    return n;
}

bool operator==(const Tensor3& a, const Tensor3& b) {
    if (!(a.dims_ == b.dims_) || a.mask_ != b.mask_) return false;
    for (std::size_t n = 0; n < a.values_.size(); ++n) {
        if (a.mask_[n] == 0) continue;
        if (std::memcmp(&a.values_[n], &b.values_[n], sizeof(double)) != 0) return false;
    }
    return true;
}

namespace {

void normalize_columns(Matrix& loadings, Matrix& scores) {
    for (Eigen::Index f = 0; f < loadings.cols(); ++f) {
        double norm = loadings.col(f).norm();
        if (norm == 0.0 || !std::isfinite(norm)) continue;
        Eigen::Index arg = 0;
        loadings.col(f).cwiseAbs().maxCoeff(&arg);
        double s = loadings(arg, f) < 0.0 ? -norm : norm;
        loadings.col(f) /= s;
        scores.col(f) *= s;
    }
}

}  // namespace

void normalize(CpModel& model) {
    normalize_columns(model.B, model.A);
    normalize_columns(model.C, model.A);
}

}  // namespace macrotensor
