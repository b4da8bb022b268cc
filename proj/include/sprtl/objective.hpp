#pragma once

#include <Eigen/Dense>

namespace sprtl {

// A smooth objective to be minimized, presented as value + gradient.
// Implementations must be safe for concurrent read-only use: no internal
// state may mutate during value or gradient evaluation.
class SmoothObjective {
public:
    virtual ~SmoothObjective() = default;

    virtual int dimension() const = 0;
    virtual double value(const Eigen::VectorXd& point) const = 0;

    // Returns the value and fills `gradient` (resized as needed).
    virtual double value_and_gradient(const Eigen::VectorXd& point,
                                      Eigen::VectorXd& gradient) const = 0;
};

// Evaluates a base objective at (offset + point). Used by the debias step,
// where the path variable is a correction on top of a fixed fusion estimate.
class OffsetObjective final : public SmoothObjective {
public:
    OffsetObjective(const SmoothObjective& base, Eigen::VectorXd offset)
        : base_(&base), offset_(std::move(offset)) {}

    int dimension() const override { return base_->dimension(); }

    double value(const Eigen::VectorXd& point) const override {
        return base_->value(offset_ + point);
    }

    double value_and_gradient(const Eigen::VectorXd& point,
                              Eigen::VectorXd& gradient) const override {
        return base_->value_and_gradient(offset_ + point, gradient);
    }

private:
    const SmoothObjective* base_;
    Eigen::VectorXd offset_;
};

}  // namespace sprtl
