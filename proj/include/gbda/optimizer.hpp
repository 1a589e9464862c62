#pragma once

#include "gbda/autodiff.hpp"
#include "gbda/core.hpp"

#include <cmath>
#include <vector>

namespace gbda {

/// Adaptive-moment (Adam) state for one parameter matrix.
struct OptimizerState {
    Matrix first_moment;
    Matrix second_moment;
    std::size_t step_count = 0;
    double learning_rate = 0.3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    OptimizerState() = default;
    OptimizerState(Eigen::Index rows, Eigen::Index cols, double lr, double b1 = 0.9, double b2 = 0.999,
                   double eps = 1e-8)
        : first_moment(Matrix::Zero(rows, cols)), second_moment(Matrix::Zero(rows, cols)), learning_rate(lr),
          beta1(b1), beta2(b2), epsilon(eps)
    {
    }

    void apply(Matrix& value, const Matrix& grad)
    {
        ++step_count;
        first_moment = beta1 * first_moment + (1.0 - beta1) * grad;
        second_moment = beta2 * second_moment + (1.0 - beta2) * grad.cwiseProduct(grad);
        double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        value.array() -= learning_rate * (first_moment.array() / c1)
                         / ((second_moment.array() / c2).sqrt() + epsilon);
    }
};

/// Adam over a set of trainable tape leaves (used for model training).
class ParameterAdam {
public:
    ParameterAdam(std::vector<ad::Var> params, double lr) : params_(std::move(params))
    {
        for (const auto& p : params_) {
            states_.emplace_back(p.rows(), p.cols(), lr);
        }
    }

    void zero_grad()
    {
        for (auto& p : params_) {
            p.zero_grad();
        }
    }

    void step()
    {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            if (params_[i].grad().size() != 0) {
                states_[i].apply(params_[i].mutable_value(), params_[i].grad());
            }
        }
    }

private:
    std::vector<ad::Var> params_;
    std::vector<OptimizerState> states_;
};

} // namespace gbda
