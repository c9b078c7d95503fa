#pragma once

#include <stdexcept>
#include <vector>

#include "spectralnet/tensor.hpp"

namespace spectralnet {

// SGD with classical momentum:
//   v <- momentum * v - lr * grad
//   w <- w + v
// One zero-initialized velocity buffer per parameter.
class SgdMomentum {
   public:
    SgdMomentum(std::vector<Tensor> params, double learning_rate, double momentum)
        : params_(std::move(params)), lr_(learning_rate), momentum_(momentum) {
        // lr 0 is allowed as an explicit null update
        if (lr_ < 0.0) throw std::invalid_argument("SgdMomentum: learning rate must be >= 0");
        if (momentum_ < 0.0 || momentum_ >= 1.0)
            throw std::invalid_argument("SgdMomentum: momentum must be in [0,1)");
        velocity_.reserve(params_.size());
        for (const Tensor& p : params_) velocity_.emplace_back(p.size(), 0.0);
    }

    void step() {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Tensor& p = params_[i];
            if (!p.has_grad())
                throw std::logic_error("SgdMomentum: parameter " + std::to_string(i) +
                                       " has no gradient");
            const std::vector<double>& grad = p.grad();
            std::vector<double>& v = velocity_[i];
            double* w = p.data();
            for (std::size_t j = 0; j < v.size(); ++j) {
                v[j] = momentum_ * v[j] - lr_ * grad[j];
                w[j] += v[j];
            }
        }
    }

    void zero_grad() {
        for (Tensor& p : params_) p.zero_grad();
    }

    double learning_rate() const { return lr_; }
    double momentum() const { return momentum_; }

   private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> velocity_;
    double lr_;
    double momentum_;
};

}  // namespace spectralnet
