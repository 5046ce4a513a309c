#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "slotmotion/core/tape.hpp"
#include "slotmotion/core/tensor.hpp"

namespace slotmotion {

template <typename T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    Tensor<T> m; // Adam first moment
    Tensor<T> v; // Adam second moment
};

template <typename T>
class ParamStore {
public:
    int add(const std::string& name, Tensor<T> init) {
        require(index_.find(name) == index_.end(), "duplicate parameter name: " + name);
        Param<T> p;
        p.name = name;
        p.grad = zeros_like(init);
        p.m = zeros_like(init);
        p.v = zeros_like(init);
        p.value = std::move(init);
        params_.push_back(std::move(p));
        int id = static_cast<int>(params_.size()) - 1;
        index_[name] = id;
        return id;
    }

    int find(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? -1 : it->second;
    }

    Param<T>& at(int id) { return params_[static_cast<size_t>(id)]; }
    const Param<T>& at(int id) const { return params_[static_cast<size_t>(id)]; }
    int size() const { return static_cast<int>(params_.size()); }

    void zero_grads() {
        for (auto& p : params_) p.grad.fill(T(0));
    }

    double grad_norm() const {
        double s = 0;
        for (const auto& p : params_)
            for (int64_t i = 0; i < p.grad.numel(); ++i)
                s += static_cast<double>(p.grad[i]) * static_cast<double>(p.grad[i]);
        return std::sqrt(s);
    }

    void clip_grad_norm(double max_norm) {
        if (max_norm <= 0) return;
        double n = grad_norm();
        if (n <= max_norm) return;
        double c = max_norm / n;
        for (auto& p : params_)
            for (int64_t i = 0; i < p.grad.numel(); ++i)
                p.grad[i] = static_cast<T>(p.grad[i] * c);
    }

    // Bias-corrected Adam. step_index counts from 1.
    void adam_step(double lr, double beta1, double beta2, double eps, int64_t step_index) {
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_index));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_index));
        for (auto& p : params_) {
            for (int64_t i = 0; i < p.value.numel(); ++i) {
                const double g = static_cast<double>(p.grad[i]);
                const double m = beta1 * static_cast<double>(p.m[i]) + (1.0 - beta1) * g;
                const double v = beta2 * static_cast<double>(p.v[i]) + (1.0 - beta2) * g * g;
                p.m[i] = static_cast<T>(m);
                p.v[i] = static_cast<T>(v);
                const double mh = m / bc1;
                const double vh = v / bc2;
                p.value[i] = static_cast<T>(static_cast<double>(p.value[i]) -
                                            lr * mh / (std::sqrt(vh) + eps));
            }
        }
    }

private:
    std::vector<Param<T>> params_;
    std::map<std::string, int> index_;
};

// Registers a parameter's current value as a tape leaf and remembers the
// mapping so gradients can be flushed back after backward().
template <typename T>
class TapeBinding {
public:
    explicit TapeBinding(ParamStore<T>& store) : store_(&store) {}

    int use(Tape<T>& tape, int pid) {
        for (const auto& [p, node] : bound_)
            if (p == pid) return node;
        int node = tape.leaf(store_->at(pid).value);
        bound_.emplace_back(pid, node);
        return node;
    }

    void flush_grads(Tape<T>& tape) {
        for (const auto& [pid, node] : bound_) {
            if (!tape.has_grad(node)) continue;
            const Tensor<T>& g = tape.grad(node);
            Tensor<T>& dst = store_->at(pid).grad;
            for (int64_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
        }
    }

private:
    ParamStore<T>* store_;
    std::vector<std::pair<int, int>> bound_;
};

} // namespace slotmotion
