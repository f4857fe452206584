#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "bevloop/common/error.hpp"

namespace bevloop::gen {

// Dense row-major tensor. Templated on the scalar so the training stack can
// run float while gradient verification runs the identical code in double.
template <typename S>
struct Tensor {
    std::vector<int> shape;
    std::vector<S> data;

    Tensor() = default;
    Tensor(std::vector<int> shp, std::vector<S> values) : shape(std::move(shp)), data(std::move(values)) {
        if (data.size() != count(shape)) throw InvalidArgument("tensor data does not match shape");
    }

    static size_t count(const std::vector<int>& shp) {
        size_t n = 1;
        for (int d : shp) {
            if (d <= 0) throw InvalidArgument("tensor dims must be positive");
            n *= static_cast<size_t>(d);
        }
        return n;
    }

    static Tensor zeros(std::vector<int> shp) {
        Tensor t;
        t.shape = std::move(shp);
        t.data.assign(count(t.shape), S(0));
        return t;
    }

    static Tensor full(std::vector<int> shp, S v) {
        Tensor t = zeros(std::move(shp));
        for (S& x : t.data) x = v;
        return t;
    }

    size_t numel() const { return data.size(); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape.size()); }

    S& operator[](size_t i) { return data[i]; }
    const S& operator[](size_t i) const { return data[i]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

}  // namespace bevloop::gen
