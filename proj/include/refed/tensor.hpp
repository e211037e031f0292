#ifndef REFED_TENSOR_HPP
#define REFED_TENSOR_HPP

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace refed {

/// Dense row-major tensor. Shape is dynamic; storage is a flat vector.
template <class T>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<T> v;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
        v.assign(count(shape), T(0));
    }

    Tensor(std::initializer_list<std::size_t> s)
        : Tensor(std::vector<std::size_t>(s)) {}

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto d : s) n *= d;
        return n;
    }

    std::size_t size() const { return v.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }

    T* data() { return v.data(); }
    const T* data() const { return v.data(); }

    T& operator[](std::size_t i) { return v[i]; }
    const T& operator[](std::size_t i) const { return v[i]; }

    void fill(T x) { std::fill(v.begin(), v.end(), x); }

    void reshape(std::vector<std::size_t> s) {
        if (count(s) != v.size())
            throw std::invalid_argument("tensor reshape: element count mismatch");
        shape = std::move(s);
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.v.assign(v.begin(), v.end());
        return out;
    }
};

} // namespace refed

#endif
