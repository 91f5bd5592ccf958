#ifndef AMNCE_TENSOR_HPP
#define AMNCE_TENSOR_HPP

#include <cstddef>
#include <string>
#include <vector>

namespace amnce {

// Dense row-major tensor of doubles; the only numeric carrier in the library.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s);
    Tensor(std::vector<std::size_t> s, std::vector<double> d);

    static Tensor zeros(std::vector<std::size_t> s);
    static Tensor full(std::vector<std::size_t> s, double value);

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    // 2-D accessors; throw on rank mismatch.
    std::size_t rows() const;
    std::size_t cols() const;
    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

std::size_t shape_product(const std::vector<std::size_t>& shape);
std::string shape_string(const std::vector<std::size_t>& shape);

// Throws std::runtime_error naming `what` if any entry is NaN or Inf.
void require_finite(const Tensor& t, const std::string& what);
void require_finite(double v, const std::string& what);

// Elementwise ops; shapes must match exactly.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);
Tensor& operator+=(Tensor& a, const Tensor& b);

double dot(const Tensor& a, const Tensor& b);
double squared_norm(const Tensor& t);

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);

}  // namespace amnce

#endif
