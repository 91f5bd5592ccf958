#include "amnce/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace amnce {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)), data(shape_product(shape), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_product(shape) != data.size()) {
        throw std::runtime_error("tensor: data length " + std::to_string(data.size()) +
                                 " does not match shape " + shape_string(shape));
    }
}

Tensor Tensor::zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }

Tensor Tensor::full(std::vector<std::size_t> s, double value) {
    Tensor t(std::move(s));
    for (double& v : t.data) v = value;
    return t;
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw std::runtime_error("tensor: rows() on rank-" + std::to_string(rank()) + " tensor");
    return shape[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw std::runtime_error("tensor: cols() on rank-" + std::to_string(rank()) + " tensor");
    return shape[1];
}

double& Tensor::at(std::size_t r, std::size_t c) {
    return data[r * cols() + c];
}

double Tensor::at(std::size_t r, std::size_t c) const {
    return data[r * cols() + c];
}

void require_finite(const Tensor& t, const std::string& what) {
    for (std::size_t i = 0; i < t.data.size(); ++i) {
        if (!std::isfinite(t.data[i])) {
            throw std::runtime_error(what + ": non-finite value at flat index " + std::to_string(i));
        }
    }
}

void require_finite(double v, const std::string& what) {
    if (!std::isfinite(v)) throw std::runtime_error(what + ": non-finite value");
}

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw std::runtime_error(std::string("tensor ") + op + ": shape mismatch " + shape_string(a.shape) +
                                 " vs " + shape_string(b.shape));
    }
}
}  // namespace

Tensor operator+(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "+");
    Tensor out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "-");
    Tensor out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
    return out;
}

Tensor operator*(double s, const Tensor& a) {
    Tensor out = a;
    for (double& v : out.data) v *= s;
    return out;
}

Tensor& operator+=(Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "+=");
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
    return a;
}

double dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

double squared_norm(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data) s += v * v;
    return s;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) {
        throw std::runtime_error("tensor matmul: inner dims " + shape_string(a.shape) + " x " +
                                 shape_string(b.shape));
    }
    Tensor out({m, n});
    // i-k-j order keeps both inner accesses contiguous.
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a.data.data() + i * k;
        double* orow = out.data.data() + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) continue;
            const double* brow = b.data.data() + kk * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

}  // namespace amnce
