#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpda {

/// Shape or axis mismatch between an op and its operands.
class DimensionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Violated precondition of an op (bad label, empty batch, missing grads, ...).
class ContractError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major tensor with an optional gradient buffer of the same size.
///
/// The scalar type is a template parameter so the same op code can be run
/// in double precision by the finite-difference checks; everything the
/// trainer touches is `Tensor` (float).
template <typename T>
class BasicTensor {
public:
    BasicTensor() = default;
    explicit BasicTensor(Shape shape, T fill = T(0));
    BasicTensor(Shape shape, std::vector<T> data);

    static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t dim() const noexcept { return shape_.size(); }
    std::size_t size(std::size_t axis) const;
    std::size_t numel() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::vector<T>& data() noexcept { return data_; }
    const std::vector<T>& data() const noexcept { return data_; }
    T* ptr() noexcept { return data_.data(); }
    const T* ptr() const noexcept { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    bool has_grad() const noexcept { return !grad_.empty(); }
    /// Allocates (zeroed) gradient storage if absent.
    void require_grad();
    void zero_grad();
    void drop_grad() { grad_.clear(); grad_.shrink_to_fit(); }
    std::vector<T>& grad() noexcept { return grad_; }
    const std::vector<T>& grad() const noexcept { return grad_; }

    /// Same data, new shape; element count must match.
    BasicTensor reshaped(Shape shape) const;
    void reshape(Shape shape);

    /// Rows [begin, end) along axis 0.
    BasicTensor slice_rows(std::size_t begin, std::size_t end) const;
    static BasicTensor concat_rows(const BasicTensor& a, const BasicTensor& b);

    template <typename U>
    BasicTensor<U> cast() const
    {
        BasicTensor<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i)
            out[i] = static_cast<U>(data_[i]);
        return out;
    }

    bool all_finite() const;

private:
    Shape shape_;
    std::vector<T> data_;
    std::vector<T> grad_;
};

using Tensor = BasicTensor<float>;

/// Trainable state of one layer. Unused members stay empty.
template <typename T>
struct BasicLayerParams {
    std::string name;
    BasicTensor<T> weights;
    BasicTensor<T> bias;
    BasicTensor<T> running_mean;
    BasicTensor<T> running_var;

    bool has_running_stats() const { return !running_var.empty(); }
};

using LayerParams = BasicLayerParams<float>;

}  // namespace mpda
