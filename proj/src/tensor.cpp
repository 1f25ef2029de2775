#include "mpda/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mpda {

std::size_t shape_numel(const Shape& shape)
{
    std::size_t n = 1;
    for (auto d : shape)
        n *= d;
    return n;
}

std::string shape_str(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i)
        os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill)
{
    for (auto d : shape_)
        if (d == 0)
            throw DimensionError("tensor shape " + shape_str(shape_) + " has a zero-sized axis");
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data))
{
    if (shape_numel(shape_) != data_.size())
        throw DimensionError("tensor shape " + shape_str(shape_) + " does not match " + std::to_string(data_.size()) +
                             " values");
}

template <typename T>
std::size_t BasicTensor<T>::size(std::size_t axis) const
{
    if (axis >= shape_.size())
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape_));
    return shape_[axis];
}

template <typename T>
void BasicTensor<T>::require_grad()
{
    if (grad_.size() != data_.size())
        grad_.assign(data_.size(), T(0));
}

template <typename T>
void BasicTensor<T>::zero_grad()
{
    std::fill(grad_.begin(), grad_.end(), T(0));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const
{
    BasicTensor out = *this;
    out.reshape(std::move(shape));
    return out;
}

template <typename T>
void BasicTensor<T>::reshape(Shape shape)
{
    if (shape_numel(shape) != data_.size())
        throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    shape_ = std::move(shape);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::slice_rows(std::size_t begin, std::size_t end) const
{
    if (shape_.empty() || begin >= end || end > shape_[0])
        throw DimensionError("row slice [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for " +
                             shape_str(shape_));
    const std::size_t row = data_.size() / shape_[0];
    Shape s = shape_;
    s[0] = end - begin;
    return BasicTensor(s, std::vector<T>(data_.begin() + begin * row, data_.begin() + end * row));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::concat_rows(const BasicTensor& a, const BasicTensor& b)
{
    if (a.dim() != b.dim() || a.dim() == 0 ||
        !std::equal(a.shape_.begin() + 1, a.shape_.end(), b.shape_.begin() + 1))
        throw DimensionError("cannot concatenate " + shape_str(a.shape_) + " and " + shape_str(b.shape_));
    Shape s = a.shape_;
    s[0] += b.shape_[0];
    std::vector<T> d;
    d.reserve(a.numel() + b.numel());
    d.insert(d.end(), a.data_.begin(), a.data_.end());
    d.insert(d.end(), b.data_.begin(), b.data_.end());
    return BasicTensor(s, std::move(d));
}

template <typename T>
bool BasicTensor<T>::all_finite() const
{
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace mpda
