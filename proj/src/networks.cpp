#include "mpda/networks.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "mpda/random.hpp"

namespace mpda {

const char* layer_kind_name(LayerKind kind)
{
    switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::flatten: return "flatten";
    case LayerKind::linear: return "linear";
    case LayerKind::sigmoid: return "sigmoid";
    }
    return "?";
}

namespace {

bool has_params(LayerKind kind)
{
    return kind == LayerKind::conv2d || kind == LayerKind::batchnorm || kind == LayerKind::linear;
}

[[noreturn]] void chain_error(const NetworkSpec& spec, const LayerSpec& layer, const Shape& got)
{
    throw DimensionError(spec.name + ": layer '" + layer.name + "' (" + layer_kind_name(layer.kind) +
                         ") cannot accept per-example shape " + shape_str(got));
}

}  // namespace

std::vector<Shape> NetworkSpec::chain_shapes() const
{
    std::vector<Shape> shapes;
    Shape cur = input_shape;
    for (const auto& l : layers) {
        switch (l.kind) {
        case LayerKind::conv2d:
            if (cur.size() != 3 || cur[0] != l.in || l.kernel % 2 == 0)
                chain_error(*this, l, cur);
            cur = {l.out, cur[1], cur[2]};
            break;
        case LayerKind::batchnorm:
            if ((cur.size() != 3 && cur.size() != 1) || cur[0] != l.in)
                chain_error(*this, l, cur);
            break;
        case LayerKind::relu:
        case LayerKind::sigmoid:
            break;
        case LayerKind::maxpool2d:
            if (cur.size() != 3 || cur[1] < 2 || cur[2] < 2)
                chain_error(*this, l, cur);
            cur = {cur[0], cur[1] / 2, cur[2] / 2};
            break;
        case LayerKind::flatten:
            cur = {shape_numel(cur)};
            break;
        case LayerKind::linear:
            if (cur.size() != 1 || cur[0] != l.in)
                chain_error(*this, l, cur);
            cur = {l.out};
            break;
        }
        shapes.push_back(cur);
    }
    if (cur != output_shape)
        throw DimensionError(name + ": chain ends in " + shape_str(cur) + ", spec says " + shape_str(output_shape));
    return shapes;
}

std::size_t NetworkSpec::trainable_count() const
{
    std::size_t total = 0;
    for (const auto& l : layers) {
        if (l.kind == LayerKind::conv2d)
            total += l.out * l.in * l.kernel * l.kernel + l.out;
        else if (l.kind == LayerKind::linear)
            total += l.out * l.in + l.out;
        else if (l.kind == LayerKind::batchnorm)
            total += 2 * l.in;
    }
    return total;
}

NetworkSpec encoder_spec()
{
    NetworkSpec s{"encoder", {}, {1, kImageSide, kImageSide}, {kEmbeddingDim}};
    const std::size_t channels[] = {1, 16, 32, 32};
    for (int i = 1; i <= 3; ++i) {
        const std::string k = std::to_string(i);
        s.layers.push_back({LayerKind::conv2d, "conv" + k, channels[i - 1], channels[i], 3});
        s.layers.push_back({LayerKind::batchnorm, "bn" + k, channels[i], channels[i]});
        s.layers.push_back({LayerKind::relu, "relu" + k});
        s.layers.push_back({LayerKind::maxpool2d, "pool" + k});
    }
    s.layers.push_back({LayerKind::flatten, "flatten"});
    s.layers.push_back({LayerKind::linear, "fc", 32 * 10 * 10, kEmbeddingDim});
    s.layers.push_back({LayerKind::batchnorm, "bn_fc", kEmbeddingDim, kEmbeddingDim});
    s.layers.push_back({LayerKind::relu, "relu_fc"});
    return s;
}

NetworkSpec task_classifier_spec()
{
    return {"task",
            {{LayerKind::linear, "fc1", kEmbeddingDim, 32},
             {LayerKind::relu, "relu1"},
             {LayerKind::linear, "fc2", 32, 1},
             {LayerKind::sigmoid, "sigmoid"}},
            {kEmbeddingDim},
            {1}};
}

NetworkSpec domain_classifier_spec(DomainHead head)
{
    NetworkSpec s{"domain", {}, {kEmbeddingDim}, {1}};
    s.layers.push_back({LayerKind::linear, "fc1", kEmbeddingDim, 64});
    s.layers.push_back({LayerKind::relu, "relu1"});
    if (head == DomainHead::deep) {
        s.layers.push_back({LayerKind::linear, "fc2", 64, 64});
        s.layers.push_back({LayerKind::relu, "relu2"});
        s.layers.push_back({LayerKind::linear, "fc3", 64, 64});
        s.layers.push_back({LayerKind::relu, "relu3"});
        s.layers.push_back({LayerKind::linear, "fc4", 64, 1});
    } else {
        s.layers.push_back({LayerKind::linear, "fc2", 64, 1});
    }
    s.layers.push_back({LayerKind::sigmoid, "sigmoid"});
    return s;
}

// ------------------------------------------------------------- network

template <typename T>
struct BasicNetwork<T>::Layer {
    LayerSpec spec;
    int param_index = -1;
    BasicTensor<T> output;
    PoolCache pool;
    BatchNormCache<T> bn;
    Shape input_shape;
};

template <typename T>
BasicNetwork<T>::BasicNetwork(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec))
{
    const auto shapes = spec_.chain_shapes();
    (void)shapes;
    Rng rng(seed);
    std::unordered_map<std::string, int> seen;
    for (const auto& l : spec_.layers) {
        if (!seen.emplace(l.name, 0).second)
            throw ContractError(spec_.name + ": duplicate layer name '" + l.name + "'");
        if (!has_params(l.kind))
            continue;
        BasicLayerParams<T> p;
        p.name = l.name;
        if (l.kind == LayerKind::batchnorm) {
            p.weights = BasicTensor<T>({l.in}, T(1));
            p.bias = BasicTensor<T>({l.in}, T(0));
            p.running_mean = BasicTensor<T>({l.in}, T(0));
            p.running_var = BasicTensor<T>({l.in}, T(1));
        } else {
            const std::size_t fan_in = l.kind == LayerKind::conv2d ? l.in * l.kernel * l.kernel : l.in;
            const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
            p.weights = l.kind == LayerKind::conv2d ? BasicTensor<T>({l.out, l.in, l.kernel, l.kernel})
                                                    : BasicTensor<T>({l.out, l.in});
            p.bias = BasicTensor<T>({l.out});
            for (auto& w : p.weights.data())
                w = static_cast<T>(rng.uniform(-bound, bound));
            for (auto& b : p.bias.data())
                b = static_cast<T>(rng.uniform(-bound, bound));
        }
        params_.push_back(std::move(p));
    }
    for (auto* t : trainable())
        moments_.push_back({std::vector<T>(t->numel(), T(0)), std::vector<T>(t->numel(), T(0))});
    rebuild_layers();
}

template <typename T>
BasicNetwork<T>::BasicNetwork() = default;

template <typename T>
BasicNetwork<T>::~BasicNetwork() = default;

template <typename T>
BasicNetwork<T>::BasicNetwork(const BasicNetwork& other)
    : spec_(other.spec_),
      params_(other.params_),
      moments_(other.moments_),
      adam_steps_(other.adam_steps_),
      bn_options_(other.bn_options_)
{
    rebuild_layers();
}

template <typename T>
BasicNetwork<T>& BasicNetwork<T>::operator=(const BasicNetwork& other)
{
    if (this != &other) {
        BasicNetwork copy(other);
        *this = std::move(copy);
    }
    return *this;
}

template <typename T>
BasicNetwork<T>::BasicNetwork(BasicNetwork&&) noexcept = default;
template <typename T>
BasicNetwork<T>& BasicNetwork<T>::operator=(BasicNetwork&&) noexcept = default;

template <typename T>
void BasicNetwork<T>::rebuild_layers()
{
    layers_.clear();
    int next_param = 0;
    for (const auto& l : spec_.layers) {
        auto layer = std::make_unique<Layer>();
        layer->spec = l;
        if (has_params(l.kind))
            layer->param_index = next_param++;
        layers_.push_back(std::move(layer));
    }
    pending_backward_ = false;
}

template <typename T>
BasicTensor<T> BasicNetwork<T>::forward(const BasicTensor<T>& input, Mode mode)
{
    Shape expected = spec_.input_shape;
    if (input.dim() != expected.size() + 1 || !std::equal(expected.begin(), expected.end(), input.shape().begin() + 1))
        throw DimensionError(spec_.name + ": input " + shape_str(input.shape()) + " does not match [N," +
                             shape_str(expected).substr(1));
    const BasicTensor<T>* cur = &input;
    for (auto& lp : layers_) {
        Layer& L = *lp;
        L.input_shape = cur->shape();
        switch (L.spec.kind) {
        case LayerKind::conv2d: L.output = conv2d(*cur, params_[L.param_index]); break;
        case LayerKind::batchnorm:
            L.output = batchnorm(*cur, params_[L.param_index], mode, bn_options_, &L.bn);
            break;
        case LayerKind::relu: L.output = relu(*cur); break;
        case LayerKind::maxpool2d: L.output = maxpool2d(*cur, &L.pool); break;
        case LayerKind::flatten: L.output = flatten(*cur); break;
        case LayerKind::linear: L.output = linear(*cur, params_[L.param_index]); break;
        case LayerKind::sigmoid: L.output = sigmoid(*cur); break;
        }
        cur = &L.output;
    }
    input_ = input;
    return *cur;
}

template <typename T>
BasicTensor<T> BasicNetwork<T>::backward(const BasicTensor<T>& grad_output)
{
    if (layers_.empty() || layers_.back()->output.empty())
        throw ContractError(spec_.name + ": backward called without a preceding forward");
    if (grad_output.shape() != layers_.back()->output.shape())
        throw DimensionError(spec_.name + ": output gradient " + shape_str(grad_output.shape()) +
                             " does not match output " + shape_str(layers_.back()->output.shape()));
    BasicTensor<T> grad = grad_output;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        Layer& L = *layers_[i];
        const BasicTensor<T>& in = i == 0 ? input_ : layers_[i - 1]->output;
        switch (L.spec.kind) {
        case LayerKind::conv2d: grad = conv2d_backward(in, params_[L.param_index], grad); break;
        case LayerKind::batchnorm: grad = batchnorm_backward(grad, params_[L.param_index], L.bn); break;
        case LayerKind::relu: grad = relu_backward(in, grad); break;
        case LayerKind::maxpool2d: grad = maxpool2d_backward(grad, L.pool); break;
        case LayerKind::flatten: grad = unflatten(grad, L.input_shape); break;
        case LayerKind::linear: grad = linear_backward(in, params_[L.param_index], grad); break;
        case LayerKind::sigmoid: grad = sigmoid_backward(L.output, grad); break;
        }
    }
    pending_backward_ = true;
    return grad;
}

template <typename T>
const BasicTensor<T>& BasicNetwork<T>::activation(std::size_t index) const
{
    if (index >= layers_.size())
        throw DimensionError(spec_.name + ": no layer " + std::to_string(index));
    return layers_[index]->output;
}

template <typename T>
std::vector<BasicTensor<T>*> BasicNetwork<T>::trainable()
{
    std::vector<BasicTensor<T>*> out;
    for (auto& p : params_) {
        out.push_back(&p.weights);
        out.push_back(&p.bias);
    }
    return out;
}

template <typename T>
std::vector<const BasicTensor<T>*> BasicNetwork<T>::trainable() const
{
    std::vector<const BasicTensor<T>*> out;
    for (const auto& p : params_) {
        out.push_back(&p.weights);
        out.push_back(&p.bias);
    }
    return out;
}

template <typename T>
void BasicNetwork<T>::zero_grad()
{
    for (auto* t : trainable())
        t->zero_grad();
    pending_backward_ = false;
}

template <typename T>
std::uint64_t BasicNetwork<T>::activation_pattern() const
{
    std::uint64_t h = 0x6a09e667f3bcc908ULL;
    auto feed = [&h](std::uint64_t v) { h = mix64(h ^ v); };
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const Layer& L = *layers_[i];
        const BasicTensor<T>& in = i == 0 ? input_ : layers_[i - 1]->output;
        if (L.spec.kind == LayerKind::relu) {
            std::uint64_t word = 0;
            for (std::size_t j = 0; j < in.numel(); ++j) {
                word = (word << 1) | (in[j] > T(0) ? 1u : 0u);
                if (j % 64 == 63) {
                    feed(word);
                    word = 0;
                }
            }
            feed(word);
        } else if (L.spec.kind == LayerKind::maxpool2d) {
            for (auto a : L.pool.argmax)
                feed(a);
        } else if (L.spec.kind == LayerKind::sigmoid) {
            for (std::size_t j = 0; j < L.output.numel(); ++j) {
                const double s = static_cast<double>(L.output[j]);
                feed(s <= kSigmoidClamp ? 1 : s >= 1.0 - kSigmoidClamp ? 2 : 0);
            }
        }
    }
    return h;
}

template <typename T>
template <typename U>
BasicNetwork<U> BasicNetwork<T>::cast() const
{
    BasicNetwork<U> out;
    out.spec_ = spec_;
    out.bn_options_ = bn_options_;
    out.adam_steps_ = adam_steps_;
    for (const auto& p : params_) {
        BasicLayerParams<U> q;
        q.name = p.name;
        q.weights = p.weights.template cast<U>();
        q.bias = p.bias.template cast<U>();
        if (p.has_running_stats()) {
            q.running_mean = p.running_mean.template cast<U>();
            q.running_var = p.running_var.template cast<U>();
        }
        out.params_.push_back(std::move(q));
    }
    for (const auto& m : moments_)
        out.moments_.push_back({std::vector<U>(m.m.begin(), m.m.end()), std::vector<U>(m.v.begin(), m.v.end())});
    out.rebuild_layers();
    return out;
}

template <typename T>
void BasicNetwork<T>::adam_step(double learning_rate, const AdamOptions& options)
{
    if (!pending_backward_)
        throw ContractError(spec_.name + ": adam_step without gradients from a backward pass");
    ++adam_steps_;
    const double t = static_cast<double>(adam_steps_);
    const double correction1 = 1.0 - std::pow(options.beta1, t);
    const double correction2 = 1.0 - std::pow(options.beta2, t);
    const T b1 = static_cast<T>(options.beta1), b2 = static_cast<T>(options.beta2);
    const T step = static_cast<T>(learning_rate / correction1);
    const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(correction2));
    const T eps = static_cast<T>(options.eps);
    auto tensors = trainable();
    for (std::size_t k = 0; k < tensors.size(); ++k) {
        BasicTensor<T>& w = *tensors[k];
        if (!w.has_grad())
            throw ContractError(spec_.name + ": parameter without gradient buffer");
        auto& m = moments_[k].m;
        auto& v = moments_[k].v;
        auto& g = w.grad();
        for (std::size_t i = 0; i < w.numel(); ++i) {
            m[i] = b1 * m[i] + (T(1) - b1) * g[i];
            v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
            w[i] -= step * m[i] / (std::sqrt(v[i]) * inv_sqrt_c2 + eps);
        }
    }
    zero_grad();
}

template class BasicNetwork<float>;
template class BasicNetwork<double>;
template BasicNetwork<double> BasicNetwork<float>::cast<double>() const;
template BasicNetwork<float> BasicNetwork<double>::cast<float>() const;
template BasicNetwork<float> BasicNetwork<float>::cast<float>() const;

Network build_encoder(std::uint64_t seed) { return Network(encoder_spec(), seed); }
Network build_task_classifier(std::uint64_t seed) { return Network(task_classifier_spec(), seed); }
Network build_domain_classifier(std::uint64_t seed, DomainHead head)
{
    return Network(domain_classifier_spec(head), seed);
}

void adam_step(Network& net, double learning_rate, const AdamOptions& options)
{
    net.adam_step(learning_rate, options);
}

ModelSet ModelSet::build(std::uint64_t seed, DomainHead head)
{
    return {build_encoder(substream_seed(seed, 0, 0x6e6574)), build_task_classifier(substream_seed(seed, 1, 0x6e6574)),
            build_task_classifier(substream_seed(seed, 2, 0x6e6574)),
            build_domain_classifier(substream_seed(seed, 3, 0x6e6574), head)};
}

}  // namespace mpda
