#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mpda/ops.hpp"
#include "mpda/tensor.hpp"

namespace mpda {

enum class LayerKind { conv2d, batchnorm, relu, maxpool2d, flatten, linear, sigmoid };

const char* layer_kind_name(LayerKind kind);

/// One entry of a network description. `in`/`out` are channels for conv,
/// features for linear, channels for batchnorm; other kinds ignore them.
struct LayerSpec {
    LayerKind kind;
    std::string name;
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t kernel = 0;
};

/// Layer list plus per-example input/output shapes (batch axis excluded).
struct NetworkSpec {
    std::string name;
    std::vector<LayerSpec> layers;
    Shape input_shape;
    Shape output_shape;

    /// Per-example shape after each layer; throws DimensionError if the
    /// chain is broken or the final shape differs from output_shape.
    std::vector<Shape> chain_shapes() const;
    /// Number of trainable scalars (weights + biases, batchnorm affine).
    std::size_t trainable_count() const;
};

enum class DomainHead { deep, shallow };

inline constexpr std::size_t kImageSide = 80;
inline constexpr std::size_t kEmbeddingDim = 20;

/// 3x(conv3x3 -> BN -> ReLU -> pool) -> flatten(32x10x10) -> linear(3200,20) -> BN -> ReLU
NetworkSpec encoder_spec();
/// linear(20,32) -> ReLU -> linear(32,1) -> sigmoid
NetworkSpec task_classifier_spec();
/// deep: 20->64->64->64->1, shallow: 20->64->1; sigmoid output
NetworkSpec domain_classifier_spec(DomainHead head = DomainHead::deep);

/// First/second moment buffers for one trainable tensor.
template <typename T>
struct AdamMoments {
    std::vector<T> m;
    std::vector<T> v;
};

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// A network's spec, parameters, forward caches and optimizer state.
///
/// Single-writer: forward, backward and adam_step mutate the object.
template <typename T>
class BasicNetwork {
public:
    BasicNetwork();
    BasicNetwork(NetworkSpec spec, std::uint64_t seed);
    ~BasicNetwork();
    BasicNetwork(const BasicNetwork& other);
    BasicNetwork& operator=(const BasicNetwork& other);
    BasicNetwork(BasicNetwork&&) noexcept;
    BasicNetwork& operator=(BasicNetwork&&) noexcept;

    const NetworkSpec& spec() const { return spec_; }

    BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode);
    /// Backpropagates from the last forward; accumulates parameter gradients
    /// and returns the gradient with respect to the input.
    BasicTensor<T> backward(const BasicTensor<T>& grad_output);

    /// Output of layer `index` during the last forward.
    const BasicTensor<T>& activation(std::size_t index) const;

    /// Parameter-carrying layers in order (conv, batchnorm, linear).
    std::vector<BasicLayerParams<T>>& params() { return params_; }
    const std::vector<BasicLayerParams<T>>& params() const { return params_; }

    /// Trainable tensors (weights then bias of each parametrized layer).
    std::vector<BasicTensor<T>*> trainable();
    std::vector<const BasicTensor<T>*> trainable() const;

    void zero_grad();
    bool has_pending_gradients() const { return pending_backward_; }

    std::vector<AdamMoments<T>>& adam_moments() { return moments_; }
    const std::vector<AdamMoments<T>>& adam_moments() const { return moments_; }
    std::uint64_t adam_steps() const { return adam_steps_; }
    void set_adam_steps(std::uint64_t steps) { adam_steps_ = steps; }

    BatchNormOptions& batchnorm_options() { return bn_options_; }
    const BatchNormOptions& batchnorm_options() const { return bn_options_; }

    /// Hash of ReLU masks, pool winners and sigmoid clamps of the last forward.
    std::uint64_t activation_pattern() const;

    template <typename U>
    BasicNetwork<U> cast() const;

    /// Adam update with bias correction; clears gradients afterwards.
    /// Throws ContractError if no backward pass has populated gradients.
    void adam_step(double learning_rate, const AdamOptions& options = {});

private:
    template <typename U>
    friend class BasicNetwork;

    struct Layer;
    void rebuild_layers();

    NetworkSpec spec_;
    std::vector<BasicLayerParams<T>> params_;
    std::vector<std::unique_ptr<Layer>> layers_;
    BasicTensor<T> input_;
    std::vector<AdamMoments<T>> moments_;
    std::uint64_t adam_steps_ = 0;
    BatchNormOptions bn_options_;
    bool pending_backward_ = false;
};

using Network = BasicNetwork<float>;

Network build_encoder(std::uint64_t seed);
Network build_task_classifier(std::uint64_t seed);
Network build_domain_classifier(std::uint64_t seed, DomainHead head = DomainHead::deep);

/// Free-function form of Network::adam_step.
void adam_step(Network& net, double learning_rate, const AdamOptions& options = {});

/// The four networks of the adaptation model.
struct ModelSet {
    Network encoder;
    Network task1;
    Network task2;
    Network domain;

    /// Seeds are derived per network from one model seed.
    static ModelSet build(std::uint64_t seed, DomainHead head = DomainHead::deep);

    std::vector<Network*> all() { return {&encoder, &task1, &task2, &domain}; }
    std::vector<const Network*> all() const { return {&encoder, &task1, &task2, &domain}; }
};

}  // namespace mpda
