#include "neuro/feedforward.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace neuro::feedforward {

ActivationValue activation(Activation kind, double b) {
    switch (kind) {
        case Activation::identity:
            return {b, 1.0};
        case Activation::sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-b));
            return {s, s * (1.0 - s)};
        }
        case Activation::tanh: {
            const double t = std::tanh(b);
            return {t, 1.0 - t * t};
        }
        case Activation::relu:
            return b > 0.0 ? ActivationValue{b, 1.0} : ActivationValue{0.0, 0.0};
        case Activation::sign:
            return {b >= 0.0 ? 1.0 : -1.0, 0.0};
        case Activation::heaviside:
            return {b >= 0.0 ? 1.0 : 0.0, 0.0};
        case Activation::softmax:
            break;
    }
    throw Error("activation: softmax is not element-wise");
}

Vector softmax(std::span<const double> fields, double alpha) {
    if (fields.empty()) throw Error("softmax: no fields");
    Vector out(fields.size(), 0.0);
    const auto top = std::max_element(fields.begin(), fields.end());
    if (std::isinf(alpha)) {
        out[static_cast<std::size_t>(top - fields.begin())] = 1.0;
        return out;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        out[i] = std::exp(alpha * (fields[i] - *top));
        sum += out[i];
    }
    for (double& o : out) o /= sum;
    return out;
}

Matrix softmax_jacobian(std::span<const double> outputs) {
    const std::size_t n = outputs.size();
    Matrix j(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = 0; l < n; ++l) j(i, l) = outputs[i] * ((i == l ? 1.0 : 0.0) - outputs[l]);
    return j;
}

// ---------------------------------------------------------------------------
// Layer

Layer::Layer(Shape in, Shape out, Activation g, std::size_t n_params, std::size_t n_weights)
    : params_(n_params, 0.0), in_(in), out_(out), g_(g), n_weights_(n_weights) {
    if (in.size() == 0 || out.size() == 0) throw Error("layer: empty shape");
}

void Layer::set_keep_probability(double p) {
    if (!(p > 0.0 && p <= 1.0)) throw Error("layer: keep probability must lie in (0, 1]");
    keep_ = p;
}

void Layer::forward(const Matrix& input, LayerCache& cache, Mode mode, RandomStream* rng) const {
    if (input.cols() != in_.size())
        throw Error("layer: input has " + std::to_string(input.cols()) + " components, expected " +
                    std::to_string(in_.size()));
    cache.mode = mode;
    cache.input = input;
    compute_fields(input, cache, mode);
    const std::size_t m = input.rows(), n = out_.size();
    cache.output = Matrix(m, n);
    for (std::size_t mu = 0; mu < m; ++mu) {
        if (g_ == Activation::softmax) {
            const auto o = softmax(cache.fields.row(mu));
            std::copy(o.begin(), o.end(), cache.output.row(mu).begin());
        } else {
            for (std::size_t i = 0; i < n; ++i) cache.output(mu, i) = feedforward::activation(g_, cache.fields(mu, i)).value;
        }
    }
    cache.dropout_mask.clear();
    if (keep_ < 1.0) {
        if (mode == Mode::train) {
            if (rng == nullptr) throw Error("layer: dropout in train mode needs a random stream");
            cache.dropout_mask.resize(n);
            for (double& d : cache.dropout_mask) d = rng->bernoulli(keep_) ? 1.0 : 0.0;
            for (std::size_t mu = 0; mu < m; ++mu)
                for (std::size_t i = 0; i < n; ++i) cache.output(mu, i) *= cache.dropout_mask[i];
        } else {
            for (double& v : cache.output.data()) v *= keep_;
        }
    }
}

Matrix Layer::backward(const LayerCache& cache, const Matrix& output_error, std::span<double> grad) const {
    const std::size_t m = output_error.rows(), n = out_.size();
    Matrix e = output_error;
    if (!cache.dropout_mask.empty()) {
        for (std::size_t mu = 0; mu < m; ++mu)
            for (std::size_t i = 0; i < n; ++i) e(mu, i) *= cache.dropout_mask[i];
    } else if (keep_ < 1.0) {
        for (double& v : e.data()) v *= keep_;
    }
    Matrix d(m, n);
    for (std::size_t mu = 0; mu < m; ++mu) {
        if (g_ == Activation::softmax) {
            const auto o = softmax(cache.fields.row(mu));
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += e(mu, i) * o[i];
            for (std::size_t l = 0; l < n; ++l) d(mu, l) = o[l] * (e(mu, l) - s);
        } else {
            for (std::size_t i = 0; i < n; ++i) d(mu, i) = e(mu, i) * feedforward::activation(g_, cache.fields(mu, i)).derivative;
        }
    }
    return backward_fields(cache, d, grad);
}

// ---------------------------------------------------------------------------
// Dense

DenseLayer::DenseLayer(std::size_t in, std::size_t out, Activation g)
    : Layer(Shape::flat(in), Shape::flat(out), g, out * in + out, out * in) {}

void DenseLayer::compute_fields(const Matrix& input, LayerCache& cache, Mode) const {
    const std::size_t m = input.rows(), n_in = inputs(), n_out = outputs();
    cache.fields = Matrix(m, n_out);
    for (std::size_t mu = 0; mu < m; ++mu) {
        const auto x = input.row(mu);
        for (std::size_t i = 0; i < n_out; ++i) {
            double b = -threshold(i);
            const double* w = params_.data() + i * n_in;
            for (std::size_t j = 0; j < n_in; ++j) b += w[j] * x[j];
            cache.fields(mu, i) = b;
        }
    }
}

Matrix DenseLayer::backward_fields(const LayerCache& cache, const Matrix& field_error, std::span<double> grad) const {
    const std::size_t m = field_error.rows(), n_in = inputs(), n_out = outputs();
    Matrix dx(m, n_in);
    for (std::size_t mu = 0; mu < m; ++mu) {
        const auto x = cache.input.row(mu);
        for (std::size_t i = 0; i < n_out; ++i) {
            const double d = field_error(mu, i);
            if (d == 0.0) continue;
            double* g = grad.data() + i * n_in;
            const double* w = params_.data() + i * n_in;
            for (std::size_t j = 0; j < n_in; ++j) {
                g[j] += d * x[j];
                dx(mu, j) += d * w[j];
            }
            grad[n_out * n_in + i] -= d;
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Convolution and pooling

std::size_t sliding_output_size(std::size_t n, std::size_t window, std::size_t stride, std::size_t padding) {
    if (window == 0 || stride == 0) throw Error("sliding window: window and stride must be positive");
    const std::size_t total = n + 2 * padding;
    if (window > total) throw Error("sliding window: window larger than the padded input");
    if ((total - window) % stride != 0)
        throw Error("sliding window: stride " + std::to_string(stride) + " does not tile " + std::to_string(total) +
                    " with window " + std::to_string(window));
    return (total - window) / stride + 1;
}

namespace {

Shape conv_output(Shape in, std::size_t maps, std::size_t kp, std::size_t kq, std::size_t stride, std::size_t pad) {
    return {maps, sliding_output_size(in.rows, kp, stride, pad), sliding_output_size(in.cols, kq, stride, pad)};
}

}  // namespace

ConvolutionLayer::ConvolutionLayer(Shape in, std::size_t maps, std::size_t kernel_rows, std::size_t kernel_cols,
                                   std::size_t stride, std::size_t padding, Activation g)
    : Layer(in, conv_output(in, maps, kernel_rows, kernel_cols, stride, padding), g,
            maps * in.maps * kernel_rows * kernel_cols + maps, maps * in.maps * kernel_rows * kernel_cols),
      kp_(kernel_rows),
      kq_(kernel_cols),
      stride_(stride),
      pad_(padding) {}

double& ConvolutionLayer::kernel(std::size_t map, std::size_t channel, std::size_t p, std::size_t q) {
    return params_[((map * input_shape().maps + channel) * kp_ + p) * kq_ + q];
}

void ConvolutionLayer::compute_fields(const Matrix& input, LayerCache& cache, Mode) const {
    const Shape in = input_shape(), out = output_shape();
    const std::size_t m = input.rows();
    cache.fields = Matrix(m, out.size());
    for (std::size_t mu = 0; mu < m; ++mu) {
        const auto x = input.row(mu);
        for (std::size_t k = 0; k < out.maps; ++k)
            for (std::size_t i = 0; i < out.rows; ++i)
                for (std::size_t j = 0; j < out.cols; ++j) {
                    double b = -params_[weight_count() + k];
                    for (std::size_t c = 0; c < in.maps; ++c)
                        for (std::size_t p = 0; p < kp_; ++p) {
                            const std::size_t r = i * stride_ + p;
                            if (r < pad_ || r - pad_ >= in.rows) continue;
                            for (std::size_t q = 0; q < kq_; ++q) {
                                const std::size_t s = j * stride_ + q;
                                if (s < pad_ || s - pad_ >= in.cols) continue;
                                b += params_[((k * in.maps + c) * kp_ + p) * kq_ + q] *
                                     x[(c * in.rows + r - pad_) * in.cols + s - pad_];
                            }
                        }
                    cache.fields(mu, (k * out.rows + i) * out.cols + j) = b;
                }
    }
}

Matrix ConvolutionLayer::backward_fields(const LayerCache& cache, const Matrix& field_error,
                                         std::span<double> grad) const {
    const Shape in = input_shape(), out = output_shape();
    const std::size_t m = field_error.rows();
    Matrix dx(m, in.size());
    for (std::size_t mu = 0; mu < m; ++mu) {
        const auto x = cache.input.row(mu);
        for (std::size_t k = 0; k < out.maps; ++k)
            for (std::size_t i = 0; i < out.rows; ++i)
                for (std::size_t j = 0; j < out.cols; ++j) {
                    const double d = field_error(mu, (k * out.rows + i) * out.cols + j);
                    if (d == 0.0) continue;
                    grad[weight_count() + k] -= d;
                    for (std::size_t c = 0; c < in.maps; ++c)
                        for (std::size_t p = 0; p < kp_; ++p) {
                            const std::size_t r = i * stride_ + p;
                            if (r < pad_ || r - pad_ >= in.rows) continue;
                            for (std::size_t q = 0; q < kq_; ++q) {
                                const std::size_t s = j * stride_ + q;
                                if (s < pad_ || s - pad_ >= in.cols) continue;
                                const std::size_t wi = ((k * in.maps + c) * kp_ + p) * kq_ + q;
                                const std::size_t xi = (c * in.rows + r - pad_) * in.cols + s - pad_;
                                grad[wi] += d * x[xi];
                                dx(mu, xi) += d * params_[wi];
                            }
                        }
                }
    }
    return dx;
}

MaxPoolLayer::MaxPoolLayer(Shape in, std::size_t size, std::size_t stride)
    : Layer(in,
            {in.maps, sliding_output_size(in.rows, size, stride, 0), sliding_output_size(in.cols, size, stride, 0)},
            Activation::identity, 0, 0),
      size_(size),
      stride_(stride) {}

void MaxPoolLayer::compute_fields(const Matrix& input, LayerCache& cache, Mode) const {
    const Shape in = input_shape(), out = output_shape();
    const std::size_t m = input.rows();
    cache.fields = Matrix(m, out.size());
    cache.argmax.assign(m * out.size(), 0);
    for (std::size_t mu = 0; mu < m; ++mu) {
        const auto x = input.row(mu);
        for (std::size_t c = 0; c < out.maps; ++c)
            for (std::size_t i = 0; i < out.rows; ++i)
                for (std::size_t j = 0; j < out.cols; ++j) {
                    std::size_t best = (c * in.rows + i * stride_) * in.cols + j * stride_;
                    for (std::size_t p = 0; p < size_; ++p)
                        for (std::size_t q = 0; q < size_; ++q) {
                            const std::size_t xi = (c * in.rows + i * stride_ + p) * in.cols + j * stride_ + q;
                            if (x[xi] > x[best]) best = xi;
                        }
                    const std::size_t o = (c * out.rows + i) * out.cols + j;
                    cache.fields(mu, o) = x[best];
                    cache.argmax[mu * out.size() + o] = best;
                }
    }
}

Matrix MaxPoolLayer::backward_fields(const LayerCache& cache, const Matrix& field_error, std::span<double>) const {
    const std::size_t m = field_error.rows(), n = output_shape().size();
    Matrix dx(m, input_shape().size());
    for (std::size_t mu = 0; mu < m; ++mu)
        for (std::size_t o = 0; o < n; ++o) dx(mu, cache.argmax[mu * n + o]) += field_error(mu, o);
    return dx;
}

// ---------------------------------------------------------------------------
// Batch normalisation

BatchNormLayer::BatchNormLayer(Shape shape, Activation g, double epsilon, double decay)
    : Layer(shape, shape, g, 2 * shape.size(), 0),
      eps_(epsilon),
      decay_(decay),
      running_mean_(shape.size(), 0.0),
      running_var_(shape.size(), 1.0) {
    if (!(epsilon >= 0.0)) throw Error("batchnorm: epsilon must be non-negative");
    if (!(decay >= 0.0 && decay < 1.0)) throw Error("batchnorm: decay must lie in [0, 1)");
    std::fill(params_.begin(), params_.begin() + static_cast<std::ptrdiff_t>(units()), 1.0);
}

void BatchNormLayer::compute_fields(const Matrix& input, LayerCache& cache, Mode mode) const {
    const std::size_t m = input.rows(), n = units();
    if (mode == Mode::train) {
        if (m < 2) throw Error("batchnorm: train mode needs at least two patterns per batch");
        cache.mean.assign(n, 0.0);
        cache.variance.assign(n, 0.0);
        for (std::size_t mu = 0; mu < m; ++mu)
            for (std::size_t i = 0; i < n; ++i) cache.mean[i] += input(mu, i);
        for (double& v : cache.mean) v /= static_cast<double>(m);
        for (std::size_t mu = 0; mu < m; ++mu)
            for (std::size_t i = 0; i < n; ++i) {
                const double d = input(mu, i) - cache.mean[i];
                cache.variance[i] += d * d;
            }
        for (double& v : cache.variance) v /= static_cast<double>(m);
    } else {
        cache.mean = running_mean_;
        cache.variance = running_var_;
    }
    cache.normalized = Matrix(m, n);
    cache.fields = Matrix(m, n);
    for (std::size_t mu = 0; mu < m; ++mu)
        for (std::size_t i = 0; i < n; ++i) {
            const double xh = (input(mu, i) - cache.mean[i]) / std::sqrt(cache.variance[i] + eps_);
            cache.normalized(mu, i) = xh;
            cache.fields(mu, i) = params_[i] * xh + params_[n + i];
        }
}

Matrix BatchNormLayer::backward_fields(const LayerCache& cache, const Matrix& field_error,
                                       std::span<double> grad) const {
    const std::size_t m = field_error.rows(), n = units();
    Matrix dx(m, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double gamma = params_[i];
        const double inv_std = 1.0 / std::sqrt(cache.variance[i] + eps_);
        double sum_d = 0.0, sum_dx = 0.0;
        for (std::size_t mu = 0; mu < m; ++mu) {
            const double d = field_error(mu, i);
            grad[i] += d * cache.normalized(mu, i);
            grad[n + i] += d;
            sum_d += d;
            sum_dx += d * cache.normalized(mu, i);
        }
        for (std::size_t mu = 0; mu < m; ++mu) {
            const double d = field_error(mu, i);
            if (cache.mode == Mode::train) {
                const double md = static_cast<double>(m);
                dx(mu, i) = gamma * inv_std * (d - sum_d / md - cache.normalized(mu, i) * sum_dx / md);
            } else {
                dx(mu, i) = gamma * inv_std * d;
            }
        }
    }
    return dx;
}

void BatchNormLayer::update_running(const LayerCache& cache) {
    if (cache.mode != Mode::train) return;
    for (std::size_t i = 0; i < units(); ++i) {
        running_mean_[i] = decay_ * running_mean_[i] + (1.0 - decay_) * cache.mean[i];
        running_var_[i] = decay_ * running_var_[i] + (1.0 - decay_) * cache.variance[i];
    }
}

Matrix batchnorm_forward(BatchNormLayer& layer, const Matrix& batch, Mode mode) {
    LayerCache cache;
    layer.forward(batch, cache, mode, nullptr);
    layer.update_running(cache);
    return cache.output;
}

// ---------------------------------------------------------------------------
// LayeredNet

LayeredNet::LayeredNet(Shape input) : input_(input) {
    if (input.size() == 0) throw Error("LayeredNet: empty input");
}

LayeredNet::LayeredNet(const LayeredNet& other) : input_(other.input_), mask_(other.mask_) {
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

LayeredNet& LayeredNet::operator=(const LayeredNet& other) {
    if (this != &other) {
        LayeredNet copy(other);
        *this = std::move(copy);
    }
    return *this;
}

const Shape& LayeredNet::last_shape() const { return layers_.empty() ? input_ : layers_.back()->output_shape(); }

template <typename L>
L& LayeredNet::push(std::unique_ptr<L> layer) {
    if (!layers_.empty() && layers_.back()->activation() == Activation::softmax)
        throw Error("LayeredNet: softmax is only allowed in the output layer");
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    if (!mask_.empty()) mask_.resize(parameter_count(), 1.0);
    return ref;
}

DenseLayer& LayeredNet::add_dense(std::size_t outputs, Activation g) {
    return push(std::make_unique<DenseLayer>(last_shape().size(), outputs, g));
}

ConvolutionLayer& LayeredNet::add_convolution(std::size_t maps, std::size_t kernel_rows, std::size_t kernel_cols,
                                              std::size_t stride, std::size_t padding, Activation g) {
    if (g == Activation::softmax) throw Error("LayeredNet: softmax convolution layer");
    return push(std::make_unique<ConvolutionLayer>(last_shape(), maps, kernel_rows, kernel_cols, stride, padding, g));
}

MaxPoolLayer& LayeredNet::add_maxpool(std::size_t size, std::size_t stride) {
    return push(std::make_unique<MaxPoolLayer>(last_shape(), size, stride));
}

BatchNormLayer& LayeredNet::add_batchnorm(Activation g, double epsilon) {
    return push(std::make_unique<BatchNormLayer>(last_shape(), g, epsilon));
}

std::size_t LayeredNet::output_size() const { return last_shape().size(); }

std::size_t LayeredNet::neuron_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l->output_shape().size();
    return n;
}

std::size_t LayeredNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l->parameters().size();
    return n;
}

std::size_t LayeredNet::parameter_offset(std::size_t l) const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < l; ++k) n += layers_[k]->parameters().size();
    return n;
}

Vector LayeredNet::parameters() const {
    Vector out;
    out.reserve(parameter_count());
    for (const auto& l : layers_) out.insert(out.end(), l->parameters().begin(), l->parameters().end());
    return out;
}

void LayeredNet::set_parameters(std::span<const double> params) {
    if (params.size() != parameter_count()) throw Error("LayeredNet: parameter vector has the wrong size");
    std::size_t k = 0;
    for (auto& l : layers_)
        for (double& p : l->parameters()) {
            p = is_pruned(k) ? 0.0 : params[k];
            ++k;
        }
}

bool LayeredNet::is_weight(std::size_t k) const {
    for (const auto& l : layers_) {
        const std::size_t n = l->parameters().size();
        if (k < n) return k < l->weight_count();
        k -= n;
    }
    throw Error("LayeredNet: parameter index out of range");
}

void LayeredNet::prune(std::size_t k) {
    if (k >= parameter_count()) throw Error("LayeredNet: parameter index out of range");
    if (mask_.empty()) mask_.assign(parameter_count(), 1.0);
    mask_[k] = 0.0;
    set_parameters(parameters());
}

Vector LayeredNet::mask() const { return mask_.empty() ? Vector(parameter_count(), 1.0) : mask_; }

void LayeredNet::initialize(RandomStream& rng, std::optional<double> weight_std) {
    for (auto& l : layers_) {
        auto p = l->parameters();
        std::fill(p.begin(), p.end(), 0.0);
        switch (l->kind()) {
            case LayerKind::dense:
            case LayerKind::convolution: {
                const std::size_t fan_in = l->weight_count() / std::max<std::size_t>(
                                                                   1, l->kind() == LayerKind::dense
                                                                          ? l->output_shape().size()
                                                                          : l->output_shape().maps);
                const double sd = weight_std.value_or(1.0 / std::sqrt(static_cast<double>(fan_in)));
                for (std::size_t k = 0; k < l->weight_count(); ++k) p[k] = rng.gaussian(0.0, sd);
                break;
            }
            case LayerKind::batchnorm:
                std::fill(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(p.size() / 2), 1.0);
                break;
            case LayerKind::maxpool:
                break;
        }
    }
    set_parameters(parameters());
}

ForwardPass LayeredNet::forward(const Matrix& batch, Mode mode, RandomStream* rng) const {
    if (layers_.empty()) throw Error("LayeredNet: no layers");
    if (batch.cols() != input_size())
        throw Error("LayeredNet: input has " + std::to_string(batch.cols()) + " components, expected " +
                    std::to_string(input_size()));
    ForwardPass pass;
    pass.layers.resize(layers_.size());
    const Matrix* in = &batch;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        layers_[l]->forward(*in, pass.layers[l], mode, rng);
        in = &pass.layers[l].output;
    }
    return pass;
}

Vector LayeredNet::predict(std::span<const double> input) const {
    Matrix x(1, input.size());
    std::copy(input.begin(), input.end(), x.row(0).begin());
    const auto pass = forward(x, Mode::infer);
    const auto out = pass.output().row(0);
    return {out.begin(), out.end()};
}

Matrix LayeredNet::predict(const Matrix& batch) const { return forward(batch, Mode::infer).output(); }

// ---------------------------------------------------------------------------
// Losses and backpropagation

double loss_value(Loss loss, const Matrix& outputs, const Matrix& targets) {
    if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols())
        throw Error("loss: outputs and targets differ in shape");
    const auto o = outputs.data();
    const auto t = targets.data();
    double h = 0.0;
    for (std::size_t k = 0; k < o.size(); ++k) {
        switch (loss) {
            case Loss::quadratic:
                h += 0.5 * (t[k] - o[k]) * (t[k] - o[k]);
                break;
            case Loss::loglikelihood_softmax:
                if (t[k] != 0.0) h -= t[k] * std::log(o[k]);
                break;
            case Loss::cross_entropy_sigmoid:
                if (t[k] != 0.0) h -= t[k] * std::log(o[k]);
                if (t[k] != 1.0) h -= (1.0 - t[k]) * std::log(1.0 - o[k]);
                break;
        }
    }
    return h;
}

void check_loss_pairing(const LayeredNet& net, Loss loss) {
    if (net.layer_count() == 0) throw Error("loss pairing: empty net");
    const Activation g = net.layer(net.layer_count() - 1).activation();
    if (loss == Loss::loglikelihood_softmax && g != Activation::softmax)
        throw Error("loss pairing: the log-likelihood loss needs softmax outputs");
    if (loss == Loss::cross_entropy_sigmoid && g != Activation::sigmoid)
        throw Error("loss pairing: the cross-entropy loss needs sigmoid outputs");
}

namespace {

Gradient backprop_pass(const LayeredNet& net, const ForwardPass& pass, const Matrix& targets, Loss loss) {
    const Matrix& out = pass.output();
    Gradient g{loss_value(loss, out, targets), Vector(net.parameter_count(), 0.0)};
    Matrix err(out.rows(), out.cols());
    for (std::size_t k = 0; k < err.size(); ++k) err.data()[k] = out.data()[k] - targets.data()[k];
    const std::size_t last = net.layer_count() - 1;
    auto grad_of = [&](std::size_t l) {
        return std::span<double>(g.gradient).subspan(net.parameter_offset(l), net.layer(l).parameters().size());
    };
    // softmax + loglikelihood and sigmoid + cross-entropy: dH/db = O - t
    Matrix upstream = loss == Loss::quadratic ? net.layer(last).backward(pass.layers[last], err, grad_of(last))
                                              : net.layer(last).backward_fields(pass.layers[last], err, grad_of(last));
    for (std::size_t l = last; l-- > 0;) upstream = net.layer(l).backward(pass.layers[l], upstream, grad_of(l));
    for (std::size_t k = 0; k < g.gradient.size(); ++k)
        if (net.is_pruned(k)) g.gradient[k] = 0.0;
    return g;
}

void check_batch(const LayeredNet& net, const Matrix& inputs, const Matrix& targets) {
    if (inputs.rows() != targets.rows()) throw Error("backprop: inputs and targets differ in pattern count");
    if (targets.cols() != net.output_size()) throw Error("backprop: target dimension differs from the output layer");
}

}  // namespace

Gradient backprop(const LayeredNet& net, const Matrix& inputs, const Matrix& targets, Loss loss, Mode mode,
                  RandomStream* rng) {
    check_loss_pairing(net, loss);
    check_batch(net, inputs, targets);
    return backprop_pass(net, net.forward(inputs, mode, rng), targets, loss);
}

// ---------------------------------------------------------------------------
// Data

std::string to_string(TargetConvention convention) {
    switch (convention) {
        case TargetConvention::plus_minus_one:
            return "plus_minus_one";
        case TargetConvention::zero_one:
            return "zero_one";
        case TargetConvention::one_hot:
            return "one_hot";
    }
    return "?";
}

TargetConvention parse_target_convention(const std::string& name) {
    if (name == "plus_minus_one") return TargetConvention::plus_minus_one;
    if (name == "zero_one") return TargetConvention::zero_one;
    if (name == "one_hot") return TargetConvention::one_hot;
    throw Error("unknown target convention '" + name + "'");
}

void LabeledSet::validate() const {
    if (inputs.rows() != targets.rows()) throw Error("LabeledSet: input and target counts differ");
    for (std::size_t mu = 0; mu < targets.rows(); ++mu) {
        std::size_t ones = 0;
        for (double t : targets.row(mu)) {
            const bool ok = convention == TargetConvention::plus_minus_one ? (t == 1.0 || t == -1.0)
                                                                           : (t == 0.0 || t == 1.0);
            if (!ok) throw Error("LabeledSet: target " + std::to_string(t) + " violates " + to_string(convention));
            ones += t == 1.0;
        }
        if (convention == TargetConvention::one_hot && ones != 1)
            throw Error("LabeledSet: one-hot target row " + std::to_string(mu) + " has " + std::to_string(ones) +
                        " ones");
    }
}

LabeledSet LabeledSet::subset(std::span<const std::size_t> rows) const {
    LabeledSet s{Matrix(rows.size(), inputs.cols()), Matrix(rows.size(), targets.cols()), convention};
    for (std::size_t k = 0; k < rows.size(); ++k) {
        std::copy(inputs.row(rows[k]).begin(), inputs.row(rows[k]).end(), s.inputs.row(k).begin());
        std::copy(targets.row(rows[k]).begin(), targets.row(rows[k]).end(), s.targets.row(k).begin());
    }
    return s;
}

LabeledSet read_labeled_set(std::istream& in) {
    std::size_t p = 0, n = 0, m = 0;
    std::string conv;
    if (!(in >> p >> n >> m >> conv)) throw Error("labeled set: expected header 'p N M convention'");
    LabeledSet s{Matrix(p, n), Matrix(p, m), parse_target_convention(conv)};
    for (std::size_t mu = 0; mu < p; ++mu) {
        for (double& x : s.inputs.row(mu))
            if (!(in >> x)) throw Error("labeled set: truncated at pattern " + std::to_string(mu));
        for (double& t : s.targets.row(mu))
            if (!(in >> t)) throw Error("labeled set: truncated at pattern " + std::to_string(mu));
    }
    s.validate();
    return s;
}

void write_labeled_set(std::ostream& out, const LabeledSet& data) {
    out << data.size() << ' ' << data.inputs.cols() << ' ' << data.targets.cols() << ' ' << to_string(data.convention)
        << '\n';
    out.precision(17);
    for (std::size_t mu = 0; mu < data.size(); ++mu) {
        const char* sep = "";
        for (double x : data.inputs.row(mu)) {
            out << sep << x;
            sep = " ";
        }
        for (double t : data.targets.row(mu)) out << ' ' << t;
        out << '\n';
    }
}

LabeledSet load_labeled_set(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    return read_labeled_set(in);
}

void save_labeled_set(const std::string& path, const LabeledSet& data) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    write_labeled_set(out, data);
}

double classification_error(const Matrix& outputs, const Matrix& targets, TargetConvention convention) {
    if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols())
        throw Error("classification_error: outputs and targets differ in shape");
    const std::size_t p = outputs.rows(), m = outputs.cols();
    if (p == 0) return 0.0;
    double wrong = 0.0;
    switch (convention) {
        case TargetConvention::zero_one:
            for (std::size_t k = 0; k < outputs.size(); ++k)
                wrong += std::abs(targets.data()[k] - (outputs.data()[k] >= 0.5 ? 1.0 : 0.0));
            return wrong / static_cast<double>(p * m);
        case TargetConvention::plus_minus_one:
            for (std::size_t k = 0; k < outputs.size(); ++k)
                wrong += std::abs(targets.data()[k] - (outputs.data()[k] >= 0.0 ? 1.0 : -1.0));
            return wrong / static_cast<double>(2 * p * m);
        case TargetConvention::one_hot:
            for (std::size_t mu = 0; mu < p; ++mu) {
                const auto o = outputs.row(mu);
                const auto t = targets.row(mu);
                wrong += std::max_element(o.begin(), o.end()) - o.begin() !=
                         std::max_element(t.begin(), t.end()) - t.begin();
            }
            return wrong / static_cast<double>(p);
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw Error("train: learning rate must be non-negative");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("train: momentum must lie in [0, 1)");
    if (batch_size == 0) throw Error("train: minibatch size must be positive");
    if (!(l1 >= 0.0) || !(l2 >= 0.0)) throw Error("train: regularisation coefficients must be non-negative");
    if (max_norm && !(*max_norm > 0.0)) throw Error("train: max-norm cap must be positive");
    if (!(keep_probability > 0.0 && keep_probability <= 1.0)) throw Error("train: keep probability must lie in (0, 1]");
    if (init_std && !(*init_std >= 0.0)) throw Error("train: initial weight spread must be non-negative");
}

void sgd_step(std::span<double> w, std::span<double> velocity, std::span<const double> gradient,
              const TrainConfig& cfg, std::span<const double> is_weight) {
    for (std::size_t k = 0; k < w.size(); ++k) {
        double g = gradient[k];
        if (is_weight[k] != 0.0) {
            g += cfg.l2 * w[k];
            if (w[k] != 0.0) g += cfg.l1 * (w[k] > 0.0 ? 1.0 : -1.0);
        }
        velocity[k] = cfg.momentum * velocity[k] - cfg.learning_rate * g;
        w[k] += velocity[k];
        if (cfg.max_norm && is_weight[k] != 0.0) w[k] = std::clamp(w[k], -*cfg.max_norm, *cfg.max_norm);
    }
}

namespace {

Matrix rows_of(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), m.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) std::copy(m.row(rows[k]).begin(), m.row(rows[k]).end(), out.row(k).begin());
    return out;
}

}  // namespace

TrainingLog train(LayeredNet& net, const LabeledSet& data, const LabeledSet* validation, const TrainConfig& cfg,
                  RandomStream& rng) {
    cfg.validate();
    data.validate();
    check_loss_pairing(net, cfg.loss);
    if (data.size() == 0) throw Error("train: empty training set");
    if (data.inputs.cols() != net.input_size() || data.targets.cols() != net.output_size())
        throw Error("train: data dimensions do not match the net");
    if (cfg.batch_size > data.size()) throw Error("train: minibatch larger than the training set");
    if (cfg.initialize) net.initialize(rng, cfg.init_std);
    for (std::size_t l = 0; l + 1 < net.layer_count(); ++l) net.layer(l).set_keep_probability(cfg.keep_probability);

    const std::size_t n = net.parameter_count();
    Vector w = net.parameters(), velocity(n, 0.0), is_weight(n), lookahead(n);
    const Vector mask = net.mask();
    for (std::size_t k = 0; k < n; ++k) is_weight[k] = net.is_weight(k) ? 1.0 : 0.0;

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    TrainingLog log;
    double best_valid = std::numeric_limits<double>::infinity();
    std::size_t worse = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (cfg.shuffle) rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t len = std::min(cfg.batch_size, order.size() - start);
            const std::span<const std::size_t> rows(order.data() + start, len);
            const Matrix x = rows_of(data.inputs, rows), t = rows_of(data.targets, rows);
            if (cfg.nesterov && cfg.momentum > 0.0) {
                for (std::size_t k = 0; k < n; ++k) lookahead[k] = w[k] + cfg.momentum * velocity[k];
                net.set_parameters(lookahead);
            }
            const auto pass = net.forward(x, Mode::train, &rng);
            const auto g = backprop_pass(net, pass, t, cfg.loss);
            if (!std::isfinite(g.loss))
                throw DivergenceError("train: non-finite energy in epoch " + std::to_string(epoch));
            for (std::size_t l = 0; l < net.layer_count(); ++l)
                if (net.layer(l).kind() == LayerKind::batchnorm)
                    static_cast<BatchNormLayer&>(net.layer(l)).update_running(pass.layers[l]);
            sgd_step(w, velocity, g.gradient, cfg, is_weight);
            for (std::size_t k = 0; k < n; ++k) w[k] *= mask[k];
            net.set_parameters(w);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        const Matrix out = net.predict(data.inputs);
        rec.h_train = loss_value(cfg.loss, out, data.targets) / static_cast<double>(data.size());
        rec.c_train = classification_error(out, data.targets, data.convention);
        rec.h_valid = rec.c_valid = std::numeric_limits<double>::quiet_NaN();
        if (validation != nullptr && validation->size() > 0) {
            const Matrix vo = net.predict(validation->inputs);
            rec.h_valid = loss_value(cfg.loss, vo, validation->targets) / static_cast<double>(validation->size());
            rec.c_valid = classification_error(vo, validation->targets, validation->convention);
        }
        if (!std::isfinite(rec.h_train))
            throw DivergenceError("train: non-finite training energy after epoch " + std::to_string(epoch));
        log.epochs.push_back(rec);
        if (cfg.patience && std::isfinite(rec.h_valid)) {
            if (rec.h_valid <= best_valid) {
                best_valid = rec.h_valid;
                worse = 0;
            } else if (++worse >= *cfg.patience) {
                log.stopped_early = true;
                break;
            }
        }
    }
    return log;
}

void write_training_log(std::ostream& out, const TrainingLog& log) {
    out << "epoch,H_train,H_valid,C_train,C_valid\n";
    out.precision(10);
    for (const auto& r : log.epochs)
        out << r.epoch << ',' << r.h_train << ',' << r.h_valid << ',' << r.c_train << ',' << r.c_valid << '\n';
}

// ---------------------------------------------------------------------------
// Preprocessing and principal components

Matrix Standardizer::apply(const Matrix& data) const {
    if (data.cols() != mean.size()) throw Error("standardizer: dimension mismatch");
    Matrix out = data;
    for (std::size_t mu = 0; mu < out.rows(); ++mu)
        for (std::size_t i = 0; i < out.cols(); ++i) out(mu, i) = (out(mu, i) - mean[i]) * scale[i];
    return out;
}

Preprocessed preprocess(const Matrix& data, double tol) {
    const std::size_t p = data.rows(), n = data.cols();
    if (p == 0) throw Error("preprocess: empty data");
    Standardizer t{Vector(n, 0.0), Vector(n, 1.0), {}};
    for (std::size_t mu = 0; mu < p; ++mu)
        for (std::size_t i = 0; i < n; ++i) t.mean[i] += data(mu, i);
    for (double& m : t.mean) m /= static_cast<double>(p);
    for (std::size_t i = 0; i < n; ++i) {
        double var = 0.0;
        for (std::size_t mu = 0; mu < p; ++mu) var += (data(mu, i) - t.mean[i]) * (data(mu, i) - t.mean[i]);
        var /= static_cast<double>(p);
        if (var < tol)
            t.zero_variance.push_back(i);
        else
            t.scale[i] = 1.0 / std::sqrt(var);
    }
    Matrix out = t.apply(data);
    return {std::move(out), std::move(t)};
}

Matrix Pca::project(const Matrix& data) const {
    if (data.cols() != mean.size()) throw Error("pca: dimension mismatch");
    Matrix out(data.rows(), directions.cols());
    for (std::size_t mu = 0; mu < data.rows(); ++mu)
        for (std::size_t k = 0; k < directions.cols(); ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < mean.size(); ++i) s += (data(mu, i) - mean[i]) * directions(i, k);
            out(mu, k) = s;
        }
    return out;
}

Matrix Pca::reconstruct(const Matrix& coordinates) const {
    Matrix out(coordinates.rows(), mean.size());
    for (std::size_t mu = 0; mu < coordinates.rows(); ++mu)
        for (std::size_t i = 0; i < mean.size(); ++i) {
            double s = mean[i];
            for (std::size_t k = 0; k < directions.cols(); ++k) s += coordinates(mu, k) * directions(i, k);
            out(mu, i) = s;
        }
    return out;
}

Pca pca(const Matrix& data, std::size_t keep) {
    const std::size_t p = data.rows(), n = data.cols();
    if (p == 0) throw Error("pca: empty data");
    if (keep == 0 || keep > n) throw Error("pca: keep must lie in [1, dimension]");
    Pca r;
    r.mean.assign(n, 0.0);
    for (std::size_t mu = 0; mu < p; ++mu)
        for (std::size_t i = 0; i < n; ++i) r.mean[i] += data(mu, i);
    for (double& m : r.mean) m /= static_cast<double>(p);
    SymmetricMatrix c(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            double s = 0.0;
            for (std::size_t mu = 0; mu < p; ++mu) s += (data(mu, i) - r.mean[i]) * (data(mu, j) - r.mean[j]);
            c.set(i, j, s / static_cast<double>(p));
        }
    r.covariance = c.matrix();
    auto eig = symmetric_eigen(c);
    r.eigenvalues = eig.values;
    r.directions = Matrix(n, keep);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < keep; ++k) r.directions(i, k) = eig.vectors(i, k);
    return r;
}

// ---------------------------------------------------------------------------
// Pruning

Vector diagonal_hessian(const LayeredNet& net, const LabeledSet& data, Loss loss, double h) {
    LayeredNet probe = net;
    Vector w = net.parameters(), diag(w.size(), 0.0);
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (net.is_pruned(k)) continue;
        const double w0 = w[k];
        w[k] = w0 + h;
        probe.set_parameters(w);
        const double gp = backprop(probe, data.inputs, data.targets, loss, Mode::infer).gradient[k];
        w[k] = w0 - h;
        probe.set_parameters(w);
        const double gm = backprop(probe, data.inputs, data.targets, loss, Mode::infer).gradient[k];
        w[k] = w0;
        diag[k] = (gp - gm) / (2.0 * h);
    }
    return diag;
}

double obs_saliency(double w, double hessian_diagonal) { return 0.5 * w * w * hessian_diagonal; }

double retrain_to_minimum(LayeredNet& net, const LabeledSet& data, Loss loss, double learning_rate, double tolerance,
                          std::size_t max_epochs) {
    Vector w = net.parameters();
    double gnorm = 0.0;
    for (std::size_t epoch = 0;; ++epoch) {
        const auto g = backprop(net, data.inputs, data.targets, loss, Mode::infer);
        gnorm = norm(g.gradient);
        if (gnorm < tolerance || epoch == max_epochs) break;
        for (std::size_t k = 0; k < w.size(); ++k) w[k] -= learning_rate * g.gradient[k];
        net.set_parameters(w);
    }
    return gnorm;
}

ObsResult obs_prune(LayeredNet& net, const LabeledSet& data, const ObsOptions& options) {
    if (!(options.prune_fraction >= 0.0 && options.prune_fraction <= 1.0))
        throw Error("obs_prune: prune fraction must lie in [0, 1]");
    std::size_t free_weights = 0;
    for (std::size_t k = 0; k < net.parameter_count(); ++k) free_weights += net.is_weight(k) && !net.is_pruned(k);
    const auto target = static_cast<std::size_t>(options.prune_fraction * static_cast<double>(free_weights));
    auto retrain = [&] {
        retrain_to_minimum(net, data, options.loss, options.retrain.learning_rate, options.gradient_tolerance,
                           options.retrain.epochs);
        return loss_value(options.loss, net.predict(data.inputs), data.targets);
    };

    ObsResult result;
    double h_min = retrain();
    while (result.steps.size() < target) {
        const Vector hess = diagonal_hessian(net, data, options.loss, options.hessian_step);
        const Vector w = net.parameters();
        std::optional<std::size_t> best;
        double best_l = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) {
            if (!net.is_weight(k) || net.is_pruned(k)) continue;
            if (!(hess[k] > 0.0)) {
                if (w[k] == 0.0) {
                    // removing an exact zero costs nothing whatever the curvature
                    if (!best || best_l > 0.0) best = k, best_l = 0.0;
                    continue;
                }
                result.diagnostics.push_back("weight " + std::to_string(k) +
                                             " skipped: non-positive Hessian diagonal " + std::to_string(hess[k]));
                continue;
            }
            const double l = obs_saliency(w[k], hess[k]);
            if (!best || l < best_l) best = k, best_l = l;
        }
        if (!best) {
            result.diagnostics.push_back("no prunable weight left");
            break;
        }
        if (best_l > options.max_loss_fraction * h_min) break;
        ObsStep step{*best, w[*best], best_l, 0.0};
        net.prune(*best);
        step.energy = retrain();
        h_min = std::min(h_min, step.energy);
        result.steps.push_back(step);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Constructive networks

LayeredNet xor_net(Activation output) {
    LayeredNet net(2);
    auto& hidden = net.add_dense(2, Activation::heaviside);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) hidden.weight(i, j) = 1.0;
    hidden.threshold(0) = 0.5;
    hidden.threshold(1) = 1.5;
    auto& out = net.add_dense(1, output);
    out.weight(0, 0) = 1.0;
    out.weight(0, 1) = -1.0;
    out.threshold(0) = 0.5;
    return net;
}

Vector boolean_input(std::size_t j, std::size_t n) {
    Vector x(n);
    for (std::size_t k = 0; k < n; ++k) x[k] = (j >> k) & 1u ? 1.0 : -1.0;
    return x;
}

LayeredNet boolean_net(std::span<const int> table, std::size_t n, double delta, double gamma) {
    if (n == 0 || n > 20) throw Error("boolean_net: need 1 <= N <= 20 inputs");
    const std::size_t h = std::size_t{1} << n;
    if (table.size() != h) throw Error("boolean_net: value table must have 2^N entries");
    // a neighbour at Hamming distance one has field N - 2 delta
    if (!(delta > std::max(1.0, 0.5 * static_cast<double>(n))))
        throw Error("boolean_net: delta must exceed max(1, N/2) for a unique winning unit");
    if (!(gamma > 0.0)) throw Error("boolean_net: gamma must be positive");
    LayeredNet net(n);
    auto& hidden = net.add_dense(h, Activation::tanh);
    for (std::size_t j = 0; j < h; ++j) {
        for (std::size_t k = 0; k < n; ++k) hidden.weight(j, k) = (j >> k) & 1u ? delta : -delta;
        hidden.threshold(j) = static_cast<double>(n) * (delta - 1.0);
    }
    auto& out = net.add_dense(1, Activation::sign);
    double sum = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
        if (table[j] != 1 && table[j] != -1) throw Error("boolean_net: table entries must be +1 or -1");
        out.weight(0, j) = table[j] * gamma;
        sum += out.weight(0, j);
    }
    out.threshold(0) = -sum;
    return net;
}

LayeredNet parity_net(std::size_t n) {
    if (n < 2 || (n & (n - 1)) != 0) throw Error("parity_net: N must be a power of two, at least 2");
    LayeredNet net(n);
    for (std::size_t width = n; width > 1; width /= 2) {
        auto& hidden = net.add_dense(width, Activation::heaviside);
        for (std::size_t b = 0; b < width / 2; ++b)
            for (std::size_t u = 0; u < 2; ++u) {
                hidden.weight(2 * b + u, 2 * b) = 1.0;
                hidden.weight(2 * b + u, 2 * b + 1) = 1.0;
                hidden.threshold(2 * b + u) = u == 0 ? 0.5 : 1.5;
            }
        auto& out = net.add_dense(width / 2, Activation::heaviside);
        for (std::size_t b = 0; b < width / 2; ++b) {
            out.weight(b, 2 * b) = 1.0;
            out.weight(b, 2 * b + 1) = -1.0;
            out.threshold(b) = 0.5;
        }
    }
    return net;
}

}  // namespace neuro::feedforward
