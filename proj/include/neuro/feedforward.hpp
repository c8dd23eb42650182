#pragma once

// Layered feed-forward networks: dense, convolution, max-pooling and
// batch-normalisation layers, backpropagation for the three loss functions,
// stochastic gradient descent with its usual refinements, preprocessing,
// pruning, classification metrics and the constructive Boolean networks.

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neuro/numerics.hpp"

namespace neuro::feedforward {

enum class Activation { identity, sigmoid, tanh, relu, softmax, sign, heaviside };

struct ActivationValue {
    double value = 0.0;
    double derivative = 0.0;
};

/// g(b) and g'(b) for element-wise activations. ReLU'(0) = 0, sgn(0) = +1,
/// heaviside(0) = 1; sign and heaviside have zero derivative. Throws for
/// softmax, which is not element-wise.
ActivationValue activation(Activation kind, double b);

/// O_i = exp(alpha b_i) / sum_k exp(alpha b_k). alpha = infinity returns
/// the one-hot vector of the arg-max (first index on ties).
Vector softmax(std::span<const double> fields, double alpha = 1.0);
/// dO_i/db_l = O_i (delta_il - O_l) for unit scale.
Matrix softmax_jacobian(std::span<const double> outputs);

enum class Mode { train, infer };
enum class Loss { quadratic, loglikelihood_softmax, cross_entropy_sigmoid };
enum class LayerKind { dense, convolution, maxpool, batchnorm };

/// maps x rows x cols; a flat vector of n units is {1, 1, n}.
struct Shape {
    std::size_t maps = 1;
    std::size_t rows = 1;
    std::size_t cols = 1;

    static Shape flat(std::size_t n) { return {1, 1, n}; }
    std::size_t size() const { return maps * rows * cols; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

/// Everything a layer needs to run backward on one minibatch.
/// Rows of every matrix are patterns.
struct LayerCache {
    Matrix input;
    Matrix fields;
    Matrix output;
    Vector dropout_mask;  ///< empty when no dropout was applied
    Matrix normalized;    ///< batchnorm only
    Vector mean;          ///< batchnorm only
    Vector variance;      ///< batchnorm only
    std::vector<std::size_t> argmax;  ///< maxpool only, per pattern and output unit
    Mode mode = Mode::infer;
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual LayerKind kind() const = 0;
    virtual std::unique_ptr<Layer> clone() const = 0;

    const Shape& input_shape() const { return in_; }
    const Shape& output_shape() const { return out_; }
    Activation activation() const { return g_; }

    /// Probability that a unit is kept in train mode. Infer mode multiplies
    /// outputs by this value.
    double keep_probability() const { return keep_; }
    void set_keep_probability(double p);

    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }
    /// The leading weight_count() parameters are weights; the rest are
    /// thresholds or batchnorm scale/shift. Regularisers touch weights only.
    std::size_t weight_count() const { return n_weights_; }

    void forward(const Matrix& input, LayerCache& cache, Mode mode, RandomStream* rng) const;
    /// Accumulates dH/dparameters into `grad` and returns dH/dinput, given
    /// dH/doutput (`output_error`, patterns in rows).
    Matrix backward(const LayerCache& cache, const Matrix& output_error, std::span<double> grad) const;
    /// Same, starting from dH/dfields directly.
    virtual Matrix backward_fields(const LayerCache& cache, const Matrix& field_error,
                                   std::span<double> grad) const = 0;

protected:
    Layer(Shape in, Shape out, Activation g, std::size_t n_params, std::size_t n_weights);
    virtual void compute_fields(const Matrix& input, LayerCache& cache, Mode mode) const = 0;

    Vector params_;

private:
    Shape in_;
    Shape out_;
    Activation g_;
    std::size_t n_weights_;
    double keep_ = 1.0;
};

/// b_i = sum_j w_ij x_j - theta_i. Parameters: w (row-major out x in), theta.
class DenseLayer : public Layer {
public:
    DenseLayer(std::size_t in, std::size_t out, Activation g);
    LayerKind kind() const override { return LayerKind::dense; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<DenseLayer>(*this); }

    std::size_t inputs() const { return input_shape().size(); }
    std::size_t outputs() const { return output_shape().size(); }
    double& weight(std::size_t i, std::size_t j) { return params_[i * inputs() + j]; }
    double weight(std::size_t i, std::size_t j) const { return params_[i * inputs() + j]; }
    double& threshold(std::size_t i) { return params_[outputs() * inputs() + i]; }
    double threshold(std::size_t i) const { return params_[outputs() * inputs() + i]; }

    Matrix backward_fields(const LayerCache& cache, const Matrix& field_error,
                           std::span<double> grad) const override;

protected:
    void compute_fields(const Matrix& input, LayerCache& cache, Mode mode) const override;
};

/// Output size for a window of `window` sliding by `stride` over `n` padded
/// by `padding` on both sides. Throws unless the windows tile exactly.
std::size_t sliding_output_size(std::size_t n, std::size_t window, std::size_t stride, std::size_t padding);

/// Feature maps b_kij = sum_{c,p,q} w_kcpq x_{c, p + s i, q + s j} - theta_k
/// over the zero-padded input. Parameters: kernels (maps x channels x P x Q),
/// then one threshold per map.
class ConvolutionLayer : public Layer {
public:
    ConvolutionLayer(Shape in, std::size_t maps, std::size_t kernel_rows, std::size_t kernel_cols,
                     std::size_t stride, std::size_t padding, Activation g);
    LayerKind kind() const override { return LayerKind::convolution; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<ConvolutionLayer>(*this); }

    std::size_t kernel_rows() const { return kp_; }
    std::size_t kernel_cols() const { return kq_; }
    std::size_t stride() const { return stride_; }
    std::size_t padding() const { return pad_; }
    double& kernel(std::size_t map, std::size_t channel, std::size_t p, std::size_t q);
    double& threshold(std::size_t map) { return params_[weight_count() + map]; }

    Matrix backward_fields(const LayerCache& cache, const Matrix& field_error,
                           std::span<double> grad) const override;

protected:
    void compute_fields(const Matrix& input, LayerCache& cache, Mode mode) const override;

private:
    std::size_t kp_, kq_, stride_, pad_;
};

/// Block maxima per map; records the arg-max for the backward pass.
class MaxPoolLayer : public Layer {
public:
    MaxPoolLayer(Shape in, std::size_t size, std::size_t stride);
    LayerKind kind() const override { return LayerKind::maxpool; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPoolLayer>(*this); }

    Matrix backward_fields(const LayerCache& cache, const Matrix& field_error,
                           std::span<double> grad) const override;

protected:
    void compute_fields(const Matrix& input, LayerCache& cache, Mode mode) const override;

private:
    std::size_t size_, stride_;
};

/// b = gamma (x - mean) / sqrt(var + eps) + beta per unit. Train mode uses
/// the minibatch statistics (variance normalised by 1/m_B), infer mode the
/// running averages. Parameters: gamma, then beta.
class BatchNormLayer : public Layer {
public:
    BatchNormLayer(Shape shape, Activation g, double epsilon = 1e-5, double decay = 0.9);
    LayerKind kind() const override { return LayerKind::batchnorm; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNormLayer>(*this); }

    std::size_t units() const { return input_shape().size(); }
    double& gamma(std::size_t i) { return params_[i]; }
    double& beta(std::size_t i) { return params_[units() + i]; }
    double epsilon() const { return eps_; }
    const Vector& running_mean() const { return running_mean_; }
    const Vector& running_variance() const { return running_var_; }
    /// running <- decay * running + (1 - decay) * batch
    void update_running(const LayerCache& cache);

    Matrix backward_fields(const LayerCache& cache, const Matrix& field_error,
                           std::span<double> grad) const override;

protected:
    void compute_fields(const Matrix& input, LayerCache& cache, Mode mode) const override;

private:
    double eps_, decay_;
    Vector running_mean_, running_var_;
};

/// Forwards a minibatch through `layer` and, in train mode, folds the batch
/// statistics into the running averages.
Matrix batchnorm_forward(BatchNormLayer& layer, const Matrix& batch, Mode mode);

struct ForwardPass {
    std::vector<LayerCache> layers;
    const Matrix& output() const { return layers.back().output; }
};

/// Strictly feed-forward stack of layers. Copies are deep.
class LayeredNet {
public:
    explicit LayeredNet(Shape input);
    explicit LayeredNet(std::size_t inputs) : LayeredNet(Shape::flat(inputs)) {}
    LayeredNet(const LayeredNet& other);
    LayeredNet& operator=(const LayeredNet& other);
    LayeredNet(LayeredNet&&) = default;
    LayeredNet& operator=(LayeredNet&&) = default;

    DenseLayer& add_dense(std::size_t outputs, Activation g);
    ConvolutionLayer& add_convolution(std::size_t maps, std::size_t kernel_rows, std::size_t kernel_cols,
                                      std::size_t stride, std::size_t padding, Activation g);
    MaxPoolLayer& add_maxpool(std::size_t size, std::size_t stride);
    BatchNormLayer& add_batchnorm(Activation g, double epsilon = 1e-5);

    const Shape& input_shape() const { return input_; }
    std::size_t input_size() const { return input_.size(); }
    std::size_t output_size() const;
    std::size_t layer_count() const { return layers_.size(); }
    Layer& layer(std::size_t l) { return *layers_[l]; }
    const Layer& layer(std::size_t l) const { return *layers_[l]; }
    /// Neurons in all layers except the input layer.
    std::size_t neuron_count() const;

    std::size_t parameter_count() const;
    /// Offset of layer l's block inside the flat parameter vector.
    std::size_t parameter_offset(std::size_t l) const;
    Vector parameters() const;
    void set_parameters(std::span<const double> params);
    /// Whether flat parameter k is a weight (as opposed to a threshold or a
    /// batchnorm scale/shift).
    bool is_weight(std::size_t k) const;

    /// Pruned parameters are held at zero and never updated.
    void prune(std::size_t k);
    bool is_pruned(std::size_t k) const { return !mask_.empty() && mask_[k] == 0.0; }
    /// 1 for free parameters, 0 for pruned ones.
    Vector mask() const;

    /// Gaussian weights with mean 0 and standard deviation `weight_std`
    /// (default 1/sqrt(fan-in)), thresholds 0, batchnorm gamma 1 and beta 0.
    void initialize(RandomStream& rng, std::optional<double> weight_std = std::nullopt);

    /// Patterns in rows. A stream is required in train mode when any layer
    /// uses dropout.
    ForwardPass forward(const Matrix& batch, Mode mode, RandomStream* rng = nullptr) const;
    Vector predict(std::span<const double> input) const;
    Matrix predict(const Matrix& batch) const;

private:
    template <typename L>
    L& push(std::unique_ptr<L> layer);
    const Shape& last_shape() const;

    Shape input_;
    std::vector<std::unique_ptr<Layer>> layers_;
    Vector mask_;
};

/// Summed over patterns: quadratic 1/2 sum (t - O)^2, loglikelihood
/// -sum t log O, cross-entropy -sum [t log O + (1 - t) log(1 - O)].
double loss_value(Loss loss, const Matrix& outputs, const Matrix& targets);
/// Throws unless the output layer suits the loss (softmax for loglikelihood,
/// sigmoid for cross-entropy).
void check_loss_pairing(const LayeredNet& net, Loss loss);

struct Gradient {
    double loss = 0.0;
    Vector gradient;  ///< flat, same layout as LayeredNet::parameters()
};

/// Loss summed over the minibatch and its gradient for every parameter.
Gradient backprop(const LayeredNet& net, const Matrix& inputs, const Matrix& targets, Loss loss,
                  Mode mode = Mode::train, RandomStream* rng = nullptr);

// ---------------------------------------------------------------------------
// Data

enum class TargetConvention { plus_minus_one, zero_one, one_hot };

std::string to_string(TargetConvention convention);
TargetConvention parse_target_convention(const std::string& name);

struct LabeledSet {
    Matrix inputs;   ///< p x N
    Matrix targets;  ///< p x M
    TargetConvention convention = TargetConvention::zero_one;

    std::size_t size() const { return inputs.rows(); }
    /// Throws when the row counts differ or targets violate the convention.
    void validate() const;
    LabeledSet subset(std::span<const std::size_t> rows) const;
};

/// Header "p N M convention", then p lines of N inputs followed by M targets.
LabeledSet read_labeled_set(std::istream& in);
void write_labeled_set(std::ostream& out, const LabeledSet& data);
LabeledSet load_labeled_set(const std::string& path);
void save_labeled_set(const std::string& path, const LabeledSet& data);

/// Eq. classification error for outputs against targets: 0/1 targets
/// compare against heaviside(O - 1/2), +-1 targets against sgn(O), one-hot
/// targets compare arg-max indices. Returns the fraction of wrong decisions.
double classification_error(const Matrix& outputs, const Matrix& targets, TargetConvention convention);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.0;  ///< alpha in [0, 1)
    bool nesterov = false;
    std::size_t batch_size = 1;
    double l1 = 0.0;
    double l2 = 0.0;
    std::optional<double> max_norm;  ///< |w| <= c per weight
    double keep_probability = 1.0;   ///< dropout on hidden layers
    std::size_t epochs = 100;
    bool shuffle = true;
    std::optional<std::size_t> patience = 5;  ///< early stopping; needs validation data
    Loss loss = Loss::quadratic;
    bool initialize = true;
    std::optional<double> init_std;  ///< default 1/sqrt(fan-in)

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double h_train = 0.0;  ///< loss per pattern
    double h_valid = 0.0;  ///< NaN without validation data
    double c_train = 0.0;
    double c_valid = 0.0;
};

struct TrainingLog {
    std::vector<EpochRecord> epochs;
    bool stopped_early = false;
};

class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Minibatch stochastic gradient descent. Per step, with g the minibatch
/// gradient plus the regularisers l2 w + l1 sgn(w) (sgn(0) = 0):
///   dw_t = -eta g(w + alpha dw_{t-1}) + alpha dw_{t-1}   (Nesterov)
///   dw_t = -eta g(w) + alpha dw_{t-1}                    (plain momentum)
/// then weights are clipped to [-c, c]. Stops at the epoch cap or once the
/// validation energy has exceeded its running minimum `patience` epochs in
/// a row.
TrainingLog train(LayeredNet& net, const LabeledSet& data, const LabeledSet* validation, const TrainConfig& cfg,
                  RandomStream& rng);

/// One optimiser step on a flat parameter vector; exposed for tests.
void sgd_step(std::span<double> w, std::span<double> velocity, std::span<const double> gradient,
              const TrainConfig& cfg, std::span<const double> is_weight);

void write_training_log(std::ostream& out, const TrainingLog& log);

// ---------------------------------------------------------------------------
// Preprocessing

struct Standardizer {
    Vector mean;
    Vector scale;  ///< 1 / standard deviation; 1 for flagged components
    std::vector<std::size_t> zero_variance;

    Matrix apply(const Matrix& data) const;
};

struct Preprocessed {
    Matrix data;
    Standardizer transform;
};

/// Shifts every component to mean zero and scales it to unit variance
/// (1/p normalisation). Components whose variance is below `tol` are only
/// shifted and listed in transform.zero_variance.
Preprocessed preprocess(const Matrix& data, double tol = 1e-12);

struct Pca {
    Vector mean;
    Matrix covariance;
    Vector eigenvalues;  ///< all, descending
    Matrix directions;   ///< dimension x keep, orthonormal columns

    /// Coordinates of centred data along the kept directions.
    Matrix project(const Matrix& data) const;
    /// Back-projection into the input space.
    Matrix reconstruct(const Matrix& coordinates) const;
};

Pca pca(const Matrix& data, std::size_t keep);

// ---------------------------------------------------------------------------
// Pruning

/// Diagonal of the Hessian of the summed loss, by central differences of
/// the backprop gradient.
Vector diagonal_hessian(const LayeredNet& net, const LabeledSet& data, Loss loss, double h = 1e-4);

/// Increase of the energy when weight w is removed with a diagonal Hessian
/// entry m: L = w^2 / (2 (M^-1)_qq) = w^2 m / 2.
double obs_saliency(double w, double hessian_diagonal);

struct ObsOptions {
    double prune_fraction = 0.5;  ///< of the free weights
    /// Stop once L exceeds this fraction of the energy minimum reached.
    double max_loss_fraction = 1e300;
    Loss loss = Loss::quadratic;
    TrainConfig retrain;  ///< epochs caps each retraining
    double gradient_tolerance = 1e-4;
    double hessian_step = 1e-4;
};

struct ObsStep {
    std::size_t parameter = 0;
    double weight = 0.0;
    double saliency = 0.0;
    double energy = 0.0;  ///< after retraining
};

struct ObsResult {
    std::vector<ObsStep> steps;
    std::vector<std::string> diagnostics;
};

/// Optimal-brain-surgeon pruning with a diagonal Hessian. The net is
/// retrained before every step; each step removes the free weight of least
/// saliency and freezes it at zero.
ObsResult obs_prune(LayeredNet& net, const LabeledSet& data, const ObsOptions& options);

/// Retrains on full batches until the gradient norm drops below `tolerance`
/// or `max_epochs` passes. Returns the final gradient norm.
double retrain_to_minimum(LayeredNet& net, const LabeledSet& data, Loss loss, double learning_rate,
                          double tolerance, std::size_t max_epochs);

// ---------------------------------------------------------------------------
// Constructive networks

/// Hand-wired XOR net on 0/1 inputs: heaviside hidden units with unit weights and
/// thresholds 1/2 and 3/2, output sgn(V1 - V2 - 1/2).
LayeredNet xor_net(Activation output = Activation::sign);

/// One hidden layer of 2^N tanh units: w_jk = +delta where bit k-1 of j is
/// set, else -delta, threshold N(delta - 1); sign output with weights
/// +-gamma following the table and threshold -sum_j W_j.
/// `table[j]` is the output for the input whose k-th component is +1 exactly
/// when bit k-1 of j is set. The winner is unique for delta > max(1, N/2);
/// delta >= N also saturates the losing units, so the output is exact.
LayeredNet boolean_net(std::span<const int> table, std::size_t n, double delta = 2.0, double gamma = 1.0);

/// Input vector in {-1, +1}^N for table index j (bit k-1 of j -> component k).
Vector boolean_input(std::size_t j, std::size_t n);

/// Parity of N = 2^k inputs in {0, 1} from a binary tree of XOR blocks of
/// heaviside units; output 1 for an odd number of ones. 3(N - 1) neurons.
LayeredNet parity_net(std::size_t n);

}  // namespace neuro::feedforward
