#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace midipose::ad {

/// Dense row-major f64 tensor. Rank 1 and 2 cover everything the models
/// need; higher-rank data is carried flattened with explicit strides at the
/// op level.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> values);
    static Tensor scalar(double v);
    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t rows() const { return shape_.at(0); }
    std::size_t cols() const { return shape_.at(1); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

/// Handle to a node on a Tape.
struct Var {
    std::int32_t idx = -1;
    bool valid() const { return idx >= 0; }
};

/// 1-D convolution geometry: input rows are channel-major [Cin * Lin],
/// weights [Cout][Cin * K], zero padding on both ends.
struct Conv1dSpec {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t pad = 0;
    std::size_t in_length = 0;

    std::size_t out_length() const {
        const std::size_t padded = in_length + 2 * pad;
        if (padded < kernel) throw std::invalid_argument("conv1d: kernel larger than padded input");
        return (padded - kernel) / stride + 1;
    }
};

/// Computation tape. Nodes are appended in topological order during the
/// forward pass; backward() walks them exactly once in reverse. Every op
/// checks its output for NaN/Inf and throws with the op name on failure.
/// Single-threaded and deterministic: identical input sequences produce
/// bitwise-identical values and gradients.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Gradient-tracked input (model parameters).
    Var leaf(Tensor value, std::string name = {});
    /// Input with no gradient (features, regression targets).
    Var constant(Tensor value, std::string name = {});

    // y = x W + b with x:[B][in], W:[in][out], b:[out]
    Var linear(Var x, Var w, Var b);
    Var matmul(Var a, Var b);
    Var matmul_nt(Var a, Var b);  // A * B^T
    Var add(Var a, Var b);
    Var add_rowvec(Var x, Var b);
    Var scale(Var x, double c);
    Var relu(Var x);
    Var softmax_rows(Var x);
    Var mse(Var pred, Var target);

    Var slice_cols(Var x, std::size_t c0, std::size_t c1);
    Var concat_cols(std::span<const Var> parts);
    /// k tensors of identical shape [B][D] -> [B*k][D], sample-major
    /// (row b*k+i comes from input i).
    Var interleave_rows(std::span<const Var> parts);
    /// [B*T][D] -> [B][T*D]: rows of each group of T concatenated.
    Var group_rows(Var x, std::size_t t);

    /// Block attention products over independent groups of `t` rows:
    /// scores[g] = Q[g] K[g]^T for each group g of t consecutive rows.
    Var block_matmul_nt(Var q, Var k, std::size_t t);
    /// out[g] = A[g] V[g] with A:[B*t][t], V:[B*t][d].
    Var block_matmul_nn(Var a, Var v, std::size_t t);

    Var conv1d(Var x, Var w, Var b, const Conv1dSpec& spec);
    /// [B][C*L] -> [B][C], mean over the length axis.
    Var global_avg_pool(Var x, std::size_t channels, std::size_t length);

    /// Seeds d(loss)/d(loss) = 1 and accumulates gradients into every
    /// gradient-tracked node. `loss` must be scalar.
    void backward(Var loss);

    const Tensor& value(Var v) const { return nodes_.at(v.idx).value; }
    const Tensor& grad(Var v) const;
    std::size_t size() const { return nodes_.size(); }

    /// Smallest |x| feeding any relu on the tape (inf when there is none).
    /// Finite-difference gradient checks are only meaningful when every
    /// pre-activation clears the kink by more than the probe step.
    double min_abs_relu_input() const;

private:
    enum class Op : std::uint8_t {
        leaf,
        constant,
        matmul,
        matmul_nt,
        add,
        add_rowvec,
        scale,
        relu,
        softmax,
        mse,
        slice_cols,
        concat_cols,
        interleave_rows,
        group_rows,
        block_matmul_nt,
        block_matmul_nn,
        conv1d,
        global_avg_pool,
    };

    struct Node {
        Op op;
        std::vector<std::int32_t> inputs;
        Tensor value;
        Tensor grad;  // allocated lazily when requires_grad
        bool requires_grad = false;
        double attr_c = 0.0;
        std::size_t attr_a = 0;
        std::size_t attr_b = 0;
        Conv1dSpec conv;
        std::string name;
    };

    Var push(Node node, const char* op_name);
    Node& node(Var v) { return nodes_.at(v.idx); }
    const Node& node(Var v) const { return nodes_.at(v.idx); }
    Tensor& grad_buffer(std::int32_t idx);
    void backprop_node(std::int32_t idx);

    // deque: references returned by value()/grad() stay valid while the
    // graph keeps growing
    std::deque<Node> nodes_;
    bool ran_backward_ = false;
};

/// Composite layers (built from tape primitives, gradients come for free).
/// The key projection carries no bias: a shared key offset shifts every
/// attention score in a row equally and cancels in the softmax, leaving a
/// parameter the loss cannot see.
struct AttentionWeights {
    Var wq, bq, wk, wv, bv, wo, bo;
};

/// Scaled dot-product multi-head attention over independent token groups.
/// `tokens` is [G*t][D] (G groups of t tokens); every projection is [D][D].
/// D must be divisible by `heads`; scale is 1/sqrt(D/heads).
Var multi_head_attention(Tape& tape, Var tokens, const AttentionWeights& w, std::size_t t,
                         std::size_t heads);

struct MlpWeights {
    Var w1, b1, w2, b2;
};

/// y = x + W2 relu(W1 x + b1) + b2; zero-initialized W2/b2 gives identity.
Var residual_block(Tape& tape, Var x, const MlpWeights& w);

/// Central-difference gradient verification. Builds the graph via `build`
/// (which receives freshly created leaves for `params` in order), compares
/// reverse-mode gradients against (f(p+h) - f(p-h)) / 2h for every
/// coordinate, and returns the maximum relative error
/// |a - n| / max(1e-8, |a| + |n|). Throws if the built loss is not scalar.
double grad_check(const std::function<Var(Tape&, std::span<const Var>)>& build,
                  std::span<Tensor> params, double h = 1e-5);

}  // namespace midipose::ad
