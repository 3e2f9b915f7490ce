#include "midipose/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace midipose::ad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap map2(const Tensor& t, std::size_t rows, std::size_t cols) {
    return ConstMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MutMap map2(Tensor& t, std::size_t rows, std::size_t cols) {
    return MutMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

std::size_t checked_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

// im2col for channel-major rows: cols is [Cin*K][B*Lout].
void im2col(const Tensor& x, const Conv1dSpec& s, RowMat& cols) {
    const std::size_t batch = x.rows();
    const std::size_t lout = s.out_length();
    cols.setZero(static_cast<Eigen::Index>(s.in_channels * s.kernel),
                 static_cast<Eigen::Index>(batch * lout));
    const double* xp = x.data();
    for (std::size_t b = 0; b < batch; ++b) {
        const double* row = xp + b * s.in_channels * s.in_length;
        for (std::size_t ci = 0; ci < s.in_channels; ++ci) {
            for (std::size_t kk = 0; kk < s.kernel; ++kk) {
                double* dst = cols.data() + (ci * s.kernel + kk) * (batch * lout) + b * lout;
                for (std::size_t lo = 0; lo < lout; ++lo) {
                    const std::ptrdiff_t li =
                        static_cast<std::ptrdiff_t>(lo * s.stride + kk) - static_cast<std::ptrdiff_t>(s.pad);
                    if (li >= 0 && li < static_cast<std::ptrdiff_t>(s.in_length)) {
                        dst[lo] = row[ci * s.in_length + li];
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != checked_product(shape_)) {
        throw std::invalid_argument("Tensor: data length does not match shape");
    }
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Var Tape::push(Node node, const char* op_name) {
    if (!node.value.all_finite()) {
        throw std::runtime_error(std::string(op_name) +
                                 (node.name.empty() ? "" : " (" + node.name + ")") +
                                 ": non-finite output");
    }
    nodes_.push_back(std::move(node));
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad_buffer(std::int32_t idx) {
    Node& nd = nodes_[idx];
    if (nd.grad.size() == 0) nd.grad = Tensor::zeros_like(nd.value);
    return nd.grad;
}

const Tensor& Tape::grad(Var v) const {
    const Node& nd = node(v);
    if (nd.grad.size() == 0) {
        throw std::logic_error("Tape::grad: no gradient recorded; run backward() first");
    }
    return nd.grad;
}

double Tape::min_abs_relu_input() const {
    double m = std::numeric_limits<double>::infinity();
    for (const Node& nd : nodes_) {
        if (nd.op != Op::relu) continue;
        const Tensor& x = nodes_[nd.inputs[0]].value;
        for (std::size_t i = 0; i < x.size(); ++i) m = std::min(m, std::abs(x[i]));
    }
    return m;
}

Var Tape::leaf(Tensor value, std::string name) {
    Node nd;
    nd.op = Op::leaf;
    nd.value = std::move(value);
    nd.grad = Tensor::zeros_like(nd.value);
    nd.requires_grad = true;
    nd.name = std::move(name);
    return push(std::move(nd), "leaf");
}

Var Tape::constant(Tensor value, std::string name) {
    Node nd;
    nd.op = Op::constant;
    nd.value = std::move(value);
    nd.requires_grad = false;
    nd.name = std::move(name);
    return push(std::move(nd), "constant");
}

Var Tape::matmul(Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    if (na.value.rank() != 2 || nb.value.rank() != 2 || na.value.cols() != nb.value.rows()) {
        throw std::invalid_argument("matmul: shape mismatch");
    }
    Node nd;
    nd.op = Op::matmul;
    nd.inputs = {a.idx, b.idx};
    nd.requires_grad = na.requires_grad || nb.requires_grad;
    nd.value = Tensor({na.value.rows(), nb.value.cols()});
    map2(nd.value, na.value.rows(), nb.value.cols()).noalias() =
        map2(na.value, na.value.rows(), na.value.cols()) *
        map2(nb.value, nb.value.rows(), nb.value.cols());
    return push(std::move(nd), "matmul");
}

Var Tape::matmul_nt(Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    if (na.value.rank() != 2 || nb.value.rank() != 2 || na.value.cols() != nb.value.cols()) {
        throw std::invalid_argument("matmul_nt: shape mismatch");
    }
    Node nd;
    nd.op = Op::matmul_nt;
    nd.inputs = {a.idx, b.idx};
    nd.requires_grad = na.requires_grad || nb.requires_grad;
    nd.value = Tensor({na.value.rows(), nb.value.rows()});
    map2(nd.value, na.value.rows(), nb.value.rows()).noalias() =
        map2(na.value, na.value.rows(), na.value.cols()) *
        map2(nb.value, nb.value.rows(), nb.value.cols()).transpose();
    return push(std::move(nd), "matmul_nt");
}

Var Tape::add(Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    if (!na.value.same_shape(nb.value)) throw std::invalid_argument("add: shape mismatch");
    Node nd;
    nd.op = Op::add;
    nd.inputs = {a.idx, b.idx};
    nd.requires_grad = na.requires_grad || nb.requires_grad;
    nd.value = Tensor(na.value.shape());
    for (std::size_t i = 0; i < nd.value.size(); ++i) nd.value[i] = na.value[i] + nb.value[i];
    return push(std::move(nd), "add");
}

Var Tape::add_rowvec(Var x, Var b) {
    const Node& nx = node(x);
    const Node& nb = node(b);
    if (nx.value.rank() != 2 || nb.value.size() != nx.value.cols()) {
        throw std::invalid_argument("add_rowvec: shape mismatch");
    }
    Node nd;
    nd.op = Op::add_rowvec;
    nd.inputs = {x.idx, b.idx};
    nd.requires_grad = nx.requires_grad || nb.requires_grad;
    nd.value = Tensor(nx.value.shape());
    const std::size_t rows = nx.value.rows(), cols = nx.value.cols();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            nd.value[r * cols + c] = nx.value[r * cols + c] + nb.value[c];
        }
    }
    return push(std::move(nd), "add_rowvec");
}

Var Tape::linear(Var x, Var w, Var b) { return add_rowvec(matmul(x, w), b); }

Var Tape::scale(Var x, double c) {
    const Node& nx = node(x);
    Node nd;
    nd.op = Op::scale;
    nd.inputs = {x.idx};
    nd.requires_grad = nx.requires_grad;
    nd.attr_c = c;
    nd.value = Tensor(nx.value.shape());
    for (std::size_t i = 0; i < nd.value.size(); ++i) nd.value[i] = c * nx.value[i];
    return push(std::move(nd), "scale");
}

Var Tape::relu(Var x) {
    const Node& nx = node(x);
    Node nd;
    nd.op = Op::relu;
    nd.inputs = {x.idx};
    nd.requires_grad = nx.requires_grad;
    nd.value = Tensor(nx.value.shape());
    for (std::size_t i = 0; i < nd.value.size(); ++i) nd.value[i] = std::max(0.0, nx.value[i]);
    return push(std::move(nd), "relu");
}

Var Tape::softmax_rows(Var x) {
    const Node& nx = node(x);
    if (nx.value.rank() != 2) throw std::invalid_argument("softmax_rows: rank-2 input required");
    Node nd;
    nd.op = Op::softmax;
    nd.inputs = {x.idx};
    nd.requires_grad = nx.requires_grad;
    nd.value = Tensor(nx.value.shape());
    const std::size_t rows = nx.value.rows(), cols = nx.value.cols();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = nx.value.data() + r * cols;
        double* out = nd.value.data() + r * cols;
        double m = in[0];
        for (std::size_t c = 1; c < cols; ++c) m = std::max(m, in[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            out[c] = std::exp(in[c] - m);
            sum += out[c];
        }
        for (std::size_t c = 0; c < cols; ++c) out[c] /= sum;
    }
    return push(std::move(nd), "softmax");
}

Var Tape::mse(Var pred, Var target) {
    const Node& np = node(pred);
    const Node& nt = node(target);
    if (!np.value.same_shape(nt.value)) throw std::invalid_argument("mse: shape mismatch");
    Node nd;
    nd.op = Op::mse;
    nd.inputs = {pred.idx, target.idx};
    nd.requires_grad = np.requires_grad || nt.requires_grad;
    double acc = 0.0;
    for (std::size_t i = 0; i < np.value.size(); ++i) {
        const double d = np.value[i] - nt.value[i];
        acc += d * d;
    }
    nd.value = Tensor::scalar(acc / static_cast<double>(np.value.size()));
    return push(std::move(nd), "mse");
}

Var Tape::slice_cols(Var x, std::size_t c0, std::size_t c1) {
    const Node& nx = node(x);
    if (nx.value.rank() != 2 || c0 >= c1 || c1 > nx.value.cols()) {
        throw std::invalid_argument("slice_cols: bad range");
    }
    Node nd;
    nd.op = Op::slice_cols;
    nd.inputs = {x.idx};
    nd.requires_grad = nx.requires_grad;
    nd.attr_a = c0;
    nd.attr_b = c1;
    const std::size_t rows = nx.value.rows(), cols = nx.value.cols(), w = c1 - c0;
    nd.value = Tensor({rows, w});
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(nx.value.data() + r * cols + c0, w, nd.value.data() + r * w);
    }
    return push(std::move(nd), "slice_cols");
}

Var Tape::concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const std::size_t rows = node(parts[0]).value.rows();
    std::size_t total = 0;
    Node nd;
    nd.op = Op::concat_cols;
    nd.requires_grad = false;
    for (Var p : parts) {
        const Node& np = node(p);
        if (np.value.rank() != 2 || np.value.rows() != rows) {
            throw std::invalid_argument("concat_cols: row mismatch");
        }
        total += np.value.cols();
        nd.requires_grad = nd.requires_grad || np.requires_grad;
        nd.inputs.push_back(p.idx);
    }
    nd.value = Tensor({rows, total});
    std::size_t off = 0;
    for (Var p : parts) {
        const Node& np = node(p);
        const std::size_t w = np.value.cols();
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(np.value.data() + r * w, w, nd.value.data() + r * total + off);
        }
        off += w;
    }
    return push(std::move(nd), "concat_cols");
}

Var Tape::interleave_rows(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("interleave_rows: no inputs");
    const std::size_t k = parts.size();
    const std::size_t rows = node(parts[0]).value.rows();
    const std::size_t cols = node(parts[0]).value.cols();
    Node nd;
    nd.op = Op::interleave_rows;
    nd.requires_grad = false;
    for (Var p : parts) {
        const Node& np = node(p);
        if (np.value.rank() != 2 || np.value.rows() != rows || np.value.cols() != cols) {
            throw std::invalid_argument("interleave_rows: shape mismatch");
        }
        nd.requires_grad = nd.requires_grad || np.requires_grad;
        nd.inputs.push_back(p.idx);
    }
    nd.value = Tensor({rows * k, cols});
    for (std::size_t i = 0; i < k; ++i) {
        const Node& np = node(parts[i]);
        for (std::size_t b = 0; b < rows; ++b) {
            std::copy_n(np.value.data() + b * cols, cols, nd.value.data() + (b * k + i) * cols);
        }
    }
    return push(std::move(nd), "interleave_rows");
}

Var Tape::group_rows(Var x, std::size_t t) {
    const Node& nx = node(x);
    if (nx.value.rank() != 2 || t == 0 || nx.value.rows() % t != 0) {
        throw std::invalid_argument("group_rows: rows not divisible by group size");
    }
    Node nd;
    nd.op = Op::group_rows;
    nd.inputs = {x.idx};
    nd.requires_grad = nx.requires_grad;
    nd.attr_a = t;
    // Row-major reshape: data is already laid out group-contiguously.
    nd.value = Tensor({nx.value.rows() / t, nx.value.cols() * t});
    std::copy_n(nx.value.data(), nx.value.size(), nd.value.data());
    return push(std::move(nd), "group_rows");
}

Var Tape::block_matmul_nt(Var q, Var k, std::size_t t) {
    const Node& nq = node(q);
    const Node& nk = node(k);
    if (nq.value.rank() != 2 || !nq.value.same_shape(nk.value) || t == 0 ||
        nq.value.rows() % t != 0) {
        throw std::invalid_argument("block_matmul_nt: shape mismatch");
    }
    const std::size_t groups = nq.value.rows() / t;
    const std::size_t d = nq.value.cols();
    Node nd;
    nd.op = Op::block_matmul_nt;
    nd.inputs = {q.idx, k.idx};
    nd.requires_grad = nq.requires_grad || nk.requires_grad;
    nd.attr_a = t;
    nd.value = Tensor({nq.value.rows(), t});
    for (std::size_t g = 0; g < groups; ++g) {
        ConstMap qg(nq.value.data() + g * t * d, t, d);
        ConstMap kg(nk.value.data() + g * t * d, t, d);
        MutMap og(nd.value.data() + g * t * t, t, t);
        og.noalias() = qg * kg.transpose();
    }
    return push(std::move(nd), "block_matmul_nt");
}

Var Tape::block_matmul_nn(Var a, Var v, std::size_t t) {
    const Node& na = node(a);
    const Node& nv = node(v);
    if (na.value.rank() != 2 || nv.value.rank() != 2 || t == 0 || na.value.cols() != t ||
        na.value.rows() % t != 0 || na.value.rows() != nv.value.rows()) {
        throw std::invalid_argument("block_matmul_nn: shape mismatch");
    }
    const std::size_t groups = na.value.rows() / t;
    const std::size_t d = nv.value.cols();
    Node nd;
    nd.op = Op::block_matmul_nn;
    nd.inputs = {a.idx, v.idx};
    nd.requires_grad = na.requires_grad || nv.requires_grad;
    nd.attr_a = t;
    nd.value = Tensor({na.value.rows(), d});
    for (std::size_t g = 0; g < groups; ++g) {
        ConstMap ag(na.value.data() + g * t * t, t, t);
        ConstMap vg(nv.value.data() + g * t * d, t, d);
        MutMap og(nd.value.data() + g * t * d, t, d);
        og.noalias() = ag * vg;
    }
    return push(std::move(nd), "block_matmul_nn");
}

Var Tape::conv1d(Var x, Var w, Var b, const Conv1dSpec& spec) {
    const Node& nx = node(x);
    const Node& nw = node(w);
    const Node& nb = node(b);
    if (nx.value.rank() != 2 || nx.value.cols() != spec.in_channels * spec.in_length ||
        nw.value.rank() != 2 || nw.value.rows() != spec.out_channels ||
        nw.value.cols() != spec.in_channels * spec.kernel || nb.value.size() != spec.out_channels) {
        throw std::invalid_argument("conv1d: shape mismatch");
    }
    const std::size_t batch = nx.value.rows();
    const std::size_t lout = spec.out_length();

    RowMat cols;
    im2col(nx.value, spec, cols);
    RowMat y2(spec.out_channels, batch * lout);
    y2.noalias() = map2(nw.value, spec.out_channels, spec.in_channels * spec.kernel) * cols;

    Node nd;
    nd.op = Op::conv1d;
    nd.inputs = {x.idx, w.idx, b.idx};
    nd.requires_grad = nx.requires_grad || nw.requires_grad || nb.requires_grad;
    nd.conv = spec;
    nd.value = Tensor({batch, spec.out_channels * lout});
    for (std::size_t bi = 0; bi < batch; ++bi) {
        for (std::size_t co = 0; co < spec.out_channels; ++co) {
            const double bias = nb.value[co];
            double* dst = nd.value.data() + bi * spec.out_channels * lout + co * lout;
            const double* src = y2.data() + co * (batch * lout) + bi * lout;
            for (std::size_t lo = 0; lo < lout; ++lo) dst[lo] = src[lo] + bias;
        }
    }
    return push(std::move(nd), "conv1d");
}

Var Tape::global_avg_pool(Var x, std::size_t channels, std::size_t length) {
    const Node& nx = node(x);
    if (nx.value.rank() != 2 || nx.value.cols() != channels * length) {
        throw std::invalid_argument("global_avg_pool: shape mismatch");
    }
    Node nd;
    nd.op = Op::global_avg_pool;
    nd.inputs = {x.idx};
    nd.requires_grad = nx.requires_grad;
    nd.attr_a = channels;
    nd.attr_b = length;
    const std::size_t batch = nx.value.rows();
    nd.value = Tensor({batch, channels});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < channels; ++c) {
            const double* src = nx.value.data() + b * channels * length + c * length;
            double acc = 0.0;
            for (std::size_t l = 0; l < length; ++l) acc += src[l];
            nd.value[b * channels + c] = acc / static_cast<double>(length);
        }
    }
    return push(std::move(nd), "global_avg_pool");
}

void Tape::backward(Var loss) {
    if (node(loss).value.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    if (!node(loss).requires_grad) return;  // nothing tracks gradients
    grad_buffer(loss.idx)[0] = 1.0;
    for (std::int32_t idx = loss.idx; idx >= 0; --idx) {
        Node& nd = nodes_[idx];
        if (!nd.requires_grad || nd.grad.size() == 0) continue;
        backprop_node(idx);
    }
    ran_backward_ = true;
}

void Tape::backprop_node(std::int32_t idx) {
    Node& nd = nodes_[idx];
    const Tensor& g = nd.grad;
    const auto needs = [this](std::int32_t in) { return nodes_[in].requires_grad; };

    switch (nd.op) {
        case Op::leaf:
        case Op::constant:
            break;
        case Op::matmul: {
            const Node& na = nodes_[nd.inputs[0]];
            const Node& nb = nodes_[nd.inputs[1]];
            const std::size_t m = na.value.rows(), kk = na.value.cols(), n = nb.value.cols();
            if (needs(nd.inputs[0])) {
                map2(grad_buffer(nd.inputs[0]), m, kk).noalias() +=
                    map2(g, m, n) * map2(nb.value, kk, n).transpose();
            }
            if (needs(nd.inputs[1])) {
                map2(grad_buffer(nd.inputs[1]), kk, n).noalias() +=
                    map2(na.value, m, kk).transpose() * map2(g, m, n);
            }
            break;
        }
        case Op::matmul_nt: {
            const Node& na = nodes_[nd.inputs[0]];
            const Node& nb = nodes_[nd.inputs[1]];
            const std::size_t m = na.value.rows(), kk = na.value.cols(), n = nb.value.rows();
            if (needs(nd.inputs[0])) {
                map2(grad_buffer(nd.inputs[0]), m, kk).noalias() +=
                    map2(g, m, n) * map2(nb.value, n, kk);
            }
            if (needs(nd.inputs[1])) {
                map2(grad_buffer(nd.inputs[1]), n, kk).noalias() +=
                    map2(g, m, n).transpose() * map2(na.value, m, kk);
            }
            break;
        }
        case Op::add: {
            for (int side = 0; side < 2; ++side) {
                if (!needs(nd.inputs[side])) continue;
                Tensor& gi = grad_buffer(nd.inputs[side]);
                for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
            }
            break;
        }
        case Op::add_rowvec: {
            const std::size_t rows = nd.value.rows(), cols = nd.value.cols();
            if (needs(nd.inputs[0])) {
                Tensor& gx = grad_buffer(nd.inputs[0]);
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
            }
            if (needs(nd.inputs[1])) {
                Tensor& gb = grad_buffer(nd.inputs[1]);
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
                }
            }
            break;
        }
        case Op::scale: {
            if (needs(nd.inputs[0])) {
                Tensor& gx = grad_buffer(nd.inputs[0]);
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += nd.attr_c * g[i];
            }
            break;
        }
        case Op::relu: {
            if (needs(nd.inputs[0])) {
                const Node& nx = nodes_[nd.inputs[0]];
                Tensor& gx = grad_buffer(nd.inputs[0]);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    if (nx.value[i] > 0.0) gx[i] += g[i];
                }
            }
            break;
        }
        case Op::softmax: {
            if (needs(nd.inputs[0])) {
                Tensor& gx = grad_buffer(nd.inputs[0]);
                const std::size_t rows = nd.value.rows(), cols = nd.value.cols();
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* y = nd.value.data() + r * cols;
                    const double* gy = g.data() + r * cols;
                    double dot = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) dot += gy[c] * y[c];
                    double* gi = gx.data() + r * cols;
                    for (std::size_t c = 0; c < cols; ++c) gi[c] += y[c] * (gy[c] - dot);
                }
            }
            break;
        }
        case Op::mse: {
            const Node& np = nodes_[nd.inputs[0]];
            const Node& nt = nodes_[nd.inputs[1]];
            const double s = 2.0 * g[0] / static_cast<double>(np.value.size());
            if (needs(nd.inputs[0])) {
                Tensor& gp = grad_buffer(nd.inputs[0]);
                for (std::size_t i = 0; i < np.value.size(); ++i) {
                    gp[i] += s * (np.value[i] - nt.value[i]);
                }
            }
            if (needs(nd.inputs[1])) {
                Tensor& gt = grad_buffer(nd.inputs[1]);
                for (std::size_t i = 0; i < np.value.size(); ++i) {
                    gt[i] -= s * (np.value[i] - nt.value[i]);
                }
            }
            break;
        }
        case Op::slice_cols: {
            if (needs(nd.inputs[0])) {
                const Node& nx = nodes_[nd.inputs[0]];
                Tensor& gx = grad_buffer(nd.inputs[0]);
                const std::size_t rows = nx.value.rows(), cols = nx.value.cols();
                const std::size_t w = nd.attr_b - nd.attr_a;
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t c = 0; c < w; ++c) {
                        gx[r * cols + nd.attr_a + c] += g[r * w + c];
                    }
                }
            }
            break;
        }
        case Op::concat_cols: {
            const std::size_t rows = nd.value.rows(), total = nd.value.cols();
            std::size_t off = 0;
            for (std::int32_t in : nd.inputs) {
                const std::size_t w = nodes_[in].value.cols();
                if (needs(in)) {
                    Tensor& gi = grad_buffer(in);
                    for (std::size_t r = 0; r < rows; ++r) {
                        for (std::size_t c = 0; c < w; ++c) gi[r * w + c] += g[r * total + off + c];
                    }
                }
                off += w;
            }
            break;
        }
        case Op::interleave_rows: {
            const std::size_t k = nd.inputs.size();
            const std::size_t cols = nd.value.cols();
            const std::size_t rows = nd.value.rows() / k;
            for (std::size_t i = 0; i < k; ++i) {
                if (!needs(nd.inputs[i])) continue;
                Tensor& gi = grad_buffer(nd.inputs[i]);
                for (std::size_t b = 0; b < rows; ++b) {
                    const double* src = g.data() + (b * k + i) * cols;
                    double* dst = gi.data() + b * cols;
                    for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
                }
            }
            break;
        }
        case Op::group_rows: {
            if (needs(nd.inputs[0])) {
                Tensor& gx = grad_buffer(nd.inputs[0]);
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
            }
            break;
        }
        case Op::block_matmul_nt: {
            const Node& nq = nodes_[nd.inputs[0]];
            const Node& nk = nodes_[nd.inputs[1]];
            const std::size_t t = nd.attr_a;
            const std::size_t groups = nq.value.rows() / t;
            const std::size_t d = nq.value.cols();
            for (std::size_t gi = 0; gi < groups; ++gi) {
                ConstMap gg(g.data() + gi * t * t, t, t);
                ConstMap qg(nq.value.data() + gi * t * d, t, d);
                ConstMap kg(nk.value.data() + gi * t * d, t, d);
                if (needs(nd.inputs[0])) {
                    MutMap(grad_buffer(nd.inputs[0]).data() + gi * t * d, t, d).noalias() += gg * kg;
                }
                if (needs(nd.inputs[1])) {
                    MutMap(grad_buffer(nd.inputs[1]).data() + gi * t * d, t, d).noalias() +=
                        gg.transpose() * qg;
                }
            }
            break;
        }
        case Op::block_matmul_nn: {
            const Node& na = nodes_[nd.inputs[0]];
            const Node& nv = nodes_[nd.inputs[1]];
            const std::size_t t = nd.attr_a;
            const std::size_t groups = na.value.rows() / t;
            const std::size_t d = nv.value.cols();
            for (std::size_t gi = 0; gi < groups; ++gi) {
                ConstMap gg(g.data() + gi * t * d, t, d);
                ConstMap ag(na.value.data() + gi * t * t, t, t);
                ConstMap vg(nv.value.data() + gi * t * d, t, d);
                if (needs(nd.inputs[0])) {
                    MutMap(grad_buffer(nd.inputs[0]).data() + gi * t * t, t, t).noalias() +=
                        gg * vg.transpose();
                }
                if (needs(nd.inputs[1])) {
                    MutMap(grad_buffer(nd.inputs[1]).data() + gi * t * d, t, d).noalias() +=
                        ag.transpose() * gg;
                }
            }
            break;
        }
        case Op::conv1d: {
            const Node& nx = nodes_[nd.inputs[0]];
            const Node& nw = nodes_[nd.inputs[1]];
            const Conv1dSpec& s = nd.conv;
            const std::size_t batch = nx.value.rows();
            const std::size_t lout = s.out_length();

            // Reassemble the channel-major gradient as [Cout][B*Lout].
            RowMat g2(s.out_channels, batch * lout);
            for (std::size_t bi = 0; bi < batch; ++bi) {
                for (std::size_t co = 0; co < s.out_channels; ++co) {
                    const double* src = g.data() + bi * s.out_channels * lout + co * lout;
                    double* dst = g2.data() + co * (batch * lout) + bi * lout;
                    std::copy_n(src, lout, dst);
                }
            }
            if (needs(nd.inputs[2])) {
                Tensor& gb = grad_buffer(nd.inputs[2]);
                for (std::size_t co = 0; co < s.out_channels; ++co) {
                    gb[co] += g2.row(static_cast<Eigen::Index>(co)).sum();
                }
            }
            if (needs(nd.inputs[1])) {
                RowMat cols;
                im2col(nx.value, s, cols);
                map2(grad_buffer(nd.inputs[1]), s.out_channels, s.in_channels * s.kernel)
                    .noalias() += g2 * cols.transpose();
            }
            if (needs(nd.inputs[0])) {
                RowMat dcols(s.in_channels * s.kernel, batch * lout);
                dcols.noalias() =
                    map2(nw.value, s.out_channels, s.in_channels * s.kernel).transpose() * g2;
                Tensor& gx = grad_buffer(nd.inputs[0]);
                for (std::size_t bi = 0; bi < batch; ++bi) {
                    double* grow = gx.data() + bi * s.in_channels * s.in_length;
                    for (std::size_t ci = 0; ci < s.in_channels; ++ci) {
                        for (std::size_t kk = 0; kk < s.kernel; ++kk) {
                            const double* src =
                                dcols.data() + (ci * s.kernel + kk) * (batch * lout) + bi * lout;
                            for (std::size_t lo = 0; lo < lout; ++lo) {
                                const std::ptrdiff_t li = static_cast<std::ptrdiff_t>(lo * s.stride + kk) -
                                                          static_cast<std::ptrdiff_t>(s.pad);
                                if (li >= 0 && li < static_cast<std::ptrdiff_t>(s.in_length)) {
                                    grow[ci * s.in_length + li] += src[lo];
                                }
                            }
                        }
                    }
                }
            }
            break;
        }
        case Op::global_avg_pool: {
            if (needs(nd.inputs[0])) {
                Tensor& gx = grad_buffer(nd.inputs[0]);
                const std::size_t channels = nd.attr_a, length = nd.attr_b;
                const std::size_t batch = nd.value.rows();
                const double inv = 1.0 / static_cast<double>(length);
                for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t c = 0; c < channels; ++c) {
                        const double gv = g[b * channels + c] * inv;
                        double* dst = gx.data() + b * channels * length + c * length;
                        for (std::size_t l = 0; l < length; ++l) dst[l] += gv;
                    }
                }
            }
            break;
        }
    }
}

Var multi_head_attention(Tape& tape, Var tokens, const AttentionWeights& w, std::size_t t,
                         std::size_t heads) {
    const Tensor& tv = tape.value(tokens);
    if (tv.rank() != 2) throw std::invalid_argument("multi_head_attention: rank-2 tokens required");
    const std::size_t d = tv.cols();
    if (heads == 0 || d % heads != 0) {
        throw std::invalid_argument("multi_head_attention: model dim not divisible by head count");
    }
    if (t == 0 || tv.rows() % t != 0) {
        throw std::invalid_argument("multi_head_attention: token count not divisible by group size");
    }
    const std::size_t dh = d / heads;

    const Var q = tape.linear(tokens, w.wq, w.bq);
    const Var k = tape.matmul(tokens, w.wk);
    const Var v = tape.linear(tokens, w.wv, w.bv);

    std::vector<Var> head_out;
    head_out.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const Var qh = tape.slice_cols(q, h * dh, (h + 1) * dh);
        const Var kh = tape.slice_cols(k, h * dh, (h + 1) * dh);
        const Var vh = tape.slice_cols(v, h * dh, (h + 1) * dh);
        const Var scores = tape.scale(tape.block_matmul_nt(qh, kh, t), 1.0 / std::sqrt(double(dh)));
        const Var attn = tape.softmax_rows(scores);
        head_out.push_back(tape.block_matmul_nn(attn, vh, t));
    }
    const Var merged = tape.concat_cols(head_out);
    return tape.linear(merged, w.wo, w.bo);
}

Var residual_block(Tape& tape, Var x, const MlpWeights& w) {
    const Var hidden = tape.relu(tape.linear(x, w.w1, w.b1));
    return tape.add(x, tape.linear(hidden, w.w2, w.b2));
}

double grad_check(const std::function<Var(Tape&, std::span<const Var>)>& build,
                  std::span<Tensor> params, double h) {
    const auto eval = [&](double* analytic_out) -> double {
        Tape tape;
        std::vector<Var> leaves;
        leaves.reserve(params.size());
        for (const Tensor& p : params) leaves.push_back(tape.leaf(p));
        const Var loss = build(tape, leaves);
        if (tape.value(loss).size() != 1) {
            throw std::invalid_argument("grad_check: loss must be scalar");
        }
        if (analytic_out != nullptr) {
            tape.backward(loss);
            double* out = analytic_out;
            for (const Var leaf : leaves) {
                const Tensor& gr = tape.grad(leaf);
                std::copy_n(gr.data(), gr.size(), out);
                out += gr.size();
            }
        }
        return tape.value(loss)[0];
    };

    std::size_t total = 0;
    for (const Tensor& p : params) total += p.size();
    std::vector<double> analytic(total);
    eval(analytic.data());

    double max_rel = 0.0;
    std::size_t flat = 0;
    for (Tensor& p : params) {
        for (std::size_t i = 0; i < p.size(); ++i, ++flat) {
            const double orig = p[i];
            p[i] = orig + h;
            const double fp = eval(nullptr);
            p[i] = orig - h;
            const double fm = eval(nullptr);
            p[i] = orig;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[flat];
            const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace midipose::ad
