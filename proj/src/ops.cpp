// SPDX-License-Identifier: Apache-2.0

#include "primevo/ops.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Core>

namespace primevo {

namespace {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

// Vocabulary-ordered traits. Depthwise convolutions keep their input width,
// so their dim argument is treated as unused (the weights are per-channel).
const OpTraits kTraits[] = {
    {"ADD", true, false, false, false, 0, false},
    {"DIFFERENCE", true, false, false, false, 0, false},
    {"DIVIDE", true, false, false, false, 0, false},
    {"MULTIPLY", true, false, false, false, 0, false},
    {"ABS_SQUARE_ROOT", false, false, false, false, 0, false},
    {"SQUARE", false, false, false, false, 0, false},
    {"EXP", false, false, false, false, 0, false},
    {"LOG", false, false, false, false, 0, false},
    {"CONSTANT_MUL", false, true, false, false, 0, false},
    {"ABS", false, false, false, false, 0, false},
    {"RECIP", false, false, false, false, 0, false},
    {"SIGN", false, false, false, false, 0, false},
    {"COS", false, false, false, false, 0, false},
    {"SIN", false, false, false, false, 0, false},
    {"TANH", false, false, false, false, 0, false},
    {"MAX", false, true, false, false, 0, false},
    {"MIN", false, true, false, false, 0, false},
    {"SCALE", false, false, false, true, 0, false},
    {"SHIFT", false, false, false, true, 0, false},
    {"SIGMOID", false, false, false, false, 0, false},
    {"EMBEDDING_MASK", false, false, false, false, 0, false},
    {"CUM_PROD", false, false, false, false, 0, false},
    {"CUM_SUM", false, false, false, false, 0, false},
    {"REDUCE_MEAN", false, false, false, false, 0, false},
    {"REDUCE_SUM", false, false, false, false, 0, false},
    {"REDUCE_MIN", false, false, false, false, 0, false},
    {"REDUCE_MAX", false, false, false, false, 0, false},
    {"REDUCE_PROD", false, false, false, false, 0, false},
    {"MAT_MUL", true, false, false, false, 0, false},
    {"TRANSPOSE_MAT_MUL", true, false, false, false, 0, false},
    {"DENSE", false, false, true, true, 1, false},
    {"CONV_3X1", false, false, true, true, 3, false},
    {"CONV_7X1", false, false, true, true, 7, false},
    {"CONV_15X1", false, false, true, true, 15, false},
    {"CONV_31X1", false, false, true, true, 31, false},
    {"DEPTHWISE_CONV_3X1", false, false, false, true, 3, true},
    {"DEPTHWISE_CONV_7X1", false, false, false, true, 7, true},
    {"DEPTHWISE_CONV_15X1", false, false, false, true, 15, true},
    {"DEPTHWISE_CONV_31X1", false, false, false, true, 31, true},
    // graph-only
    {"INPUT", false, false, false, false, 0, false},
    {"CONCAT", false, false, false, false, 0, false},
    {"TILE_CHANNELS", false, false, false, false, 0, false},
    {"TRUNC_CHANNELS", false, false, false, false, 0, false},
    {"EMBED", false, false, false, true, 0, false},
    {"POS_EMBED", false, false, false, true, 0, false},
    {"PROJECT", false, false, false, true, 0, false},
    {"PROJECT_TIED", false, false, false, false, 0, false},
    {"SOFTMAX_XENT", true, false, false, false, 0, false},
    {"SUM_ALL", false, false, false, false, 0, false},
};

void require(bool cond, const char* msg) {
    if (!cond) throw ShapeMismatch(msg);
}

}  // namespace

const OpTraits& op_traits(Op op) { return kTraits[static_cast<int>(op)]; }
const char* op_name(Op op) { return op_traits(op).name; }

std::optional<Op> op_from_name(const std::string& name) {
    static const std::unordered_map<std::string, Op> table = [] {
        std::unordered_map<std::string, Op> m;
        for (int i = 0; i < static_cast<int>(std::size(kTraits)); ++i) {
            m.emplace(kTraits[i].name, static_cast<Op>(i));
        }
        return m;
    }();
    auto it = table.find(name);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

bool is_binary_elementwise(Op op) { return op >= Op::Add && op <= Op::Multiply; }
bool is_unary_elementwise(Op op) {
    return (op >= Op::AbsRoot && op <= Op::Min) || op == Op::Sigmoid;
}
bool is_reduction(Op op) { return op >= Op::RedMean && op <= Op::RedProd; }
bool is_cumulative(Op op) { return op == Op::CumProd || op == Op::CumSum; }
bool is_matmul(Op op) { return op == Op::MatMul || op == Op::TMatMul; }
bool is_conv(Op op) { return op >= Op::Conv1x1 && op <= Op::DConv31x1; }

double guard_value(double v, const Guards& g) {
    if (!g.enabled) return v;
    if (std::isnan(v)) return 0.0;
    return std::clamp(v, -kClampMagnitude, kClampMagnitude);
}

namespace kernels {

namespace {

template <typename F>
Tensor map_elementwise(const Tensor& x, const Guards& g, F&& f) {
    Tensor out(x.batch(), x.seq(), x.channel());
    const double* in = x.data();
    double* o = out.data();
    const std::int64_t n = x.size();
    for (std::int64_t i = 0; i < n; ++i) o[i] = guard_value(f(in[i]), g);
    return out;
}

}  // namespace

Tensor apply_unary(Op op, const Tensor& x, double c, const Guards& g) {
    switch (op) {
        case Op::AbsRoot:
            return map_elementwise(x, g, [](double v) { return std::sqrt(std::abs(v)); });
        case Op::Square:
            return map_elementwise(x, g, [](double v) { return v * v; });
        case Op::Exp:
            if (g.enabled) {
                return map_elementwise(x, g, [](double v) { return std::exp(std::min(v, kExpArgCap)); });
            }
            return map_elementwise(x, g, [](double v) { return std::exp(v); });
        case Op::Log:
            if (g.enabled) {
                return map_elementwise(
                    x, g, [](double v) { return std::log(std::max(std::abs(v), kLogFloor)); });
            }
            return map_elementwise(x, g, [](double v) { return std::log(std::abs(v)); });
        case Op::CMul:
            return map_elementwise(x, g, [c](double v) { return c * v; });
        case Op::Abs:
            return map_elementwise(x, g, [](double v) { return std::abs(v); });
        case Op::Recip:
            if (g.enabled) {
                return map_elementwise(x, g, [](double v) { return v == 0.0 ? 0.0 : 1.0 / v; });
            }
            return map_elementwise(x, g, [](double v) { return 1.0 / v; });
        case Op::Sign:
            return map_elementwise(x, g, [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
        case Op::Cos:
            return map_elementwise(x, g, [](double v) { return std::cos(v); });
        case Op::Sin:
            return map_elementwise(x, g, [](double v) { return std::sin(v); });
        case Op::Tanh:
            return map_elementwise(x, g, [](double v) { return std::tanh(v); });
        case Op::Max:
            return map_elementwise(x, g, [c](double v) { return std::max(v, c); });
        case Op::Min:
            return map_elementwise(x, g, [c](double v) { return std::min(v, c); });
        case Op::Sigmoid:
            return map_elementwise(x, g, [](double v) {
                return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
            });
        default:
            throw ContractViolation(std::string("apply_unary: not a unary op: ") + op_name(op));
    }
}

Tensor apply_binary(Op op, const Tensor& x, const Tensor& y, const Guards& g) {
    require(x.batch() == y.batch() && x.seq() == y.seq(),
            "binary op: batch/seq mismatch");
    const int cx = x.channel(), cy = y.channel();
    require(cx == cy || cx == 1 || cy == 1, "binary op: incompatible channel widths");
    const int co = std::max(cx, cy);
    Tensor out(x.batch(), x.seq(), co);
    auto lhs = [&](int b, int s, int c) { return x.at(b, s, cx == 1 ? 0 : c); };
    auto rhs = [&](int b, int s, int c) { return y.at(b, s, cy == 1 ? 0 : c); };
    for (int b = 0; b < x.batch(); ++b) {
        for (int s = 0; s < x.seq(); ++s) {
            for (int c = 0; c < co; ++c) {
                double a = lhs(b, s, c), v = rhs(b, s, c), r = 0.0;
                switch (op) {
                    case Op::Add: r = a + v; break;
                    case Op::Difference: r = a - v; break;
                    case Op::Divide:
                        r = (g.enabled && v == 0.0) ? 0.0 : a / v;
                        break;
                    case Op::Multiply: r = a * v; break;
                    default:
                        throw ContractViolation(std::string("apply_binary: not a binary op: ") +
                                                op_name(op));
                }
                out.at(b, s, c) = guard_value(r, g);
            }
        }
    }
    return out;
}

Tensor apply_reduction(Op op, const Tensor& x, const Guards& g) {
    Tensor out(x.batch(), x.seq(), 1);
    const int c = x.channel();
    for (int b = 0; b < x.batch(); ++b) {
        for (int s = 0; s < x.seq(); ++s) {
            double acc = 0.0;
            switch (op) {
                case Op::RedMean:
                case Op::RedSum:
                    for (int i = 0; i < c; ++i) acc += x.at(b, s, i);
                    if (op == Op::RedMean) acc /= c;
                    break;
                case Op::RedMin:
                    acc = x.at(b, s, 0);
                    for (int i = 1; i < c; ++i) acc = std::min(acc, x.at(b, s, i));
                    break;
                case Op::RedMax:
                    acc = x.at(b, s, 0);
                    for (int i = 1; i < c; ++i) acc = std::max(acc, x.at(b, s, i));
                    break;
                case Op::RedProd:
                    acc = 1.0;
                    for (int i = 0; i < c; ++i) acc = guard_value(acc * x.at(b, s, i), g);
                    break;
                default:
                    throw ContractViolation(std::string("apply_reduction: not a reduction: ") +
                                            op_name(op));
            }
            out.at(b, s, 0) = guard_value(acc, g);
        }
    }
    return out;
}

Tensor apply_cumulative(Op op, const Tensor& x, const Guards& g) {
    if (op != Op::CumSum && op != Op::CumProd) {
        throw ContractViolation(std::string("apply_cumulative: not a scan: ") + op_name(op));
    }
    Tensor out(x.batch(), x.seq(), x.channel());
    for (int b = 0; b < x.batch(); ++b) {
        for (int c = 0; c < x.channel(); ++c) {
            double acc = (op == Op::CumSum) ? 0.0 : 1.0;
            for (int s = 0; s < x.seq(); ++s) {
                acc = (op == Op::CumSum) ? acc + x.at(b, s, c) : acc * x.at(b, s, c);
                acc = guard_value(acc, g);
                out.at(b, s, c) = acc;
            }
        }
    }
    return out;
}

Tensor apply_mask(const Tensor& x) {
    if (!x.is_square_map()) {
        throw ShapeMismatch("MASK requires square trailing axes, got seq=" +
                            std::to_string(x.seq()) + " channel=" + std::to_string(x.channel()));
    }
    Tensor out = x;
    for (int b = 0; b < x.batch(); ++b) {
        for (int i = 0; i < x.seq(); ++i) {
            for (int j = i + 1; j < x.channel(); ++j) out.at(b, i, j) = 0.0;
        }
    }
    return out;
}

Tensor matmul_pair(Op op, const Tensor& a, const Tensor& b, bool causal, const Guards& g) {
    require(a.batch() == b.batch(), "matmul: batch mismatch");
    const int s = a.seq();
    if (op == Op::TMatMul) {
        require(a.channel() == b.channel(), "T_MAT_MUL: channel widths must match");
        require(a.seq() == b.seq(), "T_MAT_MUL: seq mismatch");
        Tensor out(a.batch(), s, s);
        for (int bi = 0; bi < a.batch(); ++bi) {
            ConstMapRM A(a.data() + static_cast<std::int64_t>(bi) * s * a.channel(), s, a.channel());
            ConstMapRM B(b.data() + static_cast<std::int64_t>(bi) * s * b.channel(), s, b.channel());
            MapRM O(out.data() + static_cast<std::int64_t>(bi) * s * s, s, s);
            O.noalias() = A * B.transpose();
        }
        if (causal) {
            for (int bi = 0; bi < a.batch(); ++bi)
                for (int i = 0; i < s; ++i)
                    for (int j = i + 1; j < s; ++j) out.at(bi, i, j) = 0.0;
        }
        for (double& v : out.vec()) v = guard_value(v, g);
        return out;
    }
    if (op == Op::MatMul) {
        require(a.channel() == b.seq(), "MAT_MUL: inner dimension mismatch");
        Tensor out(a.batch(), s, b.channel());
        Tensor lhs = a;
        if (causal) {
            require(a.seq() == b.seq(), "causal MAT_MUL: seq mismatch");
            for (int bi = 0; bi < a.batch(); ++bi)
                for (int i = 0; i < s; ++i)
                    for (int j = i + 1; j < a.channel(); ++j) lhs.at(bi, i, j) = 0.0;
        }
        for (int bi = 0; bi < a.batch(); ++bi) {
            ConstMapRM A(lhs.data() + static_cast<std::int64_t>(bi) * s * a.channel(), s, a.channel());
            ConstMapRM B(b.data() + static_cast<std::int64_t>(bi) * b.seq() * b.channel(), b.seq(),
                         b.channel());
            MapRM O(out.data() + static_cast<std::int64_t>(bi) * s * b.channel(), s, b.channel());
            O.noalias() = A * B;
        }
        for (double& v : out.vec()) v = guard_value(v, g);
        return out;
    }
    throw ContractViolation(std::string("matmul_pair: not a matmul op: ") + op_name(op));
}

Tensor conv1x1(const Tensor& x, const Tensor& w, const Tensor& bias, const Guards& g) {
    require(w.seq() == x.channel(), "DENSE: weight rows must equal input width");
    const int co = w.channel();
    Tensor out(x.batch(), x.seq(), co);
    const std::int64_t rows = static_cast<std::int64_t>(x.batch()) * x.seq();
    ConstMapRM X(x.data(), rows, x.channel());
    ConstMapRM W(w.data(), w.seq(), co);
    MapRM O(out.data(), rows, co);
    O.noalias() = X * W;
    ConstMapRM B(bias.data(), 1, co);
    O.rowwise() += B.row(0);
    for (double& v : out.vec()) v = guard_value(v, g);
    return out;
}

Tensor conv_kx1(const Tensor& x, const Tensor& w, const Tensor& bias, int k, const Guards& g) {
    require(w.batch() == k && w.seq() == x.channel(), "CONV_KX1: weight shape mismatch");
    const int co = w.channel();
    const int s = x.seq();
    Tensor out(x.batch(), s, co);
    for (int bi = 0; bi < x.batch(); ++bi) {
        ConstMapRM X(x.data() + static_cast<std::int64_t>(bi) * s * x.channel(), s, x.channel());
        MapRM O(out.data() + static_cast<std::int64_t>(bi) * s * co, s, co);
        O.setZero();
        for (int t = 0; t < k; ++t) {
            // tap t reads x[i - (k-1) + t]; rows shifted so positions only see the past
            const int delta = (k - 1) - t;
            if (delta >= s) continue;
            ConstMapRM Wt(w.data() + static_cast<std::int64_t>(t) * x.channel() * co, x.channel(),
                          co);
            O.block(delta, 0, s - delta, co).noalias() += X.block(0, 0, s - delta, x.channel()) * Wt;
        }
        ConstMapRM B(bias.data(), 1, co);
        O.rowwise() += B.row(0);
    }
    for (double& v : out.vec()) v = guard_value(v, g);
    return out;
}

Tensor dconv_kx1(const Tensor& x, const Tensor& w, int k, const Guards& g) {
    require(w.seq() == k && w.channel() == x.channel(), "DCONV_KX1: weight shape mismatch");
    const int s = x.seq();
    Tensor out(x.batch(), s, x.channel());
    for (int bi = 0; bi < x.batch(); ++bi) {
        for (int i = 0; i < s; ++i) {
            for (int c = 0; c < x.channel(); ++c) {
                double acc = 0.0;
                for (int t = 0; t < k; ++t) {
                    const int src = i - (k - 1) + t;
                    if (src >= 0) acc += w.at(0, t, c) * x.at(bi, src, c);
                }
                out.at(bi, i, c) = guard_value(acc, g);
            }
        }
    }
    return out;
}

Tensor apply_learned(Op op, const Tensor& x, const Tensor& vec, const Guards& g) {
    if (vec.channel() != x.channel()) {
        throw ShapeMismatch("SCALE/SHIFT parameter width " + std::to_string(vec.channel()) +
                            " does not match input width " + std::to_string(x.channel()));
    }
    Tensor out(x.batch(), x.seq(), x.channel());
    for (int b = 0; b < x.batch(); ++b) {
        for (int s = 0; s < x.seq(); ++s) {
            for (int c = 0; c < x.channel(); ++c) {
                double v = (op == Op::Scale) ? x.at(b, s, c) * vec.at(0, 0, c)
                                             : x.at(b, s, c) + vec.at(0, 0, c);
                out.at(b, s, c) = guard_value(v, g);
            }
        }
    }
    return out;
}

Tensor concat_channels(const std::vector<const Tensor*>& parts) {
    require(!parts.empty(), "concat: no inputs");
    int total = 0;
    for (const Tensor* p : parts) {
        require(p->batch() == parts[0]->batch() && p->seq() == parts[0]->seq(),
                "concat: batch/seq mismatch");
        total += p->channel();
    }
    Tensor out(parts[0]->batch(), parts[0]->seq(), total);
    for (int b = 0; b < out.batch(); ++b) {
        for (int s = 0; s < out.seq(); ++s) {
            int off = 0;
            for (const Tensor* p : parts) {
                for (int c = 0; c < p->channel(); ++c) out.at(b, s, off + c) = p->at(b, s, c);
                off += p->channel();
            }
        }
    }
    return out;
}

Tensor tile_channels(const Tensor& x, int target) {
    Tensor out(x.batch(), x.seq(), target);
    for (int b = 0; b < x.batch(); ++b)
        for (int s = 0; s < x.seq(); ++s)
            for (int c = 0; c < target; ++c) out.at(b, s, c) = x.at(b, s, c % x.channel());
    return out;
}

Tensor trunc_channels(const Tensor& x, int target) {
    require(target <= x.channel(), "trunc_channels: target wider than input");
    Tensor out(x.batch(), x.seq(), target);
    for (int b = 0; b < x.batch(); ++b)
        for (int s = 0; s < x.seq(); ++s)
            for (int c = 0; c < target; ++c) out.at(b, s, c) = x.at(b, s, c);
    return out;
}

Tensor embed(const Tensor& ids, const Tensor& table) {
    const int vocab = table.seq(), d = table.channel();
    Tensor out(ids.batch(), ids.seq(), d);
    for (int b = 0; b < ids.batch(); ++b) {
        for (int s = 0; s < ids.seq(); ++s) {
            int id = static_cast<int>(ids.at(b, s, 0));
            id = std::clamp(id, 0, vocab - 1);
            for (int c = 0; c < d; ++c) out.at(b, s, c) = table.at(0, id, c);
        }
    }
    return out;
}

Tensor pos_add(const Tensor& x, const Tensor& table) {
    require(table.seq() >= x.seq() && table.channel() == x.channel(),
            "pos_add: table too small");
    Tensor out = x;
    for (int b = 0; b < x.batch(); ++b)
        for (int s = 0; s < x.seq(); ++s)
            for (int c = 0; c < x.channel(); ++c) out.at(b, s, c) += table.at(0, s, c);
    return out;
}

Tensor project(const Tensor& x, const Tensor& w) {
    require(w.seq() == x.channel(), "project: weight rows must equal input width");
    const int vocab = w.channel();
    Tensor out(x.batch(), x.seq(), vocab);
    const std::int64_t rows = static_cast<std::int64_t>(x.batch()) * x.seq();
    ConstMapRM X(x.data(), rows, x.channel());
    ConstMapRM W(w.data(), w.seq(), vocab);
    MapRM O(out.data(), rows, vocab);
    O.noalias() = X * W;
    return out;
}

Tensor project_tied(const Tensor& x, const Tensor& table) {
    require(table.channel() == x.channel(), "project_tied: width mismatch");
    const int vocab = table.seq();
    Tensor out(x.batch(), x.seq(), vocab);
    const std::int64_t rows = static_cast<std::int64_t>(x.batch()) * x.seq();
    ConstMapRM X(x.data(), rows, x.channel());
    ConstMapRM E(table.data(), vocab, table.channel());
    MapRM O(out.data(), rows, vocab);
    O.noalias() = X * E.transpose();
    return out;
}

Tensor softmax_xent(const Tensor& logits, const Tensor& targets) {
    require(targets.batch() == logits.batch() && targets.seq() == logits.seq() &&
                targets.channel() == 1,
            "softmax_xent: target shape mismatch");
    const int vocab = logits.channel();
    double total = 0.0;
    for (int b = 0; b < logits.batch(); ++b) {
        for (int s = 0; s < logits.seq(); ++s) {
            double mx = logits.at(b, s, 0);
            for (int c = 1; c < vocab; ++c) mx = std::max(mx, logits.at(b, s, c));
            double z = 0.0;
            for (int c = 0; c < vocab; ++c) z += std::exp(logits.at(b, s, c) - mx);
            int tgt = std::clamp(static_cast<int>(targets.at(b, s, 0)), 0, vocab - 1);
            total += (mx + std::log(z)) - logits.at(b, s, tgt);
        }
    }
    return Tensor::scalar(total / (static_cast<double>(logits.batch()) * logits.seq()));
}

Tensor sum_all(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.vec()) acc += v;
    return Tensor::scalar(acc);
}

}  // namespace kernels

int out_width(Op op, int w1, int w2, int dim_arg, int seq) {
    if (is_binary_elementwise(op)) {
        if (w1 == w2) return w1;
        if (w1 == 1 || w2 == 1) return std::max(w1, w2);
        throw ShapeMismatch("binary width conflict");  // resolver runs before this
    }
    if (is_unary_elementwise(op) || is_cumulative(op) || op == Op::Scale || op == Op::Shift) {
        return w1;
    }
    if (is_reduction(op)) return 1;
    if (op == Op::Mask) {
        if (w1 != seq) {
            throw ShapeMismatch("MASK requires square trailing axes");
        }
        return seq;
    }
    if (op == Op::TMatMul) {
        if (w1 != w2) throw ShapeMismatch("T_MAT_MUL width conflict");
        return seq;
    }
    if (op == Op::MatMul) {
        if (w1 != seq) throw ShapeMismatch("MAT_MUL inner dimension mismatch");
        return w2;
    }
    if (is_conv(op)) {
        const OpTraits& t = op_traits(op);
        if (t.depthwise) return w1;
        if (dim_arg <= 0) throw InvalidDimension("conv output width must be positive");
        return dim_arg;
    }
    throw ContractViolation(std::string("out_width: unsupported op ") + op_name(op));
}

}  // namespace primevo
