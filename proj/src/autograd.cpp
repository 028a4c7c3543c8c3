// SPDX-License-Identifier: Apache-2.0

#include "primevo/autograd.hpp"

#include <algorithm>
#include <cmath>

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Core>

namespace primevo {

namespace {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

// Accumulate g into dst, folding the channel axis when dst is the broadcast
// (channel = 1) side of an elementwise op.
void accumulate(Tensor& dst, const Tensor& g) {
    if (dst.shape() == g.shape()) {
        double* d = dst.data();
        const double* s = g.data();
        for (std::int64_t i = 0; i < g.size(); ++i) d[i] += s[i];
        return;
    }
    if (dst.channel() == 1 && dst.batch() == g.batch() && dst.seq() == g.seq()) {
        for (int b = 0; b < g.batch(); ++b)
            for (int s = 0; s < g.seq(); ++s) {
                double acc = 0.0;
                for (int c = 0; c < g.channel(); ++c) acc += g.at(b, s, c);
                dst.at(b, s, 0) += acc;
            }
        return;
    }
    throw ContractViolation("gradient accumulation shape mismatch");
}

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

Tape forward_tape(const Graph& g, const Params& p, const Tensor& x, const Tensor* targets) {
    Tape t;
    t.graph = &g;
    t.values = run_all(g, p, x, targets);
    t.x = &x;
    t.targets = targets;
    return t;
}

bool GradientSet::all_finite() const {
    for (const Tensor& t : param_grads) {
        if (!t.all_finite()) return false;
    }
    return true;
}

double GradientSet::global_norm() const {
    double acc = 0.0;
    for (std::size_t i = 0; i < param_grads.size(); ++i) {
        if (!touched[i]) continue;
        for (double v : param_grads[i].vec()) acc += v * v;
    }
    return std::sqrt(acc);
}

GradientSet backward(const Tape& tape, const Params& p) {
    return backward(tape, p, Tensor::scalar(1.0));
}

GradientSet backward(const Tape& tape, const Params& p, const Tensor& loss_seed) {
    const Graph& g = *tape.graph;
    const std::vector<Tensor>& vals = tape.values;
    const Tensor& out = vals[g.output];
    if (out.size() != 1) {
        throw ContractViolation("backward requires a scalar loss node");
    }
    const bool guards = g.guards.enabled;

    GradientSet gs;
    gs.param_grads.resize(g.params.size());
    gs.touched.assign(g.params.size(), 0);
    for (std::size_t i = 0; i < g.params.size(); ++i) {
        const Shape& s = g.params[i].shape;
        gs.param_grads[i] = Tensor(s.batch, s.seq, s.channel);
    }

    std::vector<Tensor> adj(g.nodes.size());
    std::vector<char> live(g.nodes.size(), 0);
    adj[g.output] = Tensor(out.batch(), out.seq(), out.channel());
    adj[g.output].vec()[0] = loss_seed.vec()[0];
    live[g.output] = 1;

    auto ensure = [&](int id) -> Tensor& {
        if (!live[id]) {
            const Shape& s = vals[id].shape();
            adj[id] = Tensor(s.batch, s.seq, s.channel);
            live[id] = 1;
        }
        return adj[id];
    };

    auto touch_param = [&](int pid) { gs.touched[pid] = 1; };

    for (int id = static_cast<int>(g.nodes.size()) - 1; id >= 0; --id) {
        if (!live[id]) continue;
        const Node& n = g.nodes[id];
        const Tensor& gout = adj[id];
        const Tensor& out_v = vals[id];
        auto inv = [&](int i) -> const Tensor& { return vals[n.inputs[i]]; };

        // elementwise helpers: dx(b,s,c-view aware of broadcast)
        auto elementwise_binary = [&](auto&& dfdx, auto&& dfdy) {
            const Tensor& x = inv(0);
            const Tensor& y = inv(1);
            Tensor gx(x.batch(), x.seq(), x.channel());
            Tensor gy(y.batch(), y.seq(), y.channel());
            const int co = gout.channel();
            for (int b = 0; b < gout.batch(); ++b)
                for (int s = 0; s < gout.seq(); ++s)
                    for (int c = 0; c < co; ++c) {
                        const double gv = gout.at(b, s, c);
                        if (gv == 0.0) continue;
                        const double ov = out_v.at(b, s, c);
                        if (guards && std::abs(ov) >= kClampMagnitude) continue;
                        const double xv = x.at(b, s, x.channel() == 1 ? 0 : c);
                        const double yv = y.at(b, s, y.channel() == 1 ? 0 : c);
                        gx.at(b, s, x.channel() == 1 ? 0 : c) += gv * dfdx(xv, yv);
                        gy.at(b, s, y.channel() == 1 ? 0 : c) += gv * dfdy(xv, yv);
                    }
            accumulate(ensure(n.inputs[0]), gx);
            accumulate(ensure(n.inputs[1]), gy);
        };
        auto elementwise_unary = [&](auto&& dfdx) {
            const Tensor& x = inv(0);
            Tensor& gx = ensure(n.inputs[0]);
            for (std::int64_t i = 0; i < x.size(); ++i) {
                const double gv = gout.vec()[i];
                if (gv == 0.0) continue;
                const double ov = out_v.vec()[i];
                if (guards && std::abs(ov) >= kClampMagnitude) continue;
                gx.vec()[i] += gv * dfdx(x.vec()[i], ov);
            }
        };

        switch (n.op) {
            case Op::Input:
                break;
            case Op::Add:
                elementwise_binary([](double, double) { return 1.0; },
                                   [](double, double) { return 1.0; });
                break;
            case Op::Difference:
                elementwise_binary([](double, double) { return 1.0; },
                                   [](double, double) { return -1.0; });
                break;
            case Op::Multiply:
                elementwise_binary([](double, double y) { return y; },
                                   [](double x, double) { return x; });
                break;
            case Op::Divide:
                if (guards) {
                    elementwise_binary(
                        [](double, double y) { return y == 0.0 ? 0.0 : 1.0 / y; },
                        [](double x, double y) { return y == 0.0 ? 0.0 : -x / (y * y); });
                } else {
                    elementwise_binary([](double, double y) { return 1.0 / y; },
                                       [](double x, double y) { return -x / (y * y); });
                }
                break;
            case Op::AbsRoot:
                elementwise_unary([](double x, double) {
                    return x == 0.0 ? 0.0 : sgn(x) / (2.0 * std::sqrt(std::abs(x)));
                });
                break;
            case Op::Square:
                elementwise_unary([](double x, double) { return 2.0 * x; });
                break;
            case Op::Exp:
                if (guards) {
                    elementwise_unary(
                        [](double x, double o) { return x < kExpArgCap ? o : 0.0; });
                } else {
                    elementwise_unary([](double, double o) { return o; });
                }
                break;
            case Op::Log:
                if (guards) {
                    elementwise_unary(
                        [](double x, double) { return std::abs(x) > kLogFloor ? 1.0 / x : 0.0; });
                } else {
                    elementwise_unary([](double x, double) { return 1.0 / x; });
                }
                break;
            case Op::CMul:
                elementwise_unary([&](double, double) { return n.constant; });
                break;
            case Op::Abs:
                elementwise_unary([](double x, double) { return sgn(x); });
                break;
            case Op::Recip:
                if (guards) {
                    elementwise_unary(
                        [](double x, double) { return x == 0.0 ? 0.0 : -1.0 / (x * x); });
                } else {
                    elementwise_unary([](double x, double) { return -1.0 / (x * x); });
                }
                break;
            case Op::Sign:
                break;  // zero everywhere
            case Op::Cos:
                elementwise_unary([](double x, double) { return -std::sin(x); });
                break;
            case Op::Sin:
                elementwise_unary([](double x, double) { return std::cos(x); });
                break;
            case Op::Tanh:
                elementwise_unary([](double, double o) { return 1.0 - o * o; });
                break;
            case Op::Max:
                elementwise_unary([&](double x, double) { return x > n.constant ? 1.0 : 0.0; });
                break;
            case Op::Min:
                elementwise_unary([&](double x, double) { return x < n.constant ? 1.0 : 0.0; });
                break;
            case Op::Sigmoid:
                elementwise_unary([](double, double o) { return o * (1.0 - o); });
                break;
            case Op::Scale: {
                const Tensor& x = inv(0);
                const Tensor& v = p.values[n.param];
                Tensor& gx = ensure(n.inputs[0]);
                Tensor& gv = gs.param_grads[n.param];
                touch_param(n.param);
                for (int b = 0; b < x.batch(); ++b)
                    for (int s = 0; s < x.seq(); ++s)
                        for (int c = 0; c < x.channel(); ++c) {
                            const double gvv = gout.at(b, s, c);
                            gx.at(b, s, c) += gvv * v.at(0, 0, c);
                            gv.at(0, 0, c) += gvv * x.at(b, s, c);
                        }
                break;
            }
            case Op::Shift: {
                Tensor& gx = ensure(n.inputs[0]);
                Tensor& gv = gs.param_grads[n.param];
                touch_param(n.param);
                for (int b = 0; b < gout.batch(); ++b)
                    for (int s = 0; s < gout.seq(); ++s)
                        for (int c = 0; c < gout.channel(); ++c) {
                            gx.at(b, s, c) += gout.at(b, s, c);
                            gv.at(0, 0, c) += gout.at(b, s, c);
                        }
                break;
            }
            case Op::Mask: {
                Tensor& gx = ensure(n.inputs[0]);
                for (int b = 0; b < gout.batch(); ++b)
                    for (int i = 0; i < gout.seq(); ++i)
                        for (int j = 0; j <= i; ++j) gx.at(b, i, j) += gout.at(b, i, j);
                break;
            }
            case Op::CumSum: {
                const Tensor& x = inv(0);
                Tensor& gx = ensure(n.inputs[0]);
                for (int b = 0; b < x.batch(); ++b)
                    for (int c = 0; c < x.channel(); ++c) {
                        double acc = 0.0;
                        for (int s = x.seq() - 1; s >= 0; --s) {
                            acc += gout.at(b, s, c);
                            gx.at(b, s, c) += acc;
                        }
                    }
                break;
            }
            case Op::CumProd: {
                const Tensor& x = inv(0);
                Tensor& gx = ensure(n.inputs[0]);
                const int sq = x.seq();
                for (int b = 0; b < x.batch(); ++b)
                    for (int c = 0; c < x.channel(); ++c) {
                        double prefix = 1.0;  // product of x[0..j-1]
                        for (int j = 0; j < sq; ++j) {
                            double acc = 0.0, q = 1.0;
                            for (int i = j; i < sq; ++i) {
                                if (i > j) q *= x.at(b, i, c);
                                acc += gout.at(b, i, c) * q;
                            }
                            gx.at(b, j, c) += prefix * acc;
                            prefix *= x.at(b, j, c);
                        }
                    }
                break;
            }
            case Op::RedMean:
            case Op::RedSum: {
                const Tensor& x = inv(0);
                Tensor& gx = ensure(n.inputs[0]);
                const double scale = n.op == Op::RedMean ? 1.0 / x.channel() : 1.0;
                for (int b = 0; b < x.batch(); ++b)
                    for (int s = 0; s < x.seq(); ++s) {
                        const double gv = gout.at(b, s, 0) * scale;
                        for (int c = 0; c < x.channel(); ++c) gx.at(b, s, c) += gv;
                    }
                break;
            }
            case Op::RedMin:
            case Op::RedMax: {
                const Tensor& x = inv(0);
                Tensor& gx = ensure(n.inputs[0]);
                for (int b = 0; b < x.batch(); ++b)
                    for (int s = 0; s < x.seq(); ++s) {
                        int best = 0;
                        for (int c = 1; c < x.channel(); ++c) {
                            if (n.op == Op::RedMin ? x.at(b, s, c) < x.at(b, s, best)
                                                   : x.at(b, s, c) > x.at(b, s, best)) {
                                best = c;
                            }
                        }
                        gx.at(b, s, best) += gout.at(b, s, 0);
                    }
                break;
            }
            case Op::RedProd: {
                const Tensor& x = inv(0);
                Tensor& gx = ensure(n.inputs[0]);
                const int ch = x.channel();
                std::vector<double> prefix(ch + 1), suffix(ch + 1);
                for (int b = 0; b < x.batch(); ++b)
                    for (int s = 0; s < x.seq(); ++s) {
                        prefix[0] = 1.0;
                        for (int c = 0; c < ch; ++c) prefix[c + 1] = prefix[c] * x.at(b, s, c);
                        suffix[ch] = 1.0;
                        for (int c = ch - 1; c >= 0; --c) suffix[c] = suffix[c + 1] * x.at(b, s, c);
                        const double gv = gout.at(b, s, 0);
                        for (int c = 0; c < ch; ++c) {
                            gx.at(b, s, c) += gv * prefix[c] * suffix[c + 1];
                        }
                    }
                break;
            }
            case Op::TMatMul: {
                const Tensor& a = inv(0);
                const Tensor& k = inv(1);
                Tensor& ga = ensure(n.inputs[0]);
                Tensor& gk = ensure(n.inputs[1]);
                const int s = a.seq(), c = a.channel();
                Tensor gm = gout;
                if (n.causal) {
                    for (int b = 0; b < gm.batch(); ++b)
                        for (int i = 0; i < s; ++i)
                            for (int j = i + 1; j < s; ++j) gm.at(b, i, j) = 0.0;
                }
                for (int b = 0; b < a.batch(); ++b) {
                    ConstMapRM A(a.data() + static_cast<std::int64_t>(b) * s * c, s, c);
                    ConstMapRM K(k.data() + static_cast<std::int64_t>(b) * s * c, s, c);
                    ConstMapRM G(gm.data() + static_cast<std::int64_t>(b) * s * s, s, s);
                    MapRM GA(ga.data() + static_cast<std::int64_t>(b) * s * c, s, c);
                    MapRM GK(gk.data() + static_cast<std::int64_t>(b) * s * c, s, c);
                    GA.noalias() += G * K;
                    GK.noalias() += G.transpose() * A;
                }
                break;
            }
            case Op::MatMul: {
                const Tensor& a = inv(0);
                const Tensor& v = inv(1);
                Tensor& ga = ensure(n.inputs[0]);
                Tensor& gv = ensure(n.inputs[1]);
                const int s = a.seq(), k = a.channel(), c = v.channel();
                Tensor lhs = a;
                if (n.causal) {
                    for (int b = 0; b < a.batch(); ++b)
                        for (int i = 0; i < s; ++i)
                            for (int j = i + 1; j < k; ++j) lhs.at(b, i, j) = 0.0;
                }
                for (int b = 0; b < a.batch(); ++b) {
                    ConstMapRM A(lhs.data() + static_cast<std::int64_t>(b) * s * k, s, k);
                    ConstMapRM V(v.data() + static_cast<std::int64_t>(b) * k * c, k, c);
                    ConstMapRM G(gout.data() + static_cast<std::int64_t>(b) * s * c, s, c);
                    MatrixRM GA = G * V.transpose();
                    if (n.causal) {
                        for (int i = 0; i < s; ++i)
                            for (int j = i + 1; j < k; ++j) GA(i, j) = 0.0;
                    }
                    MapRM GAm(ga.data() + static_cast<std::int64_t>(b) * s * k, s, k);
                    GAm.noalias() += GA;
                    MapRM GV(gv.data() + static_cast<std::int64_t>(b) * k * c, k, c);
                    GV.noalias() += A.transpose() * G;
                }
                break;
            }
            case Op::Conv1x1: {
                const Tensor& x = inv(0);
                Tensor& gx = ensure(n.inputs[0]);
                Tensor& gw = gs.param_grads[n.param];
                Tensor& gb = gs.param_grads[n.param2];
                touch_param(n.param);
                touch_param(n.param2);
                const std::int64_t rows = static_cast<std::int64_t>(x.batch()) * x.seq();
                ConstMapRM X(x.data(), rows, x.channel());
                ConstMapRM W(p.values[n.param].data(), x.channel(), n.width);
                ConstMapRM G(gout.data(), rows, n.width);
                MapRM GX(gx.data(), rows, x.channel());
                GX.noalias() += G * W.transpose();
                MapRM GW(gw.data(), x.channel(), n.width);
                GW.noalias() += X.transpose() * G;
                MapRM GB(gb.data(), 1, n.width);
                GB.row(0) += G.colwise().sum();
                break;
            }
            case Op::Conv3x1:
            case Op::Conv7x1:
            case Op::Conv15x1:
            case Op::Conv31x1: {
                if (n.uncausal) throw ContractViolation("backward through test-only uncausal conv");
                const int kw = op_traits(n.op).conv_width;
                const Tensor& x = inv(0);
                Tensor& gx = ensure(n.inputs[0]);
                Tensor& gw = gs.param_grads[n.param];
                Tensor& gb = gs.param_grads[n.param2];
                touch_param(n.param);
                touch_param(n.param2);
                const int s = x.seq(), ci = x.channel(), co = n.width;
                for (int b = 0; b < x.batch(); ++b) {
                    ConstMapRM X(x.data() + static_cast<std::int64_t>(b) * s * ci, s, ci);
                    ConstMapRM G(gout.data() + static_cast<std::int64_t>(b) * s * co, s, co);
                    MapRM GX(gx.data() + static_cast<std::int64_t>(b) * s * ci, s, ci);
                    for (int t = 0; t < kw; ++t) {
                        const int delta = (kw - 1) - t;
                        if (delta >= s) continue;
                        ConstMapRM W(p.values[n.param].data() +
                                         static_cast<std::int64_t>(t) * ci * co,
                                     ci, co);
                        MapRM GW(gw.data() + static_cast<std::int64_t>(t) * ci * co, ci, co);
                        GX.block(0, 0, s - delta, ci).noalias() +=
                            G.block(delta, 0, s - delta, co) * W.transpose();
                        GW.noalias() +=
                            X.block(0, 0, s - delta, ci).transpose() * G.block(delta, 0, s - delta, co);
                    }
                    MapRM GB(gb.data(), 1, co);
                    GB.row(0) += G.colwise().sum();
                }
                break;
            }
            case Op::DConv3x1:
            case Op::DConv7x1:
            case Op::DConv15x1:
            case Op::DConv31x1: {
                if (n.uncausal) throw ContractViolation("backward through test-only uncausal conv");
                const int kw = op_traits(n.op).conv_width;
                const Tensor& x = inv(0);
                const Tensor& w = p.values[n.param];
                Tensor& gx = ensure(n.inputs[0]);
                Tensor& gw = gs.param_grads[n.param];
                touch_param(n.param);
                for (int b = 0; b < x.batch(); ++b)
                    for (int i = 0; i < x.seq(); ++i)
                        for (int c = 0; c < x.channel(); ++c) {
                            const double gv = gout.at(b, i, c);
                            if (gv == 0.0) continue;
                            for (int t = 0; t < kw; ++t) {
                                const int src = i - (kw - 1) + t;
                                if (src < 0) continue;
                                gx.at(b, src, c) += gv * w.at(0, t, c);
                                gw.at(0, t, c) += gv * x.at(b, src, c);
                            }
                        }
                break;
            }
            case Op::Concat: {
                int off = 0;
                for (int in_id : n.inputs) {
                    const Tensor& part = vals[in_id];
                    Tensor& gp = ensure(in_id);
                    for (int b = 0; b < part.batch(); ++b)
                        for (int s = 0; s < part.seq(); ++s)
                            for (int c = 0; c < part.channel(); ++c)
                                gp.at(b, s, c) += gout.at(b, s, off + c);
                    off += part.channel();
                }
                break;
            }
            case Op::TileChannels: {
                const Tensor& x = inv(0);
                Tensor& gx = ensure(n.inputs[0]);
                for (int b = 0; b < gout.batch(); ++b)
                    for (int s = 0; s < gout.seq(); ++s)
                        for (int c = 0; c < gout.channel(); ++c)
                            gx.at(b, s, c % x.channel()) += gout.at(b, s, c);
                break;
            }
            case Op::TruncChannels: {
                Tensor& gx = ensure(n.inputs[0]);
                for (int b = 0; b < gout.batch(); ++b)
                    for (int s = 0; s < gout.seq(); ++s)
                        for (int c = 0; c < gout.channel(); ++c) gx.at(b, s, c) += gout.at(b, s, c);
                break;
            }
            case Op::Embed: {
                const Tensor& ids = inv(0);
                const Tensor& table = p.values[n.param];
                Tensor& gt = gs.param_grads[n.param];
                touch_param(n.param);
                for (int b = 0; b < ids.batch(); ++b)
                    for (int s = 0; s < ids.seq(); ++s) {
                        int id = std::clamp(static_cast<int>(ids.at(b, s, 0)), 0, table.seq() - 1);
                        for (int c = 0; c < table.channel(); ++c)
                            gt.at(0, id, c) += gout.at(b, s, c);
                    }
                break;
            }
            case Op::PosEmbed: {
                Tensor& gx = ensure(n.inputs[0]);
                Tensor& gt = gs.param_grads[n.param];
                touch_param(n.param);
                for (int b = 0; b < gout.batch(); ++b)
                    for (int s = 0; s < gout.seq(); ++s)
                        for (int c = 0; c < gout.channel(); ++c) {
                            gx.at(b, s, c) += gout.at(b, s, c);
                            gt.at(0, s, c) += gout.at(b, s, c);
                        }
                break;
            }
            case Op::Project: {
                const Tensor& x = inv(0);
                Tensor& gx = ensure(n.inputs[0]);
                Tensor& gw = gs.param_grads[n.param];
                touch_param(n.param);
                const std::int64_t rows = static_cast<std::int64_t>(x.batch()) * x.seq();
                ConstMapRM X(x.data(), rows, x.channel());
                ConstMapRM W(p.values[n.param].data(), x.channel(), n.width);
                ConstMapRM G(gout.data(), rows, n.width);
                MapRM GX(gx.data(), rows, x.channel());
                GX.noalias() += G * W.transpose();
                MapRM GW(gw.data(), x.channel(), n.width);
                GW.noalias() += X.transpose() * G;
                break;
            }
            case Op::ProjectTied: {
                const Tensor& x = inv(0);
                const Tensor& table = p.values[n.param];
                Tensor& gx = ensure(n.inputs[0]);
                Tensor& gt = gs.param_grads[n.param];
                touch_param(n.param);
                const std::int64_t rows = static_cast<std::int64_t>(x.batch()) * x.seq();
                ConstMapRM X(x.data(), rows, x.channel());
                ConstMapRM E(table.data(), table.seq(), table.channel());
                ConstMapRM G(gout.data(), rows, n.width);
                MapRM GX(gx.data(), rows, x.channel());
                GX.noalias() += G * E;
                MapRM GT(gt.data(), table.seq(), table.channel());
                GT.noalias() += G.transpose() * X;
                break;
            }
            case Op::SoftmaxXent: {
                const Tensor& logits = inv(0);
                const Tensor& tg = inv(1);
                Tensor& gl = ensure(n.inputs[0]);
                const int vocab = logits.channel();
                const double seed = gout.vec()[0] /
                                    (static_cast<double>(logits.batch()) * logits.seq());
                for (int b = 0; b < logits.batch(); ++b)
                    for (int s = 0; s < logits.seq(); ++s) {
                        double mx = logits.at(b, s, 0);
                        for (int c = 1; c < vocab; ++c) mx = std::max(mx, logits.at(b, s, c));
                        double z = 0.0;
                        for (int c = 0; c < vocab; ++c) z += std::exp(logits.at(b, s, c) - mx);
                        const int tgt = std::clamp(static_cast<int>(tg.at(b, s, 0)), 0, vocab - 1);
                        for (int c = 0; c < vocab; ++c) {
                            const double sm = std::exp(logits.at(b, s, c) - mx) / z;
                            gl.at(b, s, c) += seed * (sm - (c == tgt ? 1.0 : 0.0));
                        }
                    }
                break;
            }
            case Op::SumAll: {
                Tensor& gx = ensure(n.inputs[0]);
                const double gv = gout.vec()[0];
                for (double& v : gx.vec()) v += gv;
                break;
            }
            default:
                throw ContractViolation(std::string("no backward rule for op ") + op_name(n.op));
        }
    }

    // input gradient (slot 0); zero when nothing differentiable reaches it
    for (int id = 0; id < static_cast<int>(g.nodes.size()); ++id) {
        if (g.nodes[id].op == Op::Input && g.nodes[id].slot == 0) {
            gs.input_grad = live[id] ? adj[id]
                                     : Tensor(vals[id].batch(), vals[id].seq(), vals[id].channel());
        }
    }
    return gs;
}

GradCheckReport grad_check(const Graph& g, const Params& p, const Tensor& x,
                           const Tensor* targets, double epsilon, double tolerance,
                           int max_coords_per_param, std::uint64_t seed) {
    if (epsilon <= 0.0) throw ContractViolation("grad_check: epsilon must be positive");
    Tape tape = forward_tape(g, p, x, targets);
    if (tape.output().size() != 1) {
        throw ContractViolation("grad_check: graph output must be scalar");
    }
    GradientSet gs = backward(tape, p);

    GradCheckReport rep;
    Rng rng(seed);
    Params work = p;
    for (int pid = 0; pid < static_cast<int>(g.params.size()); ++pid) {
        const std::int64_t n = work.values[pid].size();
        const int coords = static_cast<int>(std::min<std::int64_t>(n, max_coords_per_param));
        for (int k = 0; k < coords; ++k) {
            const std::int64_t idx =
                coords == n ? k : static_cast<std::int64_t>(rng.index(static_cast<std::uint64_t>(n)));
            double& slot = work.values[pid].vec()[idx];
            const double orig = slot;
            slot = orig + epsilon;
            const double up = run_output(g, work, x, targets).vec()[0];
            slot = orig - epsilon;
            const double dn = run_output(g, work, x, targets).vec()[0];
            slot = orig;
            const double fd = (up - dn) / (2.0 * epsilon);
            if (!std::isfinite(fd)) {
                throw NumericOverflow("grad_check: non-finite finite-difference estimate");
            }
            const double an = gs.param_grads[pid].vec()[idx];
            const double rel = std::abs(fd - an) / std::max(std::abs(fd) + std::abs(an), 1e-4);
            ++rep.coords_checked;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_param = pid;
                rep.worst_coord = static_cast<int>(idx);
            }
        }
    }
    rep.pass = rep.max_rel_err < tolerance;
    return rep;
}

}  // namespace primevo
