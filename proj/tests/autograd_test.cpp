// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "primevo/autograd.hpp"
#include "primevo/seeds.hpp"

#include <cmath>

using namespace primevo;

namespace {

// single-op scalar-loss graph: loss = sum(op(x)) for a (1, seq, c) input
Graph wrap_unary(Op op, double constant, int seq, int c) {
    Graph g;
    g.seq = seq;
    g.d_model = c;
    Node in;
    in.op = Op::Input;
    in.width = c;
    g.nodes.push_back(in);
    Node n;
    n.op = op;
    n.inputs = {0};
    n.width = c;
    n.constant = constant;
    g.nodes.push_back(n);
    Node s;
    s.op = Op::SumAll;
    s.inputs = {1};
    s.width = 1;
    g.nodes.push_back(s);
    g.output = 2;
    return g;
}

Tensor vec(const std::vector<double>& v) {
    Tensor t(1, 1, static_cast<int>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) t.at(0, 0, static_cast<int>(i)) = v[i];
    return t;
}

// central finite differences on the input of a scalar-loss graph
Tensor fd_input_grad(const Graph& g, const Params& p, const Tensor& x, double eps) {
    Tensor grad(x.batch(), x.seq(), x.channel());
    Tensor work = x;
    for (std::int64_t i = 0; i < x.size(); ++i) {
        const double orig = work.vec()[i];
        work.vec()[i] = orig + eps;
        const double up = run_output(g, p, work).vec()[0];
        work.vec()[i] = orig - eps;
        const double dn = run_output(g, p, work).vec()[0];
        work.vec()[i] = orig;
        grad.vec()[i] = (up - dn) / (2 * eps);
    }
    return grad;
}

}  // namespace

TEST_CASE("backward basics") {
    Params none;
    // loss = sum(x^2) at x = [3] -> dloss/dx = [6]
    Graph sq = wrap_unary(Op::Square, 0.0, 1, 1);
    Tape t1 = forward_tape(sq, none, vec({3}));
    GradientSet g1 = backward(t1, none);
    CHECK(g1.input_grad.vec()[0] == doctest::Approx(6.0));

    // loss = sum(max(x, 0)) at [-1, 2] -> [0, 1]
    Graph relu = wrap_unary(Op::Max, 0.0, 1, 2);
    GradientSet g2 = backward(forward_tape(relu, none, vec({-1, 2})), none);
    CHECK(g2.input_grad.vec() == std::vector<double>{0, 1});

    // squared relu: grad at x = 3 is 2 * 3 = 6
    Graph sqrelu;
    sqrelu.seq = 1;
    sqrelu.d_model = 1;
    Node in;
    in.op = Op::Input;
    in.width = 1;
    Node mx;
    mx.op = Op::Max;
    mx.inputs = {0};
    mx.width = 1;
    Node s2;
    s2.op = Op::Square;
    s2.inputs = {1};
    s2.width = 1;
    Node sm;
    sm.op = Op::SumAll;
    sm.inputs = {2};
    sm.width = 1;
    sqrelu.nodes = {in, mx, s2, sm};
    sqrelu.output = 3;
    GradientSet g3 = backward(forward_tape(sqrelu, none, vec({3})), none);
    CHECK(g3.input_grad.vec()[0] == doctest::Approx(6.0));

    // SIGN has zero gradient everywhere
    Graph sign = wrap_unary(Op::Sign, 0.0, 1, 3);
    GradientSet g4 = backward(forward_tape(sign, none, vec({-2, 0.5, 3})), none);
    CHECK(g4.input_grad.vec() == std::vector<double>{0, 0, 0});

    // non-scalar output rejected
    Graph bad = wrap_unary(Op::Tanh, 0.0, 1, 2);
    bad.output = 1;
    CHECK_THROWS_AS(backward(forward_tape(bad, none, vec({1, 2})), none), ContractViolation);
}

TEST_CASE("gradient linearity in the seed") {
    Params none;
    Graph g = wrap_unary(Op::Tanh, 0.0, 1, 4);
    Tape tape = forward_tape(g, none, vec({0.3, -1, 2, 0.7}));
    GradientSet g1 = backward(tape, none, Tensor::scalar(1.0));
    GradientSet g2 = backward(tape, none, Tensor::scalar(2.5));
    for (int i = 0; i < 4; ++i) {
        CHECK(g2.input_grad.vec()[i] ==
              doctest::Approx(2.5 * g1.input_grad.vec()[i]).epsilon(1e-12));
    }
}

TEST_CASE("per-op input gradients match finite differences away from kinks") {
    Rng rng(123);
    Params none;
    const std::vector<Op> ops = {Op::AbsRoot, Op::Square, Op::Exp,  Op::Log,     Op::CMul,
                                 Op::Abs,     Op::Recip,  Op::Cos,  Op::Sin,     Op::Tanh,
                                 Op::Max,     Op::Min,    Op::Sigmoid};
    int points = 0;
    for (Op op : ops) {
        Graph g = wrap_unary(op, 0.37, 1, 5);
        for (int trial = 0; trial < 3; ++trial) {
            Tensor x(1, 1, 5);
            for (double& v : x.vec()) {
                do {
                    v = rng.normal() * 2.0;
                } while (std::abs(v) < 0.05 || std::abs(v - 0.37) < 0.05);
            }
            GradientSet an = backward(forward_tape(g, none, x), none);
            Tensor fd = fd_input_grad(g, none, x, 1e-5);
            for (int i = 0; i < 5; ++i) {
                ++points;
                const double a = an.input_grad.vec()[i], f = fd.vec()[i];
                CHECK(std::abs(a - f) / std::max(std::abs(a) + std::abs(f), 1e-4) < 1e-4);
            }
        }
    }
    CHECK(points >= 100);
}

TEST_CASE("reduction, scan and matmul gradients match finite differences") {
    Rng rng(321);
    Params none;
    for (Op op : {Op::RedMean, Op::RedSum, Op::RedMin, Op::RedMax, Op::RedProd, Op::CumSum,
                  Op::CumProd}) {
        Graph g;
        g.seq = 4;
        g.d_model = 3;
        Node in;
        in.op = Op::Input;
        in.width = 3;
        Node n;
        n.op = op;
        n.inputs = {0};
        n.width = is_reduction(op) ? 1 : 3;
        Node sm;
        sm.op = Op::SumAll;
        sm.inputs = {1};
        sm.width = 1;
        g.nodes = {in, n, sm};
        g.output = 2;
        Tensor x(1, 4, 3);
        for (double& v : x.vec()) v = rng.normal() + 3.0;  // away from min/max ties
        GradientSet an = backward(forward_tape(g, none, x), none);
        Tensor fd = fd_input_grad(g, none, x, 1e-6);
        for (std::int64_t i = 0; i < x.size(); ++i) {
            const double a = an.input_grad.vec()[i], f = fd.vec()[i];
            CHECK(std::abs(a - f) / std::max(std::abs(a) + std::abs(f), 1e-4) < 1e-4);
        }
    }
}

TEST_CASE("grad check passes on the transformer seed block") {
    CompileConfig cfg;
    cfg.scale_unit = 2;  // d_model 16
    cfg.seq = 6;
    Graph block = compile(transformer_seed(), cfg);
    // wrap the block with a scalar head
    Node s;
    s.op = Op::SumAll;
    s.inputs = {block.output};
    s.width = 1;
    block.nodes.push_back(s);
    block.output = static_cast<int>(block.nodes.size()) - 1;
    Params p = make_params(block, 5);
    Rng rng(8);
    Tensor x(1, cfg.seq, cfg.d_model());
    for (double& v : x.vec()) v = rng.normal();
    GradCheckReport rep = grad_check(block, p, x, nullptr, 1e-5, 1e-4, 4, 99);
    CHECK(rep.pass);
    CHECK(rep.coords_checked >= 30);
}

TEST_CASE("gradients of dead parameters are absent") {
    CompileConfig cfg;
    cfg.scale_unit = 2;
    cfg.seq = 4;
    cfg.eliminate_dead = false;  // keep a dead dense node around
    Dna d;
    d.subprograms.clear();
    Subprogram s;
    Instruction dense;
    dense.op = Op::Conv1x1;
    Instruction tanh_ins;
    tanh_ins.op = Op::Tanh;
    tanh_ins.input1 = 0;
    tanh_ins.input2 = 0;
    s.instructions = {dense, tanh_ins};
    d.subprograms.push_back(s);
    Graph g = compile(d, cfg);
    Node sm;
    sm.op = Op::SumAll;
    sm.inputs = {g.output};
    sm.width = 1;
    g.nodes.push_back(sm);
    g.output = static_cast<int>(g.nodes.size()) - 1;
    REQUIRE(g.params.size() == 2);  // dead weights and bias
    Params p = make_params(g, 1);
    Tensor x(1, 4, cfg.d_model(), 0.5);
    GradientSet gs = backward(forward_tape(g, p, x), p);
    CHECK(!gs.has(0));
    CHECK(!gs.has(1));
}
