// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "primevo/tensor.hpp"

namespace primevo {

// Search-space primitives (first kNumPrimitives entries, vocabulary order)
// followed by infrastructure ops that only appear in compiled graphs.
enum class Op : std::uint8_t {
    Add,
    Difference,
    Divide,
    Multiply,
    AbsRoot,
    Square,
    Exp,
    Log,
    CMul,
    Abs,
    Recip,
    Sign,
    Cos,
    Sin,
    Tanh,
    Max,
    Min,
    Scale,
    Shift,
    Sigmoid,
    Mask,
    CumProd,
    CumSum,
    RedMean,
    RedSum,
    RedMin,
    RedMax,
    RedProd,
    MatMul,
    TMatMul,
    Conv1x1,
    Conv3x1,
    Conv7x1,
    Conv15x1,
    Conv31x1,
    DConv3x1,
    DConv7x1,
    DConv15x1,
    DConv31x1,
    // -- graph-only ops below --
    Input,
    Concat,
    TileChannels,
    TruncChannels,
    Embed,
    PosEmbed,
    Project,
    ProjectTied,
    SoftmaxXent,
    SumAll,
};

constexpr int kNumPrimitives = 39;

inline bool is_primitive(Op op) { return static_cast<int>(op) < kNumPrimitives; }

struct OpTraits {
    const char* name;    // canonical display name, program-listing style
    bool uses_input2;    // second tensor argument
    bool uses_constant;  // constants-bank argument
    bool uses_dim;       // dims-bank argument (output width)
    bool parameterized;  // owns trainable parameters
    int conv_width;      // spatial kernel width; 1 = dense projection; 0 = n/a
    bool depthwise;
};

const OpTraits& op_traits(Op op);
const char* op_name(Op op);
// Lookup by canonical display name; nullopt when unknown.
std::optional<Op> op_from_name(const std::string& name);

// Families, as used by the kernel entry points.
bool is_binary_elementwise(Op op);  // ADD / DIFFERENCE / DIVIDE / MULTIPLY
bool is_unary_elementwise(Op op);   // ABS_SQUARE_ROOT .. SIGMOID (incl. C-MUL/MAX/MIN)
bool is_reduction(Op op);
bool is_cumulative(Op op);
bool is_matmul(Op op);
bool is_conv(Op op);  // dense + full conv + depthwise families

// Numeric guards: keep every kernel total on finite inputs.
struct Guards {
    bool enabled = true;
};
constexpr double kClampMagnitude = 1e150;  // post-op magnitude clamp
constexpr double kExpArgCap = 80.0;        // EXP input cap
constexpr double kLogFloor = 1e-12;        // LOG |input| floor

double guard_value(double v, const Guards& g);

namespace kernels {

// Elementwise unary family; `constant` is read by C-MUL / MAX / MIN only.
Tensor apply_unary(Op op, const Tensor& x, double constant, const Guards& g = {});

// Elementwise binary family; operands must agree in batch/seq, and in channel
// unless one side has channel 1 (keep-dims broadcast).
Tensor apply_binary(Op op, const Tensor& x, const Tensor& y, const Guards& g = {});

// Channel-axis reduction with keep-dims: (b, s, c) -> (b, s, 1).
Tensor apply_reduction(Op op, const Tensor& x, const Guards& g = {});

// Inclusive scan along the sequence axis (causal by construction).
Tensor apply_cumulative(Op op, const Tensor& x, const Guards& g = {});

// Lower-triangular keep (diagonal included); trailing axes must be square.
Tensor apply_mask(const Tensor& x);

// MAT_MUL:   out[.,i,c] = sum_j a[.,i,j] * b[.,j,c]   (needs a.channel == b.seq)
// T_MAT_MUL: out[.,i,j] = sum_c a[.,i,c] * b[.,j,c]   (needs equal channel)
// `causal` restricts MAT_MUL contraction to j <= i and zeroes T_MAT_MUL
// entries with j > i; compiled graphs always set it.
Tensor matmul_pair(Op op, const Tensor& a, const Tensor& b, bool causal = false,
                   const Guards& g = {});

// Dense channel projection with bias: weights (1, c_in, c_out), bias (1, 1, c_out).
Tensor conv1x1(const Tensor& x, const Tensor& weights, const Tensor& bias,
               const Guards& g = {});

// Full causal convolution of width k: weights (k, c_in, c_out), bias (1, 1, c_out).
// Inputs are left-shifted by (k - 1) so position i sees only positions <= i.
Tensor conv_kx1(const Tensor& x, const Tensor& weights, const Tensor& bias, int k,
                const Guards& g = {});

// Causal depthwise convolution: weights (1, k, c); no bias; out width = in width.
Tensor dconv_kx1(const Tensor& x, const Tensor& weights, int k, const Guards& g = {});

// Learned per-channel gain (SCALE, init 1) and bias (SHIFT, init 0).
Tensor apply_learned(Op op, const Tensor& x, const Tensor& vec, const Guards& g = {});

Tensor concat_channels(const std::vector<const Tensor*>& parts);
Tensor tile_channels(const Tensor& x, int target);
Tensor trunc_channels(const Tensor& x, int target);

// Stack plumbing.
Tensor embed(const Tensor& ids, const Tensor& table);                 // table (1, V, d)
Tensor pos_add(const Tensor& x, const Tensor& table);                 // table (1, seq, d)
Tensor project(const Tensor& x, const Tensor& weights);               // weights (1, d, V)
Tensor project_tied(const Tensor& x, const Tensor& embed_table);      // table (1, V, d)
Tensor softmax_xent(const Tensor& logits, const Tensor& targets);     // -> (1,1,1)
Tensor sum_all(const Tensor& x);

}  // namespace kernels

// Output channel width as a total function of input widths and the dim
// argument; `seq` is the compile-time sequence length. Throws ShapeMismatch /
// CompileError for the cases the compiler must reject.
int out_width(Op op, int w1, int w2, int dim_arg, int seq);

}  // namespace primevo
