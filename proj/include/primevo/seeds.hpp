// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "primevo/dna.hpp"
#include "primevo/tensor.hpp"

namespace primevo {

// Canonical programs. The transformer seed is split into its ten conceptual
// subprograms; the primer program reproduces the discovered model's full
// instruction sequence (including its dead instructions and constant-multiply
// quirks) so its flattened listing is reproducible line for line.
const Dna& transformer_seed();
const Dna& primer_seed();
const Dna& primer_ez_seed();          // transformer + squared ReLU + MDHA
const Dna& transformer_gelu_seed();
const Dna& transformer_pp_seed();     // SwiGLU + RMS-style norm
Dna primer_verbatim();                // flat single-subprogram form of primer

// Name -> program lookup ("transformer", "primer", "primer_ez",
// "transformer_gelu", "transformer_pp", "primer_verbatim").
std::optional<Dna> seed_by_name(const std::string& name);
std::vector<std::string> seed_names();
// Scale unit at which the seed's flattened listing shows its native sizes.
int seed_native_scale_unit(const std::string& name);

// Toggleable modifications; each is an idempotent Dna -> Dna transform.
enum class ModificationFlag {
    SquaredRelu,
    Mdha,
    SharedQk,
    PrePostNorm,
    CustomNorm,
    Bottleneck12x,
    PostSoftmaxSpatialGating,
    Gelu,
    SwigluPp,
};

const char* modification_name(ModificationFlag flag);
std::optional<ModificationFlag> modification_from_name(const std::string& name);
std::vector<ModificationFlag> all_modifications();

// Insert the modification (insertion studies). variable_seq marks a stack
// configured for variable sequence lengths, which rejects spatial gating.
Dna apply_modification(const Dna& dna, ModificationFlag flag, bool variable_seq = false);
// Undo the modification (ablation studies).
Dna remove_modification(const Dna& dna, ModificationFlag flag);
bool modification_applicable(const Dna& dna, ModificationFlag flag, bool variable_seq = false);

// Activation zoo, closed forms.
enum class Activation { Relu, SquaredRelu, GeluApprox, Swish, Reglu, Swiglu };
std::optional<Activation> activation_from_name(const std::string& name);

Tensor activation(Activation kind, const Tensor& x);  // pointwise kinds only
// GLU variants: y = act(x.V) * (x.U) with weight tensors (1, c, h).
Tensor activation_glu(Activation kind, const Tensor& x, const Tensor& u, const Tensor& v);

Tensor squared_relu(const Tensor& x);

// Dense head projection followed by a causal width-3 depthwise conv.
Tensor mdha_projection(const Tensor& x, const Tensor& proj_w, const Tensor& proj_b,
                       const Tensor& dconv_taps);

// Normalization with the variance term replaced by mean(x * (x - mu)).
Tensor custom_norm(const Tensor& x);
Tensor standard_z_norm(const Tensor& x);

}  // namespace primevo
